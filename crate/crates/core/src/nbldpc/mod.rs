//! Non-binary LDPC codes over GF(2^p): seeded construction, systematic
//! encoding, syndrome checks, and the belief-propagation engine that serves
//! as the AMP denoiser.
//!
//! The parity-check matrix is held as adjacency lists with nonzero field
//! weights. Construction grows the binary skeleton by progressive edge
//! growth, draws edge weights uniformly from the nonzero field elements,
//! and derives a systematic encoder by Gaussian elimination over F_q.

mod bp;
mod peg;

pub use bp::{bp_denoiser_round, wht_inplace, BeliefState};

use crate::galois::{make_field, FieldTable};
use crate::seeding::{self, tag};
use rand::Rng;
use std::fmt;

/// Code construction, encoding, and parsing failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeError {
    /// Degree constraints that no graph can satisfy.
    Infeasible(String),
    /// H lost rank over F_q; the code would have more than q^(L-M) words.
    RankDeficient { rank: usize, checks: usize },
    LengthMismatch { expected: usize, got: usize },
    /// Text-format import failures.
    Parse(String),
}

impl fmt::Display for CodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeError::Infeasible(msg) => write!(f, "infeasible code parameters: {msg}"),
            CodeError::RankDeficient { rank, checks } => {
                write!(f, "parity-check matrix has rank {rank} < {checks}")
            }
            CodeError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            CodeError::Parse(msg) => write!(f, "code text format: {msg}"),
        }
    }
}

impl std::error::Error for CodeError {}

/// A sparse parity-check code over F_q with a precomputed systematic encoder.
///
/// Immutable after construction; share freely across threads and users.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    field: FieldTable,
    length: usize,
    checks: usize,
    /// Per check: (variable, weight) with weight != 0. Edge ids are assigned
    /// check-major in this order.
    check_edges: Vec<Vec<(usize, u16)>>,
    /// Per variable: global edge ids.
    var_edges: Vec<Vec<usize>>,
    edge_offsets: Vec<usize>,
    /// Sorted positions of the information symbols in a codeword.
    info_positions: Vec<usize>,
    /// Pivot (parity) positions in elimination order.
    pivot_positions: Vec<usize>,
    /// M x M inverse of H restricted to the pivot columns, row-major.
    inv_pivot: Vec<u16>,
}

impl LdpcCode {
    /// Builds an (L, L-M) code by progressive edge growth with seeded,
    /// uniformly random nonzero edge weights. Deterministic per seed. If a
    /// weight assignment leaves H rank-deficient, the construction retries
    /// with a reseeded draw.
    pub fn build(
        field: FieldTable,
        length: usize,
        checks: usize,
        variable_degree: usize,
        seed: u64,
    ) -> Result<LdpcCode, CodeError> {
        if checks == 0 || checks >= length {
            return Err(CodeError::Infeasible(format!(
                "need 0 < M < L, got M={checks}, L={length}"
            )));
        }
        if variable_degree < 2 {
            return Err(CodeError::Infeasible(format!(
                "variable degree must be >= 2, got {variable_degree}"
            )));
        }
        if variable_degree > checks {
            return Err(CodeError::Infeasible(format!(
                "variable degree {variable_degree} exceeds number of checks {checks}"
            )));
        }

        let q = field.order() as u16;
        const MAX_ATTEMPTS: u64 = 64;
        let mut last_err = None;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = seeding::stream(seed, &[tag::CODE, attempt]);
            let skeleton = peg::peg_skeleton(length, checks, variable_degree, &mut rng);
            let check_edges: Vec<Vec<(usize, u16)>> = skeleton
                .into_iter()
                .map(|vars| vars.into_iter().map(|v| (v, rng.random_range(1..q))).collect())
                .collect();
            match LdpcCode::from_checks(field.clone(), length, check_edges) {
                Ok(code) => return Ok(code),
                Err(e @ CodeError::RankDeficient { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("retry loop leaves an error"))
    }

    /// Assembles a code from explicit per-check adjacency. Used by the text
    /// import and by tests that pin exact graphs.
    pub fn from_checks(
        field: FieldTable,
        length: usize,
        check_edges: Vec<Vec<(usize, u16)>>,
    ) -> Result<LdpcCode, CodeError> {
        let checks = check_edges.len();
        if checks == 0 || checks >= length {
            return Err(CodeError::Infeasible(format!(
                "need 0 < M < L, got M={checks}, L={length}"
            )));
        }
        let q = field.order() as u16;
        let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); length];
        let mut edge_offsets = Vec::with_capacity(checks);
        let mut next_edge = 0usize;
        for row in &check_edges {
            if row.len() < 2 {
                return Err(CodeError::Infeasible(
                    "every check needs at least two edges".into(),
                ));
            }
            edge_offsets.push(next_edge);
            for &(v, w) in row {
                if v >= length {
                    return Err(CodeError::Parse(format!(
                        "variable index {v} out of range (L={length})"
                    )));
                }
                if w == 0 || w >= q {
                    return Err(CodeError::Parse(format!("edge weight {w} outside 1..{q}")));
                }
                var_edges[v].push(next_edge);
                next_edge += 1;
            }
        }
        if var_edges.iter().any(|e| e.is_empty()) {
            return Err(CodeError::Infeasible("every variable needs at least one edge".into()));
        }

        let (info_positions, pivot_positions, inv_pivot) =
            build_encoder(&field, length, &check_edges)?;

        Ok(LdpcCode {
            field,
            length,
            checks,
            check_edges,
            var_edges,
            edge_offsets,
            info_positions,
            pivot_positions,
            inv_pivot,
        })
    }

    pub fn field(&self) -> &FieldTable {
        &self.field
    }

    /// Codeword length L in symbols.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of parity checks M.
    pub fn num_checks(&self) -> usize {
        self.checks
    }

    /// Information symbols per codeword, K_sym = L - M.
    pub fn info_symbols(&self) -> usize {
        self.length - self.checks
    }

    /// Information bits per codeword.
    pub fn info_bits(&self) -> usize {
        self.info_symbols() * self.field.bits() as usize
    }

    /// Sorted codeword positions that carry the information symbols.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn check_edges(&self) -> &[Vec<(usize, u16)>] {
        &self.check_edges
    }

    pub(crate) fn var_edges(&self) -> &[Vec<usize>] {
        &self.var_edges
    }

    pub(crate) fn edge_offsets(&self) -> &[usize] {
        &self.edge_offsets
    }

    pub(crate) fn num_edges(&self) -> usize {
        self.var_edges.iter().map(|e| e.len()).sum()
    }

    pub(crate) fn max_check_degree(&self) -> usize {
        self.check_edges.iter().map(|r| r.len()).max().unwrap_or(0)
    }

    /// Systematic encoding: places `info` at the information positions and
    /// solves the parity positions so that the syndrome vanishes.
    pub fn encode(&self, info: &[u16]) -> Result<Vec<u16>, CodeError> {
        if info.len() != self.info_symbols() {
            return Err(CodeError::LengthMismatch {
                expected: self.info_symbols(),
                got: info.len(),
            });
        }
        let mut v = vec![0u16; self.length];
        for (&pos, &w) in self.info_positions.iter().zip(info) {
            v[pos] = w;
        }
        let s = self.syndrome(&v);
        let m = self.checks;
        for r in 0..m {
            let mut acc = 0u16;
            for c in 0..m {
                acc = self.field.add(acc, self.field.mul(self.inv_pivot[r * m + c], s[c]));
            }
            v[self.pivot_positions[r]] = acc;
        }
        Ok(v)
    }

    /// H*v over F_q.
    pub fn syndrome(&self, v: &[u16]) -> Vec<u16> {
        debug_assert_eq!(v.len(), self.length);
        self.check_edges
            .iter()
            .map(|row| {
                row.iter().fold(0u16, |acc, &(var, w)| {
                    self.field.add(acc, self.field.mul(w, v[var]))
                })
            })
            .collect()
    }

    pub fn is_codeword(&self, v: &[u16]) -> bool {
        self.syndrome(v).iter().all(|&s| s == 0)
    }

    /// Extracts the information symbols from a codeword.
    pub fn extract_info(&self, v: &[u16]) -> Vec<u16> {
        self.info_positions.iter().map(|&p| v[p]).collect()
    }

    /// Text export: header line `q L M`, then one line per check of
    /// whitespace-separated `var:weight` pairs.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.field.order(), self.length, self.checks);
        for row in &self.check_edges {
            let line: Vec<String> =
                row.iter().map(|&(v, w)| format!("{v}:{w}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the text format using the conventional primitive modulus for
    /// the field order found in the header.
    pub fn from_text(text: &str) -> Result<LdpcCode, CodeError> {
        let header = text
            .lines()
            .next()
            .ok_or_else(|| CodeError::Parse("empty input".into()))?;
        let q: usize = header
            .split_whitespace()
            .next()
            .ok_or_else(|| CodeError::Parse("missing header".into()))?
            .parse()
            .map_err(|e| CodeError::Parse(format!("bad q: {e}")))?;
        if !q.is_power_of_two() || q < 2 {
            return Err(CodeError::Parse(format!("q={q} is not a power of two")));
        }
        let p = q.trailing_zeros();
        let modulus = crate::galois::default_modulus(p)
            .ok_or_else(|| CodeError::Parse(format!("unsupported field order {q}")))?;
        let field = make_field(p, modulus).map_err(|e| CodeError::Parse(e.to_string()))?;
        Self::from_text_with_field(text, field)
    }

    pub fn from_text_with_field(text: &str, field: FieldTable) -> Result<LdpcCode, CodeError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| CodeError::Parse("empty input".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(CodeError::Parse("header must be `q L M`".into()));
        }
        let q: usize = parts[0].parse().map_err(|e| CodeError::Parse(format!("bad q: {e}")))?;
        let l: usize = parts[1].parse().map_err(|e| CodeError::Parse(format!("bad L: {e}")))?;
        let m: usize = parts[2].parse().map_err(|e| CodeError::Parse(format!("bad M: {e}")))?;
        if q != field.order() {
            return Err(CodeError::Parse(format!(
                "header q={q} does not match field order {}",
                field.order()
            )));
        }
        let mut check_edges = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for pair in line.split_whitespace() {
                let (vs, ws) = pair
                    .split_once(':')
                    .ok_or_else(|| CodeError::Parse(format!("check {i}: bad pair `{pair}`")))?;
                let v: usize =
                    vs.parse().map_err(|e| CodeError::Parse(format!("check {i}: {e}")))?;
                let w: u16 =
                    ws.parse().map_err(|e| CodeError::Parse(format!("check {i}: {e}")))?;
                row.push((v, w));
            }
            check_edges.push(row);
        }
        if check_edges.len() != m {
            return Err(CodeError::Parse(format!(
                "expected {m} check lines, found {}",
                check_edges.len()
            )));
        }
        Self::from_checks(field, l, check_edges)
    }
}

/// Gaussian elimination of H over F_q on the augmented system [H | I].
/// Returns (sorted info positions, pivot positions in elimination order,
/// the M x M inverse of the pivot submatrix).
fn build_encoder(
    field: &FieldTable,
    length: usize,
    check_edges: &[Vec<(usize, u16)>],
) -> Result<(Vec<usize>, Vec<usize>, Vec<u16>), CodeError> {
    let m = check_edges.len();
    let width = length + m;
    let mut rows = vec![0u16; m * width];
    for (r, row) in check_edges.iter().enumerate() {
        for &(v, w) in row {
            let cell = &mut rows[r * width + v];
            *cell = field.add(*cell, w);
        }
        rows[r * width + length + r] = 1;
    }

    let mut pivot_positions = Vec::with_capacity(m);
    let mut is_pivot = vec![false; length];
    let mut rank = 0usize;
    for col in 0..length {
        // find a row at or below `rank` with a nonzero entry in this column
        let Some(pr) = (rank..m).find(|&r| rows[r * width + col] != 0) else {
            continue;
        };
        if pr != rank {
            for c in 0..width {
                rows.swap(rank * width + c, pr * width + c);
            }
        }
        let inv = field.inv(rows[rank * width + col]);
        for c in 0..width {
            rows[rank * width + c] = field.mul(inv, rows[rank * width + c]);
        }
        for r in 0..m {
            if r == rank {
                continue;
            }
            let factor = rows[r * width + col];
            if factor == 0 {
                continue;
            }
            for c in 0..width {
                let sub = field.mul(factor, rows[rank * width + c]);
                rows[r * width + c] = field.add(rows[r * width + c], sub);
            }
        }
        pivot_positions.push(col);
        is_pivot[col] = true;
        rank += 1;
        if rank == m {
            break;
        }
    }
    if rank < m {
        return Err(CodeError::RankDeficient { rank, checks: m });
    }

    let info_positions: Vec<usize> = (0..length).filter(|&c| !is_pivot[c]).collect();
    let mut inv_pivot = vec![0u16; m * m];
    for r in 0..m {
        for c in 0..m {
            inv_pivot[r * m + c] = rows[r * width + length + c];
        }
    }
    Ok((info_positions, pivot_positions, inv_pivot))
}
