//! The sparse-regression inner code.
//!
//! An outer codeword over F_q is indexed into L one-hot sections of length
//! q, stacked into a block-sparse vector s, and compressed through an
//! n x qL Gaussian sensing matrix: x = A s. Each user owns an independent
//! matrix drawn i.i.d. N(0, 1/n) from a seeded, counter-keyed generator, so
//! matrices never need to be stored to be reproducible.

use crate::nbldpc::LdpcCode;
use crate::sectional::SectionalVector;
use crate::seeding::derive_seed;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::fmt;

/// Index map phi from F_q symbols to section offsets. The identity on bit
/// patterns satisfies phi(0)=0 and phi(1)=1 and keeps readouts transparent.
#[inline]
pub fn index_symbol(v: u16) -> usize {
    v as usize
}

/// Inverse of [`index_symbol`].
#[inline]
pub fn inverse_index(i: usize) -> u16 {
    i as u16
}

/// One-hot expansion of a symbol sequence: section l is e_{phi(v_l)}.
pub fn to_sparse(symbols: &[u16], q: usize) -> SectionalVector {
    debug_assert!(symbols.iter().all(|&s| (s as usize) < q));
    SectionalVector::one_hot(symbols, q)
}

/// Default cap on dense sensing-matrix allocations (2 GiB).
pub const DEFAULT_MATRIX_BUDGET: usize = 2 << 30;

/// Serial/parallel crossover for the matrix products: below this many
/// entries the rayon dispatch overhead outweighs the work.
const PAR_THRESHOLD_ENTRIES: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// Columns materialized in memory (column-major).
    Dense,
    /// Columns regenerated from the keyed generator on every product.
    Streamed,
}

#[derive(Debug, Clone)]
pub enum MatrixError {
    /// A dense allocation would exceed the memory budget.
    BudgetExceeded { required: usize, budget: usize },
    GeometryMismatch { expected: usize, got: usize },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::BudgetExceeded { required, budget } => write!(
                f,
                "dense sensing matrix needs {required} bytes (budget {budget}); \
                 use streamed mode"
            ),
            MatrixError::GeometryMismatch { expected, got } => {
                write!(f, "operand length {got} does not match matrix geometry {expected}")
            }
        }
    }
}

impl std::error::Error for MatrixError {}

/// One user's n x qL sensing matrix, reproducible from its seed.
///
/// Column (section l, offset c) is an independent N(0, 1/n) draw keyed by
/// (seed, l, c); dense and streamed modes therefore produce bit-identical
/// products. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    n: usize,
    sections: usize,
    width: usize,
    seed: u64,
    columns: Option<Vec<f64>>, // column-major, n * qL when dense
}

impl SensingMatrix {
    /// Dense matrix under the default memory budget. Errors if the
    /// allocation would exceed it, pointing at streamed mode.
    pub fn sample(seed: u64, n: usize, sections: usize, width: usize) -> Result<Self, MatrixError> {
        Self::with_budget(seed, n, sections, width, DEFAULT_MATRIX_BUDGET)
    }

    pub fn with_budget(
        seed: u64,
        n: usize,
        sections: usize,
        width: usize,
        budget: usize,
    ) -> Result<Self, MatrixError> {
        assert!(n >= 1 && sections >= 1 && width >= 1);
        let required = n * sections * width * std::mem::size_of::<f64>();
        if required > budget {
            return Err(MatrixError::BudgetExceeded { required, budget });
        }
        let mut m = Self { n, sections, width, seed, columns: None };
        let total_cols = sections * width;
        let mut columns = vec![0.0; n * total_cols];
        columns
            .chunks_mut(n)
            .enumerate()
            .for_each(|(j, col)| m.fill_column(j / width, j % width, col));
        m.columns = Some(columns);
        Ok(m)
    }

    /// Streamed matrix: nothing stored, columns regenerated per product.
    pub fn streamed(seed: u64, n: usize, sections: usize, width: usize) -> Self {
        assert!(n >= 1 && sections >= 1 && width >= 1);
        Self { n, sections, width, seed, columns: None }
    }

    pub fn mode(&self) -> StorageMode {
        if self.columns.is_some() {
            StorageMode::Dense
        } else {
            StorageMode::Streamed
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn sections(&self) -> usize {
        self.sections
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn fill_column(&self, section: usize, offset: usize, out: &mut [f64]) {
        let key = derive_seed(self.seed, &[section as u64, offset as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let scale = 1.0 / (self.n as f64).sqrt();
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *x = g * scale;
        }
    }

    /// Materializes one column; mainly for tests and statistics checks.
    pub fn column(&self, section: usize, offset: usize) -> Vec<f64> {
        if let Some(cols) = &self.columns {
            let j = section * self.width + offset;
            cols[j * self.n..(j + 1) * self.n].to_vec()
        } else {
            let mut col = vec![0.0; self.n];
            self.fill_column(section, offset, &mut col);
            col
        }
    }

    fn parallel(&self) -> bool {
        self.n * self.sections * self.width >= PAR_THRESHOLD_ENTRIES
    }

    /// x = A s. Sections are accumulated in ascending order regardless of
    /// worker count, so results are bit-identical across thread pools.
    pub fn apply(&self, s: &SectionalVector) -> Vec<f64> {
        assert_eq!(s.sections(), self.sections, "section count mismatch");
        assert_eq!(s.width(), self.width, "section width mismatch");
        let partials: Vec<Vec<f64>> = if self.parallel() {
            (0..self.sections)
                .into_par_iter()
                .map(|l| self.apply_section(l, s.section(l)))
                .collect()
        } else {
            (0..self.sections).map(|l| self.apply_section(l, s.section(l))).collect()
        };
        let mut out = vec![0.0; self.n];
        for partial in &partials {
            for (o, &p) in out.iter_mut().zip(partial) {
                *o += p;
            }
        }
        out
    }

    fn apply_section(&self, section: usize, coeffs: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        if let Some(cols) = &self.columns {
            let base = section * self.width;
            for (c, &w) in coeffs.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let col = &cols[(base + c) * self.n..(base + c + 1) * self.n];
                for (a, &x) in acc.iter_mut().zip(col) {
                    *a += w * x;
                }
            }
        } else {
            let mut col = vec![0.0; self.n];
            for (c, &w) in coeffs.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                self.fill_column(section, c, &mut col);
                for (a, &x) in acc.iter_mut().zip(&col) {
                    *a += w * x;
                }
            }
        }
        acc
    }

    /// r = A^T z, sectioned.
    pub fn apply_transpose(&self, z: &[f64]) -> SectionalVector {
        assert_eq!(z.len(), self.n, "observation length mismatch");
        let mut out = SectionalVector::zeros(self.sections, self.width);
        let width = self.width;
        let work = |l: usize, sec: &mut [f64]| {
            if let Some(cols) = &self.columns {
                let base = l * width;
                for (c, val) in sec.iter_mut().enumerate() {
                    let col = &cols[(base + c) * self.n..(base + c + 1) * self.n];
                    *val = dot(col, z);
                }
            } else {
                let mut col = vec![0.0; self.n];
                for (c, val) in sec.iter_mut().enumerate() {
                    self.fill_column(l, c, &mut col);
                    *val = dot(&col, z);
                }
            }
        };
        if self.parallel() {
            out.as_mut_slice()
                .par_chunks_mut(width)
                .enumerate()
                .for_each(|(l, sec)| work(l, sec));
        } else {
            for l in 0..self.sections {
                work(l, out.section_mut(l));
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SR encoding: x = A s for a one-hot (or any sectional) state vector.
pub fn sr_encode(a: &SensingMatrix, s: &SectionalVector) -> Vec<f64> {
    a.apply(s)
}

/// Per-section argmax readout back to F_q symbols, ties toward the lowest
/// index.
pub fn hard_decision(beliefs: &SectionalVector) -> Vec<u16> {
    beliefs.argmax_symbols().iter().map(|&i| inverse_index(i as usize)).collect()
}

/// Packs information bits (little-endian within each p-bit group) into F_q
/// symbols for the outer encoder.
pub fn bits_to_symbols(bits: &[u8], p: u32) -> Vec<u16> {
    assert_eq!(bits.len() % p as usize, 0, "bit count must be a multiple of p");
    bits.chunks(p as usize)
        .map(|chunk| {
            chunk.iter().enumerate().fold(0u16, |acc, (i, &b)| {
                debug_assert!(b <= 1);
                acc | ((b as u16) << i)
            })
        })
        .collect()
}

/// Little-endian p-bit expansion of each symbol.
pub fn symbols_to_bits(symbols: &[u16], p: u32) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * p as usize);
    for &s in symbols {
        for i in 0..p {
            bits.push(((s >> i) & 1) as u8);
        }
    }
    bits
}

/// Extracts the information bits behind a hard-decision codeword: the p-bit
/// little-endian expansions of the systematic symbols.
pub fn extract_info_bits(code: &LdpcCode, v_hat: &[u16]) -> Vec<u8> {
    symbols_to_bits(&code.extract_info(v_hat), code.field().bits())
}
