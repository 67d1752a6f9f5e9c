//! Belief propagation over the non-binary factor graph.
//!
//! Messages are pmfs over F_q kept in the linear probability domain with
//! per-pmf renormalization. Check-node updates are XOR-convolutions over
//! (F_q, +): each incoming pmf is permuted by its edge weight, transformed
//! by the length-q Walsh-Hadamard transform, multiplied pointwise with a
//! leave-one-out prefix/suffix scheme, and transformed back.

use super::LdpcCode;
use crate::sectional::SectionalVector;

/// Values below this are clipped before renormalization.
const CLIP_FLOOR: f64 = 1e-300;

/// In-place Walsh-Hadamard transform; `xs.len()` must be a power of two.
/// Unnormalized, so `wht(wht(x)) = len * x`.
pub fn wht_inplace(xs: &mut [f64]) {
    let n = xs.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let a = xs[j];
                let b = xs[j + h];
                xs[j] = a + b;
                xs[j + h] = a - b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Renormalizes one pmf in place. Entries below the clip floor (including
/// negative round-off from the transform domain) are flushed to zero first.
/// Returns true when the section had collapsed (non-finite entries or no
/// remaining mass) and was reset to uniform.
fn normalize_section(xs: &mut [f64]) -> bool {
    let mut sum = 0.0;
    let mut finite = true;
    for x in xs.iter_mut() {
        if !x.is_finite() {
            finite = false;
            break;
        }
        if *x < CLIP_FLOOR {
            *x = 0.0;
        }
        sum += *x;
    }
    if !finite || sum <= 0.0 {
        let u = 1.0 / xs.len() as f64;
        for x in xs.iter_mut() {
            *x = u;
        }
        return true;
    }
    let inv = 1.0 / sum;
    for x in xs.iter_mut() {
        *x *= inv;
    }
    false
}

/// Per-edge message storage, reusable across denoiser calls for one user.
#[derive(Debug, Clone)]
pub struct BeliefState {
    q: usize,
    /// Variable-to-check messages, edge-major.
    v2c: Vec<f64>,
    /// Check-to-variable messages, edge-major.
    c2v: Vec<f64>,
    /// Sections reset to uniform after mass collapse, cumulative.
    pub underflow_resets: u64,
    // scratch buffers for the check-node update
    wht_buf: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    conv: Vec<f64>,
}

impl BeliefState {
    pub fn new(code: &LdpcCode) -> Self {
        let q = code.field().order();
        let edges = code.num_edges();
        let dmax = code.max_check_degree();
        BeliefState {
            q,
            v2c: vec![0.0; edges * q],
            c2v: vec![0.0; edges * q],
            underflow_resets: 0,
            wht_buf: vec![0.0; dmax * q],
            prefix: vec![0.0; (dmax + 1) * q],
            suffix: vec![0.0; q],
            conv: vec![0.0; q],
        }
    }

    #[cfg(test)]
    fn edge(&self, which: Which, e: usize) -> &[f64] {
        let buf = match which {
            Which::V2c => &self.v2c,
            Which::C2v => &self.c2v,
        };
        &buf[e * self.q..(e + 1) * self.q]
    }
}

#[cfg(test)]
#[derive(Clone, Copy)]
enum Which {
    V2c,
    C2v,
}

/// Runs `iterations` rounds of message passing seeded with `priors` and
/// returns the per-section beliefs.
///
/// With `iterations = 0` the beliefs equal the priors exactly. Each belief
/// section satisfies beliefs[l](g) proportional to
/// priors[l](g) * prod over adjacent checks of msg_{c->l}(g).
pub fn bp_denoiser_round(
    code: &LdpcCode,
    priors: &SectionalVector,
    state: &mut BeliefState,
    iterations: usize,
) -> SectionalVector {
    let q = code.field().order();
    assert_eq!(priors.sections(), code.length(), "priors/code geometry mismatch");
    assert_eq!(priors.width(), q, "priors/field geometry mismatch");

    if iterations == 0 {
        return priors.clone();
    }

    // seed messages: v2c from priors, c2v multiplicative identity
    for (e, &var) in edge_vars(code).iter().enumerate() {
        state.v2c[e * q..(e + 1) * q].copy_from_slice(priors.section(var));
    }
    state.c2v.fill(1.0);

    for it in 0..iterations {
        check_node_update(code, state);
        if it + 1 < iterations {
            variable_node_update(code, priors, state);
        }
    }

    let mut beliefs = SectionalVector::zeros(code.length(), q);
    for v in 0..code.length() {
        let out = beliefs.section_mut(v);
        out.copy_from_slice(priors.section(v));
        for &e in &code.var_edges()[v] {
            let msg = &state.c2v[e * q..(e + 1) * q];
            for (o, &m) in out.iter_mut().zip(msg) {
                *o *= m;
            }
        }
        if normalize_section(out) {
            state.underflow_resets += 1;
        }
    }
    beliefs
}

fn edge_vars(code: &LdpcCode) -> Vec<usize> {
    let mut vars = vec![0usize; code.num_edges()];
    for (c, row) in code.check_edges().iter().enumerate() {
        let base = code.edge_offsets()[c];
        for (i, &(v, _)) in row.iter().enumerate() {
            vars[base + i] = v;
        }
    }
    vars
}

fn check_node_update(code: &LdpcCode, state: &mut BeliefState) {
    let q = state.q;
    let field = code.field();
    for (c, row) in code.check_edges().iter().enumerate() {
        let base = code.edge_offsets()[c];
        let d = row.len();

        // permute each incoming pmf by its edge weight (g -> w*g), WHT it
        for (i, &(_, w)) in row.iter().enumerate() {
            let msg = &state.v2c[(base + i) * q..(base + i + 1) * q];
            let buf = &mut state.wht_buf[i * q..(i + 1) * q];
            for (g, &val) in msg.iter().enumerate() {
                buf[field.mul(w, g as u16) as usize] = val;
            }
            wht_inplace(buf);
        }

        // prefix[i] = product of transforms 0..i
        state.prefix[..q].fill(1.0);
        for i in 0..d {
            let (done, rest) = state.prefix.split_at_mut((i + 1) * q);
            let prev = &done[i * q..];
            let w = &state.wht_buf[i * q..(i + 1) * q];
            for g in 0..q {
                rest[g] = prev[g] * w[g];
            }
        }

        // walk backwards keeping a running suffix product
        state.suffix.fill(1.0);
        let inv_q = 1.0 / q as f64;
        for i in (0..d).rev() {
            for g in 0..q {
                state.conv[g] = state.prefix[i * q + g] * state.suffix[g];
            }
            wht_inplace(&mut state.conv);
            let (_, w) = row[i];
            let out = &mut state.c2v[(base + i) * q..(base + i + 1) * q];
            for g in 0..q {
                out[g] = state.conv[field.mul(w, g as u16) as usize] * inv_q;
            }
            if normalize_section(out) {
                state.underflow_resets += 1;
            }
            let wv = &state.wht_buf[i * q..(i + 1) * q];
            for g in 0..q {
                state.suffix[g] *= wv[g];
            }
        }
    }
}

fn variable_node_update(code: &LdpcCode, priors: &SectionalVector, state: &mut BeliefState) {
    let q = state.q;
    for v in 0..code.length() {
        let edges = &code.var_edges()[v];
        for (i, &e) in edges.iter().enumerate() {
            let mut msg = priors.section(v).to_vec();
            for (j, &other) in edges.iter().enumerate() {
                if j == i {
                    continue;
                }
                let inc = &state.c2v[other * q..(other + 1) * q];
                for (m, &x) in msg.iter_mut().zip(inc) {
                    *m *= x;
                }
            }
            let reset = normalize_section(&mut msg);
            if reset {
                state.underflow_resets += 1;
            }
            state.v2c[e * q..(e + 1) * q].copy_from_slice(&msg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::FieldTable;
    use rand::Rng;

    fn gf4() -> FieldTable {
        FieldTable::with_default_modulus(2).unwrap()
    }

    /// A cycle-free GF(4) code: two checks sharing variable 2.
    fn tree_code() -> LdpcCode {
        LdpcCode::from_checks(
            gf4(),
            5,
            vec![vec![(0, 1), (1, 2), (2, 3)], vec![(2, 2), (3, 1), (4, 3)]],
        )
        .unwrap()
    }

    fn random_priors(l: usize, q: usize, seed: u64) -> SectionalVector {
        let mut rng = crate::seeding::stream(seed, &[]);
        let mut p = SectionalVector::zeros(l, q);
        for s in 0..l {
            let sec = p.section_mut(s);
            let mut sum = 0.0;
            for x in sec.iter_mut() {
                *x = rng.random::<f64>() + 1e-3;
                sum += *x;
            }
            for x in sec.iter_mut() {
                *x /= sum;
            }
        }
        p
    }

    /// Exact per-symbol posteriors by enumerating every codeword.
    fn enumeration_posterior(code: &LdpcCode, priors: &SectionalVector) -> SectionalVector {
        let q = code.field().order();
        let k = code.info_symbols();
        let mut post = SectionalVector::zeros(code.length(), q);
        for idx in 0..q.pow(k as u32) {
            let mut w = vec![0u16; k];
            let mut rest = idx;
            for slot in w.iter_mut() {
                *slot = (rest % q) as u16;
                rest /= q;
            }
            let v = code.encode(&w).unwrap();
            let weight: f64 =
                v.iter().enumerate().map(|(l, &sym)| priors.section(l)[sym as usize]).product();
            for (l, &sym) in v.iter().enumerate() {
                post.section_mut(l)[sym as usize] += weight;
            }
        }
        for l in 0..code.length() {
            let sec = post.section_mut(l);
            let sum: f64 = sec.iter().sum();
            for x in sec.iter_mut() {
                *x /= sum;
            }
        }
        post
    }

    #[test]
    fn wht_roundtrip() {
        let mut rng = crate::seeding::stream(5, &[]);
        for len in [2usize, 4, 16, 256] {
            let orig: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut x = orig.clone();
            wht_inplace(&mut x);
            wht_inplace(&mut x);
            for (a, b) in x.iter().zip(&orig) {
                assert!((a / len as f64 - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_iterations_returns_priors_exactly() {
        let code = tree_code();
        let priors = random_priors(5, 4, 77);
        let mut state = BeliefState::new(&code);
        let beliefs = bp_denoiser_round(&code, &priors, &mut state, 0);
        assert_eq!(beliefs.as_slice(), priors.as_slice());
    }

    #[test]
    fn tree_beliefs_match_enumeration_posterior() {
        let code = tree_code();
        for seed in [1u64, 2, 3] {
            let priors = random_priors(5, 4, seed);
            let mut state = BeliefState::new(&code);
            // diameter of this tree is 4 edges; 3 rounds is past saturation
            let beliefs = bp_denoiser_round(&code, &priors, &mut state, 3);
            let exact = enumeration_posterior(&code, &priors);
            for (a, b) in beliefs.as_slice().iter().zip(exact.as_slice()) {
                assert!((a - b).abs() < 1e-8, "belief {a} vs enumeration {b}");
            }
        }
    }

    #[test]
    fn larger_tree_matches_enumeration_after_depth_iterations() {
        // three checks chained through shared variables: still a tree
        let code = LdpcCode::from_checks(
            gf4(),
            7,
            vec![
                vec![(0, 1), (1, 3), (2, 2)],
                vec![(2, 1), (3, 2), (4, 1)],
                vec![(4, 3), (5, 1), (6, 2)],
            ],
        )
        .unwrap();
        let priors = random_priors(7, 4, 505);
        let mut state = BeliefState::new(&code);
        let beliefs = bp_denoiser_round(&code, &priors, &mut state, 5);
        let exact = enumeration_posterior(&code, &priors);
        for (a, b) in beliefs.as_slice().iter().zip(exact.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn codeword_certainty_is_a_fixed_point() {
        let code = tree_code();
        let v = code.encode(&[2, 1, 3]).unwrap();
        let priors = SectionalVector::one_hot(&v, 4);
        let mut state = BeliefState::new(&code);
        let beliefs = bp_denoiser_round(&code, &priors, &mut state, 4);
        assert_eq!(beliefs.as_slice(), priors.as_slice());
        assert_eq!(state.underflow_resets, 0);
    }

    #[test]
    fn messages_stay_normalized() {
        let code = LdpcCode::build(gf4(), 12, 4, 2, 3).unwrap();
        let priors = random_priors(12, 4, 99);
        let mut state = BeliefState::new(&code);
        let beliefs = bp_denoiser_round(&code, &priors, &mut state, 4);
        assert!(beliefs.is_valid_pmfs(1e-9));
        let q = 4;
        for e in 0..code.num_edges() {
            let sum: f64 = state.edge(Which::C2v, e).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "c2v edge {e} sum {sum}");
            let sum: f64 = state.edge(Which::V2c, e).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "v2c edge {e} sum {sum}");
            assert!(state.edge(Which::C2v, e).len() == q);
        }
    }

    #[test]
    fn inconsistent_hard_priors_reset_to_uniform_and_count() {
        // two variables tied by one check (plus a second check to keep M>=... L=3, M=2)
        let code = LdpcCode::from_checks(
            gf4(),
            3,
            vec![vec![(0, 1), (1, 1)], vec![(1, 1), (2, 1)]],
        )
        .unwrap();
        // priors assert v0=1, v1=2 with certainty, but check 0 demands v0+v1=0
        let mut priors = SectionalVector::zeros(3, 4);
        priors.section_mut(0)[1] = 1.0;
        priors.section_mut(1)[2] = 1.0;
        priors.section_mut(2)[0] = 1.0;
        let mut state = BeliefState::new(&code);
        let beliefs = bp_denoiser_round(&code, &priors, &mut state, 2);
        assert!(state.underflow_resets > 0, "conflict must trigger uniform resets");
        assert!(beliefs.is_valid_pmfs(1e-9));
    }
}
