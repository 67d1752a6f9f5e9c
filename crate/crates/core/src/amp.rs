//! Joint AMP-BP decoding by coded demixing.
//!
//! Every user's estimated contribution is formed from its own state and the
//! shared (per-AP) residual, the residual explains what no user has claimed
//! yet, and the per-user denoiser runs belief propagation on the outer LDPC
//! factor graph with Gaussian-posterior priors. The Onsager term uses the
//! closed-form divergence of the denoiser.
//!
//! Iteration structure, single cell:
//!
//! ```text
//! y_hat_k = A_k s_k - (1/n) z_prev div_prev_k
//! z       = y - sum_k y_hat_k
//! tau^2   = |z|^2 / n
//! r_k     = A_k^T z + s_k
//! s_k     <- BP(softmax(r_k / tau^2))
//! ```
//!
//! The cell-free decoder keeps one residual and one tau^2 per access point,
//! combines the per-AP effective observations with inverse-variance weights,
//! and applies the per-AP Onsager term with that AP's residual and tau^2.

use crate::channel::Topology;
use crate::nbldpc::{bp_denoiser_round, BeliefState, LdpcCode};
use crate::sectional::SectionalVector;
use crate::sparc::{self, SensingMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One user's decoding material: a sensing matrix and the outer code.
#[derive(Clone, Copy)]
pub struct UserCodebook<'a> {
    pub user_id: usize,
    pub matrix: &'a SensingMatrix,
    pub code: &'a LdpcCode,
}

/// State initialization for the first iteration. The all-uniform pmf is the
/// zero-information prior; the literal all-zero vector is kept as an option
/// and converges to the same trajectory within two iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Uniform,
    Zero,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecoderConfig {
    /// AMP iterations T.
    pub t_amp: usize,
    /// BP rounds inside each denoiser call.
    pub bp_iterations: usize,
    /// Stop once every user's hard decision satisfies its syndrome.
    pub early_stop: bool,
    pub init: InitMode,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { t_amp: 25, bp_iterations: 1, early_stop: true, init: InitMode::Uniform }
    }
}

/// Per-iteration diagnostics record; one tau^2/residual entry per AP.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub tau2: Vec<f64>,
    pub residual_norm: Vec<f64>,
    pub syndrome_ok: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AbortRecord {
    pub iteration: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub sigma2: f64,
    pub iterations: Vec<IterationRecord>,
    /// Set when a non-finite value stopped the decode; the trial should be
    /// discarded as a frame error by the caller.
    pub abort: Option<AbortRecord>,
    /// Iteration at which early termination fired, if it did.
    pub converged_at: Option<usize>,
    /// Belief-propagation sections reset after mass collapse.
    pub underflow_resets: u64,
}

#[derive(Debug, Clone)]
pub struct UserDecode {
    pub user_id: usize,
    /// Hard-decision codeword symbols.
    pub symbols: Vec<u16>,
    /// Little-endian information bits behind the systematic symbols.
    pub info_bits: Vec<u8>,
    pub syndrome_ok: bool,
    /// Final state estimate (per-section pmfs).
    pub final_state: SectionalVector,
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub users: Vec<UserDecode>,
    pub diagnostics: Diagnostics,
}

impl DecodeResult {
    pub fn aborted(&self) -> bool {
        self.diagnostics.abort.is_some()
    }
}

/// tau^2 = |z|^2 / n.
pub fn estimate_tau2(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64
}

/// r_k = A_k^T z + s_k.
pub fn effective_observation(
    a: &SensingMatrix,
    z: &[f64],
    s: &SectionalVector,
) -> SectionalVector {
    let mut r = a.apply_transpose(z);
    r.axpy(1.0, s);
    r
}

/// Posterior pmf over F_q induced by one effective-observation section.
///
/// alpha(g) is proportional to exp(-|r - e_g|^2 / (2 tau^2)); the distances
/// differ across g only through -2 r_g, so this is softmax(r / tau^2),
/// computed with max subtraction. tau^2 <= 0 degenerates to a one-hot at the
/// argmax (lowest index on ties).
pub fn section_posterior(r_section: &[f64], tau2: f64, out: &mut [f64]) {
    debug_assert_eq!(r_section.len(), out.len());
    let mut best = 0usize;
    for (i, &x) in r_section.iter().enumerate().skip(1) {
        if x > r_section[best] {
            best = i;
        }
    }
    if tau2 <= 0.0 {
        out.fill(0.0);
        out[best] = 1.0;
        return;
    }
    let max = r_section[best];
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(r_section) {
        *o = ((x - max) / tau2).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

/// Applies [`section_posterior`] to every section of r.
pub fn posterior_priors(r: &SectionalVector, tau2: f64) -> SectionalVector {
    let mut priors = SectionalVector::zeros(r.sections(), r.width());
    for l in 0..r.sections() {
        section_posterior(r.section(l), tau2, priors.section_mut(l));
    }
    priors
}

/// The BP denoiser: symbol-wise Gaussian posteriors refined by `iterations`
/// rounds of message passing on the outer code. With zero iterations this
/// reduces to the section-wise posterior itself.
pub fn bp_denoise(
    code: &LdpcCode,
    r: &SectionalVector,
    tau2: f64,
    iterations: usize,
    state: &mut BeliefState,
) -> SectionalVector {
    let priors = posterior_priors(r, tau2);
    bp_denoiser_round(code, &priors, state, iterations)
}

/// Closed-form divergence of the BP denoiser: (|eta|_1 - |eta|_2^2)/tau^2,
/// which is (L - |s|^2)/tau^2 for normalized per-section pmfs. Returns 0 in
/// the degenerate tau^2 = 0 regime where the denoiser is locally constant.
pub fn onsager_divergence(s_next: &SectionalVector, tau2: f64) -> f64 {
    if tau2 <= 0.0 {
        return 0.0;
    }
    (s_next.sections() as f64 - s_next.norm2_sq()) / tau2
}

/// Estimated contribution of one user: y_hat = A s - (div_prev / n) z_prev.
pub fn user_contribution(
    a: &SensingMatrix,
    s: &SectionalVector,
    z_prev: &[f64],
    div_prev: f64,
) -> Vec<f64> {
    let mut y_hat = a.apply(s);
    if div_prev != 0.0 {
        let scale = div_prev / a.rows() as f64;
        for (v, &zp) in y_hat.iter_mut().zip(z_prev) {
            *v -= zp * scale;
        }
    }
    y_hat
}

/// z = y - sum_k y_hat_k, summed in caller-supplied (user) order.
pub fn residual(y: &[f64], contributions: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; y.len()];
    for c in contributions {
        debug_assert_eq!(c.len(), y.len());
        for (a, &v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    y.iter().zip(&acc).map(|(&yv, &av)| yv - av).collect()
}

/// Inverse-variance combining weights c_j = 1 / sum_i (tau_j^2 / tau_i^2).
/// A noiseless observation dominates: the first tau^2 = 0 gets weight 1.
pub fn combining_weights(tau2s: &[f64]) -> Vec<f64> {
    assert!(!tau2s.is_empty());
    if let Some(zi) = tau2s.iter().position(|&t| t <= 0.0) {
        let mut w = vec![0.0; tau2s.len()];
        w[zi] = 1.0;
        return w;
    }
    tau2s
        .iter()
        .map(|&tj| 1.0 / tau2s.iter().map(|&ti| tj / ti).sum::<f64>())
        .collect()
}

/// Effective noise variance after optimal combining: 1 / sum_b (1/tau_b^2).
pub fn combined_variance(tau2s: &[f64]) -> f64 {
    if tau2s.iter().any(|&t| t <= 0.0) {
        return 0.0;
    }
    1.0 / tau2s.iter().map(|&t| 1.0 / t).sum::<f64>()
}

/// Master effective observation r_k = sum_b c_b r_{b,k} and its variance.
/// A single observation passes through untouched.
pub fn combine_effective_observations(
    observations: &[SectionalVector],
    tau2s: &[f64],
) -> (SectionalVector, f64) {
    assert_eq!(observations.len(), tau2s.len());
    assert!(!observations.is_empty());
    if observations.len() == 1 {
        return (observations[0].clone(), tau2s[0]);
    }
    let weights = combining_weights(tau2s);
    let mut combined = SectionalVector::zeros(observations[0].sections(), observations[0].width());
    for (obs, &w) in observations.iter().zip(&weights) {
        combined.axpy(w, obs);
    }
    (combined, combined_variance(tau2s))
}

fn initial_state(init: InitMode, sections: usize, width: usize) -> SectionalVector {
    match init {
        InitMode::Uniform => SectionalVector::uniform(sections, width),
        InitMode::Zero => SectionalVector::zeros(sections, width),
    }
}

fn check_geometry(y_len: usize, codebooks: &[UserCodebook<'_>]) {
    assert!(!codebooks.is_empty(), "need at least one user");
    for cb in codebooks {
        assert_eq!(cb.matrix.rows(), y_len, "matrix rows must match observation length");
        assert_eq!(cb.matrix.sections(), cb.code.length(), "matrix/code section mismatch");
        assert_eq!(cb.matrix.width(), cb.code.field().order(), "matrix/field width mismatch");
    }
}

struct UserWork {
    state: SectionalVector,
    bp: BeliefState,
    /// div_raw = L - |s|^2 of the latest denoiser output.
    div_raw: f64,
    /// tau^2 the latest denoiser consumed (single-cell scalar path).
    div_prev: f64,
    symbols: Vec<u16>,
    syndrome_ok: bool,
}

impl UserWork {
    fn new(cb: &UserCodebook<'_>, init: InitMode) -> Self {
        let l = cb.code.length();
        let q = cb.code.field().order();
        UserWork {
            state: initial_state(init, l, q),
            bp: BeliefState::new(cb.code),
            div_raw: 0.0,
            div_prev: 0.0,
            symbols: vec![0; l],
            syndrome_ok: false,
        }
    }

    fn refresh_hard_decision(&mut self, code: &LdpcCode) {
        self.symbols = sparc::hard_decision(&self.state);
        self.syndrome_ok = code.is_codeword(&self.symbols);
    }
}

fn finish(
    codebooks: &[UserCodebook<'_>],
    works: Vec<UserWork>,
    diagnostics: Diagnostics,
) -> DecodeResult {
    let users = codebooks
        .iter()
        .zip(works)
        .map(|(cb, w)| UserDecode {
            user_id: cb.user_id,
            info_bits: sparc::extract_info_bits(cb.code, &w.symbols),
            symbols: w.symbols,
            syndrome_ok: w.syndrome_ok,
            final_state: w.state,
        })
        .collect();
    DecodeResult { users, diagnostics }
}

/// Joint decoding over the single-cell GMAC.
///
/// Runs `cfg.t_amp` iterations of contribution / residual / denoise over all
/// users, then reads out hard decisions. Per-iteration cost is one A s and
/// one A^T z product per user, linear in K.
pub fn decode_single_cell(
    y: &[f64],
    codebooks: &[UserCodebook<'_>],
    sigma2: f64,
    cfg: &DecoderConfig,
) -> DecodeResult {
    check_geometry(y.len(), codebooks);
    let mut works: Vec<UserWork> =
        codebooks.iter().map(|cb| UserWork::new(cb, cfg.init)).collect();
    let mut z_prev = y.to_vec();
    let mut diagnostics = Diagnostics {
        sigma2,
        iterations: Vec::with_capacity(cfg.t_amp),
        abort: None,
        converged_at: None,
        underflow_resets: 0,
    };

    for t in 1..=cfg.t_amp {
        let contributions: Vec<Vec<f64>> = codebooks
            .par_iter()
            .zip(works.par_iter())
            .map(|(cb, w)| user_contribution(cb.matrix, &w.state, &z_prev, w.div_prev))
            .collect();
        let z = residual(y, &contributions);
        let tau2 = estimate_tau2(&z);
        if !tau2.is_finite() {
            diagnostics.abort = Some(AbortRecord {
                iteration: t,
                reason: format!("non-finite residual energy at iteration {t}"),
            });
            break;
        }

        codebooks.par_iter().zip(works.par_iter_mut()).for_each(|(cb, w)| {
            let r = effective_observation(cb.matrix, &z, &w.state);
            let s_next = bp_denoise(cb.code, &r, tau2, cfg.bp_iterations, &mut w.bp);
            w.div_raw = s_next.sections() as f64 - s_next.norm2_sq();
            w.div_prev = if tau2 > 0.0 { w.div_raw / tau2 } else { 0.0 };
            w.state = s_next;
            w.refresh_hard_decision(cb.code);
        });

        diagnostics.iterations.push(IterationRecord {
            t,
            tau2: vec![tau2],
            residual_norm: vec![tau2.sqrt() * (y.len() as f64).sqrt()],
            syndrome_ok: works.iter().map(|w| w.syndrome_ok).collect(),
        });
        z_prev = z;

        if cfg.early_stop && works.iter().all(|w| w.syndrome_ok) {
            diagnostics.converged_at = Some(t);
            break;
        }
    }

    diagnostics.underflow_resets = works.iter().map(|w| w.bp.underflow_resets).sum();
    finish(codebooks, works, diagnostics)
}

/// Joint decoding across access points.
///
/// Each AP keeps its own residual over its connected users; users heard by
/// several APs combine their per-AP effective observations with
/// inverse-variance weights. The Onsager term for user k at AP b divides the
/// shared (L - |s_k|^2) by that AP's tau_b^2, which is exactly the
/// chain rule through the combining weights.
pub fn decode_cell_free(
    observations: &[Vec<f64>],
    topology: &Topology,
    codebooks: &[UserCodebook<'_>],
    sigma2: f64,
    cfg: &DecoderConfig,
) -> DecodeResult {
    assert_eq!(observations.len(), topology.num_aps(), "one observation per AP");
    assert_eq!(codebooks.len(), topology.num_users(), "one codebook per user");
    let n = observations[0].len();
    assert!(observations.iter().all(|y| y.len() == n), "AP observation lengths differ");
    check_geometry(n, codebooks);

    let num_aps = topology.num_aps();
    let mut works: Vec<UserWork> =
        codebooks.iter().map(|cb| UserWork::new(cb, cfg.init)).collect();
    let mut z_prev: Vec<Vec<f64>> = observations.to_vec();
    let mut tau2_prev: Vec<f64> = vec![1.0; num_aps]; // unused while div_raw = 0
    let mut diagnostics = Diagnostics {
        sigma2,
        iterations: Vec::with_capacity(cfg.t_amp),
        abort: None,
        converged_at: None,
        underflow_resets: 0,
    };

    'outer: for t in 1..=cfg.t_amp {
        let mut z = Vec::with_capacity(num_aps);
        let mut tau2 = Vec::with_capacity(num_aps);
        for b in 0..num_aps {
            let contributions: Vec<Vec<f64>> = topology
                .users_of_ap(b)
                .par_iter()
                .map(|&k| {
                    let w = &works[k];
                    let div_prev = if w.div_raw != 0.0 && tau2_prev[b] > 0.0 {
                        w.div_raw / tau2_prev[b]
                    } else {
                        0.0
                    };
                    user_contribution(codebooks[k].matrix, &w.state, &z_prev[b], div_prev)
                })
                .collect();
            let z_b = residual(&observations[b], &contributions);
            let t2 = estimate_tau2(&z_b);
            if !t2.is_finite() {
                diagnostics.abort = Some(AbortRecord {
                    iteration: t,
                    reason: format!("non-finite residual energy at AP {b}, iteration {t}"),
                });
                break 'outer;
            }
            z.push(z_b);
            tau2.push(t2);
        }

        codebooks.par_iter().zip(works.par_iter_mut()).enumerate().for_each(
            |(k, (cb, w))| {
                let aps = topology.aps_of_user(k);
                let (r, tau_eff) = if aps.len() == 1 {
                    let b = aps[0];
                    (effective_observation(cb.matrix, &z[b], &w.state), tau2[b])
                } else {
                    let per_ap: Vec<SectionalVector> = aps
                        .iter()
                        .map(|&b| effective_observation(cb.matrix, &z[b], &w.state))
                        .collect();
                    let tau2s: Vec<f64> = aps.iter().map(|&b| tau2[b]).collect();
                    combine_effective_observations(&per_ap, &tau2s)
                };
                let s_next = bp_denoise(cb.code, &r, tau_eff, cfg.bp_iterations, &mut w.bp);
                w.div_raw = s_next.sections() as f64 - s_next.norm2_sq();
                w.state = s_next;
                w.refresh_hard_decision(cb.code);
            },
        );

        diagnostics.iterations.push(IterationRecord {
            t,
            residual_norm: z.iter().map(|zb| zb.iter().map(|x| x * x).sum::<f64>().sqrt()).collect(),
            tau2: tau2.clone(),
            syndrome_ok: works.iter().map(|w| w.syndrome_ok).collect(),
        });
        z_prev = z;
        tau2_prev = tau2;

        if cfg.early_stop && works.iter().all(|w| w.syndrome_ok) {
            diagnostics.converged_at = Some(t);
            break;
        }
    }

    diagnostics.underflow_resets = works.iter().map(|w| w.bp.underflow_resets).sum();
    finish(codebooks, works, diagnostics)
}
