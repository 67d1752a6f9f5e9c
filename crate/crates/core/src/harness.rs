//! Experiment orchestration: seeded Monte-Carlo trials, BER/FER accounting,
//! sweeps over Eb/N0 or sum rate, the orthogonal-access baseline, and result
//! emission.
//!
//! Determinism contract: the entire sweep output is a pure function of the
//! resolved configuration. Per-trial RNG streams are derived by keyed
//! splitting from (master seed, sweep point, trial index), trials are
//! reduced in trial order, and user contributions are summed in user order,
//! so output files are byte-identical across runs and worker counts.

use crate::amp::{self, DecoderConfig, InitMode, UserCodebook};
use crate::channel::{self, NoiseSpec, Topology};
use crate::galois::make_field;
use crate::nbldpc::LdpcCode;
use crate::seeding::{self, tag};
use crate::sparc::{self, SensingMatrix, DEFAULT_MATRIX_BUDGET};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleCell,
    CellFree,
    OmaBaseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::SingleCell => write!(f, "single-cell"),
            Mode::CellFree => write!(f, "cell-free"),
            Mode::OmaBaseline => write!(f, "oma-baseline"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Ebn0Db,
    SumRate,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepVar::Ebn0Db => write!(f, "ebn0_db"),
            SweepVar::SumRate => write!(f, "sum_rate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Fully resolved experiment definition. Everything a sweep does is a pure
/// function of this structure plus nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Field bit width p; the symbol alphabet is GF(2^p).
    pub field_bits: u32,
    /// Primitive modulus for the field; recorded so experiments pin the
    /// exact arithmetic tables.
    pub modulus: u32,
    /// Outer code length L in symbols.
    pub code_length: usize,
    /// Number of parity checks M.
    pub code_checks: usize,
    pub variable_degree: usize,
    pub code_seed: u64,
    pub users: usize,
    /// Total channel uses n_K. Exactly one of this and `sum_rate` is set
    /// unless `sum_rate_sweep` drives the points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_uses: Option<usize>,
    /// Target sum rate; converts to n_K = ceil(K * B / R).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_rate: Option<f64>,
    /// Eb/N0 sweep values in dB (a single entry pins the operating point
    /// for sum-rate sweeps).
    pub ebn0_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_rate_sweep: Option<Vec<f64>>,
    /// Forces the per-sample noise variance at every point, bypassing the
    /// Eb/N0 conversion. Exact sigma^2 = 0 runs the noiseless channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_override: Option<f64>,
    pub trials: usize,
    pub t_amp: usize,
    pub bp_iterations: usize,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default = "default_init")]
    pub init: InitMode,
    /// Master seed; every random quantity below derives from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    /// Dense sensing-matrix budget in bytes; larger matrices stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_budget: Option<usize>,
    /// Decoder-abort fraction above which the CLI reports failure.
    #[serde(default = "default_abort_threshold")]
    pub abort_threshold: f64,
}

fn default_true() -> bool {
    true
}

fn default_init() -> InitMode {
    InitMode::Uniform
}

fn default_abort_threshold() -> f64 {
    0.01
}

impl ExperimentConfig {
    /// Information bits per user per frame: (L - M) * p.
    pub fn info_bits_per_user(&self) -> usize {
        (self.code_length - self.code_checks) * self.field_bits as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials must be >= 1".into()));
        }
        if self.users == 0 {
            return Err(ConfigError::Invalid("users must be >= 1".into()));
        }
        if self.code_checks >= self.code_length {
            return Err(ConfigError::Invalid(format!(
                "code_checks {} must be below code_length {}",
                self.code_checks, self.code_length
            )));
        }
        if self.ebn0_db.is_empty() {
            return Err(ConfigError::Invalid("ebn0_db sweep list is empty".into()));
        }
        match &self.sum_rate_sweep {
            Some(values) => {
                if values.is_empty() {
                    return Err(ConfigError::Invalid("sum_rate_sweep list is empty".into()));
                }
                if self.ebn0_db.len() != 1 {
                    return Err(ConfigError::Invalid(
                        "sum-rate sweeps need a single pinned ebn0_db value".into(),
                    ));
                }
                if self.channel_uses.is_some() || self.sum_rate.is_some() {
                    return Err(ConfigError::Invalid(
                        "sum_rate_sweep replaces channel_uses / sum_rate".into(),
                    ));
                }
            }
            None => match (self.channel_uses, self.sum_rate) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid(
                        "give exactly one of channel_uses and sum_rate".into(),
                    ))
                }
                (None, None) => {
                    return Err(ConfigError::Invalid(
                        "give exactly one of channel_uses and sum_rate".into(),
                    ))
                }
                _ => {}
            },
        }
        match self.mode {
            Mode::CellFree => {
                let topo = self.topology.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("cell-free mode needs a topology".into())
                })?;
                if topo.num_users() != self.users {
                    return Err(ConfigError::Invalid(format!(
                        "topology has {} users, config says {}",
                        topo.num_users(),
                        self.users
                    )));
                }
                if self.sum_rate_sweep.is_some() {
                    return Err(ConfigError::Invalid(
                        "cell-free mode sweeps Eb/N0 only".into(),
                    ));
                }
            }
            Mode::SingleCell | Mode::OmaBaseline => {
                if self.topology.is_some() {
                    return Err(ConfigError::Invalid(format!(
                        "{} mode does not take a topology",
                        self.mode
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stable digest of the resolved configuration (FNV-1a over canonical
    /// JSON), recorded in every summary.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1_0000_0000_01b3);
    }
    h
}

#[derive(Debug)]
pub enum ConfigError {
    Invalid(String),
    Field(crate::galois::FieldError),
    Code(crate::nbldpc::CodeError),
    Matrix(crate::sparc::MatrixError),
    Io(std::io::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid(msg) => write!(f, "invalid configuration: {msg}"),
            ConfigError::Field(e) => write!(f, "field construction: {e}"),
            ConfigError::Code(e) => write!(f, "code construction: {e}"),
            ConfigError::Matrix(e) => write!(f, "sensing matrix: {e}"),
            ConfigError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<crate::galois::FieldError> for ConfigError {
    fn from(e: crate::galois::FieldError) -> Self {
        ConfigError::Field(e)
    }
}

impl From<crate::nbldpc::CodeError> for ConfigError {
    fn from(e: crate::nbldpc::CodeError) -> Self {
        ConfigError::Code(e)
    }
}

impl From<crate::sparc::MatrixError> for ConfigError {
    fn from(e: crate::sparc::MatrixError) -> Self {
        ConfigError::Matrix(e)
    }
}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// Per-user error tally inside a summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserTally {
    pub user_id: usize,
    pub bit_errors: u64,
    pub bits: u64,
}

/// Aggregate results for one sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_var: SweepVar,
    pub value: f64,
    pub users: usize,
    pub n_k: usize,
    pub trials: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// 95% Wilson interval on the BER.
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    pub frame_errors: u64,
    pub fer: f64,
    pub per_user: Vec<UserTally>,
    pub aborted_trials: u64,
    pub ebn0_db: f64,
    pub sum_rate: f64,
    pub sigma2: f64,
    /// Sum-capacity upper bound at this point's geometry and noise.
    pub c_sum: f64,
    pub config_digest: String,
    pub code_seed: u64,
    pub matrix_seeds: Vec<u64>,
}

/// Everything a run produces; the JSON emission serializes this whole.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub summaries: Vec<SweepSummary>,
}

/// 95% two-sided normal quantile, pinned so intervals never drift.
pub const WILSON_Z95: f64 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Sink for per-iteration decoder diagnostics, invoked with one NDJSON line
/// at a time (possibly from worker threads).
pub type DiagSink<'a> = &'a (dyn Fn(&str) + Sync);

struct TrialOutcome {
    per_user_bit_errors: Vec<u64>,
    frame_error: bool,
    aborted: bool,
}

/// One resolved sweep point with shared, immutable decode material.
struct PointContext {
    sweep_var: SweepVar,
    value: f64,
    ebn0_db: f64,
    sigma2: f64,
    n_k: usize,
    code: Arc<LdpcCode>,
    matrices: Vec<Arc<SensingMatrix>>,
    matrix_seeds: Vec<u64>,
    decoder: DecoderConfig,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<RunOutput, ConfigError> {
    run_sweep_with(config, None)
}

/// Runs every sweep point; `diag` receives newline-delimited JSON
/// per-iteration records when set.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    diag: Option<DiagSink<'_>>,
) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    let digest = config.digest();

    let field = make_field(config.field_bits, config.modulus)?;
    let code = Arc::new(LdpcCode::build(
        field,
        config.code_length,
        config.code_checks,
        config.variable_degree,
        config.code_seed,
    )?);

    let info_bits = config.info_bits_per_user();
    let points: Vec<(SweepVar, f64)> = match &config.sum_rate_sweep {
        Some(rates) => rates.iter().map(|&r| (SweepVar::SumRate, r)).collect(),
        None => config.ebn0_db.iter().map(|&db| (SweepVar::Ebn0Db, db)).collect(),
    };

    let mut summaries = Vec::with_capacity(points.len());
    for (point_idx, &(sweep_var, value)) in points.iter().enumerate() {
        let (ebn0_db, n_k) = match sweep_var {
            SweepVar::SumRate => (
                config.ebn0_db[0],
                channel::channel_uses_for(config.users, info_bits, value),
            ),
            SweepVar::Ebn0Db => {
                let n_k = match (config.channel_uses, config.sum_rate) {
                    (Some(n), None) => n,
                    (None, Some(r)) => channel::channel_uses_for(config.users, info_bits, r),
                    _ => unreachable!("validated"),
                };
                (value, n_k)
            }
        };
        let sigma2 = config
            .sigma2_override
            .unwrap_or_else(|| channel::ebn0_to_sigma2(ebn0_db, config.code_length, info_bits));
        let n_rows = match config.mode {
            // in cell-free mode channel_uses is already the per-AP length
            Mode::SingleCell | Mode::CellFree => n_k,
            Mode::OmaBaseline => n_k.div_ceil(config.users),
        };

        let budget = config.matrix_budget.unwrap_or(DEFAULT_MATRIX_BUDGET);
        let mut matrices = Vec::with_capacity(config.users);
        let mut matrix_seeds = Vec::with_capacity(config.users);
        for k in 0..config.users {
            let seed = seeding::derive_seed(config.seed, &[tag::MATRIX, k as u64]);
            matrix_seeds.push(seed);
            let q = code.field().order();
            let m = match SensingMatrix::with_budget(seed, n_rows, code.length(), q, budget) {
                Ok(m) => m,
                Err(crate::sparc::MatrixError::BudgetExceeded { .. }) => {
                    SensingMatrix::streamed(seed, n_rows, code.length(), q)
                }
                Err(e) => return Err(e.into()),
            };
            matrices.push(Arc::new(m));
        }

        let ctx = PointContext {
            sweep_var,
            value,
            ebn0_db,
            sigma2,
            n_k,
            code: Arc::clone(&code),
            matrices,
            matrix_seeds,
            decoder: DecoderConfig {
                t_amp: config.t_amp,
                bp_iterations: config.bp_iterations,
                early_stop: config.early_stop,
                init: config.init,
            },
        };

        let outcomes: Vec<TrialOutcome> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &ctx, point_idx, trial, diag))
            .collect();

        summaries.push(summarize(config, &ctx, &digest, &outcomes));
    }

    Ok(RunOutput { config: config.clone(), config_digest: digest, summaries })
}

/// Runs one trial: draw messages, encode, transmit, decode, count info-bit
/// errors. Fully determined by (master seed, point index, trial index).
fn run_trial(
    config: &ExperimentConfig,
    ctx: &PointContext,
    point_idx: usize,
    trial: usize,
    diag: Option<DiagSink<'_>>,
) -> TrialOutcome {
    let info_bits = config.info_bits_per_user();
    let mut rng = seeding::stream(config.seed, &[tag::TRIAL, point_idx as u64, trial as u64]);

    // draw every user's message first, then channel noise, so orthogonal
    // and joint modes share prefixes of the same stream
    let messages: Vec<Vec<u8>> = (0..config.users)
        .map(|_| (0..info_bits).map(|_| rng.random::<bool>() as u8).collect())
        .collect();

    let p = config.field_bits;
    let signals: Vec<Vec<f64>> = messages
        .iter()
        .enumerate()
        .map(|(k, bits)| {
            let symbols = sparc::bits_to_symbols(bits, p);
            let v = ctx.code.encode(&symbols).expect("geometry fixed by config");
            let s = sparc::to_sparse(&v, ctx.code.field().order());
            sparc::sr_encode(&ctx.matrices[k], &s)
        })
        .collect();

    let mut all_wrong = false;
    let mut per_user_bit_errors = vec![0u64; config.users];

    let emit = |result: &amp::DecodeResult, user_scope: Option<usize>| {
        if let Some(sink) = diag {
            for rec in &result.diagnostics.iterations {
                let line = serde_json::json!({
                    "sweep_var": ctx.sweep_var,
                    "value": ctx.value,
                    "trial": trial,
                    "oma_user": user_scope,
                    "t": rec.t,
                    "tau2": rec.tau2,
                    "residual_norm": rec.residual_norm,
                    "syndrome_ok": rec.syndrome_ok,
                });
                sink(&line.to_string());
            }
        }
    };

    match config.mode {
        Mode::SingleCell => {
            let y = channel::gmac_transmit(&signals, ctx.sigma2, &mut rng);
            let codebooks: Vec<UserCodebook<'_>> = (0..config.users)
                .map(|k| UserCodebook {
                    user_id: k,
                    matrix: &ctx.matrices[k],
                    code: &ctx.code,
                })
                .collect();
            let result = amp::decode_single_cell(&y, &codebooks, ctx.sigma2, &ctx.decoder);
            emit(&result, None);
            if result.aborted() {
                all_wrong = true;
            } else {
                for (k, user) in result.users.iter().enumerate() {
                    per_user_bit_errors[k] = count_bit_errors(&messages[k], &user.info_bits);
                }
            }
        }
        Mode::CellFree => {
            let topo = config.topology.as_ref().expect("validated");
            let ys =
                channel::cellfree_transmit(topo, &signals, &NoiseSpec::new(ctx.sigma2), &mut rng);
            let codebooks: Vec<UserCodebook<'_>> = (0..config.users)
                .map(|k| UserCodebook {
                    user_id: k,
                    matrix: &ctx.matrices[k],
                    code: &ctx.code,
                })
                .collect();
            let result = amp::decode_cell_free(&ys, topo, &codebooks, ctx.sigma2, &ctx.decoder);
            emit(&result, None);
            if result.aborted() {
                all_wrong = true;
            } else {
                for (k, user) in result.users.iter().enumerate() {
                    per_user_bit_errors[k] = count_bit_errors(&messages[k], &user.info_bits);
                }
            }
        }
        Mode::OmaBaseline => {
            // K independent single-user decodes over n_K / K channel uses each
            for k in 0..config.users {
                let y = channel::gmac_transmit(
                    std::slice::from_ref(&signals[k]),
                    ctx.sigma2,
                    &mut rng,
                );
                let codebook =
                    UserCodebook { user_id: k, matrix: &ctx.matrices[k], code: &ctx.code };
                let result = amp::decode_single_cell(&y, &[codebook], ctx.sigma2, &ctx.decoder);
                emit(&result, Some(k));
                if result.aborted() {
                    all_wrong = true;
                    break;
                }
                per_user_bit_errors[k] =
                    count_bit_errors(&messages[k], &result.users[0].info_bits);
            }
        }
    }

    if all_wrong {
        // decoder abort: all-bits-wrong convention, flagged separately
        let bits = info_bits as u64;
        return TrialOutcome {
            per_user_bit_errors: vec![bits; config.users],
            frame_error: true,
            aborted: true,
        };
    }
    let frame_error = per_user_bit_errors.iter().any(|&e| e > 0);
    TrialOutcome { per_user_bit_errors, frame_error, aborted: false }
}

fn count_bit_errors(sent: &[u8], decoded: &[u8]) -> u64 {
    debug_assert_eq!(sent.len(), decoded.len());
    sent.iter().zip(decoded).filter(|(a, b)| a != b).count() as u64
}

fn summarize(
    config: &ExperimentConfig,
    ctx: &PointContext,
    digest: &str,
    outcomes: &[TrialOutcome],
) -> SweepSummary {
    let info_bits = config.info_bits_per_user() as u64;
    let mut per_user: Vec<UserTally> = (0..config.users)
        .map(|k| UserTally { user_id: k, bit_errors: 0, bits: 0 })
        .collect();
    let mut frame_errors = 0u64;
    let mut aborted_trials = 0u64;
    for outcome in outcomes {
        for (k, &errs) in outcome.per_user_bit_errors.iter().enumerate() {
            per_user[k].bit_errors += errs;
            per_user[k].bits += info_bits;
        }
        frame_errors += outcome.frame_error as u64;
        aborted_trials += outcome.aborted as u64;
    }
    let bit_errors: u64 = per_user.iter().map(|u| u.bit_errors).sum();
    let bits_total: u64 = per_user.iter().map(|u| u.bits).sum();
    let ber = bit_errors as f64 / bits_total as f64;
    let (ber_ci_low, ber_ci_high) = wilson_interval(bit_errors, bits_total, WILSON_Z95);
    let trials = outcomes.len();
    let sum_rate = channel::sum_rate(config.users, info_bits as usize, ctx.n_k);
    // C_sum = 1/2 log2(1 + K L / (n_K sigma^2)); reduces to the single-user
    // form when n_K = K n.
    let c_sum = 0.5
        * (1.0
            + (config.users * config.code_length) as f64 / (ctx.n_k as f64 * ctx.sigma2))
            .log2();

    SweepSummary {
        sweep_var: ctx.sweep_var,
        value: ctx.value,
        users: config.users,
        n_k: ctx.n_k,
        trials,
        bit_errors,
        bits_total,
        ber,
        ber_ci_low,
        ber_ci_high,
        frame_errors,
        fer: frame_errors as f64 / trials as f64,
        per_user,
        aborted_trials,
        ebn0_db: ctx.ebn0_db,
        sum_rate,
        sigma2: ctx.sigma2,
        c_sum,
        config_digest: digest.to_string(),
        code_seed: config.code_seed,
        matrix_seeds: ctx.matrix_seeds.clone(),
    }
}

/// CSV header, pinned: stable field order is part of the output contract.
pub const CSV_HEADER: &str =
    "sweep_var,value,users,n_k,trials,bit_errors,bits_total,ber,frame_errors,fer";

pub fn write_csv<W: Write>(out: &RunOutput, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in &out.summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.sweep_var,
            s.value,
            s.users,
            s.n_k,
            s.trials,
            s.bit_errors,
            s.bits_total,
            s.ber,
            s.frame_errors,
            s.fer
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(out: &RunOutput, mut w: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, out)?;
    writeln!(w)
}

/// Serializes summaries to the requested format.
pub fn emit_results<W: Write>(out: &RunOutput, format: OutputFormat, w: W) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => write_csv(out, w),
        OutputFormat::Json => write_json(out, w),
    }
}

/// Renders the CSV into a string; used by determinism checks.
pub fn csv_string(out: &RunOutput) -> String {
    let mut buf = Vec::new();
    write_csv(out, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(mode: Mode, users: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            field_bits: 2,
            modulus: 0b111,
            code_length: 6,
            code_checks: 2,
            variable_degree: 2,
            code_seed: 1,
            users,
            channel_uses: Some(users * 48),
            sum_rate: None,
            ebn0_db: vec![6.0],
            sum_rate_sweep: None,
            sigma2_override: None,
            trials,
            t_amp: 10,
            bp_iterations: 1,
            early_stop: true,
            init: InitMode::Uniform,
            seed: 9,
            topology: None,
            matrix_budget: None,
            abort_threshold: 0.01,
        }
    }

    #[test]
    fn noiseless_toy_sweep_has_zero_errors() {
        let mut cfg = toy_config(Mode::SingleCell, 2, 30);
        cfg.sigma2_override = Some(0.0);
        let out = run_sweep(&cfg).unwrap();
        let s = &out.summaries[0];
        assert_eq!(s.bit_errors, 0);
        assert_eq!(s.frame_errors, 0);
        assert_eq!(s.aborted_trials, 0);
    }

    #[test]
    fn accounting_dimensions() {
        let cfg = toy_config(Mode::SingleCell, 3, 20);
        let out = run_sweep(&cfg).unwrap();
        let s = &out.summaries[0];
        // bits total = trials * K * K_sym * p
        assert_eq!(s.bits_total, 20 * 3 * 4 * 2);
        let per_user_sum: u64 = s.per_user.iter().map(|u| u.bit_errors).sum();
        assert_eq!(per_user_sum, s.bit_errors);
        let per_user_bits: u64 = s.per_user.iter().map(|u| u.bits).sum();
        assert_eq!(per_user_bits, s.bits_total);
        assert!((s.ber - s.bit_errors as f64 / s.bits_total as f64).abs() < 1e-18);
    }

    #[test]
    fn sweeps_are_deterministic_across_runs_and_worker_counts() {
        let cfg = toy_config(Mode::SingleCell, 2, 25);
        let a = csv_string(&run_sweep(&cfg).unwrap());
        let b = csv_string(&run_sweep(&cfg).unwrap());
        assert_eq!(a, b);

        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let c = pool1.install(|| csv_string(&run_sweep(&cfg).unwrap()));
        let d = pool4.install(|| csv_string(&run_sweep(&cfg).unwrap()));
        assert_eq!(c, d);
        assert_eq!(a, c);
    }

    #[test]
    fn oma_with_one_user_equals_single_cell() {
        let mu = toy_config(Mode::SingleCell, 1, 40);
        let oma = ExperimentConfig { mode: Mode::OmaBaseline, ..mu.clone() };
        let a = run_sweep(&mu).unwrap();
        let b = run_sweep(&oma).unwrap();
        let (sa, sb) = (&a.summaries[0], &b.summaries[0]);
        assert_eq!(sa.bit_errors, sb.bit_errors);
        assert_eq!(sa.frame_errors, sb.frame_errors);
        assert_eq!(sa.per_user[0].bit_errors, sb.per_user[0].bit_errors);
    }

    #[test]
    fn sum_rate_sweep_recomputes_channel_uses() {
        let mut cfg = toy_config(Mode::SingleCell, 2, 5);
        cfg.channel_uses = None;
        cfg.sum_rate_sweep = Some(vec![0.5, 0.25]);
        let out = run_sweep(&cfg).unwrap();
        // B = 8 bits/user, K = 2: n = ceil(16/R)
        assert_eq!(out.summaries[0].n_k, 32);
        assert_eq!(out.summaries[1].n_k, 64);
        assert_eq!(out.summaries[0].sweep_var, SweepVar::SumRate);
        assert!((out.summaries[0].sum_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn config_validation_rejects_contradictions() {
        let mut cfg = toy_config(Mode::SingleCell, 2, 5);
        cfg.sum_rate = Some(0.8); // both channel_uses and sum_rate
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));

        let mut cfg = toy_config(Mode::SingleCell, 2, 5);
        cfg.channel_uses = None;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));

        let mut cfg = toy_config(Mode::SingleCell, 2, 5);
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));

        let mut cfg = toy_config(Mode::CellFree, 2, 5);
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        cfg.topology = Some(Topology::single_cell(3)); // wrong user count
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));

        let mut cfg = toy_config(Mode::SingleCell, 2, 5);
        cfg.ebn0_db = vec![1.0, 2.0];
        cfg.sum_rate_sweep = Some(vec![0.5]);
        cfg.channel_uses = None;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn cell_free_trials_run_and_account_per_user() {
        let mut cfg = toy_config(Mode::CellFree, 3, 10);
        cfg.channel_uses = Some(48);
        cfg.topology =
            Some(Topology::new(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap());
        cfg.sigma2_override = Some(0.0);
        let out = run_sweep(&cfg).unwrap();
        let s = &out.summaries[0];
        assert_eq!(s.bit_errors, 0);
        assert_eq!(s.per_user.len(), 3);
    }

    #[test]
    fn csv_layout_is_pinned() {
        let cfg = toy_config(Mode::SingleCell, 1, 5);
        let out = run_sweep(&cfg).unwrap();
        let csv = csv_string(&out);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_var,value,users,n_k,trials,bit_errors,bits_total,ber,frame_errors,fer"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("ebn0_db,6,1,48,5,"), "row: {row}");
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = toy_config(Mode::SingleCell, 2, 8);
        let out = run_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_json(&out, &mut buf).unwrap();
        let parsed: RunOutput = serde_json::from_slice(&buf).unwrap();
        for (a, b) in out.summaries.iter().zip(&parsed.summaries) {
            assert_eq!(a.ber.to_bits(), b.ber.to_bits());
            assert_eq!(a.fer.to_bits(), b.fer.to_bits());
            assert_eq!(a.sigma2.to_bits(), b.sigma2.to_bits());
            assert_eq!(a.c_sum.to_bits(), b.c_sum.to_bits());
            assert_eq!(a.ber_ci_low.to_bits(), b.ber_ci_low.to_bits());
            assert_eq!(a.bit_errors, b.bit_errors);
        }
        assert_eq!(parsed.config_digest, out.config_digest);
    }

    #[test]
    fn capacity_reference_matches_paper_configuration() {
        // K users at the paper geometry keep the same C_sum marker; exercise
        // the summary path directly so no paper-scale decode runs here
        let mut cfg = toy_config(Mode::SingleCell, 4, 1);
        cfg.field_bits = 8;
        cfg.modulus = 0x11D;
        cfg.code_length = 766;
        cfg.code_checks = 30;
        cfg.channel_uses = Some(4 * 7350);
        cfg.ebn0_db = vec![2.25];
        let sigma2 = channel::ebn0_to_sigma2(2.25, 766, cfg.info_bits_per_user());
        let field = make_field(2, 0b111).unwrap();
        let code = Arc::new(LdpcCode::build(field, 6, 2, 2, 1).unwrap());
        let ctx = PointContext {
            sweep_var: SweepVar::Ebn0Db,
            value: 2.25,
            ebn0_db: 2.25,
            sigma2,
            n_k: 4 * 7350,
            code,
            matrices: vec![],
            matrix_seeds: vec![],
            decoder: DecoderConfig::default(),
        };
        let outcome = TrialOutcome {
            per_user_bit_errors: vec![0; 4],
            frame_error: false,
            aborted: false,
        };
        let s = summarize(&cfg, &ctx, "digest", &[outcome]);
        assert!((s.c_sum - 0.941760).abs() < 1e-4, "c_sum {}", s.c_sum);
        assert!((s.sigma2 - 0.038746).abs() < 1e-5);
        assert!((s.sum_rate - 0.801088).abs() < 1e-5);
    }

    #[test]
    fn wilson_interval_reference_values() {
        let (lo, hi) = wilson_interval(0, 100, WILSON_Z95);
        assert!(lo.abs() < 1e-12, "zero-error lower {lo}");
        assert!((hi - 0.0370).abs() < 5e-4, "zero-error upper {hi}");
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z95);
        assert!((lo - 0.4038).abs() < 5e-4);
        assert!((hi - 0.5962).abs() < 5e-4);
        assert_eq!(wilson_interval(0, 0, WILSON_Z95), (0.0, 1.0));
    }

    #[test]
    fn abort_convention_scores_all_bits_wrong() {
        // force aborts by a pathological decoder setup: zero channel uses is
        // impossible, so instead check the convention through the outcome
        // plumbing directly
        let outcome = TrialOutcome {
            per_user_bit_errors: vec![8, 8],
            frame_error: true,
            aborted: true,
        };
        let cfg = toy_config(Mode::SingleCell, 2, 1);
        let field = make_field(cfg.field_bits, cfg.modulus).unwrap();
        let code = Arc::new(
            LdpcCode::build(field, cfg.code_length, cfg.code_checks, cfg.variable_degree, 1)
                .unwrap(),
        );
        let ctx = PointContext {
            sweep_var: SweepVar::Ebn0Db,
            value: 6.0,
            ebn0_db: 6.0,
            sigma2: 0.1,
            n_k: 96,
            code,
            matrices: vec![],
            matrix_seeds: vec![],
            decoder: DecoderConfig::default(),
        };
        let s = summarize(&cfg, &ctx, "digest", &[outcome]);
        assert_eq!(s.aborted_trials, 1);
        assert_eq!(s.bit_errors, 16);
        assert_eq!(s.frame_errors, 1);
    }
}
