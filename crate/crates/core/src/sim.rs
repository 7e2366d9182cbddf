//! Monte Carlo BLER and early-termination-gain experiments over a BI-AWGN
//! channel with BPSK mapping `0 -> +1`, `1 -> -1`.
//!
//! Every trial draws from its own ChaCha stream keyed by the seed, the SNR
//! point and the trial index, and trial results are folded in trial order,
//! so a run is bit-reproducible regardless of thread scheduling.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::permdec::{sample_permutations, EarlyTermination, PermDecoder};
use crate::rmcodes::{encode, rm_code, scatter_info, CodeSpec};
use crate::sc::{OpCounts, ScDecoder};
use crate::scl::SclDecoder;
use crate::threshold::{precise_threshold, ChannelNoise, DEFAULT_GRID_STEP};

/// CSV header written by [`write_csv`].
pub const CSV_HEADER: &str = "snr_db,trials,errors,bler,avg_fplus,avg_fminus,gain";

/// Trials evaluated between two checks of the stopping rule.
const BATCH: u64 = 64;

/// How the SNR axis maps to a noise variance (unit-energy BPSK symbols).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrConvention {
    /// `Es/N0` in dB: `sigma2 = 1 / (2 * 10^(snr/10))`.
    EsN0,
    /// `Eb/N0` in dB: `sigma2 = 1 / (2 R 10^(snr/10))`.
    EbN0,
    /// Symbol energy over noise variance in dB: `sigma2 = 10^(-snr/10)`.
    SymbolSnr,
}

impl FromStr for SnrConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esn0" | "es_n0" => Ok(Self::EsN0),
            "ebn0" | "eb_n0" => Ok(Self::EbN0),
            "snr" => Ok(Self::SymbolSnr),
            other => Err(Error::arg(format!("unknown SNR convention '{other}'"))),
        }
    }
}

impl fmt::Display for SnrConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EsN0 => "esn0",
            Self::EbN0 => "ebn0",
            Self::SymbolSnr => "snr",
        })
    }
}

pub fn snr_to_sigma2(snr_db: f64, convention: SnrConvention, rate: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::arg(format!("SNR must be finite, got {snr_db}")));
    }
    let linear = 10f64.powf(snr_db / 10.0);
    match convention {
        SnrConvention::EsN0 => Ok(1.0 / (2.0 * linear)),
        SnrConvention::SymbolSnr => Ok(1.0 / linear),
        SnrConvention::EbN0 => {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::arg(format!(
                    "code rate must lie in (0, 1], got {rate}"
                )));
            }
            Ok(1.0 / (2.0 * rate * linear))
        }
    }
}

/// Channel LLRs `2 r / sigma2` for `r = (1 - 2c) + noise`.
pub fn awgn_llrs<R: Rng + ?Sized>(codeword: &[u8], sigma2: f64, rng: &mut R) -> Result<Vec<f64>> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::arg(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let noise = Normal::new(0.0, sigma2.sqrt())
        .map_err(|_| Error::arg(format!("invalid noise variance {sigma2}")))?;
    let scale = 2.0 / sigma2;
    Ok(codeword
        .iter()
        .map(|&c| {
            let s = if c == 0 { 1.0 } else { -1.0 };
            scale * (s + noise.sample(rng))
        })
        .collect())
}

/// LLRs of a noiseless channel at the given noise variance: `+-2/sigma2`.
pub fn noiseless_llrs(codeword: &[u8], sigma2: f64) -> Vec<f64> {
    codeword
        .iter()
        .map(|&c| if c == 0 { 2.0 / sigma2 } else { -2.0 / sigma2 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Perm,
    Scl,
    Sc,
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "perm" => Ok(Self::Perm),
            "scl" => Ok(Self::Scl),
            "sc" => Ok(Self::Sc),
            other => Err(Error::arg(format!("unknown decoder '{other}'"))),
        }
    }
}

/// Early termination techniques of the permutation decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EtFlags {
    pub branch_bound: bool,
    /// Target probability for the SNR-based metric threshold.
    pub snr_threshold: Option<f64>,
    /// Repetition count `L_c`.
    pub repetition: Option<usize>,
}

impl EtFlags {
    pub fn any(&self) -> bool {
        self.branch_bound || self.snr_threshold.is_some() || self.repetition.is_some()
    }

    /// Each enabled technique on its own.
    pub fn isolated(&self) -> Vec<(EtTechnique, EtFlags)> {
        let mut out = Vec::new();
        if self.branch_bound {
            out.push((
                EtTechnique::BranchBound,
                EtFlags {
                    branch_bound: true,
                    ..EtFlags::default()
                },
            ));
        }
        if let Some(p) = self.snr_threshold {
            out.push((
                EtTechnique::SnrThreshold,
                EtFlags {
                    snr_threshold: Some(p),
                    ..EtFlags::default()
                },
            ));
        }
        if let Some(lc) = self.repetition {
            out.push((
                EtTechnique::Repetition,
                EtFlags {
                    repetition: Some(lc),
                    ..EtFlags::default()
                },
            ));
        }
        out
    }
}

/// Parses `bb,snr:5e-4,rep:8` (any subset, or `none`).
impl FromStr for EtFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = EtFlags::default();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (name, value) = match item.split_once(':') {
                Some((n, v)) => (n, Some(v)),
                None => (item, None),
            };
            match (name.to_ascii_lowercase().as_str(), value) {
                ("none", None) => {}
                ("bb", None) => flags.branch_bound = true,
                ("snr", Some(v)) => {
                    let p: f64 = v
                        .parse()
                        .map_err(|_| Error::arg(format!("bad probability '{v}'")))?;
                    flags.snr_threshold = Some(p);
                }
                ("rep", v) => {
                    let lc = match v {
                        Some(v) => v
                            .parse()
                            .map_err(|_| Error::arg(format!("bad repetition count '{v}'")))?,
                        None => DEFAULT_REPETITION,
                    };
                    flags.repetition = Some(lc);
                }
                _ => return Err(Error::arg(format!("unknown early termination '{item}'"))),
            }
        }
        Ok(flags)
    }
}

/// Default repetition count.
pub const DEFAULT_REPETITION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtTechnique {
    BranchBound,
    SnrThreshold,
    Repetition,
}

impl EtTechnique {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BranchBound => "bb",
            Self::SnrThreshold => "snr",
            Self::Repetition => "rep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppingRule {
    pub min_errors: u64,
    pub max_trials: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_trials: 1_000_000,
        }
    }
}

impl StoppingRule {
    /// Exactly `trials` trials regardless of errors.
    pub fn fixed(trials: u64) -> Self {
        Self {
            min_errors: u64::MAX,
            max_trials: trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m: u32,
    pub r: u32,
    pub decoder: DecoderKind,
    pub list: usize,
    pub et: EtFlags,
    pub snrs_db: Vec<f64>,
    pub convention: SnrConvention,
    pub stopping: StoppingRule,
    pub seed: u64,
    /// Transmit the all-zero codeword instead of random information.
    pub all_zero: bool,
    pub grid_step: f64,
}

impl SimConfig {
    pub fn new(m: u32, r: u32, decoder: DecoderKind, list: usize) -> Self {
        Self {
            m,
            r,
            decoder,
            list,
            et: EtFlags::default(),
            snrs_db: vec![0.0],
            convention: SnrConvention::EbN0,
            stopping: StoppingRule::default(),
            seed: 0,
            all_zero: false,
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(Error::arg("SNR list is empty"));
        }
        if self.stopping.min_errors == 0 || self.stopping.max_trials == 0 {
            return Err(Error::arg(
                "stopping rule needs min_errors >= 1 and max_trials >= 1",
            ));
        }
        if self.list == 0 {
            return Err(Error::arg("list size must be at least 1"));
        }
        if self.r > self.m {
            return Err(Error::arg(format!(
                "RM order {} exceeds m = {}",
                self.r, self.m
            )));
        }
        if let Some(p) = self.et.snr_threshold {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::arg(format!(
                    "threshold probability {p} outside (0, 1)"
                )));
            }
        }
        if self.et.repetition == Some(0) {
            return Err(Error::arg("repetition count must be at least 1"));
        }
        if self.et.any() && self.decoder != DecoderKind::Perm {
            return Err(Error::config(
                "early termination applies to the permutation decoder only",
            ));
        }
        if self.decoder == DecoderKind::Sc && self.list != 1 {
            return Err(Error::config("the SC decoder has list size 1"));
        }
        Ok(())
    }
}

/// Aggregated result of one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub snr_db: f64,
    pub sigma2: f64,
    pub trials: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub avg_f_plus: f64,
    pub avg_f_minus: f64,
    /// `q / q_et` with `q = L n log2(n)` kernel calls per decode.
    pub gain: f64,
    /// Metric threshold used, when the SNR-based technique is on.
    pub threshold: Option<f64>,
}

/// Outcome of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub transmitted: Vec<u8>,
    pub codeword: Vec<u8>,
    pub decoded: bool,
    pub error: bool,
    pub ops: OpCounts,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    snr_db: f64,
    sigma2: f64,
    threshold: Option<f64>,
}

/// Per-thread decoder state.
#[derive(Debug)]
pub struct Worker {
    perm: Option<PermDecoder>,
    scl: Option<SclDecoder>,
    sc: Option<ScDecoder>,
}

/// Prepared experiment: code, SNR points and thresholds.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    spec: CodeSpec,
    points: Vec<Point>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let spec = rm_code(config.m, config.r)?;
        let points = config
            .snrs_db
            .iter()
            .map(|&snr_db| {
                let sigma2 = snr_to_sigma2(snr_db, config.convention, spec.rate())?;
                let threshold = match config.et.snr_threshold {
                    Some(p) => {
                        let noise = ChannelNoise::new(sigma2)?;
                        let q = precise_threshold(spec.n(), &noise, p, config.grid_step)?;
                        // A quantile on the atom means any negative metric is
                        // already rarer than p: abort on every negative metric.
                        Some(if q.at_point_mass {
                            -f64::MIN_POSITIVE
                        } else {
                            q.value
                        })
                    }
                    None => None,
                };
                Ok(Point {
                    snr_db,
                    sigma2,
                    threshold,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            spec,
            points,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn sigma2(&self, point: usize) -> f64 {
        self.points[point].sigma2
    }

    pub fn threshold(&self, point: usize) -> Option<f64> {
        self.points[point].threshold
    }

    /// Kernel calls of one decode without early termination.
    pub fn ops_per_decode(&self) -> u64 {
        let n = self.spec.n() as u64;
        self.config.list as u64 * n * self.spec.m() as u64
    }

    pub fn worker(&self) -> Worker {
        let cfg = &self.config;
        Worker {
            perm: (cfg.decoder == DecoderKind::Perm).then(|| PermDecoder::new(&self.spec)),
            scl: (cfg.decoder == DecoderKind::Scl)
                .then(|| SclDecoder::new(&self.spec, cfg.list).expect("validated list size")),
            sc: (cfg.decoder == DecoderKind::Sc).then(|| ScDecoder::new(&self.spec)),
        }
    }

    fn trial_rng(&self, point: usize, trial: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.config.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(point as u64).to_le_bytes());
        key[16..24].copy_from_slice(&trial.to_le_bytes());
        key[24..].copy_from_slice(b"rmtrial!");
        ChaCha8Rng::from_seed(key)
    }

    pub fn run_trial(&self, worker: &mut Worker, point: usize, trial: u64) -> Result<TrialOutcome> {
        let pt = self.points[point];
        let mut rng = self.trial_rng(point, trial);
        let info: Vec<u8> = if self.config.all_zero {
            vec![0; self.spec.k()]
        } else {
            (0..self.spec.k())
                .map(|_| rng.random_range(0..2u8))
                .collect()
        };
        let transmitted = encode(&self.spec, &scatter_info(&self.spec, &info)?)?;
        let llrs = awgn_llrs(&transmitted, pt.sigma2, &mut rng)?;

        let (codeword, decoded, ops) = match self.config.decoder {
            DecoderKind::Perm => {
                let perms = sample_permutations(self.spec.m(), self.config.list, &mut rng)?.perms;
                let et = EarlyTermination {
                    branch_bound: self.config.et.branch_bound,
                    repetition: self.config.et.repetition,
                };
                let threshold = pt.threshold.unwrap_or(f64::NEG_INFINITY);
                let dec = worker.perm.as_mut().expect("perm worker");
                let out = dec.decode(&llrs, &perms, threshold, et)?;
                (out.codeword, out.decoded, out.stats.ops)
            }
            DecoderKind::Scl => {
                let out = worker.scl.as_mut().expect("scl worker").decode(&llrs)?;
                (out.codeword, true, out.ops)
            }
            DecoderKind::Sc => {
                let out = worker
                    .sc
                    .as_mut()
                    .expect("sc worker")
                    .decode(&llrs, f64::NEG_INFINITY)?;
                (out.codeword, true, out.ops)
            }
        };
        let error = !decoded || codeword != transmitted;
        Ok(TrialOutcome {
            transmitted,
            codeword,
            decoded,
            error,
            ops,
        })
    }

    /// Runs one SNR point until the stopping rule fires. The stop happens at
    /// exactly the trial that satisfies it, independent of batching.
    pub fn run_point(&self, point: usize, stopping: StoppingRule) -> Result<SimRecord> {
        let mut trials = 0u64;
        let mut errors = 0u64;
        let mut ops = OpCounts::default();
        'outer: while trials < stopping.max_trials && errors < stopping.min_errors {
            let start = trials;
            let end = (start + BATCH).min(stopping.max_trials);
            let batch: Vec<Result<TrialOutcome>> = (start..end)
                .into_par_iter()
                .map_init(|| self.worker(), |w, t| self.run_trial(w, point, t))
                .collect();
            for outcome in batch {
                let outcome = outcome?;
                trials += 1;
                errors += u64::from(outcome.error);
                ops += outcome.ops;
                if errors >= stopping.min_errors {
                    break 'outer;
                }
            }
        }
        Ok(self.record(point, trials, errors, ops))
    }

    fn record(&self, point: usize, trials: u64, errors: u64, ops: OpCounts) -> SimRecord {
        let pt = self.points[point];
        let t = trials.max(1) as f64;
        let gain = if self.config.decoder == DecoderKind::Scl || ops.total() == 0 {
            1.0
        } else {
            (trials as f64 * self.ops_per_decode() as f64) / ops.total() as f64
        };
        SimRecord {
            snr_db: pt.snr_db,
            sigma2: pt.sigma2,
            trials,
            block_errors: errors,
            bler: errors as f64 / t,
            avg_f_plus: ops.f_plus as f64 / t,
            avg_f_minus: ops.f_minus as f64 / t,
            gain,
            threshold: pt.threshold,
        }
    }

    /// All SNR points in order, handing each record to `sink` as soon as it
    /// is complete.
    pub fn run_all(
        &self,
        stopping: StoppingRule,
        mut sink: impl FnMut(&SimRecord) -> Result<()>,
    ) -> Result<Vec<SimRecord>> {
        let mut out = Vec::with_capacity(self.points.len());
        for point in 0..self.points.len() {
            let rec = self.run_point(point, stopping)?;
            sink(&rec)?;
            out.push(rec);
        }
        Ok(out)
    }
}

/// BLER curve under the configured stopping rule.
pub fn run_bler(config: &SimConfig) -> Result<Vec<SimRecord>> {
    let sim = Simulation::new(config.clone())?;
    sim.run_all(config.stopping, |_| Ok(()))
}

/// Early termination gain of every enabled technique on its own, with a
/// fixed number of trials per point. Each technique sees the same channel
/// realisations. With no technique enabled the plain decoder is run.
pub fn run_gain_sweep(
    config: &SimConfig,
    trials: u64,
) -> Result<Vec<(Option<EtTechnique>, Vec<SimRecord>)>> {
    if trials == 0 {
        return Err(Error::arg("trial count must be positive"));
    }
    let runs: Vec<(Option<EtTechnique>, EtFlags)> = if config.et.any() {
        config
            .et
            .isolated()
            .into_iter()
            .map(|(t, f)| (Some(t), f))
            .collect()
    } else {
        vec![(None, EtFlags::default())]
    };
    runs.into_iter()
        .map(|(technique, et)| {
            let mut cfg = config.clone();
            cfg.et = et;
            cfg.stopping = StoppingRule::fixed(trials);
            let sim = Simulation::new(cfg)?;
            Ok((
                technique,
                sim.run_all(StoppingRule::fixed(trials), |_| Ok(()))?,
            ))
        })
        .collect()
}

/// Formats like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let rounded_exp = {
        let s = format!("{:.5e}", x);
        s.split('e')
            .nth(1)
            .and_then(|e| e.parse::<i32>().ok())
            .unwrap_or(exp)
    };
    if !(-4..6).contains(&rounded_exp) {
        let s = format!("{:.5e}", x);
        let (mantissa, e) = s.split_once('e').expect("exponent");
        let mantissa = trim_zeros(mantissa);
        let e: i32 = e.parse().expect("exponent digits");
        let sign = if e < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", e.abs())
    } else {
        let decimals = (5 - rounded_exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_row(rec: &SimRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        format_sig6(rec.snr_db),
        rec.trials,
        rec.block_errors,
        format_sig6(rec.bler),
        format_sig6(rec.avg_f_plus),
        format_sig6(rec.avg_f_minus),
        format_sig6(rec.gain)
    )
}

pub fn write_csv<W: Write>(mut out: W, records: &[SimRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for rec in records {
        writeln!(out, "{}", csv_row(rec))?;
    }
    out.flush()
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::arg(format!("bad SNR grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    let list: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(bad());
    }
    Ok(list)
}
