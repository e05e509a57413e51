//! Monte Carlo BER sweeps.
//!
//! A trial is one frame: one channel draw and `T` tag symbols. Every trial
//! draws from its own `(seed, point, trial)` stream and errors are summed as
//! integers, so results do not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ambc_core::channel::{build_frame, draw_channel, AmbientSource, ChannelRealization, Frame, PilotSchedule};
use ambc_core::config::SystemConfig;
use ambc_core::detectors::{
    energy_detect, estimate_delta0, pep_chernoff_bound, pep_union_bound, EnergyStats, LrtDetector, PepBoundParams,
};
use ambc_core::rng::RngStream;
use ambc_learned::chanestnet::{self, ChanEstNet};
use ambc_learned::embednet::{self, EmbedNet};
use rayon::prelude::*;

use crate::method::Method;
use crate::profile::{DetectorOptions, EdVariance};
use crate::{HarnessError, Result};

const CHANNEL_STREAM: u64 = 0;
const ONE_HOT_STREAM: u64 = 1;
const BALANCED_STREAM: u64 = 2;
const DELTA0_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    SnrDb,
    ZetaDb,
    KSamples,
    NTags,
    PPilots,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::ZetaDb => "zeta_db",
            SweepAxis::KSamples => "k",
            SweepAxis::NTags => "n_tags",
            SweepAxis::PPilots => "pilots",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let int = || -> Result<usize> {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(HarnessError::invalid("values", format!("{} needs positive integers, got {value}", self.name())));
            }
            Ok(value as usize)
        };
        match self {
            SweepAxis::SnrDb => cfg.snr_db = value,
            SweepAxis::ZetaDb => cfg.zeta_db = vec![value; cfg.n_tags],
            SweepAxis::KSamples => cfg.str_samples = int()?,
            SweepAxis::NTags => {
                let n = int()?;
                let zeta = base.zeta_db.first().copied().unwrap_or(-20.0);
                cfg.n_tags = n;
                cfg.zeta_db = vec![zeta; n];
            }
            SweepAxis::PPilots => cfg.n_pilots = int()?,
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "snr" | "snr_db" | "snr-db" => SweepAxis::SnrDb,
            "zeta" | "zeta_db" | "zeta-db" => SweepAxis::ZetaDb,
            "k" | "str" | "k_samples" => SweepAxis::KSamples,
            "n" | "tags" | "n_tags" => SweepAxis::NTags,
            "p" | "pilots" | "p_pilots" => SweepAxis::PPilots,
            other => return Err(HarnessError::invalid("axis", format!("unknown axis `{other}` (snr, zeta, k, n, p)"))),
        })
    }
}

/// Per-tag channel separation used by the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Delta0 {
    /// `M * mean_i 10^(zeta_i/10)`, the expectation of `|v_i|^2`.
    #[default]
    Expected,
    Fixed(f64),
    /// Monte Carlo over this many channel draws.
    Estimated { draws: usize },
}

impl Delta0 {
    pub fn resolve(self, cfg: &SystemConfig, seed: u64) -> Result<f64> {
        Ok(match self {
            Delta0::Expected => {
                let alphas = cfg.alphas();
                cfg.n_antennas as f64 * alphas.iter().map(|a| a * a).sum::<f64>() / alphas.len() as f64
            }
            Delta0::Fixed(v) => v,
            Delta0::Estimated { draws } => estimate_delta0(cfg, &mut RngStream::new(seed, DELTA0_STREAM), draws)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    /// Frames per point.
    pub trials: u64,
    pub seed: u64,
    pub options: DetectorOptions,
    pub delta0: Delta0,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, axis: SweepAxis, values: Vec<f64>, methods: Vec<Method>, trials: u64, seed: u64) -> Self {
        SweepSpec {
            base,
            axis,
            values,
            methods,
            trials,
            seed,
            options: DetectorOptions::default(),
            delta0: Delta0::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HarnessError::invalid("values", "at least one axis value is required"));
        }
        if let Some(w) = self.values.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(HarnessError::invalid("values", format!("must be strictly increasing ({} then {})", w[0], w[1])));
        }
        if self.trials == 0 {
            return Err(HarnessError::invalid("trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::invalid("methods", "empty method list"));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?.validate()?;
        }
        Ok(())
    }
}

/// Trained networks, keyed by the tag count they were trained for.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub embednet: BTreeMap<usize, EmbedNet>,
    pub chanestnet: BTreeMap<usize, ChanEstNet>,
}

impl ModelSet {
    /// Registers an EmbedNet checkpoint under its recorded `n_tags`.
    pub fn load_embednet(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let (net, ckpt) = EmbedNet::load(path)?;
        let n: usize = ckpt.meta_parse("n_tags")?;
        self.embednet.insert(n, net);
        Ok(n)
    }

    pub fn load_chanestnet(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let (net, _) = ChanEstNet::load(path)?;
        let n = net.n_tags();
        self.chanestnet.insert(n, net);
        Ok(n)
    }

    fn embednet_for(&self, cfg: &SystemConfig) -> Result<&EmbedNet> {
        let net = self.embednet.get(&cfg.n_tags).ok_or(HarnessError::MissingModel {
            method: "embednet",
            n_tags: cfg.n_tags,
        })?;
        if net.n_antennas() != cfg.n_antennas {
            return Err(HarnessError::invalid(
                "embednet",
                format!("model has M = {}, scenario has M = {}", net.n_antennas(), cfg.n_antennas),
            ));
        }
        Ok(net)
    }

    fn chanestnet_for(&self, cfg: &SystemConfig) -> Result<&ChanEstNet> {
        let net = self.chanestnet.get(&cfg.n_tags).ok_or(HarnessError::MissingModel {
            method: "chanestnet",
            n_tags: cfg.n_tags,
        })?;
        if net.n_antennas() != cfg.n_antennas {
            return Err(HarnessError::invalid(
                "chanestnet",
                format!("model has M = {}, scenario has M = {}", net.n_antennas(), cfg.n_antennas),
            ));
        }
        Ok(net)
    }
}

/// One (method, axis value) result.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub method: Method,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub n_tags: usize,
    /// Error rate, or the bound value for bound rows.
    pub ber: f64,
    pub ci95: f64,
    pub bit_count: u64,
    pub error_count: u64,
    pub trials: u64,
    pub seed: u64,
    /// Detector time summed over trials (all workers); not deterministic.
    pub detector_seconds: f64,
}

impl BerRow {
    fn counted(method: Method, axis: SweepAxis, value: f64, n_tags: usize, errors: u64, bits: u64, trials: u64, seed: u64, secs: f64) -> Self {
        let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        BerRow {
            method,
            axis,
            axis_value: value,
            n_tags,
            ber,
            ci95: ci95(ber, bits),
            bit_count: bits,
            error_count: errors,
            trials,
            seed,
            detector_seconds: secs,
        }
    }

    /// Binomial standard deviation of the estimate.
    pub fn sigma(&self) -> f64 {
        if self.bit_count == 0 {
            0.0
        } else {
            (self.ber * (1.0 - self.ber) / self.bit_count as f64).sqrt()
        }
    }
}

/// Normal-approximation 95% half-width `1.96 sqrt(p(1-p)/n)`.
pub fn ci95(ber: f64, bits: u64) -> f64 {
    if bits == 0 {
        0.0
    } else {
        1.96 * (ber * (1.0 - ber) / bits as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Ordered by method (as listed in the sweep), then axis value.
    pub rows: Vec<BerRow>,
}

impl SweepResult {
    pub fn get(&self, method: Method, axis_value: f64) -> Option<&BerRow> {
        self.rows.iter().find(|r| r.method == method && r.axis_value == axis_value)
    }

    pub fn series(&self, method: Method) -> Vec<&BerRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }
}

/// Worker cap from `AMBC_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("AMBC_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| HarnessError::invalid("AMBC_THREADS", format!("expected a positive integer, got `{v}`"))),
        _ => Ok(None),
    }
}

/// Runs every point of `spec`. `threads = None` uses all cores.
pub fn run_sweep(spec: &SweepSpec, models: &ModelSet, threads: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let mut per_point = Vec::with_capacity(spec.values.len());
    for &v in &spec.values {
        let cfg = spec.axis.apply(&spec.base, v)?;
        if spec.methods.contains(&Method::EmbedNet) {
            models.embednet_for(&cfg)?;
        }
        if spec.methods.contains(&Method::ChanEstNet) {
            models.chanestnet_for(&cfg)?;
        }
        per_point.push(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;

    // Simulated methods in a fixed order; counts come back in this order.
    let simulated: Vec<Method> = spec.methods.iter().copied().filter(|m| !m.is_bound()).collect();
    let mut cells: BTreeMap<(Method, usize), BerRow> = BTreeMap::new();
    for (pi, cfg) in per_point.iter().enumerate() {
        let v = spec.values[pi];
        if !simulated.is_empty() {
            let counts = pool.install(|| {
                (0..spec.trials)
                    .into_par_iter()
                    .map(|t| run_trial(cfg, &simulated, models, &spec.options, spec.seed, pi as u64, t))
                    .try_reduce(|| Counts::zero(simulated.len()), |a, b| Ok(a.merge(b)))
            })?;
            let bits_per_trial = (cfg.data_len() * cfg.n_tags) as u64;
            for (mi, &m) in simulated.iter().enumerate() {
                let row = BerRow::counted(
                    m,
                    spec.axis,
                    v,
                    cfg.n_tags,
                    counts.errors[mi],
                    bits_per_trial * spec.trials,
                    spec.trials,
                    spec.seed,
                    counts.nanos[mi] as f64 * 1e-9,
                );
                cells.insert((m, pi), row);
            }
        }
        for &m in spec.methods.iter().filter(|m| m.is_bound()) {
            let params = PepBoundParams::from_config(cfg, spec.delta0.resolve(cfg, spec.seed)?);
            let value = match m {
                Method::PepUnion => pep_union_bound(&params),
                _ => pep_chernoff_bound(&params),
            };
            cells.insert(
                (m, pi),
                BerRow {
                    method: m,
                    axis: spec.axis,
                    axis_value: v,
                    n_tags: cfg.n_tags,
                    ber: value,
                    ci95: 0.0,
                    bit_count: 0,
                    error_count: 0,
                    trials: 0,
                    seed: spec.seed,
                    detector_seconds: 0.0,
                },
            );
        }
    }
    Ok(SweepResult {
        rows: cells.into_values().collect(),
    })
}

#[derive(Debug, Clone)]
struct Counts {
    errors: Vec<u64>,
    nanos: Vec<u128>,
}

impl Counts {
    fn zero(n: usize) -> Self {
        Counts {
            errors: vec![0; n],
            nanos: vec![0; n],
        }
    }

    fn merge(mut self, other: Counts) -> Self {
        for (a, b) in self.errors.iter_mut().zip(other.errors) {
            *a += b;
        }
        for (a, b) in self.nanos.iter_mut().zip(other.nanos) {
            *a += b;
        }
        self
    }
}

/// Channel and frames of one trial. The channel is shared by every method;
/// the one-hot frame serves LRT, ED and ChanEstNet, the class-balanced
/// frame serves EmbedNet.
pub struct TrialFrames {
    pub channel: ChannelRealization,
    pub one_hot: Option<Frame>,
    pub balanced: Option<Frame>,
}

pub fn trial_frames(cfg: &SystemConfig, seed: u64, point: u64, trial: u64, one_hot: bool, balanced: bool) -> Result<TrialFrames> {
    let channel = draw_channel(cfg, &mut RngStream::derived(seed, &[CHANNEL_STREAM, point, trial]))?;
    let one_hot = if one_hot {
        let sched = PilotSchedule::one_hot(cfg.n_tags, cfg.n_pilots)?;
        Some(build_frame(cfg, &channel, &sched, &mut RngStream::derived(seed, &[ONE_HOT_STREAM, point, trial]))?)
    } else {
        None
    };
    let balanced = if balanced {
        let mut rng = RngStream::derived(seed, &[BALANCED_STREAM, point, trial]);
        let sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots, &mut rng)?;
        Some(build_frame(cfg, &channel, &sched, &mut rng)?)
    } else {
        None
    };
    Ok(TrialFrames { channel, one_hot, balanced })
}

fn count_errors(frame: &Frame, decisions: &[usize]) -> u64 {
    decisions
        .iter()
        .zip(&frame.labels[frame.pilot_len..])
        .map(|(d, t)| (d ^ t).count_ones() as u64)
        .sum()
}

/// Hypothesis decisions of one method on the data symbols of its frame.
pub fn detect(method: Method, cfg: &SystemConfig, frames: &TrialFrames, models: &ModelSet, options: &DetectorOptions) -> Result<Vec<usize>> {
    let one_hot = || frames.one_hot.as_ref().expect("one-hot frame generated");
    Ok(match method {
        Method::LrtPerfectCsi => {
            let frame = one_hot();
            let det = LrtDetector::new(
                frames.channel.effective.clone(),
                cfg.source,
                options.gaussian_lrt,
                cfg.sigma_s_sq,
                cfg.noise_var(),
            )?;
            frame
                .data_range()
                .map(|t| Ok(det.detect(frame.obs_block(t), frame.ambient_row(t))?.chosen.index()))
                .collect::<Result<_>>()?
        }
        Method::EnergyDetector => {
            let frame = one_hot();
            let ch = &frames.channel.effective;
            let stats = match options.ed_variance {
                EdVariance::Stated => EnergyStats::new(ch, cfg.sigma_s_sq, cfg.noise_var(), cfg.str_samples),
                EdVariance::SourceMatched => {
                    EnergyStats::for_source(ch, &AmbientSource::for_config(cfg), cfg.noise_var(), cfg.str_samples)
                }
            };
            frame
                .data_range()
                .map(|t| Ok(energy_detect(frame.obs_block(t), &stats)?.chosen.index()))
                .collect::<Result<_>>()?
        }
        Method::EmbedNet => {
            let frame = frames.balanced.as_ref().expect("class-balanced frame generated");
            embednet::detect_frame(frame, models.embednet_for(cfg)?)?
        }
        Method::ChanEstNet => chanestnet::detect_frame(one_hot(), models.chanestnet_for(cfg)?, cfg, options.gaussian_lrt)?,
        Method::PepUnion | Method::PepChernoff => {
            return Err(HarnessError::invalid("methods", "bounds are evaluated, not simulated"))
        }
    })
}

fn run_trial(
    cfg: &SystemConfig,
    methods: &[Method],
    models: &ModelSet,
    options: &DetectorOptions,
    seed: u64,
    point: u64,
    trial: u64,
) -> Result<Counts> {
    let need_one_hot = methods.iter().any(|m| matches!(m, Method::LrtPerfectCsi | Method::EnergyDetector | Method::ChanEstNet));
    let need_balanced = methods.contains(&Method::EmbedNet);
    let frames = trial_frames(cfg, seed, point, trial, need_one_hot, need_balanced)?;
    let mut counts = Counts::zero(methods.len());
    for (mi, &m) in methods.iter().enumerate() {
        let start = Instant::now();
        let decisions = detect(m, cfg, &frames, models, options)?;
        counts.nanos[mi] = start.elapsed().as_nanos();
        let frame = if m == Method::EmbedNet { &frames.balanced } else { &frames.one_hot };
        counts.errors[mi] = count_errors(frame.as_ref().expect("frame generated"), &decisions);
    }
    Ok(counts)
}
