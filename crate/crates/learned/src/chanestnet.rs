//! Pilot-correlation channel estimator with a CNN refinement stage and a
//! plug-in LRT over the data symbols.
//!
//! Architecture (`N` tags, `M` antennas):
//!
//! ```text
//! 2x(N+1)xM -> [Conv3x3+BN+ReLU] x3 (32, 64, 128) -> AdaptiveAvgPool(4,4)
//!           -> flatten(2048) -> FC(256)+ReLU -> FC((N+1)2M)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use ambc_core::channel::{build_frame, draw_channel, ChannelRealization, EffectiveChannels, Frame, PilotSchedule, ScheduleKind};
use ambc_core::config::SystemConfig;
use ambc_core::detectors::{GaussianLrtMode, LrtDetector};
use ambc_core::rng::RngStream;
use ambc_core::C64;
use ambc_nn::checkpoint::Checkpoint;
use ambc_nn::layers::{AdaptiveAvgPool2d, BatchNorm2d, Conv2d, Flatten, Layer, Linear, Relu};
use ambc_nn::loss::mse;
use ambc_nn::{AdamState, Mode, Sequential, Tensor};

use crate::{LearnedError, Result, TrainingLog};

pub const ARCH: &str = "chanestnet";

const INIT_STREAM: u64 = 0xc4a0_0001;
const DATA_STREAM: u64 = 0xc4a0_0002;
const SHUFFLE_STREAM: u64 = 0xc4a0_0003;

/// Per-configuration pilot correlations: row 0 estimates `h`, row `i`
/// estimates `h + v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFeature {
    n_tags: usize,
    n_antennas: usize,
    /// Row-major `(N+1) x M`.
    pub w_corr: Vec<C64>,
}

impl CorrelationFeature {
    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.w_corr[i * self.n_antennas..(i + 1) * self.n_antennas]
    }

    /// `2 x (N+1) x M` real planes, Re then Im.
    pub fn to_input(&self) -> Vec<f32> {
        let re = self.w_corr.iter().map(|z| z.re as f32);
        let im = self.w_corr.iter().map(|z| z.im as f32);
        re.chain(im).collect()
    }
}

/// Averages `(sum_k s_k^* x_k) / (sum_k |s_k|^2)` over the pilots of every
/// one-hot configuration, using the true ambient symbols.
pub fn correlate_pilots(frame: &Frame) -> Result<CorrelationFeature> {
    let sched = &frame.schedule;
    if sched.kind != ScheduleKind::OneHot {
        return Err(ambc_core::Error::Schedule("channel estimation needs a one-hot pilot schedule".into()).into());
    }
    let (n, m) = (frame.n_tags, frame.n_antennas);
    let mut acc = vec![C64::new(0.0, 0.0); (n + 1) * m];
    let mut counts = vec![0usize; n + 1];
    for t in 0..frame.pilot_len {
        let config = sched.assignments[t];
        let s = frame.ambient_row(t);
        let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        if !(energy > 0.0) {
            return Err(ambc_core::Error::DegenerateCorrelation { config }.into());
        }
        let obs = frame.obs_block(t);
        for a in 0..m {
            let corr: C64 = obs.antenna(a).iter().zip(s).map(|(x, s)| s.conj() * x).sum();
            acc[config * m + a] += corr / energy;
        }
        counts[config] += 1;
    }
    if let Some(config) = counts.iter().position(|&c| c == 0) {
        return Err(ambc_core::Error::Schedule(format!("configuration {config} has no pilots")).into());
    }
    for (config, &c) in counts.iter().enumerate() {
        for z in &mut acc[config * m..(config + 1) * m] {
            *z /= c as f64;
        }
    }
    Ok(CorrelationFeature {
        n_tags: n,
        n_antennas: m,
        w_corr: acc,
    })
}

/// Regression target: rows `[Re h, Im h]`, `[Re v_1, Im v_1]`, ...
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLabel {
    n_tags: usize,
    n_antennas: usize,
    /// Row-major `(N+1) x 2M`.
    pub d: Vec<f64>,
}

impl ChannelLabel {
    pub fn from_channels(ch: &EffectiveChannels) -> Self {
        let (n, m) = (ch.n_tags(), ch.n_antennas());
        let mut d = Vec::with_capacity((n + 1) * 2 * m);
        for row in std::iter::once(&ch.h[..]).chain((0..n).map(|i| ch.v(i))) {
            d.extend(row.iter().map(|z| z.re));
            d.extend(row.iter().map(|z| z.im));
        }
        ChannelLabel {
            n_tags: n,
            n_antennas: m,
            d,
        }
    }

    pub fn from_realization(ch: &ChannelRealization) -> Self {
        Self::from_channels(&ch.effective)
    }

    pub fn from_rows(d: Vec<f64>, n_tags: usize, n_antennas: usize) -> Result<Self> {
        ambc_core::Error::check_len("label entries", (n_tags + 1) * 2 * n_antennas, d.len())?;
        Ok(ChannelLabel { n_tags, n_antennas, d })
    }

    /// Reassembles `h` and the `v_i` into effective channels.
    pub fn to_channels(&self) -> Result<EffectiveChannels> {
        let m = self.n_antennas;
        let mut rows = self.d.chunks_exact(2 * m).map(|r| (0..m).map(|a| C64::new(r[a], r[m + a])).collect::<Vec<_>>());
        let h = rows.next().expect("at least the direct row");
        let v: Vec<C64> = rows.flatten().collect();
        Ok(EffectiveChannels::new(h, v, self.n_tags)?)
    }
}

/// Channel estimate with its `2^N` combined channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub channels: EffectiveChannels,
}

impl ChannelEstimate {
    pub fn h_hat(&self) -> &[C64] {
        &self.channels.h
    }

    pub fn v_hat(&self, tag: usize) -> &[C64] {
        self.channels.v(tag)
    }

    pub fn w_hat(&self, j: usize) -> &[C64] {
        self.channels.w(j)
    }
}

/// Spatial size after the pooling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    /// `4 x 4` regardless of the feature size; rows are replicated when
    /// `N + 1 < 4`.
    #[default]
    Fixed4x4,
    /// The native `(N+1) x M` size.
    Native,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::Fixed4x4 => "4x4",
            PoolMode::Native => "native",
        }
    }

    fn output(self, n_tags: usize, n_antennas: usize) -> (usize, usize) {
        match self {
            PoolMode::Fixed4x4 => (4, 4),
            PoolMode::Native => (n_tags + 1, n_antennas),
        }
    }
}

impl std::str::FromStr for PoolMode {
    type Err = LearnedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4x4" | "fixed" => Ok(PoolMode::Fixed4x4),
            "native" => Ok(PoolMode::Native),
            other => Err(LearnedError::Architecture(format!("unknown pool mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChanEstNet {
    net: Sequential<f32>,
    n_tags: usize,
    n_antennas: usize,
    pool: PoolMode,
}

impl ChanEstNet {
    pub fn new(n_tags: usize, n_antennas: usize, pool: PoolMode, seed: u64) -> Self {
        let mut stream = RngStream::new(seed, INIT_STREAM);
        let rng = stream.raw();
        let (ph, pw) = pool.output(n_tags, n_antennas);
        let out = (n_tags + 1) * 2 * n_antennas;
        let net = Sequential::new()
            .push("conv1", Layer::Conv2d(Conv2d::new(2, 32, rng)))
            .push("bn1", Layer::BatchNorm2d(BatchNorm2d::new(32)))
            .push("relu1", Layer::Relu(Relu::new()))
            .push("conv2", Layer::Conv2d(Conv2d::new(32, 64, rng)))
            .push("bn2", Layer::BatchNorm2d(BatchNorm2d::new(64)))
            .push("relu2", Layer::Relu(Relu::new()))
            .push("conv3", Layer::Conv2d(Conv2d::new(64, 128, rng)))
            .push("bn3", Layer::BatchNorm2d(BatchNorm2d::new(128)))
            .push("relu3", Layer::Relu(Relu::new()))
            .push("pool", Layer::AdaptiveAvgPool2d(AdaptiveAvgPool2d::new(ph, pw)))
            .push("flatten", Layer::Flatten(Flatten::new()))
            .push("fc1", Layer::Linear(Linear::new(128 * ph * pw, 256, rng)))
            .push("relu4", Layer::Relu(Relu::new()))
            .push("fc2", Layer::Linear(Linear::new(256, out, rng)));
        ChanEstNet {
            net,
            n_tags,
            n_antennas,
            pool,
        }
    }

    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn pool_mode(&self) -> PoolMode {
        self.pool
    }

    pub fn output_dim(&self) -> usize {
        (self.n_tags + 1) * 2 * self.n_antennas
    }

    pub fn network(&self) -> &Sequential<f32> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Sequential<f32> {
        &mut self.net
    }

    fn check_feature(&self, c: &CorrelationFeature) -> Result<()> {
        if c.n_tags != self.n_tags || c.n_antennas != self.n_antennas {
            return Err(ambc_nn::NnError::shape(
                "ChanEstNet input",
                &[2, self.n_tags + 1, self.n_antennas],
                &[2, c.n_tags + 1, c.n_antennas],
            )
            .into());
        }
        Ok(())
    }

    /// Evaluation-mode estimate from one feature.
    pub fn estimate(&self, c: &CorrelationFeature) -> Result<ChannelEstimate> {
        self.check_feature(c)?;
        let x = Tensor::new(vec![1, 2, self.n_tags + 1, self.n_antennas], c.to_input())?;
        let y = self.net.infer(&x)?;
        let d = y.data().iter().map(|&v| v as f64).collect();
        let label = ChannelLabel::from_rows(d, self.n_tags, self.n_antennas)?;
        Ok(ChannelEstimate {
            channels: label.to_channels()?,
        })
    }

    pub fn to_checkpoint(&self, extra: BTreeMap<String, String>) -> Checkpoint {
        let mut meta = extra;
        meta.insert("arch".into(), ARCH.into());
        meta.insert("n_tags".into(), self.n_tags.to_string());
        meta.insert("n_antennas".into(), self.n_antennas.to_string());
        meta.insert("pool".into(), self.pool.name().into());
        Checkpoint::capture(&self.net, meta)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta("arch") != Some(ARCH) {
            return Err(LearnedError::Architecture(format!(
                "expected arch `{ARCH}`, found {:?}",
                ckpt.meta("arch")
            )));
        }
        let n_tags: usize = ckpt.meta_parse("n_tags")?;
        let n_antennas: usize = ckpt.meta_parse("n_antennas")?;
        let pool: PoolMode = ckpt.meta("pool").unwrap_or("4x4").parse()?;
        let mut net = ChanEstNet::new(n_tags, n_antennas, pool, 0);
        ckpt.restore(&mut net.net)?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: BTreeMap<String, String>) -> Result<()> {
        Ok(self.to_checkpoint(extra).save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Checkpoint)> {
        let ckpt = Checkpoint::load(path)?;
        Ok((Self::from_checkpoint(&ckpt)?, ckpt))
    }
}

/// Hypothesis index of every data symbol under the plug-in LRT. Gaussian
/// sources use `gaussian_mode`; the true noise power is assumed known.
pub fn detect_frame_lrt(
    frame: &Frame,
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    gaussian_mode: GaussianLrtMode,
) -> Result<Vec<usize>> {
    let det = LrtDetector::new(est.channels.clone(), cfg.source, gaussian_mode, cfg.sigma_s_sq, cfg.noise_var())?;
    frame
        .data_range()
        .map(|t| Ok(det.detect(frame.obs_block(t), frame.ambient_row(t))?.chosen.index()))
        .collect()
}

/// Correlation, network estimate and plug-in LRT for one frame.
pub fn detect_frame(
    frame: &Frame,
    net: &ChanEstNet,
    cfg: &SystemConfig,
    gaussian_mode: GaussianLrtMode,
) -> Result<Vec<usize>> {
    let est = net.estimate(&correlate_pilots(frame)?)?;
    detect_frame_lrt(frame, &est, cfg, gaussian_mode)
}

/// Correlation features and labels in network layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    pub n_tags: usize,
    pub n_antennas: usize,
    /// Row-major `samples x 2(N+1)M`.
    pub inputs: Vec<f32>,
    /// Row-major `samples x (N+1)2M`.
    pub labels: Vec<f32>,
}

impl ChannelDataset {
    pub fn len(&self) -> usize {
        self.labels.len() / ((self.n_tags + 1) * 2 * self.n_antennas)
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One sample per independent channel draw, from the pilots of a one-hot
/// frame at `cfg`'s SNR.
pub fn generate_dataset(cfg: &SystemConfig, n_samples: usize, seed: u64) -> Result<ChannelDataset> {
    cfg.validate()?;
    // Only the pilot blocks are needed; a single data symbol keeps P < T.
    let pilot_cfg = SystemConfig {
        frame_len: cfg.n_pilots + 1,
        ..cfg.clone()
    };
    let sched = PilotSchedule::one_hot(cfg.n_tags, cfg.n_pilots)?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for s in 0..n_samples {
        let mut rng = RngStream::derived(seed, &[DATA_STREAM, s as u64]);
        let ch = draw_channel(&pilot_cfg, &mut rng)?;
        let frame = build_frame(&pilot_cfg, &ch, &sched, &mut rng)?;
        inputs.extend(correlate_pilots(&frame)?.to_input());
        labels.extend(ChannelLabel::from_realization(&ch).d.iter().map(|&v| v as f32));
    }
    Ok(ChannelDataset {
        n_tags: cfg.n_tags,
        n_antennas: cfg.n_antennas,
        inputs,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Shuffling seed.
    pub seed: u64,
}

impl Default for RegressionTraining {
    fn default() -> Self {
        RegressionTraining {
            epochs: 1,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 1,
        }
    }
}

/// Mini-batch Adam on the summed-squared-error loss. Each epoch visits the
/// dataset once in a fresh shuffled order; a trailing partial batch of one
/// sample is dropped since batch normalization needs two.
pub fn train_chanestnet(
    data: &ChannelDataset,
    opts: &RegressionTraining,
    net: &mut ChanEstNet,
    validation: Option<&ChannelDataset>,
) -> Result<TrainingLog> {
    if data.n_tags != net.n_tags || data.n_antennas != net.n_antennas {
        return Err(LearnedError::Architecture(format!(
            "dataset is N={} M={}, network is N={} M={}",
            data.n_tags, data.n_antennas, net.n_tags, net.n_antennas
        )));
    }
    let (rows, m) = (net.n_tags + 1, net.n_antennas);
    let in_dim = 2 * rows * m;
    let out_dim = net.output_dim();
    let n = data.len();
    let mut adam = AdamState::new(opts.learning_rate);
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..opts.epochs {
        RngStream::derived(opts.seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        let mut total = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(opts.batch_size.max(2)) {
            if batch.len() < 2 {
                continue;
            }
            let b = batch.len();
            let x: Vec<f32> = batch.iter().flat_map(|&i| data.inputs[i * in_dim..(i + 1) * in_dim].iter().copied()).collect();
            let y: Vec<f32> = batch.iter().flat_map(|&i| data.labels[i * out_dim..(i + 1) * out_dim].iter().copied()).collect();
            net.net.zero_grad();
            let pred = net.net.forward(&Tensor::new(vec![b, 2, rows, m], x)?, Mode::Train)?;
            let (loss, grad) = mse(&pred, &Tensor::new(vec![b, out_dim], y)?)?;
            net.net.backward(&grad)?;
            adam.step(&mut net.net.trainable_mut())?;
            total += loss as f64 * b as f64;
            seen += b;
        }
        net.net.clear_cache();
        log.epoch_loss.push(total / seen.max(1) as f64);
        if let Some(v) = validation {
            log.validation_loss.push(evaluation_loss(v, net)?);
        }
    }
    log.steps = adam.step_count();
    Ok(log)
}

/// Mean evaluation-mode loss over a dataset.
pub fn evaluation_loss(data: &ChannelDataset, net: &ChanEstNet) -> Result<f64> {
    let (rows, m) = (net.n_tags + 1, net.n_antennas);
    let n = data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let pred = net.net.infer(&Tensor::new(vec![n, 2, rows, m], data.inputs.clone())?)?;
    let (loss, _) = mse(&pred, &Tensor::new(vec![n, net.output_dim()], data.labels.clone())?)?;
    Ok(loss as f64)
}
