//! Prototypical covariance-feature detector.
//!
//! Architecture (`M` antennas, `D = 64`):
//!
//! ```text
//! 2xMxM -> Conv3x3(32)+BN+ReLU -> Conv3x3(64)+BN+ReLU -> AdaptiveAvgPool(4,4)
//!       -> flatten(1024) -> FC(64)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use ambc_core::channel::{build_frame, draw_channel, Frame, PilotSchedule};
use ambc_core::config::SystemConfig;
use ambc_core::rng::RngStream;
use ambc_nn::checkpoint::Checkpoint;
use ambc_nn::layers::{AdaptiveAvgPool2d, BatchNorm2d, Conv2d, Flatten, Layer, Linear, Relu};
use ambc_nn::loss::softmax_cross_entropy;
use ambc_nn::{AdamState, Mode, Real, Sequential, Tensor};

use crate::features::covariance_feature;
use crate::{LearnedError, Result, TrainingLog};

pub const EMBED_DIM: usize = 64;
pub const ARCH: &str = "embednet";

const INIT_STREAM: u64 = 0xe3b0_0001;
const TRAIN_STREAM: u64 = 0xe3b0_0002;
const VALID_STREAM: u64 = 0xe3b0_0003;

#[derive(Debug, Clone)]
pub struct EmbedNet {
    net: Sequential<f32>,
    n_antennas: usize,
}

/// The layer stack does not depend on `M`: adaptive pooling maps any
/// `M x M` map to `4 x 4`.
fn architecture(seed: u64) -> Sequential<f32> {
    let mut stream = RngStream::new(seed, INIT_STREAM);
    let rng = stream.raw();
    Sequential::new()
        .push("conv1", Layer::Conv2d(Conv2d::new(2, 32, rng)))
        .push("bn1", Layer::BatchNorm2d(BatchNorm2d::new(32)))
        .push("relu1", Layer::Relu(Relu::new()))
        .push("conv2", Layer::Conv2d(Conv2d::new(32, 64, rng)))
        .push("bn2", Layer::BatchNorm2d(BatchNorm2d::new(64)))
        .push("relu2", Layer::Relu(Relu::new()))
        .push("pool", Layer::AdaptiveAvgPool2d(AdaptiveAvgPool2d::new(4, 4)))
        .push("flatten", Layer::Flatten(Flatten::new()))
        .push("fc", Layer::Linear(Linear::new(64 * 16, EMBED_DIM, rng)))
}

impl EmbedNet {
    /// Freshly initialized network for `n_antennas` reader antennas.
    pub fn new(n_antennas: usize, seed: u64) -> Self {
        EmbedNet {
            net: architecture(seed),
            n_antennas,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn network(&self) -> &Sequential<f32> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Sequential<f32> {
        &mut self.net
    }

    /// Evaluation-mode embeddings of a `B x 2 x M x M` batch, `B x D`.
    pub fn embed(&self, u: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(self.net.infer(u)?)
    }

    /// `extra` entries (training provenance) are stored alongside the
    /// architecture keys.
    pub fn to_checkpoint(&self, extra: BTreeMap<String, String>) -> Checkpoint {
        let mut meta = extra;
        meta.insert("arch".into(), ARCH.into());
        meta.insert("n_antennas".into(), self.n_antennas.to_string());
        meta.insert("embed_dim".into(), EMBED_DIM.to_string());
        Checkpoint::capture(&self.net, meta)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta("arch") != Some(ARCH) {
            return Err(LearnedError::Architecture(format!(
                "expected arch `{ARCH}`, found {:?}",
                ckpt.meta("arch")
            )));
        }
        let n_antennas: usize = ckpt.meta_parse("n_antennas")?;
        let mut net = EmbedNet::new(n_antennas, 0);
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

/// Network inputs for symbols `range` of a frame, `len x 2 x M x M`.
pub fn frame_inputs(frame: &Frame, range: std::ops::Range<usize>) -> Tensor<f32> {
    let m = frame.n_antennas;
    let n = range.len();
    let data = range
        .flat_map(|t| covariance_feature(frame.obs_block(t)).to_input())
        .collect();
    Tensor::new(vec![n, 2, m, m], data).expect("consistent feature size")
}

/// Per-class means of support embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet<F = f32> {
    dim: usize,
    /// Row-major `classes x D`.
    pub prototypes: Vec<F>,
    pub counts: Vec<usize>,
}

impl<F: Real> PrototypeSet<F> {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prototype(&self, class: usize) -> &[F] {
        &self.prototypes[class * self.dim..(class + 1) * self.dim]
    }

    /// Squared Euclidean distance from `query` to every prototype.
    pub fn distances(&self, query: &[F]) -> Vec<F> {
        self.prototypes
            .chunks_exact(self.dim)
            .map(|p| p.iter().zip(query).map(|(a, b)| (*a - *b) * (*a - *b)).sum())
            .collect()
    }
}

/// `embeddings` is row-major `labels.len() x dim`.
pub fn form_prototypes<F: Real>(
    embeddings: &[F],
    dim: usize,
    labels: &[usize],
    n_classes: usize,
) -> Result<PrototypeSet<F>> {
    ambc_core::Error::check_len("pilot embeddings", labels.len() * dim, embeddings.len())?;
    let mut sums = vec![F::zero(); n_classes * dim];
    let mut counts = vec![0usize; n_classes];
    for (row, &label) in embeddings.chunks_exact(dim).zip(labels) {
        if label >= n_classes {
            return Err(ambc_core::Error::config("pilot_labels", format!("label {label} >= {n_classes}")).into());
        }
        counts[label] += 1;
        for (s, v) in sums[label * dim..(label + 1) * dim].iter_mut().zip(row) {
            *s += *v;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(LearnedError::UncoveredClass { class });
    }
    for (class, &c) in counts.iter().enumerate() {
        let inv = F::one() / F::from_usize(c).expect("count");
        for s in &mut sums[class * dim..(class + 1) * dim] {
            *s *= inv;
        }
    }
    Ok(PrototypeSet {
        dim,
        prototypes: sums,
        counts,
    })
}

/// Nearest prototype; ties go to the lowest class index.
pub fn classify<F: Real>(query: &[F], protos: &PrototypeSet<F>) -> usize {
    let d = protos.distances(query);
    let mut best = 0;
    for (j, &v) in d.iter().enumerate().skip(1) {
        if v < d[best] {
            best = j;
        }
    }
    best
}

/// Hypothesis index for every data symbol of `frame`. The network is only
/// read; pilots set the prototypes for this frame alone.
pub fn detect_frame(frame: &Frame, net: &EmbedNet) -> Result<Vec<usize>> {
    if frame.n_antennas != net.n_antennas {
        return Err(ambc_core::Error::Dimension {
            what: "frame antennas",
            expected: net.n_antennas,
            got: frame.n_antennas,
        }
        .into());
    }
    let z = net.embed(&frame_inputs(frame, 0..frame.frame_len()))?;
    let p = frame.pilot_len;
    let protos = form_prototypes(&z.data()[..p * EMBED_DIM], EMBED_DIM, &frame.labels[..p], 1 << frame.n_tags)?;
    Ok(z.data()[p * EMBED_DIM..]
        .chunks_exact(EMBED_DIM)
        .map(|q| classify(q, &protos))
        .collect())
}

/// Prototypical loss of one episode and its gradient w.r.t. every
/// embedding. The first `n_support` rows are the support set; the rest are
/// queries scored with logits `-|z_q - p_j|^2`.
pub fn episode_loss<F: Real>(
    embeddings: &[F],
    dim: usize,
    labels: &[usize],
    n_support: usize,
    n_classes: usize,
) -> Result<(F, Vec<F>)> {
    let protos = form_prototypes(&embeddings[..n_support * dim], dim, &labels[..n_support], n_classes)?;
    let queries = &embeddings[n_support * dim..];
    let n_query = labels.len() - n_support;
    let logits: Vec<F> = queries.chunks_exact(dim).flat_map(|q| protos.distances(q).into_iter().map(|d| -d)).collect();
    let (loss, g) = softmax_cross_entropy(&Tensor::new(vec![n_query, n_classes], logits)?, &labels[n_support..])?;
    let g = g.data();
    let two = F::one() + F::one();
    let mut grad = vec![F::zero(); embeddings.len()];
    let mut dproto = vec![F::zero(); n_classes * dim];
    for (q, zq) in queries.chunks_exact(dim).enumerate() {
        let dz = &mut grad[(n_support + q) * dim..(n_support + q + 1) * dim];
        for j in 0..n_classes {
            let gq = g[q * n_classes + j];
            let pj = protos.prototype(j);
            for i in 0..dim {
                let diff = two * gq * (zq[i] - pj[i]);
                dz[i] -= diff;
                dproto[j * dim + i] += diff;
            }
        }
    }
    for (s, &label) in labels[..n_support].iter().enumerate() {
        let inv = F::one() / F::from_usize(protos.counts[label]).expect("count");
        for i in 0..dim {
            grad[s * dim + i] += dproto[label * dim + i] * inv;
        }
    }
    Ok((loss, grad))
}

/// Episodic training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicTraining {
    /// Distinct episodes (frames) per epoch.
    pub episodes: usize,
    /// Passes over the same episodes.
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Held-out episodes scored after every epoch; 0 disables validation.
    pub validation_episodes: usize,
}

impl Default for EpisodicTraining {
    fn default() -> Self {
        EpisodicTraining {
            episodes: 20_000,
            epochs: 1,
            learning_rate: 1e-3,
            seed: 1,
            validation_episodes: 200,
        }
    }
}

/// Frame `index` of an episode sequence: random channel, class-balanced
/// pilots, uniformly random data states.
pub fn episode_frame(cfg: &SystemConfig, seed: u64, stream: u64, index: u64) -> Result<Frame> {
    let mut rng = RngStream::derived(seed, &[stream, index]);
    let ch = draw_channel(cfg, &mut rng)?;
    let sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots, &mut rng)?;
    Ok(build_frame(cfg, &ch, &sched, &mut rng)?)
}

/// One Adam step per episode, with all `T` symbols of the episode in one
/// training-mode batch (support and queries share the batch statistics).
pub fn train_episodic(cfg: &SystemConfig, opts: &EpisodicTraining, net: &mut EmbedNet) -> Result<TrainingLog> {
    cfg.validate()?;
    if cfg.n_antennas != net.n_antennas {
        return Err(ambc_core::Error::Dimension {
            what: "training antennas",
            expected: net.n_antennas,
            got: cfg.n_antennas,
        }
        .into());
    }
    let classes = cfg.n_hypotheses();
    let mut adam = AdamState::new(opts.learning_rate);
    let mut log = TrainingLog::default();
    for _ in 0..opts.epochs {
        let mut total = 0.0;
        for e in 0..opts.episodes {
            let frame = episode_frame(cfg, opts.seed, TRAIN_STREAM, e as u64)?;
            let x = frame_inputs(&frame, 0..frame.frame_len());
            net.net.zero_grad();
            let z = net.net.forward(&x, Mode::Train)?;
            let (loss, grad) = episode_loss(z.data(), EMBED_DIM, &frame.labels, frame.pilot_len, classes)?;
            net.net.backward(&Tensor::new(z.shape().to_vec(), grad)?)?;
            adam.step(&mut net.net.trainable_mut())?;
            total += loss as f64;
        }
        net.net.clear_cache();
        log.epoch_loss.push(total / opts.episodes.max(1) as f64);
        if opts.validation_episodes > 0 {
            log.validation_loss.push(validation_loss(cfg, opts.seed, opts.validation_episodes, net)?);
        }
    }
    log.steps = adam.step_count();
    Ok(log)
}

/// Mean evaluation-mode episode loss over held-out episodes.
pub fn validation_loss(cfg: &SystemConfig, seed: u64, episodes: usize, net: &EmbedNet) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..episodes {
        let frame = episode_frame(cfg, seed, VALID_STREAM, e as u64)?;
        let z = net.embed(&frame_inputs(&frame, 0..frame.frame_len()))?;
        total += episode_loss(z.data(), EMBED_DIM, &frame.labels, frame.pilot_len, cfg.n_hypotheses())?.0 as f64;
    }
    Ok(total / episodes.max(1) as f64)
}
