//! Training recipes for the learned detectors and an on-disk model cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ambc_core::config::SystemConfig;
use ambc_learned::chanestnet::{self, ChanEstNet, PoolMode, RegressionTraining};
use ambc_learned::embednet::{self, EmbedNet, EpisodicTraining};
use ambc_learned::TrainingLog;

use crate::Result;

/// Training SNR for every learned model.
pub const TRAIN_SNR_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBudget {
    pub embed_episodes: usize,
    pub embed_epochs: usize,
    pub chan_samples: usize,
    pub chan_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub pool: PoolMode,
}

impl Default for TrainingBudget {
    fn default() -> Self {
        TrainingBudget {
            embed_episodes: 20_000,
            embed_epochs: 1,
            chan_samples: 20_000,
            chan_epochs: 100,
            learning_rate: 1e-3,
            seed: 1,
            pool: PoolMode::Fixed4x4,
        }
    }
}

/// `base` at the training SNR with `n_tags` tags.
pub fn training_config(base: &SystemConfig, n_tags: usize) -> SystemConfig {
    let zeta = base.zeta_db.first().copied().unwrap_or(-20.0);
    SystemConfig {
        n_tags,
        zeta_db: vec![zeta; n_tags],
        snr_db: TRAIN_SNR_DB,
        ..base.clone()
    }
}

fn scenario_metadata(cfg: &SystemConfig) -> BTreeMap<String, String> {
    let zeta: Vec<String> = cfg.zeta_db.iter().map(|z| z.to_string()).collect();
    [
        ("n_tags", cfg.n_tags.to_string()),
        ("source", cfg.source.name().to_string()),
        ("forward_fading", cfg.forward_fading.name().to_string()),
        ("str_samples", cfg.str_samples.to_string()),
        ("frame_len", cfg.frame_len.to_string()),
        ("n_pilots", cfg.n_pilots.to_string()),
        ("zeta_db", zeta.join(",")),
        ("train_snr_db", cfg.snr_db.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn embednet_metadata(cfg: &SystemConfig, b: &TrainingBudget) -> BTreeMap<String, String> {
    let mut m = scenario_metadata(cfg);
    m.insert("episodes".into(), b.embed_episodes.to_string());
    m.insert("epochs".into(), b.embed_epochs.to_string());
    m.insert("learning_rate".into(), b.learning_rate.to_string());
    m.insert("seed".into(), b.seed.to_string());
    m
}

pub fn chanestnet_metadata(cfg: &SystemConfig, b: &TrainingBudget) -> BTreeMap<String, String> {
    let mut m = scenario_metadata(cfg);
    m.insert("samples".into(), b.chan_samples.to_string());
    m.insert("epochs".into(), b.chan_epochs.to_string());
    m.insert("batch_size".into(), "128".into());
    m.insert("pool".into(), b.pool.name().into());
    m.insert("learning_rate".into(), b.learning_rate.to_string());
    m.insert("seed".into(), b.seed.to_string());
    m
}

pub fn train_embednet(cfg: &SystemConfig, b: &TrainingBudget) -> Result<(EmbedNet, TrainingLog)> {
    let mut net = EmbedNet::new(cfg.n_antennas, b.seed);
    let opts = EpisodicTraining {
        episodes: b.embed_episodes,
        epochs: b.embed_epochs,
        learning_rate: b.learning_rate,
        seed: b.seed,
        validation_episodes: 200,
    };
    let log = embednet::train_episodic(cfg, &opts, &mut net)?;
    Ok((net, log))
}

pub fn train_chanestnet(cfg: &SystemConfig, b: &TrainingBudget) -> Result<(ChanEstNet, TrainingLog)> {
    let data = chanestnet::generate_dataset(cfg, b.chan_samples, b.seed)?;
    let validation = chanestnet::generate_dataset(cfg, 1000, b.seed ^ 0x5a5a_5a5a)?;
    let mut net = ChanEstNet::new(cfg.n_tags, cfg.n_antennas, b.pool, b.seed);
    let opts = RegressionTraining {
        epochs: b.chan_epochs,
        batch_size: 128,
        learning_rate: b.learning_rate,
        seed: b.seed,
    };
    let log = chanestnet::train_chanestnet(&data, &opts, &mut net, Some(&validation))?;
    Ok((net, log))
}

/// FNV-1a over the sorted metadata, for cache file names.
fn fingerprint(meta: &BTreeMap<String, String>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (k, v) in meta {
        for b in k.bytes().chain([b'=']).chain(v.bytes()).chain([0]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn cache_path(dir: &Path, arch: &str, meta: &BTreeMap<String, String>) -> PathBuf {
    dir.join(format!("{arch}-n{}-{:016x}.ckpt", meta["n_tags"], fingerprint(meta)))
}

fn matches(meta: &BTreeMap<String, String>, ckpt: &ambc_nn::checkpoint::Checkpoint) -> bool {
    meta.iter().all(|(k, v)| ckpt.meta(k) == Some(v.as_str()))
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Cached(PathBuf),
    Trained { log: TrainingLog, seconds: f64 },
}

/// Loads a matching model from `dir` or trains (and stores) one.
pub fn cached_embednet(dir: Option<&Path>, cfg: &SystemConfig, b: &TrainingBudget) -> Result<(EmbedNet, Provenance)> {
    let meta = embednet_metadata(cfg, b);
    if let Some(dir) = dir {
        let path = cache_path(dir, "embednet", &meta);
        if let Ok((net, ckpt)) = EmbedNet::load(&path) {
            if matches(&meta, &ckpt) {
                return Ok((net, Provenance::Cached(path)));
            }
        }
    }
    let start = std::time::Instant::now();
    let (net, log) = train_embednet(cfg, b)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::HarnessError::io(dir, e))?;
        net.save(cache_path(dir, "embednet", &meta), meta)?;
    }
    Ok((net, Provenance::Trained { log, seconds }))
}

pub fn cached_chanestnet(dir: Option<&Path>, cfg: &SystemConfig, b: &TrainingBudget) -> Result<(ChanEstNet, Provenance)> {
    let meta = chanestnet_metadata(cfg, b);
    if let Some(dir) = dir {
        let path = cache_path(dir, "chanestnet", &meta);
        if let Ok((net, ckpt)) = ChanEstNet::load(&path) {
            if matches(&meta, &ckpt) {
                return Ok((net, Provenance::Cached(path)));
            }
        }
    }
    let start = std::time::Instant::now();
    let (net, log) = train_chanestnet(cfg, b)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| crate::HarnessError::io(dir, e))?;
        net.save(cache_path(dir, "chanestnet", &meta), meta)?;
    }
    Ok((net, Provenance::Trained { log, seconds }))
}
