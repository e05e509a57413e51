//! Canned sweeps reproducing each published figure at desk scale.

use std::path::Path;

use ambc_core::config::{SourceKind, SystemConfig};

use crate::method::Method;
use crate::models::{cached_chanestnet, cached_embednet, training_config, Provenance, TrainingBudget};
use crate::profile::Profile;
use crate::sweep::{run_sweep, ModelSet, SweepAxis, SweepResult, SweepSpec};
use crate::throughput::{reference_throughput, throughput, Scheme};
use crate::{HarnessError, Result};

pub const FIGURE_IDS: [&str; 8] = [
    "fig-gaussian-ber",
    "fig-qpsk-ber",
    "fig-zeta-sweep",
    "fig-k-sweep",
    "fig-n-sweep",
    "fig-p-sweep",
    "fig-pep-bound",
    "table-throughput",
];

#[derive(Debug, Clone)]
pub struct Recipe {
    pub id: &'static str,
    pub title: &'static str,
    pub sweeps: Vec<SweepSpec>,
}

fn base(n_tags: usize, source: SourceKind, profile: Profile) -> SystemConfig {
    let mut cfg = SystemConfig::reference(n_tags, source);
    profile.apply(&mut cfg);
    cfg
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

pub fn recipe(id: &str, profile: Profile, trials: u64, seed: u64) -> Result<Recipe> {
    use Method::*;
    let all = vec![LrtPerfectCsi, EnergyDetector, EmbedNet, ChanEstNet];
    let learned_and_lrt = vec![LrtPerfectCsi, EmbedNet, ChanEstNet];
    let spec = |cfg: SystemConfig, axis, values, methods| {
        let mut s = SweepSpec::new(cfg, axis, values, methods, trials, seed);
        s.options = profile.options();
        s
    };
    let per_n = |source: SourceKind, methods: Vec<Method>, values: Vec<f64>| {
        [2, 3].into_iter()
            .map(|n| spec(base(n, source, profile), SweepAxis::SnrDb, values.clone(), methods.clone()))
            .collect::<Vec<_>>()
    };
    let qpsk10 = |n| base(n, SourceKind::Qpsk, profile).with_snr_db(10.0);
    let (title, sweeps) = match id {
        "fig-gaussian-ber" => ("BER vs SNR, Gaussian source, N = 2 and 3", per_n(SourceKind::Gaussian, all, range(0.0, 20.0, 4.0))),
        "fig-qpsk-ber" => ("BER vs SNR, QPSK source, N = 2 and 3", per_n(SourceKind::Qpsk, all, range(0.0, 20.0, 4.0))),
        "fig-zeta-sweep" => (
            "BER vs zeta, QPSK, SNR 0 dB, K = 20, N = 2",
            vec![spec(base(2, SourceKind::Qpsk, profile).with_snr_db(0.0), SweepAxis::ZetaDb, range(-20.0, 0.0, 4.0), learned_and_lrt)],
        ),
        "fig-k-sweep" => (
            "BER vs K, QPSK, SNR 10 dB, N = 2",
            vec![spec(qpsk10(2), SweepAxis::KSamples, vec![1.0, 20.0, 40.0, 60.0, 80.0, 100.0], learned_and_lrt)],
        ),
        "fig-n-sweep" => (
            "BER vs N, QPSK, SNR 10 dB",
            vec![spec(qpsk10(2), SweepAxis::NTags, range(1.0, 5.0, 1.0), learned_and_lrt)],
        ),
        "fig-p-sweep" => (
            "BER vs P, QPSK, SNR 10 dB, N = 2 and 3",
            [2, 3].into_iter()
                .map(|n| spec(qpsk10(n), SweepAxis::PPilots, vec![16.0, 32.0, 64.0], learned_and_lrt.clone()))
                .collect(),
        ),
        "fig-pep-bound" => (
            "Union and Chernoff bounds with the simulated LRT, QPSK, N = 2",
            vec![spec(base(2, SourceKind::Qpsk, profile), SweepAxis::SnrDb, range(0.0, 20.0, 2.0), vec![LrtPerfectCsi, PepUnion, PepChernoff])],
        ),
        "table-throughput" => (
            "Normalized per-tag throughput, QPSK, N = 2 and 3",
            per_n(SourceKind::Qpsk, vec![LrtPerfectCsi, EmbedNet], range(-5.0, 25.0, 5.0)),
        ),
        other => {
            return Err(HarnessError::invalid(
                "figure",
                format!("unknown figure `{other}`; available: {}", FIGURE_IDS.join(", ")),
            ))
        }
    };
    let id = FIGURE_IDS.iter().find(|f| **f == id).expect("listed id");
    Ok(Recipe { id, title, sweeps })
}

/// Tag counts the learned methods of `spec` need models for.
pub fn required_tag_counts(spec: &SweepSpec) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for &v in &spec.values {
        let n = spec.axis.apply(&spec.base, v)?.n_tags;
        if !out.contains(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

/// Fills `models` with every network `spec` needs, from the cache or by
/// training. `log` receives one line per model.
pub fn prepare_models(
    spec: &SweepSpec,
    models: &mut ModelSet,
    model_dir: Option<&Path>,
    budget: &TrainingBudget,
    log: &mut dyn FnMut(String),
) -> Result<()> {
    for n in required_tag_counts(spec)? {
        let cfg = training_config(&spec.base, n);
        if spec.methods.contains(&Method::EmbedNet) && !models.embednet.contains_key(&n) {
            let (net, prov) = cached_embednet(model_dir, &cfg, budget)?;
            log(describe("embednet", n, &prov));
            models.embednet.insert(n, net);
        }
        if spec.methods.contains(&Method::ChanEstNet) && !models.chanestnet.contains_key(&n) {
            let (net, prov) = cached_chanestnet(model_dir, &cfg, budget)?;
            log(describe("chanestnet", n, &prov));
            models.chanestnet.insert(n, net);
        }
    }
    Ok(())
}

fn describe(arch: &str, n: usize, p: &Provenance) -> String {
    match p {
        Provenance::Cached(path) => format!("{arch} N={n}: loaded {}", path.display()),
        Provenance::Trained { log, seconds } => format!(
            "{arch} N={n}: trained in {seconds:.0} s, final loss {:.4}, validation {:?}",
            log.final_loss().unwrap_or(f64::NAN),
            log.validation_loss.last()
        ),
    }
}

/// Runs every sweep of a recipe. User-supplied models take precedence over
/// trained ones.
pub fn run_recipe(
    recipe: &Recipe,
    supplied: &ModelSet,
    model_dir: Option<&Path>,
    budget: &TrainingBudget,
    threads: Option<usize>,
    log: &mut dyn FnMut(String),
) -> Result<Vec<SweepResult>> {
    let mut out = Vec::new();
    for spec in &recipe.sweeps {
        let mut models = supplied.clone();
        prepare_models(spec, &mut models, model_dir, budget, log)?;
        log(format!("sweep {} over {} ({} trials/point)", spec.base.source.name(), spec.axis, spec.trials));
        out.push(run_sweep(spec, &models, threads)?);
    }
    Ok(out)
}

/// Whitespace table `snr lrt_n2 lrt_n3 embednet_n2 embednet_n3 ref_n2 ref_n3`.
pub fn throughput_table(results: &[SweepResult]) -> String {
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter()).collect();
    let mut snrs: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let cell = |m: Method, n: usize, s: f64| {
        rows.iter()
            .find(|r| r.method == m && r.n_tags == n && r.axis_value == s)
            .map(|r| format!("{:.3}", throughput(r.ber, Scheme::Ours.params())))
            .unwrap_or_else(|| "-".into())
    };
    let mut out = String::from("# snr_db lrt_n2 lrt_n3 embednet_n2 embednet_n3 reference_n2 reference_n3\n");
    for s in snrs {
        let r = |n| reference_throughput(n, s).map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{s} {} {} {} {} {} {}\n",
            cell(Method::LrtPerfectCsi, 2, s),
            cell(Method::LrtPerfectCsi, 3, s),
            cell(Method::EmbedNet, 2, s),
            cell(Method::EmbedNet, 3, s),
            r(2),
            r(3)
        ));
    }
    out
}
