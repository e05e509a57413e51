//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Learned models are trained once and cached under
//! `target/acceptance-models`. The process exits nonzero on a failed
//! criterion only when `AMBC_ACCEPTANCE_STRICT=1`.

use std::path::PathBuf;
use std::time::Instant;

use ambc_core::channel::{build_frame, draw_ambient, draw_channel, AmbientSource, ObsBlock, PilotSchedule};
use ambc_core::config::{SourceKind, SystemConfig};
use ambc_core::detectors::{energy_statistic, EnergyStats, GaussianLrtMode};
use ambc_core::rng::RngStream;
use ambc_harness::method::Method;
use ambc_harness::models::{cached_chanestnet, cached_embednet, training_config, Provenance, TrainingBudget};
use ambc_harness::profile::Profile;
use ambc_harness::sweep::{run_sweep, BerRow, ModelSet, SweepAxis, SweepResult, SweepSpec};
use ambc_harness::throughput::{throughput, Scheme};
use ambc_learned::chanestnet::{correlate_pilots, ChanEstNet};
use ambc_learned::embednet::EmbedNet;

const PROFILE: Profile = Profile::Calibrated;
const FRAMES: u64 = 10_000;
const SEED: u64 = 2024;

struct Report {
    primary_failures: Vec<String>,
    supplementary_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, primary: bool, text: String) {
        println!("{} [{id}] {text}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            if primary {
                self.primary_failures.push(id.to_string());
            } else {
                self.supplementary_failures += 1;
            }
        }
    }
}

fn cfg(n: usize, source: SourceKind, snr_db: f64) -> SystemConfig {
    let mut c = SystemConfig::reference(n, source).with_snr_db(snr_db);
    PROFILE.apply(&mut c);
    c
}

fn sweep(base: SystemConfig, axis: SweepAxis, values: Vec<f64>, methods: Vec<Method>, trials: u64, models: &ModelSet) -> SweepResult {
    let mut spec = SweepSpec::new(base, axis, values, methods, trials, SEED);
    spec.options = PROFILE.options();
    run_sweep(&spec, models, None).expect("sweep")
}

/// Binomial standard deviation of a BER estimate at true rate `p`.
fn sigma(p: f64, bits: u64) -> f64 {
    (p * (1.0 - p) / bits as f64).sqrt()
}

/// `|ber - target| <= max(3 sigma, 5% of target)`.
fn within(row: &BerRow, target: f64) -> (bool, f64) {
    let tol = (3.0 * sigma(target, row.bit_count)).max(0.05 * target);
    ((row.ber - target).abs() <= tol, tol)
}

fn point_checks(res: &SweepResult, method: Method, points: &[(f64, f64)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(x, target) in points {
        let row = res.get(method, x).expect("row");
        let (pass, tol) = within(row, target);
        ok &= pass;
        parts.push(format!("{x}: {:.5} vs {target} (tol {:.2e})", row.ber, tol));
    }
    (ok, parts.join("; "))
}

fn model_dir() -> PathBuf {
    let target = std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../target")));
    target.join("acceptance-models")
}

fn provenance(p: &Provenance) -> String {
    match p {
        Provenance::Cached(path) => format!("cached {}", path.file_name().unwrap().to_string_lossy()),
        Provenance::Trained { log, seconds } => format!(
            "trained in {seconds:.0} s, final loss {:.4}, validation {:.4}",
            log.epoch_loss.last().copied().unwrap_or(f64::NAN),
            log.validation_loss.last().copied().unwrap_or(f64::NAN)
        ),
    }
}

fn embednet_model(n: usize, source: SourceKind) -> EmbedNet {
    let (net, p) = cached_embednet(Some(&model_dir()), &training_config(&cfg(n, source, 0.0), n), &TrainingBudget::default()).expect("embednet");
    println!("     embednet N={n} {source}: {}", provenance(&p));
    net
}

fn chanestnet_model(n: usize, source: SourceKind) -> ChanEstNet {
    let (net, p) = cached_chanestnet(Some(&model_dir()), &training_config(&cfg(n, source, 0.0), n), &TrainingBudget::default()).expect("chanestnet");
    println!("     chanestnet N={n} {source}: {}", provenance(&p));
    net
}

fn c1(r: &mut Report) {
    let res = sweep(cfg(2, SourceKind::Gaussian, 0.0), SweepAxis::SnrDb, vec![0.0, 8.0, 16.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let (ok, text) = point_checks(&res, Method::LrtPerfectCsi, &[(0.0, 0.2761), (8.0, 0.0842), (16.0, 0.0026)]);
    r.line("1", ok, true, format!("LRT Gaussian N=2, {FRAMES} frames: {text}"));
}

fn c2(r: &mut Report) {
    let base = cfg(2, SourceKind::Qpsk, 0.0);
    let res = sweep(base.clone(), SweepAxis::SnrDb, vec![0.0, 12.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let (mut ok, mut text) = point_checks(&res, Method::LrtPerfectCsi, &[(0.0, 0.2763), (12.0, 0.0192)]);
    let high = sweep(base, SweepAxis::SnrDb, vec![20.0], vec![Method::LrtPerfectCsi], 4 * FRAMES, &ModelSet::default());
    let row = high.get(Method::LrtPerfectCsi, 20.0).unwrap();
    let (strict, tol) = within(row, 0.0002);
    let band = (0.0001..=0.0004).contains(&row.ber);
    ok &= strict || band;
    text += &format!(
        "; 20 ({} frames): {:.6} vs 0.0002 (tol {:.2e} {}, [0.5x, 2x] band {})",
        4 * FRAMES,
        row.ber,
        tol,
        if strict { "met" } else { "missed" },
        if band { "met" } else { "missed" }
    );
    r.line("2", ok, true, format!("LRT QPSK N=2: {text}"));
}

fn c3(r: &mut Report) {
    let snr: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let res = sweep(cfg(n, SourceKind::Gaussian, 0.0), SweepAxis::SnrDb, snr.clone(), vec![Method::EnergyDetector], 2000, &ModelSet::default());
        let bers: Vec<f64> = res.series(Method::EnergyDetector).iter().map(|r| r.ber).collect();
        let lo = bers.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = bers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ok &= lo >= 0.43 && hi <= 0.47;
        parts.push(format!("N={n} range [{lo:.4}, {hi:.4}]"));
    }
    r.line("3", ok, true, format!("ED Gaussian, SNR 0..20 dB step 2, 2000 frames/point: {} within [0.43, 0.47]", parts.join(", ")));
}

fn c4(r: &mut Report) {
    let mut rng = RngStream::new(SEED, 4);
    let symbols = 100_000;
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for draw in 0..20 {
        let snr = [0.0, 10.0, 20.0][draw % 3];
        let c = cfg(2, SourceKind::Gaussian, snr);
        let su = c.noise_var();
        let src = AmbientSource::for_config(&c);
        let ch = draw_channel(&c, &mut rng).unwrap();
        let stats = EnergyStats::new(&ch.effective, c.sigma_s_sq, su, c.str_samples);
        let j = draw % 4;
        let mut data = vec![Default::default(); c.n_antennas * c.str_samples];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..symbols {
            let s = draw_ambient(&src, &mut rng, c.str_samples).unwrap();
            for a in 0..c.n_antennas {
                for (k, sk) in s.iter().enumerate() {
                    data[a * c.str_samples + k] = ch.w(j)[a] * sk + rng.complex_gaussian(su);
                }
            }
            let e = energy_statistic(ObsBlock::new(&data, c.n_antennas, c.str_samples).unwrap());
            sum += e;
            sum_sq += e * e;
        }
        let n = symbols as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        worst_mean = worst_mean.max((mean / stats.delta[j] - 1.0).abs());
        worst_var = worst_var.max((var / stats.gamma_sq[j] - 1.0).abs());
    }
    r.line(
        "4",
        worst_mean <= 0.005 && worst_var <= 0.05,
        true,
        format!("energy moments over 20 channel draws x {symbols} symbols: worst mean error {:.3}% (<= 0.5%), worst variance error {:.2}% (<= 5%)", 100.0 * worst_mean, 100.0 * worst_var),
    );
}

fn c5(r: &mut Report) {
    let res = sweep(cfg(2, SourceKind::Qpsk, 0.0), SweepAxis::ZetaDb, vec![-20.0, -12.0, -4.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let (ok, text) = point_checks(&res, Method::LrtPerfectCsi, &[(-20.0, 0.2779), (-12.0, 0.0836), (-4.0, 0.0023)]);
    r.line("5", ok, true, format!("LRT zeta sweep, QPSK, SNR 0 dB: {text}"));
}

fn c6(r: &mut Report) {
    let res = sweep(cfg(2, SourceKind::Qpsk, 10.0), SweepAxis::KSamples, vec![20.0, 100.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let (ok, text) = point_checks(&res, Method::LrtPerfectCsi, &[(20.0, 0.0451), (100.0, 0.0012)]);
    r.line("6", ok, true, format!("LRT K sweep, QPSK, SNR 10 dB: {text}"));
}

fn c7_and_learned_examples(r: &mut Report) {
    let mut models = ModelSet::default();
    models.embednet.insert(2, embednet_model(2, SourceKind::Qpsk));
    models.chanestnet.insert(2, chanestnet_model(2, SourceKind::Qpsk));
    let all = vec![Method::LrtPerfectCsi, Method::EnergyDetector, Method::EmbedNet, Method::ChanEstNet];
    let res = sweep(cfg(2, SourceKind::Qpsk, 0.0), SweepAxis::SnrDb, vec![8.0, 12.0, 16.0, 20.0], all, FRAMES, &models);

    let at = |m, snr| res.get(m, snr).unwrap();
    let lrt = at(Method::LrtPerfectCsi, 12.0);
    let ed = at(Method::EnergyDetector, 12.0);
    let mut ok = true;
    let mut parts = vec![format!("LRT {:.4}, ED {:.4}", lrt.ber, ed.ber)];
    for m in [Method::EmbedNet, Method::ChanEstNet] {
        let row = at(m, 12.0);
        let in_band = (0.03..=0.07).contains(&row.ber);
        let below_ed = row.ber + 3.0 * (row.sigma().powi(2) + ed.sigma().powi(2)).sqrt() < ed.ber;
        let above_lrt = row.ber - 3.0 * (row.sigma().powi(2) + lrt.sigma().powi(2)).sqrt() > lrt.ber;
        ok &= in_band && below_ed && above_lrt;
        parts.push(format!(
            "{m} {:.4} (band {}, below ED {}, above LRT {})",
            row.ber,
            yes(in_band),
            yes(below_ed),
            yes(above_lrt)
        ));
    }
    r.line("7", ok, true, format!("learned detectors, QPSK N=2, SNR 12 dB, {FRAMES} frames: {}", parts.join(", ")));

    // Method ordering at every point from 8 dB.
    let mut ordered = true;
    let mut notes = Vec::new();
    for snr in [8.0, 12.0, 16.0, 20.0] {
        let (l, e, em, ce) = (at(Method::LrtPerfectCsi, snr), at(Method::EnergyDetector, snr), at(Method::EmbedNet, snr), at(Method::ChanEstNet, snr));
        let ok_here = l.ber <= ce.ber && em.ber <= e.ber + 3.0 * e.sigma();
        ordered &= ok_here;
        notes.push(format!("{snr}: LRT {:.4} ChanEstNet {:.4} EmbedNet {:.4} ED {:.4}", l.ber, ce.ber, em.ber, e.ber));
    }
    r.line("S1", ordered, false, format!("ordering LRT <= ChanEstNet and EmbedNet <= ED + 3 sigma, QPSK N=2: {}", notes.join("; ")));

    let e20 = at(Method::EmbedNet, 20.0);
    r.line("S2", e20.ber <= 0.0012, false, format!("EmbedNet QPSK N=2 at 20 dB: {:.5} <= 0.0012", e20.ber));

    hhat_vs_correlation(r, &models.chanestnet[&2]);
    runtime_ordering(r, &models);

    let untrained = ModelSet {
        embednet: [(2, EmbedNet::new(4, 99))].into(),
        ..ModelSet::default()
    };
    let res = sweep(cfg(2, SourceKind::Qpsk, 20.0), SweepAxis::SnrDb, vec![20.0], vec![Method::EmbedNet], 1000, &untrained);
    let u = res.get(Method::EmbedNet, 20.0).unwrap();
    r.line(
        "S3",
        u.ber + 3.0 * u.sigma() >= 0.25,
        false,
        format!("untrained EmbedNet, QPSK N=2 at 20 dB, 1000 frames: {:.4}, expected >= 0.25", u.ber),
    );

    let mut n3 = ModelSet::default();
    n3.embednet.insert(3, embednet_model(3, SourceKind::Qpsk));
    let res = sweep(cfg(3, SourceKind::Qpsk, 12.0), SweepAxis::SnrDb, vec![12.0], vec![Method::EmbedNet], FRAMES, &n3);
    let b = res.get(Method::EmbedNet, 12.0).unwrap().ber;
    r.line("S4", (0.04..=0.09).contains(&b), false, format!("EmbedNet QPSK N=3 at 12 dB: {b:.4} within [0.04, 0.09]"));

    let mut g = ModelSet::default();
    g.chanestnet.insert(2, chanestnet_model(2, SourceKind::Gaussian));
    let res = sweep(cfg(2, SourceKind::Gaussian, 16.0), SweepAxis::SnrDb, vec![16.0], vec![Method::ChanEstNet], FRAMES, &g);
    let b = res.get(Method::ChanEstNet, 16.0).unwrap().ber;
    r.line("S5", (0.008..=0.03).contains(&b), false, format!("ChanEstNet Gaussian N=2 at 16 dB: {b:.4} within [0.008, 0.03]"));
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn hhat_vs_correlation(r: &mut Report, net: &ChanEstNet) {
    let c = cfg(2, SourceKind::Qpsk, 20.0);
    let sched = PilotSchedule::one_hot(2, c.n_pilots).unwrap();
    let (mut net_err, mut corr_err, mut count) = (0.0, 0.0, 0usize);
    for f in 0..2000u64 {
        let mut rng = RngStream::derived(SEED, &[7, f]);
        let ch = draw_channel(&c, &mut rng).unwrap();
        let frame = build_frame(&c, &ch, &sched, &mut rng).unwrap();
        let feat = correlate_pilots(&frame).unwrap();
        let est = net.estimate(&feat).unwrap();
        for a in 0..c.n_antennas {
            let h = ch.h()[a];
            net_err += (est.h_hat()[a] - h).norm_sqr();
            corr_err += (feat.row(0)[a] - h).norm_sqr();
            count += 2;
        }
    }
    let (ne, ce) = (net_err / count as f64, corr_err / count as f64);
    r.line("S6", ne <= ce, false, format!("ChanEstNet direct-channel MSE at 20 dB {ne:.3e} <= correlation row-0 MSE {ce:.3e}"));
}

fn runtime_ordering(r: &mut Report, models: &ModelSet) {
    let all = vec![Method::LrtPerfectCsi, Method::EnergyDetector, Method::EmbedNet, Method::ChanEstNet];
    let res = sweep(cfg(2, SourceKind::Gaussian, 10.0), SweepAxis::SnrDb, vec![10.0], all, 500, models);
    let t = |m| res.get(m, 10.0).unwrap().detector_seconds / 500.0 * 1e3;
    let (ed, ce, em, lrt) = (t(Method::EnergyDetector), t(Method::ChanEstNet), t(Method::EmbedNet), t(Method::LrtPerfectCsi));

    // The covariance form is the Gaussian-source LRT proper.
    let mut spec = SweepSpec::new(cfg(2, SourceKind::Gaussian, 10.0), SweepAxis::SnrDb, vec![10.0], vec![Method::LrtPerfectCsi], 500, SEED);
    spec.options = PROFILE.options();
    spec.options.gaussian_lrt = GaussianLrtMode::Covariance;
    let cov = run_sweep(&spec, models, None).expect("sweep");
    let lrt_cov = cov.get(Method::LrtPerfectCsi, 10.0).unwrap().detector_seconds / 500.0 * 1e3;

    let slowest = lrt.min(lrt_cov);
    r.line(
        "S7",
        ed < ce && ce < em && em < slowest,
        false,
        format!(
            "per-frame runtime ED < ChanEstNet < EmbedNet < LRT, Gaussian N=2: ED {ed:.3} ms, ChanEstNet {ce:.3} ms, EmbedNet {em:.3} ms, LRT known-symbols {lrt:.3} ms, LRT covariance {lrt_cov:.3} ms"
        ),
    );
}

fn c9(r: &mut Report) {
    let res = sweep(cfg(2, SourceKind::Qpsk, 0.0), SweepAxis::SnrDb, vec![0.0, 5.0, 10.0, 15.0, 20.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let p = Scheme::Lrt.params();
    let t = |snr| throughput(res.get(Method::LrtPerfectCsi, snr).unwrap().ber, p);
    let mut ok = true;
    let mut parts = Vec::new();
    for (snr, target) in [(0.0, 0.670), (10.0, 0.796), (20.0, 0.800)] {
        let v = t(snr);
        ok &= (v - target).abs() <= 0.01;
        parts.push(format!("{snr}: {v:.3} vs {target}"));
    }
    let ceilings = throughput(0.0, Scheme::Ours.params()) == 0.8 && throughput(0.0, Scheme::Reference.params()) == 0.5;
    ok &= ceilings;
    r.line("9", ok, true, format!("throughput LRT N=2 within 0.01: {}; ceilings 0.8/0.5 {}", parts.join(", "), if ceilings { "exact" } else { "wrong" }));
    r.line(
        "S8",
        true,
        false,
        format!("throughput LRT N=2 at 0/5/10/15/20 dB for comparison with the table columns: {:.3} {:.3} {:.3} {:.3} {:.3}", t(0.0), t(5.0), t(10.0), t(15.0), t(20.0)),
    );
}

fn c10(r: &mut Report) {
    let res = sweep(cfg(2, SourceKind::Qpsk, 10.0), SweepAxis::NTags, vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![Method::LrtPerfectCsi], FRAMES, &ModelSet::default());
    let series = res.series(Method::LrtPerfectCsi);
    let mono = series.windows(2).all(|w| w[1].ber >= w[0].ber);
    let (ends, text) = point_checks(&res, Method::LrtPerfectCsi, &[(1.0, 0.0414), (5.0, 0.0621)]);
    let all: Vec<String> = series.iter().map(|r| format!("{:.4}", r.ber)).collect();
    r.line("10", mono && ends, true, format!("LRT N sweep, QPSK, SNR 10 dB: [{}] nondecreasing {}; {text}", all.join(", "), yes(mono)));
}

fn literal_profile_info() {
    let mut c = SystemConfig::reference(2, SourceKind::Qpsk);
    Profile::Literal.apply(&mut c);
    let mut spec = SweepSpec::new(c, SweepAxis::SnrDb, vec![0.0, 12.0, 20.0], vec![Method::LrtPerfectCsi, Method::EnergyDetector], 2000, SEED);
    spec.options = Profile::Literal.options();
    let res = run_sweep(&spec, &ModelSet::default(), None).unwrap();
    let s = |m| res.series(m).iter().map(|r| format!("{:.4}", r.ber)).collect::<Vec<_>>().join("/");
    println!(
        "INFO {}: QPSK N=2 at 0/12/20 dB, 2000 frames: LRT {}, ED {}",
        Profile::Literal.describe(),
        s(Method::LrtPerfectCsi),
        s(Method::EnergyDetector)
    );
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    println!("acceptance: {}", PROFILE.describe());
    let mut r = Report {
        primary_failures: Vec::new(),
        supplementary_failures: 0,
    };
    c1(&mut r);
    c2(&mut r);
    c3(&mut r);
    c4(&mut r);
    c5(&mut r);
    c6(&mut r);
    c7_and_learned_examples(&mut r);
    let suite = ambc_property_suite();
    r.line("8", suite.0, true, suite.1);
    c9(&mut r);
    c10(&mut r);
    literal_profile_info();
    println!(
        "acceptance: {} of 10 criteria passed{}; {} supplementary check(s) failed; {:.0} s",
        10 - r.primary_failures.len(),
        if r.primary_failures.is_empty() { String::new() } else { format!(" (failed: {})", r.primary_failures.join(", ")) },
        r.supplementary_failures,
        start.elapsed().as_secs_f64()
    );
    if std::env::var("AMBC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") && !r.primary_failures.is_empty() {
        std::process::exit(1);
    }
}

/// Compact rerun of the property checks, one entry per family; the full
/// suites live in each crate's tests.
fn ambc_property_suite() -> (bool, String) {
    let checks: [(&str, fn() -> bool); 8] = [
        ("layer gradients", props::layer_gradients),
        ("covariance Hermitian PSD", props::covariance_hermitian_psd),
        ("prototype and LRT oracles", props::oracles),
        ("plug-in consistency", props::plug_in_consistency),
        ("Chernoff >= union", props::chernoff_dominates),
        ("argmax scale invariance", props::argmax_scale_invariance),
        ("checkpoint round trip", props::checkpoint_round_trip),
        ("sweep determinism across threads", props::sweep_thread_determinism),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, f)| !f()).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        (true, format!("property suite: {} families hold ({})", checks.len(), checks.map(|c| c.0).join(", ")))
    } else {
        (false, format!("property suite: failed {}", failed.join(", ")))
    }
}

mod props {
    use super::*;
    use ambc_core::detectors::{argmax_lowest, pep_chernoff_bound, pep_union_bound, GaussianLrtMode, LrtDetector, PepBoundParams};
    use ambc_harness::report::csv_string;
    use ambc_learned::chanestnet::{self, ChannelEstimate};
    use ambc_learned::embednet::{classify, form_prototypes};
    use ambc_learned::features::covariance_feature;
    use ambc_nn::gradcheck::{check_input, check_parameters, Coverage};
    use ambc_nn::layers::{AdaptiveAvgPool2d, BatchNorm2d, Conv2d, Flatten, Layer, Linear, Relu};
    use ambc_nn::{Mode, Sequential, Tensor};

    fn tensor(shape: &[usize], rng: &mut RngStream) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()).unwrap()
    }

    pub fn layer_gradients() -> bool {
        let mut rng = RngStream::new(SEED, 80);
        let nets: Vec<(Sequential<f64>, Vec<usize>)> = vec![
            (Sequential::new().push("conv", Layer::Conv2d(Conv2d::new(2, 3, rng.raw()))), vec![2, 2, 4, 3]),
            (Sequential::new().push("bn", Layer::BatchNorm2d(BatchNorm2d::new(3))), vec![4, 3, 2, 3]),
            (Sequential::new().push("relu", Layer::Relu(Relu::new())), vec![3, 5]),
            (Sequential::new().push("pool", Layer::AdaptiveAvgPool2d(AdaptiveAvgPool2d::new(4, 4))), vec![2, 2, 3, 5]),
            (Sequential::new().push("flatten", Layer::Flatten(Flatten::new())).push("fc", Layer::Linear(Linear::new(12, 4, rng.raw()))), vec![2, 3, 2, 2]),
        ];
        nets.iter().all(|(net, shape)| {
            let x = tensor(shape, &mut rng);
            [Mode::Train, Mode::Eval].into_iter().all(|mode| {
                let params = check_parameters(net, &x, mode, 1e-3, Coverage::All).unwrap();
                let input = check_input(net, &x, mode, 1e-3).unwrap();
                input.rel_error < 1e-3 && params.iter().all(|r| r.rel_error < 1e-3)
            })
        })
    }

    fn frame(c: &SystemConfig, seed: u64, one_hot: bool) -> (ambc_core::channel::ChannelRealization, ambc_core::channel::Frame) {
        let mut rng = RngStream::derived(SEED, &[81, seed]);
        let ch = draw_channel(c, &mut rng).unwrap();
        let sched = if one_hot {
            PilotSchedule::one_hot(c.n_tags, c.n_pilots).unwrap()
        } else {
            PilotSchedule::class_balanced(c.n_tags, c.n_pilots, &mut rng).unwrap()
        };
        let f = build_frame(c, &ch, &sched, &mut rng).unwrap();
        (ch, f)
    }

    pub fn covariance_hermitian_psd() -> bool {
        let c = cfg(2, SourceKind::Qpsk, 10.0);
        (0..20).all(|s| {
            let (_, f) = frame(&c, s, false);
            let t = f.data_range().start;
            let r = covariance_feature(f.obs_block(t));
            let m = r.n_antennas();
            let hermitian = (0..m).all(|a| (0..m).all(|b| (r.get(a, b) - r.get(b, a).conj()).norm() < 1e-12));
            // Quadratic form z^H R z for random z.
            let mut rng = RngStream::new(s, 82);
            let psd = (0..10).all(|_| {
                let z: Vec<_> = (0..m).map(|_| rng.complex_gaussian(1.0)).collect();
                let q: f64 = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| (z[a].conj() * r.get(a, b) * z[b]).re).sum();
                q >= -1e-12
            });
            hermitian && psd
        })
    }

    pub fn oracles() -> bool {
        let mut rng = RngStream::new(SEED, 83);
        // Prototypes are class means; classify is the nearest one.
        let (n, dim, classes) = (32, 8, 4);
        let emb: Vec<f64> = (0..n * dim).map(|_| rng.standard_normal()).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let protos = form_prototypes(&emb, dim, &labels, classes).unwrap();
        let means_ok = (0..classes).all(|c| {
            (0..dim).all(|d| {
                let vals: Vec<f64> = (0..n).filter(|&i| labels[i] == c).map(|i| emb[i * dim + d]).collect();
                (protos.prototype(c)[d] - vals.iter().sum::<f64>() / vals.len() as f64).abs() < 1e-12
            })
        });
        let nearest_ok = (0..50).all(|_| {
            let q: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            let d: Vec<f64> = (0..classes).map(|c| (0..dim).map(|k| (q[k] - protos.prototype(c)[k]).powi(2)).sum()).collect();
            classify(&q, &protos) == argmax_lowest(&d.iter().map(|x| -x).collect::<Vec<_>>())
        });
        // Known-symbol LRT is the minimum-residual hypothesis.
        let lrt_ok = (1..=3).all(|nt| {
            let c = cfg(nt, SourceKind::Qpsk, 5.0);
            (0..20).all(|s| {
                let (ch, f) = frame(&c, 100 + s, true);
                let det = LrtDetector::new(ch.effective.clone(), c.source, GaussianLrtMode::KnownSymbols, c.sigma_s_sq, c.noise_var()).unwrap();
                f.data_range().all(|t| {
                    let obs = f.obs_block(t);
                    let amb = f.ambient_row(t);
                    let resid: Vec<f64> = (0..1 << nt)
                        .map(|j| {
                            (0..c.str_samples)
                                .map(|k| (0..c.n_antennas).map(|a| (obs.get(a, k) - ch.w(j)[a] * amb[k]).norm_sqr()).sum::<f64>())
                                .sum()
                        })
                        .collect();
                    let neg: Vec<f64> = resid.iter().map(|x| -x).collect();
                    det.detect(obs, amb).unwrap().chosen.index() == argmax_lowest(&neg)
                })
            })
        });
        means_ok && nearest_ok && lrt_ok
    }

    pub fn plug_in_consistency() -> bool {
        [SourceKind::Gaussian, SourceKind::Qpsk, SourceKind::Qam16].into_iter().all(|src| {
            (1..=3).all(|nt| {
                let c = cfg(nt, src, 8.0);
                (0..5).all(|s| {
                    let (ch, f) = frame(&c, 200 + s, true);
                    let est = ChannelEstimate { channels: ch.effective.clone() };
                    [GaussianLrtMode::Covariance, GaussianLrtMode::KnownSymbols].into_iter().all(|mode| {
                        let det = LrtDetector::new(ch.effective.clone(), c.source, mode, c.sigma_s_sq, c.noise_var()).unwrap();
                        let direct: Vec<usize> = f.data_range().map(|t| det.detect(f.obs_block(t), f.ambient_row(t)).unwrap().chosen.index()).collect();
                        chanestnet::detect_frame_lrt(&f, &est, &c, mode).unwrap() == direct
                    })
                })
            })
        })
    }

    pub fn chernoff_dominates() -> bool {
        let mut rng = RngStream::new(SEED, 84);
        (0..1000).all(|_| {
            let mut c = cfg(1 + rng.index(5), SourceKind::Qpsk, 40.0 * rng.uniform() - 10.0);
            c.str_samples = 1 + rng.index(100);
            let p = PepBoundParams::from_config(&c, rng.uniform());
            pep_chernoff_bound(&p) >= pep_union_bound(&p)
        })
    }

    pub fn argmax_scale_invariance() -> bool {
        let mut rng = RngStream::new(SEED, 85);
        (0..1000).all(|_| {
            let v: Vec<f64> = (0..1 + rng.index(32)).map(|_| rng.standard_normal()).collect();
            let a = 0.01 + 100.0 * rng.uniform();
            let b = 10.0 * rng.standard_normal();
            let scaled: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            argmax_lowest(&v) == argmax_lowest(&scaled)
        })
    }

    pub fn checkpoint_round_trip() -> bool {
        let dir = std::env::temp_dir().join(format!("ambc-acceptance-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let net = EmbedNet::new(4, 5);
        let path = dir.join("e.ckpt");
        net.save(&path, Default::default()).unwrap();
        let (back, _) = EmbedNet::load(&path).unwrap();
        let c = cfg(2, SourceKind::Qpsk, 10.0);
        let (_, f) = frame(&c, 300, false);
        let x = ambc_learned::embednet::frame_inputs(&f, 0..f.frame_len());
        let same_out = net.embed(&x).unwrap().data() == back.embed(&x).unwrap().data();
        let chan = ChanEstNet::new(2, 4, Default::default(), 6);
        let cpath = dir.join("c.ckpt");
        chan.save(&cpath, Default::default()).unwrap();
        let (cback, _) = ChanEstNet::load(&cpath).unwrap();
        let ok = same_out
            && back.network().parameter_hash() == net.network().parameter_hash()
            && cback.network().parameter_hash() == chan.network().parameter_hash();
        let _ = std::fs::remove_dir_all(&dir);
        ok
    }

    pub fn sweep_thread_determinism() -> bool {
        let mut base = cfg(2, SourceKind::Qpsk, 0.0);
        base.frame_len = 64;
        let mut models = ModelSet::default();
        models.embednet.insert(2, EmbedNet::new(4, 7));
        models.chanestnet.insert(2, ChanEstNet::new(2, 4, Default::default(), 8));
        let methods = vec![Method::LrtPerfectCsi, Method::EnergyDetector, Method::EmbedNet, Method::ChanEstNet];
        let spec = SweepSpec::new(base, SweepAxis::SnrDb, vec![0.0, 10.0], methods, 24, SEED);
        let runs: Vec<String> = [1, 2, 4].into_iter().map(|t| csv_string(&run_sweep(&spec, &models, Some(t)).unwrap().rows)).collect();
        runs.windows(2).all(|w| w[0] == w[1])
    }
}
