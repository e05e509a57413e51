use ambc_core::channel::{build_frame, draw_channel, ObsBlock, PilotSchedule};
use ambc_core::config::{ForwardFading, SourceKind, SystemConfig};
use ambc_core::rng::RngStream;
use ambc_core::C64;
use ambc_learned::embednet::*;
use ambc_learned::features::covariance_feature;
use ambc_learned::{decisions_to_bits, LearnedError};
use ambc_nn::gradcheck::{check_direction, check_parameters, Coverage};
use ambc_nn::{Mode, Tensor};
use proptest::prelude::*;

fn qpsk_cfg(n: usize, snr: f64) -> SystemConfig {
    let mut cfg = SystemConfig::reference(n, SourceKind::Qpsk).with_snr_db(snr);
    cfg.forward_fading = ForwardFading::PhaseOnly;
    cfg
}

fn class_balanced_frame(cfg: &SystemConfig, seed: u64) -> ambc_core::channel::Frame {
    let mut rng = RngStream::new(seed, 0);
    let ch = draw_channel(cfg, &mut rng).unwrap();
    let sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots, &mut rng).unwrap();
    build_frame(cfg, &ch, &sched, &mut rng).unwrap()
}

fn random_obs(m: usize, k: usize, seed: u64) -> Vec<C64> {
    RngStream::new(seed, 1).sample_circular_gaussian(m * k, 1.0).unwrap()
}

fn random_embeddings(rows: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 2);
    (0..rows * dim).map(|_| rng.standard_normal()).collect()
}

#[test]
fn parameter_count_follows_layer_arithmetic() {
    let net = EmbedNet::new(4, 1);
    let conv1 = 2 * 32 * 9 + 2 * 32;
    let conv2 = 32 * 64 * 9 + 2 * 64;
    let fc = 1024 * 64 + 64;
    assert_eq!(net.network().param_count(), conv1 + conv2 + fc);
    assert_eq!(net.network().param_count(), 84_800);
}

#[test]
fn covariance_of_zeros_is_zero() {
    let obs = vec![C64::new(0.0, 0.0); 4 * 20];
    let f = covariance_feature(ObsBlock::new(&obs, 4, 20).unwrap());
    assert!(f.r.iter().all(|z| z.norm() == 0.0));
    assert!(f.to_input().iter().all(|&v| v == 0.0));
}

#[test]
fn single_sample_covariance_is_outer_product() {
    let x = random_obs(4, 1, 3);
    let f = covariance_feature(ObsBlock::new(&x, 4, 1).unwrap());
    let mut trace = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            assert!((f.get(a, b) - x[a] * x[b].conj()).norm() < 1e-12);
        }
        trace += f.get(a, a).re;
    }
    let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    assert!((trace - norm).abs() < 1e-12);
    // Rank one: every 2x2 minor vanishes.
    for (a, b) in [(0, 1), (1, 2), (0, 3)] {
        let minor = f.get(a, a) * f.get(b, b) - f.get(a, b) * f.get(b, a);
        assert!(minor.norm() < 1e-12);
    }
}

#[test]
fn covariance_is_hermitian_psd_with_trace_identity() {
    for seed in 0..20 {
        let (m, k) = (1 + seed as usize % 6, 1 + 3 * seed as usize);
        let x = random_obs(m, k, seed);
        let obs = ObsBlock::new(&x, m, k).unwrap();
        let f = covariance_feature(obs);
        let u = f.to_input();
        for a in 0..m {
            for b in 0..m {
                assert!((f.get(a, b) - f.get(b, a).conj()).norm() < 1e-12);
                assert_eq!(u[a * m + b], u[b * m + a]);
                assert_eq!(u[m * m + a * m + b], -u[m * m + b * m + a]);
            }
        }
        let direct: f64 = (0..k).map(|kk| obs.sample(kk).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>() / k as f64;
        let trace: f64 = (0..m).map(|a| f.get(a, a).re).sum();
        assert!((trace - direct).abs() < 1e-10);
        let mut rng = RngStream::new(seed, 9);
        for _ in 0..50 {
            let y = rng.sample_circular_gaussian(m, 1.0).unwrap();
            let q: C64 = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| y[a].conj() * f.get(a, b) * y[b]).sum();
            assert!(q.re >= -1e-12 && q.im.abs() < 1e-10);
        }
    }
}

#[test]
fn covariance_is_invariant_to_global_phase() {
    let x = random_obs(4, 20, 5);
    let rot = C64::from_polar(1.0, 0.731);
    let y: Vec<C64> = x.iter().map(|z| z * rot).collect();
    let a = covariance_feature(ObsBlock::new(&x, 4, 20).unwrap());
    let b = covariance_feature(ObsBlock::new(&y, 4, 20).unwrap());
    for (p, q) in a.r.iter().zip(&b.r) {
        assert!((p - q).norm() < 1e-12);
    }
}

#[test]
fn one_pilot_per_class_gives_that_embedding() {
    let z = random_embeddings(4, 8, 1);
    let p = form_prototypes(&z, 8, &[2, 0, 3, 1], 4).unwrap();
    for (row, class) in [2, 0, 3, 1].into_iter().enumerate() {
        assert_eq!(p.prototype(class), &z[row * 8..(row + 1) * 8]);
    }
    assert_eq!(p.counts, vec![1; 4]);
}

#[test]
fn identical_pilots_give_the_same_prototype() {
    let base = random_embeddings(2, 8, 2);
    let z: Vec<f64> = [0, 0, 1, 1].iter().flat_map(|&r| base[r * 8..(r + 1) * 8].to_vec()).collect();
    let p = form_prototypes(&z, 8, &[0, 0, 1, 1], 2).unwrap();
    for c in 0..2 {
        for (a, b) in p.prototype(c).iter().zip(&base[c * 8..(c + 1) * 8]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn prototypes_match_reference_mean() {
    let labels: Vec<usize> = (0..32).map(|t| (t * 7) % 4).collect();
    let z32: Vec<f32> = random_embeddings(32, 64, 3).iter().map(|&v| v as f32).collect();
    let p = form_prototypes(&z32, 64, &labels, 4).unwrap();
    for c in 0..4 {
        for d in 0..64 {
            let mut sum = 0.0f64;
            let mut cnt = 0;
            for t in 0..32 {
                if labels[t] == c {
                    sum += z32[t * 64 + d] as f64;
                    cnt += 1;
                }
            }
            assert!((p.prototype(c)[d] as f64 - sum / cnt as f64).abs() < 1e-6);
        }
    }
}

#[test]
fn uncovered_class_is_named() {
    let z = random_embeddings(4, 3, 4);
    let err = form_prototypes(&z, 3, &[0, 1, 3, 3], 4).unwrap_err();
    assert!(matches!(err, LearnedError::UncoveredClass { class: 2 }));
    assert!(err.to_string().contains('2'));
}

#[test]
fn query_at_a_prototype_selects_it() {
    let z = random_embeddings(8, 16, 5);
    let p = form_prototypes(&z, 16, &[0, 1, 2, 3, 4, 5, 6, 7], 8).unwrap();
    assert_eq!(classify(p.prototype(3), &p), 3);
}

#[test]
fn ties_go_to_the_lowest_class() {
    let z = vec![1.0, 0.0, -1.0, 0.0, 0.0, 5.0];
    let p = form_prototypes(&z, 2, &[0, 1, 2], 3).unwrap();
    assert_eq!(classify(&[0.0, 0.0], &p), 0);
}

#[test]
fn classify_agrees_with_naive_loop() {
    let mut rng = RngStream::new(11, 0);
    for case in 0..1000 {
        let n = 1 + case % 5;
        let classes = 1 << n;
        let dim = 1 + rng.index(16);
        let z: Vec<f64> = (0..classes * dim).map(|_| rng.standard_normal()).collect();
        let labels: Vec<usize> = (0..classes).collect();
        let p = form_prototypes(&z, dim, &labels, classes).unwrap();
        let q: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let mut best = (f64::INFINITY, 0);
        for j in 0..classes {
            let mut d = 0.0;
            for i in 0..dim {
                d += (q[i] - z[j * dim + i]).powi(2);
            }
            if d < best.0 {
                best = (d, j);
            }
        }
        assert_eq!(classify(&q, &p), best.1, "case {case}");
    }
}

proptest! {
    #[test]
    fn classification_is_translation_invariant(seed in 0u64..1000, shift in prop::collection::vec(-50i32..50, 8)) {
        let z = random_embeddings(4, 8, seed);
        let q = random_embeddings(1, 8, seed + 7);
        let shift: Vec<f64> = shift.iter().map(|&s| s as f64 * 0.25).collect();
        let p = form_prototypes(&z, 8, &[0, 1, 2, 3], 4).unwrap();
        let zs: Vec<f64> = z.iter().enumerate().map(|(i, v)| v + shift[i % 8]).collect();
        let qs: Vec<f64> = q.iter().enumerate().map(|(i, v)| v + shift[i % 8]).collect();
        let ps = form_prototypes(&zs, 8, &[0, 1, 2, 3], 4).unwrap();
        prop_assert_eq!(classify(&q, &p), classify(&qs, &ps));
    }
}

#[test]
fn episode_loss_matches_cross_entropy_definition() {
    let (dim, classes, support) = (5, 4, 8);
    let labels: Vec<usize> = (0..20).map(|t| t % classes).collect();
    let z = random_embeddings(20, dim, 6);
    let (loss, _) = episode_loss(&z, dim, &labels, support, classes).unwrap();
    let p = form_prototypes(&z[..support * dim], dim, &labels[..support], classes).unwrap();
    let mut expect = 0.0;
    for q in support..20 {
        let d = p.distances(&z[q * dim..(q + 1) * dim]);
        let lse = d.iter().map(|v| (-v).exp()).sum::<f64>().ln();
        expect += d[labels[q]] + lse;
    }
    expect /= 12.0;
    assert!((loss - expect).abs() < 1e-12);
    assert!(loss >= 0.0);
}

#[test]
fn episode_loss_gradient_matches_finite_differences() {
    let (dim, classes, support) = (6, 4, 8);
    let labels: Vec<usize> = (0..16).map(|t| (t * 3) % classes).collect();
    let z: Vec<f64> = random_embeddings(16, dim, 7).iter().map(|v| v * 0.5).collect();
    let (_, grad) = episode_loss(&z, dim, &labels, support, classes).unwrap();
    let h = 1e-6;
    for i in 0..z.len() {
        let mut zp = z.clone();
        zp[i] += h;
        let mut zm = z.clone();
        zm[i] -= h;
        let num = (episode_loss(&zp, dim, &labels, support, classes).unwrap().0
            - episode_loss(&zm, dim, &labels, support, classes).unwrap().0)
            / (2.0 * h);
        assert!((num - grad[i]).abs() < 1e-7 * (1.0 + num.abs()), "entry {i}: {num} vs {}", grad[i]);
    }
}

#[test]
fn full_network_gradients_match_finite_differences() {
    let cfg = qpsk_cfg(2, 10.0);
    let frame = class_balanced_frame(&cfg, 3);
    let x = frame_inputs(&frame, 0..6).cast::<f64>();
    let net = EmbedNet::new(4, 2).network().cast::<f64>();
    for mode in [Mode::Train, Mode::Eval] {
        // A joint step through all parameters shifts many ReLU inputs at
        // once; the small step keeps them clear of the kink.
        let r = check_direction(&net, &x, mode, 1e-7, 4).unwrap();
        assert!(r.rel_error < 1e-3, "{mode:?}: {r:?}");
        let reports = check_parameters(&net, &x, mode, 1e-6, Coverage::Sample { per_tensor: 12, seed: 5 }).unwrap();
        for r in reports {
            assert!(r.rel_error < 1e-3, "{mode:?}: {r:?}");
        }
    }
}

#[test]
fn embeddings_are_deterministic_and_batch_independent() {
    let cfg = qpsk_cfg(2, 10.0);
    let frame = class_balanced_frame(&cfg, 4);
    let net = EmbedNet::new(4, 3);
    let all = net.embed(&frame_inputs(&frame, 0..10)).unwrap();
    let again = net.embed(&frame_inputs(&frame, 0..10)).unwrap();
    assert_eq!(all.data(), again.data());
    let one = net.embed(&frame_inputs(&frame, 4..5)).unwrap();
    assert_eq!(one.data(), &all.data()[4 * EMBED_DIM..5 * EMBED_DIM]);
    assert_eq!(all.shape(), &[10, EMBED_DIM]);
}

#[test]
fn detection_shape_and_network_immutability() {
    for n in 1..=3 {
        let cfg = qpsk_cfg(n, 12.0);
        let frame = class_balanced_frame(&cfg, n as u64);
        let net = EmbedNet::new(4, 5);
        let before = net.network().parameter_hash();
        let d = detect_frame(&frame, &net).unwrap();
        assert_eq!(net.network().parameter_hash(), before);
        let bits = decisions_to_bits(&d, n).unwrap();
        assert_eq!((bits.rows, bits.cols), (cfg.frame_len - cfg.n_pilots, n));
    }
}

#[test]
fn noiseless_frames_are_decoded_without_errors() {
    let cfg = qpsk_cfg(2, f64::INFINITY);
    let net = EmbedNet::new(4, 6);
    for seed in 0..5 {
        let frame = class_balanced_frame(&cfg, seed);
        let d = detect_frame(&frame, &net).unwrap();
        let errors: u32 = d.iter().zip(&frame.labels[frame.pilot_len..]).map(|(a, b)| (a ^ b).count_ones()).sum();
        assert_eq!(errors, 0, "seed {seed}");
    }
}

#[test]
fn antenna_mismatch_is_rejected() {
    let cfg = qpsk_cfg(2, 10.0);
    let frame = class_balanced_frame(&cfg, 1);
    assert!(detect_frame(&frame, &EmbedNet::new(3, 1)).is_err());
}

#[test]
fn training_loss_decreases_over_epochs() {
    let cfg = qpsk_cfg(2, 20.0);
    let mut net = EmbedNet::new(4, 9);
    let opts = EpisodicTraining {
        episodes: 200,
        epochs: 10,
        learning_rate: 1e-3,
        seed: 12,
        validation_episodes: 20,
    };
    let log = train_episodic(&cfg, &opts, &mut net).unwrap();
    assert_eq!(log.epoch_loss.len(), 10);
    assert_eq!(log.validation_loss.len(), 10);
    assert_eq!(log.steps, 2000);
    assert!(log.epoch_loss[9] < log.epoch_loss[0], "{:?}", log.epoch_loss);
    assert!(log.epoch_loss.iter().all(|l| l.is_finite()));
}

#[test]
fn training_is_deterministic() {
    let cfg = qpsk_cfg(2, 20.0);
    let opts = EpisodicTraining {
        episodes: 5,
        epochs: 1,
        learning_rate: 1e-3,
        seed: 2,
        validation_episodes: 0,
    };
    let mut a = EmbedNet::new(4, 1);
    let mut b = EmbedNet::new(4, 1);
    let la = train_episodic(&cfg, &opts, &mut a).unwrap();
    let lb = train_episodic(&cfg, &opts, &mut b).unwrap();
    assert_eq!(la, lb);
    assert_eq!(a.network().parameter_hash(), b.network().parameter_hash());
}

#[test]
fn checkpoint_round_trip_preserves_embeddings() {
    let cfg = qpsk_cfg(2, 20.0);
    let mut net = EmbedNet::new(4, 2);
    let opts = EpisodicTraining {
        episodes: 3,
        epochs: 1,
        learning_rate: 1e-3,
        seed: 2,
        validation_episodes: 0,
    };
    train_episodic(&cfg, &opts, &mut net).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("embed.ckpt");
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("train_snr_db".to_string(), "20".to_string());
    net.save(&path, extra).unwrap();
    let (back, ckpt) = EmbedNet::load(&path).unwrap();
    assert_eq!(ckpt.meta("arch"), Some("embednet"));
    assert_eq!(ckpt.meta("train_snr_db"), Some("20"));
    assert_eq!(back.network().parameter_hash(), net.network().parameter_hash());
    let frame = class_balanced_frame(&cfg, 3);
    let x = frame_inputs(&frame, 0..8);
    assert_eq!(back.embed(&x).unwrap().data(), net.embed(&x).unwrap().data());
}

#[test]
fn foreign_checkpoint_is_rejected() {
    let net = ambc_learned::chanestnet::ChanEstNet::new(2, 4, Default::default(), 1);
    let ckpt = net.to_checkpoint(Default::default());
    assert!(matches!(EmbedNet::from_checkpoint(&ckpt), Err(LearnedError::Architecture(_))));
}

#[test]
fn inputs_have_network_layout() {
    let cfg = qpsk_cfg(2, 10.0);
    let frame = class_balanced_frame(&cfg, 5);
    let x: Tensor<f32> = frame_inputs(&frame, 3..5);
    assert_eq!(x.shape(), &[2, 2, 4, 4]);
    let f = covariance_feature(frame.obs_block(4));
    assert_eq!(&x.data()[32..], &f.to_input()[..]);
}
