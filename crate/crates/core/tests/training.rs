use plumeseg_core::dataset::{sample_crops, CropConfig, Sample, SynthConfig};
use plumeseg_core::dataset::{generate_synthetic, normalize, NormStats};
use plumeseg_core::mask::BitMask;
use plumeseg_core::nn::{lr_at_epoch, LossKind, ModelState, Tensor, TrainHyper, UNet, UNetConfig};
use plumeseg_core::raster::{BandMode, ChannelId, GeoTransform};
use plumeseg_core::rng::{derive, seeded};
use plumeseg_core::training::{
    batch_weights, drop_highest_k, drop_highest_loss, train, validate, BatchForward, EpochRecord, TrainConfig,
};
use plumeseg_core::Error;
use rand::Rng;

fn grid() -> GeoTransform {
    GeoTransform::north_up(0.0, 0.0, 1.0, -1.0).unwrap()
}

fn small_net(in_channels: usize) -> UNet {
    UNet::new(UNetConfig {
        in_channels,
        depth: 2,
        base_filters: 3,
        prelu_init: 0.25,
    })
    .unwrap()
}

fn random_samples(n: usize, size: usize, seed: u64) -> Vec<Sample> {
    let mut rng = seeded(seed);
    let chans = BandMode::OneBand.channels().to_vec();
    (0..n)
        .map(|i| {
            let input = (0..chans.len() * size * size).map(|_| rng.random::<f32>()).collect();
            let bits = (0..size * size).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
            let label = BitMask::from_bits(size, size, bits, grid()).unwrap();
            Sample::new(format!("s{i}"), format!("b{}", i / 2), chans.clone(), input, label).unwrap()
        })
        .collect()
}

fn synthetic_samples(scenes: usize, seed: u64) -> Vec<Sample> {
    let cfg = SynthConfig {
        width: 40,
        height: 40,
        plume_sigma: (4.0, 7.0),
        ..SynthConfig::default()
    };
    let crops = CropConfig {
        size: 16,
        n_max: 4,
        band_mode: BandMode::OneBand,
        ..CropConfig::default()
    };
    let stats = NormStats::physical();
    let mut out = Vec::new();
    for k in 0..scenes {
        let id = format!("scene{k}");
        let s = generate_synthetic(&cfg, &mut derive(seed, &id)).unwrap();
        for c in sample_crops(&s.scene, &s.label, &id, &crops, &mut derive(seed ^ 1, &id)).unwrap() {
            out.push(normalize(&c, &stats).unwrap());
        }
    }
    out
}

#[test]
fn drop_rule_examples() {
    let (mean, idx) = drop_highest_loss(&[0.2, 0.9, 0.4]);
    assert_eq!(idx, Some(1));
    assert!((mean - 0.2).abs() < 1e-15);
    assert_eq!(drop_highest_loss(&[0.7]), (0.0, Some(0)));
    let c = 0.3;
    let (mean, idx) = drop_highest_loss(&[c, c, c]);
    assert_eq!(idx, Some(0));
    assert!((mean - 2.0 * c / 3.0).abs() < 1e-15);
    let (mean, idx) = drop_highest_k(&[0.5, 0.1, 0.5, 0.9], 2);
    assert_eq!(idx, vec![0, 3]);
    assert!((mean - 0.6 / 4.0).abs() < 1e-15);
}

#[test]
fn schedule_records_and_exact_lrs() {
    let net = small_net(3);
    let data = random_samples(3, 8, 1);
    let cfg = TrainConfig {
        hyper: TrainHyper { batch: 2, ..TrainHyper::default() },
        ..TrainConfig::default()
    };
    let mut state = net.init(&mut seeded(2));
    let records = train(&net, &mut state, &data, &data[..1], &cfg, 0, &mut |_: &EpochRecord, _: &ModelState| Ok(())).unwrap();
    assert_eq!(records.len(), 21);
    let lrs: Vec<f64> = records.iter().map(|r| r.lr).collect();
    let expected: Vec<f64> = [5e-5; 9].iter().chain(&[5e-6; 9]).chain(&[5e-7; 3]).copied().collect();
    assert_eq!(lrs, expected);
    for r in &records {
        assert_eq!(r.lr, lr_at_epoch(&cfg.hyper, r.epoch));
    }
    assert_eq!(state.step, 21 * 2);
}

#[test]
fn same_seed_same_history_and_resume_replays() {
    let net = small_net(3);
    let data = synthetic_samples(3, 5);
    let cfg = TrainConfig {
        hyper: TrainHyper {
            batch: 4,
            epochs: 4,
            lr0: 1e-3,
            ..TrainHyper::default()
        },
        drop_highest: true,
        seed: 17,
        ..TrainConfig::default()
    };
    let run = |epochs: usize, start: Option<(usize, ModelState)>| {
        let mut c = cfg.clone();
        c.hyper.epochs = epochs;
        let (from, mut state) = start.unwrap_or((0, net.init(&mut seeded(3))));
        let rec = train(&net, &mut state, &data, &data[..2], &c, from, &mut |_: &EpochRecord, _: &ModelState| Ok(())).unwrap();
        (rec, state)
    };
    let (a, sa) = run(4, None);
    let (b, sb) = run(4, None);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let (first, mid) = run(2, None);
    let (rest, sc) = run(4, Some((2, mid)));
    assert_eq!(sc, sa);
    assert_eq!([first, rest].concat(), a);
    assert!(a.iter().all(|r| !r.dropped_sample_ids.is_empty()));
}

#[test]
fn dropped_sample_contributes_nothing() {
    let net = small_net(3);
    let state = net.init::<f64, _>(&mut seeded(8));
    let data = random_samples(5, 6, 9);
    let x: Vec<Tensor<f64>> = data.iter().map(|s| s.input_tensor().cast()).collect();
    let y: Vec<Tensor<f64>> = data.iter().map(|s| s.label_tensor().cast()).collect();
    let stack = |idx: &[usize], v: &[Tensor<f64>]| Tensor::stack(&idx.iter().map(|&i| &v[i]).collect::<Vec<_>>()).unwrap();

    let all: Vec<usize> = (0..5).collect();
    let (xa, ya) = (stack(&all, &x), stack(&all, &y));
    let fwd = BatchForward::run(&net, &state.params, &xa, &ya, LossKind::Bce).unwrap();
    let (_, dropped) = drop_highest_loss(&fwd.losses);
    let d = dropped.unwrap();
    let with_drop = fwd
        .gradients(&net, &state.params, &ya, LossKind::Bce, &batch_weights(5, &[d]))
        .unwrap();

    let rest: Vec<usize> = all.iter().copied().filter(|&i| i != d).collect();
    let (xr, yr) = (stack(&rest, &x), stack(&rest, &y));
    let fwd_r = BatchForward::run(&net, &state.params, &xr, &yr, LossKind::Bce).unwrap();
    let without = fwd_r
        .gradients(&net, &state.params, &yr, LossKind::Bce, &batch_weights(4, &[]))
        .unwrap();

    let ratio = 4.0 / 5.0;
    let scale = without.iter().flat_map(|g| g.data()).fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in with_drop.iter().zip(&without) {
        for (ga, gb) in a.data().iter().zip(b.data()) {
            assert!((ga - ratio * gb).abs() <= 1e-6 * scale, "{ga} vs {}", ratio * gb);
        }
    }

}

fn bce_oracle(p: &[f32], y: &[f32]) -> f64 {
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = (p as f64).clamp(1e-7, 1.0 - 1e-7);
            -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
        })
        .sum();
    sum / p.len() as f64
}

#[test]
fn validate_matches_per_sample_loop() {
    let net = small_net(3);
    let state = net.init::<f32, _>(&mut seeded(4));
    let data = random_samples(6, 10, 5);
    let (loss, dice) = validate(&net, &state.params, &data, LossKind::Bce, 0.5).unwrap();
    let mut l = 0.0;
    let mut d = 0.0;
    for s in &data {
        let p = net.predict_any(&state.params, &s.input_tensor()).unwrap();
        l += bce_oracle(p.data(), &s.label.to_plane());
        let pred: Vec<bool> = p.data().iter().map(|&v| v >= 0.5).collect();
        let truth: Vec<bool> = s.label.bits().iter().map(|&b| b == 1).collect();
        let inter = pred.iter().zip(&truth).filter(|(a, b)| **a && **b).count();
        let total = pred.iter().filter(|a| **a).count() + truth.iter().filter(|a| **a).count();
        d += if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 };
    }
    assert!((loss - l / 6.0).abs() < 1e-6);
    assert!((dice - d / 6.0).abs() < 1e-12);
    assert!(matches!(validate(&net, &state.params, &[], LossKind::Bce, 0.5), Err(Error::Empty(_))));
}

#[test]
fn half_probability_model_scores_ln2() {
    let net = small_net(3);
    let mut state = net.init::<f32, _>(&mut seeded(1));
    for p in &mut state.params {
        p.scale(0.0);
    }
    let data = random_samples(3, 8, 2);
    let (loss, _) = validate(&net, &state.params, &data, LossKind::Bce, 0.5).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-6);
}

#[test]
fn perfect_model_scores_one() {
    let net = small_net(3);
    let mut state = net.init::<f32, _>(&mut seeded(1));
    for p in &mut state.params {
        p.scale(0.0);
    }
    let head = state.names.iter().position(|n| n == "head.bias").unwrap();
    state.params[head].data_mut()[0] = 30.0;
    let mut data = random_samples(2, 8, 2);
    for s in &mut data {
        s.label = BitMask::from_bits(8, 8, vec![1; 64], grid()).unwrap();
    }
    let (_, dice) = validate(&net, &state.params, &data, LossKind::Mae, 0.5).unwrap();
    assert_eq!(dice, 1.0);
}

#[test]
fn numerics_error_restores_state() {
    let net = small_net(3);
    let mut data = random_samples(4, 8, 3);
    data[2].input[5] = f32::NAN;
    let cfg = TrainConfig {
        hyper: TrainHyper { batch: 1, epochs: 3, ..TrainHyper::default() },
        ..TrainConfig::default()
    };
    let init = net.init::<f32, _>(&mut seeded(6));
    let mut state = init.clone();
    let mut epochs_seen = 0;
    let err = train(&net, &mut state, &data, &data[..1], &cfg, 0, &mut |_: &EpochRecord, _: &ModelState| {
        epochs_seen += 1;
        Ok(())
    })
    .unwrap_err();
    assert!(matches!(err, Error::Numerics(_)));
    assert_eq!(epochs_seen, 0);
    assert_eq!(state, init);
}

#[test]
fn channel_mismatch_is_rejected() {
    let net = small_net(6);
    let data = random_samples(2, 8, 3);
    let cfg = TrainConfig { band_mode: BandMode::FourBand, ..TrainConfig::default() };
    let mut state = net.init::<f32, _>(&mut seeded(6));
    let r = train(&net, &mut state, &data, &data, &cfg, 0, &mut |_: &EpochRecord, _: &ModelState| Ok(()));
    assert!(matches!(r, Err(Error::Shape(_))));
    let bad = TrainConfig { band_mode: BandMode::ThreeBand, ..TrainConfig::default() };
    assert!(matches!(bad.validate(&net), Err(Error::Config(_))));
    assert_eq!(BandMode::FourBand.channels().last(), Some(&ChannelId::Aot));
}
