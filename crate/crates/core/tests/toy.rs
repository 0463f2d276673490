use semtrans_core::losses::LossWeights;
use semtrans_core::pseudo_label::assign_initial;
use semtrans_core::superpixel::SlicParams;
use semtrans_core::thresholds::{determine_lambdas, CurriculumSchedule};
use semtrans_core::toy::train::{predict_all, target_superpixels};
use semtrans_core::toy::{
    gen_synthetic, pixel_features, train, train_with_superpixels, Models, SynthConfig, TrainConfig, TrainData,
};
use semtrans_core::ImageLabel;

/// Relative tolerance on per-channel mean intensity between domains.
const MEAN_RTOL: f64 = 0.02;
/// Kolmogorov distance bound between pooled intensity distributions; whole-image
/// color jitter makes 100-image samples noisier than independent pixels.
const KS_TOL: f64 = 0.05;

fn small_data(seed: u64) -> TrainData {
    gen_synthetic(&SynthConfig { image_size: 16, source_count: 12, target_count: 8, seed, ..SynthConfig::default() })
        .unwrap()
        .into()
}

fn small_cfg() -> TrainConfig {
    TrainConfig { epochs: 3, slic: SlicParams { n_segments: 25, ..SlicParams::default() }, ..TrainConfig::default() }
}

#[test]
fn lesion_free_images_have_background_masks() {
    let data =
        gen_synthetic(&SynthConfig { source_count: 40, target_count: 40, seed: 5, ..SynthConfig::default() }).unwrap();
    for set in [&data.source, &data.target] {
        for (label, mask) in set.labels.iter().zip(&set.masks) {
            if *label == ImageLabel::Normal {
                assert!(mask.data().iter().all(|&v| v == 0));
            }
        }
    }
}

/// Per-channel mean intensity and the pooled intensity CDF of a set of images.
fn intensity_stats(images: &[semtrans_core::Image]) -> ([f64; 3], Vec<f64>) {
    let mut sums = [0.0; 3];
    let mut hist = vec![0.0; 256];
    let mut n = 0.0;
    for im in images {
        for (i, &v) in im.data().iter().enumerate() {
            sums[i % 3] += v as f64;
            hist[v as usize] += 1.0;
            n += 1.0;
        }
    }
    let mut acc = 0.0;
    let cdf = hist
        .iter()
        .map(|h| {
            acc += h / n;
            acc
        })
        .collect();
    (sums.map(|s| s / (n / 3.0)), cdf)
}

fn domain_gap(cfg: &SynthConfig) -> (f64, f64) {
    let data = gen_synthetic(cfg).unwrap();
    let (ms, cs) = intensity_stats(&data.source.images);
    let (mt, ct) = intensity_stats(&data.target.images);
    let mean_gap = (0..3).map(|c| ((ms[c] - mt[c]) / ms[c]).abs()).fold(0.0, f64::max);
    let ks = cs.iter().zip(&ct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (mean_gap, ks)
}

#[test]
fn unshifted_domains_share_intensity_statistics() {
    for seed in 0..3 {
        let cfg = SynthConfig {
            source_count: 100,
            target_count: 100,
            brightness_shift: 0.0,
            noise_shift: 0.0,
            seed,
            ..SynthConfig::default()
        };
        let (mean_gap, ks) = domain_gap(&cfg);
        assert!(mean_gap < MEAN_RTOL, "seed {seed}: mean gap {mean_gap}");
        assert!(ks < KS_TOL, "seed {seed}: ks {ks}");
    }
    let shifted = SynthConfig { source_count: 100, target_count: 100, ..SynthConfig::default() };
    let (mean_gap, ks) = domain_gap(&shifted);
    assert!(mean_gap > MEAN_RTOL && ks > KS_TOL);
}

#[test]
fn zero_epochs_leaves_models_untouched() {
    let data = small_data(1);
    let out = train(&TrainConfig { epochs: 0, ..small_cfg() }, &data).unwrap();
    assert!(out.log.is_empty());
    assert_eq!(out.models, Models::zeros(8, 2));
}

#[test]
fn zero_learning_rate_keeps_models_and_losses() {
    let data = small_data(2);
    let cfg = TrainConfig { learning_rate: 0.0, epochs: 2, ..small_cfg() };
    let out = train(&cfg, &data).unwrap();
    assert_eq!(out.models, Models::zeros(8, 2));
    // Losses that do not depend on the centroid banks stay put.
    assert_eq!(out.log[0].l_c, out.log[1].l_c);
    assert_eq!(out.log[0].discriminator, out.log[1].discriminator);
}

#[test]
fn closed_thresholds_without_alignment_reduce_to_source_only() {
    let data = small_data(3);
    let weights = LossWeights { eta: 0.0, mu: 0.0, ..LossWeights::default() };
    let closed = TrainConfig { closed_thresholds: true, weights, ..small_cfg() };
    let baseline = TrainConfig { weights, ..TrainConfig::baseline() };
    let baseline = TrainConfig { epochs: closed.epochs, slic: closed.slic, ..baseline };
    let a = train(&closed, &data).unwrap();
    let b = train(&baseline, &data).unwrap();
    assert_eq!(a.models, b.models);
    assert!(a.pseudo_labels.iter().all(|m| m.labeled_count() == 0));
    for (x, y) in a.log.iter().zip(&b.log) {
        assert_eq!(x.selected_fraction, 0.0);
        assert_eq!(x.miou, y.miou);
    }
}

#[test]
fn training_is_deterministic() {
    let data = small_data(4);
    let a = train(&small_cfg(), &data).unwrap();
    let b = train(&small_cfg(), &data).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.models, b.models);
}

#[test]
fn precomputed_superpixels_match() {
    let data = small_data(6);
    let cfg = small_cfg();
    let sp = target_superpixels(&data, &cfg.slic).unwrap();
    assert_eq!(train(&cfg, &data).unwrap().log, train_with_superpixels(&cfg, &data, &sp).unwrap().log);
}

#[test]
fn selection_grows_with_portion_on_fixed_predictions() {
    let data = small_data(7);
    let out = train(&small_cfg(), &data).unwrap();
    let features: Vec<_> = data.target_images.iter().map(pixel_features).collect();
    let probs = predict_all(&out.models, &features, false).unwrap();
    let schedule = CurriculumSchedule::default();
    let mut previous = 0;
    for epoch in 0..8 {
        let t = determine_lambdas(&probs, schedule.portion_at(epoch)).unwrap();
        let selected: usize = probs.iter().map(|p| assign_initial(p, &t).unwrap().labeled_count()).sum();
        assert!(selected >= previous, "epoch {epoch}: {selected} < {previous}");
        previous = selected;
    }
    assert!(previous > 0);
}

#[test]
fn log_tracks_schedule_and_metrics() {
    let data = small_data(8);
    let out = train(&small_cfg(), &data).unwrap();
    let portions: Vec<f64> = out.log.iter().map(|r| r.portion).collect();
    assert_eq!(portions, [0.25, 0.3, 0.35]);
    for r in &out.log {
        let per_class: f64 = r.selected_per_class.iter().sum();
        assert!((per_class - r.selected_fraction).abs() < 1e-12);
        assert!(r.miou.is_some() && r.iou_n.is_some() && r.iou_d.is_some());
        assert!(r.total.is_finite());
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let data = small_data(9);
    assert!(train(&TrainConfig { batch_size: 0, ..small_cfg() }, &data).is_err());
    assert!(train(&TrainConfig { gamma: 1.0, ..small_cfg() }, &data).is_err());
    let mut broken = data.clone();
    broken.source_labels.pop();
    assert!(train(&small_cfg(), &broken).is_err());
}
