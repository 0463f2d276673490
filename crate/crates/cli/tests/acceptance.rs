//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails that is not listed in `KNOWN_UNATTAINABLE`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use semtrans_core::losses::{
    adversarial_loss_for_segmenter, classification_loss, discriminator_loss, segmentation_loss,
};
use semtrans_core::metrics::ConfusionMatrix;
use semtrans_core::pseudo_label::{assign_initial, refine_with_superpixels};
use semtrans_core::rng::SplitMix64;
use semtrans_core::superpixel::{slic_with_trace, SlicParams, SuperpixelMap};
use semtrans_core::thresholds::{determine_lambdas, ClassThresholds};
use semtrans_core::toy::gradcheck::{gradcheck, relative_error};
use semtrans_core::toy::{gen_synthetic, train, SynthConfig, TrainConfig};
use semtrans_core::transfer::{srt_loss, srt_loss_raw, BatchCentroids, CentroidBank};
use semtrans_core::{argmax_map, max_map, ImageLabel, LabelMask, ProbMap, IGNORE};

/// Criteria whose expected value cannot be produced by a correct
/// implementation. They still run and print FAIL.
const KNOWN_UNATTAINABLE: &[u32] = &[2, 7];

const FD_STEP: f64 = 1e-5;
const GRAD_MAX_REL: f64 = 1e-4;
const BANK_MAX_REL: f64 = 1e-9;
const MIOU_EXPECTED: f64 = 0.5833;
const MIOU_TOL: f64 = 1e-4;
const IOU_D_TOL: f64 = 1e-12;
/// Minimum Full - BL gap, in mIoU points.
const MIN_GAIN_POINTS: f64 = 2.0;
const ENERGY_RTOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn random_prob_map(rng: &mut SplitMix64, h: usize, w: usize, k: usize) -> ProbMap {
    let mut data: Vec<f64> = (0..h * w * k).map(|_| rng.uniform(1e-3, 1.0)).collect();
    for px in data.chunks_exact_mut(k) {
        let s: f64 = px.iter().sum();
        px.iter_mut().for_each(|v| *v /= s);
    }
    ProbMap::new(h, w, k, data).unwrap()
}

/// Per-pixel minimization over {e_1..e_K} and the zero vector, where e_k
/// costs `-ln p_k - lambda_k` and the zero vector costs 0.
fn brute_force_assign(p: &ProbMap, lambdas: &[f64]) -> Vec<u16> {
    p.pixels()
        .map(|probs| {
            let mut best: Option<(usize, f64)> = None;
            for (k, (&pk, &lk)) in probs.iter().zip(lambdas).enumerate() {
                let cost = -pk.ln() - lk;
                if best.is_none_or(|(_, c)| cost < c) {
                    best = Some((k, cost));
                }
            }
            match best {
                Some((k, cost)) if cost < 0.0 => k as u16,
                _ => IGNORE,
            }
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = SplitMix64::new(1);
    let mut mismatches = 0usize;
    let mut pixels = 0usize;
    let mut selected = 0usize;
    for i in 0..100 {
        let k = [2, 3, 5][i % 3];
        let (h, w) = (8 + rng.below(25), 8 + rng.below(25));
        let p = random_prob_map(&mut rng, h, w, k);
        let lambdas: Vec<f64> =
            (0..k).map(|_| if rng.next_f64() < 0.1 { 0.0 } else { rng.uniform(0.0, 2.5) }).collect();
        let t = ClassThresholds::from_lambdas(lambdas.clone()).unwrap();
        let got = assign_initial(&p, &t).unwrap();
        let want = brute_force_assign(&p, &lambdas);
        mismatches += got.data().iter().zip(&want).filter(|(a, b)| a != b).count();
        selected += want.iter().filter(|&&v| v != IGNORE).count();
        pixels += want.len();
    }
    Outcome::new(mismatches == 0, format!("{mismatches} mismatches over {pixels} pixels ({selected} selected)"))
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(2);
    // Per K: (checked, literal violations, argmax-restricted violations).
    let mut tally: Vec<(usize, usize, usize, usize)> = vec![(2, 0, 0, 0), (3, 0, 0, 0), (5, 0, 0, 0)];
    let mut example = None;
    for trial in 0..60 {
        let slot = trial % 3;
        let k = tally[slot].0;
        let maps: Vec<ProbMap> = (0..1 + rng.below(3))
            .map(|_| {
                let (h, w) = (4 + rng.below(10), 4 + rng.below(10));
                random_prob_map(&mut rng, h, w, k)
            })
            .collect();
        for p in [0.25, 0.4, 0.55] {
            let t = determine_lambdas(&maps, p).unwrap();
            let mut predicted = vec![Vec::new(); k];
            let mut selected = vec![0usize; k];
            for m in &maps {
                let labels = argmax_map(m);
                for (&l, &v) in labels.data().iter().zip(&max_map(m)) {
                    predicted[l as usize].push(v);
                }
                for (s, c) in selected.iter_mut().zip(assign_initial(m, &t).unwrap().class_counts()) {
                    *s += c;
                }
            }
            for c in 0..k {
                let n = predicted[c].len();
                if n == 0 {
                    continue;
                }
                let th = t.thresholds()[c];
                // The value at the threshold rank, recomputed independently;
                // c_k counts the pixels equal to it (itself included).
                let mut sorted = predicted[c].clone();
                sorted.sort_by(f64::total_cmp);
                let rank = (((1.0 - p) * n as f64).floor() as usize).min(n - 1);
                let ties = sorted.iter().filter(|&&v| v == sorted[rank]).count() as f64;
                let lo = p * n as f64 - ties - 1.0 - 1e-9;
                let hi = p * n as f64 + ties + 1e-9;
                let within = |s: f64| s >= lo && s <= hi;
                let above = predicted[c].iter().filter(|&&v| v > th).count() as f64;
                let s = selected[c] as f64;
                tally[slot].1 += 1;
                if !within(s) {
                    tally[slot].2 += 1;
                    example.get_or_insert(format!("K={k} p={p} class {c}: {s} selected, bound [{lo:.2}, {hi:.2}]"));
                }
                if !within(above) {
                    tally[slot].3 += 1;
                }
            }
        }
    }
    let literal: usize = tally.iter().map(|t| t.2).sum();
    let per_k: Vec<String> = tally.iter().map(|(k, n, v, _)| format!("K={k} {v}/{n}")).collect();
    let restricted: Vec<String> = tally.iter().map(|(k, n, _, v)| format!("K={k} {v}/{n}")).collect();
    let mut detail = format!(
        "assigned-label counts outside bound: {}; argmax-restricted counts outside bound: {}",
        per_k.join(", "),
        restricted.join(", ")
    );
    if let Some(e) = example {
        detail.push_str(&format!("; e.g. {e}"));
    }
    Outcome::new(literal == 0, detail)
}

/// Independent transcription of the superpixel-gated vote: frozen copy,
/// 8-neighborhood, same superpixel, argmax with lowest-index ties, fill iff
/// the winning count exceeds 4.
fn oracle_refine(m: &LabelMask, sp: &SuperpixelMap) -> Vec<u16> {
    let (h, w, k) = (m.height(), m.width(), m.num_classes());
    let frozen = m.data().to_vec();
    let mut out = frozen.clone();
    for r in 0..h {
        for c in 0..w {
            if frozen[r * w + c] != IGNORE {
                continue;
            }
            let mut counts = vec![0usize; k];
            for dr in [-1i64, 0, 1] {
                for dc in [-1i64, 0, 1] {
                    let (x, y) = (r as i64 + dr, c as i64 + dc);
                    if (dr, dc) == (0, 0) || x < 0 || y < 0 || x >= h as i64 || y >= w as i64 {
                        continue;
                    }
                    let j = x as usize * w + y as usize;
                    let label = frozen[j];
                    if label != IGNORE && sp.data()[j] == sp.data()[r * w + c] {
                        counts[label as usize] += 1;
                    }
                }
            }
            let mut best = 0;
            for kk in 1..k {
                if counts[kk] > counts[best] {
                    best = kk;
                }
            }
            if counts[best] > 4 {
                out[r * w + c] = best as u16;
            }
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut rng = SplitMix64::new(3);
    let (h, w) = (16, 16);
    let mut mismatches = 0usize;
    let mut filled = 0usize;
    for i in 0..100 {
        let k = 2 + rng.below(3);
        let ignore_rate = rng.uniform(0.1, 0.6);
        let data =
            (0..h * w).map(|_| if rng.next_f64() < ignore_rate { IGNORE } else { rng.below(k) as u16 }).collect();
        let m = LabelMask::new(h, w, k, data).unwrap();
        let sp_data: Vec<u32> = if i % 2 == 0 {
            (0..h * w).map(|_| rng.below(3) as u32).collect()
        } else {
            let (bh, bw) = (2 + rng.below(6), 2 + rng.below(6));
            (0..h * w).map(|j| ((j / w) / bh * 16 + (j % w) / bw) as u32).collect()
        };
        let sp = SuperpixelMap::new(h, w, sp_data).unwrap();
        let got = refine_with_superpixels(&m, &sp).unwrap();
        let want = oracle_refine(&m, &sp);
        mismatches += got.data().iter().zip(&want).filter(|(a, b)| a != b).count();
        filled += m.data().iter().zip(&want).filter(|(a, b)| a != b).count();
    }
    let sp = SuperpixelMap::new(3, 3, vec![0; 9]).unwrap();
    let fixture = |ones: usize| {
        let mut data = vec![IGNORE; 9];
        for &j in [0usize, 1, 2, 3, 5, 6, 7, 8].iter().take(ones) {
            data[j] = 1;
        }
        refine_with_superpixels(&LabelMask::new(3, 3, 2, data).unwrap(), &sp).unwrap().get(1, 1)
    };
    let four = fixture(4);
    let five = fixture(5);
    let pass = mismatches == 0 && four == IGNORE && five == 1;
    Outcome::new(
        pass,
        format!("{mismatches} mismatches on 100 instances ({filled} fills); 4 votes -> {four}, 5 votes -> {five}"),
    )
}

fn criterion_4() -> Outcome {
    let (k, d, n) = (3, 4, 1000);
    let mut worst: f64 = 0.0;
    for (i, gamma) in [0.0, 0.5, 0.7, 0.99].into_iter().enumerate() {
        let mut rng = SplitMix64::new(40 + i as u64);
        let updates: Vec<Vec<f64>> = (0..n).map(|_| (0..k * d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let mut bank = CentroidBank::new(k, d, gamma).unwrap();
        for u in &updates {
            bank.update(&BatchCentroids::from_values(k, d, u.clone()).unwrap()).unwrap();
        }
        for j in 0..k * d {
            let direct: f64 = updates.iter().enumerate().map(|(x, u)| u[j] * gamma.powi((n - 1 - x) as i32)).sum();
            let scale = direct.abs().max(f64::MIN_POSITIVE);
            worst = worst.max((bank.centroids()[j] - direct).abs() / scale);
        }
    }
    Outcome::new(worst < BANK_MAX_REL, format!("max relative deviation {worst:.2e} (limit {BANK_MAX_REL:e})"))
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

fn loss_gradients(seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    let mut check = |a: f64, n: f64| worst = worst.max(relative_error(a, n));

    let q = rng.uniform(0.02, 0.98);
    for label in [ImageLabel::Normal, ImageLabel::Lesion] {
        check(classification_loss(q, label).1, central(|x| classification_loss(x, label).0, q));
    }

    let (h, w, k) = (3, 3, 3);
    let p = random_prob_map(&mut rng, h, w, k);
    let labels = (0..h * w).map(|_| if rng.next_f64() < 0.3 { IGNORE } else { rng.below(k) as u16 }).collect();
    let m = LabelMask::new(h, w, k, labels).unwrap();
    let lam = rng.uniform(0.0, 1.0);
    let s = segmentation_loss(&p, &m, lam).unwrap();
    for j in 0..p.data().len() {
        let f = |x: f64| {
            let mut d = p.data().to_vec();
            d[j] = x;
            segmentation_loss(&ProbMap::new(h, w, k, d).unwrap(), &m, lam).unwrap().loss
        };
        check(s.grad[j], central(f, p.data()[j]));
    }

    let src: Vec<f64> = (0..3).map(|_| rng.uniform(0.05, 0.95)).collect();
    let tgt: Vec<f64> = (0..3).map(|_| rng.uniform(0.05, 0.95)).collect();
    let dl = discriminator_loss(&src, &tgt).unwrap();
    let (_, adv) = adversarial_loss_for_segmenter(&tgt).unwrap();
    for i in 0..3 {
        let with = |v: &[f64], x: f64| {
            let mut v = v.to_vec();
            v[i] = x;
            v
        };
        check(dl.grad_source[i], central(|x| discriminator_loss(&with(&src, x), &tgt).unwrap().loss, src[i]));
        check(dl.grad_target[i], central(|x| discriminator_loss(&src, &with(&tgt, x)).unwrap().loss, tgt[i]));
        check(adv[i], central(|x| adversarial_loss_for_segmenter(&with(&tgt, x)).unwrap().0, tgt[i]));
    }

    // Centroid distance, kept away from the l1 kink.
    let a: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let b: Vec<f64> =
        a.iter().map(|v| v + rng.uniform(0.1, 1.0) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 }).collect();
    let alpha = rng.uniform(0.0, 2.0);
    let bank_s = CentroidBank::from_parts(2, 3, a.clone(), 0.7, 1).unwrap();
    let bank_t = CentroidBank::from_parts(2, 3, b.clone(), 0.7, 1).unwrap();
    let srt = srt_loss(&bank_s, &bank_t, alpha).unwrap();
    for i in 0..6 {
        let fs = |x: f64| {
            let mut v = a.clone();
            v[i] = x;
            srt_loss_raw(&v, &b, alpha).unwrap().loss
        };
        let ft = |x: f64| {
            let mut v = b.clone();
            v[i] = x;
            srt_loss_raw(&a, &v, alpha).unwrap().loss
        };
        check(srt.grad_source[i], central(fs, a[i]));
        check(srt.grad_target[i], central(ft, b[i]));
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut losses: f64 = 0.0;
    let mut model: f64 = 0.0;
    for seed in 0..10 {
        losses = losses.max(loss_gradients(seed));
        for k in [2, 3] {
            model = model.max(gradcheck(seed, k).unwrap().max_rel_error());
        }
    }
    Outcome::new(
        losses < GRAD_MAX_REL && model < GRAD_MAX_REL,
        format!("max relative error: losses {losses:.2e}, segmenter/classifier/discriminator {model:.2e}"),
    )
}

fn is_connected(sp: &SuperpixelMap, segment: u32) -> bool {
    let (h, w) = (sp.height(), sp.width());
    let members: Vec<usize> = (0..h * w).filter(|&i| sp.data()[i] == segment).collect();
    let Some(&start) = members.first() else { return true };
    let mut seen = vec![false; h * w];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 0;
    while let Some(i) = stack.pop() {
        reached += 1;
        let (r, c) = (i / w, i % w);
        let mut next = Vec::with_capacity(4);
        if r > 0 {
            next.push(i - w);
        }
        if r + 1 < h {
            next.push(i + w);
        }
        if c > 0 {
            next.push(i - 1);
        }
        if c + 1 < w {
            next.push(i + 1);
        }
        for j in next {
            if !seen[j] && sp.data()[j] == segment {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    reached == members.len()
}

fn criterion_6() -> Outcome {
    let data =
        gen_synthetic(&SynthConfig { source_count: 10, target_count: 10, seed: 6, ..SynthConfig::default() }).unwrap();
    let images: Vec<_> = data.source.images.iter().chain(&data.target.images).collect();
    let mut failures = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, img) in images.iter().enumerate() {
        let params = SlicParams { n_segments: 30 + 5 * i, ..SlicParams::default() };
        let trace = slic_with_trace(img, &params).unwrap();
        let sp = &trace.map;
        if sp.data().len() != img.num_pixels() {
            failures.push(format!("image {i}: coverage"));
        }
        if let Some(s) = (0..sp.num_segments() as u32).find(|&s| !is_connected(sp, s)) {
            failures.push(format!("image {i}: segment {s} not 4-connected"));
        }
        let ratio = sp.num_segments() as f64 / params.n_segments as f64;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        if !(0.5..=1.5).contains(&ratio) {
            failures.push(format!("image {i}: {} segments for {}", sp.num_segments(), params.n_segments));
        }
        if trace.energies.windows(2).any(|e| e[1] > e[0] * (1.0 + ENERGY_RTOL)) {
            failures.push(format!("image {i}: energy increased"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} images; segment count ratio in [{lo:.2}, {hi:.2}]", images.len())
    } else {
        failures.join("; ")
    };
    Outcome::new(failures.is_empty(), detail)
}

fn criterion_7() -> Outcome {
    // 2x2 lesion inside a 4x4 canvas; the prediction is shifted one column right.
    let square = |col: usize| {
        let mut d = vec![0u16; 16];
        for r in 1..3 {
            for c in col..col + 2 {
                d[r * 4 + c] = 1;
            }
        }
        LabelMask::new(4, 4, 2, d).unwrap()
    };
    let mut cm = ConfusionMatrix::new(2);
    cm.accumulate(&square(2), &square(1)).unwrap();
    let s = cm.summary();
    let (iou_n, iou_d, miou) = (s.iou_n.unwrap(), s.iou_d.unwrap(), s.miou.unwrap());
    let iou_d_ok = (iou_d - 1.0 / 3.0).abs() <= IOU_D_TOL;
    let miou_ok = (miou - MIOU_EXPECTED).abs() <= MIOU_TOL;

    let mut rng = SplitMix64::new(7);
    let mut additive = true;
    for _ in 0..50 {
        let k = 2 + rng.below(3);
        let pairs: Vec<(LabelMask, LabelMask)> = (0..1 + rng.below(8))
            .map(|_| {
                let (h, w) = (1 + rng.below(6), 1 + rng.below(6));
                let pred = (0..h * w).map(|_| rng.below(k) as u16).collect();
                let gt = (0..h * w).map(|_| if rng.next_f64() < 0.2 { IGNORE } else { rng.below(k) as u16 }).collect();
                (LabelMask::new(h, w, k, pred).unwrap(), LabelMask::new(h, w, k, gt).unwrap())
            })
            .collect();
        let mut whole = ConfusionMatrix::new(k);
        pairs.iter().for_each(|(p, g)| whole.accumulate(p, g).unwrap());
        let cut = rng.below(pairs.len() + 1);
        let (mut left, mut right) = (ConfusionMatrix::new(k), ConfusionMatrix::new(k));
        pairs[..cut].iter().for_each(|(p, g)| left.accumulate(p, g).unwrap());
        pairs[cut..].iter().rev().for_each(|(p, g)| right.accumulate(p, g).unwrap());
        left.merge(&right).unwrap();
        additive &= left == whole;
    }
    Outcome::new(
        iou_d_ok && miou_ok && additive,
        format!(
            "IoU_d {iou_d:.4} ({}), IoU_n {iou_n:.4}, mIoU {miou:.4} vs expected {MIOU_EXPECTED} ({}); additivity {}",
            if iou_d_ok { "ok" } else { "wrong" },
            if miou_ok { "ok" } else { "mismatch: background IoU is 10/14 on a 4x4 canvas" },
            if additive { "holds" } else { "violated" }
        ),
    )
}

fn criterion_8() -> Outcome {
    let variants = [
        ("BL", TrainConfig::baseline()),
        ("BL+AL", TrainConfig { use_adversarial: true, ..TrainConfig::baseline() }),
        ("Full", TrainConfig::default()),
    ];
    let seeds = 0..5u64;
    let mut means = Vec::new();
    for (_, cfg) in &variants {
        let mut sum = 0.0;
        for seed in seeds.clone() {
            let data = gen_synthetic(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
            let out = train(&TrainConfig { seed, ..*cfg }, &data.into()).unwrap();
            sum += out.log.last().and_then(|r| r.miou).unwrap();
        }
        means.push(sum / seeds.clone().count() as f64);
    }
    let (bl, al, full) = (means[0], means[1], means[2]);
    let gain = 100.0 * (full - bl);
    let pass = full > al && al > bl && gain >= MIN_GAIN_POINTS;
    Outcome::new(
        pass,
        format!("mean mIoU over 5 seeds: BL {bl:.4}, BL+AL {al:.4}, Full {full:.4}; Full - BL = {gain:.2} points"),
    )
}

fn run_train(bin: &Path, data: &Path, out: &Path) {
    let status = Command::new(bin)
        .args(["--quiet", "--seed", "9", "train", "--epochs", "3", "--data"])
        .arg(data)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "train exited with {status}");
}

fn criterion_9() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_semtrans"));
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let status = Command::new(bin)
        .args(["--quiet", "--seed", "9", "gen-synth", "--source-count", "40", "--target-count", "20", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_train(bin, &data, &a);
    run_train(bin, &data, &b);
    let mut differing = Vec::new();
    for file in ["log.jsonl", "log.csv", "config.json", "models/segmenter.tnsr", "banks/target.tnsr"] {
        if std::fs::read(a.join(file)).unwrap() != std::fs::read(b.join(file)).unwrap() {
            differing.push(file);
        }
    }
    let lines = std::fs::read_to_string(a.join("log.jsonl")).unwrap().lines().count();
    let detail = if differing.is_empty() {
        format!("two runs byte-identical ({lines} log lines, models and banks included)")
    } else {
        format!("differing files: {}", differing.join(", "))
    };
    Outcome::new(differing.is_empty(), detail)
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "pseudo-label oracle equivalence", Some(Duration::from_secs(10)), criterion_1),
        (2, "threshold selection fraction", Some(Duration::from_secs(10)), criterion_2),
        (3, "refinement oracle", None, criterion_3),
        (4, "centroid recurrence vs direct sum", None, criterion_4),
        (5, "gradient checks", Some(Duration::from_secs(60)), criterion_5),
        (6, "superpixel invariants", None, criterion_6),
        (7, "metrics fixtures", None, criterion_7),
        (8, "end-to-end ablation ordering", Some(Duration::from_secs(300)), criterion_8),
        (9, "training determinism", None, criterion_9),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        let timing = match limit {
            Some(l) if !in_time => format!("{:.1} s, over the {} s limit", elapsed.as_secs_f64(), l.as_secs()),
            _ => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        let known = !pass && KNOWN_UNATTAINABLE.contains(&id);
        println!(
            "{} {id} {name}: {} [{timing}]{}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            if known { " (known unattainable)" } else { "" }
        );
        if pass {
            passed += 1;
        } else if !known {
            unexpected.push(id);
        }
    }
    println!("{passed}/9 criteria pass");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
