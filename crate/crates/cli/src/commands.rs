//! Subcommand implementations. Each command reads and checks all of its
//! inputs, computes everything, and only then writes outputs.

use std::fmt::Write as _;
use std::path::Path;

use semtrans_core::metrics::{ConfusionMatrix, IouSummary};
use semtrans_core::pseudo_label::{assign_initial, generate};
use semtrans_core::superpixel::slic as compute_slic;
use semtrans_core::thresholds::{determine_lambdas, ClassThresholds};
use semtrans_core::toy::{self, gen_synthetic, pixel_features, EpochRecord, GradcheckReport};
use semtrans_core::{argmax_map, LabelMask, ProbMap, IGNORE};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{read_dataset, write_dataset};
use crate::error::{CliError, Result};
use crate::io::{
    list_tensors, read_image, read_json, read_mask, read_mask_raw, read_prob_map, tensor_name, write_json, write_mask,
    write_superpixels, Staged,
};

/// Largest accepted gradient-check relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Progress output on stdout, silenced by `--quiet`.
#[derive(Debug, Clone, Copy)]
pub struct Reporter {
    quiet: bool,
}

impl Reporter {
    pub fn new(quiet: bool) -> Self {
        Self { quiet }
    }

    pub fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

/// Contents of a thresholds file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsFile {
    #[serde(rename = "K")]
    pub num_classes: usize,
    pub lambdas: Vec<f64>,
}

impl ThresholdsFile {
    pub fn from_thresholds(t: &ClassThresholds) -> Self {
        Self { num_classes: t.num_classes(), lambdas: t.lambdas().to_vec() }
    }

    pub fn to_thresholds(&self) -> Result<ClassThresholds> {
        if self.lambdas.len() != self.num_classes {
            return Err(CliError::validation(format!(
                "thresholds file declares K = {} but holds {} lambdas",
                self.num_classes,
                self.lambdas.len()
            )));
        }
        Ok(ClassThresholds::from_lambdas(self.lambdas.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub iou_n: Option<f64>,
    pub iou_d: Option<f64>,
    pub miou: Option<f64>,
    pub per_class: Vec<Option<f64>>,
}

impl From<IouSummary> for EvalSummary {
    fn from(s: IouSummary) -> Self {
        Self { iou_n: s.iou_n, iou_d: s.iou_d, miou: s.miou, per_class: s.per_class }
    }
}

/// One line of `log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub epoch: usize,
    pub portion: f64,
    pub learning_rate: f64,
    pub l_c: f64,
    pub l_s: f64,
    pub l_d: f64,
    pub l_srt: f64,
    pub total: f64,
    pub discriminator: f64,
    pub selected_fraction: f64,
    pub selected_per_class: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub iou_n: Option<f64>,
    pub iou_d: Option<f64>,
    pub miou: Option<f64>,
}

impl From<&EpochRecord> for LogLine {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            portion: r.portion,
            learning_rate: r.learning_rate,
            l_c: r.l_c,
            l_s: r.l_s,
            l_d: r.l_d,
            l_srt: r.l_srt,
            total: r.total,
            discriminator: r.discriminator,
            selected_fraction: r.selected_fraction,
            selected_per_class: r.selected_per_class.clone(),
            lambdas: r.lambdas.clone(),
            iou_n: r.iou_n,
            iou_d: r.iou_d,
            miou: r.miou,
        }
    }
}

pub const CSV_HEADER: &str =
    "epoch,portion,learning_rate,l_c,l_s,l_d,l_srt,total,discriminator,selected_fraction,iou_n,iou_d,miou";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn log_csv(log: &[EpochRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.portion,
            r.learning_rate,
            r.l_c,
            r.l_s,
            r.l_d,
            r.l_srt,
            r.total,
            r.discriminator,
            r.selected_fraction,
            opt(r.iou_n),
            opt(r.iou_d),
            opt(r.miou)
        );
    }
    out
}

pub fn log_jsonl(log: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out.push_str(&serde_json::to_string(&LogLine::from(r)).expect("serializable"));
        out.push('\n');
    }
    out
}

fn fractions(counts: &[usize], total: usize) -> String {
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| format!("class {k}: {:.4}", c as f64 / total.max(1) as f64))
        .collect::<Vec<_>>()
        .join(", ")
}

fn read_prob_dir(dir: &Path) -> Result<Vec<ProbMap>> {
    let files = list_tensors(dir)?;
    if files.is_empty() {
        return Err(CliError::MissingFiles(format!("no .tnsr files in {}", dir.display())));
    }
    let maps = files.iter().map(|f| read_prob_map(f)).collect::<Result<Vec<_>>>()?;
    let k = maps[0].num_classes();
    if let Some((f, m)) = files.iter().zip(&maps).find(|(_, m)| m.num_classes() != k) {
        return Err(CliError::validation(format!("{}: expected {k} classes, found {}", f.display(), m.num_classes())));
    }
    Ok(maps)
}

pub fn gen_synth(cfg: &RunConfig, out: &Path, rep: &Reporter) -> Result<()> {
    let synth = cfg.synth();
    synth.validate()?;
    let data = gen_synthetic(&synth)?;
    let manifest = write_dataset(out, &data)?;
    write_json(&out.join("config.json"), &cfg.effective())?;
    let lesions = |e: &[crate::dataset::Entry]| e.iter().filter(|x| x.label == 1).count();
    rep.line(format!(
        "wrote {} source images ({} with lesions) and {} target images ({} with lesions), K = {}, to {}",
        manifest.source.len(),
        lesions(&manifest.source),
        manifest.target.len(),
        lesions(&manifest.target),
        manifest.num_classes,
        out.display()
    ));
    Ok(())
}

pub fn thresholds(probs: &Path, p: f64, out: &Path, rep: &Reporter) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(CliError::validation(format!("--p must lie in (0, 1], got {p}")));
    }
    let maps = read_prob_dir(probs)?;
    let t = determine_lambdas(&maps, p)?;
    let k = t.num_classes();
    let mut counts = vec![0usize; k];
    let mut total = 0;
    for m in &maps {
        for (c, n) in counts.iter_mut().zip(assign_initial(m, &t)?.class_counts()) {
            *c += n;
        }
        total += m.num_pixels();
    }
    write_json(out, &ThresholdsFile::from_thresholds(&t))?;
    let th: Vec<String> = t.thresholds().iter().map(|v| format!("{v:.6}")).collect();
    rep.line(format!("{} maps, p = {p}, thresholds [{}]", maps.len(), th.join(", ")));
    rep.line(format!("selected fraction: {}", fractions(&counts, total)));
    Ok(())
}

pub fn slic(cfg: &RunConfig, image: &Path, out: &Path, rep: &Reporter) -> Result<()> {
    let params = cfg.slic();
    params.validate()?;
    let img = read_image(image)?;
    let sp = compute_slic(&img, &params)?;
    write_superpixels(out, &sp)?;
    rep.line(format!("{} segments", sp.num_segments()));
    Ok(())
}

pub fn pseudolabel(
    cfg: &RunConfig,
    probs: &Path,
    thresholds: &Path,
    image: &Path,
    out: &Path,
    rep: &Reporter,
) -> Result<()> {
    let params = cfg.slic();
    params.validate()?;
    let p = read_prob_map(probs)?;
    let file: ThresholdsFile = read_json(thresholds)?;
    let t = file.to_thresholds()?;
    if t.num_classes() != p.num_classes() {
        return Err(CliError::validation(format!(
            "thresholds have K = {} but the probability map has K = {}",
            t.num_classes(),
            p.num_classes()
        )));
    }
    let img = read_image(image)?;
    if (img.height(), img.width()) != (p.height(), p.width()) {
        return Err(CliError::validation(format!(
            "image is {}x{} but the probability map is {}x{}",
            img.height(),
            img.width(),
            p.height(),
            p.width()
        )));
    }
    let sp = compute_slic(&img, &params)?;
    let mask = generate(&p, &t, &sp)?;
    write_mask(out, &mask)?;
    rep.line(format!(
        "labeled {:.4} of pixels ({})",
        mask.labeled_count() as f64 / mask.num_pixels() as f64,
        fractions(&mask.class_counts(), mask.num_pixels())
    ));
    Ok(())
}

pub fn train(cfg: &RunConfig, data_dir: &Path, out: &Path, rep: &Reporter) -> Result<()> {
    let tc = cfg.train();
    tc.validate()?;
    let data = read_dataset(data_dir)?;
    let outcome = toy::train(&tc, &data)?;
    for r in &outcome.log {
        rep.line(format!(
            "epoch {:>3}  p {:.2}  total {:.5}  L_C {:.5}  L_S {:.5}  L_D {:.5}  L_SRT {:.5}  selected {:.4}  mIoU {}",
            r.epoch,
            r.portion,
            r.total,
            r.l_c,
            r.l_s,
            r.l_d,
            r.l_srt,
            r.selected_fraction,
            r.miou.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        ));
    }
    let features: Vec<_> = data.target_images.iter().map(pixel_features).collect();
    let target_probs = toy::train::predict_all(&outcome.models, &features, false)?;
    let predictions: Vec<LabelMask> = if tc.refine_with_classifier {
        toy::train::predict_all(&outcome.models, &features, true)?.iter().map(argmax_map).collect()
    } else {
        target_probs.iter().map(argmax_map).collect()
    };
    let summary = data
        .target_eval_masks
        .as_ref()
        .map(|masks| -> Result<EvalSummary> {
            let mut cm = ConfusionMatrix::new(data.num_classes);
            for (p, gt) in predictions.iter().zip(masks) {
                cm.accumulate(p, gt)?;
            }
            Ok(cm.summary().into())
        })
        .transpose()?;

    let m = &outcome.models;
    let (d, k) = (m.segmenter.feature_dim(), m.segmenter.num_classes());
    let mut files = Staged::default();
    files.json(out.join("config.json"), &cfg.effective());
    files.bytes(out.join("log.jsonl"), log_jsonl(&outcome.log).into_bytes());
    files.bytes(out.join("log.csv"), log_csv(&outcome.log).into_bytes());
    files.weights(out.join("models/segmenter.tnsr"), &[d + 1, k], m.segmenter.weights())?;
    files.weights(out.join("models/classifier.tnsr"), &[m.classifier.weights().len()], m.classifier.weights())?;
    files.weights(
        out.join("models/discriminator.tnsr"),
        &[m.discriminator.weights().len()],
        m.discriminator.weights(),
    )?;
    files.bank(out.join("banks/source.tnsr"), &outcome.source_bank)?;
    files.bank(out.join("banks/target.tnsr"), &outcome.target_bank)?;
    for (i, mask) in outcome.pseudo_labels.iter().enumerate() {
        files.mask(out.join("pseudo_labels").join(tensor_name(i)), mask)?;
    }
    for (i, (p, mask)) in target_probs.iter().zip(&predictions).enumerate() {
        files.prob_map(out.join("target_probs").join(tensor_name(i)), p)?;
        files.mask(out.join("predictions").join(tensor_name(i)), mask)?;
    }
    if let Some(s) = &summary {
        files.json(out.join("metrics.json"), s);
    }
    files.commit()?;
    if let Some(s) = &summary {
        rep.line(format!(
            "target IoU_N {}  IoU_D {}  mIoU {}",
            s.iou_n.map_or_else(|| "-".to_string(), |v| format!("{v:.4}")),
            s.iou_d.map_or_else(|| "-".to_string(), |v| format!("{v:.4}")),
            s.miou.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        ));
    }
    Ok(())
}

pub fn eval(pred: &Path, gt: &Path, num_classes: usize, out: Option<&Path>, rep: &Reporter) -> Result<()> {
    if num_classes < 2 || num_classes > IGNORE as usize {
        return Err(CliError::validation(format!("--num-classes must lie in [2, {}], got {num_classes}", IGNORE)));
    }
    let preds = list_tensors(pred)?;
    let gts = list_tensors(gt)?;
    if preds.is_empty() {
        return Err(CliError::MissingFiles(format!("no .tnsr files in {}", pred.display())));
    }
    let mut cm = ConfusionMatrix::new(num_classes);
    for p in &preds {
        let name = p.file_name().expect("listed file");
        let g = gt.join(name);
        if !gts.contains(&g) {
            return Err(CliError::MissingFiles(format!("{} has no ground truth in {}", p.display(), gt.display())));
        }
        let (h, w, raw) = read_mask_raw(p)?;
        if raw.contains(&IGNORE) {
            return Err(CliError::validation(format!("{}: predictions may not contain the ignore label", p.display())));
        }
        let pm = LabelMask::new(h, w, num_classes, raw)?;
        cm.accumulate(&pm, &read_mask(&g, num_classes)?)?;
    }
    if gts.len() != preds.len() {
        return Err(CliError::MissingFiles(format!(
            "{} ground-truth files but {} predictions",
            gts.len(),
            preds.len()
        )));
    }
    let summary = EvalSummary::from(cm.summary());
    let json = serde_json::to_string_pretty(&summary).expect("serializable");
    if let Some(path) = out {
        write_json(path, &summary)?;
    }
    rep.line(json);
    Ok(())
}

pub fn gradcheck(seed: u64, num_classes: usize, rep: &Reporter) -> Result<()> {
    let report: GradcheckReport = toy::gradcheck(seed, num_classes)?;
    for b in &report.blocks {
        rep.line(format!(
            "{:<14} {:>4} params  max rel {:.3e}  max abs {:.3e}",
            b.name, b.parameters, b.max_rel_error, b.max_abs_error
        ));
    }
    let worst = report.max_rel_error();
    if worst.is_finite() && worst < GRADCHECK_TOLERANCE {
        rep.line(format!("ok: max relative error {worst:.3e} < {GRADCHECK_TOLERANCE:e}"));
        Ok(())
    } else {
        Err(CliError::Numeric(format!("max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:e}")))
    }
}
