//! Argument definitions and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Reporter};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "semtrans", version, about = "Pseudo-label self-training for cross-domain lesion segmentation")]
pub struct Cli {
    /// Flat JSON configuration; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Work is currently single-threaded, so only 1 changes nothing.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-domain dataset.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Derive class thresholds from a directory of probability maps.
    Thresholds {
        #[arg(long, value_name = "DIR")]
        probs: PathBuf,
        /// Portion of predicted pixels per class to admit, in (0, 1].
        #[arg(long)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a superpixel map for one image.
    Slic {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        slic: SlicFlags,
    },
    /// Produce a refined pseudo-label mask for one image.
    Pseudolabel {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        slic: SlicFlags,
    },
    /// Train the toy pipeline on a dataset directory.
    Train {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        slic: SlicFlags,
    },
    /// Score prediction masks against ground-truth masks.
    Eval {
        #[arg(long, value_name = "DIR")]
        pred: PathBuf,
        #[arg(long, value_name = "DIR")]
        gt: PathBuf,
        #[arg(long, default_value_t = 2)]
        num_classes: usize,
        /// Also write the summary JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 2)]
        num_classes: usize,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthFlags {
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub source_count: Option<usize>,
    #[arg(long)]
    pub target_count: Option<usize>,
    #[arg(long)]
    pub lesion_probability: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub brightness_shift: Option<f64>,
    #[arg(long)]
    pub noise_shift: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SlicFlags {
    #[arg(long)]
    pub n_segments: Option<usize>,
    #[arg(long)]
    pub compactness: Option<f64>,
    #[arg(long)]
    pub slic_iterations: Option<usize>,
    /// Skip the connected-component cleanup.
    #[arg(long)]
    pub no_connectivity: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Disable pseudo-labeled target supervision.
    #[arg(long)]
    pub no_pl: bool,
    /// Disable centroid alignment.
    #[arg(long)]
    pub no_srt: bool,
    /// Disable the adversarial term.
    #[arg(long)]
    pub no_adv: bool,
    /// Force every class threshold to 1.0.
    #[arg(long)]
    pub closed_thresholds: bool,
    /// Scale lesion probabilities by the image classifier's output.
    #[arg(long)]
    pub refine_with_classifier: bool,
    /// Drop lesion pseudo labels on images labeled normal.
    #[arg(long)]
    pub gate_by_image_label: bool,
}

impl SynthFlags {
    fn apply(&self, c: &mut RunConfig) {
        c.overlay(&RunConfig {
            image_size: self.image_size,
            num_classes: self.num_classes,
            source_count: self.source_count,
            target_count: self.target_count,
            lesion_probability: self.lesion_probability,
            brightness_shift: self.brightness_shift,
            noise_shift: self.noise_shift,
            ..RunConfig::default()
        });
    }
}

impl SlicFlags {
    fn apply(&self, c: &mut RunConfig) {
        c.overlay(&RunConfig {
            n_segments: self.n_segments,
            compactness: self.compactness,
            slic_iterations: self.slic_iterations,
            enforce_connectivity: self.no_connectivity.then_some(false),
            ..RunConfig::default()
        });
    }
}

impl TrainFlags {
    fn apply(&self, c: &mut RunConfig) {
        c.overlay(&RunConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            gamma: self.gamma,
            eta: self.eta,
            mu: self.mu,
            alpha: self.alpha,
            use_pseudo_labels: self.no_pl.then_some(false),
            use_transfer: self.no_srt.then_some(false),
            use_adversarial: self.no_adv.then_some(false),
            closed_thresholds: self.closed_thresholds.then_some(true),
            refine_with_classifier: self.refine_with_classifier.then_some(true),
            gate_by_image_label: self.gate_by_image_label.then_some(true),
            ..RunConfig::default()
        });
    }
}

/// Resolves the configuration and runs the selected command.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(CliError::validation("--threads must be >= 1"));
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = Reporter::new(cli.quiet);
    match cli.command {
        Command::GenSynth { out: dir, synth } => {
            synth.apply(&mut cfg);
            commands::gen_synth(&cfg, &dir, &out)
        }
        Command::Thresholds { probs, p, out: file } => commands::thresholds(&probs, p, &file, &out),
        Command::Slic { image, out: file, slic } => {
            slic.apply(&mut cfg);
            commands::slic(&cfg, &image, &file, &out)
        }
        Command::Pseudolabel { probs, thresholds, image, out: file, slic } => {
            slic.apply(&mut cfg);
            commands::pseudolabel(&cfg, &probs, &thresholds, &image, &file, &out)
        }
        Command::Train { data, out: dir, train, slic } => {
            train.apply(&mut cfg);
            slic.apply(&mut cfg);
            commands::train(&cfg, &data, &dir, &out)
        }
        Command::Eval { pred, gt, num_classes, out: file } => {
            commands::eval(&pred, &gt, num_classes, file.as_deref(), &out)
        }
        Command::Gradcheck { num_classes } => commands::gradcheck(cfg.seed.unwrap_or(0), num_classes, &out),
    }
}
