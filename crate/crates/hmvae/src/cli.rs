//! Command-line pipeline: `gen-synthetic → qc → train → encode → project →
//! classify → stats`, plus `elbo` for per-subject bounds.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hmvae_core::analysis::{
    align_and_threshold, beta_ttest, classify_cv, community_graph, correlation_matrix, default_folds, encode_subjects,
    latent_projection, louvain_communities, recovery_score, Axis, ClassificationReport,
};
use hmvae_core::data::{qc_filter, standardize, synth_generate, SubjectMatrix, VolumeMask};
use hmvae_core::model::{draw_noise, elbo_with_noise};
use hmvae_core::optim::{train, Checkpoint};
use hmvae_core::Matrix;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{checkpoint_load, checkpoint_save, vmat_load, vmat_save};
use crate::image::save_montage;
use crate::report;

pub const DATA_FILE: &str = "data.vmat";
pub const TRUTH_FILE: &str = "truth_sources.vmat";
pub const QC_FILE: &str = "qc.vmat";
pub const CHECKPOINT_FILE: &str = "checkpoint.hmvae";

#[derive(Debug, Parser)]
#[command(name = "hmvae", version, about = "Logistic-latent Helmholtz machine for subject × voxel data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random draw
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic subject matrix and its ground-truth sources
    GenSynthetic {
        #[command(flatten)]
        common: Common,
    },
    /// Drop subjects poorly correlated with the mean volume
    Qc {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the model and write a checkpoint
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        latent_dim: Option<usize>,
    },
    /// Write per-subject posterior centers
    Encode {
        #[command(flatten)]
        common: Common,
    },
    /// Render one thresholded projection image per latent unit
    Project {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threshold_sd: Option<f64>,
    },
    /// Cross-validated group classification from posterior centers
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Per-unit t-tests, correlation matrices and unit communities
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Per-subject Monte-Carlo bound on log p(x)
    Elbo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
}

/// Parses `args` (program name first), runs the command, and returns the exit
/// code: 0 on success, 1 on a usage error, 2 on a runtime error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            2
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic { common } => gen_synthetic(&prepare(resolve(&common)?)?),
        Command::Qc { common } => qc(&prepare(resolve(&common)?)?),
        Command::Train {
            common,
            epochs,
            batch_size,
            latent_dim,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            if let Some(k) = latent_dim {
                cfg.model.latent_dim = k;
            }
            fit(&prepare(cfg)?)
        }
        Command::Encode { common } => encode(&prepare(resolve(&common)?)?),
        Command::Project { common, threshold_sd } => {
            let mut cfg = resolve(&common)?;
            if let Some(t) = threshold_sd {
                cfg.analysis.threshold_sd = t;
            }
            project(&prepare(cfg)?)
        }
        Command::Classify { common, folds } => {
            let mut cfg = resolve(&common)?;
            if folds.is_some() {
                cfg.analysis.folds = folds;
            }
            classify(&prepare(cfg)?)
        }
        Command::Stats { common, folds } => {
            let mut cfg = resolve(&common)?;
            if folds.is_some() {
                cfg.analysis.folds = folds;
            }
            stats(&prepare(cfg)?)
        }
        Command::Elbo { common, samples } => {
            let mut cfg = resolve(&common)?;
            if let Some(m) = samples {
                cfg.analysis.samples = m;
            }
            elbo(&prepare(cfg)?)
        }
    }
}

/// Validates the effective configuration, creates the output directory and
/// records the configuration there.
fn prepare(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output.dir).map_err(|e| Error::io(&cfg.output.dir, e))?;
    crate::fsutil::atomic_write(&out(&cfg, "run_config.json"), cfg.to_json().as_bytes())?;
    Ok(cfg)
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

/// Explicit input, else the QC output, else the generated data.
fn input_path(cfg: &RunConfig) -> PathBuf {
    if let Some(p) = &cfg.data.input {
        return p.clone();
    }
    let qc = out(cfg, QC_FILE);
    if qc.exists() {
        qc
    } else {
        out(cfg, DATA_FILE)
    }
}

fn gen_synthetic(cfg: &RunConfig) -> Result<()> {
    let (data, truth) = synth_generate(&cfg.synth_config())?;
    vmat_save(&data, &out(cfg, DATA_FILE))?;
    let ids = (0..truth.sources.rows()).map(|k| format!("source-{k:02}")).collect();
    let sources = SubjectMatrix::new(truth.sources.clone(), ids, None, data.mask.clone())?;
    vmat_save(&sources, &out(cfg, TRUTH_FILE))?;
    eprintln!(
        "generated {} subjects × {} voxels from {} sources",
        data.n_subjects(),
        data.n_features(),
        truth.sources.rows()
    );
    Ok(())
}

fn qc(cfg: &RunConfig) -> Result<()> {
    let src = cfg.data.input.clone().unwrap_or_else(|| out(cfg, DATA_FILE));
    let data = vmat_load(&src)?;
    let outcome = qc_filter(&data)?;
    vmat_save(&outcome.kept, &out(cfg, QC_FILE))?;
    report::qc_report(&outcome.report)?.save(&out(cfg, "qc_report.csv"))?;
    eprintln!(
        "qc: kept {}, excluded {} (cutoff {:.4}{})",
        outcome.kept.n_subjects(),
        outcome.excluded.len(),
        outcome.cutoff,
        if outcome.degenerate { ", degenerate spread" } else { "" }
    );
    Ok(())
}

fn fit(cfg: &RunConfig) -> Result<()> {
    let data = vmat_load(&input_path(cfg))?;
    let (standardized, stats) = standardize(&data)?;
    let config = cfg.train_config();
    let checkpoint = train(&standardized.values, &config, stats, &mut |r| {
        eprintln!("epoch {:>5}  elbo {:.6}  batches {}", r.epoch + 1, r.elbo, r.batches)
    })?;
    checkpoint_save(&checkpoint, &out(cfg, CHECKPOINT_FILE))?;
    report::elbo_trace(&checkpoint.elbo_trace)?.save(&out(cfg, "elbo_trace.csv"))?;
    Ok(())
}

struct Loaded {
    data: SubjectMatrix,
    checkpoint: Checkpoint,
    /// `data` in the checkpoint's standardization.
    standardized: Matrix,
}

fn load_model_and_data(cfg: &RunConfig) -> Result<Loaded> {
    let checkpoint = checkpoint_load(&out(cfg, CHECKPOINT_FILE))?;
    let data = vmat_load(&input_path(cfg))?;
    let standardized = checkpoint.data_stats.apply(&data.values)?;
    Ok(Loaded {
        data,
        checkpoint,
        standardized,
    })
}

fn encode(cfg: &RunConfig) -> Result<()> {
    let l = load_model_and_data(cfg)?;
    let centers = encode_subjects(&l.checkpoint.params, &l.standardized)?;
    report::encodings(&l.data.subject_ids, l.data.labels.as_deref(), &centers)?.save(&out(cfg, "encodings.csv"))?;
    eprintln!("encoded {} subjects into {} units", centers.rows(), centers.cols());
    Ok(())
}

fn project(cfg: &RunConfig) -> Result<()> {
    let l = load_model_and_data(cfg)?;
    let params = &l.checkpoint.params;
    let d = params.data_dim();
    let mask = match &l.data.mask {
        Some(m) => m.clone(),
        None => VolumeMask::full_grid(&[d, 1])?,
    };
    let mut maps = Matrix::zeros(params.latent_dim(), d);
    let mut summary = Vec::with_capacity(params.latent_dim());
    for unit in 0..params.latent_dim() {
        let raw = latent_projection(params, unit, Some(&l.checkpoint.data_stats))?.with_threshold(cfg.analysis.threshold_sd);
        let map = align_and_threshold(&raw);
        save_montage(&map, &mask, cfg.output.image_scale, &out(cfg, &format!("projection_{unit:03}.ppm")))?;
        maps.row_mut(unit).copy_from_slice(&map.values);
        summary.push((unit, map.supra_count(), map.sign_flipped));
    }
    report::projection_summary(&summary)?.save(&out(cfg, "projections.csv"))?;
    let ids = (0..maps.rows()).map(|u| format!("h{u}")).collect();
    vmat_save(&SubjectMatrix::new(maps.clone(), ids, None, Some(mask))?, &out(cfg, "projections.vmat"))?;
    let truth_path = out(cfg, TRUTH_FILE);
    if truth_path.exists() {
        let truth = vmat_load(&truth_path)?;
        if truth.n_features() == d {
            let r = recovery_score(&maps, &truth.values)?;
            report::recovery(&r)?.save(&out(cfg, "recovery.csv"))?;
            eprintln!("source recovery (mean matched |r|): {:.4}", r.score);
        }
    }
    eprintln!("rendered {} projection images", summary.len());
    Ok(())
}

fn labels_of(data: &SubjectMatrix) -> Result<&[u8]> {
    data.labels
        .as_deref()
        .ok_or_else(|| Error::Invalid("classification needs group labels in the subject matrix".into()))
}

fn cross_validate(cfg: &RunConfig, l: &Loaded) -> Result<(Matrix, ClassificationReport)> {
    let labels = labels_of(&l.data)?;
    let centers = encode_subjects(&l.checkpoint.params, &l.standardized)?;
    let folds = cfg.analysis.folds.unwrap_or_else(|| default_folds(labels));
    let r = classify_cv(&centers, labels, folds, cfg.analysis.l2, cfg.seed())?;
    if r.clamped {
        eprintln!("folds reduced from {} to {} (smallest class size)", r.requested_folds, r.folds);
    }
    Ok((centers, r))
}

fn classify(cfg: &RunConfig) -> Result<()> {
    let l = load_model_and_data(cfg)?;
    let (_, r) = cross_validate(cfg, &l)?;
    report::fold_accuracies(&r)?.save(&out(cfg, "fold_accuracies.csv"))?;
    report::fold_betas(&r)?.save(&out(cfg, "fold_betas.csv"))?;
    eprintln!("mean accuracy over {} folds: {:.4}", r.folds, r.mean_accuracy);
    Ok(())
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let l = load_model_and_data(cfg)?;
    let (centers, r) = cross_validate(cfg, &l)?;
    let tests = (0..r.fold_betas.cols())
        .map(|k| beta_ttest(&r.fold_betas.column(k)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    report::component_stats(&tests)?.save(&out(cfg, "component_stats.csv"))?;

    let labels = labels_of(&l.data)?;
    let mut by_group: Vec<usize> = (0..centers.rows()).collect();
    by_group.sort_by_key(|&i| labels[i]);
    let subjects = correlation_matrix(&centers, Axis::Rows);
    report::correlation(&l.data.subject_ids, &subjects.matrix, &by_group)?.save(&out(cfg, "correlation_subjects.csv"))?;

    let units = correlation_matrix(&centers, Axis::Columns);
    let communities = louvain_communities(&community_graph(&units.matrix, cfg.analysis.edge_cut), cfg.seed())?;
    let names: Vec<String> = (0..centers.cols()).map(|k| format!("h{k}")).collect();
    report::correlation(&names, &units.matrix, &communities.ordering())?.save(&out(cfg, "correlation_units.csv"))?;
    report::communities(&communities)?.save(&out(cfg, "communities.csv"))?;

    let significant = tests.iter().filter(|t| t.significant).count();
    eprintln!(
        "{significant} of {} units significant; {} unit communities (Q = {:.4}, edge cut {})",
        tests.len(),
        communities.count,
        communities.modularity,
        cfg.analysis.edge_cut
    );
    Ok(())
}

fn elbo(cfg: &RunConfig) -> Result<()> {
    let l = load_model_and_data(cfg)?;
    let params = &l.checkpoint.params;
    let m = cfg.analysis.samples;
    let n = l.standardized.rows();
    let noise = draw_noise(n, params.latent_dim(), m, cfg.seed());
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let x = l.standardized.select_rows(&[i]);
        let eps = noise.select_rows(&(i * m..(i + 1) * m).collect::<Vec<_>>());
        rows.push(elbo_with_noise(&x, params, &eps)?);
    }
    report::subject_elbo(&l.data.subject_ids, &rows)?.save(&out(cfg, "elbo.csv"))?;
    let mean = rows.iter().map(|b| b.elbo).sum::<f64>() / n as f64;
    eprintln!("mean per-subject bound ({m} samples): {mean:.6}");
    Ok(())
}

