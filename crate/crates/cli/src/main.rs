use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abspose_core::correction::TrainConfig;
use abspose_core::io::{
    load_gt, load_model, load_observations, load_pred, read_json, write_atomic, write_json, write_report, ReportConfig,
    ReportDocument, SCHEMA_VERSION,
};
use abspose_core::metrics::{evaluate, DEFAULT_MATCH_RADIUS, DEFAULT_PCK_THRESHOLD};
use abspose_core::pipeline::{
    fit_roots, predict_correction, scene_to_gt, scene_to_observations, scene_to_predictions, train_correction,
    RootMethod,
};
use abspose_core::synth::{generate_scene, run_k_correlation, SceneConfig};
use abspose_core::{Error, EvalConfig, RansacConfig, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "abspose", version, propagate_version = true, about = "Absolute 3D multi-person pose toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against groundtruth.
    Eval(EvalArgs),
    /// Generate a synthetic scene, optionally with noisy predictions.
    Synth(SynthArgs),
    /// Benchmark root localization methods on 2D observations.
    Rootfit(RootfitArgs),
    /// Correlate k with true root depth on a synthetic scene.
    Corr(CorrArgs),
    /// Train the correction regressor on groundtruth persons.
    TrainCorrection(TrainArgs),
    /// Predict root depths with a trained correction model.
    PredictCorrection(PredictArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    All,
    Matched,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Which population the reported PCK curve covers.
    #[arg(long, value_enum, default_value = "all")]
    mode: Mode,
    /// PCK threshold in mm.
    #[arg(long, default_value_t = DEFAULT_PCK_THRESHOLD)]
    pck_threshold: f64,
    /// Root matching radius in mm.
    #[arg(long, default_value_t = DEFAULT_MATCH_RADIUS)]
    match_radius: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the PCK curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    /// Scene configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    min_persons: Option<usize>,
    #[arg(long)]
    max_persons: Option<usize>,
    /// Person height range in mm.
    #[arg(long)]
    min_height: Option<f64>,
    #[arg(long)]
    max_height: Option<f64>,
    /// Root depth range in mm.
    #[arg(long)]
    min_depth: Option<f64>,
    #[arg(long)]
    max_depth: Option<f64>,
}

impl SceneArgs {
    fn resolve(&self) -> Result<SceneConfig> {
        let mut cfg: SceneConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => SceneConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.images {
            cfg.num_images = v;
        }
        if let Some(v) = self.min_persons {
            cfg.persons_per_image[0] = v;
        }
        if let Some(v) = self.max_persons {
            cfg.persons_per_image[1] = v;
        }
        if let Some(v) = self.min_height {
            cfg.height_range[0] = v;
        }
        if let Some(v) = self.max_height {
            cfg.height_range[1] = v;
        }
        if let Some(v) = self.min_depth {
            cfg.depth_range[0] = v;
        }
        if let Some(v) = self.max_depth {
            cfg.depth_range[1] = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Groundtruth output.
    #[arg(long)]
    out: PathBuf,
    /// Noisy predictions (root + relative pose).
    #[arg(long)]
    pred_out: Option<PathBuf>,
    /// Noisy 2D observations for `rootfit`.
    #[arg(long)]
    pred2d_out: Option<PathBuf>,
    /// Std. dev. of 2D joint noise, px.
    #[arg(long)]
    noise_2d: Option<f64>,
    /// Relative std. dev. of box extent jitter.
    #[arg(long)]
    noise_box: Option<f64>,
    /// Std. dev. of predicted root depth noise, mm.
    #[arg(long)]
    noise_depth: Option<f64>,
    /// Noise multiplier on limb joints.
    #[arg(long)]
    limb_noise_scale: Option<f64>,
    /// Probability that a joint becomes a gross outlier.
    #[arg(long)]
    outlier_frac: Option<f64>,
    /// Outlier displacement, px.
    #[arg(long)]
    outlier_px: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    K,
    Lsq,
    LsqNolimb,
    Ransac,
}

impl From<Method> for RootMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::K => RootMethod::K,
            Method::Lsq => RootMethod::Lsq,
            Method::LsqNolimb => RootMethod::LsqNolimb,
            Method::Ransac => RootMethod::Ransac,
        }
    }
}

#[derive(Args)]
struct RootfitArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Observation document from `synth --pred2d-out`.
    #[arg(long)]
    pred2d: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 256)]
    ransac_iters: usize,
    /// RANSAC inlier threshold, px.
    #[arg(long, default_value_t = 10.0)]
    inlier_px: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// `k,z` rows.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Groundtruth document used as training data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 8)]
    hidden_width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Writes numeric rows with the same float format as the JSON documents.
fn write_csv(path: &Path, header: &[&str], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (a, b) in rows {
        w.write_record([format!("{a:.16e}"), format!("{b:.16e}")])
            .map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(path, e))?;
    write_atomic(path, &bytes)
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let gt = load_gt(&a.gt)?;
    let pred = load_pred(&a.pred)?;
    let mut cfg = EvalConfig::new(gt.skeleton.root_index);
    cfg.pck_threshold = a.pck_threshold;
    cfg.match_radius = a.match_radius;
    if !(cfg.pck_threshold > 0.0) || !(cfg.match_radius > 0.0) {
        return Err(Error::InvalidParameter("thresholds must be positive".into()));
    }
    let report = evaluate(&pred.to_predictions(&gt)?, &gt.groundtruth_persons(), &cfg)?;
    let (mode, curve) = match a.mode {
        Mode::All => ("all", report.all.pck_rel_curve.points().to_vec()),
        Mode::Matched => (
            "matched",
            report
                .matched
                .as_ref()
                .map(|m| m.pck_rel_curve.points().to_vec())
                .unwrap_or_default(),
        ),
    };
    let doc = ReportDocument {
        schema: SCHEMA_VERSION.into(),
        config: ReportConfig {
            mode: mode.into(),
            eval: cfg,
        },
        report,
        pck_curve: curve,
    };
    write_report(&doc, &a.out)?;
    if let Some(path) = &a.csv {
        write_csv(path, &["threshold", "pck"], &doc.pck_curve)?;
    }
    let r = &doc.report;
    match &r.matched {
        Some(m) => println!(
            "matched {}/{}  MPJPE {:.2}  PA-MPJPE {:.2}  MRPE {:.2}  PCK_abs {:.4}  AP_root {:.4}",
            r.counts.matched, r.counts.groundtruth, m.mpjpe, m.pa_mpjpe, m.mrpe, r.all.pck_abs, r.ap_root
        ),
        None => println!("matched 0/{}  AP_root {:.4}", r.counts.groundtruth, r.ap_root),
    }
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let cfg = a.scene.resolve()?;
    let mut noise = cfg.noise;
    if let Some(v) = a.noise_2d {
        noise.sigma_2d = v;
    }
    if let Some(v) = a.noise_box {
        noise.box_jitter = v;
    }
    if let Some(v) = a.noise_depth {
        noise.depth_sigma = v;
    }
    if let Some(v) = a.limb_noise_scale {
        noise.limb_noise_scale = v;
    }
    if let Some(v) = a.outlier_frac {
        noise.outlier_fraction = v;
    }
    if let Some(v) = a.outlier_px {
        noise.outlier_px = v;
    }
    noise.validate()?;

    let scene = generate_scene(&cfg)?;
    write_json(&scene_to_gt(&scene, &cfg), &a.out)?;
    let noise_seed = cfg.seed.wrapping_add(1);
    if let Some(path) = &a.pred_out {
        write_json(&scene_to_predictions(&scene, &cfg, &noise, noise_seed)?, path)?;
    }
    if let Some(path) = &a.pred2d_out {
        write_json(&scene_to_observations(&scene, &cfg, &noise, noise_seed)?, path)?;
    }
    let persons: usize = scene.iter().map(|s| s.persons.len()).sum();
    println!("{} images, {persons} persons", scene.len());
    Ok(())
}

fn run_rootfit(a: &RootfitArgs) -> Result<()> {
    let gt = load_gt(&a.gt)?;
    let obs = load_observations(&a.pred2d, &gt)?;
    let ransac = RansacConfig {
        iterations: a.ransac_iters,
        inlier_threshold: a.inlier_px,
        seed: a.seed,
        ..RansacConfig::default()
    };
    let report = fit_roots(&gt, &obs, a.method.into(), &ransac)?;
    write_json(&report, &a.out)?;
    println!(
        "{}: MRPE {:.3} mm over {} persons ({} failed)",
        report.method, report.mrpe, report.count, report.failures
    );
    Ok(())
}

fn run_corr(a: &CorrArgs) -> Result<()> {
    let cfg = a.scene.resolve()?;
    let result = run_k_correlation(&cfg)?;
    write_csv(&a.out, &["k", "z"], &result.rows)?;
    println!("r = {:.12}", result.r);
    Ok(())
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let gt = load_gt(&a.data)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        hidden_width: a.hidden_width,
    };
    let model = train_correction(&gt, &cfg)?;
    write_json(&model, &a.out)?;
    let first = model.loss_trace.first().copied().unwrap_or(f64::NAN);
    let last = model.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!("mean depth error {first:.2} -> {last:.2} mm");
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let gt = load_gt(&a.gt)?;
    let pred = predict_correction(&gt, &model.params, model.a_real)?;
    write_json(&pred, &a.out)?;
    println!("{} predictions", pred.persons.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Rootfit(a) => run_rootfit(a),
        Command::Corr(a) => run_corr(a),
        Command::TrainCorrection(a) => run_train(a),
        Command::PredictCorrection(a) => run_predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
