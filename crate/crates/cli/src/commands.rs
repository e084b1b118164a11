use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use gazekit_core::acquisition::label_gaze;
use gazekit_core::adapt::{adapt_train, AdaptConfig};
use gazekit_core::eval::{
    attention_map, attention_svg, evaluate_predictions, export_distribution_map, simulate_shoppers, world_ray,
    write_yaw_curve_csv, write_yaw_curve_svg, yaw_curve, AttentionGrid, AttentionMap, MetricsReport,
    DEFAULT_BIN_DEG,
};
use gazekit_core::geometry::{from_spherical, spherical_error, to_spherical, SphericalGaze};
use gazekit_core::regressor::{
    evaluate_split, load_checkpoint, mc_dropout_split, predict_split, save_checkpoint, train, Architecture, LossKind,
    ModelKind, TrainConfig,
};
use gazekit_core::rng::{self, tag};
use gazekit_core::simulator::{
    control_experiment, export_dataset, load_dataset, load_split, read_jsonl, simulate_sessions, ControlReport,
    FrameRecord, SessionConfig, Split, SplitRatios, TEST_FILE, TRAIN_FILE, VAL_FILE,
};

use crate::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

/// Reads a JSON config file, or the default when no path is given.
fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config_err)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(config_err)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime_err)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(runtime_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    text.push('\n');
    write_text(path, &text)
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime_err)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A dataset directory resolves to `file` inside it; a file is used as is.
fn resolve_split(path: &Path, file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(file)
    } else {
        path.to_path_buf()
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Session configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    sessions: u32,
    #[arg(long, default_value_t = 7)]
    window: usize,
}

#[derive(Serialize)]
struct Manifest {
    sessions: u32,
    window: usize,
    frames: [usize; 3],
    windows: [usize; 3],
    subjects: [Vec<u32>; 3],
}

pub fn simulate(a: SimulateArgs, seed: Option<u64>) -> CliResult {
    let mut cfg: SessionConfig = read_config(a.config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if a.sessions == 0 || a.window % 2 == 0 {
        return Err(config_err(anyhow!("need at least one session and an odd window")));
    }
    let sessions = simulate_sessions(&cfg, a.sessions)?;
    let data = export_dataset(&sessions, SplitRatios::default(), a.window, cfg.seed, &a.out)?;
    let splits = [&data.train, &data.val, &data.test];
    let manifest = Manifest {
        sessions: a.sessions,
        window: a.window,
        frames: splits.map(|s| s.records().len()),
        windows: splits.map(Split::len),
        subjects: splits.map(|s| s.subject_ids().into_iter().collect()),
    };
    write_json(&a.out.join("config.json"), &cfg)?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    let gts: Vec<SphericalGaze> = sessions.iter().flat_map(|s| s.records.iter().map(|r| r.gt_gaze)).collect();
    export_distribution_map(&gts, &a.out.join("gt_distribution.svg"))?;
    println!("wrote {} frames in {} sessions", manifest.frames.iter().sum::<usize>(), a.sessions);
    Ok(())
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Session configuration providing the rig and board geometry.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory or JSONL file. Without it, fresh sessions are simulated.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sessions to simulate when no data is given.
    #[arg(long, default_value_t = 5)]
    runs: u32,
    /// Per-frame labels (CSV).
    #[arg(long, default_value = "labels.csv")]
    out: PathBuf,
    /// Summary (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct LabelSummary {
    n_frames: usize,
    n_failed: usize,
    mean_label_error_deg: f64,
    control: Option<ControlReport>,
}

pub fn label(a: LabelArgs, seed: Option<u64>) -> CliResult {
    let mut cfg: SessionConfig = read_config(a.config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (records, control) = match &a.data {
        Some(p) if p.is_dir() => {
            let mut all = Vec::new();
            for f in [TRAIN_FILE, VAL_FILE, TEST_FILE] {
                all.extend(read_jsonl(&p.join(f))?);
            }
            (all, None)
        }
        Some(p) => (read_jsonl(p)?, None),
        None => {
            let sessions = simulate_sessions(&cfg, a.runs)?;
            let recs: Vec<FrameRecord> = sessions.into_iter().flat_map(|s| s.records).collect();
            (recs, Some(control_experiment(&cfg, a.runs)?))
        }
    };
    let rig = cfg.rig();
    let mut csv = String::from("session,subject,frame,label_yaw,label_pitch,gt_yaw,gt_pitch,error_deg\n");
    let (mut failed, mut errs) = (0, Vec::new());
    for r in &records {
        match label_gaze(&r.detection, &r.marker, &cfg.board, &rig) {
            Ok(l) => {
                let e = spherical_error(l.spherical, r.gt_gaze);
                errs.push(e);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    r.session_id,
                    r.subject_id,
                    r.frame_index,
                    l.spherical.yaw,
                    l.spherical.pitch,
                    r.gt_gaze.yaw,
                    r.gt_gaze.pitch,
                    e
                );
            }
            Err(_) => failed += 1,
        }
    }
    write_text(&a.out, &csv)?;
    let mean = if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 };
    println!("labelled {} frames, {failed} failed, mean error {mean:.4} deg", errs.len());
    if let Some(p) = &a.report {
        write_json(p, &LabelSummary { n_frames: records.len(), n_failed: failed, mean_label_error_deg: mean, control })?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "static")]
    model: ModelKind,
    #[arg(long, default_value = "pinball")]
    loss: LossKind,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Per-epoch metrics (CSV).
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 16)]
    state_size: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 7)]
    window: usize,
}

pub fn train_cmd(a: TrainArgs, seed: Option<u64>) -> CliResult {
    let arch = Architecture {
        hidden: a.hidden,
        feature_dim: a.feature_dim,
        state_size: a.state_size,
        recurrent_layers: a.layers,
        dropout_rate: a.dropout,
        window: a.window,
        ..Default::default()
    };
    let cfg = TrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: seed.unwrap_or(0),
        loss_kind: a.loss,
        window: a.window,
        ..Default::default()
    };
    arch.validate()?;
    cfg.validate()?;
    let data = load_dataset(&a.data, a.window)?;
    let out = train(&data, &cfg, a.model, arch)?;
    save_checkpoint(&a.out, &out.params, &cfg)?;
    if let Some(p) = &a.history {
        let mut csv = String::from("epoch,train_loss,val_loss,val_error_deg\n");
        for h in &out.history {
            let _ = writeln!(csv, "{},{},{},{}", h.epoch, opt(h.train_loss), h.val_loss, h.val_error_deg);
        }
        write_text(p, &csv)?;
    }
    let best = &out.history[out.best_epoch];
    println!("{}/{}: best epoch {} val error {:.3} deg", a.model, a.loss, best.epoch, best.val_error_deg);
    Ok(())
}


#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory (its test split is used) or JSONL file.
    #[arg(long)]
    data: PathBuf,
    /// Metric table (CSV); a JSON report with the same stem is written next to it.
    #[arg(long)]
    report: PathBuf,
    /// Directory for the yaw curve and distribution maps.
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Monte-Carlo dropout passes providing σ for models without one.
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    #[arg(long, default_value_t = DEFAULT_BIN_DEG)]
    bin_deg: f64,
}

#[derive(Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub loss: LossKind,
    pub uncertainty: String,
    pub metrics: MetricsReport,
}

fn metrics_csv(r: &EvalReport) -> String {
    let m = &r.metrics;
    let mut s = String::from("metric,value\n");
    let rows: [(&str, String); 10] = [
        ("n_all", m.n_all.to_string()),
        ("n_front180", m.n_front180.to_string()),
        ("n_frontfacing", m.n_frontfacing.to_string()),
        ("mean_err_all", m.mean_err_all.to_string()),
        ("mean_err_front180", m.mean_err_front180.to_string()),
        ("mean_err_frontfacing", m.mean_err_frontfacing.to_string()),
        ("uncert_spearman", opt(m.uncert_spearman)),
        ("coverage80", opt(m.coverage80)),
        ("coverage80_joint", opt(m.coverage80_joint)),
        ("uncertainty", r.uncertainty.clone()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

pub fn eval(a: EvalArgs, seed: Option<u64>) -> CliResult {
    if !(a.bin_deg > 0.0 && a.bin_deg <= 360.0) {
        return Err(config_err(anyhow!("--bin-deg must lie in (0, 360]")));
    }
    let (params, _) = load_checkpoint(&a.checkpoint)?;
    let split = load_split(&resolve_split(&a.data, TEST_FILE), params.arch.window)?;
    let gts = split.targets();
    let (preds, uncertainty) = if params.has_sigma() {
        (predict_split(&params, &split)?, "quantile")
    } else if a.mc_samples > 1 {
        (mc_dropout_split(&params, &split, a.mc_samples, seed.unwrap_or(0))?, "mc_dropout")
    } else {
        (predict_split(&params, &split)?, "none")
    };
    let metrics = evaluate_predictions(&preds, &gts, a.bin_deg)?;
    let report = EvalReport { model: params.kind, loss: params.loss, uncertainty: uncertainty.into(), metrics };
    write_text(&a.report, &metrics_csv(&report))?;
    write_json(&a.report.with_extension("json"), &report)?;
    if let Some(dir) = &a.plots {
        create_dir(dir)?;
        let bins = yaw_curve(&preds, &gts, a.bin_deg)?;
        write_yaw_curve_csv(&dir.join("yaw_curve.csv"), &bins)?;
        write_yaw_curve_svg(&dir.join("yaw_curve.svg"), &bins)?;
        export_distribution_map(&gts, &dir.join("gt_distribution.svg"))?;
        export_distribution_map(&preds, &dir.join("pred_distribution.svg"))?;
    }
    println!(
        "{}/{}: {} windows, mean error {:.3} deg",
        report.model, report.loss, report.metrics.n_all, report.metrics.mean_err_all
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct AdaptArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled source dataset directory.
    #[arg(long)]
    src: PathBuf,
    /// Target dataset directory; its training split is used without labels.
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, default_value = "adapted.json")]
    out: PathBuf,
    /// Before/after errors and per-epoch losses (JSON). Target labels are only read here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 60.0)]
    alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    disc_lr: f64,
    #[arg(long, default_value_t = 3.0)]
    grad_reversal_scale: f64,
}

#[derive(Serialize)]
struct AdaptReport {
    config: AdaptConfig,
    src_error_before: f64,
    src_error_after: f64,
    tgt_error_before: Option<f64>,
    tgt_error_after: Option<f64>,
    history: Vec<gazekit_core::adapt::AdaptEpoch>,
}

pub fn adapt(a: AdaptArgs, seed: Option<u64>) -> CliResult {
    let cfg = AdaptConfig {
        alpha: a.alpha,
        beta: a.beta,
        disc_lr: a.disc_lr,
        grad_reversal_scale: a.grad_reversal_scale,
        epochs: a.epochs,
        seed: seed.unwrap_or(0),
        lr: a.lr,
        batch_size: a.batch_size,
    };
    cfg.validate()?;
    let (params, train_cfg) = load_checkpoint(&a.checkpoint)?;
    let window = params.arch.window;
    let src = load_dataset(&a.src, window)?;
    let tgt = load_split(&a.tgt.join(TRAIN_FILE), window)?;
    let tgt_test = a.tgt.join(TEST_FILE);
    let tgt_test = if tgt_test.exists() { Some(load_split(&tgt_test, window)?) } else { None };
    let out = adapt_train(&params, &src, &tgt, &cfg)?;
    save_checkpoint(&a.out, &out.params, &train_cfg)?;
    let err = |p, s| evaluate_split(p, s).map(|(_, e)| e);
    let report = AdaptReport {
        config: cfg,
        src_error_before: err(&params, &src.test)?,
        src_error_after: err(&out.params, &src.test)?,
        tgt_error_before: tgt_test.as_ref().map(|t| err(&params, t)).transpose()?,
        tgt_error_after: tgt_test.as_ref().map(|t| err(&out.params, t)).transpose()?,
        history: out.history,
    };
    println!(
        "source {:.3} -> {:.3} deg, target {} -> {} deg",
        report.src_error_before,
        report.src_error_after,
        opt(report.tgt_error_before),
        opt(report.tgt_error_after)
    );
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AttentionArgs {
    /// Shelf grid (JSON); defaults apply to missing fields.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    shoppers: usize,
    /// Angular noise added to each gaze estimate, degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_deg: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn attention(a: AttentionArgs, seed: Option<u64>) -> CliResult {
    let grid: AttentionGrid = read_config(a.grid.as_deref())?;
    grid.frame()?;
    if !(a.noise_deg >= 0.0 && a.noise_deg.is_finite()) || a.shoppers == 0 {
        return Err(config_err(anyhow!("need shoppers > 0 and a finite non-negative --noise-deg")));
    }
    let seed = seed.unwrap_or(0);
    let shoppers = simulate_shoppers(&grid, a.shoppers, seed)?;
    let mut rng = rng::stream(seed, &[tag::ATTENTION, 1]);
    let sigma = a.noise_deg.to_radians();
    let mut rays = Vec::with_capacity(shoppers.len());
    for s in &shoppers {
        let est = to_spherical(rng::perturb_direction(&mut rng, from_spherical(s.gaze), sigma));
        rays.push(world_ray(s.eye, est)?);
    }
    let labels: Vec<(usize, usize)> = shoppers.iter().map(|s| s.label).collect();
    let map: AttentionMap = attention_map(&rays, &grid, Some(&labels))?;
    create_dir(&a.out)?;
    write_text(&a.out.join("attention.csv"), &map.to_csv())?;
    write_text(&a.out.join("attention.svg"), &attention_svg(&map))?;
    write_json(&a.out.join("attention.json"), &map)?;
    println!("{} hits, {} misses, accuracy {}", map.hits, map.misses, opt(map.accuracy));
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON reports written by `eval`.
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "summary.csv")]
    out: PathBuf,
}

pub fn report(a: ReportArgs) -> CliResult {
    let mut csv = String::from(
        "name,model,loss,uncertainty,n,mean_err_all,mean_err_front180,mean_err_frontfacing,uncert_spearman,coverage80\n",
    );
    for p in &a.inputs {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(runtime_err)?;
        let r: EvalReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display())).map_err(config_err)?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let m = &r.metrics;
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.loss,
            r.uncertainty,
            m.n_all,
            m.mean_err_all,
            m.mean_err_front180,
            m.mean_err_frontfacing,
            opt(m.uncert_spearman),
            opt(m.coverage80)
        );
    }
    write_text(&a.out, &csv)?;
    println!("summarised {} reports", a.inputs.len());
    Ok(())
}
