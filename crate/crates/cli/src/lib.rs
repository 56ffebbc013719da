//! Reproducible command-line pipelines over labeled point clouds.
//!
//! Every subcommand is a pure function of its flags, input files and seed,
//! and writes a JSON echo of its resolved configuration next to its output.

pub mod args;
pub mod exit;
pub mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pcgen_core::{read_lpc, read_set, write_lpc, write_set, PointCloudSet, SetFormat};
use pcgen_metrics::{
    evaluate_from_matrices, evaluate_sets, format_percent, DistanceKind, DistanceMatrix, EvalMatrices, EvalOptions,
    MatrixOptions, MetricName, MetricReport, SnapOptions, DEFAULT_EMD_CAP, TOOL_VERSION,
};
use pcgen_model::{edit, generate, EditRequest, LatentModel, LossCurve, SampleOptions, ScheduleConfig};
use pcgen_synth::{recombine_attack, split_set, synth_set, Alignment, AttackConfig, Family, ShapeFamilyConfig};
use serde::Serialize;

use args::*;
use exit::usage;
use pipeline::{train_diffusion_stage, train_vae_stage, DiffusionStage, VaeStage};

pub use exit::exit_code;

/// Name of the configuration echo written into output directories.
pub const ECHO_FILE: &str = "config.json";

struct Ctx {
    seed: Option<u64>,
    threads: usize,
    output: Option<PathBuf>,
}

impl Ctx {
    fn output(&self) -> Result<&Path> {
        self.output.as_deref().ok_or_else(|| usage("this command needs --output"))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Serialize)]
struct Echo<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    args: &'a A,
    resolved: R,
}

fn echo<A: Serialize, R: Serialize>(command: &str, seed: u64, args: &A, resolved: R) -> serde_json::Value {
    serde_json::to_value(Echo { command, version: TOOL_VERSION, seed, args, resolved }).expect("echo serializes")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `model.slnk` becomes `model.<suffix>`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn set_format(binary: bool) -> SetFormat {
    if binary {
        SetFormat::Binary
    } else {
        SetFormat::Text
    }
}

fn load_set(path: &Path) -> Result<PointCloudSet> {
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    read_set(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path, needs_diffusion: bool) -> Result<LatentModel> {
    if !path.is_file() {
        return Err(usage(format!("missing checkpoint {}", path.display())));
    }
    let model = LatentModel::load(path).with_context(|| format!("loading {}", path.display()))?;
    if needs_diffusion && model.diffusion.is_none() {
        return Err(usage(format!("{} is a stage-one checkpoint; run train-diffusion first", path.display())));
    }
    Ok(model)
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn check_fraction(semi: &SemiArgs) -> Result<()> {
    if let Some(f) = semi.labeled_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(usage(format!("--labeled-fraction {f} outside [0, 1]")));
        }
    }
    Ok(())
}

fn curve_summary(curve: &LossCurve) -> String {
    let first = curve.rows.first().cloned().unwrap_or_default();
    let last = curve.rows.last().cloned().unwrap_or_default();
    curve
        .columns
        .iter()
        .enumerate()
        .map(|(k, c)| format!("{c} {:.4e} -> {:.4e}", first[k], last[k]))
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let out = ctx.output()?;
    let mut cfg = match &a.config {
        Some(path) => ShapeFamilyConfig::load(path)?,
        None => {
            let family = match a.family {
                FamilyArg::StickBall => Family::StickBall,
                FamilyArg::WingedBody => Family::WingedBody,
            };
            let parts = family.part_names().len();
            let per_part = (0..parts).map(|p| a.points / parts + usize::from(p < a.points % parts)).collect();
            let mut cfg = ShapeFamilyConfig::new(family, a.dim, per_part, 0);
            if let Some(rho) = a.correlation {
                cfg.correlation = rho;
            }
            cfg
        }
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let set = synth_set(&cfg, a.count)?;
    write_set(&set, out, set_format(a.binary))?;
    write_json(&out.join(ECHO_FILE), &echo("synth", cfg.seed, a, &cfg))?;
    println!("wrote {} clouds to {}", set.len(), out.display());
    Ok(())
}

fn cmd_attack(ctx: &Ctx, a: &AttackArgs) -> Result<()> {
    let out = ctx.output()?;
    let mut cfg = match &a.config {
        Some(path) => AttackConfig::load(path)?,
        None => {
            let mode = match a.mode {
                AlignmentArg::None => Alignment::None,
                AlignmentArg::CentroidSnap => Alignment::CentroidSnap,
            };
            let mut cfg = AttackConfig::new(mode, a.count, 0);
            cfg.unique_per_part = a.unique_per_part;
            cfg.distinct_donors = a.distinct_donors;
            if let Some(f) = a.contact_fraction {
                cfg.contact_fraction = f;
            }
            cfg
        }
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if let Some(d) = &a.donors {
        cfg.donors = Some(d.clone());
    }
    let donors_path = cfg.donors.clone().ok_or_else(|| usage("attack needs --donors"))?;
    let donors = load_set(&donors_path)?;
    let set = recombine_attack(&donors, &cfg)?;
    write_set(&set, out, set_format(a.binary))?;
    write_json(&out.join(ECHO_FILE), &echo("attack", cfg.seed, a, &cfg))?;
    println!("wrote {} attack clouds to {}", set.len(), out.display());
    Ok(())
}

fn cmd_split(ctx: &Ctx, a: &SplitArgs) -> Result<()> {
    let out = ctx.output()?;
    let set = load_set(&a.input)?;
    let (train, test) = split_set(&set, a.fraction, ctx.seed())?;
    write_set(&train, out.join("train"), SetFormat::Text)?;
    write_set(&test, out.join("test"), SetFormat::Text)?;
    write_json(&out.join(ECHO_FILE), &echo("split", ctx.seed(), a, serde_json::json!({})))?;
    println!("split {} clouds into {} train and {} test", set.len(), train.len(), test.len());
    Ok(())
}

fn cmd_train_vae(ctx: &Ctx, a: &TrainVaeArgs) -> Result<()> {
    let out = ctx.output()?;
    check_fraction(&a.semi)?;
    let mut stage: VaeStage = match &a.config {
        Some(path) => read_config(path)?,
        None => VaeStage::default(),
    };
    let t = &mut stage.train;
    if let Some(seed) = ctx.seed {
        t.seed = seed;
    }
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch = a.batch.unwrap_or(t.batch);
    if a.semi.semi_supervised {
        t.semi_supervised = true;
        t.labeled_fraction = a.semi.labeled_fraction.unwrap_or(t.labeled_fraction);
    }
    stage.d_z = a.d_z.unwrap_or(stage.d_z);
    stage.d_h = a.d_h.unwrap_or(stage.d_h);
    stage.hidden = a.hidden.unwrap_or(stage.hidden);

    let set = load_set(&a.data)?;
    let (model, curve) = train_vae_stage(&set, &stage)?;
    model.save(out)?;
    std::fs::write(sidecar(out, "curves.csv"), curve.to_csv())?;
    let resolved = serde_json::json!({ "stage": stage, "checkpoint_hash": model.hash()? });
    write_json(&sidecar(out, "config.json"), &echo("train-vae", stage.train.seed, a, resolved))?;
    println!("vae: {}", curve_summary(&curve));
    Ok(())
}

fn cmd_train_diffusion(ctx: &Ctx, a: &TrainDiffusionArgs) -> Result<()> {
    let out = ctx.output()?;
    check_fraction(&a.semi)?;
    let model = load_model(&a.checkpoint, false)?;
    let mut stage: DiffusionStage = match &a.config {
        Some(path) => read_config(path)?,
        None => DiffusionStage::default(),
    };
    let t = &mut stage.train;
    if let Some(seed) = ctx.seed {
        t.seed = seed;
    }
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch = a.batch.unwrap_or(t.batch);
    t.lambda_seg = a.lambda_seg.unwrap_or(t.lambda_seg);
    if a.semi.semi_supervised {
        t.semi_supervised = true;
        t.labeled_fraction = a.semi.labeled_fraction.unwrap_or(t.labeled_fraction);
    }
    if let Some(steps) = a.steps {
        stage.model.schedule = ScheduleConfig::scaled(steps);
    }
    if let Some(h) = a.hidden {
        stage.model.point_hidden = h;
        stage.model.global_hidden = h;
    }

    let set = load_set(&a.data)?;
    if set.vocab() != &model.vocab {
        return Err(usage("training set vocabulary differs from the checkpoint's"));
    }
    let source_hash = model.hash()?;
    let (model, curve) = train_diffusion_stage(model, &set, &stage)?;
    model.save(out)?;
    std::fs::write(sidecar(out, "curves.csv"), curve.to_csv())?;
    let resolved = serde_json::json!({
        "stage": stage,
        "stage_one_hash": source_hash,
        "checkpoint_hash": model.hash()?,
    });
    write_json(&sidecar(out, "config.json"), &echo("train-diffusion", stage.train.seed, a, resolved))?;
    println!("diffusion: {}", curve_summary(&curve));
    Ok(())
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("building the thread pool")
}

fn cmd_generate(ctx: &Ctx, a: &GenerateArgs) -> Result<()> {
    let out = ctx.output()?;
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    if !(0.0..=1.0).contains(&a.ema_alpha) {
        return Err(usage(format!("--ema-alpha {} outside [0, 1]", a.ema_alpha)));
    }
    let model = load_model(&a.checkpoint, true)?;
    let opts = SampleOptions { ema_alpha: a.ema_alpha, soft_labels: a.soft_labels };
    let seed = ctx.seed();
    let set = thread_pool(ctx.threads)?.install(|| generate(&model, a.n, a.count, seed, opts))?;
    write_set(&set, out, set_format(a.binary))?;
    let resolved = serde_json::json!({ "sample": opts, "checkpoint_hash": model.hash()? });
    write_json(&out.join(ECHO_FILE), &echo("generate", seed, a, resolved))?;
    println!("wrote {} generated clouds to {}", set.len(), out.display());
    Ok(())
}

fn resolve_part(model: &LatentModel, part: &str) -> Result<u16> {
    let names = model.vocab.names();
    if let Some(i) = names.iter().position(|n| n == part) {
        return Ok(i as u16);
    }
    match part.parse::<u16>() {
        Ok(i) if (i as usize) < names.len() => Ok(i),
        _ => Err(usage(format!("unknown part {part:?}; parts are {names:?}"))),
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    seed: u64,
    tau: usize,
    frozen_part: u16,
    frozen_part_name: &'a str,
    checkpoint_hash: String,
    input: &'a Path,
    frozen_points: usize,
    config: serde_json::Value,
}

fn cmd_edit(ctx: &Ctx, a: &EditArgs) -> Result<()> {
    let out = ctx.output()?;
    if !(0.0..=1.0).contains(&a.ema_alpha) {
        return Err(usage(format!("--ema-alpha {} outside [0, 1]", a.ema_alpha)));
    }
    let model = load_model(&a.checkpoint, a.tau > 0)?;
    let part = resolve_part(&model, &a.freeze_part)?;
    if !a.input.is_file() {
        return Err(usage(format!("{} does not exist", a.input.display())));
    }
    let cloud = read_lpc(&a.input)?;
    let req = EditRequest { frozen_part: part, tau: a.tau, seed: ctx.seed(), ema_alpha: a.ema_alpha };
    let result = edit(&model, &cloud, &req)?;
    write_lpc(&result.cloud, out)?;
    let record = Provenance {
        seed: req.seed,
        tau: req.tau,
        frozen_part: part,
        frozen_part_name: &model.vocab.names()[part as usize],
        checkpoint_hash: model.hash()?,
        input: &a.input,
        frozen_points: result.frozen.len(),
        config: echo("edit", req.seed, a, &req),
    };
    let path = a.provenance.clone().unwrap_or_else(|| sidecar(out, "json"));
    write_json(&path, &record)?;
    println!("edited {} points, kept {} of part {}", cloud.len(), result.frozen.len(), record.frozen_part_name);
    Ok(())
}

fn cmd_reconstruct(ctx: &Ctx, a: &ReconstructArgs) -> Result<()> {
    let out = ctx.output()?;
    let model = load_model(&a.checkpoint, false)?;
    if !a.input.is_file() {
        return Err(usage(format!("{} does not exist", a.input.display())));
    }
    let cloud = read_lpc(&a.input)?;
    write_lpc(&model.reconstruct(&cloud)?, out)?;
    let resolved = serde_json::json!({ "checkpoint_hash": model.hash()? });
    write_json(&sidecar(out, "json"), &echo("reconstruct", ctx.seed(), a, resolved))?;
    Ok(())
}

const MATRIX_FILES: [&str; 3] = ["rr.dmat", "rg.dmat", "gg.dmat"];

fn save_matrices(dir: &Path, m: &EvalMatrices) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (file, block) in MATRIX_FILES.iter().zip([&m.rr, &m.rg, &m.gg]) {
        let path = dir.join(file);
        std::fs::write(&path, block.to_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_matrices(dir: &Path) -> Result<EvalMatrices> {
    let mut blocks = Vec::new();
    for file in MATRIX_FILES {
        let path = dir.join(file);
        if !path.is_file() {
            return Err(usage(format!("missing distance block {}", path.display())));
        }
        let bytes = std::fs::read(&path)?;
        blocks.push(DistanceMatrix::from_bytes(&bytes).with_context(|| format!("reading {}", path.display()))?);
    }
    let gg = blocks.pop().unwrap();
    let rg = blocks.pop().unwrap();
    let rr = blocks.pop().unwrap();
    Ok(EvalMatrices { rr, rg, gg })
}

/// One table line per report; fractions as percentages with two decimals.
pub fn render_reports(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let value = if r.metric.is_fraction() { format!("{}%", format_percent(r.value.0)) } else { r.value.to_string() };
        out.push_str(&format!("{:<7} {:<8} {value}\n", r.metric.as_str(), r.distance));
    }
    out
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: serde_json::Value,
    reports: &'a [MetricReport],
}

fn cmd_evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let metrics = a
        .metrics
        .iter()
        .map(|m| m.trim().parse::<MetricName>().map_err(|_| usage(format!("unknown metric {m:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if metrics.is_empty() {
        return Err(usage("no metrics requested"));
    }
    let kind: DistanceKind = a.distance.parse().map_err(|_| usage(format!("unknown distance {:?}", a.distance)))?;
    if matches!(kind, DistanceKind::PartCd(_)) {
        return Err(usage("--distance must be cd, emd or pcd"));
    }
    let seed = ctx.seed();
    let reports = match &a.from_matrices {
        Some(dir) => {
            if let Some(m) = metrics.iter().find(|m| !matches!(m, MetricName::OneNna | MetricName::Cov | MetricName::Mmd)) {
                return Err(usage(format!("{m} cannot be recomputed from saved distance blocks")));
            }
            let m = load_matrices(dir)?;
            if metrics.contains(&MetricName::OneNna) && m.rr.rows == 0 {
                return Err(usage("saved blocks lack the self-distance blocks needed by 1nna"));
            }
            evaluate_from_matrices(&m, &metrics, Some(seed))?
        }
        None => {
            let real = load_set(a.real.as_deref().expect("required by clap"))?;
            let gen = load_set(a.generated.as_deref().expect("required by clap"))?;
            if ctx.threads == 0 {
                return Err(usage("--threads must be positive"));
            }
            let opts = EvalOptions {
                matrix: MatrixOptions { threads: ctx.threads, emd_cap: a.emd_cap.unwrap_or(DEFAULT_EMD_CAP) },
                snap: SnapOptions::default(),
                seed: Some(seed),
            };
            let (reports, matrices) = evaluate_sets(&real, &gen, kind, &metrics, opts)?;
            if let Some(dir) = &a.save_matrices {
                let m = matrices.ok_or_else(|| usage("--save-matrices needs one of 1nna, cov or mmd"))?;
                save_matrices(dir, &m)?;
            }
            reports
        }
    };
    print!("{}", render_reports(&reports));
    if let Some(out) = &ctx.output {
        let file = ReportFile { config: echo("evaluate", seed, a, serde_json::json!({})), reports: &reports };
        write_json(out, &file)?;
    }
    Ok(())
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(usage("--threads must be positive"));
    }
    let ctx = Ctx { seed: cli.seed, threads: cli.threads, output: cli.output };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Attack(a) => cmd_attack(&ctx, a),
        Command::Split(a) => cmd_split(&ctx, a),
        Command::TrainVae(a) => cmd_train_vae(&ctx, a),
        Command::TrainDiffusion(a) => cmd_train_diffusion(&ctx, a),
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Edit(a) => cmd_edit(&ctx, a),
        Command::Reconstruct(a) => cmd_reconstruct(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
    }
}
