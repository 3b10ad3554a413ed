//! Command-line front end. [`dispatch`] returns the process exit code:
//! 0 success, 1 verification or numerical failure, 2 usage error, 3 I/O or format error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    analysis_inputs, analysis_rows, norm_minimizer, verify_closed_forms, AnalysisSettings, NoiseSource,
    VerifySettings, ANALYSIS_HEADER,
};
use crate::ddim::{invert, oracle_denoiser, Denoiser, LinearDenoiser, PredictionMode, ZeroDenoiser};
use crate::error::{param_err, Error, Result};
use crate::geometry::{canonical, render_sequence, Intrinsics, TrajectoryMagnitudes, TrajectorySpec};
use crate::io::{self, csv_string, raster};
use crate::pipeline::{ablation_sweep, run_dvs, AblationAxis, PipelineConfig};
use crate::schedule::{make_schedule, strength_to_index, BetaKind, NoiseSchedule};
use crate::slm::{modulate, ModulationInputs, ModulationMode};
use crate::tensor::{stats, Dims, Rng, Tensor};

pub const THREADS_ENV: &str = "LATENT_DOLLY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "latent-dolly", version, about = "Noise initialization toolkit for camera-controlled video diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump a noise schedule as CSV (t, beta, alpha_bar, snr).
    Schedule(ScheduleArgs),
    /// Check the closed forms against the literal recursion on random cases.
    KrnrVerify(VerifyArgs),
    /// Sweep k and emit cosine / moment / norm curves as CSV.
    Analyze(AnalyzeArgs),
    /// DDIM-invert a latent archive.
    Invert(InvertArgs),
    /// Reproject an RGB-D sequence along a camera trajectory.
    Render(RenderArgs),
    /// Apply stochastic latent modulation to archived latents.
    Slm(SlmArgs),
    /// Toy end-to-end pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    ScaledLinear,
}

#[derive(Debug, Args)]
struct ScheduleFlags {
    #[arg(long, default_value_t = 1000)]
    timesteps: usize,
    #[arg(long, default_value_t = 0.00085)]
    beta_start: f64,
    #[arg(long, default_value_t = 0.012)]
    beta_end: f64,
    #[arg(long, value_enum, default_value_t = KindArg::ScaledLinear)]
    beta_kind: KindArg,
}

impl ScheduleFlags {
    fn build(&self, zero_terminal: bool) -> Result<NoiseSchedule> {
        let kind = match self.beta_kind {
            KindArg::Linear => BetaKind::Linear,
            KindArg::ScaledLinear => BetaKind::ScaledLinear,
        };
        let s = make_schedule(self.timesteps, self.beta_start, self.beta_end, kind)?;
        if zero_terminal {
            s.rescale_zero_terminal_snr()
        } else {
            Ok(s)
        }
    }
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[command(flatten)]
    schedule: ScheduleFlags,
    /// Rescale to zero terminal SNR.
    #[arg(long)]
    zero_terminal: bool,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 64)]
    k_max: u32,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, default_value_t = 4096)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance on closed form vs recursion (relative, max-norm).
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Tolerance on continuous vs discrete closed form.
    #[arg(long, default_value_t = 1e-12)]
    tol_continuous: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Curve {
    Similarity,
    Moments,
    Norms,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    Gaussian,
    Inverted,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    curve: Curve,
    /// Depths as `a:b` (inclusive) or a comma list.
    #[arg(long, default_value = "1:20")]
    k: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Latent dims B,F,C,H,W.
    #[arg(long, default_value = "1,4,16,60,90")]
    dims: String,
    /// Timestep at which ᾱ is read.
    #[arg(long, default_value_t = 950)]
    t: usize,
    #[arg(long, value_enum, default_value_t = SourceArg::Gaussian)]
    source: SourceArg,
    /// Multiplier on Gaussian ε_inv.
    #[arg(long, default_value_t = 1.0)]
    eps_scale: f64,
    /// Inversion steps for `--source inverted`.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// Keep the x0 component of ε_inv.
    #[arg(long)]
    no_orthogonalize: bool,
    /// Read ᾱ from the positive schedule instead of the zero-terminal one.
    #[arg(long)]
    positive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script plotting the CSV.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    V,
    Eps,
}

impl From<ModeArg> for PredictionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::V => PredictionMode::V,
            ModeArg::Eps => PredictionMode::Eps,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DenoiserArg {
    Oracle,
    Zero,
    Linear,
}

#[derive(Debug, Args)]
struct InvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0.95)]
    strength: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::V)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = DenoiserArg::Oracle)]
    denoiser: DenoiserArg,
    /// Seeds the noise the oracle denoiser assumes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Invert on the zero-terminal schedule (collapses if the plan reaches ᾱ = 0).
    #[arg(long)]
    zero_terminal: bool,
    #[command(flatten)]
    schedule: ScheduleFlags,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Directory of P6 frames, read in file-name order.
    #[arg(long)]
    rgb: PathBuf,
    /// Directory of depth rasters (F32R or 16-bit PGM), read in file-name order.
    #[arg(long)]
    depth: PathBuf,
    /// Canonical trajectory name or a JSON trajectory file.
    #[arg(long)]
    traj: String,
    /// fx,fy,cx,cy in pixels.
    #[arg(long)]
    intrinsics: String,
    /// Multiplier for 16-bit PGM depth; defaults to `scale` in the depth directory's manifest.json, else 1.
    #[arg(long)]
    depth_scale: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SlmArgs {
    #[arg(long)]
    latent: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    /// Occlusion mask archive (1 = occluded).
    #[arg(long)]
    mask: PathBuf,
    /// Depth-class mask archive (1 = eligible source).
    #[arg(long)]
    depthmask: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permute individual elements instead of whole channel vectors.
    #[arg(long)]
    per_element: bool,
    #[arg(long)]
    out_latent: PathBuf,
    #[arg(long)]
    out_noise: PathBuf,
}

#[derive(Debug, Subcommand)]
enum PipelineCommand {
    /// One full run; prints the metrics JSON.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the run over values of k or δ; prints CSV.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// `a:b` (inclusive) or a comma list.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    K,
    Delta,
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Collapse(_)
        | Error::DegenerateInput(_)
        | Error::DegenerateSchedule(_)
        | Error::NoVisibleSource { .. }
        | Error::EmptyCloud
        | Error::DivisionByZero(_) => 1,
        Error::Dimension(_) | Error::Parameter(_) | Error::Index { .. } | Error::Config { .. } => 2,
        Error::Format { .. } | Error::Truncation { .. } | Error::UnsupportedFormat(_) | Error::Io { .. } => 3,
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// A check ran and did not meet its tolerance.
    CheckFailed,
}

pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match run(cli.command) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            exit_code(&e)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists, e.g. when called twice in-process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// `a:b` inclusive integer range or a comma list of numbers.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("cannot parse value list `{spec}`"));
    if let Some((a, b)) = spec.split_once(':') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn parse_dims(spec: &str) -> Result<Dims> {
    let axes: Vec<usize> = spec
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("cannot parse dims `{spec}`")))?;
    let axes: [usize; 5] = axes
        .try_into()
        .map_err(|_| Error::Parameter(format!("dims need five axes, got `{spec}`")))?;
    Dims::from_array(axes)
}

fn parse_intrinsics(spec: &str) -> Result<Intrinsics> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("cannot parse intrinsics `{spec}`")))?;
    match v.as_slice() {
        [fx, fy, cx, cy] => Intrinsics::new(*fx, *fy, *cx, *cy),
        _ => param_err(format!("intrinsics need fx,fy,cx,cy, got `{spec}`")),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Schedule(a) => cmd_schedule(a),
        Command::KrnrVerify(a) => cmd_verify(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Invert(a) => cmd_invert(a),
        Command::Render(a) => cmd_render(a),
        Command::Slm(a) => cmd_slm(a),
        Command::Pipeline(p) => cmd_pipeline(p),
    }
}

fn cmd_schedule(a: ScheduleArgs) -> Result<Outcome> {
    let s = a.schedule.build(a.zero_terminal)?;
    let rows = (1..=s.len())
        .map(|t| Ok(vec![t as f64, s.beta(t)?, s.alpha_bar(t)?, s.snr(t)?]))
        .collect::<Result<Vec<_>>>()?;
    emit(a.out.as_deref(), &csv_string(&["t", "beta", "alpha_bar", "snr"], &rows)?)?;
    Ok(Outcome::Ok)
}

fn cmd_verify(a: VerifyArgs) -> Result<Outcome> {
    if !(a.tol > 0.0 && a.tol_continuous > 0.0) {
        return param_err("tolerances must be positive");
    }
    let report = verify_closed_forms(&VerifySettings {
        cases: a.cases,
        k_max: a.k_max,
        dim: a.dim,
        seed: a.seed,
        ..VerifySettings::default()
    })?;
    let ok_closed = report.max_rel_closed <= a.tol;
    let ok_cont = report.max_rel_continuous <= a.tol_continuous;
    println!(
        "closed form vs recursion: max rel error {:e} (tol {:e}) {}",
        report.max_rel_closed,
        a.tol,
        if ok_closed { "ok" } else { "EXCEEDED" }
    );
    println!(
        "continuous vs discrete:   max rel error {:e} (tol {:e}) {}",
        report.max_rel_continuous,
        a.tol_continuous,
        if ok_cont { "ok" } else { "EXCEEDED" }
    );
    Ok(if ok_closed && ok_cont {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

fn gnuplot_script(csv_path: &Path, curve: Curve) -> String {
    let (title, columns): (&str, &[(usize, &str)]) = match curve {
        Curve::Similarity => ("cosine(eps_k, x0)", &[(2, "cosine")]),
        Curve::Moments => ("moments of eps_k", &[(3, "mean"), (4, "variance")]),
        Curve::Norms => ("norm deviation of eps_k", &[(5, "norm_deviation")]),
    };
    let plots: Vec<String> = columns
        .iter()
        .map(|(c, name)| format!("'{}' using 1:{c} with linespoints title '{name}'", csv_path.display()))
        .collect();
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nset xlabel 'k'\nplot {}\n",
        plots.join(", \\\n     ")
    )
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<Outcome> {
    let ks = parse_values(&a.k)?;
    if ks.iter().any(|&k| !(k > 0.0)) {
        return param_err("k values must be positive");
    }
    let dims = parse_dims(&a.dims)?;
    if a.gnuplot.is_some() && a.out.is_none() {
        return param_err("--gnuplot needs --out so the script can reference the CSV");
    }
    let source = match a.source {
        SourceArg::Gaussian => NoiseSource::Gaussian { scale: a.eps_scale },
        SourceArg::Inverted => NoiseSource::Inverted { steps: a.steps },
    };
    let inputs = analysis_inputs(&AnalysisSettings {
        dims,
        seed: a.seed,
        t: a.t,
        source,
        orthogonalize: !a.no_orthogonalize,
        zero_terminal: !a.positive,
    })?;
    let rows = analysis_rows(&inputs, &ks)?;
    let table: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    emit(a.out.as_deref(), &csv_string(&ANALYSIS_HEADER, &table)?)?;
    if let (Some(script), Some(csv)) = (&a.gnuplot, &a.out) {
        write_text(script, &gnuplot_script(csv, a.curve))?;
    }
    if matches!(a.curve, Curve::Norms) {
        if let Some(best) = norm_minimizer(&rows) {
            eprintln!("minimum norm deviation {:.6} at k = {}", best.norm_deviation, best.k);
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_invert(a: InvertArgs) -> Result<Outcome> {
    let schedule = a.schedule.build(a.zero_terminal)?;
    let t = strength_to_index(a.strength, schedule.len())?;
    if a.steps == 0 {
        return param_err("--steps must be positive");
    }
    let x0: Tensor<f64> = io::read_latent(&a.input)?.cast();
    let mode: PredictionMode = a.mode.into();
    let den: Box<dyn Denoiser<f64>> = match a.denoiser {
        DenoiserArg::Oracle => {
            let eps = Tensor::<f64>::gaussian(x0.dims(), &mut Rng::for_purpose(a.seed, "invert/eps"));
            Box::new(oracle_denoiser(x0.clone(), eps, mode)?)
        }
        DenoiserArg::Zero => Box::new(ZeroDenoiser),
        DenoiserArg::Linear => {
            let s = stats(&x0);
            Box::new(LinearDenoiser {
                mean: s.mean,
                variance: s.variance,
                mode,
            })
        }
    };
    let eps_inv = invert(&x0, &schedule, a.steps, den.as_ref(), t)?;
    io::write_latent(&a.output, &eps_inv.cast())?;
    Ok(Outcome::Ok)
}

fn sorted_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && keep(p))
        .collect();
    files.sort();
    Ok(files)
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn resolve_trajectory(spec: &str) -> Result<TrajectorySpec> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: TrajectorySpec = io::parse_config(&text)?;
        t.validate()?;
        Ok(t)
    } else {
        canonical(spec, &TrajectoryMagnitudes::default())
    }
}

fn manifest_scale(dir: &Path) -> Result<f64> {
    let p = dir.join("manifest.json");
    if !p.exists() {
        return Ok(1.0);
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config {
        key: String::new(),
        msg: e.to_string(),
    })?;
    match v.get("scale") {
        None => Ok(1.0),
        Some(s) => s.as_f64().ok_or_else(|| Error::Config {
            key: "scale".into(),
            msg: "must be a number".into(),
        }),
    }
}

fn cmd_render(a: RenderArgs) -> Result<Outcome> {
    let k = parse_intrinsics(&a.intrinsics)?;
    let trajectory = resolve_trajectory(&a.traj)?;
    if let Some(s) = a.depth_scale {
        if !(s > 0.0 && s.is_finite()) {
            return param_err("--depth-scale must be positive");
        }
    }
    let scale = match a.depth_scale {
        Some(s) => s,
        None => manifest_scale(&a.depth)?,
    };
    let rgb_files = sorted_files(&a.rgb, |p| has_ext(p, &["ppm"]))?;
    let depth_files = sorted_files(&a.depth, |p| has_ext(p, &["f32r", "pgm"]))?;
    if rgb_files.is_empty() {
        return param_err(format!("no .ppm frames in {}", a.rgb.display()));
    }
    if rgb_files.len() != depth_files.len() {
        return param_err(format!("{} frames but {} depth maps", rgb_files.len(), depth_files.len()));
    }
    let frames = rgb_files.iter().map(raster::read_image_ppm).collect::<Result<Vec<_>>>()?;
    let depths = depth_files
        .iter()
        .map(|p| raster::read_depth(p, scale))
        .collect::<Result<Vec<_>>>()?;
    k.check_bounds(frames[0].height(), frames[0].width())?;
    let seq = render_sequence(&frames, &depths, &k, &trajectory)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut entries = Vec::with_capacity(seq.frames.len());
    for (i, (img, mask)) in seq.frames.iter().zip(&seq.masks).enumerate() {
        let frame = format!("frame_{i:03}.ppm");
        let mask_name = format!("mask_{i:03}.pgm");
        raster::write_image_ppm(a.out.join(&frame), img)?;
        raster::write_mask_pgm(a.out.join(&mask_name), mask, 0)?;
        entries.push(serde_json::json!({
            "frame": frame,
            "mask": mask_name,
            "hole_fraction": mask.fraction(),
        }));
    }
    let manifest = serde_json::json!({
        "frames": seq.frames.len(),
        "height": frames[0].height(),
        "width": frames[0].width(),
        "intrinsics": k,
        "trajectory": trajectory,
        "depth_scale": scale,
        "outputs": entries,
    });
    write_text(
        &a.out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("json") + "\n"),
    )?;
    Ok(Outcome::Ok)
}

fn cmd_slm(a: SlmArgs) -> Result<Outcome> {
    let inputs = ModulationInputs {
        x0: io::read_latent(&a.latent)?,
        eps_inv: io::read_latent(&a.noise)?,
        m: io::read_mask(&a.mask)?,
        d: io::read_mask(&a.depthmask)?,
    };
    let mode = if a.per_element {
        ModulationMode::PerElement
    } else {
        ModulationMode::ChannelCoherent
    };
    let out = modulate(&inputs, &Rng::for_purpose(a.seed, "slm"), mode)?;
    io::write_latent(&a.out_latent, &out.x0)?;
    io::write_latent(&a.out_noise, &out.eps_inv)?;
    eprintln!("modulated {} positions", out.trace.len());
    Ok(Outcome::Ok)
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => io::read_config(p),
        None => {
            let c = PipelineConfig::default();
            c.validate()?;
            Ok(c)
        }
    }
}

fn cmd_pipeline(cmd: PipelineCommand) -> Result<Outcome> {
    match cmd {
        PipelineCommand::Run { config, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            let report = run_dvs(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(Outcome::Ok)
        }
        PipelineCommand::Ablate {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let values = parse_values(&values)?;
            let axis = match axis {
                AxisArg::K => AblationAxis::K,
                AxisArg::Delta => AblationAxis::Delta,
            };
            let table = ablation_sweep(&cfg, axis, &values)?;
            emit(out.as_deref(), &table.to_csv()?)?;
            Ok(Outcome::Ok)
        }
    }
}
