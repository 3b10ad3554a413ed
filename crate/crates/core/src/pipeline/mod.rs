//! Toy end-to-end run: scene, novel-view render, masks, toy encode, inversion,
//! latent modulation, recursive noise initialization, sampling and decode.

pub mod codec;
pub mod scene;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ddim::{invert, oracle_denoiser, sample, Denoiser, LinearDenoiser, PredictionMode, ZeroDenoiser};
use crate::error::{param_err, Error, Result};
use crate::geometry::{
    canonical, downsample_mask_to_latent, near_depth_mask, render_sequence, stack_masks, DepthMode, Image,
    Intrinsics, RenderedSequence, TrajectoryMagnitudes, TrajectorySpec,
};
use crate::io::{archive, csv, raster};
use crate::krnr::{adaptive_krnr, krnr_closed_continuous, krnr_coefficients, KrnrCoefficients};
use crate::schedule::{make_schedule, strength_to_index, BetaKind, NoiseSchedule};
use crate::slm::{modulate, ModulationInputs, ModulationMode, Modulated};
use crate::tensor::{cosine, norm_deviation, stats, BinaryMask, Element, LatentTensor, Rng, Tensor};

pub use codec::{latent_dims, psnr, ToyCodec};
pub use scene::{default_intrinsics, make_toy_scene, ToyScene, ToySceneKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_kind: BetaKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 1000,
            beta_start: 0.00085,
            beta_end: 0.012,
            beta_kind: BetaKind::ScaledLinear,
        }
    }
}

impl ScheduleConfig {
    pub fn positive(&self) -> Result<NoiseSchedule> {
        make_schedule(self.timesteps, self.beta_start, self.beta_end, self.beta_kind)
    }

    pub fn zero_terminal(&self) -> Result<NoiseSchedule> {
        self.positive()?.rescale_zero_terminal_snr()
    }
}

/// Noise handed to the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// AdaIN of depth-k noise onto depth-δ statistics.
    #[default]
    AdaptiveKrnr,
    /// Depth-k noise without rescaling.
    Krnr,
    /// The (modulated) inverted latent as is.
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    /// Knows the modulated clean latent exactly.
    #[default]
    Oracle,
    /// Gaussian-prior posterior mean fitted to the clean latent's global moments.
    Linear,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: ToySceneKind,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub scene_seed: u64,
    pub codec_seed: u64,
    /// Seeds the Gaussian noise the oracle inverts against.
    pub seed: u64,
    pub intrinsics: Option<Intrinsics>,
    /// Canonical trajectory name, or `identity`; ignored when `trajectory_spec` is set.
    pub trajectory: String,
    pub trajectory_spec: Option<TrajectorySpec>,
    pub magnitudes: TrajectoryMagnitudes,
    pub schedule: ScheduleConfig,
    pub k: f64,
    pub delta: u32,
    pub strength: f64,
    pub inversion_steps: usize,
    pub sampling_steps: usize,
    pub prediction: PredictionMode,
    pub denoiser: DenoiserKind,
    pub init: InitMode,
    pub slm: bool,
    pub slm_seed: u64,
    pub modulation: ModulationMode,
    pub depth_mode: DepthMode,
    pub depth_quantile: f64,
    pub mask_threshold: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: ToySceneKind::TwoLayerParallax,
            frames: 16,
            height: 64,
            width: 64,
            scene_seed: 0,
            codec_seed: 0,
            seed: 0,
            intrinsics: None,
            trajectory: "pan_right".into(),
            trajectory_spec: None,
            magnitudes: TrajectoryMagnitudes::default(),
            schedule: ScheduleConfig::default(),
            k: 10.0,
            delta: 3,
            strength: 0.95,
            inversion_steps: 50,
            sampling_steps: 30,
            prediction: PredictionMode::V,
            denoiser: DenoiserKind::Oracle,
            init: InitMode::AdaptiveKrnr,
            slm: true,
            slm_seed: 0,
            modulation: ModulationMode::ChannelCoherent,
            depth_mode: DepthMode::Background,
            depth_quantile: 0.2,
            mask_threshold: 0.5,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn trajectory_spec(&self) -> Result<TrajectorySpec> {
        match &self.trajectory_spec {
            Some(spec) => {
                spec.validate()?;
                Ok(*spec)
            }
            None => canonical(&self.trajectory, &self.magnitudes),
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        let k = self.intrinsics.unwrap_or_else(|| default_intrinsics(self.height, self.width));
        let k = Intrinsics::new(k.fx, k.fy, k.cx, k.cy)?;
        k.check_bounds(self.height, self.width)?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return param_err("frames, height and width must be positive");
        }
        latent_dims(self.frames, self.height, self.width)?;
        self.schedule.positive()?;
        self.trajectory_spec()?;
        self.intrinsics()?;
        if !(self.k > 0.0 && self.k.is_finite()) {
            return param_err(format!("k must be positive, got {}", self.k));
        }
        if self.init == InitMode::AdaptiveKrnr && (self.delta < 1 || self.delta as f64 > self.k.ceil()) {
            return param_err(format!("delta must lie in 1..=ceil(k), got {}", self.delta));
        }
        strength_to_index(self.strength, self.schedule.timesteps)?;
        if self.inversion_steps == 0 || self.sampling_steps == 0 {
            return param_err("step counts must be positive");
        }
        if !(self.depth_quantile > 0.0 && self.depth_quantile < 1.0) {
            return param_err(format!("depth_quantile must lie in (0, 1), got {}", self.depth_quantile));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold <= 1.0) {
            return param_err(format!("mask_threshold must lie in (0, 1], got {}", self.mask_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub pixel_hole_fraction: f64,
    pub latent_occluded_fraction: f64,
    pub latent_depth_fraction: f64,
    pub latent_source_fraction: f64,
    /// Frames whose rendered depth was constant (depth mask forced to ones).
    pub degenerate_depth_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrnrReport {
    pub init: InitMode,
    pub t: usize,
    pub alpha_bar: f64,
    pub k: f64,
    pub delta: u32,
    pub coefficients: KrnrCoefficients,
    pub delta_coefficients: KrnrCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub mean: f64,
    pub variance: f64,
    pub norm_deviation: f64,
    /// Cosine with the modulated clean latent; absent when that latent is zero.
    pub cosine_x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlmReport {
    pub enabled: bool,
    pub mode: ModulationMode,
    pub targets: usize,
    pub sources: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvsReport {
    pub status: String,
    pub scene: ToySceneKind,
    pub trajectory: TrajectorySpec,
    pub video_dims: [usize; 3],
    pub latent_dims: [usize; 5],
    /// Decoded output against the rendered novel view, over pixels that received content.
    pub psnr_visible: f64,
    /// Same region, codec round trip of the rendered view alone.
    pub psnr_codec_visible: f64,
    pub masks: MaskReport,
    pub krnr: KrnrReport,
    pub init_noise: NoiseReport,
    pub slm: SlmReport,
    pub inversion_t: usize,
    pub inversion_alpha_bar: f64,
    pub inversion_steps: usize,
    pub sampling_steps: usize,
    pub denoiser: DenoiserKind,
    pub prediction: PredictionMode,
}

/// Every intermediate of a run, for inspection and tests.
#[derive(Debug, Clone)]
pub struct DvsRun {
    pub report: DvsReport,
    pub scene: ToyScene,
    pub rendered: RenderedSequence,
    /// (1, F, 1, H, W), 1 = hole.
    pub pixel_mask: BinaryMask,
    /// Latent dims, 1 = occluded.
    pub latent_mask: BinaryMask,
    /// Latent dims, 1 = eligible depth class.
    pub depth_mask: BinaryMask,
    pub x0: LatentTensor,
    pub eps_inv: Tensor<f64>,
    pub modulated: Modulated<f64>,
    pub eps_init: Tensor<f64>,
    pub x0_hat: Tensor<f64>,
    pub decoded: Vec<Image>,
}

/// Writes artifacts as soon as they exist, so a failed run leaves what it had.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn open(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            for sub in ["rendered", "masks", "decoded"] {
                let p = d.join(sub);
                fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
            let marker = d.join(FAILURE_MARKER);
            if marker.exists() {
                fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            }
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    fn latent<T: Element>(&self, name: &str, t: &Tensor<T>) -> Result<()> {
        match &self.dir {
            Some(d) => archive::write_latent(d.join(name), &t.cast()),
            None => Ok(()),
        }
    }

    fn mask(&self, name: &str, m: &BinaryMask) -> Result<()> {
        match &self.dir {
            Some(d) => archive::write_mask(d.join(name), m),
            None => Ok(()),
        }
    }

    fn frames(&self, sub: &str, frames: &[Image]) -> Result<()> {
        if let Some(d) = &self.dir {
            for (i, f) in frames.iter().enumerate() {
                raster::write_image_ppm(d.join(sub).join(format!("frame_{i:03}.ppm")), f)?;
            }
        }
        Ok(())
    }

    fn pixel_masks(&self, m: &BinaryMask) -> Result<()> {
        if let Some(d) = &self.dir {
            for f in 0..m.dims().frames {
                raster::write_mask_pgm(d.join("masks").join(format!("mask_{f:03}.pgm")), m, f)?;
            }
        }
        Ok(())
    }

    fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<()> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            let text = serde_json::to_string_pretty(value).expect("report serializes");
            fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    fn fail(&self, err: &Error) {
        if let Some(d) = &self.dir {
            let body = serde_json::json!({ "status": "failed", "category": err.category(), "message": err.to_string() });
            // Best effort: the original error is what the caller needs to see.
            let _ = fs::write(d.join(FAILURE_MARKER), body.to_string() + "\n");
        }
    }
}

/// Written into the output directory when a run stops early.
pub const FAILURE_MARKER: &str = "FAILED.json";
pub const METRICS_FILE: &str = "metrics.json";

fn noise_report(eps: &Tensor<f64>, x0: &Tensor<f64>) -> NoiseReport {
    let s = stats(eps);
    NoiseReport {
        mean: s.mean,
        variance: s.variance,
        norm_deviation: norm_deviation(eps),
        cosine_x0: cosine(eps, x0).ok(),
    }
}

pub fn run_dvs(config: &PipelineConfig) -> Result<DvsReport> {
    Ok(run_dvs_full(config)?.report)
}

/// [`run_dvs`] keeping all intermediates. Artifacts go to `config.output_dir` when set.
pub fn run_dvs_full(config: &PipelineConfig) -> Result<DvsRun> {
    let sink = Sink::open(config.output_dir.as_deref())?;
    let result = run_inner(config, &sink);
    if let Err(e) = &result {
        sink.fail(e);
    }
    result
}

fn run_inner(cfg: &PipelineConfig, sink: &Sink) -> Result<DvsRun> {
    cfg.validate()?;
    let trajectory = cfg.trajectory_spec()?;
    let intrinsics = cfg.intrinsics()?;
    let scene = make_toy_scene(cfg.scene, cfg.frames, cfg.height, cfg.width, cfg.scene_seed)?;

    let rendered = render_sequence(&scene.frames, &scene.depths, &intrinsics, &trajectory)?;
    let pixel_mask = stack_masks(&rendered.masks)?;
    sink.frames("rendered", &rendered.frames)?;
    sink.pixel_masks(&pixel_mask)?;

    let mut depth_frames = Vec::with_capacity(cfg.frames);
    let mut degenerate = 0;
    for d in &rendered.depths {
        let m = near_depth_mask(d, cfg.depth_mode, cfg.depth_quantile)?;
        degenerate += m.degenerate as usize;
        depth_frames.push(m.mask);
    }
    let pixel_depth = stack_masks(&depth_frames)?;
    let channels = codec::LATENT_CHANNELS;
    let latent_mask =
        downsample_mask_to_latent(&pixel_mask, codec::SPATIAL, codec::TEMPORAL, cfg.mask_threshold, channels)?;
    let depth_mask =
        downsample_mask_to_latent(&pixel_depth, codec::SPATIAL, codec::TEMPORAL, cfg.mask_threshold, channels)?;
    sink.mask("latent_mask.krnr", &latent_mask)?;
    sink.mask("depth_mask.krnr", &depth_mask)?;

    let codec = ToyCodec::new(cfg.codec_seed);
    let x0 = codec.encode(&rendered.frames)?;
    sink.latent("x0.krnr", &x0)?;
    let dims = x0.dims();

    let inv_schedule = cfg.schedule.positive()?;
    let t = strength_to_index(cfg.strength, cfg.schedule.timesteps)?;
    let x0d: Tensor<f64> = x0.cast();
    let eps_true = Tensor::<f64>::gaussian(dims, &mut Rng::for_purpose(cfg.seed, "pipeline/eps"));
    let inverter = oracle_denoiser(x0d.clone(), eps_true, cfg.prediction)?;
    let eps_inv = invert(&x0d, &inv_schedule, cfg.inversion_steps, &inverter, t)?;
    sink.latent("eps_inv.krnr", &eps_inv)?;

    let modulated = if cfg.slm {
        let inputs = ModulationInputs {
            x0: x0d.clone(),
            eps_inv: eps_inv.clone(),
            m: latent_mask.clone(),
            d: depth_mask.clone(),
        };
        modulate(&inputs, &Rng::for_purpose(cfg.slm_seed, "slm"), cfg.modulation)?
    } else {
        Modulated {
            x0: x0d.clone(),
            eps_inv: eps_inv.clone(),
            trace: Vec::new(),
        }
    };
    sink.latent("x0_modulated.krnr", &modulated.x0)?;
    sink.latent("eps_inv_modulated.krnr", &modulated.eps_inv)?;

    let sample_schedule = cfg.schedule.zero_terminal()?;
    let alpha_bar = sample_schedule.alpha_bar(t)?;
    let (mx0, meps) = (&modulated.x0, &modulated.eps_inv);
    let eps_init = match cfg.init {
        InitMode::AdaptiveKrnr => adaptive_krnr(mx0, meps, alpha_bar, cfg.k, cfg.delta)?,
        InitMode::Krnr => krnr_closed_continuous(mx0, meps, alpha_bar, cfg.k)?,
        InitMode::Inverted => meps.clone(),
    };
    sink.latent("eps_init.krnr", &eps_init)?;
    let coefficients = krnr_coefficients(alpha_bar, cfg.k)?;
    let delta_coefficients = krnr_coefficients(alpha_bar, cfg.delta as f64)?;

    let x_stats = stats(mx0);
    let den: Box<dyn Denoiser<f64>> = match cfg.denoiser {
        DenoiserKind::Oracle => Box::new(oracle_denoiser(mx0.clone(), eps_init.clone(), cfg.prediction)?),
        DenoiserKind::Linear => Box::new(LinearDenoiser {
            mean: x_stats.mean,
            variance: x_stats.variance,
            mode: cfg.prediction,
        }),
        DenoiserKind::Zero => Box::new(ZeroDenoiser),
    };
    let x0_hat = sample(&eps_init, &sample_schedule, cfg.sampling_steps, den.as_ref(), t)?;
    sink.latent("x0_hat.krnr", &x0_hat)?;

    let decoded = codec.decode(&x0_hat.cast())?;
    sink.frames("decoded", &decoded)?;
    let psnr_visible = psnr(&decoded, &rendered.frames, Some(&pixel_mask))?;
    let psnr_codec_visible = psnr(&codec.decode(&x0)?, &rendered.frames, Some(&pixel_mask))?;

    let source_mask = crate::slm::sampling_mask(&latent_mask, &depth_mask)?;
    let report = DvsReport {
        status: "ok".into(),
        scene: cfg.scene,
        trajectory,
        video_dims: [cfg.frames, cfg.height, cfg.width],
        latent_dims: dims.as_array(),
        psnr_visible,
        psnr_codec_visible,
        masks: MaskReport {
            pixel_hole_fraction: pixel_mask.fraction(),
            latent_occluded_fraction: latent_mask.fraction(),
            latent_depth_fraction: depth_mask.fraction(),
            latent_source_fraction: source_mask.fraction(),
            degenerate_depth_frames: degenerate,
        },
        krnr: KrnrReport {
            init: cfg.init,
            t,
            alpha_bar,
            k: cfg.k,
            delta: cfg.delta,
            coefficients,
            delta_coefficients,
        },
        init_noise: noise_report(&eps_init, mx0),
        slm: SlmReport {
            enabled: cfg.slm,
            mode: cfg.modulation,
            targets: modulated.trace.len(),
            sources: source_mask.count_ones(),
        },
        inversion_t: t,
        inversion_alpha_bar: inv_schedule.alpha_bar(t)?,
        inversion_steps: cfg.inversion_steps,
        sampling_steps: cfg.sampling_steps,
        denoiser: cfg.denoiser,
        prediction: cfg.prediction,
    };
    sink.json(METRICS_FILE, &report)?;
    Ok(DvsRun {
        report,
        scene,
        rendered,
        pixel_mask,
        latent_mask,
        depth_mask,
        x0,
        eps_inv,
        modulated,
        eps_init,
        x0_hat,
        decoded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    K,
    Delta,
}

pub const ABLATION_HEADER: [&str; 10] = [
    "value",
    "k",
    "delta",
    "psnr_visible",
    "mean",
    "variance",
    "norm_deviation",
    "cosine_x0",
    "c_x0",
    "c_eps",
];

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub reports: Vec<DvsReport>,
    pub rows: Vec<Vec<f64>>,
}

impl AblationTable {
    pub fn to_csv(&self) -> Result<String> {
        csv::csv_string(&ABLATION_HEADER, &self.rows)
    }
}

/// Config for one sweep value. On the k axis δ is lowered to ⌈k⌉ where needed.
pub fn ablation_config(base: &PipelineConfig, axis: AblationAxis, value: f64) -> Result<PipelineConfig> {
    let mut cfg = base.clone();
    cfg.output_dir = None;
    match axis {
        AblationAxis::K => {
            cfg.k = value;
            if value > 0.0 && cfg.delta as f64 > value.ceil() {
                cfg.delta = value.ceil() as u32;
            }
        }
        AblationAxis::Delta => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                return param_err(format!("delta values must be positive integers, got {value}"));
            }
            cfg.delta = value as u32;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One full run per value; every config is validated before the first run starts.
pub fn ablation_sweep(base: &PipelineConfig, axis: AblationAxis, values: &[f64]) -> Result<AblationTable> {
    if values.is_empty() {
        return param_err("ablation needs at least one value");
    }
    let configs = values
        .iter()
        .map(|&v| ablation_config(base, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(values.len());
    let mut rows = Vec::with_capacity(values.len());
    for (cfg, &v) in configs.iter().zip(values) {
        let r = run_dvs(cfg)?;
        rows.push(vec![
            v,
            cfg.k,
            cfg.delta as f64,
            r.psnr_visible,
            r.init_noise.mean,
            r.init_noise.variance,
            r.init_noise.norm_deviation,
            r.init_noise.cosine_x0.unwrap_or(f64::NAN),
            r.krnr.coefficients.c_x0,
            r.krnr.coefficients.c_eps,
        ]);
        reports.push(r);
    }
    Ok(AblationTable { axis, reports, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            frames: 8,
            height: 32,
            width: 32,
            inversion_steps: 10,
            sampling_steps: 10,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn identity_round_trip() {
        let cfg = PipelineConfig {
            trajectory: "identity".into(),
            ..small()
        };
        let run = run_dvs_full(&cfg).unwrap();
        assert_eq!(run.pixel_mask.count_ones(), 0);
        assert!(run.report.psnr_visible >= 40.0, "{}", run.report.psnr_visible);
        assert_eq!(run.report.slm.targets, 0);
    }

    #[test]
    fn pan_overwrites_every_occluded_cell() {
        let run = run_dvs_full(&small()).unwrap();
        let d = run.x0.dims();
        let occluded: Vec<usize> = (0..d.cells()).filter(|&c| run.latent_mask.is_set(d.cell_element(c, 0))).collect();
        assert!(!occluded.is_empty());
        let targets: Vec<usize> = run.modulated.trace.iter().map(|p| p.0).collect();
        assert_eq!(targets, occluded);
        for &(t, s) in &run.modulated.trace {
            for c in 0..d.channels {
                let (ti, si) = (d.cell_element(t, c), d.cell_element(s, c));
                assert_eq!(run.modulated.x0.as_slice()[ti], run.x0.as_slice()[si] as f64);
                assert_eq!(run.modulated.eps_inv.as_slice()[ti], run.eps_inv.as_slice()[si]);
            }
        }
    }

    #[test]
    fn without_slm_occluded_cells_keep_encoded_values() {
        let cfg = PipelineConfig { slm: false, ..small() };
        let run = run_dvs_full(&cfg).unwrap();
        assert!(run.latent_mask.count_ones() > 0);
        for i in 0..run.x0.len() {
            if run.latent_mask.is_set(i) {
                assert_eq!(run.modulated.x0.as_slice()[i], run.x0.as_slice()[i] as f64);
            }
        }
    }

    #[test]
    fn artifacts_and_failure_marker() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..small()
        };
        run_dvs(&cfg).unwrap();
        assert!(dir.path().join(METRICS_FILE).exists());
        assert!(dir.path().join("x0.krnr").exists());
        assert!(dir.path().join("masks/mask_007.pgm").exists());

        // A scene with nothing left visible in the depth class fails after rendering.
        let bad = PipelineConfig {
            output_dir: Some(dir.path().join("bad")),
            depth_mode: DepthMode::Background,
            depth_quantile: 0.99,
            ..small()
        };
        let err = run_dvs(&bad).unwrap_err();
        assert_eq!(err.category(), "no_visible_source");
        assert!(dir.path().join("bad").join(FAILURE_MARKER).exists());
        assert!(dir.path().join("bad/rendered/frame_000.ppm").exists());
    }

    #[test]
    fn single_value_sweep_matches_run() {
        let cfg = small();
        let table = ablation_sweep(&cfg, AblationAxis::K, &[cfg.k]).unwrap();
        assert_eq!(table.reports[0], run_dvs(&cfg).unwrap());
    }

    #[test]
    fn k_sweep_clamps_delta() {
        let cfg = ablation_config(&small(), AblationAxis::K, 2.0).unwrap();
        assert_eq!(cfg.delta, 2);
        assert!(ablation_config(&small(), AblationAxis::Delta, 11.0).is_err());
    }
}
