//! Subcommand implementations behind the `brepsplat` binary.
//!
//! Every command returns a [`CliError`] carrying the process exit code on
//! failure, so the binary is a thin argument-parsing shell around this crate.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use brepsplat_core::assembly::AssemblyConfig;
use brepsplat_core::fitting::RansacConfig;
use brepsplat_core::intersection::{TraceConfig, TrimConfig};
use brepsplat_core::io::{self, CloudFormat};
use brepsplat_core::metrics::{evaluate_cad, evaluate_segmentation, CadReport, MetricConfig, SegReport};
use brepsplat_core::pipeline::{reconstruct, NormalConfig, ReconstructConfig, Summary};
use brepsplat_core::splat::verify::{run_suite, CheckResult, SuiteConfig};
use brepsplat_core::splat::{parse_scene, sample_gaussians_to_points, SamplingConfig, Scene, Stage1LossConfig, TripletConfig};
use brepsplat_core::{Error, LabeledPointCloud};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const STAGE: u8 = 3;
    pub const VERIFY: u8 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(exit::USAGE, message)
    }

    /// Classifies an error raised while reading or validating an input file.
    fn input(path: &Path, e: Error) -> Self {
        let code = match e {
            Error::Config(_) => exit::USAGE,
            _ => exit::INPUT,
        };
        CliError::new(code, format!("{}: {e}", path.display()))
    }

    fn write(path: &Path, e: impl fmt::Display) -> Self {
        CliError::new(exit::STAGE, format!("[output] {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random 5-splat scenes gradient-checked in addition to the input scene.
    pub gradient_scenes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { gradient_scenes: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write an OBJ preview next to the B-rep.
    pub obj: bool,
    /// Grid cells per face side when tessellating.
    pub tessellation_density: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            obj: false,
            tessellation_density: 48,
        }
    }
}

/// Everything the binary can be configured with. Loaded from TOML; missing
/// keys take their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides every per-section seed when set.
    pub seed: Option<u64>,
    /// 0 warn, 1 info, 2 debug, 3+ trace. Raised (never lowered) by `-v`.
    pub verbosity: u8,
    pub ransac: RansacConfig,
    pub trim: TrimConfig,
    pub trace: TraceConfig,
    pub assembly: AssemblyConfig,
    pub normals: NormalConfig,
    pub metrics: MetricConfig,
    pub loss: Stage1LossConfig,
    pub triplet: TripletConfig,
    pub sampling: SamplingConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        PipelineConfig::from_toml(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |e: Error| CliError::usage(e.to_string());
        self.reconstruct().validate().map_err(usage)?;
        self.metrics.validate().map_err(usage)?;
        self.loss.validate().map_err(usage)?;
        self.triplet.validate().map_err(usage)?;
        self.sampling.validate().map_err(usage)?;
        if self.output.tessellation_density == 0 {
            return Err(CliError::usage("config error: output.tessellation_density must be >= 1"));
        }
        Ok(())
    }

    /// Applies command-line overrides: `--seed` wins over the file's `seed`.
    pub fn with_overrides(mut self, seed: Option<u64>, verbose: u8, obj: bool) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        self.verbosity = self.verbosity.max(verbose);
        self.output.obj |= obj;
        self
    }

    /// The seed in effect: the global one, else `ransac.seed`.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.ransac.seed)
    }

    pub fn reconstruct(&self) -> ReconstructConfig {
        ReconstructConfig {
            ransac: RansacConfig {
                seed: self.effective_seed(),
                ..self.ransac.clone()
            },
            trim: self.trim.clone(),
            trace: self.trace.clone(),
            assembly: self.assembly.clone(),
            normals: self.normals.clone(),
        }
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            loss: self.loss.clone(),
            triplet: self.triplet.clone(),
            sampling: self.sampling.clone(),
            gradient_scenes: self.verify.gradient_scenes,
            seed: self.effective_seed(),
        }
    }
}

fn read_cloud(path: &Path) -> CliResult<LabeledPointCloud> {
    io::read_cloud(path).map_err(|e| CliError::input(path, e))
}

fn read_scene(path: &Path) -> CliResult<Scene> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e.into()))?;
    parse_scene(&text).map_err(|e| CliError::input(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn write_report(path: Option<&Path>, json: &str) -> CliResult<()> {
    if let Some(path) = path {
        fs::write(path, json).map_err(|e| CliError::write(path, e))?;
    }
    Ok(())
}

/// Default B-rep path for `fit`: the input with a `.brep.json` extension.
pub fn default_brep_path(input: &Path) -> PathBuf {
    input.with_extension("brep.json")
}

/// OBJ preview path next to a B-rep.
pub fn obj_path(brep: &Path) -> PathBuf {
    brep.with_extension("obj")
}

pub struct FitOutcome {
    pub summary: Summary,
    pub brep_path: PathBuf,
    pub obj_path: Option<PathBuf>,
    /// Human-readable per-stage summary.
    pub text: String,
}

fn render_summary(s: &Summary) -> String {
    let mut counts = [0usize; 3];
    for f in &s.fits {
        counts[f.kind as usize] += 1;
    }
    let mut out = String::new();
    out += &format!("input: {} points, {} patches\n", s.points, s.patches);
    out += &format!(
        "fitting: {} fitted ({} plane, {} cylinder, {} sphere), {} skipped\n",
        s.fits.len(),
        counts[0],
        counts[1],
        counts[2],
        s.skipped.len()
    );
    for f in &s.fits {
        out += &format!(
            "  patch {}: {} ({} of {} points inliers, rms {:.3e})\n",
            f.patch_id,
            f.kind,
            f.inliers,
            f.points,
            f.rms
        );
    }
    for p in &s.skipped {
        out += &format!("  patch {}: skipped ({})\n", p.patch_id, p.reason);
    }
    out += &format!(
        "intersection: {} edge points{}, {} candidate curves, {} trimmed segments\n",
        s.edge_points,
        if s.inferred_edge_points { " (inferred)" } else { "" },
        s.candidate_curves,
        s.segments
    );
    out += &format!(
        "assembly: {} faces, {} edges, {} corners, {}\n",
        s.faces,
        s.edges,
        s.corners,
        if s.watertight { "watertight" } else { "not watertight" }
    );
    out
}

/// Reconstructs a B-rep from a labeled cloud and writes it to `output`
/// (plus an OBJ preview when enabled).
pub fn cmd_fit(input: &Path, cfg: &PipelineConfig, output: &Path) -> CliResult<FitOutcome> {
    let cloud = read_cloud(input)?;
    let rec = reconstruct(&cloud, &cfg.reconstruct()).map_err(|e| CliError::new(exit::STAGE, e.to_string()))?;
    let doc = io::brep_to_string(&rec.model).map_err(|e| CliError::new(exit::STAGE, format!("[output] {e}")))?;
    fs::write(output, doc).map_err(|e| CliError::write(output, e))?;
    let obj = if cfg.output.obj {
        let p = obj_path(output);
        io::write_model_obj(&rec.model, cfg.output.tessellation_density, &p).map_err(|e| CliError::write(&p, e))?;
        Some(p)
    } else {
        None
    };
    Ok(FitOutcome {
        text: render_summary(&rec.summary),
        summary: rec.summary,
        brep_path: output.to_path_buf(),
        obj_path: obj,
    })
}

/// Segmentation metrics of `pred` against `gt`. Returns the report and its
/// JSON form, which is also written to `output` when given.
pub fn cmd_eval_seg(pred: &Path, gt: &Path, cfg: &PipelineConfig, output: Option<&Path>) -> CliResult<(SegReport, String)> {
    let p = read_cloud(pred)?;
    let g = read_cloud(gt)?;
    let report = evaluate_segmentation(&p, &g, &cfg.metrics).map_err(|e| match e {
        Error::NoLabeledPatches => CliError::new(exit::INPUT, "missing labels: both clouds need patch ids"),
        e => CliError::new(exit::STAGE, format!("[metrics] {e}")),
    })?;
    let json = to_json(&report);
    write_report(output, &json)?;
    Ok((report, json))
}

/// Surface and curve distances of a B-rep document against a ground-truth
/// cloud.
pub fn cmd_eval_cad(brep: &Path, gt: &Path, cfg: &PipelineConfig, output: Option<&Path>) -> CliResult<(CadReport, String)> {
    let text = fs::read_to_string(brep).map_err(|e| CliError::input(brep, e.into()))?;
    let model = io::brep_from_str(&text).map_err(|e| CliError::input(brep, e))?;
    let g = read_cloud(gt)?;
    let report = evaluate_cad(&model, &g, &cfg.metrics, cfg.effective_seed()).map_err(|e| match e {
        Error::EmptyModel => CliError::new(exit::INPUT, format!("{}: empty model", brep.display())),
        e => CliError::new(exit::STAGE, format!("[metrics] {e}")),
    })?;
    let json = to_json(&report);
    write_report(output, &json)?;
    Ok((report, json))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

pub struct VerifyOutcome {
    pub report: VerifyReport,
    /// One `PASS`/`FAIL` line per check.
    pub text: String,
    pub json: String,
}

/// Runs the splat verification suite on a scene. A failing check is
/// reported with exit code 4 via [`VerifyOutcome::exit_code`]; only
/// unreadable scenes are errors.
pub fn cmd_verify_splat(scene: &Path, cfg: &PipelineConfig, output: Option<&Path>) -> CliResult<VerifyOutcome> {
    let scene = read_scene(scene)?;
    let checks = run_suite(&scene, &cfg.suite()).map_err(|e| CliError::new(exit::STAGE, format!("[verify] {e}")))?;
    let text = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}: error {:.3e} (tolerance {:.1e})\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.error,
                c.tolerance
            )
        })
        .collect();
    let report = VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let json = to_json(&report);
    write_report(output, &json)?;
    Ok(VerifyOutcome { report, text, json })
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.report.passed {
            exit::OK
        } else {
            exit::VERIFY
        }
    }
}

/// Converts a splat scene to a labeled cloud; the format follows the output
/// extension (`.ply` binary PLY, anything else XYZL).
pub fn cmd_sample(scene: &Path, cfg: &PipelineConfig, output: &Path) -> CliResult<LabeledPointCloud> {
    let scene = read_scene(scene)?;
    let cloud = sample_gaussians_to_points(&scene.gaussians, &cfg.sampling);
    io::write_cloud(output, &cloud, CloudFormat::for_path(output)).map_err(|e| CliError::write(output, e))?;
    Ok(cloud)
}
