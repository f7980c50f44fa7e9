use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use brepsplat_cli::{
    cmd_eval_cad, cmd_eval_seg, cmd_fit, cmd_sample, cmd_verify_splat, default_brep_path, exit, CliError, CliResult,
    PipelineConfig,
};

/// Labeled point clouds to B-rep models, plus evaluation and splat
/// verification tools.
#[derive(Debug, Parser)]
#[command(name = "brepsplat", version)]
struct Cli {
    /// TOML config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every randomized stage (overrides `seed` and `ransac.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file: the B-rep for `fit`, the cloud for `sample`, the JSON
    /// report for the other commands.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Also write an OBJ preview next to the B-rep (`fit` only).
    #[arg(long, global = true)]
    obj: bool,

    /// More logging; repeat for more.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct a B-rep from a labeled cloud (.ply or .xyzl).
    Fit { input: PathBuf },
    /// Patch and edge precision/recall/F1 of a predicted labeling.
    EvalSeg { pred: PathBuf, gt: PathBuf },
    /// Surface and curve Chamfer/Hausdorff distances of a B-rep to a cloud.
    EvalCad { brep: PathBuf, gt: PathBuf },
    /// Run the splat renderer/loss/gradient verification suite on a scene.
    VerifySplat { scene: PathBuf },
    /// Convert a splat scene into a labeled point cloud.
    Sample { scene: PathBuf },
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = out.write_all(text.as_bytes());
}

fn run(cli: Cli) -> CliResult<u8> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?.with_overrides(cli.seed, cli.verbose, cli.obj);
    init_logging(cfg.verbosity);
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    let output = cli.output.as_deref();
    match &cli.command {
        Command::Fit { input } => {
            let out = output.map_or_else(|| default_brep_path(input), Path::to_path_buf);
            let r = cmd_fit(input, &cfg, &out)?;
            print(&r.text);
            print(&format!("wrote {}\n", r.brep_path.display()));
            if let Some(p) = r.obj_path {
                print(&format!("wrote {}\n", p.display()));
            }
            Ok(exit::OK)
        }
        Command::EvalSeg { pred, gt } => {
            let (_, json) = cmd_eval_seg(pred, gt, &cfg, output)?;
            print(&json);
            Ok(exit::OK)
        }
        Command::EvalCad { brep, gt } => {
            let (_, json) = cmd_eval_cad(brep, gt, &cfg, output)?;
            print(&json);
            Ok(exit::OK)
        }
        Command::VerifySplat { scene } => {
            let r = cmd_verify_splat(scene, &cfg, output)?;
            print(&r.text);
            let failed = r.report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                eprintln!("error: {failed} of {} checks failed", r.report.checks.len());
            }
            Ok(r.exit_code())
        }
        Command::Sample { scene } => {
            let out = output.map_or_else(|| scene.with_extension("xyzl"), Path::to_path_buf);
            let cloud = cmd_sample(scene, &cfg, &out)?;
            let patches = cloud.patch_ids.iter().flatten().collect::<std::collections::BTreeSet<_>>().len();
            print(&format!("{} points, {} patches\nwrote {}\n", cloud.points.len(), patches, out.display()));
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
