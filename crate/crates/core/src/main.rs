use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isoflex::cli_io::config::{out_dir_or_env, read_json};
use isoflex::cli_io::{
    catalog_listing, cmd_analyze, cmd_deform, cmd_pde_check, AnalysisConfig, DeformConfig, DeformRequest,
    PdeCheckConfig, Settings, SurfaceSource, Tiling, WField, OUT_ENV,
};
use isoflex::modes::{DEFAULT_RANK_TOL, DEFAULT_TOL_MACRO};
use isoflex::surface_gen::Diagonal;
use isoflex::{Error, Result};

#[derive(Parser)]
#[command(name = "isoflex", version, about = "Isometric deflection modes of triangulated periodic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the builtin surface presets.
    Catalog {
        /// Print the presets as JSON surface specs.
        #[arg(long)]
        json: bool,
    },
    /// Compute and classify the isometric modes of a surface.
    Analyze(AnalyzeArgs),
    /// Export tiled, deflected meshes of one mode.
    Deform(DeformArgs),
    /// Finite-difference check of the linearized Gauss equation.
    PdeCheck(PdeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Analysis config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog name or path to a surface JSON file.
    #[arg(long)]
    surface: Option<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    tol_macro: Option<f64>,
    #[arg(long)]
    diagonal: Option<Diagonal>,
    /// Also write the constraint matrix triplets.
    #[arg(long)]
    export_constraints: bool,
    #[arg(long, help = format!("Output directory [default: ${OUT_ENV}]"))]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeformArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `analyze`.
    #[arg(long)]
    analysis: Option<PathBuf>,
    #[arg(long)]
    mode: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    /// Cell copies as `<m1>x<m2>`.
    #[arg(long)]
    tile: Option<Tiling>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, help = format!("Output directory [default: ${OUT_ENV}]"))]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PdeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    surface: Option<String>,
    /// Mode id, or one of xy, x2, y2.
    #[arg(long)]
    w: Option<WField>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    tol_macro: Option<f64>,
}

// a closed pipe (e.g. `| head`) is not worth a panic
fn emit(line: impl Display) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn missing(name: &str) -> Error {
    Error::InvalidParameter {
        name: name.to_owned(),
        reason: "required (flag or config field)".into(),
    }
}

fn config_base(path: Option<&Path>) -> Option<PathBuf> {
    path.and_then(|p| p.parent()).map(Path::to_path_buf)
}

fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => AnalysisConfig::load(p)?,
        None => AnalysisConfig::default(),
    };
    let mut base = config_base(args.config.as_deref());
    if let Some(s) = args.surface {
        config.surface = Some(SurfaceSource::Named(s));
        base = None;
    }
    config.n1 = args.n1.unwrap_or(config.n1);
    config.n2 = args.n2.unwrap_or(config.n2);
    config.rank_tol = args.rank_tol.unwrap_or(config.rank_tol);
    config.tol_macro = args.tol_macro.unwrap_or(config.tol_macro);
    config.diagonal = args.diagonal.unwrap_or(config.diagonal);
    config.export.constraints |= args.export_constraints;
    if args.out.is_some() {
        config.out = args.out;
    }
    let out = config.out_dir()?;
    let a = cmd_analyze(&config, base.as_deref(), &out)?;
    let r = &a.report;
    emit(format_args!(
        "{}: kernel {} ({} flexure, {} membrane, {} local), verdict {:?}",
        r.surface.source.as_deref().unwrap_or("mesh"),
        r.kernel.dimension,
        r.kernel.flexure,
        r.kernel.membrane,
        r.kernel.local_mechanisms,
        r.reciprocity.verdict
    ));
    for c in r.checks.iter().filter(|c| !c.passed) {
        eprintln!("check {} failed: {:e} vs {:?} {:e}", c.name, c.value, c.bound, c.limit);
    }
    emit(format_args!("wrote {}", out.display()));
    Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn deform(args: DeformArgs) -> Result<ExitCode> {
    let file: DeformConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => DeformConfig::default(),
    };
    let base = config_base(args.config.as_deref());
    let from_file = |p: Option<PathBuf>| match (p, &base) {
        (Some(p), Some(b)) if p.is_relative() => Some(b.join(p)),
        (p, _) => p,
    };
    let analysis = args.analysis.or_else(|| from_file(file.analysis)).ok_or_else(|| missing("analysis"))?;
    let tile = match (args.tile, file.tile) {
        (Some(t), _) => t,
        (None, Some(s)) => s.parse()?,
        (None, None) => Tiling([1, 1]),
    };
    let req = DeformRequest {
        mode: args.mode.or(file.mode).ok_or_else(|| missing("mode"))?,
        amplitude: args.amplitude.or(file.amplitude).ok_or_else(|| missing("amplitude"))?,
        tile,
        frames: args.frames.or(file.frames).unwrap_or(1),
    };
    let out = out_dir_or_env(args.out.or_else(|| from_file(file.out)).as_deref())?;
    let paths = cmd_deform(&analysis, &req, &out)?;
    for p in paths {
        emit(p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn pde_check(args: PdeArgs) -> Result<ExitCode> {
    let file: PdeCheckConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => PdeCheckConfig::default(),
    };
    let (source, base) = match args.surface {
        Some(s) => (SurfaceSource::Named(s), None),
        None => (
            file.surface.ok_or_else(|| missing("surface"))?,
            config_base(args.config.as_deref()),
        ),
    };
    let spec = source.resolve(base.as_deref())?;
    let w = match (args.w, file.w) {
        (Some(w), _) => w,
        (None, Some(s)) => s.parse()?,
        (None, None) => return Err(missing("w")),
    };
    let n = args.n.or(file.n).unwrap_or(16);
    let settings = Settings {
        rank_tol: args.rank_tol.or(file.rank_tol).unwrap_or(DEFAULT_RANK_TOL),
        tol_macro: args.tol_macro.or(file.tol_macro).unwrap_or(DEFAULT_TOL_MACRO),
    };
    let report = cmd_pde_check(&spec, w, n, settings)?;
    emit(serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Catalog { json } => {
            if json {
                let specs: Vec<_> = isoflex::surface_gen::catalog()
                    .into_iter()
                    .map(|e| (e.name, e.spec))
                    .collect();
                emit(serde_json::to_string_pretty(&specs)?);
            } else {
                let _ = std::io::stdout().write_all(catalog_listing().as_bytes());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(a) => analyze(a),
        Command::Deform(a) => deform(a),
        Command::PdeCheck(a) => pde_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
