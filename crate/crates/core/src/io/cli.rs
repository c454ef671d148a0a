//! Command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::parse::parse_input;
use super::write::{write_atomic, write_output, OutputPaths, RunManifest};
use crate::analysis::{run_audit, AuditOptions};
use crate::optimizer::{self, PlacementProblem};
use crate::quality::{self, BoundaryHandling, InsertionMode, Ordering, PlacementMode, RefinementConfig};
use crate::refiner::refine;
use crate::{Dim, IoError, RefineError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;
/// Unwritable output, or a failure inside the mesher.
pub const EXIT_OTHER: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "snowglobe", version, about = "Advancing-front Delaunay refinement in 2D and 3D")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Refine a .poly (2D) or .smesh (3D) input.
    Refine(RefineArgs),
    /// Solve a JSON array of placement problems; prints a JSON array of
    /// candidates (or error strings).
    SolveBatch {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Single,
    Multi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Placement {
    Distance,
    Angle,
    Circumcenter,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QueueOrder {
    ShortestFirst,
    Fifo,
}

#[derive(clap::Args, Debug)]
struct RefineArgs {
    input: PathBuf,
    #[arg(long)]
    rho_star: Option<f64>,
    #[arg(long)]
    sigma_star: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<Placement>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    ordering: Option<QueueOrder>,
    #[arg(long)]
    no_preprocess: bool,
    #[arg(long)]
    classic_boundary: bool,
    #[arg(long, value_name = "N")]
    max_insertions: Option<usize>,
    /// Stem for the .node/.ele output (default: `<input stem>.1` next to the
    /// input).
    #[arg(long, value_name = "STEM")]
    output: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    events: Option<PathBuf>,
    /// `svg PATH` or `vtk PATH`; may be repeated.
    #[arg(long, num_args = 2, value_names = ["FORMAT", "PATH"], action = clap::ArgAction::Append)]
    export: Vec<String>,
    /// Run the audit suite; the exit code reflects pass/fail.
    #[arg(long)]
    audit: bool,
    /// Also refine with circumcenter placement for comparison (with --audit).
    #[arg(long)]
    baseline: bool,
}

fn config(args: &RefineArgs, dim: Dim) -> RefinementConfig {
    let mut cfg = RefinementConfig::for_dim(dim);
    if let Some(r) = args.rho_star {
        cfg = cfg.with_rho_star(r);
    }
    if let Some(s) = args.sigma_star {
        cfg.sigma_star = s;
    }
    if let Some(a) = args.alpha {
        cfg = cfg.with_alpha(a);
    }
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    if let Some(p) = args.placement {
        cfg.placement = match p {
            Placement::Distance => PlacementMode::Distance,
            Placement::Angle => PlacementMode::Angle,
            Placement::Circumcenter => PlacementMode::Circumcenter,
        };
    }
    if let Some(m) = args.mode {
        cfg.insertion = match m {
            Mode::Single => InsertionMode::Single,
            Mode::Multi => InsertionMode::Multi,
        };
    }
    if let Some(o) = args.ordering {
        cfg.ordering = match o {
            QueueOrder::ShortestFirst => Ordering::ShortestFirst,
            QueueOrder::Fifo => Ordering::Fifo,
        };
    }
    if args.no_preprocess {
        cfg.preprocess = false;
    }
    if args.classic_boundary {
        cfg.boundary = BoundaryHandling::Classic;
    }
    if let Some(n) = args.max_insertions {
        cfg.max_insertions = n;
    }
    cfg
}

fn exports(args: &RefineArgs) -> Result<(Option<PathBuf>, Option<PathBuf>), String> {
    let (mut svg, mut vtk) = (None, None);
    for pair in args.export.chunks(2) {
        let path = PathBuf::from(&pair[1]);
        match pair[0].as_str() {
            "svg" => svg = Some(path),
            "vtk" => vtk = Some(path),
            other => return Err(format!("--export: unknown format '{other}' (expected svg or vtk)")),
        }
    }
    Ok((svg, vtk))
}

fn default_stem(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.1"))
}

/// Minimal summary for reports written without `--audit`.
#[derive(Serialize)]
struct Summary {
    vertices: usize,
    elements: usize,
    insertions: usize,
    max_rho: f64,
    min_angle_deg: f64,
}

fn run_refine(args: RefineArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let input = match parse_input(&args.input) {
        Ok(i) => i,
        Err(e @ (IoError::Parse { .. } | IoError::Plc(_))) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VALIDATION;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let cfg = config(&args, input.plc.dim);
    if let Err(e) = cfg.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_VALIDATION;
    }
    let (svg, vtk) = match exports(&args) {
        Ok(x) => x,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USAGE;
        }
    };
    if svg.is_some() && input.plc.dim != Dim::Two {
        let _ = writeln!(err, "error: svg export is 2D only");
        return EXIT_USAGE;
    }
    let result = match refine(&input.plc, &cfg) {
        Ok(r) => r,
        Err(e @ RefineError::InsertionCap { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CAP;
        }
        Err(e @ (RefineError::Plc(_) | RefineError::Config(_))) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VALIDATION;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_OTHER;
        }
    };
    let paths = OutputPaths {
        mesh: Some(args.output.clone().unwrap_or_else(|| default_stem(&args.input))),
        report: args.report.clone(),
        events: args.events.clone(),
        svg,
        vtk,
    };
    let inputs = input.paths.iter().map(|p| p.display().to_string()).collect();
    let mut manifest = RunManifest::new(inputs, cfg.clone());
    paths.record(&mut manifest);

    let mut code = EXIT_OK;
    let written = if args.audit || args.report.is_some() {
        let opts = AuditOptions {
            baseline: args.baseline && args.audit,
        };
        let report = match run_audit(&input.plc, &result, &cfg, &opts) {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "error: baseline run failed: {e}");
                return EXIT_OTHER;
            }
        };
        if args.audit {
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "audit: {verdict}");
            for f in &report.failures {
                let _ = writeln!(out, "  {f}");
            }
            if let Some(s) = &report.size {
                let _ = writeln!(
                    out,
                    "  lfs/r max {:.4} (bound 1/(alpha-1) = {:.4}, limit {:.4})",
                    s.max_ratio, s.bound, s.limit
                );
            }
            if let Some(b) = &report.baseline {
                let _ = writeln!(
                    out,
                    "  vertices {} vs circumcenter baseline {} (ratio {:.3})",
                    b.vertices, b.baseline_vertices, b.ratio
                );
            }
            if !report.pass {
                code = EXIT_AUDIT;
            }
        }
        write_output(&result, &cfg, &manifest, &paths, input.base, Some(&report))
    } else {
        write_output::<()>(&result, &cfg, &manifest, &paths, input.base, None)
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_OTHER;
    }
    let mut s = Summary {
        vertices: result.mesh.vertex_count(),
        elements: result.elements.len(),
        insertions: result.events.insertions(),
        max_rho: 0.0,
        min_angle_deg: 180.0,
    };
    for pts in result.element_points() {
        let q = quality::measure_or_degenerate(&pts);
        s.max_rho = s.max_rho.max(q.rho);
        let a = if cfg.dim == Dim::Two { q.min_angle } else { q.min_dihedral };
        s.min_angle_deg = s.min_angle_deg.min(a.to_degrees());
    }
    let _ = writeln!(
        out,
        "{} vertices, {} elements, {} insertions, max rho {:.4}, min {} {:.2} deg",
        s.vertices,
        s.elements,
        s.insertions,
        s.max_rho,
        if cfg.dim == Dim::Two { "angle" } else { "dihedral" },
        s.min_angle_deg
    );
    code
}

fn run_batch(input: &Path, output: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", input.display());
            return EXIT_VALIDATION;
        }
    };
    let problems: Vec<PlacementProblem> = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {}:{}: {e}", input.display(), e.line());
            return EXIT_VALIDATION;
        }
    };
    let results: Vec<serde_json::Value> = problems
        .iter()
        .map(|p| match optimizer::solve(p) {
            Ok(c) => serde_json::to_value(c).expect("candidate serializes"),
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        })
        .collect();
    let json = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
    match output {
        Some(p) => {
            if let Err(e) = write_atomic(p, json.as_bytes()) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_OTHER;
            }
        }
        None => {
            let _ = out.write_all(json.as_bytes());
        }
    }
    EXIT_OK
}

/// Runs the CLI on `args` (program name first), writing to the given
/// streams. Returns the process exit code.
pub fn cli_main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match cli.command {
        Command::Refine(args) => run_refine(args, out, err),
        Command::SolveBatch { input, output } => run_batch(&input, output.as_deref(), out, err),
    }
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    cli_main_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
