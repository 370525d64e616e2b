//! Command-line front end: load a chart, run analyses, emit
//! machine-readable reports.
//!
//! Exit codes: 0 on success, 1 for unparseable input (flags, chart files,
//! points, grids), 2 for numerical failures (degenerate metric, no
//! stabilization). Diagnostics go to stderr; payloads go to stdout unless
//! `--out` redirects them.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use geoscope_core::chart::Chart;
use geoscope_core::error::Error;
use geoscope_core::extension::{
    corrupt_sample, extend_killing, killing_residual, path_independence, GridSpec,
};
use geoscope_core::report::{analyze_point, scan_csv_header, scan_csv_row, AnalysisConfig};
use geoscope_core::stabilization::stabilize_capped;

#[derive(Parser)]
#[command(
    name = "geoscope",
    version,
    about = "Curvature analysis of Riemannian metrics in local coordinates",
    after_help = "Chart files are line-oriented text; see the charts/ directory for examples."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze the chart at one point and print a JSON report
    Analyze(AnalyzeArgs),
    /// Analyze every node of a grid and stream one CSV row per node
    Scan(ScanArgs),
    /// Extend a stable element over a grid; export the field as CSV plus a
    /// residual summary as JSON
    Extend(ExtendArgs),
}

#[derive(Args)]
struct CommonFlags {
    /// Cap on the total derivative order of enumerated invariants
    /// [default: min(n(n-1)/2, 4)]
    #[arg(long)]
    max_order: Option<usize>,

    /// Cap on the total valence of enumerated invariants
    #[arg(long, default_value_t = 8)]
    max_valence: usize,

    /// Cap on filtration levels [default: n + n(n-1)/2 + 1]
    #[arg(long)]
    tower_depth: Option<usize>,

    /// Relative singular-value threshold for rank decisions
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,

    /// Transport steps per path segment or grid cell
    #[arg(long, default_value_t = 100)]
    steps: usize,

    /// Write the primary output to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonFlags {
    fn config(&self, n: usize) -> AnalysisConfig {
        let mut config = AnalysisConfig::for_dim(n);
        if let Some(m) = self.max_order {
            config.max_order = m;
        }
        config.max_valence = self.max_valence;
        if let Some(t) = self.tower_depth {
            config.tower_depth = t;
        }
        config.rank_tol = self.rank_tol;
        config.steps = self.steps;
        config
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Chart file
    chart: PathBuf,
    /// Point in chart coordinates, comma separated: "1.0472,0"
    #[arg(long)]
    point: String,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct ScanArgs {
    /// Chart file
    chart: PathBuf,
    /// Grid specification: "[lo,hi]x[lo,hi]:CxC"
    #[arg(long)]
    grid: String,
    /// Number of worker threads for the scan
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Args)]
struct ExtendArgs {
    /// Chart file
    chart: PathBuf,
    /// Base point in chart coordinates, comma separated
    #[arg(long)]
    base: String,
    /// Index into the stable basis at the base point
    #[arg(long, default_value_t = 0)]
    element: usize,
    /// Grid specification: "[lo,hi]x[lo,hi]:CxC"
    #[arg(long)]
    grid: String,
    /// Also emit the residuals of the corrupted-sample control
    #[arg(long)]
    control: bool,
    #[command(flatten)]
    flags: CommonFlags,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if e.is_input_error() || matches!(e, Error::Shape(_)) {
            1
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn parse_point(text: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let point: Vec<f64> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input_failure(format!("malformed point `{text}`")))?;
    if point.len() != n {
        return Err(input_failure(format!(
            "point `{text}` has {} coordinates, chart has dimension {n}",
            point.len()
        )));
    }
    Ok(point)
}

fn write_output(out: &Option<PathBuf>, payload: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| input_failure(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{payload}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let chart = Chart::load(&args.chart)?;
    let point = parse_point(&args.point, chart.dim())?;
    let config = args.flags.config(chart.dim());
    let report = analyze_point(&chart, &point, &config)?;
    write_output(&args.flags.out, &report.to_json())
}

fn scan_node(chart: &Chart, point: &[f64], config: &AnalysisConfig) -> Result<String, Failure> {
    match analyze_point(chart, point, config) {
        Ok(report) => Ok(scan_csv_row(point, Some(&report))),
        Err(e) if e.is_input_error() => Err(e.into()),
        // numerical failure at one node: flag the row, keep scanning
        Err(_) => Ok(scan_csv_row(point, None)),
    }
}

fn cmd_scan(args: &ScanArgs) -> Result<(), Failure> {
    let chart = Chart::load(&args.chart)?;
    let grid = GridSpec::parse(&args.grid)?;
    if grid.dim() != chart.dim() {
        return Err(input_failure(format!(
            "grid has {} axes, chart has dimension {}",
            grid.dim(),
            chart.dim()
        )));
    }
    let config = args.flags.config(chart.dim());
    let nodes: Vec<Vec<f64>> = grid.indices().iter().map(|i| grid.node(i)).collect();

    let jobs = args.jobs.clamp(1, nodes.len().max(1));
    let mut rows: Vec<Option<Result<String, Failure>>> = Vec::new();
    rows.resize_with(nodes.len(), || None);
    if jobs <= 1 {
        for (row, node) in rows.iter_mut().zip(&nodes) {
            *row = Some(scan_node(&chart, node, &config));
        }
    } else {
        // workers take nodes round-robin; output stays in grid order
        type Slot<'a> = (usize, &'a Vec<f64>, &'a mut Option<Result<String, Failure>>);
        let mut slots: Vec<Slot> = nodes
            .iter()
            .zip(rows.iter_mut())
            .enumerate()
            .map(|(i, (node, row))| (i, node, row))
            .collect();
        std::thread::scope(|scope| {
            let mut worker_slots: Vec<Vec<Slot>> = Vec::new();
            worker_slots.resize_with(jobs, Vec::new);
            for slot in slots.drain(..) {
                worker_slots[slot.0 % jobs].push(slot);
            }
            for batch in worker_slots {
                let chart = &chart;
                let config = &config;
                scope.spawn(move || {
                    for (_, node, row) in batch {
                        *row = Some(scan_node(chart, node, config));
                    }
                });
            }
        });
    }

    let mut payload = String::new();
    payload.push_str(&scan_csv_header(chart.coords()));
    payload.push('\n');
    for row in rows {
        payload.push_str(&row.expect("every node visited")?);
        payload.push('\n');
    }
    write_output(&args.flags.out, &payload)
}

fn cmd_extend(args: &ExtendArgs) -> Result<(), Failure> {
    let chart = Chart::load(&args.chart)?;
    let base = parse_point(&args.base, chart.dim())?;
    let grid = GridSpec::parse(&args.grid)?;
    let config = args.flags.config(chart.dim());

    let stab = stabilize_capped(&chart, &base, config.rank_tol, config.tower_depth)?;
    if args.element >= stab.stable_basis.len() {
        return Err(input_failure(format!(
            "element index {} out of range: the stable basis at {:?} has {} element(s)",
            args.element,
            base,
            stab.stable_basis.len()
        )));
    }
    let e0 = &stab.stable_basis[args.element];
    let sample = extend_killing(&chart, &base, e0, &grid, config.steps)?;
    let residuals = killing_residual(&chart, &sample)?;

    // path independence measured to the far corner of the grid
    let corner: Vec<f64> = grid.axes.iter().map(|a| a.max).collect();
    let deviation = path_independence(&chart, &base, e0, &corner, config.steps)?;

    let mut summary = serde_json::json!({
        "chart": chart.name(),
        "base": base,
        "element": args.element,
        "grid": args.grid,
        "steps_per_cell": config.steps,
        "killing_dim": stab.stable_basis.len(),
        "max_sym_residual": residuals.max_sym_residual,
        "max_tangency_residual": residuals.max_tangency_residual,
        "path_independence": deviation,
    });
    if args.control {
        let control = killing_residual(&chart, &corrupt_sample(&sample, 0))?;
        summary["control_sym_residual"] = serde_json::json!(control.max_sym_residual);
    }
    let summary_text = format!("{}\n", serde_json::to_string_pretty(&summary).unwrap());

    let csv = sample.to_csv();
    match &args.flags.out {
        Some(path) => {
            std::fs::write(path, csv)
                .map_err(|e| input_failure(format!("cannot write {}: {e}", path.display())))?;
            print!("{summary_text}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary_text}");
        }
    }
    std::io::stdout().flush().ok();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Extend(args) => cmd_extend(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("geoscope: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
