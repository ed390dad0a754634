mod configs;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsmax::config::{RayField, RunConfig};
use adsmax::export::{Format, Table, TorusPlot};
use adsmax::pipeline::{self, PipelineError};
use adsmax::verify::{checks_table, Suite};
use adsmax::vortex::{GridSolution, VortexError};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

const EXIT_ERROR: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_GATE: u8 = 3;
const CORNER_WINDOW: f64 = 0.1;

/// Equivariant maximal surfaces in AdS³ from meromorphic quadratic
/// differentials on a punctured end.
#[derive(Debug, Parser)]
#[command(name = "adsmax", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Worker threads for rays and loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the vortex equation and write the solution.
    Solve,
    /// Trace rays to the boundary torus and check achronality.
    Boundary,
    /// Holonomy eigenvalues around horizontal loops.
    Holonomy,
    /// Boundary lengths of the induced metrics, with curvature per node.
    Lengths,
    /// Classify residues: spectrum, lengths, saw-tooth and decoration.
    Classify {
        /// A residue such as `3+4i`; repeat for several punctures.
        #[arg(long = "residue", required = true, value_parser = parse_residue, allow_hyphen_values = true)]
        residues: Vec<Complex64>,
    },
    /// Run the verification suite on the shipped configs or on `--config`.
    Verify {
        /// Keep checks whose group contains this string, or one criterion number.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn parse_residue(s: &str) -> Result<Complex64, String> {
    s.trim().replace(' ', "").parse::<Complex64>().map_err(|e| format!("`{s}` is not a complex number: {e}"))
}

#[derive(Debug)]
enum Failure {
    Error(String),
    NoConvergence { iters: usize, residual: f64 },
    Gate(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

impl From<VortexError> for Failure {
    fn from(e: VortexError) -> Self {
        match e {
            VortexError::NoConvergence { iters, residual } => Failure::NoConvergence { iters, residual },
            other => Failure::Error(other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Vortex(v) => v.into(),
            other => Failure::Error(other.to_string()),
        }
    }
}

struct Ctx {
    config: Option<RunConfig>,
    out: PathBuf,
    format: Format,
}

impl Ctx {
    fn config(&self) -> Result<&RunConfig, Failure> {
        self.config.as_ref().ok_or_else(|| Failure::Error("this command needs --config".into()))
    }

    fn save(&self, table: &Table, stem: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out)?;
        let hash = self.config.as_ref().map(|c| &c.hash);
        Ok(table.save(&self.out, stem, self.format, hash)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let config = match cli.config.as_deref().map(RunConfig::load).transpose() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.as_deref().unwrap_or(Path::new("")).display());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let out = cli.out.clone().or_else(|| config.as_ref().and_then(|c| c.out.clone())).unwrap_or_else(|| "out".into());
    let ctx = Ctx { config, out, format: cli.format.into() };
    let result = match &cli.command {
        Command::Solve => solve(&ctx),
        Command::Boundary => boundary(&ctx),
        Command::Holonomy => holonomy(&ctx),
        Command::Lengths => lengths(&ctx),
        Command::Classify { residues } => classify(&ctx, residues),
        Command::Verify { filter } => verify(&ctx, filter.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
        Err(Failure::NoConvergence { iters, residual }) => {
            eprintln!("error: Newton did not converge after {iters} iterations; final residual {residual:.6e}");
            ExitCode::from(EXIT_NO_CONVERGENCE)
        }
        Err(Failure::Gate(msg)) => {
            eprintln!("gate failed: {msg}");
            ExitCode::from(EXIT_GATE)
        }
    }
}

fn solved(cfg: &RunConfig) -> Result<GridSolution, Failure> {
    Ok(pipeline::solve(cfg)?.solution)
}

fn solve(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = ctx.config()?;
    let run = pipeline::solve(cfg)?;
    let sol = &run.solution;
    let path = ctx.save(&pipeline::solution_table(sol), "solution")?;
    println!("grid            {} x {}", sol.grid.nx(), sol.grid.ny());
    println!("newton iters    {}", sol.newton_iters);
    println!("residual        {:.3e}", sol.residual_norm);
    println!("max |u|         {:.3e}", sol.max_abs());
    if let Some(v) = run.sandwich_violation() {
        println!("barrier excess  {v:.3e}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn boundary(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = ctx.config()?;
    let sol = match cfg.rays.field {
        RayField::Solution => solved(cfg)?,
        RayField::Horospherical => GridSolution::zero(cfg.chart(), *cfg.grid()),
    };
    let run = pipeline::boundary(cfg, &sol)?;
    let csv = ctx.save(&run.table(), "boundary")?;
    let plot = TorusPlot {
        title: format!("boundary curve, R = {}", cfg.residue()),
        curve: run.samples.iter().map(|s| s.point).collect(),
        markers: run.vertices.clone(),
        segments: run.edges.clone(),
    };
    let svg = ctx.out.join("boundary.svg");
    plot.save(&svg)?;
    let a = &run.achronality;
    println!("rays            {}", run.samples.len());
    println!("vertices        {}", run.vertices.len());
    if let Some(gap) = run.max_prediction_gap(CORNER_WINDOW) {
        println!("model gap       {gap:.3e}  (rays {CORNER_WINDOW} rad or more from a corner)");
    }
    println!("max slope       {:.9}", a.max_slope);
    println!("max excess      {:.3e}", a.max_excess);
    println!("achronal        {}", a.achronal);
    println!("wrote {} and {}", csv.display(), svg.display());
    if !a.achronal || a.max_slope > 1.0 + 1e-6 {
        return Err(Failure::Gate(format!("samples are not achronal (max slope {:.9})", a.max_slope)));
    }
    Ok(())
}

fn holonomy(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = ctx.config()?;
    if cfg.holonomy.heights.is_empty() {
        return Err(Failure::Error("holonomy.heights is empty".into()));
    }
    let rows = pipeline::holonomy(cfg, &solved(cfg)?)?;
    let path = ctx.save(&pipeline::holonomy_table(&rows), "holonomy")?;
    println!("{:>8}  {:>12}", "y", "rel_error");
    for r in &rows {
        println!("{:>8.3}  {:>12.3e}", r.y, r.error);
    }
    println!("wrote {}", path.display());
    let top = rows.iter().max_by(|a, b| a.y.total_cmp(&b.y)).expect("heights are non-empty");
    if !(top.error <= cfg.holonomy.gate) {
        return Err(Failure::Gate(format!("error {:.3e} at y = {} exceeds {:.3e}", top.error, top.y, cfg.holonomy.gate)));
    }
    Ok(())
}

fn lengths(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = ctx.config()?;
    let sol = solved(cfg)?;
    let run = pipeline::lengths(cfg, &sol)?;
    let path = ctx.save(&run.table(), "lengths")?;
    let curv = ctx.save(&run.curvature_table(&sol), "curvature")?;
    println!("{:>8}  {:>14}  {:>14}  {:>12}", "y", "length_left", "length_right", "rel_error");
    let stride = (run.rows.len() / 16).max(1);
    for (k, r) in run.rows.iter().enumerate() {
        if k % stride == 0 || k + 1 == run.rows.len() {
            println!("{:>8.3}  {:>14.9}  {:>14.9}  {:>12.3e}", r.y, r.left, r.right, r.error());
        }
    }
    if let Some(r) = run.rows.first() {
        println!("targets   {:>14.9}  {:>14.9}", r.target_left, r.target_right);
    }
    println!("wrote {} and {}", path.display(), curv.display());
    Ok(())
}

fn classify(ctx: &Ctx, residues: &[Complex64]) -> Result<(), Failure> {
    let table = pipeline::classify_table(residues);
    let mut stdout = io::stdout().lock();
    table.write_to(&mut stdout, ctx.format, None)?;
    stdout.flush()?;
    Ok(())
}

fn verify(ctx: &Ctx, filter: Option<String>) -> Result<(), Failure> {
    let suite = match &ctx.config {
        Some(cfg) => Suite { configs: vec![("config".into(), cfg.clone())], step: cfg.rays.h, filter },
        None => {
            let configs = configs::SHIPPED
                .iter()
                .map(|(name, text)| RunConfig::parse(text).map(|c| (name.to_string(), c)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Error(format!("shipped config: {e}")))?;
            Suite { configs, filter, ..Suite::default() }
        }
    };
    let checks = suite.run();
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        let note = if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) };
        println!("[{verdict}] {:>2} {:<12} {:<58} {:>13.6e} / {:.3e}{note}", c.criterion, c.group, c.name, c.measured, c.limit);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let path = ctx.save(&checks_table(&checks), "verify")?;
    println!("{} checks, {} failed; wrote {}", checks.len(), failed, path.display());
    if checks.is_empty() {
        return Err(Failure::Error("no check matches the filter".into()));
    }
    if failed > 0 {
        return Err(Failure::Gate(format!("{failed} verification checks failed")));
    }
    Ok(())
}
