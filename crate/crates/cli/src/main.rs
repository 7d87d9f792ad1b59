//! `svfapprox`: convergence experiments, selection export, kernel diagnostics
//! and the acceptance suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use svfapprox::acceptance::{Acceptance, Suite, CRITERIA};
use svfapprox::analysis::{convergence_experiment, BoundFlavor, DeltaRule, ExperimentConfig};
use svfapprox::integral::QuadratureRule;
use svfapprox::operators::{diagnostics, Operator};
use svfapprox::selections::selection_family;
use svfapprox::svf::catalog;
use svfapprox::{format_float, Interval, IntervalFunction, Norm, Partition, SetValuedFunction};

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

/// Tolerance for `--strict` bound-dominance checks.
const STRICT_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "svfapprox", version, about = "Approximation of set-valued functions by integral operators")]
struct Cli {
    /// Worker threads for row evaluation [default: all cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence experiment and write table.csv and report.json.
    Run(RunArgs),
    /// Run the acceptance suite; exit 0 iff every criterion passes.
    Check(CheckArgs),
    /// Export the metric selection family of an SVF.
    Selections(SelectionArgs),
    /// Dump numeric kernel quantities next to their claimed bounds.
    Diag(DiagArgs),
}

#[derive(Args, Clone)]
struct SvfArgs {
    /// Catalog name or path of a grid JSON file {"a","b","grid","sets"} [default: jump-pair]
    #[arg(long)]
    svf: Option<String>,

    /// Pieces of the uniform partition chi; grid nodes of the SVF are added [default: 1024]
    #[arg(long)]
    grid: Option<usize>,

    /// Seeds per fiber when building the selection family [default: 4]
    #[arg(long)]
    seeds: Option<usize>,

    /// Norm on R^d: euclidean, max or sum [default: euclidean]
    #[arg(long)]
    norm: Option<String>,

    /// Points per fiber for the sampled catalog entries [default: 5]
    #[arg(long)]
    fiber_points: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with any of the flag names below as keys; flags win
    #[arg(long)]
    config: Option<PathBuf>,

    /// Operator: bd (Bernstein-Durrmeyer) or kantorovich [default: bd]
    #[arg(long)]
    operator: Option<String>,

    #[command(flatten)]
    svf: SvfArgs,

    /// Strictly increasing degrees, comma separated [default: 16,64,256,1024]
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Evaluation points, comma separated [default: 0.5]
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,

    /// optimize, n^-1/3 or a fixed positive delta [default: optimize]
    #[arg(long)]
    delta_rule: Option<String>,

    /// continuity, jump or auto (jump when every x is interior) [default: auto]
    #[arg(long)]
    mode: Option<String>,

    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Exit 3 if any observed error exceeds its bound
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// fast or full
    #[arg(default_value = "fast")]
    suite: String,

    /// Seed for randomized criteria [default: $SVFAPPROX_SEED or built-in]
    #[arg(long)]
    seed: Option<u64>,

    /// Run against kernels with deliberately wrong metadata
    #[arg(long, hide = true)]
    corrupt_metadata: bool,
}

#[derive(Args)]
struct SelectionArgs {
    #[command(flatten)]
    svf: SvfArgs,

    /// Output directory [default: selections]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    /// Operator: bd or kantorovich [default: bd]
    #[arg(long)]
    operator: Option<String>,

    /// Degrees, comma separated [default: 10,100,1000]
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Points, comma separated [default: 0.1,0.3,0.5,0.7,0.9]
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,

    /// Radius delta for beta [default: 0.1]
    #[arg(long)]
    delta: Option<f64>,

    /// Write JSON lines here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Keys accepted by `run --config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RunFile {
    operator: Option<String>,
    svf: Option<String>,
    n: Option<Vec<usize>>,
    x: Option<Vec<f64>>,
    grid: Option<usize>,
    seeds: Option<usize>,
    norm: Option<String>,
    #[serde(alias = "delta_rule")]
    delta_rule: Option<String>,
    mode: Option<String>,
    out: Option<PathBuf>,
    #[serde(alias = "fiber_points")]
    fiber_points: Option<usize>,
    strict: Option<bool>,
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config_error(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_CONFIG, err: err.into() }
}

fn from_lib(err: svfapprox::Error) -> Failure {
    use svfapprox::Error as E;
    let code = match err {
        E::InvalidArgument(_) | E::InvalidPartition(_) | E::UnknownCatalog(_) | E::NotANode(_) | E::Json(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_FAILED,
    };
    Failure { code, err: err.into() }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: EXIT_FAILED, err }
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse<T: std::str::FromStr<Err = svfapprox::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(from_lib)
}

fn resolve_svf(source: &str, fiber_points: usize) -> CliResult<SetValuedFunction> {
    if catalog::NAMES.contains(&source) {
        return catalog::by_name(source, fiber_points).map_err(from_lib);
    }
    let path = Path::new(source);
    if path.is_file() {
        return SetValuedFunction::load(path)
            .with_context(|| format!("reading SVF file {}", path.display()))
            .map_err(config_error);
    }
    Err(config_error(anyhow::anyhow!(
        "`{source}` is neither a catalog entry ({}) nor a readable file",
        catalog::NAMES.join(", ")
    )))
}

/// Uniform partition with the SVF's own grid nodes added.
fn build_chi(f: &SetValuedFunction, pieces: usize) -> CliResult<Partition> {
    let chi = Partition::uniform(f.domain(), pieces).map_err(from_lib)?;
    Ok(match f.grid_partition() {
        Some(g) => chi.with_points(g.nodes()),
        None => chi,
    })
}

struct ResolvedSvf {
    source: String,
    f: SetValuedFunction,
    chi: Partition,
    seeds: usize,
    norm: Norm,
}

impl SvfArgs {
    fn resolve(&self, file: &RunFile) -> CliResult<ResolvedSvf> {
        let source = self.svf.clone().or(file.svf.clone()).unwrap_or_else(|| "jump-pair".into());
        let fiber_points = self
            .fiber_points
            .or(file.fiber_points)
            .unwrap_or(catalog::DEFAULT_FIBER_POINTS);
        let pieces = self.grid.or(file.grid).unwrap_or(1024);
        let seeds = self.seeds.or(file.seeds).unwrap_or(4);
        if seeds == 0 {
            return Err(config_error(anyhow::anyhow!("--seeds must be at least 1")));
        }
        let norm = parse(self.norm.as_deref().or(file.norm.as_deref()).unwrap_or("euclidean"))?;
        let f = resolve_svf(&source, fiber_points)?;
        let chi = build_chi(&f, pieces)?;
        Ok(ResolvedSvf { source, f, chi, seeds, norm })
    }
}

fn read_run_file(path: &Path) -> CliResult<RunFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(config_error)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(config_error)
}

fn resolve_mode(mode: &str, domain: Interval, xs: &[f64]) -> CliResult<BoundFlavor> {
    if mode == "auto" {
        let interior = xs.iter().all(|&x| x > domain.a && x < domain.b);
        return Ok(if interior { BoundFlavor::Jump } else { BoundFlavor::Continuity });
    }
    parse(mode)
}

fn cmd_run(args: RunArgs) -> CliResult<u8> {
    let file = match &args.config {
        Some(p) => read_run_file(p)?,
        None => RunFile::default(),
    };
    let operator: Operator = parse(args.operator.as_deref().or(file.operator.as_deref()).unwrap_or("bd"))?;
    let svf = args.svf.resolve(&file)?;
    let ns = args.n.clone().or(file.n.clone()).unwrap_or_else(|| vec![16, 64, 256, 1024]);
    let xs = args.x.clone().or(file.x.clone()).unwrap_or_else(|| vec![0.5]);
    let delta_rule: DeltaRule = parse(args.delta_rule.as_deref().or(file.delta_rule.as_deref()).unwrap_or("optimize"))?;
    let mode = resolve_mode(
        args.mode.as_deref().or(file.mode.as_deref()).unwrap_or("auto"),
        svf.f.domain(),
        &xs,
    )?;
    let out = args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let strict = args.strict || file.strict.unwrap_or(false);
    if ns.is_empty() || ns[0] == 0 {
        return Err(config_error(anyhow::anyhow!("--n needs positive degrees")));
    }

    let table = convergence_experiment(&ExperimentConfig {
        family: operator.family(),
        svf: svf.f,
        xs,
        ns,
        chi: svf.chi,
        seeds_per_fiber: svf.seeds,
        mode,
        delta_rule,
        rule: QuadratureRule::default(),
        norm: svf.norm,
    })
    .map_err(from_lib)?;

    let violations = table.violations(STRICT_TOL);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("table.csv"), table.to_csv()).context("writing table.csv")?;
    let mut report = table.to_json();
    report["source"] = svf.source.into();
    report["violations"] = violations.len().into();
    let text = serde_json::to_string_pretty(&report).context("serializing report")? + "\n";
    fs::write(out.join("report.json"), text).context("writing report.json")?;

    println!(
        "{} on {} ({} mode, family of {}), chi with {} nodes",
        table.metadata.kernel, table.metadata.svf, mode, table.metadata.family_size, table.metadata.chi_size
    );
    println!("{:>7} {:>8} {:>12} {:>12} {:>10}", "n", "x", "observed", "bound", "delta");
    for r in &table.rows {
        println!(
            "{:>7} {:>8.4} {:>12.4e} {:>12.4e} {:>10.4e}",
            r.n, r.x, r.observed, r.bound.total, r.delta_star
        );
    }
    for s in &table.slopes {
        match s.slope {
            Some(v) => println!("slope at x = {}: {v:.3}", s.x),
            None => println!("slope at x = {}: n/a (errors at the floor)", s.x),
        }
    }
    println!("wrote {}", out.display());
    if !violations.is_empty() {
        eprintln!("{} row(s) exceed their bound", violations.len());
        if strict {
            return Ok(EXIT_VIOLATION);
        }
    }
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> CliResult<u8> {
    let suite: Suite = parse(&args.suite)?;
    let mut acc = Acceptance::new(suite);
    if let Some(seed) = args.seed {
        acc = acc.with_seed(seed);
    }
    if args.corrupt_metadata {
        acc = acc.with_corrupted_metadata();
    }
    println!("{suite} suite, seed {}", acc.seed());
    let start = Instant::now();
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let outcome = acc.run_one(id);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(outcome.name);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if failed.is_empty() {
        println!("all {} criteria passed in {secs:.1} s", CRITERIA.len());
        Ok(0)
    } else {
        println!("{} of {} criteria failed in {secs:.1} s: {}", failed.len(), CRITERIA.len(), failed.join(", "));
        Ok(EXIT_FAILED)
    }
}

fn cmd_selections(args: SelectionArgs) -> CliResult<u8> {
    let svf = args.svf.resolve(&RunFile::default())?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("selections"));
    let family = selection_family(&svf.f, &svf.chi, svf.seeds, svf.norm).map_err(from_lib)?;
    let manifest = family
        .export(&out, svf.f.name(), svf.norm)
        .map_err(|e| Failure { code: EXIT_FAILED, err: e.into() })?;
    let report = family.inheritance_report(&svf.f, svf.norm);
    println!("{} selection(s) from {} seed(s), written to {}", family.len(), family.seeds_tried(), out.display());
    println!("V(F) = {}, max V(s) = {}", format_float(report.variation_f), format_float(report.max_variation_s));
    println!("|F| = {}, max |s| = {}", format_float(report.sup_norm_f), format_float(report.max_sup_norm_s));
    println!("max dist(s(x), F(x)) = {}", format_float(report.max_fiber_distance));
    println!("inheritance {}", if report.holds(1e-9) { "holds" } else { "VIOLATED" });
    debug_assert_eq!(manifest.selections.len(), family.len());
    Ok(if report.holds(1e-9) { 0 } else { EXIT_FAILED })
}

fn cmd_diag(args: DiagArgs) -> CliResult<u8> {
    let operator: Operator = parse(args.operator.as_deref().unwrap_or("bd"))?;
    let ns = args.n.unwrap_or_else(|| vec![10, 100, 1000]);
    let xs = args.x.unwrap_or_else(|| vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    let delta = args.delta.unwrap_or(0.1);
    let mut lines = String::new();
    let mut bad = 0;
    for &n in &ns {
        let kernel = operator.kernel(n).map_err(from_lib)?;
        for &x in &xs {
            let rule = if kernel.nonnegative() { QuadratureRule::ExactPiecewise } else { QuadratureRule::default() };
            let d = diagnostics(kernel.as_ref(), x, delta, rule).map_err(from_lib)?;
            let v = d.violations(1e-12);
            bad += v.len();
            let mut value = serde_json::to_value(&d).context("serializing diagnostics")?;
            value["n"] = n.into();
            value["violations"] = v.into();
            lines.push_str(&serde_json::to_string(&value).context("serializing diagnostics")?);
            lines.push('\n');
        }
    }
    match &args.out {
        Some(p) => fs::write(p, &lines).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{lines}"),
    }
    if bad > 0 {
        eprintln!("{bad} metadata claim(s) contradicted");
        return Ok(EXIT_FAILED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Selections(a) => cmd_selections(a),
        Command::Diag(a) => cmd_diag(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
