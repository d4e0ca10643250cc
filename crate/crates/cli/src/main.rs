mod error;
mod files;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use surrogate_core::bridge::{self, EchoGenerator, ExternalObjective, Session, SessionOptions};
use surrogate_core::diagnostics::{dominance_experiment, DominanceConfig};
use surrogate_core::latent::container::{write_matrix, LAYOUT_LATENTS};
use surrogate_core::linalg::DMatrix;
use surrogate_core::optim::{self, BoParams, CmaesParams};
use surrogate_core::structure::{self, DesignResult, Structure};
use surrogate_core::{ChartKind, Objective, RunRecord, SeedSet, SpaceObjective, SurrogateSpace};

use error::CliError;
use files::{read_latents, read_space, read_spec, seeds_from_table, to_json_pretty, write_bytes, write_space};

#[derive(Parser)]
#[command(name = "surrogate", version, about = "Surrogate latent spaces and black-box optimisation inside them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surrogate space from seed latents
    BuildSpace(BuildSpaceArgs),
    /// Evaluate the surrogate chart on a regular grid
    Grid(GridArgs),
    /// Run a black-box optimiser
    Optimize(OptimizeArgs),
    /// Weight dot product versus cosine similarity experiment
    Diagnose(DiagnoseArgs),
    /// Compare Cα structures: RMSD, TM-score, diversity
    Metrics(MetricsArgs),
    /// Serve a built-in generator over protocol v1 on stdin/stdout
    #[command(hide = true)]
    Serve(ServeArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["seeds_file", "sample", "invert"])))]
struct BuildSpaceArgs {
    /// Latent spec (JSON)
    spec: PathBuf,
    /// Seed latents: binary container or CSV with one latent per row
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    /// Draw this many seeds from the latent distribution
    #[arg(long)]
    sample: Option<usize>,
    /// Latents obtained by inverting known objects (container or CSV)
    #[arg(long)]
    invert: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Chart::Kr)]
    chart: Chart,
    /// Negate seed k (0-based) in inner-latent space; repeatable
    #[arg(long)]
    negate: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Chart {
    Angular,
    Kr,
}

impl From<Chart> for ChartKind {
    fn from(c: Chart) -> Self {
        match c {
            Chart::Angular => ChartKind::Angular,
            Chart::Kr => ChartKind::KnotheRosenblatt,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    space: PathBuf,
    /// Points per free axis: one value, or one per free axis separated by commas
    #[arg(long, value_delimiter = ',', required = true)]
    res: Vec<usize>,
    /// Fix an axis (0-based): axis=value; repeatable
    #[arg(long, value_parser = parse_slice)]
    slice: Vec<(usize, f64)>,
    #[arg(short, long)]
    output: PathBuf,
    /// Write latents to this container instead of inlining them in the CSV
    #[arg(long)]
    latents_out: Option<PathBuf>,
}

fn parse_slice(s: &str) -> Result<(usize, f64), String> {
    let (a, v) = s.split_once('=').ok_or_else(|| format!("expected axis=value, got {s:?}"))?;
    let axis = a.trim().parse().map_err(|_| format!("bad axis {a:?}"))?;
    let value = v.trim().parse().map_err(|_| format!("bad value {v:?}"))?;
    Ok((axis, value))
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    RsU,
    CmaesU,
    BoU,
    RsZ,
    CmaesZ,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Surrogate space bundle (space.json)
    #[arg(long, conflicts_with = "spec")]
    space: Option<PathBuf>,
    /// Latent spec (JSON); required for the cone objective
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Algo,
    /// `cone` or `external:COMMAND`
    #[arg(long, default_value = "cone")]
    objective: String,
    /// Number of seeds for the cone objective
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Chart for the space built around the cone seeds
    #[arg(long, value_enum, default_value_t = Chart::Kr)]
    chart: Chart,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the cone construction (defaults to --seed)
    #[arg(long)]
    problem_seed: Option<u64>,
    #[arg(long, default_value_t = 4)]
    population: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma0: f64,
    #[arg(long, default_value_t = 5)]
    init_points: usize,
    /// Trace as CSV: step,score,best_so_far
    #[arg(short, long)]
    output: PathBuf,
    /// Full trace, points included, as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the cone's hidden target latent as one CSV row
    #[arg(long)]
    target_out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "D")]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    realisations: usize,
    #[arg(long, default_value_t = 100)]
    n_u: usize,
    #[arg(long, value_enum, default_value_t = Chart::Kr)]
    chart: Chart,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write (w_dot, cos_sim) pairs as CSV
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference structure (.xyz or .csv)
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Generated structures; repeatable
    #[arg(long = "gen", required = true, num_args = 1..)]
    generated: Vec<PathBuf>,
    /// Also report the greedy diversity count
    #[arg(long)]
    diversity: bool,
    #[arg(long, default_value_t = structure::SUCCESS_RMSD)]
    rmsd_threshold: f64,
    #[arg(long, default_value_t = structure::DIVERSITY_TM)]
    tm_threshold: f64,
    /// Write the JSON report here instead of stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServeMode {
    Echo,
    Cone,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum, default_value_t = ServeMode::Echo)]
    mode: ServeMode,
    #[arg(long, required_if_eq("mode", "cone"))]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildSpace(a) => build_space(a),
        Command::Grid(a) => grid(a),
        Command::Optimize(a) => optimize(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Metrics(a) => metrics(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn build_space(a: BuildSpaceArgs) -> Result<(), CliError> {
    let spec = read_spec(&a.spec)?;
    let mut seeds = match (a.sample, a.seeds_file.or(a.invert)) {
        (Some(k), _) => SeedSet::sample(spec, k, a.seed)?,
        (None, Some(path)) => {
            let table = read_latents(&path, &spec)?;
            seeds_from_table(spec, table)?
        }
        (None, None) => unreachable!("clap requires a seed source"),
    };
    for k in a.negate {
        seeds = seeds.negate_seed(k)?;
    }
    let space = SurrogateSpace::new(seeds, a.chart.into())?;
    write_space(&a.output, &space)?;
    println!("surrogate space: K={} dim={} chart={}", space.seeds().k(), space.dim(), space.chart());
    Ok(())
}

fn fmt_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v:?}");
    }
}

fn grid(a: GridArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let points = space.grid(&a.res, &a.slice)?;
    let n = space.dim();
    let d = space.seeds().dim();
    let mut out = String::new();
    let mut header: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
    if a.latents_out.is_some() {
        header.push("latent_index".into());
    } else {
        header.extend((0..d).map(|i| format!("z{i}")));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (idx, p) in points.iter().enumerate() {
        fmt_row(&mut out, p.u.as_slice().iter().copied());
        if a.latents_out.is_some() {
            let _ = write!(out, ",{idx}");
        } else {
            out.push(',');
            fmt_row(&mut out, p.latent.iter().copied());
        }
        out.push('\n');
    }
    write_bytes(&a.output, out.as_bytes())?;
    if let Some(path) = a.latents_out {
        let flat: Vec<f64> = points.iter().flat_map(|p| p.latent.iter().copied()).collect();
        let m = DMatrix::from_column_slice(d, points.len(), &flat);
        let mut buf = Vec::new();
        write_matrix(&mut buf, space.seeds().spec(), &m, LAYOUT_LATENTS)?;
        write_bytes(&path, &buf)?;
    }
    println!("grid: {} points", points.len());
    Ok(())
}

enum LatentObjective {
    Cone(bridge::SyntheticCone),
    External(ExternalObjective),
}

impl LatentObjective {
    fn as_objective(&mut self) -> &mut dyn Objective {
        match self {
            LatentObjective::Cone(c) => c,
            LatentObjective::External(e) => e,
        }
    }

    fn session_failure(&self) -> Option<String> {
        match self {
            LatentObjective::External(e) => e.session().failure().map(|f| f.to_string()),
            LatentObjective::Cone(_) => None,
        }
    }
}

fn optimize(a: OptimizeArgs) -> Result<(), CliError> {
    if a.budget == 0 {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let (space, spec, mut objective) = if a.objective == "cone" {
        if a.space.is_some() {
            return Err(CliError::Usage("the cone objective builds its own seeds; pass --spec instead of --space".into()));
        }
        let spec_path = a.spec.as_ref().ok_or_else(|| CliError::Usage("the cone objective needs --spec".into()))?;
        let spec = read_spec(spec_path)?;
        let (seeds, cone) = bridge::synthetic_cone(&spec, a.k, a.problem_seed.unwrap_or(a.seed))?;
        if let Some(path) = &a.target_out {
            let mut row = String::new();
            fmt_row(&mut row, cone.target_latent()?);
            row.push('\n');
            write_bytes(path, row.as_bytes())?;
        }
        let space = SurrogateSpace::new(seeds, a.chart.into())?;
        (Some(space), spec, LatentObjective::Cone(cone))
    } else if let Some(cmd) = a.objective.strip_prefix("external:") {
        let (space, spec) = match (&a.space, &a.spec) {
            (Some(p), _) => {
                let space = read_space(p)?;
                let spec = space.seeds().spec().clone();
                (Some(space), spec)
            }
            (None, Some(p)) => (None, read_spec(p)?),
            (None, None) => return Err(CliError::Usage("external objectives need --space or --spec".into())),
        };
        let session = Session::spawn(cmd, spec.clone(), SessionOptions::from_env()?)?;
        (space, spec, LatentObjective::External(ExternalObjective::new(session)))
    } else {
        return Err(CliError::Usage(format!("unknown objective {:?}; expected cone or external:COMMAND", a.objective)));
    };

    let cma = CmaesParams { population: a.population, sigma0: a.sigma0 };
    let record = match a.algo {
        Algo::RsZ => optim::random_search_z(objective.as_objective(), &spec, a.budget, a.seed)?,
        Algo::CmaesZ => optim::cmaes_z(objective.as_objective(), &spec, a.budget, a.seed, cma)?,
        Algo::RsU | Algo::CmaesU | Algo::BoU => {
            let space = space.as_ref().ok_or_else(|| CliError::Usage("surrogate-space algorithms need --space".into()))?;
            let mut composed = SpaceObjective::new(space, objective.as_objective());
            let dim = space.dim();
            match a.algo {
                Algo::RsU => optim::random_search_u(&mut composed, dim, a.budget, a.seed)?,
                Algo::CmaesU => optim::cmaes_u(&mut composed, dim, a.budget, a.seed, cma)?,
                _ => {
                    let params = BoParams { init_points: a.init_points, ..BoParams::default() };
                    optim::bo_u(&mut composed, dim, a.budget, a.seed, &params)?
                }
            }
        }
    };
    write_run(&a.output, a.json.as_deref(), &record)?;
    match record.best() {
        Some(b) => println!("best {b:?} after {} evaluations ({} failed)", record.len(), record.failures()),
        None => println!("no successful evaluations out of {}", record.len()),
    }
    if let Some(f) = objective.session_failure() {
        return Err(CliError::External(f));
    }
    Ok(())
}

fn write_run(csv: &Path, json: Option<&Path>, record: &RunRecord) -> Result<(), CliError> {
    write_bytes(csv, record.to_csv().as_bytes())?;
    if let Some(path) = json {
        write_bytes(path, to_json_pretty(record).as_bytes())?;
    }
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let cfg = DominanceConfig {
        k: a.k,
        d: a.d,
        n_seed_realisations: a.realisations,
        n_u: a.n_u,
        rng_seed: a.seed,
        chart: a.chart.into(),
    };
    let mut report = dominance_experiment(&cfg, a.scatter.is_some())?;
    if let Some(path) = &a.scatter {
        write_bytes(path, report.scatter_csv().expect("scatter kept").as_bytes())?;
    }
    report.scatter = None;
    write_bytes(&a.output, to_json_pretty(&report).as_bytes())?;
    println!("pearson_r {:?} over {} pairs", report.pearson_r, report.n_pairs);
    Ok(())
}

fn read_structure(path: &Path) -> Result<Structure, CliError> {
    let text = String::from_utf8(files::read_bytes(path)?)
        .map_err(|_| CliError::Usage(format!("{}: not UTF-8", path.display())))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("structure").to_string();
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Structure::parse_csv(label, &text)
    } else {
        Structure::parse_xyz(label, &text)
    };
    parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct DesignRow {
    label: String,
    rmsd: f64,
    tm_score: f64,
    success: bool,
}

#[derive(Serialize)]
struct MetricsReport {
    reference: String,
    rmsd_threshold: f64,
    tm_threshold: f64,
    designs: Vec<DesignRow>,
    successes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    diversity: Option<usize>,
}

fn metrics(a: MetricsArgs) -> Result<(), CliError> {
    let reference = read_structure(&a.reference)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for path in &a.generated {
        let s = read_structure(path)?;
        let tm = structure::tm_score(&s, &reference)?;
        let r = DesignResult::evaluate(s, reference.clone(), a.rmsd_threshold)?;
        rows.push(DesignRow { label: r.structure.label.clone(), rmsd: r.rmsd, tm_score: tm, success: r.success });
        results.push(r);
    }
    let diversity = if a.diversity {
        Some(structure::diversity_count(&results, a.tm_threshold, a.rmsd_threshold)?)
    } else {
        None
    };
    let report = MetricsReport {
        reference: reference.label.clone(),
        rmsd_threshold: a.rmsd_threshold,
        tm_threshold: a.tm_threshold,
        successes: rows.iter().filter(|r| r.success).count(),
        designs: rows,
        diversity,
    };
    let json = to_json_pretty(&report);
    match &a.output {
        Some(path) => write_bytes(path, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    let outcome = match a.mode {
        ServeMode::Echo => bridge::serve(stdin, stdout, &mut EchoGenerator),
        ServeMode::Cone => {
            let spec = read_spec(a.spec.as_ref().expect("clap enforces --spec"))?;
            let (_, mut cone) = bridge::synthetic_cone(&spec, a.k, a.seed)?;
            bridge::serve(stdin, stdout, &mut cone)
        }
    };
    outcome.map_err(|e| CliError::External(e.to_string()))
}
