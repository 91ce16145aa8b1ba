use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randsub::harness::{
    format_sig, parse_pairs, run_coverage_curve, run_lambda, run_simulation, run_test, CoverageRow, ExperimentSpec,
    PreparedDesign, TestRow,
};
use randsub::lambda::LambdaReport;
use randsub::meantest::{default_grid, linspace};
use randsub::{CriticalValueMethod, Graph, InferenceConfig, Sample};

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const PROB_DIGITS: usize = 6;

#[derive(Parser)]
#[command(name = "randsub", version, about = "Randomized-subsampling inference for dependent cross-sections")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test hypothesized means on a numeric CSV and report confidence-set membership.
    Test(TestArgs),
    /// Monte Carlo coverage of the true mean for every level and method.
    Simulate(SimArgs),
    /// Coverage over a grid of means.
    CoverageCurve(CurveArgs),
    /// Lambda-coefficients of a design's covariance.
    Lambda(LambdaArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Numeric CSV, one observation per row.
    data: PathBuf,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
    /// Hypothesized mean, comma separated; repeat for several.
    #[arg(long, allow_hyphen_values = true)]
    mu: Vec<String>,
    /// Univariate grid `lo:hi:points`; default is a grid around the sample mean.
    #[arg(long, conflicts_with = "mu", allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.005)]
    beta: f64,
    #[arg(long, default_value = "permutation")]
    method: String,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    l: usize,
    #[arg(long, default_value_t = 1000)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment spec file of `key = value` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override a spec key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Edge list to use instead of drawing the design's graph.
    #[arg(long)]
    graph_file: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_parser = ["set", "test"])]
    coverage_mode: Option<String>,
    /// Also write every replication's sample to this CSV.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
    /// Add a wall_time_s column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Means to evaluate, comma separated or `linspace(lo, hi, points)`.
    #[arg(long, allow_hyphen_values = true)]
    mu_grid: Option<String>,
}

#[derive(Args)]
struct LambdaArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Tuple sizes, comma separated.
    #[arg(long)]
    k: Option<String>,
}

enum Failure {
    Input(String),
    Degenerate(String),
    Io(io::Error),
}

impl From<randsub::Error> for Failure {
    fn from(e: randsub::Error) -> Self {
        if e.is_degenerate() {
            Failure::Degenerate(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(io::Error::other(e))
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_spec(args: &SpecArgs, extra: &[(String, String)]) -> CliResult<ExperimentSpec> {
    let mut pairs = match &args.spec {
        Some(path) => parse_pairs(&read_file(path)?)?,
        None => Vec::new(),
    };
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("--set expects KEY=VALUE, got `{item}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = args.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    pairs.extend_from_slice(extra);
    Ok(ExperimentSpec::from_pairs(&pairs)?)
}

fn load_graph(path: &Option<PathBuf>) -> CliResult<Option<Graph>> {
    path.as_ref()
        .map(|p| Graph::parse_edge_list(&read_file(p)?).map_err(Failure::from))
        .transpose()
}

fn output(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_coverage(rows: &[CoverageRow], with_mu: bool, timing: bool, out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["design", "n", "lambda", "m_attach", "c", "rho"];
    if with_mu {
        header.push("mu");
    }
    header.extend(["level", "method", "coverage", "mc_se", "mc_reps"]);
    if timing {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    for row in rows {
        let d = row.design;
        let mut rec = vec![
            d.name().to_string(),
            row.n.to_string(),
            opt(d.lambda()),
            opt(d.m_attach()),
            opt(d.c()),
            opt(d.rho()),
        ];
        if with_mu {
            rec.push(format_sig(row.mu, 12));
        }
        rec.extend([
            format_sig(row.level, PROB_DIGITS),
            row.method.as_str().to_string(),
            format_sig(row.coverage, PROB_DIGITS),
            format_sig(row.mc_se, PROB_DIGITS),
            row.mc_reps.to_string(),
        ]);
        if timing {
            rec.push(format!("{:.3}", row.wall_time_s));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_lambda(reports: &[LambdaReport], out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "k", "lambda", "bound", "method", "mc_se"])?;
    for r in reports {
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.lambda_value.to_string(),
            r.bound.to_string(),
            r.method.as_str().to_string(),
            r.mc_se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_test(rows: &[TestRow], m: usize, out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = if m == 1 {
        vec!["mu".into()]
    } else {
        (1..=m).map(|j| format!("mu_{j}")).collect()
    };
    header.extend(["statistic", "critical_value", "reject", "q", "member"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut rec: Vec<String> = row.mu.iter().map(f64::to_string).collect();
        rec.extend([
            row.statistic.to_string(),
            row.critical_value.to_string(),
            row.reject.to_string(),
            format_sig(row.q, PROB_DIGITS),
            row.member.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_sample(path: &Path, header: bool) -> CliResult<Sample> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Failure::Input(format!("{}: line {line}, column {}: `{cell}` is not a number", path.display(), j + 1))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::Input(format!("{}: no data rows", path.display())));
    }
    Ok(Sample::from_rows(&rows)?)
}

fn parse_mu(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Failure::Input(format!("bad --mu value `{text}`"))))
        .collect()
}

fn parse_colon_grid(text: &str) -> CliResult<Vec<Vec<f64>>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::Input(format!("--grid expects lo:hi:points, got `{text}`"));
    let [lo, hi, k] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if k == 0 {
        return Err(bad());
    }
    Ok(linspace(lo, hi, k).into_iter().map(|v| vec![v]).collect())
}

fn cmd_test(args: &TestArgs, out: &Option<PathBuf>) -> CliResult<()> {
    let x = read_sample(&args.data, args.header)?;
    let defaults = InferenceConfig::for_sample_size(x.n());
    let cfg = InferenceConfig {
        r: args.r.unwrap_or(defaults.r),
        b: args.b.unwrap_or(defaults.b),
        l: args.l,
        s: args.s,
        alpha: args.alpha,
        beta: args.beta,
        seed: args.seed,
        critical_value: CriticalValueMethod::parse(&args.method)?,
    };
    let mus = if !args.mu.is_empty() {
        args.mu.iter().map(|m| parse_mu(m)).collect::<CliResult<Vec<_>>>()?
    } else if let Some(g) = &args.grid {
        parse_colon_grid(g)?
    } else {
        cfg.validate_for(x.n())?;
        default_grid(&x, &cfg)?
    };
    let rows = run_test(&x, &mus, &cfg)?;
    write_test(&rows, x.m(), &mut *output(out)?)
}

fn dump_samples(path: &Path, spec: &ExperimentSpec, prepared: &PreparedDesign) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["rep", "index", "value"])?;
    for rep in 0..spec.mc_reps as u64 {
        let x = prepared.sample(spec.seed, rep)?;
        for (i, v) in x.as_slice().iter().enumerate() {
            w.write_record([rep.to_string(), i.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn prepare(spec: &ExperimentSpec, graph_file: &Option<PathBuf>) -> CliResult<PreparedDesign> {
    let prepared = PreparedDesign::new(spec.design, spec.n, spec.seed, load_graph(graph_file)?)?;
    if let Some(p) = prepared.repair_perturbation().filter(|&p| p > 0.0) {
        eprintln!("network correlation repaired: relative Frobenius change {p:.3e}");
    }
    Ok(prepared)
}

fn sim_overrides(args: &SimArgs) -> Vec<(String, String)> {
    args.coverage_mode
        .iter()
        .map(|m| ("coverage_mode".to_string(), m.clone()))
        .collect()
}

fn cmd_simulate(args: &SimArgs, out: &Option<PathBuf>) -> CliResult<()> {
    let spec = load_spec(&args.spec, &sim_overrides(args))?;
    let prepared = prepare(&spec, &args.spec.graph_file)?;
    if let Some(path) = &args.dump_samples {
        dump_samples(path, &spec, &prepared)?;
    }
    let rows = run_simulation(&spec, &prepared)?;
    write_coverage(&rows, false, args.timing, &mut *output(out)?)
}

fn cmd_curve(args: &CurveArgs, out: &Option<PathBuf>) -> CliResult<()> {
    let mut extra = sim_overrides(&args.sim);
    if let Some(grid) = &args.mu_grid {
        extra.push(("mu_grid".into(), grid.clone()));
    }
    let spec = load_spec(&args.sim.spec, &extra)?;
    let prepared = prepare(&spec, &args.sim.spec.graph_file)?;
    if let Some(path) = &args.sim.dump_samples {
        dump_samples(path, &spec, &prepared)?;
    }
    let rows = run_coverage_curve(&spec, &prepared)?;
    write_coverage(&rows, true, args.sim.timing, &mut *output(out)?)
}

fn cmd_lambda(args: &LambdaArgs, out: &Option<PathBuf>) -> CliResult<()> {
    let extra: Vec<(String, String)> = args.k.iter().map(|k| ("k".to_string(), k.clone())).collect();
    let spec = load_spec(&args.spec, &extra)?;
    let reports = run_lambda(&spec, load_graph(&args.spec.graph_file)?)?;
    write_lambda(&reports, &mut *output(out)?)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Io(io::Error::other(e)))?;
    }
    match &cli.command {
        Command::Test(args) => cmd_test(args, &cli.out),
        Command::Simulate(args) => cmd_simulate(args, &cli.out),
        Command::CoverageCurve(args) => cmd_curve(args, &cli.out),
        Command::Lambda(args) => cmd_lambda(args, &cli.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Degenerate(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
