//! Monte Carlo experiments: coverage tables, coverage curves over a mean
//! grid, lambda reports, and one-shot tests on user data.
//!
//! Every replication draws from its own [`StreamFamily`], and the graph of a
//! design comes from the shared family, so results do not depend on the
//! number of threads.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{default_subsample_size, CriticalValueMethod, InferenceConfig, Sample};
use crate::dgp::{
    dependency_graph_mix, dependency_graph_mix_covariance, iid_normal, MixingParams, NetworkCovParams,
    NetworkGaussian,
};
use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, barabasi_albert, erdos_renyi, Graph};
use crate::lambda::{lambda_exact, lambda_monte_carlo, LambdaReport, MAX_EXACT_N};
use crate::linalg::SymmetricMatrix;
use crate::meantest::{
    confidence_summaries, critical_value_from_draws, linspace, meets_level, permutation_draws, q_from_summaries,
    BundleSummary, MeanStatistic,
};
use crate::normal::upper_critical;
use crate::permute::{draw_bundle_with, purpose, PrefixSampler, StreamFamily};

/// Simulation design. Every design has mean zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Design {
    Iid,
    /// Edge mixing on an Erdős–Rényi dependency graph.
    DepGraphEr { lambda: f64, c: f64 },
    /// Edge mixing on a Barabási–Albert dependency graph.
    DepGraphBa { m_attach: usize, c: f64 },
    /// Gaussian with correlation `exp(-rho * D)` on an Erdős–Rényi network.
    NetworkEr { lambda: f64, rho: f64 },
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Iid => "iid",
            Design::DepGraphEr { .. } => "depgraph_er",
            Design::DepGraphBa { .. } => "depgraph_ba",
            Design::NetworkEr { .. } => "network_er",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Design::DepGraphEr { lambda, .. } | Design::NetworkEr { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    pub fn m_attach(&self) -> Option<usize> {
        match *self {
            Design::DepGraphBa { m_attach, .. } => Some(m_attach),
            _ => None,
        }
    }

    pub fn c(&self) -> Option<f64> {
        match *self {
            Design::DepGraphEr { c, .. } | Design::DepGraphBa { c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            Design::NetworkEr { rho, .. } => Some(rho),
            _ => None,
        }
    }

    pub fn uses_graph(&self) -> bool {
        !matches!(self, Design::Iid)
    }
}

/// How a replication counts towards coverage of the true mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    /// Membership of the truth in C_alpha: the indicator of q(mu0; alpha - beta) >= 1 - alpha.
    Set,
    /// Non-rejection of the level-alpha test at mu0, averaged over the S
    /// test replications: q(mu0; alpha).
    Test,
}

impl CoverageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CoverageMode::Set => "set",
            CoverageMode::Test => "test",
        }
    }
}

impl FromStr for CoverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "set" => Ok(CoverageMode::Set),
            "test" => Ok(CoverageMode::Test),
            other => Err(Error::InvalidInput(format!("unknown coverage mode `{other}` (expected set or test)"))),
        }
    }
}

/// A complete experiment description, read from flat `key = value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub design: Design,
    pub n: usize,
    pub mc_reps: usize,
    /// Confidence levels, e.g. 0.95; alpha is one minus the level.
    pub levels: Vec<f64>,
    pub methods: Vec<CriticalValueMethod>,
    /// Number of permutations R per statistic; defaults to n.
    pub r: Option<usize>,
    /// Subsample size; defaults to max(2, floor(n^(1/3))).
    pub b: Option<usize>,
    pub l: usize,
    pub s: usize,
    pub beta: f64,
    pub seed: u64,
    pub coverage_mode: CoverageMode,
    /// Means at which `coverage-curve` evaluates coverage.
    pub mu_grid: Option<Vec<f64>>,
    /// Tuple sizes for the lambda report.
    pub k: Vec<usize>,
    /// Population sizes for the lambda report; defaults to `n`.
    pub lambda_n: Option<Vec<usize>>,
    pub lambda_draws: usize,
}

/// Keys accepted in a spec file, in the order they are written.
pub const SPEC_KEYS: &[&str] = &[
    "design",
    "n",
    "lambda",
    "m_attach",
    "c",
    "rho",
    "mc_reps",
    "levels",
    "methods",
    "r",
    "b",
    "l",
    "s",
    "beta",
    "seed",
    "coverage_mode",
    "mu_grid",
    "k",
    "lambda_n",
    "lambda_draws",
];

/// Splits `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

/// `a,b,c` or `linspace(lo, hi, points)`.
fn parse_grid(value: &str) -> Result<Vec<f64>> {
    if let Some(inner) = value.strip_prefix("linspace(").and_then(|v| v.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if let [lo, hi, points] = parts[..] {
            let points: usize = parse_value("mu_grid", points)?;
            if points == 0 {
                return Err(Error::InvalidInput("mu_grid needs at least one point".into()));
            }
            return Ok(linspace(parse_value("mu_grid", lo)?, parse_value("mu_grid", hi)?, points));
        }
        return Err(Error::InvalidInput(format!("bad grid `{value}`")));
    }
    parse_list("mu_grid", value)
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentSpec {
    /// Parses spec text; later lines for the same key override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Builds a spec from key/value pairs; later pairs win, so command-line
    /// overrides can simply be appended to the file's pairs.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map: Vec<(&str, &str)> = Vec::new();
        for (k, v) in pairs {
            if !SPEC_KEYS.contains(&k.as_str()) {
                return Err(Error::InvalidInput(format!("unknown spec key `{k}`")));
            }
            map.retain(|(key, _)| key != k);
            map.push((k.as_str(), v.as_str()));
        }
        let get = |key: &str| map.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let required = |key: &str| get(key).ok_or_else(|| Error::InvalidInput(format!("missing spec key `{key}`")));
        let opt_f64 = |key: &str| get(key).map(|v| parse_value::<f64>(key, v)).transpose();

        let design_name = required("design")?;
        let (lambda, m_attach, c, rho) = (
            opt_f64("lambda")?,
            get("m_attach").map(|v| parse_value::<usize>("m_attach", v)).transpose()?,
            opt_f64("c")?,
            opt_f64("rho")?,
        );
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::InvalidInput(format!("design `{design_name}` needs `{key}`")));
        let design = match design_name {
            "iid" => Design::Iid,
            "depgraph_er" => Design::DepGraphEr { lambda: need(lambda, "lambda")?, c: need(c, "c")? },
            "depgraph_ba" => Design::DepGraphBa {
                m_attach: m_attach.ok_or_else(|| Error::InvalidInput("design `depgraph_ba` needs `m_attach`".into()))?,
                c: need(c, "c")?,
            },
            "network_er" => Design::NetworkEr { lambda: need(lambda, "lambda")?, rho: need(rho, "rho")? },
            other => return Err(Error::InvalidInput(format!("unknown design `{other}`"))),
        };
        for (key, given, used) in [
            ("lambda", lambda.is_some(), design.lambda().is_some()),
            ("m_attach", m_attach.is_some(), design.m_attach().is_some()),
            ("c", c.is_some(), design.c().is_some()),
            ("rho", rho.is_some(), design.rho().is_some()),
        ] {
            if given && !used {
                return Err(Error::InvalidInput(format!("`{key}` does not apply to design `{design_name}`")));
            }
        }

        let spec = ExperimentSpec {
            design,
            n: parse_value("n", required("n")?)?,
            mc_reps: get("mc_reps").map_or(Ok(1000), |v| parse_value("mc_reps", v))?,
            levels: get("levels").map_or(Ok(vec![0.99, 0.95, 0.90]), |v| parse_list("levels", v))?,
            methods: match get("methods") {
                None => vec![CriticalValueMethod::AsymptoticNormal, CriticalValueMethod::Permutation],
                Some(v) => v
                    .split(',')
                    .map(str::trim)
                    .filter(|m| !m.is_empty())
                    .map(CriticalValueMethod::parse)
                    .collect::<Result<_>>()?,
            },
            r: get("r").map(|v| parse_value("r", v)).transpose()?,
            b: get("b").map(|v| parse_value("b", v)).transpose()?,
            l: get("l").map_or(Ok(1000), |v| parse_value("l", v))?,
            s: get("s").map_or(Ok(1000), |v| parse_value("s", v))?,
            beta: get("beta").map_or(Ok(0.005), |v| parse_value("beta", v))?,
            seed: get("seed").map_or(Ok(1), |v| parse_value("seed", v))?,
            coverage_mode: get("coverage_mode").map_or(Ok(CoverageMode::Test), str::parse)?,
            mu_grid: get("mu_grid").map(parse_grid).transpose()?,
            k: get("k").map_or(Ok(vec![2]), |v| parse_list("k", v))?,
            lambda_n: get("lambda_n").map(|v| parse_list("lambda_n", v)).transpose()?,
            lambda_draws: get("lambda_draws").map_or(Ok(100_000), |v| parse_value("lambda_draws", v))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self.design {
            Design::DepGraphEr { lambda, c } => {
                MixingParams::new(c)?;
                if !(0.0..=(self.n.saturating_sub(1)) as f64).contains(&lambda) {
                    return bad(format!("lambda = {lambda} outside [0, n - 1]"));
                }
            }
            Design::DepGraphBa { m_attach, c } => {
                MixingParams::new(c)?;
                if self.n <= crate::graph::BA_SEED_NODES || !(1..=crate::graph::BA_SEED_NODES).contains(&m_attach) {
                    return bad(format!("Barabási–Albert design needs n > 20 and 1 <= m_attach <= 20"));
                }
            }
            Design::NetworkEr { lambda, rho } => {
                NetworkCovParams::new(rho)?;
                if !(0.0..=(self.n.saturating_sub(1)) as f64).contains(&lambda) {
                    return bad(format!("lambda = {lambda} outside [0, n - 1]"));
                }
            }
            Design::Iid => {}
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.mc_reps == 0 {
            return bad("mc_reps must be positive".into());
        }
        if self.levels.is_empty() || self.methods.is_empty() {
            return bad("levels and methods must be non-empty".into());
        }
        for &level in &self.levels {
            let alpha = 1.0 - level;
            if !(alpha > self.beta && level < 1.0) {
                return bad(format!("level {level} leaves no room for beta = {}", self.beta));
            }
        }
        if let Some(grid) = &self.mu_grid {
            if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
                return bad("mu_grid must hold finite values".into());
            }
        }
        if let Some(&k) = self.k.iter().find(|&&k| !(1..=crate::lambda::MAX_K).contains(&k)) {
            return bad(format!("k must be in 1..={}, got {k}", crate::lambda::MAX_K));
        }
        for level in &self.levels {
            self.config(1.0 - level, CriticalValueMethod::Permutation).validate_for(self.n)?;
        }
        Ok(())
    }

    /// Inference settings at level `alpha`.
    pub fn config(&self, alpha: f64, method: CriticalValueMethod) -> InferenceConfig {
        InferenceConfig {
            r: self.r.unwrap_or(self.n),
            b: self.b.unwrap_or_else(|| default_subsample_size(self.n)),
            l: self.l,
            s: self.s,
            alpha,
            beta: self.beta,
            seed: self.seed,
            critical_value: method,
        }
    }

    /// Canonical text; `parse(serialize(spec)) == spec`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("design", self.design.name().into());
        put("n", self.n.to_string());
        if let Some(v) = self.design.lambda() {
            put("lambda", v.to_string());
        }
        if let Some(v) = self.design.m_attach() {
            put("m_attach", v.to_string());
        }
        if let Some(v) = self.design.c() {
            put("c", v.to_string());
        }
        if let Some(v) = self.design.rho() {
            put("rho", v.to_string());
        }
        put("mc_reps", self.mc_reps.to_string());
        put("levels", join(&self.levels));
        put("methods", self.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","));
        if let Some(r) = self.r {
            put("r", r.to_string());
        }
        if let Some(b) = self.b {
            put("b", b.to_string());
        }
        put("l", self.l.to_string());
        put("s", self.s.to_string());
        put("beta", self.beta.to_string());
        put("seed", self.seed.to_string());
        put("coverage_mode", self.coverage_mode.as_str().into());
        if let Some(grid) = &self.mu_grid {
            put("mu_grid", join(grid));
        }
        put("k", join(&self.k));
        if let Some(ns) = &self.lambda_n {
            put("lambda_n", join(ns));
        }
        put("lambda_draws", self.lambda_draws.to_string());
        out
    }
}

/// A design with its graph fixed: the random graph is drawn once per
/// (design, seed) and reused by every replication.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    design: Design,
    n: usize,
    graph: Option<Graph>,
    network: Option<NetworkGaussian>,
}

impl PreparedDesign {
    /// Draws the design's graph from the shared stream, or uses `graph` when given.
    pub fn new(design: Design, n: usize, seed: u64, graph: Option<Graph>) -> Result<Self> {
        if let Some(g) = &graph {
            if !design.uses_graph() {
                return Err(Error::InvalidInput("the iid design takes no graph".into()));
            }
            if g.n() != n {
                return Err(Error::InvalidInput(format!("graph has {} nodes but n = {n}", g.n())));
            }
        }
        let mut rng = StreamFamily::shared(seed).stream(purpose::GRAPH);
        let graph = match (design, graph) {
            (Design::Iid, _) => None,
            (_, Some(g)) => Some(g),
            (Design::DepGraphEr { lambda, .. } | Design::NetworkEr { lambda, .. }, None) => {
                Some(erdos_renyi(n, lambda, &mut rng)?)
            }
            (Design::DepGraphBa { m_attach, .. }, None) => Some(barabasi_albert(n, m_attach, &mut rng)?),
        };
        let network = match (design, &graph) {
            (Design::NetworkEr { rho, .. }, Some(g)) => {
                Some(NetworkGaussian::new(&all_pairs_distances(g), NetworkCovParams::new(rho)?)?)
            }
            _ => None,
        };
        Ok(PreparedDesign { design, n, graph, network })
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.graph.as_ref()
    }

    /// Relative Frobenius change made when repairing the network correlation.
    pub fn repair_perturbation(&self) -> Option<f64> {
        self.network.as_ref().map(NetworkGaussian::perturbation)
    }

    /// The sample of replication `rep`.
    pub fn sample(&self, seed: u64, rep: u64) -> Result<Sample> {
        let mut rng = StreamFamily::new(seed, rep).data();
        match (self.design, &self.graph, &self.network) {
            (Design::Iid, _, _) => iid_normal(self.n, &mut rng),
            (Design::DepGraphEr { c, .. } | Design::DepGraphBa { c, .. }, Some(g), _) => {
                dependency_graph_mix(g, MixingParams::new(c)?, &mut rng)
            }
            (Design::NetworkEr { .. }, _, Some(net)) => net.sample(&mut rng),
            _ => unreachable!("prepared design is missing its graph"),
        }
    }

    /// Population covariance of the design's observations.
    pub fn covariance(&self) -> Result<SymmetricMatrix> {
        Ok(match (self.design, &self.graph, &self.network) {
            (Design::Iid, _, _) => SymmetricMatrix::identity(self.n),
            (Design::DepGraphEr { c, .. } | Design::DepGraphBa { c, .. }, Some(g), _) => {
                dependency_graph_mix_covariance(g, MixingParams::new(c)?)
            }
            (Design::NetworkEr { .. }, _, Some(net)) => {
                let cov = net.covariance();
                SymmetricMatrix::from_fn(self.n, |i, j| cov[(i, j)])
            }
            _ => unreachable!("prepared design is missing its graph"),
        })
    }
}

/// One cell of a coverage table or curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub design: Design,
    pub n: usize,
    /// The evaluated mean; 0 (the truth) for coverage tables.
    pub mu: f64,
    pub level: f64,
    pub method: CriticalValueMethod,
    pub coverage: f64,
    pub mc_se: f64,
    pub mc_reps: usize,
    /// Wall time of the whole run the row belongs to.
    pub wall_time_s: f64,
}

/// `sqrt(p (1 - p) / reps)`.
pub fn coverage_se(coverage: f64, reps: usize) -> f64 {
    (coverage * (1.0 - coverage) / reps as f64).max(0.0).sqrt()
}

struct Cell {
    level: f64,
    method: CriticalValueMethod,
}

fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    spec.levels
        .iter()
        .flat_map(|&level| spec.methods.iter().map(move |&method| Cell { level, method }))
        .collect()
}

/// Coverage contributions of one replication, indexed `[cell][mu]`.
fn replicate(spec: &ExperimentSpec, prepared: &PreparedDesign, mus: &[f64], rep: u64) -> Result<Vec<Vec<f64>>> {
    let x = prepared.sample(spec.seed, rep)?;
    let stat = MeanStatistic::new(&x)?;
    let family = StreamFamily::new(spec.seed, rep);
    let cfg = spec.config(0.05, CriticalValueMethod::Permutation);
    let summaries: Vec<BundleSummary> = confidence_summaries(&stat, &cfg, family);
    let draws = spec
        .methods
        .contains(&CriticalValueMethod::Permutation)
        .then(|| permutation_draws(&stat, &cfg, family));

    cells(spec)
        .iter()
        .map(|cell| {
            let alpha = 1.0 - cell.level;
            let test_level = match spec.coverage_mode {
                CoverageMode::Set => alpha - spec.beta,
                CoverageMode::Test => alpha,
            };
            let c = match cell.method {
                CriticalValueMethod::AsymptoticNormal => upper_critical(test_level)?,
                CriticalValueMethod::Permutation => {
                    let mut d = draws.clone().expect("draws exist when permutation is requested");
                    critical_value_from_draws(&mut d, test_level)?
                }
            };
            Ok(mus
                .iter()
                .map(|&mu| {
                    let q = q_from_summaries(&stat, &summaries, &[mu], c);
                    match spec.coverage_mode {
                        CoverageMode::Set => f64::from(u8::from(meets_level(q, alpha))),
                        CoverageMode::Test => q,
                    }
                })
                .collect())
        })
        .collect()
}

fn run_grid(spec: &ExperimentSpec, prepared: &PreparedDesign, mus: &[f64]) -> Result<Vec<CoverageRow>> {
    spec.validate()?;
    let start = Instant::now();
    let per_rep: Vec<Vec<Vec<f64>>> = (0..spec.mc_reps as u64)
        .into_par_iter()
        .map(|rep| replicate(spec, prepared, mus, rep))
        .collect::<Result<_>>()?;
    let wall = start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for (ci, cell) in cells(spec).iter().enumerate() {
        for (mi, &mu) in mus.iter().enumerate() {
            let total: f64 = per_rep.iter().map(|rep| rep[ci][mi]).sum();
            let coverage = total / spec.mc_reps as f64;
            rows.push(CoverageRow {
                design: spec.design,
                n: spec.n,
                mu,
                level: cell.level,
                method: cell.method,
                coverage,
                mc_se: coverage_se(coverage, spec.mc_reps),
                mc_reps: spec.mc_reps,
                wall_time_s: wall,
            });
        }
    }
    Ok(rows)
}

/// Coverage of the true mean 0 for every level and method.
pub fn run_simulation(spec: &ExperimentSpec, prepared: &PreparedDesign) -> Result<Vec<CoverageRow>> {
    run_grid(spec, prepared, &[0.0])
}

/// Coverage at each point of `spec.mu_grid`; the point 0 reproduces
/// [`run_simulation`] exactly.
pub fn run_coverage_curve(spec: &ExperimentSpec, prepared: &PreparedDesign) -> Result<Vec<CoverageRow>> {
    let grid = spec
        .mu_grid
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("coverage-curve needs `mu_grid` in the spec".into()))?;
    run_grid(spec, prepared, grid)
}

/// Lambda-coefficients of the design's covariance for each `n` and `k`.
/// Uses exact enumeration when `n` is small enough, Monte Carlo otherwise.
pub fn run_lambda(spec: &ExperimentSpec, graph: Option<Graph>) -> Result<Vec<LambdaReport>> {
    let ns = spec.lambda_n.clone().unwrap_or_else(|| vec![spec.n]);
    if graph.is_some() && ns.len() > 1 {
        return Err(Error::InvalidInput("a graph file fixes n; lambda_n must hold a single size".into()));
    }
    let mut out = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        let sized = ExperimentSpec { n, ..spec.clone() };
        sized.validate()?;
        let cov = PreparedDesign::new(spec.design, n, spec.seed, graph.clone())?.covariance()?;
        for (ki, &k) in spec.k.iter().enumerate() {
            let report = if n <= MAX_EXACT_N {
                lambda_exact(&cov, k)?
            } else {
                let rep = (ni * spec.k.len() + ki) as u64;
                let mut rng = StreamFamily::new(spec.seed, rep).stream(purpose::LAMBDA);
                lambda_monte_carlo(&cov, k, spec.lambda_draws, &mut rng)?
            };
            out.push(report);
        }
    }
    Ok(out)
}

/// Result of testing one hypothesized mean on user data.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRow {
    pub mu: Vec<f64>,
    /// T_n from the single test bundle.
    pub statistic: f64,
    /// Critical value at level alpha.
    pub critical_value: f64,
    pub reject: bool,
    /// q(mu; alpha - beta).
    pub q: f64,
    /// Membership in C_alpha.
    pub member: bool,
}

/// Tests each `mu` and evaluates the confidence function there. All points
/// share the same bundles.
pub fn run_test(x: &Sample, mus: &[Vec<f64>], cfg: &InferenceConfig) -> Result<Vec<TestRow>> {
    cfg.validate_for(x.n())?;
    crate::meantest::check_draw_counts(cfg)?;
    for mu in mus {
        crate::meantest::check_dim(x.m(), mu.len())?;
    }
    let stat = MeanStatistic::new(x)?;
    let family = StreamFamily::new(cfg.seed, 0);
    let bundle = draw_bundle_with(&mut PrefixSampler::new(x.n()), &mut family.test_bundle(), cfg.b, cfg.r);
    let test_summary = stat.summarize(&bundle);
    let (c_test, c_set) = match cfg.critical_value {
        CriticalValueMethod::AsymptoticNormal => (upper_critical(cfg.alpha)?, upper_critical(cfg.alpha - cfg.beta)?),
        CriticalValueMethod::Permutation => {
            let draws = permutation_draws(&stat, cfg, family);
            (
                critical_value_from_draws(&mut draws.clone(), cfg.alpha)?,
                critical_value_from_draws(&mut draws.clone(), cfg.alpha - cfg.beta)?,
            )
        }
    };
    let summaries = confidence_summaries(&stat, cfg, family);
    Ok(mus
        .iter()
        .map(|mu| {
            let statistic = test_summary.t(&stat, mu);
            let q = q_from_summaries(&stat, &summaries, mu, c_set);
            TestRow {
                mu: mu.clone(),
                statistic,
                critical_value: c_test,
                reject: statistic > c_test,
                q,
                member: meets_level(q, cfg.alpha),
            }
        })
        .collect())
}

/// `x` rounded to `digits` significant digits, printed without trailing zeros.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x);
    rounded.to_string()
}
