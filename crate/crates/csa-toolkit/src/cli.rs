//! Batch command-line entry point: seeded experiment execution with CSV and
//! JSON artifacts for downstream plotting.
//!
//! Parameters come from flags, optionally backed by a JSON config file
//! (`--config`); explicit flags override file values. One experiment writes
//! into one output directory. Every artifact embeds the resolved
//! configuration and the toolkit version. Fixed seeds give byte-identical
//! outputs; ensemble members use per-index RNG streams, so reproducibility
//! does not depend on scheduling.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::csa_seq::{fit_mle, sample_csa, CsaError, CsaParams, DEFAULT_JAM_STREAK};
use crate::ctmc::{classify, simulate_ctmc, stationary_finite, CtmcParams, RateVariant};
use crate::graph::Graph;
use crate::growth::{detect_localisation, simulate_growth, simulate_min_rule};
use crate::point_process::{sample_bd_mcmc, validate_params, PpParams, RateRule, Validity};
use crate::spatial::{read_points_csv, write_points_csv, Domain, PointSeq};
use crate::VERSION;

/// Default RNG seed used when neither `--seed` nor a config file supplies
/// one; documented so default runs are reproducible.
pub const DEFAULT_SEED: u64 = 12345;

/// Deterministic per-member generator for ensembles: member `stream` of a
/// base seed gets its own ChaCha stream, independent of scheduling order.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Runtime(_) => "runtime",
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "csa-toolkit", version, about = "CSA simulation and inference toolkit")]
struct Cli {
    /// JSON config file supplying parameter defaults; flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed (defaults to a fixed documented constant).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a continuous CSA sequence and write it as CSV.
    SimulateCsa(SimulateCsaArgs),
    /// Fit the CSA MLE to a point sequence read from CSV.
    FitCsa(FitCsaArgs),
    /// Run the graph growth process and report localisation.
    SimulateGrowth(SimulateGrowthArgs),
    /// Run the min-rule chain on a cycle.
    SimulateMinRule(SimulateMinRuleArgs),
    /// Theorem-driven phase classification of the uncapped CTMC.
    ClassifyCtmc(ClassifyCtmcArgs),
    /// Gillespie simulation of the interacting CTMC.
    SimulateCtmc(SimulateCtmcArgs),
    /// Exact stationary law of the capped chain.
    StationaryFinite(StationaryFiniteArgs),
    /// Birth-death MCMC sampling of the spatial point process.
    SamplePp(SamplePpArgs),
    /// Classification verdicts over an (alpha, beta) grid.
    Sweep(SweepArgs),
}

macro_rules! merge_opt {
    ($self:ident, $file:ident, $($f:ident),* $(,)?) => {
        $( if $self.$f.is_none() { $self.$f = $file.$f.clone(); } )*
    };
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SimulateCsaArgs {
    /// Interaction radius R.
    #[arg(long)]
    radius: Option<f64>,
    /// Comma-separated growth rates beta_1..beta_N (beta_0 = 1 implicit).
    #[arg(long)]
    beta: Option<String>,
    /// Number of points to accept.
    #[arg(long)]
    points: Option<usize>,
    /// Domain dimension (unit cube unless bounds are given).
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated lower domain bounds.
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    /// Comma-separated upper domain bounds.
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
    /// Consecutive rejections before declaring the process jammed.
    #[arg(long)]
    jam_streak: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct FitCsaArgs {
    /// Input point CSV (as written by simulate-csa).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
    /// Monte-Carlo sample size for the Gamma statistics.
    #[arg(long)]
    mc_n: Option<usize>,
    /// Score-residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SimulateGrowthArgs {
    /// Graph spec: star:M, cycle:N, path:N, complete:N.
    #[arg(long)]
    graph: Option<String>,
    /// Edge-list file ("u v" per line) as an alternative to --graph.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Snapshot thinning interval (0 = endpoints only).
    #[arg(long)]
    thin: Option<usize>,
    /// Final window length for the localisation report.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SimulateMinRuleArgs {
    /// Cycle length m.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Final window length for the support report.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct ClassifyCtmcArgs {
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SimulateCtmcArgs {
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Rate variant: "x" or "y".
    #[arg(long)]
    variant: Option<String>,
    /// Per-site occupancy cap (omit for the uncapped chain).
    #[arg(long)]
    cap: Option<u32>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    event_cap: Option<u64>,
    /// Record every thin-th jump in the trajectory CSV.
    #[arg(long)]
    thin: Option<u64>,
    /// Comma-separated initial state (default all zeros).
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct StationaryFiniteArgs {
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    cap: Option<u32>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SamplePpArgs {
    /// Rate rule: const:B, table:B0,B1,..., or strauss:A,GAMMA.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    moves: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default)]
struct SweepArgs {
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Alpha grid as start:stop:count (count may be 0 for an empty grid).
    #[arg(long, allow_hyphen_values = true)]
    alpha_grid: Option<String>,
    /// Beta grid as start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    beta_grid: Option<String>,
}

fn req<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required parameter `{name}`")))
}

fn parse_f64_list(s: &str, name: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad float in `{name}`: {e}")))
        })
        .collect()
}

fn parse_u32_list(s: &str, name: &str) -> Result<Vec<u32>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<u32>()
                .map_err(|e| CliError::Config(format!("bad integer in `{name}`: {e}")))
        })
        .collect()
}

fn parse_domain(
    dim: Option<usize>,
    lower: &Option<String>,
    upper: &Option<String>,
) -> Result<Domain, CliError> {
    match (lower, upper) {
        (Some(lo), Some(hi)) => {
            let lo = parse_f64_list(lo, "lower")?;
            let hi = parse_f64_list(hi, "upper")?;
            Domain::new(lo, hi).map_err(|e| CliError::Config(e.to_string()))
        }
        (None, None) => Ok(Domain::unit_cube(dim.unwrap_or(2))),
        _ => Err(CliError::Config(
            "provide both --lower and --upper, or neither".into(),
        )),
    }
}

fn parse_graph(spec: &Option<String>, file: &Option<PathBuf>) -> Result<Graph, CliError> {
    match (spec, file) {
        (Some(s), None) => Graph::parse_spec(s).map_err(|e| CliError::Config(e.to_string())),
        (None, Some(p)) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            Graph::from_edge_list_str(&text).map_err(|e| CliError::Config(e.to_string()))
        }
        _ => Err(CliError::Config(
            "provide exactly one of --graph or --graph-file".into(),
        )),
    }
}

fn parse_rule(spec: &str) -> Result<RateRule, CliError> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("bad rule spec `{spec}`")))?;
    match kind {
        "const" => {
            let b = rest
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad rule spec `{spec}`: {e}")))?;
            Ok(RateRule::ConstantBeta(b))
        }
        "table" => Ok(RateRule::FiniteTable(parse_f64_list(rest, "rule")?)),
        "strauss" => {
            let vals = parse_f64_list(rest, "rule")?;
            if vals.len() != 2 {
                return Err(CliError::Config(format!(
                    "strauss rule needs exactly a,gamma, got `{spec}`"
                )));
            }
            Ok(RateRule::Strauss {
                a: vals[0],
                gamma: vals[1],
            })
        }
        _ => Err(CliError::Config(format!("unknown rule kind `{kind}`"))),
    }
}

fn parse_grid(spec: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "grid `{name}` must be start:stop:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid `{name}`: {e}")))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid `{name}`: {e}")))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid `{name}`: {e}")))?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    })
}

/// Resolved per-run context: seed, output directory, and the JSON blob
/// embedded into every artifact.
struct RunContext {
    seed: u64,
    out: PathBuf,
    resolved: Value,
}

impl RunContext {
    fn new(seed: u64, out: PathBuf, command: &str, params: Value) -> Result<Self, CliError> {
        fs::create_dir_all(&out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
        let resolved = json!({
            "version": VERSION,
            "command": command,
            "seed": seed,
            "params": params,
        });
        Ok(Self { seed, out, resolved })
    }

    fn metadata_lines(&self) -> Vec<String> {
        vec![
            format!("version: {VERSION}"),
            format!("config: {}", self.resolved),
        ]
    }

    fn write_json(&self, name: &str, mut body: Value) -> Result<(), CliError> {
        body["version"] = json!(VERSION);
        body["config"] = self.resolved.clone();
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(&body).map_err(runtime)?;
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut text = String::new();
        for line in self.metadata_lines() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        let path = self.out.join(name);
        fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Parse the process arguments, run the experiment, and map errors to the
/// documented exit codes (0 ok, 2 config, 3 runtime).
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({"kind": e.kind(), "error": e.to_string()});
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config_file(path: &Option<PathBuf>) -> Result<Value, CliError> {
    match path {
        None => Ok(json!({})),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("bad JSON in {}: {e}", p.display())))
        }
    }
}

fn file_args<T: for<'de> Deserialize<'de> + Default>(file: &Value) -> Result<T, CliError> {
    serde_json::from_value(file.clone())
        .map_err(|e| CliError::Config(format!("bad config file values: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = load_config_file(&cli.config)?;
    let seed = cli
        .seed
        .or_else(|| file.get("seed").and_then(Value::as_u64))
        .unwrap_or(DEFAULT_SEED);
    let out = cli
        .out
        .or_else(|| file.get("out").and_then(Value::as_str).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::SimulateCsa(mut a) => {
            let f: SimulateCsaArgs = file_args(&file)?;
            merge_opt!(a, f, radius, beta, points, dim, lower, upper, jam_streak);
            run_simulate_csa(a, seed, out)
        }
        Command::FitCsa(mut a) => {
            let f: FitCsaArgs = file_args(&file)?;
            merge_opt!(a, f, input, radius, lower, upper, mc_n, tol);
            run_fit_csa(a, seed, out)
        }
        Command::SimulateGrowth(mut a) => {
            let f: SimulateGrowthArgs = file_args(&file)?;
            merge_opt!(a, f, graph, graph_file, alpha, beta, steps, thin, window);
            run_simulate_growth(a, seed, out)
        }
        Command::SimulateMinRule(mut a) => {
            let f: SimulateMinRuleArgs = file_args(&file)?;
            merge_opt!(a, f, m, steps, thin, window);
            run_simulate_min_rule(a, seed, out)
        }
        Command::ClassifyCtmc(mut a) => {
            let f: ClassifyCtmcArgs = file_args(&file)?;
            merge_opt!(a, f, graph, graph_file, alpha, beta);
            run_classify_ctmc(a, seed, out)
        }
        Command::SimulateCtmc(mut a) => {
            let f: SimulateCtmcArgs = file_args(&file)?;
            merge_opt!(
                a, f, graph, graph_file, alpha, beta, variant, cap, t_max, event_cap, thin, x0
            );
            run_simulate_ctmc(a, seed, out)
        }
        Command::StationaryFinite(mut a) => {
            let f: StationaryFiniteArgs = file_args(&file)?;
            merge_opt!(a, f, graph, graph_file, alpha, beta, cap);
            run_stationary_finite(a, seed, out)
        }
        Command::SamplePp(mut a) => {
            let f: SamplePpArgs = file_args(&file)?;
            merge_opt!(a, f, rule, radius, moves, dim, lower, upper);
            run_sample_pp(a, seed, out)
        }
        Command::Sweep(mut a) => {
            let f: SweepArgs = file_args(&file)?;
            merge_opt!(a, f, graph, graph_file, alpha_grid, beta_grid);
            run_sweep(a, seed, out)
        }
    }
}

fn run_simulate_csa(a: SimulateCsaArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let radius = req(a.radius, "radius")?;
    let target = req(a.points, "points")?;
    let beta = parse_f64_list(a.beta.as_deref().unwrap_or(""), "beta")?;
    let jam_streak = a.jam_streak.unwrap_or(DEFAULT_JAM_STREAK);
    let domain = parse_domain(a.dim, &a.lower, &a.upper)?;
    let params = CsaParams::new(radius, beta.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let ctx = RunContext::new(
        seed,
        out,
        "simulate-csa",
        json!({
            "radius": radius,
            "beta": beta,
            "points": target,
            "lower": domain.lower(),
            "upper": domain.upper(),
            "jam_streak": jam_streak,
        }),
    )?;
    let mut rng = seeded_rng(ctx.seed, 0);
    let seq = match sample_csa(&params, &domain, target, jam_streak, &mut rng) {
        Ok(seq) => seq,
        Err(CsaError::JammedBeforeTarget { accepted, streak }) => {
            return Err(CliError::Runtime(format!(
                "jammed after {accepted} points ({streak} consecutive rejections)"
            )))
        }
        Err(e) => return Err(runtime(e)),
    };
    let mut buf = Vec::new();
    write_points_csv(&mut buf, seq.points(), seq.dim(), &ctx.metadata_lines()).map_err(runtime)?;
    fs::write(ctx.out.join("points.csv"), buf).map_err(runtime)?;
    ctx.write_json("run.json", json!({"accepted": seq.len()}))
}

fn run_fit_csa(a: FitCsaArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let input = req(a.input, "input")?;
    let radius = req(a.radius, "radius")?;
    let mc_n = a.mc_n.unwrap_or(20_000);
    let tol = a.tol.unwrap_or(1e-6);
    let file = fs::File::open(&input)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", input.display())))?;
    let points = read_points_csv(BufReader::new(file)).map_err(|e| CliError::Config(e.to_string()))?;
    let dim = points.first().map(|p| p.len());
    let domain = parse_domain(dim, &a.lower, &a.upper)?;
    let seq = PointSeq::new(&domain, points).map_err(|e| CliError::Config(e.to_string()))?;
    let ctx = RunContext::new(
        seed,
        out,
        "fit-csa",
        json!({
            "input": input.display().to_string(),
            "radius": radius,
            "lower": domain.lower(),
            "upper": domain.upper(),
            "mc_n": mc_n,
            "tol": tol,
        }),
    )?;
    let mut rng = seeded_rng(ctx.seed, 0);
    let fit = fit_mle(&seq, &domain, radius, mc_n, &mut rng, tol).map_err(runtime)?;
    ctx.write_json(
        "fit.json",
        json!({
            "radius": fit.radius,
            "n_hat": fit.n_hat,
            "beta_hat": fit.beta_hat,
            "residuals": fit.residuals,
            "t": fit.stats.t.t,
            "overflow": fit.stats.t.overflow,
            "gamma_mc_se": fit.stats.gamma.se,
            "mc_n": mc_n,
        }),
    )
}

fn run_simulate_growth(a: SimulateGrowthArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let g = parse_graph(&a.graph, &a.graph_file)?;
    let alpha = req(a.alpha, "alpha")?;
    let beta = req(a.beta, "beta")?;
    let steps = req(a.steps, "steps")?;
    let thin = a.thin.unwrap_or(0);
    let window = a.window.unwrap_or_else(|| (steps / 10).max(1));
    let ctx = RunContext::new(
        seed,
        out,
        "simulate-growth",
        json!({
            "graph": a.graph,
            "graph_file": a.graph_file.as_ref().map(|p| p.display().to_string()),
            "alpha": alpha,
            "beta": beta,
            "steps": steps,
            "thin": thin,
            "window": window,
        }),
    )?;
    let mut rng = seeded_rng(ctx.seed, 0);
    let x0 = vec![0u64; g.n()];
    let traj = simulate_growth(&g, alpha, beta, &x0, steps, thin, &mut rng).map_err(runtime)?;
    let header: String = std::iter::once("step".to_string())
        .chain((0..g.n()).map(|v| format!("x{v}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = traj
        .snapshots
        .iter()
        .map(|(step, counts)| {
            std::iter::once(step.to_string())
                .chain(counts.iter().map(|c| c.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    ctx.write_csv("snapshots.csv", &header, &rows)?;
    let choice_rows: Vec<String> = traj
        .choices
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{},{v}", i + 1))
        .collect();
    ctx.write_csv("choices.csv", "step,vertex", &choice_rows)?;
    let report = detect_localisation(&traj, &g, window).map_err(runtime)?;
    let ratios: Vec<Value> = report
        .ratio_estimates
        .iter()
        .map(|(&(v, u), &lr)| json!({"v": v, "u": u, "log_ratio": lr}))
        .collect();
    ctx.write_json(
        "summary.json",
        json!({
            "final_counts": traj.final_counts,
            "localisation": {
                "final_set": report.final_set,
                "is_maximal_clique": report.is_maximal_clique,
                "window": report.window,
                "log_ratios": ratios,
            },
        }),
    )
}

fn run_simulate_min_rule(a: SimulateMinRuleArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let m = req(a.m, "m")?;
    let steps = req(a.steps, "steps")?;
    let thin = a.thin.unwrap_or(0);
    let window = a.window.unwrap_or_else(|| (steps / 10).max(1));
    let ctx = RunContext::new(
        seed,
        out,
        "simulate-min-rule",
        json!({"m": m, "steps": steps, "thin": thin, "window": window}),
    )?;
    let mut rng = seeded_rng(ctx.seed, 0);
    let x0 = vec![0u64; m];
    let traj = simulate_min_rule(m, &x0, steps, thin, &mut rng).map_err(runtime)?;
    let header: String = std::iter::once("step".to_string())
        .chain((0..m).map(|v| format!("x{v}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = traj
        .snapshots
        .iter()
        .map(|(step, counts)| {
            std::iter::once(step.to_string())
                .chain(counts.iter().map(|c| c.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    ctx.write_csv("snapshots.csv", &header, &rows)?;
    let tail = &traj.choices[traj.choices.len().saturating_sub(window)..];
    let mut support: Vec<usize> = tail.to_vec();
    support.sort_unstable();
    support.dedup();
    ctx.write_json(
        "summary.json",
        json!({
            "final_counts": traj.final_counts,
            "final_window_support": support,
        }),
    )
}

fn run_classify_ctmc(a: ClassifyCtmcArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let g = parse_graph(&a.graph, &a.graph_file)?;
    let alpha = req(a.alpha, "alpha")?;
    let beta = req(a.beta, "beta")?;
    let ctx = RunContext::new(
        seed,
        out,
        "classify-ctmc",
        json!({
            "graph": a.graph,
            "graph_file": a.graph_file.as_ref().map(|p| p.display().to_string()),
            "alpha": alpha,
            "beta": beta,
        }),
    )?;
    let classification = classify(alpha, beta, &g).map_err(runtime)?;
    let body = serde_json::to_value(&classification).map_err(runtime)?;
    println!("{}", serde_json::to_string(&body).map_err(runtime)?);
    ctx.write_json("verdict.json", json!({"classification": body}))
}

fn run_simulate_ctmc(a: SimulateCtmcArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let g = parse_graph(&a.graph, &a.graph_file)?;
    let alpha = req(a.alpha, "alpha")?;
    let beta = req(a.beta, "beta")?;
    let variant = match a.variant.as_deref().unwrap_or("x") {
        "x" => RateVariant::XRates,
        "y" => RateVariant::YRates,
        other => {
            return Err(CliError::Config(format!(
                "variant must be \"x\" or \"y\", got `{other}`"
            )))
        }
    };
    let t_max = a.t_max.unwrap_or(100.0);
    let event_cap = a.event_cap.unwrap_or(1_000_000);
    let thin = a.thin.unwrap_or(1);
    let x0 = match &a.x0 {
        Some(s) => parse_u32_list(s, "x0")?,
        None => vec![0; g.n()],
    };
    if x0.len() != g.n() {
        return Err(CliError::Config(format!(
            "x0 has {} entries, graph has {} vertices",
            x0.len(),
            g.n()
        )));
    }
    let ctx = RunContext::new(
        seed,
        out,
        "simulate-ctmc",
        json!({
            "graph": a.graph,
            "graph_file": a.graph_file.as_ref().map(|p| p.display().to_string()),
            "alpha": alpha,
            "beta": beta,
            "variant": a.variant.as_deref().unwrap_or("x"),
            "cap": a.cap,
            "t_max": t_max,
            "event_cap": event_cap,
            "thin": thin,
            "x0": x0,
        }),
    )?;
    let mut params = CtmcParams::new(alpha, beta, g.clone()).with_variant(variant);
    if let Some(cap) = a.cap {
        params = params.with_cap(cap);
    }
    let mut rng = seeded_rng(ctx.seed, 0);
    let run = simulate_ctmc(&params, &x0, t_max, event_cap, thin, &mut rng);
    let header: String = std::iter::once("t".to_string())
        .chain((0..g.n()).map(|v| format!("x{v}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = run
        .trajectory
        .iter()
        .map(|(t, x)| {
            std::iter::once(format!("{t:?}"))
                .chain(x.iter().map(|c| c.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    ctx.write_csv("trajectory.csv", &header, &rows)?;
    ctx.write_json(
        "summary.json",
        json!({
            "outcome": run.outcome,
            "events": run.events,
            "origin_visits": run.origin_visits,
            "t_final": run.t_final,
        }),
    )
}

fn run_stationary_finite(a: StationaryFiniteArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let g = parse_graph(&a.graph, &a.graph_file)?;
    let alpha = req(a.alpha, "alpha")?;
    let beta = req(a.beta, "beta")?;
    let cap = req(a.cap, "cap")?;
    let ctx = RunContext::new(
        seed,
        out,
        "stationary-finite",
        json!({
            "graph": a.graph,
            "graph_file": a.graph_file.as_ref().map(|p| p.display().to_string()),
            "alpha": alpha,
            "beta": beta,
            "cap": cap,
        }),
    )?;
    let params = CtmcParams::new(alpha, beta, g.clone()).with_cap(cap);
    let table = stationary_finite(&params).map_err(runtime)?;
    let header: String = std::iter::once("state".to_string())
        .chain((0..g.n()).map(|v| format!("x{v}")))
        .chain(std::iter::once("prob".to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = table
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = crate::ctmc::decode_state(i, g.n(), cap);
            std::iter::once(i.to_string())
                .chain(x.iter().map(|c| c.to_string()))
                .chain(std::iter::once(format!("{p:?}")))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    ctx.write_csv("stationary.csv", &header, &rows)?;
    ctx.write_json("summary.json", json!({"log_z": table.log_z, "cap": cap}))
}

fn run_sample_pp(a: SamplePpArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let rule_spec = req(a.rule, "rule")?;
    let radius = req(a.radius, "radius")?;
    let moves = a.moves.unwrap_or(100_000);
    let rule = parse_rule(&rule_spec)?;
    let domain = parse_domain(a.dim, &a.lower, &a.upper)?;
    let params = PpParams::new(radius, rule).map_err(|e| CliError::Config(e.to_string()))?;
    if let Validity::Rejected(reason) = validate_params(&params) {
        return Err(CliError::Config(format!("rule rejected: {reason}")));
    }
    let ctx = RunContext::new(
        seed,
        out,
        "sample-pp",
        json!({
            "rule": rule_spec,
            "radius": radius,
            "moves": moves,
            "lower": domain.lower(),
            "upper": domain.upper(),
        }),
    )?;
    let mut rng = seeded_rng(ctx.seed, 0);
    let (config, diag) = sample_bd_mcmc(&params, &domain, moves, &mut rng);
    let mut buf = Vec::new();
    write_points_csv(&mut buf, config.points(), domain.dim(), &ctx.metadata_lines())
        .map_err(runtime)?;
    fs::write(ctx.out.join("points.csv"), buf).map_err(runtime)?;
    ctx.write_json(
        "sample.json",
        json!({
            "rule": rule_spec,
            "radius": radius,
            "n_moves": moves,
            "seed": ctx.seed,
            "acceptance_rates": {
                "birth": diag.birth_rate(),
                "death": diag.death_rate(),
            },
            "final_count": config.len(),
        }),
    )
}

fn run_sweep(a: SweepArgs, seed: u64, out: PathBuf) -> Result<(), CliError> {
    let g = parse_graph(&a.graph, &a.graph_file)?;
    let alphas = parse_grid(&req(a.alpha_grid.clone(), "alpha-grid")?, "alpha-grid")?;
    let betas = parse_grid(&req(a.beta_grid.clone(), "beta-grid")?, "beta-grid")?;
    let ctx = RunContext::new(
        seed,
        out,
        "sweep",
        json!({
            "graph": a.graph,
            "graph_file": a.graph_file.as_ref().map(|p| p.display().to_string()),
            "alpha_grid": a.alpha_grid,
            "beta_grid": a.beta_grid,
        }),
    )?;
    // cells are independent; evaluation order is fixed so the artifact is
    // deterministic regardless of any future parallel evaluation
    let mut rows = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            let c = classify(alpha, beta, &g).map_err(runtime)?;
            rows.push(format!(
                "{alpha:?},{beta:?},{:?},\"{}\",{:?},{},{}",
                c.verdict,
                c.case,
                c.lambda1,
                c.kappa.map_or(String::new(), |k| k.to_string()),
                c.min_degree,
            ));
        }
    }
    ctx.write_csv(
        "sweep.csv",
        "alpha,beta,verdict,case,lambda1,kappa,min_degree",
        &rows,
    )
}
