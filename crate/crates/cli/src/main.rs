//! `rembed`: generate scenarios, embed them, check and simulate embeddings, export LP files.
//!
//! Exit codes: 0 success, 1 check failed, 2 usage or input error, 3 infeasible,
//! 4 limits reached.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use resilient_embed::domain::{generate_scenario, validate_scenario, Area, GenerateError};
use resilient_embed::heuristic::{solve_heuristic, HeuristicConfig, HeuristicError};
use resilient_embed::milp::{check_solution, compile, emit_lp, solve_exact, CompileError, Limits, SolveError};
use resilient_embed::resilience::{evaluate_failure, evaluate_no_failure, pdr_sweep, SimContext};
use resilient_embed::solution::SolutionStatus;
use resilient_embed::{
    CostBreakdown, Edge, EmbeddingSolution, NodeId, ObjectiveWeights, Problem, Scenario, SchemeSpec, TrafficMode,
};

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(name = "rembed", version, about = "Resilient energy- and latency-aware IoT service embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded scenario (network plus service request).
    Generate(GenerateArgs),
    /// Embed a scenario under a scheme.
    Solve(SolveArgs),
    /// Verify a solution against every constraint family.
    Check(CheckArgs),
    /// Evaluate deliveries under a link failure or a packet-delivery-ratio sweep.
    Simulate(SimulateArgs),
    /// Write the mixed-integer model in LP format.
    EmitLp(EmitLpArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of physical nodes.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Deployment area in metres, `W` for a square or `WxH`.
    #[arg(long, default_value = "500", value_parser = parse_area)]
    area: Area,
    /// Maximum link distance in metres.
    #[arg(long, default_value_t = 100.0)]
    maxdist: f64,
    /// Number of business processes in the request.
    #[arg(long, default_value_t = 3)]
    bps: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Node level and traffic mode, e.g. `FRNR+STR`. A bare level means single path.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeSpec>,
    /// Share of the backup demand kept alive under RDTR.
    #[arg(long)]
    keep_alive: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Heuristic,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Solver::Exact)]
    solver: Solver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Branch-and-bound node limit.
    #[arg(long)]
    node_limit: Option<u64>,
    /// Directory receiving solution.json and costs.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Traffic mode to evaluate; defaults to the solution's own.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TrafficMode>,
    #[arg(long)]
    keep_alive: Option<f64>,
    /// Directed link `a->b` that fails.
    #[arg(long, value_parser = parse_edge, conflicts_with = "sweep_pdr")]
    failed_link: Option<Edge>,
    /// Share of each affected transfer completed before the failure.
    #[arg(long, default_value_t = 0.0, requires = "failed_link")]
    failure_fraction: f64,
    /// Comma-separated delivery ratios in (0, 1].
    #[arg(long, value_delimiter = ',')]
    sweep_pdr: Option<Vec<f64>>,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitLpArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// LP output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A message and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

type CmdResult = Result<(), Failure>;

fn parse_area(s: &str) -> Result<Area, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad area '{s}': {e}"));
    let (w, h) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (num(w)?, num(h)?),
        None => (num(s)?, num(s)?),
    };
    Ok(Area { width: w, height: h })
}

fn parse_scheme(s: &str) -> Result<SchemeSpec, String> {
    SchemeSpec::from_str(s).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<TrafficMode, String> {
    TrafficMode::from_str(s).map_err(|e| e.to_string())
}

fn parse_edge(s: &str) -> Result<Edge, String> {
    let (a, b) = s.split_once("->").ok_or_else(|| format!("expected a->b, got '{s}'"))?;
    let id = |t: &str| t.trim().parse::<u32>().map(NodeId).map_err(|e| format!("bad node id '{t}': {e}"));
    Ok(Edge(id(a)?, id(b)?))
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("cannot write to stdout: {e}"))),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let scenario = Scenario::load(path).map_err(|e| Failure::input(e.to_string()))?;
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        let list: Vec<_> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::input(format!("invalid scenario {}:\n  {}", path.display(), list.join("\n  "))));
    }
    Ok(scenario)
}

fn load_solution(path: &Path) -> Result<EmbeddingSolution, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    EmbeddingSolution::from_json(&text).map_err(|e| Failure::input(format!("malformed solution {}: {e}", path.display())))
}

fn scheme_of(args: &ModelArgs, fallback: Option<SchemeSpec>) -> Result<SchemeSpec, Failure> {
    let scheme = args
        .scheme
        .or(fallback)
        .ok_or_else(|| Failure::input("--scheme is required"))?;
    match args.keep_alive {
        Some(ka) => scheme.with_keep_alive(ka).map_err(|e| Failure::input(e.to_string())),
        None => Ok(scheme),
    }
}

fn problem_of(args: &ModelArgs, scenario: &Scenario, scheme: SchemeSpec) -> Result<Problem, Failure> {
    let weights = ObjectiveWeights { alpha: args.alpha, beta: args.beta, gamma: args.gamma };
    if !weights.is_valid() {
        return Err(Failure::input("objective weights must be non-negative"));
    }
    Problem::new(scenario, scheme, weights).map_err(|e| Failure::input(e.to_string()))
}

fn scenario_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn costs_csv(id: &str, scheme: SchemeSpec, c: &CostBreakdown) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::input(e.to_string());
    w.write_record(["scenario_id", "scheme", "TL_ms", "TPP_mW", "TNP_mW", "objective"]).map_err(fail)?;
    w.write_record([
        id.to_string(),
        scheme.to_string(),
        c.tl.to_string(),
        c.tpp.to_string(),
        c.tnp.to_string(),
        c.objective.to_string(),
    ])
    .map_err(fail)?;
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    let scenario = generate_scenario(a.seed, a.n, a.bps, a.area, a.maxdist).map_err(|e: GenerateError| Failure::input(e.to_string()))?;
    write_output(a.out.as_deref(), &(scenario.to_json() + "\n"))
}

fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let scenario = load_scenario(&a.model.scenario)?;
    let scheme = scheme_of(&a.model, None)?;
    let problem = problem_of(&a.model, &scenario, scheme)?;
    let solution = match a.solver {
        Solver::Exact => {
            let limits = Limits {
                time: a.time_limit.map(Duration::from_secs_f64),
                nodes: a.node_limit,
                threads: a.threads.max(1),
                cutoff: None,
            };
            solve_exact(&problem, &limits).map_err(|e| match e {
                SolveError::Infeasible(_) => Failure::new(EXIT_INFEASIBLE, e.to_string()),
                SolveError::LimitNoIncumbent => Failure::new(EXIT_LIMIT, e.to_string()),
                _ => Failure::new(EXIT_INPUT, e.to_string()),
            })?
        }
        Solver::Heuristic => {
            let config = HeuristicConfig { seed: a.seed, ..HeuristicConfig::default() };
            solve_heuristic(&problem, &config).map_err(|e| match e {
                HeuristicError::BadConfig => Failure::input(e.to_string()),
                _ => Failure::new(EXIT_INFEASIBLE, format!("no embedding found: {e}")),
            })?
        }
    };
    let report = check_solution(&problem, &solution);
    if !report.all_pass() {
        return Err(Failure::new(EXIT_CHECK, format!("solver output failed verification:\n{report}")));
    }
    let csv = costs_csv(&scenario_id(&a.model.scenario), scheme, &solution.costs)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
        write_output(Some(&dir.join("solution.json")), &(solution.to_json() + "\n"))?;
        write_output(Some(&dir.join("costs.csv")), &csv)?;
    }
    write_output(None, &csv)?;
    if solution.status == SolutionStatus::LimitReached {
        return Err(Failure::new(EXIT_LIMIT, "limit reached; the reported solution is not proven optimal"));
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> CmdResult {
    let scenario = load_scenario(&a.model.scenario)?;
    let solution = load_solution(&a.solution)?;
    let scheme = scheme_of(&a.model, Some(solution.scheme))?;
    let problem = problem_of(&a.model, &scenario, scheme)?;
    let report = check_solution(&problem, &solution);
    write_output(None, &report.to_string())?;
    if report.all_pass() {
        Ok(())
    } else {
        let names: Vec<_> = report.failed().iter().map(|c| c.label.clone()).collect();
        Err(Failure::new(EXIT_CHECK, format!("violated: {}", names.join(", "))))
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let scenario = load_scenario(&a.scenario)?;
    let solution = load_solution(&a.solution)?;
    let table = scenario.latency_table().map_err(|e| Failure::input(e.to_string()))?;
    let keep_alive = a.keep_alive.unwrap_or(solution.scheme.keep_alive_fraction);
    if !(0.0..1.0).contains(&keep_alive) {
        return Err(Failure::input(format!("keep-alive fraction {keep_alive} outside [0, 1)")));
    }
    if let Some(link) = a.failed_link {
        if !scenario.network.has_edge(link) {
            return Err(Failure::input(format!("link {}->{} is not in the network", link.0, link.1)));
        }
    }
    let ctx = SimContext { network: &scenario.network, table: &table, keep_alive_fraction: keep_alive };
    let eval_err = |e: resilient_embed::resilience::EvalError| Failure::input(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::input(e.to_string());
    if let Some(pdrs) = &a.sweep_pdr {
        let rows = pdr_sweep(&ctx, &solution, pdrs).map_err(eval_err)?;
        w.write_record(["p", "E_RDTR", "E_STR"]).map_err(csv_err)?;
        for r in rows {
            w.write_record([r.p.to_string(), r.e_rdtr.to_string(), r.e_str.to_string()]).map_err(csv_err)?;
        }
    } else {
        let mode = a.mode.unwrap_or(solution.scheme.traffic_mode);
        let outcome = match a.failed_link {
            Some(link) => evaluate_failure(&ctx, &solution, mode, link, a.failure_fraction),
            None => evaluate_no_failure(&ctx, &solution, mode),
        }
        .map_err(eval_err)?;
        w.write_record([
            "mode",
            "failed_link",
            "failure_fraction",
            "energy_mW",
            "delivery_time_ms",
            "delivered_fraction",
            "queuing_only",
        ])
        .map_err(csv_err)?;
        w.write_record([
            mode.to_string(),
            a.failed_link.map(|e| format!("{}->{}", e.0, e.1)).unwrap_or_default(),
            a.failure_fraction.to_string(),
            outcome.energy.to_string(),
            outcome.delivery_time.to_string(),
            outcome.delivered_fraction.to_string(),
            outcome.queuing_only.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    write_output(a.out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_emit_lp(a: &EmitLpArgs) -> CmdResult {
    let scenario = load_scenario(&a.model.scenario)?;
    let scheme = scheme_of(&a.model, None)?;
    let problem = problem_of(&a.model, &scenario, scheme)?;
    let compiled = compile(&problem).map_err(|e @ CompileError::Infeasible(_)| Failure::new(EXIT_INFEASIBLE, e.to_string()))?;
    write_output(a.out.as_deref(), &emit_lp(&compiled.instance))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::EmitLp(a) => cmd_emit_lp(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
