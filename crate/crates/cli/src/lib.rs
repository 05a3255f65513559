//! Command-line front end: instance generation, solving, policy evaluation,
//! graph export and benchmark sweeps.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};

use crgsolve::baselines::{dp_solve, evaluate_policy, BaselineError, DpConfig};
use crgsolve::crg::{build_all, partition_rewards, CrgOptions, PartitionStrategy};
use crgsolve::domains::{
    compile_mpp, example_two_agent, gen_coordint, gen_pyra, gen_random_mpp, CoordintParams, MppParams,
};
use crgsolve::formats::{
    export_dot, read_instance, read_policy, write_instance, write_results, Algorithm, DotOptions, ResultRow, RunStatus,
};
use crgsolve::search::{core_solve, SearchConfig};
use crgsolve::{validate_instance, Instance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;
pub const EXIT_RESOURCE: i32 = 5;

#[derive(Parser)]
#[command(name = "crgsolve", version, about = "Exact solver for transition-independent multi-agent MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Mpp,
    Pyra,
    Coordint,
    Example,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated instances as JSON files.
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        /// Number of agents.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Tasks per agent.
        #[arg(long, default_value_t = 3)]
        tasks: usize,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        /// Chance that a pair of tasks of different agents interacts.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Seed of the first instance; later ones count up from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance and print its optimal value.
    Solve {
        #[arg(long)]
        algorithm: Algorithm,
        #[arg(long)]
        instance: PathBuf,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Reuse search values of repeated (stage, group, state) nodes.
        #[arg(long)]
        memo: bool,
        /// Joint states the dynamic program may store.
        #[arg(long)]
        max_states: Option<usize>,
        /// Write a one-row results CSV here.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Expected return of a joint policy.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Print the conditional return graph of one agent as DOT.
    ExportDot {
        #[arg(long)]
        instance: PathBuf,
        /// Agent index, counted from 0 as in the instance file.
        #[arg(long)]
        agent: usize,
        /// Label every local state with its return bounds.
        #[arg(long)]
        bounds: bool,
    },
    /// Run every algorithm on every instance of a directory.
    Bench {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "core,crg-ps,dp")]
        algorithms: Vec<Algorithm>,
        /// Budget per instance and algorithm, in seconds.
        #[arg(long)]
        time_limit: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        memo: bool,
        #[arg(long)]
        max_states: Option<usize>,
    },
}

/// Why a command stopped early; each maps to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Timeout,
    Resource(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Timeout => EXIT_TIMEOUT,
            Failure::Resource(_) => EXIT_RESOURCE,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate {
            family,
            n,
            tasks,
            horizon,
            density,
            seed,
            count,
            out,
        } => generate(family, n, tasks, horizon, density, seed, count, &out),
        Command::Solve {
            algorithm,
            instance,
            time_limit,
            memo,
            max_states,
            stats,
        } => solve(algorithm, &instance, time_limit, memo, max_states, stats.as_deref()),
        Command::Evaluate { instance, policy } => evaluate(&instance, &policy),
        Command::ExportDot { instance, agent, bounds } => dot(&instance, agent, bounds),
        Command::Bench {
            instances,
            algorithms,
            time_limit,
            out,
            jobs,
            memo,
            max_states,
        } => bench(&instances, &algorithms, time_limit, &out, jobs, memo, max_states),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(msg) | Failure::Validation(msg) | Failure::Resource(msg) => eprintln!("error: {msg}"),
                Failure::Timeout => eprintln!("error: time limit reached"),
            }
            f.code()
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Reads and validates an instance; every violation goes to stderr.
fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let m = read_instance(&read_text(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let violations = validate_instance(&m);
    if violations.is_empty() {
        return Ok(m);
    }
    for v in &violations {
        eprintln!("{}: {v}", path.display());
    }
    Err(Failure::Validation(format!(
        "{}: {} violation(s)",
        path.display(),
        violations.len()
    )))
}

fn seconds(limit: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(limit).map_err(|e| Failure::Usage(format!("time limit {limit}: {e}")))
}

/// Prints `-0` as `0`; otherwise the shortest text that reads back exactly.
fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        v.to_string()
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    family: Family,
    n: usize,
    tasks: usize,
    horizon: usize,
    density: f64,
    seed: u64,
    count: u64,
    out: &Path,
) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Failure::Usage(format!("density {density} is outside [0, 1]")));
    }
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let count = if family == Family::Example { 1 } else { count };
    for k in 0..count {
        let s = seed + k;
        let (name, m) = match family {
            Family::Example => ("example".to_string(), example_two_agent()),
            Family::Mpp => {
                let p = MppParams {
                    agents: n,
                    tasks,
                    horizon,
                    density,
                    seed: s,
                    ..MppParams::default()
                };
                (format!("mpp-{s}"), compile_mpp(&gen_random_mpp(&p)).instance)
            }
            Family::Pyra => (format!("pyra-{s}"), compile_mpp(&gen_pyra(n, horizon, tasks, s)).instance),
            Family::Coordint => {
                let p = CoordintParams {
                    seed: s,
                    delay_override: None,
                };
                (format!("coordint-{s}"), compile_mpp(&gen_coordint(&p)).instance)
            }
        };
        let path = out.join(format!("{name}.json"));
        write_text(&path, &write_instance(&m))?;
        println!("{}", path.display());
    }
    Ok(())
}

/// Outcome of one algorithm on one instance.
struct Run {
    row: ResultRow,
    reason: Option<String>,
}

fn run_algorithm(
    id: &str,
    m: &Instance,
    algorithm: Algorithm,
    limit: Option<Duration>,
    memo: bool,
    max_states: Option<usize>,
) -> Result<Run, Failure> {
    let start = Instant::now();
    let mut row = ResultRow {
        instance_id: id.to_string(),
        algorithm,
        value: None,
        joint_actions_evaluated: 0,
        nodes_pruned: 0,
        decouple_events: 0,
        wall_time_ms: 0,
        status: RunStatus::Solved,
    };
    let mut reason = None;
    match algorithm {
        Algorithm::Dp => {
            let cfg = DpConfig {
                max_states,
                deadline: limit.map(|l| start + l),
            };
            match dp_solve(m, &cfg) {
                Ok(r) => {
                    row.value = Some(r.value);
                    row.joint_actions_evaluated = r.stats.joint_actions_evaluated;
                }
                Err(BaselineError::Timeout) => row.status = RunStatus::Timeout,
                Err(e @ BaselineError::StateBudget { .. }) => {
                    row.status = RunStatus::Resource;
                    reason = Some(e.to_string());
                }
                Err(e) => return Err(Failure::Validation(e.to_string())),
            }
        }
        Algorithm::Core | Algorithm::CrgPs => {
            let fail = |e: &dyn std::fmt::Display| Failure::Validation(format!("{id}: {e}"));
            let partition = partition_rewards(m, &PartitionStrategy::Balanced).map_err(|e| fail(&e))?;
            let graphs = build_all(m, &partition, CrgOptions::default()).map_err(|e| fail(&e))?;
            let base = if algorithm == Algorithm::Core {
                SearchConfig::core()
            } else {
                SearchConfig::crg_ps()
            };
            let cfg = SearchConfig {
                memoization: memo,
                time_budget: limit.map(|l| l.saturating_sub(start.elapsed())),
                ..base
            };
            let report = core_solve(m, &graphs, cfg).map_err(|e| fail(&e))?;
            row.joint_actions_evaluated = report.stats.joint_actions_evaluated;
            row.nodes_pruned = report.stats.nodes_pruned;
            row.decouple_events = report.stats.decouple_events;
            if report.complete {
                row.value = report.value;
            } else {
                row.status = RunStatus::Timeout;
            }
        }
    }
    row.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(Run { row, reason })
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn solve(
    algorithm: Algorithm,
    path: &Path,
    time_limit: Option<f64>,
    memo: bool,
    max_states: Option<usize>,
    stats: Option<&Path>,
) -> Result<(), Failure> {
    let limit = time_limit.map(seconds).transpose()?;
    let m = load_instance(path)?;
    let Run { row, reason } = run_algorithm(&instance_id(path), &m, algorithm, limit, memo, max_states)?;
    if let Some(stats) = stats {
        write_text(stats, &write_results(std::slice::from_ref(&row)))?;
    }
    eprintln!("wall time: {} ms", row.wall_time_ms);
    println!("algorithm={algorithm}");
    println!("status={}", row.status.as_str());
    println!("joint_actions_evaluated={}", row.joint_actions_evaluated);
    println!("nodes_pruned={}", row.nodes_pruned);
    println!("decouple_events={}", row.decouple_events);
    match (row.status, row.value) {
        (RunStatus::Solved, Some(v)) => {
            println!("value={}", format_value(v));
            Ok(())
        }
        (RunStatus::Resource, _) => Err(Failure::Resource(reason.unwrap_or_else(|| "resource limit".into()))),
        _ => Err(Failure::Timeout),
    }
}

fn evaluate(instance: &Path, policy: &Path) -> Result<(), Failure> {
    let m = load_instance(instance)?;
    let pi = read_policy(&read_text(policy)?).map_err(|e| Failure::Validation(format!("{}: {e}", policy.display())))?;
    let eval = evaluate_policy(&m, &pi).map_err(|e| Failure::Validation(format!("{}: {e}", policy.display())))?;
    println!("value={}", format_value(eval.value));
    Ok(())
}

fn dot(instance: &Path, agent: usize, bounds: bool) -> Result<(), Failure> {
    let m = load_instance(instance)?;
    if agent >= m.num_agents() {
        return Err(Failure::Usage(format!(
            "agent {agent} does not exist; the instance has {} agents",
            m.num_agents()
        )));
    }
    let partition =
        partition_rewards(&m, &PartitionStrategy::Balanced).map_err(|e| Failure::Validation(e.to_string()))?;
    let graphs = build_all(&m, &partition, CrgOptions::default()).map_err(|e| Failure::Validation(e.to_string()))?;
    print!("{}", export_dot(&m, &graphs[agent], DotOptions { bounds }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    dir: &Path,
    algorithms: &[Algorithm],
    time_limit: f64,
    out: &Path,
    jobs: usize,
    memo: bool,
    max_states: Option<usize>,
) -> Result<(), Failure> {
    let limit = seconds(time_limit)?;
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Usage(format!("{} holds no .json instances", dir.display())));
    }
    let instances: Vec<(String, Instance)> = paths
        .iter()
        .map(|p| load_instance(p).map(|m| (instance_id(p), m)))
        .collect::<Result<_, _>>()?;
    let mut algorithms = algorithms.to_vec();
    algorithms.sort();
    algorithms.dedup();
    let work: Vec<(usize, Algorithm)> = (0..instances.len())
        .flat_map(|i| algorithms.iter().map(move |&a| (i, a)))
        .collect();

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<ResultRow>> = Mutex::new(Vec::with_capacity(work.len()));
    let failure: Mutex<Option<Failure>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(work.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, algorithm)) = work.get(k) else { break };
                let (id, m) = &instances[i];
                match run_algorithm(id, m, algorithm, Some(limit), memo, max_states) {
                    Ok(run) => {
                        eprintln!("{id} {algorithm}: {} ({} ms)", run.row.status.as_str(), run.row.wall_time_ms);
                        rows.lock().expect("no worker panics").push(run.row);
                    }
                    Err(f) => {
                        failure.lock().expect("no worker panics").get_or_insert(f);
                    }
                }
            });
        }
    });
    if let Some(f) = failure.into_inner().expect("workers finished") {
        return Err(f);
    }
    let rows = rows.into_inner().expect("workers finished");
    write_text(out, &write_results(&rows))
}
