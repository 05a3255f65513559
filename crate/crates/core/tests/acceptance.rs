//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crgsolve::baselines::{best_decentralized_value, dp_solve, joint_actions, BaselineError, DpConfig};
use crgsolve::crg::{
    active_transitions, build_all, partition_rewards, size_audit, ArcLabel, BranchKind, Crg, CrgOptions,
    PartitionStrategy,
};
use crgsolve::domains::{
    compile_mpp, example_partition, example_two_agent, gen_coordint, gen_pyra, gen_random_mpp, random_small,
    CoordintParams, MppParams, SmallParams,
};
use crgsolve::formats::{export_dot, DotOptions};
use crgsolve::search::{core_solve, SearchConfig};
use crgsolve::{ExecutionSequence, Instance, LocalTransition, RewardFunction};

const VALUE_TOL: f64 = 1e-9;
const C1_INSTANCES: u64 = 200;
const C2_INSTANCES: u64 = 50;
const C3_INSTANCES: u64 = 20;
const C3_SEQUENCES: usize = 1000;
const C4_INSTANCES: u64 = 20;
const C5_INSTANCES: u64 = 50;
const C6_INSTANCES: u64 = 100;
const C7_INSTANCES: u64 = 100;
const C7_STRICT_SHARE: f64 = 0.8;
const C8_AGENTS: usize = 8;
const C8_HORIZON: usize = 3;
const C8_CORE_LIMIT: Duration = Duration::from_secs(300);
const C8_DP_LIMIT: Duration = Duration::from_secs(300);
const C8_FACTOR: u64 = 10;
const C10_SEEDS: u64 = 50;
const C10_SHARE: f64 = 0.9;

fn graphs(m: &Instance, options: CrgOptions) -> Vec<Crg> {
    let p = partition_rewards(m, &PartitionStrategy::Balanced).expect("balanced partition");
    build_all(m, &p, options).expect("graphs build")
}

fn small(seed: u64) -> Instance {
    random_small(seed, &SmallParams::default())
}

fn mpp(seed: u64, agents: usize, density: f64, interaction_until: Option<usize>) -> Instance {
    compile_mpp(&gen_random_mpp(&MppParams {
        agents,
        tasks: 2,
        horizon: 4,
        density,
        interaction_until,
        seed,
        ..MppParams::default()
    }))
    .instance
}

type Outcome = Result<String, String>;

fn core_cfg() -> SearchConfig {
    SearchConfig {
        memoization: true,
        ..SearchConfig::core()
    }
}

fn ps_cfg() -> SearchConfig {
    SearchConfig {
        memoization: true,
        ..SearchConfig::crg_ps()
    }
}

fn c1_oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..C1_INSTANCES {
        let m = small(seed);
        let g = graphs(&m, CrgOptions::default());
        let dp = dp_solve(&m, &DpConfig::default()).map_err(|e| e.to_string())?.value;
        let core = core_solve(&m, &g, core_cfg()).map_err(|e| e.to_string())?;
        let ps = core_solve(&m, &g, ps_cfg()).map_err(|e| e.to_string())?;
        for (name, v) in [("core", core.value), ("crg-ps", ps.value)] {
            let v = v.ok_or(format!("seed {seed}: {name} returned no value"))?;
            let d = (v - dp).abs();
            worst = worst.max(d);
            if d > VALUE_TOL {
                return Err(format!("seed {seed}: {name} {v} vs dp {dp}"));
            }
        }
    }
    Ok(format!("{C1_INSTANCES} instances, max |diff| {worst:e}"))
}

fn c2_bound_admissibility() -> Outcome {
    let mut checked = 0usize;
    for seed in 0..C2_INSTANCES {
        let m = small(1000 + seed);
        let dp = dp_solve(&m, &DpConfig::default()).map_err(|e| e.to_string())?;
        for options in [CrgOptions::default(), CrgOptions { prune_local_cri: false }] {
            let g = graphs(&m, options);
            for (t, stage) in dp.table.stages.iter().enumerate().take(m.horizon) {
                for (s, &v) in stage {
                    let bounds: Option<Vec<(f64, f64)>> = (0..m.num_agents()).map(|i| g[i].bounds(t, s[i])).collect();
                    let Some(bounds) = bounds else {
                        // Only reachable through actions the pruned graphs drop.
                        if !options.prune_local_cri {
                            return Err(format!("seed {seed}: stage {t} state {s:?} has no graph node"));
                        }
                        continue;
                    };
                    let lo: f64 = bounds.iter().map(|b| b.0).sum();
                    let hi: f64 = bounds.iter().map(|b| b.1).sum();
                    if lo > v + VALUE_TOL || v > hi + VALUE_TOL {
                        return Err(format!("seed {seed}: stage {t} state {s:?}: {lo} <= {v} <= {hi} fails"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} (stage, joint state) checks over {C2_INSTANCES} instances"))
}

fn random_sequence(m: &Instance, rng: &mut ChaCha8Rng) -> ExecutionSequence {
    let mut phi = ExecutionSequence::start(m.initial.clone());
    for _ in 0..m.horizon {
        let s = phi.last_state().to_vec();
        let a = joint_actions(m, &s).choose(rng).expect("an action is available").clone();
        let next: Vec<usize> = s
            .iter()
            .zip(&a)
            .enumerate()
            .map(|(i, (&si, &ai))| m.agents[i].outcomes(si, ai).choose(rng).expect("outcome").next)
            .collect();
        phi.push(a, next);
    }
    phi
}

fn c3_return_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances: Vec<Instance> = (0..C3_INSTANCES)
        .map(|k| if k % 2 == 0 { small(2000 + k) } else { mpp(2000 + k, 3, 0.5, None) })
        .collect();
    for n in 0..C3_SEQUENCES {
        let m = &instances[n % instances.len()];
        let phi = random_sequence(m, &mut rng);
        let mut global = 0.0;
        for t in 0..phi.len() {
            global += m.total_reward(&phi.states[t], &phi.actions[t], &phi.states[t + 1]);
        }
        let per_function: Vec<f64> = m
            .rewards
            .iter()
            .map(|f| {
                (0..phi.len())
                    .map(|t| m.reward_value(f, &phi.states[t], &phi.actions[t], &phi.states[t + 1]))
                    .sum()
            })
            .collect();
        let decomposed: f64 = per_function.iter().sum();
        let reported = m.sequence_return(&phi).map_err(|e| e.to_string())?;
        if decomposed != global || reported.total != global || reported.per_component != per_function {
            return Err(format!("sequence {n}: global {global}, decomposed {decomposed}, reported {reported:?}"));
        }
    }
    Ok(format!("{C3_SEQUENCES} sequences over {C3_INSTANCES} instances"))
}

/// The instance of `agent` alone from stage `u` on, started in `state`.
fn tail_instance(m: &Instance, agent: usize, state: usize, u: usize) -> Instance {
    let rewards: Vec<RewardFunction> = m
        .rewards
        .iter()
        .filter(|f| f.scope.len() == 1 && f.scope[0].0 == agent)
        .map(|f| RewardFunction {
            scope: vec![crgsolve::AgentId(0)],
            ..f.clone()
        })
        .collect();
    Instance {
        metadata: m.metadata.clone(),
        agents: vec![m.agents[agent].clone()],
        rewards,
        horizon: m.horizon - u,
        initial: vec![state],
    }
}

struct PrefixOracle<'a> {
    m: &'a Instance,
    u: usize,
    tails: HashMap<(usize, usize), f64>,
    memo: HashMap<(usize, Vec<usize>), f64>,
}

impl PrefixOracle<'_> {
    fn value(&mut self, t: usize, s: &[usize]) -> f64 {
        if t == self.u {
            let mut total = 0.0;
            for (i, &si) in s.iter().enumerate() {
                let m = self.m;
                let u = self.u;
                total += *self
                    .tails
                    .entry((i, si))
                    .or_insert_with(|| dp_solve(&tail_instance(m, i, si, u), &DpConfig::default()).unwrap().value);
            }
            return total;
        }
        if let Some(&v) = self.memo.get(&(t, s.to_vec())) {
            return v;
        }
        let mut best = f64::NEG_INFINITY;
        for a in joint_actions(self.m, s) {
            let mut q = 0.0;
            for (next, p) in self.m.enumerate_successors(s, &a) {
                q += p * (self.m.total_reward(s, &a, &next) + self.value(t + 1, &next));
            }
            best = best.max(q);
        }
        self.memo.insert((t, s.to_vec()), best);
        best
    }
}

fn c4_decoupling() -> Outcome {
    let u = 2;
    let mut events = Vec::new();
    for k in 0..C4_INSTANCES {
        let m = mpp(3000 + k, 2 + (k as usize % 2), 1.0, Some(u));
        let interactions = m.rewards.iter().filter(|f| f.is_interaction()).count();
        if interactions == 0 {
            return Err(format!("instance {k} has no interaction"));
        }
        let dp = dp_solve(&m, &DpConfig::default()).map_err(|e| e.to_string())?.value;
        let mut oracle = PrefixOracle {
            m: &m,
            u,
            tails: HashMap::new(),
            memo: HashMap::new(),
        };
        let split = oracle.value(0, &m.initial);
        if (dp - split).abs() > VALUE_TOL {
            return Err(format!("instance {k}: dp {dp} vs prefix + components {split}"));
        }
        let core = core_solve(&m, &graphs(&m, CrgOptions::default()), core_cfg()).map_err(|e| e.to_string())?;
        if core.stats.decouple_events < 1 {
            return Err(format!("instance {k}: no decoupling reported"));
        }
        events.push(core.stats.decouple_events);
    }
    Ok(format!(
        "{C4_INSTANCES} instances, decouple events min {} max {}",
        events.iter().min().unwrap(),
        events.iter().max().unwrap()
    ))
}

fn c5_wildcards_and_completeness() -> Outcome {
    let mut joint = 0u64;
    let mut substitutions = 0u64;
    for seed in 0..C5_INSTANCES {
        let m = small(4000 + seed);
        let g = graphs(&m, CrgOptions { prune_local_cri: false });
        let active = active_transitions(&m);
        let n = m.num_agents();
        let mut combo: Vec<Vec<LocalTransition>> = vec![Vec::new()];
        for list in &active {
            combo = combo
                .iter()
                .flat_map(|prefix| {
                    list.iter().map(move |tr| {
                        let mut v = prefix.clone();
                        v.push(*tr);
                        v
                    })
                })
                .collect();
        }
        for trs in &combo {
            joint += 1;
            let s: Vec<usize> = trs.iter().map(|t| t.from).collect();
            let a: Vec<usize> = trs.iter().map(|t| t.action).collect();
            let next: Vec<usize> = trs.iter().map(|t| t.to).collect();
            let context: Vec<Option<LocalTransition>> = trs.iter().copied().map(Some).collect();
            let mut sum = 0.0;
            for i in 0..n {
                let resolved = g[i].lookup_transition_reward(&m, &trs[i], &context).map_err(|e| e.to_string())?;
                let owned: f64 = g[i].functions.iter().map(|&f| m.reward_value(&m.rewards[f], &s, &a, &next)).sum();
                if resolved.total != owned {
                    return Err(format!("seed {seed}: agent {i} resolves {} but owns {owned} on {trs:?}", resolved.total));
                }
                sum += resolved.total;

                let tree = g[i].tree(&trs[i]).expect("tree present");
                if tree.explicit {
                    continue;
                }
                for j in (0..n).filter(|&j| j != i) {
                    let dependent: Vec<usize> = tree
                        .branches
                        .iter()
                        .filter(|b| b.agent == j && b.kind == BranchKind::Action)
                        .flat_map(|b| b.arcs.iter())
                        .filter_map(|(l, _)| match l {
                            ArcLabel::Action(x) => Some(*x),
                            _ => None,
                        })
                        .collect();
                    if dependent.contains(&trs[j].action) {
                        continue;
                    }
                    for alt in active[j].iter().filter(|t| {
                        t.from == trs[j].from && t.to == trs[j].to && t.action != trs[j].action && !dependent.contains(&t.action)
                    }) {
                        substitutions += 1;
                        let mut a2 = a.clone();
                        a2[j] = alt.action;
                        let mut ctx2 = context.clone();
                        ctx2[j] = Some(*alt);
                        let owned2: f64 = g[i].functions.iter().map(|&f| m.reward_value(&m.rewards[f], &s, &a2, &next)).sum();
                        let resolved2 = g[i].lookup_transition_reward(&m, &trs[i], &ctx2).map_err(|e| e.to_string())?;
                        if owned2 != owned || resolved2.total != resolved.total {
                            return Err(format!(
                                "seed {seed}: agent {j} action {} -> {} changes agent {i}'s reward",
                                trs[j].action, alt.action
                            ));
                        }
                    }
                }
            }
            if sum != m.total_reward(&s, &a, &next) {
                return Err(format!("seed {seed}: graph sum {sum} differs from the team reward on {trs:?}"));
            }
        }
    }
    Ok(format!("{joint} joint transitions, {substitutions} wildcard substitutions"))
}

fn c6_size_bound() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..C6_INSTANCES {
        let m = if k % 2 == 0 { small(5000 + k) } else { mpp(5000 + k, 2 + (k as usize % 3 == 0) as usize, 0.5, None) };
        for g in graphs(&m, CrgOptions::default()) {
            let audit = size_audit(&m, &g);
            if !audit.within_bound() {
                return Err(format!("instance {k} agent {}: {} > {}", g.owner, audit.measured, audit.size_bound));
            }
            worst = worst.max(audit.measured as f64 / audit.size_bound as f64);
        }
    }
    Ok(format!("{C6_INSTANCES} instances, largest measured/bound ratio {worst:.3}"))
}

fn c7_search_space() -> Outcome {
    let mut strict = 0u64;
    let mut totals = [0u64; 3];
    for k in 0..C7_INSTANCES {
        let agents = 2 + (k as usize % 2);
        let density = if k % 4 < 2 { 0.5 } else { 0.25 };
        let m = mpp(7000 + k, agents, density, None);
        let g = graphs(&m, CrgOptions::default());
        let core = core_solve(&m, &g, core_cfg()).map_err(|e| e.to_string())?;
        let ps = core_solve(&m, &g, ps_cfg()).map_err(|e| e.to_string())?;
        let dp = dp_solve(&m, &DpConfig::default()).map_err(|e| e.to_string())?;
        let (c, p, d) = (
            core.stats.joint_actions_evaluated,
            ps.stats.joint_actions_evaluated,
            dp.stats.joint_actions_evaluated,
        );
        totals[0] += c;
        totals[1] += p;
        totals[2] += d;
        if !(c <= p && p <= d) {
            return Err(format!("instance {k}: core {c}, crg-ps {p}, dp {d}"));
        }
        if p < d {
            strict += 1;
        }
    }
    let share = strict as f64 / C7_INSTANCES as f64;
    let summary = format!(
        "crg-ps < dp on {strict}/{C7_INSTANCES}; totals core {} crg-ps {} dp {}",
        totals[0], totals[1], totals[2]
    );
    if share >= C7_STRICT_SHARE {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn c8_scalability() -> Outcome {
    let m = compile_mpp(&gen_pyra(C8_AGENTS, C8_HORIZON, 2, 8)).instance;
    let started = Instant::now();
    let g = graphs(&m, CrgOptions::default());
    let cfg = SearchConfig {
        time_budget: Some(C8_CORE_LIMIT),
        ..core_cfg()
    };
    let core = core_solve(&m, &g, cfg).map_err(|e| e.to_string())?;
    let core_time = started.elapsed();
    if !core.complete || core_time > C8_CORE_LIMIT {
        return Err(format!("core did not finish within {C8_CORE_LIMIT:?}"));
    }
    let dp = dp_solve(
        &m,
        &DpConfig {
            max_states: None,
            deadline: Some(Instant::now() + C8_DP_LIMIT),
        },
    );
    let c = core.stats.joint_actions_evaluated;
    match dp {
        Err(BaselineError::Timeout) => Ok(format!("core {c} joint actions in {core_time:.1?}; dp hit its time limit")),
        Err(e) => Err(e.to_string()),
        Ok(r) => {
            let d = r.stats.joint_actions_evaluated;
            if (r.value - core.value.unwrap()).abs() > VALUE_TOL {
                return Err(format!("values differ: core {:?} dp {}", core.value, r.value));
            }
            let summary = format!("core {c} joint actions in {core_time:.1?}; dp {d}");
            if d >= C8_FACTOR * c {
                Ok(summary)
            } else {
                Err(summary)
            }
        }
    }
}

fn c9_example() -> Outcome {
    let m = example_two_agent();
    let actions = joint_actions(&m, &m.initial);
    let successors: usize = actions.iter().map(|a| m.enumerate_successors(&m.initial, a).len()).sum();
    if actions.len() != 9 || successors != 12 {
        return Err(format!("{} joint actions, {successors} successors", actions.len()));
    }
    let p = partition_rewards(&m, &example_partition()).map_err(|e| e.to_string())?;
    let g = build_all(&m, &p, CrgOptions::default()).map_err(|e| e.to_string())?;
    let tree = g[1].tree(&LocalTransition::new(0, 0, 1)).ok_or("no tree for a2")?;
    let labels: Vec<&ArcLabel> = tree.branches.iter().filter(|b| b.agent == 0).flat_map(|b| b.arcs.iter().map(|(l, _)| l)).collect();
    let has = |want: &ArcLabel| labels.contains(&want);
    if !has(&ArcLabel::AnyAction) || !has(&ArcLabel::NoInfluence) || !has(&ArcLabel::Action(0)) {
        return Err(format!("a2 tree arcs {labels:?}"));
    }
    let dot = export_dot(&m, &g[1], DotOptions::default());
    if !dot.contains("\"*¹\"") || !dot.contains("\"⊥¹") {
        return Err("DOT export lacks the wildcard arcs".into());
    }
    Ok("9 joint actions, 12 successors, a2 tree has a1, *1 and no-influence arcs".into())
}

fn c10_coordination_gap() -> Outcome {
    let mut wins = 0u64;
    for seed in 0..C10_SEEDS {
        let m = compile_mpp(&gen_coordint(&CoordintParams {
            seed,
            delay_override: None,
        }))
        .instance;
        let v = dp_solve(&m, &DpConfig::default()).map_err(|e| e.to_string())?.value;
        let open = best_decentralized_value(&m, 1 << 24).map_err(|e| e.to_string())?;
        if v > open + VALUE_TOL {
            wins += 1;
        }
    }
    let share = wins as f64 / C10_SEEDS as f64;
    let summary = format!("gap on {wins}/{C10_SEEDS} seeds");
    if share >= C10_SHARE {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", c1_oracle_equivalence),
        ("bound admissibility", c2_bound_admissibility),
        ("return decomposition", c3_return_decomposition),
        ("decoupling", c4_decoupling),
        ("wildcard soundness and reward completeness", c5_wildcards_and_completeness),
        ("size bound", c6_size_bound),
        ("search-space trend", c7_search_space),
        ("scalability smoke", c8_scalability),
        ("example fixture", c9_example),
        ("coordination value gap", c10_coordination_gap),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:2} {name}: PASS ({detail}) [{elapsed:.1?}]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({detail}) [{elapsed:.1?}]", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
