#![allow(dead_code)]

pub mod reference;

use std::collections::BTreeSet;

use bidsim::domain::AssignmentPolicy;
use bidsim::netgen::{generate_projects, NetGenConfig};
use bidsim::{AgentSpec, Role, Scenario, SimRng};

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_agents: u32,
    pub max_tasks: u32,
    pub max_projects: u32,
    pub min_g: f64,
}

pub const SMALL: Shape = Shape {
    max_agents: 3,
    max_tasks: 6,
    max_projects: 2,
    min_g: 0.1,
};
pub const MEDIUM: Shape = Shape {
    max_agents: 6,
    max_tasks: 12,
    max_projects: 3,
    min_g: 0.0,
};

fn crafts(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|c| c.to_string()).collect()
}

/// A random valid scenario. Agent ids are sparse and the President need not
/// have the lowest id; every behavioral parameter is randomized, with
/// complain_prob kept below 1 so that overloaded agents eventually work.
pub fn random_scenario(seed: u64, shape: Shape) -> Scenario {
    let mut rng = SimRng::new(seed);
    let uniform = |rng: &mut SimRng, lo: f64, hi: f64| lo + (hi - lo) * rng.next_f64();
    let craft_pool = ["A", "B", "C"];
    let n_crafts = rng.range_inclusive(1, 3) as usize;
    let used = &craft_pool[..n_crafts];

    let n_agents = rng.range_inclusive(1, shape.max_agents as u64) as usize;
    let mut ids: Vec<u32> = (0..20).collect();
    rng.shuffle(&mut ids);
    let mut agents = Vec::new();
    for (k, &id) in ids.iter().take(n_agents).enumerate() {
        let skill = [1.0, 1.0, 2.0, 0.5][rng.below(4) as usize];
        let (role, set) = if k == 0 {
            let all = rng.bernoulli(0.5);
            (
                Role::President,
                if all { crafts(used) } else { BTreeSet::new() },
            )
        } else if k == 1 || rng.bernoulli(0.3) {
            // The first Manager covers every craft in use.
            let set = if k == 1 {
                crafts(used)
            } else {
                crafts(&[used[rng.below(used.len() as u64) as usize]])
            };
            (Role::Manager, set)
        } else {
            (
                Role::Helper,
                crafts(&[used[rng.below(used.len() as u64) as usize]]),
            )
        };
        agents.push(AgentSpec {
            id,
            role,
            skill,
            cost_rate: uniform(&mut rng, 0.0, 3.0),
            crafts: set,
        });
    }

    let projects = rng.range_inclusive(1, shape.max_projects as u64) as u32;
    let per_project = (shape.max_tasks / projects).max(1);
    let mut cfg = NetGenConfig::new(
        rng.range_inclusive(1, per_project as u64) as u32,
        [0.0, 0.25, 0.5, 1.0, rng.next_f64()][rng.below(5) as usize],
        rng.next_u64(),
    );
    cfg.crafts = used.iter().map(|c| c.to_string()).collect();
    cfg.volume_range = [1.0, 6.0];
    cfg.exchanges_per_edge = rng.range_inclusive(1, 2) as u32;
    let networks = generate_projects(&cfg, projects).expect("valid generator config");

    let mut s = Scenario::with_defaults(agents, networks, rng.next_u64());
    s.goal_congruence = uniform(&mut rng, shape.min_g.max(0.0), 1.0);
    s.micro_management = [0.0, 1.0, rng.next_f64()][rng.below(3) as usize];
    if rng.bernoulli(0.3) {
        s.meeting_interval = rng.range_inclusive(4, 15);
        s.meeting_duration = rng.range_inclusive(1, 3);
    }
    s.assignment_policy = if rng.bernoulli(0.5) {
        AssignmentPolicy::ByCraft
    } else {
        AssignmentPolicy::LoadBalance
    };
    s.overload_threshold = uniform(&mut rng, 0.05, 1.5);
    s.overload_window = rng.range_inclusive(1, 20);
    s.base_error_prob = uniform(&mut rng, 0.0, 0.5);
    s.dep_error_prob = uniform(&mut rng, 0.0, 0.2);
    s.detect_prob = rng.next_f64();
    s.review_detect_prob = rng.next_f64();
    s.review_cost = rng.range_inclusive(1, 3);
    s.rework_fraction = uniform(&mut rng, 0.1, 1.0);
    s.complain_prob = uniform(&mut rng, 0.0, 0.5);
    s.horizon = 20_000;
    s
}

/// Longest precedence chain where each task weighs its fastest possible
/// work time plus one tick per inbound exchange, and at least total volume
/// over total skill.
pub fn analytic_lower_bound(s: &Scenario) -> u64 {
    let max_skill = s.agents.iter().map(|a| a.skill).fold(0.0, f64::max);
    let total_skill: f64 = s.agents.iter().map(|a| a.skill).sum();
    let mut best = (s.total_volume() / total_skill).ceil() as u64;
    for net in &s.networks {
        let order = bidsim::domain::topological_order(net).expect("acyclic");
        let mut finish = vec![0u64; net.tasks.len()];
        for &i in &order {
            let t = &net.tasks[i];
            let start = net
                .precedence
                .iter()
                .filter(|(_, to)| *to == t.id)
                .map(|(from, _)| finish[net.tasks.iter().position(|x| x.id == *from).unwrap()])
                .max()
                .unwrap_or(0);
            let inbound = net.info_edges.iter().filter(|e| e.to == t.id).count() as u64;
            finish[i] = start
                + (t.volume / max_skill).ceil() as u64
                + inbound * net.exchanges_per_edge as u64;
            best = best.max(finish[i]);
        }
    }
    best.max(1)
}
