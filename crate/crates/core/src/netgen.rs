//! Procedural task networks with a target dependence level, and the
//! case-study organization.
//!
//! Sampling order for [`generate_network`] (all draws from one stream
//! seeded with `cfg.seed`):
//!
//! 1. one integer volume per task, uniform on `[ceil(min), floor(max)]`;
//! 2. a Fisher-Yates shuffle of task positions, giving the topological order;
//! 3. for each ordered pair `(a, b)`, `a < b` in that order, one draw against
//!    `p`; on success a precedence edge plus Sequential info edge is added and
//!    a second draw against `p` upgrades it to a Reciprocal pair.
//!
//! A pair then carries expected weight `p(1 - p) + 2p^2`, so the expected
//! measured dependence is `p(1 + p) / 2`. The edge probability is calibrated
//! as `p = (sqrt(1 + 8 d) - 1) / 2` so that it equals the target `d`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{
    AgentSpec, DependenceKind, InfoEdge, Role, Task, TaskNetwork, ValidationReport, ViolationCode,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SimRng};

/// Free default; the case organization's project sizes are not given.
pub const DEFAULT_N_TASKS: u32 = 30;
pub const DEFAULT_VOLUME_RANGE: [f64; 2] = [20.0, 60.0];
pub const CASE_STUDY_CRAFTS: [&str; 3] = ["A", "B", "C"];

fn default_n_tasks() -> u32 {
    DEFAULT_N_TASKS
}
fn default_crafts() -> Vec<String> {
    CASE_STUDY_CRAFTS.iter().map(|c| c.to_string()).collect()
}
fn default_volume_range() -> [f64; 2] {
    DEFAULT_VOLUME_RANGE
}
fn default_exchanges() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetGenConfig {
    #[serde(default = "default_n_tasks")]
    pub n_tasks: u32,
    #[serde(default)]
    pub target_d: f64,
    #[serde(default = "default_crafts")]
    pub crafts: Vec<String>,
    #[serde(default = "default_volume_range")]
    pub volume_range: [f64; 2],
    #[serde(default = "default_exchanges")]
    pub exchanges_per_edge: u32,
    #[serde(default)]
    pub seed: u64,
}

impl NetGenConfig {
    pub fn new(n_tasks: u32, target_d: f64, seed: u64) -> Self {
        Self {
            n_tasks,
            target_d,
            crafts: default_crafts(),
            volume_range: DEFAULT_VOLUME_RANGE,
            exchanges_per_edge: 1,
            seed,
        }
    }

    fn integer_volume_bounds(&self) -> (u64, u64) {
        let [lo, hi] = self.volume_range;
        (lo.ceil().max(1.0) as u64, hi.floor().max(0.0) as u64)
    }
}

pub fn validate_config(cfg: &NetGenConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let code = ViolationCode::InvalidNetgen;
    if cfg.n_tasks == 0 {
        r.push(code, "n_tasks must be at least 1");
    }
    if !(0.0..=1.0).contains(&cfg.target_d) {
        r.push(
            code,
            format!("target_d = {} is outside [0, 1]", cfg.target_d),
        );
    }
    if cfg.crafts.is_empty() {
        r.push(code, "crafts must be nonempty");
    }
    let [lo, hi] = cfg.volume_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        r.push(
            code,
            format!("volume_range [{lo}, {hi}] needs 0 < min <= max"),
        );
    } else {
        let (a, b) = cfg.integer_volume_bounds();
        if a > b {
            r.push(
                code,
                format!("volume_range [{lo}, {hi}] contains no integer volume"),
            );
        }
    }
    if cfg.exchanges_per_edge == 0 {
        r.push(code, "exchanges_per_edge must be at least 1");
    }
    r
}

/// Edge probability whose two-stage scheme yields expected dependence `target_d`.
pub fn calibrated_edge_probability(target_d: f64) -> f64 {
    (((1.0 + 8.0 * target_d).sqrt() - 1.0) / 2.0).clamp(0.0, 1.0)
}

pub fn generate_network(cfg: &NetGenConfig) -> Result<TaskNetwork> {
    generate_project(cfg, 0, cfg.seed)
}

/// `projects` networks; project `k` uses seed `derive_seed(cfg.seed, [k])`
/// and carries `project_id = k`.
pub fn generate_projects(cfg: &NetGenConfig, projects: u32) -> Result<Vec<TaskNetwork>> {
    (0..projects)
        .map(|k| generate_project(cfg, k, derive_seed(cfg.seed, &[k as u64])))
        .collect()
}

fn generate_project(cfg: &NetGenConfig, project_id: u32, seed: u64) -> Result<TaskNetwork> {
    let report = validate_config(cfg);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    let mut rng = SimRng::new(seed);
    let n = cfg.n_tasks as usize;
    let (vmin, vmax) = cfg.integer_volume_bounds();

    let tasks: Vec<Task> = (0..n)
        .map(|k| {
            let volume = rng.range_inclusive(vmin, vmax) as f64;
            Task::new(
                k as u32,
                project_id,
                cfg.crafts[k % cfg.crafts.len()].clone(),
                volume,
            )
        })
        .collect();

    let mut order: Vec<u32> = (0..n as u32).collect();
    rng.shuffle(&mut order);

    let p = calibrated_edge_probability(cfg.target_d);
    let mut precedence = Vec::new();
    let mut info_edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (order[a], order[b]);
            if !rng.bernoulli(p) {
                continue;
            }
            precedence.push((i, j));
            if rng.bernoulli(p) {
                info_edges.push(InfoEdge {
                    from: i,
                    to: j,
                    kind: DependenceKind::Reciprocal,
                });
                info_edges.push(InfoEdge {
                    from: j,
                    to: i,
                    kind: DependenceKind::Reciprocal,
                });
            } else {
                info_edges.push(InfoEdge {
                    from: i,
                    to: j,
                    kind: DependenceKind::Sequential,
                });
            }
        }
    }

    Ok(TaskNetwork {
        tasks,
        precedence,
        info_edges,
        exchanges_per_edge: cfg.exchanges_per_edge,
    })
}

pub const PRESIDENT_COST_RATE: f64 = 3.0;
pub const MANAGER_COST_RATE: f64 = 2.0;
pub const HELPER_COST_RATE: f64 = 1.0;

/// One President (id 0), three single-craft Managers for crafts A, B, C
/// (ids 1..=3), then `n_helpers_per_manager` Helpers per craft in craft order.
pub fn generate_case_study_org(n_helpers_per_manager: u32) -> Vec<AgentSpec> {
    let set = |crafts: &[&str]| {
        crafts
            .iter()
            .map(|c| c.to_string())
            .collect::<BTreeSet<_>>()
    };
    let mut agents = vec![AgentSpec {
        id: 0,
        role: Role::President,
        skill: 1.0,
        cost_rate: PRESIDENT_COST_RATE,
        crafts: set(&CASE_STUDY_CRAFTS),
    }];
    for craft in CASE_STUDY_CRAFTS {
        agents.push(AgentSpec {
            id: agents.len() as u32,
            role: Role::Manager,
            skill: 1.0,
            cost_rate: MANAGER_COST_RATE,
            crafts: set(&[craft]),
        });
    }
    for craft in CASE_STUDY_CRAFTS {
        for _ in 0..n_helpers_per_manager {
            agents.push(AgentSpec {
                id: agents.len() as u32,
                role: Role::Helper,
                skill: 1.0,
                cost_rate: HELPER_COST_RATE,
                crafts: set(&[craft]),
            });
        }
    }
    agents
}
