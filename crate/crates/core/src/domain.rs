//! Agents, task networks, scenarios, validation and dependence measurement.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::netgen::{self, NetGenConfig};

pub type AgentId = u32;
pub type TaskId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    President,
    Manager,
    Helper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    pub role: Role,
    /// Work-units completed per tick.
    pub skill: f64,
    /// Currency units charged per tick.
    pub cost_rate: f64,
    /// Crafts the agent can work without penalty. An empty set on the
    /// President means "all crafts".
    #[serde(default)]
    pub crafts: BTreeSet<String>,
}

impl AgentSpec {
    pub fn covers(&self, craft: &str) -> bool {
        match self.role {
            Role::President => self.crafts.is_empty() || self.crafts.contains(craft),
            _ => self.crafts.contains(craft),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TaskState {
    #[default]
    Pending,
    Ready,
    AwaitingInfo,
    InProgress,
    Done,
    Rework,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    #[serde(default)]
    pub project_id: u32,
    pub craft: String,
    pub volume: f64,
    /// Filled with `volume` by the JSON loader when absent.
    pub remaining: f64,
    #[serde(default)]
    pub state: TaskState,
    #[serde(default)]
    pub latent_error: bool,
    /// Remaining exchanges per inbound information edge, keyed by the edge's
    /// source task id. Missing entries are initialized from the network's
    /// `exchanges_per_edge` when a run starts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exchanges_outstanding: BTreeMap<TaskId, u32>,
}

impl Task {
    pub fn new(id: TaskId, project_id: u32, craft: impl Into<String>, volume: f64) -> Self {
        Self {
            id,
            project_id,
            craft: craft.into(),
            volume,
            remaining: volume,
            state: TaskState::Pending,
            latent_error: false,
            exchanges_outstanding: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependenceKind {
    Sequential,
    Reciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InfoEdge {
    pub from: TaskId,
    pub to: TaskId,
    pub kind: DependenceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNetwork {
    pub tasks: Vec<Task>,
    /// AON precedence edges `(from, to)`.
    #[serde(default)]
    pub precedence: Vec<(TaskId, TaskId)>,
    #[serde(default)]
    pub info_edges: Vec<InfoEdge>,
    pub exchanges_per_edge: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AssignmentPolicy {
    #[default]
    ByCraft,
    LoadBalance,
}

/// Embedded network generator: `projects` networks are generated from
/// `config`, project `k` using seed `derive_seed(config.seed, [k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetGenEmbed {
    #[serde(flatten)]
    pub config: NetGenConfig,
    #[serde(default = "one")]
    pub projects: u32,
}

fn one() -> u32 {
    1
}

/// Calibrated model defaults. Tick quantum is roughly one work-hour.
pub mod defaults {
    pub const GOAL_CONGRUENCE: f64 = 1.0;
    pub const MICRO_MANAGEMENT: f64 = 0.0;
    pub const MEETING_INTERVAL: u64 = 0;
    pub const MEETING_DURATION: u64 = 2;
    pub const OVERLOAD_THRESHOLD: f64 = 1.0;
    pub const OVERLOAD_WINDOW: u64 = 40;
    pub const BASE_ERROR_PROB: f64 = 0.15;
    pub const DEP_ERROR_PROB: f64 = 0.01;
    pub const DETECT_PROB: f64 = 0.1;
    pub const REVIEW_DETECT_PROB: f64 = 0.9;
    pub const REVIEW_COST: u64 = 1;
    pub const REWORK_FRACTION: f64 = 0.3;
    pub const COMPLAIN_PROB: f64 = 0.1;
    pub const HORIZON: u64 = 10_000;
    /// Skill multiplier while working a task outside one's crafts.
    pub const CRAFT_PENALTY: f64 = 0.5;
}

macro_rules! default_fn {
    ($($name:ident: $ty:ty = $val:expr;)*) => {
        $(fn $name() -> $ty { $val })*
    };
}

default_fn! {
    d_goal_congruence: f64 = defaults::GOAL_CONGRUENCE;
    d_micro_management: f64 = defaults::MICRO_MANAGEMENT;
    d_meeting_interval: u64 = defaults::MEETING_INTERVAL;
    d_meeting_duration: u64 = defaults::MEETING_DURATION;
    d_overload_threshold: f64 = defaults::OVERLOAD_THRESHOLD;
    d_overload_window: u64 = defaults::OVERLOAD_WINDOW;
    d_base_error_prob: f64 = defaults::BASE_ERROR_PROB;
    d_dep_error_prob: f64 = defaults::DEP_ERROR_PROB;
    d_detect_prob: f64 = defaults::DETECT_PROB;
    d_review_detect_prob: f64 = defaults::REVIEW_DETECT_PROB;
    d_review_cost: u64 = defaults::REVIEW_COST;
    d_rework_fraction: f64 = defaults::REWORK_FRACTION;
    d_complain_prob: f64 = defaults::COMPLAIN_PROB;
    d_horizon: u64 = defaults::HORIZON;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub networks: Vec<TaskNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netgen: Option<NetGenEmbed>,
    #[serde(default = "d_goal_congruence")]
    pub goal_congruence: f64,
    #[serde(default = "d_micro_management")]
    pub micro_management: f64,
    #[serde(default = "d_meeting_interval")]
    pub meeting_interval: u64,
    #[serde(default = "d_meeting_duration")]
    pub meeting_duration: u64,
    #[serde(default)]
    pub assignment_policy: AssignmentPolicy,
    #[serde(default = "d_overload_threshold")]
    pub overload_threshold: f64,
    #[serde(default = "d_overload_window")]
    pub overload_window: u64,
    #[serde(default = "d_base_error_prob")]
    pub base_error_prob: f64,
    #[serde(default = "d_dep_error_prob")]
    pub dep_error_prob: f64,
    #[serde(default = "d_detect_prob")]
    pub detect_prob: f64,
    #[serde(default = "d_review_detect_prob")]
    pub review_detect_prob: f64,
    #[serde(default = "d_review_cost")]
    pub review_cost: u64,
    #[serde(default = "d_rework_fraction")]
    pub rework_fraction: f64,
    #[serde(default = "d_complain_prob")]
    pub complain_prob: f64,
    #[serde(default = "d_horizon")]
    pub horizon: u64,
    pub seed: u64,
}

impl Scenario {
    /// A scenario with every model parameter at its default.
    pub fn with_defaults(agents: Vec<AgentSpec>, networks: Vec<TaskNetwork>, seed: u64) -> Self {
        Self {
            agents,
            networks,
            netgen: None,
            goal_congruence: defaults::GOAL_CONGRUENCE,
            micro_management: defaults::MICRO_MANAGEMENT,
            meeting_interval: defaults::MEETING_INTERVAL,
            meeting_duration: defaults::MEETING_DURATION,
            assignment_policy: AssignmentPolicy::ByCraft,
            overload_threshold: defaults::OVERLOAD_THRESHOLD,
            overload_window: defaults::OVERLOAD_WINDOW,
            base_error_prob: defaults::BASE_ERROR_PROB,
            dep_error_prob: defaults::DEP_ERROR_PROB,
            detect_prob: defaults::DETECT_PROB,
            review_detect_prob: defaults::REVIEW_DETECT_PROB,
            review_cost: defaults::REVIEW_COST,
            rework_fraction: defaults::REWORK_FRACTION,
            complain_prob: defaults::COMPLAIN_PROB,
            horizon: defaults::HORIZON,
            seed,
        }
    }

    pub fn total_tasks(&self) -> usize {
        self.networks.iter().map(|n| n.tasks.len()).sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.networks
            .iter()
            .flat_map(|n| n.tasks.iter())
            .map(|t| t.volume)
            .sum()
    }

    /// Mean of [`measure_dependence`] over the scenario's networks.
    pub fn mean_dependence(&self) -> Result<f64> {
        if self.networks.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for net in &self.networks {
            sum += measure_dependence(net)?;
        }
        Ok(sum / self.networks.len() as f64)
    }

    /// Replace `networks` by freshly generated ones when an embedded
    /// generator is present.
    pub fn regenerate_networks(&mut self) -> Result<()> {
        if let Some(embed) = &self.netgen {
            self.networks = netgen::generate_projects(&embed.config, embed.projects)?;
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and validate a scenario document. Unknown keys, malformed
    /// values and invariant violations all come back as a validation error.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_seed(text, None)
    }

    /// Like [`Scenario::from_json`], with `seed_override` replacing (or
    /// supplying) the document's `seed`.
    pub fn from_json_with_seed(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| {
            Error::Validation(ValidationReport::single(
                ViolationCode::ParseError,
                e.to_string(),
            ))
        })?;
        let scenario = scenario_from_value(&mut value, seed_override)?;
        let report = validate_scenario(&scenario);
        if report.is_valid() {
            Ok(scenario)
        } else {
            Err(Error::Validation(report))
        }
    }
}

/// Parse an already-decoded JSON value into a scenario (unknown-key check,
/// `remaining` defaulting, seed handling, network materialization) without
/// running invariant validation.
pub fn scenario_from_value(value: &mut Value, seed_override: Option<u64>) -> Result<Scenario> {
    let mut report = ValidationReport::default();
    check_scenario_keys(value, &mut report);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    fill_task_remaining(value);
    if let (Some(seed), Some(obj)) = (seed_override, value.as_object_mut()) {
        obj.insert("seed".into(), Value::from(seed));
    }
    if value.get("seed").is_none() {
        return Err(Error::Validation(ValidationReport::single(
            ViolationCode::MissingSeed,
            "scenario has no seed; give one in the document or on the command line",
        )));
    }
    let mut scenario: Scenario = serde_json::from_value(value.clone()).map_err(|e| {
        Error::Validation(ValidationReport::single(
            ViolationCode::ParseError,
            e.to_string(),
        ))
    })?;
    if scenario.networks.is_empty() && scenario.netgen.is_some() {
        scenario.regenerate_networks().map_err(|e| match e {
            Error::Validation(r) => Error::Validation(r),
            other => Error::Validation(ValidationReport::single(
                ViolationCode::InvalidNetgen,
                other.to_string(),
            )),
        })?;
    }
    Ok(scenario)
}

const SCENARIO_KEYS: &[&str] = &[
    "agents",
    "networks",
    "netgen",
    "goal_congruence",
    "micro_management",
    "meeting_interval",
    "meeting_duration",
    "assignment_policy",
    "overload_threshold",
    "overload_window",
    "base_error_prob",
    "dep_error_prob",
    "detect_prob",
    "review_detect_prob",
    "review_cost",
    "rework_fraction",
    "complain_prob",
    "horizon",
    "seed",
];
const AGENT_KEYS: &[&str] = &["id", "role", "skill", "cost_rate", "crafts"];
const NETWORK_KEYS: &[&str] = &["tasks", "precedence", "info_edges", "exchanges_per_edge"];
const TASK_KEYS: &[&str] = &[
    "id",
    "project_id",
    "craft",
    "volume",
    "remaining",
    "state",
    "latent_error",
    "exchanges_outstanding",
];
const EDGE_KEYS: &[&str] = &["from", "to", "kind"];
pub(crate) const NETGEN_KEYS: &[&str] = &[
    "n_tasks",
    "target_d",
    "crafts",
    "volume_range",
    "exchanges_per_edge",
    "seed",
    "projects",
];

pub(crate) fn check_keys(
    value: &Value,
    allowed: &[&str],
    path: &str,
    report: &mut ValidationReport,
) {
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                report.push(
                    ViolationCode::UnknownKey,
                    format!("unknown key `{key}` at {path}"),
                );
            }
        }
    }
}

fn check_scenario_keys(value: &Value, report: &mut ValidationReport) {
    check_keys(value, SCENARIO_KEYS, "$", report);
    if let Some(agents) = value.get("agents").and_then(Value::as_array) {
        for (i, a) in agents.iter().enumerate() {
            check_keys(a, AGENT_KEYS, &format!("$.agents[{i}]"), report);
        }
    }
    if let Some(nets) = value.get("networks").and_then(Value::as_array) {
        for (n, net) in nets.iter().enumerate() {
            let path = format!("$.networks[{n}]");
            check_keys(net, NETWORK_KEYS, &path, report);
            if let Some(tasks) = net.get("tasks").and_then(Value::as_array) {
                for (i, t) in tasks.iter().enumerate() {
                    check_keys(t, TASK_KEYS, &format!("{path}.tasks[{i}]"), report);
                }
            }
            if let Some(edges) = net.get("info_edges").and_then(Value::as_array) {
                for (i, e) in edges.iter().enumerate() {
                    check_keys(e, EDGE_KEYS, &format!("{path}.info_edges[{i}]"), report);
                }
            }
        }
    }
    if let Some(ng) = value.get("netgen") {
        check_keys(ng, NETGEN_KEYS, "$.netgen", report);
    }
}

fn fill_task_remaining(value: &mut Value) {
    let Some(nets) = value.get_mut("networks").and_then(Value::as_array_mut) else {
        return;
    };
    for net in nets {
        let Some(tasks) = net.get_mut("tasks").and_then(Value::as_array_mut) else {
            continue;
        };
        for t in tasks {
            if let Some(obj) = t.as_object_mut() {
                if !obj.contains_key("remaining") {
                    if let Some(v) = obj.get("volume").cloned() {
                        obj.insert("remaining".into(), v);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    ParseError,
    UnknownKey,
    MissingSeed,
    MissingPresident,
    DuplicatePresident,
    DuplicateAgentId,
    InvalidSkill,
    InvalidCostRate,
    InvalidCrafts,
    UncoveredCraft,
    NoNetworks,
    EmptyNetwork,
    DuplicateTaskId,
    InvalidVolume,
    InvalidRemaining,
    InvalidDoneState,
    InvalidExchangeCount,
    InvalidExchangeState,
    UnknownTask,
    SelfEdge,
    DuplicateEdge,
    PrecedenceCycle,
    SequentialWithoutPrecedence,
    ReciprocalUnpaired,
    ReciprocalPrecedence,
    ProbabilityOutOfRange,
    InvalidHorizon,
    InvalidOverloadThreshold,
    InvalidOverloadWindow,
    InvalidReworkFraction,
    InvalidReviewCost,
    InvalidMeeting,
    InvalidNetgen,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            ParseError => "PARSE_ERROR",
            UnknownKey => "UNKNOWN_KEY",
            MissingSeed => "MISSING_SEED",
            MissingPresident => "MISSING_PRESIDENT",
            DuplicatePresident => "DUPLICATE_PRESIDENT",
            DuplicateAgentId => "DUPLICATE_AGENT_ID",
            InvalidSkill => "INVALID_SKILL",
            InvalidCostRate => "INVALID_COST_RATE",
            InvalidCrafts => "INVALID_CRAFTS",
            UncoveredCraft => "UNCOVERED_CRAFT",
            NoNetworks => "NO_NETWORKS",
            EmptyNetwork => "EMPTY_NETWORK",
            DuplicateTaskId => "DUPLICATE_TASK_ID",
            InvalidVolume => "INVALID_VOLUME",
            InvalidRemaining => "INVALID_REMAINING",
            InvalidDoneState => "INVALID_DONE_STATE",
            InvalidExchangeCount => "INVALID_EXCHANGE_COUNT",
            InvalidExchangeState => "INVALID_EXCHANGE_STATE",
            UnknownTask => "UNKNOWN_TASK",
            SelfEdge => "SELF_EDGE",
            DuplicateEdge => "DUPLICATE_EDGE",
            PrecedenceCycle => "PRECEDENCE_CYCLE",
            SequentialWithoutPrecedence => "SEQUENTIAL_WITHOUT_PRECEDENCE",
            ReciprocalUnpaired => "RECIPROCAL_UNPAIRED",
            ReciprocalPrecedence => "RECIPROCAL_PRECEDENCE",
            ProbabilityOutOfRange => "PROBABILITY_OUT_OF_RANGE",
            InvalidHorizon => "INVALID_HORIZON",
            InvalidOverloadThreshold => "INVALID_OVERLOAD_THRESHOLD",
            InvalidOverloadWindow => "INVALID_OVERLOAD_WINDOW",
            InvalidReworkFraction => "INVALID_REWORK_FRACTION",
            InvalidReviewCost => "INVALID_REVIEW_COST",
            InvalidMeeting => "INVALID_MEETING",
            InvalidNetgen => "INVALID_NETGEN",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn single(code: ViolationCode, message: impl Into<String>) -> Self {
        let mut r = Self::default();
        r.push(code, message);
        r
    }

    pub fn push(&mut self, code: ViolationCode, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.code, v.message)?;
        }
        Ok(())
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Report every violated invariant of the scenario and everything it contains.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();

    let presidents = s
        .agents
        .iter()
        .filter(|a| a.role == Role::President)
        .count();
    match presidents {
        0 => r.push(MissingPresident, "scenario has no President"),
        1 => {}
        n => r.push(DuplicatePresident, format!("scenario has {n} Presidents")),
    }

    let mut ids = HashSet::new();
    for a in &s.agents {
        if !ids.insert(a.id) {
            r.push(
                DuplicateAgentId,
                format!("agent id {} appears more than once", a.id),
            );
        }
        if !(a.skill.is_finite() && a.skill > 0.0) {
            r.push(
                InvalidSkill,
                format!("agent {} has skill {}", a.id, a.skill),
            );
        }
        if !(a.cost_rate.is_finite() && a.cost_rate >= 0.0) {
            r.push(
                InvalidCostRate,
                format!("agent {} has cost_rate {}", a.id, a.cost_rate),
            );
        }
        match a.role {
            Role::Manager if a.crafts.is_empty() => {
                r.push(InvalidCrafts, format!("manager {} has no crafts", a.id))
            }
            Role::Helper if a.crafts.len() != 1 => r.push(
                InvalidCrafts,
                format!(
                    "helper {} must have exactly one craft, has {}",
                    a.id,
                    a.crafts.len()
                ),
            ),
            _ => {}
        }
    }

    let used_crafts: BTreeSet<&str> = s
        .networks
        .iter()
        .flat_map(|n| n.tasks.iter())
        .map(|t| t.craft.as_str())
        .collect();
    // A President-only organization is allowed; the President covers every craft.
    let has_managers = s.agents.iter().any(|a| a.role == Role::Manager);
    for craft in &used_crafts {
        if has_managers
            && !s
                .agents
                .iter()
                .any(|a| a.role == Role::Manager && a.crafts.contains(*craft))
        {
            r.push(
                UncoveredCraft,
                format!("craft `{craft}` is not covered by any Manager"),
            );
        }
        for p in s.agents.iter().filter(|a| a.role == Role::President) {
            if !p.covers(craft) {
                r.push(
                    InvalidCrafts,
                    format!(
                        "president {} must cover all crafts; missing `{craft}`",
                        p.id
                    ),
                );
            }
        }
    }

    if s.networks.is_empty() {
        r.push(NoNetworks, "scenario has no task networks");
    }
    for (p, net) in s.networks.iter().enumerate() {
        for v in validate_network(net).violations {
            r.push(v.code, format!("project {p}: {}", v.message));
        }
    }

    for (name, value) in [
        ("goal_congruence", s.goal_congruence),
        ("micro_management", s.micro_management),
        ("base_error_prob", s.base_error_prob),
        ("dep_error_prob", s.dep_error_prob),
        ("detect_prob", s.detect_prob),
        ("review_detect_prob", s.review_detect_prob),
        ("complain_prob", s.complain_prob),
    ] {
        if !in_unit(value) {
            r.push(
                ProbabilityOutOfRange,
                format!("{name} = {value} is outside [0, 1]"),
            );
        }
    }
    if s.horizon == 0 {
        r.push(InvalidHorizon, "horizon must be positive");
    }
    if !(s.overload_threshold.is_finite() && s.overload_threshold > 0.0) {
        r.push(
            InvalidOverloadThreshold,
            format!(
                "overload_threshold = {} must be positive",
                s.overload_threshold
            ),
        );
    }
    if s.overload_window == 0 {
        r.push(
            InvalidOverloadWindow,
            "overload_window must be at least 1 tick",
        );
    }
    if !(s.rework_fraction > 0.0 && s.rework_fraction <= 1.0) {
        r.push(
            InvalidReworkFraction,
            format!("rework_fraction = {} is outside (0, 1]", s.rework_fraction),
        );
    }
    if s.review_cost == 0 {
        r.push(InvalidReviewCost, "review_cost must be at least 1 tick");
    }
    if s.meeting_interval > 0
        && (s.meeting_duration == 0 || s.meeting_duration >= s.meeting_interval)
    {
        r.push(
            InvalidMeeting,
            format!(
                "meeting_duration {} must be in [1, meeting_interval {})",
                s.meeting_duration, s.meeting_interval
            ),
        );
    }
    if let Some(embed) = &s.netgen {
        for v in netgen::validate_config(&embed.config).violations {
            r.push(InvalidNetgen, v.message);
        }
        if embed.projects == 0 {
            r.push(InvalidNetgen, "netgen.projects must be at least 1");
        }
    }
    r
}

/// Structural validation of a single network.
pub fn validate_network(net: &TaskNetwork) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();

    if net.tasks.is_empty() {
        r.push(EmptyNetwork, "network has no tasks");
    }
    if net.exchanges_per_edge == 0 {
        r.push(
            InvalidExchangeCount,
            "exchanges_per_edge must be at least 1",
        );
    }

    let mut ids = HashSet::new();
    for t in &net.tasks {
        if !ids.insert(t.id) {
            r.push(
                DuplicateTaskId,
                format!("task id {} appears more than once", t.id),
            );
        }
        if !(t.volume.is_finite() && t.volume > 0.0) {
            r.push(
                InvalidVolume,
                format!("task {} has volume {}", t.id, t.volume),
            );
        }
        if !(t.remaining.is_finite() && t.remaining >= 0.0 && t.remaining <= t.volume) {
            r.push(
                InvalidRemaining,
                format!(
                    "task {} has remaining {} (volume {})",
                    t.id, t.remaining, t.volume
                ),
            );
        }
        if t.state == TaskState::Done
            && (t.remaining != 0.0 || t.exchanges_outstanding.values().any(|&c| c > 0))
        {
            r.push(
                InvalidDoneState,
                format!("task {} is Done with remaining work or exchanges", t.id),
            );
        }
    }

    let mut prec = HashSet::new();
    for &(a, b) in &net.precedence {
        if a == b {
            r.push(SelfEdge, format!("precedence self-edge on task {a}"));
        }
        for x in [a, b] {
            if !ids.contains(&x) {
                r.push(
                    UnknownTask,
                    format!("precedence edge references unknown task {x}"),
                );
            }
        }
        if !prec.insert((a, b)) {
            r.push(
                DuplicateEdge,
                format!("duplicate precedence edge {a} -> {b}"),
            );
        }
    }

    let mut info: HashMap<(TaskId, TaskId), DependenceKind> = HashMap::new();
    for e in &net.info_edges {
        if e.from == e.to {
            r.push(
                SelfEdge,
                format!("information self-edge on task {}", e.from),
            );
        }
        for x in [e.from, e.to] {
            if !ids.contains(&x) {
                r.push(
                    UnknownTask,
                    format!("information edge references unknown task {x}"),
                );
            }
        }
        if info.insert((e.from, e.to), e.kind).is_some() {
            r.push(
                DuplicateEdge,
                format!("duplicate information edge {} -> {}", e.from, e.to),
            );
        }
    }
    for e in &net.info_edges {
        match e.kind {
            DependenceKind::Sequential => {
                if !prec.contains(&(e.from, e.to)) {
                    r.push(
                        SequentialWithoutPrecedence,
                        format!(
                            "sequential edge {} -> {} has no precedence edge",
                            e.from, e.to
                        ),
                    );
                }
            }
            DependenceKind::Reciprocal => {
                if info.get(&(e.to, e.from)) != Some(&DependenceKind::Reciprocal) {
                    r.push(
                        ReciprocalUnpaired,
                        format!(
                            "reciprocal edge {} -> {} has no reverse member",
                            e.from, e.to
                        ),
                    );
                } else if e.from < e.to {
                    let fwd = prec.contains(&(e.from, e.to));
                    let bwd = prec.contains(&(e.to, e.from));
                    if fwd == bwd {
                        r.push(
                            ReciprocalPrecedence,
                            format!(
                                "reciprocal pair {} <-> {} needs exactly one precedence direction",
                                e.from, e.to
                            ),
                        );
                    }
                }
            }
        }
    }

    for t in &net.tasks {
        for src in t.exchanges_outstanding.keys() {
            if !info.contains_key(&(*src, t.id)) {
                r.push(
                    InvalidExchangeState,
                    format!(
                        "task {} tracks exchanges on non-edge {} -> {}",
                        t.id, src, t.id
                    ),
                );
            }
        }
    }

    let endpoints_known = net
        .precedence
        .iter()
        .all(|(a, b)| ids.contains(a) && ids.contains(b));
    if endpoints_known && topological_order(net).is_none() {
        r.push(PrecedenceCycle, "precedence edges contain a cycle");
    }
    r
}

/// Kahn's algorithm over task positions; `None` when the precedence graph
/// has a cycle (or references unknown tasks). Ties go to the lowest position.
pub fn topological_order(net: &TaskNetwork) -> Option<Vec<usize>> {
    let pos: HashMap<TaskId, usize> = net
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id, i))
        .collect();
    let n = net.tasks.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in &net.precedence {
        let (&ia, &ib) = (pos.get(&a)?, pos.get(&b)?);
        succ[ia].push(ib);
        indeg[ib] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Normalized dependence intensity in `[0, 1]`.
///
/// Each Sequential edge weighs 1 and each direction of a Reciprocal pair
/// weighs 1, over a denominator of `2 * C(n, 2) = n (n - 1)`. A network where
/// every pair is reciprocal measures 1; one with no information edges
/// measures 0.
pub fn measure_dependence(net: &TaskNetwork) -> Result<f64> {
    let report = validate_network(net);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    let n = net.tasks.len() as f64;
    if net.tasks.len() < 2 {
        return Ok(0.0);
    }
    let weight = net.info_edges.len() as f64;
    Ok(weight / (n * (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn agent(id: AgentId, role: Role, crafts: &[&str]) -> AgentSpec {
        AgentSpec {
            id,
            role,
            skill: 1.0,
            cost_rate: 1.0,
            crafts: crafts.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn chain_net(n: u32) -> TaskNetwork {
        let crafts = ["A", "B", "C"];
        TaskNetwork {
            tasks: (0..n)
                .map(|i| Task::new(i, 0, crafts[i as usize % 3], 2.0))
                .collect(),
            precedence: (1..n).map(|i| (i - 1, i)).collect(),
            info_edges: (1..n)
                .map(|i| InfoEdge {
                    from: i - 1,
                    to: i,
                    kind: DependenceKind::Sequential,
                })
                .collect(),
            exchanges_per_edge: 1,
        }
    }

    fn well_formed() -> Scenario {
        Scenario::with_defaults(
            vec![
                agent(0, Role::President, &["A", "B", "C"]),
                agent(1, Role::Manager, &["A"]),
                agent(2, Role::Manager, &["B"]),
                agent(3, Role::Manager, &["C"]),
            ],
            vec![chain_net(3)],
            1,
        )
    }

    #[test]
    fn well_formed_scenario_has_empty_report() {
        let r = validate_scenario(&well_formed());
        assert!(r.is_valid(), "{r}");
    }

    #[test]
    fn two_presidents_reported() {
        let mut s = well_formed();
        s.agents.push(agent(9, Role::President, &[]));
        assert!(validate_scenario(&s).has(ViolationCode::DuplicatePresident));
    }

    #[test]
    fn precedence_cycle_reported() {
        let mut s = well_formed();
        s.networks[0].precedence.push((1, 0));
        let r = validate_scenario(&s);
        assert!(r.has(ViolationCode::PrecedenceCycle), "{r}");
    }

    #[test]
    fn uncovered_craft_and_bad_roles() {
        let mut s = well_formed();
        s.agents.retain(|a| a.id != 3);
        s.agents.push(agent(4, Role::Helper, &["A", "B"]));
        let r = validate_scenario(&s);
        assert!(r.has(ViolationCode::UncoveredCraft));
        assert!(r.has(ViolationCode::InvalidCrafts));
    }

    #[test]
    fn reciprocal_rules() {
        let mut net = chain_net(2);
        net.info_edges = vec![InfoEdge {
            from: 0,
            to: 1,
            kind: DependenceKind::Reciprocal,
        }];
        assert!(validate_network(&net).has(ViolationCode::ReciprocalUnpaired));
        net.info_edges.push(InfoEdge {
            from: 1,
            to: 0,
            kind: DependenceKind::Reciprocal,
        });
        assert!(validate_network(&net).is_valid());
        net.precedence.clear();
        assert!(validate_network(&net).has(ViolationCode::ReciprocalPrecedence));
    }

    #[test]
    fn sequential_needs_precedence() {
        let mut net = chain_net(3);
        net.precedence.pop();
        assert!(validate_network(&net).has(ViolationCode::SequentialWithoutPrecedence));
    }

    #[test]
    fn done_state_invariant() {
        let mut net = chain_net(2);
        net.tasks[0].state = TaskState::Done;
        assert!(validate_network(&net).has(ViolationCode::InvalidDoneState));
        net.tasks[0].remaining = 0.0;
        assert!(validate_network(&net).is_valid());
    }

    #[test]
    fn dependence_examples() {
        let mut net = chain_net(5);
        net.precedence.clear();
        net.info_edges.clear();
        assert_eq!(measure_dependence(&net).unwrap(), 0.0);

        // n = 2 with one reciprocal pair: 2 / (2 * 1) = 1.
        let mut pair = chain_net(2);
        pair.info_edges = vec![
            InfoEdge {
                from: 0,
                to: 1,
                kind: DependenceKind::Reciprocal,
            },
            InfoEdge {
                from: 1,
                to: 0,
                kind: DependenceKind::Reciprocal,
            },
        ];
        assert_eq!(measure_dependence(&pair).unwrap(), 1.0);

        // n = 3 chain, 2 sequential edges: 2 / (2 * 3) = 1/3.
        let d = measure_dependence(&chain_net(3)).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(measure_dependence(&chain_net(1)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_network_cannot_be_measured() {
        let mut net = chain_net(3);
        net.precedence.push((2, 0));
        assert!(measure_dependence(&net).is_err());
    }

    #[test]
    fn json_roundtrip_and_unknown_key() {
        let s = well_formed();
        let text = s.to_json_pretty().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = Value::from(1);
        v["agents"][0]["mood"] = Value::from("grumpy");
        match Scenario::from_json(&v.to_string()) {
            Err(Error::Validation(r)) => {
                assert_eq!(
                    r.violations
                        .iter()
                        .filter(|x| x.code == ViolationCode::UnknownKey)
                        .count(),
                    2
                );
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn remaining_defaults_to_volume_and_seed_override() {
        let text = r#"{
            "agents": [{"id": 0, "role": "President", "skill": 1.0, "cost_rate": 3.0},
                       {"id": 1, "role": "Manager", "skill": 1.0, "cost_rate": 2.0, "crafts": ["A"]}],
            "networks": [{"tasks": [{"id": 0, "craft": "A", "volume": 4}], "exchanges_per_edge": 1}]
        }"#;
        assert!(matches!(
            Scenario::from_json(text),
            Err(Error::Validation(r)) if r.has(ViolationCode::MissingSeed)
        ));
        let s = Scenario::from_json_with_seed(text, Some(7)).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.networks[0].tasks[0].remaining, 4.0);
        assert_eq!(s.horizon, defaults::HORIZON);
    }

    #[test]
    fn validation_is_idempotent() {
        let mut s = well_formed();
        s.goal_congruence = 1.5;
        s.agents.push(agent(0, Role::Helper, &["A"]));
        let a = validate_scenario(&s);
        let b = validate_scenario(&s);
        assert_eq!(a, b);
        assert!(a.has(ViolationCode::ProbabilityOutOfRange));
        assert!(a.has(ViolationCode::DuplicateAgentId));
    }
}
