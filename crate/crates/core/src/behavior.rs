//! Per-agent decision logic and the stochastic rules the engine applies.
//!
//! [`decide_action`] walks a fixed priority list; the remaining functions
//! are the individual behavioral rules (exchange success, overload, error
//! commission, downstream detection, review, assignment). Functions that
//! draw randomness document exactly how many draws they consume, since run
//! reproducibility depends on a fixed draw order.

use serde::{Deserialize, Serialize};

use crate::domain::{defaults, AgentId, AssignmentPolicy, Role, Task, TaskState};
use crate::engine::AgentState;
use crate::rng::SimRng;

/// Position of a task in the engine's flattened task list.
pub type TaskIdx = usize;
pub type RequestId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Work,
    ServeExchange,
    RequestExchange,
    Complain,
    Meet,
    Review,
    AssignTask,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Work(TaskIdx),
    ServeExchange(RequestId),
    /// Ask for one exchange on the information edge `source -> task`.
    RequestExchange {
        task: TaskIdx,
        source: TaskIdx,
    },
    Complain,
    Meet,
    Review(TaskIdx),
    AssignTask(TaskIdx),
    Idle,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Work(_) => ActionKind::Work,
            Action::ServeExchange(_) => ActionKind::ServeExchange,
            Action::RequestExchange { .. } => ActionKind::RequestExchange,
            Action::Complain => ActionKind::Complain,
            Action::Meet => ActionKind::Meet,
            Action::Review(_) => ActionKind::Review,
            Action::AssignTask(_) => ActionKind::AssignTask,
            Action::Idle => ActionKind::Idle,
        }
    }
}

/// An information request travelling from the owner of an edge's target
/// task to the agent answering for its source task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub id: RequestId,
    /// `(source, target)` task positions.
    pub edge: (TaskIdx, TaskIdx),
    /// Agent positions (ascending-id order).
    pub requester: usize,
    pub responder: usize,
    /// Serve attempts made on this edge before this request.
    pub attempts: u32,
    pub resolved: bool,
    /// Requests are servable from the tick after they are made.
    pub created_tick: u64,
}

/// Read-only world as seen by one deciding agent.
pub trait WorldView {
    fn in_meeting(&self) -> bool;
    /// Remaining volume of every unfinished task in the agent's queue.
    fn queued_volume(&self, agent: usize) -> f64;
    /// Head of the President's review queue.
    fn pending_review(&self) -> Option<TaskIdx>;
    /// Oldest servable request addressed to `agent`.
    fn oldest_inbound_request(&self, agent: usize) -> Option<RequestId>;
    /// The agent's current task and an inbound edge source still owing
    /// exchanges with no request in flight.
    fn exchange_needed(&self, agent: usize) -> Option<(TaskIdx, TaskIdx)>;
    /// First task in the agent's queue that can take a Work tick.
    fn runnable_task(&self, agent: usize) -> Option<TaskIdx>;
    /// Lowest-position released task with no owner.
    fn unassigned_released_task(&self) -> Option<TaskIdx>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionParams {
    pub complain_prob: f64,
    pub overload_threshold: f64,
    pub overload_window: u64,
}

/// Pick exactly one action for an idle agent:
///
/// 1. in a meeting window: Meet;
/// 2. overloaded: one draw, Complain with probability `complain_prob`;
/// 3. President with a task awaiting review: Review;
/// 4. a servable inbound request: ServeExchange (lowest request id);
/// 5. current task owes an exchange with none in flight: RequestExchange;
/// 6. a runnable task in the queue: Work;
/// 7. Manager or President and an unassigned released task: AssignTask;
/// 8. Idle.
pub fn decide_action(
    agent: &AgentState,
    view: &impl WorldView,
    params: &DecisionParams,
    rng: &mut SimRng,
) -> Action {
    let me = agent.index;
    if view.in_meeting() {
        return Action::Meet;
    }
    if is_overloaded(
        view.queued_volume(me),
        agent.spec.skill,
        params.overload_threshold,
        params.overload_window,
    ) && rng.bernoulli(params.complain_prob)
    {
        return Action::Complain;
    }
    if agent.spec.role == Role::President {
        if let Some(task) = view.pending_review() {
            return Action::Review(task);
        }
    }
    if let Some(req) = view.oldest_inbound_request(me) {
        return Action::ServeExchange(req);
    }
    if let Some((task, source)) = view.exchange_needed(me) {
        return Action::RequestExchange { task, source };
    }
    if let Some(task) = view.runnable_task(me) {
        return Action::Work(task);
    }
    if matches!(agent.spec.role, Role::Manager | Role::President) {
        if let Some(task) = view.unassigned_released_task() {
            return Action::AssignTask(task);
        }
    }
    Action::Idle
}

/// One exchange attempt; succeeds with probability `g`. One draw.
pub fn attempt_exchange(g: f64, rng: &mut SimRng) -> bool {
    rng.bernoulli(g)
}

/// Backlog exceeds `threshold` times what the agent can clear in `window` ticks.
pub fn is_overloaded(queued_volume: f64, skill: f64, threshold: f64, window: u64) -> bool {
    queued_volume / (skill * window as f64) > threshold
}

pub fn completion_error_prob(base: f64, per_edge: f64, info_in_edges: usize) -> f64 {
    (base + per_edge * info_in_edges as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionRecord {
    pub latent_error: bool,
}

/// Mark `task` Done and draw whether it carries a latent error. One draw.
/// Goal congruence does not enter the error probability.
pub fn complete_task(
    task: &mut Task,
    info_in_edges: usize,
    base_error_prob: f64,
    dep_error_prob: f64,
    rng: &mut SimRng,
) -> CompletionRecord {
    let p = completion_error_prob(base_error_prob, dep_error_prob, info_in_edges);
    let latent_error = rng.bernoulli(p);
    task.remaining = 0.0;
    task.state = TaskState::Done;
    task.latent_error = latent_error;
    for c in task.exchanges_outstanding.values_mut() {
        *c = 0;
    }
    CompletionRecord { latent_error }
}

/// Re-open a finished task for rework. Returns the volume added.
pub fn reopen_for_rework(task: &mut Task, rework_fraction: f64) -> f64 {
    let added = rework_fraction * task.volume;
    task.remaining = added;
    task.state = TaskState::Rework;
    task.latent_error = false;
    added
}

/// Which of the erroneous predecessors a starting successor notices. One
/// draw per candidate, in the given order.
pub fn downstream_detect(
    erroneous_preds: &[TaskIdx],
    detect_prob: f64,
    rng: &mut SimRng,
) -> Vec<TaskIdx> {
    erroneous_preds
        .iter()
        .copied()
        .filter(|_| rng.bernoulli(detect_prob))
        .collect()
}

/// Whether a just-completed task goes to the President's review queue. One draw.
pub fn enqueue_for_review(micro_management: f64, rng: &mut SimRng) -> bool {
    rng.bernoulli(micro_management)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReviewOutcome {
    pub caught: bool,
    pub rework_volume: f64,
}

/// Finish reviewing `task`. Draws once only if the task is still Done and
/// carries a latent error; a catch re-opens it for rework.
pub fn review_task(
    task: &mut Task,
    review_detect_prob: f64,
    rework_fraction: f64,
    rng: &mut SimRng,
) -> ReviewOutcome {
    if task.state == TaskState::Done && task.latent_error && rng.bernoulli(review_detect_prob) {
        let rework_volume = reopen_for_rework(task, rework_fraction);
        ReviewOutcome {
            caught: true,
            rework_volume,
        }
    } else {
        ReviewOutcome {
            caught: false,
            rework_volume: 0.0,
        }
    }
}

/// What the assigner knows about one potential assignee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub id: AgentId,
    pub role: Role,
    pub covers_craft: bool,
    /// Remaining volume already queued.
    pub load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub agent: usize,
    /// Multiplier on the assignee's skill while working this task.
    pub skill_factor: f64,
}

/// Least-loaded eligible agent, ties to the lowest id.
///
/// ByCraft considers agents covering the task's craft; LoadBalance considers
/// everyone and applies the craft-mismatch penalty. The President is only a
/// fallback assignee when no other agent is eligible.
pub fn assign_task(candidates: &[Candidate], policy: AssignmentPolicy) -> Option<Assignment> {
    let eligible = |c: &&Candidate| match policy {
        AssignmentPolicy::ByCraft => c.covers_craft,
        AssignmentPolicy::LoadBalance => true,
    };
    let best = |pool: &mut dyn Iterator<Item = &Candidate>| {
        pool.min_by(|a, b| a.load.total_cmp(&b.load).then(a.id.cmp(&b.id)))
            .copied()
    };
    let staff = best(
        &mut candidates
            .iter()
            .filter(|c| c.role != Role::President)
            .filter(eligible),
    );
    let chosen = staff.or_else(|| best(&mut candidates.iter().filter(eligible)))?;
    Some(Assignment {
        agent: chosen.index,
        skill_factor: if chosen.covers_craft {
            1.0
        } else {
            defaults::CRAFT_PENALTY
        },
    })
}
