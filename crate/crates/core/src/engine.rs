//! Deterministic tick loop.
//!
//! # Execution rules
//!
//! Setup: tasks from all networks are flattened (network order, then task
//! order) and agents are sorted by id. Every task whose precedence
//! predecessors are all Done is *released* (Ready, or AwaitingInfo while it
//! still owes exchanges). All tasks released at setup are assigned per the
//! policy before the clock starts, in task order; this kickoff allocation
//! costs no agent time. Later releases wait for an AssignTask action.
//!
//! Each tick, agents act in ascending id order against the live state:
//!
//! - the overload test runs first and is counted for pressure;
//! - an agent mid-review spends the tick in `review` and does not decide;
//! - otherwise [`decide_action`] picks one action, which is applied at once.
//!
//! Action effects:
//!
//! - `Work`: a Ready task being started first checks every Done precedence
//!   predecessor carrying a latent error whose current completion it has not
//!   checked yet (one draw each against `detect_prob`). Any detection
//!   re-opens those predecessors (pushed to the front of their owners'
//!   queues), sends the task back to Pending, and costs a `nonproductive`
//!   tick. Otherwise the task is InProgress and loses `skill` (times the
//!   craft penalty when the worker lacks the craft), floored at 0. Reaching
//!   0 completes it: one error draw, then one review-enqueue draw.
//! - `RequestExchange`: the responder is the source task's owner, or the
//!   lowest-id Manager covering its craft when it has none (President as a
//!   last resort). Asking oneself resolves immediately; otherwise a request
//!   servable from the next tick is queued.
//! - `ServeExchange`: one draw against `g`; success consumes one exchange on
//!   the edge, failure drops the request so the requester must ask again.
//! - `Review`: takes the head of the review queue for `review_cost` ticks;
//!   on the last one a still-Done erroneous task is caught with
//!   `review_detect_prob` (one draw) and re-opened.
//! - `AssignTask`: gives one released unowned task to an assignee per
//!   [`assign_task`]; with no eligible agent the task is marked starved.
//!
//! End of tick: on the last tick of a meeting window all queued requests
//! succeed; then every not-yet-started task is re-derived as Pending,
//! AwaitingInfo or Ready. The run ends when all tasks are Done, the review
//! queue is empty and nobody is mid-review, or at the horizon.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::behavior::{
    assign_task, attempt_exchange, complete_task, decide_action, downstream_detect,
    enqueue_for_review, is_overloaded, reopen_for_rework, review_task, Action, ActionKind,
    Candidate, DecisionParams, ExchangeRequest, RequestId, TaskIdx, WorldView,
};
use crate::domain::{
    defaults, validate_scenario, AgentId, AgentSpec, Role, Scenario, Task, TaskId, TaskState,
};
use crate::error::{Error, Result};
use crate::rng::SimRng;

const DONE_EPSILON: f64 = 1e-9;
/// Upper bound on recorded per-tick summaries.
pub const TRACE_SUMMARY_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub productive: u64,
    pub coordination: u64,
    pub nonproductive: u64,
    pub meeting: u64,
    pub review: u64,
    pub idle: u64,
}

impl Ledger {
    pub fn total(&self) -> u64 {
        self.productive
            + self.coordination
            + self.nonproductive
            + self.meeting
            + self.review
            + self.idle
    }

    fn charge(&mut self, kind: ActionKind, progressed: bool) {
        match kind {
            ActionKind::Work if progressed => self.productive += 1,
            ActionKind::Work | ActionKind::Complain => self.nonproductive += 1,
            ActionKind::ServeExchange | ActionKind::RequestExchange | ActionKind::AssignTask => {
                self.coordination += 1
            }
            ActionKind::Meet => self.meeting += 1,
            ActionKind::Review => self.review += 1,
            ActionKind::Idle => self.idle += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Busy {
    pub task: TaskIdx,
    pub ticks_left: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Position in ascending-id order.
    pub index: usize,
    pub spec: AgentSpec,
    pub queue: VecDeque<TaskIdx>,
    pub ledger: Ledger,
    pub busy: Option<Busy>,
}

#[derive(Debug, Clone, PartialEq)]
struct InfoIn {
    source: TaskIdx,
    remaining: u32,
    attempts: u32,
    pending: Option<RequestId>,
}

#[derive(Debug, Clone, PartialEq)]
struct TaskLinks {
    preds: Vec<TaskIdx>,
    /// Completion count of each predecessor when last checked for errors.
    checked: Vec<u32>,
    info_in: Vec<InfoIn>,
    completions: u32,
    owner: Option<usize>,
    starved: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub overloaded_agent_ticks: u64,
    pub rework_volume: f64,
    pub completed_volume: f64,
    pub exchanges_required: u64,
    pub exchange_attempts: u64,
    pub exchange_failures: u64,
    pub reviews: u64,
    pub detections: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRef {
    pub project: u32,
    pub task: TaskId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub action: ActionKind,
    pub project: Option<u32>,
    pub task: Option<TaskId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSummary {
    pub tick: u64,
    pub working: u32,
    pub coordinating: u32,
    pub nonproductive: u32,
    pub meeting: u32,
    pub reviewing: u32,
    pub idle: u32,
    pub tasks_done: u32,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub tick: u64,
    pub agents: Vec<AgentState>,
    pub tasks: Vec<Task>,
    pub pending_exchanges: Vec<ExchangeRequest>,
    pub review_queue: VecDeque<TaskIdx>,
    pub rng: SimRng,
    pub counters: Counters,
    links: Vec<TaskLinks>,
    next_request_id: RequestId,
}

struct View<'a> {
    tick: u64,
    meeting: bool,
    agents: &'a [AgentState],
    tasks: &'a [Task],
    links: &'a [TaskLinks],
    pending: &'a [ExchangeRequest],
    review_queue: &'a VecDeque<TaskIdx>,
}

impl View<'_> {
    fn preds_done(&self, t: TaskIdx) -> bool {
        self.links[t]
            .preds
            .iter()
            .all(|&p| self.tasks[p].state == TaskState::Done)
    }
}

impl WorldView for View<'_> {
    fn in_meeting(&self) -> bool {
        self.meeting
    }

    fn queued_volume(&self, agent: usize) -> f64 {
        self.agents[agent]
            .queue
            .iter()
            .map(|&t| self.tasks[t].remaining)
            .sum()
    }

    fn pending_review(&self) -> Option<TaskIdx> {
        self.review_queue.front().copied()
    }

    fn oldest_inbound_request(&self, agent: usize) -> Option<RequestId> {
        self.pending
            .iter()
            .find(|r| r.responder == agent && r.created_tick < self.tick)
            .map(|r| r.id)
    }

    fn exchange_needed(&self, agent: usize) -> Option<(TaskIdx, TaskIdx)> {
        let current = *self.agents[agent]
            .queue
            .iter()
            .find(|&&t| self.tasks[t].state != TaskState::Pending)?;
        if !matches!(
            self.tasks[current].state,
            TaskState::Ready | TaskState::AwaitingInfo
        ) {
            return None;
        }
        self.links[current]
            .info_in
            .iter()
            .find(|e| e.remaining > 0 && e.pending.is_none())
            .map(|e| (current, e.source))
    }

    fn runnable_task(&self, agent: usize) -> Option<TaskIdx> {
        self.agents[agent]
            .queue
            .iter()
            .copied()
            .find(|&t| match self.tasks[t].state {
                TaskState::InProgress | TaskState::Rework => true,
                TaskState::Ready => self.preds_done(t),
                _ => false,
            })
    }

    fn unassigned_released_task(&self) -> Option<TaskIdx> {
        (0..self.tasks.len()).find(|&t| {
            let l = &self.links[t];
            l.owner.is_none()
                && !l.starved
                && matches!(
                    self.tasks[t].state,
                    TaskState::Ready | TaskState::AwaitingInfo
                )
        })
    }
}

fn in_meeting_window(s: &Scenario, tick: u64) -> bool {
    s.meeting_interval > 0
        && tick >= s.meeting_interval
        && tick % s.meeting_interval < s.meeting_duration
}

fn meeting_ends(s: &Scenario, tick: u64) -> bool {
    in_meeting_window(s, tick) && tick % s.meeting_interval == s.meeting_duration - 1
}

impl WorldState {
    /// Build the initial world, including the kickoff allocation. The
    /// scenario must already be valid.
    pub fn new(s: &Scenario) -> Self {
        let mut specs = s.agents.clone();
        specs.sort_by_key(|a| a.id);
        let agents = specs
            .into_iter()
            .enumerate()
            .map(|(index, spec)| AgentState {
                index,
                spec,
                queue: VecDeque::new(),
                ledger: Ledger::default(),
                busy: None,
            })
            .collect();

        let mut tasks = Vec::new();
        let mut links = Vec::new();
        let mut exchanges_required = 0u64;
        for net in &s.networks {
            let base = tasks.len();
            let pos: HashMap<TaskId, TaskIdx> = net
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| (t.id, base + i))
                .collect();
            let mut preds = vec![Vec::new(); net.tasks.len()];
            for &(a, b) in &net.precedence {
                preds[pos[&b] - base].push(pos[&a]);
            }
            let mut info = vec![Vec::new(); net.tasks.len()];
            for e in &net.info_edges {
                info[pos[&e.to] - base].push((pos[&e.from], e.from));
            }
            for (i, t) in net.tasks.iter().enumerate() {
                let mut task = t.clone();
                let mut p = std::mem::take(&mut preds[i]);
                p.sort_unstable();
                let mut inbound = std::mem::take(&mut info[i]);
                inbound.sort_unstable();
                let mut outstanding = BTreeMap::new();
                let info_in = inbound
                    .into_iter()
                    .map(|(source, source_id)| {
                        let remaining = if task.state == TaskState::Done {
                            0
                        } else {
                            *t.exchanges_outstanding
                                .get(&source_id)
                                .unwrap_or(&net.exchanges_per_edge)
                        };
                        exchanges_required += remaining as u64;
                        outstanding.insert(source_id, remaining);
                        InfoIn {
                            source,
                            remaining,
                            attempts: 0,
                            pending: None,
                        }
                    })
                    .collect();
                task.exchanges_outstanding = outstanding;
                let completions = u32::from(task.state == TaskState::Done);
                links.push(TaskLinks {
                    checked: vec![0; p.len()],
                    preds: p,
                    info_in,
                    completions,
                    owner: None,
                    starved: false,
                });
                tasks.push(task);
            }
        }

        let mut world = WorldState {
            tick: 0,
            agents,
            tasks,
            pending_exchanges: Vec::new(),
            review_queue: VecDeque::new(),
            rng: SimRng::new(s.seed),
            counters: Counters {
                exchanges_required,
                ..Counters::default()
            },
            links,
            next_request_id: 0,
        };
        world.refresh_readiness();
        for t in 0..world.tasks.len() {
            if matches!(
                world.tasks[t].state,
                TaskState::Ready | TaskState::AwaitingInfo
            ) {
                world.assign(t, s);
            }
        }
        world
    }

    pub fn is_terminated(&self) -> bool {
        self.tasks.iter().all(|t| t.state == TaskState::Done)
            && self.review_queue.is_empty()
            && self.agents.iter().all(|a| a.busy.is_none())
    }

    pub fn undetected_errors(&self) -> usize {
        self.tasks.iter().filter(|t| t.latent_error).count()
    }

    pub fn owner_of(&self, task: TaskIdx) -> Option<usize> {
        self.links[task].owner
    }

    pub fn starved_tasks(&self) -> Vec<TaskRef> {
        self.links
            .iter()
            .zip(&self.tasks)
            .filter(|(l, _)| l.starved)
            .map(|(_, t)| TaskRef {
                project: t.project_id,
                task: t.id,
            })
            .collect()
    }

    /// Advance one tick.
    pub fn step(&mut self, s: &Scenario) {
        self.step_with(s, &mut |_| {});
    }

    /// Advance one tick, reporting one trace record per agent.
    pub fn step_with(&mut self, s: &Scenario, sink: &mut dyn FnMut(TraceRecord)) {
        let tick = self.tick;
        let meeting = in_meeting_window(s, tick);
        let params = DecisionParams {
            complain_prob: s.complain_prob,
            overload_threshold: s.overload_threshold,
            overload_window: s.overload_window,
        };

        for a in 0..self.agents.len() {
            let queued: f64 = self.agents[a]
                .queue
                .iter()
                .map(|&t| self.tasks[t].remaining)
                .sum();
            if is_overloaded(
                queued,
                self.agents[a].spec.skill,
                s.overload_threshold,
                s.overload_window,
            ) {
                self.counters.overloaded_agent_ticks += 1;
            }

            if let Some(mut busy) = self.agents[a].busy {
                self.agents[a].ledger.review += 1;
                busy.ticks_left -= 1;
                self.agents[a].busy = (busy.ticks_left > 0).then_some(busy);
                if busy.ticks_left == 0 {
                    self.finish_review(busy.task, s);
                }
                sink(self.record(a, ActionKind::Review, Some(busy.task)));
                continue;
            }

            let action = {
                let view = View {
                    tick,
                    meeting,
                    agents: &self.agents,
                    tasks: &self.tasks,
                    links: &self.links,
                    pending: &self.pending_exchanges,
                    review_queue: &self.review_queue,
                };
                decide_action(&self.agents[a], &view, &params, &mut self.rng)
            };
            let (progressed, subject) = self.apply(a, action, s);
            self.agents[a].ledger.charge(action.kind(), progressed);
            sink(self.record(a, action.kind(), subject));
        }

        if meeting_ends(s, tick) {
            for req in std::mem::take(&mut self.pending_exchanges) {
                self.counters.exchange_attempts += 1;
                self.consume_exchange(req.edge.1, req.edge.0);
            }
        }
        self.refresh_readiness();
        self.tick += 1;
    }

    fn record(&self, a: usize, action: ActionKind, task: Option<TaskIdx>) -> TraceRecord {
        TraceRecord {
            tick: self.tick,
            agent: self.agents[a].spec.id,
            action,
            project: task.map(|t| self.tasks[t].project_id),
            task: task.map(|t| self.tasks[t].id),
        }
    }

    /// Returns whether work progressed and the task the action concerned.
    fn apply(&mut self, a: usize, action: Action, s: &Scenario) -> (bool, Option<TaskIdx>) {
        match action {
            Action::Meet | Action::Complain | Action::Idle => (false, None),
            Action::Review(t) => {
                let head = self.review_queue.pop_front();
                debug_assert_eq!(head, Some(t));
                self.counters.reviews += 1;
                if s.review_cost <= 1 {
                    self.finish_review(t, s);
                } else {
                    self.agents[a].busy = Some(Busy {
                        task: t,
                        ticks_left: s.review_cost - 1,
                    });
                }
                (false, Some(t))
            }
            Action::ServeExchange(id) => {
                let at = self
                    .pending_exchanges
                    .iter()
                    .position(|r| r.id == id)
                    .expect("served request is pending");
                let req = self.pending_exchanges.remove(at);
                let (source, target) = req.edge;
                self.counters.exchange_attempts += 1;
                if attempt_exchange(s.goal_congruence, &mut self.rng) {
                    self.consume_exchange(target, source);
                } else {
                    self.counters.exchange_failures += 1;
                    let edge = self.edge_mut(target, source);
                    edge.pending = None;
                    edge.attempts += 1;
                }
                (false, Some(target))
            }
            Action::RequestExchange { task, source } => {
                let responder = self.responder_for(source);
                if responder == a {
                    self.counters.exchange_attempts += 1;
                    self.consume_exchange(task, source);
                } else {
                    let id = self.next_request_id;
                    self.next_request_id += 1;
                    let edge = self.edge_mut(task, source);
                    edge.pending = Some(id);
                    let attempts = edge.attempts;
                    self.pending_exchanges.push(ExchangeRequest {
                        id,
                        edge: (source, task),
                        requester: a,
                        responder,
                        attempts,
                        resolved: false,
                        created_tick: self.tick,
                    });
                }
                (false, Some(task))
            }
            Action::Work(t) => (self.work(a, t, s), Some(t)),
            Action::AssignTask(t) => {
                self.assign(t, s);
                (false, Some(t))
            }
        }
    }

    fn work(&mut self, a: usize, t: TaskIdx, s: &Scenario) -> bool {
        if self.tasks[t].state == TaskState::Ready {
            let mut candidates = Vec::new();
            let links = &mut self.links;
            for k in 0..links[t].preds.len() {
                let p = links[t].preds[k];
                let version = links[p].completions;
                if self.tasks[p].state == TaskState::Done
                    && self.tasks[p].latent_error
                    && links[t].checked[k] != version
                {
                    links[t].checked[k] = version;
                    candidates.push(p);
                }
            }
            let detected = downstream_detect(&candidates, s.detect_prob, &mut self.rng);
            if !detected.is_empty() {
                for p in detected {
                    self.counters.detections += 1;
                    self.reopen(p, s);
                }
                self.tasks[t].state = TaskState::Pending;
                return false;
            }
            self.tasks[t].state = TaskState::InProgress;
        }

        let agent = &self.agents[a];
        let factor = if agent.spec.covers(&self.tasks[t].craft) {
            1.0
        } else {
            defaults::CRAFT_PENALTY
        };
        let rate = agent.spec.skill * factor;
        let task = &mut self.tasks[t];
        let progress = rate.min(task.remaining);
        task.remaining -= progress;
        if task.remaining < DONE_EPSILON {
            task.remaining = 0.0;
        }
        self.counters.completed_volume += progress;

        if task.remaining == 0.0 {
            let in_edges = self.links[t].info_in.len();
            complete_task(
                task,
                in_edges,
                s.base_error_prob,
                s.dep_error_prob,
                &mut self.rng,
            );
            self.links[t].completions += 1;
            self.agents[a].queue.retain(|&q| q != t);
            if enqueue_for_review(s.micro_management, &mut self.rng) {
                self.review_queue.push_back(t);
            }
        }
        true
    }

    fn finish_review(&mut self, t: TaskIdx, s: &Scenario) {
        let out = review_task(
            &mut self.tasks[t],
            s.review_detect_prob,
            s.rework_fraction,
            &mut self.rng,
        );
        if out.caught {
            self.counters.detections += 1;
            self.counters.rework_volume += out.rework_volume;
            self.requeue_front(t, s);
        }
    }

    fn reopen(&mut self, t: TaskIdx, s: &Scenario) {
        self.counters.rework_volume += reopen_for_rework(&mut self.tasks[t], s.rework_fraction);
        self.requeue_front(t, s);
    }

    /// Tasks that were Done on input have no owner yet and are assigned now.
    fn requeue_front(&mut self, t: TaskIdx, s: &Scenario) {
        match self.links[t].owner {
            Some(owner) => self.agents[owner].queue.push_front(t),
            None => self.assign(t, s),
        }
    }

    fn edge_mut(&mut self, target: TaskIdx, source: TaskIdx) -> &mut InfoIn {
        self.links[target]
            .info_in
            .iter_mut()
            .find(|e| e.source == source)
            .expect("edge exists")
    }

    fn consume_exchange(&mut self, target: TaskIdx, source: TaskIdx) {
        let source_id = self.tasks[source].id;
        let edge = self.edge_mut(target, source);
        edge.pending = None;
        edge.attempts += 1;
        edge.remaining = edge.remaining.saturating_sub(1);
        let left = edge.remaining;
        self.tasks[target]
            .exchanges_outstanding
            .insert(source_id, left);
    }

    fn responder_for(&self, source: TaskIdx) -> usize {
        if let Some(owner) = self.links[source].owner {
            return owner;
        }
        let craft = &self.tasks[source].craft;
        self.agents
            .iter()
            .find(|a| a.spec.role == Role::Manager && a.spec.crafts.contains(craft))
            .or_else(|| self.agents.iter().find(|a| a.spec.role == Role::President))
            .map(|a| a.index)
            .expect("validated scenarios have a President")
    }

    fn assign(&mut self, t: TaskIdx, s: &Scenario) {
        let craft = &self.tasks[t].craft;
        let candidates: Vec<Candidate> = self
            .agents
            .iter()
            .map(|a| Candidate {
                index: a.index,
                id: a.spec.id,
                role: a.spec.role,
                covers_craft: a.spec.covers(craft),
                load: a.queue.iter().map(|&q| self.tasks[q].remaining).sum(),
            })
            .collect();
        match assign_task(&candidates, s.assignment_policy) {
            Some(chosen) => {
                self.links[t].owner = Some(chosen.agent);
                self.agents[chosen.agent].queue.push_back(t);
            }
            None => self.links[t].starved = true,
        }
    }

    fn refresh_readiness(&mut self) {
        for t in 0..self.tasks.len() {
            if !matches!(
                self.tasks[t].state,
                TaskState::Pending | TaskState::Ready | TaskState::AwaitingInfo
            ) {
                continue;
            }
            let released = self.links[t]
                .preds
                .iter()
                .all(|&p| self.tasks[p].state == TaskState::Done);
            self.tasks[t].state = if !released {
                TaskState::Pending
            } else if self.links[t].info_in.iter().any(|e| e.remaining > 0) {
                TaskState::AwaitingInfo
            } else {
                TaskState::Ready
            };
        }
    }
}

/// Pure functional form of [`WorldState::step`].
pub fn step(mut state: WorldState, scenario: &Scenario) -> WorldState {
    state.step(scenario);
    state
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLedger {
    pub agent_id: AgentId,
    #[serde(flatten)]
    pub ledger: Ledger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub completed: bool,
    pub duration: u64,
    pub ledgers: Vec<AgentLedger>,
    pub undetected_errors: u64,
    pub total_tasks: u64,
    pub total_rework_volume: f64,
    pub overloaded_agent_ticks: u64,
    pub exchanges_required: u64,
    pub exchange_attempts: u64,
    pub exchange_failures: u64,
    pub reviews: u64,
    pub detections: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starved_tasks: Vec<TaskRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_summary: Option<Vec<TickSummary>>,
}

impl SimulationResult {
    fn from_world(w: &WorldState, trace_summary: Option<Vec<TickSummary>>) -> Self {
        SimulationResult {
            completed: w.is_terminated(),
            duration: w.tick,
            ledgers: w
                .agents
                .iter()
                .map(|a| AgentLedger {
                    agent_id: a.spec.id,
                    ledger: a.ledger,
                })
                .collect(),
            undetected_errors: w.undetected_errors() as u64,
            total_tasks: w.tasks.len() as u64,
            total_rework_volume: w.counters.rework_volume,
            overloaded_agent_ticks: w.counters.overloaded_agent_ticks,
            exchanges_required: w.counters.exchanges_required,
            exchange_attempts: w.counters.exchange_attempts,
            exchange_failures: w.counters.exchange_failures,
            reviews: w.counters.reviews,
            detections: w.counters.detections,
            starved_tasks: w.starved_tasks(),
            trace_summary,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace_summary: bool,
}

pub fn run(scenario: &Scenario) -> Result<SimulationResult> {
    run_with(scenario, RunOptions::default(), &mut |_| {})
}

/// Run to completion or horizon, streaming per-agent trace records.
pub fn run_with(
    scenario: &Scenario,
    opts: RunOptions,
    sink: &mut dyn FnMut(TraceRecord),
) -> Result<SimulationResult> {
    let report = validate_scenario(scenario);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    let mut world = WorldState::new(scenario);
    let mut summaries = opts.trace_summary.then(Vec::new);
    while !world.is_terminated() && world.tick < scenario.horizon {
        match summaries.as_mut() {
            Some(list) if list.len() < TRACE_SUMMARY_CAP => {
                let mut sum = TickSummary {
                    tick: world.tick,
                    ..TickSummary::default()
                };
                world.step_with(scenario, &mut |rec| {
                    sink(rec);
                    match rec.action {
                        ActionKind::Work => sum.working += 1,
                        ActionKind::ServeExchange
                        | ActionKind::RequestExchange
                        | ActionKind::AssignTask => sum.coordinating += 1,
                        ActionKind::Complain => sum.nonproductive += 1,
                        ActionKind::Meet => sum.meeting += 1,
                        ActionKind::Review => sum.reviewing += 1,
                        ActionKind::Idle => sum.idle += 1,
                    }
                });
                sum.tasks_done = world
                    .tasks
                    .iter()
                    .filter(|t| t.state == TaskState::Done)
                    .count() as u32;
                list.push(sum);
            }
            _ => world.step_with(scenario, sink),
        }
    }
    Ok(SimulationResult::from_world(&world, summaries))
}

/// Run while writing one JSON line per agent per tick to `out`.
pub fn run_traced(scenario: &Scenario, out: &mut dyn Write) -> Result<SimulationResult> {
    let mut io_err = None;
    let result = run_with(scenario, RunOptions::default(), &mut |rec| {
        if io_err.is_none() {
            let line = serde_json::to_string(&rec).expect("trace records serialize");
            if let Err(e) = writeln!(out, "{line}") {
                io_err = Some(e);
            }
        }
    })?;
    match io_err {
        Some(e) => Err(Error::io("<trace>", e)),
        None => Ok(result),
    }
}
