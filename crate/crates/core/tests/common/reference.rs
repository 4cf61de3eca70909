//! Straight-line second implementation of the simulation rules, written
//! against the rule list rather than the engine's code. It shares only the
//! random stream (`SimRng`) and the input types with the library.

use std::collections::HashMap;

use bidsim::domain::AssignmentPolicy;
use bidsim::{Role, Scenario, SimRng, TaskState};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum St {
    Pending,
    Ready,
    Awaiting,
    Working,
    Done,
    Rework,
}

struct T {
    craft: String,
    volume: f64,
    remaining: f64,
    st: St,
    err: bool,
    preds: Vec<usize>,
    /// (source, exchanges left, request in flight)
    info: Vec<(usize, u32, bool)>,
    version: u32,
    seen: HashMap<usize, u32>,
    owner: Option<usize>,
    starved: bool,
}

struct A {
    id: u32,
    role: Role,
    skill: f64,
    crafts: Vec<String>,
    queue: Vec<usize>,
    busy: Option<(usize, u64)>,
    // productive, coordination, nonproductive, meeting, review, idle
    ledger: [u64; 6],
}

struct Req {
    id: u64,
    source: usize,
    target: usize,
    responder: usize,
    made_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefOutcome {
    pub completed: bool,
    pub duration: u64,
    pub undetected_errors: u64,
    pub ledgers: Vec<(u32, [u64; 6])>,
    pub overloaded_agent_ticks: u64,
}

enum Do {
    Meet,
    Complain,
    Review(usize),
    Serve(usize),
    Request(usize, usize),
    Work(usize),
    Assign(usize),
    Idle,
}

struct Sim<'s> {
    s: &'s Scenario,
    tasks: Vec<T>,
    agents: Vec<A>,
    reqs: Vec<Req>,
    next_req: u64,
    reviews: Vec<usize>,
    rng: SimRng,
    overloaded: u64,
}

impl Sim<'_> {
    fn covers(&self, a: usize, craft: &str) -> bool {
        let ag = &self.agents[a];
        (ag.role == Role::President && ag.crafts.is_empty()) || ag.crafts.iter().any(|c| c == craft)
    }

    fn load(&self, a: usize) -> f64 {
        let mut sum = 0.0;
        for &t in &self.agents[a].queue {
            sum += self.tasks[t].remaining;
        }
        sum
    }

    fn all_preds_done(&self, t: usize) -> bool {
        self.tasks[t]
            .preds
            .iter()
            .all(|&p| self.tasks[p].st == St::Done)
    }

    fn assign(&mut self, t: usize) {
        let craft = self.tasks[t].craft.clone();
        let mut pick: Option<usize> = None;
        for pass in 0..2 {
            for a in 0..self.agents.len() {
                if pass == 0 && self.agents[a].role == Role::President {
                    continue;
                }
                if self.s.assignment_policy == AssignmentPolicy::ByCraft && !self.covers(a, &craft)
                {
                    continue;
                }
                pick = match pick {
                    None => Some(a),
                    Some(b) => {
                        let (la, lb) = (self.load(a), self.load(b));
                        if la < lb || (la == lb && self.agents[a].id < self.agents[b].id) {
                            Some(a)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            if pick.is_some() {
                break;
            }
        }
        match pick {
            Some(a) => {
                self.tasks[t].owner = Some(a);
                self.agents[a].queue.push(t);
            }
            None => self.tasks[t].starved = true,
        }
    }

    fn refresh(&mut self) {
        for t in 0..self.tasks.len() {
            let st = self.tasks[t].st;
            if st != St::Pending && st != St::Ready && st != St::Awaiting {
                continue;
            }
            let new = if !self.all_preds_done(t) {
                St::Pending
            } else if self.tasks[t].info.iter().any(|e| e.1 > 0) {
                St::Awaiting
            } else {
                St::Ready
            };
            self.tasks[t].st = new;
        }
    }

    fn reopen(&mut self, t: usize) {
        let task = &mut self.tasks[t];
        task.remaining = self.s.rework_fraction * task.volume;
        task.st = St::Rework;
        task.err = false;
        match task.owner {
            Some(o) => self.agents[o].queue.insert(0, t),
            None => self.assign(t),
        }
    }

    fn consume(&mut self, target: usize, source: usize) {
        for e in self.tasks[target].info.iter_mut() {
            if e.0 == source {
                e.2 = false;
                if e.1 > 0 {
                    e.1 -= 1;
                }
            }
        }
    }

    fn choose(&mut self, a: usize, tick: u64, meeting: bool, overloaded: bool) -> Do {
        if meeting {
            return Do::Meet;
        }
        if overloaded && self.rng.bernoulli(self.s.complain_prob) {
            return Do::Complain;
        }
        if self.agents[a].role == Role::President && !self.reviews.is_empty() {
            return Do::Review(self.reviews[0]);
        }
        for (i, r) in self.reqs.iter().enumerate() {
            if r.responder == a && r.made_at < tick {
                return Do::Serve(i);
            }
        }
        let queue = self.agents[a].queue.clone();
        if let Some(&cur) = queue.iter().find(|&&t| self.tasks[t].st != St::Pending) {
            if matches!(self.tasks[cur].st, St::Ready | St::Awaiting) {
                let mut info = self.tasks[cur].info.clone();
                info.sort_by_key(|e| e.0);
                if let Some(e) = info.iter().find(|e| e.1 > 0 && !e.2) {
                    return Do::Request(cur, e.0);
                }
            }
        }
        for &t in &queue {
            let ok = match self.tasks[t].st {
                St::Working | St::Rework => true,
                St::Ready => self.all_preds_done(t),
                _ => false,
            };
            if ok {
                return Do::Work(t);
            }
        }
        if self.agents[a].role != Role::Helper {
            for t in 0..self.tasks.len() {
                let task = &self.tasks[t];
                if task.owner.is_none()
                    && !task.starved
                    && matches!(task.st, St::Ready | St::Awaiting)
                {
                    return Do::Assign(t);
                }
            }
        }
        Do::Idle
    }

    fn finish_review(&mut self, t: usize) {
        if self.tasks[t].st == St::Done
            && self.tasks[t].err
            && self.rng.bernoulli(self.s.review_detect_prob)
        {
            self.reopen(t);
        }
    }

    fn tick(&mut self, tick: u64) {
        let s = self.s;
        let meeting = s.meeting_interval > 0
            && tick >= s.meeting_interval
            && tick % s.meeting_interval < s.meeting_duration;
        for a in 0..self.agents.len() {
            let over = self.load(a) / (self.agents[a].skill * s.overload_window as f64)
                > s.overload_threshold;
            if over {
                self.overloaded += 1;
            }
            if let Some((t, left)) = self.agents[a].busy {
                self.agents[a].ledger[4] += 1;
                if left == 1 {
                    self.agents[a].busy = None;
                    self.finish_review(t);
                } else {
                    self.agents[a].busy = Some((t, left - 1));
                }
                continue;
            }
            let slot = match self.choose(a, tick, meeting, over) {
                Do::Meet => 3,
                Do::Complain => 2,
                Do::Idle => 5,
                Do::Review(t) => {
                    self.reviews.remove(0);
                    if s.review_cost == 1 {
                        self.finish_review(t);
                    } else {
                        self.agents[a].busy = Some((t, s.review_cost - 1));
                    }
                    4
                }
                Do::Serve(i) => {
                    let r = self.reqs.remove(i);
                    if self.rng.bernoulli(s.goal_congruence) {
                        self.consume(r.target, r.source);
                    } else {
                        for e in self.tasks[r.target].info.iter_mut() {
                            if e.0 == r.source {
                                e.2 = false;
                            }
                        }
                    }
                    1
                }
                Do::Request(t, src) => {
                    let responder = match self.tasks[src].owner {
                        Some(o) => o,
                        None => {
                            let craft = self.tasks[src].craft.clone();
                            let manager = (0..self.agents.len()).find(|&b| {
                                self.agents[b].role == Role::Manager
                                    && self.agents[b].crafts.contains(&craft)
                            });
                            manager.unwrap_or_else(|| {
                                (0..self.agents.len())
                                    .find(|&b| self.agents[b].role == Role::President)
                                    .unwrap()
                            })
                        }
                    };
                    if responder == a {
                        self.consume(t, src);
                    } else {
                        for e in self.tasks[t].info.iter_mut() {
                            if e.0 == src {
                                e.2 = true;
                            }
                        }
                        self.reqs.push(Req {
                            id: self.next_req,
                            source: src,
                            target: t,
                            responder,
                            made_at: tick,
                        });
                        self.next_req += 1;
                    }
                    1
                }
                Do::Assign(t) => {
                    self.assign(t);
                    1
                }
                Do::Work(t) => self.work(a, t),
            };
            self.agents[a].ledger[slot] += 1;
        }
        if meeting && tick % s.meeting_interval == s.meeting_duration - 1 {
            let reqs: Vec<Req> = self.reqs.drain(..).collect();
            for r in reqs {
                self.consume(r.target, r.source);
            }
        }
        self.refresh();
    }

    fn work(&mut self, a: usize, t: usize) -> usize {
        let s = self.s;
        if self.tasks[t].st == St::Ready {
            let mut preds = self.tasks[t].preds.clone();
            preds.sort();
            let mut suspects = Vec::new();
            for p in preds {
                let v = self.tasks[p].version;
                let seen = self.tasks[t].seen.get(&p).copied().unwrap_or(0);
                if self.tasks[p].st == St::Done && self.tasks[p].err && seen != v {
                    self.tasks[t].seen.insert(p, v);
                    suspects.push(p);
                }
            }
            let mut caught = Vec::new();
            for p in suspects {
                if self.rng.bernoulli(s.detect_prob) {
                    caught.push(p);
                }
            }
            if !caught.is_empty() {
                for p in caught {
                    self.reopen(p);
                }
                self.tasks[t].st = St::Pending;
                return 2;
            }
            self.tasks[t].st = St::Working;
        }
        let craft = self.tasks[t].craft.clone();
        let rate = self.agents[a].skill * if self.covers(a, &craft) { 1.0 } else { 0.5 };
        let task = &mut self.tasks[t];
        task.remaining -= rate.min(task.remaining);
        if task.remaining < 1e-9 {
            task.remaining = 0.0;
            let p = (s.base_error_prob + s.dep_error_prob * task.info.len() as f64).min(1.0);
            task.err = self.rng.bernoulli(p);
            task.st = St::Done;
            task.version += 1;
            self.agents[a].queue.retain(|&q| q != t);
            if self.rng.bernoulli(s.micro_management) {
                self.reviews.push(t);
            }
        }
        0
    }

    fn finished(&self) -> bool {
        self.tasks.iter().all(|t| t.st == St::Done)
            && self.reviews.is_empty()
            && self.agents.iter().all(|a| a.busy.is_none())
    }
}

pub fn reference_run(s: &Scenario) -> RefOutcome {
    let mut tasks = Vec::new();
    for net in &s.networks {
        let base = tasks.len();
        let index_of = |id: u32| base + net.tasks.iter().position(|t| t.id == id).unwrap();
        for t in &net.tasks {
            let done = t.state == TaskState::Done;
            tasks.push(T {
                craft: t.craft.clone(),
                volume: t.volume,
                remaining: t.remaining,
                st: if done { St::Done } else { St::Pending },
                err: t.latent_error,
                preds: net
                    .precedence
                    .iter()
                    .filter(|e| e.1 == t.id)
                    .map(|e| index_of(e.0))
                    .collect(),
                info: net
                    .info_edges
                    .iter()
                    .filter(|e| e.to == t.id)
                    .map(|e| {
                        let left = if done {
                            0
                        } else {
                            t.exchanges_outstanding
                                .get(&e.from)
                                .copied()
                                .unwrap_or(net.exchanges_per_edge)
                        };
                        (index_of(e.from), left, false)
                    })
                    .collect(),
                version: u32::from(done),
                seen: HashMap::new(),
                owner: None,
                starved: false,
            });
        }
    }
    let mut specs = s.agents.clone();
    specs.sort_by_key(|a| a.id);
    let agents = specs
        .into_iter()
        .map(|a| A {
            id: a.id,
            role: a.role,
            skill: a.skill,
            crafts: a.crafts.into_iter().collect(),
            queue: Vec::new(),
            busy: None,
            ledger: [0; 6],
        })
        .collect();
    let mut sim = Sim {
        s,
        tasks,
        agents,
        reqs: Vec::new(),
        next_req: 0,
        reviews: Vec::new(),
        rng: SimRng::new(s.seed),
        overloaded: 0,
    };
    sim.refresh();
    for t in 0..sim.tasks.len() {
        if matches!(sim.tasks[t].st, St::Ready | St::Awaiting) {
            sim.assign(t);
        }
    }
    let mut tick = 0;
    while !sim.finished() && tick < s.horizon {
        sim.tick(tick);
        tick += 1;
    }
    RefOutcome {
        completed: sim.finished(),
        duration: tick,
        undetected_errors: sim.tasks.iter().filter(|t| t.err).count() as u64,
        ledgers: sim.agents.iter().map(|a| (a.id, a.ledger)).collect(),
        overloaded_agent_ticks: sim.overloaded,
    }
}

/// The engine's result in the reference's shape.
pub fn engine_outcome(r: &bidsim::SimulationResult) -> RefOutcome {
    RefOutcome {
        completed: r.completed,
        duration: r.duration,
        undetected_errors: r.undetected_errors,
        ledgers: r
            .ledgers
            .iter()
            .map(|l| {
                let g = &l.ledger;
                (
                    l.agent_id,
                    [
                        g.productive,
                        g.coordination,
                        g.nonproductive,
                        g.meeting,
                        g.review,
                        g.idle,
                    ],
                )
            })
            .collect(),
        overloaded_agent_ticks: r.overloaded_agent_ticks,
    }
}
