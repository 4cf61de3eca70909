//! Outcome measures derived from a finished run.

use serde::{Deserialize, Serialize};

use crate::domain::Scenario;
use crate::engine::SimulationResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub duration: u64,
    /// Every agent is paid for the whole run, idle or not.
    pub cost: f64,
    /// Original volume over skill-weighted busy time, clamped to 1.
    pub productivity: f64,
    pub quality: f64,
    /// Share of agent-ticks spent overloaded.
    pub pressure: f64,
    /// quality times productivity for completed runs, 0 otherwise.
    pub effectiveness: f64,
}

impl Metrics {
    pub const CSV_HEADER: [&'static str; 6] = [
        "duration",
        "cost",
        "productivity",
        "quality",
        "pressure",
        "effectiveness",
    ];

    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.duration.to_string(),
            self.cost.to_string(),
            self.productivity.to_string(),
            self.quality.to_string(),
            self.pressure.to_string(),
            self.effectiveness.to_string(),
        ]
    }
}

pub fn compute_metrics(result: &SimulationResult, scenario: &Scenario) -> Result<Metrics> {
    if result.ledgers.len() != scenario.agents.len() {
        return Err(Error::Contract(format!(
            "result has {} agent ledgers, scenario has {} agents",
            result.ledgers.len(),
            scenario.agents.len()
        )));
    }
    if result.total_tasks as usize != scenario.total_tasks() {
        return Err(Error::Contract(format!(
            "result has {} tasks, scenario has {}",
            result.total_tasks,
            scenario.total_tasks()
        )));
    }
    if result.total_tasks == 0 {
        return Err(Error::Contract("scenario has no tasks".into()));
    }

    let duration = result.duration;
    let mut cost = 0.0;
    let mut busy_capacity = 0.0;
    for l in &result.ledgers {
        let spec = scenario
            .agents
            .iter()
            .find(|a| a.id == l.agent_id)
            .ok_or_else(|| Error::Contract(format!("agent {} not in scenario", l.agent_id)))?;
        cost += spec.cost_rate * duration as f64;
        busy_capacity += (duration - l.ledger.idle) as f64 * spec.skill;
    }

    let productivity = if busy_capacity > 0.0 {
        (scenario.total_volume() / busy_capacity).min(1.0)
    } else {
        0.0
    };
    let quality = 1.0 - result.undetected_errors as f64 / result.total_tasks as f64;
    let agent_ticks = scenario.agents.len() as f64 * duration as f64;
    let pressure = if agent_ticks > 0.0 {
        result.overloaded_agent_ticks as f64 / agent_ticks
    } else {
        0.0
    };
    let effectiveness = if result.completed {
        quality * productivity
    } else {
        0.0
    };

    Ok(Metrics {
        duration,
        cost,
        productivity,
        quality,
        pressure,
        effectiveness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentSpec, Role, Task, TaskNetwork};
    use crate::engine::{AgentLedger, Ledger};

    fn scenario(agents: u32, tasks: u32) -> Scenario {
        let specs = (0..agents)
            .map(|id| AgentSpec {
                id,
                role: if id == 0 {
                    Role::President
                } else {
                    Role::Helper
                },
                skill: 1.0,
                cost_rate: 2.0,
                crafts: ["A".to_string()].into(),
            })
            .collect();
        let net = TaskNetwork {
            tasks: (0..tasks).map(|i| Task::new(i, 0, "A", 1.0)).collect(),
            precedence: vec![],
            info_edges: vec![],
            exchanges_per_edge: 1,
        };
        Scenario::with_defaults(specs, vec![net], 1)
    }

    fn result(ledgers: Vec<Ledger>, duration: u64, tasks: u64) -> SimulationResult {
        SimulationResult {
            completed: true,
            duration,
            ledgers: ledgers
                .into_iter()
                .enumerate()
                .map(|(i, ledger)| AgentLedger {
                    agent_id: i as u32,
                    ledger,
                })
                .collect(),
            undetected_errors: 0,
            total_tasks: tasks,
            total_rework_volume: 0.0,
            overloaded_agent_ticks: 0,
            exchanges_required: 0,
            exchange_attempts: 0,
            exchange_failures: 0,
            reviews: 0,
            detections: 0,
            starved_tasks: vec![],
            trace_summary: None,
        }
    }

    #[test]
    fn perfect_run() {
        let s = scenario(1, 5);
        let r = result(
            vec![Ledger {
                productive: 5,
                ..Ledger::default()
            }],
            5,
            5,
        );
        let m = compute_metrics(&r, &s).unwrap();
        assert_eq!(m.productivity, 1.0);
        assert_eq!(m.quality, 1.0);
        assert_eq!(m.pressure, 0.0);
        assert_eq!(m.effectiveness, 1.0);
        assert_eq!(m.cost, 10.0);
    }

    #[test]
    fn quality_from_undetected_errors() {
        let s = scenario(1, 20);
        let mut r = result(
            vec![Ledger {
                productive: 20,
                ..Ledger::default()
            }],
            20,
            20,
        );
        r.undetected_errors = 2;
        assert!((compute_metrics(&r, &s).unwrap().quality - 0.9).abs() < 1e-12);
    }

    #[test]
    fn pressure_over_agent_ticks() {
        let s = scenario(4, 10);
        let l = Ledger {
            idle: 100,
            ..Ledger::default()
        };
        let mut r = result(vec![l; 4], 100, 10);
        r.overloaded_agent_ticks = 25;
        assert_eq!(compute_metrics(&r, &s).unwrap().pressure, 0.0625);
    }

    #[test]
    fn coordination_lowers_productivity() {
        let s = scenario(1, 4);
        let r = result(
            vec![Ledger {
                productive: 4,
                coordination: 1,
                idle: 3,
                ..Ledger::default()
            }],
            8,
            4,
        );
        let m = compute_metrics(&r, &s).unwrap();
        assert_eq!(m.productivity, 0.8);
        assert_eq!(m.cost, 16.0);
    }

    #[test]
    fn incomplete_run_has_no_effectiveness() {
        let s = scenario(1, 4);
        let mut r = result(
            vec![Ledger {
                productive: 3,
                ..Ledger::default()
            }],
            3,
            4,
        );
        r.completed = false;
        assert_eq!(compute_metrics(&r, &s).unwrap().effectiveness, 0.0);
    }

    #[test]
    fn mismatched_result_is_a_contract_error() {
        let s = scenario(2, 4);
        let r = result(vec![Ledger::default()], 0, 4);
        assert!(matches!(compute_metrics(&r, &s), Err(Error::Contract(_))));
        let r = result(vec![Ledger::default(); 2], 0, 3);
        assert!(matches!(compute_metrics(&r, &s), Err(Error::Contract(_))));
    }

    #[test]
    fn quality_strictly_decreases_with_errors() {
        let s = scenario(1, 10);
        let mut prev = f64::INFINITY;
        for e in 0..=10 {
            let mut r = result(
                vec![Ledger {
                    productive: 10,
                    ..Ledger::default()
                }],
                10,
                10,
            );
            r.undetected_errors = e;
            let q = compute_metrics(&r, &s).unwrap().quality;
            assert!(q < prev);
            prev = q;
        }
    }
}
