//! Online monitoring: executes an internal-assumption EFSM over an event
//! stream and raises alarms where the trace leaves the machine's language.
//!
//! Guard violations force the transition anyway (updates applied with the
//! offending value), so a stream that keeps deviating keeps producing
//! alarms instead of wedging the monitor one step after the first fault.
//! Structural violations — events whose channel has no transition here —
//! cannot occur for monitors extracted from the monitored code; seeing one
//! means the build and the machine are out of sync.

use serde::Serialize;

use crate::efsm::{Efsm, Event, MachineState, StepOutcome, Trace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardViolationPolicy {
    /// Advance as if the guard held, applying updates with the offending
    /// value.
    #[default]
    ForceTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralViolationPolicy {
    /// End the session; further observation is an error.
    Halt,
    /// Skip the event and keep monitoring.
    #[default]
    DropEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AlarmPolicy {
    pub on_guard_violation: GuardViolationPolicy,
    pub on_structural_violation: StructuralViolationPolicy,
}

impl AlarmPolicy {
    pub fn halt_on_structural() -> AlarmPolicy {
        AlarmPolicy {
            on_guard_violation: GuardViolationPolicy::ForceTransition,
            on_structural_violation: StructuralViolationPolicy::Halt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlarmKind {
    GuardViolation { failed_atoms: Vec<String> },
    StructuralViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alarm {
    /// Index of the offending event in the observed stream.
    pub position: usize,
    pub event: Event,
    #[serde(flatten)]
    pub kind: AlarmKind,
    /// Locations the monitor was in when the event arrived.
    pub locations: Vec<String>,
}

/// One monitoring session over one event stream.
#[derive(Debug)]
pub struct MonitorSession<'m> {
    machine: &'m Efsm,
    state: MachineState,
    position: usize,
    policy: AlarmPolicy,
    alarms: Vec<Alarm>,
    halted: bool,
}

impl<'m> MonitorSession<'m> {
    pub fn new(machine: &'m Efsm, policy: AlarmPolicy) -> Result<MonitorSession<'m>> {
        machine.validate()?;
        Ok(MonitorSession {
            machine,
            state: machine.initial_state(),
            position: 0,
            policy,
            alarms: Vec::new(),
            halted: false,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Feeds one event; returns the alarm it raised, if any.
    pub fn observe(&mut self, e: &Event) -> Result<Option<Alarm>> {
        if self.halted {
            return Err(Error::Halted);
        }
        let locations = self.state.locations();
        let alarm = match self.machine.step(&self.state, e)? {
            StepOutcome::Advanced(next) => {
                self.state = next;
                None
            }
            StepOutcome::GuardRejected {
                failed_atoms,
                forced,
            } => {
                let alarm = Alarm {
                    position: self.position,
                    event: e.clone(),
                    kind: AlarmKind::GuardViolation { failed_atoms },
                    locations,
                };
                // ForceTransition is the only guard policy
                self.state = forced;
                Some(alarm)
            }
            StepOutcome::NoChannelMatch => {
                let alarm = Alarm {
                    position: self.position,
                    event: e.clone(),
                    kind: AlarmKind::StructuralViolation,
                    locations,
                };
                if self.policy.on_structural_violation == StructuralViolationPolicy::Halt {
                    self.halted = true;
                }
                Some(alarm)
            }
        };
        self.position += 1;
        if let Some(a) = &alarm {
            self.alarms.push(a.clone());
        }
        Ok(alarm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub alarms: Vec<Alarm>,
    pub events_observed: usize,
    pub final_locations: Vec<String>,
    pub halted: bool,
}

impl MonitorReport {
    /// One line per alarm: position, event, and what failed.
    pub fn human_log(&self) -> String {
        let mut lines = Vec::new();
        for a in &self.alarms {
            match &a.kind {
                AlarmKind::GuardViolation { failed_atoms } => lines.push(format!(
                    "alarm at event {}: {}: guard violation (failed: {}) in {{{}}}",
                    a.position,
                    a.event,
                    failed_atoms.join("; "),
                    a.locations.join(",")
                )),
                AlarmKind::StructuralViolation => lines.push(format!(
                    "alarm at event {}: {}: structural violation in {{{}}}",
                    a.position,
                    a.event,
                    a.locations.join(",")
                )),
            }
        }
        lines.join("\n")
    }
}

/// Folds `observe` over a whole trace. A halt ends observation early.
pub fn run_trace(machine: &Efsm, t: &Trace, policy: AlarmPolicy) -> Result<MonitorReport> {
    let mut session = MonitorSession::new(machine, policy)?;
    for e in t.iter() {
        if session.is_halted() {
            break;
        }
        session.observe(e)?;
    }
    Ok(MonitorReport {
        alarms: session.alarms.clone(),
        events_observed: session.position,
        final_locations: session.state.locations(),
        halted: session.halted,
    })
}
