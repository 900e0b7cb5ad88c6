//! Append-only session transcripts and replay.
//!
//! One record per event, serialized as one JSON line. Replaying a
//! transcript against the same world config reconstructs the session
//! state and re-applies every successful skill to a fresh world, checking
//! that each outcome matches the recorded one.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidelines::TaskFamily;
use crate::planner::{Plan, PlanOrigin, PlanStep, Refusal};
use crate::skills::ToolInvocation;
use crate::world::{SkillOutcome, WorldConfig, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Planning,
    Executing,
    Completed,
    Failed,
    Refused,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Completed | SessionState::Failed | SessionState::Refused)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum SessionEvent {
    Request {
        text: String,
        domain: TaskFamily,
        seed: u64,
    },
    #[serde(rename = "plan")]
    Planned {
        steps: Vec<String>,
        restart_required: bool,
    },
    Refused {
        message: String,
        missing: Vec<String>,
    },
    Interrupt {
        text: String,
        /// A later interrupt arrived before this one was acted on.
        superseded: bool,
    },
    Replanned {
        text: String,
        /// Number of steps completed when the new plan took over.
        boundary: usize,
        steps: Vec<String>,
        restart_required: bool,
    },
    StepStarted {
        index: usize,
        text: String,
    },
    Invocation {
        step: usize,
        invocation: ToolInvocation,
    },
    /// Result of the invocation recorded just before, rejected ones included.
    Outcome {
        step: usize,
        call_id: String,
        outcome: SkillOutcome,
    },
    StepCompleted {
        index: usize,
        text: String,
    },
    Completed,
    Failed {
        reason: String,
        /// Index of the step that failed, if any.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<usize>,
    },
}

impl SessionEvent {
    pub fn event_type(&self) -> &'static str {
        match self {
            SessionEvent::Request { .. } => "request",
            SessionEvent::Planned { .. } => "plan",
            SessionEvent::Refused { .. } => "refused",
            SessionEvent::Interrupt { .. } => "interrupt",
            SessionEvent::Replanned { .. } => "replanned",
            SessionEvent::StepStarted { .. } => "step_started",
            SessionEvent::Invocation { .. } => "invocation",
            SessionEvent::Outcome { .. } => "outcome",
            SessionEvent::StepCompleted { .. } => "step_completed",
            SessionEvent::Completed => "completed",
            SessionEvent::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// Milliseconds since the Unix epoch, strictly increasing per session.
    pub timestamp: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("transcript does not start with a request")]
    NoRequest,
    #[error("record {index}: {reason}")]
    Diverged { index: usize, reason: String },
}

pub fn write_jsonl(records: &[TranscriptRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<TranscriptRecord>, TranscriptError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| TranscriptError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(records)
}

pub fn read_jsonl_file(path: &Path) -> Result<Vec<TranscriptRecord>, TranscriptError> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

/// Session as reconstructed from its transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayedSession {
    pub state: SessionState,
    pub plan: Option<Plan>,
    pub cursor: usize,
    pub completed: Vec<PlanStep>,
    pub refusal: Option<Refusal>,
    pub failure: Option<String>,
    pub world: WorldState,
}

fn plan_from(steps: &[String], origin: PlanOrigin, request: &str, restart_required: bool) -> Plan {
    Plan {
        steps: steps
            .iter()
            .enumerate()
            .map(|(i, s)| PlanStep::new(i + 1, s.clone()))
            .collect(),
        origin,
        source_request: request.to_string(),
        restart_required,
    }
}

pub fn replay(
    records: &[TranscriptRecord],
    world_config: Arc<WorldConfig>,
) -> Result<ReplayedSession, TranscriptError> {
    let (request, seed) = records
        .iter()
        .find_map(|r| match &r.event {
            SessionEvent::Request { text, seed, .. } => Some((text.clone(), *seed)),
            _ => None,
        })
        .ok_or(TranscriptError::NoRequest)?;
    let mut s = ReplayedSession {
        state: SessionState::Idle,
        plan: None,
        cursor: 0,
        completed: Vec::new(),
        refusal: None,
        failure: None,
        world: WorldState::from_config(world_config, seed),
    };
    let mut last_ts = 0;
    let mut pending: Option<&ToolInvocation> = None;
    for (index, record) in records.iter().enumerate() {
        let diverged = |reason: String| TranscriptError::Diverged { index, reason };
        if index > 0 && record.timestamp <= last_ts {
            return Err(diverged("timestamps are not increasing".into()));
        }
        last_ts = record.timestamp;
        match &record.event {
            SessionEvent::Request { .. } => s.state = SessionState::Planning,
            SessionEvent::Planned {
                steps,
                restart_required,
            } => {
                s.plan = Some(plan_from(steps, PlanOrigin::Initial, &request, *restart_required));
                s.cursor = 0;
                s.state = SessionState::Executing;
            }
            SessionEvent::Refused { message, missing } => {
                s.refusal = Some(Refusal {
                    message: message.clone(),
                    missing: missing.clone(),
                });
                s.state = SessionState::Refused;
            }
            SessionEvent::Interrupt { .. } | SessionEvent::StepStarted { .. } => {}
            SessionEvent::Replanned {
                text,
                boundary,
                steps,
                restart_required,
            } => {
                if *boundary != s.completed.len() {
                    return Err(diverged(format!(
                        "replan boundary {boundary} but {} steps completed",
                        s.completed.len()
                    )));
                }
                s.plan = Some(plan_from(steps, PlanOrigin::Replan, text, *restart_required));
                s.cursor = 0;
            }
            SessionEvent::Invocation { invocation, .. } => pending = Some(invocation),
            SessionEvent::Outcome {
                call_id, outcome, ..
            } => {
                let invocation = pending
                    .take()
                    .filter(|i| &i.id == call_id)
                    .ok_or_else(|| diverged(format!("outcome for unknown call {call_id}")))?;
                if outcome.ok {
                    let again = s
                        .world
                        .apply_skill(invocation)
                        .map_err(|e| diverged(format!("{} failed on replay: {e}", invocation.name)))?;
                    if &again != outcome {
                        return Err(diverged(format!(
                            "{} observed {:?}, recorded {:?}",
                            invocation.name, again.observation, outcome.observation
                        )));
                    }
                }
            }
            SessionEvent::StepCompleted { text, .. } => {
                s.completed.push(PlanStep::new(s.completed.len() + 1, text.clone()));
                s.cursor += 1;
            }
            SessionEvent::Completed => s.state = SessionState::Completed,
            SessionEvent::Failed { reason, .. } => {
                s.failure = Some(reason.clone());
                s.state = SessionState::Failed;
            }
        }
    }
    Ok(s)
}
