//! Session state machine: plan, execute step by step, replan on interrupts.
//!
//! Interrupts are only acted on between steps. A step that has started
//! always runs to completion or failure first, so the world never sees
//! half of a step.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{execute_step, ExecutorConfig, StepStatus};
use crate::guidelines::TaskFamily;
use crate::llm::Provider;
use crate::pack::TaskPack;
use crate::planner::{self, Plan, PlanContext, PlanOutcome, PlanStep, Refusal};
use crate::transcript::{SessionEvent, SessionState, TranscriptRecord};
use crate::vision::{refresh_scene, SceneDescription};
use crate::world::{WorldState, WORKING_AREA};

const DISCARD_STEP: &str = "discard the current cup";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session has already finished")]
    SessionTerminal,
    #[error("cannot {action} while {from:?}")]
    IllegalTransition { from: SessionState, action: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptRequest {
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub received_at: u64,
}

/// Cloneable handle for queueing interrupts from another thread.
#[derive(Debug, Clone, Default)]
pub struct InterruptQueue(Arc<Mutex<VecDeque<InterruptRequest>>>);

impl InterruptQueue {
    pub fn push(&self, text: impl Into<String>) {
        self.0.lock().expect("interrupt queue").push_back(InterruptRequest {
            text: text.into(),
            received_at: now_ms(),
        });
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("interrupt queue").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn drain(&self) -> Vec<InterruptRequest> {
        self.0.lock().expect("interrupt queue").drain(..).collect()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepState {
    Done,
    Next,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStepView {
    pub text: String,
    pub status: StepState,
}

/// Serializable snapshot for status endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub domain: TaskFamily,
    pub state: SessionState,
    /// Current plan; after a replan it only holds the remaining steps.
    pub plan: Vec<PlanStepView>,
    pub cursor: usize,
    pub completed: Vec<String>,
    pub refusal: Option<Refusal>,
    pub failure: Option<String>,
    pub pending_interrupts: usize,
}

type Sink = Box<dyn FnMut(&TranscriptRecord) + Send>;

pub struct Session {
    id: String,
    seed: u64,
    state: SessionState,
    pack: TaskPack,
    ctx: PlanContext,
    plan: Option<Plan>,
    cursor: usize,
    world: WorldState,
    interrupts: InterruptQueue,
    provider: Arc<dyn Provider>,
    executor: ExecutorConfig,
    transcript: Vec<TranscriptRecord>,
    sink: Option<Sink>,
    last_ts: u64,
    refusal: Option<Refusal>,
    failure: Option<String>,
}

impl Session {
    pub fn new(id: impl Into<String>, pack: TaskPack, provider: Arc<dyn Provider>, seed: u64) -> Self {
        let ctx = PlanContext::new(pack.guidelines.clone(), &pack.planner_prompt);
        let executor = ExecutorConfig::new(&pack.executor_prompt);
        let world = WorldState::from_config(pack.world.clone(), seed);
        Session {
            id: id.into(),
            seed,
            state: SessionState::Idle,
            pack,
            ctx,
            plan: None,
            cursor: 0,
            world,
            interrupts: InterruptQueue::default(),
            provider,
            executor,
            transcript: Vec::new(),
            sink: None,
            last_ts: 0,
            refusal: None,
            failure: None,
        }
    }

    /// Called with every record as it is appended.
    pub fn with_sink(mut self, sink: impl FnMut(&TranscriptRecord) + Send + 'static) -> Self {
        self.sink = Some(Box::new(sink));
        self
    }

    pub fn with_max_turns(mut self, max_turns: usize) -> Self {
        self.executor.max_turns = max_turns;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn completed(&self) -> &[PlanStep] {
        &self.ctx.completed
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn pack(&self) -> &TaskPack {
        &self.pack
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    pub fn refusal(&self) -> Option<&Refusal> {
        self.refusal.as_ref()
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn interrupt_queue(&self) -> InterruptQueue {
        self.interrupts.clone()
    }

    pub fn scene(&self) -> SceneDescription {
        refresh_scene(&self.world, &self.pack.calibration)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            domain: self.pack.domain,
            state: self.state,
            plan: self
                .plan
                .as_ref()
                .map(|p| {
                    p.steps
                        .iter()
                        .enumerate()
                        .map(|(i, s)| PlanStepView {
                            text: s.text.clone(),
                            status: match i.cmp(&self.cursor) {
                                std::cmp::Ordering::Less => StepState::Done,
                                std::cmp::Ordering::Equal if !self.state.is_terminal() => StepState::Next,
                                _ => StepState::Pending,
                            },
                        })
                        .collect()
                })
                .unwrap_or_default(),
            cursor: self.cursor,
            completed: self.ctx.completed.iter().map(|s| s.text.clone()).collect(),
            refusal: self.refusal.clone(),
            failure: self.failure.clone(),
            pending_interrupts: self.interrupts.len(),
        }
    }

    fn emit(&mut self, event: SessionEvent) {
        let timestamp = now_ms().max(self.last_ts + 1);
        self.last_ts = timestamp;
        let record = TranscriptRecord {
            timestamp,
            session_id: self.id.clone(),
            event,
        };
        if let Some(sink) = self.sink.as_mut() {
            sink(&record);
        }
        self.transcript.push(record);
    }

    fn fail(&mut self, reason: String, step: Option<usize>) {
        self.failure = Some(reason.clone());
        self.state = SessionState::Failed;
        self.emit(SessionEvent::Failed { reason, step });
    }

    fn refuse(&mut self, refusal: Refusal) {
        self.emit(SessionEvent::Refused {
            message: refusal.message.clone(),
            missing: refusal.missing.clone(),
        });
        self.refusal = Some(refusal);
        self.state = SessionState::Refused;
    }

    /// First request plans; later ones become interrupts.
    pub fn submit_request(&mut self, text: &str) -> Result<SessionState, SessionError> {
        match self.state {
            s if s.is_terminal() => Err(SessionError::SessionTerminal),
            SessionState::Idle => {
                self.state = SessionState::Planning;
                self.emit(SessionEvent::Request {
                    text: text.to_string(),
                    domain: self.pack.domain,
                    seed: self.seed,
                });
                match planner::plan(&mut self.ctx, text, self.provider.as_ref()) {
                    Ok(PlanOutcome::Plan(plan)) => {
                        self.emit(SessionEvent::Planned {
                            steps: plan.steps.iter().map(|s| s.text.clone()).collect(),
                            restart_required: plan.restart_required,
                        });
                        self.cursor = 0;
                        self.state = if plan.is_empty() {
                            SessionState::Completed
                        } else {
                            SessionState::Executing
                        };
                        self.plan = Some(plan);
                        if self.state == SessionState::Completed {
                            self.emit(SessionEvent::Completed);
                        }
                    }
                    Ok(PlanOutcome::Refusal(r)) => self.refuse(r),
                    Err(e) => self.fail(format!("planning failed: {e}"), None),
                }
                Ok(self.state)
            }
            _ => {
                self.interrupts.push(text);
                Ok(self.state)
            }
        }
    }

    pub fn interrupt(&self, text: &str) {
        self.interrupts.push(text);
    }

    fn take_interrupts(&mut self) -> Option<String> {
        let pending = self.interrupts.drain();
        let n = pending.len();
        for (i, req) in pending.iter().enumerate() {
            self.emit(SessionEvent::Interrupt {
                text: req.text.clone(),
                superseded: i + 1 < n,
            });
        }
        pending.into_iter().last().map(|r| r.text)
    }

    fn run_step(&mut self, step: PlanStep) -> bool {
        self.emit(SessionEvent::StepStarted {
            index: step.index,
            text: step.text.clone(),
        });
        let scene = self.scene();
        let exec = execute_step(
            &step,
            &mut self.world,
            &scene,
            &self.ctx.completed,
            self.provider.as_ref(),
            &self.pack.skills,
            &self.executor,
            &mut |_, _| {},
        );
        for record in &exec.invocations {
            self.emit(SessionEvent::Invocation {
                step: step.index,
                invocation: record.invocation.clone(),
            });
            self.emit(SessionEvent::Outcome {
                step: step.index,
                call_id: record.invocation.id.clone(),
                outcome: record.outcome.clone(),
            });
        }
        if exec.status == StepStatus::Completed {
            self.ctx.completed.push(step.clone());
            self.emit(SessionEvent::StepCompleted {
                index: step.index,
                text: step.text,
            });
            true
        } else {
            let reason = exec
                .error
                .map(|e| e.to_string())
                .unwrap_or_else(|| "step did not complete".into());
            self.fail(
                format!("step {} \"{}\" failed: {reason}", step.index, step.text),
                Some(step.index),
            );
            false
        }
    }

    fn cup_in_working_area(&self) -> bool {
        self.pack.domain == TaskFamily::Drink && self.world.items_at(WORKING_AREA).next().is_some()
    }

    fn apply_interrupt(&mut self, text: String) {
        let boundary = self.ctx.completed.len();
        match planner::replan(&mut self.ctx, &text, self.provider.as_ref()) {
            Ok(PlanOutcome::Plan(plan)) => {
                self.emit(SessionEvent::Replanned {
                    text,
                    boundary,
                    steps: plan.steps.iter().map(|s| s.text.clone()).collect(),
                    restart_required: plan.restart_required,
                });
                self.plan = Some(plan);
                self.cursor = 0;
            }
            Ok(PlanOutcome::Refusal(r)) => {
                // Nothing half-made is left behind on the counter.
                if self.cup_in_working_area() {
                    let step = PlanStep::new(self.ctx.completed.len() + 1, DISCARD_STEP);
                    if !self.run_step(step) {
                        return;
                    }
                }
                self.refuse(r);
            }
            Err(e) => self.fail(format!("replanning failed: {e}"), None),
        }
    }

    /// Handle pending interrupts, then run the next step.
    pub fn advance(&mut self) -> Result<SessionState, SessionError> {
        if self.state.is_terminal() {
            return Err(SessionError::SessionTerminal);
        }
        if self.state != SessionState::Executing {
            return Err(SessionError::IllegalTransition {
                from: self.state,
                action: "advance",
            });
        }
        if let Some(text) = self.take_interrupts() {
            self.apply_interrupt(text);
            if self.state != SessionState::Executing {
                return Ok(self.state);
            }
        }
        let next = self.plan.as_ref().and_then(|p| p.steps.get(self.cursor)).cloned();
        if let Some(step) = next {
            let step = PlanStep {
                index: self.ctx.completed.len() + 1,
                ..step
            };
            if !self.run_step(step) {
                return Ok(self.state);
            }
            self.cursor += 1;
        }
        let len = self.plan.as_ref().map_or(0, Plan::len);
        if self.cursor >= len && self.interrupts.is_empty() {
            self.state = SessionState::Completed;
            self.emit(SessionEvent::Completed);
        }
        Ok(self.state)
    }

    /// Advance until the session is terminal or `deadline` passes.
    pub fn run(&mut self) -> Result<SessionState, SessionError> {
        self.run_until(None)
    }

    pub fn run_until(&mut self, deadline: Option<Instant>) -> Result<SessionState, SessionError> {
        while !self.state.is_terminal() {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            self.advance()?;
        }
        Ok(self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::OracleProvider;
    use crate::transcript::replay;
    use crate::world::DrinkGoal;

    fn session(domain: TaskFamily) -> Session {
        let pack = TaskPack::builtin(domain);
        let oracle = Arc::new(OracleProvider::new(pack.lexicon.clone()));
        Session::new("test", pack, oracle, 11)
    }

    #[test]
    fn boba_milk_end_to_end() {
        let mut s = session(TaskFamily::Drink);
        assert_eq!(s.submit_request("I want to order a boba milk.").unwrap(), SessionState::Executing);
        assert_eq!(s.run().unwrap(), SessionState::Completed, "{:?}", s.failure());
        assert!(s.world().drink_completed(&DrinkGoal::new(["boba"])));
        assert_eq!(s.completed().len(), 4);
    }

    #[test]
    fn refusal_is_terminal() {
        let mut s = session(TaskFamily::Drink);
        assert_eq!(
            s.submit_request("I would like a cup of passion fruit milk.").unwrap(),
            SessionState::Refused
        );
        assert_eq!(s.refusal().unwrap().message, "Passion fruit jam is not available");
        assert_eq!(s.submit_request("milk"), Err(SessionError::SessionTerminal));
        assert_eq!(s.advance(), Err(SessionError::SessionTerminal));
    }

    #[test]
    fn advance_before_request_is_illegal() {
        let mut s = session(TaskFamily::Drink);
        assert!(matches!(s.advance(), Err(SessionError::IllegalTransition { .. })));
    }

    #[test]
    fn interrupt_after_two_steps() {
        let mut s = session(TaskFamily::Drink);
        s.submit_request("Can I have a cup of strawberry milk?").unwrap();
        s.advance().unwrap();
        s.advance().unwrap();
        s.interrupt("I want to add boba into the drink.");
        s.run().unwrap();
        assert_eq!(s.state(), SessionState::Completed, "{:?}", s.failure());
        assert!(s.world().drink_completed(&DrinkGoal::new(["boba", "strawberry jam"])));
        let replanned = s
            .transcript()
            .iter()
            .find_map(|r| match &r.event {
                SessionEvent::Replanned { boundary, .. } => Some(*boundary),
                _ => None,
            })
            .unwrap();
        assert_eq!(replanned, 2);
    }

    #[test]
    fn only_the_latest_interrupt_counts() {
        let mut s = session(TaskFamily::Drink);
        s.submit_request("I want a matcha latte.").unwrap();
        s.advance().unwrap();
        s.interrupt("I want taro milk with boba.");
        s.interrupt("Can I get a strawberry boba milk?");
        s.run().unwrap();
        let flags: Vec<bool> = s
            .transcript()
            .iter()
            .filter_map(|r| match &r.event {
                SessionEvent::Interrupt { superseded, .. } => Some(*superseded),
                _ => None,
            })
            .collect();
        assert_eq!(flags, [true, false]);
        assert!(s.world().drink_completed(&DrinkGoal::new(["boba", "strawberry jam"])));
    }

    #[test]
    fn refused_interrupt_discards_the_cup() {
        let mut s = session(TaskFamily::Drink);
        s.submit_request("I want to order a boba milk.").unwrap();
        s.advance().unwrap();
        s.interrupt("Actually make it a passion fruit milk.");
        assert_eq!(s.advance().unwrap(), SessionState::Refused);
        assert_eq!(s.world().items_at(WORKING_AREA).count(), 0);
    }

    #[test]
    fn transcript_replays() {
        let mut s = session(TaskFamily::Dishwash);
        s.submit_request("Please wash 2 forks and one bowl.").unwrap();
        s.advance().unwrap();
        s.run().unwrap();
        assert_eq!(s.state(), SessionState::Completed, "{:?}", s.failure());
        let ts: Vec<u64> = s.transcript().iter().map(|r| r.timestamp).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        let r = replay(s.transcript(), s.pack().world.clone()).unwrap();
        assert_eq!(r.state, SessionState::Completed);
        assert_eq!(r.completed, s.completed());
        assert_eq!(r.world, *s.world());
    }
}
