//! Low-level executor: turns one plan step into validated skill calls.
//!
//! Each step gets a fresh conversation with the provider. Every invocation
//! is validated against the registry before it reaches the world, and its
//! observation (or error) is fed back as a tool message.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Message, Provider, ProviderError, ProviderResponse, EXECUTOR_MARKER};
use crate::planner::PlanStep;
use crate::skills::{validate_and_dispatch, SkillRegistry, ToolInvocation};
use crate::vision::SceneDescription;
use crate::world::{SkillOutcome, SkillTarget};

pub const SCENE_HEADER: &str = "Scene:";
pub const COMPLETED_STEPS_HEADER: &str = "Completed steps:";
pub const CURRENT_STEP_PREFIX: &str = "Current step: ";
const STEP_COMPLETE: &str = "step_complete";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Completed,
    Failed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum ExecutorError {
    #[error("step failed: {0}")]
    StepFailed(String),
    #[error("turn limit exceeded")]
    TurnLimitExceeded,
    #[error("provider: {0}")]
    Provider(String),
}

impl From<ProviderError> for ExecutorError {
    fn from(e: ProviderError) -> Self {
        ExecutorError::Provider(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub invocation: ToolInvocation,
    pub outcome: SkillOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepExecution {
    pub step: PlanStep,
    pub invocations: Vec<InvocationRecord>,
    pub status: StepStatus,
    pub turns_used: usize,
    pub error: Option<ExecutorError>,
}

#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    pub max_turns: usize,
    pub system_prompt: String,
}

impl ExecutorConfig {
    pub fn new(prompt_template: &str) -> Self {
        ExecutorConfig {
            max_turns: 10,
            system_prompt: format!("{}\n\n{EXECUTOR_MARKER}", prompt_template.trim_end()),
        }
    }
}

pub fn executor_user_message(scene: &SceneDescription, completed: &[PlanStep], step: &PlanStep) -> String {
    let done = if completed.is_empty() {
        "none".to_string()
    } else {
        completed
            .iter()
            .map(|s| format!("{}) {}", s.index, s.text))
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!(
        "{SCENE_HEADER}\n{}\n\n{COMPLETED_STEPS_HEADER}\n{done}\n\n{CURRENT_STEP_PREFIX}{}",
        scene.rendered.trim_end(),
        step.text
    )
}

/// Run one step to completion, failure or the turn limit. `hook` sees every
/// invocation together with its outcome, rejected ones included.
#[allow(clippy::too_many_arguments)]
pub fn execute_step(
    step: &PlanStep,
    world: &mut dyn SkillTarget,
    scene: &SceneDescription,
    completed: &[PlanStep],
    provider: &dyn Provider,
    registry: &SkillRegistry,
    config: &ExecutorConfig,
    hook: &mut dyn FnMut(&ToolInvocation, &SkillOutcome),
) -> StepExecution {
    let tools = registry.schemas();
    let mut history = vec![
        Message::system(config.system_prompt.clone()),
        Message::user(executor_user_message(scene, completed, step)),
    ];
    let mut run = StepExecution {
        step: step.clone(),
        invocations: Vec::new(),
        status: StepStatus::Failed,
        turns_used: 0,
        error: None,
    };
    while run.turns_used < config.max_turns {
        run.turns_used += 1;
        let reply = match provider.complete(&history, &tools) {
            Ok(r) => r,
            Err(e) => {
                run.status = StepStatus::Aborted;
                run.error = Some(e.into());
                return run;
            }
        };
        let call = match reply {
            ProviderResponse::Text(reason) => {
                run.error = Some(ExecutorError::StepFailed(reason));
                return run;
            }
            ProviderResponse::Invocation(call) => call,
        };
        let outcome = match validate_and_dispatch(&call, registry, world) {
            Ok(outcome) => outcome,
            Err(e) => SkillOutcome::failed(e.observation()),
        };
        hook(&call, &outcome);
        history.push(Message::assistant_call(call.clone()));
        history.push(Message::tool_result(call.id.clone(), outcome.observation.clone()));
        let finished = outcome.ok && call.name == STEP_COMPLETE;
        run.invocations.push(InvocationRecord {
            invocation: call,
            outcome,
        });
        if finished {
            run.status = StepStatus::Completed;
            return run;
        }
    }
    run.error = Some(ExecutorError::TurnLimitExceeded);
    run
}
