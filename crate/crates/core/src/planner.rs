//! High-level planning: prompt assembly, plan parsing, canonical step form.

use std::fmt;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidelines::TaskGuidelines;
use crate::llm::{Message, Provider, ProviderError, ProviderResponse, PLANNER_MARKER};

pub const GUIDELINES_HEADER: &str = "Task guidelines:";
pub const REQUEST_PREFIX: &str = "User request: ";
pub const COMPLETED_HEADER: &str = "Completed steps:";
pub const NO_COMPLETED: &str = "Completed steps: none";
pub const NEW_REQUEST_PREFIX: &str = "New request: ";

/// Verb, object, destination of a step, or the normalized text when the
/// step falls outside the grammar.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Canonical {
    Triple {
        verb: String,
        object: String,
        destination: Option<String>,
    },
    Unparsed {
        text: String,
    },
}

impl Canonical {
    pub fn verb(&self) -> Option<&str> {
        match self {
            Canonical::Triple { verb, .. } => Some(verb),
            Canonical::Unparsed { .. } => None,
        }
    }

    pub fn object(&self) -> Option<&str> {
        match self {
            Canonical::Triple { object, .. } => Some(object),
            Canonical::Unparsed { .. } => None,
        }
    }

    pub fn destination(&self) -> Option<&str> {
        match self {
            Canonical::Triple { destination, .. } => destination.as_deref(),
            Canonical::Unparsed { .. } => None,
        }
    }
}

impl fmt::Display for Canonical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Canonical::Triple {
                verb,
                object,
                destination: Some(d),
            } => write!(f, "({verb}, {object}, {d})"),
            Canonical::Triple { verb, object, .. } => write!(f, "({verb}, {object})"),
            Canonical::Unparsed { text } => write!(f, "unparsed: {text}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// 1-based position in its plan.
    pub index: usize,
    pub text: String,
    pub canonical: Canonical,
}

impl PlanStep {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let canonical = canonicalize(&text);
        PlanStep {
            index,
            text,
            canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanOrigin {
    Initial,
    Replan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub origin: PlanOrigin,
    pub source_request: String,
    /// The plan starts by undoing applied effects that contradict the request.
    pub restart_required: bool,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refusal {
    pub message: String,
    /// Lower-cased names of the unavailable materials.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PlanOutcome {
    Plan(Plan),
    Refusal(Refusal),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("unparseable plan: {0}")]
    UnparseablePlan(String),
    #[error("replanning needs the earlier conversation")]
    MissingHistory,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    Plan,
    Replan,
}

/// Everything the planner remembers for one session.
#[derive(Debug, Clone)]
pub struct PlanContext {
    pub guidelines: Arc<TaskGuidelines>,
    pub history: Vec<Message>,
    /// Memorized completed steps, in execution order.
    pub completed: Vec<PlanStep>,
    pub system_prompt: String,
}

impl PlanContext {
    pub fn new(guidelines: Arc<TaskGuidelines>, prompt_template: &str) -> Self {
        PlanContext {
            guidelines,
            history: Vec::new(),
            completed: Vec::new(),
            system_prompt: format!("{}\n\n{PLANNER_MARKER}", prompt_template.trim_end()),
        }
    }
}

pub fn planner_user_message(guidelines: &TaskGuidelines, request: &str) -> String {
    format!(
        "{GUIDELINES_HEADER}\n{}\n\n{REQUEST_PREFIX}{}",
        guidelines.raw_text.trim_end(),
        request.trim()
    )
}

pub fn replan_user_message(completed: &[PlanStep], request: &str) -> String {
    let mut text = if completed.is_empty() {
        NO_COMPLETED.to_string()
    } else {
        let mut t = format!("{COMPLETED_HEADER}\n");
        for (i, step) in completed.iter().enumerate() {
            t.push_str(&format!("{}) {}\n", i + 1, step.text));
        }
        t.trim_end().to_string()
    };
    text.push_str(&format!("\n\n{NEW_REQUEST_PREFIX}{}", request.trim()));
    text
}

pub fn build_planner_prompt(
    ctx: &PlanContext,
    request: &str,
    mode: PromptMode,
) -> Result<Vec<Message>, PlannerError> {
    match mode {
        PromptMode::Plan => {
            let mut messages = if ctx.history.is_empty() {
                vec![Message::system(&ctx.system_prompt)]
            } else {
                ctx.history.clone()
            };
            messages.push(Message::user(planner_user_message(&ctx.guidelines, request)));
            Ok(messages)
        }
        PromptMode::Replan => {
            if ctx.history.is_empty() {
                return Err(PlannerError::MissingHistory);
            }
            let mut messages = ctx.history.clone();
            messages.push(Message::user(replan_user_message(&ctx.completed, request)));
            Ok(messages)
        }
    }
}

static STEP_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:step\s*)?(\d+)\s*[).]\s*(\S.*?)\s*$").unwrap());
static UNAVAILABLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(.*?)\s+(?:is|are)\s+(?:currently\s+)?not\s+available").unwrap()
});

fn refusal_from(text: &str) -> Option<Refusal> {
    let mut missing = Vec::new();
    for sentence in text.split(['.', '!', '\n', ';']) {
        if let Some(cap) = UNAVAILABLE.captures(sentence.trim()) {
            let mut name = crate::guidelines::normalize_name(&cap[1]);
            for prefix in ["sorry, ", "sorry ", "unfortunately, ", "unfortunately ", "but ", "the "] {
                if let Some(rest) = name.strip_prefix(prefix) {
                    name = rest.to_string();
                }
            }
            if !name.is_empty() && !missing.contains(&name) {
                missing.push(name);
            }
        }
    }
    (!missing.is_empty()).then(|| Refusal {
        message: text.trim().to_string(),
        missing,
    })
}

/// Extract numbered steps, renumbered from 1. A reply without steps that
/// names unavailable material is a refusal.
pub fn parse_plan_text(
    text: &str,
    origin: PlanOrigin,
    source_request: &str,
) -> Result<PlanOutcome, PlannerError> {
    let steps: Vec<PlanStep> = text
        .lines()
        .filter_map(|l| STEP_LINE.captures(l).map(|c| c[2].to_string()))
        .enumerate()
        .map(|(i, t)| PlanStep::new(i + 1, t))
        .collect();
    if steps.is_empty() {
        return match refusal_from(text) {
            Some(r) => Ok(PlanOutcome::Refusal(r)),
            None => Err(PlannerError::UnparseablePlan(text.trim().to_string())),
        };
    }
    let restart_required = steps[0].canonical.verb() == Some("discard");
    Ok(PlanOutcome::Plan(Plan {
        steps,
        origin,
        source_request: source_request.to_string(),
        restart_required,
    }))
}

fn ask(
    ctx: &mut PlanContext,
    request: &str,
    mode: PromptMode,
    provider: &dyn Provider,
) -> Result<PlanOutcome, PlannerError> {
    let messages = build_planner_prompt(ctx, request, mode)?;
    let text = match provider.complete(&messages, &[])? {
        ProviderResponse::Text(t) => t,
        ProviderResponse::Invocation(call) => {
            return Err(PlannerError::UnparseablePlan(format!(
                "expected a plan, got a call to {}",
                call.name
            )))
        }
    };
    ctx.history = messages;
    ctx.history.push(Message::assistant(&text));
    let origin = match mode {
        PromptMode::Plan => PlanOrigin::Initial,
        PromptMode::Replan => PlanOrigin::Replan,
    };
    parse_plan_text(&text, origin, request)
}

pub fn plan(
    ctx: &mut PlanContext,
    request: &str,
    provider: &dyn Provider,
) -> Result<PlanOutcome, PlannerError> {
    ask(ctx, request, PromptMode::Plan, provider)
}

/// New plan covering only steps not executed yet. `ctx.completed` is read,
/// never modified.
pub fn replan(
    ctx: &mut PlanContext,
    new_request: &str,
    provider: &dyn Provider,
) -> Result<PlanOutcome, PlannerError> {
    ask(ctx, new_request, PromptMode::Replan, provider)
}

// ---------------------------------------------------------------------------
// Canonicalization

const DROP_FROM_OBJECT: &[&str] = &[
    "a", "an", "the", "all", "some", "each", "every", "one", "two", "three", "four", "five",
    "six", "seven", "eight", "nine", "ten", "first", "second", "third", "fourth", "fifth",
    "sixth", "seventh", "eighth", "ninth", "tenth", "dirty", "clean", "another", "other",
];

fn singular(word: &str) -> String {
    if word.len() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if let Some(stem) = word.strip_suffix("ves") {
        return format!("{stem}fe");
    }
    for suffix in ["ches", "shes", "xes", "sses"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}

fn clean_object(text: &str) -> String {
    text.replace(',', " ")
        .split_whitespace()
        .filter(|w| !DROP_FROM_OBJECT.contains(w) && !w.bytes().all(|b| b.is_ascii_digit()))
        .map(singular)
        .collect::<Vec<_>>()
        .join(" ")
}

fn clean_destination(text: &str) -> String {
    text.split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalize_step(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.trim_end_matches(['.', '!', ';']).trim();
    trimmed.strip_prefix("please ").unwrap_or(trimmed).to_string()
}

struct Rule {
    verb: &'static str,
    re: Regex,
}

static RULES: LazyLock<Vec<Rule>> = LazyLock::new(|| {
    let r = |verb, pattern: &str| Rule {
        verb,
        re: Regex::new(pattern).unwrap(),
    };
    vec![
        r("get", r"^get (.+?) and (?:bring|put|place|move) it (?:to|in|into|at|on) (.+)$"),
        r("get", r"^get (.+)$"),
        r("add", r"^add (.+?) (?:to|into|in) (.+)$"),
        r("add", r"^add (.+)$"),
        r("pour", r"^pour (.+?) (?:to|into|in) (.+)$"),
        r("pour", r"^pour (.+)$"),
        r("put", r"^put (.+?) (?:in|into|on|to|at) (.+)$"),
        r("grasp", r"^(?:grasp|grab|pick up) (.+)$"),
        r("remove", r"^remove (.+?) from (.+)$"),
        r("open", r"^open (.+)$"),
        r("pull", r"^pull out (.+)$"),
        r("pull", r"^pull (.+?) out$"),
        r("close", r"^close (.+)$"),
        r("start", r"^select (?:the )?cycle and start (.+)$"),
        r("start", r"^start (.+)$"),
        r("verify", r"^(?:make sure|verify|check)(?: that)? (.+?) (?:is|are) (?:clean|done|ready)"),
        r("verify", r"^(?:make sure|verify|check)(?: that)? (.+)$"),
        r("return", r"^return (.+?) to (.+)$"),
        r("return", r"^return (.+)$"),
        r("discard", r"^(?:discard|throw away) (.+)$"),
        r("stir", r"^stir (.+?)(?: until .*)?$"),
    ]
});

static WAIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|, )wait\b").unwrap());
static WAIT_OBJECT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"wait\b.*? for (?:the )?([a-z]+) to").unwrap());

/// Deterministic canonical form of a step text.
pub fn canonicalize(text: &str) -> Canonical {
    let norm = normalize_step(text);
    if WAIT.is_match(&norm) {
        let object = WAIT_OBJECT
            .captures(&norm)
            .map(|c| singular(&c[1]))
            .unwrap_or_default();
        return Canonical::Triple {
            verb: "wait".into(),
            object,
            destination: None,
        };
    }
    for rule in RULES.iter() {
        if let Some(cap) = rule.re.captures(&norm) {
            let object = clean_object(&cap[1]);
            let destination = cap.get(2).map(|m| clean_destination(m.as_str()));
            return Canonical::Triple {
                verb: rule.verb.to_string(),
                object,
                destination,
            };
        }
    }
    Canonical::Unparsed { text: norm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidelines::parse_guidelines;

    fn triple(verb: &str, object: &str, dest: Option<&str>) -> Canonical {
        Canonical::Triple {
            verb: verb.into(),
            object: object.into(),
            destination: dest.map(String::from),
        }
    }

    fn ctx() -> PlanContext {
        let g = parse_guidelines(include_str!("../fixtures/drink/guidelines.txt")).unwrap();
        PlanContext::new(Arc::new(g), include_str!("../fixtures/prompts/planner.txt"))
    }

    #[test]
    fn canonical_drink_steps() {
        assert_eq!(
            canonicalize("get an empty cup and bring it to the working area"),
            triple("get", "empty cup", Some("working area"))
        );
        assert_eq!(
            canonicalize("2) add boba to the working cup".split_once(") ").unwrap().1),
            triple("add", "boba", Some("working cup"))
        );
        assert_eq!(
            canonicalize("Pour the milk into the working cup."),
            triple("pour", "milk", Some("working cup"))
        );
        assert_eq!(
            canonicalize("put the working cup in the finished location"),
            triple("put", "working cup", Some("finished location"))
        );
        assert_eq!(canonicalize("discard the current cup"), triple("discard", "current cup", None));
    }

    #[test]
    fn canonical_dish_steps() {
        assert_eq!(
            canonicalize("grasp the first dirty plate"),
            canonicalize("grasp the dirty plate")
        );
        assert_eq!(
            canonicalize("put one plate on the third rack"),
            triple("put", "plate", Some("third rack"))
        );
        assert_ne!(
            canonicalize("put the plate on the third rack"),
            canonicalize("put the plate on the first rack")
        );
        assert_eq!(
            canonicalize("remove large particle from the plate"),
            triple("remove", "large particle", Some("plate"))
        );
        assert_eq!(
            canonicalize(
                "after the dishwasher cycle is complete and the dishwasher has stopped, wait a few minutes for the dishes to cool down"
            ),
            triple("wait", "dish", None)
        );
        assert_eq!(
            canonicalize("make sure the plate and fork are clean and dry, otherwise go into step 8)"),
            triple("verify", "plate and fork", None)
        );
        assert_eq!(
            canonicalize("select the cycle and start dishwasher"),
            triple("start", "dishwasher", None)
        );
        assert_eq!(
            canonicalize("return all clean utensils to the finished location"),
            triple("return", "utensil", Some("finished location"))
        );
        assert_eq!(canonicalize("pull out the rack "), triple("pull", "rack", None));
    }

    #[test]
    fn unknown_text_is_unparsed() {
        assert_eq!(
            canonicalize("Recite a  poem."),
            Canonical::Unparsed {
                text: "recite a poem".into()
            }
        );
    }

    #[test]
    fn plan_prompt_has_guidelines() {
        let c = ctx();
        let msgs = build_planner_prompt(&c, "I want a matcha latte.", PromptMode::Plan).unwrap();
        assert_eq!(msgs.len(), 2);
        assert!(msgs[0].content.contains(PLANNER_MARKER));
        assert!(msgs[1].content.contains("Available material we have now"));
        assert!(msgs[1].content.ends_with("User request: I want a matcha latte."));
    }

    #[test]
    fn replan_prompt_lists_completed() {
        let mut c = ctx();
        assert_eq!(
            build_planner_prompt(&c, "x", PromptMode::Replan),
            Err(PlannerError::MissingHistory)
        );
        c.history = build_planner_prompt(&c, "May I have a cup of milk with taro?", PromptMode::Plan).unwrap();
        c.completed
            .push(PlanStep::new(1, "get an empty cup and bring it to the working area"));
        let msgs =
            build_planner_prompt(&c, "May I change to a taro boba milk?", PromptMode::Replan).unwrap();
        let last = &msgs.last().unwrap().content;
        assert_eq!(msgs.len(), 3);
        assert_eq!(
            last,
            "Completed steps:\n1) get an empty cup and bring it to the working area\n\nNew request: May I change to a taro boba milk?"
        );
    }

    #[test]
    fn parse_numbered_styles() {
        let text = "Sure!\n1) get an empty cup and bring it to the working area\nstep 2) add boba to the working cup\n3. pour the milk into the working cup\n4) put the working cup in the finished location";
        let PlanOutcome::Plan(p) = parse_plan_text(text, PlanOrigin::Initial, "r").unwrap() else {
            panic!()
        };
        assert_eq!(p.len(), 4);
        assert_eq!(p.steps[1].canonical, triple("add", "boba", Some("working cup")));
        assert_eq!(p.steps.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert!(!p.restart_required);
    }

    #[test]
    fn parse_refusal_and_garbage() {
        assert_eq!(
            parse_plan_text("Passion fruit jam is not available", PlanOrigin::Initial, "r").unwrap(),
            PlanOutcome::Refusal(Refusal {
                message: "Passion fruit jam is not available".into(),
                missing: vec!["passion fruit jam".into()],
            })
        );
        assert!(matches!(
            parse_plan_text("hello", PlanOrigin::Initial, "r"),
            Err(PlannerError::UnparseablePlan(_))
        ));
    }

    #[test]
    fn restart_flag() {
        let PlanOutcome::Plan(p) = parse_plan_text(
            "3) discard the current cup\n4) get an empty cup and bring it to the working area",
            PlanOrigin::Replan,
            "r",
        )
        .unwrap() else {
            panic!()
        };
        assert!(p.restart_required);
        assert_eq!(p.steps[0].index, 1);
    }
}
