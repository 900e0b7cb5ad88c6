//! Benchmark suites: plan accuracy, task success and replan checks.
//!
//! Ground truth lives in the suite fixtures as plain step texts. Plans are
//! compared position by position on canonical triples, and success is
//! judged on the simulated world rather than on the plan text.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidelines::{normalize_name, TaskFamily};
use crate::llm::Provider;
use crate::orchestrator::Session;
use crate::pack::TaskPack;
use crate::planner::{canonicalize, Canonical, Plan, PlanStep};
use crate::transcript::{replay, SessionEvent, SessionState};
use crate::world::{DishGoal, DrinkGoal, WorldState};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown suite '{0}' (expected drinks, replan or dishwash)")]
    UnknownSuite(String),
    #[error("suite {path}: {reason}")]
    Fixture { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Existed,
    ZeroShotEasy,
    ZeroShotModerate,
    ZeroShotHard,
    UnavailableMaterial,
}

impl Difficulty {
    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Existed => "Existed",
            Difficulty::ZeroShotEasy => "Zero-shot easy",
            Difficulty::ZeroShotModerate => "Zero-shot moderate",
            Difficulty::ZeroShotHard => "Zero-shot hard",
            Difficulty::UnavailableMaterial => "Unavailable material",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterruptSpec {
    /// Completed steps when the new request arrives.
    pub boundary: usize,
    pub request: String,
    /// Steps expected after the boundary.
    pub truth: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCase {
    pub id: String,
    pub request: String,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub truth: Vec<String>,
    /// Expected refusal text; set for unavailable-material cases.
    #[serde(default)]
    pub refusal: Option<String>,
    #[serde(default)]
    pub interrupt: Option<InterruptSpec>,
    /// Dirty utensil counts for this case; the pack's world otherwise.
    #[serde(default)]
    pub world_items: Option<std::collections::BTreeMap<String, usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    pub domain: TaskFamily,
    #[serde(rename = "case")]
    pub cases: Vec<BenchmarkCase>,
}

pub const SUITE_NAMES: [&str; 3] = ["drinks", "replan", "dishwash"];

impl Suite {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, EvalError> {
        let suite: Suite = toml::from_str(text).map_err(|e| EvalError::Fixture {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        for case in &suite.cases {
            let ok = match (&case.refusal, case.truth.is_empty()) {
                (Some(_), true) => case.interrupt.is_none(),
                (None, false) => true,
                _ => false,
            };
            if !ok {
                return Err(EvalError::Fixture {
                    path: origin.to_string(),
                    reason: format!("case {} needs either truth steps or a refusal", case.id),
                });
            }
        }
        Ok(suite)
    }

    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Fixture {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn builtin(name: &str) -> Result<Self, EvalError> {
        let text = match name {
            "drinks" => include_str!("../fixtures/suites/drinks.toml"),
            "replan" => include_str!("../fixtures/suites/replan.toml"),
            "dishwash" => include_str!("../fixtures/suites/dishwash.toml"),
            other => return Err(EvalError::UnknownSuite(other.to_string())),
        };
        Self::from_toml_str(text, name)
    }
}

fn equivalent(a: &Canonical, b: &Canonical) -> bool {
    match (a, b) {
        (Canonical::Unparsed { text: x }, Canonical::Unparsed { text: y }) => {
            normalize_name(x) == normalize_name(y)
        }
        _ => a == b,
    }
}

/// Positional comparison: `(matched, total, extra)`.
///
/// When the plan is longer than the truth, up to `extra` steps that match
/// no truth step at all are treated as inserted and skipped before the
/// comparison, so one superfluous step does not shift everything after it.
pub fn score_plan(generated: &[Canonical], truth: &[Canonical]) -> (usize, usize, usize) {
    let extra = generated.len().saturating_sub(truth.len());
    let mut budget = extra;
    let aligned: Vec<&Canonical> = generated
        .iter()
        .filter(|g| {
            if budget > 0 && !truth.iter().any(|t| equivalent(g, t)) {
                budget -= 1;
                false
            } else {
                true
            }
        })
        .collect();
    let matched = aligned
        .iter()
        .zip(truth)
        .filter(|(g, t)| equivalent(g, t))
        .count();
    (matched, truth.len(), extra)
}

pub fn canonical_steps<S: AsRef<str>>(texts: &[S]) -> Vec<Canonical> {
    texts.iter().map(|t| canonicalize(t.as_ref())).collect()
}

/// Steps after the last fresh cup (or discard) in an executed sequence.
fn current_cup(steps: &[Canonical]) -> &[Canonical] {
    let start = steps
        .iter()
        .rposition(|c| matches!(c.verb(), Some("get" | "discard")))
        .map_or(0, |i| i + 1);
    &steps[start..]
}

fn drink_goal(steps: &[Canonical]) -> DrinkGoal {
    DrinkGoal::new(
        current_cup(steps)
            .iter()
            .filter(|c| c.verb() == Some("add"))
            .filter_map(|c| c.object().map(String::from)),
    )
}

fn rack_of(destination: &str) -> Option<u8> {
    destination.split_whitespace().find_map(|w| match w {
        "first" => Some(1),
        "second" => Some(2),
        "third" => Some(3),
        _ => None,
    })
}

fn dish_goal(steps: &[Canonical]) -> DishGoal {
    let mut items: Vec<(String, usize, u8)> = Vec::new();
    let mut detergent = String::new();
    for c in steps {
        match (c.verb(), c.object(), c.destination()) {
            (Some("put"), Some(kind), Some(dest)) => {
                let rack = rack_of(dest).unwrap_or(0);
                match items.iter_mut().find(|(k, _, r)| k == kind && *r == rack) {
                    Some(entry) => entry.1 += 1,
                    None => items.push((kind.to_string(), 1, rack)),
                }
            }
            (Some("add"), Some(obj), _) if obj.ends_with("detergent") => {
                detergent = obj.trim_end_matches("detergent").trim().to_string();
            }
            _ => {}
        }
    }
    DishGoal { items, detergent }
}

/// Completion predicate implied by an executed-step sequence.
pub fn goal_satisfied(domain: TaskFamily, truth: &[Canonical], world: &WorldState) -> bool {
    match domain {
        TaskFamily::Drink => world.drink_completed(&drink_goal(truth)),
        TaskFamily::Dishwash => world.dishes_completed(&dish_goal(truth)),
    }
}

/// No add or pour is repeated within one cup's lifetime.
pub fn no_repeated_effects(executed: &[Canonical]) -> bool {
    let mut seen: Vec<&Canonical> = Vec::new();
    for c in executed {
        match c.verb() {
            Some("get" | "discard" | "put") => seen.clear(),
            Some("add" | "pour") => {
                if seen.contains(&c) {
                    return false;
                }
                seen.push(c);
            }
            _ => {}
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub id: String,
    pub request: String,
    pub difficulty: Difficulty,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interrupt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<usize>,
    pub matched: usize,
    pub total: usize,
    pub extra: usize,
    /// Steps actually planned: initial plan, or executed prefix plus replan.
    pub plan_len: usize,
    pub final_state: SessionState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refusal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub success: bool,
    pub checks: Vec<Check>,
}

impl CaseReport {
    /// Scored as a planning case (refusals are not).
    pub fn is_planning_case(&self) -> bool {
        self.total > 0
    }

    pub fn passed(&self) -> bool {
        self.success && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub suite: String,
    pub provider: String,
    pub cases: Vec<CaseReport>,
    /// Mean of matched/total over planning cases.
    pub planning_rate: f64,
    pub successes: usize,
    pub all_passed: bool,
}

impl ScoreReport {
    fn new(suite: &str, provider: &str, cases: Vec<CaseReport>) -> Self {
        let ratios: Vec<f64> = cases
            .iter()
            .filter(|c| c.is_planning_case())
            .map(|c| c.matched as f64 / c.total as f64)
            .collect();
        let planning_rate = if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        ScoreReport {
            suite: suite.to_string(),
            provider: provider.to_string(),
            successes: cases.iter().filter(|c| c.success).count(),
            all_passed: cases.iter().all(CaseReport::passed),
            planning_rate,
            cases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width report table, one row per case.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite: {}  provider: {}", self.suite, self.provider);
        let _ = writeln!(
            out,
            "{:<4} {:<58} {:<21} {:>7} {:>5} {:<7} checks",
            "id", "request", "difficulty", "steps", "extra", "success"
        );
        for c in &self.cases {
            let mut request = c.request.clone();
            if let Some(i) = &c.interrupt {
                request = format!("{request} -> {i}");
            }
            if request.chars().count() > 58 {
                request = request.chars().take(55).collect::<String>() + "...";
            }
            let steps = if c.is_planning_case() {
                format!("{}/{}", c.matched, c.total)
            } else {
                "-".to_string()
            };
            let failed: Vec<&str> = c
                .checks
                .iter()
                .filter(|k| !k.passed)
                .map(|k| k.name.as_str())
                .collect();
            let checks = if failed.is_empty() {
                "ok".to_string()
            } else {
                format!("FAILED: {}", failed.join(", "))
            };
            let _ = writeln!(
                out,
                "{:<4} {:<58} {:<21} {:>7} {:>5} {:<7} {}",
                c.id,
                request,
                c.difficulty.label(),
                steps,
                c.extra,
                if c.success { "yes" } else { "no" },
                checks
            );
        }
        let _ = writeln!(
            out,
            "planning rate: {:.1}%  success: {}/{}  {}",
            self.planning_rate * 100.0,
            self.successes,
            self.cases.len(),
            if self.all_passed { "PASS" } else { "FAIL" }
        );
        out
    }
}

fn plan_texts(plan: Option<&Plan>) -> Vec<String> {
    plan.map(|p| p.steps.iter().map(|s| s.text.clone()).collect())
        .unwrap_or_default()
}

fn check(name: &str, passed: bool) -> Check {
    Check {
        name: name.to_string(),
        passed,
    }
}

fn case_pack(pack: &TaskPack, case: &BenchmarkCase) -> TaskPack {
    let mut pack = pack.clone();
    if let Some(items) = &case.world_items {
        pack.world = Arc::new((*pack.world).clone().with_dish_counts(items.clone()));
    }
    pack
}

/// Run one case in a fresh session.
pub fn run_case(case: &BenchmarkCase, pack: &TaskPack, provider: Arc<dyn Provider>) -> CaseReport {
    let pack = case_pack(pack, case);
    let domain = pack.domain;
    let mut session = Session::new(format!("case-{}", case.id), pack, provider, case.seed);
    let _ = session.submit_request(&case.request);
    let initial = plan_texts(session.plan());

    let mut boundary_seen = None;
    if let Some(spec) = &case.interrupt {
        while session.state() == SessionState::Executing && session.completed().len() < spec.boundary {
            if session.advance().is_err() {
                break;
            }
        }
        session.interrupt(&spec.request);
    }
    let _ = session.run();

    for r in session.transcript() {
        if let SessionEvent::Replanned { boundary, .. } = &r.event {
            boundary_seen = Some(*boundary);
        }
    }

    // What was planned, as seen by the user: the executed prefix of the
    // first plan followed by the replanned steps.
    let (generated, truth): (Vec<String>, Vec<String>) = match &case.interrupt {
        Some(spec) => {
            let replanned = session
                .transcript()
                .iter()
                .rev()
                .find_map(|r| match &r.event {
                    SessionEvent::Replanned { steps, .. } => Some(steps.clone()),
                    _ => None,
                })
                .unwrap_or_default();
            let prefix: Vec<String> = initial.iter().take(spec.boundary).cloned().collect();
            let mut truth: Vec<String> = case.truth.iter().take(spec.boundary).cloned().collect();
            truth.extend(spec.truth.iter().cloned());
            (prefix.into_iter().chain(replanned).collect(), truth)
        }
        None => (initial.clone(), case.truth.clone()),
    };
    let gen_c = canonical_steps(&generated);
    let truth_c = canonical_steps(&truth);
    let (matched, total, extra) = if truth.is_empty() {
        (0, 0, 0)
    } else {
        score_plan(&gen_c, &truth_c)
    };

    let mut checks = Vec::new();
    let success = match &case.refusal {
        Some(expected) => {
            session.state() == SessionState::Refused
                && session
                    .refusal()
                    .is_some_and(|r| normalize_name(&r.message).contains(&normalize_name(expected)))
        }
        None => {
            let predicate = goal_satisfied(domain, &truth_c, session.world());
            checks.push(check("completion predicate", predicate));
            session.state() == SessionState::Completed && matched == total && predicate
        }
    };
    if let Some(spec) = &case.interrupt {
        let executed: Vec<Canonical> = session.completed().iter().map(|s: &PlanStep| s.canonical.clone()).collect();
        if domain == TaskFamily::Drink {
            checks.push(check("no repeated effect", no_repeated_effects(&executed)));
        }
        checks.push(check("boundary", boundary_seen == Some(spec.boundary)));
    }
    let replayed = replay(session.transcript(), session.pack().world.clone());
    checks.push(check(
        "replay",
        replayed.is_ok_and(|r| {
            r.state == session.state()
                && r.completed == session.completed()
                && r.world == *session.world()
                && r.refusal.as_ref() == session.refusal()
        }),
    ));

    CaseReport {
        id: case.id.clone(),
        request: case.request.clone(),
        difficulty: case.difficulty,
        interrupt: case.interrupt.as_ref().map(|i| i.request.clone()),
        boundary: case.interrupt.as_ref().map(|i| i.boundary),
        matched,
        total,
        extra,
        plan_len: generated.len(),
        final_state: session.state(),
        refusal: session.refusal().map(|r| r.message.clone()),
        failure: session.failure().map(String::from),
        success,
        checks,
    }
}

/// Run every case, optionally on one thread per case. Reports keep the
/// fixture order either way.
pub fn run_suite(
    suite: &Suite,
    pack: &TaskPack,
    provider: Arc<dyn Provider>,
    parallel: bool,
) -> ScoreReport {
    let cases: Vec<CaseReport> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = suite
                .cases
                .iter()
                .map(|case| {
                    let provider = provider.clone();
                    scope.spawn(move || run_case(case, pack, provider))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("case thread panicked"))
                .collect()
        })
    } else {
        suite
            .cases
            .iter()
            .map(|case| run_case(case, pack, provider.clone()))
            .collect()
    };
    ScoreReport::new(&suite.name, provider.name(), cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(texts: &[&str]) -> Vec<Canonical> {
        canonical_steps(texts)
    }

    const BOBA: [&str; 4] = [
        "get an empty cup and bring it to the working area",
        "add boba to the working cup",
        "pour the milk into the working cup",
        "put the working cup in the finished location",
    ];

    #[test]
    fn identical_plans_score_fully() {
        assert_eq!(score_plan(&c(&BOBA), &c(&BOBA)), (4, 4, 0));
    }

    #[test]
    fn swapped_middle_steps() {
        let swapped = [BOBA[0], BOBA[2], BOBA[1], BOBA[3]];
        assert_eq!(score_plan(&c(&swapped), &c(&BOBA)), (2, 4, 0));
    }

    #[test]
    fn inserted_stir_is_over_generation() {
        let truth = [
            "get an empty cup and bring it to the working area",
            "add boba to the working cup",
            "add strawberry jam to the working cup",
            "add matcha powder to the working cup",
            "pour the milk into the working cup",
            "put the working cup in the finished location",
        ];
        let mut generated = truth[..5].to_vec();
        generated.push("stir the mixture until the matcha powder is well mixed");
        generated.push(truth[5]);
        assert_eq!(score_plan(&c(&generated), &c(&truth)), (6, 6, 1));
        let mut appended = truth.to_vec();
        appended.push("stir the mixture until the matcha powder is well mixed");
        assert_eq!(score_plan(&c(&appended), &c(&truth)), (6, 6, 1));
    }

    #[test]
    fn wrong_step_of_the_same_length_is_not_skipped() {
        let wrong = [BOBA[0], "add mango jam to the working cup", BOBA[2], BOBA[3]];
        assert_eq!(score_plan(&c(&wrong), &c(&BOBA)), (3, 4, 0));
    }

    #[test]
    fn repeated_effects_are_found() {
        let mut steps = BOBA[..3].to_vec();
        assert!(no_repeated_effects(&c(&steps)));
        steps.push("add boba to the working cup");
        assert!(!no_repeated_effects(&c(&steps)));
        let restarted = [BOBA[0], BOBA[1], "discard the current cup", BOBA[0], BOBA[1]];
        assert!(no_repeated_effects(&c(&restarted)));
    }

    #[test]
    fn goals_follow_the_truth() {
        let goal = drink_goal(&c(&["get an empty cup", "add taro to the working cup", "discard the current cup", BOBA[0], BOBA[1]]));
        assert_eq!(goal, DrinkGoal::new(["boba"]));
        let goal = dish_goal(&c(&[
            "put the fork on the first rack",
            "put the fork on the first rack",
            "put the plate on the third rack",
            "add rose detergent into the detergent dispenser",
        ]));
        assert_eq!(goal.items, [("fork".to_string(), 2, 1), ("plate".to_string(), 1, 3)]);
        assert_eq!(goal.detergent, "rose");
    }

    fn oracle_report(name: &str) -> ScoreReport {
        let suite = Suite::builtin(name).unwrap();
        let pack = TaskPack::builtin(suite.domain);
        let oracle = Arc::new(crate::llm::OracleProvider::new(pack.lexicon.clone()));
        run_suite(&suite, &pack, oracle, false)
    }

    #[test]
    fn oracle_passes_every_suite() {
        for name in SUITE_NAMES {
            let report = oracle_report(name);
            assert!(report.all_passed, "{}\n{:#?}", report.to_table(), report.cases.iter().filter(|c| !c.passed()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn parallel_report_is_identical() {
        let suite = Suite::builtin("drinks").unwrap();
        let pack = TaskPack::builtin(suite.domain);
        let oracle = Arc::new(crate::llm::OracleProvider::new(pack.lexicon.clone()));
        let parallel = run_suite(&suite, &pack, oracle, true);
        assert_eq!(parallel.to_json(), oracle_report("drinks").to_json());
    }

    #[test]
    fn builtin_suites_parse() {
        assert_eq!(Suite::builtin("drinks").unwrap().cases.len(), 10);
        assert_eq!(Suite::builtin("replan").unwrap().cases.len(), 15);
        assert_eq!(Suite::builtin("dishwash").unwrap().cases.len(), 10);
        assert!(matches!(Suite::builtin("laundry"), Err(EvalError::UnknownSuite(_))));
    }
}
