//! Acceptance suite. One PASS/FAIL line per criterion; the process exits
//! nonzero if any criterion fails. Tolerances are pinned below.
//!
//! cargo test -p interplan --test acceptance

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use interplan::eval::{canonical_steps, goal_satisfied, no_repeated_effects, run_suite, ScoreReport, Suite};
use interplan::executor::{execute_step, ExecutorConfig, StepStatus};
use interplan::guidelines::TaskFamily;
use interplan::llm::wire::{build_request, parse_response};
use interplan::llm::{Message, OracleProvider, Provider, ProviderError, ProviderResponse, RemoteConfig, RemoteProvider};
use interplan::orchestrator::Session;
use interplan::pack::TaskPack;
use interplan::planner::{canonicalize, plan, PlanContext, PlanOutcome};
use interplan::skills::{schema_document, validate_and_dispatch, SkillRegistry, ToolInvocation};
use interplan::transcript::{SessionEvent, SessionState};
use interplan::vision::{detect, describe_scene, fit_homography, Calibration, Correspondence};
use interplan::world::{DishGoal, DrinkGoal, Location, Point, SkillOutcome, SkillTarget, WorldConfig, WorldError, WorldState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const DRINK_PLAN_LENGTHS: [usize; 9] = [3, 4, 4, 4, 4, 5, 5, 5, 6];
const DRINK_SUITE_BUDGET: Duration = Duration::from_secs(10);
const RATE_TOLERANCE: f64 = 1e-12;
const REPLAN_RUNS: usize = 15;
const CLOSURE_CASES: usize = 200;
const CLOSURE_SEED: u64 = 1905;
const VOLUME_TOLERANCE_ML: f64 = 1e-9;
const CALIBRATIONS: usize = 100;
const CALIBRATION_SEED: u64 = 42;
const MAX_REPROJECTION_PX: f64 = 1e-6;
const MAX_ROUND_TRIP_M: f64 = 1e-6;
const FUZZED_INVOCATIONS: usize = 1000;
const FUZZ_SEED: u64 = 7;

/// Failures collected while checking one criterion.
#[derive(Default)]
struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn oracle(pack: &TaskPack) -> Arc<dyn Provider> {
    Arc::new(OracleProvider::new(pack.lexicon.clone()))
}

fn suite_report(name: &str) -> (Suite, TaskPack, ScoreReport) {
    let suite = Suite::builtin(name).expect("builtin suite");
    let pack = TaskPack::builtin(suite.domain);
    let report = run_suite(&suite, &pack, oracle(&pack), false);
    (suite, pack, report)
}

fn drinks_table() -> Verdict {
    let mut v = Verdict::default();
    let suite = Suite::builtin("drinks").unwrap();
    let pack = TaskPack::builtin(suite.domain);
    let start = Instant::now();
    let report = run_suite(&suite, &pack, oracle(&pack), false);
    let elapsed = start.elapsed();

    v.check(report.cases.len() == 10, || format!("{} cases, expected 10", report.cases.len()));
    let mut lengths: Vec<usize> = report
        .cases
        .iter()
        .filter(|c| c.is_planning_case())
        .map(|c| c.plan_len)
        .collect();
    lengths.sort_unstable();
    v.check(lengths == DRINK_PLAN_LENGTHS, || format!("plan lengths {lengths:?}"));
    for c in report.cases.iter().filter(|c| c.is_planning_case()) {
        v.check(c.matched == c.total && c.total == c.plan_len, || {
            format!("{}: {}/{} with {} steps", c.id, c.matched, c.total, c.plan_len)
        });
    }
    let refused: Vec<_> = report.cases.iter().filter(|c| !c.is_planning_case()).collect();
    v.check(refused.len() == 1, || format!("{} refusal cases", refused.len()));
    for c in &refused {
        v.check(
            c.request.contains("passion fruit")
                && c.final_state == SessionState::Refused
                && c.refusal.as_deref().is_some_and(|m| m.contains("is not available")),
            || format!("{} did not end in the expected refusal: {:?}", c.id, c.refusal),
        );
    }
    if let Some(taro) = report.cases.iter().find(|c| c.request.contains("taro")) {
        v.check(taro.plan_len == 4, || format!("taro milk planned {} steps", taro.plan_len));
    }
    v.check((report.planning_rate - 1.0).abs() <= RATE_TOLERANCE, || {
        format!("planning rate {}", report.planning_rate)
    });
    v.check(report.successes == 10, || format!("success {}/10", report.successes));
    v.check(elapsed < DRINK_SUITE_BUDGET, || format!("took {elapsed:?}"));
    v.note(format!(
        "rate {:.0}%, success {}/10, {} ms",
        report.planning_rate * 100.0,
        report.successes,
        elapsed.as_millis()
    ));
    v
}

/// Rack from the dishwasher guidelines: small utensils on the first rack,
/// bowls and cups on the second, plates on the third.
fn expected_rack(kind: &str) -> Option<&'static str> {
    match kind {
        "fork" | "knife" | "spoon" => Some("first rack"),
        "bowl" | "cup" => Some("second rack"),
        "plate" => Some("third rack"),
        _ => None,
    }
}

fn dishwash_table() -> Verdict {
    let mut v = Verdict::default();
    let (suite, pack, report) = suite_report("dishwash");
    v.check((report.planning_rate - 1.0).abs() <= RATE_TOLERANCE, || {
        format!("planning rate {}", report.planning_rate)
    });
    let mut feasible = 0;
    let mut has_26 = false;
    for (case, r) in suite.cases.iter().zip(&report.cases) {
        if case.refusal.is_some() {
            continue;
        }
        feasible += 1;
        // An interrupted row counts the executed prefix plus the new plan.
        let truth: Vec<String> = match &case.interrupt {
            Some(spec) => case.truth[..spec.boundary].iter().chain(&spec.truth).cloned().collect(),
            None => case.truth.clone(),
        };
        let n = canonical_steps(&truth).iter().filter(|c| c.verb() == Some("put")).count();
        v.check(r.plan_len == 3 * n + 8, || format!("{}: {} steps for {n} items", case.id, r.plan_len));
        has_26 |= r.plan_len == 26;
        v.check(r.passed(), || format!("{} failed: {:?}", case.id, r.checks));

        let mut ctx = PlanContext::new(pack.guidelines.clone(), &pack.planner_prompt);
        match plan(&mut ctx, &case.request, &OracleProvider::new(pack.lexicon.clone())) {
            Ok(PlanOutcome::Plan(p)) => {
                for step in &p.steps {
                    let c = canonicalize(&step.text);
                    if c.verb() != Some("put") {
                        continue;
                    }
                    let kind = c.object().unwrap_or_default();
                    let want = expected_rack(kind);
                    v.check(want.is_some() && c.destination() == want, || {
                        format!("{}: '{}' breaks the rack rule", case.id, step.text)
                    });
                }
            }
            other => v.failures.push(format!("{}: {other:?}", case.id)),
        }
    }
    v.check(feasible == 9, || format!("{feasible} feasible rows"));
    v.check(has_26, || "no 26-step row".into());
    let lemon = report.cases.iter().find(|c| c.request.contains("lemon"));
    v.check(
        lemon.is_some_and(|c| c.final_state == SessionState::Refused),
        || format!("lemon case: {:?}", lemon.map(|c| c.final_state)),
    );
    v.note(format!("rate {:.0}%, {feasible} feasible rows obey 3n+8", report.planning_rate * 100.0));
    v
}

fn replan_protocol() -> Verdict {
    let mut v = Verdict::default();
    let (suite, pack, report) = suite_report("replan");
    v.check(suite.cases.len() == REPLAN_RUNS, || format!("{} runs", suite.cases.len()));
    for r in &report.cases {
        v.check(r.final_state == SessionState::Completed && r.passed(), || {
            format!("{}: {:?} {:?}", r.id, r.final_state, r.checks)
        });
    }

    // Independent re-run reading the event log directly.
    for case in &suite.cases {
        let spec = case.interrupt.as_ref().expect("replan cases interrupt");
        let mut session = Session::new(case.id.clone(), pack.clone(), oracle(&pack), case.seed);
        session.submit_request(&case.request).unwrap();
        while session.state() == SessionState::Executing && session.completed().len() < spec.boundary {
            session.advance().unwrap();
        }
        session.interrupt(&spec.request);
        let _ = session.run();

        let log = session.transcript();
        let replan_at = log.iter().position(|r| matches!(r.event, SessionEvent::Replanned { .. }));
        let done_before = replan_at.map(|i| {
            log[..i]
                .iter()
                .filter(|r| matches!(r.event, SessionEvent::StepCompleted { .. }))
                .count()
        });
        v.check(done_before == Some(spec.boundary), || {
            format!("{}: replanned after {done_before:?} steps, expected {}", case.id, spec.boundary)
        });

        let executed: Vec<_> = session.completed().iter().map(|s| s.canonical.clone()).collect();
        v.check(no_repeated_effects(&executed), || format!("{}: an effect was re-applied", case.id));

        let mut truth: Vec<String> = case.truth.iter().take(spec.boundary).cloned().collect();
        truth.extend(spec.truth.iter().cloned());
        v.check(
            session.state() == SessionState::Completed
                && goal_satisfied(TaskFamily::Drink, &canonical_steps(&truth), session.world()),
            || format!("{}: final cup does not satisfy the new request", case.id),
        );
    }
    v.note(format!("{} runs, (a) (b) (c) hold", suite.cases.len()));
    v
}

/// Dispatch target that audits every mutation of the wrapped world.
struct Audited {
    world: WorldState,
    initial_stocks: BTreeMap<String, f64>,
    object_count: usize,
    /// Detergent doses go into the dispenser rather than a cup.
    doses: BTreeMap<String, f64>,
    violations: Vec<String>,
}

impl Audited {
    fn new(world: WorldState) -> Self {
        Audited {
            initial_stocks: world.stocks.clone(),
            object_count: world.objects.len(),
            doses: BTreeMap::new(),
            world,
            violations: Vec::new(),
        }
    }
}

impl SkillTarget for Audited {
    fn apply_skill(&mut self, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
        let before = self.world.clone();
        let result = self.world.apply_skill(call);
        if result.is_err() && self.world != before {
            self.violations.push(format!("failed {} mutated the world", call.signature()));
        }
        if let Err(e) = self.world.check_invariants() {
            self.violations.push(format!("after {}: {e}", call.signature()));
        }
        if result.is_ok() && call.name == "add_detergent" {
            let flavor = call.arguments["flavor"].as_str().unwrap_or_default();
            *self.doses.entry(format!("{flavor} detergent")).or_default() += 1.0;
        }
        let dispensed = self.world.dispensed();
        for (name, start) in &self.initial_stocks {
            let now = self.world.stocks.get(name).copied().unwrap_or(0.0);
            let poured = dispensed.get(name).or(self.doses.get(name)).copied().unwrap_or(0.0);
            if (start - now - poured).abs() > VOLUME_TOLERANCE_ML {
                self.violations.push(format!("{name} not conserved: {start} != {now} + {poured}"));
            }
        }
        if self.world.objects.len() != self.object_count {
            self.violations.push("objects were created or destroyed".into());
        }
        result
    }

    fn world(&self) -> &WorldState {
        &self.world
    }
}

enum Goal {
    Drink(DrinkGoal),
    Dish(DishGoal),
}

fn random_drink(rng: &mut ChaCha8Rng) -> (String, Goal) {
    let mut menu = [
        ("boba", "boba"),
        ("strawberry", "strawberry jam"),
        ("mango", "mango jam"),
        ("matcha", "matcha powder"),
        ("taro", "taro"),
        ("blueberry", "blueberry"),
    ];
    menu.shuffle(rng);
    // Four additions plus the base fill a cup.
    let k = rng.random_range(0..=4);
    let chosen = &menu[..k];
    let request = if chosen.is_empty() {
        "I would like to order a cup of milk.".to_string()
    } else {
        let words: Vec<&str> = chosen.iter().map(|(w, _)| *w).collect();
        format!("Can I have a cup of milk with {}?", words.join(" and "))
    };
    (request, Goal::Drink(DrinkGoal::new(chosen.iter().map(|(_, m)| *m))))
}

fn random_dishes(rng: &mut ChaCha8Rng) -> (String, Goal, Vec<(String, usize)>) {
    let mut kinds = [("plate", "plates"), ("bowl", "bowls"), ("cup", "cups"), ("fork", "forks"), ("knife", "knives"), ("spoon", "spoons")];
    kinds.shuffle(rng);
    let distinct = rng.random_range(1..=3);
    let mut parts = Vec::new();
    let mut items = Vec::new();
    let mut stock = Vec::new();
    for (kind, plural) in &kinds[..distinct] {
        let n = rng.random_range(1..=2);
        parts.push(format!("{n} {}", if n == 1 { *kind } else { *plural }));
        let rack = match expected_rack(kind).unwrap() {
            "first rack" => 1,
            "second rack" => 2,
            _ => 3,
        };
        items.push((kind.to_string(), n, rack));
        // One spare of each kind stays dirty on the counter.
        stock.push((kind.to_string(), n + 1));
    }
    let detergent = if rng.random_bool(0.5) { "rose" } else { "original" };
    let list = match parts.len() {
        1 => parts[0].clone(),
        _ => format!("{} and {}", parts[..parts.len() - 1].join(", "), parts[parts.len() - 1]),
    };
    let request = format!("Please wash {list} with {detergent} flavor.");
    (
        request,
        Goal::Dish(DishGoal {
            items,
            detergent: detergent.into(),
        }),
        stock,
    )
}

fn closure_property() -> Verdict {
    let mut v = Verdict::default();
    let mut rng = ChaCha8Rng::seed_from_u64(CLOSURE_SEED);
    let mut invocations = 0usize;
    for i in 0..CLOSURE_CASES {
        let domain = if i % 2 == 0 { TaskFamily::Drink } else { TaskFamily::Dishwash };
        let mut pack = TaskPack::builtin(domain);
        let (request, goal) = match domain {
            TaskFamily::Drink => {
                let (r, g) = random_drink(&mut rng);
                (r, g)
            }
            TaskFamily::Dishwash => {
                let (r, g, stock) = random_dishes(&mut rng);
                pack.world = Arc::new(WorldConfig::builtin(domain).with_dish_counts(stock));
                (r, g)
            }
        };
        let provider = OracleProvider::new(pack.lexicon.clone());
        let mut ctx = PlanContext::new(pack.guidelines.clone(), &pack.planner_prompt);
        let steps = match plan(&mut ctx, &request, &provider) {
            Ok(PlanOutcome::Plan(p)) => p.steps,
            other => {
                v.failures.push(format!("'{request}': {other:?}"));
                continue;
            }
        };
        let mut target = Audited::new(WorldState::from_config(pack.world.clone(), i as u64));
        let config = ExecutorConfig::new(&pack.executor_prompt);
        let mut completed = Vec::new();
        let mut ok = true;
        for step in steps {
            let scene = interplan::vision::refresh_scene(&target.world, &pack.calibration);
            let result = execute_step(
                &step,
                &mut target,
                &scene,
                &completed,
                &provider,
                &pack.skills,
                &config,
                &mut |_, _| invocations += 1,
            );
            if result.status != StepStatus::Completed {
                v.failures.push(format!("'{request}': step '{}' {:?}", step.text, result.error));
                ok = false;
                break;
            }
            completed.push(step);
        }
        let satisfied = match &goal {
            Goal::Drink(g) => target.world.drink_completed(g),
            Goal::Dish(g) => target.world.dishes_completed(g),
        };
        v.check(!ok || satisfied, || format!("'{request}': completion predicate does not hold"));
        for violation in target.violations.drain(..) {
            v.failures.push(format!("'{request}': {violation}"));
        }
    }
    v.note(format!("{CLOSURE_CASES} requests, {invocations} audited invocations"));
    v
}

fn random_calibration(rng: &mut ChaCha8Rng) -> Calibration {
    loop {
        let mut r = || rng.random_range(-1.0..1.0);
        let m = nalgebra::Matrix3::new(
            0.001 * (1.0 + 0.5 * r()),
            0.0002 * r(),
            0.3 * r(),
            0.0002 * r(),
            -0.001 * (1.0 + 0.5 * r()),
            0.5 + 0.3 * r(),
            1e-5 * r(),
            1e-5 * r(),
            1.0,
        );
        if let Ok(cal) = Calibration::new(m, (1280, 720)) {
            return cal;
        }
    }
}

fn vision_accuracy() -> Verdict {
    let mut v = Verdict::default();
    let mut rng = ChaCha8Rng::seed_from_u64(CALIBRATION_SEED);
    let mut worst_fit = 0.0f64;
    let mut worst_trip = 0.0f64;
    for i in 0..CALIBRATIONS {
        let truth = random_calibration(&mut rng);
        let n = rng.random_range(4..=12);
        // Four corners of the image keep the set non-degenerate.
        let mut pixels = vec![
            Point::new(20.0, 20.0),
            Point::new(1260.0, 30.0),
            Point::new(1250.0, 700.0),
            Point::new(30.0, 690.0),
        ];
        while pixels.len() < n {
            pixels.push(Point::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0)));
        }
        let pairs: Vec<Correspondence> = pixels
            .iter()
            .map(|&pixel| Correspondence {
                pixel,
                robot: truth.pixel_to_robot(pixel),
            })
            .collect();
        let fit = match fit_homography(&pairs) {
            Ok(fit) => fit,
            Err(e) => {
                v.failures.push(format!("calibration {i}: {e}"));
                continue;
            }
        };
        worst_fit = worst_fit.max(fit.max_reprojection_error);
        v.check(fit.max_reprojection_error <= MAX_REPROJECTION_PX, || {
            format!("calibration {i}: reprojection error {:e}", fit.max_reprojection_error)
        });

        let domain = if i % 2 == 0 { TaskFamily::Drink } else { TaskFamily::Dishwash };
        let world = WorldState::reset(domain, i as u64);
        let scene = describe_scene(&detect(&world, &truth, &world.vocabulary()), &truth);
        for object in world.objects.values().filter(|o| matches!(o.location, Location::Zone(_))) {
            let err = scene
                .entries
                .iter()
                .filter(|e| e.label == object.label)
                .map(|e| Point::new(e.x, e.y).distance(object.pose))
                .fold(f64::INFINITY, f64::min);
            worst_trip = worst_trip.max(err);
            v.check(err <= MAX_ROUND_TRIP_M, || format!("calibration {i}: {} off by {err:e} m", object.label));
        }
    }
    v.note(format!("worst fit {worst_fit:.1e} px, worst round trip {worst_trip:.1e} m"));
    v
}

/// Invocation that the registry must reject, in one of several ways.
fn fuzz_invalid(rng: &mut ChaCha8Rng, registry: &SkillRegistry) -> ToolInvocation {
    let skills: Vec<_> = registry.skills().collect();
    let with_params: Vec<_> = skills.iter().filter(|s| !s.params.is_empty()).collect();
    let spec = with_params[rng.random_range(0..with_params.len())];
    let mut args = serde_json::Map::new();
    for p in &spec.params {
        let valid = match &p.kind {
            interplan::skills::ParamKind::Number => json!(0.3),
            interplan::skills::ParamKind::String => json!("milk"),
            interplan::skills::ParamKind::Enum { values } => json!(values[0]),
        };
        args.insert(p.name.clone(), valid);
    }
    let victim = spec.params[rng.random_range(0..spec.params.len())].clone();
    match rng.random_range(0..6) {
        0 => {
            let name = format!("{}_{}", spec.name, rng.random_range(0..1000));
            return ToolInvocation::new(name, Value::Object(args));
        }
        1 => {
            args.insert(format!("extra_{}", rng.random_range(0..100)), json!(1));
        }
        2 if victim.required => {
            args.remove(&victim.name);
        }
        3 => {
            let bad = match &victim.kind {
                interplan::skills::ParamKind::Number => json!("left"),
                _ => json!([1, 2]),
            };
            args.insert(victim.name.clone(), bad);
        }
        4 => {
            let bad = match &victim.kind {
                interplan::skills::ParamKind::Number => json!({"x": 1}),
                interplan::skills::ParamKind::String => json!("   "),
                interplan::skills::ParamKind::Enum { .. } => json!(format!("nowhere_{}", rng.random_range(0..100))),
            };
            args.insert(victim.name.clone(), bad);
        }
        _ => {
            args.insert(victim.name.clone(), json!(true));
        }
    }
    ToolInvocation::new(spec.name.clone(), Value::Object(args))
}

/// Counts what actually reaches the simulator.
struct Counting {
    world: WorldState,
    calls: usize,
}

impl SkillTarget for Counting {
    fn apply_skill(&mut self, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
        self.calls += 1;
        self.world.apply_skill(call)
    }

    fn world(&self) -> &WorldState {
        &self.world
    }
}

fn schema_and_dispatch() -> Verdict {
    let mut v = Verdict::default();
    for (domain, golden) in [
        (TaskFamily::Drink, include_str!("golden/drink.schema.json")),
        (TaskFamily::Dishwash, include_str!("golden/dishwash.schema.json")),
    ] {
        let first = schema_document(&SkillRegistry::builtin(domain).schemas());
        let second = schema_document(&SkillRegistry::builtin(domain).schemas());
        v.check(first == second && first == golden.trim_end(), || format!("{domain} schema changed"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(FUZZ_SEED);
    let mut rejected = 0;
    for i in 0..FUZZED_INVOCATIONS {
        let domain = if i % 2 == 0 { TaskFamily::Drink } else { TaskFamily::Dishwash };
        let registry = SkillRegistry::builtin(domain);
        let call = fuzz_invalid(&mut rng, &registry);
        let mut target = Counting {
            world: WorldState::reset(domain, 0),
            calls: 0,
        };
        let before = target.world.clone();
        let result = validate_and_dispatch(&call, &registry, &mut target);
        if result.is_err() && target.calls == 0 && target.world == before {
            rejected += 1;
        } else {
            v.failures.push(format!("{} reached the simulator", call.signature()));
        }
    }

    let mut runs = 0;
    for name in ["drinks", "replan", "dishwash"] {
        let (_, _, report) = suite_report(name);
        for c in &report.cases {
            runs += 1;
            let replayed = c.checks.iter().find(|k| k.name == "replay");
            v.check(replayed.is_some_and(|k| k.passed), || format!("{name}/{}: replay mismatch", c.id));
        }
    }
    v.note(format!("{rejected}/{FUZZED_INVOCATIONS} fuzzed calls rejected, {runs} runs replayed"));
    v
}

fn offline_only() -> Verdict {
    let mut v = Verdict::default();
    let fixture = |name: &str| -> Value {
        let path = format!("{}/fixtures/wire/{name}.json", env!("CARGO_MANIFEST_DIR"));
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    };
    v.check(matches!(parse_response(&fixture("response_text")), Ok(ProviderResponse::Text(_))), || {
        "text reply fixture".into()
    });
    v.check(
        matches!(parse_response(&fixture("response_tool_call")), Ok(ProviderResponse::Invocation(_))),
        || "tool call fixture".into(),
    );
    v.check(parse_response(&fixture("response_error")).is_err(), || "error fixture".into());
    let body = build_request("m", &[Message::system("s"), Message::user("u")], &[]);
    v.check(body["messages"].as_array().is_some_and(|m| m.len() == 2), || "request body".into());

    // With no key in the environment the client stops before any I/O.
    let provider = RemoteProvider::new(RemoteConfig {
        endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
        model: "m".into(),
        api_key_env: "INTERPLAN_ACCEPTANCE_UNSET_KEY".into(),
        timeout_secs: 1,
    })
    .unwrap();
    let reply = provider.complete(&[Message::system("s"), Message::user("u")], &[]);
    v.check(
        matches!(&reply, Err(ProviderError::ProviderUnavailable(m)) if m.contains("INTERPLAN_ACCEPTANCE_UNSET_KEY")),
        || format!("remote provider without key: {reply:?}"),
    );
    v.note("oracle provider only; wire format checked against recorded fixtures");
    v
}

type Criterion = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("drink suite table", drinks_table),
        ("dishwash suite table", dishwash_table),
        ("replan protocol", replan_protocol),
        ("closure property", closure_property),
        ("vision accuracy", vision_accuracy),
        ("schema, dispatch, replay", schema_and_dispatch),
        ("offline operation", offline_only),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let verdict = run();
        if verdict.failures.is_empty() {
            println!("PASS  {name:<26} {}", verdict.notes.join("; "));
        } else {
            failed += 1;
            println!("FAIL  {name:<26} {} problem(s)", verdict.failures.len());
            for f in verdict.failures.iter().take(10) {
                println!("      - {f}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
