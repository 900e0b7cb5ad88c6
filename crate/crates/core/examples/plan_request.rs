//! Plan a drink request, mark two steps done, then replan after the
//! customer changes their mind.
//!
//! cargo run -p interplan --example plan_request

use interplan::guidelines::TaskFamily;
use interplan::llm::OracleProvider;
use interplan::pack::TaskPack;
use interplan::planner::{plan, replan, PlanContext, PlanOutcome};

fn show(outcome: &PlanOutcome) {
    match outcome {
        PlanOutcome::Plan(p) => {
            for step in &p.steps {
                println!("  {}) {}", step.index, step.text);
            }
        }
        PlanOutcome::Refusal(r) => println!("  refused: {}", r.message),
    }
}

fn main() {
    let pack = TaskPack::builtin(TaskFamily::Drink);
    let oracle = OracleProvider::new(pack.lexicon.clone());
    let mut ctx = PlanContext::new(pack.guidelines.clone(), &pack.planner_prompt);

    let request = "I'd order a strawberry matcha milk with boba.";
    println!("request: {request}");
    let outcome = plan(&mut ctx, request, &oracle).expect("plan");
    show(&outcome);

    let PlanOutcome::Plan(first) = outcome else { return };
    ctx.completed.extend(first.steps.iter().take(2).cloned());

    let change = "Can I replace the strawberry with taro?";
    println!("after 2 steps: {change}");
    show(&replan(&mut ctx, change, &oracle).expect("replan"));

    let mut fresh = PlanContext::new(pack.guidelines.clone(), &pack.planner_prompt);
    let request = "I would like a cup of passion fruit milk.";
    println!("request: {request}");
    show(&plan(&mut fresh, request, &oracle).expect("plan"));
}
