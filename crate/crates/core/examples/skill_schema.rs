//! Print the function schemas of each domain and show validation rejecting
//! malformed invocations before they reach the simulator.
//!
//! cargo run -p interplan --example skill_schema

use interplan::guidelines::TaskFamily;
use interplan::skills::{schema_document, validate, SkillRegistry, ToolInvocation};
use serde_json::json;

fn main() {
    let drink = SkillRegistry::builtin(TaskFamily::Drink);
    println!("{}", schema_document(&drink.schemas()));

    let dish = SkillRegistry::builtin(TaskFamily::Dishwash);
    let names: Vec<&str> = dish.skills().map(|s| s.name.as_str()).collect();
    println!("dishwash skills: {}", names.join(", "));

    for call in [
        ToolInvocation::new("pour", json!({"ingredient": "milk", "location": "working_area"})),
        ToolInvocation::new("pour", json!({"ingredient": "milk"})),
        ToolInvocation::new("grasp_cup", json!({"x": "left", "y": 0.2})),
        ToolInvocation::new("fly", json!({})),
    ] {
        match validate(&call, &drink) {
            Ok(ok) => println!("ok       {}", ok.signature()),
            Err(e) => println!("rejected {}: {}", call.signature(), e.observation()),
        }
    }
}
