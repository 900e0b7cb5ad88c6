//! A full session: plan, execute, and an interrupt that arrives while the
//! robot is working.
//!
//! cargo run -p interplan --example interactive_session

use std::sync::Arc;

use interplan::guidelines::TaskFamily;
use interplan::llm::OracleProvider;
use interplan::orchestrator::Session;
use interplan::pack::TaskPack;
use interplan::transcript::SessionEvent;

fn main() {
    let pack = TaskPack::builtin(TaskFamily::Drink);
    let oracle = Arc::new(OracleProvider::new(pack.lexicon.clone()));
    let mut session = Session::new("demo", pack, oracle, 1).with_sink(|record| match &record.event {
        SessionEvent::Invocation { .. } | SessionEvent::Outcome { .. } => {}
        event => println!("{:<14} {}", event.event_type(), serde_json::to_string(event).unwrap()),
    });

    session.submit_request("I want a matcha latte.").unwrap();
    session.advance().unwrap();
    session.advance().unwrap();
    // Typed by the customer while step 3 would be next.
    session.interrupt("Sorry, I want boba milk without matcha instead.");
    session.run().unwrap();

    println!("final state: {:?}", session.state());
    for step in session.completed() {
        println!("  {}) {}", step.index, step.text);
    }
}
