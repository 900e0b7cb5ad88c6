//! The chat-completions wire format used by the remote provider, without
//! touching the network: build a request body and decode canned replies.
//!
//! cargo run -p interplan --example remote_wire
//!
//! To talk to a live endpoint, export the key and use the CLI:
//! OPENAI_API_KEY=... interplan eval --suite drinks --provider remote --endpoint URL --model NAME

use interplan::guidelines::TaskFamily;
use interplan::llm::wire::{build_request, parse_response};
use interplan::llm::Message;
use interplan::skills::SkillRegistry;

fn main() {
    let tools = SkillRegistry::builtin(TaskFamily::Drink).schemas();
    let history = vec![
        Message::system("You control a robot arm."),
        Message::user("Current step: pour the milk into the working cup"),
    ];
    let body = build_request("some-model", &history, &tools[..1]);
    println!("{}", serde_json::to_string_pretty(&body).unwrap());

    for name in ["response_text", "response_tool_call", "response_error"] {
        let path = format!("{}/fixtures/wire/{name}.json", env!("CARGO_MANIFEST_DIR"));
        let reply: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        println!("{name}: {:?}", parse_response(&reply));
    }
}
