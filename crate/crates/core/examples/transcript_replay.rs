//! Record a dishwashing session as JSON lines and rebuild its final state
//! from the file alone.
//!
//! cargo run -p interplan --example transcript_replay

use std::sync::Arc;

use interplan::guidelines::TaskFamily;
use interplan::llm::OracleProvider;
use interplan::orchestrator::Session;
use interplan::pack::TaskPack;
use interplan::transcript::{read_jsonl_file, replay, write_jsonl};

fn main() {
    let pack = TaskPack::builtin(TaskFamily::Dishwash);
    let world_config = pack.world.clone();
    let oracle = Arc::new(OracleProvider::new(pack.lexicon.clone()));
    let mut session = Session::new("replay-demo", pack, oracle, 5);
    session.submit_request("Please clean the 2 dirty cups.").unwrap();
    session.run().unwrap();

    let path = std::env::temp_dir().join("interplan-replay-demo.jsonl");
    write_jsonl(session.transcript(), std::fs::File::create(&path).unwrap()).unwrap();
    println!("wrote {} records to {}", session.transcript().len(), path.display());

    let records = read_jsonl_file(&path).unwrap();
    let replayed = replay(&records, world_config).expect("consistent transcript");
    println!("replayed state: {:?}, {} steps completed", replayed.state, replayed.completed.len());
    assert_eq!(replayed.world.dispensed(), session.world().dispensed());
    println!("world state matches the live session");
    std::fs::remove_file(path).ok();
}
