//! Run the builtin benchmark suites against the oracle provider and print
//! the report tables.
//!
//! cargo run -p interplan --example eval_suites [drinks|replan|dishwash]

use std::sync::Arc;

use interplan::eval::{run_suite, Suite, SUITE_NAMES};
use interplan::llm::OracleProvider;
use interplan::pack::TaskPack;

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).collect();
    for name in SUITE_NAMES {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == name) {
            continue;
        }
        let suite = Suite::builtin(name).expect("builtin suite");
        let pack = TaskPack::builtin(suite.domain);
        let oracle = Arc::new(OracleProvider::new(pack.lexicon.clone()));
        let report = run_suite(&suite, &pack, oracle, false);
        println!("{}", report.to_table());
    }
}
