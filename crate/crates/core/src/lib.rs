pub mod guidelines;
pub mod skills;
pub mod world;
pub mod vision;
pub mod llm;
pub mod planner;
pub mod executor;
pub mod pack;
pub mod transcript;
pub mod orchestrator;
pub mod eval;
