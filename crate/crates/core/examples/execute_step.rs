//! Ground one plan step into skill invocations against the simulator.
//!
//! cargo run -p interplan --example execute_step

use interplan::executor::{execute_step, ExecutorConfig};
use interplan::guidelines::TaskFamily;
use interplan::llm::OracleProvider;
use interplan::pack::TaskPack;
use interplan::planner::PlanStep;
use interplan::vision::refresh_scene;
use interplan::world::WorldState;

fn main() {
    let pack = TaskPack::builtin(TaskFamily::Drink);
    let oracle = OracleProvider::new(pack.lexicon.clone());
    let config = ExecutorConfig::new(&pack.executor_prompt);
    let mut world = WorldState::from_config(pack.world.clone(), 7);
    let mut completed = Vec::new();

    for (i, text) in [
        "get an empty cup and bring it to the working area",
        "add matcha powder to the working cup",
        "pour the milk into the working cup",
    ]
    .iter()
    .enumerate()
    {
        let step = PlanStep::new(i + 1, *text);
        let scene = refresh_scene(&world, &pack.calibration);
        println!("scene:\n{}", scene.rendered);
        println!("step {}: {}", step.index, step.text);
        let result = execute_step(
            &step,
            &mut world,
            &scene,
            &completed,
            &oracle,
            &pack.skills,
            &config,
            &mut |call, outcome| println!("  {} -> {}", call.signature(), outcome.observation),
        );
        println!("  status: {:?} in {} turns", result.status, result.turns_used);
        completed.push(step);
    }
    let cup = world.cups().find(|c| world.cup_volume(&c.id) > 0.0).expect("filled cup");
    println!("cup {} holds {} ml", cup.id, world.cup_volume(&cup.id));
}
