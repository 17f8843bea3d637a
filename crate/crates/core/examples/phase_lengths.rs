use htiedge::{run_simulation, RunConfig, RunOptions};
use std::time::Instant;
fn main() {
    let phases: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let reps: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(5);
    for seed in 0..reps {
        let mut c = RunConfig::default();
        c.run.target_phases = Some(phases);
        c.run.master_seed = seed;
        let t = Instant::now();
        let r = run_simulation(&c, 0, &RunOptions::default()).unwrap();
        let ends: Vec<u64> = r.phases.iter().map(|p| p.end_time).collect();
        println!("seed {seed}: ticks {} in {:.2?} ({:.1} ns/tick) pass {} ends {:?}", r.summary.ticks, t.elapsed(),
            t.elapsed().as_nanos() as f64 / r.summary.ticks as f64, r.passed(), ends);
    }
}
