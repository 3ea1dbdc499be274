//! Run one scenario on the built-in mission and print its report.
//!
//! cargo run --example scenario -- c 42

use seatwin::harness::{run_scenario, MissionConfig, Scenario};

fn main() {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().as_deref().unwrap_or("a").parse().unwrap();
    let mut config = MissionConfig::default_mission();
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("seed is an integer");
    }
    let report = run_scenario(scenario, &config, None).unwrap();
    print!("{}", report.to_text());
    std::process::exit(if report.passed { 0 } else { 1 });
}
