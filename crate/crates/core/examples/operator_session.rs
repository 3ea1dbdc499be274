//! Drive a mission through the operator API: list twins, command MANSIO,
//! trigger a Hypoxia broadcast, then read back statuses and the O2 series.

use seatwin::basestation::{ApiRequest, ApiResponse};
use seatwin::harness::{Mission, MissionConfig};
use seatwin::time::SimTime;
use seatwin::twin::{behavior, Platform};

fn main() {
    let mut config = MissionConfig::default_mission();
    config.duration_s = 1200.0;
    let mut m = Mission::new(config).unwrap();
    m.schedule_api(SimTime::from_secs(30), ApiRequest::SetBehavior { platform: Platform::Mansio, behavior_id: behavior::MEASURE_FAST });
    m.schedule_api(SimTime::from_secs(600), ApiRequest::Broadcast { event: "Hypoxia".into() });
    m.run_until(SimTime::from_secs(900));

    for x in m.api_exchanges() {
        println!("{}  {:?}", x.t, x.request);
        println!("    -> {}", serde_json_line(&x.response));
    }

    if let ApiResponse::Twins(twins) = m.api(ApiRequest::ListTwins) {
        println!("\nplatform    live  behavior  last status");
        for t in twins {
            println!(
                "{:<11} {:<5} {:>8}  {:?}",
                t.platform.name(),
                t.live.map_or("-".into(), |l| l.to_string()),
                t.behavior_id,
                t.last_status.map(|s| (s.behavior_id, s.status))
            );
        }
    }
    if let ApiResponse::O2Series(points) = m.api(ApiRequest::O2Series { platform: Platform::Mansio, from: Some(0.0), to: Some(120.0) }) {
        println!("\nMANSIO samples in the first two minutes: {}", points.len());
    }
}

fn serde_json_line(r: &ApiResponse) -> String {
    match r {
        ApiResponse::Command(c) => format!("command: synchronized {} in {} frame(s)", c.synchronized, c.frames),
        ApiResponse::Broadcast(b) => format!(
            "broadcast {}: delivered to {:?}",
            b.event,
            b.fates.iter().filter(|(_, f)| f.delivered).map(|(id, _)| *id).collect::<Vec<_>>()
        ),
        other => format!("{other:?}"),
    }
}
