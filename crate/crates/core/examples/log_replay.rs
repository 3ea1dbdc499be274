//! Record a short mission, write its log, read it back and replay FLUX's
//! uplink into a fresh Digital Twin.

use std::collections::BTreeMap;
use std::io::BufReader;

use seatwin::basestation::{read_jsonl, replay, replay_into, LogKind, ReplayFilter};
use seatwin::bus::{Bus, TopicPattern};
use seatwin::harness::{Mission, MissionConfig};
use seatwin::time::SimTime;
use seatwin::twin::{Platform, Twin};

fn main() {
    let mut config = MissionConfig::default_mission();
    config.duration_s = 900.0;
    let mut mission = Mission::new(config.clone()).unwrap();
    mission.run();

    let path = std::env::temp_dir().join("seatwin-replay-example.jsonl");
    mission.basestation().log().write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    let loaded = read_jsonl(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    println!("{} records in {} ({} corrupt)", loaded.records.len(), path.display(), loaded.corrupt);

    let filter = ReplayFilter {
        pattern: Some(TopicPattern::parse("/flux/skills/o2/**").unwrap()),
        from: Some(SimTime::from_secs(300)),
        to: Some(SimTime::from_secs(330)),
        ..Default::default()
    };
    for r in replay(&loaded.records, &filter) {
        println!("  {} {:?} {}", r.t, r.kind, r.topic.as_deref().unwrap_or("-"));
    }

    let spec = config.platform(Platform::Flux).unwrap();
    let fresh = Twin::start(config.twin_config(spec).unwrap().digital(), Bus::new(), SimTime::ZERO).unwrap();
    let mut twins = BTreeMap::from([(Platform::Flux.id(), fresh)]);
    let flux_only: Vec<_> = loaded.records.iter().filter(|r| r.platform_id == Platform::Flux.id()).cloned().collect();
    let n = replay_into(&flux_only, &mut twins).unwrap();
    let live = mission.digital(Platform::Flux).unwrap();
    let replayed = &twins[&Platform::Flux.id()];
    println!("replayed {n} uplink records");
    println!("live DT last sample     {:?}", live.last_remote_o2());
    println!("replayed DT last sample {:?}", replayed.last_remote_o2());
    assert_eq!(live.last_remote_o2(), replayed.last_remote_o2());
    let uplinks = loaded.records.iter().filter(|r| r.kind == LogKind::Uplink).count();
    println!("{uplinks} uplink records in total");
}
