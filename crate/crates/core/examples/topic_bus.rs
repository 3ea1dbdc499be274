//! Skills publishing on a shared bus, wildcard subscriptions, and the sync
//! topic list kept in the parameter store.

use seatwin::bus::{Bus, ParameterStore, Skill, TopicPath, TopicPattern};

fn main() {
    let bus: Bus<String> = Bus::new();
    let o2 = Skill::new(1, "o2", "/flux/skills").unwrap().publishes("o2/std").unwrap();
    let watcher = Skill::new(9, "watcher", "/flux/skills").unwrap();

    let everything = bus.subscribe(&TopicPattern::parse("/flux/**").unwrap(), &watcher).unwrap();
    let one_level = bus.subscribe(&TopicPattern::parse("/flux/skills/*/std").unwrap(), &watcher).unwrap();

    for (topic, msg) in [("o2/std", "231.5 uM"), ("o2/raw", "0x3fa2"), ("behavior/status", "RUNNING")] {
        let abs = o2.resolve(&TopicPath::parse(topic).unwrap()).unwrap();
        let n = bus.publish(&abs, msg.to_string(), &o2).unwrap();
        println!("{abs:<28} -> {n} subscriber(s)");
    }
    println!("\n/flux/** saw:");
    for m in everything.drain() {
        println!("  {} {}", m.topic, m.message);
    }
    println!("/flux/skills/*/std saw {} message(s)", one_level.drain().len());

    let mut params = ParameterStore::new();
    let list: Vec<TopicPattern> = ["skills/o2/std", "/flux/skills/behavior/*"]
        .iter()
        .map(|p| TopicPattern::parse(p).unwrap())
        .collect();
    params.set_sync_topics("flux", &list);
    let back = params.sync_topics("flux").unwrap().unwrap();
    println!("\nsync topics for flux: {}", back.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "));
}
