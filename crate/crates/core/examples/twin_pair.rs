//! A Physical Twin and its Digital Twin wired together by hand, without the
//! channel: samples go up, a command comes down, a forged one is refused.

use std::time::Duration;

use seatwin::bus::Bus;
use seatwin::codec::{Direction, SetBehavior};
use seatwin::time::SimTime;
use seatwin::twin::{behavior, Platform, Twin, TwinConfig, Via};

fn main() {
    let mut cfg = TwinConfig::new(Platform::Mansio);
    cfg.measurement_period = Duration::from_secs(120);
    cfg.effects.insert(behavior::HYPOXIA, vec!["lights_on".into()]);
    let mut pt = Twin::start(cfg.clone(), Bus::new(), SimTime::ZERO).unwrap();
    let mut dt = Twin::start(cfg.digital(), Bus::new(), SimTime::ZERO).unwrap();

    println!("sync table:");
    for (i, s) in pt.sync_table().iter().enumerate() {
        println!("  {i}: {} (skill {})", s.topic, s.skill_id);
    }

    let mut t = SimTime::ZERO;
    while t < SimTime::from_secs(600) {
        pt.on_tick(t);
        for out in pt.take_outbound() {
            let msg = seatwin::codec::TwinMessage::from_values(out.envelope.type_id, &out.envelope.payload).unwrap();
            let topic = dt.deliver_remote(out.envelope.topic_index, msg, t).unwrap();
            println!("{t}  up   {topic}");
        }
        t = pt.next_wakeup().unwrap_or(SimTime::from_secs(600));
    }

    let cmd = dt.guarded_sync_command(SetBehavior { behavior_id: behavior::HYPOXIA }, t).unwrap().unwrap();
    println!("{t}  down SetBehavior{{{}}} as {}", behavior::HYPOXIA, cmd.direction);
    let accepted = pt.sync_in_command(&cmd, Via::Basestation, t).unwrap();
    println!("      PT accepted: {accepted:?}");
    println!("      effects: {:?}", pt.effect_log().iter().map(|e| &e.effect).collect::<Vec<_>>());

    let mut forged = cmd.clone();
    forged.direction = Direction::Broadcast;
    let err = pt.sync_in_command(&forged, Via::Peer(3), t).unwrap_err();
    println!("      forged broadcast command: {err}");
    println!("PT behavior {:?}, {} change(s)", pt.current_behavior(), pt.behavior_changes());
}
