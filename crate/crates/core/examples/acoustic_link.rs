//! The shared 64 B/s acoustic medium: latency, distance-dependent loss,
//! broadcast fates and the burst-mode bulk transfer.

use seatwin::channel::{AcousticChannel, ChannelParams, LossModel, Position, SHIP};
use seatwin::time::SimTime;

fn main() {
    let mut ch = AcousticChannel::new(ChannelParams {
        sound_speed: 1500.0,
        byte_rate: 64.0,
        loss: LossModel { p0: 0.05, alpha: 2e-4 },
        seed: 7,
    })
    .unwrap();
    ch.add_endpoint(SHIP, Position::new(0.0, 0.0, 3.0)).unwrap();
    for (id, x) in [(1u8, 300.0), (2, 900.0), (3, 1800.0), (4, 3000.0)] {
        ch.add_endpoint(id, Position::new(x, 0.0, 20.0)).unwrap();
    }

    println!("id  distance  p(loss)  propagation");
    for id in 1..=4u8 {
        let d = ch.distance(SHIP, id).unwrap();
        println!(
            "{id}   {d:>7.1} m  {:>6.3}  {:>8.3} s",
            ch.loss_probability(SHIP, id).unwrap(),
            ch.propagation_delay(SHIP, id).unwrap().as_secs_f64()
        );
    }

    // three frames queued at once serialize one after another
    for _ in 0..3 {
        let d = ch.send_im(SimTime::ZERO, SHIP, 2, &[0u8; 64]).unwrap();
        println!("tx {}: start {} arrival {} dropped {:?}", d.tx_id, d.tx_start, d.arrival, d.dropped);
    }
    let fates = ch.broadcast_im(SimTime::from_secs(10), 4, &[0u8; 20]).unwrap();
    for d in &fates {
        println!("broadcast from 4 -> {}: {}", d.dst, if d.delivered() { "delivered" } else { "lost" });
    }
    let arrived = ch.poll(SimTime::from_secs(60));
    println!("{} frame(s) arrived by 60 s", arrived.len());

    let burst = ch.burst_transfer(SimTime::from_secs(60), SHIP, Some(1), 8625).unwrap();
    println!("burst 8625 B: {} s on the wire, done at {}", burst.transfer.as_secs_f64(), burst.completion);
    println!("{:?}", ch.summary());
}
