//! Encode an oxygen sample, split a long event into acoustic frames, and put
//! both back together.

use seatwin::codec::{
    decode, encode, fragment, reassemble, Direction, Envelope, O2Event, SchemaRegistry, StandardO2, TwinMessage,
};

fn main() {
    let reg = SchemaRegistry::standard();
    for schema in reg.iter() {
        let fields: Vec<String> = schema.fields.iter().map(|f| format!("{}:{:?}", f.name, f.kind)).collect();
        println!("type {} {:<15} {}", schema.type_id, schema.name, fields.join(" "));
    }

    let sample = TwinMessage::StandardO2(StandardO2 {
        timestamp: 1_600_000_000_000,
        oxygen: 231.5,
        saturation: 87.25,
        temperature: 4.5,
    });
    let env = Envelope {
        platform_id: 2,
        skill_id: 1,
        topic_index: 0,
        direction: Direction::PtToDt,
        sequence: 17,
        type_id: sample.type_id(),
        payload: sample.to_values(),
    };
    let bytes = encode(&env, &reg).unwrap();
    println!("\nStandardO2 envelope, {} bytes: {}", bytes.len(), hex(&bytes));
    assert_eq!(decode(&bytes, &reg).unwrap(), env);

    let long = TwinMessage::O2Event(O2Event { event: "Hypoxia near the lander, oxygen falling ".repeat(4) });
    let env = Envelope { type_id: long.type_id(), payload: long.to_values(), direction: Direction::Broadcast, ..env };
    let bytes = encode(&env, &reg).unwrap();
    let mut frames = fragment(&bytes, 9).unwrap();
    println!("\nO2Event of {} bytes -> {} frames", bytes.len(), frames.len());
    for f in &frames {
        println!("  [{}/{}] {:>2} B  {}", f.fragment_index + 1, f.fragment_count, f.wire_len(), hex(&f.to_bytes()[..12]));
    }
    frames.reverse();
    let back = decode(&reassemble(&frames).unwrap(), &reg).unwrap();
    println!("reassembled out of order: {:?}", TwinMessage::from_values(back.type_id, &back.payload).unwrap());
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}
