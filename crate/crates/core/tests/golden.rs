use std::path::Path;

use seatwin::codec::golden::{check_case, load_corpus};
use seatwin::codec::{decode, reassemble, Frame, SchemaRegistry, TwinMessage};

fn corpus() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn every_case_round_trips_bit_exact() {
    let reg = SchemaRegistry::standard();
    let cases = load_corpus(&corpus()).unwrap();
    assert_eq!(cases.len(), 5);
    for case in &cases {
        check_case(case, &reg).unwrap_or_else(|e| panic!("{e}"));
    }
}

#[test]
fn decoded_messages() {
    let cases = load_corpus(&corpus()).unwrap();
    let reg = SchemaRegistry::standard();
    let msg = |stem: &str| {
        let case = cases.iter().find(|c| c.stem == stem).unwrap();
        let frames: Vec<Frame> = case.frames.iter().map(|b| Frame::from_bytes(b).unwrap()).collect();
        let env = decode(&reassemble(&frames).unwrap(), &reg).unwrap();
        TwinMessage::from_values(env.type_id, &env.payload).unwrap()
    };
    match msg("flux_o2_sample") {
        TwinMessage::StandardO2(s) => {
            assert_eq!(s.timestamp, 1_600_000_000_000);
            assert_eq!(s.oxygen, 231.5);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(msg("flux_hypoxia_broadcast"), TwinMessage::O2Event(e) if e.event == "Hypoxia"));
    assert!(matches!(msg("viator_set_behavior"), TwinMessage::SetBehavior(b) if b.behavior_id == 5));
}

#[test]
fn a_flipped_bit_is_caught() {
    let reg = SchemaRegistry::standard();
    let mut case = load_corpus(&corpus()).unwrap().remove(0);
    let last = case.frames[0].len() - 1;
    case.frames[0][last] ^= 0x01;
    assert!(check_case(&case, &reg).is_err());
}
