//! Byte-exact packets checked into `tests/golden/`.

use rlnc_core::codec::encode_with;
use rlnc_core::{
    deserialize, make_ack, serialize, CodingParams, Field, GfElement, MulAlgorithm, PacketType, RlncPacket,
    SourceSymbolMatrix,
};

fn golden(name: &str) -> Vec<u8> {
    let path = format!("{}/tests/golden/{name}.hex", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap();
    text.split_whitespace()
        .map(|b| u8::from_str_radix(b, 16).unwrap())
        .collect()
}

fn params() -> CodingParams {
    CodingParams::new(4, 3, Field::gf256(MulAlgorithm::LogTable)).unwrap()
}

fn sources() -> SourceSymbolMatrix {
    SourceSymbolMatrix::from_bytes(
        &params(),
        &[
            vec![0x11, 0x22, 0x33],
            vec![0x44, 0x55, 0x66],
            vec![0x77, 0x88, 0x99],
            vec![0xAA, 0xBB, 0xCC],
        ],
    )
    .unwrap()
}

#[test]
fn coded_vector() {
    let p = params();
    let cv: Vec<GfElement> = [1, 2, 3, 4].map(GfElement).to_vec();
    let payload = encode_with(&p, &sources(), &cv).unwrap();
    let packet = RlncPacket::coded(7, &p, &payload);
    let bytes = golden("coded");
    assert_eq!(serialize(&packet).unwrap(), bytes);
    let back = deserialize(&bytes).unwrap();
    assert_eq!(back.packet_type(), PacketType::Coded);
    assert_eq!(back.symbols, vec![0x92, 0xDB, 0x5E]);
}

#[test]
fn uncoded_vector() {
    let p = params();
    let packet = RlncPacket::uncoded(7, &p, sources().row(0));
    assert_eq!(serialize(&packet).unwrap(), golden("uncoded"));
}

#[test]
fn ack_vector() {
    assert_eq!(serialize(&make_ack(7, &params())).unwrap(), golden("ack"));
}
