//! Byte layout of RLNC packets.
//!
//! ```text
//! outer header (5 bytes)
//!   0..2  generation_id    u16, big-endian
//!   2     generation_size  u8 (G)
//!   3     field_size_log2  u8 (m, always 8)
//!   4     symbol_size      u8, bytes per symbol
//! inner header (2 bytes)
//!   5     packet_type      u8: 0 = uncoded, 1 = coded, 2 = ack
//!   6     symbol_count     u8 (n), 0 for ack
//! body
//!   G bytes coding vector            (coded only)
//!   n * symbol_size bytes of symbols (uncoded and coded)
//! ```
//!
//! See `FORMAT.md` at the repository root for a worked example.

use std::fmt;

use thiserror::Error;

use crate::codec::{CodedPayload, CodingParams};
use crate::gf256::GfElement;

pub const OUTER_HEADER_LEN: usize = 5;
pub const INNER_HEADER_LEN: usize = 2;
pub const HEADER_LEN: usize = OUTER_HEADER_LEN + INNER_HEADER_LEN;
/// Only GF(2^8) is carried on the wire.
pub const WIRE_FIELD_SIZE_LOG2: u8 = 8;
/// Local-experimental EtherType reserved for framing these packets.
pub const ETHERTYPE: u16 = 0x88B5;

const PACKET_TYPE_OFFSET: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated packet: need {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{extra} trailing bytes after a {expected}-byte packet")]
    TrailingBytes { expected: usize, extra: usize },
    #[error("unknown packet type {value:#04x} at byte {offset}")]
    UnknownPacketType { value: u8, offset: usize },
    #[error("unsupported field size 2^{0} (only 2^8)")]
    UnsupportedFieldSize(u8),
    #[error("invalid {field}: {reason}")]
    InvariantViolation { field: &'static str, reason: String },
}

fn violation(field: &'static str, reason: impl Into<String>) -> WireError {
    WireError::InvariantViolation {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OuterHeader {
    pub generation_id: u16,
    pub generation_size: u8,
    pub field_size_log2: u8,
    pub symbol_size: u8,
}

impl OuterHeader {
    pub fn for_params(generation_id: u16, params: &CodingParams) -> Self {
        OuterHeader {
            generation_id,
            generation_size: params.generation_size as u8,
            field_size_log2: params.field.ctx().m() as u8,
            symbol_size: params.symbol_size as u8,
        }
    }

    /// Whether this header describes the same coding setup as `params`.
    pub fn matches(&self, params: &CodingParams) -> bool {
        usize::from(self.generation_size) == params.generation_size
            && u32::from(self.field_size_log2) == params.field.ctx().m()
            && usize::from(self.symbol_size) == params.symbol_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PacketType {
    Uncoded = 0,
    Coded = 1,
    Ack = 2,
}

impl PacketType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(PacketType::Uncoded),
            1 => Some(PacketType::Coded),
            2 => Some(PacketType::Ack),
            _ => None,
        }
    }
}

impl fmt::Display for PacketType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketType::Uncoded => "uncoded",
            PacketType::Coded => "coded",
            PacketType::Ack => "ack",
        })
    }
}

impl std::str::FromStr for PacketType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uncoded" => Ok(PacketType::Uncoded),
            "coded" => Ok(PacketType::Coded),
            "ack" => Ok(PacketType::Ack),
            other => Err(format!("unknown packet type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InnerHeader {
    pub packet_type: PacketType,
    pub symbol_count: u8,
}

/// A packet as carried between nodes.
///
/// `coding_vector` is empty unless the packet is coded; `symbols` is empty
/// for acks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RlncPacket {
    pub outer: OuterHeader,
    pub inner: InnerHeader,
    pub coding_vector: Vec<u8>,
    pub symbols: Vec<u8>,
}

impl RlncPacket {
    pub fn uncoded(generation_id: u16, params: &CodingParams, symbols: &[GfElement]) -> Self {
        RlncPacket {
            outer: OuterHeader::for_params(generation_id, params),
            inner: InnerHeader {
                packet_type: PacketType::Uncoded,
                symbol_count: params.symbols_per_packet as u8,
            },
            coding_vector: Vec::new(),
            symbols: symbols.iter().map(|s| s.0).collect(),
        }
    }

    pub fn coded(generation_id: u16, params: &CodingParams, payload: &CodedPayload) -> Self {
        RlncPacket {
            outer: OuterHeader::for_params(generation_id, params),
            inner: InnerHeader {
                packet_type: PacketType::Coded,
                symbol_count: params.symbols_per_packet as u8,
            },
            coding_vector: payload.coding_vector.iter().map(|c| c.0).collect(),
            symbols: payload.coded_symbols.iter().map(|s| s.0).collect(),
        }
    }

    pub fn packet_type(&self) -> PacketType {
        self.inner.packet_type
    }

    pub fn generation_id(&self) -> u16 {
        self.outer.generation_id
    }

    pub fn is_ack(&self) -> bool {
        self.inner.packet_type == PacketType::Ack
    }

    /// Coding vector and symbols as field elements; `None` for acks and
    /// uncoded packets.
    pub fn coded_payload(&self) -> Option<CodedPayload> {
        (self.inner.packet_type == PacketType::Coded).then(|| CodedPayload {
            coding_vector: self.coding_vector.iter().copied().map(GfElement).collect(),
            coded_symbols: self.symbols.iter().copied().map(GfElement).collect(),
        })
    }

    pub fn symbol_elements(&self) -> Vec<GfElement> {
        self.symbols.iter().copied().map(GfElement).collect()
    }

    /// Serialized size implied by the headers.
    pub fn wire_len(&self) -> usize {
        expected_len(&self.outer, &self.inner)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        validate_outer(&self.outer)?;
        validate_inner(&self.inner)?;
        let cv_len = if self.inner.packet_type == PacketType::Coded {
            usize::from(self.outer.generation_size)
        } else {
            0
        };
        if self.coding_vector.len() != cv_len {
            return Err(violation(
                "coding_vector",
                format!("expected {cv_len} bytes, got {}", self.coding_vector.len()),
            ));
        }
        let sym_len = symbols_len(&self.outer, &self.inner);
        if self.symbols.len() != sym_len {
            return Err(violation(
                "symbols",
                format!("expected {sym_len} bytes, got {}", self.symbols.len()),
            ));
        }
        Ok(())
    }
}

fn validate_outer(outer: &OuterHeader) -> Result<(), WireError> {
    if outer.field_size_log2 != WIRE_FIELD_SIZE_LOG2 {
        return Err(WireError::UnsupportedFieldSize(outer.field_size_log2));
    }
    if outer.generation_size == 0 {
        return Err(violation("generation_size", "must be at least 1"));
    }
    if outer.symbol_size == 0 {
        return Err(violation("symbol_size", "must be at least 1"));
    }
    Ok(())
}

fn validate_inner(inner: &InnerHeader) -> Result<(), WireError> {
    match (inner.packet_type, inner.symbol_count) {
        (PacketType::Ack, 0) => Ok(()),
        (PacketType::Ack, _) => Err(violation("symbol_count", "must be 0 for ack packets")),
        (_, 0) => Err(violation("symbol_count", "must be at least 1 for data packets")),
        _ => Ok(()),
    }
}

fn symbols_len(outer: &OuterHeader, inner: &InnerHeader) -> usize {
    usize::from(inner.symbol_count) * usize::from(outer.symbol_size)
}

fn expected_len(outer: &OuterHeader, inner: &InnerHeader) -> usize {
    let cv = if inner.packet_type == PacketType::Coded {
        usize::from(outer.generation_size)
    } else {
        0
    };
    HEADER_LEN + cv + symbols_len(outer, inner)
}

pub fn serialize(p: &RlncPacket) -> Result<Vec<u8>, WireError> {
    p.validate()?;
    let mut out = Vec::with_capacity(p.wire_len());
    out.extend_from_slice(&p.outer.generation_id.to_be_bytes());
    out.push(p.outer.generation_size);
    out.push(p.outer.field_size_log2);
    out.push(p.outer.symbol_size);
    out.push(p.inner.packet_type as u8);
    out.push(p.inner.symbol_count);
    out.extend_from_slice(&p.coding_vector);
    out.extend_from_slice(&p.symbols);
    debug_assert_eq!(out.len(), p.wire_len());
    Ok(out)
}

pub fn deserialize(bytes: &[u8]) -> Result<RlncPacket, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let outer = OuterHeader {
        generation_id: u16::from_be_bytes([bytes[0], bytes[1]]),
        generation_size: bytes[2],
        field_size_log2: bytes[3],
        symbol_size: bytes[4],
    };
    validate_outer(&outer)?;
    let packet_type =
        PacketType::from_byte(bytes[PACKET_TYPE_OFFSET]).ok_or(WireError::UnknownPacketType {
            value: bytes[PACKET_TYPE_OFFSET],
            offset: PACKET_TYPE_OFFSET,
        })?;
    let inner = InnerHeader {
        packet_type,
        symbol_count: bytes[6],
    };
    validate_inner(&inner)?;

    let expected = expected_len(&outer, &inner);
    if bytes.len() < expected {
        return Err(WireError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(WireError::TrailingBytes {
            expected,
            extra: bytes.len() - expected,
        });
    }
    let body = &bytes[HEADER_LEN..];
    let cv_len = expected - HEADER_LEN - symbols_len(&outer, &inner);
    let (coding_vector, symbols) = body.split_at(cv_len);
    Ok(RlncPacket {
        outer,
        inner,
        coding_vector: coding_vector.to_vec(),
        symbols: symbols.to_vec(),
    })
}

/// Acknowledgement for a decoded generation.
pub fn make_ack(generation_id: u16, params: &CodingParams) -> RlncPacket {
    RlncPacket {
        outer: OuterHeader::for_params(generation_id, params),
        inner: InnerHeader {
            packet_type: PacketType::Ack,
            symbol_count: 0,
        },
        coding_vector: Vec::new(),
        symbols: Vec::new(),
    }
}
