//! Hex and field-level views of wire packets.

use anyhow::{anyhow, bail, Context, Result};
use rlnc_core::wire::{InnerHeader, OuterHeader, WIRE_FIELD_SIZE_LOG2};
use rlnc_core::{deserialize, serialize, PacketType, RlncPacket};
use serde::{Deserialize, Serialize};

/// Field view used by `packet decode` output and `packet encode` input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketFields {
    pub generation_id: u16,
    pub generation_size: u8,
    #[serde(default = "default_field_size")]
    pub field_size_log2: u8,
    pub symbol_size: u8,
    pub packet_type: String,
    /// Derived from `symbols` when absent.
    #[serde(default)]
    pub symbol_count: Option<u8>,
    #[serde(default)]
    pub coding_vector: String,
    #[serde(default)]
    pub symbols: String,
}

fn default_field_size() -> u8 {
    WIRE_FIELD_SIZE_LOG2
}

const FIELD_ORDER: [&str; 8] = [
    "generation_id",
    "generation_size",
    "field_size_log2",
    "symbol_size",
    "packet_type",
    "symbol_count",
    "coding_vector",
    "symbols",
];

impl PacketFields {
    pub fn from_packet(p: &RlncPacket) -> Self {
        PacketFields {
            generation_id: p.outer.generation_id,
            generation_size: p.outer.generation_size,
            field_size_log2: p.outer.field_size_log2,
            symbol_size: p.outer.symbol_size,
            packet_type: p.inner.packet_type.to_string(),
            symbol_count: Some(p.inner.symbol_count),
            coding_vector: hex::encode(&p.coding_vector),
            symbols: hex::encode(&p.symbols),
        }
    }

    pub fn to_packet(&self) -> Result<RlncPacket> {
        let packet_type: PacketType = self.packet_type.parse().map_err(|e: String| anyhow!(e))?;
        let coding_vector = parse_hex(&self.coding_vector).context("coding_vector")?;
        let symbols = parse_hex(&self.symbols).context("symbols")?;
        let symbol_count = match self.symbol_count {
            Some(c) => c,
            None => {
                let size = usize::from(self.symbol_size.max(1));
                if symbols.len() % size != 0 {
                    bail!("{} symbol bytes is not a multiple of symbol_size {}", symbols.len(), size);
                }
                u8::try_from(symbols.len() / size).map_err(|_| anyhow!("more than 255 symbols"))?
            }
        };
        let packet = RlncPacket {
            outer: OuterHeader {
                generation_id: self.generation_id,
                generation_size: self.generation_size,
                field_size_log2: self.field_size_log2,
                symbol_size: self.symbol_size,
            },
            inner: InnerHeader {
                packet_type,
                symbol_count,
            },
            coding_vector,
            symbols,
        };
        packet.validate()?;
        Ok(packet)
    }

    /// Two-column `field,value` listing.
    pub fn to_csv(&self) -> String {
        let values = [
            self.generation_id.to_string(),
            self.generation_size.to_string(),
            self.field_size_log2.to_string(),
            self.symbol_size.to_string(),
            self.packet_type.clone(),
            self.symbol_count.map(|c| c.to_string()).unwrap_or_default(),
            self.coding_vector.clone(),
            self.symbols.clone(),
        ];
        let mut out = String::from("field,value\n");
        for (k, v) in FIELD_ORDER.iter().zip(values) {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    /// Parses either the JSON object or the `field,value` listing.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).context("invalid packet JSON");
        }
        let mut map = serde_json::Map::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "field,value" {
                continue;
            }
            let (k, v) = line
                .split_once(',')
                .ok_or_else(|| anyhow!("line {}: expected field,value", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            let value = match k {
                "packet_type" | "coding_vector" | "symbols" => serde_json::Value::String(v.to_string()),
                _ if v.is_empty() => continue,
                _ => serde_json::Value::Number(
                    v.parse::<u64>()
                        .map_err(|e| anyhow!("line {}: {k}: {e}", i + 1))?
                        .into(),
                ),
            };
            map.insert(k.to_string(), value);
        }
        serde_json::from_value(serde_json::Value::Object(map)).context("invalid packet fields")
    }
}

/// Decodes hex, ignoring whitespace. Errors name the character offset in
/// the original text.
pub fn parse_hex(text: &str) -> Result<Vec<u8>> {
    let digits: Vec<(usize, char)> = text.char_indices().filter(|(_, c)| !c.is_whitespace()).collect();
    if let Some((offset, c)) = digits.iter().find(|(_, c)| !c.is_ascii_hexdigit()) {
        bail!("invalid hex character {c:?} at offset {offset}");
    }
    if !digits.len().is_multiple_of(2) {
        let (offset, _) = digits[digits.len() - 1];
        bail!("odd number of hex digits: unpaired digit at offset {offset}");
    }
    let compact: String = digits.iter().map(|(_, c)| c).collect();
    Ok(hex::decode(compact)?)
}

pub fn decode_hex(text: &str) -> Result<(RlncPacket, PacketFields)> {
    let bytes = parse_hex(text)?;
    let packet = deserialize(&bytes)?;
    let fields = PacketFields::from_packet(&packet);
    Ok((packet, fields))
}

pub fn encode_fields(fields: &PacketFields) -> Result<String> {
    Ok(hex::encode(serialize(&fields.to_packet()?)?))
}
