//! Packet-processing model of a network-coding switch.
//!
//! Ingress buffers each data packet into a single flat register partitioned
//! among generations. Once a generation holds `G` packets, the replication
//! stage asks egress for `replicas_per_trigger` fresh linear combinations,
//! each with its own random coefficients. An ack from the receiver flushes
//! the generation and is forwarded upstream.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, CodedPayload, CodingParams, CoefficientSource, SourceSymbolMatrix};
use crate::gf256::{GfElement, MulAlgorithm};
use crate::wire::{PacketType, RlncPacket};

pub const DEFAULT_ACK_MEMORY: usize = 64;

/// Whether a switch combines systematic traffic or recombines coded traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMode {
    #[default]
    Encode,
    Recode,
}

impl fmt::Display for SwitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchMode::Encode => "encode",
            SwitchMode::Recode => "recode",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchError {
    #[error("packet parameters disagree with switch config: {0}")]
    ParamMismatch(String),
    #[error("{mode} switch cannot buffer {packet_type} packets")]
    UnexpectedPacketType {
        mode: SwitchMode,
        packet_type: PacketType,
    },
    #[error("replica count must be at least 1")]
    InvalidReplicaCount,
    #[error("invalid switch config: {0}")]
    InvalidConfig(String),
    #[error("generation {generation_id} holds {fill} of {need} packets")]
    InsufficientBuffer {
        generation_id: u16,
        fill: usize,
        need: usize,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone)]
pub struct SwitchConfig {
    pub max_generations: usize,
    pub replicas_per_trigger: usize,
    pub params: CodingParams,
    pub mode: SwitchMode,
    pub mul_algorithm: MulAlgorithm,
    pub coeff_seed: u64,
    /// Capacity of the ring of recently acked generation ids.
    pub ack_memory: usize,
}

impl SwitchConfig {
    pub fn new(params: CodingParams, mode: SwitchMode) -> Self {
        SwitchConfig {
            max_generations: 16,
            replicas_per_trigger: params.generation_size,
            mul_algorithm: params.field.algorithm(),
            params,
            mode,
            coeff_seed: 0,
            ack_memory: DEFAULT_ACK_MEMORY,
        }
    }

    pub fn validate(&self) -> Result<(), SwitchError> {
        if self.max_generations == 0 {
            return Err(SwitchError::InvalidConfig("max_generations must be at least 1".into()));
        }
        if self.replicas_per_trigger == 0 {
            return Err(SwitchError::InvalidReplicaCount);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Stored; the generation is not yet full.
    BufferedAwaitingFill,
    /// The generation was acked recently.
    AlreadyAcked,
    /// No free slot for a new generation.
    GenerationTableFull,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EgressEvent {
    Emit(RlncPacket),
    Drop(DropReason),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwitchOutput {
    pub events: Vec<EgressEvent>,
}

impl SwitchOutput {
    fn drop(reason: DropReason) -> Self {
        SwitchOutput {
            events: vec![EgressEvent::Drop(reason)],
        }
    }

    pub fn emitted(&self) -> impl Iterator<Item = &RlncPacket> {
        self.events.iter().filter_map(|e| match e {
            EgressEvent::Emit(p) => Some(p),
            EgressEvent::Drop(_) => None,
        })
    }

    pub fn dropped(&self) -> Option<DropReason> {
        self.events.iter().find_map(|e| match e {
            EgressEvent::Drop(r) => Some(*r),
            EgressEvent::Emit(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    base: usize,
    fill: usize,
    generation: Option<u16>,
}

/// One flat register split into equal regions, one per generation slot.
///
/// Each region holds `G` rows of `payload_len + G` elements: the symbols
/// followed by the coding vector (left zero in encode mode).
#[derive(Debug, Clone)]
pub struct GenerationBuffer {
    storage: Vec<GfElement>,
    slots: Vec<Slot>,
    active_ids: BTreeMap<u16, usize>,
    generation_size: usize,
    payload_len: usize,
}

impl GenerationBuffer {
    pub fn new(max_generations: usize, generation_size: usize, payload_len: usize) -> Self {
        let row = payload_len + generation_size;
        let region = generation_size * row;
        GenerationBuffer {
            storage: vec![GfElement::ZERO; max_generations * region],
            slots: (0..max_generations)
                .map(|i| Slot {
                    base: i * region,
                    fill: 0,
                    generation: None,
                })
                .collect(),
            active_ids: BTreeMap::new(),
            generation_size,
            payload_len,
        }
    }

    fn row_len(&self) -> usize {
        self.payload_len + self.generation_size
    }

    fn region_len(&self) -> usize {
        self.generation_size * self.row_len()
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn storage_len(&self) -> usize {
        self.storage.len()
    }

    pub fn active_count(&self) -> usize {
        self.active_ids.len()
    }

    pub fn is_active(&self, generation_id: u16) -> bool {
        self.active_ids.contains_key(&generation_id)
    }

    pub fn fill_count(&self, generation_id: u16) -> Option<usize> {
        self.active_ids.get(&generation_id).map(|&s| self.slots[s].fill)
    }

    pub fn base_offset(&self, generation_id: u16) -> Option<usize> {
        self.active_ids.get(&generation_id).map(|&s| self.slots[s].base)
    }

    /// Storage ranges owned by each active generation.
    pub fn regions(&self) -> Vec<(u16, Range<usize>)> {
        self.active_ids
            .iter()
            .map(|(&g, &s)| {
                let base = self.slots[s].base;
                (g, base..base + self.region_len())
            })
            .collect()
    }

    /// Checks bookkeeping: regions in bounds and pairwise disjoint, fill
    /// counts within `G`, slot ownership consistent with `active_ids`.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.active_ids.len() > self.slots.len() {
            return Err(format!(
                "{} active generations exceed {} slots",
                self.active_ids.len(),
                self.slots.len()
            ));
        }
        let regions = self.regions();
        for (i, (g, r)) in regions.iter().enumerate() {
            if r.end > self.storage.len() {
                return Err(format!("generation {g} region {r:?} out of bounds"));
            }
            for (h, other) in &regions[i + 1..] {
                if r.start < other.end && other.start < r.end {
                    return Err(format!("generation {g} region {r:?} overlaps {h} region {other:?}"));
                }
            }
        }
        for (&g, &s) in &self.active_ids {
            let slot = &self.slots[s];
            if slot.generation != Some(g) {
                return Err(format!("slot {s} does not belong to generation {g}"));
            }
            if slot.fill > self.generation_size {
                return Err(format!("generation {g} fill {} exceeds {}", slot.fill, self.generation_size));
            }
        }
        let owned = self.slots.iter().filter(|s| s.generation.is_some()).count();
        if owned != self.active_ids.len() {
            return Err(format!("{owned} owned slots but {} active ids", self.active_ids.len()));
        }
        Ok(())
    }

    fn slot_of(&self, generation_id: u16) -> Option<usize> {
        self.active_ids.get(&generation_id).copied()
    }

    fn allocate(&mut self, generation_id: u16) -> Option<usize> {
        let s = self.slots.iter().position(|s| s.generation.is_none())?;
        self.slots[s].generation = Some(generation_id);
        self.slots[s].fill = 0;
        self.active_ids.insert(generation_id, s);
        Some(s)
    }

    fn push_row(&mut self, slot: usize, symbols: &[GfElement], coding_vector: Option<&[GfElement]>) {
        let row_len = self.row_len();
        let Slot { base, fill, .. } = self.slots[slot];
        debug_assert!(fill < self.generation_size);
        let start = base + fill * row_len;
        let row = &mut self.storage[start..start + row_len];
        let (sym, cv) = row.split_at_mut(self.payload_len);
        sym.copy_from_slice(symbols);
        match coding_vector {
            Some(c) => cv.copy_from_slice(c),
            None => cv.fill(GfElement::ZERO),
        }
        self.slots[slot].fill += 1;
    }

    fn row(&self, slot: usize, i: usize) -> (&[GfElement], &[GfElement]) {
        let start = self.slots[slot].base + i * self.row_len();
        self.storage[start..start + self.row_len()].split_at(self.payload_len)
    }

    /// Frees the generation's slot. Returns whether it was active.
    fn free(&mut self, generation_id: u16) -> bool {
        let Some(s) = self.active_ids.remove(&generation_id) else {
            return false;
        };
        self.slots[s].generation = None;
        self.slots[s].fill = 0;
        true
    }
}

/// A single-threaded network-coding switch.
#[derive(Debug, Clone)]
pub struct Switch {
    max_generations: usize,
    replicas_per_trigger: usize,
    params: CodingParams,
    mode: SwitchMode,
    ack_memory: usize,
    buffer: GenerationBuffer,
    coeffs: CoefficientSource,
    recently_acked: VecDeque<u16>,
}

impl Switch {
    pub fn new(config: SwitchConfig) -> Result<Self, SwitchError> {
        config.validate()?;
        let params = CodingParams {
            field: config.params.field.with_algorithm(config.mul_algorithm),
            ..config.params
        };
        Ok(Switch {
            buffer: GenerationBuffer::new(config.max_generations, params.generation_size, params.payload_len()),
            coeffs: CoefficientSource::for_params(config.coeff_seed, &params),
            max_generations: config.max_generations,
            replicas_per_trigger: config.replicas_per_trigger,
            mode: config.mode,
            ack_memory: config.ack_memory,
            recently_acked: VecDeque::with_capacity(config.ack_memory),
            params,
        })
    }

    pub fn params(&self) -> &CodingParams {
        &self.params
    }

    pub fn mode(&self) -> SwitchMode {
        self.mode
    }

    pub fn max_generations(&self) -> usize {
        self.max_generations
    }

    pub fn replicas_per_trigger(&self) -> usize {
        self.replicas_per_trigger
    }

    pub fn buffer(&self) -> &GenerationBuffer {
        &self.buffer
    }

    /// Field multiplications executed by this switch so far.
    pub fn mul_count(&self) -> u64 {
        self.params.field.mul_count()
    }

    pub fn is_recently_acked(&self, generation_id: u16) -> bool {
        self.recently_acked.contains(&generation_id)
    }

    pub fn ingress(&mut self, packet: &RlncPacket) -> Result<SwitchOutput, SwitchError> {
        if !packet.outer.matches(&self.params) {
            return Err(SwitchError::ParamMismatch(format!(
                "packet G={} m={} symbol_size={}, switch G={} m={} symbol_size={}",
                packet.outer.generation_size,
                packet.outer.field_size_log2,
                packet.outer.symbol_size,
                self.params.generation_size,
                self.params.field.ctx().m(),
                self.params.symbol_size,
            )));
        }
        let g = packet.generation_id();
        if packet.is_ack() {
            self.handle_ack(g);
            return Ok(SwitchOutput {
                events: vec![EgressEvent::Emit(packet.clone())],
            });
        }
        if usize::from(packet.inner.symbol_count) != self.params.symbols_per_packet
            || packet.symbols.len() != self.params.payload_len()
        {
            return Err(SwitchError::ParamMismatch(format!(
                "packet carries {} symbols, switch expects {}",
                packet.inner.symbol_count, self.params.symbols_per_packet
            )));
        }
        if self.mode == SwitchMode::Encode && packet.packet_type() == PacketType::Coded {
            return Err(SwitchError::UnexpectedPacketType {
                mode: self.mode,
                packet_type: packet.packet_type(),
            });
        }
        if packet.packet_type() == PacketType::Coded && packet.coding_vector.len() != self.params.generation_size {
            return Err(SwitchError::ParamMismatch("coding vector length".into()));
        }
        if self.is_recently_acked(g) {
            return Ok(SwitchOutput::drop(DropReason::AlreadyAcked));
        }

        let slot = match self.buffer.slot_of(g) {
            Some(s) => s,
            None => match self.buffer.allocate(g) {
                Some(s) => s,
                None => return Ok(SwitchOutput::drop(DropReason::GenerationTableFull)),
            },
        };

        let fill = self.buffer.slots[slot].fill;
        if fill < self.params.generation_size {
            let symbols = packet.symbol_elements();
            match (self.mode, packet.packet_type()) {
                (SwitchMode::Encode, _) => self.buffer.push_row(slot, &symbols, None),
                (SwitchMode::Recode, PacketType::Coded) => {
                    let cv: Vec<GfElement> = packet.coding_vector.iter().copied().map(GfElement).collect();
                    self.buffer.push_row(slot, &symbols, Some(&cv));
                }
                (SwitchMode::Recode, _) => {
                    // Uncoded rows are placed by arrival order.
                    let mut unit = vec![GfElement::ZERO; self.params.generation_size];
                    unit[fill] = GfElement::ONE;
                    self.buffer.push_row(slot, &symbols, Some(&unit));
                }
            }
            if fill + 1 < self.params.generation_size {
                return Ok(SwitchOutput::drop(DropReason::BufferedAwaitingFill));
            }
        }

        // Filled (now or earlier and not yet acked): emit fresh combinations.
        let mut events = Vec::with_capacity(self.replicas_per_trigger);
        for _ in 0..self.replicas_per_trigger {
            let payload = self.egress_code(g)?;
            events.push(EgressEvent::Emit(RlncPacket::coded(g, &self.params, &payload)));
        }
        Ok(SwitchOutput { events })
    }

    /// Flushes a generation. Unknown or already flushed ids are ignored.
    pub fn handle_ack(&mut self, generation_id: u16) {
        if !self.buffer.free(generation_id) {
            return;
        }
        if self.ack_memory == 0 {
            return;
        }
        if self.recently_acked.len() == self.ack_memory {
            self.recently_acked.pop_front();
        }
        self.recently_acked.push_back(generation_id);
    }

    /// Changes the number of packets emitted per fill trigger.
    pub fn control_set_replicas(&mut self, k: usize) -> Result<(), SwitchError> {
        if k == 0 {
            return Err(SwitchError::InvalidReplicaCount);
        }
        self.replicas_per_trigger = k;
        Ok(())
    }

    /// One linear combination of a filled generation.
    pub fn egress_code(&mut self, generation_id: u16) -> Result<CodedPayload, SwitchError> {
        let g = self.params.generation_size;
        let slot = self.buffer.slot_of(generation_id);
        let fill = slot.map_or(0, |s| self.buffer.slots[s].fill);
        let Some(slot) = slot.filter(|_| fill == g) else {
            return Err(SwitchError::InsufficientBuffer {
                generation_id,
                fill,
                need: g,
            });
        };
        let payload = match self.mode {
            SwitchMode::Encode => {
                let rows = (0..g).map(|i| self.buffer.row(slot, i).0.to_vec()).collect();
                let sources = SourceSymbolMatrix::new(&self.params, rows)?;
                codec::encode(&self.params, &sources, &mut self.coeffs)?
            }
            SwitchMode::Recode => {
                let buffered: Vec<CodedPayload> = (0..g)
                    .map(|i| {
                        let (sym, cv) = self.buffer.row(slot, i);
                        CodedPayload {
                            coding_vector: cv.to_vec(),
                            coded_symbols: sym.to_vec(),
                        }
                    })
                    .collect();
                codec::recode(&self.params, &buffered, &mut self.coeffs)?
            }
        };
        Ok(payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_with;
    use crate::gf256::Field;
    use crate::wire::make_ack;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(g: usize, n: usize) -> CodingParams {
        CodingParams::new(g, n, Field::gf256(MulAlgorithm::LogTable)).unwrap()
    }

    fn switch(g: usize, n: usize, mode: SwitchMode, replicas: usize) -> Switch {
        let mut cfg = SwitchConfig::new(params(g, n), mode);
        cfg.replicas_per_trigger = replicas;
        cfg.max_generations = 2;
        cfg.coeff_seed = 3;
        Switch::new(cfg).unwrap()
    }

    fn sources(p: &CodingParams, seed: u64) -> SourceSymbolMatrix {
        SourceSymbolMatrix::random(p, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn uncoded(p: &CodingParams, gen: u16, src: &SourceSymbolMatrix, i: usize) -> RlncPacket {
        RlncPacket::uncoded(gen, p, src.row(i))
    }

    #[test]
    fn fill_trigger_emits_replicas() {
        let p = params(4, 3);
        let src = sources(&p, 1);
        let mut sw = switch(4, 3, SwitchMode::Encode, 3);
        for i in 0..3 {
            let out = sw.ingress(&uncoded(&p, 9, &src, i)).unwrap();
            assert_eq!(out.dropped(), Some(DropReason::BufferedAwaitingFill));
            assert_eq!(out.emitted().count(), 0);
            sw.buffer().check_invariants().unwrap();
        }
        let out = sw.ingress(&uncoded(&p, 9, &src, 3)).unwrap();
        let emitted: Vec<_> = out.emitted().collect();
        assert_eq!(emitted.len(), 3);
        for pkt in emitted {
            assert_eq!(pkt.packet_type(), PacketType::Coded);
            assert_eq!(pkt.generation_id(), 9);
            let payload = pkt.coded_payload().unwrap();
            let check = encode_with(&p, &src, &payload.coding_vector).unwrap();
            assert_eq!(check.coded_symbols, payload.coded_symbols);
        }
    }

    #[test]
    fn post_fill_packets_refresh() {
        let p = params(2, 2);
        let src = sources(&p, 2);
        let mut sw = switch(2, 2, SwitchMode::Encode, 2);
        sw.ingress(&uncoded(&p, 1, &src, 0)).unwrap();
        let first: Vec<_> = sw.ingress(&uncoded(&p, 1, &src, 1)).unwrap().emitted().cloned().collect();
        let again: Vec<_> = sw.ingress(&uncoded(&p, 1, &src, 1)).unwrap().emitted().cloned().collect();
        assert_eq!(again.len(), 2);
        assert_ne!(first, again);
        assert_eq!(sw.buffer().fill_count(1), Some(2));
    }

    #[test]
    fn ack_frees_and_blocks_late_packets() {
        let p = params(2, 2);
        let src = sources(&p, 3);
        let mut sw = switch(2, 2, SwitchMode::Encode, 1);
        sw.ingress(&uncoded(&p, 5, &src, 0)).unwrap();
        assert_eq!(sw.buffer().active_count(), 1);

        let out = sw.ingress(&make_ack(5, &p)).unwrap();
        assert_eq!(out.emitted().next(), Some(&make_ack(5, &p)));
        assert_eq!(sw.buffer().active_count(), 0);
        sw.buffer().check_invariants().unwrap();

        let out = sw.ingress(&uncoded(&p, 5, &src, 1)).unwrap();
        assert_eq!(out.dropped(), Some(DropReason::AlreadyAcked));
        assert_eq!(out.emitted().count(), 0);
    }

    #[test]
    fn ack_is_idempotent_and_ignores_unknown() {
        let p = params(2, 2);
        let src = sources(&p, 4);
        let mut sw = switch(2, 2, SwitchMode::Encode, 1);
        sw.ingress(&uncoded(&p, 5, &src, 0)).unwrap();
        sw.handle_ack(77);
        assert_eq!(sw.buffer().active_count(), 1);
        assert!(!sw.is_recently_acked(77));
        sw.handle_ack(5);
        let snapshot = (sw.buffer().regions(), sw.recently_acked.clone());
        sw.handle_ack(5);
        assert_eq!((sw.buffer().regions(), sw.recently_acked.clone()), snapshot);
    }

    #[test]
    fn ack_memory_is_bounded() {
        let p = params(1, 1);
        let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Encode);
        cfg.ack_memory = 2;
        let mut sw = Switch::new(cfg).unwrap();
        for g in 0..3u16 {
            sw.ingress(&RlncPacket::uncoded(g, &p, &[GfElement(1)])).unwrap();
            sw.handle_ack(g);
        }
        assert!(!sw.is_recently_acked(0));
        assert!(sw.is_recently_acked(1) && sw.is_recently_acked(2));
        let out = sw.ingress(&RlncPacket::uncoded(0, &p, &[GfElement(1)])).unwrap();
        assert_eq!(out.emitted().count(), 1);
    }

    #[test]
    fn table_full_drops_new_generation() {
        let p = params(3, 1);
        let src = sources(&p, 5);
        let mut sw = switch(3, 1, SwitchMode::Encode, 1);
        sw.ingress(&uncoded(&p, 1, &src, 0)).unwrap();
        sw.ingress(&uncoded(&p, 2, &src, 0)).unwrap();
        let out = sw.ingress(&uncoded(&p, 3, &src, 0)).unwrap();
        assert_eq!(out.dropped(), Some(DropReason::GenerationTableFull));
        assert!(!sw.buffer().is_active(3));
        sw.handle_ack(1);
        let out = sw.ingress(&uncoded(&p, 3, &src, 0)).unwrap();
        assert_eq!(out.dropped(), Some(DropReason::BufferedAwaitingFill));
        sw.buffer().check_invariants().unwrap();
    }

    #[test]
    fn param_mismatch_is_rejected() {
        let other = params(3, 2);
        let mut sw = switch(4, 2, SwitchMode::Encode, 1);
        let pkt = RlncPacket::uncoded(1, &other, &[GfElement(1), GfElement(2)]);
        assert!(matches!(sw.ingress(&pkt), Err(SwitchError::ParamMismatch(_))));
        let short = params(4, 1);
        let pkt = RlncPacket::uncoded(1, &short, &[GfElement(1)]);
        assert!(matches!(sw.ingress(&pkt), Err(SwitchError::ParamMismatch(_))));
    }

    #[test]
    fn encode_switch_rejects_coded_input() {
        let p = params(2, 1);
        let mut sw = switch(2, 1, SwitchMode::Encode, 1);
        let payload = CodedPayload {
            coding_vector: vec![GfElement(1), GfElement(2)],
            coded_symbols: vec![GfElement(3)],
        };
        assert!(matches!(
            sw.ingress(&RlncPacket::coded(1, &p, &payload)),
            Err(SwitchError::UnexpectedPacketType { .. })
        ));
    }

    #[test]
    fn control_replicas() {
        let p = params(2, 1);
        let src = sources(&p, 6);
        let mut sw = switch(2, 1, SwitchMode::Encode, 1);
        assert_eq!(sw.control_set_replicas(0), Err(SwitchError::InvalidReplicaCount));
        sw.control_set_replicas(5).unwrap();
        assert_eq!(sw.buffer().active_count(), 0);
        sw.ingress(&uncoded(&p, 1, &src, 0)).unwrap();
        assert_eq!(sw.ingress(&uncoded(&p, 1, &src, 1)).unwrap().emitted().count(), 5);
    }

    #[test]
    fn egress_before_fill() {
        let p = params(3, 1);
        let src = sources(&p, 7);
        let mut sw = switch(3, 1, SwitchMode::Encode, 1);
        assert_eq!(
            sw.egress_code(4),
            Err(SwitchError::InsufficientBuffer {
                generation_id: 4,
                fill: 0,
                need: 3
            })
        );
        sw.ingress(&uncoded(&p, 4, &src, 0)).unwrap();
        assert!(matches!(
            sw.egress_code(4),
            Err(SwitchError::InsufficientBuffer { fill: 1, .. })
        ));
    }

    #[test]
    fn encode_egress_delegates_to_codec() {
        let p = params(3, 2);
        let src = sources(&p, 8);
        let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Encode);
        cfg.coeff_seed = 42;
        let mut sw = Switch::new(cfg).unwrap();
        let slot = sw.buffer.allocate(0).unwrap();
        for i in 0..3 {
            sw.buffer.push_row(slot, src.row(i), None);
        }
        let mut coeffs = CoefficientSource::new(42);
        for _ in 0..4 {
            let expected = codec::encode(&p, &src, &mut coeffs).unwrap();
            assert_eq!(sw.egress_code(0).unwrap(), expected);
        }
    }

    #[test]
    fn recode_egress_combines_coding_vectors() {
        let p = params(4, 3);
        let src = sources(&p, 9);
        let mut coeffs = CoefficientSource::new(10);
        let mut sw = switch(4, 3, SwitchMode::Recode, 4);
        let mut inputs = Vec::new();
        for _ in 0..4 {
            let payload = codec::encode(&p, &src, &mut coeffs).unwrap();
            inputs.push(payload.coding_vector.clone());
            let out = sw.ingress(&RlncPacket::coded(2, &p, &payload)).unwrap();
            for pkt in out.emitted() {
                let payload = pkt.coded_payload().unwrap();
                assert!(!inputs.contains(&payload.coding_vector));
                let check = encode_with(&p, &src, &payload.coding_vector).unwrap();
                assert_eq!(check.coded_symbols, payload.coded_symbols);
            }
        }
        assert_eq!(sw.mul_count(), 4 * 4 * (4 + 3));
    }

    #[test]
    fn recode_switch_accepts_uncoded_as_unit_rows() {
        let p = params(3, 2);
        let src = sources(&p, 11);
        let mut sw = switch(3, 2, SwitchMode::Recode, 2);
        let mut emitted = Vec::new();
        for i in 0..3 {
            emitted.extend(sw.ingress(&uncoded(&p, 1, &src, i)).unwrap().emitted().cloned());
        }
        assert_eq!(emitted.len(), 2);
        for pkt in emitted {
            let payload = pkt.coded_payload().unwrap();
            let check = encode_with(&p, &src, &payload.coding_vector).unwrap();
            assert_eq!(check.coded_symbols, payload.coded_symbols);
        }
    }

    #[test]
    fn invalid_config() {
        let mut cfg = SwitchConfig::new(params(2, 1), SwitchMode::Encode);
        cfg.max_generations = 0;
        assert!(matches!(Switch::new(cfg.clone()), Err(SwitchError::InvalidConfig(_))));
        cfg.max_generations = 1;
        cfg.replicas_per_trigger = 0;
        assert!(matches!(Switch::new(cfg), Err(SwitchError::InvalidReplicaCount)));
    }
}
