//! Deterministic discrete-event simulation of a sender, a chain of coding
//! switches and a receiver connected by lossy links.
//!
//! Time advances in abstract ticks. Packets cross links as serialized
//! bytes. A switch may be given a processing budget: arriving data packets
//! wait in a bounded queue and each costs one work unit per parsed field
//! element plus one per field multiplication it triggers. A packet arriving
//! at a full queue is dropped. This is how overload loss arises.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, CodingParams, CoefficientSource, DecoderState, Innovation, SourceSymbolMatrix};
use crate::gf256::{Field, GfContext, GfElement, MulAlgorithm};
use crate::switch::{Switch, SwitchConfig, SwitchError, SwitchMode};
use crate::wire::{self, PacketType, RlncPacket, WireError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("switch at node {node}: {source}")]
    Switch { node: usize, source: SwitchError },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Drop probability for packets travelling away from the sender.
    pub loss: f64,
    /// Drop probability for acks travelling towards the sender.
    #[serde(default)]
    pub ack_loss: f64,
    /// Propagation delay in ticks, at least 1.
    pub delay: u64,
}

impl Default for Link {
    fn default() -> Self {
        Link {
            loss: 0.0,
            ack_loss: 0.0,
            delay: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessingBudget {
    /// Work units available per tick.
    pub work_per_tick: u64,
    /// Data packets that may wait for processing.
    pub queue_capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Sender,
    Switch { budget: Option<ProcessingBudget> },
    Receiver,
}

/// A chain: sender, switches, receiver; `links[i]` joins node i and i + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

impl Topology {
    pub fn chain(switches: usize, link: Link, budget: Option<ProcessingBudget>) -> Self {
        let mut nodes = vec![Node::Sender];
        nodes.extend((0..switches).map(|_| Node::Switch { budget }));
        nodes.push(Node::Receiver);
        Topology {
            links: vec![link; switches + 1],
            nodes,
        }
    }

    pub fn switch_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Switch { .. })).count()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.nodes.len();
        if n < 2 {
            return Err(config_err("topology needs a sender and a receiver"));
        }
        if self.nodes[0] != Node::Sender {
            return Err(config_err("first node must be the sender"));
        }
        if self.nodes[n - 1] != Node::Receiver {
            return Err(config_err("last node must be the receiver"));
        }
        for (i, node) in self.nodes[1..n - 1].iter().enumerate() {
            match node {
                Node::Switch { budget } => {
                    if let Some(b) = budget {
                        if b.work_per_tick == 0 || b.queue_capacity == 0 {
                            return Err(config_err(format!(
                                "node {}: processing budget needs work_per_tick >= 1 and queue_capacity >= 1",
                                i + 1
                            )));
                        }
                    }
                }
                _ => return Err(config_err(format!("node {} must be a switch", i + 1))),
            }
        }
        if self.links.len() != n - 1 {
            return Err(config_err(format!("{} nodes need {} links, got {}", n, n - 1, self.links.len())));
        }
        for (i, l) in self.links.iter().enumerate() {
            for (name, p) in [("loss", l.loss), ("ack_loss", l.ack_loss)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(config_err(format!("link {i}: {name} {p} outside [0, 1]")));
                }
            }
            if l.delay == 0 {
                return Err(config_err(format!("link {i}: delay must be at least 1 tick")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenderKind {
    /// Source packets sent uncoded, once each.
    #[default]
    Systematic,
    /// The sender encodes; downstream switches recode.
    PreCoded,
}

#[derive(Debug, Clone)]
pub struct SenderBehavior {
    pub kind: SenderKind,
    pub params: CodingParams,
    pub generations: u32,
    /// Ticks between consecutive sender transmissions.
    pub gap: u64,
    /// Extra coded packets per generation beyond `G` (pre-coded only).
    pub redundancy: usize,
}

/// Counters collected over one run.
///
/// `packets_*` count every link transmission, data and acks alike.
/// `mul_operation_count` counts multiplications executed by switches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub packets_sent: u64,
    pub packets_lost: u64,
    pub packets_delivered: u64,
    pub generations_attempted: u64,
    pub generations_decoded: u64,
    pub redundant_packets_received: u64,
    pub mul_operation_count: u64,
    pub switch_data_arrivals: u64,
    pub switch_overload_drops: u64,
    pub switch_coded_emitted: u64,
    pub acks_received_by_sender: u64,
    pub decode_errors: u64,
    pub residual_switch_slots: u64,
    pub ticks: u64,
}

impl RunMetrics {
    /// Fraction of data packets reaching a switch that overload discarded.
    pub fn switch_drop_rate(&self) -> f64 {
        ratio(self.switch_overload_drops, self.switch_data_arrivals)
    }

    /// Fraction of link transmissions lost to channel loss.
    pub fn link_loss_rate(&self) -> f64 {
        ratio(self.packets_lost, self.packets_sent)
    }

    pub fn muls_per_emitted_packet(&self) -> f64 {
        ratio(self.mul_operation_count, self.switch_coded_emitted)
    }

    fn values(&self) -> [u64; 14] {
        [
            self.packets_sent,
            self.packets_lost,
            self.packets_delivered,
            self.generations_attempted,
            self.generations_decoded,
            self.redundant_packets_received,
            self.mul_operation_count,
            self.switch_data_arrivals,
            self.switch_overload_drops,
            self.switch_coded_emitted,
            self.acks_received_by_sender,
            self.decode_errors,
            self.residual_switch_slots,
            self.ticks,
        ]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// RunMetrics columns in CSV order, followed by the derived drop rate.
pub const METRIC_COLUMNS: [&str; 15] = [
    "packets_sent",
    "packets_lost",
    "packets_delivered",
    "generations_attempted",
    "generations_decoded",
    "redundant_packets_received",
    "mul_operation_count",
    "switch_data_arrivals",
    "switch_overload_drops",
    "switch_coded_emitted",
    "acks_received_by_sender",
    "decode_errors",
    "residual_switch_slots",
    "ticks",
    "switch_drop_rate",
];

/// Config columns that precede the metrics.
pub const CONFIG_COLUMNS: [&str; 7] = [
    "generation_size",
    "symbols_per_packet",
    "mode",
    "loss",
    "seed",
    "agg",
    "runs",
];

pub fn csv_header() -> String {
    let mut cols: Vec<&str> = CONFIG_COLUMNS.to_vec();
    cols.extend(METRIC_COLUMNS);
    cols.push("error");
    cols.join(",")
}

// Stream identifiers for seed derivation.
const STREAM_SOURCES: u64 = 1;
const STREAM_SENDER_COEFFS: u64 = 2;
const STREAM_LINK: u64 = 0x100;
const STREAM_SWITCH: u64 = 0x10000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

struct SwitchNode {
    switch: Switch,
    budget: Option<ProcessingBudget>,
    queue: VecDeque<RlncPacket>,
    /// Work left on the packet in service and the output it will release.
    in_service: Option<(u64, Vec<RlncPacket>)>,
}

impl SwitchNode {
    fn busy(&self) -> bool {
        self.in_service.is_some() || !self.queue.is_empty()
    }
}

enum NodeState {
    Sender,
    Switch(Box<SwitchNode>),
    Receiver,
}

struct ReceiverGen {
    decoder: DecoderState,
    uncoded_seen: usize,
    decoded: bool,
}

struct Sim<'a> {
    topology: &'a Topology,
    params: CodingParams,
    nodes: Vec<NodeState>,
    link_rngs: Vec<(ChaCha8Rng, ChaCha8Rng)>,
    events: BTreeMap<u64, Vec<(usize, Vec<u8>)>>,
    sources: Vec<SourceSymbolMatrix>,
    receiver: HashMap<u16, ReceiverGen>,
    metrics: RunMetrics,
    now: u64,
}

impl Sim<'_> {
    fn transmit(&mut self, from: usize, to: usize, packet: &RlncPacket) -> Result<(), SimError> {
        let bytes = wire::serialize(packet)?;
        let (link_idx, downstream) = if to > from { (from, true) } else { (to, false) };
        let link = self.topology.links[link_idx];
        let (fwd, rev) = &mut self.link_rngs[link_idx];
        let (rng, loss) = if downstream { (fwd, link.loss) } else { (rev, link.ack_loss) };
        self.metrics.packets_sent += 1;
        if rng.gen::<f64>() < loss {
            self.metrics.packets_lost += 1;
            return Ok(());
        }
        self.events.entry(self.now + link.delay).or_default().push((to, bytes));
        Ok(())
    }

    fn deliver(&mut self, node: usize, bytes: &[u8]) -> Result<(), SimError> {
        self.metrics.packets_delivered += 1;
        let packet = wire::deserialize(bytes)?;
        let sw = match &mut self.nodes[node] {
            NodeState::Sender => {
                if packet.is_ack() {
                    self.metrics.acks_received_by_sender += 1;
                }
                return Ok(());
            }
            NodeState::Receiver => return self.receive(node, packet),
            NodeState::Switch(sw) => sw,
        };

        // Acks bypass the processing budget and continue upstream.
        if packet.is_ack() {
            let out = sw
                .switch
                .ingress(&packet)
                .map_err(|source| SimError::Switch { node, source })?;
            let forwards: Vec<RlncPacket> = out.emitted().cloned().collect();
            for p in forwards {
                self.transmit(node, node - 1, &p)?;
            }
            return Ok(());
        }

        self.metrics.switch_data_arrivals += 1;
        match sw.budget {
            None => {
                let out = process_data(sw, node, &packet, &mut self.metrics)?;
                for p in out {
                    self.transmit(node, node + 1, &p)?;
                }
            }
            Some(budget) if sw.queue.len() >= budget.queue_capacity => {
                self.metrics.switch_overload_drops += 1;
            }
            Some(_) => sw.queue.push_back(packet),
        }
        Ok(())
    }

    fn receive(&mut self, node: usize, packet: RlncPacket) -> Result<(), SimError> {
        let g = packet.generation_id();
        let params = &self.params;
        let state = self.receiver.entry(g).or_insert_with(|| ReceiverGen {
            decoder: DecoderState::new(params.fresh()),
            uncoded_seen: 0,
            decoded: false,
        });
        let payload = match packet.packet_type() {
            PacketType::Ack => return Ok(()),
            PacketType::Coded => packet.coded_payload().expect("coded packet"),
            PacketType::Uncoded => {
                // Sources are sent once each over FIFO links, so arrival order
                // is source order whenever the generation can complete.
                if state.uncoded_seen >= params.generation_size {
                    self.metrics.redundant_packets_received += 1;
                    return Ok(());
                }
                let p = codec::CodedPayload::systematic(
                    state.uncoded_seen,
                    params.generation_size,
                    packet.symbol_elements(),
                );
                state.uncoded_seen += 1;
                p
            }
        };
        if state.decoder.consume(&payload)? == Innovation::Redundant {
            self.metrics.redundant_packets_received += 1;
        }
        if state.decoder.is_complete() && !state.decoded {
            state.decoded = true;
            let recovered = state.decoder.recover()?;
            match self.sources.get(usize::from(g)) {
                Some(truth) if *truth == recovered => self.metrics.generations_decoded += 1,
                _ => self.metrics.decode_errors += 1,
            }
            let ack = wire::make_ack(g, &self.params);
            self.transmit(node, node - 1, &ack)?;
        }
        Ok(())
    }

    /// Advances budgeted switches by one tick of work.
    fn serve(&mut self) -> Result<(), SimError> {
        for node in 0..self.nodes.len() {
            let NodeState::Switch(sw) = &mut self.nodes[node] else {
                continue;
            };
            let Some(budget) = sw.budget else { continue };
            let mut available = budget.work_per_tick;
            let mut released = Vec::new();
            loop {
                if sw.in_service.is_none() {
                    let Some(packet) = sw.queue.pop_front() else { break };
                    let before = sw.switch.mul_count();
                    let out = process_data(sw, node, &packet, &mut self.metrics)?;
                    let parse = (packet.symbols.len() + packet.coding_vector.len()) as u64;
                    let work = parse + (sw.switch.mul_count() - before);
                    sw.in_service = Some((work, out));
                }
                let (remaining, _) = sw.in_service.as_mut().expect("in service");
                if *remaining > available {
                    *remaining -= available;
                    break;
                }
                available -= *remaining;
                let (_, out) = sw.in_service.take().expect("in service");
                released.extend(out);
            }
            for p in released {
                self.transmit(node, node + 1, &p)?;
            }
        }
        Ok(())
    }

    fn switches_busy(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, NodeState::Switch(sw) if sw.busy()))
    }
}

/// Runs the switch ingress on a data packet and returns what it emits.
fn process_data(
    sw: &mut SwitchNode,
    node: usize,
    packet: &RlncPacket,
    metrics: &mut RunMetrics,
) -> Result<Vec<RlncPacket>, SimError> {
    let before = sw.switch.mul_count();
    let out = sw
        .switch
        .ingress(packet)
        .map_err(|source| SimError::Switch { node, source })?;
    metrics.mul_operation_count += sw.switch.mul_count() - before;
    let emitted: Vec<RlncPacket> = out.emitted().cloned().collect();
    metrics.switch_coded_emitted += emitted.len() as u64;
    Ok(emitted)
}

fn validate_run(topology: &Topology, switches: &[SwitchConfig], sender: &SenderBehavior) -> Result<(), SimError> {
    topology.validate()?;
    if switches.len() != topology.switch_count() {
        return Err(config_err(format!(
            "topology has {} switches but {} switch configs were given",
            topology.switch_count(),
            switches.len()
        )));
    }
    if sender.generations == 0 || sender.generations > u32::from(u16::MAX) + 1 {
        return Err(config_err("generations must be in 1..=65536"));
    }
    if sender.gap == 0 {
        return Err(config_err("sender gap must be at least 1 tick"));
    }
    if sender.params.field.ctx().m() != u32::from(wire::WIRE_FIELD_SIZE_LOG2) {
        return Err(config_err("only GF(2^8) can be carried on the wire"));
    }
    let sp = &sender.params;
    let mut coded = sender.kind == SenderKind::PreCoded;
    for (i, cfg) in switches.iter().enumerate() {
        let p = &cfg.params;
        if p.generation_size != sp.generation_size
            || p.symbols_per_packet != sp.symbols_per_packet
            || p.symbol_size != sp.symbol_size
            || p.field.ctx() != sp.field.ctx()
        {
            return Err(config_err(format!(
                "switch {i} params (G={}, n={}, symbol_size={}) disagree with sender (G={}, n={}, symbol_size={})",
                p.generation_size,
                p.symbols_per_packet,
                p.symbol_size,
                sp.generation_size,
                sp.symbols_per_packet,
                sp.symbol_size
            )));
        }
        if coded && cfg.mode == SwitchMode::Encode {
            return Err(config_err(format!(
                "switch {i} is in encode mode but receives coded traffic"
            )));
        }
        cfg.validate().map_err(|source| SimError::Switch { node: i + 1, source })?;
        coded = true;
    }
    Ok(())
}

/// Builds the sender's transmission list for every generation.
fn sender_packets(sender: &SenderBehavior, sources: &[SourceSymbolMatrix], seed: u64) -> Result<Vec<RlncPacket>, SimError> {
    let params = sender.params.fresh();
    let g = params.generation_size;
    let mut coeffs = CoefficientSource::for_params(derive_seed(seed, STREAM_SENDER_COEFFS), &params);
    let mut out = Vec::new();
    for (gen, src) in sources.iter().enumerate() {
        let gen = gen as u16;
        match sender.kind {
            SenderKind::Systematic => {
                out.extend((0..g).map(|i| RlncPacket::uncoded(gen, &params, src.row(i))));
            }
            SenderKind::PreCoded => {
                let mut check = DecoderState::new(params.clone());
                while !check.is_complete() {
                    let payload = codec::encode(&params, src, &mut coeffs)?;
                    if check.consume(&payload)? == Innovation::Innovative {
                        out.push(RlncPacket::coded(gen, &params, &payload));
                    }
                }
                for _ in 0..sender.redundancy {
                    let payload = codec::encode(&params, src, &mut coeffs)?;
                    out.push(RlncPacket::coded(gen, &params, &payload));
                }
            }
        }
    }
    Ok(out)
}

/// Runs one simulation to quiescence.
pub fn run(
    topology: &Topology,
    switches: &[SwitchConfig],
    sender: &SenderBehavior,
    seed: u64,
) -> Result<RunMetrics, SimError> {
    validate_run(topology, switches, sender)?;
    let params = sender.params.fresh();

    let mut source_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SOURCES));
    let sources: Vec<SourceSymbolMatrix> = (0..sender.generations)
        .map(|_| SourceSymbolMatrix::random(&params, &mut source_rng))
        .collect();
    let outgoing = sender_packets(sender, &sources, seed)?;

    let mut configs = switches.iter();
    let mut nodes = Vec::with_capacity(topology.nodes.len());
    for (i, node) in topology.nodes.iter().enumerate() {
        nodes.push(match node {
            Node::Sender => NodeState::Sender,
            Node::Receiver => NodeState::Receiver,
            Node::Switch { budget } => {
                let mut cfg = configs.next().expect("validated").clone();
                cfg.params = cfg.params.fresh();
                cfg.coeff_seed = derive_seed(seed ^ cfg.coeff_seed, STREAM_SWITCH + i as u64);
                let switch = Switch::new(cfg).map_err(|source| SimError::Switch { node: i, source })?;
                NodeState::Switch(Box::new(SwitchNode {
                    switch,
                    budget: *budget,
                    queue: VecDeque::new(),
                    in_service: None,
                }))
            }
        });
    }

    let link_rngs = (0..topology.links.len() as u64)
        .map(|i| {
            (
                ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_LINK + 2 * i)),
                ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_LINK + 2 * i + 1)),
            )
        })
        .collect();

    let mut sim = Sim {
        topology,
        params,
        nodes,
        link_rngs,
        events: BTreeMap::new(),
        sources,
        receiver: HashMap::new(),
        metrics: RunMetrics {
            generations_attempted: u64::from(sender.generations),
            ..RunMetrics::default()
        },
        now: 0,
    };

    let mut next_send = 0usize;
    loop {
        if next_send < outgoing.len() && sim.now == next_send as u64 * sender.gap {
            sim.transmit(0, 1, &outgoing[next_send])?;
            next_send += 1;
        }
        if let Some(batch) = sim.events.remove(&sim.now) {
            for (node, bytes) in batch {
                sim.deliver(node, &bytes)?;
            }
        }
        sim.serve()?;

        let busy = sim.switches_busy();
        let next_event = sim.events.keys().next().copied();
        let next_tx = (next_send < outgoing.len()).then(|| next_send as u64 * sender.gap);
        let next = if busy {
            Some(sim.now + 1)
        } else {
            match (next_event, next_tx) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        };
        match next {
            Some(t) => sim.now = t,
            None => break,
        }
    }

    sim.metrics.ticks = sim.now;
    sim.metrics.residual_switch_slots = sim
        .nodes
        .iter()
        .map(|n| match n {
            NodeState::Switch(sw) => sw.switch.buffer().active_count() as u64,
            _ => 0,
        })
        .sum();
    Ok(sim.metrics)
}

/// Parameter grid for [`sweep`]; one cell per combination.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub generation_sizes: Vec<usize>,
    pub symbols_per_packet: Vec<usize>,
    pub modes: Vec<SwitchMode>,
    pub losses: Vec<f64>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &generation_size in &self.generation_sizes {
            for &symbols_per_packet in &self.symbols_per_packet {
                for &mode in &self.modes {
                    for &loss in &self.losses {
                        cells.push(SweepCell {
                            generation_size,
                            symbols_per_packet,
                            mode,
                            loss,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// Settings shared by every sweep cell.
///
/// Encode cells pair a systematic sender with encoding switches; recode
/// cells pair a pre-coding sender with recoding switches. Each fill emits
/// `G + replica_extra` packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub switches: usize,
    pub budget: Option<ProcessingBudget>,
    pub delay: u64,
    pub ack_loss: f64,
    pub replica_extra: usize,
    pub max_generations: usize,
    pub generations: u32,
    pub gap: u64,
    pub symbol_size: usize,
    pub mul_algorithm: MulAlgorithm,
    pub coeff_seed: u64,
}

impl Default for SweepBase {
    fn default() -> Self {
        SweepBase {
            switches: 1,
            budget: None,
            delay: 1,
            ack_loss: 0.0,
            replica_extra: 0,
            max_generations: 64,
            generations: 20,
            gap: 1,
            symbol_size: 1,
            mul_algorithm: MulAlgorithm::LogTable,
            coeff_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub generation_size: usize,
    pub symbols_per_packet: usize,
    pub mode: SwitchMode,
    pub loss: f64,
}

impl SweepCell {
    fn csv_prefix(&self) -> String {
        format!(
            "{},{},{},{}",
            self.generation_size,
            self.symbols_per_packet,
            mode_label(self.mode),
            self.loss
        )
    }
}

/// Short labels used in tables: `cod` and `recod`.
pub fn mode_label(mode: SwitchMode) -> &'static str {
    match mode {
        SwitchMode::Encode => "cod",
        SwitchMode::Recode => "recod",
    }
}

/// The topology, switch configs and sender for one cell.
pub fn cell_setup(
    base: &SweepBase,
    cell: &SweepCell,
) -> Result<(Topology, Vec<SwitchConfig>, SenderBehavior), SimError> {
    let field = Field::gf256(base.mul_algorithm);
    let params = CodingParams::with_symbol_size(cell.generation_size, cell.symbols_per_packet, base.symbol_size, field)?;
    let link = Link {
        loss: cell.loss,
        ack_loss: base.ack_loss,
        delay: base.delay,
    };
    let topology = Topology::chain(base.switches, link, base.budget);
    let configs = (0..base.switches)
        .map(|_| SwitchConfig {
            max_generations: base.max_generations,
            replicas_per_trigger: cell.generation_size + base.replica_extra,
            params: params.clone(),
            mode: cell.mode,
            mul_algorithm: base.mul_algorithm,
            coeff_seed: base.coeff_seed,
            ack_memory: crate::switch::DEFAULT_ACK_MEMORY,
        })
        .collect::<Vec<_>>();
    let mut configs = configs;
    // Only the first switch may encode; later ones see coded traffic.
    for c in configs.iter_mut().skip(1) {
        c.mode = SwitchMode::Recode;
    }
    let sender = SenderBehavior {
        kind: match cell.mode {
            SwitchMode::Encode => SenderKind::Systematic,
            SwitchMode::Recode => SenderKind::PreCoded,
        },
        params,
        generations: base.generations,
        gap: base.gap,
        redundancy: 0,
    };
    Ok((topology, configs, sender))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub cell: SweepCell,
    pub seed: u64,
    pub result: Result<RunMetrics, SimError>,
}

/// Per-cell means over the seeds that ran without error.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub runs: usize,
    pub failures: usize,
    /// Means of the RunMetrics columns, in [`METRIC_COLUMNS`] order
    /// (the last entry is the mean per-run drop rate).
    pub means: Vec<f64>,
}

impl CellSummary {
    pub fn mean(&self, column: &str) -> Option<f64> {
        METRIC_COLUMNS
            .iter()
            .position(|c| *c == column)
            .and_then(|i| self.means.get(i).copied())
    }

    pub fn mean_drop_rate(&self) -> f64 {
        *self.means.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub summaries: Vec<CellSummary>,
}

impl SweepTable {
    pub fn summary(&self, generation_size: usize, symbols_per_packet: usize, mode: SwitchMode) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| {
            s.cell.generation_size == generation_size
                && s.cell.symbols_per_packet == symbols_per_packet
                && s.cell.mode == mode
        })
    }

    /// Per-seed rows followed by one `agg = 1` mean row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header();
        out.push('\n');
        for r in &self.runs {
            out.push_str(&run_csv_row(&r.cell, r.seed, &r.result));
            out.push('\n');
        }
        for s in &self.summaries {
            let _ = write!(out, "{},,1,{}", s.cell.csv_prefix(), s.runs);
            for m in &s.means {
                let _ = write!(out, ",{m}");
            }
            let err = if s.failures > 0 {
                format!("{} failed runs", s.failures)
            } else {
                String::new()
            };
            let _ = writeln!(out, ",{}", csv_escape(&err));
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV row for a single run (`agg = 0`).
pub fn run_csv_row(cell: &SweepCell, seed: u64, result: &Result<RunMetrics, SimError>) -> String {
    let mut row = format!("{},{},0,1", cell.csv_prefix(), seed);
    match result {
        Ok(m) => {
            for v in m.values() {
                let _ = write!(row, ",{v}");
            }
            let _ = write!(row, ",{},", m.switch_drop_rate());
        }
        Err(e) => {
            row.push_str(&",".repeat(METRIC_COLUMNS.len()));
            let _ = write!(row, ",{}", csv_escape(&e.to_string()));
        }
    }
    row
}

/// Runs every cell for every seed. Cell failures are recorded in the
/// table rather than aborting the sweep.
pub fn sweep(grid: &SweepGrid, base: &SweepBase, seeds: &[u64]) -> Result<SweepTable, SimError> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(config_err("sweep grid is empty"));
    }
    if seeds.is_empty() {
        return Err(config_err("sweep needs at least one seed"));
    }
    let jobs: Vec<(SweepCell, u64)> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (*c, s)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(cell, seed)| {
            let result = cell_setup(base, &cell).and_then(|(t, c, s)| run(&t, &c, &s, seed));
            SweepRun { cell, seed, result }
        })
        .collect();

    let summaries = cells
        .iter()
        .map(|cell| {
            let ok: Vec<&RunMetrics> = runs
                .iter()
                .filter(|r| r.cell == *cell)
                .filter_map(|r| r.result.as_ref().ok())
                .collect();
            let failures = seeds.len() - ok.len();
            let mut means = vec![0.0; METRIC_COLUMNS.len()];
            if !ok.is_empty() {
                for m in &ok {
                    for (acc, v) in means.iter_mut().zip(m.values()) {
                        *acc += v as f64;
                    }
                    *means.last_mut().expect("nonempty") += m.switch_drop_rate();
                }
                for acc in &mut means {
                    *acc /= ok.len() as f64;
                }
            }
            CellSummary {
                cell: *cell,
                runs: ok.len(),
                failures,
                means,
            }
        })
        .collect();
    Ok(SweepTable { runs, summaries })
}

/// Wall-clock comparison of the two multiplication backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iterations: u64,
    pub peasant_seconds: f64,
    pub log_table_seconds: f64,
    /// peasant / log-table time.
    pub ratio: f64,
    pub products_identical: bool,
}

const BENCH_OPERANDS: usize = 1 << 16;
const BENCH_ROUNDS: usize = 3;

fn time_backend(ctx: &GfContext, algorithm: MulAlgorithm, operands: &[(GfElement, GfElement)], iterations: u64) -> f64 {
    let mask = operands.len() - 1;
    let start = Instant::now();
    let mut acc = 0u8;
    for i in 0..iterations as usize {
        let (a, b) = operands[i & mask];
        // black_box keeps each product scalar and observable.
        acc ^= black_box(ctx.mul(algorithm, black_box(a), black_box(b))).0;
    }
    black_box(acc);
    start.elapsed().as_secs_f64()
}

/// Times both backends on the same operand stream. Each backend is timed
/// in alternating rounds and the fastest round is kept.
pub fn bench_mul_backends(ctx: &GfContext, iterations: u64) -> Result<BenchReport, SimError> {
    if iterations == 0 {
        return Err(config_err("iterations must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xBE7C);
    let q = ctx.q();
    let operands: Vec<(GfElement, GfElement)> = (0..BENCH_OPERANDS)
        .map(|_| {
            (
                GfElement(rng.gen_range(0..q) as u8),
                GfElement(rng.gen_range(0..q) as u8),
            )
        })
        .collect();
    let products_identical = operands
        .iter()
        .all(|&(a, b)| ctx.mul_peasant(a, b) == ctx.mul_table(a, b));

    let mut peasant = f64::INFINITY;
    let mut table = f64::INFINITY;
    for _ in 0..BENCH_ROUNDS {
        peasant = peasant.min(time_backend(ctx, MulAlgorithm::Peasant, &operands, iterations));
        table = table.min(time_backend(ctx, MulAlgorithm::LogTable, &operands, iterations));
    }
    Ok(BenchReport {
        iterations,
        peasant_seconds: peasant,
        log_table_seconds: table,
        ratio: if table > 0.0 { peasant / table } else { f64::INFINITY },
        products_identical,
    })
}
