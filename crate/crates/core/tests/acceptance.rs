//! Acceptance criteria, one line of output per criterion.
//!
//! Run with `cargo test -p rlnc-core --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlnc_core::codec::{self, independence_probability_estimate};
use rlnc_core::simnet::{self, ProcessingBudget, SweepBase, SweepGrid};
use rlnc_core::switch::{DropReason, Switch, SwitchConfig, SwitchMode};
use rlnc_core::wire::{InnerHeader, OuterHeader};
use rlnc_core::{
    deserialize, gf_add, make_ack, serialize, CodingParams, CoefficientSource, DecoderState, Field,
    GfContext, GfElement, Innovation, MulAlgorithm, PacketType, RlncPacket, SourceSymbolMatrix,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn params(g: usize, n: usize) -> CodingParams {
    CodingParams::new(g, n, Field::gf256(MulAlgorithm::LogTable)).unwrap()
}

/// Product-sum over the peasant multiplier, independent of the codec.
fn oracle_combination(ctx: &GfContext, coeffs: &[GfElement], src: &SourceSymbolMatrix) -> Vec<GfElement> {
    let n = src.row(0).len();
    (0..n)
        .map(|k| {
            let mut acc = 0u8;
            for (i, c) in coeffs.iter().enumerate() {
                acc ^= ctx.mul_peasant(*c, src.row(i)[k]).0;
            }
            GfElement(acc)
        })
        .collect()
}

fn c1_multiplier_equivalence() -> Outcome {
    let ctx = GfContext::default_gf256();
    let start = Instant::now();
    let mut mismatches = 0u32;
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            let (a, b) = (GfElement(a), GfElement(b));
            if ctx.mul_table(a, b) != ctx.mul_peasant(a, b) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(mismatches == 0, "{mismatches} of 65536 pairs differ");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("65536 pairs equal in {elapsed:?}"))
}

fn c2_field_axioms() -> Outcome {
    let ctx = GfContext::default_gf256();
    let mul = |a: GfElement, b: GfElement| ctx.mul_table(a, b);
    for a in 0..=255u8 {
        let a = GfElement(a);
        ensure!(mul(a, GfElement::ONE) == a, "1 is not an identity for {a:?}");
        ensure!(mul(a, GfElement::ZERO) == GfElement::ZERO, "0 does not annihilate {a:?}");
        ensure!(gf_add(a, GfElement::ZERO) == a, "0 is not additive identity for {a:?}");
        ensure!(gf_add(a, a) == GfElement::ZERO, "{a:?} is not self-inverse");
        if !a.is_zero() {
            let inv = ctx.inverse(a).map_err(|e| e.to_string())?;
            ensure!(mul(a, inv) == GfElement::ONE, "bad inverse for {a:?}");
        }
        for b in 0..=255u8 {
            let b = GfElement(b);
            ensure!(mul(a, b) == mul(b, a), "mul not commutative at {a:?},{b:?}");
        }
    }
    ensure!(ctx.inverse(GfElement::ZERO).is_err(), "zero has an inverse");

    let mut rng = ChaCha8Rng::seed_from_u64(0xA110);
    let triples = 100_000;
    for _ in 0..triples {
        let (a, b, c) = (GfElement(rng.gen()), GfElement(rng.gen()), GfElement(rng.gen()));
        ensure!(mul(mul(a, b), c) == mul(a, mul(b, c)), "associativity fails at {a:?},{b:?},{c:?}");
        ensure!(
            mul(a, gf_add(b, c)) == gf_add(mul(a, b), mul(a, c)),
            "distributivity fails at {a:?},{b:?},{c:?}"
        );
    }
    Ok(format!("exhaustive identities/inverses, {triples} random triples"))
}

fn c3_decode_round_trip() -> Outcome {
    let mut summary = Vec::new();
    for (g, n) in [(4, 4), (8, 4), (16, 8)] {
        let p = params(g, n);
        let trials = 1000;
        let mut exact = 0;
        for seed in 0..trials {
            let src = SourceSymbolMatrix::random(&p, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut coeffs = CoefficientSource::new(seed ^ 0xC0DE);
            let mut dec = DecoderState::new(p.clone());
            while !dec.is_complete() {
                let pkt = codec::encode(&p, &src, &mut coeffs).map_err(|e| e.to_string())?;
                dec.consume(&pkt).map_err(|e| e.to_string())?;
            }
            if dec.recover().map_err(|e| e.to_string())? == src {
                exact += 1;
            }
        }
        ensure!(exact == trials, "G={g} n={n}: {exact}/{trials} exact");
        summary.push(format!("({g},{n}) {exact}/{trials}"));
    }
    Ok(summary.join(", "))
}

fn c4_recode_soundness() -> Outcome {
    let (g, n) = (8, 4);
    let p = params(g, n);
    let ctx = GfContext::default_gf256();
    let trials = 1000u64;
    let mut delivered = 0usize;
    for seed in 0..trials {
        let src = SourceSymbolMatrix::random(&p, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut coeffs = CoefficientSource::new(seed.wrapping_mul(31) + 7);

        let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Recode);
        cfg.replicas_per_trigger = g + 2;
        cfg.coeff_seed = seed;
        let mut recoder = Switch::new(cfg).map_err(|e| e.to_string())?;
        let mut receiver = DecoderState::new(p.clone());

        let gen = seed as u16;
        // The sender tracks its own rank and only forwards innovative encodings.
        let mut sent = DecoderState::new(p.clone());
        while !sent.is_complete() {
            let payload = codec::encode(&p, &src, &mut coeffs).map_err(|e| e.to_string())?;
            if sent.consume(&payload).map_err(|e| e.to_string())? == Innovation::Redundant {
                continue;
            }
            let bytes = serialize(&RlncPacket::coded(gen, &p, &payload)).map_err(|e| e.to_string())?;
            let at_switch = deserialize(&bytes).map_err(|e| e.to_string())?;
            let out = recoder.ingress(&at_switch).map_err(|e| e.to_string())?;
            for pkt in out.emitted() {
                let bytes = serialize(pkt).map_err(|e| e.to_string())?;
                let at_receiver = deserialize(&bytes).map_err(|e| e.to_string())?;
                let payload = at_receiver.coded_payload().ok_or("recoder emitted a non-coded packet")?;
                ensure!(
                    payload.coded_symbols == oracle_combination(&ctx, &payload.coding_vector, &src),
                    "seed {seed}: delivered payload inconsistent with ground truth"
                );
                receiver.consume(&payload).map_err(|e| e.to_string())?;
                delivered += 1;
            }
        }
        ensure!(receiver.is_complete(), "seed {seed}: receiver stuck at rank {}", receiver.rank());
        ensure!(receiver.recover().map_err(|e| e.to_string())? == src, "seed {seed}: wrong decode");
    }

    // Same chain through the simulator at loss 0.
    let base = SweepBase {
        generations: 50,
        replica_extra: 2,
        ..SweepBase::default()
    };
    let cell = simnet::SweepCell {
        generation_size: g,
        symbols_per_packet: n,
        mode: SwitchMode::Recode,
        loss: 0.0,
    };
    let (t, c, s) = simnet::cell_setup(&base, &cell).map_err(|e| e.to_string())?;
    let m = simnet::run(&t, &c, &s, 4).map_err(|e| e.to_string())?;
    ensure!(
        m.generations_decoded == 50 && m.decode_errors == 0 && m.residual_switch_slots == 0,
        "simulated chain: {m:?}"
    );
    Ok(format!("{trials} trials, {delivered} delivered payloads consistent, all decoded"))
}

fn c5_independence_probability() -> Outcome {
    let g = 8;
    let trials = 10_000;
    // Closed form: prod_{i=1..G} (1 - Q^-i)
    let q = 256f64;
    let expected: f64 = (1..=g).map(|i| 1.0 - q.powi(-(i as i32))).product();
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    let estimate =
        independence_probability_estimate(&params(g, 1), trials, &mut CoefficientSource::new(0x5EED)).map_err(|e| e.to_string())?;
    ensure!(
        (estimate - expected).abs() <= 3.0 * sigma,
        "estimate {estimate} outside {expected} ± {}",
        3.0 * sigma
    );
    Ok(format!("estimate {estimate:.5}, closed form {expected:.5}, 3σ = {:.5}", 3.0 * sigma))
}

fn random_valid_packet(rng: &mut ChaCha8Rng) -> RlncPacket {
    let packet_type = PacketType::from_byte(rng.gen_range(0..3)).unwrap();
    let generation_size = rng.gen_range(1..=64u8);
    let symbol_size = rng.gen_range(1..=4u8);
    let symbol_count = if packet_type == PacketType::Ack { 0 } else { rng.gen_range(1..=32u8) };
    let cv = if packet_type == PacketType::Coded { usize::from(generation_size) } else { 0 };
    RlncPacket {
        outer: OuterHeader {
            generation_id: rng.gen(),
            generation_size,
            field_size_log2: 8,
            symbol_size,
        },
        inner: InnerHeader {
            packet_type,
            symbol_count,
        },
        coding_vector: (0..cv).map(|_| rng.gen()).collect(),
        symbols: (0..usize::from(symbol_count) * usize::from(symbol_size)).map(|_| rng.gen()).collect(),
    }
}

fn c6_wire_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let inputs = 1_000_000;
    let mut accepted = 0usize;
    let result = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut buf = Vec::with_capacity(128);
        for i in 0..inputs {
            buf.clear();
            let len = rng.gen_range(0..96);
            buf.extend((0..len).map(|_| rng.gen::<u8>()));
            // Bias some inputs towards plausible headers to reach deeper checks.
            if i % 2 == 0 && buf.len() >= 7 {
                buf[3] = 8;
                buf[5] %= 3;
            }
            if let Ok(p) = deserialize(&buf) {
                accepted += 1;
                assert_eq!(serialize(&p).unwrap(), buf);
            }
        }
    }));
    ensure!(result.is_ok(), "deserializer panicked");

    let valid = 10_000;
    for _ in 0..valid {
        let pkt = random_valid_packet(&mut rng);
        let bytes = serialize(&pkt).map_err(|e| e.to_string())?;
        ensure!(bytes.len() == pkt.wire_len(), "length formula mismatch");
        let back = deserialize(&bytes).map_err(|e| e.to_string())?;
        ensure!(back == pkt, "structural round trip failed");
        ensure!(serialize(&back).map_err(|e| e.to_string())? == bytes, "byte round trip failed");
    }
    Ok(format!("{inputs} random inputs ({accepted} parsed), {valid} valid packets round-tripped"))
}

fn c7_switch_contract() -> Outcome {
    let (g, n, replicas) = (4, 3, 3);
    let p = params(g, n);
    let src = SourceSymbolMatrix::random(&p, &mut ChaCha8Rng::seed_from_u64(77));
    let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Encode);
    cfg.replicas_per_trigger = replicas;
    cfg.max_generations = 3;
    let mut sw = Switch::new(cfg).map_err(|e| e.to_string())?;
    let check = |sw: &Switch, step: &str| sw.buffer().check_invariants().map_err(|e| format!("{step}: {e}"));

    // An unrelated generation shares the register throughout.
    sw.ingress(&RlncPacket::uncoded(100, &p, src.row(0))).map_err(|e| e.to_string())?;
    check(&sw, "other generation")?;

    for i in 0..g - 1 {
        let out = sw.ingress(&RlncPacket::uncoded(1, &p, src.row(i))).map_err(|e| e.to_string())?;
        ensure!(
            out.dropped() == Some(DropReason::BufferedAwaitingFill) && out.emitted().count() == 0,
            "packet {i} was not buffered-and-dropped: {out:?}"
        );
        check(&sw, "buffering")?;
    }
    let out = sw.ingress(&RlncPacket::uncoded(1, &p, src.row(g - 1))).map_err(|e| e.to_string())?;
    let emitted: Vec<_> = out.emitted().collect();
    ensure!(emitted.len() == replicas, "fill emitted {} packets", emitted.len());
    let ctx = GfContext::default_gf256();
    for pkt in &emitted {
        ensure!(pkt.packet_type() == PacketType::Coded && pkt.generation_id() == 1, "bad emission {pkt:?}");
        let payload = pkt.coded_payload().unwrap();
        ensure!(
            payload.coded_symbols == oracle_combination(&ctx, &payload.coding_vector, &src),
            "emission inconsistent with sources"
        );
    }
    check(&sw, "fill")?;

    let active = sw.buffer().active_count();
    let out = sw.ingress(&make_ack(1, &p)).map_err(|e| e.to_string())?;
    ensure!(out.emitted().all(|p| p.is_ack()), "ack not forwarded");
    ensure!(sw.buffer().active_count() == active - 1, "ack did not free the slot");
    ensure!(!sw.buffer().is_active(1), "generation still active after ack");
    check(&sw, "ack")?;

    for i in 0..g {
        let out = sw.ingress(&RlncPacket::uncoded(1, &p, src.row(i))).map_err(|e| e.to_string())?;
        ensure!(
            out.dropped() == Some(DropReason::AlreadyAcked) && out.emitted().count() == 0,
            "late packet not dropped: {out:?}"
        );
        check(&sw, "late packet")?;
    }

    sw.handle_ack(1);
    check(&sw, "repeated ack")?;
    ensure!(sw.buffer().active_count() == active - 1, "repeated ack changed state");
    Ok(format!("{} buffered drops, {replicas} emissions, ack flush and AlreadyAcked verified", g - 1))
}

fn c8_trend_reproduction() -> Outcome {
    let start = Instant::now();
    let grid = SweepGrid {
        generation_sizes: vec![4, 8, 16, 32],
        symbols_per_packet: vec![4],
        modes: vec![SwitchMode::Encode, SwitchMode::Recode],
        losses: vec![0.01],
    };
    let base = SweepBase {
        budget: Some(ProcessingBudget {
            work_per_tick: 64,
            queue_capacity: 8,
        }),
        generations: 30,
        ..SweepBase::default()
    };
    let seeds: Vec<u64> = (0..10).collect();
    let table = simnet::sweep(&grid, &base, &seeds).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut cells = Vec::new();
    for mode in [SwitchMode::Encode, SwitchMode::Recode] {
        let mut prev = f64::NEG_INFINITY;
        for g in [4, 8, 16, 32] {
            let s = table.summary(g, 4, mode).ok_or("missing cell")?;
            ensure!(s.failures == 0 && s.runs == 10, "G={g} {mode}: {} failures", s.failures);
            let rate = s.mean_drop_rate();
            ensure!(rate >= prev, "{mode}: drop rate fell from {prev} to {rate} at G={g}");
            prev = rate;
        }
    }
    for g in [4, 8, 16, 32] {
        let cod = table.summary(g, 4, SwitchMode::Encode).unwrap().mean_drop_rate();
        let recod = table.summary(g, 4, SwitchMode::Recode).unwrap().mean_drop_rate();
        ensure!(recod >= cod, "G={g}: recod {recod} < cod {cod}");
        cells.push(format!("G{g} {:.3}/{:.3}", cod, recod));
    }
    ensure!(elapsed < Duration::from_secs(60), "sweep took {elapsed:?}");
    Ok(format!("drop cod/recod: {} in {elapsed:.2?}", cells.join(", ")))
}

fn c9_cost_model() -> Outcome {
    let mut checked = 0;
    for g in [2usize, 4, 8, 16, 32] {
        for n in [1usize, 2, 4, 8] {
            let p = params(g, n);
            let src = SourceSymbolMatrix::random(&p, &mut ChaCha8Rng::seed_from_u64((g * 100 + n) as u64));
            let replicas = 3;

            let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Encode);
            cfg.replicas_per_trigger = replicas;
            let mut enc = Switch::new(cfg).map_err(|e| e.to_string())?;
            let mut cfg = SwitchConfig::new(p.clone(), SwitchMode::Recode);
            cfg.replicas_per_trigger = replicas;
            let mut rec = Switch::new(cfg).map_err(|e| e.to_string())?;

            let mut coeffs = CoefficientSource::new(1);
            let mut enc_emitted = 0;
            let mut rec_emitted = 0;
            for i in 0..g {
                enc_emitted += enc
                    .ingress(&RlncPacket::uncoded(0, &p, src.row(i)))
                    .map_err(|e| e.to_string())?
                    .emitted()
                    .count();
                let payload = codec::encode(&p, &src, &mut coeffs).map_err(|e| e.to_string())?;
                rec_emitted += rec
                    .ingress(&RlncPacket::coded(0, &p, &payload))
                    .map_err(|e| e.to_string())?
                    .emitted()
                    .count();
            }
            ensure!(enc_emitted == replicas && rec_emitted == replicas, "unexpected emission counts");

            // Encode: one multiply per (source row, symbol).
            let enc_expected = (g * n) as u64;
            // Recode: one multiply per (buffered row, symbol or coefficient).
            let rec_expected = (g * (g + n)) as u64;
            let enc_per = enc.mul_count() / replicas as u64;
            let rec_per = rec.mul_count() / replicas as u64;
            ensure!(
                enc.mul_count() == enc_expected * replicas as u64,
                "encode G={g} n={n}: {} muls, expected {}",
                enc.mul_count(),
                enc_expected * replicas as u64
            );
            ensure!(
                rec.mul_count() == rec_expected * replicas as u64,
                "recode G={g} n={n}: {} muls, expected {}",
                rec.mul_count(),
                rec_expected * replicas as u64
            );
            ensure!(enc_per as f64 / (g * n) as f64 == 1.0, "encode not linear in G·n");
            ensure!(rec_per > enc_per, "recode not costlier at G={g} n={n}");
            checked += 1;
        }
    }
    Ok(format!("{checked} (G, n) pairs: encode = G·n, recode = G·(G+n) per packet"))
}

fn c10_benchmark_direction() -> Outcome {
    let ctx = GfContext::default_gf256();
    let report = simnet::bench_mul_backends(&ctx, 2_000_000).map_err(|e| e.to_string())?;
    ensure!(report.products_identical, "backends disagree on the operand stream");
    ensure!(
        report.peasant_seconds > report.log_table_seconds,
        "peasant {:.4}s not slower than log-table {:.4}s",
        report.peasant_seconds,
        report.log_table_seconds
    );
    Ok(format!(
        "peasant {:.4}s, log-table {:.4}s, ratio {:.2} ({} muls)",
        report.peasant_seconds, report.log_table_seconds, report.ratio, report.iterations
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 multiplier oracle equivalence", c1_multiplier_equivalence),
        ("2 field axioms", c2_field_axioms),
        ("3 decode round trip", c3_decode_round_trip),
        ("4 recode soundness", c4_recode_soundness),
        ("5 independence probability", c5_independence_probability),
        ("6 wire fuzz", c6_wire_fuzz),
        ("7 switch contract", c7_switch_contract),
        ("8 trend reproduction", c8_trend_reproduction),
        ("9 cost model", c9_cost_model),
        ("10 benchmark direction", c10_benchmark_direction),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
