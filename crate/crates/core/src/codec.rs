//! Generation-based random linear network coding: encoding, recoding and
//! online Gaussian-elimination decoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf256::{gf_add, Field, GfElement};

/// Upper bound on the generation size; the wire header stores it in a byte.
pub const MAX_GENERATION_SIZE: usize = u8::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("recoding needs {need} buffered payloads, have {have}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("decoder rank {rank} is short of full rank by {missing}")]
    NotFullRank { rank: usize, missing: usize },
    #[error("invalid coding parameters: {0}")]
    InvalidParams(String),
    #[error("at least one trial is required")]
    ZeroTrials,
}

/// Coding parameters shared by every node handling a flow.
///
/// `symbols_per_packet` counts wire symbols; each symbol is `symbol_size`
/// bytes and every byte is coded as an independent field element.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingParams {
    pub generation_size: usize,
    pub symbols_per_packet: usize,
    pub symbol_size: usize,
    pub field: Field,
}

impl CodingParams {
    pub fn new(generation_size: usize, symbols_per_packet: usize, field: Field) -> Result<Self, CodecError> {
        Self::with_symbol_size(generation_size, symbols_per_packet, 1, field)
    }

    pub fn with_symbol_size(
        generation_size: usize,
        symbols_per_packet: usize,
        symbol_size: usize,
        field: Field,
    ) -> Result<Self, CodecError> {
        if generation_size == 0 || generation_size > MAX_GENERATION_SIZE {
            return Err(CodecError::InvalidParams(format!(
                "generation_size must be in 1..={MAX_GENERATION_SIZE}, got {generation_size}"
            )));
        }
        if symbols_per_packet == 0 || symbols_per_packet > usize::from(u8::MAX) {
            return Err(CodecError::InvalidParams(format!(
                "symbols_per_packet must be in 1..=255, got {symbols_per_packet}"
            )));
        }
        if symbol_size == 0 || symbol_size > usize::from(u8::MAX) {
            return Err(CodecError::InvalidParams(format!(
                "symbol_size must be in 1..=255, got {symbol_size}"
            )));
        }
        Ok(CodingParams {
            generation_size,
            symbols_per_packet,
            symbol_size,
            field,
        })
    }

    /// Field elements carried per packet payload.
    pub fn payload_len(&self) -> usize {
        self.symbols_per_packet * self.symbol_size
    }

    /// Same shape, with a fresh multiplication counter.
    pub fn fresh(&self) -> Self {
        CodingParams {
            field: self.field.with_algorithm(self.field.algorithm()),
            ..self.clone()
        }
    }

    fn check_len(&self, what: &'static str, expected: usize, actual: usize) -> Result<(), CodecError> {
        if expected == actual {
            Ok(())
        } else {
            Err(CodecError::ShapeMismatch {
                what,
                expected,
                actual,
            })
        }
    }
}

/// The uncoded payloads of one generation, one row per source packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSymbolMatrix {
    rows: Vec<Vec<GfElement>>,
}

impl SourceSymbolMatrix {
    pub fn new(params: &CodingParams, rows: Vec<Vec<GfElement>>) -> Result<Self, CodecError> {
        params.check_len("source rows", params.generation_size, rows.len())?;
        for row in &rows {
            params.check_len("source row length", params.payload_len(), row.len())?;
        }
        Ok(SourceSymbolMatrix { rows })
    }

    pub fn from_bytes(params: &CodingParams, rows: &[Vec<u8>]) -> Result<Self, CodecError> {
        Self::new(
            params,
            rows.iter()
                .map(|r| r.iter().copied().map(GfElement).collect())
                .collect(),
        )
    }

    /// Uniformly random source data from `rng`.
    pub fn random<R: Rng>(params: &CodingParams, rng: &mut R) -> Self {
        let q = params.field.ctx().q();
        let rows = (0..params.generation_size)
            .map(|_| {
                (0..params.payload_len())
                    .map(|_| GfElement(rng.gen_range(0..q) as u8))
                    .collect()
            })
            .collect();
        SourceSymbolMatrix { rows }
    }

    pub fn rows(&self) -> &[Vec<GfElement>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[GfElement] {
        &self.rows[i]
    }

    pub fn generation_size(&self) -> usize {
        self.rows.len()
    }

    /// The systematic payload of source row `index`.
    pub fn systematic(&self, index: usize) -> CodedPayload {
        CodedPayload::systematic(index, self.rows.len(), self.rows[index].clone())
    }
}

/// A coding vector and the symbols it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPayload {
    pub coding_vector: Vec<GfElement>,
    pub coded_symbols: Vec<GfElement>,
}

impl CodedPayload {
    /// Uncoded source packet `index` expressed with a unit coding vector.
    pub fn systematic(index: usize, generation_size: usize, symbols: Vec<GfElement>) -> Self {
        let mut coding_vector = vec![GfElement::ZERO; generation_size];
        coding_vector[index] = GfElement::ONE;
        CodedPayload {
            coding_vector,
            coded_symbols: symbols,
        }
    }

    fn check_shape(&self, params: &CodingParams) -> Result<(), CodecError> {
        params.check_len("coding vector", params.generation_size, self.coding_vector.len())?;
        params.check_len("coded symbols", params.payload_len(), self.coded_symbols.len())
    }
}

/// Seeded stream of coefficients uniform over the field.
#[derive(Debug, Clone)]
pub struct CoefficientSource {
    rng: ChaCha8Rng,
    q: u16,
}

impl CoefficientSource {
    /// A GF(2^8) coefficient stream.
    pub fn new(seed: u64) -> Self {
        Self::with_field_size(seed, 256)
    }

    pub fn with_field_size(seed: u64, q: u16) -> Self {
        assert!((2..=256).contains(&q), "field size {q} out of range");
        CoefficientSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            q,
        }
    }

    pub fn for_params(seed: u64, params: &CodingParams) -> Self {
        Self::with_field_size(seed, params.field.ctx().q())
    }

    pub fn next_element(&mut self) -> GfElement {
        GfElement(self.rng.gen_range(0..self.q) as u8)
    }

    pub fn draw(&mut self, len: usize) -> Vec<GfElement> {
        (0..len).map(|_| self.next_element()).collect()
    }
}

/// `dst[k] ^= factor * src[k]` for every k.
fn add_scaled(field: &Field, dst: &mut [GfElement], factor: GfElement, src: &[GfElement]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = gf_add(*d, field.mul(factor, s));
    }
}

fn scale(field: &Field, row: &mut [GfElement], factor: GfElement) {
    for x in row {
        *x = field.mul(factor, *x);
    }
}

/// Encodes one packet with `G` coefficients drawn from `coeffs`.
pub fn encode(
    params: &CodingParams,
    sources: &SourceSymbolMatrix,
    coeffs: &mut CoefficientSource,
) -> Result<CodedPayload, CodecError> {
    let coefficients = coeffs.draw(params.generation_size);
    encode_with(params, sources, &coefficients)
}

/// Encodes one packet with explicit coefficients.
///
/// Executes exactly `G * payload_len` multiplications.
pub fn encode_with(
    params: &CodingParams,
    sources: &SourceSymbolMatrix,
    coefficients: &[GfElement],
) -> Result<CodedPayload, CodecError> {
    params.check_len("source rows", params.generation_size, sources.rows.len())?;
    params.check_len("coefficients", params.generation_size, coefficients.len())?;
    for row in &sources.rows {
        params.check_len("source row length", params.payload_len(), row.len())?;
    }
    let mut coded_symbols = vec![GfElement::ZERO; params.payload_len()];
    for k in 0..params.payload_len() {
        let mut acc = GfElement::ZERO;
        for (c, row) in coefficients.iter().zip(&sources.rows) {
            acc = gf_add(acc, params.field.mul(*c, row[k]));
        }
        coded_symbols[k] = acc;
    }
    Ok(CodedPayload {
        coding_vector: coefficients.to_vec(),
        coded_symbols,
    })
}

/// Recodes a filled buffer: one local coefficient per buffered payload.
pub fn recode(
    params: &CodingParams,
    buffered: &[CodedPayload],
    coeffs: &mut CoefficientSource,
) -> Result<CodedPayload, CodecError> {
    let local = coeffs.draw(buffered.len());
    recode_with(params, buffered, &local)
}

/// Recodes with explicit local coefficients.
///
/// The output coding vector is the same combination of the buffered coding
/// vectors, so it stays relative to the original sources. Executes
/// `B * (G + payload_len)` multiplications for `B` buffered payloads.
pub fn recode_with(
    params: &CodingParams,
    buffered: &[CodedPayload],
    local: &[GfElement],
) -> Result<CodedPayload, CodecError> {
    if buffered.len() < params.generation_size {
        return Err(CodecError::InsufficientBuffer {
            have: buffered.len(),
            need: params.generation_size,
        });
    }
    params.check_len("local coefficients", buffered.len(), local.len())?;
    for p in buffered {
        p.check_shape(params)?;
    }
    let mut out = CodedPayload {
        coding_vector: vec![GfElement::ZERO; params.generation_size],
        coded_symbols: vec![GfElement::ZERO; params.payload_len()],
    };
    for (r, p) in local.iter().zip(buffered) {
        add_scaled(&params.field, &mut out.coded_symbols, *r, &p.coded_symbols);
        add_scaled(&params.field, &mut out.coding_vector, *r, &p.coding_vector);
    }
    Ok(out)
}

/// Outcome of feeding one payload to a decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    Innovative,
    Redundant,
}

/// Online decoder holding rows in reduced row-echelon form.
#[derive(Debug, Clone)]
pub struct DecoderState {
    params: CodingParams,
    /// Rows sorted by pivot column.
    coeff_rows: Vec<Vec<GfElement>>,
    payload_rows: Vec<Vec<GfElement>>,
    pivots: Vec<usize>,
}

impl DecoderState {
    pub fn new(params: CodingParams) -> Self {
        let g = params.generation_size;
        DecoderState {
            params,
            coeff_rows: Vec::with_capacity(g),
            payload_rows: Vec::with_capacity(g),
            pivots: Vec::with_capacity(g),
        }
    }

    pub fn params(&self) -> &CodingParams {
        &self.params
    }

    /// Degrees of freedom absorbed so far.
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.params.generation_size
    }

    pub fn coeff_rows(&self) -> &[Vec<GfElement>] {
        &self.coeff_rows
    }

    pub fn payload_rows(&self) -> &[Vec<GfElement>] {
        &self.payload_rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Eliminates `payload` against the stored rows and keeps it if it
    /// raises the rank.
    pub fn consume(&mut self, payload: &CodedPayload) -> Result<Innovation, CodecError> {
        payload.check_shape(&self.params)?;
        let field = &self.params.field;
        let mut coeffs = payload.coding_vector.clone();
        let mut symbols = payload.coded_symbols.clone();

        for ((pivot, crow), prow) in self.pivots.iter().zip(&self.coeff_rows).zip(&self.payload_rows) {
            let factor = coeffs[*pivot];
            if !factor.is_zero() {
                add_scaled(field, &mut coeffs, factor, crow);
                add_scaled(field, &mut symbols, factor, prow);
            }
        }

        let Some(pivot) = coeffs.iter().position(|c| !c.is_zero()) else {
            return Ok(Innovation::Redundant);
        };
        let inv = field
            .inverse(coeffs[pivot])
            .expect("pivot is nonzero");
        scale(field, &mut coeffs, inv);
        scale(field, &mut symbols, inv);

        // Back-substitute so existing rows stay reduced.
        for (crow, prow) in self.coeff_rows.iter_mut().zip(self.payload_rows.iter_mut()) {
            let factor = crow[pivot];
            if !factor.is_zero() {
                add_scaled(field, crow, factor, &coeffs);
                add_scaled(field, prow, factor, &symbols);
            }
        }

        let at = self.pivots.partition_point(|&p| p < pivot);
        self.pivots.insert(at, pivot);
        self.coeff_rows.insert(at, coeffs);
        self.payload_rows.insert(at, symbols);
        Ok(Innovation::Innovative)
    }

    /// The decoded generation; requires full rank.
    pub fn recover(&self) -> Result<SourceSymbolMatrix, CodecError> {
        if !self.is_complete() {
            return Err(CodecError::NotFullRank {
                rank: self.rank(),
                missing: self.params.generation_size - self.rank(),
            });
        }
        Ok(SourceSymbolMatrix {
            rows: self.payload_rows.clone(),
        })
    }
}

/// Monte-Carlo fraction of trials in which `G` random coding vectors are
/// linearly independent.
pub fn independence_probability_estimate(
    params: &CodingParams,
    trials: usize,
    coeffs: &mut CoefficientSource,
) -> Result<f64, CodecError> {
    if trials == 0 {
        return Err(CodecError::ZeroTrials);
    }
    let g = params.generation_size;
    // Only the coding vectors matter for rank.
    let probe = CodingParams {
        symbols_per_packet: 1,
        symbol_size: 1,
        ..params.fresh()
    };
    let mut full = 0usize;
    for _ in 0..trials {
        let mut decoder = DecoderState::new(probe.clone());
        for _ in 0..g {
            let payload = CodedPayload {
                coding_vector: coeffs.draw(g),
                coded_symbols: vec![GfElement::ZERO],
            };
            decoder.consume(&payload)?;
        }
        if decoder.is_complete() {
            full += 1;
        }
    }
    Ok(full as f64 / trials as f64)
}
