//! Arithmetic over GF(2^m) with two multiplication backends: a shift-and-add
//! ("Russian peasant") loop and log/antilog table lookups.
//!
//! The shipped configuration is GF(2^8) with the reduction polynomial
//! x^8 + x^4 + x^3 + x^2 + 1 (0x11D) and primitive element 2. Field width is
//! carried by [`GfContext`]; only the defaults mention 8.

use std::cell::Cell;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default field width in bits.
pub const DEFAULT_FIELD_BITS: u32 = 8;
/// x^8 + x^4 + x^3 + x^2 + 1.
pub const DEFAULT_REDUCTION_POLY: u16 = 0x11D;
/// Generator of the multiplicative group under [`DEFAULT_REDUCTION_POLY`].
pub const DEFAULT_PRIMITIVE_ELEMENT: u8 = 0x02;

/// Largest supported field width; elements are stored in a byte.
pub const MAX_FIELD_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("reduction polynomial {poly:#x} is not irreducible of degree {m}")]
    NotIrreducible { poly: u16, m: u32 },
    #[error("element {element:#x} does not generate the multiplicative group")]
    NotPrimitive { element: u8 },
    #[error("zero has no multiplicative inverse")]
    InverseOfZero,
    #[error("unsupported field width {0} (expected 1..={MAX_FIELD_BITS})")]
    UnsupportedWidth(u32),
}

/// One element of GF(2^m).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
#[serde(transparent)]
pub struct GfElement(pub u8);

impl GfElement {
    pub const ZERO: GfElement = GfElement(0);
    pub const ONE: GfElement = GfElement(1);

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<u8> for GfElement {
    fn from(v: u8) -> Self {
        GfElement(v)
    }
}

impl From<GfElement> for u8 {
    fn from(e: GfElement) -> Self {
        e.0
    }
}

impl fmt::Debug for GfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

/// Field addition: bitwise XOR.
#[inline]
pub fn gf_add(a: GfElement, b: GfElement) -> GfElement {
    GfElement(a.0 ^ b.0)
}

/// Multiplication backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulAlgorithm {
    /// Bit-serial shift-and-add with conditional reduction.
    Peasant,
    /// Log/antilog lookups with a subtract-instead-of-modulo exponent fixup.
    #[default]
    LogTable,
}

impl fmt::Display for MulAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MulAlgorithm::Peasant => f.write_str("peasant"),
            MulAlgorithm::LogTable => f.write_str("log_table"),
        }
    }
}

/// Field parameters and precomputed log/antilog tables.
///
/// Immutable once built.
#[derive(Clone, PartialEq, Eq)]
pub struct GfContext {
    m: u32,
    q: u16,
    reduction_poly: u16,
    primitive_element: GfElement,
    /// `log_table[x - 1]` is the discrete log of `x`, for x in [1, Q).
    log_table: Vec<u8>,
    /// `antilog_table[i]` is `primitive_element^i`, for i in [0, Q - 1).
    antilog_table: Vec<u8>,
}

impl fmt::Debug for GfContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GfContext")
            .field("m", &self.m)
            .field("q", &self.q)
            .field("reduction_poly", &format_args!("{:#x}", self.reduction_poly))
            .field("primitive_element", &self.primitive_element)
            .finish_non_exhaustive()
    }
}

impl GfContext {
    /// Builds a context for GF(2^m).
    ///
    /// `reduction_poly` includes the x^m term (0x11D for the default field).
    /// Irreducibility is checked by trial division against every polynomial
    /// of degree 1..=m/2. The tables are filled by repeated peasant
    /// multiplication by `primitive_element`; if the powers cycle back to 1
    /// before visiting all Q-1 nonzero elements the element is rejected.
    pub fn new(m: u32, reduction_poly: u16, primitive_element: u8) -> Result<Self, GfError> {
        if m == 0 || m > MAX_FIELD_BITS {
            return Err(GfError::UnsupportedWidth(m));
        }
        if poly_degree(reduction_poly) != Some(m) || !is_irreducible(reduction_poly) {
            return Err(GfError::NotIrreducible {
                poly: reduction_poly,
                m,
            });
        }
        let q = 1u16 << m;
        let order = usize::from(q - 1);
        if primitive_element == 0 || u16::from(primitive_element) >= q {
            return Err(GfError::NotPrimitive {
                element: primitive_element,
            });
        }

        let mut ctx = GfContext {
            m,
            q,
            reduction_poly,
            primitive_element: GfElement(primitive_element),
            log_table: vec![0; order],
            antilog_table: vec![0; order],
        };

        let mut seen = vec![false; usize::from(q)];
        let mut x = GfElement::ONE;
        for exp in 0..order {
            if seen[usize::from(x.0)] {
                return Err(GfError::NotPrimitive {
                    element: primitive_element,
                });
            }
            seen[usize::from(x.0)] = true;
            ctx.antilog_table[exp] = x.0;
            ctx.log_table[usize::from(x.0) - 1] = exp as u8;
            x = ctx.mul_peasant(x, ctx.primitive_element);
        }
        debug_assert_eq!(x, GfElement::ONE);
        Ok(ctx)
    }

    /// GF(2^8) with 0x11D and generator 2.
    pub fn default_gf256() -> Self {
        Self::new(
            DEFAULT_FIELD_BITS,
            DEFAULT_REDUCTION_POLY,
            DEFAULT_PRIMITIVE_ELEMENT,
        )
        .expect("default field parameters are valid")
    }

    /// Process-wide shared default context.
    pub fn shared_default() -> Arc<GfContext> {
        static DEFAULT: OnceLock<Arc<GfContext>> = OnceLock::new();
        DEFAULT
            .get_or_init(|| Arc::new(GfContext::default_gf256()))
            .clone()
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field size Q = 2^m.
    pub fn q(&self) -> u16 {
        self.q
    }

    pub fn reduction_poly(&self) -> u16 {
        self.reduction_poly
    }

    pub fn primitive_element(&self) -> GfElement {
        self.primitive_element
    }

    /// Discrete log of a nonzero element.
    #[inline]
    pub fn log(&self, x: GfElement) -> Option<u8> {
        if x.is_zero() {
            None
        } else {
            self.log_table.get(usize::from(x.0) - 1).copied()
        }
    }

    /// `primitive_element^exp` for exp in [0, Q - 1).
    #[inline]
    pub fn antilog(&self, exp: usize) -> Option<GfElement> {
        self.antilog_table.get(exp).copied().map(GfElement)
    }

    pub fn log_table(&self) -> &[u8] {
        &self.log_table
    }

    pub fn antilog_table(&self) -> &[u8] {
        &self.antilog_table
    }

    /// Total entries held by the log and antilog tables.
    pub fn table_entries(&self) -> usize {
        self.log_table.len() + self.antilog_table.len()
    }

    /// Bytes held by the log and antilog tables.
    pub fn table_bytes(&self) -> usize {
        self.table_entries() * std::mem::size_of::<u8>()
    }

    #[inline]
    pub fn contains(&self, x: GfElement) -> bool {
        u16::from(x.0) < self.q
    }

    /// Shift-and-add multiplication, m iterations.
    #[inline]
    pub fn mul_peasant(&self, a: GfElement, b: GfElement) -> GfElement {
        self.peasant_loop(a, b).0
    }

    /// Returns the product together with the number of loop iterations run.
    #[inline]
    fn peasant_loop(&self, a: GfElement, b: GfElement) -> (GfElement, u32) {
        let width_mask = self.q - 1;
        // The x^m term is implied by the shift out of the top bit.
        let reduction = self.reduction_poly & width_mask;
        let mut alpha = u16::from(a.0);
        let mut beta = u16::from(b.0);
        let mut product = 0u16;
        let mut iterations = 0;
        for _ in 0..self.m {
            product ^= (beta & 1).wrapping_neg() & alpha;
            let mask = (alpha >> (self.m - 1)) & 1;
            alpha = ((alpha << 1) & width_mask) ^ (reduction & mask.wrapping_neg());
            beta >>= 1;
            iterations += 1;
        }
        (GfElement(product as u8), iterations)
    }

    /// Log/antilog multiplication with the exponent wrapped by one
    /// conditional subtraction of Q-1 instead of a modulo.
    #[inline]
    pub fn mul_table(&self, a: GfElement, b: GfElement) -> GfElement {
        if a.is_zero() || b.is_zero() {
            return GfElement::ZERO;
        }
        let order = usize::from(self.q - 1);
        let mut sum =
            usize::from(self.log_table[usize::from(a.0) - 1]) + usize::from(self.log_table[usize::from(b.0) - 1]);
        if sum >= order {
            sum -= order;
        }
        GfElement(self.antilog_table[sum])
    }

    #[inline]
    pub fn mul(&self, algorithm: MulAlgorithm, a: GfElement, b: GfElement) -> GfElement {
        match algorithm {
            MulAlgorithm::Peasant => self.mul_peasant(a, b),
            MulAlgorithm::LogTable => self.mul_table(a, b),
        }
    }

    /// Multiplicative inverse via antilog[(Q-1) - log a].
    pub fn inverse(&self, a: GfElement) -> Result<GfElement, GfError> {
        let log = self.log(a).ok_or(GfError::InverseOfZero)?;
        if log == 0 {
            return Ok(GfElement::ONE);
        }
        let order = usize::from(self.q - 1);
        Ok(GfElement(self.antilog_table[order - usize::from(log)]))
    }
}

/// Builds a field context; see [`GfContext::new`].
pub fn build_context(m: u32, reduction_poly: u16, primitive_element: u8) -> Result<GfContext, GfError> {
    GfContext::new(m, reduction_poly, primitive_element)
}

fn poly_degree(p: u16) -> Option<u32> {
    if p == 0 {
        None
    } else {
        Some(15 - p.leading_zeros())
    }
}

/// Remainder of carry-less polynomial division over GF(2).
fn poly_rem(mut dividend: u16, divisor: u16) -> u16 {
    let d = poly_degree(divisor).expect("nonzero divisor");
    while let Some(deg) = poly_degree(dividend) {
        if deg < d {
            break;
        }
        dividend ^= divisor << (deg - d);
    }
    dividend
}

fn is_irreducible(poly: u16) -> bool {
    let Some(deg) = poly_degree(poly) else {
        return false;
    };
    if deg == 0 {
        return false;
    }
    // Any factorization has a factor of degree <= deg / 2.
    let max_factor = 1u16 << (deg / 2 + 1);
    (2..max_factor).all(|f| poly_rem(poly, f) != 0)
}

/// A context plus a chosen multiplication backend, counting multiplications.
///
/// The counter is per instance: a clone starts from the original's current
/// count and then counts independently.
#[derive(Clone)]
pub struct Field {
    ctx: Arc<GfContext>,
    algorithm: MulAlgorithm,
    muls: Cell<u64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("ctx", &self.ctx)
            .field("algorithm", &self.algorithm)
            .field("muls", &self.muls.get())
            .finish()
    }
}

impl PartialEq for Field {
    /// Two fields are equal when they compute the same arithmetic.
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.algorithm == other.algorithm
    }
}

impl Field {
    pub fn new(ctx: Arc<GfContext>, algorithm: MulAlgorithm) -> Self {
        Field {
            ctx,
            algorithm,
            muls: Cell::new(0),
        }
    }

    pub fn gf256(algorithm: MulAlgorithm) -> Self {
        Self::new(GfContext::shared_default(), algorithm)
    }

    pub fn ctx(&self) -> &GfContext {
        &self.ctx
    }

    pub fn shared_ctx(&self) -> Arc<GfContext> {
        self.ctx.clone()
    }

    pub fn algorithm(&self) -> MulAlgorithm {
        self.algorithm
    }

    pub fn with_algorithm(&self, algorithm: MulAlgorithm) -> Self {
        Self::new(self.ctx.clone(), algorithm)
    }

    #[inline]
    pub fn mul(&self, a: GfElement, b: GfElement) -> GfElement {
        self.muls.set(self.muls.get() + 1);
        self.ctx.mul(self.algorithm, a, b)
    }

    #[inline]
    pub fn inverse(&self, a: GfElement) -> Result<GfElement, GfError> {
        self.ctx.inverse(a)
    }

    /// Multiplications executed through this handle so far.
    pub fn mul_count(&self) -> u64 {
        self.muls.get()
    }

    pub fn reset_mul_count(&self) {
        self.muls.set(0);
    }
}
