//! Binary extension fields GF(2^w), 1 <= w <= 16, and a systematic
//! evaluation-point (Reed-Solomon style) MDS code over them.
//!
//! Multiplication uses log/antilog tables generated from a fixed primitive
//! polynomial per width, so every codeword is bit-reproducible.
//!
//! Codeword layout: the `k` systematic symbols come first, followed by the
//! `n - k` parity symbols. Position `i` is the evaluation of the unique
//! polynomial of degree `< k` through the data at the field element `i`.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 16;

/// Primitive polynomial for each width, indexed by `w`, including the
/// leading `x^w` term.
pub const PRIMITIVE_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

/// A field symbol. Addition is XOR and needs no field context; use
/// [`Field`] for multiplication.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u16);

impl Symbol {
    pub const ZERO: Symbol = Symbol(0);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

// addition in characteristic 2 is XOR
#[allow(clippy::suspicious_arithmetic_impl)]
impl Add for Symbol {
    type Output = Symbol;
    #[inline]
    fn add(self, rhs: Symbol) -> Symbol {
        Symbol(self.0 ^ rhs.0)
    }
}

#[allow(clippy::suspicious_op_assign_impl)]
impl AddAssign for Symbol {
    #[inline]
    fn add_assign(&mut self, rhs: Symbol) {
        self.0 ^= rhs.0;
    }
}

impl std::iter::Sum for Symbol {
    fn sum<I: Iterator<Item = Symbol>>(iter: I) -> Symbol {
        iter.fold(Symbol::ZERO, |a, b| a + b)
    }
}

/// GF(2^w) with precomputed log/antilog tables.
pub struct Field {
    width: u32,
    poly: u32,
    // exp is doubled so that exp[log a + log b] needs no reduction
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("width", &self.width)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

static FIELDS: [OnceLock<Field>; 17] = [const { OnceLock::new() }; 17];

impl Field {
    /// Shared field instance for width `w`.
    pub fn get(width: u32) -> Result<&'static Field> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::Domain(format!(
                "field width must be in 1..={MAX_WIDTH}, got {width}"
            )));
        }
        Ok(FIELDS[width as usize].get_or_init(|| Field::build(width)))
    }

    fn build(width: u32) -> Field {
        let poly = PRIMITIVE_POLYS[width as usize];
        let size = 1usize << width;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            assert!(
                i == 0 || x != 1,
                "polynomial {poly:#x} is not primitive for width {width}"
            );
            *slot = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << width) != 0 {
                x ^= poly;
            }
        }
        assert_eq!(
            x, 1,
            "polynomial {poly:#x} is not primitive for width {width}"
        );
        for i in 0..order {
            exp[order + i] = exp[i];
        }
        Field {
            width,
            poly,
            exp,
            log,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, `2^w`.
    pub fn size(&self) -> usize {
        1 << self.width
    }

    fn order(&self) -> usize {
        self.size() - 1
    }

    pub fn contains(&self, s: Symbol) -> bool {
        (s.0 as usize) < self.size()
    }

    pub fn check(&self, s: Symbol) -> Result<Symbol> {
        if self.contains(s) {
            Ok(s)
        } else {
            Err(Error::Width {
                value: s.0 as u32,
                width: self.width,
            })
        }
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a.0 == 0 || b.0 == 0 {
            return Symbol::ZERO;
        }
        let i = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        Symbol(self.exp[i])
    }

    /// Multiplicative inverse. Panics on zero.
    #[inline]
    pub fn inv(&self, a: Symbol) -> Symbol {
        assert!(!a.is_zero(), "inverse of zero in GF(2^{})", self.width);
        let l = self.log[a.0 as usize] as usize;
        Symbol(self.exp[(self.order() - l) % self.order()])
    }

    #[inline]
    pub fn div(&self, a: Symbol, b: Symbol) -> Symbol {
        assert!(!b.is_zero(), "division by zero in GF(2^{})", self.width);
        if a.is_zero() {
            return Symbol::ZERO;
        }
        let order = self.order();
        let i = self.log[a.0 as usize] as usize + order - self.log[b.0 as usize] as usize;
        Symbol(self.exp[i % order])
    }

    pub fn pow(&self, a: Symbol, e: u64) -> Symbol {
        if e == 0 {
            return Symbol(1);
        }
        if a.is_zero() {
            return Symbol::ZERO;
        }
        let l = self.log[a.0 as usize] as u64 * (e % self.order() as u64);
        Symbol(self.exp[(l % self.order() as u64) as usize])
    }

    /// Uniformly random element.
    pub fn random<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        Symbol(rng.random_range(0..self.size()) as u16)
    }
}

/// Barycentric weights `1 / prod_{j != i} (x_i - x_j)`.
fn barycentric_weights(field: &Field, points: &[Symbol]) -> Vec<Symbol> {
    points
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let denom = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Symbol(1), |acc, (_, &xj)| field.mul(acc, xi + xj));
            field.inv(denom)
        })
        .collect()
}

/// Coefficients `c_i` with `f(x) = sum_i c_i f(x_i)` for any polynomial of
/// degree `< points.len()`. `x` must not be one of the points.
fn lagrange_row(field: &Field, points: &[Symbol], weights: &[Symbol], x: Symbol) -> Vec<Symbol> {
    let span = points
        .iter()
        .fold(Symbol(1), |acc, &xi| field.mul(acc, x + xi));
    points
        .iter()
        .zip(weights)
        .map(|(&xi, &wi)| field.mul(span, field.div(wi, x + xi)))
        .collect()
}

/// A systematic `(n, k)` MDS code over GF(2^w).
#[derive(Debug)]
pub struct SystematicCode {
    field: &'static Field,
    k: usize,
    n: usize,
    // parity[t][j]: weight of data symbol j in parity symbol t
    parity: Vec<Vec<Symbol>>,
}

impl SystematicCode {
    pub fn new(k: usize, n: usize, width: u32) -> Result<Self> {
        let field = Field::get(width)?;
        if k == 0 || n < k {
            return Err(Error::Domain(format!(
                "invalid code dimensions (n={n}, k={k})"
            )));
        }
        if n > field.size() {
            return Err(Error::Domain(format!(
                "code length {n} exceeds the {} points of GF(2^{width})",
                field.size()
            )));
        }
        let points: Vec<Symbol> = (0..k).map(|i| Symbol(i as u16)).collect();
        let weights = barycentric_weights(field, &points);
        let parity = (k..n)
            .map(|t| lagrange_row(field, &points, &weights, Symbol(t as u16)))
            .collect();
        Ok(SystematicCode {
            field,
            k,
            n,
            parity,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &'static Field {
        self.field
    }

    fn check_data(&self, data: &[Symbol]) -> Result<()> {
        if data.len() != self.k {
            return Err(Error::Length {
                expected: self.k,
                actual: data.len(),
            });
        }
        for &s in data {
            self.field.check(s)?;
        }
        Ok(())
    }

    /// The `n - k` parity symbols of `data`.
    pub fn parity(&self, data: &[Symbol]) -> Result<Vec<Symbol>> {
        self.check_data(data)?;
        Ok(self
            .parity
            .iter()
            .map(|row| {
                row.iter()
                    .zip(data)
                    .map(|(&c, &d)| self.field.mul(c, d))
                    .sum()
            })
            .collect())
    }

    /// Full codeword: `data` followed by its parity.
    pub fn encode(&self, data: &[Symbol]) -> Result<Vec<Symbol>> {
        let mut word = data.to_vec();
        word.extend(self.parity(data)?);
        Ok(word)
    }

    /// Recovers the systematic part from exactly `k` known codeword positions.
    pub fn reconstruct(&self, known: &[(usize, Symbol)]) -> Result<Vec<Symbol>> {
        if known.len() != self.k {
            return Err(Error::Position(format!(
                "need exactly {} known positions, got {}",
                self.k,
                known.len()
            )));
        }
        let mut seen = HashSet::with_capacity(known.len());
        let mut out = vec![None; self.k];
        for &(pos, value) in known {
            if pos >= self.n {
                return Err(Error::Position(format!(
                    "position {pos} outside 0..{}",
                    self.n
                )));
            }
            if !seen.insert(pos) {
                return Err(Error::Position(format!("duplicate position {pos}")));
            }
            self.field.check(value)?;
            if pos < self.k {
                out[pos] = Some(value);
            }
        }
        if out.iter().all(Option::is_some) {
            return Ok(out.into_iter().flatten().collect());
        }

        let points: Vec<Symbol> = known.iter().map(|&(pos, _)| Symbol(pos as u16)).collect();
        let weights = barycentric_weights(self.field, &points);
        Ok(out
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.unwrap_or_else(|| {
                    lagrange_row(self.field, &points, &weights, Symbol(i as u16))
                        .into_iter()
                        .zip(known)
                        .map(|(c, &(_, y))| self.field.mul(c, y))
                        .sum()
                })
            })
            .collect())
    }
}
