//! Exact p-adic bookkeeping over `Q_p`: valuations, norms, the standard
//! additive character, digit lifts and addresses of balls in `Z_p^n`.
//!
//! A ball of depth `d` in `Z_p^n` is `a + p^d Z_p^n`. It is addressed by the
//! sequence of its first `d` digit tuples. Each tuple `(l_1, ..., l_n)` with
//! `l_i in {0, ..., p-1}` is packed into a single code
//! `l_1 p^(n-1) + ... + l_n`, so lexicographic order on tuples is numeric
//! order on codes.

use std::f64::consts::PI;
use std::fmt;

use num::bigint::BigInt;
use num::complex::Complex64;
use num::integer::Integer;
use num::rational::BigRational;
use num::traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Prime, dimension and truncation depth shared by every object of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeContext {
    p: u32,
    n: usize,
    m: usize,
}

impl PrimeContext {
    pub fn new(p: u32, n: usize, m: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::invalid(format!("p = {p} is not prime")));
        }
        if n == 0 {
            return Err(Error::invalid("dimension n must be at least 1"));
        }
        if m == 0 {
            return Err(Error::invalid("truncation depth m must be at least 1"));
        }
        let ctx = PrimeContext { p, n, m };
        // cells per root must fit comfortably in memory-addressable counts
        if (p as f64).powi((n * m) as i32) > 1e9 {
            return Err(Error::invalid(format!(
                "p^(n*m) = {p}^{} is too large for a dense discretisation",
                n * m
            )));
        }
        Ok(ctx)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.m
    }

    /// Number of children of a ball, `p^n`.
    pub fn branching(&self) -> usize {
        (self.p as usize).pow(self.n as u32)
    }

    /// Number of depth-`m` cells below one root ball, `p^(m n)`.
    pub fn cells_per_root(&self) -> usize {
        self.branching().pow(self.m as u32)
    }

    pub fn with_depth(&self, m: usize) -> Result<Self> {
        PrimeContext::new(self.p, self.n, m)
    }

    /// Packs a digit tuple into its code.
    pub fn encode_digit(&self, tuple: &[u32]) -> Result<u32> {
        if tuple.len() != self.n {
            return Err(Error::invalid(format!(
                "digit tuple has {} components, expected {}",
                tuple.len(),
                self.n
            )));
        }
        let mut code = 0u32;
        for &l in tuple {
            if l >= self.p {
                return Err(Error::invalid(format!("digit {l} out of range for p = {}", self.p)));
            }
            code = code * self.p + l;
        }
        Ok(code)
    }

    /// Unpacks a code into its digit tuple.
    pub fn decode_digit(&self, code: u32) -> Vec<u32> {
        let mut out = vec![0; self.n];
        let mut c = code;
        for slot in out.iter_mut().rev() {
            *slot = c % self.p;
            c /= self.p;
        }
        out
    }

    /// `p^(-e)` as an exact rational; `e` may be negative.
    pub fn p_power(&self, e: i64) -> BigRational {
        let p = BigInt::from(self.p);
        if e >= 0 {
            BigRational::new(BigInt::one(), p.pow(e as u32))
        } else {
            BigRational::from_integer(p.pow((-e) as u32))
        }
    }
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

fn int_valuation(x: &BigInt, p: &BigInt) -> (i64, BigInt) {
    let mut v = 0;
    let mut rest = x.clone();
    loop {
        let (q, r) = rest.div_rem(p);
        if !r.is_zero() {
            return (v, rest);
        }
        rest = q;
        v += 1;
    }
}

/// The p-adic valuation of `x` and its norm `|x|_p = p^(-v)`. Zero has
/// infinite valuation and norm zero.
pub fn valuation_and_norm(ctx: &PrimeContext, x: &BigRational) -> (Valuation, BigRational) {
    if x.is_zero() {
        return (Valuation::Infinite, BigRational::zero());
    }
    let p = BigInt::from(ctx.p);
    let (vn, _) = int_valuation(x.numer(), &p);
    let (vd, _) = int_valuation(x.denom(), &p);
    let v = vn - vd;
    (Valuation::Finite(v), ctx.p_power(v))
}

/// Max norm of a vector in `Q_p^n`.
pub fn vector_norm(ctx: &PrimeContext, xs: &[BigRational]) -> BigRational {
    xs.iter()
        .map(|x| valuation_and_norm(ctx, x).1)
        .max()
        .unwrap_or_else(BigRational::zero)
}

/// A complex number on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCharacterValue(Complex64);

impl UnitCharacterValue {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Value of `exp(2 pi i a / b)`.
    pub fn from_fraction(a: u64, b: u64) -> Self {
        let theta = 2.0 * PI * (a % b) as f64 / b as f64;
        UnitCharacterValue(Complex64::new(theta.cos(), theta.sin()))
    }
}

/// The p-adic fractional part `{x}_p`, for `x` whose denominator is a power
/// of `p`. Returned as `(a, p^r)` with `0 <= a < p^r`.
pub fn fractional_part(ctx: &PrimeContext, x: &BigRational) -> Result<(BigInt, BigInt)> {
    let p = BigInt::from(ctx.p);
    let (_, unit) = int_valuation(x.denom(), &p);
    if !unit.is_one() {
        return Err(Error::invalid(format!(
            "{x} has a denominator that is not a power of {}",
            ctx.p
        )));
    }
    let den = x.denom().clone();
    let a = x.numer().mod_floor(&den);
    Ok((a, den))
}

/// Standard additive character `chi(x) = exp(2 pi i {x}_p)`.
pub fn character_chi(ctx: &PrimeContext, x: &BigRational) -> Result<UnitCharacterValue> {
    let (a, den) = fractional_part(ctx, x)?;
    if den.is_one() {
        return Ok(UnitCharacterValue(Complex64::new(1.0, 0.0)));
    }
    // reduce the fraction further before converting to floating point
    let g = a.gcd(&den);
    let (a, den) = (&a / &g, &den / &g);
    match (a.to_u64(), den.to_u64()) {
        (Some(a), Some(den)) => Ok(UnitCharacterValue::from_fraction(a, den)),
        _ => {
            let frac = BigRational::new(a, den).to_f64().unwrap_or(0.0);
            let theta = 2.0 * PI * frac;
            Ok(UnitCharacterValue(Complex64::new(theta.cos(), theta.sin())))
        }
    }
}

/// Lift of a residue tuple in `F_p^n` to its representative in `{0..p-1}^n`.
pub fn digit_lift_tau(ctx: &PrimeContext, j: &[u32]) -> Result<Vec<i64>> {
    if j.len() != ctx.n {
        return Err(Error::invalid(format!(
            "index vector has {} components, expected {}",
            j.len(),
            ctx.n
        )));
    }
    j.iter()
        .map(|&c| {
            if c < ctx.p {
                Ok(i64::from(c))
            } else {
                Err(Error::invalid(format!("residue {c} out of range for p = {}", ctx.p)))
            }
        })
        .collect()
}

/// Address of a ball in one tree: the digit codes of its first `depth` levels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BallAddress {
    digits: Vec<u32>,
}

impl BallAddress {
    pub fn root() -> Self {
        BallAddress { digits: Vec::new() }
    }

    pub fn from_codes(digits: Vec<u32>) -> Self {
        BallAddress { digits }
    }

    pub fn codes(&self) -> &[u32] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn child(&self, code: u32) -> Self {
        let mut digits = self.digits.clone();
        digits.push(code);
        BallAddress { digits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.digits.is_empty() {
            None
        } else {
            Some(BallAddress {
                digits: self.digits[..self.digits.len() - 1].to_vec(),
            })
        }
    }

    pub fn truncate(&self, depth: usize) -> Self {
        BallAddress {
            digits: self.digits[..depth.min(self.digits.len())].to_vec(),
        }
    }

    /// `self` contains `other` (non-strictly).
    pub fn is_prefix_of(&self, other: &BallAddress) -> bool {
        other.digits.starts_with(&self.digits)
    }

    pub fn common_prefix_len(&self, other: &BallAddress) -> usize {
        self.digits
            .iter()
            .zip(&other.digits)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl fmt::Display for BallAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.digits.iter().map(u32::to_string).collect();
        write!(f, "[{}]", parts.join("/"))
    }
}

/// Smallest ball of the tree containing both arguments.
pub fn ball_join(a: &BallAddress, b: &BallAddress) -> BallAddress {
    a.truncate(a.common_prefix_len(b))
}

/// Canonical measure of a ball: `density * p^(-depth n)`.
pub fn ball_measure(ctx: &PrimeContext, a: &BallAddress, density: &BigRational) -> BigRational {
    density * ctx.p_power((a.depth() * ctx.n) as i64)
}

/// `x^(1/n)` for a positive rational, in floating point.
pub fn rational_root(x: &BigRational, n: usize) -> f64 {
    let v = x.to_f64().unwrap_or(f64::NAN);
    match n {
        1 => v,
        2 => v.sqrt(),
        _ => v.powf(1.0 / n as f64),
    }
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn is_positive(x: &BigRational) -> bool {
    x.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn ctx(p: u32, n: usize) -> PrimeContext {
        PrimeContext::new(p, n, 2).unwrap()
    }

    #[test]
    fn rejects_composite_and_degenerate() {
        assert!(PrimeContext::new(4, 1, 1).is_err());
        assert!(PrimeContext::new(1, 1, 1).is_err());
        assert!(PrimeContext::new(2, 0, 1).is_err());
        assert!(PrimeContext::new(2, 1, 0).is_err());
        assert!(PrimeContext::new(7, 3, 2).is_ok());
    }

    #[test]
    fn valuations() {
        let c2 = ctx(2, 1);
        let c3 = ctx(3, 1);
        assert_eq!(valuation_and_norm(&c2, &q(12, 1)), (Valuation::Finite(2), q(1, 4)));
        assert_eq!(valuation_and_norm(&c3, &q(1, 1)), (Valuation::Finite(0), q(1, 1)));
        assert_eq!(valuation_and_norm(&c2, &q(1, 2)), (Valuation::Finite(-1), q(2, 1)));
        assert_eq!(valuation_and_norm(&c2, &q(0, 1)), (Valuation::Infinite, q(0, 1)));
        assert_eq!(vector_norm(&c2, &[q(4, 1), q(3, 2)]), q(2, 1));
    }

    #[test]
    fn characters() {
        let v = character_chi(&ctx(2, 1), &q(1, 2)).unwrap().value();
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let v = character_chi(&ctx(5, 1), &q(7, 1)).unwrap().value();
        assert_eq!(v, Complex64::new(1.0, 0.0));
        let v = character_chi(&ctx(3, 1), &q(1, 3)).unwrap().value();
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!((v - w).norm() < 1e-15);
        // negative arguments wrap into [0, 1)
        let v = character_chi(&ctx(3, 1), &q(-1, 3)).unwrap().value();
        assert!((v - w.conj()).norm() < 1e-15);
        assert!(character_chi(&ctx(3, 1), &q(1, 2)).is_err());
    }

    #[test]
    fn lifts() {
        assert_eq!(digit_lift_tau(&ctx(3, 2), &[2, 1]).unwrap(), vec![2, 1]);
        assert_eq!(digit_lift_tau(&ctx(2, 1), &[0]).unwrap(), vec![0]);
        assert_eq!(digit_lift_tau(&ctx(5, 1), &[4]).unwrap(), vec![4]);
        assert!(digit_lift_tau(&ctx(5, 1), &[5]).is_err());
        assert!(digit_lift_tau(&ctx(5, 1), &[1, 1]).is_err());
    }

    #[test]
    fn digit_codes_round_trip() {
        let c = ctx(3, 2);
        assert_eq!(c.encode_digit(&[2, 1]).unwrap(), 7);
        assert_eq!(c.decode_digit(7), vec![2, 1]);
        assert!(c.encode_digit(&[3, 0]).is_err());
    }

    #[test]
    fn joins() {
        let a = BallAddress::from_codes(vec![1, 0, 1]);
        assert_eq!(ball_join(&a, &a), a);
        let z = BallAddress::root();
        assert_eq!(ball_join(&z.child(0), &z.child(1)), z);
        let pre = BallAddress::from_codes(vec![1, 0]);
        assert_eq!(ball_join(&pre, &a), pre);
        assert!(pre.is_prefix_of(&a));
        assert!(!a.is_prefix_of(&pre));
    }

    #[test]
    fn measures() {
        let c = PrimeContext::new(2, 2, 3).unwrap();
        let a = BallAddress::from_codes(vec![0, 1, 3]);
        assert_eq!(ball_measure(&c, &a, &q(1, 1)), q(1, 64));
        let c = PrimeContext::new(2, 1, 3).unwrap();
        assert_eq!(ball_measure(&c, &BallAddress::root(), &q(1, 2)), q(1, 2));
        let c = PrimeContext::new(3, 1, 3).unwrap();
        assert_eq!(
            ball_measure(&c, &BallAddress::from_codes(vec![0, 2]), &q(1, 1)),
            q(1, 9)
        );
    }

    fn small_rational() -> impl Strategy<Value = BigRational> {
        (-500i64..500, 0u32..5, 1i64..4).prop_filter_map("nonzero", |(a, e, u)| {
            if a == 0 {
                None
            } else {
                Some(q(a, 3i64.pow(e) * u))
            }
        })
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative_and_ultrametric(x in small_rational(), y in small_rational()) {
            let c = ctx(3, 1);
            let nx = valuation_and_norm(&c, &x).1;
            let ny = valuation_and_norm(&c, &y).1;
            prop_assert_eq!(valuation_and_norm(&c, &(&x * &y)).1, &nx * &ny);
            let s = valuation_and_norm(&c, &(&x + &y)).1;
            prop_assert!(s <= nx.max(ny));
        }

        #[test]
        fn character_is_homomorphism(a in -200i64..200, b in -200i64..200, e in 0u32..4, f in 0u32..4) {
            let c = ctx(3, 1);
            let x = q(a, 3i64.pow(e));
            let y = q(b, 3i64.pow(f));
            let lhs = character_chi(&c, &(&x + &y)).unwrap().value();
            let rhs = character_chi(&c, &x).unwrap().value() * character_chi(&c, &y).unwrap().value();
            prop_assert!((lhs - rhs).norm() < 1e-12);
            prop_assert!((lhs.norm() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn ball_measure_decreases_by_p_to_minus_n(p in prop::sample::select(vec![2u32, 3, 5]), n in 1usize..3, d in 0usize..5) {
            let c = PrimeContext::new(p, n, 1).unwrap();
            let rho = q(3, 7);
            let a = BallAddress::from_codes(vec![0; d]);
            let ratio = ball_measure(&c, &a.child(0), &rho) / ball_measure(&c, &a, &rho);
            prop_assert_eq!(ratio, c.p_power(n as i64));
        }
    }
}
