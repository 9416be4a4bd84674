//! Symbolic descriptors for positive integer sequences `s_0, s_1, ...`.
//!
//! Only four shapes are admitted so that growth, monotonicity and ratio
//! bounds can be read off exactly.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result, Q};

/// A positive integer sequence indexed from 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Seq {
    /// `s_n = c`.
    Constant(u64),
    /// `s_n = c * rho^n`.
    Geometric { c: u64, rho: u64 },
    /// `s_n = coeffs[0] + coeffs[1] n + coeffs[2] n^2 + ...`.
    Polynomial(Vec<u64>),
    /// `s_n = values[n]` for `n < values.len()`, then `s_n = tail(n - values.len())`.
    List { values: Vec<u64>, tail: Box<Seq> },
}

/// Asymptotic class `s_n ≍ n^degree * rho^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Growth {
    pub rho: Q,
    pub degree: i64,
}

impl Growth {
    pub fn one() -> Self {
        Growth { rho: Q::one(), degree: 0 }
    }

    pub fn mul(&self, other: &Growth) -> Growth {
        Growth { rho: &self.rho * &other.rho, degree: self.degree + other.degree }
    }

    pub fn pow(&self, p: i32) -> Growth {
        let rho = if p >= 0 {
            num_traits::pow(self.rho.clone(), p as usize)
        } else {
            num_traits::pow(self.rho.recip(), p.unsigned_abs() as usize)
        };
        Growth { rho, degree: self.degree * p as i64 }
    }

    /// Whether `Σ_n n^degree rho^n` converges.
    pub fn summable(&self) -> bool {
        let one = Q::one();
        self.rho < one || (self.rho == one && self.degree <= -2)
    }
}

impl Seq {
    pub fn constant(c: u64) -> Self {
        Seq::Constant(c)
    }

    pub fn geometric(c: u64, rho: u64) -> Self {
        Seq::Geometric { c, rho }
    }

    /// Checks that every term is a positive integer.
    pub fn validate_positive(&self) -> Result<()> {
        match self {
            Seq::Constant(c) if *c == 0 => Err(Error::InvalidFamilyParams("constant 0".into())),
            Seq::Geometric { c, rho } if *c == 0 || *rho == 0 => {
                Err(Error::InvalidFamilyParams("geometric with zero factor".into()))
            }
            Seq::Polynomial(cs) if cs.first().copied().unwrap_or(0) == 0 => {
                Err(Error::InvalidFamilyParams("polynomial must have a positive constant term".into()))
            }
            Seq::List { values, tail } => {
                if values.iter().any(|&x| x == 0) {
                    return Err(Error::InvalidFamilyParams("list contains 0".into()));
                }
                tail.validate_positive()
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, n: usize) -> BigUint {
        match self {
            Seq::Constant(c) => BigUint::from(*c),
            Seq::Geometric { c, rho } => BigUint::from(*c) * BigUint::from(*rho).pow(n as u32),
            Seq::Polynomial(cs) => {
                let x = BigUint::from(n);
                let mut acc = BigUint::zero();
                for c in cs.iter().rev() {
                    acc = acc * &x + BigUint::from(*c);
                }
                acc
            }
            Seq::List { values, tail } => {
                if n < values.len() {
                    BigUint::from(values[n])
                } else {
                    tail.at(n - values.len())
                }
            }
        }
    }

    pub fn at_u64(&self, n: usize) -> Result<u64> {
        self.at(n).to_u64().ok_or_else(|| Error::Overflow(format!("sequence term {} does not fit in u64", n)))
    }

    pub fn at_q(&self, n: usize) -> Q {
        Q::from_integer(BigInt::from(self.at(n)))
    }

    pub fn at_f64(&self, n: usize) -> f64 {
        self.at(n).to_f64().unwrap_or(f64::INFINITY)
    }

    /// Partial sum `s_0 + ... + s_{n-1}`.
    pub fn prefix_sum(&self, n: usize) -> BigUint {
        (0..n).fold(BigUint::zero(), |acc, i| acc + self.at(i))
    }

    pub fn growth(&self) -> Growth {
        match self {
            Seq::Constant(_) => Growth::one(),
            Seq::Geometric { rho, .. } => Growth { rho: Q::from_integer(BigInt::from(*rho)), degree: 0 },
            Seq::Polynomial(cs) => {
                let deg = cs.iter().rposition(|&c| c != 0).unwrap_or(0);
                Growth { rho: Q::one(), degree: deg as i64 }
            }
            Seq::List { tail, .. } => tail.growth(),
        }
    }

    /// Whether the sequence is nondecreasing from index 0 on.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Seq::Constant(_) | Seq::Geometric { .. } | Seq::Polynomial(_) => true,
            Seq::List { values, tail } => {
                values.windows(2).all(|w| w[0] <= w[1])
                    && values.last().map_or(true, |&l| BigUint::from(l) <= tail.at(0))
                    && tail.is_nondecreasing()
            }
        }
    }

    /// Whether the sequence is bounded (then it is eventually constant).
    pub fn is_bounded(&self) -> bool {
        let g = self.growth();
        g.rho == Q::one() && g.degree == 0
    }

    /// Supremum of `s_m` over `m >= from`, when finite.
    pub fn sup_from(&self, from: usize) -> Option<u64> {
        match self {
            Seq::Constant(c) => Some(*c),
            Seq::Geometric { c, rho: 1 } => Some(*c),
            Seq::Polynomial(cs) if cs.iter().skip(1).all(|&c| c == 0) => cs.first().copied(),
            Seq::List { values, tail } => {
                let t = tail.sup_from(from.saturating_sub(values.len()))?;
                Some(values.iter().skip(from).copied().fold(t, u64::max))
            }
            _ => None,
        }
    }

    /// Limit of a bounded sequence.
    pub fn limit(&self) -> Option<u64> {
        match self {
            Seq::Constant(c) => Some(*c),
            Seq::Geometric { c, rho: 1 } => Some(*c),
            Seq::Polynomial(cs) if cs.iter().skip(1).all(|&c| c == 0) => cs.first().copied(),
            Seq::List { tail, .. } => tail.limit(),
            _ => None,
        }
    }

    /// Bounds `(lo, hi)` on the ratio `s_{m+1}/s_m` valid for every `m >= from`.
    ///
    /// The bounds are rounded outward so they can be used in certificates.
    pub fn ratio_bounds(&self, from: usize) -> (f64, f64) {
        match self {
            Seq::Constant(_) => (1.0, 1.0),
            Seq::Geometric { rho, .. } => (*rho as f64, *rho as f64),
            Seq::Polynomial(cs) => {
                let deg = cs.iter().rposition(|&c| c != 0).unwrap_or(0) as i32;
                if deg == 0 {
                    return (1.0, 1.0);
                }
                let hi = if from == 0 {
                    let r0 = ratio_f64(&self.at(1), &self.at(0));
                    let r1 = libm::pow(2.0, deg as f64);
                    r0.max(r1)
                } else {
                    libm::pow((from as f64 + 1.0) / from as f64, deg as f64)
                };
                (1.0, hi.next_up())
            }
            Seq::List { values, tail } => {
                let k = values.len();
                if from >= k {
                    return tail.ratio_bounds(from - k);
                }
                let (mut lo, mut hi) = tail.ratio_bounds(0);
                for m in from..k {
                    let r = ratio_f64(&self.at(m + 1), &self.at(m));
                    lo = lo.min(r.next_down());
                    hi = hi.max(r.next_up());
                }
                (lo, hi)
            }
        }
    }
}

fn ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    let q = Q::new(BigInt::from(a.clone()), BigInt::from(b.clone()));
    num_traits::ToPrimitive::to_f64(&q).unwrap_or(f64::INFINITY)
}

impl fmt::Display for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seq::Constant(c) => write!(f, "constant:{}", c),
            Seq::Geometric { c, rho } => write!(f, "geometric:{},{}", c, rho),
            Seq::Polynomial(cs) => {
                write!(f, "poly:")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", c)?;
                }
                Ok(())
            }
            Seq::List { values, tail } => {
                write!(f, "list:")?;
                for (i, c) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", c)?;
                }
                write!(f, ";{}", tail)
            }
        }
    }
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|_| Error::InvalidFamilyParams(format!("bad integer '{}'", x))))
        .collect()
}

/// Parses `constant:C`, `geometric:C,RHO`, `poly:C0,C1,...` and
/// `list:V0,V1,...;TAIL`.
impl FromStr for Seq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) =
            s.split_once(':').ok_or_else(|| Error::InvalidFamilyParams(format!("missing ':' in '{}'", s)))?;
        let seq = match kind.trim() {
            "constant" => {
                let v = parse_u64_list(rest)?;
                if v.len() != 1 {
                    return Err(Error::InvalidFamilyParams("constant takes one value".into()));
                }
                Seq::Constant(v[0])
            }
            "geometric" => {
                let v = parse_u64_list(rest)?;
                if v.len() != 2 {
                    return Err(Error::InvalidFamilyParams("geometric takes c,rho".into()));
                }
                Seq::Geometric { c: v[0], rho: v[1] }
            }
            "poly" | "polynomial" => Seq::Polynomial(parse_u64_list(rest)?),
            "list" => {
                let (vals, tail) = rest
                    .split_once(';')
                    .ok_or_else(|| Error::InvalidFamilyParams(String::from("list needs ';' before its tail")))?;
                Seq::List { values: parse_u64_list(vals)?, tail: Box::new(tail.parse()?) }
            }
            other => return Err(Error::InvalidFamilyParams(format!("unknown sequence kind '{}'", other))),
        };
        seq.validate_positive()?;
        Ok(seq)
    }
}

/// A product `coeff * Π_i s_i(n + shift_i)^{power_i}` viewed as the general
/// term of a series in `n`.
#[derive(Clone, Debug)]
pub struct Monomial {
    pub coeff: Q,
    pub factors: Vec<(Seq, i64, i32)>,
}

impl Monomial {
    pub fn new(coeff: Q) -> Self {
        Monomial { coeff, factors: Vec::new() }
    }

    pub fn times(mut self, s: &Seq, shift: i64, power: i32) -> Self {
        self.factors.push((s.clone(), shift, power));
        self
    }

    /// Smallest `n` at which all shifted indices are nonnegative.
    pub fn first_index(&self) -> usize {
        self.factors.iter().map(|(_, sh, _)| (-sh).max(0) as usize).max().unwrap_or(0)
    }

    pub fn value(&self, n: usize) -> Q {
        let mut acc = self.coeff.clone();
        for (s, shift, p) in &self.factors {
            let x = s.at_q((n as i64 + shift) as usize);
            if *p >= 0 {
                acc *= num_traits::pow(x, *p as usize);
            } else {
                acc /= num_traits::pow(x, p.unsigned_abs() as usize);
            }
        }
        acc
    }

    pub fn growth(&self) -> Growth {
        self.factors.iter().fold(Growth::one(), |g, (s, _, p)| g.mul(&s.growth().pow(*p)))
    }

    pub fn summable(&self) -> bool {
        self.growth().summable()
    }

    /// Upper bound on `u_{n+1}/u_n` for all `n >= from`.
    pub fn ratio_sup(&self, from: usize) -> f64 {
        let mut r = 1.0f64;
        for (s, shift, p) in &self.factors {
            let idx = (from as i64 + shift).max(0) as usize;
            let (lo, hi) = s.ratio_bounds(idx);
            let f = if *p >= 0 { libm::pow(hi, *p as f64) } else { libm::pow(lo, *p as f64) };
            r *= f;
        }
        r.next_up()
    }

    /// Certified bound on `Σ_{n >= from} u_n` by geometric domination, if the
    /// ratio bound from `from` on is below one.
    pub fn tail_bound(&self, from: usize) -> Option<f64> {
        let from = from.max(self.first_index());
        let r = self.ratio_sup(from);
        if r >= 1.0 {
            return None;
        }
        let first = num_traits::ToPrimitive::to_f64(&self.value(from))?;
        Some((first / (1.0 - r)).next_up())
    }
}
