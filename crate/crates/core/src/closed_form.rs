//! Digit closed forms.
//!
//! The `A_E` terms are exactly the integers whose base `d + 1` digits are all
//! 0 or 1, so the `n`-th term is `n` written in binary and read in base
//! `d + 1`. Closed forms for `S_E` take the shape `c * a + r` with `a` such a
//! 0/1-digit integer and `r` drawn from a finite residue set `R`, `max(R) < c`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tuple::CoefficientTuple;

/// Values produced here never exceed this.
pub const MAX_VALUE: u64 = i64::MAX as u64;

/// The `n`-th nonnegative integer (0-based) whose base-`base` digits are all 0/1.
pub fn zero_one_nth(base: u64, n: u64) -> Result<u64> {
    assert!(base >= 2, "base must be at least 2");
    let mut value = 0u64;
    let mut power = 1u64;
    let mut bits = n;
    while bits != 0 {
        if bits & 1 == 1 {
            value = value.checked_add(power).ok_or(Error::Overflow)?;
        }
        bits >>= 1;
        if bits != 0 {
            power = power.checked_mul(base).ok_or(Error::Overflow)?;
        }
    }
    if value > MAX_VALUE {
        return Err(Error::Overflow);
    }
    Ok(value)
}

/// True iff every base-`base` digit of `x` is 0 or 1.
pub fn is_zero_one(base: u64, mut x: u64) -> bool {
    assert!(base >= 2, "base must be at least 2");
    while x != 0 {
        if x % base > 1 {
            return false;
        }
        x /= base;
    }
    true
}

/// Base-`base` digits of `x`, least significant first; empty for 0.
pub fn digits(mut x: u64, base: u64) -> Vec<u64> {
    let mut out = Vec::new();
    while x != 0 {
        out.push(x % base);
        x /= base;
    }
    out
}

/// Number of 0/1-digit integers below `n`, by a single most-significant-first
/// walk over the digits of `n`.
pub fn count_zero_one_below(base: u64, n: u64) -> u64 {
    assert!(base >= 2, "base must be at least 2");
    let ds = digits(n, base);
    let mut count = 0u64;
    for (i, &t) in ds.iter().enumerate().rev() {
        let tails = 1u64 << i;
        match t {
            0 => {}
            1 => count += tails,
            // both 0 and 1 fit here, anything may follow
            _ => return count + 2 * tails,
        }
    }
    count
}

/// `n`-th term of `A_E`.
pub fn a_nth(tuple: &CoefficientTuple, n: u64) -> Result<u64> {
    tuple.require_valid()?;
    zero_one_nth(tuple.base(), n)
}

/// Membership in `A_E`.
pub fn a_contains(tuple: &CoefficientTuple, x: u64) -> bool {
    is_zero_one(tuple.base(), x)
}

/// `g(n)`: the number of `A_E` terms below `n`.
pub fn count_a_below(tuple: &CoefficientTuple, n: u64) -> u64 {
    count_zero_one_below(tuple.base(), n)
}

/// Parity of the number of 1 bits of `n`.
pub fn thue_morse_bit(n: u64) -> u8 {
    (n.count_ones() & 1) as u8
}

/// `(popcount(n) mod d, a_n mod d)`; the two agree for every valid tuple.
pub fn popcount_residue_check(tuple: &CoefficientTuple, n: u64) -> Result<(u64, u64)> {
    let d = tuple.weight();
    let a = a_nth(tuple, n)?;
    Ok((n.count_ones() as u64 % d, a % d))
}

/// `x = c * sum(digits[i] * base^i) + r` with `0 <= r < c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub r: u64,
    /// Least significant first, no trailing zeros.
    pub digits: Vec<u64>,
}

impl Decomposition {
    pub fn reconstruct(&self, base: u64, c: u64) -> u128 {
        let quotient = self
            .digits
            .iter()
            .rev()
            .fold(0u128, |acc, &t| acc * base as u128 + t as u128);
        c as u128 * quotient + self.r as u128
    }
}

/// The unique decomposition of `x` into a residue modulo `c` and base-`base`
/// digits of the quotient.
pub fn decompose(x: u64, base: u64, c: u64) -> Decomposition {
    assert!(base >= 2 && c >= 1, "need base >= 2 and c >= 1");
    Decomposition {
        r: x % c,
        digits: digits(x / c, base),
    }
}

/// `c * a + r` for 0/1-digit `a` in base `base` and `r` in `residues`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosedForm {
    c: u64,
    #[serde(rename = "R")]
    residues: Vec<u64>,
    base: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuple: Option<CoefficientTuple>,
}

impl ClosedForm {
    /// Residues are sorted and deduplicated; all must lie in `[0, c)` and include 0.
    pub fn new(c: u64, residues: impl Into<Vec<u64>>, base: u64) -> Result<Self> {
        let mut residues = residues.into();
        residues.sort_unstable();
        residues.dedup();
        let bad = |msg: String| Err(Error::MalformedClosedForm(msg));
        if c == 0 {
            return bad("c must be positive".into());
        }
        if base < 2 {
            return bad(format!("base {base} below 2"));
        }
        if residues.first() != Some(&0) {
            return bad("residues must contain 0".into());
        }
        if let Some(&r) = residues.iter().find(|&&r| r >= c) {
            return bad(format!("residue {r} not below c = {c}"));
        }
        Ok(ClosedForm {
            c,
            residues,
            base,
            tuple: None,
        })
    }

    /// Closed form in base `d(E) + 1` attached to `tuple`.
    pub fn for_tuple(tuple: &CoefficientTuple, c: u64, residues: impl Into<Vec<u64>>) -> Result<Self> {
        let mut cf = Self::new(c, residues, tuple.base())?;
        cf.tuple = Some(tuple.clone());
        Ok(cf)
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn tuple(&self) -> Option<&CoefficientTuple> {
        self.tuple.as_ref()
    }

    /// The `n`-th member (0-based) in increasing order.
    pub fn nth(&self, n: u64) -> Result<u64> {
        let width = self.residues.len() as u64;
        let a = zero_one_nth(self.base, n / width)?;
        let r = self.residues[(n % width) as usize];
        let value = (self.c as u128) * (a as u128) + r as u128;
        if value > MAX_VALUE as u128 {
            return Err(Error::Overflow);
        }
        Ok(value as u64)
    }

    pub fn contains(&self, x: u64) -> bool {
        self.residues.binary_search(&(x % self.c)).is_ok() && is_zero_one(self.base, x / self.c)
    }

    /// `h(n)`: the number of members below `n`.
    pub fn count_below(&self, n: u64) -> u64 {
        self.residues
            .iter()
            .take_while(|&&r| r < n)
            .map(|&r| count_zero_one_below(self.base, (n - r).div_ceil(self.c)))
            .sum()
    }

    /// Members in increasing order, stopping before the first that overflows.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0u64..).map_while(move |n| self.nth(n).ok())
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c={} base={} R=", self.c, self.base)?;
        for (i, r) in self.residues.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    /// Parses `c=<int> base=<int> R=<csv>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::MalformedClosedForm(msg);
        let (mut c, mut base, mut residues) = (None, None, None);
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {field:?}")))?;
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("bad integer {v:?}")));
            match key {
                "c" => c = Some(int(value)?),
                "base" => base = Some(int(value)?),
                "R" => residues = Some(value.split(',').map(int).collect::<Result<Vec<_>>>()?),
                _ => return Err(bad(format!("unknown field {key:?}"))),
            }
        }
        match (c, base, residues) {
            (Some(c), Some(base), Some(r)) => ClosedForm::new(c, r, base),
            _ => Err(bad("need c, base and R".into())),
        }
    }
}
