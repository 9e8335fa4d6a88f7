//! Growth envelopes for the counting functions `g(n) = |A_E ∩ [0, n)|` and
//! `h(n) = |S_E ∩ [0, n)|`, the matching bounds on the `n`-th term, and the
//! Behrend-style density formula used for comparison.
//!
//! Everything here is generic over the floating type; `f64` aliases live at
//! the crate root. Exact counts are always integers.

use num_traits::Float;
use serde::Serialize;

use crate::closed_form::{a_nth, count_a_below, ClosedForm};
use crate::error::{Error, Result};
use crate::tuple::CoefficientTuple;

/// Exact counts are attached up to this `n`.
pub const EXACT_COUNT_LIMIT: u64 = 1_000_000_000_000;

/// Reference values at `n = 10^10` for the comparison in [`section4_comparison`].
pub const REFERENCE_BEHREND: f64 = 3187.0;
pub const REFERENCE_F_BOUND: f64 = 10133.0;
pub const REFERENCE_H_BOUND: f64 = 15360.0;

fn lit<F: Float>(x: f64) -> F {
    F::from(x).expect("float literal")
}

fn from_u64<F: Float>(x: u64) -> F {
    F::from(x).expect("u64 fits every float type")
}

/// `log_base(2)`, the exponent of the counting functions.
pub fn theta<F: Float>(base: u64) -> F {
    lit::<F>(2.0).ln() / from_u64::<F>(base).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundParams {
    pub d: u64,
    pub c: Option<u64>,
    #[serde(rename = "R_size")]
    pub residues: Option<usize>,
}

/// An analytic envelope `lower <= value <= upper` at `n`, with the exact value
/// when it is cheap to obtain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds<F> {
    pub n: u64,
    pub exact: Option<u64>,
    pub lower: F,
    pub upper: F,
    pub theta: F,
    pub params: BoundParams,
}

impl<F: Float> Bounds<F> {
    /// `lower <= exact <= upper` with relative slack `tol`; `None` without an exact value.
    pub fn sandwiches(&self, tol: F) -> Option<bool> {
        self.exact.map(|e| {
            let e = from_u64::<F>(e);
            let slack = |v: F| v.abs() * tol;
            self.lower - slack(self.lower) <= e && e <= self.upper + slack(self.upper)
        })
    }
}

fn require_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("n must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `½ n^θ <= g(n) <= 2 n^θ` with `θ = log_{d+1} 2`.
pub fn g_bounds<F: Float>(tuple: &CoefficientTuple, n: u64) -> Result<Bounds<F>> {
    tuple.require_valid()?;
    require_n(n)?;
    let theta = theta::<F>(tuple.base());
    let p = from_u64::<F>(n).powf(theta);
    Ok(Bounds {
        n,
        exact: (n <= EXACT_COUNT_LIMIT).then(|| count_a_below(tuple, n)),
        lower: lit::<F>(0.5) * p,
        upper: lit::<F>(2.0) * p,
        theta,
        params: BoundParams {
            d: tuple.weight(),
            c: None,
            residues: None,
        },
    })
}

/// `|R| ½ (n/c - 1)^θ <= h(n) <= |R| 2 (n/c + 1)^θ`, base `d + 1 = cf.base()`.
/// The lower side is clamped to 0 once `n <= c`.
pub fn h_bounds<F: Float>(cf: &ClosedForm, n: u64) -> Result<Bounds<F>> {
    require_n(n)?;
    let theta = theta::<F>(cf.base());
    let size = from_u64::<F>(cf.residues().len() as u64);
    let ratio = from_u64::<F>(n) / from_u64::<F>(cf.c());
    let below = (ratio - F::one()).max(F::zero());
    Ok(Bounds {
        n,
        exact: (n <= EXACT_COUNT_LIMIT).then(|| cf.count_below(n)),
        lower: size * lit::<F>(0.5) * below.powf(theta),
        upper: size * lit::<F>(2.0) * (ratio + F::one()).powf(theta),
        theta,
        params: BoundParams {
            d: cf.base() - 1,
            c: Some(cf.c()),
            residues: Some(cf.residues().len()),
        },
    })
}

/// Which sequence a term-growth envelope describes.
#[derive(Debug, Clone, Copy)]
pub enum GrowthTarget<'a> {
    /// `A_E`, enumerated by 0/1 digits.
    Digits(&'a CoefficientTuple),
    /// `S_E` through its closed form.
    ClosedForm(&'a ClosedForm),
}

/// Envelope for the `n`-th term (0-based), with `L = log_2(d + 1)`:
/// `n^L / (d+1) <= a_n <= (d+1) n^L` for `A_E`, and
/// `c (n / 2|R|)^L - c <= a_n <= c (2n / |R|)^L + c` for a closed form.
pub fn term_growth_bounds<F: Float>(target: GrowthTarget<'_>, n: u64) -> Result<Bounds<F>> {
    require_n(n)?;
    let nf = from_u64::<F>(n);
    match target {
        GrowthTarget::Digits(tuple) => {
            tuple.require_valid()?;
            let theta = theta::<F>(tuple.base());
            let b = from_u64::<F>(tuple.base());
            let p = nf.powf(theta.recip());
            Ok(Bounds {
                n,
                exact: a_nth(tuple, n).ok(),
                lower: p / b,
                upper: p * b,
                theta,
                params: BoundParams {
                    d: tuple.weight(),
                    c: None,
                    residues: None,
                },
            })
        }
        GrowthTarget::ClosedForm(cf) => {
            let theta = theta::<F>(cf.base());
            let l = theta.recip();
            let c = from_u64::<F>(cf.c());
            let size = from_u64::<F>(cf.residues().len() as u64);
            let two = lit::<F>(2.0);
            Ok(Bounds {
                n,
                exact: cf.nth(n).ok(),
                lower: c * (nf / (two * size)).powf(l) - c,
                upper: c * (two * nf / size).powf(l) + c,
                theta,
                params: BoundParams {
                    d: cf.base() - 1,
                    c: Some(cf.c()),
                    residues: Some(cf.residues().len()),
                },
            })
        }
    }
}

/// `γ1 n exp(-γ2 sqrt(ln n) - ½ ln ln n)` with `γ1 = d² sqrt(½ ln d)` and
/// `γ2 = 2 sqrt(2 ln d)`. This is the asymptotic formula value with its
/// `o(1)` correction dropped, not a certified bound.
pub fn behrend_lower_bound<F: Float>(d: u64, n: F) -> Result<F> {
    if d < 2 {
        return Err(Error::Domain(format!("d must be at least 2, got {d}")));
    }
    let df = from_u64::<F>(d);
    if n.is_nan() || n <= df * df {
        return Err(Error::Domain(format!("n must exceed d^2 = {}", d * d)));
    }
    let half = lit::<F>(0.5);
    let two = lit::<F>(2.0);
    let gamma1 = df * df * (half * df.ln()).sqrt();
    let gamma2 = two * (two * df.ln()).sqrt();
    let ln_n = n.ln();
    Ok(gamma1 * n * (-(gamma2 * ln_n.sqrt()) - half * ln_n.ln()).exp())
}

/// One parameter reading of the numeric comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section4Reading<F> {
    pub label: String,
    pub tuple: CoefficientTuple,
    pub d: u64,
    pub c: u64,
    #[serde(rename = "R_size")]
    pub residues: usize,
    /// `½ n^θ`, the `g` lower bound.
    pub f_bound: F,
    /// `|R| ½ (n/c - 1)^θ`, the `h` lower bound.
    pub h_bound: F,
    pub behrend: F,
    pub f_matches_reference: bool,
    pub h_matches_reference: bool,
    pub behrend_matches_reference: bool,
}

impl<F> Section4Reading<F> {
    pub fn matches_reference(&self) -> bool {
        self.f_matches_reference && self.h_matches_reference && self.behrend_matches_reference
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section4<F> {
    pub n: F,
    pub reference_behrend: f64,
    pub reference_f_bound: f64,
    pub reference_h_bound: f64,
    pub readings: Vec<Section4Reading<F>>,
}

/// Recomputes the three comparison quantities under the `(1,1,1)` reading
/// (`c = 12`, base 4) and the `(1,1,2)` reading (`c = 16`, base 5), and flags
/// which one reproduces the reference values. Tolerances: 1% for the Behrend
/// value, 2 units for the `f` bound, 0.5% for the `h` bound.
pub fn section4_comparison<F: Float>(n: F) -> Section4<F> {
    let readings = [("uniform d=3 (c=12, base 4)", [1u64, 1, 1], 12u64), ("d=4 (c=16, base 5)", [1, 1, 2], 16)]
        .into_iter()
        .map(|(label, coeffs, c)| {
            let tuple = CoefficientTuple::new(coeffs.to_vec()).expect("fixed tuple");
            let d = tuple.weight();
            let theta = theta::<F>(tuple.base());
            let residues = 5usize;
            let half = lit::<F>(0.5);
            let f_bound = half * n.powf(theta);
            let h_bound = from_u64::<F>(residues as u64)
                * half
                * (n / from_u64::<F>(c) - F::one()).max(F::zero()).powf(theta);
            let behrend = behrend_lower_bound(d, n).unwrap_or_else(|_| F::nan());
            let close = |v: F, reference: f64, tol: f64| {
                v.to_f64().is_some_and(|v| (v - reference).abs() <= tol)
            };
            Section4Reading {
                label: label.to_string(),
                d,
                c,
                residues,
                f_matches_reference: close(f_bound, REFERENCE_F_BOUND, 2.0),
                h_matches_reference: close(h_bound, REFERENCE_H_BOUND, 0.005 * REFERENCE_H_BOUND),
                behrend_matches_reference: close(behrend, REFERENCE_BEHREND, 0.01 * REFERENCE_BEHREND),
                tuple,
                f_bound,
                h_bound,
                behrend,
            }
        })
        .collect();
    Section4 {
        n,
        reference_behrend: REFERENCE_BEHREND,
        reference_f_bound: REFERENCE_F_BOUND,
        reference_h_bound: REFERENCE_H_BOUND,
        readings,
    }
}
