//! Exponential tilting of X_N at the untilted ensemble (delta = 0): solving
//! Lambda'(h) = a, the Legendre conjugate, regime classification and the
//! saddlepoint tail estimate exp(-Lambda*(a)) / (h sqrt(2 pi v)).

use serde::{Deserialize, Serialize};

use crate::asymptotics::{DeviationEstimate, EstimateMethod, EstimateQuality};
use crate::error::{CbeError, Result};
use crate::exact_transform::{log_laplace_real, EnsembleParams};

/// Tilt h solving Lambda'(h) = a, with lambda = h / beta, the tilted
/// variance v = Lambda''(h) and Lambda*(a) = a h - Lambda(h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSolution {
    pub h: f64,
    pub lambda: f64,
    pub a: f64,
    pub v: f64,
    pub legendre: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    GaussianCLT,
    SmallModerate,
    TrueModerate,
    LargeDeviation,
    OutOfRange,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::GaussianCLT => "GaussianCLT",
            Regime::SmallModerate => "SmallModerate",
            Regime::TrueModerate => "TrueModerate",
            Regime::LargeDeviation => "LargeDeviation",
            Regime::OutOfRange => "OutOfRange",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub tag: Regime,
    pub rationale: String,
}

const LARGE_RATIO: f64 = 0.05;
const SMALL_MODERATE_FACTOR: f64 = 10.0;
const NEWTON_MAX_ITER: usize = 200;

fn untilted(n: usize, beta: f64) -> Result<EnsembleParams> {
    EnsembleParams::new(n, beta, 0.0)
}

/// Solve Lambda'_{N,beta}(h) = a for a in (0, N ln 2).
pub fn solve_tilt(n: usize, beta: f64, a: f64) -> Result<TiltSolution> {
    let p = untilted(n, beta)?;
    let sup = n as f64 * std::f64::consts::LN_2;
    if !a.is_finite() || !(a > 0.0) || !(a < sup) {
        return Err(CbeError::Domain(format!("tilt needs 0 < a < N ln 2 = {sup}, got {a}")));
    }
    let d1 = |h: f64| log_laplace_real(&p, h, 1);
    let tol = 1e-10 * a.max(1.0);

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut f_hi = d1(hi)?;
    let mut doublings = 0;
    while f_hi < a {
        lo = hi;
        hi *= 2.0;
        f_hi = d1(hi)?;
        doublings += 1;
        if doublings > 1000 || !hi.is_finite() {
            return Err(CbeError::Convergence(format!("could not bracket tilt for a = {a}")));
        }
    }

    // Lambda' is increasing and concave, so Newton from the left bracket end
    // approaches monotonically; bisection guards against roundoff stalls.
    let mut h = lo;
    for _ in 0..NEWTON_MAX_ITER {
        let g = d1(h)? - a;
        if g.abs() <= tol {
            return finish(&p, h, a);
        }
        if g < 0.0 {
            lo = h;
        } else {
            hi = h;
        }
        let v = log_laplace_real(&p, h, 2)?;
        let mut next = h - g / v;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == h {
            break;
        }
        h = next;
    }
    let g = d1(h)? - a;
    if g.abs() <= tol {
        return finish(&p, h, a);
    }
    Err(CbeError::Convergence(format!(
        "tilt equation residual {g:e} above tolerance {tol:e} at h = {h}"
    )))
}

fn finish(p: &EnsembleParams, h: f64, a: f64) -> Result<TiltSolution> {
    let v = log_laplace_real(p, h, 2)?;
    let lam = log_laplace_real(p, h, 0)?;
    Ok(TiltSolution { h, lambda: h / p.beta, a, v, legendre: a * h - lam })
}

/// Lambda*_{N,beta}(a) = sup_h (a h - Lambda(h)).
pub fn legendre_conjugate(n: usize, beta: f64, a: f64) -> Result<f64> {
    Ok(solve_tilt(n, beta, a)?.legendre)
}

/// Classify the deviation level `a` for ensemble size `n` (real-valued so
/// that asymptotic formulas can be queried at non-integer N).
pub fn classify_regime_real(n: f64, _beta: f64, a: f64) -> RegimeClass {
    let sup = n * std::f64::consts::LN_2;
    let ln_n = n.ln();
    let (tag, rationale) = if !(a > 0.0) || !(a < sup) || !a.is_finite() {
        (Regime::OutOfRange, format!("a = {a} outside (0, N ln 2 = {sup:.6})"))
    } else if a / n >= LARGE_RATIO {
        (Regime::LargeDeviation, format!("a/N = {:.4} >= {LARGE_RATIO}", a / n))
    } else if a <= ln_n.max(0.0).sqrt() {
        (Regime::GaussianCLT, format!("a = {a} <= sqrt(ln N) = {:.4}", ln_n.max(0.0).sqrt()))
    } else if a <= SMALL_MODERATE_FACTOR * ln_n {
        (Regime::SmallModerate, format!("a = {a} <= 10 ln N = {:.4}", SMALL_MODERATE_FACTOR * ln_n))
    } else {
        (Regime::TrueModerate, format!("10 ln N < a = {a} and a/N = {:.2e} < {LARGE_RATIO}", a / n))
    };
    RegimeClass { tag, rationale }
}

pub fn classify_regime(n: usize, beta: f64, a: f64) -> RegimeClass {
    classify_regime_real(n as f64, beta, a)
}

/// Saddlepoint estimate P[X_N >= a] ~ exp(-Lambda*(a)) / (h sqrt(2 pi v)).
pub fn scheme_estimate(n: usize, beta: f64, a: f64) -> Result<DeviationEstimate> {
    let sol = solve_tilt(n, beta, a)?;
    let regime = classify_regime(n, beta, a).tag;
    let prefactor = 1.0 / (sol.h * (2.0 * std::f64::consts::PI * sol.v).sqrt());
    let quality = if regime == Regime::LargeDeviation {
        EstimateQuality::UpperBound
    } else if sol.h * sol.v.sqrt() < 3.0 {
        EstimateQuality::Heuristic
    } else {
        EstimateQuality::Equivalent
    };
    Ok(DeviationEstimate::from_parts(prefactor, -sol.legendre, EstimateMethod::SchemeExact, quality))
}
