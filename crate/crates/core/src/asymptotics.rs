//! Closed-form tail estimates across deviation regimes, the rate function
//! theta and its inverse, the mod-Gaussian limiting function Psi_beta, the
//! constants A_beta, B_beta, C_beta, and a Kolmogorov-distance bound for the
//! tilted law.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CbeError, Result};
use crate::exact_transform::{
    eta_beta, eta_beta_prime, f_beta, log_laplace, log_laplace_real, m_func, EnsembleParams,
};
use crate::specfun::{
    gaussian_upper_tail, integrate_interval, log_gamma_real, integrate_semi_infinite, log_barnes_g, QuadratureSpec,
    CONSTANTS,
};
use crate::tilt::{classify_regime_real, scheme_estimate, solve_tilt, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateMethod {
    CLT,
    SmallModerate,
    TrueModerate,
    Simplified,
    SchemeExact,
    LargeUpperBound,
}

impl EstimateMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateMethod::CLT => "CLT",
            EstimateMethod::SmallModerate => "SmallModerate",
            EstimateMethod::TrueModerate => "TrueModerate",
            EstimateMethod::Simplified => "Simplified",
            EstimateMethod::SchemeExact => "SchemeExact",
            EstimateMethod::LargeUpperBound => "LargeUpperBound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateQuality {
    Equivalent,
    UpperBound,
    Heuristic,
}

impl EstimateQuality {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateQuality::Equivalent => "Equivalent",
            EstimateQuality::UpperBound => "UpperBound",
            EstimateQuality::Heuristic => "Heuristic",
        }
    }
}

/// A tail estimate P[X_N >= x] split as prefactor * exp(exponent).
/// `log_probability = ln(prefactor) + exponent`; `probability` is clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationEstimate {
    pub probability: f64,
    pub log_probability: f64,
    pub prefactor: f64,
    pub exponent: f64,
    pub method: EstimateMethod,
    pub quality: EstimateQuality,
}

impl DeviationEstimate {
    pub fn from_parts(
        prefactor: f64,
        exponent: f64,
        method: EstimateMethod,
        quality: EstimateQuality,
    ) -> Self {
        let log_probability = prefactor.ln() + exponent;
        let probability = log_probability.exp().clamp(0.0, 1.0);
        Self { probability, log_probability, prefactor, exponent, method, quality }
    }

    /// Same, with the prefactor given by its logarithm so it may underflow safely.
    pub fn from_log_parts(
        log_prefactor: f64,
        exponent: f64,
        method: EstimateMethod,
        quality: EstimateQuality,
    ) -> Self {
        let log_probability = log_prefactor + exponent;
        let probability = log_probability.exp().clamp(0.0, 1.0);
        Self { probability, log_probability, prefactor: log_prefactor.exp(), exponent, method, quality }
    }
}

/// Expansion of the tilt in the large-deviation regime x = alpha0 N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeDevExpansion {
    pub l0: f64,
    pub l1_star: f64,
    /// Second-order coefficient, only available at beta = 2.
    pub l2_star: Option<f64>,
    /// beta' I(L0), the rate per N^2.
    pub rate: f64,
    pub bound: DeviationEstimate,
    /// Lambda*(alpha0 N) - N^2 I(L0) - ln(N)/12, only at beta = 2.
    pub residual: Option<f64>,
}

fn check_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(CbeError::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    Ok(beta / 2.0)
}

// ===================================================================
// theta and its inverse
// ===================================================================

/// theta(x) = (1+2x) ln(1+2x) - (1+x) ln(1+x) - x ln(4x), theta(0) = 0.
pub fn theta(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_nan() {
        return Err(CbeError::Domain(format!("theta needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(LN_2);
    }
    if x > 1.0 {
        // ln 2 + (1+2x) ln(1 + 1/(2x)) - (1+x) ln(1 + 1/x): no large cancellations
        return Ok(LN_2 + (1.0 + 2.0 * x) * (0.5 / x).ln_1p() - (1.0 + x) * (1.0 / x).ln_1p());
    }
    Ok((1.0 + 2.0 * x) * (2.0 * x).ln_1p() - (1.0 + x) * x.ln_1p() - x * (4.0 * x).ln())
}

/// theta'(x) = ln(1 + 1/(4x(1+x))).
pub fn theta_prime(x: f64) -> f64 {
    (1.0 / (4.0 * x * (1.0 + x))).ln_1p()
}

/// Solve g(x) = y for increasing g on (0, inf) with g(0+) <= y.
fn invert_increasing<G, D>(g: G, dg: D, y: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut hi = 1.0;
    while g(hi) < y {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(CbeError::Convergence(format!("cannot bracket inverse at y = {y}")));
        }
    }
    let mut lo = hi / 2.0;
    while g(lo) > y {
        lo /= 2.0;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let d = dg(x);
        if !(d > 0.0) {
            return Err(CbeError::MonotonicityViolation(format!(
                "derivative {d} <= 0 at x = {x}"
            )));
        }
        let r = g(x) - y;
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - r / d;
        if !(next > lo && next < hi) {
            next = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        }
        if (next - x).abs() <= 1e-15 * x {
            return Ok(next);
        }
        x = next;
    }
    if (hi - lo) <= 1e-12 * hi {
        return Ok(x);
    }
    Err(CbeError::Convergence(format!("inverse did not converge at y = {y}")))
}

/// theta^{-1}(y) for y in [0, ln 2).
pub fn theta_inv(y: f64) -> Result<f64> {
    if !(y >= 0.0) || !(y < LN_2) {
        return Err(CbeError::Domain(format!("theta_inv needs y in [0, ln 2), got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    invert_increasing(|x| theta(x).unwrap_or(f64::NAN), theta_prime, y)
}

fn nbeta_offset(n: f64, bp: f64) -> f64 {
    (bp - 1.0) / (2.0 * bp * n)
}

/// theta_{N,beta}(x) = theta(x) + (beta'-1)/(2 beta' N) (ln 2 + ln(1+x) - ln(1+2x)).
pub fn theta_n_beta(x: f64, n: f64, beta: f64) -> Result<f64> {
    let bp = check_beta(beta)?;
    if !(n >= 1.0) {
        return Err(CbeError::InvalidParameter(format!("N must be >= 1, got {n}")));
    }
    let t = theta(x)?;
    Ok(t + nbeta_offset(n, bp) * (LN_2 + x.ln_1p() - (2.0 * x).ln_1p()))
}

pub fn theta_n_beta_prime(x: f64, n: f64, beta: f64) -> Result<f64> {
    let bp = check_beta(beta)?;
    Ok(theta_prime(x) - nbeta_offset(n, bp) / ((1.0 + x) * (1.0 + 2.0 * x)))
}

/// Inverse of theta_{N,beta}. Errors if the derivative is found non-positive
/// along the search path.
pub fn theta_n_beta_inv(y: f64, n: f64, beta: f64) -> Result<f64> {
    let bp = check_beta(beta)?;
    if !(n >= 1.0) {
        return Err(CbeError::InvalidParameter(format!("N must be >= 1, got {n}")));
    }
    let g0 = nbeta_offset(n, bp) * LN_2;
    if !(y > g0) || !(y < LN_2) {
        return Err(CbeError::Domain(format!(
            "theta_N,beta inverse needs y in ({g0}, ln 2), got {y}"
        )));
    }
    invert_increasing(
        |x| theta_n_beta(x, n, beta).unwrap_or(f64::NAN),
        |x| theta_n_beta_prime(x, n, beta).unwrap_or(f64::NAN),
        y,
    )
}

// ===================================================================
// Psi functions
// ===================================================================

/// ln Psi(z) = 2 ln G(1 + z/2) - ln G(1 + z), the beta = 2 mod-Gaussian limit.
pub fn psi_haar(z: f64) -> Result<f64> {
    if !(z > -1.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("psi_haar needs z > -1, got {z}")));
    }
    Ok(2.0 * log_barnes_g(1.0 + 0.5 * z)? - log_barnes_g(1.0 + z)?)
}

/// ln Psi_beta(z) = beta' ln Psi(z/beta') + m(z) - (beta'+1)/2 m(z/beta')
///                  + (1 - beta'^2)/(12 beta') F_beta(z).
pub fn log_psi_beta(z: f64, beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = check_beta(beta)?;
    if bp == 1.0 {
        return psi_haar(z);
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("log_psi_beta needs z >= 0, got {z}")));
    }
    let f = f_beta(z, beta, spec)?;
    Ok(bp * psi_haar(z / bp)? + m_func(z)? - 0.5 * (bp + 1.0) * m_func(z / bp)?
        + (1.0 - bp * bp) / (12.0 * bp) * f)
}

/// ln Psi_beta(beta t) through Psi = Psi_2 and Gamma ratios:
/// beta' ln Psi(2t) + ln[Gamma(1+2b't) Gamma(1+t)^{b'+1} / (Gamma(1+b't)^2 Gamma(1+2t)^{(b'+1)/2})]
/// + (1-b'^2)/(12 b') int (1-e^{-b't s})^2 eta_beta(s)/s ds.
pub fn log_psi_beta_gamma_form(t: f64, beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = check_beta(beta)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(CbeError::Domain(format!("log_psi_beta_gamma_form needs t >= 0, got {t}")));
    }
    let lg = log_gamma_real;
    let ratio = lg(1.0 + 2.0 * bp * t)? + (bp + 1.0) * lg(1.0 + t)?
        - 2.0 * lg(1.0 + bp * t)?
        - 0.5 * (bp + 1.0) * lg(1.0 + 2.0 * t)?;
    let integral = if bp == 1.0 {
        0.0
    } else {
        let g = |s: f64| {
            let e = -(-bp * t * s).exp_m1();
            if s == 0.0 {
                0.0
            } else {
                e * e / s * eta_beta(s, beta).unwrap_or(f64::NAN)
            }
        };
        integrate_semi_infinite(g, spec)?.0
    };
    Ok(bp * psi_haar(2.0 * t)? + ratio + (1.0 - bp * bp) / (12.0 * bp) * integral)
}

// ===================================================================
// Constants A, B, C (memoised per beta and quadrature spec)
// ===================================================================

type MemoKey = (u8, u64, [u64; 4]);
type MemoCell = Arc<OnceLock<Result<f64>>>;

fn memo<F: FnOnce() -> Result<f64>>(kind: u8, beta: f64, spec: &QuadratureSpec, f: F) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<MemoKey, MemoCell>>> = OnceLock::new();
    let key = (
        kind,
        beta.to_bits(),
        [
            spec.abs_tol.to_bits(),
            spec.rel_tol.to_bits(),
            spec.max_subdivisions as u64,
            spec.truncation_decay_threshold.to_bits(),
        ],
    );
    let cell = {
        let mut map = CACHE
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        map.entry(key).or_default().clone()
    };
    cell.get_or_init(f).clone()
}

/// A_beta = int (1-e^{-s/2})^2 eta/s ds + int_1^inf (1/t) int_0^inf (2e^{-st/2} - e^{-st}) eta'(s) ds dt.
/// A_2 = 0.
pub fn a_beta_const(beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = check_beta(beta)?;
    if bp == 1.0 {
        return Ok(0.0);
    }
    memo(0, beta, spec, || {
        let first = f_beta(1.0, beta, spec)?;
        // t = 1/u maps [1, inf) to (0, 1]; the integrand J(1/u)/u stays bounded
        let inner = |t: f64| -> Result<f64> {
            let g = |s: f64| {
                let e = (-0.5 * s * t).exp();
                (2.0 * e - e * e) * eta_beta_prime(s, beta).unwrap_or(f64::NAN)
            };
            Ok(integrate_semi_infinite(g, spec)?.0)
        };
        let failure: Mutex<Option<CbeError>> = Mutex::new(None);
        let outer = |u: f64| match inner(1.0 / u) {
            Ok(j) => j / u,
            Err(e) => {
                *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                f64::NAN
            }
        };
        let second = integrate_interval(outer, 0.0, 1.0, spec);
        if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
            return Err(e);
        }
        Ok(first + second?.0)
    })
}

/// B_beta, the constant term of -Lambda* in the true moderate regime.
pub fn b_beta_const(beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = check_beta(beta)?;
    let a = a_beta_const(beta, spec)?;
    Ok((1.0 - bp * bp) / (12.0 * bp) * a + (3.0 * bp - 1.0 - bp * bp) / (8.0 * bp)
        + (3.0 - bp) / 12.0 * LN_2
        - (3.0 + 2.0 * bp) / 12.0 * bp.ln()
        + (bp - 1.0) / 4.0 * PI.ln()
        + bp * CONSTANTS.zeta_prime_minus_one)
}

/// C_beta, the multiplicative constant of the true moderate estimate.
pub fn c_beta_const(beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = check_beta(beta)?;
    let a = a_beta_const(beta, spec)?;
    memo(1, beta, spec, || {
        let log_c = LN_2 / (12.0 * bp) + (bp - 3.0) / 4.0 * PI.ln() - beta.ln()
            + (1.0 - bp * bp) / (12.0 * bp) * (a + bp.ln())
            + bp * CONSTANTS.zeta_prime_minus_one;
        Ok(log_c.exp())
    })
}

// ===================================================================
// Rate functions
// ===================================================================

/// I(x) = -(1-4x^2)/2 ln(1+2x) - x^2 ln(4x) + (1-x^2) ln(1+x).
pub fn rate_i(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(CbeError::Domain(format!("rate_i needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(-0.5 * (1.0 - 4.0 * x * x) * (2.0 * x).ln_1p() - x * x * (4.0 * x).ln()
        + (1.0 - x * x) * x.ln_1p())
}

/// Limiting scaled log-Laplace transform at beta = 2 (+inf for s < 0).
pub fn hko_lambda(s: f64) -> f64 {
    if s < 0.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return 0.0;
    }
    let a = 1.0 + s;
    let b = 1.0 + 0.5 * s;
    0.5 * a * a * s.ln_1p() - b * b * (0.5 * s).ln_1p() - 0.25 * s * s * (2.0 * s).ln()
}

/// sup_s (x s - hko_lambda(s)) by golden-section search.
pub fn hko_rate(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(CbeError::Domain("hko_rate at NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= LN_2 {
        return Ok(f64::INFINITY);
    }
    let obj = |s: f64| x * s - hko_lambda(s);
    let mut hi = 1.0;
    while obj(2.0 * hi) >= obj(hi) {
        hi *= 2.0;
        if hi > 1e200 {
            return Err(CbeError::Convergence("rate maximiser not bracketed".into()));
        }
    }
    let (mut lo, mut hi) = (0.0, 2.0 * hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    for _ in 0..400 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = obj(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = obj(x1);
        }
    }
    Ok(f1.max(f2))
}

/// One row of the large-deviation rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub x: f64,
    pub theta_inv: f64,
    /// beta' I(theta^{-1}(x))
    pub rate: f64,
    /// Legendre transform of the beta = 2 limit, for comparison.
    pub hko_rate: f64,
}

pub fn rate_curve_row(x: f64, beta: f64) -> Result<RateRow> {
    let bp = check_beta(beta)?;
    if !(x > 0.0) || !(x < LN_2) {
        return Err(CbeError::Domain(format!("rate curve needs x in (0, ln 2), got {x}")));
    }
    let t = theta_inv(x)?;
    Ok(RateRow { x, theta_inv: t, rate: bp * rate_i(t)?, hko_rate: hko_rate(x)? })
}

// ===================================================================
// Regime estimates
// ===================================================================

fn check_n(n: f64) -> Result<f64> {
    if !(n > 1.0) || !n.is_finite() {
        return Err(CbeError::InvalidParameter(format!("N must be > 1, got {n}")));
    }
    Ok(n.ln())
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(CbeError::Domain(format!("deviation level must be > 0, got {x}")));
    }
    Ok(())
}

fn quality_for(n: f64, beta: f64, x: f64, regime: Regime) -> EstimateQuality {
    if classify_regime_real(n, beta, x).tag == regime {
        EstimateQuality::Equivalent
    } else {
        EstimateQuality::Heuristic
    }
}

/// Q(u) e^{u^2/2}, computed without underflow.
fn gaussian_mills(u: f64) -> f64 {
    if u < 8.0 {
        return gaussian_upper_tail(u) * (0.5 * u * u).exp();
    }
    // continued fraction 1/(u + 1/(u + 2/(u + 3/(u + ...))))
    let mut cf = u;
    for k in (1..80).rev() {
        cf = u + k as f64 / cf;
    }
    1.0 / (cf * (2.0 * PI).sqrt())
}

/// Gaussian approximation Q(x / sqrt(ln N / beta)).
pub fn estimate_clt_tail(n: f64, beta: f64, x: f64) -> Result<DeviationEstimate> {
    check_beta(beta)?;
    let ln_n = check_n(n)?;
    if !x.is_finite() {
        return Err(CbeError::Domain(format!("x must be finite, got {x}")));
    }
    let u = x / (ln_n / beta).sqrt();
    let quality = if x <= ln_n.sqrt() { EstimateQuality::Equivalent } else { EstimateQuality::Heuristic };
    let (pre, expo) = if u > 0.0 {
        (gaussian_mills(u), -0.5 * u * u)
    } else {
        (gaussian_upper_tail(u), 0.0)
    };
    Ok(DeviationEstimate::from_parts(pre, expo, EstimateMethod::CLT, quality))
}

/// Mod-Gaussian estimate for sqrt(ln N) << x = O(ln N).
pub fn estimate_small_moderate(
    n: f64,
    beta: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<DeviationEstimate> {
    let bp = check_beta(beta)?;
    let ln_n = check_n(n)?;
    check_x(x)?;
    let log_psi = log_psi_beta(beta * x / ln_n, beta, spec)?;
    let log_pre = 0.5 * (ln_n / (2.0 * PI * beta)).ln() - x.ln() + log_psi;
    let expo = -bp * x * x / ln_n;
    let quality = quality_for(n, beta, x, Regime::SmallModerate);
    Ok(DeviationEstimate::from_log_parts(log_pre, expo, EstimateMethod::SmallModerate, quality))
}

struct ModerateParts {
    vartheta: f64,
    prefactor: f64,
    bp: f64,
}

fn moderate_parts(n: f64, beta: f64, x: f64, spec: &QuadratureSpec) -> Result<ModerateParts> {
    let bp = check_beta(beta)?;
    check_n(n)?;
    check_x(x)?;
    if !(x < n) || !(x / n < LN_2) {
        return Err(CbeError::Domain(format!("moderate estimate needs x < N, got x = {x}, N = {n}")));
    }
    let vartheta = theta_n_beta_inv(x / n, n, beta)?;
    let c = c_beta_const(beta, spec)?;
    let e1 = (bp * bp - 15.0 * bp + 1.0) / (12.0 * bp);
    let e2 = (9.0 * bp - 1.0 - bp * bp) / (12.0 * bp);
    let prefactor = c * x.powf(e1) * (n / x).ln().powf(e2);
    Ok(ModerateParts { vartheta, prefactor, bp })
}

/// Estimate for ln N << x << N.
pub fn estimate_true_moderate(
    n: f64,
    beta: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<DeviationEstimate> {
    let ModerateParts { vartheta: t, prefactor, bp } = moderate_parts(n, beta, x, spec)?;
    let b = n * t;
    let f = bp * b * b * (1.0 / (4.0 * t * (1.0 + t))).ln_1p()
        + 0.5 * (n * n * bp - n * (bp - 1.0)) * (t * t / (1.0 + 2.0 * t)).ln_1p();
    let quality = quality_for(n, beta, x, Regime::TrueModerate);
    Ok(DeviationEstimate::from_parts(prefactor, -f, EstimateMethod::TrueModerate, quality))
}

/// Same prefactor with the exponent beta'(-x b + b^2/2), b = N theta_{N,beta}^{-1}(x/N).
pub fn estimate_simplified(
    n: f64,
    beta: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<DeviationEstimate> {
    let ModerateParts { vartheta: t, prefactor, bp } = moderate_parts(n, beta, x, spec)?;
    let b = n * t;
    let expo = bp * (-x * b + 0.5 * b * b);
    let quality = if classify_regime_real(n, beta, x).tag == Regime::TrueModerate && x.powi(3) < n {
        EstimateQuality::Equivalent
    } else {
        EstimateQuality::Heuristic
    };
    Ok(DeviationEstimate::from_parts(prefactor, expo, EstimateMethod::Simplified, quality))
}

pub const LARGE_DEV_BAND: (f64, f64) = (0.02, 0.66);

/// Large-deviation expansion at x = alpha0 N.
pub fn large_dev(n: usize, beta: f64, alpha0: f64) -> Result<LargeDevExpansion> {
    let bp = check_beta(beta)?;
    if !(alpha0 >= LARGE_DEV_BAND.0 && alpha0 <= LARGE_DEV_BAND.1) {
        return Err(CbeError::Domain(format!(
            "alpha0 must lie in [{}, {}], got {alpha0}",
            LARGE_DEV_BAND.0, LARGE_DEV_BAND.1
        )));
    }
    let l0 = theta_inv(alpha0)?;
    let tp = theta_prime(l0);
    let l1_star = (bp - 1.0) / (2.0 * bp)
        * ((2.0 * l0).ln_1p() - l0.ln_1p() - LN_2)
        / tp;
    let i0 = rate_i(l0)?;
    let rate = bp * i0;
    let a = alpha0 * n as f64;
    let bound = scheme_estimate(n, beta, a)?;
    let bound = DeviationEstimate {
        method: EstimateMethod::LargeUpperBound,
        quality: EstimateQuality::UpperBound,
        ..bound
    };
    let (l2_star, residual) = if bp == 1.0 {
        let l2 = -(1.0 / (1.0 + l0) - 0.5 / l0 - 1.0 / (1.0 + 2.0 * l0)) / (12.0 * tp);
        let nf = n as f64;
        let legendre = solve_tilt(n, beta, a)?.legendre;
        (Some(l2), Some(legendre - nf * nf * i0 - nf.ln() / 12.0))
    } else {
        (None, None)
    };
    Ok(LargeDevExpansion { l0, l1_star, l2_star, rate, bound, residual })
}

// ===================================================================
// Kolmogorov bound for the tilted law
// ===================================================================

pub const KOLMOGOROV_C: f64 = 14.0;
const ZONE_POINTS: usize = 64;

/// Supremum over 0 < xi <= delta of |u(xi)| delta / xi^3, where
/// u(xi) = Lambda(h+i xi) - Lambda(h) - i xi Lambda'(h) + xi^2 Lambda''(h)/2 is the
/// cubic remainder of the log characteristic function of the law tilted by h = 2 delta.
pub fn fourier_remainder_constant(n: usize, beta: f64, delta: f64) -> Result<f64> {
    let p = EnsembleParams::new(n, beta, 0.0)?;
    let h = 2.0 * delta;
    let l0 = log_laplace_real(&p, h, 0)?;
    let l1 = log_laplace_real(&p, h, 1)?;
    let l2 = log_laplace_real(&p, h, 2)?;
    let l3 = log_laplace_real(&p, h, 3)?;
    let mut best = l3.abs() / 6.0 * delta;
    for j in 1..=ZONE_POINTS {
        let xi = delta * j as f64 / ZONE_POINTS as f64;
        let z = Complex64::new(h, xi);
        let lz = log_laplace(&p, z, 0)?.value;
        let u = lz - l0 - Complex64::new(0.0, xi * l1) + 0.5 * xi * xi * l2;
        best = best.max(u.norm() * delta / (xi * xi * xi));
    }
    Ok(best)
}

/// Berry-Esseen type bound C M / (delta v^{3/2}) on the Kolmogorov distance
/// between the standardised X_N under CJ(beta, delta) and N(0, 1).
pub fn kolmogorov_bound(n: usize, beta: f64, delta: f64) -> Result<f64> {
    if !(delta >= 1.0) || !delta.is_finite() {
        return Err(CbeError::Domain(format!("kolmogorov_bound needs delta >= 1, got {delta}")));
    }
    let p = EnsembleParams::new(n, beta, 0.0)?;
    let v = log_laplace_real(&p, 2.0 * delta, 2)?;
    let m = fourier_remainder_constant(n, beta, delta)?;
    Ok(KOLMOGOROV_C * m / (delta * v.powf(1.5)))
}

/// Exact d_Kol between the standardised X_N under CJ(beta, delta) and
/// N(0, 1), via Gil-Pelaez inversion of the exact characteristic function.
/// The supremum is taken over a 0.02 grid on [-5, 5] refined to 1e-3 near
/// the maximiser.
pub fn kolmogorov_distance_exact(n: usize, beta: f64, delta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let p = EnsembleParams::new(n, beta, delta)?;
    let m = log_laplace_real(&p, 0.0, 1)?;
    let s = log_laplace_real(&p, 0.0, 2)?.sqrt();
    let gap = |x: f64| -> Result<f64> {
        let f = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            match log_laplace(&p, Complex64::new(0.0, u / s), 0) {
                Ok(t) => (t.value - Complex64::new(0.0, u * (m / s + x))).exp().im / u,
                Err(_) => f64::NAN,
            }
        };
        let cdf = 0.5 - integrate_semi_infinite(f, spec)?.0 / PI;
        Ok((cdf - gaussian_upper_tail(-x)).abs())
    };
    let (mut best, mut at) = (0.0, 0.0);
    for i in 0..=500 {
        let x = -5.0 + 0.02 * i as f64;
        let g = gap(x)?;
        if g > best {
            best = g;
            at = x;
        }
    }
    for i in -20..=20 {
        best = best.max(gap(at + 1e-3 * i as f64)?);
    }
    Ok(best)
}

// ===================================================================
// Small-eps helpers
// ===================================================================

const EPS_SWITCH: f64 = 1e-3;

/// b(eps) = (1+eps)^2 ln(1+eps) - 2 (1+eps/2)^2 ln(1+eps/2).
pub fn b_eps(eps: f64) -> f64 {
    if eps.abs() < EPS_SWITCH {
        let e2 = eps * eps;
        return 0.75 * e2 + 0.25 * e2 * eps - 7.0 / 96.0 * e2 * e2;
    }
    let a = 1.0 + eps;
    let b = 1.0 + 0.5 * eps;
    a * a * eps.ln_1p() - 2.0 * b * b * (0.5 * eps).ln_1p()
}

/// c(eps) = 2 (1+eps/2) ln(1+eps/2) - (1+eps) ln(1+eps).
pub fn c_eps(eps: f64) -> f64 {
    if eps.abs() < EPS_SWITCH {
        let e2 = eps * eps;
        return -0.25 * e2 + 0.125 * e2 * eps - 7.0 / 96.0 * e2 * e2;
    }
    2.0 * (1.0 + 0.5 * eps) * (0.5 * eps).ln_1p() - (1.0 + eps) * eps.ln_1p()
}
