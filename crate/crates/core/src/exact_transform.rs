//! Exact log-Laplace transform of X_N = ln|det(I - U)| under the circular
//! Jacobi ensemble CJ(beta, delta), its derivatives, and the integral
//! representations used to compare general beta with beta = 2.
//!
//! The transform is a finite sum over k = 0..N-1 of log-gamma combinations.
//! Terms with small argument are summed directly; once the argument is large
//! compared with the shifts, the remaining terms are summed in closed form
//! through the asymptotic expansion of ln Gamma(y + c) in 1/y and Hurwitz
//! zeta tails, so the cost does not grow with N.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CbeError, Result};
use crate::specfun::{
    bernoulli_poly, hurwitz_zeta_large, integrate_semi_infinite, lgamma_s, psi_s,
    stirling_remainder, QuadratureSpec, Scalar,
};

/// Ensemble size N, inverse temperature beta and Jacobi weight delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub beta: f64,
    pub delta: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, beta: f64, delta: f64) -> Result<Self> {
        let p = Self { n, beta, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CbeError::InvalidParameter("N must be at least 1".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(CbeError::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(CbeError::InvalidParameter(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn beta_prime(&self) -> f64 {
        self.beta / 2.0
    }

    /// Tilt parameter h = 2 delta.
    pub fn h(&self) -> f64 {
        2.0 * self.delta
    }

    /// lambda = delta / beta'.
    pub fn lambda(&self) -> f64 {
        self.delta / self.beta_prime()
    }
}

/// A derivative of the log-Laplace transform at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformValue {
    pub order: u32,
    pub at: Complex64,
    pub value: Complex64,
}

// ===================================================================
// Summation kernel
// ===================================================================

const WEIGHTS: [f64; 4] = [2.0, 1.0, -1.0, -2.0];
/// d c_i / d z for the shifts below.
const DC: [f64; 4] = [0.0, 1.0, 0.0, 0.5];
const TAIL_TERMS: usize = 12;

fn shifts<S: Scalar>(delta: f64, z: S) -> [S; 4] {
    [
        S::from_f64(delta),
        z + 2.0 * delta,
        S::from_f64(2.0 * delta),
        z * 0.5 + delta,
    ]
}

/// sum_i w_i ln Gamma(y + c_i) with sum w_i = 0 and sum w_i c_i = 0.
/// For y >= 15 the ln y terms cancel analytically and only log1p pieces remain.
fn lgamma_combo<S: Scalar>(y: f64, w: &[f64], c: &[S]) -> S {
    let mut acc = S::from_f64(0.0);
    if y >= 15.0 {
        for (wi, ci) in w.iter().zip(c.iter()) {
            let yc = *ci + y;
            acc += ((yc - 0.5) * (*ci / y).ln1p() + stirling_remainder(yc)) * *wi;
        }
    } else {
        for (wi, ci) in w.iter().zip(c.iter()) {
            acc += lgamma_s(*ci + y) * *wi;
        }
    }
    acc
}

fn direct_term<S: Scalar>(y: f64, c: &[S; 4], order: u32) -> S {
    match order {
        0 => lgamma_combo(y, &WEIGHTS, c),
        k => {
            let m = k - 1;
            psi_s(m, c[1] + y) - psi_s(m, c[3] + y) * (2.0 * 0.5f64.powi(k as i32))
        }
    }
}

fn falling(n: usize, k: u32) -> f64 {
    (0..k as usize).map(|j| (n - j) as f64).product()
}

/// sum_{k=0}^{n-1} of the order-th z-derivative of
/// sum_i w_i ln Gamma(bp k + 1 + c_i).
fn transform_sum<S: Scalar>(n: usize, bp: f64, c: &[S; 4], order: u32) -> S {
    let cmax = c.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    let y_star = 60f64.max(40.0 * (cmax + 1.0));
    // first index with bp k + 1 >= y_star, and at least 40 so Hurwitz q is large
    let k_split = (((y_star - 1.0) / bp).ceil().max(40.0)) as usize;
    let direct_end = if n > k_split + 200 { k_split } else { n };

    let mut acc = S::from_f64(0.0);
    for k in 0..direct_end {
        acc += direct_term(bp * k as f64 + 1.0, c, order);
    }
    if direct_end == n {
        return acc;
    }

    // tail sums S_m = sum_{k=K}^{N-1} (bp k + 1)^{-m}
    let q0 = 1.0 / bp;
    let qa = k_split as f64 + q0;
    let qb = n as f64 + q0;
    let mut tail = S::from_f64(0.0);
    for m in 1..=TAIL_TERMS {
        let deriv_len = m + 1;
        if (deriv_len as u32) < order {
            continue;
        }
        let bdeg = deriv_len - order as usize;
        let mut coeff = S::from_f64(0.0);
        for i in 0..4 {
            let dc = if order == 0 { 1.0 } else { DC[i].powi(order as i32) };
            if dc == 0.0 {
                continue;
            }
            coeff += bernoulli_poly(bdeg, c[i]) * (WEIGHTS[i] * dc);
        }
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        let scale = sign * falling(deriv_len, order) / (m * (m + 1)) as f64;
        let s_m = if m == 1 {
            (psi_s(0, qb) - psi_s(0, qa)) / bp
        } else {
            (hurwitz_zeta_large(m as u32, qa) - hurwitz_zeta_large(m as u32, qb))
                * bp.powi(-(m as i32))
        };
        tail += coeff * (scale * s_m);
    }
    acc + tail
}

fn check_transform_domain(p: &EnsembleParams, re_z: f64, order: u32) -> Result<()> {
    p.validate()?;
    if order > 3 {
        return Err(CbeError::UnsupportedDerivative(order));
    }
    if !re_z.is_finite() || !(2.0 * p.delta + re_z > -1.0) {
        return Err(CbeError::Domain(format!(
            "log-Laplace transform needs 2 delta + Re z > -1 (delta = {}, Re z = {re_z})",
            p.delta
        )));
    }
    Ok(())
}

/// Order-th derivative (0..=3) of ln E[exp(z X_N)] under CJ(beta, delta).
pub fn log_laplace(p: &EnsembleParams, z: Complex64, order: u32) -> Result<TransformValue> {
    check_transform_domain(p, z.re, order)?;
    if !z.im.is_finite() {
        return Err(CbeError::Domain("non-finite imaginary part".into()));
    }
    let value = if z.im == 0.0 {
        Complex64::new(real_sum(p, z.re, order), 0.0)
    } else {
        let c = shifts(p.delta, z);
        transform_sum(p.n, p.beta_prime(), &c, order)
    };
    Ok(TransformValue { order, at: z, value })
}

fn real_sum(p: &EnsembleParams, z: f64, order: u32) -> f64 {
    let c = shifts(p.delta, z);
    transform_sum(p.n, p.beta_prime(), &c, order)
}

/// Real-argument convenience wrapper around [`log_laplace`].
pub fn log_laplace_real(p: &EnsembleParams, z: f64, order: u32) -> Result<f64> {
    check_transform_domain(p, z, order)?;
    Ok(real_sum(p, z, order))
}

// ===================================================================
// Auxiliary functions phi, phi_beta, eta_beta
// ===================================================================

/// B_{2k}/(2k)!, k = 1..8: Taylor coefficients of phi in s^2.
const PHI_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];
const SERIES_SWITCH: f64 = 0.5;

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// phi(s) = (1/s)(1/2 - 1/s + 1/(e^s - 1)), phi(0) = 1/12.
pub fn phi(s: f64) -> f64 {
    if s.abs() < SERIES_SWITCH {
        return horner(&PHI_SERIES, s * s);
    }
    (0.5 - 1.0 / s + 1.0 / s.exp_m1()) / s
}

/// phi'(s).
pub fn phi_prime(s: f64) -> f64 {
    if s.abs() < SERIES_SWITCH {
        // d/ds sum a_k s^{2k-2} = sum (2k-2) a_k s^{2k-3}
        let s2 = s * s;
        let mut acc = 0.0;
        for (k, a) in PHI_SERIES.iter().enumerate().skip(1).rev() {
            acc = acc * s2 + (2 * k) as f64 * a;
        }
        return acc * s;
    }
    let em1 = s.exp_m1();
    let inv = 1.0 / em1;
    -0.5 / (s * s) + 2.0 / (s * s * s) - (1.0 + s * (1.0 + inv)) * inv / (s * s)
}

fn beta_prime_of(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(CbeError::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    Ok(beta / 2.0)
}

/// phi_beta(s) = phi(s) - beta'^2 phi(s beta').
pub fn phi_beta(s: f64, beta: f64) -> Result<f64> {
    let bp = beta_prime_of(beta)?;
    Ok(phi(s) - bp * bp * phi(s * bp))
}

fn not_at_two(beta: f64) -> Result<f64> {
    let bp = beta_prime_of(beta)?;
    if bp == 1.0 {
        return Err(CbeError::InvalidParameter(
            "eta_beta is undefined at beta = 2 (phi_beta vanishes identically)".into(),
        ));
    }
    Ok(bp)
}

/// x / (e^x - 1) and its derivative in x.
fn bose(x: f64) -> (f64, f64) {
    if x.abs() < 0.25 {
        // sum B_n x^n / n! and its derivative
        const B: [f64; 8] = [
            1.0,
            -0.5,
            1.0 / 12.0,
            0.0,
            -1.0 / 720.0,
            0.0,
            1.0 / 30240.0,
            0.0,
        ];
        let v = horner(&B, x) - x.powi(8) / 1_209_600.0 + x.powi(10) / 47_900_160.0;
        let d = -0.5 + x / 6.0 - x.powi(3) / 180.0 + x.powi(5) / 5040.0 - x.powi(7) / 151_200.0
            + x.powi(9) / 4_790_016.0;
        return (v, d);
    }
    let em1 = x.exp_m1();
    let inv = 1.0 / em1;
    (x * inv, inv * (1.0 - x * (1.0 + inv)))
}

fn eta_parts(s: f64, bp: f64) -> (f64, f64) {
    let phi0 = (1.0 - bp * bp) / 12.0;
    let (q, dq) = bose(s * bp);
    let pb = phi(s) - bp * bp * phi(s * bp);
    let dpb = phi_prime(s) - bp * bp * bp * phi_prime(s * bp);
    (q * pb / phi0, (bp * dq * pb + q * dpb) / phi0)
}

/// eta_beta(s) = s beta' phi_beta(s) / ((e^{s beta'} - 1) phi_beta(0)), eta_beta(0) = 1.
pub fn eta_beta(s: f64, beta: f64) -> Result<f64> {
    let bp = not_at_two(beta)?;
    Ok(eta_parts(s, bp).0)
}

/// d/ds eta_beta(s) by the quotient rule.
pub fn eta_beta_prime(s: f64, beta: f64) -> Result<f64> {
    let bp = not_at_two(beta)?;
    Ok(eta_parts(s, bp).1)
}

// ===================================================================
// Decomposition at delta = 0
// ===================================================================

/// m(z) = ln Gamma(1+z) - 2 ln Gamma(1+z/2), z > -1.
pub fn m_func(z: f64) -> Result<f64> {
    if !(z > -1.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("m(z) needs z > -1, got {z}")));
    }
    Ok(lgamma_s(1.0 + z) - 2.0 * lgamma_s(1.0 + 0.5 * z))
}

fn require_delta_zero(p: &EnsembleParams) -> Result<()> {
    p.validate()?;
    if p.delta != 0.0 {
        return Err(CbeError::InvalidParameter(
            "this representation is stated for delta = 0".into(),
        ));
    }
    Ok(())
}

fn check_binet_domain(p: &EnsembleParams, z: f64) -> Result<()> {
    if !z.is_finite() || !(z > -p.beta_prime()) {
        return Err(CbeError::Domain(format!("need z > -beta', got {z}")));
    }
    Ok(())
}

/// sum_{k=1}^{N-1} [kappa(b'k) + kappa(b'k + z) - 2 kappa(b'k + z/2)], kappa(y) = (y + 1/2) ln y.
pub fn k_n_beta(p: &EnsembleParams, z: f64) -> Result<f64> {
    require_delta_zero(p)?;
    check_binet_domain(p, z)?;
    let bp = p.beta_prime();
    let kappa = |y: f64| (y + 0.5) * y.ln();
    Ok((1..p.n)
        .map(|k| {
            let y = bp * k as f64;
            kappa(y) + kappa(y + z) - 2.0 * kappa(y + 0.5 * z)
        })
        .sum())
}

/// (1 - e^{-s b (n-1)}) / (1 - e^{-s b}).
fn geometric(s: f64, b: f64, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    if s == 0.0 {
        return m;
    }
    (-s * b * m).exp_m1() / (-s * b).exp_m1()
}

/// Binet-type integral completing m + g + k = Lambda at delta = 0.
pub fn g_n_beta(p: &EnsembleParams, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    require_delta_zero(p)?;
    check_binet_domain(p, z)?;
    let bp = p.beta_prime();
    let n = p.n;
    let f = |s: f64| {
        let d = (-0.5 * s * z).exp_m1();
        geometric(s, bp, n) * d * d * (-s * bp).exp() * phi(s)
    };
    Ok(integrate_semi_infinite(f, spec)?.0)
}

/// Right-hand side of the comparison between general beta and beta = 2.
/// Equals the log-Laplace transform at delta = 0 for z > 0.
pub fn comparison_rhs(p: &EnsembleParams, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    comparison_rhs_impl(p, z, spec, 1.0)
}

pub(crate) fn comparison_rhs_impl(
    p: &EnsembleParams,
    z: f64,
    spec: &QuadratureSpec,
    integral_sign: f64,
) -> Result<f64> {
    require_delta_zero(p)?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("comparison needs z > 0, got {z}")));
    }
    let bp = p.beta_prime();
    let nf = p.n as f64;
    let haar = EnsembleParams { n: p.n, beta: 2.0, delta: 0.0 };
    let t1 = bp * log_laplace_real(&haar, z / bp, 0)?;
    let t2 = 0.5
        * (bp - 1.0)
        * lgamma_combo(nf, &[2.0, -1.0, -1.0], &[z / (2.0 * bp), 0.0, z / bp]);
    let t3 = m_func(z)? - 0.5 * (bp + 1.0) * m_func(z / bp)?;
    let n = p.n;
    let f = |s: f64| {
        let d = (-0.5 * s * z).exp_m1();
        geometric(s, bp, n) * d * d * (-s * bp).exp() * (phi(s) - bp * bp * phi(s * bp))
    };
    let t4 = if bp == 1.0 { 0.0 } else { integrate_semi_infinite(f, spec)?.0 };
    Ok(t1 + t2 + t3 + integral_sign * t4)
}

/// The normalised comparison integral and its z-derivatives (orders 0..=3):
/// G = int eta_beta(s) (1 - e^{-s b'(N-1)}) (1 - e^{-s z/2})^2 ds / s.
pub fn g_big_n_beta(p: &EnsembleParams, z: f64, order: u32, spec: &QuadratureSpec) -> Result<f64> {
    require_delta_zero(p)?;
    let bp = not_at_two(p.beta)?;
    if order > 3 {
        return Err(CbeError::UnsupportedDerivative(order));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("G needs z >= 0, got {z}")));
    }
    let m = (p.n - 1) as f64;
    let f = |s: f64| {
        let a = -(-s * bp * m).exp_m1();
        let eta = eta_parts(s, bp).0;
        let e1 = (-0.5 * s * z).exp();
        let e2 = (-s * z).exp();
        let shape = match order {
            0 => {
                let d = (-0.5 * s * z).exp_m1();
                d * d / s
            }
            1 => e1 - e2,
            2 => s * (e2 - 0.5 * e1),
            _ => s * s * (0.25 * e1 - e2),
        };
        eta * a * shape
    };
    Ok(integrate_semi_infinite(f, spec)?.0)
}

/// F_beta(z) = int (1 - e^{-s z/2})^2 eta_beta(s) ds / s.
pub fn f_beta(z: f64, beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = not_at_two(beta)?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("F_beta needs z >= 0, got {z}")));
    }
    let f = |s: f64| {
        let d = (-0.5 * s * z).exp_m1();
        d * d * eta_parts(s, bp).0 / s
    };
    Ok(integrate_semi_infinite(f, spec)?.0)
}

/// H_beta(z) = dF_beta/dz = int eta_beta(s) (e^{-s z/2} - e^{-s z}) ds.
pub fn h_beta(z: f64, beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let bp = not_at_two(beta)?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(CbeError::Domain(format!("H_beta needs z >= 0, got {z}")));
    }
    let f = |s: f64| eta_parts(s, bp).0 * ((-0.5 * s * z).exp() - (-s * z).exp());
    Ok(integrate_semi_infinite(f, spec)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, beta: f64, delta: f64) -> EnsembleParams {
        EnsembleParams::new(n, beta, delta).unwrap()
    }

    #[test]
    fn accessors() {
        let p = params(4, 1.0, 3.0);
        assert_eq!(p.beta_prime(), 0.5);
        assert_eq!(p.h(), 6.0);
        assert_eq!(p.lambda(), 6.0);
        assert!(EnsembleParams::new(0, 2.0, 0.0).is_err());
        assert!(EnsembleParams::new(3, -1.0, 0.0).is_err());
        assert!(EnsembleParams::new(3, 2.0, -0.1).is_err());
    }

    #[test]
    fn single_eigenvalue_second_moment() {
        // E|1 - e^{i theta}|^2 = 2 for uniform theta
        let v = log_laplace_real(&params(1, 2.0, 0.0), 2.0, 0).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-14);
        let v = log_laplace_real(&params(10, 2.0, 0.0), 2.0, 0).unwrap();
        assert!((v - 11f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn telescoping_large_n_uses_tail() {
        // exp(Lambda_{N,2,0}(2)) = N + 1 also for N where the tail sum kicks in
        for &n in &[500usize, 5_000, 1_000_000] {
            let v = log_laplace_real(&params(n, 2.0, 0.0), 2.0, 0).unwrap();
            let want = ((n + 1) as f64).ln();
            assert!((v - want).abs() < 1e-12 * want, "N={n}: {v} vs {want}");
        }
    }

    #[test]
    fn tail_matches_direct_sum() {
        // compare the closed-form tail against brute-force summation
        for &(beta, delta, z) in &[(2.0, 0.0, 3.0), (1.0, 2.5, -1.5), (4.0, 0.3, 7.0), (0.5, 0.0, 0.8)] {
            let p = params(3000, beta, delta);
            let c = shifts(p.delta, z);
            for order in 0..=3 {
                let fast = log_laplace_real(&p, z, order).unwrap();
                let mut slow = 0.0;
                for k in 0..p.n {
                    slow += direct_term(p.beta_prime() * k as f64 + 1.0, &c, order);
                }
                let tol = 1e-11 * slow.abs().max(1e-3);
                assert!((fast - slow).abs() < tol, "beta={beta} order={order}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn complex_tail_matches_direct_sum() {
        let p = params(2000, 1.0, 1.0);
        let z = Complex64::new(0.7, 1.9);
        let c = shifts(p.delta, z);
        for order in 0..=3 {
            let fast = log_laplace(&p, z, order).unwrap().value;
            let mut slow = Complex64::new(0.0, 0.0);
            for k in 0..p.n {
                slow += direct_term(p.beta_prime() * k as f64 + 1.0, &c, order);
            }
            assert!((fast - slow).norm() < 1e-11 * slow.norm().max(1e-3), "order {order}");
        }
    }

    #[test]
    fn complex_agrees_with_real_on_axis_and_conjugates() {
        let p = params(7, 1.0, 0.5);
        let r = log_laplace_real(&p, 1.3, 1).unwrap();
        let c = log_laplace(&p, Complex64::new(1.3, 0.0), 1).unwrap().value;
        assert_eq!(c.re, r);
        let z = Complex64::new(1.3, 0.4);
        let a = log_laplace(&p, z, 0).unwrap().value;
        let b = log_laplace(&p, z.conj(), 0).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = params(6, 1.0, 0.7);
        let z = 0.9;
        let h = 1e-5;
        for order in 1..=3 {
            let up = log_laplace_real(&p, z + h, order - 1).unwrap();
            let dn = log_laplace_real(&p, z - h, order - 1).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let d = log_laplace_real(&p, z, order).unwrap();
            assert!((fd - d).abs() < 1e-6, "order {order}: {fd} vs {d}");
        }
    }

    #[test]
    fn transform_domain_errors() {
        let p = params(3, 2.0, 0.0);
        assert!(matches!(log_laplace_real(&p, -1.0, 0), Err(CbeError::Domain(_))));
        assert!(matches!(
            log_laplace_real(&p, 1.0, 4),
            Err(CbeError::UnsupportedDerivative(4))
        ));
        let q = params(3, 2.0, 1.0);
        assert!(log_laplace_real(&q, -2.5, 0).is_ok());
    }

    #[test]
    fn phi_limits_and_continuity() {
        assert!((phi(0.0) - 1.0 / 12.0).abs() < 1e-16);
        for &s in &[SERIES_SWITCH * (1.0 - 1e-12), SERIES_SWITCH * (1.0 + 1e-12)] {
            let direct = (0.5 - 1.0 / s + 1.0 / s.exp_m1()) / s;
            assert!((phi(s) - direct).abs() < 1e-14);
        }
        assert!((phi_prime(0.49999) - phi_prime(0.50001)).abs() < 1e-6);
        let h = 1e-5;
        for &s in &[0.2, 0.7, 3.0] {
            let fd = (phi(s + h) - phi(s - h)) / (2.0 * h);
            assert!((fd - phi_prime(s)).abs() < 1e-10);
        }
        assert!(phi(800.0).is_finite());
    }

    #[test]
    fn eta_closed_form_at_beta_one() {
        let closed = |x: f64| {
            let e = (x / 2.0).exp_m1();
            (2.0 + 8.0 / x.exp_m1() - 4.0 / e) / e
        };
        for &s in &[0.6, 1.0, 2.5, 7.0] {
            assert!((eta_beta(s, 1.0).unwrap() - closed(s)).abs() < 1e-12);
        }
        assert!((eta_beta(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let x: f64 = 0.4;
        let approx = 1.0 - x / 4.0 + x.powi(3) / 192.0;
        assert!((eta_beta(x, 1.0).unwrap() - approx).abs() < 1e-3);
        assert!((approx - 0.900_333).abs() < 1e-6);
    }

    #[test]
    fn eta_derivative_matches_fd() {
        let h = 1e-5;
        for &beta in &[0.5, 1.0, 4.0] {
            for &s in &[0.05, 0.3, 0.9, 4.0] {
                let fd = (eta_beta(s + h, beta).unwrap() - eta_beta(s - h, beta).unwrap()) / (2.0 * h);
                assert!((fd - eta_beta_prime(s, beta).unwrap()).abs() < 1e-8, "beta {beta} s {s}");
            }
        }
        assert!(eta_beta_prime(1.0, 2.0).is_err());
        assert!(eta_beta(1.0, 2.0).is_err());
    }

    #[test]
    fn binet_decomposition() {
        let spec = QuadratureSpec::default();
        let p = params(5, 1.0, 0.0);
        let z = 1.5;
        let sum = m_func(z).unwrap() + g_n_beta(&p, z, &spec).unwrap() + k_n_beta(&p, z).unwrap();
        let lam = log_laplace_real(&p, z, 0).unwrap();
        assert!((sum - lam).abs() < 1e-8, "{sum} vs {lam}");
    }

    #[test]
    fn comparison_matches_transform() {
        let spec = QuadratureSpec::default();
        for &beta in &[0.5, 4.0] {
            let p = params(10, beta, 0.0);
            let r = comparison_rhs(&p, 2.0, &spec).unwrap();
            let l = log_laplace_real(&p, 2.0, 0).unwrap();
            assert!((r - l).abs() < 1e-8);
        }
        let p = params(10, 2.0, 0.0);
        assert_eq!(comparison_rhs(&p, 2.0, &spec).unwrap(), log_laplace_real(&p, 2.0, 0).unwrap());
    }

    #[test]
    fn g_prime_vs_finite_difference() {
        let spec = QuadratureSpec::default();
        let p = params(10, 4.0, 0.0);
        let h = 1e-4;
        let fd = (g_big_n_beta(&p, 2.0 + h, 0, &spec).unwrap()
            - g_big_n_beta(&p, 2.0 - h, 0, &spec).unwrap())
            / (2.0 * h);
        let d = g_big_n_beta(&p, 2.0, 1, &spec).unwrap();
        assert!((fd - d).abs() < 1e-6);
        for order in 2..=3 {
            let fd = (g_big_n_beta(&p, 2.0 + h, order - 1, &spec).unwrap()
                - g_big_n_beta(&p, 2.0 - h, order - 1, &spec).unwrap())
                / (2.0 * h);
            let d = g_big_n_beta(&p, 2.0, order, &spec).unwrap();
            assert!((fd - d).abs() < 1e-6, "order {order}");
        }
    }

    #[test]
    fn h_is_derivative_of_f() {
        let spec = QuadratureSpec::default();
        let h = 1e-4;
        let fd = (f_beta(5.0 + h, 1.0, &spec).unwrap() - f_beta(5.0 - h, 1.0, &spec).unwrap()) / (2.0 * h);
        assert!((fd - h_beta(5.0, 1.0, &spec).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn f_beta_logarithmic_growth() {
        let spec = QuadratureSpec::default();
        // F_beta(z) - ln z = A_beta - 3 eta'(0) / z + O(1/z^2), eta'(0) = -beta'/2
        let a = f_beta(100.0, 1.0, &spec).unwrap() - 100f64.ln();
        let b = f_beta(200.0, 1.0, &spec).unwrap() - 200f64.ln();
        let slope = -3.0 * eta_beta_prime(0.0, 1.0).unwrap();
        assert!((slope - 0.75).abs() < 1e-12);
        assert!(((a - slope / 100.0) - (b - slope / 200.0)).abs() < 1e-4, "{a} {b}");
        assert!((a - b - slope / 200.0).abs() < 1e-4);
    }
}
