//! The acceptance battery: exact identities, oracle equivalences and
//! remainder-decay checks, shared by the `acceptance` test target and the
//! `cbe validate` command.

use serde::Serialize;

use crate::asymptotics::{
    a_beta_const, c_beta_const, hko_lambda, hko_rate, kolmogorov_bound, kolmogorov_distance_exact,
    large_dev, log_psi_beta, log_psi_beta_gamma_form, psi_haar, rate_curve_row, rate_i, theta_inv,
};
use crate::error::Result;
use crate::exact_transform::{comparison_rhs_impl, log_laplace_real, EnsembleParams};
use crate::montecarlo::{
    brute_force_expectation, brute_force_tail, empirical_kolmogorov, mcmc_sample_with, tilted_batch,
    tail_estimate_weighted, McConfig,
};
use crate::specfun::{fit_zeta_prime_minus_one, QuadratureSpec, CONSTANTS};
use crate::tilt::{scheme_estimate, solve_tilt};

/// Deliberate faults for exercising the battery itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the integral term in the comparison identity.
    ComparisonSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    /// Skip the Monte Carlo checks.
    pub quick: bool,
    pub seed: u64,
    pub fault: Option<Fault>,
    pub spec: QuadratureSpec,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { quick: false, seed: 0, fault: None, spec: QuadratureSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub measured: String,
    pub threshold: String,
}

impl CheckResult {
    pub fn status(&self) -> &'static str {
        if self.skipped {
            "SKIP"
        } else if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} [{:02}] {}: {} (want {})",
            self.status(),
            self.id,
            self.name,
            self.measured,
            self.threshold
        )
    }
}

pub const CHECK_NAMES: [&str; 12] = [
    "exact moments",
    "comparison identity",
    "rate-function equivalence",
    "scaling limit",
    "mod-Gaussian residue",
    "constants",
    "zeta'(-1) fit",
    "quadrature tail oracle",
    "Monte Carlo vs analytic",
    "Berry-Esseen domination",
    "large-deviation expansion",
    "rate curve endpoint",
];

const MC_CHECKS: [u32; 2] = [9, 10];

fn check(id: u32, passed: bool, measured: String, threshold: impl Into<String>) -> CheckResult {
    CheckResult {
        id,
        name: CHECK_NAMES[(id - 1) as usize],
        passed,
        skipped: false,
        measured,
        threshold: threshold.into(),
    }
}

fn failed(id: u32, err: crate::CbeError) -> CheckResult {
    check(id, false, format!("error: {err}"), "no error")
}

fn c1() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for n in 1..=200usize {
        let p = EnsembleParams::new(n, 2.0, 0.0)?;
        let v = log_laplace_real(&p, 2.0, 0)?.exp();
        let want = (n + 1) as f64;
        worst = worst.max((v - want).abs() / want);
    }
    Ok(check(1, worst <= 1e-12, format!("max rel err {worst:.3e} over N = 1..200"), "<= 1e-12"))
}

fn c2(opts: &ValidateOptions) -> Result<CheckResult> {
    let sign = if opts.fault == Some(Fault::ComparisonSign) { -1.0 } else { 1.0 };
    let mut worst: f64 = 0.0;
    for &n in &[2usize, 5, 10, 30] {
        for &beta in &[0.5, 1.0, 4.0] {
            let p = EnsembleParams::new(n, beta, 0.0)?;
            for &z in &[0.5, 2.0, 10.0] {
                let lhs = log_laplace_real(&p, z, 0)?;
                let rhs = comparison_rhs_impl(&p, z, &opts.spec, sign)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(check(2, worst <= 1e-8, format!("max |diff| {worst:.3e} over 36 points"), "<= 1e-8"))
}

fn c3() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for i in 1..=25 {
        let x = 0.02 + 0.64 * i as f64 / 26.0;
        worst = worst.max((rate_i(theta_inv(x)?)? - hko_rate(x)?).abs());
    }
    Ok(check(3, worst <= 1e-8, format!("max |diff| {worst:.3e} on 25 points"), "<= 1e-8"))
}

fn c4() -> Result<CheckResult> {
    let ns = [25usize, 50, 100, 200];
    let mut monotone = true;
    let mut last: f64 = 0.0;
    let mut detail = Vec::new();
    for &s in &[0.5, 1.0, 2.0] {
        let mut prev = f64::INFINITY;
        for &n in &ns {
            let p = EnsembleParams::new(n, 2.0, 0.0)?;
            let nf = n as f64;
            let gap = (log_laplace_real(&p, s * nf, 0)? / (nf * nf) - hko_lambda(s)).abs();
            monotone &= gap < prev;
            prev = gap;
        }
        last = last.max(prev);
        detail.push(format!("s={s}: {prev:.3e}"));
    }
    Ok(check(
        4,
        monotone && last < 0.02,
        format!("monotone = {monotone}, gap at N=200 [{}]", detail.join(", ")),
        "monotone decrease, < 0.02 at N = 200",
    ))
}

fn c5() -> Result<CheckResult> {
    let psi = psi_haar(1.0)?;
    let mut vals = Vec::new();
    for &n in &[100usize, 200, 400, 800] {
        let p = EnsembleParams::new(n, 2.0, 0.0)?;
        let nf = n as f64;
        vals.push(nf * (log_laplace_real(&p, 1.0, 0)? - nf.ln() / 4.0 - psi).abs());
    }
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    Ok(check(
        5,
        lo > 0.0 && spread < 3.0,
        format!("N*residue {:?}, spread {spread:.4}", vals.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>()),
        "max/min < 3",
    ))
}

fn c6(opts: &ValidateOptions) -> Result<CheckResult> {
    let spec = &opts.spec;
    let c2_want = 2f64.powf(-11.0 / 12.0) * std::f64::consts::PI.powf(-0.5) * CONSTANTS.zeta_prime_minus_one.exp();
    let c2_err = (c_beta_const(2.0, spec)? - c2_want).abs();
    let a2 = a_beta_const(2.0, spec)?;
    let mut red: f64 = 0.0;
    for &z in &[0.1, 1.0, 5.0, 20.0] {
        red = red.max((log_psi_beta(z, 2.0, spec)? - psi_haar(z)?).abs());
    }
    let gamma_form = (log_psi_beta(0.4, 1.0, spec)? - log_psi_beta_gamma_form(0.4, 1.0, spec)?).abs();
    Ok(check(
        6,
        c2_err <= 1e-10 && a2 == 0.0 && red <= 1e-10 && gamma_form <= 1e-8,
        format!("|C_2 err| {c2_err:.2e}, A_2 = {a2}, reduction {red:.2e}, Gamma-ratio form {gamma_form:.2e}"),
        "1e-10, 0, 1e-10, 1e-8",
    ))
}

fn c7() -> Result<CheckResult> {
    let fit = fit_zeta_prime_minus_one();
    let err = (fit - CONSTANTS.zeta_prime_minus_one).abs();
    Ok(check(7, err <= 1e-8, format!("fit {fit:.12}, |err| {err:.2e}"), "<= 1e-8"))
}

fn c8() -> Result<CheckResult> {
    let t = brute_force_tail(1, 2.0, 0.0, 0.0, 64)?;
    let e = brute_force_expectation(2, 2.0, 0.0, |x| (2.0 * x).exp(), 64)?;
    let (et, ee) = ((t - 2.0 / 3.0).abs(), (e - 3.0).abs());
    Ok(check(
        8,
        et <= 1e-6 && ee <= 1e-6,
        format!("tail N=1 {t:.10} (err {et:.1e}), E[e^(2X)] N=2 {e:.10} (err {ee:.1e})"),
        "both within 1e-6",
    ))
}

fn c9(opts: &ValidateOptions) -> Result<CheckResult> {
    let cfg = McConfig { n_samples: 500_000, n_burn: 2_000, seed: opts.seed, ..McConfig::default() };
    let (_, batch) = tilted_batch(16, 2.0, 5.0, &cfg)?;
    let mc = tail_estimate_weighted(&batch, 5.0)?;
    let sp = scheme_estimate(16, 2.0, 5.0)?.probability;
    let tol = (3.0 * mc.std_error).max(0.3 * sp);
    let ok16 = (mc.probability - sp).abs() <= tol;

    let cfg2 = McConfig { n_samples: 200_000, n_burn: 2_000, seed: opts.seed, ..McConfig::default() };
    let (_, b2) = tilted_batch(2, 2.0, 1.2, &cfg2)?;
    let mc2 = tail_estimate_weighted(&b2, 1.2)?;
    let bf = brute_force_tail(2, 2.0, 0.0, 1.2, 64)?;
    let ok2 = (mc2.probability - bf).abs() <= 3.0 * mc2.std_error;
    Ok(check(
        9,
        ok16 && ok2,
        format!(
            "N=16: MC {:.4e} +- {:.1e} vs saddlepoint {sp:.4e}; N=2: MC {:.6} +- {:.1e} vs quadrature {bf:.6}",
            mc.probability, mc.std_error, mc2.probability, mc2.std_error
        ),
        "N=16 within max(3 se, 30%); N=2 within 3 se",
    ))
}

fn empirical_kol(delta: f64, seed: u64) -> Result<f64> {
    let p = EnsembleParams::new(16, 2.0, delta)?;
    let cfg = McConfig { n_samples: 100_000, n_burn: 2_000, thinning: 10, seed, ..McConfig::default() };
    let b = mcmc_sample_with(&p, &cfg)?;
    let m = log_laplace_real(&p, 0.0, 1)?;
    let v = log_laplace_real(&p, 0.0, 2)?;
    empirical_kolmogorov(&b.values, m, v.sqrt())
}

fn c10(opts: &ValidateOptions) -> Result<CheckResult> {
    let bound = kolmogorov_bound(16, 2.0, 8.0)?;
    let d8 = empirical_kol(8.0, opts.seed)?;
    let d16 = empirical_kol(16.0, opts.seed)?;
    let x8 = kolmogorov_distance_exact(16, 2.0, 8.0, &opts.spec)?;
    let x16 = kolmogorov_distance_exact(16, 2.0, 16.0, &opts.spec)?;
    Ok(check(
        10,
        d8 < bound && d16 < d8,
        format!(
            "empirical d8 {d8:.5}, d16 {d16:.5}, bound {bound:.4}; exact d8 {x8:.6}, d16 {x16:.6}"
        ),
        "d8 < bound and d16 < d8",
    ))
}

fn c11() -> Result<CheckResult> {
    let ns = [50usize, 100, 200, 400];
    let mut res = Vec::new();
    for &n in &ns {
        res.push(large_dev(n, 2.0, 0.3)?.residual.unwrap_or(f64::NAN));
    }
    let spread = res.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - res.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut errs = Vec::new();
    for &n in &ns {
        let e = large_dev(n, 1.0, 0.3)?;
        let s = solve_tilt(n, 1.0, 0.3 * n as f64)?;
        let nf = n as f64;
        errs.push((s.lambda / nf - e.l0 - e.l1_star / nf).abs());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok_ratio = ratios.iter().all(|r| (2.5..=6.0).contains(r));
    Ok(check(
        11,
        spread < 1.0 && ok_ratio,
        format!(
            "beta=2 residual spread {spread:.3e}; beta=1 doubling ratios {:?}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
        "spread < 1, ratios in [2.5, 6]",
    ))
}

fn c12() -> Result<CheckResult> {
    let row = rate_curve_row(0.666, 2.0)?;
    Ok(check(
        12,
        (row.rate - 1.04).abs() <= 0.02,
        format!("rate(0.666) = {:.5}", row.rate),
        "1.04 +- 0.02",
    ))
}

/// Run one check by number (1..=12).
pub fn run_check(id: u32, opts: &ValidateOptions) -> CheckResult {
    if opts.quick && MC_CHECKS.contains(&id) {
        return CheckResult {
            id,
            name: CHECK_NAMES[(id - 1) as usize],
            passed: true,
            skipped: true,
            measured: "skipped (quick)".into(),
            threshold: "-".into(),
        };
    }
    let r = match id {
        1 => c1(),
        2 => c2(opts),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(opts),
        7 => c7(),
        8 => c8(),
        9 => c9(opts),
        10 => c10(opts),
        11 => c11(),
        12 => c12(),
        _ => Err(crate::CbeError::InvalidParameter(format!("no check {id}"))),
    };
    r.unwrap_or_else(|e| failed(id.clamp(1, 12), e))
}

pub fn run_all(opts: &ValidateOptions) -> Vec<CheckResult> {
    (1..=12).map(|id| run_check(id, opts)).collect()
}
