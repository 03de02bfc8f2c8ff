//! Metropolis sampling of the circular Jacobi ensemble, direct and
//! importance-weighted tail estimators, low-N quadrature oracles and the
//! one-sample Kolmogorov statistic.

use std::f64::consts::{LN_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CbeError, Result};
use crate::exact_transform::EnsembleParams;
use crate::specfun::{gauss7, gaussian_upper_tail, integrate_interval, QuadratureSpec};
use crate::tilt::{solve_tilt, TiltSolution};

/// Sampler settings. `n_samples` is the total over all chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_samples: usize,
    pub n_burn: usize,
    pub thinning: usize,
    /// Initial half-width of the wrapped-uniform proposal; pi/sqrt(N) when unset.
    pub proposal_scale: Option<f64>,
    pub n_chains: usize,
    pub seed: u64,
    /// Upper bound on worker threads used for chains.
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            n_burn: 1_000,
            thinning: 1,
            proposal_scale: None,
            n_chains: 1,
            seed: 0,
            threads: 1,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(CbeError::InvalidParameter("samples must be >= 1".into()));
        }
        if self.thinning == 0 {
            return Err(CbeError::InvalidParameter("thin must be >= 1".into()));
        }
        if self.n_chains == 0 || self.n_chains > self.n_samples {
            return Err(CbeError::InvalidParameter(format!(
                "chains must be in 1..=samples, got {}",
                self.n_chains
            )));
        }
        if let Some(s) = self.proposal_scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CbeError::InvalidParameter(format!(
                    "proposal scale must be > 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Recorded X_N values, chain after chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub log_weights: Option<Vec<f64>>,
    pub chain_lengths: Vec<usize>,
    pub seed: u64,
    pub n_burn: usize,
    pub acceptance_rate: f64,
    pub thinning: usize,
    /// Mean tuned proposal half-width across chains.
    pub proposal_scale: f64,
    pub ill_tuned: bool,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn chains(&self) -> Vec<&[f64]> {
        split_chains(&self.values, &self.chain_lengths)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        self.values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }

    /// Set log_weights to Lambda(h) - h x, the likelihood ratio back to the untilted law.
    pub fn attach_tilt_weights(&mut self, h: f64, lambda_h: f64) {
        self.log_weights = Some(self.values.iter().map(|x| lambda_h - h * x).collect());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub n_effective: f64,
}

fn split_chains<'a>(v: &'a [f64], lengths: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(lengths.len());
    let mut start = 0;
    for &l in lengths {
        out.push(&v[start..start + l]);
        start += l;
    }
    out
}

#[inline]
fn log_chord(a: f64, b: f64) -> f64 {
    // ln |e^{ia} - e^{ib}|
    (2.0 * (0.5 * (a - b)).sin().abs()).ln()
}

/// beta sum_{i<j} ln|e^{i t_i} - e^{i t_j}| + 2 delta sum_i ln|1 - e^{i t_i}|.
pub fn log_density_unnormalized(p: &EnsembleParams, angles: &[f64]) -> Result<f64> {
    if angles.len() != p.n {
        return Err(CbeError::InvalidParameter(format!(
            "expected {} angles, got {}",
            p.n,
            angles.len()
        )));
    }
    let mut pair = 0.0;
    for i in 0..angles.len() {
        for j in i + 1..angles.len() {
            pair += log_chord(angles[i], angles[j]);
        }
    }
    let mut out = p.beta * pair;
    if p.delta != 0.0 {
        let x = compute_xn(angles);
        out += 2.0 * p.delta * x;
    }
    if out.is_nan() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(out)
}

/// X_N = sum ln|1 - e^{i t}|; -inf if some angle is 0.
pub fn compute_xn(angles: &[f64]) -> f64 {
    angles.iter().map(|&t| log_chord(t, 0.0)).sum()
}

struct ChainOut {
    values: Vec<f64>,
    accepted: u64,
    proposed: u64,
    scale: f64,
}

const TUNE_BLOCK: usize = 20;

struct ChainState {
    theta: Vec<f64>,
    half_ls: Vec<f64>,
    /// pair[i n + j] = ln|e^{i t_i} - e^{i t_j}|
    pair: Vec<f64>,
    row: Vec<f64>,
}

impl ChainState {
    fn new(n: usize) -> Self {
        let theta: Vec<f64> = (0..n).map(|k| TAU * (k as f64 + 0.5) / n as f64).collect();
        let half_ls = theta.iter().map(|&t| (0.5 * t).sin().abs().ln()).collect();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pair[i * n + j] = log_chord(theta[i], theta[j]);
                }
            }
        }
        Self { theta, half_ls, pair, row: vec![0.0; n] }
    }

    fn xn(&self) -> f64 {
        self.theta.len() as f64 * LN_2 + self.half_ls.iter().sum::<f64>()
    }

    fn step(&mut self, p: &EnsembleParams, rng: &mut ChaCha8Rng, scale: f64) -> bool {
        let n = self.theta.len();
        let j = rng.gen_range(0..n);
        let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let prop = (self.theta[j] + scale * u).rem_euclid(TAU);
        let mut d = 0.0;
        for k in 0..n {
            if k != j {
                let v = log_chord(prop, self.theta[k]);
                self.row[k] = v;
                d += v - self.pair[j * n + k];
            }
        }
        d *= p.beta;
        let new_half = (0.5 * prop).sin().abs().ln();
        if p.delta != 0.0 {
            d += 2.0 * p.delta * (new_half - self.half_ls[j]);
        }
        let accept = if d >= 0.0 {
            true
        } else if d.is_nan() || d == f64::NEG_INFINITY {
            false
        } else {
            rng.gen::<f64>().ln() < d
        };
        if accept {
            self.theta[j] = prop;
            self.half_ls[j] = new_half;
            for k in 0..n {
                if k != j {
                    self.pair[j * n + k] = self.row[k];
                    self.pair[k * n + j] = self.row[k];
                }
            }
        }
        accept
    }
}

fn run_chain(p: &EnsembleParams, n_rec: usize, cfg: &McConfig, chain: u64) -> ChainOut {
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain);
    let mut state = ChainState::new(n);
    let mut scale = cfg.proposal_scale.unwrap_or(PI / (n as f64).sqrt()).min(PI);

    let mut block_acc = 0usize;
    for sweep in 0..cfg.n_burn {
        for _ in 0..n {
            block_acc += usize::from(state.step(p, &mut rng, scale));
        }
        if (sweep + 1) % TUNE_BLOCK == 0 {
            let rate = block_acc as f64 / (TUNE_BLOCK * n) as f64;
            if rate < 0.3 {
                scale *= 0.8;
            } else if rate > 0.5 {
                scale = (scale * 1.25).min(PI);
            }
            block_acc = 0;
        }
    }

    let mut values = Vec::with_capacity(n_rec);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    while values.len() < n_rec {
        for _ in 0..cfg.thinning * n {
            accepted += u64::from(state.step(p, &mut rng, scale));
            proposed += 1;
        }
        // recomputed from the angles each time, so no drift accumulates
        values.push(state.xn());
    }
    ChainOut { values, accepted, proposed, scale }
}

/// Single-coordinate Metropolis on the N-torus with `cfg.n_chains` independent
/// chains. Chain c uses ChaCha8 seeded by `cfg.seed` on stream c, so output
/// is identical for any thread count. The proposal half-width is tuned
/// during burn-in toward 30-50% acceptance.
pub fn mcmc_sample_with(p: &EnsembleParams, cfg: &McConfig) -> Result<SampleBatch> {
    p.validate()?;
    cfg.validate()?;
    let chains = cfg.n_chains;
    let lengths: Vec<usize> = (0..chains)
        .map(|c| cfg.n_samples / chains + usize::from(c < cfg.n_samples % chains))
        .collect();
    let threads = cfg.threads.clamp(1, chains);
    let mut outs: Vec<Option<ChainOut>> = (0..chains).map(|_| None).collect();
    if threads == 1 {
        for c in 0..chains {
            outs[c] = Some(run_chain(p, lengths[c], cfg, c as u64));
        }
    } else {
        let per = chains.div_ceil(threads);
        std::thread::scope(|s| {
            for (t, slot) in outs.chunks_mut(per).enumerate() {
                let lengths = &lengths;
                s.spawn(move || {
                    for (i, out) in slot.iter_mut().enumerate() {
                        let c = t * per + i;
                        *out = Some(run_chain(p, lengths[c], cfg, c as u64));
                    }
                });
            }
        });
    }
    let outs: Vec<ChainOut> = outs.into_iter().flatten().collect();
    let accepted: u64 = outs.iter().map(|o| o.accepted).sum();
    let proposed: u64 = outs.iter().map(|o| o.proposed).sum();
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    let proposal_scale = outs.iter().map(|o| o.scale).sum::<f64>() / outs.len() as f64;
    let values: Vec<f64> = outs.into_iter().flat_map(|o| o.values).collect();
    Ok(SampleBatch {
        values,
        log_weights: None,
        chain_lengths: lengths,
        seed: cfg.seed,
        n_burn: cfg.n_burn,
        acceptance_rate,
        thinning: cfg.thinning,
        proposal_scale,
        ill_tuned: !(acceptance_rate > 0.05 && acceptance_rate < 0.95),
    })
}

/// Single-chain convenience wrapper.
pub fn mcmc_sample(
    p: &EnsembleParams,
    n_samples: usize,
    n_burn: usize,
    proposal_scale: f64,
    thinning: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let cfg = McConfig {
        n_samples,
        n_burn,
        thinning,
        proposal_scale: Some(proposal_scale),
        n_chains: 1,
        seed,
        threads: 1,
    };
    mcmc_sample_with(p, &cfg)
}

/// Integrated autocorrelation time with Sokal's adaptive window (c = 5),
/// pooled over chains. Never below 1.
pub fn integrated_autocorr_time(chains: &[&[f64]]) -> f64 {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if total < 2 {
        return 1.0;
    }
    let mean = chains.iter().flat_map(|c| c.iter()).sum::<f64>() / total as f64;
    let cov = |lag: usize| -> f64 {
        let mut s = 0.0;
        let mut cnt = 0usize;
        for c in chains {
            if c.len() > lag {
                for i in 0..c.len() - lag {
                    s += (c[i] - mean) * (c[i + lag] - mean);
                }
                cnt += c.len() - lag;
            }
        }
        if cnt == 0 {
            0.0
        } else {
            s / cnt as f64
        }
    };
    let c0 = cov(0);
    if !(c0 > 0.0) {
        return 1.0;
    }
    let max_lag = chains.iter().map(|c| c.len()).max().unwrap_or(0) / 2;
    let mut tau = 1.0;
    for lag in 1..max_lag {
        tau += 2.0 * cov(lag) / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Mean of per-sample contributions with an autocorrelation-aware standard
/// error. `zero_scale` is the largest possible contribution, used for the
/// rule-of-three error when every contribution is zero.
fn mean_estimate(w: &[f64], lengths: &[usize], zero_scale: f64) -> TailEstimate {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = if w.len() > 1 {
        w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    if !(var > 0.0) {
        return TailEstimate {
            probability: mean.clamp(0.0, 1.0),
            std_error: 3.0 / n * zero_scale,
            n_effective: n,
        };
    }
    let tau = integrated_autocorr_time(&split_chains(w, lengths));
    let n_eff = n / tau;
    TailEstimate {
        probability: mean.clamp(0.0, 1.0),
        std_error: (var / n_eff).sqrt(),
        n_effective: n_eff,
    }
}

/// Empirical frequency of X >= a for an unweighted batch.
pub fn tail_estimate_direct(batch: &SampleBatch, a: f64) -> Result<TailEstimate> {
    if batch.log_weights.is_some() {
        return Err(CbeError::InvalidParameter(
            "direct tail estimate needs an unweighted batch".into(),
        ));
    }
    if batch.is_empty() {
        return Err(CbeError::InvalidParameter("empty batch".into()));
    }
    let ind: Vec<f64> = batch.values.iter().map(|&x| f64::from(u8::from(x >= a))).collect();
    Ok(mean_estimate(&ind, &batch.chain_lengths, 1.0))
}

/// Unbiased importance estimate mean(exp(log_weight) 1{X >= a}).
pub fn tail_estimate_weighted(batch: &SampleBatch, a: f64) -> Result<TailEstimate> {
    let lw = batch
        .log_weights
        .as_ref()
        .ok_or_else(|| CbeError::InvalidParameter("batch carries no log weights".into()))?;
    if batch.is_empty() {
        return Err(CbeError::InvalidParameter("empty batch".into()));
    }
    let w: Vec<f64> = batch
        .values
        .iter()
        .zip(lw)
        .map(|(&x, &l)| if x >= a { l.exp() } else { 0.0 })
        .collect();
    // on {X >= a} the weight is largest at X = a
    let cap = batch
        .values
        .iter()
        .zip(lw)
        .filter(|(&x, _)| x >= a)
        .map(|(_, &l)| l.exp())
        .fold(0.0, f64::max);
    let zero_scale = if cap > 0.0 { cap } else { lw.iter().map(|l| l.exp()).fold(0.0, f64::max) };
    Ok(mean_estimate(&w, &batch.chain_lengths, zero_scale.min(1.0)))
}

/// Self-normalised variant sum(w 1{X >= a}) / sum(w), for variance comparison.
pub fn tail_estimate_self_normalized(batch: &SampleBatch, a: f64) -> Result<TailEstimate> {
    let lw = batch
        .log_weights
        .as_ref()
        .ok_or_else(|| CbeError::InvalidParameter("batch carries no log weights".into()))?;
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let p = batch.values.iter().zip(&w).filter(|(&x, _)| x >= a).map(|(_, w)| w).sum::<f64>() / sw;
    let resid: Vec<f64> = batch
        .values
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| wi * (f64::from(u8::from(x >= a)) - p) / sw * batch.len() as f64)
        .collect();
    let tau = integrated_autocorr_time(&split_chains(&resid, &batch.chain_lengths));
    let var: f64 = resid.iter().map(|r| r * r).sum::<f64>() / batch.len() as f64;
    let kish = sw * sw / sw2;
    Ok(TailEstimate {
        probability: p.clamp(0.0, 1.0),
        std_error: (var * tau / batch.len() as f64).sqrt(),
        n_effective: (kish / tau).min(batch.len() as f64),
    })
}

/// Sample the tilted ensemble CJ(beta, h/2) where Lambda'(h) = a, with
/// importance log-weights attached.
pub fn tilted_batch(n: usize, beta: f64, a: f64, cfg: &McConfig) -> Result<(TiltSolution, SampleBatch)> {
    let sol = solve_tilt(n, beta, a)?;
    let p = EnsembleParams::new(n, beta, 0.5 * sol.h)?;
    let mut batch = mcmc_sample_with(&p, cfg)?;
    let lam = sol.a * sol.h - sol.legendre;
    batch.attach_tilt_weights(sol.h, lam);
    Ok((sol, batch))
}

/// P[X_N >= a] under CbetaE by sampling at the tilt h solving Lambda'(h) = a.
pub fn tail_estimate_tilted(n: usize, beta: f64, a: f64, cfg: &McConfig) -> Result<TailEstimate> {
    let (_, batch) = tilted_batch(n, beta, a, cfg)?;
    tail_estimate_weighted(&batch, a)
}

// ===================================================================
// Low-N quadrature
// ===================================================================

fn check_small(n: usize, beta: f64, delta: f64, grid_points: usize) -> Result<EnsembleParams> {
    if !(1..=3).contains(&n) {
        return Err(CbeError::InvalidParameter(format!("quadrature oracle needs N in 1..=3, got {n}")));
    }
    if grid_points < 8 {
        return Err(CbeError::InvalidParameter(format!("grid_points must be >= 8, got {grid_points}")));
    }
    EnsembleParams::new(n, beta, delta)
}

/// Visit every point of the (N-1)-dimensional periodic midpoint grid.
fn for_each_outer<F: FnMut(&[f64])>(dims: usize, g: usize, mut f: F) {
    let mut idx = vec![0usize; dims];
    let mut pts = vec![0.0; dims];
    loop {
        for (p, &i) in pts.iter_mut().zip(&idx) {
            *p = TAU * (i as f64 + 0.5) / g as f64;
        }
        f(&pts);
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            idx[d] += 1;
            if idx[d] < g {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Integral over t in [lo, hi] of exp(beta sum ln|e^{it} - e^{i s_j}| + 2 delta ln|1 - e^{it}|),
/// split at the s_j so each Gauss piece sees a smooth integrand.
fn inner_integral(p: &EnsembleParams, outer: &[f64], lo: f64, hi: f64, g: usize) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    cuts.extend(outer.iter().copied().filter(|&s| s > lo && s < hi));
    cuts.sort_by(f64::total_cmp);
    let f = |t: f64| {
        let mut l = 2.0 * p.delta * log_chord(t, 0.0);
        for &s in outer {
            l += p.beta * log_chord(t, s);
        }
        l.exp()
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let panels = ((w[1] - w[0]) / TAU * g as f64).ceil().max(2.0) as usize;
        let step = (w[1] - w[0]) / panels as f64;
        for k in 0..panels {
            let a = w[0] + k as f64 * step;
            total += gauss7(&f, a, a + step);
        }
    }
    total
}

fn outer_log_weight(p: &EnsembleParams, outer: &[f64]) -> f64 {
    let mut l = 2.0 * p.delta * compute_xn(outer);
    for i in 0..outer.len() {
        for j in i + 1..outer.len() {
            l += p.beta * log_chord(outer[i], outer[j]);
        }
    }
    l
}

fn nested_tail(
    p: &EnsembleParams,
    prefix: &[f64],
    a: Option<f64>,
    g: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if prefix.len() + 1 == p.n {
        let w = outer_log_weight(p, prefix).exp();
        if w == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = match a {
            None => (0.0, TAU),
            Some(a) => {
                let c = 0.5 * (a - compute_xn(prefix)).exp();
                if c >= 1.0 {
                    return Ok(0.0);
                }
                let lo = 2.0 * c.asin();
                (lo, TAU - lo)
            }
        };
        return Ok(w * inner_integral(p, prefix, lo, hi, g));
    }
    let mut next = prefix.to_vec();
    next.push(0.0);
    let f = |t: f64| {
        let mut v = next.clone();
        *v.last_mut().unwrap_or(&mut 0.0) = t;
        nested_tail(p, &v, a, g, spec).unwrap_or(f64::NAN)
    };
    let panels = 8;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = TAU * k as f64 / panels as f64;
        total += integrate_interval(&f, lo, lo + TAU / panels as f64, spec)?.0;
    }
    Ok(total)
}

/// P[X_N >= a] under CJ(beta, delta) for N <= 3. For the last angle the
/// region {X_N >= a} is the arc [2 asin c, 2 pi - 2 asin c] with
/// c = e^{a - X_rest}/2, integrated by composite Gauss-Legendre with about
/// `grid_points` panels per turn; the other angles use adaptive
/// Gauss-Kronrod, which copes with the square-root edges where the arc closes.
pub fn brute_force_tail(n: usize, beta: f64, delta: f64, a: f64, grid_points: usize) -> Result<f64> {
    let p = check_small(n, beta, delta, grid_points)?;
    if a.is_nan() {
        return Err(CbeError::Domain("threshold is NaN".into()));
    }
    let spec = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-11, ..QuadratureSpec::default() };
    let den = nested_tail(&p, &[], None, grid_points, &spec)?;
    let num = nested_tail(&p, &[], Some(a), grid_points, &spec)?;
    if !(den > 0.0) {
        return Err(CbeError::NonConvergence("quadrature normaliser vanished".into()));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// E[f(X_N)] under CJ(beta, delta) for N <= 3 on the full periodic midpoint grid.
pub fn brute_force_expectation<F: Fn(f64) -> f64>(
    n: usize,
    beta: f64,
    delta: f64,
    f: F,
    grid_points: usize,
) -> Result<f64> {
    let p = check_small(n, beta, delta, grid_points)?;
    let (mut num, mut den) = (0.0, 0.0);
    for_each_outer(n, grid_points, |angles| {
        let w = log_density_unnormalized(&p, angles).unwrap_or(f64::NEG_INFINITY).exp();
        if w > 0.0 && w.is_finite() {
            num += w * f(compute_xn(angles));
            den += w;
        }
    });
    if !(den > 0.0) {
        return Err(CbeError::NonConvergence("quadrature normaliser vanished".into()));
    }
    Ok(num / den)
}

/// sup_x |F_n(x) - Phi((x - mean)/std)| over the sample.
pub fn empirical_kolmogorov(values: &[f64], mean: f64, std: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(CbeError::InvalidParameter(format!("std must be > 0, got {std}")));
    }
    if values.is_empty() {
        return Err(CbeError::InvalidParameter("empty sample".into()));
    }
    let mut z: Vec<f64> = values.iter().map(|x| (x - mean) / std).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let cdf = gaussian_upper_tail(-zi);
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    Ok(d)
}
