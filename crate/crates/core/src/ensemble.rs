//! Sampling the ensemble `P_n ∝ |VDM(λ)|^2 ∏ w(λ_i)^{2n} dμ^{⊗(n+1)}` over the
//! discretized measure, and large-deviation estimates.
//!
//! The default sampler walks the determinantal chain rule with the projection
//! kernel `Σ φ_j(x) φ_j(y)`, `φ_j = q_j w^n sqrt(μ)` on the nodes; each draw
//! is exact for the discretized ensemble. A rejection sampler that never
//! touches the orthonormal basis serves as an independent oracle at small `n`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Weight, WeightedProblem};
use crate::orthopoly::{level_measure, OrthoBasis};
use crate::partition::{block_rng, log_weighted_vdm, Categorical};

pub const REJECTION_MAX_LEVEL: usize = 4;
pub const DEVIATION_MIN_SAMPLES: usize = 10_000;
/// Resampling attempts before a configuration with a repeated node is an error.
const MAX_COLLISION_RETRIES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    KernelChain,
    Rejection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSample {
    pub level: usize,
    /// Node indices into the problem's quadrature rule, one row per configuration.
    pub indices: Vec<Vec<usize>>,
    pub configurations: Vec<Vec<Complex64>>,
    pub seed: u64,
    pub method: SamplerMethod,
}

/// Precomputed kernel-chain state: `φ_j(x)` at every node and the first-step
/// marginal `K(x, x) = Σ |φ_j(x)|^2`.
struct Chain {
    /// Row per node.
    phi: Vec<Vec<Complex64>>,
    first: Categorical,
}

impl Chain {
    fn new(problem: &WeightedProblem, basis: &OrthoBasis) -> Result<Self> {
        let n = basis.level();
        let (nodes, weights) = level_measure(problem, n);
        let phi: Vec<Vec<Complex64>> = nodes
            .par_iter()
            .zip(&weights)
            .map(|(&z, &v)| {
                let s = v.sqrt();
                basis.eval(z).into_iter().map(|q| q * s).collect()
            })
            .collect();
        let diag: Vec<f64> = phi
            .iter()
            .map(|r| r.iter().map(|q| q.norm_sqr()).sum())
            .collect();
        Ok(Self {
            first: Categorical::new(&diag)?,
            phi,
        })
    }

    /// One configuration by the chain rule: with `K_i` the kernel conditioned
    /// on the first `i` picks, `K_{i+1} = K_i - e_i e_i^*`,
    /// `e_i = K_i(., k_i) / sqrt(K_i(k_i, k_i))`.
    fn draw(&self, rng: &mut impl Rng) -> Vec<usize> {
        let d = self.phi[0].len();
        let m = self.phi.len();
        let mut out = Vec::with_capacity(d);
        let mut prob: Vec<f64> = Vec::new();
        let mut es: Vec<Vec<Complex64>> = Vec::with_capacity(d);
        let mut k = self.first.sample(rng);
        for step in 0..d {
            if step > 0 {
                for &j in &out {
                    prob[j] = 0.0;
                }
                k = match Categorical::new(&prob) {
                    Ok(c) => c.sample(rng),
                    // numerically exhausted: any unused node keeps the
                    // configuration well defined; the caller resamples repeats
                    Err(_) => (0..m).find(|i| !out.contains(i)).unwrap_or(0),
                };
            }
            out.push(k);
            if step + 1 == d {
                break;
            }
            if step == 0 {
                prob = self
                    .phi
                    .iter()
                    .map(|r| r.iter().map(|q| q.norm_sqr()).sum())
                    .collect();
            }
            let pk = prob[k].max(f64::MIN_POSITIVE);
            let row_k = &self.phi[k];
            let scale = 1.0 / pk.sqrt();
            let e: Vec<Complex64> = self
                .phi
                .iter()
                .enumerate()
                .map(|(x, row)| {
                    let mut kxk: Complex64 = row.iter().zip(row_k).map(|(a, b)| a * b.conj()).sum();
                    for prev in &es {
                        kxk -= prev[x] * prev[k].conj();
                    }
                    kxk * scale
                })
                .collect();
            for (p, v) in prob.iter_mut().zip(&e) {
                *p = (*p - v.norm_sqr()).max(0.0);
            }
            es.push(e);
        }
        out
    }
}

fn has_repeat(idx: &[usize]) -> bool {
    idx.iter()
        .enumerate()
        .any(|(i, a)| idx[i + 1..].contains(a))
}

/// Draws `count` configurations of `P_n` with per-configuration substreams
/// `(seed, index)`.
pub fn sample_pn(
    problem: &WeightedProblem,
    basis: &OrthoBasis,
    count: usize,
    seed: u64,
    method: SamplerMethod,
) -> Result<EnsembleSample> {
    let n = basis.level();
    let nodes = problem.measure.nodes();
    let indices: Vec<Vec<usize>> = match method {
        SamplerMethod::KernelChain => {
            let chain = Chain::new(problem, basis)?;
            (0..count)
                .into_par_iter()
                .map(|c| {
                    for attempt in 0..MAX_COLLISION_RETRIES {
                        let mut rng = block_rng(seed, ((c as u64) << 8) | attempt);
                        let idx = chain.draw(&mut rng);
                        if !has_repeat(&idx) {
                            return Ok(idx);
                        }
                    }
                    Err(Error::Numeric(
                        "kernel chain kept producing repeated nodes".into(),
                    ))
                })
                .collect::<Result<_>>()?
        }
        SamplerMethod::Rejection => {
            if n > REJECTION_MAX_LEVEL {
                return Err(Error::Precondition(format!(
                    "rejection sampler limited to n <= {REJECTION_MAX_LEVEL}"
                )));
            }
            let sampler = Rejection::new(problem, n)?;
            (0..count)
                .into_par_iter()
                .map(|c| {
                    let mut rng = block_rng(seed, c as u64);
                    sampler.draw(&mut rng)
                })
                .collect::<Result<_>>()?
        }
    };
    let configurations = indices
        .iter()
        .map(|row| row.iter().map(|&i| nodes[i]).collect())
        .collect();
    Ok(EnsembleSample {
        level: n,
        indices,
        configurations,
        seed,
        method,
    })
}

/// Rejection from a Hadamard envelope. With `t = (x - c)/s` and rows
/// `u_i = (1, t_i, ..., t_i^n)`, `|VDM(t)|^2 <= ∏ |u_i|^2`, so proposing each
/// point from `w^{2n} |u|^2 dμ` and accepting with `|VDM(t)|^2 / ∏ |u_i|^2`
/// is exact without any search for the maximum.
struct Rejection<'a> {
    nodes: &'a [Complex64],
    cat: Categorical,
    n: usize,
    center: Complex64,
    scale: f64,
}

fn log_row_norm(t: Complex64, n: usize) -> f64 {
    let r2 = t.norm_sqr();
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..=n {
        acc += p;
        p *= r2;
    }
    acc.ln()
}

impl<'a> Rejection<'a> {
    fn new(problem: &'a WeightedProblem, n: usize) -> Result<Self> {
        let nodes = problem.measure.nodes();
        let (mut lo_re, mut hi_re, mut lo_im, mut hi_im) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for z in nodes {
            lo_re = lo_re.min(z.re);
            hi_re = hi_re.max(z.re);
            lo_im = lo_im.min(z.im);
            hi_im = hi_im.max(z.im);
        }
        let center = Complex64::new(0.5 * (lo_re + hi_re), 0.5 * (lo_im + hi_im));
        let scale = nodes
            .iter()
            .map(|z| (z - center).norm())
            .fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let two_n = 2.0 * n as f64;
        let proposal: Vec<f64> = nodes
            .iter()
            .zip(problem.measure.weights())
            .map(|(&z, &mu)| {
                let lw = problem.weight.log_eval(z);
                if lw == f64::NEG_INFINITY || mu == 0.0 {
                    0.0
                } else {
                    (mu.ln() + two_n * lw + log_row_norm((z - center) / scale, n)).exp()
                }
            })
            .collect();
        if proposal.iter().filter(|&&v| v > 0.0).count() < n + 1 {
            return Err(Error::Numeric(
                "rejection proposal is degenerate: weight vanishes on too many nodes".into(),
            ));
        }
        Ok(Self {
            nodes,
            cat: Categorical::new(&proposal)?,
            n,
            center,
            scale,
        })
    }

    fn draw(&self, rng: &mut impl Rng) -> Result<Vec<usize>> {
        let mut idx = vec![0usize; self.n + 1];
        let mut ts = vec![Complex64::new(0.0, 0.0); self.n + 1];
        loop {
            let mut log_env = 0.0;
            for (slot, t) in idx.iter_mut().zip(ts.iter_mut()) {
                *slot = self.cat.sample(rng);
                *t = (self.nodes[*slot] - self.center) / self.scale;
                log_env += log_row_norm(*t, self.n);
            }
            let la = 2.0 * log_weighted_vdm(&ts, &Weight::Unit, self.n) - log_env;
            if la > 1e-9 {
                return Err(Error::Numeric(format!(
                    "Hadamard envelope exceeded by a factor {}",
                    la.exp()
                )));
            }
            if la > f64::NEG_INFINITY && rng.random::<f64>() < la.exp() {
                return Ok(idx);
            }
        }
    }
}

/// Membership in `A_{n,η}`: `2 log wvdm >= n^2 log(δ - η)`.
pub fn indicator_a(
    points: &[Complex64],
    w: &Weight,
    n: usize,
    eta: f64,
    delta_w: f64,
) -> Result<bool> {
    if !(eta > 0.0 && eta < delta_w) {
        return Err(Error::Precondition(format!(
            "need 0 < eta < delta_w (eta = {eta}, delta_w = {delta_w})"
        )));
    }
    let lv = log_weighted_vdm(points, w, n);
    Ok(2.0 * lv >= (n * n) as f64 * (delta_w - eta).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationReport {
    pub level: usize,
    pub eta: f64,
    /// `n^2 log(δ - η)`.
    pub threshold_log: f64,
    /// Empirical probability of the complement of `A_{n,η}`.
    pub estimate: f64,
    pub stderr: f64,
    /// `(1 - η/(2δ))^{n^2}`.
    pub bound: f64,
    pub samples: usize,
}

impl DeviationReport {
    /// `estimate - 3 stderr <= bound`.
    pub fn within_bound(&self) -> bool {
        self.estimate - 3.0 * self.stderr <= self.bound
    }
}

/// Complement probability of `A_{n,η}` on an existing sample.
pub fn deviation_from_sample(
    sample: &EnsembleSample,
    w: &Weight,
    eta: f64,
    delta_w: f64,
) -> Result<DeviationReport> {
    let n = sample.level;
    let count = sample.configurations.len();
    if count == 0 {
        return Err(Error::Precondition("empty sample".into()));
    }
    let mut outside = 0usize;
    for c in &sample.configurations {
        if !indicator_a(c, w, n, eta, delta_w)? {
            outside += 1;
        }
    }
    let p = outside as f64 / count as f64;
    let nn = (n * n) as f64;
    Ok(DeviationReport {
        level: n,
        eta,
        threshold_log: nn * (delta_w - eta).ln(),
        estimate: p,
        stderr: (p * (1.0 - p) / count as f64).sqrt(),
        bound: (1.0 - eta / (2.0 * delta_w)).powf(nn),
        samples: count,
    })
}

/// Samples `P_n` by the kernel chain and estimates the large-deviation probability.
pub fn large_deviation_estimate(
    problem: &WeightedProblem,
    basis: &OrthoBasis,
    eta: f64,
    delta_w: f64,
    count: usize,
    seed: u64,
) -> Result<DeviationReport> {
    if count < DEVIATION_MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "large-deviation estimate needs at least {DEVIATION_MIN_SAMPLES} samples"
        )));
    }
    if !(eta > 0.0 && eta < delta_w) {
        return Err(Error::Precondition(format!(
            "need 0 < eta < delta_w (eta = {eta}, delta_w = {delta_w})"
        )));
    }
    let sample = sample_pn(problem, basis, count, seed, SamplerMethod::KernelChain)?;
    deviation_from_sample(&sample, &problem.weight, eta, delta_w)
}

/// Exact complement probability for the unit circle, `w ≡ 1`, `n = 1`:
/// the event `|z_0 - z_1|^2 < 1 - η` has probability `(θ* - sin θ*)/π`
/// with `cos θ* = (1 + η)/2`.
pub fn circle_pair_complement(eta: f64) -> f64 {
    // |z0 - z1|^2 = 2 - 2 cos θ < 1 - η
    let theta = (1.0 - (1.0 - eta) / 2.0).acos();
    (theta - theta.sin()) / std::f64::consts::PI
}
