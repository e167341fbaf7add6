//! Weighted Vandermonde determinants and the partition function
//! `Z_n = ∫ |VDM(λ)|^2 ∏ w(λ_i)^{2n} dμ(λ_0) ... dμ(λ_n)`.
//!
//! Three routes: the product of monic norms, the homogeneous Gram determinant
//! of the circled-set lift, and Monte Carlo over the discretized measure.
//! Everything is accumulated in log space.

use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::measures::{build_quadrature, Domain, QuadratureMeasure, Weight, WeightedProblem};
use crate::orthopoly::{discrete_gram, level_measure, OrthoBasis};
use crate::scalar::{cplx, Precision, Scalar};

/// Samples per Monte Carlo block; each block owns one RNG stream.
pub const MC_BLOCK: usize = 10_000;
pub const MC_MAX_LEVEL: usize = 8;
pub const MC_MIN_SAMPLES: usize = 10_000;
/// Largest level for the unfactored homogeneous determinant.
pub const DIRECT_HOMOGENEOUS_MAX: usize = 12;
pub const CORRELATION_MAX_LEVEL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    NormProduct,
    HomGram,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionResult {
    pub level: usize,
    pub log_z: f64,
    pub route: Route,
    /// Standard error of `log Z` (delta method); zero for exact routes.
    pub stderr_log: f64,
}

impl PartitionResult {
    /// `Z_n^{1/n^2}`; undefined at `n = 0`.
    pub fn free_energy(&self) -> Option<f64> {
        free_energy(self.log_z, self.level)
    }
}

pub fn free_energy(log_z: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| (log_z / (n * n) as f64).exp())
}

/// `log |VDM(λ)| + n Σ log w(λ_i)`; `-inf` for repeated points or zero weight.
pub fn log_weighted_vdm(points: &[Complex64], w: &Weight, n: usize) -> f64 {
    let mut acc = 0.0;
    for (i, &a) in points.iter().enumerate() {
        let lw = w.log_eval(a);
        if lw == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += n as f64 * lw;
        for &b in &points[i + 1..] {
            let d = (a - b).norm();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += d.ln();
        }
    }
    acc
}

/// `|VDM(λ)| ∏ w(λ_i)^n` for `n + 1` points.
pub fn weighted_vdm(points: &[Complex64], w: &Weight, n: usize) -> Result<f64> {
    check_len(points.len(), n)?;
    Ok(log_weighted_vdm(points, w, n).exp())
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if len != n + 1 {
        return Err(Error::Precondition(format!(
            "expected n + 1 = {} points, got {len}",
            n + 1
        )));
    }
    Ok(())
}

/// A point `(t, z) = (w(λ) e^{iθ}, λ t)` of the circled set over `λ`.
///
/// Stored in polar form so the modulus of `t` stays exact under phase changes
/// and representable when `w(λ)` underflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedPoint {
    pub base: Complex64,
    pub phase: f64,
    /// `log |t| = log w(λ)`.
    pub log_modulus: f64,
}

impl LiftedPoint {
    pub fn t(&self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }

    pub fn z(&self) -> Complex64 {
        self.base * self.t()
    }
}

pub fn lift_to_f(lambda: Complex64, theta: f64, w: &Weight) -> Result<LiftedPoint> {
    let lw = w.log_eval(lambda);
    if lw == f64::NEG_INFINITY {
        return Err(Error::Lift(format!("{lambda}")));
    }
    Ok(LiftedPoint {
        base: lambda,
        phase: theta,
        log_modulus: lw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneousVdm {
    /// `log(|t_0 ... t_n|^n |VDM(λ)|)`.
    pub log_value: f64,
    /// `log |det[t_i^{n-j} z_i^j]|` when `n <= 12`.
    pub log_direct: Option<f64>,
}

impl HomogeneousVdm {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn relative_gap(&self) -> Option<f64> {
        self.log_direct.map(|d| (d - self.log_value).exp_m1().abs())
    }
}

/// `|det[t_i^{n-j} z_i^j]|` by the factorization `∏|t_i|^n |VDM(λ)|`, with the
/// direct determinant (double-double LU) alongside for `n <= 12`.
pub fn homogeneous_vdm(points: &[LiftedPoint], n: usize) -> Result<HomogeneousVdm> {
    check_len(points.len(), n)?;
    let mut log_value: f64 = points.iter().map(|p| n as f64 * p.log_modulus).sum();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            log_value += (p.base - q.base).norm().ln();
        }
    }
    let log_direct = (n <= DIRECT_HOMOGENEOUS_MAX).then(|| {
        let d = n + 1;
        let rows: Vec<(Complex<TwoFloat>, Complex<TwoFloat>)> =
            points.iter().map(|p| (cplx(p.t()), cplx(p.z()))).collect();
        let one = Complex::new(TwoFloat::from(1.0), TwoFloat::from(0.0));
        let m = CMatrix::<TwoFloat>::from_fn(d, |i, j| {
            let (t, z) = rows[i];
            let mut v = one;
            for _ in 0..(n - j) {
                v *= t;
            }
            for _ in 0..j {
                v *= z;
            }
            v
        });
        m.log_det().log_abs
    });
    Ok(HomogeneousVdm {
        log_value,
        log_direct,
    })
}

/// `log Z_n = log (n+1)! + 2 Σ log ||p_j||`.
pub fn partition_norm_product(basis: &OrthoBasis) -> PartitionResult {
    let n = basis.level();
    PartitionResult {
        level: n,
        log_z: ln_factorial((n + 1) as u64) + 2.0 * basis.log_monic_norms().iter().sum::<f64>(),
        route: Route::NormProduct,
        stderr_log: 0.0,
    }
}

/// The homogeneous Gram matrix `H[i][j] = ∫ λ^{n-j} λ̄^{n-i} w^{2n} dμ`.
pub fn homogeneous_gram<S: Scalar>(problem: &WeightedProblem, n: usize) -> Result<CMatrix<S>> {
    problem.require_order_for(n)?;
    let (nodes, weights) = level_measure(problem, n);
    let g = discrete_gram::<S>(&nodes, &weights, n);
    // G[a][b] = ∫ z^a z̄^b, so H[i][j] = G[n-j][n-i]
    Ok(CMatrix::from_fn(n + 1, |i, j| g.get(n - j, n - i)))
}

/// `log Z̃_n = log (n+1)! + log det H`.
pub fn partition_hom_gram(
    problem: &WeightedProblem,
    n: usize,
    precision: Precision,
) -> Result<PartitionResult> {
    let det = match precision {
        Precision::Double => homogeneous_gram::<f64>(problem, n)?.log_det(),
        Precision::Extended => homogeneous_gram::<TwoFloat>(problem, n)?.log_det(),
    };
    if det.log_abs == f64::NEG_INFINITY || det.phase.re <= 0.0 || det.phase.im.abs() > 1e-6 {
        let signed = det.log_abs.exp() * det.phase.re;
        return Err(Error::NonPositiveDeterminant(signed));
    }
    Ok(PartitionResult {
        level: n,
        log_z: ln_factorial((n + 1) as u64) + det.log_abs,
        route: Route::HomGram,
        stderr_log: 0.0,
    })
}

/// Inverse-CDF sampler over the atoms of a discrete measure.
#[derive(Debug, Clone)]
pub(crate) struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub(crate) fn new(weights: &[f64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::Precondition("measure has zero mass".into()));
        }
        Ok(Self { cumulative })
    }

    pub(crate) fn total(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u);
        // u can only land past the end through rounding; skip zero-weight atoms
        let mut i = i.min(self.cumulative.len() - 1);
        while i > 0 && self.cumulative[i] == self.cumulative[i - 1] {
            i -= 1;
        }
        i
    }
}

/// Running mean and sum of squared deviations; combined in block order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn merge(self, o: Moments) -> Moments {
        if self.count == 0.0 {
            return o;
        }
        if o.count == 0.0 {
            return self;
        }
        let count = self.count + o.count;
        let d = o.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * o.count / count,
            m2: self.m2 + o.m2 + d * d * self.count * o.count / count,
        }
    }

    pub(crate) fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

pub(crate) fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo estimate of `Z_n` from i.i.d. draws of `μ/|μ|`.
pub fn partition_monte_carlo(
    problem: &WeightedProblem,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PartitionResult> {
    if n > MC_MAX_LEVEL {
        return Err(Error::Precondition(format!(
            "Monte Carlo route limited to n <= {MC_MAX_LEVEL}"
        )));
    }
    if samples < MC_MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "Monte Carlo route needs at least {MC_MIN_SAMPLES} samples"
        )));
    }
    let measure = &problem.measure;
    let cat = Categorical::new(measure.weights())?;
    let log_mass = cat.total().ln();
    let nodes = measure.nodes();
    let log_w: Vec<f64> = nodes.iter().map(|&z| problem.weight.log_eval(z)).collect();
    let blocks = samples.div_ceil(MC_BLOCK);
    let moments: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut idx = vec![0usize; n + 1];
            let mut m = Moments::default();
            for _ in 0..count {
                for slot in idx.iter_mut() {
                    *slot = cat.sample(&mut rng);
                }
                let mut log_f = (n + 1) as f64 * log_mass;
                for (i, &a) in idx.iter().enumerate() {
                    log_f += 2.0 * n as f64 * log_w[a];
                    for &b in &idx[i + 1..] {
                        log_f += (nodes[a] - nodes[b]).norm_sqr().ln();
                    }
                }
                m.push(log_f.exp());
            }
            m
        })
        .collect();
    let total = moments.into_iter().fold(Moments::default(), Moments::merge);
    if !(total.mean > 0.0) {
        return Err(Error::Numeric("Monte Carlo mean is zero".into()));
    }
    Ok(PartitionResult {
        level: n,
        log_z: total.mean.ln(),
        route: Route::MonteCarlo,
        stderr_log: total.stderr() / total.mean,
    })
}

/// Density of `μ_n` with respect to `μ`: `K_n(z) w(z)^{2n} / (n+1)`.
pub fn mu_n_density(
    basis: &OrthoBasis,
    problem: &WeightedProblem,
    points: &[Complex64],
) -> Vec<f64> {
    let n = basis.level();
    points
        .par_iter()
        .map(|&z| {
            let lw = problem.weight.log_eval(z);
            if lw == f64::NEG_INFINITY {
                0.0
            } else {
                basis.christoffel_at(z) * (2.0 * n as f64 * lw).exp() / (n + 1) as f64
            }
        })
        .collect()
}

/// `μ_n` as a measure on the quadrature nodes of the problem.
pub fn mu_n_measure(basis: &OrthoBasis, problem: &WeightedProblem) -> Result<QuadratureMeasure> {
    let nodes = problem.measure.nodes().to_vec();
    let dens = mu_n_density(basis, problem, &nodes);
    let weights = dens
        .iter()
        .zip(problem.measure.weights())
        .map(|(d, m)| d * m)
        .collect();
    QuadratureMeasure::new(nodes, weights)
}

/// `μ_n` on a finer copy of the problem's natural rule with `order` nodes per
/// component, scaled to the same total mass as `μ`. The density `K_n w^{2n}/(n+1)`
/// is exact in `z`, so only the outer integration changes; transport distances
/// then no longer see the atoms of the coarse rule.
pub fn mu_n_refined(
    basis: &OrthoBasis,
    problem: &WeightedProblem,
    order: usize,
) -> Result<QuadratureMeasure> {
    if matches!(problem.domain, Domain::PointCloud { .. }) {
        return Err(Error::Domain("a point cloud has no finer rule".into()));
    }
    let fine = build_quadrature(&problem.domain, order, false)?;
    let scale = problem.measure.total_mass() / fine.total_mass();
    let dens = mu_n_density(basis, problem, fine.nodes());
    let weights = dens
        .iter()
        .zip(fine.weights())
        .map(|(d, m)| d * m * scale)
        .collect();
    QuadratureMeasure::new(fine.nodes().to_vec(), weights)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationGrid {
    pub m: usize,
    pub level: usize,
    pub points: Vec<Vec<Complex64>>,
    pub values: Vec<f64>,
    /// `R_m / Z_n · ∏ w(z_i)^{2n}`.
    pub normalized_values: Vec<f64>,
}

/// `R_m^{(n)}(z_1..z_m)`: the partition integrand with `m` arguments held fixed,
/// integrated over the other `n + 1 - m` by tensor quadrature.
pub fn m_point_correlation(
    problem: &WeightedProblem,
    basis: &OrthoBasis,
    m: usize,
    tuples: &[Vec<Complex64>],
) -> Result<CorrelationGrid> {
    let n = basis.level();
    if n > CORRELATION_MAX_LEVEL || m == 0 || m > n + 1 {
        return Err(Error::Precondition(format!(
            "correlations need n <= {CORRELATION_MAX_LEVEL} and 1 <= m <= n + 1 (n = {n}, m = {m})"
        )));
    }
    if let Some(t) = tuples.iter().find(|t| t.len() != m) {
        return Err(Error::Precondition(format!(
            "tuple of length {} for m = {m}",
            t.len()
        )));
    }
    let log_z = partition_norm_product(basis).log_z;
    let (nodes, weights) = level_measure(problem, n);
    let free = n + 1 - m;
    let mut values = Vec::with_capacity(tuples.len());
    let mut normalized = Vec::with_capacity(tuples.len());
    for tuple in tuples {
        let r = correlation_value(&nodes, &weights, free, tuple);
        let lw: f64 = tuple.iter().map(|&z| problem.weight.log_eval(z)).sum();
        values.push(r);
        normalized.push(r * (2.0 * n as f64 * lw - log_z).exp());
    }
    Ok(CorrelationGrid {
        m,
        level: n,
        points: tuples.to_vec(),
        values,
        normalized_values: normalized,
    })
}

fn sq_vdm(points: &[Complex64]) -> f64 {
    let mut p = 1.0;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            p *= (a - b).norm_sqr();
        }
    }
    p
}

fn correlation_value(
    nodes: &[Complex64],
    weights: &[f64],
    free: usize,
    fixed: &[Complex64],
) -> f64 {
    if free == 0 {
        return sq_vdm(fixed);
    }
    let k = nodes.len();
    // parallel over the outermost integration variable, summed in index order
    let partial: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|first| {
            if weights[first] == 0.0 {
                return 0.0;
            }
            let mut idx = vec![0usize; free];
            idx[0] = first;
            let mut pts: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); free];
            pts.extend_from_slice(fixed);
            let mut sum = 0.0;
            loop {
                let mut weight = 1.0;
                for (s, &i) in idx.iter().enumerate() {
                    pts[s] = nodes[i];
                    weight *= weights[i];
                }
                if weight != 0.0 {
                    sum += weight * sq_vdm(&pts);
                }
                // odometer over idx[1..]
                let mut pos = free;
                loop {
                    if pos == 1 {
                        return sum;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < k {
                        break;
                    }
                    idx[pos] = 0;
                }
            }
        })
        .collect();
    partial.iter().sum()
}
