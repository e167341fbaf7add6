//! Level-n orthonormal polynomials for `w^{2n} dμ`, Christoffel functions and
//! Bernstein–Markov diagnostics.
//!
//! Two constructions are available. The general one factors the monomial Gram
//! matrix `G = L L*`; orthonormal coefficient rows are the rows of `L^{-1}` and
//! the monic norms are the diagonal of `L`. For measures on the real line the
//! discrete Stieltjes (Lanczos) procedure produces the three-term recurrence
//! directly, which stays accurate far beyond the degree where the monomial
//! Gram matrix is numerically singular.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::measures::{Domain, WeightedProblem};
use crate::scalar::{cplx, to_c64, Precision, Scalar};

/// Condition number above which a warning is logged.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// Stieltjes when every node is real, Cholesky otherwise.
    #[default]
    Auto,
    Cholesky,
    Stieltjes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BasisOptions {
    pub method: Construction,
    pub precision: Precision,
}

impl BasisOptions {
    pub fn cholesky(precision: Precision) -> Self {
        Self {
            method: Construction::Cholesky,
            precision,
        }
    }

    pub fn stieltjes() -> Self {
        Self {
            method: Construction::Stieltjes,
            precision: Precision::Double,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Evaluator {
    /// `b[k+1] q_{k+1} = (z - alpha[k]) q_k - b[k] q_{k-1}`, `q_0 = 1 / b[0]`.
    Recurrence {
        alpha: Vec<f64>,
        b: Vec<f64>,
    },
    Horner(Vec<Vec<Complex64>>),
    HornerExtended(Vec<Vec<Complex<TwoFloat>>>),
}

/// Orthonormal polynomials `q_0, ..., q_n` in `L^2(w^{2n} μ)`.
///
/// Indices are zero-based here: `q_j` has degree `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    level: usize,
    coeffs: Vec<Vec<Complex64>>,
    log_monic_norms: Vec<f64>,
    gram_condition: f64,
    method: Construction,
    eval: Evaluator,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthoBasisExport {
    pub level: usize,
    pub method: Construction,
    /// Row `j`: monomial coefficients `[re, im]` of `q_j`, constant term first.
    pub coefficients: Vec<Vec<[f64; 2]>>,
    pub monic_norms: Vec<f64>,
    pub log_monic_norms: Vec<f64>,
    pub gram_condition: f64,
}

impl OrthoBasis {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn method(&self) -> Construction {
        self.method
    }

    /// Row `j` holds the coefficients of `q_j`, constant term first.
    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    /// `log ||p_j||`, `j = 0..=n`.
    pub fn log_monic_norms(&self) -> &[f64] {
        &self.log_monic_norms
    }

    pub fn monic_norms(&self) -> Vec<f64> {
        self.log_monic_norms.iter().map(|l| l.exp()).collect()
    }

    /// `||G||_1 ||G^{-1}||_1` for the monomial Gram matrix.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    /// `q_0(z), ..., q_n(z)`.
    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        match &self.eval {
            Evaluator::Recurrence { alpha, b } => {
                let n = self.level;
                let mut q = Vec::with_capacity(n + 1);
                q.push(Complex64::new(1.0 / b[0], 0.0));
                for k in 0..n {
                    let mut next = (z - alpha[k]) * q[k];
                    if k > 0 {
                        next -= q[k - 1] * b[k];
                    }
                    q.push(next / b[k + 1]);
                }
                q
            }
            Evaluator::Horner(rows) => rows.iter().map(|r| horner(r, z)).collect(),
            Evaluator::HornerExtended(rows) => {
                let ze: Complex<TwoFloat> = cplx(z);
                rows.iter().map(|r| to_c64(horner(r, ze))).collect()
            }
        }
    }

    /// `K_n(z) = Σ_j |q_j(z)|^2`, summed in index order.
    pub fn christoffel_at(&self, z: Complex64) -> f64 {
        self.eval(z).iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn export(&self) -> OrthoBasisExport {
        OrthoBasisExport {
            level: self.level,
            method: self.method,
            coefficients: self
                .coeffs
                .iter()
                .map(|r| r.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
            monic_norms: self.monic_norms(),
            log_monic_norms: self.log_monic_norms.clone(),
            gram_condition: self.gram_condition,
        }
    }

    /// Builds the level-`n` basis for the discrete measure `Σ weights[k] δ_{nodes[k]}`,
    /// where the weights already include the factor `w^{2n}`.
    pub fn from_discrete_measure(
        nodes: &[Complex64],
        weights: &[f64],
        n: usize,
        opts: BasisOptions,
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Config("nodes and weights differ in length".into()));
        }
        let real = nodes.iter().all(|z| z.im == 0.0);
        let method = match opts.method {
            Construction::Auto if real => Construction::Stieltjes,
            Construction::Auto => Construction::Cholesky,
            m => m,
        };
        let basis = match method {
            Construction::Stieltjes => {
                if !real {
                    return Err(Error::Domain(
                        "Stieltjes construction needs nodes on the real line".into(),
                    ));
                }
                let xs: Vec<f64> = nodes.iter().map(|z| z.re).collect();
                stieltjes(&xs, weights, n)?
            }
            _ => match opts.precision {
                Precision::Double => cholesky_basis::<f64>(nodes, weights, n)?,
                Precision::Extended => cholesky_basis::<TwoFloat>(nodes, weights, n)?,
            },
        };
        if basis.gram_condition > CONDITION_WARNING {
            log::warn!(
                "level {n}: monomial Gram condition {:.3e} exceeds {:.0e}",
                basis.gram_condition,
                CONDITION_WARNING
            );
        }
        Ok(basis)
    }
}

fn horner<S: Scalar>(row: &[Complex<S>], z: Complex<S>) -> Complex<S> {
    let zero = Complex::new(S::zero(), S::zero());
    row.iter().rev().fold(zero, |acc, &c| acc * z + c)
}

/// Discrete measure `w^{2n} dμ` at level `n`.
pub fn level_measure(problem: &WeightedProblem, n: usize) -> (Vec<Complex64>, Vec<f64>) {
    (problem.measure.nodes().to_vec(), problem.level_weights(n))
}

/// `G[i][j] = ∫ z^i z̄^j w^{2n} dμ`, `i, j = 0..=n`, Hermitian by construction.
pub fn gram_matrix<S: Scalar>(problem: &WeightedProblem, n: usize) -> Result<CMatrix<S>> {
    problem.require_order_for(n)?;
    let (nodes, weights) = level_measure(problem, n);
    Ok(discrete_gram(&nodes, &weights, n))
}

pub(crate) fn discrete_gram<S: Scalar>(
    nodes: &[Complex64],
    weights: &[f64],
    n: usize,
) -> CMatrix<S> {
    let d = n + 1;
    let zero = Complex::new(S::zero(), S::zero());
    let mut acc = vec![zero; d * d];
    let mut pows = vec![zero; d];
    for (&z, &v) in nodes.iter().zip(weights) {
        if v == 0.0 {
            continue;
        }
        let zs: Complex<S> = cplx(z);
        pows[0] = Complex::new(S::one(), S::zero());
        for k in 1..d {
            pows[k] = pows[k - 1] * zs;
        }
        let vs = S::of(v);
        for i in 0..d {
            for j in i..d {
                let t = pows[i] * pows[j].conj();
                acc[i * d + j] = acc[i * d + j] + Complex::new(t.re * vs, t.im * vs);
            }
        }
    }
    CMatrix::from_fn(d, |i, j| {
        if i == j {
            Complex::new(acc[i * d + i].re, S::zero())
        } else if i < j {
            acc[i * d + j]
        } else {
            acc[j * d + i].conj()
        }
    })
}

/// Level-`n` orthonormal basis of a problem; enforces the `m >= 4(n+1)` rule.
pub fn orthonormal_basis(
    problem: &WeightedProblem,
    n: usize,
    opts: BasisOptions,
) -> Result<OrthoBasis> {
    problem.require_order_for(n)?;
    let (nodes, weights) = level_measure(problem, n);
    OrthoBasis::from_discrete_measure(&nodes, &weights, n, opts)
}

fn cholesky_basis<S: Scalar>(nodes: &[Complex64], weights: &[f64], n: usize) -> Result<OrthoBasis> {
    let g = discrete_gram::<S>(nodes, weights, n);
    let l = g.cholesky()?;
    let a = l.lower_inverse();
    let d = n + 1;
    let rows: Vec<Vec<Complex<S>>> = (0..d)
        .map(|j| (0..=j).map(|k| a.get(j, k)).collect())
        .collect();
    let log_monic_norms = (0..d).map(|k| l.get(k, k).re.ln_f64()).collect();
    let coeffs: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&c| to_c64(c)).collect())
        .collect();
    let gram_condition = g.norm1() * inverse_gram_norm1(&coeffs);
    let eval = if S::EPS < f64::EPSILON {
        Evaluator::HornerExtended(
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|c| {
                            let c = to_ext(c);
                            Complex::new(c.0, c.1)
                        })
                        .collect()
                })
                .collect(),
        )
    } else {
        Evaluator::Horner(coeffs.clone())
    };
    Ok(OrthoBasis {
        level: n,
        coeffs,
        log_monic_norms,
        gram_condition,
        method: Construction::Cholesky,
        eval,
    })
}

// Exact conversion of a working-precision value to double-double.
fn to_ext<S: Scalar>(c: &Complex<S>) -> (TwoFloat, TwoFloat) {
    let split = |x: S| {
        let hi = x.to_f64();
        let lo = (x - S::of(hi)).to_f64();
        TwoFloat::new_add(hi, lo)
    };
    (split(c.re), split(c.im))
}

/// `||G^{-1}||_1` with `G^{-1} = A* A`, `A` the coefficient matrix.
fn inverse_gram_norm1(coeffs: &[Vec<Complex64>]) -> f64 {
    let d = coeffs.len();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let mut col = 0.0;
        for i in 0..d {
            // (A* A)_{ij} = Σ_k conj(A_ki) A_kj, nonzero only for k >= max(i, j)
            let mut s = Complex64::new(0.0, 0.0);
            for k in i.max(j)..d {
                s += coeffs[k][i].conj() * coeffs[k][j];
            }
            col += s.norm();
        }
        worst = worst.max(col);
    }
    worst
}

/// Discrete Stieltjes procedure with full reorthogonalization.
fn stieltjes(xs: &[f64], weights: &[f64], n: usize) -> Result<OrthoBasis> {
    let m = xs.len();
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Degenerate {
            degree: 0,
            pivot: mass,
            threshold: 0.0,
        });
    }
    let scale = xs
        .iter()
        .fold(0.0f64, |s, x| s.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let threshold = (n.max(1) as f64) * f64::EPSILON * scale;
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b0 = mass.sqrt();
    let mut vecs: Vec<Vec<f64>> = vec![sw.iter().map(|s| s / b0).collect()];
    let mut alpha = Vec::with_capacity(n);
    let mut b = vec![b0];
    for k in 0..n {
        let v = &vecs[k];
        let a: f64 = (0..m).map(|i| xs[i] * v[i] * v[i]).sum();
        let mut u: Vec<f64> = (0..m).map(|i| (xs[i] - a) * v[i]).collect();
        if k > 0 {
            let bk = b[k];
            let prev = &vecs[k - 1];
            for i in 0..m {
                u[i] -= bk * prev[i];
            }
        }
        for _ in 0..2 {
            for p in &vecs {
                let d: f64 = (0..m).map(|i| u[i] * p[i]).sum();
                for i in 0..m {
                    u[i] -= d * p[i];
                }
            }
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > threshold) {
            return Err(Error::Degenerate {
                degree: k + 1,
                pivot: norm * norm,
                threshold: threshold * threshold,
            });
        }
        for x in &mut u {
            *x /= norm;
        }
        alpha.push(a);
        b.push(norm);
        vecs.push(u);
    }

    let mut log_monic_norms = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for bk in &b {
        acc += bk.ln();
        log_monic_norms.push(acc);
    }

    // coefficient rows from the recurrence, in double-double
    let zero = TwoFloat::from(0.0);
    let mut rows: Vec<Vec<TwoFloat>> = vec![vec![TwoFloat::from(1.0) / b0]];
    for k in 0..n {
        let mut next = vec![zero; k + 2];
        for (i, &c) in rows[k].iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * alpha[k];
        }
        if k > 0 {
            for (i, &c) in rows[k - 1].iter().enumerate() {
                next[i] -= c * b[k];
            }
        }
        for c in &mut next {
            *c /= b[k + 1];
        }
        rows.push(next);
    }
    let coeffs: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|c| Complex64::new(c.to_f64(), 0.0)).collect())
        .collect();
    let nodes: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let g = discrete_gram::<f64>(&nodes, weights, n);
    let gram_condition = g.norm1() * inverse_gram_norm1(&coeffs);
    Ok(OrthoBasis {
        level: n,
        coeffs,
        log_monic_norms,
        gram_condition,
        method: Construction::Stieltjes,
        eval: Evaluator::Recurrence { alpha, b },
    })
}

/// Values of `K_n` on a list of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChristoffelField {
    pub level: usize,
    pub points: Vec<Complex64>,
    pub values: Vec<f64>,
}

pub fn christoffel(basis: &OrthoBasis, points: &[Complex64]) -> ChristoffelField {
    let values = points
        .par_iter()
        .map(|&z| basis.christoffel_at(z))
        .collect();
    ChristoffelField {
        level: basis.level(),
        points: points.to_vec(),
        values,
    }
}

/// Computed density of `(1/(n+1)) K_n w^{2n} dμ` at a point against a reference
/// equilibrium density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongAsymptotic {
    pub computed: f64,
    pub reference: f64,
    pub relative_gap: f64,
}

/// Density of `μ` with respect to `dx` on intervals or normalized arc length on
/// circles, assuming the rule discretizes a uniform density (as the rules of
/// [`crate::measures::build_quadrature`] do).
pub fn uniform_density(problem: &WeightedProblem) -> Result<f64> {
    match problem.domain {
        Domain::IntervalUnion { .. } => Ok(problem.measure.total_mass() / problem.domain.size()),
        Domain::Circle { .. } => Ok(problem.measure.total_mass()),
        _ => Err(Error::Domain(
            "strong asymptotics need an interval union or a circle".into(),
        )),
    }
}

/// `(1/(n+1)) K_n(x) ρ_μ(x) w(x)^{2n}` compared with `reference` (the equilibrium
/// density at `x`). For circles `x` is a point on the circle and densities are
/// taken against normalized arc length.
pub fn strong_asymptotic_check(
    problem: &WeightedProblem,
    basis: &OrthoBasis,
    x: Complex64,
    reference: f64,
) -> Result<StrongAsymptotic> {
    let n = basis.level();
    match &problem.domain {
        Domain::IntervalUnion { intervals } => {
            let interior = x.im == 0.0 && intervals.iter().any(|&(a, b)| x.re > a && x.re < b);
            if !interior {
                return Err(Error::Domain(format!(
                    "{x} is not interior to the intervals"
                )));
            }
        }
        Domain::Circle { .. } => {
            if !problem.domain.contains(x, crate::measures::MEMBERSHIP_TOL) {
                return Err(Error::Domain(format!("{x} is not on the circle")));
            }
        }
        _ => {
            return Err(Error::Domain(
                "strong asymptotics need an interval union or a circle".into(),
            ))
        }
    }
    let rho = uniform_density(problem)?;
    let lw = problem.weight.log_eval(x);
    let k = basis.christoffel_at(x);
    let computed = k / (n + 1) as f64 * rho * (2.0 * n as f64 * lw).exp();
    Ok(StrongAsymptotic {
        computed,
        reference,
        relative_gap: (computed - reference).abs() / reference.abs(),
    })
}

/// Arcsine (equilibrium) density of `[a, b]` with respect to `dx`.
pub fn arcsine_density(a: f64, b: f64, x: f64) -> f64 {
    1.0 / (std::f64::consts::PI * ((x - a) * (b - x)).sqrt())
}

/// Grid for [`bm_constant`]: `20 n` equispaced points per interval or circle,
/// endpoints included (at least 21 points).
pub fn bm_grid(domain: &Domain, n: usize) -> Vec<Complex64> {
    let per = (20 * n).max(21);
    match domain {
        Domain::Disk { radius } => {
            // the maximum of a subharmonic quantity sits on the boundary
            Domain::Circle { radius: *radius }.sample_grid(per)
        }
        d => d.sample_grid(per),
    }
}

/// `M_n = max_grid w^{2n} K_n` with its location (smallest index on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmConstant {
    pub value: f64,
    pub argmax: Complex64,
    /// `M_n^{1/(2n)}`.
    pub root: f64,
}

pub fn bm_constant(
    basis: &OrthoBasis,
    problem: &WeightedProblem,
    grid: &[Complex64],
) -> Result<BmConstant> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty grid".into()));
    }
    let n = basis.level();
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|&z| {
            let lw = problem.weight.log_eval(z);
            if lw == f64::NEG_INFINITY {
                0.0
            } else {
                basis.christoffel_at(z) * (2.0 * n as f64 * lw).exp()
            }
        })
        .collect();
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[best] {
            best = i;
        }
    }
    let value = vals[best];
    let root = if n == 0 {
        value
    } else {
        value.powf(0.5 / n as f64)
    };
    Ok(BmConstant {
        value,
        argmax: grid[best],
        root,
    })
}

/// `max_{i,j} |∫ q_i q̄_j dν - δ_ij|` for the discrete measure `ν`.
pub fn orthonormality_residual(basis: &OrthoBasis, nodes: &[Complex64], weights: &[f64]) -> f64 {
    let d = basis.level() + 1;
    let vals: Vec<Vec<Complex64>> = nodes.par_iter().map(|&z| basis.eval(z)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut s = Complex64::new(0.0, 0.0);
            for (q, &v) in vals.iter().zip(weights) {
                s += q[i] * q[j].conj() * v;
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    worst
}
