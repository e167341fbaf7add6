//! Weighted logarithmic energy, the discretized equilibrium problem, weighted
//! Fekete points and the weighted transfinite diameter.
//!
//! The equilibrium measure is approximated by a piecewise-constant density on
//! uniform cells. The discrete energy uses exact cell averages of the
//! logarithmic kernel, so the quadratic form is a Galerkin discretization of
//! the continuous energy and the diagonal carries the `log(1/h) + 3/2`
//! self-energy.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{
    circle_node, weak_star_distance, Domain, QuadratureMeasure, WeakStarMode, Weight,
    PROBABILITY_TOL,
};
use crate::partition::log_weighted_vdm;
use crate::quadrature::gauss_legendre;

/// One grid cell of a one-dimensional support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub center: Complex64,
    /// Length (interval) or arc length (circle).
    pub width: f64,
    /// Arc-length coordinate of the center; the real part on intervals.
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Geometry {
    Line,
    Circle { radius: f64 },
}

/// Uniform cells covering an interval union (cells shared in proportion to
/// length) or a circle (first cell centered at angle 0).
pub fn cell_grid(domain: &Domain, cells: usize) -> Result<Vec<Cell>> {
    match domain {
        Domain::IntervalUnion { intervals } => {
            let total = domain.size();
            let mut out = Vec::with_capacity(cells);
            for &(a, b) in intervals {
                let k = ((cells as f64 * (b - a) / total).round() as usize).max(1);
                let h = (b - a) / k as f64;
                for i in 0..k {
                    let x = a + (i as f64 + 0.5) * h;
                    out.push(Cell {
                        center: Complex64::new(x, 0.0),
                        width: h,
                        position: x,
                    });
                }
            }
            Ok(out)
        }
        Domain::Circle { radius } => {
            let h = 2.0 * PI * radius / cells as f64;
            Ok((0..cells)
                .map(|k| Cell {
                    center: circle_node(*radius, k, cells),
                    width: h,
                    position: k as f64 * h,
                })
                .collect())
        }
        _ => Err(Error::Domain(
            "equilibrium problems are solved on interval unions and circles only".into(),
        )),
    }
}

fn geometry(domain: &Domain) -> Geometry {
    match domain {
        Domain::Circle { radius } => Geometry::Circle { radius: *radius },
        _ => Geometry::Line,
    }
}

// Second antiderivative of log|x|.
fn g2(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        0.5 * x * x * x.abs().ln() - 0.75 * x * x
    }
}

/// Mean of `log(1/|x - y|)` over `x ∈ [a, b]`, `y ∈ [c, d]`.
///
/// Closed form from the antiderivative of `log|x|`; well-separated cells use
/// the moment expansion instead, which avoids the cancellation of the closed
/// form (it loses about `(distance / width)^2` ulps).
pub fn cell_log_kernel(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (hx, hy) = (b - a, d - c);
    let dist = 0.5 * (c + d) - 0.5 * (a + b);
    if dist.abs() >= 8.0 * hx.max(hy) {
        // E[log 1/|D + u|] = -log|D| + Σ_m E[u^{2m}] / (2m D^{2m}), u = Y - X
        let even = |h: f64, k: usize| (0.5 * h).powi(k as i32) / (k + 1) as f64;
        let binom = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0, 0.0, 0.0],
            [1.0, 8.0, 28.0, 56.0, 70.0, 56.0, 28.0, 8.0, 1.0],
        ];
        let mut acc = -dist.abs().ln();
        for mm in 1..=4usize {
            let k = 2 * mm;
            let mut moment = 0.0;
            for j in 0..=mm {
                moment += binom[mm][2 * j] * even(hx, 2 * j) * even(hy, k - 2 * j);
            }
            acc += moment / (k as f64 * dist.powi(k as i32));
        }
        return acc;
    }
    let s = g2(b - c) - g2(a - c) - g2(b - d) + g2(a - d);
    -s / (hx * hy)
}

fn chord_correction(u: f64, radius: f64) -> f64 {
    let t = u.abs();
    if t < 1e-8 * radius {
        return 0.0;
    }
    (2.0 * radius * (t / (2.0 * radius)).sin() / t).ln()
}

/// Galerkin matrix of the logarithmic kernel on the cells.
fn kernel_matrix(cells: &[Cell], geo: Geometry) -> Vec<f64> {
    let m = cells.len();
    let (gx, gw) = gauss_legendre(3);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let ci = cells[i];
            (0..m)
                .map(|j| {
                    let cj = cells[j];
                    match geo {
                        Geometry::Line => {
                            let (a, b) =
                                (ci.position - 0.5 * ci.width, ci.position + 0.5 * ci.width);
                            let (c, d) =
                                (cj.position - 0.5 * cj.width, cj.position + 0.5 * cj.width);
                            cell_log_kernel(a, b, c, d)
                        }
                        Geometry::Circle { radius } => {
                            let period = 2.0 * PI * radius;
                            let mut dd = (cj.position - ci.position) % period;
                            if dd > 0.5 * period {
                                dd -= period;
                            } else if dd <= -0.5 * period {
                                dd += period;
                            }
                            let (hi, hj) = (ci.width, cj.width);
                            let base =
                                cell_log_kernel(-0.5 * hi, 0.5 * hi, dd - 0.5 * hj, dd + 0.5 * hj);
                            let mut corr = 0.0;
                            for (p, &wp) in gx.iter().zip(&gw) {
                                for (q, &wq) in gx.iter().zip(&gw) {
                                    let u = dd + 0.5 * hj * q - 0.5 * hi * p;
                                    corr += 0.25 * wp * wq * chord_correction(u, radius);
                                }
                            }
                            base - corr
                        }
                    }
                })
                .collect()
        })
        .collect();
    rows.concat()
}

fn matvec(k: &[f64], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let row = &k[i * m..(i + 1) * m];
            row.iter().zip(x).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Euclidean projection onto `{x >= 0, Σ x = 1}` restricted to `free` indices.
fn project_simplex(v: &[f64], free: &[bool]) -> Vec<f64> {
    let mut vals: Vec<f64> = v
        .iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|(x, _)| *x)
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, &u) in vals.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter()
        .zip(free)
        .map(|(&x, &f)| if f { (x - tau).max(0.0) } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub cells: usize,
    pub max_iter: usize,
    /// Tolerance on `||m - P(m - ∇f)||_∞`.
    pub tol: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            cells: 800,
            max_iter: 20_000,
            tol: 1e-10,
        }
    }
}

/// Discretized weighted equilibrium measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumMeasure {
    pub cells: Vec<Cell>,
    pub masses: Vec<f64>,
    /// Discrete weighted energy `I^w`.
    pub energy: f64,
    /// Indices of cells with mass above `1e-6 / M`.
    pub support: Vec<usize>,
    /// `exp(-energy)`.
    pub delta_w: f64,
    /// Weighted potential `U^μ + Q` at the cell centers.
    pub potential: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Objective after every accepted step.
    pub energy_trace: Vec<f64>,
}

impl EquilibriumMeasure {
    pub fn densities(&self) -> Vec<f64> {
        self.cells
            .iter()
            .zip(&self.masses)
            .map(|(c, m)| m / c.width)
            .collect()
    }

    pub fn as_measure(&self) -> Result<QuadratureMeasure> {
        QuadratureMeasure::new(
            self.cells.iter().map(|c| c.center).collect(),
            self.masses.clone(),
        )
    }

    /// Each cell split into `sub` equal atoms carrying its mass evenly, which
    /// resolves the piecewise-constant density for transport distances.
    pub fn refined_measure(&self, sub: usize) -> Result<QuadratureMeasure> {
        let sub = sub.max(1);
        let mut nodes = Vec::with_capacity(self.cells.len() * sub);
        let mut weights = Vec::with_capacity(self.cells.len() * sub);
        for (c, &m) in self.cells.iter().zip(&self.masses) {
            for k in 0..sub {
                let off = ((k as f64 + 0.5) / sub as f64 - 0.5) * c.width;
                nodes.push(if c.center.im == 0.0 && c.position == c.center.re {
                    Complex64::new(c.center.re + off, 0.0)
                } else {
                    let r = c.center.norm();
                    c.center * Complex64::from_polar(1.0, off / r)
                });
                weights.push(m / sub as f64);
            }
        }
        QuadratureMeasure::new(nodes, weights)
    }

    /// Density of the cell containing `x` (intervals) or `x`'s arc position (circles).
    pub fn density_at(&self, position: f64) -> Option<f64> {
        self.cells
            .iter()
            .zip(&self.masses)
            .find(|(c, _)| (position - c.position).abs() <= 0.5 * c.width)
            .map(|(c, m)| m / c.width)
    }

    /// Smallest and largest cell center in the support (real part).
    pub fn support_hull(&self) -> (f64, f64) {
        self.support
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let x = self.cells[i].center.re;
                (lo.min(x), hi.max(x))
            })
    }

    pub fn variational_residual(&self) -> VariationalResidual {
        let on: Vec<f64> = self.support.iter().map(|&i| self.potential[i]).collect();
        let lo = on.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let constant = on.iter().sum::<f64>() / on.len() as f64;
        let mut min_off = f64::INFINITY;
        for (i, &p) in self.potential.iter().enumerate() {
            if self.masses[i] <= self.support_threshold() && p.is_finite() {
                min_off = min_off.min(p - constant);
            }
        }
        VariationalResidual {
            constant,
            relative_spread: (hi - lo) / constant.abs().max(f64::MIN_POSITIVE),
            min_off_support_excess: min_off,
        }
    }

    fn support_threshold(&self) -> f64 {
        1e-6 / self.cells.len() as f64
    }
}

/// Constancy of `U^μ + Q` on the support and its lower bound off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalResidual {
    pub constant: f64,
    pub relative_spread: f64,
    /// `min (U + Q - constant)` off the support; `+inf` if the support is everything.
    pub min_off_support_excess: f64,
}

/// Minimizes the discretized weighted energy over the probability simplex.
pub fn equilibrium_solve(
    domain: &Domain,
    w: &Weight,
    opts: EquilibriumOptions,
) -> Result<EquilibriumMeasure> {
    if opts.cells < 100 {
        return Err(Error::Precondition(format!(
            "equilibrium grid needs at least 100 cells, got {}",
            opts.cells
        )));
    }
    let cells = cell_grid(domain, opts.cells)?;
    let geo = geometry(domain);
    let q: Vec<f64> = cells.iter().map(|c| -w.log_eval(c.center)).collect();
    let free: Vec<bool> = q.iter().map(|v| v.is_finite()).collect();
    let nfree = free.iter().filter(|&&f| f).count();
    if nfree == 0 {
        return Err(Error::DegenerateWeight);
    }
    let k = kernel_matrix(&cells, geo);
    let lin: Vec<f64> = q
        .iter()
        .map(|&v| if v.is_finite() { 2.0 * v } else { 0.0 })
        .collect();
    let solved = solve_simplex_qp(&k, &lin, &free, opts)?;
    let m = cells.len();
    let km = matvec(&k, &solved.x);
    let quad: f64 = km.iter().zip(&solved.x).map(|(a, b)| a * b).sum();
    let energy = quad + lin.iter().zip(&solved.x).map(|(a, b)| a * b).sum::<f64>();
    let potential: Vec<f64> = km.iter().zip(&q).map(|(u, q)| u + q).collect();
    let threshold = 1e-6 / m as f64;
    let support = (0..m).filter(|&i| solved.x[i] > threshold).collect();
    Ok(EquilibriumMeasure {
        cells,
        masses: solved.x,
        energy,
        support,
        delta_w: (-energy).exp(),
        potential,
        iterations: solved.iterations,
        residual: solved.residual,
        energy_trace: solved.trace,
    })
}

struct QpSolution {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
    trace: Vec<f64>,
}

fn objective(k: &[f64], lin: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let kx = matvec(k, x);
    let f = x
        .iter()
        .zip(&kx)
        .zip(lin)
        .map(|((xi, ki), li)| xi * (ki + li))
        .sum();
    let g = kx.iter().zip(lin).map(|(ki, li)| 2.0 * ki + li).collect();
    (f, g)
}

fn kkt_residual(x: &[f64], g: &[f64], free: &[bool]) -> f64 {
    let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = project_simplex(&trial, free);
    p.iter()
        .zip(x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Minimizer of `x'Kx + lin'x` over the simplex on the free coordinates:
/// spectral projected gradient with monotone Armijo backtracking, and an exact
/// Newton solve on the current face once the support settles.
fn solve_simplex_qp(
    k: &[f64],
    lin: &[f64],
    free: &[bool],
    opts: EquilibriumOptions,
) -> Result<QpSolution> {
    let m = lin.len();
    let nfree = free.iter().filter(|&&f| f).count() as f64;
    let mut x: Vec<f64> = free
        .iter()
        .map(|&f| if f { 1.0 / nfree } else { 0.0 })
        .collect();
    let (mut f, mut g) = objective(k, lin, &x);
    let mut trace = vec![f];
    let mut step = 1.0
        / k.iter()
            .step_by(m + 1)
            .fold(0.0f64, |a, &b| a.max(b.abs()))
            .max(1.0);
    let mut stable = 0usize;
    let mut last_support: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let mut residual = kkt_residual(&x, &g, free);
    for iter in 0..opts.max_iter {
        if residual <= opts.tol {
            return Ok(QpSolution {
                x,
                iterations: iter,
                residual,
                trace,
            });
        }

        if stable >= 5 {
            stable = 0;
            if let Some((xn, fnew, gn)) = face_newton(k, lin, &x, f) {
                x = xn;
                f = fnew;
                g = gn;
                trace.push(f);
                residual = kkt_residual(&x, &g, free);
                last_support = x.iter().map(|&v| v > 0.0).collect();
                continue;
            }
        }

        // projected gradient with backtracking along the projection arc
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
            let xn = project_simplex(&trial, free);
            let descent: f64 = g
                .iter()
                .zip(xn.iter().zip(&x))
                .map(|(gi, (a, b))| gi * (a - b))
                .sum();
            let (fnew, gn) = objective(k, lin, &xn);
            if fnew <= f + 1e-4 * descent {
                accepted = Some((xn, fnew, gn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            break;
        };
        // Barzilai–Borwein step for the next iteration
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            alpha * 2.0
        };
        x = xn;
        f = fnew;
        g = gn;
        trace.push(f);
        residual = kkt_residual(&x, &g, free);
        let support: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        if support == last_support {
            stable += 1;
        } else {
            stable = 0;
            last_support = support;
        }
    }
    if residual <= opts.tol {
        let iterations = trace.len() - 1;
        return Ok(QpSolution {
            x,
            iterations,
            residual,
            trace,
        });
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Exact minimizer of the objective on the face `{x_i = 0, i ∉ S}` of the
/// simplex, followed by a ratio test so the step stays feasible.
fn face_newton(k: &[f64], lin: &[f64], x: &[f64], f: f64) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let m = x.len();
    let s: Vec<usize> = (0..m).filter(|&i| x[i] > 0.0).collect();
    let d = s.len();
    let mut a = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut rhs = DVector::<f64>::zeros(d + 1);
    for (r, &i) in s.iter().enumerate() {
        for (c, &j) in s.iter().enumerate() {
            a[(r, c)] = 2.0 * k[i * m + j];
        }
        a[(r, d)] = 1.0;
        a[(d, r)] = 1.0;
        rhs[r] = -lin[i];
    }
    rhs[d] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let mut target = vec![0.0; m];
    for (r, &i) in s.iter().enumerate() {
        target[i] = sol[r];
    }
    // largest feasible step toward the face minimizer
    let mut t: f64 = 1.0;
    for &i in &s {
        if target[i] < 0.0 {
            t = t.min(x[i] / (x[i] - target[i]));
        }
    }
    let xn: Vec<f64> = (0..m)
        .map(|i| (x[i] + t * (target[i] - x[i])).max(0.0))
        .collect();
    let total: f64 = xn.iter().sum();
    let xn: Vec<f64> = xn.iter().map(|v| v / total).collect();
    let (fnew, gn) = objective(k, lin, &xn);
    (fnew <= f).then_some((xn, fnew, gn))
}

/// Energy of a probability measure on a one-dimensional grid: point kernel off
/// the diagonal, exact cell self-energy `log(1/h) + 3/2` on it.
pub fn continuous_energy(measure: &QuadratureMeasure, w: &Weight, widths: &[f64]) -> Result<f64> {
    if !measure.is_probability() {
        return Err(Error::Precondition(format!(
            "energy needs a probability measure (mass {})",
            measure.total_mass()
        )));
    }
    if widths.len() != measure.len() {
        return Err(Error::Config("one cell width per node required".into()));
    }
    let nodes = measure.nodes();
    let m = measure.weights();
    let lw: Vec<f64> = nodes.iter().map(|&z| w.log_eval(z)).collect();
    let rows: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..nodes.len() {
                let kern = if i == j {
                    (1.0 / widths[i]).ln() + 1.5
                } else {
                    -(nodes[i] - nodes[j]).norm().ln()
                };
                if m[i] * m[j] != 0.0 {
                    s += m[i] * m[j] * (kern - lw[i] - lw[j]);
                }
            }
            s
        })
        .collect();
    Ok(rows.iter().sum())
}

/// `(1/(n(n+1))) Σ_{k≠l} log 1/(|z_k - z_l| w(z_k) w(z_l))`.
pub fn discrete_energy(points: &[Complex64], w: &Weight) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Precondition(
            "discrete energy needs at least two points".into(),
        ));
    }
    let n = points.len() - 1;
    let lv = log_weighted_vdm(points, w, n);
    if !lv.is_finite() {
        return Err(Error::Precondition(
            "coincident points or zero weight in discrete energy".into(),
        ));
    }
    Ok(-2.0 * lv / (n * (n + 1)) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeketeConfiguration {
    pub level: usize,
    pub points: Vec<Complex64>,
    pub log_wvdm: f64,
    /// `weighted_vdm^{2/n^2}`; absent at `n = 0`.
    pub diameter_estimate: Option<f64>,
    pub sweeps: usize,
}

/// Search grid with `per_component` nodes per interval (endpoints included),
/// per circle (from angle 0), and for a disk on its boundary plus three inner
/// rings and the center; a point cloud is its own grid.
pub fn fekete_grid(domain: &Domain, per_component: usize) -> Result<Vec<Complex64>> {
    match domain {
        Domain::Disk { radius } => {
            let mut g = Domain::Circle { radius: *radius }.sample_grid(per_component);
            for ring in 1..4 {
                let r = radius * ring as f64 / 4.0;
                let k = (per_component * ring / 4).max(3);
                g.extend((0..k).map(|i| circle_node(r, i, k)));
            }
            g.push(Complex64::new(0.0, 0.0));
            Ok(g)
        }
        Domain::RealLine => Err(Error::Domain("Fekete search needs a bounded domain".into())),
        d => Ok(d.sample_grid(per_component)),
    }
}

/// Leja seeding followed by coordinate-exchange sweeps over `grid`.
pub fn fekete_search(
    grid: &[Complex64],
    w: &Weight,
    n: usize,
    max_sweeps: usize,
) -> Result<FeketeConfiguration> {
    let lw: Vec<f64> = grid.iter().map(|&z| w.log_eval(z)).collect();
    let usable = lw.iter().filter(|v| v.is_finite()).count();
    if usable < n + 1 {
        return Err(Error::Precondition(format!(
            "{usable} grid nodes with w > 0, need {}",
            n + 1
        )));
    }
    let nf = n as f64;
    let m = grid.len();

    // Leja: score[g] = Σ_chosen log|g - p| + n log w(g)
    let mut first = 0;
    for i in 0..m {
        if lw[i] > lw[first] {
            first = i;
        }
    }
    let mut chosen = vec![first];
    let mut pot = vec![0.0; m];
    for _ in 0..n {
        let last = grid[*chosen.last().unwrap()];
        for (i, p) in pot.iter_mut().enumerate() {
            *p += (grid[i] - last).norm().ln();
        }
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..m {
            let s = pot[i] + nf * lw[i];
            if s > best_score {
                best_score = s;
                best = i;
            }
        }
        chosen.push(best);
    }

    // exchange sweeps in ascending point index; the potential of the current
    // configuration is rebuilt after every move (occupied nodes sit at -inf)
    let potential = |chosen: &[usize]| -> Vec<f64> {
        let mut pot = vec![0.0; m];
        for &c in chosen {
            for (i, p) in pot.iter_mut().enumerate() {
                *p += (grid[i] - grid[c]).norm().ln();
            }
        }
        pot
    };
    let mut sweeps = 0;
    let mut pot = potential(&chosen);
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = false;
        for k in 0..chosen.len() {
            let cur = chosen[k];
            let others = |i: usize| -> f64 {
                if i == cur {
                    // remove the self term log 0 by direct summation
                    chosen
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != k)
                        .map(|(_, &c)| (grid[i] - grid[c]).norm().ln())
                        .sum()
                } else {
                    pot[i] - (grid[i] - grid[cur]).norm().ln()
                }
            };
            let current = others(cur) + nf * lw[cur];
            let mut best = cur;
            let mut best_score = current;
            for i in 0..m {
                if i == cur || pot[i] == f64::NEG_INFINITY {
                    continue;
                }
                let s = others(i) + nf * lw[i];
                if s > best_score + 1e-12 * best_score.abs().max(1.0) {
                    best_score = s;
                    best = i;
                }
            }
            if best != cur {
                chosen[k] = best;
                pot = potential(&chosen);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let points: Vec<Complex64> = chosen.iter().map(|&i| grid[i]).collect();
    let log_wvdm = log_weighted_vdm(&points, w, n);
    Ok(FeketeConfiguration {
        level: n,
        points,
        log_wvdm,
        diameter_estimate: (n > 0).then(|| (2.0 * log_wvdm / (n * n) as f64).exp()),
        sweeps,
    })
}

/// Per-level Fekete estimates, extrapolation in `n`, and the energy-route value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransfiniteDiameter {
    pub levels: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Constant term of a least-squares fit on `{1, 1/n, log(n)/n}` (or
    /// `{1, 1/n}` with two levels).
    pub extrapolated: Option<f64>,
    pub energy_route: Option<f64>,
    /// `|extrapolated - energy_route| / energy_route`.
    pub relative_gap: Option<f64>,
    pub configurations: Vec<FeketeConfiguration>,
}

pub fn transfinite_diameter(
    domain: &Domain,
    w: &Weight,
    levels: &[usize],
    grid_factor: usize,
    equilibrium: Option<&EquilibriumMeasure>,
) -> Result<TransfiniteDiameter> {
    if levels.is_empty() || levels.windows(2).any(|p| p[1] <= p[0]) || levels[0] == 0 {
        return Err(Error::Precondition(
            "levels must be positive and increasing".into(),
        ));
    }
    let configurations = levels
        .par_iter()
        .map(|&n| {
            let grid = fekete_grid(domain, grid_factor * (n + 1))?;
            fekete_search(&grid, w, n, 1000)
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates: Vec<f64> = configurations
        .iter()
        .map(|c| c.diameter_estimate.unwrap())
        .collect();
    let extrapolated = extrapolate(levels, &estimates);
    let energy_route = equilibrium.map(|e| e.delta_w);
    let relative_gap = match (extrapolated, energy_route) {
        (Some(x), Some(e)) => Some((x - e).abs() / e),
        _ => None,
    };
    Ok(TransfiniteDiameter {
        levels: levels.to_vec(),
        estimates,
        extrapolated,
        energy_route,
        relative_gap,
        configurations,
    })
}

/// Least-squares limit of `values` as `n → ∞`.
pub fn extrapolate(levels: &[usize], values: &[f64]) -> Option<f64> {
    let k = levels.len();
    let cols = match k {
        0 | 1 => return None,
        2 => 2,
        _ => 3,
    };
    let a = DMatrix::from_fn(k, cols, |i, j| {
        let n = levels[i] as f64;
        match j {
            0 => 1.0,
            1 => 1.0 / n,
            _ => n.ln() / n,
        }
    });
    let b = DVector::from_column_slice(values);
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some(sol[0])
}

/// Weak-* distance between Fekete empirical measures and the equilibrium measure.
pub fn fekete_empirical_convergence(
    domain: &Domain,
    w: &Weight,
    levels: &[usize],
    grid_factor: usize,
    equilibrium: &EquilibriumMeasure,
) -> Result<Vec<(usize, f64)>> {
    let mode = match domain {
        Domain::IntervalUnion { .. } => WeakStarMode::Wasserstein1Line,
        Domain::Circle { .. } => WeakStarMode::Wasserstein1Angle,
        _ => {
            return Err(Error::Domain(
                "empirical convergence needs a 1-D domain".into(),
            ))
        }
    };
    let target = equilibrium.as_measure()?;
    if (target.total_mass() - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::Numeric("equilibrium masses do not sum to 1".into()));
    }
    levels
        .par_iter()
        .map(|&n| {
            let grid = fekete_grid(domain, grid_factor * (n + 1))?;
            let f = fekete_search(&grid, w, n, 1000)?;
            let emp = QuadratureMeasure::empirical(f.points)?;
            Ok((n, weak_star_distance(&emp, &target, mode)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn self_energy_constant() {
        for h in [1e-3, 0.1, 2.0] {
            assert!((cell_log_kernel(0.0, h, 0.0, h) - ((1.0 / h).ln() + 1.5)).abs() < 1e-12);
        }
        // far cells approach the point kernel; the closed form loses about
        // (distance / width)^2 ulps to cancellation
        // mean of log(1/|d + u|) with Var u = h^2/6 is -log d + h^2/(12 d^2) + O(h^4)
        let (h, d) = (1e-2, 10.0f64);
        let v = cell_log_kernel(0.0, h, d, d + h);
        assert!((v + d.ln() - h * h / (12.0 * d * d)).abs() < 1e-11);
        // the two formulas agree where they meet
        for ratio in [7.999, 8.0] {
            let (hx, hy) = (0.3, 0.2);
            let off = ratio * hx;
            let a = cell_log_kernel(
                0.0,
                hx,
                0.5 * hx + off - 0.5 * hy,
                0.5 * hx + off + 0.5 * hy,
            );
            let dd = 0.5 * hx + off;
            let s = g2(hx - (dd - 0.5 * hy)) - g2(-(dd - 0.5 * hy)) - g2(hx - (dd + 0.5 * hy))
                + g2(-(dd + 0.5 * hy));
            assert!((a + s / (hx * hy)).abs() < 1e-12, "{ratio}");
        }
    }

    #[test]
    fn discrete_energy_examples() {
        let e = discrete_energy(&[c(-1.0, 0.0), c(1.0, 0.0)], &Weight::Unit).unwrap();
        assert!((e + 2f64.ln()).abs() < 1e-15);
        let roots = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let e = discrete_energy(&roots, &Weight::Unit).unwrap();
        assert!((e + 16f64.ln() / 6.0).abs() < 1e-15);
        assert!(discrete_energy(&[c(0.0, 0.0), c(0.0, 0.0)], &Weight::Unit).is_err());
        assert!(discrete_energy(&[c(0.0, 0.0)], &Weight::Unit).is_err());
    }

    #[test]
    fn continuous_energy_of_arcsine_and_circle() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let cells = cell_grid(&d, 2000).unwrap();
        let masses: Vec<f64> = cells
            .iter()
            .map(|c| {
                let (a, b) = (c.position - 0.5 * c.width, c.position + 0.5 * c.width);
                (b.clamp(-1.0, 1.0).asin() - a.clamp(-1.0, 1.0).asin()) / PI
            })
            .collect();
        let m = QuadratureMeasure::new(cells.iter().map(|c| c.center).collect(), masses).unwrap();
        let widths: Vec<f64> = cells.iter().map(|c| c.width).collect();
        let e = continuous_energy(&m, &Weight::Unit, &widths).unwrap();
        assert!((e - 2f64.ln()).abs() <= 0.01 * 2f64.ln(), "{e}");

        let cells = cell_grid(&Domain::circle(1.0).unwrap(), 2000).unwrap();
        let m = QuadratureMeasure::empirical(cells.iter().map(|c| c.center).collect()).unwrap();
        let widths: Vec<f64> = cells.iter().map(|c| c.width).collect();
        let e = continuous_energy(&m, &Weight::Unit, &widths).unwrap();
        assert!(e.abs() <= 0.01, "{e}");

        let heavy = QuadratureMeasure::new(vec![c(0.0, 0.0)], vec![2.0]).unwrap();
        assert!(continuous_energy(&heavy, &Weight::Unit, &[1.0]).is_err());
    }

    #[test]
    fn point_mass_energy_grows_under_refinement() {
        let mut last = f64::NEG_INFINITY;
        for h in [1e-1, 1e-2, 1e-3, 1e-4] {
            let m = QuadratureMeasure::new(vec![c(0.0, 0.0)], vec![1.0]).unwrap();
            let e = continuous_energy(&m, &Weight::Unit, &[h]).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn interval_equilibrium_is_arcsine() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let eq = equilibrium_solve(&d, &Weight::Unit, EquilibriumOptions::default()).unwrap();
        let total: f64 = eq.masses.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((eq.delta_w - 0.5).abs() <= 0.005, "{}", eq.delta_w);
        for (cell, dens) in eq.cells.iter().zip(eq.densities()) {
            let x = cell.position;
            if x.abs() <= 0.9 {
                let exact = 1.0 / (PI * (1.0 - x * x).sqrt());
                assert!((dens / exact - 1.0).abs() <= 0.03, "x={x}");
            }
        }
        let r = eq.variational_residual();
        assert!(r.relative_spread <= 0.02);
        assert!(eq.energy_trace.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn circle_equilibrium_is_uniform() {
        let d = Domain::circle(1.0).unwrap();
        let eq = equilibrium_solve(
            &d,
            &Weight::Unit,
            EquilibriumOptions {
                cells: 400,
                ..Default::default()
            },
        )
        .unwrap();
        for &m in &eq.masses {
            assert!((m * 400.0 - 1.0).abs() < 1e-6);
        }
        assert!((eq.delta_w - 1.0).abs() <= 0.01);
    }

    #[test]
    fn gaussian_equilibrium_is_semicircle() {
        let d = Domain::interval(-3.0, 3.0).unwrap();
        let eq = equilibrium_solve(
            &d,
            &Weight::gaussian(),
            EquilibriumOptions {
                cells: 1200,
                ..Default::default()
            },
        )
        .unwrap();
        let (lo, hi) = eq.support_hull();
        assert!(
            (lo + 1.0).abs() < 0.02 && (hi - 1.0).abs() < 0.02,
            "{lo} {hi}"
        );
        for (cell, dens) in eq.cells.iter().zip(eq.densities()) {
            let x = cell.position;
            if x.abs() <= 0.8 {
                let exact = 2.0 / PI * (1.0 - x * x).sqrt();
                assert!((dens / exact - 1.0).abs() <= 0.05, "x={x}");
            }
        }
        let r = eq.variational_residual();
        assert!(r.relative_spread <= 0.02);
        assert!(r.min_off_support_excess >= -1e-8);
        assert!(eq.energy_trace.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        // I^w = log 2 + 3/4 for Q = x^2
        assert!((eq.energy - (2f64.ln() + 0.75)).abs() < 0.005);
    }

    #[test]
    fn solver_errors() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        assert!(equilibrium_solve(
            &d,
            &Weight::Unit,
            EquilibriumOptions {
                cells: 50,
                ..Default::default()
            }
        )
        .is_err());
        let zero = Weight::tabulated(vec![c(0.0, 0.0)], vec![0.0]).unwrap();
        assert!(matches!(
            equilibrium_solve(&d, &zero, EquilibriumOptions::default()),
            Err(Error::DegenerateWeight)
        ));
        assert!(matches!(
            equilibrium_solve(
                &Domain::disk(1.0).unwrap(),
                &Weight::Unit,
                EquilibriumOptions::default()
            ),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            equilibrium_solve(
                &d,
                &Weight::gaussian(),
                EquilibriumOptions {
                    max_iter: 1,
                    tol: 1e-14,
                    ..Default::default()
                }
            ),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn fekete_small_cases() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let f = fekete_search(&fekete_grid(&d, 80).unwrap(), &Weight::Unit, 1, 100).unwrap();
        let mut pts: Vec<f64> = f.points.iter().map(|z| z.re).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, vec![-1.0, 1.0]);

        let grid = fekete_grid(&d, 201).unwrap();
        let f = fekete_search(&grid, &Weight::Unit, 2, 100).unwrap();
        let mut pts: Vec<f64> = f.points.iter().map(|z| z.re).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, vec![-1.0, 0.0, 1.0]);
        // brute force over the 201-point grid cubed
        let mut best = f64::NEG_INFINITY;
        for i in 0..201 {
            for j in (i + 1)..201 {
                for k in (j + 1)..201 {
                    let v = log_weighted_vdm(&[grid[i], grid[j], grid[k]], &Weight::Unit, 2);
                    best = best.max(v);
                }
            }
        }
        assert!((f.log_wvdm - best).abs() < 1e-14);

        let cgrid = fekete_grid(&Domain::circle(1.0).unwrap(), 160).unwrap();
        let f = fekete_search(&cgrid, &Weight::Unit, 3, 100).unwrap();
        assert!((f.log_wvdm - 16f64.ln()).abs() < 1e-12);
        let mut ang: Vec<f64> = f
            .points
            .iter()
            .map(|z| z.im.atan2(z.re).rem_euclid(2.0 * PI))
            .collect();
        ang.sort_by(f64::total_cmp);
        for p in ang.windows(2) {
            assert!((p[1] - p[0] - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fekete_errors_and_exchange_optimality() {
        let zero = Weight::tabulated(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![1.0, 0.0]).unwrap();
        let grid: Vec<Complex64> = (0..10).map(|i| c(i as f64 / 9.0, 0.0)).collect();
        assert!(fekete_search(&grid, &zero, 5, 10).is_err());

        let w = Weight::field(vec![0.0, 0.3, 1.0]);
        let d = Domain::interval(-2.0, 2.0).unwrap();
        let grid = fekete_grid(&d, 40 * 6).unwrap();
        let f = fekete_search(&grid, &w, 5, 1000).unwrap();
        let idx: Vec<usize> = f
            .points
            .iter()
            .map(|p| grid.iter().position(|g| g == p).unwrap())
            .collect();
        for k in 0..idx.len() {
            for g in 0..grid.len() {
                let mut pts = f.points.clone();
                pts[k] = grid[g];
                assert!(
                    log_weighted_vdm(&pts, &w, 5) <= f.log_wvdm + 1e-12,
                    "k={k} g={g}"
                );
            }
        }
        let _ = idx;
    }

    #[test]
    fn extrapolation_recovers_limit() {
        let levels = [10usize, 20, 30, 40];
        let vals: Vec<f64> = levels
            .iter()
            .map(|&n| {
                let n = n as f64;
                0.5 + 0.3 / n + 0.7 * n.ln() / n
            })
            .collect();
        assert!((extrapolate(&levels, &vals).unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(extrapolate(&[3], &[1.0]), None);
    }

    #[test]
    fn fekete_regression_at_n1() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let eq = equilibrium_solve(&d, &Weight::Unit, EquilibriumOptions::default()).unwrap();
        let dist = fekete_empirical_convergence(&d, &Weight::Unit, &[1], 40, &eq).unwrap();
        // W1((δ_{-1}+δ_1)/2, arcsine) = 1 - 2/π
        assert!((dist[0].1 - (1.0 - 2.0 / PI)).abs() < 1e-3, "{}", dist[0].1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_vdm_identity(raw in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 2..12)) {
            let pts: Vec<Complex64> = raw.iter().map(|r| c(r.0, r.1)).collect();
            let w = Weight::field(vec![0.1, 0.0, 0.5]);
            let n = pts.len() - 1;
            let e = discrete_energy(&pts, &w).unwrap();
            let lv = log_weighted_vdm(&pts, &w, n);
            prop_assert!((e + 2.0 * lv / (n * (n + 1)) as f64).abs() <= 1e-12 * e.abs().max(1.0));
        }

        #[test]
        fn projection_stays_on_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let free = vec![true; v.len()];
            let p = project_simplex(&v, &free);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
