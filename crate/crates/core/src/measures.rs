//! Planar domains, admissible weights, and measures represented as finite
//! quadrature rules.
//!
//! Every integral against a measure is a finite sum over the rule's nodes,
//! accumulated in index order so results are bit-reproducible.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Tolerance for "node lies in the domain".
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Tolerance on total mass for a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// A closed subset of the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Domain {
    /// Pairwise disjoint real intervals, sorted ascending.
    IntervalUnion {
        intervals: Vec<(f64, f64)>,
    },
    Circle {
        radius: f64,
    },
    Disk {
        radius: f64,
    },
    PointCloud {
        points: Vec<Complex64>,
    },
    /// The whole real line (unbounded; used with decaying weights only).
    RealLine,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::interval_union(vec![(a, b)])
    }

    pub fn interval_union(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let d = Domain::IntervalUnion { intervals };
        d.validate()?;
        Ok(d)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        let d = Domain::Circle { radius };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        let d = Domain::Disk { radius };
        d.validate()?;
        Ok(d)
    }

    pub fn point_cloud(points: Vec<Complex64>) -> Result<Self> {
        let d = Domain::PointCloud { points };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::IntervalUnion { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::Config("interval union is empty".into()));
                }
                for &(a, b) in intervals {
                    if !(a.is_finite() && b.is_finite() && b > a) {
                        return Err(Error::Config(format!("degenerate interval [{a}, {b}]")));
                    }
                }
                for w in intervals.windows(2) {
                    if w[1].0 <= w[0].1 {
                        return Err(Error::Config(format!(
                            "intervals [{}, {}] and [{}, {}] overlap or are unsorted",
                            w[0].0, w[0].1, w[1].0, w[1].1
                        )));
                    }
                }
            }
            Domain::Circle { radius } | Domain::Disk { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!(
                        "radius must be positive, got {radius}"
                    )));
                }
            }
            Domain::PointCloud { points } => {
                if points.is_empty() {
                    return Err(Error::Config("point cloud is empty".into()));
                }
                if points
                    .iter()
                    .any(|z| !(z.re.is_finite() && z.im.is_finite()))
                {
                    return Err(Error::Config("point cloud has a non-finite point".into()));
                }
            }
            Domain::RealLine => {}
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            Domain::IntervalUnion { intervals } => BoundingBox {
                re_min: intervals[0].0,
                re_max: intervals[intervals.len() - 1].1,
                im_min: 0.0,
                im_max: 0.0,
            },
            Domain::Circle { radius } | Domain::Disk { radius } => BoundingBox {
                re_min: -radius,
                re_max: *radius,
                im_min: -radius,
                im_max: *radius,
            },
            Domain::PointCloud { points } => points.iter().fold(
                BoundingBox {
                    re_min: f64::INFINITY,
                    re_max: f64::NEG_INFINITY,
                    im_min: f64::INFINITY,
                    im_max: f64::NEG_INFINITY,
                },
                |b, z| BoundingBox {
                    re_min: b.re_min.min(z.re),
                    re_max: b.re_max.max(z.re),
                    im_min: b.im_min.min(z.im),
                    im_max: b.im_max.max(z.im),
                },
            ),
            Domain::RealLine => BoundingBox {
                re_min: f64::NEG_INFINITY,
                re_max: f64::INFINITY,
                im_min: 0.0,
                im_max: 0.0,
            },
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::RealLine)
    }

    /// True for subsets of the real line.
    pub fn is_real(&self) -> bool {
        matches!(self, Domain::IntervalUnion { .. } | Domain::RealLine)
    }

    /// Whether `z` lies within `tol` of the set.
    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        match self {
            Domain::IntervalUnion { intervals } => {
                z.im.abs() <= tol
                    && intervals
                        .iter()
                        .any(|&(a, b)| z.re >= a - tol && z.re <= b + tol)
            }
            Domain::Circle { radius } => (z.norm() - radius).abs() <= tol * radius.max(1.0),
            Domain::Disk { radius } => z.norm() <= radius + tol * radius.max(1.0),
            Domain::PointCloud { points } => points.iter().any(|p| (p - z).norm() <= tol),
            Domain::RealLine => z.im.abs() <= tol,
        }
    }

    /// Lebesgue length, arc length, area, or point count.
    pub fn size(&self) -> f64 {
        match self {
            Domain::IntervalUnion { intervals } => intervals.iter().map(|(a, b)| b - a).sum(),
            Domain::Circle { radius } => 2.0 * PI * radius,
            Domain::Disk { radius } => PI * radius * radius,
            Domain::PointCloud { points } => points.len() as f64,
            Domain::RealLine => f64::INFINITY,
        }
    }

    /// Equispaced sample grid with `per_component` points per interval (endpoints
    /// included) or per circle; the disk uses its boundary circle.
    pub fn sample_grid(&self, per_component: usize) -> Vec<Complex64> {
        let k = per_component.max(2);
        match self {
            Domain::IntervalUnion { intervals } => intervals
                .iter()
                .flat_map(|&(a, b)| {
                    (0..k)
                        .map(move |i| Complex64::new(a + (b - a) * i as f64 / (k - 1) as f64, 0.0))
                })
                .collect(),
            Domain::Circle { radius } | Domain::Disk { radius } => (0..k)
                .map(|i| Complex64::from_polar(*radius, 2.0 * PI * i as f64 / k as f64))
                .collect(),
            Domain::PointCloud { points } => points.clone(),
            Domain::RealLine => Vec::new(),
        }
    }
}

/// Argument of a polynomial external field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldArgument {
    /// `Q(Re z)`.
    #[default]
    Re,
    /// `Q(|z|)`.
    Abs,
}

/// Nonnegative upper semicontinuous weight `w` on a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Weight {
    Unit,
    /// `w = exp(-Q)` with `Q(s) = sum coeffs[k] s^k`.
    PolynomialField {
        coeffs: Vec<f64>,
        #[serde(default)]
        argument: FieldArgument,
    },
    /// Grid values; evaluation takes the value at the nearest node.
    Tabulated {
        nodes: Vec<Complex64>,
        values: Vec<f64>,
    },
}

impl Weight {
    pub fn field(coeffs: Vec<f64>) -> Self {
        Weight::PolynomialField {
            coeffs,
            argument: FieldArgument::Re,
        }
    }

    /// `w(x) = exp(-x^2)`.
    pub fn gaussian() -> Self {
        Self::field(vec![0.0, 0.0, 1.0])
    }

    pub fn tabulated(nodes: Vec<Complex64>, values: Vec<f64>) -> Result<Self> {
        let w = Weight::Tabulated { nodes, values };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Unit => Ok(()),
            Weight::PolynomialField { coeffs, .. } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("non-finite field coefficient".into()));
                }
                Ok(())
            }
            Weight::Tabulated { nodes, values } => {
                if nodes.is_empty() || nodes.len() != values.len() {
                    return Err(Error::Config(
                        "tabulated weight needs equally many nodes and values".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Config("tabulated weight values must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Weight::Unit)
    }

    /// `Q(z) = -log w(z)`; `+inf` where `w` vanishes.
    pub fn field_value(&self, z: Complex64) -> f64 {
        -self.log_eval(z)
    }

    /// `log w(z)`, `-inf` where `w` vanishes.
    pub fn log_eval(&self, z: Complex64) -> f64 {
        match self {
            Weight::Unit => 0.0,
            Weight::PolynomialField { coeffs, argument } => {
                let s = match argument {
                    FieldArgument::Re => z.re,
                    FieldArgument::Abs => z.norm(),
                };
                -coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
            }
            Weight::Tabulated { nodes, values } => {
                let v = values[nearest_index(nodes, z)];
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Leading coefficient and degree of `Q`, ignoring trailing zeros.
    pub fn field_degree(&self) -> Option<(usize, f64)> {
        match self {
            Weight::PolynomialField { coeffs, .. } => coeffs
                .iter()
                .enumerate()
                .rev()
                .find(|(_, c)| **c != 0.0)
                .map(|(k, &c)| (k, c)),
            _ => None,
        }
    }
}

fn nearest_index(nodes: &[Complex64], z: Complex64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, p) in nodes.iter().enumerate() {
        let d = (p - z).norm_sqr();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// `w(z) >= 0`.
pub fn eval_weight(w: &Weight, z: Complex64) -> f64 {
    w.log_eval(z).exp()
}

/// Maximum of `|x| w(x)` over `[radius, 2 radius]` for a doubling sequence of radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrend {
    pub radii: Vec<f64>,
    pub maxima: Vec<f64>,
    /// Location and value of the overall maximum of `|x| w(x)`.
    pub argmax: f64,
    pub max: f64,
    pub decaying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub nonnegative: bool,
    /// Fraction of the sample grid where `w > 0`.
    pub positive_fraction: f64,
    /// Estimated linear (or area) measure of `{w > 0}`; for the real line the
    /// estimate refers to the sampled window.
    pub positivity_measure: f64,
    pub decay: Option<DecayTrend>,
}

/// Heuristic admissibility check: nonnegativity, positive-measure positivity
/// set, and `|z| w(z) -> 0` on unbounded domains.
pub fn check_admissible(w: &Weight, domain: &Domain) -> Result<AdmissibilityReport> {
    w.validate()?;
    domain.validate()?;
    const SAMPLES: usize = 1001;
    let (grid, window): (Vec<Complex64>, f64) = match domain {
        Domain::RealLine => {
            let r = 64.0;
            let k = 4 * SAMPLES;
            (
                (0..k)
                    .map(|i| Complex64::new(-r + 2.0 * r * i as f64 / (k - 1) as f64, 0.0))
                    .collect(),
                2.0 * r,
            )
        }
        Domain::Disk { radius } => {
            let mut g = Vec::new();
            for ring in 1..=32 {
                let rho = radius * ring as f64 / 32.0;
                for t in 0..64 {
                    g.push(Complex64::from_polar(rho, 2.0 * PI * t as f64 / 64.0));
                }
            }
            g.push(Complex64::new(0.0, 0.0));
            (g, domain.size())
        }
        _ => (domain.sample_grid(SAMPLES), domain.size()),
    };
    let values: Vec<f64> = grid.iter().map(|&z| eval_weight(w, z)).collect();
    let nonnegative = values.iter().all(|&v| v >= 0.0);
    let positive = values.iter().filter(|&&v| v > 0.0).count();
    let positive_fraction = positive as f64 / values.len() as f64;
    if !nonnegative {
        return Err(Error::Admissibility("weight takes negative values".into()));
    }
    if positive == 0 {
        return Err(Error::Admissibility(
            "positivity set {w > 0} is empty".into(),
        ));
    }

    let decay = if domain.is_bounded() {
        None
    } else {
        if let Some((deg, lead)) = w.field_degree() {
            if deg % 2 == 1 || lead <= 0.0 {
                return Err(Error::Admissibility(format!(
                    "field on the real line needs even degree and positive leading coefficient (degree {deg}, leading {lead})"
                )));
            }
        }
        let trend = decay_trend(w);
        if !trend.decaying {
            return Err(Error::Admissibility(format!(
                "|x| w(x) does not decay: annulus maxima {:?}",
                trend.maxima
            )));
        }
        Some(trend)
    };

    Ok(AdmissibilityReport {
        nonnegative,
        positive_fraction,
        positivity_measure: positive_fraction * window,
        decay,
    })
}

fn decay_trend(w: &Weight) -> DecayTrend {
    let g = |x: f64| {
        let z = Complex64::new(x, 0.0);
        x.abs() * eval_weight(w, z)
    };
    // global maximum on [-1024, 1024], refined around the best sample
    let k = 1 << 16;
    let r = 1024.0;
    let mut argmax = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut step = 2.0 * r / k as f64;
    for i in 0..=k {
        let x = -r + step * i as f64;
        let v = g(x);
        if v > max {
            max = v;
            argmax = x;
        }
    }
    for _ in 0..60 {
        step *= 0.5;
        for x in [argmax - step, argmax + step] {
            let v = g(x);
            if v > max {
                max = v;
                argmax = x;
            }
        }
    }
    let mut radii = Vec::new();
    let mut maxima = Vec::new();
    let mut rad = 1.0;
    while rad <= 512.0 {
        let m = (0..=256)
            .flat_map(|i| {
                let x = rad * (1.0 + i as f64 / 256.0);
                [g(x), g(-x)]
            })
            .fold(0.0, f64::max);
        radii.push(rad);
        maxima.push(m);
        rad *= 2.0;
    }
    let tail = &maxima[maxima.len() - 3..];
    let peak = maxima.iter().cloned().fold(max, f64::max);
    let decaying = tail[2] <= 1e-6 * peak && tail.windows(2).all(|p| p[1] <= p[0]);
    DecayTrend {
        radii,
        maxima,
        argmax: argmax.abs(),
        max,
        decaying,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureTag {
    ContinuousRule,
    Empirical,
}

/// A positive measure represented by nodes and nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureMeasure {
    nodes: Vec<Complex64>,
    weights: Vec<f64>,
    total_mass: f64,
    tag: MeasureTag,
}

impl QuadratureMeasure {
    pub fn new(nodes: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Config(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(
                "quadrature weights must be finite and >= 0".into(),
            ));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            nodes,
            weights,
            total_mass,
            tag: MeasureTag::ContinuousRule,
        })
    }

    /// Uniform probability measure on the given atoms.
    pub fn empirical(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config(
                "empirical measure needs at least one atom".into(),
            ));
        }
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        let total_mass = weights.iter().sum();
        Ok(Self {
            nodes: points,
            weights,
            total_mass,
            tag: MeasureTag::Empirical,
        })
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn tag(&self) -> MeasureTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= PROBABILITY_TOL
    }

    /// `∫ f dμ`, summed in index order.
    pub fn integrate(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| f(z) * w)
            .sum()
    }
}

/// Discretizes the natural measure of `domain` with `m` nodes per component.
///
/// Intervals carry Lebesgue measure (Gauss–Legendre, `m` nodes per interval),
/// circles arc length (`m` equispaced angles starting at angle 0), disks area
/// (Gauss–Legendre in the radius times `2m` angles), point clouds counting
/// measure. With `normalize` the rule is scaled to total mass 1.
pub fn build_quadrature(domain: &Domain, m: usize, normalize: bool) -> Result<QuadratureMeasure> {
    if m == 0 {
        return Err(Error::Precondition("quadrature order must be >= 1".into()));
    }
    domain.validate()?;
    let (nodes, mut weights) = match domain {
        Domain::IntervalUnion { intervals } => {
            let mut nodes = Vec::with_capacity(intervals.len() * m);
            let mut weights = Vec::with_capacity(intervals.len() * m);
            for &(a, b) in intervals {
                let (x, w) = gauss_legendre_on(a, b, m);
                nodes.extend(x.into_iter().map(|t| Complex64::new(t, 0.0)));
                weights.extend(w);
            }
            (nodes, weights)
        }
        Domain::Circle { radius } => {
            let nodes = (0..m).map(|k| circle_node(*radius, k, m)).collect();
            (nodes, vec![2.0 * PI * radius / m as f64; m])
        }
        Domain::Disk { radius } => {
            let (rho, wr) = gauss_legendre_on(0.0, *radius, m);
            let angles = 2 * m;
            let mut nodes = Vec::with_capacity(m * angles);
            let mut weights = Vec::with_capacity(m * angles);
            for (&r, &v) in rho.iter().zip(&wr) {
                for k in 0..angles {
                    nodes.push(circle_node(r, k, angles));
                    weights.push(v * r * 2.0 * PI / angles as f64);
                }
            }
            (nodes, weights)
        }
        Domain::PointCloud { points } => (points.clone(), vec![1.0; points.len()]),
        Domain::RealLine => {
            return Err(Error::Config(
                "no generic quadrature for the real line; use a weight-adapted rule".into(),
            ))
        }
    };
    if normalize {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    }
    QuadratureMeasure::new(nodes, weights)
}

/// `radius * exp(2πik/m)` with exact values at the quarter turns.
pub(crate) fn circle_node(radius: f64, k: usize, m: usize) -> Complex64 {
    if (4 * k).is_multiple_of(m) {
        let q = (4 * k) / m;
        let (re, im) = match q % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        return Complex64::new(radius * re, radius * im);
    }
    Complex64::from_polar(radius, 2.0 * PI * k as f64 / m as f64)
}

/// The triple `(E, w, μ)` with the quadrature order used to build `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProblem {
    pub domain: Domain,
    pub weight: Weight,
    pub measure: QuadratureMeasure,
    pub order: usize,
}

impl WeightedProblem {
    pub fn new(
        domain: Domain,
        weight: Weight,
        measure: QuadratureMeasure,
        order: usize,
    ) -> Result<Self> {
        domain.validate()?;
        weight.validate()?;
        if order == 0 {
            return Err(Error::Precondition("quadrature order must be >= 1".into()));
        }
        if matches!(domain, Domain::RealLine) {
            if let Some((deg, lead)) = weight.field_degree() {
                if deg % 2 == 1 || lead <= 0.0 {
                    return Err(Error::Config(
                        "field on the real line needs even degree and positive leading coefficient"
                            .into(),
                    ));
                }
            }
        }
        if let Some(z) = measure
            .nodes()
            .iter()
            .find(|&&z| !domain.contains(z, MEMBERSHIP_TOL))
        {
            return Err(Error::Config(format!(
                "measure node {z} lies outside the domain"
            )));
        }
        Ok(Self {
            domain,
            weight,
            measure,
            order,
        })
    }

    /// Builds `μ` from the domain's natural measure with `order` nodes per component.
    pub fn build(domain: Domain, weight: Weight, order: usize, normalize: bool) -> Result<Self> {
        let measure = build_quadrature(&domain, order, normalize)?;
        Self::new(domain, weight, measure, order)
    }

    /// Weights of the discrete measure `w^{2n} dμ`.
    pub fn level_weights(&self, n: usize) -> Vec<f64> {
        let two_n = 2.0 * n as f64;
        self.measure
            .nodes()
            .iter()
            .zip(self.measure.weights())
            .map(|(&z, &mu)| {
                if n == 0 {
                    mu
                } else {
                    let lw = self.weight.log_eval(z);
                    if lw == f64::NEG_INFINITY {
                        0.0
                    } else {
                        mu * (two_n * lw).exp()
                    }
                }
            })
            .collect()
    }

    /// Enforces the `m >= 4(n+1)` headroom rule for rules that feed a degree-n
    /// orthogonalization. Point clouds carry no order.
    pub fn require_order_for(&self, n: usize) -> Result<()> {
        if matches!(self.domain, Domain::PointCloud { .. }) {
            return Ok(());
        }
        if self.order < 4 * (n + 1) {
            return Err(Error::Precondition(format!(
                "quadrature order {} below 4(n+1) = {} for n = {n}",
                self.order,
                4 * (n + 1)
            )));
        }
        Ok(())
    }
}

/// How two probability measures are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeakStarMode {
    /// `∫ |F_a - F_b| dx` for measures on the real line.
    Wasserstein1Line,
    /// Transport distance in angle (radians) for measures on one circle.
    Wasserstein1Angle,
    /// `max_{1<=j<=k} |∫ z^j da - ∫ z^j db|`.
    Moment(usize),
}

/// Distance used to quantify weak-* convergence.
pub fn weak_star_distance(
    a: &QuadratureMeasure,
    b: &QuadratureMeasure,
    mode: WeakStarMode,
) -> Result<f64> {
    for (name, m) in [("first", a), ("second", b)] {
        if !m.is_probability() {
            return Err(Error::Precondition(format!(
                "{name} measure has total mass {} (expected 1)",
                m.total_mass()
            )));
        }
    }
    match mode {
        WeakStarMode::Wasserstein1Line => {
            if a.nodes()
                .iter()
                .chain(b.nodes())
                .any(|z| z.im.abs() > MEMBERSHIP_TOL)
            {
                return Err(Error::Domain(
                    "wasserstein1-line needs real supports".into(),
                ));
            }
            let mut events: Vec<(f64, f64)> = a
                .nodes()
                .iter()
                .zip(a.weights())
                .map(|(z, &w)| (z.re, w))
                .chain(b.nodes().iter().zip(b.weights()).map(|(z, &w)| (z.re, -w)))
                .collect();
            events.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut diff = 0.0;
            let mut total = 0.0;
            for k in 0..events.len() {
                diff += events[k].1;
                if k + 1 < events.len() {
                    total += diff.abs() * (events[k + 1].0 - events[k].0);
                }
            }
            Ok(total)
        }
        WeakStarMode::Wasserstein1Angle => {
            let radius = a.nodes().first().map(|z| z.norm()).unwrap_or(0.0);
            let same_circle = |z: &Complex64| (z.norm() - radius).abs() <= 1e-9 * radius.max(1.0);
            if radius <= 0.0 || !a.nodes().iter().chain(b.nodes()).all(same_circle) {
                return Err(Error::Domain(
                    "wasserstein1-angle needs both supports on one circle".into(),
                ));
            }
            let angle = |z: &Complex64| {
                let t = z.im.atan2(z.re);
                if t < 0.0 {
                    t + 2.0 * PI
                } else {
                    t
                }
            };
            let mut events: Vec<(f64, f64)> = a
                .nodes()
                .iter()
                .zip(a.weights())
                .map(|(z, &w)| (angle(z), w))
                .chain(
                    b.nodes()
                        .iter()
                        .zip(b.weights())
                        .map(|(z, &w)| (angle(z), -w)),
                )
                .collect();
            events.sort_by(|p, q| p.0.total_cmp(&q.0));
            // piecewise constant CDF difference on [0, 2π)
            let mut segments = Vec::with_capacity(events.len() + 1);
            segments.push((0.0, events[0].0));
            let mut diff = 0.0;
            for k in 0..events.len() {
                diff += events[k].1;
                let end = if k + 1 < events.len() {
                    events[k + 1].0
                } else {
                    2.0 * PI
                };
                segments.push((diff, end - events[k].0));
            }
            let shift = weighted_median(&segments);
            Ok(segments
                .iter()
                .map(|&(d, len)| (d - shift).abs() * len)
                .sum())
        }
        WeakStarMode::Moment(k) => {
            let mut worst: f64 = 0.0;
            for j in 1..=k {
                let ma = a.integrate_complex(|z| z.powu(j as u32));
                let mb = b.integrate_complex(|z| z.powu(j as u32));
                worst = worst.max((ma - mb).norm());
            }
            Ok(worst)
        }
    }
}

/// Minimizer of `c -> Σ |v_i - c| len_i`.
fn weighted_median(values: &[(f64, f64)]) -> f64 {
    let mut sorted: Vec<(f64, f64)> = values.iter().copied().filter(|p| p.1 > 0.0).collect();
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = sorted.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, len) in &sorted {
        acc += len;
        if acc >= 0.5 * total {
            return v;
        }
    }
    sorted[sorted.len() - 1].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn domain_invariants_are_enforced() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::interval_union(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(Domain::interval_union(vec![(2.0, 3.0), (0.0, 1.0)]).is_ok());
        assert!(Domain::circle(0.0).is_err());
        assert!(Domain::disk(-1.0).is_err());
        assert!(Domain::point_cloud(vec![]).is_err());
    }

    #[test]
    fn interval_rule_two_nodes() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let q = build_quadrature(&d, 2, false).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((q.nodes()[0].re + r).abs() < 1e-15);
        assert!((q.nodes()[1].re - r).abs() < 1e-15);
        assert!((q.weights()[0] - 1.0).abs() < 1e-15);
        assert!((q.weights()[1] - 1.0).abs() < 1e-15);
        assert!((q.total_mass() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_circle_rule_four_nodes() {
        let d = Domain::circle(1.0).unwrap();
        let q = build_quadrature(&d, 4, true).unwrap();
        assert_eq!(
            q.nodes(),
            &[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]
        );
        assert!(q.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn total_mass_is_measure_of_domain() {
        let q = build_quadrature(
            &Domain::interval_union(vec![(-3.0, -1.0), (0.0, 0.5)]).unwrap(),
            7,
            false,
        )
        .unwrap();
        assert!((q.total_mass() - 2.5).abs() < 1e-14);
        let q = build_quadrature(&Domain::circle(2.0).unwrap(), 9, false).unwrap();
        assert!((q.total_mass() - 4.0 * PI).abs() < 1e-13);
        let q = build_quadrature(&Domain::disk(2.0).unwrap(), 6, false).unwrap();
        assert!((q.total_mass() - 4.0 * PI).abs() < 1e-12);
        assert!(build_quadrature(&Domain::RealLine, 4, false).is_err());
        assert!(build_quadrature(&Domain::circle(1.0).unwrap(), 0, false).is_err());
    }

    #[test]
    fn interval_rule_exact_up_to_degree_2m_minus_1() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        for m in [1, 2, 5, 12, 33] {
            let q = build_quadrature(&d, m, false).unwrap();
            for k in 0..2 * m {
                let got = q.integrate(|z| z.re.powi(k as i32));
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k + 1) as f64
                };
                assert!((got - exact).abs() <= 1e-12, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn circle_rule_moments() {
        let d = Domain::circle(1.0).unwrap();
        for m in [3usize, 8, 17] {
            let q = build_quadrature(&d, m, true).unwrap();
            assert!((q.integrate_complex(|_| c(1.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
            for j in 1..m {
                let mom = q.integrate_complex(|z| z.powu(j as u32));
                assert!(mom.norm() < 1e-14, "m={m} j={j} {mom}");
            }
        }
    }

    #[test]
    fn disk_rule_integrates_radial_monomials() {
        let q = build_quadrature(&Domain::disk(1.0).unwrap(), 5, false).unwrap();
        // ∫ |z|^{2k} dA = π/(k+1)
        for k in 0..5 {
            let got = q.integrate(|z| z.norm_sqr().powi(k));
            assert!((got - PI / (k + 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn weight_evaluation() {
        let g = Weight::gaussian();
        assert_eq!(eval_weight(&Weight::Unit, c(3.0, -2.0)), 1.0);
        assert_eq!(eval_weight(&g, c(0.0, 0.0)), 1.0);
        assert!((eval_weight(&g, c(2.0, 0.0)) - (-4.0f64).exp()).abs() < 1e-18);
        assert!((eval_weight(&g, c(2.0, 0.0)) - 0.0183156).abs() < 1e-7);
        let t = Weight::tabulated(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![0.5, 0.0]).unwrap();
        assert_eq!(eval_weight(&t, c(0.4, 0.0)), 0.5);
        assert_eq!(eval_weight(&t, c(0.6, 0.0)), 0.0);
        assert_eq!(t.log_eval(c(0.9, 0.0)), f64::NEG_INFINITY);
        assert!(Weight::tabulated(vec![c(0.0, 0.0)], vec![-1.0]).is_err());
    }

    #[test]
    fn admissibility() {
        let unit = Domain::interval(-1.0, 1.0).unwrap();
        let r = check_admissible(&Weight::Unit, &unit).unwrap();
        assert!(r.nonnegative && r.positive_fraction == 1.0 && r.decay.is_none());
        assert!((r.positivity_measure - 2.0).abs() < 1e-12);

        let r = check_admissible(&Weight::gaussian(), &Domain::RealLine).unwrap();
        let trend = r.decay.unwrap();
        assert!(trend.decaying);
        assert!((trend.argmax - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((trend.max - 0.5f64.sqrt() * (-0.5f64).exp()).abs() < 1e-12);

        let zero = Weight::tabulated(vec![c(0.0, 0.0)], vec![0.0]).unwrap();
        assert!(matches!(
            check_admissible(&zero, &unit),
            Err(Error::Admissibility(_))
        ));
        assert!(matches!(
            check_admissible(&Weight::Unit, &Domain::RealLine),
            Err(Error::Admissibility(_))
        ));
        assert!(matches!(
            check_admissible(&Weight::field(vec![0.0, 0.0, 0.0, 1.0]), &Domain::RealLine),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn problem_rejects_nodes_outside_domain() {
        let q = QuadratureMeasure::new(vec![c(2.0, 0.0)], vec![1.0]).unwrap();
        let d = Domain::interval(-1.0, 1.0).unwrap();
        assert!(WeightedProblem::new(d.clone(), Weight::Unit, q, 1).is_err());
        let q = QuadratureMeasure::new(vec![c(0.5, 0.0)], vec![1.0]).unwrap();
        assert!(WeightedProblem::new(d.clone(), Weight::Unit, q.clone(), 0).is_err());
        assert!(WeightedProblem::new(d, Weight::Unit, q, 1).is_ok());
    }

    #[test]
    fn empirical_measures_are_uniform() {
        let e = QuadratureMeasure::empirical(vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(e.tag(), MeasureTag::Empirical);
        assert!(e.weights().iter().all(|&w| w == 1.0 / 3.0));
        assert!(e.is_probability());
    }

    #[test]
    fn distance_examples() {
        let d0 = QuadratureMeasure::empirical(vec![c(0.0, 0.0)]).unwrap();
        let dh = QuadratureMeasure::empirical(vec![c(0.5, 0.0)]).unwrap();
        let w = weak_star_distance(&d0, &dh, WeakStarMode::Wasserstein1Line).unwrap();
        assert!((w - 0.5).abs() < 1e-15);

        let roots = build_quadrature(&Domain::circle(1.0).unwrap(), 4, true).unwrap();
        let rotated = QuadratureMeasure::empirical(
            (0..4)
                .map(|k| Complex64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0))
                .collect(),
        )
        .unwrap();
        let w = weak_star_distance(&roots, &rotated, WeakStarMode::Wasserstein1Angle).unwrap();
        assert!((w - PI / 4.0).abs() < 1e-14, "{w}");

        for mode in [WeakStarMode::Wasserstein1Angle, WeakStarMode::Moment(8)] {
            assert_eq!(weak_star_distance(&roots, &roots, mode).unwrap(), 0.0);
        }
        assert_eq!(
            weak_star_distance(&d0, &d0, WeakStarMode::Wasserstein1Line).unwrap(),
            0.0
        );
    }

    #[test]
    fn distance_errors() {
        let roots = build_quadrature(&Domain::circle(1.0).unwrap(), 4, true).unwrap();
        let d0 = QuadratureMeasure::empirical(vec![c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            weak_star_distance(&roots, &d0, WeakStarMode::Wasserstein1Line),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            weak_star_distance(&roots, &d0, WeakStarMode::Wasserstein1Angle),
            Err(Error::Domain(_))
        ));
        let heavy = QuadratureMeasure::new(vec![c(0.0, 0.0)], vec![2.0]).unwrap();
        assert!(matches!(
            weak_star_distance(&heavy, &d0, WeakStarMode::Moment(3)),
            Err(Error::Precondition(_))
        ));
    }

    fn discrete_line_measure() -> impl Strategy<Value = QuadratureMeasure> {
        prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..8).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            QuadratureMeasure::new(
                atoms.iter().map(|a| c(a.0, 0.0)).collect(),
                atoms.iter().map(|a| a.1 / total).collect(),
            )
            .unwrap()
        })
    }

    fn discrete_circle_measure() -> impl Strategy<Value = QuadratureMeasure> {
        prop::collection::vec((0.0f64..2.0 * PI, 0.01f64..1.0), 1..8).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            QuadratureMeasure::new(
                atoms
                    .iter()
                    .map(|a| Complex64::from_polar(1.0, a.0))
                    .collect(),
                atoms.iter().map(|a| a.1 / total).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn line_distance_is_a_metric(a in discrete_line_measure(), b in discrete_line_measure(), c in discrete_line_measure()) {
            let m = WeakStarMode::Wasserstein1Line;
            let ab = weak_star_distance(&a, &b, m).unwrap();
            let ba = weak_star_distance(&b, &a, m).unwrap();
            let ac = weak_star_distance(&a, &c, m).unwrap();
            let cb = weak_star_distance(&c, &b, m).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!(ab <= ac + cb + 1e-10);
        }

        #[test]
        fn angle_distance_is_a_metric(a in discrete_circle_measure(), b in discrete_circle_measure(), c in discrete_circle_measure()) {
            let m = WeakStarMode::Wasserstein1Angle;
            let ab = weak_star_distance(&a, &b, m).unwrap();
            let ba = weak_star_distance(&b, &a, m).unwrap();
            let ac = weak_star_distance(&a, &c, m).unwrap();
            let cb = weak_star_distance(&c, &b, m).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!(ab <= ac + cb + 1e-10);
            prop_assert!(ab <= PI + 1e-12);
        }

        #[test]
        fn moment_distance_is_a_metric(a in discrete_circle_measure(), b in discrete_line_measure(), c in discrete_circle_measure()) {
            let m = WeakStarMode::Moment(8);
            let ab = weak_star_distance(&a, &b, m).unwrap();
            let ba = weak_star_distance(&b, &a, m).unwrap();
            let ac = weak_star_distance(&a, &c, m).unwrap();
            let cb = weak_star_distance(&c, &b, m).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10 * ab.max(1.0));
            prop_assert!(ab <= ac + cb + 1e-10 * ab.max(1.0));
        }

        #[test]
        fn weights_are_nonnegative(x in -50.0f64..50.0, y in -50.0f64..50.0, c0 in 0.0f64..2.0, c2 in 0.0f64..2.0) {
            let z = Complex64::new(x, y);
            prop_assert_eq!(eval_weight(&Weight::Unit, z), 1.0);
            prop_assert!(eval_weight(&Weight::field(vec![c0, 0.0, c2]), z) >= 0.0);
        }
    }
}
