//! Lorentzian metrics on coordinate charts and the witness zoo.
//!
//! Coordinates are ordered with the time-like coordinate last, so the flat
//! metric is `diag(1, …, 1, −1)`. Each zoo entry is a closed-form expression
//! evaluated generically over [`Scalar`], which is what lets the rest of the
//! crate differentiate it exactly.

use std::f64::consts::TAU;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::dual::{seed_axis, Scalar};
use crate::error::{GeomError, Result};
use crate::foliation_geometry::{Foliation, TimeFunction};
use crate::linalg::Mat;

/// A point of a chart, finite coordinates, time-like coordinate last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint(Vec<f64>);

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::OutOfDomain { point: coords });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ChartPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Axis-aligned box `[lo, hi]` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains_open(&self, p: &[f64], skip: &[Option<f64>]) -> bool {
        p.iter().enumerate().all(|(i, &x)| skip[i].is_some() || (x > self.lo[i] && x < self.hi[i]))
    }

    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, &t)| self.lo[i] + t * (self.hi[i] - self.lo[i])).collect()
    }
}

fn default_n() -> usize {
    3
}
fn default_eps() -> f64 {
    0.5
}
fn default_rw_a() -> Vec<f64> {
    vec![1.0, 0.0, 0.1]
}
fn default_c_pos() -> f64 {
    1.0
}
fn default_c_neg() -> f64 {
    -1.0
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_beta_x() -> f64 {
    0.3
}
fn default_beta_y() -> f64 {
    0.2
}

/// A named member of the witness zoo with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacetimeSpec {
    /// Flat space, spatial axes identified with period 2π.
    Minkowski {
        #[serde(default = "default_n")]
        n: usize,
    },
    /// Flat space (n = 2) sliced by τ = t − ε·sin x.
    MinkowskiTilted {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// Flat space sliced by the hyperboloids τ = √(t² − |x|²) inside the future cone.
    MinkowskiHyperboloids {
        #[serde(default = "default_n")]
        n: usize,
    },
    /// −dt² + a(t)²|dx|², `a` given by polynomial coefficients (constant term first).
    RobertsonWalker {
        #[serde(default = "default_rw_a")]
        a: Vec<f64>,
        #[serde(default = "default_n")]
        n: usize,
    },
    /// −dt² + e^{2√c t}|dx|².
    DeSitterFlatSlicing {
        #[serde(default = "default_c_pos")]
        c: f64,
        #[serde(default = "default_n")]
        n: usize,
    },
    /// Poincaré patch (ℓ²/z²)(dx² + dy² + dz² − dt²), ℓ² = −1/c.
    AntiDeSitterChart {
        #[serde(default = "default_c_neg")]
        c: f64,
    },
    /// e^{2φ(z)}dx² + dy² − dz² with φ′ a polynomial bump on [1.5, 3].
    SlabCounterexample {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// dx² + dy² − φ(x,y)²dt² on a flat torus, φ = 1 + β_x sin x + β_y cos y.
    StaticLapseTorus {
        #[serde(default = "default_beta_x")]
        beta_x: f64,
        #[serde(default = "default_beta_y")]
        beta_y: f64,
    },
}

/// Start and end of the slab bump support.
pub const SLAB_BUMP: (f64, f64) = (1.5, 3.0);

impl SpacetimeSpec {
    /// Every zoo family at its default parameters.
    pub fn catalogue() -> Vec<SpacetimeSpec> {
        vec![
            SpacetimeSpec::Minkowski { n: default_n() },
            SpacetimeSpec::MinkowskiTilted { eps: default_eps() },
            SpacetimeSpec::MinkowskiHyperboloids { n: default_n() },
            SpacetimeSpec::RobertsonWalker { a: default_rw_a(), n: default_n() },
            SpacetimeSpec::DeSitterFlatSlicing { c: default_c_pos(), n: default_n() },
            SpacetimeSpec::AntiDeSitterChart { c: default_c_neg() },
            SpacetimeSpec::SlabCounterexample { amplitude: default_amplitude() },
            SpacetimeSpec::StaticLapseTorus { beta_x: default_beta_x(), beta_y: default_beta_y() },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpacetimeSpec::Minkowski { .. } => "minkowski",
            SpacetimeSpec::MinkowskiTilted { .. } => "minkowski_tilted",
            SpacetimeSpec::MinkowskiHyperboloids { .. } => "minkowski_hyperboloids",
            SpacetimeSpec::RobertsonWalker { .. } => "robertson_walker",
            SpacetimeSpec::DeSitterFlatSlicing { .. } => "de_sitter_flat_slicing",
            SpacetimeSpec::AntiDeSitterChart { .. } => "anti_de_sitter_chart",
            SpacetimeSpec::SlabCounterexample { .. } => "slab_counterexample",
            SpacetimeSpec::StaticLapseTorus { .. } => "static_lapse_torus",
        }
    }

    /// Spatial dimension n (chart dimension is n + 1).
    pub fn leaf_dim(&self) -> usize {
        match self {
            SpacetimeSpec::Minkowski { n }
            | SpacetimeSpec::MinkowskiHyperboloids { n }
            | SpacetimeSpec::RobertsonWalker { n, .. }
            | SpacetimeSpec::DeSitterFlatSlicing { n, .. } => *n,
            SpacetimeSpec::MinkowskiTilted { .. } => 2,
            SpacetimeSpec::AntiDeSitterChart { .. } => 3,
            SpacetimeSpec::SlabCounterexample { .. } => 2,
            SpacetimeSpec::StaticLapseTorus { .. } => 2,
        }
    }

    /// Sectional curvature when the family has constant curvature.
    pub fn constant_curvature(&self) -> Option<f64> {
        match self {
            SpacetimeSpec::Minkowski { .. }
            | SpacetimeSpec::MinkowskiTilted { .. }
            | SpacetimeSpec::MinkowskiHyperboloids { .. } => Some(0.0),
            SpacetimeSpec::DeSitterFlatSlicing { c, .. } => Some(*c),
            SpacetimeSpec::AntiDeSitterChart { c } => Some(*c),
            _ => None,
        }
    }

    pub fn canonical_foliation_label(&self) -> &'static str {
        match self {
            SpacetimeSpec::MinkowskiTilted { .. } => "tau = t - eps*sin(x)",
            SpacetimeSpec::MinkowskiHyperboloids { .. } => "tau = sqrt(t^2 - |x|^2), future cone",
            SpacetimeSpec::SlabCounterexample { .. } => "z = const",
            _ => "t = const",
        }
    }

    pub fn validity_label(&self) -> &'static str {
        match self {
            SpacetimeSpec::Minkowski { .. } => "1 <= n <= 6",
            SpacetimeSpec::MinkowskiTilted { .. } => "|eps| < 1",
            SpacetimeSpec::MinkowskiHyperboloids { .. } => "1 <= n <= 6; chart inside future cone",
            SpacetimeSpec::RobertsonWalker { .. } => "a(t) > 0 on t in (-2, 2)",
            SpacetimeSpec::DeSitterFlatSlicing { .. } => "c > 0",
            SpacetimeSpec::AntiDeSitterChart { .. } => "c < 0; z in (0.25, 4)",
            SpacetimeSpec::SlabCounterexample { .. } => "finite amplitude",
            SpacetimeSpec::StaticLapseTorus { .. } => "|beta_x| + |beta_y| < 1",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeomError::InvalidParams(format!("{}: {m}", self.name())));
        match self {
            SpacetimeSpec::Minkowski { n }
            | SpacetimeSpec::MinkowskiHyperboloids { n }
            | SpacetimeSpec::RobertsonWalker { n, .. }
            | SpacetimeSpec::DeSitterFlatSlicing { n, .. }
                if !(1..=6).contains(n) =>
            {
                bad("n must lie in 1..=6")
            }
            SpacetimeSpec::MinkowskiTilted { eps } if !(eps.abs() < 1.0) => bad("tilt must satisfy |eps| < 1"),
            SpacetimeSpec::RobertsonWalker { a, .. } => {
                if a.is_empty() || a.iter().any(|c| !c.is_finite()) {
                    return bad("scale factor needs finite coefficients");
                }
                let positive = (0..=400).all(|k| poly(a, -2.0 + 0.01 * k as f64) > 0.0);
                if positive {
                    Ok(())
                } else {
                    bad("scale factor must stay positive on (-2, 2)")
                }
            }
            SpacetimeSpec::DeSitterFlatSlicing { c, .. } if !(*c > 0.0 && c.is_finite()) => bad("c must be positive"),
            SpacetimeSpec::AntiDeSitterChart { c } if !(*c < 0.0 && c.is_finite()) => bad("c must be negative"),
            SpacetimeSpec::SlabCounterexample { amplitude } if !amplitude.is_finite() => bad("amplitude must be finite"),
            SpacetimeSpec::StaticLapseTorus { beta_x, beta_y } if !(beta_x.abs() + beta_y.abs() < 1.0) => {
                bad("lapse must stay positive: |beta_x| + |beta_y| < 1")
            }
            _ => Ok(()),
        }
    }

    fn chart(&self) -> (ChartBox, Vec<Option<f64>>, ChartBox) {
        let d = self.leaf_dim() + 1;
        let n = d - 1;
        let torus = |t_dom: (f64, f64), t_sample: (f64, f64)| {
            let mut lo = vec![0.0; n];
            let mut hi = vec![TAU; n];
            let mut slo = lo.clone();
            let mut shi = hi.clone();
            lo.push(t_dom.0);
            hi.push(t_dom.1);
            slo.push(t_sample.0);
            shi.push(t_sample.1);
            let mut periodic = vec![Some(TAU); n];
            periodic.push(None);
            (ChartBox::new(lo, hi), periodic, ChartBox::new(slo, shi))
        };
        match self {
            SpacetimeSpec::Minkowski { .. }
            | SpacetimeSpec::MinkowskiTilted { .. }
            | SpacetimeSpec::StaticLapseTorus { .. } => torus((-10.0, 10.0), (-1.0, 1.0)),
            SpacetimeSpec::RobertsonWalker { .. } => torus((-2.0, 2.0), (-1.0, 1.0)),
            SpacetimeSpec::DeSitterFlatSlicing { .. } => torus((-3.0, 3.0), (-1.0, 1.0)),
            SpacetimeSpec::SlabCounterexample { .. } => torus((-5.0, 6.0), (-1.0, 3.5)),
            SpacetimeSpec::MinkowskiHyperboloids { .. } => {
                let mut lo = vec![-0.5; n];
                let mut hi = vec![0.5; n];
                let mut slo = vec![-0.4; n];
                let mut shi = vec![0.4; n];
                lo.push(0.9);
                hi.push(10.0);
                slo.push(1.0);
                shi.push(3.0);
                (ChartBox::new(lo, hi), vec![None; d], ChartBox::new(slo, shi))
            }
            SpacetimeSpec::AntiDeSitterChart { .. } => (
                ChartBox::new(vec![-5.0, -5.0, 0.25, -10.0], vec![5.0, 5.0, 4.0, 10.0]),
                vec![None; 4],
                ChartBox::new(vec![-1.0, -1.0, 0.5, -1.0], vec![1.0, 1.0, 2.0, 1.0]),
            ),
        }
    }

    fn time_function(&self) -> TimeFunction {
        let time_axis = self.leaf_dim();
        match self {
            SpacetimeSpec::MinkowskiTilted { eps } => TimeFunction::Tilted { eps: *eps },
            SpacetimeSpec::MinkowskiHyperboloids { .. } => TimeFunction::Hyperboloid,
            _ => TimeFunction::Coordinate { axis: time_axis },
        }
    }

    /// Metric components at `p` (no domain or signature checks).
    pub fn metric_components<S: Scalar>(&self, p: &[S]) -> Mat<S> {
        let d = p.len();
        let t = p[d - 1];
        let flat = || {
            let mut m = Mat::identity(d);
            m[(d - 1, d - 1)] = -S::one();
            m
        };
        let spatially_flat = |a2: S| {
            let mut m = Mat::zeros(d);
            for i in 0..d - 1 {
                m[(i, i)] = a2;
            }
            m[(d - 1, d - 1)] = -S::one();
            m
        };
        match self {
            SpacetimeSpec::Minkowski { .. }
            | SpacetimeSpec::MinkowskiTilted { .. }
            | SpacetimeSpec::MinkowskiHyperboloids { .. } => flat(),
            SpacetimeSpec::RobertsonWalker { a, .. } => {
                let at = poly(a, t);
                spatially_flat(at * at)
            }
            SpacetimeSpec::DeSitterFlatSlicing { c, .. } => spatially_flat((t.scale(2.0 * c.sqrt())).exp()),
            SpacetimeSpec::AntiDeSitterChart { c } => {
                let z = p[2];
                let conf = S::cst(-1.0 / c) / (z * z);
                Mat::diag(&[conf, conf, conf, -conf])
            }
            SpacetimeSpec::SlabCounterexample { amplitude } => {
                let phi = slab_phi(*amplitude, t);
                Mat::diag(&[phi.scale(2.0).exp(), S::one(), -S::one()])
            }
            SpacetimeSpec::StaticLapseTorus { beta_x, beta_y } => {
                let lapse = static_lapse(*beta_x, *beta_y, p[0], p[1]);
                Mat::diag(&[S::one(), S::one(), -(lapse * lapse)])
            }
        }
    }
}

/// Horner evaluation, constant term first.
pub fn poly<S: Scalar>(coeffs: &[f64], t: S) -> S {
    let mut acc = S::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * t + S::cst(c);
    }
    acc
}

/// φ′ of the slab: `A·64u³(1−u)³`, `u = (z − 1.5)/1.5` on the bump, zero elsewhere.
pub fn slab_phi_prime<S: Scalar>(amplitude: f64, z: S) -> S {
    let (a, b) = SLAB_BUMP;
    let zr = z.re();
    if zr <= a || zr >= b {
        return S::zero();
    }
    let u = (z - S::cst(a)).scale(1.0 / (b - a));
    let w = u * (S::one() - u);
    w.powi(3).scale(64.0 * amplitude)
}

/// φ of the slab, the closed-form antiderivative of [`slab_phi_prime`] with φ = 0 for z ≤ 1.5.
pub fn slab_phi<S: Scalar>(amplitude: f64, z: S) -> S {
    let (a, b) = SLAB_BUMP;
    let width = b - a;
    let antider = |u: S| {
        let u4 = u.powi(4);
        (u4.scale(0.25) - (u4 * u).scale(0.6) + (u4 * u * u).scale(0.5) - (u4 * u * u * u).scale(1.0 / 7.0))
            .scale(64.0 * amplitude * width)
    };
    let zr = z.re();
    if zr <= a {
        S::zero()
    } else if zr >= b {
        antider(S::one())
    } else {
        antider((z - S::cst(a)).scale(1.0 / width))
    }
}

pub fn static_lapse<S: Scalar>(beta_x: f64, beta_y: f64, x: S, y: S) -> S {
    S::one() + x.sin().scale(beta_x) + y.cos().scale(beta_y)
}

/// A Lorentzian metric on an open chart box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    pub spec: SpacetimeSpec,
    pub domain: ChartBox,
    /// Period of each axis, if identified.
    pub periodic: Vec<Option<f64>>,
    /// Closed box used by samplers; inside the domain.
    pub sample_box: ChartBox,
}

impl MetricField {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn leaf_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn name(&self) -> &'static str {
        self.spec.name()
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeomError::DimensionMismatch { got: p.len(), want: self.dim() });
        }
        if p.iter().any(|x| !x.is_finite()) || !self.domain.contains_open(p, &self.periodic) {
            return Err(GeomError::OutOfDomain { point: p.to_vec() });
        }
        Ok(())
    }

    /// Generic evaluation; callers are responsible for the domain check.
    pub fn g<S: Scalar>(&self, p: &[S]) -> Mat<S> {
        self.spec.metric_components(p)
    }

    /// g and ∂_C g at `p`, one seeded evaluation per axis.
    pub fn g_and_partials<S: Scalar>(&self, p: &[S]) -> (Mat<S>, Vec<Mat<S>>) {
        let d = p.len();
        let mut g = None;
        let partials = (0..d)
            .map(|c| {
                let gd = self.g(&seed_axis(p, c));
                if g.is_none() {
                    g = Some(gd.map(|x| x.re));
                }
                gd.map(|x| x.eps)
            })
            .collect();
        (g.unwrap(), partials)
    }

    pub fn inverse<S: Scalar>(&self, p: &[S]) -> Result<Mat<S>> {
        self.g(p)
            .inverse()
            .ok_or_else(|| GeomError::SingularMetric { point: p.iter().map(|x| x.re()).collect() })
    }
}

/// Metric matrix at `p`, with domain and signature checks.
pub fn eval_metric(metric: &MetricField, p: &ChartPoint) -> Result<Mat<f64>> {
    metric.check_point(p)?;
    let g = metric.g(p.coords());
    check_signature(&g, p)?;
    Ok(g)
}

/// Exactly one negative and n positive eigenvalues.
pub fn check_signature(g: &Mat<f64>, p: &[f64]) -> Result<()> {
    let ev = g.symmetric_eigenvalues();
    let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale.max(1.0);
    let neg = ev.iter().filter(|&&x| x < -tol).count();
    let pos = ev.iter().filter(|&&x| x > tol).count();
    if neg == 1 && pos == ev.len() - 1 && g.max_asymmetry() <= 1e-12 * scale.max(1.0) {
        Ok(())
    } else {
        Err(GeomError::SignatureViolation { point: p.to_vec(), eigenvalues: ev })
    }
}

/// `out[C][(A, B)] = ∂_C g_AB` by forward-mode differentiation.
pub fn metric_partials(metric: &MetricField, p: &ChartPoint) -> Result<Vec<Mat<f64>>> {
    metric.check_point(p)?;
    Ok(metric.g_and_partials(p.coords()).1)
}

/// Builds the metric of a zoo entry and its canonical foliation.
pub fn zoo_build(spec: &SpacetimeSpec) -> Result<(MetricField, Foliation)> {
    spec.validate()?;
    let (domain, periodic, sample_box) = spec.chart();
    let metric = MetricField { spec: spec.clone(), domain, periodic, sample_box };
    let fol = Foliation::new(metric.clone(), spec.time_function());
    Ok((metric, fol))
}
