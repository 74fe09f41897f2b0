//! Spacelike foliations given as level sets of a time function.
//!
//! Sign conventions:
//!
//! * `N = −∇τ / |∇τ|` times the orientation sign (future-pointing on the zoo charts).
//! * `h_ij = −g(∇_{e_j} N, e_i)`, `H = −(1/n) tr h`, so that `Div N = nH`.
//! * `A = ∇_N N`, `x_i = g(A, e_i)`.
//!
//! All fields below are generic over [`Scalar`]; derivatives of a field are taken
//! by evaluating it on seeded [`Dual`] inputs, so nothing here is finite-differenced.

use serde::{Deserialize, Serialize};

use crate::chart_metrics::{ChartPoint, MetricField};
use crate::curvature::{connection_at, orthonormal_frame};
use crate::dual::{lift, primal, seed, seed_axis, tangent, Dual, Scalar};
use crate::error::{GeomError, Result};
use crate::linalg::{axpy, scaled, Mat};

/// A time function whose level sets are the leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    /// τ = x^axis.
    Coordinate { axis: usize },
    /// τ = t − ε·sin x, with x the first and t the last axis.
    Tilted { eps: f64 },
    /// τ = √(t² − Σ x_i²).
    Hyperboloid,
}

impl TimeFunction {
    pub fn eval<S: Scalar>(&self, p: &[S]) -> S {
        let d = p.len();
        match self {
            TimeFunction::Coordinate { axis } => p[*axis],
            TimeFunction::Tilted { eps } => p[d - 1] - p[0].sin().scale(*eps),
            TimeFunction::Hyperboloid => {
                let t = p[d - 1];
                let mut q = t * t;
                for &x in &p[..d - 1] {
                    q -= x * x;
                }
                q.sqrt()
            }
        }
    }
}

/// A spacelike foliation of a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Foliation {
    pub metric: MetricField,
    pub time: TimeFunction,
    /// ±1, multiplies the normal.
    pub orientation: f64,
}

/// Vector fields evaluable on any scalar type.
pub trait VectorField: Sync {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>>;
}

/// Scalar fields evaluable on any scalar type.
pub trait ScalarField: Sync {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<S>;
}

/// Value and derivative of a vector field along `dir`.
pub fn derive_vector<S: Scalar, V: VectorField>(field: &V, p: &[S], dir: &[S]) -> Result<(Vec<S>, Vec<S>)> {
    let y = field.at::<Dual<S>>(&seed(p, dir))?;
    Ok((primal(&y), tangent(&y)))
}

/// Value and derivative of a scalar field along `dir`.
pub fn derive_scalar<S: Scalar, F: ScalarField>(field: &F, p: &[S], dir: &[S]) -> Result<(S, S)> {
    let y = field.at::<Dual<S>>(&seed(p, dir))?;
    Ok((y.re, y.eps))
}

/// `∇_X Y` at `p`.
pub fn covariant<S: Scalar, V: VectorField>(metric: &MetricField, p: &[S], x: &[S], field: &V) -> Result<Vec<S>> {
    let (y, dy) = derive_vector(field, p, x)?;
    let gam = connection_at(metric, p)?;
    let corr = gam.contract(x, &y);
    Ok(dy.iter().zip(corr).map(|(&a, b)| a + b).collect())
}

impl Foliation {
    pub fn new(metric: MetricField, time: TimeFunction) -> Self {
        Self { metric, time, orientation: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn leaf_dim(&self) -> usize {
        self.metric.leaf_dim()
    }

    pub fn tau<S: Scalar>(&self, p: &[S]) -> S {
        self.time.eval(p)
    }

    pub fn dtau<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        (0..p.len()).map(|a| self.time.eval(&seed_axis(p, a)).eps).collect()
    }

    pub fn normal_at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let ginv = self.metric.inverse(p)?;
        let grad = ginv.mul_vec(&self.dtau(p));
        let dt = self.dtau(p);
        let mut q = S::zero();
        for (a, b) in dt.iter().zip(&grad) {
            q += *a * *b;
        }
        if !(q.re() < 0.0) {
            return Err(GeomError::NotSpacelikeLeaf { point: p.iter().map(|x| x.re()).collect(), norm: q.re() });
        }
        let k = S::cst(-self.orientation) / (-q).sqrt();
        Ok(scaled(k, &grad))
    }

    /// `e_1..e_n` tangent to the leaf (Gram–Schmidt of the coordinate axes in
    /// order, projected off `N`), followed by `N`.
    pub fn frame_at<S: Scalar>(&self, p: &[S]) -> Result<Vec<Vec<S>>> {
        let d = p.len();
        let n = d - 1;
        let g = self.metric.g(p);
        let normal = self.normal_at(p)?;
        let mut frame: Vec<Vec<S>> = Vec::with_capacity(d);
        for axis in 0..d {
            if frame.len() == n {
                break;
            }
            let mut v = vec![S::zero(); d];
            v[axis] = S::one();
            // projection onto the leaf: v + g(v, N) N
            let vn = g.form(&v, &normal);
            v = axpy(vn, &normal, &v);
            for e in &frame {
                let ve = g.form(&v, e);
                v = axpy(-ve, e, &v);
            }
            let norm2 = g.form(&v, &v);
            if norm2.re() > 1e-8 * g[(axis, axis)].re().abs().max(1.0) {
                v = scaled(S::one() / norm2.sqrt(), &v);
                frame.push(v);
            }
        }
        if frame.len() < n {
            return Err(GeomError::DegenerateFrame { point: p.iter().map(|x| x.re()).collect() });
        }
        frame.push(normal);
        Ok(frame)
    }

    /// `h_ij = −g(∇_{e_j} N, e_i)`.
    pub fn second_fundamental_at<S: Scalar>(&self, p: &[S]) -> Result<Mat<S>> {
        let frame = self.frame_at(p)?;
        self.second_fundamental_with(p, &frame)
    }

    fn second_fundamental_with<S: Scalar>(&self, p: &[S], frame: &[Vec<S>]) -> Result<Mat<S>> {
        let n = self.leaf_dim();
        let g = self.metric.g(p);
        let dn: Vec<Vec<S>> =
            (0..n).map(|j| covariant(&self.metric, p, &frame[j], &NormalField(self))).collect::<Result<_>>()?;
        let mut h = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = -g.form(&dn[j], &frame[i]);
            }
        }
        Ok(h)
    }

    pub fn mean_curvature_at<S: Scalar>(&self, p: &[S]) -> Result<S> {
        let h = self.second_fundamental_at(p)?;
        Ok(-h.trace() / S::cst(self.leaf_dim() as f64))
    }

    pub fn acceleration_at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let normal = self.normal_at(p)?;
        covariant(&self.metric, p, &normal, &NormalField(self))
    }

    /// The point of the leaf `τ = level` over the spatial coordinates `u` (Newton in the time axis).
    pub fn leaf_point(&self, u: &[f64], level: f64) -> Result<ChartPoint> {
        let d = self.dim();
        if u.len() + 1 != d {
            return Err(GeomError::DimensionMismatch { got: u.len() + 1, want: d });
        }
        let mut p = u.to_vec();
        p.push(level);
        let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut shift = 1.0 + r;
        while !self.time.eval(&seed_axis(&p, d - 1)).re.is_finite() && shift < 1e6 {
            p[d - 1] = level.abs() + shift;
            shift *= 2.0;
        }
        for _ in 0..60 {
            let v = self.time.eval(&seed_axis(&p, d - 1));
            let step = (v.re - level) / v.eps;
            if !step.is_finite() {
                break;
            }
            p[d - 1] -= step;
            if step.abs() <= 1e-15 * p[d - 1].abs().max(1.0) {
                let q = ChartPoint::from(p);
                self.metric.check_point(&q)?;
                return Ok(q);
            }
        }
        Err(GeomError::OutOfDomain { point: p })
    }
}

/// The unit normal field `N`.
pub struct NormalField<'a>(pub &'a Foliation);

impl VectorField for NormalField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        self.0.normal_at(p)
    }
}

/// Frame vector `e_A` of the adapted frame (`A = n` is `N`).
pub struct FrameVectorField<'a>(pub &'a Foliation, pub usize);

impl VectorField for FrameVectorField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let mut f = self.0.frame_at(p)?;
        Ok(f.swap_remove(self.1))
    }
}

/// The acceleration `A = ∇_N N`.
pub struct AccelerationField<'a>(pub &'a Foliation);

impl VectorField for AccelerationField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        self.0.acceleration_at(p)
    }
}

/// The mean curvature `H`.
pub struct MeanCurvatureField<'a>(pub &'a Foliation);

impl ScalarField for MeanCurvatureField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<S> {
        self.0.mean_curvature_at(p)
    }
}

/// The frame component `h_ik`.
pub struct ShapeEntryField<'a>(pub &'a Foliation, pub usize, pub usize);

impl ScalarField for ShapeEntryField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<S> {
        Ok(self.0.second_fundamental_at(p)?[(self.1, self.2)])
    }
}

/// All entries of `h` as one field (row-major), for one-pass differentiation.
pub struct ShapeMatrixField<'a>(pub &'a Foliation);

impl VectorField for ShapeMatrixField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        Ok(self.0.second_fundamental_at(p)?.rows().concat())
    }
}

/// The frame components `x_i = g(A, e_i)`, as a vector of length n.
pub struct AccelerationComponentsField<'a>(pub &'a Foliation);

impl VectorField for AccelerationComponentsField<'_> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let fol = self.0;
        let frame = fol.frame_at(p)?;
        let a = covariant(&fol.metric, p, &frame[fol.leaf_dim()], &NormalField(fol))?;
        let g = fol.metric.g(p);
        Ok(frame[..fol.leaf_dim()].iter().map(|e| g.form(&a, e)).collect())
    }
}

/// Leaf projection `V + g(V, N)N` of an ambient field.
pub struct LeafProjection<'a, V> {
    pub foliation: &'a Foliation,
    pub field: V,
}

impl<V: VectorField> VectorField for LeafProjection<'_, V> {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let v = self.field.at(p)?;
        let normal = self.foliation.normal_at(p)?;
        let vn = self.foliation.metric.g(p).form(&v, &normal);
        Ok(axpy(vn, &normal, &v))
    }
}

/// Adapted orthonormal frame at a point with its connection coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct AdaptedFrame {
    /// `e_1..e_n, N` in chart components.
    pub e: Vec<Vec<f64>>,
    pub gram: Mat<f64>,
    /// `ω_AB(e_C) = g(∇_{e_C} e_A, e_B)`, stored `[(A·d + B)·d + C]`.
    pub omega: Vec<f64>,
}

impl AdaptedFrame {
    pub fn dim(&self) -> usize {
        self.e.len()
    }

    pub fn omega(&self, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim();
        self.omega[(a * d + b) * d + c]
    }

    pub fn normal(&self) -> &[f64] {
        self.e.last().unwrap()
    }

    pub fn gram_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let want = if i != j {
                    0.0
                } else if i == d - 1 {
                    -1.0
                } else {
                    1.0
                };
                worst = worst.max((self.gram[(i, j)] - want).abs());
            }
        }
        worst
    }

    pub fn omega_antisymmetry_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    worst = worst.max((self.omega(a, b, c) + self.omega(b, a, c)).abs());
                }
            }
        }
        worst
    }
}

/// Extrinsic geometry of the leaf through a point.
#[derive(Clone, Debug, Serialize)]
pub struct ExtrinsicData {
    pub h: Mat<f64>,
    pub mean_curvature: f64,
    pub b_norm_sq: f64,
    pub acceleration: Vec<f64>,
    pub x: Vec<f64>,
    pub umb_dev: f64,
}

impl ExtrinsicData {
    pub fn accel_norm_sq(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }
}

pub fn unit_normal(fol: &Foliation, p: &ChartPoint) -> Result<Vec<f64>> {
    fol.metric.check_point(p)?;
    fol.normal_at(p.coords())
}

pub fn adapted_frame(fol: &Foliation, p: &ChartPoint) -> Result<AdaptedFrame> {
    fol.metric.check_point(p)?;
    let x = p.coords();
    let d = fol.dim();
    let e = fol.frame_at(x)?;
    let g = fol.metric.g(x);
    let gram = Mat::from_fn(d, |i, j| g.form(&e[i], &e[j]));
    let mut omega = vec![0.0; d * d * d];
    for a in 0..d {
        for c in 0..d {
            let de = covariant(&fol.metric, x, &e[c], &FrameVectorField(fol, a))?;
            for b in 0..d {
                omega[(a * d + b) * d + c] = g.form(&de, &e[b]);
            }
        }
    }
    Ok(AdaptedFrame { e, gram, omega })
}

/// Shape data of the leaf through `p`.
pub fn shape_operator(fol: &Foliation, p: &ChartPoint) -> Result<ExtrinsicData> {
    fol.metric.check_point(p)?;
    let x = p.coords();
    let n = fol.leaf_dim();
    let frame = fol.frame_at(x)?;
    let h = fol.second_fundamental_with(x, &frame)?;
    let g = fol.metric.g(x);
    let acc = covariant(&fol.metric, x, &frame[n], &NormalField(fol))?;
    let xs: Vec<f64> = frame[..n].iter().map(|e| g.form(&acc, e)).collect();
    let tr = h.trace();
    let mean_curvature = -tr / n as f64;
    let b_norm_sq = h.frobenius().powi(2);
    let umb = Mat::from_fn(n, |i, j| h[(i, j)] - if i == j { tr / n as f64 } else { 0.0 });
    Ok(ExtrinsicData { umb_dev: umb.frobenius(), h, mean_curvature, b_norm_sq, acceleration: acc, x: xs })
}

/// `A = ∇_N N` and its frame components.
pub fn acceleration(fol: &Foliation, p: &ChartPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let ex = shape_operator(fol, p)?;
    Ok((ex.acceleration, ex.x))
}

/// `N(H)`, by differentiating the mean-curvature field along `N`.
pub fn normal_derivative_of_h(fol: &Foliation, p: &ChartPoint) -> Result<f64> {
    fol.metric.check_point(p)?;
    let normal = fol.normal_at(p.coords())?;
    Ok(derive_scalar(&MeanCurvatureField(fol), p.coords(), &normal)?.1)
}

/// `div_L V = Σ_i g(∇_{e_i} V, e_i)` for a leaf-tangent `V`.
pub fn leaf_divergence<V: VectorField>(fol: &Foliation, v: &V, p: &ChartPoint) -> Result<f64> {
    fol.metric.check_point(p)?;
    let x = p.coords();
    let frame = fol.frame_at(x)?;
    let n = fol.leaf_dim();
    let g = fol.metric.g(x);
    let val = v.at(x)?;
    let cross = g.form(&val, &frame[n]);
    let size = val.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    if cross.abs() > 1e-8 * size {
        return Err(GeomError::NotLeafTangent { cross });
    }
    leaf_divergence_unchecked(fol, v, x, &frame)
}

pub(crate) fn leaf_divergence_unchecked<V: VectorField>(
    fol: &Foliation,
    v: &V,
    x: &[f64],
    frame: &[Vec<f64>],
) -> Result<f64> {
    let g = fol.metric.g(x);
    let mut acc = 0.0;
    for e in &frame[..fol.leaf_dim()] {
        let dv = covariant(&fol.metric, x, e, v)?;
        acc += g.form(&dv, e);
    }
    Ok(acc)
}

/// `Div V = Σ_A ε_A g(∇_{E_A} V, E_A)` over an orthonormal frame of the metric.
pub fn full_divergence<V: VectorField>(metric: &MetricField, v: &V, p: &ChartPoint) -> Result<f64> {
    metric.check_point(p)?;
    let x = p.coords();
    let g = metric.g(x);
    let mut acc = 0.0;
    for e in orthonormal_frame(&g) {
        let eps = g.form(&e, &e).signum();
        let dv = covariant(metric, x, &e, v)?;
        acc += eps * g.form(&dv, &e);
    }
    Ok(acc)
}

/// `(1/√|g|) ∂_a(√|g| V^a)`.
pub fn coordinate_divergence<V: VectorField>(metric: &MetricField, v: &V, p: &ChartPoint) -> Result<f64> {
    metric.check_point(p)?;
    let x = p.coords();
    let vol = |q: &[Dual<f64>]| metric.g(q).det().scale(-1.0).sqrt();
    let mut acc = 0.0;
    for a in 0..x.len() {
        let q = seed_axis(x, a);
        let w = vol(&q) * v.at(&q)?[a];
        acc += w.eps;
    }
    let det = metric.g(&lift(x)).det().re;
    Ok(acc / (-det).sqrt())
}

/// An integral curve of `N` sampled at uniform parameter steps.
#[derive(Clone, Debug, Serialize)]
pub struct NormalCurve {
    pub samples: Vec<(f64, Vec<f64>)>,
    /// Whether `|A| < 1e-8` at every sample.
    pub geodesic: bool,
    pub max_accel: f64,
    /// Largest `|g(ṗ, ṗ) + 1|` seen.
    pub speed_defect: f64,
}

/// RK4 integration of `ṗ = N(p)` from `p0` over `[0, s_max]`.
pub fn normal_curve(fol: &Foliation, p0: &ChartPoint, s_max: f64, ds: f64) -> Result<NormalCurve> {
    fol.metric.check_point(p0)?;
    let steps = (s_max / ds).ceil().max(1.0) as usize;
    let h = s_max / steps as f64;
    let mut p = p0.to_vec();
    let mut samples = vec![(0.0, p.clone())];
    let mut max_accel = 0.0f64;
    let mut speed_defect = 0.0f64;
    let field = |q: &[f64], s: f64| -> Result<Vec<f64>> {
        fol.metric.check_point(q).map_err(|_| GeomError::LeftDomain { s, exit: q.to_vec() })?;
        fol.normal_at(q)
    };
    let accel_norm = |q: &[f64]| -> Result<f64> {
        let a = fol.acceleration_at(q)?;
        Ok(fol.metric.g(q).form(&a, &a).max(0.0).sqrt())
    };
    max_accel = max_accel.max(accel_norm(&p)?);
    for k in 0..steps {
        let s = k as f64 * h;
        let k1 = field(&p, s)?;
        let k2 = field(&axpy(0.5 * h, &k1, &p), s + 0.5 * h)?;
        let k3 = field(&axpy(0.5 * h, &k2, &p), s + 0.5 * h)?;
        let k4 = field(&axpy(h, &k3, &p), s + h)?;
        let vel: Vec<f64> = (0..p.len()).map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0).collect();
        speed_defect = speed_defect.max((fol.metric.g(&p).form(&vel, &vel) + 1.0).abs());
        p = axpy(h, &vel, &p);
        fol.metric.check_point(&p).map_err(|_| GeomError::LeftDomain { s: s + h, exit: p.clone() })?;
        max_accel = max_accel.max(accel_norm(&p)?);
        samples.push((s + h, p.clone()));
    }
    Ok(NormalCurve { samples, geodesic: max_accel < 1e-8, max_accel, speed_defect })
}
