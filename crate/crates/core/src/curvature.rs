//! Levi-Civita connection and curvature.
//!
//! Sign convention, used everywhere in the crate:
//!
//! * `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`
//! * `R_ABCD = g(R(E_A, E_B)E_C, E_D)`
//! * `Ric(X,Y) = Σ_A ε_A g(R(E_A, X)Y, E_A)`, positive on spheres.
//!
//! With this convention a space of constant sectional curvature `c` has
//! `R(X,Y)Z = c(g(Y,Z)X − g(X,Z)Y)`, i.e. `R_ABCD = c(g_AD g_BC − g_AC g_BD)`.

use serde::Serialize;

use crate::chart_metrics::{ChartPoint, MetricField};
use crate::dual::{seed_axis, Dual, Scalar};
use crate::error::{GeomError, Result};
use crate::linalg::{dot, Mat};

/// `Γ^a_{bc}` at one point, stored as `gamma[(a·d + b)·d + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionCoeffs<S> {
    pub dim: usize,
    pub gamma: Vec<S>,
}

impl<S: Scalar> ConnectionCoeffs<S> {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> S {
        self.gamma[(a * self.dim + b) * self.dim + c]
    }

    /// `Γ(X, Y)^a = Γ^a_{bc} X^b Y^c`.
    pub fn contract(&self, x: &[S], y: &[S]) -> Vec<S> {
        let d = self.dim;
        (0..d)
            .map(|a| {
                let mut acc = S::zero();
                for b in 0..d {
                    for c in 0..d {
                        acc += self.get(a, b, c) * x[b] * y[c];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_torsion(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    worst = worst.max((self.get(a, b, c) - self.get(a, c, b)).re().abs());
                }
            }
        }
        worst
    }
}

/// Levi-Civita coefficients, generic over the scalar type.
pub fn connection_at<S: Scalar>(metric: &MetricField, p: &[S]) -> Result<ConnectionCoeffs<S>> {
    let d = p.len();
    let (g, dg) = metric.g_and_partials(p);
    let ginv = g
        .inverse()
        .ok_or_else(|| GeomError::SingularMetric { point: p.iter().map(|x| x.re()).collect() })?;
    let mut gamma = vec![S::zero(); d * d * d];
    // lowered Γ_{d,bc} = ½(∂_b g_dc + ∂_c g_bd − ∂_d g_bc)
    let mut low = vec![S::zero(); d * d * d];
    for e in 0..d {
        for b in 0..d {
            for c in b..d {
                let v = (dg[b][(e, c)] + dg[c][(b, e)] - dg[e][(b, c)]).scale(0.5);
                low[(e * d + b) * d + c] = v;
                low[(e * d + c) * d + b] = v;
            }
        }
    }
    for a in 0..d {
        for b in 0..d {
            for c in b..d {
                let mut acc = S::zero();
                for e in 0..d {
                    acc += ginv[(a, e)] * low[(e * d + b) * d + c];
                }
                gamma[(a * d + b) * d + c] = acc;
                gamma[(a * d + c) * d + b] = acc;
            }
        }
    }
    Ok(ConnectionCoeffs { dim: d, gamma })
}

/// Christoffel symbols `Γ^A_{BC}` at `p`.
pub fn christoffel(metric: &MetricField, p: &ChartPoint) -> Result<ConnectionCoeffs<f64>> {
    metric.check_point(p)?;
    connection_at(metric, p.coords())
}

/// Largest component of `∇_C g_AB`; zero for a metric-compatible connection.
pub fn metric_compatibility_defect(metric: &MetricField, p: &ChartPoint) -> Result<f64> {
    let gam = christoffel(metric, p)?;
    let (g, dg) = metric.g_and_partials(p.coords());
    let d = metric.dim();
    let mut worst = 0.0f64;
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                let mut v = dg[c][(a, b)];
                for e in 0..d {
                    v -= gam.get(e, c, a) * g[(e, b)] + gam.get(e, c, b) * g[(a, e)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Basis on which curvature components are reported.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Coordinate,
    /// Vectors in chart components; expected orthonormal for frame contractions.
    Frame(Vec<Vec<f64>>),
}

/// Curvature at one point, everything precomputed in coordinates.
#[derive(Clone, Debug)]
pub struct CurvatureAt {
    pub dim: usize,
    pub g: Mat<f64>,
    /// `R_abcd = g(R(∂_a,∂_b)∂_c, ∂_d)`, `[((a·d + b)·d + c)·d + e]`.
    low: Vec<f64>,
}

impl CurvatureAt {
    pub fn new(metric: &MetricField, p: &ChartPoint) -> Result<Self> {
        metric.check_point(p)?;
        let d = metric.dim();
        let x = p.coords();
        let gam = connection_at(metric, x)?;
        // ∂_a Γ^e_{bc}
        let dgam: Vec<ConnectionCoeffs<f64>> = (0..d)
            .map(|a| {
                connection_at::<Dual<f64>>(metric, &seed_axis(x, a)).map(|c| ConnectionCoeffs {
                    dim: d,
                    gamma: c.gamma.iter().map(|v| v.eps).collect(),
                })
            })
            .collect::<Result<_>>()?;
        let mut op = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = dgam[a].get(e, b, c) - dgam[b].get(e, a, c);
                        for f in 0..d {
                            v += gam.get(e, a, f) * gam.get(f, b, c) - gam.get(e, b, f) * gam.get(f, a, c);
                        }
                        op[((a * d + b) * d + c) * d + e] = v;
                    }
                }
            }
        }
        let g = metric.g(x);
        let mut low = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mut v = 0.0;
                        for e in 0..d {
                            v += g[(dd, e)] * op[((a * d + b) * d + c) * d + e];
                        }
                        low[((a * d + b) * d + c) * d + dd] = v;
                    }
                }
            }
        }
        Ok(Self { dim: d, g, low })
    }

    #[inline]
    pub fn coord(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.dim;
        self.low[((a * d + b) * d + c) * d + e]
    }

    /// `g(R(X,Y)Z, W)` for vectors in chart components.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                if y[b] == 0.0 {
                    continue;
                }
                for c in 0..d {
                    if z[c] == 0.0 {
                        continue;
                    }
                    let base = ((a * d + b) * d + c) * d;
                    let s: f64 = (0..d).map(|e| self.low[base + e] * w[e]).sum();
                    acc += x[a] * y[b] * z[c] * s;
                }
            }
        }
        acc
    }

    /// Coordinate Ricci tensor as the trace `Ric_bc = (R(∂_a,∂_b)∂_c)^a`.
    pub fn ricci_coordinate(&self) -> Mat<f64> {
        let d = self.dim;
        let ginv = self.g.inverse().expect("metric checked invertible");
        Mat::from_fn(d, |b, c| {
            let mut acc = 0.0;
            for a in 0..d {
                for e in 0..d {
                    acc += ginv[(a, e)] * self.coord(a, b, c, e);
                }
            }
            acc
        })
    }

    /// `Ric(X,Y) = Σ_A ε_A g(R(E_A,X)Y, E_A)` over an orthonormal frame.
    pub fn ricci_by_frame(&self, frame: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
        frame
            .iter()
            .map(|e| {
                let eps = self.g.form(e, e).signum();
                eps * self.eval(e, x, y, e)
            })
            .sum()
    }

    pub fn tensor(&self, basis: &Basis) -> CurvatureTensor {
        let d = self.dim;
        match basis {
            Basis::Coordinate => CurvatureTensor {
                dim: d,
                riemann_low: self.low.clone(),
                ricci_std: self.ricci_coordinate(),
                gram: self.g.clone(),
            },
            Basis::Frame(frame) => {
                let mut low = vec![0.0; d * d * d * d];
                for a in 0..d {
                    for b in 0..d {
                        for c in 0..d {
                            for e in 0..d {
                                low[((a * d + b) * d + c) * d + e] =
                                    self.eval(&frame[a], &frame[b], &frame[c], &frame[e]);
                            }
                        }
                    }
                }
                let gram = Mat::from_fn(d, |i, j| self.g.form(&frame[i], &frame[j]));
                let ricci = Mat::from_fn(d, |i, j| {
                    (0..d)
                        .map(|a| gram[(a, a)].signum() * low[((a * d + i) * d + j) * d + a])
                        .sum()
                });
                CurvatureTensor { dim: d, riemann_low: low, ricci_std: ricci, gram }
            }
        }
    }
}

/// Riemann tensor with all indices lowered, plus the Ricci tensor, in a chosen basis.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureTensor {
    pub dim: usize,
    pub riemann_low: Vec<f64>,
    pub ricci_std: Mat<f64>,
    /// Gram matrix of the basis.
    pub gram: Mat<f64>,
}

impl CurvatureTensor {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.dim;
        self.riemann_low[((a * d + b) * d + c) * d + e]
    }

    /// Worst violation over the two antisymmetries, pair symmetry and first Bianchi.
    pub fn symmetry_violation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let r = self.get(a, b, c, e);
                        worst = worst
                            .max((r + self.get(b, a, c, e)).abs())
                            .max((r + self.get(a, b, e, c)).abs())
                            .max((r - self.get(c, e, a, b)).abs())
                            .max((r + self.get(b, c, a, e) + self.get(c, a, b, e)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest deviation from `c(g_AD g_BC − g_AC g_BD)`.
    pub fn constant_curvature_deviation(&self, c: f64) -> f64 {
        let d = self.dim;
        let g = &self.gram;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                for cc in 0..d {
                    for e in 0..d {
                        let want = c * (g[(a, e)] * g[(b, cc)] - g[(a, cc)] * g[(b, e)]);
                        worst = worst.max((self.get(a, b, cc, e) - want).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Riemann tensor at `p` in the requested basis.
pub fn riemann(metric: &MetricField, p: &ChartPoint, basis: &Basis) -> Result<CurvatureTensor> {
    Ok(CurvatureAt::new(metric, p)?.tensor(basis))
}

/// Orthonormal frame of `g` from its eigen-decomposition; works for any metric.
pub fn orthonormal_frame(g: &Mat<f64>) -> Vec<Vec<f64>> {
    let m = g.to_nalgebra();
    let eig = m.symmetric_eigen();
    (0..g.dim())
        .map(|k| {
            let s = eig.eigenvalues[k].abs().sqrt();
            eig.eigenvectors.column(k).iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Constant `c` such that `Scal = n(n+1)c`.
pub fn scalar_curvature_constant(metric: &MetricField, p: &ChartPoint) -> Result<f64> {
    let curv = CurvatureAt::new(metric, p)?;
    let ric = curv.ricci_coordinate();
    let ginv = curv.g.inverse().ok_or(GeomError::SingularMetric { point: p.to_vec() })?;
    let d = metric.dim();
    let scal: f64 = (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).map(|(a, b)| ginv[(a, b)] * ric[(a, b)]).sum();
    Ok(scal / (d as f64 * (d - 1) as f64))
}

/// Normalised Ricci curvature in the direction of a unit timelike `N`: `−(1/n)Ric(N,N)`.
pub fn ric_direction(metric: &MetricField, p: &ChartPoint, normal: &[f64]) -> Result<f64> {
    let curv = CurvatureAt::new(metric, p)?;
    ric_direction_with(&curv, normal)
}

pub fn ric_direction_with(curv: &CurvatureAt, normal: &[f64]) -> Result<f64> {
    let norm = curv.g.form(normal, normal);
    if (norm + 1.0).abs() > 1e-9 {
        return Err(GeomError::NotUnitTimelike { norm });
    }
    let ric = curv.ricci_coordinate();
    let n = (curv.dim - 1) as f64;
    Ok(-ric.form(normal, normal) / n)
}

/// `κ(v) = g(R(v,N)N, v)` for unit spacelike `v ⟂ N`.
pub fn radial_curvature(metric: &MetricField, p: &ChartPoint, normal: &[f64], v: &[f64]) -> Result<f64> {
    let curv = CurvatureAt::new(metric, p)?;
    radial_curvature_with(&curv, normal, v)
}

pub fn radial_curvature_with(curv: &CurvatureAt, normal: &[f64], v: &[f64]) -> Result<f64> {
    let nn = curv.g.form(normal, normal);
    if (nn + 1.0).abs() > 1e-9 {
        return Err(GeomError::NotUnitTimelike { norm: nn });
    }
    let vv = curv.g.form(v, v);
    let vn = curv.g.form(v, normal);
    if (vv - 1.0).abs() > 1e-9 || vn.abs() > 1e-9 {
        return Err(GeomError::BadFrameVector { norm: vv, cross: vn });
    }
    Ok(curv.eval(v, normal, normal, v))
}

/// `g(u, v)` with the metric at `p`.
pub fn inner(g: &Mat<f64>, u: &[f64], v: &[f64]) -> f64 {
    dot(u, &g.mul_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart_metrics::{zoo_build, SpacetimeSpec};

    fn metric(spec: SpacetimeSpec) -> MetricField {
        zoo_build(&spec).unwrap().0
    }

    fn rw() -> MetricField {
        metric(SpacetimeSpec::RobertsonWalker { a: vec![1.0, 0.0, 0.1], n: 3 })
    }

    #[test]
    fn flat_connection_and_curvature_vanish() {
        let m = metric(SpacetimeSpec::Minkowski { n: 3 });
        let p: ChartPoint = vec![0.3, 1.0, 2.0, 0.5].into();
        assert!(christoffel(&m, &p).unwrap().gamma.iter().all(|&x| x == 0.0));
        let r = riemann(&m, &p, &Basis::Coordinate).unwrap();
        assert!(r.riemann_low.iter().all(|&x| x == 0.0));
        assert_eq!(ric_direction(&m, &p, &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn robertson_walker_christoffels_by_hand() {
        let m = rw();
        let t = 0.7;
        let (a, da) = (1.0 + 0.1 * t * t, 0.2 * t);
        let p: ChartPoint = vec![0.1, 0.2, 0.3, t].into();
        let gam = christoffel(&m, &p).unwrap();
        assert!((gam.get(3, 0, 0) - a * da).abs() < 1e-14);
        assert!((gam.get(0, 3, 0) - da / a).abs() < 1e-14);
        assert!((gam.get(0, 0, 3) - da / a).abs() < 1e-14);
        assert!(gam.max_torsion() == 0.0);
        assert!(metric_compatibility_defect(&m, &p).unwrap() < 1e-14);
    }

    #[test]
    fn slab_christoffel_by_hand() {
        let m = metric(SpacetimeSpec::SlabCounterexample { amplitude: 1.0 });
        let z = 2.2;
        let p: ChartPoint = vec![0.0, 0.0, z].into();
        let gam = christoffel(&m, &p).unwrap();
        let phi = crate::chart_metrics::slab_phi(1.0, z);
        let dphi = crate::chart_metrics::slab_phi_prime(1.0, z);
        assert!((gam.get(2, 0, 0) - dphi * (2.0 * phi).exp()).abs() < 1e-13);
    }

    #[test]
    fn de_sitter_has_constant_curvature_one() {
        let m = metric(SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 });
        let p: ChartPoint = vec![0.5, 1.5, 2.5, 0.4].into();
        let curv = CurvatureAt::new(&m, &p).unwrap();
        let frame = orthonormal_frame(&curv.g);
        let t = curv.tensor(&Basis::Frame(frame));
        assert!(t.symmetry_violation() < 1e-12);
        assert!(t.constant_curvature_deviation(1.0) < 1e-12);
        assert!((scalar_curvature_constant(&m, &p).unwrap() - 1.0).abs() < 1e-12);
        let n = [0.0, 0.0, 0.0, 1.0];
        assert!((ric_direction(&m, &p, &n).unwrap() - 1.0).abs() < 1e-12);
        let a = (0.4f64).exp();
        let v = [1.0 / a, 0.0, 0.0, 0.0];
        assert!((radial_curvature(&m, &p, &n, &v).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn robertson_walker_radial_curvature_is_minus_a_ddot_over_a() {
        let m = rw();
        let t = -0.6;
        let a = 1.0 + 0.1 * t * t;
        let p: ChartPoint = vec![0.0, 0.0, 0.0, t].into();
        let n = [0.0, 0.0, 0.0, 1.0];
        for axis in 0..3 {
            let mut v = [0.0; 4];
            v[axis] = 1.0 / a;
            let k = radial_curvature(&m, &p, &n, &v).unwrap();
            assert!((k + 0.2 / a).abs() < 1e-13);
        }
        assert!((ric_direction(&m, &p, &n).unwrap() - 0.2 / a).abs() < 1e-13);
    }

    #[test]
    fn ricci_contractions_agree() {
        let m = metric(SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 });
        let p: ChartPoint = vec![0.4, 1.1, 0.0].into();
        let curv = CurvatureAt::new(&m, &p).unwrap();
        let frame = orthonormal_frame(&curv.g);
        let coord = curv.ricci_coordinate();
        for x in &frame {
            for y in &frame {
                let a = curv.ricci_by_frame(&frame, x, y);
                assert!((a - coord.form(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_vectors_are_rejected() {
        let m = rw();
        let p: ChartPoint = vec![0.0, 0.0, 0.0, 0.0].into();
        assert!(matches!(
            ric_direction(&m, &p, &[0.0, 0.0, 0.0, 2.0]),
            Err(GeomError::NotUnitTimelike { .. })
        ));
        assert!(matches!(
            radial_curvature(&m, &p, &[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.5]),
            Err(GeomError::BadFrameVector { .. })
        ));
    }
}
