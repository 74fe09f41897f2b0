//! The scalar Riccati equation `y′ = −(y² + κ)` and its use along normal geodesics.
//!
//! Along a geodesic normal congruence the engine's shape operator obeys `h′ = h² + κ`,
//! so `y = −λ` for each eigenvalue `λ` of `h` solves the equation above.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::chart_metrics::ChartPoint;
use crate::curvature::{radial_curvature_with, scalar_curvature_constant, Basis, CurvatureAt};
use crate::error::{GeomError, Result};
use crate::foliation_geometry::{adapted_frame, shape_operator, Foliation};
use crate::linalg::axpy;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiParams {
    pub kappa: f64,
    pub h0: f64,
}

impl RiccatiParams {
    pub fn new(kappa: f64, h0: f64) -> Result<Self> {
        if kappa.is_finite() && h0.is_finite() {
            Ok(Self { kappa, h0 })
        } else {
            Err(GeomError::InvalidParams(format!("kappa = {kappa}, h0 = {h0} must be finite")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Tan,
    Rational,
    TanhInterior,
    CothExterior,
    Equilibrium,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiccatiSolution {
    pub params: RiccatiParams,
    pub branch: Branch,
    pub blow_up: Option<f64>,
}

fn acoth(x: f64) -> f64 {
    0.5 * ((x + 1.0) / (x - 1.0)).ln()
}

impl RiccatiSolution {
    /// `h(s)`; NaN at or beyond the blow-up.
    pub fn evaluate(&self, s: f64) -> f64 {
        if self.blow_up.is_some_and(|b| s >= b) {
            return f64::NAN;
        }
        let RiccatiParams { kappa, h0 } = self.params;
        match self.branch {
            Branch::Tan => {
                let r = kappa.sqrt();
                r * ((h0 / r).atan() - r * s).tan()
            }
            Branch::Rational => h0 / (1.0 + h0 * s),
            Branch::TanhInterior => {
                let a = (-kappa).sqrt();
                a * ((h0 / a).atanh() + a * s).tanh()
            }
            Branch::CothExterior => {
                let a = (-kappa).sqrt();
                a / (a * s + acoth(h0 / a)).tanh()
            }
            Branch::Equilibrium => h0,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let h = self.evaluate(s);
        -(h * h + self.params.kappa)
    }
}

pub fn riccati_closed_form(params: RiccatiParams) -> RiccatiSolution {
    let RiccatiParams { kappa, h0 } = params;
    let (branch, blow_up) = if kappa > 0.0 {
        let r = kappa.sqrt();
        (Branch::Tan, Some(((h0 / r).atan() + FRAC_PI_2) / r))
    } else if kappa == 0.0 {
        (Branch::Rational, (h0 < 0.0).then(|| -1.0 / h0))
    } else {
        let a = (-kappa).sqrt();
        if h0.abs() == a {
            (Branch::Equilibrium, None)
        } else if h0.abs() < a {
            (Branch::TanhInterior, None)
        } else {
            (Branch::CothExterior, (h0 < -a).then(|| -acoth(h0 / a) / a))
        }
    };
    RiccatiSolution { params, branch, blow_up }
}

/// Numerical solution sampled at accepted steps.
#[derive(Clone, Debug, Serialize)]
pub struct RiccatiTrajectory {
    pub samples: Vec<(f64, f64)>,
    pub blow_up: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl RiccatiTrajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,h\n");
        for (s, h) in &self.samples {
            out.push_str(&format!("{s:.17e},{h:.17e}\n"));
        }
        out
    }
}

fn rk4(f: &impl Fn(f64, f64) -> f64, s: f64, v: f64, h: f64) -> f64 {
    let k1 = f(s, v);
    let k2 = f(s + 0.5 * h, v + 0.5 * h * k1);
    let k3 = f(s + 0.5 * h, v + 0.5 * h * k2);
    let k4 = f(s + h, v + h * k3);
    v + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
}

fn double_step(f: &impl Fn(f64, f64) -> f64, s: f64, v: f64, h: f64) -> (f64, f64) {
    let one = rk4(f, s, v, h);
    let half = rk4(f, s, v, 0.5 * h);
    let two = rk4(f, s + 0.5 * h, half, 0.5 * h);
    (two + (two - one) / 15.0, (two - one).abs() / 15.0)
}

/// Adaptive RK4 (step doubling) for `y′ = −(y² + κ(s))`.
///
/// While `|y| > 1` the solver advances `w = 1/y`, which obeys `w′ = 1 + κ w²`;
/// blow-up to `−∞` is the zero crossing of `w` and is located by bisection on the step.
pub fn riccati_integrate_with(kappa: impl Fn(f64) -> f64, h0: f64, s_max: f64, tol: f64) -> Result<RiccatiTrajectory> {
    if !(s_max > 0.0) || !(tol > 0.0) || !h0.is_finite() {
        return Err(GeomError::InvalidParams(format!("need s_max > 0, tol > 0, finite h0 (got {s_max}, {tol}, {h0})")));
    }
    let fy = |s: f64, y: f64| -(y * y + kappa(s));
    let fw = |s: f64, w: f64| 1.0 + kappa(s) * w * w;
    let eps = 1e-2 * tol;
    let mut reciprocal = h0.abs() > 1.0;
    let mut v = if reciprocal { 1.0 / h0 } else { h0 };
    let mut s = 0.0;
    let mut h = (1e-2f64).min(s_max);
    let mut out = RiccatiTrajectory { samples: vec![(0.0, h0)], blow_up: None, accepted: 0, rejected: 0 };
    while s < s_max {
        h = h.min(s_max - s);
        if h < 1e-12 {
            out.blow_up = Some(s);
            break;
        }
        let (new, err) = if reciprocal { double_step(&fw, s, v, h) } else { double_step(&fy, s, v, h) };
        let scale = new.abs().max(1.0);
        if !err.is_finite() || !new.is_finite() || err > eps * scale {
            out.rejected += 1;
            let shrink = if err.is_finite() && err > 0.0 { 0.9 * (eps * scale / err).powf(0.2) } else { 0.1 };
            h *= shrink.clamp(0.1, 0.9);
            continue;
        }
        if reciprocal && v < 0.0 && new >= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if double_step(&fw, s, v, mid).0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * (s + hi) {
                    break;
                }
            }
            out.blow_up = Some(s + 0.5 * (lo + hi));
            break;
        }
        out.accepted += 1;
        s += h;
        v = new;
        out.samples.push((s, if reciprocal { 1.0 / v } else { v }));
        if !reciprocal && v.abs() > 1.0 {
            reciprocal = true;
            v = 1.0 / v;
        } else if reciprocal && v.abs() > 1.0 {
            reciprocal = false;
            v = 1.0 / v;
        }
        let grow = if err > 0.0 { 0.9 * (eps * scale / err).powf(0.2) } else { 5.0 };
        h *= grow.clamp(1.0, 5.0);
    }
    Ok(out)
}

pub fn riccati_integrate(params: RiccatiParams, s_max: f64, tol: f64) -> Result<RiccatiTrajectory> {
    riccati_integrate_with(|_| params.kappa, params.h0, s_max, tol)
}

/// `|numeric − closed| / max(1, |closed|)` over samples at distance ≥ `margin` from the blow-up.
pub fn closed_form_gap(traj: &RiccatiTrajectory, sol: &RiccatiSolution, margin: f64) -> f64 {
    traj.samples
        .iter()
        .filter(|(s, _)| sol.blow_up.is_none_or(|b| *s < b - margin))
        .map(|&(s, y)| {
            let want = sol.evaluate(s);
            (y - want).abs() / want.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Eigenvalues of `h` (ascending) with the radial curvature along each eigenvector.
pub fn radial_spectrum(fol: &Foliation, p: &ChartPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let ex = shape_operator(fol, p)?;
    let frame = fol.frame_at(p.coords())?;
    let n = fol.leaf_dim();
    let eig = ex.h.to_nalgebra().symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let col = eig.eigenvectors.column(j);
            let mut v = vec![0.0; fol.dim()];
            for (i, e) in frame[..n].iter().enumerate() {
                v = axpy(col[i], e, &v);
            }
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let curv = CurvatureAt::new(&fol.metric, p)?;
    let kappas = pairs.iter().map(|(_, v)| radial_curvature_with(&curv, &frame[n], v)).collect::<Result<_>>()?;
    Ok((pairs.into_iter().map(|x| x.0).collect(), kappas))
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationSample {
    pub s: f64,
    pub point: Vec<f64>,
    /// Riccati-propagated eigenvalues of `h`, ascending.
    pub propagated: Vec<f64>,
    /// Eigenvalues of `h` measured at the curve point, ascending.
    pub measured: Vec<f64>,
    pub kappa: Vec<f64>,
    pub accel: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationReport {
    pub start: Vec<f64>,
    pub s_max: f64,
    pub samples: Vec<PropagationSample>,
    /// `max |propagated − measured|` over samples and eigenvalues.
    pub max_deviation: f64,
    /// Largest minus smallest propagated eigenvalue over the whole run.
    pub spread: f64,
}

const GEODESIC_TOL: f64 = 1e-8;

fn accel_norm(fol: &Foliation, p: &[f64]) -> Result<f64> {
    let a = fol.acceleration_at(p)?;
    Ok(fol.metric.g(p).form(&a, &a).max(0.0).sqrt())
}

/// Propagates each eigenvalue of `h` with its own Riccati equation along the normal geodesic,
/// re-measuring κ at every stage, and compares with `h` measured on the curve.
pub fn propagate_spectrum(fol: &Foliation, p0: &ChartPoint, s_max: f64, ds: f64) -> Result<PropagationReport> {
    fol.metric.check_point(p0)?;
    let d = fol.dim();
    let n = fol.leaf_dim();
    let (eig0, _) = radial_spectrum(fol, p0)?;
    // state: chart point followed by y_i = −λ_i
    let mut state: Vec<f64> = p0.to_vec();
    state.extend(eig0.iter().map(|l| -l));
    let rhs = |st: &[f64], s: f64| -> Result<Vec<f64>> {
        let p = ChartPoint::from(st[..d].to_vec());
        fol.metric.check_point(&p).map_err(|_| GeomError::LeftDomain { s, exit: p.to_vec() })?;
        let accel = accel_norm(fol, &p)?;
        if accel >= GEODESIC_TOL {
            return Err(GeomError::NotGeodesicNormal { accel });
        }
        let mut out = fol.normal_at(&p)?;
        let (_, kappas) = radial_spectrum(fol, &p)?;
        // y is sorted opposite to λ
        for i in 0..n {
            let y = st[d + i];
            out.push(-(y * y + kappas[n - 1 - i]));
        }
        Ok(out)
    };
    let steps = (s_max / ds).ceil().max(1.0) as usize;
    let h = s_max / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut record = |st: &[f64], s: f64| -> Result<()> {
        let p = ChartPoint::from(st[..d].to_vec());
        let (measured, kappa) = radial_spectrum(fol, &p)?;
        let mut propagated: Vec<f64> = st[d..].iter().map(|y| -y).collect();
        propagated.sort_by(f64::total_cmp);
        samples.push(PropagationSample { s, point: p.to_vec(), propagated, measured, kappa, accel: accel_norm(fol, &p)? });
        Ok(())
    };
    let a0 = accel_norm(fol, p0)?;
    if a0 >= GEODESIC_TOL {
        return Err(GeomError::NotGeodesicNormal { accel: a0 });
    }
    record(&state, 0.0)?;
    for k in 0..steps {
        let s = k as f64 * h;
        let k1 = rhs(&state, s)?;
        let k2 = rhs(&axpy(0.5 * h, &k1, &state), s + 0.5 * h)?;
        let k3 = rhs(&axpy(0.5 * h, &k2, &state), s + 0.5 * h)?;
        let k4 = rhs(&axpy(h, &k3, &state), s + h)?;
        for i in 0..state.len() {
            state[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        record(&state, s + h)?;
    }
    let max_deviation = samples
        .iter()
        .flat_map(|x| x.propagated.iter().zip(&x.measured).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let all = samples.iter().flat_map(|x| x.propagated.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(PropagationReport { start: p0.to_vec(), s_max, samples, max_deviation, spread: hi - lo })
}

#[derive(Clone, Debug, Serialize)]
pub struct UmbilicityCheck {
    pub holds: bool,
    pub measured_c: f64,
    pub max_curvature_deviation: f64,
    pub initial_umb_dev: f64,
    pub max_umb_dev: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Umbilicity at `p0` persists along the normal geodesic in constant curvature.
pub fn umbilicity_propagation_check(fol: &Foliation, p0: &ChartPoint, s_max: f64, tol: f64) -> Result<UmbilicityCheck> {
    fol.metric.check_point(p0)?;
    let c = scalar_curvature_constant(&fol.metric, p0)?;
    let steps = 50usize;
    let curve = crate::foliation_geometry::normal_curve(fol, p0, s_max, s_max / steps as f64)?;
    let mut worst_cc = 0.0f64;
    let mut samples = Vec::with_capacity(curve.samples.len());
    for (s, p) in &curve.samples {
        let q = ChartPoint::from(p.clone());
        let frame = adapted_frame(fol, &q)?.e;
        let dev = CurvatureAt::new(&fol.metric, &q)?.tensor(&Basis::Frame(frame)).constant_curvature_deviation(c);
        worst_cc = worst_cc.max(dev);
        if worst_cc >= 1e-8 {
            return Err(GeomError::NotConstantCurvature { deviation: worst_cc });
        }
        let accel = accel_norm(fol, p)?;
        if accel >= GEODESIC_TOL {
            return Err(GeomError::NotGeodesicNormal { accel });
        }
        samples.push((*s, shape_operator(fol, &q)?.umb_dev));
    }
    let initial = samples[0].1;
    let max_umb = samples.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(UmbilicityCheck {
        holds: initial >= tol || max_umb < tol,
        measured_c: c,
        max_curvature_deviation: worst_cc,
        initial_umb_dev: initial,
        max_umb_dev: max_umb,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafUmbilicity {
    pub leaf: f64,
    pub points: usize,
    pub max_umb_dev: f64,
    pub max_h_norm: f64,
}

/// Per-leaf umbilicity statistics on a `nodes`-per-axis grid over the sample box's spatial axes.
pub fn umbilicity_scan(fol: &Foliation, leaves: &[f64], nodes: usize) -> Result<Vec<LeafUmbilicity>> {
    let bx = &fol.metric.sample_box;
    let n = fol.leaf_dim();
    let nodes = nodes.max(1);
    leaves
        .iter()
        .map(|&leaf| {
            let mut max_umb = 0.0f64;
            let mut max_h = 0.0f64;
            let total = nodes.pow(n as u32);
            for mut k in 0..total {
                let u: Vec<f64> = (0..n)
                    .map(|a| {
                        let i = k % nodes;
                        k /= nodes;
                        let t = if nodes == 1 { 0.5 } else { i as f64 / (nodes - 1) as f64 };
                        bx.lo[a] + t * (bx.hi[a] - bx.lo[a])
                    })
                    .collect();
                let p = fol.leaf_point(&u, leaf)?;
                let ex = shape_operator(fol, &p)?;
                max_umb = max_umb.max(ex.umb_dev);
                max_h = max_h.max(ex.h.frobenius());
            }
            Ok(LeafUmbilicity { leaf, points: total, max_umb_dev: max_umb, max_h_norm: max_h })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart_metrics::{slab_phi_prime, zoo_build, SpacetimeSpec};
    use std::f64::consts::PI;

    fn sol(kappa: f64, h0: f64) -> RiccatiSolution {
        riccati_closed_form(RiccatiParams::new(kappa, h0).unwrap())
    }

    #[test]
    fn closed_form_examples() {
        let s = sol(0.0, -1.0);
        assert_eq!((s.branch, s.blow_up), (Branch::Rational, Some(1.0)));
        assert!((s.evaluate(0.5) + 2.0).abs() < 1e-15);

        let s = sol(1.0, 0.0);
        assert_eq!(s.branch, Branch::Tan);
        assert!((s.blow_up.unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((s.evaluate(0.7) + 0.7f64.tan()).abs() < 1e-14);

        let s = sol(-1.0, 0.0);
        assert_eq!((s.branch, s.blow_up), (Branch::TanhInterior, None));
        assert!((s.evaluate(1.0) - 0.761594155955765).abs() < 1e-12);

        let s = sol(-1.0, -2.0);
        assert_eq!(s.branch, Branch::CothExterior);
        assert!((s.blow_up.unwrap() - 3.0f64.ln() / 2.0).abs() < 1e-14);
        assert_eq!(sol(-4.0, 2.0).branch, Branch::Equilibrium);
        assert_eq!(sol(-1.0, 3.0).blow_up, None);
    }

    #[test]
    fn closed_form_satisfies_the_ode() {
        for (k, h0) in [(2.0, 1.5), (0.0, 0.3), (-1.5, 0.4), (-1.5, 3.0), (-1.5, -3.0), (3.0, -7.0)] {
            let sl = sol(k, h0);
            for s in [0.0, 0.05, 0.1, 0.2] {
                if sl.blow_up.is_some_and(|b| s > b - 1e-2) {
                    continue;
                }
                let dh = (sl.evaluate(s + 1e-6) - sl.evaluate(s - 1e-6)) / 2e-6;
                let scale = sl.evaluate(s).abs().max(1.0).powi(2);
                assert!((dh - sl.derivative(s)).abs() / scale < 1e-6);
            }
        }
    }

    #[test]
    fn integrator_examples() {
        let t = riccati_integrate(RiccatiParams::new(1.0, 0.0).unwrap(), 3.0, 1e-10).unwrap();
        assert!((t.blow_up.unwrap() - PI / 2.0).abs() < 1e-6);
        let t = riccati_integrate(RiccatiParams::new(0.0, 1.0).unwrap(), 10.0, 1e-10).unwrap();
        assert_eq!(t.blow_up, None);
        assert!((t.samples.last().unwrap().1 - 1.0 / 11.0).abs() < 1e-9);
        let p = RiccatiParams::new(-1.0, -2.0).unwrap();
        let t = riccati_integrate(p, 3.0, 1e-10).unwrap();
        assert!((t.blow_up.unwrap() - riccati_closed_form(p).blow_up.unwrap()).abs() < 1e-6);
        let csv = t.to_csv();
        assert!(csv.starts_with("s,h\n0.0"));
    }

    #[test]
    fn integrator_tracks_closed_form_on_a_coarse_grid() {
        for k in [-4.0, -1.0, 0.0, 0.5, 4.0] {
            for h0 in [-10.0, -2.0, -0.5, 0.0, 1.0, 10.0] {
                let p = RiccatiParams::new(k, h0).unwrap();
                let t = riccati_integrate(p, 2.0, 1e-10).unwrap();
                let c = riccati_closed_form(p);
                assert!(closed_form_gap(&t, &c, 1e-3) < 1e-8, "k={k} h0={h0}");
                match (t.blow_up, c.blow_up) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-6),
                    (None, Some(b)) => assert!(b > 2.0 - 1e-6, "k={k} h0={h0}"),
                    (Some(a), None) => panic!("spurious blow-up at {a}"),
                    (None, None) => {}
                }
            }
        }
    }

    #[test]
    fn de_sitter_spectrum_stays_at_minus_one() {
        let (_, f) = zoo_build(&SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 }).unwrap();
        let r = propagate_spectrum(&f, &vec![0.5, 0.5, 0.5, -0.5].into(), 1.0, 0.05).unwrap();
        assert!(r.spread < 1e-8, "{}", r.spread);
        assert!(r.max_deviation < 1e-8);
        assert!(r.samples.iter().all(|x| x.propagated.iter().all(|v| (v + 1.0).abs() < 1e-8)));
    }

    #[test]
    fn hyperboloid_spectrum_follows_inverse_time() {
        let (_, f) = zoo_build(&SpacetimeSpec::MinkowskiHyperboloids { n: 3 }).unwrap();
        let r = propagate_spectrum(&f, &vec![0.0, 0.0, 0.0, 1.0].into(), 1.0, 0.01).unwrap();
        assert!(r.max_deviation < 1e-6, "{}", r.max_deviation);
        let last = r.samples.last().unwrap();
        assert!(last.propagated.iter().all(|v| (v + 0.5).abs() < 1e-6));
    }

    #[test]
    fn tilted_normal_is_rejected_as_non_geodesic() {
        let (_, f) = zoo_build(&SpacetimeSpec::MinkowskiTilted { eps: 0.5 }).unwrap();
        let e = propagate_spectrum(&f, &vec![1.0, 0.0, 0.0].into(), 0.5, 0.05).unwrap_err();
        assert!(matches!(e, GeomError::NotGeodesicNormal { .. }));
    }

    #[test]
    fn umbilicity_persists_in_constant_curvature() {
        for spec in [SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 }, SpacetimeSpec::MinkowskiHyperboloids { n: 3 }] {
            let (m, f) = zoo_build(&spec).unwrap();
            let p0 = ChartPoint::from(m.sample_box.map_unit(&[0.5, 0.5, 0.5, 0.0]));
            let r = umbilicity_propagation_check(&f, &p0, 1.0, 1e-8).unwrap();
            assert!(r.holds && r.initial_umb_dev < 1e-8);
        }
    }

    #[test]
    fn slab_fails_the_constant_curvature_precondition() {
        let (_, f) = zoo_build(&SpacetimeSpec::SlabCounterexample { amplitude: 1.0 }).unwrap();
        let e = umbilicity_propagation_check(&f, &vec![1.0, 1.0, 1.0].into(), 2.0, 1e-8).unwrap_err();
        assert!(matches!(e, GeomError::NotConstantCurvature { .. }));
    }

    #[test]
    fn slab_scan_separates_geodesic_and_bumped_leaves() {
        let (_, f) = zoo_build(&SpacetimeSpec::SlabCounterexample { amplitude: 1.0 }).unwrap();
        let scan = umbilicity_scan(&f, &[0.5, 2.0, -1.0], 5).unwrap();
        assert!(scan[0].max_umb_dev < 1e-10 && scan[0].max_h_norm < 1e-10);
        let oracle = slab_phi_prime(1.0, 2.0f64).abs() / 2f64.sqrt();
        assert!((scan[1].max_umb_dev - oracle).abs() < 1e-12);
        assert!(scan[2].max_h_norm < 1e-10);
    }
}
