//! Pointwise audits of the divergence identities and of the shape-transport identity.
//!
//! The fundamental identity is checked in the form
//! `div_L A = n N(H) + σ_B ‖B‖² + σ_ric n ric(N) + σ_A ‖A‖²`
//! with the signs left free; [`calibrate_signature`] decides them from witnesses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart_metrics::{zoo_build, ChartPoint, SpacetimeSpec};
use crate::curvature::{ric_direction_with, CurvatureAt};
use crate::error::{GeomError, Result};
use crate::foliation_geometry::{
    adapted_frame, covariant, derive_vector, full_divergence, leaf_divergence_unchecked, normal_derivative_of_h,
    shape_operator, AccelerationComponentsField, AccelerationField, Foliation, ShapeMatrixField, VectorField,
};
use crate::linalg::Mat;
use crate::sampling::Sampler;

/// Signs of the `‖B‖²`, `n ric(N)` and `‖A‖²` terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignSignature {
    pub b: i8,
    pub ric: i8,
    pub a: i8,
}

impl SignSignature {
    /// The signs as printed in the source.
    pub const PRINTED: Self = Self { b: -1, ric: 1, a: 1 };
    /// The signs obtained from the Raychaudhuri computation under this crate's conventions.
    pub const DERIVED: Self = Self { b: 1, ric: -1, a: -1 };

    pub fn new(b: i8, ric: i8, a: i8) -> Result<Self> {
        if [b, ric, a].iter().all(|s| s.abs() == 1) {
            Ok(Self { b, ric, a })
        } else {
            Err(GeomError::InvalidParams(format!("signature entries must be ±1, got ({b},{ric},{a})")))
        }
    }

    pub fn all() -> [Self; 8] {
        let mut out = [Self::PRINTED; 8];
        for (k, s) in out.iter_mut().enumerate() {
            let bit = |j: usize| if k >> j & 1 == 0 { 1 } else { -1 };
            *s = Self { b: bit(2), ric: bit(1), a: bit(0) };
        }
        out
    }

    pub fn as_array(&self) -> [i8; 3] {
        [self.b, self.ric, self.a]
    }
}

impl std::fmt::Display for SignSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = |x: i8| if x > 0 { "+1" } else { "-1" };
        write!(f, "({},{},{})", s(self.b), s(self.ric), s(self.a))
    }
}

/// The five terms of the fundamental identity at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityTerms {
    pub div_l_a: f64,
    pub n_dh: f64,
    pub b_norm_sq: f64,
    pub n_ric: f64,
    pub a_norm_sq: f64,
}

impl IdentityTerms {
    pub fn residual(&self, sig: SignSignature) -> f64 {
        self.div_l_a
            - (self.n_dh
                + sig.b as f64 * self.b_norm_sq
                + sig.ric as f64 * self.n_ric
                + sig.a as f64 * self.a_norm_sq)
    }
}

pub fn identity_terms(fol: &Foliation, p: &ChartPoint) -> Result<IdentityTerms> {
    let ex = shape_operator(fol, p)?;
    let x = p.coords();
    let n = fol.leaf_dim() as f64;
    let frame = fol.frame_at(x)?;
    let div_l_a = leaf_divergence_unchecked(fol, &AccelerationField(fol), x, &frame)?;
    let n_dh = n * normal_derivative_of_h(fol, p)?;
    let curv = CurvatureAt::new(&fol.metric, p)?;
    let n_ric = n * ric_direction_with(&curv, &frame[fol.leaf_dim()])?;
    Ok(IdentityTerms { div_l_a, n_dh, b_norm_sq: ex.b_norm_sq, n_ric, a_norm_sq: ex.accel_norm_sq() })
}

pub fn fundamental_residual(fol: &Foliation, p: &ChartPoint, sig: SignSignature) -> Result<f64> {
    Ok(identity_terms(fol, p)?.residual(sig))
}

/// `Div A − div_L A − ‖A‖²`.
pub fn split_residual(fol: &Foliation, p: &ChartPoint) -> Result<f64> {
    let full = full_divergence(&fol.metric, &AccelerationField(fol), p)?;
    let x = p.coords();
    let frame = fol.frame_at(x)?;
    let leaf = leaf_divergence_unchecked(fol, &AccelerationField(fol), x, &frame)?;
    let a = fol.acceleration_at(x)?;
    Ok(full - leaf - fol.metric.g(x).form(&a, &a))
}

/// Signs in the shape-transport identity
/// `(∇_{e_k}A)_i = σ_q (x_i x_k − (h²)_ik) − σ_R R_{N i N k} − (∇_N h)_ik`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportSignature {
    pub quadratic: i8,
    pub curvature: i8,
}

impl TransportSignature {
    /// The quadratic signs as printed; the curvature sign is the free choice.
    pub fn literal(sig_r: i8) -> Self {
        Self { quadratic: 1, curvature: sig_r }
    }

    pub fn all() -> [Self; 4] {
        [(1, 1), (1, -1), (-1, 1), (-1, -1)].map(|(q, c)| Self { quadratic: q, curvature: c })
    }
}

/// All matrices (over leaf indices `i, k`) entering the shape-transport identity.
#[derive(Clone, Debug, Serialize)]
pub struct TransportTerms {
    /// `(dx_i + Σ_j x_j ω_ji)(e_k)`.
    pub lhs: Mat<f64>,
    pub xx: Mat<f64>,
    pub hh: Mat<f64>,
    /// `g(R(N, e_i)N, e_k)`.
    pub r_nn: Mat<f64>,
    /// `(dh_ik + Σ_j h_jk ω_ji + Σ_j h_ij ω_jk)(N)`.
    pub nabla_n_h: Mat<f64>,
}

impl TransportTerms {
    pub fn residual(&self, i: usize, k: usize, sig: TransportSignature) -> f64 {
        let q = sig.quadratic as f64;
        let c = sig.curvature as f64;
        self.lhs[(i, k)] - (q * (self.xx[(i, k)] - self.hh[(i, k)]) - c * self.r_nn[(i, k)] - self.nabla_n_h[(i, k)])
    }

    pub fn residual_matrix(&self, sig: TransportSignature) -> Mat<f64> {
        Mat::from_fn(self.lhs.dim(), |i, k| self.residual(i, k, sig))
    }

    pub fn max_abs(&self, sig: TransportSignature) -> f64 {
        let r = self.residual_matrix(sig);
        r.rows().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn transport_terms(fol: &Foliation, p: &ChartPoint) -> Result<TransportTerms> {
    let fr = adapted_frame(fol, p)?;
    let x = p.coords();
    let n = fol.leaf_dim();
    let normal = fr.normal().to_vec();
    let xs = AccelerationComponentsField(fol).at(x)?;
    let dx: Vec<Vec<f64>> =
        (0..n).map(|k| Ok(derive_vector(&AccelerationComponentsField(fol), x, &fr.e[k])?.1)).collect::<Result<_>>()?;
    let (hflat, dhflat) = derive_vector(&ShapeMatrixField(fol), x, &normal)?;
    let h = Mat::from_fn(n, |i, k| hflat[i * n + k]);
    let dh = Mat::from_fn(n, |i, k| dhflat[i * n + k]);
    let curv = CurvatureAt::new(&fol.metric, p)?;
    let lhs = Mat::from_fn(n, |i, k| dx[k][i] + (0..n).map(|j| xs[j] * fr.omega(j, i, k)).sum::<f64>());
    let nabla_n_h = Mat::from_fn(n, |i, k| {
        dh[(i, k)] + (0..n).map(|j| h[(j, k)] * fr.omega(j, i, n) + h[(i, j)] * fr.omega(j, k, n)).sum::<f64>()
    });
    Ok(TransportTerms {
        lhs,
        xx: Mat::from_fn(n, |i, k| xs[i] * xs[k]),
        hh: h.mul(&h),
        r_nn: Mat::from_fn(n, |i, k| curv.eval(&normal, &fr.e[i], &normal, &fr.e[k])),
        nabla_n_h,
    })
}

/// The shape-transport residual with the printed quadratic signs and curvature sign `sig_r`.
pub fn shape_transport_residual(fol: &Foliation, p: &ChartPoint, i: usize, k: usize, sig_r: i8) -> Result<f64> {
    let n = fol.leaf_dim();
    if i >= n || k >= n || sig_r.abs() != 1 {
        return Err(GeomError::InvalidParams(format!("need i, k < {n} and sig_R = ±1")));
    }
    Ok(transport_terms(fol, p)?.residual(i, k, TransportSignature::literal(sig_r)))
}

/// `g(∇_{e_k} A, e_i)` computed straight from the connection, bypassing the frame route.
pub fn acceleration_gradient(fol: &Foliation, p: &ChartPoint) -> Result<Mat<f64>> {
    fol.metric.check_point(p)?;
    let x = p.coords();
    let frame = fol.frame_at(x)?;
    let g = fol.metric.g(x);
    let n = fol.leaf_dim();
    let cols: Vec<Vec<f64>> =
        (0..n).map(|k| covariant(&fol.metric, x, &frame[k], &AccelerationField(fol))).collect::<Result<_>>()?;
    Ok(Mat::from_fn(n, |i, k| g.form(&cols[k], &frame[i])))
}

/// A foliation with the points it is audited at.
#[derive(Clone, Debug)]
pub struct Witness {
    pub foliation: Foliation,
    pub points: Vec<ChartPoint>,
}

impl Witness {
    pub fn sampled(spec: &SpacetimeSpec, sampler: &Sampler) -> Result<Self> {
        let (metric, foliation) = zoo_build(spec)?;
        Ok(Self { points: sampler.points(&metric.sample_box)?, foliation })
    }

    pub fn name(&self) -> &'static str {
        self.foliation.metric.name()
    }
}

/// The witness set whose terms separate all eight signatures.
pub fn default_witness_specs() -> Vec<SpacetimeSpec> {
    vec![
        SpacetimeSpec::RobertsonWalker { a: vec![1.0, 0.0, 0.1], n: 3 },
        SpacetimeSpec::MinkowskiTilted { eps: 0.5 },
        SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 },
        SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 },
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureResidual {
    pub signature: SignSignature,
    pub max_abs_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSummary {
    pub spacetime: String,
    pub points: usize,
    pub residuals: Vec<SignatureResidual>,
    pub max_split_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub spacetimes: Vec<String>,
    pub points_sampled: usize,
    pub residuals: Vec<SignatureResidual>,
    pub passing: Vec<SignSignature>,
    pub winner: Option<SignSignature>,
    pub printed_signature: SignSignature,
    pub printed_signature_residual: f64,
    pub tolerance: f64,
    pub witnesses: Vec<WitnessSummary>,
}

impl IdentityReport {
    pub fn residual_of(&self, sig: SignSignature) -> f64 {
        self.residuals.iter().find(|r| r.signature == sig).map(|r| r.max_abs_residual).unwrap_or(f64::NAN)
    }
}

fn summarize(residuals: impl Iterator<Item = [f64; 8]>) -> [f64; 8] {
    residuals.fold([0.0; 8], |mut acc, r| {
        for (a, v) in acc.iter_mut().zip(r) {
            *a = a.max(v.abs());
        }
        acc
    })
}

/// Evaluates all eight signatures on all witnesses without deciding.
pub fn audit_signatures(witnesses: &[Witness], tol: f64) -> Result<IdentityReport> {
    let sigs = SignSignature::all();
    let mut total = [0.0f64; 8];
    let mut summaries = Vec::new();
    let mut count = 0;
    for w in witnesses {
        let rows: Vec<([f64; 8], f64)> = w
            .points
            .par_iter()
            .map(|p| {
                let t = identity_terms(&w.foliation, p)?;
                Ok((sigs.map(|s| t.residual(s)), split_residual(&w.foliation, p)?))
            })
            .collect::<Result<_>>()?;
        let per = summarize(rows.iter().map(|r| r.0));
        let split = rows.iter().fold(0.0f64, |m, r| m.max(r.1.abs()));
        for (t, v) in total.iter_mut().zip(per) {
            *t = t.max(v);
        }
        count += w.points.len();
        summaries.push(WitnessSummary {
            spacetime: w.name().to_string(),
            points: w.points.len(),
            residuals: sigs.iter().zip(per).map(|(&s, v)| SignatureResidual { signature: s, max_abs_residual: v }).collect(),
            max_split_residual: split,
        });
    }
    let residuals: Vec<SignatureResidual> =
        sigs.iter().zip(total).map(|(&s, v)| SignatureResidual { signature: s, max_abs_residual: v }).collect();
    let passing: Vec<SignSignature> =
        residuals.iter().filter(|r| r.max_abs_residual < tol).map(|r| r.signature).collect();
    let winner = if passing.len() == 1 { Some(passing[0]) } else { None };
    let printed_signature_residual = residuals.iter().find(|r| r.signature == SignSignature::PRINTED).unwrap().max_abs_residual;
    Ok(IdentityReport {
        spacetimes: witnesses.iter().map(|w| w.name().to_string()).collect(),
        points_sampled: count,
        residuals,
        passing,
        winner,
        printed_signature: SignSignature::PRINTED,
        printed_signature_residual,
        tolerance: tol,
        witnesses: summaries,
    })
}

/// Exactly one signature must stay below `1e-6` on every witness.
pub fn calibrate_signature(witnesses: &[Witness]) -> Result<IdentityReport> {
    calibrate_signature_with(witnesses, 1e-6)
}

pub fn calibrate_signature_with(witnesses: &[Witness], tol: f64) -> Result<IdentityReport> {
    let report = audit_signatures(witnesses, tol)?;
    if report.winner.is_none() {
        return Err(GeomError::NoUniqueSignature {
            passing: report.passing.len(),
            tol,
            ties: report.passing.iter().map(|s| s.as_array()).collect(),
        });
    }
    Ok(report)
}

/// Max shape-transport residual of each of the four transport signatures over the witnesses.
#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    pub spacetimes: Vec<String>,
    pub residuals: Vec<(TransportSignature, f64)>,
    pub winner: Option<TransportSignature>,
    pub tolerance: f64,
}

pub fn calibrate_transport(witnesses: &[Witness], tol: f64) -> Result<TransportReport> {
    let sigs = TransportSignature::all();
    let mut worst = [0.0f64; 4];
    for w in witnesses {
        let rows: Vec<[f64; 4]> = w
            .points
            .par_iter()
            .map(|p| {
                let t = transport_terms(&w.foliation, p)?;
                Ok(sigs.map(|s| t.max_abs(s)))
            })
            .collect::<Result<_>>()?;
        for r in rows {
            for (m, v) in worst.iter_mut().zip(r) {
                *m = m.max(v);
            }
        }
    }
    let passing: Vec<_> = sigs.iter().zip(worst).filter(|(_, v)| *v < tol).map(|(s, _)| *s).collect();
    Ok(TransportReport {
        spacetimes: witnesses.iter().map(|w| w.name().to_string()).collect(),
        residuals: sigs.into_iter().zip(worst).collect(),
        winner: if passing.len() == 1 { Some(passing[0]) } else { None },
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation_geometry::normal_curve;

    fn fol(spec: SpacetimeSpec) -> Foliation {
        zoo_build(&spec).unwrap().1
    }

    fn rw() -> Foliation {
        fol(SpacetimeSpec::RobertsonWalker { a: vec![1.0, 0.0, 0.1], n: 3 })
    }

    #[test]
    fn signatures_enumerate_all_sign_patterns() {
        let all = SignSignature::all();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(all.contains(&SignSignature::PRINTED) && all.contains(&SignSignature::DERIVED));
        assert!(SignSignature::new(1, 0, 1).is_err());
    }

    #[test]
    fn robertson_walker_terms_match_symbolic_oracle() {
        let f = rw();
        for t in [-0.9, -0.3, 0.4, 1.0] {
            let a = 1.0 + 0.1 * t * t;
            let (ad, add) = (0.2 * t, 0.2);
            let hub = ad / a;
            let terms = identity_terms(&f, &vec![0.5, 1.0, 1.5, t].into()).unwrap();
            assert!(terms.div_l_a.abs() < 1e-12);
            assert!((terms.n_dh - 3.0 * (add / a - hub * hub)).abs() < 1e-10);
            assert!((terms.b_norm_sq - 3.0 * hub * hub).abs() < 1e-12);
            assert!((terms.n_ric - 3.0 * add / a).abs() < 1e-10);
            assert!(terms.residual(SignSignature::DERIVED).abs() < 1e-9);
            let printed = terms.residual(SignSignature::PRINTED);
            assert!((printed + 2.0 * 3.0 * (add / a - hub * hub)).abs() < 1e-9, "{printed}");
        }
    }

    #[test]
    fn normal_derivative_of_h_matches_difference_along_normal_curve() {
        let f = fol(SpacetimeSpec::MinkowskiTilted { eps: 0.5 });
        let p: ChartPoint = vec![0.8, 0.3, 0.1].into();
        let ds = 1e-3;
        let mut past = f.clone();
        past.orientation = -1.0;
        let fwd = normal_curve(&f, &p, ds, ds / 4.0).unwrap();
        let bwd = normal_curve(&past, &p, ds, ds / 4.0).unwrap();
        let h = |q: &[f64]| f.mean_curvature_at(q).unwrap();
        let fd = (h(&fwd.samples.last().unwrap().1) - h(&bwd.samples.last().unwrap().1)) / (2.0 * ds);
        let dual = normal_derivative_of_h(&f, &p).unwrap();
        assert!((fd - dual).abs() < 1e-6, "{fd} vs {dual}");
    }

    #[test]
    fn split_identity_is_signature_free() {
        for spec in [SpacetimeSpec::MinkowskiTilted { eps: 0.5 }, SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 }] {
            let f = fol(spec);
            for p in [vec![0.3, 1.2, 0.4], vec![2.5, -0.7, -0.2]] {
                let r = split_residual(&f, &p.into()).unwrap();
                assert!(r.abs() < 1e-10, "{r}");
            }
        }
    }

    #[test]
    fn frame_route_matches_direct_gradient_of_acceleration() {
        let f = fol(SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 });
        let p: ChartPoint = vec![0.9, 2.2, 0.5].into();
        let t = transport_terms(&f, &p).unwrap();
        let direct = acceleration_gradient(&f, &p).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert!((t.lhs[(i, k)] - direct[(i, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_on_minkowski_is_identically_zero() {
        let f = fol(SpacetimeSpec::Minkowski { n: 3 });
        let t = transport_terms(&f, &vec![0.1, 0.2, 0.3, 0.4].into()).unwrap();
        for m in [&t.lhs, &t.xx, &t.hh, &t.r_nn, &t.nabla_n_h] {
            assert_eq!(m.frobenius(), 0.0);
        }
    }

    #[test]
    fn de_sitter_selects_negative_curvature_sign() {
        let f = fol(SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 });
        let p: ChartPoint = vec![0.4, 0.1, 0.2, 0.3].into();
        for i in 0..3 {
            for k in 0..3 {
                let neg = shape_transport_residual(&f, &p, i, k, -1).unwrap();
                let pos = shape_transport_residual(&f, &p, i, k, 1).unwrap();
                assert!(neg.abs() < 1e-10);
                assert!((pos - if i == k { 2.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tilted_transport_residual_is_twice_the_quadratic_gap() {
        let f = fol(SpacetimeSpec::MinkowskiTilted { eps: 0.5 });
        let p: ChartPoint = vec![1.1, 0.3, 0.2].into();
        let t = transport_terms(&f, &p).unwrap();
        assert_eq!(t.r_nn.frobenius(), 0.0);
        let want = 2.0 * (t.hh[(0, 0)] - t.xx[(0, 0)]);
        assert!(want.abs() > 1e-2);
        for s in [-1, 1] {
            assert!((shape_transport_residual(&f, &p, 0, 0, s).unwrap() - want).abs() < 1e-10);
        }
        assert!(t.max_abs(TransportSignature { quadratic: -1, curvature: 1 }) < 1e-10);
    }

    #[test]
    fn minkowski_alone_cannot_calibrate() {
        let w = Witness::sampled(&SpacetimeSpec::Minkowski { n: 3 }, &Sampler::Sobol { count: 4, seed: 1 }).unwrap();
        match calibrate_signature(&[w]) {
            Err(GeomError::NoUniqueSignature { passing, ties, .. }) => {
                assert_eq!(passing, 8);
                assert_eq!(ties.len(), 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_witness_set_calibrates_to_derived_signature() {
        let s = Sampler::Sobol { count: 6, seed: 11 };
        let ws: Vec<_> = default_witness_specs().iter().map(|sp| Witness::sampled(sp, &s).unwrap()).collect();
        let r = calibrate_signature(&ws).unwrap();
        assert_eq!(r.winner, Some(SignSignature::DERIVED));
        let best = r.residual_of(SignSignature::DERIVED);
        assert!(r.residuals.iter().all(|x| x.max_abs_residual >= best));
        assert!(r.printed_signature_residual > 1e-3);
    }

    #[test]
    fn transport_calibration_flips_the_quadratic_signs() {
        let specs = [
            SpacetimeSpec::MinkowskiTilted { eps: 0.5 },
            SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 },
            SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 },
        ];
        let w: Vec<Witness> = specs.iter().map(|s| Witness::sampled(s, &Sampler::Sobol { count: 64, seed: 7 }).unwrap()).collect();
        let r = calibrate_transport(&w, 1e-8).unwrap();
        assert_eq!(r.winner, Some(TransportSignature { quadratic: -1, curvature: 1 }));
        let best = r.residuals.iter().find(|(s, _)| Some(*s) == r.winner).unwrap().1;
        assert!(best < 1e-10, "{best:e}");
    }
}
