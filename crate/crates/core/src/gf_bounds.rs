//! The sampled invariant `𝔊 = inf ((1/n) div_L A − ric(N) − (2/n)‖A‖²)` and the
//! mean-curvature bounds it controls.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart_metrics::{zoo_build, ChartBox, ChartPoint, SpacetimeSpec};
use crate::curvature::{radial_curvature_with, ric_direction_with, scalar_curvature_constant, Basis, CurvatureAt};
use crate::error::{GeomError, Result};
use crate::foliation_geometry::{leaf_divergence_unchecked, shape_operator, AccelerationField, Foliation};
use crate::riccati_flow::{riccati_closed_form, riccati_integrate, RiccatiParams};
use crate::sampling::Sampler;

pub fn gf_integrand(fol: &Foliation, p: &ChartPoint) -> Result<f64> {
    Ok(gf_sample(fol, p)?.integrand)
}

/// Everything the bound checks need at one point.
#[derive(Clone, Debug, Serialize)]
pub struct GfSample {
    pub point: Vec<f64>,
    pub integrand: f64,
    pub h_sq: f64,
    pub b_norm_sq: f64,
}

pub fn gf_sample(fol: &Foliation, p: &ChartPoint) -> Result<GfSample> {
    let ex = shape_operator(fol, p)?;
    let x = p.coords();
    let n = fol.leaf_dim() as f64;
    let frame = fol.frame_at(x)?;
    let div = leaf_divergence_unchecked(fol, &AccelerationField(fol), x, &frame)?;
    let ric = ric_direction_with(&CurvatureAt::new(&fol.metric, p)?, &frame[fol.leaf_dim()])?;
    Ok(GfSample {
        point: x.to_vec(),
        integrand: div / n - ric - 2.0 * ex.accel_norm_sq() / n,
        h_sq: ex.mean_curvature * ex.mean_curvature,
        b_norm_sq: ex.b_norm_sq,
    })
}

pub fn gf_samples(fol: &Foliation, sampler: &Sampler) -> Result<Vec<GfSample>> {
    let pts = sampler.points(&fol.metric.sample_box)?;
    pts.par_iter().map(|p| gf_sample(fol, p)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GfEstimate {
    /// Sampled infimum.
    pub value: f64,
    pub unbounded_below: bool,
    pub argmin: Vec<f64>,
    pub sample_count: usize,
    pub integrand_min: f64,
    pub integrand_max: f64,
    pub integrand_mean: f64,
    /// `√(−value)` when `value ≤ 0`.
    pub a: Option<f64>,
    pub sample_box: ChartBox,
}

pub fn estimate_from(samples: &[GfSample], sample_box: &ChartBox) -> Result<GfEstimate> {
    let first = samples.first().ok_or(GeomError::EmptySampleSet)?;
    let mut best = first;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for s in samples {
        if s.integrand < best.integrand {
            best = s;
        }
        max = max.max(s.integrand);
        sum += s.integrand;
    }
    let value = best.integrand;
    Ok(GfEstimate {
        value,
        unbounded_below: value == f64::NEG_INFINITY,
        argmin: best.point.clone(),
        sample_count: samples.len(),
        integrand_min: value,
        integrand_max: max,
        integrand_mean: sum / samples.len() as f64,
        a: (value <= 0.0).then(|| (-value).sqrt()),
        sample_box: sample_box.clone(),
    })
}

pub fn gf_estimate(fol: &Foliation, sampler: &Sampler) -> Result<GfEstimate> {
    estimate_from(&gf_samples(fol, sampler)?, &fol.metric.sample_box)
}

pub fn gf_csv(samples: &[GfSample]) -> String {
    let d = samples.first().map_or(0, |s| s.point.len());
    let mut out: String = (0..d).map(|i| format!("x{i},")).collect();
    out.push_str("integrand,h_sq,b_norm_sq\n");
    for s in samples {
        for x in &s.point {
            out.push_str(&format!("{x:.17e},"));
        }
        out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", s.integrand, s.h_sq, s.b_norm_sq));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub spacetime: String,
    pub gf: GfEstimate,
    pub sup_h_sq: f64,
    pub sup_h_sq_at: Vec<f64>,
    pub sup_b_norm_sq: f64,
    /// `−𝔊 − sup H²`.
    pub margin: f64,
    pub totally_geodesic: bool,
}

fn violated(which: &str, point: &[f64], detail: String) -> GeomError {
    GeomError::BoundViolated { which: which.to_string(), point: point.to_vec(), detail }
}

/// Checks `𝔊 ≤ 0`, `sup H² ≤ −𝔊`, and both directions of `𝔊 = 0 ⇔ B ≡ 0` on the samples.
pub fn check_bounds(fol: &Foliation, sampler: &Sampler) -> Result<BoundsReport> {
    let samples = gf_samples(fol, sampler)?;
    let report = bounds_from(fol.metric.name(), &samples, &fol.metric.sample_box)?;
    verify_bounds(&report)?;
    Ok(report)
}

/// Builds the report without asserting anything.
pub fn bounds_from(name: &str, samples: &[GfSample], sample_box: &ChartBox) -> Result<BoundsReport> {
    let gf = estimate_from(samples, sample_box)?;
    let top = samples.iter().max_by(|a, b| a.h_sq.total_cmp(&b.h_sq)).unwrap();
    let sup_b = samples.iter().map(|s| s.b_norm_sq).fold(0.0, f64::max);
    Ok(BoundsReport {
        spacetime: name.to_string(),
        margin: -gf.value - top.h_sq,
        sup_h_sq: top.h_sq,
        sup_h_sq_at: top.point.clone(),
        sup_b_norm_sq: sup_b,
        totally_geodesic: sup_b < 1e-9,
        gf,
    })
}

pub fn verify_bounds(r: &BoundsReport) -> Result<()> {
    let gf = r.gf.value;
    if gf > 1e-9 {
        return Err(violated("gf_nonpositive", &r.gf.argmin, format!("sampled gf = {gf:e} > 0")));
    }
    if r.sup_h_sq > -gf + 1e-6 {
        return Err(violated(
            "mean_curvature",
            &r.sup_h_sq_at,
            format!("sup H^2 = {:.9e} exceeds -gf = {:.9e}", r.sup_h_sq, -gf),
        ));
    }
    if gf > -1e-9 && r.sup_b_norm_sq >= 1e-6 {
        return Err(violated(
            "characterization",
            &r.gf.argmin,
            format!("gf = {gf:e} but sup |B|^2 = {:e}", r.sup_b_norm_sq),
        ));
    }
    if r.sup_b_norm_sq < 1e-9 && gf.abs() >= 1e-6 {
        return Err(violated(
            "characterization_converse",
            &r.gf.argmin,
            format!("totally geodesic samples but gf = {gf:e}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalSweep {
    pub kappa: f64,
    pub h0_grid: Vec<f64>,
    pub blow_up: Vec<Option<f64>>,
    pub all_finite: bool,
}

/// Closed-form and numerical blow-up times for `h0` on a uniform grid.
pub fn focal_sweep(kappa: f64, h0_lo: f64, h0_hi: f64, count: usize) -> Result<FocalSweep> {
    let grid: Vec<f64> = (0..count).map(|i| h0_lo + (h0_hi - h0_lo) * i as f64 / (count - 1).max(1) as f64).collect();
    let blow_up: Vec<Option<f64>> = grid
        .iter()
        .map(|&h0| {
            let p = RiccatiParams::new(kappa, h0)?;
            let closed = riccati_closed_form(p).blow_up;
            let horizon = closed.map_or(10.0, |b| b + 1.0);
            let numeric = riccati_integrate(p, horizon, 1e-10)?.blow_up;
            Ok(match (closed, numeric) {
                (Some(c), Some(nm)) if (c - nm).abs() < 1e-6 => Some(nm),
                (None, None) => None,
                (c, nm) => {
                    return Err(GeomError::BoundViolated {
                        which: "focal_sweep".into(),
                        point: vec![kappa, h0],
                        detail: format!("closed-form blow-up {c:?} vs numeric {nm:?}"),
                    })
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(FocalSweep { kappa, all_finite: blow_up.iter().all(Option::is_some), h0_grid: grid, blow_up })
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicCcReport {
    pub spacetime: String,
    pub measured_c: f64,
    pub max_curvature_deviation: f64,
    pub max_accel: f64,
    pub sup_h_sq: f64,
    /// `c − sup H²` when `c ≥ 0`.
    pub margin: Option<f64>,
    /// For `c < 0`: the Riccati sweep at the measured radial curvature.
    pub focal_sweep: Option<FocalSweep>,
}

/// For a constant-curvature entry: `c ≥ 0` and `H² ≤ c` when the normal is geodesic;
/// for `c < 0`, a focal-time sweep showing every geodesic congruence focuses.
pub fn geodesic_cc_check(spec: &SpacetimeSpec, sampler: &Sampler) -> Result<GeodesicCcReport> {
    let (metric, fol) = zoo_build(spec)?;
    let pts = sampler.points(&metric.sample_box)?;
    let c = scalar_curvature_constant(&metric, &pts[0])?;
    let rows: Vec<(f64, f64, f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let frame = fol.frame_at(p.coords())?;
            let n = fol.leaf_dim();
            let curv = CurvatureAt::new(&metric, p)?;
            let dev = curv.tensor(&Basis::Frame(frame.clone())).constant_curvature_deviation(c);
            let ex = shape_operator(&fol, p)?;
            let kappa = radial_curvature_with(&curv, &frame[n], &frame[0])?;
            Ok((dev, ex.accel_norm_sq().sqrt(), ex.mean_curvature.powi(2), kappa))
        })
        .collect::<Result<_>>()?;
    let max_dev = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    if max_dev >= 1e-8 {
        return Err(GeomError::NotConstantCurvature { deviation: max_dev });
    }
    let max_accel = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let sup_h_sq = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let mut report = GeodesicCcReport {
        spacetime: spec.name().to_string(),
        measured_c: c,
        max_curvature_deviation: max_dev,
        max_accel,
        sup_h_sq,
        margin: None,
        focal_sweep: None,
    };
    if c < -1e-12 {
        report.focal_sweep = Some(focal_sweep(rows[0].3, -10.0, 10.0, 41)?);
        return Ok(report);
    }
    if max_accel >= 1e-8 {
        return Err(GeomError::NotGeodesicNormal { accel: max_accel });
    }
    let margin = c - sup_h_sq;
    if margin < -1e-6 {
        return Err(violated("geodesic_cc", &pts[0], format!("c - sup H^2 = {margin:e}")));
    }
    report.margin = Some(margin);
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub kappa: f64,
    pub a: f64,
    pub h0: f64,
    pub b: f64,
    pub h_at_b: f64,
    /// `"G"` for `a = 0`, `"L"` otherwise.
    pub function: &'static str,
    /// `(s, H(s), F(s) − F(b), s − b)`.
    pub samples: Vec<(f64, f64, f64, f64)>,
    /// `min ((F(s) − F(b)) − (s − b))`.
    pub min_gap: f64,
    pub blow_up: Option<f64>,
    pub holds: bool,
}

/// Mean curvature `H = −y` obeys `H′ = H² + κ`; checks `F(s) − F(b) ≥ s − b` for
/// `F = −1/H` (`a = 0`) or `F = (1/2a) ln((H−a)/(H+a))` (`a = √(−κ) > 0`).
pub fn comparison_witness(kappa: f64, h0: f64, b: f64, s_max: f64) -> Result<ComparisonReport> {
    if !(b >= 0.0 && s_max > b) {
        return Err(GeomError::InvalidParams(format!("need 0 <= b < s_max, got b = {b}, s_max = {s_max}")));
    }
    let a = (-kappa).max(0.0).sqrt();
    let tol = 1e-12;
    let h_at_b = if b > 0.0 {
        let pre = riccati_integrate(RiccatiParams::new(kappa, -h0)?, b, tol)?;
        if pre.blow_up.is_some() {
            return Err(GeomError::RegimeViolation(format!("H blows up before b = {b}")));
        }
        -pre.samples.last().unwrap().1
    } else {
        h0
    };
    if !(h_at_b > a) {
        return Err(GeomError::RegimeViolation(format!("need H(b) > a: H(b) = {h_at_b}, a = {a}")));
    }
    let f = |h: f64| if a == 0.0 { -1.0 / h } else { ((h - a) / (h + a)).ln() / (2.0 * a) };
    let traj = riccati_integrate(RiccatiParams::new(kappa, -h_at_b)?, s_max - b, tol)?;
    let fb = f(h_at_b);
    let samples: Vec<(f64, f64, f64, f64)> = traj
        .samples
        .iter()
        .map(|&(t, y)| {
            let h = -y;
            (b + t, h, f(h) - fb, t)
        })
        .collect();
    let min_gap = samples.iter().map(|s| s.2 - s.3).fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        kappa,
        a,
        h0,
        b,
        h_at_b,
        function: if a == 0.0 { "G" } else { "L" },
        holds: min_gap >= -1e-9,
        min_gap,
        blow_up: traj.blow_up.map(|t| b + t),
        samples,
    })
}
