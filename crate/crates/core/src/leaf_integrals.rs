//! Integrals over compact leaves by the periodic trapezoid rule.
//!
//! A leaf `τ = level` is parametrised by the spatial chart coordinates `u`, with the time
//! coordinate solved from `τ`. All spatial axes must be periodic.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart_metrics::ChartPoint;
use crate::curvature::{ric_direction_with, CurvatureAt};
use crate::dual::seed_axis;
use crate::error::{GeomError, Result};
use crate::foliation_geometry::{
    leaf_divergence_unchecked, normal_derivative_of_h, shape_operator, AccelerationField, Foliation,
};
use crate::linalg::Mat;

/// Product trapezoid rule on one leaf.
#[derive(Clone, Debug, Serialize)]
pub struct LeafQuadrature {
    pub leaf: f64,
    pub nodes: Vec<usize>,
    pub periods: Vec<f64>,
}

impl LeafQuadrature {
    pub fn new(fol: &Foliation, leaf: f64, nodes: usize) -> Result<Self> {
        let n = fol.leaf_dim();
        let periods = (0..n)
            .map(|a| fol.metric.periodic[a].ok_or(GeomError::NonCompactLeaf { axis: a }))
            .collect::<Result<Vec<_>>>()?;
        if nodes == 0 {
            return Err(GeomError::EmptySampleSet);
        }
        Ok(Self { leaf, nodes: vec![nodes; n], periods })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Spatial coordinates of node `k` (first axis fastest).
    pub fn node(&self, mut k: usize) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.periods)
            .map(|(&m, &period)| {
                let i = k % m;
                k /= m;
                period * i as f64 / m as f64
            })
            .collect()
    }

    pub fn weight(&self) -> f64 {
        self.nodes.iter().zip(&self.periods).map(|(&m, p)| p / m as f64).product()
    }
}

/// `√det` of the induced metric in the `u` parametrisation.
pub fn induced_volume(fol: &Foliation, p: &ChartPoint) -> Result<f64> {
    let x = p.coords();
    let d = fol.dim();
    let n = d - 1;
    let dtau: Vec<f64> = (0..d).map(|a| fol.time.eval(&seed_axis(x, a)).eps).collect();
    let g = fol.metric.g(x);
    let tangents: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut v = vec![0.0; d];
            v[a] = 1.0;
            v[n] = -dtau[a] / dtau[n];
            v
        })
        .collect();
    let gamma = Mat::from_fn(n, |a, b| g.form(&tangents[a], &tangents[b]));
    let ev = gamma.symmetric_eigenvalues();
    if !(ev[0] > 0.0) {
        return Err(GeomError::NotSpacelikeLeaf { point: x.to_vec(), norm: ev[0] });
    }
    Ok(gamma.det().sqrt())
}

/// Sum with a fixed binary association, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        len => pairwise_sum(&v[..len / 2]) + pairwise_sum(&v[len / 2..]),
    }
}

/// `∫_L f dV_L` for several integrands at once.
pub fn leaf_integrate_many<F>(fol: &Foliation, quad: &LeafQuadrature, f: F) -> Result<Vec<f64>>
where
    F: Fn(&ChartPoint) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<f64>> = (0..quad.node_count())
        .into_par_iter()
        .map(|k| {
            let p = fol.leaf_point(&quad.node(k), quad.leaf)?;
            let vol = induced_volume(fol, &p)?;
            Ok(f(&p)?.into_iter().map(|v| v * vol).collect())
        })
        .collect::<Result<_>>()?;
    let m = rows.first().map_or(0, Vec::len);
    let w = quad.weight();
    Ok((0..m).map(|j| w * pairwise_sum(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect())
}

pub fn leaf_integrate<F>(fol: &Foliation, leaf: f64, nodes: usize, f: F) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + Sync,
{
    let quad = LeafQuadrature::new(fol, leaf, nodes)?;
    Ok(leaf_integrate_many(fol, &quad, |p| Ok(vec![f(p)?]))?[0])
}

/// `∫_L ‖A‖ dV_L`; `A` is already leaf-tangent.
pub fn l1_norm_leaf(fol: &Foliation, leaf: f64, nodes: usize) -> Result<f64> {
    leaf_integrate(fol, leaf, nodes, |p| Ok(shape_operator(fol, p)?.accel_norm_sq().sqrt()))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafObstruction {
    pub leaf: f64,
    pub nodes: usize,
    pub volume: f64,
    pub max_b_norm: f64,
    pub int_div_l_a: f64,
    /// `∫ (n ric(N) + ‖A‖²)`.
    pub int_curvature: f64,
    pub int_n_ric: f64,
    pub int_a_norm_sq: f64,
    pub int_n_dh: f64,
    pub int_b_norm_sq: f64,
    /// Totally geodesic, Stokes integral zero, curvature integral positive.
    pub obstructed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObstructionReport {
    pub spacetime: String,
    pub header: String,
    pub tolerance: f64,
    pub leaves: Vec<LeafObstruction>,
}

pub const OBSTRUCTION_HEADER: &str = "The sign hypothesis on the Ricci term is stated both as positive and as negative \
     in the source; this report asserts neither. It prints the leaf integrals of div_L A, n ric(N) + |A|^2 and their \
     parts, and flags leaves that are totally geodesic with vanishing Stokes integral and positive curvature integral.";

pub fn obstruction_report(fol: &Foliation, leaves: &[f64], nodes: usize, tol: f64) -> Result<ObstructionReport> {
    let n = fol.leaf_dim() as f64;
    let rows = leaves
        .iter()
        .map(|&leaf| {
            let quad = LeafQuadrature::new(fol, leaf, nodes)?;
            // volume, div_L A, n ric, |A|^2, n N(H), |B|^2
            let ints = leaf_integrate_many(fol, &quad, |p| {
                let x = p.coords();
                let frame = fol.frame_at(x)?;
                let ex = shape_operator(fol, p)?;
                let div = leaf_divergence_unchecked(fol, &AccelerationField(fol), x, &frame)?;
                let ric = ric_direction_with(&CurvatureAt::new(&fol.metric, p)?, &frame[fol.leaf_dim()])?;
                Ok(vec![1.0, div, n * ric, ex.accel_norm_sq(), n * normal_derivative_of_h(fol, p)?, ex.b_norm_sq])
            })?;
            let max_b = (0..quad.node_count())
                .into_par_iter()
                .map(|k| Ok(shape_operator(fol, &fol.leaf_point(&quad.node(k), leaf)?)?.b_norm_sq.sqrt()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let curvature = ints[2] + ints[3];
            Ok(LeafObstruction {
                leaf,
                nodes,
                volume: ints[0],
                max_b_norm: max_b,
                int_div_l_a: ints[1],
                int_curvature: curvature,
                int_n_ric: ints[2],
                int_a_norm_sq: ints[3],
                int_n_dh: ints[4],
                int_b_norm_sq: ints[5],
                obstructed: max_b < tol && ints[1].abs() < tol && curvature > tol,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ObstructionReport {
        spacetime: fol.metric.name().to_string(),
        header: OBSTRUCTION_HEADER.to_string(),
        tolerance: tol,
        leaves: rows,
    })
}

impl ObstructionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "leaf,nodes,volume,max_b_norm,int_div_l_a,int_curvature,int_n_ric,int_a_norm_sq,int_n_dh,int_b_norm_sq,obstructed\n",
        );
        for l in &self.leaves {
            out.push_str(&format!(
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                l.leaf,
                l.nodes,
                l.volume,
                l.max_b_norm,
                l.int_div_l_a,
                l.int_curvature,
                l.int_n_ric,
                l.int_a_norm_sq,
                l.int_n_dh,
                l.int_b_norm_sq,
                l.obstructed
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart_metrics::{zoo_build, SpacetimeSpec};
    use crate::dual::Scalar;
    use crate::foliation_geometry::{leaf_divergence, LeafProjection, VectorField};
    use std::f64::consts::TAU;

    fn fol(spec: SpacetimeSpec) -> Foliation {
        zoo_build(&spec).unwrap().1
    }

    struct Wavy;
    impl VectorField for Wavy {
        fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
            let (x, y) = (p[0], p[1]);
            Ok(vec![(x + y.scale(2.0)).sin() + S::cst(0.3), (x.scale(3.0)).cos() * y.sin(), x.cos()])
        }
    }

    #[test]
    fn flat_torus_area() {
        let f = fol(SpacetimeSpec::Minkowski { n: 2 });
        let v = leaf_integrate(&f, 0.3, 8, |_| Ok(1.0)).unwrap();
        assert!((v - TAU * TAU).abs() < 1e-12);
    }

    #[test]
    fn hyperboloid_leaves_are_not_compact() {
        let f = fol(SpacetimeSpec::MinkowskiHyperboloids { n: 3 });
        assert_eq!(leaf_integrate(&f, 1.0, 4, |_| Ok(1.0)), Err(GeomError::NonCompactLeaf { axis: 0 }));
    }

    #[test]
    fn tilted_leaf_area_is_the_arc_length_integral() {
        // leaf t = τ + ε sin x has induced metric (1 − ε² cos² x) dx² + dy²
        let eps: f64 = 0.5;
        let f = fol(SpacetimeSpec::MinkowskiTilted { eps });
        let v = leaf_integrate(&f, 0.2, 64, |_| Ok(1.0)).unwrap();
        let m = 20000;
        let oracle: f64 = (0..m)
            .map(|k| {
                let x = TAU * (k as f64 + 0.5) / m as f64;
                (1.0 - eps * eps * x.cos().powi(2)).sqrt()
            })
            .sum::<f64>()
            * TAU
            / m as f64
            * TAU;
        assert!((v - oracle).abs() < 1e-8, "{v} {oracle}");
    }

    #[test]
    fn stokes_vanishing_converges_spectrally() {
        let f = fol(SpacetimeSpec::MinkowskiTilted { eps: 0.5 });
        let v = LeafProjection { foliation: &f, field: Wavy };
        let at = |m| leaf_integrate(&f, 0.1, m, |p| leaf_divergence(&f, &v, p)).unwrap();
        let coarse = at(16);
        let mid = at(64);
        let fine = at(128);
        assert!(mid.abs() < 1e-6 && fine.abs() < 1e-9, "{coarse} {mid} {fine}");
    }

    #[test]
    fn static_lapse_integrals_balance() {
        let f = fol(SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 });
        let r = obstruction_report(&f, &[0.0], 64, 1e-6).unwrap();
        let l = &r.leaves[0];
        assert!(l.max_b_norm < 1e-12);
        assert!(l.int_div_l_a.abs() < 1e-6);
        assert!(l.int_a_norm_sq > 0.1);
        assert!((l.int_n_ric + l.int_a_norm_sq).abs() < 1e-5);
        assert!(!l.obstructed);
        assert!(l1_norm_leaf(&f, 0.0, 32).unwrap() > 0.0);
    }

    #[test]
    fn robertson_walker_moment_of_symmetry_is_obstructed() {
        let f = fol(SpacetimeSpec::RobertsonWalker { a: vec![1.0, 0.0, 0.1], n: 3 });
        let r = obstruction_report(&f, &[0.0, 0.5], 8, 1e-6).unwrap();
        let l = &r.leaves[0];
        assert!(l.obstructed);
        assert!((l.int_curvature - 3.0 * 0.2 * TAU.powi(3)).abs() < 1e-9);
        assert!(!r.leaves[1].obstructed);
        assert_eq!(l1_norm_leaf(&f, 0.3, 4).unwrap(), 0.0);
        assert_eq!(r.to_csv().lines().count(), 3);
    }

    #[test]
    fn minkowski_has_no_obstruction() {
        let f = fol(SpacetimeSpec::Minkowski { n: 3 });
        let l = &obstruction_report(&f, &[0.0], 4, 1e-6).unwrap().leaves[0];
        assert_eq!((l.int_div_l_a, l.int_curvature, l.max_b_norm), (0.0, 0.0, 0.0));
        assert!(!l.obstructed);
    }

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
