use foliation_core::chart_metrics::{zoo_build, ChartPoint, SpacetimeSpec};
use foliation_core::dual::Scalar;
use foliation_core::foliation_geometry::{
    full_divergence, leaf_divergence, shape_operator, LeafProjection, NormalField, VectorField,
};
use foliation_core::gf_bounds::gf_estimate;
use foliation_core::identity_audit::{
    calibrate_signature, default_witness_specs, fundamental_residual, transport_terms, SignSignature, TransportSignature,
    Witness,
};
use foliation_core::leaf_integrals::leaf_integrate;
use foliation_core::riccati_flow::{closed_form_gap, riccati_closed_form, riccati_integrate, RiccatiParams};
use foliation_core::sampling::Sampler;
use foliation_core::Result;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn riccati_matches_closed_form(kappa in -4.0f64..4.0, h0 in -10.0f64..10.0) {
        let p = RiccatiParams::new(kappa, h0).unwrap();
        let closed = riccati_closed_form(p);
        let t = riccati_integrate(p, 3.0, 1e-10).unwrap();
        prop_assert!(closed_form_gap(&t, &closed, 1e-3) < 1e-8);
        match (t.blow_up, closed.blow_up) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6),
            (None, Some(b)) => prop_assert!(b > 3.0 - 1e-6),
            (Some(a), None) => prop_assert!(false, "spurious blow-up at {}", a),
            (None, None) => {}
        }
    }

    #[test]
    fn positive_kappa_always_focuses(kappa in 0.05f64..4.0, k in 0usize..41) {
        let h0 = -10.0 + 0.5 * k as f64;
        let p = RiccatiParams::new(kappa, h0).unwrap();
        let t = riccati_integrate(p, 20.0, 1e-10).unwrap();
        prop_assert!(t.blow_up.is_some());
    }

    #[test]
    fn negative_kappa_settles_on_the_stable_root(a in 0.2f64..2.0, frac in 0.0f64..1.0) {
        // every h0 > -a is attracted to +a
        let h0 = -a + 1e-3 + frac * 10.0;
        let p = RiccatiParams::new(-a * a, h0).unwrap();
        let t = riccati_integrate(p, 20.0 / a, 1e-10).unwrap();
        prop_assert!(t.blow_up.is_none());
        prop_assert!((t.samples.last().unwrap().1 - a).abs() < 1e-3 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn div_normal_is_n_h_everywhere(k in 0usize..8, u in prop::collection::vec(0.02f64..0.98, 4)) {
        let spec = SpacetimeSpec::catalogue().swap_remove(k);
        let (m, f) = zoo_build(&spec).unwrap();
        let p = ChartPoint::from(m.sample_box.map_unit(&u[..m.dim()]));
        let div = full_divergence(&m, &NormalField(&f), &p).unwrap();
        let h = shape_operator(&f, &p).unwrap().mean_curvature;
        prop_assert!((div - f.leaf_dim() as f64 * h).abs() < 1e-8);
    }

    #[test]
    fn transport_residual_is_symmetric(u in prop::collection::vec(0.02f64..0.98, 3), sig in 0usize..4) {
        let (m, f) = zoo_build(&SpacetimeSpec::StaticLapseTorus { beta_x: 0.3, beta_y: 0.2 }).unwrap();
        let p = ChartPoint::from(m.sample_box.map_unit(&u));
        let r = transport_terms(&f, &p).unwrap().residual_matrix(TransportSignature::all()[sig]);
        prop_assert!(r.max_asymmetry() < 1e-9);
    }

    #[test]
    fn geodesic_normals_make_the_identity_a_trace(k in 0usize..3, u in prop::collection::vec(0.02f64..0.98, 4)) {
        // with A = 0 the identity reduces to n N(H) = ‖B‖² + n ric(N) up to the calibrated signs
        let spec = [
            SpacetimeSpec::Minkowski { n: 3 },
            SpacetimeSpec::RobertsonWalker { a: vec![1.0, 0.0, 0.1], n: 3 },
            SpacetimeSpec::DeSitterFlatSlicing { c: 1.0, n: 3 },
        ][k].clone();
        let (m, f) = zoo_build(&spec).unwrap();
        let p = ChartPoint::from(m.sample_box.map_unit(&u));
        let ex = shape_operator(&f, &p).unwrap();
        prop_assert!(ex.accel_norm_sq() < 1e-20);
        prop_assert!(fundamental_residual(&f, &p, SignSignature::DERIVED).unwrap().abs() < 1e-8);
        prop_assert!((ex.h.trace() + f.leaf_dim() as f64 * ex.mean_curvature).abs() < 1e-12);
    }

    #[test]
    fn stokes_vanishes_on_compact_leaves(a in -1.0f64..1.0, b in -1.0f64..1.0, leaf in -0.5f64..0.5) {
        let (_, f) = zoo_build(&SpacetimeSpec::MinkowskiTilted { eps: 0.5 }).unwrap();
        let v = LeafProjection { foliation: &f, field: Trig { a, b } };
        let total = leaf_integrate(&f, leaf, 64, |p| leaf_divergence(&f, &v, p)).unwrap();
        prop_assert!(total.abs() < 1e-6);
    }
}

struct Trig {
    a: f64,
    b: f64,
}

impl VectorField for Trig {
    fn at<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let (x, y, t) = (p[0], p[1], p[2]);
        Ok(vec![(x.scale(2.0) + y).sin().scale(self.a) + t.cos(), (x - y).cos().scale(self.b), x.sin() * y.cos()])
    }
}

#[test]
fn gf_estimate_never_rises_under_refinement() {
    for spec in SpacetimeSpec::catalogue() {
        let (_, f) = zoo_build(&spec).unwrap();
        for sampler in [Sampler::Grid { level: 2 }, Sampler::Sobol { count: 64, seed: 3 }] {
            let coarse = gf_estimate(&f, &sampler).unwrap().value;
            let fine = gf_estimate(&f, &sampler.refined()).unwrap().value;
            assert!(fine <= coarse, "{}: {fine} > {coarse}", spec.name());
        }
    }
}

#[test]
fn calibrated_signature_holds_on_the_whole_zoo() {
    let witnesses: Vec<Witness> =
        default_witness_specs().iter().map(|s| Witness::sampled(s, &Sampler::default()).unwrap()).collect();
    let sig = calibrate_signature(&witnesses).unwrap().winner.unwrap();
    for spec in SpacetimeSpec::catalogue() {
        let w = Witness::sampled(&spec, &Sampler::Sobol { count: 200, seed: 21 }).unwrap();
        let worst = w.points.iter().map(|p| fundamental_residual(&w.foliation, p, sig).unwrap().abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{}: {worst:e}", spec.name());
    }
}
