use num_complex::Complex64;
use proptest::prelude::*;

use homog_core::evolution::{propagate, solve_random, EvolutionParams, PropagatorSpec};
use homog_core::graphs::{census, classify, enumerate_pairings, GraphFilter};
use homog_core::grid::{
    apply_multiplier, apply_radial_multiplier, forward_transform, inverse_transform, Field,
    GridSpec,
};
use homog_core::random_field::{scaled_potential, synthesize, AlphaRule};
use homog_core::spectrum::PowerSpectrum;
use homog_core::stats::{fbm_covariance, script_m};

fn field(grid: GridSpec, values: Vec<f64>) -> Field {
    Field::new(grid, values).unwrap()
}

fn close(a: &Field, b: &Field, tol: f64) -> bool {
    let scale = a.l2_norm().max(b.l2_norm()).max(1e-300);
    a.combine(1.0, b, -1.0).unwrap().l2_norm() <= tol * scale
}

fn grid_1d() -> GridSpec {
    GridSpec::new(1, 32, 6.0).unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(v in values(16 * 16)) {
        let grid = GridSpec::new(2, 16, 5.0).unwrap();
        let f = field(grid, v);
        let e = f.energy();
        prop_assert!((forward_transform(&f).energy() - e).abs() <= 1e-12 * e.max(1e-300));
    }

    #[test]
    fn transform_round_trip_and_linearity(a in values(32), b in values(32), s in -3.0f64..3.0) {
        let grid = grid_1d();
        let (fa, fb) = (field(grid, a), field(grid, b));
        let back = inverse_transform(&forward_transform(&fa)).unwrap();
        prop_assert!(close(&back, &fa, 1e-13));
        let lhs = forward_transform(&fa.combine(s, &fb, 1.0).unwrap());
        let (ha, hb) = (forward_transform(&fa), forward_transform(&fb));
        for k in 0..grid.len() {
            let want = ha.coeffs()[k] * s + hb.coeffs()[k];
            prop_assert!((lhs.coeffs()[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn multipliers_compose(v in values(32), p in 0.2f64..2.0, q in 0.2f64..2.0) {
        let spec = forward_transform(&field(grid_1d(), v));
        let twice = apply_radial_multiplier(&apply_radial_multiplier(&spec, |r| (-p * r).exp()), |r| (-q * r * r).exp());
        let once = apply_multiplier(&spec, |xi| {
            let r = xi[0].abs();
            Complex64::new((-p * r - q * r * r).exp(), 0.0)
        });
        for (x, y) in twice.coeffs().iter().zip(once.coeffs()) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn homogenized_semigroup(v in values(32), s in 0.0f64..1.0, t in 0.0f64..1.0, m in 0.3f64..2.0, rho in 0.0f64..0.5) {
        let u = field(grid_1d(), v);
        let g = PropagatorSpec::Homogenized(rho);
        let two = propagate(&propagate(&u, &g, m, s).unwrap(), &g, m, t).unwrap();
        let one = propagate(&u, &g, m, s + t).unwrap();
        prop_assert!(close(&two, &one, 1e-12));
    }

    #[test]
    fn constant_potential_is_exact(v in values(32), c in -1.0f64..1.0, steps in 1usize..20) {
        let grid = grid_1d();
        let u0 = field(grid, v);
        let free = propagate(&u0, &PropagatorSpec::Free, 0.7, 0.6).unwrap();
        let mut pot = synthesize(&PowerSpectrum::gaussian(1.0, 1.0), &grid, 0).unwrap();
        pot.field = Field::constant(grid, c);
        let p = EvolutionParams::new(1, 0.7, 1.0, 0.6, 0.6 / steps as f64).unwrap();
        let u = solve_random(&u0, &pot, &p).unwrap();
        prop_assert!(close(&u, &free.scaled((0.6 * c).exp()), 1e-12));
    }

    #[test]
    fn solver_is_linear_in_the_initial_condition(a in values(32), b in values(32), s in -2.0f64..2.0, seed in 0u64..1000) {
        let grid = grid_1d();
        let pot = scaled_potential(&PowerSpectrum::gaussian(0.3, 2.0), &grid, 1.0, AlphaRule::Exponent(0.0), seed).unwrap();
        let p = EvolutionParams::new(1, 1.0, 1.0, 0.4, 0.05).unwrap();
        let (fa, fb) = (field(grid, a), field(grid, b));
        let lhs = solve_random(&fa.combine(s, &fb, 1.0).unwrap(), &pot, &p).unwrap();
        let rhs = solve_random(&fa, &pot, &p).unwrap().combine(s, &solve_random(&fb, &pot, &p).unwrap(), 1.0).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn script_m_is_bilinear(a in values(32), b in values(32), u in values(32), s in -2.0f64..2.0) {
        let grid = grid_1d();
        let (ma, mb, u0) = (field(grid, a), field(grid, b), field(grid, u));
        let lhs = script_m(0.5, &ma.combine(s, &mb, 1.0).unwrap(), &u0, 0.1, 0.8, 8).unwrap();
        let rhs = script_m(0.5, &ma, &u0, 0.1, 0.8, 8).unwrap()
            .combine(s, &script_m(0.5, &mb, &u0, 0.1, 0.8, 8).unwrap(), 1.0).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-11));
        let swapped = script_m(0.5, &u0, &ma, 0.1, 0.8, 8).unwrap();
        prop_assert!(close(&swapped, &script_m(0.5, &ma, &u0, 0.1, 0.8, 8).unwrap(), 1e-11));
    }

    #[test]
    fn fbm_covariance_is_positive_semidefinite(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..8),
        coef in prop::collection::vec(-1.0f64..1.0, 8),
        h in 0.05f64..0.95,
        h2 in 0.05f64..0.95,
    ) {
        for aniso in [None, Some([h, h2])] {
            let mut form = 0.0;
            let mut scale = 0.0;
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate() {
                    let c = fbm_covariance(&[a.0, a.1], &[b.0, b.1], h, aniso.as_ref().map(|v| &v[..])).unwrap();
                    form += coef[i] * coef[j] * c;
                    scale += c.abs();
                }
            }
            prop_assert!(form >= -1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn pairing_classes_partition(nbar in 1usize..6, n_frac in 0.0f64..1.0) {
        let n = ((2 * nbar) as f64 * n_frac).floor() as usize;
        let m = 2 * nbar - n;
        let graphs = enumerate_pairings(nbar).unwrap();
        let double_factorial: usize = (1..=nbar).map(|k| 2 * k - 1).product();
        prop_assert_eq!(graphs.len(), double_factorial);
        let mut crossing = 0;
        let mut simple = 0;
        for g in &graphs {
            let c = classify(g, n, m).unwrap();
            crossing += GraphFilter::Crossing.admits(c) as usize;
            prop_assert_eq!(GraphFilter::NonCrossing.admits(c), !c.is_crossing);
            prop_assert!(!c.is_crossing_simple || c.is_crossing);
            simple += c.is_simple_graph as usize;
        }
        if n == 0 || m == 0 {
            prop_assert_eq!(crossing, 0);
        }
        // the all-adjacent pairing of each row is simple exactly when both rows are even
        prop_assert_eq!(simple, (n % 2 == 0) as usize);
    }
}

#[test]
fn census_totals_are_double_factorials() {
    for row in census(6).unwrap() {
        let df: u64 = (1..=row.nbar as u64).map(|k| 2 * k - 1).product();
        assert_eq!(row.total, df);
        assert!(row.crossing_simple <= row.crossing);
    }
}
