use std::f64::consts::PI;

use fpde_core::linear::{solve_linear, LinearCoefficients, Scheme, StepperConfig};
use fpde_core::norms::{holder_seminorm, lp_norm};
use fpde_core::snapshot;
use fpde_core::spectral::{
    carre_du_champ, cauchy_semigroup, gradient, half_laplacian, Grid, MultiplierOp, ScalarField,
    TrigSeries,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn series(dim: usize, kmax: i64, seed: u64) -> TrigSeries {
    TrigSeries::random(dim, 2.0 * PI, kmax, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn grid(dim: usize, n: usize) -> Grid {
    Grid::new(dim, n, 2.0 * PI).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn riesz_divergence_of_gradient_is_minus_half_laplacian(
        dim in 1usize..=2,
        kmax in 1i64..=6,
        seed in any::<u64>(),
    ) {
        let g = grid(dim, 32);
        let u = series(dim, kmax, seed).sample(&g).unwrap();
        let r = MultiplierOp::riesz_divergence(&g, 1.0).unwrap();
        let rhs = r.apply(&gradient(&u)).unwrap().into_components().remove(0);
        let res = (&half_laplacian(&u) + &rhs).sup_norm();
        prop_assert!(res <= 1e-12 * u.sup_norm().max(1.0), "residual {res}");
    }

    #[test]
    fn semigroup_contracts_l2_and_composes(
        dim in 1usize..=3,
        t in 0.0f64..2.0,
        s in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let g = grid(dim, 16);
        let f = series(dim, 3, seed).sample(&g).unwrap();
        let pt = cauchy_semigroup(1.0, t, &f).unwrap();
        prop_assert!(lp_norm(&pt, 2.0).unwrap() <= lp_norm(&f, 2.0).unwrap() * (1.0 + 1e-14));
        let both = cauchy_semigroup(1.0, s, &pt).unwrap();
        let once = cauchy_semigroup(1.0, t + s, &f).unwrap();
        prop_assert!((&both - &once).sup_norm() <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn carre_du_champ_is_nonnegative_on_arbitrary_samples(
        values in prop::collection::vec(-10.0f64..10.0, 64),
    ) {
        let g = grid(1, 64);
        let f = ScalarField::new(g, values).unwrap();
        let e = carre_du_champ(&f, &f).unwrap();
        prop_assert!(e.min() >= -1e-8 * f.sup_norm().powi(2).max(1.0));
    }

    #[test]
    fn snapshots_round_trip_bit_for_bit(
        dim in 1usize..=3,
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 512),
    ) {
        let n = [512, 16, 8][dim - 1];
        let g = grid(dim, n);
        let f = ScalarField::new(g, values[..n.pow(dim as u32)].to_vec()).unwrap();
        let bytes = snapshot::encode(&f);
        let back = snapshot::decode(&bytes).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(snapshot::encode(&back), bytes);
    }

    #[test]
    fn holder_seminorm_is_homogeneous_and_shift_invariant(
        c in -5.0f64..5.0,
        shift in 0usize..32,
        seed in any::<u64>(),
    ) {
        let g = grid(1, 32);
        let f = series(1, 4, seed).sample(&g).unwrap();
        let base = holder_seminorm(&f, 0.5).unwrap().value;
        let scaled = holder_seminorm(&f.scaled(c), 0.5).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * base.max(1.0));
        let mut v = f.values().to_vec();
        v.rotate_left(shift);
        let moved = holder_seminorm(&ScalarField::new(g, v).unwrap(), 0.5).unwrap().value;
        prop_assert!((moved - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn constant_forcing_moves_the_mean_linearly(
        c in -2.0f64..2.0,
        t_end in 0.05f64..0.5,
    ) {
        let g = grid(1, 16);
        let a = ScalarField::from_fn(&g, |x| 1.5 + 0.3 * x[0].cos()).unwrap();
        let coeffs = LinearCoefficients::new(a, 1.0, 2.0)
            .with_f(ScalarField::constant(&g, c));
        let u0 = ScalarField::from_fn(&g, |x| x[0].sin()).unwrap();
        let tr = solve_linear(&u0, &coeffs, &StepperConfig::fixed(0.01, t_end, Scheme::Heun)).unwrap();
        let mean = tr.terminal().unwrap().component(0).mean();
        prop_assert!((mean - c * t_end).abs() <= 1e-10, "mean {mean} vs {}", c * t_end);
    }
}
