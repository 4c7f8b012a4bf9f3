use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rwl_core::dyadic::{cubes_at_scale, predecessor, translate, Direction, DyadicCube};
use rwl_core::estimates::{interp_ratio, op_norm, Budget, InterpConfig, Projector};
use rwl_core::grid::{fft, ifft, make_grid, DiscreteField, TorusGrid};
use rwl_core::haar::{haar_coefficients, haar_projection, haar_reconstruct, semenov_rearrange, square_function};
use rwl_core::multipliers::{riesz, riesz_inverse, remove_hyperplane};
use rwl_core::operator::{random_field, Domain, LinearOperatorHandle};
use rwl_core::wavelet::{build_wavelet_system, wavelet_projection};

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    prop_oneof![(3u32..=9).prop_map(|j| (1, j)), (2u32..=6).prop_map(|j| (2, j)), (2u32..=4).prop_map(|j| (3, j))]
        .prop_map(|(n, j)| make_grid(n, j).unwrap())
}

fn field(grid: TorusGrid, seed: u64) -> DiscreteField {
    random_field(grid, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn centered(u: &DiscreteField) -> DiscreteField {
    u.sub(&DiscreteField::constant(u.grid(), u.mean()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_roundtrip_and_parseval(grid in grid_strategy(), seed in any::<u64>()) {
        let u = field(grid, seed);
        let s = fft(&u);
        prop_assert!(ifft(&s).relative_l2_distance(&u) < 1e-12);
        prop_assert!((s.l2_norm() - u.l2_norm()).abs() < 1e-10 * u.l2_norm());
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity(grid in grid_strategy(), seed in any::<u64>()) {
        let u = centered(&field(grid, seed));
        let mut sum = DiscreteField::zeros(grid);
        for a in 0..grid.dim() {
            sum = sum.add(&riesz(&riesz(&u, a).unwrap(), a).unwrap());
        }
        prop_assert!(sum.add(&u).max_abs() < 1e-10);
    }

    #[test]
    fn riesz_inverse_inverts_on_restricted_domain(grid in grid_strategy(), seed in any::<u64>(), axis in 0usize..3) {
        let axis = axis % grid.dim();
        let u = remove_hyperplane(&field(grid, seed), axis).unwrap();
        let back = riesz(&riesz_inverse(&u, axis).unwrap(), axis).unwrap();
        prop_assert!(back.max_abs_distance(&u) < 1e-10);
    }

    #[test]
    fn haar_completeness_and_square_function(grid in grid_strategy(), seed in any::<u64>()) {
        let u = field(grid, seed);
        prop_assert!(haar_reconstruct(&haar_coefficients(&u)).relative_l2_distance(&u) < 1e-8);
        let c = centered(&u).l2_norm();
        prop_assert!((square_function(&u).l2_norm() - c).abs() < 1e-8 * c.max(1.0));
    }

    #[test]
    fn semenov_group_law_and_unitarity(j in 3u32..=9, seed in any::<u64>(), mu in -20i64..20, nu in -20i64..20) {
        let grid = make_grid(1, j).unwrap();
        let u = centered(&field(grid, seed));
        let a = semenov_rearrange(&semenov_rearrange(&u, &[mu], None).unwrap(), &[nu], None).unwrap();
        let b = semenov_rearrange(&u, &[mu + nu], None).unwrap();
        prop_assert!(a.max_abs_distance(&b) < 1e-10);
        let t = semenov_rearrange(&u, &[mu], None).unwrap();
        prop_assert!((t.l2_norm() - u.l2_norm()).abs() < 1e-10 * u.l2_norm().max(1.0));
    }

    #[test]
    fn semenov_group_law_in_the_plane(seed in any::<u64>(), mu in (-6i64..6, -6i64..6), nu in (-6i64..6, -6i64..6)) {
        let grid = make_grid(2, 5).unwrap();
        let u = field(grid, seed);
        let eps: Direction = "01".parse().unwrap();
        let a = semenov_rearrange(&semenov_rearrange(&u, &[mu.0, mu.1], Some(&eps)).unwrap(), &[nu.0, nu.1], Some(&eps)).unwrap();
        let b = semenov_rearrange(&u, &[mu.0 + nu.0, mu.1 + nu.1], Some(&eps)).unwrap();
        prop_assert!(a.max_abs_distance(&b) < 1e-10);
    }

    #[test]
    fn haar_projection_is_orthogonal(seed in any::<u64>(), mask in 1usize..4, lo in 0u32..3, width in 0u32..3) {
        let grid = make_grid(2, 5).unwrap();
        let eps = Direction::from_mask(2, mask).unwrap();
        let u = field(grid, seed);
        let v = field(grid, seed ^ 1);
        let scales = lo..=lo + width;
        let pu = haar_projection(&u, &eps, scales.clone()).unwrap();
        let pv = haar_projection(&v, &eps, scales.clone()).unwrap();
        prop_assert!((pu.inner(&v) - u.inner(&pv)).norm() < 1e-10);
        prop_assert!(haar_projection(&pu, &eps, scales).unwrap().max_abs_distance(&pu) < 1e-12);
    }

    #[test]
    fn wavelet_projection_axioms(seed in any::<u64>(), filter in prop::sample::select(vec!["haar", "db2", "db3", "db4"]), mask in 1usize..4) {
        let grid = make_grid(2, 6).unwrap();
        let eps = Direction::from_mask(2, mask).unwrap();
        let sys = build_wavelet_system(filter, grid, &Direction::all(2)).unwrap();
        let u = field(grid, seed);
        let v = field(grid, seed ^ 7);
        let wu = wavelet_projection(&sys, &u, &eps).unwrap();
        let wv = wavelet_projection(&sys, &v, &eps).unwrap();
        prop_assert!(wavelet_projection(&sys, &wu, &eps).unwrap().max_abs_distance(&wu) < 1e-9);
        prop_assert!((wu.inner(&v) - u.inner(&wv)).norm() < 1e-9);
        let rest = u.sub(&wu);
        prop_assert!((wu.l2_norm().powi(2) + rest.l2_norm().powi(2) - u.l2_norm().powi(2)).abs() < 1e-9 * u.l2_norm().powi(2));
    }

    #[test]
    fn wavelet_reconstruction(grid in grid_strategy(), seed in any::<u64>(), filter in prop::sample::select(vec!["haar", "db2", "db3", "db4", "db6"])) {
        prop_assume!(grid.depth() >= 5);
        let sys = build_wavelet_system(filter, grid, &Direction::all(grid.dim())).unwrap();
        let u = field(grid, seed);
        prop_assert!(sys.synthesize(&sys.analyze(&u)).relative_l2_distance(&u) < 1e-8);
    }

    #[test]
    fn interp_ratio_is_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3, p in prop::sample::select(vec![4.0 / 3.0, 2.0, 4.0])) {
        let grid = make_grid(2, 6).unwrap();
        let eps: Direction = "10".parse().unwrap();
        let sys = build_wavelet_system("db2", grid, &[eps]).unwrap();
        let u = field(grid, seed);
        for (alpha, proj) in [(0.55, Projector::Wavelet), (1.0, Projector::Wavelet), (0.55, Projector::Haar)] {
            let cfg = InterpConfig::new(p, alpha, 0, eps, proj).unwrap();
            let a = interp_ratio(&u, &cfg, &sys).unwrap();
            let b = interp_ratio(&u.scaled_real(c), &cfg, &sys).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn dense_lower_bound_below_certified(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let grid = make_grid(1, 5).unwrap();
        let shift = move |u: &DiscreteField, s: i64| {
            semenov_rearrange(u, &[s], None).map(|v| v.scaled_real(scale))
        };
        let op = LinearOperatorHandle::new("shift", grid, Domain::MeanZero, move |u| shift(u, 3))
            .with_adjoint(move |v| shift(v, -3));
        let est = op_norm(&op, 2.0, &Budget::default().with_seed(seed)).unwrap();
        prop_assert!(est.lower <= est.certified.unwrap() * (1.0 + 1e-12));
        prop_assert!((est.value() - scale).abs() < 1e-9 * scale);
    }

    #[test]
    fn cube_translation_and_ancestry(j in 1u32..8, idx in any::<u64>(), mu in -50i64..50, lambda in 0u32..4) {
        let q = DyadicCube::new(j, &[idx % (1 << j)]).unwrap();
        let t = translate(&translate(&q, &[mu]), &[-mu]);
        prop_assert_eq!(t, q);
        let lambda = lambda.min(j);
        let w = predecessor(&q, lambda).unwrap();
        prop_assert!(w.contains(&q));
        prop_assert_eq!(w.scale(), j - lambda);
        prop_assert!(cubes_at_scale(&make_grid(1, 9).unwrap(), j).unwrap().contains(&q));
    }
}

#[test]
fn square_function_identity_over_hundred_fields() {
    let grid = make_grid(2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let u = random_field(grid, &mut rng);
        let c = centered(&u).l2_norm();
        assert!((square_function(&u).l2_norm() - c).abs() < 1e-8);
    }
}
