use rwl_core::dyadic::{Direction, DyadicCube};
use rwl_core::estimates::{fit_exponent, scan_t_ell_m, Budget};
use rwl_core::filters::FilterTable;
use rwl_core::grid::make_grid;
use rwl_core::multipliers::build_calderon_pair;
use rwl_core::wavelet::{auxiliary_system, build_wavelet_system, kernel_f, kernel_k, WaveletSystem};

fn sup_profile(sys: &WaveletSystem, q: &DyadicCube, eps: &Direction) -> Vec<(f64, f64)> {
    let pair = build_calderon_pair(sys.grid()).unwrap();
    (1..=5)
        .map(|l| (l as f64, kernel_f(sys, &pair, q, l, eps).unwrap().values.max_abs()))
        .collect()
}

#[test]
fn kernel_sup_decays_at_the_certified_rate() {
    let eps: Direction = "1".parse().unwrap();
    let q = DyadicCube::new(3, &[2]).unwrap();
    for filter in ["db2", "db3", "db4", "db6"] {
        let mut constants = Vec::new();
        for depth in [10, 11] {
            let sys = build_wavelet_system(filter, make_grid(1, depth).unwrap(), &[eps]).unwrap();
            let alpha = sys.certificate().alpha;
            let prof = sup_profile(&sys, &q, &eps);
            let slope = fit_exponent(&prof).unwrap().slope;
            assert!(slope <= -alpha + 0.25, "{filter} J={depth}: slope {slope}");
            constants.push(prof.iter().map(|(l, s)| s / (-alpha * l).exp2()).fold(0.0, f64::max));
        }
        let ratio = constants[1] / constants[0];
        assert!((0.75..=1.25).contains(&ratio), "{filter}: {constants:?}");
    }
}

#[test]
fn kernels_are_translation_covariant_exactly_and_dilation_covariant_mid_range() {
    let eps: Direction = "1".parse().unwrap();
    let grid = make_grid(1, 14).unwrap();
    let sys = build_wavelet_system("db3", grid, &[eps]).unwrap();
    let pair = build_calderon_pair(grid).unwrap();
    let norm = |q: &DyadicCube, l: i64| kernel_f(&sys, &pair, q, l, &eps).unwrap().values.l2_norm() / q.volume().sqrt();
    for l in 0..=2 {
        let base = norm(&DyadicCube::new(6, &[1]).unwrap(), l);
        let moved = norm(&DyadicCube::new(6, &[37]).unwrap(), l);
        assert!((base - moved).abs() < 1e-12 * base);
        for (j, idx) in [(5u32, 3u64), (7, 100)] {
            let other = norm(&DyadicCube::new(j, &[idx]).unwrap(), l);
            assert!((base - other).abs() < 1e-6 * base, "l = {l}, j = {j}: {base} vs {other}");
        }
    }
}

#[test]
fn kernel_k_has_zero_integral_and_rejects_bad_axes() {
    let grid = make_grid(2, 6).unwrap();
    let eps: Direction = "10".parse().unwrap();
    let sys = build_wavelet_system("db3", grid, &[eps]).unwrap();
    let pair = build_calderon_pair(grid).unwrap();
    let q = DyadicCube::new(2, &[1, 3]).unwrap();
    for l in 0..=2 {
        let k = kernel_k(&sys, &pair, &q, l, 1, 0, &eps).unwrap();
        assert!(k.values.mean().norm() < 1e-9);
    }
    assert!(kernel_k(&sys, &pair, &q, 0, 0, 0, &eps).is_err());
    assert!(kernel_k(&sys, &pair, &q, 0, 0, 1, &eps).is_err());
}

#[test]
fn t_ell_m_slices_decay_away_from_the_diagonal() {
    let grid = make_grid(1, 10).unwrap();
    let eps: Direction = "1".parse().unwrap();
    let sys = build_wavelet_system("db3", grid, &[eps]).unwrap();
    let aux = auxiliary_system(&FilterTable::default(), grid, None).unwrap();
    let pair = build_calderon_pair(grid).unwrap();
    for ell in 0..=2 {
        let (lo, hi) = sys.ell_m_range(&pair, ell).unwrap();
        let ms: Vec<i64> = (lo..=hi).collect();
        let r = scan_t_ell_m(&sys, &aux, &pair, &eps, 2.0, ell, &ms, &Budget { dense_limit: 0, ..Budget::default() }).unwrap();
        let at = |m: i64| r.estimate_at(m).unwrap().value();
        // coarse slices: m + l <= -3
        for m in lo..(-ell - 3) {
            assert!(at(m) < at(m + 1), "l = {ell}, m = {m}");
        }
        // fine slices
        for m in 1..hi {
            assert!(at(m + 1) < at(m), "l = {ell}, m = {m}");
        }
        assert!(at(hi) < 0.01 * at(0));
    }
}
