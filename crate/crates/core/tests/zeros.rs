use kakeya_core::geomcore::Cube;
use kakeya_core::kakeya::WeightFunction;
use kakeya_core::oddzero::{find_odd_zero, subcells, warmup_bisector, GapMap, LinearOddMap, OddMap, WarmupOptions, ZeroOptions};
use kakeya_core::polyspace::make_space;
use kakeya_core::surfcalc::Region;
use kakeya_core::util;
use nalgebra::DMatrix;
use proptest::prelude::*;

// share of {p > 0} in a box by a midpoint grid
fn positive_share(p: &kakeya_core::polyspace::Polynomial, lo: &[f64], hi: &[f64]) -> f64 {
    let m = 200;
    let mut pos = 0;
    for i in 0..m {
        for j in 0..m {
            let x = [
                lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / m as f64,
                lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / m as f64,
            ];
            if p.eval(&x) > 0.0 {
                pos += 1;
            }
        }
    }
    pos as f64 / (m * m) as f64
}

#[test]
fn warmup_bisects_every_subcell() {
    let m = WeightFunction::from_entries(2, [(Cube::new(vec![0, 0]), 2.0), (Cube::new(vec![1, 0]), 1.0)]).unwrap();
    let rep = warmup_bisector(&m, &WarmupOptions::default()).unwrap();
    assert!(rep.zero.converged);
    assert_eq!(rep.cells, 5);
    let mut cells = subcells(&Cube::new(vec![0, 0]), 2.0);
    cells.extend(subcells(&Cube::new(vec![1, 0]), 1.0));
    for c in &cells {
        let Region::Box { lo, hi } = c else { unreachable!() };
        let share = positive_share(&rep.polynomial, lo, hi);
        assert!((share - 0.5).abs() < 0.05, "{lo:?}: {share}");
    }
    assert!(rep.fitted_c > 0.0);
}

#[test]
fn gap_map_is_exactly_odd() {
    let cells = subcells(&Cube::new(vec![0, 0]), 3.0);
    let map = GapMap::new(make_space(2, 4).unwrap(), cells, 7).unwrap();
    let mut r = util::rng(9);
    for _ in 0..20 {
        let z = util::random_unit(&mut r, map.dim_in());
        let neg: Vec<f64> = z.iter().map(|x| -x).collect();
        let a = map.exact(&z);
        let b = map.exact(&neg);
        assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_zero_lies_in_the_kernel(seed in 0u64..100_000, dim in 2usize..10) {
        let mut r = util::rng(seed);
        let a = DMatrix::from_fn(dim - 1, dim, |_, _| util::gaussian_vec(&mut r, 1)[0]);
        let map = LinearOddMap { matrix: a.clone() };
        let z = find_odd_zero(&map, &ZeroOptions { tol: 1e-10, seed, ..ZeroOptions::default() }).unwrap();
        prop_assert!(z.converged);
        prop_assert!((util::norm(&z.x) - 1.0).abs() < 1e-12);
        let ax = &a * nalgebra::DVector::from_column_slice(&z.x);
        prop_assert!(ax.norm() < 1e-8);
    }

    #[test]
    fn overdetermined_maps_are_refused(dim in 2usize..8) {
        let map = LinearOddMap { matrix: DMatrix::identity(dim, dim) };
        prop_assert!(find_odd_zero(&map, &ZeroOptions::default()).is_err());
    }
}
