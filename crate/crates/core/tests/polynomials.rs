use kakeya_core::polyspace::{make_space, space_dim, PolySpace, Polynomial};
use kakeya_core::util;
use proptest::prelude::*;

// two-sample Kolmogorov–Smirnov statistic
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn cap_draws_follow_the_uniform_cap_law() {
    // oracle: uniform points on the sphere, kept when inside the cap
    for (n, k, eps) in [(1, 2, 0.5), (2, 2, 0.9)] {
        let space = make_space(n, k).unwrap();
        let mut r = util::rng(40);
        let p = Polynomial::random(space.clone(), &mut r);
        let draws = 3000;
        let got: Vec<f64> =
            (0..draws).map(|i| p.geodesic_distance(&p.perturb_in_cap(eps, i as u64).unwrap())).collect();
        let mut oracle = Vec::new();
        while oracle.len() < draws {
            let q = Polynomial::random(space.clone(), &mut r);
            let d = p.geodesic_distance(&q);
            if d <= eps {
                oracle.push(d);
            }
        }
        assert!(got.iter().all(|&d| d <= eps + 1e-12));
        // 1% critical value for equal samples is 1.63 sqrt(2 / m)
        let crit = 1.63 * (2.0 / draws as f64).sqrt();
        let stat = ks(got, oracle);
        assert!(stat < crit, "n={n} k={k}: KS {stat} vs {crit}");
    }
}

#[test]
fn cap_draw_direction_is_isotropic() {
    // the tangent component should have no preferred direction
    let space = make_space(2, 1).unwrap();
    let p = Polynomial::new(space, vec![1.0, 0.0, 0.0]).unwrap();
    let mut mean = [0.0f64; 2];
    let m = 4000;
    for i in 0..m {
        let q = p.perturb_in_cap(0.3, i).unwrap();
        let t = util::normalized(&q.coeffs()[1..]).unwrap();
        mean[0] += t[0] / m as f64;
        mean[1] += t[1] / m as f64;
    }
    assert!(mean[0].abs() < 0.05 && mean[1].abs() < 0.05, "{mean:?}");
}

#[test]
fn json_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("kakeya-poly-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let space = PolySpace::with_frame(3, 4, vec![0.5, -1.0, 2.0], 1.5).unwrap();
    let p = Polynomial::random(space, &mut util::rng(8));
    let path = dir.join("p.json");
    std::fs::write(&path, serde_json::to_string_pretty(&p.to_json()).unwrap()).unwrap();
    let back = Polynomial::from_json_str(&std::fs::read_to_string(&path).unwrap(), false).unwrap();
    assert_eq!(back.coeffs(), p.coeffs());
    let x = [0.1, 0.2, 0.3];
    assert_eq!(back.eval(&x), p.eval(&x));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dimensions_match_binomials() {
    // C(n + k, n)
    fn binom(a: usize, b: usize) -> usize {
        (0..b).fold(1, |acc, i| acc * (a - i) / (i + 1))
    }
    for n in 1..=4 {
        for k in 0..=8 {
            assert_eq!(space_dim(n, k), binom(n + k, n));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_as_product(seed in 0u64..10_000, n in 1usize..4) {
        let mut r = util::rng(seed);
        let a = Polynomial::random(make_space(n, 2).unwrap(), &mut r);
        let b = Polynomial::random(make_space(n, 3).unwrap(), &mut r);
        let ab = a.mul(&b).unwrap();
        let x: Vec<f64> = util::gaussian_vec(&mut r, n);
        let want = a.eval(&x) * b.eval(&x);
        prop_assert!((ab.eval(&x) - want).abs() <= 1e-10 * (1.0 + want.abs()));
        prop_assert_eq!(ab.degree() <= 5, true);
    }

    #[test]
    fn perturbation_is_odd_and_inside_the_cap(seed in 0u64..10_000, eps in 0.01f64..1.0) {
        let p = Polynomial::random(make_space(2, 3).unwrap(), &mut util::rng(seed));
        let q = p.perturb_in_cap(eps, seed).unwrap();
        let qn = p.neg().perturb_in_cap(eps, seed).unwrap();
        prop_assert!(p.geodesic_distance(&q) <= eps + 1e-12);
        prop_assert!(q.coeffs().iter().zip(qn.coeffs()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn box_bound_dominates_samples(seed in 0u64..10_000) {
        let mut r = util::rng(seed);
        let p = Polynomial::random(make_space(2, 4).unwrap(), &mut r);
        let c = util::gaussian_vec(&mut r, 2);
        let half = [0.3, 0.1];
        let (v0, dev) = p.box_value_bound(&c, &half);
        for _ in 0..50 {
            let u = util::gaussian_vec(&mut r, 2);
            let x = [c[0] + half[0] * u[0].tanh(), c[1] + half[1] * u[1].tanh()];
            prop_assert!((p.eval(&x) - v0).abs() <= dev + 1e-12);
        }
    }
}
