use kakeya_core::convexvis::{
    banach_mazur, body_volume, build_gauge, default_directions, john_ellipsoid, visibility_of, Ellipsoid, GaugeBody,
};
use kakeya_core::polyspace::Polynomial;
use kakeya_core::surfcalc::Region;
use kakeya_core::util;
use proptest::prelude::*;
use std::f64::consts::PI;

fn random_ellipsoid(r: &mut util::Rng64, n: usize) -> Ellipsoid {
    let rot = util::random_rotation(r, n);
    let axes: Vec<f64> = util::gaussian_vec(r, n).iter().map(|g| (0.6 * g).exp()).collect();
    Ellipsoid::from_axes(&rot, &axes).unwrap()
}

#[test]
fn box_body_volume_and_visibility() {
    // B ∩ [-a, a]^2 is the square when a <= 1/sqrt 2
    let a = 0.5;
    let k = GaugeBody::boxed(&[a, a]);
    let v = body_volume(&k, 200_000, 1).unwrap();
    assert!((v.volume - 4.0 * a * a).abs() < 4.0 * v.std_error, "{v:?}");
    let vis = visibility_of(&k, 200_000, 1).unwrap();
    assert!((vis - 1.0 / (2.0 * a)).abs() < 0.01);
    let j = john_ellipsoid(&k).unwrap();
    for l in &j.ellipsoid.semiaxes {
        assert!((l - a).abs() < 0.02 * a, "{:?}", j.ellipsoid.semiaxes);
    }
}

#[test]
fn one_chord_squeezes_the_body() {
    // Z ∩ [0,1]^2 is the segment y = 1/2: N(u) = |u_2|, so K = B ∩ {|u_2| <= 1}
    // is the whole disc; two segments give |u_2| <= 1/2
    let one = Polynomial::affine(&[0.0, 1.0], 0.5).unwrap();
    let k1 = build_gauge(&one, &Region::unit_cube(2), None, 0.05, default_directions(2)).unwrap();
    assert!((body_volume(&k1, 50_000, 2).unwrap().volume - PI).abs() < 1e-9);
    let two = one.mul(&Polynomial::affine(&[0.0, 1.0], 0.25).unwrap()).unwrap();
    let k2 = build_gauge(&two, &Region::unit_cube(2), None, 0.05, default_directions(2)).unwrap();
    // disc cut to the band |u_2| <= 1/2
    let band = 2.0 * ((0.5f64).asin() + 0.5 * (1.0f64 - 0.25).sqrt());
    let v = body_volume(&k2, 200_000, 3).unwrap();
    assert!((v.volume - band).abs() < 4.0 * v.std_error + 1e-3, "{v:?} vs {band}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banach_mazur_is_a_metric(seed in 0u64..100_000, n in 2usize..4) {
        let mut r = util::rng(seed);
        let (a, b, c) = (random_ellipsoid(&mut r, n), random_ellipsoid(&mut r, n), random_ellipsoid(&mut r, n));
        let ab = banach_mazur(&a, &b).unwrap();
        prop_assert_eq!(ab, banach_mazur(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        let ac = banach_mazur(&a, &c).unwrap();
        let cb = banach_mazur(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
        // scaling one side by t moves the distance by at most log t
        let t: f64 = 1.7;
        prop_assert!((banach_mazur(&a.scaled(t), &b).unwrap() - ab).abs() <= t.ln() + 1e-9);
    }

    // oracle: radial ratios over many directions bound the distance from below
    #[test]
    fn banach_mazur_dominates_radial_ratios(seed in 0u64..100_000) {
        let mut r = util::rng(seed);
        let (a, b) = (random_ellipsoid(&mut r, 2), random_ellipsoid(&mut r, 2));
        let d = banach_mazur(&a, &b).unwrap();
        let mut worst = 0.0f64;
        for i in 0..3600 {
            let t = PI * i as f64 / 3600.0;
            let u = [t.cos(), t.sin()];
            worst = worst.max((a.radial(&u) / b.radial(&u)).ln().abs());
        }
        prop_assert!(worst <= d + 1e-9);
        prop_assert!(worst >= d - 1e-4);
    }
}
