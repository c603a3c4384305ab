//! Small numeric helpers shared across modules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser; used to split one user seed into independent streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Returns `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let r = norm(a);
    (r > 0.0 && r.is_finite()).then(|| scaled(a, 1.0 / r))
}

pub fn gaussian_vec(rng: &mut Rng64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_unit(rng: &mut Rng64, n: usize) -> Vec<f64> {
    loop {
        if let Some(v) = normalized(&gaussian_vec(rng, n)) {
            return v;
        }
    }
}

/// Uniform point in the closed unit ball of R^n.
pub fn random_in_ball(rng: &mut Rng64, n: usize) -> Vec<f64> {
    let dir = random_unit(rng, n);
    let r = rng.random::<f64>().powf(1.0 / n as f64);
    scaled(&dir, r)
}

/// Haar-distributed orthogonal matrix, returned as column vectors.
pub fn random_rotation(rng: &mut Rng64, n: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vec(rng, n);
        for c in &cols {
            let t = dot(&v, c);
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= t * ci;
            }
        }
        if let Some(u) = normalized(&v) {
            if norm(&v) > 1e-6 {
                cols.push(u);
            }
        }
    }
    cols
}

fn gamma_half_integer(twice: u32) -> f64 {
    // Gamma(twice / 2) for a positive integer `twice`.
    match twice {
        1 => PI.sqrt(),
        2 => 1.0,
        t => (t as f64 / 2.0 - 1.0) * gamma_half_integer(t - 2),
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    PI.powf(n as f64 / 2.0) / gamma_half_integer(n as u32 + 2)
}

/// Surface measure of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Point `index` (starting at 1) of the Halton sequence in [0,1)^dim.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most 24 dimensions");
    (0..dim).map(|j| radical_inverse(index, PRIMES[j])).collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
