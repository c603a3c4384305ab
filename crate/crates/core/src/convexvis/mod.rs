//! The visibility body `K(Z) = {u : |u| <= 1, Σ_Z |u · n| dS <= 1}`, its
//! volume, John ellipsoid, and coloured ellipsoid nets.
//!
//! A body is described by its gauge `g(u) = max(|u|, N(u))` where `N` is a
//! symmetric seminorm (a surface integral, or a max of linear forms for
//! synthetic bodies). `g` is evaluated exactly on a fixed direction net and
//! extended between net directions by the supporting forms collected there.

mod ellipsoid;
mod net;

pub use ellipsoid::{banach_mazur, Ellipsoid};
pub use net::{
    build_net, closest_colored, net_distance, sample_in_slab, ColoredNet, ColourMatch, NetElementJson, NetParams,
};

use crate::geomcore::wedge_volume;
use crate::polyspace::Polynomial;
use crate::surfcalc::{extract_surface, mollified_surface, MollifierConfig, Region, SurfaceSampleSet};
use crate::util;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub enum GaugeSource {
    /// `N(u) = Σ w_i |u · n_i|`.
    Surface { n: usize, normals: Vec<f64>, weights: Vec<f64> },
    /// `N(u) = max_i |r_i · u|`.
    Polytope { rows: Vec<Vec<f64>> },
}

impl GaugeSource {
    pub fn from_samples(s: &SurfaceSampleSet) -> Self {
        GaugeSource::Surface { n: s.n, normals: s.normals.clone(), weights: s.weights.clone() }
    }

    pub fn seminorm(&self, u: &[f64]) -> f64 {
        match self {
            GaugeSource::Surface { n, normals, weights } => {
                normals.chunks_exact(*n).zip(weights).map(|(nv, w)| w * util::dot(nv, u).abs()).sum()
            }
            GaugeSource::Polytope { rows } => rows.iter().map(|r| util::dot(r, u).abs()).fold(0.0, f64::max),
        }
    }

    /// A subgradient `s` of `N` at `u`: `N(v) >= |s · v|` for all `v`, with equality at `u`.
    pub fn subgradient(&self, u: &[f64]) -> Vec<f64> {
        let dim = u.len();
        match self {
            GaugeSource::Surface { n, normals, weights } => {
                let mut s = vec![0.0; dim];
                for (nv, w) in normals.chunks_exact(*n).zip(weights) {
                    let t = util::dot(nv, u);
                    let sg = if t > 0.0 { *w } else if t < 0.0 { -*w } else { 0.0 };
                    for (si, ni) in s.iter_mut().zip(nv) {
                        *si += sg * ni;
                    }
                }
                s
            }
            GaugeSource::Polytope { rows } => {
                let mut best = (0.0, vec![0.0; dim]);
                for r in rows {
                    let t = util::dot(r, u);
                    if t.abs() > best.0 {
                        best = (t.abs(), if t >= 0.0 { r.clone() } else { util::scaled(r, -1.0) });
                    }
                }
                best.1
            }
        }
    }
}

/// Default direction count per dimension.
pub fn default_directions(n: usize) -> usize {
    match n {
        0..=2 => 512,
        3 => 2048,
        _ => 4096,
    }
}

/// Quasi-uniform unit vectors: equally spaced angles in 2D, a Fibonacci
/// lattice plus the coordinate axes in 3D, seeded Gaussian draws beyond.
pub fn direction_net(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let mut dirs: Vec<Vec<f64>> = (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect();
            for a in 0..3 {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; 3];
                    e[a] = s;
                    dirs.push(e);
                }
            }
            dirs
        }
        _ => {
            let mut r = util::rng(0x5EED_D1EC);
            let mut dirs: Vec<Vec<f64>> = (0..count).map(|_| util::random_unit(&mut r, n)).collect();
            for a in 0..n {
                let mut e = vec![0.0; n];
                e[a] = 1.0;
                dirs.push(e);
            }
            dirs
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaugeBody {
    pub n: usize,
    pub source: GaugeSource,
    pub directions: Vec<Vec<f64>>,
    /// `N(d_i)` on the net.
    pub seminorms: Vec<f64>,
    /// `g(d_i) = max(1, N(d_i))`.
    pub values: Vec<f64>,
    /// Supporting forms with `|s| > 1`; the others never beat `|u|` on the ball.
    active: Vec<Vec<f64>>,
}

impl GaugeBody {
    pub fn new(n: usize, source: GaugeSource, count: usize) -> Self {
        let directions = direction_net(n, count);
        let seminorms: Vec<f64> = directions.iter().map(|d| source.seminorm(d)).collect();
        let values = seminorms.iter().map(|s| s.max(1.0)).collect();
        let mut active = Vec::new();
        for (d, &s) in directions.iter().zip(&seminorms) {
            if s > 1.0 {
                let g = source.subgradient(d);
                if util::norm(&g) > 1.0 {
                    active.push(g);
                }
            }
        }
        GaugeBody { n, source, directions, seminorms, values, active }
    }

    pub fn ball(n: usize) -> Self {
        GaugeBody::new(n, GaugeSource::Polytope { rows: Vec::new() }, default_directions(n))
    }

    /// Synthetic body `B ∩ Π [-a_i, a_i]`.
    pub fn boxed(half_sides: &[f64]) -> Self {
        let n = half_sides.len();
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0 / half_sides[i];
                r
            })
            .collect();
        GaugeBody::new(n, GaugeSource::Polytope { rows }, default_directions(n))
    }

    /// Exact gauge `max(|u|, N(u))`.
    pub fn gauge(&self, u: &[f64]) -> f64 {
        util::norm(u).max(self.source.seminorm(u))
    }

    /// Gauge of the net-induced outer body: `max(|u|, max_i |s_i · u|)`.
    /// Agrees with [`gauge`](Self::gauge) on net directions and never exceeds it.
    pub fn gauge_net(&self, u: &[f64]) -> f64 {
        let mut g = util::norm(u);
        for s in &self.active {
            g = g.max(util::dot(s, u).abs());
        }
        g
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.gauge_net(u) <= 1.0
    }

    pub fn active_forms(&self) -> &[Vec<f64>] {
        &self.active
    }
}

/// `K(Z_p ∩ Q)` (or `K_ε` when `cfg` is given), with `count` net directions.
pub fn build_gauge(
    p: &Polynomial,
    q: &Region,
    cfg: Option<&MollifierConfig>,
    h: f64,
    count: usize,
) -> Result<GaugeBody> {
    let samples = match cfg {
        Some(c) => mollified_surface(p, q, c, h)?,
        None => extract_surface(p, q, h)?,
    };
    Ok(GaugeBody::new(p.n(), GaugeSource::from_samples(&samples), count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
}

/// Monte Carlo volume of `{g <= 1}` from uniform points in the unit ball.
pub fn body_volume(k: &GaugeBody, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidArgument("body volume needs at least 1000 samples".into()));
    }
    let mut r = util::rng(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let u = util::random_in_ball(&mut r, k.n);
        if k.contains(&u) {
            hits += 1;
        }
    }
    let vb = util::unit_ball_volume(k.n);
    let f = hits as f64 / samples as f64;
    Ok(VolumeEstimate { volume: vb * f, std_error: vb * (f * (1.0 - f) / samples as f64).sqrt() })
}

/// `vol(K)^{-1/n}`.
pub fn visibility_of(k: &GaugeBody, samples: usize, seed: u64) -> Result<f64> {
    let v = body_volume(k, samples, seed)?;
    if v.volume <= 0.0 {
        return Err(Error::InvalidArgument("visibility body has no sampled volume".into()));
    }
    Ok(v.volume.powf(-1.0 / k.n as f64))
}

pub fn visibility(
    p: &Polynomial,
    q: &Region,
    cfg: Option<&MollifierConfig>,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let k = build_gauge(p, q, cfg, h, default_directions(p.n()))?;
    visibility_of(&k, samples, seed)
}

/// Inner and outer certificate data of a computed John ellipsoid.
#[derive(Debug, Clone)]
pub struct JohnEllipsoid {
    pub ellipsoid: Ellipsoid,
    /// Largest exact gauge over the checked boundary points of `E` (≤ 1).
    pub inner_gauge: f64,
    /// Smallest `t` with `K ⊆ t E` on the direction net.
    pub outer_factor: f64,
}

const JOHN_TOL: f64 = 0.05;

/// Maximum-volume ellipsoid inscribed in the net-induced body, by the polar
/// problem: the minimum-volume centred ellipsoid containing
/// `{±d_i} ∪ {±s_i}` (the polar of the net-induced body), found with
/// Wolfe–Atwood coordinate steps on the D-optimal design weights.
pub fn john_ellipsoid(k: &GaugeBody) -> Result<JohnEllipsoid> {
    let n = k.n;
    let mut pts: Vec<Vec<f64>> = k.directions.clone();
    pts.extend(k.active.iter().cloned());
    let form = polar_design(&pts, n, 1e-4)?;
    let mut e = Ellipsoid::from_form(form)?;
    // inside the ball
    if e.semiaxes[0] > 1.0 {
        e = e.scaled(1.0 / e.semiaxes[0]);
    }
    // exact gauge at the ends of the principal axes and on the net
    let mut worst = 0.0f64;
    for (d, l) in e.directions.iter().zip(&e.semiaxes) {
        worst = worst.max(k.gauge(&util::scaled(d, *l)));
    }
    for d in &k.directions {
        worst = worst.max(k.gauge(d) * e.radial(d));
    }
    if worst > 1.0 + JOHN_TOL {
        return Err(Error::JohnCertificate(format!("ellipsoid leaves the body by factor {worst:.4}")));
    }
    if worst > 1.0 {
        e = e.scaled(1.0 / worst);
        worst = 1.0;
    }
    let outer = k
        .directions
        .iter()
        .zip(&k.values)
        .map(|(d, g)| 1.0 / (g * e.radial(d)))
        .fold(0.0f64, f64::max);
    if outer > (n as f64).sqrt() * (1.0 + JOHN_TOL) {
        return Err(Error::JohnCertificate(format!(
            "body exceeds sqrt(n)(1+tol) E: factor {outer:.4} vs {:.4}",
            (n as f64).sqrt() * (1.0 + JOHN_TOL)
        )));
    }
    Ok(JohnEllipsoid { ellipsoid: e, inner_gauge: worst, outer_factor: outer })
}

/// Form `A` of the polar of the minimum-volume centred ellipsoid containing `pts`.
fn polar_design(pts: &[Vec<f64>], n: usize, tol: f64) -> Result<DMatrix<f64>> {
    let m = pts.len();
    let nf = n as f64;
    let mut w = vec![1.0 / m as f64; m];
    let build = |w: &[f64]| {
        let mut x = DMatrix::zeros(n, n);
        for (p, wi) in pts.iter().zip(w) {
            let v = DVector::from_column_slice(p);
            x += &v * v.transpose() * *wi;
        }
        x
    };
    let mut xinv = build(&w).try_inverse().ok_or(Error::NotSpd)?;
    let kappa_of = |xinv: &DMatrix<f64>| pts.iter().map(|p| ellipsoid::quad_form(xinv, p)).collect::<Vec<f64>>();
    let mut kappa = kappa_of(&xinv);
    for iter in 0..200_000 {
        if iter % 500 == 499 {
            xinv = build(&w).try_inverse().ok_or(Error::NotSpd)?;
            kappa = kappa_of(&xinv);
        }
        let (jp, kp) = kappa.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (jm, km) = kappa
            .iter()
            .enumerate()
            .filter(|(i, _)| w[*i] > 0.0)
            .fold((0, f64::MAX), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        let up = kp / nf - 1.0;
        let down = 1.0 - km / nf;
        if up <= tol && down <= tol {
            break;
        }
        let (j, alpha) = if up >= down {
            (jp, (kp - nf) / (nf * (kp - 1.0)))
        } else {
            // log det increases monotonically towards the boundary when km <= 1
            let cap = w[jm] / (1.0 - w[jm]);
            let beta = if km > 1.0 { ((nf - km) / (nf * (km - 1.0))).min(cap) } else { cap };
            (jm, -beta)
        };
        // X' = (1 - α) X + α x_j x_j^T, inverse by Sherman–Morrison
        let y = &xinv * DVector::from_column_slice(&pts[j]);
        let c = alpha / (1.0 - alpha);
        let denom = 1.0 + c * kappa[j];
        let f = 1.0 / (1.0 - alpha);
        for (i, p) in pts.iter().enumerate() {
            let t = util::dot(p, y.as_slice());
            kappa[i] = f * (kappa[i] - c * t * t / denom);
        }
        xinv = (&xinv - &y * y.transpose() * (c / denom)) * f;
        for wi in w.iter_mut() {
            *wi *= 1.0 - alpha;
        }
        w[j] += alpha;
        if w[j] < 1e-15 {
            w[j] = 0.0;
        }
    }
    let x = build(&w);
    let xinv = x.clone().try_inverse().ok_or(Error::NotSpd)?;
    let kmax = pts.iter().map(|p| ellipsoid::quad_form(&xinv, p)).fold(0.0f64, f64::max);
    // outer ellipsoid {p : p^T X^{-1} p <= kmax}; its polar has form kmax X
    Ok(x * kmax)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReportStatus {
    Ok,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricMeanReport {
    pub status: ReportStatus,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub min_surface: f64,
    pub max_surface: f64,
}

/// Compares `(v_1 ∧ ... ∧ v_d)^{1/n} vis` with `D^{(n-d)/n} (Π surf_{v_j})^{1/n}`.
/// Not applicable unless every net direction has `lower <= surf_e <= d_bound`.
pub fn geometric_mean_bound(
    k: &GaugeBody,
    vis: f64,
    vs: &[Vec<f64>],
    d_bound: f64,
    lower: f64,
) -> Result<GeometricMeanReport> {
    let n = k.n as f64;
    let d = vs.len() as f64;
    let min_surface = k.seminorms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_surface = k.seminorms.iter().cloned().fold(0.0, f64::max);
    let applicable = min_surface >= lower && max_surface <= d_bound;
    let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
    let wedge = wedge_volume(&refs)?;
    let lhs = wedge.powf(1.0 / n) * vis;
    let prod: f64 = vs.iter().map(|v| k.source.seminorm(v)).product();
    let rhs = d_bound.powf((n - d) / n) * prod.powf(1.0 / n);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(GeometricMeanReport {
        status: if applicable { ReportStatus::Ok } else { ReportStatus::NotApplicable },
        lhs,
        rhs,
        ratio,
        min_surface,
        max_surface,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeReport {
    pub status: ReportStatus,
    pub vis_power: f64,
    pub degree: usize,
    pub ratio: f64,
}

/// `vis^{n/(n-1)} / deg`; applicable when some net direction has `surf_e <= 1`.
pub fn vis_degree_bound(k: &GaugeBody, vis: f64, degree: usize) -> DegreeReport {
    let n = k.n as f64;
    let applicable = k.seminorms.iter().any(|&s| s <= 1.0) && degree > 0;
    let vis_power = vis.powf(n / (n - 1.0));
    DegreeReport {
        status: if applicable { ReportStatus::Ok } else { ReportStatus::NotApplicable },
        vis_power,
        degree,
        ratio: if degree > 0 { vis_power / degree as f64 } else { f64::INFINITY },
    }
}

/// Random convexity probes: returns the number of triples `(u, v, t)` where
/// `g(tu + (1-t)v) > t g(u) + (1-t) g(v) + 1e-9 (|u| + |v|)`, together with
/// symmetry and homogeneity failures.
pub fn convexity_violations(k: &GaugeBody, triples: usize, seed: u64) -> usize {
    let mut r = util::rng(seed);
    let mut bad = 0;
    for _ in 0..triples {
        let u = util::gaussian_vec(&mut r, k.n);
        let v = util::gaussian_vec(&mut r, k.n);
        let t: f64 = r.random();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let slack = 1e-9 * (util::norm(&u) + util::norm(&v)).max(1.0);
        for g in [GaugeBody::gauge, GaugeBody::gauge_net] {
            let (gu, gv) = (g(k, &u), g(k, &v));
            if g(k, &w) > t * gu + (1.0 - t) * gv + slack {
                bad += 1;
            }
            if (g(k, &util::scaled(&u, -1.0)) - gu).abs() > slack {
                bad += 1;
            }
            if (g(k, &util::scaled(&u, 2.5)) - 2.5 * gu).abs() > slack * 2.5 {
                bad += 1;
            }
            if gu < util::norm(&u) - slack {
                bad += 1;
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyspace::make_space;
    use std::f64::consts::PI;

    #[test]
    fn flat_graph_and_empty_surface_give_the_ball() {
        let sheet = Polynomial::affine(&[0.0, 1.0], 0.5).unwrap();
        let k = build_gauge(&sheet, &Region::unit_cube(2), None, 0.05, 512).unwrap();
        for d in &k.directions {
            assert!((k.gauge(d) - 1.0).abs() < 1e-9);
        }
        let none = Polynomial::affine(&[0.0, 1.0], 5.0).unwrap();
        let k0 = build_gauge(&none, &Region::unit_cube(2), None, 0.05, 512).unwrap();
        assert!(k0.active_forms().is_empty());
        let v = body_volume(&k0, 20_000, 1).unwrap();
        assert!((v.volume - PI).abs() < 0.02 * PI);
    }

    #[test]
    fn box_body_volume_scales() {
        // the disc of radius 1/2 as a polytope gauge: many tangent forms
        let rows: Vec<Vec<f64>> = direction_net(2, 256).iter().map(|d| util::scaled(d, 2.0)).collect();
        let k = GaugeBody::new(2, GaugeSource::Polytope { rows }, 512);
        let v = body_volume(&k, 40_000, 2).unwrap();
        assert!((v.volume - 0.25 * PI).abs() < 0.02 * 0.25 * PI);
    }

    #[test]
    fn parallel_sheets_flatten_the_body() {
        let s = make_space(2, 1).unwrap();
        let mut p = Polynomial::from_terms(s, &[(vec![0, 1], 1.0), (vec![0, 0], -0.1)]).unwrap();
        for c in [0.3, 0.5, 0.7] {
            p = p.mul(&Polynomial::affine(&[0.0, 1.0], c).unwrap()).unwrap();
        }
        let k = build_gauge(&p, &Region::unit_cube(2), None, 0.02, 512).unwrap();
        let vis = visibility_of(&k, 40_000, 3).unwrap();
        // K = B ∩ {|u_2| <= 1/4}: area 2 (asin(t) + t sqrt(1 - t^2)) with t = 1/4
        let t: f64 = 0.25;
        let area = 2.0 * (t.asin() + t * (1.0 - t * t).sqrt());
        assert!((vis - area.powf(-0.5)).abs() < 0.02 * vis);
    }

    #[test]
    fn john_of_ball_and_box() {
        let j = john_ellipsoid(&GaugeBody::ball(2)).unwrap();
        for l in &j.ellipsoid.semiaxes {
            assert!((l - 1.0).abs() < 0.01);
        }
        let j = john_ellipsoid(&GaugeBody::boxed(&[0.6, 0.3])).unwrap();
        assert!((j.ellipsoid.semiaxes[0] - 0.6).abs() < 0.02 * 0.6);
        assert!((j.ellipsoid.semiaxes[1] - 0.3).abs() < 0.02 * 0.3);
        let j3 = john_ellipsoid(&GaugeBody::boxed(&[0.5, 0.4, 0.2])).unwrap();
        assert!((j3.ellipsoid.semiaxes[2] - 0.2).abs() < 0.02 * 0.2);
        assert!(j3.outer_factor <= 3f64.sqrt() * 1.05);
    }

    #[test]
    fn john_certificate_on_random_bodies() {
        let mut r = util::rng(21);
        for n in [2usize, 3] {
            let s = make_space(n, 3).unwrap();
            for _ in 0..3 {
                let p = Polynomial::random(s.clone(), &mut r);
                let k = build_gauge(&p, &Region::unit_cube(n), None, 0.05, default_directions(n)).unwrap();
                let j = john_ellipsoid(&k).unwrap();
                assert!(j.inner_gauge <= 1.0);
                assert!(j.outer_factor <= (n as f64).sqrt() * 1.05);
                assert_eq!(convexity_violations(&k, 200, 4), 0);
            }
        }
    }

    #[test]
    fn reports() {
        let k = GaugeBody::ball(2);
        let e = [vec![1.0, 0.0], vec![1.0, 0.0]];
        let rep = geometric_mean_bound(&k, 0.56, &e, 4.0, 0.5).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.status, ReportStatus::NotApplicable);
        let deg = vis_degree_bound(&k, PI.powf(-0.5), 1);
        assert_eq!(deg.status, ReportStatus::Ok);
        assert!((deg.vis_power - 1.0 / PI).abs() < 1e-12);
    }
}
