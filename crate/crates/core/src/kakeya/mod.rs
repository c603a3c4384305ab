//! Tube instances, the cube weights `F(Q)` and `M(Q)`, the multilinear
//! Kakeya ratio, the `S_j` reduction tables, the visibility classification and
//! the ball bisection lemma.

mod appendix;
mod classify;
mod reduction;

pub use appendix::{appendix_check, AppendixReport};
pub use classify::{
    bisection_fraction, classify, pooled_bisection_fraction, ClassifyOptions, SignLabel, VisibilityClass, DEFAULT_ETA,
};
pub use reduction::{
    build_sj, check_need1, check_need2, pipeline_polynomial, CubeVisibility, Need1Report, Need2Report,
    PipelineOptions, PipelineReport, SjTable,
};

use crate::geomcore::{lattice_cubes, tube_cube_incidence, wedge_volume, Cube, Tube, TubeFamily};
use crate::polyspace::Polynomial;
use crate::util;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Cap on enumerated tuples per cube or grid point.
pub const MAX_TUPLES: usize = 10_000_000;

/// A finitely supported nonnegative function on unit cubes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFunction {
    pub n: usize,
    pub entries: BTreeMap<Cube, f64>,
}

impl WeightFunction {
    pub fn new(n: usize) -> Self {
        WeightFunction { n, entries: BTreeMap::new() }
    }

    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (Cube, f64)>) -> Result<Self> {
        let mut m = WeightFunction::new(n);
        for (q, v) in entries {
            m.insert(q, v)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, q: Cube, v: f64) -> Result<()> {
        if q.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: q.n() });
        }
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("weight {v} is not a finite nonnegative number")));
        }
        self.entries.insert(q, v);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, q: &Cube) -> f64 {
        self.entries.get(q).copied().unwrap_or(0.0)
    }

    /// Cubes with a positive value.
    pub fn support(&self) -> impl Iterator<Item = (&Cube, f64)> {
        self.entries.iter().filter(|(_, v)| **v > 0.0).map(|(q, v)| (q, *v))
    }

    pub fn power_sum(&self) -> f64 {
        self.entries.values().map(|v| v.powi(self.n as i32)).sum()
    }

    pub fn max(&self) -> f64 {
        self.entries.values().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> WeightFunction {
        WeightFunction { n: self.n, entries: self.entries.iter().map(|(q, v)| (q.clone(), v * s)).collect() }
    }
}

/// `d` tube families in `R^n` with the box that all integrals are cut to.
#[derive(Debug, Clone, PartialEq)]
pub struct KakeyaInstance {
    pub n: usize,
    pub d: usize,
    pub families: Vec<TubeFamily>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl KakeyaInstance {
    /// Builds an instance and sizes its working box to the tube interactions.
    pub fn new(n: usize, d: usize, families: Vec<TubeFamily>) -> Result<Self> {
        if d < 2 || d > n {
            return Err(Error::InvalidArgument(format!("need 2 <= d <= n, got d = {d}, n = {n}")));
        }
        if families.len() != d {
            return Err(Error::InvalidArgument(format!("expected {d} families, got {}", families.len())));
        }
        for f in &families {
            if f.tubes.is_empty() {
                return Err(Error::InvalidArgument(format!("family {} is empty", f.family)));
            }
            if f.tubes.iter().any(|t| t.n() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: f.tubes[0].n() });
            }
        }
        let mut inst = KakeyaInstance { n, d, families, lo: vec![0.0; n], hi: vec![0.0; n] };
        let (lo, hi) = inst.interaction_box();
        inst.lo = lo;
        inst.hi = hi;
        Ok(inst)
    }

    pub fn tube_count(&self) -> usize {
        self.families.iter().map(|f| f.tubes.len()).sum()
    }

    /// Smallest integer box holding the anchors and every tuple's intersection
    /// bound, widened by one unit.
    fn interaction_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for f in &self.families {
            for t in &f.tubes {
                for i in 0..n {
                    lo[i] = lo[i].min(t.anchor[i]);
                    hi[i] = hi[i].max(t.anchor[i]);
                }
            }
        }
        let _ = self.for_each_global_tuple(|tubes, w| {
            if w > 0.0 {
                if let Some(b) = TupleBound::new(tubes) {
                    for i in 0..n {
                        let r = b.half_width(i);
                        lo[i] = lo[i].min(b.center[i] - r);
                        hi[i] = hi[i].max(b.center[i] + r);
                    }
                }
            }
        });
        let lo = lo.iter().map(|v| (v - 1.0).floor()).collect();
        let hi = hi.iter().map(|v| (v + 1.0).ceil()).collect();
        (lo, hi)
    }

    /// Visits every cross-family tuple with its wedge volume.
    fn for_each_global_tuple(&self, mut f: impl FnMut(&[&Tube], f64)) -> Result<()> {
        let lists: Vec<Vec<&Tube>> = self.families.iter().map(|f| f.tubes.iter().collect()).collect();
        for_each_tuple(&lists, |ts| {
            let dirs: Vec<&[f64]> = ts.iter().map(|t| t.direction.as_slice()).collect();
            let w = wedge_volume(&dirs).unwrap_or(0.0);
            f(ts, w);
        })
    }

    /// Translates every tube by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<KakeyaInstance> {
        self.mapped(|a| a.iter().zip(v).map(|(x, y)| x + y).collect(), |d| d.to_vec())
    }

    /// Applies the linear map with row-major matrix `a` to anchors and
    /// directions; directions are renormalised, widths stay 1.
    pub fn linear_image(&self, a: &[Vec<f64>]) -> Result<KakeyaInstance> {
        let apply = |x: &[f64]| -> Vec<f64> { a.iter().map(|row| util::dot(row, x)).collect() };
        self.mapped(apply, |d| util::normalized(&apply(d)).unwrap_or_else(|| d.to_vec()))
    }

    fn mapped(
        &self,
        fa: impl Fn(&[f64]) -> Vec<f64>,
        fd: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<KakeyaInstance> {
        let mut fams = Vec::with_capacity(self.d);
        for f in &self.families {
            let mut tubes = Vec::with_capacity(f.tubes.len());
            for t in &f.tubes {
                tubes.push(Tube::new(fa(&t.anchor), fd(&t.direction), t.weight, t.family)?);
            }
            fams.push(TubeFamily { n: self.n, d: self.d, family: f.family, tubes });
        }
        KakeyaInstance::new(self.n, self.d, fams)
    }

    /// Lattice cubes of the working box.
    pub fn cubes(&self) -> Result<Vec<Cube>> {
        lattice_cubes(&self.lo, &self.hi)
    }
}

/// `{x : Σ_j dist(x, axis_j)^2 <= d}`, an ellipsoid containing the
/// intersection of the tuple's tubes.
struct TupleBound {
    center: Vec<f64>,
    /// Inverse of the quadratic form, scaled by the level.
    spread: DMatrix<f64>,
    form_det: f64,
    level: f64,
}

impl TupleBound {
    fn new(tubes: &[&Tube]) -> Option<Self> {
        let n = tubes[0].n();
        let mut h = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        let mut cst = 0.0;
        for t in tubes {
            let e = DVector::from_column_slice(&t.direction);
            let p = DMatrix::identity(n, n) - &e * e.transpose();
            let a = DVector::from_column_slice(&t.anchor);
            let pa = &p * &a;
            rhs += &pa;
            cst += a.dot(&pa);
            h += p;
        }
        let chol = h.clone().cholesky()?;
        let c = chol.solve(&rhs);
        let min_value = cst - c.dot(&rhs);
        let level = tubes.len() as f64 - min_value;
        if level <= 0.0 {
            return None;
        }
        let inv = chol.inverse();
        Some(TupleBound { center: c.iter().copied().collect(), spread: inv * level, form_det: h.determinant(), level })
    }

    fn half_width(&self, i: usize) -> f64 {
        self.spread[(i, i)].max(0.0).sqrt()
    }

    fn volume(&self) -> f64 {
        let n = self.center.len();
        util::unit_ball_volume(n) * self.level.powf(n as f64 / 2.0) / self.form_det.sqrt()
    }
}

/// Odometer over one element from each list.
pub(crate) fn for_each_tuple<T: Copy>(lists: &[Vec<T>], mut f: impl FnMut(&[T])) -> Result<()> {
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(());
    }
    let total = lists.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len()).filter(|&t| t <= MAX_TUPLES));
    let Some(_) = total else {
        let count = lists.iter().fold(1usize, |acc, l| acc.saturating_mul(l.len()));
        return Err(Error::TupleOverflow(count));
    };
    let mut idx = vec![0usize; lists.len()];
    let mut cur: Vec<T> = lists.iter().map(|l| l[0]).collect();
    loop {
        f(&cur);
        let mut k = 0;
        loop {
            if k == lists.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                cur[k] = lists[k][idx[k]];
                break;
            }
            idx[k] = 0;
            cur[k] = lists[k][0];
            k += 1;
        }
    }
}

/// RMS of `p` on a midpoint grid over the given cubes. High-degree
/// polynomials are tiny on a cube relative to their coefficient norm, so
/// coefficient-space mollifier radii are scaled by this.
pub fn value_rms<'a>(p: &Polynomial, cubes: impl Iterator<Item = &'a Cube>) -> f64 {
    let n = p.n();
    let per_axis: usize = if n <= 2 { 8 } else { 4 };
    let mut ev = p.evaluator();
    let (mut ss, mut count) = (0.0, 0usize);
    let mut x = vec![0.0; n];
    for q in cubes {
        for idx in 0..per_axis.pow(n as u32) {
            let mut rem = idx;
            for i in 0..n {
                x[i] = q.corner[i] as f64 + ((rem % per_axis) as f64 + 0.5) / per_axis as f64;
                rem /= per_axis;
            }
            let v = ev.value(&x);
            ss += v * v;
            count += 1;
        }
    }
    (ss / count.max(1) as f64).sqrt()
}

/// Parameters of [`gen_instance_with`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct InstanceParams {
    pub n: usize,
    pub d: usize,
    pub tubes_per_family: usize,
    pub spread: f64,
    pub seed: u64,
    /// Anchors are uniform in `[-anchor_half_width, anchor_half_width]^n`.
    pub anchor_half_width: f64,
    /// Directions near `e_j` when true, otherwise uniform on the sphere.
    pub transverse: bool,
}

impl InstanceParams {
    pub fn new(n: usize, d: usize, tubes_per_family: usize, spread: f64, seed: u64) -> Self {
        InstanceParams { n, d, tubes_per_family, spread, seed, anchor_half_width: 2.0, transverse: true }
    }
}

pub fn gen_instance(n: usize, d: usize, tubes_per_family: usize, spread: f64, seed: u64) -> Result<KakeyaInstance> {
    gen_instance_with(&InstanceParams::new(n, d, tubes_per_family, spread, seed))
}

pub fn gen_instance_with(p: &InstanceParams) -> Result<KakeyaInstance> {
    let (n, d) = (p.n, p.d);
    if d < 2 || d > n {
        return Err(Error::InvalidArgument(format!("need 2 <= d <= n, got d = {d}, n = {n}")));
    }
    if p.tubes_per_family == 0 {
        return Err(Error::InvalidArgument("tubes_per_family must be positive".into()));
    }
    if p.transverse && !(p.spread >= 0.0 && p.spread < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!("spread {} must lie in [0, pi/4)", p.spread)));
    }
    if !(p.anchor_half_width >= 0.0) {
        return Err(Error::InvalidArgument("anchor_half_width must be nonnegative".into()));
    }
    let mut rng = util::rng(p.seed);
    let mut families = Vec::with_capacity(d);
    for j in 0..d {
        let mut tubes = Vec::with_capacity(p.tubes_per_family);
        for _ in 0..p.tubes_per_family {
            let dir = if p.transverse {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                direction_in_cap(&mut rng, &e, p.spread)
            } else {
                util::random_unit(&mut rng, n)
            };
            let anchor: Vec<f64> =
                (0..n).map(|_| p.anchor_half_width * (2.0 * rng.random::<f64>() - 1.0)).collect();
            tubes.push(Tube::new(anchor, dir, 1.0, j)?);
        }
        families.push(TubeFamily { n, d, family: j, tubes });
    }
    KakeyaInstance::new(n, d, families)
}

/// Uniform direction within geodesic distance `spread` of the unit vector `e`.
fn direction_in_cap(rng: &mut util::Rng64, e: &[f64], spread: f64) -> Vec<f64> {
    let n = e.len();
    if spread == 0.0 {
        return e.to_vec();
    }
    // density of the angle is proportional to sin^{n-2}
    let theta = loop {
        let t = spread * rng.random::<f64>();
        let accept = if n == 2 { 1.0 } else { (t.sin() / spread.sin()).powi(n as i32 - 2) };
        if rng.random::<f64>() <= accept {
            break t;
        }
    };
    let tangent = loop {
        let g = util::gaussian_vec(rng, n);
        let c = util::dot(&g, e);
        let t: Vec<f64> = g.iter().zip(e).map(|(a, b)| a - c * b).collect();
        if let Some(t) = util::normalized(&t) {
            break t;
        }
    };
    let v: Vec<f64> = e.iter().zip(&tangent).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
    util::normalized(&v).expect("unit combination")
}

/// Tubes of each family meeting `q`.
pub fn incident_tubes<'a>(inst: &'a KakeyaInstance, q: &Cube) -> Vec<Vec<(usize, &'a Tube)>> {
    inst.families
        .iter()
        .map(|f| f.tubes.iter().enumerate().filter(|(_, t)| tube_cube_incidence(t, q)).collect())
        .collect()
}

/// `F(Q) = Σ a_{T_1}⋯a_{T_d} |e(T_1) ∧ ⋯ ∧ e(T_d)|` over tuples of tubes
/// meeting `Q`, one from each family.
pub fn cube_weight(inst: &KakeyaInstance, q: &Cube) -> Result<f64> {
    let lists: Vec<Vec<&Tube>> =
        incident_tubes(inst, q).into_iter().map(|l| l.into_iter().map(|(_, t)| t).collect()).collect();
    let mut sum = 0.0;
    let mut err = None;
    for_each_tuple(&lists, |ts| {
        let dirs: Vec<&[f64]> = ts.iter().map(|t| t.direction.as_slice()).collect();
        match wedge_volume(&dirs) {
            Ok(w) => sum += w * ts.iter().map(|t| t.weight).product::<f64>(),
            Err(e) => err = Some(e),
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(sum),
    }
}

/// `M(Q) = F(Q)^{1/(n(d-1))}` rescaled so that `Σ_Q M(Q)^n = 1`.
#[allow(non_snake_case)]
pub fn derive_M(inst: &KakeyaInstance) -> Result<WeightFunction> {
    let n = inst.n;
    let mut raw = Vec::new();
    for q in inst.cubes()? {
        let f = cube_weight(inst, &q)?;
        if f > 0.0 {
            raw.push((q, f.powf(1.0 / (n as f64 * (inst.d - 1) as f64))));
        }
    }
    if raw.is_empty() {
        return Err(Error::ZeroWeight);
    }
    let total: f64 = raw.iter().map(|(_, m)| m.powi(n as i32)).sum();
    let s = total.powf(-1.0 / n as f64);
    WeightFunction::from_entries(n, raw.into_iter().map(|(q, m)| (q, m * s)))
}

/// `λ = max(10, max_Q M(Q)^{-n})` over the support.
pub fn choose_lambda(m: &WeightFunction) -> Result<f64> {
    let min = m.support().map(|(_, v)| v).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::ZeroWeight);
    }
    Ok(10f64.max(min.powi(-(m.n as i32))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Share of the tuple-mass bound lying outside the working box.
    pub tail_fraction: f64,
    pub grid_points: usize,
}

/// Tail budget for the box-coverage check.
pub const TAIL_BUDGET: f64 = 0.01;

/// Midpoint-grid quadrature of
/// `∫ (Σ a_{T_1}χ_{T_1}⋯a_{T_d}χ_{T_d} |e(T_1)∧⋯∧e(T_d)|)^{1/(d-1)}` over the
/// working box, against `(Π_j Σ_{T_j} a_{T_j})^{1/(d-1)}`.
pub fn theorem_ratio(inst: &KakeyaInstance, grid_h: f64) -> Result<TheoremRatio> {
    if !(grid_h > 0.0) {
        return Err(Error::InvalidArgument("grid step must be positive".into()));
    }
    let n = inst.n;
    let expo = 1.0 / (inst.d - 1) as f64;
    let tail_fraction = tail_fraction(inst)?;
    if tail_fraction > TAIL_BUDGET {
        return Err(Error::BoxCoverage(tail_fraction));
    }
    // wedge of every cross-family tuple, indexed in odometer order
    let sizes: Vec<usize> = inst.families.iter().map(|f| f.tubes.len()).collect();
    let idx_lists: Vec<Vec<usize>> = sizes.iter().map(|&s| (0..s).collect()).collect();
    let mut wedges = Vec::new();
    for_each_tuple(&idx_lists, |ix| {
        let dirs: Vec<&[f64]> =
            ix.iter().enumerate().map(|(j, &i)| inst.families[j].tubes[i].direction.as_slice()).collect();
        wedges.push(wedge_volume(&dirs).unwrap_or(0.0));
    })?;
    let mut stride = vec![1usize; inst.d];
    for j in 1..inst.d {
        stride[j] = stride[j - 1] * sizes[j - 1];
    }
    let counts: Vec<usize> = (0..n).map(|i| ((inst.hi[i] - inst.lo[i]) / grid_h).round().max(1.0) as usize).collect();
    let steps: Vec<f64> = (0..n).map(|i| (inst.hi[i] - inst.lo[i]) / counts[i] as f64).collect();
    let cell_volume: f64 = steps.iter().product();
    let total_points = counts.iter().try_fold(1usize, |a, &c| a.checked_mul(c)).ok_or_else(|| {
        Error::InvalidArgument("grid too fine for the working box".into())
    })?;
    let mut lhs = 0.0;
    let mut x = vec![0.0; n];
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); inst.d];
    for lin in 0..total_points {
        let mut rem = lin;
        for i in 0..n {
            let t = rem % counts[i];
            rem /= counts[i];
            x[i] = inst.lo[i] + (t as f64 + 0.5) * steps[i];
        }
        let mut empty = false;
        for (j, f) in inst.families.iter().enumerate() {
            lists[j].clear();
            if !empty {
                lists[j].extend(f.tubes.iter().enumerate().filter(|(_, t)| t.contains(&x)).map(|(i, _)| i));
                empty = lists[j].is_empty();
            }
        }
        if empty {
            continue;
        }
        let mut s = 0.0;
        for_each_tuple(&lists, |ix| {
            let mut flat = 0;
            let mut a = 1.0;
            for (j, &i) in ix.iter().enumerate() {
                flat += i * stride[j];
                a *= inst.families[j].tubes[i].weight;
            }
            s += a * wedges[flat];
        })?;
        if s > 0.0 {
            lhs += s.powf(expo) * cell_volume;
        }
    }
    let rhs = inst.families.iter().map(|f| f.tubes.iter().map(|t| t.weight).sum::<f64>()).product::<f64>().powf(expo);
    Ok(TheoremRatio { lhs, rhs, ratio: lhs / rhs, tail_fraction, grid_points: total_points })
}

/// Fraction of `Σ a·wedge·vol(bound)` over tuples whose intersection bound
/// leaves the working box.
fn tail_fraction(inst: &KakeyaInstance) -> Result<f64> {
    let mut total = 0.0;
    let mut outside = 0.0;
    inst.for_each_global_tuple(|ts, w| {
        if w <= 0.0 {
            return;
        }
        let Some(b) = TupleBound::new(ts) else { return };
        let mass = w * ts.iter().map(|t| t.weight).product::<f64>() * b.volume();
        total += mass;
        let inside = (0..inst.n).all(|i| {
            let r = b.half_width(i);
            b.center[i] - r >= inst.lo[i] && b.center[i] + r <= inst.hi[i]
        });
        if !inside {
            outside += mass;
        }
    })?;
    Ok(if total > 0.0 { outside / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn orthogonal_fixture(n: usize, anchor: f64) -> KakeyaInstance {
        let families = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                TubeFamily { n, d: n, family: j, tubes: vec![Tube::new(vec![anchor; n], e, 1.0, j).unwrap()] }
            })
            .collect();
        KakeyaInstance::new(n, n, families).unwrap()
    }

    #[test]
    fn zero_spread_gives_basis_directions() {
        let inst = gen_instance(3, 3, 4, 0.0, 9).unwrap();
        for (j, f) in inst.families.iter().enumerate() {
            for t in &f.tubes {
                assert!(t.direction.iter().enumerate().all(|(i, &v)| v == if i == j { 1.0 } else { 0.0 }));
            }
        }
        assert_eq!(inst, gen_instance(3, 3, 4, 0.0, 9).unwrap());
        assert!(gen_instance(2, 3, 1, 0.1, 0).is_err());
        assert!(gen_instance(2, 2, 1, 1.0, 0).is_err());
    }

    #[test]
    fn cross_family_wedges_respect_the_spread() {
        let s = 0.3;
        let inst = gen_instance(2, 2, 10, s, 4).unwrap();
        for a in &inst.families[0].tubes {
            // angle to e_j is at most s
            assert!(a.direction[0].abs() >= s.cos() - 1e-12);
            for b in &inst.families[1].tubes {
                let w = wedge_volume(&[&a.direction, &b.direction]).unwrap();
                assert!(w >= (2.0 * s).cos() - 1e-12, "{w}");
            }
        }
    }

    #[test]
    fn cube_weight_fixtures() {
        let inst = orthogonal_fixture(2, 0.5);
        assert_eq!(cube_weight(&inst, &Cube::new(vec![0, 0])).unwrap(), 1.0);
        assert_eq!(cube_weight(&inst, &Cube::new(vec![5, 5])).unwrap(), 0.0);
        // two tubes per family with hand-computable wedges
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let f0 = vec![
            Tube::new(vec![0.5, 0.5], vec![1.0, 0.0], 1.0, 0).unwrap(),
            Tube::new(vec![0.5, 0.5], vec![c, c], 1.0, 0).unwrap(),
        ];
        let f1 = vec![
            Tube::new(vec![0.5, 0.5], vec![0.0, 1.0], 1.0, 1).unwrap(),
            Tube::new(vec![0.5, 0.5], vec![0.6, 0.8], 1.0, 1).unwrap(),
        ];
        let inst = KakeyaInstance::new(
            2,
            2,
            vec![TubeFamily { n: 2, d: 2, family: 0, tubes: f0 }, TubeFamily { n: 2, d: 2, family: 1, tubes: f1 }],
        )
        .unwrap();
        // |sin| of the four angles: 1, 0.8, c, |c·0.8 - c·0.6|
        let expect = 1.0 + 0.8 + c + c * 0.2;
        assert!((cube_weight(&inst, &Cube::new(vec![0, 0])).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn weights_normalise() {
        let inst = orthogonal_fixture(2, 0.5);
        let m = derive_M(&inst).unwrap();
        assert!((m.power_sum() - 1.0).abs() < 1e-12);
        // nine cubes meet both unit tubes through (0.5, 0.5), all with F = 1
        assert_eq!(m.support().count(), 9);
        for (_, v) in m.support() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let two = WeightFunction::from_entries(2, [(Cube::new(vec![0, 0]), 0.1), (Cube::new(vec![1, 0]), 1.0)]).unwrap();
        assert!((choose_lambda(&two).unwrap() - 100.0).abs() < 1e-9);
        let one = WeightFunction::from_entries(2, [(Cube::new(vec![0, 0]), 1.0)]).unwrap();
        assert_eq!(choose_lambda(&one).unwrap(), 10.0);
    }

    #[test]
    fn orthogonal_ratio_is_four() {
        let inst = orthogonal_fixture(2, 0.0);
        let r = theorem_ratio(&inst, 0.01).unwrap();
        assert!((r.ratio - 4.0).abs() < 0.2, "{r:?}");
        assert_eq!(r.rhs, 1.0);
        assert_eq!(r.tail_fraction, 0.0);
    }

    #[test]
    fn tuples_overflow_is_reported() {
        let lists = vec![vec![0u8; 4000], vec![0u8; 4000]];
        assert!(matches!(for_each_tuple(&lists, |_| {}), Err(Error::TupleOverflow(16_000_000))));
    }
}
