//! Dense polynomials of bounded degree in `n` real variables.
//!
//! A [`PolySpace`] fixes the monomial basis (graded lexicographic order) and an
//! optional affine frame: monomials are taken in the local coordinates
//! `y = (x - origin) / scale`. The default frame is the identity, so
//! `make_space(n, k)` gives ordinary monomials in `x`. A frame changes only the
//! basis, never the set of polynomials, so zero sets and every degree-0
//! homogeneous quantity are frame independent.

use crate::util::{self, Rng64};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

#[derive(Debug)]
pub struct PolySpace {
    n: usize,
    k: usize,
    basis: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    origin: Vec<f64>,
    scale: f64,
    shift_plan: OnceLock<Vec<ShiftTerm>>,
}

#[derive(Debug)]
struct ShiftTerm {
    from: usize,
    to: usize,
    mult: f64,
    diff: Vec<u32>,
}

impl PartialEq for PolySpace {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.origin == other.origin && self.scale == other.scale
    }
}

/// Exponent vectors of total degree exactly `deg`, lexicographically descending.
fn compositions(n: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == n {
        prefix.push(deg);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=deg).rev() {
        prefix.push(first);
        compositions(n, deg - first, prefix, out);
        prefix.pop();
    }
}

/// Number of monomials of degree at most `k` in `n` variables, `C(n + k, n)`.
pub fn space_dim(n: usize, k: usize) -> usize {
    let mut num: u128 = 1;
    for i in 0..n as u128 {
        num = num * (k as u128 + 1 + i) / (i + 1);
    }
    num as usize
}

pub fn make_space(n: usize, k: usize) -> Result<Arc<PolySpace>> {
    PolySpace::with_frame(n, k, vec![0.0; n], 1.0)
}

impl PolySpace {
    pub fn with_frame(n: usize, k: usize, origin: Vec<f64>, scale: f64) -> Result<Arc<PolySpace>> {
        if n == 0 {
            return Err(Error::InvalidArgument("polynomial space needs n >= 1".into()));
        }
        if origin.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: origin.len() });
        }
        if !(scale > 0.0 && scale.is_finite()) || origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("frame must be finite with positive scale".into()));
        }
        let mut basis = Vec::with_capacity(space_dim(n, k));
        for deg in 0..=k as u32 {
            compositions(n, deg, &mut Vec::with_capacity(n), &mut basis);
        }
        let index = basis.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        Ok(Arc::new(PolySpace { n, k, basis, index, origin, scale, shift_plan: OnceLock::new() }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Dimension `N` of the coefficient sphere `S^N`.
    pub fn sphere_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn has_identity_frame(&self) -> bool {
        self.scale == 1.0 && self.origin.iter().all(|&v| v == 0.0)
    }

    pub fn to_local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.origin).map(|(xi, oi)| (xi - oi) / self.scale).collect()
    }

    /// Values of every basis monomial at `x`, in basis order.
    pub fn monomials_at(&self, x: &[f64]) -> Vec<f64> {
        let pw = self.power_table(x);
        let stride = self.k + 1;
        self.basis
            .iter()
            .map(|e| e.iter().enumerate().map(|(i, &a)| pw[i * stride + a as usize]).product())
            .collect()
    }

    fn power_table(&self, x: &[f64]) -> Vec<f64> {
        let mut pw = vec![1.0; self.n * (self.k + 1)];
        self.fill_powers(x, &mut pw);
        pw
    }

    fn fill_powers(&self, x: &[f64], pw: &mut [f64]) {
        let stride = self.k + 1;
        for i in 0..self.n {
            let y = (x[i] - self.origin[i]) / self.scale;
            let row = &mut pw[i * stride..(i + 1) * stride];
            row[0] = 1.0;
            for e in 1..stride {
                row[e] = row[e - 1] * y;
            }
        }
    }

    fn shift_plan(&self) -> &[ShiftTerm] {
        self.shift_plan.get_or_init(|| {
            let mut plan = Vec::new();
            for (from, alpha) in self.basis.iter().enumerate() {
                let mut beta = vec![0u32; self.n];
                loop {
                    let mult: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
                    let diff = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
                    plan.push(ShiftTerm { from, to: self.index[&beta], mult, diff });
                    // odometer over beta <= alpha
                    let mut i = 0;
                    loop {
                        if i == self.n {
                            break;
                        }
                        if beta[i] < alpha[i] {
                            beta[i] += 1;
                            break;
                        }
                        beta[i] = 0;
                        i += 1;
                    }
                    if i == self.n {
                        break;
                    }
                }
            }
            plan
        })
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone)]
pub struct Polynomial {
    space: Arc<PolySpace>,
    coeffs: Vec<f64>,
    normalized: bool,
}

impl Polynomial {
    pub fn new(space: Arc<PolySpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroPolynomial);
        }
        let normalized = (util::norm(&coeffs) - 1.0).abs() <= 1e-12;
        Ok(Polynomial { space, coeffs, normalized })
    }

    pub fn from_terms(space: Arc<PolySpace>, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut coeffs = vec![0.0; space.dim()];
        for (exps, c) in terms {
            if exps.len() != space.n() {
                return Err(Error::DimensionMismatch { expected: space.n(), got: exps.len() });
            }
            let i = space.index_of(exps).ok_or_else(|| {
                Error::InvalidArgument(format!("monomial {exps:?} exceeds degree {}", space.k()))
            })?;
            coeffs[i] += c;
        }
        Polynomial::new(space, coeffs)
    }

    /// The affine polynomial `a . x - b` in the identity frame.
    pub fn affine(a: &[f64], b: f64) -> Result<Self> {
        let n = a.len();
        let space = make_space(n, 1)?;
        let mut terms = vec![(vec![0u32; n], -b)];
        for (i, &ai) in a.iter().enumerate() {
            let mut e = vec![0u32; n];
            e[i] = 1;
            terms.push((e, ai));
        }
        Polynomial::from_terms(space, &terms)
    }

    /// Gaussian random coefficients, normalized.
    pub fn random(space: Arc<PolySpace>, rng: &mut Rng64) -> Self {
        let coeffs = util::random_unit(rng, space.dim());
        Polynomial { space, coeffs, normalized: true }
    }

    pub fn space(&self) -> &Arc<PolySpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn coeff_norm(&self) -> f64 {
        util::norm(&self.coeffs)
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.space
            .basis
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(e, _)| e.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn evaluator(&self) -> PolyEvaluator<'_> {
        PolyEvaluator { poly: self, pw: vec![1.0; self.space.n * (self.space.k + 1)] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.evaluator().value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n()];
        self.evaluator().value_grad(x, &mut g);
        g
    }

    pub fn normalize(&self) -> Result<Polynomial> {
        let r = self.coeff_norm();
        if r == 0.0 {
            return Err(Error::ZeroPolynomial);
        }
        if self.normalized {
            return Ok(self.clone());
        }
        let coeffs = self.coeffs.iter().map(|c| c / r).collect();
        Ok(Polynomial { space: self.space.clone(), coeffs, normalized: true })
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            normalized: self.normalized,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Result<Polynomial> {
        Polynomial::new(self.space.clone(), self.coeffs.iter().map(|c| c * lambda).collect())
    }

    /// Product of two polynomials sharing `n` and frame.
    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        let (a, b) = (&*self.space, &*other.space);
        if a.n != b.n || a.origin != b.origin || a.scale != b.scale {
            return Err(Error::InvalidArgument("product needs a common frame".into()));
        }
        let space = PolySpace::with_frame(a.n, a.k + b.k, a.origin.clone(), a.scale)?;
        let mut coeffs = vec![0.0; space.dim()];
        for (ea, &ca) in a.basis.iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (eb, &cb) in b.basis.iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                coeffs[space.index[&e]] += ca * cb;
            }
        }
        Polynomial::new(space, coeffs)
    }

    /// Re-express in a space of the same frame and higher degree.
    pub fn lift(&self, k: usize) -> Result<Polynomial> {
        if k < self.space.k {
            return Err(Error::InvalidArgument("cannot lift to a lower degree".into()));
        }
        let space = PolySpace::with_frame(self.space.n, k, self.space.origin.clone(), self.space.scale)?;
        let mut coeffs = vec![0.0; space.dim()];
        for (e, &c) in self.space.basis.iter().zip(&self.coeffs) {
            coeffs[space.index[e]] = c;
        }
        Polynomial::new(space, coeffs)
    }

    /// Angle between coefficient vectors, i.e. distance on the coefficient sphere.
    pub fn geodesic_distance(&self, other: &Polynomial) -> f64 {
        let c = util::dot(&self.coeffs, &other.coeffs) / (self.coeff_norm() * other.coeff_norm());
        c.clamp(-1.0, 1.0).acos()
    }

    /// Value at the centre of a box and a bound on `|p(x) - p(center)|` over the
    /// box `center ± half`, from the Taylor expansion about the centre.
    pub fn box_value_bound(&self, center: &[f64], half: &[f64]) -> (f64, f64) {
        let sp = &*self.space;
        let yc = sp.to_local(center);
        let w: Vec<f64> = half.iter().map(|h| h / sp.scale).collect();
        let stride = sp.k + 1;
        let mut pw = vec![1.0; sp.n * stride];
        let mut ww = vec![1.0; sp.n * stride];
        for i in 0..sp.n {
            for e in 1..stride {
                pw[i * stride + e] = pw[i * stride + e - 1] * yc[i];
                ww[i * stride + e] = ww[i * stride + e - 1] * w[i];
            }
        }
        let mut shifted = vec![0.0; sp.dim()];
        for t in sp.shift_plan() {
            let c = self.coeffs[t.from];
            if c == 0.0 {
                continue;
            }
            let m: f64 = t.diff.iter().enumerate().map(|(i, &d)| pw[i * stride + d as usize]).product();
            shifted[t.to] += c * t.mult * m;
        }
        let dev = sp
            .basis
            .iter()
            .zip(&shifted)
            .skip(1)
            .map(|(e, q)| q.abs() * e.iter().enumerate().map(|(i, &a)| ww[i * stride + a as usize]).product::<f64>())
            .sum();
        (shifted[0], dev)
    }

    /// Uniform draw from the geodesic cap of radius `eps` about `self` on the
    /// coefficient sphere. Odd in `self`: the draw for `-p` is minus the draw
    /// for `p` under the same seed.
    pub fn perturb_in_cap(&self, eps: f64, seed: u64) -> Result<Polynomial> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("cap radius must lie in (0, 1), got {eps}")));
        }
        let base = self.normalize()?;
        let lead = base
            .coeffs
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, c)| if c.abs() > best.1 { (i, c.abs()) } else { best })
            .0;
        let sign = if base.coeffs[lead] < 0.0 { -1.0 } else { 1.0 };
        let canon: Vec<f64> = base.coeffs.iter().map(|c| sign * c).collect();
        let sphere_dim = self.space.sphere_dim();
        if sphere_dim == 0 {
            return Ok(base);
        }
        let mut rng = util::rng(seed);
        let tangent = loop {
            let g = util::gaussian_vec(&mut rng, canon.len());
            let t = util::dot(&g, &canon);
            let mut v: Vec<f64> = g.iter().zip(&canon).map(|(gi, ci)| gi - t * ci).collect();
            // a draw nearly parallel to p leaves only roundoff
            if util::norm(&v) < 1e-6 * util::norm(&g) {
                continue;
            }
            let t2 = util::dot(&v, &canon);
            v.iter_mut().zip(&canon).for_each(|(vi, ci)| *vi -= t2 * ci);
            if let Some(u) = util::normalized(&v) {
                break u;
            }
        };
        let theta = sample_cap_radius(sphere_dim, eps, &mut rng);
        let (s, c) = theta.sin_cos();
        let raw: Vec<f64> = canon.iter().zip(&tangent).map(|(p, v)| c * p + s * v).collect();
        let r = util::norm(&raw);
        let coeffs = raw.iter().map(|x| sign * x / r).collect();
        Ok(Polynomial { space: self.space.clone(), coeffs, normalized: true })
    }

    pub fn to_json(&self) -> PolyJson {
        let sp = &*self.space;
        PolyJson {
            n: sp.n,
            k: sp.k,
            terms: sp
                .basis
                .iter()
                .zip(&self.coeffs)
                .filter(|(_, &c)| c != 0.0)
                .map(|(e, &c)| TermJson { exps: e.clone(), coef: c })
                .collect(),
            origin: (!sp.has_identity_frame()).then(|| sp.origin.clone()),
            scale: (!sp.has_identity_frame()).then_some(sp.scale),
        }
    }

    pub fn from_json(doc: &PolyJson, normalize: bool) -> Result<Polynomial> {
        let origin = doc.origin.clone().unwrap_or_else(|| vec![0.0; doc.n]);
        let space = PolySpace::with_frame(doc.n, doc.k, origin, doc.scale.unwrap_or(1.0))?;
        let mut coeffs = vec![0.0; space.dim()];
        for t in &doc.terms {
            if t.exps.len() != doc.n {
                return Err(Error::DimensionMismatch { expected: doc.n, got: t.exps.len() });
            }
            let i = space.index_of(&t.exps).ok_or_else(|| {
                Error::InvalidArgument(format!("term {:?} exceeds degree {}", t.exps, doc.k))
            })?;
            if coeffs[i] != 0.0 {
                return Err(Error::InvalidArgument(format!("duplicate term {:?}", t.exps)));
            }
            coeffs[i] = t.coef;
        }
        let p = Polynomial::new(space, coeffs)?;
        if normalize {
            p.normalize()
        } else {
            Ok(p)
        }
    }

    pub fn from_json_str(s: &str, normalize: bool) -> Result<Polynomial> {
        Polynomial::from_json(&serde_json::from_str(s)?, normalize)
    }
}

/// Geodesic radius of a uniform point in a cap of `S^dim`: density proportional
/// to `sin(theta)^(dim-1)` on `[0, eps]`, sampled by tabulated inverse CDF.
fn sample_cap_radius(dim: usize, eps: f64, rng: &mut Rng64) -> f64 {
    use rand::Rng;
    const GRID: usize = 4096;
    let step = eps / GRID as f64;
    let power = (dim - 1) as f64;
    let logf: Vec<f64> = (0..=GRID)
        .map(|i| if power == 0.0 { 0.0 } else { power * (i as f64 * step).sin().ln() })
        .collect();
    let top = logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = logf.iter().map(|l| (l - top).exp()).collect();
    let mut cum = vec![0.0; GRID + 1];
    for i in 0..GRID {
        cum[i + 1] = cum[i] + 0.5 * step * (f[i] + f[i + 1]);
    }
    let target = rng.random::<f64>() * cum[GRID];
    let seg = cum.partition_point(|&c| c <= target).clamp(1, GRID) - 1;
    let r = target - cum[seg];
    let (fa, fb) = (f[seg], f[seg + 1]);
    let a = (fb - fa) / (2.0 * step);
    let disc = (fa * fa + 4.0 * a * r).max(0.0);
    let x = if fa + disc.sqrt() > 0.0 { 2.0 * r / (fa + disc.sqrt()) } else { 0.0 };
    (seg as f64 * step + x.clamp(0.0, step)).min(eps)
}

pub struct PolyEvaluator<'a> {
    poly: &'a Polynomial,
    pw: Vec<f64>,
}

impl PolyEvaluator<'_> {
    pub fn value(&mut self, x: &[f64]) -> f64 {
        let sp = &*self.poly.space;
        sp.fill_powers(x, &mut self.pw);
        let stride = sp.k + 1;
        let mut acc = 0.0;
        for (e, &c) in sp.basis.iter().zip(&self.poly.coeffs) {
            let mut m = c;
            for (i, &a) in e.iter().enumerate() {
                m *= self.pw[i * stride + a as usize];
            }
            acc += m;
        }
        acc
    }

    /// Value and gradient (with respect to `x`, not the local frame).
    pub fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let sp = &*self.poly.space;
        sp.fill_powers(x, &mut self.pw);
        let stride = sp.k + 1;
        let n = sp.n;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut acc = 0.0;
        for (e, &c) in sp.basis.iter().zip(&self.poly.coeffs) {
            if c == 0.0 {
                continue;
            }
            let mut m = c;
            for (i, &a) in e.iter().enumerate() {
                m *= self.pw[i * stride + a as usize];
            }
            acc += m;
            for i in 0..n {
                let a = e[i] as usize;
                if a == 0 {
                    continue;
                }
                let mut d = c * a as f64 * self.pw[i * stride + a - 1];
                for (l, &b) in e.iter().enumerate() {
                    if l != i {
                        d *= self.pw[l * stride + b as usize];
                    }
                }
                grad[i] += d;
            }
        }
        let inv = 1.0 / sp.scale;
        grad.iter_mut().for_each(|g| *g *= inv);
        acc
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermJson {
    pub exps: Vec<u32>,
    pub coef: f64,
}

/// On-disk polynomial: `{"n", "k", "terms": [{"exps", "coef"}]}`. The optional
/// `origin`/`scale` pair records a non-identity frame.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolyJson {
    pub n: usize,
    pub k: usize,
    pub terms: Vec<TermJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_eval(p: &Polynomial, x: &[f64]) -> f64 {
        let sp = p.space();
        let y = sp.to_local(x);
        sp.basis()
            .iter()
            .zip(p.coeffs())
            .map(|(e, c)| c * e.iter().zip(&y).map(|(&a, yi)| yi.powi(a as i32)).product::<f64>())
            .sum()
    }

    #[test]
    fn dimensions_match_enumeration() {
        assert_eq!(make_space(1, 3).unwrap().dim(), 4);
        assert_eq!(make_space(2, 0).unwrap().dim(), 1);
        let s = make_space(2, 2).unwrap();
        assert_eq!(s.dim(), 6);
        assert_eq!(
            s.basis(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(space_dim(3, 4), 35);
        assert!(make_space(0, 2).is_err());
    }

    #[test]
    fn dim_increases_with_degree() {
        for n in 1..5 {
            for k in 0..8 {
                assert!(make_space(n, k + 1).unwrap().dim() > make_space(n, k).unwrap().dim());
            }
        }
    }

    #[test]
    fn eval_examples() {
        let s = make_space(2, 2).unwrap();
        let x1 = Polynomial::from_terms(s.clone(), &[(vec![1, 0], 1.0)]).unwrap();
        assert_eq!(x1.eval(&[0.5, 0.3]), 0.5);
        let circle = Polynomial::from_terms(
            s.clone(),
            &[(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
        )
        .unwrap();
        assert_eq!(circle.eval(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let s = make_space(2, 2).unwrap();
        let p = Polynomial::from_terms(s.clone(), &[(vec![1, 1], 1.0)]).unwrap();
        assert_eq!(p.gradient(&[2.0, 3.0]), vec![3.0, 2.0]);
        let c = Polynomial::from_terms(s, &[(vec![0, 0], 2.5)]).unwrap();
        assert_eq!(c.gradient(&[0.3, -1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn normalize_examples() {
        let s = make_space(1, 1).unwrap();
        let p = Polynomial::new(s.clone(), vec![3.0, 4.0]).unwrap();
        let q = p.normalize().unwrap();
        assert!((q.coeffs()[0] - 0.6).abs() < 1e-15 && (q.coeffs()[1] - 0.8).abs() < 1e-15);
        assert!(q.is_normalized());
        assert_eq!(q.normalize().unwrap().coeffs(), q.coeffs());
        assert!(matches!(Polynomial::new(s, vec![0.0, 0.0]), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn normalize_preserves_sign_of_values() {
        let s = make_space(3, 3).unwrap();
        let mut r = util::rng(11);
        let p = Polynomial::random(s, &mut r).scaled(7.3).unwrap();
        let q = p.normalize().unwrap();
        for _ in 0..100 {
            let x = util::gaussian_vec(&mut r, 3);
            assert_eq!(p.eval(&x).signum(), q.eval(&x).signum());
        }
    }

    #[test]
    fn product_and_lift() {
        let a = Polynomial::affine(&[1.0, 0.0], 0.5).unwrap();
        let b = Polynomial::affine(&[0.0, 1.0], -0.25).unwrap();
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab.degree(), 2);
        let x = [0.9, -0.4];
        assert!((ab.eval(&x) - a.eval(&x) * b.eval(&x)).abs() < 1e-15);
        let l = a.lift(4).unwrap();
        assert!((l.eval(&x) - a.eval(&x)).abs() < 1e-15);
    }

    #[test]
    fn box_bound_contains_values() {
        let s = PolySpace::with_frame(2, 5, vec![0.3, -0.2], 1.7).unwrap();
        let mut r = util::rng(5);
        let p = Polynomial::random(s, &mut r);
        let c = [0.4, 0.1];
        let h = [0.05, 0.08];
        let (v0, dev) = p.box_value_bound(&c, &h);
        assert!((v0 - p.eval(&c)).abs() < 1e-12);
        for i in 0..200 {
            let t = util::halton(i + 1, 2);
            let x = [c[0] + h[0] * (2.0 * t[0] - 1.0), c[1] + h[1] * (2.0 * t[1] - 1.0)];
            assert!((p.eval(&x) - v0).abs() <= dev + 1e-12);
        }
    }

    #[test]
    fn perturbation_rejects_large_caps() {
        let p = Polynomial::affine(&[1.0, 1.0], 0.0).unwrap().normalize().unwrap();
        assert!(p.perturb_in_cap(1.0, 0).is_err());
        assert!(p.perturb_in_cap(0.0, 0).is_err());
    }

    #[test]
    fn perturbation_is_deterministic_odd_and_shrinks() {
        let s = make_space(2, 3).unwrap();
        let p = Polynomial::random(s, &mut util::rng(1));
        let a = p.perturb_in_cap(0.3, 42).unwrap();
        let b = p.perturb_in_cap(0.3, 42).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
        let m = p.neg().perturb_in_cap(0.3, 42).unwrap();
        assert!(a.coeffs().iter().zip(m.coeffs()).all(|(x, y)| *x == -*y));
        let tiny = p.perturb_in_cap(1e-9, 3).unwrap();
        assert!(p.geodesic_distance(&tiny) < 2e-9);
    }

    #[test]
    fn json_round_trip() {
        let s = PolySpace::with_frame(2, 2, vec![1.0, 2.0], 0.5).unwrap();
        let p = Polynomial::random(s, &mut util::rng(9));
        let text = serde_json::to_string(&p.to_json()).unwrap();
        let q = Polynomial::from_json_str(&text, false).unwrap();
        assert_eq!(p.coeffs(), q.coeffs());
        assert_eq!(**p.space(), **q.space());
        let plain = r#"{"n":2,"k":1,"terms":[{"exps":[1,0],"coef":3.0},{"exps":[0,1],"coef":4.0}]}"#;
        let r = Polynomial::from_json_str(plain, true).unwrap();
        assert!((r.coeffs()[1] - 0.6).abs() < 1e-15);
        let bad = r#"{"n":2,"k":1,"terms":[{"exps":[2,0],"coef":1.0}]}"#;
        assert!(Polynomial::from_json_str(bad, true).is_err());
    }

    proptest! {
        #[test]
        fn eval_matches_naive_summation(seed in 0u64..1000, n in 1usize..4, k in 0usize..6) {
            let s = PolySpace::with_frame(n, k, vec![0.1; n], 1.3).unwrap();
            let mut r = util::rng(seed);
            let p = Polynomial::random(s, &mut r);
            let x = util::gaussian_vec(&mut r, n);
            let fast = p.eval(&x);
            let slow = naive_eval(&p, &x);
            prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
        }

        #[test]
        fn gradient_matches_central_differences(seed in 0u64..1000, n in 1usize..4, k in 1usize..6) {
            let s = make_space(n, k).unwrap();
            let mut r = util::rng(seed);
            let p = Polynomial::random(s, &mut r);
            let x: Vec<f64> = util::gaussian_vec(&mut r, n).iter().map(|v| 0.7 * v).collect();
            let g = p.gradient(&x);
            let h = 1e-5;
            let fd: Vec<f64> = (0..n).map(|i| {
                let mut a = x.clone(); a[i] += h;
                let mut b = x.clone(); b[i] -= h;
                (p.eval(&a) - p.eval(&b)) / (2.0 * h)
            }).collect();
            let err = util::norm(&util::sub(&g, &fd));
            prop_assert!(err <= 1e-6 * util::norm(&fd).max(1.0));
        }
    }
}
