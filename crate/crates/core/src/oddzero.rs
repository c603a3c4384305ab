//! Approximate zeros of odd maps on the coefficient sphere, and the
//! bisecting-polynomial construction built on them.
//!
//! The search minimises a smoothed version of the map (sign replaced by
//! `tanh(v / σ)`, `σ` proportional to the RMS of `p` over each cell) with
//! Levenberg–Marquardt steps in the tangent space of the sphere, annealing the
//! smoothing width. Convergence is always judged on the exact sign quadrature.

use crate::geomcore::Cube;
use crate::kakeya::WeightFunction;
use crate::polyspace::{space_dim, PolySpace, Polynomial};
use crate::surfcalc::{cell_quadrature, hausdorff_area, Region};
use crate::util;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;

/// An odd map `F : S^N → R^J` given on the ambient coefficient space.
pub trait OddMap {
    /// `N + 1`.
    fn dim_in(&self) -> usize;
    /// `J`.
    fn dim_out(&self) -> usize;
    /// The map itself; its sup norm decides convergence.
    fn exact(&self, x: &[f64]) -> Vec<f64>;
    /// Smoothed map at width `tau` and its Jacobian (`J × (N+1)`).
    fn smoothed(&self, x: &[f64], tau: f64) -> (Vec<f64>, DMatrix<f64>);
    /// Annealing schedule for `tau`.
    fn schedule(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// `x ↦ A x`, a synthetic odd map with a known kernel.
#[derive(Debug, Clone)]
pub struct LinearOddMap {
    pub matrix: DMatrix<f64>,
}

impl OddMap for LinearOddMap {
    fn dim_in(&self) -> usize {
        self.matrix.ncols()
    }

    fn dim_out(&self) -> usize {
        self.matrix.nrows()
    }

    fn exact(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }

    fn smoothed(&self, x: &[f64], _tau: f64) -> (Vec<f64>, DMatrix<f64>) {
        (self.exact(x), self.matrix.clone())
    }
}

/// `p ↦ (gap(p, cell_i) / vol(cell_i))_i` over box or ellipsoid cells.
/// Monomial values at every quadrature node are tabulated once. The map acts
/// on whitened coordinates `z` (coefficients `W z`, with `W` making the
/// stacked node table orthonormal), which keeps high degrees well scaled.
#[derive(Debug, Clone)]
pub struct GapMap {
    pub space: Arc<PolySpace>,
    pub cells: Vec<Region>,
    /// Per cell: nodes × basis matrix, already multiplied by `W`.
    tables: Vec<DMatrix<f64>>,
    whitening: DMatrix<f64>,
}

pub const DEFAULT_ODD_LEVEL: u32 = 8;

impl GapMap {
    pub fn new(space: Arc<PolySpace>, cells: Vec<Region>, level: u32) -> Result<Self> {
        let dim = space.dim();
        let mut raw = Vec::with_capacity(cells.len());
        let mut gram = DMatrix::zeros(dim, dim);
        for c in &cells {
            if c.n() != space.n() {
                return Err(Error::DimensionMismatch { expected: space.n(), got: c.n() });
            }
            let q = cell_quadrature(c, level)?;
            let rows: Vec<Vec<f64>> = (0..q.len()).map(|i| space.monomials_at(q.point(i))).collect();
            let t = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
            gram += t.tr_mul(&t) / rows.len() as f64;
            raw.push(t);
        }
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        let mut whitening = eig.eigenvectors.clone();
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            let s = 1.0 / l.max(1e-14 * top).sqrt();
            whitening.column_mut(j).scale_mut(s);
        }
        let tables = raw.iter().map(|t| t * &whitening).collect();
        Ok(GapMap { space, cells, tables, whitening })
    }

    /// Polynomial coefficients of the whitened point `z`.
    pub fn coefficients(&self, z: &[f64]) -> Vec<f64> {
        (&self.whitening * DVector::from_column_slice(z)).iter().copied().collect()
    }
}

impl OddMap for GapMap {
    fn dim_in(&self) -> usize {
        self.space.dim()
    }

    fn dim_out(&self) -> usize {
        self.cells.len()
    }

    fn exact(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        self.tables
            .iter()
            .map(|t| {
                let v = t * &xv;
                let s: f64 = v.iter().map(|&y| if y > 0.0 { 1.0 } else if y < 0.0 { -1.0 } else { 0.0 }).sum();
                s / v.len() as f64
            })
            .collect()
    }

    fn smoothed(&self, x: &[f64], tau: f64) -> (Vec<f64>, DMatrix<f64>) {
        let xv = DVector::from_column_slice(x);
        let dim = x.len();
        let mut r = Vec::with_capacity(self.tables.len());
        let mut jac = DMatrix::zeros(self.tables.len(), dim);
        for (i, t) in self.tables.iter().enumerate() {
            let v = t * &xv;
            let m = v.len() as f64;
            let rms = (v.dot(&v) / m).sqrt().max(1e-300);
            let sigma = tau * rms;
            // d sigma / dx = tau / (m rms) * T^T v
            let dsigma = t.tr_mul(&v) * (tau / (m * rms));
            let mut acc = 0.0;
            let mut w = DVector::zeros(v.len());
            let mut coef_sigma = 0.0;
            for (k, &vk) in v.iter().enumerate() {
                let th = (vk / sigma).tanh();
                acc += th;
                let sech2 = 1.0 - th * th;
                w[k] = sech2 / sigma;
                coef_sigma += sech2 * vk / (sigma * sigma);
            }
            r.push(acc / m);
            let row = (t.tr_mul(&w) - dsigma * coef_sigma) / m;
            jac.row_mut(i).copy_from(&row.transpose());
        }
        (r, jac)
    }

    fn schedule(&self) -> Vec<f64> {
        vec![0.3, 0.1, 0.03, 0.01, 0.003]
    }
}

#[derive(Debug, Clone)]
pub struct ZeroOptions {
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Levenberg–Marquardt iterations per smoothing stage.
    pub iterations: usize,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions { tol: 0.05, restarts: 32, seed: 0, iterations: 40 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroResult {
    /// Unit vector in the map's input coordinates.
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Multi-start search for `x ∈ S^N` with `max_i |F_i(x)| <= tol`.
/// Restarts run in order from independent seeds and stop at the first success;
/// otherwise the best restart (smallest sup residual, earliest on ties) is
/// returned with `converged = false`.
pub fn find_odd_zero(map: &dyn OddMap, opts: &ZeroOptions) -> Result<ZeroResult> {
    let dim = map.dim_in();
    let j = map.dim_out();
    if dim == 0 || j > dim - 1 {
        return Err(Error::IllPosed { j, n: dim.saturating_sub(1) });
    }
    let mut best: Option<ZeroResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = util::rng(util::derive_seed(opts.seed, restart as u64));
        let start = util::random_unit(&mut rng, dim);
        let x = descend(map, start, opts);
        let residuals = map.exact(&x);
        let max_residual = sup(&residuals);
        let converged = max_residual <= opts.tol;
        let cand = ZeroResult { x, residuals, max_residual, restarts_used: restart + 1, converged };
        if converged {
            return Ok(cand);
        }
        if best.as_ref().is_none_or(|b| cand.max_residual < b.max_residual) {
            best = Some(cand);
        }
    }
    let mut out = best.expect("at least one restart");
    out.restarts_used = opts.restarts.max(1);
    Ok(out)
}

fn descend(map: &dyn OddMap, mut x: Vec<f64>, opts: &ZeroOptions) -> Vec<f64> {
    let dim = x.len();
    for tau in map.schedule() {
        let mut mu = 1e-3;
        let (mut r, mut jac) = map.smoothed(&x, tau);
        let mut cost = sq(&r);
        for _ in 0..opts.iterations {
            if sup(&map.exact(&x)) <= opts.tol * 0.25 {
                break;
            }
            // project the Jacobian onto the tangent space at x
            let xv = DVector::from_column_slice(&x);
            let jx = &jac * &xv;
            let jp = &jac - &jx * xv.transpose();
            let gram = &jp * jp.transpose();
            let rv = DVector::from_column_slice(&r);
            let mut accepted = false;
            for _ in 0..12 {
                let mut sys = gram.clone();
                for d in 0..sys.nrows() {
                    sys[(d, d)] += mu * (1.0 + gram[(d, d)]);
                }
                let Some(ch) = sys.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let z = ch.solve(&rv);
                let step = -(jp.transpose() * z);
                let trial: Vec<f64> = (0..dim).map(|i| x[i] + step[i]).collect();
                let Some(trial) = util::normalized(&trial) else {
                    mu *= 10.0;
                    continue;
                };
                let (r2, j2) = map.smoothed(&trial, tau);
                let c2 = sq(&r2);
                if c2 < cost {
                    x = trial;
                    r = r2;
                    jac = j2;
                    let gain = cost - c2;
                    cost = c2;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if gain <= 1e-8 * cost {
                        accepted = false;
                    }
                    break;
                }
                mu *= 4.0;
            }
            if !accepted {
                break;
            }
        }
    }
    x
}

/// The bisecting-polynomial construction: every support cube `Q` is split into
/// `⌈M(Q)⌉^n` congruent subcubes and a polynomial of the smallest degree with
/// `N >= c_deg · J` bisecting all of them is sought.
#[derive(Debug, Clone)]
pub struct WarmupOptions {
    pub c_deg: f64,
    pub zero: ZeroOptions,
    pub level: u32,
    /// Grid step for the per-cube area measurement, relative to a subcube side.
    pub area_h: f64,
}

impl Default for WarmupOptions {
    fn default() -> Self {
        WarmupOptions { c_deg: 1.0, zero: ZeroOptions::default(), level: DEFAULT_ODD_LEVEL, area_h: 0.125 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CubeArea {
    pub corner: Vec<i64>,
    pub weight: f64,
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct WarmupReport {
    pub k: usize,
    pub cells: usize,
    pub polynomial: Polynomial,
    pub zero: ZeroResult,
    pub per_cube: Vec<CubeArea>,
    /// `min_Q area(Q) / M(Q)`.
    pub fitted_c: f64,
}

/// Smallest `k` with `dim(k) - 1 >= ceil(c_deg · J)`.
pub fn degree_for(n: usize, cells: usize, c_deg: f64) -> usize {
    let need = (c_deg * cells as f64).ceil().max(1.0) as usize;
    (1..).find(|&k| space_dim(n, k) - 1 >= need).unwrap()
}

pub fn subcells(q: &Cube, m: f64) -> Vec<Region> {
    let n = q.n();
    let s = (m - 1e-9).ceil().max(1.0) as usize;
    let side = 1.0 / s as f64;
    let lo = q.lo();
    let mut out = Vec::with_capacity(s.pow(n as u32));
    for idx in 0..s.pow(n as u32) {
        let mut rem = idx;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            let t = rem % s;
            rem /= s;
            a[i] = lo[i] + t as f64 * side;
            b[i] = a[i] + side;
        }
        out.push(Region::Box { lo: a, hi: b });
    }
    out
}

pub fn warmup_bisector(m: &WeightFunction, opts: &WarmupOptions) -> Result<WarmupReport> {
    let n = m.n();
    let support: Vec<(&Cube, f64)> = m.support().collect();
    if support.is_empty() {
        return Err(Error::WeightPrecondition("weight function has empty support".into()));
    }
    if let Some((q, v)) = support.iter().find(|(_, v)| *v < 1.0) {
        return Err(Error::WeightPrecondition(format!("M({:?}) = {v} is below 1", q.corner)));
    }
    let mut cells = Vec::new();
    let mut finest = 1usize;
    for (q, v) in &support {
        let sub = subcells(q, *v);
        finest = finest.max((v - 1e-9).ceil() as usize);
        cells.extend(sub);
    }
    let k = degree_for(n, cells.len(), opts.c_deg);
    // frame centred on the support with unit half-width
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (q, _) in &support {
        for i in 0..n {
            lo[i] = lo[i].min(q.corner[i] as f64);
            hi[i] = hi[i].max(q.corner[i] as f64 + 1.0);
        }
    }
    let origin: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
    let space = PolySpace::with_frame(n, k, origin, scale)?;
    let ncells = cells.len();
    let map = GapMap::new(space.clone(), cells, opts.level)?;
    let zero = find_odd_zero(&map, &opts.zero)?;
    let polynomial = Polynomial::new(space, map.coefficients(&zero.x))?.normalize()?;
    let h = opts.area_h / finest as f64;
    let mut per_cube = Vec::with_capacity(support.len());
    for (q, v) in &support {
        let area = hausdorff_area(&polynomial, &Region::cube(q), h)?;
        per_cube.push(CubeArea { corner: q.corner.clone(), weight: *v, area });
    }
    let fitted_c = per_cube.iter().map(|c| c.area / c.weight).fold(f64::INFINITY, f64::min);
    Ok(WarmupReport { k, cells: ncells, polynomial, zero, per_cube, fitted_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyspace::make_space;

    #[test]
    fn linear_map_kernel() {
        let mut r = util::rng(5);
        // 3 x 4 with kernel spanned by a known unit vector
        let kernel = util::random_unit(&mut r, 4);
        let mut rows = Vec::new();
        for _ in 0..3 {
            let g = util::gaussian_vec(&mut r, 4);
            let t = util::dot(&g, &kernel);
            rows.extend(g.iter().zip(&kernel).map(|(a, b)| a - t * b));
        }
        let map = LinearOddMap { matrix: DMatrix::from_row_slice(3, 4, &rows) };
        let opts = ZeroOptions { tol: 1e-8, restarts: 4, seed: 1, iterations: 200 };
        let z = find_odd_zero(&map, &opts).unwrap();
        assert!(z.converged, "{}", z.max_residual);
        let c = util::dot(&z.x, &kernel).abs();
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ill_posed_requests_are_rejected() {
        let map = LinearOddMap { matrix: DMatrix::identity(3, 3) };
        assert!(matches!(find_odd_zero(&map, &ZeroOptions::default()), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn gap_map_is_odd_and_homogeneous() {
        let s = make_space(2, 2).unwrap();
        let cells = vec![Region::unit_cube(2), Region::Box { lo: vec![0.0, 0.0], hi: vec![0.5, 0.5] }];
        let map = GapMap::new(s, cells, 7).unwrap();
        let mut r = util::rng(2);
        for _ in 0..20 {
            let x = util::random_unit(&mut r, 6);
            let a = map.exact(&x);
            let b = map.exact(&util::scaled(&x, -1.0));
            assert!(a.iter().zip(&b).all(|(u, v)| *u == -*v));
            let c = map.exact(&util::scaled(&x, 2.0));
            assert!(a.iter().zip(&c).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn smoothed_jacobian_matches_differences() {
        let s = make_space(2, 3).unwrap();
        let cells = vec![Region::unit_cube(2), Region::Box { lo: vec![0.2, 0.1], hi: vec![0.7, 0.4] }];
        let map = GapMap::new(s, cells, 6).unwrap();
        let x = util::random_unit(&mut util::rng(3), 10);
        let (_, jac) = map.smoothed(&x, 0.3);
        let h = 1e-6;
        for c in 0..10 {
            let mut a = x.clone();
            a[c] += h;
            let mut b = x.clone();
            b[c] -= h;
            let (ra, _) = map.smoothed(&a, 0.3);
            let (rb, _) = map.smoothed(&b, 0.3);
            for i in 0..2 {
                let fd = (ra[i] - rb[i]) / (2.0 * h);
                assert!((fd - jac[(i, c)]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", jac[(i, c)]);
            }
        }
    }

    #[test]
    fn single_cell_linear_bisector() {
        let s = make_space(2, 1).unwrap();
        let cell = Region::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        let map = GapMap::new(s, vec![cell], 8).unwrap();
        let z = find_odd_zero(&map, &ZeroOptions::default()).unwrap();
        assert!(z.converged);
    }

    #[test]
    fn degree_selection() {
        assert_eq!(degree_for(2, 1, 1.0), 1);
        assert_eq!(degree_for(2, 4, 1.0), 2);
        assert_eq!(degree_for(2, 16, 1.0), 5);
        assert_eq!(subcells(&Cube::new(vec![0, 0]), 2.0).len(), 4);
        assert_eq!(subcells(&Cube::new(vec![0, 0]), 1.0).len(), 1);
    }
}
