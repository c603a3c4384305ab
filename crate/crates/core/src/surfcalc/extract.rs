use super::{Region, SurfaceSampleSet};
use crate::polyspace::{PolyEvaluator, Polynomial};
use crate::util;
use crate::{Error, Result};

/// Cells per axis below which a block is meshed directly.
const LEAF: usize = 8;
/// Boundary pieces are split `2^CLIP_DEPTH` times per edge and kept by midpoint.
const CLIP_DEPTH: u32 = 4;
const DEGENERATE_GRAD: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Quasi-random sample count for the smoothed-delta path (`n >= 4`).
    pub mc_samples: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { mc_samples: 200_000 }
    }
}

pub fn extract_surface(p: &Polynomial, region: &Region, h: f64) -> Result<SurfaceSampleSet> {
    extract_surface_with(p, region, h, &ExtractOptions::default())
}

pub fn extract_surface_with(
    p: &Polynomial,
    region: &Region,
    h: f64,
    opts: &ExtractOptions,
) -> Result<SurfaceSampleSet> {
    let n = p.n();
    if region.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: region.n() });
    }
    if !(h > 0.0 && h <= region.shortest_side() / 4.0 + 1e-15) {
        return Err(Error::InvalidArgument(format!(
            "grid step {h} must be positive and at most a quarter of the shortest region side"
        )));
    }
    let p = p.normalize()?;
    let mut em = Emitter::new(&p, region, h);
    match n {
        1 => extract_1d(&p, region, h, &mut em),
        2 | 3 => extract_grid(&p, region, h, &mut em),
        _ => extract_mc(&p, region, h, opts.mc_samples, &mut em),
    }
    Ok(em.finish())
}

struct Emitter<'a> {
    eval: PolyEvaluator<'a>,
    region: &'a Region,
    out: SurfaceSampleSet,
    grad: Vec<f64>,
    dropped: f64,
}

impl<'a> Emitter<'a> {
    fn new(p: &'a Polynomial, region: &'a Region, h: f64) -> Self {
        let n = p.n();
        Emitter {
            eval: p.evaluator(),
            region,
            out: SurfaceSampleSet::empty(n, region.clone(), p.clone(), h),
            grad: vec![0.0; n],
            dropped: 0.0,
        }
    }

    fn finish(mut self) -> SurfaceSampleSet {
        let total = self.out.total_weight() + self.dropped;
        self.out.excluded_fraction = if total > 0.0 { self.dropped / total } else { 0.0 };
        self.out
    }

    fn push(&mut self, x: &[f64], weight: f64) {
        if weight <= 0.0 {
            return;
        }
        self.eval.value_grad(x, &mut self.grad);
        let g = util::norm(&self.grad);
        if !(g >= DEGENERATE_GRAD) {
            self.dropped += weight;
            return;
        }
        self.out.points.extend_from_slice(x);
        self.out.normals.extend(self.grad.iter().map(|v| v / g));
        self.out.weights.push(weight);
    }

    fn segment(&mut self, a: &[f64], b: &[f64], inside: bool) {
        if inside {
            let m = mid(a, b);
            self.push(&m, dist(a, b));
            return;
        }
        let pieces = 1usize << CLIP_DEPTH;
        let len = dist(a, b) / pieces as f64;
        for i in 0..pieces {
            let t = (i as f64 + 0.5) / pieces as f64;
            let m: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            if self.region.contains(&m) {
                self.push(&m, len);
            }
        }
    }

    fn triangle(&mut self, a: &[f64], b: &[f64], c: &[f64], inside: bool) {
        self.triangle_rec(a, b, c, if inside { 0 } else { CLIP_DEPTH / 2 }, inside);
    }

    fn triangle_rec(&mut self, a: &[f64], b: &[f64], c: &[f64], depth: u32, inside: bool) {
        if depth == 0 {
            let g: Vec<f64> = (0..3).map(|i| (a[i] + b[i] + c[i]) / 3.0).collect();
            if inside || self.region.contains(&g) {
                self.push(&g, tri_area(a, b, c));
            }
            return;
        }
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        self.triangle_rec(a, &ab, &ca, depth - 1, inside);
        self.triangle_rec(&ab, b, &bc, depth - 1, inside);
        self.triangle_rec(&ca, &bc, c, depth - 1, inside);
        self.triangle_rec(&ab, &bc, &ca, depth - 1, inside);
    }
}

fn mid(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn tri_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}

/// Point where the segment from `a` (value `va`) to `b` (value `vb`) crosses zero.
fn crossing(a: &[f64], va: f64, b: &[f64], vb: f64) -> Vec<f64> {
    let t = va / (va - vb);
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// In 1D the zero set is a finite point set; each point carries counting measure.
fn extract_1d(p: &Polynomial, region: &Region, h: f64, em: &mut Emitter) {
    let (lo, hi) = region.bounding_box();
    let m = ((hi[0] - lo[0]) / h).ceil().max(1.0) as usize;
    let step = (hi[0] - lo[0]) / m as f64;
    let mut prev = p.eval(&lo);
    for i in 1..=m {
        let x = lo[0] + i as f64 * step;
        let v = p.eval(&[x]);
        if (prev >= 0.0) != (v >= 0.0) {
            let c = crossing(&[x - step], prev, &[x], v);
            if region.contains(&c) {
                em.push(&c, 1.0);
            }
        }
        prev = v;
    }
}

struct Grid {
    lo: Vec<f64>,
    step: Vec<f64>,
    cells: Vec<usize>,
}

impl Grid {
    fn coord(&self, axis: usize, idx: usize) -> f64 {
        self.lo[axis] + idx as f64 * self.step[axis]
    }
}

fn extract_grid(p: &Polynomial, region: &Region, h: f64, em: &mut Emitter) {
    let n = p.n();
    let (lo, hi) = region.bounding_box();
    let cells: Vec<usize> = (0..n).map(|i| ((hi[i] - lo[i]) / h).ceil().max(1.0) as usize).collect();
    let step: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / cells[i] as f64).collect();
    let grid = Grid { lo, step, cells };
    let mut stack = vec![(vec![0usize; n], grid.cells.clone())];
    while let Some((b0, b1)) = stack.pop() {
        let blo: Vec<f64> = (0..n).map(|i| grid.coord(i, b0[i])).collect();
        let bhi: Vec<f64> = (0..n).map(|i| grid.coord(i, b1[i])).collect();
        if !region.may_meet_box(&blo, &bhi) {
            continue;
        }
        let center = mid(&blo, &bhi);
        let half: Vec<f64> = blo.iter().zip(&bhi).map(|(a, b)| 0.5 * (b - a)).collect();
        let (v0, dev) = p.box_value_bound(&center, &half);
        if v0.abs() > dev * (1.0 + 1e-9) + 1e-300 {
            continue;
        }
        let (axis, width) = (0..n).map(|i| (i, b1[i] - b0[i])).max_by_key(|&(i, w)| (w, usize::MAX - i)).unwrap();
        if width <= LEAF {
            mesh_leaf(&grid, &b0, &b1, em);
        } else {
            let split = b0[axis] + width / 2;
            let mut left_hi = b1.clone();
            left_hi[axis] = split;
            let mut right_lo = b0.clone();
            right_lo[axis] = split;
            // push right first so the left half is processed first
            stack.push((right_lo, b1));
            stack.push((b0, left_hi));
        }
    }
}

fn mesh_leaf(grid: &Grid, b0: &[usize], b1: &[usize], em: &mut Emitter) {
    let n = b0.len();
    let verts: Vec<usize> = (0..n).map(|i| b1[i] - b0[i] + 1).collect();
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * verts[i - 1];
    }
    let total: usize = verts.iter().product();
    let mut values = vec![0.0; total];
    let mut x = vec![0.0; n];
    for (flat, v) in values.iter_mut().enumerate() {
        for i in 0..n {
            let idx = (flat / strides[i]) % verts[i];
            x[i] = grid.coord(i, b0[i] + idx);
        }
        *v = em.eval.value(&x);
    }
    let ncorner = 1usize << n;
    let mut cv = vec![0.0; ncorner];
    let mut cx = vec![vec![0.0; n]; ncorner];
    let cells: Vec<usize> = (0..n).map(|i| b1[i] - b0[i]).collect();
    let count: usize = cells.iter().product();
    for c in 0..count {
        let mut rem = c;
        let mut local = vec![0usize; n];
        for i in 0..n {
            local[i] = rem % cells[i];
            rem /= cells[i];
        }
        let mut any_pos = false;
        let mut any_neg = false;
        for k in 0..ncorner {
            let mut flat = 0;
            for i in 0..n {
                flat += (local[i] + ((k >> i) & 1)) * strides[i];
            }
            cv[k] = values[flat];
            if cv[k] >= 0.0 {
                any_pos = true;
            } else {
                any_neg = true;
            }
        }
        if !(any_pos && any_neg) {
            continue;
        }
        for k in 0..ncorner {
            for i in 0..n {
                cx[k][i] = grid.coord(i, b0[i] + local[i] + ((k >> i) & 1));
            }
        }
        let inside = em.region.is_box() || cx.iter().all(|p| em.region.contains(p));
        if n == 2 {
            march_square(&cx, &cv, inside, em);
        } else {
            march_cube(&cx, &cv, inside, em);
        }
    }
}

fn march_square(cx: &[Vec<f64>], cv: &[f64], inside: bool, em: &mut Emitter) {
    // corners in cyclic order 0=(0,0), 1=(1,0), 3=(1,1), 2=(0,1); edge e_i joins ring[i], ring[i+1]
    const RING: [usize; 4] = [0, 1, 3, 2];
    let pos: Vec<bool> = cv.iter().map(|&v| v >= 0.0).collect();
    let mut pts: [Option<Vec<f64>>; 4] = Default::default();
    let mut count = 0;
    for e in 0..4 {
        let (a, b) = (RING[e], RING[(e + 1) % 4]);
        if pos[a] != pos[b] {
            pts[e] = Some(crossing(&cx[a], cv[a], &cx[b], cv[b]));
            count += 1;
        }
    }
    if count == 2 {
        let found: Vec<&Vec<f64>> = pts.iter().flatten().collect();
        em.segment(found[0], found[1], inside);
        return;
    }
    // saddle: decide by the sign at the cell centre
    let centre = mid(&cx[0], &cx[3]);
    let centre_pos = em.eval.value(&centre) >= 0.0;
    let pairs = if centre_pos == pos[0] { [(0, 1), (2, 3)] } else { [(3, 0), (1, 2)] };
    for (i, j) in pairs {
        let (a, b) = (pts[i].clone().unwrap(), pts[j].clone().unwrap());
        em.segment(&a, &b, inside);
    }
}

const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn march_cube(cx: &[Vec<f64>], cv: &[f64], inside: bool, em: &mut Emitter) {
    for tet in &KUHN {
        let (pos, neg): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&k| cv[k] >= 0.0);
        let cross = |a: usize, b: usize| crossing(&cx[a], cv[a], &cx[b], cv[b]);
        match (pos.len(), neg.len()) {
            (1, 3) | (3, 1) => {
                let (lone, rest) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                let (a, b, c) = (cross(lone, rest[0]), cross(lone, rest[1]), cross(lone, rest[2]));
                em.triangle(&a, &b, &c, inside);
            }
            (2, 2) => {
                let q = [cross(pos[0], neg[0]), cross(pos[0], neg[1]), cross(pos[1], neg[1]), cross(pos[1], neg[0])];
                em.triangle(&q[0], &q[1], &q[2], inside);
                em.triangle(&q[0], &q[2], &q[3], inside);
            }
            _ => {}
        }
    }
}

/// Smoothed co-area estimate: samples with `|p| / |grad p| < h` carry weight
/// `vol / (N * 2h)` and are projected onto the zero set by one Newton step.
fn extract_mc(p: &Polynomial, region: &Region, h: f64, samples: usize, em: &mut Emitter) {
    let n = p.n();
    let (lo, hi) = region.bounding_box();
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let weight = vol / (samples as f64 * 2.0 * h);
    let mut grad = vec![0.0; n];
    let mut eval = p.evaluator();
    for i in 0..samples {
        let u = util::halton(i as u64 + 1, n);
        let x: Vec<f64> = (0..n).map(|j| lo[j] + u[j] * (hi[j] - lo[j])).collect();
        if !region.contains(&x) {
            continue;
        }
        let v = eval.value_grad(&x, &mut grad);
        let g2 = util::dot(&grad, &grad);
        if g2 < DEGENERATE_GRAD * DEGENERATE_GRAD {
            if v.abs() < h * DEGENERATE_GRAD {
                em.dropped += weight;
            }
            continue;
        }
        let s = v / g2.sqrt();
        if s.abs() >= h {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - v * gi / g2).collect();
        let at = if region.contains(&y) { y } else { x };
        em.push(&at, weight);
    }
}
