use crate::geomcore::{line_box_distance, TubeRegion};
use crate::util;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Solid ellipsoid `{x : (x - c)^T A (x - c) <= 1}`, stored with a factor `L`
/// of `A^{-1} = L L^T` so that `x = c + L y` maps the unit ball onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidCell {
    pub center: Vec<f64>,
    pub form: DMatrix<f64>,
    pub map: DMatrix<f64>,
    pub volume: f64,
}

impl EllipsoidCell {
    pub fn new(center: Vec<f64>, form: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if form.nrows() != n || form.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: form.nrows() });
        }
        let inv = form.clone().try_inverse().ok_or(Error::NotSpd)?;
        let sym = (&inv + inv.transpose()) * 0.5;
        let chol = sym.cholesky().ok_or(Error::NotSpd)?;
        let map = chol.l();
        let det: f64 = map.diagonal().iter().product();
        Ok(EllipsoidCell { center, form, map, volume: util::unit_ball_volume(n) * det })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        EllipsoidCell::new(center, DMatrix::identity(n, n) / (radius * radius))
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let d = util::sub(x, &self.center);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += d[i] * self.form[(i, j)] * d[j];
            }
        }
        s
    }

    /// `c + L y`.
    pub fn from_ball(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.center[i] + (0..=i).map(|j| self.map[(i, j)] * y[j]).sum::<f64>()).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        // sqrt of the diagonal of A^{-1} = L L^T
        (0..self.n()).map(|i| (0..=i).map(|j| self.map[(i, j)].powi(2)).sum::<f64>().sqrt()).collect()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.form.clone().symmetric_eigen().eigenvalues.min()
    }
}

/// Clipping regions for surface extraction and cells for sign quadrature.
/// All variants are convex.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ellipsoid(EllipsoidCell),
    /// Points within `radius` of the axis whose axial coordinate
    /// `(x - anchor) . dir` lies in `[-half_length, half_length]`.
    TubeSegment { anchor: Vec<f64>, dir: Vec<f64>, radius: f64, half_length: f64 },
    TubeClippedBox { lo: Vec<f64>, hi: Vec<f64>, tube: TubeRegion },
}

impl Region {
    pub fn unit_cube(n: usize) -> Region {
        Region::Box { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    pub fn cube(q: &crate::geomcore::Cube) -> Region {
        Region::Box { lo: q.lo(), hi: q.hi() }
    }

    pub fn n(&self) -> usize {
        match self {
            Region::Box { lo, .. } | Region::TubeClippedBox { lo, .. } => lo.len(),
            Region::Ellipsoid(e) => e.n(),
            Region::TubeSegment { anchor, .. } => anchor.len(),
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, Region::Box { .. })
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ellipsoid(e) => {
                let w = e.half_widths();
                (
                    e.center.iter().zip(&w).map(|(c, w)| c - w).collect(),
                    e.center.iter().zip(&w).map(|(c, w)| c + w).collect(),
                )
            }
            Region::TubeSegment { anchor, dir, radius, half_length } => {
                let ext: Vec<f64> = dir
                    .iter()
                    .map(|v| half_length * v.abs() + radius * (1.0 - v * v).max(0.0).sqrt())
                    .collect();
                (
                    anchor.iter().zip(&ext).map(|(a, e)| a - e).collect(),
                    anchor.iter().zip(&ext).map(|(a, e)| a + e).collect(),
                )
            }
            Region::TubeClippedBox { lo, hi, .. } => (lo.clone(), hi.clone()),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => in_box(x, lo, hi),
            Region::Ellipsoid(e) => e.quad(x) <= 1.0 + 1e-12,
            Region::TubeSegment { anchor, dir, radius, half_length } => {
                let d = util::sub(x, anchor);
                let t = util::dot(&d, dir);
                let r2 = util::dot(&d, &d) - t * t;
                t.abs() <= *half_length && r2 <= radius * radius
            }
            Region::TubeClippedBox { lo, hi, tube } => in_box(x, lo, hi) && tube.contains(x),
        }
    }

    /// False only when the box `[lo, hi]` certainly misses the region.
    pub fn may_meet_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        let (blo, bhi) = self.bounding_box();
        if (0..lo.len()).any(|i| hi[i] < blo[i] || lo[i] > bhi[i]) {
            return false;
        }
        match self {
            Region::Box { .. } => true,
            Region::Ellipsoid(e) => {
                let d2: f64 = (0..lo.len())
                    .map(|i| {
                        let c = e.center[i];
                        let g = if c < lo[i] { lo[i] - c } else if c > hi[i] { c - hi[i] } else { 0.0 };
                        g * g
                    })
                    .sum();
                e.min_eigenvalue() * d2 <= 1.0 + 1e-12
            }
            Region::TubeSegment { anchor, dir, radius, half_length } => {
                if line_box_distance(anchor, dir, lo, hi) > *radius {
                    return false;
                }
                let (mut tmin, mut tmax) = (0.0, 0.0);
                for i in 0..lo.len() {
                    let a = (lo[i] - anchor[i]) * dir[i];
                    let b = (hi[i] - anchor[i]) * dir[i];
                    tmin += a.min(b);
                    tmax += a.max(b);
                }
                tmax >= -half_length && tmin <= *half_length
            }
            Region::TubeClippedBox { tube, .. } => tube.meets_box(lo, hi),
        }
    }

    /// Exact volume where a closed form exists.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Region::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| b - a).product()),
            Region::Ellipsoid(e) => Some(e.volume),
            Region::TubeSegment { anchor, radius, half_length, .. } => {
                let n = anchor.len();
                Some(util::unit_ball_volume(n - 1) * radius.powi(n as i32 - 1) * 2.0 * half_length)
            }
            Region::TubeClippedBox { .. } => None,
        }
    }

    pub fn shortest_side(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }
}

fn in_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b)
}
