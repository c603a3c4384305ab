use crate::polyspace::Polynomial;
use crate::surfcalc::{cell_quadrature_offset, extract_surface, EllipsoidCell, Region, SignCounts};
use crate::util;
use crate::{Error, Result};
use serde::Serialize;

/// Quantities of the ball bisection lemma, all measured after the affine map
/// taking the cell to the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixReport {
    pub a: f64,
    pub b: f64,
    pub area: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Area of `Z_p` in the cell (in unit-ball normalisation) against
/// `½(a^{(n-1)/n} + b^{(n-1)/n} - 1)·|S^{n-1}|`, where `a`, `b` are the
/// volume shares of `{p > 0}` and `{p < 0}`.
pub fn appendix_check(p: &Polynomial, cell: &EllipsoidCell, h: f64, level: u32, seed: u64) -> Result<AppendixReport> {
    let n = p.n();
    if cell.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cell.n() });
    }
    let p = p.normalize()?;
    let region = Region::Ellipsoid(cell.clone());
    let quad = cell_quadrature_offset(&region, level, seed % (1 << 24) << level)?;
    let counts = SignCounts::of(&p, &quad);
    let a = counts.pos as f64 / counts.total as f64;
    let b = counts.neg as f64 / counts.total as f64;
    let samples = extract_surface(&p, &region, h)?;
    let det: f64 = cell.map.diagonal().iter().product();
    let mut area = 0.0;
    for i in 0..samples.len() {
        let nx = samples.normal(i);
        // |L^T n|
        let lt: f64 = (0..n).map(|j| (j..n).map(|k| cell.map[(k, j)] * nx[k]).sum::<f64>().powi(2)).sum();
        area += samples.weights[i] * lt.sqrt() / det.abs();
    }
    let e = (n as f64 - 1.0) / n as f64;
    let bound = 0.5 * (a.powf(e) + b.powf(e) - 1.0) * util::unit_sphere_area(n);
    Ok(AppendixReport { a, b, area, bound, margin: area - bound })
}
