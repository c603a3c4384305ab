//! Zero sets of polynomials as weighted sample sets, and the surface and
//! sign-volume functionals built on them.
//!
//! For `n = 2` the zero set is traced by marching squares, for `n = 3` by
//! marching tetrahedra (six Kuhn simplices per grid cell); both skip grid blocks
//! on which a Taylor bound shows `p` has no zero. For `n >= 4` a smoothed delta
//! of width `h` is integrated by quasi-Monte Carlo.

mod extract;
mod region;

pub use extract::{extract_surface, extract_surface_with, ExtractOptions};
pub use region::{EllipsoidCell, Region};

use crate::geomcore::Tube;
use crate::polyspace::Polynomial;
use crate::util;
use crate::{Error, Result};
use std::io::Write;

/// Weighted samples `(x, n(x), w)` approximating surface measure on `Z_p ∩ U`.
/// Stored flat: `points` and `normals` hold `n` coordinates per sample.
#[derive(Debug, Clone)]
pub struct SurfaceSampleSet {
    pub n: usize,
    pub points: Vec<f64>,
    pub normals: Vec<f64>,
    pub weights: Vec<f64>,
    pub region: Region,
    pub source: Polynomial,
    pub resolution: f64,
    /// Share of extracted measure dropped because `|grad p| < 1e-9` there.
    pub excluded_fraction: f64,
}

impl SurfaceSampleSet {
    pub fn empty(n: usize, region: Region, source: Polynomial, resolution: f64) -> Self {
        SurfaceSampleSet {
            n,
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
            region,
            source,
            resolution,
            excluded_fraction: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.n..(i + 1) * self.n]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w |e · n|`.
    pub fn directional(&self, e: &[f64]) -> f64 {
        self.normals
            .chunks_exact(self.n)
            .zip(&self.weights)
            .map(|(nv, w)| w * util::dot(nv, e).abs())
            .sum()
    }

    /// Appends another sample set, scaling its weights by `scale`.
    pub fn absorb(&mut self, other: &SurfaceSampleSet, scale: f64) {
        self.points.extend_from_slice(&other.points);
        self.normals.extend_from_slice(&other.normals);
        self.weights.extend(other.weights.iter().map(|w| w * scale));
    }

    /// CSV rows `x_1..x_n, n_1..n_n, weight` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.n)
            .map(|i| format!("x_{i}"))
            .chain((1..=self.n).map(|i| format!("n_{i}")))
            .chain(std::iter::once("weight".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .point(i)
                .iter()
                .chain(self.normal(i))
                .chain(std::iter::once(&self.weights[i]))
                .map(|v| format!("{v:.12e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierConfig {
    pub eps: f64,
    pub m: usize,
    pub seed: u64,
}

impl MollifierConfig {
    pub fn new(eps: f64, m: usize, seed: u64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) || m == 0 {
            return Err(Error::InvalidArgument(format!("mollifier needs 0 < eps < 1 and m >= 1 (eps={eps}, m={m})")));
        }
        Ok(MollifierConfig { eps, m, seed })
    }

    pub fn with_default_draws(eps: f64, seed: u64) -> Result<Self> {
        MollifierConfig::new(eps, 32, seed)
    }
}

fn check_unit(e: &[f64], n: usize) -> Result<()> {
    if e.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: e.len() });
    }
    if (util::norm(e) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("direction must be a unit vector".into()));
    }
    Ok(())
}

pub fn directional_area(p: &Polynomial, region: &Region, e: &[f64], h: f64) -> Result<f64> {
    check_unit(e, p.n())?;
    Ok(extract_surface(p, region, h)?.directional(e))
}

pub fn hausdorff_area(p: &Polynomial, region: &Region, h: f64) -> Result<f64> {
    Ok(extract_surface(p, region, h)?.total_weight())
}

/// Pooled samples of `m` cap perturbations of `p`, each draw weighted `1/m`,
/// so that every linear functional of the pool is the mean over draws.
pub fn mollified_surface(p: &Polynomial, region: &Region, cfg: &MollifierConfig, h: f64) -> Result<SurfaceSampleSet> {
    let base = p.normalize()?;
    let mut pool = SurfaceSampleSet::empty(p.n(), region.clone(), base.clone(), h);
    let scale = 1.0 / cfg.m as f64;
    let mut excluded = 0.0;
    for i in 0..cfg.m {
        let q = base.perturb_in_cap(cfg.eps, util::derive_seed(cfg.seed, i as u64))?;
        let s = extract_surface(&q, region, h)?;
        excluded += s.excluded_fraction * scale;
        pool.absorb(&s, scale);
    }
    pool.excluded_fraction = excluded;
    Ok(pool)
}

pub fn directional_area_mollified(
    p: &Polynomial,
    region: &Region,
    e: &[f64],
    cfg: &MollifierConfig,
    h: f64,
) -> Result<f64> {
    check_unit(e, p.n())?;
    Ok(mollified_surface(p, region, cfg, h)?.directional(e))
}

/// Quadrature nodes for a centrally symmetric cell: consecutive entries
/// `2i, 2i+1` are reflections of each other through the centre.
#[derive(Debug, Clone)]
pub struct CellQuadrature {
    pub n: usize,
    pub points: Vec<f64>,
    pub volume: f64,
}

impl CellQuadrature {
    pub fn len(&self) -> usize {
        self.points.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }
}

pub const DEFAULT_GAP_LEVEL: u32 = 11;

/// `2^level` Halton nodes in the cell, each paired with its reflection.
pub fn cell_quadrature(cell: &Region, level: u32) -> Result<CellQuadrature> {
    cell_quadrature_offset(cell, level, 0)
}

/// As [`cell_quadrature`] but starting the Halton sequence at `offset`.
pub fn cell_quadrature_offset(cell: &Region, level: u32, offset: u64) -> Result<CellQuadrature> {
    let n = cell.n();
    let pairs = 1usize << level;
    let mut points = Vec::with_capacity(2 * pairs * n);
    match cell {
        Region::Box { lo, hi } => {
            let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let w: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
            for i in 0..pairs {
                let u = util::halton(offset + i as u64 + 1, n);
                points.extend((0..n).map(|j| c[j] + (2.0 * u[j] - 1.0) * w[j]));
                points.extend((0..n).map(|j| c[j] - (2.0 * u[j] - 1.0) * w[j]));
            }
        }
        Region::Ellipsoid(e) => {
            let mut idx = offset;
            let mut got = 0;
            while got < pairs {
                idx += 1;
                let y: Vec<f64> = util::halton(idx, n).iter().map(|u| 2.0 * u - 1.0).collect();
                if util::dot(&y, &y) > 1.0 {
                    continue;
                }
                points.extend(e.from_ball(&y));
                points.extend(e.from_ball(&util::scaled(&y, -1.0)));
                got += 1;
            }
        }
        _ => return Err(Error::InvalidArgument("sign quadrature needs a box or ellipsoid cell".into())),
    }
    Ok(CellQuadrature { n, points, volume: cell.volume().unwrap_or(0.0) })
}

/// Counts of quadrature nodes with `p > 0` and `p < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignCounts {
    pub pos: usize,
    pub neg: usize,
    pub total: usize,
}

impl SignCounts {
    pub fn of(p: &Polynomial, quad: &CellQuadrature) -> Self {
        let mut ev = p.evaluator();
        let (mut pos, mut neg) = (0, 0);
        for i in 0..quad.len() {
            let v = ev.value(quad.point(i));
            if v > 0.0 {
                pos += 1;
            } else if v < 0.0 {
                neg += 1;
            }
        }
        SignCounts { pos, neg, total: quad.len() }
    }

    pub fn gap_fraction(&self) -> f64 {
        (self.pos as f64 - self.neg as f64) / self.total as f64
    }
}

/// `vol({p > 0} ∩ cell) - vol({p < 0} ∩ cell)`; exactly odd in `p`.
pub fn signed_volume_gap(p: &Polynomial, cell: &Region) -> Result<f64> {
    signed_volume_gap_with(p, cell, DEFAULT_GAP_LEVEL)
}

pub fn signed_volume_gap_with(p: &Polynomial, cell: &Region, level: u32) -> Result<f64> {
    let quad = cell_quadrature(cell, level)?;
    Ok(quad.volume * SignCounts::of(p, &quad).gap_fraction())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Bisection {
    PositiveHeavy,
    NegativeHeavy,
    Bisected,
}

impl Bisection {
    pub fn mirrored(self) -> Self {
        match self {
            Bisection::PositiveHeavy => Bisection::NegativeHeavy,
            Bisection::NegativeHeavy => Bisection::PositiveHeavy,
            Bisection::Bisected => Bisection::Bisected,
        }
    }
}

pub const DEFAULT_BISECT_THRESHOLD: f64 = 0.40;

pub fn classify_counts(c: &SignCounts, threshold: f64) -> Bisection {
    let need = threshold * c.total as f64;
    if c.pos as f64 >= need && c.neg as f64 >= need {
        return Bisection::Bisected;
    }
    match c.pos.cmp(&c.neg) {
        std::cmp::Ordering::Greater => Bisection::PositiveHeavy,
        std::cmp::Ordering::Less => Bisection::NegativeHeavy,
        std::cmp::Ordering::Equal => Bisection::Bisected,
    }
}

pub fn bisects(p: &Polynomial, cell: &Region, threshold: f64) -> Result<Bisection> {
    let quad = cell_quadrature(cell, DEFAULT_GAP_LEVEL)?;
    Ok(classify_counts(&SignCounts::of(p, &quad), threshold))
}

/// `surf_{e(T)}(Z ∩ T_L) / (deg p · ω_{n-1})` for the tube truncated to axial
/// length `2L`. Every line parallel to `e(T)` meets `Z` in at most `deg p`
/// points, so the ratio never exceeds 1 up to discretisation error.
pub fn cylinder_ratio(p: &Polynomial, tube: &Tube, half_length: f64, h: f64) -> Result<f64> {
    let k = p.degree();
    if k == 0 {
        return Err(Error::InvalidArgument("cylinder ratio needs deg p >= 1".into()));
    }
    let region = Region::TubeSegment {
        anchor: tube.anchor.clone(),
        dir: tube.direction.clone(),
        radius: 1.0,
        half_length,
    };
    let surf = directional_area(p, &region, &tube.direction, h)?;
    Ok(surf / (k as f64 * util::unit_ball_volume(p.n() - 1)))
}
