use super::value_rms;
use crate::convexvis::{build_gauge, closest_colored, default_directions, visibility_of, ColoredNet, Ellipsoid};
use crate::geomcore::Cube;
use crate::polyspace::Polynomial;
use crate::surfcalc::{
    cell_quadrature, classify_counts, Bisection, MollifierConfig, Region, SignCounts, DEFAULT_BISECT_THRESHOLD,
};
use crate::{Error, Result};
use serde::Serialize;

pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Mollifier radius relative to the RMS of `p` on `Q`.
    pub eps: f64,
    pub draws: usize,
    pub h: f64,
    pub eta: f64,
    /// Translate layout radius `c`.
    pub c: f64,
    pub threshold: f64,
    pub vis_samples: usize,
    /// Largest admissible `r` is `⌈log2 max_m⌉`.
    pub max_m: f64,
    /// `|gap| / vol` below this is UNDECIDED.
    pub noise_floor: f64,
    /// Sign-quadrature level for the translates (labels and gaps share nodes).
    pub level: u32,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            eps: 1e-3,
            draws: 8,
            h: 1.0 / 32.0,
            eta: DEFAULT_ETA,
            c: 0.5,
            threshold: DEFAULT_BISECT_THRESHOLD,
            vis_samples: 20_000,
            max_m: 1.0,
            noise_floor: 1e-3,
            level: 9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SignLabel {
    Plus,
    Minus,
    Undecided,
}

impl SignLabel {
    pub fn mirrored(self) -> Self {
        match self {
            SignLabel::Plus => SignLabel::Minus,
            SignLabel::Minus => SignLabel::Plus,
            SignLabel::Undecided => SignLabel::Undecided,
        }
    }
}

/// The class of `p` on `Q` for one colour of the net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityClass {
    pub cube: Vec<i64>,
    pub r: u32,
    pub vis: f64,
    pub color: usize,
    /// Index of `E(p)` in the net.
    pub element: usize,
    pub semiaxes: Vec<f64>,
    pub eta: f64,
    /// Lattice indices `m` (all even) of the kept translates.
    pub indices: Vec<Vec<i64>>,
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<Bisection>,
    /// `None` for bisected translates.
    pub signs: Vec<Option<SignLabel>>,
}

impl VisibilityClass {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Visibility class of `p` on `Q`, one entry per colour with a close net
/// element. The gauge body is computed from the sign-canonical representative
/// of `±p`, so `classify(-p)` differs from `classify(p)` only in the signs.
pub fn classify(p: &Polynomial, q: &Cube, m_q: f64, net: &ColoredNet, opts: &ClassifyOptions) -> Result<Vec<VisibilityClass>> {
    if !(m_q > 0.0) {
        return Err(Error::WeightPrecondition(format!("M(Q) = {m_q} must be positive")));
    }
    if !(opts.eta > 0.0 && opts.c > 0.0) {
        return Err(Error::InvalidArgument("eta and c must be positive".into()));
    }
    let n = p.n();
    let p = p.normalize()?;
    let canon = canonical(&p)?;
    let cube = Region::cube(q);
    let eps = opts.eps * value_rms(&p, std::iter::once(q)).min(1.0);
    let cfg = MollifierConfig::new(eps, opts.draws, opts.seed)?;
    let k = build_gauge(&canon, &cube, Some(&cfg), opts.h, default_directions(n))?;
    let vis = visibility_of(&k, opts.vis_samples, opts.seed)?;
    let r = dyadic_class(m_q, vis, opts.max_m);
    let matched = closest_colored(&k, net, net.params.alpha)?;
    let lo = q.lo();
    let hi = q.hi();
    let x_q = q.center();
    let mut out = Vec::new();
    for (&color, &idx) in &matched.matches {
        let e: &Ellipsoid = &net.elements[idx];
        let bounds: Vec<i64> = e
            .semiaxes
            .iter()
            .map(|l| {
                let b = (opts.c / (opts.eta * l)).floor() as i64;
                b - b.rem_euclid(2)
            })
            .collect();
        let mut class = VisibilityClass {
            cube: q.corner.clone(),
            r,
            vis,
            color,
            element: idx,
            semiaxes: e.semiaxes.clone(),
            eta: opts.eta,
            indices: Vec::new(),
            centers: Vec::new(),
            labels: Vec::new(),
            signs: Vec::new(),
        };
        let mut mvec: Vec<i64> = bounds.iter().map(|b| -b).collect();
        loop {
            let mut x = x_q.clone();
            for j in 0..n {
                let s = opts.eta * mvec[j] as f64 * e.semiaxes[j];
                for (xi, di) in x.iter_mut().zip(&e.directions[j]) {
                    *xi += s * di;
                }
            }
            if (0..n).all(|i| x[i] >= lo[i] && x[i] <= hi[i]) {
                let cell = Region::Ellipsoid(e.cell(&x, opts.eta)?);
                let counts = SignCounts::of(&p, &cell_quadrature(&cell, opts.level)?);
                let label = classify_counts(&counts, opts.threshold);
                let sign = match label {
                    Bisection::Bisected => None,
                    _ => {
                        let gap = counts.gap_fraction();
                        Some(if gap.abs() < opts.noise_floor {
                            SignLabel::Undecided
                        } else if gap > 0.0 {
                            SignLabel::Plus
                        } else {
                            SignLabel::Minus
                        })
                    }
                };
                class.indices.push(mvec.clone());
                class.centers.push(x);
                class.labels.push(label);
                class.signs.push(sign);
            }
            // next even lattice vector
            let mut j = 0;
            loop {
                if j == n {
                    break;
                }
                mvec[j] += 2;
                if mvec[j] <= bounds[j] {
                    break;
                }
                mvec[j] = -bounds[j];
                j += 1;
            }
            if j == n {
                break;
            }
        }
        out.push(class);
    }
    Ok(out)
}

/// `r` with `vis` in `[2^{-r-1} M, 2^{-r} M)`, clamped to `[0, ⌈log2 max_m⌉]`.
fn dyadic_class(m_q: f64, vis: f64, max_m: f64) -> u32 {
    let top = max_m.log2().ceil().max(0.0);
    let r = (m_q / vis).log2().ceil() - 1.0;
    r.clamp(0.0, top) as u32
}

fn canonical(p: &Polynomial) -> Result<Polynomial> {
    let lead = p.coeffs().iter().copied().fold(0.0f64, |a, c| if c.abs() > a.abs() { c } else { a });
    Ok(if lead < 0.0 { p.neg() } else { p.clone() })
}

/// Share of bisected translates.
pub fn bisection_fraction(class: &VisibilityClass) -> f64 {
    if class.is_empty() {
        return 0.0;
    }
    class.labels.iter().filter(|l| **l == Bisection::Bisected).count() as f64 / class.len() as f64
}

/// Bisected share over all colour classes of one `(p, Q)`.
pub fn pooled_bisection_fraction(classes: &[VisibilityClass]) -> f64 {
    let total: usize = classes.iter().map(|c| c.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let hit: usize =
        classes.iter().map(|c| c.labels.iter().filter(|l| **l == Bisection::Bisected).count()).sum();
    hit as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_window() {
        // vis in [M/2, M) is r = 0; [M/4, M/2) is r = 1
        assert_eq!(dyadic_class(8.0, 7.9, 8.0), 0);
        assert_eq!(dyadic_class(8.0, 4.0, 8.0), 0);
        assert_eq!(dyadic_class(8.0, 3.99, 8.0), 1);
        assert_eq!(dyadic_class(8.0, 2.0, 8.0), 1);
        assert_eq!(dyadic_class(8.0, 0.01, 8.0), 3);
        assert_eq!(dyadic_class(1.0, 50.0, 1.0), 0);
    }
}
