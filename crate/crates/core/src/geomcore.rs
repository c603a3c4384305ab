//! Lattice cubes, 1-tubes, wedge volumes and tube–cube incidence.

use crate::util;
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Unit lattice cube `Π (corner_i, corner_i + 1]`. Open below, closed above, so
/// the cubes tile `R^n` without overlap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub corner: Vec<i64>,
}

impl Cube {
    pub fn new(corner: Vec<i64>) -> Self {
        Cube { corner }
    }

    pub fn n(&self) -> usize {
        self.corner.len()
    }

    /// The unique cube containing `x`.
    pub fn containing(x: &[f64]) -> Self {
        Cube { corner: x.iter().map(|&v| v.ceil() as i64 - 1).collect() }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.corner.iter().zip(x).all(|(&c, &v)| v > c as f64 && v <= (c + 1) as f64)
    }

    pub fn lo(&self) -> Vec<f64> {
        self.corner.iter().map(|&c| c as f64).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.corner.iter().map(|&c| (c + 1) as f64).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.corner.iter().map(|&c| c as f64 + 0.5).collect()
    }
}

/// Every lattice cube meeting the box `(lo, hi]` in positive measure, in
/// lexicographic order of corners.
pub fn lattice_cubes(lo: &[f64], hi: &[f64]) -> Result<Vec<Cube>> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
        return Err(Error::InvalidArgument("region must be a bounded non-empty box".into()));
    }
    let ranges: Vec<(i64, i64)> =
        lo.iter().zip(hi).map(|(&a, &b)| (a.floor() as i64, b.ceil() as i64 - 1)).collect();
    let mut out = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return Ok(out);
    }
    loop {
        out.push(Cube::new(cur.clone()));
        let mut i = cur.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                for j in i + 1..cur.len() {
                    cur[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// Closed 1-neighbourhood of the line `anchor + t * direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub anchor: Vec<f64>,
    pub direction: Vec<f64>,
    pub weight: f64,
    pub family: usize,
}

impl Tube {
    pub fn new(anchor: Vec<f64>, direction: Vec<f64>, weight: f64, family: usize) -> Result<Self> {
        if anchor.len() != direction.len() {
            return Err(Error::DimensionMismatch { expected: anchor.len(), got: direction.len() });
        }
        if (util::norm(&direction) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("tube direction must be a unit vector".into()));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument("tube weight must be finite and nonnegative".into()));
        }
        Ok(Tube { anchor, direction, weight, family })
    }

    pub fn n(&self) -> usize {
        self.anchor.len()
    }

    pub fn axis_distance(&self, x: &[f64]) -> f64 {
        point_line_distance(&self.anchor, &self.direction, x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axis_distance(x) <= 1.0
    }

    /// 1 if `x` lies in the closed tube, else 0.
    pub fn indicator(&self, x: &[f64]) -> u8 {
        self.contains(x) as u8
    }

    pub fn meets_cube(&self, q: &Cube) -> bool {
        tube_cube_incidence(self, q)
    }
}

pub fn point_line_distance(anchor: &[f64], dir: &[f64], x: &[f64]) -> f64 {
    let d = util::sub(x, anchor);
    let t = util::dot(&d, dir);
    d.iter().zip(dir).map(|(di, vi)| (di - t * vi).powi(2)).sum::<f64>().max(0.0).sqrt()
}

/// A tube with its radius multiplied by `factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeRegion {
    pub tube: Tube,
    pub radius: f64,
}

impl TubeRegion {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.tube.axis_distance(x) <= self.radius
    }

    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        line_box_distance(&self.tube.anchor, &self.tube.direction, lo, hi) <= self.radius
    }
}

pub fn expand_tube(t: &Tube, factor: f64) -> Result<TubeRegion> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("expansion factor must be >= 1, got {factor}")));
    }
    Ok(TubeRegion { tube: t.clone(), radius: factor })
}

fn box_dist2(a: &[f64], v: &[f64], lo: &[f64], hi: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let y = a[i] + t * v[i];
        let d = if y < lo[i] {
            lo[i] - y
        } else if y > hi[i] {
            y - hi[i]
        } else {
            0.0
        };
        s += d * d;
    }
    s
}

/// Euclidean distance between the line `a + t v` and the closed box `[lo, hi]`.
///
/// The squared distance is a convex piecewise quadratic in `t` whose pieces are
/// delimited by the parameters where the line crosses a face plane; each piece
/// is minimised in closed form.
pub fn line_box_distance(a: &[f64], v: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = a.len();
    let mut breaks = Vec::with_capacity(2 * n);
    for i in 0..n {
        if v[i] != 0.0 {
            breaks.push((lo[i] - a[i]) / v[i]);
            breaks.push((hi[i] - a[i]) / v[i]);
        }
    }
    if breaks.is_empty() {
        return box_dist2(a, v, lo, hi, 0.0).sqrt();
    }
    breaks.sort_by(|x, y| x.total_cmp(y));
    let mut best = f64::INFINITY;
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(&breaks);
    edges.push(f64::INFINITY);
    for w in edges.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let probe = match (t0.is_finite(), t1.is_finite()) {
            (true, true) => 0.5 * (t0 + t1),
            (false, true) => t1 - 1.0,
            (true, false) => t0 + 1.0,
            (false, false) => 0.0,
        };
        // quadratic coefficients of the active piece
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..n {
            let y = a[i] + probe * v[i];
            let target = if y < lo[i] {
                lo[i]
            } else if y > hi[i] {
                hi[i]
            } else {
                continue;
            };
            let off = a[i] - target;
            qa += v[i] * v[i];
            qb += 2.0 * off * v[i];
        }
        let t = if qa > 0.0 { -qb / (2.0 * qa) } else { probe };
        let t = t.clamp(t0, t1);
        let t = if t.is_finite() { t } else { probe };
        best = best.min(box_dist2(a, v, lo, hi, t));
        for &edge in &[t0, t1] {
            if edge.is_finite() {
                best = best.min(box_dist2(a, v, lo, hi, edge));
            }
        }
    }
    best.sqrt()
}

/// Closed tube meets the closed cube; grazing contact counts.
pub fn tube_cube_incidence(t: &Tube, q: &Cube) -> bool {
    line_box_distance(&t.anchor, &t.direction, &q.lo(), &q.hi()) <= 1.0
}

/// `sqrt(det G)` for the Gram matrix of `vs`; zero when `det G <= 1e-12`.
pub fn wedge_volume(vs: &[&[f64]]) -> Result<f64> {
    let d = vs.len();
    if d == 0 {
        return Err(Error::InvalidArgument("wedge of zero vectors".into()));
    }
    let n = vs[0].len();
    if d > n {
        return Err(Error::InvalidArgument(format!("{d} vectors cannot span a wedge in R^{n}")));
    }
    for v in vs {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if (util::norm(v) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument("wedge factors must be unit vectors".into()));
        }
    }
    let g = DMatrix::from_fn(d, d, |i, j| util::dot(vs[i], vs[j]));
    let det = g.determinant();
    Ok(if det <= 1e-12 { 0.0 } else { det.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeFamily {
    pub n: usize,
    pub d: usize,
    pub family: usize,
    pub tubes: Vec<Tube>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TubeJson {
    pub anchor: Vec<f64>,
    pub direction: Vec<f64>,
    pub weight: f64,
    pub family: usize,
}

/// On-disk tube collection, `{"n", "d", "tubes": [...]}` with families `1..=d`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TubeFile {
    pub n: usize,
    pub d: usize,
    pub tubes: Vec<TubeJson>,
}

impl TubeFile {
    pub fn from_families(families: &[TubeFamily]) -> Result<Self> {
        let first = families.first().ok_or_else(|| Error::InvalidArgument("no tube families".into()))?;
        let tubes = families
            .iter()
            .flat_map(|f| f.tubes.iter())
            .map(|t| TubeJson {
                anchor: t.anchor.clone(),
                direction: t.direction.clone(),
                weight: t.weight,
                family: t.family,
            })
            .collect();
        Ok(TubeFile { n: first.n, d: first.d, tubes })
    }

    /// Validates and groups tubes into `d` families. Directions within 1e-6 of
    /// unit length are renormalised; others are rejected.
    pub fn into_families(self) -> Result<Vec<TubeFamily>> {
        let TubeFile { n, d, tubes } = self;
        if !(2 <= d && d <= n) {
            return Err(Error::InvalidArgument(format!("need 2 <= d <= n, got d={d}, n={n}")));
        }
        let mut fams: Vec<TubeFamily> =
            (1..=d).map(|family| TubeFamily { n, d, family, tubes: Vec::new() }).collect();
        for (i, t) in tubes.into_iter().enumerate() {
            if t.anchor.len() != n || t.direction.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: t.anchor.len().min(t.direction.len()) });
            }
            if !(1..=d).contains(&t.family) {
                return Err(Error::InvalidArgument(format!("tube {i}: family {} outside 1..={d}", t.family)));
            }
            let len = util::norm(&t.direction);
            if (len - 1.0).abs() >= 1e-6 {
                return Err(Error::InvalidArgument(format!("tube {i}: direction length {len} is not unit")));
            }
            let dir = util::scaled(&t.direction, 1.0 / len);
            let tube = Tube::new(t.anchor, dir, t.weight, t.family)?;
            fams[t.family - 1].tubes.push(tube);
        }
        Ok(fams)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wedge_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        assert!((wedge_volume(&[&e1, &e2]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wedge_volume(&[&e1, &e1]).unwrap(), 0.0);
        let s = 0.5f64.sqrt();
        let v = wedge_volume(&[&[1.0, 0.0], &[s, s]]).unwrap();
        assert!((v - s).abs() < 1e-12);
        assert!(wedge_volume(&[&[1.0, 0.0], &[0.0, 1.0], &[s, s]]).is_err());
    }

    #[test]
    fn indicator_examples() {
        let t = Tube::new(vec![0.0, 0.0], vec![1.0, 0.0], 1.0, 1).unwrap();
        assert_eq!(t.indicator(&[5.0, 0.0]), 1);
        assert_eq!(t.indicator(&[0.0, 2.0]), 0);
        assert_eq!(t.indicator(&[3.0, 1.0 - 1e-9]), 1);
        assert_eq!(t.indicator(&[3.0, -1.0]), 1);
    }

    #[test]
    fn incidence_examples() {
        let q = Cube::new(vec![0, 0]);
        let through = Tube::new(vec![0.5, 0.5], vec![0.6, 0.8], 1.0, 1).unwrap();
        assert!(tube_cube_incidence(&through, &q));
        let far = Tube::new(vec![0.0, 4.0], vec![1.0, 0.0], 1.0, 1).unwrap();
        assert!(!tube_cube_incidence(&far, &q));
        let graze = Tube::new(vec![-7.0, 2.0], vec![1.0, 0.0], 1.0, 1).unwrap();
        assert!(tube_cube_incidence(&graze, &q));
        // diagonal line at distance 1 from the corner (1, 1)
        let s = 0.5f64.sqrt();
        let diag = Tube::new(vec![1.0 + s, 1.0 + s], vec![s, -s], 1.0, 1).unwrap();
        let dist = line_box_distance(&diag.anchor, &diag.direction, &q.lo(), &q.hi());
        assert!((dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expansion_examples() {
        let t = Tube::new(vec![0.0, 0.0], vec![0.0, 1.0], 1.0, 1).unwrap();
        let same = expand_tube(&t, 1.0).unwrap();
        assert_eq!(same.radius, 1.0);
        assert!(expand_tube(&t, 2.0).unwrap().contains(&[1.5, 0.0]));
        assert!(!t.contains(&[1.5, 0.0]));
        assert!(expand_tube(&t, 0.5).is_err());
    }

    #[test]
    fn lattice_examples() {
        assert_eq!(lattice_cubes(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap().len(), 1);
        assert_eq!(lattice_cubes(&[0.0, 0.0], &[2.0, 2.0]).unwrap().len(), 4);
        // corners -1, 0, 1 each overlap (-0.5, 1.5] in positive length
        let cubes = lattice_cubes(&[-0.5, -0.5], &[1.5, 1.5]).unwrap();
        assert_eq!(cubes.len(), 9);
        assert_eq!(cubes[0].corner, vec![-1, -1]);
        assert_eq!(cubes[8].corner, vec![1, 1]);
    }

    #[test]
    fn integer_points_belong_to_lower_cube() {
        let q = Cube::containing(&[1.0, -2.0]);
        assert_eq!(q.corner, vec![0, -3]);
        assert!(q.contains(&[1.0, -2.0]));
        assert!(!Cube::new(vec![1, -2]).contains(&[1.0, -2.0]));
    }

    #[test]
    fn tube_file_round_trip() {
        let text = r#"{"n":2,"d":2,"tubes":[
            {"anchor":[0,0],"direction":[1.0000001,0],"weight":1.0,"family":1},
            {"anchor":[0,0],"direction":[0,1],"weight":2.0,"family":2}]}"#;
        let file: TubeFile = serde_json::from_str(text).unwrap();
        let fams = file.into_families().unwrap();
        assert_eq!(fams[0].tubes[0].direction, vec![1.0, 0.0]);
        let back = TubeFile::from_families(&fams).unwrap();
        assert_eq!(back.tubes.len(), 2);
        let bad = r#"{"n":2,"d":2,"tubes":[{"anchor":[0,0],"direction":[1.1,0],"weight":1.0,"family":1}]}"#;
        let file: TubeFile = serde_json::from_str(bad).unwrap();
        assert!(file.into_families().is_err());
    }

    proptest! {
        #[test]
        fn every_point_lies_in_exactly_one_cube(x in prop::collection::vec(-5.0f64..5.0, 3), snap in any::<bool>()) {
            let x: Vec<f64> = if snap { x.iter().map(|v| v.round()).collect() } else { x };
            let q = Cube::containing(&x);
            prop_assert!(q.contains(&x));
            for axis in 0..3 {
                for step in [-1i64, 1] {
                    let mut c = q.corner.clone();
                    c[axis] += step;
                    prop_assert!(!Cube::new(c).contains(&x));
                }
            }
        }

        #[test]
        fn wedge_is_symmetric_and_bounded(seed in 0u64..500) {
            let mut r = util::rng(seed);
            let a = util::random_unit(&mut r, 4);
            let b = util::random_unit(&mut r, 4);
            let c = util::random_unit(&mut r, 4);
            let w1 = wedge_volume(&[&a, &b, &c]).unwrap();
            let w2 = wedge_volume(&[&c, &a, &b]).unwrap();
            prop_assert!((w1 - w2).abs() < 1e-12);
            prop_assert!(w1 <= 1.0 + 1e-12);
        }

        #[test]
        fn line_box_distance_is_a_lower_bound_attained_nearby(seed in 0u64..500) {
            let mut r = util::rng(seed);
            let a: Vec<f64> = util::gaussian_vec(&mut r, 3).iter().map(|v| 2.0 * v).collect();
            let v = util::random_unit(&mut r, 3);
            let lo = [0.0, 0.0, 0.0];
            let hi = [1.0, 1.0, 1.0];
            let d = line_box_distance(&a, &v, &lo, &hi);
            let mut best = f64::INFINITY;
            for i in -4000..=4000 {
                let t = i as f64 * 2e-3;
                best = best.min(box_dist2(&a, &v, &lo, &hi, t).sqrt());
            }
            prop_assert!(d <= best + 1e-12);
            prop_assert!(best - d < 2e-3);
        }
    }
}
