use super::ellipsoid::{banach_mazur, Ellipsoid};
use super::GaugeBody;
use crate::util::{self, Rng64};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub n: usize,
    pub rho: f64,
    pub gamma: f64,
    /// Closeness factor: `E` is close to `K` when `α^{-1} K ⊆ E ⊆ α K` on the net.
    pub alpha: f64,
    /// Volume range in units of `vol(B)`.
    pub v_min: f64,
    pub v_max: f64,
    pub ratio_cap: f64,
    pub seed: u64,
    pub pool: usize,
    /// Extension stops after this many consecutive slab samples fall within `ρ`
    /// of the net.
    pub quiet_samples: usize,
}

impl NetParams {
    pub fn new(n: usize, rho: f64, gamma: f64, v_min: f64, v_max: f64, ratio_cap: f64, seed: u64) -> Self {
        NetParams {
            n,
            rho,
            gamma,
            alpha: (n as f64).sqrt() * 1.1,
            v_min,
            v_max,
            ratio_cap,
            seed,
            pool: 4000,
            quiet_samples: 30_000,
        }
    }

    /// Conflict radius of the colouring: same-coloured elements are farther
    /// apart than both `γρ` and twice the closeness radius.
    pub fn conflict_radius(&self) -> f64 {
        (self.gamma * self.rho).max(2.0 * self.alpha.ln() + 0.05)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.rho > 0.0) || !(self.gamma > 1.0) || !(self.alpha >= 1.0) {
            return Err(Error::InvalidArgument("net needs n >= 1, rho > 0, gamma > 1, alpha >= 1".into()));
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max && self.v_max.is_finite() && self.ratio_cap >= 1.0) {
            return Err(Error::EmptySlab);
        }
        Ok(())
    }
}

/// Random ellipsoid with volume ratio in `[v_min, v_max]`, axis ratio at most
/// the cap and a Haar-random frame.
pub fn sample_in_slab(p: &NetParams, r: &mut Rng64) -> Ellipsoid {
    let n = p.n;
    let (a, b) = (p.v_min.ln(), p.v_max.ln());
    let total = a + (b - a) * r.random::<f64>();
    let spread = p.ratio_cap.ln();
    let z: Vec<f64> = (0..n).map(|_| spread * (r.random::<f64>() - 0.5)).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let axes: Vec<f64> = z.iter().map(|zi| (total / n as f64 + zi - mean).exp()).collect();
    let rot = util::random_rotation(r, n);
    Ellipsoid::from_axes(&rot, &axes).expect("positive semiaxes")
}

#[derive(Debug, Clone)]
pub struct ColoredNet {
    pub elements: Vec<Ellipsoid>,
    pub colors: Vec<usize>,
    pub n_colors: usize,
    pub params: NetParams,
    /// Certified lower bounds: exact distances for close pairs, the semiaxis
    /// gap for the rest.
    pub min_separation: f64,
    pub min_colour_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetElementJson {
    pub form: Vec<Vec<f64>>,
    pub color: usize,
}

impl ColoredNet {
    pub fn to_json(&self) -> Vec<NetElementJson> {
        self.elements
            .iter()
            .zip(&self.colors)
            .map(|(e, &color)| NetElementJson { form: e.axes_as_rows(), color })
            .collect()
    }

    /// Distance from `e` to the nearest element, and its index.
    pub fn nearest(&self, e: &Ellipsoid) -> (usize, f64) {
        let la = log_axes(e);
        let mut best = (0, f64::INFINITY);
        for (i, x) in self.elements.iter().enumerate() {
            if axis_gap(&log_axes(x), &la) >= best.1 {
                continue;
            }
            let d = banach_mazur(x, e).unwrap_or(f64::INFINITY);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

fn log_axes(e: &Ellipsoid) -> Vec<f64> {
    e.semiaxes.iter().map(|a| a.ln()).collect()
}

/// `max_i |log a_i - log b_i|` over descending semiaxes: a lower bound for the
/// Banach–Mazur distance, since `E ⊆ αF` forces `a_i <= α b_i` for every `i`.
fn axis_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// True when some element is within `rho` of `e`.
fn is_covered(elements: &[Ellipsoid], logs: &[Vec<f64>], e: &Ellipsoid, rho: f64) -> bool {
    let la = log_axes(e);
    elements
        .iter()
        .zip(logs)
        .any(|(x, lx)| axis_gap(lx, &la) <= rho && banach_mazur(x, e).unwrap_or(f64::INFINITY) <= rho)
}

/// Greedy farthest-point ρ-net of the parameter slab under the Banach–Mazur
/// distance, extended by fresh slab samples (each uncovered one joins the net)
/// until `quiet_samples` in a row are covered, then greedily coloured so same-coloured elements are at least the
/// conflict radius apart. Separation and colour separation are re-checked
/// over all pairs before returning.
pub fn build_net(params: &NetParams) -> Result<ColoredNet> {
    params.validate()?;
    let mut r = util::rng(params.seed);
    let pool: Vec<Ellipsoid> = (0..params.pool.max(1)).map(|_| sample_in_slab(params, &mut r)).collect();
    let pool_logs: Vec<Vec<f64>> = pool.iter().map(log_axes).collect();
    let mut elements = vec![pool[0].clone()];
    let mut mind: Vec<f64> = pool.iter().map(|e| banach_mazur(&elements[0], e).unwrap()).collect();
    loop {
        let (j, d) = mind.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        if d <= params.rho {
            break;
        }
        let new = pool[j].clone();
        for ((m, e), le) in mind.iter_mut().zip(&pool).zip(&pool_logs) {
            if axis_gap(&pool_logs[j], le) < *m {
                *m = m.min(banach_mazur(&new, e).unwrap());
            }
        }
        elements.push(new);
    }
    let mut logs: Vec<Vec<f64>> = elements.iter().map(log_axes).collect();
    let mut quiet = 0;
    while quiet < params.quiet_samples {
        let e = sample_in_slab(params, &mut r);
        if is_covered(&elements, &logs, &e, params.rho) {
            quiet += 1;
        } else {
            logs.push(log_axes(&e));
            elements.push(e);
            quiet = 0;
        }
    }
    let m = elements.len();
    let conflict = params.conflict_radius();
    let mut colors = vec![usize::MAX; m];
    // pairs with an axis gap of at least the conflict radius are farther apart
    // than both thresholds and are never evaluated
    let mut min_sep = f64::INFINITY;
    let mut min_col = f64::INFINITY;
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        for j in 0..i {
            let gap = axis_gap(&logs[i], &logs[j]);
            if gap >= conflict {
                min_sep = min_sep.min(gap);
                continue;
            }
            let d = banach_mazur(&elements[i], &elements[j])?;
            min_sep = min_sep.min(d);
            if d < conflict {
                neighbours[i].push(j);
            }
        }
        let used: Vec<usize> = neighbours[i].iter().map(|&j| colors[j]).collect();
        colors[i] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    for i in 0..m {
        for j in 0..i {
            if colors[i] == colors[j] {
                let gap = axis_gap(&logs[i], &logs[j]);
                min_col = min_col.min(if gap >= conflict { gap } else { banach_mazur(&elements[i], &elements[j])? });
            }
        }
    }
    if min_sep < params.rho || min_col < conflict {
        return Err(Error::NetCertificate(format!(
            "separation {min_sep:.4} (need {}), colour separation {min_col:.4} (need {conflict:.4})",
            params.rho
        )));
    }
    let n_colors = colors.iter().max().map_or(0, |c| c + 1);
    Ok(ColoredNet { elements, colors, n_colors, params: params.clone(), min_separation: min_sep, min_colour_separation: min_col })
}

/// `max_i |log(g(d_i) r_E(d_i))|` over the body's direction net: the
/// Banach–Mazur distance between `K` and `E` seen through the net directions.
pub fn net_distance(k: &GaugeBody, e: &Ellipsoid) -> f64 {
    k.directions.iter().zip(&k.values).map(|(d, g)| (g * e.radial(d)).ln().abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColourMatch {
    /// Colour to the index of its unique close element.
    pub matches: BTreeMap<usize, usize>,
    pub distances: BTreeMap<usize, f64>,
    /// Colours with two or more close elements, with all of them.
    pub violations: Vec<(usize, Vec<usize>)>,
}

/// For each colour, the net element `E` with `d_net(K, E) <= log α` (at most
/// one by the colouring), or a violation entry listing every close element.
pub fn closest_colored(k: &GaugeBody, net: &ColoredNet, alpha: f64) -> Result<ColourMatch> {
    let limit = alpha.ln();
    let stride = (k.directions.len() / 32).max(1);
    let probe: Vec<usize> = (0..k.directions.len()).step_by(stride).collect();
    let mut close: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, e) in net.elements.iter().enumerate() {
        let rough = probe
            .iter()
            .map(|&j| (k.values[j] * e.radial(&k.directions[j])).ln().abs())
            .fold(0.0, f64::max);
        if rough > limit {
            continue;
        }
        let d = net_distance(k, e);
        if d <= limit {
            close.entry(net.colors[i]).or_default().push((i, d));
        }
    }
    if close.is_empty() {
        return Err(Error::NoColourMatch);
    }
    let mut out = ColourMatch { matches: BTreeMap::new(), distances: BTreeMap::new(), violations: Vec::new() };
    for (c, list) in close {
        if list.len() > 1 {
            out.violations.push((c, list.iter().map(|x| x.0).collect()));
        }
        let best = list.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        out.matches.insert(c, best.0);
        out.distances.insert(c, best.1);
    }
    Ok(out)
}

#[allow(dead_code)]
fn form_of(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexvis::john_ellipsoid;

    fn small_params(seed: u64) -> NetParams {
        let mut p = NetParams::new(2, 0.25, 5.0, 0.25, 1.0, 4.0, seed);
        p.pool = 1500;
        p.quiet_samples = 5000;
        p
    }

    #[test]
    fn ball_only_slab() {
        let p = NetParams::new(2, 0.5, 4.0, 1.0, 1.0, 1.0, 1);
        let net = build_net(&p).unwrap();
        assert_eq!(net.elements.len(), 1);
        assert_eq!(net.n_colors, 1);
        let m = closest_colored(&super::super::GaugeBody::ball(2), &net, p.alpha).unwrap();
        assert_eq!(m.matches.get(&0), Some(&0));
    }

    #[test]
    fn empty_slab_is_rejected() {
        let p = NetParams::new(2, 0.5, 4.0, 2.0, 1.0, 4.0, 1);
        assert!(matches!(build_net(&p), Err(Error::EmptySlab)));
    }

    #[test]
    fn net_invariants_and_coverage() {
        let p = small_params(7);
        let net = build_net(&p).unwrap();
        assert!(net.min_separation >= p.rho);
        assert!(net.min_colour_separation >= p.gamma * p.rho);
        let mut r = util::rng(99);
        for _ in 0..300 {
            let e = sample_in_slab(&p, &mut r);
            assert!(net.nearest(&e).1 <= p.rho);
        }
        let json = serde_json::to_string(&net.to_json()).unwrap();
        let back: Vec<NetElementJson> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), net.elements.len());
        let f = Ellipsoid::from_form(form_of(&back[0].form)).unwrap();
        assert!(banach_mazur(&f, &net.elements[0]).unwrap() < 1e-12);
    }

    #[test]
    fn distorted_element_is_matched() {
        let p = small_params(3);
        let net = build_net(&p).unwrap();
        let target = &net.elements[net.elements.len() / 2];
        // body = target ellipsoid slightly squeezed, given as a polytope gauge
        let rows: Vec<Vec<f64>> = super::super::direction_net(2, 720)
            .iter()
            .map(|d| {
                let len = target.radial(d) * 0.98;
                util::scaled(d, 1.0 / len)
            })
            .collect();
        // the ellipsoid's own support: body is the polar-dual cut, inside B when semiaxes <= 1
        let k = super::super::GaugeBody::new(2, super::super::GaugeSource::Polytope { rows }, 512);
        if target.semiaxes[0] < 0.95 {
            let m = closest_colored(&k, &net, p.alpha).unwrap();
            let idx = net.elements.len() / 2;
            assert_eq!(m.matches.get(&net.colors[idx]), Some(&idx));
            assert!(m.violations.is_empty());
            let j = john_ellipsoid(&k).unwrap();
            assert!(j.outer_factor < 1.5);
        }
    }
}
