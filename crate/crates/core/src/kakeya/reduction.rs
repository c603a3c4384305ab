use super::{for_each_tuple, incident_tubes, value_rms, KakeyaInstance, WeightFunction};
use crate::convexvis::{build_gauge, default_directions, visibility_of};
use crate::geomcore::{wedge_volume, Cube};
use crate::oddzero::{warmup_bisector, WarmupOptions, WarmupReport};
use crate::polyspace::Polynomial;
use crate::surfcalc::{mollified_surface, MollifierConfig, Region};
use crate::util;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub warmup: WarmupOptions,
    /// Mollifier radius relative to the RMS of `p` on the support.
    pub eps: f64,
    pub draws: usize,
    /// Extraction step for the visibility measurement; `None` uses an eighth
    /// of the finest subcube side.
    pub h: Option<f64>,
    pub vis_samples: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            warmup: WarmupOptions::default(),
            eps: 1e-3,
            draws: 32,
            h: None,
            vis_samples: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CubeVisibility {
    pub corner: Vec<i64>,
    pub m: f64,
    pub vis: f64,
    /// `vis_ε / (λ M(Q))`.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub polynomial: Polynomial,
    pub k: usize,
    pub lambda: f64,
    /// Mollifier radius actually used on the coefficient sphere.
    pub eps: f64,
    pub h: f64,
    pub warmup: WarmupReport,
    pub per_cube: Vec<CubeVisibility>,
    /// `min_Q vis_ε / (λ M(Q))`.
    pub fitted_constant: f64,
    pub k_over_lambda: f64,
}

/// Bisecting polynomial for `λM` and its measured visibility on every support
/// cube of `M`.
pub fn pipeline_polynomial(m: &WeightFunction, lambda: f64, opts: &PipelineOptions) -> Result<PipelineReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let m0 = m.scaled(lambda);
    let warmup = warmup_bisector(&m0, &opts.warmup)?;
    if !warmup.zero.converged {
        return Err(Error::NotConverged { max_residual: warmup.zero.max_residual });
    }
    let finest = m0.support().map(|(_, v)| (v - 1e-9).ceil()).fold(1.0, f64::max);
    let h = opts.h.unwrap_or(0.125 / finest);
    let p = warmup.polynomial.clone();
    let eps = opts.eps * value_rms(&p, m.support().map(|(q, _)| q)).min(1.0);
    let cfg = MollifierConfig::new(eps, opts.draws, opts.seed)?;
    let mut per_cube = Vec::new();
    for (i, (q, v)) in m.support().enumerate() {
        let k = build_gauge(&p, &Region::cube(q), Some(&cfg), h, default_directions(m.n()))?;
        let vis = visibility_of(&k, opts.vis_samples, util::derive_seed(opts.seed, 1000 + i as u64))?;
        per_cube.push(CubeVisibility { corner: q.corner.clone(), m: v, vis, ratio: vis / (lambda * v) });
    }
    let fitted_constant = per_cube.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    Ok(PipelineReport {
        polynomial: p,
        k: warmup.k,
        lambda,
        eps,
        h,
        k_over_lambda: warmup.k as f64 / lambda,
        warmup,
        per_cube,
        fitted_constant,
    })
}

/// `S_j(Q, T) = λ^{-1} surf_{e(T), ε}(Z_p ∩ Q)` on incident pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SjTable {
    pub lambda: f64,
    pub eps: f64,
    pub seed: u64,
    /// `(family, cube, tube index)` to value.
    pub entries: BTreeMap<(usize, Cube, usize), f64>,
}

impl SjTable {
    pub fn get(&self, j: usize, q: &Cube, t: usize) -> Option<f64> {
        self.entries.get(&(j, q.clone(), t)).copied()
    }

    /// `(family, cube corner, tube index, value)` in key order.
    pub fn rows(&self) -> Vec<(usize, Vec<i64>, usize, f64)> {
        self.entries.iter().map(|((j, q, t), v)| (*j, q.corner.clone(), *t, *v)).collect()
    }
}

pub fn build_sj(
    inst: &KakeyaInstance,
    p: &Polynomial,
    cfg: &MollifierConfig,
    lambda: f64,
    h: f64,
) -> Result<SjTable> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let mut entries = BTreeMap::new();
    for q in inst.cubes()? {
        let inc = incident_tubes(inst, &q);
        if inc.iter().all(|l| l.is_empty()) {
            continue;
        }
        // working-box cubes lie inside the box, so clipping is the cube itself
        let samples = mollified_surface(p, &Region::cube(&q), cfg, h)?;
        for (j, list) in inc.iter().enumerate() {
            for (ti, t) in list {
                entries.insert((j, q.clone(), *ti), samples.directional(&t.direction) / lambda);
            }
        }
    }
    Ok(SjTable { lambda, eps: cfg.eps, seed: cfg.seed, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Need1Report {
    /// Smallest `C` with `|e(T_1)∧⋯∧e(T_d)| M(Q)^n <= C Π S_j(Q, T_j)` on
    /// every tuple where the right side is positive.
    pub max_c: f64,
    pub median_c: f64,
    pub tuples: usize,
    /// Tuples with a positive left side and a vanishing right side.
    pub hard_violations: Vec<(Vec<i64>, Vec<usize>)>,
    pub budget: f64,
    pub pass: bool,
}

pub fn check_need1(s: &SjTable, inst: &KakeyaInstance, m: &WeightFunction, budget: f64) -> Result<Need1Report> {
    let n = inst.n as i32;
    let mut cs = Vec::new();
    let mut hard = Vec::new();
    let mut tuples = 0;
    for (q, mq) in m.support() {
        let lists: Vec<Vec<usize>> =
            incident_tubes(inst, q).into_iter().map(|l| l.into_iter().map(|(i, _)| i).collect()).collect();
        let mut err = None;
        for_each_tuple(&lists, |ix| {
            let dirs: Vec<&[f64]> =
                ix.iter().enumerate().map(|(j, &i)| inst.families[j].tubes[i].direction.as_slice()).collect();
            let w = match wedge_volume(&dirs) {
                Ok(w) => w,
                Err(e) => {
                    err = Some(e);
                    return;
                }
            };
            let lhs = w * mq.powi(n);
            if lhs <= 0.0 {
                return;
            }
            tuples += 1;
            let rhs: f64 = ix.iter().enumerate().map(|(j, &i)| s.get(j, q, i).unwrap_or(0.0)).product();
            if rhs > 0.0 {
                cs.push(lhs / rhs);
            } else {
                hard.push((q.corner.clone(), ix.to_vec()));
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    let max_c = cs.iter().copied().fold(0.0, f64::max);
    let median_c = if cs.is_empty() { 0.0 } else { util::median(&cs) };
    let pass = hard.is_empty() && max_c.is_finite() && max_c <= budget;
    Ok(Need1Report { max_c, median_c, tuples, hard_violations: hard, budget, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Need2Report {
    /// `(family, tube index, Σ_Q S_j(Q, T))`.
    pub per_tube: Vec<(usize, usize, f64)>,
    /// The fitted constant.
    pub max_sum: f64,
    pub median_sum: f64,
    pub budget: f64,
    pub pass: bool,
}

pub fn check_need2(s: &SjTable, budget: f64) -> Need2Report {
    let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for ((j, _, t), v) in &s.entries {
        *sums.entry((*j, *t)).or_default() += v;
    }
    let per_tube: Vec<(usize, usize, f64)> = sums.into_iter().map(|((j, t), v)| (j, t, v)).collect();
    let vals: Vec<f64> = per_tube.iter().map(|x| x.2).collect();
    let max_sum = vals.iter().copied().fold(0.0, f64::max);
    let median_sum = if vals.is_empty() { 0.0 } else { util::median(&vals) };
    Need2Report { per_tube, max_sum, median_sum, budget, pass: max_sum <= budget }
}
