use crate::config::*;
use crate::report::{num, Report, Table};
use kakeya_core::convexvis::{
    body_volume, build_gauge, build_net, convexity_violations, default_directions, john_ellipsoid, sample_in_slab,
    ColoredNet,
};
use kakeya_core::geomcore::{Cube, Tube};
use kakeya_core::kakeya::{
    appendix_check, build_sj, check_need1, check_need2, classify, derive_M, gen_instance_with, pipeline_polynomial,
    pooled_bisection_fraction, theorem_ratio, bisection_fraction, ClassifyOptions, InstanceParams, KakeyaInstance,
    PipelineOptions, WeightFunction,
};
use kakeya_core::oddzero::{warmup_bisector, WarmupOptions, ZeroOptions};
use kakeya_core::polyspace::{make_space, Polynomial};
use kakeya_core::surfcalc::{cylinder_ratio, EllipsoidCell, MollifierConfig, Region};
use kakeya_core::util;
use kakeya_core::{Error, Result};
use serde::Serialize;
use serde_json::json;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// `f(0..count)` on at most `jobs` threads, results in index order.
fn par_map<T: Send>(jobs: usize, count: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(count) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let v = f(i);
                slots.lock().unwrap()[i] = Some(v);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|v| v.expect("every slot filled")).collect()
}

fn tag(x: impl Serialize) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

fn zero_options(s: &SearchConfig, seed: u64) -> WarmupOptions {
    WarmupOptions {
        c_deg: s.c_deg,
        zero: ZeroOptions { tol: s.tol, restarts: s.restarts, seed, iterations: s.iterations },
        level: s.level,
        area_h: s.area_h,
    }
}

pub fn bisect(cfg: &BisectConfig, _jobs: usize) -> Result<Report> {
    let n = cfg.weights[0].corner.len();
    let m = WeightFunction::from_entries(n, cfg.weights.iter().map(|w| (Cube::new(w.corner.clone()), w.value)))?;
    let rep = warmup_bisector(&m, &zero_options(&cfg.search, cfg.seed))?;
    let mut out = Report::new();
    out.not_converged = !rep.zero.converged;
    if rep.zero.converged && rep.fitted_c <= cfg.min_fitted_c {
        out.fail(format!("fitted c = {} is not above {}", rep.fitted_c, cfg.min_fitted_c));
    }
    out.set("k", rep.k);
    out.set("cells", rep.cells);
    out.set("converged", rep.zero.converged);
    out.set("max_residual", rep.zero.max_residual);
    out.set("restarts_used", rep.zero.restarts_used);
    out.set("fitted_constants", json!({ "c": rep.fitted_c }));
    out.set("residuals", &rep.zero.residuals);
    out.set("polynomial", rep.polynomial.to_json());
    let mut header = indexed("corner", n);
    header.extend(["weight", "area", "area_over_weight"].map(String::from));
    let mut t = Table::new("bisect", header);
    for c in &rep.per_cube {
        let mut row: Vec<String> = c.corner.iter().map(|x| x.to_string()).collect();
        row.extend([num(c.weight), num(c.area), num(c.area / c.weight)]);
        t.rows.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

pub fn visibility(cfg: &VisibilityConfig, _jobs: usize) -> Result<Report> {
    let p = Polynomial::from_json(cfg.polynomial.inline(), true)?;
    let n = p.n();
    let region = Region::cube(&Cube::new(cfg.cube.clone()));
    let moll = cfg.eps.map(|e| MollifierConfig::new(e, cfg.draws, cfg.seed)).transpose()?;
    let count = cfg.directions.unwrap_or_else(|| default_directions(n));
    let k = build_gauge(&p, &region, moll.as_ref(), cfg.h, count)?;
    let vol = body_volume(&k, cfg.samples, cfg.seed)?;
    let mut out = Report::new();
    let vis = if vol.volume > 0.0 { vol.volume.powf(-1.0 / n as f64) } else { f64::INFINITY };
    let floor = util::unit_ball_volume(n).powf(-1.0 / n as f64);
    if vis < 0.98 * floor {
        out.fail(format!("visibility {vis} below the ball value {floor} by more than 2%"));
    }
    let violations = convexity_violations(&k, cfg.convexity_triples, cfg.seed);
    if violations > 0 {
        out.fail(format!("{violations} gauge convexity violations"));
    }
    let limit = (n as f64).sqrt() * 1.05;
    match john_ellipsoid(&k) {
        Ok(j) => {
            if j.outer_factor > limit {
                out.fail(format!("John outer factor {} exceeds {limit}", j.outer_factor));
            }
            out.set(
                "john",
                json!({
                    "semiaxes": j.ellipsoid.semiaxes,
                    "directions": j.ellipsoid.directions,
                    "inner_gauge": j.inner_gauge,
                    "outer_factor": j.outer_factor,
                }),
            );
        }
        Err(e @ Error::JohnCertificate(_)) => out.fail(e.to_string()),
        Err(e) => return Err(e),
    }
    out.set("visibility", vis);
    out.set("volume", vol.volume);
    out.set("volume_std_error", vol.std_error);
    out.set("ball_visibility", floor);
    out.set("convexity_violations", violations);
    out.set("directions", count);
    let mut header = indexed("u", n);
    header.extend(["seminorm", "gauge", "radius"].map(String::from));
    let mut t = Table::new("visibility", header);
    for ((d, s), g) in k.directions.iter().zip(&k.seminorms).zip(&k.values) {
        let mut row: Vec<String> = d.iter().map(|x| num(*x)).collect();
        row.extend([num(*s), num(*g), num(1.0 / g)]);
        t.rows.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

/// The instances named by the source, each with its seed (`None` for files).
fn instances(src: &InstanceSource) -> Result<Vec<(Option<u64>, KakeyaInstance)>> {
    if let Some(file) = &src.tubes {
        let fams = file.clone().into_families()?;
        return Ok(vec![(None, KakeyaInstance::new(file.n, file.d, fams)?)]);
    }
    let g = src.generate.as_ref().expect("validated instance source");
    g.seeds
        .iter()
        .map(|&seed| {
            let p = InstanceParams {
                n: g.n,
                d: g.d,
                tubes_per_family: g.tubes_per_family,
                spread: g.spread,
                seed,
                anchor_half_width: g.anchor_half_width,
                transverse: g.transverse,
            };
            Ok((Some(seed), gen_instance_with(&p)?))
        })
        .collect()
}

fn seed_cell(s: Option<u64>) -> String {
    s.map_or_else(String::new, |v| v.to_string())
}

pub fn kakeya_verify(cfg: &KakeyaVerifyConfig, jobs: usize) -> Result<Report> {
    let list = instances(&cfg.instance)?;
    let results = par_map(jobs, list.len(), |i| theorem_ratio(&list[i].1, cfg.grid_h));
    let mut out = Report::new();
    let mut t = Table::new(
        "kakeya-verify",
        ["seed", "tubes", "lhs", "rhs", "ratio", "tail_fraction", "grid_points", "status"].map(String::from).to_vec(),
    );
    let (mut lhs, mut rhs, mut ratios, mut seeds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((seed, inst), res) in list.iter().zip(results) {
        seeds.push(*seed);
        match res {
            Ok(r) => {
                t.rows.push(vec![
                    seed_cell(*seed),
                    inst.tube_count().to_string(),
                    num(r.lhs),
                    num(r.rhs),
                    num(r.ratio),
                    num(r.tail_fraction),
                    r.grid_points.to_string(),
                    "ok".into(),
                ]);
                lhs.push(r.lhs);
                rhs.push(r.rhs);
                ratios.push(r.ratio);
            }
            Err(e @ Error::BoxCoverage(_)) => {
                out.fail(format!("instance {}: {e}", seed_cell(*seed)));
                let mut row = vec![seed_cell(*seed), inst.tube_count().to_string()];
                row.extend(["", "", "", "", "", "box_coverage"].map(String::from));
                t.rows.push(row);
            }
            Err(e) => return Err(e),
        }
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let median = if ratios.is_empty() { 0.0 } else { util::median(&ratios) };
    if ratios.len() > 1 && max > cfg.spread_budget * median {
        out.fail(format!("max ratio {max} exceeds {} x median {median}", cfg.spread_budget));
    }
    out.set("lhs", lhs);
    out.set("rhs", rhs);
    out.set("ratio", ratios);
    out.set("fitted_constants", json!({ "max_ratio": max, "median_ratio": median }));
    out.set("seeds", seeds);
    out.tables.push(t);
    Ok(out)
}

pub fn reduction_check(cfg: &ReductionCheckConfig, _jobs: usize) -> Result<Report> {
    let (seed_opt, inst) = instances(&cfg.instance)?.remove(0);
    let seed = seed_opt.unwrap_or(cfg.seed);
    let m = derive_M(&inst)?;
    let n = inst.n as i32;
    let lambda = m.support().map(|(_, v)| v.powi(-n)).fold(cfg.lambda_floor, f64::max);
    let opts = PipelineOptions {
        warmup: zero_options(&cfg.search, seed),
        eps: cfg.eps,
        draws: cfg.draws,
        h: cfg.h,
        vis_samples: cfg.vis_samples,
        seed,
    };
    let mut out = Report::new();
    out.set("lambda", lambda);
    out.set("support_cubes", m.support().count());
    out.set("seeds", [seed_opt]);
    let rep = match pipeline_polynomial(&m, lambda, &opts) {
        Ok(r) => r,
        Err(Error::NotConverged { max_residual }) => {
            out.not_converged = true;
            out.set("max_residual", max_residual);
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let moll = MollifierConfig::new(rep.eps, cfg.draws, seed)?;
    let s = build_sj(&inst, &rep.polynomial, &moll, lambda, rep.h)?;
    let n1 = check_need1(&s, &inst, &m, cfg.need1_budget)?;
    let n2 = check_need2(&s, cfg.need2_budget);
    if !n1.pass {
        out.fail(format!(
            "need1: max C {} against budget {}, {} hard violations",
            n1.max_c,
            n1.budget,
            n1.hard_violations.len()
        ));
    }
    if !n2.pass {
        out.fail(format!("need2: max sum {} against budget {}", n2.max_sum, n2.budget));
    }
    out.set("k", rep.k);
    out.set("eps", rep.eps);
    out.set("h", rep.h);
    out.set("k_over_lambda", rep.k_over_lambda);
    out.set(
        "fitted_constants",
        json!({
            "visibility": rep.fitted_constant,
            "bisector_c": rep.warmup.fitted_c,
            "need1_max_c": n1.max_c,
            "need1_median_c": n1.median_c,
            "need2_max_sum": n2.max_sum,
            "need2_median_sum": n2.median_sum,
        }),
    );
    out.set("need1_tuples", n1.tuples);
    out.set("need1_hard_violations", &n1.hard_violations);
    out.set("polynomial", rep.polynomial.to_json());
    let dim = inst.n;
    let mut header = indexed("corner", dim);
    header.extend(["m", "vis", "vis_over_lambda_m"].map(String::from));
    let mut cubes = Table::new("reduction-check", header);
    for c in &rep.per_cube {
        let mut row: Vec<String> = c.corner.iter().map(|x| x.to_string()).collect();
        row.extend([num(c.m), num(c.vis), num(c.ratio)]);
        cubes.rows.push(row);
    }
    let mut tubes = Table::new("reduction-check-tubes", ["family", "tube", "sum_s"].map(String::from).to_vec());
    for (j, t, v) in &n2.per_tube {
        tubes.rows.push(vec![(j + 1).to_string(), t.to_string(), num(*v)]);
    }
    out.tables.push(cubes);
    out.tables.push(tubes);
    Ok(out)
}

fn net_or_failure(cfg: &NetConfig, n: usize, out: &mut Report) -> Result<Option<ColoredNet>> {
    match build_net(&cfg.params(n)) {
        Ok(net) => Ok(Some(net)),
        Err(e @ Error::NetCertificate(_)) => {
            out.fail(e.to_string());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn net_build(cfg: &NetBuildConfig, _jobs: usize) -> Result<Report> {
    let mut out = Report::new();
    let Some(net) = net_or_failure(&cfg.net, cfg.n, &mut out)? else { return Ok(out) };
    let p = &net.params;
    let mut r = util::rng(util::derive_seed(p.seed, 1));
    let uncovered = (0..cfg.coverage_probes).filter(|_| net.nearest(&sample_in_slab(p, &mut r)).1 > p.rho).count();
    if uncovered > 0 {
        out.fail(format!("{uncovered} of {} slab probes are farther than rho from the net", cfg.coverage_probes));
    }
    out.set("elements", net.elements.len());
    out.set("colours", net.n_colors);
    out.set("alpha", p.alpha);
    out.set("min_separation", net.min_separation);
    out.set("min_colour_separation", net.min_colour_separation);
    out.set("conflict_radius", p.conflict_radius());
    out.set("uncovered_probes", uncovered);
    let mut header = vec!["index".to_string(), "color".to_string()];
    header.extend(indexed("semiaxis", cfg.n));
    header.push("volume_ratio".into());
    let mut t = Table::new("net-build", header);
    for (i, (e, c)) in net.elements.iter().zip(&net.colors).enumerate() {
        let mut row = vec![i.to_string(), c.to_string()];
        row.extend(e.semiaxes.iter().map(|x| num(*x)));
        row.push(num(e.volume_ratio()));
        t.rows.push(row);
    }
    out.tables.push(t);
    out.documents.push(("net-build-net".into(), serde_json::to_value(net.to_json()).expect("net serializes")));
    Ok(out)
}

pub fn classify_cmd(cfg: &ClassifyConfig, _jobs: usize) -> Result<Report> {
    let p = Polynomial::from_json(cfg.polynomial.inline(), true)?;
    let n = p.n();
    let q = Cube::new(cfg.cube.clone());
    let mut out = Report::new();
    let Some(net) = net_or_failure(&cfg.net, n, &mut out)? else { return Ok(out) };
    let mut header = vec!["eta", "color", "element", "r", "vis"].into_iter().map(String::from).collect::<Vec<_>>();
    header.extend(indexed("m", n));
    header.extend(indexed("x", n));
    header.extend(["label", "sign"].map(String::from));
    let mut t = Table::new("classify", header);
    let mut per_eta = Vec::new();
    let mut pooled = Vec::new();
    let smallest = cfg.etas.iter().copied().fold(f64::INFINITY, f64::min);
    for &eta in &cfg.etas {
        let opts = ClassifyOptions {
            eps: cfg.eps,
            draws: cfg.draws,
            h: cfg.h,
            eta,
            c: cfg.c,
            threshold: cfg.threshold,
            vis_samples: cfg.vis_samples,
            max_m: cfg.max_m.unwrap_or(cfg.m),
            noise_floor: cfg.noise_floor,
            level: cfg.level,
            seed: cfg.seed,
        };
        let classes = match classify(&p, &q, cfg.m, &net, &opts) {
            Ok(c) => c,
            Err(e @ Error::NoColourMatch) => {
                out.fail(format!("eta {eta}: {e}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let fractions: Vec<f64> = classes.iter().map(bisection_fraction).collect();
        if eta == smallest {
            for (c, f) in classes.iter().zip(&fractions) {
                if !c.is_empty() && *f >= 1.0 {
                    out.fail(format!("eta {eta}: every translate of colour {} is bisected", c.color));
                }
            }
        }
        let pf = pooled_bisection_fraction(&classes);
        pooled.push(pf);
        per_eta.push(json!({
            "eta": eta,
            "r": classes.first().map(|c| c.r),
            "vis": classes.first().map(|c| c.vis),
            "classes": classes.len(),
            "translates": classes.iter().map(|c| c.len()).sum::<usize>(),
            "pooled_fraction": pf,
            "class_fractions": fractions,
        }));
        for c in &classes {
            for i in 0..c.len() {
                let mut row = vec![num(eta), c.color.to_string(), c.element.to_string(), c.r.to_string(), num(c.vis)];
                row.extend(c.indices[i].iter().map(|x| x.to_string()));
                row.extend(c.centers[i].iter().map(|x| num(*x)));
                row.push(tag(c.labels[i]));
                row.push(c.signs[i].map_or_else(String::new, tag));
                t.rows.push(row);
            }
        }
    }
    // non-increasing as eta shrinks
    let mut order: Vec<(f64, f64)> = cfg.etas.iter().copied().zip(pooled.iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = order.windows(2).all(|w| w[1].1 <= w[0].1);
    out.set("per_eta", per_eta);
    out.set("monotone", monotone);
    out.set("net_elements", net.elements.len());
    out.tables.push(t);
    Ok(out)
}

fn default_h(n: usize) -> f64 {
    if n == 2 {
        0.01
    } else {
        0.04
    }
}

fn trial_polynomial(n: usize, max_degree: usize, seed: u64, trial: usize) -> (usize, Polynomial, util::Rng64) {
    let s = util::derive_seed(seed, trial as u64);
    let deg = 1 + (s % max_degree as u64) as usize;
    let mut r = util::rng(s);
    let p = Polynomial::random(make_space(n, deg).expect("valid space"), &mut r);
    (deg, p, r)
}

pub fn appendix_check_cmd(cfg: &AppendixCheckConfig, jobs: usize) -> Result<Report> {
    let n = cfg.n;
    let h = cfg.h.unwrap_or_else(|| default_h(n));
    let cell = EllipsoidCell::ball(vec![0.0; n], 1.0)?;
    let results = par_map(jobs, cfg.trials, |t| {
        let (deg, p, _) = trial_polynomial(n, cfg.max_degree, cfg.seed, t);
        appendix_check(&p, &cell, h, cfg.level, util::derive_seed(cfg.seed, t as u64)).map(|r| (deg, r))
    });
    let mut out = Report::new();
    let mut t = Table::new("appendix-check", ["trial", "degree", "a", "b", "area", "bound", "margin"].map(String::from).to_vec());
    let mut min_margin = f64::INFINITY;
    let mut with_zeros = 0;
    for (i, res) in results.into_iter().enumerate() {
        let (deg, r) = res?;
        min_margin = min_margin.min(r.margin);
        if r.area > 0.0 {
            with_zeros += 1;
        }
        t.rows.push(vec![i.to_string(), deg.to_string(), num(r.a), num(r.b), num(r.area), num(r.bound), num(r.margin)]);
    }
    if min_margin < -cfg.tolerance {
        out.fail(format!("min margin {min_margin} below -{}", cfg.tolerance));
    }
    out.set("min_margin", min_margin);
    out.set("trials_with_zeros", with_zeros);
    out.set("h", h);
    out.tables.push(t);
    Ok(out)
}

pub fn cylinder_check_cmd(cfg: &CylinderCheckConfig, jobs: usize) -> Result<Report> {
    let n = cfg.n;
    let h = cfg.h.unwrap_or_else(|| default_h(n));
    let results = par_map(jobs, cfg.trials, |t| {
        let (deg, p, mut r) = trial_polynomial(n, cfg.max_degree, cfg.seed, t);
        let anchor = util::scaled(&util::random_in_ball(&mut r, n), cfg.anchor_half_width);
        let tube = Tube::new(anchor, util::random_unit(&mut r, n), 1.0, 0)?;
        cylinder_ratio(&p, &tube, cfg.half_length, h).map(|v| (deg, v))
    });
    let mut out = Report::new();
    let mut t = Table::new("cylinder-check", ["trial", "degree", "ratio"].map(String::from).to_vec());
    let mut max = 0.0f64;
    for (i, res) in results.into_iter().enumerate() {
        let (deg, v) = res?;
        max = max.max(v);
        t.rows.push(vec![i.to_string(), deg.to_string(), num(v)]);
    }
    if max > cfg.budget {
        out.fail(format!("max normalised ratio {max} exceeds {}", cfg.budget));
    }
    out.set("fitted_constants", json!({ "max_ratio": max }));
    out.set("h", h);
    out.tables.push(t);
    Ok(out)
}
