//! Experiment configuration files. Every command reads one JSON object;
//! unknown keys are rejected and omitted keys take the defaults below.

use kakeya_core::geomcore::TubeFile;
use kakeya_core::polyspace::PolyJson;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A usage error already formatted as `path:line:column: message`.
#[derive(Debug)]
pub struct ConfigError(pub String);

pub struct Invalid {
    pub field: &'static str,
    pub msg: String,
}

fn invalid(field: &'static str, msg: impl Into<String>) -> Invalid {
    Invalid { field, msg: msg.into() }
}

pub trait Validate {
    fn validate(&self) -> Result<(), Invalid>;

    /// Replaces file references by their contents so the echoed config is
    /// self-contained.
    fn resolve(&mut self, _base: &Path) -> Result<(), ConfigError> {
        Ok(())
    }
}

fn check(ok: bool, field: &'static str, msg: &str) -> Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, msg))
    }
}

/// Reads, parses and validates `path`. Parse errors point at serde's position;
/// range errors point at the first line mentioning the offending key.
pub fn load<T: DeserializeOwned + Validate>(path: &Path) -> Result<(T, String), ConfigError> {
    let shown = path.display();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{shown}:1:1: cannot read config: {e}")))?;
    let mut cfg: T = serde_json::from_str(&text).map_err(|e| {
        let full = e.to_string();
        let msg = full.rfind(" at line ").map_or(full.as_str(), |i| &full[..i]);
        ConfigError(format!("{shown}:{}:{}: {msg}", e.line().max(1), e.column().max(1)))
    })?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")))?;
    cfg.validate().map_err(|inv| {
        let key = format!("\"{}\"", inv.field);
        let (line, col) = text
            .lines()
            .enumerate()
            .find_map(|(i, l)| l.find(&key).map(|c| (i + 1, c + 1)))
            .unwrap_or((1, 1));
        ConfigError(format!("{shown}:{line}:{col}: {}: {}", inv.field, inv.msg))
    })?;
    Ok((cfg, text))
}

/// Polynomial given inline in the serialization format or as a path to a file
/// holding it. Paths are resolved relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolySource {
    Inline(PolyJson),
    Path(String),
}

impl PolySource {
    pub fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        if let PolySource::Path(p) = self {
            let full = base.join(&*p);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| ConfigError(format!("{}:1:1: cannot read polynomial: {e}", full.display())))?;
            let doc: PolyJson = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("{}:{}:{}: {e}", full.display(), e.line(), e.column())))?;
            *self = PolySource::Inline(doc);
        }
        Ok(())
    }

    pub fn inline(&self) -> &PolyJson {
        match self {
            PolySource::Inline(p) => p,
            PolySource::Path(_) => panic!("polynomial source not resolved"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub n: usize,
    pub d: usize,
    pub tubes_per_family: usize,
    #[serde(default = "d_spread")]
    pub spread: f64,
    #[serde(default = "d_anchor")]
    pub anchor_half_width: f64,
    #[serde(default = "d_true")]
    pub transverse: bool,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
}

/// Exactly one of `tubes`, `tube_file`, `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tubes: Option<TubeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
}

impl InstanceSource {
    fn validate(&self, seeds_allowed: bool) -> Result<(), Invalid> {
        let given = [self.tubes.is_some(), self.tube_file.is_some(), self.generate.is_some()];
        check(given.iter().filter(|g| **g).count() == 1, "instance", "give exactly one of tubes, tube_file, generate")?;
        if let Some(g) = &self.generate {
            check(g.d >= 2 && g.d <= g.n && g.n <= 4, "generate", "need 2 <= d <= n <= 4")?;
            check(g.tubes_per_family >= 1, "tubes_per_family", "must be at least 1")?;
            check((0.0..std::f64::consts::FRAC_PI_4).contains(&g.spread), "spread", "must lie in [0, pi/4)")?;
            check(g.anchor_half_width > 0.0, "anchor_half_width", "must be positive")?;
            check(!g.seeds.is_empty(), "seeds", "must not be empty")?;
            check(seeds_allowed || g.seeds.len() == 1, "seeds", "this command takes a single seed")?;
        }
        Ok(())
    }

    pub fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        if let Some(p) = self.tube_file.take() {
            let full = base.join(&p);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| ConfigError(format!("{}:1:1: cannot read tube file: {e}", full.display())))?;
            let doc: TubeFile = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("{}:{}:{}: {e}", full.display(), e.line(), e.column())))?;
            self.tubes = Some(doc);
        }
        Ok(())
    }
}

fn d_spread() -> f64 {
    0.3
}
fn d_anchor() -> f64 {
    2.0
}
fn d_true() -> bool {
    true
}
fn d_seeds() -> Vec<u64> {
    vec![0]
}
fn d_one() -> f64 {
    1.0
}
fn d_tol() -> f64 {
    0.05
}
fn d_restarts() -> usize {
    32
}
fn d_iterations() -> usize {
    40
}
fn d_odd_level() -> u32 {
    8
}
fn d_area_h() -> f64 {
    0.125
}
fn d_draws() -> usize {
    32
}
fn d_vis_h() -> f64 {
    0.02
}
fn d_samples() -> usize {
    20_000
}
fn d_triples() -> usize {
    1000
}
fn d_grid_h() -> f64 {
    0.05
}
fn d_spread_budget() -> f64 {
    2.0
}
fn d_lambda_floor() -> f64 {
    10.0
}
fn d_eps() -> f64 {
    1e-3
}
fn d_big() -> f64 {
    1e6
}
fn d_rho() -> f64 {
    0.25
}
fn d_gamma() -> f64 {
    5.0
}
fn d_v_min() -> f64 {
    1.0 / 16.0
}
fn d_ratio_cap() -> f64 {
    16.0
}
fn d_pool() -> usize {
    4000
}
fn d_quiet() -> usize {
    30_000
}
fn d_probes() -> usize {
    1000
}
fn d_etas() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}
fn d_class_draws() -> usize {
    8
}
fn d_class_h() -> f64 {
    1.0 / 32.0
}
fn d_c() -> f64 {
    0.5
}
fn d_threshold() -> f64 {
    0.4
}
fn d_noise() -> f64 {
    1e-3
}
fn d_class_level() -> u32 {
    9
}
fn d_appendix_trials() -> usize {
    200
}
fn d_four() -> usize {
    4
}
fn d_appendix_level() -> u32 {
    12
}
fn d_margin_tol() -> f64 {
    1e-2
}
fn d_cyl_trials() -> usize {
    100
}
fn d_six() -> usize {
    6
}
fn d_half() -> f64 {
    0.5
}
fn d_cyl_budget() -> f64 {
    1.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub corner: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "d_one")]
    pub c_deg: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_restarts")]
    pub restarts: usize,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_odd_level")]
    pub level: u32,
    #[serde(default = "d_area_h")]
    pub area_h: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), Invalid> {
        check(self.c_deg > 0.0 && self.c_deg.is_finite(), "c_deg", "must be positive")?;
        check(self.tol > 0.0 && self.tol < 1.0, "tol", "must lie in (0, 1)")?;
        check(self.restarts >= 1, "restarts", "must be at least 1")?;
        check(self.iterations >= 1, "iterations", "must be at least 1")?;
        check((4..=16).contains(&self.level), "level", "must lie in 4..=16")?;
        check(self.area_h > 0.0 && self.area_h <= 1.0, "area_h", "must lie in (0, 1]")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    pub weights: Vec<WeightEntry>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub search: SearchConfig,
    /// Fitted `c` at or below this is a measured failure.
    #[serde(default)]
    pub min_fitted_c: f64,
}

fn validate_weights(w: &[WeightEntry]) -> Result<(), Invalid> {
    check(!w.is_empty(), "weights", "must not be empty")?;
    let n = w[0].corner.len();
    check((1..=4).contains(&n), "corner", "dimension must lie in 1..=4")?;
    check(w.iter().all(|e| e.corner.len() == n), "corner", "all corners need the same dimension")?;
    check(w.iter().all(|e| e.value >= 1.0 && e.value <= 16.0), "value", "weights must lie in [1, 16]")
}

impl Validate for BisectConfig {
    fn validate(&self) -> Result<(), Invalid> {
        validate_weights(&self.weights)?;
        self.search.validate()?;
        check(self.min_fitted_c >= 0.0, "min_fitted_c", "must be non-negative")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityConfig {
    pub polynomial: PolySource,
    pub cube: Vec<i64>,
    /// Absolute mollifier radius on the coefficient sphere; omitted means no mollification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "d_draws")]
    pub draws: usize,
    #[serde(default = "d_vis_h")]
    pub h: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default = "d_triples")]
    pub convexity_triples: usize,
}

fn validate_cube(cube: &[i64], n: usize) -> Result<(), Invalid> {
    check(cube.len() == n, "cube", "corner dimension must match the polynomial")
}

impl Validate for VisibilityConfig {
    fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        self.polynomial.resolve(base)
    }

    fn validate(&self) -> Result<(), Invalid> {
        if let PolySource::Inline(p) = &self.polynomial {
            check((2..=3).contains(&p.n), "polynomial", "n must be 2 or 3")?;
            validate_cube(&self.cube, p.n)?;
        }
        if let Some(e) = self.eps {
            check(e > 0.0 && e < 1.0, "eps", "must lie in (0, 1)")?;
        }
        check(self.draws >= 1, "draws", "must be at least 1")?;
        check(self.h > 0.0 && self.h <= 0.5, "h", "must lie in (0, 0.5]")?;
        check(self.samples >= 1000, "samples", "must be at least 1000")?;
        if let Some(d) = self.directions {
            check(d >= 16, "directions", "must be at least 16")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KakeyaVerifyConfig {
    pub instance: InstanceSource,
    #[serde(default = "d_grid_h")]
    pub grid_h: f64,
    /// Largest admissible `max ratio / median ratio` over the instances.
    #[serde(default = "d_spread_budget")]
    pub spread_budget: f64,
}

impl Validate for KakeyaVerifyConfig {
    fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        self.instance.resolve(base)
    }

    fn validate(&self) -> Result<(), Invalid> {
        self.instance.validate(true)?;
        check(self.grid_h > 0.0 && self.grid_h <= 0.5, "grid_h", "must lie in (0, 0.5]")?;
        check(self.spread_budget >= 1.0, "spread_budget", "must be at least 1")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionCheckConfig {
    pub instance: InstanceSource,
    #[serde(default = "d_lambda_floor")]
    pub lambda_floor: f64,
    /// Mollifier radius relative to the RMS of `p` on the support.
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_draws")]
    pub draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "d_samples")]
    pub vis_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default = "d_big")]
    pub need1_budget: f64,
    #[serde(default = "d_big")]
    pub need2_budget: f64,
}

impl Validate for ReductionCheckConfig {
    fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        self.instance.resolve(base)
    }

    fn validate(&self) -> Result<(), Invalid> {
        self.instance.validate(false)?;
        if let Some(g) = &self.instance.generate {
            check(g.n <= 3, "generate", "the reduction pipeline supports n <= 3")?;
        }
        check(self.lambda_floor >= 1.0, "lambda_floor", "must be at least 1")?;
        check(self.eps > 0.0 && self.eps < 1.0, "eps", "must lie in (0, 1)")?;
        check(self.draws >= 1, "draws", "must be at least 1")?;
        if let Some(h) = self.h {
            check(h > 0.0 && h <= 0.5, "h", "must lie in (0, 0.5]")?;
        }
        check(self.vis_samples >= 1000, "vis_samples", "must be at least 1000")?;
        self.search.validate()?;
        check(self.need1_budget > 0.0, "need1_budget", "must be positive")?;
        check(self.need2_budget > 0.0, "need2_budget", "must be positive")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Closeness factor; omitted means `sqrt(n) * 1.1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "d_v_min")]
    pub v_min: f64,
    #[serde(default = "d_one")]
    pub v_max: f64,
    #[serde(default = "d_ratio_cap")]
    pub ratio_cap: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_pool")]
    pub pool: usize,
    #[serde(default = "d_quiet")]
    pub quiet_samples: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl NetConfig {
    fn validate(&self) -> Result<(), Invalid> {
        check(self.rho > 0.0 && self.rho <= 2.0, "rho", "must lie in (0, 2]")?;
        check(self.gamma > 1.0 && self.gamma <= 20.0, "gamma", "must lie in (1, 20]")?;
        if let Some(a) = self.alpha {
            check(a >= 1.0, "alpha", "must be at least 1")?;
        }
        check(self.v_min > 0.0 && self.v_min <= self.v_max && self.v_max <= 1.0, "v_min", "need 0 < v_min <= v_max <= 1")?;
        check(self.ratio_cap >= 1.0 && self.ratio_cap <= 1024.0, "ratio_cap", "must lie in [1, 1024]")?;
        check(self.pool >= 1, "pool", "must be at least 1")?;
        check(self.quiet_samples >= 1, "quiet_samples", "must be at least 1")
    }

    pub fn params(&self, n: usize) -> kakeya_core::convexvis::NetParams {
        let mut p = kakeya_core::convexvis::NetParams::new(n, self.rho, self.gamma, self.v_min, self.v_max, self.ratio_cap, self.seed);
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        p.pool = self.pool;
        p.quiet_samples = self.quiet_samples;
        p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetBuildConfig {
    pub n: usize,
    #[serde(default)]
    pub net: NetConfig,
    /// Fresh slab samples checked for ρ-coverage after the build.
    #[serde(default = "d_probes")]
    pub coverage_probes: usize,
}

impl Validate for NetBuildConfig {
    fn validate(&self) -> Result<(), Invalid> {
        check((1..=3).contains(&self.n), "n", "must lie in 1..=3")?;
        self.net.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub polynomial: PolySource,
    pub cube: Vec<i64>,
    /// `M(Q)`.
    pub m: f64,
    #[serde(default = "d_etas")]
    pub etas: Vec<f64>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_class_draws")]
    pub draws: usize,
    #[serde(default = "d_class_h")]
    pub h: f64,
    #[serde(default = "d_c")]
    pub c: f64,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_samples")]
    pub vis_samples: usize,
    /// Largest `M` of the weight function; omitted means `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_m: Option<f64>,
    #[serde(default = "d_noise")]
    pub noise_floor: f64,
    #[serde(default = "d_class_level")]
    pub level: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Validate for ClassifyConfig {
    fn resolve(&mut self, base: &Path) -> Result<(), ConfigError> {
        self.polynomial.resolve(base)
    }

    fn validate(&self) -> Result<(), Invalid> {
        if let PolySource::Inline(p) = &self.polynomial {
            check(p.n == 2, "polynomial", "classification is supported for n = 2")?;
            validate_cube(&self.cube, p.n)?;
        }
        check(self.m > 0.0 && self.m.is_finite(), "m", "must be positive")?;
        check(!self.etas.is_empty() && self.etas.iter().all(|e| *e > 0.0 && *e <= 1.0), "etas", "need values in (0, 1]")?;
        self.net.validate()?;
        check(self.eps > 0.0 && self.eps < 1.0, "eps", "must lie in (0, 1)")?;
        check(self.draws >= 1, "draws", "must be at least 1")?;
        check(self.h > 0.0 && self.h <= 0.5, "h", "must lie in (0, 0.5]")?;
        check(self.c > 0.0, "c", "must be positive")?;
        check(self.threshold > 0.0 && self.threshold <= 0.5, "threshold", "must lie in (0, 0.5]")?;
        check(self.vis_samples >= 1000, "vis_samples", "must be at least 1000")?;
        if let Some(m) = self.max_m {
            check(m >= self.m, "max_m", "must be at least m")?;
        }
        check(self.noise_floor >= 0.0, "noise_floor", "must be non-negative")?;
        check((4..=16).contains(&self.level), "level", "must lie in 4..=16")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixCheckConfig {
    pub n: usize,
    #[serde(default = "d_appendix_trials")]
    pub trials: usize,
    #[serde(default = "d_four")]
    pub max_degree: usize,
    /// Extraction step; omitted means 0.01 for n = 2 and 0.04 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "d_appendix_level")]
    pub level: u32,
    #[serde(default)]
    pub seed: u64,
    /// Margins below `-tolerance` are failures.
    #[serde(default = "d_margin_tol")]
    pub tolerance: f64,
}

impl Validate for AppendixCheckConfig {
    fn validate(&self) -> Result<(), Invalid> {
        check((2..=3).contains(&self.n), "n", "must be 2 or 3")?;
        check(self.trials >= 1, "trials", "must be at least 1")?;
        check((1..=8).contains(&self.max_degree), "max_degree", "must lie in 1..=8")?;
        if let Some(h) = self.h {
            check(h > 0.0 && h <= 0.25, "h", "must lie in (0, 0.25]")?;
        }
        check((6..=16).contains(&self.level), "level", "must lie in 6..=16")?;
        check(self.tolerance >= 0.0, "tolerance", "must be non-negative")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderCheckConfig {
    pub n: usize,
    #[serde(default = "d_cyl_trials")]
    pub trials: usize,
    #[serde(default = "d_six")]
    pub max_degree: usize,
    #[serde(default = "d_one")]
    pub half_length: f64,
    /// Tube anchors are uniform in the ball of radius `w`.
    #[serde(default = "d_half")]
    pub anchor_half_width: f64,
    /// Extraction step; omitted means 0.01 for n = 2 and 0.04 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Normalised ratios above this are failures.
    #[serde(default = "d_cyl_budget")]
    pub budget: f64,
}

impl Validate for CylinderCheckConfig {
    fn validate(&self) -> Result<(), Invalid> {
        check((2..=3).contains(&self.n), "n", "must be 2 or 3")?;
        check(self.trials >= 1, "trials", "must be at least 1")?;
        check((1..=10).contains(&self.max_degree), "max_degree", "must lie in 1..=10")?;
        check(self.half_length > 0.0 && self.half_length <= 10.0, "half_length", "must lie in (0, 10]")?;
        check(self.anchor_half_width >= 0.0, "anchor_half_width", "must be non-negative")?;
        if let Some(h) = self.h {
            check(h > 0.0 && h <= 0.25, "h", "must lie in (0, 0.25]")?;
        }
        check(self.budget > 0.0, "budget", "must be positive")
    }
}
