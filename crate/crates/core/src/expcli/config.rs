//! Experiment configuration: flat dotted-key JSON resolved on top of the
//! built-in scenario defaults.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::channel::{db_to_linear, dbm_to_watt, noise_power, watt_to_dbm};
use crate::fracprog::SequentialOptions;
use crate::model::{CsiMode, RisMode, SystemConfig};
use crate::orchestrator::OptimizerOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// K = 2, N = 16
    Desk,
    /// K = 4, N = 100
    Paper,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Config(format!("unknown scale '{other}', expected desk or paper"))),
        }
    }

    fn base(self) -> SystemConfig {
        match self {
            Scale::Desk => SystemConfig::desk(),
            Scale::Paper => SystemConfig::paper_scale(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SeeMax,
    SsrMax,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SeeMax, Method::SsrMax, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SeeMax => "see_max",
            Method::SsrMax => "ssr_max",
            Method::Random => "random",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// One curve of the comparison: an optimization method run under one CSI
/// assumption. Written `method/csi` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSpec {
    pub method: Method,
    pub csi: CsiMode,
}

impl MethodSpec {
    pub fn all() -> Vec<MethodSpec> {
        Method::ALL
            .into_iter()
            .flat_map(|method| {
                [CsiMode::Statistical, CsiMode::Perfect]
                    .into_iter()
                    .map(move |csi| MethodSpec { method, csi })
            })
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.method.as_str(), self.csi.as_str())
    }

    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid method '{s}', expected <see_max|ssr_max|random>/<statistical|perfect>"));
        let (m, c) = s.split_once('/').ok_or_else(bad)?;
        let method = Method::parse(m).ok_or_else(bad)?;
        let csi = match c {
            "statistical" => CsiMode::Statistical,
            "perfect" => CsiMode::Perfect,
            _ => return Err(bad()),
        };
        Ok(MethodSpec { method, csi })
    }
}

/// Overrides that come from the command line or the environment rather
/// than the config file. They win over file values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub scale: Option<Scale>,
    pub seed: Option<u64>,
}

/// Everything a sweep needs. `base.p_max` holds the first sweep point;
/// each sweep cell replaces it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub base: SystemConfig,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub p_max_sweep_dbm: Vec<f64>,
    /// Signed so that a negative value survives parsing and is reported.
    pub num_drops: i64,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    pub optimizer: OptimizerOptions,
}

const TOP_KEYS: &[&str] = &["scale", "seed", "num_drops", "p_max_sweep_dbm", "methods"];

const DIMENSION_KEYS: &[&str] = &["base.K", "base.N_B", "base.N"];

// Applied in this order, so explicit noise powers win over the noise
// density and explicit RIS budgets win over the mode switch.
const BASE_KEYS: &[&str] = &[
    "base.ris_mode",
    "base.bandwidth_hz",
    "base.noise_psd_dbm_hz",
    "base.noise_figure_db",
    "base.sigma_bob_sq_w",
    "base.sigma_eve_sq_w",
    "base.sigma_ris_sq_w",
    "base.mu",
    "base.P_c_n_dbm",
    "base.P0_RIS_dbm",
    "base.P0_dbm",
    "base.P_R_max_dbm",
    "base.P_R_max_w",
    "base.n_h",
    "base.n_g",
    "base.K_t",
    "base.K_r",
    "base.ref_gain_db",
    "base.csi_error_ratio",
    "base.cell_radius_m",
    "base.min_user_distance_m",
    "base.bob_distance_m",
    "base.eve_radius_m",
    "base.ris_height_m",
    "base.bob_height_m",
    "base.eve_height_m",
    "base.max_user_height_m",
];

const OPTIMIZER_KEYS: &[&str] = &[
    "optimizer.outer_tol",
    "optimizer.max_outer",
    "optimizer.ris_eps",
    "optimizer.ris_max_iters",
    "optimizer.ris_extrapolation",
    "optimizer.power_eps",
    "optimizer.power_max_iters",
    "optimizer.dinkelbach_tol",
    "optimizer.dinkelbach_max_iters",
    "optimizer.inner_tol",
    "optimizer.inner_max_iters",
];

fn known(key: &str) -> bool {
    TOP_KEYS.contains(&key) || DIMENSION_KEYS.contains(&key) || BASE_KEYS.contains(&key) || OPTIMIZER_KEYS.contains(&key)
}

fn number(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("'{key}' must be a number")))
}

// Accepts negative values so that they can be reported as violations.
fn integer(key: &str, v: &Value) -> Result<i64> {
    v.as_i64()
        .ok_or_else(|| Error::Config(format!("'{key}' must be an integer")))
}

fn count(key: &str, v: &Value) -> Result<usize> {
    let n = integer(key, v)?;
    usize::try_from(n).map_err(|_| Error::Config(format!("'{key}' must be nonnegative")))
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("'{key}' must be a string")))
}

fn array<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Config(format!("'{key}' must be an array")))
}

impl ExperimentConfig {
    /// Defaults for `scale` with no overrides.
    pub fn defaults(scale: Scale) -> Self {
        let base = scale.base();
        let optimizer = OptimizerOptions::default();
        let mut cfg = Self {
            scale,
            base,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            p_max_sweep_dbm: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            num_drops: 20,
            seed: 1,
            methods: MethodSpec::all(),
            optimizer,
        };
        cfg.base.p_max = vec![dbm_to_watt(cfg.p_max_sweep_dbm[0]); cfg.base.users];
        cfg
    }

    /// Reads and resolves a config file. An empty file means all defaults.
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, overrides)
    }

    pub fn from_json_str(text: &str, overrides: Overrides) -> Result<Self> {
        let map = if text.trim().is_empty() {
            Map::new()
        } else {
            match serde_json::from_str::<Value>(text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(Error::Config("config must be a JSON object".to_string())),
                Err(e) => return Err(Error::Config(format!("config is not valid JSON: {e}"))),
            }
        };
        Self::from_map(&map, overrides)
    }

    fn from_map(map: &Map<String, Value>, overrides: Overrides) -> Result<Self> {
        let unknown: Vec<&str> = map.keys().map(String::as_str).filter(|k| !known(k)).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }

        let scale = match (overrides.scale, map.get("scale")) {
            (Some(s), _) => s,
            (None, Some(v)) => Scale::parse(string("scale", v)?)?,
            (None, None) => Scale::Desk,
        };
        let mut cfg = Self::defaults(scale);

        let mut dims = (cfg.base.users, cfg.base.bob_antennas, cfg.base.ris_elements);
        if let Some(v) = map.get("base.K") {
            dims.0 = count("base.K", v)?;
        }
        if let Some(v) = map.get("base.N_B") {
            dims.1 = count("base.N_B", v)?;
        }
        if let Some(v) = map.get("base.N") {
            dims.2 = count("base.N", v)?;
        }
        cfg.base = SystemConfig::with_dimensions(dims.0, dims.1, dims.2);

        for key in BASE_KEYS {
            if let Some(v) = map.get(*key) {
                cfg.apply_base(key, v)?;
            }
        }
        for key in OPTIMIZER_KEYS {
            if let Some(v) = map.get(*key) {
                cfg.apply_optimizer(key, v)?;
            }
        }

        if let Some(v) = map.get("seed") {
            cfg.seed = v
                .as_u64()
                .ok_or_else(|| Error::Config("'seed' must be a nonnegative integer".to_string()))?;
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(v) = map.get("num_drops") {
            cfg.num_drops = integer("num_drops", v)?;
        }
        if let Some(v) = map.get("p_max_sweep_dbm") {
            cfg.p_max_sweep_dbm = array("p_max_sweep_dbm", v)?
                .iter()
                .map(|x| number("p_max_sweep_dbm", x))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = map.get("methods") {
            cfg.methods = array("methods", v)?
                .iter()
                .map(|x| MethodSpec::parse(string("methods", x)?))
                .collect::<Result<_>>()?;
        }

        let first = cfg.p_max_sweep_dbm.first().copied().unwrap_or(0.0);
        cfg.base.p_max = vec![dbm_to_watt(first); cfg.base.users];
        Ok(cfg)
    }

    fn apply_base(&mut self, key: &str, v: &Value) -> Result<()> {
        let b = &mut self.base;
        match key {
            "base.ris_mode" => match string(key, v)? {
                "active" => {
                    b.ris_mode = RisMode::Active;
                }
                "nearly_passive" => {
                    *b = b.clone().nearly_passive();
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown RIS mode '{other}', expected active or nearly_passive"
                    )))
                }
            },
            "base.bandwidth_hz" => {
                b.bandwidth = number(key, v)?;
                self.refresh_noise();
            }
            "base.noise_psd_dbm_hz" => {
                self.noise_psd_dbm_hz = number(key, v)?;
                self.refresh_noise();
            }
            "base.noise_figure_db" => {
                self.noise_figure_db = number(key, v)?;
                self.refresh_noise();
            }
            "base.sigma_bob_sq_w" => b.sigma_bob_sq = number(key, v)?,
            "base.sigma_eve_sq_w" => b.sigma_eve_sq = number(key, v)?,
            "base.sigma_ris_sq_w" => b.sigma_ris_sq = number(key, v)?,
            "base.mu" => b.mu = vec![number(key, v)?; b.users],
            "base.P_c_n_dbm" => b.element_power = dbm_to_watt(number(key, v)?),
            "base.P0_RIS_dbm" => b.ris_static_power = dbm_to_watt(number(key, v)?),
            "base.P0_dbm" => b.static_power = dbm_to_watt(number(key, v)?),
            "base.P_R_max_dbm" => b.ris_rf_max = dbm_to_watt(number(key, v)?),
            "base.P_R_max_w" => b.ris_rf_max = number(key, v)?,
            "base.n_h" => b.propagation.user_exponent = number(key, v)?,
            "base.n_g" => b.propagation.ris_exponent = number(key, v)?,
            "base.K_t" => b.propagation.bob_k_factor = number(key, v)?,
            "base.K_r" => b.propagation.k_factor = number(key, v)?,
            "base.ref_gain_db" => b.propagation.ref_gain = db_to_linear(number(key, v)?),
            "base.csi_error_ratio" => b.propagation.csi_error_ratio = number(key, v)?,
            "base.cell_radius_m" => b.propagation.cell_radius = number(key, v)?,
            "base.min_user_distance_m" => b.propagation.min_user_distance = number(key, v)?,
            "base.bob_distance_m" => b.propagation.bob_distance = number(key, v)?,
            "base.eve_radius_m" => b.propagation.eve_radius = number(key, v)?,
            "base.ris_height_m" => b.propagation.ris_height = number(key, v)?,
            "base.bob_height_m" => b.propagation.bob_height = number(key, v)?,
            "base.eve_height_m" => b.propagation.eve_height = number(key, v)?,
            "base.max_user_height_m" => b.propagation.max_user_height = number(key, v)?,
            _ => unreachable!("unhandled key {key}"),
        }
        Ok(())
    }

    fn refresh_noise(&mut self) {
        let noise = noise_power(self.noise_psd_dbm_hz, self.noise_figure_db, self.base.bandwidth);
        self.base.sigma_bob_sq = noise;
        self.base.sigma_eve_sq = noise;
        if self.base.ris_mode == RisMode::Active {
            self.base.sigma_ris_sq = noise;
        }
    }

    fn apply_optimizer(&mut self, key: &str, v: &Value) -> Result<()> {
        let o = &mut self.optimizer;
        match key {
            "optimizer.outer_tol" => o.outer_tol = number(key, v)?,
            "optimizer.max_outer" => o.max_outer = count(key, v)?,
            "optimizer.ris_eps" => o.ris.eps = number(key, v)?,
            "optimizer.ris_max_iters" => o.ris.max_iters = count(key, v)?,
            "optimizer.ris_extrapolation" => {
                o.ris.extrapolate = v
                    .as_bool()
                    .ok_or_else(|| Error::Config(format!("'{key}' must be a boolean")))?
            }
            "optimizer.power_eps" => o.power.eps = number(key, v)?,
            "optimizer.power_max_iters" => o.power.max_iters = count(key, v)?,
            "optimizer.dinkelbach_tol" => o.solver.dinkelbach_tol = number(key, v)?,
            "optimizer.dinkelbach_max_iters" => o.solver.max_outer = count(key, v)?,
            "optimizer.inner_tol" => o.solver.inner_tol = number(key, v)?,
            "optimizer.inner_max_iters" => o.solver.max_inner = count(key, v)?,
            _ => unreachable!("unhandled key {key}"),
        }
        Ok(())
    }

    /// System configuration of one sweep point.
    pub fn system_at(&self, p_max_dbm: f64, csi: CsiMode) -> SystemConfig {
        let mut cfg = self.base.clone().with_p_max(dbm_to_watt(p_max_dbm));
        cfg.csi_mode = csi;
        cfg
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.p_max_sweep_dbm.is_empty() {
            out.push("p_max_sweep_dbm must not be empty".to_string());
        }
        if self.p_max_sweep_dbm.iter().any(|x| !x.is_finite()) {
            out.push("p_max_sweep_dbm entries must be finite".to_string());
        }
        if self.num_drops < 1 {
            out.push(format!("num_drops must be at least 1, got {}", self.num_drops));
        }
        if self.methods.is_empty() {
            out.push("methods must not be empty".to_string());
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            out.push("methods contains duplicates".to_string());
        }
        out.extend(self.base.violations());
        out.extend(self.optimizer.solver.violations());
        let seq = |name: &str, s: &SequentialOptions, out: &mut Vec<String>| {
            if !(s.eps > 0.0) {
                out.push(format!("{name} stopping threshold must be positive"));
            }
            if s.max_iters == 0 {
                out.push(format!("{name} iteration cap must be at least 1"));
            }
        };
        seq("RIS loop", &self.optimizer.ris, &mut out);
        seq("power loop", &self.optimizer.power, &mut out);
        if !(self.optimizer.outer_tol > 0.0) {
            out.push("optimizer.outer_tol must be positive".to_string());
        }
        if self.optimizer.max_outer == 0 {
            out.push("optimizer.max_outer must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    /// Every resolved parameter as `(key, value)`, using the config-file
    /// key names.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let b = &self.base;
        let p = &b.propagation;
        let o = &self.optimizer;
        let methods: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        let sweep: Vec<String> = self.p_max_sweep_dbm.iter().map(|x| x.to_string()).collect();
        let rows: Vec<(&str, String)> = vec![
            ("scale", self.scale.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("num_drops", self.num_drops.to_string()),
            ("p_max_sweep_dbm", format!("[{}]", sweep.join(", "))),
            ("methods", format!("[{}]", methods.join(", "))),
            ("base.K", b.users.to_string()),
            ("base.N_B", b.bob_antennas.to_string()),
            ("base.N", b.ris_elements.to_string()),
            ("base.ris_mode", b.ris_mode.as_str().to_string()),
            ("base.bandwidth_hz", b.bandwidth.to_string()),
            ("base.noise_psd_dbm_hz", self.noise_psd_dbm_hz.to_string()),
            ("base.noise_figure_db", self.noise_figure_db.to_string()),
            ("base.sigma_bob_sq_w", format!("{:e}", b.sigma_bob_sq)),
            ("base.sigma_eve_sq_w", format!("{:e}", b.sigma_eve_sq)),
            ("base.sigma_ris_sq_w", format!("{:e}", b.sigma_ris_sq)),
            ("base.mu", format!("{:?}", b.mu)),
            ("base.P_c_n_dbm", watt_to_dbm(b.element_power).to_string()),
            ("base.P0_RIS_dbm", watt_to_dbm(b.ris_static_power).to_string()),
            ("base.P0_dbm", watt_to_dbm(b.static_power).to_string()),
            ("base.P_R_max_w", format!("{:e}", b.ris_rf_max)),
            ("base.n_h", p.user_exponent.to_string()),
            ("base.n_g", p.ris_exponent.to_string()),
            ("base.K_t", p.bob_k_factor.to_string()),
            ("base.K_r", p.k_factor.to_string()),
            ("base.ref_gain_db", (10.0 * p.ref_gain.log10()).to_string()),
            ("base.csi_error_ratio", p.csi_error_ratio.to_string()),
            ("base.cell_radius_m", p.cell_radius.to_string()),
            ("base.min_user_distance_m", p.min_user_distance.to_string()),
            ("base.bob_distance_m", p.bob_distance.to_string()),
            ("base.eve_radius_m", p.eve_radius.to_string()),
            ("base.ris_height_m", p.ris_height.to_string()),
            ("base.bob_height_m", p.bob_height.to_string()),
            ("base.eve_height_m", p.eve_height.to_string()),
            ("base.max_user_height_m", p.max_user_height.to_string()),
            ("optimizer.outer_tol", format!("{:e}", o.outer_tol)),
            ("optimizer.max_outer", o.max_outer.to_string()),
            ("optimizer.ris_eps", format!("{:e}", o.ris.eps)),
            ("optimizer.ris_max_iters", o.ris.max_iters.to_string()),
            ("optimizer.ris_extrapolation", o.ris.extrapolate.to_string()),
            ("optimizer.power_eps", format!("{:e}", o.power.eps)),
            ("optimizer.power_max_iters", o.power.max_iters.to_string()),
            ("optimizer.dinkelbach_tol", format!("{:e}", o.solver.dinkelbach_tol)),
            ("optimizer.dinkelbach_max_iters", o.solver.max_outer.to_string()),
            ("optimizer.inner_tol", format!("{:e}", o.solver.inner_tol)),
            ("optimizer.inner_max_iters", o.solver.max_inner.to_string()),
        ];
        rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Human-readable validation report: every resolved parameter, then
    /// either `valid` or the list of violations.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.resolved() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let violations = self.violations();
        if violations.is_empty() {
            out.push_str("valid\n");
        } else {
            let _ = writeln!(out, "{} violation(s):", violations.len());
            for v in violations {
                let _ = writeln!(out, "  - {v}");
            }
        }
        out
    }
}
