//! Scenario configuration.
//!
//! A configuration is a TOML document whose keys mirror the fields of
//! [`ScenarioConfig`]. Every key is optional; an empty document yields the
//! reference deployment (four SBSs over a 200 m square, 60 users, 1 s long
//! slots split into ten 0.1 s short slots, 10 MHz and 200 gigacycles/s per
//! SBS, and three task types with 20/40/60 ms delay limits).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative tolerance for the `lts_length = sts_per_lts * sts_length` check.
const SLOT_RATIO_TOL: f64 = 1e-9;

/// Prefix for environment-variable overrides, e.g. `MECSIM_NUM_USERS=10`.
pub const ENV_PREFIX: &str = "MECSIM_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    /// The full multi-time-scale algorithm.
    #[serde(rename = "none", alias = "proposed")]
    None,
    /// Fixed allocation: only admission is optimized.
    #[serde(rename = "FA", alias = "fa")]
    FixedAllocation,
    /// Fixed channel: association and bandwidth fixed, compute optimized.
    #[serde(rename = "FC", alias = "fc")]
    FixedChannel,
    /// Traditional computing: compute demand linear in data size.
    #[serde(rename = "TC", alias = "tc")]
    TraditionalComputing,
}

impl Baseline {
    pub fn label(self) -> &'static str {
        match self {
            Baseline::None => "proposed",
            Baseline::FixedAllocation => "FA",
            Baseline::FixedChannel => "FC",
            Baseline::TraditionalComputing => "TC",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" | "proposed" => Ok(Baseline::None),
            "FA" | "fa" => Ok(Baseline::FixedAllocation),
            "FC" | "fc" => Ok(Baseline::FixedChannel),
            "TC" | "tc" => Ok(Baseline::TraditionalComputing),
            other => Err(Error::invalid("baseline", format!("unknown baseline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// `I_uk = p_u * sum_{i != k} g_ui`: user u's own gains towards the other SBSs.
    Paper,
    /// `I_uk = sum_{v != u, assoc(v) != k} g_vk * p_v`: co-channel users of other cells.
    CrossUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalDist {
    /// Poisson number of `arrival_unit_bits` payloads per slot.
    Poisson,
    /// Exponentially distributed volume with the same mean.
    Exponential,
}

/// Distribution of the raw data size `a_u` (bytes) drawn per user and STS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSizeDist {
    Uniform { min_bytes: f64, max_bytes: f64 },
    Fixed { bytes: f64 },
}

impl DataSizeDist {
    pub fn mean(&self) -> f64 {
        match *self {
            DataSizeDist::Uniform { min_bytes, max_bytes } => 0.5 * (min_bytes + max_bytes),
            DataSizeDist::Fixed { bytes } => bytes,
        }
    }
}

/// One entry of the task catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskType {
    /// Delay limit in milliseconds.
    pub delay_ms: f64,
    /// CNN model parameter (filter-count proxy).
    pub n_m: f64,
}

impl TaskType {
    pub fn new(delay_ms: f64, n_m: f64) -> Self {
        Self { delay_ms, n_m }
    }

    /// Delay limit in seconds.
    pub fn delay_limit(&self) -> f64 {
        self.delay_ms * 1e-3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of small base stations `K`.
    pub num_sbs: usize,
    /// Number of users `U`.
    pub num_users: usize,
    /// Side of the square deployment area (m).
    pub area_side: f64,
    /// Long slot length `T` (s).
    pub lts_length: f64,
    /// Short slot length `tau` (s).
    pub sts_length: f64,
    /// Short slots per long slot `p`; derived from `T / tau` when absent.
    pub sts_per_lts: Option<usize>,
    /// Uplink bandwidth per SBS `W_k` (Hz).
    pub bandwidth_per_sbs: f64,
    /// Computing capacity per MEC server `F_k` (gigacycles/s).
    pub compute_per_sbs: f64,
    /// Bus bandwidth inside an SBS (bits/s).
    pub bus_bandwidth: f64,
    pub transmit_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Carrier frequency (GHz).
    pub carrier_freq: f64,
    /// Mean task arrival per user and STS, in `arrival_unit_bits` units.
    pub arrival_mean: f64,
    pub arrival_unit_bits: f64,
    pub arrival_dist: ArrivalDist,
    /// Revenue/cost weight.
    pub eta: f64,
    /// Drift-plus-penalty weight `V`.
    pub lyapunov_v: f64,
    /// Effective switched capacitance (W s^3 / cycle^3).
    pub kappa_esc: f64,
    /// Relative stopping tolerance of the allocation loop.
    pub alg1_eps: f64,
    pub alg1_max_iters: usize,
    pub alg2_max_iters: usize,
    /// Relative utility change below which the admission loop stops.
    pub alg2_rel_tol: f64,
    /// Number of long slots simulated `Z`.
    pub num_lts: usize,
    pub task_types: Vec<TaskType>,
    pub baseline: Baseline,
    pub seed: u64,
    pub data_size_dist: DataSizeDist,
    pub interference_model: InterferenceModel,
    /// Number of input feature maps `N` of the complexity model.
    pub feature_maps: f64,
    /// Gigacycles per unit of the CNN complexity formula.
    pub complexity_scale: f64,
    /// Minimum per-task workload (gigacycles) when the formula goes nonpositive.
    pub complexity_floor: f64,
    pub user_speed_kmh: f64,
    /// Data size (bytes) at which the linear TC model matches the CNN model.
    pub tc_reference_bytes: f64,
    /// Task type (0-based) whose parameters calibrate the TC model.
    pub tc_reference_type: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_sbs: 4,
            num_users: 60,
            area_side: 200.0,
            lts_length: 1.0,
            sts_length: 0.1,
            sts_per_lts: None,
            bandwidth_per_sbs: 10e6,
            compute_per_sbs: 200.0,
            bus_bandwidth: 10e9,
            transmit_power_dbm: 37.0,
            noise_power_dbm: -100.0,
            carrier_freq: 3.5,
            arrival_mean: 50.0,
            arrival_unit_bits: 400.0,
            arrival_dist: ArrivalDist::Poisson,
            eta: 1e-6,
            lyapunov_v: 1e4,
            kappa_esc: 1e-28,
            alg1_eps: 1e-3,
            alg1_max_iters: 50,
            alg2_max_iters: 10,
            alg2_rel_tol: 1e-4,
            num_lts: 10,
            task_types: vec![
                TaskType::new(20.0, 1.0),
                TaskType::new(40.0, 3.0),
                TaskType::new(60.0, 5.0),
            ],
            baseline: Baseline::None,
            seed: 42,
            data_size_dist: DataSizeDist::Uniform {
                min_bytes: 1000.0,
                max_bytes: 4000.0,
            },
            interference_model: InterferenceModel::Paper,
            feature_maps: 64.0,
            complexity_scale: 1e-5,
            complexity_floor: 1e-3,
            user_speed_kmh: 3.0,
            tc_reference_bytes: 2500.0,
            tc_reference_type: 1,
        }
    }
}

/// `MECSIM_NUM_USERS=10` becomes `("num_users", "10")`.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|key| (key.to_ascii_lowercase(), v)))
        .collect();
    out.sort();
    out
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validated()
    }

    /// Reads `path`, applies `MECSIM_*` environment overrides, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, &env_overrides())
    }

    /// Reference defaults with `MECSIM_*` environment overrides applied.
    pub fn from_env() -> Result<Self> {
        Self::from_toml_with_overrides("", &env_overrides())
    }

    /// Parses `text`, then sets each `(key, value)` pair before validation.
    ///
    /// Values are read as TOML literals (`1e-6`, `[1, 2]`, `{ kind = ... }`)
    /// and fall back to plain strings.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        for (key, value) in overrides {
            set_key(&mut table, key, value)?;
        }
        let cfg: ScenarioConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        cfg.validated()
    }

    /// Returns a copy with `key` set to the TOML literal `value`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let text = self.to_toml();
        Self::from_toml_with_overrides(&text, &[(key.to_string(), value.to_string())])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Short slots per long slot.
    pub fn slots_per_lts(&self) -> usize {
        self.sts_per_lts.expect("validated config always carries sts_per_lts")
    }

    pub fn transmit_power(&self) -> f64 {
        dbm_to_watts(self.transmit_power_dbm)
    }

    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// Effective capacitance expressed per (gigacycle/s)^3.
    pub fn kappa_per_gc3(&self) -> f64 {
        self.kappa_esc * 1e27
    }

    pub fn user_speed(&self) -> f64 {
        self.user_speed_kmh * 1000.0 / 3600.0
    }

    /// Checks invariants and fills derived fields.
    pub fn validated(mut self) -> Result<Self> {
        let positive = [
            ("area_side", self.area_side),
            ("lts_length", self.lts_length),
            ("sts_length", self.sts_length),
            ("bandwidth_per_sbs", self.bandwidth_per_sbs),
            ("compute_per_sbs", self.compute_per_sbs),
            ("bus_bandwidth", self.bus_bandwidth),
            ("carrier_freq", self.carrier_freq),
            ("arrival_unit_bits", self.arrival_unit_bits),
            ("lyapunov_v", self.lyapunov_v),
            ("kappa_esc", self.kappa_esc),
            ("alg1_eps", self.alg1_eps),
            ("alg2_rel_tol", self.alg2_rel_tol),
            ("feature_maps", self.feature_maps),
            ("complexity_scale", self.complexity_scale),
            ("complexity_floor", self.complexity_floor),
            ("tc_reference_bytes", self.tc_reference_bytes),
        ];
        for (key, value) in positive {
            // an infinite tolerance stops the allocation loop after one pass
            let finite_ok = value.is_finite() || key == "alg1_eps";
            if !(value > 0.0) || !finite_ok {
                return Err(Error::invalid(key, format!("must be positive and finite, got {value}")));
            }
        }
        let nonnegative = [
            ("arrival_mean", self.arrival_mean),
            ("eta", self.eta),
            ("user_speed_kmh", self.user_speed_kmh),
        ];
        for (key, value) in nonnegative {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::invalid(
                    key,
                    format!("must be nonnegative and finite, got {value}"),
                ));
            }
        }
        if !self.transmit_power_dbm.is_finite() {
            return Err(Error::invalid("transmit_power_dbm", "must be finite"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::invalid("noise_power_dbm", "must be finite"));
        }
        if self.num_sbs == 0 {
            return Err(Error::invalid("num_sbs", "need at least one SBS"));
        }
        if self.alg1_max_iters == 0 {
            return Err(Error::invalid("alg1_max_iters", "must be at least 1"));
        }
        if self.alg2_max_iters == 0 {
            return Err(Error::invalid("alg2_max_iters", "must be at least 1"));
        }
        if self.task_types.is_empty() {
            return Err(Error::invalid("task_types", "catalog is empty"));
        }
        for (m, t) in self.task_types.iter().enumerate() {
            if !(t.delay_ms > 0.0) || !t.delay_ms.is_finite() {
                return Err(Error::invalid(
                    format!("task_types[{m}].delay_ms"),
                    format!("must be positive, got {}", t.delay_ms),
                ));
            }
            if !(t.n_m >= 1.0) || !t.n_m.is_finite() {
                return Err(Error::invalid(
                    format!("task_types[{m}].n_m"),
                    format!("must be >= 1, got {}", t.n_m),
                ));
            }
        }
        if self.tc_reference_type >= self.task_types.len() {
            return Err(Error::invalid(
                "tc_reference_type",
                format!("index {} outside catalog", self.tc_reference_type),
            ));
        }
        match self.data_size_dist {
            DataSizeDist::Uniform { min_bytes, max_bytes } => {
                if !(min_bytes > 0.0) || !(max_bytes >= min_bytes) || !max_bytes.is_finite() {
                    return Err(Error::invalid(
                        "data_size_dist",
                        format!("need 0 < min_bytes <= max_bytes, got [{min_bytes}, {max_bytes}]"),
                    ));
                }
            }
            DataSizeDist::Fixed { bytes } => {
                if !(bytes > 0.0) || !bytes.is_finite() {
                    return Err(Error::invalid(
                        "data_size_dist",
                        format!("bytes must be positive, got {bytes}"),
                    ));
                }
            }
        }

        let ratio = self.lts_length / self.sts_length;
        let p = match self.sts_per_lts {
            Some(p) => p,
            None => ratio.round().max(0.0) as usize,
        };
        if p == 0 {
            return Err(Error::invalid("sts_per_lts", "must be at least 1"));
        }
        let implied = p as f64 * self.sts_length;
        if (implied - self.lts_length).abs() > SLOT_RATIO_TOL * self.lts_length {
            return Err(Error::invalid(
                "lts_length",
                format!(
                    "T = p * tau violated: T = {}, p = {p}, tau = {} (p * tau = {implied})",
                    self.lts_length, self.sts_length
                ),
            ));
        }
        self.sts_per_lts = Some(p);
        Ok(self)
    }
}

fn set_key(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let key = key.trim();
    let known: toml::Table = toml::Table::try_from(ScenarioConfig::default()).expect("default config serializes");
    if !known.contains_key(key) && key != "sts_per_lts" {
        return Err(Error::invalid(key, "not a scenario config field"));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    table.insert(key.to_string(), parsed);
    Ok(())
}
