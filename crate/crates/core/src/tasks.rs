//! Task catalog, CNN semantic-extraction complexity and per-slot demand sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{ArrivalDist, DataSizeDist, ScenarioConfig, TaskType};
use crate::error::{Error, Result};
use crate::scenario::SimRng;

/// Value of the complexity formula, with the clamp flag for tiny inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub value: f64,
    /// Set when the raw formula was `<= 0` and `value` is the floor.
    pub clamped: bool,
}

/// Raw CNN complexity `n a + ln(a / 3N) (n a / N + a + n a / 3)` for `a` bytes.
pub fn complexity_raw(a: f64, n_m: f64, feature_maps: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::NonPositive {
            what: "raw data size",
            value: a,
        });
    }
    if !(feature_maps >= 1.0) {
        return Err(Error::invalid("feature_maps", format!("{feature_maps} < 1")));
    }
    let log = (a / (3.0 * feature_maps)).ln();
    Ok(n_m * a + log * (n_m * a / feature_maps + a + n_m * a / 3.0))
}

/// [`complexity_raw`] clamped to `floor` when the formula goes nonpositive.
pub fn complexity(a: f64, n_m: f64, feature_maps: f64, floor: f64) -> Result<Complexity> {
    let raw = complexity_raw(a, n_m, feature_maps)?;
    Ok(if raw > 0.0 {
        Complexity {
            value: raw,
            clamped: false,
        }
    } else {
        Complexity {
            value: floor,
            clamped: true,
        }
    })
}

/// Index of the set entry of a one-hot row.
pub fn one_hot_index(z_row: &[u8]) -> Result<usize> {
    let mut hit = None;
    for (m, &z) in z_row.iter().enumerate() {
        match (z, hit) {
            (0, _) => {}
            (1, None) => hit = Some(m),
            _ => return Err(Error::NotOneHot(z_row.to_vec())),
        }
    }
    hit.ok_or_else(|| Error::NotOneHot(z_row.to_vec()))
}

pub fn one_hot(index: usize, m: usize) -> Vec<u8> {
    let mut row = vec![0; m];
    row[index] = 1;
    row
}

/// `sum_m z_um * complexity(a, n_m)` for a one-hot `z_row`.
pub fn required_compute(z_row: &[u8], a: f64, types: &[TaskType], feature_maps: f64, floor: f64) -> Result<Complexity> {
    crate::error::check_len("task indicator row", z_row.len(), types.len())?;
    let m = one_hot_index(z_row)?;
    complexity(a, types[m].n_m, feature_maps, floor)
}

/// Maps a data volume and task type to a compute demand in gigacycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComputeModel {
    /// Semantic-extraction model: `scale * complexity(bytes, n_m, N)`.
    Semantic { feature_maps: f64, scale: f64, floor: f64 },
    /// Traditional model: demand proportional to the data size only.
    Linear { gc_per_byte: f64 },
}

impl ComputeModel {
    pub fn semantic(cfg: &ScenarioConfig) -> Self {
        ComputeModel::Semantic {
            feature_maps: cfg.feature_maps,
            scale: cfg.complexity_scale,
            floor: cfg.complexity_floor,
        }
    }

    /// Linear model that agrees with [`ComputeModel::semantic`] at the
    /// configured reference size and task type.
    pub fn traditional(cfg: &ScenarioConfig) -> Result<Self> {
        let task = cfg
            .task_types
            .get(cfg.tc_reference_type)
            .ok_or_else(|| Error::invalid("tc_reference_type", "no such task type"))?;
        let at_ref = Self::semantic(cfg).demand_checked(cfg.tc_reference_bytes, task)?;
        Ok(ComputeModel::Linear {
            gc_per_byte: at_ref.value / cfg.tc_reference_bytes,
        })
    }

    pub fn for_config(cfg: &ScenarioConfig) -> Result<Self> {
        match cfg.baseline {
            crate::Baseline::TraditionalComputing => Self::traditional(cfg),
            _ => Ok(Self::semantic(cfg)),
        }
    }

    /// Demand for `bytes` of data; zero data needs zero work.
    pub fn demand_checked(&self, bytes: f64, task: &TaskType) -> Result<Complexity> {
        if bytes == 0.0 {
            return Ok(Complexity {
                value: 0.0,
                clamped: false,
            });
        }
        match *self {
            ComputeModel::Semantic {
                feature_maps,
                scale,
                floor,
            } => {
                let c = complexity(bytes, task.n_m, feature_maps, floor / scale)?;
                Ok(Complexity {
                    value: c.value * scale,
                    clamped: c.clamped,
                })
            }
            ComputeModel::Linear { gc_per_byte } => {
                if !(bytes > 0.0) {
                    return Err(Error::NonPositive {
                        what: "raw data size",
                        value: bytes,
                    });
                }
                Ok(Complexity {
                    value: gc_per_byte * bytes,
                    clamped: false,
                })
            }
        }
    }

    /// Demand in gigacycles; nonpositive or non-finite volumes count as zero.
    pub fn demand(&self, bytes: f64, task: &TaskType) -> f64 {
        if !(bytes > 0.0) || !bytes.is_finite() {
            return 0.0;
        }
        self.demand_checked(bytes, task).map(|c| c.value).unwrap_or(0.0)
    }
}

/// Per-user demand of one short slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsDemand {
    /// Raw data of the slot's task, bits.
    pub raw_bits: Vec<f64>,
    /// Requested task type per user (index into the catalog).
    pub task: Vec<usize>,
    /// Offloading-queue arrivals, bits.
    pub arrivals: Vec<f64>,
}

impl StsDemand {
    pub fn num_users(&self) -> usize {
        self.task.len()
    }

    /// One-hot indicator row of user `u` over `m` types.
    pub fn z_row(&self, u: usize, m: usize) -> Vec<u8> {
        one_hot(self.task[u], m)
    }
}

/// `U` i.i.d. arrival volumes (bits) with mean `lambda * unit_bits`.
pub fn sample_arrivals(
    rng: &mut SimRng,
    lambda: f64,
    unit_bits: f64,
    users: usize,
    dist: ArrivalDist,
) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("arrival_mean", format!("{lambda} is not >= 0")));
    }
    if lambda == 0.0 {
        return Ok(vec![0.0; users]);
    }
    Ok(match dist {
        ArrivalDist::Poisson => {
            let d = Poisson::new(lambda).map_err(|e| Error::invalid("arrival_mean", e.to_string()))?;
            (0..users).map(|_| d.sample(rng) * unit_bits).collect()
        }
        ArrivalDist::Exponential => {
            let d = Exp::new(1.0 / lambda).map_err(|e| Error::invalid("arrival_mean", e.to_string()))?;
            (0..users).map(|_| d.sample(rng) * unit_bits).collect()
        }
    })
}

/// Uniform draw over `m` task types.
pub fn sample_task_request(rng: &mut SimRng, m: usize) -> usize {
    assert!(m >= 1, "task catalog is empty");
    rng.random_range(0..m)
}

pub fn sample_data_bytes(rng: &mut SimRng, dist: &DataSizeDist) -> f64 {
    match *dist {
        DataSizeDist::Uniform { min_bytes, max_bytes } => {
            if max_bytes > min_bytes {
                rng.random_range(min_bytes..max_bytes)
            } else {
                min_bytes
            }
        }
        DataSizeDist::Fixed { bytes } => bytes,
    }
}

/// Draws a full slot: data sizes, then task types, then arrivals.
pub fn sample_sts_demand(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<StsDemand> {
    let u = cfg.num_users;
    let raw_bits = (0..u)
        .map(|_| 8.0 * sample_data_bytes(rng, &cfg.data_size_dist))
        .collect();
    let task = (0..u).map(|_| sample_task_request(rng, cfg.task_types.len())).collect();
    let arrivals = sample_arrivals(rng, cfg.arrival_mean, cfg.arrival_unit_bits, u, cfg.arrival_dist)?;
    Ok(StsDemand {
        raw_bits,
        task,
        arrivals,
    })
}
