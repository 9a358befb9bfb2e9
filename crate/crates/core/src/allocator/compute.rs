//! Per-SBS compute split: maximize `sum w_u f_u - c sum f_u^3` subject to
//! `f_u >= floor_u` and `sum f_u <= F_k`.

/// Relative tolerance on the capacity sum when the constraint binds.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeSolution {
    pub f: Vec<f64>,
    /// Capacity multiplier (zero when the capacity constraint is slack).
    pub mu: f64,
    pub binding: bool,
}

/// The floors do not fit: `users` (largest floors first) must be removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputeInfeasible {
    pub users: Vec<usize>,
}

pub fn compute_objective(weights: &[f64], cost: f64, f: &[f64]) -> f64 {
    weights.iter().zip(f).map(|(w, x)| w * x - cost * x * x * x).sum()
}

/// Users to remove, largest floor first (lowest index on ties), until the
/// remaining floors fit in `capacity`.
pub fn overload_victims(floors: &[f64], capacity: f64) -> Vec<usize> {
    let mut total: f64 = floors.iter().sum();
    let mut order: Vec<usize> = (0..floors.len()).collect();
    order.sort_by(|&a, &b| floors[b].total_cmp(&floors[a]).then(a.cmp(&b)));
    let mut out = Vec::new();
    for u in order {
        if total <= capacity * (1.0 + CAPACITY_TOL) {
            break;
        }
        total -= floors[u];
        out.push(u);
    }
    out
}

fn response(w: f64, floor: f64, mu: f64, cost: f64) -> f64 {
    floor.max(((w - mu).max(0.0) / (3.0 * cost)).sqrt())
}

/// KKT solution with bisection on the capacity multiplier.
pub fn solve_compute_sbs(
    weights: &[f64],
    floors: &[f64],
    cost: f64,
    capacity: f64,
) -> Result<ComputeSolution, ComputeInfeasible> {
    assert_eq!(weights.len(), floors.len());
    let floor_sum: f64 = floors.iter().sum();
    if !(floor_sum <= capacity * (1.0 + CAPACITY_TOL)) {
        return Err(ComputeInfeasible {
            users: overload_victims(floors, capacity),
        });
    }
    if floor_sum > capacity {
        // rounding overshoot: shrink the floors onto the capacity
        let s = capacity / floor_sum;
        return Ok(ComputeSolution {
            f: floors.iter().map(|x| x * s).collect(),
            mu: weights.iter().cloned().fold(0.0, f64::max),
            binding: true,
        });
    }
    if weights.is_empty() {
        return Ok(ComputeSolution {
            f: Vec::new(),
            mu: 0.0,
            binding: false,
        });
    }

    if cost <= 0.0 {
        // linear objective: floors, then everything left to the heaviest user
        let mut f = floors.to_vec();
        let mut best = 0;
        for u in 1..weights.len() {
            if weights[u] > weights[best] {
                best = u;
            }
        }
        if weights[best] > 0.0 {
            f[best] += capacity - floor_sum;
            return Ok(ComputeSolution {
                f,
                mu: weights[best],
                binding: true,
            });
        }
        return Ok(ComputeSolution {
            f,
            mu: 0.0,
            binding: false,
        });
    }

    let eval = |mu: f64| -> Vec<f64> {
        weights
            .iter()
            .zip(floors)
            .map(|(&w, &lo)| response(w, lo, mu, cost))
            .collect()
    };
    let f0 = eval(0.0);
    if f0.iter().sum::<f64>() <= capacity {
        return Ok(ComputeSolution {
            f: f0,
            mu: 0.0,
            binding: false,
        });
    }

    let mut lo = 0.0;
    let mut hi = weights.iter().cloned().fold(0.0, f64::max);
    let mut f_hi = eval(hi);
    for _ in 0..300 {
        if capacity - f_hi.iter().sum::<f64>() <= CAPACITY_TOL * capacity {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = eval(mid);
        if f_mid.iter().sum::<f64>() > capacity {
            lo = mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(ComputeSolution {
        f: f_hi,
        mu: hi,
        binding: true,
    })
}
