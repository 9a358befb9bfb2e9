//! Per-SBS bandwidth LP: minimize `coef * sum e_u w_u` subject to
//! `w_u >= w_min_u` and `sum w_u <= W_k`.

use super::compute::CAPACITY_TOL;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthInfeasible {
    pub users: Vec<usize>,
}

pub fn bandwidth_objective(coef: f64, se: &[f64], w: &[f64]) -> f64 {
    se.iter().zip(w).map(|(e, x)| coef * e * x).sum()
}

/// Minimum bandwidth for `rate` at spectral efficiency `se`.
pub fn min_bandwidth(rate: f64, se: f64) -> f64 {
    if rate <= 0.0 {
        0.0
    } else if se > 0.0 {
        rate / se
    } else {
        f64::INFINITY
    }
}

/// Structured vertex solution: every user gets its minimum; with a negative
/// coefficient the whole residual goes to the user with the largest
/// spectral efficiency (lowest index on ties).
pub fn solve_bandwidth_sbs(
    se: &[f64],
    w_min: &[f64],
    coef: f64,
    capacity: f64,
) -> Result<Vec<f64>, BandwidthInfeasible> {
    assert_eq!(se.len(), w_min.len());
    let total: f64 = w_min.iter().sum();
    if !(total <= capacity * (1.0 + CAPACITY_TOL)) {
        return Err(BandwidthInfeasible {
            users: super::compute::overload_victims(w_min, capacity),
        });
    }
    if total > capacity {
        let s = capacity / total;
        return Ok(w_min.iter().map(|x| x * s).collect());
    }
    let mut w = w_min.to_vec();
    if coef < 0.0 && !w.is_empty() {
        let mut best = 0;
        for u in 1..se.len() {
            if se[u] > se[best] {
                best = u;
            }
        }
        w[best] += capacity - total;
    }
    Ok(w)
}
