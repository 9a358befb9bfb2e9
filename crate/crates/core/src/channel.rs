//! Small-cell uplink channel: LoS/NLoS path loss, expected channel gain,
//! co-channel interference and Shannon rate.

use serde::{Deserialize, Serialize};

use crate::config::InterferenceModel;
use crate::error::{Error, Result};
use crate::grid::UserSbsMatrix;
use crate::scenario::Topology;

/// Links shorter than this are evaluated at this distance (m).
pub const MIN_LINK_DISTANCE: f64 = 1.0;

fn check_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { what, value })
    }
}

/// LoS path loss in dB for distance `d` (m) and carrier `fq` (GHz).
pub fn path_loss_los(d: f64, fq: f64) -> Result<f64> {
    check_positive("distance", d)?;
    check_positive("carrier frequency", fq)?;
    Ok(22.0 * d.log10() + 28.0 + 20.0 * fq.log10())
}

/// NLoS path loss in dB.
pub fn path_loss_nlos(d: f64, fq: f64) -> Result<f64> {
    check_positive("distance", d)?;
    check_positive("carrier frequency", fq)?;
    Ok(36.7 * d.log10() + 22.7 + 26.0 * fq.log10())
}

pub fn los_probability(d: f64) -> Result<f64> {
    check_positive("distance", d)?;
    let decay = (-d / 36.0).exp();
    Ok(((18.0 / d).min(1.0) * (1.0 - decay) + decay).clamp(0.0, 1.0))
}

/// Inverse of the probability-weighted linear path loss.
pub fn gain_from_mixture(p_los: f64, los_db: f64, nlos_db: f64) -> f64 {
    let loss = p_los * 10f64.powf(los_db / 10.0) + (1.0 - p_los) * 10f64.powf(nlos_db / 10.0);
    1.0 / loss
}

/// Expected-path-loss channel gain (linear).
pub fn channel_gain(d: f64, fq: f64) -> Result<f64> {
    let p = los_probability(d)?;
    Ok(gain_from_mixture(p, path_loss_los(d, fq)?, path_loss_nlos(d, fq)?))
}

/// `w * log2(1 + p g / (I + noise))` in bits/s.
pub fn uplink_rate(w: f64, p: f64, g: f64, interference: f64, noise: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    w * (1.0 + p * g / (interference + noise)).log2()
}

/// Per-(user, SBS) distances and gains for one short slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub distance: UserSbsMatrix,
    pub gain: UserSbsMatrix,
}

impl ChannelState {
    pub fn from_topology(top: &Topology, fq: f64) -> Result<Self> {
        let distance = UserSbsMatrix::from_fn(top.num_users(), top.num_sbs(), |u, k| {
            top.user_positions[u]
                .distance(&top.sbs_positions[k])
                .max(MIN_LINK_DISTANCE)
        });
        let mut gain = UserSbsMatrix::zeros(top.num_users(), top.num_sbs());
        for u in 0..top.num_users() {
            for k in 0..top.num_sbs() {
                gain[(u, k)] = channel_gain(distance[(u, k)], fq)?;
            }
        }
        Ok(Self { distance, gain })
    }

    pub fn num_users(&self) -> usize {
        self.gain.users()
    }

    pub fn num_sbs(&self) -> usize {
        self.gain.sbs()
    }
}

/// Interference seen by user `u` at SBS `k`.
///
/// `association` is only consulted by [`InterferenceModel::CrossUser`]; users
/// with `None` are silent.
pub fn interference(
    u: usize,
    k: usize,
    state: &ChannelState,
    p_u: f64,
    model: InterferenceModel,
    association: &[Option<usize>],
) -> f64 {
    match model {
        InterferenceModel::Paper => (0..state.num_sbs())
            .filter(|&i| i != k)
            .map(|i| state.gain[(u, i)] * p_u)
            .sum(),
        InterferenceModel::CrossUser => association
            .iter()
            .enumerate()
            .filter(|&(v, a)| v != u && matches!(a, Some(i) if *i != k))
            .map(|(v, _)| state.gain[(v, k)] * p_u)
            .sum(),
    }
}

/// Spectral efficiency `log2(1 + SINR)` for every (user, SBS) pair.
pub fn spectral_efficiency(
    state: &ChannelState,
    p_u: f64,
    noise: f64,
    model: InterferenceModel,
    association: &[Option<usize>],
) -> UserSbsMatrix {
    UserSbsMatrix::from_fn(state.num_users(), state.num_sbs(), |u, k| {
        let i = interference(u, k, state, p_u, model, association);
        (1.0 + p_u * state.gain[(u, k)] / (i + noise)).log2()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UserSbsMatrix;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn los_path_loss_values() {
        assert!(close(path_loss_los(1.0, 1.0).unwrap(), 28.0, 1e-12));
        assert!((path_loss_los(100.0, 3.5).unwrap() - 82.881).abs() < 1e-3);
        assert!(close(path_loss_los(10.0, 1.0).unwrap(), 50.0, 1e-12));
    }

    #[test]
    fn nlos_path_loss_values() {
        assert!(close(path_loss_nlos(1.0, 1.0).unwrap(), 22.7, 1e-12));
        assert!((path_loss_nlos(100.0, 3.5).unwrap() - 110.245).abs() < 1e-3);
        assert!(close(path_loss_nlos(10.0, 1.0).unwrap(), 59.4, 1e-12));
    }

    #[test]
    fn nonpositive_inputs_rejected() {
        assert!(path_loss_los(0.0, 1.0).is_err());
        assert!(path_loss_los(1.0, -1.0).is_err());
        assert!(path_loss_nlos(-3.0, 1.0).is_err());
        assert!(los_probability(0.0).is_err());
        assert!(channel_gain(0.0, 3.5).is_err());
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(18.0).unwrap(), 1.0);
        assert_eq!(los_probability(9.0).unwrap(), 1.0);
        assert!((los_probability(36.0).unwrap() - 0.68394).abs() < 1e-5);
    }

    #[test]
    fn gain_values() {
        assert!(close(gain_from_mixture(1.0, 30.0, 99.0), 1e-3, 1e-12));
        // frozen from an independent float evaluation of the three formulas
        // (p_LoS(100 m) = 0.230985)
        let g = channel_gain(100.0, 3.5).unwrap();
        assert!(close(g, 1.228_142_813_160_729_6e-11, 1e-9), "{g}");
        assert!(channel_gain(200.0, 3.5).unwrap() < g);
    }

    #[test]
    fn interference_paper_model() {
        let state = ChannelState {
            distance: UserSbsMatrix::from_fn(1, 1, |_, _| 10.0),
            gain: UserSbsMatrix::from_fn(1, 1, |_, _| 0.5),
        };
        assert_eq!(
            interference(0, 0, &state, 2.0, InterferenceModel::Paper, &[Some(0)]),
            0.0
        );

        let g = [1e-9, 3e-9, 7e-9];
        let state = ChannelState {
            distance: UserSbsMatrix::from_fn(1, 3, |_, _| 10.0),
            gain: UserSbsMatrix::from_fn(1, 3, |_, k| g[k]),
        };
        let i = interference(0, 1, &state, 2.0, InterferenceModel::Paper, &[Some(1)]);
        assert!(close(i, 2.0 * (g[0] + g[2]), 1e-15));
    }

    #[test]
    fn interference_cross_user_model() {
        // users 0..3, two SBSs; user 1 on SBS 1 interferes at SBS 0
        let state = ChannelState {
            distance: UserSbsMatrix::from_fn(3, 2, |_, _| 10.0),
            gain: UserSbsMatrix::from_fn(3, 2, |u, k| (1 + u * 2 + k) as f64),
        };
        let assoc = [Some(0), Some(1), None];
        let i = interference(0, 0, &state, 1.5, InterferenceModel::CrossUser, &assoc);
        assert_eq!(i, 1.5 * state.gain[(1, 0)]);
        let i = interference(1, 1, &state, 1.5, InterferenceModel::CrossUser, &assoc);
        assert_eq!(i, 1.5 * state.gain[(0, 1)]);
    }

    #[test]
    fn rate_values() {
        assert_eq!(uplink_rate(0.0, 1.0, 1.0, 0.0, 1.0), 0.0);
        assert!(close(uplink_rate(1e6, 1.0, 1.0, 0.0, 1.0), 1e6, 1e-15));
        assert!(close(uplink_rate(1e6, 3.0, 1.0, 0.5, 0.5), 2e6, 1e-15));
        // 10 MHz at 15 dB SINR
        let sinr = 10f64.powf(1.5);
        let r = uplink_rate(10e6, sinr, 1.0, 0.0, 1.0);
        assert!((r / 1e6 - 50.3).abs() < 0.1, "{r}");
    }

    proptest! {
        #[test]
        fn los_probability_is_a_probability(d in 1e-3f64..283.0) {
            let p = los_probability(d).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn gain_decreases_with_distance(d in 1.0f64..280.0, step in 1e-3f64..5.0, fq in 0.5f64..6.0) {
            prop_assert!(channel_gain(d + step, fq).unwrap() < channel_gain(d, fq).unwrap());
        }

        #[test]
        fn rate_monotonicity(
            w in 0.0f64..1e7, g in 1e-12f64..1e-6, i in 0.0f64..1e-9, dw in 0.0f64..1e6,
            dg in 0.0f64..1e-7, di in 0.0f64..1e-9,
        ) {
            let (p, n) = (5.0, 1e-13);
            let r = uplink_rate(w, p, g, i, n);
            prop_assert!(uplink_rate(w + dw, p, g, i, n) >= r);
            prop_assert!(uplink_rate(w, p, g + dg, i, n) >= r);
            prop_assert!(uplink_rate(w, p, g, i + di, n) <= r);
            prop_assert!(uplink_rate(2.0 * w, p, g, i, n) <= 2.0 * r * (1.0 + 1e-12));
        }

        #[test]
        fn paper_interference_matches_resummation(
            gains in proptest::collection::vec(1e-12f64..1e-6, 1..8), k_seed in 0usize..100, p in 0.1f64..10.0,
        ) {
            let kk = gains.len();
            let k = k_seed % kk;
            let state = ChannelState {
                distance: UserSbsMatrix::from_fn(1, kk, |_, _| 10.0),
                gain: UserSbsMatrix::from_fn(1, kk, |_, j| gains[j]),
            };
            let mut oracle = 0.0;
            for (j, g) in gains.iter().enumerate() {
                if j != k {
                    oracle += g * p;
                }
            }
            let got = interference(0, k, &state, p, InterferenceModel::Paper, &[Some(k)]);
            prop_assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-30));
        }
    }
}
