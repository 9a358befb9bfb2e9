//! SBS layout, user placement and random-direction mobility.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// Seeded generator used for every stochastic draw of a run.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area_side: f64,
    pub sbs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// Heading of each user in radians.
    pub user_headings: Vec<f64>,
}

impl Topology {
    pub fn num_sbs(&self) -> usize {
        self.sbs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    /// Index of the closest SBS to user `u` (lowest index on ties).
    pub fn nearest_sbs(&self, u: usize) -> usize {
        let p = self.user_positions[u];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, s) in self.sbs_positions.iter().enumerate() {
            let d = p.distance(s);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }
}

/// Hexagonal lattice sites sorted by distance from the origin, then by angle.
fn hex_sites(count: usize, spacing: f64) -> Vec<Point> {
    let mut rings = 0i64;
    while 1 + 3 * rings * (rings + 1) < count as i64 {
        rings += 1;
    }
    let mut sites = Vec::new();
    for q in -rings..=rings {
        for r in -rings..=rings {
            let s = -q - r;
            if s.abs() > rings {
                continue;
            }
            let x = spacing * (q as f64 + 0.5 * r as f64);
            let y = spacing * (3f64.sqrt() / 2.0) * r as f64;
            sites.push(Point::new(x, y));
        }
    }
    sites.sort_by(|a, b| {
        let ra = a.x.hypot(a.y);
        let rb = b.x.hypot(b.y);
        // ring radii are exact multiples of the spacing up to rounding
        let key = |r: f64| (r / spacing * 1e6).round() as i64;
        key(ra).cmp(&key(rb)).then_with(|| {
            let ang = |p: &Point| {
                let a = p.y.atan2(p.x);
                if a < -1e-12 {
                    a + std::f64::consts::TAU
                } else {
                    a.max(0.0)
                }
            };
            ang(a).total_cmp(&ang(b))
        })
    });
    sites.truncate(count);
    sites
}

/// Places `K` SBSs on a hexagonal grid centred in the area and `U` users
/// uniformly at random.
pub fn place_topology(cfg: &ScenarioConfig, rng: &mut SimRng) -> Topology {
    let side = cfg.area_side;
    let k = cfg.num_sbs.max(1);
    let spacing = side / (k as f64).sqrt().ceil();
    let mut sites = hex_sites(k, spacing);
    let cx = sites.iter().map(|p| p.x).sum::<f64>() / k as f64;
    let cy = sites.iter().map(|p| p.y).sum::<f64>() / k as f64;
    for p in &mut sites {
        p.x = (p.x - cx + side / 2.0).clamp(0.0, side);
        p.y = (p.y - cy + side / 2.0).clamp(0.0, side);
    }

    let mut user_positions = Vec::with_capacity(cfg.num_users);
    let mut user_headings = Vec::with_capacity(cfg.num_users);
    for _ in 0..cfg.num_users {
        let x = rng.random_range(0.0..side);
        let y = rng.random_range(0.0..side);
        user_positions.push(Point::new(x, y));
        user_headings.push(rng.random_range(0.0..std::f64::consts::TAU));
    }
    Topology {
        area_side: side,
        sbs_positions: sites,
        user_positions,
        user_headings,
    }
}

/// Reflects `v` into `[0, side]`, returning whether the direction flipped.
fn reflect(v: f64, side: f64) -> (f64, bool) {
    if v < 0.0 {
        ((-v).min(side), true)
    } else if v > side {
        ((2.0 * side - v).max(0.0), true)
    } else {
        (v, false)
    }
}

/// Advances every user by `speed * dt` metres along a freshly drawn heading,
/// reflecting off the area boundary.
pub fn step_mobility(top: &Topology, speed: f64, dt: f64, rng: &mut SimRng) -> Topology {
    let mut next = top.clone();
    let side = top.area_side;
    let step = speed * dt;
    for (pos, heading) in next.user_positions.iter_mut().zip(next.user_headings.iter_mut()) {
        let mut h = rng.random_range(0.0..std::f64::consts::TAU);
        let (x, flip_x) = reflect(pos.x + step * h.cos(), side);
        let (y, flip_y) = reflect(pos.y + step * h.sin(), side);
        if flip_x {
            h = std::f64::consts::PI - h;
        }
        if flip_y {
            h = -h;
        }
        *pos = Point::new(x, y);
        *heading = h.rem_euclid(std::f64::consts::TAU);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, u: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_sbs: k,
            num_users: u,
            ..ScenarioConfig::default()
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn single_sbs_sits_at_centre() {
        let top = place_topology(&cfg(1, 5), &mut seeded_rng(1));
        assert_eq!(top.sbs_positions, vec![Point::new(100.0, 100.0)]);
    }

    #[test]
    fn four_sbs_distinct_and_inside() {
        let top = place_topology(&cfg(4, 0), &mut seeded_rng(1));
        assert_eq!(top.num_sbs(), 4);
        for (i, a) in top.sbs_positions.iter().enumerate() {
            assert!((0.0..=200.0).contains(&a.x) && (0.0..=200.0).contains(&a.y));
            for b in &top.sbs_positions[i + 1..] {
                assert!(a.distance(b) > 1.0);
            }
        }
    }

    #[test]
    fn larger_layouts_fit() {
        for k in [2, 3, 7, 12, 19] {
            let top = place_topology(&cfg(k, 0), &mut seeded_rng(0));
            for (i, a) in top.sbs_positions.iter().enumerate() {
                for b in &top.sbs_positions[i + 1..] {
                    assert!(a.distance(b) > 1.0, "k={k}");
                }
            }
        }
    }

    #[test]
    fn placement_is_deterministic() {
        let c = cfg(4, 30);
        let a = place_topology(&c, &mut seeded_rng(9));
        let b = place_topology(&c, &mut seeded_rng(9));
        assert_eq!(a, b);
        let other = place_topology(&c, &mut seeded_rng(10));
        assert_ne!(a, other);
    }

    #[test]
    fn walking_speed_displacement() {
        let c = cfg(4, 40);
        let mut rng = seeded_rng(3);
        let top = place_topology(&c, &mut rng);
        let next = step_mobility(&top, c.user_speed(), 0.1, &mut rng);
        let expected: f64 = 3000.0 / 3600.0 * 0.1;
        assert!((expected - 0.083_333_333_333).abs() < 1e-9);
        for (a, b) in top.user_positions.iter().zip(&next.user_positions) {
            let margin = a.x.min(a.y).min(200.0 - a.x).min(200.0 - a.y);
            if margin > 1.0 {
                let d = a.distance(b);
                assert!(((d - expected) / expected).abs() < 1e-12);
            }
        }
        assert_eq!(top.sbs_positions, next.sbs_positions);
    }

    #[test]
    fn zero_step_only_changes_headings() {
        let c = cfg(2, 10);
        let mut rng = seeded_rng(4);
        let top = place_topology(&c, &mut rng);
        let next = step_mobility(&top, c.user_speed(), 0.0, &mut rng);
        assert_eq!(top.user_positions, next.user_positions);
        assert_ne!(top.user_headings, next.user_headings);
    }

    #[test]
    fn boundary_reflection_stays_inside() {
        let top = Topology {
            area_side: 10.0,
            sbs_positions: vec![Point::new(5.0, 5.0)],
            user_positions: vec![Point::new(0.0, 0.0), Point::new(10.0, 10.0), Point::new(0.01, 9.99)],
            user_headings: vec![0.0; 3],
        };
        let mut rng = seeded_rng(5);
        let mut cur = top;
        for _ in 0..200 {
            cur = step_mobility(&cur, 1.0, 0.5, &mut rng);
            for p in &cur.user_positions {
                assert!((0.0..=10.0).contains(&p.x) && (0.0..=10.0).contains(&p.y), "{p:?}");
            }
        }
    }
}
