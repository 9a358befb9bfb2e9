//! Dense user-by-SBS matrices.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Row-major `users x sbs` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSbsMatrix {
    users: usize,
    sbs: usize,
    data: Vec<f64>,
}

impl UserSbsMatrix {
    pub fn zeros(users: usize, sbs: usize) -> Self {
        Self {
            users,
            sbs,
            data: vec![0.0; users * sbs],
        }
    }

    pub fn from_fn(users: usize, sbs: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(users, sbs);
        for u in 0..users {
            for k in 0..sbs {
                m[(u, k)] = f(u, k);
            }
        }
        m
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn sbs(&self) -> usize {
        self.sbs
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.sbs..(u + 1) * self.sbs]
    }

    pub fn row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.data[u * self.sbs..(u + 1) * self.sbs]
    }

    /// Sum of column `k`.
    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.users).map(|u| self[(u, k)]).sum()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }
}

impl Index<(usize, usize)> for UserSbsMatrix {
    type Output = f64;

    fn index(&self, (u, k): (usize, usize)) -> &f64 {
        debug_assert!(u < self.users && k < self.sbs);
        &self.data[u * self.sbs + k]
    }
}

impl IndexMut<(usize, usize)> for UserSbsMatrix {
    fn index_mut(&mut self, (u, k): (usize, usize)) -> &mut f64 {
        debug_assert!(u < self.users && k < self.sbs);
        &mut self.data[u * self.sbs + k]
    }
}
