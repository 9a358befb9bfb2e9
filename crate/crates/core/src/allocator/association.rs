//! Per-user SBS choice: argmin of the candidate cost row.

use crate::grid::UserSbsMatrix;

/// Index of the smallest finite entry, lowest index on ties.
pub fn argmin_row(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &c) in costs.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        match best {
            Some(b) if costs[b] <= c => {}
            _ => best = Some(k),
        }
    }
    best
}

/// Row-wise argmin for admitted users; others get `None`.
pub fn solve_association(costs: &UserSbsMatrix, admitted: &[bool]) -> Vec<Option<usize>> {
    (0..costs.users())
        .map(|u| if admitted[u] { argmin_row(costs.row(u)) } else { None })
        .collect()
}

/// Dense 0/1 association matrix.
pub fn to_matrix(assoc: &[Option<usize>], sbs: usize) -> UserSbsMatrix {
    UserSbsMatrix::from_fn(assoc.len(), sbs, |u, k| if assoc[u] == Some(k) { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn argmin_examples() {
        assert_eq!(argmin_row(&[5.0, 3.0]), Some(1));
        assert_eq!(argmin_row(&[4.0, 4.0]), Some(0));
        assert_eq!(argmin_row(&[f64::INFINITY, 4.0]), Some(1));
        assert_eq!(argmin_row(&[f64::INFINITY]), None);
        assert_eq!(argmin_row(&[]), None);
    }

    #[test]
    fn unadmitted_rows_are_empty() {
        let c = UserSbsMatrix::from_fn(2, 2, |u, k| (u + k) as f64);
        let a = solve_association(&c, &[true, false]);
        assert_eq!(a, vec![Some(0), None]);
        let x = to_matrix(&a, 2);
        assert_eq!(x.row(0), &[1.0, 0.0]);
        assert_eq!(x.row(1), &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn argmin_invariant_under_positive_scaling(
            row in proptest::collection::vec(-1e3f64..1e3, 1..6), s in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = row.iter().map(|c| c * s).collect();
            prop_assert_eq!(argmin_row(&row), argmin_row(&scaled));
        }
    }
}
