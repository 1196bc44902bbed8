use crate::tensor::{Mat, Real};

/// Row `k` of the result is the mean of the rows of `x` listed in `members[k]`.
pub fn aggregate_features<T: Real>(members: &[Vec<u32>], x: &Mat<T>) -> Mat<T> {
    let mut out = Mat::zeros(members.len(), x.cols);
    for (k, m) in members.iter().enumerate() {
        let row = out.row_mut(k);
        for &i in m {
            for (o, v) in row.iter_mut().zip(x.row(i as usize)) {
                *o += *v;
            }
        }
        if !m.is_empty() {
            let inv = T::c(1.0 / m.len() as f64);
            row.iter_mut().for_each(|o| *o *= inv);
        }
    }
    out
}

/// Gradient of [`aggregate_features`] with respect to its per-point input.
pub fn aggregate_backward<T: Real>(members: &[Vec<u32>], d_f: &Mat<T>, n_points: usize) -> Mat<T> {
    let mut dx = Mat::zeros(n_points, d_f.cols);
    for (k, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let inv = T::c(1.0 / m.len() as f64);
        for &i in m {
            for (o, g) in dx.row_mut(i as usize).iter_mut().zip(d_f.row(k)) {
                *o = *g * inv;
            }
        }
    }
    dx
}

/// Groups point indices by superpoint id.
pub fn members_of(assignment: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut m = vec![Vec::new(); k];
    for (i, &a) in assignment.iter().enumerate() {
        m[a as usize].push(i as u32);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_features_average_to_themselves() {
        let x = Mat::from_vec(3, 2, vec![1.5f64, -2.0, 1.5, -2.0, 1.5, -2.0]);
        let f = aggregate_features(&[vec![0, 1, 2]], &x);
        assert_eq!(f.data, vec![1.5, -2.0]);
    }

    #[test]
    fn random_partition_matches_independent_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let assignment: Vec<u32> = (0..20)
            .map(|i| if i < 4 { i } else { rng.random_range(0..4) })
            .collect();
        let x = Mat::from_fn(20, 3, |_, _| rng.random::<f64>());
        let members = members_of(&assignment, 4);
        let f = aggregate_features(&members, &x);
        for k in 0..4u32 {
            for c in 0..3 {
                let vals: Vec<f64> = (0..20).filter(|&i| assignment[i] == k).map(|i| x.at(i, c)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((f.at(k as usize, c) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let assignment: Vec<u32> = vec![0, 1, 0, 2, 1, 0];
        let members = members_of(&assignment, 3);
        let x = Mat::from_fn(6, 2, |_, _| rng.random::<f64>());
        let g = Mat::from_fn(3, 2, |_, _| rng.random::<f64>());
        let lhs: f64 = aggregate_features(&members, &x)
            .data
            .iter()
            .zip(&g.data)
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f64 = aggregate_backward(&members, &g, 6)
            .data
            .iter()
            .zip(&x.data)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
