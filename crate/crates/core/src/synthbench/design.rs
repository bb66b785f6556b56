use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{substream, Stream};

/// Latin hypercube design of `n` points in `[-0.5, 0.5]^d`.
///
/// In each dimension the `n` equal-width strata are assigned to points by an
/// independent uniform permutation; each point sits uniformly inside its
/// stratum.
pub fn lhs_design(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    lhs_with(&mut substream(seed, Stream::Lhs), n, d)
}

pub(crate) fn lhs_with<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, d);
    let width = 1.0 / n as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            // stay strictly inside the stratum's half-open interval
            let x = -0.5 + (stratum as f64 + u) * width;
            let hi = -0.5 + (stratum + 1) as f64 * width;
            out[(i, k)] = if x >= hi && stratum + 1 < n { hi.next_down() } else { x.min(0.5) };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_in_the_cell() {
        let x = lhs_design(1, 3, 5);
        assert!(x.iter().all(|v| (-0.5..=0.5).contains(v)));
    }

    #[test]
    fn four_points_cover_four_strata() {
        let x = lhs_design(4, 1, 11);
        let mut col: Vec<f64> = x.column(0).iter().copied().collect();
        col.sort_by(f64::total_cmp);
        let edges = [-0.5, -0.25, 0.0, 0.25, 0.5];
        for (i, v) in col.iter().enumerate() {
            assert!(*v >= edges[i] && *v <= edges[i + 1], "{v} not in stratum {i}");
            if i < 3 {
                assert!(*v < edges[i + 1]);
            }
        }
    }

    #[test]
    fn same_seed_same_design() {
        assert_eq!(lhs_design(10, 2, 3), lhs_design(10, 2, 3));
        assert_ne!(lhs_design(10, 2, 3), lhs_design(10, 2, 4));
    }
}
