//! Two-dimensional piecewise surfaces with a query placed inside a region,
//! next to one linear boundary, or next to the crossing of two boundaries.
//!
//! Training inputs are the centers of a 40 × 40 grid on `[-0.5, 0.5]²`, so the
//! neighborhood of each query is fixed by construction; the seed drives only
//! the response noise. The surface is a region level plus a shared smooth
//! trend `0.3 sin(4x1 + 3x2)`; levels differ by far more than the noise, so
//! neighbors from other regions act as outliers for the query.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{substream, Stream};
use crate::neighborhood::Dataset;

pub const GRID_SIDE: usize = 40;
pub const SCENARIO_NEIGHBORS: usize = 40;
pub const SCENARIO_NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Interior,
    SimpleBoundary,
    ComplexBoundary,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 3] = [
        BoundaryKind::Interior,
        BoundaryKind::SimpleBoundary,
        BoundaryKind::ComplexBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Interior => "interior",
            BoundaryKind::SimpleBoundary => "simple_boundary",
            BoundaryKind::ComplexBoundary => "complex_boundary",
        }
    }
}

/// Regions cut by half-planes `{x : aᵀx ≥ b}`; boundary `k` sets bit `k` of
/// the region index, and `levels[index]` is that region's level.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSurface {
    pub boundaries: Vec<([f64; 2], f64)>,
    pub levels: Vec<f64>,
}

impl PiecewiseSurface {
    pub fn region(&self, x: &[f64]) -> usize {
        self.boundaries
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| a[0] * x[0] + a[1] * x[1] >= *b)
            .map(|(k, _)| 1 << k)
            .sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.levels[self.region(x)] + 0.3 * (4.0 * x[0] + 3.0 * x[1]).sin()
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryScenario {
    pub kind: BoundaryKind,
    pub surface: PiecewiseSurface,
    pub train: Dataset,
    pub query: Vec<f64>,
    /// Noiseless surface at the query.
    pub truth: f64,
    pub neighbors: usize,
}

fn grid() -> DMatrix<f64> {
    let step = 1.0 / GRID_SIDE as f64;
    DMatrix::from_fn(GRID_SIDE * GRID_SIDE, 2, |i, k| {
        let cell = if k == 0 { i / GRID_SIDE } else { i % GRID_SIDE };
        -0.5 + (cell as f64 + 0.5) * step
    })
}

fn layout(kind: BoundaryKind) -> (PiecewiseSurface, Vec<f64>) {
    match kind {
        BoundaryKind::Interior => (
            PiecewiseSurface {
                boundaries: vec![([1.0, 0.0], 0.2)],
                levels: vec![0.0, 5.0],
            },
            vec![-0.25, 0.0],
        ),
        BoundaryKind::SimpleBoundary => (
            PiecewiseSurface {
                boundaries: vec![([0.6, 0.8], 0.0)],
                levels: vec![5.0, 0.0],
            },
            // 0.02 from the line along its unit normal
            vec![0.012, 0.016],
        ),
        BoundaryKind::ComplexBoundary => (
            PiecewiseSurface {
                boundaries: vec![([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0)],
                levels: vec![8.0, 4.0, 6.0, 0.0],
            },
            vec![0.04, 0.04],
        ),
    }
}

/// Builds the interior, simple-boundary and complex-boundary scenarios, in
/// that order, with noise drawn from `seed`.
pub fn boundary_scenarios(seed: u64) -> Vec<BoundaryScenario> {
    let x = grid();
    let mut rng = substream(seed, Stream::ScenarioNoise);
    BoundaryKind::ALL
        .iter()
        .map(|&kind| {
            let (surface, query) = layout(kind);
            let y = DVector::from_fn(x.nrows(), |i, _| {
                let xi = [x[(i, 0)], x[(i, 1)]];
                surface.value(&xi) + SCENARIO_NOISE_SD * rng.sample::<f64, _>(StandardNormal)
            });
            let truth = surface.value(&query);
            BoundaryScenario {
                kind,
                train: Dataset::new(x.clone(), y).expect("grid dataset is well formed"),
                surface,
                query,
                truth,
                neighbors: SCENARIO_NEIGHBORS,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::select_neighbors;
    use std::collections::BTreeSet;

    fn neighbor_regions(s: &BoundaryScenario) -> Vec<usize> {
        let nb = select_neighbors(&s.train, &s.query, s.neighbors).unwrap();
        nb.indices.iter().map(|&i| s.surface.region(&s.train.row(i))).collect()
    }

    #[test]
    fn interior_neighbors_share_the_query_region() {
        let s = &boundary_scenarios(1)[0];
        let own = s.surface.region(&s.query);
        assert!(neighbor_regions(s).iter().all(|&r| r == own));
    }

    #[test]
    fn simple_boundary_is_contaminated() {
        let s = &boundary_scenarios(1)[1];
        let own = s.surface.region(&s.query);
        let foreign = neighbor_regions(s).iter().filter(|&&r| r != own).count();
        assert!(foreign * 5 >= s.neighbors, "{foreign} foreign neighbors");
        assert!(foreign * 2 < s.neighbors);
    }

    #[test]
    fn complex_boundary_mixes_three_or_more_regions() {
        let s = &boundary_scenarios(1)[2];
        let regions = neighbor_regions(s);
        let distinct: BTreeSet<_> = regions.iter().collect();
        assert!(distinct.len() >= 3);
        let own = s.surface.region(&s.query);
        assert!(regions.iter().filter(|&&r| r == own).count() * 2 > s.neighbors);
    }

    #[test]
    fn seed_changes_only_the_noise() {
        let a = boundary_scenarios(3);
        let b = boundary_scenarios(4);
        assert_eq!(a[1].train.x(), b[1].train.x());
        assert_ne!(a[1].train.y(), b[1].train.y());
        assert_eq!(a[1].truth, b[1].truth);
        assert_eq!(boundary_scenarios(3)[2].train, a[2].train);
    }
}
