//! Two-region partitioned GP surfaces in `[-0.5, 0.5]^d`.
//!
//! `f = f1` on `{aᵀx ≥ 0}` and `f = f2` elsewhere, where `f1` and `f2` are
//! independent GP draws with covariance `7 exp(-0.1d ‖xi − xj‖²)` and means
//! 0 and 11. Training responses carry Gaussian noise of variance 3.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::design::lhs_with;
use super::{substream, Stream};
use crate::error::{Result, RlgpError};
use crate::kernel::pairwise_sq_dist;
use crate::neighborhood::Dataset;

const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub d: usize,
    /// Hyperplane normal with entries in `{-1, +1}`.
    pub a: Vec<f64>,
    pub region1_mean: f64,
    pub region2_mean: f64,
    pub variance: f64,
    pub noise_variance: f64,
    /// Concentration of the generating kernel, `0.1 d`.
    pub vartheta: f64,
}

impl PartitionSpec {
    /// Standard settings with the hyperplane drawn from the seed.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::Hyperplane);
        let a = (0..d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self::with_normal(a)
    }

    pub fn with_normal(a: Vec<f64>) -> Self {
        let d = a.len();
        Self {
            d,
            a,
            region1_mean: 0.0,
            region2_mean: 11.0,
            variance: 7.0,
            noise_variance: 3.0,
            vartheta: 0.1 * d as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d >= 1
            && self.a.len() == self.d
            && self.a.iter().all(|v| *v == 1.0 || *v == -1.0)
            && self.variance > 0.0
            && self.noise_variance > 0.0
            && self.vartheta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(RlgpError::InvalidArgument(format!("invalid partition spec {self:?}")))
        }
    }

    /// True on the `f1` side of the hyperplane.
    pub fn in_region1(&self, x: &[f64]) -> bool {
        self.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() >= 0.0
    }
}

/// One draw of the experiment.
#[derive(Debug, Clone)]
pub struct PartitionedSample {
    pub spec: PartitionSpec,
    pub train: Dataset,
    /// Test inputs with noisy responses.
    pub test: Dataset,
    /// Noiseless surface at the test inputs.
    pub truth: Vec<f64>,
    /// Noiseless surface at the training inputs.
    pub train_truth: Vec<f64>,
}

/// `variance · exp(-ϑ D)` over the given sites (no jitter).
pub fn partition_covariance(spec: &PartitionSpec, sites: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = pairwise_sq_dist(sites)?;
    Ok(d.as_matrix().map(|v| spec.variance * (-spec.vartheta * v).exp()))
}

fn normals<R: Rng>(rng: &mut R, n: usize) -> impl Iterator<Item = f64> + '_ {
    (0..n).map(move |_| rng.sample::<f64, _>(StandardNormal))
}

/// Draws training and test data from the partitioned surface.
///
/// `f1` and `f2` are sampled jointly over train and test sites from one
/// Cholesky factor with train sites first, so the training draws do not
/// depend on `n_test`.
pub fn sample_partitioned_gp(
    spec: &PartitionSpec,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<PartitionedSample> {
    spec.validate()?;
    if n_train == 0 || n_test == 0 {
        return Err(RlgpError::InvalidArgument("need at least one train and one test point".into()));
    }
    let d = spec.d;
    let x_train = lhs_with(&mut substream(seed, Stream::TrainDesign), n_train, d);
    let x_test = lhs_with(&mut substream(seed, Stream::TestDesign), n_test, d);
    let total = n_train + n_test;
    let sites = DMatrix::from_fn(total, d, |i, k| {
        if i < n_train {
            x_train[(i, k)]
        } else {
            x_test[(i - n_train, k)]
        }
    });

    let mut k = partition_covariance(spec, &sites)?;
    for i in 0..total {
        k[(i, i)] += JITTER;
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        RlgpError::Numerical(format!("covariance draw failed for {total} sites"))
    })?;
    let l = chol.l();

    let draw = |train_stream: Stream, test_stream: Stream| -> DVector<f64> {
        let mut z: Vec<f64> = normals(&mut substream(seed, train_stream), n_train).collect();
        z.extend(normals(&mut substream(seed, test_stream), n_test));
        &l * DVector::from_vec(z)
    };
    let f1 = draw(Stream::F1Train, Stream::F1Test);
    let f2 = draw(Stream::F2Train, Stream::F2Test);

    let noise_sd = spec.noise_variance.sqrt();
    let surface = |i: usize| {
        let x: Vec<f64> = sites.row(i).iter().copied().collect();
        if spec.in_region1(&x) {
            spec.region1_mean + f1[i]
        } else {
            spec.region2_mean + f2[i]
        }
    };

    let train_truth: Vec<f64> = (0..n_train).map(surface).collect();
    let mut train_noise = substream(seed, Stream::TrainNoise);
    let y_train: Vec<f64> = train_truth
        .iter()
        .map(|t| t + noise_sd * train_noise.sample::<f64, _>(StandardNormal))
        .collect();
    let truth: Vec<f64> = (n_train..total).map(surface).collect();
    let mut test_noise = substream(seed, Stream::TestNoise);
    let y_test: Vec<f64> = truth
        .iter()
        .map(|t| t + noise_sd * test_noise.sample::<f64, _>(StandardNormal))
        .collect();

    Ok(PartitionedSample {
        spec: spec.clone(),
        train: Dataset::new(x_train, DVector::from_vec(y_train))?,
        test: Dataset::new(x_test, DVector::from_vec(y_test))?,
        truth,
        train_truth,
    })
}
