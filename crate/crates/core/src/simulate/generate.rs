//! Coefficient truth and Gaussian AR(1)-type designs.

use super::config::{CellConfig, Noise, TailLaw};
use super::rng::{replicate_stream, substream, Purpose};
use crate::data::{CoefficientTruth, Dataset};
use crate::error::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Mean of the non-significant coordinates.
pub const OFFSET_MEAN: f64 = 2.0;
pub const TAIL_LOW: f64 = -0.5;
pub const TAIL_HIGH: f64 = 0.15;

/// Significant coefficients at their positions plus a tail drawn once per
/// `(master_seed, p)` and shared by every cell and replicate.
pub fn generate_truth(cell: &CellConfig, master_seed: u64) -> Result<CoefficientTruth<f64>> {
    let p = cell.p;
    let mut beta = DVector::zeros(p);
    if cell.tail == TailLaw::NonsparseUniform {
        let mut rng = substream(master_seed, &[Purpose::Truth as u64, p as u64]);
        let law = Uniform::new(TAIL_LOW, TAIL_HIGH).expect("valid bounds");
        for b in beta.iter_mut() {
            *b = law.sample(&mut rng).max(0.0);
        }
    }
    let significant: Vec<usize> = cell.beta_positions.iter().map(|&j| j - 1).collect();
    for (&j, &v) in significant.iter().zip(&cell.beta_values) {
        beta[j] = v;
    }
    CoefficientTruth::new(beta, significant)
}

/// `Σ_ij = (−ρ)^{|i−j|}`.
pub fn population_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| (-rho).powi(i.abs_diff(j) as i32))
}

/// `βᵀΣβ`, the variance of the linear signal.
pub fn signal_variance(beta: &DVector<f64>, rho: f64) -> f64 {
    let sigma = population_covariance(beta.len(), rho);
    (beta.transpose() * sigma * beta)[0]
}

/// Noise standard deviation for the cell: given directly, or solved from
/// `R² = βᵀΣβ / (βᵀΣβ + σ²)`.
pub fn noise_sd(cell: &CellConfig, truth: &CoefficientTruth<f64>) -> f64 {
    match cell.noise {
        Noise::Sigma(s) => s,
        Noise::RSquared(r) => (signal_variance(&truth.beta, cell.rho) * (1.0 - r) / r).sqrt(),
    }
}

/// Rows of `N(μ, Σ)` through `x_{j+1} = −ρ x_j + √(1−ρ²) ζ_j`, then shifted by `μ`.
pub fn sample_design<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, rho: f64, mean: &[f64]) -> DMatrix<f64> {
    let scale = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = StandardNormal.sample(rng);
        x[(i, 0)] = prev;
        for j in 1..p {
            let z: f64 = StandardNormal.sample(rng);
            prev = -rho * prev + scale * z;
            x[(i, j)] = prev;
        }
    }
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(mean[j]);
    }
    x
}

pub fn design_mean(truth: &CoefficientTruth<f64>) -> Vec<f64> {
    let mut mu = vec![OFFSET_MEAN; truth.beta.len()];
    for &j in &truth.significant_set {
        mu[j] = 0.0;
    }
    mu
}

fn draw<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    cell: &CellConfig,
    truth: &CoefficientTruth<f64>,
    sigma: f64,
) -> Result<Dataset<f64>> {
    let x = sample_design(rng, n, cell.p, cell.rho, &design_mean(truth));
    let eps = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    });
    let y = &x * &truth.beta + eps;
    Dataset::from_parts(x, y)
}

/// Training and test sets for one attempt at one replicate.
pub fn generate_replicate(
    cell: &CellConfig,
    truth: &CoefficientTruth<f64>,
    sigma: f64,
    master_seed: u64,
    cell_index: usize,
    replicate: usize,
    attempt: usize,
) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let mut train_rng = replicate_stream(master_seed, cell_index, replicate, attempt, Purpose::Train);
    let mut test_rng = replicate_stream(master_seed, cell_index, replicate, attempt, Purpose::Test);
    Ok((
        draw(&mut train_rng, cell.n, cell, truth, sigma)?,
        draw(&mut test_rng, cell.test_size, cell, truth, sigma)?,
    ))
}
