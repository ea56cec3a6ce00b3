//! Partially linear fit `Y = θᵀZ + g(V) + ε` by partial-residual regression.

pub mod kernel;

pub use kernel::{default_bandwidth, kernel, product_kernel_weights, KernelSmoother, KernelWeights};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Which adjustment direction was used to build `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Known or externally supplied `α` (possibly zero).
    PlugAlpha,
    /// `α` taken from the Dantzig fit on the unselected block.
    DantzigAlpha,
    /// Heteroscedastic weighting with per-observation variances.
    Weighted,
}

/// `Y`, `Z` with their kernel smooths removed.
#[derive(Debug, Clone)]
pub struct PartialResiduals<T: Real> {
    pub y: DVector<T>,
    pub z: DMatrix<T>,
    /// Smoothed values `Σ_k w_ik Y_k`.
    pub y_smooth: DVector<T>,
    pub z_smooth: DMatrix<T>,
    pub boundary_count: usize,
}

pub fn partial_residuals<T: Real>(
    y: &DVector<T>,
    z: &DMatrix<T>,
    smoother: &KernelSmoother<T>,
) -> Result<PartialResiduals<T>> {
    let n = smoother.n();
    if y.len() != n || z.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "smoother has {n} points but Y has {} and Z has {} rows",
            y.len(),
            z.nrows()
        )));
    }
    let (w, boundary_count) = smoother.training_weights();
    let y_smooth = &w * y;
    let z_smooth = &w * z;
    Ok(PartialResiduals {
        y: y - &y_smooth,
        z: z - &z_smooth,
        y_smooth,
        z_smooth,
        boundary_count,
    })
}

#[derive(Debug, Clone)]
pub struct SemiparametricFit<T: Real> {
    pub theta: DVector<T>,
    /// `n⁻¹ Σ Ẑ_i Ẑ_iᵀ` (weighted when the fit is weighted).
    pub gram: DMatrix<T>,
    /// `ĝ(V_i)` at the training points.
    pub g_values: DVector<T>,
    /// `Ŷ_i − θᵀẐ_i`.
    pub residuals: DVector<T>,
    pub sigma_v_sq: T,
    pub std_errors: DVector<T>,
    pub mode: FitMode,
    pub boundary_count: usize,
}

impl<T: Real> SemiparametricFit<T> {
    /// Sample mean of `ĝ(V_i)`, the constant used by the simplified predictor.
    pub fn g_mean(&self) -> T {
        if self.g_values.is_empty() {
            T::zero()
        } else {
            self.g_values.mean()
        }
    }
}

fn identifiable_gram<T: Real>(gram: &DMatrix<T>) -> Result<()> {
    let scale = gram.diagonal().amax().max(T::lit(f64::MIN_POSITIVE));
    let min_eig = linalg::min_eigenvalue_sym(gram);
    if !(min_eig > T::lit(1e-10) * scale) {
        return Err(Error::NotIdentifiable(min_eig.as_f64()));
    }
    Ok(())
}

/// Least squares of the partial residuals: `θ̂ = Ŝ⁻¹ n⁻¹ Σ Ẑ_i Ŷ_i`.
pub fn fit_theta<T: Real>(pr: &PartialResiduals<T>, mode: FitMode) -> Result<SemiparametricFit<T>> {
    let n = pr.y.len();
    let nn = T::from_count(n);
    let gram = pr.z.tr_mul(&pr.z) / nn;
    identifiable_gram(&gram)?;
    let rhs = pr.z.tr_mul(&pr.y) / nn;
    let theta = linalg::solve_spd(&gram, &rhs).ok_or(Error::NotIdentifiable(0.0))?;
    let residuals = &pr.y - &pr.z * &theta;
    let sigma_v_sq = residuals.norm_squared() / nn;
    let inv = linalg::inverse_spd(&gram).ok_or(Error::NotIdentifiable(0.0))?;
    let std_errors = inv.diagonal().map(|d| (sigma_v_sq * d / nn).max(T::zero()).sqrt());
    let g_values = &pr.y_smooth - &pr.z_smooth * &theta;
    Ok(SemiparametricFit {
        theta,
        gram,
        g_values,
        residuals,
        sigma_v_sq,
        std_errors,
        mode,
        boundary_count: pr.boundary_count,
    })
}

/// Weighted version with known per-observation error variances.
pub fn fit_theta_weighted<T: Real>(pr: &PartialResiduals<T>, variances: &DVector<T>) -> Result<SemiparametricFit<T>> {
    let n = pr.y.len();
    if variances.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} variances, got {}",
            variances.len()
        )));
    }
    if variances.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidArgument("variances must be positive and finite".into()));
    }
    let nn = T::from_count(n);
    let mut zw = pr.z.clone();
    for (i, v) in variances.iter().enumerate() {
        zw.row_mut(i).scale_mut(T::one() / *v);
    }
    let gram = zw.tr_mul(&pr.z) / nn;
    identifiable_gram(&gram)?;
    let rhs = zw.tr_mul(&pr.y) / nn;
    let theta = linalg::solve_spd(&gram, &rhs).ok_or(Error::NotIdentifiable(0.0))?;
    let residuals = &pr.y - &pr.z * &theta;
    let sigma_v_sq = residuals.norm_squared() / nn;
    let inv = linalg::inverse_spd(&gram).ok_or(Error::NotIdentifiable(0.0))?;
    let std_errors = inv.diagonal().map(|d| (d / nn).max(T::zero()).sqrt());
    let g_values = &pr.y_smooth - &pr.z_smooth * &theta;
    Ok(SemiparametricFit {
        theta,
        gram,
        g_values,
        residuals,
        sigma_v_sq,
        std_errors,
        mode: FitMode::Weighted,
        boundary_count: pr.boundary_count,
    })
}

/// `ĝ(v) = Σ_k w_k(v) (Y_k − θᵀZ_k)`; the flag reports a nearest-neighbour fallback.
pub fn estimate_g<T: Real>(
    smoother: &KernelSmoother<T>,
    y: &DVector<T>,
    z: &DMatrix<T>,
    theta: &DVector<T>,
    v: &[T],
) -> Result<(T, bool)> {
    if z.ncols() != theta.len() {
        return Err(Error::InvalidArgument("θ length does not match Z".into()));
    }
    let target = y - z * theta;
    smoother.smooth_at(&target, v)
}
