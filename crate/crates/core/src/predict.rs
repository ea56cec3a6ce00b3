//! Predictors and evaluation metrics.

use crate::data::{CoefficientTruth, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::FittedModel;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle<T: Real> {
    /// `θ̂ᵀZ + ĝ(V)`.
    pub y_full: DVector<T>,
    /// `θ̂ᵀZ + ḡ`.
    pub y_sub_new: DVector<T>,
    /// Least-squares refit on the selected columns, no offset.
    pub y_sub_classic: DVector<T>,
    pub g_bar: T,
    /// Rows whose kernel mass underflowed and fell back to the nearest neighbour.
    pub boundary_count: usize,
}

/// `θ̂ᵀZ_new + ĝ(V_new)` for raw new rows.
pub fn predict_full<T: Real>(model: &FittedModel<T>, x_raw: &DMatrix<T>) -> Result<(DVector<T>, usize)> {
    let z = model.z_of(x_raw)?;
    let v = model.v_of(x_raw)?;
    let sm = model.smoother()?;
    let mut out = (&z * &model.theta).add_scalar(model.y_mean);
    let mut boundary = 0;
    let mut query = vec![T::zero(); v.ncols()];
    for i in 0..v.nrows() {
        for (c, q) in query.iter_mut().enumerate() {
            *q = v[(i, c)];
        }
        let (g, flag) = sm.smooth_at(&model.train_target, &query)?;
        out[i] += g;
        boundary += flag as usize;
    }
    if boundary > 0 {
        log::warn!("{boundary} prediction rows fell outside the kernel support");
    }
    Ok((out, boundary))
}

/// `θ̂ᵀZ_new + ḡ`; uses no unselected columns beyond the selected ones.
pub fn predict_sub_new<T: Real>(model: &FittedModel<T>, x_raw: &DMatrix<T>) -> Result<DVector<T>> {
    let z = model.z_of(x_raw)?;
    Ok((&z * &model.theta).add_scalar(model.g_bar + model.y_mean))
}

/// Classical refit predictor `θ̃_Sᵀ Z_new`.
pub fn predict_sub_classic<T: Real>(model: &FittedModel<T>, x_raw: &DMatrix<T>) -> Result<DVector<T>> {
    let z = model.z_of(x_raw)?;
    Ok((&z * &model.theta_classic).add_scalar(model.y_mean))
}

pub fn predict_all<T: Real>(model: &FittedModel<T>, x_raw: &DMatrix<T>) -> Result<PredictionBundle<T>> {
    let (y_full, boundary_count) = predict_full(model, x_raw)?;
    Ok(PredictionBundle {
        y_full,
        y_sub_new: predict_sub_new(model, x_raw)?,
        y_sub_classic: predict_sub_classic(model, x_raw)?,
        g_bar: model.g_bar,
        boundary_count,
    })
}

fn mean_sq<T: Real>(a: &DVector<T>, b: &DVector<T>) -> f64 {
    (a - b).norm_squared().as_f64() / a.len() as f64
}

/// Per-replicate quantities that feed an [`EvaluationReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    /// `‖θ̂ − β_Î‖²` on the raw coefficient scale.
    pub mse_new: f64,
    /// Same for the fit that uses the Dantzig `α`.
    pub mse_dantzig_alpha: f64,
    pub mse_classic: f64,
    pub pe_full: f64,
    pub pe_sub_new: f64,
    pub pe_sub_classic: f64,
    pub selected_count: usize,
}

/// Scores one fitted replicate against the truth and a held-out test set.
pub fn replicate_metrics<T: Real>(
    truth: &CoefficientTruth<T>,
    model: &FittedModel<T>,
    theta_dantzig_alpha: &DVector<T>,
    test: &Dataset<T>,
) -> Result<ReplicateMetrics> {
    if test.n() == 0 {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let target = truth.at(&model.selected);
    let sel_scales: Vec<T> = model.selected.iter().map(|&j| model.scales[j]).collect();
    let theta_dz = crate::data::unscale_coefficients(theta_dantzig_alpha, &sel_scales);
    let preds = predict_all(model, test.design())?;
    let y = test.response();
    Ok(ReplicateMetrics {
        mse_new: (model.theta_raw() - &target).norm_squared().as_f64(),
        mse_dantzig_alpha: (theta_dz - &target).norm_squared().as_f64(),
        mse_classic: (model.theta_classic_raw() - &target).norm_squared().as_f64(),
        pe_full: mean_sq(&preds.y_full, y),
        pe_sub_new: mean_sq(&preds.y_sub_new, y),
        pe_sub_classic: mean_sq(&preds.y_sub_classic, y),
        selected_count: model.selected.len(),
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Summary {
                mean: f64::NAN,
                sd: 0.0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub label: String,
    pub mse_new: Summary,
    pub mse_dantzig_alpha: Summary,
    pub mse_classic: Summary,
    pub pe_full: Summary,
    pub pe_sub_new: Summary,
    pub pe_sub_classic: Summary,
    /// Replicates where `PE(Ŷ_S) < PE(Ỹ_S)` strictly.
    pub wins: usize,
    pub tau: f64,
    pub n_replicates: usize,
    /// Replicate draws discarded after a fitting failure.
    pub failed_attempts: usize,
    /// Replicates whose every attempt failed.
    pub failed_replicates: usize,
}

/// Aggregates replicate metrics; ties in the prediction-error comparison count as losses.
pub fn evaluate_cell(label: &str, metrics: &[ReplicateMetrics]) -> Result<EvaluationReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no successful replicates to evaluate".into()));
    }
    if metrics.len() == 1 {
        log::warn!("single replicate in `{label}`; standard deviations reported as 0");
    }
    let s = |f: fn(&ReplicateMetrics) -> f64| Summary::of(metrics.iter().map(f));
    let wins = metrics.iter().filter(|m| m.pe_sub_new < m.pe_sub_classic).count();
    Ok(EvaluationReport {
        label: label.to_owned(),
        mse_new: s(|m| m.mse_new),
        mse_dantzig_alpha: s(|m| m.mse_dantzig_alpha),
        mse_classic: s(|m| m.mse_classic),
        pe_full: s(|m| m.pe_full),
        pe_sub_new: s(|m| m.pe_sub_new),
        pe_sub_classic: s(|m| m.pe_sub_classic),
        wins,
        tau: wins as f64 / metrics.len() as f64,
        n_replicates: metrics.len(),
        failed_attempts: 0,
        failed_replicates: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pe_new: f64, pe_classic: f64) -> ReplicateMetrics {
        ReplicateMetrics {
            mse_new: 0.0,
            mse_dantzig_alpha: 0.0,
            mse_classic: 0.0,
            pe_full: 0.0,
            pe_sub_new: pe_new,
            pe_sub_classic: pe_classic,
            selected_count: 1,
        }
    }

    #[test]
    fn ties_are_losses() {
        let r = evaluate_cell("t", &[m(1.0, 1.0), m(2.0, 2.0)]).unwrap();
        assert_eq!(r.tau, 0.0);
    }

    #[test]
    fn tau_counts_strict_wins() {
        let r = evaluate_cell("t", &[m(1.0, 2.0), m(3.0, 2.0)]).unwrap();
        assert_eq!(r.tau, 0.5);
        assert_eq!(r.wins, 1);
    }

    #[test]
    fn single_replicate_has_zero_spread() {
        let r = evaluate_cell("t", &[m(1.0, 2.0)]).unwrap();
        assert_eq!(r.pe_sub_new.sd, 0.0);
        assert!(evaluate_cell("t", &[]).is_err());
    }

    #[test]
    fn summary_uses_sample_sd() {
        let s = Summary::of([1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 1.0).abs() < 1e-15);
    }
}
