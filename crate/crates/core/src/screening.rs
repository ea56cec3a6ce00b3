//! Sure independence screening by absolute marginal correlation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DVector;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult<T: Real> {
    /// Kept column indices, in decreasing score order (ties by lowest index).
    pub ranked: Vec<usize>,
    /// `|x_jᵀY| / n` for every original column.
    pub scores: DVector<T>,
}

impl<T: Real> ScreenResult<T> {
    /// Kept indices sorted ascending.
    pub fn kept(&self) -> Vec<usize> {
        let mut k = self.ranked.clone();
        k.sort_unstable();
        k
    }
}

/// Keeps the `d_keep` columns with the largest `|x_jᵀY|/n`. Columns are
/// expected to be standardized already.
pub fn sis_screen<T: Real>(d: &Dataset<T>, d_keep: usize) -> Result<ScreenResult<T>> {
    if d_keep == 0 || d_keep > d.p() {
        return Err(Error::InvalidArgument(format!(
            "screening size {d_keep} must lie in 1..={}",
            d.p()
        )));
    }
    let n = T::from_count(d.n());
    let scores = (d.design().transpose() * d.response()).map(|v| v.abs() / n);
    let mut order: Vec<usize> = (0..d.p()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(d_keep);
    Ok(ScreenResult { ranked: order, scores })
}
