//! Versioned JSON form of a [`FittedModel`].

use crate::error::{Error, Result};
use crate::pipeline::FittedModel;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ARTIFACT_KIND: &str = "nonsparse-fit";
pub const ARTIFACT_VERSION: u32 = 1;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl StoredMatrix {
    fn of<T: Real>(m: &DMatrix<T>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)].as_f64()))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn to<T: Real>(&self, what: &str) -> Result<DMatrix<T>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidData(format!(
                "artifact matrix `{what}` declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| T::lit(v)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub kind: String,
    pub version: u32,
    pub names: Vec<String>,
    pub x_means: Vec<f64>,
    pub y_mean: f64,
    pub scales: Vec<f64>,
    pub selected: Vec<usize>,
    pub unselected: Vec<usize>,
    pub d_pseudo: usize,
    pub theta: Vec<f64>,
    pub theta_classic: Vec<f64>,
    /// Raw-scale `θ̂`, informational only.
    pub theta_raw: Vec<f64>,
    pub alpha: Vec<f64>,
    pub transform: StoredMatrix,
    pub bandwidth: f64,
    pub kernel_order: usize,
    pub leave_one_out: bool,
    pub train_v: StoredMatrix,
    pub train_target: Vec<f64>,
    pub g_bar: f64,
}

fn vec_of<T: Real>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.as_f64()).collect()
}

fn dvec<T: Real>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| T::lit(x)))
}

impl ModelArtifact {
    pub fn from_model<T: Real>(m: &FittedModel<T>) -> Self {
        Self {
            kind: ARTIFACT_KIND.into(),
            version: ARTIFACT_VERSION,
            names: m.names.clone(),
            x_means: vec_of(m.x_means.iter().copied()),
            y_mean: m.y_mean.as_f64(),
            scales: vec_of(m.scales.iter().copied()),
            selected: m.selected.clone(),
            unselected: m.unselected.clone(),
            d_pseudo: m.d_pseudo,
            theta: vec_of(m.theta.iter().copied()),
            theta_classic: vec_of(m.theta_classic.iter().copied()),
            theta_raw: vec_of(m.theta_raw().iter().copied()),
            alpha: vec_of(m.alpha.iter().copied()),
            transform: StoredMatrix::of(&m.transform),
            bandwidth: m.bandwidth.as_f64(),
            kernel_order: m.kernel_order,
            leave_one_out: m.leave_one_out,
            train_v: StoredMatrix::of(&m.train_v),
            train_target: vec_of(m.train_target.iter().copied()),
            g_bar: m.g_bar.as_f64(),
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidData(format!("fit artifact: {msg}")));
        if self.kind != ARTIFACT_KIND {
            return bad(format!("unexpected kind `{}`", self.kind));
        }
        if self.version != ARTIFACT_VERSION {
            return bad(format!(
                "unsupported version {} (expected {ARTIFACT_VERSION})",
                self.version
            ));
        }
        let p = self.scales.len();
        if self.names.len() != p || self.x_means.len() != p {
            return bad(format!(
                "{} names and {} means for {p} columns",
                self.names.len(),
                self.x_means.len()
            ));
        }
        if self.selected.iter().chain(&self.unselected).any(|&j| j >= p) {
            return bad("column index out of range".into());
        }
        if self.theta.len() != self.selected.len() || self.theta_classic.len() != self.selected.len() {
            return bad("coefficient length does not match the selected set".into());
        }
        if self.alpha.len() != self.unselected.len() {
            return bad("alpha length does not match the unselected set".into());
        }
        if self.train_v.rows != self.train_target.len() {
            return bad("training V and target disagree on row count".into());
        }
        Ok(())
    }

    pub fn into_model<T: Real>(self) -> Result<FittedModel<T>> {
        self.check()?;
        Ok(FittedModel {
            transform: self.transform.to("transform")?,
            train_v: self.train_v.to("train_v")?,
            x_means: self.x_means.iter().map(|&v| T::lit(v)).collect(),
            y_mean: T::lit(self.y_mean),
            scales: self.scales.iter().map(|&v| T::lit(v)).collect(),
            theta: dvec(&self.theta),
            theta_classic: dvec(&self.theta_classic),
            alpha: dvec(&self.alpha),
            bandwidth: T::lit(self.bandwidth),
            train_target: dvec(&self.train_target),
            g_bar: T::lit(self.g_bar),
            names: self.names,
            selected: self.selected,
            unselected: self.unselected,
            d_pseudo: self.d_pseudo,
            kernel_order: self.kernel_order,
            leave_one_out: self.leave_one_out,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("cannot serialize fit: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidData(format!("fit artifact: {e}")))
    }
}

pub fn save_model<T: Real>(model: &FittedModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ModelArtifact::from_model(model).to_json()?).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<FittedModel<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    ModelArtifact::from_json(&text)?.into_model()
}
