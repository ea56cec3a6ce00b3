//! Datasets, coefficient truth, and the selected/unselected column partition.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Observed design matrix and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    design: DMatrix<T>,
    response: DVector<T>,
    names: Vec<String>,
}

impl<T: Real> Dataset<T> {
    pub fn new(design: DMatrix<T>, response: DVector<T>, names: Vec<String>) -> Result<Self> {
        let (n, p) = design.shape();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidData("need at least one predictor column".into()));
        }
        if response.len() != n {
            return Err(Error::InvalidData(format!(
                "response has {} entries but design has {n} rows",
                response.len()
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidData(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        for j in 0..p {
            for i in 0..n {
                if !design[(i, j)].is_finite() {
                    return Err(Error::InvalidData(format!(
                        "non-finite value at observation {}, column `{}`",
                        i + 1,
                        names[j]
                    )));
                }
            }
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite response at observation {}",
                i + 1
            )));
        }
        Ok(Self {
            design,
            response,
            names,
        })
    }

    /// Builds a dataset with generated column names `x1..xp`.
    pub fn from_parts(design: DMatrix<T>, response: DVector<T>) -> Result<Self> {
        let names = (1..=design.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(design, response, names)
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.design
    }

    pub fn response(&self) -> &DVector<T> {
        &self.response
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let design = self.design.select_columns(columns);
        let names = columns.iter().map(|&j| self.names[j].clone()).collect();
        Self::new(design, self.response.clone(), names)
    }

    /// Replaces the response, keeping the design.
    pub fn with_response(&self, response: DVector<T>) -> Result<Self> {
        Self::new(self.design.clone(), response, self.names.clone())
    }

    /// Scales every column so that `n⁻¹‖x_j‖² = 1`, returning the divisors.
    ///
    /// Columns are not centered and the response is left untouched.
    pub fn standardize(&self) -> Result<(Self, Vec<T>)> {
        let n = T::from_count(self.n());
        let mut design = self.design.clone();
        let mut scales = Vec::with_capacity(self.p());
        for (j, mut col) in design.column_iter_mut().enumerate() {
            let rms = (col.norm_squared() / n).sqrt();
            if !(rms > T::zero()) {
                return Err(Error::ZeroColumn(self.names[j].clone()));
            }
            col /= rms;
            scales.push(rms);
        }
        let out = Self {
            design,
            response: self.response.clone(),
            names: self.names.clone(),
        };
        Ok((out, scales))
    }
}

/// Applies stored standardization divisors to a raw design matrix.
pub fn apply_scales<T: Real>(design: &DMatrix<T>, scales: &[T]) -> DMatrix<T> {
    let mut out = design.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    out
}

/// Maps standardized-scale coefficients back to the raw column scale.
pub fn unscale_coefficients<T: Real>(coef: &DVector<T>, scales: &[T]) -> DVector<T> {
    DVector::from_iterator(coef.len(), coef.iter().zip(scales).map(|(b, s)| *b / *s))
}

/// True coefficient vector with its large-coefficient support.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTruth<T: Real> {
    pub beta: DVector<T>,
    /// Sorted, zero-based.
    pub significant_set: Vec<usize>,
}

impl<T: Real> CoefficientTruth<T> {
    pub fn new(beta: DVector<T>, mut significant_set: Vec<usize>) -> Result<Self> {
        significant_set.sort_unstable();
        significant_set.dedup();
        if let Some(&j) = significant_set.iter().find(|&&j| j >= beta.len()) {
            return Err(Error::InvalidArgument(format!(
                "significant index {j} out of range for p = {}",
                beta.len()
            )));
        }
        Ok(Self { beta, significant_set })
    }

    pub fn at(&self, indices: &[usize]) -> DVector<T> {
        DVector::from_iterator(indices.len(), indices.iter().map(|&j| self.beta[j]))
    }
}

/// Split of the columns into selected (`Z`) and unselected (`U`) blocks.
#[derive(Debug, Clone)]
pub struct ModelPartition<T: Real> {
    pub selected: Vec<usize>,
    pub unselected: Vec<usize>,
    pub z: DMatrix<T>,
    pub u: DMatrix<T>,
}

impl<T: Real> ModelPartition<T> {
    pub fn new(design: &DMatrix<T>, selected: &[usize]) -> Result<Self> {
        let p = design.ncols();
        let mut sel = selected.to_vec();
        sel.sort_unstable();
        sel.dedup();
        if sel.is_empty() {
            return Err(Error::InvalidArgument(
                "partition needs at least one selected column".into(),
            ));
        }
        if let Some(&j) = sel.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidArgument(format!(
                "selected index {j} out of range for p = {p}"
            )));
        }
        let unselected: Vec<usize> = (0..p).filter(|j| sel.binary_search(j).is_err()).collect();
        Ok(Self {
            z: design.select_columns(&sel),
            u: design.select_columns(&unselected),
            selected: sel,
            unselected,
        })
    }

    pub fn q(&self) -> usize {
        self.selected.len()
    }
}

/// Reads a comma-delimited table with a header row into column names and values.
///
/// Row numbers in errors count the header as row 1.
pub fn read_table<T: Real>(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Err(Error::InvalidData("empty header row".into()));
    }
    let width = header.len();
    let mut values: Vec<T> = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                return Err(Error::Parse {
                    row,
                    column: String::new(),
                    message: e.to_string(),
                })
            }
        };
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let parsed: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[j].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[j].clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(T::lit(parsed));
        }
        rows += 1;
    }
    Ok((header, DMatrix::from_row_slice(rows, width, &values)))
}

/// Loads a dataset from CSV. The response is the named column, or the last
/// column when `response` is `None`.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, response: Option<&str>) -> Result<Dataset<T>> {
    let (header, table) = read_table::<T>(path)?;
    if header.len() < 2 {
        return Err(Error::InvalidData(
            "need at least one predictor and a response column".into(),
        ));
    }
    let target = match response {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("no response column named `{name}`")))?,
        None => header.len() - 1,
    };
    if table.nrows() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 observations, got {}",
            table.nrows()
        )));
    }
    let predictors: Vec<usize> = (0..header.len()).filter(|&j| j != target).collect();
    let names = predictors.iter().map(|&j| header[j].clone()).collect();
    let design = table.select_columns(&predictors);
    let response = table.column(target).into_owned();
    log::info!("loaded {} rows x {} predictor columns", design.nrows(), design.ncols());
    Dataset::new(design, response, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_small_table() {
        let f = write_tmp("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d: Dataset<f64> = load_csv(f.path(), None).unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.names(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(d.response()[2], 9.0);
        assert_eq!(d.design()[(1, 1)], 5.0);
    }

    #[test]
    fn named_response_column() {
        let f = write_tmp("y,a,b\n1,2,3\n4,5,6\n");
        let d: Dataset<f64> = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(d.names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.response()[1], 4.0);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let f = write_tmp("x1,x2,y\nNaN,2,3\n4,5,6\n");
        let err = load_csv::<f64>(f.path(), None).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows_fail() {
        let f = write_tmp("x1,y\n1,2\n3\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), None),
            Err(Error::Parse { row: 3, .. })
        ));
        let f = write_tmp("x1,y\n1,2\nfoo,3\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), None),
            Err(Error::Parse { row: 3, .. })
        ));
        let f = write_tmp("x1,y\n1,2\n");
        assert!(load_csv::<f64>(f.path(), None).is_err());
    }

    #[test]
    fn experiment_one_shape() {
        let mut s = String::new();
        let header: Vec<String> = (1..=100).map(|j| format!("x{j}")).chain(["y".into()]).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for i in 0..50 {
            let row: Vec<String> = (0..101).map(|j| format!("{}", (i * 101 + j) % 7)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        let f = write_tmp(&s);
        let d: Dataset<f64> = load_csv(f.path(), None).unwrap();
        assert_eq!((d.n(), d.p()), (50, 100));
    }

    #[test]
    fn standardize_constant_and_identity_columns() {
        let x = DMatrix::<f64>::from_column_slice(4, 2, &[2.0, 2.0, 2.0, 2.0, 1.0, -1.0, 1.0, -1.0]);
        let d = Dataset::from_parts(x, DVector::from_element(4, 1.0)).unwrap();
        let (s, scales) = d.standardize().unwrap();
        assert_eq!(scales, vec![2.0, 1.0]);
        assert!(s.design().column(0).iter().all(|v| (*v - 1.0).abs() < 1e-15));
        assert_eq!(s.design().column(1), d.design().column(1));
    }

    #[test]
    fn standardize_rejects_zero_column() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        let d = Dataset::from_parts(x, DVector::zeros(3)).unwrap();
        match d.standardize() {
            Err(Error::ZeroColumn(name)) => assert_eq!(name, "x2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partition_splits_columns() {
        let x = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let part = ModelPartition::new(&x, &[2, 0]).unwrap();
        assert_eq!(part.selected, vec![0, 2]);
        assert_eq!(part.unselected, vec![1, 3]);
        assert_eq!(part.z.column(1), x.column(2));
        assert_eq!(part.u.column(1), x.column(3));
        assert!(ModelPartition::new(&x, &[]).is_err());
    }
}
