//! Product-kernel Nadaraya–Watson smoothing.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Denominators below this are treated as underflow.
const UNDERFLOW: f64 = 1e-300;

/// One-dimensional Gaussian-based kernel of the given (even) order.
///
/// Order 2 is the standard normal density; orders 4 and 6 multiply it by the
/// usual polynomial corrections that cancel the second (and fourth) moments.
pub fn kernel<T: Real>(order: usize, u: T) -> T {
    let u2 = u * u;
    let phi = (-u2 * T::lit(0.5)).exp() / T::two_pi().sqrt();
    match order {
        4 => phi * (T::lit(3.0) - u2) * T::lit(0.5),
        6 => phi * (T::lit(15.0) - T::lit(10.0) * u2 + u2 * u2) / T::lit(8.0),
        _ => phi,
    }
}

/// Normalized kernel weights for a single query point.
#[derive(Debug, Clone)]
pub struct KernelWeights<T: Real> {
    pub weights: Vec<T>,
    /// Set when the kernel mass underflowed and all weight went to the
    /// nearest sample point.
    pub boundary: bool,
}

#[derive(Debug, Clone)]
pub struct KernelSmoother<T: Real> {
    points: DMatrix<T>,
    active: Vec<usize>,
    bandwidth: T,
    kernel_order: usize,
    leave_one_out: bool,
}

impl<T: Real> KernelSmoother<T> {
    /// Coordinates that are constant across all points contribute the same
    /// factor to every kernel term and are skipped.
    pub fn new(points: DMatrix<T>, bandwidth: T, kernel_order: usize) -> Result<Self> {
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !matches!(kernel_order, 2 | 4 | 6) {
            return Err(Error::InvalidArgument(format!(
                "kernel order must be 2, 4 or 6, got {kernel_order}"
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::InvalidArgument("smoother needs at least one point".into()));
        }
        let active = non_constant_columns(&points);
        Ok(Self {
            points,
            active,
            bandwidth,
            kernel_order,
            leave_one_out: false,
        })
    }

    pub fn with_leave_one_out(mut self, on: bool) -> Self {
        self.leave_one_out = on;
        self
    }

    pub fn points(&self) -> &DMatrix<T> {
        &self.points
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn kernel_order(&self) -> usize {
        self.kernel_order
    }

    pub fn leave_one_out(&self) -> bool {
        self.leave_one_out
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    /// `L_H(V_k − v)` for one sample point.
    fn product_kernel(&self, k: usize, v: &[T]) -> T {
        let h = self.bandwidth;
        let mut val = T::one();
        for &c in &self.active {
            val *= kernel(self.kernel_order, (self.points[(k, c)] - v[c]) / h) / h;
        }
        val
    }

    fn weights_excluding(&self, v: &[T], exclude: Option<usize>) -> KernelWeights<T> {
        let n = self.n();
        let mut w = vec![T::zero(); n];
        let mut total = T::zero();
        for (k, wk) in w.iter_mut().enumerate() {
            if Some(k) == exclude {
                continue;
            }
            *wk = self.product_kernel(k, v);
            total += *wk;
        }
        if total.abs() < T::lit(UNDERFLOW) || !total.is_finite() {
            let mut best: Option<(usize, T)> = None;
            for k in 0..n {
                if Some(k) == exclude {
                    continue;
                }
                let dist = self.active.iter().fold(T::zero(), |a, &c| {
                    let diff = self.points[(k, c)] - v[c];
                    a + diff * diff
                });
                if best.is_none_or(|(_, d)| dist < d) {
                    best = Some((k, dist));
                }
            }
            w.iter_mut().for_each(|x| *x = T::zero());
            if let Some((k, _)) = best {
                w[k] = T::one();
            }
            return KernelWeights {
                weights: w,
                boundary: true,
            };
        }
        w.iter_mut().for_each(|x| *x /= total);
        KernelWeights {
            weights: w,
            boundary: false,
        }
    }

    /// Weights `L_H(V_i − v) / Σ_k L_H(V_k − v)` at an arbitrary query point.
    pub fn weights(&self, v: &[T]) -> Result<KernelWeights<T>> {
        if v.len() != self.points.ncols() {
            return Err(Error::InvalidArgument(format!(
                "query has {} coordinates, smoother expects {}",
                v.len(),
                self.points.ncols()
            )));
        }
        Ok(self.weights_excluding(v, None))
    }

    /// Row `i` holds the weights used to smooth at training point `i`
    /// (the point itself is dropped when leave-one-out is on).
    pub fn training_weights(&self) -> (DMatrix<T>, usize) {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        let mut boundary = 0;
        for i in 0..n {
            let v: Vec<T> = self.points.row(i).iter().copied().collect();
            let exclude = if self.leave_one_out && n > 1 { Some(i) } else { None };
            let kw = self.weights_excluding(&v, exclude);
            boundary += kw.boundary as usize;
            for (k, w) in kw.weights.into_iter().enumerate() {
                out[(i, k)] = w;
            }
        }
        (out, boundary)
    }

    /// Smooth of `values` evaluated at `v`.
    pub fn smooth_at(&self, values: &DVector<T>, v: &[T]) -> Result<(T, bool)> {
        let kw = self.weights(v)?;
        let est = kw
            .weights
            .iter()
            .zip(values.iter())
            .fold(T::zero(), |a, (w, y)| a + *w * *y);
        Ok((est, kw.boundary))
    }
}

/// Free-function form of [`KernelSmoother::weights`].
pub fn product_kernel_weights<T: Real>(sm: &KernelSmoother<T>, v: &[T]) -> Result<KernelWeights<T>> {
    sm.weights(v)
}

pub(crate) fn non_constant_columns<T: Real>(m: &DMatrix<T>) -> Vec<usize> {
    (0..m.ncols())
        .filter(|&j| {
            let col = m.column(j);
            col.max() > col.min()
        })
        .collect()
}

/// Rate-optimal bandwidth `h = c_h · s̄ · n^{−1/(2k + r + 1)}`, where `r + 1`
/// is the number of columns of `v` and `s̄` the geometric mean of the column
/// standard deviations.
pub fn default_bandwidth<T: Real>(v: &DMatrix<T>, kernel_order: usize, scale: T) -> Result<T> {
    let (n, dim) = v.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("bandwidth needs at least 2 observations".into()));
    }
    if !(scale > T::zero()) {
        return Err(Error::InvalidArgument("bandwidth scale must be positive".into()));
    }
    if dim == 0 {
        return Ok(scale);
    }
    let nn = T::from_count(n);
    let mut log_sum = T::zero();
    for j in 0..dim {
        let col = v.column(j);
        let mean = col.mean();
        let var = col.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean)) / (nn - T::one());
        if !(var > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "adjustment variable coordinate {j} has zero variance"
            )));
        }
        log_sum += var.sqrt().ln();
    }
    let s_bar = (log_sum / T::from_count(dim)).exp();
    let exponent = -T::one() / T::from_count(2 * kernel_order + dim);
    Ok(scale * s_bar * nn.powf(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn isolated_query_takes_all_mass() {
        let pts = dmatrix![0.0f64; 10.0; 20.0; -15.0];
        let sm = KernelSmoother::new(pts, 0.5, 2).unwrap();
        let w = sm.weights(&[0.0]).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-12);
        assert!(!w.boundary);
    }

    #[test]
    fn symmetric_points_share_weight() {
        let pts = dmatrix![-1.0f64, 2.0; 1.0, 2.0];
        let sm = KernelSmoother::new(pts, 0.7, 2).unwrap();
        let w = sm.weights(&[0.0, 2.0]).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-15);
        assert!((w.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn underflow_falls_back_to_nearest_neighbour() {
        let pts = dmatrix![0.0; 1.0; 2.0];
        let sm = KernelSmoother::new(pts, 1e-3, 2).unwrap();
        let w = sm.weights(&[1.4]).unwrap();
        assert!(w.boundary);
        assert_eq!(w.weights, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_coordinates_are_ignored() {
        let pts = dmatrix![0.0f64, 0.0; 0.0, 1.0; 0.0, 2.0];
        let sm = KernelSmoother::new(pts.clone(), 0.8, 2).unwrap();
        assert_eq!(sm.active_columns(), &[1]);
        let one_d = KernelSmoother::new(pts.columns(1, 1).into_owned(), 0.8, 2).unwrap();
        let a = sm.weights(&[0.0, 0.7]).unwrap().weights;
        let b = one_d.weights(&[0.7]).unwrap().weights;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn higher_order_kernels_integrate_to_one() {
        for order in [2, 4, 6] {
            let step = 1e-3;
            let mut total = 0.0;
            let mut second = 0.0;
            let mut u = -12.0;
            while u <= 12.0 {
                let k: f64 = kernel(order, u);
                total += k * step;
                second += u * u * k * step;
                u += step;
            }
            assert!((total - 1.0).abs() < 1e-6, "order {order}");
            if order > 2 {
                assert!(second.abs() < 1e-6, "order {order}");
            }
        }
    }

    #[test]
    fn bandwidth_formula_and_scale_equivariance() {
        let v = DMatrix::from_fn(50, 2, |i, j| ((i * 13 + j * 7) % 11) as f64 + j as f64 * 0.1 * i as f64);
        let h = default_bandwidth(&v, 2, 1.0).unwrap();
        let sds: Vec<f64> = (0..2)
            .map(|j| {
                let c = v.column(j);
                let m = c.mean();
                (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 49.0).sqrt()
            })
            .collect();
        let expected = (sds[0] * sds[1]).sqrt() * 50f64.powf(-1.0 / 6.0);
        assert!((h - expected).abs() < 1e-12);
        let h2 = default_bandwidth(&(v * 2.0), 2, 1.0).unwrap();
        assert!((h2 - 2.0 * h).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_two_dimensional_adjustment_exponent() {
        // n = 50, two adjustment coordinates, k = 2: exponent −1/6.
        let v = DMatrix::from_fn(50, 2, |i, j| if j == 0 { (i % 5) as f64 } else { (i % 7) as f64 });
        let h = default_bandwidth(&v, 2, 1.0).unwrap();
        let sd = |m: usize| {
            let c: Vec<f64> = (0..50).map(|i| (i % m) as f64).collect();
            let mean = c.iter().sum::<f64>() / 50.0;
            (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0).sqrt()
        };
        let expected = (sd(5) * sd(7)).sqrt() * 50f64.powf(-1.0 / 6.0);
        assert!((h - expected).abs() < 1e-12);
        let one = DMatrix::from_fn(50, 1, |i, _| (i % 5) as f64);
        let h1 = default_bandwidth(&one, 2, 1.0).unwrap();
        assert!((h1 - sd(5) * 50f64.powf(-1.0 / 5.0)).abs() < 1e-12);
        let two_plus = DMatrix::from_fn(50, 3, |i, j| ((i * (j + 2)) % (j + 5)) as f64);
        let h3 = default_bandwidth(&two_plus, 2, 1.0).unwrap();
        assert!(h3 > 0.0);
    }

    #[test]
    fn bandwidth_rejects_degenerate_coordinate() {
        let v = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        assert!(default_bandwidth(&v, 2, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let pts = dmatrix![0.0; 1.0];
        assert!(KernelSmoother::new(pts.clone(), 0.0, 2).is_err());
        assert!(KernelSmoother::new(pts.clone(), 1.0, 3).is_err());
        let sm = KernelSmoother::new(pts, 1.0, 2).unwrap();
        assert!(sm.weights(&[0.0, 1.0]).is_err());
    }
}
