//! Adjustment variable `V = (Uα, W)` with `W = A Z*`.

use crate::data::ModelPartition;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::semiparam::{partial_residuals, KernelSmoother};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RANK_THRESHOLD: f64 = 0.1;
pub const DEFAULT_RIDGE_C: f64 = 2.0;
pub const DEFAULT_RIDGE_CK: f64 = 0.2;
/// Largest exact rank accepted before falling back to the row-vector approximation.
pub const DEFAULT_MAX_EXACT_RANK: usize = 3;
/// Above this many coordinates the sign search switches from exhaustive to greedy.
const EXHAUSTIVE_SIGN_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentMode {
    Exact,
    Approximate,
}

/// How [`build_instrument`] picks the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InstrumentChoice {
    /// Exact when the retained rank is at most `max_rank`, approximate otherwise.
    Auto {
        max_rank: usize,
    },
    Exact,
    Approximate,
}

impl Default for InstrumentChoice {
    fn default() -> Self {
        InstrumentChoice::Auto {
            max_rank: DEFAULT_MAX_EXACT_RANK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstrumentOptions {
    pub d_pseudo: usize,
    pub choice: InstrumentChoice,
    pub rank_threshold: f64,
    pub ridge_c: f64,
    pub ridge_ck: f64,
}

impl Default for InstrumentOptions {
    fn default() -> Self {
        Self {
            d_pseudo: 1,
            choice: InstrumentChoice::default(),
            rank_threshold: DEFAULT_RANK_THRESHOLD,
            ridge_c: DEFAULT_RIDGE_C,
            ridge_ck: DEFAULT_RIDGE_CK,
        }
    }
}

/// Linear map from raw `Z*` rows to `W`.
#[derive(Debug, Clone)]
pub struct InstrumentMatrix<T: Real> {
    pub mode: InstrumentMode,
    /// Rows of `A` in the coordinates where the theory lives: whitened `Z*`
    /// for the exact mode, raw `Z*` for the approximate one.
    pub rows: DMatrix<T>,
    /// Map applied to raw `Z*` rows; equals `rows · Cov(Z*)^{-1/2}` in exact mode.
    pub transform: DMatrix<T>,
    /// Singular values of the cross-covariance, descending.
    pub singular_values: Vec<T>,
    pub effective_rank: usize,
}

#[derive(Debug, Clone)]
pub struct InstrumentSpec<T: Real> {
    pub alpha: DVector<T>,
    pub matrix: InstrumentMatrix<T>,
    pub d_pseudo: usize,
    pub rank_threshold: T,
    pub v_values: DMatrix<T>,
}

impl<T: Real> InstrumentSpec<T> {
    pub fn effective_rank(&self) -> usize {
        self.matrix.effective_rank
    }
}

/// `Z*`: the selected columns followed by the first `d_pseudo` unselected ones.
pub fn build_zstar<T: Real>(part: &ModelPartition<T>, d_pseudo: usize) -> Result<DMatrix<T>> {
    let avail = part.u.ncols();
    if d_pseudo == 0 || d_pseudo > avail {
        return Err(Error::InvalidArgument(format!(
            "d_pseudo must be between 1 and {avail}, got {d_pseudo}"
        )));
    }
    let n = part.z.nrows();
    let q = part.z.ncols();
    let mut out = DMatrix::zeros(n, q + d_pseudo);
    out.columns_mut(0, q).copy_from(&part.z);
    out.columns_mut(q, d_pseudo).copy_from(&part.u.columns(0, d_pseudo));
    Ok(out)
}

/// Sample cross-covariance `Cov(U, Z*)`, shape `(p − q) × (q + d)`.
pub fn cross_covariance<T: Real>(u: &DMatrix<T>, zstar: &DMatrix<T>) -> DMatrix<T> {
    linalg::cross_covariance(u, zstar)
}

/// Exact instrument from the SVD of `Cov(U, Z̃*)` with `Z̃*` whitened.
pub fn exact_instrument<T: Real>(zstar: &DMatrix<T>, u: &DMatrix<T>, rank_threshold: T) -> Result<InstrumentMatrix<T>> {
    if zstar.nrows() != u.nrows() {
        return Err(Error::InvalidArgument(
            "Z* and U must have the same number of rows".into(),
        ));
    }
    if u.ncols() == 0 {
        return Err(Error::NoAdjustmentDirection);
    }
    let whitener = linalg::inv_sqrt_sym(&linalg::cross_covariance(zstar, zstar))?;
    let white = linalg::centered(zstar) * &whitener;
    let sigma = linalg::cross_covariance(u, &white);
    let svd = sigma.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let singular_values: Vec<T> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = singular_values.first().copied().unwrap_or(T::zero());
    let u_scale = linalg::cross_covariance(u, u).diagonal().amax().sqrt();
    if !(smax > T::lit(1e-8) * u_scale.max(T::lit(f64::MIN_POSITIVE))) {
        return Err(Error::NoAdjustmentDirection);
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] >= rank_threshold * smax)
        .collect();
    let m = zstar.ncols();
    let mut rows = DMatrix::zeros(kept.len(), m);
    for (r, &i) in kept.iter().enumerate() {
        rows.row_mut(r).copy_from(&v_t.row(i));
    }
    let transform = &rows * &whitener;
    Ok(InstrumentMatrix {
        mode: InstrumentMode::Exact,
        effective_rank: kept.len(),
        rows,
        transform,
        singular_values,
    })
}

/// `Q(a) = Σ_k (a_k a − D_k) M (a_k a − D_k)ᵀ`.
pub fn row_objective<T: Real>(a: &DVector<T>, projector: &DMatrix<T>, moment: &DMatrix<T>) -> T {
    let mut total = T::zero();
    for k in 0..a.len() {
        let r = a * a[k] - projector.row(k).transpose();
        total += (r.transpose() * moment * &r)[0];
    }
    total
}

fn canonical_sign<T: Real>(a: &mut DVector<T>) {
    if let Some(first) = a.iter().copied().find(|x| *x != T::zero()) {
        if first < T::zero() {
            a.neg_mut();
        }
    }
}

/// Row-vector instrument from the ridge-type closed form with a sign search.
///
/// `zstar` supplies the second moment `n⁻¹ Σ Z*_i Z*_iᵀ` (after centering);
/// the projector `Σ⁺Σ` keeps singular directions of `sigma_uz` above
/// `rank_threshold` times the largest.
pub fn approximate_row_instrument<T: Real>(
    zstar: &DMatrix<T>,
    sigma_uz: &DMatrix<T>,
    c: T,
    ck: T,
    rank_threshold: T,
) -> Result<InstrumentMatrix<T>> {
    if !(c > T::zero()) || !(ck > T::zero()) {
        return Err(Error::InvalidArgument("ridge constants must be positive".into()));
    }
    let m = zstar.ncols();
    if sigma_uz.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "cross-covariance has {} columns, Z* has {m}",
            sigma_uz.ncols()
        )));
    }
    let moment = linalg::second_moment(&linalg::centered(zstar));
    let projector = linalg::row_space_projector(sigma_uz, rank_threshold);
    let singular_values = {
        let mut s: Vec<T> = sigma_uz.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    };
    let ridge = (&moment + DMatrix::identity(m, m) * ck)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("ridge system is singular".into()))?;
    let mut mags = DVector::zeros(m);
    for k in 0..m {
        let mut lhs = projector.row(k) * &moment;
        lhs[k] += c * ck * T::lit(0.5);
        mags[k] = (lhs * &ridge).norm();
    }
    let norm = mags.norm();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::NoAdjustmentDirection);
    }
    mags /= norm;
    let mut best = search_signs(&mags, &projector, &moment);
    canonical_sign(&mut best);
    Ok(InstrumentMatrix {
        mode: InstrumentMode::Approximate,
        rows: DMatrix::from_row_slice(1, m, best.as_slice()),
        transform: DMatrix::from_row_slice(1, m, best.as_slice()),
        singular_values,
        effective_rank: 1,
    })
}

fn with_signs<T: Real>(mags: &DVector<T>, negative: &[bool]) -> DVector<T> {
    DVector::from_fn(mags.len(), |k, _| if negative[k] { -mags[k] } else { mags[k] })
}

fn search_signs<T: Real>(mags: &DVector<T>, projector: &DMatrix<T>, moment: &DMatrix<T>) -> DVector<T> {
    let m = mags.len();
    if m <= EXHAUSTIVE_SIGN_LIMIT {
        // The objective is invariant under a global flip, so the first sign stays positive.
        let mut best: Option<(T, DVector<T>)> = None;
        for mask in 0u64..(1u64 << m.saturating_sub(1)) {
            let negative: Vec<bool> = (0..m).map(|k| k > 0 && (mask >> (k - 1)) & 1 == 1).collect();
            let a = with_signs(mags, &negative);
            let q = row_objective(&a, projector, moment);
            if best.as_ref().is_none_or(|(bq, _)| q < *bq) {
                best = Some((q, a));
            }
        }
        return best.map(|(_, a)| a).unwrap_or_else(|| mags.clone());
    }
    let mut negative = vec![false; m];
    let mut current = row_objective(mags, projector, moment);
    loop {
        let mut step: Option<(usize, T)> = None;
        for k in 0..m {
            negative[k] = !negative[k];
            let q = row_objective(&with_signs(mags, &negative), projector, moment);
            negative[k] = !negative[k];
            if q < current && step.is_none_or(|(_, sq)| q < sq) {
                step = Some((k, q));
            }
        }
        match step {
            Some((k, q)) => {
                negative[k] = !negative[k];
                current = q;
            }
            None => break,
        }
    }
    with_signs(mags, &negative)
}

/// `V = (Uα, Z* transformᵀ)`.
pub fn assemble_v<T: Real>(
    u: &DMatrix<T>,
    alpha: &DVector<T>,
    transform: &DMatrix<T>,
    zstar: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if u.ncols() != alpha.len() || transform.ncols() != zstar.ncols() || u.nrows() != zstar.nrows() {
        return Err(Error::InvalidArgument(format!(
            "non-conformable instrument inputs: U {}×{}, α {}, A {}×{}, Z* {}×{}",
            u.nrows(),
            u.ncols(),
            alpha.len(),
            transform.nrows(),
            transform.ncols(),
            zstar.nrows(),
            zstar.ncols()
        )));
    }
    let n = u.nrows();
    let r = transform.nrows();
    let mut v = DMatrix::zeros(n, r + 1);
    v.set_column(0, &(u * alpha));
    v.columns_mut(1, r).copy_from(&(zstar * transform.transpose()));
    Ok(v)
}

/// Smallest eigenvalue of `n⁻¹ Σ (Z_i − Ê(Z|V_i))(Z_i − Ê(Z|V_i))ᵀ`.
pub fn check_identifiability<T: Real>(z: &DMatrix<T>, v: &DMatrix<T>, bandwidth: T) -> Result<T> {
    let sm = KernelSmoother::new(v.clone(), bandwidth, 2)?;
    let pr = partial_residuals(&DVector::zeros(z.nrows()), z, &sm)?;
    let gram = pr.z.tr_mul(&pr.z) / T::from_count(z.nrows());
    Ok(linalg::min_eigenvalue_sym(&gram))
}

/// Exact instrument, or an empty one (so that `V` reduces to `Uα`) when no
/// direction survives.
pub fn exact_or_empty<T: Real>(zstar: &DMatrix<T>, u: &DMatrix<T>, rank_threshold: T) -> Result<InstrumentMatrix<T>> {
    match exact_instrument(zstar, u, rank_threshold) {
        Err(Error::NoAdjustmentDirection) => {
            log::warn!("no adjustment direction found; V reduces to Uα");
            Ok(InstrumentMatrix {
                mode: InstrumentMode::Exact,
                rows: DMatrix::zeros(0, zstar.ncols()),
                transform: DMatrix::zeros(0, zstar.ncols()),
                singular_values: Vec::new(),
                effective_rank: 0,
            })
        }
        other => other,
    }
}

/// Builds `Z*`, picks the instrument mode and assembles `V` for a given `α`.
pub fn build_instrument<T: Real>(
    part: &ModelPartition<T>,
    alpha: &DVector<T>,
    opts: &InstrumentOptions,
) -> Result<InstrumentSpec<T>> {
    let zstar = build_zstar(part, opts.d_pseudo)?;
    let threshold = T::lit(opts.rank_threshold);
    let approx = || {
        let sigma = cross_covariance(&part.u, &zstar);
        approximate_row_instrument(&zstar, &sigma, T::lit(opts.ridge_c), T::lit(opts.ridge_ck), threshold)
    };
    let exact = || exact_or_empty(&zstar, &part.u, threshold);
    let matrix = match opts.choice {
        InstrumentChoice::Exact => exact()?,
        InstrumentChoice::Approximate => approx()?,
        InstrumentChoice::Auto { max_rank } => {
            let exact = exact()?;
            if exact.effective_rank > max_rank {
                log::debug!(
                    "exact instrument rank {} exceeds {max_rank}; using row approximation",
                    exact.effective_rank
                );
                approx()?
            } else {
                exact
            }
        }
    };
    let v_values = assemble_v(&part.u, alpha, &matrix.transform, &zstar)?;
    Ok(InstrumentSpec {
        alpha: alpha.clone(),
        matrix,
        d_pseudo: opts.d_pseudo,
        rank_threshold: threshold,
        v_values,
    })
}
