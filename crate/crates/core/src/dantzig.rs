//! Dantzig selector, its data-driven tuning constant, threshold selection and
//! the two-stage (Gaussian Dantzig) least-squares refit.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Default number of noise draws behind [`estimate_lambda`].
pub const DEFAULT_REALIZATIONS: usize = 100;
/// Default `κ` in the threshold `τ = κσ`.
pub const DEFAULT_KAPPA: f64 = 0.25;

/// Asymptotic constants of the large-coefficient identifiability condition.
/// They cannot be computed from a sample and are kept for reference only.
pub mod asymptotic {
    /// Restricted-eigenvalue lower bound, `√(3/8)`.
    pub const RESTRICTED_EIGENVALUE_BOUND: f64 = 0.612_372_435_695_794_5;
    /// Lower bound on `b` in `λ = bσ√(log p / n)`.
    pub const MIN_B: f64 = std::f64::consts::SQRT_2;
}

/// How the sup-norm bound of the Dantzig constraint is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy<T: Real> {
    /// Empirical maximum of `|Xᵀz|` over `realizations` standard-normal draws.
    Auto { realizations: usize, seed: u64 },
    /// `λ_p` quoted for unit-norm columns; the bound used is `λ_p σ √n` on the
    /// `n⁻¹‖x_j‖² = 1` scale.
    Fixed(T),
}

#[derive(Debug, Clone)]
pub struct SelectionOptions<T: Real> {
    pub lambda: LambdaPolicy<T>,
    /// Noise level; estimated from the data when `None`.
    pub sigma: Option<T>,
    pub kappa: T,
    /// How many times the bound may be halved when no coefficient survives
    /// the threshold. Zero surfaces the empty selection as an error.
    pub max_backoff: usize,
}

impl<T: Real> Default for SelectionOptions<T> {
    fn default() -> Self {
        Self {
            lambda: LambdaPolicy::Auto {
                realizations: DEFAULT_REALIZATIONS,
                seed: 0,
            },
            sigma: None,
            kappa: T::lit(DEFAULT_KAPPA),
            max_backoff: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionResult<T: Real> {
    pub beta_dantzig: DVector<T>,
    /// The bound `λ_p σ` actually imposed on `‖Xᵀ(Y − Xβ)‖∞`.
    pub lambda: T,
    pub tau_threshold: T,
    /// Sorted, zero-based.
    pub selected: Vec<usize>,
    pub refit_theta: DVector<T>,
    pub sigma_used: T,
    /// Number of bound halvings needed to get a non-empty selection.
    pub backoff_steps: usize,
}

/// `min ‖β‖₁  s.t.  ‖Xᵀ(Y − Xβ)‖∞ ≤ lambda_sigma` through the split
/// `β = β⁺ − β⁻` (2p non-negative variables, 2p inequality rows).
pub fn dantzig_select<T: Real>(d: &Dataset<T>, lambda_sigma: T) -> Result<DVector<T>> {
    if !(lambda_sigma >= T::zero()) {
        return Err(Error::InvalidArgument("Dantzig bound must be non-negative".into()));
    }
    let x = d.design();
    let p = d.p();
    let xty = x.transpose() * d.response();
    if xty.amax() <= lambda_sigma {
        return Ok(DVector::zeros(p));
    }
    let gram = x.transpose() * x;
    let mut g = DMatrix::zeros(2 * p, 2 * p);
    let mut h = DVector::zeros(2 * p);
    // Xᵀ(Y − Xβ) ≤ b   ⇔  Gβ⁺ − Gβ⁻ ≥ XᵀY − b  ⇔  −Gβ⁺ + Gβ⁻ ≤ b − XᵀY
    // −Xᵀ(Y − Xβ) ≤ b  ⇔   Gβ⁺ − Gβ⁻ ≤ b + XᵀY
    for i in 0..p {
        for j in 0..p {
            let v = gram[(i, j)];
            g[(i, j)] = -v;
            g[(i, p + j)] = v;
            g[(p + i, j)] = v;
            g[(p + i, p + j)] = -v;
        }
        h[i] = lambda_sigma - xty[i];
        h[p + i] = lambda_sigma + xty[i];
    }
    let program = LinearProgram::new(DVector::from_element(2 * p, T::one()), g, h)?;
    let sol = lp::solve(&program, T::lit(lp::DEFAULT_TOLERANCE))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpFailure(format!(
            "{} after {} pivots (bound {lambda_sigma:e})",
            sol.status, sol.iterations
        )));
    }
    let mut beta = DVector::from_iterator(p, (0..p).map(|j| sol.point[j] - sol.point[p + j]));
    let cut = T::lit(1e-12) * (T::one() + beta.amax());
    beta.iter_mut().filter(|b| b.abs() < cut).for_each(|b| *b = T::zero());
    Ok(beta)
}

/// Empirical maximum of `|Xᵀz|_j` over `realizations` draws of `z ~ N(0, I_n)`.
pub fn estimate_lambda<T: Real>(design: &DMatrix<T>, realizations: usize, seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = design.nrows();
    let mut best = T::zero();
    for _ in 0..realizations.max(1) {
        let z = DVector::from_iterator(
            n,
            (0..n).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                T::lit(v)
            }),
        );
        let corr = design.transpose() * z;
        best = best.max(corr.amax());
    }
    best
}

/// Indices with `|β_j| ≥ τ`, ascending. With `τ = 0` the nonzero entries are
/// returned.
pub fn threshold_select<T: Real>(beta_dantzig: &DVector<T>, tau: T) -> Result<Vec<usize>> {
    if !(tau >= T::zero()) {
        return Err(Error::InvalidArgument("threshold must be non-negative".into()));
    }
    let selected: Vec<usize> = beta_dantzig
        .iter()
        .enumerate()
        .filter(|(_, b)| {
            let a = b.abs();
            if tau == T::zero() {
                a > T::zero()
            } else {
                a >= tau
            }
        })
        .map(|(j, _)| j)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection { tau: tau.as_f64() });
    }
    Ok(selected)
}

/// Least squares on the selected columns; other coefficients are implicitly zero.
pub fn gaussian_refit<T: Real>(d: &Dataset<T>, selected: &[usize]) -> Result<DVector<T>> {
    if selected.len() > d.n() {
        return Err(Error::InvalidArgument(format!(
            "cannot refit {} columns with {} observations",
            selected.len(),
            d.n()
        )));
    }
    let x = d.design().select_columns(selected);
    linalg::least_squares(&x, d.response()).map_err(|e| match e {
        Error::RankDeficient { columns } => Error::RankDeficient {
            columns: columns.into_iter().map(|c| selected[c]).collect(),
        },
        other => other,
    })
}

fn sample_sd<T: Real>(v: &DVector<T>) -> T {
    let n = v.len();
    let mean = v.mean();
    let ss = v.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean));
    (ss / T::from_count(n.saturating_sub(1).max(1))).sqrt()
}

/// Plug-in noise level: Dantzig fit with `σ = sd(Y)`, least-squares refit on
/// its nonzero support, residual standard error of that refit.
pub fn estimate_sigma<T: Real>(d: &Dataset<T>, realizations: usize, seed: u64) -> Result<T> {
    let sd_y = sample_sd(d.response());
    let lam = estimate_lambda(d.design(), realizations, seed);
    let beta = dantzig_select(d, lam * sd_y)?;
    let mut support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != T::zero()).collect();
    let n = d.n();
    if support.len() + 1 >= n {
        support.sort_by(|&a, &b| beta[b].abs().partial_cmp(&beta[a].abs()).unwrap().then(a.cmp(&b)));
        support.truncate(n / 2);
        support.sort_unstable();
    }
    if support.is_empty() {
        return Ok(sd_y);
    }
    let coef = gaussian_refit(d, &support)?;
    let fitted = d.design().select_columns(&support) * coef;
    let rss = (d.response() - fitted).norm_squared();
    Ok((rss / T::from_count(n - support.len())).sqrt())
}

/// Full selection stage: bound, Dantzig solve, threshold, refit.
pub fn select<T: Real>(d: &Dataset<T>, opts: &SelectionOptions<T>) -> Result<SelectionResult<T>> {
    let sigma = match opts.sigma {
        Some(s) => s,
        None => {
            let (r, seed) = match opts.lambda {
                LambdaPolicy::Auto { realizations, seed } => (realizations, seed),
                LambdaPolicy::Fixed(_) => (DEFAULT_REALIZATIONS, 0),
            };
            estimate_sigma(d, r, seed)?
        }
    };
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let lambda_p = match opts.lambda {
        LambdaPolicy::Auto { realizations, seed } => estimate_lambda(d.design(), realizations, seed),
        LambdaPolicy::Fixed(v) => v * T::from_count(d.n()).sqrt(),
    };
    let tau = opts.kappa * sigma;
    let mut bound = lambda_p * sigma;
    let mut steps = 0;
    loop {
        let beta = dantzig_select(d, bound)?;
        match threshold_select(&beta, tau) {
            Ok(selected) => {
                let refit_theta = gaussian_refit(d, &selected)?;
                return Ok(SelectionResult {
                    beta_dantzig: beta,
                    lambda: bound,
                    tau_threshold: tau,
                    selected,
                    refit_theta,
                    sigma_used: sigma,
                    backoff_steps: steps,
                });
            }
            Err(e @ Error::EmptySelection { .. }) => {
                if steps >= opts.max_backoff {
                    return Err(e);
                }
                steps += 1;
                bound *= T::lit(0.5);
                log::debug!("empty selection; halving Dantzig bound to {bound:e}");
            }
            Err(e) => return Err(e),
        }
    }
}
