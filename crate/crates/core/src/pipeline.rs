//! End-to-end fit: standardize, select, build the instrument, and estimate
//! the linear part under two choices of `α`.

use crate::dantzig::{self, SelectionOptions, SelectionResult};
use crate::data::{apply_scales, unscale_coefficients, Dataset, ModelPartition};
use crate::error::{Error, Result, Stage};
use crate::instrument::{
    assemble_v, build_instrument, build_zstar, check_identifiability, InstrumentOptions, InstrumentSpec,
};
use crate::scalar::Real;
use crate::screening;
use crate::semiparam::{
    default_bandwidth, fit_theta, kernel::non_constant_columns, partial_residuals, FitMode, KernelSmoother,
    SemiparametricFit,
};
use nalgebra::{DMatrix, DVector};

/// Source of `α` for the plug-in fit.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaPolicy<T: Real> {
    Zero,
    /// Dantzig coefficients on the unselected columns.
    Dantzig,
    /// Raw-scale coefficients for every original column; the unselected
    /// entries are used.
    Fixed(DVector<T>),
}

/// Default multiplier on the rule-of-thumb bandwidth.
pub const DEFAULT_BANDWIDTH_SCALE: f64 = 2.0;

/// Which stages see mean-centered columns and response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Raw columns throughout; the model has no intercept.
    None,
    /// Screening and the Dantzig step use centered data; the refit and the
    /// adjusted fit use raw columns.
    #[default]
    SelectionOnly,
    /// Everything is centered; predictions add the training means back.
    Full,
}

#[derive(Debug, Clone)]
pub struct FitOptions<T: Real> {
    pub centering: Centering,
    pub selection: SelectionOptions<T>,
    /// Screening size; `None` skips screening.
    pub sis: Option<usize>,
    pub instrument: InstrumentOptions,
    pub alpha: AlphaPolicy<T>,
    pub bandwidth_scale: T,
    pub kernel_order: usize,
    pub leave_one_out: bool,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            centering: Centering::default(),
            selection: SelectionOptions::default(),
            sis: None,
            instrument: InstrumentOptions::default(),
            alpha: AlphaPolicy::Zero,
            bandwidth_scale: T::lit(DEFAULT_BANDWIDTH_SCALE),
            kernel_order: 2,
            leave_one_out: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics<T: Real> {
    /// Smallest eigenvalue of the partial-residual Gram matrix, plug-in `α`.
    pub identifiability: T,
    pub identifiability_dantzig: T,
    pub bandwidth: T,
    pub bandwidth_dantzig: T,
    pub boundary_count: usize,
    pub boundary_count_dantzig: usize,
    pub backoff_steps: usize,
}

/// Everything needed to evaluate the three predictors at new rows.
#[derive(Debug, Clone)]
pub struct FittedModel<T: Real> {
    pub names: Vec<String>,
    /// Column means removed before scaling (zeros unless fully centered).
    pub x_means: Vec<T>,
    /// Added back to every prediction.
    pub y_mean: T,
    /// Column divisors applied before fitting, one per original column.
    pub scales: Vec<T>,
    /// Original indices of `Z`, ascending.
    pub selected: Vec<usize>,
    /// Original indices of `U`, ascending (restricted to screened columns).
    pub unselected: Vec<usize>,
    pub d_pseudo: usize,
    /// Standardized-scale `θ̂`.
    pub theta: DVector<T>,
    /// Standardized-scale least-squares refit on the selected columns.
    pub theta_classic: DVector<T>,
    /// Standardized-scale `α` over `unselected`.
    pub alpha: DVector<T>,
    /// Map from `Z*` rows to `W`.
    pub transform: DMatrix<T>,
    pub bandwidth: T,
    pub kernel_order: usize,
    pub leave_one_out: bool,
    pub train_v: DMatrix<T>,
    /// `Y_k − θ̂ᵀZ_k` at the training rows; smoothing it against `V` gives `ĝ`.
    pub train_target: DVector<T>,
    /// Mean of `ĝ` over the training rows.
    pub g_bar: T,
}

impl<T: Real> FittedModel<T> {
    pub fn p(&self) -> usize {
        self.scales.len()
    }

    pub fn smoother(&self) -> Result<KernelSmoother<T>> {
        Ok(
            KernelSmoother::new(self.train_v.clone(), self.bandwidth, self.kernel_order)?
                .with_leave_one_out(self.leave_one_out),
        )
    }

    fn check_width(&self, x: &DMatrix<T>) -> Result<()> {
        if x.ncols() != self.p() {
            return Err(Error::InvalidData(format!(
                "new data has {} predictor columns, the fit expects {}",
                x.ncols(),
                self.p()
            )));
        }
        Ok(())
    }

    /// Selected columns of a raw design, on the fitting scale.
    pub fn z_of(&self, x_raw: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_width(x_raw)?;
        let z = shift_columns(
            &x_raw.select_columns(&self.selected),
            &pick(&self.x_means, &self.selected),
        );
        Ok(apply_scales(&z, &pick(&self.scales, &self.selected)))
    }

    /// `V` for new raw rows.
    pub fn v_of(&self, x_raw: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_width(x_raw)?;
        let scaled = apply_scales(&shift_columns(x_raw, &self.x_means), &self.scales);
        let part = ModelPartition {
            selected: self.selected.clone(),
            unselected: self.unselected.clone(),
            z: scaled.select_columns(&self.selected),
            u: scaled.select_columns(&self.unselected),
        };
        let zstar = build_zstar(&part, self.d_pseudo)?;
        assemble_v(&part.u, &self.alpha, &self.transform, &zstar)
    }

    /// Raw-scale `θ̂`.
    pub fn theta_raw(&self) -> DVector<T> {
        unscale_coefficients(&self.theta, &pick(&self.scales, &self.selected))
    }

    pub fn theta_classic_raw(&self) -> DVector<T> {
        unscale_coefficients(&self.theta_classic, &pick(&self.scales, &self.selected))
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput<T: Real> {
    /// Selection result with indices in original coordinates.
    pub selection: SelectionResult<T>,
    /// Screened columns (original indices, ascending) when screening ran.
    pub screened: Option<Vec<usize>>,
    pub instrument: InstrumentSpec<T>,
    /// `V` built with the Dantzig `α`; shares `A` with `instrument`.
    pub v_dantzig: DMatrix<T>,
    pub alpha_dantzig: DVector<T>,
    pub fit_new: SemiparametricFit<T>,
    pub fit_dantzig_alpha: SemiparametricFit<T>,
    pub model: FittedModel<T>,
    pub diagnostics: Diagnostics<T>,
}

fn shift_columns<T: Real>(x: &DMatrix<T>, means: &[T]) -> DMatrix<T> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

fn centered_dataset<T: Real>(d: &Dataset<T>) -> Result<(Dataset<T>, Vec<T>, T)> {
    let means: Vec<T> = d.design().column_iter().map(|c| c.mean()).collect();
    let y_mean = d.response().mean();
    let x = shift_columns(d.design(), &means);
    let y = d.response().add_scalar(-y_mean);
    Ok((Dataset::new(x, y, d.names().to_vec())?, means, y_mean))
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&j| v[j]).collect()
}

fn bandwidth_for<T: Real>(v: &DMatrix<T>, order: usize, scale: T) -> Result<T> {
    let active = non_constant_columns(v);
    default_bandwidth(&v.select_columns(&active), order, scale)
}

struct AdjustedFit<T: Real> {
    fit: SemiparametricFit<T>,
    bandwidth: T,
    identifiability: T,
}

fn adjusted_fit<T: Real>(
    y: &DVector<T>,
    z: &DMatrix<T>,
    v: &DMatrix<T>,
    mode: FitMode,
    opts: &FitOptions<T>,
) -> Result<AdjustedFit<T>> {
    let h = bandwidth_for(v, opts.kernel_order, opts.bandwidth_scale)
        .map_err(|e| e.at(Stage::Smoothing, "check that the adjustment variable is not degenerate"))?;
    let sm = KernelSmoother::new(v.clone(), h, opts.kernel_order)
        .map_err(|e| {
            e.at(
                Stage::Smoothing,
                "use a positive bandwidth scale and kernel order 2, 4 or 6",
            )
        })?
        .with_leave_one_out(opts.leave_one_out);
    let identifiability = check_identifiability(z, v, h).map_err(|e| e.at(Stage::Smoothing, "check V"))?;
    let pr = partial_residuals(y, z, &sm).map_err(|e| e.at(Stage::Smoothing, "check V"))?;
    let fit = fit_theta(&pr, mode).map_err(|e| {
        e.at(
            Stage::Estimation,
            "the selected columns are explained by V; raise kappa or the bandwidth scale",
        )
    })?;
    Ok(AdjustedFit {
        fit,
        bandwidth: h,
        identifiability,
    })
}

/// Runs the full procedure on raw data.
pub fn fit<T: Real>(d: &Dataset<T>, opts: &FitOptions<T>) -> Result<FitOutput<T>> {
    let standardize = |x: &Dataset<T>| {
        x.standardize()
            .map_err(|e| e.at(Stage::Standardize, "drop constant columns"))
    };
    let (x_means, y_mean, std, scales) = match opts.centering {
        Centering::Full => {
            let (c, m, ym) = centered_dataset(d)?;
            let (s, sc) = standardize(&c)?;
            (m, ym, s, sc)
        }
        _ => {
            let (s, sc) = standardize(d)?;
            (vec![T::zero(); d.p()], T::zero(), s, sc)
        }
    };
    // Data seen by screening and the Dantzig step.
    let (sel_std, sel_scales) = match opts.centering {
        Centering::SelectionOnly => standardize(&centered_dataset(d)?.0)?,
        _ => (std.clone(), scales.clone()),
    };
    let working: Vec<usize> = match opts.sis {
        Some(d_keep) => screening::sis_screen(&sel_std, d_keep)
            .map_err(|e| e.at(Stage::Screening, "choose d_keep between 1 and the number of columns"))?
            .kept(),
        None => (0..d.p()).collect(),
    };
    let work = std.select_columns(&working)?;
    let work_sel = sel_std.select_columns(&working)?;

    let mut selection = dantzig::select(&work_sel, &opts.selection).map_err(|e| match e {
        Error::RankDeficient { .. } => e.at(Stage::Refit, "selected columns are collinear; raise kappa"),
        _ => e.at(Stage::Selection, "lower kappa, raise d_keep, or allow lambda backoff"),
    })?;
    if opts.centering == Centering::SelectionOnly {
        selection.refit_theta = dantzig::gaussian_refit(&work, &selection.selected)
            .map_err(|e| e.at(Stage::Refit, "selected columns are collinear; raise kappa"))?;
        for (k, &j) in working.iter().enumerate() {
            selection.beta_dantzig[k] = selection.beta_dantzig[k] * scales[j] / sel_scales[j];
        }
    }
    let local_selected = selection.selected.clone();
    let partition = ModelPartition::new(work.design(), &local_selected)
        .map_err(|e| e.at(Stage::Instrument, "selection is empty"))?;
    let alpha_dantzig = DVector::from_iterator(
        partition.unselected.len(),
        partition.unselected.iter().map(|&j| selection.beta_dantzig[j]),
    );
    let selected: Vec<usize> = local_selected.iter().map(|&j| working[j]).collect();
    let unselected: Vec<usize> = partition.unselected.iter().map(|&j| working[j]).collect();

    let alpha_plug = match &opts.alpha {
        AlphaPolicy::Zero => DVector::zeros(unselected.len()),
        AlphaPolicy::Dantzig => alpha_dantzig.clone(),
        AlphaPolicy::Fixed(raw) => {
            if raw.len() != d.p() {
                return Err(Error::InvalidArgument(format!(
                    "alpha has {} entries, expected one per column ({})",
                    raw.len(),
                    d.p()
                ))
                .at(Stage::Instrument, "supply a coefficient for every predictor column"));
            }
            DVector::from_iterator(unselected.len(), unselected.iter().map(|&j| raw[j] * scales[j]))
        }
    };

    let instrument = build_instrument(&partition, &alpha_plug, &opts.instrument).map_err(|e| {
        e.at(
            Stage::Instrument,
            "need at least d_pseudo unselected columns; raise kappa or lower d_pseudo",
        )
    })?;
    let zstar = build_zstar(&partition, opts.instrument.d_pseudo)?;
    let v_dantzig = assemble_v(&partition.u, &alpha_dantzig, &instrument.matrix.transform, &zstar)
        .map_err(|e| e.at(Stage::Instrument, "internal dimension mismatch"))?;

    let y = work.response();
    let plug = adjusted_fit(y, &partition.z, &instrument.v_values, FitMode::PlugAlpha, opts)?;
    let dz = adjusted_fit(y, &partition.z, &v_dantzig, FitMode::DantzigAlpha, opts)?;

    let train_target = y - &partition.z * &plug.fit.theta;
    let model = FittedModel {
        names: d.names().to_vec(),
        x_means,
        y_mean,
        scales: scales.clone(),
        selected: selected.clone(),
        unselected,
        d_pseudo: opts.instrument.d_pseudo,
        theta: plug.fit.theta.clone(),
        theta_classic: selection.refit_theta.clone(),
        alpha: alpha_plug,
        transform: instrument.matrix.transform.clone(),
        bandwidth: plug.bandwidth,
        kernel_order: opts.kernel_order,
        leave_one_out: opts.leave_one_out,
        train_v: instrument.v_values.clone(),
        train_target,
        g_bar: plug.fit.g_mean(),
    };

    let mut beta_full = DVector::zeros(d.p());
    for (k, &j) in working.iter().enumerate() {
        beta_full[j] = selection.beta_dantzig[k];
    }
    selection.beta_dantzig = beta_full;
    selection.selected = selected;

    let diagnostics = Diagnostics {
        identifiability: plug.identifiability,
        identifiability_dantzig: dz.identifiability,
        bandwidth: plug.bandwidth,
        bandwidth_dantzig: dz.bandwidth,
        boundary_count: plug.fit.boundary_count,
        boundary_count_dantzig: dz.fit.boundary_count,
        backoff_steps: selection.backoff_steps,
    };
    Ok(FitOutput {
        selection,
        screened: opts.sis.map(|_| working),
        instrument,
        v_dantzig,
        alpha_dantzig,
        fit_new: plug.fit,
        fit_dantzig_alpha: dz.fit,
        model,
        diagnostics,
    })
}
