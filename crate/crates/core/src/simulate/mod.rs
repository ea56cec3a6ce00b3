//! Replication harness for the simulation experiments.

pub mod config;
pub mod generate;
pub mod rng;

pub use config::{
    AlphaSetting, BetaType, CellConfig, CenteringSetting, ExperimentConfig, InstrumentSetting, LambdaSetting, Noise,
    TailLaw,
};
pub use generate::{generate_replicate, generate_truth, noise_sd};

use crate::dantzig::{LambdaPolicy, SelectionOptions};
use crate::data::CoefficientTruth;
use crate::error::{Error, Result};
use crate::instrument::{InstrumentChoice, InstrumentOptions};
use crate::pipeline::{fit, AlphaPolicy, Centering, FitOptions, FitOutput};
use crate::predict::{evaluate_cell, replicate_metrics, EvaluationReport, ReplicateMetrics};
use rayon::prelude::*;
use rng::Purpose;

/// Redraws allowed after a failed fit.
pub const MAX_RETRIES: usize = 3;

/// Pipeline options for one attempt; the λ draw gets its own substream.
pub fn fit_options(
    cell: &CellConfig,
    truth: &CoefficientTruth<f64>,
    sigma: f64,
    lambda_seed: u64,
) -> Result<FitOptions<f64>> {
    let lambda = match cell.lambda.fixed()? {
        Some(v) => LambdaPolicy::Fixed(v),
        None => LambdaPolicy::Auto {
            realizations: cell.realizations,
            seed: lambda_seed,
        },
    };
    Ok(FitOptions {
        centering: match cell.centering {
            CenteringSetting::None => Centering::None,
            CenteringSetting::Selection => Centering::SelectionOnly,
            CenteringSetting::Full => Centering::Full,
        },
        selection: SelectionOptions {
            lambda,
            sigma: cell.known_sigma.then_some(sigma),
            kappa: cell.kappa,
            max_backoff: cell.max_backoff,
        },
        sis: cell.sis,
        instrument: InstrumentOptions {
            d_pseudo: cell.d_pseudo,
            choice: match cell.instrument {
                InstrumentSetting::Auto => InstrumentChoice::Auto {
                    max_rank: cell.max_exact_rank,
                },
                InstrumentSetting::Exact => InstrumentChoice::Exact,
                InstrumentSetting::Approx => InstrumentChoice::Approximate,
            },
            ..Default::default()
        },
        alpha: match cell.alpha {
            AlphaSetting::Zero => AlphaPolicy::Zero,
            AlphaSetting::Dantzig => AlphaPolicy::Dantzig,
            AlphaSetting::Truth => AlphaPolicy::Fixed(truth.beta.clone()),
        },
        bandwidth_scale: cell.bandwidth_scale,
        kernel_order: cell.kernel_order,
        leave_one_out: false,
    })
}

/// Result of one replicate after retries.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub metrics: Option<ReplicateMetrics>,
    /// Raw-scale `θ̂` and the selected indices of the successful attempt.
    pub theta: Vec<f64>,
    pub selected: Vec<usize>,
    pub failed_attempts: usize,
    pub errors: Vec<String>,
}

/// Fits one replicate, redrawing up to [`MAX_RETRIES`] times on failure.
pub fn run_replicate(
    cell: &CellConfig,
    truth: &CoefficientTruth<f64>,
    sigma: f64,
    master_seed: u64,
    cell_index: usize,
    replicate: usize,
) -> ReplicateOutcome {
    let mut errors = Vec::new();
    for attempt in 0..=MAX_RETRIES {
        let res = (|| -> Result<(ReplicateMetrics, FitOutput<f64>)> {
            let (train, test) = generate_replicate(cell, truth, sigma, master_seed, cell_index, replicate, attempt)?;
            let lambda_seed = rng::derive_seed(
                master_seed,
                &[
                    cell_index as u64,
                    replicate as u64,
                    attempt as u64,
                    Purpose::Lambda as u64,
                ],
            );
            let opts = fit_options(cell, truth, sigma, lambda_seed)?;
            let out = fit(&train, &opts)?;
            let m = replicate_metrics(truth, &out.model, &out.fit_dantzig_alpha.theta, &test)?;
            Ok((m, out))
        })();
        match res {
            Ok((m, out)) => {
                return ReplicateOutcome {
                    metrics: Some(m),
                    theta: out.model.theta_raw().iter().copied().collect(),
                    selected: out.model.selected.clone(),
                    failed_attempts: attempt,
                    errors,
                }
            }
            Err(e) => {
                log::debug!("cell {cell_index} replicate {replicate} attempt {attempt}: {e}");
                errors.push(e.to_string());
            }
        }
    }
    ReplicateOutcome {
        metrics: None,
        theta: Vec::new(),
        selected: Vec::new(),
        failed_attempts: MAX_RETRIES + 1,
        errors,
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub report: EvaluationReport,
    pub outcomes: Vec<ReplicateOutcome>,
}

/// Runs all replicates of one cell in parallel and folds them in replicate order.
pub fn run_cell(cell: &CellConfig, cell_index: usize, master_seed: u64, replicates: usize) -> Result<CellResult> {
    cell.validate()?;
    let truth = generate_truth(cell, master_seed)?;
    let sigma = noise_sd(cell, &truth);
    let outcomes: Vec<ReplicateOutcome> = (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(cell, &truth, sigma, master_seed, cell_index, r))
        .collect();
    let metrics: Vec<ReplicateMetrics> = outcomes.iter().filter_map(|o| o.metrics).collect();
    let failed_replicates = outcomes.iter().filter(|o| o.metrics.is_none()).count();
    if failed_replicates > 0 {
        let first = outcomes
            .iter()
            .find(|o| o.metrics.is_none())
            .and_then(|o| o.errors.last().cloned())
            .unwrap_or_default();
        log::warn!(
            "cell `{}`: {failed_replicates} of {replicates} replicates failed after {} attempts (last error: {first})",
            cell.label,
            MAX_RETRIES + 1
        );
    }
    let mut report = evaluate_cell(&cell.label, &metrics).map_err(|_| {
        Error::Numerical(format!(
            "cell `{}`: every replicate failed; last error: {}",
            cell.label,
            outcomes
                .last()
                .and_then(|o| o.errors.last().cloned())
                .unwrap_or_default()
        ))
    })?;
    report.failed_attempts = outcomes.iter().map(|o| o.failed_attempts).sum();
    report.failed_replicates = failed_replicates;
    Ok(CellResult { report, outcomes })
}

/// Runs every cell with the given worker count (`None` uses rayon's default).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<EvaluationReport>> {
    let run = || -> Result<Vec<EvaluationReport>> {
        cfg.cells
            .iter()
            .enumerate()
            .map(|(i, c)| run_cell(c, i, master_seed, cfg.replicates).map(|r| r.report))
            .collect()
    };
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    }
}
