//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use nonsparse::simulate::{
    run_cell, BetaType, CellConfig, CellResult, ExperimentConfig, LambdaSetting, Noise, TailLaw,
};
use std::time::Instant;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cell_run(cell: &CellConfig, index: usize, reps: usize) -> Result<(CellResult, f64), String> {
    let t = Instant::now();
    let r = run_cell(cell, index, SEED, reps).map_err(|e| e.to_string())?;
    Ok((r, t.elapsed().as_secs_f64()))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn r2_grid() -> Result<Vec<(CellResult, f64)>, String> {
    let cfg = ExperimentConfig::nonsparse_grid(BetaType::I, 0.1, &[0.98, 0.82, 0.67, 0.50, 0.31]);
    cfg.cells.iter().enumerate().map(|(i, c)| cell_run(c, i, 50)).collect()
}

fn headline(grid: &[(CellResult, f64)]) -> Outcome {
    let (r, secs) = &grid[0];
    let rep = &r.report;
    let mse = rep.mse_new.mean;
    let classic = rep.mse_classic.mean;
    let pass = mse <= 0.02 && mse <= classic / 3.0 && rep.tau >= 0.95 && *secs <= 300.0;
    check(
        pass,
        format!(
            "MSE(theta_hat)={mse:.4} (<=0.02), MSE(theta_S)={classic:.4} (ratio {:.1}, need >=3), tau={:.2} (>=0.95), {secs:.1}s",
            classic / mse,
            rep.tau
        ),
    )
}

fn ordering(grid: &[(CellResult, f64)]) -> Outcome {
    let ordered = grid
        .iter()
        .filter(|(r, _)| {
            let p = &r.report;
            p.pe_full.mean <= p.pe_sub_new.mean && p.pe_sub_new.mean <= p.pe_sub_classic.mean
        })
        .count();
    let taus: Vec<f64> = grid.iter().map(|(r, _)| r.report.tau).collect();
    let decreasing = taus.windows(2).all(|w| w[1] < w[0]);
    check(
        ordered >= 4 && decreasing,
        format!("PE ordering holds in {ordered}/5 cells (need 4), tau = {taus:?} (strictly decreasing: {decreasing})"),
    )
}

fn sparse() -> Result<Outcome, String> {
    let cell = CellConfig {
        label: "sparse I rho=0.1".into(),
        tail: TailLaw::SparseZero,
        noise: Noise::Sigma(0.2),
        ..Default::default()
    };
    let (r, _) = cell_run(&cell, 10, 50)?;
    let ratio = r.report.mse_new.mean / r.report.mse_classic.mean;
    Ok(check(
        (0.5..=2.0).contains(&ratio),
        format!(
            "MSE(theta_hat)={:.4e}, MSE(theta_S)={:.4e}, ratio {ratio:.3} (need [0.5, 2])",
            r.report.mse_new.mean, r.report.mse_classic.mean
        ),
    ))
}

fn high_dimension() -> Result<Outcome, String> {
    let cell = CellConfig {
        label: "n=100 p=500 sis=99".into(),
        n: 100,
        p: 500,
        sis: Some(99),
        beta_values: vec![1.0, -1.5, 2.0, 1.1, -3.0, 1.2, 1.8, -2.5, -2.0, 1.0],
        beta_positions: (1..=10).collect(),
        beta_type: BetaType::Custom,
        lambda: LambdaSetting::Fixed(4.5),
        ..Default::default()
    };
    let (r, secs) = cell_run(&cell, 20, 20)?;
    let done = r.outcomes.iter().filter(|o| o.metrics.is_some()).count();
    let wins = r
        .outcomes
        .iter()
        .filter_map(|o| o.metrics)
        .filter(|m| m.mse_new < m.mse_classic)
        .count();
    Ok(check(
        done == 20 && wins * 10 >= 9 * 20 && secs <= 900.0,
        format!("{done}/20 replicates completed, MSE(theta_hat) < MSE(theta_S) in {wins}/20 (need 18), {secs:.1}s"),
    ))
}

fn lp_oracles() -> Outcome {
    match (common::simplex_oracle_gap(2024, 200), common::soft_threshold_error(99, 100)) {
        (Ok(gap), Ok(soft)) => check(
            gap <= 1e-6 && soft <= 1e-7,
            format!("vertex-enumeration gap {gap:.2e} (<=1e-6, 200 instances), soft-threshold error {soft:.2e} (<=1e-7, 100 instances)"),
        ),
        (a, b) => check(false, format!("oracle run failed: {:?} / {:?}", a.err(), b.err())),
    }
}

fn properties() -> Outcome {
    let sums = common::kernel_weight_sum_error(1, 1000);
    let consts = common::constant_reproduction_error(2, 200);
    let shift = common::shift_equivariance_error(3, 100);
    let ortho = common::exact_orthonormality_error(4, 100);
    let approx = common::approximate_checks(5, 100);
    let mut cfg = ExperimentConfig::nonsparse_grid(BetaType::I, 0.1, &[0.98, 0.5]);
    cfg.replicates = 6;
    let one = nonsparse::simulate::run_experiment(&cfg, 11, Some(1));
    let many = nonsparse::simulate::run_experiment(&cfg, 11, Some(4));
    let deterministic = matches!((&one, &many), (Ok(a), Ok(b)) if a == b);
    let (norm_ok, norm_detail) = match &approx {
        Ok(e) => (*e <= 1e-8, format!("{e:.1e}")),
        Err(msg) => (false, msg.clone()),
    };
    check(
        sums <= 1e-10 && consts <= 1e-10 && shift <= 1e-8 && ortho <= 1e-8 && norm_ok && deterministic,
        format!(
            "weight sums {sums:.1e}, constants {consts:.1e}, shift {shift:.1e}, AAt-I {ortho:.1e}, |A|-1 and signs {norm_detail}, worker-count determinism {deterministic}"
        ),
    )
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let c = |k: i32| v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n;
    let s2 = c(2);
    (c(3) / s2.powf(1.5), c(4) / (s2 * s2) - 3.0)
}

fn consistency() -> Result<Outcome, String> {
    let small = CellConfig {
        label: "n=100".into(),
        n: 100,
        ..Default::default()
    };
    let large = CellConfig {
        label: "n=400".into(),
        n: 400,
        ..small.clone()
    };
    let (a, _) = cell_run(&small, 30, 30)?;
    let (b, _) = cell_run(&large, 31, 30)?;
    let errs = |r: &CellResult| {
        r.outcomes
            .iter()
            .filter_map(|o| o.metrics.map(|m| m.mse_new))
            .collect::<Vec<_>>()
    };
    let (ma, mb) = (median(errs(&a)), median(errs(&b)));
    let (norm, _) = cell_run(&small, 32, 200)?;
    let first: Vec<f64> = norm
        .outcomes
        .iter()
        .filter(|o| o.selected.first() == Some(&0))
        .map(|o| o.theta[0])
        .collect();
    let (skew, kurt) = moments(&first);
    Ok(check(
        mb <= ma / 2.5 && skew.abs() <= 0.5 && kurt.abs() <= 1.0 && first.len() >= 150,
        format!(
            "median error n=100 {ma:.4e}, n=400 {mb:.4e} (ratio {:.2}, need >=2.5); first coefficient over {} replicates: skew {skew:.3}, excess kurtosis {kurt:.3}",
            ma / mb,
            first.len()
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let grid = r2_grid();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    match &grid {
        Ok(g) => {
            results.push(("1 headline non-sparse cell", headline(g)));
            results.push(("2 ordering across R^2", ordering(g)));
        }
        Err(e) => {
            results.push(("1 headline non-sparse cell", check(false, e.clone())));
            results.push(("2 ordering across R^2", check(false, e.clone())));
        }
    }
    let or_fail = |r: Result<Outcome, String>| r.unwrap_or_else(|e| check(false, e));
    results.push(("3 sparse comparability", or_fail(sparse())));
    results.push(("4 high-dimension path", or_fail(high_dimension())));
    results.push(("5 LP oracle equivalence", lp_oracles()));
    results.push(("6 property suite", properties()));
    results.push(("7 root-n consistency proxy", or_fail(consistency())));
    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "[{}] criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
