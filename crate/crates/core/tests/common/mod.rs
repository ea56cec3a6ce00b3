//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Brute-force optimum of `min ‖β‖₁ s.t. ‖Xᵀ(y − Xβ)‖∞ ≤ bound` over the split
/// `β = β⁺ − β⁻ ≥ 0`, by visiting every basic solution of the 4p half-spaces.
pub fn vertex_oracle(x: &DMatrix<f64>, y: &DVector<f64>, bound: f64) -> f64 {
    let p = x.ncols();
    let m = 2 * p;
    let g = x.transpose() * x;
    let xty = x.transpose() * y;
    // Rows a·u ≤ b: the 2p Dantzig rows then the 2p sign rows −u ≤ 0.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..p {
        let mut a = DVector::zeros(m);
        let mut b = DVector::zeros(m);
        for j in 0..p {
            a[j] = g[(i, j)];
            a[p + j] = -g[(i, j)];
            b[j] = -g[(i, j)];
            b[p + j] = g[(i, j)];
        }
        rows.push((a, bound + xty[i]));
        rows.push((b, bound - xty[i]));
    }
    for j in 0..m {
        let mut a = DVector::zeros(m);
        a[j] = -1.0;
        rows.push((a, 0.0));
    }
    let k = rows.len();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let a = DMatrix::from_fn(m, m, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(m, |r, _| rows[idx[r]].1);
        if let Some(u) = a.clone().lu().solve(&b) {
            if (&a * &u - &b).amax() < 1e-9 && rows.iter().all(|(r, h)| r.dot(&u) <= h + 1e-9) {
                best = best.min(u.sum());
            }
        }
        // Next combination in lexicographic order.
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + k - m {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Largest relative gap between the simplex objective and the vertex oracle
/// over `count` random Dantzig programs with `p ≤ 4`, `n ≤ 12`; also fails on
/// any infeasible simplex point.
pub fn simplex_oracle_gap(seed: u64, count: usize) -> Result<f64, String> {
    use nonsparse::dantzig::dantzig_select;
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..count {
        let p = rng.random_range(1..=4);
        let n = rng.random_range(p.max(2)..=12);
        let x = gaussian(&mut rng, n, p);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let bound = rng.random_range(0.05..0.95) * (x.transpose() * &y).amax();
        let d = nonsparse::Dataset::from_parts(x.clone(), y.clone()).map_err(|e| e.to_string())?;
        let beta = dantzig_select(&d, bound).map_err(|e| format!("case {case}: {e}"))?;
        let slack = (x.transpose() * (&y - &x * &beta)).amax();
        if slack > bound + 1e-7 {
            return Err(format!("case {case}: infeasible by {:e}", slack - bound));
        }
        let oracle = vertex_oracle(&x, &y, bound);
        worst = worst.max((beta.lp_norm(1) - oracle).abs() / (1.0 + oracle));
    }
    Ok(worst)
}

/// Largest deviation from coordinatewise soft thresholding on orthonormal designs.
pub fn soft_threshold_error(seed: u64, count: usize) -> Result<f64, String> {
    use nonsparse::dantzig::dantzig_select;
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..count {
        let p = rng.random_range(1..=6);
        let n = rng.random_range(p + 1..=20);
        let q = gaussian(&mut rng, n, p).qr().q();
        let y = DVector::from_fn(n, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let score = q.transpose() * &y;
        let bound = rng.random_range(0.0..1.0) * score.amax();
        let d = nonsparse::Dataset::from_parts(q, y).map_err(|e| e.to_string())?;
        let beta = dantzig_select(&d, bound).map_err(|e| format!("case {case}: {e}"))?;
        for j in 0..p {
            let s = score[j];
            let expected = s.signum() * (s.abs() - bound).max(0.0);
            worst = worst.max((beta[j] - expected).abs());
        }
    }
    Ok(worst)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DMatrix<f64> {
    gaussian(rng, n, dim)
}

/// Worst `|Σw − 1|` over `queries` random query points and kernel orders 2, 4, 6.
pub fn kernel_weight_sum_error(seed: u64, queries: usize) -> f64 {
    use nonsparse::semiparam::KernelSmoother;
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for q in 0..queries {
        let n = rng.random_range(5..60);
        let dim = rng.random_range(1..4);
        let order = [2, 4, 6][q % 3];
        let h = rng.random_range(0.05..3.0);
        let sm = KernelSmoother::new(random_points(&mut rng, n, dim), h, order).unwrap();
        let v: Vec<f64> = (0..dim).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let w = sm.weights(&v).unwrap();
        worst = worst.max((w.weights.iter().sum::<f64>() - 1.0).abs());
    }
    worst
}

/// Worst deviation when smoothing a constant, at training and random points.
pub fn constant_reproduction_error(seed: u64, trials: usize) -> f64 {
    use nonsparse::semiparam::KernelSmoother;
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let n = rng.random_range(5..50);
        let dim = rng.random_range(1..4);
        let c = rng.random_range(-50.0..50.0);
        let sm = KernelSmoother::new(
            random_points(&mut rng, n, dim),
            rng.random_range(0.1..2.0),
            [2, 4, 6][t % 3],
        )
        .unwrap()
        .with_leave_one_out(t % 2 == 0);
        let values = DVector::from_element(n, c);
        let (w, _) = sm.training_weights();
        worst = worst.max((&w * &values).add_scalar(-c).amax());
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        worst = worst.max((sm.smooth_at(&values, &v).unwrap().0 - c).abs());
    }
    worst
}

/// Worst `|θ̂(Y + Zc) − θ̂(Y) − c|` over random partially linear data.
pub fn shift_equivariance_error(seed: u64, trials: usize) -> f64 {
    use nonsparse::semiparam::{fit_theta, partial_residuals, FitMode, KernelSmoother};
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(30..80);
        let q = rng.random_range(1..5);
        let v = random_points(&mut rng, n, 2);
        let z = gaussian(&mut rng, n, q) + DMatrix::from_fn(n, q, |i, j| v[(i, j % 2)]);
        let y = DVector::from_fn(n, |i, _| {
            v[(i, 0)].sin() + z[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        let c = DVector::from_fn(q, |_, _| rng.random_range(-5.0..5.0));
        let sm = KernelSmoother::new(v, 0.6, 2).unwrap();
        let a = fit_theta(&partial_residuals(&y, &z, &sm).unwrap(), FitMode::PlugAlpha).unwrap();
        let shifted = &y + &z * &c;
        let b = fit_theta(&partial_residuals(&shifted, &z, &sm).unwrap(), FitMode::PlugAlpha).unwrap();
        worst = worst.max((&b.theta - &a.theta - &c).amax());
    }
    worst
}

/// Worst entry of `RRᵀ − I` for exact-mode instrument rows.
pub fn exact_orthonormality_error(seed: u64, trials: usize) -> f64 {
    use nonsparse::instrument::exact_instrument;
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(30..100);
        let m = rng.random_range(2..6);
        let r = rng.random_range(1..8);
        let zstar = gaussian(&mut rng, n, m);
        let mix = gaussian(&mut rng, m, r);
        let u = &zstar * mix + gaussian(&mut rng, n, r) * 0.5;
        let a = exact_instrument(&zstar, &u, 0.1).unwrap();
        let k = a.rows.nrows();
        worst = worst.max((&a.rows * a.rows.transpose() - DMatrix::identity(k, k)).amax());
    }
    worst
}

/// `Q(a) = Σ_k (a_k a − P_k) M (a_k a − P_k)ᵀ`, computed from scratch.
fn q_objective(a: &DVector<f64>, p: &DMatrix<f64>, moment: &DMatrix<f64>) -> f64 {
    (0..a.len())
        .map(|k| {
            let r = a * a[k] - p.row(k).transpose();
            (r.transpose() * moment * &r)[0]
        })
        .sum()
}

/// Returns the worst `|‖a‖ − 1|` for approximate-mode rows, or an error when a
/// sign pattern with the same magnitudes beats the returned one.
pub fn approximate_checks(seed: u64, trials: usize) -> Result<f64, String> {
    use nonsparse::instrument::{approximate_row_instrument, cross_covariance};
    use rand::{Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let n = rng.random_range(30..80);
        let m = rng.random_range(2..7);
        let r = rng.random_range(1..6);
        let zstar = gaussian(&mut rng, n, m);
        let u = &zstar * gaussian(&mut rng, m, r) + gaussian(&mut rng, n, r);
        let sigma = cross_covariance(&u, &zstar);
        let a = approximate_row_instrument(&zstar, &sigma, 2.0, 0.2, 0.1).map_err(|e| e.to_string())?;
        let row = a.rows.row(0).transpose();
        worst = worst.max((row.norm() - 1.0).abs());
        // Independent projector onto the leading right singular directions.
        let svd = sigma.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let mut p = DMatrix::zeros(m, m);
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s >= 0.1 * smax {
                let v = vt.row(i).transpose();
                p += &v * v.transpose();
            }
        }
        let mean = zstar.row_mean();
        let centered = DMatrix::from_fn(n, m, |i, j| zstar[(i, j)] - mean[j]);
        let moment = centered.transpose() * &centered / n as f64;
        let best = q_objective(&row, &p, &moment);
        for mask in 1u32..(1 << m) {
            let flipped = DVector::from_fn(m, |k, _| if mask >> k & 1 == 1 { -row[k] } else { row[k] });
            let q = q_objective(&flipped, &p, &moment);
            if q < best - 1e-9 * (1.0 + best.abs()) {
                return Err(format!("trial {t}: sign pattern {mask:b} gives Q = {q} < {best}"));
            }
        }
    }
    Ok(worst)
}
