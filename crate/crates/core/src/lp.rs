//! Dense two-phase primal simplex for `min cᵀu  s.t.  Gu ≤ h, u ≥ 0`.
//!
//! Pivoting uses Dantzig's most-negative reduced cost rule until a run of
//! degenerate pivots trips a counter, after which Bland's lowest-index rule is
//! used for the remainder of the solve. Ties are always broken by lowest
//! column index, so results do not depend on the platform.
//!
//! On optimality the final basis is refactorized to recompute the primal point
//! and a dual certificate `w ≥ 0` with `Gᵀw + c ≥ 0`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T: Real> {
    objective: DVector<T>,
    constraint_matrix: DMatrix<T>,
    constraint_rhs: DVector<T>,
}

impl<T: Real> LinearProgram<T> {
    pub fn new(objective: DVector<T>, constraint_matrix: DMatrix<T>, constraint_rhs: DVector<T>) -> Result<Self> {
        let (k, m) = constraint_matrix.shape();
        if k == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "linear program needs k ≥ 1 rows and m ≥ 1 columns".into(),
            ));
        }
        if objective.len() != m || constraint_rhs.len() != k {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: objective {}, matrix {k}x{m}, rhs {}",
                objective.len(),
                constraint_rhs.len()
            )));
        }
        let finite = objective
            .iter()
            .chain(constraint_matrix.iter())
            .chain(constraint_rhs.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("linear program has non-finite entries".into()));
        }
        Ok(Self {
            objective,
            constraint_matrix,
            constraint_rhs,
        })
    }

    pub fn objective(&self) -> &DVector<T> {
        &self.objective
    }

    pub fn constraint_matrix(&self) -> &DMatrix<T> {
        &self.constraint_matrix
    }

    pub fn constraint_rhs(&self) -> &DVector<T> {
        &self.constraint_rhs
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_rhs.len()
    }

    /// Largest violation `max(Gu − h)`, clipped at zero.
    pub fn max_violation(&self, u: &DVector<T>) -> T {
        let r = &self.constraint_matrix * u - &self.constraint_rhs;
        r.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T: Real> {
    pub point: DVector<T>,
    pub objective_value: T,
    pub status: LpStatus,
    pub iterations: usize,
    /// Multipliers of the `Gu ≤ h` rows; present when `status` is optimal.
    pub dual: Option<DVector<T>>,
    /// `−hᵀw`, the dual objective of the certificate.
    pub dual_objective: Option<T>,
}

impl<T: Real> LpSolution<T> {
    pub fn duality_gap(&self) -> Option<T> {
        self.dual_objective.map(|d| self.objective_value - d)
    }
}

/// Iteration cap used by [`solve`]: `50·(k + m)`.
pub fn iteration_cap(k: usize, m: usize) -> usize {
    50 * (k + m)
}

struct Tableau<T: Real> {
    rows: usize,
    cols: usize,
    a: Vec<T>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    cost: Vec<T>,
    neg_obj: T,
}

impl<T: Real> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.cols + j]
    }

    fn set_costs(&mut self, c: &[T]) {
        self.cost.copy_from_slice(c);
        self.neg_obj = T::zero();
        for i in 0..self.rows {
            let cb = c[self.basis[i]];
            if cb != T::zero() {
                for j in 0..self.cols {
                    let v = self.a[i * self.cols + j];
                    self.cost[j] -= cb * v;
                }
                self.neg_obj -= cb * self.rhs[i];
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let cols = self.cols;
        let piv = self.at(r, e);
        let inv = T::one() / piv;
        for j in 0..cols {
            self.a[r * cols + j] *= inv;
        }
        self.rhs[r] *= inv;
        self.a[r * cols + e] = T::one();
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let rhs_r = self.rhs[r];
        for (i, row) in before.chunks_mut(cols).chain(after.chunks_mut(cols)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = row[e];
            if f != T::zero() {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * *p;
                }
                row[e] = T::zero();
                self.rhs[i] -= f * rhs_r;
                if self.rhs[i] < T::zero() && self.rhs[i] > -T::lit(1e-11) * (T::one() + rhs_r.abs()) {
                    self.rhs[i] = T::zero();
                }
            }
        }
        let f = self.cost[e];
        if f != T::zero() {
            for (x, p) in self.cost.iter_mut().zip(prow.iter()) {
                *x -= f * *p;
            }
            self.cost[e] = T::zero();
            self.neg_obj -= f * rhs_r;
        }
        self.basis[r] = e;
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct PivotState {
    iterations: usize,
    cap: usize,
    degenerate_run: usize,
    bland: bool,
}

fn run_phase<T: Real>(t: &mut Tableau<T>, allowed: &[bool], tol: T, state: &mut PivotState) -> Result<PhaseOutcome> {
    let cost_scale = T::one() + t.cost.iter().fold(T::zero(), |a, b| a.max(b.abs()));
    let rc_tol = tol * cost_scale;
    let degeneracy_trip = 2 * t.rows.max(10);
    loop {
        let mut is_basic = vec![false; t.cols];
        for &b in &t.basis {
            is_basic[b] = true;
        }
        let mut entering = None;
        let mut best = -rc_tol;
        for j in 0..t.cols {
            if !allowed[j] || is_basic[j] {
                continue;
            }
            let d = t.cost[j];
            if d < -rc_tol {
                if state.bland {
                    entering = Some(j);
                    break;
                }
                if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
        }
        let Some(e) = entering else {
            return Ok(PhaseOutcome::Optimal);
        };
        if state.iterations >= state.cap {
            let best_iterate = basic_point(t).iter().map(|v| v.as_f64()).collect();
            return Err(Error::IterationLimit {
                cap: state.cap,
                best_iterate,
            });
        }

        let col_max = (0..t.rows).fold(T::zero(), |a, i| a.max(t.at(i, e).abs()));
        let piv_eps = T::lit(1e-9) * col_max.max(T::lit(1e-300));
        let mut leave: Option<(usize, T)> = None;
        for i in 0..t.rows {
            let aie = t.at(i, e);
            if aie > piv_eps {
                let ratio = t.rhs[i].max(T::zero()) / aie;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best_ratio)) => {
                        let slack = T::lit(1e-12) * (T::one() + best_ratio.abs());
                        if ratio < best_ratio - slack || (ratio <= best_ratio + slack && t.basis[i] < t.basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best_ratio))
                        }
                    }
                };
            }
        }
        let Some((r, ratio)) = leave else {
            return Ok(PhaseOutcome::Unbounded);
        };
        if ratio <= T::lit(1e-14) {
            state.degenerate_run += 1;
            if state.degenerate_run > degeneracy_trip && !state.bland {
                log::debug!(
                    "simplex: switching to Bland's rule after {} degenerate pivots",
                    state.degenerate_run
                );
                state.bland = true;
            }
        } else {
            state.degenerate_run = 0;
        }
        t.pivot(r, e);
        state.iterations += 1;
    }
}

fn basic_point<T: Real>(t: &Tableau<T>) -> Vec<T> {
    let mut x = vec![T::zero(); t.cols];
    for (i, &b) in t.basis.iter().enumerate() {
        x[b] = t.rhs[i];
    }
    x
}

/// Solves the program with optimality tolerance `tol` (reduced costs are
/// accepted down to `−tol·(1 + max|c|)`).
pub fn solve<T: Real>(lp: &LinearProgram<T>, tol: T) -> Result<LpSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("simplex tolerance must be positive".into()));
    }
    let k = lp.num_constraints();
    let m = lp.num_vars();
    let g = &lp.constraint_matrix;
    let h = &lp.constraint_rhs;

    // Standard form: rows flipped so the right-hand side is non-negative.
    let sign: Vec<T> = h
        .iter()
        .map(|v| if *v < T::zero() { -T::one() } else { T::one() })
        .collect();
    let artificial_rows: Vec<usize> = (0..k).filter(|&i| sign[i] < T::zero()).collect();
    let n_art = artificial_rows.len();
    let cols = m + k + n_art;
    let mut a = vec![T::zero(); k * cols];
    for i in 0..k {
        for j in 0..m {
            a[i * cols + j] = sign[i] * g[(i, j)];
        }
        a[i * cols + m + i] = sign[i];
    }
    let mut basis: Vec<usize> = (0..k).map(|i| m + i).collect();
    for (idx, &i) in artificial_rows.iter().enumerate() {
        a[i * cols + m + k + idx] = T::one();
        basis[i] = m + k + idx;
    }
    let rhs: Vec<T> = (0..k).map(|i| sign[i] * h[i]).collect();

    let mut t = Tableau {
        rows: k,
        cols,
        a,
        rhs,
        basis,
        cost: vec![T::zero(); cols],
        neg_obj: T::zero(),
    };
    let mut state = PivotState {
        iterations: 0,
        cap: iteration_cap(k, m),
        degenerate_run: 0,
        bland: false,
    };
    let is_artificial = |j: usize| j >= m + k;

    if n_art > 0 {
        let mut c1 = vec![T::zero(); cols];
        for c in c1.iter_mut().skip(m + k) {
            *c = T::one();
        }
        t.set_costs(&c1);
        let allowed = vec![true; cols];
        run_phase(&mut t, &allowed, tol, &mut state)?;
        let infeasibility = -t.neg_obj;
        let h_inf = h.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        if infeasibility > T::lit(1e-7) * (T::one() + h_inf) {
            return Ok(LpSolution {
                point: DVector::zeros(m),
                objective_value: T::zero(),
                status: LpStatus::Infeasible,
                iterations: state.iterations,
                dual: None,
                dual_objective: None,
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..k {
            if is_artificial(t.basis[r]) {
                let row_max = (0..m + k).fold(T::zero(), |acc, j| acc.max(t.at(r, j).abs()));
                if row_max <= T::lit(1e-12) {
                    continue;
                }
                let candidate = (0..m + k)
                    .filter(|j| !t.basis.contains(j))
                    .find(|&j| t.at(r, j).abs() > T::lit(1e-7) * row_max);
                if let Some(j) = candidate {
                    t.pivot(r, j);
                    if t.rhs[r] < T::zero() {
                        t.rhs[r] = T::zero();
                    }
                }
            }
        }
        state.degenerate_run = 0;
    }

    let mut c2 = vec![T::zero(); cols];
    c2[..m].copy_from_slice(lp.objective.as_slice());
    t.set_costs(&c2);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_artificial(j)).collect();
    match run_phase(&mut t, &allowed, tol, &mut state)? {
        PhaseOutcome::Unbounded => {
            let x = basic_point(&t);
            return Ok(LpSolution {
                point: DVector::from_iterator(m, x.into_iter().take(m)),
                objective_value: T::min_value().unwrap(),
                status: LpStatus::Unbounded,
                iterations: state.iterations,
                dual: None,
                dual_objective: None,
            });
        }
        PhaseOutcome::Optimal => {}
    }

    // Refactorize the final basis for an accurate primal point and dual certificate.
    let column = |j: usize| -> DVector<T> {
        let mut c = DVector::zeros(k);
        if j < m {
            for i in 0..k {
                c[i] = sign[i] * g[(i, j)];
            }
        } else if j < m + k {
            c[j - m] = sign[j - m];
        } else {
            c[artificial_rows[j - m - k]] = T::one();
        }
        c
    };
    let mut b = DMatrix::zeros(k, k);
    for (i, &j) in t.basis.iter().enumerate() {
        b.set_column(i, &column(j));
    }
    let b_std = DVector::from_iterator(k, (0..k).map(|i| sign[i] * h[i]));
    let tableau_x = basic_point(&t);
    let mut x_full = tableau_x.clone();
    let lu = b.clone().lu();
    if let Some(xb) = lu.solve(&b_std) {
        let min_allowed = -T::lit(1e-9) * (T::one() + xb.amax());
        if xb.iter().all(|v| *v >= min_allowed) {
            for (i, &j) in t.basis.iter().enumerate() {
                x_full[j] = xb[i].max(T::zero());
            }
        }
    }
    let point = DVector::from_iterator(m, x_full.iter().take(m).copied());
    let objective_value = lp.objective.dot(&point);

    let c_b = DVector::from_iterator(k, t.basis.iter().map(|&j| c2[j]));
    let (dual, dual_objective) = match b.transpose().lu().solve(&c_b) {
        Some(y) => {
            let w = DVector::from_iterator(k, (0..k).map(|i| (-sign[i] * y[i]).max(T::zero())));
            let dobj = -h.dot(&w);
            (Some(w), Some(dobj))
        }
        None => (None, None),
    };

    Ok(LpSolution {
        point,
        objective_value,
        status: LpStatus::Optimal,
        iterations: state.iterations,
        dual,
        dual_objective,
    })
}
