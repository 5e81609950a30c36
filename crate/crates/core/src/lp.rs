//! Dense linear programming by a two-phase revised simplex method.
//!
//! This is the numerical substrate for every support-function query and for
//! the LP relaxations inside branch-and-bound. Programs are stated in the
//! form
//!
//! ```text
//! maximize  c'x   subject to   A x {<=,=} b,   lo <= x <= hi,
//! ```
//!
//! with `±inf` allowed in the variable bounds. The solver keeps an explicit
//! dense basis inverse, prices with the largest-coefficient rule, and falls
//! back to Bland's rule once pivots stay degenerate for too long, which
//! guarantees termination. All tie-breaking is by lowest index, so identical
//! inputs produce bit-identical results within one build.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Shared numerical tolerances. Every module in the crate inherits these.
pub mod tol {
    /// Primal feasibility: constraint and bound violations up to this are accepted.
    pub const FEAS: f64 = 1e-7;
    /// Dual feasibility: reduced costs within this of zero do not qualify for entering.
    pub const REDUCED_COST: f64 = 1e-7;
    /// Pivot elements below this are rejected during the ratio test.
    pub const PIVOT: f64 = 1e-9;
    /// Below this no pivot is acceptable and the solve reports a breakdown.
    pub const PIVOT_HARD: f64 = 1e-11;
    /// A ratio-test step below this counts as a degenerate pivot.
    pub const DEGENERATE_STEP: f64 = 1e-10;
    /// Binary variables must sit within this of 0 or 1 in integral solutions.
    pub const INTEGRALITY: f64 = 1e-6;
}

/// Sense of one linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    /// `a'x <= b`
    Le,
    /// `a'x = b`
    Eq,
}

/// A linear program in inequality/equality form with per-variable bounds.
///
/// The objective is always **maximized**.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients, one per variable.
    pub objective: DVector<f64>,
    /// Constraint matrix, one row per constraint.
    pub rows: DMatrix<f64>,
    /// Sense of each constraint row.
    pub senses: Vec<RowSense>,
    /// Right-hand sides, all finite.
    pub rhs: DVector<f64>,
    /// Lower variable bounds (`-inf` allowed).
    pub lower: DVector<f64>,
    /// Upper variable bounds (`+inf` allowed).
    pub upper: DVector<f64>,
}

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`].
///
/// `value`, `point` and `duals` are only meaningful for [`LpStatus::Optimal`];
/// infeasible results carry `-inf` and unbounded results `+inf` as `value`.
#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub value: f64,
    pub point: DVector<f64>,
    /// One multiplier per constraint row (`>= 0` for binding `<=` rows).
    pub duals: DVector<f64>,
}

impl LpResult {
    fn infeasible(n: usize, m: usize) -> Self {
        LpResult {
            status: LpStatus::Infeasible,
            value: f64::NEG_INFINITY,
            point: DVector::zeros(n),
            duals: DVector::zeros(m),
        }
    }

    fn unbounded(n: usize, m: usize) -> Self {
        LpResult {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            point: DVector::zeros(n),
            duals: DVector::zeros(m),
        }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    BadProgram(String),
    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),
}

impl LinearProgram {
    /// An empty program over `num_vars` free variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: DVector::zeros(num_vars),
            rows: DMatrix::zeros(0, num_vars),
            senses: Vec::new(),
            rhs: DVector::zeros(0),
            lower: DVector::from_element(num_vars, f64::NEG_INFINITY),
            upper: DVector::from_element(num_vars, f64::INFINITY),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Checks dimensional consistency, finite right-hand sides, and `lo <= hi`.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.rows.nrows() != m || self.senses.len() != m {
            return Err(LpError::BadProgram(format!(
                "row count mismatch: {} rows, {} senses, {} rhs",
                self.rows.nrows(),
                self.senses.len(),
                m
            )));
        }
        if self.rows.ncols() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::BadProgram(format!(
                "variable count mismatch: {} columns vs {} objective entries",
                self.rows.ncols(),
                n
            )));
        }
        if self.rhs.iter().any(|b| !b.is_finite()) {
            return Err(LpError::BadProgram("non-finite right-hand side".into()));
        }
        if self.rows.iter().any(|a| !a.is_finite()) || self.objective.iter().any(|c| !c.is_finite())
        {
            return Err(LpError::BadProgram("non-finite coefficient".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::BadProgram(format!(
                    "inconsistent bounds on variable {j}: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }
}

/// Incremental construction of a [`LinearProgram`] from sparse row entries.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    entries: Vec<Vec<(usize, f64)>>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with the given bounds and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// Adds `n` free variables and returns the index of the first.
    pub fn add_free_vars(&mut self, n: usize) -> usize {
        let first = self.objective.len();
        for _ in 0..n {
            self.add_var(f64::NEG_INFINITY, f64::INFINITY);
        }
        first
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, sense: RowSense, coeffs: &[(usize, f64)], rhs: f64) {
        self.entries.push(coeffs.to_vec());
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.add_row(RowSense::Le, coeffs, rhs);
    }

    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.add_row(RowSense::Eq, coeffs, rhs);
    }

    pub fn build(self) -> LinearProgram {
        let n = self.objective.len();
        let m = self.rhs.len();
        let mut rows = DMatrix::zeros(m, n);
        for (i, entries) in self.entries.iter().enumerate() {
            for &(j, c) in entries {
                rows[(i, j)] += c;
            }
        }
        LinearProgram {
            objective: DVector::from_vec(self.objective),
            rows,
            senses: self.senses,
            rhs: DVector::from_vec(self.rhs),
            lower: DVector::from_vec(self.lower),
            upper: DVector::from_vec(self.upper),
        }
    }
}

/// Solves a linear program, maximizing its objective.
pub fn solve_lp(program: &LinearProgram) -> Result<LpResult, LpError> {
    program.validate()?;
    simplex::Simplex::new(program).solve()
}

mod simplex {
    use super::tol;
    use super::{LinearProgram, LpError, LpResult, LpStatus, RowSense};
    use nalgebra::{DMatrix, DVector};

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    enum VarState {
        Basic(usize),
        AtLower,
        AtUpper,
        /// Nonbasic free variable resting at value zero.
        Free,
    }

    enum PhaseEnd {
        Optimal,
        Unbounded,
    }

    enum Step {
        Done(PhaseEnd),
        Pivoted,
    }

    /// Bounded-variable primal simplex over the slack-augmented system
    /// `A x + s = b`. The basis inverse is kept transposed so that the row
    /// operations of a pivot touch contiguous columns.
    pub(super) struct Simplex {
        m: usize,
        /// structural variable count
        n_struct: usize,
        /// total column count including slacks and artificials
        n_total: usize,
        cols: DMatrix<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        rhs: DVector<f64>,
        cost: Vec<f64>,
        state: Vec<VarState>,
        basis: Vec<usize>,
        /// transpose of the basis inverse
        binv_t: DMatrix<f64>,
        /// values of basic variables, by row
        xb: DVector<f64>,
        /// nonbasic resting values, by column
        rest: Vec<f64>,
        artificial_start: usize,
        degenerate_run: usize,
        bland: bool,
        iterations: usize,
        senses: Vec<RowSense>,
    }

    impl Simplex {
        pub(super) fn new(p: &LinearProgram) -> Self {
            let m = p.num_rows();
            let n = p.num_vars();
            let slack_count = p.senses.iter().filter(|s| **s == RowSense::Le).count();
            // artificial columns are appended lazily in `solve`
            let n_total = n + slack_count + m;
            let mut cols = DMatrix::zeros(m, n_total);
            cols.view_mut((0, 0), (m, n)).copy_from(&p.rows);
            let mut lower = Vec::with_capacity(n_total);
            let mut upper = Vec::with_capacity(n_total);
            lower.extend(p.lower.iter().copied());
            upper.extend(p.upper.iter().copied());
            let mut slack_of_row = vec![usize::MAX; m];
            let mut next = n;
            for (i, sense) in p.senses.iter().enumerate() {
                if *sense == RowSense::Le {
                    cols[(i, next)] = 1.0;
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    slack_of_row[i] = next;
                    next += 1;
                }
            }
            // reserve bound slots for the artificials; coefficients are set later
            for _ in 0..m {
                lower.push(0.0);
                upper.push(f64::INFINITY);
            }
            let mut cost = vec![0.0; n_total];
            cost[..n].copy_from_slice(p.objective.as_slice());

            let mut sx = Simplex {
                m,
                n_struct: n,
                n_total,
                cols,
                lower,
                upper,
                rhs: p.rhs.clone(),
                cost,
                state: vec![VarState::Free; n_total],
                basis: vec![usize::MAX; m],
                binv_t: DMatrix::identity(m, m),
                xb: DVector::zeros(m),
                rest: vec![0.0; n_total],
                artificial_start: n + slack_count,
                degenerate_run: 0,
                bland: false,
                iterations: 0,
                senses: p.senses.clone(),
            };
            sx.init_states(&slack_of_row);
            sx
        }

        fn init_states(&mut self, slack_of_row: &[usize]) {
            // structural variables rest at a finite bound, preferring the lower one
            for j in 0..self.n_struct {
                self.state[j] = if self.lower[j].is_finite() {
                    self.rest[j] = self.lower[j];
                    VarState::AtLower
                } else if self.upper[j].is_finite() {
                    self.rest[j] = self.upper[j];
                    VarState::AtUpper
                } else {
                    self.rest[j] = 0.0;
                    VarState::Free
                };
            }
            for j in self.n_struct..self.n_total {
                self.state[j] = VarState::AtLower;
                self.rest[j] = 0.0;
            }
            // residuals wrt the nonbasic resting point decide the initial basis
            let residual = self.row_residuals();
            for i in 0..self.m {
                let sl = slack_of_row[i];
                if sl != usize::MAX && residual[i] >= 0.0 {
                    self.make_basic(sl, i, residual[i]);
                } else {
                    // artificial with coefficient matching the residual sign
                    let a = self.artificial_start + i;
                    let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                    self.cols[(i, a)] = sign;
                    self.make_basic(a, i, residual[i] * sign);
                    // basis column is +-e_i, so the inverse row is too
                    self.binv_t[(i, i)] = sign;
                }
            }
        }

        fn make_basic(&mut self, j: usize, row: usize, value: f64) {
            self.state[j] = VarState::Basic(row);
            self.basis[row] = j;
            self.xb[row] = value;
        }

        /// b - A x_N over the nonbasic resting values.
        fn row_residuals(&self) -> DVector<f64> {
            let mut r = self.rhs.clone();
            for j in 0..self.n_total {
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                let v = self.rest[j];
                if v != 0.0 {
                    r.axpy(-v, &self.cols.column(j).clone_owned(), 1.0);
                }
            }
            r
        }

        fn refresh_basic_values(&mut self) {
            let mut r = self.rhs.clone();
            for j in 0..self.n_total {
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                let v = self.rest[j];
                if v != 0.0 {
                    r.axpy(-v, &self.cols.column(j).clone_owned(), 1.0);
                }
            }
            // xb = binv * r = binv_t' * r
            self.xb = self.binv_t.tr_mul(&r);
        }

        fn refactor(&mut self) -> Result<(), LpError> {
            let mut b = DMatrix::zeros(self.m, self.m);
            for (row, &j) in self.basis.iter().enumerate() {
                b.set_column(row, &self.cols.column(j));
            }
            match b.try_inverse() {
                Some(inv) => {
                    self.binv_t = inv.transpose();
                    self.refresh_basic_values();
                    Ok(())
                }
                None => Err(LpError::NumericalBreakdown(
                    "singular basis during refactorization".into(),
                )),
            }
        }

        fn value_of(&self, j: usize) -> f64 {
            match self.state[j] {
                VarState::Basic(row) => self.xb[row],
                _ => self.rest[j],
            }
        }

        fn run_phase(&mut self, phase_one: bool) -> Result<PhaseEnd, LpError> {
            let iter_cap = 200 * (self.m + self.n_total) + 10_000;
            self.degenerate_run = 0;
            self.bland = false;
            loop {
                self.iterations += 1;
                if self.iterations > iter_cap {
                    return Err(LpError::NumericalBreakdown(
                        "iteration cap exceeded; cycling suspected".into(),
                    ));
                }
                if self.iterations.is_multiple_of(64) {
                    self.refresh_basic_values();
                }
                if self.iterations.is_multiple_of(512) {
                    self.refactor()?;
                }
                match self.step(phase_one)? {
                    Step::Done(end) => return Ok(end),
                    Step::Pivoted => {}
                }
            }
        }

        fn reduced_costs(&self) -> (DVector<f64>, Vec<f64>) {
            let mut cb = DVector::zeros(self.m);
            for (row, &j) in self.basis.iter().enumerate() {
                cb[row] = self.cost[j];
            }
            // y' = c_B' B^-1, i.e. y = binv_t * c_B
            let y = &self.binv_t * cb;
            let z = self.cols.tr_mul(&y);
            let mut d = vec![0.0; self.n_total];
            for j in 0..self.n_total {
                d[j] = self.cost[j] - z[j];
            }
            (y, d)
        }

        fn pick_entering(&self, d: &[f64]) -> Option<(usize, f64)> {
            let mut best: Option<(usize, f64, f64)> = None; // (col, direction, score)
            for (j, dj) in d.iter().copied().enumerate() {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => {
                        if self.upper[j] - self.lower[j] < 1e-14 {
                            continue; // fixed variable, never enters
                        }
                        if dj > tol::REDUCED_COST {
                            1.0
                        } else {
                            continue;
                        }
                    }
                    VarState::AtUpper => {
                        if self.upper[j] - self.lower[j] < 1e-14 {
                            continue;
                        }
                        if dj < -tol::REDUCED_COST {
                            -1.0
                        } else {
                            continue;
                        }
                    }
                    VarState::Free => {
                        if dj.abs() > tol::REDUCED_COST {
                            dj.signum()
                        } else {
                            continue;
                        }
                    }
                };
                if self.bland {
                    return Some((j, dir));
                }
                let score = dj.abs();
                match best {
                    Some((_, _, s)) if s >= score => {}
                    _ => best = Some((j, dir, score)),
                }
            }
            best.map(|(j, dir, _)| (j, dir))
        }

        fn step(&mut self, phase_one: bool) -> Result<Step, LpError> {
            let (_, d) = self.reduced_costs();
            let Some((entering, dir)) = self.pick_entering(&d) else {
                return Ok(Step::Done(PhaseEnd::Optimal));
            };
            let w = self
                .binv_t
                .tr_mul(&self.cols.column(entering).clone_owned());

            // own bound span limits a flip from one bound to the other
            let span = self.upper[entering] - self.lower[entering];
            let own_limit = if span.is_finite() {
                span
            } else {
                f64::INFINITY
            };

            // blocking candidates: (step, row, pivot magnitude, hits_upper)
            let mut candidates: Vec<(f64, usize, f64, bool)> = Vec::new();
            for i in 0..self.m {
                let rate = -dir * w[i]; // d(xb_i)/dt
                if rate < -tol::PIVOT {
                    let lo = self.lower[self.basis[i]];
                    if lo.is_finite() {
                        let t = ((self.xb[i] - lo) / -rate).max(0.0);
                        candidates.push((t, i, w[i].abs(), false));
                    }
                } else if rate > tol::PIVOT {
                    let hi = self.upper[self.basis[i]];
                    if hi.is_finite() {
                        let t = ((hi - self.xb[i]) / rate).max(0.0);
                        candidates.push((t, i, w[i].abs(), true));
                    }
                }
            }

            let min_block = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);

            if own_limit <= min_block {
                if !own_limit.is_finite() {
                    if phase_one {
                        return Err(LpError::NumericalBreakdown(
                            "unbounded auxiliary objective".into(),
                        ));
                    }
                    return Ok(Step::Done(PhaseEnd::Unbounded));
                }
                // bound flip: no basis change
                let t = own_limit;
                for i in 0..self.m {
                    self.xb[i] -= dir * t * w[i];
                }
                self.rest[entering] += dir * t;
                self.state[entering] = match self.state[entering] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                self.note_degeneracy(t);
                return Ok(Step::Pivoted);
            }

            // pick the blocking row: among near-minimal ratios, the one with the
            // largest pivot, ties by lowest row index
            let window = min_block + 1e-9 * (1.0 + min_block.abs());
            let mut pick: Option<(usize, f64, f64, bool)> = None; // (row, |pivot|, t, hits_upper)
            for &(t, i, piv, up) in &candidates {
                if t <= window {
                    match pick {
                        Some((_, best_piv, _, _)) if best_piv >= piv => {}
                        _ => pick = Some((i, piv, t, up)),
                    }
                }
            }
            let Some((row, piv, t, hits_upper)) = pick else {
                if phase_one {
                    return Err(LpError::NumericalBreakdown(
                        "unbounded auxiliary objective".into(),
                    ));
                }
                return Ok(Step::Done(PhaseEnd::Unbounded));
            };
            if piv < tol::PIVOT {
                // recovery: widen the acceptance window before giving up
                let wide = min_block.max(1e-7) * (1.0 + 1e-6) + 1e-7;
                let mut alt: Option<(usize, f64, f64, bool)> = None;
                for &(tc, i, pv, up) in &candidates {
                    if tc <= wide {
                        match alt {
                            Some((_, bp, _, _)) if bp >= pv => {}
                            _ => alt = Some((i, pv, tc, up)),
                        }
                    }
                }
                match alt {
                    Some((r2, p2, t2, u2)) if p2 >= tol::PIVOT_HARD => {
                        self.pivot(entering, dir, r2, t2, u2, &w);
                        return Ok(Step::Pivoted);
                    }
                    _ => {
                        return Err(LpError::NumericalBreakdown(format!(
                            "no acceptable pivot (best magnitude {piv:.3e})"
                        )))
                    }
                }
            }
            self.pivot(entering, dir, row, t, hits_upper, &w);
            Ok(Step::Pivoted)
        }

        fn note_degeneracy(&mut self, t: f64) {
            if t <= tol::DEGENERATE_STEP {
                self.degenerate_run += 1;
                if self.degenerate_run > 2 * (self.m + self.n_total) {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }

        fn pivot(
            &mut self,
            entering: usize,
            dir: f64,
            row: usize,
            t: f64,
            hits_upper: bool,
            w: &DVector<f64>,
        ) {
            let leaving = self.basis[row];
            let entering_value = self.value_of(entering) + dir * t;
            for i in 0..self.m {
                self.xb[i] -= dir * t * w[i];
            }
            self.state[leaving] = if hits_upper {
                self.rest[leaving] = self.upper[leaving];
                VarState::AtUpper
            } else {
                self.rest[leaving] = self.lower[leaving];
                VarState::AtLower
            };

            // basis inverse update; binv_t holds rows of B^-1 as columns
            let pivot = w[row];
            let mut pivot_col = self.binv_t.column(row).clone_owned();
            pivot_col /= pivot;
            self.binv_t.set_column(row, &pivot_col);
            for i in 0..self.m {
                if i == row || w[i] == 0.0 {
                    continue;
                }
                let wi = w[i];
                let mut col = self.binv_t.column_mut(i);
                col.axpy(-wi, &pivot_col, 1.0);
            }

            self.basis[row] = entering;
            self.state[entering] = VarState::Basic(row);
            self.xb[row] = entering_value;
            self.note_degeneracy(t);
        }

        /// After phase 1: pivot zero-valued artificials out of the basis where
        /// possible and freeze every artificial at zero.
        fn retire_artificials(&mut self) -> Result<(), LpError> {
            for row in 0..self.m {
                let j = self.basis[row];
                if j < self.artificial_start {
                    continue;
                }
                // try any non-artificial column with a usable pivot in this row
                let mut replaced = false;
                for cand in 0..self.artificial_start {
                    if matches!(self.state[cand], VarState::Basic(_)) {
                        continue;
                    }
                    let w = self.binv_t.tr_mul(&self.cols.column(cand).clone_owned());
                    if w[row].abs() > tol::PIVOT {
                        self.pivot(cand, 1.0, row, 0.0, false, &w);
                        // the artificial leaves at its lower bound 0
                        replaced = true;
                        break;
                    }
                }
                if !replaced {
                    // redundant row: the artificial stays basic, pinned at zero
                    self.xb[row] = 0.0;
                }
            }
            for a in self.artificial_start..self.n_total {
                self.upper[a] = 0.0;
                if !matches!(self.state[a], VarState::Basic(_)) {
                    self.state[a] = VarState::AtLower;
                    self.rest[a] = 0.0;
                }
            }
            Ok(())
        }

        fn primal_infeasibility(&self) -> f64 {
            let mut worst: f64 = 0.0;
            for i in 0..self.m {
                let j = self.basis[i];
                let v = self.xb[i];
                if self.lower[j].is_finite() {
                    worst = worst.max(self.lower[j] - v);
                }
                if self.upper[j].is_finite() {
                    worst = worst.max(v - self.upper[j]);
                }
            }
            worst
        }

        fn phase_one_needed(&self) -> bool {
            (self.artificial_start..self.n_total)
                .any(|a| matches!(self.state[a], VarState::Basic(_)) && self.value_of(a) > 0.0)
        }

        fn scale(&self) -> f64 {
            1.0 + self.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()))
        }

        pub(super) fn solve(mut self) -> Result<LpResult, LpError> {
            let n = self.n_struct;
            let m = self.m;

            if self.phase_one_needed() {
                let saved = self.cost.clone();
                self.cost = vec![0.0; self.n_total];
                for a in self.artificial_start..self.n_total {
                    self.cost[a] = -1.0;
                }
                match self.run_phase(true)? {
                    PhaseEnd::Optimal => {}
                    PhaseEnd::Unbounded => {
                        return Err(LpError::NumericalBreakdown(
                            "auxiliary problem reported unbounded".into(),
                        ))
                    }
                }
                let infeas: f64 = (self.artificial_start..self.n_total)
                    .map(|a| self.value_of(a).max(0.0))
                    .sum();
                if infeas > tol::FEAS * self.scale() {
                    return Ok(LpResult::infeasible(n, m));
                }
                self.retire_artificials()?;
                self.cost = saved;
            } else {
                for a in self.artificial_start..self.n_total {
                    self.upper[a] = 0.0;
                }
            }

            let end = self.run_phase(false)?;
            if matches!(end, PhaseEnd::Unbounded) {
                return Ok(LpResult::unbounded(n, m));
            }

            // final hygiene: recompute values and re-verify feasibility
            self.refresh_basic_values();
            if self.primal_infeasibility() > tol::FEAS * self.scale() {
                self.refactor()?;
                let end = self.run_phase(false)?;
                if matches!(end, PhaseEnd::Unbounded) {
                    return Ok(LpResult::unbounded(n, m));
                }
                self.refresh_basic_values();
                if self.primal_infeasibility() > tol::FEAS * self.scale() {
                    return Err(LpError::NumericalBreakdown(format!(
                        "residual primal infeasibility {:.3e} after recovery",
                        self.primal_infeasibility()
                    )));
                }
            }

            let mut point = DVector::zeros(n);
            for j in 0..n {
                point[j] = self.value_of(j);
            }
            let mut cb = DVector::zeros(m);
            for (row, &j) in self.basis.iter().enumerate() {
                cb[row] = self.cost[j];
            }
            let duals = &self.binv_t * cb;
            let value = self.cost[..n]
                .iter()
                .enumerate()
                .map(|(j, c)| c * point[j])
                .sum();
            let _ = &self.senses;
            Ok(LpResult {
                status: LpStatus::Optimal,
                value,
                point,
                duals,
            })
        }
    }
}
