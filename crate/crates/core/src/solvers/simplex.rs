//! Dense two-phase simplex.
//!
//! Canonicalization maps the user problem to `min c·z, A z = b, z ≥ 0`:
//! finite lower bounds are shifted out, variables with only an upper bound
//! are mirrored, free variables are split, finite upper bounds become extra
//! `≤` rows, and `≤` rows gain slacks. Phase 1 starts from slack basics
//! wherever a row allows it and artificials elsewhere, so well-posed
//! feasibility problems need only a handful of artificial pivots.
//!
//! Pricing is Dantzig's rule (most negative reduced cost, lowest index on
//! ties) with a permanent switch to Bland's rule after a stall — the classic
//! guarantee against cycling on degenerate problems. Row multipliers are read
//! off the slack/artificial columns at the end, which gives a duality gap
//! the caller can check; the gap doubles as the optimality certificate.

use crate::error::{Error, Result};

use super::{SolveResult, SolveStatus};

/// `max/min objective·x` subject to `eq` rows `a·x = b`, `le` rows
/// `a·x ≤ b`, and per-variable bounds (±∞ allowed).
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub maximize: bool,
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(maximize: bool, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            maximize,
            objective,
            eq: Vec::new(),
            le: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::invalid("bounds length must match variable count"));
        }
        for (a, _) in self.eq.iter().chain(self.le.iter()) {
            if a.len() != n {
                return Err(Error::invalid("row width must match variable count"));
            }
        }
        for &(lo, hi) in &self.bounds {
            if lo > hi {
                return Err(Error::invalid(format!("bound [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    /// Worst violation of rows and bounds at `x`.
    pub fn residual_at(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in &self.eq {
            worst = worst.max((dot(a, x) - b).abs());
        }
        for (a, b) in &self.le {
            worst = worst.max(dot(a, x) - b);
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_finite() {
                worst = worst.max(lo - x[j]);
            }
            if hi.is_finite() {
                worst = worst.max(x[j] - hi);
            }
        }
        worst.max(0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How an internal column maps back to user variables.
#[derive(Clone, Copy)]
enum ColOrigin {
    /// `x_var = offset + dir·z`
    Shifted { var: usize, offset: f64, dir: f64 },
    SplitPos(usize),
    SplitNeg(usize),
    Other,
}

const PIVOT_EPS: f64 = 1e-9;
const STALL_LIMIT: usize = 64;

pub fn solve_lp(p: &LpProblem) -> Result<SolveResult> {
    p.check()?;
    let n_orig = p.num_vars();
    let n_user_rows = p.eq.len() + p.le.len();
    let sign = if p.maximize { -1.0 } else { 1.0 };

    // ---- canonicalize variables ----
    let mut origins: Vec<ColOrigin> = Vec::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut var_col = vec![usize::MAX; n_orig]; // first column of each variable
    let mut upper_rows: Vec<(usize, f64)> = Vec::new(); // (column, shifted upper)
    let mut obj_const = 0.0f64;
    for j in 0..n_orig {
        let (lo, hi) = p.bounds[j];
        let g = sign * p.objective[j];
        var_col[j] = origins.len();
        if lo.is_finite() {
            origins.push(ColOrigin::Shifted { var: j, offset: lo, dir: 1.0 });
            cost.push(g);
            obj_const += g * lo;
            if hi.is_finite() {
                upper_rows.push((var_col[j], hi - lo));
            }
        } else if hi.is_finite() {
            origins.push(ColOrigin::Shifted { var: j, offset: hi, dir: -1.0 });
            cost.push(-g);
            obj_const += g * hi;
        } else {
            origins.push(ColOrigin::SplitPos(j));
            cost.push(g);
            origins.push(ColOrigin::SplitNeg(j));
            cost.push(-g);
        }
    }
    let n_rows = n_user_rows + upper_rows.len();

    // ---- canonicalize rows: eq rows, user le rows, bound rows ----
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_rows);
    let mut rhs: Vec<f64> = Vec::with_capacity(n_rows);
    let mut is_eq: Vec<bool> = Vec::with_capacity(n_rows);
    for (a, b) in p.eq.iter().map(|(a, b)| (a, *b)).chain(p.le.iter().map(|(a, b)| (a, *b))) {
        let mut row = vec![0.0f64; cost.len()];
        let mut b_shift = b;
        for j in 0..n_orig {
            let aj = a[j];
            if aj == 0.0 {
                continue;
            }
            match origins[var_col[j]] {
                ColOrigin::Shifted { offset, dir, .. } => {
                    row[var_col[j]] = dir * aj;
                    b_shift -= aj * offset;
                }
                ColOrigin::SplitPos(_) => {
                    row[var_col[j]] = aj;
                    row[var_col[j] + 1] = -aj;
                }
                _ => unreachable!(),
            }
        }
        rows.push(row);
        rhs.push(b_shift);
        is_eq.push(rows.len() <= p.eq.len());
    }
    for &(col, ub) in &upper_rows {
        let mut row = vec![0.0f64; cost.len()];
        row[col] = 1.0;
        rows.push(row);
        rhs.push(ub);
        is_eq.push(false);
    }

    // slacks for inequality rows
    let n_struct = cost.len();
    for i in 0..n_rows {
        if !is_eq[i] {
            for r in rows.iter_mut() {
                r.push(0.0);
            }
            let k = rows[i].len() - 1;
            rows[i][k] = 1.0;
            cost.push(0.0);
            origins.push(ColOrigin::Other);
        }
    }

    // flip rows so rhs ≥ 0
    let mut flip = vec![1.0f64; n_rows];
    for i in 0..n_rows {
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
            rhs[i] = -rhs[i];
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    // basis: slack where its coefficient stayed +1, artificial otherwise
    let mut slack_col_of_row = vec![usize::MAX; n_rows];
    {
        let mut k = n_struct;
        for i in 0..n_rows {
            if !is_eq[i] {
                slack_col_of_row[i] = k;
                k += 1;
            }
        }
    }
    let mut basis = Vec::with_capacity(n_rows);
    let mut art_col_of_row = vec![usize::MAX; n_rows];
    for i in 0..n_rows {
        if slack_col_of_row[i] != usize::MAX && flip[i] > 0.0 {
            basis.push(slack_col_of_row[i]);
        } else {
            let k = cost.len();
            for (i2, r) in rows.iter_mut().enumerate() {
                r.push(if i2 == i { 1.0 } else { 0.0 });
            }
            cost.push(0.0);
            origins.push(ColOrigin::Other);
            art_col_of_row[i] = k;
            basis.push(k);
        }
    }
    let n_cols = cost.len();
    let is_artificial: Vec<bool> = (0..n_cols)
        .map(|k| art_col_of_row.contains(&k))
        .collect();

    // ---- dense tableau ----
    let width = n_cols + 1;
    let mut t = vec![0.0f64; n_rows * width];
    for i in 0..n_rows {
        t[i * width..i * width + n_cols].copy_from_slice(&rows[i]);
        t[i * width + n_cols] = rhs[i];
    }
    drop(rows);

    // cost rows as reduced costs w.r.t. the initial basis
    let mut c1 = vec![0.0f64; width];
    let mut c2 = vec![0.0f64; width];
    c2[..n_cols].copy_from_slice(&cost);
    for k in 0..n_cols {
        if is_artificial[k] {
            c1[k] = 1.0;
        }
    }
    for i in 0..n_rows {
        if is_artificial[basis[i]] {
            for k in 0..width {
                c1[k] -= t[i * width + k];
            }
        }
        // initial basics (slacks/artificials) have zero phase-2 cost: c2 ok
    }

    let mut state = Tableau {
        t,
        width,
        n_rows,
        n_cols,
        basis,
        is_artificial,
        iterations: 0,
    };
    let cap = 10 * (n_rows + n_cols).max(20);
    let scale_b = rhs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));

    // ---- phase 1 ----
    match state.run(&mut c1, Some(&mut c2), cap, 1e-9) {
        RunOutcome::Converged => {}
        _ => return Ok(SolveResult::failed(SolveStatus::NumericalLimit, n_orig)),
    }
    if -c1[n_cols] > 1e-9 * (1.0 + scale_b) {
        let mut r = SolveResult::failed(SolveStatus::Infeasible, n_orig);
        r.iterations = state.iterations;
        return Ok(r);
    }
    state.drive_out_basic_artificials(&mut c1, &mut c2);

    // ---- phase 2 ----
    let max_c = cost.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let outcome = state.run(&mut c2, None, cap, 1e-9 * (1.0 + max_c));
    let mut status = match outcome {
        RunOutcome::Converged => SolveStatus::Optimal,
        RunOutcome::Unbounded => {
            let mut r = SolveResult::failed(SolveStatus::Unbounded, n_orig);
            r.iterations = state.iterations;
            return Ok(r);
        }
        RunOutcome::IterationCap => SolveStatus::NumericalLimit,
    };

    // ---- recover point, value, duals ----
    let mut z = vec![0.0f64; n_cols];
    for i in 0..n_rows {
        z[state.basis[i]] = state.t[i * state.width + n_cols];
    }
    let mut x = vec![0.0f64; n_orig];
    for (k, origin) in origins.iter().enumerate() {
        match *origin {
            ColOrigin::Shifted { var, offset, dir } => x[var] = offset + dir * z[k],
            ColOrigin::SplitPos(var) => x[var] += z[k],
            ColOrigin::SplitNeg(var) => x[var] -= z[k],
            ColOrigin::Other => {}
        }
    }

    // π_i = −(final reduced cost of the column that started as e_i),
    // un-flipping rows whose sign was reversed during canonicalization
    let mut pi = vec![0.0f64; n_rows];
    for i in 0..n_rows {
        let col = if art_col_of_row[i] != usize::MAX {
            art_col_of_row[i]
        } else {
            slack_col_of_row[i]
        };
        pi[i] = -c2[col] * flip[i];
    }
    let internal_primal = -c2[n_cols];
    let internal_dual: f64 = (0..n_rows).map(|i| pi[i] * flip[i] * rhs[i]).sum();
    let dual_gap = (internal_primal - internal_dual).abs();
    let value = sign * (internal_primal + obj_const);
    let row_duals: Vec<f64> = pi[..n_user_rows].iter().map(|&d| sign * d).collect();

    let primal_residual = p.residual_at(&x);
    if status == SolveStatus::Optimal && primal_residual > 1e-7 * (1.0 + scale_b) {
        status = SolveStatus::NumericalLimit;
    }

    Ok(SolveResult {
        status,
        value,
        point: x,
        primal_residual,
        dual_gap,
        row_duals,
        iterations: state.iterations,
    })
}

enum RunOutcome {
    Converged,
    Unbounded,
    IterationCap,
}

struct Tableau {
    t: Vec<f64>,
    width: usize,
    n_rows: usize,
    n_cols: usize,
    basis: Vec<usize>,
    is_artificial: Vec<bool>,
    iterations: usize,
}

impl Tableau {
    fn run(
        &mut self,
        price: &mut [f64],
        mut shadow: Option<&mut Vec<f64>>,
        cap: usize,
        enter_eps: f64,
    ) -> RunOutcome {
        let width = self.width;
        let n_cols = self.n_cols;
        let mut in_basis = vec![false; n_cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let mut stall = 0usize;
        let mut best_obj = f64::INFINITY;
        let mut bland = false;
        loop {
            if self.iterations >= cap {
                return RunOutcome::IterationCap;
            }
            // pricing: most negative reduced cost (or first, under Bland)
            let mut enter = usize::MAX;
            let mut best = -enter_eps;
            for k in 0..n_cols {
                if in_basis[k] || self.is_artificial[k] {
                    continue;
                }
                let r = price[k];
                if r < best {
                    enter = k;
                    best = r;
                    if bland {
                        break;
                    }
                }
            }
            if enter == usize::MAX {
                return RunOutcome::Converged;
            }

            // ratio test; ties go to the smallest basis variable index
            let mut theta = f64::INFINITY;
            let mut pr = usize::MAX;
            for i in 0..self.n_rows {
                let y = self.t[i * width + enter];
                if y > PIVOT_EPS {
                    let limit = self.t[i * width + n_cols] / y;
                    if limit < theta - 1e-12
                        || (limit < theta + 1e-12
                            && (pr == usize::MAX || self.basis[i] < self.basis[pr]))
                    {
                        theta = limit;
                        pr = i;
                    }
                }
            }
            if pr == usize::MAX {
                return RunOutcome::Unbounded;
            }
            self.iterations += 1;

            // pivot
            let leaving = self.basis[pr];
            let piv = self.t[pr * width + enter];
            let inv = 1.0 / piv;
            for k in 0..width {
                self.t[pr * width + k] *= inv;
            }
            let (before, rest) = self.t.split_at_mut(pr * width);
            let (prow, after) = rest.split_at_mut(width);
            for chunk in before
                .chunks_exact_mut(width)
                .chain(after.chunks_exact_mut(width))
            {
                let f = chunk[enter];
                if f != 0.0 {
                    for k in 0..width {
                        chunk[k] -= f * prow[k];
                    }
                }
            }
            let f = price[enter];
            if f != 0.0 {
                for k in 0..width {
                    price[k] -= f * prow[k];
                }
            }
            if let Some(sh) = shadow.as_deref_mut() {
                let f = sh[enter];
                if f != 0.0 {
                    for k in 0..width {
                        sh[k] -= f * prow[k];
                    }
                }
            }
            in_basis[leaving] = false;
            in_basis[enter] = true;
            self.basis[pr] = enter;

            // stall detection → Bland's rule
            let obj = -price[n_cols];
            if obj < best_obj - 1e-12 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }

    /// Pivot degenerate basic artificials onto structural columns; rows that
    /// admit none are redundant and keep a zero artificial basic (harmless:
    /// such rows are all-zero in structural columns).
    fn drive_out_basic_artificials(&mut self, c1: &mut [f64], c2: &mut [f64]) {
        let width = self.width;
        for i in 0..self.n_rows {
            if !self.is_artificial[self.basis[i]] {
                continue;
            }
            let col = (0..self.n_cols).find(|&k| {
                !self.is_artificial[k]
                    && !self.basis.contains(&k)
                    && self.t[i * width + k].abs() > 1e-7
            });
            let Some(enter) = col else { continue };
            let piv = self.t[i * width + enter];
            let inv = 1.0 / piv;
            for k in 0..width {
                self.t[i * width + k] *= inv;
            }
            for i2 in 0..self.n_rows {
                if i2 == i {
                    continue;
                }
                let f = self.t[i2 * width + enter];
                if f != 0.0 {
                    for k in 0..width {
                        let v = self.t[i * width + k];
                        self.t[i2 * width + k] -= f * v;
                    }
                }
            }
            for price in [&mut *c1, &mut *c2] {
                let f = price[enter];
                if f != 0.0 {
                    for k in 0..width {
                        let v = self.t[i * width + k];
                        price[k] -= f * v;
                    }
                }
            }
            self.basis[i] = enter;
        }
    }
}
