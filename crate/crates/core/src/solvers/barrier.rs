//! Log-barrier interior-point method for linearly constrained programs with
//! second-order cone rows and convex quadratic rows.
//!
//! The solver follows the classic path-following recipe: replace every
//! inequality by a logarithmic barrier term, minimize `objective/μ + Φ` with
//! damped Newton steps that keep equality rows satisfied exactly, and shrink
//! `μ` geometrically. A cone `‖Fv+g‖₂ ≤ h·v+e` contributes
//! `−ln((h·v+e)² − ‖Fv+g‖²)`, the standard barrier for the second-order
//! cone; quadratic rows and linear rows contribute `−ln(slack)`.
//!
//! Feasibility is established by an auxiliary phase that minimizes a single
//! relaxation variable added to every inequality. Because a strictly
//! feasible point of the *original* rows may not exist (optima of thin
//! problems often sit on a lower-dimensional face), phase 2 runs on rows
//! relaxed by a tiny `δ` derived from the phase-1 optimum; the relaxation is
//! skipped entirely when phase 1 proves an interior point with margin.
//!
//! ℓ1 and ℓ∞ cone rows are rewritten into linear rows (with auxiliary
//! variables for ℓ1) before solving, so the barrier machinery only ever sees
//! ℓ2 cones. Every variable is clipped to virtual bounds `±1e9`; an optimum
//! pressed against a virtual bound that the caller left unbounded is
//! reported as `Unbounded`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Norm;

use super::{SolveResult, SolveStatus};

/// `‖F v + g‖ ≤ h·v + e` in the given norm.
#[derive(Debug, Clone)]
pub struct ConeRow {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub e: f64,
    pub norm: Norm,
}

impl ConeRow {
    pub fn l2(f: DMatrix<f64>, g: DVector<f64>, h: DVector<f64>, e: f64) -> Self {
        ConeRow { f, g, h, e, norm: Norm::L2 }
    }

    /// `‖Fv+g‖ − (h·v+e)`; positive means violated.
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        let r = &self.f * v + &self.g;
        self.norm.eval(r.as_slice()) - (self.h.dot(v) + self.e)
    }
}

/// `vᵀ Q v + linear·v ≤ rhs` with `Q` positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadConstraintRow {
    pub q: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub rhs: f64,
}

impl QuadConstraintRow {
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.q * v)[(0, 0)] + self.linear.dot(v) - self.rhs
    }
}

/// A conic program: `max/min objective·v` subject to equality rows,
/// linear `≤` rows, cone rows, convex quadratic rows, and variable bounds.
#[derive(Debug, Clone)]
pub struct SocpProblem {
    pub maximize: bool,
    pub objective: DVector<f64>,
    pub eq: Vec<(DVector<f64>, f64)>,
    pub linear: Vec<(DVector<f64>, f64)>,
    pub cones: Vec<ConeRow>,
    pub quads: Vec<QuadConstraintRow>,
    pub bounds: Vec<(f64, f64)>,
    /// Optional strictly feasible point. When it satisfies the equality rows
    /// and keeps every inequality slack above `1e-6`, the feasibility phase
    /// is skipped entirely — worth providing on repeated membership queries.
    pub warm_start: Option<DVector<f64>>,
}

impl SocpProblem {
    pub fn new(maximize: bool, objective: DVector<f64>) -> Self {
        let n = objective.len();
        SocpProblem {
            maximize,
            objective,
            eq: Vec::new(),
            linear: Vec::new(),
            cones: Vec::new(),
            quads: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            warm_start: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Worst violation of the problem's own rows and bounds at `v`.
    pub fn residual_at(&self, v: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in &self.eq {
            worst = worst.max((a.dot(v) - b).abs());
        }
        for (a, b) in &self.linear {
            worst = worst.max(a.dot(v) - b);
        }
        for c in &self.cones {
            worst = worst.max(c.violation(v));
        }
        for q in &self.quads {
            worst = worst.max(q.violation(v));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_finite() {
                worst = worst.max(lo - v[j]);
            }
            if hi.is_finite() {
                worst = worst.max(v[j] - hi);
            }
        }
        worst
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::invalid("bounds length must match variable count"));
        }
        for &(lo, hi) in &self.bounds {
            if lo > hi {
                return Err(Error::invalid(format!("bound [{lo}, {hi}] is empty")));
            }
        }
        for (a, _) in self.eq.iter().chain(self.linear.iter()) {
            if a.len() != n {
                return Err(Error::invalid("row width must match variable count"));
            }
        }
        for c in &self.cones {
            if c.f.ncols() != n || c.h.len() != n || c.g.len() != c.f.nrows() {
                return Err(Error::invalid("cone row dimensions are inconsistent"));
            }
        }
        for q in &self.quads {
            if q.q.nrows() != n || q.q.ncols() != n || q.linear.len() != n {
                return Err(Error::invalid("quadratic row dimensions are inconsistent"));
            }
        }
        Ok(())
    }
}

const VIRTUAL_BOUND: f64 = 1e9;
const AUX_BOUND: f64 = 1e12;
const UNBOUNDED_DETECT: f64 = 0.9e9;
const MU_STOP: f64 = 1e-9;
const MU_FACTOR: f64 = 0.2;
const DECREMENT_STOP: f64 = 1e-11;
const MAX_INNER: usize = 500;
const MAX_NEWTON_TOTAL: usize = 2000;

/// Barrier terms of one phase, over `n` internal variables.
struct Terms {
    n: usize,
    cost: DVector<f64>,
    eq: DMatrix<f64>,
    lin: Vec<(DVector<f64>, f64)>,
    boxes: Vec<(usize, f64, f64)>,
    cones: Vec<CachedCone>,
    quads: Vec<(DMatrix<f64>, DVector<f64>, f64)>,
}

struct CachedCone {
    f: DMatrix<f64>,
    g: DVector<f64>,
    h: DVector<f64>,
    e: f64,
    /// `FᵀF`, reused in every Hessian assembly.
    ftf: DMatrix<f64>,
}

impl Terms {
    fn theta(&self) -> f64 {
        (self.lin.len() + 2 * self.boxes.len() + 2 * self.cones.len() + self.quads.len()) as f64
    }

    /// Largest violation across all inequality terms (equality rows excluded).
    fn max_violation(&self, v: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (a, b) in &self.lin {
            worst = worst.max(a.dot(v) - b);
        }
        for &(i, lo, hi) in &self.boxes {
            worst = worst.max(lo - v[i]).max(v[i] - hi);
        }
        for c in &self.cones {
            let r = &c.f * v + &c.g;
            worst = worst.max(r.norm() - (c.h.dot(v) + c.e));
        }
        for (q, l, rhs) in &self.quads {
            worst = worst.max((v.transpose() * q * v)[(0, 0)] + l.dot(v) - rhs);
        }
        worst
    }

    /// Smallest slack across all terms; positive means strictly interior.
    fn margin(&self, v: &DVector<f64>) -> f64 {
        let mut worst = f64::INFINITY;
        for (a, b) in &self.lin {
            worst = worst.min(b - a.dot(v));
        }
        for &(i, lo, hi) in &self.boxes {
            worst = worst.min(v[i] - lo).min(hi - v[i]);
        }
        for c in &self.cones {
            let r = &c.f * v + &c.g;
            let a = c.h.dot(v) + c.e;
            worst = worst.min(a).min(a * a - r.norm_squared());
        }
        for (q, l, rhs) in &self.quads {
            worst = worst.min(rhs - (v.transpose() * q * v)[(0, 0)] - l.dot(v));
        }
        worst
    }

    fn strictly_feasible(&self, v: &DVector<f64>) -> bool {
        self.margin(v) > 0.0
    }

    /// `objective/μ + Φ`; assumes `v` strictly feasible.
    fn merit(&self, v: &DVector<f64>, mu: f64) -> f64 {
        let mut phi = 0.0f64;
        for (a, b) in &self.lin {
            phi -= (b - a.dot(v)).ln();
        }
        for &(i, lo, hi) in &self.boxes {
            phi -= (v[i] - lo).ln() + (hi - v[i]).ln();
        }
        for c in &self.cones {
            let r = &c.f * v + &c.g;
            let a = c.h.dot(v) + c.e;
            phi -= (a * a - r.norm_squared()).ln();
        }
        for (q, l, rhs) in &self.quads {
            phi -= (rhs - (v.transpose() * q * v)[(0, 0)] - l.dot(v)).ln();
        }
        self.cost.dot(v) / mu + phi
    }

    /// Gradient and Hessian of the merit function at a strictly feasible `v`.
    fn grad_hess(&self, v: &DVector<f64>, mu: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut grad = &self.cost / mu;
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for (a, b) in &self.lin {
            let s = b - a.dot(v);
            let inv = 1.0 / s;
            grad.axpy(inv, a, 1.0);
            rank_one_update(&mut hess, a, inv * inv);
        }
        for &(i, lo, hi) in &self.boxes {
            let s_lo = v[i] - lo;
            let s_hi = hi - v[i];
            grad[i] += 1.0 / s_hi - 1.0 / s_lo;
            hess[(i, i)] += 1.0 / (s_lo * s_lo) + 1.0 / (s_hi * s_hi);
        }
        for c in &self.cones {
            let r = &c.f * v + &c.g;
            let a = c.h.dot(v) + c.e;
            let d = a * a - r.norm_squared();
            // ∇D = 2a·h − 2Fᵀr
            let mut s_vec = &c.h * (2.0 * a);
            s_vec.gemv_tr(-2.0, &c.f, &r, 1.0);
            grad.axpy(-1.0 / d, &s_vec, 1.0);
            rank_one_update(&mut hess, &s_vec, 1.0 / (d * d));
            scaled_matrix_add(&mut hess, &c.ftf, 2.0 / d);
            rank_one_update(&mut hess, &c.h, -2.0 / d);
        }
        for (q, l, rhs) in &self.quads {
            let s = rhs - (v.transpose() * q * v)[(0, 0)] - l.dot(v);
            let mut w = q * v * 2.0;
            w += l;
            grad.axpy(1.0 / s, &w, 1.0);
            rank_one_update(&mut hess, &w, 1.0 / (s * s));
            scaled_matrix_add(&mut hess, q, 2.0 / s);
        }
        (grad, hess)
    }
}

fn rank_one_update(h: &mut DMatrix<f64>, a: &DVector<f64>, scale: f64) {
    let n = a.len();
    for i in 0..n {
        let ai = a[i] * scale;
        if ai == 0.0 {
            continue;
        }
        for j in 0..n {
            h[(i, j)] += ai * a[j];
        }
    }
}

/// `h += s·m`, elementwise, without allocating.
fn scaled_matrix_add(h: &mut DMatrix<f64>, m: &DMatrix<f64>, s: f64) {
    for (hij, mij) in h.iter_mut().zip(m.iter()) {
        *hij += s * mij;
    }
}

/// Outcome of one barrier path-following run. `mu_final` is the smallest μ
/// whose centering problem was solved to the Newton-decrement tolerance —
/// the honest certificate level even when the path stagnates earlier than
/// `MU_STOP` for stiffness reasons.
struct PathResult {
    v: DVector<f64>,
    mu_final: f64,
    newton_steps: usize,
    clean: bool,
}

/// Solve one equality-constrained Newton system. Barrier Hessians get
/// extremely stiff near the end of the path (`1/slack²` terms), so the plain
/// LU solve is polished with iterative refinement and judged by backward
/// error rather than an absolute residual; progressively regularized systems
/// serve as a fallback for genuinely singular matrices.
fn kkt_step(
    hess: &DMatrix<f64>,
    eq: &DMatrix<f64>,
    grad: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = hess.nrows();
    let k = eq.nrows();
    let dim = n + k;
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..n {
        rhs[i] = -grad[i];
    }
    for reg in [0.0, 1e-12, 1e-8] {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = hess[(i, j)];
            }
            m[(i, i)] += reg;
        }
        for r in 0..k {
            for j in 0..n {
                m[(n + r, j)] = eq[(r, j)];
                m[(j, n + r)] = eq[(r, j)];
            }
            m[(n + r, n + r)] = -reg;
        }
        let lu = m.clone().lu();
        let Some(mut sol) = lu.solve(&rhs) else { continue };
        for _ in 0..2 {
            let r = &rhs - &m * &sol;
            match lu.solve(&r) {
                Some(corr) => sol += corr,
                None => break,
            }
        }
        if sol.iter().all(|x| x.is_finite()) {
            let resid = (&m * &sol - &rhs).norm();
            let scale = m.amax() * (1.0 + sol.norm()) + rhs.norm();
            if resid.is_finite() && resid <= 1e-7 * (1.0 + scale) {
                return Some(sol.rows(0, n).into_owned());
            }
        }
    }
    None
}

/// Follow the central path from a strictly feasible `v0`.
fn follow_path(terms: &Terms, v0: DVector<f64>, budget: &mut usize) -> PathResult {
    let mut v = v0;
    let mut mu = 1.0f64;
    let mut clean = true;
    let mut newton_steps = 0usize;
    let mut mu_certified = f64::INFINITY;
    'path: loop {
        let mut centered = false;
        for _ in 0..MAX_INNER {
            if *budget == 0 {
                clean = false;
                break 'path;
            }
            let (grad, hess) = terms.grad_hess(&v, mu);
            let Some(dv) = kkt_step(&hess, &terms.eq, &grad) else {
                // `1/slack²` terms eventually exceed what f64 elimination can
                // resolve; late in the path that is stagnation, not failure
                if mu >= 1e-6 {
                    clean = false;
                }
                break 'path;
            };
            let decrement = (-grad.dot(&dv)).max(0.0);
            if 0.5 * decrement < DECREMENT_STOP {
                centered = true;
                break;
            }
            newton_steps += 1;
            *budget -= 1;
            let slope = grad.dot(&dv);
            let base = terms.merit(&v, mu);
            let mut alpha = 1.0f64;
            let mut accepted = false;
            let noise_floor = 1e-13 * (1.0 + base.abs());
            for _ in 0..60 {
                // once the Armijo target shrinks below the merit's round-off,
                // any "acceptance" would be noise; treat the step as failed
                if 0.25 * alpha * (-slope) < noise_floor {
                    break;
                }
                let trial = &v + &dv * alpha;
                if terms.strictly_feasible(&trial)
                    && terms.merit(&trial, mu) <= base + 0.25 * alpha * slope
                {
                    v = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no representable step improves the merit at this μ
                break;
            }
        }
        if centered {
            mu_certified = mu;
        }
        if mu < MU_STOP {
            break;
        }
        mu *= MU_FACTOR;
    }
    if !mu_certified.is_finite() {
        clean = false;
        mu_certified = mu;
    }
    PathResult { v, mu_final: mu_certified, newton_steps, clean }
}

/// Internal expanded form: ℓ2 cones only, auxiliary variables appended.
struct Expanded {
    n: usize,
    n_orig: usize,
    cost: DVector<f64>,
    eq: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    lin: Vec<(DVector<f64>, f64)>,
    boxes: Vec<(usize, f64, f64)>,
    cones: Vec<(DMatrix<f64>, DVector<f64>, DVector<f64>, f64)>,
    quads: Vec<(DMatrix<f64>, DVector<f64>, f64)>,
    virtual_lo: Vec<bool>,
    virtual_hi: Vec<bool>,
    scale: f64,
}

fn pad(v: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut out = DVector::<f64>::zeros(n);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

fn expand(p: &SocpProblem) -> Result<Expanded> {
    let n_orig = p.num_vars();
    let sign = if p.maximize { -1.0 } else { 1.0 };

    // symmetrize and certify quadratic rows up front
    let mut quads = Vec::with_capacity(p.quads.len());
    for (idx, qr) in p.quads.iter().enumerate() {
        let q = (&qr.q + qr.q.transpose()) * 0.5;
        let max_abs = q.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let shift = 1e-8 * (1.0 + max_abs);
        let shifted = &q + DMatrix::<f64>::identity(n_orig, n_orig) * shift;
        if linalg::cholesky(&shifted).is_err() {
            return Err(Error::NonConvexContinuousPart { row: idx });
        }
        quads.push((q, qr.linear.clone(), qr.rhs));
    }

    let n_aux: usize = p
        .cones
        .iter()
        .filter(|c| c.norm == Norm::L1 && c.f.nrows() > 0)
        .map(|c| c.f.nrows())
        .sum();
    let n = n_orig + n_aux;

    let mut cost = DVector::<f64>::zeros(n);
    for j in 0..n_orig {
        cost[j] = sign * p.objective[j];
    }

    let mut lin: Vec<(DVector<f64>, f64)> = p
        .linear
        .iter()
        .map(|(a, b)| (pad(a, n), *b))
        .collect();
    let mut cones = Vec::new();
    let mut next_aux = n_orig;
    for c in &p.cones {
        let rows = c.f.nrows();
        let h = pad(&c.h, n);
        if rows == 0 {
            // ‖()‖ = 0 ≤ h·v + e
            lin.push((-h, c.e));
            continue;
        }
        match c.norm {
            Norm::L2 => {
                let mut f = DMatrix::<f64>::zeros(rows, n);
                f.columns_mut(0, n_orig).copy_from(&c.f);
                cones.push((f, c.g.clone(), h, c.e));
            }
            Norm::Linf => {
                for i in 0..rows {
                    let fi = pad(&c.f.row(i).transpose(), n);
                    lin.push((&fi - &h, c.e - c.g[i]));
                    lin.push((-&fi - &h, c.e + c.g[i]));
                }
            }
            Norm::L1 => {
                let first = next_aux;
                for i in 0..rows {
                    let s_idx = next_aux;
                    next_aux += 1;
                    let fi = pad(&c.f.row(i).transpose(), n);
                    let mut a1 = fi.clone();
                    a1[s_idx] = -1.0;
                    lin.push((a1, -c.g[i]));
                    let mut a2 = -fi;
                    a2[s_idx] = -1.0;
                    lin.push((a2, c.g[i]));
                }
                let mut sum_row = -&h;
                for s_idx in first..next_aux {
                    sum_row[s_idx] = 1.0;
                }
                lin.push((sum_row, c.e));
            }
        }
    }

    let mut boxes = Vec::with_capacity(n);
    let mut virtual_lo = vec![false; n_orig];
    let mut virtual_hi = vec![false; n_orig];
    for j in 0..n_orig {
        let (lo, hi) = p.bounds[j];
        let lo_c = if lo > -VIRTUAL_BOUND {
            lo
        } else {
            virtual_lo[j] = true;
            -VIRTUAL_BOUND
        };
        let hi_c = if hi < VIRTUAL_BOUND {
            hi
        } else {
            virtual_hi[j] = true;
            VIRTUAL_BOUND
        };
        boxes.push((j, lo_c, hi_c));
    }
    for j in n_orig..n {
        boxes.push((j, 0.0, AUX_BOUND));
    }

    let k = p.eq.len();
    let mut eq = DMatrix::<f64>::zeros(k, n);
    let mut eq_rhs = DVector::<f64>::zeros(k);
    for (i, (a, b)) in p.eq.iter().enumerate() {
        for j in 0..n_orig {
            eq[(i, j)] = a[j];
        }
        eq_rhs[i] = *b;
    }

    let mut scale = 0.0f64;
    for (_, b) in &lin {
        scale = scale.max(b.abs());
    }
    for (_, b) in p.eq.iter() {
        scale = scale.max(b.abs());
    }
    for (_, _, _, e) in &cones {
        scale = scale.max(e.abs());
    }
    for (_, _, rhs) in &quads {
        scale = scale.max(rhs.abs());
    }

    let quads = quads
        .into_iter()
        .map(|(q, l, rhs)| {
            let mut qp = DMatrix::<f64>::zeros(n, n);
            qp.view_mut((0, 0), (n_orig, n_orig)).copy_from(&q);
            (qp, pad(&l, n), rhs)
        })
        .collect();

    Ok(Expanded {
        n,
        n_orig,
        cost,
        eq,
        eq_rhs,
        lin,
        boxes,
        cones,
        quads,
        virtual_lo,
        virtual_hi,
        scale,
    })
}

/// Drop linearly dependent equality rows; error out if an inconsistent row is
/// found. Returns the reduced system and a point satisfying it exactly.
fn reduce_equalities(
    eq: &DMatrix<f64>,
    rhs: &DVector<f64>,
    n: usize,
) -> Result<Option<(DMatrix<f64>, DVector<f64>, DVector<f64>)>> {
    let k = eq.nrows();
    if k == 0 {
        return Ok(Some((
            DMatrix::<f64>::zeros(0, n),
            DVector::<f64>::zeros(0),
            DVector::<f64>::zeros(n),
        )));
    }
    let qr = linalg::col_piv_qr(&eq.transpose());
    let keep: Vec<usize> = qr.permutation[..qr.rank].to_vec();
    let mut eq_red = DMatrix::<f64>::zeros(keep.len(), n);
    let mut rhs_red = DVector::<f64>::zeros(keep.len());
    for (i, &row) in keep.iter().enumerate() {
        eq_red.row_mut(i).copy_from(&eq.row(row));
        rhs_red[i] = rhs[row];
    }
    let v0 = linalg::least_squares(&eq_red, &rhs_red)?;
    let tol = 1e-7 * (1.0 + rhs.amax());
    for i in 0..k {
        if (eq.row(i).transpose().dot(&v0) - rhs[i]).abs() > tol {
            if std::env::var("SOCV_DBG").is_ok() {
                eprintln!(
                    "DBG reduce_eq: row {i}/{k} resid {:.3e} tol {tol:.3e} rank {} kept {:?} rhs {:?}",
                    (eq.row(i).transpose().dot(&v0) - rhs[i]).abs(),
                    qr.rank,
                    keep,
                    rhs.as_slice()
                );
            }
            return Ok(None);
        }
    }
    Ok(Some((eq_red, rhs_red, v0)))
}

fn terms_with_relaxation(x: &Expanded, eq: &DMatrix<f64>, delta: f64) -> Terms {
    Terms {
        n: x.n,
        cost: x.cost.clone(),
        eq: eq.clone(),
        lin: x.lin.iter().map(|(a, b)| (a.clone(), b + delta)).collect(),
        boxes: x
            .boxes
            .iter()
            .map(|&(i, lo, hi)| (i, lo - delta, hi + delta))
            .collect(),
        cones: x
            .cones
            .iter()
            .map(|(f, g, h, e)| CachedCone {
                f: f.clone(),
                g: g.clone(),
                h: h.clone(),
                e: e + delta,
                ftf: f.transpose() * f,
            })
            .collect(),
        quads: x
            .quads
            .iter()
            .map(|(q, l, rhs)| (q.clone(), l.clone(), rhs + delta))
            .collect(),
    }
}

/// Phase-1 terms over `(v, t)`: every inequality relaxed by `t`, minimize `t`.
fn phase1_terms(
    base: &Terms,
    t_upper: f64,
) -> Terms {
    let n = base.n + 1;
    let t = base.n;
    let mut cost = DVector::<f64>::zeros(n);
    cost[t] = 1.0;
    let k = base.eq.nrows();
    let mut eq = DMatrix::<f64>::zeros(k, n);
    eq.columns_mut(0, base.n).copy_from(&base.eq);

    let mut lin: Vec<(DVector<f64>, f64)> = Vec::new();
    for (a, b) in &base.lin {
        let mut a2 = pad(a, n);
        a2[t] = -1.0;
        lin.push((a2, *b));
    }
    for &(i, lo, hi) in &base.boxes {
        let mut a_lo = DVector::<f64>::zeros(n);
        a_lo[i] = -1.0;
        a_lo[t] = -1.0;
        lin.push((a_lo, -lo));
        let mut a_hi = DVector::<f64>::zeros(n);
        a_hi[i] = 1.0;
        a_hi[t] = -1.0;
        lin.push((a_hi, hi));
    }
    let cones = base
        .cones
        .iter()
        .map(|c| {
            let rows = c.f.nrows();
            let mut f = DMatrix::<f64>::zeros(rows, n);
            f.columns_mut(0, base.n).copy_from(&c.f);
            let mut h = pad(&c.h, n);
            h[t] = 1.0;
            CachedCone { ftf: f.transpose() * &f, f, g: c.g.clone(), h, e: c.e }
        })
        .collect();
    let quads = base
        .quads
        .iter()
        .map(|(q, l, rhs)| {
            let mut q2 = DMatrix::<f64>::zeros(n, n);
            q2.view_mut((0, 0), (base.n, base.n)).copy_from(q);
            let mut l2 = pad(l, n);
            l2[t] = -1.0;
            (q2, l2, *rhs)
        })
        .collect();
    Terms {
        n,
        cost,
        eq,
        lin,
        boxes: vec![(t, -1e4, t_upper)],
        cones,
        quads,
    }
}

/// Smallest value `a·v` can take over the bound box; `-∞` as soon as an
/// unbounded direction contributes.
fn box_min_linear(a: &DVector<f64>, bounds: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let c = a[i];
        if c == 0.0 {
            continue;
        }
        acc += c * if c > 0.0 { bounds[i].0 } else { bounds[i].1 };
        if !acc.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    acc
}

/// Lower bound on the box minimum of `vᵀQv + lin·v`, or `−∞` when no sound
/// bound applies. When `Q` restricted to its support is positive definite
/// and touches at most eight variables the bound is the exact minimum: every
/// lower/upper/interior activity pattern of the support variables is
/// enumerated, the free block is minimized in closed form, and the solution
/// is clamped back into the box, so each candidate is a feasible point and
/// the pattern of the true minimizer is among them. Larger positive
/// semidefinite supports fall back to dropping the (nonnegative) quadratic
/// part; indefinite matrices yield `−∞` so the caller certifies nothing.
fn box_quad_min(q: &DMatrix<f64>, lin: &DVector<f64>, bounds: &[(f64, f64)]) -> f64 {
    let n = q.nrows();
    let support: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| q[(i, j)] != 0.0))
        .collect();
    let in_support = |i: usize| support.binary_search(&i).is_ok();
    // variables the quadratic never touches contribute separably
    let mut acc = 0.0f64;
    for i in 0..n {
        if in_support(i) || lin[i] == 0.0 {
            continue;
        }
        acc += lin[i] * if lin[i] > 0.0 { bounds[i].0 } else { bounds[i].1 };
        if !acc.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    let k = support.len();
    if k == 0 {
        return acc;
    }
    let qs = DMatrix::from_fn(k, k, |i, j| q[(support[i], support[j])]);
    let lin_s = DVector::from_iterator(k, support.iter().map(|&v| lin[v]));
    if Cholesky::new(qs.clone()).is_none() {
        return f64::NEG_INFINITY;
    }
    if k > 8 {
        // certified PSD: the quadratic part is nonnegative everywhere
        for (pos, &v) in support.iter().enumerate() {
            let c = lin_s[pos];
            if c == 0.0 {
                continue;
            }
            acc += c * if c > 0.0 { bounds[v].0 } else { bounds[v].1 };
            if !acc.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
        return acc;
    }

    let mut best = f64::INFINITY;
    let patterns = 3usize.pow(k as u32);
    'pattern: for code in 0..patterns {
        let mut digit = code;
        let mut xs = DVector::<f64>::zeros(k);
        let mut free: Vec<usize> = Vec::new();
        for i in 0..k {
            let (lo, hi) = bounds[support[i]];
            match digit % 3 {
                0 => {
                    if !lo.is_finite() {
                        continue 'pattern;
                    }
                    xs[i] = lo;
                }
                1 => {
                    if !hi.is_finite() {
                        continue 'pattern;
                    }
                    xs[i] = hi;
                }
                _ => free.push(i),
            }
            digit /= 3;
        }
        if !free.is_empty() {
            let nf = free.len();
            let qff = DMatrix::from_fn(nf, nf, |i, j| qs[(free[i], free[j])]);
            let mut rhs = DVector::<f64>::zeros(nf);
            for (fi, &i) in free.iter().enumerate() {
                let mut cross = 0.0;
                for j in 0..k {
                    if !free.contains(&j) {
                        cross += qs[(i, j)] * xs[j];
                    }
                }
                rhs[fi] = -(cross + 0.5 * lin_s[i]);
            }
            let Some(ch) = Cholesky::new(qff) else {
                continue 'pattern;
            };
            let z = ch.solve(&rhs);
            for (fi, &i) in free.iter().enumerate() {
                let (lo, hi) = bounds[support[i]];
                xs[i] = z[fi].clamp(lo, hi);
            }
        }
        let val = (xs.transpose() * &qs * &xs)[(0, 0)] + lin_s.dot(&xs);
        best = best.min(val);
    }
    acc + best
}

/// Infeasibility by bound propagation: a linear row whose box minimum
/// already exceeds its rhs, a quadratic row whose certified-convex box
/// minimum does so, or a cone row whose right side is negative everywhere.
/// Catches restrictions that are hopeless by orders of magnitude, where the
/// feasibility phase would otherwise grind against its iteration budget.
fn trivially_infeasible(p: &SocpProblem) -> bool {
    let slack = |rhs: f64| rhs + 1e-9 * (1.0 + rhs.abs());
    for (a, b) in &p.linear {
        if box_min_linear(a, &p.bounds) > slack(*b) {
            return true;
        }
    }
    for q in &p.quads {
        if box_quad_min(&q.q, &q.linear, &p.bounds) > slack(q.rhs) {
            return true;
        }
    }
    for c in &p.cones {
        let neg_h = -&c.h;
        // max of h·v + e is −min of (−h)·v + e
        if -box_min_linear(&neg_h, &p.bounds) + c.e < -1e-9 {
            return true;
        }
    }
    false
}

pub fn solve_socp(p: &SocpProblem) -> Result<SolveResult> {
    p.check()?;
    let n_user = p.num_vars();
    if trivially_infeasible(p) {
        if std::env::var("SOCV_DBG").is_ok() {
            eprintln!("DBG solve_socp: trivially_infeasible fired");
        }
        return Ok(SolveResult::failed(SolveStatus::Infeasible, n_user));
    }
    let x = expand(p)?;
    let Some((eq_red, eq_rhs_red, v0)) = reduce_equalities(&x.eq, &x.eq_rhs, x.n)? else {
        if std::env::var("SOCV_DBG").is_ok() {
            eprintln!("DBG solve_socp: reduce_equalities inconsistent");
        }
        return Ok(SolveResult::failed(SolveStatus::Infeasible, n_user));
    };

    let base = terms_with_relaxation(&x, &eq_red, 0.0);
    let mut budget = MAX_NEWTON_TOTAL;
    let mut total_newton = 0usize;

    // a caller-provided interior point (projected back onto the equality
    // manifold, auxiliaries filled in) lets us skip phase 1 outright
    let mut interior_start: Option<DVector<f64>> = None;
    if let Some(ws) = &p.warm_start {
        if ws.len() == n_user {
            let mut w = pad(ws, x.n);
            let mut next_aux = x.n_orig;
            for c in &p.cones {
                if c.norm == Norm::L1 && c.f.nrows() > 0 {
                    let r = &c.f * ws + &c.g;
                    for i in 0..r.len() {
                        w[next_aux] = r[i].abs() + 2e-6;
                        next_aux += 1;
                    }
                }
            }
            let projected = if eq_red.nrows() > 0 {
                let resid = &eq_red * &w - &eq_rhs_red;
                match linalg::least_squares(&eq_red, &resid) {
                    Ok(corr) => {
                        w -= corr;
                        true
                    }
                    Err(_) => false,
                }
            } else {
                true
            };
            if projected && base.margin(&w) > 1e-6 {
                interior_start = Some(w);
            }
        }
    }
    if interior_start.is_none() && base.margin(&v0) > 1e-6 {
        interior_start = Some(v0.clone());
    }

    // phase 1, unless a start with interior margin is already at hand
    let (start, t_star) = if let Some(w) = interior_start {
        (w, f64::NEG_INFINITY)
    } else {
        let t0 = base.max_violation(&v0).max(0.0) + 1.0;
        let p1 = phase1_terms(&base, t0 + 1.0);
        let mut w0 = pad(&v0, x.n + 1);
        w0[x.n] = t0;
        debug_assert!(p1.strictly_feasible(&w0));
        let run = follow_path(&p1, w0, &mut budget);
        total_newton += run.newton_steps;
        if !run.clean {
            let mut r = SolveResult::failed(SolveStatus::NumericalLimit, n_user);
            r.iterations = total_newton;
            return Ok(r);
        }
        let t_star = run.v[x.n];
        if t_star > 1e-7 * (1.0 + x.scale) {
            let mut r = SolveResult::failed(SolveStatus::Infeasible, n_user);
            r.iterations = total_newton;
            return Ok(r);
        }
        (run.v.rows(0, x.n).into_owned(), t_star)
    };

    // phase 2 on δ-relaxed rows when the interior margin is thin
    let terms = if t_star < -1e-9 {
        base
    } else {
        let delta = t_star.max(0.0) + 1e-7;
        terms_with_relaxation(&x, &eq_red, delta)
    };
    if !terms.strictly_feasible(&start) {
        let mut r = SolveResult::failed(SolveStatus::NumericalLimit, n_user);
        r.iterations = total_newton;
        return Ok(r);
    }
    let run = follow_path(&terms, start, &mut budget);
    total_newton += run.newton_steps;

    let v = run.v;
    let point: Vec<f64> = (0..n_user).map(|j| v[j]).collect();
    let value: f64 = p
        .objective
        .iter()
        .zip(point.iter())
        .map(|(c, x)| c * x)
        .sum();

    let mut status = if run.clean { SolveStatus::Optimal } else { SolveStatus::NumericalLimit };
    for j in 0..n_user {
        if (x.virtual_hi[j] && v[j] > UNBOUNDED_DETECT)
            || (x.virtual_lo[j] && v[j] < -UNBOUNDED_DETECT)
        {
            status = SolveStatus::Unbounded;
        }
    }

    let v_point = DVector::from_column_slice(&point);
    let primal_residual = p.residual_at(&v_point).max(0.0);
    if status == SolveStatus::Optimal && primal_residual > 1e-4 * (1.0 + x.scale) {
        status = SolveStatus::NumericalLimit;
    }

    Ok(SolveResult {
        status,
        value,
        point,
        primal_residual,
        dual_gap: run.mu_final * terms.theta(),
        row_duals: Vec::new(),
        iterations: total_newton,
    })
}
