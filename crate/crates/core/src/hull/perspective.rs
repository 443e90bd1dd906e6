//! Membership in the convex hull through the disjunctive description.
//!
//! A point `(x, y)` lies in `conv(Z)` iff it splits into slice
//! contributions: weights `λ ∈ Δ` over the domain points and per-slice
//! continuous parts `z^k` with
//!
//! ```text
//!     Σ λ_k x^k = x,    Σ (contributions) = y,
//!     ‖λ_k A x^k + B z^k + λ_k d‖ ≤ λ_k f(x^k)        for every k,
//! ```
//!
//! the perspective of each slice constraint (`λ_k = 0` forces the `k`-th
//! contribution to vanish, so the union stays closed). The oracle minimizes
//! a single relaxation `t` added to every row; the point is a member iff
//! `t* ≤ 0` and the signed margin is `−t*`.
//!
//! Without a `y_box`, `y` enters only through `By`, so `B` is first
//! compressed to a full-column-rank `B̂` and the sum constraint matches
//! `B̂`-coordinates — this keeps each slice bounded in the decision space
//! even when `B` has a null space. With a `y_box` the decomposition must
//! reproduce `y` itself, so the oracle keeps full-width blocks `w^k` and
//! adds the perspective of the box, `λ_k·lo ≤ w^k ≤ λ_k·hi`.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{column_compress, least_squares};
use crate::model::{ConicSet, MembershipVerdict, Norm};
use crate::solvers::{solve_lp, solve_socp, ConeRow, LpProblem, SocpProblem, SolveStatus};

/// Floor for the relaxation variable; membership optima live near zero.
const T_LOWER: f64 = -1e4;

/// Weight of the uniform component when blending the basic feasibility `λ`
/// into a strictly positive warm start.
const BLEND: f64 = 0.02;

/// Variable layout: `[λ (K) | z-blocks (K×m_z) | aux (L1 only) | t]`.
struct Layout {
    k: usize,
    m_z: usize,
    aux_per_slice: usize,
}

impl Layout {
    fn lambda(&self, kk: usize) -> usize {
        kk
    }
    fn z(&self, kk: usize, j: usize) -> usize {
        self.k + kk * self.m_z + j
    }
    fn aux(&self, kk: usize, i: usize) -> usize {
        self.k * (1 + self.m_z) + kk * self.aux_per_slice + i
    }
    fn t(&self) -> usize {
        self.k * (1 + self.m_z + self.aux_per_slice)
    }
    fn num_vars(&self) -> usize {
        self.t() + 1
    }
}

/// Slice-map data shared by the LP and SOCP paths.
struct SliceData {
    /// `B̂` (no box) or `B` (box present).
    bmap: DMatrix<f64>,
    /// Right-hand side of the z-sum rows: `ẑ_y` with `B̂ẑ_y = By`, or `y`.
    target: DVector<f64>,
    /// `A x^k + d` per domain point.
    anchors: Vec<DVector<f64>>,
    values: Vec<f64>,
    boxed: Option<Vec<(f64, Option<f64>)>>,
}

fn slice_data(set: &ConicSet, y: &DVector<f64>) -> Result<SliceData> {
    let (bmap, target, boxed) = match &set.y_box {
        Some(bx) => (set.b.clone(), y.clone(), Some(bx.clone())),
        None => {
            let (bhat, _) = column_compress(&set.b);
            let target = if bhat.ncols() == 0 {
                DVector::zeros(0)
            } else {
                least_squares(&bhat, &(&set.b * y))?
            };
            (bhat, target, None)
        }
    };
    let anchors = (0..set.domain.len())
        .map(|kk| &set.a * set.domain.point_vec(kk) + &set.d)
        .collect();
    Ok(SliceData {
        bmap,
        target,
        anchors,
        values: set.f_values(),
        boxed,
    })
}

/// Basic feasible weights for `Σλ_k x^k = x, λ ∈ Δ`, or
/// [`Error::QueryOutsideHull`] when none exist.
fn lambda_feasibility(set: &ConicSet, x: &DVector<f64>) -> Result<Vec<f64>> {
    let kk = set.domain.len();
    let mut lp = LpProblem::new(false, vec![0.0; kk]);
    lp.bounds = vec![(0.0, f64::INFINITY); kk];
    for i in 0..set.n {
        let row: Vec<f64> = (0..kk).map(|k| set.domain.point(k)[i] as f64).collect();
        lp.eq.push((row, x[i]));
    }
    lp.eq.push((vec![1.0; kk], 1.0));
    let r = solve_lp(&lp)?;
    match r.status {
        SolveStatus::Optimal => Ok(r.point),
        SolveStatus::Infeasible => Err(Error::QueryOutsideHull(format!(
            "x is not a convex combination of the {kk} domain points"
        ))),
        other => Err(Error::NumericalLimit(format!(
            "weight feasibility LP ended with status {other:?}"
        ))),
    }
}

fn equality_rows(set: &ConicSet, data: &SliceData, lay: &Layout, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
    let mut eq = Vec::new();
    let mut ones = DVector::zeros(lay.num_vars());
    for kk in 0..lay.k {
        ones[lay.lambda(kk)] = 1.0;
    }
    eq.push((ones, 1.0));
    for i in 0..set.n {
        let mut row = DVector::zeros(lay.num_vars());
        for kk in 0..lay.k {
            row[lay.lambda(kk)] = set.domain.point(kk)[i] as f64;
        }
        eq.push((row, x[i]));
    }
    for j in 0..lay.m_z {
        let mut row = DVector::zeros(lay.num_vars());
        for kk in 0..lay.k {
            row[lay.z(kk, j)] = 1.0;
        }
        eq.push((row, data.target[j]));
    }
    eq
}

/// Perspective-of-box rows `λ_k·lo_j − w^k_j ≤ t` and `w^k_j − λ_k·hi_j ≤ t`.
fn box_rows(data: &SliceData, lay: &Layout) -> Vec<(DVector<f64>, f64)> {
    let mut rows = Vec::new();
    if let Some(bx) = &data.boxed {
        for kk in 0..lay.k {
            for (j, (lo, hi)) in bx.iter().enumerate() {
                let mut row = DVector::zeros(lay.num_vars());
                row[lay.lambda(kk)] = *lo;
                row[lay.z(kk, j)] = -1.0;
                row[lay.t()] = -1.0;
                rows.push((row, 0.0));
                if let Some(h) = hi {
                    let mut row = DVector::zeros(lay.num_vars());
                    row[lay.lambda(kk)] = -h;
                    row[lay.z(kk, j)] = 1.0;
                    row[lay.t()] = -1.0;
                    rows.push((row, 0.0));
                }
            }
        }
    }
    rows
}

/// Cone rows `‖λ_k(Ax^k+d) + B̂z^k‖ ≤ λ_k f(x^k) + t` in the set's norm.
fn cone_rows(set: &ConicSet, data: &SliceData, lay: &Layout) -> Vec<ConeRow> {
    (0..lay.k)
        .map(|kk| {
            let mut f = DMatrix::zeros(set.p, lay.num_vars());
            for i in 0..set.p {
                f[(i, lay.lambda(kk))] = data.anchors[kk][i];
                for j in 0..lay.m_z {
                    f[(i, lay.z(kk, j))] = data.bmap[(i, j)];
                }
            }
            let mut h = DVector::zeros(lay.num_vars());
            h[lay.lambda(kk)] = data.values[kk];
            h[lay.t()] = 1.0;
            ConeRow {
                f,
                g: DVector::zeros(set.p),
                h,
                e: 0.0,
                norm: set.norm,
            }
        })
        .collect()
}

/// Interior-point path: minimize the relaxation by the barrier solver,
/// warm-started from a blended basic `λ`.
pub(crate) fn perspective_socp(
    set: &ConicSet,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tols: &Tolerances,
) -> Result<MembershipVerdict> {
    let lambda0 = lambda_feasibility(set, x)?;
    let data = slice_data(set, y)?;
    let lay = Layout {
        k: set.domain.len(),
        m_z: data.bmap.ncols(),
        aux_per_slice: 0,
    };
    let nv = lay.num_vars();

    let mut objective = DVector::zeros(nv);
    objective[lay.t()] = 1.0;
    let mut p = SocpProblem::new(false, objective);
    for kk in 0..lay.k {
        p.bounds[lay.lambda(kk)] = (0.0, f64::INFINITY);
    }
    p.bounds[lay.t()] = (T_LOWER, f64::INFINITY);
    p.eq = equality_rows(set, &data, &lay, x);
    p.linear = box_rows(&data, &lay);
    p.cones = cone_rows(set, &data, &lay);

    // warm start: strictly positive λ, z-blocks proportional to the target
    let mut w0 = DVector::zeros(nv);
    let uniform = 1.0 / lay.k as f64;
    for kk in 0..lay.k {
        w0[lay.lambda(kk)] = (1.0 - BLEND) * lambda0[kk] + BLEND * uniform;
    }
    for kk in 0..lay.k {
        for j in 0..lay.m_z {
            w0[lay.z(kk, j)] = w0[lay.lambda(kk)] * data.target[j];
        }
    }
    let mut viol = 0.0f64;
    for c in &p.cones {
        viol = viol.max(c.violation(&w0));
    }
    for (a, b) in &p.linear {
        viol = viol.max(a.dot(&w0) - b);
    }
    w0[lay.t()] = viol.max(0.0) + 1e-2;
    p.warm_start = Some(w0);

    let r = solve_socp(&p)?;
    match r.status {
        SolveStatus::Optimal => Ok(MembershipVerdict::from_margin(
            -r.value,
            tols.boundary_band(),
        )),
        other => Err(Error::NumericalLimit(format!(
            "perspective relaxation ended with status {other:?} after {} iterations",
            r.iterations
        ))),
    }
}

/// Pure-LP path for the polyhedral norms: `ℓ∞` rows bound each component,
/// `ℓ1` rows bound component magnitudes by auxiliary variables that sum
/// below the right-hand side.
pub(crate) fn perspective_lp(
    set: &ConicSet,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tols: &Tolerances,
) -> Result<MembershipVerdict> {
    debug_assert!(set.norm != Norm::L2, "the Euclidean cone does not linearize");
    let data = slice_data(set, y)?;
    let lay = Layout {
        k: set.domain.len(),
        m_z: data.bmap.ncols(),
        aux_per_slice: if set.norm == Norm::L1 { set.p } else { 0 },
    };
    let nv = lay.num_vars();

    let mut objective = vec![0.0; nv];
    objective[lay.t()] = 1.0;
    let mut lp = LpProblem::new(false, objective);
    lp.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); nv];
    for kk in 0..lay.k {
        lp.bounds[lay.lambda(kk)] = (0.0, f64::INFINITY);
        for i in 0..lay.aux_per_slice {
            lp.bounds[lay.aux(kk, i)] = (0.0, f64::INFINITY);
        }
    }
    lp.bounds[lay.t()] = (T_LOWER, f64::INFINITY);

    for (row, rhs) in equality_rows(set, &data, &lay, x) {
        lp.eq.push((row.as_slice().to_vec(), rhs));
    }
    for (row, rhs) in box_rows(&data, &lay) {
        lp.le.push((row.as_slice().to_vec(), rhs));
    }

    for kk in 0..lay.k {
        // component expression v_i = λ_k(Ax^k+d)_i + (B̂z^k)_i as coefficients
        let component = |i: usize, sign: f64| -> Vec<f64> {
            let mut row = vec![0.0; nv];
            row[lay.lambda(kk)] = sign * data.anchors[kk][i];
            for j in 0..lay.m_z {
                row[lay.z(kk, j)] = sign * data.bmap[(i, j)];
            }
            row
        };
        match set.norm {
            Norm::L1 => {
                for i in 0..set.p {
                    // ±v_i ≤ s_i
                    for sign in [1.0, -1.0] {
                        let mut row = component(i, sign);
                        row[lay.aux(kk, i)] = -1.0;
                        lp.le.push((row, 0.0));
                    }
                }
                // Σ s_i ≤ λ_k f_k + t
                let mut row = vec![0.0; nv];
                for i in 0..set.p {
                    row[lay.aux(kk, i)] = 1.0;
                }
                row[lay.lambda(kk)] = -data.values[kk];
                row[lay.t()] = -1.0;
                lp.le.push((row, 0.0));
            }
            Norm::Linf => {
                for i in 0..set.p {
                    // ±v_i ≤ λ_k f_k + t
                    for sign in [1.0, -1.0] {
                        let mut row = component(i, sign);
                        row[lay.lambda(kk)] -= data.values[kk];
                        row[lay.t()] = -1.0;
                        lp.le.push((row, 0.0));
                    }
                }
            }
            Norm::L2 => unreachable!(),
        }
    }

    let r = solve_lp(&lp)?;
    match r.status {
        SolveStatus::Optimal => Ok(MembershipVerdict::from_margin(
            -r.value,
            tols.boundary_band(),
        )),
        SolveStatus::Infeasible => Err(Error::QueryOutsideHull(format!(
            "x is not a convex combination of the {} domain points",
            lay.k
        ))),
        other => Err(Error::NumericalLimit(format!(
            "perspective relaxation LP ended with status {other:?}"
        ))),
    }
}

/// Classify `(x, y)` against `conv(Z)`: Euclidean sets go to the interior
/// point solver, polyhedral-norm sets to the exact LP.
pub fn membership_perspective(
    set: &ConicSet,
    x: &DVector<f64>,
    y: &DVector<f64>,
    tols: &Tolerances,
) -> Result<MembershipVerdict> {
    if x.len() != set.n {
        return Err(Error::invalid(format!(
            "x has length {}, set has n = {}",
            x.len(),
            set.n
        )));
    }
    if y.len() != set.m {
        return Err(Error::invalid(format!(
            "y has length {}, set has m = {}",
            y.len(),
            set.m
        )));
    }
    // A 0/1 point is extreme in conv(domain), so the only decomposition
    // puts full weight on its own slice. Evaluate that slice directly: the
    // relaxation program would have every inactive-slice row pinning t ≥ 0,
    // flattening the margin of interior points to zero.
    for k in 0..set.domain.len() {
        let xv = set.domain.point_vec(k);
        if (x - &xv).amax() <= 1e-9 {
            let margin = (set.f_value(k) - set.cone_residual(&xv, y)).min(set.y_box_slack(y));
            return Ok(MembershipVerdict::from_margin(margin, tols.boundary_band()));
        }
    }
    match set.norm {
        Norm::L2 => perspective_socp(set, x, y, tols),
        Norm::L1 | Norm::Linf => perspective_lp(set, x, y, tols),
    }
}
