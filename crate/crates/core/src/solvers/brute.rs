//! Exhaustive solver for small mixed-binary models: enumerate the binary
//! assignments, restrict every row to the continuous block, and hand each
//! restricted subproblem to the simplex (pure-linear) or the barrier solver.
//!
//! The all-zero assignment, when the domain contains it, is evaluated first
//! so early incumbents come from the trivial solution — the restricted
//! subproblems themselves are solved to optimality either way, this only
//! fixes the tie-breaking order.
//!
//! A quadratic row may carry an indefinite matrix as long as its restriction
//! to the continuous block is convex (hypograph rows coupling binaries to a
//! budget variable are the typical case); a genuinely non-convex continuous
//! block is reported as an error rather than silently mis-solved.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ir::{ModelIr, ObjSense, Sense, VarKind};
use crate::model::BinaryDomain;

use super::{solve_lp, solve_socp, ConeRow, LpProblem, QuadConstraintRow, SocpProblem, SolveResult, SolveStatus};

/// Split of variable indices into binary and continuous, in model order.
struct Split {
    binary: Vec<usize>,
    cont: Vec<usize>,
}

fn split_vars(ir: &ModelIr) -> Split {
    let mut binary = Vec::new();
    let mut cont = Vec::new();
    for (i, v) in ir.variables.iter().enumerate() {
        match v.kind {
            VarKind::Binary => binary.push(i),
            VarKind::Continuous => cont.push(i),
        }
    }
    Split { binary, cont }
}

/// Maximize or minimize `ir` exactly by enumerating `domain` over the
/// model's binary variables (taken in declaration order) and solving the
/// continuous restriction at each assignment.
pub fn solve_bruteforce(ir: &ModelIr, domain: &BinaryDomain) -> Result<SolveResult> {
    ir.validate()?;
    let split = split_vars(ir);
    if split.binary.len() != domain.dim() {
        return Err(Error::invalid(format!(
            "model has {} binary variables but the domain has dimension {}",
            split.binary.len(),
            domain.dim()
        )));
    }
    if domain.is_empty() {
        return Err(Error::EmptyDomainAfterRestriction);
    }
    let maximize = ir.objective.sense == ObjSense::Maximize;
    let nc = split.cont.len();

    // the all-zero assignment seeds the incumbent when present
    let mut order: Vec<usize> = (0..domain.len()).collect();
    if let Some(zero) = domain.index_of(&vec![0u8; domain.dim()]) {
        order.retain(|&k| k != zero);
        order.insert(0, zero);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0usize;
    let mut any_failed = false;
    for &k in &order {
        let xbar = domain.point(k);
        let sub = restrict(ir, &split, xbar)?;
        let r = match sub {
            Restricted::Constant { feasible, value } => {
                if !feasible {
                    continue;
                }
                SolveResult {
                    status: SolveStatus::Optimal,
                    value,
                    point: Vec::new(),
                    primal_residual: 0.0,
                    dual_gap: 0.0,
                    row_duals: Vec::new(),
                    iterations: 0,
                }
            }
            Restricted::Linear(lp, constant) => {
                let mut r = solve_lp(&lp)?;
                r.value += constant;
                r
            }
            Restricted::Conic(socp, constant) => {
                let mut r = solve_socp(&socp)?;
                r.value += constant;
                r
            }
        };
        iterations += r.iterations;
        match r.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                let mut out = SolveResult::failed(SolveStatus::Unbounded, ir.num_vars());
                out.iterations = iterations;
                return Ok(out);
            }
            SolveStatus::NumericalLimit => {
                any_failed = true;
                continue;
            }
        }
        let better = match &best {
            None => true,
            Some((v, _)) => {
                if maximize {
                    r.value > v + 1e-12 * (1.0 + v.abs())
                } else {
                    r.value < v - 1e-12 * (1.0 + v.abs())
                }
            }
        };
        if better {
            let mut point = vec![0.0f64; ir.num_vars()];
            for (pos, &var) in split.binary.iter().enumerate() {
                point[var] = xbar[pos] as f64;
            }
            for (pos, &var) in split.cont.iter().enumerate() {
                point[var] = if nc > 0 { r.point[pos] } else { 0.0 };
            }
            best = Some((r.value, point));
        }
    }

    match best {
        Some((value, point)) => {
            let primal_residual = ir.max_violation(&point);
            Ok(SolveResult {
                status: if any_failed {
                    SolveStatus::NumericalLimit
                } else {
                    SolveStatus::Optimal
                },
                value,
                point,
                primal_residual,
                dual_gap: 0.0,
                row_duals: Vec::new(),
                iterations,
            })
        }
        None => {
            let mut r = SolveResult::failed(
                if any_failed {
                    SolveStatus::NumericalLimit
                } else {
                    SolveStatus::Infeasible
                },
                ir.num_vars(),
            );
            r.iterations = iterations;
            Ok(r)
        }
    }
}

enum Restricted {
    /// No continuous variables: feasibility and value are decided directly.
    Constant { feasible: bool, value: f64 },
    Linear(LpProblem, f64),
    Conic(SocpProblem, f64),
}

/// Restrict every row of `ir` to the continuous block at the binary
/// assignment `xbar`.
fn restrict(ir: &ModelIr, split: &Split, xbar: &[u8]) -> Result<Restricted> {
    let nc = split.cont.len();
    let xb: Vec<f64> = xbar.iter().map(|&b| b as f64).collect();
    let mut constant = ir.objective.constant;
    for (pos, &var) in split.binary.iter().enumerate() {
        constant += ir.objective.coeffs[var] * xb[pos];
    }
    let obj_c: Vec<f64> = split.cont.iter().map(|&v| ir.objective.coeffs[v]).collect();
    let maximize = ir.objective.sense == ObjSense::Maximize;

    // gather restricted rows in a solver-neutral shape first
    let mut lin_eq: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut lin_le: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &ir.linear {
        let mut rhs = row.rhs;
        for (pos, &var) in split.binary.iter().enumerate() {
            rhs -= row.coeffs[var] * xb[pos];
        }
        let a: Vec<f64> = split.cont.iter().map(|&v| row.coeffs[v]).collect();
        match row.sense {
            Sense::Le => lin_le.push((a, rhs)),
            Sense::Ge => lin_le.push((a.iter().map(|c| -c).collect(), -rhs)),
            Sense::Eq => lin_eq.push((a, rhs)),
        }
    }

    let mut cones: Vec<ConeRow> = Vec::new();
    for row in &ir.soc {
        let rows = row.f.len();
        let mut f = DMatrix::<f64>::zeros(rows, nc);
        let mut g = DVector::<f64>::zeros(rows);
        for i in 0..rows {
            g[i] = row.g[i];
            for (pos, &var) in split.binary.iter().enumerate() {
                g[i] += row.f[i][var] * xb[pos];
            }
            for (pos, &var) in split.cont.iter().enumerate() {
                f[(i, pos)] = row.f[i][var];
            }
        }
        let mut e = row.e;
        for (pos, &var) in split.binary.iter().enumerate() {
            e += row.h[var] * xb[pos];
        }
        let h = DVector::from_iterator(nc, split.cont.iter().map(|&v| row.h[v]));
        cones.push(ConeRow { f, g, h, e, norm: row.norm });
    }

    // quadratic rows (plus rotated rows expressed as quadratics):
    // rows whose continuous block vanishes fall back to linear rows
    let mut quads: Vec<QuadConstraintRow> = Vec::new();
    let mut quad_sources: Vec<(DMatrix<f64>, Vec<f64>, f64)> = Vec::new();
    for row in &ir.quad {
        let n = ir.num_vars();
        let mut q = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = row.q[i][j];
            }
        }
        quad_sources.push((q, row.linear.clone(), row.rhs));
    }
    for row in &ir.rotated {
        let n = ir.num_vars();
        let mut q = DMatrix::<f64>::zeros(n, n);
        q[(row.scalar, row.scalar)] = 1.0;
        let mut lin = vec![0.0f64; n];
        lin[row.bound] = -1.0;
        quad_sources.push((q, lin, 0.0));
    }
    for (q, lin, rhs) in quad_sources {
        let mut rhs_c = rhs;
        // rhs −= x̄ᵀ Q_bb x̄ + linear_b·x̄
        for (pi, &vi) in split.binary.iter().enumerate() {
            rhs_c -= lin[vi] * xb[pi];
            for (pj, &vj) in split.binary.iter().enumerate() {
                rhs_c -= q[(vi, vj)] * xb[pi] * xb[pj];
            }
        }
        let mut q_cc = DMatrix::<f64>::zeros(nc, nc);
        let mut lin_c = DVector::<f64>::zeros(nc);
        for (pi, &vi) in split.cont.iter().enumerate() {
            lin_c[pi] = lin[vi];
            for (pj, &vj) in split.binary.iter().enumerate() {
                // cross block appears twice in the symmetric expansion
                lin_c[pi] += (q[(vi, vj)] + q[(vj, vi)]) * xb[pj];
            }
            for (pj, &vj) in split.cont.iter().enumerate() {
                q_cc[(pi, pj)] = q[(vi, vj)];
            }
        }
        let q_scale = q_cc.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if q_scale == 0.0 {
            lin_le.push((lin_c.iter().copied().collect(), rhs_c));
        } else {
            quads.push(QuadConstraintRow { q: q_cc, linear: lin_c, rhs: rhs_c });
        }
    }

    if nc == 0 {
        let scale = lin_le
            .iter()
            .chain(lin_eq.iter())
            .fold(0.0f64, |a, (_, b)| a.max(b.abs()));
        let tol = 1e-8 * (1.0 + scale);
        let mut feasible = lin_le.iter().all(|(_, b)| *b >= -tol)
            && lin_eq.iter().all(|(_, b)| b.abs() <= tol);
        for c in &cones {
            feasible &= c.norm.eval(c.g.as_slice()) <= c.e + tol;
        }
        // quads with empty continuous block already degraded to linear rows
        return Ok(Restricted::Constant { feasible, value: constant });
    }

    let bounds: Vec<(f64, f64)> = split
        .cont
        .iter()
        .map(|&v| {
            (
                ir.variables[v].lower.unwrap_or(f64::NEG_INFINITY),
                ir.variables[v].upper.unwrap_or(f64::INFINITY),
            )
        })
        .collect();

    if cones.is_empty() && quads.is_empty() {
        let mut lp = LpProblem::new(maximize, obj_c);
        lp.eq = lin_eq;
        lp.le = lin_le;
        lp.bounds = bounds;
        Ok(Restricted::Linear(lp, constant))
    } else {
        let mut p = SocpProblem::new(maximize, DVector::from_column_slice(&obj_c));
        p.eq = lin_eq
            .into_iter()
            .map(|(a, b)| (DVector::from_column_slice(&a), b))
            .collect();
        p.linear = lin_le
            .into_iter()
            .map(|(a, b)| (DVector::from_column_slice(&a), b))
            .collect();
        p.cones = cones;
        p.quads = quads;
        p.bounds = bounds;
        Ok(Restricted::Conic(p, constant))
    }
}
