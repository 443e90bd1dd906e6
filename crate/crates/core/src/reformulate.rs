//! The three rewrites that connect the input formats to the conic core:
//!
//! 1. [`normalize_column_space`] — push the binary columns and the offset of
//!    a Euclidean cone row into the column space of `B` by moving the
//!    orthogonal remainder into the right-hand side:
//!    `f'(x) = √(f(x)² − ‖A⊥x + d⊥‖²)`.
//! 2. [`quad_to_soc`] — rewrite a convex quadratic constraint
//!    `xᵀQxx x + 2xᵀQxy y + yᵀQyy y + axᵀx + ayᵀy ≤ g(x)` as a cone row
//!    `‖Ax + By + d‖₂ ≤ f(x)` via the Cholesky factor of `Qyy`.
//! 3. [`drcc_to_quad`] — rewrite a moment-robust chance constraint
//!    `ξᵀz ≤ c` (mean `µ`, covariance `Σ`, risk `α`) as the quadratic row
//!    `zᵀΣ̃z + 2cµᵀz ≤ c²` with `Σ̃ = α̃Σ − µµᵀ`, `α̃ = (1−α)/α`, plus the
//!    mean row `µᵀz ≤ c`.

use nalgebra::{DMatrix, DVector};

use crate::config::RADICAND_CLAMP;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, operator_norm, project_onto_colspace};
use crate::model::{mat_to_rows, ConicSet, Norm, RhsFunction};

/// What [`normalize_column_space`] did to the set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    /// Indices (in the original domain order) of points whose radicand fell
    /// below the clamp and were removed.
    pub dropped: Vec<usize>,
    /// `‖A⊥‖₂` — how much of the binary map lay outside col(B).
    pub a_offspace_norm: f64,
    /// `‖d⊥‖₂` — how much of the offset lay outside col(B).
    pub d_offspace_norm: f64,
    /// True when both residuals were negligible, i.e. the input already had
    /// `col(A) ⊆ col(B)` and `d ∈ col(B)`.
    pub already_conformant: bool,
}

/// Replace `(A, d, f)` by `(Ā, d̄, f')` so that the cone row's affine image
/// lies in col(B), shrinking the right-hand side to compensate:
/// `f'(x)² = f(x)² − ‖A⊥x + d⊥‖²`. Domain points whose new radicand is below
/// `−RADICAND_CLAMP` leave the domain (their continuous slice was empty all
/// along); tiny negative radicands clamp to zero.
///
/// Euclidean-only: the Pythagorean split behind the construction has no
/// analogue for the other norms.
pub fn normalize_column_space(set: &ConicSet) -> Result<(ConicSet, NormalizationReport)> {
    if set.norm != Norm::L2 {
        return Err(Error::invalid(format!(
            "column-space normalization is defined for the l2 norm only, set uses {}",
            set.norm
        )));
    }
    let (a_bar, a_perp) = project_onto_colspace(&set.b, &set.a);
    let d_mat = DMatrix::from_column_slice(set.p, 1, set.d.as_slice());
    let (d_bar, d_perp) = project_onto_colspace(&set.b, &d_mat);
    let d_bar = DVector::from_column_slice(d_bar.as_slice());
    let d_perp = DVector::from_column_slice(d_perp.as_slice());

    let a_offspace_norm = operator_norm(&a_perp);
    let d_offspace_norm = d_perp.norm();
    let already_conformant = a_offspace_norm <= 1e-10 * (1.0 + operator_norm(&set.a))
        && d_offspace_norm <= 1e-10 * (1.0 + set.d.norm());

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut values = Vec::new();
    for k in 0..set.domain.len() {
        let fx = set.f_value(k);
        let off = (&a_perp * set.domain.point_vec(k) + &d_perp).norm();
        let radicand = fx * fx - off * off;
        if radicand < -RADICAND_CLAMP {
            dropped.push(k);
        } else {
            kept.push(k);
            values.push(radicand.max(0.0).sqrt());
        }
    }
    let domain = set.domain.restrict(&kept)?;
    let normalized = ConicSet::new(
        domain,
        a_bar,
        set.b.clone(),
        d_bar,
        RhsFunction::Table(values),
        Norm::L2,
        set.y_box.clone(),
    )?;
    Ok((
        normalized,
        NormalizationReport {
            dropped,
            a_offspace_norm,
            d_offspace_norm,
            already_conformant,
        },
    ))
}

/// Quadratic polynomial `xᵀQx + linᵀx + constant` of the binary variables —
/// the right-hand side of a [`QuadConstraint`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub q: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    /// The constant polynomial `c` in `n` variables.
    pub fn constant(n: usize, c: f64) -> Self {
        QuadraticForm {
            q: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            constant: c,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.q * x)[0] + self.linear.dot(x) + self.constant
    }
}

/// `xᵀQxx x + 2 xᵀQxy y + yᵀQyy y + axᵀx + ayᵀy ≤ g(x)` in block form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub qxx: DMatrix<f64>,
    pub qxy: DMatrix<f64>,
    pub qyy: DMatrix<f64>,
    pub ax: DVector<f64>,
    pub ay: DVector<f64>,
    pub g: QuadraticForm,
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::invalid(format!("{name} not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

impl QuadConstraint {
    pub fn new(
        qxx: DMatrix<f64>,
        qxy: DMatrix<f64>,
        qyy: DMatrix<f64>,
        ax: DVector<f64>,
        ay: DVector<f64>,
        g: QuadraticForm,
    ) -> Result<Self> {
        let (n, m) = qxy.shape();
        if qxx.shape() != (n, n) || qyy.shape() != (m, m) {
            return Err(Error::invalid(format!(
                "inconsistent quadratic blocks: Qxx {:?}, Qxy {:?}, Qyy {:?}",
                qxx.shape(),
                qxy.shape(),
                qyy.shape()
            )));
        }
        if ax.len() != n || ay.len() != m {
            return Err(Error::invalid("linear terms must match the block sizes"));
        }
        if g.q.shape() != (n, n) || g.linear.len() != n {
            return Err(Error::invalid("rhs polynomial must act on the binary block"));
        }
        check_symmetric(&qxx, "Qxx")?;
        check_symmetric(&qyy, "Qyy")?;
        check_symmetric(&g.q, "rhs quadratic")?;
        Ok(QuadConstraint { qxx, qxy, qyy, ax, ay, g })
    }

    /// Number of binary variables.
    pub fn n(&self) -> usize {
        self.qxy.nrows()
    }

    /// Number of continuous variables.
    pub fn m(&self) -> usize {
        self.qxy.ncols()
    }

    /// Left-hand side at `(x, y)`.
    pub fn lhs(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.qxx * x)[0]
            + 2.0 * (x.transpose() * &self.qxy * y)[0]
            + (y.transpose() * &self.qyy * y)[0]
            + self.ax.dot(x)
            + self.ay.dot(y)
    }
}

/// Cone-row data produced by [`quad_to_soc`]: `‖Ax + By + d‖₂ ≤ f(x)` with
/// `f` stored as the square root of an explicit quadratic radicand.
#[derive(Debug, Clone, PartialEq)]
pub struct SocReformulation {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
    pub f: RhsFunction,
}

impl SocReformulation {
    /// `f(x)²` for arbitrary real `x` (not just binary points).
    pub fn f_radicand(&self, x: &DVector<f64>) -> f64 {
        match &self.f {
            RhsFunction::SqrtQuadratic { p, r, s } => {
                let n = x.len();
                let mut acc = *s;
                for i in 0..n {
                    acc += r[i] * x[i];
                    for j in 0..n {
                        acc += p[i][j] * x[i] * x[j];
                    }
                }
                acc
            }
            RhsFunction::Table(_) => unreachable!("quad_to_soc always emits a radicand"),
        }
    }
}

/// Rewrite a quadratic constraint with `Qyy ≻ 0` as a Euclidean cone row.
///
/// With `Qyy = LLᵀ` the choices `B = Lᵀ`, `A = L⁻¹Qxyᵀ`, `d = ½L⁻¹ay` make
/// `‖Ax + By + d‖²` reproduce every `y`-dependent term of the left-hand
/// side, and the radicand
/// `f(x)² = g(x) + xᵀ(AᵀA − Qxx)x + (2Aᵀd − ax)ᵀx + ‖d‖²`
/// absorbs the `x`-only mismatch, giving a two-sided identity.
pub fn quad_to_soc(qc: &QuadConstraint) -> Result<SocReformulation> {
    let l = cholesky(&qc.qyy)?;
    let b = l.transpose();
    let a = l
        .solve_lower_triangular(&qc.qxy.transpose())
        .ok_or_else(|| Error::NumericalLimit("triangular solve failed".into()))?;
    let d_mat = l
        .solve_lower_triangular(&DMatrix::from_column_slice(qc.m(), 1, qc.ay.as_slice()))
        .ok_or_else(|| Error::NumericalLimit("triangular solve failed".into()))?;
    let d = DVector::from_column_slice(d_mat.as_slice()) * 0.5;

    let p = &qc.g.q + a.transpose() * &a - &qc.qxx;
    let r = &qc.g.linear + (a.transpose() * &d) * 2.0 - &qc.ax;
    let s = qc.g.constant + d.norm_squared();
    Ok(SocReformulation {
        a,
        b,
        d,
        f: RhsFunction::SqrtQuadratic {
            p: mat_to_rows(&p),
            r: r.as_slice().to_vec(),
            s,
        },
    })
}

/// Moment-robust chance constraint on `ξᵀz ≤ c` where `z = (x, y)` and `ξ`
/// ranges over all distributions with the given mean and covariance; the
/// constraint must hold with probability at least `1 − α` under every such
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DrccConstraint {
    pub mu_x: DVector<f64>,
    pub mu_y: DVector<f64>,
    pub sigma_xx: DMatrix<f64>,
    pub sigma_xy: DMatrix<f64>,
    pub sigma_yy: DMatrix<f64>,
    pub c: f64,
    pub alpha: f64,
}

impl DrccConstraint {
    pub fn new(
        mu_x: DVector<f64>,
        mu_y: DVector<f64>,
        sigma_xx: DMatrix<f64>,
        sigma_xy: DMatrix<f64>,
        sigma_yy: DMatrix<f64>,
        c: f64,
        alpha: f64,
    ) -> Result<Self> {
        let (n, m) = sigma_xy.shape();
        if sigma_xx.shape() != (n, n) || sigma_yy.shape() != (m, m) {
            return Err(Error::invalid("inconsistent covariance blocks"));
        }
        if mu_x.len() != n || mu_y.len() != m {
            return Err(Error::invalid("mean must match the covariance blocks"));
        }
        if !c.is_finite() {
            return Err(Error::invalid("threshold c must be finite"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("risk level must be in (0,1), got {alpha}")));
        }
        check_symmetric(&sigma_xx, "Σxx")?;
        check_symmetric(&sigma_yy, "Σyy")?;
        let dr = DrccConstraint { mu_x, mu_y, sigma_xx, sigma_xy, sigma_yy, c, alpha };
        let full = dr.sigma_full();
        let min_eig = nalgebra::SymmetricEigen::new(full.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &e| acc.min(e));
        let scale = full.amax().max(1.0);
        if min_eig < -1e-8 * scale {
            return Err(Error::invalid(format!(
                "covariance not positive semidefinite (eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(dr)
    }

    pub fn n(&self) -> usize {
        self.sigma_xy.nrows()
    }

    pub fn m(&self) -> usize {
        self.sigma_xy.ncols()
    }

    /// `α̃ = (1 − α)/α`.
    pub fn alpha_tilde(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }

    /// Assembled `(n+m)×(n+m)` covariance.
    pub fn sigma_full(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(&self.sigma_xx);
        full.view_mut((0, n), (n, m)).copy_from(&self.sigma_xy);
        full.view_mut((n, 0), (m, n))
            .copy_from(&self.sigma_xy.transpose());
        full.view_mut((n, n), (m, m)).copy_from(&self.sigma_yy);
        full
    }

    /// Assembled mean vector.
    pub fn mu_full(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.n() + self.m());
        mu.rows_mut(0, self.n()).copy_from(&self.mu_x);
        mu.rows_mut(self.n(), self.m()).copy_from(&self.mu_y);
        mu
    }

    /// The worst-case-quantile form `µᵀz + √α̃ · √(zᵀΣz)`; the constraint
    /// holds at `z` iff this is at most `c`.
    pub fn quantile_lhs(&self, z: &DVector<f64>) -> f64 {
        let mu = self.mu_full();
        let sigma = self.sigma_full();
        let var = (z.transpose() * &sigma * z)[0].max(0.0);
        mu.dot(z) + self.alpha_tilde().sqrt() * var.sqrt()
    }
}

/// The linear side condition `µxᵀx + µyᵀy ≤ c` that accompanies the squared
/// form.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub coeffs_x: DVector<f64>,
    pub coeffs_y: DVector<f64>,
    pub rhs: f64,
}

impl MeanRow {
    pub fn holds(&self, x: &DVector<f64>, y: &DVector<f64>) -> bool {
        self.coeffs_x.dot(x) + self.coeffs_y.dot(y) <= self.rhs
    }
}

/// Output of [`drcc_to_quad`].
#[derive(Debug, Clone, PartialEq)]
pub struct DrccReformulation {
    /// `zᵀΣ̃z + 2cµᵀz ≤ c²` in block form (`Σ̃ = α̃Σ − µµᵀ`).
    pub quad: QuadConstraint,
    /// `µᵀz ≤ c`; required alongside the quadratic row — squaring alone
    /// would also admit points with `µᵀz − c` large and positive.
    pub mean_row: MeanRow,
    /// Whether `Σ̃yy ≻ 0` at the Cholesky pivot tolerance. The cone rewrite
    /// of the quadratic row needs this; callers that keep the raw quadratic
    /// row do not.
    pub sigma_tilde_yy_pd: bool,
}

/// Square the quantile form of a chance constraint into a quadratic row plus
/// the mean row. Never fails: a deviation matrix `Σ̃yy` that is not positive
/// definite is reported through the flag, because only the downstream cone
/// rewrite cares.
pub fn drcc_to_quad(dr: &DrccConstraint) -> DrccReformulation {
    let at = dr.alpha_tilde();
    let qxx = &dr.sigma_xx * at - &dr.mu_x * dr.mu_x.transpose();
    let qxy = &dr.sigma_xy * at - &dr.mu_x * dr.mu_y.transpose();
    let qyy = &dr.sigma_yy * at - &dr.mu_y * dr.mu_y.transpose();
    let sigma_tilde_yy_pd = cholesky(&qyy).is_ok();
    let quad = QuadConstraint {
        qxx,
        qxy,
        qyy,
        ax: &dr.mu_x * (2.0 * dr.c),
        ay: &dr.mu_y * (2.0 * dr.c),
        g: QuadraticForm::constant(dr.n(), dr.c * dr.c),
    };
    DrccReformulation {
        quad,
        mean_row: MeanRow {
            coeffs_x: dr.mu_x.clone(),
            coeffs_y: dr.mu_y.clone(),
            rhs: dr.c,
        },
        sigma_tilde_yy_pd,
    }
}
