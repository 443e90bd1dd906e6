//! Core domain types: binary domains, conic sets, right-hand-side functions,
//! membership verdicts, and their JSON representations.
//!
//! A [`ConicSet`] stores the data of
//!
//! ```text
//!     Z = { (x, y) ∈ X × R^m : ‖A x + B y + d‖ ≤ f(x) },   X ⊆ {0,1}^n,
//! ```
//!
//! with the norm selectable per set and an optional per-coordinate box on `y`.
//! When a box is present the hull-equivalence theory does not apply (the
//! continuous slices are no longer full affine preimages) and downstream
//! drivers treat the set as a counterexample fixture, not a verification
//! target.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::RADICAND_CLAMP;
use crate::error::{Error, Result};

/// Cap on the binary dimension; everything here enumerates the domain.
pub const MAX_BINARY_DIM: usize = 20;

/// An explicit, ordered list of distinct 0/1 points in `{0,1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinaryDomain {
    points: Vec<Vec<u8>>,
}

impl BinaryDomain {
    /// Domain from an explicit point list. Points must be distinct 0/1
    /// vectors of a common positive length ≤ [`MAX_BINARY_DIM`].
    pub fn new(points: Vec<Vec<u8>>) -> Result<Self> {
        let d = BinaryDomain { points };
        d.check()?;
        Ok(d)
    }

    /// The full cube `{0,1}^n`, ordered by binary counting with coordinate 0
    /// as the fastest bit: point `k` has `x_i = (k >> i) & 1`.
    pub fn full_cube(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_BINARY_DIM {
            return Err(Error::invalid(format!(
                "binary dimension must be in 1..={MAX_BINARY_DIM}, got {n}"
            )));
        }
        let points = (0..(1usize << n))
            .map(|k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
            .collect();
        Ok(BinaryDomain { points })
    }

    fn check(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("domain must contain at least one point"));
        }
        let n = self.points[0].len();
        if n == 0 || n > MAX_BINARY_DIM {
            return Err(Error::invalid(format!(
                "binary dimension must be in 1..={MAX_BINARY_DIM}, got {n}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.points {
            if p.len() != n {
                return Err(Error::invalid("domain points have inconsistent lengths"));
            }
            if p.iter().any(|&b| b > 1) {
                return Err(Error::invalid("domain points must be 0/1 vectors"));
            }
            if !seen.insert(p.clone()) {
                return Err(Error::invalid(format!("duplicated domain point {p:?}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<u8>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[u8] {
        &self.points[k]
    }

    /// Index of a binary point, if present.
    pub fn index_of(&self, x: &[u8]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    /// Point `k` as a float vector.
    pub fn point_vec(&self, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.points[k].iter().map(|&b| b as f64))
    }

    /// All points as float vectors.
    pub fn point_vecs(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|k| self.point_vec(k)).collect()
    }

    /// Keep only the points at the given indices (ascending, deduplicated by
    /// construction of the caller).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyDomainAfterRestriction);
        }
        BinaryDomain::new(keep.iter().map(|&k| self.points[k].clone()).collect())
    }
}

/// Which norm the cone row uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    Linf,
}

impl Norm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::L1 => write!(f, "l1"),
            Norm::L2 => write!(f, "l2"),
            Norm::Linf => write!(f, "linf"),
        }
    }
}

/// Right-hand side `f` of the cone row: either explicit per-point values or
/// `√(xᵀPx + rᵀx + s)` evaluated on demand. Radicands a few ulps below zero
/// (≥ −[`RADICAND_CLAMP`]) are clamped to exact zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsFunction {
    /// Values aligned with the domain's point order.
    Table(Vec<f64>),
    SqrtQuadratic {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        r: Vec<f64>,
        s: f64,
    },
}

impl RhsFunction {
    /// Radicand `q(x)` (i.e. `f(x)²`) at a binary point, before clamping.
    pub fn radicand(&self, domain: &BinaryDomain, k: usize) -> f64 {
        match self {
            RhsFunction::Table(v) => v[k] * v[k],
            RhsFunction::SqrtQuadratic { p, r, s } => {
                let x = domain.point(k);
                let n = x.len();
                let mut acc = *s;
                for i in 0..n {
                    if x[i] == 1 {
                        acc += r[i];
                        for j in 0..n {
                            if x[j] == 1 {
                                acc += p[i][j];
                            }
                        }
                    }
                }
                acc
            }
        }
    }

    /// `f` at domain point `k`. Requires a validated set (radicand not more
    /// negative than the clamp).
    pub fn value(&self, domain: &BinaryDomain, k: usize) -> f64 {
        match self {
            RhsFunction::Table(v) => v[k],
            RhsFunction::SqrtQuadratic { .. } => {
                let q = self.radicand(domain, k);
                if q < 0.0 {
                    0.0
                } else {
                    q.sqrt()
                }
            }
        }
    }

    /// All values in domain order.
    pub fn values(&self, domain: &BinaryDomain) -> Vec<f64> {
        (0..domain.len()).map(|k| self.value(domain, k)).collect()
    }
}

mod serde_mat {
    //! Row-major nested-array (de)serialization for nalgebra matrices.
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        super::mat_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

mod serde_vec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_slice().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(de)?))
    }
}

/// Build a matrix from row-major nested arrays; rows may be empty only if all
/// are.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    for r in rows {
        if r.len() != ncols {
            return Err("ragged matrix rows".into());
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Row-major nested arrays from a matrix.
pub fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// The mixed-binary conic set. See the module docs for the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSet {
    pub n: usize,
    pub m: usize,
    /// Number of rows of the cone's affine map.
    pub p: usize,
    pub domain: BinaryDomain,
    #[serde(rename = "A", with = "serde_mat")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_mat")]
    pub b: DMatrix<f64>,
    #[serde(with = "serde_vec")]
    pub d: DVector<f64>,
    pub f: RhsFunction,
    pub norm: Norm,
    /// Optional `[lo, hi]` per continuous coordinate; `hi` may be infinite
    /// (serialized as `null`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_box: Option<Vec<(f64, Option<f64>)>>,
}

impl ConicSet {
    /// Construct and validate in one step.
    pub fn new(
        domain: BinaryDomain,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DVector<f64>,
        f: RhsFunction,
        norm: Norm,
        y_box: Option<Vec<(f64, Option<f64>)>>,
    ) -> Result<Self> {
        let set = ConicSet {
            n: domain.dim(),
            m: b.ncols(),
            p: b.nrows(),
            domain,
            a,
            b,
            d,
            f,
            norm,
            y_box,
        };
        let violations = set.validate();
        if violations.is_empty() {
            Ok(set)
        } else {
            Err(Error::invalid(violations.join("; ")))
        }
    }

    /// Check every type invariant; returns human-readable violation
    /// descriptions (empty = valid). Pure: identical calls give identical
    /// lists.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.domain.check() {
            out.push(e.to_string());
        } else {
            if self.domain.dim() != self.n {
                out.push(format!(
                    "declared n = {} but domain points have length {}",
                    self.n,
                    self.domain.dim()
                ));
            }
        }
        if self.a.shape() != (self.p, self.n) {
            out.push(format!(
                "A must be {}×{}, got {}×{}",
                self.p,
                self.n,
                self.a.nrows(),
                self.a.ncols()
            ));
        }
        if self.b.shape() != (self.p, self.m) {
            out.push(format!(
                "B must be {}×{}, got {}×{}",
                self.p,
                self.m,
                self.b.nrows(),
                self.b.ncols()
            ));
        }
        if self.d.len() != self.p {
            out.push(format!("d must have length {}, got {}", self.p, self.d.len()));
        }
        match &self.f {
            RhsFunction::Table(v) => {
                if v.len() != self.domain.len() {
                    out.push(format!(
                        "rhs table has {} entries for {} domain points",
                        v.len(),
                        self.domain.len()
                    ));
                } else if let Some((k, &bad)) =
                    v.iter().enumerate().find(|(_, &x)| !(x >= 0.0) || !x.is_finite())
                {
                    out.push(format!("rhs table value at point {k} is {bad}; must be finite and ≥ 0"));
                }
            }
            RhsFunction::SqrtQuadratic { p, r, s } => {
                if p.len() != self.n || p.iter().any(|row| row.len() != self.n) {
                    out.push(format!("rhs quadratic matrix must be {0}×{0}", self.n));
                } else {
                    for i in 0..self.n {
                        for j in (i + 1)..self.n {
                            if (p[i][j] - p[j][i]).abs() > 1e-9 * (1.0 + p[i][j].abs()) {
                                out.push(format!("rhs quadratic matrix not symmetric at ({i},{j})"));
                            }
                        }
                    }
                }
                if r.len() != self.n {
                    out.push(format!("rhs linear term must have length {}", self.n));
                }
                if !s.is_finite() {
                    out.push("rhs constant term must be finite".into());
                }
                if out.is_empty() {
                    for k in 0..self.domain.len() {
                        let q = self.f.radicand(&self.domain, k);
                        if q < -RADICAND_CLAMP {
                            out.push(format!(
                                "rhs radicand is {q:.6e} < -{RADICAND_CLAMP:.0e} at domain point {k}"
                            ));
                        }
                    }
                }
            }
        }
        if let Some(bx) = &self.y_box {
            if bx.len() != self.m {
                out.push(format!("y_box must have {} entries, got {}", self.m, bx.len()));
            }
            for (i, (lo, hi)) in bx.iter().enumerate() {
                if let Some(h) = hi {
                    if h < lo {
                        out.push(format!("y_box[{i}] has lower bound {lo} above upper bound {h}"));
                    }
                }
            }
        }
        out
    }

    /// `f` at domain point `k`.
    pub fn f_value(&self, k: usize) -> f64 {
        self.f.value(&self.domain, k)
    }

    /// All `f` values in domain order.
    pub fn f_values(&self) -> Vec<f64> {
        self.f.values(&self.domain)
    }

    /// `‖A x + B y + d‖` in the set's norm, for arbitrary real `x`.
    pub fn cone_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.norm.eval((&self.a * x + &self.b * y + &self.d).as_slice())
    }

    /// Smallest slack over the `y_box` rows at `y` (`+∞` when no box).
    pub fn y_box_slack(&self, y: &DVector<f64>) -> f64 {
        match &self.y_box {
            None => f64::INFINITY,
            Some(bx) => bx
                .iter()
                .enumerate()
                .map(|(i, (lo, hi))| {
                    let lo_slack = y[i] - lo;
                    match hi {
                        Some(h) => lo_slack.min(h - y[i]),
                        None => lo_slack,
                    }
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: ConicSet = serde_json::from_str(text)?;
        let violations = set.validate();
        if violations.is_empty() {
            Ok(set)
        } else {
            Err(Error::invalid(violations.join("; ")))
        }
    }
}

/// Classification of a point against a set, with the signed slack of the
/// tightest constraint. `Boundary` iff `|margin|` is within the tolerance
/// band used by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MembershipStatus {
    Inside,
    Outside,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub status: MembershipStatus,
    pub margin: f64,
}

impl MembershipVerdict {
    /// Classify from a signed margin (positive = inside) and a band width.
    pub fn from_margin(margin: f64, band: f64) -> Self {
        let status = if margin.abs() <= band {
            MembershipStatus::Boundary
        } else if margin > 0.0 {
            MembershipStatus::Inside
        } else {
            MembershipStatus::Outside
        };
        MembershipVerdict { status, margin }
    }

    /// Inside-or-boundary convenience.
    pub fn admits(&self) -> bool {
        self.status != MembershipStatus::Outside
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn example_disc() -> ConicSet {
        // one binary, one continuous, constant rhs √2, x-column outside col(B)
        ConicSet::new(
            BinaryDomain::full_cube(1).unwrap(),
            dmatrix![1.0; 0.0],
            dmatrix![0.0; 1.0],
            dvector![0.0, 0.0],
            RhsFunction::Table(vec![2f64.sqrt(), 2f64.sqrt()]),
            Norm::L2,
            None,
        )
        .unwrap()
    }

    #[test]
    fn valid_set_has_no_violations() {
        assert!(example_disc().validate().is_empty());
    }

    #[test]
    fn duplicate_domain_point_is_named() {
        let mut set = example_disc();
        set.domain = BinaryDomain {
            points: vec![vec![0], vec![0]],
        };
        set.f = RhsFunction::Table(vec![1.0, 1.0]);
        let v = set.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("duplicated domain point"));
    }

    #[test]
    fn negative_radicand_is_named() {
        let mut set = example_disc();
        // q(x) = -1 at x = 1:  0·x² + (−3)·x + 2 gives q(0)=2, q(1)=−1
        set.f = RhsFunction::SqrtQuadratic {
            p: vec![vec![0.0]],
            r: vec![-3.0],
            s: 2.0,
        };
        let v = set.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("radicand"), "{v:?}");
    }

    #[test]
    fn validate_is_pure() {
        let set = example_disc();
        assert_eq!(set.validate(), set.validate());
    }

    #[test]
    fn full_cube_order_has_coordinate_zero_fastest() {
        let d = BinaryDomain::full_cube(2).unwrap();
        assert_eq!(
            d.points(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]
        );
        assert_eq!(d.index_of(&[0, 1]), Some(2));
    }

    #[test]
    fn sqrt_quadratic_evaluates_and_clamps() {
        let domain = BinaryDomain::full_cube(1).unwrap();
        // q(x) = 2 − x²  →  q(1) = 1
        let f = RhsFunction::SqrtQuadratic {
            p: vec![vec![-1.0]],
            r: vec![0.0],
            s: 2.0,
        };
        assert_eq!(f.value(&domain, 0), 2f64.sqrt());
        assert_eq!(f.value(&domain, 1), 1.0);
        // tiny negative radicand clamps to zero
        let f = RhsFunction::SqrtQuadratic {
            p: vec![vec![0.0]],
            r: vec![0.0],
            s: -1e-10,
        };
        assert_eq!(f.value(&domain, 0), 0.0);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let set = example_disc();
        let text = set.to_json().unwrap();
        let back = ConicSet::from_json(&text).unwrap();
        assert_eq!(set, back);
        // schema keys are pinned
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["n", "m", "p", "domain", "A", "B", "d", "f", "norm"] {
            assert!(v.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(v["norm"], "l2");
        assert_eq!(v["A"][0][0], 1.0);
    }

    #[test]
    fn y_box_round_trip_with_open_upper_bound() {
        let mut set = example_disc();
        set.y_box = Some(vec![(0.0, None)]);
        let text = set.to_json().unwrap();
        let back = ConicSet::from_json(&text).unwrap();
        assert_eq!(set, back);
        assert_eq!(back.y_box_slack(&dvector![3.0]), 3.0);
    }

    #[test]
    fn norms_evaluate() {
        let v = [3.0, -4.0];
        assert_eq!(Norm::L1.eval(&v), 7.0);
        assert_eq!(Norm::L2.eval(&v), 5.0);
        assert_eq!(Norm::Linf.eval(&v), 4.0);
    }

    #[test]
    fn membership_verdict_banding() {
        let v = MembershipVerdict::from_margin(5e-7, 1e-6);
        assert_eq!(v.status, MembershipStatus::Boundary);
        let v = MembershipVerdict::from_margin(2e-6, 1e-6);
        assert_eq!(v.status, MembershipStatus::Inside);
        let v = MembershipVerdict::from_margin(-2e-6, 1e-6);
        assert_eq!(v.status, MembershipStatus::Outside);
        assert!(!v.admits());
    }
}
