//! Solver-agnostic optimization model: variables with bounds and
//! integrality, linear / second-order-cone / quadratic / rotated-cone rows,
//! and a linear objective. This is the hand-off format between the
//! formulation builders, the solvers, and the export paths.
//!
//! The JSON layout of this type is the canonical model schema; the LP-text
//! export is a best-effort rendering for external consumers (quadratic terms
//! in `[ ]` brackets, Euclidean cone rows rewritten as quadratic rows plus a
//! sign row).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

/// A decision variable. `None` bounds mean unbounded on that side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// `coeffs · v  (≤ | ≥ | =)  rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRow {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `‖F v + g‖ ≤ h·v + e` in the given norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocRow {
    pub name: String,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub e: f64,
    pub norm: Norm,
}

/// `vᵀ Q v + linear·v ≤ rhs` with symmetric `Q` (not necessarily convex —
/// mixed-integer rows may carry indefinite blocks that become convex after
/// fixing the binaries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRow {
    pub name: String,
    pub q: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub rhs: f64,
}

/// `v[scalar]² ≤ v[bound]` — the hypograph link between a cone aggregate and
/// its budget variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedRow {
    pub name: String,
    pub scalar: usize,
    pub bound: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjSense,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIr {
    pub variables: Vec<Variable>,
    pub objective: Objective,
    #[serde(default)]
    pub linear: Vec<LinRow>,
    #[serde(default)]
    pub soc: Vec<SocRow>,
    #[serde(default)]
    pub quad: Vec<QuadRow>,
    #[serde(default)]
    pub rotated: Vec<RotatedRow>,
}

impl LinRow {
    pub fn lhs(&self, v: &[f64]) -> f64 {
        dot(&self.coeffs, v)
    }

    /// Nonnegative violation at `v`.
    pub fn violation(&self, v: &[f64]) -> f64 {
        let lhs = self.lhs(v);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

impl SocRow {
    /// `‖Fv+g‖ − (h·v+e)`; positive = violated.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let img: Vec<f64> = self
            .f
            .iter()
            .zip(self.g.iter())
            .map(|(row, gi)| dot(row, v) + gi)
            .collect();
        let lhs = match self.norm {
            Norm::L1 => img.iter().map(|x| x.abs()).sum(),
            Norm::L2 => img.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => img.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        };
        lhs - (dot(&self.h, v) + self.e)
    }

    pub fn violation(&self, v: &[f64]) -> f64 {
        self.residual(v).max(0.0)
    }
}

impl QuadRow {
    pub fn lhs(&self, v: &[f64]) -> f64 {
        let mut acc = dot(&self.linear, v);
        for (i, row) in self.q.iter().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                acc += vi * dot(row, v);
            }
        }
        acc
    }

    pub fn violation(&self, v: &[f64]) -> f64 {
        (self.lhs(v) - self.rhs).max(0.0)
    }
}

impl RotatedRow {
    pub fn violation(&self, v: &[f64]) -> f64 {
        (v[self.scalar] * v[self.scalar] - v[self.bound]).max(0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl ModelIr {
    pub fn new(sense: ObjSense) -> Self {
        ModelIr {
            variables: Vec::new(),
            objective: Objective {
                sense,
                coeffs: Vec::new(),
                constant: 0.0,
            },
            linear: Vec::new(),
            soc: Vec::new(),
            quad: Vec::new(),
            rotated: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Add a variable with objective coefficient `obj`; returns its index.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<f64>,
        upper: Option<f64>,
        kind: VarKind,
        obj: f64,
    ) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.objective.coeffs.push(obj);
        self.variables.len() - 1
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Objective value (including constant) at a point.
    pub fn objective_value(&self, v: &[f64]) -> f64 {
        dot(&self.objective.coeffs, v) + self.objective.constant
    }

    /// Largest constraint violation at a point (bounds included).
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, var) in self.variables.iter().enumerate() {
            if let Some(lo) = var.lower {
                worst = worst.max(lo - v[i]);
            }
            if let Some(hi) = var.upper {
                worst = worst.max(v[i] - hi);
            }
        }
        for r in &self.linear {
            worst = worst.max(r.violation(v));
        }
        for r in &self.soc {
            worst = worst.max(r.violation(v));
        }
        for r in &self.quad {
            worst = worst.max(r.violation(v));
        }
        for r in &self.rotated {
            worst = worst.max(r.violation(v));
        }
        worst
    }

    /// Structural checks: row widths match the variable count, rotated rows
    /// reference declared variables, names are nonempty and unique.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vars();
        if self.objective.coeffs.len() != nv {
            return Err(Error::invalid(format!(
                "objective has {} coefficients for {} variables",
                self.objective.coeffs.len(),
                nv
            )));
        }
        let mut names = std::collections::HashSet::new();
        for v in &self.variables {
            if v.name.is_empty() || !names.insert(v.name.as_str()) {
                return Err(Error::invalid(format!(
                    "variable name {:?} empty or duplicated",
                    v.name
                )));
            }
            if let (Some(lo), Some(hi)) = (v.lower, v.upper) {
                if lo > hi {
                    return Err(Error::invalid(format!(
                        "variable {} has lower bound {lo} above upper bound {hi}",
                        v.name
                    )));
                }
            }
        }
        for r in &self.linear {
            if r.coeffs.len() != nv {
                return Err(Error::invalid(format!("linear row {} width mismatch", r.name)));
            }
        }
        for r in &self.soc {
            if r.h.len() != nv
                || r.f.len() != r.g.len()
                || r.f.iter().any(|row| row.len() != nv)
            {
                return Err(Error::invalid(format!("cone row {} width mismatch", r.name)));
            }
        }
        for r in &self.quad {
            if r.linear.len() != nv || r.q.len() != nv || r.q.iter().any(|row| row.len() != nv) {
                return Err(Error::invalid(format!("quadratic row {} width mismatch", r.name)));
            }
            for i in 0..nv {
                for j in (i + 1)..nv {
                    if (r.q[i][j] - r.q[j][i]).abs() > 1e-9 * (1.0 + r.q[i][j].abs()) {
                        return Err(Error::invalid(format!(
                            "quadratic row {} matrix not symmetric at ({i},{j})",
                            r.name
                        )));
                    }
                }
            }
        }
        for r in &self.rotated {
            if r.scalar >= nv || r.bound >= nv {
                return Err(Error::invalid(format!(
                    "rotated row {} references undeclared variables",
                    r.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ir: ModelIr = serde_json::from_str(text)?;
        ir.validate()?;
        Ok(ir)
    }

    /// LP-format-style rendering. Quadratic content goes in `[ ]` brackets;
    /// a Euclidean cone row `‖Fv+g‖ ≤ h·v+e` becomes the quadratic row
    /// `(Fv+g)ᵀ(Fv+g) − (h·v+e)² ≤ 0` plus the sign row `h·v+e ≥ 0`.
    /// Polyhedral-norm cone rows are not representable.
    pub fn lp_text(&self) -> Result<String> {
        self.validate()?;
        for v in &self.variables {
            let ok = v
                .name
                .chars()
                .enumerate()
                .all(|(i, c)| c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit()));
            if !ok {
                return Err(Error::UnrepresentableConstraint(format!(
                    "variable name {:?} is not LP-format safe",
                    v.name
                )));
            }
        }
        let nv = self.num_vars();
        let mut out = String::new();
        out.push_str(match self.objective.sense {
            ObjSense::Maximize => "Maximize\n",
            ObjSense::Minimize => "Minimize\n",
        });
        out.push_str(" obj:");
        let mut obj_terms = String::new();
        append_linear_terms(&mut obj_terms, &self.objective.coeffs, &self.variables);
        if self.objective.constant != 0.0 {
            append_signed(&mut obj_terms, self.objective.constant, "");
        }
        if obj_terms.is_empty() {
            obj_terms.push_str(" 0 ");
            obj_terms.push_str(&self.variables.first().map_or("x".into(), |v| v.name.clone()));
        }
        out.push_str(&obj_terms);
        out.push('\n');
        out.push_str("Subject To\n");
        for r in &self.linear {
            out.push_str(&format!(" {}:", r.name));
            let mut terms = String::new();
            append_linear_terms(&mut terms, &r.coeffs, &self.variables);
            if terms.is_empty() {
                terms.push_str(" 0 ");
                terms.push_str(&self.variables[0].name);
            }
            out.push_str(&terms);
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            out.push_str(&format!(" {op} {}\n", fmt_num(r.rhs)));
        }
        for r in &self.quad {
            out.push_str(&format!(" {}:", r.name));
            out.push_str(&quad_body(&r.q, &r.linear, &self.variables)?);
            out.push_str(&format!(" <= {}\n", fmt_num(r.rhs)));
        }
        for r in &self.rotated {
            out.push_str(&format!(
                " {}: [ {} ^2 ] - {} <= 0\n",
                r.name, self.variables[r.scalar].name, self.variables[r.bound].name
            ));
        }
        for r in &self.soc {
            if r.norm != Norm::L2 {
                return Err(Error::UnrepresentableConstraint(format!(
                    "cone row {} uses norm {}, only l2 has a quadratic rendering",
                    r.name, r.norm
                )));
            }
            // Q = FᵀF − hhᵀ, linear = 2Fᵀg − 2e·h, rhs = e² − gᵀg
            let mut q = vec![vec![0.0; nv]; nv];
            let mut lin = vec![0.0; nv];
            for i in 0..nv {
                lin[i] = -2.0 * r.e * r.h[i];
                for (row, gi) in r.f.iter().zip(r.g.iter()) {
                    lin[i] += 2.0 * row[i] * gi;
                }
                for j in 0..nv {
                    let mut acc = -r.h[i] * r.h[j];
                    for row in &r.f {
                        acc += row[i] * row[j];
                    }
                    q[i][j] = acc;
                }
            }
            let rhs = r.e * r.e - r.g.iter().map(|x| x * x).sum::<f64>();
            out.push_str(&format!(" {}_quad:", r.name));
            out.push_str(&quad_body(&q, &lin, &self.variables)?);
            out.push_str(&format!(" <= {}\n", fmt_num(rhs)));
            out.push_str(&format!(" {}_sign:", r.name));
            let mut terms = String::new();
            append_linear_terms(&mut terms, &r.h, &self.variables);
            if terms.is_empty() {
                terms.push_str(" 0 ");
                terms.push_str(&self.variables[0].name);
            }
            out.push_str(&terms);
            out.push_str(&format!(" >= {}\n", fmt_num(-r.e)));
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            match (v.lower, v.upper) {
                (None, None) => out.push_str(&format!(" {} free\n", v.name)),
                (Some(lo), None) => out.push_str(&format!(" {} >= {}\n", v.name, fmt_num(lo))),
                (None, Some(hi)) => {
                    out.push_str(&format!(" -infinity <= {} <= {}\n", v.name, fmt_num(hi)))
                }
                (Some(lo), Some(hi)) => {
                    out.push_str(&format!(" {} <= {} <= {}\n", fmt_num(lo), v.name, fmt_num(hi)))
                }
            }
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for b in binaries {
                out.push_str(&format!(" {b}\n"));
            }
        }
        out.push_str("End\n");
        Ok(out)
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn append_signed(out: &mut String, coeff: f64, var: &str) {
    if coeff == 0.0 {
        return;
    }
    if out.is_empty() {
        if coeff < 0.0 {
            out.push_str(" -");
        }
    } else {
        out.push_str(if coeff < 0.0 { " -" } else { " +" });
    }
    out.push(' ');
    out.push_str(&fmt_num(coeff.abs()));
    if !var.is_empty() {
        out.push(' ');
        out.push_str(var);
    }
}

fn append_linear_terms(out: &mut String, coeffs: &[f64], vars: &[Variable]) {
    for (c, v) in coeffs.iter().zip(vars.iter()) {
        append_signed(out, *c, &v.name);
    }
}

fn quad_body(q: &[Vec<f64>], linear: &[f64], vars: &[Variable]) -> Result<String> {
    let nv = vars.len();
    let mut bracket = String::new();
    for i in 0..nv {
        let qii = q[i][i];
        if qii != 0.0 {
            append_signed(&mut bracket, qii, &format!("{} ^2", vars[i].name));
        }
        for j in (i + 1)..nv {
            let c = q[i][j] + q[j][i];
            if c != 0.0 {
                append_signed(&mut bracket, c, &format!("{} * {}", vars[i].name, vars[j].name));
            }
        }
    }
    let mut body = String::new();
    if !bracket.is_empty() {
        body.push_str(" [");
        body.push_str(&bracket);
        body.push_str(" ]");
    }
    let mut lin_terms = String::new();
    append_linear_terms(&mut lin_terms, linear, vars);
    if body.is_empty() && lin_terms.is_empty() {
        lin_terms.push_str(" 0 ");
        lin_terms.push_str(&vars[0].name);
    }
    body.push_str(&lin_terms);
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> ModelIr {
        let mut ir = ModelIr::new(ObjSense::Maximize);
        let x = ir.add_var("x0", Some(0.0), Some(1.0), VarKind::Binary, 3.0);
        let y = ir.add_var("y0", Some(0.0), Some(1.0), VarKind::Continuous, 1.0);
        ir.linear.push(LinRow {
            name: "mean".into(),
            coeffs: vec![1.0, 1.0],
            sense: Sense::Le,
            rhs: 2.0,
        });
        let mut q = vec![vec![0.0; 2]; 2];
        q[x][y] = -1.0;
        q[y][x] = -1.0;
        ir.quad.push(QuadRow {
            name: "dev".into(),
            q,
            linear: vec![4.0, 4.0],
            rhs: 4.0,
        });
        ir
    }

    #[test]
    fn validates_and_round_trips() {
        let ir = toy_model();
        ir.validate().unwrap();
        let text = ir.to_json().unwrap();
        let back = ModelIr::from_json(&text).unwrap();
        assert_eq!(ir, back);
    }

    #[test]
    fn violation_accounting() {
        let ir = toy_model();
        // (1, 0): mean row slack 1, dev row: lhs = 4 ≤ 4 feasible
        assert_eq!(ir.max_violation(&[1.0, 0.0]), 0.0);
        // (1, 1): mean row 2 ≤ 2 ok; dev row: −2 + 8 = 6 > 4 violated by 2
        assert!((ir.max_violation(&[1.0, 1.0]) - 2.0).abs() < 1e-12);
        assert_eq!(ir.objective_value(&[1.0, 0.0]), 3.0);
    }

    #[test]
    fn empty_model_exports() {
        let mut ir = ModelIr::new(ObjSense::Minimize);
        ir.add_var("x", Some(0.0), None, VarKind::Continuous, 0.0);
        let text = ir.lp_text().unwrap();
        assert!(text.starts_with("Minimize"));
        assert!(text.contains("End"));
    }

    #[test]
    fn lp_text_renders_quadratics_and_binaries() {
        let ir = toy_model();
        let text = ir.lp_text().unwrap();
        assert!(text.contains("Maximize"), "{text}");
        assert!(text.contains("obj: 3 x0 + 1 y0"), "{text}");
        assert!(text.contains("[ - 2 x0 * y0 ]"), "{text}");
        assert!(text.contains("Binaries"), "{text}");
        assert!(text.contains(" x0\n"), "{text}");
    }

    #[test]
    fn lp_text_rewrites_euclidean_cones_and_rejects_others() {
        let mut ir = ModelIr::new(ObjSense::Maximize);
        ir.add_var("y0", None, None, VarKind::Continuous, 1.0);
        ir.add_var("t", Some(0.0), None, VarKind::Continuous, 0.0);
        ir.soc.push(SocRow {
            name: "cone".into(),
            f: vec![vec![1.0, 0.0]],
            g: vec![0.0],
            h: vec![0.0, 1.0],
            e: 0.0,
            norm: Norm::L2,
        });
        let text = ir.lp_text().unwrap();
        assert!(text.contains("cone_quad: [ 1 y0 ^2 - 1 t ^2 ] <= 0"), "{text}");
        assert!(text.contains("cone_sign: 1 t >= 0"), "{text}");
        let mut ir2 = ir.clone();
        ir2.soc[0].norm = Norm::L1;
        match ir2.lp_text() {
            Err(Error::UnrepresentableConstraint(_)) => {}
            other => panic!("expected UnrepresentableConstraint, got {other:?}"),
        }
    }

    #[test]
    fn rejects_width_mismatch() {
        let mut ir = toy_model();
        ir.linear[0].coeffs.pop();
        assert!(ir.validate().is_err());
    }
}
