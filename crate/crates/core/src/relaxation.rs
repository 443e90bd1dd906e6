//! The square-root-of-envelope relaxation.
//!
//! Replacing the right-hand side `f` of a cone row by `√(q̂(x))`, where `q̂`
//! is the concave envelope of `q = f²`, gives a convex relaxation that a
//! conic solver can carry natively (the radicand stays quadratic). This
//! module quantifies the price of that convenience: with `L = min f`,
//! `U = max f` over the domain,
//!
//! ```text
//!     0 ≤ √(q̂(x)) − f̂(x) ≤ (U − L)² / (4(L + U)),      0/0 := 0.
//! ```
//!
//! The left inequality is majorization (`√q̂` is concave and sits above `f`
//! on the domain); the right follows from the Bhatia–Davis variance bound
//! `σ² ≤ (U − µ)(µ − L)`, which [`bhatia_davis_check`] exercises directly.

use nalgebra::DVector;
use rand::Rng;

use crate::config::Tolerances;
use crate::envelope::concave_envelope;
use crate::error::{Error, Result};
use crate::model::BinaryDomain;

/// `√(q̂(query))` for per-point radicand values `q ≥ 0`.
pub fn sqrt_envelope_value(
    domain: &BinaryDomain,
    qvalues: &[f64],
    query: &DVector<f64>,
) -> Result<f64> {
    if let Some((k, &bad)) = qvalues
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= 0.0) || !v.is_finite())
    {
        return Err(Error::invalid(format!(
            "radicand value at point {k} is {bad}; must be finite and ≥ 0"
        )));
    }
    let cert = concave_envelope(domain, qvalues, query)?;
    Ok(cert.value.max(0.0).sqrt())
}

/// `(U − L)² / (4(L + U))` with the `0/0 := 0` convention.
pub fn gap_bound(l: f64, u: f64) -> Result<f64> {
    if !l.is_finite() || !u.is_finite() || l < 0.0 || l > u {
        return Err(Error::invalid(format!(
            "range must satisfy 0 ≤ L ≤ U < ∞, got L = {l}, U = {u}"
        )));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok((u - l).powi(2) / (4.0 * (l + u)))
}

/// One evaluated grid point of [`verify_gap_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub x: DVector<f64>,
    pub f_hat: f64,
    pub sqrt_q_hat: f64,
    /// `√(q̂) − f̂` at this point.
    pub gap: f64,
}

/// Outcome of sweeping the relaxation gap over a grid.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub l: f64,
    pub u: f64,
    /// The a-priori bound `(U−L)²/(4(L+U))`.
    pub bound: f64,
    pub max_gap: f64,
    /// Grid point attaining `max_gap`.
    pub argmax: DVector<f64>,
    /// Every gap within `[−tol, bound + tol]`.
    pub holds: bool,
    pub rows: Vec<GapRow>,
}

impl GapReport {
    /// CSV log: one line per grid point, bound repeated for convenience.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("");
        if let Some(row) = self.rows.first() {
            for i in 0..row.x.len() {
                out.push_str(&format!("x_{i},"));
            }
        }
        out.push_str("f_hat,sqrt_q_hat,gap,bound\n");
        for row in &self.rows {
            for v in row.x.iter() {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.f_hat, row.sqrt_q_hat, row.gap, self.bound
            ));
        }
        out
    }
}

/// Evaluate `√(q̂) − f̂` (with `q = f²` pointwise) on every grid query and
/// compare against [`gap_bound`] of the exact domain range of `f`.
pub fn verify_gap_bound(
    domain: &BinaryDomain,
    fvalues: &[f64],
    grid: &[DVector<f64>],
    tols: &Tolerances,
) -> Result<GapReport> {
    if fvalues.len() != domain.len() {
        return Err(Error::invalid(format!(
            "{} values for a domain of {} points",
            fvalues.len(),
            domain.len()
        )));
    }
    if let Some((k, &bad)) = fvalues
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= 0.0) || !v.is_finite())
    {
        return Err(Error::invalid(format!(
            "rhs value at point {k} is {bad}; must be finite and ≥ 0"
        )));
    }
    let l = fvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let u = fvalues.iter().cloned().fold(0.0f64, f64::max);
    let bound = gap_bound(l, u)?;
    let qvalues: Vec<f64> = fvalues.iter().map(|v| v * v).collect();

    let mut report = GapReport {
        l,
        u,
        bound,
        max_gap: f64::NEG_INFINITY,
        argmax: DVector::zeros(domain.dim()),
        holds: true,
        rows: Vec::with_capacity(grid.len()),
    };
    let tol = tols.equality;
    for x in grid {
        let f_hat = concave_envelope(domain, fvalues, x)?.value;
        let sqrt_q_hat = sqrt_envelope_value(domain, &qvalues, x)?;
        let gap = sqrt_q_hat - f_hat;
        if gap < -tol || gap > bound + tol {
            report.holds = false;
        }
        if gap > report.max_gap {
            report.max_gap = gap;
            report.argmax = x.clone();
        }
        report.rows.push(GapRow {
            x: x.clone(),
            f_hat,
            sqrt_q_hat,
            gap,
        });
    }
    if report.rows.is_empty() {
        report.max_gap = 0.0;
    }
    Ok(report)
}

/// All domain points plus `count` Dirichlet-uniform hull samples — the grid
/// that touches both the interior and the points where envelope and
/// function meet.
pub fn sample_grid(
    domain: &BinaryDomain,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<DVector<f64>> {
    let mut grid = domain.point_vecs();
    for _ in 0..count {
        let mut w: Vec<f64> = (0..domain.len())
            .map(|_| -(rng.gen_range(1e-12..1.0f64)).ln())
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        let mut x = DVector::zeros(domain.dim());
        for (k, &wk) in w.iter().enumerate() {
            x.axpy(wk, &domain.point_vec(k), 1.0);
        }
        grid.push(x);
    }
    grid
}

/// Check the variance bound `σ² ≤ (U − µ)(µ − L)` on weighted discrete
/// distributions, with `L`/`U` the extreme support values of each sample.
/// Always true for weights on the simplex — the check guards the arithmetic,
/// not the theorem.
pub fn bhatia_davis_check(samples: &[(Vec<f64>, Vec<f64>)], tols: &Tolerances) -> bool {
    for (values, weights) in samples {
        if values.is_empty() || values.len() != weights.len() {
            return false;
        }
        let l = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let u = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
        let var: f64 = values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (v - mean) * (v - mean))
            .sum();
        if var > (u - mean) * (mean - l) + tols.equality {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn sqrt_envelope_midpoint() {
        let domain = BinaryDomain::full_cube(1).unwrap();
        // q̂ is the chord 1 + 3x → at 0.5: √2.5
        let v = sqrt_envelope_value(&domain, &[1.0, 4.0], &dvector![0.5]).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-9);
        // domain point: √(q)
        let v = sqrt_envelope_value(&domain, &[1.0, 4.0], &dvector![1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        // constant q ≡ 9 → 3 everywhere
        let v = sqrt_envelope_value(&domain, &[9.0, 9.0], &dvector![0.3]).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
        // negative radicand rejected
        assert!(sqrt_envelope_value(&domain, &[-1.0, 4.0], &dvector![0.5]).is_err());
    }

    #[test]
    fn gap_bound_values_and_guards() {
        assert_eq!(gap_bound(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(gap_bound(0.0, 0.0).unwrap(), 0.0);
        assert!((gap_bound(1.0, 2.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(gap_bound(2.0, 1.0).is_err());
        assert!(gap_bound(-0.5, 1.0).is_err());
        assert!(gap_bound(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn gap_bound_decreases_along_shifted_ranges() {
        // fixed width U−L = 1: larger L → relatively smaller spread → smaller bound
        let mut last = f64::INFINITY;
        for l in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let b = gap_bound(l, l + 1.0).unwrap();
            assert!(b < last, "bound must strictly decrease, {b} !< {last}");
            last = b;
        }
    }

    #[test]
    fn two_point_gap_attains_its_frozen_maximum() {
        let domain = BinaryDomain::full_cube(1).unwrap();
        let grid: Vec<DVector<f64>> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&x| dvector![x])
            .collect();
        let report = verify_gap_bound(&domain, &[1.0, 2.0], &grid, &tols()).unwrap();
        assert!(report.holds);
        assert_eq!(report.l, 1.0);
        assert_eq!(report.u, 2.0);
        assert!((report.bound - 1.0 / 12.0).abs() < 1e-15);
        // closed forms: f̂ = 1 + x, √q̂ = √(1 + 3x); the gap peaks at x = ½
        assert!((report.max_gap - 0.08113883008418981).abs() < 1e-12);
        assert!((report.argmax[0] - 0.5).abs() < 1e-12);
        assert!(report.max_gap <= report.bound);
    }

    #[test]
    fn constant_rhs_has_no_gap() {
        let domain = BinaryDomain::full_cube(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let grid = sample_grid(&domain, 40, &mut rng);
        let report = verify_gap_bound(&domain, &[1.7; 4], &grid, &tols()).unwrap();
        assert!(report.holds);
        assert!(report.max_gap.abs() < 1e-9);
    }

    #[test]
    fn random_rhs_obeys_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..15 {
            let domain = BinaryDomain::full_cube(3).unwrap();
            let fvalues: Vec<f64> = (0..domain.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
            let grid = sample_grid(&domain, 50, &mut rng);
            let report = verify_gap_bound(&domain, &fvalues, &grid, &tols()).unwrap();
            assert!(report.holds, "gap {} vs bound {}", report.max_gap, report.bound);
            assert!(report.max_gap >= -1e-9, "left inequality");
        }
    }

    #[test]
    fn sqrt_envelope_is_midpoint_concave() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let domain = BinaryDomain::full_cube(2).unwrap();
        let qvalues: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..4.0)).collect();
        for _ in 0..25 {
            let pair: Vec<DVector<f64>> = sample_grid(&domain, 2, &mut rng)
                .split_off(domain.len());
            let (a, b) = (&pair[0], &pair[1]);
            let mid = (a + b) * 0.5;
            let va = sqrt_envelope_value(&domain, &qvalues, a).unwrap();
            let vb = sqrt_envelope_value(&domain, &qvalues, b).unwrap();
            let vm = sqrt_envelope_value(&domain, &qvalues, &mid).unwrap();
            assert!(vm >= 0.5 * (va + vb) - 1e-8);
        }
    }

    #[test]
    fn variance_bound_cases() {
        // point mass
        assert!(bhatia_davis_check(&[(vec![3.0], vec![1.0])], &tols()));
        // two-point half/half: exact equality σ² = (U−L)²/4
        let values = vec![1.0, 2.0];
        let weights = vec![0.5, 0.5];
        let mean = 1.5;
        let var: f64 = values
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * (v - mean) * (v - mean))
            .sum();
        assert!((var - 0.25).abs() < 1e-15);
        assert!((var - (2.0 - mean) * (mean - 1.0)).abs() < 1e-15);
        assert!(bhatia_davis_check(&[(values, weights)], &tols()));
        // 1000 random distributions on [1, 2]
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..1000)
            .map(|_| {
                let k = rng.gen_range(1..6);
                let values: Vec<f64> = (0..k).map(|_| rng.gen_range(1.0..2.0)).collect();
                let mut weights: Vec<f64> =
                    (0..k).map(|_| -(rng.gen_range(1e-12..1.0f64)).ln()).collect();
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
                (values, weights)
            })
            .collect();
        assert!(bhatia_davis_check(&samples, &tols()));
        // malformed sample shapes are a failure, not a panic
        assert!(!bhatia_davis_check(&[(vec![1.0], vec![0.5, 0.5])], &tols()));
    }

    #[test]
    fn csv_has_pinned_columns() {
        let domain = BinaryDomain::full_cube(1).unwrap();
        let grid = vec![dvector![0.5]];
        let report = verify_gap_bound(&domain, &[1.0, 2.0], &grid, &tols()).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x_0,f_hat,sqrt_q_hat,gap,bound");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert!((row[3].parse::<f64>().unwrap() - 0.08113883008418981).abs() < 1e-12);
    }
}
