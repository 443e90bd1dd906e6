//! Concave envelope of a function given by its values on a finite binary
//! domain, with convex-combination certificates.
//!
//! The envelope at a query point is the optimum of a small LP over the
//! simplex of domain weights:
//!
//! ```text
//!     f̂(x) = max { Σ λ_k f(x^k) : Σ λ_k x^k = x, λ ∈ Δ }.
//! ```
//!
//! A basic optimal solution of that LP touches at most `n+1` weights, so the
//! returned certificate is automatically Carathéodory-sized. The dual of the
//! equality block is an affine majorant of the values — the cutting-plane
//! machinery in [`crate::relaxation`] leans on it.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::BinaryDomain;
use crate::solvers::{solve_lp, LpProblem, SolveStatus};

/// Support threshold: a basic weight below this is treated as zero.
const WEIGHT_EPS: f64 = 1e-9;

/// Envelope value at a query point together with the convex combination of
/// domain points attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCertificate {
    /// `f̂(query)`.
    pub value: f64,
    /// Ascending indices into the domain's point list; at most `n+1` entries.
    pub support: Vec<usize>,
    /// Weights matching `support`; positive, summing to one.
    pub weights: Vec<f64>,
}

impl EnvelopeCertificate {
    /// `Σ λ_k x^k` — must reproduce the query.
    pub fn reconstruct_point(&self, domain: &BinaryDomain) -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(domain.dim());
        for (&k, &w) in self.support.iter().zip(self.weights.iter()) {
            out.axpy(w, &domain.point_vec(k), 1.0);
        }
        out
    }

    /// `Σ λ_k f(x^k)` — must reproduce the value.
    pub fn reconstruct_value(&self, values: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(self.weights.iter())
            .map(|(&k, &w)| w * values[k])
            .sum()
    }
}

fn envelope_lp(domain: &BinaryDomain, values: &[f64], query: &DVector<f64>) -> Result<LpProblem> {
    if values.len() != domain.len() {
        return Err(Error::invalid(format!(
            "{} values for a domain of {} points",
            values.len(),
            domain.len()
        )));
    }
    if query.len() != domain.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, domain has {}",
            query.len(),
            domain.dim()
        )));
    }
    let kk = domain.len();
    let mut lp = LpProblem::new(true, values.to_vec());
    lp.bounds = vec![(0.0, f64::INFINITY); kk];
    for coord in 0..domain.dim() {
        let row: Vec<f64> = (0..kk).map(|k| domain.point(k)[coord] as f64).collect();
        lp.eq.push((row, query[coord]));
    }
    lp.eq.push((vec![1.0; kk], 1.0));
    Ok(lp)
}

fn certificate_from_point(lambda: &[f64], value: f64) -> EnvelopeCertificate {
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for (k, &w) in lambda.iter().enumerate() {
        if w > WEIGHT_EPS {
            support.push(k);
            weights.push(w);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    EnvelopeCertificate { value, support, weights }
}

/// Concave envelope `f̂(query)` of the values over `conv(domain)`.
///
/// Errors with [`Error::QueryOutsideHull`] when the query is not a convex
/// combination of domain points.
pub fn concave_envelope(
    domain: &BinaryDomain,
    values: &[f64],
    query: &DVector<f64>,
) -> Result<EnvelopeCertificate> {
    let (cert, _, _) = concave_envelope_with_majorant(domain, values, query)?;
    Ok(cert)
}

/// Envelope certificate plus the dual affine majorant `(π, π₀)`:
/// `π·x^k + π₀ ≥ f(x^k)` on every domain point, with equality on the
/// support, and `π·query + π₀ = f̂(query)`.
pub fn concave_envelope_with_majorant(
    domain: &BinaryDomain,
    values: &[f64],
    query: &DVector<f64>,
) -> Result<(EnvelopeCertificate, DVector<f64>, f64)> {
    let lp = envelope_lp(domain, values, query)?;
    let r = solve_lp(&lp)?;
    match r.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::QueryOutsideHull(format!(
                "no convex combination of the {} domain points reaches the query",
                domain.len()
            )))
        }
        other => {
            return Err(Error::NumericalLimit(format!(
                "envelope LP ended with status {other:?}"
            )))
        }
    }
    let n = domain.dim();
    let pi = DVector::from_iterator(n, r.row_duals[..n].iter().copied());
    let pi0 = r.row_duals[n];
    Ok((certificate_from_point(&r.point, r.value), pi, pi0))
}

/// Largest gap `f̂ − (multilinear interpolation of the values)` over the
/// samples. The interpolation is the canonical affine-in-each-coordinate
/// extension, so it needs the full cube; a single-point domain is the
/// trivial case with gap zero.
pub fn envelope_gap_to_function(
    domain: &BinaryDomain,
    values: &[f64],
    samples: &[DVector<f64>],
) -> Result<f64> {
    let n = domain.dim();
    let full = domain.len() == (1usize << n);
    if !full && domain.len() > 1 {
        return Err(Error::invalid(
            "interpolation lower bound needs the full binary cube (or a single point)",
        ));
    }
    let mut gap = 0.0f64;
    for s in samples {
        let cert = concave_envelope(domain, values, s)?;
        if domain.len() == 1 {
            continue;
        }
        let mut interp = 0.0f64;
        for (k, point) in domain.points().iter().enumerate() {
            let mut w = 1.0f64;
            for (i, &bit) in point.iter().enumerate() {
                w *= if bit == 1 { s[i] } else { 1.0 - s[i] };
            }
            interp += w * values[k];
        }
        gap = gap.max(cert.value - interp);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};

    fn simplex_sample(domain: &BinaryDomain, rng: &mut impl Rng) -> DVector<f64> {
        let mut w: Vec<f64> = (0..domain.len())
            .map(|_| -(rng.gen_range(1e-12..1.0f64)).ln())
            .collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        let mut out = DVector::<f64>::zeros(domain.dim());
        for (k, &wk) in w.iter().enumerate() {
            out.axpy(wk, &domain.point_vec(k), 1.0);
        }
        out
    }

    #[test]
    fn chord_between_two_values() {
        // values (√2, 1) on {0,1}: envelope is the chord (1−√2)x + √2
        let domain = BinaryDomain::full_cube(1).unwrap();
        let values = [2f64.sqrt(), 1.0];
        let cert = concave_envelope(&domain, &values, &dvector![0.5]).unwrap();
        let expect = (1.0 - 2f64.sqrt()) * 0.5 + 2f64.sqrt();
        assert!((cert.value - expect).abs() < 1e-9, "value {}", cert.value);
        assert_eq!(cert.support, vec![0, 1]);
        assert!((cert.weights[0] - 0.5).abs() < 1e-9);
        assert!((cert.weights[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn domain_point_query_is_singleton() {
        let domain = BinaryDomain::full_cube(1).unwrap();
        let values = [0.3, 0.9];
        let cert = concave_envelope(&domain, &values, &dvector![1.0]).unwrap();
        assert!((cert.value - 0.9).abs() < 1e-9);
        assert_eq!(cert.support, vec![1]);
        assert!((cert.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_center_value() {
        // values (0,1,1,1) on {0,1}² (cube order (0,0),(1,0),(0,1),(1,1)):
        // mixing (1,0) and (0,1) reaches the center with value 1, and no
        // combination exceeds 1
        let domain = BinaryDomain::full_cube(2).unwrap();
        let values = [0.0, 1.0, 1.0, 1.0];
        let cert = concave_envelope(&domain, &values, &dvector![0.5, 0.5]).unwrap();
        assert!((cert.value - 1.0).abs() < 1e-9, "value {}", cert.value);
        assert!(cert.support.len() <= 3);
    }

    #[test]
    fn outside_hull_rejected() {
        let domain = BinaryDomain::full_cube(2).unwrap();
        let values = [0.0; 4];
        match concave_envelope(&domain, &values, &dvector![1.5, 0.0]) {
            Err(Error::QueryOutsideHull(_)) => {}
            other => panic!("expected QueryOutsideHull, got {other:?}"),
        }
        // off the segment spanned by a restricted domain
        let seg = BinaryDomain::new(vec![vec![0, 0], vec![1, 1]]).unwrap();
        match concave_envelope(&seg, &[0.0, 0.0], &dvector![0.5, 0.2]) {
            Err(Error::QueryOutsideHull(_)) => {}
            other => panic!("expected QueryOutsideHull, got {other:?}"),
        }
    }

    #[test]
    fn majorizes_values_on_domain() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let domain = BinaryDomain::full_cube(3).unwrap();
        let values: Vec<f64> = (0..domain.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        for k in 0..domain.len() {
            let cert = concave_envelope(&domain, &values, &domain.point_vec(k)).unwrap();
            assert!(cert.value >= values[k] - 1e-9, "point {k}");
            assert!(cert.value <= max + 1e-9);
        }
    }

    #[test]
    fn midpoint_concavity_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let domain = BinaryDomain::full_cube(3).unwrap();
        let values: Vec<f64> = (0..domain.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
        for _ in 0..25 {
            let a = simplex_sample(&domain, &mut rng);
            let b = simplex_sample(&domain, &mut rng);
            let mid = (&a + &b) * 0.5;
            let fa = concave_envelope(&domain, &values, &a).unwrap().value;
            let fb = concave_envelope(&domain, &values, &b).unwrap().value;
            let fm = concave_envelope(&domain, &values, &mid).unwrap().value;
            assert!(fm >= 0.5 * (fa + fb) - 1e-8, "{fm} < avg of {fa}, {fb}");
        }
    }

    #[test]
    fn positive_scaling_commutes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let domain = BinaryDomain::full_cube(2).unwrap();
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0)).collect();
        let scaled: Vec<f64> = values.iter().map(|v| 2.7 * v).collect();
        for _ in 0..10 {
            let q = simplex_sample(&domain, &mut rng);
            let base = concave_envelope(&domain, &values, &q).unwrap().value;
            let big = concave_envelope(&domain, &scaled, &q).unwrap().value;
            assert!((big - 2.7 * base).abs() <= 1e-8 * (1.0 + big.abs()));
        }
    }

    #[test]
    fn certificates_are_caratheodory_and_reconstruct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for n in 1..=4usize {
            let domain = BinaryDomain::full_cube(n).unwrap();
            let values: Vec<f64> = (0..domain.len()).map(|_| rng.gen_range(-1.0..4.0)).collect();
            for _ in 0..20 {
                let q = simplex_sample(&domain, &mut rng);
                let cert = concave_envelope(&domain, &values, &q).unwrap();
                assert!(cert.support.len() <= n + 1, "support {:?}", cert.support);
                assert!(cert.support.windows(2).all(|w| w[0] < w[1]));
                let wsum: f64 = cert.weights.iter().sum();
                assert!((wsum - 1.0).abs() <= 1e-12);
                let back = cert.reconstruct_point(&domain);
                assert!((back - &q).amax() <= 1e-6, "query reconstruction");
                let v = cert.reconstruct_value(&values);
                assert!((v - cert.value).abs() <= 1e-6, "value reconstruction");
            }
        }
    }

    #[test]
    fn dual_majorant_touches_envelope() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let domain = BinaryDomain::full_cube(3).unwrap();
        let values: Vec<f64> = (0..domain.len()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let q = simplex_sample(&domain, &mut rng);
        let (cert, pi, pi0) = concave_envelope_with_majorant(&domain, &values, &q).unwrap();
        for k in 0..domain.len() {
            let maj = pi.dot(&domain.point_vec(k)) + pi0;
            assert!(maj >= values[k] - 1e-8, "majorant below value at {k}");
        }
        assert!((pi.dot(&q) + pi0 - cert.value).abs() <= 1e-8);
    }

    #[test]
    fn interpolation_gap_diagnostics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
        // affine values → zero gap everywhere
        let domain = BinaryDomain::full_cube(2).unwrap();
        let affine: Vec<f64> = domain
            .points()
            .iter()
            .map(|p| 2.0 * p[0] as f64 - p[1] as f64 + 0.3)
            .collect();
        let samples: Vec<DVector<f64>> = (0..10).map(|_| simplex_sample(&domain, &mut rng)).collect();
        let g = envelope_gap_to_function(&domain, &affine, &samples).unwrap();
        assert!(g.abs() <= 1e-8, "gap {g}");

        // (0,1,1,1): envelope 1 at the center, interpolation 3/4 → gap 1/4
        let vals = [0.0, 1.0, 1.0, 1.0];
        let g = envelope_gap_to_function(&domain, &vals, &[dvector![0.5, 0.5]]).unwrap();
        assert!((g - 0.25).abs() <= 1e-9, "gap {g}");

        // chord case is degenerate in one dimension: envelope equals the
        // interpolation, gap zero at every sample
        let line = BinaryDomain::full_cube(1).unwrap();
        let vals = [2f64.sqrt(), 1.0];
        let g = envelope_gap_to_function(
            &line,
            &vals,
            &[dvector![0.0], dvector![0.5], dvector![1.0]],
        )
        .unwrap();
        assert!(g.abs() <= 1e-9);

        // single-point domain
        let single = BinaryDomain::new(vec![vec![1, 0]]).unwrap();
        let g = envelope_gap_to_function(&single, &[5.0], &[dvector![1.0, 0.0]]).unwrap();
        assert_eq!(g, 0.0);
    }
}
