//! Hull membership oracles and the equivalence driver.
//!
//! Two independent descriptions of `conv(Z)` are implemented:
//!
//! * the **envelope set** `W` — replace `f` by its concave envelope `f̂` and
//!   keep the cone row, `‖Ax + By + d‖ ≤ f̂(x)` ([`membership_envelope`]);
//! * the **disjunctive description** — decompose `(x, y)` into weighted
//!   slice contributions ([`membership_perspective`]).
//!
//! For a normalized set (cone image inside col(B), every slice nonempty, no
//! `y_box`) the two agree everywhere; [`verify_hull_equivalence`] samples the
//! envelope set's bounding box and checks exactly that. The bundled
//! [`example_fixture`]s reproduce the two classic failure modes: a column of
//! `A` outside col(B) (fixture 1, before normalization) and nonnegativity
//! bounds on `y` (fixture 2), each making `W` strictly larger than the hull.

mod perspective;

pub use perspective::membership_perspective;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;

use crate::config::Tolerances;
use crate::envelope::concave_envelope;
use crate::error::{Error, Result};
use crate::linalg::{column_compress, operator_norm, sigma_min};
use crate::model::{
    BinaryDomain, ConicSet, MembershipStatus, MembershipVerdict, Norm, RhsFunction,
};
use crate::reformulate::normalize_column_space;

/// Classify `(x, y)` against `Z` itself by direct evaluation. The margin is
/// the slack of the tightest constraint: cone row and, when present, the
/// `y_box` rows.
pub fn membership_in_set(
    set: &ConicSet,
    x: &[u8],
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
    let k = set
        .domain
        .index_of(x)
        .ok_or_else(|| Error::PointNotInDomain(format!("{x:?}")))?;
    let xv = set.domain.point_vec(k);
    let margin = (set.f_value(k) - set.cone_residual(&xv, y)).min(set.y_box_slack(y));
    Ok(MembershipVerdict::from_margin(margin, tols.boundary_band()))
}

/// Classify `(x, y)` against the envelope set `W`: the cone row with `f̂`
/// in place of `f`, plus any `y_box` rows. `x` may be fractional but must
/// lie in the convex hull of the domain.
pub fn membership_envelope(
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
    let cert = concave_envelope(&set.domain, &set.f_values(), x)?;
    let margin = (cert.value - set.cone_residual(x, y)).min(set.y_box_slack(y));
    Ok(MembershipVerdict::from_margin(margin, tols.boundary_band()))
}

/// One sampled point of an equivalence run.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub envelope: MembershipVerdict,
    pub perspective: MembershipVerdict,
    /// Within the boundary band of either oracle — not counted either way.
    pub skipped: bool,
    pub agreed: bool,
}

/// Aggregated outcome of [`verify_hull_equivalence`].
#[derive(Debug, Clone)]
pub struct HullReport {
    pub trials: usize,
    pub agreements: usize,
    pub skipped: usize,
    /// Per-point solver failures `(point id, message)`; not fatal.
    pub errors: Vec<(usize, String)>,
    pub records: Vec<PointRecord>,
    /// Largest `|envelope margin − perspective margin|` among agreed points
    /// where both margins are near the boundary (within 10 bands) — a
    /// diagnostic for how closely the two descriptions trace the same
    /// surface.
    pub max_margin_gap: f64,
}

impl HullReport {
    pub fn disagreements(&self) -> impl Iterator<Item = &PointRecord> {
        self.records.iter().filter(|r| !r.skipped && !r.agreed)
    }

    pub fn disagreement_count(&self) -> usize {
        self.disagreements().count()
    }

    /// No disagreements and no per-point errors.
    pub fn is_clean(&self) -> bool {
        self.disagreement_count() == 0 && self.errors.is_empty()
    }

    /// CSV log of every classified point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_id");
        if let Some(rec) = self.records.first() {
            for i in 0..rec.x.len() {
                out.push_str(&format!(",x_{i}"));
            }
            for j in 0..rec.y.len() {
                out.push_str(&format!(",y_{j}"));
            }
        }
        out.push_str(",W_status,hull_status,W_margin,hull_margin\n");
        for rec in &self.records {
            out.push_str(&rec.id.to_string());
            for v in rec.x.iter() {
                out.push_str(&format!(",{v}"));
            }
            for v in rec.y.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                status_str(rec.envelope.status),
                status_str(rec.perspective.status),
                rec.envelope.margin,
                rec.perspective.margin
            ));
        }
        out
    }
}

fn status_str(s: MembershipStatus) -> &'static str {
    match s {
        MembershipStatus::Inside => "INSIDE",
        MembershipStatus::Outside => "OUTSIDE",
        MembershipStatus::Boundary => "BOUNDARY",
    }
}

/// Uniform point of `conv(domain)`: Dirichlet(1,…,1) weights over the
/// domain points.
fn sample_hull_point(domain: &BinaryDomain, rng: &mut impl Rng) -> DVector<f64> {
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
    x
}

/// Half-width of the `y` sampling box: large enough that every boundary
/// point of the envelope set has `‖y‖∞` strictly inside.
fn y_sample_radius(set: &ConicSet) -> f64 {
    let fmax = set
        .f_values()
        .into_iter()
        .fold(0.0f64, f64::max);
    let (bhat, _) = column_compress(&set.b);
    let sigma = sigma_min(&bhat);
    if sigma < 1e-12 {
        return 1.0; // B ≈ 0: y is unconstrained and irrelevant
    }
    let reach = (fmax + set.d.norm() + operator_norm(&set.a) * (set.n as f64).sqrt()) / sigma;
    reach.min(1e6)
}

/// Sample the envelope set's bounding box and compare the two hull oracles
/// point by point. Points inside either oracle's boundary band are skipped
/// (classifying them is ill-posed); solver failures are recorded per point.
/// A clean report on a normalized set is the hull-equivalence statement made
/// executable.
pub fn verify_hull_equivalence(
    set: &ConicSet,
    trials: usize,
    rng: &mut impl Rng,
    tols: &Tolerances,
) -> Result<HullReport> {
    if set.y_box.is_some() {
        return Err(Error::invalid(
            "equivalence driver expects a set without continuous bounds; \
             boxed sets are counterexample fixtures, not verification targets",
        ));
    }
    let radius = y_sample_radius(set);
    let mut report = HullReport {
        trials,
        agreements: 0,
        skipped: 0,
        errors: Vec::new(),
        records: Vec::with_capacity(trials),
        max_margin_gap: 0.0,
    };
    let band = tols.boundary_band();
    for id in 0..trials {
        let x = sample_hull_point(&set.domain, rng);
        let y = DVector::from_fn(set.m, |_, _| rng.gen_range(-radius..radius));
        let env = match membership_envelope(set, &x, &y, tols) {
            Ok(v) => v,
            Err(e) => {
                report.errors.push((id, format!("envelope oracle: {e}")));
                continue;
            }
        };
        let per = match membership_perspective(set, &x, &y, tols) {
            Ok(v) => v,
            Err(e) => {
                report.errors.push((id, format!("perspective oracle: {e}")));
                continue;
            }
        };
        let skipped =
            env.status == MembershipStatus::Boundary || per.status == MembershipStatus::Boundary;
        let agreed = !skipped && env.status == per.status;
        if skipped {
            report.skipped += 1;
        } else if agreed {
            report.agreements += 1;
            if env.margin.abs() <= 10.0 * band && per.margin.abs() <= 10.0 * band {
                report.max_margin_gap = report
                    .max_margin_gap
                    .max((env.margin - per.margin).abs());
            }
        }
        report.records.push(PointRecord {
            id,
            x,
            y,
            envelope: env,
            perspective: per,
            skipped,
            agreed,
        });
    }
    Ok(report)
}

/// The two didactic sets.
///
/// * `1` — one binary, one continuous, `‖(x, y)‖₂ ≤ √2`: the binary column
///   lies outside col(B), so the envelope set of the *raw* data overshoots
///   the hull; after [`normalize_column_space`] the two coincide.
/// * `2` — one binary, two continuous, `‖(3x, 3x) + y + (1,−1)‖₂ ≤ √2`
///   with `y ≥ 0`: the box empties the `x = 1` slice, so the hull collapses
///   onto `x = 0` while the envelope set keeps a fractional-`x` region.
pub fn example_fixture(id: usize) -> Result<ConicSet> {
    match id {
        1 => ConicSet::new(
            BinaryDomain::full_cube(1)?,
            dmatrix![1.0; 0.0],
            dmatrix![0.0; 1.0],
            dvector![0.0, 0.0],
            RhsFunction::Table(vec![2f64.sqrt(), 2f64.sqrt()]),
            Norm::L2,
            None,
        ),
        2 => ConicSet::new(
            BinaryDomain::full_cube(1)?,
            dmatrix![3.0; 3.0],
            DMatrix::identity(2, 2),
            dvector![1.0, -1.0],
            RhsFunction::Table(vec![2f64.sqrt(), 2f64.sqrt()]),
            Norm::L2,
            Some(vec![(0.0, None), (0.0, None)]),
        ),
        other => Err(Error::invalid(format!(
            "example id must be 1 or 2, got {other}"
        ))),
    }
}

/// Random set suitable for the equivalence driver: `n ≤ 4`, `m ≤ 3`,
/// `p ≤ 5`, with the dimensions drawn uniformly. See
/// [`random_normalized_set_with_dims`] for the construction.
pub fn random_normalized_set(norm: Norm, rng: &mut impl Rng) -> Result<ConicSet> {
    let n = rng.gen_range(1..=4usize);
    let m = rng.gen_range(1..=3usize);
    let p = rng.gen_range(1..=5usize);
    random_normalized_set_with_dims(norm, n, m, p, rng)
}

/// Random set with the given dimensions, right-hand sides with enough slack
/// that every slice has an interior point.
///
/// Euclidean sets are drawn unconstrained and passed through
/// [`normalize_column_space`]; polyhedral-norm sets are built with
/// `A = B·M`, `d = B·v` so the column-space condition holds by construction
/// (the normalization identity is Euclidean-only). One in five draws gets a
/// rank-deficient `B`, one in five a proper subset of the cube as domain.
pub fn random_normalized_set_with_dims(
    norm: Norm,
    n: usize,
    m: usize,
    p: usize,
    rng: &mut impl Rng,
) -> Result<ConicSet> {
    use rand_distr::StandardNormal;
    if m == 0 || p == 0 {
        return Err(Error::invalid(format!(
            "set dimensions must be positive, got m = {m}, p = {p}"
        )));
    }
    let mut b = DMatrix::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    if m >= 2 && rng.gen_bool(0.2) {
        let dup = b.column(0) * 0.5;
        b.set_column(m - 1, &dup);
    }
    let (a, d) = if norm == Norm::L2 {
        (
            DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal)),
            DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)),
        )
    } else {
        let mmat = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&b * mmat, &b * v)
    };
    let mut domain = BinaryDomain::full_cube(n)?;
    if n >= 2 && rng.gen_bool(0.2) {
        let keep: Vec<usize> = (0..domain.len())
            .filter(|_| rng.gen_bool(0.7))
            .collect();
        if keep.len() >= 2 {
            domain = domain.restrict(&keep)?;
        }
    }
    let values: Vec<f64> = (0..domain.len())
        .map(|k| {
            let img = &a * domain.point_vec(k) + &d;
            norm.eval(img.as_slice()) + rng.gen_range(0.2..1.2)
        })
        .collect();
    let set = ConicSet::new(domain, a, b, d, RhsFunction::Table(values), norm, None)?;
    if norm == Norm::L2 {
        let (normalized, _) = normalize_column_space(&set)?;
        Ok(normalized)
    } else {
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use perspective::{perspective_lp, perspective_socp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn direct_oracle_on_fixture_one() {
        let set = example_fixture(1).unwrap();
        // (1, 1): ‖(1,1)‖ = √2 exactly → boundary
        let v = membership_in_set(&set, &[1], &dvector![1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Boundary);
        assert!(v.margin.abs() < 1e-12);
        // (0, 0): margin √2
        let v = membership_in_set(&set, &[0], &dvector![0.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
        assert!((v.margin - 2f64.sqrt()).abs() < 1e-12);
        // (1, 1.1): outside
        let v = membership_in_set(&set, &[1], &dvector![1.1], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
    }

    #[test]
    fn direct_oracle_rejects_missing_point() {
        let domain = BinaryDomain::new(vec![vec![0, 0], vec![1, 1]]).unwrap();
        let set = ConicSet::new(
            domain,
            DMatrix::zeros(1, 2),
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            RhsFunction::Table(vec![1.0, 1.0]),
            Norm::L2,
            None,
        )
        .unwrap();
        match membership_in_set(&set, &[1, 0], &dvector![0.0], &tols()) {
            Err(Error::PointNotInDomain(_)) => {}
            other => panic!("expected PointNotInDomain, got {other:?}"),
        }
    }

    #[test]
    fn direct_oracle_respects_y_box() {
        let set = example_fixture(2).unwrap();
        // cone satisfied, box tight at y_1 = 0 → boundary via the box slack
        let v = membership_in_set(&set, &[0], &dvector![0.0, 1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Boundary);
        // box interior, cone violated → outside
        let v = membership_in_set(&set, &[0], &dvector![0.5, 1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
        // both satisfied strictly
        let v = membership_in_set(&set, &[0], &dvector![0.1, 1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
    }

    #[test]
    fn envelope_oracle_traces_the_hull_line() {
        let (set, _) = normalize_column_space(&example_fixture(1).unwrap()).unwrap();
        // f̂(x) = (1−√2)x + √2; at x = 0.5 the boundary sits at ±1.2071…
        let hat = (1.0 - 2f64.sqrt()) * 0.5 + 2f64.sqrt();
        let v = membership_envelope(&set, &dvector![0.5], &dvector![1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
        assert!((v.margin - (hat - 1.0)).abs() < 1e-9);
        let v = membership_envelope(&set, &dvector![0.5], &dvector![hat], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Boundary);
        let v = membership_envelope(&set, &dvector![0.5], &dvector![1.3], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
        match membership_envelope(&set, &dvector![1.5], &dvector![0.0], &tols()) {
            Err(Error::QueryOutsideHull(_)) => {}
            other => panic!("expected QueryOutsideHull, got {other:?}"),
        }
    }

    #[test]
    fn perspective_oracle_on_raw_fixture_one() {
        // the hull of the RAW set is |y| ≤ (1−√2)x + √2 even though the
        // raw envelope set is the full disk
        let set = example_fixture(1).unwrap();
        let v =
            membership_perspective(&set, &dvector![0.5], &dvector![1.3], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
        assert!(v.margin < -1e-3, "margin {}", v.margin);
        let v =
            membership_perspective(&set, &dvector![0.5], &dvector![1.0], &tols()).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
        assert!(v.margin > 1e-3, "margin {}", v.margin);
        // x outside [0,1]
        match membership_perspective(&set, &dvector![1.5], &dvector![0.0], &tols()) {
            Err(Error::QueryOutsideHull(_)) => {}
            other => panic!("expected QueryOutsideHull, got {other:?}"),
        }
    }

    #[test]
    fn points_of_z_are_inside_the_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..6 {
            let set = random_normalized_set(Norm::L2, &mut rng).unwrap();
            for k in 0..set.domain.len() {
                // center the slice: B ŷ ≈ −(Ax^k + d)
                let rhs = -(&set.a * set.domain.point_vec(k) + &set.d);
                let yc = crate::linalg::least_squares(&set.b, &rhs).unwrap();
                let z = membership_in_set(&set, set.domain.point(k), &yc, &tols()).unwrap();
                assert!(
                    z.margin > 0.0,
                    "slice center should be interior (trial {trial}, k {k})"
                );
                let p = membership_perspective(
                    &set,
                    &set.domain.point_vec(k),
                    &yc,
                    &tols(),
                )
                .unwrap();
                assert!(
                    p.margin >= z.margin - 1e-5,
                    "hull margin {} below set margin {}",
                    p.margin,
                    z.margin
                );
                let w =
                    membership_envelope(&set, &set.domain.point_vec(k), &yc, &tols()).unwrap();
                assert!(w.admits(), "envelope oracle must admit points of Z");
            }
        }
    }

    #[test]
    fn envelope_margin_monotone_toward_slice_center() {
        let (set, _) = normalize_column_space(&example_fixture(1).unwrap()).unwrap();
        let x = dvector![0.3];
        // feasible center is y = 0; walk outward and watch the margin fall
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let y = dvector![step as f64 * 0.12];
            let v = membership_envelope(&set, &x, &y, &tols()).unwrap();
            assert!(v.margin <= last + 1e-12);
            last = v.margin;
        }
    }

    #[test]
    fn lp_and_barrier_paths_agree_on_polyhedral_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for norm in [Norm::L1, Norm::Linf] {
            let set = random_normalized_set(norm, &mut rng).unwrap();
            for _ in 0..5 {
                let x = sample_hull_point(&set.domain, &mut rng);
                let y = DVector::from_fn(set.m, |_, _| rng.gen_range(-2.0..2.0));
                let via_lp = perspective_lp(&set, &x, &y, &tols()).unwrap();
                let via_ipm = perspective_socp(&set, &x, &y, &tols()).unwrap();
                assert!(
                    (via_lp.margin - via_ipm.margin).abs() <= 1e-6,
                    "{norm:?}: LP margin {} vs barrier margin {}",
                    via_lp.margin,
                    via_ipm.margin
                );
            }
        }
    }

    #[test]
    fn driver_is_clean_on_normalized_fixture() {
        let (set, _) = normalize_column_space(&example_fixture(1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let report = verify_hull_equivalence(&set, 100, &mut rng, &tols()).unwrap();
        assert!(report.is_clean(), "disagreements: {:?}", report.disagreements().collect::<Vec<_>>());
        assert!(report.agreements + report.skipped + report.errors.len() == 100);
        assert!(report.agreements >= 90);
    }

    #[test]
    fn driver_finds_the_overshoot_of_the_raw_fixture() {
        // Assumption violated: W of the raw data is the full disk, the hull
        // is the bowtie — sampling must surface witnesses
        let set = example_fixture(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let report = verify_hull_equivalence(&set, 200, &mut rng, &tols()).unwrap();
        assert!(report.disagreement_count() > 0, "expected witnesses");
        for rec in report.disagreements() {
            // every witness is envelope-inside, hull-outside — never the
            // other way around (conv(Z) ⊆ W always)
            assert_eq!(rec.envelope.status, MembershipStatus::Inside);
            assert_eq!(rec.perspective.status, MembershipStatus::Outside);
        }
        // the canonical witness
        let w = membership_envelope(&set, &dvector![0.5], &dvector![1.3], &tols()).unwrap();
        assert_eq!(w.status, MembershipStatus::Inside);
        let p = membership_perspective(&set, &dvector![0.5], &dvector![1.3], &tols()).unwrap();
        assert_eq!(p.status, MembershipStatus::Outside);
    }

    #[test]
    fn driver_rejects_boxed_sets() {
        let set = example_fixture(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        assert!(matches!(
            verify_hull_equivalence(&set, 10, &mut rng, &tols()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn boxed_fixture_shows_the_hull_shrinking() {
        // The x = 1 slice of fixture 2 is empty (its ball misses the
        // nonnegative orthant), so the hull lives on x = 0 while the
        // envelope set keeps fractional x. Sweep a small grid to exhibit one
        // witness.
        let set = example_fixture(2).unwrap();
        let mut found = false;
        'sweep: for xi in [0.05, 0.1, 0.15] {
            let x = dvector![xi];
            for y0 in 0..=8 {
                for y1 in 0..=8 {
                    let y = dvector![y0 as f64 * 0.25, y1 as f64 * 0.25];
                    let w = membership_envelope(&set, &x, &y, &tols()).unwrap();
                    if w.status != MembershipStatus::Inside || w.margin < 1e-3 {
                        continue;
                    }
                    let p = membership_perspective(&set, &x, &y, &tols()).unwrap();
                    if p.status == MembershipStatus::Outside && p.margin < -1e-3 {
                        found = true;
                        break 'sweep;
                    }
                }
            }
        }
        assert!(found, "no witness in the sweep grid");

        // dropping the box restores equivalence (B = I absorbs everything,
        // so normalization is a no-op retype)
        let mut unboxed = example_fixture(2).unwrap();
        unboxed.y_box = None;
        let (norm, report) = normalize_column_space(&unboxed).unwrap();
        assert!(report.already_conformant);
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let rep = verify_hull_equivalence(&norm, 100, &mut rng, &tols()).unwrap();
        assert!(rep.is_clean());
    }

    #[test]
    fn driver_is_deterministic() {
        let (set, _) = normalize_column_space(&example_fixture(1).unwrap()).unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            verify_hull_equivalence(&set, 40, &mut rng, &tols()).unwrap()
        };
        let a = run(9);
        let b = run(9);
        assert_eq!(a.agreements, b.agreements);
        assert_eq!(a.skipped, b.skipped);
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn csv_report_has_pinned_columns() {
        let (set, _) = normalize_column_space(&example_fixture(1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let report = verify_hull_equivalence(&set, 12, &mut rng, &tols()).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "point_id,x_0,y_0,W_status,hull_status,W_margin,hull_margin"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), report.records.len());
        let first: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(first.len(), 7);
        assert!(first[3] == "INSIDE" || first[3] == "OUTSIDE" || first[3] == "BOUNDARY");
        first[5].parse::<f64>().unwrap();
    }

    #[test]
    fn fixtures_validate_and_reject_bad_ids() {
        assert!(example_fixture(1).unwrap().validate().is_empty());
        let two = example_fixture(2).unwrap();
        assert!(two.validate().is_empty());
        assert!(two.y_box.is_some());
        assert!(example_fixture(0).is_err());
        assert!(example_fixture(3).is_err());
    }

    #[test]
    fn generator_produces_conformant_sets() {
        use crate::linalg::project_onto_colspace;
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for norm in [Norm::L2, Norm::L1, Norm::Linf] {
            for _ in 0..10 {
                let set = random_normalized_set(norm, &mut rng).unwrap();
                assert!(set.validate().is_empty());
                assert!(set.n <= 4 && set.m <= 3 && set.p <= 5);
                let (_, a_perp) = project_onto_colspace(&set.b, &set.a);
                assert!(a_perp.norm() <= 1e-8 * (1.0 + set.a.norm()), "{norm:?}");
                let d_mat = DMatrix::from_column_slice(set.p, 1, set.d.as_slice());
                let (_, d_perp) = project_onto_colspace(&set.b, &d_mat);
                assert!(d_perp.norm() <= 1e-8 * (1.0 + set.d.norm()));
            }
        }
    }
}
