//! Command-line front end: instance generation, formulation building,
//! solving, set normalization, envelope queries, and the two verification
//! drivers (hull equivalence and the relaxation-gap bound).
//!
//! Exit codes: `0` success, `1` verification failure (oracle disagreement or
//! a violated bound), `2` input error, `3` numerical limit. Every subcommand
//! is deterministic given its flags; file writes go through a temp-file +
//! rename so a crash never leaves a half-written artifact.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use socvexify::envelope::concave_envelope;
use socvexify::hull::{
    example_fixture, membership_envelope, membership_perspective, random_normalized_set_with_dims,
    verify_hull_equivalence, HullReport,
};
use socvexify::knapsack::{
    build_ccp, build_soc, export_model, generate_kp, generate_mkp, ExportFormat, KnapsackInstance,
};
use socvexify::reformulate::normalize_column_space;
use socvexify::relaxation::{sample_grid, verify_gap_bound};
use socvexify::solvers::{solve_bruteforce, SolveStatus};
use socvexify::{
    BinaryDomain, ConicSet, Error, MembershipStatus, ModelIr, Norm, Tolerances,
};

/// Sample points classified per generated set in `verify-hull`.
const POINTS_PER_SET: usize = 200;

#[derive(Parser)]
#[command(
    name = "socvexify",
    version,
    about = "Convex-hull toolkit for mixed-integer second-order conic sets",
    propagate_version = true
)]
struct Cli {
    /// Feasibility tolerance; overrides the SOCVEXIFY_TOL environment variable
    #[arg(long, global = true, value_name = "TOL")]
    tol: Option<f64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a single-resource chance-constrained knapsack instance
    GenKp {
        /// Correlation profile between weights and profits (1-4)
        #[arg(long = "type", value_name = "T")]
        ktype: u8,
        /// Total number of items pre-split (even; the last half turn continuous)
        #[arg(long)]
        n: usize,
        /// Capacity index i in 1..=5: capacity scales with i/6
        #[arg(long)]
        index: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output instance file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a multi-resource instance over a synthetic base
    GenMkp {
        /// Number of discrete items
        #[arg(long)]
        n: usize,
        /// Number of knapsack resources
        #[arg(long)]
        resources: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output instance file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a solver-ready model from an instance file
    Build {
        #[arg(long)]
        formulation: Formulation,
        /// Input instance file (JSON)
        #[arg(long = "in")]
        input: PathBuf,
        /// Output model file (JSON)
        #[arg(long)]
        out: PathBuf,
        /// Also write an LP-format rendering to this file
        #[arg(long = "lp-text")]
        lp_text: Option<PathBuf>,
    },
    /// Solve an instance by exhaustive enumeration of the binary variables
    Solve {
        /// Input instance file (JSON)
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        formulation: Formulation,
        #[arg(long, default_value = "brute")]
        method: Method,
        /// Output solution file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite a conic set so its affine image lies in the column space of B
    Normalize {
        /// Input set file (JSON)
        #[arg(long)]
        set: PathBuf,
        /// Output set file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the concave envelope of the set's rhs at a query point
    Envelope {
        /// Input set file (JSON)
        #[arg(long)]
        set: PathBuf,
        /// Comma-separated coordinates in the convex hull of the domain
        #[arg(long, value_name = "v1,v2,…")]
        query: String,
    },
    /// Cross-check the envelope-set and perspective-hull oracles on random sets
    VerifyHull {
        /// Number of random sets to generate and test
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Binary dimension of each set
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Continuous dimension of each set
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Rows of the affine image inside the norm
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value = "l2")]
        norm: NormArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write a per-point CSV log to this file
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep the gap between the sqrt-of-envelope and envelope-of-f bounds
    GapCheck {
        /// Input set file (JSON)
        #[arg(long)]
        set: PathBuf,
        /// Number of random hull points added to the domain-point grid
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Write a per-point CSV log to this file
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a didactic fixture and its oracle verdicts
    Example {
        /// Fixture id: 1 (normalization repairs the envelope set) or 2
        /// (a continuous box breaks the equivalence)
        #[arg(long)]
        id: usize,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Formulation {
    /// Quadratic + linear row pair per resource
    Ccp,
    /// Cone, rotated-cone, and hypograph rows per resource
    Soc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Enumerate binary assignments, solve each continuous restriction
    Brute,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for Norm {
    fn from(v: NormArg) -> Norm {
        match v {
            NormArg::L1 => Norm::L1,
            NormArg::L2 => Norm::L2,
            NormArg::Linf => Norm::Linf,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tols = resolve_tols(cli.tol);
    match run(cli.cmd, &tols) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

/// Explicit flag beats the environment variable beats the defaults.
fn resolve_tols(flag: Option<f64>) -> Tolerances {
    match flag {
        Some(t) if t > 0.0 && t.is_finite() => Tolerances::with_feasibility(t),
        Some(_) => Tolerances::default(),
        None => Tolerances::from_env(),
    }
}

/// Exit code for an error surfaced by the library: numerical exhaustion is
/// distinguished from everything else, which is some form of bad input.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::NumericalLimit(_) => 3,
        _ => 2,
    }
}

fn run(cmd: Cmd, tols: &Tolerances) -> socvexify::Result<u8> {
    match cmd {
        Cmd::GenKp { ktype, n, index, seed, out } => {
            let inst = generate_kp(n, ktype, index, seed)?;
            write_atomic(&out, &inst.to_json()?)?;
            println!(
                "wrote type-{} instance: n = {}, m = {}, capacity = {:.6}",
                inst.kind, inst.n, inst.m, inst.resources[0].capacity
            );
            Ok(0)
        }
        Cmd::GenMkp { n, resources, seed, out } => {
            let inst = generate_mkp(n, resources, seed)?;
            write_atomic(&out, &inst.to_json()?)?;
            println!(
                "wrote synthetic-base instance: n = {}, m = {}, resources = {}",
                inst.n,
                inst.m,
                inst.resources.len()
            );
            Ok(0)
        }
        Cmd::Build { formulation, input, out, lp_text } => {
            let inst = read_instance(&input)?;
            let model = build_model(&inst, formulation)?;
            write_atomic(&out, &export_model(&model, ExportFormat::Json)?)?;
            if let Some(path) = lp_text {
                write_atomic(&path, &export_model(&model, ExportFormat::LpText)?)?;
            }
            println!(
                "built {} model: {} variables, {} linear / {} soc / {} quad / {} rotated rows",
                match formulation {
                    Formulation::Ccp => "ccp",
                    Formulation::Soc => "soc",
                },
                model.num_vars(),
                model.linear.len(),
                model.soc.len(),
                model.quad.len(),
                model.rotated.len()
            );
            Ok(0)
        }
        Cmd::Solve { input, formulation, method: Method::Brute, out } => {
            let inst = read_instance(&input)?;
            let model = build_model(&inst, formulation)?;
            let domain = BinaryDomain::full_cube(inst.n)?;
            let r = solve_bruteforce(&model, &domain)?;
            let doc = serde_json::json!({
                "status": status_json(r.status),
                "value": r.value,
                "point": r.point,
                "primal_residual": r.primal_residual,
                "iterations": r.iterations,
            });
            write_atomic(&out, &serde_json::to_string_pretty(&doc)?)?;
            println!("status = {}, value = {:.9}", status_json(r.status), r.value);
            Ok(if r.status == SolveStatus::NumericalLimit { 3 } else { 0 })
        }
        Cmd::Normalize { set, out } => {
            let set = read_set(&set)?;
            let (normalized, report) = normalize_column_space(&set)?;
            write_atomic(&out, &normalized.to_json()?)?;
            println!("offspace norms: A {:.3e}, d {:.3e}", report.a_offspace_norm, report.d_offspace_norm);
            if report.dropped.is_empty() {
                println!("dropped domain points: none");
            } else {
                println!("dropped domain points: {:?}", report.dropped);
            }
            println!(
                "already conformant: {}",
                if report.already_conformant { "yes" } else { "no" }
            );
            Ok(0)
        }
        Cmd::Envelope { set, query } => {
            let set = read_set(&set)?;
            let q = parse_query(&query, set.n)?;
            let cert = concave_envelope(&set.domain, &set.f_values(), &q)?;
            println!("f_hat({}) = {:.12}", fmt_vec(&q), cert.value);
            println!("support ({} points):", cert.support.len());
            for (&k, &w) in cert.support.iter().zip(cert.weights.iter()) {
                println!(
                    "  domain point {k} = {:?}  weight {w:.12}  f = {:.12}",
                    set.domain.point(k),
                    set.f_value(k)
                );
            }
            Ok(0)
        }
        Cmd::VerifyHull { trials, n, m, p, norm, seed, report } => {
            run_verify_hull(trials, n, m, p, norm.into(), seed, report.as_deref(), tols)
        }
        Cmd::GapCheck { set, grid, report } => {
            let set = read_set(&set)?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let points = sample_grid(&set.domain, grid, &mut rng);
            let rep = verify_gap_bound(&set.domain, &set.f_values(), &points, tols)?;
            if let Some(path) = report {
                write_atomic(&path, &rep.to_csv())?;
            }
            println!("f range: L = {:.9}, U = {:.9}", rep.l, rep.u);
            println!("a-priori bound: {:.9}", rep.bound);
            println!("max gap: {:.9} at x = {}", rep.max_gap, fmt_vec(&rep.argmax));
            println!("holds: {}", rep.holds);
            Ok(if rep.holds { 0 } else { 1 })
        }
        Cmd::Example { id } => run_example(id, tols),
    }
}

fn build_model(inst: &KnapsackInstance, formulation: Formulation) -> socvexify::Result<ModelIr> {
    match formulation {
        Formulation::Ccp => build_ccp(inst),
        Formulation::Soc => build_soc(inst),
    }
}

fn read_instance(path: &Path) -> socvexify::Result<KnapsackInstance> {
    KnapsackInstance::from_json(&fs::read_to_string(path)?)
}

fn read_set(path: &Path) -> socvexify::Result<ConicSet> {
    ConicSet::from_json(&fs::read_to_string(path)?)
}

fn parse_query(text: &str, n: usize) -> socvexify::Result<DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::invalid(format!("query coordinate: {e}")))?;
    if vals.len() != n {
        return Err(Error::invalid(format!(
            "query has {} coordinates, the set's binary dimension is {n}",
            vals.len()
        )));
    }
    Ok(DVector::from_column_slice(&vals))
}

fn run_verify_hull(
    trials: usize,
    n: usize,
    m: usize,
    p: usize,
    norm: Norm,
    seed: u64,
    report_path: Option<&Path>,
    tols: &Tolerances,
) -> socvexify::Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::new();
    let mut agreements = 0usize;
    let mut skipped = 0usize;
    let mut disagreements = 0usize;
    let mut errors = 0usize;
    let mut max_margin_gap = 0.0f64;
    for t in 0..trials {
        let set = random_normalized_set_with_dims(norm, n, m, p, &mut rng)?;
        let rep = verify_hull_equivalence(&set, POINTS_PER_SET, &mut rng, tols)?;
        agreements += rep.agreements;
        skipped += rep.skipped;
        disagreements += rep.disagreement_count();
        errors += rep.errors.len();
        max_margin_gap = max_margin_gap.max(rep.max_margin_gap);
        for (id, msg) in &rep.errors {
            eprintln!("set {t}, point {id}: {msg}");
        }
        for rec in rep.disagreements() {
            eprintln!(
                "set {t}, point {}: envelope {} vs hull {}",
                rec.id,
                status_str(rec.envelope.status),
                status_str(rec.perspective.status)
            );
        }
        if report_path.is_some() {
            append_report_rows(&mut csv, t, &rep);
        }
    }
    if let Some(path) = report_path {
        write_atomic(path, &csv)?;
    }
    println!(
        "{} sets x {} points ({} norm): {} agreements, {} skipped (boundary band), {} disagreements, {} solver errors",
        trials, POINTS_PER_SET, norm, agreements, skipped, disagreements, errors
    );
    println!("max margin gap near the surface: {max_margin_gap:.3e}");
    Ok(if disagreements > 0 {
        1
    } else if errors > 0 {
        3
    } else {
        0
    })
}

fn append_report_rows(csv: &mut String, set_id: usize, rep: &HullReport) {
    if csv.is_empty() {
        csv.push_str("set_id,point_id");
        if let Some(rec) = rep.records.first() {
            for i in 0..rec.x.len() {
                csv.push_str(&format!(",x_{i}"));
            }
            for j in 0..rec.y.len() {
                csv.push_str(&format!(",y_{j}"));
            }
        }
        csv.push_str(",W_status,hull_status,W_margin,hull_margin\n");
    }
    for rec in &rep.records {
        csv.push_str(&format!("{set_id},{}", rec.id));
        for v in rec.x.iter() {
            csv.push_str(&format!(",{v}"));
        }
        for v in rec.y.iter() {
            csv.push_str(&format!(",{v}"));
        }
        csv.push_str(&format!(
            ",{},{},{},{}\n",
            status_str(rec.envelope.status),
            status_str(rec.perspective.status),
            rec.envelope.margin,
            rec.perspective.margin
        ));
    }
}

fn run_example(id: usize, tols: &Tolerances) -> socvexify::Result<u8> {
    let set = example_fixture(id)?;
    match id {
        1 => {
            println!("fixture 1: ||(x, y)||_2 <= sqrt(2), x in {{0,1}}, y free");
            println!("the binary column of A lies outside col(B), so the raw envelope set overshoots the hull");
            let x = DVector::from_column_slice(&[0.5]);
            let y = DVector::from_column_slice(&[1.3]);
            let env = membership_envelope(&set, &x, &y, tols)?;
            let hull = membership_perspective(&set, &x, &y, tols)?;
            println!("probe point (x, y) = (0.5, 1.3):");
            println!(
                "  envelope set (raw data): {} (margin {:+.6})",
                status_str(env.status),
                env.margin
            );
            println!(
                "  convex hull:             {} (margin {:+.6})",
                status_str(hull.status),
                hull.margin
            );
            let (normalized, _) = normalize_column_space(&set)?;
            let fv = normalized.f_values();
            let (f0, f1) = (fv[0], fv[1]);
            println!("normalized rhs: f'(0) = {f0:.12}, f'(1) = {f1:.12}");
            println!(
                "envelope coefficients: f_hat'(x) = {:.12}*x + {:.12}  (slope 1 - sqrt(2), intercept sqrt(2))",
                f1 - f0,
                f0
            );
            let env2 = membership_envelope(&normalized, &x, &y, tols)?;
            let hull2 = membership_perspective(&normalized, &x, &y, tols)?;
            println!("after normalization at (0.5, 1.3):");
            println!(
                "  envelope set: {} (margin {:+.6})",
                status_str(env2.status),
                env2.margin
            );
            println!(
                "  convex hull:  {} (margin {:+.6})",
                status_str(hull2.status),
                hull2.margin
            );
            Ok(0)
        }
        2 => {
            println!("fixture 2: ||(3x, 3x) + y + (1, -1)||_2 <= sqrt(2), x in {{0,1}}, y >= 0");
            println!("the y-box empties the x = 1 slice: conv(Z) collapses onto x = 0, the envelope set does not");
            let x = DVector::from_column_slice(&[0.1]);
            let y = DVector::from_column_slice(&[0.1, 0.7]);
            let env = membership_envelope(&set, &x, &y, tols)?;
            let hull = membership_perspective(&set, &x, &y, tols)?;
            println!("probe point (x, y) = (0.1, (0.1, 0.7)):");
            println!(
                "  envelope set: {} (margin {:+.6})",
                status_str(env.status),
                env.margin
            );
            println!(
                "  convex hull:  {} (margin {:+.6})",
                status_str(hull.status),
                hull.margin
            );
            println!("no normalization repairs this gap; the equivalence needs y free of bounds");
            Ok(0)
        }
        _ => unreachable!("example_fixture rejects other ids"),
    }
}

fn status_str(s: MembershipStatus) -> &'static str {
    match s {
        MembershipStatus::Inside => "INSIDE",
        MembershipStatus::Outside => "OUTSIDE",
        MembershipStatus::Boundary => "BOUNDARY",
    }
}

fn status_json(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::NumericalLimit => "numerical_limit",
    }
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let inner: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", inner.join(", "))
}

/// Write through a sibling temp file and rename, so readers never observe a
/// partially written artifact.
fn write_atomic(path: &Path, contents: &str) -> socvexify::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_flag_beats_env_beats_default() {
        // process-global env var: exercise all three paths in one test
        std::env::set_var(Tolerances::ENV_VAR, "1e-3");
        assert_eq!(resolve_tols(Some(1e-4)).feasibility, 1e-4);
        assert_eq!(resolve_tols(None).feasibility, 1e-3);
        std::env::remove_var(Tolerances::ENV_VAR);
        assert_eq!(resolve_tols(None), Tolerances::default());
        // non-positive flag values fall back to the defaults
        assert_eq!(resolve_tols(Some(-1.0)), Tolerances::default());
    }

    #[test]
    fn query_parsing() {
        let q = parse_query("0.5, 0.25,1", 3).unwrap();
        assert_eq!(q.as_slice(), &[0.5, 0.25, 1.0]);
        assert!(parse_query("0.5", 2).is_err());
        assert!(parse_query("a,b", 2).is_err());
    }

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
