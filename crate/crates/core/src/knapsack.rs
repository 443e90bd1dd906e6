//! Chance-constrained knapsack instances and their two conic formulations.
//!
//! A [`KnapsackInstance`] carries discrete and continuous items, a
//! mean/covariance weight model per resource, and a risk level. Two builders
//! turn an instance into a [`ModelIr`]:
//!
//! * [`build_ccp`] — the squared form: one (possibly indefinite) quadratic
//!   row plus one mean row per resource, directly over `(x, y)`;
//! * [`build_soc`] — the extended cone form: per resource an aggregate
//!   variable `η` with a Euclidean cone row, a budget variable `τ` with
//!   `η² ≤ τ`, and the radicand hypograph `τ ≤ q(x)`.
//!
//! Both describe the same `(x, y)` feasible set. The cone form exposes the
//! hypograph that concave-envelope tightening acts on, which is what
//! [`soc_envelope_relaxation_bound`] exploits when comparing continuous
//! relaxations against [`ccp_relaxation_bound`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::concave_envelope_with_majorant;
use crate::error::{Error, Result};
use crate::ir::{LinRow, ModelIr, ObjSense, QuadRow, RotatedRow, Sense, SocRow, VarKind};
use crate::linalg::{psd_sqrt, random_orthogonal};
use crate::model::{BinaryDomain, Norm, RhsFunction};
use crate::reformulate::{drcc_to_quad, quad_to_soc, DrccConstraint, MeanRow, QuadConstraint};
use crate::solvers::{solve_socp, ConeRow, QuadConstraintRow, SocpProblem, SolveStatus};

/// Risk level used by the generators.
pub const DEFAULT_ALPHA: f64 = 0.005;

/// One knapsack resource: mean weights and a covariance over all `n + m`
/// items (discrete first), and a capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub mu: Vec<f64>,
    /// Row-major `(n+m) × (n+m)` covariance.
    pub sigma: Vec<f64>,
    pub capacity: f64,
}

impl Resource {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Covariance as a matrix. Requires `sigma` to hold `dim()²` entries
    /// (checked by [`KnapsackInstance::validate`]).
    pub fn sigma_mat(&self) -> DMatrix<f64> {
        let k = self.dim();
        DMatrix::from_row_slice(k, k, &self.sigma)
    }
}

/// A stochastic knapsack with `n` discrete and `m` continuous items.
///
/// `kind` records the profit/weight correlation profile of the generator
/// (1 uncorrelated, 2 weakly, 3 strongly, 4 inverse-strongly correlated;
/// 0 for multi-resource instances built on a synthetic base). `scale` keeps
/// the divisors and multipliers applied during generation so the raw integer
/// draws stay recoverable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "type")]
    pub kind: u8,
    pub seed: u64,
    pub alpha: f64,
    pub profits_x: Vec<f64>,
    pub profits_y: Vec<f64>,
    pub resources: Vec<Resource>,
    #[serde(default)]
    pub scale: BTreeMap<String, f64>,
    /// True when the discrete base data is drawn synthetically rather than
    /// taken from a published benchmark set.
    #[serde(default)]
    pub synthetic_base: bool,
}

impl KnapsackInstance {
    /// Structural checks: profit lengths, resource shapes, symmetric PSD
    /// covariances (within `1e-8` of the diagonal scale), nonnegative
    /// capacities and profits, risk level in `(0, 1)`.
    pub fn validate(&self) -> Result<()> {
        if self.resources.is_empty() {
            return Err(Error::invalid("an instance needs at least one resource"));
        }
        if self.profits_x.len() != self.n || self.profits_y.len() != self.m {
            return Err(Error::invalid(format!(
                "profit vectors have lengths {}/{} for n={} m={}",
                self.profits_x.len(),
                self.profits_y.len(),
                self.n,
                self.m
            )));
        }
        if self.kind > 4 {
            return Err(Error::invalid(format!("unknown correlation profile {}", self.kind)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("risk level must be in (0,1), got {}", self.alpha)));
        }
        if self
            .profits_x
            .iter()
            .chain(self.profits_y.iter())
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return Err(Error::invalid("profits must be finite and nonnegative"));
        }
        let k = self.n + self.m;
        for (j, res) in self.resources.iter().enumerate() {
            if res.mu.len() != k {
                return Err(Error::invalid(format!(
                    "resource {j}: mean has {} entries for {k} items",
                    res.mu.len()
                )));
            }
            if res.sigma.len() != k * k {
                return Err(Error::invalid(format!(
                    "resource {j}: covariance has {} entries, expected {}",
                    res.sigma.len(),
                    k * k
                )));
            }
            if !(res.capacity >= 0.0 && res.capacity.is_finite()) {
                return Err(Error::invalid(format!(
                    "resource {j}: capacity {} must be finite and nonnegative",
                    res.capacity
                )));
            }
            let sig = res.sigma_mat();
            let scale = sig.diagonal().amax().max(1.0);
            for a in 0..k {
                for b in (a + 1)..k {
                    if (sig[(a, b)] - sig[(b, a)]).abs() > 1e-8 * scale {
                        return Err(Error::invalid(format!(
                            "resource {j}: covariance not symmetric at ({a},{b})"
                        )));
                    }
                }
            }
            let min_eig = nalgebra::SymmetricEigen::new(sig)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |acc, &v| acc.min(v));
            if min_eig < -1e-8 * scale {
                return Err(Error::invalid(format!(
                    "resource {j}: covariance has eigenvalue {min_eig:.3e}, not PSD"
                )));
            }
        }
        Ok(())
    }

    /// The chance constraint of resource `j` in block form.
    pub fn drcc(&self, j: usize) -> Result<DrccConstraint> {
        let res = self
            .resources
            .get(j)
            .ok_or_else(|| Error::invalid(format!("instance has no resource {j}")))?;
        let (n, m) = (self.n, self.m);
        let sig = res.sigma_mat();
        DrccConstraint::new(
            DVector::from_iterator(n, res.mu[..n].iter().copied()),
            DVector::from_iterator(m, res.mu[n..].iter().copied()),
            sig.view((0, 0), (n, n)).into_owned(),
            sig.view((0, n), (n, m)).into_owned(),
            sig.view((n, n), (m, m)).into_owned(),
            res.capacity,
            self.alpha,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: KnapsackInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Mix auxiliary tags into a user seed so each generator/parameter tuple
/// draws from an independent, reproducible stream.
fn stream_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        h = (h ^ t).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 29;
    }
    h
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.nrows() * a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// Weight covariance used by both generators: `Uᵀ diag(w)² U / 4` for a
/// random orthogonal `U`, i.e. item standard deviations `w/2` mixed through
/// a random rotation.
fn weight_covariance<R: Rng>(weights: &[f64], rng: &mut R) -> DMatrix<f64> {
    let k = weights.len();
    let u = random_orthogonal(k, rng);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(k, weights.iter().map(|&w| w * w)));
    let mut sigma = u.transpose() * d * &u / 4.0;
    symmetrize(&mut sigma);
    sigma
}

/// Generate a single-resource instance with `n_total` items (half discrete,
/// half continuous) under correlation profile `ktype`:
///
/// 1. weights and profits independent in `{1..10000}`;
/// 2. `p = max(w + κ, 1)` with noise `κ` in `{−1000..1000}`;
/// 3. `p = w + 1000`;
/// 4. profits in `{1..10000}`, `w = p + 1000`.
///
/// The capacity is `Σw · index/6` for `index` in `1..=5`. All values are then
/// divided by 1000, the last `n_total/2` items become continuous with their
/// profits divided by 5, means are the scaled weights, the covariance is
/// built from them, and the capacity is multiplied by 3/2.
pub fn generate_kp(n_total: usize, ktype: u8, index: u32, seed: u64) -> Result<KnapsackInstance> {
    if n_total < 2 || n_total % 2 != 0 {
        return Err(Error::invalid(format!(
            "item count must be even and at least 2, got {n_total}"
        )));
    }
    if !(1..=4).contains(&ktype) {
        return Err(Error::invalid(format!(
            "correlation profile must be in 1..=4, got {ktype}"
        )));
    }
    if !(1..=5).contains(&index) {
        return Err(Error::invalid(format!("instance index must be in 1..=5, got {index}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
        seed,
        &[1, n_total as u64, ktype as u64, index as u64],
    ));

    let mut w = Vec::with_capacity(n_total);
    let mut p = Vec::with_capacity(n_total);
    for _ in 0..n_total {
        match ktype {
            1 => {
                w.push(rng.gen_range(1..=10_000i64));
                p.push(rng.gen_range(1..=10_000i64));
            }
            2 => {
                let wj = rng.gen_range(1..=10_000i64);
                let kappa = rng.gen_range(-1_000..=1_000i64);
                w.push(wj);
                p.push((wj + kappa).max(1));
            }
            3 => {
                let wj = rng.gen_range(1..=10_000i64);
                w.push(wj);
                p.push(wj + 1_000);
            }
            _ => {
                let pj = rng.gen_range(1..=10_000i64);
                p.push(pj);
                w.push(pj + 1_000);
            }
        }
    }
    let total_weight: i64 = w.iter().sum();
    let mut capacity = total_weight as f64 * index as f64 / 6.0;

    let wf: Vec<f64> = w.iter().map(|&v| v as f64 / 1000.0).collect();
    let pf: Vec<f64> = p.iter().map(|&v| v as f64 / 1000.0).collect();
    capacity /= 1000.0;

    let n = n_total / 2;
    let profits_x = pf[..n].to_vec();
    let profits_y: Vec<f64> = pf[n..].iter().map(|v| v / 5.0).collect();

    let mu = wf.clone();
    let sigma = weight_covariance(&wf, &mut rng);
    capacity *= 1.5;

    let mut scale = BTreeMap::new();
    scale.insert("value_divisor".into(), 1000.0);
    scale.insert("continuous_profit_divisor".into(), 5.0);
    scale.insert("capacity_multiplier".into(), 1.5);

    let inst = KnapsackInstance {
        n,
        m: n_total - n,
        kind: ktype,
        seed,
        alpha: DEFAULT_ALPHA,
        profits_x,
        profits_y,
        resources: vec![Resource {
            mu,
            sigma: row_major(&sigma),
            capacity,
        }],
        scale,
        synthetic_base: false,
    };
    inst.validate()?;
    Ok(inst)
}

/// Generate a multi-resource instance on a synthetic base: `n` discrete
/// items with profits and per-resource weights uniform in `{1..10000}` and
/// capacities `Σw/2`, extended by `m = ⌈n/2⌉` continuous items whose
/// per-resource weights are integers from `[w_min/2, w_max]` of that
/// resource's base weights and whose profits are uniform in `[1, p_max/10]`.
/// Weights are then divided by 100 and capacities by 10.
pub fn generate_mkp(n: usize, num_resources: usize, seed: u64) -> Result<KnapsackInstance> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 discrete items, got {n}")));
    }
    if num_resources < 1 {
        return Err(Error::invalid("need at least one resource"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
        seed,
        &[2, n as u64, num_resources as u64],
    ));

    // resource-agnostic profits, then one weight vector per resource
    let profits_raw: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=10_000i64)).collect();
    let mut weights_raw: Vec<Vec<i64>> = Vec::with_capacity(num_resources);
    for _ in 0..num_resources {
        weights_raw.push((0..n).map(|_| rng.gen_range(1..=10_000i64)).collect());
    }
    let capacities_raw: Vec<f64> = weights_raw
        .iter()
        .map(|ws| ws.iter().sum::<i64>() as f64 / 2.0)
        .collect();

    let m = (n + 1) / 2;
    let p_max = *profits_raw.iter().max().expect("n >= 2");
    let profit_hi = (p_max as f64 / 10.0).max(1.0);
    let profits_y: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..=profit_hi)).collect();
    let mut cont_weights_raw: Vec<Vec<i64>> = Vec::with_capacity(num_resources);
    for ws in &weights_raw {
        let w_min = *ws.iter().min().expect("n >= 2");
        let w_max = *ws.iter().max().expect("n >= 2");
        let lo = (w_min + 1) / 2; // smallest integer ≥ w_min/2
        cont_weights_raw.push((0..m).map(|_| rng.gen_range(lo..=w_max)).collect());
    }

    let mut resources = Vec::with_capacity(num_resources);
    for j in 0..num_resources {
        let mu: Vec<f64> = weights_raw[j]
            .iter()
            .chain(cont_weights_raw[j].iter())
            .map(|&v| v as f64 / 100.0)
            .collect();
        let sigma = weight_covariance(&mu, &mut rng);
        resources.push(Resource {
            mu,
            sigma: row_major(&sigma),
            capacity: capacities_raw[j] / 10.0,
        });
    }

    let mut scale = BTreeMap::new();
    scale.insert("weight_divisor".into(), 100.0);
    scale.insert("capacity_divisor".into(), 10.0);

    let inst = KnapsackInstance {
        n,
        m,
        kind: 0,
        seed,
        alpha: DEFAULT_ALPHA,
        profits_x: profits_raw.iter().map(|&v| v as f64).collect(),
        profits_y,
        resources,
        scale,
        synthetic_base: true,
    };
    inst.validate()?;
    Ok(inst)
}

/// Keep only the first `m_new` continuous items, shrinking profits, means,
/// and covariances accordingly. Capacities are left unchanged.
pub fn truncate_continuous(inst: &KnapsackInstance, m_new: usize) -> Result<KnapsackInstance> {
    if m_new > inst.m {
        return Err(Error::invalid(format!(
            "cannot keep {m_new} continuous items, instance has {}",
            inst.m
        )));
    }
    let keep = inst.n + m_new;
    let mut out = inst.clone();
    out.m = m_new;
    out.profits_y.truncate(m_new);
    for res in &mut out.resources {
        let sig = res.sigma_mat();
        res.mu.truncate(keep);
        let mut s = Vec::with_capacity(keep * keep);
        for i in 0..keep {
            for j in 0..keep {
                s.push(sig[(i, j)]);
            }
        }
        res.sigma = s;
    }
    out.validate()?;
    Ok(out)
}

/// Embed a block quadratic constraint `xᵀQxx x + 2xᵀQxy y + yᵀQyy y + ax·x
/// + ay·y ≤ g(x)` as an IR quadratic row over `width` variables, with `x`
/// first and the rhs polynomial moved to the left.
fn embed_quad_row(name: String, qc: &QuadConstraint, width: usize) -> QuadRow {
    let n = qc.n();
    let m = qc.m();
    let mut q = vec![vec![0.0; width]; width];
    for i in 0..n {
        for j in 0..n {
            q[i][j] = qc.qxx[(i, j)] - qc.g.q[(i, j)];
        }
        for j in 0..m {
            q[i][n + j] = qc.qxy[(i, j)];
            q[n + j][i] = qc.qxy[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..m {
            q[n + i][n + j] = qc.qyy[(i, j)];
        }
    }
    let mut linear = vec![0.0; width];
    for i in 0..n {
        linear[i] = qc.ax[i] - qc.g.linear[i];
    }
    for j in 0..m {
        linear[n + j] = qc.ay[j];
    }
    QuadRow { name, q, linear, rhs: qc.g.constant }
}

fn mean_lin_row(name: String, mr: &MeanRow, width: usize) -> LinRow {
    let n = mr.coeffs_x.len();
    let mut coeffs = vec![0.0; width];
    for i in 0..n {
        coeffs[i] = mr.coeffs_x[i];
    }
    for j in 0..mr.coeffs_y.len() {
        coeffs[n + j] = mr.coeffs_y[j];
    }
    LinRow { name, coeffs, sense: Sense::Le, rhs: mr.rhs }
}

/// Squared formulation: binary `x`, `y ∈ [0,1]^m`, and per resource the
/// deviation row `zᵀΣ̃z + 2cµᵀz ≤ c²` plus the mean row `µᵀz ≤ c`. The
/// deviation rows may be indefinite; nothing here requires `Σ̃yy ≻ 0`.
pub fn build_ccp(inst: &KnapsackInstance) -> Result<ModelIr> {
    inst.validate()?;
    let mut ir = ModelIr::new(ObjSense::Maximize);
    for i in 0..inst.n {
        ir.add_var(format!("x{i}"), Some(0.0), Some(1.0), VarKind::Binary, inst.profits_x[i]);
    }
    for i in 0..inst.m {
        ir.add_var(format!("y{i}"), Some(0.0), Some(1.0), VarKind::Continuous, inst.profits_y[i]);
    }
    let width = inst.n + inst.m;
    for j in 0..inst.resources.len() {
        let reform = drcc_to_quad(&inst.drcc(j)?);
        ir.quad.push(embed_quad_row(format!("dev_{j}"), &reform.quad, width));
        ir.linear.push(mean_lin_row(format!("mean_{j}"), &reform.mean_row, width));
    }
    ir.validate()?;
    Ok(ir)
}

/// Extended cone formulation: on top of `(x, y)`, per resource `j` an
/// aggregate `eta_j ≥ 0` with the cone row `‖Ax + By + d‖ ≤ η`, a budget
/// `tau_j ≥ 0` with the link `η² ≤ τ`, the radicand hypograph `τ ≤ q(x)`,
/// and the mean row. Projecting out `(η, τ)` recovers [`build_ccp`]'s
/// feasible set. Requires every resource's deviation block `Σ̃yy` to be
/// positive definite.
pub fn build_soc(inst: &KnapsackInstance) -> Result<ModelIr> {
    inst.validate()?;
    let (n, m) = (inst.n, inst.m);
    let width = n + m + 2 * inst.resources.len();
    let mut ir = ModelIr::new(ObjSense::Maximize);
    for i in 0..n {
        ir.add_var(format!("x{i}"), Some(0.0), Some(1.0), VarKind::Binary, inst.profits_x[i]);
    }
    for i in 0..m {
        ir.add_var(format!("y{i}"), Some(0.0), Some(1.0), VarKind::Continuous, inst.profits_y[i]);
    }
    for j in 0..inst.resources.len() {
        let reform = drcc_to_quad(&inst.drcc(j)?);
        if !reform.sigma_tilde_yy_pd {
            return Err(Error::SigmaTildeNotPd { resource: j });
        }
        let soc = quad_to_soc(&reform.quad)?;
        let eta = ir.add_var(format!("eta_{j}"), Some(0.0), None, VarKind::Continuous, 0.0);
        let tau = ir.add_var(format!("tau_{j}"), Some(0.0), None, VarKind::Continuous, 0.0);

        let mut f = vec![vec![0.0; width]; m];
        for k in 0..m {
            for i in 0..n {
                f[k][i] = soc.a[(k, i)];
            }
            for i in 0..m {
                f[k][n + i] = soc.b[(k, i)];
            }
        }
        let mut h = vec![0.0; width];
        h[eta] = 1.0;
        ir.soc.push(SocRow {
            name: format!("cone_{j}"),
            f,
            g: soc.d.iter().copied().collect(),
            h,
            e: 0.0,
            norm: Norm::L2,
        });
        ir.rotated.push(RotatedRow { name: format!("link_{j}"), scalar: eta, bound: tau });

        let (pmat, rvec, s) = match &soc.f {
            RhsFunction::SqrtQuadratic { p, r, s } => (p, r, *s),
            RhsFunction::Table(_) => {
                return Err(Error::invalid("cone rewrite did not produce an explicit radicand"))
            }
        };
        let mut q = vec![vec![0.0; width]; width];
        for i in 0..n {
            for k in 0..n {
                q[i][k] = -pmat[i][k];
            }
        }
        let mut linear = vec![0.0; width];
        for i in 0..n {
            linear[i] = -rvec[i];
        }
        linear[tau] = 1.0;
        ir.quad.push(QuadRow { name: format!("hypo_{j}"), q, linear, rhs: s });

        ir.linear.push(mean_lin_row(format!("mean_{j}"), &reform.mean_row, width));
    }
    ir.validate()?;
    Ok(ir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    LpText,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "lp_text" | "lp-text" => Ok(ExportFormat::LpText),
            other => Err(Error::invalid(format!(
                "unknown export format {other:?} (expected json or lp_text)"
            ))),
        }
    }
}

/// Render a model as canonical JSON or LP-format text (see
/// [`ModelIr::lp_text`] for the rewriting rules and its limits).
pub fn export_model(model: &ModelIr, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => {
            model.validate()?;
            model.to_json()
        }
        ExportFormat::LpText => model.lp_text(),
    }
}

/// Optimal value of the squared formulation's continuous relaxation
/// (`x ∈ [0,1]^n`), solved in the equivalent cone form
/// `√α̃‖Σ^{1/2}z‖ ≤ c − µᵀz` per resource — the squared rows may be
/// indefinite, but over `µᵀz ≤ c` the two are the same set.
pub fn ccp_relaxation_bound(inst: &KnapsackInstance) -> Result<f64> {
    inst.validate()?;
    let k = inst.n + inst.m;
    let objective = DVector::from_iterator(
        k,
        inst.profits_x.iter().chain(inst.profits_y.iter()).copied(),
    );
    let mut prob = SocpProblem::new(true, objective);
    prob.bounds = vec![(0.0, 1.0); k];
    for (j, res) in inst.resources.iter().enumerate() {
        let dr = inst.drcc(j)?;
        let root = psd_sqrt(&res.sigma_mat()) * dr.alpha_tilde().sqrt();
        let mu = DVector::from_iterator(k, res.mu.iter().copied());
        prob.cones.push(ConeRow::l2(root, DVector::zeros(k), -mu, res.capacity));
    }
    let out = solve_socp(&prob)?;
    match out.status {
        SolveStatus::Optimal => Ok(out.value),
        s => Err(Error::NumericalLimit(format!(
            "continuous relaxation of the squared formulation ended as {s:?}"
        ))),
    }
}

/// Optimal value of the cone formulation's continuous relaxation with each
/// hypograph row `τ ≤ q(x)` replaced by the exact concave envelope
/// `τ ≤ q̂(x)` over the binary cube, computed by a cutting-plane loop: each
/// round solves the current relaxation and, wherever `τ` exceeds the
/// envelope at the incumbent `x`, adds the affine majorant certificate of
/// the envelope as a cut. Enumerates the cube, so `n ≤ 12`.
pub fn soc_envelope_relaxation_bound(inst: &KnapsackInstance) -> Result<f64> {
    inst.validate()?;
    if inst.n > 12 {
        return Err(Error::invalid(format!(
            "envelope tightening enumerates the binary cube; n = {} exceeds 12",
            inst.n
        )));
    }
    let (n, m, jn) = (inst.n, inst.m, inst.resources.len());
    let width = n + m + 2 * jn;
    let eta = |j: usize| n + m + 2 * j;
    let tau = |j: usize| n + m + 2 * j + 1;

    let cube = BinaryDomain::full_cube(n)?;
    let points = cube.point_vecs();

    let mut objective = DVector::zeros(width);
    for i in 0..n {
        objective[i] = inst.profits_x[i];
    }
    for i in 0..m {
        objective[n + i] = inst.profits_y[i];
    }
    let mut prob = SocpProblem::new(true, objective);
    for i in 0..n + m {
        prob.bounds[i] = (0.0, 1.0);
    }

    let mut radicand_values = Vec::with_capacity(jn);
    for j in 0..jn {
        let reform = drcc_to_quad(&inst.drcc(j)?);
        if !reform.sigma_tilde_yy_pd {
            return Err(Error::SigmaTildeNotPd { resource: j });
        }
        let soc = quad_to_soc(&reform.quad)?;

        let mut f = DMatrix::zeros(m, width);
        f.view_mut((0, 0), (m, n)).copy_from(&soc.a);
        f.view_mut((0, n), (m, m)).copy_from(&soc.b);
        let mut h = DVector::zeros(width);
        h[eta(j)] = 1.0;
        prob.cones.push(ConeRow::l2(f, soc.d.clone(), h, 0.0));

        let mut q = DMatrix::zeros(width, width);
        q[(eta(j), eta(j))] = 1.0;
        let mut lin = DVector::zeros(width);
        lin[tau(j)] = -1.0;
        prob.quads.push(QuadConstraintRow { q, linear: lin, rhs: 0.0 });

        let dr = inst.drcc(j)?;
        let mut coeffs = DVector::zeros(width);
        for i in 0..n {
            coeffs[i] = dr.mu_x[i];
        }
        for i in 0..m {
            coeffs[n + i] = dr.mu_y[i];
        }
        prob.linear.push((coeffs, dr.c));

        // values of the radicand on the cube; the max seeds τ's box so the
        // first rounds stay bounded before any cut exists
        let vals: Vec<f64> = points.iter().map(|x| soc.f_radicand(x)).collect();
        let qmax = vals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        prob.bounds[eta(j)] = (0.0, f64::INFINITY);
        prob.bounds[tau(j)] = (0.0, qmax.max(0.0));
        radicand_values.push(vals);
    }

    for _round in 0..300 {
        let out = solve_socp(&prob)?;
        if out.status != SolveStatus::Optimal {
            return Err(Error::NumericalLimit(format!(
                "envelope-tightened relaxation ended as {:?}",
                out.status
            )));
        }
        let xstar = DVector::from_iterator(n, (0..n).map(|i| out.point[i].clamp(0.0, 1.0)));
        let mut added = false;
        for j in 0..jn {
            let (cert, pi, pi0) =
                concave_envelope_with_majorant(&cube, &radicand_values[j], &xstar)?;
            let tol = (1e-8 * (1.0 + cert.value.abs()))
                .max(10.0 * out.dual_gap.abs())
                .max(1e-9);
            if out.point[tau(j)] > cert.value + tol {
                let mut row = DVector::zeros(width);
                row[tau(j)] = 1.0;
                for i in 0..n {
                    row[i] = -pi[i];
                }
                prob.linear.push((row, pi0));
                added = true;
            }
        }
        if !added {
            return Ok(out.value);
        }
    }
    Err(Error::NumericalLimit(
        "envelope tightening did not settle within 300 rounds".into(),
    ))
}
