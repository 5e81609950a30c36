//! Invariance and stability certificates.
//!
//! A set `F` is positively invariant for the closed loop as soon as its
//! one-step template over-approximation lands back inside `F` — a sufficient
//! check that needs nothing but support MILPs and containment LPs. On top of
//! this sit:
//!
//! * a fixed-point iteration that shrinks the state constraint set into a
//!   large invariant feasible set `F_max`,
//! * a terminal-set construction that iterates the one-step operator from
//!   `F_max` until a scaled copy of the iterate grows under the dynamics,
//!   which certifies that the iterate is within a factor `1+eps` of the
//!   limit set; the iterate is the small invariant set `F_min` and the
//!   iteration count `k_star` bounds the entry time,
//! * the resulting boundedness certificate (every trajectory from `F_max`
//!   stays feasible and is inside `F_min` from step `k_star` on), and
//! * an asymptotic-stability certificate for the dual-mode modification,
//!   which checks that `F_min` fits inside the validated region of
//!   attraction of the local controller.
//!
//! Certificates store everything needed for independent replay: the sets in
//! H-representation, the template, all scalars, and one record per check.

use crate::encoder::{encode_nn_only, BigMConfig, EncodeError};
use crate::geometry::{min_cover_scale, GeometryError, Polytope, DEFAULT_SET_TOL};
use crate::milp::{solve_milp, MilpError, MilpOptions, MilpStatus};
use crate::models::{
    scaled_ellipsoid_samples, DualModeController, MaxoutNet, ModelError, PwaSystem,
};
use crate::reach::{overapprox_reach, ReachError, ReachOptions, ReachResult, Template};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("invariant-set iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("invariant-set iteration collapsed to an empty set")]
    EmptyResult,
    #[error("shrink condition not met within {k_limit} steps (epsilon {epsilon})")]
    KLimitExceeded { k_limit: usize, epsilon: f64 },
    #[error(
        "terminal set needs scaling factor {0} > 1; the local region of attraction is too small"
    )]
    ScaleExceedsOne(f64),
    #[error("sampled Lyapunov decrease failed: {0}")]
    LyapunovCheckFailed(String),
    #[error("boundedness certificate is not conclusive")]
    UubNotConclusive,
    #[error("solver resource limit hit during {stage}")]
    Inconclusive { stage: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Options for the certification pipeline.
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Scaling slack of the terminal-set condition.
    pub epsilon_shrink: f64,
    /// Maximum one-step iterations while searching for the terminal set.
    pub k_limit: usize,
    /// Maximum iterations of the invariant-set fixed point.
    pub iter_limit: usize,
    /// Set-inclusion tolerance.
    pub set_tol: f64,
    /// Per-direction MILP node budget.
    pub node_limit: Option<usize>,
    /// Worker threads for per-direction solves.
    pub threads: usize,
    /// Seed recorded with sampled checks.
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            epsilon_shrink: 1e-3,
            k_limit: 200,
            iter_limit: 100,
            set_tol: DEFAULT_SET_TOL,
            node_limit: None,
            threads: 1,
            seed: 0,
        }
    }
}

impl CertifyOptions {
    fn reach(&self) -> ReachOptions {
        ReachOptions {
            node_limit: self.node_limit,
            gap_abs: 1e-6,
            threads: self.threads,
            set_tol: self.set_tol,
        }
    }
}

/// Kind of guarantee a certificate claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    /// Uniform ultimate boundedness in `F_min`, uniformly over `F_max`.
    Uub,
    /// Asymptotic stability of the origin under the dual-mode law.
    Asymptotic,
}

/// One verified (or failed) condition inside a certificate.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    /// Signed residual; at or below the tolerance means satisfied.
    pub residual: f64,
    pub tolerance: f64,
    /// True when the check samples points rather than proving set-wise.
    pub sampled: bool,
}

impl CheckRecord {
    fn exact(name: &str, residual: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            sampled: false,
        }
    }

    fn sampled(name: &str, residual: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            sampled: true,
        }
    }

    fn failed(name: &str, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            passed: false,
            residual: f64::INFINITY,
            tolerance,
            sampled: false,
        }
    }
}

/// A stability/boundedness certificate with everything needed for replay.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: CertKind,
    pub conclusive: bool,
    pub f_max: Option<Polytope>,
    pub f_min: Option<Polytope>,
    /// Uniform bound on the entry time into `f_min` from anywhere in `f_max`.
    pub k_star: Option<usize>,
    pub epsilon_shrink: f64,
    /// Ellipsoid scaling of the asymptotic certificate.
    pub s_scale: Option<f64>,
    /// Iterations the invariant-set fixed point needed.
    pub fmax_iterations: Option<usize>,
    pub template: DMatrix<f64>,
    pub set_tol: f64,
    /// True when a stage died of a solver resource limit rather than a
    /// genuine certification failure; such certificates are never conclusive.
    pub resource_limited: bool,
    pub checks: Vec<CheckRecord>,
    // structural fingerprint of the model the certificate belongs to
    pub state_dim: usize,
    pub input_dim: usize,
    pub region_count: usize,
}

impl Certificate {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Result of a one-step invariance check.
#[derive(Debug, Clone)]
pub struct PiCheck {
    pub holds: bool,
    /// Worst support excess of the one-step image over the set's rows.
    pub residual: f64,
    pub reach: ReachResult,
}

/// Checks positive invariance of `set` by testing whether its one-step
/// template over-approximation is contained in it. Sufficient, not necessary.
pub fn check_pi(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    set: &Polytope,
    template: &Template,
    opts: &CertifyOptions,
) -> Result<PiCheck, CertifyError> {
    let reach = overapprox_reach(sys, net, cfg, 1, set, template, &opts.reach())?;
    if !reach.conclusive {
        return Err(CertifyError::Inconclusive {
            stage: "one-step invariance check".into(),
        });
    }
    if reach.set.is_empty()? {
        return Ok(PiCheck {
            holds: true,
            residual: f64::NEG_INFINITY,
            reach,
        });
    }
    let residual = set.containment_residual(&reach.set)?;
    Ok(PiCheck {
        holds: residual <= opts.set_tol,
        residual,
        reach,
    })
}

/// Result of the invariant-set fixed point.
#[derive(Debug, Clone)]
pub struct FmaxResult {
    pub set: Polytope,
    /// Loop iterations executed (set updates).
    pub iterations: usize,
    /// Residual of the final invariance check.
    pub residual: f64,
}

/// Computes a large positively invariant subset of the state constraints by
/// iterating `F <- R1(F) ∩ X` from `F = X` until `R1(F) ⊆ F`.
pub fn compute_fmax(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    template: &Template,
    opts: &CertifyOptions,
) -> Result<FmaxResult, CertifyError> {
    let state_set = sys.state_set();
    let mut current = state_set.clone();
    for iteration in 0..=opts.iter_limit {
        let pi = check_pi(sys, net, cfg, &current, template, opts)?;
        if pi.holds {
            return Ok(FmaxResult {
                set: current,
                iterations: iteration,
                residual: pi.residual,
            });
        }
        if iteration == opts.iter_limit {
            break;
        }
        let clipped = clip_to(&pi.reach.set, state_set);
        if clipped.is_empty()? {
            return Err(CertifyError::EmptyResult);
        }
        current = clipped;
    }
    Err(CertifyError::NotConverged {
        iterations: opts.iter_limit,
    })
}

/// Intersection, collapsing to a row-wise minimum when both sets share the
/// same constraint normals (keeps the iterates at a fixed row count).
fn clip_to(set: &Polytope, domain: &Polytope) -> Polytope {
    if set.normals() == domain.normals() {
        let offsets = DVector::from_fn(set.num_rows(), |i, _| {
            set.offsets()[i].min(domain.offsets()[i])
        });
        Polytope::new(set.normals().clone(), offsets).expect("same shape as inputs")
    } else {
        set.intersect(domain).expect("same dimension")
    }
}

/// Result of the terminal-set search.
#[derive(Debug, Clone)]
pub struct FminResult {
    pub set: Polytope,
    pub k_star: usize,
    /// Residual of the shrink condition at `k_star`.
    pub condition_residual: f64,
}

/// Iterates the one-step operator from `F_max` and returns the first iterate
/// whose `1/(1+eps)`-scaled copy grows under the dynamics — the terminal set
/// `F_min`, within a factor `1+eps` of the limit set, together with the
/// entry bound `k_star`.
pub fn compute_fmin(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    f_max: &Polytope,
    template: &Template,
    opts: &CertifyOptions,
) -> Result<FminResult, CertifyError> {
    if !opts.epsilon_shrink.is_finite() || opts.epsilon_shrink <= 0.0 {
        return Err(CertifyError::Precondition(
            "epsilon_shrink must be positive".into(),
        ));
    }
    let entry = check_pi(sys, net, cfg, f_max, template, opts)?;
    if !entry.holds {
        return Err(CertifyError::Precondition(
            "the seed set is not verified invariant".into(),
        ));
    }
    let shrink = 1.0 / (1.0 + opts.epsilon_shrink);
    let mut current = f_max.clone();
    for k in 1..=opts.k_limit {
        let step = overapprox_reach(sys, net, cfg, 1, &current, template, &opts.reach())?;
        if !step.conclusive {
            return Err(CertifyError::Inconclusive {
                stage: format!("terminal-set iteration {k}"),
            });
        }
        if step.set.is_empty()? {
            return Err(CertifyError::EmptyResult);
        }
        current = step.set;
        let scaled = current.scale(shrink)?;
        let grown = overapprox_reach(sys, net, cfg, 1, &scaled, template, &opts.reach())?;
        if !grown.conclusive {
            return Err(CertifyError::Inconclusive {
                stage: format!("shrink condition at iteration {k}"),
            });
        }
        let residual = grown.set.containment_residual(&scaled)?;
        if residual <= opts.set_tol {
            return Ok(FminResult {
                set: current,
                k_star: k,
                condition_residual: residual,
            });
        }
    }
    Err(CertifyError::KLimitExceeded {
        k_limit: opts.k_limit,
        epsilon: opts.epsilon_shrink,
    })
}

/// Worst excess of the network output over the input-constraint rows, over
/// all states in `X`: nonpositive means `Phi(x) ∈ U` for every `x ∈ X`.
pub fn nn_output_excess(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    opts: &CertifyOptions,
) -> Result<f64, CertifyError> {
    let encoding = encode_nn_only(net, cfg, sys.state_set())?;
    let input_set = sys.input_set();
    let milp_opts = MilpOptions {
        gap_abs: 1e-6,
        node_limit: opts.node_limit,
        branch_priority: None,
    };
    let mut worst = f64::NEG_INFINITY;
    for r in 0..input_set.num_rows() {
        let mut problem = encoding.problem.clone();
        for d in 0..net.output_dim() {
            problem.lp.objective[encoding.index.u(d)] = input_set.normals()[(r, d)];
        }
        match solve_milp(&problem, &milp_opts) {
            Ok(sol) if sol.status == MilpStatus::Optimal => {
                worst = worst.max(sol.value - input_set.offsets()[r]);
            }
            Ok(sol) if sol.status == MilpStatus::Infeasible => {
                return Err(CertifyError::Precondition(
                    "state constraint set is empty".into(),
                ));
            }
            Ok(_) => {
                return Err(CertifyError::Precondition(
                    "network output unbounded over the state set".into(),
                ))
            }
            Err(MilpError::NodeLimitExceeded { .. }) => {
                return Err(CertifyError::Inconclusive {
                    stage: "network output range check".into(),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(worst)
}

fn base_certificate(sys: &PwaSystem, template: &Template, opts: &CertifyOptions) -> Certificate {
    Certificate {
        kind: CertKind::Uub,
        conclusive: false,
        f_max: None,
        f_min: None,
        k_star: None,
        epsilon_shrink: opts.epsilon_shrink,
        s_scale: None,
        fmax_iterations: None,
        template: template.directions().clone(),
        set_tol: opts.set_tol,
        resource_limited: false,
        checks: Vec::new(),
        state_dim: sys.state_dim(),
        input_dim: sys.input_dim(),
        region_count: sys.region_count(),
    }
}

/// Runs the full boundedness pipeline and returns a certificate; a failure
/// at any stage produces a certificate with `conclusive = false` carrying the
/// failing check instead of an error.
pub fn certify_uub(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    template: &Template,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let mut cert = base_certificate(sys, template, opts);

    // the controller must keep inputs feasible wherever states are
    match nn_output_excess(sys, net, cfg, opts) {
        Ok(excess) => {
            cert.checks.push(CheckRecord::exact(
                "input_feasibility",
                excess,
                opts.set_tol,
            ));
        }
        Err(CertifyError::Inconclusive { .. }) => {
            cert.resource_limited = true;
            cert.checks
                .push(CheckRecord::failed("input_feasibility", opts.set_tol));
            return Ok(cert);
        }
        Err(e) => return Err(e),
    }
    if !cert.checks.last().expect("just pushed").passed {
        return Ok(cert);
    }

    let fmax = match compute_fmax(sys, net, cfg, template, opts) {
        Ok(f) => f,
        Err(e @ (CertifyError::NotConverged { .. } | CertifyError::EmptyResult)) => {
            let _ = e;
            cert.checks
                .push(CheckRecord::failed("feasible_set_invariance", opts.set_tol));
            return Ok(cert);
        }
        Err(CertifyError::Inconclusive { .. }) => {
            cert.resource_limited = true;
            cert.checks
                .push(CheckRecord::failed("feasible_set_invariance", opts.set_tol));
            return Ok(cert);
        }
        Err(e) => return Err(e),
    };
    cert.checks.push(CheckRecord::exact(
        "feasible_set_invariance",
        fmax.residual,
        opts.set_tol,
    ));
    let fmax_in_x = sys.state_set().containment_residual(&fmax.set)?;
    cert.checks.push(CheckRecord::exact(
        "feasible_set_within_state_constraints",
        fmax_in_x,
        opts.set_tol,
    ));
    cert.f_max = Some(fmax.set.clone());
    cert.fmax_iterations = Some(fmax.iterations);

    let fmin = match compute_fmin(sys, net, cfg, &fmax.set, template, opts) {
        Ok(f) => f,
        Err(CertifyError::KLimitExceeded { .. } | CertifyError::EmptyResult) => {
            cert.checks.push(CheckRecord::failed(
                "terminal_set_shrink_condition",
                opts.set_tol,
            ));
            return Ok(cert);
        }
        Err(CertifyError::Inconclusive { .. }) => {
            cert.resource_limited = true;
            cert.checks.push(CheckRecord::failed(
                "terminal_set_shrink_condition",
                opts.set_tol,
            ));
            return Ok(cert);
        }
        Err(e) => return Err(e),
    };
    cert.checks.push(CheckRecord::exact(
        "terminal_set_shrink_condition",
        fmin.condition_residual,
        opts.set_tol,
    ));

    // replay the chain guarantees on the finished sets
    let fmin_pi = check_pi(sys, net, cfg, &fmin.set, template, opts)?;
    cert.checks.push(CheckRecord::exact(
        "terminal_set_invariance",
        fmin_pi.residual,
        opts.set_tol,
    ));
    let nested = fmax.set.containment_residual(&fmin.set)?;
    cert.checks.push(CheckRecord::exact(
        "terminal_set_within_feasible_set",
        nested,
        opts.set_tol,
    ));

    cert.f_min = Some(fmin.set);
    cert.k_star = Some(fmin.k_star);
    cert.conclusive = cert.checks.iter().all(|c| c.passed);
    Ok(cert)
}

/// Upgrades a conclusive boundedness certificate to asymptotic stability of
/// the origin under the dual-mode law.
///
/// Computes the smallest ellipsoid scaling covering `F_min`, verifies it does
/// not exceed the validated region of attraction (`s <= 1`), and validates by
/// deterministic sampling that the scaled ellipsoid stays inside the
/// zero-offset region cells and that the supplied Lyapunov function decreases
/// under the local feedback. Sampled checks are marked as such in the
/// certificate.
pub fn certify_asymptotic(
    sys: &PwaSystem,
    ctrl: &DualModeController,
    uub: &Certificate,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    if !uub.conclusive || uub.kind != CertKind::Uub {
        return Err(CertifyError::UubNotConclusive);
    }
    let f_min = uub.f_min.as_ref().ok_or(CertifyError::UubNotConclusive)?;
    let mut cert = uub.clone();
    cert.kind = CertKind::Asymptotic;
    cert.conclusive = false;

    let s = min_cover_scale(&ctrl.roa, f_min)?;
    if s > 1.0 + 1e-9 {
        return Err(CertifyError::ScaleExceedsOne(s));
    }
    cert.s_scale = Some(s);
    cert.checks.push(CheckRecord::exact(
        "switch_region_within_attraction_region",
        s - 1.0,
        1e-9,
    ));

    // F_min ⊆ s F0 holds by construction of s; record the vertex residual
    let worst_vertex = f_min
        .vertices()?
        .iter()
        .map(|v| ctrl.roa.quad(v) - s * s * ctrl.roa.level())
        .fold(f64::NEG_INFINITY, f64::max);
    cert.checks.push(CheckRecord::exact(
        "terminal_set_within_switch_region",
        worst_vertex,
        opts.set_tol * (1.0 + ctrl.roa.level()),
    ));

    // sampled: the switching region must live inside the zero-offset cells
    let mut origin_cell_residual: f64 = -1.0;
    for x in scaled_ellipsoid_samples(&ctrl.roa, s, 128) {
        let u = ctrl.eval_kappa(&x)?;
        match sys.region_of(&x, &u) {
            Some(i) if sys.regions()[i].p.amax() <= 1e-9 => {}
            _ => origin_cell_residual = f64::INFINITY,
        }
    }
    cert.checks.push(CheckRecord::sampled(
        "switch_region_in_origin_cells",
        origin_cell_residual,
        0.0,
    ));

    // sampled: Lyapunov decrease of x'Sx under the local feedback
    let mut decrease_residual = f64::NEG_INFINITY;
    let mut tested = 0usize;
    for x in scaled_ellipsoid_samples(&ctrl.roa, s, 512) {
        if x.amax() < 1e-9 {
            continue;
        }
        let u = ctrl.eval_kappa(&x)?;
        let next = sys.step(&x, &u)?;
        let v0 = ctrl.roa.quad(&x);
        let v1 = ctrl.roa.quad(&next);
        decrease_residual = decrease_residual.max((v1 - v0) / v0.max(1e-12));
        tested += 1;
    }
    if tested == 0 {
        return Err(CertifyError::LyapunovCheckFailed(
            "no usable sample points".into(),
        ));
    }
    let lyap = CheckRecord::sampled("lyapunov_decrease", decrease_residual, -1e-9);
    let lyap_ok = lyap.passed;
    cert.checks.push(lyap);
    if !lyap_ok {
        return Err(CertifyError::LyapunovCheckFailed(format!(
            "worst relative change {decrease_residual:.3e} (must be negative)"
        )));
    }

    cert.conclusive = cert.checks.iter().all(|c| c.passed);
    Ok(cert)
}

/// Independently re-verifies a stored certificate against a model, using
/// only containment queries, one-step over-approximations, and the ellipsoid
/// covering scale. Returns the replayed check list; the certificate is valid
/// iff every record passed.
pub fn replay_certificate(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    cert: &Certificate,
    ctrl: Option<&DualModeController>,
    opts: &CertifyOptions,
) -> Result<Vec<CheckRecord>, CertifyError> {
    if cert.state_dim != sys.state_dim()
        || cert.input_dim != sys.input_dim()
        || cert.region_count != sys.region_count()
    {
        return Err(CertifyError::Precondition(
            "certificate does not structurally match the model".into(),
        ));
    }
    let template = Template::new(cert.template.clone())
        .map_err(|_| CertifyError::Precondition("certificate template is invalid".into()))?;
    let f_max = cert
        .f_max
        .as_ref()
        .ok_or_else(|| CertifyError::Precondition("certificate lacks the feasible set".into()))?;
    let f_min = cert
        .f_min
        .as_ref()
        .ok_or_else(|| CertifyError::Precondition("certificate lacks the terminal set".into()))?;
    let k_star = cert
        .k_star
        .ok_or_else(|| CertifyError::Precondition("certificate lacks the entry bound".into()))?;
    let mut out = Vec::new();

    let excess = nn_output_excess(sys, net, cfg, opts)?;
    out.push(CheckRecord::exact(
        "input_feasibility",
        excess,
        cert.set_tol,
    ));

    let fmax_in_x = sys.state_set().containment_residual(f_max)?;
    out.push(CheckRecord::exact(
        "feasible_set_within_state_constraints",
        fmax_in_x,
        cert.set_tol,
    ));
    let pi_fmax = check_pi(sys, net, cfg, f_max, &template, opts)?;
    out.push(CheckRecord::exact(
        "feasible_set_invariance",
        pi_fmax.residual,
        cert.set_tol,
    ));

    // re-derive the terminal set by iterating the one-step operator
    let mut current = f_max.clone();
    for _ in 0..k_star {
        let step = overapprox_reach(sys, net, cfg, 1, &current, &template, &opts.reach())?;
        if !step.conclusive {
            return Err(CertifyError::Inconclusive {
                stage: "terminal-set chain replay".into(),
            });
        }
        current = step.set;
    }
    let mut chain_gap: f64 = f64::NEG_INFINITY;
    if current.normals() == f_min.normals() {
        for i in 0..current.num_rows() {
            chain_gap = chain_gap.max((current.offsets()[i] - f_min.offsets()[i]).abs());
        }
    } else {
        chain_gap = f64::INFINITY;
    }
    out.push(CheckRecord::exact(
        "terminal_set_chain_recomputation",
        chain_gap,
        1e-9,
    ));

    let shrink = 1.0 / (1.0 + cert.epsilon_shrink);
    let scaled = f_min.scale(shrink)?;
    let grown = overapprox_reach(sys, net, cfg, 1, &scaled, &template, &opts.reach())?;
    if !grown.conclusive {
        return Err(CertifyError::Inconclusive {
            stage: "shrink condition replay".into(),
        });
    }
    out.push(CheckRecord::exact(
        "terminal_set_shrink_condition",
        grown.set.containment_residual(&scaled)?,
        cert.set_tol,
    ));

    let pi_fmin = check_pi(sys, net, cfg, f_min, &template, opts)?;
    out.push(CheckRecord::exact(
        "terminal_set_invariance",
        pi_fmin.residual,
        cert.set_tol,
    ));
    out.push(CheckRecord::exact(
        "terminal_set_within_feasible_set",
        f_max.containment_residual(f_min)?,
        cert.set_tol,
    ));

    if cert.kind == CertKind::Asymptotic {
        let ctrl = ctrl.ok_or_else(|| {
            CertifyError::Precondition(
                "asymptotic certificate replay needs the dual-mode controller".into(),
            )
        })?;
        let stored = cert.s_scale.ok_or_else(|| {
            CertifyError::Precondition("asymptotic certificate lacks the scaling factor".into())
        })?;
        let s = min_cover_scale(&ctrl.roa, f_min)?;
        out.push(CheckRecord::exact(
            "switch_region_scale_recomputation",
            (s - stored).abs(),
            1e-9,
        ));
        out.push(CheckRecord::exact(
            "switch_region_within_attraction_region",
            s - 1.0,
            1e-9,
        ));
        let mut origin_cell_residual: f64 = -1.0;
        for x in scaled_ellipsoid_samples(&ctrl.roa, s, 128) {
            let u = ctrl.eval_kappa(&x)?;
            match sys.region_of(&x, &u) {
                Some(i) if sys.regions()[i].p.amax() <= 1e-9 => {}
                _ => origin_cell_residual = f64::INFINITY,
            }
        }
        out.push(CheckRecord::sampled(
            "switch_region_in_origin_cells",
            origin_cell_residual,
            0.0,
        ));
        let mut decrease: f64 = f64::NEG_INFINITY;
        for x in scaled_ellipsoid_samples(&ctrl.roa, s, 512) {
            if x.amax() < 1e-9 {
                continue;
            }
            let u = ctrl.eval_kappa(&x)?;
            let next = sys.step(&x, &u)?;
            decrease = decrease
                .max((ctrl.roa.quad(&next) - ctrl.roa.quad(&x)) / ctrl.roa.quad(&x).max(1e-12));
        }
        out.push(CheckRecord::sampled("lyapunov_decrease", decrease, -1e-9));
    }
    Ok(out)
}
