//! Reachability engine: exact support values of k-step reachable sets via
//! mixed-integer programs, template polytope over-approximations that are
//! tight in every template direction, and the iterated one-step operator.
//!
//! The k-step over-approximation from a template `C` collects one support
//! MILP optimum per row of `C`; the resulting polytope contains the true
//! reachable set and touches it in each template direction. Iterating the
//! one-step operator gives sets that stay positively invariant once the seed
//! set is, which is what the certification layer builds on.

use crate::encoder::{encode_closed_loop, BigMConfig, EncodeError};
use crate::geometry::{GeometryError, Polytope, DEFAULT_SET_TOL};
use crate::milp::{solve_milp, MilpError, MilpOptions, MilpStatus};
use crate::models::{MaxoutNet, PwaSystem};
use nalgebra::{DMatrix, DVector};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("solve inconclusive: node limit hit (dual bound {bound})")]
    Inconclusive { bound: f64 },
    #[error("reachable-set support unbounded in direction {direction}")]
    UnboundedReach { direction: usize },
    #[error("initial set is not contained in the state constraint set (residual {0:.3e})")]
    OutsideDomain(f64),
    #[error("steps must be at least 1")]
    ZeroSteps,
    #[error("template/direction dimension mismatch")]
    DimensionMismatch,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A matrix of outer-approximation directions (no zero rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    directions: DMatrix<f64>,
}

impl Template {
    pub fn new(directions: DMatrix<f64>) -> Result<Self, ReachError> {
        if directions.nrows() == 0 || directions.ncols() == 0 {
            return Err(ReachError::DimensionMismatch);
        }
        for row in directions.row_iter() {
            if row.iter().all(|v| v.abs() < 1e-12) {
                return Err(ReachError::DimensionMismatch);
            }
        }
        Ok(Template { directions })
    }

    /// Axis-aligned box directions `±e_i`.
    pub fn axis_box(dim: usize) -> Self {
        let mut d = DMatrix::zeros(2 * dim, dim);
        for j in 0..dim {
            d[(2 * j, j)] = 1.0;
            d[(2 * j + 1, j)] = -1.0;
        }
        Template { directions: d }
    }

    /// Box directions plus all pairwise diagonals `±e_i ± e_j`.
    pub fn octagon(dim: usize) -> Self {
        let pairs = dim * (dim - 1) / 2;
        let mut d = DMatrix::zeros(2 * dim + 4 * pairs, dim);
        for j in 0..dim {
            d[(2 * j, j)] = 1.0;
            d[(2 * j + 1, j)] = -1.0;
        }
        let mut r = 2 * dim;
        for i in 0..dim {
            for j in i + 1..dim {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    d[(r, i)] = si;
                    d[(r, j)] = sj;
                    r += 1;
                }
            }
        }
        Template { directions: d }
    }

    /// The constraint normals of a polytope as a template.
    pub fn from_normals(p: &Polytope) -> Self {
        Template {
            directions: p.normals().clone(),
        }
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    /// Whether the directions positively span the space, i.e. `{Cx <= 1}`
    /// is bounded; templates that fail this can produce unbounded
    /// over-approximations.
    pub fn positively_spans(&self) -> Result<bool, GeometryError> {
        let ones = DVector::from_element(self.len(), 1.0);
        let p = Polytope::new(self.directions.clone(), ones)?;
        match p.bounding_box() {
            Ok(_) => Ok(true),
            Err(GeometryError::UnboundedSet) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

/// Options shared by all reachability calls.
#[derive(Debug, Clone)]
pub struct ReachOptions {
    /// Node budget per direction MILP; `None` means unlimited.
    pub node_limit: Option<usize>,
    /// Absolute MILP optimality gap.
    pub gap_abs: f64,
    /// Worker threads for the per-direction solves.
    pub threads: usize,
    /// Set-inclusion tolerance used by domain checks.
    pub set_tol: f64,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            node_limit: None,
            gap_abs: 1e-6,
            threads: 1,
            set_tol: DEFAULT_SET_TOL,
        }
    }
}

/// Solver statistics accumulated over one reachability call.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReachStats {
    pub milp_solves: usize,
    pub nodes: usize,
    pub wall: Duration,
}

/// A template over-approximation of a reachable set.
#[derive(Debug, Clone)]
pub struct ReachResult {
    /// `{C x <= c}` over the template directions.
    pub set: Polytope,
    /// Per-direction optima `c` (dual bounds for inconclusive directions).
    pub optima: Vec<f64>,
    /// False as soon as any direction hit its node limit.
    pub conclusive: bool,
    /// True when the template positively spans the state space.
    pub template_bounded: bool,
    pub stats: ReachStats,
}

enum DirectionOutcome {
    Value { value: f64, nodes: usize },
    Inconclusive { bound: f64, nodes: usize },
    Empty,
    Unbounded,
}

fn support_direction(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    steps: usize,
    x0_set: &Polytope,
    direction: &DVector<f64>,
    opts: &ReachOptions,
) -> Result<DirectionOutcome, ReachError> {
    let encoded = encode_closed_loop(sys, net, cfg, steps, x0_set)?;
    let branch_priority = encoded.branch_priority;
    let mut problem = encoded.problem;
    for d in 0..sys.state_dim() {
        problem.lp.objective[encoded.index.x(steps, d)] = direction[d];
    }
    let milp_opts = MilpOptions {
        gap_abs: opts.gap_abs,
        node_limit: opts.node_limit,
        branch_priority: Some(branch_priority),
    };
    match solve_milp(&problem, &milp_opts) {
        Ok(sol) => match sol.status {
            MilpStatus::Optimal => Ok(DirectionOutcome::Value {
                value: sol.value,
                nodes: sol.nodes,
            }),
            MilpStatus::Infeasible => Ok(DirectionOutcome::Empty),
            MilpStatus::Unbounded => Ok(DirectionOutcome::Unbounded),
        },
        Err(MilpError::NodeLimitExceeded { bound, nodes, .. }) => {
            Ok(DirectionOutcome::Inconclusive { bound, nodes })
        }
        Err(e) => Err(e.into()),
    }
}

fn check_initial_set(
    sys: &PwaSystem,
    x0_set: &Polytope,
    opts: &ReachOptions,
) -> Result<bool, ReachError> {
    if x0_set.dim() != sys.state_dim() {
        return Err(ReachError::DimensionMismatch);
    }
    if x0_set.is_empty()? {
        return Ok(true);
    }
    let residual = sys.state_set().containment_residual(x0_set)?;
    if residual > opts.set_tol {
        return Err(ReachError::OutsideDomain(residual));
    }
    Ok(false)
}

/// Exact support of the k-step reachable set from `x0_set` in `direction`,
/// computed as the optimum of one k-step closed-loop MILP.
pub fn support_reach(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    steps: usize,
    x0_set: &Polytope,
    direction: &DVector<f64>,
    opts: &ReachOptions,
) -> Result<f64, ReachError> {
    if steps == 0 {
        return Err(ReachError::ZeroSteps);
    }
    if direction.len() != sys.state_dim() {
        return Err(ReachError::DimensionMismatch);
    }
    if check_initial_set(sys, x0_set, opts)? {
        return Err(ReachError::Geometry(GeometryError::EmptySet));
    }
    match support_direction(sys, net, cfg, steps, x0_set, direction, opts)? {
        DirectionOutcome::Value { value, .. } => Ok(value),
        DirectionOutcome::Inconclusive { bound, .. } => Err(ReachError::Inconclusive { bound }),
        DirectionOutcome::Empty => Err(ReachError::Geometry(GeometryError::EmptySet)),
        DirectionOutcome::Unbounded => Err(ReachError::UnboundedReach { direction: 0 }),
    }
}

/// Template over-approximation of the k-step reachable set: one support MILP
/// per template direction; the result contains the reachable set and its
/// support matches the optimum exactly in every template direction.
///
/// Directions whose solve hits the node limit contribute their dual bound
/// (still a valid over-approximation) and flip `conclusive` to false. An
/// empty initial set yields the canonical empty polytope.
pub fn overapprox_reach(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    steps: usize,
    x0_set: &Polytope,
    template: &Template,
    opts: &ReachOptions,
) -> Result<ReachResult, ReachError> {
    if steps == 0 {
        return Err(ReachError::ZeroSteps);
    }
    if template.dim() != sys.state_dim() {
        return Err(ReachError::DimensionMismatch);
    }
    let start = Instant::now();
    let template_bounded = template.positively_spans()?;
    if check_initial_set(sys, x0_set, opts)? {
        return Ok(ReachResult {
            set: Polytope::empty(sys.state_dim()),
            optima: vec![f64::NEG_INFINITY; template.len()],
            conclusive: true,
            template_bounded,
            stats: ReachStats {
                wall: start.elapsed(),
                ..ReachStats::default()
            },
        });
    }

    let l = template.len();
    let run_direction = |i: usize| -> Result<DirectionOutcome, ReachError> {
        let dir = template.directions().row(i).transpose();
        support_direction(sys, net, cfg, steps, x0_set, &dir, opts)
    };

    let outcomes: Vec<Result<DirectionOutcome, ReachError>> = if opts.threads > 1 && l > 1 {
        let mut results: Vec<Option<Result<DirectionOutcome, ReachError>>> =
            (0..l).map(|_| None).collect();
        let workers = opts.threads.min(l);
        std::thread::scope(|scope| {
            let chunks: Vec<&mut [Option<Result<DirectionOutcome, ReachError>>]> =
                results.chunks_mut(l.div_ceil(workers)).collect();
            let mut base = 0;
            for chunk in chunks {
                let lo = base;
                base += chunk.len();
                let run = &run_direction;
                scope.spawn(move || {
                    for (off, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run(lo + off));
                    }
                });
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("worker filled slot"))
            .collect()
    } else {
        (0..l).map(run_direction).collect()
    };

    let mut optima = Vec::with_capacity(l);
    let mut conclusive = true;
    let mut stats = ReachStats::default();
    let mut any_empty = false;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            DirectionOutcome::Value { value, nodes } => {
                optima.push(value);
                stats.nodes += nodes;
            }
            DirectionOutcome::Inconclusive { bound, nodes } => {
                optima.push(bound);
                stats.nodes += nodes;
                conclusive = false;
            }
            DirectionOutcome::Empty => {
                any_empty = true;
                optima.push(f64::NEG_INFINITY);
            }
            DirectionOutcome::Unbounded => return Err(ReachError::UnboundedReach { direction: i }),
        }
        stats.milp_solves += 1;
    }
    stats.wall = start.elapsed();
    let set = if any_empty {
        Polytope::empty(sys.state_dim())
    } else {
        Polytope::new(
            template.directions().clone(),
            DVector::from_vec(optima.clone()),
        )?
    };
    Ok(ReachResult {
        set,
        optima,
        conclusive,
        template_bounded,
        stats,
    })
}

/// Result of the iterated one-step operator.
#[derive(Debug, Clone)]
pub struct IterateOutcome {
    /// Over-approximation after the final completed step.
    pub result: ReachResult,
    /// Whether the one-step image of the seed was contained in the seed: the
    /// precondition under which the iterates are all invariant subsets.
    pub pi_at_entry: bool,
    /// Completed one-step applications (equals the requested count unless an
    /// intermediate set left the state constraints).
    pub completed: usize,
    /// True when iteration stopped early because an intermediate set left
    /// the state constraints (the invariance precondition failed).
    pub left_domain: bool,
}

/// Applies the one-step over-approximation `k` times, feeding each output in
/// as the next initial set.
///
/// When the entry check holds (`R1(F) ⊆ F`), every iterate is positively
/// invariant and sandwiched inside its predecessor. If an intermediate set
/// escapes the state constraints, iteration stops early with
/// `conclusive = false` on the returned result.
pub fn iterate_reach(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    times: usize,
    seed_set: &Polytope,
    template: &Template,
    opts: &ReachOptions,
) -> Result<IterateOutcome, ReachError> {
    if times == 0 {
        return Err(ReachError::ZeroSteps);
    }
    let mut result = overapprox_reach(sys, net, cfg, 1, seed_set, template, opts)?;
    let pi_at_entry = !result.set.is_empty()? && seed_set.contains(&result.set, opts.set_tol)?;
    let mut completed = 1;
    let mut left_domain = false;
    let mut stats = result.stats;
    for _ in 1..times {
        if result.set.is_empty()? {
            break; // the empty set is a fixed point of the iteration
        }
        if !sys.state_set().contains(&result.set, opts.set_tol)? {
            result.conclusive = false;
            left_domain = true;
            break;
        }
        let next = overapprox_reach(sys, net, cfg, 1, &result.set, template, opts)?;
        stats.milp_solves += next.stats.milp_solves;
        stats.nodes += next.stats.nodes;
        stats.wall += next.stats.wall;
        let conclusive = result.conclusive && next.conclusive;
        result = next;
        result.conclusive = conclusive;
        completed += 1;
    }
    result.stats = stats;
    Ok(IterateOutcome {
        result,
        pi_at_entry,
        completed,
        left_domain,
    })
}
