//! Mixed-binary linear programming by branch-and-bound over [`crate::lp`].
//!
//! The solver dives depth-first until it holds a first incumbent, then
//! switches to best-bound node selection. Branching picks the most fractional
//! binary (ties by lowest index) and explores the rounding direction first.
//! All decisions are index-ordered, so solves are deterministic.

use crate::lp::{self, solve_lp, LinearProgram, LpError, LpStatus};
use nalgebra::DVector;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// A linear program together with the set of variables restricted to {0, 1}.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    /// Indices of binary variables, strictly increasing.
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    /// Wraps a program, clamping the bounds of the binary variables to [0, 1].
    pub fn new(mut lp: LinearProgram, mut binaries: Vec<usize>) -> Result<Self, MilpError> {
        binaries.sort_unstable();
        binaries.dedup();
        if let Some(&j) = binaries.iter().find(|&&j| j >= lp.num_vars()) {
            return Err(MilpError::BadProblem(format!(
                "binary index {j} out of range ({} variables)",
                lp.num_vars()
            )));
        }
        for &j in &binaries {
            lp.lower[j] = lp.lower[j].max(0.0);
            lp.upper[j] = lp.upper[j].min(1.0);
            if lp.lower[j] > lp.upper[j] {
                return Err(MilpError::BadProblem(format!(
                    "binary variable {j} has empty bound interval"
                )));
            }
        }
        Ok(MilpProblem { lp, binaries })
    }
}

/// Termination status of a MILP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a completed MILP solve.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub value: f64,
    pub assignment: DVector<f64>,
    /// Best dual bound at termination; within `gap_abs` of `value` when Optimal.
    pub bound: f64,
    pub nodes: usize,
    pub wall: Duration,
}

/// Options for [`solve_milp`].
#[derive(Debug, Clone)]
pub struct MilpOptions {
    /// Absolute optimality gap at which a solve counts as Optimal.
    pub gap_abs: f64,
    /// Maximum number of branch-and-bound nodes to process.
    pub node_limit: Option<usize>,
    /// Optional branching priority per variable (lower class branches
    /// first); within a class the most fractional binary wins, ties by
    /// lowest index. Encoders use this to fix indicators in time order,
    /// which keeps feasibility dives from wandering into late-step choices
    /// that only turn contradictory many levels deeper.
    pub branch_priority: Option<Vec<u32>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_abs: 1e-6,
            node_limit: None,
            branch_priority: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("node limit exceeded after {nodes} nodes (bound {bound}); result inconclusive")]
    NodeLimitExceeded {
        /// Best incumbent found before the limit, if any.
        incumbent: Option<Box<MilpSolution>>,
        bound: f64,
        nodes: usize,
    },
    #[error("malformed problem: {0}")]
    BadProblem(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

struct Node {
    id: usize,
    lower: DVector<f64>,
    upper: DVector<f64>,
    /// Parent LP bound; refined by this node's own relaxation once solved.
    bound: f64,
}

/// Max-heap ordering by bound, ties in favor of the older node.
struct HeapEntry(f64, usize);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Solves a mixed-binary linear program to global optimality (maximization).
pub fn solve_milp(problem: &MilpProblem, opts: &MilpOptions) -> Result<MilpSolution, MilpError> {
    problem.lp.validate()?;
    Solver::new(problem, opts).run()
}

/// Feasibility version of [`solve_milp`]: ignores the objective and returns
/// any assignment satisfying all constraints, or Infeasible.
pub fn find_feasible(problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
    find_feasible_with(problem, &MilpOptions::default())
}

/// [`find_feasible`] with explicit options (node limits in particular).
pub fn find_feasible_with(
    problem: &MilpProblem,
    opts: &MilpOptions,
) -> Result<MilpSolution, MilpError> {
    let mut flat = problem.clone();
    flat.lp.objective.fill(0.0);
    solve_milp(&flat, opts)
}

struct Solver<'a> {
    problem: &'a MilpProblem,
    opts: &'a MilpOptions,
    nodes_processed: usize,
    next_id: usize,
    incumbent: Option<MilpSolution>,
    /// Nodes waiting during the initial depth-first dive.
    stack: Vec<Node>,
    /// Nodes waiting once best-bound selection has taken over.
    heap: BinaryHeap<HeapEntry>,
    store: Vec<Option<Node>>,
    start: Instant,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a MilpProblem, opts: &'a MilpOptions) -> Self {
        Solver {
            problem,
            opts,
            nodes_processed: 0,
            next_id: 0,
            incumbent: None,
            stack: Vec::new(),
            heap: BinaryHeap::new(),
            store: Vec::new(),
            start: Instant::now(),
        }
    }

    fn stash(&mut self, node: Node) {
        let id = node.id;
        let bound = node.bound;
        if id >= self.store.len() {
            self.store.resize_with(id + 1, || None);
        }
        self.store[id] = Some(node);
        self.heap.push(HeapEntry(bound, id));
    }

    fn push(&mut self, node: Node) {
        if self.incumbent.is_none() {
            self.stack.push(node);
        } else {
            self.stash(node);
        }
    }

    fn pop(&mut self) -> Option<Node> {
        if self.incumbent.is_none() {
            if let Some(n) = self.stack.pop() {
                return Some(n);
            }
        } else {
            // drain anything left over from the dive into the heap first
            while let Some(n) = self.stack.pop() {
                self.stash(n);
            }
        }
        while let Some(HeapEntry(_, id)) = self.heap.pop() {
            if let Some(node) = self.store[id].take() {
                return Some(node);
            }
        }
        None
    }

    fn open_bound(&self) -> f64 {
        let mut b = f64::NEG_INFINITY;
        for n in &self.stack {
            b = b.max(n.bound);
        }
        for entry in &self.heap {
            if self.store[entry.1].is_some() {
                b = b.max(entry.0);
            }
        }
        b
    }

    fn node_lp(&self, node: &Node) -> LinearProgram {
        let mut lp = self.problem.lp.clone();
        lp.lower = node.lower.clone();
        lp.upper = node.upper.clone();
        lp
    }

    /// Re-solve with all binaries pinned to their rounded values; a feasible
    /// result is an exact incumbent.
    fn try_incumbent(&mut self, relaxed_point: &DVector<f64>) -> Result<bool, MilpError> {
        let mut lp = self.problem.lp.clone();
        for &j in &self.problem.binaries {
            let v: f64 = if relaxed_point[j] >= 0.5 { 1.0 } else { 0.0 };
            let v = v.clamp(lp.lower[j], lp.upper[j]);
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        let r = solve_lp(&lp)?;
        if r.status != LpStatus::Optimal {
            return Ok(false);
        }
        let better = match &self.incumbent {
            Some(inc) => r.value > inc.value + 1e-12,
            None => true,
        };
        if better {
            self.incumbent = Some(MilpSolution {
                status: MilpStatus::Optimal,
                value: r.value,
                assignment: r.point,
                bound: f64::INFINITY,
                nodes: 0,
                wall: Duration::ZERO,
            });
        }
        Ok(true)
    }

    fn most_fractional(&self, point: &DVector<f64>) -> Option<usize> {
        let prio = self.opts.branch_priority.as_deref();
        let mut best: Option<(usize, u32, f64)> = None;
        for &j in &self.problem.binaries {
            let frac = point[j].clamp(0.0, 1.0);
            let dist = frac.min(1.0 - frac);
            if dist <= lp::tol::INTEGRALITY {
                continue;
            }
            let class = prio.and_then(|p| p.get(j).copied()).unwrap_or(0);
            match best {
                Some((_, c, d)) if (c, -d) <= (class, -dist) => {}
                _ => best = Some((j, class, dist)),
            }
        }
        best.map(|(j, _, _)| j)
    }

    fn first_unfixed_binary(&self, node: &Node) -> Option<usize> {
        self.problem
            .binaries
            .iter()
            .copied()
            .find(|&j| node.upper[j] - node.lower[j] > 0.5)
    }

    fn branch(&mut self, node: &Node, var: usize, prefer_one: bool) {
        let mut mk = |fix: f64| -> Node {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[var] = fix;
            upper[var] = fix;
            let id = self.next_id;
            self.next_id += 1;
            Node {
                id,
                lower,
                upper,
                bound: node.bound,
            }
        };
        let first = mk(if prefer_one { 1.0 } else { 0.0 });
        let second = mk(if prefer_one { 0.0 } else { 1.0 });
        // the dive stack is LIFO: push the preferred child last
        self.push(second);
        self.push(first);
    }

    fn run(mut self) -> Result<MilpSolution, MilpError> {
        let root = Node {
            id: 0,
            lower: self.problem.lp.lower.clone(),
            upper: self.problem.lp.upper.clone(),
            bound: f64::INFINITY,
        };
        self.next_id = 1;
        self.push(root);

        while let Some(node) = self.pop() {
            if let Some(limit) = self.opts.node_limit {
                if self.nodes_processed >= limit {
                    let bound = self.open_bound().max(node.bound).max(
                        self.incumbent
                            .as_ref()
                            .map_or(f64::NEG_INFINITY, |i| i.value),
                    );
                    return Err(MilpError::NodeLimitExceeded {
                        incumbent: self.incumbent.map(|mut s| {
                            s.nodes = self.nodes_processed;
                            s.wall = self.start.elapsed();
                            Box::new(s)
                        }),
                        bound,
                        nodes: self.nodes_processed,
                    });
                }
            }
            self.nodes_processed += 1;

            if let Some(inc) = &self.incumbent {
                if node.bound <= inc.value + self.opts.gap_abs {
                    continue;
                }
            }

            let relax = solve_lp(&self.node_lp(&node))?;
            match relax.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    // rays live in the continuous part (binaries are bounded), so
                    // a fully fixed leaf with an unbounded relaxation settles it
                    match self.first_unfixed_binary(&node) {
                        Some(var) => self.branch(&node, var, true),
                        None => {
                            return Ok(MilpSolution {
                                status: MilpStatus::Unbounded,
                                value: f64::INFINITY,
                                assignment: DVector::zeros(self.problem.lp.num_vars()),
                                bound: f64::INFINITY,
                                nodes: self.nodes_processed,
                                wall: self.start.elapsed(),
                            })
                        }
                    }
                    continue;
                }
                LpStatus::Optimal => {}
            }
            let node = Node {
                bound: node.bound.min(relax.value),
                ..node
            };
            if let Some(inc) = &self.incumbent {
                if node.bound <= inc.value + self.opts.gap_abs {
                    continue;
                }
            }

            match self.most_fractional(&relax.point) {
                None => {
                    // integral within tolerance: round, re-verify, record
                    let accepted = self.try_incumbent(&relax.point)?;
                    if !accepted {
                        // rounding flipped feasibility; force exact decisions
                        if let Some(var) = self.first_unfixed_binary(&node) {
                            let prefer = relax.point[var] >= 0.5;
                            self.branch(&node, var, prefer);
                        }
                    }
                }
                Some(var) => {
                    let prefer = relax.point[var] >= 0.5;
                    self.branch(&node, var, prefer);
                }
            }
        }

        let wall = self.start.elapsed();
        match self.incumbent {
            Some(mut sol) => {
                sol.bound = sol.value;
                sol.nodes = self.nodes_processed;
                sol.wall = wall;
                Ok(sol)
            }
            None => Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                value: f64::NEG_INFINITY,
                assignment: DVector::zeros(self.problem.lp.num_vars()),
                bound: f64::NEG_INFINITY,
                nodes: self.nodes_processed,
                wall,
            }),
        }
    }
}
