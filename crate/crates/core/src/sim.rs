//! Ground-truth closed-loop simulation and brute-force oracles.
//!
//! The simulator is the reference semantics every mixed-integer encoding is
//! tested against. [`pattern_enum_reach`] additionally provides an exact
//! one-step support oracle at small scale by enumerating every (region,
//! activation pattern) combination as a plain LP.

use crate::geometry::{GeometryError, Polytope};
use crate::lp::{solve_lp, LpStatus, ProgramBuilder};
use crate::models::{DualModeController, MaxoutNet, ModelError, PwaSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial state outside the state constraints")]
    StartOutsideDomain,
    #[error("{0} region/activation combinations exceed the enumeration budget")]
    TooManyPatterns(usize),
    #[error("invalid oracle input: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
}

/// Which branch of the control law produced an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The network controller.
    Network,
    /// The local feedback of a dual-mode law.
    Local,
}

/// The controller driving a rollout.
#[derive(Clone, Copy)]
pub enum ControlLaw<'a> {
    Net(&'a MaxoutNet),
    DualMode(&'a DualModeController),
}

impl ControlLaw<'_> {
    fn eval(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Branch), ModelError> {
        match self {
            ControlLaw::Net(net) => Ok((net.eval(x), Branch::Network)),
            ControlLaw::DualMode(ctrl) => {
                let branch = if ctrl.in_switch_region(x) {
                    Branch::Local
                } else {
                    Branch::Network
                };
                Ok((ctrl.eval(x)?, branch))
            }
        }
    }
}

/// A simulated closed-loop run: `K+1` states, `K` inputs, and per-step the
/// active region index and controller branch.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub modes: Vec<(usize, Branch)>,
    /// True when the run stopped early because the state or input left its
    /// constraint set; the dynamics are undefined there.
    pub truncated: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("at least the initial state")
    }
}

/// Rolls the closed loop forward `steps` steps from `x0`.
///
/// Stops early (with `truncated = true`) as soon as the state leaves `X` or
/// the applied input leaves `U`; a coverage gap strictly inside `X x U`
/// surfaces as [`ModelError::NoRegion`] instead.
pub fn rollout(
    sys: &PwaSystem,
    law: ControlLaw<'_>,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<Trajectory, SimError> {
    if !sys.state_set().contains_point(x0, 1e-7) {
        return Err(SimError::StartOutsideDomain);
    }
    let mut traj = Trajectory {
        states: vec![x0.clone()],
        inputs: Vec::new(),
        modes: Vec::new(),
        truncated: false,
    };
    let mut x = x0.clone();
    for _ in 0..steps {
        if !sys.state_set().contains_point(&x, 1e-7) {
            traj.truncated = true;
            break;
        }
        let (u, branch) = law.eval(&x)?;
        if !sys.input_set().contains_point(&u, 1e-7) {
            traj.truncated = true;
            break;
        }
        let region = match sys.region_of(&x, &u) {
            Some(i) => i,
            None => {
                return Err(SimError::Model(ModelError::NoRegion {
                    violation: f64::NAN,
                }))
            }
        };
        let next = sys.step(&x, &u)?;
        traj.inputs.push(u);
        traj.modes.push((region, branch));
        traj.states.push(next.clone());
        x = next;
    }
    Ok(traj)
}

/// Exact one-step support oracle by exhaustive enumeration.
///
/// For every region and every full activation pattern of the network, the
/// closed-loop map restricted to that pattern is affine; maximizing
/// `v' x(1)` over the pattern's validity region is one LP in the initial
/// state. The maximum over all feasible combinations equals the one-step
/// support of the reachable set in direction `v`.
///
/// Returns `None` when no combination is feasible (empty initial set).
pub fn pattern_enum_reach(
    sys: &PwaSystem,
    net: &MaxoutNet,
    x0_set: &Polytope,
    v: &DVector<f64>,
) -> Result<Option<f64>, SimError> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if x0_set.dim() != n || v.len() != n {
        return Err(SimError::Validation("dimension mismatch".into()));
    }
    let mut combos = sys.region_count() as f64;
    for layer in net.hidden_layers() {
        combos *= (layer.channels as f64).powi(layer.width() as i32);
    }
    if combos > 1e5 {
        return Err(SimError::TooManyPatterns(combos as usize));
    }

    let layer_count = net.hidden_layers().len();
    let mut best: Option<f64> = None;

    // odometer over per-neuron channel choices, flattened across layers
    let neuron_counts: Vec<usize> = net.hidden_layers().iter().map(|l| l.width()).collect();
    let channel_counts: Vec<usize> = net.hidden_layers().iter().map(|l| l.channels).collect();
    let total_neurons: usize = neuron_counts.iter().sum();
    let mut choice = vec![0usize; total_neurons];

    loop {
        // compose the affine map q = D x + e through the chosen channels and
        // collect the pattern-consistency rows (over x)
        let mut d = DMatrix::<f64>::identity(n, n);
        let mut e = DVector::<f64>::zeros(n);
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut offset = 0usize;
        for (li, layer) in net.hidden_layers().iter().enumerate() {
            let width = neuron_counts[li];
            let p = channel_counts[li];
            let mut w_sel = DMatrix::zeros(width, layer.input_dim());
            let mut b_sel = DVector::zeros(width);
            for t in 0..width {
                let sel = choice[offset + t];
                let sel_row = t * p + sel;
                w_sel.row_mut(t).copy_from(&layer.weight.row(sel_row));
                b_sel[t] = layer.bias[sel_row];
                for c in 0..p {
                    if c == sel {
                        continue;
                    }
                    let row = t * p + c;
                    // (W_c - W_sel)(D x + e) <= b_sel - b_c
                    let diff = layer.weight.row(row) - layer.weight.row(sel_row);
                    let coeff = (&diff * &d).transpose();
                    let rhs = b_sel[t] - layer.bias[row] - (diff * &e)[0];
                    rows.push((coeff, rhs));
                }
            }
            e = &w_sel * e + b_sel;
            d = w_sel * d;
            offset += width;
        }
        let out = net.output_layer();
        let gain = &out.weight * &d; // u = gain x + g
        let g = &out.weight * &e + &out.bias;

        for region in sys.regions() {
            // one LP over the initial state
            let mut builder = ProgramBuilder::new();
            builder.add_free_vars(n);
            for i in 0..x0_set.num_rows() {
                let coeffs: Vec<(usize, f64)> =
                    (0..n).map(|j| (j, x0_set.normals()[(i, j)])).collect();
                builder.add_le(&coeffs, x0_set.offsets()[i]);
            }
            // (x, u(x)) must lie in the region cell
            let cell = &region.cell;
            for i in 0..cell.num_rows() {
                let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(n);
                let mut rhs = cell.offsets()[i];
                for j in 0..n {
                    let mut c = cell.normals()[(i, j)];
                    for uj in 0..m {
                        c += cell.normals()[(i, n + uj)] * gain[(uj, j)];
                    }
                    coeffs.push((j, c));
                }
                for uj in 0..m {
                    rhs -= cell.normals()[(i, n + uj)] * g[uj];
                }
                builder.add_le(&coeffs, rhs);
            }
            for (coeff, rhs) in &rows {
                let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, coeff[j])).collect();
                builder.add_le(&coeffs, *rhs);
            }
            // objective v'(A x + B u(x) + p)
            let closed = &region.a + &region.b * &gain;
            let drift = &region.b * &g + &region.p;
            let obj = closed.tr_mul(v);
            for j in 0..n {
                builder.set_objective(j, obj[j]);
            }
            let constant = v.dot(&drift);
            let r = solve_lp(&builder.build())?;
            match r.status {
                LpStatus::Optimal => {
                    let val = r.value + constant;
                    best = Some(best.map_or(val, |b: f64| b.max(val)));
                }
                LpStatus::Infeasible => {}
                LpStatus::Unbounded => {
                    return Err(SimError::Validation(
                        "unbounded pattern LP; initial set must be bounded".into(),
                    ))
                }
            }
        }

        // advance the odometer
        let mut pos = 0usize;
        let mut li = 0usize;
        let mut neuron_base = 0usize;
        let done = loop {
            if pos == total_neurons {
                break true;
            }
            while pos - neuron_base >= neuron_counts[li] {
                neuron_base += neuron_counts[li];
                li += 1;
            }
            choice[pos] += 1;
            if choice[pos] < channel_counts[li] {
                break false;
            }
            choice[pos] = 0;
            pos += 1;
        };
        let _ = layer_count;
        if done {
            break;
        }
    }
    Ok(best)
}

/// Escapee found by [`grid_audit`]: a sampled state and its one-step image.
#[derive(Debug, Clone)]
pub struct Escapee {
    pub from: DVector<f64>,
    pub to: Option<DVector<f64>>,
}

/// Result of a sampling falsification run against a claimed invariant set.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub tested: usize,
    pub escapees: Vec<Escapee>,
    pub seed: u64,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.escapees.is_empty()
    }
}

/// Samples states in `set`, maps each one closed-loop step, and reports every
/// sample whose image leaves the set (or whose input leaves `U`).
///
/// Rejection sampling over the bounding box with a deterministic seeded
/// generator; an empty set yields an empty report.
pub fn grid_audit(
    sys: &PwaSystem,
    net: &MaxoutNet,
    set: &Polytope,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, SimError> {
    let mut report = AuditReport {
        tested: 0,
        escapees: Vec::new(),
        seed,
    };
    if set.is_empty()? {
        return Ok(report);
    }
    let (lo, hi) = set.bounding_box()?;
    let n = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    let max_attempts = samples.saturating_mul(200).max(10_000);
    while report.tested < samples && attempts < max_attempts {
        attempts += 1;
        let x = DVector::from_fn(n, |j, _| rng.random_range(lo[j]..=hi[j]));
        if !set.contains_point(&x, 1e-9) {
            continue;
        }
        report.tested += 1;
        let u = net.eval(&x);
        if !sys.input_set().contains_point(&u, 1e-7) {
            report.escapees.push(Escapee { from: x, to: None });
            continue;
        }
        let next = sys.step(&x, &u)?;
        if !set.contains_point(&next, crate::geometry::DEFAULT_SET_TOL) {
            report.escapees.push(Escapee {
                from: x,
                to: Some(next),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_vec(entries.to_vec())
    }

    #[test]
    fn zero_start_stays_zero() {
        let (sys, net) = fixtures::contraction_1d();
        let traj = rollout(&sys, ControlLaw::Net(&net), &v(&[0.0]), 10).unwrap();
        assert!(!traj.truncated);
        assert_eq!(traj.states.len(), 11);
        for x in &traj.states {
            assert_eq!(x[0], 0.0);
        }
    }

    #[test]
    fn case_study_two_steps_by_hand() {
        let sys = fixtures::case_study_system();
        let net = crate::models::MaxoutNet::zero(2, 1);
        let traj = rollout(&sys, ControlLaw::Net(&net), &v(&[1.0, 1.0]), 2).unwrap();
        assert!(!traj.truncated);
        // x(1) = A1 (1,1) in the first quadrant cell
        assert!((traj.states[1][0] + 0.501).abs() < 1e-12);
        assert!((traj.states[1][1] - 0.202).abs() < 1e-12);
        assert_eq!(traj.modes[0].0, 0);
        // x(1) has x1 < 0, x2 > 0: fourth cell (index 3), then x(2) = A4 x(1)
        assert_eq!(traj.modes[1].0, 3);
        assert!((traj.states[2][0] - 0.14111).abs() < 1e-5);
        assert!((traj.states[2][1] + 0.325016).abs() < 1e-5);
    }

    #[test]
    fn truncates_on_state_escape() {
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        // the corner (-10, -10) leaves |x2| <= 10 in one step
        let traj = rollout(&sys, ControlLaw::Net(&net), &v(&[-10.0, -10.0]), 5).unwrap();
        assert!(traj.truncated);
        assert_eq!(traj.steps(), 1);
        assert!(traj.final_state()[1] < -10.0);
    }

    #[test]
    fn dual_mode_branch_switch_matches_membership() {
        let ((sys, _), ctrl) = fixtures::dual_mode_1d();
        let traj = rollout(&sys, ControlLaw::DualMode(&ctrl), &v(&[1.9]), 40).unwrap();
        assert!(!traj.truncated);
        for (k, (_, branch)) in traj.modes.iter().enumerate() {
            let inside = ctrl.in_switch_region(&traj.states[k]);
            assert_eq!(*branch == Branch::Local, inside, "step {k}");
        }
        // eventually the local loop x+ = 0.1 x takes over and contracts hard
        assert!(traj.final_state()[0].abs() < 1e-10);
    }

    #[test]
    fn pattern_oracle_absolute_value_net() {
        // plant x+ = 0.5x + u with u = |x| (via maxout), x0 in [-1, 1]:
        // two patterns; max over x of 0.5x + |x| = 1.5 at x = 1
        let (sys, _) = fixtures::contraction_1d();
        let layer = crate::models::MaxoutLayer {
            weight: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            bias: DVector::zeros(2),
            channels: 2,
        };
        let abs_net = crate::models::MaxoutNet::new(
            vec![layer],
            crate::models::AffineMap {
                weight: DMatrix::identity(1, 1),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        let got = pattern_enum_reach(&sys, &abs_net, &Polytope::centered_box(1, 1.0), &v(&[1.0]))
            .unwrap()
            .unwrap();
        assert!((got - 1.5).abs() < 1e-7);
        // minimum direction: x+ = 0.5x + |x| >= 0 everywhere, so max of -x+ is 0
        let got = pattern_enum_reach(&sys, &abs_net, &Polytope::centered_box(1, 1.0), &v(&[-1.0]))
            .unwrap()
            .unwrap();
        assert!(got.abs() < 1e-7);
    }

    #[test]
    fn pattern_oracle_affine_net_single_pattern() {
        // affine controller u = 0.3 x: one pattern, support of (0.8 x) over [-1,1]
        let (sys, _) = fixtures::contraction_1d();
        let net = crate::models::MaxoutNet::new(
            Vec::new(),
            crate::models::AffineMap {
                weight: DMatrix::from_element(1, 1, 0.3),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        let got = pattern_enum_reach(&sys, &net, &Polytope::centered_box(1, 1.0), &v(&[1.0]))
            .unwrap()
            .unwrap();
        assert!((got - 0.8).abs() < 1e-8);
    }

    #[test]
    fn pattern_budget_enforced() {
        let (sys, _) = fixtures::contraction_1d();
        // 3 channels, 12 neurons, 2 layers: 3^24 patterns
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layers = Vec::new();
        for _ in 0..2 {
            layers.push(crate::models::MaxoutLayer {
                weight: DMatrix::from_fn(36, if layers.is_empty() { 1 } else { 12 }, |_, _| {
                    rng.random_range(-1.0..1.0)
                }),
                bias: DVector::zeros(36),
                channels: 3,
            });
        }
        let net = crate::models::MaxoutNet::new(
            layers,
            crate::models::AffineMap {
                weight: DMatrix::from_fn(1, 12, |_, _| 0.1),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        assert!(matches!(
            pattern_enum_reach(&sys, &net, &Polytope::centered_box(1, 1.0), &v(&[1.0])),
            Err(SimError::TooManyPatterns(_))
        ));
    }

    #[test]
    fn grid_audit_finds_escapees_exactly_when_not_invariant() {
        let (sys, net) = fixtures::contraction_1d();
        let report = grid_audit(&sys, &net, &Polytope::centered_box(1, 1.0), 2000, 7).unwrap();
        assert!(report.clean(), "contraction box is invariant");
        assert!(report.tested >= 1000);

        let (sys, net) = fixtures::divergent_1d();
        let report = grid_audit(&sys, &net, &Polytope::centered_box(1, 1.0), 2000, 7).unwrap();
        assert!(!report.clean(), "doubling map must escape");

        let empty = Polytope::empty(1);
        let report = grid_audit(&sys, &net, &empty, 2000, 7).unwrap();
        assert_eq!(report.tested, 0);
        assert!(report.clean());
    }
}
