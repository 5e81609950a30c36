//! Mixed-integer linear encodings of the closed loop.
//!
//! Three constraint blocks assemble the K-step closed-loop feasibility
//! system: region selection (one indicator per region cell and step, big-M
//! relaxed membership rows), the PWA step (per-region successor copies that
//! collapse onto the selected dynamics), and the maxout network (one
//! indicator per affine channel; unconditional lower bounds pin the neuron
//! output from below, and the selected channel's relaxed upper bound pins it
//! from above).
//!
//! Every big-M constant is derived automatically by interval arithmetic over
//! the bounding box of `X x U`, propagated layerwise through the network, so
//! no relaxed constraint can ever bind on a feasible point. Feasible
//! assignments of the assembled system are exactly the K-step closed-loop
//! trajectories.

use crate::geometry::{GeometryError, Polytope};
use crate::lp::{ProgramBuilder, RowSense};
use crate::milp::{MilpError, MilpProblem};
use crate::models::{MaxoutNet, ModelError, PwaSystem};
use crate::sim::Trajectory;
use nalgebra::DVector;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("state or input set is unbounded; big-M derivation needs bounded domains")]
    UnboundedDomain,
    #[error("encoding dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("trajectory does not fit the encoding: {0}")]
    TrajectoryMismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// How a [`BigMConfig`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BigMMode {
    Auto,
    Manual,
}

/// Big-M constants and interval bounds backing the encodings.
///
/// Auto-derived configurations are certified by construction: each constant
/// is an interval-arithmetic upper bound of the worst case of its relaxed
/// expression over the bounding box of `X x U`.
#[derive(Debug, Clone)]
pub struct BigMConfig {
    /// Per region, per cell row: slack for the membership rows.
    pub region_slack: Vec<DVector<f64>>,
    /// Slack for the successor rows, valid for every region's dynamics.
    pub dynamics_slack: f64,
    /// Per hidden layer: preactivation interval bounds (one per channel row).
    pub pre_lo: Vec<DVector<f64>>,
    pub pre_hi: Vec<DVector<f64>>,
    /// Per hidden layer: neuron output interval bounds.
    pub out_lo: Vec<DVector<f64>>,
    pub out_hi: Vec<DVector<f64>>,
    /// Per hidden layer: scalar slack for the channel upper-bound rows.
    pub layer_slack: Vec<f64>,
    /// Bounding boxes the constants were derived against.
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    /// Network output interval (before intersecting with the input set box).
    pub nn_out_lo: DVector<f64>,
    pub nn_out_hi: DVector<f64>,
    pub mode: BigMMode,
}

/// Upper bound of `c' z` over the box `[lo, hi]`.
fn interval_sup(coeffs: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    coeffs.map(|(c, lo, hi)| (c * lo).max(c * hi)).sum()
}

/// Lower bound of `c' z` over the box `[lo, hi]`.
fn interval_inf(coeffs: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    coeffs.map(|(c, lo, hi)| (c * lo).min(c * hi)).sum()
}

const SLACK_PAD: f64 = 1e-9;

/// Exact minimum of `max_j (W_j y + b_j)` over the box `[lo, hi]`: minimize
/// an epigraph variable above every channel of the neuron's group.
fn neuron_min_lp(
    layer: &crate::models::MaxoutLayer,
    neuron: usize,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Option<f64> {
    use crate::lp::{solve_lp, LpStatus};
    let p = layer.channels;
    let dim = layer.input_dim();
    let mut b = ProgramBuilder::new();
    for j in 0..dim {
        b.add_var(lo[j], hi[j]);
    }
    let t = b.add_var(f64::NEG_INFINITY, f64::INFINITY);
    b.set_objective(t, -1.0); // maximize -t = minimize t
    for c in 0..p {
        let row = neuron * p + c;
        let mut coeffs: Vec<(usize, f64)> = (0..dim)
            .filter(|&j| layer.weight[(row, j)] != 0.0)
            .map(|j| (j, layer.weight[(row, j)]))
            .collect();
        coeffs.push((t, -1.0));
        b.add_le(&coeffs, -layer.bias[row]);
    }
    match solve_lp(&b.build()) {
        Ok(r) if r.status == LpStatus::Optimal => Some(-r.value),
        _ => None,
    }
}

/// Derives all big-M constants for a plant/controller pair by interval
/// arithmetic over the bounding box of `X x U`, propagated layerwise through
/// the network.
pub fn derive_big_m(sys: &PwaSystem, net: &MaxoutNet) -> Result<BigMConfig, EncodeError> {
    if net.input_dim() != sys.state_dim() || net.output_dim() != sys.input_dim() {
        return Err(EncodeError::DimensionMismatch(format!(
            "network {}->{} vs plant state {} input {}",
            net.input_dim(),
            net.output_dim(),
            sys.state_dim(),
            sys.input_dim()
        )));
    }
    let (x_lo, x_hi) = sys.state_set().bounding_box().map_err(|e| match e {
        GeometryError::UnboundedSet => EncodeError::UnboundedDomain,
        other => EncodeError::Geometry(other),
    })?;
    let (u_lo, u_hi) = sys.input_set().bounding_box().map_err(|e| match e {
        GeometryError::UnboundedSet => EncodeError::UnboundedDomain,
        other => EncodeError::Geometry(other),
    })?;
    let n = sys.state_dim();
    let m = sys.input_dim();

    // membership rows: slack covers the worst violation over the whole box
    let mut region_slack = Vec::with_capacity(sys.region_count());
    for region in sys.regions() {
        let cell = &region.cell;
        let mut slack = DVector::zeros(cell.num_rows());
        for r in 0..cell.num_rows() {
            let sup = interval_sup((0..n + m).map(|j| {
                let c = cell.normals()[(r, j)];
                if j < n {
                    (c, x_lo[j], x_hi[j])
                } else {
                    (c, u_lo[j - n], u_hi[j - n])
                }
            }));
            let needed = sup - cell.offsets()[r];
            // rows that cannot be violated anywhere on the domain box need no
            // indicator term at all; zero marks them for hard emission, and
            // tiny positive slacks are floored clear of the pivot tolerance
            slack[r] = if needed <= 0.0 {
                0.0
            } else {
                (needed * (1.0 + SLACK_PAD) + SLACK_PAD).max(1e-6)
            };
        }
        region_slack.push(slack);
    }

    // successor rows: one constant covering |A x + B u + p| for every region,
    // plus the state box radius on top
    let mut successor_mag: f64 = 0.0;
    for region in sys.regions() {
        for d in 0..n {
            let x_part = |j: usize| (region.a[(d, j)], x_lo[j], x_hi[j]);
            let u_part = |j: usize| (region.b[(d, j)], u_lo[j], u_hi[j]);
            let hi = interval_sup((0..n).map(x_part).chain((0..m).map(u_part))) + region.p[d];
            let lo = interval_inf((0..n).map(x_part).chain((0..m).map(u_part))) + region.p[d];
            successor_mag = successor_mag.max(hi.abs()).max(lo.abs());
        }
    }
    let state_radius = (0..n).fold(0.0f64, |a, j| a.max(x_lo[j].abs()).max(x_hi[j].abs()));
    let dynamics_slack = (successor_mag + state_radius) * (1.0 + SLACK_PAD) + SLACK_PAD;

    // layerwise interval propagation through the network
    let mut pre_lo = Vec::new();
    let mut pre_hi = Vec::new();
    let mut out_lo = Vec::new();
    let mut out_hi = Vec::new();
    let mut layer_slack = Vec::new();
    let mut cur_lo = x_lo.clone();
    let mut cur_hi = x_hi.clone();
    for layer in net.hidden_layers() {
        let rows = layer.weight.nrows();
        let mut zlo = DVector::zeros(rows);
        let mut zhi = DVector::zeros(rows);
        for r in 0..rows {
            let parts = |j: usize| (layer.weight[(r, j)], cur_lo[j], cur_hi[j]);
            zlo[r] = interval_inf((0..layer.input_dim()).map(parts)) + layer.bias[r];
            zhi[r] = interval_sup((0..layer.input_dim()).map(parts)) + layer.bias[r];
        }
        let w = layer.width();
        let p = layer.channels;
        let mut olo = DVector::zeros(w);
        let mut ohi = DVector::zeros(w);
        let mut slack: f64 = 0.0;
        for t in 0..w {
            let group = t * p..(t + 1) * p;
            // the neuron output is max over the channels; its maximum over
            // the box is the largest channel sup, and its minimum is exact
            // via one small LP (minimize an epigraph variable over the box)
            olo[t] = neuron_min_lp(layer, t, &cur_lo, &cur_hi).unwrap_or_else(|| {
                group
                    .clone()
                    .map(|r| zlo[r])
                    .fold(f64::NEG_INFINITY, f64::max)
            });
            ohi[t] = group
                .clone()
                .map(|r| zhi[r])
                .fold(f64::NEG_INFINITY, f64::max);
            let min_lo = group.clone().map(|r| zlo[r]).fold(f64::INFINITY, f64::min);
            slack = slack.max(ohi[t] - min_lo);
        }
        layer_slack.push((slack.max(0.0) * (1.0 + SLACK_PAD) + SLACK_PAD).max(1e-6));
        pre_lo.push(zlo);
        pre_hi.push(zhi);
        out_lo.push(olo.clone());
        out_hi.push(ohi.clone());
        cur_lo = olo;
        cur_hi = ohi;
    }
    let out = net.output_layer();
    let mut nn_out_lo = DVector::zeros(m);
    let mut nn_out_hi = DVector::zeros(m);
    for d in 0..m {
        let parts = |j: usize| (out.weight[(d, j)], cur_lo[j], cur_hi[j]);
        nn_out_lo[d] = interval_inf((0..out.weight.ncols()).map(parts)) + out.bias[d];
        nn_out_hi[d] = interval_sup((0..out.weight.ncols()).map(parts)) + out.bias[d];
    }

    Ok(BigMConfig {
        region_slack,
        dynamics_slack,
        pre_lo,
        pre_hi,
        out_lo,
        out_hi,
        layer_slack,
        x_lo,
        x_hi,
        u_lo,
        u_hi,
        nn_out_lo,
        nn_out_hi,
        mode: BigMMode::Auto,
    })
}

/// Flat variable layout of one closed-loop encoding.
///
/// Order: states `x(0..=K)`, inputs `u(0..K)`, successor copies
/// `xt(1..=K, region)`, hidden-layer outputs `q(0..K, layer)`, region
/// indicators `gamma(0..K, region)`, channel indicators
/// `delta(0..K, layer, row)`. The maps are total and pairwise disjoint.
#[derive(Debug, Clone)]
pub struct VarIndex {
    pub state_dim: usize,
    pub input_dim: usize,
    pub region_count: usize,
    pub horizon: usize,
    layer_widths: Vec<usize>,
    layer_rows: Vec<usize>,
    x_off: usize,
    u_off: usize,
    xt_off: usize,
    q_off: usize,
    gamma_off: usize,
    delta_off: usize,
    q_stride: usize,
    delta_stride: usize,
    q_prefix: Vec<usize>,
    delta_prefix: Vec<usize>,
    pub total: usize,
}

impl VarIndex {
    fn layout(sys: &PwaSystem, net: &MaxoutNet, horizon: usize) -> VarIndex {
        let n = sys.state_dim();
        let m = sys.input_dim();
        let s = sys.region_count();
        let layer_widths: Vec<usize> = net.hidden_layers().iter().map(|l| l.width()).collect();
        let layer_rows: Vec<usize> = net
            .hidden_layers()
            .iter()
            .map(|l| l.weight.nrows())
            .collect();
        let q_stride: usize = layer_widths.iter().sum();
        let delta_stride: usize = layer_rows.iter().sum();
        let mut q_prefix = Vec::with_capacity(layer_widths.len());
        let mut acc = 0;
        for w in &layer_widths {
            q_prefix.push(acc);
            acc += w;
        }
        let mut delta_prefix = Vec::with_capacity(layer_rows.len());
        let mut acc = 0;
        for r in &layer_rows {
            delta_prefix.push(acc);
            acc += r;
        }
        let x_off = 0;
        let u_off = x_off + (horizon + 1) * n;
        let xt_off = u_off + horizon * m;
        let q_off = xt_off + horizon * s * n;
        let gamma_off = q_off + horizon * q_stride;
        let delta_off = gamma_off + horizon * s;
        let total = delta_off + horizon * delta_stride;
        VarIndex {
            state_dim: n,
            input_dim: m,
            region_count: s,
            horizon,
            layer_widths,
            layer_rows,
            x_off,
            u_off,
            xt_off,
            q_off,
            gamma_off,
            delta_off,
            q_stride,
            delta_stride,
            q_prefix,
            delta_prefix,
            total,
        }
    }

    pub fn x(&self, k: usize, d: usize) -> usize {
        debug_assert!(k <= self.horizon && d < self.state_dim);
        self.x_off + k * self.state_dim + d
    }

    pub fn u(&self, k: usize, d: usize) -> usize {
        debug_assert!(k < self.horizon && d < self.input_dim);
        self.u_off + k * self.input_dim + d
    }

    /// Successor copy for step `k` (1-based: the copy summed into `x(k)`).
    pub fn xt(&self, k: usize, region: usize, d: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.horizon);
        self.xt_off + ((k - 1) * self.region_count + region) * self.state_dim + d
    }

    pub fn q(&self, k: usize, layer: usize, neuron: usize) -> usize {
        self.q_off + k * self.q_stride + self.q_prefix[layer] + neuron
    }

    pub fn gamma(&self, k: usize, region: usize) -> usize {
        self.gamma_off + k * self.region_count + region
    }

    pub fn delta(&self, k: usize, layer: usize, row: usize) -> usize {
        self.delta_off + k * self.delta_stride + self.delta_prefix[layer] + row
    }

    pub fn binaries(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.horizon * (self.region_count + self.delta_stride));
        for k in 0..self.horizon {
            for i in 0..self.region_count {
                out.push(self.gamma(k, i));
            }
        }
        for k in 0..self.horizon {
            for (layer, rows) in self.layer_rows.iter().enumerate() {
                for j in 0..*rows {
                    out.push(self.delta(k, layer, j));
                }
            }
        }
        out
    }

    /// Binary variables per step: one per region plus one per channel row.
    pub fn binaries_per_step(&self) -> usize {
        self.region_count + self.delta_stride
    }
}

/// A fully assembled closed-loop encoding.
#[derive(Debug, Clone)]
pub struct EncodedSystem {
    pub problem: MilpProblem,
    pub index: VarIndex,
    /// Per-variable branching classes: indicators of step `k` carry class
    /// `k`, so feasibility dives settle the trajectory in time order.
    pub branch_priority: Vec<u32>,
}

fn allocate_closed_loop(
    builder: &mut ProgramBuilder,
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    horizon: usize,
) -> VarIndex {
    let idx = VarIndex::layout(sys, net, horizon);
    let n = idx.state_dim;
    let m = idx.input_dim;
    // x(k): inside the state box for k < K, successor-bounded at k = K
    for k in 0..=horizon {
        for d in 0..n {
            let var = builder.add_var(
                if k < horizon {
                    cfg.x_lo[d]
                } else {
                    -cfg.dynamics_slack
                },
                if k < horizon {
                    cfg.x_hi[d]
                } else {
                    cfg.dynamics_slack
                },
            );
            debug_assert_eq!(var, idx.x(k, d));
        }
    }
    // u(k): input box intersected with the network output interval
    for k in 0..horizon {
        for d in 0..m {
            let var = builder.add_var(
                cfg.u_lo[d].max(cfg.nn_out_lo[d]),
                cfg.u_hi[d].min(cfg.nn_out_hi[d]),
            );
            debug_assert_eq!(var, idx.u(k, d));
        }
    }
    // successor copies: zero or the active successor
    for k in 1..=horizon {
        for i in 0..idx.region_count {
            for d in 0..n {
                let var = builder.add_var(-cfg.dynamics_slack, cfg.dynamics_slack);
                debug_assert_eq!(var, idx.xt(k, i, d));
            }
        }
    }
    // hidden-layer outputs within their propagated intervals
    for k in 0..horizon {
        for (layer, width) in idx.layer_widths.iter().enumerate() {
            for t in 0..*width {
                let var = builder.add_var(cfg.out_lo[layer][t], cfg.out_hi[layer][t]);
                debug_assert_eq!(var, idx.q(k, layer, t));
            }
        }
    }
    for k in 0..horizon {
        for i in 0..idx.region_count {
            let var = builder.add_var(0.0, 1.0);
            debug_assert_eq!(var, idx.gamma(k, i));
        }
    }
    for k in 0..horizon {
        for (layer, rows) in idx.layer_rows.iter().enumerate() {
            for j in 0..*rows {
                let var = builder.add_var(0.0, 1.0);
                debug_assert_eq!(var, idx.delta(k, layer, j));
            }
        }
    }
    debug_assert_eq!(builder.num_vars(), idx.total);
    idx
}

/// Region-membership rows with indicator relaxation, plus the one-region-
/// per-step selection row.
pub fn add_region_selection_block(
    builder: &mut ProgramBuilder,
    idx: &VarIndex,
    sys: &PwaSystem,
    cfg: &BigMConfig,
    k: usize,
) {
    let n = idx.state_dim;
    let m = idx.input_dim;
    for (i, region) in sys.regions().iter().enumerate() {
        let cell = &region.cell;
        for r in 0..cell.num_rows() {
            let slack = cfg.region_slack[i][r];
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(n + m + 1);
            for j in 0..n {
                let c = cell.normals()[(r, j)];
                if c != 0.0 {
                    coeffs.push((idx.x(k, j), c));
                }
            }
            for j in 0..m {
                let c = cell.normals()[(r, n + j)];
                if c != 0.0 {
                    coeffs.push((idx.u(k, j), c));
                }
            }
            if slack > 0.0 {
                coeffs.push((idx.gamma(k, i), slack));
            }
            builder.add_le(&coeffs, cell.offsets()[r] + slack);
        }
    }
    let ones: Vec<(usize, f64)> = (0..idx.region_count)
        .map(|i| (idx.gamma(k, i), 1.0))
        .collect();
    builder.add_eq(&ones, 1.0);
}

/// Successor rows: each region's copy matches its dynamics when selected, is
/// pinned to zero otherwise, and the copies sum to the next state.
pub fn add_pwa_step_block(
    builder: &mut ProgramBuilder,
    idx: &VarIndex,
    sys: &PwaSystem,
    cfg: &BigMConfig,
    k: usize,
) {
    let n = idx.state_dim;
    let m = idx.input_dim;
    let big = cfg.dynamics_slack;
    for (i, region) in sys.regions().iter().enumerate() {
        for d in 0..n {
            let mut up: Vec<(usize, f64)> = Vec::with_capacity(n + m + 2);
            let mut lo: Vec<(usize, f64)> = Vec::with_capacity(n + m + 2);
            for j in 0..n {
                let a = region.a[(d, j)];
                if a != 0.0 {
                    up.push((idx.x(k, j), a));
                    lo.push((idx.x(k, j), -a));
                }
            }
            for j in 0..m {
                let b = region.b[(d, j)];
                if b != 0.0 {
                    up.push((idx.u(k, j), b));
                    lo.push((idx.u(k, j), -b));
                }
            }
            let xt = idx.xt(k + 1, i, d);
            up.push((xt, -1.0));
            lo.push((xt, 1.0));
            up.push((idx.gamma(k, i), big));
            lo.push((idx.gamma(k, i), big));
            builder.add_le(&up, big - region.p[d]);
            builder.add_le(&lo, big + region.p[d]);
            // copy vanishes when the region is inactive
            builder.add_le(&[(xt, 1.0), (idx.gamma(k, i), -big)], 0.0);
            builder.add_le(&[(xt, -1.0), (idx.gamma(k, i), -big)], 0.0);
        }
    }
    for d in 0..n {
        let mut sum: Vec<(usize, f64)> = (0..idx.region_count)
            .map(|i| (idx.xt(k + 1, i, d), 1.0))
            .collect();
        sum.push((idx.x(k + 1, d), -1.0));
        builder.add_eq(&sum, 0.0);
    }
}

/// Hidden-layer rows for one step: per neuron, unconditional lower bounds
/// against every channel, indicator-relaxed upper bounds, and the
/// one-channel-per-neuron selection row.
pub fn add_maxout_block(
    builder: &mut ProgramBuilder,
    idx: &VarIndex,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    k: usize,
) {
    for (layer_i, layer) in net.hidden_layers().iter().enumerate() {
        let p = layer.channels;
        let slack = cfg.layer_slack[layer_i];
        let prev_dim = layer.input_dim();
        let prev_var = |j: usize| -> usize {
            if layer_i == 0 {
                idx.x(k, j)
            } else {
                idx.q(k, layer_i - 1, j)
            }
        };
        for t in 0..layer.width() {
            let q_var = idx.q(k, layer_i, t);
            for c in 0..p {
                let row = t * p + c;
                // q >= W_row qprev + b_row
                let mut low: Vec<(usize, f64)> = Vec::with_capacity(prev_dim + 1);
                for j in 0..prev_dim {
                    let w = layer.weight[(row, j)];
                    if w != 0.0 {
                        low.push((prev_var(j), w));
                    }
                }
                low.push((q_var, -1.0));
                builder.add_le(&low, -layer.bias[row]);
                // q <= W_row qprev + b_row + slack (1 - delta_row)
                let mut high: Vec<(usize, f64)> = Vec::with_capacity(prev_dim + 2);
                for j in 0..prev_dim {
                    let w = layer.weight[(row, j)];
                    if w != 0.0 {
                        high.push((prev_var(j), -w));
                    }
                }
                high.push((q_var, 1.0));
                high.push((idx.delta(k, layer_i, row), slack));
                builder.add_le(&high, layer.bias[row] + slack);
            }
            let sel: Vec<(usize, f64)> = (0..p)
                .map(|c| (idx.delta(k, layer_i, t * p + c), 1.0))
                .collect();
            builder.add_eq(&sel, 1.0);
        }
    }
}

/// The output glue `u(k) = W_out q_last(k) + b_out`.
pub fn add_output_rows(builder: &mut ProgramBuilder, idx: &VarIndex, net: &MaxoutNet, k: usize) {
    let out = net.output_layer();
    let last = net.hidden_layers().len();
    for d in 0..idx.input_dim {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(out.weight.ncols() + 1);
        for j in 0..out.weight.ncols() {
            let w = out.weight[(d, j)];
            if w != 0.0 {
                let var = if last == 0 {
                    idx.x(k, j)
                } else {
                    idx.q(k, last - 1, j)
                };
                row.push((var, w));
            }
        }
        row.push((idx.u(k, d), -1.0));
        builder.add_eq(&row, -out.bias[d]);
    }
}

/// Assembles the K-step closed-loop feasibility system with `x(0)` confined
/// to `x0_set`. Feasible assignments correspond exactly to K-step
/// closed-loop trajectories starting in `x0_set`.
pub fn encode_closed_loop(
    sys: &PwaSystem,
    net: &MaxoutNet,
    cfg: &BigMConfig,
    horizon: usize,
    x0_set: &Polytope,
) -> Result<EncodedSystem, EncodeError> {
    if horizon == 0 {
        return Err(EncodeError::EmptyHorizon);
    }
    if x0_set.dim() != sys.state_dim() {
        return Err(EncodeError::DimensionMismatch(format!(
            "initial set dimension {} vs state dimension {}",
            x0_set.dim(),
            sys.state_dim()
        )));
    }
    if net.input_dim() != sys.state_dim() || net.output_dim() != sys.input_dim() {
        return Err(EncodeError::DimensionMismatch(
            "network does not match the plant".into(),
        ));
    }
    let mut builder = ProgramBuilder::new();
    let idx = allocate_closed_loop(&mut builder, sys, net, cfg, horizon);
    for k in 0..horizon {
        add_region_selection_block(&mut builder, &idx, sys, cfg, k);
        add_pwa_step_block(&mut builder, &idx, sys, cfg, k);
        add_maxout_block(&mut builder, &idx, net, cfg, k);
        add_output_rows(&mut builder, &idx, net, k);
    }
    for r in 0..x0_set.num_rows() {
        let coeffs: Vec<(usize, f64)> = (0..sys.state_dim())
            .map(|j| (idx.x(0, j), x0_set.normals()[(r, j)]))
            .collect();
        builder.add_le(&coeffs, x0_set.offsets()[r]);
    }
    let binaries = idx.binaries();
    let mut branch_priority = vec![0u32; idx.total];
    for k in 0..horizon {
        for i in 0..idx.region_count {
            branch_priority[idx.gamma(k, i)] = k as u32;
        }
        for (layer, rows) in idx.layer_rows.iter().enumerate() {
            for j in 0..*rows {
                branch_priority[idx.delta(k, layer, j)] = k as u32;
            }
        }
    }
    let problem = MilpProblem::new(builder.build(), binaries)?;
    Ok(EncodedSystem {
        problem,
        index: idx,
        branch_priority,
    })
}

impl EncodedSystem {
    /// Solver options carrying this encoding's branching priorities.
    pub fn milp_options(&self) -> crate::milp::MilpOptions {
        crate::milp::MilpOptions {
            branch_priority: Some(self.branch_priority.clone()),
            ..crate::milp::MilpOptions::default()
        }
    }

    /// Completes a simulated trajectory into a full assignment of the
    /// encoding: continuous variables from the rollout, indicators inferred
    /// from the active regions and channel argmaxes.
    pub fn assignment_from_trajectory(
        &self,
        sys: &PwaSystem,
        net: &MaxoutNet,
        traj: &Trajectory,
    ) -> Result<DVector<f64>, EncodeError> {
        let idx = &self.index;
        if traj.steps() < idx.horizon || traj.truncated && traj.steps() < idx.horizon {
            return Err(EncodeError::TrajectoryMismatch(format!(
                "trajectory has {} steps, encoding needs {}",
                traj.steps(),
                idx.horizon
            )));
        }
        let mut z = DVector::zeros(idx.total);
        for k in 0..=idx.horizon {
            for d in 0..idx.state_dim {
                z[idx.x(k, d)] = traj.states[k][d];
            }
        }
        for k in 0..idx.horizon {
            for d in 0..idx.input_dim {
                z[idx.u(k, d)] = traj.inputs[k][d];
            }
            let region = traj.modes[k].0;
            z[idx.gamma(k, region)] = 1.0;
            for d in 0..idx.state_dim {
                z[idx.xt(k + 1, region, d)] = traj.states[k + 1][d];
            }
            // hidden-layer values and channel argmax indicators
            let mut qprev = traj.states[k].clone();
            for (layer_i, layer) in net.hidden_layers().iter().enumerate() {
                let zpre = &layer.weight * &qprev + &layer.bias;
                let p = layer.channels;
                let mut qcur = DVector::zeros(layer.width());
                for t in 0..layer.width() {
                    let mut best_c = 0;
                    let mut best = zpre[t * p];
                    for c in 1..p {
                        if zpre[t * p + c] > best {
                            best = zpre[t * p + c];
                            best_c = c;
                        }
                    }
                    qcur[t] = best;
                    z[idx.q(k, layer_i, t)] = best;
                    z[idx.delta(k, layer_i, t * p + best_c)] = 1.0;
                }
                qprev = qcur;
            }
        }
        let _ = sys;
        Ok(z)
    }

    /// Worst constraint or bound violation of an assignment.
    pub fn violation(&self, assignment: &DVector<f64>) -> f64 {
        let lp = &self.problem.lp;
        let ax = &lp.rows * assignment;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..lp.num_rows() {
            let v = match lp.senses[i] {
                RowSense::Le => ax[i] - lp.rhs[i],
                RowSense::Eq => (ax[i] - lp.rhs[i]).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..lp.num_vars() {
            worst = worst.max(lp.lower[j] - assignment[j]);
            worst = worst.max(assignment[j] - lp.upper[j]);
        }
        worst
    }
}

/// Variable layout of a network-only encoding (no plant dynamics).
#[derive(Debug, Clone)]
pub struct NnIndex {
    pub input_dim: usize,
    pub output_dim: usize,
    layer_rows: Vec<usize>,
    q_prefix: Vec<usize>,
    delta_prefix: Vec<usize>,
    x_off: usize,
    u_off: usize,
    q_off: usize,
    delta_off: usize,
    pub total: usize,
}

impl NnIndex {
    pub fn x(&self, d: usize) -> usize {
        self.x_off + d
    }
    pub fn u(&self, d: usize) -> usize {
        self.u_off + d
    }
    pub fn q(&self, layer: usize, t: usize) -> usize {
        self.q_off + self.q_prefix[layer] + t
    }
    pub fn delta(&self, layer: usize, j: usize) -> usize {
        self.delta_off + self.delta_prefix[layer] + j
    }
    fn binaries(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (layer, rows) in self.layer_rows.iter().enumerate() {
            for j in 0..*rows {
                out.push(self.delta(layer, j));
            }
        }
        out
    }
}

/// A standalone encoding of one network evaluation over `x in x_set`.
#[derive(Debug, Clone)]
pub struct NnEncoding {
    pub problem: MilpProblem,
    pub index: NnIndex,
}

impl NnEncoding {
    pub fn milp_options(&self) -> crate::milp::MilpOptions {
        crate::milp::MilpOptions::default()
    }
}

/// Encodes `u = Phi(x)` for `x` ranging over `x_set` (which must be inside
/// the box the configuration was derived for). Used for checking the
/// network's output range and for oracle tests of the maxout rows.
pub fn encode_nn_only(
    net: &MaxoutNet,
    cfg: &BigMConfig,
    x_set: &Polytope,
) -> Result<NnEncoding, EncodeError> {
    if x_set.dim() != net.input_dim() {
        return Err(EncodeError::DimensionMismatch(format!(
            "input set dimension {} vs network input {}",
            x_set.dim(),
            net.input_dim()
        )));
    }
    let n = net.input_dim();
    let m = net.output_dim();
    let layer_widths: Vec<usize> = net.hidden_layers().iter().map(|l| l.width()).collect();
    let layer_rows: Vec<usize> = net
        .hidden_layers()
        .iter()
        .map(|l| l.weight.nrows())
        .collect();
    let mut q_prefix = Vec::new();
    let mut acc = 0;
    for w in &layer_widths {
        q_prefix.push(acc);
        acc += w;
    }
    let q_total = acc;
    let mut delta_prefix = Vec::new();
    let mut acc = 0;
    for r in &layer_rows {
        delta_prefix.push(acc);
        acc += r;
    }
    let delta_total = acc;
    let idx = NnIndex {
        input_dim: n,
        output_dim: m,
        layer_rows: layer_rows.clone(),
        q_prefix,
        delta_prefix,
        x_off: 0,
        u_off: n,
        q_off: n + m,
        delta_off: n + m + q_total,
        total: n + m + q_total + delta_total,
    };

    let mut builder = ProgramBuilder::new();
    for d in 0..n {
        builder.add_var(cfg.x_lo[d], cfg.x_hi[d]);
    }
    for d in 0..m {
        builder.add_var(cfg.nn_out_lo[d], cfg.nn_out_hi[d]);
    }
    for (layer, width) in layer_widths.iter().enumerate() {
        for t in 0..*width {
            let v = builder.add_var(cfg.out_lo[layer][t], cfg.out_hi[layer][t]);
            debug_assert_eq!(v, idx.q(layer, t));
        }
    }
    for (layer, rows) in layer_rows.iter().enumerate() {
        for j in 0..*rows {
            let v = builder.add_var(0.0, 1.0);
            debug_assert_eq!(v, idx.delta(layer, j));
        }
    }

    for (layer_i, layer) in net.hidden_layers().iter().enumerate() {
        let p = layer.channels;
        let slack = cfg.layer_slack[layer_i];
        let prev_dim = layer.input_dim();
        let prev_var = |j: usize| -> usize {
            if layer_i == 0 {
                idx.x(j)
            } else {
                idx.q(layer_i - 1, j)
            }
        };
        for t in 0..layer.width() {
            let q_var = idx.q(layer_i, t);
            for c in 0..p {
                let row = t * p + c;
                let mut low: Vec<(usize, f64)> = Vec::new();
                for j in 0..prev_dim {
                    let w = layer.weight[(row, j)];
                    if w != 0.0 {
                        low.push((prev_var(j), w));
                    }
                }
                low.push((q_var, -1.0));
                builder.add_le(&low, -layer.bias[row]);
                let mut high: Vec<(usize, f64)> = Vec::new();
                for j in 0..prev_dim {
                    let w = layer.weight[(row, j)];
                    if w != 0.0 {
                        high.push((prev_var(j), -w));
                    }
                }
                high.push((q_var, 1.0));
                high.push((idx.delta(layer_i, row), slack));
                builder.add_le(&high, layer.bias[row] + slack);
            }
            let sel: Vec<(usize, f64)> = (0..p)
                .map(|c| (idx.delta(layer_i, t * p + c), 1.0))
                .collect();
            builder.add_eq(&sel, 1.0);
        }
    }
    let out = net.output_layer();
    let last = net.hidden_layers().len();
    for d in 0..m {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for j in 0..out.weight.ncols() {
            let w = out.weight[(d, j)];
            if w != 0.0 {
                let var = if last == 0 {
                    idx.x(j)
                } else {
                    idx.q(last - 1, j)
                };
                row.push((var, w));
            }
        }
        row.push((idx.u(d), -1.0));
        builder.add_eq(&row, -out.bias[d]);
    }
    for r in 0..x_set.num_rows() {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .map(|j| (idx.x(j), x_set.normals()[(r, j)]))
            .collect();
        builder.add_le(&coeffs, x_set.offsets()[r]);
    }
    let binaries = idx.binaries();
    let problem = MilpProblem::new(builder.build(), binaries)?;
    Ok(NnEncoding {
        problem,
        index: idx,
    })
}

/// Writes the encoded system as LP-format-style plain text for external
/// cross-checks.
///
/// Grammar: a `maximize` section with the objective, `subject to` with one
/// `name: sum op rhs` line per row, a `bounds` section (only finite bounds
/// are printed; `free` otherwise), and a `binary` section listing indicator
/// variables. Variables are named `v<j>`.
pub fn write_lp_format<W: Write>(problem: &MilpProblem, mut w: W) -> std::io::Result<()> {
    let lp = &problem.lp;
    writeln!(w, "maximize")?;
    let mut first = true;
    write!(w, "  obj:")?;
    for j in 0..lp.num_vars() {
        let c = lp.objective[j];
        if c != 0.0 {
            write!(
                w,
                " {}{} v{}",
                if c < 0.0 {
                    "- "
                } else if first {
                    ""
                } else {
                    "+ "
                },
                c.abs(),
                j
            )?;
            first = false;
        }
    }
    if first {
        write!(w, " 0")?;
    }
    writeln!(w)?;
    writeln!(w, "subject to")?;
    for i in 0..lp.num_rows() {
        write!(w, "  c{i}:")?;
        let mut first = true;
        for j in 0..lp.num_vars() {
            let a = lp.rows[(i, j)];
            if a != 0.0 {
                write!(
                    w,
                    " {}{} v{}",
                    if a < 0.0 {
                        "- "
                    } else if first {
                        ""
                    } else {
                        "+ "
                    },
                    a.abs(),
                    j
                )?;
                first = false;
            }
        }
        if first {
            write!(w, " 0")?;
        }
        let op = match lp.senses[i] {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
        };
        writeln!(w, " {op} {}", lp.rhs[i])?;
    }
    writeln!(w, "bounds")?;
    for j in 0..lp.num_vars() {
        let lo = lp.lower[j];
        let hi = lp.upper[j];
        if lo.is_infinite() && hi.is_infinite() {
            writeln!(w, "  v{j} free")?;
        } else if lo.is_infinite() {
            writeln!(w, "  v{j} <= {hi}")?;
        } else if hi.is_infinite() {
            writeln!(w, "  v{j} >= {lo}")?;
        } else {
            writeln!(w, "  {lo} <= v{j} <= {hi}")?;
        }
    }
    if !problem.binaries.is_empty() {
        writeln!(w, "binary")?;
        write!(w, " ")?;
        for &j in &problem.binaries {
            write!(w, " v{j}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "end")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lp::RowSense;
    use crate::milp::{find_feasible, find_feasible_with, MilpStatus};
    use crate::models::{AffineMap, MaxoutLayer, PwaSystem, Region};
    use crate::sim::{rollout, ControlLaw};
    use nalgebra::DMatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn singleton(x: &DVector<f64>) -> Polytope {
        let v: Vec<f64> = x.iter().copied().collect();
        Polytope::from_box(&v, &v).unwrap()
    }

    /// 1-D plant x+ = x + u on X = U = [-1, 1].
    fn unit_accumulator() -> PwaSystem {
        let mut normals = DMatrix::zeros(4, 2);
        let mut offsets = DVector::zeros(4);
        for j in 0..2 {
            normals[(2 * j, j)] = 1.0;
            offsets[2 * j] = 1.0;
            normals[(2 * j + 1, j)] = -1.0;
            offsets[2 * j + 1] = 1.0;
        }
        let region = Region {
            a: DMatrix::from_element(1, 1, 1.0),
            b: DMatrix::from_element(1, 1, 1.0),
            p: DVector::zeros(1),
            cell: Polytope::new(normals, offsets).unwrap(),
        };
        PwaSystem::new(
            vec![region],
            Polytope::centered_box(1, 1.0),
            Polytope::centered_box(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn big_m_covers_the_accumulator_by_hand() {
        // |x + u| <= 2 over the box, so any valid dynamics slack is >= 2
        let sys = unit_accumulator();
        let net = crate::models::MaxoutNet::zero(1, 1);
        let cfg = derive_big_m(&sys, &net).unwrap();
        assert!(cfg.dynamics_slack >= 2.0);
    }

    #[test]
    fn absolute_value_net_layer_bounds() {
        let layer = MaxoutLayer {
            weight: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            bias: DVector::zeros(2),
            channels: 2,
        };
        let net = crate::models::MaxoutNet::new(
            vec![layer],
            AffineMap {
                weight: DMatrix::identity(1, 1),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        let (sys, _) = fixtures::contraction_1d(); // X = [-1, 1]
        let cfg = derive_big_m(&sys, &net).unwrap();
        // |x| over [-1, 1] has range [0, 1]
        assert!((cfg.out_lo[0][0] - 0.0).abs() < 1e-12);
        assert!((cfg.out_hi[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case_study_membership_slacks_match_grid_search() {
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        let cfg = derive_big_m(&sys, &net).unwrap();
        // dense grid over X x U; for each region row, the worst violation
        let grid = 60;
        for (i, region) in sys.regions().iter().enumerate() {
            let cell = &region.cell;
            let mut worst = vec![0.0f64; cell.num_rows()];
            for a in 0..=grid {
                for b in 0..=grid {
                    for c in 0..=10 {
                        let x1 = -10.0 + 20.0 * a as f64 / grid as f64;
                        let x2 = -10.0 + 20.0 * b as f64 / grid as f64;
                        let u = -1.0 + 2.0 * c as f64 / 10.0;
                        for (r, w) in worst.iter_mut().enumerate() {
                            let lhs = cell.normals()[(r, 0)] * x1
                                + cell.normals()[(r, 1)] * x2
                                + cell.normals()[(r, 2)] * u;
                            *w = w.max(lhs - cell.offsets()[r]);
                        }
                    }
                }
            }
            for (r, w) in worst.iter().enumerate() {
                let auto = cfg.region_slack[i][r];
                assert!(
                    auto + 1e-9 >= *w,
                    "region {i} row {r}: slack {auto} below grid worst {w}"
                );
                if *w > 1e-6 {
                    let rel = (auto - w).abs() / w;
                    assert!(rel < 0.05, "region {i} row {r}: slack {auto} vs grid {w}");
                }
            }
        }
    }

    #[test]
    fn region_selection_probe_interior_and_boundary() {
        let sys = fixtures::case_study_system();
        let net = crate::models::MaxoutNet::zero(2, 1);
        let cfg = derive_big_m(&sys, &net).unwrap();
        // strictly inside the second cell (x1 > 0, x2 < 0)
        let x = DVector::from_vec(vec![2.0, -3.0]);
        let enc = encode_closed_loop(&sys, &net, &cfg, 1, &singleton(&x)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for i in 0..4 {
            let g = sol.assignment[enc.index.gamma(0, i)];
            assert!(
                (g - if i == 1 { 1.0 } else { 0.0 }).abs() < 1e-6,
                "gamma_{i} = {g}"
            );
        }

        // on the x2 = 0 boundary both adjacent selections are feasible
        let x = DVector::from_vec(vec![2.0, 0.0]);
        for forced in [0usize, 1usize] {
            let enc = encode_closed_loop(&sys, &net, &cfg, 1, &singleton(&x)).unwrap();
            let mut problem = enc.problem.clone();
            let g = enc.index.gamma(0, forced);
            problem.lp.lower[g] = 1.0;
            problem.lp.upper[g] = 1.0;
            let sol = find_feasible(&problem).unwrap();
            assert_eq!(
                sol.status,
                MilpStatus::Optimal,
                "selection {forced} infeasible"
            );
        }

        // one-region system forces its indicator
        let sys1 = unit_accumulator();
        let net1 = crate::models::MaxoutNet::zero(1, 1);
        let cfg1 = derive_big_m(&sys1, &net1).unwrap();
        let enc =
            encode_closed_loop(&sys1, &net1, &cfg1, 1, &singleton(&DVector::zeros(1))).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert!((sol.assignment[enc.index.gamma(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pwa_step_probe_forces_the_successor() {
        let sys = fixtures::case_study_system();
        // constant input 0 and 0.5 via bias-only "networks"
        for (u_fix, want) in [(0.0, (-0.501, 0.202)), (0.5, (-0.001, 0.202))] {
            let net = crate::models::MaxoutNet::new(
                Vec::new(),
                AffineMap {
                    weight: DMatrix::zeros(1, 2),
                    bias: DVector::from_vec(vec![u_fix]),
                },
            )
            .unwrap();
            let cfg = derive_big_m(&sys, &net).unwrap();
            let x = DVector::from_vec(vec![1.0, 1.0]);
            let enc = encode_closed_loop(&sys, &net, &cfg, 1, &singleton(&x)).unwrap();
            let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
            assert_eq!(sol.status, MilpStatus::Optimal);
            let x1 = sol.assignment[enc.index.x(1, 0)];
            let x2 = sol.assignment[enc.index.x(1, 1)];
            assert!((x1 - want.0).abs() < 1e-6, "{x1} vs {}", want.0);
            assert!((x2 - want.1).abs() < 1e-6, "{x2} vs {}", want.1);
        }
        // the origin maps to itself
        let net = crate::models::MaxoutNet::zero(2, 1);
        let cfg = derive_big_m(&sys, &net).unwrap();
        let enc = encode_closed_loop(&sys, &net, &cfg, 1, &singleton(&DVector::zeros(2))).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert!(sol.assignment[enc.index.x(1, 0)].abs() < 1e-7);
        assert!(sol.assignment[enc.index.x(1, 1)].abs() < 1e-7);
    }

    #[test]
    fn pwa_step_random_states_match_the_simulator() {
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        let cfg = derive_big_m(&sys, &net).unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        let mut checked = 0;
        for _ in 0..60 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-9.0..9.0));
            let u = net.eval(&x);
            if !sys.input_set().contains_point(&u, 1e-9) {
                continue;
            }
            let want = sys.step(&x, &u).unwrap();
            let enc = encode_closed_loop(&sys, &net, &cfg, 1, &singleton(&x)).unwrap();
            let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
            assert_eq!(sol.status, MilpStatus::Optimal);
            // boundary states admit several selections; skip the measure-zero ties
            let on_boundary = x[0].abs() < 1e-9 || x[1].abs() < 1e-9;
            if on_boundary {
                continue;
            }
            checked += 1;
            for d in 0..2 {
                let got = sol.assignment[enc.index.x(1, d)];
                assert!(
                    (got - want[d]).abs() < 1e-6,
                    "dim {d}: {got} vs {}",
                    want[d]
                );
            }
        }
        assert!(checked > 30);
    }

    #[test]
    fn nn_rows_pin_the_output_to_the_forward_pass() {
        // |x| net at a fixed input
        let layer = MaxoutLayer {
            weight: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            bias: DVector::zeros(2),
            channels: 2,
        };
        let net = crate::models::MaxoutNet::new(
            vec![layer],
            AffineMap {
                weight: DMatrix::identity(1, 1),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        let (sys, _) = saturating_domain();
        let cfg = derive_big_m(&sys, &net).unwrap();
        let x = DVector::from_vec(vec![-1.5]);
        let enc = encode_nn_only(&net, &cfg, &singleton(&x)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.assignment[enc.index.u(0)] - 1.5).abs() < 1e-7);

        // purely affine channels force their indicators to one
        let affine = crate::models::MaxoutNet::new(
            vec![MaxoutLayer {
                weight: DMatrix::from_row_slice(2, 1, &[0.5, -0.25]),
                bias: DVector::from_vec(vec![0.1, 0.2]),
                channels: 1,
            }],
            AffineMap {
                weight: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                bias: DVector::zeros(1),
            },
        )
        .unwrap();
        let cfg = derive_big_m(&sys, &affine).unwrap();
        let x = DVector::from_vec(vec![0.8]);
        let enc = encode_nn_only(&affine, &cfg, &singleton(&x)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for j in 0..2 {
            assert!((sol.assignment[enc.index.delta(0, j)] - 1.0).abs() < 1e-6);
        }
        let want = affine.eval(&x)[0];
        assert!((sol.assignment[enc.index.u(0)] - want).abs() < 1e-7);
    }

    fn saturating_domain() -> (PwaSystem, ()) {
        let (sys, _) = fixtures::saturating_1d();
        (sys, ())
    }

    #[test]
    fn random_nets_encode_their_forward_pass() {
        let mut rng = StdRng::seed_from_u64(88);
        let mut done = 0;
        while done < 60 {
            let n = rng.random_range(1..=2);
            let raw = fixtures::random_net(&mut rng, n, 1, 2);
            let sys_box = Polytope::centered_box(n, 3.0);
            // a minimal host system so the config covers the input box
            let cfg = {
                let cell_rows = 2 * (n + 1);
                let mut normals = DMatrix::zeros(cell_rows, n + 1);
                let mut offsets = DVector::zeros(cell_rows);
                for j in 0..n + 1 {
                    normals[(2 * j, j)] = 1.0;
                    offsets[2 * j] = if j < n { 3.0 } else { 10.0 };
                    normals[(2 * j + 1, j)] = -1.0;
                    offsets[2 * j + 1] = if j < n { 3.0 } else { 10.0 };
                }
                let region = Region {
                    a: DMatrix::zeros(n, n),
                    b: DMatrix::zeros(n, 1),
                    p: DVector::zeros(n),
                    cell: Polytope::new(normals, offsets).unwrap(),
                };
                let sys = PwaSystem::new(
                    vec![region],
                    sys_box.clone(),
                    Polytope::centered_box(1, 10.0),
                )
                .unwrap();
                derive_big_m(&sys, &raw).unwrap()
            };
            let x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let enc = encode_nn_only(&raw, &cfg, &singleton(&x)).unwrap();
            let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
            assert_eq!(sol.status, MilpStatus::Optimal);
            let want = raw.eval(&x)[0];
            let got = sol.assignment[enc.index.u(0)];
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
            done += 1;
        }
    }

    #[test]
    fn closed_loop_trajectory_matches_the_simulator_for_five_steps() {
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        let cfg = derive_big_m(&sys, &net).unwrap();
        let x0 = DVector::from_vec(vec![3.0, -2.0]);
        let traj = rollout(&sys, ControlLaw::Net(&net), &x0, 5).unwrap();
        assert!(!traj.truncated);
        let enc = encode_closed_loop(&sys, &net, &cfg, 5, &singleton(&x0)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for k in 0..=5 {
            for d in 0..2 {
                let got = sol.assignment[enc.index.x(k, d)];
                assert!(
                    (got - traj.states[k][d]).abs() < 1e-6,
                    "x({k})[{d}] = {got} vs {}",
                    traj.states[k][d]
                );
            }
        }
    }

    #[test]
    fn rollouts_complete_to_feasible_assignments() {
        let mut rng = StdRng::seed_from_u64(4242);
        let mut done = 0;
        while done < 25 {
            let (sys, net) = fixtures::random_instance(&mut rng);
            let cfg = derive_big_m(&sys, &net).unwrap();
            let n = sys.state_dim();
            let horizon = rng.random_range(1..=3);
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let traj = match rollout(&sys, ControlLaw::Net(&net), &x0, horizon) {
                Ok(t) if !t.truncated => t,
                _ => continue,
            };
            let enc = encode_closed_loop(&sys, &net, &cfg, horizon, &singleton(&x0)).unwrap();
            let z = enc.assignment_from_trajectory(&sys, &net, &traj).unwrap();
            let viol = enc.violation(&z);
            assert!(viol <= 1e-6, "completion violates by {viol:.3e}");
            // every binary entry of the completion is exactly 0 or 1
            for &j in &enc.problem.binaries {
                assert!(z[j] == 0.0 || z[j] == 1.0);
            }
            done += 1;
        }
    }

    #[test]
    fn manual_slack_overrides_keep_the_encoding_exact() {
        // enlarging any slack preserves validity: relaxed rows only get
        // looser, and the exactness argument never relied on tightness
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        let mut cfg = derive_big_m(&sys, &net).unwrap();
        cfg.dynamics_slack *= 10.0;
        for slack in cfg.layer_slack.iter_mut() {
            *slack *= 10.0;
        }
        for region in cfg.region_slack.iter_mut() {
            for r in 0..region.len() {
                if region[r] > 0.0 {
                    region[r] *= 10.0;
                }
            }
        }
        cfg.mode = BigMMode::Manual;
        let x0 = DVector::from_vec(vec![3.0, -2.0]);
        let traj = rollout(&sys, ControlLaw::Net(&net), &x0, 3).unwrap();
        let enc = encode_closed_loop(&sys, &net, &cfg, 3, &singleton(&x0)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for k in 0..=3 {
            for d in 0..2 {
                let got = sol.assignment[enc.index.x(k, d)];
                assert!((got - traj.states[k][d]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn empty_initial_set_is_infeasible() {
        let sys = unit_accumulator();
        let net = crate::models::MaxoutNet::zero(1, 1);
        let cfg = derive_big_m(&sys, &net).unwrap();
        let enc = encode_closed_loop(&sys, &net, &cfg, 1, &Polytope::empty(1)).unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn index_maps_are_total_and_disjoint() {
        let sys = fixtures::case_study_system();
        let net = fixtures::case_study_net();
        let idx = VarIndex::layout(&sys, &net, 3);
        let mut seen = vec![false; idx.total];
        let mut mark = |v: usize| {
            assert!(!seen[v], "index {v} assigned twice");
            seen[v] = true;
        };
        for k in 0..=3 {
            for d in 0..2 {
                mark(idx.x(k, d));
            }
        }
        for k in 0..3 {
            mark(idx.u(k, 0));
            for i in 0..4 {
                mark(idx.gamma(k, i));
                for d in 0..2 {
                    mark(idx.xt(k + 1, i, d));
                }
            }
            for (l, layer) in net.hidden_layers().iter().enumerate() {
                for t in 0..layer.width() {
                    mark(idx.q(k, l, t));
                }
                for j in 0..layer.weight.nrows() {
                    mark(idx.delta(k, l, j));
                }
            }
        }
        assert!(seen.iter().all(|s| *s), "layout has unused slots");
    }

    #[test]
    fn lp_format_dump_is_parseable_text() {
        let sys = unit_accumulator();
        let net = crate::models::MaxoutNet::zero(1, 1);
        let cfg = derive_big_m(&sys, &net).unwrap();
        let enc = encode_closed_loop(&sys, &net, &cfg, 1, &Polytope::centered_box(1, 1.0)).unwrap();
        let mut buf = Vec::new();
        write_lp_format(&enc.problem, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("maximize"));
        assert!(text.contains("subject to"));
        assert!(text.contains("bounds"));
        assert!(text.contains("binary"));
        assert!(text.trim_end().ends_with("end"));
        let _ = RowSense::Le;
    }
}
