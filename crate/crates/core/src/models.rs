//! Executable semantics of the controlled plant and its controllers.
//!
//! A [`PwaSystem`] advances `x+ = A x + B u + p` with the affine piece chosen
//! by polyhedral cells over the joint `(x, u)` space. A [`MaxoutNet`] is a
//! feed-forward network whose activation takes the maximum over a group of
//! affine channels per neuron, which makes the network a continuous
//! piecewise-affine map. A [`DualModeController`] switches from the network
//! to a local stabilizing feedback inside a scaled ellipsoidal region.
//!
//! On shared cell boundaries the plant picks the lowest region index; the
//! cells only need disjoint interiors, so any fixed selection is consistent
//! with the dynamics, and the lowest index makes evaluation deterministic.

use crate::geometry::{Ellipsoid, GeometryError, Polytope};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Membership slack when matching a point to a region cell.
pub const REGION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no region contains the point (largest violation {violation:.3e})")]
    NoRegion { violation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid saturation box: {0}")]
    BoxInvalid(String),
    #[error("model validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One affine piece `x+ = A x + B u + p` valid on the cell `{H (x,u) <= h}`.
#[derive(Debug, Clone)]
pub struct Region {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DVector<f64>,
    pub cell: Polytope,
}

/// A discrete-time piecewise-affine plant over bounded state and input sets.
#[derive(Debug, Clone)]
pub struct PwaSystem {
    regions: Vec<Region>,
    state_set: Polytope,
    input_set: Polytope,
    state_dim: usize,
    input_dim: usize,
}

impl PwaSystem {
    /// Validates dimensions, the zero-offset requirement on cells containing
    /// the origin, and (by deterministic sampling) that the cells cover the
    /// whole of `X x U`.
    pub fn new(
        regions: Vec<Region>,
        state_set: Polytope,
        input_set: Polytope,
    ) -> Result<Self, ModelError> {
        if regions.is_empty() {
            return Err(ModelError::Validation("no regions".into()));
        }
        let n = state_set.dim();
        let m = input_set.dim();
        for (i, r) in regions.iter().enumerate() {
            if r.a.nrows() != n || r.a.ncols() != n {
                return Err(ModelError::DimensionMismatch(format!(
                    "region {i}: A is {}x{}, expected {n}x{n}",
                    r.a.nrows(),
                    r.a.ncols()
                )));
            }
            if r.b.nrows() != n || r.b.ncols() != m {
                return Err(ModelError::DimensionMismatch(format!(
                    "region {i}: B is {}x{}, expected {n}x{m}",
                    r.b.nrows(),
                    r.b.ncols()
                )));
            }
            if r.p.len() != n {
                return Err(ModelError::DimensionMismatch(format!(
                    "region {i}: p has length {}, expected {n}",
                    r.p.len()
                )));
            }
            if r.cell.dim() != n + m {
                return Err(ModelError::DimensionMismatch(format!(
                    "region {i}: cell dimension {} != n+m = {}",
                    r.cell.dim(),
                    n + m
                )));
            }
            // the origin is an equilibrium: cells containing (0,0) carry p = 0
            let zero = DVector::zeros(n + m);
            if r.cell.contains_point(&zero, REGION_TOL) && r.p.amax() > 1e-9 {
                return Err(ModelError::Validation(format!(
                    "region {i} contains the origin but has offset |p| = {:.3e}",
                    r.p.amax()
                )));
            }
        }
        let sys = PwaSystem {
            regions,
            state_set,
            input_set,
            state_dim: n,
            input_dim: m,
        };
        sys.check_coverage()?;
        Ok(sys)
    }

    /// Sampled coverage check: a deterministic grid over `X x U` must land in
    /// at least one region cell everywhere.
    fn check_coverage(&self) -> Result<(), ModelError> {
        let (xlo, xhi) = self.state_set.bounding_box()?;
        let (ulo, uhi) = self.input_set.bounding_box()?;
        let dims = self.state_dim + self.input_dim;
        let per_axis = match dims {
            1 => 33,
            2 => 17,
            3 => 9,
            _ => 5,
        };
        let mut counter = vec![0usize; dims];
        loop {
            let mut point = DVector::zeros(dims);
            for (d, &c) in counter.iter().enumerate() {
                let t = c as f64 / (per_axis - 1) as f64;
                let (lo, hi) = if d < self.state_dim {
                    (xlo[d], xhi[d])
                } else {
                    (ulo[d - self.state_dim], uhi[d - self.state_dim])
                };
                point[d] = lo + t * (hi - lo);
            }
            let x = point.rows(0, self.state_dim).clone_owned();
            let u = point.rows(self.state_dim, self.input_dim).clone_owned();
            let inside =
                self.state_set.contains_point(&x, 1e-9) && self.input_set.contains_point(&u, 1e-9);
            if inside && self.region_of(&x, &u).is_none() {
                return Err(ModelError::Validation(format!(
                    "region cells do not cover the sampled point {point:?}"
                )));
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == dims {
                    return Ok(());
                }
                counter[d] += 1;
                if counter[d] < per_axis {
                    break;
                }
                counter[d] = 0;
                d += 1;
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn state_set(&self) -> &Polytope {
        &self.state_set
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input_set
    }

    /// Lowest-index region whose cell contains `(x, u)` within [`REGION_TOL`].
    pub fn region_of(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<usize> {
        let mut point = DVector::zeros(self.state_dim + self.input_dim);
        point.rows_mut(0, self.state_dim).copy_from(x);
        point.rows_mut(self.state_dim, self.input_dim).copy_from(u);
        self.regions
            .iter()
            .position(|r| r.cell.contains_point(&point, REGION_TOL))
    }

    /// One step of the plant. Requires `(x, u)` inside `X x U` within `1e-7`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if x.len() != self.state_dim || u.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch(format!(
                "state/input lengths {}/{}",
                x.len(),
                u.len()
            )));
        }
        if !self.state_set.contains_point(x, 1e-7) || !self.input_set.contains_point(u, 1e-7) {
            return Err(ModelError::Validation(
                "point outside the state/input constraints".into(),
            ));
        }
        match self.region_of(x, u) {
            Some(i) => {
                let r = &self.regions[i];
                Ok(&r.a * x + &r.b * u + &r.p)
            }
            None => {
                let mut point = DVector::zeros(self.state_dim + self.input_dim);
                point.rows_mut(0, self.state_dim).copy_from(x);
                point.rows_mut(self.state_dim, self.input_dim).copy_from(u);
                let violation = self
                    .regions
                    .iter()
                    .map(|r| r.cell.violation(&point))
                    .fold(f64::INFINITY, f64::min);
                Err(ModelError::NoRegion { violation })
            }
        }
    }
}

/// One maxout layer: `p` affine channels per neuron, rows grouped so that
/// neuron `l` owns rows `l*p .. (l+1)*p` of the weight matrix.
#[derive(Debug, Clone)]
pub struct MaxoutLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub channels: usize,
}

impl MaxoutLayer {
    pub fn width(&self) -> usize {
        self.weight.nrows() / self.channels
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Affine output stage of a network.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// A feed-forward maxout network: hidden maxout layers composed with an
/// affine output map. A network with no hidden layers is purely affine.
#[derive(Debug, Clone)]
pub struct MaxoutNet {
    hidden: Vec<MaxoutLayer>,
    output: AffineMap,
}

impl MaxoutNet {
    pub fn new(hidden: Vec<MaxoutLayer>, output: AffineMap) -> Result<Self, ModelError> {
        let mut width = None;
        for (i, layer) in hidden.iter().enumerate() {
            if layer.channels == 0 {
                return Err(ModelError::Validation(format!(
                    "layer {i} has zero channels"
                )));
            }
            if layer.weight.nrows() % layer.channels != 0 || layer.weight.nrows() == 0 {
                return Err(ModelError::Validation(format!(
                    "layer {i}: {} rows not divisible into {} channels",
                    layer.weight.nrows(),
                    layer.channels
                )));
            }
            if layer.bias.len() != layer.weight.nrows() {
                return Err(ModelError::DimensionMismatch(format!(
                    "layer {i}: bias length {} vs {} rows",
                    layer.bias.len(),
                    layer.weight.nrows()
                )));
            }
            if let Some(w) = width {
                if layer.input_dim() != w {
                    return Err(ModelError::DimensionMismatch(format!(
                        "layer {i} expects input {} but previous width is {w}",
                        layer.input_dim()
                    )));
                }
            }
            width = Some(layer.width());
        }
        if let Some(w) = width {
            if output.weight.ncols() != w {
                return Err(ModelError::DimensionMismatch(format!(
                    "output expects {} inputs but last hidden width is {w}",
                    output.weight.ncols()
                )));
            }
        }
        if output.bias.len() != output.weight.nrows() {
            return Err(ModelError::DimensionMismatch(
                "output bias length mismatch".into(),
            ));
        }
        Ok(MaxoutNet { hidden, output })
    }

    /// A network that is identically zero from `input_dim` to `output_dim`.
    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        MaxoutNet {
            hidden: Vec::new(),
            output: AffineMap {
                weight: DMatrix::zeros(output_dim, input_dim),
                bias: DVector::zeros(output_dim),
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map(|l| l.input_dim())
            .unwrap_or_else(|| self.output.weight.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.output.weight.nrows()
    }

    pub fn hidden_layers(&self) -> &[MaxoutLayer] {
        &self.hidden
    }

    pub fn output_layer(&self) -> &AffineMap {
        &self.output
    }

    /// Number of binary indicator variables the mixed-integer encoding of one
    /// evaluation needs (one per affine channel).
    pub fn indicator_count(&self) -> usize {
        self.hidden.iter().map(|l| l.weight.nrows()).sum()
    }

    /// Exact forward pass.
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut q = x.clone();
        for layer in &self.hidden {
            let z = &layer.weight * &q + &layer.bias;
            let w = layer.width();
            let mut out = DVector::zeros(w);
            for l in 0..w {
                let mut best = f64::NEG_INFINITY;
                for c in 0..layer.channels {
                    best = best.max(z[l * layer.channels + c]);
                }
                out[l] = best;
            }
            q = out;
        }
        &self.output.weight * q + &self.output.bias
    }

    /// Per-layer hidden outputs plus the final output; used by the encoder
    /// oracle tests and by constructive completion of MILP assignments.
    pub fn eval_trace(&self, x: &DVector<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let mut q = x.clone();
        let mut trace = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let z = &layer.weight * &q + &layer.bias;
            let w = layer.width();
            let mut out = DVector::zeros(w);
            for l in 0..w {
                let mut best = f64::NEG_INFINITY;
                for c in 0..layer.channels {
                    best = best.max(z[l * layer.channels + c]);
                }
                out[l] = best;
            }
            trace.push(out.clone());
            q = out;
        }
        let y = &self.output.weight * q + &self.output.bias;
        (trace, y)
    }

    /// Saturates the network into the box `[lo, hi]`, returning the maxout
    /// network computing `clamp(Phi(x) - Phi(0), lo, hi)`.
    ///
    /// Two maxout layers are appended: the first takes `max(. , lo)`
    /// componentwise (after shifting out `Phi(0)`), the second `max(-., -hi)`,
    /// and a negated identity output restores the sign. The result is zero at
    /// zero and maps every input into the box.
    pub fn saturate(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<MaxoutNet, ModelError> {
        let m = self.output_dim();
        if lo.len() != m || hi.len() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "saturation box dimension {} vs output {}",
                lo.len(),
                m
            )));
        }
        for j in 0..m {
            if !lo[j].is_finite() || !hi[j].is_finite() || lo[j] >= hi[j] {
                return Err(ModelError::BoxInvalid(format!(
                    "component {j}: lower {} not below upper {}",
                    lo[j], hi[j]
                )));
            }
            if lo[j] > 0.0 || hi[j] < 0.0 {
                return Err(ModelError::BoxInvalid(format!(
                    "component {j}: box [{}, {}] must contain 0 so the result vanishes at 0",
                    lo[j], hi[j]
                )));
            }
        }
        let phi0 = self.eval(&DVector::zeros(self.input_dim()));
        let mut hidden = self.hidden.clone();

        // layer computing max(Phi(x) - Phi(0), lo): channels {affine row, constant}
        let prev = self.output.weight.ncols();
        let mut w1 = DMatrix::zeros(2 * m, prev);
        let mut b1 = DVector::zeros(2 * m);
        for j in 0..m {
            for c in 0..prev {
                w1[(2 * j, c)] = self.output.weight[(j, c)];
            }
            b1[2 * j] = self.output.bias[j] - phi0[j];
            b1[2 * j + 1] = lo[j];
        }
        hidden.push(MaxoutLayer {
            weight: w1,
            bias: b1,
            channels: 2,
        });

        // layer computing max(-y, -hi)
        let mut w2 = DMatrix::zeros(2 * m, m);
        let mut b2 = DVector::zeros(2 * m);
        for j in 0..m {
            w2[(2 * j, j)] = -1.0;
            b2[2 * j + 1] = -hi[j];
        }
        hidden.push(MaxoutLayer {
            weight: w2,
            bias: b2,
            channels: 2,
        });

        let output = AffineMap {
            weight: -DMatrix::<f64>::identity(m, m),
            bias: DVector::zeros(m),
        };
        MaxoutNet::new(hidden, output)
    }

    /// Checks `Phi(0) = 0` within `tol`.
    pub fn vanishes_at_zero(&self, tol: f64) -> bool {
        self.eval(&DVector::zeros(self.input_dim())).amax() <= tol
    }
}

/// One cell of a piecewise-affine state feedback `u = K x + k`.
#[derive(Debug, Clone)]
pub struct KappaCell {
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub cell: Polytope,
}

/// The dual-mode control law: the network away from the origin, a local
/// stabilizing PWA feedback `kappa` inside the scaled ellipsoid `s * F0`.
#[derive(Debug, Clone)]
pub struct DualModeController {
    pub net: MaxoutNet,
    pub kappa: Vec<KappaCell>,
    pub roa: Ellipsoid,
    pub s_scale: f64,
}

impl DualModeController {
    /// Validates `kappa(0) = 0`, cell dimensions, `0 < s <= 1`, and (sampled)
    /// that the kappa cells cover the switching region `s * F0`.
    pub fn new(
        net: MaxoutNet,
        kappa: Vec<KappaCell>,
        roa: Ellipsoid,
        s_scale: f64,
    ) -> Result<Self, ModelError> {
        let n = net.input_dim();
        let m = net.output_dim();
        if roa.dim() != n {
            return Err(ModelError::DimensionMismatch(
                "ellipsoid dimension vs state dimension".into(),
            ));
        }
        if !s_scale.is_finite() || s_scale <= 0.0 || s_scale > 1.0 {
            return Err(ModelError::Validation(format!(
                "scaling factor must lie in (0, 1], got {s_scale}"
            )));
        }
        if kappa.is_empty() {
            return Err(ModelError::Validation("kappa has no cells".into()));
        }
        for (i, c) in kappa.iter().enumerate() {
            if c.gain.nrows() != m || c.gain.ncols() != n || c.offset.len() != m {
                return Err(ModelError::DimensionMismatch(format!(
                    "kappa cell {i} gain/offset dimensions"
                )));
            }
            if c.cell.dim() != n {
                return Err(ModelError::DimensionMismatch(format!(
                    "kappa cell {i} polytope dimension"
                )));
            }
            let zero = DVector::zeros(n);
            if c.cell.contains_point(&zero, REGION_TOL) && c.offset.amax() > 1e-9 {
                return Err(ModelError::Validation(format!(
                    "kappa cell {i} contains the origin but kappa(0) != 0"
                )));
            }
        }
        let ctrl = DualModeController {
            net,
            kappa,
            roa,
            s_scale,
        };
        ctrl.check_kappa_coverage()?;
        Ok(ctrl)
    }

    /// Deterministic boundary + interior sampling of `s * F0`.
    fn check_kappa_coverage(&self) -> Result<(), ModelError> {
        let n = self.roa.dim();
        for x in scaled_ellipsoid_samples(&self.roa, self.s_scale, 64) {
            if !self.kappa.iter().any(|c| c.cell.contains_point(&x, 1e-7)) {
                return Err(ModelError::Validation(format!(
                    "kappa cells do not cover the switching region at {x:?} (dim {n})"
                )));
            }
        }
        Ok(())
    }

    /// The local feedback `kappa(x)`, by lowest-index cell.
    pub fn eval_kappa(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        match self
            .kappa
            .iter()
            .find(|c| c.cell.contains_point(x, REGION_TOL))
        {
            Some(c) => Ok(&c.gain * x + &c.offset),
            None => Err(ModelError::NoRegion {
                violation: self
                    .kappa
                    .iter()
                    .map(|c| c.cell.violation(x))
                    .fold(f64::INFINITY, f64::min),
            }),
        }
    }

    /// Whether the local controller is active at `x` (boundary included).
    pub fn in_switch_region(&self, x: &DVector<f64>) -> bool {
        self.roa.contains_scaled(x, self.s_scale, REGION_TOL)
    }

    /// The dual-mode law: `kappa(x)` inside `s * F0` (closed), else the net.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if self.in_switch_region(x) {
            self.eval_kappa(x)
        } else {
            Ok(self.net.eval(x))
        }
    }
}

/// Deterministic samples on the boundary and interior of `s * {x'Sx <= level}`.
pub fn scaled_ellipsoid_samples(e: &Ellipsoid, s: f64, count: usize) -> Vec<DVector<f64>> {
    let n = e.dim();
    let chol = e
        .shape()
        .clone()
        .cholesky()
        .expect("validated SPD shape matrix");
    // x = s*sqrt(level) * L^-T u maps the unit sphere onto the boundary
    let linv_t = chol
        .l()
        .transpose()
        .try_inverse()
        .expect("Cholesky factor invertible");
    let radius = s * e.level().sqrt();
    let mut out = Vec::new();
    match n {
        1 => {
            let step = 2.0 / count.max(2) as f64;
            let mut t = -1.0;
            while t <= 1.0 + 1e-12 {
                out.push(&linv_t * DVector::from_vec(vec![t * radius]));
                t += step;
            }
        }
        2 => {
            for k in 0..count {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                // boundary and a mid-radius ring
                for r in [1.0, 0.5] {
                    let u = DVector::from_vec(vec![th.cos() * r, th.sin() * r]);
                    out.push(&linv_t * (u * radius));
                }
            }
            out.push(DVector::zeros(2));
        }
        _ => {
            // deterministic spherical spiral
            for k in 0..count {
                let t = (k as f64 + 0.5) / count as f64;
                let z = 1.0 - 2.0 * t;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let th = 2.4 * k as f64;
                for r in [1.0, 0.5] {
                    let mut u = DVector::zeros(n);
                    u[0] = rho * th.cos() * r;
                    u[1] = rho * th.sin() * r;
                    u[2] = z * r;
                    out.push(&linv_t * (u * radius));
                }
            }
            out.push(DVector::zeros(n));
        }
    }
    out
}
