//! H-representation polytopes and the support-function calculus built on them.
//!
//! Every set handled by the toolkit — state and input constraints, region
//! cells, reachable-set over-approximations, invariant sets — is a convex
//! polyhedron `{x | H x <= h}`. Support functions, containment, scaling and
//! intersection are all native to this representation; vertices are only ever
//! materialized transiently (and only in dimension <= 3) where a maximum of a
//! convex quadratic is needed.

use crate::lp::{solve_lp, LpError, LpStatus, ProgramBuilder};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default tolerance for set-inclusion tests. The underlying inclusions are
/// exact mathematics; the tolerance absorbs LP solver noise only.
pub const DEFAULT_SET_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("operation on an empty set")]
    EmptySet,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("vertex enumeration supports dimension <= 3, got {0}")]
    DimensionTooHigh(usize),
    #[error("set is unbounded")]
    UnboundedSet,
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("invalid ellipsoid: {0}")]
    InvalidEllipsoid(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Value of a support function: finite, or unbounded in that direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportValue {
    Finite(f64),
    Unbounded,
}

impl SupportValue {
    /// The finite value, or `None` when unbounded.
    pub fn finite(self) -> Option<f64> {
        match self {
            SupportValue::Finite(v) => Some(v),
            SupportValue::Unbounded => None,
        }
    }
}

/// A convex polyhedron `{x in R^n | H x <= h}`.
///
/// A polytope may be empty; emptiness is decided by one LP feasibility solve
/// and downstream code is expected to branch on it rather than fail.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl Polytope {
    /// Builds a polytope from row normals and offsets.
    ///
    /// Rejects mismatched row counts, non-finite entries, and zero rows.
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self, GeometryError> {
        if normals.nrows() != offsets.len() {
            return Err(GeometryError::InvalidPolytope(format!(
                "{} normal rows vs {} offsets",
                normals.nrows(),
                offsets.len()
            )));
        }
        if normals.ncols() == 0 {
            return Err(GeometryError::InvalidPolytope("zero-dimensional".into()));
        }
        if normals.iter().any(|v| !v.is_finite()) || offsets.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolytope("non-finite entry".into()));
        }
        for (i, row) in normals.row_iter().enumerate() {
            if row.iter().all(|v| v.abs() < 1e-12) {
                return Err(GeometryError::InvalidPolytope(format!(
                    "row {i} is the zero vector"
                )));
            }
        }
        Ok(Polytope { normals, offsets })
    }

    /// The axis-aligned box `lower <= x <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GeometryError::InvalidPolytope("bad box bounds".into()));
        }
        let n = lower.len();
        let mut normals = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for j in 0..n {
            normals[(2 * j, j)] = 1.0;
            offsets[2 * j] = upper[j];
            normals[(2 * j + 1, j)] = -1.0;
            offsets[2 * j + 1] = -lower[j];
        }
        Polytope::new(normals, offsets)
    }

    /// The symmetric box `|x_j| <= radius`.
    pub fn centered_box(dim: usize, radius: f64) -> Self {
        Polytope::from_box(&vec![-radius; dim], &vec![radius; dim]).expect("valid box")
    }

    /// A canonical empty polytope of the given dimension.
    pub fn empty(dim: usize) -> Self {
        let mut normals = DMatrix::zeros(2, dim);
        normals[(0, 0)] = 1.0;
        normals[(1, 0)] = -1.0;
        let offsets = DVector::from_vec(vec![-1.0, 0.0]);
        Polytope { normals, offsets }
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Membership test `H x <= h + tol` on every row.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let hx = &self.normals * x;
        (0..self.num_rows()).all(|i| hx[i] <= self.offsets[i] + tol)
    }

    /// Largest violation of `H x <= h` at `x` (negative means strictly inside).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let hx = &self.normals * x;
        (0..self.num_rows())
            .map(|i| hx[i] - self.offsets[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One LP feasibility solve.
    pub fn is_empty(&self) -> Result<bool, GeometryError> {
        let mut b = ProgramBuilder::new();
        b.add_free_vars(self.dim());
        for i in 0..self.num_rows() {
            let coeffs: Vec<(usize, f64)> =
                (0..self.dim()).map(|j| (j, self.normals[(i, j)])).collect();
            b.add_le(&coeffs, self.offsets[i]);
        }
        let r = solve_lp(&b.build())?;
        Ok(r.status == LpStatus::Infeasible)
    }

    /// Support function `sup {v'x | x in self}` via one LP.
    pub fn support(&self, direction: &DVector<f64>) -> Result<SupportValue, GeometryError> {
        if direction.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch(
                direction.len(),
                self.dim(),
            ));
        }
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolytope(
                "non-finite direction".into(),
            ));
        }
        let mut b = ProgramBuilder::new();
        b.add_free_vars(self.dim());
        for j in 0..self.dim() {
            b.set_objective(j, direction[j]);
        }
        for i in 0..self.num_rows() {
            let coeffs: Vec<(usize, f64)> =
                (0..self.dim()).map(|j| (j, self.normals[(i, j)])).collect();
            b.add_le(&coeffs, self.offsets[i]);
        }
        let r = solve_lp(&b.build())?;
        match r.status {
            LpStatus::Optimal => Ok(SupportValue::Finite(r.value)),
            LpStatus::Unbounded => Ok(SupportValue::Unbounded),
            LpStatus::Infeasible => Err(GeometryError::EmptySet),
        }
    }

    /// Set inclusion `inner ⊆ self`, decided row by row through supports:
    /// true iff the support of `inner` along every row of `self` stays below
    /// the row offset plus `tol`.
    pub fn contains(&self, inner: &Polytope, tol: f64) -> Result<bool, GeometryError> {
        if self.dim() != inner.dim() {
            return Err(GeometryError::DimensionMismatch(inner.dim(), self.dim()));
        }
        for i in 0..self.num_rows() {
            let dir = self.normals.row(i).transpose();
            match inner.support(&dir)? {
                SupportValue::Unbounded => return Ok(false),
                SupportValue::Finite(s) => {
                    if s > self.offsets[i] + tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Worst containment residual `max_i (h_inner(H_i) - h_i)`; `<= 0` means
    /// contained exactly. Errors on empty or unbounded inner sets.
    pub fn containment_residual(&self, inner: &Polytope) -> Result<f64, GeometryError> {
        if self.dim() != inner.dim() {
            return Err(GeometryError::DimensionMismatch(inner.dim(), self.dim()));
        }
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.num_rows() {
            let dir = self.normals.row(i).transpose();
            match inner.support(&dir)? {
                SupportValue::Unbounded => return Err(GeometryError::UnboundedSet),
                SupportValue::Finite(s) => worst = worst.max(s - self.offsets[i]),
            }
        }
        Ok(worst)
    }

    /// The scaled set `s * self = {s x | x in self}`, i.e. `{H x <= s h}`.
    pub fn scale(&self, s: f64) -> Result<Polytope, GeometryError> {
        if !s.is_finite() || s <= 0.0 {
            return Err(GeometryError::NonPositiveScale(s));
        }
        Ok(Polytope {
            normals: self.normals.clone(),
            offsets: &self.offsets * s,
        })
    }

    /// Intersection by row concatenation, with exact-duplicate rows dropped.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope, GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch(other.dim(), self.dim()));
        }
        let mut normals = self
            .normals
            .clone()
            .resize_vertically(self.num_rows() + other.num_rows(), 0.0);
        let mut offsets = self
            .offsets
            .clone()
            .resize_vertically(self.num_rows() + other.num_rows(), 0.0);
        let mut kept = self.num_rows();
        'rows: for i in 0..other.num_rows() {
            for k in 0..kept {
                if offsets[k] == other.offsets[i]
                    && (0..self.dim()).all(|j| normals[(k, j)] == other.normals[(i, j)])
                {
                    continue 'rows;
                }
            }
            for j in 0..self.dim() {
                normals[(kept, j)] = other.normals[(i, j)];
            }
            offsets[kept] = other.offsets[i];
            kept += 1;
        }
        Ok(Polytope {
            normals: normals.resize_vertically(kept, 0.0),
            offsets: offsets.resize_vertically(kept, 0.0),
        })
    }

    /// Componentwise bounding box via `2n` support LPs.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            hi[j] = match self.support(&e)? {
                SupportValue::Finite(v) => v,
                SupportValue::Unbounded => return Err(GeometryError::UnboundedSet),
            };
            e[j] = -1.0;
            lo[j] = match self.support(&e)? {
                SupportValue::Finite(v) => -v,
                SupportValue::Unbounded => return Err(GeometryError::UnboundedSet),
            };
        }
        Ok((lo, hi))
    }

    /// All extreme points of a bounded polytope in dimension <= 3.
    ///
    /// Candidates come from solving every choice of `n` active rows; each is
    /// kept when it satisfies all constraints within `1e-7`, and duplicates
    /// within `1e-7` are merged.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>, GeometryError> {
        let n = self.dim();
        if n > 3 {
            return Err(GeometryError::DimensionTooHigh(n));
        }
        if self.is_empty()? {
            return Err(GeometryError::EmptySet);
        }
        self.bounding_box().map_err(|e| match e {
            GeometryError::UnboundedSet => GeometryError::UnboundedSet,
            other => other,
        })?;
        let m = self.num_rows();
        let mut verts: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        if m < n {
            return Err(GeometryError::UnboundedSet);
        }
        loop {
            let mut a = DMatrix::zeros(n, n);
            let mut b = DVector::zeros(n);
            for (r, &i) in idx.iter().enumerate() {
                let norm = self.normals.row(i).norm();
                a.row_mut(r).copy_from(&(self.normals.row(i) / norm));
                b[r] = self.offsets[i] / norm;
            }
            let lu = a.lu();
            if lu.determinant().abs() > 1e-8 {
                if let Some(x) = lu.solve(&b) {
                    if self.contains_point(&x, 1e-7)
                        && !verts.iter().any(|v| (v - &x).amax() <= 1e-7)
                    {
                        verts.push(x);
                    }
                }
            }
            // advance to the next index combination
            let mut pos = n;
            let done = loop {
                if pos == 0 {
                    break true;
                }
                pos -= 1;
                if idx[pos] + (n - pos) < m {
                    idx[pos] += 1;
                    for q in pos + 1..n {
                        idx[q] = idx[q - 1] + 1;
                    }
                    break false;
                }
            };
            if done {
                break;
            }
        }
        Ok(verts)
    }
}

/// The ellipsoid `{x | x'Sx <= level}` with `S` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    shape: DMatrix<f64>,
    level: f64,
}

impl Ellipsoid {
    pub fn new(shape: DMatrix<f64>, level: f64) -> Result<Self, GeometryError> {
        if shape.nrows() != shape.ncols() || shape.nrows() == 0 {
            return Err(GeometryError::InvalidEllipsoid("not square".into()));
        }
        let sym_err = (&shape - shape.transpose()).amax();
        if sym_err > 1e-9 {
            return Err(GeometryError::InvalidEllipsoid(format!(
                "asymmetry {sym_err:.2e} exceeds 1e-9"
            )));
        }
        if shape.clone().cholesky().is_none() {
            return Err(GeometryError::InvalidEllipsoid(
                "not positive definite".into(),
            ));
        }
        if !level.is_finite() || level <= 0.0 {
            return Err(GeometryError::InvalidEllipsoid(format!(
                "level must be positive, got {level}"
            )));
        }
        Ok(Ellipsoid { shape, level })
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// The quadratic form `x'Sx`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.shape * x)[(0, 0)]
    }

    /// Membership in the `s`-scaled ellipsoid: `x'Sx <= s^2 level + tol`.
    pub fn contains_scaled(&self, x: &DVector<f64>, s: f64, tol: f64) -> bool {
        self.quad(x) <= s * s * self.level + tol
    }
}

/// The smallest `s` with `P ⊆ s * {x | x'Sx <= level}`.
///
/// The maximum of the convex quadratic over the polytope is attained at a
/// vertex, so this is `max_v sqrt(v'Sv / level)` over the vertices of `P`.
/// Requires `P` bounded, non-empty, containing the origin, and of dimension
/// at most 3.
pub fn min_cover_scale(ellipsoid: &Ellipsoid, p: &Polytope) -> Result<f64, GeometryError> {
    if ellipsoid.dim() != p.dim() {
        return Err(GeometryError::DimensionMismatch(p.dim(), ellipsoid.dim()));
    }
    if p.offsets().min() < -1e-9 {
        return Err(GeometryError::InvalidPolytope(
            "polytope does not contain the origin".into(),
        ));
    }
    let verts = p.vertices()?;
    let mut worst: f64 = 0.0;
    for v in &verts {
        worst = worst.max(ellipsoid.quad(v) / ellipsoid.level());
    }
    Ok(worst.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_box(n: usize) -> Polytope {
        Polytope::centered_box(n, 1.0)
    }

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn support_of_unit_box() {
        let p = unit_box(2);
        assert_eq!(
            p.support(&vec2(1.0, 0.0)).unwrap(),
            SupportValue::Finite(1.0)
        );
        let s = p.support(&vec2(1.0, 1.0)).unwrap().finite().unwrap();
        assert!((s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn support_unbounded_halfplane() {
        // {x1 >= 0} in the plane
        let normals = DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]);
        let p = Polytope::new(normals, DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(p.support(&vec2(1.0, 0.0)).unwrap(), SupportValue::Unbounded);
    }

    #[test]
    fn support_of_empty_set_errors() {
        let p = Polytope::empty(2);
        assert!(p.is_empty().unwrap());
        assert!(matches!(
            p.support(&vec2(1.0, 0.0)),
            Err(GeometryError::EmptySet)
        ));
    }

    #[test]
    fn containment_of_scaled_boxes() {
        let outer = unit_box(2);
        let inner = outer.scale(0.5).unwrap();
        assert!(outer.contains(&inner, 1e-6).unwrap());
        assert!(!inner.contains(&outer, 1e-6).unwrap());
    }

    #[test]
    fn shifted_box_not_contained() {
        // box shifted by (0.5, 0): support in direction (1,0) is 1.5 > 1
        let shifted = Polytope::from_box(&[-0.5, -1.0], &[1.5, 1.0]).unwrap();
        let s = shifted.support(&vec2(1.0, 0.0)).unwrap().finite().unwrap();
        assert!((s - 1.5).abs() < 1e-9);
        assert!(!unit_box(2).contains(&shifted, 1e-6).unwrap());
    }

    #[test]
    fn scale_identity_and_half() {
        let p = unit_box(2);
        let same = p.scale(1.0).unwrap();
        assert!(p.contains(&same, 1e-9).unwrap() && same.contains(&p, 1e-9).unwrap());
        let half = p.scale(0.5).unwrap();
        let expect = Polytope::centered_box(2, 0.5);
        assert!(half.contains(&expect, 1e-9).unwrap() && expect.contains(&half, 1e-9).unwrap());
        assert!(matches!(
            p.scale(0.0),
            Err(GeometryError::NonPositiveScale(_))
        ));
    }

    fn random_polytope_with_origin(rng: &mut StdRng, n: usize) -> Polytope {
        // random rows with positive offsets always contain the origin; a box
        // keeps everything bounded
        let rows = rng.random_range(1..=4);
        let mut normals = DMatrix::zeros(rows + 2 * n, n);
        let mut offsets = DVector::zeros(rows + 2 * n);
        for i in 0..rows {
            loop {
                for j in 0..n {
                    normals[(i, j)] = rng.random_range(-1.0..1.0);
                }
                if normals.row(i).amax() > 1e-3 {
                    break;
                }
            }
            offsets[i] = rng.random_range(0.1..2.0);
        }
        for j in 0..n {
            normals[(rows + 2 * j, j)] = 1.0;
            offsets[rows + 2 * j] = rng.random_range(0.2..2.0);
            normals[(rows + 2 * j + 1, j)] = -1.0;
            offsets[rows + 2 * j + 1] = rng.random_range(0.2..2.0);
        }
        Polytope::new(normals, offsets).unwrap()
    }

    #[test]
    fn scaling_scales_supports() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.random_range(1..=3);
            let p = random_polytope_with_origin(&mut rng, n);
            let s = rng.random_range(0.2..3.0);
            let scaled = p.scale(s).unwrap();
            let mut v = DVector::zeros(n);
            for j in 0..n {
                v[j] = rng.random_range(-1.0..1.0);
            }
            if v.amax() < 1e-6 {
                continue;
            }
            let a = p.support(&v).unwrap().finite().unwrap();
            let b = scaled.support(&v).unwrap().finite().unwrap();
            assert!((b - s * a).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn intersection_examples() {
        let p = unit_box(2);
        let self_cap = p.intersect(&p).unwrap();
        assert!(p.contains(&self_cap, 1e-9).unwrap() && self_cap.contains(&p, 1e-9).unwrap());

        let halfplane = Polytope::new(
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            DVector::zeros(1),
        )
        .unwrap();
        let cap = p.intersect(&halfplane).unwrap();
        let expect = Polytope::from_box(&[0.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!(cap.contains(&expect, 1e-9).unwrap() && expect.contains(&cap, 1e-9).unwrap());
    }

    #[test]
    fn intersection_contained_in_operands() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(1..=3);
            let a = random_polytope_with_origin(&mut rng, n);
            let b = random_polytope_with_origin(&mut rng, n);
            let cap = a.intersect(&b).unwrap();
            assert!(a.contains(&cap, 1e-6).unwrap());
            assert!(b.contains(&cap, 1e-6).unwrap());
            let va = DVector::from_fn(n, |j, _| ((j + 1) as f64).sin());
            let sa = a.support(&va).unwrap().finite().unwrap();
            let sb = b.support(&va).unwrap().finite().unwrap();
            let sc = cap.support(&va).unwrap().finite().unwrap();
            assert!(sc <= sa.min(sb) + 1e-7);
        }
    }

    #[test]
    fn vertices_of_box_and_triangle() {
        let p = unit_box(2);
        let mut vs = p.vertices().unwrap();
        assert_eq!(vs.len(), 4);
        vs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        for v in &vs {
            assert!((v[0].abs() - 1.0).abs() < 1e-9 && (v[1].abs() - 1.0).abs() < 1e-9);
        }

        // x1, x2 >= 0, x1 + x2 <= 1
        let normals = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let tri = Polytope::new(normals, DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let vs = tri.vertices().unwrap();
        assert_eq!(vs.len(), 3);
        for expect in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] {
            assert!(vs
                .iter()
                .any(|v| (v[0] - expect[0]).abs() < 1e-9 && (v[1] - expect[1]).abs() < 1e-9));
        }
    }

    #[test]
    fn vertices_in_three_dimensions() {
        let cube = Polytope::centered_box(3, 1.0);
        let vs = cube.vertices().unwrap();
        assert_eq!(vs.len(), 8);
        for v in &vs {
            assert!(v.iter().all(|c| (c.abs() - 1.0).abs() < 1e-9));
        }
        // slicing off one corner replaces it with a triangle
        let cut = Polytope::new(
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            DVector::from_vec(vec![2.5]),
        )
        .unwrap();
        let clipped = cube.intersect(&cut).unwrap();
        let vs = clipped.vertices().unwrap();
        assert_eq!(vs.len(), 10);
        assert!(vs.iter().all(|v| v.sum() <= 2.5 + 1e-9));
    }

    #[test]
    fn vertices_reject_unbounded_and_high_dim() {
        let halfplane = Polytope::new(
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            DVector::zeros(1),
        )
        .unwrap();
        assert!(matches!(
            halfplane.vertices(),
            Err(GeometryError::UnboundedSet)
        ));
        let p4 = Polytope::centered_box(4, 1.0);
        assert!(matches!(
            p4.vertices(),
            Err(GeometryError::DimensionTooHigh(4))
        ));
    }

    #[test]
    fn vertices_agree_with_support_function() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..25 {
            let p = random_polytope_with_origin(&mut rng, 2);
            let vs = p.vertices().unwrap();
            assert!(!vs.is_empty());
            for _ in 0..8 {
                let v = vec2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if v.amax() < 1e-6 {
                    continue;
                }
                let s = p.support(&v).unwrap().finite().unwrap();
                let best = vs
                    .iter()
                    .map(|x| v.dot(x))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    (s - best).abs() <= 1e-6 * (1.0 + s.abs()),
                    "support {s} vs vertex max {best}"
                );
            }
        }
    }

    #[test]
    fn min_cover_scale_examples() {
        let disk = Ellipsoid::new(DMatrix::identity(2, 2), 1.0).unwrap();
        let s = min_cover_scale(&disk, &unit_box(2)).unwrap();
        assert!((s - 2.0_f64.sqrt()).abs() < 1e-9);
        let s = min_cover_scale(&disk, &Polytope::centered_box(2, 0.5)).unwrap();
        assert!((s - 0.5_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn min_cover_scale_matches_grid_search() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..10 {
            // random SPD shape: A'A + eps I
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let shape = a.transpose() * &a + DMatrix::identity(2, 2) * 0.2;
            let level = rng.random_range(0.5..2.0);
            let e = Ellipsoid::new(shape, level).unwrap();
            let p = random_polytope_with_origin(&mut rng, 2);
            let s = min_cover_scale(&e, &p).unwrap();
            // dense grid over the bounding box
            let (lo, hi) = p.bounding_box().unwrap();
            let grid = 220;
            let mut best: f64 = 0.0;
            for i in 0..=grid {
                for j in 0..=grid {
                    let x = vec2(
                        lo[0] + (hi[0] - lo[0]) * i as f64 / grid as f64,
                        lo[1] + (hi[1] - lo[1]) * j as f64 / grid as f64,
                    );
                    if p.contains_point(&x, 1e-9) {
                        best = best.max(e.quad(&x) / e.level());
                    }
                }
            }
            let grid_s = best.sqrt();
            assert!(
                (s - grid_s).abs() < 1e-3 + 1e-2 * s,
                "vertex {s} vs grid {grid_s}"
            );
            assert!(s >= grid_s - 1e-9, "grid found a point outside the cover");
        }
    }

    #[test]
    fn ellipsoid_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4999, 1.0]);
        assert!(Ellipsoid::new(asym, 1.0).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Ellipsoid::new(indef, 1.0).is_err());
        assert!(Ellipsoid::new(DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn empty_intersection_is_a_value() {
        let left = Polytope::from_box(&[0.0], &[1.0]).unwrap();
        let right = Polytope::from_box(&[2.0], &[3.0]).unwrap();
        let cap = left.intersect(&right).unwrap();
        assert!(cap.is_empty().unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Containment is reflexive and transitive on non-empty polytopes.
        #[test]
        fn containment_partial_order(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(1usize..=2);
            let a = random_polytope_with_origin(&mut rng, n);
            prop_assert!(a.contains(&a, 1e-6).unwrap());
            let b = a.scale(rng.random_range(0.3..0.9)).unwrap();
            let c = b.scale(rng.random_range(0.3..0.9)).unwrap();
            prop_assert!(a.contains(&b, 1e-6).unwrap());
            prop_assert!(b.contains(&c, 1e-6).unwrap());
            prop_assert!(a.contains(&c, 1e-6).unwrap());
        }

        /// Scaling is monotone for sets containing the origin.
        #[test]
        fn scale_monotone(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let p = random_polytope_with_origin(&mut rng, 2);
            let s1 = rng.random_range(0.1..1.0);
            let s2 = s1 + rng.random_range(0.0..1.0);
            let small = p.scale(s1).unwrap();
            let big = p.scale(s2).unwrap();
            prop_assert!(big.contains(&small, 1e-6).unwrap());
        }
    }
}
