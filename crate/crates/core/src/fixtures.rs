//! Example systems and generators used by tests, the guide, and the shipped
//! model files.
//!
//! The two-dimensional four-quadrant plant in [`case_study_system`] pairs with
//! the hand-built saturated controller in [`case_study_net`]; the small 1-D
//! fixtures isolate individual behaviors (plain contraction, a saturating
//! loop with a nonzero limit set, divergence).

use crate::geometry::{Ellipsoid, Polytope};
use crate::models::{
    AffineMap, DualModeController, KappaCell, MaxoutLayer, MaxoutNet, PwaSystem, Region,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn box_polytope(radius: f64, dim: usize) -> Polytope {
    Polytope::centered_box(dim, radius)
}

/// Builds a region cell from sign rows over `(x, u)` plus the `X` and `U`
/// box rows, so the cells partition exactly `X x U`.
fn cell_with_boxes(
    sign_rows: &[(Vec<f64>, f64)],
    x_radius: f64,
    u_radius: f64,
    n: usize,
    m: usize,
) -> Polytope {
    let rows = sign_rows.len() + 2 * (n + m);
    let mut normals = DMatrix::zeros(rows, n + m);
    let mut offsets = DVector::zeros(rows);
    for (i, (coeffs, rhs)) in sign_rows.iter().enumerate() {
        for (j, c) in coeffs.iter().enumerate() {
            normals[(i, j)] = *c;
        }
        offsets[i] = *rhs;
    }
    let mut r = sign_rows.len();
    for j in 0..n + m {
        let radius = if j < n { x_radius } else { u_radius };
        normals[(r, j)] = 1.0;
        offsets[r] = radius;
        normals[(r + 1, j)] = -1.0;
        offsets[r + 1] = radius;
        r += 2;
    }
    Polytope::new(normals, offsets).expect("fixture cell")
}

/// 1-D plant `x+ = 0.5 x + u` on `X = [-1, 1]`, `U = [-1, 1]`, single region.
/// With the zero controller the loop contracts to the origin.
pub fn contraction_1d() -> (PwaSystem, MaxoutNet) {
    let region = Region {
        a: DMatrix::from_element(1, 1, 0.5),
        b: DMatrix::from_element(1, 1, 1.0),
        p: DVector::zeros(1),
        cell: cell_with_boxes(&[], 1.0, 1.0, 1, 1),
    };
    let sys = PwaSystem::new(vec![region], box_polytope(1.0, 1), box_polytope(1.0, 1))
        .expect("contraction fixture");
    (sys, MaxoutNet::zero(1, 1))
}

/// 1-D plant `x+ = 2 x + u` on `X = [-1, 1]` with the zero controller: every
/// nonzero state escapes, so no invariant set with interior exists.
pub fn divergent_1d() -> (PwaSystem, MaxoutNet) {
    let region = Region {
        a: DMatrix::from_element(1, 1, 2.0),
        b: DMatrix::from_element(1, 1, 1.0),
        p: DVector::zeros(1),
        cell: cell_with_boxes(&[], 1.0, 1.0, 1, 1),
    };
    let sys = PwaSystem::new(vec![region], box_polytope(1.0, 1), box_polytope(1.0, 1))
        .expect("divergent fixture");
    (sys, MaxoutNet::zero(1, 1))
}

/// 1-D plant `x+ = 0.5 x + u` on `X = [-2, 2]` with the saturated controller
/// `u = clamp(2x, -0.6, 0.6)`.
///
/// Near the origin the loop expands (`x+ = 2.5 x`), for large states it
/// contracts toward the stable fixed points at `±1.2`, so the limit set has
/// nonzero extent — the interesting case for terminal-set computation.
pub fn saturating_1d() -> (PwaSystem, MaxoutNet) {
    let region = Region {
        a: DMatrix::from_element(1, 1, 0.5),
        b: DMatrix::from_element(1, 1, 1.0),
        p: DVector::zeros(1),
        cell: cell_with_boxes(&[], 2.0, 1.0, 1, 1),
    };
    let sys = PwaSystem::new(vec![region], box_polytope(2.0, 1), box_polytope(1.0, 1))
        .expect("saturating fixture");
    let raw = MaxoutNet::new(
        Vec::new(),
        AffineMap {
            weight: DMatrix::from_element(1, 1, 2.0),
            bias: DVector::zeros(1),
        },
    )
    .expect("affine net");
    let net = raw
        .saturate(
            &DVector::from_vec(vec![-0.6]),
            &DVector::from_vec(vec![0.6]),
        )
        .expect("saturation");
    (sys, net)
}

/// The saturating fixture plus a hand-verified dual-mode setup: local
/// feedback `kappa(x) = -0.4 x` with Lyapunov function `x^2` on
/// `F0 = {x^2 <= 4} = X`.
pub fn dual_mode_1d() -> ((PwaSystem, MaxoutNet), DualModeController) {
    let (sys, net) = saturating_1d();
    let kappa = vec![KappaCell {
        gain: DMatrix::from_element(1, 1, -0.4),
        offset: DVector::zeros(1),
        cell: Polytope::centered_box(1, 2.0),
    }];
    let roa = Ellipsoid::new(DMatrix::identity(1, 1), 4.0).expect("1-D ellipsoid");
    let ctrl = DualModeController::new(net.clone(), kappa, roa, 0.65).expect("dual-mode fixture");
    ((sys, net), ctrl)
}

/// The four-quadrant two-dimensional benchmark plant: one affine piece per
/// quadrant of the state plane, shared input matrix `B = (1, 0)'`, with
/// `|x|_inf <= 10` and `|u| <= 1`.
pub fn case_study_system() -> PwaSystem {
    let a = [
        DMatrix::from_row_slice(2, 2, &[-0.04, -0.461, -0.139, 0.341]),
        DMatrix::from_row_slice(2, 2, &[0.936, 0.323, 0.788, -0.049]),
        DMatrix::from_row_slice(2, 2, &[-0.857, 0.815, 0.491, 0.62]),
        DMatrix::from_row_slice(2, 2, &[-0.022, 0.644, 0.758, 0.271]),
    ];
    let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    // quadrant sign rows over (x1, x2, u); u is unconstrained within a cell
    let quadrants: [[(Vec<f64>, f64); 2]; 4] = [
        // x1 >= 0, x2 >= 0
        [(vec![-1.0, 0.0, 0.0], 0.0), (vec![0.0, -1.0, 0.0], 0.0)],
        // x1 >= 0, x2 <= 0
        [(vec![-1.0, 0.0, 0.0], 0.0), (vec![0.0, 1.0, 0.0], 0.0)],
        // x1 <= 0, x2 <= 0
        [(vec![1.0, 0.0, 0.0], 0.0), (vec![0.0, 1.0, 0.0], 0.0)],
        // x1 <= 0, x2 >= 0
        [(vec![1.0, 0.0, 0.0], 0.0), (vec![0.0, -1.0, 0.0], 0.0)],
    ];
    let regions: Vec<Region> = a
        .into_iter()
        .zip(quadrants)
        .map(|(a, rows)| Region {
            a,
            b: b.clone(),
            p: DVector::zeros(2),
            cell: cell_with_boxes(&rows, 10.0, 1.0, 2, 1),
        })
        .collect();
    PwaSystem::new(regions, box_polytope(10.0, 2), box_polytope(1.0, 1))
        .expect("case-study fixture")
}

/// Hand-built saturated controller for [`case_study_system`]:
/// `u = clamp(-0.7 |x1| - 0.5 x2, -1, 1)`.
///
/// The `|x1|` term pushes the state down whichever unstable piece is active
/// (the open-loop pieces in the second and third quadrant expand along `x1`
/// with opposite signs), and the `x2` term counters the coupling that drives
/// `x1` in the lower half plane.
pub fn case_study_net() -> MaxoutNet {
    // neuron 0: max(x1, -x1) = |x1|; neuron 1: max(x2, x2) = x2
    let layer = MaxoutLayer {
        weight: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
        bias: DVector::zeros(4),
        channels: 2,
    };
    let raw = MaxoutNet::new(
        vec![layer],
        AffineMap {
            weight: DMatrix::from_row_slice(1, 2, &[-0.7, -0.5]),
            bias: DVector::zeros(1),
        },
    )
    .expect("case-study controller");
    raw.saturate(
        &DVector::from_vec(vec![-1.0]),
        &DVector::from_vec(vec![1.0]),
    )
    .expect("saturation")
}

/// A random raw maxout network (no structural guarantees at zero); saturate
/// it to obtain a controller that vanishes at the origin.
pub fn random_net<R: Rng>(
    rng: &mut R,
    input_dim: usize,
    output_dim: usize,
    max_hidden: usize,
) -> MaxoutNet {
    let depth = rng.random_range(0..=max_hidden);
    let mut hidden = Vec::new();
    let mut prev = input_dim;
    for _ in 0..depth {
        let width = rng.random_range(1..=4);
        let channels = rng.random_range(1..=3);
        let scale = 1.0 / (prev as f64).sqrt();
        let weight = DMatrix::from_fn(width * channels, prev, |_, _| {
            rng.random_range(-1.0..1.0) * scale
        });
        let bias = DVector::from_fn(width * channels, |_, _| rng.random_range(-0.5..0.5));
        hidden.push(MaxoutLayer {
            weight,
            bias,
            channels,
        });
        prev = width;
    }
    let scale = 1.0 / (prev as f64).sqrt();
    let weight = DMatrix::from_fn(output_dim, prev, |_, _| rng.random_range(-1.0..1.0) * scale);
    let bias = DVector::from_fn(output_dim, |_, _| rng.random_range(-0.3..0.3));
    MaxoutNet::new(hidden, AffineMap { weight, bias }).expect("random net dimensions")
}

/// A random PWA plant and a saturated random controller for it.
///
/// Plants have 1–3 states, 1–3 inputs, and 1, 2 or 4 region cells obtained by
/// splitting `X x U` with random hyperplanes; pieces are scaled well below
/// instability and offsets vanish on cells containing the origin. The
/// controller is a random maxout net saturated strictly inside `U`, so the
/// closed loop keeps inputs feasible wherever the state stays feasible.
pub fn random_instance<R: Rng>(rng: &mut R) -> (PwaSystem, MaxoutNet) {
    let n = *pick(rng, &[1, 1, 2, 2, 3]);
    let m = *pick(rng, &[1, 1, 1, 2, 2, 3]);
    let x_radius = rng.random_range(3.0..8.0);
    let dims = n + m;

    // 0, 1 or 2 splitting hyperplanes => 1, 2 or 4 sign cells
    let split_count = *pick(rng, &[0, 1, 1, 2, 2]);
    let mut splits: Vec<(Vec<f64>, f64)> = Vec::new();
    for _ in 0..split_count {
        let mut g = vec![0.0f64; dims];
        loop {
            for v in g.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let norm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if norm > 0.2 {
                for v in g.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
        let c = if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(0.0..0.5)
        };
        splits.push((g, c));
    }

    let mut regions = Vec::new();
    for mask in 0..(1usize << split_count) {
        let sign_rows: Vec<(Vec<f64>, f64)> = splits
            .iter()
            .enumerate()
            .map(|(k, (g, c))| {
                let s = if mask & (1 << k) != 0 { 1.0 } else { -1.0 };
                (g.iter().map(|v| s * v).collect(), s * c)
            })
            .collect();
        let cell = cell_with_boxes(&sign_rows, x_radius, 1.0, n, m);
        let zero = DVector::zeros(dims);
        let has_origin = cell.contains_point(&zero, 1e-9);
        let gain = rng.random_range(0.3..0.85);
        let mut a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut norm: f64 = 0.0;
        for i in 0..n {
            norm = norm.max(a.row(i).iter().map(|v| v.abs()).sum::<f64>());
        }
        if norm > 1e-9 {
            a *= gain / norm;
        }
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-0.5..0.5));
        let p = if has_origin {
            DVector::zeros(n)
        } else {
            DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3))
        };
        regions.push(Region { a, b, p, cell });
    }

    let sys = PwaSystem::new(regions, box_polytope(x_radius, n), box_polytope(1.0, m))
        .expect("random instance");

    let raw = random_net(rng, n, m, 1);
    let sat = rng.random_range(0.3..0.8);
    let net = raw
        .saturate(
            &DVector::from_element(m, -sat),
            &DVector::from_element(m, sat),
        )
        .expect("saturation of random net");
    (sys, net)
}

fn pick<'a, R: Rng, T>(rng: &mut R, options: &'a [T]) -> &'a T {
    &options[rng.random_range(0..options.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_net_matches_hand_formula() {
        let net = case_study_net();
        for (x1, x2) in [
            (1.0f64, 1.0f64),
            (-3.0, 2.0),
            (0.5, -4.0),
            (-10.0, 0.0),
            (0.0, -10.0),
        ] {
            let x = DVector::from_vec(vec![x1, x2]);
            let want = (-0.7 * x1.abs() - 0.5 * x2).clamp(-1.0, 1.0);
            let got = net.eval(&x)[0];
            assert!(
                (got - want).abs() < 1e-12,
                "at ({x1}, {x2}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn random_instances_respect_their_contracts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        use rand::SeedableRng;
        for _ in 0..25 {
            let (sys, net) = random_instance(&mut rng);
            assert!(net.vanishes_at_zero(1e-9));
            assert_eq!(net.input_dim(), sys.state_dim());
            assert_eq!(net.output_dim(), sys.input_dim());
            // saturated controller keeps inputs strictly feasible
            for _ in 0..100 {
                let x = DVector::from_fn(sys.state_dim(), |_, _| rng.random_range(-3.0..3.0));
                let u = net.eval(&x);
                assert!(sys.input_set().contains_point(&u, 1e-9));
            }
        }
    }
}
