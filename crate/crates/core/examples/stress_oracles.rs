//! One-off robustness sweep: encoding/simulator equivalence and support
//! exactness across many random instances. Not part of the test suite;
//! run manually with an optional seed argument.
use nalgebra::DVector;
use polyreach::encoder::{derive_big_m, encode_closed_loop};
use polyreach::fixtures;
use polyreach::geometry::Polytope;
use polyreach::milp::{find_feasible_with, MilpStatus};
use polyreach::reach::{support_reach, ReachOptions};
use polyreach::sim::{pattern_enum_reach, rollout, ControlLaw};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    let mut rng = StdRng::seed_from_u64(seed);
    let t0 = std::time::Instant::now();
    let mut enc_ok = 0;
    let mut sup_ok = 0;
    let mut worst_state: f64 = 0.0;
    let mut worst_sup: f64 = 0.0;
    while enc_ok < 300 {
        let (sys, net) = fixtures::random_instance(&mut rng);
        let cfg = derive_big_m(&sys, &net).unwrap();
        let n = sys.state_dim();
        let steps = rng.random_range(1..=3);
        let (lo, hi) = sys.state_set().bounding_box().unwrap();
        let x0 = DVector::from_fn(n, |j, _| rng.random_range(0.35 * lo[j]..=0.35 * hi[j]));
        let traj = match rollout(&sys, ControlLaw::Net(&net), &x0, steps) {
            Ok(t) if !t.truncated => t,
            _ => continue,
        };
        let xs: Vec<f64> = x0.iter().copied().collect();
        let enc = encode_closed_loop(
            &sys,
            &net,
            &cfg,
            steps,
            &Polytope::from_box(&xs, &xs).unwrap(),
        )
        .unwrap();
        let sol = find_feasible_with(&enc.problem, &enc.milp_options()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        for k in 0..=steps {
            for d in 0..n {
                let e = (sol.assignment[enc.index.x(k, d)] - traj.states[k][d]).abs();
                worst_state = worst_state.max(e);
                assert!(e <= 1e-6, "seed {seed}: state gap {e:.3e}");
            }
        }
        let z = enc.assignment_from_trajectory(&sys, &net, &traj).unwrap();
        assert!(enc.violation(&z) <= 1e-6);
        enc_ok += 1;

        if sup_ok < 150 {
            let box0 = Polytope::centered_box(n, rng.random_range(0.4..1.2));
            let mut dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            if dir.amax() < 1e-3 {
                dir[0] = 1.0;
            }
            if let Ok(Some(oracle)) = pattern_enum_reach(&sys, &net, &box0, &dir) {
                let milp =
                    support_reach(&sys, &net, &cfg, 1, &box0, &dir, &ReachOptions::default())
                        .unwrap();
                let e = (milp - oracle).abs();
                worst_sup = worst_sup.max(e);
                assert!(
                    e <= 1e-5 * (1.0 + oracle.abs()),
                    "seed {seed}: support gap {e:.3e}"
                );
                sup_ok += 1;
            }
        }
    }
    println!(
        "seed {seed}: {enc_ok} encodings (worst state gap {worst_state:.2e}), {sup_ok} supports (worst gap {worst_sup:.2e}) in {:?}",
        t0.elapsed()
    );
}
