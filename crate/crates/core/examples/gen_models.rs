//! Regenerates the model files shipped under models/ from the built-in
//! fixtures. Run from the workspace root: cargo run -p polyreach --example gen_models
use polyreach::fixtures;
use polyreach::io::{save_model, DualModeParts, ModelOptions};
use polyreach::models::MaxoutNet;
use std::path::Path;

fn main() {
    let dir = Path::new("models");
    std::fs::create_dir_all(dir).unwrap();

    let opts = ModelOptions {
        template: Some("box".into()),
        epsilon_shrink: Some(1e-3),
        ..ModelOptions::default()
    };

    let sys = fixtures::case_study_system();
    save_model(
        &dir.join("case_study.toml"),
        &sys,
        &fixtures::case_study_net(),
        None,
        &opts,
    )
    .unwrap();
    save_model(
        &dir.join("case_study_zero.toml"),
        &sys,
        &MaxoutNet::zero(2, 1),
        None,
        &opts,
    )
    .unwrap();

    let (sys, net) = fixtures::contraction_1d();
    save_model(&dir.join("contraction.toml"), &sys, &net, None, &opts).unwrap();

    let (sys, net) = fixtures::divergent_1d();
    save_model(
        &dir.join("divergent.toml"),
        &sys,
        &net,
        None,
        &ModelOptions {
            iter_limit: Some(25),
            ..opts.clone()
        },
    )
    .unwrap();

    let ((sys, net), ctrl) = fixtures::dual_mode_1d();
    let parts = DualModeParts {
        kappa: ctrl.kappa.clone(),
        roa: ctrl.roa.clone(),
    };
    save_model(
        &dir.join("saturating.toml"),
        &sys,
        &net,
        Some(&parts),
        &opts,
    )
    .unwrap();
    println!("model files written to {}", dir.display());
}
