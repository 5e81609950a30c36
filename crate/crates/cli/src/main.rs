//! Command-line front-end: certify models, compute reachable-set
//! over-approximations, simulate closed loops, and re-verify stored
//! certificates.
//!
//! Exit codes are a stable contract:
//! `0` success / conclusive, `2` invalid input, `3` certification failed or
//! replay rejected, `4` internal solver limit hit.

use clap::{Args, Parser, Subcommand};
use polyreach::certify::{
    certify_asymptotic, certify_uub, replay_certificate, CertKind, Certificate, CertifyError,
    CertifyOptions,
};
use polyreach::encoder::derive_big_m;
use polyreach::io::{self, LoadedModel, Manifest};
use polyreach::nalgebra::DVector;
use polyreach::reach::{overapprox_reach, ReachError, ReachOptions, Template};
use polyreach::sim::{rollout, ControlLaw};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "polyreach",
    version,
    about = "Reachability-based certification of piecewise-affine systems with maxout network controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Output directory for result files and the run manifest.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Template: "box", "oct", or a set file whose rows give the directions.
    #[arg(long)]
    template: Option<String>,
    /// Per-direction MILP node budget.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Worker threads for per-direction solves (default: POLYREACH_THREADS or 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed recorded with sampled checks and audits.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a boundedness or asymptotic-stability certificate.
    Certify {
        model: PathBuf,
        /// Boundedness certificate (the default).
        #[arg(long, conflicts_with = "asymptotic")]
        uub: bool,
        /// Asymptotic-stability certificate (needs a dual_mode model section).
        #[arg(long)]
        asymptotic: bool,
        /// Scaling slack of the terminal-set condition.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Iteration budget of the terminal-set search.
        #[arg(long)]
        kmax: Option<usize>,
        /// Iteration budget of the invariant-set fixed point.
        #[arg(long)]
        iter_limit: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Over-approximate the k-step reachable set.
    Reach {
        model: PathBuf,
        /// Number of steps.
        #[arg(short = 'k', long = "k")]
        steps: usize,
        /// Initial set file; defaults to the state constraint set.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Apply the one-step operator k times instead of one k-step solve.
        #[arg(long)]
        iterate: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Roll out the closed loop and export the trajectory.
    Simulate {
        model: PathBuf,
        /// Initial state, comma-separated.
        #[arg(long)]
        x0: String,
        #[arg(long)]
        steps: usize,
        /// Use the dual-mode law with the scaling from this certificate.
        #[arg(long, value_name = "CERT")]
        dual_mode: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Re-verify a stored certificate against a model from scratch.
    Verify {
        certificate: PathBuf,
        model: PathBuf,
        #[arg(long)]
        node_limit: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Certify {
            model,
            uub: _,
            asymptotic,
            epsilon,
            kmax,
            iter_limit,
            common,
        } => cmd_certify(&model, asymptotic, epsilon, kmax, iter_limit, &common),
        Command::Reach {
            model,
            steps,
            from,
            iterate,
            common,
        } => cmd_reach(&model, steps, from.as_deref(), iterate, &common),
        Command::Simulate {
            model,
            x0,
            steps,
            dual_mode,
            common,
        } => cmd_simulate(&model, &x0, steps, dual_mode.as_deref(), &common),
        Command::Verify {
            certificate,
            model,
            node_limit,
            threads,
        } => cmd_verify(&certificate, &model, node_limit, threads),
    };
    ExitCode::from(code)
}

fn default_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("POLYREACH_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    code
}

fn load(model_path: &Path) -> Result<LoadedModel, u8> {
    io::load_model(model_path).map_err(|e| fail(EXIT_INVALID, e))
}

fn resolve_template(flag: Option<&str>, model: &LoadedModel) -> Result<Template, u8> {
    let choice = flag
        .map(str::to_string)
        .or_else(|| model.options.template.clone())
        .unwrap_or_else(|| "box".to_string());
    let n = model.system.state_dim();
    match choice.as_str() {
        "box" => Ok(Template::axis_box(n)),
        "oct" | "octagon" => Ok(Template::octagon(n)),
        path => {
            let set = io::load_set(Path::new(path)).map_err(|e| fail(EXIT_INVALID, e))?;
            if set.dim() != n {
                return Err(fail(EXIT_INVALID, "template file dimension mismatch"));
            }
            Template::new(set.normals().clone())
                .map_err(|e| fail(EXIT_INVALID, format!("template file: {e}")))
        }
    }
}

fn certify_options(
    model: &LoadedModel,
    epsilon: Option<f64>,
    kmax: Option<usize>,
    iter_limit: Option<usize>,
    common: &CommonOpts,
) -> CertifyOptions {
    let defaults = CertifyOptions::default();
    CertifyOptions {
        epsilon_shrink: epsilon
            .or(model.options.epsilon_shrink)
            .unwrap_or(defaults.epsilon_shrink),
        k_limit: kmax.or(model.options.k_limit).unwrap_or(defaults.k_limit),
        iter_limit: iter_limit
            .or(model.options.iter_limit)
            .unwrap_or(defaults.iter_limit),
        set_tol: model.options.set_tol.unwrap_or(defaults.set_tol),
        node_limit: common.node_limit.or(model.options.node_limit),
        threads: default_threads(common.threads),
        seed: common.seed.or(model.options.seed).unwrap_or(0),
    }
}

fn certify_exit(err: &CertifyError) -> u8 {
    match err {
        CertifyError::Inconclusive { .. } | CertifyError::Milp(_) | CertifyError::Reach(_) => {
            EXIT_LIMIT
        }
        CertifyError::Precondition(_) | CertifyError::Encode(_) | CertifyError::Model(_) => {
            EXIT_INVALID
        }
        _ => EXIT_INCONCLUSIVE,
    }
}

fn write_manifest(
    common: &CommonOpts,
    command: &str,
    model: &Path,
    opts: Option<&CertifyOptions>,
    outputs: &[String],
) {
    let manifest = Manifest {
        tool: "polyreach".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        model: model.display().to_string(),
        seed: opts.map_or(0, |o| o.seed),
        set_tol: opts.map_or(polyreach::geometry::DEFAULT_SET_TOL, |o| o.set_tol),
        epsilon_shrink: opts.map(|o| o.epsilon_shrink),
        node_limit: opts.and_then(|o| o.node_limit),
        outputs: outputs.to_vec(),
    };
    let path = common.out.join("manifest.toml");
    if let Err(e) = io::save_manifest(&path, &manifest) {
        eprintln!("warning: could not write manifest: {e}");
    }
}

fn print_certificate(cert: &Certificate) {
    println!(
        "certificate: {} ({})",
        match cert.kind {
            CertKind::Uub => "uniform ultimate boundedness",
            CertKind::Asymptotic => "asymptotic stability",
        },
        if cert.conclusive {
            "conclusive"
        } else {
            "NOT conclusive"
        }
    );
    if let Some(k) = cert.k_star {
        println!("  entry bound k* = {k}");
    }
    if let Some(s) = cert.s_scale {
        println!("  switch-region scaling s = {s:.6}");
    }
    if let Some(iters) = cert.fmax_iterations {
        println!("  invariant-set iterations = {iters}");
    }
    for c in &cert.checks {
        println!(
            "  [{}] {}{} (residual {:.3e}, tol {:.1e})",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            if c.sampled { " (sampled)" } else { "" },
            c.residual,
            c.tolerance
        );
    }
}

fn cmd_certify(
    model_path: &Path,
    asymptotic: bool,
    epsilon: Option<f64>,
    kmax: Option<usize>,
    iter_limit: Option<usize>,
    common: &CommonOpts,
) -> u8 {
    let model = match load(model_path) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let template = match resolve_template(common.template.as_deref(), &model) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let opts = certify_options(&model, epsilon, kmax, iter_limit, common);
    let cfg = match derive_big_m(&model.system, &model.network) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    if std::fs::create_dir_all(&common.out).is_err() {
        return fail(EXIT_INVALID, "cannot create the output directory");
    }

    let uub = match certify_uub(&model.system, &model.network, &cfg, &template, &opts) {
        Ok(c) => c,
        Err(e) => return fail(certify_exit(&e), e),
    };
    let cert = if asymptotic {
        let Some(parts) = model.dual_mode.as_ref() else {
            return fail(EXIT_INVALID, "model has no dual_mode section");
        };
        if !uub.conclusive {
            let _ = io::save_certificate(&common.out.join("certificate.toml"), &uub);
            print_certificate(&uub);
            write_manifest(
                common,
                "certify",
                model_path,
                Some(&opts),
                &["certificate.toml".into()],
            );
            return EXIT_INCONCLUSIVE;
        }
        // the controller's switching scale comes out of the certification,
        // so assemble with a provisional value; only the ellipsoid and the
        // local feedback enter the checks
        let ctrl = match parts.controller(model.network.clone(), 1.0) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_INVALID, e),
        };
        match certify_asymptotic(&model.system, &ctrl, &uub, &opts) {
            Ok(c) => c,
            Err(e) => return fail(certify_exit(&e), e),
        }
    } else {
        uub
    };

    let cert_path = common.out.join("certificate.toml");
    if let Err(e) = io::save_certificate(&cert_path, &cert) {
        return fail(EXIT_INVALID, e);
    }
    write_manifest(
        common,
        "certify",
        model_path,
        Some(&opts),
        &["certificate.toml".into()],
    );
    print_certificate(&cert);
    if cert.conclusive {
        EXIT_OK
    } else if cert.resource_limited {
        EXIT_LIMIT
    } else {
        EXIT_INCONCLUSIVE
    }
}

fn cmd_reach(
    model_path: &Path,
    steps: usize,
    from: Option<&Path>,
    iterate: bool,
    common: &CommonOpts,
) -> u8 {
    if steps == 0 {
        return fail(EXIT_INVALID, "steps must be at least 1");
    }
    let model = match load(model_path) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let template = match resolve_template(common.template.as_deref(), &model) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let x0 = match from {
        Some(path) => match io::load_set(path) {
            Ok(s) => s,
            Err(e) => return fail(EXIT_INVALID, e),
        },
        None => model.system.state_set().clone(),
    };
    let cfg = match derive_big_m(&model.system, &model.network) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let opts = ReachOptions {
        node_limit: common.node_limit.or(model.options.node_limit),
        gap_abs: 1e-6,
        threads: default_threads(common.threads),
        set_tol: model
            .options
            .set_tol
            .unwrap_or(polyreach::geometry::DEFAULT_SET_TOL),
    };
    if std::fs::create_dir_all(&common.out).is_err() {
        return fail(EXIT_INVALID, "cannot create the output directory");
    }

    let mut left_domain = false;
    let result = if iterate && steps > 1 {
        polyreach::reach::iterate_reach(
            &model.system,
            &model.network,
            &cfg,
            steps,
            &x0,
            &template,
            &opts,
        )
        .map(|o| {
            if o.left_domain {
                left_domain = true;
                eprintln!(
                    "iteration stopped after {} steps: an intermediate set left the state constraints",
                    o.completed
                );
            }
            o.result
        })
    } else {
        overapprox_reach(
            &model.system,
            &model.network,
            &cfg,
            steps,
            &x0,
            &template,
            &opts,
        )
    };
    let result = match result {
        Ok(r) => r,
        Err(ReachError::OutsideDomain(r)) => {
            return fail(
                EXIT_INVALID,
                format!("initial set leaves the state constraints (residual {r:.3e})"),
            )
        }
        Err(ReachError::DimensionMismatch) => {
            return fail(EXIT_INVALID, "initial set dimension mismatch")
        }
        Err(e) => return fail(EXIT_LIMIT, e),
    };
    let out_path = common.out.join("reach.toml");
    if let Err(e) = io::save_reach(&out_path, steps, &result) {
        return fail(EXIT_INVALID, e);
    }
    write_manifest(common, "reach", model_path, None, &["reach.toml".into()]);
    println!(
        "{}-step over-approximation ({}); per-direction optima:",
        steps,
        if result.conclusive {
            "conclusive"
        } else {
            "NOT conclusive"
        }
    );
    for (i, c) in result.optima.iter().enumerate() {
        println!("  c[{i}] = {c}");
    }
    if result.conclusive {
        EXIT_OK
    } else if left_domain {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_LIMIT
    }
}

fn parse_x0(text: &str, dim: usize) -> Result<DVector<f64>, u8> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    match parts {
        Ok(v) if v.len() == dim => Ok(DVector::from_vec(v)),
        Ok(v) => Err(fail(
            EXIT_INVALID,
            format!("x0 has {} entries, expected {dim}", v.len()),
        )),
        Err(_) => Err(fail(EXIT_INVALID, "x0 must be comma-separated numbers")),
    }
}

fn cmd_simulate(
    model_path: &Path,
    x0_text: &str,
    steps: usize,
    dual_mode: Option<&Path>,
    common: &CommonOpts,
) -> u8 {
    let model = match load(model_path) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let x0 = match parse_x0(x0_text, model.system.state_dim()) {
        Ok(x) => x,
        Err(c) => return c,
    };
    if !model.system.state_set().contains_point(&x0, 1e-7) {
        return fail(EXIT_INVALID, "x0 violates the state constraints");
    }
    if std::fs::create_dir_all(&common.out).is_err() {
        return fail(EXIT_INVALID, "cannot create the output directory");
    }

    let ctrl;
    let law = match dual_mode {
        None => ControlLaw::Net(&model.network),
        Some(cert_path) => {
            let cert = match io::load_certificate(cert_path) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_INVALID, e),
            };
            let Some(s) = cert.s_scale else {
                return fail(
                    EXIT_INVALID,
                    "certificate carries no switch-region scaling; certify with --asymptotic",
                );
            };
            let Some(parts) = model.dual_mode.as_ref() else {
                return fail(EXIT_INVALID, "model has no dual_mode section");
            };
            ctrl = match parts.controller(model.network.clone(), s) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_INVALID, e),
            };
            ControlLaw::DualMode(&ctrl)
        }
    };
    let traj = match rollout(&model.system, law, &x0, steps) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let out_path = common.out.join("trajectory.csv");
    if let Err(e) = io::save_trajectory(&out_path, &traj) {
        return fail(EXIT_INVALID, e);
    }
    write_manifest(
        common,
        "simulate",
        model_path,
        None,
        &["trajectory.csv".into()],
    );
    if traj.truncated {
        println!(
            "trajectory truncated after {} steps (constraint violation)",
            traj.steps()
        );
    } else {
        println!("trajectory completed {} steps", traj.steps());
    }
    EXIT_OK
}

fn cmd_verify(
    cert_path: &Path,
    model_path: &Path,
    node_limit: Option<usize>,
    threads: Option<usize>,
) -> u8 {
    let model = match load(model_path) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let cert = match io::load_certificate(cert_path) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let cfg = match derive_big_m(&model.system, &model.network) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let opts = CertifyOptions {
        epsilon_shrink: cert.epsilon_shrink,
        set_tol: cert.set_tol,
        node_limit,
        threads: default_threads(threads),
        ..CertifyOptions::default()
    };
    let ctrl = if cert.kind == CertKind::Asymptotic {
        let Some(parts) = model.dual_mode.as_ref() else {
            return fail(
                EXIT_INVALID,
                "asymptotic certificate needs a dual_mode model",
            );
        };
        let Some(s) = cert.s_scale else {
            return fail(EXIT_INVALID, "certificate carries no scaling factor");
        };
        match parts.controller(model.network.clone(), s) {
            Ok(c) => Some(c),
            Err(e) => return fail(EXIT_INVALID, e),
        }
    } else {
        None
    };
    let records = match replay_certificate(
        &model.system,
        &model.network,
        &cfg,
        &cert,
        ctrl.as_ref(),
        &opts,
    ) {
        Ok(r) => r,
        Err(CertifyError::Precondition(msg)) => return fail(EXIT_INVALID, msg),
        Err(e) => return fail(certify_exit(&e), e),
    };
    let mut all_passed = true;
    for c in &records {
        println!(
            "  [{}] {}{} (residual {:.3e}, tol {:.1e})",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            if c.sampled { " (sampled)" } else { "" },
            c.residual,
            c.tolerance
        );
        all_passed &= c.passed;
    }
    if all_passed {
        println!("certificate verified");
        EXIT_OK
    } else {
        println!("certificate REJECTED");
        EXIT_INCONCLUSIVE
    }
}
