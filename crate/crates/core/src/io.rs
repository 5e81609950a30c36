//! Structured-text file formats: models, sets, reach results, certificates
//! (all TOML), and trajectories (delimited text).
//!
//! One human-editable text format for everything keeps fixtures diffable and
//! certificates auditable. Loaders re-check every model-level invariant:
//! dimension chains, zero offsets on cells containing the origin, sampled
//! cell coverage, the controller vanishing at zero, and — when a dual-mode
//! section is present — that the local controller's region of attraction
//! stays inside the zero-offset cells (sampled on the ellipsoid boundary).

use crate::certify::{CertKind, Certificate, CheckRecord};
use crate::geometry::{Ellipsoid, Polytope};
use crate::models::{
    scaled_ellipsoid_samples, AffineMap, DualModeController, KappaCell, MaxoutLayer, MaxoutNet,
    ModelError, PwaSystem, Region,
};
use crate::reach::ReachResult;
use crate::sim::{Branch, Trajectory};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: schema error: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: model validation failed: {message}")]
    Validation { path: String, message: String },
}

impl FileError {
    fn schema(path: &Path, message: impl Into<String>) -> FileError {
        FileError::Schema {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    fn validation(path: &Path, message: impl std::fmt::Display) -> FileError {
        FileError::Validation {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

// ---------------------------------------------------------------- schemas

#[derive(Debug, Serialize, Deserialize)]
struct PolySection {
    #[serde(rename = "H")]
    normals: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    offsets: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionSection {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    p: Vec<f64>,
    #[serde(rename = "H")]
    normals: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    offsets: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemSection {
    state_dim: usize,
    input_dim: usize,
    state_set: PolySection,
    input_set: PolySection,
    #[serde(rename = "region")]
    regions: Vec<RegionSection>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerSection {
    #[serde(rename = "W")]
    weight: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    bias: Vec<f64>,
    channels: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutputSection {
    #[serde(rename = "W")]
    weight: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkSection {
    #[serde(rename = "layer", default)]
    layers: Vec<LayerSection>,
    output: OutputSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct KappaSection {
    #[serde(rename = "K")]
    gain: Vec<Vec<f64>>,
    #[serde(rename = "k")]
    offset: Vec<f64>,
    cell: PolySection,
}

#[derive(Debug, Serialize, Deserialize)]
struct DualModeSection {
    #[serde(rename = "S")]
    shape: Vec<Vec<f64>>,
    xi_star: f64,
    #[serde(rename = "kappa")]
    cells: Vec<KappaSection>,
}

/// Solver options carried inside a model file; all optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    pub template: Option<String>,
    pub epsilon_shrink: Option<f64>,
    pub set_tol: Option<f64>,
    pub k_limit: Option<usize>,
    pub iter_limit: Option<usize>,
    pub node_limit: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFileSchema {
    system: SystemSection,
    network: NetworkSection,
    dual_mode: Option<DualModeSection>,
    #[serde(default)]
    options: Option<ModelOptions>,
}

// ------------------------------------------------------------- conversion

fn to_matrix(rows: &[Vec<f64>], what: &str, path: &Path) -> Result<DMatrix<f64>, FileError> {
    if rows.is_empty() {
        return Err(FileError::schema(path, format!("{what}: no rows")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(FileError::schema(
            path,
            format!("{what}: ragged or empty rows"),
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn to_polytope(s: &PolySection, what: &str, path: &Path) -> Result<Polytope, FileError> {
    let normals = to_matrix(&s.normals, what, path)?;
    if s.offsets.len() != normals.nrows() {
        return Err(FileError::schema(
            path,
            format!(
                "{what}: {} offsets for {} rows",
                s.offsets.len(),
                normals.nrows()
            ),
        ));
    }
    Polytope::new(normals, DVector::from_vec(s.offsets.clone()))
        .map_err(|e| FileError::validation(path, e))
}

fn from_polytope(p: &Polytope) -> PolySection {
    PolySection {
        normals: from_matrix(p.normals()),
        offsets: p.offsets().iter().copied().collect(),
    }
}

/// A parsed and validated model file.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub system: PwaSystem,
    pub network: MaxoutNet,
    /// Local controller data for the dual-mode law, when present.
    pub dual_mode: Option<DualModeParts>,
    pub options: ModelOptions,
}

/// The dual-mode ingredients a model file supplies; the scaling factor comes
/// from certification, so the controller is assembled later.
#[derive(Debug, Clone)]
pub struct DualModeParts {
    pub kappa: Vec<KappaCell>,
    pub roa: Ellipsoid,
}

impl DualModeParts {
    /// Builds the switching controller for a given certified scaling.
    pub fn controller(
        &self,
        net: MaxoutNet,
        s_scale: f64,
    ) -> Result<DualModeController, ModelError> {
        DualModeController::new(net, self.kappa.clone(), self.roa.clone(), s_scale)
    }
}

/// Loads and fully validates a model file.
pub fn load_model(path: &Path) -> Result<LoadedModel, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let schema: ModelFileSchema = toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;

    let n = schema.system.state_dim;
    let m = schema.system.input_dim;
    let state_set = to_polytope(&schema.system.state_set, "state_set", path)?;
    let input_set = to_polytope(&schema.system.input_set, "input_set", path)?;
    if state_set.dim() != n || input_set.dim() != m {
        return Err(FileError::schema(
            path,
            "state_set/input_set dimensions disagree with state_dim/input_dim",
        ));
    }
    let mut regions = Vec::new();
    for (i, r) in schema.system.regions.iter().enumerate() {
        let cell = to_polytope(
            &PolySection {
                normals: r.normals.clone(),
                offsets: r.offsets.clone(),
            },
            &format!("region {i} cell"),
            path,
        )?;
        regions.push(Region {
            a: to_matrix(&r.a, &format!("region {i} A"), path)?,
            b: to_matrix(&r.b, &format!("region {i} B"), path)?,
            p: DVector::from_vec(r.p.clone()),
            cell,
        });
    }
    let system = PwaSystem::new(regions, state_set, input_set)
        .map_err(|e| FileError::validation(path, e))?;

    let mut hidden = Vec::new();
    for (i, layer) in schema.network.layers.iter().enumerate() {
        hidden.push(MaxoutLayer {
            weight: to_matrix(&layer.weight, &format!("layer {i} W"), path)?,
            bias: DVector::from_vec(layer.bias.clone()),
            channels: layer.channels,
        });
    }
    let output = AffineMap {
        weight: to_matrix(&schema.network.output.weight, "output W", path)?,
        bias: DVector::from_vec(schema.network.output.bias.clone()),
    };
    let network = MaxoutNet::new(hidden, output).map_err(|e| FileError::validation(path, e))?;
    if network.input_dim() != n || network.output_dim() != m {
        return Err(FileError::schema(
            path,
            format!(
                "network maps {} -> {}, expected {} -> {}",
                network.input_dim(),
                network.output_dim(),
                n,
                m
            ),
        ));
    }
    if !network.vanishes_at_zero(1e-7) {
        return Err(FileError::validation(
            path,
            "controller output at the origin is nonzero; saturate the network first",
        ));
    }

    let dual_mode = match &schema.dual_mode {
        None => None,
        Some(section) => {
            let shape = to_matrix(&section.shape, "dual_mode S", path)?;
            let roa = Ellipsoid::new(shape, section.xi_star)
                .map_err(|e| FileError::validation(path, e))?;
            if roa.dim() != n {
                return Err(FileError::schema(path, "dual_mode S dimension mismatch"));
            }
            let mut kappa = Vec::new();
            for (i, c) in section.cells.iter().enumerate() {
                kappa.push(KappaCell {
                    gain: to_matrix(&c.gain, &format!("kappa cell {i} K"), path)?,
                    offset: DVector::from_vec(c.offset.clone()),
                    cell: to_polytope(&c.cell, &format!("kappa cell {i}"), path)?,
                });
            }
            let parts = DualModeParts { kappa, roa };
            // the attraction region must live inside the zero-offset cells
            // (sampled on the boundary; the level set definition demands it)
            for x in scaled_ellipsoid_samples(&parts.roa, 1.0, 64) {
                let u = parts
                    .kappa
                    .iter()
                    .find(|c| c.cell.contains_point(&x, 1e-7))
                    .map(|c| &c.gain * &x + &c.offset)
                    .ok_or_else(|| {
                        FileError::validation(
                            path,
                            format!("kappa cells do not cover the attraction region at {x:?}"),
                        )
                    })?;
                match system.region_of(&x, &u) {
                    Some(i) if system.regions()[i].p.amax() <= 1e-9 => {}
                    _ => {
                        return Err(FileError::validation(
                            path,
                            format!("attraction region leaves the zero-offset cells at {x:?}"),
                        ))
                    }
                }
            }
            Some(parts)
        }
    };

    Ok(LoadedModel {
        system,
        network,
        dual_mode,
        options: schema.options.unwrap_or_default(),
    })
}

/// Writes a model file (used to ship fixtures and for round-trip tests).
pub fn save_model(
    path: &Path,
    sys: &PwaSystem,
    net: &MaxoutNet,
    dual: Option<&DualModeParts>,
    options: &ModelOptions,
) -> Result<(), FileError> {
    let schema = ModelFileSchema {
        system: SystemSection {
            state_dim: sys.state_dim(),
            input_dim: sys.input_dim(),
            state_set: from_polytope(sys.state_set()),
            input_set: from_polytope(sys.input_set()),
            regions: sys
                .regions()
                .iter()
                .map(|r| RegionSection {
                    a: from_matrix(&r.a),
                    b: from_matrix(&r.b),
                    p: r.p.iter().copied().collect(),
                    normals: from_matrix(r.cell.normals()),
                    offsets: r.cell.offsets().iter().copied().collect(),
                })
                .collect(),
        },
        network: NetworkSection {
            layers: net
                .hidden_layers()
                .iter()
                .map(|l| LayerSection {
                    weight: from_matrix(&l.weight),
                    bias: l.bias.iter().copied().collect(),
                    channels: l.channels,
                })
                .collect(),
            output: OutputSection {
                weight: from_matrix(&net.output_layer().weight),
                bias: net.output_layer().bias.iter().copied().collect(),
            },
        },
        dual_mode: dual.map(|d| DualModeSection {
            shape: from_matrix(d.roa.shape()),
            xi_star: d.roa.level(),
            cells: d
                .kappa
                .iter()
                .map(|c| KappaSection {
                    gain: from_matrix(&c.gain),
                    offset: c.offset.iter().copied().collect(),
                    cell: from_polytope(&c.cell),
                })
                .collect(),
        }),
        options: Some(options.clone()),
    };
    write_toml(path, &schema)
}

// ------------------------------------------------------------------- sets

#[derive(Debug, Serialize, Deserialize)]
struct SetFileSchema {
    dim: usize,
    #[serde(flatten)]
    set: PolySection,
}

pub fn load_set(path: &Path) -> Result<Polytope, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let schema: SetFileSchema = toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let p = to_polytope(&schema.set, "set", path)?;
    if p.dim() != schema.dim {
        return Err(FileError::schema(path, "declared dim disagrees with H"));
    }
    Ok(p)
}

pub fn save_set(path: &Path, set: &Polytope) -> Result<(), FileError> {
    write_toml(
        path,
        &SetFileSchema {
            dim: set.dim(),
            set: from_polytope(set),
        },
    )
}

// ----------------------------------------------------------- reach results

#[derive(Debug, Serialize, Deserialize)]
struct ReachFileSchema {
    steps: usize,
    conclusive: bool,
    #[serde(rename = "C")]
    directions: Vec<Vec<f64>>,
    #[serde(rename = "c")]
    optima: Vec<f64>,
    set: PolySection,
}

/// Writes a reach result (directions, optima, H-representation) for plotting
/// or external cross-checks.
pub fn save_reach(path: &Path, steps: usize, result: &ReachResult) -> Result<(), FileError> {
    let schema = ReachFileSchema {
        steps,
        conclusive: result.conclusive,
        directions: from_matrix(result.set.normals()),
        optima: result.optima.clone(),
        set: from_polytope(&result.set),
    };
    write_toml(path, &schema)
}

/// Reads back a stored reach result as `(steps, conclusive, set, optima)`.
pub fn load_reach(path: &Path) -> Result<(usize, bool, Polytope, Vec<f64>), FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let schema: ReachFileSchema = toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let set = to_polytope(&schema.set, "set", path)?;
    Ok((schema.steps, schema.conclusive, set, schema.optima))
}

// ------------------------------------------------------------ certificates

#[derive(Debug, Serialize, Deserialize)]
struct CheckSchema {
    name: String,
    passed: bool,
    residual: f64,
    tolerance: f64,
    sampled: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CertificateSchema {
    kind: String,
    conclusive: bool,
    epsilon_shrink: f64,
    set_tol: f64,
    state_dim: usize,
    input_dim: usize,
    region_count: usize,
    k_star: Option<usize>,
    s_scale: Option<f64>,
    fmax_iterations: Option<usize>,
    #[serde(default)]
    resource_limited: bool,
    template: Vec<Vec<f64>>,
    f_max: Option<PolySection>,
    f_min: Option<PolySection>,
    #[serde(rename = "check", default)]
    checks: Vec<CheckSchema>,
}

pub fn save_certificate(path: &Path, cert: &Certificate) -> Result<(), FileError> {
    let schema = CertificateSchema {
        kind: match cert.kind {
            CertKind::Uub => "uub".into(),
            CertKind::Asymptotic => "asymptotic".into(),
        },
        conclusive: cert.conclusive,
        epsilon_shrink: cert.epsilon_shrink,
        set_tol: cert.set_tol,
        state_dim: cert.state_dim,
        input_dim: cert.input_dim,
        region_count: cert.region_count,
        k_star: cert.k_star,
        s_scale: cert.s_scale,
        fmax_iterations: cert.fmax_iterations,
        resource_limited: cert.resource_limited,
        template: from_matrix(&cert.template),
        f_max: cert.f_max.as_ref().map(from_polytope),
        f_min: cert.f_min.as_ref().map(from_polytope),
        checks: cert
            .checks
            .iter()
            .map(|c| CheckSchema {
                name: c.name.clone(),
                passed: c.passed,
                residual: c.residual,
                tolerance: c.tolerance,
                sampled: c.sampled,
            })
            .collect(),
    };
    write_toml(path, &schema)
}

pub fn load_certificate(path: &Path) -> Result<Certificate, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let schema: CertificateSchema = toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let kind = match schema.kind.as_str() {
        "uub" => CertKind::Uub,
        "asymptotic" => CertKind::Asymptotic,
        other => {
            return Err(FileError::schema(
                path,
                format!("unknown certificate kind {other:?}"),
            ))
        }
    };
    let f_max = schema
        .f_max
        .as_ref()
        .map(|s| to_polytope(s, "f_max", path))
        .transpose()?;
    let f_min = schema
        .f_min
        .as_ref()
        .map(|s| to_polytope(s, "f_min", path))
        .transpose()?;
    Ok(Certificate {
        kind,
        conclusive: schema.conclusive,
        f_max,
        f_min,
        k_star: schema.k_star,
        epsilon_shrink: schema.epsilon_shrink,
        s_scale: schema.s_scale,
        fmax_iterations: schema.fmax_iterations,
        template: to_matrix(&schema.template, "template", path)?,
        set_tol: schema.set_tol,
        resource_limited: schema.resource_limited,
        checks: schema
            .checks
            .into_iter()
            .map(|c| CheckRecord {
                name: c.name,
                passed: c.passed,
                residual: c.residual,
                tolerance: c.tolerance,
                sampled: c.sampled,
            })
            .collect(),
        state_dim: schema.state_dim,
        input_dim: schema.input_dim,
        region_count: schema.region_count,
    })
}

// ------------------------------------------------------------ trajectories

/// Writes a trajectory as delimited text: one row per step with
/// `k, x..., u..., region, branch`, and a final row carrying the last state.
pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<(), FileError> {
    use std::fmt::Write as _;
    let n = traj.states[0].len();
    let m = traj.inputs.first().map_or(0, |u| u.len());
    let mut text = String::new();
    let _ = writeln!(text, "# closed-loop trajectory");
    let _ = writeln!(
        text,
        "# columns: k, x1..x{n}, u1..u{m}, region (1-based), branch; truncated = {}",
        traj.truncated
    );
    for (k, x) in traj.states.iter().enumerate() {
        let _ = write!(text, "{k}");
        for v in x.iter() {
            let _ = write!(text, ", {v}");
        }
        if k < traj.inputs.len() {
            for v in traj.inputs[k].iter() {
                let _ = write!(text, ", {v}");
            }
            let (region, branch) = &traj.modes[k];
            let _ = write!(
                text,
                ", {}, {}",
                region + 1,
                match branch {
                    Branch::Network => "net",
                    Branch::Local => "local",
                }
            );
        }
        let _ = writeln!(text);
    }
    std::fs::write(path, text).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a trajectory file back.
pub fn load_trajectory(path: &Path) -> Result<Trajectory, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut truncated = false;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            if let Some(flag) = line.split("truncated = ").nth(1) {
                truncated = flag.trim() == "true";
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() < 2 {
            return Err(FileError::Parse {
                path: path.display().to_string(),
                message: format!("line {}: too few fields", lineno + 1),
            });
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(FileError::Parse {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    // the final row has only k and the state; infer n from it
    let n = rows.last().expect("nonempty").len() - 1;
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    let mut modes = Vec::new();
    let parse = |tok: &str, lineno: usize| -> Result<f64, FileError> {
        tok.parse().map_err(|_| FileError::Parse {
            path: path.display().to_string(),
            message: format!("row {lineno}: bad number {tok:?}"),
        })
    };
    for (i, row) in rows.iter().enumerate() {
        let state: Result<Vec<f64>, _> = row[1..=n].iter().map(|t| parse(t, i)).collect();
        states.push(DVector::from_vec(state?));
        if row.len() > n + 1 {
            let m = row.len() - n - 3;
            let input: Result<Vec<f64>, _> =
                row[n + 1..=n + m].iter().map(|t| parse(t, i)).collect();
            inputs.push(DVector::from_vec(input?));
            let region: usize = row[n + m + 1].parse().map_err(|_| FileError::Parse {
                path: path.display().to_string(),
                message: format!("row {i}: bad region index"),
            })?;
            let branch = match row[n + m + 2].as_str() {
                "net" => Branch::Network,
                "local" => Branch::Local,
                other => {
                    return Err(FileError::Parse {
                        path: path.display().to_string(),
                        message: format!("row {i}: unknown branch {other:?}"),
                    })
                }
            };
            modes.push((region - 1, branch));
        }
    }
    Ok(Trajectory {
        states,
        inputs,
        modes,
        truncated,
    })
}

// ---------------------------------------------------------------- manifest

/// Run manifest written next to every CLI output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub model: String,
    pub seed: u64,
    pub set_tol: f64,
    pub epsilon_shrink: Option<f64>,
    pub node_limit: Option<usize>,
    pub outputs: Vec<String>,
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<(), FileError> {
    write_toml(path, manifest)
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let text = toml::to_string_pretty(value).map_err(|e| FileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|source| FileError::Read {
        path: path.display().to_string(),
        source,
    })
}
