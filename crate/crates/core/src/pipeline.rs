//! End-to-end reconstruction runs and the artifact files they produce:
//! mesh (OBJ + PLY), diagram JSON, loss-trace CSV, parameter dump, and a
//! run manifest sufficient for exact re-execution.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::{attach_filtration, build_vertex_set, triangulate};
use crate::error::{Error, Result};
use crate::extract::{extract_surface, Provenance, SurfaceMesh};
use crate::field::{init_params, GaussianParams};
use crate::geom::Mat;
use crate::metrics;
use crate::pointcloud::{format_from_path, load_pointcloud, normalize, PointCloud};
use crate::synth;
use crate::topo_opt::{optimize, LossSpec, OptimizerConfig};

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    /// Input cloud path; absent when a preset generates the cloud.
    pub input: Option<PathBuf>,
    pub preset: Option<String>,
    /// Preset sample count (defaults to the preset's own).
    pub n: Option<usize>,
    pub jitter: f64,
    pub out_dir: PathBuf,
    pub loss_path: Option<PathBuf>,
    pub base_res: Option<usize>,
    pub extra: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub export_complex: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            preset: None,
            n: None,
            jitter: 0.0,
            out_dir: PathBuf::from("."),
            loss_path: None,
            base_res: None,
            extra: None,
            optimizer: OptimizerConfig::default(),
            export_complex: false,
        }
    }
}

/// Optional-field mirror of RunConfig for JSON config files; present
/// fields override the command line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub jitter: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub loss_path: Option<PathBuf>,
    pub base_res: Option<usize>,
    pub extra: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_iters: Option<usize>,
    pub plateau_tol: Option<f64>,
    pub plateau_window: Option<usize>,
    pub rng_seed: Option<u64>,
    pub export_complex: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.preset {
            cfg.preset = Some(v.clone());
        }
        if let Some(v) = self.n {
            cfg.n = Some(v);
        }
        if let Some(v) = self.jitter {
            cfg.jitter = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.loss_path {
            cfg.loss_path = Some(v.clone());
        }
        if let Some(v) = self.base_res {
            cfg.base_res = Some(v);
        }
        if let Some(v) = self.extra {
            cfg.extra = Some(v);
        }
        if let Some(v) = self.learning_rate {
            cfg.optimizer.learning_rate = v;
        }
        if let Some(v) = self.max_iters {
            cfg.optimizer.max_iters = v;
        }
        if let Some(v) = self.plateau_tol {
            cfg.optimizer.plateau_tol = v;
        }
        if let Some(v) = self.plateau_window {
            cfg.optimizer.plateau_window = v;
        }
        if let Some(v) = self.rng_seed {
            cfg.optimizer.rng_seed = v;
        }
        if let Some(v) = self.export_complex {
            cfg.export_complex = v;
        }
    }
}

/// Resolution must track sampling density: the kernel widths shrink like
/// the point spacing, and a fine grid coarser than the widths leaves
/// spurious weak links along the data ridges.
pub fn default_base_res(dim: usize, n_points: usize) -> usize {
    if dim == 2 {
        32.max((2.0 * (n_points as f64).sqrt()).ceil() as usize)
    } else {
        24
    }
}

pub fn default_extra(dim: usize, base_res: usize) -> usize {
    if dim == 2 {
        base_res * base_res / 2
    } else {
        base_res.pow(3) / 4
    }
}

fn load_or_synthesize(cfg: &RunConfig) -> Result<(PointCloud, Option<synth::Preset>)> {
    match (&cfg.input, &cfg.preset) {
        (Some(path), _) => {
            let cloud = load_pointcloud(path, format_from_path(path))?;
            let preset = cfg.preset.as_deref().map(synth::preset).transpose()?;
            Ok((cloud, preset))
        }
        (None, Some(name)) => {
            let p = synth::preset(name)?;
            let n = cfg.n.unwrap_or(p.default_n);
            let cloud = synth::synth_cloud(name, n, cfg.optimizer.rng_seed, cfg.jitter)?;
            Ok((cloud, Some(p)))
        }
        (None, None) => Err(Error::Config(
            "either an input cloud or a preset is required".into(),
        )),
    }
}

fn resolve_loss(cfg: &RunConfig, preset: Option<&synth::Preset>) -> Result<LossSpec> {
    if let Some(path) = &cfg.loss_path {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        LossSpec::from_json(&text)
    } else if let Some(p) = preset {
        Ok(p.loss.clone())
    } else {
        Err(Error::Config(
            "no loss given: pass a loss file or use a preset".into(),
        ))
    }
}

pub fn params_to_json(params: &GaussianParams) -> serde_json::Value {
    let alphas: Vec<Vec<f64>> = params
        .alphas
        .iter()
        .map(|m| {
            (0..params.dim)
                .flat_map(|i| (0..params.dim).map(move |j| m.get(i, j)))
                .collect()
        })
        .collect();
    json!({ "dim": params.dim, "alphas": alphas })
}

pub fn params_from_json(text: &str) -> Result<GaussianParams> {
    #[derive(Deserialize)]
    struct P {
        dim: usize,
        alphas: Vec<Vec<f64>>,
    }
    let p: P = serde_json::from_str(text)?;
    if p.dim < 2 || p.dim > 3 {
        return Err(Error::Config(format!("bad parameter dimension {}", p.dim)));
    }
    let alphas = p
        .alphas
        .iter()
        .map(|row| {
            if row.len() != p.dim * p.dim {
                return Err(Error::Config(format!(
                    "expected {} entries per matrix, got {}",
                    p.dim * p.dim,
                    row.len()
                )));
            }
            let mut m = Mat::zero(p.dim);
            for i in 0..p.dim {
                for j in 0..p.dim {
                    m.set(i, j, row[i * p.dim + j]);
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianParams {
        alphas,
        dim: p.dim,
    })
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub mesh_obj: PathBuf,
    pub mesh_ply: PathBuf,
    pub diagram_json: PathBuf,
    pub trace_csv: PathBuf,
    pub params_json: PathBuf,
    pub manifest_json: PathBuf,
    pub best_loss: f64,
    pub iterations: usize,
    pub betti: Vec<usize>,
    pub chamfer: f64,
    pub used_fallback: bool,
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<RunSummary> {
    let (raw_cloud, preset) = load_or_synthesize(cfg)?;
    let spec = resolve_loss(cfg, preset.as_ref())?;
    let cloud = normalize(&raw_cloud)?;
    let dim = cloud.dim;
    let base_res = cfg.base_res.unwrap_or_else(|| default_base_res(dim, cloud.points.len()));
    let extra = cfg.extra.unwrap_or_else(|| default_extra(dim, base_res));

    let init = init_params(&cloud)?;
    let vs = build_vertex_set(&cloud, base_res, extra, &init, cfg.optimizer.rng_seed)?;
    let complex = triangulate(&vs)?;
    fs::create_dir_all(&cfg.out_dir)?;
    if cfg.export_complex {
        let mut f = fs::File::create(cfg.out_dir.join("complex.off"))?;
        complex.write_off(&mut f)?;
    }

    let result = optimize(&cloud, &complex, init, &spec, &cfg.optimizer)?;
    let fc = attach_filtration(&complex, &cloud, &result.params)?;
    let mesh = extract_surface(&fc, &result.diagram, &spec, &cloud)?;
    let betti = mesh.betti_numbers()?;
    let chamfer = metrics::chamfer_one_way(&cloud, &mesh)?;

    // export in the original coordinate frame
    let mut out_mesh = mesh.clone();
    out_mesh.vertices = mesh.vertices.iter().map(|p| cloud.scale.apply(p)).collect();

    let mesh_obj = cfg.out_dir.join("mesh.obj");
    let mesh_ply = cfg.out_dir.join("mesh.ply");
    let diagram_json = cfg.out_dir.join("diagram.json");
    let trace_csv = cfg.out_dir.join("trace.csv");
    let params_json = cfg.out_dir.join("params.json");
    let manifest_json = cfg.out_dir.join("manifest.json");

    out_mesh.write_obj(&mut fs::File::create(&mesh_obj)?)?;
    out_mesh.write_ply(&mut fs::File::create(&mesh_ply)?)?;
    fs::write(
        &diagram_json,
        serde_json::to_string_pretty(&result.diagram.to_json())?,
    )?;
    {
        let mut f = fs::File::create(&trace_csv)?;
        writeln!(f, "iter,loss,active_terms,lifetimes")?;
        for (i, row) in result.rows.iter().enumerate() {
            let lifetimes: Vec<String> =
                row.lifetimes.iter().map(|l| l.to_string()).collect();
            writeln!(
                f,
                "{},{},{},{}",
                i,
                row.loss,
                row.active_terms,
                lifetimes.join(";")
            )?;
        }
    }
    fs::write(
        &params_json,
        serde_json::to_string_pretty(&params_to_json(&result.params))?,
    )?;
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "resolved": {
            "base_res": base_res,
            "extra": extra,
            "dim": dim,
            "n_points": cloud.points.len(),
            "loss": spec,
            "normalization": { "scale": cloud.scale.scale, "offset": cloud.scale.offset },
        },
        "result": {
            "best_loss": result.best_loss,
            "iterations": result.rows.len(),
            "betti": betti,
            "chamfer": chamfer,
            "provenance": match mesh.provenance {
                Provenance::RefinedCycle => "refined_cycle",
                Provenance::SuperlevelBoundary => "superlevel_boundary",
            },
        },
    });
    fs::write(&manifest_json, serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunSummary {
        mesh_obj,
        mesh_ply,
        diagram_json,
        trace_csv,
        params_json,
        manifest_json,
        best_loss: result.best_loss,
        iterations: result.rows.len(),
        betti,
        chamfer,
        used_fallback: mesh.provenance == Provenance::SuperlevelBoundary,
    })
}

pub fn cmd_diagram(cfg: &RunConfig, params_path: Option<&Path>) -> Result<serde_json::Value> {
    let (raw_cloud, _) = load_or_synthesize(cfg)?;
    let cloud = normalize(&raw_cloud)?;
    let dim = cloud.dim;
    let base_res = cfg.base_res.unwrap_or_else(|| default_base_res(dim, cloud.points.len()));
    let extra = cfg.extra.unwrap_or_else(|| default_extra(dim, base_res));
    let init = init_params(&cloud)?;
    let params = match params_path {
        Some(p) => params_from_json(&fs::read_to_string(p)?)?,
        None => init.clone(),
    };
    if params.alphas.len() != cloud.points.len() || params.dim != dim {
        return Err(Error::Config(format!(
            "parameter file has {} matrices of dim {}, cloud needs {} of dim {}",
            params.alphas.len(),
            params.dim,
            cloud.points.len(),
            dim
        )));
    }
    let vs = build_vertex_set(&cloud, base_res, extra, &init, cfg.optimizer.rng_seed)?;
    let complex = triangulate(&vs)?;
    let fc = attach_filtration(&complex, &cloud, &params)?;
    let diagram = crate::persistence::compute_persistence(&fc)?;
    Ok(diagram.to_json())
}

/// Parse a mesh written by write_obj (v / l / f records).
pub fn read_obj(path: &Path) -> Result<SurfaceMesh> {
    let text = fs::read_to_string(path)?;
    let mut vertices: Vec<crate::geom::Point> = Vec::new();
    let mut simplices: Vec<Vec<u32>> = Vec::new();
    let mut dim = 0usize;
    let bad = |msg: String| Error::Parse {
        path: path.display().to_string(),
        msg,
    };
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: Vec<f64> = it
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
                if coords.len() != 3 {
                    return Err(bad(format!("line {}: expected 3 coordinates", ln + 1)));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some(kind @ ("l" | "f")) => {
                let want = if kind == "l" { 2 } else { 3 };
                let idx: Vec<u32> = it
                    .map(|t| t.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
                if idx.len() != want {
                    return Err(bad(format!(
                        "line {}: expected {want} indices",
                        ln + 1
                    )));
                }
                if idx.iter().any(|&i| i == 0 || i as usize > vertices.len()) {
                    return Err(bad(format!("line {}: index out of range", ln + 1)));
                }
                dim = want - 1;
                simplices.push(idx.iter().map(|&i| i - 1).collect());
            }
            _ => {}
        }
    }
    if simplices.is_empty() {
        return Err(Error::EmptyMesh(format!(
            "{} contains no l/f records",
            path.display()
        )));
    }
    Ok(SurfaceMesh {
        dim,
        vertices,
        simplices,
        provenance: Provenance::RefinedCycle,
    })
}

#[derive(Deserialize)]
pub struct TruthEntry {
    pub shape: String,
    pub counts: Vec<usize>,
}

pub fn cmd_evaluate(
    cloud_paths: &[PathBuf],
    mesh_paths: &[PathBuf],
    truth_path: &Path,
) -> Result<metrics::EvalReport> {
    let truth: Vec<TruthEntry> = serde_json::from_str(&fs::read_to_string(truth_path)?)?;
    if truth.len() != cloud_paths.len() || cloud_paths.len() != mesh_paths.len() {
        return Err(Error::LengthMismatch(format!(
            "{} truth entries, {} clouds, {} meshes",
            truth.len(),
            cloud_paths.len(),
            mesh_paths.len()
        )));
    }
    let mut clouds = Vec::new();
    let mut meshes = Vec::new();
    for (cp, mp) in cloud_paths.iter().zip(mesh_paths) {
        let cloud = normalize(&load_pointcloud(cp, format_from_path(cp))?)?;
        let mut mesh = read_obj(mp)?;
        // bring the mesh into the cloud's normalized frame
        let t = cloud.scale;
        mesh.vertices = mesh
            .vertices
            .iter()
            .map(|p| {
                [
                    (p[0] - t.offset[0]) / t.scale,
                    (p[1] - t.offset[1]) / t.scale,
                    (p[2] - t.offset[2]) / t.scale,
                ]
            })
            .collect();
        clouds.push(cloud);
        meshes.push(mesh);
    }
    let shapes: Vec<(String, Vec<usize>)> = truth
        .into_iter()
        .map(|t| (t.shape, t.counts))
        .collect();
    metrics::evaluate(&shapes, &clouds, &meshes)
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for p in &cloud.points {
        if cloud.dim == 2 {
            writeln!(f, "{} {}", p[0], p[1])?;
        } else {
            writeln!(f, "{} {} {}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}
