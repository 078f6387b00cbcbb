//! C ABI for the reconstruction pipeline. Handles are opaque; every
//! fallible call returns a `TrStatus` and writes results through out
//! pointers. A thread-local message with the failure detail is available
//! via `tr_last_error_message` until the next failing call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};

use libc::{c_char, c_double, size_t};

use toporecon::complex::attach_filtration;
use toporecon::extract::{extract_surface, SurfaceMesh};
use toporecon::field::init_params;
use toporecon::pipeline::{cmd_reconstruct, read_obj, RunConfig};
use toporecon::pointcloud::{format_from_path, load_pointcloud, normalize, PointCloud};
use toporecon::synth;
use toporecon::topo_opt::{optimize, LossSpec, OptimizerConfig};
use toporecon::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    TrOk = 0,
    TrNullArgument = 1,
    TrInvalidUtf8 = 2,
    TrParseError = 3,
    TrInvalidConfig = 4,
    TrDegenerateInput = 5,
    TrNumericFailure = 6,
    TrTopologyFailure = 7,
    TrIoError = 8,
    TrBufferTooSmall = 9,
    TrInternal = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn status_of(err: &Error) -> TrStatus {
    match err {
        Error::Parse { .. } => TrStatus::TrParseError,
        Error::Config(_) | Error::LengthMismatch(_) => TrStatus::TrInvalidConfig,
        Error::Dimension(_)
        | Error::EmptyCloud(_)
        | Error::DegenerateCloud(_)
        | Error::DegenerateInput(_)
        | Error::EmptyMesh(_) => TrStatus::TrDegenerateInput,
        Error::SingularCovariance { .. } | Error::Divergence(_) => TrStatus::TrNumericFailure,
        Error::NonMonotoneFiltration(_)
        | Error::NotFaceClosed(_)
        | Error::UnsupportedDimension(_)
        | Error::TooLargeForOracle { .. }
        | Error::EmptySuperlevel { .. }
        | Error::ConvergenceFailure(_) => TrStatus::TrTopologyFailure,
        Error::Io(_) => TrStatus::TrIoError,
        Error::Json(_) => TrStatus::TrParseError,
    }
}

fn fail(err: Error) -> TrStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// An input point cloud (opaque).
pub struct TrCloud {
    cloud: PointCloud,
}

/// A reconstructed surface mesh (opaque).
pub struct TrMesh {
    mesh: SurfaceMesh,
}

/// Tuning knobs for reconstruction. Zero-initialize and pass to
/// `tr_options_default` first; zero/negative fields then mean "default".
#[repr(C)]
#[derive(Clone, Copy)]
pub struct TrOptions {
    /// Base grid resolution (0 = 32 in 2D, 24 in 3D).
    pub base_res: size_t,
    /// Extra field-weighted vertices (0 = base_res^d / 4).
    pub extra: size_t,
    pub learning_rate: c_double,
    pub max_iters: size_t,
    pub plateau_tol: c_double,
    pub plateau_window: size_t,
    pub rng_seed: u64,
}

#[no_mangle]
pub extern "C" fn tr_options_default(out: *mut TrOptions) -> TrStatus {
    if out.is_null() {
        set_error("tr_options_default: out is null");
        return TrStatus::TrNullArgument;
    }
    let d = OptimizerConfig::default();
    unsafe {
        *out = TrOptions {
            base_res: 0,
            extra: 0,
            learning_rate: d.learning_rate,
            max_iters: d.max_iters,
            plateau_tol: d.plateau_tol,
            plateau_window: d.plateau_window,
            rng_seed: d.rng_seed,
        };
    }
    TrStatus::TrOk
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, TrStatus> {
    if p.is_null() {
        set_error(&format!("{what} is null"));
        return Err(TrStatus::TrNullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        TrStatus::TrInvalidUtf8
    })
}

/// Load a point cloud from an .xyz or .ply file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` owns the cloud and must be released with
/// `tr_cloud_free`.
#[no_mangle]
pub unsafe extern "C" fn tr_cloud_load(path: *const c_char, out: *mut *mut TrCloud) -> TrStatus {
    if out.is_null() {
        set_error("tr_cloud_load: out is null");
        return TrStatus::TrNullArgument;
    }
    let path = match cstr(path, "path") {
        Ok(s) => PathBuf::from(s),
        Err(s) => return s,
    };
    match load_pointcloud(&path, format_from_path(&path)) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(TrCloud { cloud }));
            TrStatus::TrOk
        }
        Err(e) => fail(e),
    }
}

/// Build a cloud from an interleaved coordinate buffer (`n * dim` doubles,
/// dim 2 or 3).
///
/// # Safety
/// `coords` must point to `n * dim` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tr_cloud_from_points(
    coords: *const c_double,
    n: size_t,
    dim: size_t,
    out: *mut *mut TrCloud,
) -> TrStatus {
    if coords.is_null() || out.is_null() {
        set_error("tr_cloud_from_points: null argument");
        return TrStatus::TrNullArgument;
    }
    if dim != 2 && dim != 3 {
        set_error(&format!("tr_cloud_from_points: dim must be 2 or 3, got {dim}"));
        return TrStatus::TrInvalidConfig;
    }
    let flat = std::slice::from_raw_parts(coords, n * dim);
    let points: Vec<[f64; 3]> = flat
        .chunks(dim)
        .map(|c| {
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(c);
            p
        })
        .collect();
    match PointCloud::new(points, dim) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(TrCloud { cloud }));
            TrStatus::TrOk
        }
        Err(e) => fail(e),
    }
}

/// Sample one of the built-in synthetic shapes.
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tr_cloud_synth(
    name: *const c_char,
    n: size_t,
    seed: u64,
    jitter: c_double,
    out: *mut *mut TrCloud,
) -> TrStatus {
    if out.is_null() {
        set_error("tr_cloud_synth: out is null");
        return TrStatus::TrNullArgument;
    }
    let name = match cstr(name, "name") {
        Ok(s) => s,
        Err(s) => return s,
    };
    let n = if n == 0 {
        match synth::preset(name) {
            Ok(p) => p.default_n,
            Err(e) => return fail(e),
        }
    } else {
        n
    };
    match synth::synth_cloud(name, n, seed, jitter) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(TrCloud { cloud }));
            TrStatus::TrOk
        }
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub extern "C" fn tr_cloud_len(cloud: *const TrCloud) -> size_t {
    if cloud.is_null() {
        return 0;
    }
    unsafe { (*cloud).cloud.points.len() }
}

#[no_mangle]
pub extern "C" fn tr_cloud_dim(cloud: *const TrCloud) -> size_t {
    if cloud.is_null() {
        return 0;
    }
    unsafe { (*cloud).cloud.dim }
}

/// # Safety
/// `cloud` must come from a `tr_cloud_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tr_cloud_free(cloud: *mut TrCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

fn reconstruct_impl(
    cloud: &PointCloud,
    loss_json: &str,
    opts: &TrOptions,
) -> toporecon::Result<SurfaceMesh> {
    let spec = LossSpec::from_json(loss_json)?;
    let cloud = normalize(cloud)?;
    let base_res = if opts.base_res == 0 {
        toporecon::pipeline::default_base_res(cloud.dim, cloud.points.len())
    } else {
        opts.base_res
    };
    let extra = if opts.extra == 0 {
        toporecon::pipeline::default_extra(cloud.dim, base_res)
    } else {
        opts.extra
    };
    let cfg = OptimizerConfig {
        learning_rate: opts.learning_rate,
        max_iters: opts.max_iters,
        plateau_tol: opts.plateau_tol,
        plateau_window: opts.plateau_window,
        rng_seed: opts.rng_seed,
    };
    let init = init_params(&cloud)?;
    let vs = toporecon::complex::build_vertex_set(&cloud, base_res, extra, &init, opts.rng_seed)?;
    let complex = toporecon::complex::triangulate(&vs)?;
    let result = optimize(&cloud, &complex, init, &spec, &cfg)?;
    let fc = attach_filtration(&complex, &cloud, &result.params)?;
    let mut mesh = extract_surface(&fc, &result.diagram, &spec, &cloud)?;
    mesh.vertices = mesh.vertices.iter().map(|p| cloud.scale.apply(p)).collect();
    Ok(mesh)
}

/// Run the full pipeline on a cloud with a loss specification given as
/// JSON (`{"terms": [{"dim":1,"index":1,"weight":-1.0}, ...],
/// "target_counts": {"1": 1}}`).
///
/// # Safety
/// `cloud` must be a live handle, `loss_json` NUL-terminated, `opts` and
/// `out` valid. On success `*out` must be freed with `tr_mesh_free`.
#[no_mangle]
pub unsafe extern "C" fn tr_reconstruct(
    cloud: *const TrCloud,
    loss_json: *const c_char,
    opts: *const TrOptions,
    out: *mut *mut TrMesh,
) -> TrStatus {
    if cloud.is_null() || opts.is_null() || out.is_null() {
        set_error("tr_reconstruct: null argument");
        return TrStatus::TrNullArgument;
    }
    let loss = match cstr(loss_json, "loss_json") {
        Ok(s) => s,
        Err(s) => return s,
    };
    match reconstruct_impl(&(*cloud).cloud, loss, &*opts) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(TrMesh { mesh }));
            TrStatus::TrOk
        }
        Err(e) => fail(e),
    }
}

/// Run the pipeline from a JSON run configuration (same schema as the CLI
/// `--config` file) and write the artifact set to its `out_dir`.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` may be null when the mesh
/// handle is not wanted.
#[no_mangle]
pub unsafe extern "C" fn tr_run_config(
    config_json: *const c_char,
    out: *mut *mut TrMesh,
) -> TrStatus {
    let text = match cstr(config_json, "config_json") {
        Ok(s) => s,
        Err(s) => return s,
    };
    let file: toporecon::pipeline::ConfigFile = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return fail(Error::Json(e)),
    };
    let mut cfg = RunConfig::default();
    file.apply(&mut cfg);
    let summary = match cmd_reconstruct(&cfg) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if !out.is_null() {
        match read_obj(&summary.mesh_obj) {
            Ok(mesh) => *out = Box::into_raw(Box::new(TrMesh { mesh })),
            Err(e) => return fail(e),
        }
    }
    TrStatus::TrOk
}

#[no_mangle]
pub extern "C" fn tr_mesh_vertex_count(mesh: *const TrMesh) -> size_t {
    if mesh.is_null() {
        return 0;
    }
    unsafe { (*mesh).mesh.vertices.len() }
}

#[no_mangle]
pub extern "C" fn tr_mesh_simplex_count(mesh: *const TrMesh) -> size_t {
    if mesh.is_null() {
        return 0;
    }
    unsafe { (*mesh).mesh.simplices.len() }
}

/// Dimension of the mesh simplices (1 = polyline, 2 = triangles).
#[no_mangle]
pub extern "C" fn tr_mesh_dim(mesh: *const TrMesh) -> size_t {
    if mesh.is_null() {
        return 0;
    }
    unsafe { (*mesh).mesh.dim }
}

/// Copy vertex coordinates into `buf` (xyz-interleaved, `cap` doubles).
///
/// # Safety
/// `buf` must hold at least `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn tr_mesh_copy_vertices(
    mesh: *const TrMesh,
    buf: *mut c_double,
    cap: size_t,
) -> TrStatus {
    if mesh.is_null() || buf.is_null() {
        set_error("tr_mesh_copy_vertices: null argument");
        return TrStatus::TrNullArgument;
    }
    let verts = &(*mesh).mesh.vertices;
    if cap < verts.len() * 3 {
        set_error(&format!(
            "tr_mesh_copy_vertices: need {} doubles, buffer holds {cap}",
            verts.len() * 3
        ));
        return TrStatus::TrBufferTooSmall;
    }
    let out = std::slice::from_raw_parts_mut(buf, verts.len() * 3);
    for (i, v) in verts.iter().enumerate() {
        out[3 * i..3 * i + 3].copy_from_slice(v);
    }
    TrStatus::TrOk
}

/// Copy simplex vertex indices into `buf` ((dim+1)-interleaved, `cap`
/// entries).
///
/// # Safety
/// `buf` must hold at least `cap` u32 values.
#[no_mangle]
pub unsafe extern "C" fn tr_mesh_copy_indices(
    mesh: *const TrMesh,
    buf: *mut u32,
    cap: size_t,
) -> TrStatus {
    if mesh.is_null() || buf.is_null() {
        set_error("tr_mesh_copy_indices: null argument");
        return TrStatus::TrNullArgument;
    }
    let m = &(*mesh).mesh;
    let width = m.dim + 1;
    if cap < m.simplices.len() * width {
        set_error(&format!(
            "tr_mesh_copy_indices: need {} entries, buffer holds {cap}",
            m.simplices.len() * width
        ));
        return TrStatus::TrBufferTooSmall;
    }
    let out = std::slice::from_raw_parts_mut(buf, m.simplices.len() * width);
    for (i, s) in m.simplices.iter().enumerate() {
        out[width * i..width * (i + 1)].copy_from_slice(s);
    }
    TrStatus::TrOk
}

/// Write Betti numbers 0..=dim into `buf`; `*written` gets the count.
///
/// # Safety
/// `buf` must hold at least `cap` entries; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tr_mesh_betti(
    mesh: *const TrMesh,
    buf: *mut size_t,
    cap: size_t,
    written: *mut size_t,
) -> TrStatus {
    if mesh.is_null() || buf.is_null() || written.is_null() {
        set_error("tr_mesh_betti: null argument");
        return TrStatus::TrNullArgument;
    }
    let betti = match (*mesh).mesh.betti_numbers() {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    if cap < betti.len() {
        set_error(&format!(
            "tr_mesh_betti: need {} entries, buffer holds {cap}",
            betti.len()
        ));
        return TrStatus::TrBufferTooSmall;
    }
    let out = std::slice::from_raw_parts_mut(buf, betti.len());
    out.copy_from_slice(&betti);
    *written = betti.len();
    TrStatus::TrOk
}

/// Write the mesh as OBJ.
///
/// # Safety
/// `path` must be NUL-terminated; `mesh` a live handle.
#[no_mangle]
pub unsafe extern "C" fn tr_mesh_write_obj(mesh: *const TrMesh, path: *const c_char) -> TrStatus {
    if mesh.is_null() {
        set_error("tr_mesh_write_obj: mesh is null");
        return TrStatus::TrNullArgument;
    }
    let path = match cstr(path, "path") {
        Ok(s) => s,
        Err(s) => return s,
    };
    let mut f = match std::fs::File::create(Path::new(path)) {
        Ok(f) => f,
        Err(e) => return fail(Error::Io(e)),
    };
    match (*mesh).mesh.write_obj(&mut f) {
        Ok(()) => TrStatus::TrOk,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `mesh` must come from a `tr_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tr_mesh_free(mesh: *mut TrMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}
