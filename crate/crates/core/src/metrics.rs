//! Reconstruction evaluation: topological fidelity (mean absolute Betti
//! deviation) and avg-spacing-normalized one-way Chamfer distance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extract::SurfaceMesh;
use crate::geom::{dist, point_segment_dist, point_triangle_dist, Point};
use crate::pointcloud::PointCloud;

#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub shape: String,
    pub n_true: Vec<usize>,
    pub n_recon: Vec<usize>,
    pub chamfer: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    /// TFI_k indexed by dimension.
    pub tfi: Vec<f64>,
    /// Mean normalized one-way Chamfer over shapes.
    pub chamfer_one_way: f64,
    pub per_shape: Vec<ShapeReport>,
}

/// Mean absolute deviation between true feature counts and reconstructed
/// Betti numbers, per dimension.
pub fn tfi(true_counts: &[Vec<usize>], meshes: &[SurfaceMesh]) -> Result<Vec<f64>> {
    if true_counts.len() != meshes.len() || meshes.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "{} truth entries vs {} meshes",
            true_counts.len(),
            meshes.len()
        )));
    }
    let recon: Vec<Vec<usize>> = meshes
        .iter()
        .map(|m| m.betti_numbers())
        .collect::<Result<_>>()?;
    let dims = true_counts
        .iter()
        .chain(recon.iter())
        .map(|c| c.len())
        .max()
        .unwrap();
    let at = |c: &[usize], k: usize| *c.get(k).unwrap_or(&0) as f64;
    Ok((0..dims)
        .map(|k| {
            true_counts
                .iter()
                .zip(&recon)
                .map(|(t, r)| (at(t, k) - at(r, k)).abs())
                .sum::<f64>()
                / true_counts.len() as f64
        })
        .collect())
}

fn point_mesh_dist(p: &Point, mesh: &SurfaceMesh) -> f64 {
    mesh.simplices
        .iter()
        .map(|s| match s.len() {
            1 => dist(p, &mesh.vertices[s[0] as usize], 3),
            2 => point_segment_dist(
                p,
                &mesh.vertices[s[0] as usize],
                &mesh.vertices[s[1] as usize],
                3,
            ),
            _ => point_triangle_dist(
                p,
                &mesh.vertices[s[0] as usize],
                &mesh.vertices[s[1] as usize],
                &mesh.vertices[s[2] as usize],
            ),
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean over cloud points of the exact distance to the nearest mesh
/// simplex, divided by the cloud's average spacing.
pub fn chamfer_one_way(cloud: &PointCloud, mesh: &SurfaceMesh) -> Result<f64> {
    if mesh.simplices.is_empty() {
        return Err(Error::EmptyMesh("mesh has no simplices".into()));
    }
    let sum: f64 = cloud.points.iter().map(|p| point_mesh_dist(p, mesh)).sum();
    Ok(sum / cloud.points.len() as f64 / cloud.avg_spacing)
}

pub fn evaluate(
    shapes: &[(String, Vec<usize>)],
    clouds: &[PointCloud],
    meshes: &[SurfaceMesh],
) -> Result<EvalReport> {
    if shapes.len() != clouds.len() || clouds.len() != meshes.len() {
        return Err(Error::LengthMismatch(format!(
            "{} shapes, {} clouds, {} meshes",
            shapes.len(),
            clouds.len(),
            meshes.len()
        )));
    }
    let true_counts: Vec<Vec<usize>> = shapes.iter().map(|(_, c)| c.clone()).collect();
    let tfi = tfi(&true_counts, meshes)?;
    let mut per_shape = Vec::new();
    for ((name, counts), (cloud, mesh)) in shapes.iter().zip(clouds.iter().zip(meshes)) {
        per_shape.push(ShapeReport {
            shape: name.clone(),
            n_true: counts.clone(),
            n_recon: mesh.betti_numbers()?,
            chamfer: chamfer_one_way(cloud, mesh)?,
        });
    }
    let chamfer = per_shape.iter().map(|s| s.chamfer).sum::<f64>() / per_shape.len() as f64;
    Ok(EvalReport {
        tfi,
        chamfer_one_way: chamfer,
        per_shape,
    })
}
