//! Simplicial complexes over the evaluation vertex set: uniform grid plus
//! importance-sampled refinement vertices, triangulated and filtered by the
//! likelihood field.

mod delaunay2d;
mod grid3;

pub use delaunay2d::delaunay2d;

use std::collections::HashMap;
use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::field::{FieldEvaluator, GaussianParams};
use crate::geom::{orient2d, orient3d, Point};
use crate::pointcloud::PointCloud;

/// Padded evaluation domain so superlevel sets never touch the boundary.
pub const DOMAIN_LO: f64 = -0.1;
pub const DOMAIN_HI: f64 = 1.1;

/// Canonical simplex storage: ascending vertex ids, padded with `NONE`.
pub type SimplexKey = [u32; 4];
const NONE: u32 = u32::MAX;

pub fn make_key(verts: &[u32]) -> SimplexKey {
    let mut k = [NONE; 4];
    k[..verts.len()].copy_from_slice(verts);
    k[..verts.len()].sort_unstable();
    k
}

pub fn key_verts(k: &SimplexKey) -> &[u32] {
    let n = k.iter().position(|&v| v == NONE).unwrap_or(4);
    &k[..n]
}

#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    /// Ambient dimension (2 or 3).
    pub ambient_dim: usize,
    /// Dimension of the top cells (equals ambient_dim for domain complexes,
    /// lower for extracted meshes).
    pub top_dim: usize,
    pub vertices: Vec<Point>,
    /// simplices[k]: all k-simplices, each canonical, list sorted
    /// lexicographically for determinism.
    pub simplices: Vec<Vec<SimplexKey>>,
    index: Vec<HashMap<SimplexKey, u32>>,
    /// cofacets[k][i]: ids of (k+1)-simplices containing simplex i.
    pub cofacets: Vec<Vec<Vec<u32>>>,
}

impl SimplicialComplex {
    /// Assemble a face-closed complex from its top-dimensional cells.
    pub fn from_top_cells(
        ambient_dim: usize,
        top_dim: usize,
        vertices: Vec<Point>,
        cells: &[SimplexKey],
    ) -> Self {
        let mut per_dim: Vec<Vec<SimplexKey>> = vec![Vec::new(); top_dim + 1];
        let mut seen: Vec<HashMap<SimplexKey, ()>> = vec![HashMap::new(); top_dim + 1];
        for cell in cells {
            let vs = key_verts(cell);
            let k = vs.len() - 1;
            // all non-empty subsets
            for mask in 1u32..(1 << vs.len()) {
                let sub: Vec<u32> = (0..vs.len())
                    .filter(|&i| mask & (1 << i) != 0)
                    .map(|i| vs[i])
                    .collect();
                let dim = sub.len() - 1;
                if dim > k {
                    continue;
                }
                let key = make_key(&sub);
                if seen[dim].insert(key, ()).is_none() {
                    per_dim[dim].push(key);
                }
            }
        }
        for list in &mut per_dim {
            list.sort_unstable();
        }
        let index: Vec<HashMap<SimplexKey, u32>> = per_dim
            .iter()
            .map(|list| {
                list.iter()
                    .enumerate()
                    .map(|(i, k)| (*k, i as u32))
                    .collect()
            })
            .collect();
        let mut cofacets: Vec<Vec<Vec<u32>>> = per_dim
            .iter()
            .map(|list| vec![Vec::new(); list.len()])
            .collect();
        for k in 1..=top_dim {
            for (id, simplex) in per_dim[k].iter().enumerate() {
                let vs = key_verts(simplex);
                for skip in 0..vs.len() {
                    let facet: Vec<u32> = vs
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    let fid = index[k - 1][&make_key(&facet)];
                    cofacets[k - 1][fid as usize].push(id as u32);
                }
            }
        }
        SimplicialComplex {
            ambient_dim,
            top_dim,
            vertices,
            simplices: per_dim,
            index,
            cofacets,
        }
    }

    pub fn count(&self, dim: usize) -> usize {
        self.simplices.get(dim).map_or(0, |l| l.len())
    }

    pub fn total_simplices(&self) -> usize {
        self.simplices.iter().map(|l| l.len()).sum()
    }

    pub fn find(&self, dim: usize, key: &SimplexKey) -> Option<u32> {
        self.index.get(dim)?.get(key).copied()
    }

    pub fn simplex(&self, dim: usize, id: u32) -> &[u32] {
        key_verts(&self.simplices[dim][id as usize])
    }

    /// Facet ids (dimension k-1) of simplex `id` in dimension k.
    pub fn facets(&self, dim: usize, id: u32) -> Vec<u32> {
        let vs = self.simplex(dim, id);
        (0..vs.len())
            .map(|skip| {
                let f: Vec<u32> = vs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                self.index[dim - 1][&make_key(&f)]
            })
            .collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, l)| if k % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) })
            .sum()
    }

    /// Structural validation: canonical ordering, face closure, no
    /// degenerate top cells, and manifold-bounded coface counts.
    pub fn validate(&self) -> Result<()> {
        for (k, list) in self.simplices.iter().enumerate() {
            let mut prev: Option<&SimplexKey> = None;
            for key in list {
                let vs = key_verts(key);
                if vs.len() != k + 1 || vs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::DegenerateInput(format!(
                        "non-canonical simplex {vs:?} in dimension {k}"
                    )));
                }
                if let Some(p) = prev {
                    if p >= key {
                        return Err(Error::DegenerateInput(
                            "simplex list not sorted / has duplicates".into(),
                        ));
                    }
                }
                prev = Some(key);
                if k > 0 {
                    for skip in 0..vs.len() {
                        let f: Vec<u32> = vs
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != skip)
                            .map(|(_, &v)| v)
                            .collect();
                        if self.find(k - 1, &make_key(&f)).is_none() {
                            return Err(Error::NotFaceClosed(format!(
                                "face {f:?} of {vs:?} missing"
                            )));
                        }
                    }
                }
            }
        }
        if self.top_dim == self.ambient_dim {
            // geometric checks on domain complexes
            match self.ambient_dim {
                2 => {
                    for key in &self.simplices[2] {
                        let vs = key_verts(key);
                        if orient2d(
                            &self.vertices[vs[0] as usize],
                            &self.vertices[vs[1] as usize],
                            &self.vertices[vs[2] as usize],
                        ) == 0
                        {
                            return Err(Error::DegenerateInput(format!(
                                "zero-area triangle {vs:?}"
                            )));
                        }
                    }
                    for cof in &self.cofacets[1] {
                        if cof.len() > 2 {
                            return Err(Error::DegenerateInput(
                                "edge with more than two triangles".into(),
                            ));
                        }
                    }
                }
                3 => {
                    for key in &self.simplices[3] {
                        let vs = key_verts(key);
                        if orient3d(
                            &self.vertices[vs[0] as usize],
                            &self.vertices[vs[1] as usize],
                            &self.vertices[vs[2] as usize],
                            &self.vertices[vs[3] as usize],
                        ) == 0
                        {
                            return Err(Error::DegenerateInput(format!(
                                "zero-volume tetrahedron {vs:?}"
                            )));
                        }
                    }
                    for cof in &self.cofacets[2] {
                        if cof.len() > 2 {
                            return Err(Error::DegenerateInput(
                                "triangle with more than two tetrahedra".into(),
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Export vertices and the 2-skeleton as an ASCII OFF file (debug aid).
    pub fn write_off<W: Write>(&self, w: &mut W) -> Result<()> {
        let faces = if self.simplices.len() > 2 {
            &self.simplices[2][..]
        } else {
            &[]
        };
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), faces.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for f in faces {
            let vs = key_verts(f);
            writeln!(w, "3 {} {} {}", vs[0], vs[1], vs[2])?;
        }
        Ok(())
    }
}

/// The evaluation vertex set: grid prefix plus sampled refinement points.
#[derive(Clone, Debug)]
pub struct VertexSet {
    pub points: Vec<Point>,
    pub dim: usize,
    /// Per-axis resolution of the uniform grid prefix, when structured.
    pub grid_res: Option<usize>,
}

impl VertexSet {
    pub fn unstructured(points: Vec<Point>, dim: usize) -> Self {
        VertexSet {
            points,
            dim,
            grid_res: None,
        }
    }
}

fn grid_coord(res: usize, i: usize) -> f64 {
    DOMAIN_LO + (DOMAIN_HI - DOMAIN_LO) * i as f64 / (res - 1) as f64
}

fn uniform_grid(res: usize, dim: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(res.pow(dim as u32));
    if dim == 2 {
        for i in 0..res {
            for j in 0..res {
                pts.push([grid_coord(res, i), grid_coord(res, j), 0.0]);
            }
        }
    } else {
        for i in 0..res {
            for j in 0..res {
                for k in 0..res {
                    pts.push([grid_coord(res, i), grid_coord(res, j), grid_coord(res, k)]);
                }
            }
        }
    }
    pts
}

/// The uniform base grid over the padded box plus `extra` points sampled
/// without replacement from a 4x finer grid with probability proportional
/// to the likelihood field at the given (initialization) parameters.
pub fn build_vertex_set(
    cloud: &PointCloud,
    base_res: usize,
    extra: usize,
    params: &GaussianParams,
    rng_seed: u64,
) -> Result<VertexSet> {
    if base_res < 4 {
        return Err(Error::Config(format!(
            "base_res must be at least 4, got {base_res}"
        )));
    }
    let dim = cloud.dim;
    let mut points = uniform_grid(base_res, dim);
    if extra > 0 {
        let ev = FieldEvaluator::new(cloud, params)?;
        let fine_res = 4 * base_res;
        let fine = uniform_grid(fine_res, dim);
        // weighted sampling without replacement (Efraimidis-Spirakis):
        // key_i = u_i^(1/w_i), keep the `extra` largest keys
        let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
        let mut keyed: Vec<(f64, u32)> = fine
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let w = ev.eval(p).max(1e-300);
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                (u.ln() / w, i as u32)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let close = |a: &Point, b: &Point| {
            (0..dim).all(|c| (a[c] - b[c]).abs() <= 1e-12)
        };
        let mut taken = 0usize;
        for &(_, idx) in &keyed {
            if taken == extra {
                break;
            }
            let cand = &fine[idx as usize];
            if points.iter().any(|q| close(q, cand)) {
                continue; // duplicate of a grid point or earlier sample
            }
            points.push(*cand);
            taken += 1;
        }
    }
    Ok(VertexSet {
        points,
        dim,
        grid_res: Some(base_res),
    })
}

/// Triangulate the vertex set into a simplicial complex: Delaunay in 2D,
/// Freudenthal grid subdivision plus point insertion in 3D (which requires
/// the structured grid prefix).
pub fn triangulate(vs: &VertexSet) -> Result<SimplicialComplex> {
    match vs.dim {
        2 => {
            let tris = delaunay2d(&vs.points)?;
            let cells: Vec<SimplexKey> = tris.iter().map(|t| make_key(t)).collect();
            Ok(SimplicialComplex::from_top_cells(
                2,
                2,
                vs.points.clone(),
                &cells,
            ))
        }
        3 => {
            let res = vs.grid_res.ok_or_else(|| {
                Error::DegenerateInput(
                    "3D triangulation requires a structured grid vertex set".into(),
                )
            })?;
            let n_grid = res * res * res;
            if vs.points.len() < n_grid {
                return Err(Error::DegenerateInput(format!(
                    "expected at least {n_grid} grid vertices"
                )));
            }
            // z varies fastest in the grid prefix
            let h = vs.points[1][2] - vs.points[0][2];
            let tets = grid3::kuhn_triangulation(
                res,
                vs.points[0][0],
                h,
                &vs.points[..n_grid],
                &vs.points[n_grid..],
            )?;
            let cells: Vec<SimplexKey> = tets.iter().map(|t| make_key(t)).collect();
            Ok(SimplicialComplex::from_top_cells(
                3,
                3,
                vs.points.clone(),
                &cells,
            ))
        }
        d => Err(Error::Dimension(format!("unsupported dimension {d}"))),
    }
}

/// A complex together with per-vertex field values and induced min-rule
/// simplex values.
#[derive(Clone, Debug)]
pub struct FilteredComplex<'a> {
    pub complex: &'a SimplicialComplex,
    pub vertex_values: Vec<f64>,
    /// simplex_values[k][i] = min over vertices of simplex i in dimension k.
    pub simplex_values: Vec<Vec<f64>>,
}

impl<'a> FilteredComplex<'a> {
    pub fn from_vertex_values(
        complex: &'a SimplicialComplex,
        vertex_values: Vec<f64>,
    ) -> Self {
        assert_eq!(vertex_values.len(), complex.vertices.len());
        let simplex_values = complex
            .simplices
            .iter()
            .map(|list| {
                list.iter()
                    .map(|key| {
                        key_verts(key)
                            .iter()
                            .map(|&v| vertex_values[v as usize])
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect();
        FilteredComplex {
            complex,
            vertex_values,
            simplex_values,
        }
    }

    pub fn value(&self, dim: usize, id: u32) -> f64 {
        self.simplex_values[dim][id as usize]
    }

    /// Ids, per dimension, of the simplices in the superlevel set at `t`
    /// (simplex value strictly greater than t).
    pub fn superlevel(&self, t: f64) -> Vec<Vec<u32>> {
        self.simplex_values
            .iter()
            .map(|vals| {
                vals.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > t)
                    .map(|(i, _)| i as u32)
                    .collect()
            })
            .collect()
    }
}

/// Evaluate the field on every vertex and induce simplex values by the
/// min rule.
pub fn attach_filtration<'a>(
    complex: &'a SimplicialComplex,
    cloud: &PointCloud,
    params: &GaussianParams,
) -> Result<FilteredComplex<'a>> {
    let ev = FieldEvaluator::new(cloud, params)?;
    let vertex_values: Vec<f64> = complex.vertices.iter().map(|v| ev.eval(v)).collect();
    Ok(FilteredComplex::from_vertex_values(complex, vertex_values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::init_params;
    use crate::pointcloud::normalize;

    fn ring_cloud(n: usize) -> PointCloud {
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [0.5 + 0.4 * a.cos(), 0.5 + 0.4 * a.sin(), 0.0]
            })
            .collect();
        normalize(&PointCloud::new(pts, 2).unwrap()).unwrap()
    }

    #[test]
    fn base_grid_only() {
        let cloud = ring_cloud(16);
        let params = init_params(&cloud).unwrap();
        let vs = build_vertex_set(&cloud, 4, 0, &params, 0).unwrap();
        assert_eq!(vs.points.len(), 16);
        assert_eq!(vs.points[0][0], DOMAIN_LO);
        assert_eq!(vs.points[15][1], DOMAIN_HI);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cloud = ring_cloud(40);
        let params = init_params(&cloud).unwrap();
        let a = build_vertex_set(&cloud, 8, 10, &params, 7).unwrap();
        let b = build_vertex_set(&cloud, 8, 10, &params, 7).unwrap();
        assert_eq!(a.points, b.points);
        let c = build_vertex_set(&cloud, 8, 10, &params, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn samples_concentrate_near_cloud() {
        let cloud = ring_cloud(100);
        let params = init_params(&cloud).unwrap();
        let base_res = 12;
        let vs = build_vertex_set(&cloud, base_res, 40, &params, 0).unwrap();
        let n_grid = base_res * base_res;
        let nn = |p: &Point| -> f64 {
            cloud
                .points
                .iter()
                .map(|q| crate::geom::dist(p, q, 2))
                .fold(f64::INFINITY, f64::min)
        };
        let grid_mean: f64 =
            vs.points[..n_grid].iter().map(|p| nn(p)).sum::<f64>() / n_grid as f64;
        let extra = &vs.points[n_grid..];
        assert!(!extra.is_empty());
        let extra_mean: f64 = extra.iter().map(|p| nn(p)).sum::<f64>() / extra.len() as f64;
        assert!(
            extra_mean < grid_mean,
            "sampled {extra_mean} vs grid {grid_mean}"
        );
    }

    #[test]
    fn square_complex_counts() {
        let pts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let c = triangulate(&VertexSet::unstructured(pts, 2)).unwrap();
        assert_eq!(c.count(0), 4);
        assert_eq!(c.count(1), 5);
        assert_eq!(c.count(2), 2);
        assert_eq!(c.euler_characteristic(), 1);
        c.validate().unwrap();
    }

    #[test]
    fn kuhn_2x2x2_counts() {
        let mut pts = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let vs = VertexSet {
            points: pts,
            dim: 3,
            grid_res: Some(2),
        };
        let c = triangulate(&vs).unwrap();
        assert_eq!(c.count(3), 6);
        assert_eq!(c.euler_characteristic(), 1);
        c.validate().unwrap();
    }

    #[test]
    fn collinear_rejected() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(triangulate(&VertexSet::unstructured(pts, 2)).is_err());
    }

    #[test]
    fn filtration_min_rule_and_monotonicity() {
        let pts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let c = triangulate(&VertexSet::unstructured(pts, 2)).unwrap();
        let fc = FilteredComplex::from_vertex_values(&c, vec![3.0, 2.0, 1.0, 4.0]);
        for k in 1..=2 {
            for (i, key) in c.simplices[k].iter().enumerate() {
                let vmin = key_verts(key)
                    .iter()
                    .map(|&v| fc.vertex_values[v as usize])
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(fc.simplex_values[k][i], vmin);
                for f in c.facets(k, i as u32) {
                    assert!(fc.simplex_values[k - 1][f as usize] >= fc.simplex_values[k][i]);
                }
            }
        }
    }

    #[test]
    fn superlevel_matches_vertex_threshold_definition() {
        // brute-force double construction on random complexes
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pts: Vec<Point> = (0..20)
                .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), 0.0])
                .collect();
            let c = triangulate(&VertexSet::unstructured(pts, 2)).unwrap();
            let vals: Vec<f64> = (0..c.vertices.len()).map(|_| rng.gen::<f64>()).collect();
            let fc = FilteredComplex::from_vertex_values(&c, vals.clone());
            let t = rng.gen::<f64>();
            let fast = fc.superlevel(t);
            for (k, list) in c.simplices.iter().enumerate() {
                let slow: Vec<u32> = list
                    .iter()
                    .enumerate()
                    .filter(|(_, key)| key_verts(key).iter().all(|&v| vals[v as usize] > t))
                    .map(|(i, _)| i as u32)
                    .collect();
                assert_eq!(fast[k], slow);
            }
        }
    }
}
