//! 3D triangulation of the padded unit box: Freudenthal (Kuhn) subdivision
//! of the uniform grid into 6 tetrahedra per cell, with sampled refinement
//! vertices inserted by splitting every tetrahedron whose closure contains
//! them (1-to-4 in the interior, consistent smaller splits on shared faces
//! and edges).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{orient3d, Point};

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

struct TetMesh {
    verts: Vec<Point>,
    tets: Vec<([u32; 4], bool)>, // (vertices, alive)
    cells: HashMap<(usize, usize, usize), Vec<u32>>,
    res: usize,
    lo: f64,
    h: f64,
}

impl TetMesh {
    fn vid(&self, i: usize, j: usize, k: usize) -> u32 {
        ((i * self.res + j) * self.res + k) as u32
    }

    fn add_tet(&mut self, v: [u32; 4], cell: (usize, usize, usize)) {
        let id = self.tets.len() as u32;
        self.tets.push((v, true));
        self.cells.entry(cell).or_default().push(id);
    }

    /// Cells whose closed cube can contain p (up to 8 when p sits on cell
    /// boundary planes).
    fn candidate_cells(&self, p: &Point) -> Vec<(usize, usize, usize)> {
        let mut axes: Vec<Vec<usize>> = Vec::with_capacity(3);
        for a in 0..3 {
            let t = (p[a] - self.lo) / self.h;
            let base = t.floor() as isize;
            let mut set = Vec::new();
            for c in [base - 1, base] {
                if c >= 0 && (c as usize) < self.res - 1 {
                    let c = c as usize;
                    let cell_lo = self.lo + c as f64 * self.h;
                    let cell_hi = self.lo + (c + 1) as f64 * self.h;
                    if p[a] >= cell_lo - 1e-12 && p[a] <= cell_hi + 1e-12 {
                        set.push(c);
                    }
                }
            }
            if set.is_empty() {
                return Vec::new();
            }
            axes.push(set);
        }
        let mut out = Vec::new();
        for &i in &axes[0] {
            for &j in &axes[1] {
                for &k in &axes[2] {
                    out.push((i, j, k));
                }
            }
        }
        out
    }

    /// Split every tetrahedron whose closure contains the new vertex `pid`:
    /// for each such tet, one child per face not containing the point.
    fn insert(&mut self, pid: u32) -> bool {
        let p = self.verts[pid as usize];
        let mut splits: Vec<(u32, (usize, usize, usize), Vec<[u32; 4]>)> = Vec::new();
        for cell in self.candidate_cells(&p) {
            let Some(ids) = self.cells.get(&cell) else {
                continue;
            };
            for &tid in ids {
                let (v, alive) = self.tets[tid as usize];
                if !alive || splits.iter().any(|s| s.0 == tid) {
                    continue;
                }
                // face opposite local vertex i keeps the other three vertices
                let mut signs = [0i32; 4];
                let mut inside = true;
                for i in 0..4 {
                    let f: Vec<&Point> = (0..4)
                        .filter(|&j| j != i)
                        .map(|j| &self.verts[v[j] as usize])
                        .collect();
                    let s_own = orient3d(f[0], f[1], f[2], &self.verts[v[i] as usize]);
                    let s_p = orient3d(f[0], f[1], f[2], &p);
                    if s_p != 0 && s_p != s_own {
                        inside = false;
                        break;
                    }
                    signs[i] = s_p;
                }
                if !inside {
                    continue;
                }
                let mut children = Vec::new();
                for i in 0..4 {
                    if signs[i] != 0 {
                        // p replaces vertex i
                        let mut child = v;
                        child[i] = pid;
                        children.push(child);
                    }
                }
                splits.push((tid, cell, children));
            }
        }
        if splits.is_empty() {
            return false;
        }
        for (tid, cell, children) in splits {
            self.tets[tid as usize].1 = false;
            for c in children {
                self.add_tet(c, cell);
            }
        }
        true
    }
}

/// Build the tetrahedral mesh for `res^3` grid vertices over
/// [lo, lo + (res-1) h]^3 followed by `extras` refinement vertices.
///
/// Returns the tetrahedra as index quadruples into the combined vertex list
/// (grid vertices first, extras after) plus the indices of extras that were
/// skipped (exact duplicates of existing vertices).
pub fn kuhn_triangulation(
    res: usize,
    lo: f64,
    h: f64,
    grid_points: &[Point],
    extras: &[Point],
) -> Result<Vec<[u32; 4]>> {
    if res < 2 {
        return Err(Error::DegenerateInput(format!(
            "3D grid needs resolution >= 2, got {res}"
        )));
    }
    assert_eq!(grid_points.len(), res * res * res);
    let mut mesh = TetMesh {
        verts: grid_points.to_vec(),
        tets: Vec::new(),
        cells: HashMap::new(),
        res,
        lo,
        h,
    };
    for i in 0..res - 1 {
        for j in 0..res - 1 {
            for k in 0..res - 1 {
                let corner = [i, j, k];
                for perm in PERMS {
                    let mut v = [0u32; 4];
                    let mut cur = corner;
                    v[0] = mesh.vid(cur[0], cur[1], cur[2]);
                    for (step, &axis) in perm.iter().enumerate() {
                        cur[axis] += 1;
                        v[step + 1] = mesh.vid(cur[0], cur[1], cur[2]);
                    }
                    mesh.add_tet(v, (i, j, k));
                }
            }
        }
    }
    for (e, p) in extras.iter().enumerate() {
        let pid = mesh.verts.len() as u32;
        mesh.verts.push(*p);
        if !mesh.insert(pid) {
            return Err(Error::DegenerateInput(format!(
                "refinement vertex {e} at {p:?} lies outside the grid box"
            )));
        }
    }
    Ok(mesh
        .tets
        .iter()
        .filter(|(_, alive)| *alive)
        .map(|(v, _)| *v)
        .collect())
}
