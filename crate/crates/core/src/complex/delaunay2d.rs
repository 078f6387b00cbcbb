//! Incremental 2D Delaunay triangulation (Bowyer-Watson) with exact
//! predicates and symbolic perturbation of the paraboloid lift.
//!
//! Cocircular ties are broken by each point's lexicographic rank in the
//! input set, so the result is a function of the point set alone: it does
//! not depend on the order in which vertices are handed to the builder.
//! Uniform grids, where every cell's corners are exactly cocircular, stay
//! combinatorially deterministic this way.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{incircle_perturbed, orient2d, Point};

#[derive(Clone, Copy)]
struct Tri {
    v: [u32; 3], // counterclockwise
    alive: bool,
}

struct Builder {
    verts: Vec<Point>,
    rank: Vec<usize>,
    tris: Vec<Tri>,
    // sorted edge -> alive triangles (at most 2)
    edges: HashMap<(u32, u32), Vec<u32>>,
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Builder {
    fn add_tri(&mut self, v: [u32; 3]) {
        let id = self.tris.len() as u32;
        self.tris.push(Tri { v, alive: true });
        for i in 0..3 {
            self.edges
                .entry(edge_key(v[i], v[(i + 1) % 3]))
                .or_default()
                .push(id);
        }
    }

    fn kill_tri(&mut self, id: u32) {
        let v = self.tris[id as usize].v;
        self.tris[id as usize].alive = false;
        for i in 0..3 {
            let key = edge_key(v[i], v[(i + 1) % 3]);
            if let Some(list) = self.edges.get_mut(&key) {
                list.retain(|&t| t != id);
                if list.is_empty() {
                    self.edges.remove(&key);
                }
            }
        }
    }

    fn neighbor(&self, tri: u32, a: u32, b: u32) -> Option<u32> {
        self.edges
            .get(&edge_key(a, b))?
            .iter()
            .copied()
            .find(|&t| t != tri)
    }

    fn in_conflict(&self, tri: u32, p: u32) -> bool {
        let t = self.tris[tri as usize].v;
        incircle_perturbed(
            (&self.verts[t[0] as usize], self.rank[t[0] as usize]),
            (&self.verts[t[1] as usize], self.rank[t[1] as usize]),
            (&self.verts[t[2] as usize], self.rank[t[2] as usize]),
            (&self.verts[p as usize], self.rank[p as usize]),
        ) > 0
    }

    /// Any alive triangle whose closure contains p.
    fn locate(&self, p: u32) -> Option<u32> {
        let q = &self.verts[p as usize];
        'tri: for (id, t) in self.tris.iter().enumerate() {
            if !t.alive {
                continue;
            }
            for i in 0..3 {
                let a = &self.verts[t.v[i] as usize];
                let b = &self.verts[t.v[(i + 1) % 3] as usize];
                if orient2d(a, b, q) < 0 {
                    continue 'tri;
                }
            }
            return Some(id as u32);
        }
        None
    }

    fn insert(&mut self, p: u32) {
        let seed = self.locate(p).expect("point inside the bounding triangle");
        // flood-fill the conflict cavity
        let mut cavity = vec![seed];
        let mut in_cavity = vec![false; self.tris.len()];
        in_cavity[seed as usize] = true;
        let mut stack = vec![seed];
        while let Some(t) = stack.pop() {
            let v = self.tris[t as usize].v;
            for i in 0..3 {
                if let Some(n) = self.neighbor(t, v[i], v[(i + 1) % 3]) {
                    if !in_cavity[n as usize] && self.in_conflict(n, p) {
                        in_cavity[n as usize] = true;
                        cavity.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        // boundary edges, oriented as they appear in their cavity triangle
        let mut boundary = Vec::new();
        for &t in &cavity {
            let v = self.tris[t as usize].v;
            for i in 0..3 {
                let (a, b) = (v[i], v[(i + 1) % 3]);
                let outside = match self.neighbor(t, a, b) {
                    Some(n) => !in_cavity[n as usize],
                    None => true,
                };
                if outside {
                    boundary.push((a, b));
                }
            }
        }
        for &t in &cavity {
            self.kill_tri(t);
        }
        for (a, b) in boundary {
            self.add_tri([a, b, p]);
        }
    }
}

/// Delaunay-triangulate a set of distinct points. Returns the triangle list
/// as vertex-index triples into the input slice.
pub fn delaunay2d(points: &[Point]) -> Result<Vec<[u32; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 points, got {n}"
        )));
    }
    // lexicographic ranks drive the symbolic perturbation
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a as usize], &points[b as usize]);
        pa[0].partial_cmp(&pb[0])
            .unwrap()
            .then(pa[1].partial_cmp(&pb[1]).unwrap())
    });
    let mut rank = vec![0usize; n + 3];
    for (r, &i) in order.iter().enumerate() {
        rank[i as usize] = r;
        if r > 0 {
            let prev = &points[order[r - 1] as usize];
            let cur = &points[i as usize];
            if prev[0] == cur[0] && prev[1] == cur[1] {
                return Err(Error::DegenerateInput(
                    "duplicate points are not supported".into(),
                ));
            }
        }
    }
    for k in 0..3 {
        rank[n + k] = n + k;
    }

    // bounding triangle, far outside the data
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    let big = 65536.0 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
    let mut verts: Vec<Point> = points.to_vec();
    verts.push([cx - 3.0 * big, cy - big, 0.0]);
    verts.push([cx + 3.0 * big, cy - big, 0.0]);
    verts.push([cx, cy + 3.0 * big, 0.0]);

    let s0 = n as u32;
    let mut b = Builder {
        verts,
        rank,
        tris: Vec::new(),
        edges: HashMap::new(),
    };
    b.add_tri([s0, s0 + 1, s0 + 2]);
    for &i in &order {
        b.insert(i);
        // new triangles were appended; keep the cavity marker array in sync
    }

    let mut out = Vec::new();
    for t in &b.tris {
        if t.alive && t.v.iter().all(|&v| v < n as u32) {
            out.push(t.v);
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateInput(
            "all points are collinear; no triangulation exists".into(),
        ));
    }
    Ok(out)
}
