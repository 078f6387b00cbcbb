//! Surface extraction: refine a persistence cycle representative with
//! homology-preserving local moves (Z2 boundary additions of adjacent
//! top-dimensional simplices), or fall back to the combinatorial boundary
//! of a superlevel set.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use crate::complex::{make_key, FilteredComplex, SimplexKey, SimplicialComplex};
use crate::error::{Error, Result};
use crate::geom::{segments_intersect_2d, triangles_intersect_3d, Point};
use crate::persistence::{betti_numbers, CycleRep, PersistenceDiagram};
use crate::pointcloud::PointCloud;
use crate::topo_opt::{LossSpec, DOMINANCE_GAMMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    RefinedCycle,
    SuperlevelBoundary,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    /// 1 for closed curves, 2 for closed triangle surfaces.
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Vertex tuples indexing into `vertices`.
    pub simplices: Vec<Vec<u32>>,
    pub provenance: Provenance,
}

impl SurfaceMesh {
    fn as_complex(&self) -> SimplicialComplex {
        let keys: Vec<SimplexKey> = self.simplices.iter().map(|s| make_key(s)).collect();
        SimplicialComplex::from_top_cells(3, self.dim, self.vertices.clone(), &keys)
    }

    pub fn betti_numbers(&self) -> Result<Vec<usize>> {
        betti_numbers(&self.as_complex(), None)
    }

    pub fn is_z2_cycle(&self) -> bool {
        let mut count: HashMap<Vec<u32>, u32> = HashMap::new();
        for s in &self.simplices {
            for skip in 0..s.len() {
                let mut f: Vec<u32> = s
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                *count.entry(f).or_insert(0) += 1;
            }
        }
        count.values().all(|&c| c % 2 == 0)
    }

    /// Exact pairwise intersection test; simplices sharing a vertex are
    /// exempt (shared-face contacts).
    pub fn self_intersection_free(&self) -> bool {
        for i in 0..self.simplices.len() {
            for j in (i + 1)..self.simplices.len() {
                let (a, b) = (&self.simplices[i], &self.simplices[j]);
                if a.iter().any(|v| b.contains(v)) {
                    continue;
                }
                let hit = if self.dim == 1 {
                    segments_intersect_2d(
                        &self.vertices[a[0] as usize],
                        &self.vertices[a[1] as usize],
                        &self.vertices[b[0] as usize],
                        &self.vertices[b[1] as usize],
                    )
                } else {
                    triangles_intersect_3d(
                        &[
                            self.vertices[a[0] as usize],
                            self.vertices[a[1] as usize],
                            self.vertices[a[2] as usize],
                        ],
                        &[
                            self.vertices[b[0] as usize],
                            self.vertices[b[1] as usize],
                            self.vertices[b[2] as usize],
                        ],
                    )
                };
                if hit {
                    return false;
                }
            }
        }
        true
    }

    pub fn write_obj<W: Write>(&self, w: &mut W) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for s in &self.simplices {
            match self.dim {
                1 => writeln!(w, "l {} {}", s[0] + 1, s[1] + 1)?,
                _ => writeln!(w, "f {} {} {}", s[0] + 1, s[1] + 1, s[2] + 1)?,
            }
        }
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        if self.dim == 1 {
            writeln!(w, "element edge {}", self.simplices.len())?;
            writeln!(w, "property int vertex1")?;
            writeln!(w, "property int vertex2")?;
        } else {
            writeln!(w, "element face {}", self.simplices.len())?;
            writeln!(w, "property list uchar int vertex_indices")?;
        }
        writeln!(w, "end_header")?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for s in &self.simplices {
            if self.dim == 1 {
                writeln!(w, "{} {}", s[0], s[1])?;
            } else {
                writeln!(w, "3 {} {} {}", s[0], s[1], s[2])?;
            }
        }
        Ok(())
    }
}

/// Compact a set of k-simplex ids of the domain complex into a standalone
/// mesh (vertices renumbered in ascending domain-id order).
fn mesh_from_ids(
    complex: &SimplicialComplex,
    k: usize,
    ids: &BTreeSet<u32>,
    provenance: Provenance,
) -> SurfaceMesh {
    let mut used: BTreeSet<u32> = BTreeSet::new();
    for &id in ids {
        used.extend(complex.simplex(k, id).iter().copied());
    }
    let remap: HashMap<u32, u32> = used
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32))
        .collect();
    SurfaceMesh {
        dim: k,
        vertices: used
            .iter()
            .map(|&v| complex.vertices[v as usize])
            .collect(),
        simplices: ids
            .iter()
            .map(|&id| {
                complex
                    .simplex(k, id)
                    .iter()
                    .map(|v| remap[v])
                    .collect()
            })
            .collect(),
        provenance,
    }
}

/// Refinement state: a set of k-simplex ids that stays a closed manifold
/// (every (k-1)-face shared by exactly two simplices).
struct Refiner<'a> {
    fc: &'a FilteredComplex<'a>,
    k: usize,
    mesh: BTreeSet<u32>,
    /// Domain-vertex ids currently used, with mesh-simplex multiplicity.
    vertex_uses: HashMap<u32, u32>,
    /// Vertices claimed by another component; treated as -inf so the
    /// moves evict and avoid them, keeping separate loops disjoint.
    claimed: HashSet<u32>,
    /// Simplices of previously extracted components; new simplices must
    /// not cross them.
    frozen: Vec<u32>,
}

impl<'a> Refiner<'a> {
    fn new(fc: &'a FilteredComplex, k: usize, ids: &[u32]) -> Self {
        Self::with_claimed(fc, k, ids, HashSet::new(), Vec::new())
    }

    fn with_claimed(
        fc: &'a FilteredComplex,
        k: usize,
        ids: &[u32],
        claimed: HashSet<u32>,
        frozen: Vec<u32>,
    ) -> Self {
        let mesh: BTreeSet<u32> = ids.iter().copied().collect();
        let mut vertex_uses = HashMap::new();
        for &id in &mesh {
            for &v in fc.complex.simplex(k, id) {
                *vertex_uses.entry(v).or_insert(0) += 1;
            }
        }
        Refiner {
            fc,
            k,
            mesh,
            vertex_uses,
            claimed,
            frozen,
        }
    }

    fn value(&self, v: u32) -> f64 {
        if self.claimed.contains(&v) {
            f64::NEG_INFINITY
        } else {
            self.fc.vertex_values[v as usize]
        }
    }

    fn is_manifold(&self) -> bool {
        let mut count: HashMap<u32, u32> = HashMap::new();
        for &id in &self.mesh {
            for f in self.fc.complex.facets(self.k, id) {
                *count.entry(f).or_insert(0) += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    fn euler(&self) -> i64 {
        // V - E (+ F) of the standalone mesh
        let mut lower: HashSet<Vec<u32>> = HashSet::new();
        for &id in &self.mesh {
            let vs = self.fc.complex.simplex(self.k, id);
            for skip in 0..vs.len() {
                let f: Vec<u32> = vs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                lower.insert(f);
            }
        }
        let v = self.vertex_uses.len() as i64;
        if self.k == 1 {
            v - self.mesh.len() as i64
        } else {
            v - lower.len() as i64 + self.mesh.len() as i64
        }
    }

    fn components(&self) -> usize {
        // union-find over mesh simplices via shared vertices
        let ids: Vec<u32> = self.mesh.iter().copied().collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        let mut by_vertex: HashMap<u32, usize> = HashMap::new();
        for (i, &id) in ids.iter().enumerate() {
            for &v in self.fc.complex.simplex(self.k, id) {
                if let Some(&j) = by_vertex.get(&v) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                } else {
                    by_vertex.insert(v, i);
                }
            }
        }
        (0..ids.len())
            .filter(|&i| find(&mut parent, i) == i)
            .count()
    }

    fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for &id in &self.mesh {
            id.hash(&mut h);
        }
        h.finish()
    }

    /// Candidate move on top-simplex sigma: xor its boundary into the mesh.
    /// Returns (sort key, removed facets, added facets) when admissible.
    fn classify(&self, sigma: u32) -> Option<(f64, Vec<u32>, Vec<u32>)> {
        let fc = self.fc;
        let complex = fc.complex;
        let d = self.k + 1;
        let facets = complex.facets(d, sigma);
        let (inside, outside): (Vec<u32>, Vec<u32>) = facets
            .iter()
            .partition(|f| self.mesh.contains(f));
        let m = inside.len();
        let sigma_verts = complex.simplex(d, sigma);
        let f_of = |v: u32| self.value(v);
        if m == 1 {
            // add move: replace one facet by the others through the
            // opposite vertex p, which must be new to the mesh
            let face_verts = complex.simplex(self.k, inside[0]);
            let p = *sigma_verts
                .iter()
                .find(|v| !face_verts.contains(v))
                .unwrap();
            if self.vertex_uses.contains_key(&p) || self.claimed.contains(&p) {
                return None;
            }
            let fmax = face_verts.iter().map(|&v| f_of(v)).fold(f64::MIN, f64::max);
            // claimed vertices must be walked off even without an uphill
            // target, so a face touching one admits any sideways add
            let evicting = face_verts.iter().any(|v| self.claimed.contains(v));
            if f_of(p) <= fmax && !evicting {
                return None;
            }
            let key = face_verts.iter().map(|&v| f_of(v)).fold(f64::MAX, f64::min);
            Some((key, inside, outside))
        } else if m == d {
            // remove move: the m mesh facets share exactly one vertex a,
            // whose whole star must be those facets
            let outside_verts = complex.simplex(self.k, outside[0]);
            let a = *sigma_verts
                .iter()
                .find(|v| !outside_verts.contains(v))
                .unwrap();
            if self.vertex_uses.get(&a) != Some(&(d as u32)) {
                return None;
            }
            let others_max = sigma_verts
                .iter()
                .filter(|&&v| v != a)
                .map(|&v| f_of(v))
                .fold(f64::MIN, f64::max);
            if f_of(a) >= others_max {
                return None;
            }
            if self.mesh.contains(&outside[0]) {
                return None;
            }
            Some((f_of(a), inside, outside))
        } else {
            None
        }
    }

    /// New simplices must not cross the rest of the mesh (contacts at
    /// shared vertices are allowed).
    fn intersection_free(&self, removed: &[u32], added: &[u32]) -> bool {
        let complex = self.fc.complex;
        let coords = |id: u32| -> Vec<Point> {
            complex
                .simplex(self.k, id)
                .iter()
                .map(|&v| complex.vertices[v as usize])
                .collect()
        };
        for &new_id in added {
            let new_verts = complex.simplex(self.k, new_id);
            let nc = coords(new_id);
            for &old_id in self.mesh.iter().chain(&self.frozen) {
                if removed.contains(&old_id) {
                    continue;
                }
                let old_verts = complex.simplex(self.k, old_id);
                if new_verts.iter().any(|v| old_verts.contains(v)) {
                    continue;
                }
                let oc = coords(old_id);
                let hit = if self.k == 1 {
                    segments_intersect_2d(&nc[0], &nc[1], &oc[0], &oc[1])
                } else {
                    triangles_intersect_3d(
                        &[nc[0], nc[1], nc[2]],
                        &[oc[0], oc[1], oc[2]],
                    )
                };
                if hit {
                    return false;
                }
            }
        }
        true
    }

    fn apply(&mut self, removed: &[u32], added: &[u32]) {
        let complex = self.fc.complex;
        for &id in removed {
            self.mesh.remove(&id);
            for &v in complex.simplex(self.k, id) {
                let c = self.vertex_uses.get_mut(&v).unwrap();
                *c -= 1;
                if *c == 0 {
                    self.vertex_uses.remove(&v);
                }
            }
        }
        for &id in added {
            self.mesh.insert(id);
            for &v in complex.simplex(self.k, id) {
                *self.vertex_uses.entry(v).or_insert(0) += 1;
            }
        }
    }

    /// Local moves cannot always walk a loop off claimed vertices: the
    /// surrounding triangles may simply not exist. For 1-dimensional
    /// meshes, cut out the segment of the loop around each stuck vertex
    /// and reroute it through unclaimed territory. The segment grows
    /// until a free path exists, so whole chains of contested vertices
    /// are cleared at once.
    fn detour_claimed(&mut self) {
        if self.k != 1 {
            return;
        }
        for _ in 0..4 {
            let mut stuck: Vec<u32> = self
                .vertex_uses
                .keys()
                .copied()
                .filter(|v| self.claimed.contains(v))
                .collect();
            if stuck.is_empty() {
                return;
            }
            stuck.sort_unstable();
            let mut progress = false;
            for v in stuck {
                if self.claimed.contains(&v)
                    && self.vertex_uses.get(&v) == Some(&2)
                    && self.detour_segment(v)
                {
                    progress = true;
                }
            }
            if !progress {
                return;
            }
        }
    }

    /// Walk the loop `g` steps away from `v` in both directions; returns
    /// the segment's edges and endpoints, or None past the ring's size.
    fn loop_segment(&self, v: u32, g: usize) -> Option<(Vec<u32>, u32, u32)> {
        let complex = self.fc.complex;
        let next = |prev: u32, cur: u32| -> Option<(u32, u32)> {
            let mut out = None;
            for &e in &complex.cofacets[0][cur as usize] {
                if !self.mesh.contains(&e) {
                    continue;
                }
                let w = other_endpoint(complex, e, cur);
                if w != prev {
                    out = Some((e, w));
                }
            }
            out
        };
        let inc: Vec<u32> = complex.cofacets[0][v as usize]
            .iter()
            .copied()
            .filter(|e| self.mesh.contains(e))
            .collect();
        if inc.len() != 2 {
            return None;
        }
        let mut edges = inc.clone();
        let mut ends = [other_endpoint(complex, inc[0], v), other_endpoint(complex, inc[1], v)];
        let mut seen: HashSet<u32> = HashSet::from([v, ends[0], ends[1]]);
        let mut prevs = [v, v];
        for _ in 0..g {
            for side in 0..2 {
                let (e, w) = next(prevs[side], ends[side])?;
                if !seen.insert(w) {
                    return None; // wrapped around the whole loop
                }
                edges.push(e);
                prevs[side] = ends[side];
                ends[side] = w;
            }
        }
        if ends[0] == ends[1] {
            return None;
        }
        Some((edges, ends[0], ends[1]))
    }

    fn detour_segment(&mut self, v: u32) -> bool {
        let complex = self.fc.complex;
        for g in 0..16 {
            let Some((seg_edges, start, goal)) = self.loop_segment(v, g) else {
                return false;
            };
            if self.claimed.contains(&start) || self.claimed.contains(&goal) {
                continue; // endpoints themselves contested: widen
            }
            let interior: HashSet<u32> = seg_edges
                .iter()
                .flat_map(|&e| complex.simplex(1, e).iter().copied())
                .filter(|&w| w != start && w != goal)
                .collect();
            // BFS over vertices free of claims and of the rest of the mesh
            let mut parent: HashMap<u32, (u32, u32)> = HashMap::new();
            let mut queue = std::collections::VecDeque::from([start]);
            parent.insert(start, (start, u32::MAX));
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &complex.cofacets[0][u as usize] {
                    let w = other_endpoint(complex, e, u);
                    if parent.contains_key(&w)
                        || self.claimed.contains(&w)
                        || (w != goal
                            && self.vertex_uses.contains_key(&w)
                            && !interior.contains(&w))
                    {
                        continue;
                    }
                    parent.insert(w, (u, e));
                    if w == goal {
                        break 'bfs;
                    }
                    queue.push_back(w);
                }
            }
            if !parent.contains_key(&goal) {
                continue;
            }
            let mut detour = Vec::new();
            let mut w = goal;
            while w != start {
                let (prev, e) = parent[&w];
                detour.push(e);
                w = prev;
            }
            if self.intersection_free(&seg_edges, &detour) {
                self.apply(&seg_edges, &detour);
                return true;
            }
        }
        false
    }

    fn run(&mut self) -> usize {
        let complex = self.fc.complex;
        let d = self.k + 1;
        let cap = 10 * complex.count(d).max(100);
        let mut visited: HashSet<u64> = HashSet::new();
        visited.insert(self.state_hash());
        let base_components = self.components();
        let base_euler = self.euler();
        let mut moves = 0;
        for _ in 0..cap {
            // all top simplices adjacent to the mesh, deterministically
            let mut adjacent: BTreeSet<u32> = BTreeSet::new();
            for &id in &self.mesh {
                adjacent.extend(
                    complex.cofacets[self.k][id as usize].iter().copied(),
                );
            }
            let mut candidates: Vec<(f64, u32, Vec<u32>, Vec<u32>)> = adjacent
                .iter()
                .filter_map(|&s| {
                    self.classify(s)
                        .map(|(key, rem, add)| (key, s, rem, add))
                })
                .collect();
            candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut applied = false;
            for (_, _, rem, add) in candidates {
                if !self.intersection_free(&rem, &add) {
                    continue;
                }
                self.apply(&rem, &add);
                let ok = visited.insert(self.state_hash())
                    && self.is_manifold()
                    && self.components() == base_components
                    && self.euler() == base_euler;
                if ok {
                    applied = true;
                    moves += 1;
                    break;
                }
                self.apply(&add, &rem); // revert
            }
            if !applied {
                break;
            }
        }
        if !self.claimed.is_empty() {
            self.detour_claimed();
        }
        moves
    }
}

fn other_endpoint(complex: &SimplicialComplex, edge: u32, v: u32) -> u32 {
    *complex.simplex(1, edge).iter().find(|&&w| w != v).unwrap()
}

/// Apply the local moves to a cycle representative until none applies.
/// Non-manifold representatives are returned unchanged (no admissible
/// local structure to preserve).
pub fn refine_cycle(fc: &FilteredComplex, rep: &CycleRep) -> SurfaceMesh {
    let k = rep.dim;
    let mut r = Refiner::new(fc, k, &rep.simplices);
    if r.is_manifold() {
        r.run();
    }
    let mesh = mesh_from_ids(fc.complex, k, &r.mesh, Provenance::RefinedCycle);
    debug_assert!(mesh.is_z2_cycle());
    mesh
}

/// (d-1)-simplices incident to exactly one d-simplex of the superlevel
/// set at `threshold`.
pub fn superlevel_boundary(fc: &FilteredComplex, threshold: f64) -> Result<SurfaceMesh> {
    let complex = fc.complex;
    let d = complex.simplices.len() - 1;
    let k = d - 1;
    let mut boundary: BTreeSet<u32> = BTreeSet::new();
    let mut any = false;
    for (id, cof) in complex.cofacets[k].iter().enumerate() {
        let n = cof
            .iter()
            .filter(|&&t| fc.simplex_values[d][t as usize] > threshold)
            .count();
        any = any || n > 0;
        if n == 1 {
            boundary.insert(id as u32);
        }
    }
    if !any {
        return Err(Error::EmptySuperlevel { threshold });
    }
    let mesh = mesh_from_ids(complex, k, &boundary, Provenance::SuperlevelBoundary);
    debug_assert!(mesh.is_z2_cycle());
    Ok(mesh)
}

fn expected_betti(k: usize, count: usize, spec: &LossSpec) -> Vec<usize> {
    let mut expect = vec![0usize; k + 1];
    expect[0] = spec.target_count(0).unwrap_or(count);
    for (j, e) in expect.iter_mut().enumerate().skip(1).take(k - 1) {
        *e = spec.target_count(j).unwrap_or(0);
    }
    expect[k] = count;
    expect
}

/// Select the dominant (d-1)-classes, refine their representatives, and
/// validate the union's homology; fall back to the superlevel boundary at
/// the dominant pair's midpoint when refinement degenerates or validation
/// fails.
/// Boundary of one top simplex in the star of `vertex`, all of whose
/// vertices are unclaimed and unused; the smallest minimal cycle around
/// the basin point.
fn basin_seed(
    fc: &FilteredComplex,
    k: usize,
    vertex: u32,
    claimed: &HashSet<u32>,
    union: &BTreeSet<u32>,
) -> Option<Vec<u32>> {
    let complex = fc.complex;
    let mut used: HashSet<u32> = claimed.clone();
    for &id in union {
        used.extend(complex.simplex(k, id).iter().copied());
    }
    let mut tops: BTreeSet<u32> = BTreeSet::new();
    let mut frontier: Vec<u32> = complex.cofacets[0][vertex as usize].clone();
    for dim in 1..=k {
        let mut next = Vec::new();
        for id in frontier {
            next.extend(complex.cofacets[dim][id as usize].iter().copied());
        }
        frontier = next;
    }
    tops.extend(frontier);
    for id in tops {
        if complex
            .simplex(k + 1, id)
            .iter()
            .all(|v| !used.contains(v))
        {
            return Some(complex.facets(k + 1, id));
        }
    }
    None
}

pub fn extract_surface(
    fc: &FilteredComplex,
    diagram: &PersistenceDiagram,
    spec: &LossSpec,
    cloud: &PointCloud,
) -> Result<SurfaceMesh> {
    let d = fc.complex.simplices.len() - 1;
    let k = d - 1;
    // With a declared target the top `t` classes are extracted, provided
    // they actually dominate: the t-th must clear the gamma floor and the
    // (t+1)-th must have fallen to less than half of it. Without a target
    // the lifetime ranking is cut at its largest relative gap.
    let dom: Vec<usize> = match spec.target_count(k) {
        Some(t) => {
            let lives: Vec<f64> = diagram.pd(k).iter().map(|p| p.lifetime()).collect();
            let max = lives.first().copied().unwrap_or(0.0);
            if t == 0 || lives.len() < t || lives[t - 1] <= DOMINANCE_GAMMA * max {
                return Err(Error::ConvergenceFailure(format!(
                    "fewer than {t} dominant {k}-classes"
                )));
            }
            if let Some(&next) = lives.get(t) {
                if next >= 0.5 * lives[t - 1] {
                    return Err(Error::ConvergenceFailure(format!(
                        "class {} (lifetime {next:.3}) rivals the {t} targeted {k}-classes",
                        t + 1
                    )));
                }
            }
            (0..t).collect()
        }
        None => diagram.dominant(k, DOMINANCE_GAMMA),
    };
    if dom.is_empty() {
        return Err(Error::ConvergenceFailure(format!(
            "no dominant {k}-dimensional class to extract"
        )));
    }
    let expect = expected_betti(k, dom.len(), spec);

    let mut reps = Vec::with_capacity(dom.len());
    for &idx in &dom {
        let pair = diagram.pd(k)[idx];
        let rep = if k == 1 {
            diagram.birth_level_loop(fc, &pair)?
        } else {
            diagram.cycle_representative(fc, &pair)?
        };
        reps.push((pair, rep));
    }
    // largest representative first: it claims the dominant ridges, and
    // the short, boxed-in representatives reroute around it afterwards
    reps.sort_by(|a, b| b.1.simplices.len().cmp(&a.1.simplices.len()));

    let mut union: BTreeSet<u32> = BTreeSet::new();
    let mut claimed: HashSet<u32> = HashSet::new();
    let mut degenerate = false;
    for (pair, rep) in &reps {
        let rep_mesh = mesh_from_ids(
            fc.complex,
            k,
            &rep.simplices.iter().copied().collect(),
            Provenance::RefinedCycle,
        );
        let mut r = Refiner::with_claimed(
            fc,
            k,
            &rep.simplices,
            claimed.clone(),
            union.iter().copied().collect(),
        );
        if r.is_manifold() {
            r.run();
        }
        // A later class may be impossible to pry off territory claimed
        // along shared ridges. Grow a replacement from the basin the
        // class encloses instead: the star of its death vertex is
        // interior to the feature, so an uphill-grown seed hugs the same
        // ridge from the free side.
        if r.vertex_uses.keys().any(|v| claimed.contains(v)) {
            if let Some(seed) = basin_seed(fc, k, pair.death_vertex, &claimed, &union) {
                let mut r2 = Refiner::with_claimed(
                    fc,
                    k,
                    &seed,
                    claimed.clone(),
                    union.iter().copied().collect(),
                );
                if r2.is_manifold() {
                    r2.run();
                }
                if !r2.vertex_uses.keys().any(|v| claimed.contains(v)) {
                    r = r2;
                }
            }
        }
        let refined = mesh_from_ids(fc.complex, k, &r.mesh, Provenance::RefinedCycle);
        // quality gate on the primary component only; later loops may
        // legitimately trade their own fit for vertex-disjointness
        if claimed.is_empty() {
            let shrunk = refined.simplices.len() * 5 < rep.simplices.len();
            let rep_chamfer = crate::metrics::chamfer_one_way(cloud, &rep_mesh)?;
            let ref_chamfer = crate::metrics::chamfer_one_way(cloud, &refined)?;
            if shrunk || ref_chamfer > 1.5 * rep_chamfer {
                degenerate = true;
                break;
            }
        }
        claimed.extend(r.vertex_uses.keys().copied());
        union.extend(r.mesh.iter());
    }

    if !degenerate {
        let mesh = mesh_from_ids(fc.complex, k, &union, Provenance::RefinedCycle);
        if mesh.betti_numbers()? == expect && mesh.self_intersection_free() {
            return Ok(mesh);
        }
    }

    let top = diagram.pd(k)[dom[0]];
    let fallback = superlevel_boundary(fc, 0.5 * (top.birth + top.death))?;
    if fallback.betti_numbers()? == expect && fallback.self_intersection_free() {
        Ok(fallback)
    } else {
        Err(Error::ConvergenceFailure(format!(
            "neither refinement nor superlevel boundary reached Betti {expect:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{attach_filtration, build_vertex_set, triangulate, VertexSet};
    use crate::field::GaussianParams;
    use crate::persistence::compute_persistence;

    fn bump_field_2d(
        centers: &[Point],
        s: f64,
        res: usize,
    ) -> (PointCloud, SimplicialComplex, GaussianParams) {
        let cloud = PointCloud::new(centers.to_vec(), 2).unwrap();
        let params = GaussianParams::isotropic(centers.len(), 2, s);
        let vs = build_vertex_set(&cloud, res, 0, &params, 0).unwrap();
        let complex = triangulate(&vs).unwrap();
        (cloud, complex, params)
    }

    fn ring_points(n: usize, cx: f64, cy: f64, r: f64) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [cx + r * a.cos(), cy + r * a.sin(), 0.0]
            })
            .collect()
    }

    fn dummy_pair(dim: usize) -> crate::persistence::PersistencePair {
        crate::persistence::PersistencePair {
            dim,
            birth: 1.0,
            death: 0.0,
            essential: true,
            birth_simplex: 0,
            death_simplex: None,
            birth_vertex: 0,
            death_vertex: 0,
        }
    }

    #[test]
    fn both_moves_fire_on_square_with_center() {
        // square corners (f = 1) around a high-valued center (f = 2):
        // move (i) pulls one boundary edge through the center, then
        // move (ii) collapses the remaining corners one by one
        let pts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        let complex = triangulate(&VertexSet::unstructured(pts, 2)).unwrap();
        assert_eq!(complex.count(2), 4);
        let vals = vec![1.0, 1.01, 1.02, 1.03, 2.0];
        let fc = FilteredComplex::from_vertex_values(&complex, vals);
        // initial mesh: the four boundary edges (those with one cofacet)
        let loop_ids: Vec<u32> = (0..complex.count(1) as u32)
            .filter(|&e| complex.cofacets[1][e as usize].len() == 1)
            .collect();
        assert_eq!(loop_ids.len(), 4);
        let rep = CycleRep {
            dim: 1,
            simplices: loop_ids,
            pair: dummy_pair(1),
        };
        let mesh = refine_cycle(&fc, &rep);
        // converges to a 3-edge loop through the center vertex
        assert_eq!(mesh.simplices.len(), 3);
        assert!(mesh.is_z2_cycle());
        assert_eq!(mesh.betti_numbers().unwrap(), vec![1, 1]);
        assert!(mesh.vertices.contains(&[0.5, 0.5, 0.0]));
    }

    #[test]
    fn locally_optimal_mesh_is_fixed_point() {
        // same square, but the center value is lowest: neither move applies
        let pts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        let complex = triangulate(&VertexSet::unstructured(pts, 2)).unwrap();
        let vals = vec![1.0, 1.01, 1.02, 1.03, 0.5];
        let fc = FilteredComplex::from_vertex_values(&complex, vals);
        let loop_ids: Vec<u32> = (0..complex.count(1) as u32)
            .filter(|&e| complex.cofacets[1][e as usize].len() == 1)
            .collect();
        let before: BTreeSet<u32> = loop_ids.iter().copied().collect();
        let rep = CycleRep {
            dim: 1,
            simplices: loop_ids,
            pair: dummy_pair(1),
        };
        let mesh = refine_cycle(&fc, &rep);
        let rebuilt = mesh_from_ids(&complex, 1, &before, Provenance::RefinedCycle);
        assert_eq!(mesh.simplices, rebuilt.simplices);
    }

    #[test]
    fn refinement_tightens_loop_around_ring() {
        // ring cloud; the dominant 1-class representative refines to a
        // cleaner loop with unchanged homology
        let centers = ring_points(12, 0.5, 0.5, 0.3);
        let (cloud, complex, params) = bump_field_2d(&centers, 0.08, 16);
        let fc = attach_filtration(&complex, &cloud, &params).unwrap();
        let diagram = compute_persistence(&fc).unwrap();
        let dom = diagram.dominant(1, 0.1);
        assert_eq!(dom.len(), 1);
        let pair = diagram.pd(1)[dom[0]];
        let rep = diagram.cycle_representative(&fc, &pair).unwrap();
        let mesh = refine_cycle(&fc, &rep);
        assert!(mesh.is_z2_cycle());
        assert!(mesh.self_intersection_free());
        assert_eq!(mesh.betti_numbers().unwrap(), vec![1, 1]);
        // moves only add higher-valued vertices / drop lower-valued ones:
        // the minimum field value over mesh vertices must not decrease
        let min_f = |m: &SurfaceMesh| -> f64 {
            m.vertices
                .iter()
                .map(|p| {
                    crate::field::eval_field(p, &cloud, &params).unwrap()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let rep_mesh = mesh_from_ids(
            fc.complex,
            1,
            &rep.simplices.iter().copied().collect(),
            Provenance::RefinedCycle,
        );
        assert!(min_f(&mesh) >= min_f(&rep_mesh) - 1e-15);
    }

    #[test]
    fn superlevel_boundary_examples() {
        let (cloud, complex, params) = bump_field_2d(&[[0.5, 0.5, 0.0], [0.2, 0.2, 0.0], [0.8, 0.8, 0.0]], 0.1, 16);
        let fc = attach_filtration(&complex, &cloud, &params).unwrap();
        let max_v = fc.vertex_values.iter().cloned().fold(f64::MIN, f64::max);
        let min_v = fc.vertex_values.iter().cloned().fold(f64::MAX, f64::min);
        // above the max: nothing survives
        assert!(matches!(
            superlevel_boundary(&fc, max_v + 1.0),
            Err(Error::EmptySuperlevel { .. })
        ));
        // below the min: the boundary of the whole domain box
        let whole = superlevel_boundary(&fc, min_v - 1.0).unwrap();
        assert!(whole.is_z2_cycle());
        assert_eq!(whole.betti_numbers().unwrap(), vec![1, 1]);
        let on_hull = |p: &Point| {
            let lo = crate::complex::DOMAIN_LO;
            let hi = crate::complex::DOMAIN_HI;
            p[0] == lo || p[0] == hi || p[1] == lo || p[1] == hi
        };
        assert!(whole.vertices.iter().all(on_hull));
    }

    #[test]
    fn superlevel_boundary_single_bump() {
        let centers = vec![[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.5, 0.0]];
        let cloud = PointCloud::new(centers, 2).unwrap();
        let params = GaussianParams::isotropic(3, 2, 0.15);
        let vs = build_vertex_set(&cloud, 24, 0, &params, 0).unwrap();
        let complex = triangulate(&vs).unwrap();
        let fc = attach_filtration(&complex, &cloud, &params).unwrap();
        let peak = fc.vertex_values.iter().cloned().fold(f64::MIN, f64::max);
        let mesh = superlevel_boundary(&fc, peak / 2.0).unwrap();
        assert_eq!(mesh.betti_numbers().unwrap(), vec![1, 1]);
        assert!(mesh.is_z2_cycle());
        assert!(mesh.self_intersection_free());
    }

    #[test]
    fn extract_ring_end_to_end() {
        let centers = ring_points(16, 0.5, 0.5, 0.3);
        let (cloud, complex, params) = bump_field_2d(&centers, 0.08, 20);
        let fc = attach_filtration(&complex, &cloud, &params).unwrap();
        let diagram = compute_persistence(&fc).unwrap();
        let spec =
            LossSpec::from_json(r#"{"terms":[{"dim":1,"index":1,"weight":-1.0}],"target_counts":{"1":1}}"#)
                .unwrap();
        let mesh = extract_surface(&fc, &diagram, &spec, &cloud).unwrap();
        assert_eq!(mesh.betti_numbers().unwrap(), vec![1, 1]);
        assert!(mesh.is_z2_cycle());
        assert!(mesh.self_intersection_free());
    }

    #[test]
    fn extract_fails_on_wrong_target() {
        let centers = ring_points(16, 0.5, 0.5, 0.3);
        let (cloud, complex, params) = bump_field_2d(&centers, 0.08, 20);
        let fc = attach_filtration(&complex, &cloud, &params).unwrap();
        let diagram = compute_persistence(&fc).unwrap();
        let spec =
            LossSpec::from_json(r#"{"terms":[{"dim":1,"index":1,"weight":-1.0}],"target_counts":{"1":3}}"#)
                .unwrap();
        assert!(matches!(
            extract_surface(&fc, &diagram, &spec, &cloud),
            Err(Error::ConvergenceFailure(_))
        ));
    }

    #[test]
    fn obj_and_ply_exports() {
        let mesh = SurfaceMesh {
            dim: 1,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0]],
            simplices: vec![vec![0, 1], vec![1, 2], vec![0, 2]],
            provenance: Provenance::RefinedCycle,
        };
        let mut obj = Vec::new();
        mesh.write_obj(&mut obj).unwrap();
        let obj = String::from_utf8(obj).unwrap();
        assert!(obj.contains("v 0 0 0"));
        assert!(obj.contains("l 1 2"));
        let mut ply = Vec::new();
        mesh.write_ply(&mut ply).unwrap();
        let ply = String::from_utf8(ply).unwrap();
        assert!(ply.starts_with("ply\nformat ascii 1.0"));
        assert!(ply.contains("element edge 3"));
    }
}
