//! Point-scan ingestion: ASCII XYZ / PLY parsing, normalization into the
//! unit box, and nearest-neighbor spacing statistics.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{dist, Point};

/// Uniform scale + translation mapping normalized coordinates back to the
/// original frame: original = normalized * scale + offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleTransform {
    pub scale: f64,
    pub offset: [f64; 3],
}

impl ScaleTransform {
    pub fn identity() -> Self {
        ScaleTransform {
            scale: 1.0,
            offset: [0.0; 3],
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        [
            p[0] * self.scale + self.offset[0],
            p[1] * self.scale + self.offset[1],
            p[2] * self.scale + self.offset[2],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub dim: usize,
    /// Inverse of the normalizing transform (normalized -> original).
    pub scale: ScaleTransform,
    /// Mean nearest-neighbor distance in current coordinates.
    pub avg_spacing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Dimension(format!("unsupported dimension {dim}")));
        }
        if points.len() < dim + 1 {
            return Err(Error::EmptyCloud(format!(
                "need at least {} points, got {}",
                dim + 1,
                points.len()
            )));
        }
        let mut cloud = PointCloud {
            points,
            dim,
            scale: ScaleTransform::identity(),
            avg_spacing: 0.0,
        };
        cloud.avg_spacing = cloud.mean_nn_distance();
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean over points of the nearest-neighbor Euclidean distance.
    /// Brute force; the target scale is at most a few thousand points.
    fn mean_nn_distance(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for j in 0..n {
                if i != j {
                    let d = dist(&self.points[i], &self.points[j], self.dim);
                    if d < best {
                        best = d;
                    }
                }
            }
            total += best;
        }
        total / n as f64
    }
}

/// Load a point scan in the declared ASCII format.
pub fn load_pointcloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    let pstr = path.display().to_string();
    match format {
        CloudFormat::Xyz => parse_xyz(&text, &pstr),
        CloudFormat::Ply => parse_ply(&text, &pstr),
    }
}

/// Infer the format from the file extension (`.ply` -> PLY, else XYZ).
pub fn format_from_path(path: &Path) -> CloudFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
        _ => CloudFormat::Xyz,
    }
}

fn parse_coord(tok: &str, path: &str, line_no: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        msg: format!("line {line_no}: bad number {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            msg: format!("line {line_no}: non-finite coordinate {tok:?}"),
        });
    }
    Ok(v)
}

fn parse_xyz(text: &str, path: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(Error::Parse {
                path: path.to_string(),
                msg: format!("line {}: expected 2 or 3 columns, got {}", idx + 1, toks.len()),
            });
        }
        match dim {
            None => dim = Some(toks.len()),
            Some(d) if d != toks.len() => {
                return Err(Error::Dimension(format!(
                    "{path}: line {} has {} columns, earlier lines had {d}",
                    idx + 1,
                    toks.len()
                )))
            }
            _ => {}
        }
        let mut p = [0.0; 3];
        for (k, t) in toks.iter().enumerate() {
            p[k] = parse_coord(t, path, idx + 1)?;
        }
        points.push(p);
    }
    let dim = dim.ok_or_else(|| Error::EmptyCloud(path.to_string()))?;
    PointCloud::new(points, dim)
}

fn parse_ply(text: &str, path: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        msg,
    };
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err("missing 'ply' magic".into())),
    }
    let mut vertex_count: Option<usize> = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut in_vertex_element = false;
    // elements in header order, with their counts; only `vertex` is parsed
    let mut elements: Vec<(String, usize)> = Vec::new();
    for (idx, raw) in lines.by_ref() {
        let line = raw.trim();
        if line == "end_header" {
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(err(format!("line {}: only ascii PLY supported", idx + 1)));
                }
            }
            Some("element") => {
                let name = toks.get(1).ok_or_else(|| err("bad element line".into()))?;
                let n: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(format!("line {}: bad element count", idx + 1)))?;
                in_vertex_element = *name == "vertex";
                if in_vertex_element {
                    vertex_count = Some(n);
                }
                elements.push((name.to_string(), n));
            }
            Some("property") => {
                if in_vertex_element {
                    if let Some(name) = toks.last() {
                        vertex_props.push(name.to_string());
                    }
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            _ => {}
        }
    }
    let vertex_count = vertex_count.ok_or_else(|| err("no vertex element".into()))?;
    let xi = vertex_props.iter().position(|p| p == "x");
    let yi = vertex_props.iter().position(|p| p == "y");
    let zi = vertex_props.iter().position(|p| p == "z");
    let (xi, yi) = match (xi, yi) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(err("vertex element lacks x/y properties".into())),
    };
    let dim = if zi.is_some() { 3 } else { 2 };

    let mut points = Vec::with_capacity(vertex_count);
    for (name, count) in &elements {
        for _ in 0..*count {
            let (idx, raw) = lines
                .next()
                .ok_or_else(|| err("unexpected end of file in body".into()))?;
            if name != "vertex" {
                continue;
            }
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.len() < vertex_props.len() {
                return Err(err(format!("line {}: short vertex row", idx + 1)));
            }
            let mut p = [0.0; 3];
            p[0] = parse_coord(toks[xi], path, idx + 1)?;
            p[1] = parse_coord(toks[yi], path, idx + 1)?;
            if let Some(z) = zi {
                p[2] = parse_coord(toks[z], path, idx + 1)?;
            }
            points.push(p);
        }
    }
    if points.len() != vertex_count {
        return Err(err(format!(
            "expected {vertex_count} vertices, parsed {}",
            points.len()
        )));
    }
    PointCloud::new(points, dim)
}

/// Rescale the cloud into [0,1]^d, mapping the longest bounding-box side to
/// length 1 and centering the other axes. Stores the inverse transform and
/// recomputes `avg_spacing` in normalized units.
pub fn normalize(cloud: &PointCloud) -> Result<PointCloud> {
    let d = cloud.dim;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut longest = 0.0f64;
    for i in 0..d {
        longest = longest.max(hi[i] - lo[i]);
    }
    if longest <= 0.0 {
        return Err(Error::DegenerateCloud(
            "all points coincide; cannot normalize".into(),
        ));
    }
    let inv = 1.0 / longest;
    let mut offset = [0.0; 3];
    for i in 0..d {
        // center each axis inside [0,1]
        let extent = (hi[i] - lo[i]) * inv;
        offset[i] = lo[i] - (1.0 - extent) * 0.5 * longest;
    }
    let points: Vec<Point> = cloud
        .points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for i in 0..d {
                q[i] = (p[i] - offset[i]) * inv;
            }
            q
        })
        .collect();
    // compose with any existing transform so round trips reach the original frame
    let scale = ScaleTransform {
        scale: longest * cloud.scale.scale,
        offset: {
            let mut o = [0.0; 3];
            for i in 0..3 {
                o[i] = cloud.scale.offset[i] + cloud.scale.scale * offset[i];
            }
            o
        },
    };
    let mut out = PointCloud::new(points, d)?;
    out.scale = scale;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn xyz_parse_2d() {
        let f = write_temp("0 0\n1 0\n0 1\n");
        let c = load_pointcloud(f.path(), CloudFormat::Xyz).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn xyz_rejects_nan() {
        let f = write_temp("0 0\n1 0\n0 nan\n");
        assert!(matches!(
            load_pointcloud(f.path(), CloudFormat::Xyz),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn xyz_rejects_mixed_dims() {
        let f = write_temp("0 0\n1 0 0\n");
        assert!(matches!(
            load_pointcloud(f.path(), CloudFormat::Xyz),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn ply_parse_tetrahedron() {
        let body = "ply\nformat ascii 1.0\nelement vertex 4\n\
                    property float x\nproperty float y\nproperty float z\n\
                    end_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
        let f = write_temp(body);
        let c = load_pointcloud(f.path(), CloudFormat::Ply).unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn normalize_two_points() {
        let c = PointCloud::new(
            vec![
                [0.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 0.1, 0.0],
            ],
            2,
        )
        .unwrap();
        let n = normalize(&c).unwrap();
        for p in &n.points {
            assert!(p[0] >= -1e-12 && p[0] <= 1.0 + 1e-12);
            assert!(p[1] >= -1e-12 && p[1] <= 1.0 + 1e-12);
        }
        // longest side (x extent 2) maps to 1
        let xs: Vec<f64> = n.points.iter().map(|p| p[0]).collect();
        assert_relative_eq!(
            xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min),
            1.0
        );
    }

    #[test]
    fn normalize_hand_computed_spacing() {
        // {(5,5),(5,7),(7,5)}: longest side 2 maps to 1, NN distances all 1
        let c = PointCloud::new(
            vec![[5.0, 5.0, 0.0], [5.0, 7.0, 0.0], [7.0, 5.0, 0.0]],
            2,
        )
        .unwrap();
        let n = normalize(&c).unwrap();
        assert_relative_eq!(n.avg_spacing, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_degenerate() {
        let c = PointCloud::new(
            vec![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            2,
        )
        .unwrap();
        assert!(matches!(normalize(&c), Err(Error::DegenerateCloud(_))));
    }

    #[test]
    fn normalize_idempotent_and_roundtrip() {
        let c = PointCloud::new(
            vec![
                [1.0, 3.0, 0.0],
                [4.0, -2.0, 0.0],
                [0.5, 0.5, 0.0],
                [2.0, 2.0, 0.0],
            ],
            2,
        )
        .unwrap();
        let n1 = normalize(&c).unwrap();
        let n2 = normalize(&n1).unwrap();
        for (a, b) in n1.points.iter().zip(&n2.points) {
            for i in 0..2 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        for (orig, norm) in c.points.iter().zip(&n1.points) {
            let back = n1.scale.apply(norm);
            for i in 0..2 {
                let rel = (back[i] - orig[i]).abs() / orig[i].abs().max(1.0);
                assert!(rel < 1e-9, "roundtrip {back:?} vs {orig:?}");
            }
        }
    }
}
