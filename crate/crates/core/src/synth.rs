//! Synthetic benchmark shapes and their reconstruction presets: sampled
//! point clouds plus the loss specification and target topology used to
//! reconstruct them.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::pointcloud::PointCloud;
use crate::topo_opt::{LossSpec, LossTerm};

pub const PRESET_NAMES: [&str; 5] = [
    "dual_circle_1hole",
    "dual_circle_2holes",
    "sphere_void",
    "torus_tunnels",
    "sparse_ring",
];

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub dim: usize,
    pub default_n: usize,
    pub loss: LossSpec,
    /// Betti numbers of the intended reconstruction (TFI ground truth).
    pub true_counts: Vec<usize>,
}

fn gap_loss(dim: usize, keep: usize, targets: &[(usize, usize)]) -> LossSpec {
    // maximize the gap between the keep-th and (keep+1)-th lifetimes
    LossSpec {
        terms: vec![
            LossTerm {
                dim,
                index: keep,
                weight: -1.0,
            },
            LossTerm {
                dim,
                index: keep + 1,
                weight: 1.0,
            },
        ],
        target_counts: targets
            .iter()
            .map(|(d, c)| (d.to_string(), *c))
            .collect(),
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "dual_circle_1hole" => Preset {
            name: "dual_circle_1hole",
            dim: 2,
            default_n: 400,
            loss: gap_loss(1, 1, &[(1, 1)]),
            true_counts: vec![1, 1],
        },
        "dual_circle_2holes" => Preset {
            name: "dual_circle_2holes",
            dim: 2,
            default_n: 400,
            loss: gap_loss(1, 2, &[(1, 2)]),
            true_counts: vec![2, 2],
        },
        "sphere_void" => Preset {
            name: "sphere_void",
            dim: 3,
            default_n: 500,
            loss: gap_loss(2, 1, &[(2, 1)]),
            true_counts: vec![1, 0, 1],
        },
        "torus_tunnels" => Preset {
            name: "torus_tunnels",
            dim: 3,
            default_n: 300,
            loss: gap_loss(1, 2, &[(1, 2), (2, 1)]),
            true_counts: vec![1, 2, 1],
        },
        "sparse_ring" => Preset {
            name: "sparse_ring",
            dim: 2,
            default_n: 40,
            loss: gap_loss(1, 1, &[(1, 1)]),
            true_counts: vec![1, 1],
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

/// Sample the preset's shape: n points, optionally jittered by a centered
/// Gaussian of the given standard deviation.
pub fn synth_cloud(name: &str, n: usize, seed: u64, jitter: f64) -> Result<PointCloud> {
    let p = preset(name)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pts = match p.name {
        "dual_circle_1hole" | "dual_circle_2holes" => dual_circle(n),
        "sphere_void" => sphere(n),
        "torus_tunnels" => torus(n),
        "sparse_ring" => ring(n),
        _ => unreachable!(),
    };
    if jitter > 0.0 {
        for q in &mut pts {
            for c in q.iter_mut().take(p.dim) {
                // Box-Muller from two uniform draws
                let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-12), rng.gen());
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                *c += jitter * g;
            }
        }
    }
    PointCloud::new(pts, p.dim)
}

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Two circles of radius 0.2 tangent at (0.5, 0.5).
/// The pinch between the circles is kept ambiguous at every sampling
/// density: each circle leaves an unsampled arc of DUAL_GAP_STEPS sample
/// steps facing the other, and the circles clear each other by
/// DUAL_SEP_STEPS steps. The facing gap is wider than the clearance, so
/// at moderate kernel widths the field bridges across the clearance (one
/// merged outline) more readily than along each circle (two loops) --
/// both readings stay reachable.
const DUAL_GAP_STEPS: f64 = 8.0;
const DUAL_SEP_STEPS: f64 = 5.0;

pub const DUAL_RADIUS: f64 = 0.2;

pub fn dual_circle_centers(n: usize) -> [f64; 2] {
    let step = TAU / (n / 2) as f64;
    let half_sep = 0.5 * DUAL_SEP_STEPS * DUAL_RADIUS * step;
    [0.5 - DUAL_RADIUS - half_sep, 0.5 + DUAL_RADIUS + half_sep]
}

fn dual_circle(n: usize) -> Vec<Point> {
    let half = n / 2;
    let r = DUAL_RADIUS;
    let centers = dual_circle_centers(n);
    let mut pts = Vec::with_capacity(n);
    for (side, count, phase, cx) in [(-1.0, half, 0.0, centers[0]), (1.0, n - half, 0.5, centers[1])]
    {
        let step = TAU / count as f64;
        let gap = 0.5 * DUAL_GAP_STEPS * step; // half-gap angle at the pinch
        let span = TAU - 2.0 * gap;
        for i in 0..count {
            let a = gap + span * (i as f64 + phase) / count as f64;
            // angle 0 faces the other circle
            pts.push([cx - side * r * a.cos(), 0.5 + r * a.sin(), 0.0]);
        }
    }
    pts
}

fn ring(n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            [0.5 + 0.35 * a.cos(), 0.5 + 0.35 * a.sin(), 0.0]
        })
        .collect()
}

/// Fibonacci sphere of radius 0.35 centered in the unit cube.
fn sphere(n: usize) -> Vec<Point> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = TAU * i as f64 / golden;
            [
                0.5 + 0.35 * r * a.cos(),
                0.5 + 0.35 * r * a.sin(),
                0.5 + 0.35 * z,
            ]
        })
        .collect()
}

/// Torus with major radius 0.3 and minor radius 0.13, golden-angle sampled.
fn torus(n: usize) -> Vec<Point> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let u = TAU * i as f64 / n as f64;
            let v = TAU * (i as f64 * golden).fract();
            let w = 0.3 + 0.13 * v.cos();
            [
                0.5 + w * u.cos(),
                0.5 + w * u.sin(),
                0.5 + 0.13 * v.sin(),
            ]
        })
        .collect()
}
