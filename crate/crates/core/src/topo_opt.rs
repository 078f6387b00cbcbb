//! Topological losses on persistence diagrams and their backpropagation
//! to the Gaussian parameters: E = sum of w_i (d_i - b_i)^2 terms, with
//! gradients flowing through the inverse map to the birth/death vertices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::complex::{attach_filtration, FilteredComplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::field::{eval_field_grad, GaussianParams};
use crate::geom::Mat;
use crate::persistence::{compute_persistence, PersistenceDiagram};
use crate::pointcloud::PointCloud;

/// A pair counts as a real feature when its lifetime exceeds this fraction
/// of the largest lifetime in its dimension.
pub const DOMINANCE_GAMMA: f64 = 0.1;

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
pub struct LossTerm {
    pub dim: usize,
    /// 1-based index into PD(dim) sorted by decreasing lifetime.
    pub index: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct LossSpec {
    pub terms: Vec<LossTerm>,
    /// Expected dominant-feature counts per dimension (JSON object keys
    /// are strings).
    #[serde(default)]
    pub target_counts: BTreeMap<String, usize>,
}

impl LossSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: LossSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("loss needs at least one term".into()));
        }
        for t in &self.terms {
            if t.index < 1 {
                return Err(Error::Config("term indices are 1-based".into()));
            }
            if !t.weight.is_finite() || t.weight == 0.0 {
                return Err(Error::Config(format!(
                    "term weight {} must be finite and nonzero",
                    t.weight
                )));
            }
        }
        Ok(())
    }

    pub fn target_count(&self, dim: usize) -> Option<usize> {
        self.target_counts.get(&dim.to_string()).copied()
    }

    /// Dimensions that should be checked for dominant-feature counts:
    /// explicit targets, or the term count per dimension as a default.
    pub fn expected_counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (k, &v) in &self.target_counts {
            if let Ok(dim) = k.parse::<usize>() {
                out.insert(dim, v);
            }
        }
        out
    }
}

/// Sum over terms of weight * (d_i - b_i)^2; terms whose index exceeds the
/// diagram contribute nothing.
pub fn eval_loss(diagram: &PersistenceDiagram, spec: &LossSpec) -> f64 {
    spec.terms
        .iter()
        .map(|t| match diagram.pd(t.dim).get(t.index - 1) {
            Some(p) => t.weight * (p.death - p.birth) * (p.death - p.birth),
            None => 0.0,
        })
        .sum()
}

/// Chain rule through the inverse map: dE/db_i = -2w(d_i - b_i) and
/// dE/dd_i = +2w(d_i - b_i), each multiplied into the field gradient at
/// the corresponding extremal vertex and accumulated per cloud point.
pub fn loss_gradient(
    fc: &FilteredComplex,
    diagram: &PersistenceDiagram,
    spec: &LossSpec,
    cloud: &PointCloud,
    params: &GaussianParams,
) -> Result<Vec<Mat>> {
    let d = params.dim;
    let n = cloud.points.len();
    let mut grads = vec![Mat::zero(d); n];
    for t in &spec.terms {
        let Some(pair) = diagram.pd(t.dim).get(t.index - 1) else {
            continue;
        };
        let life = pair.death - pair.birth;
        let de_db = -2.0 * t.weight * life;
        let de_dd = 2.0 * t.weight * life;
        for (vertex, coef) in [(pair.birth_vertex, de_db), (pair.death_vertex, de_dd)] {
            let x = &fc.complex.vertices[vertex as usize];
            let fg = eval_field_grad(x, cloud, params)?;
            for p in 0..n {
                grads[p] = grads[p].add(&fg.grads[p].scale(coef));
            }
        }
    }
    Ok(grads)
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            max_iters: 500,
            plateau_tol: 1e-7,
            plateau_window: 25,
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub loss: f64,
    pub active_terms: usize,
    /// Lifetime of each term's pair (0 when inactive), in term order.
    pub lifetimes: Vec<f64>,
}

pub struct OptimizeResult {
    pub params: GaussianParams,
    pub trace: Vec<f64>,
    pub rows: Vec<TraceRow>,
    /// Diagram at the best-loss parameters.
    pub diagram: PersistenceDiagram,
    pub best_loss: f64,
}

const MAX_BACKTRACK: usize = 60;
const MAX_REL_STEP: f64 = 0.02;

/// True when every targeted dimension shows exactly the prescribed number
/// of dominant classes, with margin on both sides of the dominance cut so
/// extraction sees the same count. The loss itself is unbounded below
/// (lifetimes can grow without limit), so this is the natural stopping
/// point: further descent only rescales the field.
fn targets_met(diagram: &PersistenceDiagram, spec: &LossSpec) -> bool {
    let targets = spec.expected_counts();
    if targets.is_empty() {
        return false;
    }
    let gamma = DOMINANCE_GAMMA;
    for (&dim, &t) in &targets {
        let mut lives: Vec<f64> = diagram.pd(dim).iter().map(|p| p.lifetime()).collect();
        lives.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let max = lives.first().copied().unwrap_or(0.0);
        if t == 0 {
            if max > 0.0 {
                return false;
            }
            continue;
        }
        if lives.len() < t || max <= 0.0 {
            return false;
        }
        if lives[t - 1] < 2.0 * gamma * max {
            return false;
        }
        if let Some(&next) = lives.get(t) {
            if next > 0.1 * gamma * max {
                return false;
            }
        }
    }
    true
}

/// Full-batch gradient descent on the complex frozen at initialization.
/// Stops at max_iters or when the best loss improves by less than
/// plateau_tol over plateau_window consecutive iterations; a non-finite
/// loss halves the learning rate (up to 5 times) and restarts from the
/// best parameters seen.
pub fn optimize(
    cloud: &PointCloud,
    complex: &SimplicialComplex,
    init: GaussianParams,
    spec: &LossSpec,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    spec.validate()?;
    cfg.validate()?;
    let mut lr = cfg.learning_rate;
    let mut params = init;
    let mut trace = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut best: Option<(f64, GaussianParams, PersistenceDiagram)> = None;
    let mut stall = 0usize;

    let mut fc = attach_filtration(complex, cloud, &params)?;
    let mut diagram = compute_persistence(&fc)?;
    let mut loss = eval_loss(&diagram, spec);
    if !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "loss is {loss} at the initial parameters"
        )));
    }
    while trace.len() < cfg.max_iters {
        trace.push(loss);
        let lifetimes: Vec<f64> = spec
            .terms
            .iter()
            .map(|t| {
                diagram
                    .pd(t.dim)
                    .get(t.index - 1)
                    .map_or(0.0, |p| p.lifetime())
            })
            .collect();
        rows.push(TraceRow {
            loss,
            active_terms: lifetimes.iter().filter(|&&l| l != 0.0).count(),
            lifetimes,
        });
        let improved = match &best {
            Some((b, _, _)) => loss < b - cfg.plateau_tol,
            None => true,
        };
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.plateau_window {
                break;
            }
        }
        if best.as_ref().map_or(true, |(b, _, _)| loss < *b) {
            best = Some((loss, params.clone(), diagram.clone()));
        }
        if targets_met(&diagram, spec) {
            best = Some((loss, params.clone(), diagram.clone()));
            break;
        }
        if lr == 0.0 || trace.len() == cfg.max_iters {
            continue;
        }
        let grads = loss_gradient(&fc, &diagram, spec, cloud, &params)?;

        // backtracking step control: start from (a multiple of) the last
        // accepted step, halve while the step makes the loss worse or
        // non-finite, and require strict descent so a collapsed step size
        // cannot freeze the loop with no-op iterations. The first trial is
        // also capped so no single step moves any point's parameters by
        // more than a small fraction of the current parameter scale:
        // gradients grow with the field magnitude and an uncapped step can
        // reshape the whole field in one jump.
        let gmax = grads.iter().map(Mat::frob_norm).fold(0.0, f64::max);
        let pscale = params
            .alphas
            .iter()
            .map(Mat::frob_norm)
            .fold(0.0, f64::max);
        let cap = if gmax > 0.0 {
            MAX_REL_STEP * pscale / gmax
        } else {
            f64::INFINITY
        };
        let mut trial = (8.0 * lr).min(cfg.learning_rate).min(cap);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let mut cand = params.clone();
            for (alpha, g) in cand.alphas.iter_mut().zip(&grads) {
                *alpha = alpha.sub(&g.scale(trial));
            }
            cand.reproject_spd();
            let cand_fc = attach_filtration(complex, cloud, &cand)?;
            let cand_diagram = compute_persistence(&cand_fc)?;
            let cand_loss = eval_loss(&cand_diagram, spec);
            if cand_loss.is_finite() && cand_loss < loss {
                params = cand;
                fc = cand_fc;
                diagram = cand_diagram;
                loss = cand_loss;
                lr = trial;
                accepted = true;
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break; // no descent direction at any usable step: converged
        }
    }
    let (best_loss, params, diagram) = best.expect("at least one iteration ran");
    Ok(OptimizeResult {
        params,
        trace,
        rows,
        diagram,
        best_loss,
    })
}
