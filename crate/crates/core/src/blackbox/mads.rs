//! Mesh adaptive direct search over the unit-normalized parameter box.
//!
//! Each iteration tries a speculative step along the last successful
//! direction, then polls `2n` orthogonal directions `±H e_i` where `H` is a
//! random Householder reflection. Success doubles the mesh size, failure
//! halves it. Poll points are snapped to the box and repeated points are
//! answered from a cache without spending budget.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CostBreakdown, OptBox};
use crate::error::{Error, Result};
use crate::sim::StartupParams;

const DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptBudget {
    /// Maximum number of objective evaluations, initial points included.
    pub max_evals: usize,
    pub seed: u64,
    pub initial_points: Vec<StartupParams>,
    /// Evaluate a whole poll set concurrently instead of opportunistically.
    pub parallel_poll: bool,
    /// Starting poll size in unit coordinates.
    pub initial_mesh: f64,
    pub min_mesh: f64,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self {
            max_evals: 200,
            seed: 0,
            initial_points: Vec::new(),
            parallel_poll: false,
            initial_mesh: 0.25,
            min_mesh: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub theta: StartupParams,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub theta: StartupParams,
    pub best: CostBreakdown,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
}

impl OptResult {
    /// Incumbent total after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.history
            .iter()
            .map(|h| {
                if h.cost.total < best {
                    best = h.cost.total;
                }
                best
            })
            .collect()
    }

    pub fn history_to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "eval", "r_o", "o_ini", "omega_trigger", "o_trigger", "c_s", "c_c", "alpha_d", "total", "t_st",
        ])?;
        for (i, h) in self.history.iter().enumerate() {
            let t = h.theta.to_array();
            let c = &h.cost;
            let mut row = vec![i.to_string()];
            row.extend(t.iter().chain(&[c.c_s, c.c_c, c.alpha_d, c.total, c.t_st]).map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Total order used to rank evaluated points: cost, then startup time,
/// then θ lexicographically. Non-finite totals rank last.
fn rank(a: &(StartupParams, CostBreakdown), b: &(StartupParams, CostBreakdown)) -> Ordering {
    let key = |c: &CostBreakdown| if c.total.is_finite() { c.total } else { f64::INFINITY };
    key(&a.1)
        .total_cmp(&key(&b.1))
        .then(a.1.t_st.total_cmp(&b.1.t_st))
        .then_with(|| {
            a.0.to_array()
                .iter()
                .zip(b.0.to_array())
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Strict improvement used by search and poll steps; θ order only
/// separates initial points.
fn improves(a: &(StartupParams, CostBreakdown), b: &(StartupParams, CostBreakdown)) -> bool {
    let key = |c: &CostBreakdown| if c.total.is_finite() { c.total } else { f64::INFINITY };
    key(&a.1).total_cmp(&key(&b.1)).then(a.1.t_st.total_cmp(&b.1.t_st)).is_lt()
}

fn cache_key(x: &[f64; DIM]) -> [i64; DIM] {
    std::array::from_fn(|i| (x[i] * 1e12).round() as i64)
}

fn snap(x: [f64; DIM]) -> [f64; DIM] {
    x.map(|v| v.clamp(0.0, 1.0))
}

/// Columns of `I − 2 v vᵀ` for a random unit `v`.
fn householder_basis(rng: &mut ChaCha8Rng) -> [[f64; DIM]; DIM] {
    loop {
        let v: [f64; DIM] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        if norm2 < 1e-12 {
            continue;
        }
        return std::array::from_fn(|j| {
            std::array::from_fn(|i| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / norm2)
        });
    }
}

struct Search<'a, F> {
    objective: &'a F,
    bbox: &'a OptBox,
    max_evals: usize,
    cache: HashMap<[i64; DIM], CostBreakdown>,
    history: Vec<HistoryEntry>,
}

impl<F> Search<'_, F>
where
    F: Fn(&StartupParams) -> Result<CostBreakdown> + Sync,
{
    fn remaining(&self) -> usize {
        self.max_evals - self.history.len()
    }

    fn record(&mut self, x: &[f64; DIM], theta: StartupParams, cost: CostBreakdown) {
        self.cache.insert(cache_key(x), cost);
        self.history.push(HistoryEntry { theta, cost });
    }

    /// `None` once the budget is exhausted for a point not yet seen.
    fn eval(&mut self, x: [f64; DIM]) -> Result<Option<(StartupParams, CostBreakdown)>> {
        let x = snap(x);
        let theta = self.bbox.from_unit(&x);
        if let Some(c) = self.cache.get(&cache_key(&x)) {
            return Ok(Some((theta, *c)));
        }
        if self.remaining() == 0 {
            return Ok(None);
        }
        let cost = (self.objective)(&theta)?;
        self.record(&x, theta, cost);
        Ok(Some((theta, cost)))
    }

    /// Evaluates the unseen points of a poll set concurrently, recording
    /// results in direction order.
    fn eval_batch(&mut self, points: &[[f64; DIM]]) -> Result<()> {
        let mut fresh: Vec<[f64; DIM]> = Vec::new();
        for p in points {
            let p = snap(*p);
            let k = cache_key(&p);
            if !self.cache.contains_key(&k) && !fresh.iter().any(|q| cache_key(q) == k) {
                fresh.push(p);
            }
        }
        fresh.truncate(self.remaining());
        let bbox = self.bbox;
        let objective = self.objective;
        let costs = fresh
            .par_iter()
            .map(|x| objective(&bbox.from_unit(x)))
            .collect::<Result<Vec<_>>>()?;
        for (x, c) in fresh.iter().zip(costs) {
            self.record(x, bbox.from_unit(x), c);
        }
        Ok(())
    }
}

/// Minimizes `objective` over `bbox` within `budget.max_evals` evaluations.
pub fn mads_optimize<F>(objective: F, bbox: &OptBox, budget: &OptBudget) -> Result<OptResult>
where
    F: Fn(&StartupParams) -> Result<CostBreakdown> + Sync,
{
    bbox.validate()?;
    if budget.max_evals == 0 {
        return Err(Error::InvalidConfig("evaluation budget must be >= 1".into()));
    }
    if budget.initial_points.is_empty() {
        return Err(Error::NoFeasibleStart);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut s = Search {
        objective: &objective,
        bbox,
        max_evals: budget.max_evals,
        cache: HashMap::new(),
        history: Vec::new(),
    };

    let mut incumbent: Option<([f64; DIM], (StartupParams, CostBreakdown))> = None;
    for p in &budget.initial_points {
        let x = snap(bbox.to_unit(p));
        let Some(r) = s.eval(x)? else { break };
        if !r.1.total.is_finite() {
            continue;
        }
        if incumbent.as_ref().is_none_or(|(_, inc)| rank(&r, inc).is_lt()) {
            incumbent = Some((x, r));
        }
    }
    let (mut x, mut best) = incumbent.ok_or(Error::NoFeasibleStart)?;

    let mut mesh = budget.initial_mesh;
    let mut last_dir: Option<[f64; DIM]> = None;
    'outer: while s.remaining() > 0 && mesh >= budget.min_mesh {
        if let Some(d) = last_dir {
            let cand = snap(std::array::from_fn(|i| x[i] + 2.0 * d[i]));
            match s.eval(cand)? {
                None => break,
                Some(r) if improves(&r, &best) => {
                    x = cand;
                    best = r;
                    mesh = (mesh * 2.0).min(1.0);
                    continue;
                }
                Some(_) => {}
            }
        }

        let basis = householder_basis(&mut rng);
        let dirs: Vec<[f64; DIM]> = basis
            .iter()
            .flat_map(|col| [col.map(|c| c * mesh), col.map(|c| -c * mesh)])
            .collect();
        let points: Vec<[f64; DIM]> = dirs
            .iter()
            .map(|d| snap(std::array::from_fn(|i| x[i] + d[i])))
            .collect();
        if budget.parallel_poll {
            s.eval_batch(&points)?;
        }

        let mut improved = None;
        for p in &points {
            let Some(r) = s.eval(*p)? else { break 'outer };
            if improves(&r, &best) {
                improved = Some((*p, r));
                break;
            }
        }
        match improved {
            Some((p, r)) => {
                // effective step after snapping
                last_dir = Some(std::array::from_fn(|i| p[i] - x[i]));
                x = p;
                best = r;
                mesh = (mesh * 2.0).min(1.0);
            }
            None => {
                last_dir = None;
                mesh *= 0.5;
            }
        }
    }

    Ok(OptResult {
        theta: best.0,
        best: best.1,
        evaluations: s.history.len(),
        history: s.history,
    })
}
