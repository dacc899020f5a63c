//! Destination-access efficiency and the greedy single-route comparator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::scenario::{draw_destinations, repetition_seed};
use super::ExperimentError;
use crate::channel::ChannelStats;
use crate::hexgrid::Grid;
use crate::routing::RouteTopology;

/// Efficiency figures over a `(p, b)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Efficiency {
    /// Mean `p_D` over the whole grid.
    pub jbit: f64,
    /// Integral of `p_D` over `p`, one entry per `b`.
    pub bid: Vec<f64>,
    /// Sum of `p_D` over `b`, one entry per grid `p`.
    pub tip: Vec<f64>,
}

/// Trapezoid integral of `y(x)` from 0 to the last `x`. When the grid
/// starts above 0 the first segment is extended linearly to `x = 0`, so
/// the rule is exact for any `y` of degree at most one.
pub fn trapezoid_from_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    if x[0] > 0.0 {
        let y0 = if x.len() > 1 {
            y[0] - (y[1] - y[0]) / (x[1] - x[0]) * x[0]
        } else {
            y[0]
        };
        total += 0.5 * (y0 + y[0]) * x[0];
    }
    for i in 1..x.len() {
        total += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    total
}

/// `p_d[b - 1][i]` is the mean access probability at `p_grid[i]` with
/// demand `b`.
pub fn efficiency_metrics(p_grid: &[f64], p_d: &[Vec<f64>]) -> Result<Efficiency, ExperimentError> {
    let ok_grid = !p_grid.is_empty()
        && p_grid[0] > 0.0
        && p_grid[p_grid.len() - 1] <= 1.0
        && p_grid.windows(2).all(|w| w[1] > w[0]);
    if !ok_grid || p_d.is_empty() || p_d.iter().any(|row| row.len() != p_grid.len()) {
        return Err(ExperimentError::BadGrid);
    }
    let cells = (p_d.len() * p_grid.len()) as f64;
    Ok(Efficiency {
        jbit: p_d.iter().flatten().sum::<f64>() / cells,
        bid: p_d
            .iter()
            .map(|row| trapezoid_from_zero(p_grid, row))
            .collect(),
        tip: (0..p_grid.len())
            .map(|i| p_d.iter().map(|row| row[i]).sum())
            .collect(),
    })
}

/// Cells that transmit on the priority-one route from `m`, starting with
/// `m` itself. `None` if the route does not reach a destination.
pub fn single_route(grid: &Grid, topology: &RouteTopology, m: usize) -> Option<Vec<usize>> {
    let mut path = vec![m];
    let mut cur = m;
    while let Some(next) = topology.first_hop(grid, cur) {
        if topology.destinations().contains(next) {
            return Some(path);
        }
        if path.contains(&next) {
            return None;
        }
        path.push(next);
        cur = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    /// Source subcells (every non-destination cell except the BS).
    pub sources: Vec<usize>,
    /// Whether every link of the source's route got its channels.
    pub served: Vec<bool>,
    /// Success probability of each source's route if served.
    pub success: Vec<f64>,
    /// Mean over sources of `served * success`.
    pub efficiency: f64,
}

/// Greedy link-by-link channel assignment on fixed routes.
///
/// Every source uses only its priority-one route, with no fallback relay
/// and no PU-return backup. A link is worth its route's success
/// probability `(p * p_b * p_free)^hops`, the chance the route chain
/// follows exactly that path. Links are visited from
/// the most valuable down (source index, then hop order, breaks ties) and
/// each takes `b` of the `c - n` channels of its transmitting subcell if
/// that many are left. A source reaches its destination only if all of
/// its links were served.
pub fn greedy_baseline(
    grid: &Grid,
    topology: &RouteTopology,
    stats: &ChannelStats,
    p: f64,
    b: u32,
) -> Result<GreedyOutcome, ExperimentError> {
    let gain = stats.p_b(b)? * stats.p_free();
    let sources: Vec<usize> = grid
        .sources()
        .filter(|&m| !topology.destinations().contains(m))
        .collect();
    let routes: Vec<Option<Vec<usize>>> = sources
        .iter()
        .map(|&m| single_route(grid, topology, m))
        .collect();
    let success: Vec<f64> = routes
        .iter()
        .map(|r| match r {
            Some(path) => (gain * p).powi(path.len() as i32),
            None => 0.0,
        })
        .collect();
    let mut order: Vec<usize> = (0..sources.len()).filter(|&i| routes[i].is_some()).collect();
    order.sort_by(|&a, &c| success[c].total_cmp(&success[a]).then(a.cmp(&c)));
    let mut budget = vec![stats.max_demand(); grid.cells().len()];
    let mut links_served = vec![0usize; sources.len()];
    for &i in &order {
        for &tx in routes[i].as_ref().expect("filtered above") {
            if budget[tx] >= b {
                budget[tx] -= b;
                links_served[i] += 1;
            }
        }
    }
    let served: Vec<bool> = (0..sources.len())
        .map(|i| routes[i].as_ref().is_some_and(|r| links_served[i] == r.len()))
        .collect();
    let efficiency = if sources.is_empty() {
        0.0
    } else {
        served
            .iter()
            .zip(&success)
            .map(|(&s, &v)| if s { v } else { 0.0 })
            .sum::<f64>()
            / sources.len() as f64
    };
    Ok(GreedyOutcome {
        sources,
        served,
        success,
        efficiency,
    })
}

/// Efficiency of both schemes for one network size and demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyRow {
    pub rings: u32,
    pub b: u32,
    /// Mean `p_D` of the multi-route chain.
    pub jbit: f64,
    pub greedy: f64,
}

/// Both efficiencies at `route.p` for `rings` and every `b`, averaged over
/// `run.repetitions` destination draws.
pub fn efficiency_comparison(
    cfg: &ScenarioConfig,
    rings: &[u32],
) -> Result<Vec<EfficiencyRow>, ExperimentError> {
    let stats = cfg.channel_stats()?;
    let max_b = stats.max_demand();
    let mut rows = Vec::new();
    for &h in rings {
        let grid = Grid::build(h, cfg.grid.subcell_radius, cfg.grid.reuse)?;
        let per_rep = (0..cfg.run.repetitions)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(repetition_seed(cfg.run.seed, r));
                let dest = draw_destinations(&grid, cfg.route.destination_density, &mut rng)?;
                let topo = RouteTopology::new(&grid, &dest)?;
                (1..=max_b)
                    .map(|b| {
                        let jbit = topo.model(cfg.route.p, b, &stats)?.mean_access().p_d;
                        let greedy = greedy_baseline(&grid, &topo, &stats, cfg.route.p, b)?;
                        Ok((jbit, greedy.efficiency))
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = per_rep.len() as f64;
        for b in 1..=max_b {
            let i = b as usize - 1;
            rows.push(EfficiencyRow {
                rings: h,
                b,
                jbit: per_rep.iter().map(|r| r[i].0).sum::<f64>() / n,
                greedy: per_rep.iter().map(|r| r[i].1).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}
