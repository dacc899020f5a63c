//! Monte Carlo repetitions of one scenario.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ScenarioConfig, SchemeName};
use super::ExperimentError;
use crate::auction::{
    expected_bidders, poisson_arrivals, run_dgroup, run_ijbit, run_sgroup, run_sgroup_fixed,
    Arrival, AuctionConfig, AuctionOutcome, Bidder, Market,
};
use crate::bidding::{RouteAtlas, ValuationContext};
use crate::capacity::RadioConfig;
use crate::channel::ChannelStats;
use crate::hexgrid::{DestinationSet, Grid};
use crate::learning::{run_rl_auction, RlRun};
use crate::routing::{Access, RouteTopology};

/// Seed of repetition `rep` under root seed `root`.
pub fn repetition_seed(root: u64, rep: usize) -> u64 {
    root.wrapping_add(rep as u64)
}

/// Parts of a scenario that do not change between repetitions.
#[derive(Debug, Clone)]
pub struct Network {
    pub grid: Grid,
    pub stats: ChannelStats,
    pub radio: RadioConfig,
    pub ctx: ValuationContext,
}

impl Network {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, ExperimentError> {
        Self::with_rings(cfg, cfg.grid.rings)
    }

    /// As [`Network::build`] with the ring count overridden.
    pub fn with_rings(cfg: &ScenarioConfig, rings: u32) -> Result<Self, ExperimentError> {
        let grid = Grid::build(rings, cfg.grid.subcell_radius, cfg.grid.reuse)?;
        let stats = cfg.channel_stats()?;
        let radio = cfg.radio()?;
        let ctx = ValuationContext::new(&grid, &radio, &stats, cfg.auction.value_scale)?;
        Ok(Self {
            grid,
            stats,
            radio,
            ctx,
        })
    }
}

/// The base station plus `round(density * N)` distinct source subcells.
pub fn draw_destinations<R: Rng + ?Sized>(
    grid: &Grid,
    density: f64,
    rng: &mut R,
) -> Result<DestinationSet, ExperimentError> {
    let mut sources: Vec<usize> = grid.sources().collect();
    let k = ((density * sources.len() as f64).round() as usize).min(sources.len());
    sources.shuffle(rng);
    Ok(DestinationSet::new(
        grid,
        std::iter::once(0).chain(sources[..k].iter().copied()),
    )?)
}

/// Random draws of one repetition.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub dest: DestinationSet,
    pub topology: RouteTopology,
    pub atlas: RouteAtlas,
    /// Every source that is not a destination, in grid order.
    pub bidders: Vec<Bidder>,
    /// Arrival stream for the dynamic-group scheme.
    pub arrivals: Vec<Arrival>,
}

/// Draw destinations, then QoS bounds in bidder order, then arrivals.
pub fn draw_instance(
    net: &Network,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<Instance, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dest = draw_destinations(&net.grid, cfg.route.destination_density, &mut rng)?;
    let topology = RouteTopology::new(&net.grid, &dest)?;
    let atlas = RouteAtlas::build(&topology, &net.stats, cfg.route.p_step)?;
    let (lo, hi) = (cfg.qos.tau_min, cfg.qos.tau_max);
    let bidders: Vec<Bidder> = net
        .grid
        .sources()
        .filter(|&m| !dest.contains(m))
        .map(|cell| Bidder {
            cell,
            tau_max: if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            },
        })
        .collect();
    let arrivals = poisson_arrivals(
        bidders.len(),
        cfg.dgroup.arrival_rate,
        cfg.dgroup.duration,
        &mut rng,
    );
    Ok(Instance {
        seed,
        dest,
        topology,
        atlas,
        bidders,
        arrivals,
    })
}

/// Result of one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub seed: u64,
    pub outcome: AuctionOutcome,
    /// Source subcell of each bidder.
    pub cells: Vec<usize>,
    /// Route figures at the configured operating point.
    pub route: Access,
    /// Opening price of the dynamic-group scheme, when it ran.
    pub dgroup_initial_price: Option<f64>,
}

impl RepetitionResult {
    /// Mean realized utility over all bidders.
    pub fn mean_utility(&self) -> f64 {
        let n = self.cells.len();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|m| self.outcome.realized_utility(m)).sum::<f64>() / n as f64
    }
}

/// Opening price making the closing price per channel equal
/// `price_fraction` times the i-JBiT clearing price per winning channel.
fn calibrated_initial_price(
    cfg: &ScenarioConfig,
    bidders: &[Bidder],
    market: &Market,
    acfg: &AuctionConfig,
) -> Result<f64, ExperimentError> {
    if let Some(p) = cfg.dgroup.initial_price {
        return Ok(p);
    }
    let reference = run_ijbit(bidders, market, acfg)?;
    let won = reference.winner_count();
    let mean_b = if won == 0 {
        1.0
    } else {
        reference
            .winners
            .iter()
            .map(|&m| reference.responses[m].optimum.b as f64)
            .sum::<f64>()
            / won as f64
    };
    let per_channel = reference.clearing_price / mean_b;
    let d = &cfg.dgroup;
    let n_ref = expected_bidders(d.duration, d.arrival_rate, bidders.len() as u64).max(1.0);
    let k = market.grid.reuse() as f64;
    let p_free = market.stats.p_free();
    if p_free <= 0.0 {
        return Ok(0.0);
    }
    Ok(d.price_fraction * per_channel * n_ref * d.duration.exp() / (k * p_free))
}

/// Draw one instance and run the configured scheme on it.
pub fn run_repetition(
    net: &Network,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<RepetitionResult, ExperimentError> {
    let inst = draw_instance(net, cfg, seed)?;
    let market = Market {
        grid: &net.grid,
        atlas: &inst.atlas,
        ctx: &net.ctx,
        stats: &net.stats,
    };
    let mut acfg = cfg.auction_config(0.0);
    let mut dgroup_initial_price = None;
    let outcome = match cfg.auction.scheme {
        SchemeName::Ijbit => run_ijbit(&inst.bidders, &market, &acfg)?,
        SchemeName::Sgroup => match cfg.auction.groups {
            Some(s) => run_sgroup_fixed(&inst.bidders, &market, &acfg, s)?,
            None => {
                let report = run_sgroup(&inst.bidders, &market, &acfg)?;
                // No feasible S under the largest-feasible rule: report the
                // tightest schedule.
                let s = report.chosen.unwrap_or(1);
                report.per_s[s as usize - 1].clone()
            }
        },
        SchemeName::Dgroup => {
            let p0 = calibrated_initial_price(cfg, &inst.bidders, &market, &acfg)?;
            acfg.dgroup.initial_price = p0;
            dgroup_initial_price = Some(p0);
            run_dgroup(&inst.arrivals, &inst.bidders, &market, &acfg)?.outcome
        }
    };
    let route = inst
        .topology
        .model(cfg.route.p, cfg.route.b, &net.stats)?
        .mean_access();
    Ok(RepetitionResult {
        seed,
        outcome,
        cells: inst.bidders.iter().map(|b| b.cell).collect(),
        route,
        dgroup_initial_price,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scheme: SchemeName,
    /// One entry per repetition, in repetition order.
    pub reps: Vec<RepetitionResult>,
    pub stats: Vec<MetricSummary>,
}

/// Metric names and extractors, in output order.
fn metrics() -> [(&'static str, fn(&RepetitionResult) -> f64); 8] {
    [
        ("revenue", |r| r.outcome.revenue),
        ("winners", |r| r.outcome.winner_count() as f64),
        ("clearing_price", |r| r.outcome.clearing_price),
        ("utility", |r| r.mean_utility()),
        ("groups", |r| r.outcome.groups.map_or(f64::NAN, f64::from)),
        ("tau_mean", |r| r.route.tau),
        ("p_D", |r| r.route.p_d),
        ("p_nr", |r| r.route.p_nr),
    ]
}

/// Run every repetition in parallel and aggregate in repetition order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, ExperimentError> {
    let net = Network::build(cfg)?;
    let reps = (0..cfg.run.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(&net, cfg, repetition_seed(cfg.run.seed, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = metrics()
        .into_iter()
        .filter_map(|(metric, f)| {
            let values: Vec<f64> = reps.iter().map(f).filter(|v| !v.is_nan()).collect();
            if values.is_empty() {
                return None;
            }
            let (mean, std) = mean_std(&values);
            Some(MetricSummary { metric, mean, std })
        })
        .collect();
    Ok(ScenarioRun {
        scheme: cfg.auction.scheme,
        reps,
        stats,
    })
}

/// Averages of the route chain at one `(p, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteRow {
    pub p: f64,
    pub b: u32,
    pub tau_mean: f64,
    pub p_d: f64,
    pub p_nr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteAnalysis {
    /// Rows for every `p` of `route.p_values` and `b = 1..=c-n`, `p` major.
    pub rows: Vec<RouteRow>,
    /// Smallest and largest per-source expected hop count seen anywhere.
    pub hop_min: f64,
    pub hop_max: f64,
}

/// Expected hops and access probabilities over the configured `(p, b)`
/// grid, averaged over destination draws. Repetition `r` draws the same
/// destinations as repetition `r` of [`run_scenario`].
pub fn route_analysis(cfg: &ScenarioConfig) -> Result<RouteAnalysis, ExperimentError> {
    let grid = Grid::build(cfg.grid.rings, cfg.grid.subcell_radius, cfg.grid.reuse)?;
    let stats = cfg.channel_stats()?;
    let points: Vec<(f64, u32)> = cfg
        .route
        .p_values
        .iter()
        .flat_map(|&p| (1..=stats.max_demand()).map(move |b| (p, b)))
        .collect();
    let per_rep = (0..cfg.run.repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(repetition_seed(cfg.run.seed, r));
            let dest = draw_destinations(&grid, cfg.route.destination_density, &mut rng)?;
            let topo = RouteTopology::new(&grid, &dest)?;
            let mut access = Vec::with_capacity(points.len());
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(p, b) in &points {
                let model = topo.model(p, b, &stats)?;
                access.push(model.mean_access());
                for &m in model.transient_cells().iter().filter(|&&m| m != 0) {
                    let h = model.hops_from(m)?;
                    lo = lo.min(h);
                    hi = hi.max(h);
                }
            }
            Ok((access, lo, hi))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let n = per_rep.len() as f64;
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, &(p, b))| RouteRow {
            p,
            b,
            tau_mean: per_rep.iter().map(|r| r.0[i].tau).sum::<f64>() / n,
            p_d: per_rep.iter().map(|r| r.0[i].p_d).sum::<f64>() / n,
            p_nr: per_rep.iter().map(|r| r.0[i].p_nr).sum::<f64>() / n,
        })
        .collect();
    Ok(RouteAnalysis {
        rows,
        hop_min: per_rep.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        hop_max: per_rep.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Learning-automata run with the base station as the only destination,
/// seeded with `run.seed`.
pub fn run_rl(cfg: &ScenarioConfig) -> Result<RlRun, ExperimentError> {
    let net = Network::build(cfg)?;
    let dest = DestinationSet::base_station(&net.grid);
    let topo = RouteTopology::new(&net.grid, &dest)?;
    let atlas = RouteAtlas::build(&topo, &net.stats, cfg.route.p_step)?;
    Ok(run_rl_auction(
        &cfg.rl_scenario(),
        &net.grid,
        &atlas,
        &net.ctx,
        cfg.run.seed,
    )?)
}
