//! Bidder-side strategy engine.
//!
//! A source values `b` channels at relay availability `p` as
//! `V = (1/tau_max) * p_D * (c_R/b) / (K tau * P tau)`, bids `beta * b * V`,
//! tips `theta * tau * V` and picks `(b, p)` by exhaustive search of
//! `U = V - bid - tip` under the delay bound `schedule * tau <= tau_max`.

use rayon::prelude::*;
use thiserror::Error;

use crate::capacity::{symmetric_route_capacity, CapacityError, RadioConfig};
use crate::channel::ChannelStats;
use crate::hexgrid::Grid;
use crate::routing::{RouteError, RouteTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiddingError {
    #[error("p-grid step must lie in (0, 1], got {0}")]
    BadStep(f64),
    #[error("strategy out of range: beta {beta}, theta {theta}")]
    BadStrategy { beta: f64, theta: f64 },
    #[error("bidder values the resources at zero and drops out")]
    DropOut,
    #[error("cell {0} is not a source in this route atlas")]
    NotSource(usize),
    #[error("channel demand {0} is outside the available range")]
    BadDemand(u32),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// `(beta, theta)`: valuation fraction offered per channel and per hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub beta: f64,
    pub theta: f64,
}

impl Strategy {
    pub fn new(beta: f64, theta: f64) -> Result<Self, BiddingError> {
        if beta >= 0.0 && beta.is_finite() && (0.0..=1.0).contains(&theta) {
            Ok(Self { beta, theta })
        } else {
            Err(BiddingError::BadStrategy { beta, theta })
        }
    }
}

/// Requested resources `gamma = {b, tau_max, P}` plus the chosen `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub b: u32,
    pub p: f64,
    pub tau_max: f64,
    pub power: f64,
}

/// Bid submitted to the operator for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundBid {
    pub demand: Demand,
    pub source: usize,
    pub bid: f64,
    pub tip: f64,
    /// Private valuation weight `1 / tau_max`.
    pub alpha: f64,
}

/// Quantities shared by every bidder's valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationContext {
    pub reuse: u32,
    pub power: f64,
    /// Currency units per unit of raw valuation. Scaling all values leaves
    /// every bidder's argmax unchanged.
    pub value_scale: f64,
    /// `c_R / b` for `b = 1..=c-n`.
    pub per_channel: Vec<f64>,
}

impl ValuationContext {
    pub fn new(
        grid: &Grid,
        radio: &RadioConfig,
        stats: &ChannelStats,
        value_scale: f64,
    ) -> Result<Self, BiddingError> {
        let per_channel = (1..=stats.max_demand())
            .map(|b| symmetric_route_capacity(grid, radio, b).map(|c| c.per_channel))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            reuse: grid.reuse(),
            power: radio.power,
            value_scale,
            per_channel,
        })
    }

    pub fn max_demand(&self) -> u32 {
        self.per_channel.len() as u32
    }
}

/// Outcome of Eq. (7); `reachable` is false when `tau` is not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Valuation {
    pub value: f64,
    pub reachable: bool,
}

pub fn valuation(
    tau_max: f64,
    p_d: f64,
    tau: f64,
    b: u32,
    ctx: &ValuationContext,
) -> Valuation {
    if !(tau.is_finite() && tau > 0.0) {
        return Valuation {
            value: 0.0,
            reachable: false,
        };
    }
    let capacity = p_d * ctx.per_channel[b as usize - 1];
    let delay = ctx.reuse as f64 * tau;
    let energy = ctx.power * tau;
    Valuation {
        value: ctx.value_scale * capacity / (tau_max * delay * energy),
        reachable: true,
    }
}

pub fn bid_amount(beta: f64, b: u32, value: f64) -> f64 {
    beta * b as f64 * value
}

pub fn tip_amount(theta: f64, tau: f64, value: f64) -> f64 {
    theta * tau * value
}

/// Route figures `(tau_m, p_D,m)` for every source over the `(b, p)` grid,
/// one Markov solve per grid point.
#[derive(Debug, Clone)]
pub struct RouteAtlas {
    p_grid: Vec<f64>,
    max_b: u32,
    cells: usize,
    /// cell index -> position in the transient list
    slot: Vec<Option<usize>>,
    width: usize,
    tau: Vec<f64>,
    p_d: Vec<f64>,
}

/// `step, 2 step, ..., 1` (the last point is clamped to exactly 1).
pub fn p_grid(step: f64) -> Result<Vec<f64>, BiddingError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(BiddingError::BadStep(step));
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    Ok((1..=n).map(|i| (i as f64 / n as f64).min(1.0)).collect())
}

impl RouteAtlas {
    pub fn build(
        topology: &RouteTopology,
        stats: &ChannelStats,
        p_step: f64,
    ) -> Result<Self, BiddingError> {
        let p_grid = p_grid(p_step)?;
        let max_b = stats.max_demand();
        let transient = topology.transient_cells();
        let width = transient.len();
        let points: Vec<(u32, usize)> = (1..=max_b)
            .flat_map(|b| (0..p_grid.len()).map(move |i| (b, i)))
            .collect();
        let solved = points
            .par_iter()
            .map(|&(b, i)| {
                let m = topology.model(p_grid[i], b, stats)?;
                let pd: Vec<f64> = (0..width).map(|s| m.absorption().get(s, 0)).collect();
                Ok((m.expected_hops().to_vec(), pd))
            })
            .collect::<Result<Vec<_>, RouteError>>()?;
        let mut tau = Vec::with_capacity(points.len() * width);
        let mut p_d = Vec::with_capacity(points.len() * width);
        for (t, d) in solved {
            tau.extend(t);
            p_d.extend(d);
        }
        let cells = transient.iter().max().map_or(0, |&m| m + 1);
        let mut slot = vec![None; cells];
        for (s, &m) in transient.iter().enumerate() {
            slot[m] = Some(s);
        }
        Ok(Self {
            p_grid,
            max_b,
            cells,
            slot,
            width,
            tau,
            p_d,
        })
    }

    pub fn p_grid(&self) -> &[f64] {
        &self.p_grid
    }

    pub fn max_b(&self) -> u32 {
        self.max_b
    }

    pub fn is_source(&self, cell: usize) -> bool {
        cell < self.cells && self.slot[cell].is_some()
    }

    fn offset(&self, b: u32, pi: usize, cell: usize) -> usize {
        let s = self.slot[cell].expect("checked source");
        ((b as usize - 1) * self.p_grid.len() + pi) * self.width + s
    }

    /// `(tau, p_D)` for `cell` at demand `b` and grid point `pi`.
    pub fn point(&self, b: u32, pi: usize, cell: usize) -> (f64, f64) {
        let o = self.offset(b, pi, cell);
        (self.tau[o], self.p_d[o])
    }
}

/// Exhaustive-search settings for Eq. (10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Slots per frame in the delay bound: `K` normally, `S` under grouping.
    pub schedule: u32,
    /// Penalty weight as a multiple of the largest valuation on the grid.
    pub penalty_scale: f64,
}

/// The optimizer's chosen cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub b: u32,
    pub p: f64,
    pub p_index: usize,
    pub tau: f64,
    pub p_d: f64,
    pub value: f64,
    /// `V - bid - tip` at the chosen cell; 0 when infeasible.
    pub utility: f64,
    pub feasible: bool,
}

/// Maximize `V - bid - tip` over the atlas grid for one source.
///
/// Delay-violating cells carry a penalty of
/// `penalty_scale * max V * (schedule * tau - tau_max)` and never beat a
/// feasible cell. Ties prefer smaller `b`, then larger `p`.
pub fn optimize_demand(
    strategy: Strategy,
    cell: usize,
    tau_max: f64,
    atlas: &RouteAtlas,
    ctx: &ValuationContext,
    search: SearchConfig,
) -> Result<Optimum, BiddingError> {
    let max_b = atlas.max_b.min(ctx.max_demand());
    optimize_over(strategy, cell, tau_max, atlas, ctx, search, 1..=max_b)
}

/// As [`optimize_demand`] with the channel count pinned to `b`; only `p`
/// is searched.
pub fn optimize_relaying(
    strategy: Strategy,
    b: u32,
    cell: usize,
    tau_max: f64,
    atlas: &RouteAtlas,
    ctx: &ValuationContext,
    search: SearchConfig,
) -> Result<Optimum, BiddingError> {
    if b == 0 || b > atlas.max_b.min(ctx.max_demand()) {
        return Err(BiddingError::BadDemand(b));
    }
    optimize_over(strategy, cell, tau_max, atlas, ctx, search, b..=b)
}

fn optimize_over(
    strategy: Strategy,
    cell: usize,
    tau_max: f64,
    atlas: &RouteAtlas,
    ctx: &ValuationContext,
    search: SearchConfig,
    demands: std::ops::RangeInclusive<u32>,
) -> Result<Optimum, BiddingError> {
    if !atlas.is_source(cell) {
        return Err(BiddingError::NotSource(cell));
    }
    let n = atlas.p_grid.len();
    let mut cells = Vec::with_capacity(demands.clone().count() * n);
    let mut v_max = 0.0f64;
    for b in demands {
        for pi in (0..n).rev() {
            let (tau, p_d) = atlas.point(b, pi, cell);
            let v = valuation(tau_max, p_d, tau, b, ctx).value;
            v_max = v_max.max(v);
            cells.push((b, pi, tau, p_d, v));
        }
    }
    let penalty = search.penalty_scale * v_max;
    let mut best: Option<(bool, f64, Optimum)> = None;
    for (b, pi, tau, p_d, v) in cells {
        let u = v - bid_amount(strategy.beta, b, v) - tip_amount(strategy.theta, tau, v);
        let excess = search.schedule as f64 * tau - tau_max;
        let feasible = excess <= 0.0;
        let score = if feasible { u } else { u - penalty * excess };
        let better = match &best {
            None => true,
            Some((f, s, _)) => (feasible && !f) || (feasible == *f && score > *s),
        };
        if better {
            let opt = Optimum {
                b,
                p: atlas.p_grid[pi],
                p_index: pi,
                tau,
                p_d,
                value: v,
                utility: if feasible { u } else { 0.0 },
                feasible,
            };
            best = Some((feasible, score, opt));
        }
    }
    Ok(best.expect("grid is nonempty").2)
}

/// Eqs. (11)/(12) with equality: `beta = price / (b* V)`, `theta = 1 - p*`.
pub fn revise_strategy(price: f64, previous: &Optimum) -> Result<Strategy, BiddingError> {
    let denom = previous.b as f64 * previous.value;
    if !(denom > 0.0) {
        return Err(BiddingError::DropOut);
    }
    Ok(Strategy {
        beta: price.max(0.0) / denom,
        theta: (1.0 - previous.p).clamp(0.0, 1.0),
    })
}

/// A bidder's standing after responding to a price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub strategy: Strategy,
    pub optimum: Optimum,
    pub bid: f64,
    pub tip: f64,
    /// `V - bid - tip` at the submitted bid.
    pub utility: f64,
    /// Most the bidder will pay: `V - tip`.
    pub willingness: f64,
    pub active: bool,
}

impl Response {
    pub fn inactive(strategy: Strategy, optimum: Optimum) -> Self {
        Self {
            strategy,
            optimum,
            bid: 0.0,
            tip: 0.0,
            utility: 0.0,
            willingness: 0.0,
            active: false,
        }
    }

    /// Bid and tip from a fixed strategy at the optimizer's cell.
    pub fn from_strategy(strategy: Strategy, optimum: Optimum) -> Self {
        if !optimum.feasible || !(optimum.value > 0.0) {
            return Self::inactive(strategy, optimum);
        }
        let bid = bid_amount(strategy.beta, optimum.b, optimum.value);
        let tip = tip_amount(strategy.theta, optimum.tau, optimum.value);
        Self {
            strategy,
            optimum,
            bid,
            tip,
            utility: optimum.value - bid - tip,
            willingness: optimum.value - tip,
            active: true,
        }
    }
}

/// Settings for a bidder's response to a posted price.
#[derive(Debug, Clone, Copy)]
pub struct ResponseConfig {
    pub search: SearchConfig,
    /// Cap on revise/re-optimize rounds while looking for a fixed point.
    pub max_revisions: usize,
}

/// Revise against `price` and re-optimize until the chosen cell is stable,
/// then set `beta` so the bid meets the price exactly. A bidder whose
/// willingness `V - tip` falls short bids its willingness instead.
pub fn respond(
    price: f64,
    previous: &Response,
    cell: usize,
    tau_max: f64,
    atlas: &RouteAtlas,
    ctx: &ValuationContext,
    cfg: ResponseConfig,
) -> Result<Response, BiddingError> {
    if !previous.active {
        return Ok(*previous);
    }
    let mut opt = previous.optimum;
    let mut strategy = previous.strategy;
    for _ in 0..cfg.max_revisions.max(1) {
        strategy = match revise_strategy(price, &opt) {
            Ok(s) => s,
            Err(BiddingError::DropOut) => return Ok(Response::inactive(strategy, opt)),
            Err(e) => return Err(e),
        };
        let next = optimize_demand(strategy, cell, tau_max, atlas, ctx, cfg.search)?;
        if !next.feasible || !(next.value > 0.0) {
            return Ok(Response::inactive(strategy, next));
        }
        let stable = next.b == opt.b && next.p_index == opt.p_index;
        opt = next;
        if stable {
            break;
        }
    }
    let theta = strategy.theta;
    let tip = tip_amount(theta, opt.tau, opt.value);
    let willingness = opt.value - tip;
    if !(willingness > 0.0) {
        return Ok(Response::inactive(strategy, opt));
    }
    let bid = price.max(0.0).min(willingness);
    let beta = bid / (opt.b as f64 * opt.value);
    let strategy = Strategy { beta, theta };
    let optimum = Optimum {
        utility: opt.value - bid - tip,
        ..opt
    };
    Ok(Response {
        strategy,
        optimum,
        bid,
        tip,
        utility: optimum.utility,
        willingness,
        active: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ReturnModel;
    use crate::hexgrid::DestinationSet;
    use crate::routing::RouteModel;

    struct Fixture {
        grid: Grid,
        stats: ChannelStats,
        topo: RouteTopology,
        atlas: RouteAtlas,
        ctx: ValuationContext,
    }

    fn fixture(step: f64) -> Fixture {
        let grid = Grid::build(4, 126.0, 7).unwrap();
        let stats = ChannelStats::new(10, 1, 2.0, ReturnModel::Fixed(0.1)).unwrap();
        let dest = DestinationSet::new(&grid, [0, 23, 50]).unwrap();
        let topo = RouteTopology::new(&grid, &dest).unwrap();
        let atlas = RouteAtlas::build(&topo, &stats, step).unwrap();
        let ctx = ValuationContext::new(&grid, &RadioConfig::default(), &stats, 100.0).unwrap();
        Fixture {
            grid,
            stats,
            topo,
            atlas,
            ctx,
        }
    }

    const SEARCH: SearchConfig = SearchConfig {
        schedule: 7,
        penalty_scale: 10.0,
    };

    #[test]
    fn amounts() {
        assert_eq!(bid_amount(0.0, 3, 10.0), 0.0);
        assert_eq!(bid_amount(1.0, 1, 7.5), 7.5);
        assert!((bid_amount(0.05, 3, 10.0) - 1.5).abs() < 1e-15);
        assert_eq!(tip_amount(0.0, 4.0, 10.0), 0.0);
        assert!((tip_amount(0.3, 4.0, 10.0) - 12.0).abs() < 1e-12);
        assert_eq!(tip_amount(1.0 - 1.0, 5.0, 3.0), 0.0);
    }

    #[test]
    fn valuation_shape() {
        let f = fixture(0.1);
        assert_eq!(valuation(28.0, 0.0, 2.0, 1, &f.ctx).value, 0.0);
        let a = valuation(28.0, 0.7, 2.0, 3, &f.ctx).value;
        let b = valuation(56.0, 0.7, 2.0, 3, &f.ctx).value;
        assert!((a - 2.0 * b).abs() < 1e-15 * a.abs().max(1.0));
        let lost = valuation(28.0, 0.7, f64::INFINITY, 3, &f.ctx);
        assert_eq!((lost.value, lost.reachable), (0.0, false));
    }

    #[test]
    fn valuation_recomposes_module_outputs() {
        let f = fixture(0.1);
        let dest = f.topo.destinations().clone();
        let m = RouteModel::build(&f.grid, &dest, 0.7, 3, &f.stats).unwrap();
        let cell = 40;
        let (tau, pd) = (m.hops_from(cell).unwrap(), m.p_d_from(cell).unwrap());
        let cap = symmetric_route_capacity(&f.grid, &RadioConfig::default(), 3).unwrap();
        let expect = 100.0 * (1.0 / 28.0) * (pd * cap.c_r / 3.0) / (7.0 * tau * 0.75 * tau);
        let got = valuation(28.0, pd, tau, 3, &f.ctx).value;
        assert!((got - expect).abs() <= 1e-12 * expect);
        let (at, ad) = f.atlas.point(3, 6, cell);
        assert!((at - tau).abs() < 1e-12 && (ad - pd).abs() < 1e-12);
    }

    #[test]
    fn grid_and_strategy_validation() {
        assert_eq!(p_grid(0.25).unwrap(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p_grid(0.01).unwrap().len(), 100);
        assert!(p_grid(0.0).is_err());
        assert!(Strategy::new(-0.1, 0.0).is_err());
        assert!(Strategy::new(0.1, 1.1).is_err());
    }

    #[test]
    fn huge_bound_free_strategy_maximizes_value() {
        let f = fixture(0.05);
        let s = Strategy::new(0.0, 0.0).unwrap();
        let cell = 30;
        let opt = optimize_demand(s, cell, 1e9, &f.atlas, &f.ctx, SEARCH).unwrap();
        let mut best = 0.0f64;
        for b in 1..=9 {
            for pi in 0..f.atlas.p_grid().len() {
                let (t, d) = f.atlas.point(b, pi, cell);
                best = best.max(valuation(1e9, d, t, b, &f.ctx).value);
            }
        }
        assert!(opt.feasible);
        assert_eq!(opt.value, best);
    }

    #[test]
    fn infeasible_is_flagged() {
        let f = fixture(0.1);
        let s = Strategy::new(0.05, 0.05).unwrap();
        let opt = optimize_demand(s, 45, 1.0, &f.atlas, &f.ctx, SEARCH).unwrap();
        assert!(!opt.feasible);
        assert_eq!(opt.utility, 0.0);
        assert!(optimize_demand(s, 0, 28.0, &f.atlas, &f.ctx, SEARCH).is_err());
    }

    #[test]
    fn single_feasible_cell_is_returned() {
        // Bound the delay at the smallest tau on the grid so exactly one
        // cell passes.
        let f = fixture(0.1);
        let cell = 45;
        let mut taus = Vec::new();
        for b in 1..=9 {
            for pi in 0..10 {
                taus.push((f.atlas.point(b, pi, cell).0, b, pi));
            }
        }
        taus.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(taus[0].0 < taus[1].0);
        let s = Strategy::new(0.05, 0.05).unwrap();
        let opt = optimize_demand(s, cell, 7.0 * taus[0].0, &f.atlas, &f.ctx, SEARCH).unwrap();
        assert!(opt.feasible);
        assert_eq!((opt.b, opt.p_index), (taus[0].1, taus[0].2));
    }

    #[test]
    fn revision_arithmetic() {
        let prev = Optimum {
            b: 4,
            p: 0.6,
            p_index: 5,
            tau: 2.0,
            p_d: 0.8,
            value: 10.0,
            utility: 1.0,
            feasible: true,
        };
        let s = revise_strategy(2.0, &prev).unwrap();
        assert!((s.beta - 0.05).abs() < 1e-15);
        assert!((s.theta - 0.4).abs() < 1e-15);
        assert_eq!(revise_strategy(0.0, &prev).unwrap().beta, 0.0);
        let full = Optimum { p: 1.0, ..prev };
        assert_eq!(revise_strategy(1.0, &full).unwrap().theta, 0.0);
        let zero = Optimum { value: 0.0, ..prev };
        assert_eq!(revise_strategy(1.0, &zero), Err(BiddingError::DropOut));
    }

    #[test]
    fn respond_meets_price_or_caps_at_willingness() {
        let f = fixture(0.05);
        let cfg = ResponseConfig {
            search: SEARCH,
            max_revisions: 20,
        };
        let cell = 12;
        let s0 = Strategy::new(0.05, 0.05).unwrap();
        let o0 = optimize_demand(s0, cell, 35.0, &f.atlas, &f.ctx, SEARCH).unwrap();
        let r0 = Response::from_strategy(s0, o0);
        let low = r0.bid * 1.2;
        let r1 = respond(low, &r0, cell, 35.0, &f.atlas, &f.ctx, cfg).unwrap();
        assert!(r1.active);
        assert!((r1.bid - low).abs() < 1e-12);
        assert!(
            (bid_amount(r1.strategy.beta, r1.optimum.b, r1.optimum.value) - r1.bid).abs() < 1e-12
        );
        assert!(r1.strategy.theta < 1.0);
        let high = r1.optimum.value * 100.0;
        let r2 = respond(high, &r1, cell, 35.0, &f.atlas, &f.ctx, cfg).unwrap();
        if r2.active {
            assert!(r2.bid <= r2.willingness + 1e-12);
            assert!(r2.bid < high);
            assert!(r2.utility.abs() < 1e-9);
        } else {
            assert_eq!((r2.bid, r2.utility), (0.0, 0.0));
        }
    }
}
