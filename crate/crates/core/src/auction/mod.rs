//! Iterative spectrum auctions run by the primary operator.
//!
//! All three schemes share the bidder model of [`crate::bidding`]: bidders
//! open with `(beta_0, theta_0)`, then answer every posted price by revising
//! their strategy and re-optimizing their demand.

mod dgroup;
mod ijbit;
mod replay;
mod sgroup;

pub use dgroup::{expected_bidders, poisson_arrivals, price_curve, run_dgroup, Arrival, DgroupRun};
pub use ijbit::run_ijbit;
pub use replay::{FinalRound, ReplayBidder, Settlement};
pub use sgroup::{partition_static, run_sgroup, run_sgroup_fixed, GroupBid, SgroupReport};

use std::fmt;

use thiserror::Error;

use crate::bidding::{
    optimize_demand, BiddingError, Response, ResponseConfig, RouteAtlas, SearchConfig, Strategy,
    ValuationContext,
};
use crate::channel::ChannelStats;
use crate::hexgrid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("at least two bidders are needed to price the winners, got {0}")]
    TooFewBidders(usize),
    #[error("invalid auction configuration: {0}")]
    Config(String),
    #[error("bidder {0} has no source subcell")]
    NoSubcell(usize),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
}

/// A source subcell and its QoS bound in slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bidder {
    pub cell: usize,
    pub tau_max: f64,
}

/// Everything bidders need to value resources.
#[derive(Debug, Clone, Copy)]
pub struct Market<'a> {
    pub grid: &'a Grid,
    pub atlas: &'a RouteAtlas,
    pub ctx: &'a ValuationContext,
    pub stats: &'a ChannelStats,
}

/// How the static-group scheme picks the number of winning groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupRule {
    /// The `S` with the highest operator revenue.
    RevenueArgmax,
    /// The largest `S` for which every member of every winning group meets
    /// `S * tau_m <= min tau_max` of its group.
    LargestFeasible,
}

/// Whether dgroup winners pay the price seen on arrival or the closing price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgroupPayment {
    Arrival,
    Final,
}

/// Estimate of the chance that an arrival accepts the posted price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceptance {
    /// Running fraction of accepting arrivals so far (1 before any arrival).
    Online,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgroupConfig {
    /// Auction window end `T`; arrivals fall in `[1, T]`.
    pub duration: f64,
    /// SU arrival rate per unit time.
    pub arrival_rate: f64,
    /// Price at `t = 1`.
    pub initial_price: f64,
    pub acceptance: Acceptance,
    pub payment: DgroupPayment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionConfig {
    /// Price step `delta`.
    pub delta: f64,
    /// Stop once the tentative price moves by less than this.
    pub epsilon: f64,
    /// Iteration cap `T`.
    pub iterations: usize,
    /// Potential winners `M` per round.
    pub winners: usize,
    pub beta_init: f64,
    pub theta_init: f64,
    pub penalty_scale: f64,
    pub max_revisions: usize,
    pub group_rule: GroupRule,
    pub dgroup: DgroupConfig,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            epsilon: 1e-4,
            iterations: 25,
            winners: 20,
            beta_init: 0.05,
            theta_init: 0.05,
            penalty_scale: 10.0,
            max_revisions: 20,
            group_rule: GroupRule::RevenueArgmax,
            dgroup: DgroupConfig {
                duration: 3.0,
                arrival_rate: 30.0,
                initial_price: 1.0,
                acceptance: Acceptance::Online,
                payment: DgroupPayment::Final,
            },
        }
    }
}

impl AuctionConfig {
    pub fn validate(&self) -> Result<(), AuctionError> {
        let bad = |m: &str| Err(AuctionError::Config(m.to_string()));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be nonnegative");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.winners == 0 {
            return bad("winners must be at least 1");
        }
        Strategy::new(self.beta_init, self.theta_init)?;
        if !(self.penalty_scale > 0.0) {
            return bad("penalty_scale must be positive");
        }
        let d = &self.dgroup;
        if !(d.duration > 1.0 && d.duration.is_finite()) {
            return bad("dgroup duration must exceed 1");
        }
        if !(d.arrival_rate >= 0.0 && d.initial_price >= 0.0) {
            return bad("dgroup rate and initial price must be nonnegative");
        }
        if let Acceptance::Fixed(p) = d.acceptance {
            if !(0.0..=1.0).contains(&p) {
                return bad("dgroup acceptance must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn response(&self, schedule: u32) -> ResponseConfig {
        ResponseConfig {
            search: SearchConfig {
                schedule,
                penalty_scale: self.penalty_scale,
            },
            max_revisions: self.max_revisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ijbit,
    Sgroup,
    Dgroup,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ijbit => "ijbit",
            Scheme::Sgroup => "sgroup",
            Scheme::Dgroup => "dgroup",
        })
    }
}

/// Why an iterative auction stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The tentative price moved by less than `epsilon`.
    Converged,
    /// The iteration cap `T` was reached.
    IterationCap,
    /// Arrival window closed (dgroup).
    WindowClosed,
    /// No bidder was left with a positive bid.
    NoBids,
}

/// One bidder's state in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub bidder: usize,
    pub bid: f64,
    pub tip: f64,
    pub b_star: u32,
    pub p_star: f64,
    pub price_c: f64,
    pub price_q: f64,
    /// `V - bid - tip` at the submitted bid.
    pub utility: f64,
    /// Would win if the auction closed after this round.
    pub winner: bool,
    /// Charge if it closed now; 0 for non-winners.
    pub payment: f64,
}

#[derive(Debug, Clone)]
pub struct AuctionOutcome {
    pub scheme: Scheme,
    /// Winning bidder indices, ascending.
    pub winners: Vec<usize>,
    /// Payment per bidder; 0 for losers.
    pub payments: Vec<f64>,
    /// Final responses per bidder.
    pub responses: Vec<Response>,
    pub revenue: f64,
    pub clearing_price: f64,
    /// Winning groups `S` for the static-group scheme.
    pub groups: Option<u32>,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub rounds: usize,
    pub final_round: FinalRound,
}

impl AuctionOutcome {
    pub fn winner_count(&self) -> usize {
        self.winners.len()
    }

    /// Realized utility `V - tip - payment` for winners, 0 otherwise.
    pub fn realized_utility(&self, m: usize) -> f64 {
        if self.winners.binary_search(&m).is_ok() {
            let r = &self.responses[m];
            r.optimum.value - r.tip - self.payments[m]
        } else {
            0.0
        }
    }
}

fn check_bidders(bidders: &[Bidder], market: &Market) -> Result<(), AuctionError> {
    if bidders.len() < 2 {
        return Err(AuctionError::TooFewBidders(bidders.len()));
    }
    for (i, b) in bidders.iter().enumerate() {
        if !market.atlas.is_source(b.cell) || b.cell == 0 {
            return Err(AuctionError::NoSubcell(i));
        }
    }
    Ok(())
}

/// Opening responses at `(beta_0, theta_0)` under delay schedule `schedule`.
fn opening(
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
    schedule: u32,
) -> Result<Vec<Response>, AuctionError> {
    let s0 = Strategy::new(cfg.beta_init, cfg.theta_init)?;
    let search = cfg.response(schedule).search;
    bidders
        .iter()
        .map(|b| {
            let opt = optimize_demand(s0, b.cell, b.tau_max, market.atlas, market.ctx, search)?;
            Ok(Response::from_strategy(s0, opt))
        })
        .collect()
}

/// Indices sorted by value descending, then index ascending.
fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn trace_row(t: usize, m: usize, r: &Response, price_c: f64, price_q: f64) -> TraceRow {
    TraceRow {
        t,
        bidder: m,
        bid: r.bid,
        tip: r.tip,
        b_star: r.optimum.b,
        p_star: r.optimum.p,
        price_c,
        price_q,
        utility: r.optimum.value - r.bid - r.tip,
        winner: false,
        payment: 0.0,
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::capacity::RadioConfig;
    use crate::channel::ReturnModel;
    use crate::hexgrid::DestinationSet;
    use crate::routing::RouteTopology;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub struct Env {
        pub grid: Grid,
        pub stats: ChannelStats,
        pub dest: DestinationSet,
        pub atlas: RouteAtlas,
        pub ctx: ValuationContext,
    }

    impl Env {
        pub fn new(rings: u32, extra_dest: &[usize]) -> Self {
            let grid = Grid::build(rings, 126.0, 7).unwrap();
            let stats = ChannelStats::new(10, 1, 2.0, ReturnModel::Fixed(0.1)).unwrap();
            let dest =
                DestinationSet::new(&grid, std::iter::once(0).chain(extra_dest.iter().copied()))
                    .unwrap();
            let topo = RouteTopology::new(&grid, &dest).unwrap();
            let atlas = RouteAtlas::build(&topo, &stats, 0.05).unwrap();
            let ctx =
                ValuationContext::new(&grid, &RadioConfig::default(), &stats, 5000.0).unwrap();
            Self {
                grid,
                stats,
                dest,
                atlas,
                ctx,
            }
        }

        pub fn market(&self) -> Market<'_> {
            Market {
                grid: &self.grid,
                atlas: &self.atlas,
                ctx: &self.ctx,
                stats: &self.stats,
            }
        }

        pub fn bidders(&self, spec: &[(usize, f64)]) -> Vec<Bidder> {
            spec.iter()
                .map(|&(cell, tau_max)| Bidder { cell, tau_max })
                .collect()
        }

        pub fn random_bidders(&self, lo: f64, hi: f64, seed: u64) -> Vec<Bidder> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            self.grid
                .sources()
                .filter(|&m| !self.dest.contains(m))
                .map(|cell| Bidder {
                    cell,
                    tau_max: rng.random_range(lo..=hi),
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_desc(&[1.0, 3.0, 3.0, 2.0]), vec![1, 2, 3, 0]);
    }

    #[test]
    fn config_validation() {
        assert!(AuctionConfig::default().validate().is_ok());
        let bad = AuctionConfig {
            delta: 0.0,
            ..AuctionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AuctionConfig {
            theta_init: 2.0,
            ..AuctionConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
