//! Static group partitioning by reuse color.
//!
//! Bidders in subcells of the same slot color form one group whose bid is
//! the sum of member bids. Only `S` groups win a frame, so each winner's
//! route is scheduled every `S` slots instead of every `K`, and members
//! split the group clearing price in proportion to their bids.

use super::ijbit::replay_bidder;
use super::{
    check_bidders, opening, rank_desc, run_ijbit, trace_row, AuctionConfig, AuctionError,
    AuctionOutcome, Bidder, FinalRound, GroupRule, Market, Scheme, Settlement, StopReason,
};
use crate::bidding::respond;
use crate::hexgrid::Grid;

/// Pooled bid of one color class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBid {
    /// Zero-based group index (slot color minus one).
    pub group: usize,
    pub members: Vec<usize>,
    pub bids: Vec<f64>,
    /// Sum of member bids.
    pub pool: f64,
    /// Tightest member QoS bound; infinite for an empty group.
    pub tau_max: f64,
}

/// Split bidders into `K` groups by the color of their subcell.
pub fn partition_static(
    grid: &Grid,
    bidders: &[Bidder],
    bids: &[f64],
) -> Result<Vec<GroupBid>, AuctionError> {
    let k = grid.reuse() as usize;
    let mut groups: Vec<GroupBid> = (0..k)
        .map(|g| GroupBid {
            group: g,
            members: Vec::new(),
            bids: Vec::new(),
            pool: 0.0,
            tau_max: f64::INFINITY,
        })
        .collect();
    for (m, b) in bidders.iter().enumerate() {
        let cell = grid.cell(b.cell).map_err(|_| AuctionError::NoSubcell(m))?;
        let g = &mut groups[cell.color as usize - 1];
        g.members.push(m);
        g.bids.push(bids[m]);
        g.pool += bids[m];
        g.tau_max = g.tau_max.min(b.tau_max);
    }
    Ok(groups)
}

/// One run per candidate `S` plus the selected one.
#[derive(Debug, Clone)]
pub struct SgroupReport {
    /// Outcome for `S = 1..=K`, indexed by `S - 1`.
    pub per_s: Vec<AuctionOutcome>,
    /// Selected `S`, or `None` when no candidate is feasible.
    pub chosen: Option<u32>,
}

impl SgroupReport {
    pub fn outcome(&self) -> Option<&AuctionOutcome> {
        self.chosen.map(|s| &self.per_s[s as usize - 1])
    }
}

/// Run every `S` and pick one by the configured rule.
pub fn run_sgroup(
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
) -> Result<SgroupReport, AuctionError> {
    let k = market.grid.reuse();
    let per_s = (1..=k)
        .map(|s| run_sgroup_fixed(bidders, market, cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = match cfg.group_rule {
        GroupRule::RevenueArgmax => {
            let mut best: Option<(u32, f64)> = None;
            for (i, o) in per_s.iter().enumerate() {
                if best.is_none_or(|(_, r)| o.revenue > r) {
                    best = Some((i as u32 + 1, o.revenue));
                }
            }
            best.map(|(s, _)| s)
        }
        GroupRule::LargestFeasible => (1..=k)
            .rev()
            .find(|&s| group_feasible(market.grid, bidders, &per_s[s as usize - 1], s)),
    };
    Ok(SgroupReport { per_s, chosen })
}

/// Every winner meets `S * tau_m <= min tau_max` over its whole group.
fn group_feasible(grid: &Grid, bidders: &[Bidder], out: &AuctionOutcome, s: u32) -> bool {
    if out.winners.is_empty() {
        return false;
    }
    let bids: Vec<f64> = out.responses.iter().map(|r| r.bid).collect();
    let Ok(groups) = partition_static(grid, bidders, &bids) else {
        return false;
    };
    out.winners.iter().all(|&m| {
        let color = grid.cells()[bidders[m].cell].color as usize - 1;
        s as f64 * out.responses[m].optimum.tau <= groups[color].tau_max
    })
}

/// Static-group auction with exactly `s` winning groups. `s = K` means no
/// grouping and runs plain i-JBiT.
pub fn run_sgroup_fixed(
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
    s: u32,
) -> Result<AuctionOutcome, AuctionError> {
    cfg.validate()?;
    check_bidders(bidders, market)?;
    let k = market.grid.reuse();
    if s == 0 || s > k {
        return Err(AuctionError::Config(format!("S = {s} outside 1..={k}")));
    }
    if s == k {
        let mut out = run_ijbit(bidders, market, cfg)?;
        out.scheme = Scheme::Sgroup;
        out.groups = Some(k);
        return Ok(out);
    }
    let slots = s as usize;
    let n = bidders.len();
    let rcfg = cfg.response(s);
    let mut responses = opening(bidders, market, cfg, s)?;
    let mut always_lost = vec![true; k as usize];
    let mut max_loser = 0.0f64;
    let mut price_c = 0.0f64;
    let mut price_q = 0.0f64;
    let mut trace = Vec::with_capacity(n * cfg.iterations);
    let mut stop = StopReason::IterationCap;
    let mut rounds = 0;
    let mut groups = Vec::new();
    let mut order = Vec::new();

    for t in 1..=cfg.iterations {
        rounds = t;
        let bids: Vec<f64> = responses.iter().map(|r| r.bid).collect();
        groups = partition_static(market.grid, bidders, &bids)?;
        let pools: Vec<f64> = groups.iter().map(|g| g.pool).collect();
        order = rank_desc(&pools);
        let mut tentative = vec![false; groups.len()];
        for &g in order.iter().take(slots) {
            tentative[g] = pools[g] > 0.0;
        }
        for g in 0..groups.len() {
            always_lost[g] &= !tentative[g];
        }
        if t == 1 {
            max_loser = order.get(slots).map_or(0.0, |&g| pools[g]);
        } else {
            for g in 0..groups.len() {
                if always_lost[g] {
                    max_loser = max_loser.max(pools[g]);
                }
            }
        }
        price_q = max_loser;
        let winning = winning_groups(&order, &pools, slots, price_q);
        for (m, r) in responses.iter().enumerate() {
            let g = group_of(market.grid, &bidders[m]);
            let mut row = trace_row(t, m, r, price_c, price_q);
            if winning[g] && r.bid > 0.0 {
                row.winner = true;
                row.payment = r.bid / pools[g] * price_q;
            }
            trace.push(row);
        }
        if bids.iter().all(|&b| !(b > 0.0)) {
            stop = StopReason::NoBids;
            break;
        }
        let next = price_q + cfg.delta * t as f64;
        if t >= 2 && (next - price_c).abs() < cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
        if t == cfg.iterations {
            break;
        }
        price_c = next;
        for (m, b) in bidders.iter().enumerate() {
            let g = group_of(market.grid, b);
            let share = if pools[g] > 0.0 {
                responses[m].bid / pools[g]
            } else {
                0.0
            };
            responses[m] = respond(
                share * price_c,
                &responses[m],
                b.cell,
                b.tau_max,
                market.atlas,
                market.ctx,
                rcfg,
            )?;
        }
    }

    let pools: Vec<f64> = groups.iter().map(|g| g.pool).collect();
    let winning = winning_groups(&order, &pools, slots, price_q);
    let mut winners = Vec::new();
    let mut payments = vec![0.0; n];
    for (m, b) in bidders.iter().enumerate() {
        let g = group_of(market.grid, b);
        let bid = responses[m].bid;
        if winning[g] && bid > 0.0 {
            winners.push(m);
            payments[m] = bid / pools[g] * price_q;
        }
    }
    let revenue = payments.iter().sum();
    let final_round = FinalRound {
        settlement: Settlement::Group {
            price: price_q,
            slots,
            membership: bidders.iter().map(|b| group_of(market.grid, b)).collect(),
            pools,
        },
        bidders: responses.iter().map(replay_bidder).collect(),
    };
    Ok(AuctionOutcome {
        scheme: Scheme::Sgroup,
        winners,
        payments,
        responses,
        revenue,
        clearing_price: price_q,
        groups: Some(s),
        trace,
        stop,
        rounds,
        final_round,
    })
}

fn group_of(grid: &Grid, b: &Bidder) -> usize {
    grid.cells()[b.cell].color as usize - 1
}

fn winning_groups(order: &[usize], pools: &[f64], slots: usize, price: f64) -> Vec<bool> {
    let mut w = vec![false; pools.len()];
    for &g in order.iter().take(slots) {
        w[g] = pools[g] > 0.0 && pools[g] >= price;
    }
    w
}
