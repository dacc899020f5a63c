//! Iterative joint bidding and tipping.

use super::{
    check_bidders, opening, rank_desc, trace_row, AuctionConfig, AuctionError, AuctionOutcome,
    Bidder, FinalRound, Market, ReplayBidder, Scheme, Settlement, StopReason,
};
use crate::bidding::{respond, Response};

/// Run i-JBiT with the delay bound `K * tau <= tau_max`.
///
/// Each round the top `M` bids are tentative winners. The clearing price
/// is the highest bid seen from bidders that lost every round so far
/// (`bid_{M+1}` in round 1); the next tentative price adds `delta * t`.
/// Final winners bid at least the clearing price and all pay it.
pub fn run_ijbit(
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
) -> Result<AuctionOutcome, AuctionError> {
    cfg.validate()?;
    check_bidders(bidders, market)?;
    let schedule = market.grid.reuse();
    let mut responses = opening(bidders, market, cfg, schedule)?;
    run_rounds(bidders, market, cfg, schedule, &mut responses)
}

fn run_rounds(
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
    schedule: u32,
    responses: &mut [Response],
) -> Result<AuctionOutcome, AuctionError> {
    let n = bidders.len();
    let rcfg = cfg.response(schedule);
    let mut always_lost = vec![true; n];
    let mut max_loser = 0.0f64;
    let mut price_c = 0.0f64;
    let mut trace = Vec::with_capacity(n * cfg.iterations);
    let mut stop = StopReason::IterationCap;
    let mut price_q = 0.0;
    let mut rounds = 0;

    for t in 1..=cfg.iterations {
        rounds = t;
        let bids: Vec<f64> = responses.iter().map(|r| r.bid).collect();
        let order = rank_desc(&bids);
        let mut tentative = vec![false; n];
        for &m in order.iter().take(cfg.winners) {
            tentative[m] = bids[m] > 0.0;
        }
        for m in 0..n {
            always_lost[m] &= !tentative[m];
        }
        if t == 1 {
            max_loser = order.get(cfg.winners).map_or(0.0, |&m| bids[m]);
        } else {
            for m in 0..n {
                if always_lost[m] {
                    max_loser = max_loser.max(bids[m]);
                }
            }
        }
        price_q = max_loser;
        for (m, r) in responses.iter().enumerate() {
            let mut row = trace_row(t, m, r, price_c, price_q);
            if r.bid > 0.0 && r.bid >= price_q {
                row.winner = true;
                row.payment = price_q;
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
            responses[m] = respond(
                price_c,
                &responses[m],
                b.cell,
                b.tau_max,
                market.atlas,
                market.ctx,
                rcfg,
            )?;
        }
    }

    let mut winners = Vec::new();
    let mut payments = vec![0.0; n];
    for (m, r) in responses.iter().enumerate() {
        if r.bid > 0.0 && r.bid >= price_q {
            winners.push(m);
            payments[m] = price_q;
        }
    }
    let revenue = payments.iter().sum();
    let final_round = FinalRound {
        settlement: Settlement::Uniform { price: price_q },
        bidders: responses.iter().map(replay_bidder).collect(),
    };
    Ok(AuctionOutcome {
        scheme: Scheme::Ijbit,
        winners,
        payments,
        responses: responses.to_vec(),
        revenue,
        clearing_price: price_q,
        groups: None,
        trace,
        stop,
        rounds,
        final_round,
    })
}

pub(super) fn replay_bidder(r: &Response) -> ReplayBidder {
    ReplayBidder {
        base: r.optimum.b as f64 * r.optimum.value,
        net_value: if r.active { r.willingness } else { 0.0 },
        bid: r.bid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::tests_support::Env;

    #[test]
    fn static_bids_pay_highest_loser() {
        // Two bidders with hand-set opening bids and no revision rounds.
        let env = Env::new(4, &[]);
        let bidders = env.bidders(&[(1, 21.0), (2, 21.0)]);
        let cfg = AuctionConfig {
            winners: 1,
            iterations: 1,
            ..AuctionConfig::default()
        };
        let out = run_ijbit(&bidders, &env.market(), &cfg).unwrap();
        let bids: Vec<f64> = out.responses.iter().map(|r| r.bid).collect();
        let (hi, lo) = if bids[0] >= bids[1] { (0, 1) } else { (1, 0) };
        assert_eq!(out.clearing_price, bids[lo]);
        assert!(out.winners.contains(&hi));
        assert!((out.revenue - out.winners.len() as f64 * bids[lo]).abs() < 1e-15);
    }

    #[test]
    fn rejects_single_bidder() {
        let env = Env::new(2, &[]);
        let b = env.bidders(&[(3, 21.0)]);
        assert_eq!(
            run_ijbit(&b, &env.market(), &AuctionConfig::default()).unwrap_err(),
            AuctionError::TooFewBidders(1)
        );
    }

    #[test]
    fn symmetric_bidders_share_traces() {
        let env = Env::new(3, &[]);
        let bidders = env.bidders(&[(5, 28.0), (5, 28.0)]);
        let out = run_ijbit(&bidders, &env.market(), &AuctionConfig::default()).unwrap();
        let a: Vec<_> = out.trace.iter().filter(|r| r.bidder == 0).collect();
        let b: Vec<_> = out.trace.iter().filter(|r| r.bidder == 1).collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.bid - y.bid).abs() < 1e-12);
            assert!((x.tip - y.tip).abs() < 1e-12);
            assert_eq!((x.b_star, x.p_star), (y.b_star, y.p_star));
        }
    }

    #[test]
    fn outcome_accounting() {
        let env = Env::new(4, &[17, 44]);
        let bidders = env.random_bidders(7.0, 49.0, 3);
        let out = run_ijbit(&bidders, &env.market(), &AuctionConfig::default()).unwrap();
        let total: f64 = out.winners.iter().map(|&m| out.payments[m]).sum();
        assert!((out.revenue - total).abs() < 1e-12);
        for &m in &out.winners {
            assert!(out.payments[m] <= out.responses[m].bid);
        }
        for row in &out.trace {
            if row.winner {
                assert!(row.payment <= row.bid);
            }
        }
        assert_eq!(out.rounds, 25);
    }
}
