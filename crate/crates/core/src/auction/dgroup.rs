//! Dynamic group buying over an arrival window.
//!
//! The operator posts a price curve that decays in time and in the expected
//! number of buyers. Each arriving bidder revises once against the price it
//! sees and either joins (its willingness covers the price) or leaves for
//! good. Since the curve only falls, everyone who joins is a final winner.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::ijbit::replay_bidder;
use super::{
    opening, Acceptance, AuctionConfig, AuctionError, AuctionOutcome, Bidder, DgroupPayment,
    FinalRound, Market, Scheme, Settlement, StopReason, TraceRow,
};
use crate::bidding::{respond, Response};

/// Posted price at time `t` for `b` channels, with `n_s` expected buyers.
///
/// `n_s` is floored at 1 so an empty market does not divide by zero.
pub fn price_curve(t: f64, b: u32, n_s: f64, initial: f64, reuse: u32, p_free: f64) -> f64 {
    initial * b as f64 * (reuse as f64 / n_s.max(1.0)) * (-t).exp() * p_free
}

/// Poisson mean of arrivals by time `t` at rate `rate`, truncated after
/// `cap` arrivals.
pub fn expected_bidders(t: f64, rate: f64, cap: u64) -> f64 {
    let x = rate * t;
    if !(x > 0.0) {
        return 0.0;
    }
    let ln_x = x.ln();
    let mut ln_term = -x;
    let mut sum = 0.0;
    let mut z = 0u64;
    while z < cap {
        z += 1;
        ln_term += ln_x - (z as f64).ln();
        let term = z as f64 * ln_term.exp();
        sum += term;
        if z as f64 > x && term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// A bidder showing up at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub bidder: usize,
}

/// Poisson arrivals at `rate` on `[1, duration]`, each bidder at most once.
pub fn poisson_arrivals<R: Rng + ?Sized>(
    bidders: usize,
    rate: f64,
    duration: f64,
    rng: &mut R,
) -> Vec<Arrival> {
    let mean = rate * (duration - 1.0);
    let count = if mean > 0.0 {
        Poisson::new(mean).map_or(0, |d| d.sample(rng) as usize)
    } else {
        0
    };
    let count = count.min(bidders);
    let mut who: Vec<usize> = (0..bidders).collect();
    who.shuffle(rng);
    let mut times: Vec<f64> = (0..count)
        .map(|_| rng.random_range(1.0..=duration))
        .collect();
    times.sort_by(f64::total_cmp);
    times
        .into_iter()
        .zip(who)
        .map(|(time, bidder)| Arrival { time, bidder })
        .collect()
}

/// Outcome plus the price path seen by the arrivals.
#[derive(Debug, Clone)]
pub struct DgroupRun {
    pub outcome: AuctionOutcome,
    /// Arrivals in time order.
    pub arrivals: Vec<Arrival>,
    /// Price posted to each arrival.
    pub prices: Vec<f64>,
    /// Expected buyers used for each posted price.
    pub expected: Vec<f64>,
    /// Acceptance estimate at the close.
    pub acceptance: f64,
    /// Closing price per channel.
    pub final_price: f64,
}

/// Run the dynamic-group scheme on an arrival stream.
///
/// Arrival `m` (1-based, in time order) sees the curve with the truncated
/// buyer mean at rate `lambda_S * p_m` and cap `m`. It revises `(b, p)` and
/// its tip against that price, then bids its full willingness `V - tip` and
/// joins iff that covers the price. Winners pay the closing price for their
/// channel count (or their arrival price), capped at the price they accepted.
pub fn run_dgroup(
    arrivals: &[Arrival],
    bidders: &[Bidder],
    market: &Market,
    cfg: &AuctionConfig,
) -> Result<DgroupRun, AuctionError> {
    cfg.validate()?;
    for (i, b) in bidders.iter().enumerate() {
        if !market.atlas.is_source(b.cell) || b.cell == 0 {
            return Err(AuctionError::NoSubcell(i));
        }
    }
    let d = cfg.dgroup;
    let mut stream = arrivals.to_vec();
    stream.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.bidder.cmp(&b.bidder)));
    let mut seen = vec![false; bidders.len()];
    for a in &stream {
        if a.bidder >= bidders.len() || seen[a.bidder] {
            return Err(AuctionError::Config(format!(
                "arrival for bidder {} is unknown or repeated",
                a.bidder
            )));
        }
        if !(a.time >= 1.0 && a.time <= d.duration) {
            return Err(AuctionError::Config(format!(
                "arrival time {} outside [1, {}]",
                a.time, d.duration
            )));
        }
        seen[a.bidder] = true;
    }

    let k = market.grid.reuse();
    let p_free = market.stats.p_free();
    let rcfg = cfg.response(k);
    let opened = opening(bidders, market, cfg, k)?;
    let mut responses: Vec<Response> = opened
        .iter()
        .map(|r| Response::inactive(r.strategy, r.optimum))
        .collect();
    let mut thresholds = vec![f64::INFINITY; bidders.len()];
    let mut accepted = vec![false; bidders.len()];
    let mut prices = Vec::with_capacity(stream.len());
    let mut expected = Vec::with_capacity(stream.len());
    let mut accepts = 0usize;
    let mut trace = Vec::with_capacity(stream.len());

    for (i, a) in stream.iter().enumerate() {
        let p_m = match d.acceptance {
            Acceptance::Online if i == 0 => 1.0,
            Acceptance::Online => accepts as f64 / i as f64,
            Acceptance::Fixed(p) => p,
        };
        let n_s = expected_bidders(a.time, d.arrival_rate * p_m, i as u64 + 1);
        let b = &bidders[a.bidder];
        let mut r = opened[a.bidder];
        let mut price = 0.0;
        if r.active {
            // Channel count and price depend on each other; settle both.
            let mut b_cur = r.optimum.b;
            for _ in 0..cfg.max_revisions.max(1) {
                price = price_curve(a.time, b_cur, n_s, d.initial_price, k, p_free);
                r = respond(
                    price,
                    &opened[a.bidder],
                    b.cell,
                    b.tau_max,
                    market.atlas,
                    market.ctx,
                    rcfg,
                )?;
                if !r.active || r.optimum.b == b_cur {
                    break;
                }
                b_cur = r.optimum.b;
            }
        }
        if r.active {
            // A joining bidder offers everything the resources are worth.
            r.bid = r.willingness;
            r.strategy.beta = r.bid / (r.optimum.b as f64 * r.optimum.value);
            r.utility = r.optimum.value - r.bid - r.tip;
            r.optimum.utility = r.utility;
        }
        let ok = r.active && r.bid > 0.0 && r.bid >= price;
        if ok {
            accepts += 1;
            accepted[a.bidder] = true;
            thresholds[a.bidder] = price;
            responses[a.bidder] = r;
        } else {
            responses[a.bidder] = Response::inactive(r.strategy, r.optimum);
        }
        prices.push(price);
        expected.push(n_s);
        trace.push(TraceRow {
            t: i + 1,
            bidder: a.bidder,
            bid: r.bid,
            tip: r.tip,
            b_star: r.optimum.b,
            p_star: r.optimum.p,
            price_c: price,
            price_q: 0.0,
            utility: r.optimum.value - r.bid - r.tip,
            winner: ok,
            payment: 0.0,
        });
    }

    let acceptance = match d.acceptance {
        Acceptance::Online if stream.is_empty() => 1.0,
        Acceptance::Online => accepts as f64 / stream.len() as f64,
        Acceptance::Fixed(p) => p,
    };
    let n_final = expected_bidders(d.duration, d.arrival_rate * acceptance, stream.len() as u64);
    let final_price = price_curve(d.duration, 1, n_final, d.initial_price, k, p_free);
    let mut payments = vec![0.0; bidders.len()];
    let mut charges = vec![0.0; bidders.len()];
    let mut winners = Vec::new();
    for m in 0..bidders.len() {
        if !accepted[m] {
            continue;
        }
        let charge = match d.payment {
            DgroupPayment::Final => final_price * responses[m].optimum.b as f64,
            DgroupPayment::Arrival => thresholds[m],
        }
        .min(thresholds[m]);
        charges[m] = charge;
        payments[m] = charge;
        winners.push(m);
    }
    for row in &mut trace {
        row.price_q = charges[row.bidder];
        if row.winner {
            row.payment = charges[row.bidder];
        }
    }
    let revenue = payments.iter().sum();
    let final_round = FinalRound {
        settlement: Settlement::Posted { thresholds, charges },
        bidders: responses.iter().map(replay_bidder).collect(),
    };
    let outcome = AuctionOutcome {
        scheme: Scheme::Dgroup,
        winners,
        payments,
        responses,
        revenue,
        clearing_price: final_price,
        groups: None,
        trace,
        stop: StopReason::WindowClosed,
        rounds: stream.len(),
        final_round,
    };
    Ok(DgroupRun {
        outcome,
        arrivals: stream,
        prices,
        expected,
        acceptance,
        final_price,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::tests_support::Env;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn factorial(n: u64) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn curve_examples() {
        let e1 = (-1.0f64).exp();
        assert!((price_curve(1.0, 1, 7.0, 2.0, 7, 1.0) - 2.0 * e1).abs() < 1e-15);
        let a = price_curve(2.0, 3, 4.0, 1.0, 7, 0.9);
        let b = price_curve(2.0, 3, 8.0, 1.0, 7, 0.9);
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert_eq!(price_curve(1.5, 2, 3.0, 1.0, 7, 0.0), 0.0);
        assert_eq!(
            price_curve(1.0, 1, 0.0, 1.0, 7, 1.0),
            price_curve(1.0, 1, 1.0, 1.0, 7, 1.0)
        );
    }

    #[test]
    fn truncated_mean() {
        assert_eq!(expected_bidders(2.0, 0.0, 10), 0.0);
        let direct: f64 = (0..=5u64)
            .map(|z| z as f64 * 2f64.powi(z as i32) / factorial(z) * (-2.0f64).exp())
            .sum();
        assert!((expected_bidders(1.0, 2.0, 5) - direct).abs() < 1e-14);
        assert!((expected_bidders(3.0, 5.0, u64::MAX) - 15.0).abs() < 1e-9);
        assert!((expected_bidders(10.0, 50.0, 10_000) - 500.0).abs() < 1e-6);
    }

    #[test]
    fn free_resources_admit_everyone() {
        let env = Env::new(3, &[]);
        let bidders = env.random_bidders(9.0, 63.0, 2);
        let mut cfg = AuctionConfig::default();
        cfg.dgroup.initial_price = 0.0;
        let arrivals: Vec<Arrival> = (0..bidders.len())
            .map(|m| Arrival {
                time: 1.0 + m as f64 * 0.05,
                bidder: m,
            })
            .collect();
        let run = run_dgroup(&arrivals, &bidders, &env.market(), &cfg).unwrap();
        assert!(run.prices.iter().all(|&p| p == 0.0));
        let active = run.outcome.responses.iter().filter(|r| r.active).count();
        assert_eq!(run.outcome.winner_count(), active);
        assert!(active > bidders.len() / 2);
        assert_eq!(run.outcome.revenue, 0.0);
    }

    #[test]
    fn hand_traced_stream() {
        let env = Env::new(3, &[]);
        let bidders = env.bidders(&[(1, 40.0), (2, 40.0), (3, 40.0)]);
        let mut cfg = AuctionConfig::default();
        cfg.dgroup.acceptance = Acceptance::Fixed(1.0);
        cfg.dgroup.arrival_rate = 1.0;
        let arrivals = [
            Arrival {
                time: 1.0,
                bidder: 0,
            },
            Arrival {
                time: 2.0,
                bidder: 1,
            },
            Arrival {
                time: 3.0,
                bidder: 2,
            },
        ];
        let p_free = env.stats.p_free();
        let run = run_dgroup(&arrivals, &bidders, &env.market(), &cfg).unwrap();
        for (i, a) in arrivals.iter().enumerate() {
            let n_s = expected_bidders(a.time, 1.0, i as u64 + 1);
            let r = &run.outcome.responses[a.bidder];
            let row = &run.outcome.trace[i];
            let price = price_curve(a.time, row.b_star, n_s, 1.0, 7, p_free);
            assert!((run.prices[i] - price).abs() < 1e-15);
            let joins = row.bid > 0.0 && row.bid >= price;
            assert_eq!(row.winner, joins);
            assert_eq!(run.outcome.winners.contains(&a.bidder), joins);
            if joins {
                assert!(r.willingness >= price);
            }
        }
        for &m in &run.outcome.winners {
            assert!(run.outcome.payments[m] <= run.outcome.responses[m].bid);
        }
    }

    #[test]
    fn rejects_bad_streams() {
        let env = Env::new(2, &[]);
        let bidders = env.bidders(&[(1, 20.0), (2, 20.0)]);
        let cfg = AuctionConfig::default();
        let twice = [
            Arrival {
                time: 1.0,
                bidder: 0,
            },
            Arrival {
                time: 2.0,
                bidder: 0,
            },
        ];
        assert!(run_dgroup(&twice, &bidders, &env.market(), &cfg).is_err());
        let late = [Arrival {
            time: 5.0,
            bidder: 1,
        }];
        assert!(run_dgroup(&late, &bidders, &env.market(), &cfg).is_err());
        let run = run_dgroup(&[], &bidders, &env.market(), &cfg).unwrap();
        assert!(run.outcome.winners.is_empty());
    }

    #[test]
    fn stream_draws_each_bidder_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = poisson_arrivals(60, 30.0, 3.0, &mut rng);
        assert!(!a.is_empty() && a.len() <= 60);
        let mut ids: Vec<usize> = a.iter().map(|x| x.bidder).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), a.len());
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.iter().all(|x| (1.0..=3.0).contains(&x.time)));
    }
}
