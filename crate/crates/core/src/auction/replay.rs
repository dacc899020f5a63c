//! Final-round replay with every other bid frozen.
//!
//! Used to probe a single bidder's alternatives: a different `beta` keeps
//! its chosen `(b*, p*)` and tip, so only the bid `beta * b* * V` moves.

/// Winner and payment rule of the closing round.
#[derive(Debug, Clone, PartialEq)]
pub enum Settlement {
    /// Win iff `bid >= price` (and `bid > 0`); every winner pays `price`.
    Uniform { price: f64 },
    /// Bids pool into groups. A group wins iff it ranks in the top `slots`
    /// by pooled bid and the pool reaches `price`; members pay
    /// `bid / pool * price`.
    Group {
        price: f64,
        slots: usize,
        /// Group of each bidder.
        membership: Vec<usize>,
        /// Pooled bid per group.
        pools: Vec<f64>,
    },
    /// Each bidder faces its own posted threshold and charge.
    Posted {
        thresholds: Vec<f64>,
        charges: Vec<f64>,
    },
}

/// What a bidder brings to the closing round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayBidder {
    /// `b* V`: the bid equals `beta * base`.
    pub base: f64,
    /// `V - tip` if the bidder can use the resources, else 0.
    pub net_value: f64,
    pub bid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalRound {
    pub settlement: Settlement,
    pub bidders: Vec<ReplayBidder>,
}

impl FinalRound {
    pub fn empty() -> Self {
        Self {
            settlement: Settlement::Uniform { price: 0.0 },
            bidders: Vec::new(),
        }
    }

    /// Payment if bidder `m` wins with `bid`, others unchanged.
    pub fn settle(&self, m: usize, bid: f64) -> Option<f64> {
        if !(bid > 0.0) {
            return None;
        }
        match &self.settlement {
            Settlement::Uniform { price } => (bid >= *price).then_some(*price),
            Settlement::Group {
                price,
                slots,
                membership,
                pools,
            } => {
                let k = membership[m];
                let own = self.bidders[m].bid;
                // Keep the recorded pool exact when the bid is unchanged.
                let pool = if bid == own {
                    pools[k]
                } else {
                    pools[k] - own + bid
                };
                let ahead = pools
                    .iter()
                    .enumerate()
                    .filter(|&(j, &v)| j != k && (v > pool || (v == pool && j < k)))
                    .count();
                (ahead < *slots && pool >= *price && pool > 0.0).then(|| bid / pool * price)
            }
            Settlement::Posted {
                thresholds,
                charges,
            } => (bid >= thresholds[m]).then_some(charges[m]),
        }
    }

    pub fn wins(&self, m: usize, bid: f64) -> bool {
        self.settle(m, bid).is_some()
    }

    /// Realized utility of bidder `m` bidding `bid`.
    pub fn utility(&self, m: usize, bid: f64) -> f64 {
        match self.settle(m, bid) {
            Some(pay) => self.bidders[m].net_value - pay,
            None => 0.0,
        }
    }

    pub fn utility_for_beta(&self, m: usize, beta: f64) -> f64 {
        self.utility(m, beta * self.bidders[m].base)
    }

    /// The `beta` the bidder actually used.
    pub fn beta(&self, m: usize) -> f64 {
        let b = &self.bidders[m];
        if b.base > 0.0 {
            b.bid / b.base
        } else {
            0.0
        }
    }

    /// Largest gain over the actual bid among the candidate `beta` values.
    pub fn best_deviation_gain(&self, m: usize, betas: &[f64]) -> f64 {
        let base = self.utility(m, self.bidders[m].bid);
        betas
            .iter()
            .map(|&b| self.utility_for_beta(m, b) - base)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Deviation grid: multiples of the actual `beta` plus the betas that
    /// land exactly on, just under and just over the critical bid.
    pub fn deviation_betas(&self, m: usize) -> Vec<f64> {
        let beta = self.beta(m);
        let base = self.bidders[m].base;
        let mut out: Vec<f64> = [0.0, 0.5, 0.9, 0.999, 1.001, 1.1, 2.0, 10.0]
            .iter()
            .map(|f| f * beta)
            .collect();
        if base > 0.0 {
            if let Some(c) = self.critical_bid(m) {
                for f in [1.0 - 1e-9, 1.0, 1.0 + 1e-9] {
                    out.push(c * f / base);
                }
            }
            out.push(1.0 / base);
        }
        out
    }

    /// Smallest winning bid for bidder `m`, if any bid wins.
    pub fn critical_bid(&self, m: usize) -> Option<f64> {
        match &self.settlement {
            Settlement::Uniform { price } => Some(price.max(f64::MIN_POSITIVE)),
            Settlement::Posted { thresholds, .. } => Some(thresholds[m].max(f64::MIN_POSITIVE)),
            Settlement::Group {
                price,
                slots,
                membership,
                pools,
            } => {
                let k = membership[m];
                let rest = pools[k] - self.bidders[m].bid;
                // Pool must reach the price and beat the slot-th best rival.
                let mut rivals: Vec<(f64, usize)> = pools
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(j, &v)| (v, j))
                    .collect();
                rivals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let mut need = *price;
                if rivals.len() >= *slots {
                    let (v, j) = rivals[*slots - 1];
                    let beat = if j < k { next_up(v) } else { v };
                    need = need.max(beat);
                }
                Some((need - rest).max(f64::MIN_POSITIVE))
            }
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        x + x.abs() * f64::EPSILON
    }
}
