//! Primary-user channel activity.
//!
//! Occupancy follows a birth/death loss system over `c` channels, so the
//! chance that at least `b` channels are idle is a tail sum of the
//! stationary distribution. PU return on an allocated channel is a single
//! scalar shared by every channel and applied once per hop.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel count must be at least 1")]
    NoChannels,
    #[error("offered load must be finite and nonnegative, got {0}")]
    BadLoad(f64),
    #[error("PU-occupied channels {n} leave no channel out of {c}")]
    NoFreeChannels { c: u32, n: u32 },
    #[error("requested channels {b} outside 1..={max}")]
    BadDemand { b: u32, max: u32 },
    #[error("return probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("PU arrival rate must be nonnegative and dwell positive, got rate {rate}, dwell {dwell}")]
    BadExponential { rate: f64, dwell: f64 },
}

/// Stationary occupancy of a `c`-channel loss system with load `rho` erlangs:
/// `pi_j` proportional to `rho^j / j!` for `j = 0..=c`.
pub fn steady_state(c: u32, rho: f64) -> Result<Vec<f64>, ChannelError> {
    if c == 0 {
        return Err(ChannelError::NoChannels);
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(ChannelError::BadLoad(rho));
    }
    let mut terms = Vec::with_capacity(c as usize + 1);
    let mut t = 1.0;
    terms.push(t);
    for j in 1..=c {
        t *= rho / j as f64;
        terms.push(t);
    }
    let z: f64 = terms.iter().sum();
    Ok(terms.into_iter().map(|x| x / z).collect())
}

/// Probability that at least `b` of the channels are idle.
pub fn p_available(b: u32, pi: &[f64]) -> Result<f64, ChannelError> {
    let c = pi.len().saturating_sub(1) as u32;
    if b == 0 || b > c {
        return Err(ChannelError::BadDemand { b, max: c });
    }
    Ok(pi[..=(c - b) as usize].iter().sum::<f64>().min(1.0))
}

/// How the per-hop PU return probability is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnModel {
    Fixed(f64),
    /// Poisson PU arrivals at `rate` per slot over a hop dwell of `dwell` slots.
    Exponential { rate: f64, dwell: f64 },
}

pub fn return_probability(model: ReturnModel) -> Result<f64, ChannelError> {
    match model {
        ReturnModel::Fixed(v) => {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(ChannelError::BadProbability(v))
            }
        }
        ReturnModel::Exponential { rate, dwell } => {
            if !(rate.is_finite() && rate >= 0.0 && dwell.is_finite() && dwell > 0.0) {
                return Err(ChannelError::BadExponential { rate, dwell });
            }
            Ok(-(-rate * dwell).exp_m1())
        }
    }
}

/// Channel statistics shared by every subcell.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    channels: u32,
    pu_occupied: u32,
    load: f64,
    p_return: f64,
    occupancy: Vec<f64>,
    availability: Vec<f64>,
}

impl ChannelStats {
    /// `c` channels, `n` of them held by PUs, load `rho` erlangs.
    pub fn new(c: u32, n: u32, rho: f64, ret: ReturnModel) -> Result<Self, ChannelError> {
        let occupancy = steady_state(c, rho)?;
        if n >= c {
            return Err(ChannelError::NoFreeChannels { c, n });
        }
        let p_return = return_probability(ret)?;
        let availability = (1..=c - n)
            .map(|b| p_available(b, &occupancy))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            channels: c,
            pu_occupied: n,
            load: rho,
            p_return,
            occupancy,
            availability,
        })
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn pu_occupied(&self) -> u32 {
        self.pu_occupied
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    /// Largest demand an SU may place, `c - n`.
    pub fn max_demand(&self) -> u32 {
        self.channels - self.pu_occupied
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn p_return(&self) -> f64 {
        self.p_return
    }

    pub fn p_free(&self) -> f64 {
        1.0 - self.p_return
    }

    pub fn p_b(&self, b: u32) -> Result<f64, ChannelError> {
        let max = self.max_demand();
        if b == 0 || b > max {
            return Err(ChannelError::BadDemand { b, max });
        }
        Ok(self.availability[b as usize - 1])
    }

    /// `p_b` for `b = 1..=c-n`.
    pub fn availability_curve(&self) -> &[f64] {
        &self.availability
    }
}
