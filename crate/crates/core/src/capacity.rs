//! Link SINR, Shannon capacity and per-channel route efficiency.
//!
//! Capacities are in bits/s/Hz: every logarithm here is base 2.

use thiserror::Error;

use crate::hexgrid::{ring_coords, Axial, Grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("distance must be positive and finite, got {0}")]
    BadDistance(f64),
    #[error("route has no links")]
    EmptyRoute,
    #[error("channel count must be at least 1")]
    NoChannels,
    #[error("invalid radio parameters: power {power}, alpha {alpha}, noise {noise}")]
    BadRadio { power: f64, alpha: f64, noise: f64 },
    #[error("access probability {0} outside [0, 1]")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Transmit power in watts.
    pub power: f64,
    /// Path-loss exponent; gain is `d^-alpha`.
    pub alpha: f64,
    /// Receiver noise power in watts.
    pub noise: f64,
}

impl RadioConfig {
    pub fn new(power: f64, alpha: f64, noise: f64) -> Result<Self, CapacityError> {
        let ok = power.is_finite()
            && power > 0.0
            && alpha.is_finite()
            && alpha >= 2.0
            && noise.is_finite()
            && noise > 0.0;
        if ok {
            Ok(Self {
                power,
                alpha,
                noise,
            })
        } else {
            Err(CapacityError::BadRadio {
                power,
                alpha,
                noise,
            })
        }
    }

    fn received(&self, d: f64) -> Result<f64, CapacityError> {
        if d.is_finite() && d > 0.0 {
            Ok(self.power * d.powf(-self.alpha))
        } else {
            Err(CapacityError::BadDistance(d))
        }
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            power: 0.75,
            alpha: 2.0,
            noise: 1e-4,
        }
    }
}

/// `P d^-a / (sum_u P d_u^-a + noise)`.
pub fn sinr(cfg: &RadioConfig, link: f64, interferers: &[f64]) -> Result<f64, CapacityError> {
    let signal = cfg.received(link)?;
    let mut interference = 0.0;
    for &d in interferers {
        interference += cfg.received(d)?;
    }
    Ok(signal / (interference + cfg.noise))
}

/// Shannon capacity `log2(1 + sinr)`.
pub fn link_capacity(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Worst-case co-channel interferer distances seen by `receiver`.
///
/// `ceil(N/K)` co-slot users transmit at once, spread evenly over the `b`
/// channels, so `ceil(ceil(N/K)/b)` of them share the receiver's channel.
/// They sit at the co-slot positions nearest the receiver.
pub fn worst_case_interferers(grid: &Grid, b: u32, receiver: usize) -> Vec<f64> {
    let b = b.max(1) as usize;
    let k = grid.reuse() as usize;
    let per_slot = grid.subcell_count().div_ceil(k);
    let count = per_slot.div_ceil(b);
    let Ok(rx) = grid.cell(receiver) else {
        return Vec::new();
    };
    let color = rx.color;
    // Positions come from the grid first; the lattice beyond the boundary
    // only supplies extra co-slot sites when the grid has too few.
    let mut dists: Vec<f64> = grid
        .cells()
        .iter()
        .filter(|c| c.index != receiver && c.color == color)
        .map(|c| grid.distance(receiver, c.index))
        .collect();
    dists.sort_by(f64::total_cmp);
    if dists.len() < count {
        let mut extra = beyond_grid(grid, rx.coord, color, count - dists.len());
        dists.append(&mut extra);
    }
    dists.truncate(count);
    dists
}

fn beyond_grid(grid: &Grid, rx: Axial, color: u8, need: usize) -> Vec<f64> {
    let cluster = grid.cluster();
    let rings = grid.rings();
    let probe = Grid::build(rings + cluster.size, grid.subcell_radius(), cluster.size)
        .expect("larger grid with the same parameters is valid");
    let origin = probe.index_of(rx).expect("receiver inside probe grid");
    let mut d: Vec<f64> = (rings + 1..=rings + cluster.size)
        .flat_map(ring_coords)
        .filter_map(|c| probe.index_of(c))
        .filter(|&m| probe.cells()[m].color == color)
        .map(|m| probe.distance(origin, m))
        .collect();
    d.sort_by(f64::total_cmp);
    d.truncate(need);
    d
}

/// Route capacity `c_R` (weakest link) and per-channel efficiency `c_R / b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteCapacity {
    pub c_r: f64,
    pub per_channel: f64,
}

pub fn route_capacity(sinrs: &[f64], b: u32) -> Result<RouteCapacity, CapacityError> {
    if sinrs.is_empty() {
        return Err(CapacityError::EmptyRoute);
    }
    if b == 0 {
        return Err(CapacityError::NoChannels);
    }
    let c_r = sinrs
        .iter()
        .map(|&s| link_capacity(s))
        .fold(f64::INFINITY, f64::min);
    Ok(RouteCapacity {
        c_r,
        per_channel: c_r / b as f64,
    })
}

/// Every hop sees the same geometry, so one representative hop into the
/// BS cell fixes the capacity for all routes at demand `b`.
pub fn symmetric_route_capacity(
    grid: &Grid,
    radio: &RadioConfig,
    b: u32,
) -> Result<RouteCapacity, CapacityError> {
    let s = sinr(radio, grid.relay_distance(), &worst_case_interferers(grid, b, 0))?;
    route_capacity(&[s], b)
}

/// `C_e = p_D * c_R / b`.
pub fn effective_capacity(p_d: f64, per_channel: f64) -> Result<f64, CapacityError> {
    if (0.0..=1.0).contains(&p_d) {
        Ok(p_d * per_channel)
    } else {
        Err(CapacityError::BadProbability(p_d))
    }
}
