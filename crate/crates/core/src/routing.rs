//! Route-discovery Markov analysis.
//!
//! Each subcell forwards the route request to its neighbors in relay
//! priority order. The priority-`w` neighbor takes the request with
//! probability `p_b * p * (1 - p)^(w - 1) * p_free`; whatever mass is left
//! goes to the absorbing "no route" state. Every destination cell is merged
//! into one absorbing "destination" state, so the chain has the transient
//! cells plus two absorbing states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelStats};
use crate::hexgrid::{DestinationSet, Grid, GridError};
use crate::linalg::{DenseMatrix, LinalgError, Lu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("relay availability must lie in (0, 1], got {0}")]
    BadAvailability(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("route chain never absorbs: {0}")]
    NonAbsorbing(LinalgError),
    #[error("cell {0} is a destination, not a transient state")]
    NotTransient(usize),
    #[error("start distribution must be nonnegative and sum to 1")]
    BadDistribution,
    #[error("dwell vector has {got} entries, expected {expected}")]
    BadDwell { got: usize, expected: usize },
    #[error("route length {l} exceeds the {n} available subcells")]
    BadRouteLength { l: u32, n: u32 },
    #[error("session count must be at least 1")]
    NoSessions,
}

/// Absorbing states of the route chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Absorbing {
    Destination,
    NoRoute,
}

/// Relay probabilities for one cell: `(neighbor, p_w)` in priority order
/// plus the no-route mass `p_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    pub relays: Vec<(usize, f64)>,
    pub p0: f64,
}

/// Geometric relay split for `count` neighbors with per-try gain
/// `p_b * p_free`: returns `p_1..p_count` and `p_0`.
pub fn relay_split(p: f64, gain: f64, count: usize) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(count);
    let mut miss = 1.0;
    for _ in 0..count {
        out.push(gain * p * miss);
        miss *= 1.0 - p;
    }
    // 1 - gain * (1 - (1-p)^count), evaluated without cancellation.
    let p0 = (1.0 - gain) + gain * miss;
    (out, p0)
}

fn check_p(p: f64) -> Result<(), RouteError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(RouteError::BadAvailability(p))
    }
}

/// Eq. (2) for a single cell towards the destination set.
pub fn transition_probabilities(
    grid: &Grid,
    dest: &DestinationSet,
    m: usize,
    p: f64,
    b: u32,
    stats: &ChannelStats,
) -> Result<Transitions, RouteError> {
    check_p(p)?;
    let gain = stats.p_b(b)? * stats.p_free();
    let order = grid.relay_priority_towards(m, dest.cells())?;
    let (pw, p0) = relay_split(p, gain, order.len());
    Ok(Transitions {
        relays: order.into_iter().zip(pw).collect(),
        p0,
    })
}

/// Relay priority orderings for one destination set; independent of `(b, p)`.
#[derive(Debug, Clone)]
pub struct RouteTopology {
    cells: usize,
    dest: DestinationSet,
    /// Transient cells in ascending index order.
    transient: Vec<usize>,
    /// cell index -> transient slot
    slot: Vec<Option<usize>>,
    /// Per transient slot: next hops in priority order, as `Some(slot)` or
    /// `None` for a destination cell.
    hops: Vec<Vec<Option<usize>>>,
}

impl RouteTopology {
    pub fn new(grid: &Grid, dest: &DestinationSet) -> Result<Self, RouteError> {
        let cells = grid.cells().len();
        let transient: Vec<usize> = (0..cells).filter(|&m| !dest.contains(m)).collect();
        let mut slot = vec![None; cells];
        for (i, &m) in transient.iter().enumerate() {
            slot[m] = Some(i);
        }
        let hops = transient
            .iter()
            .map(|&m| {
                Ok(grid
                    .relay_priority_towards(m, dest.cells())?
                    .into_iter()
                    .map(|n| slot[n])
                    .collect())
            })
            .collect::<Result<_, GridError>>()?;
        Ok(Self {
            cells,
            dest: dest.clone(),
            transient,
            slot,
            hops,
        })
    }

    pub fn destinations(&self) -> &DestinationSet {
        &self.dest
    }

    pub fn transient_cells(&self) -> &[usize] {
        &self.transient
    }

    pub fn slot_of(&self, m: usize) -> Option<usize> {
        self.slot.get(m).copied().flatten()
    }

    /// Priority-1 next hop of cell `m`, or `None` if `m` is a destination.
    pub fn first_hop(&self, grid: &Grid, m: usize) -> Option<usize> {
        let s = self.slot_of(m)?;
        let order = grid.relay_priority_towards(m, self.dest.cells()).ok()?;
        debug_assert_eq!(order.len(), self.hops[s].len());
        order.first().copied()
    }

    /// Build the chain for relay availability `p` and demand `b`.
    pub fn model(&self, p: f64, b: u32, stats: &ChannelStats) -> Result<RouteModel, RouteError> {
        check_p(p)?;
        let gain = stats.p_b(b)? * stats.p_free();
        self.model_with_gain(p, b, gain)
    }

    /// As [`RouteTopology::model`] with an explicit `p_b * p_free` product.
    pub fn model_with_gain(&self, p: f64, b: u32, gain: f64) -> Result<RouteModel, RouteError> {
        check_p(p)?;
        let n = self.transient.len();
        let mut q = DenseMatrix::zeros(n, n);
        let mut r = DenseMatrix::zeros(n, 2);
        let mut rows = Vec::with_capacity(n);
        for (i, hops) in self.hops.iter().enumerate() {
            let (pw, p0) = relay_split(p, gain, hops.len());
            let mut row = Vec::with_capacity(hops.len() + 1);
            for (h, w) in hops.iter().zip(pw) {
                match h {
                    Some(j) => {
                        q.set(i, *j, q.get(i, *j) + w);
                        row.push((State::Transient(*j), w));
                    }
                    None => {
                        r.set(i, 0, r.get(i, 0) + w);
                        row.push((State::Absorbed(Absorbing::Destination), w));
                    }
                }
            }
            r.set(i, 1, p0);
            row.push((State::Absorbed(Absorbing::NoRoute), p0));
            rows.push(row);
        }
        let i_minus_q = DenseMatrix::identity(n)
            .sub(&q)
            .map_err(RouteError::NonAbsorbing)?;
        let lu = i_minus_q.lu().map_err(RouteError::NonAbsorbing)?;
        let tau = lu.solve(&vec![1.0; n]).map_err(RouteError::NonAbsorbing)?;
        let e = lu.solve_matrix(&r).map_err(RouteError::NonAbsorbing)?;
        Ok(RouteModel {
            p,
            b,
            gain,
            transient: self.transient.clone(),
            slot: self.slot.clone(),
            cells: self.cells,
            q,
            r,
            rows,
            lu,
            tau,
            e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Transient(usize),
    Absorbed(Absorbing),
}

/// The route chain in canonical form for one `(p, b)`.
#[derive(Debug, Clone)]
pub struct RouteModel {
    p: f64,
    b: u32,
    gain: f64,
    transient: Vec<usize>,
    slot: Vec<Option<usize>>,
    cells: usize,
    q: DenseMatrix,
    r: DenseMatrix,
    rows: Vec<Vec<(State, f64)>>,
    lu: Lu,
    tau: Vec<f64>,
    e: DenseMatrix,
}

/// Mean access figures under a start distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Access {
    pub p_d: f64,
    pub p_nr: f64,
    pub tau: f64,
}

impl RouteModel {
    /// Convenience constructor that builds a throwaway topology.
    pub fn build(
        grid: &Grid,
        dest: &DestinationSet,
        p: f64,
        b: u32,
        stats: &ChannelStats,
    ) -> Result<Self, RouteError> {
        RouteTopology::new(grid, dest)?.model(p, b, stats)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    /// `p_b * p_free` used for every relay attempt.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn transient_cells(&self) -> &[usize] {
        &self.transient
    }

    pub fn transient_count(&self) -> usize {
        self.transient.len()
    }

    /// Dimension of the canonical matrix: transient states plus `D` and `nr`.
    pub fn dimension(&self) -> usize {
        self.transient.len() + 2
    }

    pub fn slot_of(&self, m: usize) -> Result<usize, RouteError> {
        if m >= self.cells {
            return Err(GridError::BadIndex(m).into());
        }
        self.slot[m].ok_or(RouteError::NotTransient(m))
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    /// Transient-to-absorbing block; column 0 is `D`, column 1 is `nr`.
    pub fn r_abs(&self) -> &DenseMatrix {
        &self.r
    }

    /// Canonical matrix `[I 0; R Q]` with absorbing states first (`D`, `nr`).
    pub fn canonical(&self) -> DenseMatrix {
        let n = self.transient.len();
        let mut p = DenseMatrix::zeros(n + 2, n + 2);
        p.set(0, 0, 1.0);
        p.set(1, 1, 1.0);
        for i in 0..n {
            p.set(i + 2, 0, self.r.get(i, 0));
            p.set(i + 2, 1, self.r.get(i, 1));
            for j in 0..n {
                p.set(i + 2, j + 2, self.q.get(i, j));
            }
        }
        p
    }

    /// `N_f = (I - Q)^{-1}`.
    pub fn fundamental(&self) -> Result<DenseMatrix, RouteError> {
        self.lu
            .solve_matrix(&DenseMatrix::identity(self.transient.len()))
            .map_err(RouteError::NonAbsorbing)
    }

    /// Expected hop count per transient slot with unit dwell times.
    pub fn expected_hops(&self) -> &[f64] {
        &self.tau
    }

    /// Expected time to absorption `N_f * dwell`.
    pub fn expected_time(&self, dwell: &[f64]) -> Result<Vec<f64>, RouteError> {
        if dwell.len() != self.transient.len() {
            return Err(RouteError::BadDwell {
                got: dwell.len(),
                expected: self.transient.len(),
            });
        }
        self.lu.solve(dwell).map_err(RouteError::NonAbsorbing)
    }

    pub fn hops_from(&self, m: usize) -> Result<f64, RouteError> {
        Ok(self.tau[self.slot_of(m)?])
    }

    /// Absorption matrix `E = N_f R`; column 0 is `D`, column 1 is `nr`.
    pub fn absorption(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn p_d_from(&self, m: usize) -> Result<f64, RouteError> {
        Ok(self.e.get(self.slot_of(m)?, 0))
    }

    /// `[p_D, p_nr] = f E` for a start distribution over transient slots.
    pub fn access(&self, f: &[f64]) -> Result<Access, RouteError> {
        let n = self.transient.len();
        let total: f64 = f.iter().sum();
        if f.len() != n || f.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(RouteError::BadDistribution);
        }
        let pe = self.e.vec_mul(f).map_err(RouteError::NonAbsorbing)?;
        let tau = f.iter().zip(&self.tau).map(|(a, t)| a * t).sum();
        Ok(Access {
            p_d: pe[0],
            p_nr: pe[1],
            tau,
        })
    }

    /// Uniform start distribution over the transient source subcells
    /// (the BS cell is never a source).
    pub fn uniform_sources(&self) -> Vec<f64> {
        let k = self.transient.iter().filter(|&&m| m != 0).count();
        self.transient
            .iter()
            .map(|&m| if m != 0 && k > 0 { 1.0 / k as f64 } else { 0.0 })
            .collect()
    }

    pub fn mean_access(&self) -> Access {
        self.access(&self.uniform_sources())
            .expect("uniform distribution is valid")
    }

    /// Sample one trajectory from cell `start`; returns the absorbing state
    /// and the number of transitions taken.
    pub fn simulate_walk<R: Rng + ?Sized>(
        &self,
        start: usize,
        rng: &mut R,
    ) -> Result<(Absorbing, u32), RouteError> {
        let mut s = self.slot_of(start)?;
        let mut hops = 0u32;
        loop {
            hops += 1;
            let row = &self.rows[s];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            // Fall back to the last entry (nr) if rounding leaves u uncovered.
            let mut next = row[row.len() - 1].0;
            for &(state, w) in row {
                acc += w;
                if u < acc {
                    next = state;
                    break;
                }
            }
            match next {
                State::Transient(j) => s = j,
                State::Absorbed(a) => return Ok((a, hops)),
            }
        }
    }

    /// Monte Carlo estimate of mean hops and `P(D)` with start cells drawn
    /// from `f`. Work is split into fixed chunks with counter-derived seeds,
    /// so the result does not depend on the thread count.
    pub fn monte_carlo(&self, f: &[f64], walks: usize, seed: u64) -> Result<Access, RouteError> {
        self.access(f)?;
        const CHUNK: usize = 4096;
        let cdf: Vec<f64> = f
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let chunks = walks.div_ceil(CHUNK);
        let (hits, hops) = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let len = CHUNK.min(walks - c * CHUNK);
                let mut hits = 0u64;
                let mut hops = 0u64;
                for _ in 0..len {
                    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                    let slot = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
                    let (a, h) = self
                        .simulate_walk(self.transient[slot], &mut rng)
                        .expect("slot is transient");
                    hits += (a == Absorbing::Destination) as u64;
                    hops += h as u64;
                }
                (hits, hops)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let n = walks.max(1) as f64;
        Ok(Access {
            p_d: hits as f64 / n,
            p_nr: 1.0 - hits as f64 / n,
            tau: hops as f64 / n,
        })
    }
}

/// How concurrent route sessions share subcells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    /// One channel per subcell: each other route through a cell blocks it.
    Contention,
    /// Channels beyond the first act as backup; blocking needs `b` routes.
    Backup,
}

/// Probability that at least `b` of `m` routes use a given subcell when
/// each does so independently with probability `q`.
pub fn contention_probability(m: u32, b: u32, q: f64) -> f64 {
    if b > m {
        return 0.0;
    }
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=m {
        if i > 0 {
            binom *= (m - i + 1) as f64 / i as f64;
        }
        if i >= b {
            total += binom * q.powi(i as i32) * (1.0 - q).powi((m - i) as i32);
        }
    }
    total.min(1.0)
}

/// Relay availability for session `own` given every session's route length
/// (in hops) over a network of `n` subcells.
pub fn multisession_adjust(
    p: f64,
    lengths: &[u32],
    own: usize,
    n: u32,
    b: u32,
    mode: SessionMode,
) -> Result<f64, RouteError> {
    check_p(p)?;
    if lengths.is_empty() || own >= lengths.len() {
        return Err(RouteError::NoSessions);
    }
    for &l in lengths {
        if l == 0 || l - 1 > n {
            return Err(RouteError::BadRouteLength { l, n });
        }
    }
    let share = |l: u32| (l - 1) as f64 / n as f64;
    Ok(match mode {
        SessionMode::Contention => {
            p * lengths
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != own)
                .map(|(_, &l)| 1.0 - share(l))
                .product::<f64>()
        }
        SessionMode::Backup => {
            let q = lengths.iter().map(|&l| share(l)).sum::<f64>() / lengths.len() as f64;
            p * (1.0 - contention_probability(lengths.len() as u32, b, q))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ReturnModel;
    use crate::hexgrid::Axial;

    fn ideal() -> ChannelStats {
        ChannelStats::new(10, 1, 0.0, ReturnModel::Fixed(0.0)).unwrap()
    }

    fn typical() -> ChannelStats {
        ChannelStats::new(10, 1, 2.0, ReturnModel::Fixed(0.1)).unwrap()
    }

    #[test]
    fn geometric_collapse_at_p_one() {
        let (pw, p0) = relay_split(1.0, 1.0, 6);
        assert_eq!(pw, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p0, 0.0);
        let (pw, p0) = relay_split(0.4, 0.0, 6);
        assert!(pw.iter().all(|&x| x == 0.0));
        assert_eq!(p0, 1.0);
    }

    #[test]
    fn geometric_series_at_half() {
        let (pw, p0) = relay_split(0.5, 1.0, 6);
        assert!((pw.iter().sum::<f64>() - (1.0 - 0.5f64.powi(6))).abs() < 1e-15);
        assert!((p0 - 0.5f64.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_p() {
        let g = Grid::build(2, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        for p in [0.0, -0.1, 1.1, f64::NAN] {
            assert!(matches!(
                RouteModel::build(&g, &d, p, 1, &ideal()),
                Err(RouteError::BadAvailability(_))
            ));
        }
        assert!(matches!(
            RouteModel::build(&g, &d, 0.5, 10, &ideal()),
            Err(RouteError::Channel(_))
        ));
    }

    #[test]
    fn one_ring_deterministic_chain() {
        let g = Grid::build(1, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 1.0, 1, &ideal()).unwrap();
        for s in g.sources() {
            assert_eq!(m.hops_from(s).unwrap(), 1.0);
            assert_eq!(m.p_d_from(s).unwrap(), 1.0);
        }
        let a = m.mean_access();
        assert!((a.p_d - 1.0).abs() < 1e-12 && a.p_nr.abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            m.simulate_walk(3, &mut rng).unwrap(),
            (Absorbing::Destination, 1)
        );
    }

    #[test]
    fn straight_line_hops_on_larger_grid() {
        let g = Grid::build(4, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 1.0, 1, &ideal()).unwrap();
        for c in g.cells().iter().skip(1) {
            assert_eq!(m.hops_from(c.index).unwrap(), c.ring as f64);
        }
    }

    #[test]
    fn no_channel_means_no_route() {
        let g = Grid::build(3, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteTopology::new(&g, &d)
            .unwrap()
            .model_with_gain(0.6, 1, 0.0)
            .unwrap();
        let a = m.mean_access();
        assert!((a.p_nr - 1.0).abs() < 1e-12);
        assert!(m.expected_hops().iter().all(|&t| t == 1.0));
    }

    #[test]
    fn rows_are_stochastic_and_match_eq2() {
        let g = Grid::build(4, 1.0, 7).unwrap();
        let d = DestinationSet::new(&g, [0, 25, 44]).unwrap();
        let stats = typical();
        let m = RouteModel::build(&g, &d, 0.7, 3, &stats).unwrap();
        assert_eq!(m.dimension(), m.transient_count() + 2);
        let q = m.q();
        let r = m.r_abs();
        for (i, &cell) in m.transient_cells().iter().enumerate() {
            let row: f64 = q.row(i).iter().sum::<f64>() + r.get(i, 0) + r.get(i, 1);
            assert!((row - 1.0).abs() < 1e-10);
            let t = transition_probabilities(&g, &d, cell, 0.7, 3, &stats).unwrap();
            let mut to_d = 0.0;
            for &(n, w) in &t.relays {
                if d.contains(n) {
                    to_d += w;
                } else {
                    let j = m.slot_of(n).unwrap();
                    assert!((q.get(i, j) - w).abs() < 1e-15);
                }
            }
            assert!((r.get(i, 0) - to_d).abs() < 1e-15);
            assert!((r.get(i, 1) - t.p0).abs() < 1e-15);
        }
        let canon = m.canonical();
        for i in 0..canon.rows() {
            assert!((canon.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fundamental_matrix_identities() {
        let g = Grid::build(3, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 0.4, 2, &typical()).unwrap();
        let nf = m.fundamental().unwrap();
        let n = m.transient_count();
        let iq = DenseMatrix::identity(n).sub(m.q()).unwrap();
        let resid = nf.matmul(&iq).unwrap().sub(&DenseMatrix::identity(n)).unwrap();
        assert!(resid.norm_inf() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert!(nf.get(i, j) >= -1e-12);
            }
            let tau: f64 = nf.row(i).iter().sum();
            assert!((tau - m.expected_hops()[i]).abs() < 1e-9);
            assert!(m.expected_hops()[i] >= 1.0);
            let e = m.absorption();
            assert!((e.get(i, 0) + e.get(i, 1) - 1.0).abs() < 1e-10);
        }
        let twice = m.expected_time(&vec![2.0; n]).unwrap();
        assert!((twice[0] - 2.0 * m.expected_hops()[0]).abs() < 1e-9);
        assert!(m.expected_time(&[1.0]).is_err());
    }

    #[test]
    fn distribution_validation() {
        let g = Grid::build(2, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 0.5, 1, &typical()).unwrap();
        assert!(m.access(&[1.0]).is_err());
        let mut f = vec![0.0; m.transient_count()];
        f[0] = 0.5;
        assert!(m.access(&f).is_err());
        assert_eq!(m.slot_of(0), Err(RouteError::NotTransient(0)));
    }

    #[test]
    fn walk_is_seed_deterministic() {
        let g = Grid::build(4, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 0.3, 2, &typical()).unwrap();
        let corner = g.index_of(Axial::new(4, -4)).unwrap();
        let run = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..50)
                .map(|_| m.simulate_walk(corner, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        let f = m.uniform_sources();
        assert_eq!(
            m.monte_carlo(&f, 10_000, 5).unwrap(),
            m.monte_carlo(&f, 10_000, 5).unwrap()
        );
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let g = Grid::build(4, 1.0, 7).unwrap();
        let d = DestinationSet::base_station(&g);
        let m = RouteModel::build(&g, &d, 0.5, 2, &typical()).unwrap();
        let exact = m.mean_access();
        let mc = m.monte_carlo(&m.uniform_sources(), 100_000, 17).unwrap();
        assert!((mc.tau / exact.tau - 1.0).abs() < 0.02);
        assert!((mc.p_d / exact.p_d - 1.0).abs() < 0.02);
    }

    #[test]
    fn multisession_edges() {
        assert_eq!(
            multisession_adjust(0.6, &[4], 0, 60, 1, SessionMode::Contention).unwrap(),
            0.6
        );
        assert_eq!(
            multisession_adjust(0.6, &[4, 5], 0, 60, 3, SessionMode::Backup).unwrap(),
            0.6
        );
        let p = multisession_adjust(0.5, &[3, 7, 11], 0, 60, 1, SessionMode::Contention).unwrap();
        assert!((p - 0.5 * (1.0 - 6.0 / 60.0) * (1.0 - 10.0 / 60.0)).abs() < 1e-15);
        assert!(multisession_adjust(0.5, &[62], 0, 60, 1, SessionMode::Backup).is_err());
        assert!(multisession_adjust(0.5, &[], 0, 60, 1, SessionMode::Backup).is_err());
    }

    #[test]
    fn contention_by_enumeration() {
        let (m, b, q) = (5u32, 2u32, 0.1f64);
        let mut brute = 0.0;
        for mask in 0u32..(1 << m) {
            let k = mask.count_ones();
            if k >= b {
                brute += q.powi(k as i32) * (1.0 - q).powi((m - k) as i32);
            }
        }
        assert!((contention_probability(m, b, q) - brute).abs() < 1e-15);
        let lengths = [7u32; 5];
        let p = multisession_adjust(0.8, &lengths, 2, 60, 2, SessionMode::Backup).unwrap();
        assert!((p - 0.8 * (1.0 - brute)).abs() < 1e-15);
    }
}
