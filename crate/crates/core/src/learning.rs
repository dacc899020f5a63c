//! Learning-automata bidders.
//!
//! Each agent holds two fixed bid fractions, truthful `beta_t` and shaded
//! `beta_u < beta_t`, and learns which one to use from the utilities it
//! realizes in repeated sealed-bid rounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bidding::{
    bid_amount, optimize_relaying, tip_amount, BiddingError, RouteAtlas, SearchConfig, Strategy,
    ValuationContext,
};
use crate::hexgrid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("step size must lie in (0, 1), got {0}")]
    BadStep(f64),
    #[error("shaded fraction {beta_u} must be below truthful fraction {beta_t}")]
    BadFractions { beta_t: f64, beta_u: f64 },
    #[error("scenario needs one entry per ring ({rings}), got {got}")]
    RingCount { rings: usize, got: usize },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Truthful,
    Untruthful,
}

/// Action probabilities plus what the agent last saw from each action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LAState {
    pub p_t: f64,
    pub p_u: f64,
    pub step: f64,
    pub last_action: Option<Action>,
    pub last_truthful: Option<f64>,
    pub last_untruthful: Option<f64>,
}

impl LAState {
    /// Even odds.
    pub fn new(step: f64) -> Result<Self, LearningError> {
        if !(step > 0.0 && step < 1.0) {
            return Err(LearningError::BadStep(step));
        }
        Ok(Self {
            p_t: 0.5,
            p_u: 0.5,
            step,
            last_action: None,
            last_truthful: None,
            last_untruthful: None,
        })
    }

    pub fn used_both(&self) -> bool {
        self.last_truthful.is_some() && self.last_untruthful.is_some()
    }

    /// Record the utility realized with `action`.
    pub fn observe(&mut self, action: Action, utility: f64) {
        self.last_action = Some(action);
        match action {
            Action::Truthful => self.last_truthful = Some(utility),
            Action::Untruthful => self.last_untruthful = Some(utility),
        }
    }

    /// The action whose latest utility is higher; ties go to truthful.
    pub fn preferred(&self) -> Option<Action> {
        match (self.last_truthful, self.last_untruthful) {
            (Some(t), Some(u)) if u > t => Some(Action::Untruthful),
            (Some(_), Some(_)) => Some(Action::Truthful),
            _ => None,
        }
    }
}

/// Reinforce `rewarded`: its probability moves a `step` fraction toward 1
/// and the other shrinks by the factor `1 - step`.
pub fn la_update(state: &LAState, rewarded: Action) -> LAState {
    let d = state.step;
    let mut next = *state;
    match rewarded {
        Action::Untruthful => {
            next.p_u = state.p_u + d * (1.0 - state.p_u);
            next.p_t = state.p_t * (1.0 - d);
        }
        Action::Truthful => {
            next.p_t = state.p_t + d * (1.0 - state.p_t);
            next.p_u = state.p_u * (1.0 - d);
        }
    }
    next
}

pub fn choose_action<R: Rng + ?Sized>(state: &LAState, rng: &mut R) -> Action {
    if rng.random::<f64>() < state.p_t {
        Action::Truthful
    } else {
        Action::Untruthful
    }
}

/// Repeated-auction setup with per-ring demand and QoS.
#[derive(Debug, Clone, PartialEq)]
pub struct RlScenario {
    pub beta_t: f64,
    pub beta_u: f64,
    pub step: f64,
    pub iterations: usize,
    /// Channels requested by sources in ring `h`, index `h - 1`.
    pub demand: Vec<u32>,
    /// QoS bound of sources in ring `h`, index `h - 1`.
    pub tau_max: Vec<f64>,
    /// Winners per round; `None` means a third of the sources.
    pub winners: Option<usize>,
    pub theta_init: f64,
    pub penalty_scale: f64,
}

impl RlScenario {
    /// Same demand everywhere, QoS relaxing outward.
    pub fn restrictive() -> Self {
        Self {
            beta_t: 0.04,
            beta_u: 0.02,
            step: 0.1,
            iterations: 100,
            demand: vec![3; 4],
            tau_max: vec![14.0, 21.0, 28.0, 35.0],
            winners: None,
            theta_init: 0.05,
            penalty_scale: 10.0,
        }
    }

    /// Same QoS everywhere, demand growing outward.
    pub fn balanced() -> Self {
        Self {
            beta_t: 0.02,
            beta_u: 0.01,
            demand: vec![1, 2, 3, 7],
            tau_max: vec![28.0; 4],
            ..Self::restrictive()
        }
    }

    pub fn validate(&self, rings: usize) -> Result<(), LearningError> {
        LAState::new(self.step)?;
        if !(self.beta_u >= 0.0 && self.beta_u < self.beta_t && self.beta_t.is_finite()) {
            return Err(LearningError::BadFractions {
                beta_t: self.beta_t,
                beta_u: self.beta_u,
            });
        }
        for got in [self.demand.len(), self.tau_max.len()] {
            if got != rings {
                return Err(LearningError::RingCount { rings, got });
            }
        }
        if self.iterations == 0 {
            return Err(LearningError::Config("iterations must be at least 1".into()));
        }
        if self.winners == Some(0) {
            return Err(LearningError::Config("winners must be at least 1".into()));
        }
        if !self.tau_max.iter().all(|&t| t > 0.0) {
            return Err(LearningError::Config("tau_max must be positive".into()));
        }
        Ok(())
    }
}

/// Trajectory of one learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct RlRun {
    /// Source subcell of each agent, in grid order.
    pub cells: Vec<usize>,
    /// Share of agents bidding `beta_t` in each iteration.
    pub truthful_pct: Vec<f64>,
    pub untruthful_pct: Vec<f64>,
    /// Utility each agent realized in the last iteration.
    pub utilities: Vec<f64>,
    pub states: Vec<LAState>,
    /// First iteration after which at least 95% of agents hold an action
    /// with probability 0.95 or more.
    pub converged_at: Option<usize>,
}

/// Share of agents whose larger action probability is at least `level`.
pub fn settled_fraction(states: &[LAState], level: f64) -> f64 {
    if states.is_empty() {
        return 1.0;
    }
    let n = states.iter().filter(|s| s.p_t.max(s.p_u) >= level).count();
    n as f64 / states.len() as f64
}

/// Repeated single-round auctions between learning agents.
///
/// Every source of the grid is an agent. Each round an agent fixes `beta`
/// from its action and `theta = 1 - p*` from its previous round, picks the
/// best `p` for its ring's demand, and bids `beta * b * V`. The top `M`
/// positive bids win and pay the highest losing bid; winners realize
/// `V - tip - price`, everyone else 0. Until an agent has tried both
/// actions it alternates, starting truthful on even agent indices.
pub fn run_rl_auction(
    scenario: &RlScenario,
    grid: &Grid,
    atlas: &RouteAtlas,
    ctx: &ValuationContext,
    seed: u64,
) -> Result<RlRun, LearningError> {
    let rings = grid.rings() as usize;
    scenario.validate(rings)?;
    let cells: Vec<usize> = grid.sources().collect();
    let n = cells.len();
    let winners = scenario.winners.unwrap_or(n / 3).clamp(1, n);
    let search = SearchConfig {
        schedule: grid.reuse(),
        penalty_scale: scenario.penalty_scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = vec![LAState::new(scenario.step)?; n];
    let mut theta = vec![scenario.theta_init; n];
    let mut actions: Vec<Action> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                Action::Truthful
            } else {
                Action::Untruthful
            }
        })
        .collect();
    let mut truthful_pct = Vec::with_capacity(scenario.iterations);
    let mut untruthful_pct = Vec::with_capacity(scenario.iterations);
    let mut utilities = vec![0.0; n];
    let mut converged_at = None;

    for it in 1..=scenario.iterations {
        let truthful = actions.iter().filter(|&&a| a == Action::Truthful).count();
        truthful_pct.push(100.0 * truthful as f64 / n as f64);
        untruthful_pct.push(100.0 * (n - truthful) as f64 / n as f64);

        let mut bids = vec![0.0; n];
        let mut nets = vec![0.0; n];
        for (i, &cell) in cells.iter().enumerate() {
            let ring = grid.cells()[cell].ring as usize;
            let beta = match actions[i] {
                Action::Truthful => scenario.beta_t,
                Action::Untruthful => scenario.beta_u,
            };
            let strategy = Strategy::new(beta, theta[i])?;
            let b = scenario.demand[ring - 1];
            let opt = optimize_relaying(
                strategy,
                b,
                cell,
                scenario.tau_max[ring - 1],
                atlas,
                ctx,
                search,
            )?;
            theta[i] = (1.0 - opt.p).clamp(0.0, 1.0);
            if opt.feasible && opt.value > 0.0 {
                bids[i] = bid_amount(beta, opt.b, opt.value);
                nets[i] = opt.value - tip_amount(strategy.theta, opt.tau, opt.value);
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| bids[b].total_cmp(&bids[a]).then(a.cmp(&b)));
        let price = order.get(winners).map_or(0.0, |&m| bids[m]);
        utilities = vec![0.0; n];
        for &m in order.iter().take(winners) {
            if bids[m] > 0.0 {
                utilities[m] = nets[m] - price;
            }
        }

        for i in 0..n {
            states[i].observe(actions[i], utilities[i]);
            actions[i] = if states[i].used_both() {
                if let Some(best) = states[i].preferred() {
                    states[i] = la_update(&states[i], best);
                }
                choose_action(&states[i], &mut rng)
            } else {
                match actions[i] {
                    Action::Truthful => Action::Untruthful,
                    Action::Untruthful => Action::Truthful,
                }
            };
        }
        if converged_at.is_none() && settled_fraction(&states, 0.95) >= 0.95 {
            converged_at = Some(it);
        }
    }

    Ok(RlRun {
        cells,
        truthful_pct,
        untruthful_pct,
        utilities,
        states,
        converged_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::RadioConfig;
    use crate::channel::{ChannelStats, ReturnModel};
    use crate::hexgrid::DestinationSet;
    use crate::routing::RouteTopology;
    use proptest::prelude::*;

    fn state(p_t: f64, step: f64) -> LAState {
        LAState {
            p_t,
            p_u: 1.0 - p_t,
            ..LAState::new(step).unwrap()
        }
    }

    #[test]
    fn update_arithmetic() {
        let s = la_update(&state(0.5, 0.1), Action::Untruthful);
        assert!((s.p_u - 0.55).abs() < 1e-15);
        assert!((s.p_t - 0.45).abs() < 1e-15);
        let s = la_update(&state(0.0, 0.1), Action::Untruthful);
        assert_eq!((s.p_u, s.p_t), (1.0, 0.0));
        let s = la_update(&state(0.5, 0.1), Action::Truthful);
        assert!((s.p_t - 0.55).abs() < 1e-15);
    }

    #[test]
    fn repeated_reward_converges_monotonically() {
        let mut s = state(0.3, 0.1);
        let mut prev = s.p_t;
        for _ in 0..100 {
            s = la_update(&s, Action::Truthful);
            assert!(s.p_t > prev);
            prev = s.p_t;
        }
        // Closed form: 1 - 0.7 * 0.9^100.
        assert!((s.p_t - (1.0 - 0.7 * 0.9f64.powi(100))).abs() < 1e-12);
    }

    #[test]
    fn choice_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!((0..100).all(|_| choose_action(&state(1.0, 0.1), &mut rng) == Action::Truthful));
        assert!((0..100).all(|_| choose_action(&state(0.0, 0.1), &mut rng) == Action::Untruthful));
        let s = state(0.7, 0.1);
        let hits = (0..10_000)
            .filter(|_| choose_action(&s, &mut rng) == Action::Truthful)
            .count();
        assert!((hits as f64 / 1e4 - 0.7).abs() < 0.02);
    }

    #[test]
    fn ties_reward_truthful() {
        let mut s = LAState::new(0.1).unwrap();
        assert_eq!(s.preferred(), None);
        s.observe(Action::Truthful, 0.0);
        s.observe(Action::Untruthful, 0.0);
        assert_eq!(s.preferred(), Some(Action::Truthful));
        s.observe(Action::Untruthful, 0.1);
        assert_eq!(s.preferred(), Some(Action::Untruthful));
    }

    #[test]
    fn scenario_validation() {
        assert!(RlScenario::restrictive().validate(4).is_ok());
        assert!(RlScenario::restrictive().validate(3).is_err());
        let bad = RlScenario {
            beta_u: 0.05,
            ..RlScenario::restrictive()
        };
        assert!(matches!(
            bad.validate(4),
            Err(LearningError::BadFractions { .. })
        ));
        assert!(LAState::new(1.0).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let grid = Grid::build(4, 126.0, 7).unwrap();
        let stats = ChannelStats::new(10, 1, 2.0, ReturnModel::Fixed(0.1)).unwrap();
        let dest = DestinationSet::new(&grid, [0]).unwrap();
        let topo = RouteTopology::new(&grid, &dest).unwrap();
        let atlas = RouteAtlas::build(&topo, &stats, 0.05).unwrap();
        let ctx = ValuationContext::new(&grid, &RadioConfig::default(), &stats, 1000.0).unwrap();
        let sc = RlScenario {
            iterations: 30,
            ..RlScenario::balanced()
        };
        let a = run_rl_auction(&sc, &grid, &atlas, &ctx, 11).unwrap();
        let b = run_rl_auction(&sc, &grid, &atlas, &ctx, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truthful_pct.len(), 30);
        for (t, u) in a.truthful_pct.iter().zip(&a.untruthful_pct) {
            assert!((t + u - 100.0).abs() < 1e-9);
        }
        for s in &a.states {
            assert!((s.p_t + s.p_u - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn simplex_is_preserved(
            p in 0.0f64..=1.0,
            step in 0.001f64..0.999,
            seq in proptest::collection::vec(any::<bool>(), 0..400),
        ) {
            let mut s = state(p, step);
            for truthful in seq {
                let a = if truthful { Action::Truthful } else { Action::Untruthful };
                s = la_update(&s, a);
                prop_assert!((0.0..=1.0).contains(&s.p_t));
                prop_assert!((0.0..=1.0).contains(&s.p_u));
            }
            prop_assert!((s.p_t + s.p_u - 1.0).abs() < 1e-12);
        }
    }
}
