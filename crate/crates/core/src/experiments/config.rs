//! Scenario files: one TOML document with flat sections.
//!
//! Every key has a default, so an empty file is a valid scenario. Unknown
//! keys are rejected, and parse errors name the offending key path.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::auction::{Acceptance, AuctionConfig, DgroupConfig, DgroupPayment, GroupRule};
use crate::capacity::RadioConfig;
use crate::channel::{ChannelStats, ReturnModel};
use crate::learning::RlScenario;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSection,
    pub radio: RadioSection,
    pub channels: ChannelSection,
    pub qos: QosSection,
    pub route: RouteSection,
    pub auction: AuctionSection,
    pub dgroup: DgroupSection,
    pub rl: RlSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Rings `H` around the base station.
    pub rings: u32,
    /// Subcell radius in meters.
    pub subcell_radius: f64,
    /// Reuse cluster size `K`.
    pub reuse: u32,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            rings: 4,
            subcell_radius: 126.0,
            reuse: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    /// Transmit power in watts.
    pub power: f64,
    pub path_loss: f64,
    /// Noise power in watts.
    pub noise: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let r = RadioConfig::default();
        Self {
            power: r.power,
            path_loss: r.alpha,
            noise: r.noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    /// Use `p_return` directly.
    Fixed,
    /// Derive it from `return_rate` and `dwell`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Channels `c` per subcell.
    pub total: u32,
    /// Channels `n` held by the PU.
    pub pu_occupied: u32,
    /// Offered SU load `rho` in Erlangs.
    pub load: f64,
    pub return_model: ReturnKind,
    pub p_return: f64,
    /// PU arrivals per slot.
    pub return_rate: f64,
    /// Hop dwell in slots.
    pub dwell: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            total: 10,
            pu_occupied: 1,
            load: 2.0,
            return_model: ReturnKind::Fixed,
            p_return: 0.1,
            return_rate: 0.1,
            dwell: 1.0,
        }
    }
}

/// Range for the uniform per-user QoS draw, in slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosSection {
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for QosSection {
    fn default() -> Self {
        Self {
            tau_min: 7.0,
            tau_max: 49.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteSection {
    /// Spacing of the relay availability grid the bidders search.
    pub p_step: f64,
    /// Extra destinations per source subcell, besides the base station.
    pub destination_density: f64,
    /// Operating point reported with every scenario run.
    pub p: f64,
    pub b: u32,
    /// Availability values for route analysis.
    pub p_values: Vec<f64>,
}

impl Default for RouteSection {
    fn default() -> Self {
        Self {
            p_step: 0.05,
            destination_density: 0.1,
            p: 0.7,
            b: 3,
            p_values: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Ijbit,
    Sgroup,
    Dgroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupRuleName {
    Revenue,
    LargestFeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionSection {
    pub scheme: SchemeName,
    pub delta: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Potential winners `M` per round.
    pub winners: usize,
    pub beta_init: f64,
    pub theta_init: f64,
    pub penalty_scale: f64,
    pub max_revisions: usize,
    /// Currency units per unit of raw valuation.
    pub value_scale: f64,
    pub group_rule: GroupRuleName,
    /// Fixed number of winning groups; unset means the rule picks it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<u32>,
}

impl Default for AuctionSection {
    fn default() -> Self {
        let a = AuctionConfig::default();
        Self {
            scheme: SchemeName::Ijbit,
            delta: a.delta,
            epsilon: a.epsilon,
            iterations: a.iterations,
            winners: a.winners,
            beta_init: a.beta_init,
            theta_init: a.theta_init,
            penalty_scale: a.penalty_scale,
            max_revisions: a.max_revisions,
            value_scale: 1000.0,
            group_rule: GroupRuleName::Revenue,
            groups: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceMode {
    Online,
}

/// `"online"` or a fixed probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AcceptanceSetting {
    Fixed(f64),
    Mode(AcceptanceMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaymentName {
    Arrival,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgroupSection {
    /// Window end `T`.
    pub duration: f64,
    pub arrival_rate: f64,
    /// Price at `t = 1`. Unset means: calibrate so the closing price per
    /// channel equals `price_fraction` times the i-JBiT clearing price per
    /// channel on the same instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_price: Option<f64>,
    pub price_fraction: f64,
    pub acceptance: AcceptanceSetting,
    pub payment: PaymentName,
}

impl Default for DgroupSection {
    fn default() -> Self {
        Self {
            duration: 3.0,
            arrival_rate: 30.0,
            initial_price: None,
            price_fraction: 1.0,
            acceptance: AcceptanceSetting::Mode(AcceptanceMode::Online),
            payment: PaymentName::Final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlSection {
    pub beta_t: f64,
    pub beta_u: f64,
    /// Automaton step size.
    pub delta_la: f64,
    pub iterations: usize,
    /// Demand per ring, innermost first.
    pub demand: Vec<u32>,
    /// QoS bound per ring, innermost first.
    pub tau_max: Vec<f64>,
    /// Winners per round; unset means a third of the sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winners: Option<usize>,
    pub theta_init: f64,
}

impl Default for RlSection {
    fn default() -> Self {
        let s = RlScenario::balanced();
        Self {
            beta_t: s.beta_t,
            beta_u: s.beta_u,
            delta_la: s.step,
            iterations: s.iterations,
            demand: s.demand,
            tau_max: s.tau_max,
            winners: s.winners,
            theta_init: s.theta_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Monte Carlo repetitions.
    pub repetitions: usize,
    /// Root seed; repetition `r` uses `seed + r`.
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            repetitions: 100,
            seed: 1,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parse and validate a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ExperimentError> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.to_string()))?;
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path == "." { "" } else { &path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let check = |ok: bool, path: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(config_error(path, msg))
            }
        };
        check(self.grid.rings >= 1, "grid.rings", "must be at least 1")?;
        check(
            self.grid.subcell_radius > 0.0 && self.grid.subcell_radius.is_finite(),
            "grid.subcell_radius",
            "must be positive",
        )?;
        self.radio()?;
        let stats = self.channel_stats()?;
        check(
            self.qos.tau_min > 0.0 && self.qos.tau_min.is_finite(),
            "qos.tau_min",
            "must be positive",
        )?;
        check(
            self.qos.tau_max >= self.qos.tau_min && self.qos.tau_max.is_finite(),
            "qos.tau_max",
            "must be finite and at least qos.tau_min",
        )?;
        check(
            self.route.p_step > 0.0 && self.route.p_step <= 1.0,
            "route.p_step",
            "must lie in (0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.route.destination_density),
            "route.destination_density",
            "must lie in [0, 1]",
        )?;
        check(
            self.route.p > 0.0 && self.route.p <= 1.0,
            "route.p",
            "must lie in (0, 1]",
        )?;
        check(
            (1..=stats.max_demand()).contains(&self.route.b),
            "route.b",
            "must lie in 1..=c-n",
        )?;
        check(
            self.route.p_values.iter().all(|&p| p > 0.0 && p <= 1.0),
            "route.p_values",
            "every value must lie in (0, 1]",
        )?;
        check(
            self.auction.value_scale > 0.0 && self.auction.value_scale.is_finite(),
            "auction.value_scale",
            "must be positive",
        )?;
        if let Some(s) = self.auction.groups {
            check(
                (1..=self.grid.reuse).contains(&s),
                "auction.groups",
                "must lie in 1..=K",
            )?;
        }
        if let Some(p) = self.dgroup.initial_price {
            check(
                p >= 0.0 && p.is_finite(),
                "dgroup.initial_price",
                "must be nonnegative",
            )?;
        }
        check(
            self.dgroup.price_fraction >= 0.0 && self.dgroup.price_fraction.is_finite(),
            "dgroup.price_fraction",
            "must be nonnegative",
        )?;
        self.auction_config(1.0)
            .validate()
            .map_err(|e| config_error("auction", e.to_string()))?;
        self.rl_scenario()
            .validate(self.grid.rings as usize)
            .map_err(|e| config_error("rl", e.to_string()))?;
        check(self.run.repetitions >= 1, "run.repetitions", "must be at least 1")?;
        Ok(())
    }

    pub fn radio(&self) -> Result<RadioConfig, ExperimentError> {
        RadioConfig::new(self.radio.power, self.radio.path_loss, self.radio.noise)
            .map_err(|e| config_error("radio", e.to_string()))
    }

    pub fn return_model(&self) -> ReturnModel {
        match self.channels.return_model {
            ReturnKind::Fixed => ReturnModel::Fixed(self.channels.p_return),
            ReturnKind::Exponential => ReturnModel::Exponential {
                rate: self.channels.return_rate,
                dwell: self.channels.dwell,
            },
        }
    }

    pub fn channel_stats(&self) -> Result<ChannelStats, ExperimentError> {
        let c = &self.channels;
        ChannelStats::new(c.total, c.pu_occupied, c.load, self.return_model())
            .map_err(|e| config_error("channels", e.to_string()))
    }

    /// Auction settings with the given dgroup opening price.
    pub fn auction_config(&self, initial_price: f64) -> AuctionConfig {
        let a = &self.auction;
        let d = &self.dgroup;
        AuctionConfig {
            delta: a.delta,
            epsilon: a.epsilon,
            iterations: a.iterations,
            winners: a.winners,
            beta_init: a.beta_init,
            theta_init: a.theta_init,
            penalty_scale: a.penalty_scale,
            max_revisions: a.max_revisions,
            group_rule: match a.group_rule {
                GroupRuleName::Revenue => GroupRule::RevenueArgmax,
                GroupRuleName::LargestFeasible => GroupRule::LargestFeasible,
            },
            dgroup: DgroupConfig {
                duration: d.duration,
                arrival_rate: d.arrival_rate,
                initial_price,
                acceptance: match d.acceptance {
                    AcceptanceSetting::Fixed(p) => Acceptance::Fixed(p),
                    AcceptanceSetting::Mode(AcceptanceMode::Online) => Acceptance::Online,
                },
                payment: match d.payment {
                    PaymentName::Arrival => DgroupPayment::Arrival,
                    PaymentName::Final => DgroupPayment::Final,
                },
            },
        }
    }

    pub fn rl_scenario(&self) -> RlScenario {
        let r = &self.rl;
        RlScenario {
            beta_t: r.beta_t,
            beta_u: r.beta_u,
            step: r.delta_la,
            iterations: r.iterations,
            demand: r.demand.clone(),
            tau_max: r.tau_max.clone(),
            winners: r.winners,
            theta_init: r.theta_init,
            penalty_scale: self.auction.penalty_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let err = parse_config("[auction]\nwinners = \"many\"\n").unwrap_err();
        match err {
            ExperimentError::Config { path, .. } => assert_eq!(path, "auction.winners"),
            e => panic!("unexpected {e}"),
        }
        let err = parse_config("[grid]\nrings = 4\ncolour = 3\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Config { ref path, .. } if path == "grid.colour"));
        let err = parse_config("[qos]\ntau_min = 9.0\ntau_max = 3.0\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Config { ref path, .. } if path == "qos.tau_max"));
        let err = parse_config("[run]\nrepetitions = 0\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Config { ref path, .. } if path == "run.repetitions"));
    }

    #[test]
    fn acceptance_forms() {
        let cfg = parse_config("[dgroup]\nacceptance = 0.4\npayment = \"arrival\"\n").unwrap();
        let a = cfg.auction_config(2.0);
        assert_eq!(a.dgroup.acceptance, Acceptance::Fixed(0.4));
        assert_eq!(a.dgroup.payment, DgroupPayment::Arrival);
        assert_eq!(a.dgroup.initial_price, 2.0);
        let cfg = parse_config("[dgroup]\nacceptance = \"online\"\n").unwrap();
        assert_eq!(cfg.auction_config(1.0).dgroup.acceptance, Acceptance::Online);
        assert!(parse_config("[dgroup]\nacceptance = \"sometimes\"\n").is_err());
        assert!(parse_config("[dgroup]\nacceptance = 1.5\n").is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = ScenarioConfig::default();
        cfg.auction.groups = Some(3);
        cfg.auction.scheme = SchemeName::Sgroup;
        cfg.channels.return_model = ReturnKind::Exponential;
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
