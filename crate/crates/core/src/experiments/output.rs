//! CSV writers. Every writer emits its header even when there are no rows.
//!
//! | file | columns |
//! |---|---|
//! | trace | scheme, seed, t, bidder, bid, tip, b_star, p_star, price_c, price_q, utility, winner_flag |
//! | summary | scheme, seed, winners, S, revenue, clearing_price |
//! | stats | metric, mean, std |
//! | route | p, b, tau_mean, p_D, p_nr |
//! | efficiency | rings, b, eta_jbit, eta_greedy |
//! | eta | metric, key, value |
//! | rl | iteration, truthful_pct, untruthful_pct |
//! | rl utilities | subcell, U_m |
//! | sweep | axis_value, metric, mean, std |

use std::io::Write;

use serde::Serialize;

use super::config::SchemeName;
use super::efficiency::{Efficiency, EfficiencyRow};
use super::scenario::{MetricSummary, RepetitionResult, RouteRow};
use super::sweep::SweepRow;
use super::ExperimentError;
use crate::learning::RlRun;

fn scheme_name(s: SchemeName) -> &'static str {
    match s {
        SchemeName::Ijbit => "ijbit",
        SchemeName::Sgroup => "sgroup",
        SchemeName::Dgroup => "dgroup",
    }
}

fn write_rows<W: Write, H: Serialize, R: Serialize>(
    out: W,
    header: H,
    rows: impl IntoIterator<Item = R>,
) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.serialize(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-round trace of every repetition. `bidder` is the bidder index and
/// `winner_flag` marks bidders that would win if the auction closed after
/// that round.
pub fn write_trace<W: Write>(
    out: W,
    scheme: SchemeName,
    reps: &[RepetitionResult],
) -> Result<(), ExperimentError> {
    let header = [
        "scheme",
        "seed",
        "t",
        "bidder",
        "bid",
        "tip",
        "b_star",
        "p_star",
        "price_c",
        "price_q",
        "utility",
        "winner_flag",
    ];
    let name = scheme_name(scheme);
    let rows = reps.iter().flat_map(|rep| {
        rep.outcome.trace.iter().map(move |r| {
            (
                name,
                rep.seed,
                r.t,
                r.bidder,
                r.bid,
                r.tip,
                r.b_star,
                r.p_star,
                r.price_c,
                r.price_q,
                r.utility,
                u8::from(r.winner),
            )
        })
    });
    write_rows(out, header, rows)
}

/// One row per repetition; `S` is empty unless groups were formed.
pub fn write_summary<W: Write>(
    out: W,
    scheme: SchemeName,
    reps: &[RepetitionResult],
) -> Result<(), ExperimentError> {
    let header = ["scheme", "seed", "winners", "S", "revenue", "clearing_price"];
    let name = scheme_name(scheme);
    let rows = reps.iter().map(|rep| {
        (
            name,
            rep.seed,
            rep.outcome.winner_count(),
            rep.outcome.groups,
            rep.outcome.revenue,
            rep.outcome.clearing_price,
        )
    });
    write_rows(out, header, rows)
}

pub fn write_stats<W: Write>(out: W, stats: &[MetricSummary]) -> Result<(), ExperimentError> {
    let rows = stats.iter().map(|s| (s.metric, s.mean, s.std));
    write_rows(out, ["metric", "mean", "std"], rows)
}

pub fn write_route<W: Write>(out: W, rows: &[RouteRow]) -> Result<(), ExperimentError> {
    let header = ["p", "b", "tau_mean", "p_D", "p_nr"];
    let rows = rows.iter().map(|r| (r.p, r.b, r.tau_mean, r.p_d, r.p_nr));
    write_rows(out, header, rows)
}

pub fn write_efficiency<W: Write>(out: W, rows: &[EfficiencyRow]) -> Result<(), ExperimentError> {
    let header = ["rings", "b", "eta_jbit", "eta_greedy"];
    let rows = rows.iter().map(|r| (r.rings, r.b, r.jbit, r.greedy));
    write_rows(out, header, rows)
}

/// Long format: `eta_bid` keyed by `b`, `eta_tip` keyed by `p`, and one
/// `eta_jbit` row with an empty key.
pub fn write_eta<W: Write>(
    out: W,
    p_grid: &[f64],
    eta: &Efficiency,
) -> Result<(), ExperimentError> {
    let mut rows: Vec<(&str, Option<f64>, f64)> = vec![("eta_jbit", None, eta.jbit)];
    rows.extend(
        eta.bid
            .iter()
            .enumerate()
            .map(|(i, &v)| ("eta_bid", Some(i as f64 + 1.0), v)),
    );
    rows.extend(
        p_grid
            .iter()
            .zip(&eta.tip)
            .map(|(&p, &v)| ("eta_tip", Some(p), v)),
    );
    write_rows(out, ["metric", "key", "value"], rows)
}

/// Iterations are numbered from 1.
pub fn write_rl<W: Write>(out: W, run: &RlRun) -> Result<(), ExperimentError> {
    let header = ["iteration", "truthful_pct", "untruthful_pct"];
    let rows = run
        .truthful_pct
        .iter()
        .zip(&run.untruthful_pct)
        .enumerate()
        .map(|(i, (&t, &u))| (i + 1, t, u));
    write_rows(out, header, rows)
}

pub fn write_rl_utilities<W: Write>(out: W, run: &RlRun) -> Result<(), ExperimentError> {
    let rows = run.cells.iter().zip(&run.utilities).map(|(&c, &u)| (c, u));
    write_rows(out, ["subcell", "U_m"], rows)
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), ExperimentError> {
    let header = ["axis_value", "metric", "mean", "std"];
    let rows = rows
        .iter()
        .map(|r| (r.axis_value.as_str(), r.metric, r.mean, r.std));
    write_rows(out, header, rows)
}
