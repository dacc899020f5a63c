//! One-axis parameter sweeps over a scenario file.

use rayon::prelude::*;
use toml::{Table, Value};

use super::config::{parse_config, ScenarioConfig};
use super::scenario::run_scenario;
use super::ExperimentError;

/// Keys that are valid although absent from a fully expanded config.
const OPTIONAL_KEYS: [&str; 3] = ["auction.groups", "dgroup.initial_price", "rl.winners"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: String,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
}

/// Read a command-line value as a TOML integer, float, boolean or string.
pub fn parse_axis_value(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(raw.to_string())
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Copy of `base` with the dotted key `axis` set to `value`.
fn with_value(base: &Table, axis: &str, value: &Value) -> Result<Table, ExperimentError> {
    let unknown = || ExperimentError::UnknownAxis(axis.to_string());
    let mut table = base.clone();
    let (parents, key) = match axis.rsplit_once('.') {
        Some((p, k)) => (p.split('.').collect::<Vec<_>>(), k),
        None => (Vec::new(), axis),
    };
    let mut cur = &mut table;
    for p in parents {
        cur = cur
            .get_mut(p)
            .and_then(Value::as_table_mut)
            .ok_or_else(unknown)?;
    }
    let value = match (cur.get(key), value) {
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(*i as f64),
        (Some(Value::Table(_)), _) => return Err(unknown()),
        (Some(_), v) => v.clone(),
        (None, v) if OPTIONAL_KEYS.contains(&axis) => v.clone(),
        (None, _) => return Err(unknown()),
    };
    cur.insert(key.to_string(), value);
    Ok(table)
}

/// Run the scenario once per value of `axis`, in parallel, and return the
/// aggregate metrics in input order.
pub fn sweep(
    base: &ScenarioConfig,
    axis: &str,
    values: &[Value],
) -> Result<Vec<SweepRow>, ExperimentError> {
    let expanded = Table::try_from(base).map_err(|e| ExperimentError::Config {
        path: String::new(),
        message: e.to_string(),
    })?;
    let configs = values
        .iter()
        .map(|v| {
            let table = with_value(&expanded, axis, v)?;
            let text = toml::to_string(&table).map_err(|e| ExperimentError::Config {
                path: axis.to_string(),
                message: e.to_string(),
            })?;
            Ok((render(v), parse_config(&text)?))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let runs = configs
        .par_iter()
        .map(|(_, cfg)| run_scenario(cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(configs
        .iter()
        .zip(runs)
        .flat_map(|((label, _), run)| {
            run.stats.into_iter().map(move |s| SweepRow {
                axis_value: label.clone(),
                metric: s.metric,
                mean: s.mean,
                std: s.std,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.grid.rings = 2;
        cfg.auction.winners = 6;
        cfg.run.repetitions = 2;
        cfg.rl.demand = vec![1, 2];
        cfg.rl.tau_max = vec![28.0; 2];
        cfg
    }

    #[test]
    fn values_parse_by_shape() {
        assert_eq!(parse_axis_value("3"), Value::Integer(3));
        assert_eq!(parse_axis_value("0.5"), Value::Float(0.5));
        assert_eq!(parse_axis_value("true"), Value::Boolean(true));
        assert_eq!(parse_axis_value("sgroup"), Value::String("sgroup".into()));
    }

    #[test]
    fn empty_values_give_no_rows() {
        assert!(sweep(&small(), "route.p", &[]).unwrap().is_empty());
    }

    #[test]
    fn unknown_axes_are_rejected() {
        for axis in ["route.q", "nothing.p", "route", "route.p.x"] {
            let err = sweep(&small(), axis, &[Value::Float(0.5)]).unwrap_err();
            assert!(matches!(err, ExperimentError::UnknownAxis(_)), "{axis}: {err}");
        }
        let err = sweep(&small(), "route.p", &[Value::Float(2.0)]).unwrap_err();
        assert!(matches!(err, ExperimentError::Config { ref path, .. } if path == "route.p"));
    }

    #[test]
    fn point_matches_direct_run() {
        let base = small();
        let rows = sweep(&base, "route.p", &[Value::Float(0.4), Value::Integer(1)]).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.axis_value.as_str()).collect();
        assert_eq!(labels.iter().filter(|&&l| l == "0.4").count(), rows.len() / 2);
        assert_eq!(labels[rows.len() / 2], "1");
        let mut direct = base.clone();
        direct.route.p = 0.4;
        let run = run_scenario(&direct).unwrap();
        for s in run.stats {
            let row = rows.iter().find(|r| r.axis_value == "0.4" && r.metric == s.metric).unwrap();
            assert_eq!((row.mean, row.std), (s.mean, s.std));
        }
    }

    #[test]
    fn optional_keys_can_be_swept() {
        let mut base = small();
        base.auction.scheme = super::super::config::SchemeName::Sgroup;
        let rows = sweep(&base, "auction.groups", &[Value::Integer(2)]).unwrap();
        let g = rows.iter().find(|r| r.metric == "groups").unwrap();
        assert_eq!(g.mean, 2.0);
    }
}
