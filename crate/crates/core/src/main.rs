use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mc2n::experiments::{
    efficiency_comparison, efficiency_metrics, parse_axis_value, parse_config, route_analysis,
    run_rl, run_scenario, sweep, write_efficiency, write_eta, write_rl, write_rl_utilities,
    write_route, write_stats, write_summary, write_sweep, write_trace, ExperimentError,
    ScenarioConfig, SchemeName,
};

/// Multi-hop cognitive cellular network experiments.
#[derive(Debug, Parser)]
#[command(name = "mc2n", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Ijbit,
    Sgroup,
    Dgroup,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Route chain over the p and b grid, plus efficiency versus the greedy
    /// comparator for every network size up to `grid.rings`.
    RouteAnalysis(Common),
    /// Monte Carlo runs of one auction scheme.
    Auction {
        scheme: SchemeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Learning-automata bidders.
    Rl(Common),
    /// One scenario run per value of a config key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config key, e.g. `auction.groups`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; empty means a header-only CSV.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig, ExperimentError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, ExperimentError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io { path, source })
}

fn prepare(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::RouteAnalysis(common) => {
            let cfg = load(&common)?;
            prepare(&common.out)?;
            let ra = route_analysis(&cfg)?;
            write_route(create(&common.out, "route.csv")?, &ra.rows)?;
            let mut ps = cfg.route.p_values.clone();
            ps.sort_by(f64::total_cmp);
            ps.dedup();
            let max_b = ra.rows.iter().map(|r| r.b).max().unwrap_or(0);
            let table: Vec<Vec<f64>> = (1..=max_b)
                .map(|b| {
                    ps.iter()
                        .map(|&p| {
                            ra.rows
                                .iter()
                                .find(|r| r.b == b && r.p == p)
                                .map_or(0.0, |r| r.p_d)
                        })
                        .collect()
                })
                .collect();
            write_eta(
                create(&common.out, "eta.csv")?,
                &ps,
                &efficiency_metrics(&ps, &table)?,
            )?;
            let rings: Vec<u32> = (cfg.grid.rings.min(2)..=cfg.grid.rings).collect();
            let rows = efficiency_comparison(&cfg, &rings)?;
            write_efficiency(create(&common.out, "efficiency.csv")?, &rows)?;
            eprintln!(
                "per-source expected hops span {:.3} to {:.3}",
                ra.hop_min, ra.hop_max
            );
        }
        Command::Auction { scheme, common } => {
            let mut cfg = load(&common)?;
            cfg.auction.scheme = match scheme {
                SchemeArg::Ijbit => SchemeName::Ijbit,
                SchemeArg::Sgroup => SchemeName::Sgroup,
                SchemeArg::Dgroup => SchemeName::Dgroup,
            };
            prepare(&common.out)?;
            let run = run_scenario(&cfg)?;
            write_trace(create(&common.out, "trace.csv")?, run.scheme, &run.reps)?;
            write_summary(create(&common.out, "summary.csv")?, run.scheme, &run.reps)?;
            write_stats(create(&common.out, "stats.csv")?, &run.stats)?;
        }
        Command::Rl(common) => {
            let cfg = load(&common)?;
            prepare(&common.out)?;
            let run = run_rl(&cfg)?;
            write_rl(create(&common.out, "rl.csv")?, &run)?;
            write_rl_utilities(create(&common.out, "rl_utilities.csv")?, &run)?;
            match run.converged_at {
                Some(t) => eprintln!("converged after iteration {t}"),
                None => eprintln!("did not converge"),
            }
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let cfg = load(&common)?;
            let values: Vec<_> = values
                .iter()
                .filter(|v| !v.trim().is_empty())
                .map(|v| parse_axis_value(v))
                .collect();
            prepare(&common.out)?;
            let rows = sweep(&cfg, &axis, &values)?;
            write_sweep(create(&common.out, "sweep.csv")?, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
