use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::json;

use wlc::analysis::{analyze, build_chain, rational_string, AnalysisConfig};
use wlc::enumeration::{greatest_optimal_ect, CensusConfig, Filter};
use wlc::game::Game;
use wlc::harness::{golden_table, simulate, SimConfig};
use wlc::optimizer::{
    closed_forms::cm_closed_forms, optimal_ect, optimal_gct, uniqueness_probe, OptimizerConfig,
};
use wlc::protocols::protocol_by_name;
use wlc::stage::{initial_stage, parse_trace};
use wlc::symmetry::{focal_points, structural_classes, SymmetryConfig};
use wlc::{catalog, Error};

#[derive(Parser)]
#[command(
    name = "wlc",
    version,
    about = "Coordination times of repeated two-player win-lose games"
)]
struct Cli {
    /// Optimizer convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Cap on explored states.
    #[arg(long, global = true)]
    max_states: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long, global = true)]
    time_budget: Option<u64>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact OSCP, ECT and GCT of a protocol.
    Analyze {
        game: String,
        #[arg(long, default_value = "uniform")]
        protocol: String,
    },
    /// Structural classes and focal points of a stage.
    Classes {
        game: String,
        /// Stage trace file; the initial stage when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Optimal ECT over structural protocols.
    Optimal {
        game: String,
        #[arg(long)]
        gct: bool,
        #[arg(long)]
        probe_uniqueness: bool,
    },
    /// Census of all m-choice games.
    Enumerate {
        m: usize,
        #[arg(long)]
        max_edges: Option<usize>,
        /// Required for m >= 5.
        #[arg(long)]
        deep: bool,
        /// all, nontrivial or maxdeg:<d>.
        #[arg(long, default_value = "nontrivial")]
        filter: String,
        /// Per-game result cache.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the ECT.
    Simulate {
        game: String,
        #[arg(long, default_value = "uniform")]
        protocol: String,
        #[arg(long, default_value_t = 100_000)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_rounds: usize,
    },
    /// Checks the choice-matching reference table.
    Golden {
        #[arg(long, value_delimiter = ',', default_values_t = 1..=9usize)]
        m: Vec<usize>,
    },
    /// Closed forms for CM_m.
    Formulas { m: usize },
}

enum Outcome {
    Pass,
    CheckFailed,
}

fn load_game(spec: &str) -> wlc::Result<Game> {
    if let Some(g) = catalog::by_name(spec) {
        return Ok(g);
    }
    if Path::new(spec).exists() {
        return Game::load(spec);
    }
    Err(Error::InvalidArgument(format!(
        "{spec} is neither a file nor a builtin game (cm:<m>, z, c6, d3:<i>, d4)"
    )))
}

fn parse_filter(s: &str) -> wlc::Result<Filter> {
    match s {
        "all" => Ok(Filter::All),
        "nontrivial" => Ok(Filter::Nontrivial),
        _ => s
            .strip_prefix("maxdeg:")
            .and_then(|d| d.parse().ok())
            .map(Filter::MaxDegree)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown filter {s}"))),
    }
}

fn write_out(out: &Option<PathBuf>, name: &str, text: &str) -> wlc::Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> wlc::Result<Outcome> {
    let symmetry = SymmetryConfig::default();
    let mut opt_cfg = OptimizerConfig {
        tol: cli.tol,
        symmetry,
        time_budget: cli.time_budget.map(Duration::from_secs),
        ..OptimizerConfig::default()
    };
    let mut an_cfg = AnalysisConfig {
        symmetry,
        ..AnalysisConfig::default()
    };
    if let Some(n) = cli.max_states {
        opt_cfg.max_states = n;
        an_cfg.max_states = n;
    }
    match &cli.command {
        Command::Analyze { game, protocol } => {
            let g = load_game(game)?;
            let pr = protocol_by_name(protocol, symmetry)?;
            let report = analyze(&g, pr.as_ref(), &an_cfg)?;
            if cli.json {
                println!("{}", report.to_json());
            } else {
                println!("{report}");
            }
            if cli.out.is_some() {
                write_out(
                    &cli.out,
                    "chain.json",
                    &build_chain(&g, pr.as_ref(), &an_cfg)?.dump_json(),
                )?;
            }
        }
        Command::Classes { game, trace } => {
            let g = load_game(game)?;
            let stage = match trace {
                Some(p) => parse_trace(&std::sync::Arc::new(g.clone()), &fs::read_to_string(p)?)?,
                None => initial_stage(&g),
            };
            let classes = structural_classes(&stage, &symmetry)?;
            let focal: Vec<String> = focal_points(&stage, &symmetry)?
                .iter()
                .map(|c| c.to_string())
                .collect();
            if cli.json {
                println!(
                    "{}",
                    json!({ "classes": classes.dump(&g), "focal_points": focal })
                );
            } else {
                println!("{}", classes.dump(&g));
                println!(
                    "focal points: {}",
                    if focal.is_empty() {
                        "none".into()
                    } else {
                        focal.join(" ")
                    }
                );
            }
        }
        Command::Optimal {
            game,
            gct,
            probe_uniqueness,
        } => {
            let g = load_game(game)?;
            let opt = optimal_ect(&g, &opt_cfg)?;
            let d = &opt.diagnostics;
            let mut report = json!({
                "optimal_ect": opt.value,
                "states": opt.space.len(),
                "iterations": d.iterations,
                "residual": d.residual,
                "monotone": d.monotone,
            });
            if *gct {
                report["optimal_gct"] = json!(optimal_gct(&g, &opt_cfg)?.value.to_string());
            }
            if *probe_uniqueness {
                let probe = uniqueness_probe(&opt, cli.tol.max(1e-9), &opt_cfg)?;
                report["probe"] = json!({ "state": probe.state, "spread": probe.spread, "verdict": format!("{:?}", probe.verdict) });
            }
            if cli.json {
                println!("{report}");
            } else {
                println!(
                    "optimal ECT {:.12} over {} states ({} iterations, residual {:.2e})",
                    opt.value,
                    opt.space.len(),
                    d.iterations,
                    d.residual
                );
                if let Some(v) = report.get("optimal_gct") {
                    println!("optimal GCT {}", v.as_str().unwrap_or("?"));
                }
                if let Some(p) = report.get("probe") {
                    println!(
                        "uniqueness probe at state {}: {} (spread {:.2e})",
                        p["state"],
                        p["verdict"].as_str().unwrap_or("?"),
                        p["spread"].as_f64().unwrap_or(f64::NAN)
                    );
                }
            }
            write_out(
                &cli.out,
                "policy.json",
                &opt.policy_table(&symmetry)?.to_json(),
            )?;
        }
        Command::Enumerate {
            m,
            max_edges,
            deep,
            filter,
            checkpoint,
        } => {
            if *m >= 5 && !deep {
                return Err(Error::InvalidArgument(format!(
                    "enumerating {m}-choice games needs --deep"
                )));
            }
            let base = if *m == 5 {
                CensusConfig::five_choice_reductions()
            } else {
                CensusConfig::default()
            };
            let cfg = CensusConfig {
                filter: parse_filter(filter)?,
                max_edges: *max_edges,
                checkpoint: checkpoint.clone(),
                time_budget: cli.time_budget.map(Duration::from_secs),
                optimizer: opt_cfg,
                ..base
            };
            let best = greatest_optimal_ect(*m, &cfg, 1e-6)?;
            if cli.json {
                println!(
                    "{}",
                    json!({ "m": m, "games": best.census.entries.len(), "greatest": best.value, "witnesses": best.witnesses })
                );
            } else {
                println!(
                    "{} games ({}), greatest optimal ECT {:.9}",
                    best.census.entries.len(),
                    best.census.filter,
                    best.value
                );
                for w in &best.witnesses {
                    println!("  witness {w}");
                }
                if cli.out.is_none() {
                    print!("{}", best.census.to_csv()?);
                }
            }
            if let Some(dir) = &cli.out {
                best.census.write_report(dir)?;
            }
        }
        Command::Simulate {
            game,
            protocol,
            episodes,
            seed,
            max_rounds,
        } => {
            let g = load_game(game)?;
            let pr = protocol_by_name(protocol, symmetry)?;
            let r = simulate(
                &g,
                pr.as_ref(),
                &SimConfig {
                    episodes: *episodes,
                    seed: *seed,
                    max_rounds: *max_rounds,
                },
            )?;
            if cli.json {
                println!("{}", serde_json::to_string(&r)?);
            } else {
                println!(
                    "episodes {} mean {:.6} stderr {:.6} truncated {}",
                    r.episodes, r.mean, r.stderr, r.truncations
                );
            }
            if !r.truncation_ok() {
                eprintln!("more than 0.01% of episodes hit {max_rounds} rounds");
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Golden { m } => {
            if let Some(bad) = m.iter().find(|&&x| !(1..=9).contains(&x)) {
                return Err(Error::InvalidArgument(format!(
                    "the reference table covers m = 1..9, not {bad}"
                )));
            }
            let cells = golden_table(m, &opt_cfg, 1e-6)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&cells)?);
            } else {
                for c in &cells {
                    let mark = if c.pass { "ok  " } else { "FAIL" };
                    println!(
                        "{mark} m={} {:<22} expected {:<16} got {}",
                        c.m, c.quantity, c.expected, c.computed
                    );
                }
            }
            if cells.iter().any(|c| !c.pass) {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Formulas { m } => {
            let f = cm_closed_forms(*m)?;
            let opt = |x: &Option<num_rational::BigRational>| {
                x.as_ref().map_or("-".to_string(), rational_string)
            };
            let report = json!({
                "m": f.m,
                "wm_ect": rational_string(&f.wm_ect),
                "la_ect": opt(&f.la_ect),
                "la_gct": f.la_gct.map_or("-".to_string(), |g| g.to_string()),
                "optimal_ect": f.optimal_ect.to_string(),
                "optimal_gct": f.optimal_gct.to_string(),
            });
            if cli.json {
                println!("{report}");
            } else {
                for k in ["wm_ect", "la_ect", "la_gct", "optimal_ect", "optimal_gct"] {
                    println!("{k:<12} {}", report[k].as_str().unwrap_or("-"));
                }
            }
        }
    }
    Ok(Outcome::Pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_budget() { 2 } else { 1 })
        }
    }
}
