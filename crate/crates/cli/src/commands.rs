use crate::output::{join, mean_stderr, write_csv};
use crate::{require_seeds, AnalyticArgs, EvaluateArgs, ServeArgs, SimulateArgs, CSV_SCHEMA_VERSION};
use anyhow::{anyhow, bail, Context, Result};
use mlo_core::baselines::{AllocationStrategy, BaselineSpec, DecisionContext, StrategyRegistry};
use mlo_core::bianchi::solve_fixed_point;
use mlo_core::channel::draw_snr;
use mlo_core::env::{serve_stdio, serve_tcp, ConfigCatalog, Session, CHANNEL_STREAM};
use mlo_core::sim::{rng_stream, StepMetrics, TraceEvent};
use mlo_core::{config_hash, ConfigFile, NetworkConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::net::TcpListener;
use std::sync::Arc;

/// Params come from the config's `[[baselines]]` entry of the same kind, if any.
fn baseline_spec(file: &ConfigFile, kind: &str) -> BaselineSpec {
    file.baselines
        .iter()
        .find(|b| b.kind == kind)
        .cloned()
        .unwrap_or_else(|| BaselineSpec::new(kind))
}

fn build(spec: &BaselineSpec, cfg: &NetworkConfig) -> Result<Box<dyn AllocationStrategy>> {
    StrategyRegistry::default()
        .build(spec, cfg)
        .with_context(|| format!("baseline {}", spec.kind))
}

#[derive(Serialize)]
struct AnalyticRow {
    schema: &'static str,
    config_hash: String,
    seed: u64,
    num_stas: usize,
    num_links: usize,
    policy: String,
    r_total_mbps: f64,
    r_link_mbps: String,
    tau_mean: String,
    p_mean: String,
    p_tr: String,
    p_su: String,
    residual: f64,
    iterations: usize,
}

fn column_means(m: &mlo_core::Matrix<f64>) -> Vec<f64> {
    (0..m.cols())
        .map(|c| m.column(c).iter().sum::<f64>() / m.rows() as f64)
        .collect()
}

pub fn analytic(args: &AnalyticArgs) -> Result<()> {
    let file = args.common.load()?;
    let sizes = if args.sweep_n.is_empty() {
        vec![file.num_stas]
    } else {
        args.sweep_n.clone()
    };
    let seeds = if args.seeds.is_empty() {
        vec![file.seed]
    } else {
        args.seeds.clone()
    };
    let spec = baseline_spec(&file, &args.policy);

    let mut configs = Vec::new();
    for &n in &sizes {
        let mut f = file.clone();
        if n != f.num_stas {
            if f.sta_positions.is_some() {
                bail!("sweeping N needs generated positions; drop sta_positions from the config");
            }
            f.num_stas = n;
        }
        let cfg = f.resolve().with_context(|| format!("config for N={n}"))?;
        let strategy = build(&spec, &cfg)?;
        configs.push((cfg, strategy));
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (cfg, strategy) = &configs[i];
            let channel = draw_snr(cfg, &mut rng_stream(seed, CHANNEL_STREAM))?;
            let ctx = DecisionContext {
                cfg,
                rates: &channel.rate_mbps,
                prev_obs: None,
            };
            let (beta, icw) = strategy.decide(&ctx)?;
            let sol = solve_fixed_point(cfg, &beta, &icw, &channel.rate_mbps)?;
            Ok(AnalyticRow {
                schema: CSV_SCHEMA_VERSION,
                config_hash: config_hash(cfg),
                seed,
                num_stas: cfg.num_stas,
                num_links: cfg.num_links(),
                policy: strategy.name().to_owned(),
                r_total_mbps: sol.r_total,
                r_link_mbps: join(&sol.r_link),
                tau_mean: join(&column_means(&sol.tau)),
                p_mean: join(&column_means(&sol.p)),
                p_tr: join(&sol.p_tr),
                p_su: join(&sol.p_su),
                residual: sol.residual,
                iterations: sol.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&args.out, &rows)?;
    tracing::info!(rows = rows.len(), out = %args.out.display(), "analytic rows written");
    Ok(())
}

struct StepRecord {
    metrics: StepMetrics,
    /// Fixed-point throughput of the step's policy under the step's channel.
    analytic_mbps: Option<f64>,
}

struct Episode {
    steps: Vec<StepRecord>,
    trace: Vec<(usize, TraceEvent)>,
}

fn run_episode(
    cfg: &NetworkConfig,
    strategy: &dyn AllocationStrategy,
    seed: u64,
    trace: bool,
    analytic: bool,
) -> Result<Episode> {
    let mut session = Session::new("cli".into(), 0, cfg, seed).map_err(|e| anyhow!(e.message))?;
    if trace {
        session.enable_trace();
    }
    let mut episode = Episode {
        steps: Vec::with_capacity(cfg.decision_steps),
        trace: Vec::new(),
    };
    while !session.is_done() {
        let rates = session.channel().rate_mbps.clone();
        let prev = session.last_obs.clone();
        let ctx = DecisionContext {
            cfg,
            rates: &rates,
            prev_obs: (session.step > 0).then_some(&prev),
        };
        let (beta, icw) = strategy.decide(&ctx)?;
        let analytic_mbps = if analytic {
            Some(solve_fixed_point(cfg, &beta, &icw, &rates)?.r_total)
        } else {
            None
        };
        let step = session.step;
        let (_, metrics) = session.advance(&beta, &icw).map_err(|e| anyhow!(e.message))?;
        episode
            .trace
            .extend(session.take_trace().into_iter().map(|ev| (step, ev)));
        episode.steps.push(StepRecord {
            metrics,
            analytic_mbps,
        });
    }
    Ok(episode)
}

#[derive(Serialize)]
struct SimulateRow {
    schema: &'static str,
    config_hash: String,
    seed: u64,
    policy: String,
    step: usize,
    reward_mbps: f64,
    thr_link_mbps: String,
    thr_sta_mbps: String,
    jain: f64,
    jain_vacuous: bool,
    access_delay_us: Option<f64>,
    busy_frac: String,
    collisions: u64,
    successes: u64,
}

#[derive(Serialize)]
struct TraceRow {
    schema: &'static str,
    config_hash: String,
    seed: u64,
    step: usize,
    timestamp_us: f64,
    link: usize,
    sta: usize,
    event: &'static str,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    require_seeds(&args.seeds)?;
    let file = args.common.load()?;
    let cfg = file.resolve()?;
    let hash = config_hash(&cfg);
    let strategy = build(&baseline_spec(&file, &args.policy), &cfg)?;
    let episodes = args
        .seeds
        .par_iter()
        .map(|&seed| run_episode(&cfg, strategy.as_ref(), seed, args.trace.is_some(), false))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut trace_rows = Vec::new();
    for (&seed, ep) in args.seeds.iter().zip(&episodes) {
        for (step, rec) in ep.steps.iter().enumerate() {
            let m = &rec.metrics;
            rows.push(SimulateRow {
                schema: CSV_SCHEMA_VERSION,
                config_hash: hash.clone(),
                seed,
                policy: strategy.name().to_owned(),
                step: step + 1,
                reward_mbps: m.total_throughput(),
                thr_link_mbps: join(&m.thr_link_mbps),
                thr_sta_mbps: join(&m.thr_sta_mbps),
                jain: m.jain,
                jain_vacuous: m.jain_vacuous,
                access_delay_us: m.access_delay_us,
                busy_frac: join(&m.busy_frac),
                collisions: m.collisions,
                successes: m.successes,
            });
        }
        for (step, ev) in &ep.trace {
            trace_rows.push(TraceRow {
                schema: CSV_SCHEMA_VERSION,
                config_hash: hash.clone(),
                seed,
                step: step + 1,
                timestamp_us: ev.timestamp_us,
                link: ev.link,
                sta: ev.sta,
                event: ev.event.as_str(),
            });
        }
    }
    write_csv(&args.out, &rows)?;
    if let Some(path) = &args.trace {
        if let Err(err) = write_csv(path, &trace_rows) {
            let _ = std::fs::remove_file(&args.out);
            return Err(err);
        }
    }
    tracing::info!(rows = rows.len(), out = %args.out.display(), "simulation rows written");
    Ok(())
}

#[derive(Serialize)]
struct EvaluateRow {
    schema: &'static str,
    config_hash: String,
    seeds: String,
    baseline: String,
    episodes: usize,
    throughput_mbps_mean: f64,
    throughput_mbps_stderr: f64,
    jain_mean: f64,
    jain_stderr: f64,
    access_delay_us_mean: Option<f64>,
    access_delay_us_stderr: Option<f64>,
    analytic_mbps_mean: f64,
    analytic_mbps_stderr: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Used when the config lists no baselines.
const DEFAULT_BASELINES: [&str; 3] = ["uniform", "congestion_aware", "analytic_grid"];

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    require_seeds(&args.seeds)?;
    let file = args.common.load()?;
    let cfg = file.resolve()?;
    let hash = config_hash(&cfg);
    let specs: Vec<BaselineSpec> = if file.baselines.is_empty() {
        DEFAULT_BASELINES.iter().map(|k| BaselineSpec::new(*k)).collect()
    } else {
        file.baselines.clone()
    };
    let seeds_cell = args.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";");

    let mut rows = Vec::new();
    for spec in &specs {
        let strategy = build(spec, &cfg)?;
        let episodes = args
            .seeds
            .par_iter()
            .map(|&seed| run_episode(&cfg, strategy.as_ref(), seed, false, true))
            .collect::<Result<Vec<_>>>()?;
        let per_episode = |f: &dyn Fn(&StepRecord) -> Option<f64>| -> Vec<f64> {
            episodes
                .iter()
                .filter_map(|ep| mean(ep.steps.iter().filter_map(f)))
                .collect()
        };
        let thr = mean_stderr(&per_episode(&|s| Some(s.metrics.total_throughput())));
        let jain = mean_stderr(&per_episode(&|s| Some(s.metrics.jain)));
        let delay = per_episode(&|s| s.metrics.access_delay_us);
        let delay = (!delay.is_empty()).then(|| mean_stderr(&delay));
        let analytic = mean_stderr(&per_episode(&|s| s.analytic_mbps));
        rows.push(EvaluateRow {
            schema: CSV_SCHEMA_VERSION,
            config_hash: hash.clone(),
            seeds: seeds_cell.clone(),
            baseline: strategy.name().to_owned(),
            episodes: episodes.len(),
            throughput_mbps_mean: thr.0,
            throughput_mbps_stderr: thr.1,
            jain_mean: jain.0,
            jain_stderr: jain.1,
            access_delay_us_mean: delay.map(|d| d.0),
            access_delay_us_stderr: delay.map(|d| d.1),
            analytic_mbps_mean: analytic.0,
            analytic_mbps_stderr: analytic.1,
        });
        tracing::info!(baseline = %spec.kind, throughput = thr.0, "baseline evaluated");
    }
    write_csv(&args.out, &rows)?;
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let file = args.common.load()?;
    let cfg = file.resolve()?;
    let name = args
        .common
        .config
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "default".to_owned());
    let mut catalog = ConfigCatalog::default();
    catalog.insert(&name, cfg.clone());
    catalog.insert("default", cfg);

    if args.stdio {
        tracing::info!(config = %name, "serving on stdio");
        return serve_stdio(&catalog).context("stdio transport");
    }
    let listener = TcpListener::bind((args.listen.as_str(), args.port))
        .with_context(|| format!("cannot listen on {}:{}", args.listen, args.port))?;
    tracing::info!(addr = %listener.local_addr()?, config = %name, "listening");
    serve_tcp(listener, Arc::new(catalog)).context("tcp transport")
}
