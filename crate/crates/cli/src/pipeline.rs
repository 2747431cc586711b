//! Pipeline stages. Each stage reads its inputs from the output directory,
//! writes its artifacts and a manifest, and can be rerun on its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde_json::json;

use gridsync_core::correction::{self, read_corrected_field, write_corrected_field, Method};
use gridsync_core::grid_io::{
    extract_season, load_gridded, read_edge_list, read_event_series, read_grid_csv, read_metric_field,
    sidecar_path, write_edge_list, write_event_series, write_grid_csv, write_metric_field, EventFileMeta,
};
use gridsync_core::netmetrics::compute_metric;
use gridsync_core::rng::derive_seed;
use gridsync_core::stats::{compare_methods, CellKey};
use gridsync_core::surrogate::{ensemble_stats, estimate_profile, read_surrogate_stats, write_surrogate_stats};
use gridsync_core::sync::build_network;
use gridsync_core::synth::{gen_embedded_network, gen_storm_field, regular_grid, Layout, StormFieldSpec, SynthNetSpec};
use gridsync_core::{events::detect_events, grid_io::date_to_day, Metric, Network, Season};

use crate::config::{Needs, RunConfig};
use crate::manifest::Manifest;
use crate::render::{render_corrected, render_metric};
use crate::CliError;

const TAG_SYNC: u64 = 0x5359_4E43;
const TAG_SURROGATE: u64 = 0x5355_5247;
const TAG_SYNTH: u64 = 0x5359_4E54;

/// Output layout, all relative to the run's output directory.
pub mod layout {
    use super::*;

    pub fn grid(out: &Path) -> PathBuf {
        out.join("grid.csv")
    }
    pub fn season_dir(out: &Path, s: Season) -> PathBuf {
        out.join(s.to_string())
    }
    pub fn events(out: &Path, s: Season) -> PathBuf {
        season_dir(out, s).join("events.csv")
    }
    pub fn thresholds(out: &Path, s: Season) -> PathBuf {
        season_dir(out, s).join("thresholds.csv")
    }
    pub fn network(out: &Path, s: Season) -> PathBuf {
        season_dir(out, s).join("network.csv")
    }
    pub fn metric(out: &Path, s: Season, m: Metric) -> PathBuf {
        season_dir(out, s).join("metrics").join(format!("{}.csv", m.code()))
    }
    pub fn profile(out: &Path, s: Season) -> PathBuf {
        season_dir(out, s).join("surrogate").join("profile.csv")
    }
    pub fn surrogate_stats(out: &Path, s: Season) -> PathBuf {
        season_dir(out, s).join("surrogate").join("stats.csv")
    }
    pub fn corrected(out: &Path, s: Season, m: Metric, method: Method) -> PathBuf {
        season_dir(out, s).join("corrected").join(format!("{}_{method}.csv", m.code()))
    }
    pub fn report_json(out: &Path) -> PathBuf {
        out.join("report.json")
    }
    pub fn report_text(out: &Path) -> PathBuf {
        out.join("report.txt")
    }
    pub fn maps(out: &Path) -> PathBuf {
        out.join("maps")
    }
}

fn season_tag(s: Season) -> u64 {
    match s {
        Season::Jja => 1,
        Season::Djf => 2,
    }
}

pub fn sync_seed(seed: u64, s: Season) -> u64 {
    derive_seed(seed, &[TAG_SYNC, season_tag(s)])
}

pub fn surrogate_seed(seed: u64, s: Season) -> u64 {
    derive_seed(seed, &[TAG_SURROGATE, season_tag(s)])
}

fn mkdir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| CliError::runtime(format!("creating {}: {e}", p.display())))
}

fn need_file(p: &Path, stage: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "{} is missing; run the `{stage}` stage first",
            p.display()
        )))
    }
}

fn timed<T>(name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
    let t0 = Instant::now();
    info!("{name}: start");
    let r = f();
    match &r {
        Ok(_) => info!("{name}: done in {:.2}s", t0.elapsed().as_secs_f64()),
        Err(e) => warn!("{name}: failed after {:.2}s: {e}", t0.elapsed().as_secs_f64()),
    }
    r
}

pub fn run_events(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("events", || {
        let out = cfg.out_dir();
        mkdir(&out)?;
        let input_cfg = cfg.input.as_ref().expect("validated");
        let input = cfg.resolve(&input_cfg.path);
        let spec = cfg.threshold_spec();
        let gs = load_gridded(&input, input_cfg.format())?;
        info!("events: {} nodes, {} days", gs.n_nodes(), gs.n_days());

        let mut m = Manifest::new(
            "events",
            cfg.seed(),
            json!({ "variable": cfg.variable, "threshold": spec, "dedup": cfg.dedup, "seasons": cfg.seasons }),
        );
        m.input_as(input_cfg.path.to_string_lossy().replace('\\', "/"), &input)?;
        let grid_path = layout::grid(&out);
        write_grid_csv(gs.grid(), &grid_path)?;
        m.output(&grid_path, &out)?;

        for &season in &cfg.seasons {
            let seasonal = extract_season(&gs, season)?;
            let det = detect_events(&seasonal, &spec, cfg.dedup)?;
            if !det.unusable.is_empty() {
                warn!("events {season}: {} nodes lack support for a threshold", det.unusable.len());
                m.notes.push(format!("{season}: {} unusable nodes", det.unusable.len()));
            }
            let n_events: usize = det.series.iter().map(|s| s.len()).sum();
            info!("events {season}: T = {}, {n_events} events", seasonal.n_days());
            mkdir(&layout::season_dir(&out, season))?;
            let meta = EventFileMeta {
                n_nodes: seasonal.n_nodes(),
                n_days_in_season: seasonal.n_days(),
                season: Some(season),
                threshold: Some(spec),
                dedup: cfg.dedup,
                unusable_nodes: det.unusable.clone(),
                season_days: seasonal.days().to_vec(),
            };
            let ev = layout::events(&out, season);
            write_event_series(&det.series, &meta, &ev)?;
            let mut thr = String::from("node_id,threshold\n");
            for (i, t) in det.thresholds.iter().enumerate() {
                match t {
                    Some(t) => thr.push_str(&format!("{i},{t}\n")),
                    None => thr.push_str(&format!("{i},nan\n")),
                }
            }
            let thr_path = layout::thresholds(&out, season);
            fs::write(&thr_path, thr).map_err(|e| CliError::runtime(format!("{}: {e}", thr_path.display())))?;
            for p in [ev.clone(), sidecar_path(&ev), thr_path] {
                m.output(&p, &out)?;
            }
        }
        m.write(&out)
    })
}

fn load_network(out: &Path, season: Season) -> Result<Network, CliError> {
    let grid_path = layout::grid(out);
    let net_path = layout::network(out, season);
    need_file(&grid_path, "events")?;
    need_file(&net_path, "network")?;
    Ok(read_edge_list(&net_path, read_grid_csv(&grid_path)?)?)
}

pub fn run_network(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("network", || {
        let out = cfg.out_dir();
        let grid_path = layout::grid(&out);
        need_file(&grid_path, "events")?;
        let grid = read_grid_csv(&grid_path)?;
        let mut m = Manifest::new("network", cfg.seed(), json!({ "sync": cfg.sync, "seasons": cfg.seasons }));
        m.input(&grid_path, &out)?;
        for &season in &cfg.seasons {
            let ev = layout::events(&out, season);
            need_file(&ev, "events")?;
            let (series, meta) = read_event_series(&ev)?;
            if meta.n_nodes != grid.len() {
                return Err(CliError::runtime(format!(
                    "{} lists {} nodes but the grid has {}",
                    ev.display(),
                    meta.n_nodes,
                    grid.len()
                )));
            }
            m.input(&ev, &out)?;
            m.input(&sidecar_path(&ev), &out)?;
            let params = cfg.sync.params(sync_seed(cfg.seed(), season));
            let net = build_network(&series, &grid, &params)?;
            let n = net.n() as f64;
            info!(
                "network {season}: {} links, density {:.4}",
                net.edge_count(),
                net.edge_count() as f64 / (n * (n - 1.0) / 2.0).max(1.0)
            );
            let p = layout::network(&out, season);
            write_edge_list(&net, &p)?;
            m.output(&p, &out)?;
        }
        m.write(&out)
    })
}

pub fn run_metrics(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("metrics", || {
        let out = cfg.out_dir();
        let mut m = Manifest::new("metrics", cfg.seed(), json!({ "metrics": cfg.metrics, "seasons": cfg.seasons }));
        m.input(&layout::grid(&out), &out)?;
        for &season in &cfg.seasons {
            let net = load_network(&out, season)?;
            m.input(&layout::network(&out, season), &out)?;
            mkdir(&layout::season_dir(&out, season).join("metrics"))?;
            for &metric in &cfg.metrics {
                let mf = compute_metric(&net, metric)?;
                let p = layout::metric(&out, season, metric);
                write_metric_field(&mf, net.grid(), &p)?;
                m.output(&p, &out)?;
                m.output(&sidecar_path(&p), &out)?;
            }
        }
        m.write(&out)
    })
}

pub fn run_surrogate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("surrogate", || {
        let out = cfg.out_dir();
        let mut m = Manifest::new(
            "surrogate",
            cfg.seed(),
            json!({ "surrogate": cfg.surrogate, "metrics": cfg.metrics, "seasons": cfg.seasons }),
        );
        m.input(&layout::grid(&out), &out)?;
        for &season in &cfg.seasons {
            let net = load_network(&out, season)?;
            m.input(&layout::network(&out, season), &out)?;
            mkdir(&layout::season_dir(&out, season).join("surrogate"))?;
            let profile = estimate_profile(&net, cfg.surrogate.bin_width_km)?;
            let pp = layout::profile(&out, season);
            profile.write_csv(&pp)?;
            m.output(&pp, &out)?;
            let stats = ensemble_stats(
                &profile,
                net.grid(),
                &cfg.metrics,
                cfg.surrogate.ensemble_size,
                surrogate_seed(cfg.seed(), season),
            )?;
            for s in &stats {
                if !s.zero_mean_nodes.is_empty() {
                    info!("surrogate {season}: {} has {} zero-mean nodes", s.metric, s.zero_mean_nodes.len());
                }
            }
            let sp = layout::surrogate_stats(&out, season);
            write_surrogate_stats(&stats, &sp)?;
            m.output(&sp, &out)?;
        }
        m.write(&out)
    })
}

pub fn run_correct(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("correct", || {
        let out = cfg.out_dir();
        let mut m = Manifest::new(
            "correct",
            cfg.seed(),
            json!({ "methods": cfg.correction.methods, "metrics": cfg.metrics, "seasons": cfg.seasons }),
        );
        for &season in &cfg.seasons {
            let sp = layout::surrogate_stats(&out, season);
            need_file(&sp, "surrogate")?;
            let stats = read_surrogate_stats(&sp, cfg.surrogate.ensemble_size)?;
            m.input(&sp, &out)?;
            mkdir(&layout::season_dir(&out, season).join("corrected"))?;
            for &metric in &cfg.metrics {
                let mp = layout::metric(&out, season, metric);
                need_file(&mp, "metrics")?;
                let (raw, grid) = read_metric_field(&mp, metric)?;
                m.input(&mp, &out)?;
                let sur = stats.iter().find(|s| s.metric == metric).ok_or_else(|| {
                    CliError::runtime(format!("{} has no {metric} entries", sp.display()))
                })?;
                for &method in &cfg.correction.methods {
                    let p = layout::corrected(&out, season, metric, method);
                    match correction::correct(method, &raw, sur) {
                        Ok(cf) => {
                            if !cf.undefined.iter().all(|u| !u) {
                                let k = cf.undefined.iter().filter(|u| **u).count();
                                info!("correct {season} {metric} {method}: {k} undefined nodes excluded");
                                m.notes.push(format!("{season} {metric} {method}: {k} undefined nodes"));
                            }
                            write_corrected_field(&cf, &grid, &p)?;
                            m.output(&p, &out)?;
                        }
                        Err(e) => {
                            warn!("correct {season} {metric} {method}: {e}");
                            m.notes.push(format!("{season} {metric} {method}: failed: {e}"));
                            // A stale field from an earlier run must not feed the comparison.
                            if p.exists() {
                                fs::remove_file(&p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
                            }
                        }
                    }
                }
            }
        }
        m.write(&out)
    })
}

pub fn run_compare(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("compare", || {
        let out = cfg.out_dir();
        let kind = cfg.variable.network_kind();
        let mut m = Manifest::new(
            "compare",
            cfg.seed(),
            json!({ "alpha": cfg.alpha, "stage": cfg.correction.stage, "network": kind, "seasons": cfg.seasons }),
        );
        let mut runs = BTreeMap::new();
        let mut expected = Vec::new();
        for &season in &cfg.seasons {
            for &metric in &cfg.metrics {
                let key = CellKey { network: kind, season, metric };
                expected.push(key);
                let sub = layout::corrected(&out, season, metric, Method::Subtract);
                let div = layout::corrected(&out, season, metric, Method::Divide);
                if !sub.is_file() || !div.is_file() {
                    continue;
                }
                let (fs_, _) = read_corrected_field(&sub, Method::Subtract, metric)?;
                let (fd, _) = read_corrected_field(&div, Method::Divide, metric)?;
                m.input(&sub, &out)?;
                m.input(&div, &out)?;
                match correction::paired_values(&fs_, &fd, cfg.correction.stage) {
                    Ok(p) => {
                        runs.insert(key, p);
                    }
                    Err(e) => warn!("compare {season} {metric}: {e}"),
                }
            }
        }
        let report = compare_methods(&runs, &expected, cfg.alpha)?;
        for (k, why) in report.incomplete() {
            warn!("compare: missing cell {}-{} {}: {why}", k.network, k.season, k.metric);
            m.notes.push(format!("missing {}-{} {}: {why}", k.network, k.season, k.metric));
        }
        let jp = layout::report_json(&out);
        let tp = layout::report_text(&out);
        fs::write(&jp, report.to_json_string()).map_err(|e| CliError::runtime(format!("{}: {e}", jp.display())))?;
        fs::write(&tp, report.to_text()).map_err(|e| CliError::runtime(format!("{}: {e}", tp.display())))?;
        m.output(&jp, &out)?;
        m.output(&tp, &out)?;
        m.write(&out)
    })
}

pub fn run_render(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("render", || {
        let out = cfg.out_dir();
        let maps = layout::maps(&out);
        mkdir(&maps)?;
        let ext = cfg.render.format.extension();
        let mut m = Manifest::new("render", cfg.seed(), json!({ "render": cfg.render }));
        for &season in &cfg.seasons {
            for &metric in &cfg.metrics {
                let mp = layout::metric(&out, season, metric);
                if mp.is_file() {
                    let (mf, grid) = read_metric_field(&mp, metric)?;
                    m.input(&mp, &out)?;
                    let p = maps.join(format!("{season}_{}_raw.{ext}", metric.code()));
                    render_metric(&mf, &grid, &cfg.render, &p)?;
                    m.output(&p, &out)?;
                    m.output(&p.with_extension("txt"), &out)?;
                }
                for &method in &cfg.correction.methods {
                    let cp = layout::corrected(&out, season, metric, method);
                    if !cp.is_file() {
                        continue;
                    }
                    let (cf, grid) = read_corrected_field(&cp, method, metric)?;
                    m.input(&cp, &out)?;
                    let p = maps.join(format!("{season}_{}_{method}.{ext}", metric.code()));
                    render_corrected(&cf, cfg.correction.stage, &grid, &cfg.render, &p)?;
                    m.output(&p, &out)?;
                    m.output(&p.with_extension("txt"), &out)?;
                }
            }
        }
        if m.outputs.is_empty() {
            return Err(CliError::runtime("nothing to render; run the metrics stage first"));
        }
        m.write(&out)
    })
}

pub fn storm_spec(cfg: &RunConfig) -> Result<Option<StormFieldSpec>, CliError> {
    let Some(f) = cfg.synth.as_ref().and_then(|s| s.storm_field.as_ref()) else {
        return Ok(None);
    };
    Ok(Some(StormFieldSpec {
        grid: regular_grid(f.lat0, f.lon0, f.rows, f.cols, f.step_deg)?,
        first_day: date_to_day(f.start_date),
        n_days: f.n_days,
        kind: f.kind,
        storm_rate: f.storm_rate,
        storm_radius_km: f.storm_radius_km,
        storm_amplitude: f.storm_amplitude,
        wet_prob: f.wet_prob,
        seed: derive_seed(cfg.seed(), &[TAG_SYNTH]),
    }))
}

pub fn run_synth(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    timed("synth", || {
        let out = cfg.out_dir();
        mkdir(&out)?;
        let synth = cfg.synth.as_ref().expect("validated");
        let mut m = Manifest::new("synth", cfg.seed(), serde_json::to_value(synth).expect("serializable"));
        if let Some(spec) = storm_spec(cfg)? {
            let gs = gen_storm_field(&spec)?;
            let p = out.join(&synth.output);
            if let Some(parent) = p.parent() {
                mkdir(parent)?;
            }
            let format = crate::config::InputConfig { path: p.clone(), format: None }.format();
            gridsync_core::grid_io::save_gridded(&gs, &p, format)?;
            m.output(&p, &out)?;
        }
        if let Some(n) = &synth.network {
            let spec = SynthNetSpec {
                layout: Layout::RectLattice { rows: n.rows, cols: n.cols, spacing_km: n.spacing_km },
                link_model: n.link_model,
                seed: derive_seed(cfg.seed(), &[TAG_SYNTH, 1]),
            };
            let net = gen_embedded_network(&spec)?;
            let gp = out.join("synth_grid.csv");
            let np = out.join("synth_network.csv");
            write_grid_csv(net.grid(), &gp)?;
            write_edge_list(&net, &np)?;
            m.output(&gp, &out)?;
            m.output(&np, &out)?;
        }
        m.write(&out)
    })
}

/// All stages in order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let t0 = Instant::now();
    let mut manifests = vec![
        run_events(cfg)?,
        run_network(cfg)?,
        run_metrics(cfg)?,
        run_surrogate(cfg)?,
        run_correct(cfg)?,
        run_compare(cfg)?,
    ];
    if cfg.render.enabled {
        manifests.push(run_render(cfg)?);
    }
    info!("pipeline: done in {:.2}s", t0.elapsed().as_secs_f64());
    Ok(manifests)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Events,
    Network,
    Metrics,
    Surrogate,
    Correct,
    Compare,
    Synth,
    Pipeline,
    Render,
}

impl Command {
    pub fn needs(self) -> Needs {
        match self {
            Command::Events => Needs::Input,
            Command::Network | Command::Metrics | Command::Surrogate | Command::Correct => Needs::Artifacts,
            Command::Compare => Needs::Compare,
            Command::Synth => Needs::Synth,
            Command::Pipeline => Needs::Pipeline,
            Command::Render => Needs::Render,
        }
    }
}

/// Validates and runs one command inside a pool of the configured size.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate(cmd.needs())?;
    let threads = cfg.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    info!("{cmd:?}: {} threads, output in {}", pool.current_num_threads(), cfg.out_dir().display());
    pool.install(|| match cmd {
        Command::Events => run_events(cfg).map(|p| vec![p]),
        Command::Network => run_network(cfg).map(|p| vec![p]),
        Command::Metrics => run_metrics(cfg).map(|p| vec![p]),
        Command::Surrogate => run_surrogate(cfg).map(|p| vec![p]),
        Command::Correct => run_correct(cfg).map(|p| vec![p]),
        Command::Compare => run_compare(cfg).map(|p| vec![p]),
        Command::Synth => run_synth(cfg).map(|p| vec![p]),
        Command::Render => run_render(cfg).map(|p| vec![p]),
        Command::Pipeline => run_pipeline(cfg),
    })
}
