//! Monte-Carlo sweep over the transmit power budget and CSV output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, MethodSpec};
use crate::channel::{draw_drop, drop_rng, ChannelSet};
use crate::model::CsiMode;
use crate::orchestrator::{maximize_see, maximize_ssr, random_allocation, RunResult};
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "method,csi,p_max_dbm,drop,see_approx,see_true,ssr_approx,ssr_true,iters,runtime_ms,converged";

/// Seed of the random initial point (and of the random baseline) for one
/// drop, taken from a region of the drop's stream the channel draw never
/// reaches.
pub fn init_seed(master_seed: u64, drop: u64) -> u64 {
    let mut rng = drop_rng(master_seed, drop);
    rng.set_word_pos(1u128 << 64);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct DropInfo {
    pub index: usize,
    pub init_seed: u64,
    /// `None` if the drop could not be drawn.
    pub fingerprint: Option<u64>,
}

#[derive(Debug)]
pub struct SweepRow {
    pub spec: MethodSpec,
    pub p_max_dbm: f64,
    pub drop: usize,
    /// Fingerprint of the channel set this row was computed on.
    pub fingerprint: Option<u64>,
    pub runtime_ms: f64,
    pub result: std::result::Result<RunResult, String>,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub drops: Vec<DropInfo>,
    /// Ordered by sweep point, then drop, then method.
    pub rows: Vec<SweepRow>,
}

/// Runs every (power budget, drop, method) cell. Channel drops do not
/// depend on the power budget or the method, so all methods see the same
/// channels at a given drop index. `threads = 0` lets rayon choose.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let num_drops = cfg.num_drops as usize;
    let draw_cfg = cfg.system_at(cfg.p_max_sweep_dbm[0], CsiMode::Statistical);

    pool.install(|| {
        let channels: Vec<std::result::Result<ChannelSet, String>> = (0..num_drops)
            .into_par_iter()
            .map(|d| {
                draw_drop(cfg.seed, d as u64, &draw_cfg)
                    .map(|(_, ch)| ch)
                    .map_err(|e| e.to_string())
            })
            .collect();
        let drops: Vec<DropInfo> = channels
            .iter()
            .enumerate()
            .map(|(index, ch)| DropInfo {
                index,
                init_seed: init_seed(cfg.seed, index as u64),
                fingerprint: ch.as_ref().ok().map(ChannelSet::fingerprint),
            })
            .collect();

        let mut specs = cfg.methods.clone();
        specs.sort();
        let mut points = cfg.p_max_sweep_dbm.clone();
        points.sort_by(f64::total_cmp);
        let mut cells: Vec<(f64, usize, MethodSpec)> = Vec::new();
        for &p in &points {
            for d in 0..num_drops {
                cells.extend(specs.iter().map(|&s| (p, d, s)));
            }
        }

        let rows = cells
            .into_par_iter()
            .map(|(p_max_dbm, drop, spec)| {
                let start = Instant::now();
                let result = match &channels[drop] {
                    Ok(ch) => run_cell(cfg, ch, p_max_dbm, spec, drops[drop].init_seed).map_err(|e| e.to_string()),
                    Err(e) => Err(format!("channel draw failed: {e}")),
                };
                SweepRow {
                    spec,
                    p_max_dbm,
                    drop,
                    fingerprint: drops[drop].fingerprint,
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                    result,
                }
            })
            .collect();
        Ok(SweepOutput { drops, rows })
    })
}

fn run_cell(cfg: &ExperimentConfig, channels: &ChannelSet, p_max_dbm: f64, spec: MethodSpec, seed: u64) -> Result<RunResult> {
    let sys = cfg.system_at(p_max_dbm, spec.csi);
    match spec.method {
        Method::SeeMax => maximize_see(channels, &sys, &cfg.optimizer, seed),
        Method::SsrMax => maximize_ssr(channels, &sys, &cfg.optimizer, seed),
        Method::Random => random_allocation(channels, &sys, seed),
    }
}

/// Twelve significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// CSV text of a sweep. Runtimes are left empty unless `timing` is set,
/// which keeps the file byte-reproducible.
pub fn to_csv(cfg: &ExperimentConfig, out: &SweepOutput, timing: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ris-see sweep");
    let _ = writeln!(
        s,
        "# seed={} scale={} K={} N_B={} N={} ris_mode={} drops={}",
        cfg.seed,
        cfg.scale.as_str(),
        cfg.base.users,
        cfg.base.bob_antennas,
        cfg.base.ris_elements,
        cfg.base.ris_mode.as_str(),
        cfg.num_drops
    );
    for d in &out.drops {
        let fp = d.fingerprint.map_or_else(|| "none".to_string(), |f| format!("{f:016x}"));
        let _ = writeln!(s, "# drop={} fingerprint={} init_seed={}", d.index, fp, d.init_seed);
    }
    for row in &out.rows {
        if let Err(e) = &row.result {
            let _ = writeln!(
                s,
                "# failed method={} p_max_dbm={} drop={}: {}",
                row.spec.label(),
                row.p_max_dbm,
                row.drop,
                e.replace('\n', " ")
            );
        }
    }
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &out.rows {
        let runtime = if timing { format!("{:.3}", row.runtime_ms) } else { String::new() };
        let lead = format!(
            "{},{},{},{}",
            row.spec.method.as_str(),
            row.spec.csi.as_str(),
            row.p_max_dbm,
            row.drop
        );
        match &row.result {
            Ok(r) => {
                let m = &r.metrics;
                let _ = writeln!(
                    s,
                    "{lead},{},{},{},{},{},{runtime},{}",
                    fmt_sig(m.see_approx),
                    fmt_sig(m.see_true),
                    fmt_sig(m.ssr_approx),
                    fmt_sig(m.ssr_true),
                    r.outer_iterations,
                    r.converged
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{lead},,,,,,{runtime},failed");
            }
        }
    }
    s
}

pub fn write_csv(path: &Path, cfg: &ExperimentConfig, out: &SweepOutput, timing: bool) -> Result<()> {
    std::fs::write(path, to_csv(cfg, out, timing))?;
    Ok(())
}
