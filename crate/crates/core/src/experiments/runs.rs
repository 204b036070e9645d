//! The three experiment drivers. Each system frequency is an independent job
//! on a fixed-size worker pool; rows come back in frequency order, so output
//! does not depend on the number of workers.

use rayon::prelude::*;

use crate::bath::rubin_spectral_density;
use crate::darwinism::{curve_for_state, redundancy_trace, FragmentOrderings, RedundancyTrace, DEGENERATE_ENTROPY};
use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::experiments::config::ExperimentConfig;
use crate::experiments::csv::CsvTable;
use crate::memory::{nm_measure, NMResult};

pub const REDUNDANCY_COLUMNS: [&str; 4] = ["omega_s", "t", "f_delta", "h_system"];
pub const PARTIAL_INFO_COLUMNS: [&str; 5] = ["omega_s", "f", "mi_mean", "mi_stderr", "h_system"];
pub const SWEEP_COLUMNS: [&str; 6] = ["omega_s", "j_omega_s", "n_measure", "f_delta", "nf_measure", "h_system"];

/// Largest relative change of `𝒩` under halving `dt` that still counts as resolved.
pub const HALF_STEP_RTOL: f64 = 0.05;
const HALF_STEP_ATOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: CsvTable,
    pub warnings: Vec<String>,
}

/// Runs `job` for every configured `ω_S` on `workers` threads.
pub fn per_frequency<T, F>(cfg: &ExperimentConfig, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64, &Simulation) -> Result<T> + Sync,
{
    if workers == 0 {
        return Err(Error::config("workers", "must be at least 1"));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| {
        cfg.omega_s
            .par_iter()
            .map(|&w| {
                let sim = Simulation::new(cfg.model(w)?)?;
                job(w, &sim)
            })
            .collect()
    })
}

fn orderings(cfg: &ExperimentConfig) -> Result<FragmentOrderings> {
    FragmentOrderings::new(cfg.n_osc, cfg.n_samples, cfg.master_seed)
}

/// `f_δ(t)` on the redundancy grid for one simulation.
pub fn trace_for(cfg: &ExperimentConfig, sim: &Simulation) -> Result<RedundancyTrace> {
    redundancy_trace(sim, &cfg.redundancy_times()?, cfg.delta, &cfg.fractions()?, &orderings(cfg)?)
}

/// `𝒩` on the configured grid, rejected if halving the step moves it by more
/// than [`HALF_STEP_RTOL`].
pub fn resolved_nm(cfg: &ExperimentConfig, sim: &Simulation) -> Result<NMResult> {
    let pairs = cfg.probe_ensemble(sim.params().omega_s)?;
    let coarse = nm_measure(sim, &pairs, &cfg.times()?)?;
    let fine = nm_measure(sim, &pairs, &cfg.half_step_times()?)?;
    let change = (fine.n_measure - coarse.n_measure).abs();
    if change > HALF_STEP_RTOL * coarse.n_measure.abs() + HALF_STEP_ATOL {
        return Err(Error::config(
            "dt",
            format!(
                "under-resolved at omega_s = {}: N = {:e} at dt = {} but {:e} at dt/2",
                sim.params().omega_s,
                coarse.n_measure,
                cfg.dt,
                fine.n_measure
            ),
        ));
    }
    Ok(coarse)
}

/// Rows `omega_s, t, f_delta, h_system` for every `ω_S` and redundancy time.
pub fn run_redundancy(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let traces = per_frequency(cfg, workers, |_, sim| trace_for(cfg, sim))?;
    let mut table = CsvTable::new(&REDUNDANCY_COLUMNS);
    for (&w, tr) in cfg.omega_s.iter().zip(&traces) {
        for ((&t, &f), &h) in tr.times.iter().zip(&tr.f_delta).zip(&tr.h_system) {
            table.push(vec![w, t, f, h]);
        }
    }
    Ok(RunOutput {
        table,
        warnings: Vec::new(),
    })
}

/// Partial-information curves at `t_max`, one block of rows per `ω_S`.
/// `mi_mean` is the raw mutual information in nats.
pub fn run_partial_info(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let fractions = cfg.fractions()?;
    let ord = orderings(cfg)?;
    let curves = per_frequency(cfg, workers, |_, sim| {
        curve_for_state(&sim.state_at(cfg.t_max), cfg.t_max, &fractions, &ord)
    })?;
    let mut table = CsvTable::new(&PARTIAL_INFO_COLUMNS);
    let mut warnings = Vec::new();
    for (&w, c) in cfg.omega_s.iter().zip(&curves) {
        if c.h_system < DEGENERATE_ENTROPY {
            warnings.push(format!(
                "omega_s = {w}: H_S = {:e} nats at t = {}, so I/H_S is undefined; mi_mean holds raw values",
                c.h_system, cfg.t_max
            ));
        }
        for ((&f, &m), &se) in c.fractions.iter().zip(&c.mi_mean).zip(&c.mi_stderr) {
            table.push(vec![w, f, m, se, c.h_system]);
        }
    }
    Ok(RunOutput { table, warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub omega_s: f64,
    pub j_omega_s: f64,
    pub n_measure: f64,
    pub f_delta: f64,
    pub nf_measure: f64,
    pub h_system: f64,
}

impl SweepRow {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.omega_s, self.j_omega_s, self.n_measure, self.f_delta, self.nf_measure, self.h_system]
    }
}

/// One sweep row: `𝒩` on the fine grid, and `f_δ`, `𝒩_f` and `H_S` from the
/// redundancy trace, with `f_δ` and `H_S` taken at `t_max`.
pub fn sweep_row(cfg: &ExperimentConfig, sim: &Simulation) -> Result<SweepRow> {
    let nm = resolved_nm(cfg, sim)?;
    let trace = trace_for(cfg, sim)?;
    let omega_s = sim.params().omega_s;
    Ok(SweepRow {
        omega_s,
        j_omega_s: rubin_spectral_density(omega_s, &sim.params().spectral),
        n_measure: nm.n_measure,
        f_delta: *trace.f_delta.last().expect("time grid starts at 0"),
        nf_measure: trace.non_monotonicity(),
        h_system: *trace.h_system.last().expect("time grid starts at 0"),
    })
}

pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let rows = per_frequency(cfg, workers, |_, sim| sweep_row(cfg, sim))?;
    let mut table = CsvTable::new(&SWEEP_COLUMNS);
    for r in &rows {
        table.push(r.to_vec());
    }
    Ok(RunOutput {
        table,
        warnings: Vec::new(),
    })
}
