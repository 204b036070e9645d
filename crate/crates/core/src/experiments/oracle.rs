//! Independent check of the normal-mode propagator by direct integration of
//! `dR/dt = Ω M R` with classical fourth-order Runge–Kutta, halving the step
//! until successive refinements agree.

use nalgebra::DMatrix;

use crate::bath::{initial_state, potential_matrix, propagator, ModelParams, NormalModeBasis};
use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::gaussian::SymplecticForm;

/// Largest covariance-entry deviation accepted by the oracle.
pub const ORACLE_TOL: f64 = 1e-6;
/// Agreement required between successive step halvings.
pub const CONVERGENCE_TOL: f64 = 1e-10;
pub const MAX_OSC: usize = 4;
pub const CHECKPOINTS: usize = 5;
const MAX_HALVINGS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub omega_s: f64,
    pub checkpoints: Vec<f64>,
    pub max_deviation: f64,
    pub steps_per_checkpoint: usize,
    pub passed: bool,
}

/// `Ω M` with `M = V ⊕ 1` in interleaved ordering.
pub fn generator(params: &ModelParams) -> DMatrix<f64> {
    let v = potential_matrix(params);
    let n = params.n_modes();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(2 * i, 2 * j)] = v[(i, j)];
        }
        m[(2 * i + 1, 2 * i + 1)] = 1.0;
    }
    SymplecticForm::matrix(n) * m
}

fn rk4_step(a: &DMatrix<f64>, r: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let k1 = a * r;
    let k2 = a * (r + &k1 * (h / 2.0));
    let k3 = a * (r + &k2 * (h / 2.0));
    let k4 = a * (r + &k3 * h);
    r + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// `R(t)` at each checkpoint, using `steps` equal steps between consecutive
/// checkpoints, which must be evenly spaced from 0.
fn integrate(a: &DMatrix<f64>, checkpoints: &[f64], steps: usize) -> Vec<DMatrix<f64>> {
    let mut r = DMatrix::identity(a.nrows(), a.ncols());
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t0 = 0.0;
    for &t in checkpoints {
        let h = (t - t0) / steps as f64;
        for _ in 0..steps {
            r = rk4_step(a, &r, h);
        }
        out.push(r.clone());
        t0 = t;
    }
    out
}

/// Step-halved integration; returns the propagators and the final step count.
pub fn converged_propagators(a: &DMatrix<f64>, checkpoints: &[f64]) -> Result<(Vec<DMatrix<f64>>, usize)> {
    let mut steps = 16;
    let mut prev = integrate(a, checkpoints, steps);
    for _ in 0..MAX_HALVINGS {
        steps *= 2;
        let next = integrate(a, checkpoints, steps);
        let change = prev.iter().zip(&next).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
        if change < CONVERGENCE_TOL {
            return Ok((next, steps));
        }
        prev = next;
    }
    Err(Error::OracleInconclusive(format!(
        "no convergence to {CONVERGENCE_TOL:e} after {MAX_HALVINGS} halvings"
    )))
}

/// Evenly spaced checkpoints ending at `t_max`.
pub fn checkpoints(t_max: f64) -> Vec<f64> {
    (1..=CHECKPOINTS).map(|k| t_max * k as f64 / CHECKPOINTS as f64).collect()
}

/// Compares `propagate(t)` with the integrated propagator on the initial
/// covariance at each checkpoint.
pub fn oracle_check_with(
    params: &ModelParams,
    checkpoints: &[f64],
    propagate: impl Fn(f64) -> DMatrix<f64>,
) -> Result<OracleReport> {
    let a = generator(params);
    let (reference, steps) = converged_propagators(&a, checkpoints)?;
    let sigma0 = initial_state(params).covariance();
    let mut max_deviation: f64 = 0.0;
    for (&t, r) in checkpoints.iter().zip(&reference) {
        let s = propagate(t);
        let expected = r * &sigma0 * r.transpose();
        let got = &s * &sigma0 * s.transpose();
        max_deviation = max_deviation.max((expected - got).amax());
    }
    Ok(OracleReport {
        omega_s: params.omega_s,
        checkpoints: checkpoints.to_vec(),
        max_deviation,
        steps_per_checkpoint: steps,
        passed: max_deviation < ORACLE_TOL,
    })
}

pub fn oracle_check(params: &ModelParams, basis: &NormalModeBasis, checkpoints: &[f64]) -> Result<OracleReport> {
    oracle_check_with(params, checkpoints, |t| propagator(basis, t).0)
}

/// The oracle for every `ω_S` of a small configuration.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<Vec<OracleReport>> {
    cfg.validate()?;
    if cfg.n_osc > MAX_OSC {
        return Err(Error::config("n_osc", format!("the oracle takes at most {MAX_OSC} bath oscillators")));
    }
    if !(cfg.t_max > 0.0) {
        return Err(Error::config("t_max", "the oracle needs a positive time span"));
    }
    let cps = checkpoints(cfg.t_max);
    cfg.omega_s
        .iter()
        .map(|&w| {
            let params = cfg.model(w)?;
            let basis = crate::bath::normal_mode_decomposition(&potential_matrix(&params))?;
            oracle_check(&params, &basis, &cps)
        })
        .collect()
}
