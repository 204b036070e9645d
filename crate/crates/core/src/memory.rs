//! Fidelity-based non-Markovianity on the exact reduced channel.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::gaussian::{check_physical, fidelity_2x2, GaussianState};

/// A pair of distinct single-mode inputs whose fidelity is tracked in time.
#[derive(Debug, Clone)]
pub struct ProbePair {
    pub label: String,
    mean_a: Vector2<f64>,
    cov_a: Matrix2<f64>,
    mean_b: Vector2<f64>,
    cov_b: Matrix2<f64>,
}

fn to_parts(s: &GaussianState) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    if s.n_modes() != 1 {
        return Err(Error::WrongArity {
            expected: 1,
            got: s.n_modes(),
        });
    }
    let c = s.covariance();
    check_physical(&c)?;
    Ok((
        Vector2::new(s.mean()[0], s.mean()[1]),
        Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
    ))
}

impl ProbePair {
    pub fn new(label: impl Into<String>, state_a: &GaussianState, state_b: &GaussianState) -> Result<Self> {
        let (mean_a, cov_a) = to_parts(state_a)?;
        let (mean_b, cov_b) = to_parts(state_b)?;
        if mean_a == mean_b && cov_a == cov_b {
            return Err(Error::config("probe_pairs", "a probe pair must hold two different states"));
        }
        Ok(ProbePair {
            label: label.into(),
            mean_a,
            cov_a,
            mean_b,
            cov_b,
        })
    }

    pub fn initial_fidelity(&self) -> f64 {
        fidelity_2x2(&self.cov_a, &self.cov_b, &(self.mean_a - self.mean_b))
    }
}

fn single_mode(mean: [f64; 2], cov: Matrix2<f64>) -> GaussianState {
    GaussianState::new(
        nalgebra::DVector::from_column_slice(&mean),
        nalgebra::DMatrix::from_column_slice(2, 2, cov.as_slice()),
    )
    .expect("probe state is well formed")
}

/// Covariance of a vacuum squeezed by `r` along the axis at angle `theta`,
/// in the natural units of an oscillator of frequency `omega`.
fn squeezed(omega: f64, r: f64, theta: f64) -> Matrix2<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    let rot = Matrix2::new(c, -s, s, c);
    let core = rot * Matrix2::new((-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp()) * rot.transpose() * 0.5;
    let scale = Matrix2::new(1.0 / omega.sqrt(), 0.0, 0.0, omega.sqrt());
    let out = scale * core * scale;
    0.5 * (out + out.transpose())
}

/// The fixed probe ensemble, expressed in the vacuum units of frequency `omega_s`:
/// coherent pairs displaced oppositely by separations 1, 2 and 4 along `x` and
/// along `p`, and orthogonally squeezed vacua with `r` of 0.5 and 1 along the
/// quadrature axes and along the diagonals.
pub fn default_ensemble(omega_s: f64) -> Vec<ProbePair> {
    let vac = squeezed(omega_s, 0.0, 0.0);
    let mut pairs = Vec::with_capacity(10);
    for sep in [1.0, 2.0, 4.0] {
        let dx = 0.5 * sep / omega_s.sqrt();
        let a = single_mode([dx, 0.0], vac);
        let b = single_mode([-dx, 0.0], vac);
        pairs.push(ProbePair::new(format!("coherent-x-{sep}"), &a, &b).expect("distinct coherent pair"));
    }
    for sep in [1.0, 2.0, 4.0] {
        let dp = 0.5 * sep * omega_s.sqrt();
        let a = single_mode([0.0, dp], vac);
        let b = single_mode([0.0, -dp], vac);
        pairs.push(ProbePair::new(format!("coherent-p-{sep}"), &a, &b).expect("distinct coherent pair"));
    }
    let quarter = std::f64::consts::FRAC_PI_4;
    for (name, theta) in [("axis", 0.0), ("diagonal", quarter)] {
        for r in [0.5, 1.0] {
            let a = single_mode([0.0, 0.0], squeezed(omega_s, r, theta));
            let b = single_mode([0.0, 0.0], squeezed(omega_s, r, theta + 2.0 * quarter));
            pairs.push(ProbePair::new(format!("squeezed-{name}-{r}"), &a, &b).expect("distinct squeezed pair"));
        }
    }
    pairs
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::config("dt", "time grid must start at 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("dt", "time grid must be strictly increasing"));
    }
    Ok(())
}

/// Fidelity of every pair on the time grid; the channel is built once per time.
pub fn fidelity_trajectories(sim: &Simulation, pairs: &[ProbePair], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    let mut out = vec![Vec::with_capacity(times.len()); pairs.len()];
    for &t in times {
        let ch = sim.reduced_channel(t)?;
        for (traj, p) in out.iter_mut().zip(pairs) {
            let (ma, ca) = ch.apply_2x2(&p.mean_a, &p.cov_a);
            let (mb, cb) = ch.apply_2x2(&p.mean_b, &p.cov_b);
            traj.push(fidelity_2x2(&ca, &cb, &(ma - mb)));
        }
    }
    Ok(out)
}

pub fn fidelity_trajectory(sim: &Simulation, pair: &ProbePair, times: &[f64]) -> Result<Vec<f64>> {
    Ok(fidelity_trajectories(sim, std::slice::from_ref(pair), times)?.remove(0))
}

/// Sum of the drops of a sequence.
pub fn negative_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NMResult {
    pub omega_s: f64,
    pub per_pair: Vec<(String, f64)>,
    pub n_measure: f64,
}

pub fn nm_measure(sim: &Simulation, pairs: &[ProbePair], times: &[f64]) -> Result<NMResult> {
    if pairs.is_empty() {
        return Err(Error::config("probe_pairs", "the probe ensemble is empty"));
    }
    let traj = fidelity_trajectories(sim, pairs, times)?;
    let per_pair: Vec<(String, f64)> = pairs
        .iter()
        .zip(&traj)
        .map(|(p, f)| (p.label.clone(), negative_variation(f)))
        .collect();
    let n_measure = per_pair.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(NMResult {
        omega_s: sim.params().omega_s,
        per_pair,
        n_measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{ModelParams, SpectralDensityParams};
    use crate::gaussian::fidelity_single_mode;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn sim(omega_s: f64, kappa: f64, n: usize) -> Simulation {
        let spec = SpectralDensityParams::new(kappa, 0.3, 0.7).unwrap();
        Simulation::new(ModelParams::new(omega_s, 1.0, spec, n).unwrap()).unwrap()
    }

    fn grid(t_max: f64, dt: f64) -> Vec<f64> {
        let n = (t_max / dt).round() as usize;
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn ensemble_shape() {
        let pairs = default_ensemble(0.5);
        assert_eq!(pairs.len(), 10);
        let mut labels: Vec<&str> = pairs.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 10);
        // Coherent pair at separation 2 in natural units: F = e^{-2}.
        let f = pairs.iter().find(|p| p.label == "coherent-x-2").unwrap().initial_fidelity();
        assert_relative_eq!(f, (-2.0f64).exp(), epsilon = 1e-12);
        assert!(pairs.iter().all(|p| p.initial_fidelity() < 1.0));
    }

    #[test]
    fn identical_pair_rejected() {
        let s = GaussianState::centered(DMatrix::identity(2, 2) * 0.5).unwrap();
        assert!(ProbePair::new("same", &s, &s).is_err());
        let two = GaussianState::centered(DMatrix::identity(4, 4) * 0.5).unwrap();
        assert!(ProbePair::new("wide", &two, &s).is_err());
    }

    #[test]
    fn decoupled_model_is_markovian() {
        let s = sim(0.8, 0.0, 6);
        let times = grid(50.0, 0.1);
        let r = nm_measure(&s, &default_ensemble(0.8), &times).unwrap();
        assert!(r.n_measure < 1e-12, "{}", r.n_measure);
        for p in default_ensemble(0.8).iter().take(3) {
            let f = fidelity_trajectory(&s, p, &times).unwrap();
            assert!(f.iter().all(|x| (x - f[0]).abs() < 1e-12));
        }
    }

    #[test]
    fn measure_definition() {
        assert_eq!(negative_variation(&[0.2, 0.5, 0.9]), 0.0);
        assert_relative_eq!(negative_variation(&[0.2, 0.5, 0.4, 0.9]), 0.1, epsilon = 1e-15);
        let s = sim(0.5, 0.02, 10);
        assert!(nm_measure(&s, &[], &grid(1.0, 0.1)).is_err());
        assert!(nm_measure(&s, &default_ensemble(0.5), &[0.1, 0.2]).is_err());
        let r = nm_measure(&s, &default_ensemble(0.5), &grid(20.0, 0.1)).unwrap();
        let max = r.per_pair.iter().map(|p| p.1).fold(0.0, f64::max);
        assert_eq!(r.n_measure, max);
        assert!(r.per_pair.iter().all(|p| p.1 >= 0.0));
    }

    #[test]
    fn trajectory_starts_at_raw_fidelity() {
        let s = sim(0.5, 0.02, 10);
        for p in default_ensemble(0.5) {
            let f = fidelity_trajectory(&s, &p, &[0.0, 1.0]).unwrap();
            assert_relative_eq!(f[0], p.initial_fidelity(), epsilon = 1e-13);
        }
    }

    proptest! {
        #[test]
        fn fidelity_invariant_under_common_symplectic_map(
            a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, dx in -2.0f64..2.0, r in 0.0f64..1.0,
        ) {
            // S = shear · squeeze, det S = 1.
            let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, a, 1.0]) * DMatrix::from_row_slice(2, 2, &[b.exp(), 0.0, 0.0, (-b).exp()]);
            let sa = GaussianState::new(DVector::from_vec(vec![dx, c]), DMatrix::from_row_slice(2, 2, &[0.5 * (2.0 * r).exp(), 0.0, 0.0, 0.5 * (-2.0 * r).exp()])).unwrap();
            let sb = GaussianState::new(DVector::from_vec(vec![-dx, 0.0]), DMatrix::identity(2, 2) * 0.7).unwrap();
            let before = fidelity_single_mode(&sa, &sb).unwrap();
            let after = fidelity_single_mode(&sa.transform(&s).unwrap(), &sb.transform(&s).unwrap()).unwrap();
            // Fidelity is only Hölder-1/2 in the purity of a near-pure input.
            prop_assert!((before - after).abs() < 1e-7);
        }

        #[test]
        fn measure_invariant_under_interpolated_refinement(
            coarse in proptest::collection::vec(0.0f64..1.0, 2..12),
            refine in 1usize..6,
        ) {
            let mut fine = Vec::new();
            for w in coarse.windows(2) {
                for k in 0..refine {
                    fine.push(w[0] + (w[1] - w[0]) * k as f64 / refine as f64);
                }
            }
            fine.push(*coarse.last().unwrap());
            prop_assert!((negative_variation(&fine) - negative_variation(&coarse)).abs() < 1e-12);
        }
    }
}
