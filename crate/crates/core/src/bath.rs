//! The microscopic model: a system oscillator bilinearly coupled in position to
//! a discretized bath whose spectral density has the Rubin form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

/// Parameters of `J(ω) = κ √(ω² − ω₀²) √(ω_R² − ω²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensityParams {
    pub kappa: f64,
    pub omega0: f64,
    pub omega_r: f64,
}

impl SpectralDensityParams {
    pub fn new(kappa: f64, omega0: f64, omega_r: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::config("kappa", format!("must be a non-negative number, got {kappa}")));
        }
        if !(omega0 >= 0.0 && omega0.is_finite()) {
            return Err(Error::config("omega0", format!("must be a non-negative number, got {omega0}")));
        }
        if !(omega_r > omega0 && omega_r.is_finite()) {
            return Err(Error::config(
                "omega_r",
                format!("must exceed omega0 = {omega0}, got {omega_r}"),
            ));
        }
        Ok(SpectralDensityParams { kappa, omega0, omega_r })
    }

    /// Nearest-neighbour coupling of the equivalent chain.
    pub fn chain_coupling(&self) -> f64 {
        (self.omega_r * self.omega_r - self.omega0 * self.omega0) / 4.0
    }
}

pub fn rubin_spectral_density(omega: f64, p: &SpectralDensityParams) -> f64 {
    if omega <= p.omega0 || omega >= p.omega_r {
        return 0.0;
    }
    p.kappa * ((omega - p.omega0) * (omega + p.omega0)).sqrt() * ((p.omega_r - omega) * (p.omega_r + omega)).sqrt()
}

/// Bath frequencies `ω_k = ω₀ + kΔ`, `k = 1..N`, and couplings `g_k = √(J(ω_k) ω_k Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BathDiscretization {
    pub n_osc: usize,
    pub delta: f64,
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

pub fn discretize(p: &SpectralDensityParams, n: usize) -> Result<BathDiscretization> {
    if n == 0 {
        return Err(Error::EmptyBath);
    }
    let delta = (p.omega_r - p.omega0) / n as f64;
    let omegas: Vec<f64> = (1..=n)
        .map(|k| if k == n { p.omega_r } else { p.omega0 + k as f64 * delta })
        .collect();
    let couplings = omegas
        .iter()
        .map(|&w| (rubin_spectral_density(w, p) * w * delta).sqrt())
        .collect();
    Ok(BathDiscretization {
        n_osc: n,
        delta,
        omegas,
        couplings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub omega_s: f64,
    pub squeezing_r: f64,
    pub bath: BathDiscretization,
    pub spectral: SpectralDensityParams,
}

impl ModelParams {
    /// Validates the frequencies and the stability of the coupled potential.
    pub fn new(omega_s: f64, squeezing_r: f64, spectral: SpectralDensityParams, n_osc: usize) -> Result<Self> {
        if !(omega_s > 0.0 && omega_s.is_finite()) {
            return Err(Error::config("omega_s", format!("must be positive, got {omega_s}")));
        }
        if !squeezing_r.is_finite() {
            return Err(Error::config("squeezing_r", "must be finite"));
        }
        let bath = discretize(&spectral, n_osc)?;
        let params = ModelParams {
            omega_s,
            squeezing_r,
            bath,
            spectral,
        };
        let min = schur_margin(&params);
        if min <= 0.0 {
            return Err(Error::Unstable { min_eigenvalue: stability_check(&potential_matrix(&params)) });
        }
        Ok(params)
    }

    pub fn n_modes(&self) -> usize {
        self.bath.n_osc + 1
    }
}

/// `ω_S² − Σ g_k²/ω_k²`, positive exactly when the star potential is positive definite.
fn schur_margin(m: &ModelParams) -> f64 {
    let load: f64 = m
        .bath
        .omegas
        .iter()
        .zip(&m.bath.couplings)
        .map(|(w, g)| g * g / (w * w))
        .sum();
    m.omega_s * m.omega_s - load
}

pub fn potential_matrix(m: &ModelParams) -> DMatrix<f64> {
    let n = m.n_modes();
    let mut v = DMatrix::zeros(n, n);
    v[(0, 0)] = m.omega_s * m.omega_s;
    for (k, (w, g)) in m.bath.omegas.iter().zip(&m.bath.couplings).enumerate() {
        v[(k + 1, k + 1)] = w * w;
        v[(0, k + 1)] = -g;
        v[(k + 1, 0)] = -g;
    }
    v
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn stability_check(v: &DMatrix<f64>) -> f64 {
    v.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `V = O diag(ν²) Oᵀ` with ascending normal-mode frequencies `ν`.
#[derive(Debug, Clone)]
pub struct NormalModeBasis {
    pub orthogonal: DMatrix<f64>,
    pub eigenfreqs: Vec<f64>,
}

pub fn normal_mode_decomposition(v: &DMatrix<f64>) -> Result<NormalModeBasis> {
    let eig = v.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..v.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let min = order.first().map_or(f64::INFINITY, |&i| eig.eigenvalues[i]);
    if min <= 0.0 {
        return Err(Error::Unstable { min_eigenvalue: min });
    }
    let orthogonal = eig.eigenvectors.select_columns(&order);
    let eigenfreqs = order.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    Ok(NormalModeBasis { orthogonal, eigenfreqs })
}

/// The symplectic matrix of the free evolution over a time `t`, interleaved ordering.
#[derive(Debug, Clone)]
pub struct SymplecticPropagator(pub DMatrix<f64>);

impl SymplecticPropagator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }
}

/// `O diag(f) Oᵀ`.
pub(crate) fn conjugate_diag(o: &DMatrix<f64>, f: &[f64]) -> DMatrix<f64> {
    let mut scaled = o.clone();
    for (mut col, &fk) in scaled.column_iter_mut().zip(f) {
        col *= fk;
    }
    scaled * o.transpose()
}

/// Interleaves position/momentum blocks into the `(x1, p1, ...)` ordering.
pub(crate) fn interleave(xx: &DMatrix<f64>, xp: &DMatrix<f64>, px: &DMatrix<f64>, pp: &DMatrix<f64>) -> DMatrix<f64> {
    let n = xx.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (a, b) = (i / 2, j / 2);
        match (i % 2, j % 2) {
            (0, 0) => xx[(a, b)],
            (0, _) => xp[(a, b)],
            (_, 0) => px[(a, b)],
            _ => pp[(a, b)],
        }
    })
}

pub fn propagator(basis: &NormalModeBasis, t: f64) -> SymplecticPropagator {
    let nu = &basis.eigenfreqs;
    let c: Vec<f64> = nu.iter().map(|v| (v * t).cos()).collect();
    let s_over: Vec<f64> = nu.iter().map(|v| (v * t).sin() / v).collect();
    let s_times: Vec<f64> = nu.iter().map(|v| -(v * t).sin() * v).collect();
    let o = &basis.orthogonal;
    let xx = conjugate_diag(o, &c);
    let xp = conjugate_diag(o, &s_over);
    let px = conjugate_diag(o, &s_times);
    SymplecticPropagator(interleave(&xx, &xp, &px, &xx))
}

/// System variances `(Var x, Var p)` of the squeezed initial state.
pub fn system_variances(omega_s: f64, r: f64) -> (f64, f64) {
    ((2.0 * r).exp() / (2.0 * omega_s), omega_s * (-2.0 * r).exp() / 2.0)
}

/// Squeezed system times bath vacuum. The anti-squeezed system quadrature is
/// stored as the state's stiff term; the product state is marked pure.
pub fn initial_state(m: &ModelParams) -> GaussianState {
    let n = m.n_modes();
    let mut diag = DVector::zeros(2 * n);
    for (k, w) in m.bath.omegas.iter().enumerate() {
        diag[2 * (k + 1)] = 1.0 / (2.0 * w);
        diag[2 * (k + 1) + 1] = w / 2.0;
    }
    let (vx, vp) = system_variances(m.omega_s, m.squeezing_r);
    let mut dir = DVector::zeros(2 * n);
    let weight = if vx >= vp {
        diag[1] = vp;
        dir[0] = 1.0;
        vx
    } else {
        diag[0] = vx;
        dir[1] = 1.0;
        vp
    };
    GaussianState::centered(DMatrix::from_diagonal(&diag))
        .and_then(|s| s.with_stiff(dir, weight))
        .expect("initial covariance is diagonal and finite")
        .assume_pure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::SymplecticForm;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn default_band(kappa: f64) -> SpectralDensityParams {
        SpectralDensityParams::new(kappa, 0.3, 0.7).unwrap()
    }

    #[test]
    fn spectral_density_shape() {
        let p = default_band(1.0);
        assert_eq!(rubin_spectral_density(0.3, &p), 0.0);
        assert_eq!(rubin_spectral_density(0.7, &p), 0.0);
        assert_eq!(rubin_spectral_density(0.8, &p), 0.0);
        let peak = ((0.09f64 + 0.49) / 2.0).sqrt();
        assert_relative_eq!(peak, 0.538_516, epsilon = 1e-6);
        assert_relative_eq!(rubin_spectral_density(peak, &p), 0.2, epsilon = 1e-12);
        let ohmic = SpectralDensityParams::new(0.5, 0.0, 1.0).unwrap();
        let w = 0.4f64;
        assert_relative_eq!(rubin_spectral_density(w, &ohmic), 0.5 * w * (1.0 - w * w).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(p.chain_coupling(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn parameter_validation() {
        assert!(SpectralDensityParams::new(0.1, 0.7, 0.3).is_err());
        assert!(SpectralDensityParams::new(-1.0, 0.3, 0.7).is_err());
        assert!(matches!(discretize(&default_band(0.1), 0), Err(Error::EmptyBath)));
        assert!(ModelParams::new(0.0, 1.0, default_band(0.01), 4).is_err());
    }

    #[test]
    fn discretization_grid() {
        let p = default_band(0.02);
        let b = discretize(&p, 300).unwrap();
        assert_relative_eq!(b.delta, 1.0 / 750.0, epsilon = 1e-15);
        assert_eq!(b.omegas[299], 0.7);
        assert_eq!(b.couplings[299], 0.0);
        assert!(b.omegas.windows(2).all(|w| w[1] > w[0]) && b.omegas[0] > 0.3);
        for (w, g) in b.omegas.iter().zip(&b.couplings) {
            let want = rubin_spectral_density(*w, &p) * w * b.delta;
            assert!((g * g - want).abs() <= 1e-12 * want.max(1e-300));
        }
    }

    #[test]
    fn riemann_sums_converge() {
        let p = default_band(1.0);
        // ∫ J/ω dω has the closed form κπ(ω_R − ω₀)²/4.
        let exact_over = std::f64::consts::PI * 0.16 / 4.0;
        // ∫ J dω by a fine midpoint rule.
        let m = 2_000_000;
        let h = 0.4 / m as f64;
        let exact_j: f64 = (0..m).map(|i| rubin_spectral_density(0.3 + (i as f64 + 0.5) * h, &p) * h).sum();
        let errs = |n: usize| {
            let b = discretize(&p, n).unwrap();
            let over: f64 = b.omegas.iter().zip(&b.couplings).map(|(w, g)| g * g / (w * w)).sum();
            let j: f64 = b.omegas.iter().zip(&b.couplings).map(|(w, g)| g * g / w).sum();
            ((over - exact_over).abs(), (j - exact_j).abs())
        };
        let (a75, b75) = errs(75);
        let (a150, b150) = errs(150);
        let (a300, b300) = errs(300);
        assert!(a150 < a75 && a300 < a150);
        assert!(b150 < b75 && b300 < b150);
    }

    #[test]
    fn potential_structure() {
        let m = ModelParams::new(0.5, 1.0, default_band(0.02), 1).unwrap();
        let v = potential_matrix(&m);
        let (g, w) = (m.bath.couplings[0], m.bath.omegas[0]);
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[0.25, -g, -g, w * w]));
        let free = ModelParams::new(0.5, 1.0, default_band(0.0), 5).unwrap();
        let v0 = potential_matrix(&free);
        assert_eq!(v0, DMatrix::from_diagonal(&v0.diagonal()));
        assert_relative_eq!(stability_check(&v0), 0.25f64.min(free.bath.omegas[0].powi(2)), epsilon = 1e-14);
    }

    #[test]
    fn stability_matches_schur_criterion() {
        for kappa in [0.001, 0.01, 0.05, 0.1, 0.5] {
            for omega_s in [0.05, 0.1, 0.2, 0.5, 1.2] {
                let spectral = default_band(kappa);
                let bath = discretize(&spectral, 60).unwrap();
                let m = ModelParams { omega_s, squeezing_r: 0.0, bath, spectral };
                let eig = stability_check(&potential_matrix(&m));
                assert_eq!(eig > 0.0, schur_margin(&m) > 0.0, "kappa {kappa} omega_s {omega_s}");
                assert_eq!(ModelParams::new(omega_s, 0.0, spectral, 60).is_ok(), eig > 0.0);
            }
        }
        let spectral = default_band(1e5);
        let bath = discretize(&spectral, 60).unwrap();
        let m = ModelParams { omega_s: 0.5, squeezing_r: 0.0, bath, spectral };
        assert!(stability_check(&potential_matrix(&m)) < 0.0);
    }

    #[test]
    fn initial_state_conventions() {
        let m = ModelParams::new(0.3, 3.0, default_band(0.02), 4).unwrap();
        let cov = initial_state(&m).covariance();
        assert_relative_eq!(cov[(0, 0)], 6f64.exp() / 0.6, epsilon = 1e-9);
        assert_relative_eq!(cov[(0, 0)], 672.381_322_488, epsilon = 1e-8);
        assert_relative_eq!(cov[(1, 1)], 0.15 * (-6f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(cov[(2, 2)], 1.0 / (2.0 * m.bath.omegas[0]), epsilon = 1e-15);
        let st = initial_state(&m);
        assert!(st.symplectic_eigenvalues().unwrap().iter().all(|nu| (nu - 0.5).abs() < 1e-12));
        let vac = initial_state(&ModelParams::new(0.3, 0.0, default_band(0.02), 4).unwrap()).covariance();
        assert_relative_eq!(vac[(0, 0)], 1.0 / 0.6, epsilon = 1e-15);
        assert_relative_eq!(vac[(1, 1)], 0.15, epsilon = 1e-15);
    }

    #[test]
    fn propagator_basics() {
        let m = ModelParams::new(0.5, 0.0, default_band(0.02), 12).unwrap();
        let basis = normal_mode_decomposition(&potential_matrix(&m)).unwrap();
        let n = m.n_modes();
        let omega = SymplecticForm::matrix(n);
        assert!((propagator(&basis, 0.0).0 - DMatrix::identity(2 * n, 2 * n)).amax() < 1e-14);
        let (t1, t2) = (3.7, 11.2);
        let s1 = propagator(&basis, t1).0;
        let s2 = propagator(&basis, t2).0;
        let s12 = propagator(&basis, t1 + t2).0;
        assert!((&s1 * &s2 - &s12).amax() < 1e-8);
        assert!((&s1 * &omega * s1.transpose() - &omega).amax() < 1e-9);
        assert!((&s1 * propagator(&basis, -t1).0 - DMatrix::identity(2 * n, 2 * n)).amax() < 1e-8);

        let free = ModelParams::new(0.5, 0.0, default_band(0.0), 3).unwrap();
        let fb = normal_mode_decomposition(&potential_matrix(&free)).unwrap();
        let period = 2.0 * std::f64::consts::PI / 0.5;
        let s = propagator(&fb, period).0;
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((s[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn two_mode_decomposition_closed_form() {
        let m = ModelParams::new(0.45, 0.0, default_band(0.3), 1).unwrap();
        let v = potential_matrix(&m);
        let basis = normal_mode_decomposition(&v).unwrap();
        let (a, b, c) = (v[(0, 0)], v[(1, 1)], v[(0, 1)]);
        let mid = 0.5 * (a + b);
        let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
        assert_relative_eq!(basis.eigenfreqs[0], (mid - rad).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(basis.eigenfreqs[1], (mid + rad).sqrt(), epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs_random_stable_potentials(
            n in 1usize..12,
            omega_s in 0.2f64..1.5,
            kappa in 0.0f64..0.2,
        ) {
            let m = ModelParams::new(omega_s, 0.0, default_band(kappa), n);
            prop_assume!(m.is_ok());
            let v = potential_matrix(&m.unwrap());
            let basis = normal_mode_decomposition(&v).unwrap();
            let o = &basis.orthogonal;
            let sq: Vec<f64> = basis.eigenfreqs.iter().map(|x| x * x).collect();
            prop_assert!((o * o.transpose() - DMatrix::identity(n + 1, n + 1)).amax() < 1e-10);
            prop_assert!((conjugate_diag(o, &sq) - &v).amax() < 1e-9 * v.amax());
        }
    }
}
