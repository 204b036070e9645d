//! Gaussian states in the interleaved quadrature ordering `(x1, p1, x2, p2, ...)`.
//!
//! Units have `ħ = 1`, so the vacuum covariance of a unit-frequency mode is
//! `I/2` and every symplectic eigenvalue of a physical state is at least `1/2`.
//! Entropies are in nats.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linalg;

/// Symplectic eigenvalues this far below `1/2` are rounded up to `1/2`; states
/// with a stiff term get a wider margin, see [`GaussianState::physical_tolerance`].
pub const PHYSICAL_TOL: f64 = 1e-9;

/// An ordered set of distinct mode indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSet(Vec<usize>);

impl ModeSet {
    pub fn new(modes: Vec<usize>) -> Result<Self> {
        let mut seen = modes.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("duplicate mode in {modes:?}")));
        }
        Ok(ModeSet(modes))
    }

    pub fn all(n_modes: usize) -> Self {
        ModeSet((0..n_modes).collect())
    }

    pub fn single(mode: usize) -> Self {
        ModeSet(vec![mode])
    }

    /// Modes of `0..n_modes` not in `self`, ascending.
    pub fn complement(&self, n_modes: usize) -> Self {
        let mut keep = vec![true; n_modes];
        for &m in &self.0 {
            if m < n_modes {
                keep[m] = false;
            }
        }
        ModeSet((0..n_modes).filter(|&m| keep[m]).collect())
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Row indices of the quadratures belonging to these modes.
    pub fn quadrature_indices(&self) -> Vec<usize> {
        self.0.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
    }

    fn check_range(&self, n_modes: usize) -> Result<()> {
        match self.0.iter().find(|&&m| m >= n_modes) {
            Some(m) => Err(Error::InvalidSubset(format!(
                "mode {m} out of range for a {n_modes}-mode state"
            ))),
            None => Ok(()),
        }
    }
}

/// The symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub struct SymplecticForm;

impl SymplecticForm {
    pub fn matrix(n_modes: usize) -> DMatrix<f64> {
        let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
        for i in 0..n_modes {
            omega[(2 * i, 2 * i + 1)] = 1.0;
            omega[(2 * i + 1, 2 * i)] = -1.0;
        }
        omega
    }
}

/// A rank-one covariance contribution `weight · direction directionᵀ`, kept apart
/// from the rest of the covariance because its scale would swamp it.
#[derive(Debug, Clone)]
pub struct StiffQuadrature {
    pub direction: DVector<f64>,
    pub weight: f64,
}

/// A Gaussian state with covariance `regular + stiff`.
#[derive(Debug, Clone)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    stiff: Option<StiffQuadrature>,
    pure: bool,
    noise: f64,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n != cov.ncols() || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square with even order, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {}, covariance has order {n}",
                mean.len()
            )));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        let asym = (&cov - cov.transpose()).amax();
        if !cov.iter().all(|x| x.is_finite()) || asym > 1e-10 * scale {
            return Err(Error::InvalidCovariance("covariance is not finite and symmetric".into()));
        }
        let noise = f64::EPSILON * cov.amax();
        Ok(GaussianState {
            mean,
            cov,
            stiff: None,
            pure: false,
            noise,
        })
    }

    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, stiff: Option<StiffQuadrature>, pure: bool) -> Self {
        let noise = f64::EPSILON * cov.amax();
        GaussianState { mean, cov, stiff, pure, noise }
    }

    /// Zero-mean state with the given covariance.
    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        Self::new(DVector::zeros(n), cov)
    }

    /// Adds a stiff rank-one term to the covariance.
    pub fn with_stiff(mut self, direction: DVector<f64>, weight: f64) -> Result<Self> {
        if direction.len() != self.cov.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "stiff direction has length {}, covariance has order {}",
                direction.len(),
                self.cov.nrows()
            )));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidCovariance(format!("stiff weight {weight} is not a finite non-negative number")));
        }
        self.stiff = Some(StiffQuadrature { direction, weight });
        Ok(self)
    }

    /// Marks the global state as pure, enabling complement-side entropies.
    pub fn assume_pure(mut self) -> Self {
        self.pure = true;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Covariance without the stiff term.
    pub fn regular_covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn stiff(&self) -> Option<&StiffQuadrature> {
        self.stiff.as_ref()
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    /// Full covariance matrix, stiff term included.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut cov = self.cov.clone();
        if let Some(s) = &self.stiff {
            cov.ger(s.weight, &s.direction, &s.direction, 1.0);
        }
        cov
    }

    /// Applies the affine symplectic map `u -> S u`.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.cov.nrows() || s.ncols() != self.cov.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "transform is {}x{}, state has order {}",
                s.nrows(),
                s.ncols(),
                self.cov.nrows()
            )));
        }
        let cov = s * &self.cov * s.transpose();
        let noise = f64::EPSILON * cov.amax();
        Ok(GaussianState {
            noise,
            mean: s * &self.mean,
            cov: (&cov + cov.transpose()) * 0.5,
            stiff: self.stiff.as_ref().map(|st| StiffQuadrature {
                direction: s * &st.direction,
                weight: st.weight,
            }),
            pure: self.pure,
        })
    }

    /// Shifts the mean by `delta`.
    pub fn displaced(mut self, delta: &DVector<f64>) -> Result<Self> {
        if delta.len() != self.mean.len() {
            return Err(Error::DimensionMismatch("displacement length differs from state order".into()));
        }
        self.mean += delta;
        Ok(self)
    }

    /// Marginal state of the given modes.
    pub fn reduce(&self, modes: &ModeSet) -> Result<Self> {
        modes.check_range(self.n_modes())?;
        let idx = modes.quadrature_indices();
        let cov = self.cov.select_rows(&idx).select_columns(&idx);
        let mean = self.mean.select_rows(&idx);
        let stiff = self.stiff.as_ref().and_then(|s| {
            let direction = s.direction.select_rows(&idx);
            (direction.norm_squared() > 0.0).then_some(StiffQuadrature {
                direction,
                weight: s.weight,
            })
        });
        let whole = modes.len() == self.n_modes();
        Ok(GaussianState {
            mean,
            cov,
            stiff,
            pure: self.pure && whole,
            noise: self.noise,
        })
    }

    /// Symplectic eigenvalues, ascending, rounded up to `1/2` within the physical tolerance.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        clamp_physical(self.raw_symplectic_eigenvalues()?, self.physical_tolerance())
    }

    /// Symplectic eigenvalues as computed, ascending, without the physicality check.
    pub fn raw_symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.n_modes() == 0 {
            return Ok(Vec::new());
        }
        match &self.stiff {
            Some(s) => linalg::symplectic_spectrum(&self.cov, Some((&s.direction, s.weight)))
                .or_else(|_| linalg::symplectic_spectrum(&self.covariance(), None)),
            None => linalg::symplectic_spectrum(&self.cov, None),
        }
    }

    /// Absolute error scale of the symplectic eigenvalues. Rounding in the regular
    /// part, inherited from the state a marginal was taken of, is amplified by the
    /// stiff weight along the conjugate quadrature.
    pub fn physical_tolerance(&self) -> f64 {
        let amplified = self
            .stiff
            .as_ref()
            .map_or(0.0, |s| s.weight * s.direction.norm_squared() * self.noise);
        PHYSICAL_TOL + amplified
    }

    /// Von Neumann entropy of the marginal on `modes`. For a pure global state the
    /// smaller of the subset and its complement is diagonalized.
    pub fn entropy_of(&self, modes: &ModeSet) -> Result<f64> {
        modes.check_range(self.n_modes())?;
        if self.pure {
            let rest = modes.complement(self.n_modes());
            if rest.len() + modes.len() != self.n_modes() {
                return Err(Error::InvalidSubset(format!("duplicate mode in {:?}", modes.modes())));
            }
            if rest.is_empty() {
                return Ok(0.0);
            }
            if rest.len() < modes.len() {
                return self.reduce(&rest)?.entropy();
            }
        }
        self.reduce(modes)?.entropy()
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        if self.pure {
            return Ok(0.0);
        }
        Ok(self.symplectic_eigenvalues()?.into_iter().map(entropy_term).sum())
    }
}

fn clamp_physical(raw: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    raw.into_iter()
        .map(|nu| {
            if nu >= 0.5 {
                Ok(nu)
            } else if nu >= 0.5 - tol {
                Ok(0.5)
            } else {
                Err(Error::Unphysical { value: nu })
            }
        })
        .collect()
}

/// Marginal state of the given modes.
pub fn reduce_to_modes(state: &GaussianState, modes: &ModeSet) -> Result<GaussianState> {
    state.reduce(modes)
}

/// Symplectic eigenvalues of a covariance matrix, ascending.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    GaussianState::centered(cov.clone())?.symplectic_eigenvalues()
}

/// Entropy contribution `(ν+½)ln(ν+½) − (ν−½)ln(ν−½)` of one symplectic eigenvalue.
pub fn entropy_term(nu: f64) -> f64 {
    let up = nu + 0.5;
    let down = nu - 0.5;
    let tail = if down > 0.0 { down * down.ln() } else { 0.0 };
    up * up.ln() - tail
}

/// Von Neumann entropy of a Gaussian state in nats.
pub fn von_neumann_entropy(state: &GaussianState) -> Result<f64> {
    state.entropy()
}

/// Errors unless the covariance satisfies the uncertainty principle.
pub fn check_physical(cov: &DMatrix<f64>) -> Result<()> {
    symplectic_eigenvalues(cov).map(|_| ())
}

/// Uhlmann fidelity `Tr(√(√ρ σ √ρ))²` of two single-mode Gaussian states.
pub fn fidelity_single_mode(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    for s in [a, b] {
        if s.n_modes() != 1 {
            return Err(Error::WrongArity {
                expected: 1,
                got: s.n_modes(),
            });
        }
    }
    let ca = a.covariance();
    let cb = b.covariance();
    let ma = Matrix2::new(ca[(0, 0)], ca[(0, 1)], ca[(1, 0)], ca[(1, 1)]);
    let mb = Matrix2::new(cb[(0, 0)], cb[(0, 1)], cb[(1, 0)], cb[(1, 1)]);
    let du = Vector2::new(a.mean[0] - b.mean[0], a.mean[1] - b.mean[1]);
    Ok(fidelity_2x2(&ma, &mb, &du))
}

pub(crate) fn fidelity_2x2(a: &Matrix2<f64>, b: &Matrix2<f64>, du: &Vector2<f64>) -> f64 {
    let sum = a + b;
    let det_sum = sum[(0, 0)] * sum[(1, 1)] - sum[(0, 1)] * sum[(1, 0)];
    let det_a = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let det_b = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    let lambda = ((4.0 * det_a - 1.0) * (4.0 * det_b - 1.0) / 4.0).max(0.0);
    // (A+B)^{-1} via the adjugate keeps the quadratic form symmetric.
    let quad = (sum[(1, 1)] * du[0] * du[0] - (sum[(0, 1)] + sum[(1, 0)]) * du[0] * du[1]
        + sum[(0, 0)] * du[1] * du[1])
        / det_sum;
    let denom = (det_sum + lambda).sqrt() - lambda.sqrt();
    ((-0.5 * quad).exp() / denom).clamp(0.0, 1.0)
}
