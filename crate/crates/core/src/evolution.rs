//! Exact Gaussian evolution of the model, the reduced channel on the system and
//! branch decoherence factors.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::bath::{
    initial_state, interleave, normal_mode_decomposition, potential_matrix, propagator, ModelParams,
    NormalModeBasis, SymplecticPropagator,
};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, ModeSet, StiffQuadrature};

/// Tolerance of the complete-positivity check.
pub const CP_TOL: f64 = 1e-9;

/// `σ -> X σ Xᵀ + Y` on the system mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedChannel {
    pub x_matrix: Matrix2<f64>,
    pub y_matrix: Matrix2<f64>,
}

impl ReducedChannel {
    /// Smallest slack of `Y + (i/2)(Ω − XΩXᵀ) ≥ 0`; negative means a violation.
    pub fn cp_margin(&self) -> f64 {
        let y = &self.y_matrix;
        let det_x = self.x_matrix.determinant();
        let det_y = y[(0, 0)] * y[(1, 1)] - y[(0, 1)] * y[(1, 0)];
        let need = 0.25 * (1.0 - det_x) * (1.0 - det_x);
        y[(0, 0)].min(y[(1, 1)]).min(det_y - need)
    }

    pub fn check_cp(&self) -> Result<()> {
        let scale = self.y_matrix.amax().max(1.0);
        let margin = self.cp_margin();
        if margin < -CP_TOL * scale * scale {
            return Err(Error::NotCompletelyPositive(margin));
        }
        Ok(())
    }

    /// Output of the channel for a single-mode input.
    pub fn apply(&self, input: &GaussianState) -> Result<GaussianState> {
        if input.n_modes() != 1 {
            return Err(Error::WrongArity {
                expected: 1,
                got: input.n_modes(),
            });
        }
        let x = DMatrix::from_column_slice(2, 2, self.x_matrix.as_slice());
        let y = DMatrix::from_column_slice(2, 2, self.y_matrix.as_slice());
        let cov = &x * input.regular_covariance() * x.transpose() + y;
        let cov = (&cov + cov.transpose()) * 0.5;
        let stiff = input.stiff().map(|s| StiffQuadrature {
            direction: &x * &s.direction,
            weight: s.weight,
        });
        Ok(GaussianState::from_parts(&x * input.mean(), cov, stiff, false))
    }

    pub(crate) fn apply_2x2(&self, mean: &Vector2<f64>, cov: &Matrix2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
        let out = self.x_matrix * cov * self.x_matrix.transpose() + self.y_matrix;
        (self.x_matrix * mean, 0.5 * (out + out.transpose()))
    }
}

/// `cov -> S cov Sᵀ`, `mean -> S mean`.
pub fn evolve_covariance(prop: &SymplecticPropagator, initial: &GaussianState) -> Result<GaussianState> {
    if prop.n_modes() != initial.n_modes() {
        return Err(Error::WrongArity {
            expected: prop.n_modes(),
            got: initial.n_modes(),
        });
    }
    initial.transform(prop.matrix())
}

/// Reduced channel on mode 0 induced by `prop` with the bath prepared in `bath_cov0`.
pub fn reduced_channel(prop: &SymplecticPropagator, bath_cov0: &DMatrix<f64>) -> Result<ReducedChannel> {
    let s = prop.matrix();
    let n = s.nrows();
    if bath_cov0.nrows() + 2 != n || bath_cov0.ncols() + 2 != n {
        return Err(Error::DimensionMismatch(format!(
            "bath covariance has order {}, propagator needs {}",
            bath_cov0.nrows(),
            n.saturating_sub(2)
        )));
    }
    let sse = s.view((0, 2), (2, n - 2));
    let y = sse * bath_cov0 * sse.transpose();
    let channel = ReducedChannel {
        x_matrix: Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]),
        y_matrix: Matrix2::new(y[(0, 0)], 0.5 * (y[(0, 1)] + y[(1, 0)]), 0.5 * (y[(0, 1)] + y[(1, 0)]), y[(1, 1)]),
    };
    channel.check_cp()?;
    Ok(channel)
}

/// Overlap exponent `d` of branch states conditioned on the initial system position.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceRecord {
    pub time: f64,
    pub fragment: ModeSet,
    pub d_value: f64,
}

/// `d = ¼ wᵀ σ_f⁻¹ w`, with `w` the fragment response to the initial system
/// position and `σ_f` the fragment covariance of a branch, i.e. conditioned on
/// that initial position.
///
/// `initial` is the global state at time zero and `prop` the propagator to `t`.
pub fn decoherence_factor(
    prop: &SymplecticPropagator,
    initial: &GaussianState,
    fragment: &ModeSet,
    t: f64,
) -> Result<DecoherenceRecord> {
    if prop.n_modes() != initial.n_modes() {
        return Err(Error::WrongArity {
            expected: prop.n_modes(),
            got: initial.n_modes(),
        });
    }
    check_fragment(fragment, initial.n_modes())?;
    if fragment.is_empty() {
        return Ok(DecoherenceRecord {
            time: t,
            fragment: fragment.clone(),
            d_value: 0.0,
        });
    }
    let idx = fragment.quadrature_indices();
    let rows = prop.matrix().select_rows(&idx);
    let w = rows.column(0).into_owned();
    let branch = conditioned_on_position(initial);
    let sigma = &rows * branch * rows.transpose();
    let d = quarter_form(&sigma, &w)?;
    Ok(DecoherenceRecord {
        time: t,
        fragment: fragment.clone(),
        d_value: d,
    })
}

fn check_fragment(fragment: &ModeSet, n_modes: usize) -> Result<()> {
    if fragment.modes().contains(&0) {
        return Err(Error::InvalidSubset("fragment must exclude the system mode".into()));
    }
    if let Some(m) = fragment.modes().iter().find(|&&m| m >= n_modes) {
        return Err(Error::InvalidSubset(format!("mode {m} out of range for a {n_modes}-mode state")));
    }
    Ok(())
}

/// Initial covariance conditioned on the system position.
fn conditioned_on_position(initial: &GaussianState) -> DMatrix<f64> {
    let along_x = initial.stiff().is_some_and(|s| {
        s.direction[0] != 0.0 && s.direction.iter().skip(1).all(|&v| v == 0.0)
    });
    let base = if along_x {
        initial.regular_covariance().clone()
    } else {
        initial.covariance()
    };
    let v = base[(0, 0)];
    if v <= 0.0 {
        return base;
    }
    let col = base.column(0).into_owned();
    let mut out = base;
    out.ger(-1.0 / v, &col, &col, 1.0);
    out
}

fn quarter_form(sigma: &DMatrix<f64>, w: &DVector<f64>) -> Result<f64> {
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalDegeneracy("fragment covariance is singular".into()))?;
    let z = chol.l().solve_lower_triangular(w).expect("Cholesky factor is nonsingular");
    Ok(0.25 * z.norm_squared())
}

/// A model prepared for repeated evaluation at arbitrary times.
///
/// The initial covariance is diagonal in positions and momenta separately, so
/// its normal-frame images are computed once and each time sample costs a few
/// dense products.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    basis: NormalModeBasis,
    initial: GaussianState,
    frame_x: DMatrix<f64>,
    frame_p: DMatrix<f64>,
    stiff_along_x: bool,
    stiff_weight: f64,
    bath_x: Vec<f64>,
    bath_p: Vec<f64>,
}

struct Trig {
    cos: Vec<f64>,
    sin_over: Vec<f64>,
    sin_times: Vec<f64>,
}

impl Simulation {
    pub fn new(params: ModelParams) -> Result<Self> {
        let basis = normal_mode_decomposition(&potential_matrix(&params))?;
        let initial = initial_state(&params);
        let n = params.n_modes();
        let reg = initial.regular_covariance();
        let a: Vec<f64> = (0..n).map(|k| reg[(2 * k, 2 * k)]).collect();
        let b: Vec<f64> = (0..n).map(|k| reg[(2 * k + 1, 2 * k + 1)]).collect();
        let o = &basis.orthogonal;
        let frame = |f: &[f64]| {
            let mut scaled = o.clone();
            for (mut row, &fk) in scaled.row_iter_mut().zip(f) {
                row *= fk;
            }
            let m = o.tr_mul(&scaled);
            (&m + m.transpose()) * 0.5
        };
        let stiff = initial.stiff().expect("initial state carries its squeezed quadrature");
        let stiff_along_x = stiff.direction[0] != 0.0;
        let stiff_weight = stiff.weight;
        Ok(Simulation {
            frame_x: frame(&a),
            frame_p: frame(&b),
            bath_x: a[1..].to_vec(),
            bath_p: b[1..].to_vec(),
            stiff_along_x,
            stiff_weight,
            initial,
            basis,
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &NormalModeBasis {
        &self.basis
    }

    pub fn initial(&self) -> &GaussianState {
        &self.initial
    }

    pub fn n_modes(&self) -> usize {
        self.params.n_modes()
    }

    pub fn propagator(&self, t: f64) -> SymplecticPropagator {
        propagator(&self.basis, t)
    }

    fn trig(&self, t: f64) -> Trig {
        let nu = &self.basis.eigenfreqs;
        Trig {
            cos: nu.iter().map(|v| (v * t).cos()).collect(),
            sin_over: nu.iter().map(|v| (v * t).sin() / v).collect(),
            sin_times: nu.iter().map(|v| (v * t).sin() * v).collect(),
        }
    }

    /// Global state at time `t`; pure, with the stiff term carried along.
    pub fn state_at(&self, t: f64) -> GaussianState {
        let n = self.n_modes();
        let Trig { cos: c, sin_over: so, sin_times: vs } = self.trig(t);
        let (fx, fp) = (&self.frame_x, &self.frame_p);
        let mut yy = DMatrix::zeros(n, n);
        let mut yq = DMatrix::zeros(n, n);
        let mut qq = DMatrix::zeros(n, n);
        for l in 0..n {
            for k in 0..n {
                let (x, p) = (fx[(k, l)], fp[(k, l)]);
                yy[(k, l)] = c[k] * c[l] * x + so[k] * so[l] * p;
                yq[(k, l)] = -c[k] * vs[l] * x + so[k] * c[l] * p;
                qq[(k, l)] = vs[k] * vs[l] * x + c[k] * c[l] * p;
            }
        }
        let o = &self.basis.orthogonal;
        let back = |m: &DMatrix<f64>| o * m * o.transpose();
        let xx = back(&yy);
        let xp = back(&yq);
        let pp = back(&qq);
        let xx = (&xx + xx.transpose()) * 0.5;
        let pp = (&pp + pp.transpose()) * 0.5;
        let cov = interleave(&xx, &xp, &xp.transpose(), &pp);

        let o0: Vec<f64> = o.row(0).iter().copied().collect();
        let along = |f: &dyn Fn(usize) -> f64| o * DVector::from_fn(n, |k, _| f(k) * o0[k]);
        let (dx, dp) = if self.stiff_along_x {
            (along(&|k| c[k]), along(&|k| -vs[k]))
        } else {
            (along(&|k| so[k]), along(&|k| c[k]))
        };
        let dir = DVector::from_fn(2 * n, |i, _| if i % 2 == 0 { dx[i / 2] } else { dp[i / 2] });
        GaussianState::from_parts(
            DVector::zeros(2 * n),
            cov,
            Some(StiffQuadrature {
                direction: dir,
                weight: self.stiff_weight,
            }),
            true,
        )
    }

    /// Rows `x₀` and `p₀` of the propagator as `(x-columns, p-columns)` pairs.
    pub fn system_rows(&self, t: f64) -> [(DVector<f64>, DVector<f64>); 2] {
        let n = self.n_modes();
        let Trig { cos: c, sin_over: so, sin_times: vs } = self.trig(t);
        let o = &self.basis.orthogonal;
        let o0: Vec<f64> = o.row(0).iter().copied().collect();
        let along = |f: &dyn Fn(usize) -> f64| o * DVector::from_fn(n, |k, _| f(k) * o0[k]);
        let cc = along(&|k| c[k]);
        let sv = along(&|k| so[k]);
        let vs = along(&|k| -vs[k]);
        [(cc.clone(), sv), (vs, cc)]
    }

    /// Reduced channel at `t` for the vacuum bath, in `O(N²)`.
    pub fn reduced_channel(&self, t: f64) -> Result<ReducedChannel> {
        let [(xx, xp), (px, pp)] = self.system_rows(t);
        let mut y = Matrix2::zeros();
        for k in 1..self.n_modes() {
            let (ax, ap) = (self.bath_x[k - 1], self.bath_p[k - 1]);
            let rx = [xx[k], px[k]];
            let rp = [xp[k], pp[k]];
            for i in 0..2 {
                for j in 0..2 {
                    y[(i, j)] += rx[i] * rx[j] * ax + rp[i] * rp[j] * ap;
                }
            }
        }
        let channel = ReducedChannel {
            x_matrix: Matrix2::new(xx[0], xp[0], px[0], pp[0]),
            y_matrix: y,
        };
        channel.check_cp()?;
        Ok(channel)
    }

    /// Initial system marginal.
    pub fn initial_system(&self) -> GaussianState {
        self.initial.reduce(&ModeSet::single(0)).expect("mode 0 exists")
    }

    /// Decoherence factor of a fragment, reading the branch covariance off `state`,
    /// which must be [`Simulation::state_at`] evaluated at `t`.
    pub fn decoherence(&self, state: &GaussianState, fragment: &ModeSet, t: f64) -> Result<DecoherenceRecord> {
        check_fragment(fragment, self.n_modes())?;
        if fragment.is_empty() {
            return Ok(DecoherenceRecord {
                time: t,
                fragment: fragment.clone(),
                d_value: 0.0,
            });
        }
        if !self.stiff_along_x {
            return decoherence_factor(&self.propagator(t), &self.initial, fragment, t);
        }
        let idx = fragment.quadrature_indices();
        let sigma = state.regular_covariance().select_rows(&idx).select_columns(&idx);
        let w = self.response_to_position(t).select_rows(&idx);
        let d = quarter_form(&sigma, &w)?;
        Ok(DecoherenceRecord {
            time: t,
            fragment: fragment.clone(),
            d_value: d,
        })
    }

    /// Column of the propagator multiplying the initial system position.
    pub fn response_to_position(&self, t: f64) -> DVector<f64> {
        let n = self.n_modes();
        let Trig { cos: c, sin_times: vs, .. } = self.trig(t);
        let o = &self.basis.orthogonal;
        let o0: Vec<f64> = o.row(0).iter().copied().collect();
        let dx = o * DVector::from_fn(n, |k, _| c[k] * o0[k]);
        let dp = o * DVector::from_fn(n, |k, _| -vs[k] * o0[k]);
        DVector::from_fn(2 * n, |i, _| if i % 2 == 0 { dx[i / 2] } else { dp[i / 2] })
    }
}
