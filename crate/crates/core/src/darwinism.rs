//! System–fragment mutual information, partial-information curves and the
//! redundancy fraction `f_δ`.
//!
//! Fragments of every size are prefixes of a fixed set of random permutations
//! of the bath, so each sample is a nested chain and the averaged curve is
//! non-decreasing in the fraction. The threshold search relies on that.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::gaussian::{GaussianState, ModeSet};

/// System entropy below which no record exists and `f_δ` is reported as 1.
pub const DEGENERATE_ENTROPY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSample {
    pub fragment: ModeSet,
    pub fraction: f64,
    pub seed_path: String,
}

/// Number of bath modes in a fragment of the given fraction.
pub fn fragment_size(n_bath: usize, fraction: f64) -> usize {
    ((fraction * n_bath as f64).round() as usize).clamp(1, n_bath)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFraction(fraction))
    }
}

/// Fraction grid `{step, 2·step, ..., 1}`.
pub fn fraction_grid(step: f64) -> Result<Vec<f64>> {
    let count = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((count * step) - 1.0).abs() > 1e-9 {
        return Err(Error::config("fraction_step", format!("must divide 1 evenly, got {step}")));
    }
    let count = count as usize;
    Ok((1..=count).map(|k| if k == count { 1.0 } else { k as f64 * step }).collect())
}

/// One random ordering of the bath per sample, drawn from independent streams
/// of a master seed.
#[derive(Debug, Clone)]
pub struct FragmentOrderings {
    n_bath: usize,
    master_seed: u64,
    orders: Vec<Vec<usize>>,
}

impl FragmentOrderings {
    pub fn new(n_bath: usize, n_samples: usize, master_seed: u64) -> Result<Self> {
        if n_bath == 0 {
            return Err(Error::EmptyBath);
        }
        if n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        let orders = (0..n_samples)
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
                rng.set_stream(j as u64);
                let mut order: Vec<usize> = (1..=n_bath).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect();
        Ok(FragmentOrderings {
            n_bath,
            master_seed,
            orders,
        })
    }

    pub fn n_bath(&self) -> usize {
        self.n_bath
    }

    pub fn n_samples(&self) -> usize {
        self.orders.len()
    }

    /// The fragments used at `fraction`: one per ordering, or the whole bath once.
    pub fn samples(&self, fraction: f64) -> Result<Vec<FragmentSample>> {
        check_fraction(fraction)?;
        let size = fragment_size(self.n_bath, fraction);
        if size == self.n_bath {
            return Ok(vec![FragmentSample {
                fragment: ModeSet::new((1..=self.n_bath).collect())?,
                fraction,
                seed_path: format!("seed:{}/full", self.master_seed),
            }]);
        }
        self.orders
            .iter()
            .enumerate()
            .map(|(j, order)| {
                Ok(FragmentSample {
                    fragment: ModeSet::new(order[..size].to_vec())?,
                    fraction,
                    seed_path: format!("seed:{}/stream:{j}", self.master_seed),
                })
            })
            .collect()
    }
}

pub fn sample_fragments(n_bath: usize, fraction: f64, n_samples: usize, master_seed: u64) -> Result<Vec<FragmentSample>> {
    check_fraction(fraction)?;
    FragmentOrderings::new(n_bath, n_samples, master_seed)?.samples(fraction)
}

/// `I(S:f) = H_S + H_f − H_{S,f}` in nats, with the system as mode 0.
pub fn mutual_information(global: &GaussianState, fragment: &ModeSet) -> Result<f64> {
    let h_s = global.entropy_of(&ModeSet::single(0))?;
    mutual_information_given(global, h_s, fragment)
}

fn mutual_information_given(global: &GaussianState, h_s: f64, fragment: &ModeSet) -> Result<f64> {
    if fragment.modes().contains(&0) {
        return Err(Error::InvalidSubset("fragment must exclude the system mode".into()));
    }
    let h_f = global.entropy_of(fragment)?;
    let mut joint = fragment.modes().to_vec();
    joint.push(0);
    let h_sf = global.entropy_of(&ModeSet::new(joint)?)?;
    Ok(h_s + h_f - h_sf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutualInfoCurve {
    pub time: f64,
    pub fractions: Vec<f64>,
    pub mi_mean: Vec<f64>,
    pub mi_stderr: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub h_system: f64,
}

/// Sample-averaged mutual information of one global state as a function of fraction.
pub struct FragmentAverager<'a> {
    state: &'a GaussianState,
    orderings: &'a FragmentOrderings,
    h_s: f64,
}

impl<'a> FragmentAverager<'a> {
    pub fn new(state: &'a GaussianState, orderings: &'a FragmentOrderings) -> Result<Self> {
        if state.n_modes() != orderings.n_bath() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "state has {} modes, orderings cover a bath of {}",
                state.n_modes(),
                orderings.n_bath()
            )));
        }
        let h_s = state.entropy_of(&ModeSet::single(0))?;
        Ok(FragmentAverager { state, orderings, h_s })
    }

    pub fn h_system(&self) -> f64 {
        self.h_s
    }

    /// Per-sample mutual information at `fraction`.
    pub fn values(&self, fraction: f64) -> Result<Vec<f64>> {
        self.orderings
            .samples(fraction)?
            .iter()
            .map(|s| mutual_information_given(self.state, self.h_s, &s.fragment))
            .collect()
    }

    pub fn mean(&self, fraction: f64) -> Result<f64> {
        let v = self.values(fraction)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_grid(grid: &[f64], field: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(field, "fraction grid is empty"));
    }
    for &f in grid {
        check_fraction(f)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(field, "fraction grid must be strictly increasing"));
    }
    Ok(())
}

pub fn mutual_info_curve(
    sim: &Simulation,
    t: f64,
    fraction_grid: &[f64],
    n_samples: usize,
    master_seed: u64,
) -> Result<MutualInfoCurve> {
    let orderings = FragmentOrderings::new(sim.n_modes() - 1, n_samples, master_seed)?;
    curve_for_state(&sim.state_at(t), t, fraction_grid, &orderings)
}

/// Partial-information curve of a given global state.
pub fn curve_for_state(
    state: &GaussianState,
    t: f64,
    fraction_grid: &[f64],
    orderings: &FragmentOrderings,
) -> Result<MutualInfoCurve> {
    check_grid(fraction_grid, "fraction_step")?;
    let avg = FragmentAverager::new(state, orderings)?;
    let mut curve = MutualInfoCurve {
        time: t,
        fractions: fraction_grid.to_vec(),
        mi_mean: Vec::with_capacity(fraction_grid.len()),
        mi_stderr: Vec::with_capacity(fraction_grid.len()),
        n_samples: Vec::with_capacity(fraction_grid.len()),
        h_system: avg.h_system(),
    };
    for &f in fraction_grid {
        let v = avg.values(f)?;
        let (m, se) = mean_and_stderr(&v);
        curve.mi_mean.push(m);
        curve.mi_stderr.push(se);
        curve.n_samples.push(v.len());
    }
    Ok(curve)
}

/// Index of the first `true` of a monotone predicate on `0..len`, searching
/// outward from `hint`.
fn first_true(len: usize, hint: usize, mut pred: impl FnMut(usize) -> Result<bool>) -> Result<Option<usize>> {
    if len == 0 {
        return Ok(None);
    }
    let hint = hint.min(len - 1);
    // Invariant: everything below `lo` is false, everything at or above `hi` is true.
    let (mut lo, mut hi);
    if pred(hint)? {
        hi = hint;
        lo = hint;
        let mut step = 1;
        loop {
            if lo == 0 {
                break;
            }
            let probe = hi.saturating_sub(step);
            if pred(probe)? {
                hi = probe;
                lo = probe;
            } else {
                lo = probe + 1;
                break;
            }
            step *= 2;
        }
        if lo == 0 && hi == 0 {
            return Ok(Some(0));
        }
    } else {
        lo = hint + 1;
        hi = len;
        let mut step = 1;
        while lo < len {
            let probe = (hint + step).min(len - 1);
            if pred(probe)? {
                hi = probe;
                break;
            }
            lo = probe + 1;
            if probe == len - 1 {
                break;
            }
            step *= 2;
        }
        if lo >= len {
            return Ok(None);
        }
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((hi < len).then_some(hi))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::config("delta", format!("must lie in (0, 1), got {delta}")))
    }
}

/// Smallest grid fraction whose averaged information reaches `(1 − δ) H_S`,
/// with the grid index at which it was found.
fn search_f_delta(avg: &FragmentAverager, delta: f64, grid: &[f64], hint: usize) -> Result<(f64, usize)> {
    let h_s = avg.h_system();
    if h_s < DEGENERATE_ENTROPY {
        return Ok((1.0, grid.len() - 1));
    }
    let threshold = (1.0 - delta) * h_s;
    let mut memo: Vec<Option<bool>> = vec![None; grid.len()];
    let found = first_true(grid.len(), hint, |i| {
        if let Some(b) = memo[i] {
            return Ok(b);
        }
        let b = avg.mean(grid[i])? >= threshold;
        memo[i] = Some(b);
        Ok(b)
    })?;
    Ok(match found {
        Some(i) => (grid[i], i),
        None => (1.0, grid.len() - 1),
    })
}

pub fn f_delta(
    sim: &Simulation,
    t: f64,
    delta: f64,
    search_grid: &[f64],
    n_samples: usize,
    master_seed: u64,
) -> Result<f64> {
    check_delta(delta)?;
    check_grid(search_grid, "fraction_step")?;
    let orderings = FragmentOrderings::new(sim.n_modes() - 1, n_samples, master_seed)?;
    let state = sim.state_at(t);
    let avg = FragmentAverager::new(&state, &orderings)?;
    Ok(search_f_delta(&avg, delta, search_grid, search_grid.len() - 1)?.0)
}

/// `f_δ` of a given state by scanning the whole grid; the reference for the search.
pub fn f_delta_scan(state: &GaussianState, delta: f64, grid: &[f64], orderings: &FragmentOrderings) -> Result<f64> {
    check_delta(delta)?;
    check_grid(grid, "fraction_step")?;
    let avg = FragmentAverager::new(state, orderings)?;
    let h_s = avg.h_system();
    if h_s < DEGENERATE_ENTROPY {
        return Ok(1.0);
    }
    for &f in grid {
        if avg.mean(f)? >= (1.0 - delta) * h_s {
            return Ok(f);
        }
    }
    Ok(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyTrace {
    pub delta: f64,
    pub times: Vec<f64>,
    pub f_delta: Vec<f64>,
    pub r_delta: Vec<f64>,
    pub h_system: Vec<f64>,
}

impl RedundancyTrace {
    pub fn non_monotonicity(&self) -> f64 {
        non_monotonicity_nf(self)
    }
}

/// `f_δ(t)` on a time grid; each search starts from the previous answer.
pub fn redundancy_trace(
    sim: &Simulation,
    times: &[f64],
    delta: f64,
    search_grid: &[f64],
    orderings: &FragmentOrderings,
) -> Result<RedundancyTrace> {
    check_delta(delta)?;
    check_grid(search_grid, "fraction_step")?;
    let mut trace = RedundancyTrace {
        delta,
        times: times.to_vec(),
        f_delta: Vec::with_capacity(times.len()),
        r_delta: Vec::with_capacity(times.len()),
        h_system: Vec::with_capacity(times.len()),
    };
    let mut hint = search_grid.len() - 1;
    for &t in times {
        let state = sim.state_at(t);
        let avg = FragmentAverager::new(&state, orderings)?;
        let (f, idx) = search_f_delta(&avg, delta, search_grid, hint)?;
        hint = idx;
        trace.f_delta.push(f);
        trace.r_delta.push(1.0 / f);
        trace.h_system.push(avg.h_system());
    }
    Ok(trace)
}

/// Sum of the positive increments of a sequence.
pub fn positive_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// `𝒩_f`: accumulated growth of `f_δ(t)`.
pub fn non_monotonicity_nf(trace: &RedundancyTrace) -> f64 {
    positive_variation(&trace.f_delta)
}
