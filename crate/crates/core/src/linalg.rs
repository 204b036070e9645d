//! Dense kernels behind the symplectic spectra.
//!
//! The symplectic eigenvalues of a covariance `C = L L^T` are the moduli of the
//! eigenvalues of the skew-symmetric matrix `L^T Ω L`. That matrix is reduced to
//! skew tridiagonal form with Householder reflections; a diagonal unitary
//! similarity turns the skew tridiagonal into a real symmetric tridiagonal with
//! zero diagonal whose eigenvalues are `±ν`, which an implicit QL sweep resolves
//! to absolute accuracy `eps·‖A‖` without squaring the condition number.
//!
//! States produced by strong squeezing carry one quadrature whose variance is
//! many orders of magnitude above the rest. Materializing such a covariance in
//! `f64` destroys the small symplectic eigenvalues, so [`symplectic_spectrum`]
//! accepts the covariance split as `C + a·d d^T` and adds the stiff rank-one term
//! through a secular equation on the spectrum of `C`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative gap below which two symplectic eigenvalues are treated as one.
const CLUSTER_TOL: f64 = 1e-12;

/// Reduces a real skew-symmetric matrix to skew tridiagonal form by an
/// orthogonal similarity `T = Q^T A Q`, reading only the strict lower triangle.
///
/// Returns the subdiagonal (`T[i+1, i] = e[i]`). When `track` is given it is
/// overwritten with `Q^T track`. The contents of `a` are destroyed.
pub(crate) fn skew_tridiagonalize(a: &mut DMatrix<f64>, mut track: Option<&mut [f64]>) -> Vec<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut e = vec![0.0; n.saturating_sub(1)];
    if n < 2 {
        return e;
    }
    let data = a.as_mut_slice();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n - 1 {
        let m = n - k - 1;
        let col = k * n + k + 1;
        if m == 1 {
            e[k] = data[col];
            break;
        }
        let x0 = data[col];
        let xnorm = data[col..col + m].iter().map(|x| x * x).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        e[k] = alpha;

        let v = &mut v[..m];
        v.copy_from_slice(&data[col..col + m]);
        v[0] -= alpha;
        let tau = 1.0 / (xnorm * (xnorm + x0.abs()));

        // p = tau * B v, with B the trailing skew block stored by its lower triangle.
        let p = &mut p[..m];
        p.fill(0.0);
        for j in 0..m {
            let cj = (k + 1 + j) * n + (k + 1);
            let vj = v[j];
            let column = &data[cj + j + 1..cj + m];
            let mut acc = 0.0;
            for ((pi, &bij), &vi) in p[j + 1..].iter_mut().zip(column).zip(&v[j + 1..]) {
                *pi += bij * vj;
                acc += bij * vi;
            }
            p[j] -= acc;
        }
        p.iter_mut().for_each(|x| *x *= tau);

        // H B H = B + v p^T - p v^T
        for j in 0..m {
            let cj = (k + 1 + j) * n + (k + 1);
            let (pj, vj) = (p[j], v[j]);
            let column = &mut data[cj + j + 1..cj + m];
            for ((bij, &vi), &pi) in column.iter_mut().zip(&v[j + 1..]).zip(&p[j + 1..]) {
                *bij += vi * pj - pi * vj;
            }
        }

        if let Some(t) = track.as_deref_mut() {
            let tail = &mut t[k + 1..];
            let s = tau * tail.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
            tail.iter_mut().zip(v.iter()).for_each(|(ti, vi)| *ti -= s * vi);
        }
    }
    e
}

/// Implicit QL iteration on a symmetric tridiagonal matrix (diagonal `d`,
/// off-diagonal `e` with `e[i]` coupling `i` and `i+1`; `e[n-1]` is scratch).
///
/// On return `d` holds the eigenvalues (unordered). When `w` is given it is
/// replaced by its components along each eigenvector, `w_i <- q_i · w`.
pub(crate) fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut w: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    debug_assert_eq!(e.len(), n);
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let scale = d
        .iter()
        .chain(e.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let floor = f64::EPSILON * 0.5 * scale;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 120 {
                return Err(Error::NumericalDegeneracy(
                    "tridiagonal QL iteration did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(w) = w.as_deref_mut() {
                    let f = w[i + 1];
                    w[i + 1] = s * w[i] + c * f;
                    w[i] = c * w[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Builds `L^T Ω L` for the interleaved symplectic form.
fn skew_core(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut omega_l = DMatrix::zeros(n, n);
    for i in 0..n / 2 {
        omega_l.row_mut(2 * i).copy_from(&l.row(2 * i + 1));
        omega_l.row_mut(2 * i + 1).copy_from(&(-l.row(2 * i)));
    }
    l.tr_mul(&omega_l)
}

/// One symplectic eigenvalue cluster of the regular part: modulus, number of
/// modes sharing it, and the secular weight of the stiff direction.
struct Cluster {
    nu: f64,
    multiplicity: usize,
    weight: f64,
}

fn clusters(values: &[f64], sq_proj: &[f64]) -> Result<Vec<Cluster>> {
    let mut pairs: Vec<(f64, f64)> = values.iter().map(|v| v.abs()).zip(sq_proj.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let top = pairs.last().map_or(0.0, |p| p.0);
    let tol = CLUSTER_TOL * top;

    let mut out = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= tol {
            end += 1;
        }
        let group = &pairs[start..end];
        if !group.len().is_multiple_of(2) {
            return Err(Error::NumericalDegeneracy(
                "skew spectrum did not split into ± pairs".into(),
            ));
        }
        let nu = group.iter().map(|p| p.0).sum::<f64>() / group.len() as f64;
        let proj = group.iter().map(|p| p.1).sum::<f64>();
        out.push(Cluster {
            nu,
            multiplicity: group.len() / 2,
            weight: nu * nu * proj,
        });
        start = end;
    }
    Ok(out)
}

/// Roots of `rho + Σ_j w_j / (p_j - s) = 0`, one above each pole, for strictly
/// increasing poles `p` and positive weights `w`.
pub(crate) fn secular_roots(poles: &[f64], weights: &[f64], rho: f64) -> Vec<f64> {
    let m = poles.len();
    let total: f64 = weights.iter().sum();
    let mut roots = Vec::with_capacity(m);
    let mut shifts = vec![0.0; m];
    for i in 0..m {
        let base = poles[i];
        for (s, p) in shifts.iter_mut().zip(poles) {
            *s = p - base;
        }
        let gap = if i + 1 < m { shifts[i + 1] } else { total / rho };
        let (mut lo, mut hi) = (0.0_f64, gap);
        let mut tau = 0.5 * gap;
        for _ in 0..4000 {
            let (mut g, mut dg) = (rho, 0.0);
            for (w, s) in weights.iter().zip(&shifts) {
                let inv = 1.0 / (s - tau);
                g += w * inv;
                dg += w * inv * inv;
            }
            if g == 0.0 {
                break;
            }
            if g < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let newton = tau - g / dg;
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let resolution = 2.0 * f64::EPSILON * (base + next).abs();
            if (next - tau).abs() <= resolution || hi - lo <= resolution {
                tau = next;
                break;
            }
            tau = next;
        }
        roots.push(base + tau);
    }
    roots
}

/// Symplectic eigenvalues (ascending, unclamped) of `cond + weight·dir dir^T`.
///
/// `cond` must be symmetric positive definite after the optional shift along
/// `dir` described in the module docs. Returns `InvalidCovariance` otherwise.
pub(crate) fn symplectic_spectrum(cond: &DMatrix<f64>, stiff: Option<(&DVector<f64>, f64)>) -> Result<Vec<f64>> {
    let n = cond.nrows();
    if !n.is_multiple_of(2) || n != cond.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square with even order, got {}x{}",
            cond.nrows(),
            cond.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let stiff = stiff.filter(|(d, w)| *w > 0.0 && d.norm_squared() > 0.0);

    let (base, dir, remaining) = match stiff {
        None => (cond.clone(), None, 0.0),
        Some((d, weight)) => {
            let scale = (0..n).map(|i| cond[(i, i)]).fold(0.0_f64, f64::max);
            let shift = if scale > 0.0 { (scale / d.norm_squared()).min(weight) } else { weight };
            let mut base = cond.clone();
            base.ger(shift, d, d, 1.0);
            (base, Some(d), weight - shift)
        }
    };

    let chol = base
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut a = skew_core(&l);

    let mut proj = match (dir, remaining > 0.0) {
        (Some(d), true) => Some(
            l.solve_lower_triangular(d)
                .ok_or_else(|| Error::NumericalDegeneracy("singular Cholesky factor".into()))?
                .as_slice()
                .to_vec(),
        ),
        _ => None,
    };

    let mut e = skew_tridiagonalize(&mut a, proj.as_deref_mut());
    e.push(0.0);
    let mut d = vec![0.0; n];
    if let Some(z) = proj.as_mut() {
        for (k, zk) in z.iter_mut().enumerate() {
            if (k / 2) % 2 == 1 {
                *zk = -*zk;
            }
        }
    }
    tridiagonal_ql(&mut d, &mut e, proj.as_deref_mut())?;

    let sq: Vec<f64> = match &proj {
        Some(z) => z.iter().map(|x| x * x).collect(),
        None => vec![0.0; n],
    };
    let groups = clusters(&d, &sq)?;

    let mut nus = Vec::with_capacity(n / 2);
    if remaining > 0.0 {
        let active: Vec<&Cluster> = groups.iter().filter(|c| c.weight > 0.0).collect();
        for c in &groups {
            let stay = if c.weight > 0.0 { c.multiplicity - 1 } else { c.multiplicity };
            nus.extend(std::iter::repeat_n(c.nu, stay));
        }
        let poles: Vec<f64> = active.iter().map(|c| c.nu * c.nu).collect();
        let weights: Vec<f64> = active.iter().map(|c| c.weight).collect();
        nus.extend(secular_roots(&poles, &weights, 1.0 / remaining).into_iter().map(f64::sqrt));
    } else {
        for c in &groups {
            nus.extend(std::iter::repeat_n(c.nu, c.multiplicity));
        }
    }
    if nus.len() != n / 2 {
        return Err(Error::NumericalDegeneracy(format!(
            "expected {} symplectic eigenvalues, resolved {}",
            n / 2,
            nus.len()
        )));
    }
    nus.sort_by(f64::total_cmp);
    Ok(nus)
}
