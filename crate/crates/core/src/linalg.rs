//! Dense complex linear-algebra helpers: deterministic Hermitian
//! eigendecompositions, SVD-based nullspaces and pseudo-inverses, and
//! polynomial root finding.

use crate::C64;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Hermitian eigendecomposition with eigenvalues sorted descending and
/// deterministically phase-fixed eigenvectors.
pub fn herm_eig(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    // Symmetrize to wash out roundoff asymmetry before factorizing.
    let h = (a + a.adjoint()).scale(0.5);
    let se = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(se.eigenvalues[src]);
        let mut col = se.eigenvectors.column(src).clone_owned();
        phase_fix(&mut col);
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix (0 for empty matrices).
pub fn min_eig(a: &DMatrix<C64>) -> f64 {
    let (vals, _) = herm_eig(a);
    vals.last().copied().unwrap_or(0.0)
}

/// Multiply the column by a unimodular scalar so its largest-magnitude entry
/// is real positive. Ties break on the lowest index.
fn phase_fix(col: &mut DVector<C64>) {
    let mut best = 0usize;
    let mut best_abs = 0.0f64;
    for (idx, v) in col.iter().enumerate() {
        let a = v.norm();
        if a > best_abs + 1e-14 {
            best_abs = a;
            best = idx;
        }
    }
    if best_abs > 0.0 {
        let rot = col[best].conj() / C64::new(best_abs, 0.0);
        for v in col.iter_mut() {
            *v *= rot;
        }
    }
}

/// Orthonormal basis of the (right) nullspace of `a`, detected at the given
/// singular-value cutoff relative to the largest singular value.
pub fn nullspace(a: &DMatrix<C64>, rank_tol: f64) -> DMatrix<C64> {
    let ncols = a.ncols();
    if a.nrows() == 0 || ncols == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // Pad with zero rows so the thin SVD carries the full right-singular
    // basis (nalgebra returns v_t with min(nrows, ncols) rows).
    let work = if a.nrows() < ncols {
        let mut m = DMatrix::<C64>::zeros(ncols, ncols);
        m.rows_mut(0, a.nrows()).copy_from(a);
        m
    } else {
        a.clone()
    };
    let svd = work.svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rank_tol * smax.max(1.0);
    let v_t = svd.v_t.expect("svd v_t");
    debug_assert_eq!(v_t.nrows(), ncols);
    let mut basis = DMatrix::<C64>::zeros(ncols, ncols);
    let mut k = 0;
    for i in 0..ncols {
        if svd.singular_values[i] <= cut {
            let mut col = v_t.row(i).adjoint();
            phase_fix(&mut col);
            basis.set_column(k, &col);
            k += 1;
        }
    }
    basis.columns(0, k).into_owned()
}

/// Numerical rank at a relative singular-value cutoff.
pub fn rank(a: &DMatrix<C64>, rank_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rank_tol * smax.max(1.0)).count()
}

/// Moore-Penrose solve: least-norm least-squares solution of a x = b.
pub fn pinv_solve(a: &DMatrix<C64>, b: &DMatrix<C64>, rank_tol: f64) -> DMatrix<C64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rank_tol * smax.max(1.0);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let k = svd.singular_values.len();
    let mut core = u.adjoint() * b;
    for i in 0..k {
        let s = svd.singular_values[i];
        let f = if s > cut { 1.0 / s } else { 0.0 };
        for j in 0..core.ncols() {
            core[(i, j)] *= C64::new(f, 0.0);
        }
    }
    v_t.adjoint() * core.rows(0, k).into_owned()
}

/// Operator (spectral) norm.
pub fn opnorm(a: &DMatrix<C64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Smallest singular value.
pub fn smin(a: &DMatrix<C64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Roots of a complex univariate polynomial given by ascending coefficients.
///
/// Degrees one and two use closed forms; higher degrees fall back to
/// Durand-Kerner iteration. Leading coefficients below `1e-13` relative to the
/// largest coefficient are trimmed.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let maxc = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if maxc == 0.0 {
        return Vec::new();
    }
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map(|x| x.norm()).unwrap_or(0.0) <= 1e-13 * maxc {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    match deg {
        0 => Vec::new(),
        1 => vec![-c[0] / c[1]],
        2 => quadratic_roots(c[0], c[1], c[2]),
        _ => durand_kerner(&c),
    }
}

fn quadratic_roots(c0: C64, c1: C64, c2: C64) -> Vec<C64> {
    // Stable form: pick the sign that avoids cancellation.
    let disc = (c1 * c1 - C64::new(4.0, 0.0) * c2 * c0).sqrt();
    let q = if (c1 + disc).norm() >= (c1 - disc).norm() {
        -(c1 + disc) * C64::new(0.5, 0.0)
    } else {
        -(c1 - disc) * C64::new(0.5, 0.0)
    };
    if q.norm() == 0.0 {
        return vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    }
    vec![q / c2, c0 / q]
}

fn durand_kerner(c: &[C64]) -> Vec<C64> {
    let deg = c.len() - 1;
    let lead = c[deg];
    let monic: Vec<C64> = c.iter().map(|x| x / lead).collect();
    let eval = |z: C64| {
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..monic.len()).rev() {
            acc = acc * z + monic[k];
        }
        acc
    };
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..400 {
        let mut delta = 0.0f64;
        for i in 0..deg {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}

/// Deterministic Gram-Schmidt with column pivoting on the largest remaining
/// norm (ties break in fixed basis order). Returns the coefficient matrix of
/// the orthonormal vectors in the inner-product space described by `gram`,
/// together with the achieved orthonormality defect.
///
/// Columns of the result express the output vectors in the same coordinates
/// as the input columns of `cols`: out = cols * r.
pub fn gram_orthonormalize(
    cols: &DMatrix<C64>,
    gram: &DMatrix<C64>,
    rank_tol: f64,
) -> (DMatrix<C64>, f64) {
    let k = cols.ncols();
    if k == 0 {
        return (DMatrix::zeros(cols.nrows(), 0), 0.0);
    }
    // Work in the coefficient space of the input columns. With G[a,b] the
    // pairing of basis vectors a and b (linear in the first slot), the
    // pairing of combinations x, y is x^T G conj(y).
    let g = (gram + gram.adjoint()).scale(0.5);
    let mut taken: Vec<DVector<C64>> = Vec::new();
    let mut remaining: Vec<usize> = (0..k).collect();
    let ip = |x: &DVector<C64>, y: &DVector<C64>| -> C64 {
        (x.transpose() * &g * y.conjugate())[(0, 0)]
    };
    let scale = (0..k).map(|i| g[(i, i)].re.abs()).fold(1.0, f64::max);
    while !remaining.is_empty() {
        // Current residual norms of the remaining raw columns.
        let mut best: Option<(usize, f64)> = None;
        for &j in &remaining {
            let mut v = DVector::<C64>::zeros(k);
            v[j] = C64::new(1.0, 0.0);
            for t in &taken {
                let c = ip(&v, t);
                v -= t * c;
            }
            let n2 = ip(&v, &v).re;
            if best.map(|(_, bn)| n2 > bn + 1e-15).unwrap_or(true) {
                best = Some((j, n2));
            }
        }
        let (j, n2) = best.unwrap();
        // Gram eigenvalue cutoff: entries carry the pairing tolerance
        // (~1e-12), so squared-norm noise sits far above rank_tol^2.
        if n2 <= rank_tol * scale {
            break;
        }
        let mut v = DVector::<C64>::zeros(k);
        v[j] = C64::new(1.0, 0.0);
        for t in &taken {
            let c = ip(&v, t);
            v -= t * c;
        }
        // Re-orthogonalize once for numerical hygiene.
        for t in &taken {
            let c = ip(&v, t);
            v -= t * c;
        }
        let n = ip(&v, &v).re.max(0.0).sqrt();
        if n * n <= rank_tol * scale {
            remaining.retain(|&x| x != j);
            continue;
        }
        v /= C64::new(n, 0.0);
        taken.push(v);
        remaining.retain(|&x| x != j);
    }
    let mut r = DMatrix::<C64>::zeros(k, taken.len());
    for (idx, t) in taken.iter().enumerate() {
        r.set_column(idx, t);
    }
    // Orthonormality defect in the target inner product.
    let check = r.transpose() * &g * r.conjugate();
    let mut defect = 0.0f64;
    for i in 0..check.nrows() {
        for j in 0..check.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((check[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    (r, defect)
}

/// Convenience: complex scalar from re/im.
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}
