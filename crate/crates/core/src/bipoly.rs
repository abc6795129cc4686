//! Bivariate complex polynomials and matrix rational functions with a common
//! scalar denominator, plus the numerical certificates (stability, Schur
//! bound, inner residual) the rest of the pipeline relies on.

use crate::error::CoreError;
use crate::linalg;
use crate::{Tolerances, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Bivariate complex polynomial stored as a dense coefficient grid.
///
/// Entry `(i, j)` is the coefficient of `z1^i z2^j`; the grid has exactly
/// `(d1+1) x (d2+1)` entries and is trimmed so that, unless the polynomial is
/// identically zero, some entry in row `d1` or column `d2` is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct BiPoly {
    coeffs: Vec<C64>,
    deg: (usize, usize),
}

impl BiPoly {
    /// Build from a coefficient grid `rows[i][j]` = coefficient of `z1^i z2^j`.
    pub fn from_grid(rows: Vec<Vec<C64>>) -> Result<Self, CoreError> {
        if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
            return Err(CoreError::InvalidInput(
                "coefficient grid must be non-empty".into(),
            ));
        }
        let d2 = rows[0].len() - 1;
        if rows.iter().any(|r| r.len() != d2 + 1) {
            return Err(CoreError::InvalidInput(
                "coefficient grid rows must have equal length".into(),
            ));
        }
        let d1 = rows.len() - 1;
        let mut coeffs = Vec::with_capacity((d1 + 1) * (d2 + 1));
        for r in &rows {
            coeffs.extend_from_slice(r);
        }
        let mut p = Self {
            coeffs,
            deg: (d1, d2),
        };
        p.trim();
        Ok(p)
    }

    /// Zero polynomial.
    pub fn zero() -> Self {
        Self {
            coeffs: vec![C64::new(0.0, 0.0)],
            deg: (0, 0),
        }
    }

    /// Constant polynomial.
    pub fn constant(c: C64) -> Self {
        Self {
            coeffs: vec![c],
            deg: (0, 0),
        }
    }

    /// The monomial `z1^i z2^j`.
    pub fn monomial(i: usize, j: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); (i + 1) * (j + 1)];
        coeffs[i * (j + 1) + j] = C64::new(1.0, 0.0);
        Self {
            coeffs,
            deg: (i, j),
        }
    }

    /// Degree pair `(d1, d2)`.
    pub fn deg(&self) -> (usize, usize) {
        self.deg
    }

    /// Coefficient of `z1^i z2^j` (zero outside the grid).
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i <= self.deg.0 && j <= self.deg.1 {
            self.coeffs[i * (self.deg.1 + 1) + j]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    fn trim(&mut self) {
        let (mut d1, mut d2) = self.deg;
        let row_zero = |p: &Self, i: usize| (0..=p.deg.1).all(|j| p.get(i, j).norm() == 0.0);
        let col_zero = |p: &Self, j: usize| (0..=p.deg.0).all(|i| p.get(i, j).norm() == 0.0);
        while d1 > 0 && row_zero(self, d1) {
            d1 -= 1;
        }
        while d2 > 0 && col_zero(self, d2) {
            d2 -= 1;
        }
        if (d1, d2) != self.deg {
            let mut coeffs = Vec::with_capacity((d1 + 1) * (d2 + 1));
            for i in 0..=d1 {
                for j in 0..=d2 {
                    coeffs.push(self.get(i, j));
                }
            }
            self.coeffs = coeffs;
            self.deg = (d1, d2);
        }
    }

    /// Horner evaluation at a point of C^2.
    pub fn eval(&self, z: (C64, C64)) -> C64 {
        let (d1, d2) = self.deg;
        let mut acc = C64::new(0.0, 0.0);
        for i in (0..=d1).rev() {
            let mut row = C64::new(0.0, 0.0);
            for j in (0..=d2).rev() {
                row = row * z.1 + self.get(i, j);
            }
            acc = acc * z.0 + row;
        }
        acc
    }

    /// Partial derivative in the first variable.
    pub fn deriv_z1(&self) -> Self {
        let (d1, d2) = self.deg;
        if d1 == 0 {
            return Self::zero();
        }
        let mut rows = vec![vec![C64::new(0.0, 0.0); d2 + 1]; d1];
        for i in 1..=d1 {
            for j in 0..=d2 {
                rows[i - 1][j] = self.get(i, j) * C64::new(i as f64, 0.0);
            }
        }
        Self::from_grid(rows).expect("derivative grid")
    }

    /// Coefficients of the slice polynomial `z1 -> p(z1, w)`, ascending in z1.
    pub fn slice_z1(&self, w: C64) -> Vec<C64> {
        let (d1, d2) = self.deg;
        (0..=d1)
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for j in (0..=d2).rev() {
                    acc = acc * w + self.get(i, j);
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let d1 = self.deg.0.max(other.deg.0);
        let d2 = self.deg.1.max(other.deg.1);
        let mut rows = vec![vec![C64::new(0.0, 0.0); d2 + 1]; d1 + 1];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j) + other.get(i, j);
            }
        }
        Self::from_grid(rows).expect("sum grid")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.iter_mut() {
            *v *= c;
        }
        out.trim();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let d1 = self.deg.0 + other.deg.0;
        let d2 = self.deg.1 + other.deg.1;
        let mut rows = vec![vec![C64::new(0.0, 0.0); d2 + 1]; d1 + 1];
        for i in 0..=self.deg.0 {
            for j in 0..=self.deg.1 {
                let a = self.get(i, j);
                if a.norm() == 0.0 {
                    continue;
                }
                for k in 0..=other.deg.0 {
                    for l in 0..=other.deg.1 {
                        rows[i + k][j + l] += a * other.get(k, l);
                    }
                }
            }
        }
        Self::from_grid(rows).expect("product grid")
    }

    /// Multiply by the monomial `z1^i z2^j`.
    pub fn shift(&self, i: usize, j: usize) -> Self {
        self.mul(&Self::monomial(i, j))
    }

    /// Entry-wise complex conjugation of the coefficients.
    pub fn conj_coeffs(&self) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.iter_mut() {
            *v = v.conj();
        }
        out
    }

    /// Reflection `p~(z) = z1^n z2^m conj(p)(1/z1, 1/z2)` at envelope `(n, m)`:
    /// the coefficient grid reversed in both indices within the envelope and
    /// conjugated.
    pub fn reflect(&self, envelope: (usize, usize)) -> Result<Self, CoreError> {
        let (n, m) = envelope;
        let (d1, d2) = self.deg;
        if n < d1 || m < d2 {
            return Err(CoreError::EnvelopeTooSmall(n, m, d1, d2));
        }
        let mut rows = vec![vec![C64::new(0.0, 0.0); m + 1]; n + 1];
        for i in 0..=d1 {
            for j in 0..=d2 {
                rows[n - i][m - j] = self.get(i, j).conj();
            }
        }
        Self::from_grid(rows)
    }

    /// Max-abs coefficient, used for relative tolerances.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Exact division by a monomial: `self / (z1^i z2^j)`, or None when a
    /// low-order coefficient obstructs it.
    pub fn div_monomial(&self, i: usize, j: usize) -> Option<Self> {
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (d1, d2) = self.deg;
        if d1 < i || d2 < j {
            return None;
        }
        let scale = self.max_coeff();
        let mut rows = vec![vec![C64::new(0.0, 0.0); d2 - j + 1]; d1 - i + 1];
        for a in 0..=d1 {
            for b in 0..=d2 {
                let v = self.get(a, b);
                if a < i || b < j {
                    if v.norm() > 1e-11 * scale {
                        return None;
                    }
                } else {
                    rows[a - i][b - j] = v;
                }
            }
        }
        Self::from_grid(rows).ok()
    }

    /// Exact polynomial division `self / b` by least squares on the
    /// convolution system; None when the remainder is not negligible.
    pub fn div_exact(&self, b: &Self) -> Option<Self> {
        if b.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (n1, n2) = self.deg;
        let (m1, m2) = b.deg();
        if n1 < m1 || n2 < m2 {
            return None;
        }
        let (q1, q2) = (n1 - m1, n2 - m2);
        let rows_n = (n1 + 1) * (n2 + 1);
        let cols_n = (q1 + 1) * (q2 + 1);
        let mut sys = nalgebra::DMatrix::<C64>::zeros(rows_n, cols_n);
        let mut rhs = nalgebra::DMatrix::<C64>::zeros(rows_n, 1);
        for a in 0..=n1 {
            for bq in 0..=n2 {
                let row = a * (n2 + 1) + bq;
                rhs[(row, 0)] = self.get(a, bq);
                for i in 0..=q1.min(a) {
                    for j in 0..=q2.min(bq) {
                        if a - i <= m1 && bq - j <= m2 {
                            sys[(row, i * (q2 + 1) + j)] = b.get(a - i, bq - j);
                        }
                    }
                }
            }
        }
        let sol = crate::linalg::pinv_solve(&sys, &rhs, 1e-12);
        let resid = (&sys * &sol - &rhs).norm();
        if resid > 1e-9 * self.max_coeff().max(1.0) {
            return None;
        }
        let mut rows = vec![vec![C64::new(0.0, 0.0); q2 + 1]; q1 + 1];
        for i in 0..=q1 {
            for j in 0..=q2 {
                rows[i][j] = sol[(i * (q2 + 1) + j, 0)];
            }
        }
        Self::from_grid(rows).ok()
    }
}

/// Evaluate `p` at `z`; plain alias kept for symmetry with the other ops.
pub fn eval(p: &BiPoly, z: (C64, C64)) -> C64 {
    p.eval(z)
}

// ---------------------------------------------------------------------------
// Matrix rational Schur functions
// ---------------------------------------------------------------------------

/// Matrix-valued rational function: an `r x c` polynomial numerator over a
/// common scalar denominator `p` with `p(0,0) != 0`.
#[derive(Debug, Clone)]
pub struct RationalSchurFn {
    numerator: Vec<Vec<BiPoly>>,
    denominator: BiPoly,
    dims: (usize, usize),
}

impl RationalSchurFn {
    pub fn new(numerator: Vec<Vec<BiPoly>>, denominator: BiPoly) -> Result<Self, CoreError> {
        let r = numerator.len();
        if r == 0 || numerator.iter().any(|row| row.is_empty()) {
            return Err(CoreError::InvalidInput("empty numerator grid".into()));
        }
        let c = numerator[0].len();
        if numerator.iter().any(|row| row.len() != c) {
            return Err(CoreError::InvalidInput("ragged numerator grid".into()));
        }
        if denominator
            .eval((C64::new(0.0, 0.0), C64::new(0.0, 0.0)))
            .norm()
            == 0.0
        {
            return Err(CoreError::InvalidInput("denominator vanishes at 0".into()));
        }
        Ok(Self {
            numerator,
            denominator,
            dims: (r, c),
        })
    }

    /// Scalar function q/p.
    pub fn scalar(q: BiPoly, p: BiPoly) -> Result<Self, CoreError> {
        Self::new(vec![vec![q]], p)
    }

    /// Output dimension (dim E*) and input dimension (dim E).
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn numerator(&self) -> &Vec<Vec<BiPoly>> {
        &self.numerator
    }

    pub fn entry(&self, s: usize, t: usize) -> &BiPoly {
        &self.numerator[s][t]
    }

    pub fn denominator(&self) -> &BiPoly {
        &self.denominator
    }

    /// Componentwise max of the denominator degree and all numerator entry
    /// degrees. Ambient model spaces and default SDP envelopes live here.
    pub fn envelope(&self) -> (usize, usize) {
        let mut e = self.denominator.deg();
        for row in &self.numerator {
            for q in row {
                let d = q.deg();
                e.0 = e.0.max(d.0);
                e.1 = e.1.max(d.1);
            }
        }
        e
    }

    /// Scale the function by a complex constant.
    pub fn scale(&self, lambda: C64) -> Self {
        let numerator = self
            .numerator
            .iter()
            .map(|row| row.iter().map(|q| q.scale(lambda)).collect())
            .collect();
        Self {
            numerator,
            denominator: self.denominator.clone(),
            dims: self.dims,
        }
    }
}

/// Entrywise numerator evaluation divided by `p(z)`.
pub fn eval_fn(
    phi: &RationalSchurFn,
    z: (C64, C64),
    tols: &Tolerances,
) -> Result<DMatrix<C64>, CoreError> {
    let pz = phi.denominator.eval(z);
    if pz.norm() < tols.tol_pole {
        return Err(CoreError::PoleAtPoint {
            abs_p: pz.norm(),
            tol: tols.tol_pole,
        });
    }
    let (r, c) = phi.dims;
    let mut out = DMatrix::<C64>::zeros(r, c);
    for s in 0..r {
        for t in 0..c {
            out[(s, t)] = phi.numerator[s][t].eval(z) / pz;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Options for the stability scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityOpts {
    /// Nested scan radii, strictly below 1.
    pub radii: Vec<f64>,
    /// Angular grid per slice.
    pub grid: usize,
    /// Samples per winding-number loop.
    pub winding_samples: usize,
}

impl Default for StabilityOpts {
    fn default() -> Self {
        Self {
            radii: vec![0.3, 0.6, 0.9, 0.999],
            grid: 64,
            winding_samples: 256,
        }
    }
}

/// Result of the stability scan: min |p| over the nested grids plus the
/// located boundary zeros (zeros on the open bidisk raise an error instead).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub radii: Vec<f64>,
    pub grid: usize,
    pub min_abs: f64,
    /// Torus zeros of p located by the boundary scan, as (angle1, angle2).
    pub boundary_zeros: Vec<(f64, f64)>,
}

impl StabilityCertificate {
    /// Boundary zeros as points of the torus.
    pub fn boundary_zero_points(&self) -> Vec<(C64, C64)> {
        self.boundary_zeros
            .iter()
            .map(|&(t1, t2)| (C64::from_polar(1.0, t1), C64::from_polar(1.0, t2)))
            .collect()
    }
}

/// Certify that `p` has no zero in the open bidisk. Boundary zeros are
/// permitted and recorded. The certificate is grid-based; the grids used are
/// part of the result.
pub fn is_stable(p: &BiPoly, opts: &StabilityOpts) -> Result<StabilityCertificate, CoreError> {
    if p.is_zero() {
        return Err(CoreError::InvalidInput(
            "zero polynomial cannot be a denominator".into(),
        ));
    }
    let scale = p.max_coeff();
    let mut min_abs = f64::INFINITY;
    for &rho in &opts.radii {
        // Slices in z2: roots of z1 -> p(z1, w) must stay outside |z1| < rho.
        for t in 0..opts.grid {
            let ang = 2.0 * std::f64::consts::PI * (t as f64 + 0.5) / opts.grid as f64;
            let w = C64::from_polar(rho, ang);
            min_abs = min_abs.min(scan_slice(p, w, rho, opts, scale, false)?);
            // And the swapped scan: slices in z1.
            min_abs = min_abs.min(scan_slice(p, w, rho, opts, scale, true)?);
        }
    }
    let boundary_zeros = boundary_zeros(p);
    Ok(StabilityCertificate {
        radii: opts.radii.clone(),
        grid: opts.grid,
        min_abs,
        boundary_zeros,
    })
}

/// Winding-number check of one slice; returns the min |p| seen on the loop.
fn scan_slice(
    p: &BiPoly,
    w: C64,
    rho: f64,
    opts: &StabilityOpts,
    scale: f64,
    swapped: bool,
) -> Result<f64, CoreError> {
    let eval_at = |z1: C64| {
        if swapped {
            p.eval((w, z1))
        } else {
            p.eval((z1, w))
        }
    };
    let m = opts.winding_samples;
    let mut min_abs = f64::INFINITY;
    let mut winding = 0.0f64;
    let mut prev = eval_at(C64::from_polar(rho, 0.0));
    min_abs = min_abs.min(prev.norm());
    let mut degenerate = prev.norm() < 1e-13 * scale;
    for k in 1..=m {
        let ang = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let v = eval_at(C64::from_polar(rho, ang));
        min_abs = min_abs.min(v.norm());
        if v.norm() < 1e-13 * scale {
            degenerate = true;
            break;
        }
        winding += (v / prev).arg();
        prev = v;
    }
    let count = if degenerate {
        // Loop passed through (numerically) zero: fall back to slice roots.
        1.0
    } else {
        winding / (2.0 * std::f64::consts::PI)
    };
    if count.round().abs() > 0.4 {
        // A zero is enclosed; locate it from the slice polynomial roots.
        let coeffs = if swapped {
            swap_slice_coeffs(p, w)
        } else {
            p.slice_z1(w)
        };
        let roots = linalg::poly_roots(&coeffs);
        let inside = roots
            .into_iter()
            .filter(|z| z.norm() < rho + 1e-9)
            .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        let z1 = inside.unwrap_or(C64::new(0.0, 0.0));
        let (a, b) = if swapped { (w, z1) } else { (z1, w) };
        return Err(CoreError::UnstableDenominator {
            re1: a.re,
            im1: a.im,
            re2: b.re,
            im2: b.im,
            abs_p: p.eval((a, b)).norm(),
        });
    }
    Ok(min_abs)
}

fn swap_slice_coeffs(p: &BiPoly, w: C64) -> Vec<C64> {
    let (d1, d2) = p.deg();
    (0..=d2)
        .map(|j| {
            let mut acc = C64::new(0.0, 0.0);
            for i in (0..=d1).rev() {
                acc = acc * w + p.get(i, j);
            }
            acc
        })
        .collect()
}

/// Locate the zeros of `p` on the torus. A coarse grid scan produces
/// candidates; each is polished through the reflected slice polynomial:
/// the roots of `p~(., w)` sit inside the closed unit disk for `w` on the
/// circle and touch it exactly at the torus zeros of `p`, so the pinch
/// angle is the (quadratic) maximizer of the largest root modulus — a
/// one-dimensional parabolic fit recovers it to ~1e-11 even though the
/// zero itself is a tangential (ill-conditioned) root of `p`.
///
/// Isolated zeros only; a zero curve shows up as a long candidate list and
/// downstream checks fail loudly.
pub fn boundary_zeros(p: &BiPoly) -> Vec<(f64, f64)> {
    let n = 256usize;
    let scale = p.max_coeff().max(1e-300);
    let p_refl = match p.reflect(p.deg()) {
        Ok(r) => r,
        Err(_) => return Vec::new(),
    };
    let mut found: Vec<(f64, f64)> = Vec::new();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut candidates: Vec<f64> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let t1 = two_pi * a as f64 / n as f64;
            let t2 = two_pi * b as f64 / n as f64;
            let v = p.eval((C64::from_polar(1.0, t1), C64::from_polar(1.0, t2)));
            if v.norm() < 0.02 * scale && !candidates.iter().any(|&c| angle_dist(c, t2) < 0.05) {
                candidates.push(t2);
            }
        }
    }
    for t2 in candidates {
        if let Some((s1, s2)) = polish_pinch(p, &p_refl, t2, scale) {
            let dup = found
                .iter()
                .any(|&(u1, u2)| angle_dist(u1, s1) < 1e-5 && angle_dist(u2, s2) < 1e-5);
            if !dup {
                found.push((s1, s2));
            }
        }
    }
    found.sort_by(|x, y| x.partial_cmp(y).unwrap());
    found
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Largest modulus among the roots of the reflected slice at angle `t2`.
fn max_refl_root(p_refl: &BiPoly, t2: f64) -> Option<(f64, C64)> {
    let w = C64::from_polar(1.0, t2);
    let roots = crate::linalg::poly_roots(&p_refl.slice_z1(w));
    roots
        .into_iter()
        .map(|z| (z.norm(), z))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
}

fn polish_pinch(p: &BiPoly, p_refl: &BiPoly, t2_coarse: f64, scale: f64) -> Option<(f64, f64)> {
    let h = |t: f64| max_refl_root(p_refl, t).map(|(m, _)| 1.0 - m);
    let mut t = t2_coarse;
    let mut step = 2.0 * std::f64::consts::PI / 256.0;
    // Crude descent to bracket the maximizer of the root modulus.
    for _ in 0..40 {
        let hc = h(t)?;
        let hl = h(t - step)?;
        let hr = h(t + step)?;
        if hl < hc && hl <= hr {
            t -= step;
        } else if hr < hc {
            t += step;
        } else {
            break;
        }
    }
    // Parabolic refinement of the vertex, shrinking the stencil.
    for _ in 0..8 {
        let hc = h(t)?;
        let hl = h(t - step)?;
        let hr = h(t + step)?;
        let denom = hl - 2.0 * hc + hr;
        if denom.abs() > 1e-300 {
            let delta = 0.5 * (hl - hr) / denom * step;
            if delta.is_finite() && delta.abs() <= step {
                t += delta;
            }
        }
        step *= 0.12;
        if step < 1e-9 {
            break;
        }
    }
    let (modulus, zeta) = max_refl_root(p_refl, t)?;
    if (modulus - 1.0).abs() > 1e-6 {
        return None;
    }
    let t1 = zeta.arg();
    // Confirm it is a genuine torus zero of p.
    let v = p.eval((C64::from_polar(1.0, t1), C64::from_polar(1.0, t)));
    if v.norm() > 1e-5 * scale {
        return None;
    }
    Some((
        t1.rem_euclid(2.0 * std::f64::consts::PI),
        t.rem_euclid(2.0 * std::f64::consts::PI),
    ))
}

/// Report of the boundary inner check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerReport {
    pub grid_n: usize,
    pub sup_residual: f64,
    pub excluded_points: usize,
    pub inner: bool,
    pub tol_inner: f64,
}

/// Sup over a `grid_n x grid_n` torus sample of `||Phi(z)* Phi(z) - I||`;
/// points within `tol_pole` of denominator zeros are excluded and counted.
pub fn is_inner(
    phi: &RationalSchurFn,
    grid_n: usize,
    tols: &Tolerances,
) -> Result<InnerReport, CoreError> {
    let (r, c) = phi.dims;
    if r != c {
        return Err(CoreError::NotSquare(r, c));
    }
    let mut sup = 0.0f64;
    let mut excluded = 0usize;
    for a in 0..grid_n {
        for b in 0..grid_n {
            let t1 = 2.0 * std::f64::consts::PI * a as f64 / grid_n as f64;
            let t2 = 2.0 * std::f64::consts::PI * b as f64 / grid_n as f64;
            let z = (C64::from_polar(1.0, t1), C64::from_polar(1.0, t2));
            match eval_fn(phi, z, tols) {
                Ok(m) => {
                    let res = m.adjoint() * &m - DMatrix::<C64>::identity(c, c);
                    sup = sup.max(linalg::opnorm(&res));
                }
                Err(CoreError::PoleAtPoint { .. }) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(InnerReport {
        grid_n,
        sup_residual: sup,
        excluded_points: excluded,
        inner: sup <= tols.tol_inner,
        tol_inner: tols.tol_inner,
    })
}

/// Schur-bound certificate: sup of the operator norm over a boundary grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurCertificate {
    pub grid_n: usize,
    pub sup_norm: f64,
    pub excluded_points: usize,
    pub schur: bool,
    pub tol_schur: f64,
}

/// Sup over a torus grid of the operator norm of `Phi(z)`.
pub fn schur_bound(
    phi: &RationalSchurFn,
    grid_n: usize,
    tols: &Tolerances,
) -> Result<SchurCertificate, CoreError> {
    let mut sup = 0.0f64;
    let mut excluded = 0usize;
    for a in 0..grid_n {
        for b in 0..grid_n {
            let t1 = 2.0 * std::f64::consts::PI * a as f64 / grid_n as f64;
            let t2 = 2.0 * std::f64::consts::PI * b as f64 / grid_n as f64;
            let z = (C64::from_polar(1.0, t1), C64::from_polar(1.0, t2));
            match eval_fn(phi, z, tols) {
                Ok(m) => sup = sup.max(linalg::opnorm(&m)),
                Err(CoreError::PoleAtPoint { .. }) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(SchurCertificate {
        grid_n,
        sup_norm: sup,
        excluded_points: excluded,
        schur: sup <= 1.0 + tols.tol_schur,
        tol_schur: tols.tol_schur,
    })
}

/// Bundle of the numeric checks for a function file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateSet {
    pub stability: StabilityCertificate,
    pub schur: SchurCertificate,
    pub inner: Option<InnerReport>,
}

/// Run the full certificate battery (stability, Schur bound, inner when square).
pub fn certify(
    phi: &RationalSchurFn,
    grid_n: usize,
    tols: &Tolerances,
) -> Result<CertificateSet, CoreError> {
    let stability = is_stable(phi.denominator(), &StabilityOpts::default())?;
    let schur = schur_bound(phi, grid_n, tols)?;
    let inner = if phi.dims.0 == phi.dims.1 {
        Some(is_inner(phi, grid_n, tols)?)
    } else {
        None
    };
    Ok(CertificateSet {
        stability,
        schur,
        inner,
    })
}

// ---------------------------------------------------------------------------
// JSON formats
// ---------------------------------------------------------------------------

/// Wire format of a polynomial: `{"deg":[d1,d2],"coeffs":[[[re,im],...],...]}`
/// with `coeffs` row-major in the z1 power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiPolyJson {
    pub deg: [usize; 2],
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

impl From<&BiPoly> for BiPolyJson {
    fn from(p: &BiPoly) -> Self {
        let (d1, d2) = p.deg();
        let coeffs = (0..=d1)
            .map(|i| {
                (0..=d2)
                    .map(|j| {
                        let c = p.get(i, j);
                        [c.re, c.im]
                    })
                    .collect()
            })
            .collect();
        Self {
            deg: [d1, d2],
            coeffs,
        }
    }
}

impl TryFrom<&BiPolyJson> for BiPoly {
    type Error = CoreError;
    fn try_from(j: &BiPolyJson) -> Result<Self, CoreError> {
        if j.coeffs.len() != j.deg[0] + 1 || j.coeffs.iter().any(|r| r.len() != j.deg[1] + 1) {
            return Err(CoreError::InvalidInput(
                "polynomial grid does not match declared degree".into(),
            ));
        }
        BiPoly::from_grid(
            j.coeffs
                .iter()
                .map(|r| r.iter().map(|c| C64::new(c[0], c[1])).collect())
                .collect(),
        )
    }
}

/// Wire format of a matrix rational function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalSchurFnJson {
    pub dims: [usize; 2],
    pub numerator: Vec<Vec<BiPolyJson>>,
    pub denominator: BiPolyJson,
}

impl From<&RationalSchurFn> for RationalSchurFnJson {
    fn from(f: &RationalSchurFn) -> Self {
        Self {
            dims: [f.dims.0, f.dims.1],
            numerator: f
                .numerator
                .iter()
                .map(|row| row.iter().map(BiPolyJson::from).collect())
                .collect(),
            denominator: BiPolyJson::from(&f.denominator),
        }
    }
}

impl TryFrom<&RationalSchurFnJson> for RationalSchurFn {
    type Error = CoreError;
    fn try_from(j: &RationalSchurFnJson) -> Result<Self, CoreError> {
        if j.numerator.len() != j.dims[0] || j.numerator.iter().any(|r| r.len() != j.dims[1]) {
            return Err(CoreError::InvalidInput(
                "numerator grid does not match declared dims".into(),
            ));
        }
        let numerator = j
            .numerator
            .iter()
            .map(|row| {
                row.iter()
                    .map(BiPoly::try_from)
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        RationalSchurFn::new(numerator, BiPoly::try_from(&j.denominator)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{flagship, flagship_denominator as flagship_denom};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let p = flagship_denom();
        assert_eq!(p.eval((c(0.0, 0.0), c(0.0, 0.0))), c(2.0, 0.0));
        assert_eq!(p.eval((c(1.0, 0.0), c(1.0, 0.0))), c(0.0, 0.0));
        // direct substitution by hand: 2 - i - 0 = 2 - i
        assert_eq!(p.eval((c(0.0, 1.0), c(0.0, 0.0))), c(2.0, -1.0));
    }

    #[test]
    fn eval_fn_examples() {
        let tols = Tolerances::default();
        let z1 =
            RationalSchurFn::scalar(BiPoly::monomial(1, 0), BiPoly::constant(c(1.0, 0.0))).unwrap();
        let v = eval_fn(&z1, (c(0.5, 0.0), c(0.9, 0.0)), &tols).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 0.5, epsilon = 1e-15);

        let flag = flagship();
        let v = eval_fn(&flag, (c(0.0, 0.0), c(0.0, 0.0)), &tols).unwrap();
        assert_eq!(v[(0, 0)], c(0.0, 0.0));
        match eval_fn(&flag, (c(1.0, 0.0), c(1.0, 0.0)), &tols) {
            Err(CoreError::PoleAtPoint { .. }) => {}
            other => panic!("expected PoleAtPoint, got {other:?}"),
        }
    }

    #[test]
    fn reflect_examples() {
        let p = flagship_denom();
        let r = p.reflect((1, 1)).unwrap();
        // 2 z1 z2 - z2 - z1
        assert_eq!(r.get(1, 1), c(2.0, 0.0));
        assert_eq!(r.get(0, 1), c(-1.0, 0.0));
        assert_eq!(r.get(1, 0), c(-1.0, 0.0));
        assert_eq!(r.get(0, 0), c(0.0, 0.0));

        let one = BiPoly::constant(c(1.0, 0.0));
        assert_eq!(one.reflect((1, 1)).unwrap(), BiPoly::monomial(1, 1));

        // 1 + i z1 reflected at (1,0): -i + z1
        let p = BiPoly::from_grid(vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]).unwrap();
        let r = p.reflect((1, 0)).unwrap();
        assert_eq!(r.get(0, 0), c(0.0, -1.0));
        assert_eq!(r.get(1, 0), c(1.0, 0.0));

        match BiPoly::monomial(2, 0).reflect((1, 1)) {
            Err(CoreError::EnvelopeTooSmall(..)) => {}
            other => panic!("expected EnvelopeTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn stability_examples() {
        let opts = StabilityOpts::default();
        let cert = is_stable(&flagship_denom(), &opts).unwrap();
        // boundary zero at (1,1) permitted and located
        assert_eq!(cert.boundary_zeros.len(), 1);
        let (t1, t2) = cert.boundary_zeros[0];
        assert!(t1.abs().min((2.0 * std::f64::consts::PI - t1).abs()) < 1e-8);
        assert!(t2.abs().min((2.0 * std::f64::consts::PI - t2).abs()) < 1e-8);

        is_stable(&BiPoly::constant(c(1.0, 0.0)), &opts).unwrap();

        // z1 - 0.5 has an interior zero near (0.5, .)
        let bad = BiPoly::from_grid(vec![vec![c(-0.5, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        match is_stable(&bad, &opts) {
            Err(CoreError::UnstableDenominator { re1, .. }) => {
                assert_abs_diff_eq!(re1, 0.5, epsilon = 1e-6)
            }
            other => panic!("expected UnstableDenominator, got {other:?}"),
        }
    }

    #[test]
    fn inner_examples() {
        let tols = Tolerances::default();
        let one = BiPoly::constant(c(1.0, 0.0));
        let z1z2 = RationalSchurFn::scalar(BiPoly::monomial(1, 1), one.clone()).unwrap();
        let rep = is_inner(&z1z2, 32, &tols).unwrap();
        assert!(rep.inner);
        assert!(rep.sup_residual < 1e-13);

        let rep = is_inner(&flagship(), 64, &tols).unwrap();
        assert!(rep.inner, "flagship inner residual {}", rep.sup_residual);
        assert!(rep.sup_residual <= 1e-12);

        // (z1 + z2)/2 fails at (1, -1) with residual about 1/2... actually the
        // sup of |1 - |phi|^2| over the grid is 1 (at phi = 0).
        let half = BiPoly::from_grid(vec![
            vec![c(0.0, 0.0), c(0.5, 0.0)],
            vec![c(0.5, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let avg = RationalSchurFn::scalar(half, one).unwrap();
        let rep = is_inner(&avg, 32, &tols).unwrap();
        assert!(!rep.inner);
        assert!(rep.sup_residual >= 0.5);

        let row = RationalSchurFn::new(
            vec![vec![BiPoly::monomial(1, 0), BiPoly::monomial(0, 1)]],
            BiPoly::constant(c(1.0, 0.0)),
        )
        .unwrap();
        match is_inner(&row, 8, &tols) {
            Err(CoreError::NotSquare(1, 2)) => {}
            other => panic!("expected NotSquare, got {other:?}"),
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(d1: usize, d2: usize) -> impl Strategy<Value = BiPoly> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), (d1 + 1) * (d2 + 1)).prop_map(
                move |vals| {
                    let rows = (0..=d1)
                        .map(|i| {
                            (0..=d2)
                                .map(|j| {
                                    let (re, im) = vals[i * (d2 + 1) + j];
                                    C64::new(re, im)
                                })
                                .collect()
                        })
                        .collect();
                    BiPoly::from_grid(rows).unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn reflect_is_an_involution(p in arb_poly(2, 3)) {
                let e = (3usize, 4usize);
                let r = p.reflect(e).unwrap();
                let rr = r.reflect(e).unwrap();
                for i in 0..=e.0 {
                    for j in 0..=e.1 {
                        prop_assert!((rr.get(i, j) - p.get(i, j)).norm() < 1e-15);
                    }
                }
            }

            #[test]
            fn reflect_matches_torus_conjugation(
                p in arb_poly(2, 2),
                t1 in 0.0f64..(2.0 * std::f64::consts::PI),
                t2 in 0.0f64..(2.0 * std::f64::consts::PI),
            ) {
                let (n, m) = (3usize, 3usize);
                let z = (C64::from_polar(1.0, t1), C64::from_polar(1.0, t2));
                let lhs = p.reflect((n, m)).unwrap().eval(z);
                let rhs = z.0.powu(n as u32) * z.1.powu(m as u32) * p.eval(z).conj();
                prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + p.max_coeff()));
            }

            #[test]
            fn eval_distributes(
                p in arb_poly(3, 3),
                q in arb_poly(3, 3),
                re1 in -0.9f64..0.9, im1 in -0.9f64..0.9,
                re2 in -0.9f64..0.9, im2 in -0.9f64..0.9,
            ) {
                let z = (C64::new(re1, im1), C64::new(re2, im2));
                let sum = (p.add(&q).eval(z) - (p.eval(z) + q.eval(z))).norm();
                let prod = (p.mul(&q).eval(z) - p.eval(z) * q.eval(z)).norm();
                let scale = 1.0 + p.max_coeff() * q.max_coeff();
                prop_assert!(sum < 1e-12 * scale, "sum deviation {sum}");
                prop_assert!(prod < 1e-12 * scale * 32.0, "product deviation {prod}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let f = flagship();
        let j = RationalSchurFnJson::from(&f);
        let s = serde_json::to_string(&j).unwrap();
        let back: RationalSchurFnJson = serde_json::from_str(&s).unwrap();
        let g = RationalSchurFn::try_from(&back).unwrap();
        assert_eq!(g.denominator(), f.denominator());
        assert_eq!(g.entry(0, 0), f.entry(0, 0));
    }
}
