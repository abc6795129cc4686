//! Fourier/Taylor coefficient extraction and inner products on the torus and
//! on H²(𝔻²) for rational functions with stable denominators.
//!
//! Two pairing routes live here. [`h2_inner`] is the windowed coefficient sum
//! with an honest tail bound; it is cheap and exact for polynomial data but
//! only algebraically convergent when the denominator has boundary zeros.
//! [`h2_pair`] evaluates the same inner product as an iterated contour
//! integral (residues in the first variable, trapezoid in the second) and
//! converges exponentially whenever the integrand is integrable; the model
//! space Gram matrices are built on it.

use crate::bipoly::BiPoly;
use crate::error::CoreError;
use crate::C64;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Coefficient tables
// ---------------------------------------------------------------------------

/// Decay model fitted to the coefficient mass per total degree; used to
/// report tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayModel {
    /// Finitely supported: no tail.
    Exact,
    /// Fitted C * r^s.
    Geometric { c: f64, r: f64 },
    /// Fitted C * s^(-alpha); raised when boundary zeros force slow decay.
    Algebraic { c: f64, alpha: f64 },
    /// No usable fit; the tail bound is infinite.
    Unknown,
}

/// Rectangular window of Fourier/Taylor coefficients with a recorded tail
/// estimate for the mass outside the window.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    /// Window `[k_lo..k_hi] x [l_lo..l_hi]`, inclusive.
    pub window: (i64, i64, i64, i64),
    /// Row-major in the first index.
    pub values: Vec<C64>,
    /// Estimate of the l2 mass outside the window.
    pub tail_bound: f64,
    /// Decay model the tail estimate came from.
    pub decay: DecayModel,
}

impl CoeffTable {
    pub fn new(window: (i64, i64, i64, i64)) -> Self {
        let (k_lo, k_hi, l_lo, l_hi) = window;
        assert!(k_hi >= k_lo && l_hi >= l_lo, "empty coefficient window");
        let rows = (k_hi - k_lo + 1) as usize;
        let cols = (l_hi - l_lo + 1) as usize;
        Self {
            window,
            values: vec![C64::new(0.0, 0.0); rows * cols],
            tail_bound: 0.0,
            decay: DecayModel::Exact,
        }
    }

    fn cols(&self) -> usize {
        (self.window.3 - self.window.2 + 1) as usize
    }

    pub fn contains(&self, k: i64, l: i64) -> bool {
        k >= self.window.0 && k <= self.window.1 && l >= self.window.2 && l <= self.window.3
    }

    pub fn get(&self, k: i64, l: i64) -> C64 {
        if !self.contains(k, l) {
            return C64::new(0.0, 0.0);
        }
        let row = (k - self.window.0) as usize;
        let col = (l - self.window.2) as usize;
        self.values[row * self.cols() + col]
    }

    pub fn set(&mut self, k: i64, l: i64, v: C64) {
        assert!(self.contains(k, l), "index outside window");
        let row = (k - self.window.0) as usize;
        let col = (l - self.window.2) as usize;
        let c = self.cols();
        self.values[row * c + col] = v;
    }

    /// True when the fitted decay is algebraic or unusable: boundary zeros of
    /// the denominator force slow decay and downstream consumers should warn.
    pub fn slow_decay(&self) -> bool {
        matches!(
            self.decay,
            DecayModel::Algebraic { .. } | DecayModel::Unknown
        )
    }

    /// Iterate (k, l, value) over the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        let (k_lo, _, l_lo, l_hi) = self.window;
        let cols = self.cols();
        self.values.iter().enumerate().map(move |(idx, &v)| {
            let row = (idx / cols) as i64;
            let col = (idx % cols) as i64;
            let _ = l_hi;
            (k_lo + row, l_lo + col, v)
        })
    }
}

/// Fourier support regions of L²(𝕋²) used by the projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// supp ⊂ Z+ x Z+
    PP,
    /// supp ⊂ Z- x Z-  (strictly negative quadrant)
    MM,
    /// supp ⊂ Z+ x Z-
    PM,
    /// supp ⊂ Z- x Z+
    MP,
    /// supp ⊂ Z x Z+
    DotP,
    /// supp ⊂ Z x Z-
    DotM,
    /// supp ⊂ Z+ x Z
    PDot,
    /// supp ⊂ Z- x Z
    MDot,
}

impl Region {
    pub fn contains(self, k: i64, l: i64) -> bool {
        match self {
            Region::PP => k >= 0 && l >= 0,
            Region::MM => k <= -1 && l <= -1,
            Region::PM => k >= 0 && l <= -1,
            Region::MP => k <= -1 && l >= 0,
            Region::DotP => l >= 0,
            Region::DotM => l <= -1,
            Region::PDot => k >= 0,
            Region::MDot => k <= -1,
        }
    }
}

/// Zero out the entries outside the region; the window is unchanged.
pub fn fourier_support_projection(table: &CoeffTable, region: Region) -> CoeffTable {
    let mut out = table.clone();
    let cols = out.cols();
    for idx in 0..out.values.len() {
        let k = out.window.0 + (idx / cols) as i64;
        let l = out.window.2 + (idx % cols) as i64;
        if !region.contains(k, l) {
            out.values[idx] = C64::new(0.0, 0.0);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Taylor coefficients of q / p
// ---------------------------------------------------------------------------

/// Taylor coefficients of `1/p` on `[0..order]^2` by the convolution
/// recursion `p * (1/p) = 1`. Exact up to floating-point roundoff.
fn recip_coeffs(p: &BiPoly, order: usize) -> Result<Vec<Vec<C64>>, CoreError> {
    let p00 = p.get(0, 0);
    if p00.norm() == 0.0 {
        return Err(CoreError::InvalidInput(
            "denominator vanishes at the origin".into(),
        ));
    }
    let (d1, d2) = p.deg();
    let mut c = vec![vec![C64::new(0.0, 0.0); order + 1]; order + 1];
    for a in 0..=order {
        for b in 0..=order {
            let mut acc = if a == 0 && b == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            let imax = d1.min(a);
            let jmax = d2.min(b);
            for i in 0..=imax {
                for j in 0..=jmax {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let pij = p.get(i, j);
                    if pij.norm() != 0.0 {
                        acc -= pij * c[a - i][b - j];
                    }
                }
            }
            c[a][b] = acc / p00;
        }
    }
    Ok(c)
}

/// Least-squares line through (x, y) points; returns (slope, intercept, sse).
fn fit_line(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 3 {
        return None;
    }
    let nf = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = nf * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let sse = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Some((slope, intercept, sse))
}

/// Fit a decay model to the per-total-degree l2 mass and estimate the tail
/// beyond `order`. Geometric C*r^s and algebraic C*s^-alpha fits compete on
/// their misfit over the top half of the window; an r >= 0.999 geometric fit
/// always falls back to the algebraic model.
fn fit_tail(mass: &[f64], order: usize) -> (f64, DecayModel) {
    let last_nonzero = mass.iter().rposition(|&m| m > 0.0);
    let last = match last_nonzero {
        None => return (0.0, DecayModel::Exact),
        Some(s) => s,
    };
    if last + 2 <= order {
        // Finitely supported within the window.
        return (0.0, DecayModel::Exact);
    }
    let s0 = (order / 2).max(1);
    let geo_pts: Vec<(f64, f64)> = (s0..=order)
        .filter(|&s| mass[s] > 0.0)
        .map(|s| (s as f64, mass[s].ln()))
        .collect();
    let alg_pts: Vec<(f64, f64)> = (s0..=order)
        .filter(|&s| mass[s] > 0.0)
        .map(|s| ((s as f64).ln(), mass[s].ln()))
        .collect();
    let geo = fit_line(&geo_pts);
    let alg = fit_line(&alg_pts);
    let geo_model = geo.map(|(slope, intercept, sse)| {
        let r = slope.exp();
        (r, intercept.exp(), sse)
    });
    let alg_model = alg.map(|(slope, intercept, sse)| {
        let alpha = -slope;
        (alpha, intercept.exp(), sse)
    });
    match (geo_model, alg_model) {
        (Some((r, c, sse_g)), alg)
            if r < 0.999 && alg.map(|(_, _, sse_a)| sse_g <= sse_a).unwrap_or(true) =>
        {
            let tail = c * r.powi(order as i32 + 1) / (1.0 - r);
            (tail, DecayModel::Geometric { c, r })
        }
        (_, Some((alpha, c, _))) => {
            if alpha > 1.0 {
                let tail = c * (order as f64).powf(1.0 - alpha) / (alpha - 1.0);
                (tail, DecayModel::Algebraic { c, alpha })
            } else {
                (f64::INFINITY, DecayModel::Algebraic { c, alpha })
            }
        }
        (Some((r, c, _)), None) => {
            let r = r.min(0.999_999);
            let tail = c * r.powi(order as i32 + 1) / (1.0 - r);
            (tail, DecayModel::Geometric { c, r })
        }
        (None, None) => (f64::INFINITY, DecayModel::Unknown),
    }
}

/// Taylor coefficients of `q/p` for `0 <= i, j <= order`, with a tail bound
/// from the fitted decay of the coefficient mass.
pub fn taylor_coeffs(q: &BiPoly, p: &BiPoly, order: usize) -> Result<CoeffTable, CoreError> {
    let recip = recip_coeffs(p, order)?;
    let (q1, q2) = q.deg();
    let mut table = CoeffTable::new((0, order as i64, 0, order as i64));
    for a in 0..=order {
        for b in 0..=order {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..=q1.min(a) {
                for j in 0..=q2.min(b) {
                    let qc = q.get(i, j);
                    if qc.norm() != 0.0 {
                        acc += qc * recip[a - i][b - j];
                    }
                }
            }
            table.set(a as i64, b as i64, acc);
        }
    }
    // l2 mass per anti-diagonal (total degree), the natural decay axis.
    let mut diag = vec![0.0f64; 2 * order + 1];
    for (k, l, v) in table.iter() {
        diag[(k + l) as usize] += v.norm_sqr();
    }
    let mut per_degree: Vec<f64> = diag.iter().map(|m| m.sqrt()).collect();
    per_degree.truncate(order + 1);
    let (tail, decay) = fit_tail(&per_degree, order);
    table.tail_bound = tail;
    table.decay = decay;
    Ok(table)
}

/// Coefficients of `1/conj(p)` at indices `(-k, -l)`, `0 <= k, l <= order`.
/// The decay model reports slow decay when boundary zeros force an algebraic
/// tail.
pub fn reciprocal_conj_expansion(p: &BiPoly, order: usize) -> Result<CoeffTable, CoreError> {
    let recip = recip_coeffs(p, order)?;
    let mut table = CoeffTable::new((-(order as i64), 0, -(order as i64), 0));
    let mut diag = vec![0.0f64; 2 * order + 1];
    for k in 0..=order {
        for l in 0..=order {
            let v = recip[k][l].conj();
            table.set(-(k as i64), -(l as i64), v);
            diag[k + l] += v.norm_sqr();
        }
    }
    let mut per_degree: Vec<f64> = diag.iter().map(|m| m.sqrt()).collect();
    per_degree.truncate(order + 1);
    let (tail, decay) = fit_tail(&per_degree, order);
    table.tail_bound = tail;
    table.decay = decay;
    Ok(table)
}

/// Result of the windowed H² pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H2Inner {
    pub value: C64,
    pub tail_bound: f64,
    pub order_used: usize,
    /// Whether successive doublings agreed to 1e-10 before the order cap.
    pub converged: bool,
}

/// Truncated H² pairing of `f = q_f/p` and `g = q_g/p`: the coefficient sum
/// over `[0..N]^2` plus a recorded tail bound. Doubles the order starting
/// from `order` until successive values differ by less than 1e-10 or the
/// order reaches 512.
pub fn h2_inner(
    q_f: &BiPoly,
    q_g: &BiPoly,
    p: &BiPoly,
    order: usize,
) -> Result<H2Inner, CoreError> {
    let mut n = order.clamp(8, 512);
    let mut prev: Option<C64> = None;
    loop {
        let tf = taylor_coeffs(q_f, p, n)?;
        let tg = taylor_coeffs(q_g, p, n)?;
        let mut acc = C64::new(0.0, 0.0);
        let mut norm_f = 0.0f64;
        let mut norm_g = 0.0f64;
        for (k, l, v) in tf.iter() {
            let w = tg.get(k, l);
            acc += v * w.conj();
            norm_f += v.norm_sqr();
            norm_g += w.norm_sqr();
        }
        let tail = tf.tail_bound * tg.tail_bound
            + tf.tail_bound * norm_g.sqrt()
            + norm_f.sqrt() * tg.tail_bound;
        let converged = prev.map(|p0| (acc - p0).norm() < 1e-10).unwrap_or(false);
        if converged || n >= 512 {
            return Ok(H2Inner {
                value: acc,
                tail_bound: tail,
                order_used: n,
                converged,
            });
        }
        prev = Some(acc);
        n = (2 * n).min(512);
    }
}

// ---------------------------------------------------------------------------
// Exact rational pairing by iterated residues
// ---------------------------------------------------------------------------

/// Value of the exact pairing together with its self-reported accuracy.
#[derive(Debug, Clone, Copy)]
pub struct PairValue {
    pub value: C64,
    /// Difference between the last two trapezoid levels.
    pub err: f64,
    /// Outer grid size at which the value converged.
    pub grid: usize,
}

/// Exact H²/L² pairing for rational data over a stable denominator:
///
/// `∫_T² z1^s1 z2^s2 · u(z) · conj(v(z)) / |p(z)|² dm(z)`
///
/// evaluated by residues in `z1` and an offset trapezoid rule in `z2`. The
/// trapezoid converges exponentially because the inner residue sum is a
/// rational function of `z2` analytic in a neighborhood of the circle; the
/// grid is doubled until two successive levels agree. Fails with
/// [`CoreError::PairingDivergent`] when no convergence is reached (which is
/// exactly the non-integrable case: the inner sum has a pole on the circle).
pub fn h2_pair(
    u: &BiPoly,
    v: &BiPoly,
    p: &BiPoly,
    shift: (i64, i64),
) -> Result<PairValue, CoreError> {
    let (n, m) = p.deg();
    let (v1, v2) = v.deg();
    let b1 = v1.max(n);
    let b2 = v2.max(m);
    let p_refl = p.reflect((n, m)).expect("reflection at own degree");
    let v_refl = v.reflect((b1, b2)).expect("reflection at chosen envelope");
    let num = u.mul(&v_refl);

    // z1 exponent e1 and z2 exponent e2 of the transformed integrand,
    // before splitting into numerator power vs pole order at 0.
    let e1 = shift.0 + n as i64 - b1 as i64 - 1;
    let e2 = shift.1 + m as i64 - b2 as i64 - 1;
    let num = if e1 > 0 {
        num.shift(e1 as usize, 0)
    } else {
        num
    };
    let kappa = (-e1).max(0) as usize;

    let mut prev: Option<C64> = None;
    let mut grid = 32usize;
    let scale = num.max_coeff().max(1.0) / p.max_coeff().max(1e-12).powi(2);
    while grid <= 32768 {
        match outer_mean(&num, p, &p_refl, kappa, e2, grid) {
            Some(val) => {
                if let Some(p0) = prev {
                    let diff = (val - p0).norm();
                    if diff <= 1e-12 * val.norm().max(1.0) {
                        return Ok(PairValue {
                            value: val,
                            err: diff,
                            grid,
                        });
                    }
                }
                prev = Some(val);
            }
            None => {
                // Bad node (root collision); retry at the next level, whose
                // offset grid lands elsewhere.
                prev = None;
            }
        }
        grid *= 2;
    }
    Err(CoreError::PairingDivergent {
        detail: format!(
            "outer trapezoid did not stabilize by grid 32768 (scale {scale:.3e}); \
             the integrand is non-integrable or decays too slowly"
        ),
    })
}

/// One trapezoid level: mean over the offset circle grid of the inner
/// residue sum times the z2 monomial factor. Returns None if any node is
/// numerically degenerate (clustered roots), so the caller can move on to
/// the next grid level.
fn outer_mean(
    num: &BiPoly,
    p: &BiPoly,
    p_refl: &BiPoly,
    kappa: usize,
    e2: i64,
    grid: usize,
) -> Option<C64> {
    let mut acc = C64::new(0.0, 0.0);
    // Golden-ratio offset keeps nodes away from the (finitely many) pinch
    // angles of the denominators.
    let offset = 0.5 + 0.618_033_988_749_894_9;
    for t in 0..grid {
        let ang = 2.0 * std::f64::consts::PI * (t as f64 + offset) / grid as f64;
        let w = C64::from_polar(1.0, ang);
        let j = inner_residue_sum(num, p, p_refl, kappa, w)?;
        // Multiply by w^(e2+1): the outer contour measure.
        acc += j * cpow(w, e2 + 1);
    }
    Some(acc / C64::new(grid as f64, 0.0))
}

fn cpow(w: C64, e: i64) -> C64 {
    if e >= 0 {
        w.powu(e as u32)
    } else {
        w.powu((-e) as u32).inv()
    }
}

/// Sum of the residues of `num(z1,w) / (z1^kappa p(z1,w) p~(z1,w))` over the
/// poles inside the unit disk: the roots of `p~(., w)` (all inside for a
/// stable denominator) plus the pole of order `kappa` at the origin.
fn inner_residue_sum(
    num: &BiPoly,
    p: &BiPoly,
    p_refl: &BiPoly,
    kappa: usize,
    w: C64,
) -> Option<C64> {
    let pr_slice = p_refl.slice_z1(w);
    let p_slice = p.slice_z1(w);
    let num_slice = num.slice_z1(w);
    let roots = crate::linalg::poly_roots(&pr_slice);

    // Guards: clustered roots or a root sitting on the origin make the
    // simple-pole formulas unusable at this node.
    for (i, a) in roots.iter().enumerate() {
        if kappa > 0 && a.norm() < 1e-7 {
            return None;
        }
        for b in roots.iter().skip(i + 1) {
            if (a - b).norm() < 1e-7 {
                return None;
            }
        }
    }

    let eval = |coeffs: &[C64], z: C64| {
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..coeffs.len()).rev() {
            acc = acc * z + coeffs[k];
        }
        acc
    };
    let eval_deriv = |coeffs: &[C64], z: C64| {
        let mut acc = C64::new(0.0, 0.0);
        for k in (1..coeffs.len()).rev() {
            acc = acc * z + coeffs[k] * C64::new(k as f64, 0.0);
        }
        acc
    };

    let mut total = C64::new(0.0, 0.0);
    for &zeta in &roots {
        // Stability puts every reflected root inside the closed disk; tiny
        // excursions are roundoff.
        if zeta.norm() > 1.0 + 1e-6 {
            continue;
        }
        let denom = cpow(zeta, kappa as i64) * eval(&p_slice, zeta) * eval_deriv(&pr_slice, zeta);
        if denom.norm() < 1e-280 {
            return None;
        }
        total += eval(&num_slice, zeta) / denom;
    }

    if kappa > 0 {
        // Residue at the origin: coefficient of z1^(kappa-1) in the power
        // series of num / (p * p~), by univariate series division.
        let d0 = p_slice[0] * pr_slice[0];
        if d0.norm() < 1e-280 {
            return None;
        }
        // Denominator series coefficients up to kappa-1.
        let mut den = vec![C64::new(0.0, 0.0); kappa];
        for (i, a) in p_slice.iter().enumerate() {
            for (j, b) in pr_slice.iter().enumerate() {
                if i + j < kappa {
                    den[i + j] += a * b;
                }
            }
        }
        let mut inv = vec![C64::new(0.0, 0.0); kappa];
        inv[0] = d0.inv();
        for s in 1..kappa {
            let mut acc = C64::new(0.0, 0.0);
            for t in 1..=s {
                acc += den[t] * inv[s - t];
            }
            inv[s] = -acc / d0;
        }
        let mut res0 = C64::new(0.0, 0.0);
        for s in 0..kappa {
            if s < num_slice.len() {
                res0 += num_slice[s] * inv[kappa - 1 - s];
            }
        }
        total += res0;
    }
    Some(total)
}

/// Wire format of a coefficient table:
/// `{"window":[k_lo,k_hi,l_lo,l_hi],"values":[[[re,im],...]],"tail_bound":x}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffTableJson {
    pub window: [i64; 4],
    pub values: Vec<Vec<[f64; 2]>>,
    pub tail_bound: f64,
    pub decay: DecayModel,
}

impl From<&CoeffTable> for CoeffTableJson {
    fn from(t: &CoeffTable) -> Self {
        let (k_lo, k_hi, l_lo, l_hi) = t.window;
        let values = (k_lo..=k_hi)
            .map(|k| {
                (l_lo..=l_hi)
                    .map(|l| {
                        let v = t.get(k, l);
                        [v.re, v.im]
                    })
                    .collect()
            })
            .collect();
        Self {
            window: [k_lo, k_hi, l_lo, l_hi],
            values,
            tail_bound: t.tail_bound,
            decay: t.decay,
        }
    }
}

impl TryFrom<&CoeffTableJson> for CoeffTable {
    type Error = CoreError;
    fn try_from(j: &CoeffTableJson) -> Result<Self, CoreError> {
        let [k_lo, k_hi, l_lo, l_hi] = j.window;
        if k_hi < k_lo || l_hi < l_lo {
            return Err(CoreError::InvalidInput("empty coefficient window".into()));
        }
        let rows = (k_hi - k_lo + 1) as usize;
        let cols = (l_hi - l_lo + 1) as usize;
        if j.values.len() != rows || j.values.iter().any(|r| r.len() != cols) {
            return Err(CoreError::InvalidInput(
                "coefficient grid does not match window".into(),
            ));
        }
        let mut t = CoeffTable::new((k_lo, k_hi, l_lo, l_hi));
        for (ri, row) in j.values.iter().enumerate() {
            for (ci, v) in row.iter().enumerate() {
                t.set(k_lo + ri as i64, l_lo + ci as i64, C64::new(v[0], v[1]));
            }
        }
        t.tail_bound = j.tail_bound;
        t.decay = j.decay;
        Ok(t)
    }
}

/// Hermitian Gram matrix of vector-valued rational elements `cols[k] =
/// (q_1,...,q_r)/p` under the exact pairing.
pub fn h2_gram(cols: &[Vec<BiPoly>], p: &BiPoly) -> Result<nalgebra::DMatrix<C64>, CoreError> {
    let k = cols.len();
    let mut g = nalgebra::DMatrix::<C64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..cols[a].len() {
                if cols[a][s].is_zero() || cols[b][s].is_zero() {
                    continue;
                }
                acc += h2_pair(&cols[a][s], &cols[b][s], p, (0, 0))?.value;
            }
            g[(a, b)] = acc;
            g[(b, a)] = acc.conj();
        }
    }
    Ok(g)
}
