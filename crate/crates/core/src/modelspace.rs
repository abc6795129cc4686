//! Finite-dimensional model spaces of a rational inner function: the
//! residual subspace, its two enlargements, the shift-difference spaces
//! carrying the canonical max/min kernels, and the kernels themselves.
//!
//! For an inner function the companion of `f` is `g = Φ* f`, the scattering
//! norm of the pair equals the H² norm of `f`, and membership of `f = q/p`
//! in a residual space reduces to (i) support conditions on the Fourier
//! coefficients of `Φ* f` and (ii) membership of `f` itself in H². The
//! support conditions are finite exact linear constraints on the numerator
//! coefficients; H² membership adds vanishing conditions at the torus zeros
//! of the denominator (divergence of the Gram pairing is detected and
//! reported when those are not enough).

use crate::bipoly::{self, BiPoly, RationalSchurFn};
use crate::error::CoreError;
use crate::kernelcalc::{agler_residual, midx, mono_count, FiniteKernel};
use crate::linalg;
use crate::torus;
use crate::{Tolerances, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Finite-dimensional space of vector-valued rational functions `q / p` with
/// a fixed degree envelope, presented by coefficient columns.
///
/// For the model spaces produced here the columns are H²-orthonormal and
/// `gram_tol` records the certified orthonormality defect. The raw ambient
/// space over a boundary-zero denominator contains non-H² elements; its
/// columns are plain coefficient vectors and `gram_tol` is infinite.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub envelope: (usize, usize),
    pub denom: BiPoly,
    pub outdim: usize,
    /// `(mono_count(envelope) * outdim) x dim` coefficient columns.
    pub basis: DMatrix<C64>,
    pub gram_tol: f64,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Numerator polynomials (one per component) of the `k`-th basis element.
    pub fn column_polys(&self, k: usize) -> Vec<BiPoly> {
        col_to_polys(
            &self.basis.column(k).into_owned(),
            self.envelope,
            self.outdim,
        )
    }

    /// Evaluate the `k`-th basis element at an interior point.
    pub fn eval_column(
        &self,
        k: usize,
        z: (C64, C64),
        tols: &Tolerances,
    ) -> Result<Vec<C64>, CoreError> {
        let pz = self.denom.eval(z);
        if pz.norm() < tols.tol_pole {
            return Err(CoreError::PoleAtPoint {
                abs_p: pz.norm(),
                tol: tols.tol_pole,
            });
        }
        let polys = self.column_polys(k);
        Ok(polys.iter().map(|q| q.eval(z) / pz).collect())
    }
}

/// Which residual space a constraint system describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualKind {
    /// supp(Φ* f) ⊂ Z- x Z-
    R,
    /// supp(Φ* f) ⊂ (Z- + 1) x Z-
    R1,
    /// supp(Φ* f) ⊂ Z- x (Z- + 1)
    R2,
}

impl ResidualKind {
    /// Forbidden Fourier indices of the companion for this space.
    fn forbidden(self, k: i64, l: i64) -> bool {
        match self {
            ResidualKind::R => k >= 0 || l >= 0,
            ResidualKind::R1 => k >= 1 || l >= 0,
            ResidualKind::R2 => k >= 0 || l >= 1,
        }
    }
}

/// Max/min flavor of the shift-difference spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WoldFlavor {
    Max,
    Min,
}

fn col_to_polys(col: &nalgebra::DVector<C64>, env: (usize, usize), r: usize) -> Vec<BiPoly> {
    let mut polys = Vec::with_capacity(r);
    for s in 0..r {
        let mut rows = vec![vec![C64::new(0.0, 0.0); env.1 + 1]; env.0 + 1];
        for i in 0..=env.0 {
            for j in 0..=env.1 {
                rows[i][j] = col[midx(env, i, j) * r + s];
            }
        }
        polys.push(BiPoly::from_grid(rows).expect("coefficient grid"));
    }
    polys
}

/// Gate: the canonical construction requires a square inner function.
fn require_inner(phi: &RationalSchurFn, tols: &Tolerances) -> Result<(), CoreError> {
    let report = bipoly::is_inner(phi, 64, tols)?;
    if !report.inner {
        return Err(CoreError::NotInner {
            residual: report.sup_residual,
            tol: report.tol_inner,
        });
    }
    Ok(())
}

/// The ambient coefficient family `z1^i z2^j e_s / p` over the function
/// envelope. Columns are orthonormalized under the H² pairing when every
/// Gram entry is finite (interior-stable denominators); otherwise the raw
/// coefficient basis is returned with an infinite `gram_tol`.
pub fn ambient_space(phi: &RationalSchurFn, tols: &Tolerances) -> Result<Subspace, CoreError> {
    require_inner(phi, tols)?;
    ambient_space_unchecked(phi, phi.envelope(), tols)
}

fn ambient_space_unchecked(
    phi: &RationalSchurFn,
    env: (usize, usize),
    tols: &Tolerances,
) -> Result<Subspace, CoreError> {
    let r = phi.dims().0;
    let p = phi.denominator().clone();
    let n = mono_count(env) * r;
    let identity = DMatrix::<C64>::identity(n, n);
    // Orthonormality is only certified when the whole family is in H².
    if bipoly::boundary_zeros(&p).is_empty() {
        let cols: Vec<Vec<BiPoly>> = (0..n)
            .map(|k| col_to_polys(&identity.column(k).into_owned(), env, r))
            .collect();
        let gram = torus::h2_gram(&cols, &p)?;
        let (rot, defect) = linalg::gram_orthonormalize(&identity, &gram, tols.rank_tol);
        return Ok(Subspace {
            envelope: env,
            denom: p,
            outdim: r,
            basis: rot,
            gram_tol: defect,
        });
    }
    Ok(Subspace {
        envelope: env,
        denom: p,
        outdim: r,
        basis: identity,
        gram_tol: f64::INFINITY,
    })
}

/// One row of the residual constraint system, with provenance.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub entries: Vec<C64>,
    /// Fourier index of the forbidden companion coefficient, or None for a
    /// boundary-vanishing (H² membership) row.
    pub index: Option<(i64, i64, usize)>,
    /// Truncation error of the row entries (zero on the exact paths).
    pub tail_bound: f64,
}

/// The residual constraint system over the ambient coefficient basis.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub kind: ResidualKind,
    pub envelope: (usize, usize),
    pub outdim: usize,
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintSet {
    /// Rows stacked into a matrix acting on ambient coefficient columns.
    pub fn matrix(&self) -> DMatrix<C64> {
        let ncols = mono_count(self.envelope) * self.outdim;
        let mut m = DMatrix::<C64>::zeros(self.rows.len(), ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &v) in row.entries.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Linear conditions on the ambient coefficients for membership of `f = q/p`
/// in the residual space: vanishing of the companion's Fourier coefficients
/// over the forbidden window, plus vanishing of the numerator at every torus
/// zero of the denominator (H² membership).
pub fn residual_constraints(
    phi: &RationalSchurFn,
    kind: ResidualKind,
    order: usize,
    tols: &Tolerances,
) -> Result<ConstraintSet, CoreError> {
    require_inner(phi, tols)?;
    residual_constraints_unchecked(phi, phi.envelope(), kind, order, tols.rank_tol)
}

/// H² membership rows: the numerator must vanish at every torus zero of
/// the denominator.
fn boundary_rows(phi: &RationalSchurFn, env: (usize, usize)) -> Vec<ConstraintRow> {
    let r = phi.dims().0;
    let ncols = mono_count(env) * r;
    let mut rows = Vec::new();
    for &(t1, t2) in &bipoly::boundary_zeros(phi.denominator()) {
        let xi = (C64::from_polar(1.0, t1), C64::from_polar(1.0, t2));
        for s in 0..r {
            let mut entries = vec![C64::new(0.0, 0.0); ncols];
            for i in 0..=env.0 {
                for j in 0..=env.1 {
                    entries[midx(env, i, j) * r + s] =
                        (xi.0.powu(i as u32) * xi.1.powu(j as u32)).conj();
                }
            }
            rows.push(ConstraintRow {
                entries,
                index: None,
                tail_bound: 0.0,
            });
        }
    }
    rows
}

fn residual_constraints_unchecked(
    phi: &RationalSchurFn,
    env: (usize, usize),
    kind: ResidualKind,
    order: usize,
    rank_tol: f64,
) -> Result<ConstraintSet, CoreError> {
    let r = phi.dims().0;
    let p = phi.denominator();
    let (n, m) = p.deg();
    let ncols = mono_count(env) * r;
    let mut rows = boundary_rows(phi, env);

    // Window of enforced forbidden indices. The scalar (and constant
    // denominator) paths are exact and finitely supported, so anything
    // outside the window contributes nothing there; for the general path
    // the window is the honesty boundary and the identity-residual retry
    // guards against under-enforcement.
    let k_hi = (env.0 + n + 1) as i64;
    let l_hi = (env.1 + m + 1) as i64;

    let scalar = r == 1;
    let const_denom = p.deg() == (0, 0);

    if scalar || const_denom {
        let k_lo = -(order as i64);
        let l_lo = -(order as i64);
        let recip = if scalar && !const_denom {
            Some(torus::taylor_coeffs(
                &BiPoly::constant(C64::new(1.0, 0.0)),
                p,
                (order + env.0 + env.1 + n + m + 4).max(16),
            )?)
        } else {
            None
        };
        for k in k_lo..=k_hi {
            for l in l_lo..=l_hi {
                if !kind.forbidden(k, l) {
                    continue;
                }
                for t in 0..r {
                    let mut entries = vec![C64::new(0.0, 0.0); ncols];
                    let mut nonzero = false;
                    for i in 0..=env.0 {
                        for j in 0..=env.1 {
                            for s in 0..r {
                                // Coefficient of (Φ* f)_t at (k, l) for the
                                // ambient element f = z1^i z2^j e_s / p.
                                let v = if let Some(recip) = &recip {
                                    // Scalar inner: Φ* f = conj(z)^((n,m)) q / conj(p),
                                    // so the (k, l) coefficient of the companion
                                    // is the (k+n, l+m) coefficient of q/conj(p).
                                    let u = k + n as i64;
                                    let vdx = l + m as i64;
                                    let a = i as i64 - u;
                                    let b = j as i64 - vdx;
                                    if a >= 0 && b >= 0 {
                                        recip.get(a, b).conj()
                                    } else {
                                        C64::new(0.0, 0.0)
                                    }
                                } else {
                                    // Constant denominator c: the companion is
                                    // Σ_s conj(P~_st) z^(i,j) / |c|^2.
                                    let c0 = p.get(0, 0);
                                    let pst = phi.entry(s, t);
                                    let a = i as i64 - k;
                                    let b = j as i64 - l;
                                    if a >= 0 && b >= 0 {
                                        pst.get(a as usize, b as usize).conj() / (c0 * c0.conj())
                                    } else {
                                        C64::new(0.0, 0.0)
                                    }
                                };
                                if v.norm() > 0.0 {
                                    nonzero = true;
                                }
                                entries[midx(env, i, j) * r + s] = v;
                            }
                        }
                    }
                    if nonzero {
                        rows.push(ConstraintRow {
                            entries,
                            index: Some((k, l, t)),
                            tail_bound: 0.0,
                        });
                    }
                }
            }
        }
        return Ok(ConstraintSet {
            kind,
            envelope: env,
            outdim: r,
            rows,
        });
    }

    // General matrix case over a non-constant denominator. Raw ambient
    // columns need not be in L², so the support rows are pairings computed
    // on the H²-restricted candidate basis (where the integrands are
    // integrable) and then converted back to ambient coordinates: a row φ
    // on the restricted coordinates acts on ambient x as φ·(V₀* x).
    let bmat = {
        let mut mm = DMatrix::<C64>::zeros(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.entries.iter().enumerate() {
                mm[(i, j)] = v;
            }
        }
        mm
    };
    let v0 = linalg::nullspace(&bmat, rank_tol);
    let polys: Vec<Vec<BiPoly>> = (0..v0.ncols())
        .map(|kc| col_to_polys(&v0.column(kc).into_owned(), env, r))
        .collect();
    let order_g = order.min(env.0 + env.1 + 4) as i64;
    for k in -order_g..=k_hi {
        for l in -order_g..=l_hi {
            if !kind.forbidden(k, l) {
                continue;
            }
            for t in 0..r {
                let mut row_v0 = vec![C64::new(0.0, 0.0); v0.ncols()];
                let mut scale = 0.0f64;
                for (cix, qcol) in polys.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (s, qs) in qcol.iter().enumerate() {
                        if qs.is_zero() || phi.entry(s, t).is_zero() {
                            continue;
                        }
                        acc += torus::h2_pair(qs, phi.entry(s, t), p, (-k, -l))?.value;
                    }
                    scale = scale.max(acc.norm());
                    row_v0[cix] = acc;
                }
                if scale < 1e-13 {
                    continue;
                }
                let mut entries = vec![C64::new(0.0, 0.0); ncols];
                for j in 0..ncols {
                    let mut acc = C64::new(0.0, 0.0);
                    for (cix, &rv) in row_v0.iter().enumerate() {
                        acc += rv * v0[(j, cix)].conj();
                    }
                    entries[j] = acc;
                }
                rows.push(ConstraintRow {
                    entries,
                    index: Some((k, l, t)),
                    tail_bound: 0.0,
                });
            }
        }
    }

    Ok(ConstraintSet {
        kind,
        envelope: env,
        outdim: r,
        rows,
    })
}

/// Orthonormal basis of the nullspace of the constraints, re-orthonormalized
/// under the exact H² pairing. An empty subspace is a valid result.
pub fn solve_subspace(
    ambient: &Subspace,
    constraints: &ConstraintSet,
    tols: &Tolerances,
) -> Result<Subspace, CoreError> {
    if ambient.envelope != constraints.envelope || ambient.outdim != constraints.outdim {
        return Err(CoreError::IncompatibleBasis(
            "constraints were built over a different ambient".into(),
        ));
    }
    let env = ambient.envelope;
    let r = ambient.outdim;
    let raw = linalg::nullspace(&constraints.matrix(), tols.rank_tol);
    if raw.ncols() == 0 {
        return Ok(Subspace {
            envelope: env,
            denom: ambient.denom.clone(),
            outdim: r,
            basis: raw,
            gram_tol: 0.0,
        });
    }
    let cols: Vec<Vec<BiPoly>> = (0..raw.ncols())
        .map(|k| col_to_polys(&raw.column(k).into_owned(), env, r))
        .collect();
    let gram = torus::h2_gram(&cols, &ambient.denom)?;
    let (rot, defect) = linalg::gram_orthonormalize(&raw, &gram, tols.rank_tol);
    Ok(Subspace {
        envelope: env,
        denom: ambient.denom.clone(),
        outdim: r,
        basis: &raw * rot,
        gram_tol: defect,
    })
}

/// Multiply every basis element by the coordinate `z_j`, staying inside the
/// envelope: membership of the shifted space in the enlargement guarantees
/// the top-degree coefficients vanish, which is asserted.
fn shift_within_envelope(space: &Subspace, j: usize) -> Result<DMatrix<C64>, CoreError> {
    let env = space.envelope;
    let r = space.outdim;
    let nrows = space.basis.nrows();
    let mut out = DMatrix::<C64>::zeros(nrows, space.dim());
    for k in 0..space.dim() {
        let col = space.basis.column(k);
        for i in 0..=env.0 {
            for jj in 0..=env.1 {
                for s in 0..r {
                    let v = col[midx(env, i, jj) * r + s];
                    if v.norm() == 0.0 {
                        continue;
                    }
                    let (ni, nj) = if j == 1 { (i + 1, jj) } else { (i, jj + 1) };
                    if ni > env.0 || nj > env.1 {
                        if v.norm() > 1e-9 {
                            return Err(CoreError::IncompatibleBasis(format!(
                                "shifted basis element leaves the envelope \
                                 (coefficient {:.3e} at z1^{} z2^{})",
                                v.norm(),
                                i,
                                jj
                            )));
                        }
                        continue;
                    }
                    out[(midx(env, ni, nj) * r + s, k)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of `R_j ⊖ Z_j R` (max) or `R_j ⊖ R` (min): the residual
/// enlargement minus the H²-orthogonal projection onto the (shifted)
/// residual space.
pub fn wold_difference(
    phi: &RationalSchurFn,
    j: usize,
    flavor: WoldFlavor,
    tols: &Tolerances,
) -> Result<Subspace, CoreError> {
    require_inner(phi, tols)?;
    let builder = ModelBuilder::new(phi.clone(), phi.envelope(), *tols)?;
    builder.wold_difference(j, flavor)
}

/// The five canonical kernels of a rational inner function.
#[derive(Debug, Clone)]
pub struct CanonicalKernels {
    pub k1_max: FiniteKernel,
    pub k1_min: FiniteKernel,
    pub k2_max: FiniteKernel,
    pub k2_min: FiniteKernel,
    pub g: FiniteKernel,
    /// Self-check residuals of the two canonical Agler pairs.
    pub residual_max_min: f64,
    pub residual_min_max: f64,
    /// Envelope actually used (grows by one on the automatic retry).
    pub envelope: (usize, usize),
}

/// Internal builder caching the residual spaces for one function at one
/// ambient envelope.
struct ModelBuilder {
    phi: RationalSchurFn,
    env: (usize, usize),
    tols: Tolerances,
    ambient: Subspace,
    space_r: Subspace,
    space_r1: Subspace,
    space_r2: Subspace,
}

impl ModelBuilder {
    fn new(phi: RationalSchurFn, env: (usize, usize), tols: Tolerances) -> Result<Self, CoreError> {
        let order = 2 * (env.0 + env.1) + 8;
        let ambient = ambient_space_unchecked(&phi, env, &tols)?;
        let c_r = residual_constraints_unchecked(&phi, env, ResidualKind::R, order, tols.rank_tol)?;
        let c_r1 = residual_constraints_unchecked(&phi, env, ResidualKind::R1, order, tols.rank_tol)?;
        let c_r2 = residual_constraints_unchecked(&phi, env, ResidualKind::R2, order, tols.rank_tol)?;
        let space_r = solve_subspace(&ambient, &c_r, &tols)?;
        let space_r1 = solve_subspace(&ambient, &c_r1, &tols)?;
        let space_r2 = solve_subspace(&ambient, &c_r2, &tols)?;
        Ok(Self {
            phi,
            env,
            tols,
            ambient,
            space_r,
            space_r1,
            space_r2,
        })
    }

    fn wold_difference(&self, j: usize, flavor: WoldFlavor) -> Result<Subspace, CoreError> {
        assert!(j == 1 || j == 2, "coordinate index must be 1 or 2");
        let enlargement = if j == 1 {
            &self.space_r1
        } else {
            &self.space_r2
        };
        let subtracted: DMatrix<C64> = match flavor {
            WoldFlavor::Max => shift_within_envelope(&self.space_r, j)?,
            WoldFlavor::Min => self.space_r.basis.clone(),
        };
        if subtracted.ncols() == 0 {
            return Ok(enlargement.clone());
        }
        if enlargement.dim() == 0 {
            return Ok(enlargement.clone());
        }
        let r = self.ambient.outdim;
        let env = self.env;
        let p = &self.ambient.denom;
        // Cross Grams in the shared coefficient space via the exact pairing.
        let mut all = DMatrix::<C64>::zeros(
            enlargement.basis.nrows(),
            enlargement.dim() + subtracted.ncols(),
        );
        all.columns_mut(0, enlargement.dim())
            .copy_from(&enlargement.basis);
        all.columns_mut(enlargement.dim(), subtracted.ncols())
            .copy_from(&subtracted);
        let polys: Vec<Vec<BiPoly>> = (0..all.ncols())
            .map(|k| col_to_polys(&all.column(k).into_owned(), env, r))
            .collect();
        let gram = torus::h2_gram(&polys, p)?;
        let nb = enlargement.dim();
        let g_bb = gram.view((0, 0), (nb, nb)).into_owned();
        let g_bw = gram.view((0, nb), (nb, subtracted.ncols())).into_owned();
        let g_ww = gram
            .view((nb, nb), (subtracted.ncols(), subtracted.ncols()))
            .into_owned();
        // Project each enlargement basis vector off the subtracted space:
        // coefficients c solve G_ww c = G_wb b.
        // Normal equations in the pairing convention <x, y> = x^T G conj(y):
        // the projection coefficients are conj(G_ww^-1 G_bw*), while the
        // residual Gram uses the unconjugated solve.
        let cc = linalg::pinv_solve(&g_ww, &g_bw.adjoint(), self.tols.rank_tol);
        // Residual vectors in coefficient space.
        let resid = &enlargement.basis - &subtracted * cc.conjugate();
        // Gram of residuals: G_bb - G_bw cc (projection identity).
        let g_res = &g_bb - &g_bw * &cc;
        let (rot, defect) = linalg::gram_orthonormalize(
            &DMatrix::<C64>::identity(nb, nb),
            &g_res,
            self.tols.rank_tol,
        );
        Ok(Subspace {
            envelope: env,
            denom: p.clone(),
            outdim: r,
            basis: &resid * rot,
            gram_tol: defect.max(enlargement.gram_tol),
        })
    }

    fn kernels(&self) -> Result<CanonicalKernels, CoreError> {
        let r = self.ambient.outdim;
        let p = self.ambient.denom.clone();
        let env = self.env;
        let from_space = |s: &Subspace| -> Result<FiniteKernel, CoreError> {
            FiniteKernel::from_columns(env, p.clone(), r, &s.basis)
        };
        let k1_max = from_space(&self.wold_difference(1, WoldFlavor::Max)?)?;
        let k1_min = from_space(&self.wold_difference(1, WoldFlavor::Min)?)?;
        let k2_max = from_space(&self.wold_difference(2, WoldFlavor::Max)?)?;
        let k2_min = from_space(&self.wold_difference(2, WoldFlavor::Min)?)?;
        let g = from_space(&self.space_r)?;
        let rep1 = agler_residual(
            &self.phi,
            &k1_max,
            &k2_min,
            200,
            crate::DEFAULT_SEED,
            &self.tols,
        )?;
        let rep2 = agler_residual(
            &self.phi,
            &k1_min,
            &k2_max,
            200,
            crate::DEFAULT_SEED,
            &self.tols,
        )?;
        Ok(CanonicalKernels {
            k1_max,
            k1_min,
            k2_max,
            k2_min,
            g,
            residual_max_min: rep1.sup,
            residual_min_max: rep2.sup,
            envelope: env,
        })
    }
}

/// Compute the five canonical kernels `(K1^max, K1^min, K2^max, K2^min, G)`
/// of a rational inner function. The ambient envelope starts at the function
/// envelope and is enlarged once if the Agler-identity self-check fails or a
/// model element overflows the envelope (both symptoms of the same
/// insufficiency).
pub fn canonical_kernels(
    phi: &RationalSchurFn,
    tols: &Tolerances,
) -> Result<CanonicalKernels, CoreError> {
    require_inner(phi, tols)?;
    let env = phi.envelope();
    let first = ModelBuilder::new(phi.clone(), env, *tols)?.kernels();
    match first {
        Ok(kernels)
            if kernels.residual_max_min <= tols.tol_residual
                && kernels.residual_min_max <= tols.tol_residual =>
        {
            return Ok(kernels)
        }
        Ok(_) | Err(CoreError::IncompatibleBasis(_)) => {}
        Err(e) => return Err(e),
    }
    // One retry with a larger ambient envelope, then fail loudly.
    let env2 = (env.0 + 1, env.1 + 1);
    let builder = ModelBuilder::new(phi.clone(), env2, *tols)?;
    let kernels = builder.kernels()?;
    if kernels.residual_max_min <= tols.tol_residual
        && kernels.residual_min_max <= tols.tol_residual
    {
        return Ok(kernels);
    }
    Err(CoreError::ResidualTooLarge {
        residual: kernels.residual_max_min.max(kernels.residual_min_max),
        tol: tols.tol_residual,
        context: format!(
            "canonical kernels failed the Agler identity self-check at envelopes {:?} and {:?}",
            env, env2
        ),
    })
}

/// Subspace wire format: ambient envelope, denominator reference, basis
/// coefficient columns and the certified orthonormality defect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub envelope: [usize; 2],
    pub denominator: crate::bipoly::BiPolyJson,
    pub outdim: usize,
    pub dim: usize,
    /// Column-major coefficient data, `[re, im]` pairs.
    pub basis: Vec<Vec<[f64; 2]>>,
    pub gram_tol: f64,
}

impl From<&Subspace> for SubspaceJson {
    fn from(s: &Subspace) -> Self {
        let basis = (0..s.dim())
            .map(|k| {
                s.basis
                    .column(k)
                    .iter()
                    .map(|v| [v.re, v.im])
                    .collect::<Vec<_>>()
            })
            .collect();
        Self {
            envelope: [s.envelope.0, s.envelope.1],
            denominator: crate::bipoly::BiPolyJson::from(&s.denom),
            outdim: s.outdim,
            dim: s.dim(),
            basis,
            gram_tol: s.gram_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use approx::assert_abs_diff_eq;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn span_dims(phi: &RationalSchurFn) -> (usize, usize, usize) {
        let t = tols();
        let ambient = ambient_space(phi, &t).unwrap();
        let order = 8;
        let r = solve_subspace(
            &ambient,
            &residual_constraints(phi, ResidualKind::R, order, &t).unwrap(),
            &t,
        )
        .unwrap();
        let r1 = solve_subspace(
            &ambient,
            &residual_constraints(phi, ResidualKind::R1, order, &t).unwrap(),
            &t,
        )
        .unwrap();
        let r2 = solve_subspace(
            &ambient,
            &residual_constraints(phi, ResidualKind::R2, order, &t).unwrap(),
            &t,
        )
        .unwrap();
        (r.dim(), r1.dim(), r2.dim())
    }

    #[test]
    fn ambient_examples() {
        let t = tols();
        let a = ambient_space(&corpus::z1z2(), &t).unwrap();
        assert_eq!(a.dim(), 4);
        assert!(a.gram_tol < 1e-12);

        let a = ambient_space(&corpus::z1(), &t).unwrap();
        assert_eq!(a.dim(), 2);

        let a = ambient_space(&corpus::flagship(), &t).unwrap();
        assert_eq!(a.dim(), 4);

        match ambient_space(&corpus::average(), &t) {
            Err(CoreError::NotInner { .. }) => {}
            other => panic!("expected NotInner, got {other:?}"),
        }
    }

    #[test]
    fn residual_space_dims() {
        // Hand Fourier-support computations:
        // z1 z2: R = span{1}, R1 = span{1, z1}, R2 = span{1, z2}.
        assert_eq!(span_dims(&corpus::z1z2()), (1, 2, 2));
        // z1: R = 0, R1 = 0, R2 = span{1}.
        assert_eq!(span_dims(&corpus::z1()), (0, 0, 1));
        // Flagship: support rows give {1, z1}; the H² filter cuts to
        // span{(1 - z1)/p}, and R is empty.
        assert_eq!(span_dims(&corpus::flagship()), (0, 1, 1));
    }

    #[test]
    fn flagship_r1_is_one_minus_z1() {
        let t = tols();
        let phi = corpus::flagship();
        let ambient = ambient_space(&phi, &t).unwrap();
        let cons = residual_constraints(&phi, ResidualKind::R1, 8, &t).unwrap();
        let r1 = solve_subspace(&ambient, &cons, &t).unwrap();
        assert_eq!(r1.dim(), 1);
        let q = &r1.column_polys(0)[0];
        // proportional to (1 - z1)/p with H² norm 1: coefficients ±sqrt(2)
        let a = q.get(0, 0);
        let b = q.get(1, 0);
        assert_abs_diff_eq!((a + b).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.norm(), 2.0f64.sqrt(), epsilon = 1e-9);
        assert!(q.get(0, 1).norm() < 1e-9 && q.get(1, 1).norm() < 1e-9);
    }

    #[test]
    fn wold_examples() {
        let t = tols();
        // z1 z2, j = 1, max: span{1}; min: span{z1}.
        let phi = corpus::z1z2();
        let wmax = wold_difference(&phi, 1, WoldFlavor::Max, &t).unwrap();
        assert_eq!(wmax.dim(), 1);
        let q = &wmax.column_polys(0)[0];
        assert_abs_diff_eq!(q.get(0, 0).norm(), 1.0, epsilon = 1e-10);
        assert!(q.get(1, 0).norm() < 1e-10);

        let wmin = wold_difference(&phi, 1, WoldFlavor::Min, &t).unwrap();
        assert_eq!(wmin.dim(), 1);
        let q = &wmin.column_polys(0)[0];
        assert_abs_diff_eq!(q.get(1, 0).norm(), 1.0, epsilon = 1e-10);
        assert!(q.get(0, 0).norm() < 1e-10);

        // z1, j = 2, min: R2 ⊖ R = span{1}.
        let wmin = wold_difference(&corpus::z1(), 2, WoldFlavor::Min, &t).unwrap();
        assert_eq!(wmin.dim(), 1);
        let q = &wmin.column_polys(0)[0];
        assert_abs_diff_eq!(q.get(0, 0).norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn canonical_monomials() {
        let t = tols();
        // z1: (K1max, K1min, K2max, K2min, G) = (0, 0, 1, 1, 0).
        let k = canonical_kernels(&corpus::z1(), &t).unwrap();
        assert_abs_diff_eq!(k.k1_max.gram().norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(k.k1_min.gram().norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            k.k2_max.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k2_min.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(k.g.gram().norm(), 0.0, epsilon = 1e-10);
        assert!(k.residual_max_min < 1e-12 && k.residual_min_max < 1e-12);

        // z1 z2: (1, z1 conj w1, 1, z2 conj w2, 1).
        let k = canonical_kernels(&corpus::z1z2(), &t).unwrap();
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k1_min.gram_entry((1, 0, 0), (1, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k2_max.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k2_min.gram_entry((0, 1, 0), (0, 1, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.g.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        // off-diagonal entries all vanish
        assert_abs_diff_eq!(k.k1_max.gram().norm(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(k.k1_min.gram().norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn canonical_flagship_closed_form() {
        let t = tols();
        let k = canonical_kernels(&corpus::flagship(), &t).unwrap();
        assert!(
            k.residual_max_min <= 1e-10,
            "residual {}",
            k.residual_max_min
        );
        assert!(k.residual_min_max <= 1e-10);
        // G = 0 and max = min: the flagship has a unique Agler pair.
        assert_abs_diff_eq!(k.g.gram().norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            (k.k1_max.gram() - k.k1_min.gram()).norm(),
            0.0,
            epsilon = 1e-9
        );
        // K1 = 2 (1-z1)(1-conj w1)/(p(z) conj(p(w))): Gram entries
        // [[2, -2], [-2, 2]] on monomials {1, z1}.
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((0, 0, 0), (0, 0, 0)).re,
            2.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((1, 0, 0), (0, 0, 0)).re,
            -2.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((1, 0, 0), (1, 0, 0)).re,
            2.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            k.k2_max.gram_entry((0, 1, 0), (0, 1, 0)).re,
            2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn canonical_matrix_diag() {
        let t = tols();
        let k = canonical_kernels(&corpus::diag_z1_z2(), &t).unwrap();
        // K1 = diag(0, 1), K2 = diag(1, 0), G = 0.
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((0, 0, 1), (0, 0, 1)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k1_max.gram_entry((0, 0, 0), (0, 0, 0)).re,
            0.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            k.k2_min.gram_entry((0, 0, 0), (0, 0, 0)).re,
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(k.g.gram().norm(), 0.0, epsilon = 1e-10);
        assert!(k.residual_max_min < 1e-12);
    }

    #[test]
    fn orthogonality_and_dim_invariants() {
        // dim(R_j) = dim(R_j ⊖ R) + dim(R), and the min difference is
        // h2-orthogonal to R.
        let t = tols();
        for phi in [corpus::z1z2(), corpus::flagship()] {
            let builder_dims = span_dims(&phi);
            let wmin1 = wold_difference(&phi, 1, WoldFlavor::Min, &t).unwrap();
            assert_eq!(builder_dims.1, wmin1.dim() + builder_dims.0);
            let wmin2 = wold_difference(&phi, 2, WoldFlavor::Min, &t).unwrap();
            assert_eq!(builder_dims.2, wmin2.dim() + builder_dims.0);
        }
    }

    #[test]
    fn eq31_coherence_on_samples() {
        // K_j^max/(1-z_j conj w_j) = K_j^min/(1-z_j conj w_j) + G with the
        // same G for j = 1, 2, sampled.
        let t = tols();
        for phi in [corpus::z1(), corpus::z1z2(), corpus::flagship()] {
            let k = canonical_kernels(&phi, &t).unwrap();
            let mut sampler = crate::sample::DiskSampler::new(17);
            for _ in 0..100 {
                let z = sampler.point();
                let w = sampler.point();
                let one = C64::new(1.0, 0.0);
                for (j, kmax, kmin) in [(1usize, &k.k1_max, &k.k1_min), (2, &k.k2_max, &k.k2_min)] {
                    let s = if j == 1 {
                        one - z.0 * w.0.conj()
                    } else {
                        one - z.1 * w.1.conj()
                    };
                    let lhs = kmax.eval(z, w, &t).unwrap() / s;
                    let rhs = kmin.eval(z, w, &t).unwrap() / s + k.g.eval(z, w, &t).unwrap();
                    assert!((lhs - rhs).norm() < 1e-8);
                }
            }
        }
    }
}
