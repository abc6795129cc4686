//! Canonical coisometric transfer-function realization: the sampled isometry
//! on kernel coordinates, the colligation blocks, the structured Gleason
//! block operators and transfer-function evaluation.

use crate::bipoly::{eval_fn, RationalSchurFn};
use crate::error::CoreError;
use crate::kernelcalc::{midx, FiniteKernel};
use crate::linalg;
use crate::modelspace::canonical_kernels;
use crate::sample::DiskSampler;
use crate::{Tolerances, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Colligation `U = [[A, B], [C, D]] : M ⊕ E -> M ⊕ E*` with state space
/// `M = M1 ⊕ M2`; the first block (dimension `m2`, the space H(K2^min))
/// pairs with `z1`, the second (`m1`, the space H(K1^max)) with `z2`.
#[derive(Debug, Clone)]
pub struct Colligation {
    pub m2: usize,
    pub m1: usize,
    pub e: usize,
    pub estar: usize,
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub c: DMatrix<C64>,
    pub d: DMatrix<C64>,
    /// Operator norm of U.
    pub contraction_norm: f64,
    /// Frobenius norm of `U U* - I`.
    pub coisometry_defect: f64,
}

impl Colligation {
    pub fn state_dim(&self) -> usize {
        self.m2 + self.m1
    }

    /// Assemble the block matrix U.
    pub fn as_matrix(&self) -> DMatrix<C64> {
        let m = self.state_dim();
        let mut u = DMatrix::<C64>::zeros(m + self.estar, m + self.e);
        u.view_mut((0, 0), (m, m)).copy_from(&self.a);
        u.view_mut((0, m), (m, self.e)).copy_from(&self.b);
        u.view_mut((m, 0), (self.estar, m)).copy_from(&self.c);
        u.view_mut((m, m), (self.estar, self.e)).copy_from(&self.d);
        u
    }

    fn from_matrix(u: &DMatrix<C64>, m2: usize, m1: usize, e: usize, estar: usize) -> Self {
        let m = m2 + m1;
        let a = u.view((0, 0), (m, m)).into_owned();
        let b = u.view((0, m), (m, e)).into_owned();
        let c = u.view((m, 0), (estar, m)).into_owned();
        let d = u.view((m, m), (estar, e)).into_owned();
        let contraction_norm = linalg::opnorm(u);
        let coisometry_defect =
            (u * u.adjoint() - DMatrix::<C64>::identity(m + estar, m + estar)).norm();
        Self {
            m2,
            m1,
            e,
            estar,
            a,
            b,
            c,
            d,
            contraction_norm,
            coisometry_defect,
        }
    }
}

/// The sampled isometry `V` of the kernel-coordinate construction.
#[derive(Debug, Clone)]
pub struct IsometryRep {
    /// Orthonormal columns spanning the sampled domain D_V.
    pub domain_basis: DMatrix<C64>,
    /// Matrix of V on the full coordinate space (least-squares extension).
    pub matrix: DMatrix<C64>,
    /// Isometry defect `||(V Q)* (V Q) - I||` on the sampled domain.
    pub defect: f64,
}

/// Orthonormal kernel-space basis functions of a finite kernel, as
/// coefficient columns plus evaluation data.
struct KernelBasis {
    env: (usize, usize),
    outdim: usize,
    denom: crate::bipoly::BiPoly,
    cols: DMatrix<C64>,
}

impl KernelBasis {
    fn new(k: &FiniteKernel, rank_tol: f64) -> Self {
        Self {
            env: k.envelope(),
            outdim: k.outdim(),
            denom: k.denom().clone(),
            cols: k.basis_columns(rank_tol),
        }
    }

    fn dim(&self) -> usize {
        self.cols.ncols()
    }

    /// Values of all basis functions at a point: `estar x dim` matrix.
    fn eval_all(&self, z: (C64, C64), tols: &Tolerances) -> Result<DMatrix<C64>, CoreError> {
        let pz = self.denom.eval(z);
        if pz.norm() < tols.tol_pole {
            return Err(CoreError::PoleAtPoint {
                abs_p: pz.norm(),
                tol: tols.tol_pole,
            });
        }
        let r = self.outdim;
        let mut out = DMatrix::<C64>::zeros(r, self.dim());
        let (a1, a2) = self.env;
        for kcol in 0..self.dim() {
            for s in 0..r {
                let mut acc = C64::new(0.0, 0.0);
                let mut zi = C64::new(1.0, 0.0);
                for i in 0..=a1 {
                    let mut zj = C64::new(1.0, 0.0);
                    for j in 0..=a2 {
                        acc += self.cols[(midx(self.env, i, j) * r + s, kcol)] * zi * zj;
                        zj *= z.1;
                    }
                    zi *= z.0;
                }
                out[(s, kcol)] = acc / pz;
            }
        }
        Ok(out)
    }

    /// Coordinates of the kernel section `K_w ν` in this basis:
    /// entry `i` is `φ_i(w)* ν`.
    fn kernel_coords(
        &self,
        w: (C64, C64),
        nu: &DVector<C64>,
        tols: &Tolerances,
    ) -> Result<DVector<C64>, CoreError> {
        let vals = self.eval_all(w, tols)?;
        Ok(vals.adjoint() * nu)
    }
}

/// Deterministic sample schedule for the isometry domain: the origin plus
/// axis and diagonal points at three radii, extended adaptively.
fn sample_schedule(round: usize) -> Vec<(C64, C64)> {
    let zero = C64::new(0.0, 0.0);
    let mut pts = vec![(zero, zero)];
    let rot = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
    for &r in &[0.3f64, 0.6, 0.9] {
        pts.push((C64::new(r, 0.0), zero));
        pts.push((zero, C64::new(r, 0.0)));
        pts.push((C64::new(r, 0.0), C64::new(r, 0.0) * rot));
    }
    if round > 0 {
        let mut sampler = DiskSampler::new(0xD0_0D + round as u64);
        for _ in 0..(4 * round) {
            pts.push(sampler.point());
        }
    }
    pts
}

/// Build the sampled isometry
/// `V: [conj(w1) K2_w ν; conj(w2) K1_w ν; ν] -> [K2_w ν; K1_w ν; Φ(w)* ν]`
/// on the span of the sampled domain vectors, in orthonormal kernel-space
/// coordinates. Errors with [`CoreError::IsometryDefect`] when the defect
/// exceeds ten times the supplied Agler-residual bound.
pub fn build_v(
    k2: &FiniteKernel,
    k1: &FiniteKernel,
    phi: &RationalSchurFn,
    samples: &[(C64, C64)],
    residual_bound: f64,
    tols: &Tolerances,
) -> Result<IsometryRep, CoreError> {
    let basis2 = KernelBasis::new(k2, tols.rank_tol);
    let basis1 = KernelBasis::new(k1, tols.rank_tol);
    let (estar, e) = phi.dims();
    let m2 = basis2.dim();
    let m1 = basis1.dim();
    let dom_dim = m2 + m1 + estar;
    let ran_dim = m2 + m1 + e;
    let ncols = samples.len() * estar;
    let mut dmat = DMatrix::<C64>::zeros(dom_dim, ncols);
    let mut rmat = DMatrix::<C64>::zeros(ran_dim, ncols);
    let mut col = 0;
    for &w in samples {
        let phi_w = eval_fn(phi, w, tols)?;
        for s in 0..estar {
            let mut nu = DVector::<C64>::zeros(estar);
            nu[s] = C64::new(1.0, 0.0);
            let c2 = basis2.kernel_coords(w, &nu, tols)?;
            let c1 = basis1.kernel_coords(w, &nu, tols)?;
            for i in 0..m2 {
                dmat[(i, col)] = w.0.conj() * c2[i];
                rmat[(i, col)] = c2[i];
            }
            for i in 0..m1 {
                dmat[(m2 + i, col)] = w.1.conj() * c1[i];
                rmat[(m2 + i, col)] = c1[i];
            }
            let phist_nu = phi_w.adjoint() * &nu;
            for i in 0..estar {
                dmat[(m2 + m1 + i, col)] = nu[i];
            }
            for i in 0..e {
                rmat[(m2 + m1 + i, col)] = phist_nu[i];
            }
            col += 1;
        }
    }
    // V as least-squares extension: V D = R.
    let v = linalg::pinv_solve(&dmat.adjoint(), &rmat.adjoint(), tols.rank_tol).adjoint();
    // Orthonormal domain basis and isometry defect on it.
    let svd = dmat.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.expect("svd u");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tols.rank_tol * smax.max(1.0))
        .count();
    let q = u.columns(0, rank).into_owned();
    let vq = &v * &q;
    let defect = linalg::opnorm(&(vq.adjoint() * &vq - DMatrix::<C64>::identity(rank, rank)));
    let bound = 10.0 * residual_bound.max(tols.tol_residual);
    if defect > bound {
        return Err(CoreError::IsometryDefect { defect, bound });
    }
    Ok(IsometryRep {
        domain_basis: q,
        matrix: v,
        defect,
    })
}

/// Canonical coisometric colligation of a rational inner function, built
/// from the pair `(K1^max, K2^min)`: samples are added until the isometry
/// domain fills the whole space, then `U = V*`.
pub fn canonical_colligation(
    phi: &RationalSchurFn,
    tols: &Tolerances,
) -> Result<Colligation, CoreError> {
    let kernels = canonical_kernels(phi, tols)?;
    colligation_from_kernels(
        &kernels.k2_min,
        &kernels.k1_max,
        phi,
        kernels.residual_max_min,
        tols,
    )
}

/// Colligation from an explicit kernel pair: `K2` feeds the first state
/// block, `K1` the second.
pub fn colligation_from_kernels(
    k2: &FiniteKernel,
    k1: &FiniteKernel,
    phi: &RationalSchurFn,
    residual_bound: f64,
    tols: &Tolerances,
) -> Result<Colligation, CoreError> {
    let (estar, e) = phi.dims();
    let m2 = KernelBasis::new(k2, tols.rank_tol).dim();
    let m1 = KernelBasis::new(k1, tols.rank_tol).dim();
    let full = m2 + m1 + estar;
    let mut rep = None;
    let mut last_rank = 0;
    for round in 0..12 {
        let samples = sample_schedule(round);
        let r = build_v(k2, k1, phi, &samples, residual_bound, tols)?;
        let rank = r.domain_basis.ncols();
        if rank == full {
            rep = Some(r);
            break;
        }
        // Rank stalled across two consecutive rounds: report, never pad.
        if round > 0 && rank == last_rank {
            return Err(CoreError::RankDeficientDomain {
                rank,
                expected: full,
            });
        }
        last_rank = rank;
    }
    let rep = rep.ok_or(CoreError::RankDeficientDomain {
        rank: last_rank,
        expected: full,
    })?;
    let u = rep.matrix.adjoint();
    Ok(Colligation::from_matrix(&u, m2, m1, e, estar))
}

/// Evaluate the transfer function `Φ(z) = D + C (I - E_z A)^{-1} E_z B` by a
/// direct linear solve.
pub fn transfer_eval(col: &Colligation, z: (C64, C64)) -> Result<DMatrix<C64>, CoreError> {
    let m = col.state_dim();
    if m == 0 {
        return Ok(col.d.clone());
    }
    let mut ez = DMatrix::<C64>::zeros(m, m);
    for i in 0..col.m2 {
        ez[(i, i)] = z.0;
    }
    for i in col.m2..m {
        ez[(i, i)] = z.1;
    }
    let lhs = DMatrix::<C64>::identity(m, m) - &ez * &col.a;
    let rhs = &ez * &col.b;
    let x = lhs.lu().solve(&rhs).ok_or(CoreError::SingularResolvent)?;
    Ok(&col.d + &col.c * x)
}

/// Verification report comparing the realization against direct evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub sup: f64,
    pub n_points: usize,
    pub seed: u64,
    pub contraction_norm: f64,
    pub coisometry_defect: f64,
}

/// Sup over seeded interior points of `||transfer_eval - Φ||` plus the
/// colligation certificates.
pub fn verify_realization(
    col: &Colligation,
    phi: &RationalSchurFn,
    n_points: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<VerifyReport, CoreError> {
    let mut sampler = DiskSampler::new(seed);
    let mut sup = 0.0f64;
    for _ in 0..n_points {
        let z = sampler.point();
        let direct = eval_fn(phi, z, tols)?;
        let via = transfer_eval(col, z)?;
        sup = sup.max(linalg::opnorm(&(direct - via)));
    }
    Ok(VerifyReport {
        sup,
        n_points,
        seed,
        contraction_norm: col.contraction_norm,
        coisometry_defect: col.coisometry_defect,
    })
}

/// Gleason block operators with their certification residuals.
#[derive(Debug, Clone)]
pub struct GleasonBlocks {
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub c: DMatrix<C64>,
    pub d: DMatrix<C64>,
    /// Sup residual of the state Gleason identity over seeded points.
    pub eq_state_residual: f64,
    /// Sup residual of the input Gleason identity over seeded points.
    pub eq_input_residual: f64,
}

/// Compute the canonical block operators by slice interpolation:
/// `C: f -> f1(0) + f2(0)`, `D: η -> Φ(0) η`; the second components of `Af`
/// and `Bη` are the unique elements of `H(K1^max)` matching difference
/// quotients on the slice `{(0, w2)}`, and the first components follow by
/// dividing the structured Gleason identity by `w1`.
pub fn gleason_blocks(
    k2_min: &FiniteKernel,
    k1_max: &FiniteKernel,
    phi: &RationalSchurFn,
    tols: &Tolerances,
) -> Result<GleasonBlocks, CoreError> {
    let basis2 = KernelBasis::new(k2_min, tols.rank_tol);
    let basis1 = KernelBasis::new(k1_max, tols.rank_tol);
    let (estar, e) = phi.dims();
    let m2 = basis2.dim();
    let m1 = basis1.dim();
    let m = m2 + m1;
    let zero = C64::new(0.0, 0.0);
    let origin = (zero, zero);
    let phi0 = eval_fn(phi, origin, tols)?;

    // D and C are direct evaluations.
    let d = phi0.clone();
    let mut c = DMatrix::<C64>::zeros(estar, m);
    if m2 > 0 {
        c.columns_mut(0, m2)
            .copy_from(&basis2.eval_all(origin, tols)?);
    }
    if m1 > 0 {
        c.columns_mut(m2, m1)
            .copy_from(&basis1.eval_all(origin, tols)?);
    }

    // Slice samples (0, w2) for the second components.
    let n_slice = (m1 + 2).max(3);
    let slice: Vec<C64> = (0..n_slice)
        .map(|t| {
            C64::from_polar(
                0.35 + 0.5 * (t as f64 / n_slice as f64),
                1.1 * t as f64 + 0.4,
            )
        })
        .collect();
    // Fit matrix: rows are slice evaluations of the H(K1^max) basis.
    let mut fit = DMatrix::<C64>::zeros(n_slice * estar, m1);
    for (ti, &w2) in slice.iter().enumerate() {
        let vals = basis1.eval_all((zero, w2), tols)?;
        fit.view_mut((ti * estar, 0), (estar, m1)).copy_from(&vals);
    }
    if m1 > 0 && linalg::rank(&fit, tols.rank_tol) < m1 {
        return Err(CoreError::UniquenessSliceDegenerate {
            rank: linalg::rank(&fit, tols.rank_tol),
            expected: m1,
        });
    }

    // Generic interior samples for the first components.
    let mut sampler = DiskSampler::new(0xA11CE);
    let n_pts = (m2 + 3).max(4);
    let mut pts = Vec::with_capacity(n_pts);
    while pts.len() < n_pts {
        let w = sampler.point();
        if w.0.norm() > 0.15 {
            pts.push(w);
        }
    }
    let mut fit1 = DMatrix::<C64>::zeros(n_pts * estar, m2);
    for (ti, &w) in pts.iter().enumerate() {
        let vals = basis2.eval_all(w, tols)?;
        fit1.view_mut((ti * estar, 0), (estar, m2)).copy_from(&vals);
    }
    if m2 > 0 && linalg::rank(&fit1, tols.rank_tol) < m2 {
        return Err(CoreError::UniquenessSliceDegenerate {
            rank: linalg::rank(&fit1, tols.rank_tol),
            expected: m2,
        });
    }

    // Column builder: given the slice difference quotient and the full
    // difference target, produce the state vector [first; second].
    let solve_columns =
        |targets_slice: &DMatrix<C64>,
         targets_full: &dyn Fn(usize, (C64, C64)) -> Result<DVector<C64>, CoreError>,
         ncols: usize|
         -> Result<DMatrix<C64>, CoreError> {
            let mut out = DMatrix::<C64>::zeros(m, ncols);
            // Second components from the slice fit.
            let second = linalg::pinv_solve(&fit, targets_slice, tols.rank_tol);
            for cix in 0..ncols {
                out.view_mut((m2, cix), (m1, 1))
                    .copy_from(&second.column(cix));
            }
            // First components: divide the remaining identity by w1 on generic
            // points and fit in H(K2^min).
            let mut rhs = DMatrix::<C64>::zeros(n_pts * estar, ncols);
            for (ti, &w) in pts.iter().enumerate() {
                let vals1 = basis1.eval_all(w, tols)?;
                for cix in 0..ncols {
                    let full = targets_full(cix, w)?;
                    let sec = vals1.clone() * second.column(cix);
                    let v = (full - sec * w.1) / w.0;
                    rhs.view_mut((ti * estar, cix), (estar, 1)).copy_from(&v);
                }
            }
            let first = linalg::pinv_solve(&fit1, &rhs, tols.rank_tol);
            for cix in 0..ncols {
                out.view_mut((0, cix), (m2, 1))
                    .copy_from(&first.column(cix));
            }
            Ok(out)
        };

    // A: one column per state basis vector.
    let mut slice_a = DMatrix::<C64>::zeros(n_slice * estar, m);
    for (ti, &w2) in slice.iter().enumerate() {
        let v2 = basis2.eval_all((zero, w2), tols)?;
        let v1 = basis1.eval_all((zero, w2), tols)?;
        for i in 0..m {
            let fv = if i < m2 {
                v2.column(i).into_owned()
            } else {
                v1.column(i - m2).into_owned()
            };
            let f0 = c.column(i).into_owned();
            let t = (fv - f0) / w2;
            slice_a.view_mut((ti * estar, i), (estar, 1)).copy_from(&t);
        }
    }
    let basis2c = &basis2;
    let basis1c = &basis1;
    let cc = c.clone();
    let full_a = move |i: usize, w: (C64, C64)| -> Result<DVector<C64>, CoreError> {
        let fv = if i < m2 {
            basis2c.eval_all(w, tols)?.column(i).into_owned()
        } else {
            basis1c.eval_all(w, tols)?.column(i - m2).into_owned()
        };
        Ok(fv - cc.column(i).into_owned())
    };
    let a = solve_columns(&slice_a, &full_a, m)?;

    // B: one column per input basis vector.
    let mut slice_b = DMatrix::<C64>::zeros(n_slice * estar, e);
    for (ti, &w2) in slice.iter().enumerate() {
        let phiw = eval_fn(phi, (zero, w2), tols)?;
        let diff = (phiw - phi0.clone()) / w2;
        slice_b
            .view_mut((ti * estar, 0), (estar, e))
            .copy_from(&diff);
    }
    let phi0c = phi0.clone();
    let full_b = move |eta: usize, w: (C64, C64)| -> Result<DVector<C64>, CoreError> {
        let phiw = eval_fn(phi, w, tols)?;
        Ok((phiw - phi0c.clone()).column(eta).into_owned())
    };
    let b = solve_columns(&slice_b, &full_b, e)?;

    // Certify both structured Gleason identities on seeded points.
    // Fixed certification seed so the residuals are reproducible.
    let mut sampler = DiskSampler::new(0x61EA50);
    let mut eq_state = 0.0f64;
    let mut eq_input = 0.0f64;
    for _ in 0..200 {
        let w = sampler.point();
        let v2 = basis2.eval_all(w, tols)?;
        let v1 = basis1.eval_all(w, tols)?;
        for i in 0..m {
            let af = a.column(i);
            let af1 = v2.clone() * af.rows(0, m2).into_owned();
            let af2 = v1.clone() * af.rows(m2, m1).into_owned();
            let fv = if i < m2 {
                v2.column(i).into_owned()
            } else {
                v1.column(i - m2).into_owned()
            };
            let lhs = af1 * w.0 + af2 * w.1;
            let rhs = fv - c.column(i).into_owned();
            eq_state = eq_state.max((lhs - rhs).norm());
        }
        let phiw = eval_fn(phi, w, tols)?;
        for eta in 0..e {
            let be = b.column(eta);
            let be1 = v2.clone() * be.rows(0, m2).into_owned();
            let be2 = v1.clone() * be.rows(m2, m1).into_owned();
            let lhs = be1 * w.0 + be2 * w.1;
            let rhs = (phiw.clone() - phi0.clone()).column(eta).into_owned();
            eq_input = eq_input.max((lhs - rhs).norm());
        }
    }

    Ok(GleasonBlocks {
        a,
        b,
        c,
        d,
        eq_state_residual: eq_state,
        eq_input_residual: eq_input,
    })
}

/// Colligation wire format: dims, partition and dense complex blocks
/// (row-major `[re, im]` pairs) plus the certified floors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColligationJson {
    pub m2: usize,
    pub m1: usize,
    pub e: usize,
    pub estar: usize,
    pub a: Vec<Vec<[f64; 2]>>,
    pub b: Vec<Vec<[f64; 2]>>,
    pub c: Vec<Vec<[f64; 2]>>,
    pub d: Vec<Vec<[f64; 2]>>,
    pub contraction_norm: f64,
    pub coisometry_defect: f64,
}

fn mat_to_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn rows_to_mat(
    rows: &[Vec<[f64; 2]>],
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<C64>, CoreError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(CoreError::InvalidInput("block dimensions mismatch".into()));
    }
    let mut m = DMatrix::<C64>::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = C64::new(v[0], v[1]);
        }
    }
    Ok(m)
}

impl From<&Colligation> for ColligationJson {
    fn from(c: &Colligation) -> Self {
        Self {
            m2: c.m2,
            m1: c.m1,
            e: c.e,
            estar: c.estar,
            a: mat_to_rows(&c.a),
            b: mat_to_rows(&c.b),
            c: mat_to_rows(&c.c),
            d: mat_to_rows(&c.d),
            contraction_norm: c.contraction_norm,
            coisometry_defect: c.coisometry_defect,
        }
    }
}

impl TryFrom<&ColligationJson> for Colligation {
    type Error = CoreError;
    fn try_from(j: &ColligationJson) -> Result<Self, CoreError> {
        let m = j.m2 + j.m1;
        Ok(Self {
            m2: j.m2,
            m1: j.m1,
            e: j.e,
            estar: j.estar,
            a: rows_to_mat(&j.a, m, m)?,
            b: rows_to_mat(&j.b, m, j.e)?,
            c: rows_to_mat(&j.c, j.estar, m)?,
            d: rows_to_mat(&j.d, j.estar, j.e)?,
            contraction_norm: j.contraction_norm,
            coisometry_defect: j.coisometry_defect,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn z1_exact_colligation() {
        let tols = Tolerances::default();
        let col = canonical_colligation(&corpus::z1(), &tols).unwrap();
        assert_eq!((col.m2, col.m1), (1, 0));
        // U = [[0, 1], [1, 0]] up to unitary equivalence; with the fixed
        // basis phases it is exact.
        assert_abs_diff_eq!(col.a[(0, 0)].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(col.b[(0, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(col.c[(0, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(col.d[(0, 0)].norm(), 0.0, epsilon = 1e-12);
        assert!(col.coisometry_defect < 1e-12);
        let rep = verify_realization(&col, &corpus::z1(), 200, 5, &tols).unwrap();
        assert!(rep.sup < 1e-12, "sup {}", rep.sup);
    }

    #[test]
    fn z1z2_state_dim_two() {
        let tols = Tolerances::default();
        let col = canonical_colligation(&corpus::z1z2(), &tols).unwrap();
        assert_eq!(col.state_dim(), 2);
        assert!(
            col.coisometry_defect < 1e-10,
            "defect {}",
            col.coisometry_defect
        );
        let rep = verify_realization(&col, &corpus::z1z2(), 500, 5, &tols).unwrap();
        assert!(rep.sup < 1e-10, "sup {}", rep.sup);
    }

    #[test]
    fn flagship_colligation() {
        let tols = Tolerances::default();
        let phi = corpus::flagship();
        let col = canonical_colligation(&phi, &tols).unwrap();
        assert_eq!(col.state_dim(), 2);
        assert!(
            col.coisometry_defect <= 1e-8,
            "defect {}",
            col.coisometry_defect
        );
        assert!(col.contraction_norm <= 1.0 + 1e-9);
        let rep = verify_realization(&col, &phi, 500, 5, &tols).unwrap();
        assert!(rep.sup <= 1e-8, "sup {}", rep.sup);
    }

    #[test]
    fn matrix_diag_colligation() {
        let tols = Tolerances::default();
        let phi = corpus::diag_z1_z2();
        let col = canonical_colligation(&phi, &tols).unwrap();
        assert_eq!(col.state_dim(), 2);
        assert!(col.coisometry_defect < 1e-10);
        let rep = verify_realization(&col, &phi, 300, 5, &tols).unwrap();
        assert!(rep.sup < 1e-10, "sup {}", rep.sup);
    }

    #[test]
    fn transfer_eval_collapsed_forms() {
        // A = 0, B = 1, C = 1, D = 0, all-M1 partition: transfer is z1.
        let col = Colligation {
            m2: 1,
            m1: 0,
            e: 1,
            estar: 1,
            a: DMatrix::zeros(1, 1),
            b: DMatrix::from_element(1, 1, c(1.0, 0.0)),
            c: DMatrix::from_element(1, 1, c(1.0, 0.0)),
            d: DMatrix::zeros(1, 1),
            contraction_norm: 1.0,
            coisometry_defect: 0.0,
        };
        let v = transfer_eval(&col, (c(0.37, 0.11), c(-0.5, 0.2))).unwrap();
        assert_abs_diff_eq!((v[(0, 0)] - c(0.37, 0.11)).norm(), 0.0, epsilon = 1e-15);

        // Constant colligation: transfer is D.
        let col = Colligation {
            m2: 0,
            m1: 0,
            e: 1,
            estar: 1,
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, c(0.25, -0.5)),
            contraction_norm: 0.559,
            coisometry_defect: 0.0,
        };
        let v = transfer_eval(&col, (c(0.9, 0.0), c(0.9, 0.0))).unwrap();
        assert_abs_diff_eq!((v[(0, 0)] - c(0.25, -0.5)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn corrupted_d_detected() {
        let tols = Tolerances::default();
        let phi = corpus::z1z2();
        let mut col = canonical_colligation(&phi, &tols).unwrap();
        col.d[(0, 0)] += c(0.1, 0.0);
        let rep = verify_realization(&col, &phi, 200, 5, &tols).unwrap();
        assert!(rep.sup >= 0.09, "sup {}", rep.sup);
    }

    #[test]
    fn gleason_blocks_examples() {
        let tols = Tolerances::default();
        let phi = corpus::z1z2();
        let k = crate::modelspace::canonical_kernels(&phi, &tols).unwrap();
        let g = gleason_blocks(&k.k2_min, &k.k1_max, &phi, &tols).unwrap();
        // D = Phi(0) = 0.
        assert_abs_diff_eq!(g.d[(0, 0)].norm(), 0.0, epsilon = 1e-14);
        // C on the H(K1^max) = span{1} block evaluates at 0: modulus 1.
        assert_abs_diff_eq!(g.c.column(1).norm(), 1.0, epsilon = 1e-10);
        // H(K2^min) = span{z2} vanishes at 0.
        assert_abs_diff_eq!(g.c.column(0).norm(), 0.0, epsilon = 1e-10);
        assert!(g.eq_state_residual < 1e-9, "state {}", g.eq_state_residual);
        assert!(g.eq_input_residual < 1e-9, "input {}", g.eq_input_residual);
    }

    #[test]
    fn gleason_matches_colligation() {
        let tols = Tolerances::default();
        for phi in [corpus::z1(), corpus::z1z2(), corpus::flagship()] {
            let k = crate::modelspace::canonical_kernels(&phi, &tols).unwrap();
            let col = canonical_colligation(&phi, &tols).unwrap();
            let g = gleason_blocks(&k.k2_min, &k.k1_max, &phi, &tols).unwrap();
            assert!((&g.a - &col.a).norm() < 1e-8, "A blocks differ");
            assert!((&g.b - &col.b).norm() < 1e-8, "B blocks differ");
            assert!((&g.c - &col.c).norm() < 1e-8, "C blocks differ");
            assert!((&g.d - &col.d).norm() < 1e-8, "D blocks differ");
        }
    }

    #[test]
    fn colligation_json_round_trip() {
        let tols = Tolerances::default();
        let col = canonical_colligation(&corpus::z1z2(), &tols).unwrap();
        let j = ColligationJson::from(&col);
        let s = serde_json::to_string(&j).unwrap();
        let back: ColligationJson = serde_json::from_str(&s).unwrap();
        let col2 = Colligation::try_from(&back).unwrap();
        assert!((col.as_matrix() - col2.as_matrix()).norm() < 1e-15);
    }
}
