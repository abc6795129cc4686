//! Semidefinite feasibility route to an Agler pair for a square rational
//! Schur function: match the coefficient identity cleared of denominators,
//! then alternate projections (Dykstra) between the affine coefficient set
//! and the product of PSD cones.

use crate::bipoly::{BiPoly, RationalSchurFn};
use crate::error::CoreError;
use crate::kernelcalc::{self, midx, mono_count, FiniteKernel, ResidualReport};
use crate::linalg;
use crate::{Tolerances, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Options for the alternating-projection solver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DykstraOpts {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DykstraOpts {
    fn default() -> Self {
        Self {
            max_iter: 20000,
            tol: 1e-8,
        }
    }
}

/// The coefficient-matched feasibility problem at a fixed envelope: find
/// Hermitian PSD `Γ1, Γ2` with
/// `p(z) conj(p(w)) I - P~(z) P~(w)* =
///  (1 - z1 conj(w1)) N Γ2 N* + (1 - z2 conj(w2)) N Γ1 N*`
/// where `N(z)` is the monomial row tensored with the identity.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub envelope: (usize, usize),
    pub outdim: usize,
    pub denom: BiPoly,
    /// Real linear map from the Hermitian-pair parameters to the stacked
    /// real/imaginary coefficient rows.
    lmat: DMatrix<f64>,
    /// Stacked coefficient target.
    tvec: DVector<f64>,
    /// Hermitian matrix side length of each unknown.
    k_side: usize,
}

/// Dimension of the real parameter vector of one K x K Hermitian matrix.
fn herm_dim(k: usize) -> usize {
    k * k
}

/// Real isometric parametrization: diagonal first, then sqrt(2)-scaled real
/// and imaginary parts of the upper triangle.
fn herm_to_vec(m: &DMatrix<C64>, out: &mut [f64]) {
    let k = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut idx = 0;
    for i in 0..k {
        out[idx] = m[(i, i)].re;
        idx += 1;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            out[idx] = s * m[(i, j)].re;
            out[idx + 1] = s * m[(i, j)].im;
            idx += 2;
        }
    }
}

fn vec_to_herm(v: &[f64], k: usize) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::<C64>::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        m[(i, i)] = C64::new(v[idx], 0.0);
        idx += 1;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let re = s * v[idx];
            let im = s * v[idx + 1];
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
            idx += 2;
        }
    }
    m
}

/// Coefficient tensor of `(1 - z_j conj(w_j)) N Γ N*` flattened over the row
/// window, stacked Re then Im per complex row.
fn splitting_coefficients(
    gamma: &DMatrix<C64>,
    env: (usize, usize),
    r: usize,
    j: usize,
    row_env: (usize, usize),
    out: &mut [f64],
) {
    out.fill(0.0);
    let nrow_mono = mono_count(row_env);
    let row_of = |a: usize, b: usize, s: usize, t: usize| ((a * nrow_mono + b) * r + s) * r + t;
    let (di, dj) = if j == 1 { (1, 0) } else { (0, 1) };
    for i1 in 0..=env.0 {
        for j1 in 0..=env.1 {
            for i2 in 0..=env.0 {
                for j2 in 0..=env.1 {
                    for s in 0..r {
                        for t in 0..r {
                            let v = gamma[(midx(env, i1, j1) * r + s, midx(env, i2, j2) * r + t)];
                            if v.norm() == 0.0 {
                                continue;
                            }
                            // +Γ at (alpha, beta)
                            let a = midx(row_env, i1, j1);
                            let b = midx(row_env, i2, j2);
                            let base = 2 * row_of(a, b, s, t);
                            out[base] += v.re;
                            out[base + 1] += v.im;
                            // -Γ shifted by e_j in both monomials
                            let a2 = midx(row_env, i1 + di, j1 + dj);
                            let b2 = midx(row_env, i2 + di, j2 + dj);
                            let base = 2 * row_of(a2, b2, s, t);
                            out[base] -= v.re;
                            out[base + 1] -= v.im;
                        }
                    }
                }
            }
        }
    }
}

impl FeasibilityProblem {
    /// Number of real unknowns.
    pub fn n_unknowns(&self) -> usize {
        2 * herm_dim(self.k_side)
    }

    /// Number of real coefficient rows.
    pub fn n_rows(&self) -> usize {
        self.tvec.len()
    }

    /// Affine residual `||L x - t||` of a Hermitian pair.
    pub fn affine_residual(&self, g1: &DMatrix<C64>, g2: &DMatrix<C64>) -> f64 {
        let mut x = DVector::<f64>::zeros(self.n_unknowns());
        herm_to_vec(g1, &mut x.as_mut_slice()[..herm_dim(self.k_side)]);
        herm_to_vec(g2, &mut x.as_mut_slice()[herm_dim(self.k_side)..]);
        (&self.lmat * x - &self.tvec).norm()
    }

    /// Add a perturbation to the constant coefficient row of the target
    /// (diagonal entries only), producing an infeasible toy problem.
    pub fn perturb_constant(&mut self, delta: f64) {
        let r = self.outdim;
        for s in 0..r {
            let row = s * r + s; // constant-coefficient row (alpha = beta = 0)
            self.tvec[2 * row] += delta;
        }
    }

    /// Evaluate both sides of the constraint identity at seeded point pairs
    /// for a given Hermitian pair; returns the max mismatch between the
    /// coefficient route and direct evaluation. Zero (to tolerance) whenever
    /// the coefficient equations hold.
    pub fn self_consistency(
        &self,
        phi: &RationalSchurFn,
        g1: &DMatrix<C64>,
        g2: &DMatrix<C64>,
        seed: u64,
        tols: &Tolerances,
    ) -> Result<f64, CoreError> {
        let k1 =
            FiniteKernel::from_gram(self.envelope, self.denom.clone(), self.outdim, g1.clone())?;
        let k2 =
            FiniteKernel::from_gram(self.envelope, self.denom.clone(), self.outdim, g2.clone())?;
        let affine = self.affine_residual(g1, g2);
        let mut sampler = crate::sample::DiskSampler::new(seed);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let z = sampler.point();
            let w = sampler.point();
            let res = kernelcalc::agler_residual_at(phi, &k1, &k2, z, w, tols)?;
            // Whenever the coefficient equations hold the pointwise identity
            // must hold as well; the mismatch is bounded by the affine
            // residual times the monomial mass.
            worst = worst.max((res - affine * 10.0).max(0.0));
        }
        Ok(worst)
    }
}

/// Assemble the coefficient-matched problem for a square rational Schur
/// function. The unknown kernels live over `envelope` (default: the
/// componentwise max of the denominator and numerator degrees).
pub fn build_problem(
    phi: &RationalSchurFn,
    envelope: Option<(usize, usize)>,
) -> Result<FeasibilityProblem, CoreError> {
    let (r, c) = phi.dims();
    if r != c {
        return Err(CoreError::NotSquare(r, c));
    }
    let env = envelope.unwrap_or_else(|| phi.envelope());
    let p = phi.denominator().clone();
    let row_env = (env.0 + 1, env.1 + 1);
    let nrow_mono = mono_count(row_env);
    let n_complex_rows = nrow_mono * nrow_mono * r * r;
    let k_side = mono_count(env) * r;
    let n_unknowns = 2 * herm_dim(k_side);

    // Target tensor: p(z) conj(p(w)) I - P~(z) P~(w)*.
    let mut tvec = DVector::<f64>::zeros(2 * n_complex_rows);
    let row_of = |a: usize, b: usize, s: usize, t: usize| ((a * nrow_mono + b) * r + s) * r + t;
    let (dp1, dp2) = p.deg();
    for i1 in 0..=dp1 {
        for j1 in 0..=dp2 {
            for i2 in 0..=dp1 {
                for j2 in 0..=dp2 {
                    let v = p.get(i1, j1) * p.get(i2, j2).conj();
                    if v.norm() == 0.0 {
                        continue;
                    }
                    for s in 0..r {
                        let row = row_of(midx(row_env, i1, j1), midx(row_env, i2, j2), s, s);
                        tvec[2 * row] += v.re;
                        tvec[2 * row + 1] += v.im;
                    }
                }
            }
        }
    }
    // - Σ_u P~_{s u}(z) conj(P~_{t u}(w)).
    for s in 0..r {
        for t in 0..r {
            for u in 0..r {
                let ps = phi.entry(s, u);
                let pt = phi.entry(t, u);
                let (a1, a2) = ps.deg();
                let (b1, b2) = pt.deg();
                for i1 in 0..=a1 {
                    for j1 in 0..=a2 {
                        let x = ps.get(i1, j1);
                        if x.norm() == 0.0 {
                            continue;
                        }
                        for i2 in 0..=b1 {
                            for j2 in 0..=b2 {
                                let y = pt.get(i2, j2);
                                if y.norm() == 0.0 {
                                    continue;
                                }
                                if i1 > row_env.0
                                    || j1 > row_env.1
                                    || i2 > row_env.0
                                    || j2 > row_env.1
                                {
                                    return Err(CoreError::InvalidInput(
                                        "numerator degree exceeds the coefficient window; \
                                         enlarge the envelope"
                                            .into(),
                                    ));
                                }
                                let v = x * y.conj();
                                let row =
                                    row_of(midx(row_env, i1, j1), midx(row_env, i2, j2), s, t);
                                tvec[2 * row] -= v.re;
                                tvec[2 * row + 1] -= v.im;
                            }
                        }
                    }
                }
            }
        }
    }

    // Columns of L: push each Hermitian basis element through the splitting.
    let mut lmat = DMatrix::<f64>::zeros(2 * n_complex_rows, n_unknowns);
    let mut colbuf = vec![0.0f64; 2 * n_complex_rows];
    let hd = herm_dim(k_side);
    for which in 0..2 {
        // Γ1 pairs with (1 - z2 conj w2), Γ2 with (1 - z1 conj w1).
        let j = if which == 0 { 2 } else { 1 };
        for param in 0..hd {
            let mut basis_vec = vec![0.0f64; hd];
            basis_vec[param] = 1.0;
            let h = vec_to_herm(&basis_vec, k_side);
            splitting_coefficients(&h, env, r, j, row_env, &mut colbuf);
            let col = which * hd + param;
            for (rowi, &v) in colbuf.iter().enumerate() {
                if v != 0.0 {
                    lmat[(rowi, col)] = v;
                }
            }
        }
    }

    Ok(FeasibilityProblem {
        envelope: env,
        outdim: r,
        denom: p,
        lmat,
        tvec,
        k_side,
    })
}

/// A feasible point returned by the solver.
#[derive(Clone)]
pub struct SdpSolution {
    pub k1: FiniteKernel,
    pub k2: FiniteKernel,
    pub affine_residual: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

impl std::fmt::Debug for SdpSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdpSolution")
            .field("affine_residual", &self.affine_residual)
            .field("iterations", &self.iterations)
            .finish_non_exhaustive()
    }
}

/// Infeasibility report: the residual plateaued above tolerance.
#[derive(Clone)]
pub struct InfeasibleReport {
    pub envelope: (usize, usize),
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

impl std::fmt::Debug for InfeasibleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InfeasibleReport")
            .field("envelope", &self.envelope)
            .field("residual", &self.residual)
            .field("iterations", &self.iterations)
            .finish_non_exhaustive()
    }
}

/// Outcome of the alternating-projection solve at one envelope.
#[derive(Debug)]
pub enum DykstraOutcome {
    Feasible(SdpSolution),
    InfeasibleAtEnvelope(InfeasibleReport),
}

/// Dykstra alternating projections between the affine coefficient set
/// (least-squares projection through a precomputed pseudo-inverse) and the
/// PSD x PSD cone (eigenvalue clipping). Returns a feasible pair when the
/// affine residual of the cone iterate drops below `tol`; reports
/// infeasibility when the residual plateaus; errors with the residual trace
/// when the iteration budget runs out while still moving.
pub fn dykstra_solve(
    problem: &FeasibilityProblem,
    opts: &DykstraOpts,
) -> Result<DykstraOutcome, CoreError> {
    let n = problem.n_unknowns();
    let hd = herm_dim(problem.k_side);
    let k = problem.k_side;

    // Precompute the affine projection through the SVD of L.
    let svd = problem.lmat.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-12 * smax.max(1.0);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let project_affine = |x: &DVector<f64>| -> DVector<f64> {
        let resid = &problem.lmat * x - &problem.tvec;
        let mut core = u.transpose() * &resid;
        for i in 0..core.len() {
            let s = svd.singular_values[i];
            core[i] = if s > cut { core[i] / s } else { 0.0 };
        }
        x - v_t.transpose() * core
    };
    let project_cone = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(n);
        for which in 0..2 {
            let slice = &x.as_slice()[which * hd..(which + 1) * hd];
            let m = vec_to_herm(slice, k);
            let (vals, vecs) = linalg::herm_eig(&m);
            let mut clipped = DMatrix::<C64>::zeros(k, k);
            for (i, &lam) in vals.iter().enumerate() {
                if lam > 0.0 {
                    let vcol = vecs.column(i);
                    clipped += (vcol * vcol.adjoint()).map(|e| e * C64::new(lam, 0.0));
                }
            }
            herm_to_vec(
                &clipped,
                &mut out.as_mut_slice()[which * hd..(which + 1) * hd],
            );
        }
        out
    };

    let mut x = DVector::<f64>::zeros(n);
    let mut p_corr = DVector::<f64>::zeros(n);
    let mut q_corr = DVector::<f64>::zeros(n);
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let a = project_affine(&(&x + &p_corr));
        p_corr = &x + &p_corr - &a;
        let y = project_cone(&(&a + &q_corr));
        q_corr = &a + &q_corr - &y;
        x = y;
        let resid = (&problem.lmat * &x - &problem.tvec).norm();
        trace.push(resid);
        best = best.min(resid);
        if resid <= opts.tol {
            let g1 = vec_to_herm(&x.as_slice()[..hd], k);
            let g2 = vec_to_herm(&x.as_slice()[hd..], k);
            let k1 = FiniteKernel::from_gram(
                problem.envelope,
                problem.denom.clone(),
                problem.outdim,
                g1,
            )?;
            let k2 = FiniteKernel::from_gram(
                problem.envelope,
                problem.denom.clone(),
                problem.outdim,
                g2,
            )?;
            return Ok(DykstraOutcome::Feasible(SdpSolution {
                k1,
                k2,
                affine_residual: resid,
                iterations: iter + 1,
                trace,
            }));
        }
        // Plateau detection: the residual has (nearly) stopped moving well
        // above tolerance. Infeasible problems approach their positive gap
        // like gap + C/k, so a relative-rate test is used alongside the
        // absolute-spread one.
        if iter >= 500 && iter % 100 == 0 {
            let w = &trace[iter - 400..=iter];
            let spread = w.iter().cloned().fold(0.0f64, f64::max)
                - w.iter().cloned().fold(f64::INFINITY, f64::min);
            let flat = spread < 1e-10 * (1.0 + best);
            let slow = iter >= 2000 && {
                let prev = trace[iter - 2000];
                let cur = trace[iter];
                (prev - cur) < 0.01 * cur
            };
            if (flat || slow) && best > 100.0 * opts.tol {
                let residual = *trace.last().unwrap();
                return Ok(DykstraOutcome::InfeasibleAtEnvelope(InfeasibleReport {
                    envelope: problem.envelope,
                    residual,
                    iterations: iter + 1,
                    trace,
                }));
            }
        }
    }
    let residual = *trace.last().unwrap();
    if residual > 10.0 * opts.tol && trace_plateaued(&trace) {
        return Ok(DykstraOutcome::InfeasibleAtEnvelope(InfeasibleReport {
            envelope: problem.envelope,
            residual,
            iterations: opts.max_iter,
            trace,
        }));
    }
    Err(CoreError::MaxIterExceeded {
        max_iter: opts.max_iter,
        residual,
        trace,
    })
}

fn trace_plateaued(trace: &[f64]) -> bool {
    if trace.len() < 200 {
        return false;
    }
    let tail = &trace[trace.len() - 100..];
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(0.0f64, f64::max);
    hi - lo < 1e-6 * (1.0 + lo)
}

/// Result of the full solve with the automatic envelope retry.
#[derive(Debug)]
pub struct SplitOutcome {
    pub outcome: DykstraOutcome,
    pub envelope: (usize, usize),
    pub retried: bool,
}

/// Build and solve at the default envelope, retrying once at
/// `(a1+1, a2+1)` before reporting infeasibility.
pub fn solve(
    phi: &RationalSchurFn,
    envelope: Option<(usize, usize)>,
    opts: &DykstraOpts,
) -> Result<SplitOutcome, CoreError> {
    let env = envelope.unwrap_or_else(|| phi.envelope());
    let problem = build_problem(phi, Some(env))?;
    match dykstra_solve(&problem, opts)? {
        DykstraOutcome::Feasible(sol) => Ok(SplitOutcome {
            outcome: DykstraOutcome::Feasible(sol),
            envelope: env,
            retried: false,
        }),
        DykstraOutcome::InfeasibleAtEnvelope(_) => {
            let env2 = (env.0 + 1, env.1 + 1);
            let problem = build_problem(phi, Some(env2))?;
            let outcome = dykstra_solve(&problem, opts)?;
            Ok(SplitOutcome {
                outcome,
                envelope: env2,
                retried: true,
            })
        }
    }
}

/// Certificate bundling the PSD floors, the cross-module Agler residual on
/// seeded samples, and the envelope used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitCertificate {
    pub envelope: [usize; 2],
    pub k1_floor: f64,
    pub k2_floor: f64,
    pub agler: ResidualReport,
}

/// Certify a produced pair against the original function.
pub fn certify(
    phi: &RationalSchurFn,
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    seed: u64,
    tols: &Tolerances,
) -> Result<SplitCertificate, CoreError> {
    let agler = kernelcalc::agler_residual(phi, k1, k2, 500, seed, tols)?;
    Ok(SplitCertificate {
        envelope: [k1.envelope().0, k1.envelope().1],
        k1_floor: kernelcalc::psd_check(k1),
        k2_floor: kernelcalc::psd_check(k2),
        agler,
    })
}
