//! Finite-rank Hermitian kernel algebra: evaluation, positivity, the Agler
//! identity residual, the max/min characterization and the reproducing-kernel
//! calculus used by the verification suite.

use crate::bipoly::{eval_fn, BiPoly, RationalSchurFn};
use crate::error::CoreError;
use crate::linalg;
use crate::sample::DiskSampler;
use crate::{Tolerances, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Finite-rank operator-valued Hermitian kernel
/// `K(z, w) = M(z) Γ M(w)*` with `M(z) = (monomial row ⊗ I_r) / p(z)`.
///
/// The Gram matrix is indexed by (monomial, component): entry
/// `(i*(a2+1)+j)*r + s` corresponds to `z1^i z2^j e_s`.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    envelope: (usize, usize),
    denom: BiPoly,
    outdim: usize,
    gram: DMatrix<C64>,
    psd_floor: f64,
}

/// Number of monomials inside an envelope.
pub fn mono_count(env: (usize, usize)) -> usize {
    (env.0 + 1) * (env.1 + 1)
}

/// Index of the monomial `z1^i z2^j` in the envelope ordering.
pub fn midx(env: (usize, usize), i: usize, j: usize) -> usize {
    i * (env.1 + 1) + j
}

impl FiniteKernel {
    /// Build from a Gram matrix; the matrix is Hermitized and the smallest
    /// eigenvalue recorded as the PSD floor.
    pub fn from_gram(
        envelope: (usize, usize),
        denom: BiPoly,
        outdim: usize,
        gram: DMatrix<C64>,
    ) -> Result<Self, CoreError> {
        let n = mono_count(envelope) * outdim;
        if gram.nrows() != n || gram.ncols() != n {
            return Err(CoreError::InvalidInput(format!(
                "gram is {}x{}, envelope/outdim require {}x{}",
                gram.nrows(),
                gram.ncols(),
                n,
                n
            )));
        }
        let gram = (&gram + gram.adjoint()).scale(0.5);
        let psd_floor = linalg::min_eig(&gram);
        Ok(Self {
            envelope,
            denom,
            outdim,
            gram,
            psd_floor,
        })
    }

    /// Gram `Γ = Σ v v*` over coefficient columns of kernel-space basis
    /// functions; PSD by construction.
    pub fn from_columns(
        envelope: (usize, usize),
        denom: BiPoly,
        outdim: usize,
        cols: &DMatrix<C64>,
    ) -> Result<Self, CoreError> {
        let n = mono_count(envelope) * outdim;
        if cols.nrows() != n {
            return Err(CoreError::InvalidInput(format!(
                "column length {} does not match envelope/outdim {}",
                cols.nrows(),
                n
            )));
        }
        let gram = cols * cols.adjoint();
        Self::from_gram(envelope, denom, outdim, gram)
    }

    /// The zero kernel.
    pub fn zero(envelope: (usize, usize), denom: BiPoly, outdim: usize) -> Self {
        let n = mono_count(envelope) * outdim;
        Self {
            envelope,
            denom,
            outdim,
            gram: DMatrix::zeros(n, n),
            psd_floor: 0.0,
        }
    }

    pub fn envelope(&self) -> (usize, usize) {
        self.envelope
    }

    pub fn denom(&self) -> &BiPoly {
        &self.denom
    }

    pub fn outdim(&self) -> usize {
        self.outdim
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    /// Smallest eigenvalue recorded at construction.
    pub fn psd_floor(&self) -> f64 {
        self.psd_floor
    }

    /// Gram entry addressed by monomials and components.
    pub fn gram_entry(&self, a: (usize, usize, usize), b: (usize, usize, usize)) -> C64 {
        let r = self.outdim;
        let ia = midx(self.envelope, a.0, a.1) * r + a.2;
        let ib = midx(self.envelope, b.0, b.1) * r + b.2;
        self.gram[(ia, ib)]
    }

    /// `M(z) Γ M(w)*`.
    pub fn eval(
        &self,
        z: (C64, C64),
        w: (C64, C64),
        tols: &Tolerances,
    ) -> Result<DMatrix<C64>, CoreError> {
        let pz = self.denom.eval(z);
        let pw = self.denom.eval(w);
        if pz.norm() < tols.tol_pole || pw.norm() < tols.tol_pole {
            return Err(CoreError::PoleAtPoint {
                abs_p: pz.norm().min(pw.norm()),
                tol: tols.tol_pole,
            });
        }
        let mz = self.row_vector(z);
        let mw = self.row_vector(w);
        let r = self.outdim;
        let n = mono_count(self.envelope);
        let mut out = DMatrix::<C64>::zeros(r, r);
        for a in 0..n {
            for b in 0..n {
                let f = mz[a] * mw[b].conj();
                if f.norm() == 0.0 {
                    continue;
                }
                for s in 0..r {
                    for t in 0..r {
                        out[(s, t)] += f * self.gram[(a * r + s, b * r + t)];
                    }
                }
            }
        }
        out /= pz * pw.conj();
        Ok(out)
    }

    fn row_vector(&self, z: (C64, C64)) -> Vec<C64> {
        let (a1, a2) = self.envelope;
        let mut v = Vec::with_capacity(mono_count(self.envelope));
        let mut zi = C64::new(1.0, 0.0);
        for _ in 0..=a1 {
            let mut zj = C64::new(1.0, 0.0);
            for _ in 0..=a2 {
                v.push(zi * zj);
                zj *= z.1;
            }
            zi *= z.0;
        }
        v
    }

    /// Zero-pad the Gram into a larger envelope.
    pub fn embed(&self, envelope: (usize, usize)) -> Result<Self, CoreError> {
        if envelope.0 < self.envelope.0 || envelope.1 < self.envelope.1 {
            return Err(CoreError::IncompatibleBasis(format!(
                "cannot embed envelope {:?} into {:?}",
                self.envelope, envelope
            )));
        }
        if envelope == self.envelope {
            return Ok(self.clone());
        }
        let r = self.outdim;
        let n_new = mono_count(envelope) * r;
        let mut gram = DMatrix::<C64>::zeros(n_new, n_new);
        let (a1, a2) = self.envelope;
        for i1 in 0..=a1 {
            for j1 in 0..=a2 {
                for i2 in 0..=a1 {
                    for j2 in 0..=a2 {
                        for s in 0..r {
                            for t in 0..r {
                                let src = (
                                    midx(self.envelope, i1, j1) * r + s,
                                    midx(self.envelope, i2, j2) * r + t,
                                );
                                let dst = (
                                    midx(envelope, i1, j1) * r + s,
                                    midx(envelope, i2, j2) * r + t,
                                );
                                gram[dst] = self.gram[src];
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            envelope,
            denom: self.denom.clone(),
            outdim: r,
            gram,
            psd_floor: self.psd_floor,
        })
    }

    /// Difference of Grams after envelope matching; errors when the kernels
    /// live over different denominators or output dimensions.
    pub fn gram_difference(&self, other: &Self) -> Result<DMatrix<C64>, CoreError> {
        let (a, b) = compatible_pair(self, other)?;
        Ok(a.gram - b.gram)
    }

    /// Restriction to a smaller envelope: the compression of the Gram onto
    /// the surviving monomials (adjoint of [`FiniteKernel::embed`]).
    pub fn restrict(&self, envelope: (usize, usize)) -> Result<Self, CoreError> {
        if envelope.0 > self.envelope.0 || envelope.1 > self.envelope.1 {
            return Err(CoreError::IncompatibleBasis(format!(
                "cannot restrict envelope {:?} to {:?}",
                self.envelope, envelope
            )));
        }
        let r = self.outdim;
        let n_new = mono_count(envelope) * r;
        let mut gram = DMatrix::<C64>::zeros(n_new, n_new);
        for i1 in 0..=envelope.0 {
            for j1 in 0..=envelope.1 {
                for i2 in 0..=envelope.0 {
                    for j2 in 0..=envelope.1 {
                        for s in 0..r {
                            for t in 0..r {
                                gram[(
                                    midx(envelope, i1, j1) * r + s,
                                    midx(envelope, i2, j2) * r + t,
                                )] = self.gram[(
                                    midx(self.envelope, i1, j1) * r + s,
                                    midx(self.envelope, i2, j2) * r + t,
                                )];
                            }
                        }
                    }
                }
            }
        }
        Self::from_gram(envelope, self.denom.clone(), r, gram)
    }

    /// Orthonormal-basis coefficient columns recovered from the Gram by
    /// eigendecomposition: columns of `U sqrt(Λ)` over positive eigenvalues,
    /// in descending eigenvalue order with fixed phases.
    pub fn basis_columns(&self, rank_tol: f64) -> DMatrix<C64> {
        let (vals, vecs) = linalg::herm_eig(&self.gram);
        let vmax = vals.first().copied().unwrap_or(0.0).max(0.0);
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&i| vals[i] > rank_tol * vmax.max(1e-30))
            .collect();
        let mut cols = DMatrix::<C64>::zeros(self.gram.nrows(), keep.len());
        for (dst, &i) in keep.iter().enumerate() {
            let c = vecs.column(i) * C64::new(vals[i].sqrt(), 0.0);
            cols.set_column(dst, &c);
        }
        cols
    }
}

fn denom_eq(a: &BiPoly, b: &BiPoly) -> bool {
    if a.deg() != b.deg() {
        return false;
    }
    let scale = a.max_coeff().max(b.max_coeff()).max(1e-300);
    let (d1, d2) = a.deg();
    for i in 0..=d1 {
        for j in 0..=d2 {
            if (a.get(i, j) - b.get(i, j)).norm() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Embed both kernels into the componentwise max envelope.
pub fn compatible_pair(
    a: &FiniteKernel,
    b: &FiniteKernel,
) -> Result<(FiniteKernel, FiniteKernel), CoreError> {
    if a.outdim != b.outdim {
        return Err(CoreError::IncompatibleBasis(format!(
            "output dimensions differ: {} vs {}",
            a.outdim, b.outdim
        )));
    }
    if !denom_eq(&a.denom, &b.denom) {
        return Err(CoreError::IncompatibleBasis(
            "kernels have different denominators".into(),
        ));
    }
    let env = (
        a.envelope.0.max(b.envelope.0),
        a.envelope.1.max(b.envelope.1),
    );
    Ok((a.embed(env)?, b.embed(env)?))
}

/// Smallest eigenvalue of the Gram; PSD iff >= -tol.
pub fn psd_check(k: &FiniteKernel) -> f64 {
    linalg::min_eig(&k.gram)
}

/// Smallest eigenvalue of `Γ_K - Γ_K1` after envelope matching: by the
/// kernel-difference criterion, `H(K1) ⊆ H(K)` contractively iff this is
/// nonnegative.
pub fn kernel_difference_psd(k: &FiniteKernel, k1: &FiniteKernel) -> Result<f64, CoreError> {
    let diff = k.gram_difference(k1)?;
    Ok(linalg::min_eig(&diff))
}

/// Report of a seeded sup-norm residual scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub sup: f64,
    pub n_pairs: usize,
    pub seed: u64,
    /// Worst pair as [z1re, z1im, z2re, z2im, w1re, w1im, w2re, w2im].
    pub worst: [f64; 8],
}

/// Residual of the Agler identity
/// `I - Φ(z)Φ(w)* - (1-z1 conj(w1)) K2(z,w) - (1-z2 conj(w2)) K1(z,w)`
/// at one pair of points.
pub fn agler_residual_at(
    phi: &RationalSchurFn,
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    z: (C64, C64),
    w: (C64, C64),
    tols: &Tolerances,
) -> Result<f64, CoreError> {
    let (r, _) = phi.dims();
    let fz = eval_fn(phi, z, tols)?;
    let fw = eval_fn(phi, w, tols)?;
    let k1v = k1.eval(z, w, tols)?;
    let k2v = k2.eval(z, w, tols)?;
    let one = C64::new(1.0, 0.0);
    let s1 = one - z.0 * w.0.conj();
    let s2 = one - z.1 * w.1.conj();
    let mut res = DMatrix::<C64>::identity(r, r) - fz * fw.adjoint();
    res -= k2v.map(|x| x * s1);
    res -= k1v.map(|x| x * s2);
    Ok(linalg::opnorm(&res))
}

/// Sup of the Agler identity residual over `n_pairs` seeded pairs.
pub fn agler_residual(
    phi: &RationalSchurFn,
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    n_pairs: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<ResidualReport, CoreError> {
    let mut sampler = DiskSampler::new(seed);
    let mut sup = 0.0f64;
    let mut worst = [0.0f64; 8];
    for _ in 0..n_pairs {
        let (z, w) = (sampler.point(), sampler.point());
        let r = agler_residual_at(phi, k1, k2, z, w, tols)?;
        if r > sup {
            sup = r;
            worst = [
                z.0.re, z.0.im, z.1.re, z.1.im, w.0.re, w.0.im, w.1.re, w.1.im,
            ];
        }
    }
    Ok(ResidualReport {
        sup,
        n_pairs,
        seed,
        worst,
    })
}

/// Truncated division by the Szegő factor:
/// `K / (1 - z_j conj(w_j)) = Σ_{t<=cap} z_j^t conj(w_j)^t K`, with the
/// truncation bound `sup_r r^(2 cap) / (1-r^2) * ||K||` recorded.
pub fn divide_by_szego_factor(
    k: &FiniteKernel,
    j: usize,
    cap: usize,
) -> Result<(FiniteKernel, f64), CoreError> {
    assert!(j == 1 || j == 2, "coordinate index must be 1 or 2");
    let r = k.outdim;
    let env = k.envelope;
    let new_env = if j == 1 {
        (env.0 + cap, env.1)
    } else {
        (env.0, env.1 + cap)
    };
    let n_new = mono_count(new_env) * r;
    let mut gram = DMatrix::<C64>::zeros(n_new, n_new);
    for t in 0..=cap {
        let (di, dj) = if j == 1 { (t, 0) } else { (0, t) };
        for i1 in 0..=env.0 {
            for j1 in 0..=env.1 {
                for i2 in 0..=env.0 {
                    for j2 in 0..=env.1 {
                        for s in 0..r {
                            for u in 0..r {
                                let src = (midx(env, i1, j1) * r + s, midx(env, i2, j2) * r + u);
                                let v = k.gram[src];
                                if v.norm() == 0.0 {
                                    continue;
                                }
                                let dst = (
                                    midx(new_env, i1 + di, j1 + dj) * r + s,
                                    midx(new_env, i2 + di, j2 + dj) * r + u,
                                );
                                gram[dst] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    let knorm = linalg::opnorm(&k.gram);
    let bound = [0.3f64, 0.5, 0.7, 0.9]
        .iter()
        .map(|&rr| rr.powi(2 * cap as i32) / (1.0 - rr * rr) * knorm)
        .fold(0.0, f64::max);
    Ok((
        FiniteKernel::from_gram(new_env, k.denom.clone(), r, gram)?,
        bound,
    ))
}

/// Solve `K = (1 - z_j conj(w_j)) H` for `H` over the same envelope by the
/// ascending coefficient recursion; returns `(H, misfit)` where the misfit is
/// the max-abs reconstruction error including the overflow rows.
fn szego_quotient_gram(
    gram: &DMatrix<C64>,
    env: (usize, usize),
    r: usize,
    j: usize,
) -> (DMatrix<C64>, f64) {
    let (a1, a2) = env;
    let n = mono_count(env) * r;
    let mut h = DMatrix::<C64>::zeros(n, n);
    for i1 in 0..=a1 {
        for j1 in 0..=a2 {
            for i2 in 0..=a1 {
                for j2 in 0..=a2 {
                    for s in 0..r {
                        for t in 0..r {
                            let dst = (midx(env, i1, j1) * r + s, midx(env, i2, j2) * r + t);
                            let prev = if j == 1 {
                                (i1 > 0 && i2 > 0).then(|| {
                                    (midx(env, i1 - 1, j1) * r + s, midx(env, i2 - 1, j2) * r + t)
                                })
                            } else {
                                (j1 > 0 && j2 > 0).then(|| {
                                    (midx(env, i1, j1 - 1) * r + s, midx(env, i2, j2 - 1) * r + t)
                                })
                            };
                            h[dst] = gram[dst]
                                + prev.map(|p| h[p]).unwrap_or_else(|| C64::new(0.0, 0.0));
                        }
                    }
                }
            }
        }
    }
    // Reconstruction check over the enlarged envelope.
    let big = (a1 + 1, a2 + 1);
    let nb = mono_count(big) * r;
    let mut recon = DMatrix::<C64>::zeros(nb, nb);
    let (di, dj) = if j == 1 { (1, 0) } else { (0, 1) };
    for i1 in 0..=a1 {
        for j1 in 0..=a2 {
            for i2 in 0..=a1 {
                for j2 in 0..=a2 {
                    for s in 0..r {
                        for t in 0..r {
                            let v = h[(midx(env, i1, j1) * r + s, midx(env, i2, j2) * r + t)];
                            if v.norm() == 0.0 {
                                continue;
                            }
                            recon[(midx(big, i1, j1) * r + s, midx(big, i2, j2) * r + t)] += v;
                            recon[(
                                midx(big, i1 + di, j1 + dj) * r + s,
                                midx(big, i2 + di, j2 + dj) * r + t,
                            )] -= v;
                        }
                    }
                }
            }
        }
    }
    let mut misfit = 0.0f64;
    for i1 in 0..=big.0 {
        for j1 in 0..=big.1 {
            for i2 in 0..=big.0 {
                for j2 in 0..=big.1 {
                    for s in 0..r {
                        for t in 0..r {
                            let want = if i1 <= a1 && j1 <= a2 && i2 <= a1 && j2 <= a2 {
                                gram[(midx(env, i1, j1) * r + s, midx(env, i2, j2) * r + t)]
                            } else {
                                C64::new(0.0, 0.0)
                            };
                            let got = recon[(midx(big, i1, j1) * r + s, midx(big, i2, j2) * r + t)];
                            misfit = misfit.max((want - got).norm());
                        }
                    }
                }
            }
        }
    }
    (h, misfit)
}

/// Output of the max/min characterization: the positive kernels relating a
/// pair of Agler kernels to the canonical minimal ones.
#[derive(Debug, Clone)]
pub struct MaxMinReport {
    pub g1: FiniteKernel,
    pub g2: FiniteKernel,
    pub division_misfit: f64,
    pub g1_floor: f64,
    pub g2_floor: f64,
    /// Sup over seeded samples of `||G1 + G2 - G||`.
    pub gsum_residual: f64,
}

/// Characterize an Agler pair `(K1, K2)` against the canonical kernels:
/// solve `K_j = K_j^min + (1 - z_j conj(w_j)) G_j` for `G_j` on matched
/// coefficients and report the PSD floors and `||G1 + G2 - G||` on samples.
pub fn maxmin_characterize(
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    k1_min: &FiniteKernel,
    k2_min: &FiniteKernel,
    g: &FiniteKernel,
    seed: u64,
    tols: &Tolerances,
) -> Result<MaxMinReport, CoreError> {
    let (k1m, k1minm) = compatible_pair(k1, k1_min)?;
    let (k2m, k2minm) = compatible_pair(k2, k2_min)?;
    let d1 = k1m.gram() - k1minm.gram();
    let d2 = k2m.gram() - k2minm.gram();
    let (h1, mis1) = szego_quotient_gram(&d1, k1m.envelope(), k1m.outdim(), 1);
    let (h2, mis2) = szego_quotient_gram(&d2, k2m.envelope(), k2m.outdim(), 2);
    let misfit = mis1.max(mis2);
    if misfit > 100.0 * tols.tol_residual {
        return Err(CoreError::ResidualTooLarge {
            residual: misfit,
            tol: 100.0 * tols.tol_residual,
            context: "coefficient division by the Szegő factor".into(),
        });
    }
    let g1 = FiniteKernel::from_gram(k1m.envelope(), k1m.denom().clone(), k1m.outdim(), h1)?;
    let g2 = FiniteKernel::from_gram(k2m.envelope(), k2m.denom().clone(), k2m.outdim(), h2)?;
    let mut sampler = DiskSampler::new(seed);
    let mut sup = 0.0f64;
    for _ in 0..200 {
        let z = sampler.point();
        let w = sampler.point();
        let v = g1.eval(z, w, tols)? + g2.eval(z, w, tols)? - g.eval(z, w, tols)?;
        sup = sup.max(linalg::opnorm(&v));
    }
    Ok(MaxMinReport {
        g1_floor: psd_check(&g1),
        g2_floor: psd_check(&g2),
        g1,
        g2,
        division_misfit: misfit,
        gsum_residual: sup,
    })
}

/// Min eigenvalue over seeded sampled Grams of `(1 - ψ(z) conj(ψ(w))) K`:
/// nonnegative iff ψ is a contractive multiplier of `H(K)` (sampled check).
pub fn multiplier_check(
    psi: &RationalSchurFn,
    k: &FiniteKernel,
    n_sets: usize,
    set_size: usize,
    radius_cap: f64,
    seed: u64,
    tols: &Tolerances,
) -> Result<f64, CoreError> {
    let (r, c) = psi.dims();
    if r != 1 || c != 1 {
        return Err(CoreError::NotSquare(r, c));
    }
    let mut sampler = DiskSampler::with_cap(seed, radius_cap);
    let mut worst = f64::INFINITY;
    let rk = k.outdim();
    for _ in 0..n_sets {
        let pts = sampler.points(set_size);
        let mut vals = Vec::with_capacity(set_size);
        let mut ok = true;
        for &z in &pts {
            match eval_fn(psi, z, tols) {
                Ok(m) => vals.push(m[(0, 0)]),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut gram = DMatrix::<C64>::zeros(set_size * rk, set_size * rk);
        for (i, &zi) in pts.iter().enumerate() {
            for (j, &zj) in pts.iter().enumerate() {
                let f = C64::new(1.0, 0.0) - vals[i] * vals[j].conj();
                let kij = k.eval(zi, zj, tols)?;
                for s in 0..rk {
                    for t in 0..rk {
                        gram[(i * rk + s, j * rk + t)] = f * kij[(s, t)];
                    }
                }
            }
        }
        worst = worst.min(linalg::min_eig(&gram));
    }
    Ok(worst)
}

/// Squared norm of `f` in `H(K1 + K2)`:
/// `min { ||f1||^2 + ||f2||^2 : f = f1 + f2, f_j in H(K_j) }`,
/// computed as the least-norm solution of the factor equation.
pub fn kernel_sum_norm(
    f: &DVector<C64>,
    f_env: (usize, usize),
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    tols: &Tolerances,
) -> Result<f64, CoreError> {
    let (k1m, k2m) = compatible_pair(k1, k2)?;
    let env = (k1m.envelope().0.max(f_env.0), k1m.envelope().1.max(f_env.1));
    let k1m = k1m.embed(env)?;
    let k2m = k2m.embed(env)?;
    let r = k1m.outdim();
    let n = mono_count(env) * r;
    let mut fv = DVector::<C64>::zeros(n);
    for i in 0..=f_env.0 {
        for j in 0..=f_env.1 {
            for s in 0..r {
                fv[midx(env, i, j) * r + s] = f[midx(f_env, i, j) * r + s];
            }
        }
    }
    let f1 = k1m.basis_columns(tols.rank_tol);
    let f2 = k2m.basis_columns(tols.rank_tol);
    let mut stacked = DMatrix::<C64>::zeros(n, f1.ncols() + f2.ncols());
    stacked.columns_mut(0, f1.ncols()).copy_from(&f1);
    stacked.columns_mut(f1.ncols(), f2.ncols()).copy_from(&f2);
    let rhs = DMatrix::from_column_slice(n, 1, fv.as_slice());
    let c = linalg::pinv_solve(&stacked, &rhs, tols.rank_tol);
    let resid = (&stacked * &c - &rhs).norm();
    if resid > 1e-8 * fv.norm().max(1.0) {
        return Err(CoreError::NotInSpace { residual: resid });
    }
    Ok(c.norm_squared())
}

/// Kernel wire format: envelope, denominator, output dimension, Gram lower
/// triangle (row-major, `[re, im]` pairs) and the recorded PSD floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteKernelJson {
    pub envelope: [usize; 2],
    pub denominator: crate::bipoly::BiPolyJson,
    pub outdim: usize,
    pub gram_lower: Vec<[f64; 2]>,
    pub psd_floor: f64,
}

impl From<&FiniteKernel> for FiniteKernelJson {
    fn from(k: &FiniteKernel) -> Self {
        let n = k.gram.nrows();
        let mut gram_lower = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                let v = k.gram[(i, j)];
                gram_lower.push([v.re, v.im]);
            }
        }
        Self {
            envelope: [k.envelope.0, k.envelope.1],
            denominator: crate::bipoly::BiPolyJson::from(&k.denom),
            outdim: k.outdim,
            gram_lower,
            psd_floor: k.psd_floor,
        }
    }
}

impl TryFrom<&FiniteKernelJson> for FiniteKernel {
    type Error = CoreError;
    fn try_from(j: &FiniteKernelJson) -> Result<Self, CoreError> {
        let env = (j.envelope[0], j.envelope[1]);
        let n = mono_count(env) * j.outdim;
        if j.gram_lower.len() != n * (n + 1) / 2 {
            return Err(CoreError::InvalidInput(
                "gram lower triangle has wrong length".into(),
            ));
        }
        let mut gram = DMatrix::<C64>::zeros(n, n);
        let mut it = j.gram_lower.iter();
        for i in 0..n {
            for jj in 0..=i {
                let v = it.next().unwrap();
                gram[(i, jj)] = C64::new(v[0], v[1]);
                gram[(jj, i)] = C64::new(v[0], -v[1]);
            }
        }
        FiniteKernel::from_gram(env, BiPoly::try_from(&j.denominator)?, j.outdim, gram)
    }
}
