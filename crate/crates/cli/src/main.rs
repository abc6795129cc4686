//! Batch front end for the decomposition pipeline: load a function file,
//! run certificates, decompose into Agler kernels, realize, verify and
//! extend, emitting machine-readable reports.
//!
//! Exit codes: 0 ok, 2 mathematical failure, 3 input error, 4 method
//! inapplicable.

mod jsonio;
mod manifest;

use agler_core::bipoly::{self, RationalSchurFn, RationalSchurFnJson};
use agler_core::error::CoreError;
use agler_core::kernelcalc::{self, FiniteKernel, FiniteKernelJson};
use agler_core::realization::{self, Colligation, ColligationJson};
use agler_core::sample::DiskSampler;
use agler_core::{extension, modelspace, sdpsplit, Tolerances, DEFAULT_SEED};
use clap::{Args, Parser, Subcommand};
use manifest::RunManifest;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_MATH: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_METHOD: u8 = 4;

#[derive(Parser)]
#[command(
    name = "agler",
    version,
    about = "Agler kernel decompositions, realizations and verification for rational Schur functions on the bidisk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Seed for all samplers (env AGLER_SEED overrides the default).
    #[arg(long)]
    seed: Option<u64>,
    /// Residual tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory for report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certificate battery: stability, Schur bound, inner residual.
    Check {
        path: PathBuf,
        /// Boundary grid size per axis.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Decompose into Agler kernels (canonical model-space route for inner
    /// functions, semidefinite feasibility otherwise).
    Decompose {
        path: PathBuf,
        #[arg(long, value_parser = ["canonical", "sdp"])]
        method: String,
        /// Envelope override "a1,a2" for the sdp route.
        #[arg(long, value_parser = parse_envelope)]
        envelope: Option<(usize, usize)>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build the canonical coisometric colligation and verify it.
    Realize {
        path: PathBuf,
        /// Reuse kernel files (k2min.json, k1max.json) from a decompose run.
        #[arg(long)]
        kernels: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Verify a colligation file against a function file.
    Verify {
        colligation: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit a CSV grid of Agler identity residuals.
    Report {
        path: PathBuf,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate the function at an exterior point via the reflection formula.
    Extend {
        path: PathBuf,
        /// Point "re1,im1,re2,im2" with |z1| > 1 and |z2| > 1.
        #[arg(long, value_parser = parse_point)]
        point: Point,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Clone, Copy)]
struct Point(f64, f64, f64, f64);

fn parse_envelope(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected a1,a2".into());
    }
    let a1 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let a2 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a1, a2))
}

fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{e}"))?;
    if parts.len() != 4 {
        return Err("expected re1,im1,re2,im2".into());
    }
    Ok(Point(parts[0], parts[1], parts[2], parts[3]))
}

/// Failure category for exit-code mapping.
enum Failure {
    Input(String),
    Math(String),
    Method(String),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::EnvelopeTooSmall(..) => {
                Failure::Input(e.to_string())
            }
            CoreError::NotInner { .. } => Failure::Method(format!(
                "{e}; the canonical route needs an inner function — use --method sdp"
            )),
            CoreError::NotSquare(..) => Failure::Method(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { path, grid, common } => cmd_check(&path, grid, &common),
        Command::Decompose {
            path,
            method,
            envelope,
            common,
        } => cmd_decompose(&path, &method, envelope, &common),
        Command::Realize {
            path,
            kernels,
            common,
        } => cmd_realize(&path, kernels.as_deref(), &common),
        Command::Verify {
            colligation,
            phi,
            points,
            common,
        } => cmd_verify(&colligation, &phi, points, &common),
        Command::Report { path, grid, common } => cmd_report(&path, grid, &common),
        Command::Extend {
            path,
            point,
            common,
        } => cmd_extend(&path, point, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Math(msg)) => {
            eprintln!("mathematical failure: {msg}");
            ExitCode::from(EXIT_MATH)
        }
        Err(Failure::Method(msg)) => {
            eprintln!("method inapplicable: {msg}");
            ExitCode::from(EXIT_METHOD)
        }
    }
}

fn effective_seed(common: &CommonOpts) -> u64 {
    common.seed.unwrap_or_else(|| {
        std::env::var("AGLER_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(DEFAULT_SEED)
    })
}

fn effective_tols(common: &CommonOpts) -> Tolerances {
    let mut tols = Tolerances::default();
    if let Some(t) = common.tol {
        tols.tol_residual = t;
    }
    tols
}

fn load_phi(path: &Path) -> Result<(RationalSchurFn, String), Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let digest = manifest::digest(&bytes);
    let json: RationalSchurFnJson = serde_json::from_slice(&bytes).map_err(|e| {
        Failure::Input(format!(
            "malformed function file {} at line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let phi = RationalSchurFn::try_from(&json).map_err(Failure::from)?;
    Ok((phi, digest))
}

fn write_report<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
    jsonio::write_atomic(&dir.join(name), &jsonio::to_json_string(value))
        .map_err(|e| Failure::Input(e.to_string()))
}

fn write_timings(dir: &Path, command: &str, elapsed_ms: u128) {
    #[derive(Serialize)]
    struct Timing<'a> {
        command: &'a str,
        wall_clock_ms: u128,
    }
    // Timings are deliberately kept out of the numeric reports so that
    // reruns with identical manifests stay byte-identical.
    let _ = std::fs::create_dir_all(dir);
    let _ = jsonio::write_atomic(
        &dir.join("timings.json"),
        &jsonio::to_json_string(&Timing {
            command,
            wall_clock_ms: elapsed_ms,
        }),
    );
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CheckReport {
    manifest: RunManifest,
    certificates: bipoly::CertificateSet,
    pass: bool,
}

fn cmd_check(path: &Path, grid: usize, common: &CommonOpts) -> Result<(), Failure> {
    let t0 = std::time::Instant::now();
    let (phi, digest) = load_phi(path)?;
    let tols = effective_tols(common);
    let man = RunManifest::new("check", &digest, effective_seed(common), &tols);
    let certificates = bipoly::certify(&phi, grid, &tols).map_err(Failure::from)?;
    let pass = certificates.schur.schur
        && certificates
            .inner
            .as_ref()
            .map(|i| i.sup_residual.is_finite())
            .unwrap_or(true);
    let report = CheckReport {
        manifest: man,
        certificates,
        pass,
    };
    write_report(&common.out, "check.json", &report)?;
    println!("{}", jsonio::to_json_string(&report));
    write_timings(&common.out, "check", t0.elapsed().as_millis());
    if !pass {
        return Err(Failure::Math("Schur certificate failed".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DecomposeReport {
    manifest: RunManifest,
    method: String,
    envelope: [usize; 2],
    agler_residual: kernelcalc::ResidualReport,
    psd_floors: Vec<f64>,
    kernel_files: Vec<String>,
    retried: bool,
}

fn residual_csv(
    phi: &RationalSchurFn,
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    n_pairs: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<String, CoreError> {
    let mut sampler = DiskSampler::new(seed);
    let mut csv = String::from("z1re,z1im,z2re,z2im,w1re,w1im,w2re,w2im,residual\n");
    for _ in 0..n_pairs {
        let (z, w) = (sampler.point(), sampler.point());
        let r = kernelcalc::agler_residual_at(phi, k1, k2, z, w, tols)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            jsonio::f(z.0.re),
            jsonio::f(z.0.im),
            jsonio::f(z.1.re),
            jsonio::f(z.1.im),
            jsonio::f(w.0.re),
            jsonio::f(w.0.im),
            jsonio::f(w.1.re),
            jsonio::f(w.1.im),
            jsonio::f(r)
        ));
    }
    Ok(csv)
}

fn cmd_decompose(
    path: &Path,
    method: &str,
    envelope: Option<(usize, usize)>,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let t0 = std::time::Instant::now();
    let (phi, digest) = load_phi(path)?;
    let tols = effective_tols(common);
    let seed = effective_seed(common);
    let man = RunManifest::new(
        &format!("decompose --method {method}"),
        &digest,
        seed,
        &tols,
    );
    match method {
        "canonical" => {
            let kernels = modelspace::canonical_kernels(&phi, &tols).map_err(Failure::from)?;
            let files = [
                ("k1max.json", &kernels.k1_max),
                ("k1min.json", &kernels.k1_min),
                ("k2max.json", &kernels.k2_max),
                ("k2min.json", &kernels.k2_min),
                ("g.json", &kernels.g),
            ];
            for (name, k) in &files {
                write_report(&common.out, name, &FiniteKernelJson::from(*k))?;
            }
            let rep = kernelcalc::agler_residual(
                &phi,
                &kernels.k1_max,
                &kernels.k2_min,
                2000,
                seed,
                &tols,
            )
            .map_err(Failure::from)?;
            let csv = residual_csv(&phi, &kernels.k1_max, &kernels.k2_min, 500, seed, &tols)
                .map_err(Failure::from)?;
            jsonio::write_atomic(&common.out.join("residuals.csv"), &csv)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let report = DecomposeReport {
                manifest: man,
                method: method.into(),
                envelope: [kernels.envelope.0, kernels.envelope.1],
                agler_residual: rep,
                psd_floors: files.iter().map(|(_, k)| k.psd_floor()).collect(),
                kernel_files: files.iter().map(|(n, _)| n.to_string()).collect(),
                retried: kernels.envelope != phi.envelope(),
            };
            write_report(&common.out, "report.json", &report)?;
            println!("{}", jsonio::to_json_string(&report));
            write_timings(&common.out, "decompose", t0.elapsed().as_millis());
            Ok(())
        }
        "sdp" => {
            let opts = sdpsplit::DykstraOpts {
                tol: tols.tol_residual.min(1e-8),
                ..Default::default()
            };
            let out = sdpsplit::solve(&phi, envelope, &opts).map_err(Failure::from)?;
            match out.outcome {
                sdpsplit::DykstraOutcome::Feasible(sol) => {
                    write_report(&common.out, "k1.json", &FiniteKernelJson::from(&sol.k1))?;
                    write_report(&common.out, "k2.json", &FiniteKernelJson::from(&sol.k2))?;
                    let mut csv = String::from("iteration,affine_residual\n");
                    for (i, r) in sol.trace.iter().enumerate() {
                        csv.push_str(&format!("{},{}\n", i, jsonio::f(*r)));
                    }
                    jsonio::write_atomic(&common.out.join("trace.csv"), &csv)
                        .map_err(|e| Failure::Input(e.to_string()))?;
                    let rep = kernelcalc::agler_residual(&phi, &sol.k1, &sol.k2, 2000, seed, &tols)
                        .map_err(Failure::from)?;
                    let report = DecomposeReport {
                        manifest: man,
                        method: method.into(),
                        envelope: [out.envelope.0, out.envelope.1],
                        agler_residual: rep,
                        psd_floors: vec![sol.k1.psd_floor(), sol.k2.psd_floor()],
                        kernel_files: vec!["k1.json".into(), "k2.json".into()],
                        retried: out.retried,
                    };
                    write_report(&common.out, "report.json", &report)?;
                    println!("{}", jsonio::to_json_string(&report));
                    write_timings(&common.out, "decompose", t0.elapsed().as_millis());
                    Ok(())
                }
                sdpsplit::DykstraOutcome::InfeasibleAtEnvelope(rep) => Err(Failure::Math(format!(
                    "infeasible at envelope ({}, {}): affine residual {:.3e} after {} iterations",
                    rep.envelope.0, rep.envelope.1, rep.residual, rep.iterations
                ))),
            }
        }
        other => Err(Failure::Input(format!("unknown method {other}"))),
    }
}

// ---------------------------------------------------------------------------
// realize / verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RealizeReport {
    manifest: RunManifest,
    colligation_file: String,
    verify: realization::VerifyReport,
    kernels_reused: bool,
}

fn load_kernel(path: &Path) -> Result<FiniteKernel, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let json: FiniteKernelJson = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Input(format!("malformed kernel file {}: {e}", path.display())))?;
    FiniteKernel::try_from(&json).map_err(Failure::from)
}

fn cmd_realize(path: &Path, kernels: Option<&Path>, common: &CommonOpts) -> Result<(), Failure> {
    let t0 = std::time::Instant::now();
    let (phi, digest) = load_phi(path)?;
    let tols = effective_tols(common);
    let seed = effective_seed(common);
    let man = RunManifest::new("realize", &digest, seed, &tols);
    let col = match kernels {
        Some(dir) => {
            let k2 = load_kernel(&dir.join("k2min.json"))?;
            let k1 = load_kernel(&dir.join("k1max.json"))?;
            let rep = kernelcalc::agler_residual(&phi, &k1, &k2, 200, seed, &tols)
                .map_err(Failure::from)?;
            realization::colligation_from_kernels(&k2, &k1, &phi, rep.sup, &tols)
                .map_err(Failure::from)?
        }
        None => realization::canonical_colligation(&phi, &tols).map_err(Failure::from)?,
    };
    let verify =
        realization::verify_realization(&col, &phi, 500, seed, &tols).map_err(Failure::from)?;
    write_report(
        &common.out,
        "colligation.json",
        &ColligationJson::from(&col),
    )?;
    let report = RealizeReport {
        manifest: man,
        colligation_file: "colligation.json".into(),
        verify,
        kernels_reused: kernels.is_some(),
    };
    write_report(&common.out, "realize.json", &report)?;
    println!("{}", jsonio::to_json_string(&report));
    write_timings(&common.out, "realize", t0.elapsed().as_millis());
    Ok(())
}

#[derive(Serialize)]
struct VerifyCmdReport {
    manifest: RunManifest,
    verify: realization::VerifyReport,
    pass: bool,
}

fn cmd_verify(
    colligation: &Path,
    phi_path: &Path,
    points: usize,
    common: &CommonOpts,
) -> Result<(), Failure> {
    let (phi, digest) = load_phi(phi_path)?;
    let bytes = std::fs::read(colligation)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", colligation.display())))?;
    let json: ColligationJson = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Input(format!("malformed colligation file: {e}")))?;
    let col = Colligation::try_from(&json).map_err(Failure::from)?;
    let tols = effective_tols(common);
    let seed = effective_seed(common);
    let man = RunManifest::new("verify", &digest, seed, &tols);
    let verify =
        realization::verify_realization(&col, &phi, points, seed, &tols).map_err(Failure::from)?;
    let pass = verify.sup <= tols.tol_residual && verify.coisometry_defect <= tols.tol_residual;
    let report = VerifyCmdReport {
        manifest: man,
        verify,
        pass,
    };
    write_report(&common.out, "verify.json", &report)?;
    println!("{}", jsonio::to_json_string(&report));
    if !pass {
        return Err(Failure::Math(format!(
            "realization mismatch: sup {:.3e}, coisometry defect {:.3e}",
            report.verify.sup, report.verify.coisometry_defect
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(path: &Path, grid: usize, common: &CommonOpts) -> Result<(), Failure> {
    let t0 = std::time::Instant::now();
    let (phi, digest) = load_phi(path)?;
    let tols = effective_tols(common);
    let seed = effective_seed(common);
    let man = RunManifest::new("report", &digest, seed, &tols);
    // The kernels come from the canonical route when the function is inner,
    // otherwise from the feasibility route.
    let inner = bipoly::is_inner(&phi, 64, &tols)
        .map(|r| r.inner)
        .unwrap_or(false);
    let (k1, k2) = if inner {
        let k = modelspace::canonical_kernels(&phi, &tols).map_err(Failure::from)?;
        (k.k1_max, k.k2_min)
    } else {
        let out = sdpsplit::solve(&phi, None, &sdpsplit::DykstraOpts::default())
            .map_err(Failure::from)?;
        match out.outcome {
            sdpsplit::DykstraOutcome::Feasible(sol) => (sol.k1, sol.k2),
            sdpsplit::DykstraOutcome::InfeasibleAtEnvelope(rep) => {
                return Err(Failure::Math(format!(
                    "no kernel pair at envelope ({}, {}): residual {:.3e}",
                    rep.envelope.0, rep.envelope.1, rep.residual
                )))
            }
        }
    };
    let mut sampler = DiskSampler::new(seed);
    let w_samples: Vec<_> = (0..32).map(|_| sampler.point()).collect();
    let mut csv = String::from("z1re,z1im,z2re,z2im,sup_residual\n");
    let radius = 0.8;
    for a in 0..grid {
        for b in 0..grid {
            let t1 = 2.0 * std::f64::consts::PI * a as f64 / grid as f64;
            let t2 = 2.0 * std::f64::consts::PI * b as f64 / grid as f64;
            let z = (
                agler_core::C64::from_polar(radius, t1),
                agler_core::C64::from_polar(radius, t2),
            );
            let mut sup = 0.0f64;
            for &w in &w_samples {
                let r = kernelcalc::agler_residual_at(&phi, &k1, &k2, z, w, &tols)
                    .map_err(Failure::from)?;
                sup = sup.max(r);
            }
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                jsonio::f(z.0.re),
                jsonio::f(z.0.im),
                jsonio::f(z.1.re),
                jsonio::f(z.1.im),
                jsonio::f(sup)
            ));
        }
    }
    jsonio::write_atomic(&common.out.join("residual_grid.csv"), &csv)
        .map_err(|e| Failure::Input(e.to_string()))?;
    #[derive(Serialize)]
    struct ReportSummary {
        manifest: RunManifest,
        grid: usize,
        rows: usize,
        w_samples: usize,
    }
    let report = ReportSummary {
        manifest: man,
        grid,
        rows: grid * grid,
        w_samples: w_samples.len(),
    };
    write_report(&common.out, "report.json", &report)?;
    println!("{}", jsonio::to_json_string(&report));
    write_timings(&common.out, "report", t0.elapsed().as_millis());
    Ok(())
}

// ---------------------------------------------------------------------------
// extend
// ---------------------------------------------------------------------------

fn cmd_extend(path: &Path, point: Point, common: &CommonOpts) -> Result<(), Failure> {
    let (phi, digest) = load_phi(path)?;
    let tols = effective_tols(common);
    let man = RunManifest::new("extend", &digest, effective_seed(common), &tols);
    let z = (
        agler_core::C64::new(point.0, point.1),
        agler_core::C64::new(point.2, point.3),
    );
    let pt = extension::ExteriorPoint::new(&phi, z, &tols).map_err(Failure::from)?;
    let value = extension::exterior_eval_phi(&phi, z, &tols).map_err(Failure::from)?;
    #[derive(Serialize)]
    struct ExtendReport {
        manifest: RunManifest,
        point: [f64; 4],
        s_margin: f64,
        value: Vec<Vec<[f64; 2]>>,
    }
    let report = ExtendReport {
        manifest: man,
        point: [point.0, point.1, point.2, point.3],
        s_margin: pt.s_margin,
        value: (0..value.nrows())
            .map(|i| {
                (0..value.ncols())
                    .map(|j| [value[(i, j)].re, value[(i, j)].im])
                    .collect()
            })
            .collect(),
    };
    println!("{}", jsonio::to_json_string(&report));
    write_report(&common.out, "extend.json", &report)?;
    Ok(())
}
