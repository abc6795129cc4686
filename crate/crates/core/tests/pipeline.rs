//! Cross-module integration: feasibility output characterized against the
//! canonical kernels, isometry defects bounded by identity residuals, and
//! coefficient-table agreement across truncation orders.

use agler_core::kernelcalc::{agler_residual, maxmin_characterize, psd_check};
use agler_core::modelspace::{canonical_kernels, SubspaceJson};
use agler_core::realization::build_v;
use agler_core::torus;
use agler_core::{corpus, sdpsplit, Tolerances, DEFAULT_SEED};

fn tols() -> Tolerances {
    Tolerances::default()
}

#[test]
fn sdp_pair_cross_validates_against_canonical() {
    // The feasibility route for z1 z2 lands somewhere on the segment between
    // the two canonical pairs; the characterization recovers PSD G1, G2 with
    // G1 + G2 = G.
    let t = tols();
    let phi = corpus::z1z2();
    let sol = match sdpsplit::solve(&phi, None, &sdpsplit::DykstraOpts::default())
        .unwrap()
        .outcome
    {
        sdpsplit::DykstraOutcome::Feasible(sol) => sol,
        other => panic!("z1z2 must be feasible, got {other:?}"),
    };
    let k = canonical_kernels(&phi, &t).unwrap();
    let rep = maxmin_characterize(
        &sol.k1,
        &sol.k2,
        &k.k1_min,
        &k.k2_min,
        &k.g,
        DEFAULT_SEED,
        &t,
    )
    .unwrap();
    assert!(rep.g1_floor >= -1e-7, "G1 floor {}", rep.g1_floor);
    assert!(rep.g2_floor >= -1e-7, "G2 floor {}", rep.g2_floor);
    assert!(
        rep.gsum_residual <= 1e-6,
        "G sum residual {}",
        rep.gsum_residual
    );

    // Canonical pairs characterize trivially: (K1max, K2min) -> (G, 0).
    let rep = maxmin_characterize(
        &k.k1_max,
        &k.k2_min,
        &k.k1_min,
        &k.k2_min,
        &k.g,
        DEFAULT_SEED,
        &t,
    )
    .unwrap();
    assert!((rep.g1.gram() - k.g.gram()).norm() < 1e-9);
    assert!(rep.g2.gram().norm() < 1e-9);
    let rep = maxmin_characterize(
        &k.k1_min,
        &k.k2_max,
        &k.k1_min,
        &k.k2_min,
        &k.g,
        DEFAULT_SEED,
        &t,
    )
    .unwrap();
    assert!(rep.g1.gram().norm() < 1e-9);
    assert!((rep.g2.gram() - k.g.gram()).norm() < 1e-9);
    assert!(psd_check(&rep.g2) >= -1e-10);
}

#[test]
fn isometry_defect_bounded_by_residual() {
    // For any pair passing the Agler residual at level eps, the sampled
    // isometry has defect at most 10 eps on its domain.
    let t = tols();
    for phi in [corpus::z1(), corpus::z1z2(), corpus::flagship()] {
        let k = canonical_kernels(&phi, &t).unwrap();
        let eps = agler_residual(&phi, &k.k1_max, &k.k2_min, 500, DEFAULT_SEED, &t)
            .unwrap()
            .sup;
        let samples: Vec<_> = {
            let mut s = agler_core::sample::DiskSampler::new(3);
            let mut v = vec![(
                agler_core::C64::new(0.0, 0.0),
                agler_core::C64::new(0.0, 0.0),
            )];
            v.extend((0..8).map(|_| s.point()));
            v
        };
        let rep = build_v(&k.k2_min, &k.k1_max, &phi, &samples, eps, &t).unwrap();
        assert!(
            rep.defect <= 10.0 * eps.max(t.tol_residual),
            "defect {} vs eps {}",
            rep.defect,
            eps
        );
    }
}

#[test]
fn taylor_orders_agree_within_tail() {
    // taylor_coeffs at N and 2N agree on the shared window within the
    // reported tail bound.
    let one = agler_core::BiPoly::constant(agler_core::C64::new(1.0, 0.0));
    for p in [
        corpus::flagship_denominator(),
        agler_core::BiPoly::from_grid(vec![
            vec![agler_core::C64::new(1.0, 0.0)],
            vec![agler_core::C64::new(-0.5, 0.0)],
        ])
        .unwrap(),
    ] {
        let t_n = torus::taylor_coeffs(&one, &p, 32).unwrap();
        let t_2n = torus::taylor_coeffs(&one, &p, 64).unwrap();
        let mut dev = 0.0f64;
        for (k, l, v) in t_n.iter() {
            dev = dev.max((v - t_2n.get(k, l)).norm());
        }
        assert!(
            dev <= t_n.tail_bound.max(1e-12),
            "order disagreement {dev} exceeds tail {:.3e}",
            t_n.tail_bound
        );
    }
}

#[test]
fn h2_inner_doubling_converges_for_interior_zero() {
    let one = agler_core::BiPoly::constant(agler_core::C64::new(1.0, 0.0));
    let p = agler_core::BiPoly::from_grid(vec![
        vec![agler_core::C64::new(1.0, 0.0)],
        vec![agler_core::C64::new(-0.5, 0.0)],
    ])
    .unwrap();
    let r = torus::h2_inner(&one, &one, &p, 128).unwrap();
    assert!(r.converged);
    assert!((r.value.re - 4.0 / 3.0).abs() < 1e-12);

    // Boundary-zero denominator: the cap is reached and the residual is
    // reported, not hidden.
    let r = torus::h2_inner(&one, &one, &corpus::flagship_denominator(), 128).unwrap();
    assert_eq!(r.order_used, 512);
    assert!(!r.converged);
    assert!(r.tail_bound.is_infinite() || r.tail_bound > 1e-3);
}

#[test]
fn mixed_matrix_inner_with_boundary_zero() {
    // diag(flagship, z1 z2) over 2 - z1 - z2 drives the general
    // (vector-valued, non-constant denominator) constraint path. Canonical
    // kernels must agree with the block-diagonal combination of the
    // component kernels, and the realization must verify.
    let t = tols();
    let phi = corpus::mixed_diag();
    let k = canonical_kernels(&phi, &t).unwrap();
    assert!(k.residual_max_min <= 1e-8, "residual {}", k.residual_max_min);
    assert!(k.residual_min_max <= 1e-8, "residual {}", k.residual_min_max);

    let kf = canonical_kernels(&corpus::flagship(), &t).unwrap();
    let km = canonical_kernels(&corpus::z1z2(), &t).unwrap();
    let mut sampler = agler_core::sample::DiskSampler::new(41);
    for _ in 0..50 {
        let z = sampler.point();
        let w = sampler.point();
        for (mixed, part_f, part_m) in [
            (&k.k1_max, &kf.k1_max, &km.k1_max),
            (&k.k1_min, &kf.k1_min, &km.k1_min),
            (&k.k2_max, &kf.k2_max, &km.k2_max),
            (&k.k2_min, &kf.k2_min, &km.k2_min),
            (&k.g, &kf.g, &km.g),
        ] {
            let got = mixed.eval(z, w, &t).unwrap();
            let f = part_f.eval(z, w, &t).unwrap()[(0, 0)];
            let m = part_m.eval(z, w, &t).unwrap()[(0, 0)];
            assert!((got[(0, 0)] - f).norm() < 1e-8, "block (0,0) mismatch");
            assert!((got[(1, 1)] - m).norm() < 1e-8, "block (1,1) mismatch");
            assert!(got[(0, 1)].norm() < 1e-8 && got[(1, 0)].norm() < 1e-8);
        }
    }

    let col = agler_core::realization::canonical_colligation(&phi, &t).unwrap();
    assert_eq!(col.state_dim(), 4);
    assert!(col.coisometry_defect <= 1e-8, "defect {}", col.coisometry_defect);
    let rep = agler_core::realization::verify_realization(&col, &phi, 300, DEFAULT_SEED, &t).unwrap();
    assert!(rep.sup <= 1e-8, "transfer mismatch {}", rep.sup);
}

#[test]
fn subspace_json_reports_model_data() {
    let t = tols();
    let phi = corpus::flagship();
    let space = agler_core::modelspace::wold_difference(
        &phi,
        1,
        agler_core::modelspace::WoldFlavor::Max,
        &t,
    )
    .unwrap();
    let j = SubspaceJson::from(&space);
    assert_eq!(j.dim, 1);
    assert_eq!(j.envelope, [1, 1]);
    assert!(j.gram_tol < 1e-9);
    let s = serde_json::to_string(&j).unwrap();
    assert!(s.contains("\"denominator\""));
}
