//! Small standard corpus of rational Schur functions used by the test and
//! benchmark suites and by the CLI fixture generator.

use crate::bipoly::{BiPoly, RationalSchurFn};
use crate::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// 2 - z1 - z2 (stable, one boundary zero at (1,1)).
pub fn flagship_denominator() -> BiPoly {
    BiPoly::from_grid(vec![
        vec![c(2.0, 0.0), c(-1.0, 0.0)],
        vec![c(-1.0, 0.0), c(0.0, 0.0)],
    ])
    .unwrap()
}

/// The flagship rational inner function (2 z1 z2 - z1 - z2) / (2 - z1 - z2).
pub fn flagship() -> RationalSchurFn {
    let num = BiPoly::from_grid(vec![
        vec![c(0.0, 0.0), c(-1.0, 0.0)],
        vec![c(-1.0, 0.0), c(2.0, 0.0)],
    ])
    .unwrap();
    RationalSchurFn::scalar(num, flagship_denominator()).unwrap()
}

/// The coordinate function z1.
pub fn z1() -> RationalSchurFn {
    RationalSchurFn::scalar(BiPoly::monomial(1, 0), BiPoly::constant(c(1.0, 0.0))).unwrap()
}

/// The monomial z1 z2.
pub fn z1z2() -> RationalSchurFn {
    RationalSchurFn::scalar(BiPoly::monomial(1, 1), BiPoly::constant(c(1.0, 0.0))).unwrap()
}

/// (z1 + z2)/2, a non-inner Schur function.
pub fn average() -> RationalSchurFn {
    let num = BiPoly::from_grid(vec![
        vec![c(0.0, 0.0), c(0.5, 0.0)],
        vec![c(0.5, 0.0), c(0.0, 0.0)],
    ])
    .unwrap();
    RationalSchurFn::scalar(num, BiPoly::constant(c(1.0, 0.0))).unwrap()
}

/// diag(z1, z2), a 2x2 matrix inner function.
pub fn diag_z1_z2() -> RationalSchurFn {
    let zero = BiPoly::zero();
    RationalSchurFn::new(
        vec![
            vec![BiPoly::monomial(1, 0), zero.clone()],
            vec![zero, BiPoly::monomial(0, 1)],
        ],
        BiPoly::constant(c(1.0, 0.0)),
    )
    .unwrap()
}

/// z1 over the unstable denominator z1 - 0.5 (for failure-path tests).
pub fn unstable() -> RationalSchurFn {
    let denom = BiPoly::from_grid(vec![vec![c(-0.5, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
    RationalSchurFn::scalar(BiPoly::monomial(1, 0), denom).unwrap()
}

/// diag(flagship, z1 z2) over the common denominator 2 - z1 - z2: a 2x2
/// matrix inner function with a boundary zero, exercising the general
/// (vector-valued, non-constant denominator) model-space path.
pub fn mixed_diag() -> RationalSchurFn {
    let p = flagship_denominator();
    let flag_num = BiPoly::from_grid(vec![
        vec![c(0.0, 0.0), c(-1.0, 0.0)],
        vec![c(-1.0, 0.0), c(2.0, 0.0)],
    ])
    .unwrap();
    let mono_num = BiPoly::monomial(1, 1).mul(&p);
    RationalSchurFn::new(
        vec![
            vec![flag_num, BiPoly::zero()],
            vec![BiPoly::zero(), mono_num],
        ],
        p,
    )
    .unwrap()
}
