use agler_core::modelspace::*;
use agler_core::{corpus, Tolerances};

fn main() {
    let t = Tolerances::default();
    let phi = corpus::mixed_diag();
    let s = wold_difference(&phi, 1, WoldFlavor::Max, &t).unwrap();
    for k in 0..s.dim() {
        let polys = s.column_polys(k);
        println!("elem {k}:");
        for (c, q) in polys.iter().enumerate() {
            for i in 0..=2 { for j in 0..=2 {
                let v = q.get(i,j);
                if v.norm() > 1e-9 { println!("  comp{c} ({i},{j}) {:.9}+{:.9}i", v.re, v.im); }
            }}
        }
    }
}
