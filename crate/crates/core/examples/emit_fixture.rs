//! Emit a corpus function as JSON (used to generate the CLI fixtures).
use agler_core::bipoly::RationalSchurFnJson;
use agler_core::corpus;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "flagship".into());
    let phi = match name.as_str() {
        "flagship" => corpus::flagship(),
        "z1" => corpus::z1(),
        "z1z2" => corpus::z1z2(),
        "average" => corpus::average(),
        "diag" => corpus::diag_z1_z2(),
        "unstable" => corpus::unstable(),
        other => panic!("unknown corpus function {other}"),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&RationalSchurFnJson::from(&phi)).unwrap()
    );
}
