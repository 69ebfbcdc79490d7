//! Type-I error study: both samples come from the same distribution, so each
//! method should reject about 5% of the time.
//!
//! ```bash
//! cargo run --example level_study
//! ```

use nystrom_mmd::harness::{estimate_rate, write_results, ExperimentSpec, Regime};

fn main() -> nystrom_mmd::Result<()> {
    let spec = ExperimentSpec::from_json(
        r#"{
            "scenario": {"type": "correlated_gaussian", "d": 3, "rho_x": 0.5, "rho_y": [0.5]},
            "methods": ["nystrom-uniform", "nystrom-akrls", "rff"],
            "landmarks": ["sqrt"],
            "sample_sizes": [500],
            "alpha": 0.05,
            "permutations": 199,
            "repetitions": 200,
            "seed": 1
        }"#,
    )?;
    let cells: Vec<_> = estimate_rate(&spec, Regime::Null)?
        .into_iter()
        .filter_map(|c| c.map_err(|e| eprintln!("{}: {}", e.method, e.message)).ok())
        .collect();
    write_results(std::io::stdout(), &cells)
}
