//! The mixture protocol on CSV data: X is drawn from a background pool, Y
//! mixes in a fraction of signal rows. Stand-in CSV files are generated in a
//! temporary directory; point the spec at real files to use your own data.
//!
//! ```bash
//! cargo run --example csv_mixture
//! ```

use nystrom_mmd::data::{sample_correlated_gaussians, write_csv, SyntheticSpec};
use nystrom_mmd::harness::{estimate_rate, ExperimentSpec, Regime, Scenario};
use nystrom_mmd::perm_test::Method;

fn main() -> nystrom_mmd::Result<()> {
    let dir = std::env::temp_dir().join("nysmmd-csv-mixture");
    std::fs::create_dir_all(&dir)?;
    let background = dir.join("background.csv");
    let signal = dir.join("signal.csv");
    write_csv(&background, &sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(4, 0.2, 8000, 1))?, None)?;
    write_csv(&signal, &sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(4, 0.8, 4000, 2))?, None)?;

    let mut spec = ExperimentSpec::from_json(
        r#"{
            "scenario": {"type": "csv_mixture", "background": "", "signal": "", "alpha_mix": [0.0, 0.1, 0.2, 0.4]},
            "methods": ["nystrom-akrls", "rff"],
            "landmarks": ["sqrt"],
            "sample_sizes": [1000],
            "permutations": 99,
            "repetitions": 40,
            "seed": 3
        }"#,
    )?;
    spec.scenario = Scenario::CsvMixture {
        background,
        signal,
        alpha_mix: vec![0.0, 0.1, 0.2, 0.4],
        has_header: false,
    };
    for cell in estimate_rate(&spec, Regime::Alternative)?.into_iter().flatten() {
        let label = if cell.method == Method::Rff { "rff" } else { "nystrom" };
        println!("{label:<8} alpha_mix {:.1}  rejection rate {:.3}", cell.param, cell.rate);
    }
    Ok(())
}
