//! Runs every strategy on the synthetic language and prints mean accuracy per
//! cycle. Usage: `cargo run --release --example desk_experiment [k_stem_rate]`

use morphal::driver::{run_experiment, summary_csv, RunConfig};
use morphal::synthetic::{generate, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.2);
    let data = generate(&SyntheticConfig { k_stem_rate: rate, ..SyntheticConfig::default() })?;
    let cfg = RunConfig { test_size: 500, batch_k: 100, cycles: 5, jobs: 4, ..RunConfig::default() };
    let start = std::time::Instant::now();
    let records = run_experiment(&cfg, &data)?;
    print!("{}", summary_csv(&records)?);
    eprintln!("{} records in {:?}", records.len(), start.elapsed());
    Ok(())
}
