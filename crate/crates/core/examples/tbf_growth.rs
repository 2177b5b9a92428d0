//! Grow a taffy block filter from nothing to 100k keys and watch levels
//! appear while the false positive rate stays under budget.
//!
//! cargo run --release --example tbf_growth

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taffy_filters::oracle::{measure_fpp, OracleSet};
use taffy_filters::tbf::Tbf;
use taffy_filters::{GrowableFilter, Membership};

fn main() -> taffy_filters::Result<()> {
    let epsilon = 0.004;
    let mut filter = Tbf::new(epsilon, 7)?;
    let mut oracle = OracleSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!("{:>8} {:>7} {:>10} {:>9}", "keys", "levels", "bits/key", "fpp");
    for n in 1..=100_000u64 {
        let digest = rng.random();
        oracle.insert(digest);
        filter.insert_digest(digest)?;
        if n.is_power_of_two() && n >= 1024 {
            let est = measure_fpp(&filter, &oracle, 100_000, n)?;
            let bpk = filter.allocated_bytes() as f64 * 8.0 / n as f64;
            println!("{n:>8} {:>7} {bpk:>10.2} {:>9.5}", filter.level_count(), est.rate);
        }
    }
    Ok(())
}
