//! Build a taffy cuckoo filter, freeze it into the compact read-only form,
//! then thaw it and keep inserting.
//!
//! cargo run --release --example tcf_freeze_thaw

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taffy_filters::oracle::{check_no_false_negatives, measure_fpp, OracleSet};
use taffy_filters::tcf::Tcf;
use taffy_filters::{GrowableFilter, Membership};

fn main() -> taffy_filters::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut filter = Tcf::new(3);
    let mut oracle = OracleSet::new();
    for _ in 0..200_000 {
        let d = rng.random();
        oracle.insert(d);
        filter.insert_digest(d)?;
    }

    let frozen = filter.freeze();
    let live_fpp = measure_fpp(&filter, &oracle, 200_000, 1)?;
    let frozen_fpp = measure_fpp(&frozen, &oracle, 200_000, 1)?;
    println!("growable: {:>9} bytes, fpp {:.4}", filter.allocated_bytes(), live_fpp.rate);
    println!("frozen:   {:>9} bytes, fpp {:.4}", frozen.allocated_bytes(), frozen_fpp.rate);

    let mut thawed = frozen.thaw();
    for _ in 0..200_000 {
        let d = rng.random();
        oracle.insert(d);
        thawed.insert_digest(d)?;
    }
    println!(
        "thawed and grown to {} keys, {} upsizes, no false negatives: {}",
        oracle.len(),
        thawed.upsizes(),
        check_no_false_negatives(&thawed, &oracle)
    );
    Ok(())
}
