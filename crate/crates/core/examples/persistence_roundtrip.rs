//! Save each filter type to bytes, load it back and confirm it answers
//! exactly as before.
//!
//! cargo run --release --example persistence_roundtrip

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taffy_filters::mtcf::Mtcf;
use taffy_filters::persistence::{from_bytes, to_bytes};
use taffy_filters::tbf::Tbf;
use taffy_filters::tcf::Tcf;
use taffy_filters::{AnyFilter, GrowableFilter, Membership};

fn main() -> taffy_filters::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut tbf, mut tcf, mut mtcf) = (Tbf::new(0.004, 5)?, Tcf::new(5), Mtcf::new(5));
    for _ in 0..50_000 {
        let d = rng.random();
        tbf.insert_digest(d)?;
        tcf.insert_digest(d)?;
        mtcf.insert_digest(d)?;
    }
    let filters: Vec<AnyFilter> = vec![
        tcf.freeze().into(),
        mtcf.freeze().into(),
        tbf.into(),
        tcf.into(),
        mtcf.into(),
    ];

    for filter in &filters {
        let bytes = to_bytes(filter);
        let loaded = from_bytes(&bytes)?;
        let agree = (0..100_000).all(|_| {
            let d = rng.random();
            loaded.contains_digest(d) == filter.contains_digest(d)
        });
        let mut corrupt = bytes.clone();
        corrupt[bytes.len() / 2] ^= 1;
        println!(
            "{:<11} {:>8} bytes  round trip agrees: {agree}  corruption rejected: {}",
            format!("{:?}", filter.type_tag()),
            bytes.len(),
            from_bytes(&corrupt).is_err()
        );
    }
    Ok(())
}
