//! Compare how the taffy cuckoo filter and its minimal variant allocate
//! space as they grow.
//!
//! cargo run --release --example mtcf_space

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taffy_filters::mtcf::Mtcf;
use taffy_filters::tcf::Tcf;
use taffy_filters::{GrowableFilter, Membership};

fn main() -> taffy_filters::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tcf = Tcf::new(11);
    let mut mtcf = Mtcf::new(11);
    let (mut tcf_steps, mut mtcf_steps) = (0, 0);

    println!("{:>9} {:>12} {:>9} {:>12} {:>9}", "keys", "tcf bytes", "bits/key", "mtcf bytes", "bits/key");
    for n in 1..=500_000u64 {
        let d = rng.random();
        let (before_t, before_m) = (tcf.allocated_bytes(), mtcf.allocated_bytes());
        tcf.insert_digest(d)?;
        mtcf.insert_digest(d)?;
        tcf_steps += (tcf.allocated_bytes() != before_t) as u32;
        mtcf_steps += (mtcf.allocated_bytes() != before_m) as u32;
        if n % 50_000 == 0 {
            let bpk = |bytes: usize| bytes as f64 * 8.0 / n as f64;
            println!(
                "{n:>9} {:>12} {:>9.2} {:>12} {:>9.2}",
                tcf.allocated_bytes(),
                bpk(tcf.allocated_bytes()),
                mtcf.allocated_bytes(),
                bpk(mtcf.allocated_bytes())
            );
        }
    }
    println!("growth steps: tcf {tcf_steps}, mtcf {mtcf_steps} (cursor at {}, a = {})", mtcf.cursor(), mtcf.log_buckets());
    Ok(())
}
