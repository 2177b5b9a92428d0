//! Ingest a password-breach style hash list (`SHA1:count` per line), freeze
//! the filter, write it to disk and query it back, all through the CLI
//! entry point.
//!
//! cargo run --release --example hibp_ingest

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join("taffy-hibp-example");
    std::fs::create_dir_all(&dir)?;
    let (list, filter, answers) = (dir.join("hashes.txt"), dir.join("hashes.tafy"), dir.join("answers.txt"));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut text = String::new();
    for _ in 0..10_000 {
        let (hi, lo): (u32, u128) = (rng.random(), rng.random());
        writeln!(text, "{hi:08X}{lo:032X}:{}", rng.random_range(1..5000)).unwrap();
    }
    std::fs::write(&list, &text)?;

    let arg = |p: &std::path::Path| p.to_str().unwrap().to_owned();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let build = [
        "taffy", "build", "--type", "tcf", "--format", "hex", "--freeze", "--seed", "9",
        "--input", &arg(&list), "--output", &arg(&filter),
    ];
    assert_eq!(taffy_filters::cli::run(build, &mut out, &mut err), 0);
    let query = [
        "taffy", "query", "--format", "hex", "--filter", &arg(&filter), "--input", &arg(&list),
        "--output", &arg(&answers),
    ];
    assert_eq!(taffy_filters::cli::run(query, &mut out, &mut err), 0);

    let answers = std::fs::read_to_string(&answers)?;
    let positives = answers.lines().filter(|l| *l == "true").count();
    println!("{positives} of {} ingested hashes found", answers.lines().count());
    println!("filter file: {} bytes", std::fs::metadata(&filter)?.len());
    Ok(())
}
