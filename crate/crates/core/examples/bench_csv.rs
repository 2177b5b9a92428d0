//! Run the growth benchmark for all three filters at a small scale and print
//! the CSV the `bench` subcommand writes.
//!
//! cargo run --release --example bench_csv

use taffy_filters::cli::{bench, write_csv, BenchConfig, FilterKind, DEFAULT_TBF_FPP};

fn main() -> taffy_filters::Result<()> {
    let config = BenchConfig { n: 1 << 16, probes: 50_000, seed: 1, reps: 3 };
    for kind in [FilterKind::Tbf, FilterKind::Tcf, FilterKind::Mtcf] {
        println!("# {kind:?}");
        let rows = bench(kind, DEFAULT_TBF_FPP, config)?;
        write_csv(&rows, std::io::stdout())?;
    }
    Ok(())
}
