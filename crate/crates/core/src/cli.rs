//! Command-line front end: build and query filter files, run growth
//! benchmarks to CSV. The `taffy` binary is a thin wrapper over [`run`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::{GrowableFilter, Membership};
use crate::mtcf::Mtcf;
use crate::oracle::{measure_fpp, OracleSet};
use crate::persistence::{self, AnyFilter};
use crate::tbf::Tbf;
use crate::tcf::Tcf;

pub const DEFAULT_TBF_FPP: f64 = 0.004;

#[derive(Debug, Parser)]
#[command(name = "taffy", version, about = "Growable approximate membership filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Insert keys from a file into a new filter and save it.
    Build(BuildArgs),
    /// Print true/false for each key in a file against a saved filter.
    Query(QueryArgs),
    /// Insert random keys and report space, timing and fpp at each power of two.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FilterKind {
    Tbf,
    Tcf,
    Mtcf,
}

/// How a key file is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KeyFormat {
    /// One hex digest per line, optionally followed by `:count`; the key is
    /// the last 16 hex digits.
    Hex,
    /// One decimal u64 per line.
    Dec64,
    /// Consecutive little-endian 8-byte words.
    Raw64,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long = "type", value_enum)]
    pub kind: FilterKind,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "hex")]
    pub format: KeyFormat,
    /// Target false positive rate (tbf only).
    #[arg(long)]
    pub fpp: Option<f64>,
    /// Drop tails after building (tcf and mtcf only).
    #[arg(long)]
    pub freeze: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// A file written by `build`.
    #[arg(long)]
    pub filter: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "hex")]
    pub format: KeyFormat,
    /// Where to write results; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "type", value_enum)]
    pub kind: FilterKind,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    /// Lookups per measurement and negative probes for the fpp estimate.
    #[arg(long, default_value_t = 1_000_000)]
    pub probes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target false positive rate (tbf only).
    #[arg(long)]
    pub fpp: Option<f64>,
    /// Timing repetitions; each column reports the minimum.
    #[arg(long, default_value_t = 9)]
    pub reps: u32,
    /// Where to write the CSV; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Build(a) => cmd_build(&a, out),
        Command::Query(a) => cmd_query(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}

/// Parses one hex line: the digest is everything before an optional `:`,
/// and the key is its 64 low-order bits.
pub fn parse_hex_key(line: &str) -> std::result::Result<u64, String> {
    let digest = line.split(':').next().unwrap_or("").trim();
    if digest.is_empty() || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("not a hex digest: {line:?}"));
    }
    let low = &digest[digest.len().saturating_sub(16)..];
    u64::from_str_radix(low, 16).map_err(|e| e.to_string())
}

/// Calls `f` on every key in `reader`; returns the number of keys. Blank
/// lines are skipped in the text formats.
pub fn for_each_key(reader: impl Read, format: KeyFormat, mut f: impl FnMut(u64) -> Result<()>) -> Result<u64> {
    let mut reader = BufReader::new(reader);
    let mut count = 0;
    match format {
        KeyFormat::Raw64 => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            if buf.len() % 8 != 0 {
                return Err(Error::Parse {
                    line: (buf.len() / 8 + 1) as u64,
                    message: format!("{} trailing bytes after the last 8-byte key", buf.len() % 8),
                });
            }
            for chunk in buf.chunks_exact(8) {
                f(u64::from_le_bytes(chunk.try_into().expect("eight bytes")))?;
                count += 1;
            }
        }
        KeyFormat::Hex | KeyFormat::Dec64 => {
            let mut line = String::new();
            let mut number = 0u64;
            loop {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    break;
                }
                number += 1;
                let text = line.trim();
                if text.is_empty() {
                    continue;
                }
                let key = match format {
                    KeyFormat::Hex => parse_hex_key(text),
                    _ => text.parse::<u64>().map_err(|e| format!("{text:?}: {e}")),
                }
                .map_err(|message| Error::Parse { line: number, message })?;
                f(key)?;
                count += 1;
            }
        }
    }
    Ok(count)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn check_fpp_flag(kind: FilterKind, fpp: Option<f64>) -> Result<f64> {
    match (kind, fpp) {
        (FilterKind::Tbf, fpp) => Ok(fpp.unwrap_or(DEFAULT_TBF_FPP)),
        (_, Some(_)) => Err(Error::Config("--fpp only applies to --type tbf".into())),
        (_, None) => Ok(DEFAULT_TBF_FPP),
    }
}

fn ingest<F: GrowableFilter>(mut filter: F, args: &BuildArgs) -> Result<(F, u64)> {
    let count = for_each_key(open(&args.input)?, args.format, |key| filter.insert_u64(key))?;
    Ok((filter, count))
}

pub fn cmd_build(args: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let fpp = check_fpp_flag(args.kind, args.fpp)?;
    let (filter, count): (AnyFilter, u64) = match args.kind {
        FilterKind::Tbf => {
            if args.freeze {
                return Err(Error::Config("--freeze applies to tcf and mtcf only".into()));
            }
            let (f, n) = ingest(Tbf::new(fpp, args.seed)?, args)?;
            (f.into(), n)
        }
        FilterKind::Tcf => {
            let (f, n) = ingest(Tcf::new(args.seed), args)?;
            (if args.freeze { f.freeze().into() } else { f.into() }, n)
        }
        FilterKind::Mtcf => {
            let (f, n) = ingest(Mtcf::new(args.seed), args)?;
            (if args.freeze { f.freeze().into() } else { f.into() }, n)
        }
    };
    let mut sink = BufWriter::new(File::create(&args.output)?);
    persistence::save(&filter, &mut sink)?;
    let bytes = filter.allocated_bytes();
    writeln!(out, "keys ingested: {count}")?;
    writeln!(out, "allocated bytes: {bytes}")?;
    writeln!(out, "bits per key: {:.3}", bits_per_key(bytes, count))?;
    Ok(())
}

pub fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let filter = persistence::load(BufReader::new(open(&args.filter)?))?;
    let mut file_sink;
    let mut stdout_sink;
    let sink: &mut dyn Write = match &args.output {
        Some(path) => {
            file_sink = BufWriter::new(File::create(path)?);
            &mut file_sink
        }
        None => {
            stdout_sink = BufWriter::new(out);
            &mut stdout_sink
        }
    };
    for_each_key(open(&args.input)?, args.format, |key| {
        writeln!(sink, "{}", filter.contains_u64(key))?;
        Ok(())
    })?;
    sink.flush()?;
    Ok(())
}

fn bits_per_key(bytes: usize, keys: u64) -> f64 {
    if keys == 0 {
        0.0
    } else {
        bytes as f64 * 8.0 / keys as f64
    }
}

/// One CSV row of a growth benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRecord {
    pub n: u64,
    pub allocated_bytes: usize,
    pub bits_per_key: f64,
    /// Mean insert time over the first `n` keys.
    pub insert_ns_per_key: f64,
    pub lookup_present_ns: f64,
    pub lookup_absent_ns: f64,
    pub measured_fpp: f64,
}

pub const CSV_HEADER: &str =
    "n,allocated_bytes,bits_per_key,insert_ns_per_key,lookup_present_ns,lookup_absent_ns,measured_fpp";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.2},{:.2},{:.2},{:.6}",
            self.n,
            self.allocated_bytes,
            self.bits_per_key,
            self.insert_ns_per_key,
            self.lookup_present_ns,
            self.lookup_absent_ns,
            self.measured_fpp
        )
    }
}

pub fn write_csv(records: &[BenchRecord], mut sink: impl Write) -> Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for r in records {
        writeln!(sink, "{}", r.csv_row())?;
    }
    sink.flush()?;
    Ok(())
}

/// Powers of two up to `n`, then `n` itself.
pub fn checkpoints(n: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..64).map(|i| 1u64 << i).take_while(|&c| c <= n).collect();
    if out.last() != Some(&n) && n > 0 {
        out.push(n);
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub n: u64,
    pub probes: u64,
    pub seed: u64,
    pub reps: u32,
}

fn time_lookups<F: Membership>(filter: &F, keys: &[u64]) -> f64 {
    let start = Instant::now();
    let hits = keys.iter().filter(|&&k| filter.contains_u64(k)).count();
    std::hint::black_box(hits);
    start.elapsed().as_nanos() as f64 / keys.len().max(1) as f64
}

/// Runs the growth benchmark on filters made by `make`.
///
/// Every repetition rebuilds the filter from the same seeded key stream;
/// timing columns keep the minimum over repetitions, the space and fpp
/// columns come from the first.
pub fn bench_with<F: GrowableFilter>(config: BenchConfig, mut make: impl FnMut() -> Result<F>) -> Result<Vec<BenchRecord>> {
    if config.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let points = checkpoints(config.n);
    let mut records: Vec<BenchRecord> = Vec::with_capacity(points.len());
    for rep in 0..config.reps.max(1) {
        let mut keys_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut probe_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_9be5);
        let mut filter = make()?;
        let mut keys = Vec::with_capacity(config.n as usize);
        let mut insert_ns = 0u128;
        for (i, &point) in points.iter().enumerate() {
            let batch: Vec<u64> = (keys.len() as u64..point).map(|_| keys_rng.random()).collect();
            let start = Instant::now();
            for &k in &batch {
                filter.insert_u64(k)?;
            }
            insert_ns += start.elapsed().as_nanos();
            keys.extend_from_slice(&batch);

            let present: Vec<u64> = (0..config.probes)
                .map(|_| keys[probe_rng.random_range(0..keys.len())])
                .collect();
            let absent: Vec<u64> = (0..config.probes).map(|_| probe_rng.random()).collect();
            let present_ns = time_lookups(&filter, &present);
            let absent_ns = time_lookups(&filter, &absent);
            let insert_per_key = insert_ns as f64 / point as f64;

            if rep == 0 {
                let hasher = filter.hasher();
                let oracle: OracleSet = keys.iter().map(|&k| hasher.hash_u64(k)).collect();
                let fpp = measure_fpp(&filter, &oracle, config.probes.max(1), config.seed.wrapping_add(point))?;
                let bytes = filter.allocated_bytes();
                records.push(BenchRecord {
                    n: point,
                    allocated_bytes: bytes,
                    bits_per_key: bits_per_key(bytes, point),
                    insert_ns_per_key: insert_per_key,
                    lookup_present_ns: present_ns,
                    lookup_absent_ns: absent_ns,
                    measured_fpp: fpp.rate,
                });
            } else {
                let r = &mut records[i];
                r.insert_ns_per_key = r.insert_ns_per_key.min(insert_per_key);
                r.lookup_present_ns = r.lookup_present_ns.min(present_ns);
                r.lookup_absent_ns = r.lookup_absent_ns.min(absent_ns);
            }
        }
    }
    Ok(records)
}

pub fn bench(kind: FilterKind, fpp: f64, config: BenchConfig) -> Result<Vec<BenchRecord>> {
    let seed = config.seed;
    match kind {
        FilterKind::Tbf => bench_with(config, || Tbf::new(fpp, seed)),
        FilterKind::Tcf => bench_with(config, || Ok(Tcf::new(seed))),
        FilterKind::Mtcf => bench_with(config, || Ok(Mtcf::new(seed))),
    }
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let fpp = check_fpp_flag(args.kind, args.fpp)?;
    let config = BenchConfig {
        n: args.n,
        probes: args.probes,
        seed: args.seed,
        reps: args.reps,
    };
    let records = bench(args.kind, fpp, config)?;
    match &args.csv {
        Some(path) => write_csv(&records, BufWriter::new(File::create(path)?)),
        None => write_csv(&records, out),
    }
}
