//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification or oracle check came out false,
//! 2 bad input, 3 internal invariant breach.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use simplenormal::alphabet::balanced_alphabet;
use simplenormal::analyzer::{digit_report, verify_stage_log};
use simplenormal::engine::{self, FinalPoint};
use simplenormal::error::Error;
use simplenormal::profile::{validate_profile, NormalityProfile};
use simplenormal::residue::{self, PartitionSpec};

#[derive(Parser)]
#[command(name = "simplenormal", version, about = "Construct and check reals simply normal to a prescribed set of bases")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction; writes stages.jsonl, final.json and manifest.json.
    Construct {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the profile's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Digit-frequency report of final.json or the last point of stages.jsonl.
    Analyze {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        bases: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<u64>,
        /// Directory for report.csv and manifest.json (default: CSV to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the digit alphabet for base S, exponents M (comma list, or
    /// "-" for none), denied exponent N and multiplicity C.
    Alphabet {
        s: u32,
        m: String,
        n: u64,
        c: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a stage log against its profile.
    Verify {
        log: PathBuf,
        #[arg(long)]
        profile: PathBuf,
    },
    /// Combinatorial oracles.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Subcommand)]
enum Oracle {
    /// Signed subset-sum count against its closed form.
    Haiman { n: u64, k: u64 },
    /// Number of ways to write SIGMA as V summands from {1..N-1} × K.
    Partition { n: u64, sigma: u64, v: u64, k: u64 },
    /// Residue sets equivalent for M but not for N.
    Equiv {
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long)]
        n: u64,
    },
}

enum Failure {
    Check(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Internal(_) | Error::BudgetExhausted { .. } => 3,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_profile(path: &Path) -> Result<NormalityProfile, Error> {
    validate_profile(&read(path)?)
}

fn write_manifest(dir: &Path, subcommand: &str, options: serde_json::Value) -> Result<(), Error> {
    let doc = json!({
        "tool": "simplenormal",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "out": dir.display().to_string(),
        "options": options,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn parse_m(text: &str) -> Result<BTreeSet<u64>, Error> {
    if text.trim().is_empty() || text.trim() == "-" {
        return Ok(BTreeSet::new());
    }
    text.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| Error::InvalidArgument(format!("bad exponent {t:?}"))))
        .collect()
}

fn construct(profile: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut p = load_profile(profile)?;
    if let Some(seed) = seed {
        p = p.with_seed(seed);
    }
    fs::create_dir_all(out)?;
    let mut log = std::io::BufWriter::new(fs::File::create(out.join("stages.jsonl"))?);
    let fin = engine::run_with(&p, |rec| {
        serde_json::to_writer(&mut log, rec)?;
        log.write_all(b"\n")?;
        Ok(())
    })?;
    log.flush()?;
    fs::write(out.join("final.json"), serde_json::to_string(&fin).map_err(Error::from)? + "\n")?;
    write_manifest(
        out,
        "construct",
        json!({ "profile": profile.display().to_string(), "seed": p.seed, "seed_override": seed }),
    )?;
    eprintln!("reached position {} with {} base-{} digits", fin.b, fin.x.prec(), fin.x.base());
    Ok(())
}

fn load_point(path: &Path) -> Result<FinalPoint, Error> {
    let text = read(path)?;
    if let Ok(fin) = serde_json::from_str::<FinalPoint>(&text) {
        return Ok(fin);
    }
    let records = engine::parse_jsonl(&text)?;
    let last = records.last().ok_or_else(|| Error::Parse("stage log is empty".into()))?;
    Ok(FinalPoint { x: last.x.clone(), b: last.b })
}

fn analyze(input: &Path, bases: &[u64], checkpoints: &[u64], out: Option<&Path>) -> Result<(), Failure> {
    let point = load_point(input)?;
    let csv = digit_report(&point.x, point.b, bases, checkpoints)?.to_csv();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.csv"), csv)?;
            write_manifest(
                dir,
                "analyze",
                json!({ "input": input.display().to_string(), "bases": bases, "checkpoints": checkpoints }),
            )?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn alphabet(s: u32, m: &str, n: u64, c: u64, out: Option<&Path>) -> Result<(), Failure> {
    let doc = balanced_alphabet(s, &parse_m(m)?, n, c)?.to_json()?;
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn verify(log: &Path, profile: &Path) -> Result<(), Failure> {
    let p = load_profile(profile)?;
    let records = engine::parse_jsonl(&read(log)?)?;
    let report = verify_stage_log(&records, &p)?;
    match report.failure {
        None => {
            println!("ok: {} stages verified", report.stages);
            Ok(())
        }
        Some((t, reason)) => Err(Failure::Check(format!("stage {t}: {reason}"))),
    }
}

fn oracle(cmd: &Oracle) -> Result<(), Failure> {
    match cmd {
        Oracle::Haiman { n, k } => {
            let got = residue::haiman_difference(*n, *k)?;
            let want = residue::haiman_closed_form(*n, *k)?;
            println!("{got}");
            println!("closed form {want}");
            if got != want {
                return Err(Failure::Check("mismatch".into()));
            }
            println!("match");
        }
        Oracle::Partition { n, sigma, v, k } => {
            println!("{}", residue::partition_count(&PartitionSpec::new(*n, *sigma, *v, *k)?));
        }
        Oracle::Equiv { m, n } => {
            let ms: BTreeSet<u64> = m.iter().copied().collect();
            let w = residue::residue_witness(&ms, *n)?;
            let same = residue::is_residue_equivalent(&w.x, &w.y, &w.extended)?;
            let differ = !residue::is_residue_equivalent(&w.x, &w.y, &BTreeSet::from([*n]))?;
            let doc = json!({ "extended": w.extended, "modulus": w.modulus, "X": w.x, "Y": w.y,
                              "equivalent_for_extended": same, "inequivalent_for_n": differ });
            println!("{}", serde_json::to_string(&doc).map_err(Error::from)?);
            if !(same && differ) {
                return Err(Failure::Check("residue sets fail their checks".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Construct { profile, out, seed } => construct(profile, out, *seed),
        Command::Analyze { input, bases, checkpoints, out } => analyze(input, bases, checkpoints, out.as_deref()),
        Command::Alphabet { s, m, n, c, out } => alphabet(*s, m, *n, *c, out.as_deref()),
        Command::Verify { log, profile } => verify(log, profile),
        Command::Oracle(o) => oracle(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
