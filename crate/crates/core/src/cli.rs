//! Command-line front end. stdout carries data, stderr diagnostics.
//!
//! Exit codes: 0 success, 1 usage, 2 bad input data, 3 internal failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{statistical_distance_estimate, Density, DensitySpec};
use crate::error::{Error, Result};
use crate::experiments::batch::{run_experiment, ExperimentConfig};
use crate::hash::{self, bruteforce_collision, hash_eval, parse_bits, HashKey};
use crate::lattice::Basis;
use crate::numerics::PrecisionContext;
use crate::pke::{self, Ciphertext, PkeParams, PrivateKey, PublicKey};
use crate::reductions::{select_prime, solve_usvp, ReferenceDsvpOracle, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

const SPEC_HELP: &str = "Distribution specs: U | Q:beta | T:h:beta | TD:h | TDflat:h | Zk:k:N";

#[derive(Debug, Parser)]
#[command(name = "wavelat", version, about = "Wavy distributions, lattice reductions, and the subset-sum cryptosystem and hash", after_help = SPEC_HELP)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Parameter profile: desk-small or desk.
    #[arg(long, global = true, default_value = "desk-small")]
    profile: String,
    /// RNG seed; fresh entropy when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fractional bits for dyadic arithmetic.
    #[arg(long, global = true)]
    precision_bits: Option<u32>,
    /// Output path; stdout when omitted (keygen: file prefix).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a PKE key pair (<out>.sk, <out>.pk) or, with --hash, a hash key.
    Keygen {
        #[arg(long)]
        hash: bool,
        /// Hash modulus is 2^bits.
        #[arg(long, default_value_t = 16)]
        modulus_bits: u32,
        /// Hash key length.
        #[arg(long, default_value_t = 20)]
        m: usize,
    },
    /// Encrypt one bit under a public key.
    Encrypt {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        bit: u8,
        #[arg(long)]
        key: PathBuf,
    },
    /// Decrypt a ciphertext (from --in or stdin) with a private key.
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Hash a bit string (from --in or stdin).
    Hash {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Find a collision witness b in {-1,0,1}^m with sum b_i a_i = 0 mod N.
    HashCollide {
        #[arg(long)]
        key: PathBuf,
    },
    /// Draw samples from a distribution spec, one per line.
    Sample {
        #[arg(long)]
        spec: DensitySpec,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Estimate the statistical distance between two distribution specs.
    DistTest {
        #[arg(long)]
        a: DensitySpec,
        #[arg(long)]
        b: DensitySpec,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        bins: usize,
    },
    /// Recover the unique shortest vector of a basis with the reference dSVP oracle.
    UsvpSolve {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Prime p; defaults to the smallest prime in (g, 2g].
        #[arg(long)]
        p: Option<u64>,
        #[arg(long, default_value_t = 4.0)]
        g: f64,
        /// Write the oracle-call trace (TSV) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a batch of games from a key=value config; CSV report.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value settings, applied after the config file.
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Io(_)
        | Error::Domain(_)
        | Error::Parameter(_)
        | Error::Rank
        | Error::Refused(_)
        | Error::PromiseViolation(_)
        | Error::NotFound(_) => EXIT_DATA,
        Error::SamplerStall(_)
        | Error::Protocol(_)
        | Error::Budget(_)
        | Error::StreamExhausted(_) => EXIT_INTERNAL,
    }
}

fn rng(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_os_rng(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => read_text(p),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    let precision = match g.precision_bits {
        Some(b) => PrecisionContext::new(b, PrecisionContext::default().quadrature_points)?,
        None => PrecisionContext::default(),
    };
    let out = g.out.as_deref();
    let mut rng = rng(g.seed);
    match &cli.command {
        Command::Keygen {
            hash: true,
            modulus_bits,
            m,
        } => {
            let key = hash::keygen(&(BigInt::from(1u8) << *modulus_bits), *m, &mut rng)?;
            emit(out, stdout, &key.to_string())
        }
        Command::Keygen { .. } => {
            let params = PkeParams::profile(&g.profile)?;
            let (sk, pk) = pke::keygen(&params, &precision, &mut rng)?;
            let prefix = out.unwrap_or(Path::new("key"));
            let (skp, pkp) = (with_ext(prefix, "sk"), with_ext(prefix, "pk"));
            fs::write(&skp, sk.to_string())?;
            fs::write(&pkp, pk.to_string())?;
            writeln!(stderr, "wrote {} and {}", skp.display(), pkp.display())?;
            Ok(())
        }
        Command::Encrypt { bit, key } => {
            let pk: PublicKey = read_text(key)?.parse()?;
            let c = pke::encrypt(&pk, *bit, &mut rng)?;
            emit(out, stdout, &c.to_string())
        }
        Command::Decrypt { key, input } => {
            let sk: PrivateKey = read_text(key)?.parse()?;
            let c: Ciphertext = read_input(input.as_deref())?.parse()?;
            emit(out, stdout, &format!("{}\n", sk.decrypt(&c)))
        }
        Command::Hash { key, input } => {
            let k: HashKey = read_text(key)?.parse()?;
            let bits = parse_bits(&read_input(input.as_deref())?)?;
            emit(out, stdout, &format!("{:x}\n", hash_eval(&k, &bits)?))
        }
        Command::HashCollide { key } => {
            let k: HashKey = read_text(key)?.parse()?;
            let b = bruteforce_collision(&k)?;
            let line: Vec<String> = b.iter().map(i64::to_string).collect();
            emit(out, stdout, &format!("{}\n", line.join(" ")))
        }
        Command::Sample { spec, count } => {
            let d = Density::of(spec.clone())?;
            let mut text = String::new();
            for _ in 0..*count {
                text += &format!("{}\n", d.sample_with(&mut rng)?);
            }
            emit(out, stdout, &text)
        }
        Command::DistTest {
            a,
            b,
            samples,
            bins,
        } => {
            let (da, db) = (Density::of(a.clone())?, Density::of(b.clone())?);
            let xa = (0..*samples)
                .map(|_| da.sample_with(&mut rng))
                .collect::<Result<Vec<_>>>()?;
            let xb = (0..*samples)
                .map(|_| db.sample_with(&mut rng))
                .collect::<Result<Vec<_>>>()?;
            let d = statistical_distance_estimate(&xa, &xb, *bins)?;
            emit(out, stdout, &format!("{d}\n"))
        }
        Command::UsvpSolve {
            input,
            p,
            g: gap,
            trace,
        } => {
            let basis: Basis = read_input(input.as_deref())?.parse()?;
            let p = match p {
                Some(p) => *p,
                None => select_prime(*gap)?,
            };
            let mut oracle = ReferenceDsvpOracle::default();
            let mut t = Trace::default();
            let v = solve_usvp(&basis, p, &mut oracle, Some(&mut t))?;
            if let Some(tp) = trace {
                fs::write(tp, t.to_tsv())?;
            }
            writeln!(stderr, "p={p} oracle_calls={}", oracle.calls)?;
            let line: Vec<String> = v.iter().map(ToString::to_string).collect();
            emit(out, stdout, &format!("{}\n", line.join(" ")))
        }
        Command::Experiment { config, set } => {
            let mut cfg: ExperimentConfig = match config {
                Some(p) => read_text(p)?.parse()?,
                None => ExperimentConfig::default(),
            };
            for kv in set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("--set expects key=value, got {kv:?}")))?;
                cfg.set(k.trim(), v.trim());
            }
            if let Some(s) = g.seed {
                cfg.set("seed", s);
            }
            if cfg.get_str("profile").is_none() {
                cfg.set("profile", &g.profile);
            }
            let rep = run_experiment(&cfg, &precision)?;
            writeln!(stderr, "{}", rep.summary)?;
            emit(out, stdout, &rep.csv)
        }
    }
}
