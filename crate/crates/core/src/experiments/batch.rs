//! `key=value` experiment configs and batch runs producing one CSV row per game.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::thread;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dihedral::{
    dihedral_reduction_game, general_periodic_distinguisher, ClairvoyantPeriodicDetector,
    ConstantSolver, KnownFrequencySolver, MaxLikelihoodSolver, PeriodicDetector,
    PeriodicGameConfig, ZkSolver,
};
use super::hash_game::{
    hash_distinguisher_game, BirthdayFinder, CollisionFinder, FailingFinder, HashGameConfig,
    MitmFinder,
};
use super::lattice_suite::lattice_distribution_suite;
use super::oracle::{TWindow, UnknownDistribution};
use super::pke_game::{
    pke_security_game, ClairvoyantAdversary, PkeAdversary, PkeGameConfig, RejectingAdversary,
};
use crate::distributions::{DensitySpec, PeriodicShape};
use crate::error::{Error, Result};
use crate::lattice::{Basis, Q};
use crate::numerics::PrecisionContext;
use crate::pke::{error_rate_experiment, PkeParams};

/// Parsed `key=value` lines; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
}

impl FromStr for ExperimentConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key=value, got {raw:?}", i + 1))
            })?;
            let k = k.trim().to_owned();
            if k.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(k.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {k:?}", i + 1)));
            }
        }
        Ok(Self { entries })
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}"))),
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get_str(key)
            .ok_or_else(|| Error::Parse(format!("missing config key {key:?}")))
    }
}

/// One game in a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub seed: u64,
    pub hidden: String,
    pub accept: bool,
    pub stats: Vec<(&'static str, f64)>,
}

/// CSV with columns `seed,hidden,decision` and then the first record's stats.
pub fn records_to_csv(records: &[GameRecord]) -> String {
    let names: Vec<&str> = records
        .first()
        .map(|r| r.stats.iter().map(|s| s.0).collect())
        .unwrap_or_default();
    let mut out = String::from("seed,hidden,decision");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for r in records {
        out += &format!(
            "{},{},{}",
            r.seed,
            r.hidden,
            if r.accept { "accept" } else { "reject" }
        );
        for (_, v) in &r.stats {
            if v.is_finite() {
                out += &format!(",{v}");
            } else {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub csv: String,
    pub summary: String,
}

/// Runs `games` independent games seeded `seed, seed+1, …` across threads;
/// rows come back in seed order.
pub fn run_games<F>(games: usize, seed: u64, play: F) -> Result<Vec<GameRecord>>
where
    F: Fn(u64) -> Result<GameRecord> + Sync,
{
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(games.max(1));
    let mut slots: Vec<Option<Result<GameRecord>>> = (0..games).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let play = &play;
                scope.spawn(move || {
                    (w..games)
                        .step_by(workers)
                        .map(|i| (i, play(seed.wrapping_add(i as u64))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("game worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

fn summary(kind: &str, records: &[GameRecord]) -> String {
    let acc = records.iter().filter(|r| r.accept).count();
    let rate = if records.is_empty() {
        0.0
    } else {
        acc as f64 / records.len() as f64
    };
    format!(
        "{kind}: games={} accepted={acc} rate={rate:.4}",
        records.len()
    )
}

/// `oracle=U`, a spec such as `T:16:0.001`, or `window` (a fresh in-window
/// wavy distribution per game).
fn oracle_for(
    config: &ExperimentConfig,
    window: TWindow,
    rng: &mut ChaCha8Rng,
) -> Result<DensitySpec> {
    match config.get_str("oracle").unwrap_or("U") {
        "window" => window.sample(config.get("window_h_min", 2u64)?, rng),
        s => s.parse(),
    }
}

fn window_from(config: &ExperimentConfig, gamma: f64, h_max: u64) -> Result<TWindow> {
    let base = TWindow::for_gamma(gamma, config.get("window_h_max", h_max)?);
    Ok(TWindow {
        beta_lo: config.get("window_beta_lo", base.beta_lo)?,
        beta_hi: config.get("window_beta_hi", base.beta_hi)?,
        ..base
    })
}

/// Dispatches on `kind`: `pke-game`, `hash-game`, `dihedral`, `periodic` or
/// `pke-errors` or `lattice-suite` (diagonal bases, `diag=1/8,3,3`).
pub fn run_experiment(
    config: &ExperimentConfig,
    precision: &PrecisionContext,
) -> Result<ExperimentReport> {
    let kind = config.require("kind")?;
    let games: usize = config.get("games", 100)?;
    let seed: u64 = config.get("seed", 0)?;
    let budget: u64 = config.get("oracle_budget", u64::MAX)?;
    let records = match kind {
        "pke-game" => {
            let params = PkeParams::profile(config.get_str("profile").unwrap_or("desk-small"))?;
            let game = PkeGameConfig {
                estimate_samples: config.get("estimate_samples", 400)?,
                gap_threshold: config.get("gap_threshold", 0.15)?,
                shift_to_one: config.get("shift", false)?,
            };
            let adversary = config.get_str("adversary").unwrap_or("clairvoyant").to_owned();
            let window = window_from(config, params.gamma, 256)?;
            check_choice("adversary", &adversary, &["clairvoyant", "reject"])?;
            run_games(games, seed, |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let spec = oracle_for(config, window, &mut rng)?;
                let mut oracle = UnknownDistribution::new(spec.clone(), budget)?;
                let mut adv: Box<dyn PkeAdversary> = match adversary.as_str() {
                    "reject" => Box::new(RejectingAdversary),
                    _ => Box::new(ClairvoyantAdversary::default()),
                };
                let o = pke_security_game(adv.as_mut(), &mut oracle, &params, &game, &mut rng)?;
                Ok(GameRecord {
                    seed: s,
                    hidden: spec.to_string(),
                    accept: o.accept,
                    stats: vec![("p0", o.p0), ("pu", o.pu), ("gap", o.gap()), ("h_tilde", o.secrets.h_tilde), ("delta", o.secrets.delta)],
                })
            })?
        }
        "hash-game" => {
            let game = HashGameConfig {
                modulus: BigInt::from(1u8) << config.get("modulus_bits", 16usize)?,
                m: config.get("m", 20)?,
                n: config.get("n", 16)?,
                c_a: config.get("c_a", 1.0)?,
                mu: config.get("mu", 1.0 / 64.0)?,
            };
            let finder = config.get_str("finder").unwrap_or("birthday").to_owned();
            check_choice("finder", &finder, &["birthday", "mitm", "fail"])?;
            let window = window_from(config, config.get("gamma", 64.0)?, 64)?;
            run_games(games, seed, |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let spec = oracle_for(config, window, &mut rng)?;
                let mut oracle = UnknownDistribution::new(spec.clone(), budget)?;
                let mut f: Box<dyn CollisionFinder> = match finder.as_str() {
                    "mitm" => Box::new(MitmFinder),
                    "fail" => Box::new(FailingFinder),
                    _ => Box::new(BirthdayFinder::default()),
                };
                let o = hash_distinguisher_game(f.as_mut(), &mut oracle, &game, &mut rng)?;
                Ok(GameRecord {
                    seed: s,
                    hidden: spec.to_string(),
                    accept: o.accept,
                    stats: vec![
                        ("h_tilde", o.h_tilde.unwrap_or(f64::NAN)),
                        ("routine_calls", o.routine_calls as f64),
                        ("routine_accepts", o.routine_accepts as f64),
                        ("finder_calls", o.finder_calls as f64),
                    ],
                })
            })?
        }
        "dihedral" => {
            let modulus: u64 = config.get("modulus", 1 << 20)?;
            let samples: usize = config.get("samples", 16)?;
            let solver = config.get_str("solver").unwrap_or("known").to_owned();
            check_choice("solver", &solver, &["known", "ml", "constant"])?;
            let k: u64 = config.get("k", 37)?;
            run_games(games, seed, |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let spec: DensitySpec = config.get_str("oracle").unwrap_or("U").parse()?;
                let mut oracle = UnknownDistribution::new(spec.clone(), budget)?;
                let mut sv: Box<dyn ZkSolver> = match solver.as_str() {
                    "ml" => Box::new(MaxLikelihoodSolver { k_max: k }),
                    "constant" => Box::new(ConstantSolver(k)),
                    _ => Box::new(KnownFrequencySolver::new(k)),
                };
                let o = dihedral_reduction_game(sv.as_mut(), &mut oracle, modulus, samples, &mut rng)?;
                Ok(GameRecord { seed: s, hidden: spec.to_string(), accept: o.accept, stats: vec![("k", o.k as f64), ("r", o.r)] })
            })?
        }
        "periodic" => {
            let shape = match config.get_str("shape").unwrap_or("cos2") {
                "cos2" => PeriodicShape::CosSquared,
                "flat" => PeriodicShape::Flat,
                other => return Err(Error::Parse(format!("unknown shape {other:?} (cos2 or flat)"))),
            };
            let game = PeriodicGameConfig {
                shape,
                mu: config.get("mu", 1.0 / 16.0)?,
                h_max: config.get("h_max", 64.0)?,
                sequences: config.get("sequences", 100)?,
                gap_threshold: config.get("gap_threshold", 0.25)?,
            };
            let len: usize = config.get("sequence_len", 32)?;
            let threshold: f64 = config.get("detector_threshold", 1.25)?;
            run_games(games, seed, |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let spec: DensitySpec = config.get_str("oracle").unwrap_or("U").parse()?;
                let mut oracle = UnknownDistribution::new(spec.clone(), budget)?;
                let mut d = ClairvoyantPeriodicDetector::new(shape, len, threshold);
                let o = general_periodic_distinguisher(&mut d as &mut dyn PeriodicDetector, &mut oracle, &game, &mut rng)?;
                Ok(GameRecord {
                    seed: s,
                    hidden: spec.to_string(),
                    accept: o.accept,
                    stats: vec![("h_tilde", o.h_tilde), ("p_shifted", o.p_shifted), ("p_uniform", o.p_uniform)],
                })
            })?
        }
        "lattice-suite" => {
            let parse_vec = |key: &str| -> Result<Vec<Q>> {
                config
                    .require(key)?
                    .split(',')
                    .map(|t| t.trim().parse::<Q>().map_err(|_| Error::Parse(format!("bad rational {t:?} in {key}"))))
                    .collect()
            };
            let basis = Basis::diagonal(&parse_vec("diag")?)?;
            let short = match config.get_str("short") {
                Some(_) => Some(parse_vec("short")?),
                None => None,
            };
            let samples: usize = config.get("samples", 100_000)?;
            let bins: usize = config.get("bins", 64)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = lattice_distribution_suite(&basis, short.as_ref(), samples, bins, &mut rng)?;
            let mut summary = format!("lattice-suite: uniform distance={:.4}", rep.uniform.distance);
            if let Some(w) = &rep.wavy {
                summary += &format!(" wavy distance={:.4}", w.distance);
            }
            return Ok(ExperimentReport { csv: rep.to_csv(), summary });
        }
        "pke-errors" => {
            let params = PkeParams::profile(config.get_str("profile").unwrap_or("desk-small"))?;
            let keys: usize = config.get("keys", 10)?;
            let per_bit: usize = config.get("encryptions", 1000)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = error_rate_experiment(&params, keys, per_bit, precision, &mut rng)?;
            let rate = rep.aggregate_rate().unwrap_or(0.0);
            return Ok(ExperimentReport {
                csv: rep.to_csv(),
                summary: format!("pke-errors: profile={} trials={} errors={} rate={rate:.6}", params.name, rep.total_trials(), rep.total_errors()),
            });
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown experiment kind {other:?} (pke-game, hash-game, dihedral, periodic, pke-errors, lattice-suite)"
            )))
        }
    };
    Ok(ExperimentReport {
        csv: records_to_csv(&records),
        summary: summary(kind, &records),
    })
}

fn check_choice(key: &str, value: &str, allowed: &[&str]) -> Result<()> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "unknown {key} {value:?} (expected one of {})",
            allowed.join(", ")
        )))
    }
}
