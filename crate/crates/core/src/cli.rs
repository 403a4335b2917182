//! Command-line front end. Exit codes: 0 success, 1 refusal or I/O
//! failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bounds::{bound_report, BoundParams, SumReport};
use crate::cayley::{independence_number, is_independent};
use crate::error::{Error, Result};
use crate::fingerprint::{fingerprint_pipeline, PipelineConfig};
use crate::freiman::{check_observation2, freiman_dimension, freiman_dimension_oracle, OracleConfig};
use crate::gap::{log_count_gaps, Gap};
use crate::harness::{describe, parse_key_values, parse_list, run_experiment, ExperimentConfig, SEED_ENV};
use crate::zn::{doubling_sigma, sample_p_random, ZnSet};

#[derive(Parser, Debug)]
#[command(name = "cayleyfp", version, about = "Cayley sum graphs, sumsets and union bounds over Z_n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a p-random subset of Z_n
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        /// defaults to $CAYLEYFP_SEED, then 0
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Independence number of the Cayley sum graph of a set
    Alpha {
        #[arg(long)]
        n: usize,
        /// connection set as a comma list; sampled from --p when absent
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// time budget in seconds
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Check that a candidate set is independent in the Cayley sum graph
    Independent {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        set: String,
        #[arg(long)]
        candidate: String,
    },
    /// Freiman dimension and doubling of a set
    Dimension {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        set: String,
        /// also run the box-search oracle (sets of at most 6 elements)
        #[arg(long)]
        oracle: bool,
    },
    /// Fingerprint pipeline report, as JSON
    Fingerprint {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        set: String,
        #[arg(long, default_value_t = 0.2)]
        a: f64,
        #[arg(long, default_value_t = 2)]
        c: usize,
        #[arg(long, default_value_t = 1.0)]
        xi: f64,
    },
    /// Generalised arithmetic progressions, written n;v0;v1,...;N1,...
    Gap {
        spec: Option<String>,
        #[arg(long)]
        contains: Option<String>,
        #[arg(long)]
        normalize: bool,
        /// count progressions in Z_N instead of inspecting one
        #[arg(long, requires_all = ["dim", "log_budget"], conflicts_with = "spec")]
        count_n: Option<u64>,
        #[arg(long)]
        dim: Option<usize>,
        /// natural log of the size budget
        #[arg(long)]
        log_budget: Option<f64>,
    },
    /// Union-bound sums in log space
    Bounds {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Which::All)]
        what: Which,
        #[arg(long, default_value_t = 0.05)]
        alpha_slack: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        cf: f64,
        /// override the 2 + 4 delta coefficient in k
        #[arg(long)]
        k_coef: Option<f64>,
        /// print every term
        #[arg(long)]
        table: bool,
        #[arg(long)]
        json: bool,
    },
    /// Seeded Monte-Carlo experiment; flags override the config file
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        trials: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        budget: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        summary: Option<String>,
        /// comma list of alpha, fingerprint, bounds, dimension
        #[arg(long)]
        modes: Option<String>,
        #[arg(long)]
        threads: Option<String>,
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        timing: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    X1,
    X2,
    X3,
    All,
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn seed_or_env(seed: Option<u64>) -> Result<u64> {
    match (seed, env_seed()) {
        (Some(s), _) => Ok(s),
        (None, Some(s)) => s.parse().map_err(|_| Error::Parameter(format!("bad {SEED_ENV}: {s:?}"))),
        (None, None) => Ok(0),
    }
}

fn zn(n: usize, list: &str) -> Result<ZnSet> {
    ZnSet::new(n, parse_list(list)?)
}

fn residues(s: &ZnSet) -> String {
    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Refusal(_) | Error::Io(_) => 1,
                Error::Parameter(_) | Error::ModulusMismatch { .. } => 2,
            }
        }
    }
}

fn print_sum(out: &mut dyn Write, name: &str, r: &SumReport, table: bool) -> Result<()> {
    writeln!(
        out,
        "{name} log_sum={} terms={} empty_range={} vanishes={}",
        r.log_sum,
        r.terms.len(),
        r.empty_range,
        r.vanishes
    )?;
    if table {
        for (i, t) in &r.terms {
            writeln!(out, "  {i:>8}  {t:>22.12}")?;
        }
    }
    Ok(())
}

fn run(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Sample { n, p, seed } => {
            let s = sample_p_random(n, p, seed_or_env(seed)?)?;
            writeln!(out, "size={}", s.len())?;
            writeln!(out, "set={}", residues(&s))?;
        }
        Command::Alpha { n, set, p, seed, budget } => {
            let s = match (set, p) {
                (Some(list), _) => zn(n, &list)?,
                (None, Some(p)) => sample_p_random(n, p, seed_or_env(seed)?)?,
                (None, None) => return Err(Error::Parameter("give --set or --p".into())),
            };
            let budget = match budget {
                Some(b) if b > 0.0 && b.is_finite() => Some(Duration::from_secs_f64(b)),
                Some(b) => return Err(Error::Parameter(format!("budget must be positive, got {b}"))),
                None => None,
            };
            let r = independence_number(&s, budget);
            writeln!(out, "alpha={}", r.alpha)?;
            writeln!(out, "exact={}", r.exact)?;
            writeln!(out, "nodes={}", r.node_count)?;
            writeln!(out, "witness={}", residues(&r.witness))?;
        }
        Command::Independent { n, set, candidate } => {
            let ok = is_independent(&zn(n, &candidate)?, &zn(n, &set)?)?;
            writeln!(out, "independent={ok}")?;
        }
        Command::Dimension { n, set, oracle } => {
            let a = zn(n, &set)?;
            writeln!(out, "dim={}", freiman_dimension(&a)?)?;
            if oracle {
                writeln!(out, "oracle_dim={}", freiman_dimension_oracle(&a, OracleConfig::default())?)?;
            }
            let sigma = doubling_sigma(&a)?;
            writeln!(out, "sigma={}/{}", sigma.numer(), sigma.denom())?;
            writeln!(out, "dim_below_2sigma={}", check_observation2(&a)?.ok)?;
        }
        Command::Fingerprint { n, set, a, c, xi } => {
            let cfg = PipelineConfig { a, c, xi, phase_two_cap: None };
            let rep = fingerprint_pipeline(&zn(n, &set)?, cfg)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&rep).expect("report serializes"))?;
        }
        Command::Gap { spec, contains, normalize, count_n, dim, log_budget } => {
            if let Some(n) = count_n {
                let d = dim.expect("clap enforces --dim");
                let b = log_budget.expect("clap enforces --log-budget");
                writeln!(out, "log_count={}", log_count_gaps(n, d, b)?)?;
                return Ok(());
            }
            let Some(spec) = spec else {
                return Err(Error::Parameter("give a progression or --count-n".into()));
            };
            let mut g: Gap = spec.parse()?;
            if normalize {
                g = g.normalize_pow2();
                writeln!(out, "normalized={g}")?;
            }
            writeln!(out, "size={}", g.size())?;
            match contains {
                Some(list) => {
                    let a = zn(g.modulus(), &list)?;
                    writeln!(out, "contains={}", g.contains(&a)?)?;
                }
                None => writeln!(out, "elements={}", residues(&g.elements()?))?,
            }
        }
        Command::Bounds { n, p, delta, what, alpha_slack, eps, cf, k_coef, table, json } => {
            let params = BoundParams {
                n,
                p,
                delta,
                alpha_slack,
                eps_exponent: eps,
                c_f: cf,
                k_coefficient: k_coef,
            };
            let rep = bound_report(&params)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&rep).expect("report serializes"))?;
                return Ok(());
            }
            writeln!(out, "k={}", rep.k)?;
            let sums = [(Which::X1, "x1", &rep.x1), (Which::X2, "x2", &rep.x2), (Which::X3, "x3", &rep.x3)];
            for (w, name, r) in sums {
                if what == Which::All || what == w {
                    print_sum(out, name, r, table)?;
                }
            }
            for note in &rep.notes {
                writeln!(out, "note: {note}")?;
            }
        }
        Command::Experiment {
            config,
            n,
            p,
            trials,
            seed,
            budget,
            out: out_path,
            summary,
            modes,
            threads,
            set,
            delta,
            a,
            timing,
        } => {
            let mut map = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        Error::Parameter(format!("cannot read config {}: {e}", path.display()))
                    })?;
                    parse_key_values(&text)?
                }
                None => BTreeMap::new(),
            };
            let flags = [
                ("n", n),
                ("p", p),
                ("trials", trials),
                ("seed", seed),
                ("budget", budget),
                ("out", out_path),
                ("summary", summary),
                ("modes", modes),
                ("threads", threads),
                ("set", set),
                ("delta", delta),
                ("a", a),
                ("timing", timing),
            ];
            for (k, v) in flags {
                if let Some(v) = v {
                    map.insert(k.to_string(), v);
                }
            }
            let cfg = ExperimentConfig::from_map(&map, env_seed().as_deref())?;
            let summary = match &cfg.out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    let s = run_experiment(&cfg, &mut w)?;
                    w.flush()?;
                    s
                }
                None => run_experiment(&cfg, out)?,
            };
            let summary_path = cfg.summary.clone().or_else(|| {
                cfg.out.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".summary.json");
                    PathBuf::from(s)
                })
            });
            match summary_path {
                Some(path) => std::fs::write(path, summary.to_json() + "\n")?,
                None => write!(err, "{}", describe(&summary))?,
            }
            if cfg.out.is_some() {
                write!(out, "{}", describe(&summary))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("cayleyfp").chain(args.iter().copied());
        let code = dispatch(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn alpha_of_a_fixed_set() {
        let (code, out, _) = call(&["alpha", "--n", "5", "--set", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().next(), Some("alpha=3"));
    }

    #[test]
    fn bounds_x3() {
        let (code, out, _) = call(&["bounds", "--n", "1009", "--p", "0.5", "--delta", "0.1", "--what", "x3"]);
        assert_eq!(code, 0);
        let line = out.lines().find(|l| l.starts_with("x3 ")).unwrap();
        let v: f64 = line.split_whitespace().nth(1).unwrap().trim_start_matches("log_sum=").parse().unwrap();
        assert!((v - 2.534717349290353).abs() < 1e-9);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["experiment", "--config", "missing.file"]).0, 2);
        assert_eq!(call(&["alpha", "--bogus"]).0, 2);
        assert_eq!(call(&[]).0, 2);
        let (code, _, err) = call(&["experiment", "--n", "1001"]);
        assert_eq!(code, 1);
        assert!(err.contains("divisible by 7"));
        assert_eq!(call(&["dimension", "--n", "1009", "--set", &(0..70).map(|x| x.to_string()).collect::<Vec<_>>().join(",")]).0, 1);
        assert_eq!(call(&["alpha", "--n", "5", "--set", "9"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn small_commands() {
        let (_, out, _) = call(&["independent", "--n", "9", "--set", "0,2,4", "--candidate", "1,3"]);
        assert_eq!(out.trim(), "independent=false");
        let (_, out, _) = call(&["dimension", "--n", "101", "--set", "0,1,3", "--oracle"]);
        assert!(out.contains("dim=2") && out.contains("oracle_dim=2"));
        let (_, out, _) = call(&["gap", "100;0;2;3"]);
        assert!(out.contains("elements=0,2,4,6,94,96,98"));
        let (_, out, _) = call(&["gap", "1000;0;1,50;3,5", "--normalize", "--contains", "4"]);
        assert!(out.contains("normalized=1000;0;1,50;4,8") && out.contains("contains=true"));
        let (code, out, _) = call(&["gap", "--count-n", "1009", "--dim", "1", "--log-budget", "3"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("log_count="));
        let (code, out, _) = call(&["fingerprint", "--n", "1009", "--set", "0,1,3,7,12", "--a", "0.3"]);
        assert_eq!(code, 0);
        assert!(out.contains("\"d\": 4"));
        let (code, out, _) = call(&["sample", "--n", "101", "--p", "0.5", "--seed", "3"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("size="));
    }

    #[test]
    fn experiment_writes_csv_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.cfg");
        std::fs::write(&cfg, "n = 101\ntrials = 4\nseed = 3\nthreads = 4\n").unwrap();
        let csv = dir.path().join("rows.csv");
        let (code, _, err) =
            call(&["experiment", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--trials", "5"]);
        assert_eq!(code, 0, "{err}");
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 6);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("rows.csv.summary.json")).unwrap()).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["trials"], 5);
    }
}
