//! The `recur` command-line front end.
//!
//! Each subcommand writes machine-readable artifacts (into `--out DIR`, or
//! the primary one to stdout) and a short human-readable summary. A JSON
//! object passed with `--config` supplies default flag values; flags given
//! on the command line take precedence.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::ks::Caps;
use crate::torus::{parse_ratio, Frequencies, Guard, TorusPoint, DEFAULT_PRECISION_BITS, Q};
use crate::window::Window;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "recur", version, about = "Windowed experiments on sets of recurrence", args_override_self = true)]
pub struct Cli {
    /// JSON object of default flag values, keyed by long flag name.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for artifacts; without it the primary artifact goes to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Guard margin tau for strict inequalities.
    #[arg(long, global = true, default_value_t = 2f64.powi(-40))]
    pub guard: f64,

    #[command(subcommand)]
    pub command: Group,
}

#[derive(Debug, Subcommand)]
pub enum Group {
    /// Bohr sets
    #[command(subcommand)]
    Bohr(BohrCmd),
    /// Bohr-Hamming neighborhoods
    #[command(subcommand)]
    Bh(BhCmd),
    /// Simultaneous approximation and embeddings
    #[command(subcommand)]
    Kronecker(KroneckerCmd),
    /// Return-time sets of rotations
    #[command(subcommand)]
    System(SystemCmd),
    /// Density recurrence falsification
    #[command(subcommand)]
    Density(DensityCmd),
    /// Hamming-ball recurrence in Z_k^d
    #[command(subcommand)]
    Kleitman(KleitmanCmd),
    /// Staged Cantor construction and rigidity profiles
    #[command(subcommand)]
    Ks(KsCmd),
}

#[derive(Debug, Clone, Args)]
pub struct FreqArgs {
    /// Rational frequencies, comma separated (`1/3,0.25`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<String>,
    /// Use `(frac sqrt 2, frac sqrt 3, ...)` of this dimension.
    #[arg(long, value_name = "D")]
    pub sqrt_primes: Option<usize>,
    /// Frequencies as JSON (`{"certified": ...}` or `{"rational": [...]}`).
    #[arg(long, value_name = "FILE")]
    pub freq: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PRECISION_BITS)]
    pub precision_bits: u32,
}

impl FreqArgs {
    pub fn resolve(&self) -> Result<Frequencies> {
        let given = usize::from(!self.alpha.is_empty()) + usize::from(self.sqrt_primes.is_some()) + usize::from(self.freq.is_some());
        if given != 1 {
            return Err(Error::Invalid("give exactly one of --alpha, --sqrt-primes, --freq".into()));
        }
        if let Some(d) = self.sqrt_primes {
            return Ok(crate::torus::make_independent_frequencies(d, None, self.precision_bits)?.into());
        }
        if let Some(path) = &self.freq {
            let f: Frequencies = serde_json::from_str(&read_input(path)?)?;
            return Ok(f);
        }
        Frequencies::rational(self.alpha.iter().map(|s| parse_ratio(s)).collect::<Result<_>>()?)
    }
}

#[derive(Debug, Subcommand)]
pub enum BohrCmd {
    /// List `Bohr(alpha, eta)` on a window as CSV.
    Enumerate {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_parser = q_arg)]
        eta: Q,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        /// Re-check an enumeration CSV instead of producing one.
        #[arg(long, value_name = "CSV")]
        verify: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BhCmd {
    /// List `BH(alpha; eps, eta) + shift` on a window as CSV.
    Enumerate {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, value_parser = q_arg)]
        eta: Q,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        shift: i64,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        #[arg(long, value_name = "CSV")]
        verify: Option<PathBuf>,
    },
    /// Check `Bohr(eps/2) + BH(eps/2, eta) ⊆ BH(eps, eta)` on a window.
    CheckSumset {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, value_parser = q_arg)]
        eta: Q,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
    },
    /// Shift a Bohr-Hamming set onto a target point and check the cover.
    Cover {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_delimiter = ',', value_parser = point_arg, allow_hyphen_values = true)]
        z: Vec<TorusPoint>,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, value_parser = q_arg)]
        eta: Q,
        #[arg(long, default_value_t = 100_000)]
        bound: u64,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
    },
}

#[derive(Debug, Subcommand)]
pub enum KroneckerCmd {
    /// Smallest `|n| <= bound` with `||n alpha_j - z_j|| < eps` for all `j`.
    Solve {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_delimiter = ',', value_parser = point_arg, allow_hyphen_values = true)]
        target: Vec<TorusPoint>,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, default_value_t = 100_000)]
        bound: u64,
        #[arg(long, value_enum, default_value = "exhaustive")]
        strategy: StrategyArg,
        #[arg(long)]
        nonzero: bool,
    },
    /// Injective `Z_k^d -> Z` with `n_w alpha ≈ w / k`.
    Embed {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, default_value_t = 100_000)]
        bound: u64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum StrategyArg {
    Exhaustive,
    Lattice,
}

#[derive(Debug, Subcommand)]
pub enum SystemCmd {
    /// `R_c(T; D)` with `mu(D ∩ T^-n D)` per window point.
    Returns {
        /// Rotation system JSON.
        #[arg(long, value_name = "JSON")]
        spec: String,
        /// Box set `D` JSON.
        #[arg(long, value_name = "JSON")]
        set: String,
        #[arg(long, value_parser = q_arg, default_value = "0")]
        c: Q,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        #[arg(long, value_name = "CSV")]
        verify: Option<PathBuf>,
    },
    /// `S ∩ (E + R_0(T; D))` with a witness per member.
    Aura {
        #[arg(long, value_name = "JSON")]
        spec: String,
        #[arg(long, value_name = "JSON")]
        set: String,
        /// The set `S` (set expression JSON).
        #[arg(long, value_name = "JSON")]
        s: String,
        /// The set `E` (set expression JSON).
        #[arg(long, value_name = "JSON")]
        e: String,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
    },
}

#[derive(Debug, Subcommand)]
pub enum DensityCmd {
    /// Search a structured corpus for a dense set whose difference set misses `S`.
    Falsify {
        #[arg(long, value_name = "JSON")]
        set: String,
        #[arg(long, value_parser = q_arg)]
        delta: Q,
        /// Window of the corpus sets.
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum KleitmanCmd {
    /// Does every `A ⊆ Z_k^d` with `|A| >= delta k^d` have `(A - A) ∩ U_r(x)` nontrivial for all `x`?
    Verify {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        d: u32,
        #[arg(long, value_parser = q_arg)]
        delta: Q,
        #[arg(long)]
        r: u32,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest `k^d` for exhaustive mode.
        #[arg(long, default_value_t = crate::kleitman::DEFAULT_EXHAUSTIVE_CAP)]
        cap: u64,
    },
    /// Produce `a, b ∈ A` with `a - b ∈ BH(alpha; eps, eps) + m`.
    Witness {
        #[command(flatten)]
        freq: FreqArgs,
        #[arg(long, value_parser = q_arg)]
        eps: Q,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long)]
        k: u32,
        /// The set `A` (set expression JSON); defaults to the whole window.
        #[arg(long, value_name = "JSON")]
        set: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        #[arg(long, default_value_t = 100_000)]
        bound: u64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Subcommand)]
pub enum KsCmd {
    /// Run the staged construction and write stages.json, measure.csv, profile.csv.
    Build {
        #[arg(long, value_name = "JSON")]
        set: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        #[arg(long, allow_hyphen_values = true)]
        window: Window,
        /// Caps JSON; unspecified fields keep their defaults.
        #[arg(long, value_name = "JSON")]
        caps: Option<String>,
        /// Explicit targets `m_k`, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Vec<i64>,
        /// Number of targets taken from `0, 1, -1, 2, ...` when `--target` is absent.
        #[arg(long, default_value_t = 1)]
        targets: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute rigidity profiles from a stages.json.
    Profile {
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Profile every chain against this `m` instead of its own target.
        #[arg(long, allow_hyphen_values = true)]
        m: Option<i64>,
    },
}

fn q_arg(s: &str) -> std::result::Result<Q, String> {
    parse_ratio(s).map_err(|e| e.to_string())
}

fn point_arg(s: &str) -> std::result::Result<TorusPoint, String> {
    s.parse::<TorusPoint>().map_err(|e| e.to_string())
}

/// Reads a file, or returns the argument itself when it is inline JSON.
pub(crate) fn read_input(arg: impl AsRef<Path>) -> Result<String> {
    let p = arg.as_ref();
    let s = p.to_string_lossy();
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(s.into_owned());
    }
    std::fs::read_to_string(p).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", p.display())))
}

pub(crate) fn parse_caps(arg: Option<&str>) -> Result<Caps> {
    match arg {
        Some(a) => Ok(serde_json::from_str(&read_input(a)?)?),
        None => Ok(Caps::default()),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Cap(_) => EXIT_CAP,
        _ => EXIT_VALIDATION,
    }
}

/// Outcome of a subcommand before anything is written.
pub struct Output {
    /// `(file name, contents)`; the first is the primary artifact.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
    pub violations: u64,
}

impl Output {
    pub(crate) fn new(name: &str, bytes: Vec<u8>) -> Self {
        Output {
            artifacts: vec![(name.to_string(), bytes)],
            summary: Vec::new(),
            violations: 0,
        }
    }

    pub(crate) fn with(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.artifacts.push((name.to_string(), bytes));
        self
    }

    pub(crate) fn line(mut self, s: impl Into<String>) -> Self {
        self.summary.push(s.into());
        self
    }
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Array(items) => Some(items.iter().filter_map(json_scalar).collect::<Vec<_>>().join(",")),
        serde_json::Value::Object(_) => Some(v.to_string()),
        _ => None,
    }
}

const GLOBAL_VALUE_FLAGS: [&str; 4] = ["--config", "--out", "--threads", "--guard"];

/// Splices the flags from `--config` in front of the user's own flags.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(pos) = strs.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match strs[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => strs
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| Error::Invalid("--config needs a file".into()))?,
    };
    let value: serde_json::Value = serde_json::from_str(&read_input(&path)?)?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Invalid("config must be a JSON object".into()));
    };
    let mut injected: Vec<String> = Vec::new();
    let mut command: Option<Vec<String>> = None;
    for (key, v) in &map {
        if key == "command" {
            let c = json_scalar(v).ok_or_else(|| Error::Invalid("config command must be a string".into()))?;
            command = Some(c.split_whitespace().map(str::to_string).collect());
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => injected.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            other => {
                injected.push(flag);
                injected.push(json_scalar(other).expect("scalar"));
            }
        }
    }
    // position just after the two subcommand words
    let mut words = 0;
    let mut i = 1;
    let mut insert_at = None;
    while i < strs.len() {
        let a = &strs[i];
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            words += 1;
            if words == 2 {
                insert_at = Some(i + 1);
                break;
            }
        }
        i += 1;
    }
    let mut out: Vec<OsString> = args;
    match insert_at {
        Some(at) => {
            out.splice(at..at, injected.into_iter().map(OsString::from));
        }
        None => {
            let cmd = command.ok_or_else(|| Error::Invalid("no subcommand given on the command line or in the config".into()))?;
            let tail: Vec<OsString> = out.split_off(1);
            out.extend(cmd.into_iter().map(OsString::from));
            out.extend(injected.into_iter().map(OsString::from));
            out.extend(tail);
        }
    }
    Ok(out)
}

fn write_output(out: &Output, dir: Option<&Path>, elapsed: f64) -> Result<()> {
    use std::io::Write;
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            for (name, bytes) in &out.artifacts {
                std::fs::write(d.join(name), bytes)?;
            }
            let mut so = std::io::stdout().lock();
            for l in &out.summary {
                writeln!(so, "{l}")?;
            }
            for (name, _) in &out.artifacts {
                writeln!(so, "wrote {}", d.join(name).display())?;
            }
            writeln!(so, "runtime: {elapsed:.3}s")?;
        }
        None => {
            if let Some((_, bytes)) = out.artifacts.first() {
                std::io::stdout().lock().write_all(bytes)?;
            }
            let mut se = std::io::stderr().lock();
            for l in &out.summary {
                writeln!(se, "{l}")?;
            }
            writeln!(se, "runtime: {elapsed:.3}s")?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let guard = Guard::from_f64(cli.guard)?;
    let started = Instant::now();
    let output = match cli.threads {
        Some(0) => return Err(Error::Invalid("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(e.to_string()))?
            .install(|| commands::dispatch(&cli.command, guard))?,
        None => commands::dispatch(&cli.command, guard)?,
    };
    write_output(&output, cli.out.as_deref(), started.elapsed().as_secs_f64())?;
    Ok(if output.violations > 0 { EXIT_VIOLATION } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_come_before_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"eta": "0.2", "sqrt_primes": 1, "window": "0:10"}"#).unwrap();
        let args = expand_config(os(&["recur", "--config", cfg.to_str().unwrap(), "bohr", "enumerate", "--eta", "0.15"])).unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let Group::Bohr(BohrCmd::Enumerate { eta, window, .. }) = cli.command else { panic!() };
        assert_eq!(eta, Q::new(3, 20));
        assert_eq!(window, Window::new(0, 10).unwrap());
    }

    #[test]
    fn config_may_name_the_command() {
        let args = expand_config(os(&[
            "recur",
            "--config",
            r#"{"command": "kleitman verify", "k": 2, "d": 2, "delta": "1/4", "r": 1}"#,
        ]))
        .unwrap();
        assert!(Cli::try_parse_from(args).is_ok());
    }

    #[test]
    fn negative_windows_parse() {
        let cli = Cli::try_parse_from(["recur", "bohr", "enumerate", "--sqrt-primes", "1", "--eta", "0.1", "--window", "-5:5"]).unwrap();
        let Group::Bohr(BohrCmd::Enumerate { window, .. }) = cli.command else { panic!() };
        assert_eq!(window.lo, -5);
    }
}
