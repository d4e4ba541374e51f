//! Command-line flags, config files and the merged run configuration.
//!
//! Flags override config-file values, which override per-command defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qnoise::mc::TruncationMode;
use qnoise::noise::PhaseKraus;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "qnoise", version, about = "Noisy Grover/QFT simulation and fidelity estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Estimate,
    Fig1,
    Fig2,
    Fig3,
    ChannelCheck,
    GroverSim,
    QftSim,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form noise factors and fidelity bounds.
    Estimate(Flags),
    /// Rank-1 vs high-rank Grover fidelity per step.
    Fig1(Flags),
    /// QFT fidelity: Monte Carlo vs closed-form bounds over n.
    Fig2(Flags),
    /// Refined QFT bound over n for several noise rates.
    Fig3(Flags),
    /// Consistency checks between sampled noise and its Kraus channels.
    ChannelCheck(Flags),
    /// Raw Grover run (low-rank engine or Monte Carlo).
    GroverSim(Flags),
    /// Raw QFT run (low-rank engine or Monte Carlo).
    QftSim(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Estimate(f) => (CommandKind::Estimate, f),
            Command::Fig1(f) => (CommandKind::Fig1, f),
            Command::Fig2(f) => (CommandKind::Fig2, f),
            Command::Fig3(f) => (CommandKind::Fig3, f),
            Command::ChannelCheck(f) => (CommandKind::ChannelCheck, f),
            Command::GroverSim(f) => (CommandKind::GroverSim, f),
            Command::QftSim(f) => (CommandKind::QftSim, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KrausChoice {
    /// Diagonal phase-noise operators.
    Eq4,
    /// Orthogonalized (remixed) phase-noise operators.
    Eq7,
}

impl KrausChoice {
    pub fn phase_kraus(self) -> PhaseKraus {
        match self {
            KrausChoice::Eq4 => PhaseKraus::Diagonal,
            KrausChoice::Eq7 => PhaseKraus::Orthogonalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Eigen,
    Branch,
}

impl ModeChoice {
    pub fn truncation(self) -> TruncationMode {
        match self {
            ModeChoice::Eigen => TruncationMode::Eigen,
            ModeChoice::Branch => TruncationMode::Branch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Lowrank,
    Mc,
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().unwrap().get_name().to_string()
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of qubits.
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise rate (standard deviation of the over-rotation angle).
    #[arg(long)]
    pub e: Option<f64>,
    /// Grover iteration count.
    #[arg(long)]
    pub j: Option<usize>,
    /// Rank cap of the density factor.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Lower rank compared against --rank in fig1.
    #[arg(long)]
    pub rank_low: Option<usize>,
    /// Monte Carlo trajectories or draws.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phase-noise Kraus representation.
    #[arg(long, value_enum)]
    pub kraus: Option<KrausChoice>,
    /// Truncation mode of the low-rank engine.
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    /// Simulation engine for grover-sim and qft-sim.
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for Monte Carlo loops.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record after every gate instead of every iteration or block.
    #[arg(long)]
    pub per_gate: bool,
    /// Run on the maximally entangled input of a doubled register.
    #[arg(long)]
    pub choi: bool,
    /// Include the Grover bound (estimate).
    #[arg(long)]
    pub grover: bool,
    /// Include the QFT bounds (estimate).
    #[arg(long)]
    pub qft: bool,
    /// Marked basis state for Grover; defaults to all ones.
    #[arg(long)]
    pub marked: Option<usize>,
    /// Haar-random inputs per QFT trajectory.
    #[arg(long)]
    pub inputs: Option<usize>,
    /// Comma-separated qubit counts.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Comma-separated noise rates.
    #[arg(long, value_delimiter = ',')]
    pub e_list: Option<Vec<f64>>,
}

/// Effective parameters after merging flags over a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub n: Option<usize>,
    pub e: Option<f64>,
    pub j: Option<usize>,
    pub rank: Option<usize>,
    pub rank_low: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub kraus: Option<KrausChoice>,
    pub mode: Option<ModeChoice>,
    pub engine: Option<Engine>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub per_gate: Option<bool>,
    pub choi: Option<bool>,
    pub grover: Option<bool>,
    pub qft: Option<bool>,
    pub marked: Option<usize>,
    pub inputs: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub e_list: Option<Vec<f64>>,
}

fn set(flag: bool) -> Option<bool> {
    flag.then_some(true)
}

impl Settings {
    pub fn from_flags(f: &Flags) -> Self {
        Settings {
            n: f.n,
            e: f.e,
            j: f.j,
            rank: f.rank,
            rank_low: f.rank_low,
            trials: f.trials,
            seed: f.seed,
            kraus: f.kraus,
            mode: f.mode,
            engine: f.engine,
            out: f.out.clone(),
            workers: f.workers,
            per_gate: set(f.per_gate),
            choi: set(f.choi),
            grover: set(f.grover),
            qft: set(f.qft),
            marked: f.marked,
            inputs: f.inputs,
            n_list: f.n_list.clone(),
            e_list: f.e_list.clone(),
        }
    }

    /// Flags first, then the config file named by `--config`, if any.
    pub fn resolve(f: &Flags) -> Result<Self, CliError> {
        let flags = Settings::from_flags(f);
        match &f.config {
            Some(path) => Ok(flags.over(Settings::from_file(path)?)),
            None => Ok(flags),
        }
    }

    /// Fields of `self` where set, `lower` elsewhere.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            n: self.n.or(lower.n),
            e: self.e.or(lower.e),
            j: self.j.or(lower.j),
            rank: self.rank.or(lower.rank),
            rank_low: self.rank_low.or(lower.rank_low),
            trials: self.trials.or(lower.trials),
            seed: self.seed.or(lower.seed),
            kraus: self.kraus.or(lower.kraus),
            mode: self.mode.or(lower.mode),
            engine: self.engine.or(lower.engine),
            out: self.out.or(lower.out),
            workers: self.workers.or(lower.workers),
            per_gate: self.per_gate.or(lower.per_gate),
            choi: self.choi.or(lower.choi),
            grover: self.grover.or(lower.grover),
            qft: self.qft.or(lower.qft),
            marked: self.marked.or(lower.marked),
            inputs: self.inputs.or(lower.inputs),
            n_list: self.n_list.or(lower.n_list),
            e_list: self.e_list.or(lower.e_list),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| CliError::Usage(format!("config: cannot read {}: {err}", path.display())))?;
        Settings::parse_config(&text)
    }

    /// Parses `key = value` lines. `#` starts a comment; keys accept `-` or
    /// `_` as separator.
    pub fn parse_config(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| CliError::Usage(format!("config line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            s.set_key(&key, value).map_err(bad)?;
        }
        Ok(s)
    }

    fn set_key(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "n" => self.n = Some(parse(key, value)?),
            "e" => self.e = Some(parse(key, value)?),
            "j" => self.j = Some(parse(key, value)?),
            "rank" => self.rank = Some(parse(key, value)?),
            "rank_low" => self.rank_low = Some(parse(key, value)?),
            "trials" => self.trials = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "kraus" => self.kraus = Some(parse_enum(key, value)?),
            "mode" => self.mode = Some(parse_enum(key, value)?),
            "engine" => self.engine = Some(parse_enum(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse(key, value)?),
            "per_gate" => self.per_gate = Some(parse(key, value)?),
            "choi" => self.choi = Some(parse(key, value)?),
            "grover" => self.grover = Some(parse(key, value)?),
            "qft" => self.qft = Some(parse(key, value)?),
            "marked" => self.marked = Some(parse(key, value)?),
            "inputs" => self.inputs = Some(parse(key, value)?),
            "n_list" => self.n_list = Some(parse_list(key, value)?),
            "e_list" => self.e_list = Some(parse_list(key, value)?),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|err| format!("{key}: invalid value `{value}`: {err}"))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, String> {
    T::from_str(value, true).map_err(|_| {
        let names: Vec<String> = T::value_variants().iter().map(|v| value_name(v.clone())).collect();
        format!("{key}: `{value}` is not one of {}", names.join("|"))
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Renders an effective parameter for the stderr echo.
pub fn show<T: ValueEnum>(v: T) -> String {
    value_name(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config_lines() {
        let s = Settings::parse_config(
            "# sweep\n n = 6 \ne=0.05 # inline\nkraus = EQ4\nper-gate = true\nn_list = 2, 3,4\nout = a b.csv\n\n",
        )
        .unwrap();
        assert_eq!(s.n, Some(6));
        assert_eq!(s.e, Some(0.05));
        assert_eq!(s.kraus, Some(KrausChoice::Eq4));
        assert_eq!(s.per_gate, Some(true));
        assert_eq!(s.n_list, Some(vec![2, 3, 4]));
        assert_eq!(s.out, Some(PathBuf::from("a b.csv")));
    }

    #[test]
    fn config_errors_name_the_line() {
        for bad in ["n 4", "bogus = 1", "n = -1", "mode = fast", "e_list = 0.1,x"] {
            let err = Settings::parse_config(&format!("\n{bad}\n")).unwrap_err();
            assert!(err.to_string().contains("line 2"), "{err}");
        }
    }

    #[test]
    fn flags_override_config() {
        let file = Settings::parse_config("n = 6\ne = 0.05\nseed = 3\nchoi = true").unwrap();
        let flags = Settings {
            n: Some(4),
            per_gate: Some(true),
            ..Settings::default()
        };
        let s = flags.over(file);
        assert_eq!((s.n, s.e, s.seed), (Some(4), Some(0.05), Some(3)));
        assert_eq!((s.per_gate, s.choi), (Some(true), Some(true)));
    }
}
