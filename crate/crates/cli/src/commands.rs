//! Command implementations. Each command is first resolved into a job with
//! every parameter validated, then executed.

use qnoise::circuits::{build_grover, build_qft, optimal_grover_iterations, Circuit, GroverSpec, QftSpec, MAX_QUBITS};
use qnoise::estimate::{
    f_parameter, grover_fidelity_bound, lambda1, lambda2, p_hadamard, p_phase, p_phase_refined, qft_accuracy_table,
    qft_fidelity_naive, qft_fidelity_refined, EstimateInput,
};
use qnoise::lowrank::maximally_entangled;
use qnoise::mc::{run_grover_mc, run_lowrank_experiment, run_qft_mc, ExperimentOptions, ExperimentRecord};
use qnoise::noise::NoiseChannels;
use qnoise::qcore::{haar_random_state, PureState};

use crate::checks::{channel_check, ChannelSource};
use crate::config::{show, CommandKind, Engine, KrausChoice, ModeChoice, Settings};
use crate::output::{Cell, Table};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_E: f64 = 0.01;
pub const DEFAULT_TRIALS: usize = 2000;
pub const CHECK_TRIALS: usize = 100_000;
pub const CHECK_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const FIG3_N: [usize; 13] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000];
pub const FIG3_E: [f64; 3] = [1e-4, 1e-3, 1e-2];
/// Largest register fig1 accepts.
pub const FIG1_MAX_N: usize = 14;
/// Cap on `rank * 2^qubits` complex amplitudes held by the low-rank engine.
pub const MAX_FACTOR_AMPLITUDES: usize = 1 << 26;

/// Result of a command: its CSV table and, for checks, a description of
/// what failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub breach: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Outcome { table, breach: None }
    }
}

fn rate(name: &str, e: f64) -> Result<f64, CliError> {
    if !e.is_finite() || e < 0.0 {
        return Err(CliError::Usage(format!("{name}: must be finite and non-negative, got {e}")));
    }
    Ok(e)
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("{name}: must be at least 1")));
    }
    Ok(v)
}

fn qubits(n: usize) -> Result<usize, CliError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(CliError::Usage(format!("n: {n} is outside 1..={MAX_QUBITS}")));
    }
    Ok(n)
}

/// Refuses runs whose density factor would exceed [`MAX_FACTOR_AMPLITUDES`].
pub fn guard_memory(register: usize, rank: usize) -> Result<(), CliError> {
    let fits = register <= MAX_QUBITS && rank.checked_mul(1usize << register).is_some_and(|a| a <= MAX_FACTOR_AMPLITUDES);
    if !fits {
        let gib = rank as f64 * (register as f64).exp2() * 16.0 / (1u64 << 30) as f64;
        return Err(CliError::Resource(format!(
            "a rank-{rank} factor on {register} qubits needs about {gib:.1} GiB; refusing"
        )));
    }
    Ok(())
}

fn marked_state(n: usize, marked: Option<usize>) -> Result<usize, CliError> {
    let m = marked.unwrap_or((1 << n) - 1);
    if m >> n != 0 {
        return Err(CliError::Usage(format!("marked: {m} does not fit in {n} qubits")));
    }
    Ok(m)
}

/// Engine parameters shared by the low-rank runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LowrankParams {
    pub n: usize,
    pub e: f64,
    pub rank: usize,
    pub mode: ModeChoice,
    pub kraus: KrausChoice,
    pub per_gate: bool,
    pub choi: bool,
}

impl LowrankParams {
    fn resolve(s: &Settings, n_default: usize, rank_default: usize) -> Result<Self, CliError> {
        let n = qubits(s.n.unwrap_or(n_default))?;
        let p = LowrankParams {
            n,
            e: rate("e", s.e.unwrap_or(DEFAULT_E))?,
            rank: positive("rank", s.rank.unwrap_or(rank_default))?,
            mode: s.mode.unwrap_or(ModeChoice::Eigen),
            kraus: s.kraus.unwrap_or(KrausChoice::Eq7),
            per_gate: s.per_gate.unwrap_or(false),
            choi: s.choi.unwrap_or(false),
        };
        guard_memory(p.register(), p.rank)?;
        Ok(p)
    }

    fn register(&self) -> usize {
        if self.choi {
            2 * self.n
        } else {
            self.n
        }
    }

    fn echo(&self, out: &mut Vec<(&'static str, String)>) {
        out.push(("n", self.n.to_string()));
        out.push(("e", self.e.to_string()));
        out.push(("rank", self.rank.to_string()));
        out.push(("mode", show(self.mode)));
        out.push(("kraus", show(self.kraus)));
        out.push(("per_gate", self.per_gate.to_string()));
        out.push(("choi", self.choi.to_string()));
    }

    fn run(&self, circuit: &Circuit, input: &PureState, rank: usize, marked: Option<usize>) -> Result<Vec<ExperimentRecord>, CliError> {
        let channels = NoiseChannels::new(self.e, self.kraus.phase_kraus())?;
        let opts = ExperimentOptions {
            mode: self.mode.truncation(),
            rank,
            per_gate: self.per_gate,
            marked,
        };
        if self.choi {
            let lifted = circuit.lifted()?;
            Ok(run_lowrank_experiment(&lifted, &channels, opts, &maximally_entangled(self.n)?)?)
        } else {
            Ok(run_lowrank_experiment(circuit, &channels, opts, input)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateJob {
    pub n: usize,
    pub e: f64,
    pub grover_j: Option<usize>,
    pub qft: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Job {
    pub params: LowrankParams,
    pub rank_low: usize,
    pub j: usize,
    pub marked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QftMcJob {
    pub n_list: Vec<usize>,
    pub e: f64,
    pub trials: usize,
    pub inputs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Job {
    pub n_list: Vec<usize>,
    pub e_list: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CheckJob {
    pub e_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub source: ChannelSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverLowrankJob {
    pub params: LowrankParams,
    pub j: usize,
    pub marked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverMcJob {
    pub n: usize,
    pub e: f64,
    pub j: usize,
    pub marked: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QftLowrankJob {
    pub params: LowrankParams,
    pub seed: u64,
}

/// A fully validated command.
#[derive(Debug, Clone)]
pub enum Job {
    Estimate(EstimateJob),
    Fig1(Fig1Job),
    Fig2(QftMcJob),
    Fig3(Fig3Job),
    ChannelCheck(CheckJob),
    GroverLowrank(GroverLowrankJob),
    GroverMc(GroverMcJob),
    QftLowrank(QftLowrankJob),
    QftMc(QftMcJob),
}

fn optimal(n: usize) -> Result<usize, CliError> {
    Ok(optimal_grover_iterations(n)?)
}

impl Job {
    pub fn resolve(kind: CommandKind, s: &Settings, source: ChannelSource) -> Result<Job, CliError> {
        if let Some(w) = s.workers {
            positive("workers", w)?;
        }
        let seed = s.seed.unwrap_or(DEFAULT_SEED);
        let trials = |default| positive("trials", s.trials.unwrap_or(default));
        match kind {
            CommandKind::Estimate => {
                let n = positive("n", s.n.unwrap_or(12))?;
                let e = rate("e", s.e.unwrap_or(DEFAULT_E))?;
                let (grover, qft) = match (s.grover.unwrap_or(false), s.qft.unwrap_or(false)) {
                    (false, false) => (true, true),
                    flags => flags,
                };
                let grover_j = if grover {
                    let n = qubits(n)?;
                    Some(match s.j {
                        Some(j) => j,
                        None => optimal(n)?,
                    })
                } else {
                    None
                };
                Ok(Job::Estimate(EstimateJob { n, e, grover_j, qft }))
            }
            CommandKind::Fig1 => {
                let n = s.n.unwrap_or(12);
                let rank = s.rank.unwrap_or(30);
                if n > FIG1_MAX_N {
                    return Err(CliError::Resource(format!(
                        "fig1: n = {n} exceeds the {FIG1_MAX_N}-qubit limit for rank-{rank} runs"
                    )));
                }
                let params = LowrankParams::resolve(s, 12, 30)?;
                let rank_low = positive("rank_low", s.rank_low.unwrap_or(1))?;
                let j = match s.j {
                    Some(j) => j,
                    None => optimal(params.n)?,
                };
                let marked = marked_state(params.n, s.marked)?;
                Ok(Job::Fig1(Fig1Job { params, rank_low, j, marked }))
            }
            CommandKind::Fig2 => {
                let n_list = s.n_list.clone().unwrap_or_else(|| (2..=10).collect());
                Ok(Job::Fig2(qft_mc_job(s, n_list, trials(DEFAULT_TRIALS)?, seed)?))
            }
            CommandKind::Fig3 => {
                let n_list = s.n_list.clone().unwrap_or_else(|| FIG3_N.to_vec());
                let e_list = s.e_list.clone().unwrap_or_else(|| FIG3_E.to_vec());
                check_lists(&n_list, &e_list)?;
                Ok(Job::Fig3(Fig3Job { n_list, e_list }))
            }
            CommandKind::ChannelCheck => {
                let e_list = s.e_list.clone().unwrap_or_else(|| CHECK_GRID.to_vec());
                check_lists(&[1], &e_list)?;
                Ok(Job::ChannelCheck(CheckJob {
                    e_list,
                    trials: trials(CHECK_TRIALS)?,
                    seed,
                    source,
                }))
            }
            CommandKind::GroverSim => match s.engine.unwrap_or(Engine::Lowrank) {
                Engine::Lowrank => {
                    let params = LowrankParams::resolve(s, 8, 1)?;
                    let j = match s.j {
                        Some(j) => j,
                        None => optimal(params.n)?,
                    };
                    let marked = marked_state(params.n, s.marked)?;
                    Ok(Job::GroverLowrank(GroverLowrankJob { params, j, marked }))
                }
                Engine::Mc => {
                    let n = qubits(s.n.unwrap_or(8))?;
                    guard_memory(n, 1)?;
                    let j = match s.j {
                        Some(j) => j,
                        None => optimal(n)?,
                    };
                    Ok(Job::GroverMc(GroverMcJob {
                        n,
                        e: rate("e", s.e.unwrap_or(DEFAULT_E))?,
                        j,
                        marked: marked_state(n, s.marked)?,
                        trials: trials(DEFAULT_TRIALS)?,
                        seed,
                    }))
                }
            },
            CommandKind::QftSim => match s.engine.unwrap_or(Engine::Lowrank) {
                Engine::Lowrank => Ok(Job::QftLowrank(QftLowrankJob {
                    params: LowrankParams::resolve(s, 6, 1)?,
                    seed,
                })),
                Engine::Mc => {
                    let n = s.n.unwrap_or(6);
                    Ok(Job::QftMc(qft_mc_job(s, vec![n], trials(DEFAULT_TRIALS)?, seed)?))
                }
            },
        }
    }

    /// Effective parameters, for the stderr echo.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        match self {
            Job::Estimate(j) => {
                out.push(("n", j.n.to_string()));
                out.push(("e", j.e.to_string()));
                out.push(("grover", j.grover_j.is_some().to_string()));
                if let Some(it) = j.grover_j {
                    out.push(("j", it.to_string()));
                }
                out.push(("qft", j.qft.to_string()));
            }
            Job::Fig1(j) => {
                j.params.echo(&mut out);
                out.push(("rank_low", j.rank_low.to_string()));
                out.push(("j", j.j.to_string()));
                out.push(("marked", j.marked.to_string()));
            }
            Job::Fig2(j) | Job::QftMc(j) => {
                out.push(("engine", "mc".into()));
                out.push(("n_list", join(&j.n_list)));
                out.push(("e", j.e.to_string()));
                out.push(("trials", j.trials.to_string()));
                out.push(("inputs", j.inputs.to_string()));
                out.push(("seed", j.seed.to_string()));
            }
            Job::Fig3(j) => {
                out.push(("n_list", join(&j.n_list)));
                out.push(("e_list", join(&j.e_list)));
            }
            Job::ChannelCheck(j) => {
                out.push(("e_list", join(&j.e_list)));
                out.push(("trials", j.trials.to_string()));
                out.push(("seed", j.seed.to_string()));
            }
            Job::GroverLowrank(j) => {
                out.push(("engine", "lowrank".into()));
                j.params.echo(&mut out);
                out.push(("j", j.j.to_string()));
                out.push(("marked", j.marked.to_string()));
            }
            Job::GroverMc(j) => {
                out.push(("engine", "mc".into()));
                out.push(("n", j.n.to_string()));
                out.push(("e", j.e.to_string()));
                out.push(("j", j.j.to_string()));
                out.push(("marked", j.marked.to_string()));
                out.push(("trials", j.trials.to_string()));
                out.push(("seed", j.seed.to_string()));
            }
            Job::QftLowrank(j) => {
                out.push(("engine", "lowrank".into()));
                j.params.echo(&mut out);
                out.push(("seed", j.seed.to_string()));
            }
        }
        out
    }

    pub fn execute(&self) -> Result<Outcome, CliError> {
        match self {
            Job::Estimate(j) => estimate(j).map(Outcome::from),
            Job::Fig1(j) => fig1(j).map(Outcome::from),
            Job::Fig2(j) | Job::QftMc(j) => qft_mc(j).map(Outcome::from),
            Job::Fig3(j) => fig3(j).map(Outcome::from),
            Job::ChannelCheck(j) => channel_check(&j.e_list, j.trials, j.seed, j.source),
            Job::GroverLowrank(j) => grover_lowrank(j).map(Outcome::from),
            Job::GroverMc(j) => grover_mc(j).map(Outcome::from),
            Job::QftLowrank(j) => qft_lowrank(j).map(Outcome::from),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn check_lists(n_list: &[usize], e_list: &[f64]) -> Result<(), CliError> {
    if n_list.is_empty() {
        return Err(CliError::Usage("n_list: must not be empty".into()));
    }
    if e_list.is_empty() {
        return Err(CliError::Usage("e_list: must not be empty".into()));
    }
    for &n in n_list {
        positive("n_list", n)?;
    }
    for &e in e_list {
        rate("e_list", e)?;
    }
    Ok(())
}

fn qft_mc_job(s: &Settings, n_list: Vec<usize>, trials: usize, seed: u64) -> Result<QftMcJob, CliError> {
    check_lists(&n_list, &[0.0])?;
    for &n in &n_list {
        qubits(n)?;
        guard_memory(n, 1)?;
    }
    Ok(QftMcJob {
        n_list,
        e: rate("e", s.e.unwrap_or(DEFAULT_E))?,
        trials,
        inputs: positive("inputs", s.inputs.unwrap_or(1))?,
        seed,
    })
}

fn estimate(job: &EstimateJob) -> Result<Table, CliError> {
    let e = job.e;
    let mut t = Table::new(["quantity", "value"]);
    let mut row = |name: &str, v: Cell| t.push(vec![name.into(), v]);
    row("lambda1", lambda1(e).into());
    row("lambda2", lambda2(e).into());
    row("f", f_parameter(e).into());
    row("P", p_phase(e).into());
    row("P_H", p_hadamard(e).into());
    row("P_R", p_phase(e).into());
    row("P_R_refined", p_phase_refined(e).into());
    if let Some(j) = job.grover_j {
        row("grover_j", j.into());
        row("grover_bound", grover_fidelity_bound(EstimateInput::new(job.n, e, j)?)?.into());
    }
    if job.qft {
        row("qft_naive", qft_fidelity_naive(job.n, e)?.into());
        row("qft_refined", qft_fidelity_refined(job.n, e)?.into());
    }
    Ok(t)
}

fn fig1(job: &Fig1Job) -> Result<Table, CliError> {
    let p = &job.params;
    let circuit = build_grover(GroverSpec::new(p.n, job.marked, job.j)?)?;
    let input = PureState::zero(p.n)?;
    let (low, high) = rayon::join(
        || p.run(&circuit, &input, job.rank_low, None),
        || p.run(&circuit, &input, p.rank, None),
    );
    let (low, high) = (low?, high?);
    let mut t = Table::new([
        "step".to_string(),
        format!("fid_rank{}", job.rank_low),
        format!("fid_rank{}", p.rank),
        "abs_gap".to_string(),
    ]);
    for (a, b) in low.iter().zip(&high) {
        // The iteration sweep starts after the first Grover iteration.
        if !p.per_gate && a.step == 0 {
            continue;
        }
        t.push(vec![a.step.into(), a.fidelity.into(), b.fidelity.into(), (a.fidelity - b.fidelity).abs().into()]);
    }
    Ok(t)
}

fn qft_mc(job: &QftMcJob) -> Result<Table, CliError> {
    let mut t = Table::new(["n", "mc_mean", "mc_stderr", "naive_eq6", "refined_eq8"]);
    for &n in &job.n_list {
        let stats = run_qft_mc(QftSpec::new(n)?, job.e, job.trials, job.inputs, job.seed)?;
        t.push(vec![
            n.into(),
            stats.mean.into(),
            stats.stderr.into(),
            qft_fidelity_naive(n, job.e)?.into(),
            qft_fidelity_refined(n, job.e)?.into(),
        ]);
    }
    Ok(t)
}

fn fig3(job: &Fig3Job) -> Result<Table, CliError> {
    let table = qft_accuracy_table(&job.n_list, &job.e_list)?;
    let mut header = vec!["n".to_string()];
    header.extend(job.e_list.iter().map(|e| format!("refined_e{e}")));
    let mut t = Table::new(header);
    for (k, &n) in job.n_list.iter().enumerate() {
        let mut row: Vec<Cell> = vec![n.into()];
        row.extend(table.iter().map(|col| Cell::Float(col[k])));
        t.push(row);
    }
    Ok(t)
}

fn grover_lowrank(job: &GroverLowrankJob) -> Result<Table, CliError> {
    let p = &job.params;
    let circuit = build_grover(GroverSpec::new(p.n, job.marked, job.j)?)?;
    let marked = (!p.choi).then_some(job.marked);
    let records = p.run(&circuit, &PureState::zero(p.n)?, p.rank, marked)?;
    let with_bound = !p.choi && !p.per_gate;
    let mut header = vec!["step", "gates", "fidelity", "trace"];
    if !p.choi {
        header.push("success");
    }
    if with_bound {
        header.push("bound");
    }
    let mut t = Table::new(header);
    for r in &records {
        let mut row: Vec<Cell> = vec![r.step.into(), r.gates.into(), r.fidelity.into(), r.trace.into()];
        if let Some(s) = r.success {
            row.push(s.into());
        }
        if with_bound {
            row.push(grover_fidelity_bound(EstimateInput::new(p.n, p.e, r.step)?)?.into());
        }
        t.push(row);
    }
    Ok(t)
}

fn grover_mc(job: &GroverMcJob) -> Result<Table, CliError> {
    let mut t = Table::new(["j", "mc_mean", "mc_stderr", "bound"]);
    for j in 0..=job.j {
        let stats = run_grover_mc(GroverSpec::new(job.n, job.marked, j)?, job.e, job.trials, job.seed)?;
        let bound = grover_fidelity_bound(EstimateInput::new(job.n, job.e, j)?)?;
        t.push(vec![j.into(), stats.mean.into(), stats.stderr.into(), bound.into()]);
    }
    Ok(t)
}

fn qft_lowrank(job: &QftLowrankJob) -> Result<Table, CliError> {
    let p = &job.params;
    let circuit = build_qft(QftSpec::new(p.n)?)?;
    let records = p.run(&circuit, &haar_random_state(p.n, job.seed)?, p.rank, None)?;
    let mut header = vec!["step", "gates", "fidelity", "trace"];
    if p.choi {
        header.push("avg_fidelity");
    }
    let d = (p.n as f64).exp2();
    let mut t = Table::new(header);
    for r in &records {
        let mut row: Vec<Cell> = vec![r.step.into(), r.gates.into(), r.fidelity.into(), r.trace.into()];
        if p.choi {
            row.push(((d * r.fidelity + r.trace) / (d + 1.0)).into());
        }
        t.push(row);
    }
    Ok(t)
}
