//! Monte Carlo trajectories and low-rank experiment runs.
//!
//! Trajectory `i` of a run with seed `s` draws from ChaCha8 stream `i` of
//! key `s`, independent of scheduling. Per-trajectory results are collected
//! in index order and reduced sequentially, so a run is bit-identical for
//! any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuits::{build_grover, build_qft, Circuit, GateKind, GroverSpec, QftSpec};
use crate::error::{invalid, Result};
use crate::lowrank::LowRankFactor;
use crate::noise::{check_rate, NoiseChannels};
use crate::qcore::{haar_random_state_with, overlap_fidelity, DensityMatrix, PureState};

/// RNG for work item `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(invalid("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|err| invalid("workers", err.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub mean: f64,
    /// Unbiased sample standard deviation over `sqrt(trials)`.
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

impl TrajectoryStats {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        TrajectoryStats {
            mean,
            stderr,
            trials: n,
            seed,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    Ok(())
}

/// Probability of measuring the marked state after `spec.iterations` noisy
/// Grover iterations, averaged over trajectories.
pub fn run_grover_mc(spec: GroverSpec, e: f64, trials: usize, seed: u64) -> Result<TrajectoryStats> {
    check_rate(e)?;
    check_trials(trials)?;
    let circuit = build_grover(spec)?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut psi = PureState::zero(spec.n)?;
            circuit.sample(e, &mut rng)?.run(&mut psi)?;
            Ok(psi.probability(spec.marked))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TrajectoryStats::from_samples(&samples, seed))
}

/// Mean fidelity `|<QFT psi | noisy(psi)>|^2` over noise realizations and
/// Haar-random inputs. Each trajectory samples the circuit once and
/// evaluates it on `inputs_per_trial` fresh inputs.
pub fn run_qft_mc(
    spec: QftSpec,
    e: f64,
    trials: usize,
    inputs_per_trial: usize,
    seed: u64,
) -> Result<TrajectoryStats> {
    check_rate(e)?;
    check_trials(trials)?;
    if inputs_per_trial == 0 {
        return Err(invalid("inputs_per_trial", "must be at least 1"));
    }
    let circuit = build_qft(spec)?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let sampled = circuit.sample(e, &mut rng)?;
            (0..inputs_per_trial)
                .map(|_| {
                    let psi = haar_random_state_with(spec.n, &mut rng)?;
                    let mut ideal = psi.clone();
                    circuit.run_ideal(&mut ideal)?;
                    let mut noisy = psi;
                    sampled.run(&mut noisy)?;
                    overlap_fidelity(&ideal, &noisy)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let samples: Vec<f64> = per_trial.into_iter().flatten().collect();
    Ok(TrajectoryStats::from_samples(&samples, seed))
}

const DENSITY_CHUNK: usize = 1024;

/// Average of `|psi_i><psi_i|` over sampled trajectories of `circuit` from
/// `input`.
pub fn mc_average_density(
    circuit: &Circuit,
    e: f64,
    input: &PureState,
    trials: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    check_rate(e)?;
    check_trials(trials)?;
    let chunks = trials.div_ceil(DENSITY_CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = DensityMatrix::zeros(input.n());
            let end = trials.min((c + 1) * DENSITY_CHUNK);
            for i in c * DENSITY_CHUNK..end {
                let mut rng = stream_rng(seed, i as u64);
                let mut psi = input.clone();
                circuit.sample(e, &mut rng)?.run(&mut psi)?;
                acc.add_assign(&DensityMatrix::from_pure(&psi))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<DensityMatrix>>>()?;
    let mut total = DensityMatrix::zeros(input.n());
    for p in &partials {
        total.add_assign(p)?;
    }
    total.scale(1.0 / trials as f64);
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruncationMode {
    /// Apply the channel and keep the top-rank eigencomponents.
    Eigen,
    /// Follow only the dominant Kraus operator.
    Branch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub mode: TruncationMode,
    pub rank: usize,
    /// Record after every step instead of at the circuit checkpoints.
    pub per_gate: bool,
    /// Basis state whose population is reported (Grover's answer).
    pub marked: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRecord {
    /// Ordinal of the recording point: the Grover iteration count at
    /// checkpoints, or the gate count in per-gate mode.
    pub step: usize,
    /// Number of circuit steps applied so far.
    pub gates: usize,
    /// `<psi_ideal| rho |psi_ideal>`.
    pub fidelity: f64,
    pub trace: f64,
    /// `<marked| rho |marked>` if requested.
    pub success: Option<f64>,
}

/// Runs the low-rank engine over `circuit` from `input`, tracking the ideal
/// state alongside. Each noisy step applies its noise channel (truncated or
/// branch-selected) and then the ideal gate.
pub fn run_lowrank_experiment(
    circuit: &Circuit,
    channels: &NoiseChannels,
    opts: ExperimentOptions,
    input: &PureState,
) -> Result<Vec<ExperimentRecord>> {
    let mut factor = LowRankFactor::init_pure(input, opts.rank)?;
    let mut ideal = input.clone();
    let mut records = Vec::new();
    let record_at: Vec<usize> = if opts.per_gate {
        (1..=circuit.steps().len()).collect()
    } else {
        circuit.checkpoints().to_vec()
    };
    let mut next = 0;
    for (idx, step) in circuit.steps().iter().enumerate() {
        if step.noisy {
            let k = match step.kind {
                GateKind::Hadamard => &channels.hadamard,
                _ => &channels.cphase,
            };
            match opts.mode {
                TruncationMode::Eigen => factor.apply_channel_truncate(k, &step.targets)?,
                TruncationMode::Branch => factor.apply_branch(k, &step.targets, 0)?,
            }
        }
        match step.ideal_gate() {
            Some(g) => factor.apply_ideal_gate(&g, &step.targets)?,
            None => factor.apply_sign_flip(circuit.flip_predicate(idx)),
        }
        circuit.run_ideal_range(&mut ideal, idx..idx + 1)?;
        while next < record_at.len() && record_at[next] == idx + 1 {
            records.push(ExperimentRecord {
                step: if opts.per_gate { idx + 1 } else { next },
                gates: idx + 1,
                fidelity: factor.fidelity_with(&ideal)?,
                trace: factor.surviving_trace(),
                success: opts.marked.map(|m| factor.population(m)),
            });
            next += 1;
        }
    }
    Ok(records)
}
