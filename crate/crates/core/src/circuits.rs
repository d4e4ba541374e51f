//! Grover and QFT circuit builders, ideal references, and executors for the
//! three representations: ideal or sampled state vectors, and exact
//! Kraus-chain density matrices.
//!
//! Only Hadamard and controlled-phase steps carry noise. The Grover oracle
//! and the zero-state reflection are exact sign flips.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::noise::{kraus_channel_apply, sample_noisy_cphase, sample_noisy_single_qubit, NoiseChannels, NoiseParams};
use crate::qcore::{validate_targets, DensityMatrix, GateMatrix, PureState, C64, ZERO};

/// Largest register the dense builders accept.
pub const MAX_QUBITS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    Hadamard,
    /// `diag(1, 1, 1, exp(-i theta))`.
    CPhase(f64),
    /// Negates the amplitude of one basis state.
    OracleFlip(usize),
    /// `2|0><0| - I`.
    ZeroFlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub kind: GateKind,
    /// Empty for the whole-register flips.
    pub targets: Vec<usize>,
    pub noisy: bool,
}

impl Step {
    pub fn ideal_gate(&self) -> Option<GateMatrix> {
        match self.kind {
            GateKind::Hadamard => Some(GateMatrix::hadamard()),
            GateKind::CPhase(theta) => Some(GateMatrix::cphase(theta)),
            GateKind::OracleFlip(_) | GateKind::ZeroFlip => None,
        }
    }

    /// Whether the flip negates basis state `index`; only the bits in
    /// `mask` are inspected.
    fn flips(&self, index: usize, mask: usize) -> bool {
        match self.kind {
            GateKind::OracleFlip(marked) => index & mask == marked,
            GateKind::ZeroFlip => index & mask != 0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    steps: Vec<Step>,
    /// Step counts after which experiments record a data point.
    checkpoints: Vec<usize>,
    /// Register-wide flips act on the low `system_qubits` qubits only.
    system_qubits: usize,
}

impl Circuit {
    pub fn new(n: usize, steps: Vec<Step>, checkpoints: Vec<usize>) -> Result<Self> {
        check_n(n)?;
        for step in &steps {
            match step.kind {
                GateKind::Hadamard => validate_targets(n, 1, &step.targets)?,
                GateKind::CPhase(_) => validate_targets(n, 2, &step.targets)?,
                GateKind::OracleFlip(m) => {
                    if m >= 1 << n {
                        return Err(invalid("marked", format!("{m} >= 2^{n}")));
                    }
                }
                GateKind::ZeroFlip => {}
            }
            if step.noisy && step.ideal_gate().is_none() {
                return Err(invalid("noisy", "only Hadamard and controlled-phase steps carry noise"));
            }
        }
        if checkpoints.iter().any(|&c| c > steps.len()) || !checkpoints.windows(2).all(|w| w[0] <= w[1]) {
            return Err(invalid("checkpoints", "must be sorted and within the step count"));
        }
        Ok(Circuit {
            n,
            steps,
            checkpoints,
            system_qubits: n,
        })
    }

    fn flip_mask(&self) -> usize {
        (1 << self.system_qubits) - 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn count(&self, pred: impl Fn(&Step) -> bool) -> usize {
        self.steps.iter().filter(|s| pred(s)).count()
    }

    pub fn noisy_hadamards(&self) -> usize {
        self.count(|s| s.noisy && s.kind == GateKind::Hadamard)
    }

    pub fn hadamards(&self) -> usize {
        self.count(|s| s.kind == GateKind::Hadamard)
    }

    pub fn cphases(&self) -> usize {
        self.count(|s| matches!(s.kind, GateKind::CPhase(_)))
    }

    pub fn run_ideal(&self, state: &mut PureState) -> Result<()> {
        self.run_ideal_range(state, 0..self.steps.len())
    }

    pub fn run_ideal_range(&self, state: &mut PureState, range: std::ops::Range<usize>) -> Result<()> {
        check_register(self.n, state.n())?;
        for step in &self.steps[range] {
            apply_step_pure(state, step, step.ideal_gate().as_ref(), self.flip_mask())?;
        }
        Ok(())
    }

    /// Draws one noisy realization: a fresh standard-normal draw for every
    /// noisy step, in step order.
    pub fn sample<R: Rng + ?Sized>(&self, e: f64, rng: &mut R) -> Result<SampledCircuit<'_>> {
        let mut gates = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let gate = match (step.kind, step.noisy) {
                (GateKind::Hadamard, true) => Some(sample_noisy_single_qubit(
                    &GateMatrix::hadamard(),
                    NoiseParams::new(e, 0.0)?,
                    rng,
                )?),
                (GateKind::CPhase(theta), true) => {
                    Some(sample_noisy_cphase(NoiseParams::new(e, theta)?, rng))
                }
                _ => step.ideal_gate(),
            };
            gates.push(gate);
        }
        Ok(SampledCircuit {
            circuit: self,
            gates,
        })
    }

    /// Exact density evolution: for every noisy step the noise channel is
    /// applied first, then the ideal unitary. `channels = None` runs the
    /// ideal circuit.
    pub fn run_density(&self, rho: &mut DensityMatrix, channels: Option<&NoiseChannels>) -> Result<()> {
        check_register(self.n, rho.n())?;
        for step in &self.steps {
            if step.noisy {
                if let Some(ch) = channels {
                    let k = match step.kind {
                        GateKind::Hadamard => &ch.hadamard,
                        _ => &ch.cphase,
                    };
                    *rho = kraus_channel_apply(rho, k, &step.targets)?;
                }
            }
            match step.ideal_gate() {
                Some(g) => rho.conjugate_mut(&g, &step.targets)?,
                None => rho.apply_sign_flip(|i| step.flips(i, self.flip_mask())),
            }
        }
        Ok(())
    }

    /// The same steps acting on the low `n` qubits of a `2n`-qubit register,
    /// for running on a maximally entangled (Choi) input.
    pub fn lifted(&self) -> Result<Circuit> {
        let n = self.n;
        if 2 * n > MAX_QUBITS {
            return Err(invalid("n", format!("{n} is too large to double")));
        }
        let mut lifted = Circuit::new(2 * n, self.steps.clone(), self.checkpoints.clone())?;
        lifted.system_qubits = self.system_qubits;
        Ok(lifted)
    }

    /// Flip predicate for step `idx`, for engines that apply flips
    /// themselves.
    pub fn flip_predicate(&self, idx: usize) -> impl Fn(usize) -> bool + '_ {
        let mask = self.flip_mask();
        let step = &self.steps[idx];
        move |i| step.flips(i, mask)
    }
}

/// A circuit with every noisy gate replaced by one sampled unitary.
#[derive(Debug, Clone)]
pub struct SampledCircuit<'a> {
    circuit: &'a Circuit,
    gates: Vec<Option<GateMatrix>>,
}

impl SampledCircuit<'_> {
    pub fn run(&self, state: &mut PureState) -> Result<()> {
        check_register(self.circuit.n, state.n())?;
        for (step, gate) in self.circuit.steps.iter().zip(&self.gates) {
            apply_step_pure(state, step, gate.as_ref(), self.circuit.flip_mask())?;
        }
        Ok(())
    }
}

pub(crate) fn apply_step_pure(
    state: &mut PureState,
    step: &Step,
    gate: Option<&GateMatrix>,
    flip_mask: usize,
) -> Result<()> {
    match gate {
        Some(g) => state.apply_gate_mut(g, &step.targets),
        None => {
            negate_where(state.amplitudes_mut(), |i| step.flips(i, flip_mask));
            Ok(())
        }
    }
}

pub(crate) fn negate_where(amps: &mut [C64], pred: impl Fn(usize) -> bool) {
    for (i, a) in amps.iter_mut().enumerate() {
        if pred(i) {
            *a = -*a;
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(invalid("n", format!("{n} (must be in 1..={MAX_QUBITS})")));
    }
    Ok(())
}

fn check_register(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(crate::error::Error::DimensionMismatch {
            expected: 1 << expected,
            actual: 1 << actual,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroverSpec {
    pub n: usize,
    pub marked: usize,
    pub iterations: usize,
}

impl GroverSpec {
    pub fn new(n: usize, marked: usize, iterations: usize) -> Result<Self> {
        check_n(n)?;
        if marked >= 1 << n {
            return Err(invalid("marked", format!("{marked} >= 2^{n}")));
        }
        Ok(GroverSpec { n, marked, iterations })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QftSpec {
    pub n: usize,
}

impl QftSpec {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(QftSpec { n })
    }
}

/// Initial Hadamard layer, then per iteration: oracle flip, Hadamard layer,
/// zero-state flip, Hadamard layer. Checkpoints follow the initial layer and
/// each iteration.
pub fn build_grover(spec: GroverSpec) -> Result<Circuit> {
    let GroverSpec { n, marked, iterations } = GroverSpec::new(spec.n, spec.marked, spec.iterations)?;
    let layer = |steps: &mut Vec<Step>| {
        for q in 0..n {
            steps.push(Step {
                kind: GateKind::Hadamard,
                targets: vec![q],
                noisy: true,
            });
        }
    };
    let mut steps = Vec::with_capacity(n * (1 + 2 * iterations) + 2 * iterations);
    let mut checkpoints = Vec::with_capacity(iterations + 1);
    layer(&mut steps);
    checkpoints.push(steps.len());
    for _ in 0..iterations {
        steps.push(Step {
            kind: GateKind::OracleFlip(marked),
            targets: vec![],
            noisy: false,
        });
        layer(&mut steps);
        steps.push(Step {
            kind: GateKind::ZeroFlip,
            targets: vec![],
            noisy: false,
        });
        layer(&mut steps);
        checkpoints.push(steps.len());
    }
    Circuit::new(n, steps, checkpoints)
}

/// QFT without the terminal swap layer: for each qubit from the most
/// significant down, a Hadamard and then `cphase(pi / 2^k)` with each lower
/// qubit at distance `k`. Checkpoints follow each qubit's block.
pub fn build_qft(spec: QftSpec) -> Result<Circuit> {
    let n = QftSpec::new(spec.n)?.n;
    let mut steps = Vec::with_capacity(n * (n + 1) / 2);
    let mut checkpoints = Vec::with_capacity(n);
    for q in (0..n).rev() {
        steps.push(Step {
            kind: GateKind::Hadamard,
            targets: vec![q],
            noisy: true,
        });
        for m in (0..q).rev() {
            let k = q - m;
            steps.push(Step {
                kind: GateKind::CPhase(PI / (1u64 << k) as f64),
                targets: vec![q, m],
                noisy: true,
            });
        }
        checkpoints.push(steps.len());
    }
    Circuit::new(n, steps, checkpoints)
}

/// `sin^2((2j + 1) asin(2^(-n/2)))`.
pub fn ideal_grover_success(n: usize, j: usize) -> Result<f64> {
    check_n(n)?;
    let theta = (-(n as f64) / 2.0).exp2().asin();
    Ok(((2 * j + 1) as f64 * theta).sin().powi(2))
}

/// `round(pi / (4 asin(2^(-n/2))) - 1/2)`, at least 1.
pub fn optimal_grover_iterations(n: usize) -> Result<usize> {
    check_n(n)?;
    let theta = (-(n as f64) / 2.0).exp2().asin();
    Ok(((PI / (4.0 * theta) - 0.5).round() as usize).max(1))
}

fn bit_reverse(x: usize, n: usize) -> usize {
    x.reverse_bits() >> (usize::BITS as usize - n)
}

/// Exact transform matching [`build_qft`] at zero noise:
/// `out[rev(k)] = 2^(-n/2) sum_x exp(-2 pi i k x / 2^n) psi[x]`, where
/// `rev` reverses the `n` index bits (no swap layer).
pub fn ideal_qft_reference(state: &PureState) -> PureState {
    let n = state.n();
    let dim = state.dim();
    let amps = state.amplitudes();
    let scale = (dim as f64).sqrt().recip();
    let mut out = vec![ZERO; dim];
    for k in 0..dim {
        let mut acc = ZERO;
        for (x, a) in amps.iter().enumerate() {
            let phase = -2.0 * PI * ((k * x) % dim) as f64 / dim as f64;
            acc += C64::from_polar(1.0, phase) * a;
        }
        out[bit_reverse(k, n)] = acc * scale;
    }
    PureState::from_amplitudes(out).expect("same dimension as the input")
}
