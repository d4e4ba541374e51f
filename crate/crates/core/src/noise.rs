//! Gaussian over-rotation noise: Monte Carlo samplers, their exact Kraus
//! equivalents, and Choi / superoperator representations.
//!
//! A noisy gate is `U_ideal * V_noise`, so the noise acts first in operator
//! order. Channels follow the same order: noise channel, then the ideal
//! unitary.
//!
//! Superoperators use column-major vectorization, `vec(rho)[i + d*j] =
//! rho[i][j]`, so a Kraus set maps to `S = sum_k conj(E_k) ⊗ E_k`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimate::{f_parameter, lambda1, lambda2, phase_survival};
use crate::mc::stream_rng;
use crate::qcore::{validate_targets, DensityMatrix, GateMatrix, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub e: f64,
    pub theta: f64,
}

impl NoiseParams {
    pub fn new(e: f64, theta: f64) -> Result<Self> {
        check_rate(e)?;
        if !theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        Ok(NoiseParams { e, theta })
    }
}

pub(crate) fn check_rate(e: f64) -> Result<()> {
    if !(e.is_finite() && e >= 0.0) {
        return Err(invalid("e", format!("{e} (error rate must be finite and >= 0)")));
    }
    Ok(())
}

/// Ordered Kraus operators, dominant operator first.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    arity: usize,
    ops: Vec<GateMatrix>,
}

impl KrausSet {
    /// Builds a set without checking completeness; see
    /// [`KrausSet::completeness_residual`].
    pub fn new(ops: Vec<GateMatrix>) -> Result<Self> {
        let arity = ops
            .first()
            .ok_or_else(|| invalid("ops", "a Kraus set needs at least one operator"))?
            .arity();
        if let Some(bad) = ops.iter().find(|op| op.arity() != arity) {
            return Err(Error::DimensionMismatch {
                expected: 1 << arity,
                actual: bad.dim(),
            });
        }
        Ok(KrausSet { arity, ops })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn ops(&self) -> &[GateMatrix] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Max entry modulus of `sum_k E_k† E_k - I`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut acc = vec![ZERO; d * d];
        for op in &self.ops {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        acc[i * d + j] += op.entry(k, i).conj() * op.entry(k, j);
                    }
                }
            }
        }
        (0..d * d)
            .map(|idx| {
                let id = if idx / d == idx % d { ONE } else { ZERO };
                (acc[idx] - id).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `tr(E_k† E_k) / d`, the weight of each operator in the completeness sum.
    pub fn weights(&self) -> Vec<f64> {
        self.ops
            .iter()
            .map(|op| op.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / self.dim() as f64)
            .collect()
    }

    pub fn superoperator(&self) -> Superoperator {
        let mut s = Superoperator::zeros(self.dim());
        for op in &self.ops {
            s.add_kron(&op.conj(), op, 1.0);
        }
        s
    }

    /// The same channel followed by the unitary `u`: operators `u * E_k`.
    pub fn then(&self, u: &GateMatrix) -> Result<KrausSet> {
        let ops = self
            .ops
            .iter()
            .map(|op| u.matmul(op))
            .collect::<Result<Vec<_>>>()?;
        KrausSet::new(ops)
    }
}

/// `U_ideal * V(e*xi)` for a given standard-normal draw `xi`.
pub fn noisy_single_qubit(ideal: &GateMatrix, e: f64, xi: f64) -> Result<GateMatrix> {
    if ideal.arity() != 1 {
        return Err(Error::ArityMismatch {
            arity: 1,
            targets: ideal.arity(),
        });
    }
    if !ideal.is_unitary() {
        return Err(Error::NonUnitary(ideal.unitarity_deviation()));
    }
    ideal.matmul(&GateMatrix::rotation(e * xi))
}

pub fn sample_noisy_single_qubit<R: Rng + ?Sized>(
    ideal: &GateMatrix,
    params: NoiseParams,
    rng: &mut R,
) -> Result<GateMatrix> {
    let xi: f64 = rng.sample(StandardNormal);
    noisy_single_qubit(ideal, params.e, xi)
}

/// `diag(1, 1, 1, exp(-i(theta + e*xi)))`.
pub fn noisy_cphase(theta: f64, e: f64, xi: f64) -> GateMatrix {
    GateMatrix::cphase(theta + e * xi)
}

pub fn sample_noisy_cphase<R: Rng + ?Sized>(params: NoiseParams, rng: &mut R) -> GateMatrix {
    let xi: f64 = rng.sample(StandardNormal);
    noisy_cphase(params.theta, params.e, xi)
}

/// `{sqrt(λ1) I, sqrt(λ2) [[0, 1], [-1, 0]]}`.
pub fn hadamard_noise_kraus(e: f64) -> Result<KrausSet> {
    check_rate(e)?;
    let a = C64::new(lambda1(e).sqrt(), 0.0);
    let b = C64::new(lambda2(e).sqrt(), 0.0);
    KrausSet::new(vec![
        GateMatrix::new(1, vec![a, ZERO, ZERO, a])?,
        GateMatrix::new(1, vec![ZERO, b, -b, ZERO])?,
    ])
}

/// Phase-noise factor only: `diag(1,1,1,sqrt(P))`, `diag(0,0,0,sqrt(1-P))`
/// with `P = exp(-e^2)`. The ideal phase is composed separately.
pub fn cphase_noise_kraus(e: f64) -> Result<KrausSet> {
    check_rate(e)?;
    let p = phase_survival(e);
    let one_minus_p = -(-e * e).exp_m1();
    KrausSet::new(vec![
        GateMatrix::from_diagonal(&[ONE, ONE, ONE, C64::new(p.sqrt(), 0.0)])?,
        GateMatrix::from_diagonal(&[ZERO, ZERO, ZERO, C64::new(one_minus_p.sqrt(), 0.0)])?,
    ])
}

/// The phase-noise pair remixed by `[[1, f], [-f, 1]] / sqrt(1 + f^2)` so
/// that the two diagonals are orthogonal. Returns the set and `f`.
pub fn orthogonalized_cphase_kraus(e: f64) -> Result<(KrausSet, f64)> {
    check_rate(e)?;
    let f = f_parameter(e);
    let base = cphase_noise_kraus(e)?;
    let (e1, e2) = (&base.ops()[0], &base.ops()[1]);
    let norm = 1.0 / (1.0 + f * f).sqrt();
    let mix = |a: f64, b: f64| -> Result<GateMatrix> {
        let data = e1
            .data()
            .iter()
            .zip(e2.data())
            .map(|(x, y)| (x * a + y * b) * norm)
            .collect();
        GateMatrix::new(2, data)
    };
    Ok((KrausSet::new(vec![mix(1.0, f)?, mix(-f, 1.0)?])?, f))
}

/// Which Kraus representation of the phase noise to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseKraus {
    /// `diag(1,1,1,√P)`, `diag(0,0,0,√(1-P))`.
    Diagonal,
    /// The `f`-remixed pair with orthogonal diagonals.
    Orthogonalized,
}

impl PhaseKraus {
    pub fn kraus(self, e: f64) -> Result<KrausSet> {
        match self {
            PhaseKraus::Diagonal => cphase_noise_kraus(e),
            PhaseKraus::Orthogonalized => orthogonalized_cphase_kraus(e).map(|(k, _)| k),
        }
    }
}

/// Noise channels for the two noisy gate kinds at one error rate.
#[derive(Debug, Clone)]
pub struct NoiseChannels {
    pub e: f64,
    pub hadamard: KrausSet,
    pub cphase: KrausSet,
}

impl NoiseChannels {
    pub fn new(e: f64, phase: PhaseKraus) -> Result<Self> {
        Ok(NoiseChannels {
            e,
            hadamard: hadamard_noise_kraus(e)?,
            cphase: phase.kraus(e)?,
        })
    }
}

/// `sum_k E_k rho E_k†` with the operators embedded on `targets`.
pub fn kraus_channel_apply(
    rho: &DensityMatrix,
    k: &KrausSet,
    targets: &[usize],
) -> Result<DensityMatrix> {
    validate_targets(rho.n(), k.arity(), targets)?;
    let mut out = DensityMatrix::zeros(rho.n());
    for op in k.ops() {
        let mut branch = rho.clone();
        branch.conjugate_mut(op, targets)?;
        out.add_assign(&branch)?;
    }
    Ok(out)
}

/// Row-major `d^2 x d^2` matrix acting on column-major `vec(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d: usize,
    data: Vec<C64>,
}

impl Superoperator {
    pub fn zeros(d: usize) -> Self {
        Superoperator {
            d,
            data: vec![ZERO; d * d * d * d],
        }
    }

    /// Superoperator of `rho -> U rho U†`.
    pub fn unitary(u: &GateMatrix) -> Self {
        let mut s = Superoperator::zeros(u.dim());
        s.add_kron(&u.conj(), u, 1.0);
        s
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// `self += w * (a ⊗ b)`.
    fn add_kron(&mut self, a: &GateMatrix, b: &GateMatrix, w: f64) {
        let d = self.d;
        let dd = d * d;
        for p in 0..d {
            for r in 0..d {
                let ar = a.entry(p, r) * w;
                if ar == ZERO {
                    continue;
                }
                for q in 0..d {
                    for s in 0..d {
                        self.data[(p * d + q) * dd + r * d + s] += ar * b.entry(q, s);
                    }
                }
            }
        }
    }

    fn add_assign(&mut self, other: &Superoperator) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    /// `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Superoperator) -> Result<Superoperator> {
        if self.d != rhs.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: rhs.d,
            });
        }
        let dd = self.d * self.d;
        let mut out = Superoperator::zeros(self.d);
        for i in 0..dd {
            for k in 0..dd {
                let a = self.data[i * dd + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..dd {
                    out.data[i * dd + j] += a * rhs.data[k * dd + j];
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Superoperator) -> Result<f64> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: other.d,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

const MC_CHUNK: usize = 4096;

/// Empirical average of `conj(V) ⊗ V` over `trials` sampled operators.
///
/// Trials are split into fixed chunks of 4096; chunk `c` draws from RNG
/// stream `c` of `seed`, and chunk sums are added in chunk order, so the
/// result does not depend on the thread count.
pub fn mc_channel_estimate<F>(sampler: F, trials: usize, seed: u64) -> Result<Superoperator>
where
    F: Fn(&mut ChaCha8Rng) -> GateMatrix + Sync,
{
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let d = {
        let mut probe = stream_rng(seed, 0);
        sampler(&mut probe).dim()
    };
    let partials: Vec<Superoperator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut acc = Superoperator::zeros(d);
            for _ in 0..count {
                let v = sampler(&mut rng);
                acc.add_kron(&v.conj(), &v, 1.0);
            }
            acc
        })
        .collect();
    let mut total = Superoperator::zeros(d);
    for p in &partials {
        total.add_assign(p);
    }
    total.scale(1.0 / trials as f64);
    Ok(total)
}

/// `E[g(xi)]` for `xi ~ N(0, 1)` by the trapezoidal rule on `[-14, 14]`.
///
/// The rule converges geometrically for entire integrands with Gaussian
/// decay; with step 1/32 the discretization error is far below 1e-16 for the
/// rotation frequencies used here (|e| <= 4).
pub fn gaussian_expectation<F: Fn(f64) -> C64>(g: F) -> C64 {
    const H: f64 = 1.0 / 32.0;
    const HALF_SPAN: i64 = 14 * 32;
    let norm = H / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = ZERO;
    // Sum from the tails inward to keep round-off small.
    for k in (1..=HALF_SPAN).rev() {
        let x = k as f64 * H;
        let w = (-0.5 * x * x).exp();
        acc += (g(x) + g(-x)) * w;
    }
    acc += g(0.0);
    acc * norm
}

/// Superoperator of a sampler averaged over `xi` by quadrature, no sampling.
pub fn averaged_superoperator<F>(gate_for_xi: F) -> Superoperator
where
    F: Fn(f64) -> GateMatrix,
{
    let d = gate_for_xi(0.0).dim();
    let dd = d * d;
    let mut out = Superoperator::zeros(d);
    for idx in 0..dd * dd {
        out.data[idx] = gaussian_expectation(|x| {
            let v = gate_for_xi(x);
            let (row, col) = (idx / dd, idx % dd);
            v.entry(row / d, col / d).conj() * v.entry(row % d, col % d)
        });
    }
    out
}

/// Unit-trace Choi state `(1/d) sum_{ij} |i><j| ⊗ E(|i><j|)`.
///
/// The first tensor factor (high index bits) is the reference system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    d: usize,
    data: Vec<C64>,
}

impl ChoiMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.d * self.d + col]
    }

    pub fn trace(&self) -> f64 {
        let dd = self.d * self.d;
        (0..dd).map(|i| self.data[i * dd + i].re).sum()
    }

    pub fn max_abs_diff(&self, other: &ChoiMatrix) -> Result<f64> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: other.d,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let dd = self.d * self.d;
        let m = nalgebra::DMatrix::from_fn(dd, dd, |i, j| self.entry(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn as_density(&self) -> DensityMatrix {
        let n = (self.d * self.d).trailing_zeros() as usize;
        DensityMatrix::from_row_major(n, self.data.clone()).expect("d^2 x d^2")
    }
}

pub fn choi_state(k: &KrausSet) -> ChoiMatrix {
    let d = k.dim();
    let dd = d * d;
    let mut data = vec![ZERO; dd * dd];
    let inv_d = 1.0 / d as f64;
    for op in k.ops() {
        for i in 0..d {
            for a in 0..d {
                let ea = op.entry(a, i);
                if ea == ZERO {
                    continue;
                }
                for j in 0..d {
                    for b in 0..d {
                        data[(i * d + a) * dd + j * d + b] += ea * op.entry(b, j).conj() * inv_d;
                    }
                }
            }
        }
    }
    ChoiMatrix { d, data }
}
