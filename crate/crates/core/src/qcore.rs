//! Dense state-vector and density-matrix primitives.
//!
//! Qubit ordering is fixed crate-wide: qubit `k` is bit `k` of the basis
//! index, so qubit 0 is the least significant bit. A gate acting on the
//! ordered targets `[t0, t1]` sees the local basis index
//! `bit(t0) + 2 * bit(t1)`, i.e. the first listed target is the low bit of
//! the gate matrix.
//!
//! Gates are applied in place over strided index groups; the full
//! `2^n x 2^n` embedded operator is never built.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance used to set [`GateMatrix::is_unitary`].
pub const UNITARY_TOL: f64 = 1e-12;

/// A 1- or 2-qubit operator stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    arity: usize,
    data: Vec<C64>,
    unitary: bool,
}

impl GateMatrix {
    pub fn new(arity: usize, data: Vec<C64>) -> Result<Self> {
        if !(1..=2).contains(&arity) {
            return Err(invalid("arity", format!("{arity} (only 1- and 2-qubit gates)")));
        }
        let dim = 1 << arity;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        let mut gate = GateMatrix {
            arity,
            data,
            unitary: false,
        };
        gate.unitary = gate.unitarity_deviation() <= UNITARY_TOL;
        Ok(gate)
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        let arity = match diag.len() {
            2 => 1,
            4 => 2,
            len => {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    actual: len,
                })
            }
        };
        let dim = diag.len();
        let mut data = vec![ZERO; dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            data[i * dim + i] = d;
        }
        GateMatrix::new(arity, data)
    }

    pub fn identity(arity: usize) -> Self {
        let dim = 1usize << arity;
        GateMatrix::from_diagonal(&vec![ONE; dim]).expect("arity 1 or 2")
    }

    pub fn hadamard() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        GateMatrix::new(1, vec![h, h, h, -h]).expect("2x2")
    }

    /// Controlled phase `diag(1, 1, 1, exp(-i theta))`.
    pub fn cphase(theta: f64) -> Self {
        GateMatrix::from_diagonal(&[ONE, ONE, ONE, C64::from_polar(1.0, -theta)]).expect("4x4")
    }

    /// Real rotation `[[cos a, sin a], [-sin a, cos a]]`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        GateMatrix::new(
            1,
            vec![C64::new(c, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0)],
        )
        .expect("2x2")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &GateMatrix) -> Result<GateMatrix> {
        if self.arity != rhs.arity {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rhs.dim(),
            });
        }
        let d = self.dim();
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                for j in 0..d {
                    out[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        GateMatrix::new(self.arity, out)
    }

    pub fn adjoint(&self) -> GateMatrix {
        let d = self.dim();
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                out[j * d + i] = self.data[i * d + j].conj();
            }
        }
        GateMatrix {
            arity: self.arity,
            data: out,
            unitary: self.unitary,
        }
    }

    pub fn conj(&self) -> GateMatrix {
        GateMatrix {
            arity: self.arity,
            data: self.data.iter().map(|z| z.conj()).collect(),
            unitary: self.unitary,
        }
    }

    /// Max entry modulus of `U†U - I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self.data[k * d + i].conj() * self.data[k * d + j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// A state vector over `2^n` basis states.
///
/// Normalization is not enforced: truncation and Kraus branches produce
/// sub-normalized vectors on purpose.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "qubit count must be at least 1"));
        }
        let dim = 1usize << n;
        if index >= dim {
            return Err(invalid("index", format!("{index} >= 2^{n}")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(PureState { n, amps })
    }

    pub fn zero(n: usize) -> Result<Self> {
        PureState::basis(n, 0)
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(invalid(
                "amplitudes",
                format!("length {len} is not 2^n with n >= 1"),
            ));
        }
        Ok(PureState {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= norm);
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amps, &other.amps))
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn apply_gate_mut(&mut self, gate: &GateMatrix, targets: &[usize]) -> Result<()> {
        validate_targets(self.n, gate.arity(), targets)?;
        apply_kernel(&mut self.amps, gate.data(), targets);
        Ok(())
    }
}

/// Row-major density matrix on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &PureState) -> Self {
        let d = state.dim();
        let a = state.amplitudes();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = a[i] * a[j].conj();
            }
        }
        DensityMatrix { n: state.n(), data }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "qubit count must be at least 1"));
        }
        let d = 1usize << n;
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            data[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        Ok(DensityMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        let d = 1usize << n;
        DensityMatrix {
            n,
            data: vec![ZERO; d * d],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<C64>) -> Result<Self> {
        let d = 1usize << n;
        check_dim(d * d, data.len())?;
        Ok(DensityMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i].re).sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    pub fn add_assign(&mut self, other: &DensityMatrix) -> Result<()> {
        check_dim(self.data.len(), other.data.len())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim(self.data.len(), other.data.len())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order (Hermitian part only).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| self.entry(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// In-place `rho -> A rho A†` with `A` embedded on `targets`.
    ///
    /// `A` need not be unitary.
    pub fn conjugate_mut(&mut self, op: &GateMatrix, targets: &[usize]) -> Result<()> {
        validate_targets(self.n, op.arity(), targets)?;
        // The row-major buffer is a 2n-qubit vector whose low n bits index the
        // column and high n bits index the row.
        let rows: Vec<usize> = targets.iter().map(|t| t + self.n).collect();
        apply_kernel(&mut self.data, op.data(), &rows);
        let conj = op.conj();
        apply_kernel(&mut self.data, conj.data(), targets);
        Ok(())
    }

    /// Multiplies entry `(i, j)` by `signs[i] * signs[j]` for a real
    /// diagonal operator given as a predicate on basis indices.
    pub(crate) fn apply_sign_flip(&mut self, flipped: impl Fn(usize) -> bool) {
        let d = self.dim();
        for i in 0..d {
            let fi = flipped(i);
            for j in 0..d {
                if fi != flipped(j) {
                    self.data[i * d + j] = -self.data[i * d + j];
                }
            }
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn validate_targets(n: usize, arity: usize, targets: &[usize]) -> Result<()> {
    if targets.len() != arity {
        return Err(Error::ArityMismatch {
            arity,
            targets: targets.len(),
        });
    }
    for (k, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::TargetOutOfRange { target: t, n });
        }
        if targets[..k].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

/// Applies a `2^k x 2^k` row-major matrix to the listed bit positions of
/// `amps`. Targets must already be validated.
pub(crate) fn apply_kernel(amps: &mut [C64], mat: &[C64], targets: &[usize]) {
    match targets {
        [t] => {
            let (m00, m01, m10, m11) = (mat[0], mat[1], mat[2], mat[3]);
            let stride = 1usize << t;
            for block in (0..amps.len()).step_by(2 * stride) {
                for i in block..block + stride {
                    let a0 = amps[i];
                    let a1 = amps[i + stride];
                    amps[i] = m00 * a0 + m01 * a1;
                    amps[i + stride] = m10 * a0 + m11 * a1;
                }
            }
        }
        [t0, t1] => {
            let m0 = 1usize << t0;
            let m1 = 1usize << t1;
            let both = m0 | m1;
            for i in (0..amps.len()).filter(|i| i & both == 0) {
                let idx = [i, i | m0, i | m1, i | both];
                let v = idx.map(|k| amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    let row = &mat[4 * r..4 * r + 4];
                    amps[k] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
                }
            }
        }
        _ => unreachable!("arity is validated to be 1 or 2"),
    }
}

pub fn apply_gate(state: &PureState, gate: &GateMatrix, targets: &[usize]) -> Result<PureState> {
    let mut out = state.clone();
    out.apply_gate_mut(gate, targets)?;
    Ok(out)
}

/// `U rho U†` with `U` embedded on `targets`.
pub fn apply_gate_density(
    rho: &DensityMatrix,
    gate: &GateMatrix,
    targets: &[usize],
) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.conjugate_mut(gate, targets)?;
    Ok(out)
}

/// `|<a|b>|^2`.
pub fn overlap_fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `<psi|rho|psi>`; `rho` may be sub-normalized.
pub fn pure_vs_mixed_fidelity(psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), psi.dim())?;
    let d = psi.dim();
    let a = psi.amplitudes();
    let mut acc = ZERO;
    for i in 0..d {
        let row = &rho.data()[i * d..(i + 1) * d];
        acc += a[i].conj() * inner_plain(row, a);
    }
    Ok(acc.re.max(0.0))
}

fn inner_plain(row: &[C64], v: &[C64]) -> C64 {
    row.iter().zip(v).map(|(x, y)| x * y).sum()
}

/// Haar-random pure state from a caller-owned RNG: i.i.d. complex Gaussian
/// amplitudes, normalized.
pub fn haar_random_state_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    if n == 0 {
        return Err(invalid("n", "qubit count must be at least 1"));
    }
    let amps: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut state = PureState { n, amps };
    state.normalize();
    Ok(state)
}

pub fn haar_random_state(n: usize, seed: u64) -> Result<PureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_state_with(n, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn random_unitary_1q(a: f64, b: f64, c: f64) -> GateMatrix {
        // Rz(a) Ry(b) Rz(c)
        let rz = |t: f64| {
            GateMatrix::from_diagonal(&[C64::from_polar(1.0, -t / 2.0), C64::from_polar(1.0, t / 2.0)])
                .unwrap()
        };
        let ry = GateMatrix::rotation(b / 2.0);
        rz(a).matmul(&ry).unwrap().matmul(&rz(c)).unwrap()
    }

    fn random_unitary_2q(seed: u64) -> GateMatrix {
        let st = haar_random_state(2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        // Gram-Schmidt on random columns gives a unitary.
        let mut cols: Vec<Vec<C64>> = vec![st.into_amplitudes()];
        while cols.len() < 4 {
            let mut v = haar_random_state_with(2, &mut rng).unwrap().into_amplitudes();
            for c in &cols {
                let p = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            cols.push(v);
        }
        let mut data = vec![ZERO; 16];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..4 {
                data[i * 4 + j] = c[i];
            }
        }
        GateMatrix::new(2, data).unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&PureState::zero(1).unwrap(), &GateMatrix::hadamard(), &[0]).unwrap();
        for a in s.amplitudes() {
            assert!((a - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn identity_is_bit_exact() {
        let s = haar_random_state(3, 11).unwrap();
        let out = apply_gate(&s, &GateMatrix::identity(1), &[2]).unwrap();
        assert_eq!(out, s);
        let out = apply_gate(&s, &GateMatrix::identity(2), &[0, 2]).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn cphase_pi_flips_only_11() {
        let g = GateMatrix::cphase(PI);
        for idx in 0..4 {
            let s = PureState::basis(2, idx).unwrap();
            let out = apply_gate(&s, &g, &[0, 1]).unwrap();
            let expected = if idx == 3 { -1.0 } else { 1.0 };
            assert!((out.amplitudes()[idx] - C64::new(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn two_qubit_target_order() {
        // CNOT with control = local bit 0, target = local bit 1.
        let mut data = vec![ZERO; 16];
        for (r, c) in [(0, 0), (2, 2), (3, 1), (1, 3)] {
            data[r * 4 + c] = ONE;
        }
        let cnot = GateMatrix::new(2, data).unwrap();
        // |q2 q1 q0> = |0 0 1>, control q0 -> flips q2.
        let s = PureState::basis(3, 0b001).unwrap();
        let out = apply_gate(&s, &cnot, &[0, 2]).unwrap();
        assert!((out.probability(0b101) - 1.0).abs() < 1e-15);
        let out = apply_gate(&s, &cnot, &[2, 0]).unwrap();
        assert!((out.probability(0b001) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn target_errors() {
        let s = PureState::zero(2).unwrap();
        let h = GateMatrix::hadamard();
        assert_eq!(
            apply_gate(&s, &h, &[2]),
            Err(Error::TargetOutOfRange { target: 2, n: 2 })
        );
        assert_eq!(
            apply_gate(&s, &GateMatrix::cphase(1.0), &[1, 1]),
            Err(Error::DuplicateTarget(1))
        );
        assert_eq!(
            apply_gate(&s, &h, &[0, 1]),
            Err(Error::ArityMismatch { arity: 1, targets: 2 })
        );
        assert!(GateMatrix::new(1, vec![ONE; 3]).is_err());
        assert!(PureState::from_amplitudes(vec![ONE; 3]).is_err());
    }

    #[test]
    fn density_matches_pure_evolution() {
        let s = haar_random_state(3, 5).unwrap();
        let gates = [
            (GateMatrix::hadamard(), vec![1]),
            (GateMatrix::cphase(0.7), vec![2, 0]),
            (random_unitary_2q(3), vec![1, 2]),
            (random_unitary_1q(0.3, 1.1, -0.4), vec![0]),
        ];
        for (g, t) in &gates {
            let pure = apply_gate(&s, g, t).unwrap();
            let dens = apply_gate_density(&DensityMatrix::from_pure(&s), g, t).unwrap();
            let diff = dens.max_abs_diff(&DensityMatrix::from_pure(&pure)).unwrap();
            assert!(diff < 1e-12, "diff {diff}");
        }
    }

    #[test]
    fn hh_on_00_density_is_uniform() {
        // Oracle: explicit 4x4 product (H⊗H)|00><00|(H⊗H)†.
        let h = 0.5f64;
        let hh: Vec<Vec<f64>> = (0..4)
            .map(|i: usize| (0..4).map(|j: usize| if (i & j).count_ones() % 2 == 0 { h } else { -h }).collect())
            .collect();
        let mut oracle = [[0.0f64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                oracle[i][j] = hh[i][0] * hh[j][0];
            }
        }
        let mut rho = DensityMatrix::from_pure(&PureState::zero(2).unwrap());
        rho.conjugate_mut(&GateMatrix::hadamard(), &[0]).unwrap();
        rho.conjugate_mut(&GateMatrix::hadamard(), &[1]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.entry(i, j) - C64::new(oracle[i][j], 0.0)).norm() < 1e-15);
                assert!((oracle[i][j] - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let zero = PureState::zero(1).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        let plus = apply_gate(&zero, &GateMatrix::hadamard(), &[0]).unwrap();
        assert!((overlap_fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(overlap_fidelity(&zero, &one).unwrap(), 0.0);
        assert!((overlap_fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        assert!(overlap_fidelity(&zero, &PureState::zero(2).unwrap()).is_err());
    }

    #[test]
    fn mixed_fidelity_examples() {
        let psi = haar_random_state(3, 9).unwrap();
        let mut rho = DensityMatrix::from_pure(&psi);
        assert!((pure_vs_mixed_fidelity(&psi, &rho).unwrap() - 1.0).abs() < 1e-12);
        rho.scale(0.5);
        assert!((pure_vs_mixed_fidelity(&psi, &rho).unwrap() - 0.5).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert!((pure_vs_mixed_fidelity(&psi, &mixed).unwrap() - 0.125).abs() < 1e-12);
        let other = haar_random_state(2, 9).unwrap();
        assert!(pure_vs_mixed_fidelity(&other, &mixed).is_err());
    }

    #[test]
    fn haar_determinism_and_norm() {
        for seed in 0..20 {
            let a = haar_random_state(4, seed).unwrap();
            assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(a, haar_random_state(4, seed).unwrap());
        }
    }

    #[test]
    fn haar_first_moments() {
        // E|<0|psi>|^2 = 1/d; Var = (d-1)/(d^2 (d+1)) for Haar states.
        let n = 4;
        let d = 16.0;
        let samples = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut sum = 0.0;
        let mut re_sum = 0.0;
        let mut im_sum = 0.0;
        for _ in 0..samples {
            let s = haar_random_state_with(n, &mut rng).unwrap();
            let a = s.amplitudes()[0];
            sum += a.norm_sqr();
            re_sum += a.re;
            im_sum += a.im;
        }
        let mean = sum / samples as f64;
        let se = ((d - 1.0) / (d * d * (d + 1.0)) / samples as f64).sqrt();
        assert!((mean - 1.0 / d).abs() < 3.0 * se, "mean {mean}, se {se}");
        // Re and Im parts have variance 1/(2d).
        let se_part = (1.0 / (2.0 * d) / samples as f64).sqrt();
        assert!((re_sum / samples as f64).abs() < 5.0 * se_part);
        assert!((im_sum / samples as f64).abs() < 5.0 * se_part);
    }

    #[test]
    fn eigenvalues_of_projector() {
        let rho = DensityMatrix::from_pure(&haar_random_state(2, 1).unwrap());
        let ev = rho.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|x| x.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn unitary_gates_preserve_norm(seed in 0u64..10_000, n in 2usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, t0 in 0usize..6, t1 in 0usize..6) {
            let t0 = t0 % n;
            let t1 = if t1 % n == t0 { (t0 + 1) % n } else { t1 % n };
            let mut s = haar_random_state(n, seed).unwrap();
            s.apply_gate_mut(&random_unitary_1q(a, b, c), &[t0]).unwrap();
            s.apply_gate_mut(&random_unitary_2q(seed), &[t0, t1]).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn disjoint_gates_commute(seed in 0u64..10_000, n in 2usize..7, a in -3.0f64..3.0, b in -3.0f64..3.0, i in 0usize..6, j in 0usize..6) {
            let i = i % n;
            let j = if j % n == i { (i + 1) % n } else { j % n };
            let ga = random_unitary_1q(a, b, 0.2);
            let gb = random_unitary_1q(b, a, -0.9);
            let s = haar_random_state(n, seed).unwrap();
            let ab = apply_gate(&apply_gate(&s, &ga, &[i]).unwrap(), &gb, &[j]).unwrap();
            let ba = apply_gate(&apply_gate(&s, &gb, &[j]).unwrap(), &ga, &[i]).unwrap();
            for (x, y) in ab.amplitudes().iter().zip(ba.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
