//! Fixed-rank density evolution.
//!
//! A density matrix is held as `rho = sum_k c_k c_k†` over at most `r`
//! columns. After every noisy gate the channel output is truncated back to
//! its `r` largest eigencomponents, computed from the small Gram matrix of
//! the candidate columns `E_i c_k` rather than from the `2^n x 2^n` density.
//! The discarded eigenvalues are lost trace; what survives is the weight on
//! the tracked evolution path.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::noise::KrausSet;
use crate::qcore::{apply_kernel, check_dim, inner, validate_targets, DensityMatrix, GateMatrix, PureState, C64, ZERO};

/// Eigenvalues of the Gram matrix below this are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-14;

/// Work threshold (candidates x dimension) above which Gram and rebuild
/// loops run in parallel.
const PAR_WORK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    n: usize,
    rank_cap: usize,
    columns: Vec<Vec<C64>>,
}

impl LowRankFactor {
    pub fn init_pure(state: &PureState, rank_cap: usize) -> Result<Self> {
        if rank_cap == 0 {
            return Err(invalid("rank", "must be at least 1"));
        }
        Ok(LowRankFactor {
            n: state.n(),
            rank_cap,
            columns: vec![state.amplitudes().to_vec()],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank_cap(&self) -> usize {
        self.rank_cap
    }

    pub fn columns(&self) -> &[Vec<C64>] {
        &self.columns
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    /// `sum_k |c_k|^2`.
    pub fn surviving_trace(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// `<psi| rho |psi> = sum_k |<psi|c_k>|^2`.
    pub fn fidelity_with(&self, psi: &PureState) -> Result<f64> {
        check_dim(1 << self.n, psi.dim())?;
        Ok(self
            .columns
            .iter()
            .map(|c| inner(psi.amplitudes(), c).norm_sqr())
            .sum())
    }

    /// `<index| rho |index>`.
    pub fn population(&self, index: usize) -> f64 {
        self.columns.iter().map(|c| c[index].norm_sqr()).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = 1usize << self.n;
        let mut data = vec![ZERO; d * d];
        for c in &self.columns {
            for i in 0..d {
                if c[i] == ZERO {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += c[i] * c[j].conj();
                }
            }
        }
        DensityMatrix::from_row_major(self.n, data).expect("square")
    }

    /// Applies a unitary to every column. No truncation is needed.
    pub fn apply_ideal_gate(&mut self, gate: &GateMatrix, targets: &[usize]) -> Result<()> {
        if !gate.is_unitary() {
            return Err(Error::NonUnitary(gate.unitarity_deviation()));
        }
        validate_targets(self.n, gate.arity(), targets)?;
        self.columns
            .iter_mut()
            .for_each(|c| apply_kernel(c, gate.data(), targets));
        Ok(())
    }

    /// Multiplies every column by `-1` on the basis states where `flipped`
    /// holds.
    pub fn apply_sign_flip(&mut self, flipped: impl Fn(usize) -> bool) {
        for c in &mut self.columns {
            crate::circuits::negate_where(c, &flipped);
        }
    }

    /// Applies the channel and keeps the `rank_cap` largest eigencomponents
    /// of the result.
    pub fn apply_channel_truncate(&mut self, k: &KrausSet, targets: &[usize]) -> Result<()> {
        validate_targets(self.n, k.arity(), targets)?;
        // Candidate a = i * |columns| + col, Kraus-major.
        let candidates: Vec<Vec<C64>> = k
            .ops()
            .iter()
            .flat_map(|op| {
                self.columns.iter().map(move |c| {
                    let mut v = c.clone();
                    apply_kernel(&mut v, op.data(), targets);
                    v
                })
            })
            .collect();
        self.columns = truncate_columns(&candidates, self.rank_cap);
        Ok(())
    }

    /// Keeps only the Kraus branch `branch` on every column. The trace drops
    /// by that branch's weight; the result depends on which Kraus
    /// representation of the channel is used.
    pub fn apply_branch(&mut self, k: &KrausSet, targets: &[usize], branch: usize) -> Result<()> {
        validate_targets(self.n, k.arity(), targets)?;
        let op = k.ops().get(branch).ok_or(Error::BranchOutOfRange {
            index: branch,
            len: k.len(),
        })?;
        self.columns
            .iter_mut()
            .for_each(|c| apply_kernel(c, op.data(), targets));
        Ok(())
    }
}

/// Top-`rank` eigencomponents of `A A†` for `A = [candidates]`, returned as
/// columns `A v` with `|A v|^2` equal to the eigenvalue.
///
/// Ties at the cutoff keep the lower eigen index, in the order returned by
/// a stable descending sort.
pub(crate) fn truncate_columns(candidates: &[Vec<C64>], rank: usize) -> Vec<Vec<C64>> {
    let m = candidates.len();
    if m == 0 {
        return Vec::new();
    }
    let dim = candidates[0].len();
    let parallel = m * dim >= PAR_WORK;

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let gram_entry = |&(a, b): &(usize, usize)| inner(&candidates[a], &candidates[b]);
    let upper: Vec<C64> = if parallel {
        pairs.par_iter().map(gram_entry).collect()
    } else {
        pairs.iter().map(gram_entry).collect()
    };
    let mut gram = DMatrix::<C64>::zeros(m, m);
    for (&(a, b), &g) in pairs.iter().zip(&upper) {
        gram[(a, b)] = g;
        gram[(b, a)] = g.conj();
    }
    for a in 0..m {
        gram[(a, a)] = C64::new(gram[(a, a)].re, 0.0);
    }

    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let keep: Vec<usize> = order
        .into_iter()
        .take(rank)
        .filter(|&idx| eig.eigenvalues[idx] > EIGEN_CLIP)
        .collect();

    let rebuild = |&idx: &usize| {
        let v = eig.eigenvectors.column(idx);
        let mut col = vec![ZERO; dim];
        for (a, cand) in candidates.iter().enumerate() {
            let w = v[a];
            if w == ZERO {
                continue;
            }
            for (x, y) in col.iter_mut().zip(cand) {
                *x += w * y;
            }
        }
        col
    };
    if parallel {
        keep.par_iter().map(rebuild).collect()
    } else {
        keep.iter().map(rebuild).collect()
    }
}

/// `(1/sqrt(d)) sum_i |i>_ref |i>_sys` on `2n` qubits; the system is the
/// low `n` qubits.
pub fn maximally_entangled(n: usize) -> Result<PureState> {
    if n == 0 || 2 * n > crate::circuits::MAX_QUBITS {
        return Err(invalid("n", format!("{n} out of range for a doubled register")));
    }
    let d = 1usize << n;
    let mut amps = vec![ZERO; d * d];
    let a = C64::new((d as f64).sqrt().recip(), 0.0);
    for i in 0..d {
        amps[(i << n) | i] = a;
    }
    PureState::from_amplitudes(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{f_parameter, lambda1, phase_survival};
    use crate::noise::{cphase_noise_kraus, hadamard_noise_kraus, kraus_channel_apply, orthogonalized_cphase_kraus};
    use crate::qcore::{haar_random_state, pure_vs_mixed_fidelity};
    use proptest::prelude::*;

    #[test]
    fn init_examples() {
        let z = PureState::zero(3).unwrap();
        let f = LowRankFactor::init_pure(&z, 1).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.surviving_trace(), 1.0);
        let psi = haar_random_state(3, 2).unwrap();
        let f = LowRankFactor::init_pure(&psi, 30).unwrap();
        assert_eq!((f.rank(), f.rank_cap()), (1, 30));
        assert!((pure_vs_mixed_fidelity(&psi, &f.to_density()).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.fidelity_with(&psi).unwrap() - 1.0).abs() < 1e-12);
        assert!(LowRankFactor::init_pure(&psi, 0).is_err());
    }

    #[test]
    fn ideal_gate_examples() {
        let psi = haar_random_state(3, 4).unwrap();
        let mut f = LowRankFactor::init_pure(&psi, 4).unwrap();
        f.apply_ideal_gate(&GateMatrix::identity(1), &[1]).unwrap();
        assert_eq!(f.columns()[0], psi.amplitudes());
        f.apply_ideal_gate(&GateMatrix::hadamard(), &[2]).unwrap();
        let mut s = psi.clone();
        s.apply_gate_mut(&GateMatrix::hadamard(), &[2]).unwrap();
        assert_eq!(f.columns()[0], s.amplitudes());
        let bad = GateMatrix::from_diagonal(&[C64::new(0.5, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!(f.apply_ideal_gate(&bad, &[0]).is_err());
    }

    #[test]
    fn full_rank_matches_exact_channel() {
        let psi = haar_random_state(3, 8).unwrap();
        let mut f = LowRankFactor::init_pure(&psi, 8).unwrap();
        let mut rho = DensityMatrix::from_pure(&psi);
        let kh = hadamard_noise_kraus(0.2).unwrap();
        let kc = cphase_noise_kraus(0.3).unwrap();
        for (k, t) in [(&kh, vec![0]), (&kc, vec![2, 1]), (&kh, vec![2]), (&kc, vec![0, 2])] {
            f.apply_channel_truncate(k, &t).unwrap();
            rho = kraus_channel_apply(&rho, k, &t).unwrap();
            assert!(f.to_density().max_abs_diff(&rho).unwrap() < 1e-10);
        }
    }

    #[test]
    fn rank_one_keeps_dominant_hadamard_branch() {
        // Oracle: exact 2-qubit density, top eigenvalue.
        let e = 0.01;
        let psi = haar_random_state(2, 6).unwrap();
        let k = hadamard_noise_kraus(e).unwrap();
        let rho = kraus_channel_apply(&DensityMatrix::from_pure(&psi), &k, &[1]).unwrap();
        let top = *rho.eigenvalues().last().unwrap();
        let mut f = LowRankFactor::init_pure(&psi, 1).unwrap();
        f.apply_channel_truncate(&k, &[1]).unwrap();
        assert!((f.surviving_trace() - top).abs() < 1e-12);

        // For real states <psi|J|psi> = 0, so the two branches are orthogonal
        // and the kept weight is exactly λ1.
        let real = PureState::from_amplitudes(
            [0.1, -0.5, 0.7, 0.3].iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
        .unwrap();
        let mut real = real;
        real.normalize();
        let mut f = LowRankFactor::init_pure(&real, 1).unwrap();
        f.apply_channel_truncate(&k, &[0]).unwrap();
        assert!((f.surviving_trace() - lambda1(e)).abs() < 1e-6);
    }

    #[test]
    fn branch_examples() {
        let e = 0.01;
        let psi = haar_random_state(3, 1).unwrap();
        let mut f = LowRankFactor::init_pure(&psi, 1).unwrap();
        f.apply_branch(&hadamard_noise_kraus(e).unwrap(), &[0], 0).unwrap();
        assert!((f.surviving_trace() - lambda1(e)).abs() < 1e-15);
        assert!((f.surviving_trace() - 0.99990001).abs() < 5e-9);
        let direction = inner(psi.amplitudes(), &f.columns()[0]).norm_sqr() / f.surviving_trace();
        assert!((direction - 1.0).abs() < 1e-12);

        // Uniform 2-qubit state through the dominant remixed operator.
        let uniform = PureState::from_amplitudes(vec![C64::new(0.5, 0.0); 4]).unwrap();
        let (k7, fp) = orthogonalized_cphase_kraus(e).unwrap();
        let mut u = LowRankFactor::init_pure(&uniform, 1).unwrap();
        u.apply_branch(&k7, &[0, 1], 0).unwrap();
        let p = phase_survival(e);
        let a = p.sqrt() + fp * (1.0 - p).sqrt();
        let expected = (3.0 + a * a) / (4.0 * (1.0 + fp * fp));
        assert!((fp - f_parameter(e)).abs() < 1e-15);
        assert!((u.surviving_trace() - expected).abs() < 1e-14);

        let mut z = LowRankFactor::init_pure(&uniform, 1).unwrap();
        z.apply_branch(&cphase_noise_kraus(0.0).unwrap(), &[0, 1], 0).unwrap();
        assert_eq!(z.surviving_trace(), 1.0);
        assert_eq!(
            z.apply_branch(&k7, &[0, 1], 2),
            Err(Error::BranchOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn rank_one_is_representation_independent() {
        let e = 0.2;
        let psi = haar_random_state(3, 12).unwrap();
        let mut a = LowRankFactor::init_pure(&psi, 1).unwrap();
        let mut b = a.clone();
        let k4 = cphase_noise_kraus(e).unwrap();
        let (k7, _) = orthogonalized_cphase_kraus(e).unwrap();
        for t in [[0, 1], [2, 0], [1, 2]] {
            a.apply_channel_truncate(&k4, &t).unwrap();
            b.apply_channel_truncate(&k7, &t).unwrap();
            a.apply_ideal_gate(&GateMatrix::hadamard(), &[t[0]]).unwrap();
            b.apply_ideal_gate(&GateMatrix::hadamard(), &[t[0]]).unwrap();
        }
        let overlap = inner(&a.columns()[0], &b.columns()[0]);
        assert!((overlap.norm() - a.surviving_trace()).abs() < 1e-10);
        assert!(a.to_density().max_abs_diff(&b.to_density()).unwrap() < 1e-10);
    }

    #[test]
    fn maximally_entangled_state() {
        let s = maximally_entangled(2).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((s.probability(0b0101) - 0.25).abs() < 1e-15);
        assert_eq!(s.probability(0b0110), 0.0);
    }

    fn random_step(f: &mut LowRankFactor, seed: u64, e: f64) {
        let n = f.n();
        let q = (seed as usize) % n;
        let q2 = (q + 1 + (seed as usize / 7) % (n - 1)) % n;
        match seed % 4 {
            0 => f.apply_channel_truncate(&hadamard_noise_kraus(e).unwrap(), &[q]).unwrap(),
            1 => f.apply_channel_truncate(&orthogonalized_cphase_kraus(e).unwrap().0, &[q, q2]).unwrap(),
            2 => f.apply_branch(&cphase_noise_kraus(e).unwrap(), &[q2, q], 0).unwrap(),
            _ => f.apply_ideal_gate(&GateMatrix::hadamard(), &[q]).unwrap(),
        }
    }

    proptest! {
        #[test]
        fn trace_never_increases(seed in 0u64..1_000_000, n in 2usize..6, r in 1usize..6, e in 0.0f64..1.0) {
            let mut f = LowRankFactor::init_pure(&haar_random_state(n, seed).unwrap(), r).unwrap();
            let mut prev = f.surviving_trace();
            let mut s = seed;
            for _ in 0..12 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) >> 11;
                let ideal = s % 4 == 3;
                random_step(&mut f, s, e);
                let t = f.surviving_trace();
                if ideal {
                    prop_assert!((t - prev).abs() < 1e-12);
                } else {
                    prop_assert!(t <= prev + 1e-12);
                }
                prop_assert!(f.rank() <= r);
                prev = t;
            }
        }
    }
}
