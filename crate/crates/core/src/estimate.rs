//! Closed-form accuracy estimates for noisy Grover search and the QFT.
//!
//! All quantities are lower bounds obtained by following only the dominant
//! Kraus branch. Exponents are accumulated in log space so that registers
//! of 10^4 qubits and beyond do not underflow.

use crate::circuits::ideal_grover_success;
use crate::error::{invalid, Result};
use crate::noise::check_rate;

/// `(1 + exp(-2e^2)) / 2`.
pub fn lambda1(e: f64) -> f64 {
    1.0 - lambda2(e)
}

/// `(1 - exp(-2e^2)) / 2`.
pub fn lambda2(e: f64) -> f64 {
    -0.5 * (-2.0 * e * e).exp_m1()
}

/// Phase survival probability `P = exp(-e^2)`.
pub fn phase_survival(e: f64) -> f64 {
    (-e * e).exp()
}

/// Remixing coefficient `f = (sqrt(1+3P) - P - 1) / sqrt(P(1-P))`.
///
/// Evaluated in the algebraically equivalent form
/// `sqrt(P(1-P)) / (sqrt(1+3P) + 1 + P)`, which is free of cancellation for
/// small `e` and gives `f = 0` at `e = 0`.
pub fn f_parameter(e: f64) -> f64 {
    let p = phase_survival(e);
    let q = -(-e * e).exp_m1();
    (p * q).sqrt() / ((1.0 + 3.0 * p).sqrt() + 1.0 + p)
}

/// The closed form exactly as written, for cross-checking
/// [`f_parameter`]. Loses precision for `e` below about `1e-4`.
pub fn f_parameter_direct(e: f64) -> f64 {
    let p = phase_survival(e);
    if p == 1.0 {
        return 0.0;
    }
    ((1.0 + 3.0 * p).sqrt() - p - 1.0) / (p * (1.0 - p)).sqrt()
}

/// `sqrt(P) + f sqrt(1-P)`, the `|11>` entry of the dominant remixed
/// operator before its `1/sqrt(1+f^2)` normalization.
fn remixed_corner(e: f64) -> f64 {
    let q = -(-e * e).exp_m1();
    phase_survival(e).sqrt() + f_parameter(e) * q.sqrt()
}

fn ln_remixed_corner(e: f64) -> f64 {
    let q = -(-e * e).exp_m1();
    ((-0.5 * e * e).exp_m1() + f_parameter(e) * q.sqrt()).ln_1p()
}

/// `P_H = λ1`.
pub fn p_hadamard(e: f64) -> f64 {
    lambda1(e)
}

/// `P_R = exp(-e^2)`.
pub fn p_phase(e: f64) -> f64 {
    phase_survival(e)
}

/// `(sqrt(P) + f sqrt(1-P))^2 / (1 + f^2)^4`.
pub fn p_phase_refined(e: f64) -> f64 {
    ln_p_phase_refined(e, 4).exp()
}

fn ln_p_phase_refined(e: f64, denominator_power: i32) -> f64 {
    let f = f_parameter(e);
    2.0 * ln_remixed_corner(e) - denominator_power as f64 * (f * f).ln_1p()
}

/// Per-gate weight of the dominant remixed branch on a uniform two-qubit
/// state: `[3 + (sqrt(P) + f sqrt(1-P))^2] / [4 (1 + f^2)]`.
pub fn uniform_branch_factor(e: f64) -> f64 {
    let f = f_parameter(e);
    let a = remixed_corner(e);
    (3.0 + a * a) / (4.0 * (1.0 + f * f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateInput {
    pub n: usize,
    pub e: f64,
    pub j: usize,
}

impl EstimateInput {
    pub fn new(n: usize, e: f64, j: usize) -> Result<Self> {
        check_n(n)?;
        check_rate(e)?;
        Ok(EstimateInput { n, e, j })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "qubit count must be at least 1"));
    }
    Ok(())
}

/// `λ1^(n + 2nj) * p_ideal(n, j)`.
pub fn grover_fidelity_bound(inp: EstimateInput) -> Result<f64> {
    check_n(inp.n)?;
    check_rate(inp.e)?;
    let noisy = inp.n as f64 * (1.0 + 2.0 * inp.j as f64);
    let ln_l1 = (-lambda2(inp.e)).ln_1p();
    Ok((noisy * ln_l1).exp() * ideal_grover_success(inp.n, inp.j)?)
}

/// Number of phase-gate "quarter exposures", `n(n-1)/8`, as a real.
fn phase_exponent(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 8.0
}

fn qft_from_logs(n: usize, ln_ph: f64, ln_pr: f64) -> f64 {
    (n as f64 * ln_ph + phase_exponent(n) * ln_pr).exp()
}

/// `P_H^n * P_R^(n(n-1)/8)`.
pub fn qft_fidelity_naive(n: usize, e: f64) -> Result<f64> {
    check_n(n)?;
    check_rate(e)?;
    Ok(qft_from_logs(n, (-lambda2(e)).ln_1p(), -e * e))
}

/// `P_H^n * P~_R^(n(n-1)/8)` with the refined phase factor.
pub fn qft_fidelity_refined(n: usize, e: f64) -> Result<f64> {
    check_n(n)?;
    check_rate(e)?;
    Ok(qft_from_logs(n, (-lambda2(e)).ln_1p(), ln_p_phase_refined(e, 4)))
}

/// Variant with `(1 + f^2)` to the first power in the refined phase factor.
/// Comparison output only; [`qft_fidelity_refined`] is the estimator.
pub fn qft_fidelity_refined_unit_power(n: usize, e: f64) -> Result<f64> {
    check_n(n)?;
    check_rate(e)?;
    Ok(qft_from_logs(n, (-lambda2(e)).ln_1p(), ln_p_phase_refined(e, 1)))
}

/// Refined QFT fidelity for every `(e, n)` pair; `table[i][k]` is
/// `e_list[i]` at `n_list[k]`.
pub fn qft_accuracy_table(n_list: &[usize], e_list: &[f64]) -> Result<Vec<Vec<f64>>> {
    if n_list.is_empty() {
        return Err(invalid("n_list", "must not be empty"));
    }
    if e_list.is_empty() {
        return Err(invalid("e_list", "must not be empty"));
    }
    e_list
        .iter()
        .map(|&e| n_list.iter().map(|&n| qft_fidelity_refined(n, e)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda1(0.0), 1.0);
        assert_eq!(lambda2(0.0), 0.0);
        assert!((lambda1(50.0) - 0.5).abs() < 1e-15);
        assert!((lambda1(0.01) - 0.99990001).abs() < 5e-9);
        for e in [1e-4, 0.01, 0.3, 2.0] {
            assert!((lambda1(e) + lambda2(e) - 1.0).abs() < 1e-15);
            assert!((0.5..=1.0).contains(&lambda1(e)));
            assert!((lambda1(e) - (1.0 + (-2.0 * e * e).exp()) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grover_bound_values() {
        for (n, j) in [(2, 1), (5, 3), (10, 0)] {
            let b = grover_fidelity_bound(EstimateInput::new(n, 0.0, j).unwrap()).unwrap();
            assert_eq!(b, ideal_grover_success(n, j).unwrap());
        }
        let b = grover_fidelity_bound(EstimateInput::new(2, 0.01, 1).unwrap()).unwrap();
        assert!((b - lambda1(0.01).powi(6)).abs() < 1e-15);
        assert!((b - 0.9994002099460112).abs() < 1e-13);
        assert!(EstimateInput::new(0, 0.1, 1).is_err());
        assert!(EstimateInput::new(2, -1.0, 1).is_err());
    }

    #[test]
    fn naive_qft_values() {
        for n in [1, 7, 300] {
            assert_eq!(qft_fidelity_naive(n, 0.0).unwrap(), 1.0);
        }
        assert!((qft_fidelity_naive(1, 0.2).unwrap() - lambda1(0.2)).abs() < 1e-15);
        // ln F = 2000 ln λ1 - 499750 e^2
        let expected = (2000.0 * lambda1(0.001).ln() - 499_750.0 * 1e-6).exp();
        let got = qft_fidelity_naive(2000, 0.001).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.6055).abs() < 1e-4);
    }

    #[test]
    fn f_parameter_values() {
        assert_eq!(f_parameter(0.0), 0.0);
        assert!((f_parameter(0.01) - 2.4999e-3).abs() < 1e-7);
        let ratio = f_parameter(1e-3) / (1e-3 / 4.0);
        assert!((ratio - 1.0).abs() < 1e-5);
        for e in [1e-3, 0.01, 0.1, 0.5, 1.0] {
            assert!((f_parameter(e) - f_parameter_direct(e)).abs() < 1e-12 * (1.0 + 1.0 / e));
        }
        let e = 1.0;
        let f = f_parameter(e);
        let p = phase_survival(e);
        let s = (p * (1.0 - p)).sqrt();
        assert!(f > 0.0 && f.is_finite());
        assert!((s * f * f + 2.0 * (1.0 + p) * f - s).abs() < 1e-12);
    }

    #[test]
    fn refined_factor_matches_printed_form() {
        for e in [1e-3, 0.05, 0.7] {
            let p = phase_survival(e);
            let f = f_parameter(e);
            let printed = (p.sqrt() + f * (1.0 - p).sqrt()).powi(2) / (1.0 + f * f).powi(4);
            assert!((p_phase_refined(e) - printed).abs() < 1e-14);
        }
    }

    #[test]
    fn refined_qft_values() {
        assert_eq!(qft_fidelity_refined(9, 0.0).unwrap(), 1.0);
        let v = qft_fidelity_refined(2000, 0.001).unwrap();
        assert!((v - 0.69).abs() <= 0.01, "{v}");
        for e in [0.001, 0.01, 0.1] {
            let g = uniform_branch_factor(e);
            assert!((g - p_phase_refined(e).powf(0.25)).abs() < e.powi(4));
        }
    }

    #[test]
    fn ordering_and_monotonicity() {
        for e in [1e-3, 0.01, 0.05, 0.3] {
            let mut prev = f64::INFINITY;
            for n in 1..60 {
                let naive = qft_fidelity_naive(n, e).unwrap();
                let refined = qft_fidelity_refined(n, e).unwrap();
                assert!(naive <= refined + 1e-15);
                if n >= 2 {
                    assert!(refined < prev);
                }
                prev = refined;
            }
        }
        for n in [2, 10, 100] {
            let mut prev = 1.0;
            for e in [1e-4, 1e-3, 1e-2, 0.1] {
                let v = qft_fidelity_refined(n, e).unwrap();
                assert!(v < prev);
                prev = v;
                assert!(qft_fidelity_naive(n, e).unwrap() < qft_fidelity_naive(n, e / 2.0).unwrap());
            }
        }
    }

    #[test]
    fn accuracy_table() {
        let n_list = [1, 10, 100, 2000];
        let e_list = [0.0, 0.001, 0.01];
        let t = qft_accuracy_table(&n_list, &e_list).unwrap();
        assert!(t[0].iter().all(|&x| x == 1.0));
        assert!((t[1][3] - 0.69).abs() <= 0.01);
        assert!(t[2][3] < 0.01);
        assert!(t[1].iter().zip(&t[2]).all(|(a, b)| a >= b));
        assert!(qft_accuracy_table(&[], &e_list).is_err());
        assert!(qft_accuracy_table(&n_list, &[]).is_err());
    }

    #[test]
    fn large_n_does_not_underflow_to_nan() {
        let v = qft_fidelity_refined(10_000, 1e-4).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn unit_power_variant_is_larger() {
        let a = qft_fidelity_refined(50, 0.05).unwrap();
        let b = qft_fidelity_refined_unit_power(50, 0.05).unwrap();
        assert!(b > a);
    }
}
