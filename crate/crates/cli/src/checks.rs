//! Consistency checks between the sampled noise model and its Kraus
//! representations.

use std::f64::consts::FRAC_PI_2;

use qnoise::estimate::{lambda1, lambda2};
use qnoise::noise::{
    averaged_superoperator, choi_state, cphase_noise_kraus, gaussian_expectation, hadamard_noise_kraus,
    mc_channel_estimate, orthogonalized_cphase_kraus, sample_noisy_cphase, sample_noisy_single_qubit, KrausSet,
    NoiseParams,
};
use qnoise::qcore::{GateMatrix, C64};

use crate::commands::Outcome;
use crate::output::{Cell, Table};
use crate::CliError;

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const CHOI_TOL: f64 = 1e-12;
pub const MOMENT_TOL: f64 = 1e-14;
pub const SAMPLED_TOL: f64 = 5e-3;
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Noise-only Kraus sets at one rate: the single-qubit rotation noise and
/// both phase-noise representations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub hadamard: KrausSet,
    pub diagonal: KrausSet,
    pub orthogonalized: KrausSet,
}

impl ChannelSet {
    pub fn standard(e: f64) -> qnoise::Result<ChannelSet> {
        Ok(ChannelSet {
            hadamard: hadamard_noise_kraus(e)?,
            diagonal: cphase_noise_kraus(e)?,
            orthogonalized: orthogonalized_cphase_kraus(e)?.0,
        })
    }
}

/// Where channel-check gets its Kraus sets; tests substitute broken ones.
pub type ChannelSource = fn(f64) -> qnoise::Result<ChannelSet>;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub e: f64,
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.threshold
    }
}

/// `|tr(A† B)|` over the operator entries.
fn hs_overlap(a: &GateMatrix, b: &GateMatrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// Runs every check at one noise rate.
pub fn checks_at(e: f64, set: &ChannelSet, trials: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let mut push = |name, value, threshold| out.push(Check { e, name, value, threshold });

    push("completeness_hadamard", set.hadamard.completeness_residual(), COMPLETENESS_TOL);
    push("completeness_eq4", set.diagonal.completeness_residual(), COMPLETENESS_TOL);
    push("completeness_eq7", set.orthogonalized.completeness_residual(), COMPLETENESS_TOL);

    let choi = choi_state(&set.diagonal).max_abs_diff(&choi_state(&set.orthogonalized))?;
    push("choi_eq4_vs_eq7", choi, CHOI_TOL);

    let cos2 = gaussian_expectation(|x| C64::new((e * x).cos().powi(2), 0.0));
    let sin2 = gaussian_expectation(|x| C64::new((e * x).sin().powi(2), 0.0));
    let coherence = gaussian_expectation(|x| C64::from_polar(1.0, -e * x));
    push("moment_cos2", (cos2 - lambda1(e)).norm(), MOMENT_TOL);
    push("moment_sin2", (sin2 - lambda2(e)).norm(), MOMENT_TOL);
    push("moment_coherence", (coherence - (-e * e / 2.0).exp()).norm(), MOMENT_TOL);
    let quad_h = averaged_superoperator(|x| GateMatrix::rotation(e * x));
    push("quadrature_hadamard", quad_h.max_abs_diff(&set.hadamard.superoperator())?, MOMENT_TOL);
    let quad_c = averaged_superoperator(|x| GateMatrix::cphase(e * x));
    push("quadrature_cphase", quad_c.max_abs_diff(&set.diagonal.superoperator())?, MOMENT_TOL);

    let h = GateMatrix::hadamard();
    let params = NoiseParams::new(e, 0.0)?;
    let sampled_h = mc_channel_estimate(|rng| sample_noisy_single_qubit(&h, params, rng).unwrap(), trials, seed)?;
    push("sampled_hadamard", sampled_h.max_abs_diff(&set.hadamard.then(&h)?.superoperator())?, SAMPLED_TOL);
    let params = NoiseParams::new(e, FRAC_PI_2)?;
    let sampled_c = mc_channel_estimate(|rng| sample_noisy_cphase(params, rng), trials, seed.wrapping_add(1))?;
    let kraus_c = set.diagonal.then(&GateMatrix::cphase(FRAC_PI_2))?.superoperator();
    push("sampled_cphase", sampled_c.max_abs_diff(&kraus_c)?, SAMPLED_TOL);

    let ortho = match set.orthogonalized.ops() {
        [a, b] => hs_overlap(a, b),
        ops => ops
            .iter()
            .enumerate()
            .flat_map(|(i, a)| ops[i + 1..].iter().map(move |b| hs_overlap(a, b)))
            .fold(0.0, f64::max),
    };
    push("orthogonality_eq7", ortho, ORTHOGONALITY_TOL);
    Ok(out)
}

pub fn channel_check(e_list: &[f64], trials: usize, seed: u64, source: ChannelSource) -> Result<Outcome, CliError> {
    let mut table = Table::new(["e", "check", "value", "threshold", "pass"]);
    let mut failed = Vec::new();
    for &e in e_list {
        let set = source(e)?;
        for c in checks_at(e, &set, trials, seed)? {
            if !c.passed() {
                failed.push(format!("{} at e={} ({:.3e} > {:.0e})", c.name, c.e, c.value, c.threshold));
            }
            table.push(vec![
                Cell::Float(c.e),
                c.name.into(),
                Cell::Float(c.value),
                Cell::Float(c.threshold),
                if c.passed() { "true" } else { "false" }.into(),
            ]);
        }
    }
    let breach = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join("; ")));
    Ok(Outcome { table, breach })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_residuals_vanish() {
        let set = ChannelSet::standard(0.0).unwrap();
        for c in checks_at(0.0, &set, 1000, 3).unwrap() {
            assert!(c.value <= 1e-12, "{} = {}", c.name, c.value);
        }
    }

    #[test]
    fn perturbed_operator_fails_completeness() {
        let mut set = ChannelSet::standard(0.1).unwrap();
        let ops: Vec<GateMatrix> = set
            .diagonal
            .ops()
            .iter()
            .map(|op| GateMatrix::new(2, op.data().iter().map(|z| z * 1.01).collect()).unwrap())
            .collect();
        set.diagonal = KrausSet::new(ops).unwrap();
        let checks = checks_at(0.1, &set, 1000, 3).unwrap();
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
        assert!(failed.contains(&"completeness_eq4"));
        assert!(failed.contains(&"choi_eq4_vs_eq7"));
    }
}
