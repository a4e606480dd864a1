//! Randomization p-values averaged over imputed compliance, and the
//! model-based posterior test they are compared against.
//!
//! Each retained Gibbs iteration contributes one comparison: a single
//! re-randomized assignment is drawn and its replicate value is compared
//! with the observed value, counting ties as exceedances. Averaging these
//! indicators over iterations integrates over both the permutation
//! distribution and the posterior of the missing labels.

use thiserror::Error;

use crate::gibbs::{ChainState, GibbsError, GibbsSampler};
use crate::model::{
    ChainConfig, ComplianceVector, ImputationPosture, ObservedDataset, Priors, StatKind, TestKind, TestResult,
};
use crate::rng::{sample_permutation_into, DistError, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrtError {
    #[error("IV denominator is zero: no compliers identified among treated")]
    DegenerateDenominator,
    #[error("no compliers in one of the arms")]
    NoCompliersInArm,
    #[error("an arm is empty")]
    EmptyArm,
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("statistic undefined in all {0} retained iterations")]
    AllDrawsDegenerate(usize),
    #[error("model-based test requires an unconstrained posture (null not imposed)")]
    PostureViolation,
    #[error("{0} assignments exceed the enumeration bound of 1e6")]
    CombinatorialBound(u128),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Direction of the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alternative {
    /// Large replicate values are extreme; small p rejects a positive effect.
    #[default]
    Greater,
    /// `min(1, 2 * min(P(rep >= obs), P(rep <= obs)))`.
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestOptions {
    pub priors: Priors,
    pub alternative: Alternative,
}

/// IV ratio `(mean y | z=1 - mean y | z=0) / (mean d | z=1 - mean d | z=0)`.
pub fn iv_statistic(y: &[f64], d: &[u8], z: &[u8]) -> Result<f64, FrtError> {
    if y.len() != z.len() || d.len() != z.len() {
        return Err(FrtError::LengthMismatch);
    }
    let (mut n1, mut y1, mut d1, mut y0, mut d0) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for i in 0..z.len() {
        if z[i] == 1 {
            n1 += 1;
            y1 += y[i];
            d1 += f64::from(d[i]);
        } else {
            y0 += y[i];
            d0 += f64::from(d[i]);
        }
    }
    let n0 = z.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(FrtError::EmptyArm);
    }
    let (n1, n0) = (n1 as f64, n0 as f64);
    let denom = d1 / n1 - d0 / n0;
    if denom == 0.0 {
        return Err(FrtError::DegenerateDenominator);
    }
    Ok((y1 / n1 - y0 / n0) / denom)
}

/// Complier difference in means between arms.
pub fn discrepancy(y: &[f64], c: &[u8], z: &[u8]) -> Result<f64, FrtError> {
    if y.len() != z.len() || c.len() != z.len() {
        return Err(FrtError::LengthMismatch);
    }
    let (mut n1, mut s1, mut n0, mut s0) = (0usize, 0.0, 0usize, 0.0);
    for i in 0..z.len() {
        if c[i] == 1 {
            if z[i] == 1 {
                n1 += 1;
                s1 += y[i];
            } else {
                n0 += 1;
                s0 += y[i];
            }
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(FrtError::NoCompliersInArm);
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

/// Observed and replicate values for one permuted assignment, given labels.
///
/// For the IV statistic the observed value is fixed (`iv_observed`) and the
/// replicate uses receipt `c * z_perm`. For the discrepancy both sides use
/// the labels.
fn comparison(
    kind: StatKind,
    y: &[f64],
    c: &[u8],
    z_obs: &[u8],
    z_perm: &[u8],
    iv_observed: Result<f64, FrtError>,
    receipt: &mut Vec<u8>,
) -> Result<(f64, f64), FrtError> {
    match kind {
        StatKind::IvStatistic => {
            let observed = iv_observed?;
            receipt.clear();
            receipt.extend(c.iter().zip(z_perm).map(|(c, z)| c * z));
            Ok((observed, iv_statistic(y, receipt, z_perm)?))
        }
        StatKind::Discrepancy => Ok((discrepancy(y, c, z_obs)?, discrepancy(y, c, z_perm)?)),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    ge: usize,
    le: usize,
    valid: usize,
    degenerate: usize,
}

impl Tally {
    fn push(&mut self, cmp: Result<(f64, f64), FrtError>) {
        match cmp {
            Ok((observed, replicate)) => {
                self.valid += 1;
                self.ge += usize::from(replicate >= observed);
                self.le += usize::from(replicate <= observed);
            }
            Err(_) => self.degenerate += 1,
        }
    }

    fn p_value(&self, alternative: Alternative) -> Option<f64> {
        if self.valid == 0 {
            return None;
        }
        let n = self.valid as f64;
        Some(match alternative {
            Alternative::Greater => self.ge as f64 / n,
            Alternative::TwoSided => (2.0 * (self.ge.min(self.le) as f64 / n)).min(1.0),
        })
    }

    fn finish(self, kind: TestKind, retained: usize, alternative: Alternative) -> Result<TestResult, FrtError> {
        match self.p_value(alternative) {
            Some(p_value) => {
                Ok(TestResult { p_value, kind, retained_iterations: retained, degenerate_draws: self.degenerate })
            }
            None => Err(FrtError::AllDrawsDegenerate(retained)),
        }
    }
}

/// Runs one chain under `posture` and evaluates every requested kind on it.
///
/// The chain consumes `stream.fork("gibbs")` and the re-randomizations
/// consume `stream.fork("perm")`, so each kind's result equals what a
/// dedicated call with the same stream would return. The outer error covers
/// invalid inputs; inner errors are per kind.
pub fn run_tests(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    kinds: &[TestKind],
    chain: &ChainConfig,
    options: &TestOptions,
    stream: &RngStream,
) -> Result<Vec<Result<TestResult, FrtError>>, FrtError> {
    run_tests_observed(data, posture, kinds, chain, options, stream, |_| {})
}

/// [`run_tests`] with a callback on every sweep, burn-in included.
pub fn run_tests_observed(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    kinds: &[TestKind],
    chain: &ChainConfig,
    options: &TestOptions,
    stream: &RngStream,
    mut observer: impl FnMut(&ChainState),
) -> Result<Vec<Result<TestResult, FrtError>>, FrtError> {
    chain.validate().map_err(GibbsError::from)?;
    let sampler = GibbsSampler::new(data, *posture, options.priors)?;
    let mut gibbs_stream = stream.fork("gibbs");
    let mut perm_stream = stream.fork("perm");

    let (y, z_obs) = (data.y(), data.z());
    let iv_observed = iv_statistic(y, data.d(), z_obs);
    let needs_permutation = kinds.iter().any(|k| *k != TestKind::ModelBased);
    let mut tallies = vec![Tally::default(); kinds.len()];
    let mut z_perm = vec![0u8; data.n()];
    let mut receipt = Vec::with_capacity(data.n());

    sampler.run(chain.total_iterations, &mut gibbs_stream, |state| {
        observer(state);
        if state.iteration <= chain.burn_in {
            return;
        }
        if needs_permutation {
            sample_permutation_into(&mut perm_stream, data.n_t(), &mut z_perm).expect("dataset has both arms");
        }
        let c = state.c.as_slice();
        for (kind, tally) in kinds.iter().zip(tallies.iter_mut()) {
            let cmp = match kind {
                TestKind::Statistic => {
                    comparison(StatKind::IvStatistic, y, c, z_obs, &z_perm, iv_observed.clone(), &mut receipt)
                }
                TestKind::Discrepancy => comparison(StatKind::Discrepancy, y, c, z_obs, &z_perm, Ok(0.0), &mut receipt),
                // Observed 0 against replicate eta_c0 - eta_c1, so the
                // upper-tail count is #{eta_c1 - eta_c0 <= 0}.
                TestKind::ModelBased => Ok((0.0, state.outcome.eta_c0 - state.outcome.eta_c1)),
            };
            tally.push(cmp);
        }
    });

    let retained = chain.retained();
    Ok(kinds
        .iter()
        .zip(tallies)
        .map(|(&kind, tally)| {
            if kind == TestKind::ModelBased && posture.impose_null {
                return Err(FrtError::PostureViolation);
            }
            tally.finish(kind, retained, options.alternative)
        })
        .collect())
}

/// FRT with posterior predictive p-value for one test quantity.
pub fn frt_pp_pvalue(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    kind: StatKind,
    chain: &ChainConfig,
    stream: &RngStream,
) -> Result<TestResult, FrtError> {
    let mut out = run_tests(data, posture, &[kind.into()], chain, &TestOptions::default(), stream)?;
    out.pop().expect("one kind requested")
}

/// Posterior probability that `eta_c1 - eta_c0 <= 0` under the unconstrained
/// model; small values reject in favour of a positive complier effect.
pub fn model_based_pvalue(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    chain: &ChainConfig,
    stream: &RngStream,
) -> Result<TestResult, FrtError> {
    if posture.impose_null {
        return Err(FrtError::PostureViolation);
    }
    let mut out = run_tests(data, posture, &[TestKind::ModelBased], chain, &TestOptions::default(), stream)?;
    out.pop().expect("one kind requested")
}

/// Monte Carlo estimate of the conditional p-value with labels held fixed:
/// the inner loop of [`run_tests`] without the imputation step.
pub fn conditional_pvalue_mc(
    y: &[f64],
    c: &ComplianceVector,
    z: &[u8],
    kind: StatKind,
    draws: usize,
    stream: &mut RngStream,
) -> Result<f64, FrtError> {
    let c = c.as_slice();
    let n_t = z.iter().filter(|&&v| v == 1).count();
    let d_obs: Vec<u8> = c.iter().zip(z).map(|(c, z)| c * z).collect();
    let iv_observed = iv_statistic(y, &d_obs, z);
    let mut z_perm = vec![0u8; z.len()];
    let mut receipt = Vec::new();
    let mut tally = Tally::default();
    for _ in 0..draws {
        sample_permutation_into(stream, n_t, &mut z_perm)?;
        tally.push(comparison(kind, y, c, z, &z_perm, iv_observed.clone(), &mut receipt));
    }
    tally.p_value(Alternative::Greater).ok_or(FrtError::AllDrawsDegenerate(draws))
}

/// Exact counts over every assignment with the observed number treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumeratedCounts {
    pub at_least: u64,
    pub at_most: u64,
    pub ties: u64,
    pub valid: u64,
    pub degenerate: u64,
}

impl EnumeratedCounts {
    pub fn upper_p(&self) -> f64 {
        self.at_least as f64 / self.valid as f64
    }

    pub fn lower_p(&self) -> f64 {
        self.at_most as f64 / self.valid as f64
    }

    pub fn tie_mass(&self) -> f64 {
        self.ties as f64 / self.valid as f64
    }
}

pub const ENUMERATION_LIMIT: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

pub fn enumerate_frt_counts(
    y: &[f64],
    c: &ComplianceVector,
    z: &[u8],
    kind: StatKind,
) -> Result<EnumeratedCounts, FrtError> {
    let n = z.len();
    if y.len() != n || c.len() != n {
        return Err(FrtError::LengthMismatch);
    }
    let n_t = z.iter().filter(|&&v| v == 1).count();
    if n_t == 0 || n_t == n {
        return Err(FrtError::EmptyArm);
    }
    let total = binomial(n, n_t);
    if total > ENUMERATION_LIMIT {
        return Err(FrtError::CombinatorialBound(total));
    }
    let c = c.as_slice();
    let d_obs: Vec<u8> = c.iter().zip(z).map(|(c, z)| c * z).collect();
    let iv_observed = iv_statistic(y, &d_obs, z);
    let mut counts = EnumeratedCounts { at_least: 0, at_most: 0, ties: 0, valid: 0, degenerate: 0 };
    let mut receipt = Vec::new();
    let mut z_perm = vec![0u8; n];
    // Lexicographic walk over n_t-subsets.
    let mut idx: Vec<usize> = (0..n_t).collect();
    loop {
        z_perm.fill(0);
        for &i in &idx {
            z_perm[i] = 1;
        }
        match comparison(kind, y, c, z, &z_perm, iv_observed.clone(), &mut receipt) {
            Ok((observed, replicate)) => {
                counts.valid += 1;
                counts.at_least += u64::from(replicate >= observed);
                counts.at_most += u64::from(replicate <= observed);
                counts.ties += u64::from(replicate == observed);
            }
            Err(_) => counts.degenerate += 1,
        }
        let Some(pos) = (0..n_t).rev().find(|&p| idx[p] < n - n_t + p) else { break };
        idx[pos] += 1;
        for p in pos + 1..n_t {
            idx[p] = idx[p - 1] + 1;
        }
    }
    if counts.valid == 0 {
        return Err(FrtError::AllDrawsDegenerate(total as usize));
    }
    Ok(counts)
}

/// Exact conditional p-value for known labels: share of valid assignments
/// whose replicate is at least the observed value.
pub fn enumerate_frt_pvalue(y: &[f64], c: &ComplianceVector, z: &[u8], kind: StatKind) -> Result<f64, FrtError> {
    Ok(enumerate_frt_counts(y, c, z, kind)?.upper_p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn iv_worked_examples() {
        assert_eq!(iv_statistic(&[3.0, 1.0, 1.0, 1.0], &[1, 0, 0, 0], &[1, 1, 0, 0]).unwrap(), 2.0);
        assert_eq!(iv_statistic(&[5.0, 1.0], &[0, 0], &[1, 0]), Err(FrtError::DegenerateDenominator));
        // Perfect compliance reduces to the difference in means.
        let y = [4.0, 2.0, 1.0, 0.5];
        assert_eq!(iv_statistic(&y, &[1, 1, 0, 0], &[1, 1, 0, 0]).unwrap(), 3.0 - 0.75);
    }

    #[test]
    fn discrepancy_worked_examples() {
        assert_eq!(discrepancy(&[3.0, 9.0, 1.0, 2.0], &[1, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.5);
        assert_eq!(discrepancy(&[3.0, 9.0, 1.0, 2.0], &[0, 0, 0, 0], &[1, 1, 0, 0]), Err(FrtError::NoCompliersInArm));
        let y = [4.0, 2.0, 1.0, 0.5];
        assert_eq!(discrepancy(&y, &[1, 1, 1, 1], &[1, 1, 0, 0]).unwrap(), 3.0 - 0.75);
    }

    #[test]
    fn enumeration_of_constant_outcomes_is_one() {
        let c = ComplianceVector::from_labels(vec![1, 1, 1, 1]);
        for kind in [StatKind::IvStatistic, StatKind::Discrepancy] {
            assert_eq!(enumerate_frt_pvalue(&[2.0; 4], &c, &[1, 1, 0, 0], kind).unwrap(), 1.0);
        }
    }

    #[test]
    fn enumeration_bound() {
        let n = 30;
        let z: Vec<u8> = (0..n).map(|i| u8::from(i < 15)).collect();
        let c = ComplianceVector::from_labels(vec![1; n]);
        assert!(matches!(
            enumerate_frt_pvalue(&vec![0.0; n], &c, &z, StatKind::Discrepancy),
            Err(FrtError::CombinatorialBound(_))
        ));
    }

    #[test]
    fn mc_inner_loop_matches_enumeration() {
        let y = [2.0, 0.5, 1.7, -0.3, 0.9, 0.1];
        let z = [1, 1, 1, 0, 0, 0];
        let c = ComplianceVector::from_labels(vec![1, 0, 1, 1, 1, 0]);
        let mut s = derive_stream(3, "mc");
        for kind in [StatKind::IvStatistic, StatKind::Discrepancy] {
            let exact = enumerate_frt_pvalue(&y, &c, &z, kind).unwrap();
            let mc = conditional_pvalue_mc(&y, &c, &z, kind, 10_000, &mut s).unwrap();
            assert!((exact - mc).abs() < 0.02, "{kind:?}: exact {exact}, mc {mc}");
        }
    }

    #[test]
    fn perfect_compliance_gives_identical_replicates() {
        let y = [2.0, 0.5, 1.7, -0.3, 0.9, 0.1];
        let z = [1, 1, 1, 0, 0, 0];
        let c = ComplianceVector::from_labels(vec![1; 6]);
        let stat = enumerate_frt_counts(&y, &c, &z, StatKind::IvStatistic).unwrap();
        let disc = enumerate_frt_counts(&y, &c, &z, StatKind::Discrepancy).unwrap();
        assert_eq!(stat, disc);
    }

    #[test]
    fn swapping_arms_reflects_the_distribution() {
        // Integer outcomes make ties exact.
        let y = [3.0, 1.0, 2.0, 0.0, 2.0, 1.0];
        let z = [1, 0, 1, 0, 1, 0];
        let swapped: Vec<u8> = z.iter().map(|v| 1 - v).collect();
        let c = ComplianceVector::from_labels(vec![1, 1, 0, 1, 1, 1]);
        let a = enumerate_frt_counts(&y, &c, &z, StatKind::Discrepancy).unwrap();
        let b = enumerate_frt_counts(&y, &c, &swapped, StatKind::Discrepancy).unwrap();
        assert!(a.ties > 0);
        assert!((b.upper_p() - (1.0 - a.upper_p() + a.tie_mass())).abs() < 1e-12);
    }

    #[test]
    fn tally_excludes_degenerate_draws() {
        let mut t = Tally::default();
        t.push(Ok((1.0, 2.0)));
        t.push(Err(FrtError::NoCompliersInArm));
        t.push(Ok((1.0, 0.0)));
        t.push(Ok((1.0, 1.0)));
        assert_eq!(t.degenerate, 1);
        assert_eq!(t.p_value(Alternative::Greater), Some(2.0 / 3.0));
        assert_eq!(t.p_value(Alternative::TwoSided), Some(1.0));
        let r = t.finish(TestKind::Discrepancy, 4, Alternative::Greater).unwrap();
        assert_eq!(r.retained_iterations - r.degenerate_draws, t.valid);
        assert!(Tally::default().finish(TestKind::Statistic, 4, Alternative::Greater).is_err());
    }
}
