//! Two-block data-augmentation sampler for the compliance mixture.
//!
//! One sweep draws the outcome parameters given the current labels, then the
//! probit coefficients through latent utilities, then fresh control-arm labels
//! given both. Treated units keep their revealed types throughout.
//!
//! The outcome prior is semi-conjugate: every mean has an independent
//! `N(0, v0)` prior and every variance an `IG(a, b)` prior, so the variances
//! are drawn given the current means and the means given the new variances.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    ChainConfig, ComplianceVector, ConfigError, ImputationPosture, ObservedDataset, OutcomeParams, Priors, ProbitParams,
};
use crate::rng::{
    log_normal_cdf, log_normal_pdf, sample_inverse_gamma, sample_truncated_normal, RngStream, TruncationSide,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("posture uses covariates but the dataset has no x column")]
    MissingCovariate,
    #[error("compliance labels do not match the dataset's treated arm")]
    InconsistentLabels,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub outcome: OutcomeParams,
    pub probit: ProbitParams,
    pub c: ComplianceVector,
    pub iteration: usize,
}

impl ChainState {
    pub fn imputed_compliers(&self, data: &ObservedDataset) -> usize {
        data.z().iter().zip(self.c.as_slice()).filter(|(&z, &c)| z == 0 && c == 1).count()
    }
}

/// Centered sufficient statistics of one outcome cell.
#[derive(Debug, Clone, Copy, Default)]
struct CellStats {
    n: f64,
    sum: f64,
    /// Sum of squares around the cell mean.
    ss: f64,
}

impl CellStats {
    fn from_values(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (n, sum) = values.clone().fold((0.0, 0.0), |(n, s), y| (n + 1.0, s + y));
        if n == 0.0 {
            return Self::default();
        }
        let mean = sum / n;
        let ss = values.map(|y| (y - mean) * (y - mean)).sum();
        Self { n, sum, ss }
    }

    /// Sum of squares around an arbitrary centre.
    fn ss_about(&self, centre: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let d = self.sum / self.n - centre;
        self.ss + self.n * d * d
    }
}

/// Outcome cells that the posture maps onto shared means.
#[derive(Debug, Clone, Copy)]
struct OutcomeCells {
    treated_compliers: CellStats,
    control_compliers: CellStats,
    never_takers: CellStats,
}

impl OutcomeCells {
    fn collect(data: &ObservedDataset, c: &[u8]) -> Self {
        let y = data.y();
        let z = data.z();
        let cell = |keep: fn(u8, u8) -> bool| {
            CellStats::from_values((0..y.len()).filter(move |&i| keep(z[i], c[i])).map(move |i| y[i]))
        };
        Self {
            treated_compliers: cell(|z, c| z == 1 && c == 1),
            control_compliers: cell(|z, c| z == 0 && c == 1),
            never_takers: cell(|_, c| c == 0),
        }
    }
}

/// Normal full conditional of a mean shared by cells with known variances,
/// under a `N(0, prior_variance)` prior. Returns `(mean, variance)`.
pub fn mean_full_conditional(cells: &[(f64, f64, f64)], prior_variance: f64) -> (f64, f64) {
    // cells: (count, sum, variance)
    let mut precision = 1.0 / prior_variance;
    let mut weighted = 0.0;
    for &(n, sum, var) in cells {
        precision += n / var;
        weighted += sum / var;
    }
    (weighted / precision, 1.0 / precision)
}

/// Inverse-gamma full conditional `(shape, rate)` of a variance given `n`
/// residuals with sum of squares `ss`.
pub fn variance_full_conditional(n: f64, ss: f64, priors: &Priors) -> (f64, f64) {
    (priors.ig_shape + 0.5 * n, priors.ig_rate + 0.5 * ss)
}

fn draw_normal(stream: &mut RngStream, (mean, var): (f64, f64)) -> f64 {
    mean + var.sqrt() * stream.standard_normal()
}

fn draw_ig(stream: &mut RngStream, (shape, rate): (f64, f64)) -> f64 {
    sample_inverse_gamma(stream, shape, rate).expect("priors validated positive")
}

fn check_inputs(data: &ObservedDataset, posture: &ImputationPosture, priors: &Priors) -> Result<(), GibbsError> {
    priors.validate()?;
    if posture.use_covariates && data.x().is_none() {
        return Err(GibbsError::MissingCovariate);
    }
    Ok(())
}

/// Draws outcome variances given the means in `previous`, then the means
/// given the new variances. Empty cells fall back to prior draws.
pub fn sample_outcome_params(
    data: &ObservedDataset,
    c: &ComplianceVector,
    posture: &ImputationPosture,
    priors: &Priors,
    previous: &OutcomeParams,
    stream: &mut RngStream,
) -> OutcomeParams {
    let cells = OutcomeCells::collect(data, c.as_slice());
    let ss_c = cells.treated_compliers.ss_about(previous.eta_c1) + cells.control_compliers.ss_about(previous.eta_c0);
    let n_c = cells.treated_compliers.n + cells.control_compliers.n;
    let sigma2_c = draw_ig(stream, variance_full_conditional(n_c, ss_c, priors));
    let sigma2_n = draw_ig(
        stream,
        variance_full_conditional(cells.never_takers.n, cells.never_takers.ss_about(previous.eta_n), priors),
    );
    means_given_variances(&cells, posture, priors, sigma2_c, sigma2_n, |fc| draw_normal(stream, fc))
}

fn means_given_variances(
    cells: &OutcomeCells,
    posture: &ImputationPosture,
    priors: &Priors,
    sigma2_c: f64,
    sigma2_n: f64,
    mut pick: impl FnMut((f64, f64)) -> f64,
) -> OutcomeParams {
    let v0 = priors.mean_prior_variance;
    let tc = (cells.treated_compliers.n, cells.treated_compliers.sum, sigma2_c);
    let cc = (cells.control_compliers.n, cells.control_compliers.sum, sigma2_c);
    let nt = (cells.never_takers.n, cells.never_takers.sum, sigma2_n);
    let (eta_c, eta_c0, eta_c1, eta_n) = match (posture.impose_null, posture.misspecified) {
        (true, false) => {
            let eta_c = pick(mean_full_conditional(&[tc, cc], v0));
            let eta_n = pick(mean_full_conditional(&[nt], v0));
            (Some(eta_c), eta_c, eta_c, eta_n)
        }
        (false, false) => {
            let eta_c0 = pick(mean_full_conditional(&[cc], v0));
            let eta_c1 = pick(mean_full_conditional(&[tc], v0));
            let eta_n = pick(mean_full_conditional(&[nt], v0));
            (None, eta_c0, eta_c1, eta_n)
        }
        (false, true) => {
            let eta_c0 = pick(mean_full_conditional(&[cc], v0));
            let eta_n = pick(mean_full_conditional(&[tc, nt], v0));
            (None, eta_c0, eta_n, eta_n)
        }
        // Null and misspecification together leave a single common mean.
        (true, true) => {
            let eta = pick(mean_full_conditional(&[tc, cc, nt], v0));
            (Some(eta), eta, eta, eta)
        }
    };
    OutcomeParams { eta_c, eta_c0, eta_c1, eta_n, sigma2_c, sigma2_n }
}

/// Draws latent utilities `u_i ~ N(alpha_0 + alpha_x x_i, 1)` truncated to
/// the side given by `c_i`, then the coefficients from their normal full
/// conditional under a `N(0, v0 I)` prior.
pub fn sample_probit_params(
    c: &ComplianceVector,
    x: Option<&[f64]>,
    posture: &ImputationPosture,
    priors: &Priors,
    current: &ProbitParams,
    stream: &mut RngStream,
) -> ProbitParams {
    let c = c.as_slice();
    let inv_v0 = 1.0 / priors.mean_prior_variance;
    let latent = |stream: &mut RngStream, mean: f64, complier: u8| {
        let side = if complier == 1 { TruncationSide::Above0 } else { TruncationSide::Below0 };
        sample_truncated_normal(stream, mean, 1.0, side).expect("unit variance")
    };

    match (posture.use_covariates, x) {
        (true, Some(x)) => {
            let (mut sx, mut sxx, mut su, mut sxu) = (0.0, 0.0, 0.0, 0.0);
            for (i, &xi) in x.iter().enumerate() {
                let u = latent(stream, current.index(xi), c[i]);
                sx += xi;
                sxx += xi * xi;
                su += u;
                sxu += xi * u;
            }
            let n = c.len() as f64;
            // Precision [[p00, p01], [p01, p11]] and its Cholesky factor.
            let (p00, p01, p11) = (n + inv_v0, sx, sxx + inv_v0);
            let det = p00 * p11 - p01 * p01;
            let mean0 = (p11 * su - p01 * sxu) / det;
            let mean1 = (p00 * sxu - p01 * su) / det;
            let l00 = p00.sqrt();
            let l10 = p01 / l00;
            let l11 = (p11 - l10 * l10).sqrt();
            // Solve L^T e = xi for a draw with covariance P^{-1}.
            let (xi0, xi1) = (stream.standard_normal(), stream.standard_normal());
            let e1 = xi1 / l11;
            let e0 = (xi0 - l10 * e1) / l00;
            ProbitParams { alpha_0: mean0 + e0, alpha_x: mean1 + e1 }
        }
        _ => {
            let mut su = 0.0;
            for &ci in c {
                su += latent(stream, current.alpha_0, ci);
            }
            let precision = c.len() as f64 + inv_v0;
            let alpha_0 = su / precision + stream.standard_normal() / precision.sqrt();
            ProbitParams { alpha_0, alpha_x: 0.0 }
        }
    }
}

/// Posterior probability that a control unit with outcome `y` and probit
/// index `index` is a complier, computed as a log-odds.
pub fn complier_probability(y: f64, index: f64, outcome: &OutcomeParams) -> f64 {
    let log_complier = log_normal_pdf(y, outcome.eta_c0, outcome.sigma2_c) + log_normal_cdf(index);
    let log_never = log_normal_pdf(y, outcome.eta_n, outcome.sigma2_n) + log_normal_cdf(-index);
    1.0 / (1.0 + (log_never - log_complier).exp())
}

/// Redraws every control-arm label; treated labels are copied from `d`.
pub fn impute_compliance(
    data: &ObservedDataset,
    outcome: &OutcomeParams,
    probit: &ProbitParams,
    posture: &ImputationPosture,
    stream: &mut RngStream,
) -> ComplianceVector {
    let mut c = ComplianceVector::from_dataset(data, |_| false);
    impute_into(data, outcome, probit, posture, stream, &mut c);
    c
}

fn impute_into(
    data: &ObservedDataset,
    outcome: &OutcomeParams,
    probit: &ProbitParams,
    posture: &ImputationPosture,
    stream: &mut RngStream,
    c: &mut ComplianceVector,
) {
    let covariate = if posture.use_covariates { data.x() } else { None };
    let (y, z) = (data.y(), data.z());
    for i in 0..data.n() {
        if z[i] == 1 {
            continue;
        }
        let index = match covariate {
            Some(x) => probit.index(x[i]),
            None => probit.alpha_0,
        };
        let p = complier_probability(y[i], index, outcome);
        c.set(i, stream.bernoulli(p));
    }
}

/// A configured sampler. Parts of the parameter vector can be pinned, which
/// turns the chain into a sampler for the remaining blocks (used by exact
/// enumeration checks).
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    data: &'a ObservedDataset,
    posture: ImputationPosture,
    priors: Priors,
    fixed_probit: Option<ProbitParams>,
    fixed_variances: Option<(f64, f64)>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(data: &'a ObservedDataset, posture: ImputationPosture, priors: Priors) -> Result<Self, GibbsError> {
        check_inputs(data, &posture, &priors)?;
        Ok(Self { data, posture, priors, fixed_probit: None, fixed_variances: None })
    }

    pub fn with_fixed_probit(mut self, probit: ProbitParams) -> Self {
        self.fixed_probit = Some(probit);
        self
    }

    pub fn with_fixed_variances(mut self, sigma2_c: f64, sigma2_n: f64) -> Self {
        self.fixed_variances = Some((sigma2_c, sigma2_n));
        self
    }

    /// Control labels start as Bernoulli draws at the treated-arm uptake
    /// rate. Means start at their full-conditional centres with unit
    /// variances.
    pub fn initial_state(&self, stream: &mut RngStream) -> ChainState {
        let uptake = self.data.treated_uptake();
        let c = ComplianceVector::from_dataset(self.data, |_| stream.bernoulli(uptake));
        let cells = OutcomeCells::collect(self.data, c.as_slice());
        let (s2c, s2n) = self.fixed_variances.unwrap_or((1.0, 1.0));
        let outcome = means_given_variances(&cells, &self.posture, &self.priors, s2c, s2n, |(mean, _)| mean);
        let probit = self.fixed_probit.unwrap_or_default();
        ChainState { outcome, probit, c, iteration: 0 }
    }

    /// One full sweep: outcome parameters, probit parameters, imputation.
    pub fn step(&self, state: &mut ChainState, stream: &mut RngStream) {
        state.outcome = match self.fixed_variances {
            Some((s2c, s2n)) => {
                let cells = OutcomeCells::collect(self.data, state.c.as_slice());
                means_given_variances(&cells, &self.posture, &self.priors, s2c, s2n, |fc| draw_normal(stream, fc))
            }
            None => sample_outcome_params(self.data, &state.c, &self.posture, &self.priors, &state.outcome, stream),
        };
        state.probit = match self.fixed_probit {
            Some(p) => p,
            None => sample_probit_params(&state.c, self.data.x(), &self.posture, &self.priors, &state.probit, stream),
        };
        impute_into(self.data, &state.outcome, &state.probit, &self.posture, stream, &mut state.c);
        state.iteration += 1;
    }

    /// Runs `iterations` sweeps, calling `observer` after each one. The
    /// first observed state has `iteration == 1`.
    pub fn run(&self, iterations: usize, stream: &mut RngStream, mut observer: impl FnMut(&ChainState)) -> ChainState {
        let mut state = self.initial_state(stream);
        for _ in 0..iterations {
            self.step(&mut state, stream);
            observer(&state);
        }
        state
    }
}

/// Runs a full chain of `chain.total_iterations` sweeps.
pub fn run_chain(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    priors: &Priors,
    chain: &ChainConfig,
    stream: &mut RngStream,
    observer: impl FnMut(&ChainState),
) -> Result<ChainState, GibbsError> {
    chain.validate()?;
    let sampler = GibbsSampler::new(data, *posture, *priors)?;
    Ok(sampler.run(chain.total_iterations, stream, observer))
}

/// Accumulates a chain trace as CSV.
#[derive(Debug, Clone)]
pub struct TraceWriter {
    buf: String,
}

impl Default for TraceWriter {
    fn default() -> Self {
        Self {
            buf: String::from(
                "iteration,eta_c,eta_c0,eta_c1,eta_n,sigma2_c,sigma2_n,alpha_0,alpha_x,n_imputed_compliers\n",
            ),
        }
    }
}

impl TraceWriter {
    pub fn record(&mut self, data: &ObservedDataset, state: &ChainState) {
        let o = &state.outcome;
        let eta_c = o.eta_c.map_or_else(|| "NA".to_owned(), |v| format!("{v:?}"));
        writeln!(
            self.buf,
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            state.iteration,
            eta_c,
            o.eta_c0,
            o.eta_c1,
            o.eta_n,
            o.sigma2_c,
            o.sigma2_n,
            state.probit.alpha_0,
            state.probit.alpha_x,
            state.imputed_compliers(data)
        )
        .unwrap();
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::generate;
    use crate::model::{Predictiveness, ScenarioConfig};
    use crate::rng::{derive_stream, normal_cdf, normal_pdf};

    fn posture(m: u8) -> ImputationPosture {
        ImputationPosture::method(m).unwrap()
    }

    fn small_data() -> ObservedDataset {
        ObservedDataset::new(
            vec![1, 1, 1, 0, 0, 0],
            vec![1, 0, 1, 0, 0, 0],
            vec![2.0, -0.5, 1.5, 0.3, 2.2, -1.0],
            Some(vec![0.1, -0.2, 0.3, 1.0, -1.0, 0.0]),
        )
        .unwrap()
    }

    fn params(eta_c: f64, eta_n: f64, s2c: f64, s2n: f64) -> OutcomeParams {
        OutcomeParams { eta_c: None, eta_c0: eta_c, eta_c1: eta_c, eta_n, sigma2_c: s2c, sigma2_n: s2n }
    }

    #[test]
    fn conjugate_mean_closed_form() {
        let (m, v) = mean_full_conditional(&[(100.0, 200.0, 1.0)], 10.0);
        assert!((m - 200.0 / 100.1).abs() < 1e-12);
        assert!((m - 1.998).abs() < 1e-3);
        assert!((v - 1.0 / 100.1).abs() < 1e-15);
        assert_eq!(mean_full_conditional(&[(0.0, 0.0, 1.0)], 10.0), (0.0, 10.0));
    }

    #[test]
    fn empty_complier_group_draws_from_prior() {
        // Every control unit labelled never-taker and no treated complier.
        let data = ObservedDataset::new(vec![1, 0, 0], vec![0, 0, 0], vec![0.5, 0.1, -0.2], None).unwrap();
        let c = ComplianceVector::from_dataset(&data, |_| false);
        let priors = Priors::default();
        let prev = params(0.0, 0.0, 1.0, 1.0);
        let mut s = derive_stream(1, "prior");
        let draws: Vec<OutcomeParams> =
            (0..20_000).map(|_| sample_outcome_params(&data, &c, &posture(2), &priors, &prev, &mut s)).collect();
        let eta: Vec<f64> = draws.iter().map(|p| p.eta_c0).collect();
        let mean = eta.iter().sum::<f64>() / eta.len() as f64;
        let var = eta.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / eta.len() as f64;
        assert!(mean.abs() < 0.1, "{mean}");
        assert!((var - 10.0).abs() < 0.5, "{var}");
        // IG(0.1, 0.1) has no mean; compare the median with its closed form
        // 0.1 / median(Gamma(0.1, 1)).
        let mut s2: Vec<f64> = draws.iter().map(|p| p.sigma2_c).collect();
        s2.sort_by(f64::total_cmp);
        let median = s2[s2.len() / 2];
        assert!(median > 1e2, "IG(0.1,0.1) median is ~1.7e2, got {median}");
    }

    #[test]
    fn conjugate_moments_by_simulation() {
        let mut s = derive_stream(4, "moments");
        let fc = mean_full_conditional(&[(100.0, 200.0, 1.0)], 10.0);
        let draws: Vec<f64> = (0..100_000).map(|_| draw_normal(&mut s, fc)).collect();
        let m = draws.iter().sum::<f64>() / 1e5;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (1e5 - 1.0);
        assert!((m - 1.998).abs() < 1e-3, "{m}");
        assert!((v - 1.0 / 100.1).abs() < 1e-3, "{v}");

        let (shape, rate) = variance_full_conditional(1000.0, 1000.0, &Priors::default());
        let draws: Vec<f64> = (0..100_000).map(|_| draw_ig(&mut s, (shape, rate))).collect();
        let m = draws.iter().sum::<f64>() / 1e5;
        assert!((m - rate / (shape - 1.0)).abs() < 1e-3, "{m}");
    }

    #[test]
    fn null_posture_pins_complier_means() {
        let data = small_data();
        let c = ComplianceVector::from_dataset(&data, |i| i % 2 == 0);
        let mut s = derive_stream(2, "null");
        let prev = params(0.0, 0.0, 1.0, 1.0);
        for _ in 0..100 {
            let p = sample_outcome_params(&data, &c, &posture(1), &Priors::default(), &prev, &mut s);
            assert_eq!(p.eta_c, Some(p.eta_c0));
            assert_eq!(p.eta_c0, p.eta_c1);
            assert!(p.respects(&posture(1)));
            let mis = posture(2).with_misspecification(true);
            let p = sample_outcome_params(&data, &c, &mis, &Priors::default(), &prev, &mut s);
            assert_eq!(p.eta_c1, p.eta_n);
            assert!(p.respects(&mis));
        }
    }

    #[test]
    fn probit_all_compliers_pushes_intercept_up() {
        let data = ObservedDataset::new(
            (0..500).map(|i| u8::from(i < 250)).collect(),
            (0..500).map(|i| u8::from(i < 250)).collect(),
            vec![0.0; 500],
            None,
        )
        .unwrap();
        let c = ComplianceVector::from_dataset(&data, |_| true);
        let mut s = derive_stream(3, "probit");
        let mut cur = ProbitParams::default();
        let mut above = 0;
        for _ in 0..300 {
            cur = sample_probit_params(&c, None, &posture(2), &Priors::default(), &cur, &mut s);
            assert_eq!(cur.alpha_x, 0.0);
        }
        for _ in 0..1000 {
            cur = sample_probit_params(&c, None, &posture(2), &Priors::default(), &cur, &mut s);
            above += usize::from(cur.alpha_0 > 1.5);
        }
        assert!(above >= 900, "{above}");
    }

    #[test]
    fn probit_balanced_labels_center_on_zero() {
        let n = 500;
        let c = ComplianceVector::from_labels((0..n).map(|i| (i % 2) as u8).collect());
        let mut s = derive_stream(5, "balanced");
        let mut cur = ProbitParams::default();
        let mut sum = 0.0;
        for k in 0..3000 {
            cur = sample_probit_params(&c, None, &posture(1), &Priors::default(), &cur, &mut s);
            if k >= 500 {
                sum += cur.alpha_0;
            }
        }
        assert!((sum / 2500.0).abs() < 0.15);
    }

    #[test]
    fn probit_with_covariates_recovers_slope() {
        let mut s = derive_stream(6, "slope");
        let x: Vec<f64> = (0..2000).map(|_| s.standard_normal()).collect();
        let c = ComplianceVector::from_labels(
            x.iter().map(|&xi| u8::from(-0.5 + 1.5 * xi + s.standard_normal() > 0.0)).collect(),
        );
        let mut cur = ProbitParams::default();
        let (mut a0, mut ax) = (0.0, 0.0);
        for k in 0..1500 {
            cur = sample_probit_params(&c, Some(&x), &posture(4), &Priors::default(), &cur, &mut s);
            if k >= 500 {
                a0 += cur.alpha_0;
                ax += cur.alpha_x;
            }
        }
        assert!((a0 / 1000.0 + 0.5).abs() < 0.15, "{}", a0 / 1000.0);
        assert!((ax / 1000.0 - 1.5).abs() < 0.2, "{}", ax / 1000.0);
    }

    #[test]
    fn imputation_cancellation_case() {
        for &a in &[-2.0, -0.8, 0.0, 0.7, 3.0] {
            for &y in &[-5.0, 0.0, 1.3, 10.0] {
                let p = complier_probability(y, a, &params(0.4, 0.4, 2.0, 2.0));
                assert!((p - normal_cdf(a)).abs() < 1e-15, "{p} vs {}", normal_cdf(a));
            }
        }
    }

    #[test]
    fn imputation_worked_value() {
        let p = complier_probability(1.0, 0.0, &params(1.0, 0.0, 1.0, 1.0));
        let direct =
            normal_pdf(1.0, 1.0, 1.0) * 0.5 / (normal_pdf(1.0, 1.0, 1.0) * 0.5 + normal_pdf(1.0, 0.0, 1.0) * 0.5);
        assert!((p - 0.6225).abs() < 1e-4, "{p}");
        assert!((p - direct).abs() < 1e-12);
    }

    #[test]
    fn imputation_far_from_complier_mean() {
        let p = complier_probability(0.0, 0.0, &params(10.0, 0.0, 1.0, 1.0));
        assert!(p < 1e-6);
        // Extreme outcomes stay finite instead of 0/0.
        let p = complier_probability(1e4, 0.0, &params(10.0, 0.0, 1.0, 1.0));
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn imputation_monotone_in_outcome() {
        let outcome = params(1.0, -1.0, 1.0, 1.0);
        let mut prev = 0.0;
        for k in -200..=200 {
            let p = complier_probability(k as f64 / 20.0, -0.8, &outcome);
            assert!(p > prev || (p == 1.0 && prev == 1.0), "at {k}: {p} <= {prev}");
            prev = p;
        }
    }

    #[test]
    fn impute_keeps_treated_labels() {
        let data = small_data();
        let mut s = derive_stream(8, "keep");
        for _ in 0..50 {
            let c =
                impute_compliance(&data, &params(1.0, 0.0, 1.0, 1.0), &ProbitParams::default(), &posture(2), &mut s);
            assert!(c.is_consistent_with(&data));
        }
    }

    #[test]
    fn chain_is_deterministic_and_respects_constraints() {
        let cfg = ScenarioConfig { predictiveness: Predictiveness::Medium, eta_c0: 1.0, ..Default::default() };
        let (data, _) = generate(&cfg, &mut derive_stream(1, "data")).unwrap();
        let chain = ChainConfig::new(60, 10, 0).unwrap();
        for p in
            [posture(1), posture(3), posture(4).with_misspecification(true), posture(1).with_misspecification(true)]
        {
            let run = || {
                let mut states = Vec::new();
                run_chain(&data, &p, &Priors::default(), &chain, &mut derive_stream(9, "chain"), |s| {
                    states.push(s.clone())
                })
                .unwrap();
                states
            };
            let a = run();
            assert_eq!(a, run());
            assert_eq!(a.len(), 60);
            for s in &a {
                assert!(s.c.is_consistent_with(&data));
                assert!(s.outcome.respects(&p));
                if !p.use_covariates {
                    assert_eq!(s.probit.alpha_x, 0.0);
                }
            }
        }
    }

    #[test]
    fn covariate_posture_needs_covariates() {
        let data = ObservedDataset::new(vec![1, 0], vec![1, 0], vec![0.0, 1.0], None).unwrap();
        assert_eq!(GibbsSampler::new(&data, posture(3), Priors::default()).unwrap_err(), GibbsError::MissingCovariate);
    }

    #[test]
    fn trace_has_one_row_per_iteration() {
        let data = small_data();
        let mut trace = TraceWriter::default();
        let chain = ChainConfig::new(5, 1, 0).unwrap();
        run_chain(&data, &posture(1), &Priors::default(), &chain, &mut derive_stream(1, "t"), |s| {
            trace.record(&data, s)
        })
        .unwrap();
        let text = trace.into_string();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with(
            "iteration,eta_c,eta_c0,eta_c1,eta_n,sigma2_c,sigma2_n,alpha_0,alpha_x,n_imputed_compliers\n"
        ));
    }
}
