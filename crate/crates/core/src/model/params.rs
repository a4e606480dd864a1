use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// One draw of the outcome model.
///
/// `eta_c0` and `eta_c1` are always populated. `eta_c` is the pooled complier
/// mean and only exists when the null is imposed, in which case it equals
/// both arm-specific means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeParams {
    pub eta_c: Option<f64>,
    pub eta_c0: f64,
    pub eta_c1: f64,
    pub eta_n: f64,
    pub sigma2_c: f64,
    pub sigma2_n: f64,
}

impl OutcomeParams {
    /// Checks the posture constraints on this draw.
    pub fn respects(&self, posture: &ImputationPosture) -> bool {
        let positive = self.sigma2_c > 0.0 && self.sigma2_n > 0.0;
        let null_ok = !posture.impose_null || (self.eta_c == Some(self.eta_c0) && self.eta_c0 == self.eta_c1);
        let mis_ok = !posture.misspecified || self.eta_c1 == self.eta_n;
        positive && null_ok && mis_ok
    }
}

/// Probit compliance model `Pr(C=1 | x) = Phi(alpha_0 + alpha_x x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProbitParams {
    pub alpha_0: f64,
    pub alpha_x: f64,
}

impl ProbitParams {
    pub fn index(&self, x: f64) -> f64 {
        self.alpha_0 + self.alpha_x * x
    }
}

/// How control-arm compliance is imputed.
///
/// | method | impose_null | use_covariates |
/// |--------|-------------|----------------|
/// | m1     | yes         | no             |
/// | m2     | no          | no             |
/// | m3     | yes         | yes            |
/// | m4     | no          | yes            |
///
/// `misspecified` additionally forces treated compliers to share the
/// never-taker mean (`eta_c1 = eta_n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImputationPosture {
    pub impose_null: bool,
    pub use_covariates: bool,
    pub misspecified: bool,
}

impl ImputationPosture {
    pub fn method(number: u8) -> Result<Self, ConfigError> {
        let (impose_null, use_covariates) = match number {
            1 => (true, false),
            2 => (false, false),
            3 => (true, true),
            4 => (false, true),
            other => return invalid(format!("imputation method must be 1..=4, got {other}")),
        };
        Ok(Self { impose_null, use_covariates, misspecified: false })
    }

    pub fn with_misspecification(mut self, misspecified: bool) -> Self {
        self.misspecified = misspecified;
        self
    }

    pub fn method_number(&self) -> u8 {
        match (self.impose_null, self.use_covariates) {
            (true, false) => 1,
            (false, false) => 2,
            (true, true) => 3,
            (false, true) => 4,
        }
    }

    pub fn label(&self) -> String {
        let mut s = format!("m{}", self.method_number());
        if self.misspecified {
            s.push_str("-mis");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    /// Variance of the zero-mean normal prior on every mean and probit
    /// coefficient.
    pub mean_prior_variance: f64,
    pub ig_shape: f64,
    pub ig_rate: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self { mean_prior_variance: 10.0, ig_shape: 0.1, ig_rate: 0.1 }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.mean_prior_variance) && ok(self.ig_shape) && ok(self.ig_rate) {
            Ok(())
        } else {
            invalid(format!("priors must be strictly positive: {self:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { total_iterations: 2000, burn_in: 1000, seed: 0 }
    }
}

impl ChainConfig {
    pub fn new(total_iterations: usize, burn_in: usize, seed: u64) -> Result<Self, ConfigError> {
        let cfg = Self { total_iterations, burn_in, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.burn_in < self.total_iterations {
            Ok(())
        } else {
            invalid(format!(
                "burn-in ({}) must be smaller than total iterations ({})",
                self.burn_in, self.total_iterations
            ))
        }
    }

    pub fn retained(&self) -> usize {
        self.total_iterations - self.burn_in
    }
}

/// Which test quantity an FRT-PP compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatKind {
    /// IV ratio; depends on observed data only.
    IvStatistic,
    /// Complier difference in means; depends on imputed compliance.
    Discrepancy,
}

/// Kind tag carried on a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Statistic,
    Discrepancy,
    ModelBased,
}

impl From<StatKind> for TestKind {
    fn from(k: StatKind) -> Self {
        match k {
            StatKind::IvStatistic => TestKind::Statistic,
            StatKind::Discrepancy => TestKind::Discrepancy,
        }
    }
}

impl TestKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestKind::Statistic => "stat",
            TestKind::Discrepancy => "disc",
            TestKind::ModelBased => "model",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stat" => Ok(TestKind::Statistic),
            "disc" => Ok(TestKind::Discrepancy),
            "model" => Ok(TestKind::ModelBased),
            other => invalid(format!("unknown kind {other:?} (expected stat|disc|model)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub p_value: f64,
    pub kind: TestKind,
    pub retained_iterations: usize,
    /// Retained iterations whose statistic was undefined.
    pub degenerate_draws: usize,
}

impl TestResult {
    pub fn rejects(&self, alpha_level: f64) -> bool {
        self.p_value <= alpha_level
    }
}

/// A full test procedure: an imputation method paired with a test quantity,
/// or a model-based posterior test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Frt { imputation: u8, kind: StatKind },
    Model { covariates: bool },
}

impl Method {
    pub const FRT_ALL: [Method; 8] = [
        Method::Frt { imputation: 1, kind: StatKind::IvStatistic },
        Method::Frt { imputation: 1, kind: StatKind::Discrepancy },
        Method::Frt { imputation: 2, kind: StatKind::IvStatistic },
        Method::Frt { imputation: 2, kind: StatKind::Discrepancy },
        Method::Frt { imputation: 3, kind: StatKind::IvStatistic },
        Method::Frt { imputation: 3, kind: StatKind::Discrepancy },
        Method::Frt { imputation: 4, kind: StatKind::IvStatistic },
        Method::Frt { imputation: 4, kind: StatKind::Discrepancy },
    ];

    /// Imputation posture that drives this method's chain. Model-based tests
    /// read the unconstrained posterior.
    pub fn posture(&self, misspecified: bool) -> ImputationPosture {
        let number = match *self {
            Method::Frt { imputation, .. } => imputation,
            Method::Model { covariates: false } => 2,
            Method::Model { covariates: true } => 4,
        };
        ImputationPosture::method(number)
            .expect("method numbers are validated on construction")
            .with_misspecification(misspecified)
    }

    /// Method column in result files: `m1`..`m4`, `model`, `model_x`.
    pub fn method_id(&self) -> String {
        match self {
            Method::Frt { imputation, .. } => format!("m{imputation}"),
            Method::Model { covariates: false } => "model".into(),
            Method::Model { covariates: true } => "model_x".into(),
        }
    }

    pub fn kind(&self) -> TestKind {
        match self {
            Method::Frt { kind, .. } => (*kind).into(),
            Method::Model { .. } => TestKind::ModelBased,
        }
    }

    /// Series name used on the command line and in figures, e.g. `m2-disc`.
    pub fn series_id(&self) -> String {
        match self {
            Method::Frt { .. } => format!("{}-{}", self.method_id(), self.kind()),
            Method::Model { .. } => self.method_id(),
        }
    }

    pub fn from_ids(method: &str, kind: &str) -> Result<Self, ConfigError> {
        let kind: TestKind = kind.parse()?;
        match (method, kind) {
            ("model", TestKind::ModelBased) => Ok(Method::Model { covariates: false }),
            ("model_x", TestKind::ModelBased) => Ok(Method::Model { covariates: true }),
            ("m2", TestKind::ModelBased) => Ok(Method::Model { covariates: false }),
            ("m4", TestKind::ModelBased) => Ok(Method::Model { covariates: true }),
            ("m1" | "m3", TestKind::ModelBased) => {
                invalid(format!("model-based test reads the unconstrained posterior; {method} imposes the null"))
            }
            (m, TestKind::Statistic | TestKind::Discrepancy) => {
                let imputation = match m {
                    "m1" => 1,
                    "m2" => 2,
                    "m3" => 3,
                    "m4" => 4,
                    other => return invalid(format!("unknown method {other:?}")),
                };
                let kind = if kind == TestKind::Statistic { StatKind::IvStatistic } else { StatKind::Discrepancy };
                Ok(Method::Frt { imputation, kind })
            }
            (other, _) => invalid(format!("unknown method {other:?}")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.series_id())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    /// Parses series ids: `m1-stat`, `m3-disc`, `model`, `model_x`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" | "model_x" => Method::from_ids(s, "model"),
            _ => match s.split_once('-') {
                Some((m, k)) if k != "model" => Method::from_ids(m, k),
                _ => invalid(format!("unknown method series {s:?}")),
            },
        }
    }
}
