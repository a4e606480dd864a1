use std::fmt;
use std::str::FromStr;

use super::params::{invalid, ChainConfig, ConfigError};

/// How strongly the covariate predicts compliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predictiveness {
    None,
    Medium,
    High,
}

impl Predictiveness {
    pub const ALL: [Predictiveness; 3] = [Predictiveness::None, Predictiveness::Medium, Predictiveness::High];

    /// Covariate slope of the compliance probit.
    pub fn slope(&self) -> f64 {
        match self {
            Predictiveness::None => 0.0,
            Predictiveness::Medium => 2.0,
            Predictiveness::High => 5.0,
        }
    }

    /// Probit coefficients `[alpha_0, alpha_x]` under the given intercept rule.
    pub fn alpha(&self, levels: ComplianceLevels) -> [f64; 2] {
        let ax = self.slope();
        let a0 = match (levels, self) {
            (ComplianceLevels::ShareMatched, _) => TARGET_SHARE_QUANTILE * (1.0 + ax * ax).sqrt(),
            (ComplianceLevels::Nominal, Predictiveness::None) => -0.8,
            (ComplianceLevels::Nominal, Predictiveness::Medium) => -1.4,
            (ComplianceLevels::Nominal, Predictiveness::High) => -2.8,
        };
        [a0, ax]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Predictiveness::None => "none",
            Predictiveness::Medium => "medium",
            Predictiveness::High => "high",
        }
    }
}

impl fmt::Display for Predictiveness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predictiveness {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Predictiveness::None),
            "medium" => Ok(Predictiveness::Medium),
            "high" => Ok(Predictiveness::High),
            other => invalid(format!("unknown predictiveness {other:?} (none|medium|high)")),
        }
    }
}

/// `Phi^{-1}(0.30)`: intercept scale giving a 30% marginal complier share.
const TARGET_SHARE_QUANTILE: f64 = -0.524_400_512_708_041;

/// How the compliance intercept is chosen for each predictiveness level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ComplianceLevels {
    /// `alpha_0 = Phi^{-1}(0.30) * sqrt(1 + alpha_x^2)`, so every level has
    /// a 30% marginal complier share.
    #[default]
    ShareMatched,
    /// Fixed intercepts -0.8, -1.4, -2.8 (shares of about 21%, 27% and 24%).
    Nominal,
}

impl ComplianceLevels {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComplianceLevels::ShareMatched => "share",
            ComplianceLevels::Nominal => "nominal",
        }
    }
}

impl FromStr for ComplianceLevels {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "share" => Ok(ComplianceLevels::ShareMatched),
            "nominal" => Ok(ComplianceLevels::Nominal),
            other => invalid(format!("unknown compliance levels {other:?} (share|nominal)")),
        }
    }
}

/// Complier control means used across the simulation grid (`eta_n = 0`).
pub const ETA_C0_GRID: [f64; 9] = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

/// Complier effect under the alternative.
pub const TAU_ALTERNATIVE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub n_t: usize,
    pub predictiveness: Predictiveness,
    pub levels: ComplianceLevels,
    pub eta_n: f64,
    pub eta_c0: f64,
    pub tau: f64,
    /// Outcome variance in the generator.
    pub outcome_variance: f64,
    pub replications: usize,
    pub chain: ChainConfig,
    pub alpha_level: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 500,
            n_t: 250,
            predictiveness: Predictiveness::None,
            levels: ComplianceLevels::ShareMatched,
            eta_n: 0.0,
            eta_c0: 0.0,
            tau: 0.0,
            outcome_variance: 1.0,
            replications: 200,
            chain: ChainConfig { total_iterations: 1000, burn_in: 500, seed: 0 },
            alpha_level: 0.05,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_t == 0 || self.n_t >= self.n {
            return invalid(format!("need 0 < n_t < n, got n={}, n_t={}", self.n, self.n_t));
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return invalid(format!("alpha level must lie in (0,1), got {}", self.alpha_level));
        }
        if !(self.outcome_variance > 0.0 && self.outcome_variance.is_finite()) {
            return invalid("outcome variance must be positive");
        }
        if ![self.eta_n, self.eta_c0, self.tau].iter().all(|v| v.is_finite()) {
            return invalid("scenario means must be finite");
        }
        self.chain.validate()
    }

    pub fn alpha(&self) -> [f64; 2] {
        self.predictiveness.alpha(self.levels)
    }
}
