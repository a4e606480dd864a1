//! Synthetic experiments: probit compliance driven by one standard-normal
//! covariate, normal outcomes that ignore the covariate, exclusion
//! restriction for never-takers and a constant complier effect.

use std::fmt::Write as _;

use crate::model::{ComplianceVector, ConfigError, ObservedDataset, ScenarioConfig};
use crate::rng::{normal_cdf, sample_permutation, RngStream};

/// Unobservable quantities behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub c_true: ComplianceVector,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl TruthRecord {
    /// Sidecar CSV with header `c_true,y0,y1`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("c_true,y0,y1\n");
        for ((c, y0), y1) in self.c_true.as_slice().iter().zip(&self.y0).zip(&self.y1) {
            writeln!(out, "{c},{y0:?},{y1:?}").unwrap();
        }
        out
    }
}

/// Population complier share `E[Phi(alpha_0 + alpha_x X)]` for `X ~ N(0,1)`.
pub fn marginal_complier_rate(alpha: [f64; 2]) -> f64 {
    normal_cdf(alpha[0] / (1.0 + alpha[1] * alpha[1]).sqrt())
}

pub fn generate(cfg: &ScenarioConfig, stream: &mut RngStream) -> Result<(ObservedDataset, TruthRecord), ConfigError> {
    cfg.validate()?;
    let n = cfg.n;
    let [alpha_0, alpha_x] = cfg.alpha();
    let sd = cfg.outcome_variance.sqrt();

    let mut x = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = stream.standard_normal();
        let complier = alpha_0 + alpha_x * xi + stream.standard_normal() > 0.0;
        let mean = if complier { cfg.eta_c0 } else { cfg.eta_n };
        let y0i = mean + sd * stream.standard_normal();
        x.push(xi);
        c.push(u8::from(complier));
        y0.push(y0i);
        y1.push(if complier { y0i + cfg.tau } else { y0i });
    }
    let z = sample_permutation(stream, n, cfg.n_t).expect("validated 0 < n_t < n");
    let d: Vec<u8> = c.iter().zip(&z).map(|(c, z)| c * z).collect();
    let y: Vec<f64> = (0..n).map(|i| if z[i] == 1 { y1[i] } else { y0[i] }).collect();

    let data = ObservedDataset::new(z, d, y, Some(x)).expect("generator output satisfies dataset invariants");
    let truth = TruthRecord { c_true: ComplianceVector::from_labels(c), y0, y1 };
    Ok((data, truth))
}
