//! Exact posterior of control-arm compliance by enumeration, for small
//! datasets with the probit coefficients and outcome variances held fixed.
//! Only the outcome means remain unknown; each mean group is integrated out
//! analytically against its zero-mean normal prior.

#![allow(dead_code)]

use frtpp_core::rng::{derive_stream, normal_cdf};
use frtpp_core::{GibbsSampler, ImputationPosture, ObservedDataset, Priors, ProbitParams};

/// Log marginal density of `y_i ~ N(mu, s2_i)` with `mu ~ N(0, v0)`.
fn log_group_evidence(points: &[(f64, f64)], v0: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let prec: f64 = points.iter().map(|&(_, s2)| 1.0 / s2).sum();
    let wsum: f64 = points.iter().map(|&(y, s2)| y / s2).sum();
    let quad: f64 = points.iter().map(|&(y, s2)| y * y / s2).sum();
    let logdet: f64 = points.iter().map(|&(_, s2)| (2.0 * std::f64::consts::PI * s2).ln()).sum();
    let k = 1.0 + v0 * prec;
    -0.5 * (logdet + k.ln() + quad - v0 * wsum * wsum / k)
}

/// Mean group of a unit under `posture`, given its assignment and type.
fn mean_group(posture: &ImputationPosture, treated: bool, complier: bool) -> usize {
    match (posture.impose_null, posture.misspecified) {
        (true, true) => 0,
        (true, false) => usize::from(!complier),
        (false, true) => usize::from(!(complier && !treated)),
        (false, false) => match (complier, treated) {
            (true, false) => 0,
            (true, true) => 1,
            (false, _) => 2,
        },
    }
}

/// `P(C_i = 1 | data)` for every control unit, in dataset order.
pub fn exact_control_marginals(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    priors: &Priors,
    probit: ProbitParams,
    sigma2_c: f64,
    sigma2_n: f64,
) -> Vec<f64> {
    let control: Vec<usize> = (0..data.n()).filter(|&i| data.z()[i] == 0).collect();
    assert!(control.len() <= 12, "enumeration is exponential in control units");
    let pi = |i: usize| {
        let x = if posture.use_covariates { data.x().unwrap()[i] } else { 0.0 };
        normal_cdf(probit.alpha_0 + probit.alpha_x * x)
    };

    let mut log_w = Vec::with_capacity(1 << control.len());
    for mask in 0u32..(1 << control.len()) {
        let mut c: Vec<bool> = data.d().iter().map(|&d| d == 1).collect();
        let mut lp = 0.0;
        for (j, &i) in control.iter().enumerate() {
            let ci = mask >> j & 1 == 1;
            c[i] = ci;
            lp += if ci { pi(i).ln() } else { (1.0 - pi(i)).ln() };
        }
        let mut groups: [Vec<(f64, f64)>; 3] = Default::default();
        for i in 0..data.n() {
            let s2 = if c[i] { sigma2_c } else { sigma2_n };
            groups[mean_group(posture, data.z()[i] == 1, c[i])].push((data.y()[i], s2));
        }
        lp += groups.iter().map(|g| log_group_evidence(g, priors.mean_prior_variance)).sum::<f64>();
        log_w.push(lp);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    (0..control.len())
        .map(|j| w.iter().enumerate().filter(|(mask, _)| mask >> j & 1 == 1).map(|(_, v)| v).sum::<f64>() / total)
        .collect()
}

/// Same marginals estimated from a chain with the same quantities fixed.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_control_marginals(
    data: &ObservedDataset,
    posture: &ImputationPosture,
    priors: &Priors,
    probit: ProbitParams,
    sigma2_c: f64,
    sigma2_n: f64,
    iterations: usize,
    seed: u64,
) -> Vec<f64> {
    let sampler = GibbsSampler::new(data, *posture, *priors)
        .unwrap()
        .with_fixed_probit(probit)
        .with_fixed_variances(sigma2_c, sigma2_n);
    let control: Vec<usize> = (0..data.n()).filter(|&i| data.z()[i] == 0).collect();
    let burn_in = iterations / 20;
    let mut counts = vec![0usize; control.len()];
    let mut stream = derive_stream(seed, "oracle");
    sampler.run(burn_in + iterations, &mut stream, |s| {
        if s.iteration > burn_in {
            for (k, &i) in control.iter().enumerate() {
                counts[k] += usize::from(s.c.as_slice()[i]);
            }
        }
    });
    counts.iter().map(|&k| k as f64 / iterations as f64).collect()
}

/// Ten units, five per arm, with a covariate; the control arm is the
/// enumerated part.
pub fn small_dataset() -> ObservedDataset {
    ObservedDataset::new(
        vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0],
        vec![1, 1, 0, 1, 0, 0, 0, 0, 0, 0],
        vec![1.2, 0.8, -0.3, 1.5, 0.1, 1.0, -0.5, 0.2, 1.4, -1.1],
        Some(vec![0.3, 1.1, -0.7, 0.5, -1.2, 0.9, -0.4, 0.0, 1.6, -1.3]),
    )
    .unwrap()
}
