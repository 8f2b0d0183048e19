//! The CSA spatial point process: unnormalized density, Papangelou
//! conditional intensities, birth-death Metropolis-Hastings sampling, and
//! importance-sampling estimation of the normalizing constant.
//!
//! A configuration `x` (an unordered set of distinct points in a domain)
//! has density `f(x) = Z^{-1} prod_k beta_{nu(x_k, x)}` with respect to the
//! unit-rate Poisson process, where `nu(x_k, x)` counts the neighbours of
//! `x_k` within radius `R` among the other points of `x`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::spatial::{dist_sq, Domain, SpatialError};

#[derive(Debug, Error)]
pub enum PpError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("duplicate point in configuration")]
    DuplicatePoint,
    #[error("point already present in configuration")]
    PointAlreadyPresent,
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Growth-rate rule `m -> beta_m` for the point-process density.
#[derive(Debug, Clone, PartialEq)]
pub enum RateRule {
    /// `beta_m = beta` for all m (Poisson process with intensity beta).
    ConstantBeta(f64),
    /// Explicit table `beta_0..beta_N`, zero beyond.
    FiniteTable(Vec<f64>),
    /// `beta_m = a * gamma^{m/2}`: the Strauss process with density
    /// `a^{|x|} gamma^{s(x)}`.
    Strauss { a: f64, gamma: f64 },
    /// Unbounded polynomial rule `beta_m = coeff * m^exponent` (with
    /// `beta_0 = coeff`), accepted only when a sublinear-growth
    /// certificate `(C, alpha)` with `alpha < 1` covers it. Exists to
    /// exercise the well-definedness check, not for sampling.
    Power {
        coeff: f64,
        exponent: f64,
        certificate: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpParams {
    radius: f64,
    rule: RateRule,
}

impl PpParams {
    pub fn new(radius: f64, rule: RateRule) -> Result<Self, PpError> {
        if !(radius > 0.0) {
            return Err(PpError::BadParams("radius must be positive".into()));
        }
        match &rule {
            RateRule::ConstantBeta(b) => {
                if !(b > &0.0) {
                    return Err(PpError::BadParams("ConstantBeta needs beta > 0".into()));
                }
            }
            RateRule::FiniteTable(t) => {
                if t.first().map_or(true, |b0| !(b0 > &0.0)) {
                    return Err(PpError::BadParams("FiniteTable needs beta_0 > 0".into()));
                }
                if t.iter().any(|b| *b < 0.0 || !b.is_finite()) {
                    return Err(PpError::BadParams("FiniteTable rates must be >= 0".into()));
                }
            }
            RateRule::Strauss { a, gamma } => {
                if !(a > &0.0) || !(gamma > &0.0) || !(gamma < &1.0) {
                    return Err(PpError::BadParams(
                        "Strauss needs a > 0 and 0 < gamma < 1".into(),
                    ));
                }
            }
            RateRule::Power { coeff, exponent, .. } => {
                if !(coeff > &0.0) || !exponent.is_finite() {
                    return Err(PpError::BadParams("Power needs coeff > 0".into()));
                }
            }
        }
        Ok(Self { radius, rule })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rule(&self) -> &RateRule {
        &self.rule
    }

    pub fn beta_at(&self, m: usize) -> f64 {
        match &self.rule {
            RateRule::ConstantBeta(b) => *b,
            RateRule::FiniteTable(t) => t.get(m).copied().unwrap_or(0.0),
            RateRule::Strauss { a, gamma } => a * gamma.powf(m as f64 / 2.0),
            RateRule::Power { coeff, exponent, .. } => {
                if m == 0 {
                    *coeff
                } else {
                    coeff * (m as f64).powf(*exponent)
                }
            }
        }
    }
}

/// Well-definedness check: the density series converges when
/// `beta_m <= C m^alpha` for some `alpha < 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Ok,
    Rejected(String),
}

pub fn validate_params(params: &PpParams) -> Validity {
    match &params.rule {
        RateRule::ConstantBeta(_) | RateRule::FiniteTable(_) | RateRule::Strauss { .. } => {
            Validity::Ok
        }
        RateRule::Power {
            exponent,
            certificate,
            coeff,
        } => {
            if let Some((c, alpha)) = certificate {
                if *alpha < 1.0 && *exponent <= *alpha && *coeff <= *c {
                    return Validity::Ok;
                }
                return Validity::Rejected(format!(
                    "certificate (C={c}, alpha={alpha}) does not cover beta_m = {coeff} m^{exponent}"
                ));
            }
            if *exponent < 1.0 {
                Validity::Ok
            } else {
                Validity::Rejected(format!(
                    "beta_m = {coeff} m^{exponent} grows at least linearly and no certificate was supplied"
                ))
            }
        }
    }
}

/// Unordered configuration of pairwise-distinct points in a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointConfig {
    pub fn new(domain: &Domain, points: Vec<Vec<f64>>) -> Result<Self, PpError> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != domain.dim() {
                return Err(SpatialError::DimensionMismatch {
                    expected: domain.dim(),
                    got: p.len(),
                }
                .into());
            }
            if !domain.contains(p) {
                return Err(SpatialError::OutOfDomain(i).into());
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(PpError::DuplicatePoint);
                }
            }
        }
        Ok(Self {
            dim: domain.dim(),
            points,
        })
    }

    pub fn empty(domain: &Domain) -> Self {
        Self {
            dim: domain.dim(),
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Neighbour count of the `i`-th point among the others.
    pub fn nu(&self, i: usize, radius: f64) -> usize {
        let r_sq = radius * radius;
        self.points
            .iter()
            .enumerate()
            .filter(|(j, q)| *j != i && dist_sq(&self.points[i], q) <= r_sq)
            .count()
    }

    /// Neighbour count of an external point `u` within the configuration.
    pub fn nu_of(&self, u: &[f64], radius: f64) -> usize {
        let r_sq = radius * radius;
        self.points.iter().filter(|q| dist_sq(u, q) <= r_sq).count()
    }
}

/// Number of neighbour pairs `s(x) = 1/2 sum_k nu(x_k, x)`.
pub fn pair_count(config: &PointConfig, radius: f64) -> usize {
    let total: usize = (0..config.len()).map(|i| config.nu(i, radius)).sum();
    debug_assert_eq!(total % 2, 0);
    total / 2
}

/// `sum_k log beta_{nu(x_k, x)}`, or `-inf` for a forbidden configuration.
pub fn log_unnormalized_density(params: &PpParams, config: &PointConfig) -> f64 {
    let mut ll = 0.0;
    for i in 0..config.len() {
        let b = params.beta_at(config.nu(i, params.radius));
        if b == 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += b.ln();
    }
    ll
}

/// Papangelou conditional intensity ratio `f(x u {u}) / f(x)`:
/// `beta_{nu(u,x)} * prod_{x_k ~ u} beta_{nu(x_k,x)+1} / beta_{nu(x_k,x)}`.
/// Returns 0 when the insertion is forbidden.
pub fn papangelou_ratio(
    params: &PpParams,
    config: &PointConfig,
    u: &[f64],
) -> Result<f64, PpError> {
    if config.points.iter().any(|p| p.as_slice() == u) {
        return Err(PpError::PointAlreadyPresent);
    }
    let r_sq = params.radius * params.radius;
    let mut log_ratio = {
        let b = params.beta_at(config.nu_of(u, params.radius));
        if b == 0.0 {
            return Ok(0.0);
        }
        b.ln()
    };
    for i in 0..config.len() {
        if dist_sq(&config.points[i], u) <= r_sq {
            let k = config.nu(i, params.radius);
            let num = params.beta_at(k + 1);
            if num == 0.0 {
                return Ok(0.0);
            }
            let den = params.beta_at(k);
            // den = 0 means f(x) itself vanished; the ratio diverges
            if den == 0.0 {
                return Ok(f64::INFINITY);
            }
            log_ratio += num.ln() - den.ln();
        }
    }
    Ok(log_ratio.exp())
}

#[derive(Debug, Clone, Default)]
pub struct BdDiagnostics {
    pub birth_proposals: u64,
    pub birth_accepts: u64,
    pub death_proposals: u64,
    pub death_accepts: u64,
    /// `|x|` after every move.
    pub count_trace: Vec<u32>,
}

impl BdDiagnostics {
    pub fn birth_rate(&self) -> f64 {
        self.birth_accepts as f64 / self.birth_proposals.max(1) as f64
    }

    pub fn death_rate(&self) -> f64 {
        self.death_accepts as f64 / self.death_proposals.max(1) as f64
    }
}

/// Geweke-style convergence diagnostic on the count trace: z-score between
/// the means of the first 10% and the last 50% of the trace.
pub fn geweke_z(trace: &[u32]) -> f64 {
    let n = trace.len();
    let head = &trace[..n / 10];
    let tail = &trace[n / 2..];
    let stats = |xs: &[u32]| {
        let m = xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
        let v = xs
            .iter()
            .map(|&x| (x as f64 - m).powi(2))
            .sum::<f64>()
            / (xs.len() - 1) as f64;
        (m, v / xs.len() as f64)
    };
    let (mh, vh) = stats(head);
    let (mt, vt) = stats(tail);
    (mh - mt) / (vh + vt).sqrt()
}

/// Birth-death Metropolis-Hastings chain started from the empty
/// configuration: with probability 1/2 a uniform birth is proposed and
/// accepted with `min(1, |D| r(u) / (n+1))`; otherwise a uniformly chosen
/// point is proposed for deletion and accepted with `min(1, n / (|D| r))`,
/// `r` the Papangelou ratio of re-inserting it. The invariant law is the
/// CSA point-process measure.
pub fn sample_bd_mcmc<R: Rng + ?Sized>(
    params: &PpParams,
    domain: &Domain,
    n_moves: usize,
    rng: &mut R,
) -> (PointConfig, BdDiagnostics) {
    let mut config = PointConfig::empty(domain);
    let mut diag = BdDiagnostics::default();
    let volume = domain.volume();
    diag.count_trace.reserve(n_moves);
    for _ in 0..n_moves {
        if rng.random_bool(0.5) {
            diag.birth_proposals += 1;
            let u = domain.sample_uniform(rng);
            let n = config.len();
            if let Ok(r) = papangelou_ratio(params, &config, &u) {
                let accept = (volume * r / (n + 1) as f64).min(1.0);
                if accept > 0.0 && rng.random::<f64>() < accept {
                    config.points.push(u);
                    diag.birth_accepts += 1;
                }
            }
        } else {
            diag.death_proposals += 1;
            let n = config.len();
            if n > 0 {
                let i = rng.random_range(0..n);
                let removed = config.points.swap_remove(i);
                let r = papangelou_ratio(params, &config, &removed)
                    .expect("removed point cannot coincide with a survivor");
                let accept = if r == 0.0 {
                    1.0 // leaving a forbidden state is always accepted
                } else {
                    (n as f64 / (volume * r)).min(1.0)
                };
                if rng.random::<f64>() < accept {
                    diag.death_accepts += 1;
                } else {
                    config.points.push(removed);
                }
            }
        }
        diag.count_trace.push(config.len() as u32);
    }
    (config, diag)
}

#[derive(Debug, Clone, Copy)]
pub struct LogZEstimate {
    pub log_z: f64,
    /// Jackknife standard error of `log_z`.
    pub se: f64,
    pub n_samples: usize,
}

/// Importance-sampling estimate of `log Z` from the unit-rate Poisson
/// reference: `Z = E_Poisson[prod_k beta_{nu(x_k, x)}]`.
pub fn estimate_log_z<R: Rng + ?Sized>(
    params: &PpParams,
    domain: &Domain,
    n_samples: usize,
    rng: &mut R,
) -> LogZEstimate {
    assert!(n_samples >= 100, "need at least 100 samples");
    let volume = domain.volume();
    let poisson = Poisson::new(volume).expect("positive volume");
    let log_weights: Vec<f64> = (0..n_samples)
        .map(|_| {
            let n = poisson.sample(rng) as usize;
            let points: Vec<Vec<f64>> = (0..n).map(|_| domain.sample_uniform(rng)).collect();
            let config = PointConfig {
                dim: domain.dim(),
                points,
            };
            log_unnormalized_density(params, &config)
        })
        .collect();
    // log of the mean weight, computed stably via max-shift
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return LogZEstimate {
            log_z: f64::NEG_INFINITY,
            se: f64::INFINITY,
            n_samples,
        };
    }
    let shifted: Vec<f64> = log_weights.iter().map(|lw| (lw - m).exp()).collect();
    let s: f64 = shifted.iter().sum();
    let log_z = m + (s / n_samples as f64).ln();
    // jackknife over leave-one-out log means
    let loo: Vec<f64> = shifted
        .iter()
        .map(|w| {
            let rest = (s - w).max(f64::MIN_POSITIVE);
            m + (rest / (n_samples - 1) as f64).ln()
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n_samples as f64;
    let se = ((n_samples - 1) as f64 / n_samples as f64
        * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>())
    .sqrt();
    LogZEstimate {
        log_z,
        se,
        n_samples,
    }
}
