//! Continuous CSA time-series model: acceptance-rejection sampler, t- and
//! Gamma-statistics, likelihood, MLE fitting, jamming estimation and
//! empirical limit profiles.
//!
//! The model deposits points sequentially in a domain; a location with `k`
//! existing neighbours within radius `R` is proposed uniformly and accepted
//! with probability proportional to the growth rate `beta_k`, with
//! `beta_0 = 1` fixed for identifiability and `beta_k = 0` beyond `N`.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::spatial::{dist_sq, Domain, NeighbourGrid, PointSeq, SpatialError};

#[derive(Debug, Error)]
pub enum CsaError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("jammed after {accepted} accepted points ({streak} consecutive rejections)")]
    JammedBeforeTarget { accepted: usize, streak: usize },
    #[error("non-finite likelihood: denominator {0} at prefix {1}")]
    NonFiniteLikelihood(f64, usize),
    #[error("t_{0} = 0: not enough information to estimate beta_{0}")]
    NonIdentifiable(usize),
    #[error("t_1 = ell - 1: the MLE diverges (formally beta = infinity)")]
    DivergentEstimate,
    #[error("need at least {needed} observed points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Growth-rate table `(beta_1, ..., beta_N)` with `beta_0 = 1` implicit and
/// `beta_k = 0` for `k > N`, plus the interaction radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CsaParams {
    radius: f64,
    beta: Vec<f64>,
}

impl CsaParams {
    pub fn new(radius: f64, beta: Vec<f64>) -> Result<Self, CsaError> {
        if !(radius > 0.0) {
            return Err(CsaError::BadParams("radius must be positive".into()));
        }
        for (j, b) in beta.iter().enumerate() {
            if !(b > &0.0) || !b.is_finite() {
                return Err(CsaError::BadParams(format!(
                    "beta_{} must be strictly positive and finite",
                    j + 1
                )));
            }
        }
        Ok(Self { radius, beta })
    }

    /// Pure RSA (hard-core) parameters: `N = 0`.
    pub fn rsa(radius: f64) -> Result<Self, CsaError> {
        Self::new(radius, Vec::new())
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Index of the last positive growth rate.
    pub fn n_max(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `beta_k`: 1 at zero neighbours, tabulated up to `N`, zero beyond.
    pub fn beta_at(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.beta.get(k - 1).copied().unwrap_or(0.0)
        }
    }
}

/// Default zero-rate-streak threshold declaring the process jammed.
pub const DEFAULT_JAM_STREAK: usize = 10_000;

/// Acceptance-rejection sampler: uniform proposals accepted with
/// probability `beta_k / C`, `C = max_k beta_k`. The choice of `C` affects
/// only the rejection count, not the law of the accepted sequence.
///
/// Jamming is declared after `jam_streak` consecutive proposals landing in
/// zero-rate regions. Coin rejections of positive-rate proposals do not
/// count: they witness volume that can still accept, so a long raw streak
/// there only reflects a large `C`, not a jammed configuration.
pub fn sample_csa<R: Rng + ?Sized>(
    params: &CsaParams,
    domain: &Domain,
    target_len: usize,
    jam_streak: usize,
    rng: &mut R,
) -> Result<PointSeq, CsaError> {
    let c = params
        .beta
        .iter()
        .cloned()
        .fold(1.0f64, f64::max);
    let mut grid = NeighbourGrid::new(domain.dim(), params.radius);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(target_len.min(4096));
    let mut streak = 0usize;
    while points.len() < target_len {
        if streak >= jam_streak {
            return Err(CsaError::JammedBeforeTarget {
                accepted: points.len(),
                streak,
            });
        }
        let y = domain.sample_uniform(rng);
        let k = grid.count_neighbours(&y);
        let rate = params.beta_at(k);
        if rate == 0.0 {
            streak += 1;
            continue;
        }
        streak = 0;
        if rng.random::<f64>() < rate / c {
            grid.insert(&y);
            points.push(y);
        }
    }
    Ok(PointSeq::from_parts(domain.dim(), points))
}

/// Neighbour count of each arrival among the earlier points,
/// `nu(x_i, x(i-1))` for `i = 1..=ell`.
pub fn prior_neighbour_counts(seq: &PointSeq, radius: f64) -> Vec<usize> {
    let mut grid = NeighbourGrid::new(seq.dim(), radius);
    let mut counts = Vec::with_capacity(seq.len());
    for p in seq.points() {
        counts.push(grid.count_neighbours(p));
        grid.insert(p);
    }
    counts
}

/// Arrival-count statistics: `t[j]` is the number of points that had
/// exactly `j` earlier neighbours; counts above `n_max` land in `overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct TStats {
    pub t: Vec<u64>,
    pub overflow: u64,
}

impl TStats {
    pub fn total(&self) -> u64 {
        self.t.iter().sum::<u64>() + self.overflow
    }
}

pub fn t_statistics(seq: &PointSeq, radius: f64, n_max: usize) -> TStats {
    let mut t = vec![0u64; n_max + 1];
    let mut overflow = 0u64;
    for k in prior_neighbour_counts(seq, radius) {
        if k <= n_max {
            t[k] += 1;
        } else {
            overflow += 1;
        }
    }
    TStats { t, overflow }
}

/// MLE of the parameter `N`: the largest observed prior-neighbour count.
pub fn estimate_n(seq: &PointSeq, radius: f64) -> usize {
    prior_neighbour_counts(seq, radius)
        .into_iter()
        .max()
        .unwrap_or(0)
}

/// RSA convenience estimator of the interaction radius: the minimal
/// distance from an arrival to any earlier point.
pub fn estimate_radius_rsa(seq: &PointSeq) -> Option<f64> {
    let pts = seq.points();
    let mut min_sq = f64::INFINITY;
    for (i, p) in pts.iter().enumerate().skip(1) {
        for q in &pts[..i] {
            min_sq = min_sq.min(dist_sq(p, q));
        }
    }
    min_sq.is_finite().then(|| min_sq.sqrt())
}

/// Monte-Carlo estimates of the occupancy volumes
/// `Gamma_{j,k} = |{u in D : nu(u, x(k)) = j}|` for `j = 0..=n_max` and
/// prefix sizes `k = 0..ell-1`, with standard errors.
#[derive(Debug, Clone)]
pub struct GammaStats {
    /// `gamma[j][k]`; exact zeros for `k < j`, and `gamma[0][0] = |D|`.
    pub gamma: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub mc_n: usize,
    pub volume: f64,
}

pub fn gamma_statistics<R: Rng + ?Sized>(
    seq: &PointSeq,
    domain: &Domain,
    radius: f64,
    n_max: usize,
    mc_n: usize,
    rng: &mut R,
) -> GammaStats {
    assert!(mc_n >= 1);
    let ell = seq.len();
    let volume = domain.volume();
    let mut gamma = vec![vec![0.0f64; ell]; n_max + 1];
    let mut se = vec![vec![0.0f64; ell]; n_max + 1];
    // Monte-Carlo points with incrementally maintained neighbour counts;
    // histogram bucket n_max+1 collects everything above n_max.
    let samples: Vec<Vec<f64>> = (0..mc_n).map(|_| domain.sample_uniform(rng)).collect();
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let cell: Vec<i64> = s.iter().map(|x| (x / radius).floor() as i64).collect();
        cells.entry(cell).or_default().push(i);
    }
    let mut counts = vec![0usize; mc_n];
    let mut hist = vec![0usize; n_max + 2];
    hist[0] = mc_n;
    let r_sq = radius * radius;
    let dim = domain.dim();
    for k in 0..ell {
        for j in 0..=n_max {
            if k < j {
                continue; // exact zero: nu(u, x(k)) <= k
            }
            let p = hist[j] as f64 / mc_n as f64;
            gamma[j][k] = volume * p;
            se[j][k] = volume * (p * (1.0 - p) / mc_n as f64).sqrt();
        }
        // absorb the next arrival into the counts
        let x = &seq.points()[k];
        let center: Vec<i64> = x.iter().map(|c| (c / radius).floor() as i64).collect();
        let mut offset = vec![-1i64; dim];
        'cells: loop {
            let cell: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(idx) = cells.get(&cell) {
                for &i in idx {
                    if dist_sq(x, &samples[i]) <= r_sq {
                        let old = counts[i].min(n_max + 1);
                        counts[i] += 1;
                        let new = counts[i].min(n_max + 1);
                        hist[old] -= 1;
                        hist[new] += 1;
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == dim {
                    break 'cells;
                }
                offset[i] += 1;
                if offset[i] <= 1 {
                    break;
                }
                offset[i] = -1;
                i += 1;
            }
        }
    }
    // gamma[0][0] is |D| exactly: every sample has zero neighbours in x(0)
    GammaStats {
        gamma,
        se,
        mc_n,
        volume,
    }
}

/// Deterministic midpoint-rule Gamma statistics for one-dimensional
/// domains; the quadrature cross-check oracle for [`gamma_statistics`].
pub fn gamma_statistics_grid_1d(
    seq: &PointSeq,
    domain: &Domain,
    radius: f64,
    n_max: usize,
    grid_n: usize,
) -> Vec<Vec<f64>> {
    assert_eq!(domain.dim(), 1);
    let ell = seq.len();
    let lo = domain.lower()[0];
    let hi = domain.upper()[0];
    let h = (hi - lo) / grid_n as f64;
    let mut gamma = vec![vec![0.0f64; ell]; n_max + 1];
    for k in 0..ell {
        let prefix = seq.prefix(k);
        for cell in 0..grid_n {
            let u = [lo + (cell as f64 + 0.5) * h];
            let nu = prefix
                .iter()
                .filter(|p| (p[0] - u[0]).abs() <= radius)
                .count();
            if nu <= n_max {
                gamma[nu][k] += h;
            }
        }
    }
    gamma
}

/// Everything the likelihood needs: arrival counts plus occupancy volumes.
#[derive(Debug, Clone)]
pub struct CsaStatistics {
    pub t: TStats,
    pub gamma: GammaStats,
    pub ell: usize,
    pub n_max: usize,
}

impl CsaStatistics {
    pub fn compute<R: Rng + ?Sized>(
        seq: &PointSeq,
        domain: &Domain,
        radius: f64,
        n_max: usize,
        mc_n: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            t: t_statistics(seq, radius, n_max),
            gamma: gamma_statistics(seq, domain, radius, n_max, mc_n, rng),
            ell: seq.len(),
            n_max,
        }
    }

    fn denominator(&self, beta: &[f64], k: usize) -> f64 {
        self.gamma.gamma[0][k]
            + beta
                .iter()
                .enumerate()
                .map(|(j, b)| b * self.gamma.gamma[j + 1][k])
                .sum::<f64>()
    }
}

/// Log likelihood `sum_j t_j log beta_j - sum_k log(denominator_k)`; the
/// first denominator is the constant `|D|`.
pub fn log_likelihood(stats: &CsaStatistics, beta: &[f64]) -> Result<f64, CsaError> {
    assert_eq!(beta.len(), stats.n_max, "beta length must match N");
    let mut ll = 0.0;
    for (j, b) in beta.iter().enumerate() {
        if !(b > &0.0) {
            return Err(CsaError::BadParams(format!("beta_{} must be positive", j + 1)));
        }
        ll += stats.t.t[j + 1] as f64 * b.ln();
    }
    for k in 0..stats.ell {
        let denom = stats.denominator(beta, k);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(CsaError::NonFiniteLikelihood(denom, k));
        }
        ll -= denom.ln();
    }
    Ok(ll)
}

/// Score-equation residuals
/// `t_j - sum_k beta_j Gamma_{j,k} / denominator_k`, `j = 1..=N`.
pub fn score_residuals(stats: &CsaStatistics, beta: &[f64]) -> Vec<f64> {
    (1..=stats.n_max)
        .map(|j| {
            let mut s = stats.t.t[j] as f64;
            for k in 0..stats.ell {
                let denom = stats.denominator(beta, k);
                s -= beta[j - 1] * stats.gamma.gamma[j][k] / denom;
            }
            s
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub radius: f64,
    pub n_hat: usize,
    pub beta_hat: Vec<f64>,
    pub residuals: Vec<f64>,
    pub stats: CsaStatistics,
}

/// Maximum-likelihood fit. `N` is estimated first; for `N = 1` the single
/// monotone score equation is bracketed and bisected, for `N > 1` the
/// likelihood is maximized over `log beta` by gradient ascent with
/// backtracking, with per-coordinate bisection sweeps as a polish. The
/// convergence criterion is the max-norm of the score equations.
pub fn fit_mle<R: Rng + ?Sized>(
    seq: &PointSeq,
    domain: &Domain,
    radius: f64,
    mc_n: usize,
    rng: &mut R,
    tol: f64,
) -> Result<MleFit, CsaError> {
    if seq.len() < 2 {
        return Err(CsaError::InsufficientData {
            needed: 2,
            got: seq.len(),
        });
    }
    let n_hat = estimate_n(seq, radius);
    let stats = CsaStatistics::compute(seq, domain, radius, n_hat, mc_n, rng);
    for j in 1..=n_hat {
        if stats.t.t[j] == 0 {
            return Err(CsaError::NonIdentifiable(j));
        }
    }
    if n_hat == 0 {
        return Ok(MleFit {
            radius,
            n_hat,
            beta_hat: Vec::new(),
            residuals: Vec::new(),
            stats,
        });
    }
    if n_hat == 1 && stats.t.t[1] == seq.len() as u64 - 1 {
        return Err(CsaError::DivergentEstimate);
    }
    let beta_hat = if n_hat == 1 {
        vec![solve_single_beta(&stats, tol)]
    } else {
        solve_multi_beta(&stats, tol)
    };
    let residuals = score_residuals(&stats, &beta_hat);
    Ok(MleFit {
        radius,
        n_hat,
        beta_hat,
        residuals,
        stats,
    })
}

/// Bisection on the strictly decreasing single score equation.
fn solve_single_beta(stats: &CsaStatistics, tol: f64) -> f64 {
    let score = |b: f64| score_residuals(stats, &[b])[0];
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while score(hi) > 0.0 && hi < 1e15 {
        hi *= 2.0;
    }
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let s = score(mid);
        if s.abs() <= tol * 0.5 {
            return mid;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solve_multi_beta(stats: &CsaStatistics, tol: f64) -> Vec<f64> {
    let n = stats.n_max;
    let mut theta = vec![0.0f64; n]; // log beta, start at beta = 1
    let beta_of = |theta: &[f64]| theta.iter().map(|t| t.exp()).collect::<Vec<f64>>();
    let mut ll = log_likelihood(stats, &beta_of(&theta)).unwrap_or(f64::NEG_INFINITY);
    let mut step = 0.5;
    for _ in 0..5_000 {
        let beta = beta_of(&theta);
        let grad = score_residuals(stats, &beta); // d ll / d log beta_j
        let norm = grad.iter().map(|g| g.abs()).fold(0.0f64, f64::max);
        if norm <= tol * 0.5 {
            return beta;
        }
        // backtracking line search along the gradient
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
            if let Ok(trial_ll) = log_likelihood(stats, &beta_of(&trial)) {
                if trial_ll > ll {
                    theta = trial;
                    ll = trial_ll;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // polish with per-coordinate bisection sweeps: each score component is
    // strictly decreasing in its own beta
    let mut beta = beta_of(&theta);
    for _ in 0..200 {
        for j in 0..n {
            let mut lo = 1e-12;
            let mut hi = beta[j].max(1.0);
            let comp = |b: f64, beta: &mut Vec<f64>| {
                beta[j] = b;
                score_residuals(stats, beta)[j]
            };
            while comp(hi, &mut beta) > 0.0 && hi < 1e15 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s = comp(mid, &mut beta);
                if s.abs() <= tol * 0.25 {
                    break;
                }
                if s > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let norm = score_residuals(stats, &beta)
            .iter()
            .map(|g| g.abs())
            .fold(0.0f64, f64::max);
        if norm <= tol * 0.5 {
            break;
        }
    }
    beta
}

#[derive(Debug, Clone)]
pub struct JammingEstimate {
    pub accepted: usize,
    /// Accepted points per unit volume.
    pub density: f64,
}

/// Run the acceptance-rejection process until `streak` consecutive
/// rejections and report the accepted count per unit volume.
pub fn estimate_jamming<R: Rng + ?Sized>(
    params: &CsaParams,
    domain: &Domain,
    streak: usize,
    rng: &mut R,
) -> JammingEstimate {
    match sample_csa(params, domain, usize::MAX, streak, rng) {
        Err(CsaError::JammedBeforeTarget { accepted, .. }) => JammingEstimate {
            accepted,
            density: accepted as f64 / domain.volume(),
        },
        _ => unreachable!("usize::MAX target always jams first"),
    }
}

#[derive(Debug, Clone)]
pub struct ProfileRow {
    pub m: usize,
    pub ell: usize,
    /// `t_j / m`, `j = 0..=N`.
    pub rho: Vec<f64>,
    /// Final-prefix `Gamma_j / m`, `j = 0..=N`.
    pub gamma_over_m: Vec<f64>,
    /// Residuals of the infinite-volume MLE system at the true beta,
    /// trapezoidal quadrature over `lambda in (0, mu)`.
    pub residuals: Vec<f64>,
}

/// Multi-scale empirical limit profiles: for each scale `m` the domain is
/// rescaled to volume `m * |D_1|`, `ell_m = floor(mu * m)` points are
/// sampled, and the normalized statistics and limit-equation residuals are
/// tabulated. `mu` must sit below the jamming density.
pub fn empirical_limit_profile<R: Rng + ?Sized>(
    params: &CsaParams,
    base_domain: &Domain,
    scales: &[usize],
    mu: f64,
    mc_n: usize,
    jam_streak: usize,
    rng: &mut R,
) -> Result<Vec<ProfileRow>, CsaError> {
    if !(mu > 0.0) {
        return Err(CsaError::BadParams("mu must be positive".into()));
    }
    let n = params.n_max();
    let mut rows = Vec::new();
    for &m in scales {
        let domain = base_domain.rescaled(m as f64);
        let ell = (mu * m as f64).floor() as usize;
        let seq = sample_csa(params, &domain, ell, jam_streak, rng)?;
        let t = t_statistics(&seq, params.radius, n);
        let gamma = gamma_statistics(&seq, &domain, params.radius, n, mc_n, rng);
        let rho: Vec<f64> = t.t.iter().map(|&c| c as f64 / m as f64).collect();
        let gamma_over_m: Vec<f64> = (0..=n)
            .map(|j| gamma.gamma[j].last().copied().unwrap_or(0.0) / m as f64)
            .collect();
        // integrand beta_j Gamma_{j,k} / denom_k at lambda_k = k/m;
        // the 1/m factors in gamma cancel inside the ratio
        let mut residuals = Vec::new();
        for j in 1..=n {
            let integrand: Vec<f64> = (0..ell)
                .map(|k| {
                    let denom = gamma.gamma[0][k]
                        + params
                            .beta
                            .iter()
                            .enumerate()
                            .map(|(i, b)| b * gamma.gamma[i + 1][k])
                            .sum::<f64>();
                    params.beta[j - 1] * gamma.gamma[j][k] / denom
                })
                .collect();
            let h = 1.0 / m as f64;
            let integral = if integrand.len() >= 2 {
                h * (integrand.iter().sum::<f64>()
                    - 0.5 * (integrand[0] + integrand[integrand.len() - 1]))
            } else {
                0.0
            };
            residuals.push(rho[j] - integral);
        }
        rows.push(ProfileRow {
            m,
            ell,
            rho,
            gamma_over_m,
            residuals,
        });
    }
    Ok(rows)
}
