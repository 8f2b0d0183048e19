//! Discrete-time growth chain on a graph: a particle is added at vertex `v`
//! with probability proportional to `exp(alpha x_v + beta sum_{u ~ v} x_u)`,
//! plus localisation detection and the min-rule limit model on cycles.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("initial state has {got} components, graph has {expected} vertices")]
    StateSize { expected: usize, got: usize },
    #[error("window of {window} steps exceeds trajectory length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("min-rule cycle needs at least 3 vertices, got {0}")]
    BadCycleSize(usize),
}

/// Recorded run of a growth chain. `choices[i]` is the vertex that received
/// the particle at step `i+1`; `snapshots` are thinned full states.
#[derive(Debug, Clone)]
pub struct GrowthTrajectory {
    pub initial: Vec<u64>,
    pub choices: Vec<usize>,
    pub snapshots: Vec<(usize, Vec<u64>)>,
    pub final_counts: Vec<u64>,
}

impl GrowthTrajectory {
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LocalisationReport {
    /// Vertices that received increments within the final window.
    pub final_set: Vec<usize>,
    pub is_maximal_clique: bool,
    /// log(X_v / X_u) at the final step, for ordered pairs within `final_set`.
    pub ratio_estimates: BTreeMap<(usize, usize), f64>,
    pub window: usize,
}

/// One-step allocation probabilities. Exponents are shifted by their maximum
/// before exponentiation; counts grow without bound so the raw exponentials
/// overflow.
pub fn growth_step_distribution(g: &Graph, alpha: f64, beta: f64, counts: &[u64]) -> Vec<f64> {
    debug_assert_eq!(counts.len(), g.n());
    let exps: Vec<f64> = (0..g.n())
        .map(|v| {
            let own = counts[v] as f64;
            let nb: f64 = g.neighbours(v).iter().map(|&u| counts[u] as f64).sum();
            alpha * own + beta * nb
        })
        .collect();
    let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exps.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Run the growth chain for `n_steps` steps from `x0`, recording every
/// increment and a state snapshot every `thin` steps (0 disables snapshots
/// beyond the initial and final states).
pub fn simulate_growth<R: Rng + ?Sized>(
    g: &Graph,
    alpha: f64,
    beta: f64,
    x0: &[u64],
    n_steps: usize,
    thin: usize,
    rng: &mut R,
) -> Result<GrowthTrajectory, GrowthError> {
    if x0.len() != g.n() {
        return Err(GrowthError::StateSize {
            expected: g.n(),
            got: x0.len(),
        });
    }
    let mut counts = x0.to_vec();
    let mut choices = Vec::with_capacity(n_steps);
    let mut snapshots = vec![(0, counts.clone())];
    for step in 1..=n_steps {
        let probs = growth_step_distribution(g, alpha, beta, &counts);
        let v = sample_categorical(&probs, rng);
        counts[v] += 1;
        choices.push(v);
        if thin > 0 && step % thin == 0 {
            snapshots.push((step, counts.clone()));
        }
    }
    if snapshots.last().map(|(s, _)| *s) != Some(n_steps) {
        snapshots.push((n_steps, counts.clone()));
    }
    Ok(GrowthTrajectory {
        initial: x0.to_vec(),
        choices,
        snapshots,
        final_counts: counts,
    })
}

/// Declare localisation from the increment support of the final `window`
/// steps. The limit statement is asymptotic; this finite-time heuristic can
/// produce false positives on short runs, so verdicts should be aggregated
/// over seeds rather than trusted per run.
pub fn detect_localisation(
    trajectory: &GrowthTrajectory,
    g: &Graph,
    window: usize,
) -> Result<LocalisationReport, GrowthError> {
    if window == 0 || window >= trajectory.len() {
        return Err(GrowthError::WindowTooLarge {
            window,
            len: trajectory.len(),
        });
    }
    let tail = &trajectory.choices[trajectory.len() - window..];
    let final_set: Vec<usize> = tail.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let is_maximal_clique = g.is_maximal_clique(&final_set);
    let mut ratio_estimates = BTreeMap::new();
    for &v in &final_set {
        for &u in &final_set {
            if v != u {
                let xv = trajectory.final_counts[v] as f64;
                let xu = trajectory.final_counts[u] as f64;
                ratio_estimates.insert((v, u), (xv / xu).ln());
            }
        }
    }
    Ok(LocalisationReport {
        final_set,
        is_maximal_clique,
        ratio_estimates,
        window,
    })
}

/// Min-rule chain on the cycle with `m` vertices: each step adds one
/// particle at a vertex minimising `x_{i-1} + x_i + x_{i+1}` (cyclic
/// indices), uniformly over ties.
pub fn simulate_min_rule<R: Rng + ?Sized>(
    m: usize,
    x0: &[u64],
    n_steps: usize,
    thin: usize,
    rng: &mut R,
) -> Result<GrowthTrajectory, GrowthError> {
    if m < 3 {
        return Err(GrowthError::BadCycleSize(m));
    }
    if x0.len() != m {
        return Err(GrowthError::StateSize {
            expected: m,
            got: x0.len(),
        });
    }
    let mut counts = x0.to_vec();
    let mut choices = Vec::with_capacity(n_steps);
    let mut snapshots = vec![(0, counts.clone())];
    for step in 1..=n_steps {
        let sums: Vec<u64> = (0..m)
            .map(|i| counts[(i + m - 1) % m] + counts[i] + counts[(i + 1) % m])
            .collect();
        let min = *sums.iter().min().unwrap();
        let ties: Vec<usize> = (0..m).filter(|&i| sums[i] == min).collect();
        let v = ties[rng.random_range(0..ties.len())];
        counts[v] += 1;
        choices.push(v);
        if thin > 0 && step % thin == 0 {
            snapshots.push((step, counts.clone()));
        }
    }
    if snapshots.last().map(|(s, _)| *s) != Some(n_steps) {
        snapshots.push((n_steps, counts.clone()));
    }
    Ok(GrowthTrajectory {
        initial: x0.to_vec(),
        choices,
        snapshots,
        final_counts: counts,
    })
}
