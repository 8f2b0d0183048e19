//! Reversible interacting birth-and-death chain on a graph: transition
//! rates, the quadratic potential and detailed balance, Gillespie
//! simulation with an explosion heuristic, theorem-driven phase
//! classification, the capped finite chain with exact stationary law, and
//! dominance/monotonicity verifiers.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error)]
pub enum CtmcError {
    #[error("state space has {states} states, enumeration capped at {cap}")]
    StateSpaceTooLarge { states: f64, cap: usize },
    #[error("operation requires a capped chain (params.cap is None)")]
    NoCap,
    #[error("graph must be connected for classification")]
    Disconnected,
    #[error("probability array not normalized (sum = {0})")]
    NotNormalized(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which rate table drives the chain. Both share the invariant measure
/// `e^{W}`; the X variant has unit death rates, the Y variant moves the
/// neighbour term into the death rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateVariant {
    XRates,
    YRates,
}

#[derive(Debug, Clone)]
pub struct CtmcParams {
    pub alpha: f64,
    pub beta: f64,
    pub graph: Graph,
    pub variant: RateVariant,
    /// Maximum particles per vertex; `None` is the unbounded chain.
    pub cap: Option<u32>,
}

impl CtmcParams {
    pub fn new(alpha: f64, beta: f64, graph: Graph) -> Self {
        Self {
            alpha,
            beta,
            graph,
            variant: RateVariant::XRates,
            cap: None,
        }
    }

    pub fn with_variant(mut self, variant: RateVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.cap = Some(cap);
        self
    }

    fn neighbour_sum(&self, x: &[u32], v: usize) -> f64 {
        self.graph.neighbours(v).iter().map(|&u| x[u] as f64).sum()
    }

    /// Log birth rate at `v`, or `None` when the cap blocks the birth.
    pub fn log_birth_rate(&self, x: &[u32], v: usize) -> Option<f64> {
        if let Some(cap) = self.cap {
            if x[v] >= cap {
                return None;
            }
        }
        match self.variant {
            RateVariant::XRates => {
                Some(self.alpha * x[v] as f64 + self.beta * self.neighbour_sum(x, v))
            }
            RateVariant::YRates => Some(self.alpha * x[v] as f64),
        }
    }

    /// Log death rate at `v`, or `None` when `x_v = 0`.
    pub fn log_death_rate(&self, x: &[u32], v: usize) -> Option<f64> {
        if x[v] == 0 {
            return None;
        }
        match self.variant {
            RateVariant::XRates => Some(0.0),
            RateVariant::YRates => Some(-self.beta * self.neighbour_sum(x, v)),
        }
    }
}

/// Complete list of admissible transitions out of `x` with their rates.
pub fn rates(params: &CtmcParams, x: &[u32]) -> Vec<(Vec<u32>, f64)> {
    let mut out = Vec::new();
    for v in 0..params.graph.n() {
        if let Some(log_r) = params.log_birth_rate(x, v) {
            let mut y = x.to_vec();
            y[v] += 1;
            out.push((y, log_r.exp()));
        }
        if let Some(log_r) = params.log_death_rate(x, v) {
            let mut y = x.to_vec();
            y[v] -= 1;
            out.push((y, log_r.exp()));
        }
    }
    out
}

/// Potential of the invariant measure `e^{W}`:
/// `W(x) = (alpha/2) sum_v x_v (x_v - 1) + beta sum_{edges} x_u x_v`,
/// each unordered edge counted once.
pub fn potential_w(alpha: f64, beta: f64, graph: &Graph, x: &[u32]) -> f64 {
    let site: f64 = x.iter().map(|&k| k as f64 * (k as f64 - 1.0)).sum();
    let pair: f64 = graph
        .edges()
        .iter()
        .map(|&(u, v)| x[u] as f64 * x[v] as f64)
        .sum();
    0.5 * alpha * site + beta * pair
}

/// The same potential from the quadratic forms `-Q(x) - (alpha/2) S(x)`,
/// kept as an algebraically independent route for cross-checks.
pub fn potential_w_from_q_s(alpha: f64, beta: f64, graph: &Graph, x: &[u32]) -> f64 {
    let q = -0.5 * alpha * x.iter().map(|&k| (k as f64) * (k as f64)).sum::<f64>()
        - beta
            * graph
                .edges()
                .iter()
                .map(|&(u, v)| x[u] as f64 * x[v] as f64)
                .sum::<f64>();
    let s: f64 = x.iter().map(|&k| k as f64).sum();
    -q - 0.5 * alpha * s
}

/// Log-scale residual of the detailed balance equation
/// `e^{W(x)} r(x, x+e_v) = e^{W(x+e_v)} r(x+e_v, x)` for the birth at `v`.
/// Returns `None` when the transition is inadmissible.
pub fn check_detailed_balance(params: &CtmcParams, x: &[u32], v: usize) -> Option<f64> {
    let log_birth = params.log_birth_rate(x, v)?;
    let mut y = x.to_vec();
    y[v] += 1;
    let log_death = params
        .log_death_rate(&y, v)
        .expect("death from a positive count is always admissible");
    let w_x = potential_w(params.alpha, params.beta, &params.graph, x);
    let w_y = potential_w(params.alpha, params.beta, &params.graph, &y);
    Some((w_x + log_birth - w_y - log_death).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SimOutcome {
    CompletedHorizon,
    /// The event budget ran out at time `t_reached`; a small `t_reached`
    /// is the explosion heuristic signal. Simulation gives evidence only,
    /// never a theorem-level verdict.
    EventCapHit { t_reached: f64 },
}

#[derive(Debug, Clone)]
pub struct CtmcRun {
    /// Thinned (jump time, state) records; always includes the initial and
    /// final states.
    pub trajectory: Vec<(f64, Vec<u32>)>,
    pub outcome: SimOutcome,
    pub events: u64,
    /// Number of entries into the all-zero state after time zero.
    pub origin_visits: u64,
    pub t_final: f64,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Gillespie simulation until `t_max` or `event_cap` events. Rates are
/// handled in log space; when the total rate overflows, holding times
/// collapse to zero and the run terminates at the event cap with a finite
/// `t_reached`, which is exactly the explosion signature.
pub fn simulate_ctmc<R: Rng + ?Sized>(
    params: &CtmcParams,
    x0: &[u32],
    t_max: f64,
    event_cap: u64,
    thin: u64,
    rng: &mut R,
) -> CtmcRun {
    assert_eq!(x0.len(), params.graph.n());
    let n = params.graph.n();
    let mut x = x0.to_vec();
    let mut t = 0.0f64;
    let mut events = 0u64;
    let mut origin_visits = 0u64;
    let mut trajectory = vec![(0.0, x.clone())];
    let mut log_rates = Vec::with_capacity(2 * n);
    let mut moves: Vec<(usize, i32)> = Vec::with_capacity(2 * n);
    let outcome = loop {
        log_rates.clear();
        moves.clear();
        for v in 0..n {
            if let Some(lr) = params.log_birth_rate(&x, v) {
                log_rates.push(lr);
                moves.push((v, 1));
            }
            if let Some(lr) = params.log_death_rate(&x, v) {
                log_rates.push(lr);
                moves.push((v, -1));
            }
        }
        let lse = log_sum_exp(&log_rates);
        let total = lse.exp();
        let exp1: f64 = Exp1.sample(rng);
        let dt = if total.is_infinite() { 0.0 } else { exp1 / total };
        if t + dt > t_max {
            break SimOutcome::CompletedHorizon;
        }
        t += dt;
        // categorical draw over the normalized rates
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = moves.len() - 1;
        for (i, lr) in log_rates.iter().enumerate() {
            acc += (lr - lse).exp();
            if r < acc {
                chosen = i;
                break;
            }
        }
        let (v, delta) = moves[chosen];
        if delta > 0 {
            x[v] += 1;
        } else {
            x[v] -= 1;
        }
        events += 1;
        if x.iter().all(|&k| k == 0) {
            origin_visits += 1;
        }
        if thin > 0 && events % thin == 0 {
            trajectory.push((t, x.clone()));
        }
        if events >= event_cap {
            break SimOutcome::EventCapHit { t_reached: t };
        }
    };
    if trajectory.last().map(|(_, s)| s) != Some(&x) || trajectory.len() == 1 {
        trajectory.push((t, x.clone()));
    }
    CtmcRun {
        trajectory,
        outcome,
        events,
        origin_visits,
        t_final: t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PositiveRecurrent,
    NullRecurrent,
    TransientNonExplosive,
    TransientExplosive,
    /// Open region: transient, conjectured explosive, not proven.
    TransientExplosivityUnknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub case: String,
    pub lambda1: f64,
    /// Independence number; only computed when the verdict depends on it.
    pub kappa: Option<usize>,
    pub min_degree: usize,
}

/// Relative tolerance deciding the measure-zero boundary
/// `alpha + beta lambda_1 = 0`.
const BOUNDARY_TOL: f64 = 1e-9;

/// Theorem-driven phase classification of the uncapped chain.
pub fn classify(alpha: f64, beta: f64, graph: &Graph) -> Result<Classification, CtmcError> {
    if !graph.is_connected() {
        return Err(CtmcError::Disconnected);
    }
    let lambda1 = match graph.lambda1_exact() {
        Some(l) => l,
        None => {
            if graph.edges().is_empty() {
                // single vertex: adjacency spectrum is {0}
                0.0
            } else {
                graph.lambda1(1e-12)?
            }
        }
    };
    let min_degree = graph.min_degree();
    let done = |verdict, case: &str, kappa| Classification {
        verdict,
        case: case.to_string(),
        lambda1,
        kappa,
        min_degree,
    };
    if beta == 0.0 {
        // independent components: one birth-death chain per vertex
        let n = graph.n();
        return Ok(if alpha < 0.0 {
            done(Verdict::PositiveRecurrent, "independent, alpha<0", None)
        } else if alpha == 0.0 {
            if n <= 2 {
                done(Verdict::NullRecurrent, "independent, alpha=0, n<=2", None)
            } else {
                done(
                    Verdict::TransientNonExplosive,
                    "independent, alpha=0, n>=3",
                    None,
                )
            }
        } else {
            done(Verdict::TransientExplosive, "independent, alpha>0", None)
        });
    }
    if alpha > 0.0 {
        let case = if beta < 0.0 {
            "transient 2(a), explosive (i): alpha>0, beta<0"
        } else {
            "transient 2(a), explosive (ii): alpha>0, beta>=0"
        };
        return Ok(done(Verdict::TransientExplosive, case, None));
    }
    if alpha == 0.0 {
        if beta > 0.0 {
            return Ok(done(
                Verdict::TransientExplosive,
                "transient 2(b), explosive (ii): alpha=0, beta>0",
                None,
            ));
        }
        let kappa = graph.independence_number()?;
        return Ok(if kappa <= 2 {
            done(
                Verdict::NullRecurrent,
                "recurrent 1(b): alpha=0, beta<0, kappa<=2",
                Some(kappa),
            )
        } else {
            done(
                Verdict::TransientNonExplosive,
                "transient 2(c): alpha=0, beta<0, kappa>=3",
                Some(kappa),
            )
        });
    }
    // alpha < 0
    let margin = alpha + beta * lambda1;
    let tol = BOUNDARY_TOL * alpha.abs().max(beta.abs());
    if margin.abs() <= tol {
        return Ok(done(
            Verdict::TransientNonExplosive,
            "critical: alpha<0, beta=-alpha/lambda1",
            None,
        ));
    }
    if margin < 0.0 {
        return Ok(done(
            Verdict::PositiveRecurrent,
            "recurrent 1(a): alpha<0, alpha+beta*lambda1<0",
            None,
        ));
    }
    if alpha + beta * min_degree as f64 > tol {
        return Ok(done(
            Verdict::TransientExplosive,
            "explosive (ii): alpha+beta*min_degree>0",
            None,
        ));
    }
    Ok(done(
        Verdict::TransientExplosivityUnknown,
        "open region: -alpha/lambda1 < beta <= -alpha/min_degree (conjectured explosive)",
        None,
    ))
}

/// Mixed-radix state indexing for the capped chain: vertex 0 is the least
/// significant digit, base `cap + 1`.
pub fn encode_state(x: &[u32], cap: u32) -> usize {
    let base = cap as usize + 1;
    x.iter().rev().fold(0usize, |acc, &k| acc * base + k as usize)
}

pub fn decode_state(mut index: usize, n: usize, cap: u32) -> Vec<u32> {
    let base = cap as usize + 1;
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        x.push((index % base) as u32);
        index /= base;
    }
    x
}

pub const ENUMERATION_CAP: usize = 10_000_000;

fn state_count(params: &CtmcParams) -> Result<(u32, usize), CtmcError> {
    let cap = params.cap.ok_or(CtmcError::NoCap)?;
    let states_f = ((cap as f64) + 1.0).powi(params.graph.n() as i32);
    if states_f > ENUMERATION_CAP as f64 {
        return Err(CtmcError::StateSpaceTooLarge {
            states: states_f,
            cap: ENUMERATION_CAP,
        });
    }
    Ok((cap, states_f as usize))
}

#[derive(Debug, Clone)]
pub struct StationaryTable {
    pub cap: u32,
    /// Probabilities indexed by [`encode_state`].
    pub probs: Vec<f64>,
    /// Log of the partition sum `Z = sum_x e^{W(x)}`.
    pub log_z: f64,
}

/// Exact stationary law of the capped chain, `mu(x) = e^{W(x)} / Z`.
pub fn stationary_finite(params: &CtmcParams) -> Result<StationaryTable, CtmcError> {
    let (cap, n_states) = state_count(params)?;
    let n = params.graph.n();
    let log_w: Vec<f64> = (0..n_states)
        .map(|i| {
            let x = decode_state(i, n, cap);
            potential_w(params.alpha, params.beta, &params.graph, &x)
        })
        .collect();
    let log_z = log_sum_exp(&log_w);
    let probs = log_w.iter().map(|w| (w - log_z).exp()).collect();
    Ok(StationaryTable { cap, probs, log_z })
}

/// Stationary law of the capped chain from the generator: solves the
/// global-balance linear system `pi Q = 0`, `sum pi = 1` by dense Gaussian
/// elimination. Independent of the potential route in
/// [`stationary_finite`]; intended for cross-validation.
pub fn stationary_via_generator(params: &CtmcParams) -> Result<Vec<f64>, CtmcError> {
    let (cap, n_states) = state_count(params)?;
    // dense solve: n_states^3 flops
    if n_states > 4096 {
        return Err(CtmcError::StateSpaceTooLarge {
            states: n_states as f64,
            cap: 4096,
        });
    }
    let n = params.graph.n();
    // a[row][col] built from Q^T; replace the last row with the
    // normalization constraint
    let mut a = vec![vec![0.0f64; n_states]; n_states];
    for i in 0..n_states {
        let x = decode_state(i, n, cap);
        for (y, rate) in rates(params, &x) {
            let j = encode_state(&y, cap);
            a[j][i] += rate;
            a[i][i] -= rate;
        }
    }
    let mut b = vec![0.0f64; n_states];
    for col in 0..n_states {
        a[n_states - 1][col] = 1.0;
    }
    b[n_states - 1] = 1.0;
    // Gaussian elimination with partial pivoting
    for col in 0..n_states {
        let piv = (col..n_states)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        a.swap(piv, col);
        b.swap(piv, col);
        let d = a[col][col];
        for row in col + 1..n_states {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n_states {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            b[row] -= f * b[col];
        }
    }
    let mut pi = vec![0.0f64; n_states];
    for row in (0..n_states).rev() {
        let mut s = b[row];
        for k in row + 1..n_states {
            s -= a[row][k] * pi[k];
        }
        pi[row] = s / a[row][row];
    }
    Ok(pi)
}

/// Single-site conditional law of the capped stationary measure given the
/// counts off `v`: `p_k` proportional to
/// `exp(alpha k(k-1)/2 + k beta (A x)_v)`, `k = 0..=cap`.
pub fn conditional_site_law(params: &CtmcParams, x_off_v: &[u32], v: usize) -> Result<Vec<f64>, CtmcError> {
    let cap = params.cap.ok_or(CtmcError::NoCap)?;
    let nb_sum: f64 = params
        .graph
        .neighbours(v)
        .iter()
        .map(|&u| x_off_v[u] as f64)
        .sum();
    let logits: Vec<f64> = (0..=cap)
        .map(|k| {
            let k = k as f64;
            0.5 * params.alpha * k * (k - 1.0) + k * params.beta * nb_sum
        })
        .collect();
    let lse = log_sum_exp(&logits);
    Ok(logits.iter().map(|l| (l - lse).exp()).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceCheck {
    /// Tail condition: `sum_{i>=k} p_i <= sum_{i>=k} q_i` for every `k`.
    pub q_dominates_p: bool,
    /// Likelihood-ratio premise `p_i q_j <= p_j q_i` for `j < i`.
    pub lr_premise: bool,
}

/// Check whether `q` stochastically dominates `p`, together with the
/// likelihood-ratio premise that implies it.
pub fn stochastic_dominance(p: &[f64], q: &[f64]) -> Result<DominanceCheck, CtmcError> {
    assert_eq!(p.len(), q.len(), "distributions must share a support length");
    for (name, dist) in [("p", p), ("q", q)] {
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            let _ = name;
            return Err(CtmcError::NotNormalized(total));
        }
    }
    let mut tail_p = 0.0;
    let mut tail_q = 0.0;
    let mut q_dominates_p = true;
    for k in (1..p.len()).rev() {
        tail_p += p[k];
        tail_q += q[k];
        if tail_p > tail_q + 1e-12 {
            q_dominates_p = false;
        }
    }
    let mut lr_premise = true;
    for i in 0..p.len() {
        for j in 0..i {
            if p[i] * q[j] > p[j] * q[i] + 1e-12 {
                lr_premise = false;
            }
        }
    }
    Ok(DominanceCheck {
        q_dominates_p,
        lr_premise,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatisticComparison {
    pub name: String,
    pub expectation_beta1: f64,
    pub expectation_beta2: f64,
    pub ordered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaDominanceReport {
    pub statistics: Vec<StatisticComparison>,
    /// Holley premise: for every conditioning state and vertex, the
    /// single-site conditional under `beta2` dominates the one under
    /// `beta1` in the likelihood-ratio order.
    pub holley_premise_holds: bool,
    pub all_ordered: bool,
}

/// Verify the beta-monotonicity of the capped stationary law at the level
/// of expectations of increasing statistics, by exact enumeration.
/// Dominance over all increasing events is exponential in the state space,
/// so this checks the Holley premise plus a fixed increasing-statistic
/// family; it does not enumerate events.
pub fn verify_beta_dominance(
    alpha: f64,
    beta1: f64,
    beta2: f64,
    graph: &Graph,
    cap: u32,
) -> Result<BetaDominanceReport, CtmcError> {
    assert!(beta1 <= beta2, "requires beta1 <= beta2");
    let p1 = CtmcParams::new(alpha, beta1, graph.clone()).with_cap(cap);
    let p2 = CtmcParams::new(alpha, beta2, graph.clone()).with_cap(cap);
    let t1 = stationary_finite(&p1)?;
    let t2 = stationary_finite(&p2)?;
    let n = graph.n();
    let expect = |table: &StationaryTable, f: &dyn Fn(&[u32]) -> f64| -> f64 {
        table
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * f(&decode_state(i, n, cap)))
            .sum()
    };
    let stats: Vec<(&str, Box<dyn Fn(&[u32]) -> f64>)> = vec![
        ("total", Box::new(|x: &[u32]| x.iter().map(|&k| k as f64).sum())),
        (
            "max",
            Box::new(|x: &[u32]| x.iter().cloned().max().unwrap_or(0) as f64),
        ),
        (
            "all_occupied",
            Box::new(|x: &[u32]| if x.iter().all(|&k| k >= 1) { 1.0 } else { 0.0 }),
        ),
    ];
    let mut statistics = Vec::new();
    for (name, f) in &stats {
        let e1 = expect(&t1, f);
        let e2 = expect(&t2, f);
        statistics.push(StatisticComparison {
            name: name.to_string(),
            expectation_beta1: e1,
            expectation_beta2: e2,
            ordered: e1 <= e2 + 1e-12,
        });
    }
    // Holley premise over all conditioning states and vertices
    let mut holley = true;
    let n_states = (cap as usize + 1).pow(n as u32);
    'outer: for i in 0..n_states {
        let x = decode_state(i, n, cap);
        for v in 0..n {
            let law1 = conditional_site_law(&p1, &x, v)?;
            let law2 = conditional_site_law(&p2, &x, v)?;
            let check = stochastic_dominance(&law1, &law2)?;
            if !check.lr_premise || !check.q_dominates_p {
                holley = false;
                break 'outer;
            }
        }
    }
    let all_ordered = statistics.iter().all(|s| s.ordered);
    Ok(BetaDominanceReport {
        statistics,
        holley_premise_holds: holley,
        all_ordered,
    })
}

/// Pairwise occupancy covariance under the exact capped stationary law.
pub fn occupancy_covariance(table: &StationaryTable, n: usize, u: usize, v: usize) -> f64 {
    let cap = table.cap;
    let mut e_u = 0.0;
    let mut e_v = 0.0;
    let mut e_uv = 0.0;
    for (i, p) in table.probs.iter().enumerate() {
        let x = decode_state(i, n, cap);
        e_u += p * x[u] as f64;
        e_v += p * x[v] as f64;
        e_uv += p * x[u] as f64 * x[v] as f64;
    }
    e_uv - e_u * e_v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k2() -> Graph {
        Graph::family(Family::Complete(2)).unwrap()
    }

    #[test]
    fn rates_from_empty_state() {
        let params = CtmcParams::new(0.7, -0.3, k2());
        let out = rates(&params, &[0, 0]);
        assert_eq!(out.len(), 2);
        for (_, r) in out {
            assert!((r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rates_two_vertex_hand_check() {
        let params = CtmcParams::new(1.0, -1.0, k2());
        let out = rates(&params, &[2, 1]);
        // births (e^{2-1}, e^{1-2}), deaths (1, 1)
        let get = |target: &[u32]| {
            out.iter()
                .find(|(y, _)| y == target)
                .map(|(_, r)| *r)
                .unwrap()
        };
        assert!((get(&[3, 1]) - 1.0f64.exp()).abs() < 1e-12);
        assert!((get(&[2, 2]) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((get(&[1, 1]) - 1.0).abs() < 1e-15);
        assert!((get(&[2, 0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cap_blocks_births() {
        let params = CtmcParams::new(0.2, 0.2, k2()).with_cap(1);
        let out = rates(&params, &[1, 0]);
        assert!(out.iter().all(|(y, _)| y != &vec![2, 0]));
        assert!(out.iter().any(|(y, _)| y == &vec![1, 1]));
        assert!(out.iter().any(|(y, _)| y == &vec![0, 0]));
    }

    #[test]
    fn potential_zero_at_origin_and_on_single_columns_when_alpha_zero() {
        let g = Graph::family(Family::Cycle(4)).unwrap();
        assert_eq!(potential_w(1.3, -0.4, &g, &[0, 0, 0, 0]), 0.0);
        for k in 0..20u32 {
            assert_eq!(potential_w(0.0, 0.7, &g, &[k, 0, 0, 0]), 0.0);
        }
    }

    #[test]
    fn potential_routes_agree() {
        let g = Graph::family(Family::Star(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        use rand::Rng as _;
        for _ in 0..200 {
            let x: Vec<u32> = (0..4).map(|_| rng.random_range(0..15u32)).collect();
            let alpha: f64 = rng.random_range(-2.0..2.0);
            let beta: f64 = rng.random_range(-2.0..2.0);
            let a = potential_w(alpha, beta, &g, &x);
            let b = potential_w_from_q_s(alpha, beta, &g, &x);
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn detailed_balance_both_variants() {
        let g = Graph::family(Family::Star(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        use rand::Rng as _;
        for variant in [RateVariant::XRates, RateVariant::YRates] {
            for _ in 0..500 {
                let params = CtmcParams::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    g.clone(),
                )
                .with_variant(variant);
                let x: Vec<u32> = (0..5).map(|_| rng.random_range(0..20u32)).collect();
                let v = rng.random_range(0..5usize);
                let residual = check_detailed_balance(&params, &x, v).unwrap();
                assert!(residual <= 1e-12, "residual {residual} for {variant:?}");
            }
        }
    }

    #[test]
    fn perturbed_death_rate_breaks_balance() {
        // residual when the death rate is 1+eps instead of 1 is log(1+eps)
        let params = CtmcParams::new(0.5, 0.3, k2());
        let x = [1u32, 2];
        let eps = 0.05f64;
        let w_x = potential_w(0.5, 0.3, &params.graph, &x);
        let w_y = potential_w(0.5, 0.3, &params.graph, &[2, 2]);
        let log_birth = params.log_birth_rate(&x, 0).unwrap();
        let residual = (w_x + log_birth - w_y - (1.0 + eps).ln()).abs();
        assert!((residual - (1.0 + eps).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_vertex_cap_one_is_uniform_for_any_alpha() {
        let g = Graph::from_edges(1, &[]).unwrap();
        for alpha in [-3.0, 0.0, 2.5] {
            let params = CtmcParams::new(alpha, 0.9, g.clone()).with_cap(1);
            let table = stationary_finite(&params).unwrap();
            assert!((table.probs[0] - 0.5).abs() < 1e-15);
            assert!((table.probs[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_matches_generator_solve() {
        let params = CtmcParams::new(-1.0, 0.5, k2()).with_cap(2);
        let exact = stationary_finite(&params).unwrap();
        let solved = stationary_via_generator(&params).unwrap();
        let tv: f64 = exact
            .probs
            .iter()
            .zip(&solved)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 1e-10, "total variation {tv}");
    }

    #[test]
    fn cap_one_equals_ising_on_cycle() {
        // N=1 on a 2-regular graph: measure proportional to
        // exp(beta/4 (sum_{unordered v~u} y_v y_u + 2 sum_v y_v)), y = 2x - 1
        let g = Graph::family(Family::Cycle(4)).unwrap();
        let beta = 0.6;
        let params = CtmcParams::new(1.7, beta, g.clone()).with_cap(1);
        let table = stationary_finite(&params).unwrap();
        let mut ising = Vec::new();
        for i in 0..16usize {
            let x = decode_state(i, 4, 1);
            let y: Vec<f64> = x.iter().map(|&k| 2.0 * k as f64 - 1.0).collect();
            let pair: f64 = g.edges().iter().map(|&(u, v)| y[u] * y[v]).sum();
            let field: f64 = 2.0 * y.iter().sum::<f64>();
            ising.push((beta / 4.0 * (pair + field)).exp());
        }
        let z: f64 = ising.iter().sum();
        for (p, e) in table.probs.iter().zip(&ising) {
            assert!((p - e / z).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_law_uniform_when_exponent_vanishes() {
        let g = k2();
        let params = CtmcParams::new(0.0, 0.8, g).with_cap(3);
        let law = conditional_site_law(&params, &[0, 0], 0).unwrap();
        for p in law {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_law_matches_marginal_of_joint() {
        let g = Graph::family(Family::Path(3)).unwrap();
        let params = CtmcParams::new(-0.7, 0.4, g).with_cap(2);
        let table = stationary_finite(&params).unwrap();
        // condition on x_0 = 2, x_2 = 1, look at vertex 1
        let law = conditional_site_law(&params, &[2, 0, 1], 1).unwrap();
        let mut joint = vec![0.0; 3];
        for (i, p) in table.probs.iter().enumerate() {
            let x = decode_state(i, 3, 2);
            if x[0] == 2 && x[2] == 1 {
                joint[x[1] as usize] += p;
            }
        }
        let total: f64 = joint.iter().sum();
        for k in 0..3 {
            assert!((law[k] - joint[k] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbour_increase_shifts_law_upward() {
        let g = k2();
        let params = CtmcParams::new(-0.5, 0.9, g).with_cap(3);
        let low = conditional_site_law(&params, &[0, 1], 0).unwrap();
        let high = conditional_site_law(&params, &[0, 3], 0).unwrap();
        let check = stochastic_dominance(&low, &high).unwrap();
        assert!(check.lr_premise && check.q_dominates_p);
    }

    #[test]
    fn dominance_basic_cases() {
        let p = vec![0.5, 0.5];
        let same = stochastic_dominance(&p, &p).unwrap();
        assert!(same.q_dominates_p);
        let q = vec![0.9, 0.1];
        let fails = stochastic_dominance(&p, &q).unwrap();
        assert!(!fails.q_dominates_p);
        assert!(stochastic_dominance(&[0.5, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn beta_dominance_two_vertex() {
        let g = k2();
        let report = verify_beta_dominance(-1.0, 0.1, 0.5, &g, 2).unwrap();
        assert!(report.all_ordered);
        assert!(report.holley_premise_holds);
        let equal = verify_beta_dominance(-1.0, 0.3, 0.3, &g, 2).unwrap();
        for s in &equal.statistics {
            assert!((s.expectation_beta1 - s.expectation_beta2).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_examples() {
        let star = Graph::family(Family::Star(4)).unwrap();
        assert_eq!(
            classify(-1.0, 0.4, &star).unwrap().verdict,
            Verdict::PositiveRecurrent
        );
        assert_eq!(
            classify(-1.0, 0.5, &star).unwrap().verdict,
            Verdict::TransientNonExplosive
        );
        let c5 = Graph::family(Family::Cycle(5)).unwrap();
        let c6 = Graph::family(Family::Cycle(6)).unwrap();
        assert_eq!(classify(0.0, -1.0, &c5).unwrap().verdict, Verdict::NullRecurrent);
        assert_eq!(
            classify(0.0, -1.0, &c6).unwrap().verdict,
            Verdict::TransientNonExplosive
        );
        assert!(classify(0.0, 1.0, &Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap()).is_err());
    }

    #[test]
    fn classify_is_total_on_a_grid() {
        let g = Graph::family(Family::Star(3)).unwrap();
        for i in -8..=8 {
            for j in -8..=8 {
                let alpha = i as f64 / 4.0;
                let beta = j as f64 / 4.0;
                classify(alpha, beta, &g).unwrap();
            }
        }
    }

    #[test]
    fn bounded_rates_never_hit_event_cap_fast() {
        // alpha=0, beta<0: all rates <= 1
        let g = Graph::family(Family::Cycle(4)).unwrap();
        let params = CtmcParams::new(0.0, -1.0, g);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let run = simulate_ctmc(&params, &[0; 4], 50.0, 100_000, 0, &mut rng);
        assert_eq!(run.outcome, SimOutcome::CompletedHorizon);
    }

    #[test]
    fn single_site_empirical_stationary_matches_solved_law() {
        // alpha=-2, beta irrelevant on a single vertex; stationary law of
        // the 1-d birth-death chain is pi_k proportional to e^{alpha k(k-1)/2}
        let g = Graph::from_edges(1, &[]).unwrap();
        let alpha = -2.0;
        let params = CtmcParams::new(alpha, 0.0, g);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let run = simulate_ctmc(&params, &[0], 1e9, 200_000, 1, &mut rng);
        // time-weighted occupation fractions from the full jump record
        let mut occupation = vec![0.0f64; 10];
        let mut t_total = 0.0;
        for pair in run.trajectory.windows(2) {
            let (t0, ref s) = pair[0];
            let (t1, _) = pair[1];
            let dt = t1 - t0;
            if (s[0] as usize) < occupation.len() {
                occupation[s[0] as usize] += dt;
            }
            t_total += dt;
        }
        let weights: Vec<f64> = (0..10)
            .map(|k| (alpha * k as f64 * (k as f64 - 1.0) / 2.0).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        for k in 0..4 {
            let expected = weights[k] / z;
            let got = occupation[k] / t_total;
            assert!(
                (got - expected).abs() < 0.02,
                "k={k}: empirical {got}, solved {expected}"
            );
        }
    }
}
