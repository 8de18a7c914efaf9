//! Experimental-design kernel for linear bandits.
//!
//! The solver computes an approximate G-optimal design by Frank–Wolfe ascent
//! on `log det V(pi)` with `V(pi) = sum_a pi_a a a^T`. By the Kiefer–Wolfowitz
//! equivalence theorem the maximum leverage `g(pi) = max_a a^T V(pi)^-1 a`
//! is at least `d`, with equality exactly at the optimum, so
//! `g(pi) <= d (1 + tol)` certifies near-optimality.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::env::argmax_lowest;
use crate::error::{Error, Result};

/// Relative singular-value threshold below which a direction counts as absent.
pub const RANK_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 0.01;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Lower constant of the multi-set size `n in [c, C] * d ln(1/delta) / eps^2`.
pub const DESIGN_C_LOWER: f64 = 2.0;
/// Upper constant of the multi-set size.
pub const DESIGN_C_UPPER: f64 = 4.0;

/// Full recomputation period for the incrementally updated moment matrix.
const REFRESH_EVERY: usize = 64;

/// Distribution over a list of actions together with its max leverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// Length of the action list the indices refer to.
    pub num_actions: usize,
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    /// `max_a ||a||^2_{V(pi)^-1}` over the whole action list.
    pub g_value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the certificate was met.
    pub converged: bool,
}

impl Design {
    /// Weight vector over all actions (zeros off the support).
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.num_actions];
        for (&i, &p) in self.support.iter().zip(&self.weights) {
            w[i] = p;
        }
        w
    }
}

/// Integer pull counts for each action of a design's action list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullMultiset {
    pub counts: Vec<usize>,
    /// The sizing target `n` before per-action ceilings.
    pub budget: usize,
}

impl PullMultiset {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Action indices in play order: each index repeated by its count.
    pub fn pulls(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
    }
}

/// Audit record written as `{"support":[...],"weights":[...],"counts":[...],"g":...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignAudit {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub counts: Vec<usize>,
    pub g: f64,
}

impl DesignAudit {
    pub fn new(design: &Design, multiset: &PullMultiset) -> Self {
        Self {
            support: design.support.clone(),
            weights: design.weights.clone(),
            counts: design.support.iter().map(|&i| multiset.counts[i]).collect(),
            g: design.g_value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresEstimate {
    pub theta_hat: DVector<f64>,
    pub gram: DMatrix<f64>,
    /// Ratio of largest to smallest eigenvalue of the Gram matrix.
    pub condition: f64,
}

fn dimension_of(actions: &[DVector<f64>]) -> Result<usize> {
    let d = actions
        .first()
        .ok_or_else(|| Error::validation("actions", "at least one action is required"))?
        .len();
    if d == 0 {
        return Err(Error::validation("actions", "dimension must be at least 1"));
    }
    if let Some(i) = actions.iter().position(|a| a.len() != d) {
        return Err(Error::validation(
            "actions",
            format!("action {i} has dimension {}, expected {d}", actions[i].len()),
        ));
    }
    Ok(d)
}

fn column_matrix(d: usize, columns: impl Iterator<Item = DVector<f64>>) -> DMatrix<f64> {
    let cols: Vec<_> = columns.collect();
    if cols.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Numerical rank of the span of `columns` under [`RANK_TOLERANCE`].
fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

fn moment_matrix(actions: &[DVector<f64>], weights: &[f64], d: usize) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(d, d);
    for (a, &w) in actions.iter().zip(weights) {
        if w > 0.0 {
            v.ger(w, a, a, 1.0);
        }
    }
    v
}

fn leverages_with(chol: &Cholesky<f64, Dyn>, actions: &[DVector<f64>]) -> Vec<f64> {
    let l = chol.l_dirty();
    actions
        .iter()
        .map(|a| {
            let y = l
                .solve_lower_triangular(a)
                .expect("cholesky factor has a nonzero diagonal");
            y.norm_squared()
        })
        .collect()
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Step rule for the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Toward the max-leverage action only.
    Toward,
    /// Also move weight away from the min-leverage support action when that
    /// gives the larger first-order gain, dropping it entirely when the line
    /// search hits the boundary. Keeps supports small.
    TowardAndAway,
}

#[derive(Debug, Clone, Copy)]
pub struct FrankWolfeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            step_rule: StepRule::TowardAndAway,
        }
    }
}

/// Approximate G-optimal design with the default step rule.
pub fn frank_wolfe_goptimal(actions: &[DVector<f64>], tol: f64, max_iter: usize) -> Result<Design> {
    solve(
        actions,
        FrankWolfeOptions {
            tol,
            max_iter,
            ..Default::default()
        },
        None,
    )
}

pub fn frank_wolfe_with_options(actions: &[DVector<f64>], options: FrankWolfeOptions) -> Result<Design> {
    solve(actions, options, None)
}

/// Like [`frank_wolfe_with_options`], also returning `log det V(pi)` at every
/// iterate, starting with the uniform design.
pub fn frank_wolfe_log_det_trace(
    actions: &[DVector<f64>],
    options: FrankWolfeOptions,
) -> Result<(Design, Vec<f64>)> {
    let mut trace = Vec::new();
    let design = solve(actions, options, Some(&mut trace))?;
    Ok((design, trace))
}

fn solve(
    actions: &[DVector<f64>],
    options: FrankWolfeOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Design> {
    let FrankWolfeOptions {
        tol,
        max_iter,
        step_rule,
    } = options;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::validation("tol", format!("{tol} is not in (0, 1)")));
    }
    let d = dimension_of(actions)?;
    let rank = numerical_rank(&column_matrix(d, actions.iter().cloned()));
    if rank < d {
        return Err(Error::Rank(format!(
            "actions span a {rank}-dimensional subspace of R^{d}; project to their span first"
        )));
    }
    let k = actions.len();
    let df = d as f64;
    let target = df * (1.0 + tol);

    let mut weights = vec![1.0 / k as f64; k];
    let mut v = moment_matrix(actions, &weights, d);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        if iterations % REFRESH_EVERY == 0 {
            v = moment_matrix(actions, &weights, d);
        }
        let chol =
            Cholesky::new(v.clone()).ok_or_else(|| Error::Rank("moment matrix lost definiteness".into()))?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(log_det(&chol));
        }
        let lev = leverages_with(&chol, actions);
        let j_plus = argmax_lowest(&lev).expect("nonempty");
        let g = lev[j_plus];
        if best.as_ref().is_none_or(|(bg, _)| g < *bg) {
            best = Some((g, weights.clone()));
        }
        if g <= target {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let gain_toward = g / df - 1.0;
        let away = match step_rule {
            StepRule::Toward => None,
            StepRule::TowardAndAway => weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0 && w < 1.0)
                .map(|(i, _)| (i, lev[i]))
                .min_by(|a, b| a.1.total_cmp(&b.1)),
        };
        match away {
            Some((j, omega)) if 1.0 - omega / df > gain_toward => {
                let pi = weights[j];
                let boundary = -pi / (1.0 - pi);
                let tau_star = if omega > 1.0 {
                    (omega - df) / (df * (omega - 1.0))
                } else {
                    f64::NEG_INFINITY
                };
                let (tau, drop) = if tau_star <= boundary {
                    (boundary, true)
                } else {
                    (tau_star, false)
                };
                for w in weights.iter_mut() {
                    *w *= 1.0 - tau;
                }
                weights[j] = if drop { 0.0 } else { weights[j] + tau };
                v *= 1.0 - tau;
                v.ger(tau, &actions[j], &actions[j], 1.0);
                if drop {
                    // rebuild to avoid a residual of the dropped rank-one term
                    v = moment_matrix(actions, &weights, d);
                }
            }
            _ => {
                let gamma = (g / df - 1.0) / (g - 1.0);
                for w in weights.iter_mut() {
                    *w *= 1.0 - gamma;
                }
                weights[j_plus] += gamma;
                v *= 1.0 - gamma;
                v.ger(gamma, &actions[j_plus], &actions[j_plus], 1.0);
            }
        }
    }

    let weights = if converged {
        weights
    } else {
        let (g, w) = best.expect("at least one iterate evaluated");
        log::warn!("frank-wolfe stopped after {iterations} iterations with g = {g:.6} > {target:.6}");
        w
    };
    finish(actions, d, weights, iterations, converged)
}

fn finish(
    actions: &[DVector<f64>],
    d: usize,
    mut weights: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> Result<Design> {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let chol = Cholesky::new(moment_matrix(actions, &weights, d))
        .ok_or_else(|| Error::Rank("final design is singular".into()))?;
    let g_value = leverages_with(&chol, actions)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let (support, weights): (Vec<usize>, Vec<f64>) =
        weights.into_iter().enumerate().filter(|(_, w)| *w > 0.0).unzip();
    Ok(Design {
        num_actions: actions.len(),
        support,
        weights,
        g_value,
        iterations,
        converged,
    })
}

/// Max-leverage action under `design` (lowest index on ties) and its value.
pub fn max_leverage(actions: &[DVector<f64>], design: &Design) -> Result<(usize, f64)> {
    let d = dimension_of(actions)?;
    if design.num_actions != actions.len() {
        return Err(Error::validation(
            "design",
            format!(
                "design covers {} actions, {} given",
                design.num_actions,
                actions.len()
            ),
        ));
    }
    let weighted = column_matrix(
        d,
        design
            .support
            .iter()
            .zip(&design.weights)
            .map(|(&i, &w)| &actions[i] * w.sqrt()),
    );
    let rank = numerical_rank(&weighted);
    if rank < d {
        return Err(Error::Rank(format!("design moment matrix has rank {rank} < {d}")));
    }
    let chol = Cholesky::new(&weighted * weighted.transpose())
        .ok_or_else(|| Error::Rank("design moment matrix is not positive definite".into()))?;
    let lev = leverages_with(&chol, actions);
    let i = argmax_lowest(&lev).expect("nonempty");
    Ok((i, lev[i]))
}

/// Rounds a design to integer pulls: budget `n = ceil(2 g ln(2/delta) / eps^2)`
/// and `ceil(pi_a n)` pulls per support action.
pub fn round_design(design: &Design, eps: f64, delta: f64) -> Result<PullMultiset> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::validation(
            "eps",
            format!("{eps} must be finite and positive"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::validation("delta", format!("{delta} is not in (0, 1)")));
    }
    let n = (2.0 * design.g_value * (2.0 / delta).ln() / (eps * eps)).ceil();
    if !(n.is_finite() && n < 1e15) {
        return Err(Error::validation("eps", format!("pull budget {n} is too large")));
    }
    let budget = n as usize;
    let mut counts = vec![0; design.num_actions];
    for (&i, &w) in design.support.iter().zip(&design.weights) {
        counts[i] = (w * n).ceil() as usize;
    }
    Ok(PullMultiset { counts, budget })
}

/// Running sums for an ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct LeastSquaresAccumulator {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    samples: usize,
}

impl LeastSquaresAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            samples: 0,
        }
    }

    pub fn push(&mut self, action: &DVector<f64>, reward: f64) {
        self.gram.ger(1.0, action, action, 1.0);
        self.moment.axpy(reward, action, 1.0);
        self.samples += 1;
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Solves the normal equations by Cholesky factorization.
    pub fn solve(self) -> Result<LeastSquaresEstimate> {
        let eig = SymmetricEigen::new(self.gram.clone());
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        // singular values of the stacked action matrix are sqrt of these
        if max <= 0.0 || min.max(0.0).sqrt() <= RANK_TOLERANCE * max.sqrt() {
            return Err(Error::Rank(format!(
                "gram matrix is rank deficient (eigenvalues in [{min:.3e}, {max:.3e}])"
            )));
        }
        let chol = Cholesky::new(self.gram.clone())
            .ok_or_else(|| Error::Rank("gram matrix is not positive definite".into()))?;
        Ok(LeastSquaresEstimate {
            theta_hat: chol.solve(&self.moment),
            gram: self.gram,
            condition: max / min,
        })
    }
}

/// Least-squares estimate `(sum a a^T)^-1 (sum r a)`.
pub fn least_squares(pulled: &[DVector<f64>], rewards: &[f64]) -> Result<LeastSquaresEstimate> {
    if pulled.len() != rewards.len() {
        return Err(Error::validation(
            "rewards",
            format!("{} rewards for {} pulls", rewards.len(), pulled.len()),
        ));
    }
    let d = dimension_of(pulled)?;
    let mut acc = LeastSquaresAccumulator::new(d);
    for (a, &r) in pulled.iter().zip(rewards) {
        acc.push(a, r);
    }
    acc.solve()
}

/// Greedy farthest-point `eps`-net, seeded with index 0. Returns indices into
/// `points`. The result covers every point within `eps` and its members are
/// pairwise more than `eps` apart.
pub fn epsilon_net(points: &[DVector<f64>], eps: f64) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let distance = |a: &DVector<f64>, b: &DVector<f64>| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut net = vec![0];
    let mut dist: Vec<f64> = points.iter().map(|p| distance(p, &points[0])).collect();
    loop {
        let (far, &d) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty");
        if d <= eps {
            break;
        }
        net.push(far);
        let center = &points[far];
        for (slot, p) in dist.iter_mut().zip(points) {
            let nd = distance(p, center);
            if nd < *slot {
                *slot = nd;
            }
        }
    }
    net
}

/// Orthonormal coordinates for the span of an action set.
#[derive(Debug, Clone)]
pub struct SpanProjection {
    /// `d x d'` matrix with orthonormal columns spanning the actions.
    pub basis: DMatrix<f64>,
    pub projected: Vec<DVector<f64>>,
}

impl SpanProjection {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Coordinates of `v` in the span (orthogonal projection).
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(v)
    }

    /// Ambient vector for span coordinates.
    pub fn lift(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.basis * coords
    }
}

/// Isometric embedding of the actions into `R^{d'}`, `d'` their numerical rank.
pub fn project_to_span(actions: &[DVector<f64>]) -> Result<SpanProjection> {
    let d = dimension_of(actions)?;
    let m = column_matrix(d, actions.iter().cloned());
    let svd = m.svd(true, false);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::Degenerate("all actions are zero".into()));
    }
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOLERANCE * max)
        .map(|(i, _)| i)
        .collect();
    let basis = DMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let projected = actions.iter().map(|a| basis.tr_mul(a)).collect();
    Ok(SpanProjection { basis, projected })
}
