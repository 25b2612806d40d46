//! Exact optimal expected total cost per type.
//!
//! The per-type optimum is the least fixed point of the one-step operator
//! `F(x)_q = min_a (c(q,a) + Σ_outcomes p · Σ_i x_offspring)`, reached by
//! iterating from the zero vector. Components are extended non-negative
//! reals: a component that climbs past a configurable threshold is pinned
//! to `+∞` (the iteration is monotone from zero, so it can never come back
//! down). Pinning is a heuristic divergence flag; deciding finiteness
//! exactly is not attempted, and near-critical models may need a smaller
//! threshold or more iterations.

use crate::model::{ActionId, Bmdp, Config, StaticStrategy, TypeId, ValueVector};
use thiserror::Error;

/// Rounds and tolerance for the spectral-radius power iteration.
const POWER_ROUNDS: usize = 200;
const POWER_TOL: f64 = 1e-12;

/// Stopping rules for fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    /// Sup-norm threshold on successive iterates, over non-pinned components.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Components exceeding this value are pinned to `+∞`.
    pub v_max: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            v_max: 1e12,
        }
    }
}

impl SolveParams {
    fn check(&self) {
        assert!(self.tolerance > 0.0, "tolerance must be positive");
        assert!(
            self.v_max > self.tolerance,
            "v_max must exceed the tolerance"
        );
        assert!(self.max_iterations > 0, "max_iterations must be positive");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Every non-pinned component settled below the tolerance.
    Converged,
    /// The iteration budget ran out with some component still moving.
    MaxIterationsReached,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Per-type optimal values; pinned components are `+∞`.
    pub values: ValueVector,
    /// Per-type argmin at the final values, ties broken by lowest index.
    pub strategy: StaticStrategy,
    pub iterations: usize,
    /// Per-type settledness: false for pinned components and for
    /// components still moving when the budget ran out.
    pub converged_types: Vec<bool>,
    pub status: SolveStatus,
}

/// Value of taking action `a` at type `q` against continuation values `x`.
/// Any offspring valued `+∞` makes the whole expression `+∞`.
fn action_value(model: &Bmdp, q: TypeId, a: ActionId, x: &[f64]) -> f64 {
    let spec = model.action(q, a);
    let mut total = spec.cost;
    for o in &spec.outcomes {
        let mut inner = 0.0;
        for &r in &o.offspring {
            inner += x[r.0];
        }
        total += o.probability * inner;
    }
    debug_assert!(!total.is_nan(), "action value must not be NaN");
    total
}

fn argmin_action(model: &Bmdp, q: TypeId, x: &[f64]) -> (ActionId, f64) {
    let mut best = (ActionId(0), action_value(model, q, ActionId(0), x));
    for a in model.action_ids(q).skip(1) {
        let v = action_value(model, q, a, x);
        if v < best.1 {
            best = (a, v);
        }
    }
    best
}

/// One application of the optimality operator `F`.
pub fn apply_target(model: &Bmdp, x: &ValueVector) -> ValueVector {
    assert_eq!(x.len(), model.num_types());
    let xs = x.values();
    ValueVector::from_values(
        model
            .type_ids()
            .map(|q| argmin_action(model, q, xs).1)
            .collect(),
    )
}

// Shared iteration core: `pick` evaluates one type against the current
// vector, and must be monotone in its input (true for both the optimality
// operator and a fixed-strategy operator), which is what makes pinning
// sound for iterations started at zero.
fn iterate_pinned(
    n: usize,
    params: &SolveParams,
    mut pick: impl FnMut(usize, &[f64]) -> f64,
) -> (Vec<f64>, Vec<bool>, usize, SolveStatus) {
    params.check();
    let mut x = vec![0.0; n];
    let mut pinned = vec![false; n];
    let mut last_diff = vec![0.0; n];
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterationsReached;

    for k in 1..=params.max_iterations {
        let mut next = vec![0.0; n];
        let mut worst = 0.0_f64;
        for q in 0..n {
            if pinned[q] {
                next[q] = f64::INFINITY;
                last_diff[q] = 0.0;
                continue;
            }
            let v = pick(q, &x);
            if v > params.v_max {
                pinned[q] = true;
                next[q] = f64::INFINITY;
                last_diff[q] = 0.0;
                continue;
            }
            last_diff[q] = (v - x[q]).abs();
            worst = worst.max(last_diff[q]);
            next[q] = v;
        }
        x = next;
        iterations = k;
        if worst < params.tolerance {
            status = SolveStatus::Converged;
            break;
        }
    }

    let converged: Vec<bool> = (0..n)
        .map(|q| !pinned[q] && last_diff[q] < params.tolerance)
        .collect();
    (x, converged, iterations, status)
}

/// Kleene iteration from the zero vector. Stops when the sup-norm of the
/// step over non-pinned components falls below the tolerance, or when the
/// iteration budget is exhausted (reported as
/// [`SolveStatus::MaxIterationsReached`]).
pub fn value_iterate(model: &Bmdp, params: &SolveParams) -> SolveResult {
    let n = model.num_types();
    let (x, converged_types, iterations, status) =
        iterate_pinned(n, params, |q, xs| argmin_action(model, TypeId(q), xs).1);
    let strategy = StaticStrategy::new(
        model
            .type_ids()
            .map(|q| argmin_action(model, q, &x).0)
            .collect(),
    );
    SolveResult {
        values: ValueVector::from_values(x),
        strategy,
        iterations,
        converged_types,
        status,
    }
}

/// Expected offspring counts per type under a fixed strategy: entry
/// `(q, r)` is the expected number of type-`r` children spawned when a
/// type-`q` entity takes its strategy action.
#[derive(Debug, Clone)]
pub struct ExpectedOffspringMatrix {
    rows: Vec<Vec<f64>>,
}

impl ExpectedOffspringMatrix {
    pub fn for_strategy(model: &Bmdp, sigma: &StaticStrategy) -> Self {
        assert!(sigma.is_valid_for(model), "strategy does not fit the model");
        let n = model.num_types();
        let mut rows = vec![vec![0.0; n]; n];
        for q in model.type_ids() {
            let spec = model.action(q, sigma.get(q));
            for o in &spec.outcomes {
                for &r in &o.offspring {
                    rows[q.0][r.0] += o.probability;
                }
            }
        }
        ExpectedOffspringMatrix { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, q: TypeId, r: TypeId) -> f64 {
        self.rows[q.0][r.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Dominant-eigenvalue estimate by power iteration from the all-ones
    /// vector, with sup-norm normalization. Exact for the nonnegative
    /// matrices arising here whenever the iteration settles; defective or
    /// reducible corner cases may leave a small overestimate, which errs
    /// on the side of not trusting the linear solve.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.rows.len();
        if n == 0 {
            return 0.0;
        }
        let mut v = vec![1.0; n];
        let mut estimate = 0.0;
        for _ in 0..POWER_ROUNDS {
            let mut w: Vec<f64> = self
                .rows
                .iter()
                .map(|row| row.iter().zip(&v).map(|(b, x)| b * x).sum())
                .collect();
            let m = w.iter().cloned().fold(0.0_f64, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            for entry in w.iter_mut() {
                *entry /= m;
            }
            v = w;
            if (m - estimate).abs() < POWER_TOL {
                return m;
            }
            estimate = m;
        }
        estimate
    }
}

/// How [`evaluate_static_strategy`] obtained its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    /// Spectral radius below one: solved `(I − B)x = c` directly.
    LinearSolve,
    /// Spectral radius at or above one: iterated the fixed-strategy
    /// operator with divergence pinning.
    Iteration,
    /// The linear system was numerically singular despite a sub-one
    /// spectral-radius estimate; fell back to iteration. The two
    /// indicators disagree, so treat the values with suspicion.
    IterationAfterSingular,
}

#[derive(Debug, Clone)]
pub struct StrategyEvaluation {
    pub values: ValueVector,
    /// Power-iteration estimate of the spectral radius of the expected
    /// offspring matrix.
    pub spectral_radius: f64,
    pub method: EvalMethod,
    /// Meaningful for the iteration paths; `Converged` for a linear solve.
    pub status: SolveStatus,
}

/// Solve `a · x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot degenerates (singular system).
fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let (upper, lower) = a.split_at_mut(row);
            let pivot = &upper[col];
            let current = &mut lower[0];
            let factor = current[col] / pivot[col];
            if factor == 0.0 {
                continue;
            }
            for (x, p) in current[col..].iter_mut().zip(&pivot[col..]) {
                *x -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Expected total cost per type when every entity of type `q` always takes
/// `sigma(q)`. With a sub-one spectral radius the unique solution of
/// `(I − B)x = c` is returned; otherwise the fixed-strategy operator is
/// iterated from zero with divergence pinning.
pub fn evaluate_static_strategy(
    model: &Bmdp,
    sigma: &StaticStrategy,
    params: &SolveParams,
) -> StrategyEvaluation {
    assert!(sigma.is_valid_for(model), "strategy does not fit the model");
    let n = model.num_types();
    let matrix = ExpectedOffspringMatrix::for_strategy(model, sigma);
    let rho = matrix.spectral_radius();
    let costs: Vec<f64> = model
        .type_ids()
        .map(|q| model.action(q, sigma.get(q)).cost)
        .collect();

    if rho < 1.0 {
        // I - B
        let a: Vec<Vec<f64>> = matrix
            .rows
            .iter()
            .enumerate()
            .map(|(q, row)| {
                row.iter()
                    .enumerate()
                    .map(|(r, &b)| if q == r { 1.0 - b } else { -b })
                    .collect()
            })
            .collect();
        // The true solution satisfies x = c + Bx >= c > 0, so a negative or
        // non-finite entry means the system was too ill-conditioned to
        // trust; treat it like a singular system.
        let solution = gaussian_solve(a, costs.clone())
            .filter(|x| x.iter().all(|v| v.is_finite() && *v >= 0.0));
        if let Some(x) = solution {
            return StrategyEvaluation {
                values: ValueVector::from_values(x),
                spectral_radius: rho,
                method: EvalMethod::LinearSolve,
                status: SolveStatus::Converged,
            };
        }
        let (x, _, _, status) = iterate_pinned(n, params, |q, xs| {
            action_value(model, TypeId(q), sigma.get(TypeId(q)), xs)
        });
        return StrategyEvaluation {
            values: ValueVector::from_values(x),
            spectral_radius: rho,
            method: EvalMethod::IterationAfterSingular,
            status,
        };
    }

    let (x, _, _, status) = iterate_pinned(n, params, |q, xs| {
        action_value(model, TypeId(q), sigma.get(TypeId(q)), xs)
    });
    StrategyEvaluation {
        values: ValueVector::from_values(x),
        spectral_radius: rho,
        method: EvalMethod::Iteration,
        status,
    }
}

/// Total value of a configuration: the sum of its entities' values.
/// The empty configuration is worth 0; any `+∞` entity makes it `+∞`.
pub fn config_value(values: &ValueVector, alpha: &Config) -> f64 {
    alpha.entities.iter().map(|&q| values.get(q)).sum()
}

/// The model's type-dependency graph has a cycle, so one-pass evaluation
/// does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("type dependency graph contains a cycle")]
pub struct CyclicModel;

/// One-pass exact evaluation for hierarchical models.
///
/// Builds the dependency graph (edge `q → r` iff `r` appears in some
/// offspring list of some action of `q`) and, if it is acyclic, evaluates
/// the optimality equations in dependency order: no iteration, no
/// tolerance. Serves as an independent oracle for [`value_iterate`].
pub fn solve_acyclic(model: &Bmdp) -> Result<ValueVector, CyclicModel> {
    let n = model.num_types();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for q in model.type_ids() {
        let mut deps: Vec<usize> = model.types[q.0]
            .actions
            .iter()
            .flat_map(|a| a.outcomes.iter())
            .flat_map(|o| o.offspring.iter().map(|t| t.0))
            .collect();
        deps.sort_unstable();
        deps.dedup();
        children[q.0] = deps;
    }

    // Kahn's algorithm, resolving children before parents.
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut unresolved: Vec<usize> = vec![0; n];
    for q in 0..n {
        unresolved[q] = children[q].len();
        for &r in &children[q] {
            parents[r].push(q);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&q| unresolved[q] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(q) = ready.pop() {
        order.push(q);
        for &p in &parents[q] {
            unresolved[p] -= 1;
            if unresolved[p] == 0 {
                ready.push(p);
            }
        }
    }
    if order.len() < n {
        return Err(CyclicModel);
    }

    let mut x = vec![0.0; n];
    for &q in &order {
        x[q] = argmin_action(model, TypeId(q), &x).1;
    }
    Ok(ValueVector::from_values(x))
}
