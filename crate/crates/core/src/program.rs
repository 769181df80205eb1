//! The finite convex training program over a set of activation patterns,
//!
//! ```text
//! min  ℓ(Σ_i D_i X (v_i − w_i), y) + β Σ_i (‖v_i‖₂ + ‖w_i‖₂)
//! s.t. (2D_i − I) X v_i ≥ 0,  (2D_i − I) X w_i ≥ 0,
//! ```
//!
//! together with its dual: maximize `−ℓ*(−v)` subject to
//! `max_{u ∈ B₂ ∩ cone_i} ±vᵀ D_i X u ≤ β` for every pattern `i`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arrangements::{default_margin, enumerate_exact, ActivationPattern, ArrangementSet};
use crate::numerics::vector::{dot, norm2, norm_sq};
use crate::numerics::{nnls, nnls_kkt_residual, NumericsError};
use crate::solvers::{solve_group_cone, SolverConfig};
use crate::{Error, Matrix, Result};

/// Relative slack on `β` before a dual point counts as infeasible.
pub const DUAL_FEASIBILITY_REL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    /// `Σ_j max(0, 1 − y_j ŷ_j)` with labels in `{−1, +1}`.
    Hinge,
}

impl LossKind {
    pub fn value(self, yhat: &[f64], y: &[f64]) -> f64 {
        match self {
            LossKind::Squared => {
                0.5 * yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            LossKind::Hinge => yhat
                .iter()
                .zip(y)
                .map(|(a, b)| (1.0 - a * b).max(0.0))
                .sum(),
        }
    }

    /// `−ℓ*(−v)`, or `None` when `−v` lies outside the conjugate's domain.
    pub fn dual_value(self, v: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            LossKind::Squared => Some(dot(v, y) - 0.5 * norm_sq(v)),
            LossKind::Hinge => {
                let mut total = 0.0;
                for (&vj, &yj) in v.iter().zip(y) {
                    let t = vj * yj;
                    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
                        return None;
                    }
                    total += t;
                }
                Some(total)
            }
        }
    }

    /// Moves `v` into the conjugate's domain (identity for squared loss).
    pub fn clip_dual(self, v: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            LossKind::Squared => v.to_vec(),
            LossKind::Hinge => v
                .iter()
                .zip(y)
                .map(|(&vj, &yj)| yj * (vj * yj).clamp(0.0, 1.0))
                .collect(),
        }
    }

    pub fn check_labels(self, y: &[f64]) -> Result<()> {
        if self == LossKind::Hinge {
            if let Some(j) = y.iter().position(|&t| t != 1.0 && t != -1.0) {
                return Err(Error::InvalidArgument(format!(
                    "hinge loss needs labels in {{-1, +1}}, got y[{j}] = {}",
                    y[j]
                )));
            }
        }
        Ok(())
    }
}

/// Data, labels, regularization and patterns of one convex program.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ProblemJson", into = "ProblemJson")]
pub struct ConvexTrainingProblem {
    x: Matrix,
    y: Vec<f64>,
    beta: f64,
    loss: LossKind,
    patterns: ArrangementSet,
    cones: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    x: Matrix,
    y: Vec<f64>,
    beta: f64,
    loss: LossKind,
    patterns: ArrangementSet,
}

impl From<ConvexTrainingProblem> for ProblemJson {
    fn from(p: ConvexTrainingProblem) -> Self {
        ProblemJson {
            x: p.x,
            y: p.y,
            beta: p.beta,
            loss: p.loss,
            patterns: p.patterns,
        }
    }
}

impl TryFrom<ProblemJson> for ConvexTrainingProblem {
    type Error = Error;

    fn try_from(j: ProblemJson) -> Result<Self> {
        ConvexTrainingProblem::new(j.x, j.y, j.beta, j.loss, j.patterns)
    }
}

impl ConvexTrainingProblem {
    /// `β = 0` is accepted (pure loss); negative or non-finite `β` is not.
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        beta: f64,
        loss: LossKind,
        patterns: ArrangementSet,
    ) -> Result<Self> {
        let n = x.rows();
        if x.is_empty() {
            return Err(Error::InvalidArgument("empty data matrix".into()));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{n} samples but {} labels", y.len())));
        }
        if y.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("labels must be finite".into()));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be finite and ≥ 0, got {beta}")));
        }
        if patterns.n() != n {
            return Err(Error::Shape(format!(
                "patterns over {} samples for {n} samples",
                patterns.n()
            )));
        }
        if patterns.is_empty() {
            return Err(Error::InvalidArgument("pattern set is empty".into()));
        }
        loss.check_labels(&y)?;
        let cones = patterns.patterns().iter().map(|p| p.cone_matrix(&x)).collect();
        Ok(ConvexTrainingProblem {
            x,
            y,
            beta,
            loss,
            patterns,
            cones,
        })
    }

    /// Program over every region of the arrangement of `x`.
    pub fn with_exact_patterns(x: Matrix, y: Vec<f64>, beta: f64, loss: LossKind) -> Result<Self> {
        let patterns = enumerate_exact(&x, default_margin(&x))?;
        ConvexTrainingProblem::new(x, y, beta, loss, patterns)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn patterns(&self) -> &ArrangementSet {
        &self.patterns
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// `(2D_i − I) X` for pattern `i`.
    pub fn cone(&self, i: usize) -> &Matrix {
        &self.cones[i]
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        ConvexTrainingProblem::new(self.x.clone(), self.y.clone(), beta, self.loss, self.patterns.clone())
    }

    pub fn with_labels(&self, y: Vec<f64>) -> Result<Self> {
        ConvexTrainingProblem::new(self.x.clone(), y, self.beta, self.loss, self.patterns.clone())
    }

    pub fn check_solution(&self, sol: &GroupSolution) -> Result<()> {
        let p = self.pattern_count();
        if sol.v.len() != p || sol.w.len() != p {
            return Err(Error::Shape(format!(
                "solution has {}/{} groups for {p} patterns",
                sol.v.len(),
                sol.w.len()
            )));
        }
        let d = self.d();
        if let Some(bad) = sol.v.iter().chain(&sol.w).find(|g| g.len() != d) {
            return Err(Error::Shape(format!("group of length {} for d = {d}", bad.len())));
        }
        Ok(())
    }

    /// `Σ_i D_i X (v_i − w_i)`.
    pub fn fitted(&self, sol: &GroupSolution) -> Result<Vec<f64>> {
        self.check_solution(sol)?;
        let mut out = vec![0.0; self.n()];
        for (i, p) in self.patterns.patterns().iter().enumerate() {
            let diff: Vec<f64> = sol.v[i].iter().zip(&sol.w[i]).map(|(a, b)| a - b).collect();
            if diff.iter().all(|&t| t == 0.0) {
                continue;
            }
            let z = self.x.matvec(&diff);
            for (j, o) in out.iter_mut().enumerate() {
                if p.is_active(j) {
                    *o += z[j];
                }
            }
        }
        Ok(out)
    }
}

/// The per-pattern variable pairs `(v_i, w_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSolution {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

impl GroupSolution {
    pub fn zeros(p: usize, d: usize) -> Self {
        GroupSolution {
            v: vec![vec![0.0; d]; p],
            w: vec![vec![0.0; d]; p],
        }
    }

    pub fn for_problem(problem: &ConvexTrainingProblem) -> Self {
        GroupSolution::zeros(problem.pattern_count(), problem.d())
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `Σ_i ‖v_i‖ + ‖w_i‖`.
    pub fn penalty(&self) -> f64 {
        self.v.iter().chain(&self.w).map(|g| norm2(g)).sum()
    }

    pub fn max_group_norm(&self) -> f64 {
        self.v.iter().chain(&self.w).map(|g| norm2(g)).fold(0.0, f64::max)
    }

    /// Count of groups with norm above `rel · max group norm`.
    pub fn nonzero_groups(&self, rel: f64) -> usize {
        let cut = rel * self.max_group_norm();
        self.v
            .iter()
            .chain(&self.w)
            .filter(|g| {
                let n = norm2(g);
                n > 0.0 && n > cut
            })
            .count()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.w).flatten().all(|t| t.is_finite())
    }
}

/// Dual point and the primal–dual gap it certifies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Unscaled dual candidate (`y − ŷ` for squared loss).
    pub v_hat: Vec<f64>,
    /// Estimate of `max_{‖u‖≤1} |v̂ᵀ(Xu)₊|`: exact over the program's
    /// patterns, and additionally probed at random directions, witnesses and
    /// solution neurons.
    pub max_constraint_violation: f64,
    /// Exact `max_i max_{u ∈ B₂ ∩ cone_i} |v̂ᵀ D_i X u|` over the program's
    /// patterns.
    pub program_constraint: f64,
    /// Primal objective minus `dual_value`.
    pub certified_gap: f64,
    /// Dual objective of `v̂` scaled into the program's dual feasible set.
    pub dual_value: f64,
    /// Dual objective of `v̂` scaled by `max_constraint_violation`; a lower
    /// bound on the nonconvex optimum when the probes found the true maximum
    /// (always the case with exact patterns).
    pub global_dual_value: f64,
    pub primal_value: f64,
    /// Whether `v̂` itself satisfies the program's dual constraints within
    /// relative `1e-6`.
    pub valid: bool,
}

pub fn objective(problem: &ConvexTrainingProblem, sol: &GroupSolution) -> Result<f64> {
    let yhat = problem.fitted(sol)?;
    Ok(problem.loss.value(&yhat, &problem.y) + problem.beta * sol.penalty())
}

/// Largest violation of the cone constraints over all groups (0 when feasible).
pub fn cone_violation(problem: &ConvexTrainingProblem, sol: &GroupSolution) -> Result<f64> {
    problem.check_solution(sol)?;
    let mut worst = 0.0_f64;
    for i in 0..problem.pattern_count() {
        let a = problem.cone(i);
        for g in [&sol.v[i], &sol.w[i]] {
            if g.iter().all(|&t| t == 0.0) {
                continue;
            }
            let z = a.matvec(g);
            worst = z.iter().fold(worst, |m, &t| m.max(-t));
        }
    }
    Ok(worst)
}

/// `max { vᵀ D X u : ‖u‖₂ ≤ 1, (2D − I) X u ≥ 0 }`.
///
/// The maximum of a linear function over a cone intersected with the unit
/// ball is the norm of the projection of its gradient `g = XᵀDv` onto the
/// cone: `min_{λ≥0} ‖g + Aᵀλ‖` with `A = (2D − I)X`. The inner problem is
/// solved exactly by NNLS; `tol` bounds the accepted KKT residual relative to
/// `‖g‖`.
pub fn solve_region_dual(x: &Matrix, d: &ActivationPattern, v: &[f64], tol: f64) -> Result<f64> {
    let a = d.cone_matrix(x);
    region_dual_with_cone(x, &a, d, v, tol)
}

fn region_dual_with_cone(
    x: &Matrix,
    a: &Matrix,
    d: &ActivationPattern,
    v: &[f64],
    tol: f64,
) -> Result<f64> {
    Ok(region_dual_argmax(x, a, d, v, tol)?.0)
}

/// Value of [`solve_region_dual`] together with a maximizing unit vector
/// (`None` when the value is zero).
pub(crate) fn region_dual_argmax(
    x: &Matrix,
    a: &Matrix,
    d: &ActivationPattern,
    v: &[f64],
    tol: f64,
) -> Result<(f64, Option<Vec<f64>>)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if d.len() != x.rows() || v.len() != x.rows() {
        return Err(Error::Shape(format!(
            "pattern length {} and vector length {} for {} samples",
            d.len(),
            v.len(),
            x.rows()
        )));
    }
    let g = x.tmatvec(&d.apply(v));
    let gn = norm2(&g);
    if gn == 0.0 {
        return Ok((0.0, None));
    }
    // the cone's polar is {−Aᵀλ : λ ≥ 0}
    if a.matvec(&g).iter().all(|&t| t >= 0.0) {
        return Ok((gn, Some(g.iter().map(|t| t / gn).collect())));
    }
    let m = a.transpose().scaled(-1.0);
    let lambda = nnls(&m, &g)?;
    let kkt = nnls_kkt_residual(&m, &g, &lambda);
    let amax = a.max_abs().max(1.0);
    // relative to ‖g‖, with an absolute floor at rounding level
    if kkt > tol * gn * amax && kkt > 1e-12 * amax * amax {
        return Err(Error::Numerics(NumericsError::NoConvergence {
            routine: "solve_region_dual",
            iterations: 0,
            last: kkt,
        }));
    }
    let r: Vec<f64> = g.iter().zip(m.matvec(&lambda)).map(|(gi, mi)| gi - mi).collect();
    let rn = norm2(&r);
    if rn == 0.0 {
        return Ok((0.0, None));
    }
    Ok((rn, Some(r.iter().map(|t| t / rn).collect())))
}

/// Exact dual constraint value over the problem's patterns:
/// `max_i max(solve_region_dual(v), solve_region_dual(−v))`.
pub fn program_constraint_value(problem: &ConvexTrainingProblem, v: &[f64]) -> Result<f64> {
    let neg: Vec<f64> = v.iter().map(|t| -t).collect();
    let mut best = 0.0_f64;
    for (i, p) in problem.patterns.patterns().iter().enumerate() {
        let a = problem.cone(i);
        best = best
            .max(region_dual_with_cone(&problem.x, a, p, v, 1e-8)?)
            .max(region_dual_with_cone(&problem.x, a, p, &neg, 1e-8)?);
    }
    Ok(best)
}

/// Duality certificate with the default dual candidate: `y − ŷ` for squared
/// loss, and for hinge loss the subgradient guess `y_j · 1[y_j ŷ_j ≤ 1]`.
pub fn dual_certificate(
    problem: &ConvexTrainingProblem,
    sol: &GroupSolution,
    probe_count: usize,
    seed: u64,
) -> Result<DualCertificate> {
    dual_certificate_with(problem, sol, None, probe_count, seed)
}

/// [`dual_certificate`] with an explicit dual candidate (e.g. a solver's
/// multiplier estimate).
pub fn dual_certificate_with(
    problem: &ConvexTrainingProblem,
    sol: &GroupSolution,
    v_hat: Option<&[f64]>,
    probe_count: usize,
    seed: u64,
) -> Result<DualCertificate> {
    let yhat = problem.fitted(sol)?;
    let y = &problem.y;
    let primal = problem.loss.value(&yhat, y) + problem.beta * sol.penalty();
    let raw = match v_hat {
        Some(v) => {
            if v.len() != problem.n() {
                return Err(Error::Shape(format!(
                    "dual candidate of length {} for {} samples",
                    v.len(),
                    problem.n()
                )));
            }
            v.to_vec()
        }
        None => default_dual_candidate(problem.loss, &yhat, y),
    };
    let v = problem.loss.clip_dual(&raw, y);

    let c_prog = program_constraint_value(problem, &v)?;
    let c_probe = probe_constraint(problem, sol, &v, probe_count, seed);
    let c_all = c_prog.max(c_probe);
    let beta = problem.beta;
    let scaled_value = |c: f64| {
        let s = if c > beta { beta / c } else { 1.0 };
        let vs: Vec<f64> = v.iter().map(|t| t * s).collect();
        problem
            .loss
            .dual_value(&vs, y)
            .expect("clipped dual candidate lies in the conjugate domain")
    };
    let dual_value = scaled_value(c_prog);
    let global_dual_value = scaled_value(c_all);
    Ok(DualCertificate {
        valid: c_prog <= beta * (1.0 + DUAL_FEASIBILITY_REL),
        v_hat: v,
        max_constraint_violation: c_all,
        program_constraint: c_prog,
        certified_gap: primal - dual_value,
        dual_value,
        global_dual_value,
        primal_value: primal,
    })
}

fn default_dual_candidate(loss: LossKind, yhat: &[f64], y: &[f64]) -> Vec<f64> {
    match loss {
        LossKind::Squared => y.iter().zip(yhat).map(|(a, b)| a - b).collect(),
        LossKind::Hinge => y
            .iter()
            .zip(yhat)
            .map(|(&yj, &pj)| if yj * pj <= 1.0 { yj } else { 0.0 })
            .collect(),
    }
}

/// `max |vᵀ(Xu)₊|` over random unit vectors, pattern witnesses and the
/// normalized nonzero groups of `sol`.
fn probe_constraint(
    problem: &ConvexTrainingProblem,
    sol: &GroupSolution,
    v: &[f64],
    probe_count: usize,
    seed: u64,
) -> f64 {
    let x = &problem.x;
    let eval = |u: &[f64]| {
        let nu = norm2(u);
        if nu == 0.0 {
            return 0.0;
        }
        let z = x.matvec(u);
        (z.iter().zip(v).map(|(&t, &vj)| t.max(0.0) * vj).sum::<f64>() / nu).abs()
    };
    let mut best = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; problem.d()];
    for _ in 0..probe_count {
        for t in u.iter_mut() {
            *t = StandardNormal.sample(&mut rng);
        }
        best = best.max(eval(&u));
    }
    for w in problem.patterns.witnesses() {
        best = best.max(eval(w));
    }
    for g in sol.v.iter().chain(&sol.w) {
        best = best.max(eval(g));
    }
    best
}

/// Approximates the gauge of `y` with respect to `conv(Q_X ∪ −Q_X)` by the
/// path cost `Σ_i ‖v_i‖ + ‖w_i‖` of the squared-loss program at a small `β`,
/// solved over every region of the arrangement.
pub fn gauge_value(x: &Matrix, y: &[f64], beta_small: f64, cfg: &SolverConfig) -> Result<f64> {
    if !(beta_small > 0.0) {
        return Err(Error::InvalidArgument(format!("beta_small must be positive, got {beta_small}")));
    }
    let problem = ConvexTrainingProblem::with_exact_patterns(x.clone(), y.to_vec(), beta_small, LossKind::Squared)?;
    let (sol, _) = solve_group_cone(&problem, cfg)?;
    Ok(sol.penalty())
}

/// `‖y‖ · 1e-4`, the default `β` for [`gauge_value`].
pub fn default_gauge_beta(y: &[f64]) -> f64 {
    1e-4 * norm2(y)
}

/// Support function of the polar set at `y`, by linear programming over a
/// sample of the constraints: `max yᵀz s.t. |zᵀ(Xu_k)₊| ≤ 1` for
/// `sample_count` random unit vectors `u_k`.
///
/// Dropping constraints enlarges the feasible set, so this is an upper bound
/// that decreases to the true value as the sample grows. Returns infinity if
/// the sampled constraints leave `yᵀz` unbounded.
pub fn polar_support(x: &Matrix, y: &[f64], sample_count: usize, seed: u64) -> Result<f64> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be ≥ 1".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::Shape(format!("{} samples but {} labels", x.rows(), y.len())));
    }
    if y.iter().all(|&t| t == 0.0) {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<_> = y
        .iter()
        .map(|&yj| lp.add_var(yj, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let mut u = vec![0.0; x.cols()];
    for _ in 0..sample_count {
        for t in u.iter_mut() {
            *t = StandardNormal.sample(&mut rng);
        }
        let nu = norm2(&u);
        let g: Vec<f64> = x.matvec(&u).iter().map(|t| (t / nu).max(0.0)).collect();
        if g.iter().all(|&t| t == 0.0) {
            continue;
        }
        let expr: Vec<_> = z.iter().zip(&g).filter(|(_, &c)| c != 0.0).map(|(&var, &c)| (var, c)).collect();
        lp.add_constraint(expr.clone(), ComparisonOp::Le, 1.0);
        lp.add_constraint(expr, ComparisonOp::Ge, -1.0);
    }
    match lp.solve() {
        Ok(outcome) => match outcome.solution() {
            Some(s) => Ok(s.objective()),
            None => Err(Error::InvalidArgument("polar LP was interrupted".into())),
        },
        Err(microlp::Error::Unbounded) => Ok(f64::INFINITY),
        Err(e) => Err(Error::InvalidArgument(format!("polar LP failed: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[-2.0, 1.0], [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        (x, vec![1.0, -1.0, 1.0, 1.0, -1.0])
    }

    #[test]
    fn zero_solution_objectives() {
        let (x, y) = paper();
        let p = ConvexTrainingProblem::with_exact_patterns(x.clone(), y.clone(), 0.1, LossKind::Squared).unwrap();
        let z = GroupSolution::for_problem(&p);
        assert!((objective(&p, &z).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(cone_violation(&p, &z).unwrap(), 0.0);
        let h = ConvexTrainingProblem::with_exact_patterns(x, y, 0.1, LossKind::Hinge).unwrap();
        assert_eq!(objective(&h, &GroupSolution::for_problem(&h)).unwrap(), 5.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = paper();
        assert!(ConvexTrainingProblem::with_exact_patterns(x.clone(), y.clone(), -1.0, LossKind::Squared).is_err());
        assert!(ConvexTrainingProblem::with_exact_patterns(x.clone(), vec![0.5; 5], 1.0, LossKind::Hinge).is_err());
        assert!(ConvexTrainingProblem::with_exact_patterns(x, vec![1.0; 4], 1.0, LossKind::Squared).is_err());
    }

    #[test]
    fn region_dual_all_active_is_unconstrained_norm() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        let d = ActivationPattern::new(vec![true; 3]);
        let v = [1.0, 0.5, 0.25];
        let xtv = x.tmatvec(&v);
        let got = solve_region_dual(&x, &d, &v, 1e-10).unwrap();
        assert!((got - norm2(&xtv)).abs() < 1e-12);
        assert_eq!(solve_region_dual(&x, &d, &[0.0; 3], 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn hinge_dual_domain() {
        let y = [1.0, -1.0];
        assert_eq!(LossKind::Hinge.dual_value(&[0.5, -1.0], &y), Some(1.5));
        assert_eq!(LossKind::Hinge.dual_value(&[-0.5, 0.0], &y), None);
        assert_eq!(LossKind::Hinge.clip_dual(&[2.0, 0.3], &y), vec![1.0, 0.0]);
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = paper();
        let p = ConvexTrainingProblem::with_exact_patterns(x, y, 0.1, LossKind::Hinge).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: ConvexTrainingProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(q.pattern_count(), 10);
        assert_eq!(q.loss(), LossKind::Hinge);
    }
}
