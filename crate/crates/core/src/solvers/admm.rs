//! Consensus ADMM for the cone-constrained group lasso.
//!
//! With `θ = (v_1 … v_P, w_1 … w_P)` and `Fθ = Σ_i D_i X (v_i − w_i)` the
//! program is split as
//!
//! ```text
//! min ℓ(r) + β Σ_g ‖q_g‖ + Σ_g 1{A_g c_g ≥ 0}   s.t.  r = Fθ, q = θ, c = θ.
//! ```
//!
//! The θ-step solves `(FᵀF + 2I) θ = rhs` through the Woodbury identity with a
//! cached Cholesky factor of the `n × n` matrix `2I + FFᵀ`; the other blocks
//! are closed-form proxes.
//!
//! Before iterating, the program is attacked directly: an active-set Newton
//! method for squared loss, column generation for hinge loss. When that does
//! not certify, ADMM runs and its iterates periodically reseed the same
//! refinements.

use std::time::Instant;

use super::columns::refine_hinge;
use super::{elapsed_ms, face_basis, group_soft_threshold, ConeProjector, SolverConfig, SolverDiagnostics};
use crate::numerics::vector::{dot, norm2, norm_sq};
use crate::numerics::Cholesky;
use crate::program::{cone_violation, dual_certificate_with, objective, region_dual_argmax, ConvexTrainingProblem, GroupSolution, LossKind};
use crate::{Matrix, Result};

/// The linear map `F` and the factorization used by the θ-step.
struct Operator<'a> {
    x: &'a Matrix,
    p: usize,
    d: usize,
    active: Vec<Vec<usize>>,
    chol: Cholesky<f64>,
}

impl<'a> Operator<'a> {
    fn new(problem: &'a ConvexTrainingProblem) -> Result<Self> {
        let x = problem.x();
        let n = x.rows();
        let active: Vec<Vec<usize>> = problem
            .patterns()
            .patterns()
            .iter()
            .map(|p| (0..n).filter(|&j| p.is_active(j)).collect())
            .collect();
        // FFᵀ = 2 Σ_i D_i X Xᵀ D_i
        let mut count = Matrix::zeros(n, n);
        for act in &active {
            for &j in act {
                for &l in act {
                    count[(j, l)] += 1.0;
                }
            }
        }
        let m = Matrix::from_fn(n, n, |j, l| {
            let k = if count[(j, l)] > 0.0 { 2.0 * count[(j, l)] * dot(x.row(j), x.row(l)) } else { 0.0 };
            k + if j == l { 2.0 } else { 0.0 }
        });
        Ok(Operator {
            x,
            p: active.len(),
            d: x.cols(),
            chol: Cholesky::factor(&m)?,
            active,
        })
    }

    fn apply(&self, theta: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.x.rows()];
        for (i, act) in self.active.iter().enumerate() {
            let (v, w) = (&theta[i], &theta[i + self.p]);
            if v.iter().chain(w).all(|&t| t == 0.0) {
                continue;
            }
            let diff: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - b).collect();
            for &j in act {
                out[j] += dot(self.x.row(j), &diff);
            }
        }
        out
    }

    fn adjoint(&self, r: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.d]; 2 * self.p];
        for (i, act) in self.active.iter().enumerate() {
            let mut g = vec![0.0; self.d];
            for &j in act {
                if r[j] != 0.0 {
                    for (o, &xv) in g.iter_mut().zip(self.x.row(j)) {
                        *o += xv * r[j];
                    }
                }
            }
            out[i + self.p] = g.iter().map(|t| -t).collect();
            out[i] = g;
        }
        out
    }

    /// `(FᵀF + 2I)⁻¹ b = ½ (b − Fᵀ (2I + FFᵀ)⁻¹ F b)`.
    fn solve_normal(&self, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let fb = self.apply(b);
        let s = self.chol.solve(&fb);
        let corr = self.adjoint(&s);
        b.iter()
            .zip(&corr)
            .map(|(bg, cg)| bg.iter().zip(cg).map(|(x, y)| 0.5 * (x - y)).collect())
            .collect()
    }
}

fn prox_loss(loss: LossKind, a: &[f64], y: &[f64], rho: f64) -> Vec<f64> {
    match loss {
        LossKind::Squared => a.iter().zip(y).map(|(&ai, &yi)| (yi + rho * ai) / (1.0 + rho)).collect(),
        LossKind::Hinge => a
            .iter()
            .zip(y)
            .map(|(&ai, &yi)| {
                let t = yi * ai;
                let s = if t >= 1.0 {
                    t
                } else if t <= 1.0 - 1.0 / rho {
                    t + 1.0 / rho
                } else {
                    1.0
                };
                yi * s
            })
            .collect(),
    }
}

struct Candidate {
    sol: GroupSolution,
    gap: f64,
    primal: f64,
    dual: Vec<f64>,
    polished: bool,
}

fn to_solution(theta: &[Vec<f64>], p: usize) -> GroupSolution {
    GroupSolution {
        v: theta[..p].to_vec(),
        w: theta[p..].to_vec(),
    }
}

fn certify(problem: &ConvexTrainingProblem, sol: GroupSolution, v: Option<&[f64]>, seed: u64, polished: bool) -> Result<Candidate> {
    let cert = dual_certificate_with(problem, &sol, v, 0, seed)?;
    Ok(Candidate {
        gap: cert.certified_gap,
        primal: cert.primal_value,
        dual: cert.v_hat,
        sol,
        polished,
    })
}

pub fn solve_group_cone(
    problem: &ConvexTrainingProblem,
    cfg: &SolverConfig,
) -> Result<(GroupSolution, SolverDiagnostics)> {
    cfg.validate()?;
    let start = Instant::now();
    let p = problem.pattern_count();
    let d = problem.d();
    let n = problem.n();
    let y = problem.y();
    let beta = problem.beta();
    let loss = problem.loss();
    let ng = 2 * p;
    let mut diag = SolverDiagnostics {
        rho: cfg.rho,
        ..SolverDiagnostics::default()
    };
    let done = |c: &Candidate| c.gap <= cfg.gap_tol * (1.0 + c.primal.abs());
    let viol_scale = 1.0 + problem.x().max_abs();

    // the zero solution is optimal when y (or the hinge subgradient) is dual feasible
    let zero = certify(problem, GroupSolution::for_problem(problem), None, cfg.seed, false)?;
    if done(&zero) {
        diag.converged = true;
        diag.certified_gap = Some(zero.gap);
        diag.objective_trace = vec![zero.primal];
        diag.dual_vector = Some(zero.dual);
        diag.wall_ms = elapsed_ms(start);
        return Ok((zero.sol, diag));
    }
    let feasible = |c: &Candidate| -> Result<bool> {
        Ok(cone_violation(problem, &c.sol)? <= cfg.tol_abs * viol_scale * (1.0 + c.sol.max_group_norm()))
    };
    let mut best = zero;
    let projectors: Vec<ConeProjector> = (0..p).map(|i| ConeProjector::new(problem.cone(i))).collect();
    // the active-set methods started from zero usually settle the program
    // before any ADMM iteration
    if cfg.polish {
        let origin = GroupSolution::for_problem(problem);
        let found = match loss {
            LossKind::Squared => match polish(problem, &origin, &projectors, 500)? {
                Some(s) => vec![certify(problem, s, None, cfg.seed, true)?],
                None => Vec::new(),
            },
            LossKind::Hinge => {
                let mut out = Vec::new();
                for (s, v) in refine_hinge(problem, &origin, 200)? {
                    out.push(certify(problem, s, Some(&v), cfg.seed, true)?);
                }
                out
            }
        };
        for cand in found {
            if cand.gap < best.gap {
                best = cand;
            }
        }
        if done(&best) && feasible(&best)? {
            diag.converged = true;
            diag.certified_gap = Some(best.gap);
            diag.polished = true;
            diag.objective_trace = vec![best.primal];
            diag.dual_vector = Some(best.dual);
            diag.wall_ms = elapsed_ms(start);
            return Ok((best.sol, diag));
        }
    }

    let op = Operator::new(problem)?;
    let big_n = (ng * d) as f64;

    let zeros_g = || vec![vec![0.0; d]; ng];
    let mut q = zeros_g();
    let mut c = zeros_g();
    let mut lq = zeros_g();
    let mut lc = zeros_g();
    let mut r = vec![0.0; n];
    let mut lr = vec![0.0; n];
    let mut rho = cfg.rho;
    let mut last_support: Option<Vec<bool>> = None;
    let mut refined: Option<(Vec<bool>, usize)> = None;

    for it in 1..=cfg.max_iter {
        // θ-step
        let rr: Vec<f64> = r.iter().zip(&lr).map(|(a, b)| a - b).collect();
        let mut b = op.adjoint(&rr);
        for g in 0..ng {
            for k in 0..d {
                b[g][k] += q[g][k] - lq[g][k] + c[g][k] - lc[g][k];
            }
        }
        let theta = op.solve_normal(&b);
        let ft = op.apply(&theta);

        // block proxes
        let a: Vec<f64> = ft.iter().zip(&lr).map(|(x, l)| x + l).collect();
        let r_new = prox_loss(loss, &a, y, rho);
        let mut q_new = Vec::with_capacity(ng);
        let mut c_new = Vec::with_capacity(ng);
        for g in 0..ng {
            let tq: Vec<f64> = theta[g].iter().zip(&lq[g]).map(|(t, l)| t + l).collect();
            q_new.push(group_soft_threshold(&tq, beta / rho));
            let tc: Vec<f64> = theta[g].iter().zip(&lc[g]).map(|(t, l)| t + l).collect();
            c_new.push(projectors[g % p].project(&tc)?);
        }

        // scaled dual updates and residuals
        let mut prim2 = 0.0;
        for j in 0..n {
            let e = ft[j] - r_new[j];
            lr[j] += e;
            prim2 += e * e;
        }
        let mut dq = vec![vec![0.0; d]; ng];
        for g in 0..ng {
            for k in 0..d {
                let eq = theta[g][k] - q_new[g][k];
                let ec = theta[g][k] - c_new[g][k];
                lq[g][k] += eq;
                lc[g][k] += ec;
                prim2 += eq * eq + ec * ec;
                dq[g][k] = (q_new[g][k] - q[g][k]) + (c_new[g][k] - c[g][k]);
            }
        }
        let dr: Vec<f64> = r_new.iter().zip(&r).map(|(a, b)| a - b).collect();
        let fdr = op.adjoint(&dr);
        let dual_res = rho * fdr.iter().flatten().zip(dq.iter().flatten()).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
        let prim_res = prim2.sqrt();
        r = r_new;
        q = q_new;
        c = c_new;

        let theta_norm2 = norm_sq(&ft) + 2.0 * theta.iter().map(|t| norm_sq(t)).sum::<f64>();
        let z_norm2 = norm_sq(&r) + q.iter().chain(&c).map(|t| norm_sq(t)).sum::<f64>();
        let eps_pri = ((n as f64) + 2.0 * big_n).sqrt() * cfg.tol_abs + cfg.tol_rel * theta_norm2.max(z_norm2).sqrt();
        let ftl = op.adjoint(&lr);
        let lam_norm = ftl
            .iter()
            .zip(&lq)
            .zip(&lc)
            .map(|((a, b), c)| a.iter().zip(b).zip(c).map(|((x, y), z)| (x + y + z).powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let eps_dual = big_n.sqrt() * cfg.tol_abs + cfg.tol_rel * rho * lam_norm;
        let residual_ok = prim_res <= eps_pri && dual_res <= eps_dual;

        let fq = op.apply(&q);
        diag.objective_trace
            .push(loss.value(&fq, y) + beta * q.iter().map(|g| norm2(g)).sum::<f64>());
        diag.iterations = it;
        diag.primal_residual = prim_res;
        diag.dual_residual = dual_res;

        if it % cfg.check_every == 0 || residual_ok || it == cfg.max_iter {
            let support: Vec<bool> = q.iter().map(|g| g.iter().any(|&t| t != 0.0)).collect();
            let mut theta_c = Vec::with_capacity(ng);
            for (g, qg) in q.iter().enumerate() {
                theta_c.push(projectors[g % p].project(qg)?);
            }
            let sol = to_solution(&theta_c, p);
            let v_dual: Option<Vec<f64>> = match loss {
                LossKind::Squared => None,
                LossKind::Hinge => Some(lr.iter().map(|l| -rho * l).collect()),
            };
            let cand = certify(problem, sol, v_dual.as_deref(), cfg.seed, false)?;
            let stable = last_support.as_ref() == Some(&support);
            let polished = if cfg.polish && (stable || residual_ok) {
                match loss {
                    LossKind::Squared => match polish(problem, &cand.sol, &projectors, 50)? {
                        Some(s) => vec![certify(problem, s, None, cfg.seed, true)?],
                        None => Vec::new(),
                    },
                    LossKind::Hinge => {
                        // the refinement does not depend on the ADMM accuracy, so an
                        // unchanged support is retried only after the iterations double
                        if refined.as_ref().is_some_and(|(sup, at)| sup == &support && it < 2 * at) {
                            Vec::new()
                        } else {
                            refined = Some((support.clone(), it));
                            let mut out = Vec::new();
                            for (s, v) in refine_hinge(problem, &cand.sol, 200)? {
                                out.push(certify(problem, s, Some(&v), cfg.seed, true)?);
                            }
                            out
                        }
                    }
                }
            } else {
                Vec::new()
            };
            for cnd in std::iter::once(cand).chain(polished) {
                if cnd.gap < best.gap {
                    best = cnd;
                }
            }
            last_support = Some(support);
            if done(&best) && feasible(&best)? {
                diag.converged = true;
                break;
            }
        }

        if cfg.adapt_rho {
            let factor = if prim_res > 10.0 * dual_res {
                2.0
            } else if dual_res > 10.0 * prim_res {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                for l in lr.iter_mut() {
                    *l /= factor;
                }
                for l in lq.iter_mut().chain(lc.iter_mut()).flatten() {
                    *l /= factor;
                }
            }
        }
    }

    diag.rho = rho;
    diag.certified_gap = Some(best.gap);
    diag.polished = best.polished;
    diag.dual_vector = Some(best.dual);
    diag.wall_ms = elapsed_ms(start);
    Ok((best.sol, diag))
}

/// One support group of the refinement: its index in `θ`, an orthonormal
/// basis of the face it lies on, the design `±D_i X B` and the inactive cone
/// rows `A_i B` that must stay nonnegative.
struct FaceGroup {
    index: usize,
    basis: Matrix,
    design: Matrix,
    guard: Matrix,
}

enum NewtonOutcome {
    Done(Vec<Vec<f64>>),
    /// Group `k` shrank to zero.
    Collapsed(usize, Vec<Vec<f64>>),
    /// A step was cut short by an inactive cone constraint.
    Blocked(Vec<Vec<f64>>),
    /// The Hessian could not be factored even with heavy damping.
    Failed,
}

/// Newton refinement for squared loss: fixes the support and the active cone
/// constraints of `sol` and minimizes the resulting smooth problem, shrinking
/// the face whenever a step reaches another constraint and dropping groups
/// that collapse. Returns `None` when the refined point is not better.
/// Active-set refinement for squared loss: Newton on the current support,
/// then every group whose region dual exceeds `β` at the residual moves
/// along its maximizing direction by the best step for that direction alone,
/// which descends even for groups already in use since
/// `‖w + t u‖ ≤ ‖w‖ + t`. Stops when no group violates or after `max_outer`
/// rounds.
fn polish(
    problem: &ConvexTrainingProblem,
    sol: &GroupSolution,
    projectors: &[ConeProjector],
    max_outer: usize,
) -> Result<Option<GroupSolution>> {
    let p = problem.pattern_count();
    let x = problem.x();
    let y = problem.y();
    let beta = problem.beta();
    let per_round = problem.n().max(10);
    let mut current = sol.clone();
    let mut improved = false;
    for _ in 0..max_outer {
        if let Some(s) = polish_support(problem, &current, projectors)? {
            current = s;
            improved = true;
        }
        let fit = problem.fitted(&current)?;
        let res: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let neg: Vec<f64> = res.iter().map(|t| -t).collect();
        // unused groups enter first; groups in use, which sit at the bound up
        // to the Newton accuracy, are revisited only when none does
        let mut found: Vec<(f64, usize, Vec<f64>)> = Vec::new();
        for revisit in [false, true] {
            for i in 0..p {
                let pat = &problem.patterns().patterns()[i];
                for (g, r) in [(i, &res), (i + p, &neg)] {
                    let group = if g < p { &current.v[i] } else { &current.w[i] };
                    if group.iter().any(|&t| t != 0.0) != revisit {
                        continue;
                    }
                    let slack = if revisit { 1e-7 } else { 1e-9 };
                    let (val, u) = region_dual_argmax(x, problem.cone(i), pat, r, 1e-10)?;
                    if let Some(u) = u {
                        if val > beta * (1.0 + slack) {
                            found.push((val, g, u));
                        }
                    }
                }
            }
            if !found.is_empty() {
                break;
            }
        }
        if found.is_empty() {
            break;
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        let enter = |sol: &mut GroupSolution, (val, g, u): &(f64, usize, Vec<f64>)| {
            let i = g % p;
            let a = problem.patterns().patterns()[i].apply(&x.matvec(u));
            let an = norm_sq(&a);
            if an > 0.0 {
                let t = (val - beta) / an;
                let slot = if *g < p { &mut sol.v[i] } else { &mut sol.w[i] };
                for (o, c) in slot.iter_mut().zip(u) {
                    *o += t * c;
                }
            }
        };
        // entering groups interact, so a batch that overshoots is replaced by
        // the single most violated group, which always descends
        let before = objective(problem, &current)?;
        let mut batch = current.clone();
        for f in found.iter().take(per_round) {
            enter(&mut batch, f);
        }
        if objective(problem, &batch)? < before {
            current = batch;
        } else {
            enter(&mut current, &found[0]);
        }
        improved = true;
    }
    Ok(improved.then_some(current))
}

fn polish_support(problem: &ConvexTrainingProblem, sol: &GroupSolution, projectors: &[ConeProjector]) -> Result<Option<GroupSolution>> {
    let p = problem.pattern_count();
    let x = problem.x();
    let mut theta: Vec<Vec<f64>> = sol.v.iter().chain(&sol.w).cloned().collect();
    let mut support: Vec<usize> = (0..theta.len()).filter(|&g| norm2(&theta[g]) > 0.0).collect();
    if support.is_empty() {
        return Ok(None);
    }
    let row_norms = x.row_norms();
    let rounds = 4 * support.len() * (x.cols() + 1) + 16;
    for _ in 0..rounds {
        let mut groups = Vec::with_capacity(support.len());
        for &g in &support {
            let i = g % p;
            let sign = if g < p { 1.0 } else { -1.0 };
            let a = projectors[i].matrix();
            let tn = norm2(&theta[g]);
            let z = a.matvec(&theta[g]);
            let is_act = |j: usize| z[j].abs() <= 1e-7 * row_norms[j] * tn;
            let act: Vec<usize> = (0..z.len()).filter(|&j| row_norms[j] > 0.0 && is_act(j)).collect();
            let inact: Vec<usize> = (0..z.len()).filter(|&j| row_norms[j] > 0.0 && !is_act(j)).collect();
            let basis = face_basis(a, &act, x.cols())?;
            if basis.cols() == 0 {
                continue;
            }
            let pat = &problem.patterns().patterns()[i];
            let design = Matrix::from_fn(x.rows(), basis.cols(), |j, k| {
                if pat.is_active(j) {
                    sign * (0..x.cols()).map(|l| x[(j, l)] * basis[(l, k)]).sum::<f64>()
                } else {
                    0.0
                }
            });
            let guard = Matrix::from_fn(inact.len(), basis.cols(), |r, k| {
                (0..x.cols()).map(|l| a[(inact[r], l)] * basis[(l, k)]).sum::<f64>()
            });
            groups.push(FaceGroup { index: g, basis, design, guard });
        }
        if groups.is_empty() {
            return Ok(None);
        }
        let xi0: Vec<Vec<f64>> = groups.iter().map(|fg| fg.basis.tmatvec(&theta[fg.index])).collect();
        let (xi, finished) = match newton(&groups, problem.y(), problem.beta(), xi0)? {
            NewtonOutcome::Done(xi) => (xi, true),
            NewtonOutcome::Blocked(xi) => (xi, false),
            NewtonOutcome::Collapsed(k, xi) => {
                support.retain(|&s| s != groups[k].index);
                (xi, false)
            }
            NewtonOutcome::Failed => return Ok(None),
        };
        for g in theta.iter_mut() {
            g.iter_mut().for_each(|t| *t = 0.0);
        }
        for (fg, xg) in groups.iter().zip(&xi) {
            if support.contains(&fg.index) {
                theta[fg.index] = fg.basis.matvec(xg);
            }
        }
        if finished || support.is_empty() {
            break;
        }
    }
    let mut out = Vec::with_capacity(theta.len());
    for (g, t) in theta.iter().enumerate() {
        out.push(projectors[g % p].project(t)?);
    }
    let refined = to_solution(&out, p);
    let before = objective(problem, sol)?;
    let after = objective(problem, &refined)?;
    if after > before + 1e-12 * (1.0 + before.abs()) {
        return Ok(None);
    }
    Ok(Some(refined))
}

fn newton(groups: &[FaceGroup], y: &[f64], beta: f64, mut xi: Vec<Vec<f64>>) -> Result<NewtonOutcome> {
    let dims: Vec<usize> = groups.iter().map(|g| g.basis.cols()).collect();
    let offs: Vec<usize> = dims
        .iter()
        .scan(0, |s, &k| {
            let o = *s;
            *s += k;
            Some(o)
        })
        .collect();
    let total: usize = dims.iter().sum();
    let n = y.len();
    // stacked design [G_1 … G_m]
    let g_all = Matrix::from_fn(n, total, |j, c| {
        let k = offs.iter().rposition(|&o| o <= c).unwrap();
        groups[k].design[(j, c - offs[k])]
    });
    let gram = g_all.gram();
    let value = |xi: &[Vec<f64>]| {
        let flat: Vec<f64> = xi.iter().flatten().copied().collect();
        let pred = g_all.matvec(&flat);
        0.5 * pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + beta * xi.iter().map(|g| norm2(g)).sum::<f64>()
    };
    let scale = 1.0 + norm2(y) * g_all.max_abs();
    if let Some(k) = xi.iter().position(|g| norm2(g) == 0.0) {
        return Ok(NewtonOutcome::Collapsed(k, xi));
    }
    let mut f = value(&xi);
    for _ in 0..100 {
        let flat: Vec<f64> = xi.iter().flatten().copied().collect();
        let pred = g_all.matvec(&flat);
        let res: Vec<f64> = pred.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut grad = g_all.tmatvec(&res);
        let mut h = gram.clone();
        for (k, xg) in xi.iter().enumerate() {
            let nx = norm2(xg);
            let o = offs[k];
            for a in 0..dims[k] {
                grad[o + a] += beta * xg[a] / nx;
                for b in 0..dims[k] {
                    let id = if a == b { 1.0 } else { 0.0 };
                    h[(o + a, o + b)] += beta / nx * (id - xg[a] * xg[b] / (nx * nx));
                }
            }
        }
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gmax <= 1e-14 * scale {
            break;
        }
        let diag_max = (0..total).map(|k| h[(k, k)]).fold(0.0, f64::max);
        let mut mu = 1e-14 * diag_max.max(1e-300);
        let step = loop {
            let hm = Matrix::from_fn(total, total, |a, b| h[(a, b)] + if a == b { mu } else { 0.0 });
            match Cholesky::factor(&hm) {
                Ok(ch) => break ch.solve(&grad),
                Err(_) if mu < diag_max => mu *= 100.0,
                Err(_) => return Ok(NewtonOutcome::Failed),
            }
        };
        // longest step keeping every inactive constraint nonnegative
        let mut t_max = f64::INFINITY;
        for (k, fg) in groups.iter().enumerate() {
            let s_k = &step[offs[k]..offs[k] + dims[k]];
            let now = fg.guard.matvec(&xi[k]);
            let rate = fg.guard.matvec(s_k);
            for (&z, &r) in now.iter().zip(&rate) {
                if r > 0.0 {
                    t_max = t_max.min(z.max(0.0) / r);
                }
            }
        }
        let slope = -dot(&grad, &step);
        let mut t = t_max.min(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<Vec<f64>> = xi
                .iter()
                .enumerate()
                .map(|(k, xg)| xg.iter().enumerate().map(|(a, &v)| v - t * step[offs[k] + a]).collect())
                .collect();
            let ft = value(&trial);
            if ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        let improvement = f - ft;
        xi = trial;
        f = ft;
        let maxn = xi.iter().map(|g| norm2(g)).fold(0.0, f64::max);
        if let Some(k) = xi.iter().position(|g| norm2(g) <= 1e-9 * maxn) {
            return Ok(NewtonOutcome::Collapsed(k, xi));
        }
        if t == t_max {
            return Ok(NewtonOutcome::Blocked(xi));
        }
        if improvement <= 1e-17 * (1.0 + f.abs()) && gmax <= 1e-9 * scale {
            break;
        }
    }
    Ok(NewtonOutcome::Done(xi))
}
