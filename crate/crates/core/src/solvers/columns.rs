//! Column generation for the hinge-loss program.
//!
//! Writing every group as a nonnegative combination of unit directions in
//! its cone turns the hinge program into the semi-infinite LP
//!
//! ```text
//! min Σ_j ξ_j + β Σ_k c_k   s.t.  ξ_j + y_j Σ_k c_k a_jk ≥ 1,  ξ, c ≥ 0
//! ```
//!
//! over columns `a_k = ±D_i X u_k`. Its dual is
//! `max Σ_j s_j` over `s ∈ [0, 1]ⁿ` with `(y∘s)ᵀ a_k ≤ β`, and the most violated
//! dual constraint of each region is exactly the region dual's maximizer. The
//! exchange loop adds those maximizers until no region violates the bound.
//! The simplex vertex is only accurate to the LP tolerance, so its support is
//! then handed to Newton's method on the KKT system of the groups in use.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use super::face_basis;
use crate::numerics::lstsq;
use crate::numerics::vector::{dist, dot, norm2};
use crate::program::{region_dual_argmax, ConvexTrainingProblem, GroupSolution};
use crate::{Matrix, Result};

struct Column {
    group: usize,
    u: Vec<f64>,
    /// `±D_i X u`.
    a: Vec<f64>,
}

fn column(problem: &ConvexTrainingProblem, group: usize, u: Vec<f64>) -> Column {
    let p = problem.pattern_count();
    let sign = if group < p { 1.0 } else { -1.0 };
    let pat = &problem.patterns().patterns()[group % p];
    let a = problem
        .x()
        .matvec(&u)
        .iter()
        .enumerate()
        .map(|(j, &t)| if pat.is_active(j) { sign * t } else { 0.0 })
        .collect();
    Column { group, u, a }
}

fn constraint(y: &[f64], vars: &[Variable], a: &[f64]) -> Vec<(Variable, f64)> {
    a.iter()
        .zip(y)
        .zip(vars)
        .filter(|((&aj, _), _)| aj != 0.0)
        .map(|((&aj, &yj), &v)| (v, yj * aj))
        .collect()
}

fn solve_dual(y: &[f64], beta: f64, cols: &[Column]) -> Option<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let s: Vec<Variable> = y.iter().map(|_| lp.add_var(1.0, (0.0, 1.0))).collect();
    for c in cols {
        let expr = constraint(y, &s, &c.a);
        if !expr.is_empty() {
            lp.add_constraint(expr, ComparisonOp::Le, beta);
        }
    }
    let outcome = lp.solve().ok()?;
    let sol = outcome.solution()?;
    Some(s.iter().map(|&v| sol.var_value(v).clamp(0.0, 1.0)).collect())
}

fn solve_primal(y: &[f64], beta: f64, cols: &[Column]) -> Option<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let xi: Vec<Variable> = y.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let c: Vec<Variable> = cols.iter().map(|_| lp.add_var(beta, (0.0, f64::INFINITY))).collect();
    for (j, &yj) in y.iter().enumerate() {
        let mut expr = vec![(xi[j], 1.0)];
        for (col, &var) in cols.iter().zip(&c) {
            if col.a[j] != 0.0 {
                expr.push((var, yj * col.a[j]));
            }
        }
        lp.add_constraint(expr, ComparisonOp::Ge, 1.0);
    }
    let outcome = lp.solve().ok()?;
    let sol = outcome.solution()?;
    Some(c.iter().map(|&v| sol.var_value(v).max(0.0)).collect())
}

/// Newton's method on the KKT system of the groups in use, which the LP can
/// only reach through ever finer direction sets. With `F` the rows whose
/// dual lies strictly inside `(0, 1)` and `U` those at one, the unknowns are
/// the active groups and `s_F`. A group touching cone facets is confined to
/// that face, `w_g = B_g ξ_g` with `B_g` orthonormal, so the equations are
/// unit margins on `F` and `β ξ_g / ‖ξ_g‖ = (D_g X B_g)ᵀ (y∘s)`. Starts from
/// the LP solution and returns `None` unless the system is solved to rounding
/// level with the groups inside their cones.
fn newton_kkt(problem: &ConvexTrainingProblem, sol: &GroupSolution, s: &[f64]) -> Option<(GroupSolution, Vec<f64>)> {
    let p = problem.pattern_count();
    let (n, d) = (problem.n(), problem.d());
    let x = problem.x();
    let y = problem.y();
    let beta = problem.beta();
    let groups: Vec<&Vec<f64>> = sol.v.iter().chain(&sol.w).collect();
    let active: Vec<usize> = (0..2 * p).filter(|&g| norm2(groups[g]) > 0.0).collect();
    let largest = active.iter().map(|&g| norm2(groups[g])).fold(0.0, f64::max);
    let free: Vec<usize> = (0..n).filter(|&j| s[j] > 1e-7 && s[j] < 1.0 - 1e-7).collect();
    if active.is_empty() || free.is_empty() || beta == 0.0 {
        return None;
    }
    // face bases and the designs D_g X B_g with the group sign folded in
    let mut bases = Vec::with_capacity(active.len());
    let mut designs = Vec::with_capacity(active.len());
    let mut xi: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for &g in &active {
        let cone = problem.cone(g % p);
        let wg = groups[g];
        let nw = norm2(wg);
        let z = cone.matvec(wg);
        let act: Vec<usize> = (0..cone.rows())
            .filter(|&r| z[r].abs() <= 1e-9 * norm2(cone.row(r)) * nw)
            .collect();
        let b = face_basis(cone, &act, d).ok()?;
        if b.cols() == 0 {
            return None;
        }
        let pat = &problem.patterns().patterns()[g % p];
        let sign = if g < p { 1.0 } else { -1.0 };
        let xb = x.matmul(&b).ok()?;
        let design = Matrix::from_fn(n, b.cols(), |j, k| if pat.is_active(j) { sign * xb[(j, k)] } else { 0.0 });
        xi.push(b.transpose().matvec(wg));
        bases.push(b);
        designs.push(design);
    }
    let (na, nf) = (active.len(), free.len());
    let offsets: Vec<usize> = designs
        .iter()
        .scan(0, |acc, g| {
            let o = *acc;
            *acc += g.cols();
            Some(o)
        })
        .collect();
    let nx = offsets[na - 1] + designs[na - 1].cols();
    let size = nx + nf;
    let mut sv: Vec<f64> = s.iter().map(|&t| if t >= 1.0 - 1e-7 { 1.0 } else { 0.0 }).collect();
    for &j in &free {
        sv[j] = s[j];
    }
    let residual = |xi: &[Vec<f64>], sv: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(size);
        for &j in &free {
            let f: f64 = designs.iter().zip(xi).map(|(g, t)| dot(g.row(j), t)).sum();
            r.push(y[j] * f - 1.0);
        }
        let v: Vec<f64> = sv.iter().zip(y).map(|(a, b)| a * b).collect();
        for (g, t) in designs.iter().zip(xi) {
            let nt = norm2(t);
            let gv = g.transpose().matvec(&v);
            r.extend(t.iter().zip(&gv).map(|(a, b)| beta * a / nt - b));
        }
        r
    };
    let mut r = residual(&xi, &sv);
    for _ in 0..60 {
        if norm2(&r) <= 1e-14 * (1.0 + beta) {
            break;
        }
        let mut jac = Matrix::zeros(size, size);
        for (row, &j) in free.iter().enumerate() {
            for (a, g) in designs.iter().enumerate() {
                for k in 0..g.cols() {
                    jac[(row, offsets[a] + k)] = y[j] * g[(j, k)];
                }
            }
        }
        for (a, g) in designs.iter().enumerate() {
            let t = &xi[a];
            let nt = norm2(t);
            for k in 0..g.cols() {
                let row = nf + offsets[a] + k;
                for l in 0..g.cols() {
                    let id = if k == l { 1.0 } else { 0.0 };
                    jac[(row, offsets[a] + l)] = beta * (id - t[k] * t[l] / (nt * nt)) / nt;
                }
                for (c, &j) in free.iter().enumerate() {
                    jac[(row, nx + c)] = -g[(j, k)] * y[j];
                }
            }
        }
        let neg: Vec<f64> = r.iter().map(|t| -t).collect();
        let step = lstsq(&jac, &neg).ok()?;
        // the Jacobian is singular when groups share a direction, so full
        // steps are only taken when they reduce the residual
        let rn = norm2(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut xi_t = xi.clone();
            for (a, x) in xi_t.iter_mut().enumerate() {
                for (k, xk) in x.iter_mut().enumerate() {
                    *xk += t * step[offsets[a] + k];
                }
            }
            let mut sv_t = sv.clone();
            for (c, &j) in free.iter().enumerate() {
                sv_t[j] += t * step[nx + c];
            }
            if xi_t.iter().all(|x| norm2(x) > 0.0) {
                let r_t = residual(&xi_t, &sv_t);
                if norm2(&r_t) < rn {
                    (xi, sv, r) = (xi_t, sv_t, r_t);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(norm2(&r) <= 1e-11 * (1.0 + beta)) || free.iter().any(|&j| !(0.0..=1.0).contains(&sv[j])) {
        // a group the LP kept at noise level has no stationarity equation
        // at zero, so retry without the groups that collapsed, or failing
        // that without the smallest one
        let mut collapsed: Vec<usize> = (0..na).filter(|&a| norm2(&xi[a]) <= 1e-6 * largest).map(|a| active[a]).collect();
        if collapsed.is_empty() {
            let (a, small) = (0..na)
                .map(|a| (a, norm2(&xi[a])))
                .min_by(|l, r| l.1.total_cmp(&r.1))
                .expect("active groups");
            if small <= 1e-2 * largest {
                collapsed.push(active[a]);
            }
        }
        if collapsed.is_empty() || collapsed.len() == na {
            return None;
        }
        let mut reduced = sol.clone();
        for g in collapsed {
            let slot = if g < p { &mut reduced.v[g] } else { &mut reduced.w[g - p] };
            slot.iter_mut().for_each(|t| *t = 0.0);
        }
        return newton_kkt(problem, &reduced, s);
    }
    let mut out = GroupSolution::zeros(p, d);
    for ((&g, b), t) in active.iter().zip(&bases).zip(&xi) {
        let cone = problem.cone(g % p);
        let wg = b.matvec(t);
        let nw = norm2(&wg);
        // rows of the face come back at rounding level rather than exactly zero
        let z = cone.matvec(&wg);
        if (0..cone.rows()).any(|r| z[r] < -1e-12 * norm2(cone.row(r)) * nw) {
            return None;
        }
        if g < p {
            out.v[g] = wg;
        } else {
            out.w[g - p] = wg;
        }
    }
    let v = sv.iter().zip(y).map(|(a, b)| a * b).collect();
    Some((out, v))
}

fn assemble(problem: &ConvexTrainingProblem, cols: &[Column], c: &[f64], s: &[f64]) -> (GroupSolution, Vec<f64>) {
    let p = problem.pattern_count();
    let mut groups = vec![vec![0.0; problem.d()]; 2 * p];
    for (col, &ck) in cols.iter().zip(c) {
        if ck > 0.0 {
            for (o, &t) in groups[col.group].iter_mut().zip(&col.u) {
                *o += ck * t;
            }
        }
    }
    let w = groups.split_off(p);
    let v = s.iter().zip(problem.y()).map(|(a, b)| a * b).collect();
    (GroupSolution { v: groups, w }, v)
}

/// Refines a hinge-loss solution by column generation seeded with its
/// normalized groups, followed by the KKT Newton polish. Returns the assembled
/// solutions with their dual candidates `y∘s`, the simplex vertex first and
/// its polished version second when that exists. Empty if an LP fails.
pub(crate) fn refine_hinge(
    problem: &ConvexTrainingProblem,
    seed: &GroupSolution,
    max_rounds: usize,
) -> Result<Vec<(GroupSolution, Vec<f64>)>> {
    let p = problem.pattern_count();
    let n = problem.n();
    let y = problem.y();
    let beta = problem.beta();
    let mut cols: Vec<Column> = Vec::new();
    for (g, t) in seed.v.iter().chain(&seed.w).enumerate() {
        let nt = norm2(t);
        if nt > 0.0 {
            cols.push(column(problem, g, t.iter().map(|x| x / nt).collect()));
        }
    }
    let per_round = (2 * n).max(20);
    let mut s = match solve_dual(y, beta, &cols) {
        Some(s) => s,
        None => return Ok(Vec::new()),
    };
    for _ in 0..max_rounds {
        let v: Vec<f64> = s.iter().zip(y).map(|(a, b)| a * b).collect();
        let neg: Vec<f64> = v.iter().map(|t| -t).collect();
        let mut found: Vec<(f64, usize, Vec<f64>)> = Vec::new();
        for i in 0..p {
            let pat = &problem.patterns().patterns()[i];
            for (g, vv) in [(i, &v), (i + p, &neg)] {
                let (val, u) = region_dual_argmax(problem.x(), problem.cone(i), pat, vv, 1e-8)?;
                if let Some(u) = u {
                    if val > beta * (1.0 + 1e-10) && !cols.iter().any(|c| c.group == g && dist(&c.u, &u) < 1e-12) {
                        found.push((val, g, u));
                    }
                }
            }
        }
        if found.is_empty() {
            break;
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, g, u) in found.into_iter().take(per_round) {
            cols.push(column(problem, g, u));
        }
        s = match solve_dual(y, beta, &cols) {
            Some(s) => s,
            None => return Ok(Vec::new()),
        };
    }
    let v: Vec<f64> = s.iter().zip(y).map(|(a, b)| a * b).collect();
    // complementary slackness puts the primal weight on dual-tight columns
    let tight: Vec<Column> = cols
        .into_iter()
        .filter(|c| dot(&v, &c.a) >= beta * (1.0 - 1e-7))
        .collect();
    let cols = tight;
    let c = match solve_primal(y, beta, &cols) {
        Some(c) => c,
        None => return Ok(Vec::new()),
    };
    let vertex = assemble(problem, &cols, &c, &s);
    let polished = newton_kkt(problem, &vertex.0, &s);
    Ok(std::iter::once(vertex).chain(polished).collect())
}
