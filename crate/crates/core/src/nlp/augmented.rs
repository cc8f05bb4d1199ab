//! Powell-Hestenes-Rockafellar augmented Lagrangian with a dense BFGS inner
//! solve and a final Newton projection onto the active constraints.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{solve_dense, DenseMatrix};
use crate::math::{abs, dot, inf_norm, sqrt};

/// `min f(x)` subject to `c(x) = 0`, `g(x) ≤ 0`.
pub trait ConstrainedProblem {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    /// Returns `f(x)` and fills the constraint values.
    fn evaluate(&self, x: &[f64], c: &mut Vec<f64>, g: &mut Vec<f64>) -> f64;
    /// Writes `∇(wf·f + wcᵀc + wgᵀg)` into `grad`.
    fn vjp(&self, x: &[f64], wf: f64, wc: &[f64], wg: &[f64], grad: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct AlSettings {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Constraint violation target.
    pub feas_tol: f64,
    /// Stationarity target for the Lagrangian gradient (max norm).
    pub opt_tol: f64,
}

impl Default for AlSettings {
    fn default() -> Self {
        AlSettings {
            initial_penalty: 1.0,
            penalty_growth: 10.0,
            max_penalty: 1e10,
            max_outer: 30,
            max_inner: 3000,
            feas_tol: 1e-6,
            opt_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AlResult {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub objective: f64,
    /// Max of `|c|` and `max(g, 0)` at `x`.
    pub violation: f64,
    /// `‖∇f + Jcᵀλ + Jgᵀμ‖∞` at `x`.
    pub stationarity: f64,
    pub penalty: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// Merit value after every accepted inner step, tagged with its outer pass.
    pub merit_trace: Vec<(usize, f64)>,
}

impl AlResult {
    /// True if the merit never rose within an outer pass.
    pub fn merit_monotone(&self) -> bool {
        self.merit_trace
            .windows(2)
            .all(|w| w[0].0 != w[1].0 || w[1].1 <= w[0].1 + 1e-12 * (1.0 + abs(w[0].1)))
    }
}

/// Augmented Lagrangian at fixed multipliers and penalty.
pub struct Merit<'a, P: ConstrainedProblem + ?Sized> {
    pub problem: &'a P,
    pub lambda: &'a [f64],
    pub mu: &'a [f64],
    pub rho: f64,
}

impl<P: ConstrainedProblem + ?Sized> Merit<'_, P> {
    pub fn value(&self, x: &[f64]) -> f64 {
        let (mut c, mut g) = (Vec::new(), Vec::new());
        let f = self.problem.evaluate(x, &mut c, &mut g);
        self.combine(f, &c, &g)
    }

    fn combine(&self, f: f64, c: &[f64], g: &[f64]) -> f64 {
        let rho = self.rho;
        let eq: f64 = c
            .iter()
            .zip(self.lambda)
            .map(|(ci, li)| li * ci + 0.5 * rho * ci * ci)
            .sum();
        let ineq: f64 = g
            .iter()
            .zip(self.mu)
            .map(|(gi, mi)| {
                let t = (mi + rho * gi).max(0.0);
                (t * t - mi * mi) / (2.0 * rho)
            })
            .sum();
        f + eq + ineq
    }

    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (mut c, mut g) = (Vec::new(), Vec::new());
        let f = self.problem.evaluate(x, &mut c, &mut g);
        let wc: Vec<f64> = c.iter().zip(self.lambda).map(|(ci, li)| li + self.rho * ci).collect();
        let wg: Vec<f64> = g
            .iter()
            .zip(self.mu)
            .map(|(gi, mi)| (mi + self.rho * gi).max(0.0))
            .collect();
        self.problem.vjp(x, 1.0, &wc, &wg, grad);
        self.combine(f, &c, &g)
    }
}

fn violation(c: &[f64], g: &[f64]) -> f64 {
    inf_norm(c).max(g.iter().fold(0.0, |m, v| m.max(*v)))
}

/// Complementarity-aware inequality measure used for the penalty update.
fn ineq_progress(g: &[f64], mu: &[f64], rho: f64) -> f64 {
    g.iter()
        .zip(mu)
        .fold(0.0, |m, (gi, mi)| m.max(abs(gi.max(-mi / rho))))
}

pub fn stationarity<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    lambda: &[f64],
    mu: &[f64],
) -> f64 {
    let mut grad = vec![0.0; problem.dim()];
    problem.vjp(x, 1.0, lambda, mu, &mut grad);
    inf_norm(&grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InnerExit {
    Converged,
    Stalled,
    MaxIterations,
}

/// Dense BFGS with a strong Wolfe line search. `h` carries the inverse Hessian
/// approximation between calls (empty means identity).
fn bfgs<F>(
    fg: F,
    x: &mut Vec<f64>,
    h: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    outer: usize,
    trace: &mut Vec<(usize, f64)>,
    iterations: &mut usize,
) -> InnerExit
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    if h.len() != n * n {
        *h = identity(n);
    }
    let mut g = vec![0.0; n];
    let mut f = fg(x, &mut g);
    trace.push((outer, f));
    let mut fresh = true;
    for _ in 0..max_iter {
        if inf_norm(&g) <= tol {
            return InnerExit::Converged;
        }
        let mut d = mat_vec(h, &g, n);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            *h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha0 = if fresh { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let Some((alpha, f_new, g_new)) = wolfe_search(&fg, x, f, &g, &d, slope, alpha0) else {
            if !fresh {
                *h = identity(n);
                fresh = true;
                continue;
            }
            return InnerExit::Stalled;
        };
        *iterations += 1;
        let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = f_new;
        g = g_new;
        trace.push((outer, f));
        let sy = dot(&s, &y);
        if sy > 1e-14 * sqrt(dot(&s, &s) * dot(&y, &y)) {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            bfgs_update(h, &s, &y, sy, n);
        }
    }
    InnerExit::MaxIterations
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec(h: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let r = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = (1.0 + r * yhy) * r;
    for i in 0..n {
        let row = &mut h[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += coef * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Strong Wolfe line search (bracketing plus zoom). Near rounding level the
/// sufficient-decrease test is relaxed to the approximate-Wolfe form
/// `φ(α) ≤ φ(0) + ε|φ(0)|` together with `φ'(α) ≤ (2c₁ − 1) φ'(0)`.
fn wolfe_search<F>(
    fg: &F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    slope0: f64,
    alpha0: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let n = x.len();
    let eps_f = 1e-12 * (1.0 + abs(f0));
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut eval = |a: f64, gt: &mut Vec<f64>, xt: &mut Vec<f64>| -> (f64, f64) {
        for i in 0..n {
            xt[i] = x[i] + a * d[i];
        }
        let f = fg(xt, gt);
        (f, dot(gt, d))
    };
    let accept = |f: f64, s: f64, a: f64| -> bool {
        let armijo = f <= f0 + C1 * a * slope0;
        let approx = f <= f0 + eps_f && s <= (2.0 * C1 - 1.0) * slope0;
        (armijo || approx) && abs(s) <= -C2 * slope0
    };
    let _ = g0;
    let (mut a_prev, mut f_prev, mut s_prev) = (0.0, f0, slope0);
    let mut a = alpha0;
    for i in 0..40 {
        let (f, s) = eval(a, &mut gt, &mut xt);
        if !f.is_finite() {
            a = 0.5 * (a_prev + a);
            continue;
        }
        if f > f0 + C1 * a * slope0 + eps_f || (i > 0 && f >= f_prev + eps_f) {
            return zoom(&mut eval, &accept, a_prev, f_prev, s_prev, a, f, s, f0, slope0, &mut gt, &mut xt);
        }
        if accept(f, s, a) {
            return Some((a, f, gt));
        }
        if s >= 0.0 {
            return zoom(&mut eval, &accept, a, f, s, a_prev, f_prev, s_prev, f0, slope0, &mut gt, &mut xt);
        }
        a_prev = a;
        f_prev = f;
        s_prev = s;
        a *= 2.5;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<E, A>(
    eval: &mut E,
    accept: &A,
    mut lo: f64,
    mut f_lo: f64,
    mut s_lo: f64,
    mut hi: f64,
    mut f_hi: f64,
    mut s_hi: f64,
    f0: f64,
    slope0: f64,
    gt: &mut Vec<f64>,
    xt: &mut Vec<f64>,
) -> Option<(f64, f64, Vec<f64>)>
where
    E: FnMut(f64, &mut Vec<f64>, &mut Vec<f64>) -> (f64, f64),
    A: Fn(f64, f64, f64) -> bool,
{
    const C1: f64 = 1e-4;
    let eps_f = 1e-12 * (1.0 + abs(f0));
    for _ in 0..60 {
        // cubic interpolation, safeguarded toward the bracket interior
        let a = cubic_min(lo, f_lo, s_lo, hi, f_hi, s_hi);
        let (f, s) = eval(a, gt, xt);
        if !f.is_finite() || f > f0 + C1 * a * slope0 + eps_f || f >= f_lo + eps_f {
            hi = a;
            f_hi = f;
            s_hi = s;
        } else {
            if accept(f, s, a) {
                return Some((a, f, core::mem::take(gt)));
            }
            if s * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                s_hi = s_lo;
            }
            lo = a;
            f_lo = f;
            s_lo = s;
        }
        if abs(hi - lo) < 1e-16 * (1.0 + abs(lo)) {
            break;
        }
    }
    // best decreasing point found so far, if any
    if lo > 0.0 && f_lo < f0 {
        let (f, _) = eval(lo, gt, xt);
        return Some((lo, f, core::mem::take(gt)));
    }
    None
}

fn cubic_min(a: f64, fa: f64, sa: f64, b: f64, fb: f64, sb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let mid = 0.5 * (a + b);
    if !fb.is_finite() {
        return mid;
    }
    let d1 = sa + sb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - sa * sb;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * sqrt(disc);
    let t = b - (b - a) * (sb + d2 - d1) / (sb - sa + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * width && t < hi - 0.1 * width {
        t
    } else {
        mid
    }
}

/// Runs the augmented Lagrangian outer loop from `x0`.
pub fn solve<P: ConstrainedProblem + ?Sized>(problem: &P, x0: &[f64], settings: &AlSettings) -> AlResult {
    
    let (m_eq, m_in) = (problem.n_eq(), problem.n_ineq());
    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; m_eq];
    let mut mu = vec![0.0; m_in];
    let mut rho = settings.initial_penalty;
    let mut h = Vec::new();
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let (mut c, mut g) = (Vec::new(), Vec::new());
    problem.evaluate(&x, &mut c, &mut g);
    let mut prev_progress = violation(&c, &g).max(ineq_progress(&g, &mu, rho));
    let mut converged = false;
    let mut outer = 0;
    while outer < settings.max_outer {
        let tol = (0.1 * settings.opt_tol).max(libm::pow(0.1, outer as f64 + 1.0));
        let merit = Merit {
            problem,
            lambda: &lambda,
            mu: &mu,
            rho,
        };
        bfgs(
            |x, g| merit.value_and_grad(x, g),
            &mut x,
            &mut h,
            tol,
            settings.max_inner,
            outer,
            &mut trace,
            &mut inner_total,
        );
        outer += 1;
        problem.evaluate(&x, &mut c, &mut g);
        for (li, ci) in lambda.iter_mut().zip(&c) {
            *li += rho * ci;
        }
        for (mi, gi) in mu.iter_mut().zip(&g) {
            *mi = (*mi + rho * gi).max(0.0);
        }
        let viol = violation(&c, &g);
        let progress = viol.max(ineq_progress(&g, &mu, rho));
        let stat = stationarity(problem, &x, &lambda, &mu);
        if viol <= 0.1 * settings.feas_tol && stat <= 0.5 * settings.opt_tol {
            converged = true;
            break;
        }
        if progress > 0.25 * prev_progress {
            if rho >= settings.max_penalty {
                break;
            }
            rho = (rho * settings.penalty_growth).min(settings.max_penalty);
            h.clear();
        }
        if rho >= 1e8 && viol > 1e3 * settings.feas_tol && outer >= 8 {
            break;
        }
        prev_progress = progress;
    }
    let objective = problem.evaluate(&x, &mut c, &mut g);
    AlResult {
        stationarity: stationarity(problem, &x, &lambda, &mu),
        violation: violation(&c, &g),
        x,
        lambda,
        mu,
        objective,
        penalty: rho,
        outer_iterations: outer,
        inner_iterations: inner_total,
        converged,
        merit_trace: trace,
    }
}

/// Constraint Jacobian rows (equalities first, then the listed inequalities).
fn jacobian<P: ConstrainedProblem + ?Sized>(problem: &P, x: &[f64], ineq: &[usize]) -> Vec<Vec<f64>> {
    let n = problem.dim();
    let (m_eq, m_in) = (problem.n_eq(), problem.n_ineq());
    let mut rows = Vec::with_capacity(m_eq + ineq.len());
    let mut wc = vec![0.0; m_eq];
    let mut wg = vec![0.0; m_in];
    for i in 0..m_eq {
        wc[i] = 1.0;
        let mut r = vec![0.0; n];
        problem.vjp(x, 0.0, &wc, &wg, &mut r);
        rows.push(r);
        wc[i] = 0.0;
    }
    for &i in ineq {
        wg[i] = 1.0;
        let mut r = vec![0.0; n];
        problem.vjp(x, 0.0, &wc, &wg, &mut r);
        rows.push(r);
        wg[i] = 0.0;
    }
    rows
}

fn gram(rows: &[Vec<f64>], delta: f64) -> DenseMatrix {
    let m = rows.len();
    let mut a = DenseMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            let v = dot(&rows[i], &rows[j]);
            a.set(i, j, v);
            a.set(j, i, v);
        }
        a.add(i, i, delta);
    }
    a
}

/// Gauss-Newton projection of `x` onto `c = 0` and `g_i = 0` for `i` in
/// `active`. A step is kept only while it lowers the worst of the projected
/// residual and the inactive excess.
fn project<P: ConstrainedProblem + ?Sized>(problem: &P, x: &[f64], active: &[usize]) -> Vec<f64> {
    let measure = |c: &[f64], g: &[f64]| -> (Vec<f64>, f64) {
        let mut r = c.to_vec();
        r.extend(active.iter().map(|&i| g[i]));
        let inactive = (0..g.len())
            .filter(|i| active.binary_search(i).is_err())
            .fold(0.0f64, |m, i| m.max(g[i]));
        let worst = inf_norm(&r).max(inactive);
        (r, worst)
    };
    let (mut c, mut g) = (Vec::new(), Vec::new());
    problem.evaluate(x, &mut c, &mut g);
    let mut x = x.to_vec();
    let (mut r, mut worst) = measure(&c, &g);
    for _ in 0..12 {
        if worst < 1e-13 {
            break;
        }
        let rows = jacobian(problem, &x, active);
        let Some(y) = solve_dense(gram(&rows, 1e-14), &r) else {
            break;
        };
        let mut step = vec![0.0; x.len()];
        for (row, yi) in rows.iter().zip(&y) {
            for (s, a) in step.iter_mut().zip(row) {
                *s += yi * a;
            }
        }
        let trial: Vec<f64> = x.iter().zip(&step).map(|(x, s)| x - s).collect();
        problem.evaluate(&trial, &mut c, &mut g);
        let (rt, wt) = measure(&c, &g);
        if !(wt < worst) {
            break;
        }
        x = trial;
        r = rt;
        worst = wt;
    }
    x
}

/// Newton projection onto the equalities and the active inequalities, then a
/// least-squares refresh of the multipliers on that set. Progressively
/// tighter active sets are tried when a wider one is inconsistent; the least
/// violating point wins.
pub fn polish<P: ConstrainedProblem + ?Sized>(problem: &P, result: &mut AlResult, active_tol: f64) {
    let (mut c, mut g) = (Vec::new(), Vec::new());
    problem.evaluate(&result.x, &mut c, &mut g);
    let select = |tol: f64, mu_floor: f64| -> Vec<usize> {
        (0..g.len())
            .filter(|&i| g[i] > -tol || result.mu[i] > mu_floor)
            .collect()
    };
    let candidates = [select(active_tol, 0.0), select(1e-9, 1e-8), select(0.0, f64::INFINITY)];
    let mut best = (violation(&c, &g), result.x.clone(), candidates[0].clone());
    for active in &candidates {
        let x = project(problem, &result.x, active);
        problem.evaluate(&x, &mut c, &mut g);
        let v = violation(&c, &g);
        if v < best.0 {
            best = (v, x, active.clone());
        }
        if v < 1e-12 {
            break;
        }
    }
    let (_, x, active) = best;
    result.x = x;
    result.objective = problem.evaluate(&result.x, &mut c, &mut g);
    result.violation = violation(&c, &g);

    // least-squares multipliers on the active set; keep whichever Lagrangian
    // residual is smaller
    let rows = jacobian(problem, &result.x, &active);
    let mut grad_f = vec![0.0; result.x.len()];
    problem.vjp(&result.x, 1.0, &vec![0.0; c.len()], &vec![0.0; g.len()], &mut grad_f);
    let rhs: Vec<f64> = rows.iter().map(|row| -dot(row, &grad_f)).collect();
    let current = stationarity(problem, &result.x, &result.lambda, &result.mu);
    result.stationarity = current;
    if let Some(y) = solve_dense(gram(&rows, 1e-14), &rhs) {
        let m_eq = c.len();
        let lambda = y[..m_eq].to_vec();
        let mut mu = vec![0.0; g.len()];
        for (k, &i) in active.iter().enumerate() {
            mu[i] = y[m_eq + k];
        }
        if mu.iter().all(|v| *v >= -1e-9) {
            mu.iter_mut().for_each(|v| *v = v.max(0.0));
            let ls = stationarity(problem, &result.x, &lambda, &mu);
            if ls < current {
                result.lambda = lambda;
                result.mu = mu;
                result.stationarity = ls;
            }
        }
    }
}
