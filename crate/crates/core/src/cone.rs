//! Primal-dual interior-point solver for linear cone programs over products of
//! the nonnegative orthant and second-order cones.
//!
//! ```text
//!     minimize    cᵀx
//!     subject to  A x = b
//!                 G x + s = h,   s ∈ K
//! ```
//!
//! Nesterov-Todd scaling with a Mehrotra predictor-corrector, infeasible start.
//! The reduced KKT system is assembled in a stage ordering supplied by the
//! caller so that it stays banded; variables listed in `border` are eliminated
//! through a Schur complement instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{BorderedBand, BorderedLu};
use crate::math::{abs, axpy, dot, inf_norm, sqrt};

/// One block of the cone `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// `dim` independent nonnegativity constraints.
    Nonneg(usize),
    /// `{ (t, x) : t ≥ ‖x‖ }` of total dimension `dim` (≥ 2).
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonneg(d) | Cone::Soc(d) => d,
        }
    }

    fn degree(&self) -> usize {
        match *self {
            Cone::Nonneg(d) => d,
            Cone::Soc(_) => 1,
        }
    }
}

/// Sparse row: `(column, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Problem data. Rows of `g` are grouped consecutively by `cones`.
#[derive(Clone, Debug, Default)]
pub struct ConeProgram {
    pub n: usize,
    pub c: Vec<f64>,
    pub a: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub g: Vec<SparseRow>,
    pub h: Vec<f64>,
    pub cones: Vec<Cone>,
    /// Ordering key per variable; nearby keys land close together in the KKT band.
    pub var_stage: Vec<f64>,
    /// Ordering key per equality row.
    pub eq_stage: Vec<f64>,
    /// Variables that couple every stage (kept out of the band).
    pub border: Vec<usize>,
}

impl ConeProgram {
    pub fn new(n: usize) -> Self {
        ConeProgram {
            n,
            c: vec![0.0; n],
            var_stage: vec![0.0; n],
            ..Default::default()
        }
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64, stage: f64) {
        self.a.push(row);
        self.b.push(rhs);
        self.eq_stage.push(stage);
    }

    /// Appends a cone block with rows `h_i - g_iᵀx`.
    pub fn add_cone(&mut self, cone: Cone, rows: Vec<SparseRow>, rhs: Vec<f64>) {
        assert_eq!(rows.len(), cone.dim());
        assert_eq!(rhs.len(), cone.dim());
        self.g.extend(rows);
        self.h.extend(rhs);
        self.cones.push(cone);
    }

    pub fn n_eq(&self) -> usize {
        self.a.len()
    }

    pub fn n_cone_rows(&self) -> usize {
        self.g.len()
    }
}

#[derive(Clone, Debug)]
pub struct ConeSettings {
    pub max_iter: usize,
    /// relative primal / dual residual tolerance
    pub feas_tol: f64,
    pub abs_gap_tol: f64,
    pub rel_gap_tol: f64,
    pub static_reg: f64,
    pub refine_steps: usize,
}

impl Default for ConeSettings {
    fn default() -> Self {
        ConeSettings {
            max_iter: 100,
            feas_tol: 1e-10,
            abs_gap_tol: 1e-10,
            rel_gap_tol: 1e-9,
            static_reg: 1e-11,
            refine_steps: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConeStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub status: ConeStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// NT scaling for one cone block.
#[derive(Clone, Debug)]
enum BlockScaling {
    Nonneg(Vec<f64>),
    Soc { beta: f64, wbar: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Scaling {
    blocks: Vec<BlockScaling>,
}

fn soc_residual(v: &[f64]) -> f64 {
    // t² - ‖x‖²
    v[0] * v[0] - dot(&v[1..], &v[1..])
}

impl Scaling {
    fn identity(cones: &[Cone]) -> Self {
        let blocks = cones
            .iter()
            .map(|c| match *c {
                Cone::Nonneg(d) => BlockScaling::Nonneg(vec![1.0; d]),
                Cone::Soc(d) => {
                    let mut wbar = vec![0.0; d];
                    wbar[0] = 1.0;
                    BlockScaling::Soc { beta: 1.0, wbar }
                }
            })
            .collect();
        Scaling { blocks }
    }

    fn nesterov_todd(cones: &[Cone], s: &[f64], z: &[f64]) -> Self {
        let mut blocks = Vec::with_capacity(cones.len());
        let mut off = 0;
        for c in cones {
            let d = c.dim();
            let sb = &s[off..off + d];
            let zb = &z[off..off + d];
            match c {
                Cone::Nonneg(_) => {
                    blocks.push(BlockScaling::Nonneg(
                        sb.iter().zip(zb).map(|(si, zi)| sqrt(si / zi)).collect(),
                    ));
                }
                Cone::Soc(_) => {
                    let sn = sqrt(soc_residual(sb));
                    let zn = sqrt(soc_residual(zb));
                    let sbar: Vec<f64> = sb.iter().map(|v| v / sn).collect();
                    let zbar: Vec<f64> = zb.iter().map(|v| v / zn).collect();
                    let gamma = sqrt((1.0 + dot(&sbar, &zbar)) / 2.0);
                    let mut wbar: Vec<f64> = vec![0.0; d];
                    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    for i in 1..d {
                        wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                    }
                    // w̄ satisfies (2w̄w̄ᵀ − J) z̄ = s̄; its square root in the
                    // same family is (w̄ + e)/√(2(w̄₀ + 1))
                    let norm = sqrt(2.0 * (wbar[0] + 1.0));
                    wbar[0] += 1.0;
                    wbar.iter_mut().for_each(|v| *v /= norm);
                    let beta = sqrt(sn / zn);
                    blocks.push(BlockScaling::Soc { beta, wbar });
                }
            }
            off += d;
        }
        Scaling { blocks }
    }

    /// `out = W v` (`inverse = false`) or `W⁻¹ v`.
    fn apply(&self, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let mut off = 0;
        for b in &self.blocks {
            match b {
                BlockScaling::Nonneg(w) => {
                    for (i, wi) in w.iter().enumerate() {
                        out[off + i] = if inverse { v[off + i] / wi } else { v[off + i] * wi };
                    }
                    off += w.len();
                }
                BlockScaling::Soc { beta, wbar } => {
                    let d = wbar.len();
                    let vb = &v[off..off + d];
                    if !inverse {
                        // β (2 w̄ w̄ᵀ v − J v)
                        let wv = dot(wbar, vb);
                        out[off] = beta * (2.0 * wbar[0] * wv - vb[0]);
                        for i in 1..d {
                            out[off + i] = beta * (2.0 * wbar[i] * wv + vb[i]);
                        }
                    } else {
                        // (1/β)(2 Jw̄ (w̄ᵀ J v) − J v)
                        let mut wjv = wbar[0] * vb[0];
                        for i in 1..d {
                            wjv -= wbar[i] * vb[i];
                        }
                        out[off] = (2.0 * wbar[0] * wjv - vb[0]) / beta;
                        for i in 1..d {
                            out[off + i] = (-2.0 * wbar[i] * wjv + vb[i]) / beta;
                        }
                    }
                    off += d;
                }
            }
        }
        out
    }

    fn apply_inv_sq(&self, v: &[f64]) -> Vec<f64> {
        let t = self.apply(v, true);
        self.apply(&t, true)
    }

    /// Dense `W⁻²` for one SOC block.
    fn soc_inv_sq(beta: f64, wbar: &[f64]) -> Vec<f64> {
        let d = wbar.len();
        let mut m1 = vec![0.0; d * d];
        for i in 0..d {
            let ji = if i == 0 { wbar[0] } else { -wbar[i] };
            for j in 0..d {
                let jj = if j == 0 { wbar[0] } else { -wbar[j] };
                m1[i * d + j] = 2.0 * ji * jj;
            }
            m1[i * d + i] += if i == 0 { -1.0 } else { 1.0 };
        }
        let mut out = vec![0.0; d * d];
        let inv_b2 = 1.0 / (beta * beta);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m1[i * d + k] * m1[k * d + j];
                }
                out[i * d + j] = acc * inv_b2;
            }
        }
        out
    }
}

/// Jordan product `x ∘ y` blockwise.
fn jordan_product(cones: &[Cone], x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut off = 0;
    for c in cones {
        let d = c.dim();
        match c {
            Cone::Nonneg(_) => {
                for i in off..off + d {
                    out[i] = x[i] * y[i];
                }
            }
            Cone::Soc(_) => {
                out[off] = dot(&x[off..off + d], &y[off..off + d]);
                for i in off + 1..off + d {
                    out[i] = x[off] * y[i] + y[off] * x[i];
                }
            }
        }
        off += d;
    }
    out
}

/// Solves `λ ∘ x = t` blockwise.
fn jordan_divide(cones: &[Cone], lambda: &[f64], t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.len()];
    let mut off = 0;
    for c in cones {
        let d = c.dim();
        match c {
            Cone::Nonneg(_) => {
                for i in off..off + d {
                    out[i] = t[i] / lambda[i];
                }
            }
            Cone::Soc(_) => {
                let l0 = lambda[off];
                let l1 = &lambda[off + 1..off + d];
                let t1 = &t[off + 1..off + d];
                let det = l0 * l0 - dot(l1, l1);
                let x0 = (l0 * t[off] - dot(l1, t1)) / det;
                out[off] = x0;
                for i in 1..d {
                    out[off + i] = (t[off + i] - x0 * lambda[off + i]) / l0;
                }
            }
        }
        off += d;
    }
    out
}

fn identity_element(cones: &[Cone], m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    let mut off = 0;
    for c in cones {
        match c {
            Cone::Nonneg(d) => e[off..off + d].iter_mut().for_each(|v| *v = 1.0),
            Cone::Soc(_) => e[off] = 1.0,
        }
        off += c.dim();
    }
    e
}

/// Largest `α` such that `x + α d` stays in the cone (∞ if unbounded).
fn max_step(cones: &[Cone], x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    let mut off = 0;
    for c in cones {
        let d = c.dim();
        match c {
            Cone::Nonneg(_) => {
                for i in off..off + d {
                    if dx[i] < 0.0 {
                        alpha = alpha.min(-x[i] / dx[i]);
                    }
                }
            }
            Cone::Soc(_) => {
                let xb = &x[off..off + d];
                let db = &dx[off..off + d];
                let qa = soc_residual(db);
                let qb = 2.0 * (xb[0] * db[0] - dot(&xb[1..], &db[1..]));
                let qc = soc_residual(xb).max(0.0);
                alpha = alpha.min(smallest_positive_root(qa, qb, qc));
                if db[0] < 0.0 {
                    alpha = alpha.min(-xb[0] / db[0]);
                }
            }
        }
        off += d;
    }
    alpha
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let mut best = f64::INFINITY;
    if a == 0.0 {
        if b < 0.0 {
            best = -c / b;
        }
        return best;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return best;
    }
    let q = -0.5 * (b + b.signum() * sqrt(disc));
    for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Distance of `v` from the cone boundary along `e` (negative when outside).
fn min_eigen(cones: &[Cone], v: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    let mut off = 0;
    for c in cones {
        let d = c.dim();
        match c {
            Cone::Nonneg(_) => {
                for &x in &v[off..off + d] {
                    m = m.min(x);
                }
            }
            Cone::Soc(_) => {
                let r = sqrt(dot(&v[off + 1..off + d], &v[off + 1..off + d]));
                m = m.min(v[off] - r);
            }
        }
        off += d;
    }
    m
}

fn mat_vec(rows: &[SparseRow], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
        .collect()
}

fn mat_t_vec(rows: &[SparseRow], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, &yi) in rows.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        for &(j, v) in r {
            out[j] += v * yi;
        }
    }
    out
}

/// Reduced KKT system `[[H, Aᵀ], [A, 0]]` in stage order.
struct KktSystem {
    /// KKT position of each variable, then each equality row.
    pos: Vec<usize>,
    kl: usize,
    n_band: usize,
    n_border: usize,
}

impl KktSystem {
    fn new(prog: &ConeProgram) -> Self {
        let n = prog.n;
        let p = prog.n_eq();
        let mut is_border = vec![false; n];
        for &b in &prog.border {
            is_border[b] = true;
        }
        let mut items: Vec<(f64, usize, usize)> = Vec::with_capacity(n + p);
        for i in 0..n {
            if !is_border[i] {
                items.push((prog.var_stage[i], 0, i));
            }
        }
        for r in 0..p {
            items.push((prog.eq_stage[r], 1, n + r));
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut pos = vec![0usize; n + p];
        for (k, it) in items.iter().enumerate() {
            pos[it.2] = k;
        }
        let n_band = items.len();
        for (k, &b) in prog.border.iter().enumerate() {
            pos[b] = n_band + k;
        }

        let mut kl = 0usize;
        let mut widen = |i: usize, j: usize| {
            let (pi, pj) = (pos[i], pos[j]);
            if pi < n_band && pj < n_band {
                kl = kl.max(pi.abs_diff(pj));
            }
        };
        for (r, row) in prog.a.iter().enumerate() {
            for &(j, _) in row {
                widen(n + r, j);
            }
        }
        let mut off = 0;
        for c in &prog.cones {
            let d = c.dim();
            let rows = match c {
                Cone::Nonneg(_) => (off..off + d).map(|r| (r, r + 1)).collect::<Vec<_>>(),
                Cone::Soc(_) => vec![(off, off + d)],
            };
            for (lo, hi) in rows {
                let vars: Vec<usize> = prog.g[lo..hi].iter().flatten().map(|e| e.0).collect();
                for &i in &vars {
                    for &j in &vars {
                        widen(i, j);
                    }
                }
            }
            off += d;
        }
        KktSystem {
            pos,
            kl,
            n_band,
            n_border: prog.border.len(),
        }
    }

    fn assemble(&self, prog: &ConeProgram, scaling: &Scaling, reg: f64) -> BorderedBand {
        let n = prog.n;
        let mut m = BorderedBand::zeros(self.n_band, self.kl, self.kl, self.n_border);
        for (r, row) in prog.a.iter().enumerate() {
            let pr = self.pos[n + r];
            for &(j, v) in row {
                let pj = self.pos[j];
                m.add(pr, pj, v);
                m.add(pj, pr, v);
            }
            m.add(pr, pr, -reg);
        }
        for i in 0..n {
            m.add(self.pos[i], self.pos[i], reg);
        }
        let mut off = 0;
        for (c, blk) in prog.cones.iter().zip(&scaling.blocks) {
            let d = c.dim();
            match blk {
                BlockScaling::Nonneg(w) => {
                    for (k, wk) in w.iter().enumerate() {
                        let weight = 1.0 / (wk * wk);
                        let row = &prog.g[off + k];
                        for &(i, gi) in row {
                            for &(j, gj) in row {
                                m.add(self.pos[i], self.pos[j], weight * gi * gj);
                            }
                        }
                    }
                }
                BlockScaling::Soc { beta, wbar } => {
                    let w2 = Scaling::soc_inv_sq(*beta, wbar);
                    for a in 0..d {
                        for b in 0..d {
                            let wab = w2[a * d + b];
                            if wab == 0.0 {
                                continue;
                            }
                            for &(i, gi) in &prog.g[off + a] {
                                for &(j, gj) in &prog.g[off + b] {
                                    m.add(self.pos[i], self.pos[j], wab * gi * gj);
                                }
                            }
                        }
                    }
                }
            }
            off += d;
        }
        m
    }
}

struct Factored<'a> {
    prog: &'a ConeProgram,
    kkt: &'a KktSystem,
    scaling: Scaling,
    lu: BorderedLu,
    refine: usize,
}

impl Factored<'_> {
    /// One reduced solve without refinement.
    fn solve_once(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let prog = self.prog;
        let n = prog.n;
        let p = prog.n_eq();
        let w2bz = self.scaling.apply_inv_sq(bz);
        let gt = mat_t_vec(&prog.g, &w2bz, n);
        let mut rhs = vec![0.0; n + p];
        for i in 0..n {
            rhs[self.kkt.pos[i]] = bx[i] + gt[i];
        }
        for r in 0..p {
            rhs[self.kkt.pos[n + r]] = by[r];
        }
        let sol = self.lu.solve(&rhs);
        let dx: Vec<f64> = (0..n).map(|i| sol[self.kkt.pos[i]]).collect();
        let dy: Vec<f64> = (0..p).map(|r| sol[self.kkt.pos[n + r]]).collect();
        let gdx = mat_vec(&prog.g, &dx);
        let diff: Vec<f64> = gdx.iter().zip(bz).map(|(a, b)| a - b).collect();
        let dz = self.scaling.apply_inv_sq(&diff);
        (dx, dy, dz)
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (dx, dy, dz) = (bx, by, bz)`, refining
    /// against the full (unreduced, unregularized) system.
    fn solve(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let prog = self.prog;
        let n = prog.n;
        let (mut dx, mut dy, mut dz) = self.solve_once(bx, by, bz);
        let scale = 1.0 + inf_norm(bx).max(inf_norm(by)).max(inf_norm(bz));
        for _ in 0..self.refine {
            let aty = mat_t_vec(&prog.a, &dy, n);
            let gtz = mat_t_vec(&prog.g, &dz, n);
            let rx: Vec<f64> = (0..n).map(|i| bx[i] - aty[i] - gtz[i]).collect();
            let ady = mat_vec(&prog.a, &dx);
            let ry: Vec<f64> = by.iter().zip(&ady).map(|(b, a)| b - a).collect();
            let gdx = mat_vec(&prog.g, &dx);
            let w2dz = self.scaling.apply(&self.scaling.apply(&dz, false), false);
            let rz: Vec<f64> =
                (0..bz.len()).map(|i| bz[i] - gdx[i] + w2dz[i]).collect();
            let worst = inf_norm(&rx).max(inf_norm(&ry)).max(inf_norm(&rz));
            if worst <= 1e-15 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&rx, &ry, &rz);
            axpy(1.0, &cx, &mut dx);
            axpy(1.0, &cy, &mut dy);
            axpy(1.0, &cz, &mut dz);
        }
        (dx, dy, dz)
    }
}

fn factor<'a>(
    prog: &'a ConeProgram,
    kkt: &'a KktSystem,
    scaling: Scaling,
    settings: &ConeSettings,
) -> Option<Factored<'a>> {
    let mut reg = settings.static_reg;
    for _ in 0..6 {
        let matrix = kkt.assemble(prog, &scaling, reg);
        if let Some(lu) = matrix.factor() {
            return Some(Factored {
                prog,
                kkt,
                scaling,
                lu,
                refine: settings.refine_steps,
            });
        }
        reg *= 100.0;
    }
    None
}

/// Runs the interior-point method.
pub fn solve(prog: &ConeProgram, settings: &ConeSettings) -> ConeSolution {
    let n = prog.n;
    let m = prog.n_cone_rows();
    let cones = &prog.cones;
    let degree: usize = cones.iter().map(Cone::degree).sum::<usize>().max(1);
    let kkt = KktSystem::new(prog);
    let e = identity_element(cones, m);

    let fail = |status, iterations| ConeSolution {
        status,
        x: vec![0.0; n],
        y: vec![0.0; prog.n_eq()],
        z: vec![0.0; m],
        s: vec![0.0; m],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations,
    };

    // starting point from two least-squares problems
    let Some(init) = factor(prog, &kkt, Scaling::identity(cones), settings) else {
        return fail(ConeStatus::NumericalFailure, 0);
    };
    let zero_n = vec![0.0; n];
    let zero_p = vec![0.0; prog.n_eq()];
    let zero_m = vec![0.0; m];
    let (mut x, _, neg_s) = init.solve(&zero_n, &prog.b, &prog.h);
    let mut s: Vec<f64> = neg_s.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = prog.c.iter().map(|v| -v).collect();
    let (_, mut y, mut z) = init.solve(&neg_c, &zero_p, &zero_m);
    drop(init);
    let shift = |v: &mut Vec<f64>| {
        let a = min_eigen(cones, v);
        if a <= 1e-8 {
            axpy(1.0 + (-a).max(0.0), &e, v);
        }
    };
    shift(&mut s);
    shift(&mut z);

    let norm_b = inf_norm(&prog.b).max(inf_norm(&prog.h));
    let norm_c = inf_norm(&prog.c);
    let mut best: Option<(f64, ConeSolution)> = None;
    // accept the best iterate at reduced accuracy when progress stalls
    let salvage = |best: Option<(f64, ConeSolution)>, status, iter| match best {
        Some((q, mut sol)) if q <= 1e3 * settings.feas_tol.max(settings.rel_gap_tol) => {
            sol.status = ConeStatus::Optimal;
            sol
        }
        Some((_, mut sol)) => {
            sol.status = status;
            sol
        }
        None => fail(status, iter),
    };

    for iter in 0..=settings.max_iter {
        let ax = mat_vec(&prog.a, &x);
        let gx = mat_vec(&prog.g, &x);
        let r_y: Vec<f64> = ax.iter().zip(&prog.b).map(|(a, b)| a - b).collect();
        let r_z: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - prog.h[i]).collect();
        let aty = mat_t_vec(&prog.a, &y, n);
        let gtz = mat_t_vec(&prog.g, &z, n);
        let r_x: Vec<f64> = (0..n).map(|i| prog.c[i] + aty[i] + gtz[i]).collect();

        let pcost = dot(&prog.c, &x);
        let dcost = -dot(&prog.b, &y) - dot(&prog.h, &z);
        let gap = dot(&s, &z);
        let pres = inf_norm(&r_y).max(inf_norm(&r_z)) / (1.0 + norm_b);
        let dres = inf_norm(&r_x) / (1.0 + norm_c);
        let rel_gap = gap / abs(pcost).max(abs(dcost)).max(1.0);

        let snapshot = |status| ConeSolution {
            status,
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            s: s.clone(),
            primal_objective: pcost,
            dual_objective: dcost,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            iterations: iter,
        };

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return salvage(best, ConeStatus::NumericalFailure, iter);
        }
        if pres <= settings.feas_tol
            && dres <= settings.feas_tol
            && (gap <= settings.abs_gap_tol || rel_gap <= settings.rel_gap_tol)
        {
            return snapshot(ConeStatus::Optimal);
        }
        let quality = pres.max(dres).max(rel_gap.min(gap));
        if best.as_ref().is_none_or(|(q, _)| quality < *q) {
            best = Some((quality, snapshot(ConeStatus::MaxIterations)));
        }
        if iter == settings.max_iter {
            return salvage(best, ConeStatus::MaxIterations, iter);
        }

        let mu = gap / degree as f64;
        let scaling = Scaling::nesterov_todd(cones, &s, &z);
        let lambda = scaling.apply(&z, false);
        let Some(fac) = factor(prog, &kkt, scaling, settings) else {
            return salvage(best, ConeStatus::NumericalFailure, iter);
        };
        let bx: Vec<f64> = r_x.iter().map(|v| -v).collect();
        let by: Vec<f64> = r_y.iter().map(|v| -v).collect();

        // predictor: ds̃ + dz̃ = −λ
        let step_for = |t: &[f64]| {
            let wt = fac.scaling.apply(t, false);
            let bz: Vec<f64> = (0..m).map(|i| -r_z[i] - wt[i]).collect();
            let (dx, dy, dz) = fac.solve(&bx, &by, &bz);
            let wdz = fac.scaling.apply(&dz, false);
            let tw: Vec<f64> = (0..m).map(|i| t[i] - wdz[i]).collect();
            let ds = fac.scaling.apply(&tw, false);
            (dx, dy, dz, ds)
        };
        let t_aff: Vec<f64> = lambda.iter().map(|v| -v).collect();
        let (_, _, dz_a, ds_a) = step_for(&t_aff);
        let alpha_aff = max_step(cones, &s, &ds_a).min(max_step(cones, &z, &dz_a)).min(1.0);
        let s_new: Vec<f64> = (0..m).map(|i| s[i] + alpha_aff * ds_a[i]).collect();
        let z_new: Vec<f64> = (0..m).map(|i| z[i] + alpha_aff * dz_a[i]).collect();
        let rho = (dot(&s_new, &z_new) / gap).max(0.0);
        let sigma = (rho * rho * rho).clamp(0.0, 1.0);

        // corrector
        let ds_tilde = fac.scaling.apply(&ds_a, true);
        let dz_tilde = fac.scaling.apply(&dz_a, false);
        let cross = jordan_product(cones, &ds_tilde, &dz_tilde);
        let ll = jordan_product(cones, &lambda, &lambda);
        let target: Vec<f64> = (0..m).map(|i| -ll[i] + sigma * mu * e[i] - cross[i]).collect();
        let t = jordan_divide(cones, &lambda, &target);
        let (dx, dy, dz, ds) = step_for(&t);
        let alpha_max = max_step(cones, &s, &ds).min(max_step(cones, &z, &dz));
        let alpha = (0.99 * alpha_max).min(1.0);
        if alpha < 1e-12 {
            return salvage(best, ConeStatus::NumericalFailure, iter);
        }
        axpy(alpha, &dx, &mut x);
        axpy(alpha, &dy, &mut y);
        axpy(alpha, &dz, &mut z);
        axpy(alpha, &ds, &mut s);
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        abs(a - b) <= tol
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_same_point() {
        let cones = [Cone::Soc(4), Cone::Nonneg(2)];
        let s = [3.0, 1.0, -0.5, 0.7, 2.0, 0.1];
        let z = [2.0, 0.3, 0.9, -0.2, 0.5, 4.0];
        let w = Scaling::nesterov_todd(&cones, &s, &z);
        let wz = w.apply(&z, false);
        let winv_s = w.apply(&s, true);
        for (a, b) in wz.iter().zip(&winv_s) {
            assert!(approx(*a, *b, 1e-12), "{wz:?} vs {winv_s:?}");
        }
        // W⁻¹ is the inverse of W
        let v = [0.2, -1.0, 0.4, 3.0, 1.5, -2.0];
        let back = w.apply(&w.apply(&v, false), true);
        for (a, b) in back.iter().zip(&v) {
            assert!(approx(*a, *b, 1e-12));
        }
    }

    #[test]
    fn jordan_divide_inverts_product() {
        let cones = [Cone::Soc(3), Cone::Nonneg(1)];
        let l = [2.0, 0.5, -0.3, 1.5];
        let x = [0.3, -1.0, 2.0, 0.7];
        let t = jordan_product(&cones, &l, &x);
        let back = jordan_divide(&cones, &l, &t);
        for (a, b) in back.iter().zip(&x) {
            assert!(approx(*a, *b, 1e-12));
        }
    }

    #[test]
    fn max_step_hits_cone_boundary() {
        let cones = [Cone::Soc(3)];
        let x = [2.0, 0.0, 0.0];
        let d = [-1.0, 1.0, 0.0];
        // (2 - a)^2 = a^2  ->  a = 1
        let a = max_step(&cones, &x, &d);
        assert!(approx(a, 1.0, 1e-12));
        assert!(max_step(&cones, &x, &[1.0, 0.5, 0.0]).is_infinite());
    }

    #[test]
    fn linear_program_optimum() {
        // min -x0 - x1  s.t. x0 + 2 x1 <= 4, 3 x0 + x1 <= 6, x >= 0  -> (1.6, 1.2)
        let mut p = ConeProgram::new(2);
        p.c = vec![-1.0, -1.0];
        p.add_cone(
            Cone::Nonneg(4),
            vec![
                vec![(0, 1.0), (1, 2.0)],
                vec![(0, 3.0), (1, 1.0)],
                vec![(0, -1.0)],
                vec![(1, -1.0)],
            ],
            vec![4.0, 6.0, 0.0, 0.0],
        );
        let sol = solve(&p, &ConeSettings::default());
        assert_eq!(sol.status, ConeStatus::Optimal);
        assert!(approx(sol.x[0], 1.6, 1e-7) && approx(sol.x[1], 1.2, 1e-7), "{:?}", sol.x);
    }

    #[test]
    fn second_order_cone_projection() {
        // min t  s.t. ‖x - (3, 4)‖ <= t, x0 + x1 = 1  -> distance from (3,4) to the line
        let mut p = ConeProgram::new(3);
        p.c = vec![0.0, 0.0, 1.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0, 0.0);
        p.add_cone(
            Cone::Soc(3),
            vec![vec![(2, -1.0)], vec![(0, -1.0)], vec![(1, -1.0)]],
            vec![0.0, -3.0, -4.0],
        );
        let sol = solve(&p, &ConeSettings::default());
        assert_eq!(sol.status, ConeStatus::Optimal);
        let expected = 6.0 / sqrt(2.0);
        assert!(approx(sol.primal_objective, expected, 1e-7), "{}", sol.primal_objective);
    }

    #[test]
    fn border_variable_matches_banded_result() {
        let mut p = ConeProgram::new(3);
        p.c = vec![0.0, 0.0, 1.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0, 0.0);
        p.add_cone(
            Cone::Soc(3),
            vec![vec![(2, -1.0)], vec![(0, -1.0)], vec![(1, -1.0)]],
            vec![0.0, -3.0, -4.0],
        );
        p.border = vec![2];
        let sol = solve(&p, &ConeSettings::default());
        assert_eq!(sol.status, ConeStatus::Optimal);
        assert!(approx(sol.primal_objective, 6.0 / sqrt(2.0), 1e-7));
    }
}
