//! Variable-step minimum-time program condensed per waypoint segment.
//!
//! Decision vector: one block per interval (`θ, φ, s` on the thrust sphere, or
//! Cartesian `u` plus `s` when relaxed) followed by the velocities of the
//! interior waypoints. Durations are `dt = s²`, so `dt ≥ 0` holds by
//! construction and zero-length intervals stay reachable.
//!
//! Each segment starts at its waypoint with the waypoint velocity and is rolled
//! forward through its `S + 1` intervals. Equalities pin the rolled-out end
//! state to the next waypoint and its velocity. Inequalities carry the axis box
//! at every node, the blur bound at interior waypoints, the optional floor on
//! `u_z` and, in relaxed mode, `‖u‖ ≤ ū`.

use alloc::vec;
use alloc::vec::Vec;

use super::augmented::ConstrainedProblem;
use super::InputMode;
use crate::camera::SurveyPlan;
use crate::math::{acos, atan2, cos, sin, sq, sqrt, Vec3};
use crate::params::{Layout, PlannerParams};

#[derive(Clone, Debug)]
pub struct MinTimeProblem {
    pub layout: Layout,
    pub mode: InputMode,
    waypoints: Vec<Vec3>,
    u_max: f64,
    v_bar: Option<f64>,
    v_blur: Option<f64>,
    u_z_min: Option<f64>,
    v_start: Vec3,
    v_end: Vec3,
    n_ineq: usize,
}

impl MinTimeProblem {
    pub fn new(plan: &SurveyPlan, params: &PlannerParams, switching_points: usize, mode: InputMode) -> Self {
        let layout = Layout::new(plan.len(), switching_points);
        let v_bar = params.v_axis_max.is_finite().then_some(params.v_axis_max);
        let v_blur = params.v_blur.is_finite().then_some(params.v_blur);
        let mut p = MinTimeProblem {
            layout,
            mode,
            waypoints: plan.waypoints.clone(),
            u_max: params.u_max,
            v_bar,
            v_blur,
            u_z_min: params.u_z_min,
            v_start: params.v_start,
            v_end: params.v_end,
            n_ineq: 0,
        };
        let interior_wp = layout.waypoints.saturating_sub(2);
        let box_rows = if v_bar.is_some() { 6 } else { 0 };
        p.n_ineq = layout.segments() * switching_points * box_rows
            + interior_wp * (box_rows + usize::from(v_blur.is_some()))
            + layout.intervals()
                * (usize::from(p.u_z_min.is_some()) + usize::from(mode == InputMode::Relaxed));
        p
    }

    pub fn block(&self) -> usize {
        match self.mode {
            InputMode::Sphere => 3,
            InputMode::Relaxed => 4,
        }
    }

    fn s_index(&self, k: usize) -> usize {
        self.block() * k + self.block() - 1
    }

    fn v_offset(&self) -> usize {
        self.block() * self.layout.intervals()
    }

    /// Column of the velocity of interior waypoint `n` (1 ≤ n ≤ N−2).
    fn v_index(&self, n: usize) -> Option<usize> {
        (n >= 1 && n + 1 < self.layout.waypoints).then(|| self.v_offset() + 3 * (n - 1))
    }

    pub fn input(&self, x: &[f64], k: usize) -> Vec3 {
        let b = self.block() * k;
        match self.mode {
            InputMode::Sphere => {
                let (th, ph) = (x[b], x[b + 1]);
                Vec3::new(sin(ph) * cos(th), sin(ph) * sin(th), cos(ph)) * self.u_max
            }
            InputMode::Relaxed => Vec3::new(x[b], x[b + 1], x[b + 2]),
        }
    }

    pub fn duration(&self, x: &[f64], k: usize) -> f64 {
        sq(x[self.s_index(k)])
    }

    pub fn waypoint_velocity(&self, x: &[f64], n: usize) -> Vec3 {
        match self.v_index(n) {
            Some(i) => Vec3::new(x[i], x[i + 1], x[i + 2]),
            None if n == 0 => self.v_start,
            None => self.v_end,
        }
    }

    /// Chain-propagated node states from the first waypoint.
    pub fn node_states(&self, x: &[f64]) -> (Vec<Vec3>, Vec<Vec3>) {
        let k_total = self.layout.intervals();
        let mut r = Vec::with_capacity(k_total + 1);
        let mut v = Vec::with_capacity(k_total + 1);
        let mut rc = self.waypoints[0];
        let mut vc = self.v_start;
        r.push(rc);
        v.push(vc);
        for k in 0..k_total {
            let (u, h) = (self.input(x, k), self.duration(x, k));
            rc = rc + vc * h + u * (0.5 * h * h);
            vc += u * h;
            r.push(rc);
            v.push(vc);
        }
        (r, v)
    }

    /// Per-segment rollout from the waypoint state: returns node velocities and
    /// the end position of segment `n`.
    fn rollout(&self, x: &[f64], n: usize, vel: &mut Vec<Vec3>) -> Vec3 {
        let m = self.layout.per_segment();
        let mut r = self.waypoints[n];
        let mut v = self.waypoint_velocity(x, n);
        vel.clear();
        vel.push(v);
        for i in 0..m {
            let k = n * m + i;
            let (u, h) = (self.input(x, k), self.duration(x, k));
            r = r + v * h + u * (0.5 * h * h);
            v += u * h;
            vel.push(v);
        }
        r
    }

    /// Decision vector from interval inputs, durations and waypoint velocities.
    pub fn encode(&self, u: &[Vec3], dt: &[f64], v_wp: &[Vec3]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for k in 0..self.layout.intervals() {
            let b = self.block() * k;
            match self.mode {
                InputMode::Sphere => {
                    let n = u[k].norm();
                    if n > 1e-9 * self.u_max {
                        x[b] = atan2(u[k].y(), u[k].x());
                        x[b + 1] = acos(u[k].z() / n);
                    } else {
                        x[b + 1] = core::f64::consts::FRAC_PI_2;
                    }
                }
                InputMode::Relaxed => x[b..b + 3].copy_from_slice(&u[k].0),
            }
            x[self.s_index(k)] = sqrt(dt[k].max(0.0));
        }
        for n in 1..self.layout.waypoints.saturating_sub(1) {
            let i = self.v_index(n).unwrap();
            x[i..i + 3].copy_from_slice(&v_wp[n].0);
        }
        x
    }

    fn box_pair(&self, v: Vec3, g: &mut Vec<f64>) {
        if let Some(vb) = self.v_bar {
            for a in 0..3 {
                g.push(v[a] - vb);
                g.push(-v[a] - vb);
            }
        }
    }
}

fn box_weight(w: &[f64], at: &mut usize) -> Vec3 {
    let mut out = Vec3::ZERO;
    for a in 0..3 {
        out[a] = w[*at] - w[*at + 1];
        *at += 2;
    }
    out
}

impl ConstrainedProblem for MinTimeProblem {
    fn dim(&self) -> usize {
        self.v_offset() + 3 * self.layout.waypoints.saturating_sub(2)
    }

    fn n_eq(&self) -> usize {
        6 * self.layout.segments()
    }

    fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    fn evaluate(&self, x: &[f64], c: &mut Vec<f64>, g: &mut Vec<f64>) -> f64 {
        c.clear();
        g.clear();
        let n_wp = self.layout.waypoints;
        let mut vel = Vec::new();
        for n in 0..self.layout.segments() {
            let r_end = self.rollout(x, n, &mut vel);
            let dr = r_end - self.waypoints[n + 1];
            let dv = vel[vel.len() - 1] - self.waypoint_velocity(x, n + 1);
            c.extend_from_slice(&dr.0);
            c.extend_from_slice(&dv.0);
            for v in &vel[1..vel.len() - 1] {
                self.box_pair(*v, g);
            }
        }
        for n in 1..n_wp.saturating_sub(1) {
            let v = self.waypoint_velocity(x, n);
            self.box_pair(v, g);
            if let Some(vb) = self.v_blur {
                g.push((v.norm_squared() - vb * vb) / (2.0 * vb));
            }
        }
        for k in 0..self.layout.intervals() {
            let u = self.input(x, k);
            if let Some(uz) = self.u_z_min {
                g.push(uz - u.z());
            }
            if self.mode == InputMode::Relaxed {
                g.push((u.norm_squared() - self.u_max * self.u_max) / (2.0 * self.u_max));
            }
        }
        debug_assert_eq!(g.len(), self.n_ineq);
        (0..self.layout.intervals()).map(|k| self.duration(x, k)).sum()
    }

    fn vjp(&self, x: &[f64], wf: f64, wc: &[f64], wg: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|v| *v = 0.0);
        let m = self.layout.per_segment();
        let n_wp = self.layout.waypoints;
        let mut gi = 0;
        let mut vel = Vec::new();
        // adjoint of the input vector per interval, reduced to parameters below
        let mut u_bar = vec![Vec3::ZERO; self.layout.intervals()];
        let mut s_bar = vec![0.0; self.layout.intervals()];
        for n in 0..self.layout.segments() {
            self.rollout(x, n, &mut vel);
            let rb = Vec3::new(wc[6 * n], wc[6 * n + 1], wc[6 * n + 2]);
            let vb_end = Vec3::new(wc[6 * n + 3], wc[6 * n + 4], wc[6 * n + 5]);
            if let Some(i) = self.v_index(n + 1) {
                for a in 0..3 {
                    grad[i + a] -= vb_end[a];
                }
            }
            // box weights of interior nodes 1..m-1, in forward order
            let mut node_w = vec![Vec3::ZERO; m + 1];
            if self.v_bar.is_some() {
                for w in node_w.iter_mut().take(m).skip(1) {
                    *w = box_weight(wg, &mut gi);
                }
            }
            let mut vb = vb_end;
            for i in (0..m).rev() {
                let k = n * m + i;
                let (u, h) = (self.input(x, k), self.duration(x, k));
                let v_i = vel[i];
                // r_{i+1} = r_i + v_i h + u h²/2,  v_{i+1} = v_i + u h
                let hb = rb.dot(&(v_i + u * h)) + vb.dot(&u);
                u_bar[k] += rb * (0.5 * h * h) + vb * h;
                s_bar[k] += 2.0 * x[self.s_index(k)] * hb;
                vb = vb + rb * h + node_w[i];
                // rb unchanged: ∂r_{i+1}/∂r_i = I
            }
            if let Some(i) = self.v_index(n) {
                for a in 0..3 {
                    grad[i + a] += vb[a];
                }
            }
        }
        for n in 1..n_wp.saturating_sub(1) {
            let i = self.v_index(n).unwrap();
            if self.v_bar.is_some() {
                let w = box_weight(wg, &mut gi);
                for a in 0..3 {
                    grad[i + a] += w[a];
                }
            }
            if let Some(vb) = self.v_blur {
                let v = self.waypoint_velocity(x, n);
                for a in 0..3 {
                    grad[i + a] += wg[gi] * v[a] / vb;
                }
                gi += 1;
            }
        }
        for k in 0..self.layout.intervals() {
            let u = self.input(x, k);
            if self.u_z_min.is_some() {
                u_bar[k][2] -= wg[gi];
                gi += 1;
            }
            if self.mode == InputMode::Relaxed {
                u_bar[k] += u * (wg[gi] / self.u_max);
                gi += 1;
            }
        }
        debug_assert_eq!(gi, self.n_ineq);
        for k in 0..self.layout.intervals() {
            let si = self.s_index(k);
            grad[si] += s_bar[k] + wf * 2.0 * x[si];
            let b = self.block() * k;
            match self.mode {
                InputMode::Sphere => {
                    let (th, ph) = (x[b], x[b + 1]);
                    let um = self.u_max;
                    let d_th = Vec3::new(-sin(ph) * sin(th), sin(ph) * cos(th), 0.0) * um;
                    let d_ph = Vec3::new(cos(ph) * cos(th), cos(ph) * sin(th), -sin(ph)) * um;
                    grad[b] += u_bar[k].dot(&d_th);
                    grad[b + 1] += u_bar[k].dot(&d_ph);
                }
                InputMode::Relaxed => {
                    for a in 0..3 {
                        grad[b + a] += u_bar[k][a];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan() -> SurveyPlan {
        SurveyPlan::from_waypoints(vec![
            Vec3::ZERO,
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(10.0, 5.0, 0.0),
            Vec3::new(0.0, 5.0, 1.0),
        ])
        .unwrap()
    }

    fn check_vjp(p: &MinTimeProblem, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = p.dim();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let wc: Vec<f64> = (0..p.n_eq()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wg: Vec<f64> = (0..p.n_ineq()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scalar = |x: &[f64]| {
            let (mut c, mut g) = (Vec::new(), Vec::new());
            let f = p.evaluate(x, &mut c, &mut g);
            0.7 * f + c.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>()
                + g.iter().zip(&wg).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut grad = vec![0.0; n];
        p.vjp(&x, 0.7, &wc, &wg, &mut grad);
        for i in 0..n {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (scalar(&xp) - scalar(&xm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "i={i} fd={fd} ad={}", grad[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let params = PlannerParams {
            v_axis_max: 3.0,
            v_blur: 2.0,
            u_z_min: Some(-5.0),
            ..Default::default()
        };
        for (mode, s) in [(InputMode::Sphere, 1), (InputMode::Sphere, 3), (InputMode::Relaxed, 2)] {
            let p = MinTimeProblem::new(&plan(), &params, s, mode);
            check_vjp(&p, 7 + s as u64);
        }
    }

    #[test]
    fn encode_round_trip() {
        let params = PlannerParams::default();
        let p = MinTimeProblem::new(&plan(), &params, 1, InputMode::Sphere);
        let k = p.layout.intervals();
        let u: Vec<Vec3> = (0..k).map(|i| Vec3::new(1.0, i as f64, -2.0)).collect();
        let u_sphere: Vec<Vec3> = u.iter().map(|v| *v * (params.u_max / v.norm())).collect();
        let dt = vec![0.25; k];
        let vw = vec![Vec3::new(1.0, 2.0, 3.0); 4];
        let x = p.encode(&u, &dt, &vw);
        for i in 0..k {
            assert!((p.input(&x, i) - u_sphere[i]).norm() < 1e-12);
            assert!((p.duration(&x, i) - 0.25).abs() < 1e-15);
        }
        assert_eq!(p.waypoint_velocity(&x, 2), vw[2]);
        assert_eq!(p.waypoint_velocity(&x, 0), Vec3::ZERO);
    }
}
