//! Crank–Nicolson reference solver working directly with the vertex conditions.
//!
//! Each rod carries its own uniform grid. Rod-end values are vertex unknowns: one per interface
//! vertex (shared by every incident rod) and one per Robin vertex. Interior values are eliminated
//! rod by rod, leaving a small dense system for the vertex values at every step.

use crate::error::FdmError;
use crate::field::{summarize, vertex_residuals, Diagnostics, EndSample, RodField, SampleGrid, SolutionField};
use crate::network::{End, ValidatedNetwork, VertexKind};
use crate::transforms::HalfLineTransform;
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

/// Per-rod node counts, domain lengths and the time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmGrid {
    pub nodes: Vec<usize>,
    /// `L` for finite rods, the truncation point for semi-infinite ones.
    pub reach: Vec<f64>,
    pub dt: f64,
}

/// Truncation point `max(10, 6σ√T)` for semi-infinite rods.
pub fn default_reach(sigma: f64, horizon: f64) -> f64 {
    10f64.max(6.0 * sigma * horizon.sqrt())
}

impl FdmGrid {
    /// `n` nodes on every rod.
    pub fn uniform(net: &ValidatedNetwork, n: usize, dt: f64) -> Self {
        let reach: Vec<f64> = (0..net.rod_count()).map(|r| reach_of(net, r)).collect();
        FdmGrid { nodes: vec![n; reach.len()], reach, dt }
    }

    /// Node spacing close to `h` on every rod.
    pub fn with_spacing(net: &ValidatedNetwork, h: f64, dt: f64) -> Self {
        let reach: Vec<f64> = (0..net.rod_count()).map(|r| reach_of(net, r)).collect();
        let nodes = reach.iter().map(|l| (l / h).ceil() as usize + 1).collect();
        FdmGrid { nodes, reach, dt }
    }

    fn check(&self, net: &ValidatedNetwork) -> Result<(), FdmError> {
        if self.nodes.len() != net.rod_count() || self.reach.len() != net.rod_count() {
            return Err(FdmError::InvalidGrid("one node count and one reach per rod required".into()));
        }
        if let Some(n) = self.nodes.iter().find(|&&n| n < 5) {
            return Err(FdmError::InvalidGrid(format!("{n} nodes on a rod, at least 5 needed")));
        }
        if !(self.dt > 0.0 && self.dt <= net.horizon() / 100.0) {
            return Err(FdmError::InvalidGrid(format!("time step {} must lie in (0, T/100]", self.dt)));
        }
        Ok(())
    }
}

fn reach_of(net: &ValidatedNetwork, r: usize) -> f64 {
    let rod = net.rod(r);
    rod.length.finite().unwrap_or_else(|| default_reach(rod.sigma, net.horizon()))
}

/// Interior operator of one rod: `(1+μ)` on the diagonal, `-μ/2` beside it.
struct RodOp {
    h: f64,
    mu: f64,
    /// Thomas elimination factors.
    cp: Vec<f64>,
    den: Vec<f64>,
    /// Responses to unit values at the start and at the finish.
    p: Vec<f64>,
    q: Vec<f64>,
}

impl RodOp {
    fn new(n: usize, h: f64, mu: f64) -> Self {
        let m = n - 2;
        let (a, d) = (-0.5 * mu, 1.0 + mu);
        let mut cp = vec![0.0; m];
        let mut den = vec![0.0; m];
        for i in 0..m {
            den[i] = d - if i > 0 { a * cp[i - 1] } else { 0.0 };
            cp[i] = a / den[i];
        }
        let mut op = RodOp { h, mu, cp, den, p: vec![0.0; m], q: vec![0.0; m] };
        let mut p = vec![0.0; m];
        p[0] = 1.0;
        op.solve(&mut p);
        let mut q = vec![0.0; m];
        q[m - 1] = 1.0;
        op.solve(&mut q);
        op.p = p;
        op.q = q;
        op
    }

    fn solve(&self, b: &mut [f64]) {
        let a = -0.5 * self.mu;
        let m = b.len();
        b[0] /= self.den[0];
        for i in 1..m {
            b[i] = (b[i] - a * b[i - 1]) / self.den[i];
        }
        for i in (0..m - 1).rev() {
            b[i] -= self.cp[i] * b[i + 1];
        }
    }

    /// `∂ₓu` at an end as `(coefficient of z_start, coefficient of z_finish, constant)` given `y = T⁻¹ rhs`.
    fn end_slope(&self, end: End, y: &[f64]) -> (f64, f64, f64) {
        let k = 0.5 * self.mu;
        let s = 2.0 * self.h;
        match end {
            End::Start => ((-3.0 + k * (4.0 * self.p[0] - self.p[1])) / s, k * (4.0 * self.q[0] - self.q[1]) / s, (4.0 * y[0] - y[1]) / s),
            End::Finish => {
                let l = y.len() - 1;
                (
                    -k * (4.0 * self.p[l] - self.p[l - 1]) / s,
                    (3.0 - k * (4.0 * self.q[l] - self.q[l - 1])) / s,
                    -(4.0 * y[l] - y[l - 1]) / s,
                )
            }
        }
    }
}

struct State<'a> {
    net: &'a ValidatedNetwork,
    grid: &'a FdmGrid,
    /// Vertex unknown index, `None` at infinity.
    unknown: Vec<Option<usize>>,
    u: Vec<Vec<f64>>,
}

impl State<'_> {
    fn end_unknowns(&self, r: usize) -> (Option<usize>, Option<usize>) {
        let (a, b) = self.net.rod_ends(r);
        (self.unknown[a], self.unknown[b])
    }

    /// Advance `steps` steps of size `dt` from time `t0`; returns the largest far-field value seen on semi-infinite rods.
    fn advance(&mut self, t0: f64, dt: f64, steps: usize) -> Result<f64, FdmError> {
        let net = self.net;
        let ops: Vec<RodOp> = (0..net.rod_count())
            .map(|r| {
                let n = self.grid.nodes[r];
                let h = self.grid.reach[r] / (n - 1) as f64;
                RodOp::new(n, h, net.rod(r).sigma.powi(2) * dt / (h * h))
            })
            .collect();
        let nz = self.unknown.iter().flatten().count();
        let zero_y: Vec<Vec<f64>> = ops.iter().map(|o| vec![0.0; o.p.len()]).collect();
        let (k, _) = self.vertex_rows(&ops, &zero_y, t0);
        let lu = k.lu();
        if nz > 0 && lu.determinant().abs() < 1e-300 {
            return Err(FdmError::LinearSolveFailure("singular vertex system".into()));
        }
        let mut far_field = 0.0f64;
        for step in 1..=steps {
            let t1 = t0 + step as f64 * dt;
            let mut ys = Vec::with_capacity(ops.len());
            for (r, op) in ops.iter().enumerate() {
                let u = &self.u[r];
                let mut y: Vec<f64> = (1..u.len() - 1).map(|i| (1.0 - op.mu) * u[i] + 0.5 * op.mu * (u[i - 1] + u[i + 1])).collect();
                op.solve(&mut y);
                ys.push(y);
            }
            let (_, c) = self.vertex_rows(&ops, &ys, t1);
            let z = if nz > 0 {
                lu.solve(&c).ok_or_else(|| FdmError::LinearSolveFailure(format!("vertex solve at t = {t1}")))?
            } else {
                DVector::zeros(0)
            };
            for (r, op) in ops.iter().enumerate() {
                let (ia, ib) = self.end_unknowns(r);
                let za = ia.map(|i| z[i]).unwrap_or(0.0);
                let zb = ib.map(|i| z[i]).unwrap_or(0.0);
                let u = &mut self.u[r];
                let n = u.len();
                u[0] = za;
                u[n - 1] = zb;
                for i in 0..n - 2 {
                    u[i + 1] = ys[r][i] + 0.5 * op.mu * (za * op.p[i] + zb * op.q[i]);
                }
                if net.rod(r).length.is_infinite() {
                    let from = (0.8 * (n - 1) as f64).ceil() as usize;
                    far_field = u[from..].iter().fold(far_field, |m, v| m.max(v.abs()));
                }
            }
        }
        Ok(far_field)
    }

    /// Vertex system `K z = c` at time `t`, given the eliminated interior responses `ys`.
    fn vertex_rows(&self, ops: &[RodOp], ys: &[Vec<f64>], t: f64) -> (DMatrix<f64>, DVector<f64>) {
        let net = self.net;
        let nz = self.unknown.iter().flatten().count();
        let mut k = DMatrix::zeros(nz, nz);
        let mut c = DVector::zeros(nz);
        for (v, idx) in self.unknown.iter().enumerate() {
            let Some(row) = *idx else { continue };
            let add_slope = |r: usize, e: End, w: f64, k: &mut DMatrix<f64>, c: &mut DVector<f64>| {
                let (ca, cb, c0) = ops[r].end_slope(e, &ys[r]);
                let (ia, ib) = self.end_unknowns(r);
                if let Some(i) = ia {
                    k[(row, i)] += w * ca;
                }
                if let Some(i) = ib {
                    k[(row, i)] += w * cb;
                }
                c[row] -= w * c0;
            };
            match &net.vertex(v).kind {
                VertexKind::Interface => {
                    for &(r, e) in net.incident(v) {
                        let sign = if e == End::Start { 1.0 } else { -1.0 };
                        add_slope(r, e, sign * net.rod(r).sigma.powi(2), &mut k, &mut c);
                    }
                }
                VertexKind::Robin(cond) => {
                    k[(row, row)] += cond.beta0;
                    for &(r, e) in net.incident(v) {
                        add_slope(r, e, cond.beta1, &mut k, &mut c);
                    }
                    c[row] += cond.data.eval(t);
                }
                VertexKind::AtInfinity => {}
            }
        }
        (k, c)
    }

    fn sample(&self, r: usize, x: f64) -> f64 {
        let u = &self.u[r];
        let n = u.len();
        let h = self.grid.reach[r] / (n - 1) as f64;
        let s = x / h;
        let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        (i0..i0 + 4)
            .map(|i| {
                let li: f64 = (i0..i0 + 4).filter(|&j| j != i).map(|j| (s - j as f64) / (i as f64 - j as f64)).product();
                li * u[i]
            })
            .sum()
    }

    fn end_sample(&self, r: usize, e: End) -> EndSample {
        let u = &self.u[r];
        let n = u.len();
        let h = self.grid.reach[r] / (n - 1) as f64;
        match e {
            End::Start => EndSample { value: u[0], slope: (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h) },
            End::Finish => EndSample { value: u[n - 1], slope: (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h) },
        }
    }
}

/// March the network from t = 0 through the output times of `out`, sampling by cubic interpolation.
pub fn solve_fdm(net: &ValidatedNetwork, grid: &FdmGrid, out: &SampleGrid) -> Result<SolutionField, FdmError> {
    grid.check(net)?;
    out.check(net).map_err(FdmError::InvalidGrid)?;
    for (r, xs) in out.x.iter().enumerate() {
        if let Some(x) = xs.iter().find(|&&x| x > grid.reach[r]) {
            return Err(FdmError::InvalidGrid(format!("x = {x} beyond the truncated rod {}", net.rod(r).id)));
        }
    }
    let mut order: Vec<usize> = (0..out.t.len()).collect();
    order.sort_by(|&a, &b| out.t[a].total_cmp(&out.t[b]));

    let mut unknown = vec![None; net.spec().vertices.len()];
    let mut nz = 0;
    for (v, slot) in unknown.iter_mut().enumerate() {
        if !matches!(net.vertex(v).kind, VertexKind::AtInfinity) {
            *slot = Some(nz);
            nz += 1;
        }
    }
    let u = (0..net.rod_count())
        .map(|r| {
            let tr = HalfLineTransform::new(&net.datum(r).profile, net.rod(r).length.finite());
            let n = grid.nodes[r];
            let h = grid.reach[r] / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| tr.value(i as f64 * h)).collect();
            if net.rod(r).length.is_infinite() {
                v[n - 1] = 0.0;
            }
            v
        })
        .collect();
    let mut st = State { net, grid, unknown, u };

    let scale = st.u.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut far_field = 0.0f64;
    let mut q = vec![vec![Vec::new(); out.t.len()]; net.rod_count()];
    let mut ends = HashMap::new();
    let mut now = 0.0;
    for &j in &order {
        let t = out.t[j];
        if t > now {
            let steps = ((t - now) / grid.dt - 1e-9).ceil().max(1.0) as usize;
            far_field = far_field.max(st.advance(now, (t - now) / steps as f64, steps)?);
            now = t;
        }
        for r in 0..net.rod_count() {
            q[r][j] = out.x[r].iter().map(|&x| st.sample(r, x)).collect();
            ends.insert((r, End::Start, j), st.end_sample(r, End::Start));
            if net.rod(r).length.finite().is_some() {
                ends.insert((r, End::Finish, j), st.end_sample(r, End::Finish));
            }
        }
    }
    for r in 0..net.rod_count() {
        if net.rod(r).length.is_infinite() && far_field > 1e-6 * scale {
            return Err(FdmError::TruncationTooSmall { rod: net.rod(r).id.clone(), influence: far_field });
        }
    }

    let rods = (0..net.rod_count())
        .map(|r| RodField {
            rod: net.rod(r).id.clone(),
            x: out.x[r].clone(),
            t: out.t.clone(),
            imag: vec![vec![0.0; out.x[r].len()]; out.t.len()],
            q: std::mem::take(&mut q[r]),
        })
        .collect();
    let mut d = Diagnostics {
        solver: "fdm".into(),
        configuration: crate::network::classify_configuration(net).name().into(),
        nodes: grid.nodes.iter().sum(),
        ..Default::default()
    };
    d.vertices = vertex_residuals(net, &out.t, &|r, e, j| ends.get(&(r, e, j)).copied());
    summarize(&mut d);
    d.notes.push(format!("time step {}, far-field magnitude {far_field:.3e}", grid.dt));
    Ok(SolutionField { rods, diagnostics: d })
}
