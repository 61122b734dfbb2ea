//! Sampled temperature fields and the residual diagnostics shared by both solvers.

use crate::network::{CompatKind, End, ValidatedNetwork, VertexKind};
use crate::zeros::Zero;
use serde::Serialize;

/// Samples of one rod, in the rod's own coordinate. `q[j][i]` is the value at `(x[i], t[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RodField {
    pub rod: String,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// Magnitude of the discarded imaginary part (zero for the finite-difference solver).
    pub imag: Vec<Vec<f64>>,
}

/// Temperature and `∂ₓq` (rod's own coordinate) at one rod end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndSample {
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexReport {
    pub vertex: String,
    pub kind: CompatKind,
    /// Largest residual over the output times.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub sectors: Vec<String>,
    pub zeros: Vec<Zero>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub solver: String,
    pub configuration: String,
    pub mode: Option<String>,
    pub radius: Option<f64>,
    /// Largest |λ| reached on any contour ray.
    pub lambda_max: f64,
    pub nodes: usize,
    pub max_imag: f64,
    pub max_continuity: f64,
    pub max_flux: f64,
    pub max_robin: f64,
    /// Largest remaining tail estimate at points where the ray cap was hit.
    pub truncation_estimate: f64,
    pub truncated_points: usize,
    pub ill_conditioned_nodes: usize,
    pub zero_scan: Option<ScanSummary>,
    pub vertices: Vec<VertexReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub rods: Vec<RodField>,
    pub diagnostics: Diagnostics,
}

impl SolutionField {
    pub fn rod(&self, id: &str) -> Option<&RodField> {
        self.rods.iter().find(|r| r.rod == id)
    }

    /// Max and mean absolute difference over samples present in both fields at matching positions.
    pub fn compare(&self, other: &SolutionField) -> Option<(f64, f64)> {
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut n = 0usize;
        for a in &self.rods {
            let b = other.rod(&a.rod)?;
            if a.x.len() != b.x.len() || a.t.len() != b.t.len() {
                return None;
            }
            for (qa, qb) in a.q.iter().zip(&b.q) {
                for (u, v) in qa.iter().zip(qb) {
                    let d = (u - v).abs();
                    max = max.max(d);
                    sum += d;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (max, sum / n as f64))
    }
}

/// Output positions per rod (rod's own coordinate, indexed like the network's rods) and output times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleGrid {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl SampleGrid {
    /// `n` evenly spaced points per rod; semi-infinite rods are sampled on `[0, reach]`.
    pub fn uniform(net: &ValidatedNetwork, n: usize, reach: f64, t: Vec<f64>) -> Self {
        let n = n.max(2);
        let x = (0..net.rod_count())
            .map(|r| {
                let len = net.rod(r).length.finite().unwrap_or(reach);
                (0..n).map(|i| len * i as f64 / (n - 1) as f64).collect()
            })
            .collect();
        SampleGrid { x, t }
    }

    pub fn check(&self, net: &ValidatedNetwork) -> Result<(), String> {
        if self.x.len() != net.rod_count() {
            return Err(format!("grid lists {} rods, network has {}", self.x.len(), net.rod_count()));
        }
        for (r, xs) in self.x.iter().enumerate() {
            let rod = net.rod(r);
            let len = rod.length.finite().unwrap_or(f64::INFINITY);
            if let Some(bad) = xs.iter().find(|x| !x.is_finite() || **x < 0.0 || **x > len) {
                return Err(format!("x = {bad} lies outside rod {}", rod.id));
            }
        }
        if let Some(bad) = self.t.iter().find(|t| !t.is_finite() || **t < 0.0 || **t > net.horizon()) {
            return Err(format!("t = {bad} lies outside [0, {}]", net.horizon()));
        }
        Ok(())
    }
}

/// `d/ds` at `s = 0` from values at `s = 0, h, .., 4h` (fourth order).
pub fn one_sided_slope(v: [f64; 5], h: f64) -> f64 {
    (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
}

/// Value at `s = 0` of the interpolating polynomial through `(s_k, v_k)` (Neville).
pub fn extrapolate_to_zero(s: &[f64], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (s[i + k] * p[i] - s[i] * p[i + 1]) / (s[i + k] - s[i]);
        }
    }
    p[0]
}

/// Continuity, flux-balance and Robin residuals at every vertex; `ends(rod, end, j)` gives samples at time `t[j]`.
pub fn vertex_residuals(net: &ValidatedNetwork, t: &[f64], ends: &dyn Fn(usize, End, usize) -> Option<EndSample>) -> Vec<VertexReport> {
    let mut out = Vec::new();
    for v in 0..net.spec().vertices.len() {
        let vc = net.vertex(v);
        match &vc.kind {
            VertexKind::Interface => {
                let mut cont = 0.0f64;
                let mut flux = 0.0f64;
                for (j, _) in t.iter().enumerate() {
                    let samples: Vec<(f64, f64)> = net
                        .incident(v)
                        .iter()
                        .filter_map(|&(r, e)| {
                            let s = ends(r, e, j)?;
                            let sign = if e == End::Start { 1.0 } else { -1.0 };
                            Some((s.value, sign * net.rod(r).sigma.powi(2) * s.slope))
                        })
                        .collect();
                    if samples.is_empty() {
                        continue;
                    }
                    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
                    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                    cont = cont.max(hi - lo);
                    flux = flux.max(samples.iter().map(|s| s.1).sum::<f64>().abs());
                }
                out.push(VertexReport { vertex: vc.id.clone(), kind: CompatKind::Continuity, max_residual: cont });
                out.push(VertexReport { vertex: vc.id.clone(), kind: CompatKind::FluxBalance, max_residual: flux });
            }
            VertexKind::Robin(c) => {
                let mut worst = 0.0f64;
                for &(r, e) in net.incident(v) {
                    for (j, &tj) in t.iter().enumerate() {
                        if let Some(s) = ends(r, e, j) {
                            worst = worst.max((c.beta0 * s.value + c.beta1 * s.slope - c.data.eval(tj)).abs());
                        }
                    }
                }
                out.push(VertexReport { vertex: vc.id.clone(), kind: CompatKind::Robin, max_residual: worst });
            }
            VertexKind::AtInfinity => {}
        }
    }
    out
}

/// Fill the `max_*` residual summaries from per-vertex reports.
pub fn summarize(d: &mut Diagnostics) {
    let max_of = |k: CompatKind| d.vertices.iter().filter(|v| v.kind == k).map(|v| v.max_residual).fold(0.0, f64::max);
    d.max_continuity = max_of(CompatKind::Continuity);
    d.max_flux = max_of(CompatKind::FluxBalance);
    d.max_robin = max_of(CompatKind::Robin);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_is_exact_for_quartics() {
        let f = |s: f64| 1.0 - 2.0 * s + 3.0 * s * s - s.powi(3) + 0.5 * s.powi(4);
        let h = 0.1;
        let v = [f(0.0), f(h), f(2.0 * h), f(3.0 * h), f(4.0 * h)];
        assert!((one_sided_slope(v, h) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_reproduces_polynomials() {
        let s: Vec<f64> = (1..=6).map(|k| 0.04 * k as f64).collect();
        let v: Vec<f64> = s.iter().map(|x| 2.0 - x + 5.0 * x.powi(5)).collect();
        assert!((extrapolate_to_zero(&s, &v) - 2.0).abs() < 1e-12);
        let c: Vec<f64> = s.iter().map(|x| (std::f64::consts::FRAC_PI_2 * x).cos()).collect();
        assert!((extrapolate_to_zero(&s, &c) - 1.0).abs() < 1e-7);
    }
}
