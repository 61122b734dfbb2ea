//! Integration contours in the spectral plane and evaluation of the solution integrals.
//!
//! On a finite rod the solution is
//!
//! ```text
//! q(x,t) = (1/2π)∫_ℝ e^{iλx - σ²λ²t} q̂₀(λ) dλ
//!        - (1/2π)∫_{∂D⁺} e^{iλx/σ - λ²t} (iλg₀ + σg₁) dλ
//!        - (1/2π)∫_{∂D⁻} e^{iλ(x-L)/σ - λ²t} (iλh₀ + σh₁) dλ
//! ```
//!
//! The last integral is mapped onto `∂D⁺` by `λ ↦ -λ`, so one DtN solve per node serves both
//! boundary terms. Semi-infinite rods have no `h` term.

use crate::dtn::{solve_premultiplied, Balance, Layout, Problem, ProblemRod, RhsSpec, SpectralSystem, TimeVariant};
use crate::error::{ContourError, ZeroScanError};
use crate::field::{extrapolate_to_zero, one_sided_slope, summarize, vertex_residuals, Diagnostics, EndSample, RodField, SampleGrid, ScanSummary, SolutionField};
use crate::network::{classify_configuration, ConfigClass, End, ValidatedNetwork, VertexKind};
use crate::quadrature::PanelRule;
use crate::zeros::{zero_scan, Region, ZeroScanOptions};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ContourMode {
    /// Rays along `arg λ = π/4, 3π/4`.
    Paper,
    /// Rays along `arg λ = π/4 - δ, 3π/4 + δ`, where `e^{-λ²t}` decays.
    Deformed { delta: f64 },
}

impl ContourMode {
    pub fn deformed() -> Self {
        ContourMode::Deformed { delta: PI / 8.0 }
    }

    pub fn delta(&self) -> f64 {
        match self {
            ContourMode::Paper => 0.0,
            ContourMode::Deformed { delta } => *delta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ContourMode::Paper => "paper",
            ContourMode::Deformed { .. } => "deformed",
        }
    }

    fn check(&self) -> Result<(), ContourError> {
        match *self {
            ContourMode::Deformed { delta } if !(delta > 0.0 && delta < FRAC_PI_4) => Err(ContourError::InvalidDeformation { delta }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ContourKind {
    RealLine,
    BoundaryDPlus { r: f64 },
    BoundaryDMinus { r: f64 },
    DeformedRays { r: f64, delta: f64, lower: bool },
}

/// One oriented integration path, truncated at `|λ| = truncation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPath {
    pub kind: ContourKind,
    pub truncation: f64,
}

impl ContourPath {
    /// Arguments of the incoming and the outgoing ray.
    pub fn ray_angles(&self) -> Option<(f64, f64)> {
        let (delta, lower) = match self.kind {
            ContourKind::RealLine => return None,
            ContourKind::BoundaryDPlus { .. } => (0.0, false),
            ContourKind::BoundaryDMinus { .. } => (0.0, true),
            ContourKind::DeformedRays { delta, lower, .. } => (delta, lower),
        };
        let (a_in, a_out) = (3.0 * FRAC_PI_4 + delta, FRAC_PI_4 - delta);
        Some(if lower { (a_in + PI, a_out + PI) } else { (a_in, a_out) })
    }

    pub fn radius(&self) -> f64 {
        match self.kind {
            ContourKind::RealLine => 0.0,
            ContourKind::BoundaryDPlus { r } | ContourKind::BoundaryDMinus { r } | ContourKind::DeformedRays { r, .. } => r,
        }
    }

    /// `s ↦ λ(s)`: incoming ray for `s < 0`, arc `|λ| = R` for `0 ≤ s ≤ 1`, outgoing ray for `s > 1`.
    pub fn point(&self, s: f64) -> C64 {
        let Some((a_in, a_out)) = self.ray_angles() else {
            return C64::new(s, 0.0);
        };
        let r = self.radius();
        if s < 0.0 {
            C64::from_polar(r - s, a_in)
        } else if s <= 1.0 {
            C64::from_polar(r, a_in + s * (a_out - a_in))
        } else {
            C64::from_polar(r + s - 1.0, a_out)
        }
    }

    /// Composite Gauss–Legendre nodes `λ` and weights `dλ`, panels no longer than `max_panel`.
    pub fn nodes(&self, rule: &PanelRule, max_panel: f64) -> Vec<(C64, C64)> {
        let cap = self.truncation;
        let split = |a: f64, b: f64| {
            let n = ((b - a).abs() / max_panel).ceil().max(1.0) as usize;
            (0..n).map(move |k| (a + (b - a) * k as f64 / n as f64, a + (b - a) * (k + 1) as f64 / n as f64))
        };
        let mut out = Vec::new();
        let Some((a_in, a_out)) = self.ray_angles() else {
            for (a, b) in split(-cap, cap) {
                out.extend(rule.map(a, b).map(|(x, w)| (C64::new(x, 0.0), C64::new(w, 0.0))));
            }
            return out;
        };
        let r = self.radius();
        let e_in = C64::from_polar(1.0, a_in);
        for (a, b) in split(cap, r) {
            out.extend(rule.map(a, b).map(|(s, w)| (e_in * s, e_in * w)));
        }
        if r > 0.0 {
            for (a, b) in split(0.0, r * (a_out - a_in).abs()) {
                let to_angle = |s: f64| a_in + (a_out - a_in).signum() * s / r;
                out.extend(rule.map(a, b).map(|(s, w)| {
                    let lam = C64::from_polar(r, to_angle(s));
                    (lam, I * lam * (a_out - a_in).signum() * w / r)
                }));
            }
        }
        let e_out = C64::from_polar(1.0, a_out);
        for (a, b) in split(r, cap) {
            out.extend(rule.map(a, b).map(|(s, w)| (e_out * s, e_out * w)));
        }
        out
    }
}

/// The real line plus the boundary of `D_R⁺` (and of `D_R⁻` when rods are finite).
pub fn build_contours(class: &ConfigClass, r: f64, mode: ContourMode, truncation: f64) -> Result<Vec<ContourPath>, ContourError> {
    mode.check()?;
    let finite = match class {
        ConfigClass::SemiInfiniteStar { .. } => false,
        ConfigClass::ParallelRods { .. } | ConfigClass::FiniteStar { .. } => true,
        ConfigClass::Unsupported { reason } => return Err(ContourError::Unsupported(reason.clone())),
    };
    let side = |lower: bool| match mode {
        ContourMode::Paper if lower => ContourKind::BoundaryDMinus { r },
        ContourMode::Paper => ContourKind::BoundaryDPlus { r },
        ContourMode::Deformed { delta } => ContourKind::DeformedRays { r, delta, lower },
    };
    let mut out = vec![ContourPath { kind: ContourKind::RealLine, truncation }, ContourPath { kind: side(false), truncation }];
    if finite {
        out.push(ContourPath { kind: side(true), truncation });
    }
    Ok(out)
}

/// `[(m-1) log 2 + log(8 + m(m-1))] / (√2 min L/σ)`: no determinant zeros of the parallel system beyond it.
pub fn parallel_radius(problem: &Problem) -> f64 {
    let m = problem.m() as f64;
    ((m - 1.0) * 2f64.ln() + (8.0 + m * (m - 1.0)).ln()) / (2f64.sqrt() * problem.min_travel())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusChoice {
    pub r: f64,
    pub formula: Option<f64>,
    pub scan: Option<ScanSummary>,
}

/// Zeros of the balanced determinant in the closed wedges `π/4 - δ ≤ arg(±λ) ≤ 3π/4 + δ`.
pub fn scan_wedges(problem: &Problem, delta: f64, opts: ZeroScanOptions) -> Result<ScanSummary, ContourError> {
    let sys = SpectralSystem::new(problem, RhsSpec::default())?;
    let reach = 100.0 * (1.0f64).max(1.0 / problem.min_travel());
    let mut summary = ScanSummary { sectors: Vec::new(), zeros: Vec::new(), evaluations: 0 };
    for lower in [false, true] {
        let balance = if lower { Balance::Lower } else { Balance::Upper };
        let det = |z: C64| sys.balanced_determinant(z, balance);
        let mut failure = None;
        for attempt in 0..4 {
            let k = attempt as f64;
            let pad = 1e-3 * (1.0 + 0.77 * k);
            let r_min = 1e-2 * (1.0 + 0.31 * k) * problem.min_travel().min(1.0);
            let (a, b) = (FRAC_PI_4 - delta - pad, 3.0 * FRAC_PI_4 + delta + pad);
            let theta = if lower { (a + PI, b + PI) } else { (a, b) };
            let region = Region::Sector { r: (r_min, reach), theta };
            match zero_scan(det, region, opts) {
                Ok(rep) => {
                    summary.sectors.push(format!("r in [{r_min:.4}, {reach:.1}], arg in [{:.6}, {:.6}]", theta.0, theta.1));
                    summary.zeros.extend(rep.zeros);
                    summary.evaluations += rep.evaluations;
                    failure = None;
                    break;
                }
                Err(e @ ZeroScanError::BoundaryZeroSuspected { .. }) => failure = Some(e),
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(e) = failure {
            return Err(e.into());
        }
    }
    Ok(summary)
}

/// Arc radius for the configuration; `base` is the floor used for finite stars.
pub fn compute_radius(problem: &Problem, mode: ContourMode, base: f64, opts: ZeroScanOptions) -> Result<RadiusChoice, ContourError> {
    mode.check()?;
    let beyond = |s: &ScanSummary| s.zeros.iter().map(|z| 1.1 * z.location.norm()).fold(0.0, f64::max);
    match problem.layout {
        Layout::SemiInfinite => Ok(RadiusChoice { r: 0.0, formula: None, scan: None }),
        Layout::Parallel => {
            let f = parallel_radius(problem);
            if mode == ContourMode::Paper {
                return Ok(RadiusChoice { r: f, formula: Some(f), scan: None });
            }
            let s = scan_wedges(problem, mode.delta(), opts)?;
            Ok(RadiusChoice { r: f.max(beyond(&s)), formula: Some(f), scan: Some(s) })
        }
        Layout::FiniteStar { .. } => {
            let s = scan_wedges(problem, mode.delta(), opts)?;
            Ok(RadiusChoice { r: base.max(beyond(&s)), formula: None, scan: Some(s) })
        }
    }
}

/// Arc radius used in paper mode.
pub fn compute_r(net: &ValidatedNetwork) -> Result<f64, ContourError> {
    if let ConfigClass::Unsupported { reason } = classify_configuration(net) {
        return Err(ContourError::Unsupported(reason));
    }
    let problem = Problem::new(net)?;
    Ok(compute_radius(&problem, ContourMode::Paper, 1.0, ZeroScanOptions::default())?.r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub mode: ContourMode,
    pub variant: TimeVariant,
    /// Gauss–Legendre points per panel.
    pub gl_points: usize,
    /// Oscillation periods per panel.
    pub panel_waves: f64,
    /// Ray tails are cut when their estimate falls below this times the data scale.
    pub tail_tol: f64,
    pub lambda_cap: f64,
    /// Maximum number of spectral solves for one output time.
    pub node_budget: usize,
    pub endpoint_step: f64,
    pub endpoint_points: usize,
    /// Evaluate continuity, flux and Robin residuals at the vertices.
    pub vertex_diagnostics: bool,
    pub base_radius: f64,
    pub scan: ZeroScanOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: ContourMode::deformed(),
            variant: TimeVariant::AtT,
            gl_points: 20,
            panel_waves: 2.0,
            tail_tol: 1e-11,
            lambda_cap: 5000.0,
            node_budget: 1_000_000,
            endpoint_step: 0.04,
            endpoint_points: 6,
            vertex_diagnostics: true,
            base_radius: 1.0,
            scan: ZeroScanOptions::default(),
        }
    }
}

/// Work done for one batch of points.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PassStats {
    pub nodes: usize,
    pub lambda_max: f64,
    pub truncation: f64,
    pub truncated_points: usize,
    pub ill_conditioned: usize,
}

impl PassStats {
    fn absorb(&mut self, o: PassStats) {
        self.nodes += o.nodes;
        self.lambda_max = self.lambda_max.max(o.lambda_max);
        self.truncation = self.truncation.max(o.truncation);
        self.truncated_points += o.truncated_points;
        self.ill_conditioned += o.ill_conditioned;
    }
}

fn extent(rod: &ProblemRod) -> f64 {
    if let Some(l) = rod.length {
        return l;
    }
    let mut peak = 0.0f64;
    let mut last = 0.0;
    let mut x = 0.0;
    while x <= 1e4 {
        let v = rod.transform.value(x).abs();
        peak = peak.max(v);
        if v > 1e-17 * peak {
            last = x;
        }
        x += if x < 100.0 { 0.05 } else { 1.0 };
    }
    last.max(1.0)
}

/// `∫|q₀|`, which bounds `|q̂₀|` on the real line.
fn mass(rod: &ProblemRod, reach: f64) -> f64 {
    let n = 4000;
    let h = reach / n as f64;
    (0..=n).map(|k| rod.transform.value(k as f64 * h).abs()).sum::<f64>() * h
}

/// Gaussian-damped Fourier inversion `(1/2π)∫ e^{iλx - σ²λ²t} q̂₀(λ) dλ` at internal coordinates `xs`.
pub fn real_line_values(rod: &ProblemRod, xs: &[f64], t: f64, tol: f64, rule: &PanelRule, waves: f64) -> Result<Vec<f64>, ContourError> {
    if t == 0.0 {
        return Ok(xs.iter().map(|&x| rod.transform.value(x)).collect());
    }
    if rod.transform.is_zero() || xs.is_empty() {
        return Ok(vec![0.0; xs.len()]);
    }
    let reach = extent(rod);
    let m = mass(rod, reach) + 1e-300;
    let s2t = rod.sigma * rod.sigma * t;
    let cap = ((m / tol).ln().max(1.0) / s2t).sqrt();
    let nu = xs.iter().fold(0.0f64, |a, &x| a.max(x)) + reach;
    let width = (waves * 2.0 * PI / nu).min(1.0 / s2t.sqrt()).min(cap / 8.0);
    let mut acc = vec![0.0; xs.len()];
    let mut a = 0.0;
    while a < cap {
        let b = (a + width).min(cap);
        for (lam, w) in rule.map(a, b) {
            let q = rod.transform.eval(C64::new(lam, 0.0))? * (w * (-s2t * lam * lam).exp());
            for (s, &x) in acc.iter_mut().zip(xs) {
                *s += (C64::from_polar(1.0, lam * x) * q).re;
            }
        }
        a = b;
    }
    // the negative half is the conjugate of the positive one
    Ok(acc.into_iter().map(|s| s / PI).collect())
}

/// Real-line term at one point of a rod (internal coordinate).
pub fn real_line_term(rod: &ProblemRod, x: f64, t: f64) -> Result<C64, ContourError> {
    let rule = PanelRule::new(20);
    Ok(C64::new(real_line_values(rod, &[x], t, 1e-13, &rule, 2.0)?[0], 0.0))
}

/// Largest of `|q₀|` and `|f|` over the data, the reference for absolute tolerances.
fn data_scale(problem: &Problem) -> f64 {
    let mut s = 0.0f64;
    for rod in &problem.rods {
        let reach = extent(rod);
        for k in 0..=2000 {
            s = s.max(rod.transform.value(reach * k as f64 / 2000.0).abs());
        }
        if let Some(c) = &rod.far {
            for k in 0..=400 {
                s = s.max(c.data_at(problem.horizon * k as f64 / 400.0).abs());
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct Point {
    rod: usize,
    x: f64,
}

#[derive(Debug, Clone, Copy)]
struct Track {
    g: f64,
    h: Option<f64>,
    quiet: u8,
    done: bool,
    tail: f64,
}

/// The transform-method solver for one network, with the arc radius fixed at construction.
pub struct UtmSolver<'n> {
    net: &'n ValidatedNetwork,
    problem: Problem,
    opts: EvalOptions,
    mode: ContourMode,
    radius: RadiusChoice,
    scale: f64,
    rule: PanelRule,
    notes: Vec<String>,
}

impl<'n> UtmSolver<'n> {
    pub fn new(net: &'n ValidatedNetwork, opts: EvalOptions) -> Result<Self, ContourError> {
        opts.mode.check()?;
        if let ConfigClass::Unsupported { reason } = classify_configuration(net) {
            return Err(ContourError::Unsupported(reason));
        }
        if opts.variant == TimeVariant::AtHorizon && opts.mode != ContourMode::Paper {
            return Err(ContourError::Unsupported("horizon-referenced transforms grow on deformed rays; use paper mode".into()));
        }
        let problem = Problem::new(net)?;
        let mut mode = opts.mode;
        let mut notes = Vec::new();
        if mode != ContourMode::Paper && problem.rods.iter().any(|r| r.length.is_none() && !(r.transform.im_limit() > 0.0)) {
            notes.push("initial transform not analytic across the deformed rays; using paper contours".into());
            mode = ContourMode::Paper;
        }
        let radius = match compute_radius(&problem, mode, opts.base_radius, opts.scan) {
            Ok(r) => r,
            Err(ContourError::ZeroScan(e)) if mode != ContourMode::Paper => {
                notes.push(format!("deformed contour not certified ({e}); using paper contours"));
                mode = ContourMode::Paper;
                compute_radius(&problem, mode, opts.base_radius, opts.scan)?
            }
            Err(e) => return Err(e),
        };
        log::debug!("radius {} in {} mode", radius.r, mode.name());
        let scale = data_scale(&problem);
        let rule = PanelRule::new(opts.gl_points);
        Ok(UtmSolver { net, problem, opts, mode, radius, scale, rule, notes })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Mode actually used (deformed requests fall back to paper when they cannot be certified).
    pub fn mode(&self) -> ContourMode {
        self.mode
    }

    pub fn radius(&self) -> &RadiusChoice {
        &self.radius
    }

    pub fn contours(&self) -> Result<Vec<ContourPath>, ContourError> {
        build_contours(&self.problem.class, self.radius.r, self.mode, self.opts.lambda_cap)
    }

    /// Complex solution values at `(network rod index, own coordinate)` points strictly inside their rods.
    pub fn evaluate_points(&self, points: &[(usize, f64)], t: f64) -> Result<(Vec<C64>, PassStats), ContourError> {
        let mut pts = Vec::with_capacity(points.len());
        for &(r, x) in points {
            let p = self.problem.position(r).ok_or_else(|| ContourError::InvalidGrid(format!("rod index {r} out of range")))?;
            pts.push(Point { rod: p, x: self.problem.rods[p].flip(x) });
        }
        let mut stats = PassStats::default();
        if t == 0.0 {
            return Ok((pts.iter().map(|p| C64::new(self.problem.rods[p.rod].transform.value(p.x), 0.0)).collect(), stats));
        }
        let mut out = vec![C64::new(0.0, 0.0); pts.len()];
        if self.scale == 0.0 {
            return Ok((out, stats));
        }
        let tol = 1e-13 * self.scale;
        for (p, rod) in self.problem.rods.iter().enumerate() {
            let idx: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].rod == p).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| pts[i].x).collect();
            let vals = real_line_values(rod, &xs, t, tol, &self.rule, self.opts.panel_waves)?;
            for (i, v) in idx.into_iter().zip(vals) {
                out[i] += v;
            }
        }
        let sys = SpectralSystem::new(&self.problem, RhsSpec::default().with_variant(self.opts.variant))?;
        let contour = self.boundary_terms(&sys, &pts, t, &mut stats)?;
        for (o, c) in out.iter_mut().zip(contour) {
            *o += c;
        }
        Ok((out, stats))
    }

    fn boundary_terms(&self, sys: &SpectralSystem, pts: &[Point], t: f64, stats: &mut PassStats) -> Result<Vec<C64>, ContourError> {
        let rods = &self.problem.rods;
        let delta = self.mode.delta();
        let (a_in, a_out) = (3.0 * FRAC_PI_4 + delta, FRAC_PI_4 - delta);
        let r = self.radius.r;
        let waves = self.opts.panel_waves;
        let tol = self.opts.tail_tol * self.scale;
        let t_eff = match self.opts.variant {
            TimeVariant::AtT => t,
            TimeVariant::AtHorizon => t.max(self.problem.horizon - t),
        };
        let gauss = self.mode != ContourMode::Paper && !self.problem.has_forcing();
        let (sin_t, cos_t) = (a_out.sin(), a_out.cos());
        let chirp = (2.0 * a_out).sin().abs();
        let damp = (2.0 * a_out).cos();
        let travels: Vec<f64> = rods.iter().filter_map(|r| r.length.map(|l| l / r.sigma)).collect();
        let max_travel = travels.iter().fold(0.0f64, |a, &b| a.max(b));
        let rho_ref = 1.0f64.max(1.0 / self.problem.min_travel());

        let mut tracks: Vec<Track> = pts
            .iter()
            .map(|p| {
                let rod = &rods[p.rod];
                Track { g: p.x / rod.sigma, h: rod.length.map(|l| (l - p.x) / rod.sigma), quiet: 0, done: false, tail: 0.0 }
            })
            .collect();
        let mut acc = vec![C64::new(0.0, 0.0); pts.len()];
        let inv = 1.0 / (2.0 * PI);

        // one spectral solve feeds every active point; returns the panel magnitudes of the g and h integrands
        let node = |lam: C64, dl: C64, active: &[usize], acc: &mut [C64], mags: &mut [(f64, f64)], stats: &mut PassStats| -> Result<(), ContourError> {
            stats.nodes += 1;
            if stats.nodes > self.opts.node_budget {
                return Err(ContourError::TruncationBudgetExceeded { nodes: stats.nodes });
            }
            let v = solve_premultiplied(sys, lam, t)?;
            if v.ill_conditioned {
                stats.ill_conditioned += 1;
            }
            for (k, &i) in active.iter().enumerate() {
                let p = pts[i];
                let rod = &rods[p.rod];
                let g = -inv * (I * lam * (p.x / rod.sigma)).exp() * v.g_combination(p.rod, rod.sigma);
                acc[i] += g * dl;
                mags[k].0 = mags[k].0.max(g.norm());
                if let Some(l) = rod.length {
                    let h = inv * (I * lam * ((l - p.x) / rod.sigma)).exp() * v.h_combination(p.rod, rod.sigma);
                    acc[i] += h * dl;
                    mags[k].1 = mags[k].1.max(h.norm());
                }
            }
            Ok(())
        };

        let all: Vec<usize> = (0..pts.len()).collect();
        let mut mags = vec![(0.0, 0.0); pts.len()];
        if r > 0.0 {
            let spatial = tracks.iter().map(|k| k.g.max(k.h.unwrap_or(0.0))).fold(0.0, f64::max);
            let nu = r * (spatial + 2.0 * max_travel) + 2.0 * r * r * t_eff;
            let span = a_in - a_out;
            let panels = ((span * nu / (2.0 * PI * waves)).ceil() as usize).max(2);
            for k in 0..panels {
                let a = a_in - span * k as f64 / panels as f64;
                let b = a_in - span * (k + 1) as f64 / panels as f64;
                for (th, w) in self.rule.map(a, b) {
                    let lam = C64::from_polar(r, th);
                    node(lam, I * lam * w, &all, &mut acc, &mut mags, stats)?;
                }
            }
        }

        let e_in = C64::from_polar(1.0, a_in);
        let e_out = C64::from_polar(1.0, a_out);
        let cap = self.opts.lambda_cap;
        let mut rho = r;
        loop {
            let active: Vec<usize> = (0..pts.len()).filter(|&i| !tracks[i].done).collect();
            if active.is_empty() {
                break;
            }
            if rho >= cap {
                for &i in &active {
                    stats.truncated_points += 1;
                    stats.truncation = stats.truncation.max(tracks[i].tail);
                }
                break;
            }
            let spatial = active.iter().map(|&i| tracks[i].g.max(tracks[i].h.unwrap_or(0.0))).fold(0.0, f64::max);
            let live = travels.iter().filter(|&&tr| rho * sin_t * tr < 40.0).fold(0.0f64, |a, &b| a.max(b));
            // the chirp rides on e^{-λ²t}, which the deformed rays damp whether or not there is forcing
            let gaussian_gone = self.mode != ContourMode::Paper && rho * rho * t * damp > 60.0;
            let temporal = if gaussian_gone { 0.0 } else { 2.0 * rho * t_eff * chirp };
            let nu = cos_t * (spatial + 2.0 * live) + temporal + 1e-9;
            let width = (waves * 2.0 * PI / nu).min(0.5 * rho.max(rho_ref));
            let b = (rho + width).min(cap);
            let mut mags = vec![(0.0, 0.0); active.len()];
            for (s, w) in self.rule.map(rho, b) {
                node(e_in * s, -e_in * w, &active, &mut acc, &mut mags, stats)?;
                node(e_out * s, e_out * w, &active, &mut acc, &mut mags, stats)?;
            }
            let g_rate = if gauss { 2.0 * b * t * damp } else { 0.0 };
            for (k, &i) in active.iter().enumerate() {
                let tr = &mut tracks[i];
                let (mg, mh) = mags[k];
                let part = |m: f64, a: f64| if m == 0.0 { 0.0 } else { m / (a * sin_t + g_rate) };
                tr.tail = part(mg, tr.g) + tr.h.map(|h| part(mh, h)).unwrap_or(0.0);
                if tr.tail < tol {
                    tr.quiet += 1;
                    tr.done = tr.quiet >= 2;
                } else {
                    tr.quiet = 0;
                }
            }
            rho = b;
        }
        stats.lambda_max = stats.lambda_max.max(rho);
        Ok(acc)
    }

    /// Sample the solution on a grid, with endpoint values extrapolated from the interior.
    pub fn evaluate(&self, grid: &SampleGrid) -> Result<SolutionField, ContourError> {
        let net = self.net;
        grid.check(net).map_err(ContourError::InvalidGrid)?;
        let k_pts = self.opts.endpoint_points.max(5);
        let mut fields: Vec<RodField> = (0..net.rod_count())
            .map(|r| RodField {
                rod: net.rod(r).id.clone(),
                x: grid.x[r].clone(),
                t: grid.t.clone(),
                q: Vec::with_capacity(grid.t.len()),
                imag: Vec::with_capacity(grid.t.len()),
            })
            .collect();
        let mut stats = PassStats::default();
        let mut max_imag = 0.0f64;
        let mut ends: HashMap<(usize, End, usize), EndSample> = HashMap::new();

        for (j, &t) in grid.t.iter().enumerate() {
            let mut wanted: Vec<(usize, End)> = Vec::new();
            let mut slots: Vec<Vec<Slot>> = Vec::new();
            let mut pts: Vec<(usize, f64)> = Vec::new();
            for r in 0..net.rod_count() {
                let len = net.rod(r).length.finite();
                let mut row = Vec::new();
                for &x in &grid.x[r] {
                    let eps = 1e-12 * len.unwrap_or(1.0).max(1.0);
                    if x <= eps {
                        row.push(Slot::End(End::Start));
                        wanted.push((r, End::Start));
                    } else if len.is_some_and(|l| x >= l - eps) {
                        row.push(Slot::End(End::Finish));
                        wanted.push((r, End::Finish));
                    } else {
                        row.push(Slot::Point(pts.len()));
                        pts.push((r, x));
                    }
                }
                slots.push(row);
                if self.opts.vertex_diagnostics {
                    let (a, b) = net.rod_ends(r);
                    if !matches!(net.vertex(a).kind, VertexKind::AtInfinity) {
                        wanted.push((r, End::Start));
                    }
                    if len.is_some() && !matches!(net.vertex(b).kind, VertexKind::AtInfinity) {
                        wanted.push((r, End::Finish));
                    }
                }
            }
            wanted.sort_by_key(|&(r, e)| (r, e == End::Finish));
            wanted.dedup();

            let mut end_imag = HashMap::new();
            let mut helper_base = HashMap::new();
            let mut steps = HashMap::new();
            if t > 0.0 {
                for &(r, e) in &wanted {
                    let rod = net.rod(r);
                    let mut h = self.opts.endpoint_step.min(rod.sigma * t.sqrt() / 4.0);
                    if let Some(l) = rod.length.finite() {
                        h = h.min(l / (2.0 * k_pts as f64));
                    }
                    helper_base.insert((r, e), pts.len());
                    steps.insert((r, e), h);
                    for k in 1..=k_pts {
                        let s = k as f64 * h;
                        let x = match e {
                            End::Start => s,
                            End::Finish => rod.length.finite().unwrap_or(0.0) - s,
                        };
                        pts.push((r, x));
                    }
                }
            }

            let (vals, st) = self.evaluate_points(&pts, t)?;
            stats.absorb(st);
            max_imag = vals.iter().fold(max_imag, |a, v| a.max(v.im.abs()));

            for &(r, e) in &wanted {
                let sample = if t == 0.0 {
                    let p = &self.problem.rods[self.problem.position(r).unwrap()];
                    let x = match e {
                        End::Start => 0.0,
                        End::Finish => net.rod(r).length.finite().unwrap_or(0.0),
                    };
                    let sign = if p.reversed { -1.0 } else { 1.0 };
                    (EndSample { value: p.transform.value(p.flip(x)), slope: sign * p.transform.slope(p.flip(x)) }, 0.0)
                } else {
                    let base = helper_base[&(r, e)];
                    let h = steps[&(r, e)];
                    let s: Vec<f64> = (1..=k_pts).map(|k| k as f64 * h).collect();
                    let re: Vec<f64> = vals[base..base + k_pts].iter().map(|v| v.re).collect();
                    let im: Vec<f64> = vals[base..base + k_pts].iter().map(|v| v.im).collect();
                    let v0 = extrapolate_to_zero(&s, &re);
                    let d = one_sided_slope([v0, re[0], re[1], re[2], re[3]], h);
                    let sign = if e == End::Start { 1.0 } else { -1.0 };
                    (EndSample { value: v0, slope: sign * d }, extrapolate_to_zero(&s, &im).abs())
                };
                ends.insert((r, e, j), sample.0);
                max_imag = max_imag.max(sample.1);
                end_imag.insert((r, e), sample.1);
            }

            for (r, row) in slots.iter().enumerate() {
                let mut q = Vec::with_capacity(row.len());
                let mut im = Vec::with_capacity(row.len());
                for s in row {
                    match *s {
                        Slot::Point(i) => {
                            q.push(vals[i].re);
                            im.push(vals[i].im.abs());
                        }
                        Slot::End(e) => {
                            q.push(ends[&(r, e, j)].value);
                            im.push(end_imag[&(r, e)]);
                        }
                    }
                }
                fields[r].q.push(q);
                fields[r].imag.push(im);
            }
        }

        let mut d = Diagnostics {
            solver: "utm".into(),
            configuration: self.problem.class.name().into(),
            mode: Some(self.mode.name().into()),
            radius: Some(self.radius.r),
            lambda_max: stats.lambda_max,
            nodes: stats.nodes,
            max_imag,
            truncation_estimate: stats.truncation,
            truncated_points: stats.truncated_points,
            ill_conditioned_nodes: stats.ill_conditioned,
            zero_scan: self.radius.scan.clone(),
            notes: self.notes.clone(),
            ..Default::default()
        };
        if self.opts.vertex_diagnostics {
            d.vertices = vertex_residuals(net, &grid.t, &|r, e, j| ends.get(&(r, e, j)).copied());
            summarize(&mut d);
        }
        Ok(SolutionField { rods: fields, diagnostics: d })
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Point(usize),
    End(End),
}

/// Evaluate the solution of a validated network on a grid.
pub fn evaluate_solution(net: &ValidatedNetwork, grid: &SampleGrid, opts: EvalOptions) -> Result<SolutionField, ContourError> {
    UtmSolver::new(net, opts)?.evaluate(grid)
}
