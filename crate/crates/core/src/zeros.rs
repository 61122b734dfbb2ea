//! Zeros of analytic functions in boxes and annular sectors by the argument principle.

use crate::error::ZeroScanError;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

/// A search region, parameterized by `(u, v)` over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Region {
    /// `u + iv` with `u ∈ re`, `v ∈ im`.
    Rect { re: (f64, f64), im: (f64, f64) },
    /// `u e^{iv}` with `u ∈ r`, `v ∈ theta`.
    Sector { r: (f64, f64), theta: (f64, f64) },
}

impl Region {
    fn point(&self, u: f64, v: f64) -> C64 {
        match self {
            Region::Rect { .. } => C64::new(u, v),
            Region::Sector { .. } => C64::from_polar(u, v),
        }
    }

    fn bounds(&self) -> [(f64, f64); 2] {
        match *self {
            Region::Rect { re, im } => [re, im],
            Region::Sector { r, theta } => [r, theta],
        }
    }

    fn with_bounds(&self, b: [(f64, f64); 2]) -> Region {
        match self {
            Region::Rect { .. } => Region::Rect { re: b[0], im: b[1] },
            Region::Sector { .. } => Region::Sector { r: b[0], theta: b[1] },
        }
    }

    /// Lengths of the two parameter sides measured in the λ-plane.
    fn extents(&self) -> (f64, f64) {
        let [(u0, u1), (v0, v1)] = self.bounds();
        match self {
            Region::Rect { .. } => (u1 - u0, v1 - v0),
            Region::Sector { .. } => (u1 - u0, u1.max(u0.abs()) * (v1 - v0)),
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Region::Rect { re, im } => z.re >= re.0 && z.re <= re.1 && z.im >= im.0 && z.im <= im.1,
            Region::Sector { r, theta } => {
                let (rho, arg) = z.to_polar();
                let mut a = arg;
                while a < theta.0 {
                    a += 2.0 * PI;
                }
                rho >= r.0 && rho <= r.1 && a <= theta.1
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroScanOptions {
    /// Boxes are refined until their λ-diameter is below this.
    pub tol: f64,
    /// Bisection depth limit when tracking the argument along one edge.
    pub max_edge_depth: u32,
    pub max_evaluations: usize,
}

impl Default for ZeroScanOptions {
    fn default() -> Self {
        ZeroScanOptions { tol: 1e-8, max_edge_depth: 40, max_evaluations: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    pub location: C64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroScanReport {
    pub region: Region,
    pub zeros: Vec<Zero>,
    pub evaluations: usize,
}

struct Scanner<'a, F: Fn(C64) -> C64> {
    f: &'a F,
    opts: ZeroScanOptions,
    evals: usize,
}

const SPLITS: [f64; 3] = [0.5123, 0.4629, 0.5813];

impl<F: Fn(C64) -> C64> Scanner<'_, F> {
    fn eval(&mut self, z: C64) -> Result<C64, ZeroScanError> {
        self.evals += 1;
        if self.evals > self.opts.max_evaluations {
            return Err(ZeroScanError::Inconclusive(format!("more than {} evaluations", self.opts.max_evaluations)));
        }
        let w = (self.f)(z);
        if w == C64::new(0.0, 0.0) {
            return Err(ZeroScanError::BoundaryZeroSuspected { point: z });
        }
        if !w.is_finite() {
            return Err(ZeroScanError::Inconclusive(format!("non-finite value at {z}")));
        }
        Ok(w)
    }

    /// Change of `arg f` along the straight parameter segment `a → b`.
    fn edge(&mut self, reg: &Region, a: (f64, f64), b: (f64, f64)) -> Result<f64, ZeroScanError> {
        let fa = self.eval(reg.point(a.0, a.1))?;
        let fb = self.eval(reg.point(b.0, b.1))?;
        // coarse start so long edges are never judged from their endpoints alone
        let pieces = 8;
        let mut total = 0.0;
        let mut prev = (a, fa);
        for k in 1..=pieces {
            let s = k as f64 / pieces as f64;
            let p = (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
            let fp = if k == pieces { fb } else { self.eval(reg.point(p.0, p.1))? };
            total += self.segment(reg, prev, (p, fp), 0)?;
            prev = (p, fp);
        }
        Ok(total)
    }

    fn segment(&mut self, reg: &Region, a: ((f64, f64), C64), b: ((f64, f64), C64), depth: u32) -> Result<f64, ZeroScanError> {
        let whole = (b.1 / a.1).arg();
        let m = ((a.0 .0 + b.0 .0) / 2.0, (a.0 .1 + b.0 .1) / 2.0);
        let fm = self.eval(reg.point(m.0, m.1))?;
        let left = (fm / a.1).arg();
        let right = (b.1 / fm).arg();
        let settled = whole.abs() < PI / 4.0 && (left + right - whole).abs() < 1e-9 && left.abs() < PI / 4.0 && right.abs() < PI / 4.0;
        if settled {
            return Ok(whole);
        }
        if depth >= self.opts.max_edge_depth {
            let pts = [(a.1, a.0), (fm, m), (b.1, b.0)];
            let worst = pts.iter().min_by(|x, y| x.0.norm().total_cmp(&y.0.norm())).unwrap();
            return Err(ZeroScanError::BoundaryZeroSuspected { point: reg.point(worst.1 .0, worst.1 .1) });
        }
        Ok(self.segment(reg, a, (m, fm), depth + 1)? + self.segment(reg, (m, fm), b, depth + 1)?)
    }

    fn winding(&mut self, reg: &Region) -> Result<i64, ZeroScanError> {
        let [(u0, u1), (v0, v1)] = reg.bounds();
        let corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)];
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge(reg, corners[k], corners[(k + 1) % 4])?;
        }
        let w = total / (2.0 * PI);
        if (w - w.round()).abs() > 0.05 {
            return Err(ZeroScanError::Inconclusive(format!("non-integer winding {w:.3}")));
        }
        Ok(w.round() as i64)
    }

    fn split(reg: &Region, frac: f64) -> [Region; 2] {
        let b = reg.bounds();
        let (eu, ev) = reg.extents();
        let axis = if eu >= ev { 0 } else { 1 };
        let (lo, hi) = b[axis];
        let mid = lo + frac * (hi - lo);
        let mut left = b;
        let mut right = b;
        left[axis] = (lo, mid);
        right[axis] = (mid, hi);
        [reg.with_bounds(left), reg.with_bounds(right)]
    }

    fn refine(&mut self, reg: Region, count: i64, out: &mut Vec<Zero>) -> Result<(), ZeroScanError> {
        let (eu, ev) = reg.extents();
        if eu.hypot(ev) < self.opts.tol {
            let [(u0, u1), (v0, v1)] = reg.bounds();
            out.push(Zero { location: reg.point(0.5 * (u0 + u1), 0.5 * (v0 + v1)), multiplicity: count as usize });
            return Ok(());
        }
        let mut last_err = None;
        for frac in SPLITS {
            let halves = Self::split(&reg, frac);
            let mut counts = [0i64; 2];
            let mut ok = true;
            for (c, h) in counts.iter_mut().zip(&halves) {
                match self.winding(h) {
                    Ok(w) => *c = w,
                    Err(e @ ZeroScanError::BoundaryZeroSuspected { .. }) => {
                        last_err = Some(e);
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if !ok || counts[0] + counts[1] != count || counts.iter().any(|&c| c < 0) {
                continue;
            }
            for (c, h) in counts.into_iter().zip(halves) {
                if c > 0 {
                    self.refine(h, c, out)?;
                }
            }
            return Ok(());
        }
        Err(last_err.unwrap_or_else(|| ZeroScanError::Inconclusive("windings of sub-boxes do not add up".into())))
    }
}

/// Locate every zero of `f` inside `region` (to `opts.tol`), with multiplicities.
///
/// `f` must be analytic on a neighbourhood of the region and free of zeros on its boundary.
pub fn zero_scan<F: Fn(C64) -> C64>(f: F, region: Region, opts: ZeroScanOptions) -> Result<ZeroScanReport, ZeroScanError> {
    let mut s = Scanner { f: &f, opts, evals: 0 };
    let total = s.winding(&region)?;
    if total < 0 {
        return Err(ZeroScanError::Inconclusive(format!("negative winding {total}")));
    }
    let mut zeros = Vec::new();
    if total > 0 {
        s.refine(region, total, &mut zeros)?;
    }
    Ok(ZeroScanReport { region, zeros, evaluations: s.evals })
}
