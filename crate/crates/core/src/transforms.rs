//! Spatial transforms of initial data and time transforms of boundary data.

use crate::error::TransformError;
use crate::expr::{ClosedForm, Piece};
use crate::quadrature::adaptive;
use crate::special::{gaussian_moments, half_line_moment, interval_moment, unit_moment, unit_moment_anchored};
use num_complex::Complex64 as C64;
use std::fmt;
use std::sync::Arc;

const I: C64 = C64::new(0.0, 1.0);

/// Initial temperature profile on one rod.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Closed(ClosedForm),
    /// Samples on a grid covering the whole (finite) rod; interpolated by a natural cubic spline.
    Sampled { xs: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    pub rod: String,
    pub profile: InitialProfile,
}

impl InitialDatum {
    pub fn closed(rod: &str, f: ClosedForm) -> Self {
        InitialDatum { rod: rod.to_string(), profile: InitialProfile::Closed(f) }
    }

    pub fn zero(rod: &str) -> Self {
        Self::closed(rod, ClosedForm::zero())
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.profile, InitialProfile::Sampled { .. })
    }
}

impl InitialProfile {
    pub fn scale(&self, c: f64) -> InitialProfile {
        match self {
            InitialProfile::Closed(f) => InitialProfile::Closed(f.scale(c)),
            InitialProfile::Sampled { xs, values } => InitialProfile::Sampled { xs: xs.clone(), values: values.iter().map(|v| c * v).collect() },
        }
    }

    /// Profile seen from the other end of a rod of length `len`.
    pub fn reflect(&self, len: f64) -> InitialProfile {
        match self {
            InitialProfile::Closed(f) => InitialProfile::Closed(f.reflect(len)),
            InitialProfile::Sampled { xs, values } => InitialProfile::Sampled {
                xs: xs.iter().rev().map(|x| (len - x).max(0.0)).collect(),
                values: values.iter().rev().copied().collect(),
            },
        }
    }
}

/// Natural cubic spline with per-segment power-basis coefficients.
#[derive(Debug, Clone)]
pub struct Spline {
    xs: Vec<f64>,
    // a + b u + c u^2 + d u^3, u = x - xs[i]
    coef: Vec<[f64; 4]>,
}

impl Spline {
    pub fn natural(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        // second derivatives, natural ends
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        let coef = (0..n - 1)
            .map(|i| {
                let a = ys[i];
                let b = (ys[i + 1] - ys[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
                [a, b, 0.5 * m[i], (m[i + 1] - m[i]) / (6.0 * h[i])]
            })
            .collect();
        Spline { xs: xs.to_vec(), coef }
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p => (p - 1).min(self.coef.len() - 1),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let u = x - self.xs[i];
        let [a, b, c, d] = self.coef[i];
        a + u * (b + u * (c + u * d))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let u = x - self.xs[i];
        let [_, b, c, d] = self.coef[i];
        b + u * (2.0 * c + 3.0 * d * u)
    }

    /// `e^{iμ·shift} ∫ e^{-iμx} s(x) dx` over the spline support.
    fn transform(&self, mu: C64, shift: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in self.coef.iter().enumerate() {
            let x0 = self.xs[i];
            let h = self.xs[i + 1] - x0;
            let z = -I * mu * h;
            let mut seg = C64::new(0.0, 0.0);
            for (k, &ck) in c.iter().enumerate() {
                if ck != 0.0 {
                    seg += ck * h.powi(k as i32 + 1) * unit_moment(k, z);
                }
            }
            acc += seg * (I * mu * (shift - x0)).exp();
        }
        acc
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Pieces { pieces: Vec<Piece>, im_limit: f64 },
    Spline(Spline),
}

/// `μ ↦ ∫₀^L e^{-iμx} q₀(x) dx` for one rod.
#[derive(Debug, Clone)]
pub struct HalfLineTransform {
    length: Option<f64>,
    repr: Repr,
    closed: Option<ClosedForm>,
}

impl HalfLineTransform {
    /// `length = None` for a semi-infinite rod.
    pub fn new(profile: &InitialProfile, length: Option<f64>) -> Self {
        match profile {
            InitialProfile::Closed(f) => {
                let pieces = f.pieces();
                let im_limit = pieces
                    .iter()
                    .filter(|p| p.quad == 0.0)
                    .map(|p| -p.rate.re)
                    .fold(f64::INFINITY, f64::min);
                HalfLineTransform { length, repr: Repr::Pieces { pieces, im_limit }, closed: Some(f.clone()) }
            }
            InitialProfile::Sampled { xs, values } => {
                HalfLineTransform { length, repr: Repr::Spline(Spline::natural(xs, values)), closed: None }
            }
        }
    }

    pub fn length(&self) -> Option<f64> {
        self.length
    }

    pub fn is_exact(&self) -> bool {
        self.closed.is_some()
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed.as_ref()
    }

    /// For semi-infinite rods the transform exists for `Im μ` below this value.
    pub fn im_limit(&self) -> f64 {
        match (&self.repr, self.length) {
            (Repr::Pieces { im_limit, .. }, None) => *im_limit,
            _ => f64::INFINITY,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Pieces { .. } => self.closed.as_ref().map(|f| f.eval(x)).unwrap_or(0.0),
            Repr::Spline(s) => s.eval(x),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Pieces { .. } => self.closed.as_ref().map(|f| f.derivative(x)).unwrap_or(0.0),
            Repr::Spline(s) => s.derivative(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Pieces { pieces, .. } => pieces.is_empty(),
            Repr::Spline(s) => s.coef.iter().all(|c| c.iter().all(|&v| v == 0.0)),
        }
    }

    /// `∫₀^L e^{-iμx} q₀(x) dx`.
    pub fn eval(&self, mu: C64) -> Result<C64, TransformError> {
        self.eval_shifted(mu, false)
    }

    /// `e^{iμL} ∫₀^L e^{-iμx} q₀(x) dx = ∫₀^L e^{iμ(L-x)} q₀(x) dx`, finite rods only.
    pub fn eval_anchored(&self, mu: C64) -> Result<C64, TransformError> {
        self.eval_shifted(mu, true)
    }

    fn eval_shifted(&self, mu: C64, anchored: bool) -> Result<C64, TransformError> {
        match (&self.repr, self.length) {
            (Repr::Spline(s), Some(len)) => Ok(s.transform(mu, if anchored { len } else { 0.0 })),
            (Repr::Spline(s), None) => Ok(s.transform(mu, 0.0)),
            (Repr::Pieces { pieces, im_limit }, None) => {
                if mu.im >= *im_limit {
                    return Err(TransformError::DomainViolation { mu, limit: *im_limit });
                }
                Ok(pieces.iter().map(|p| piece_half_line(p, mu)).sum())
            }
            (Repr::Pieces { pieces, .. }, Some(len)) => {
                Ok(pieces.iter().map(|p| piece_interval(p, mu, len, anchored)).sum())
            }
        }
    }
}

fn piece_half_line(p: &Piece, mu: C64) -> C64 {
    let c = p.rate - I * mu;
    let k = p.power as usize;
    if p.quad == 0.0 {
        p.amp * p.log.exp() * half_line_moment(k, c)
    } else {
        p.amp * gaussian_moments(k, -p.quad, c, p.log)[k]
    }
}

fn piece_interval(p: &Piece, mu: C64, len: f64, anchored: bool) -> C64 {
    let c = p.rate - I * mu;
    let k = p.power as usize;
    if p.quad == 0.0 {
        let z = c * len;
        let lk = len.powi(k as i32 + 1);
        if anchored {
            if z.re > 0.0 {
                p.amp * lk * (p.log + p.rate * len).exp() * unit_moment_anchored(k, z)
            } else {
                p.amp * lk * (p.log + I * mu * len).exp() * unit_moment(k, z)
            }
        } else {
            p.amp * p.log.exp() * interval_moment(k, c, len)
        }
    } else {
        let extra = if anchored { I * mu * len } else { C64::new(0.0, 0.0) };
        let shifted = Piece { rate: c, log: p.log + extra, ..*p };
        let alpha = -p.quad;
        if c.re / (2.0 * alpha) <= 0.5 * len {
            gaussian_interval(&shifted, len)
        } else {
            shifted.reflect(len).iter().map(|q| gaussian_interval(q, len)).sum()
        }
    }
}

/// `∫₀^L amp·y^k·e^{log + quad y² + rate y} dy` as a half-line integral minus its tail.
fn gaussian_interval(p: &Piece, len: f64) -> C64 {
    let k = p.power as usize;
    let alpha = -p.quad;
    let head = gaussian_moments(k, alpha, p.rate, p.log)[k];
    // tail: y = L + u
    let tail_log = p.log - alpha * len * len + p.rate * len;
    let tail = gaussian_moments(k, alpha, p.rate - 2.0 * alpha * len, tail_log);
    let mut t = C64::new(0.0, 0.0);
    for (j, tj) in tail.iter().enumerate() {
        t += crate::special::binomial(k, j) * len.powi((k - j) as i32) * tj;
    }
    p.amp * (head - t)
}

/// Boundary datum as a function of time.
#[derive(Clone)]
pub enum TimeFunction {
    Closed(ClosedForm),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFunction::Closed(c) => write!(f, "Closed({})", c.display_in("t")),
            TimeFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for TimeFunction {
    fn eq(&self, o: &Self) -> bool {
        match (self, o) {
            (TimeFunction::Closed(a), TimeFunction::Closed(b)) => a == b,
            (TimeFunction::Custom(a), TimeFunction::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl TimeFunction {
    pub fn zero() -> Self {
        TimeFunction::Closed(ClosedForm::zero())
    }

    pub fn parse(src: &str) -> Result<Self, crate::error::ExprError> {
        Ok(TimeFunction::Closed(ClosedForm::parse(src, "t")?))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Closed(c) => c.eval(t),
            TimeFunction::Custom(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeFunction::Closed(c) if c.is_zero())
    }

    pub fn scale(&self, c: f64) -> Self {
        match self {
            TimeFunction::Closed(f) => TimeFunction::Closed(f.scale(c)),
            TimeFunction::Custom(f) => {
                let f = f.clone();
                TimeFunction::Custom(Arc::new(move |t| c * f(t)))
            }
        }
    }

    /// `∫₀^t e^{ωs} f(s) ds`.
    pub fn transform(&self, omega: C64, t: f64) -> Result<C64, TransformError> {
        self.transform_premultiplied(omega, t, 0.0)
    }

    /// `∫₀^upper e^{ω(s - t_ref)} f(s) ds`: the transform at `upper` multiplied by `e^{-ω t_ref}`.
    pub fn transform_premultiplied(&self, omega: C64, upper: f64, t_ref: f64) -> Result<C64, TransformError> {
        if upper < 0.0 || !upper.is_finite() {
            return Err(TransformError::TimeOutOfRange { t: upper, horizon: f64::INFINITY });
        }
        if upper == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        match self {
            TimeFunction::Closed(c) if !c.has_gaussian() => {
                let mut acc = C64::new(0.0, 0.0);
                for p in c.pieces() {
                    let k = p.power as usize;
                    let z = (omega + p.rate) * upper;
                    let lk = upper.powi(k as i32 + 1);
                    acc += if z.re > 0.0 {
                        p.amp * lk * (p.log + z - omega * t_ref).exp() * unit_moment_anchored(k, z)
                    } else {
                        p.amp * lk * (p.log - omega * t_ref).exp() * unit_moment(k, z)
                    };
                }
                Ok(acc)
            }
            _ => self.transform_by_quadrature(omega, upper, t_ref),
        }
    }

    /// Adaptive quadrature path, also used to cross-check the closed forms.
    pub fn transform_by_quadrature(&self, omega: C64, upper: f64, t_ref: f64) -> Result<C64, TransformError> {
        let waves = (omega.im.abs() * upper / std::f64::consts::PI).ceil() as usize;
        let v = adaptive(
            |s| (omega * (s - t_ref)).exp() * self.eval(s),
            0.0,
            upper,
            waves.clamp(1, 20_000),
            1e-10,
            1e-300,
        )?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cf(s: &str) -> ClosedForm {
        ClosedForm::parse(s, "x").unwrap()
    }

    fn brute(f: &dyn Fn(f64) -> f64, mu: C64, a: f64, b: f64) -> C64 {
        adaptive(|x| (-I * mu * x).exp() * f(x), a, b, 64, 1e-14, 1e-300).unwrap()
    }

    #[test]
    fn zero_datum_transforms_to_zero() {
        let t = HalfLineTransform::new(&InitialProfile::Closed(ClosedForm::zero()), Some(1.0));
        assert_eq!(t.eval(C64::new(3.0, -2.0)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn constant_datum() {
        let t = HalfLineTransform::new(&InitialProfile::Closed(cf("1")), Some(2.0));
        let mu = C64::new(0.7, 0.4);
        let want = (1.0 - (-I * mu * 2.0).exp()) / (I * mu);
        assert!((t.eval(mu).unwrap() - want).norm() < 1e-14);
        assert!((t.eval(C64::new(0.0, 0.0)).unwrap() - 2.0).norm() < 1e-15);
    }

    #[test]
    fn decaying_exponential_on_half_line() {
        let t = HalfLineTransform::new(&InitialProfile::Closed(cf("exp(-x)")), None);
        assert!((t.eval(C64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        assert!(t.eval(C64::new(0.0, 1.5)).is_err());
        assert_eq!(t.im_limit(), 1.0);
    }

    #[test]
    fn finite_family_matches_quadrature() {
        let src = "x^3*exp(-0.7*x)*sin(2*x) + 2*cos(pi*x/2) - x^6/5";
        let f = cf(src);
        let t = HalfLineTransform::new(&InitialProfile::Closed(f.clone()), Some(1.3));
        for mu in [C64::new(0.0, 0.0), C64::new(2.0, -1.0), C64::new(-9.0, 4.0), C64::new(30.0, 30.0)] {
            let want = brute(&|x| f.eval(x), mu, 0.0, 1.3);
            let got = t.eval(mu).unwrap();
            assert!((got - want).norm() <= 1e-11 * want.norm().max(1.0), "{mu}");
            let anch = t.eval_anchored(mu).unwrap();
            let wa = want * (I * mu * 1.3).exp();
            assert!((anch - wa).norm() <= 1e-11 * wa.norm().max(1.0), "{mu}");
        }
    }

    #[test]
    fn gaussian_data_match_quadrature() {
        let f = cf("x*exp(-2*(x-1.5)^2)*cos(3*x) + exp(-(x-0.2)^2)");
        let fin = HalfLineTransform::new(&InitialProfile::Closed(f.clone()), Some(2.0));
        let inf = HalfLineTransform::new(&InitialProfile::Closed(f.clone()), None);
        for mu in [C64::new(0.0, 0.0), C64::new(1.0, -2.0), C64::new(-5.0, 3.0), C64::new(12.0, -0.5)] {
            let want = brute(&|x| f.eval(x), mu, 0.0, 2.0);
            let got = fin.eval(mu).unwrap();
            assert!((got - want).norm() <= 1e-11 * want.norm().max(1.0), "{mu}");
            let anch = fin.eval_anchored(mu).unwrap();
            assert!((anch - want * (I * mu * 2.0).exp()).norm() <= 1e-11 * anch.norm().max(1.0));
            if mu.im <= 0.0 {
                let want = brute(&|x| f.eval(x), mu, 0.0, 20.0);
                assert!((inf.eval(mu).unwrap() - want).norm() <= 1e-11 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn value_at_zero_is_integral() {
        let f = cf("exp(-x)*(1 + x^2) + sin(x)");
        let t = HalfLineTransform::new(&InitialProfile::Closed(f.clone()), Some(3.0));
        let want = adaptive(|x| C64::new(f.eval(x), 0.0), 0.0, 3.0, 4, 1e-15, 0.0).unwrap();
        assert!((t.eval(C64::new(0.0, 0.0)).unwrap() - want).norm() < 1e-10);
    }

    #[test]
    fn spline_interpolates_and_transforms() {
        let xs: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (PI * x).sin()).collect();
        let s = Spline::natural(&xs, &ys);
        assert!((s.eval(0.51) - (PI * 0.51).sin()).abs() < 1e-5);
        let prof = InitialProfile::Sampled { xs: xs.clone(), values: ys };
        let t = HalfLineTransform::new(&prof, Some(1.0));
        let mu = C64::new(2.0, 0.5);
        let want = brute(&|x| s.eval(x), mu, 0.0, 1.0);
        assert!((t.eval(mu).unwrap() - want).norm() < 1e-12);
        let exact = brute(&|x| (PI * x).sin(), mu, 0.0, 1.0);
        assert!((t.eval(mu).unwrap() - exact).norm() < 1e-5);
        assert!((t.eval_anchored(mu).unwrap() - want * (I * mu).exp()).norm() < 1e-12);
    }

    #[test]
    fn time_transform_examples() {
        let sin = TimeFunction::parse("sin(t)").unwrap();
        assert!((sin.transform(C64::new(0.0, 0.0), PI).unwrap() - 2.0).norm() < 1e-13);
        let want = (PI.exp() + 1.0) / 2.0;
        assert!((sin.transform(C64::new(1.0, 0.0), PI).unwrap() - want).norm() < 1e-12);
        let one = TimeFunction::parse("1").unwrap();
        let w = C64::new(-0.3, 2.0);
        let t = 1.7;
        assert!((one.transform(w, t).unwrap() - ((w * t).exp() - 1.0) / w).norm() < 1e-14);
        assert_eq!(TimeFunction::zero().transform(w, t).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(one.transform(w, 0.0).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn time_transform_even_in_lambda() {
        let f = TimeFunction::parse("t^2*exp(-t)*cos(3*t) + 1").unwrap();
        let lam = C64::new(1.3, 2.9);
        let (a, b) = (lam * lam, (-lam) * (-lam));
        assert_eq!(a, b);
        assert_eq!(f.transform(a, 0.8).unwrap(), f.transform(b, 0.8).unwrap());
    }

    #[test]
    fn closed_and_quadrature_paths_agree() {
        let f = TimeFunction::parse("t^2*exp(-t)*cos(3*t) + sin(2*t) - 0.5").unwrap();
        for &(re, im, t) in &[(1.0, 1.0, 1.0), (30.0, 5.0, 2.0), (-40.0, 10.0, 3.0), (50.0, -5.0, 0.5), (2.0, 3.0, 0.2), (35.35533905932738, 35.35533905932738, 10.0)] {
            let lam = C64::new(re, im);
            let w = lam * lam;
            let a = f.transform_premultiplied(w, t, t).unwrap();
            let b = f.transform_by_quadrature(w, t, t).unwrap();
            assert!((a - b).norm() <= 1e-8 * b.norm().max(1e-3), "{lam} {t}");
        }
    }

    #[test]
    fn premultiplied_matches_plain() {
        let f = TimeFunction::parse("sin(t) + t").unwrap();
        let w = C64::new(-2.0, 1.5);
        let t = 1.2;
        let plain = f.transform(w, t).unwrap() * (-w * t).exp();
        assert!((f.transform_premultiplied(w, t, t).unwrap() - plain).norm() < 1e-14);
        let big_t = 2.0;
        let horizon = f.transform(w, big_t).unwrap() * (-w * t).exp();
        assert!((f.transform_premultiplied(w, big_t, t).unwrap() - horizon).norm() < 1e-13);
    }

    #[test]
    fn linearity() {
        let f = TimeFunction::parse("cos(2*t)").unwrap();
        let g = TimeFunction::parse("t^3*exp(t)").unwrap();
        let h = TimeFunction::parse("3*cos(2*t) - 2*t^3*exp(t)").unwrap();
        let w = C64::new(0.4, -3.0);
        let lhs = h.transform(w, 1.1).unwrap();
        let rhs = 3.0 * f.transform(w, 1.1).unwrap() - 2.0 * g.transform(w, 1.1).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }
}
