//! Closed-form family used for initial data and boundary data.
//!
//! A [`ClosedForm`] is a finite sum of terms
//! `coef · v^k · exp(quad·v² + lin·v + offset) · cos(freq·v + phase)`,
//! where the cosine factor is optional. Sines are stored as shifted cosines.

use crate::error::ExprError;
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

pub const MAX_POWER: u32 = 6;
/// Highest power allowed alongside a Gaussian factor.
pub const MAX_GAUSSIAN_POWER: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub power: u32,
    pub quad: f64,
    pub lin: f64,
    pub offset: f64,
    /// `(freq, phase)` of a cosine factor.
    pub wave: Option<(f64, f64)>,
}

/// `amp · v^power · exp(log + quad·v² + rate·v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub amp: C64,
    pub log: C64,
    pub power: u32,
    pub quad: f64,
    pub rate: C64,
}

impl Term {
    pub fn constant(c: f64) -> Self {
        Term { coef: c, power: 0, quad: 0.0, lin: 0.0, offset: 0.0, wave: None }
    }

    fn is_constant(&self) -> bool {
        self.power == 0 && self.quad == 0.0 && self.lin == 0.0 && self.wave.is_none()
    }

    fn envelope(&self, v: f64) -> f64 {
        self.coef * (self.quad * v * v + self.lin * v + self.offset).exp()
    }

    pub fn eval(&self, v: f64) -> f64 {
        let mut r = self.envelope(v) * v.powi(self.power as i32);
        if let Some((b, p)) = self.wave {
            r *= (b * v + p).cos();
        }
        r
    }

    pub fn derivative(&self, v: f64) -> f64 {
        let env = self.envelope(v);
        let k = self.power as i32;
        let vk = v.powi(k);
        let dvk = if k == 0 { 0.0 } else { k as f64 * v.powi(k - 1) };
        let poly = dvk + (2.0 * self.quad * v + self.lin) * vk;
        match self.wave {
            None => env * poly,
            Some((b, p)) => env * (poly * (b * v + p).cos() - vk * b * (b * v + p).sin()),
        }
    }

    fn mul(&self, o: &Term) -> Vec<Term> {
        let base = Term {
            coef: self.coef * o.coef,
            power: self.power + o.power,
            quad: self.quad + o.quad,
            lin: self.lin + o.lin,
            offset: self.offset + o.offset,
            wave: None,
        };
        match (self.wave, o.wave) {
            (None, w) | (w, None) => vec![normalize(Term { wave: w, ..base })],
            (Some((b1, p1)), Some((b2, p2))) => vec![
                normalize(Term { coef: 0.5 * base.coef, wave: Some((b1 - b2, p1 - p2)), ..base }),
                normalize(Term { coef: 0.5 * base.coef, wave: Some((b1 + b2, p1 + p2)), ..base }),
            ],
        }
    }

    /// Split into complex exponential pieces.
    pub fn pieces(&self) -> Vec<Piece> {
        let log = C64::new(self.offset, 0.0);
        match self.wave {
            None => vec![Piece {
                amp: C64::new(self.coef, 0.0),
                log,
                power: self.power,
                quad: self.quad,
                rate: C64::new(self.lin, 0.0),
            }],
            Some((b, p)) => [1.0, -1.0]
                .iter()
                .map(|&s| Piece {
                    amp: C64::new(0.5 * self.coef, 0.0),
                    log: log + C64::new(0.0, s * p),
                    power: self.power,
                    quad: self.quad,
                    rate: C64::new(self.lin, s * b),
                })
                .collect(),
        }
    }
}

fn normalize(mut t: Term) -> Term {
    if let Some((b, p)) = t.wave {
        if b == 0.0 {
            t.coef *= p.cos();
            t.wave = None;
        } else if b < 0.0 {
            t.wave = Some((-b, -p));
        }
    }
    t
}

impl Piece {
    pub fn eval(&self, v: f64) -> C64 {
        self.amp * v.powi(self.power as i32) * (self.log + self.rate * v + self.quad * v * v).exp()
    }

    /// Pieces of `p(L - y)` as a function of `y`.
    pub fn reflect(&self, len: f64) -> Vec<Piece> {
        let k = self.power as usize;
        let log = self.log + self.rate * len + self.quad * len * len;
        let rate = -self.rate - 2.0 * self.quad * len;
        (0..=k)
            .map(|j| {
                let c = crate::special::binomial(k, j) * len.powi((k - j) as i32) * if j % 2 == 1 { -1.0 } else { 1.0 };
                Piece { amp: self.amp * c, log, power: j as u32, quad: self.quad, rate }
            })
            .filter(|p| p.amp != C64::new(0.0, 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedForm {
    pub terms: Vec<Term>,
}

impl ClosedForm {
    pub fn zero() -> Self {
        ClosedForm { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            Self::zero()
        } else {
            ClosedForm { terms: vec![Term::constant(c)] }
        }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        ClosedForm { terms: terms.into_iter().map(normalize).filter(|t| t.coef != 0.0).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(v)).sum()
    }

    pub fn derivative(&self, v: f64) -> f64 {
        self.terms.iter().map(|t| t.derivative(v)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term { coef: t.coef * c, ..*t }).collect())
    }

    pub fn add(&self, o: &ClosedForm) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        ClosedForm { terms }
    }

    pub fn mul(&self, o: &ClosedForm) -> Self {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &o.terms {
                terms.extend(a.mul(b));
            }
        }
        Self::from_terms(terms)
    }

    pub fn pieces(&self) -> Vec<Piece> {
        self.terms.iter().flat_map(|t| t.pieces()).collect()
    }

    /// `y ↦ f(len - y)`, staying inside the family.
    pub fn reflect(&self, len: f64) -> Self {
        let mut out = Vec::new();
        for t in &self.terms {
            let k = t.power as usize;
            let quad = t.quad;
            let lin = -2.0 * t.quad * len - t.lin;
            let offset = t.quad * len * len + t.lin * len + t.offset;
            let wave = t.wave.map(|(b, p)| (b, -b * len - p));
            for j in 0..=k {
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                let coef = t.coef * crate::special::binomial(k, j) * len.powi((k - j) as i32) * sign;
                out.push(Term { coef, power: j as u32, quad, lin, offset, wave });
            }
        }
        Self::from_terms(out)
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    pub fn has_gaussian(&self) -> bool {
        self.terms.iter().any(|t| t.quad != 0.0)
    }

    /// Every term is integrable on the half line.
    pub fn decays(&self) -> bool {
        self.terms.iter().all(|t| t.quad < 0.0 || (t.quad == 0.0 && t.lin < 0.0))
    }

    fn as_constant(&self) -> Option<f64> {
        if self.terms.iter().all(|t| t.is_constant()) {
            Some(self.terms.iter().map(|t| t.coef * t.offset.exp()).sum())
        } else {
            None
        }
    }

    /// Coefficients of a polynomial of degree at most two.
    fn as_quadratic(&self) -> Option<[f64; 3]> {
        let mut c = [0.0; 3];
        for t in &self.terms {
            if t.quad != 0.0 || t.lin != 0.0 || t.wave.is_some() || t.power > 2 {
                return None;
            }
            c[t.power as usize] += t.coef * t.offset.exp();
        }
        Some(c)
    }

    /// Parse an expression in the variable `var` (usually `x` or `t`).
    pub fn parse(src: &str, var: &str) -> Result<Self, ExprError> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, var, src_len: src.len() };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("unexpected trailing input"));
        }
        if e.max_power() > MAX_POWER {
            return Err(ExprError::Unsupported(format!("power of {var} above {MAX_POWER}")));
        }
        if e.terms.iter().any(|t| t.quad != 0.0 && t.power > MAX_GAUSSIAN_POWER) {
            return Err(ExprError::Unsupported(format!(
                "power of {var} above {MAX_GAUSSIAN_POWER} next to a Gaussian factor"
            )));
        }
        Ok(e)
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with(f, "x")
    }
}

impl ClosedForm {
    pub fn display_in(&self, var: &str) -> String {
        struct D<'a>(&'a ClosedForm, &'a str);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.write_with(f, self.1)
            }
        }
        D(self, var).to_string()
    }

    fn write_with(&self, f: &mut fmt::Formatter<'_>, v: &str) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", t.coef)?;
            if t.power > 0 {
                write!(f, "*{v}^{}", t.power)?;
            }
            if t.quad != 0.0 || t.lin != 0.0 || t.offset != 0.0 {
                write!(f, "*exp(({})*{v}^2 + ({})*{v} + ({}))", t.quad, t.lin, t.offset)?;
            }
            if let Some((b, p)) = t.wave {
                write!(f, "*cos(({})*{v} + ({}))", b, p)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && (b[j] as char).is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &src[start..i];
            let v: f64 = s.parse().map_err(|_| ExprError::Parse { pos: start, msg: format!("bad number {s}") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ExprError::Parse { pos: i, msg: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    var: &'a str,
    src_len: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        let pos = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.src_len);
        ExprError::Parse { pos, msg: msg.to_string() }
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), ExprError> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<ClosedForm, ExprError> {
        let mut acc = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = acc.add(&if c == '-' { rhs.scale(-1.0) } else { rhs });
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<ClosedForm, ExprError> {
        let mut acc = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            if c == '*' {
                acc = acc.mul(&rhs);
            } else {
                match rhs.as_constant() {
                    Some(d) if d != 0.0 => acc = acc.scale(1.0 / d),
                    _ => return Err(ExprError::Unsupported("division by a non-constant or zero".into())),
                }
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ClosedForm, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(self.unary()?.scale(-1.0))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<ClosedForm, ExprError> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let e = self.unary()?;
        let e = e.as_constant().ok_or_else(|| ExprError::Unsupported("non-constant exponent".into()))?;
        if let Some(b) = base.as_constant() {
            return Ok(ClosedForm::constant(b.powf(e)));
        }
        if e < 0.0 || e.fract() != 0.0 || e > 64.0 {
            return Err(ExprError::Unsupported(format!("exponent {e} must be a small non-negative integer")));
        }
        let mut acc = ClosedForm::constant(1.0);
        for _ in 0..e as u32 {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<ClosedForm, ExprError> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err("unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(ClosedForm::constant(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.err("unexpected operator"))
            }
            Tok::Ident(name) => {
                if name == self.var {
                    return Ok(ClosedForm { terms: vec![Term { power: 1, ..Term::constant(1.0) }] });
                }
                match name.as_str() {
                    "pi" => return Ok(ClosedForm::constant(std::f64::consts::PI)),
                    "exp" | "sin" | "cos" => {}
                    _ => {
                        self.pos -= 1;
                        return Err(self.err(&format!("unknown identifier {name}")));
                    }
                }
                self.expect_op('(')?;
                let arg = self.expr()?;
                self.expect_op(')')?;
                let [c0, c1, c2] = arg
                    .as_quadratic()
                    .ok_or_else(|| ExprError::Unsupported(format!("argument of {name} must be a polynomial of degree at most 2")))?;
                let t = match name.as_str() {
                    "exp" => Term { quad: c2, lin: c1, offset: c0, ..Term::constant(1.0) },
                    _ if c2 != 0.0 => {
                        return Err(ExprError::Unsupported(format!("argument of {name} must be linear")));
                    }
                    "sin" => Term { wave: Some((c1, c0 - FRAC_PI_2)), ..Term::constant(1.0) },
                    _ => Term { wave: Some((c1, c0)), ..Term::constant(1.0) },
                };
                Ok(ClosedForm::from_terms(vec![t]))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-13 * (1.0 + b.abs())
    }

    #[test]
    fn parses_catalog_terms() {
        let e = ClosedForm::parse("2*x^3*exp(-0.5*x)*sin(3*x) - cos(x)/4 + 1.5e-1", "x").unwrap();
        for &x in &[0.0f64, 0.3, 1.7, 4.0] {
            let want = 2.0 * x * x * x * (-0.5 * x).exp() * (3.0 * x).sin() - x.cos() / 4.0 + 0.15;
            assert!(close(e.eval(x), want), "{x}");
        }
    }

    #[test]
    fn products_of_waves_expand() {
        let e = ClosedForm::parse("sin(2*t)*cos(t+1)*(t-1)^2", "t").unwrap();
        for &t in &[0.0f64, 0.5, 2.0] {
            let want = (2.0 * t).sin() * (t + 1.0).cos() * (t - 1.0) * (t - 1.0);
            assert!(close(e.eval(t), want));
        }
    }

    #[test]
    fn gaussian_and_pi() {
        let e = ClosedForm::parse("exp(-(x-3)^2)*cos(pi*x/2)", "x").unwrap();
        assert!(e.has_gaussian() && e.decays());
        let x = 2.2;
        assert!(close(e.eval(x), (-(x - 3.0f64).powi(2)).exp() * (std::f64::consts::PI * x / 2.0).cos()));
    }

    #[test]
    fn derivative_matches_difference() {
        let e = ClosedForm::parse("x^2*exp(-x^2+x)*sin(3*x+0.2) + 4*x", "x").unwrap();
        let x = 0.7;
        let h = 1e-5;
        let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
        assert!((e.derivative(x) - fd).abs() < 1e-8);
    }

    #[test]
    fn pieces_and_reflection_reproduce_values() {
        let e = ClosedForm::parse("x^2*exp(-0.3*x^2+0.1*x)*sin(3*x) + x", "x").unwrap();
        let len = 1.6;
        for &x in &[0.0, 0.4, 1.6] {
            let s: C64 = e.pieces().iter().map(|p| p.eval(x)).sum();
            assert!((s.re - e.eval(x)).abs() < 1e-13 && s.im.abs() < 1e-13);
            let r: C64 = e.pieces().iter().flat_map(|p| p.reflect(len)).map(|p| p.eval(len - x)).sum();
            assert!((r.re - e.eval(x)).abs() < 1e-12 && r.im.abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_stays_in_family() {
        let e = ClosedForm::parse("x^2*exp(-0.2*x^2 + x)*sin(2*x + 0.3) - 4*x^3", "x").unwrap();
        let r = e.reflect(1.7);
        for &y in &[0.0, 0.6, 1.7] {
            assert!(close(r.eval(y), e.eval(1.7 - y)));
            assert!((r.derivative(y) + e.derivative(1.7 - y)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_family() {
        assert!(ClosedForm::parse("x^7", "x").is_err());
        assert!(ClosedForm::parse("1/x", "x").is_err());
        assert!(ClosedForm::parse("sin(x^2)", "x").is_err());
        assert!(ClosedForm::parse("exp(x^3)", "x").is_err());
        assert!(ClosedForm::parse("log(x)", "x").is_err());
        assert!(ClosedForm::parse("x^3*exp(-x^2)", "x").is_err());
        assert!(ClosedForm::parse("(x", "x").is_err());
        assert!(ClosedForm::parse("x x", "x").is_err());
    }

    #[test]
    fn display_round_trips() {
        let e = ClosedForm::parse("3*x*exp(-x)*sin(2*x) + exp(-x^2) - 0.25", "x").unwrap();
        let back = ClosedForm::parse(&e.to_string(), "x").unwrap();
        for &x in &[0.0, 0.9, 2.5] {
            assert!(close(back.eval(x), e.eval(x)));
        }
    }

    #[test]
    fn zero_is_empty() {
        assert!(ClosedForm::parse("0", "x").unwrap().is_zero());
        assert!(ClosedForm::parse("0*sin(x)", "x").unwrap().is_zero());
    }
}
