//! Spectral Dirichlet-to-Neumann systems for the three solvable configurations.
//!
//! Every rod is first put in a normalized orientation: star rods emanate from the
//! junction, parallel rods all run from the same source vertex to the same sink.
//! Unknowns are the time transforms `g_j(λ²,t)` (values at x = 0) and `h_j(λ²,t)`
//! (values at x = L), scaled by powers of `σ` exactly as in the assembled matrices.

use crate::error::{DtnError, TransformError};
use crate::network::{ConfigClass, RobinCondition, ValidatedNetwork, VertexKind};
use crate::transforms::{HalfLineTransform, InitialProfile, TimeFunction};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative floor on `|det|` against the product of row sup-norms.
pub const SINGULARITY_EPS: f64 = 1e-13;
/// Condition estimates above this flag the solve as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Far-end Robin condition rescaled so that `beta0 = 1`, or `beta0 = 0` and `beta1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndCondition {
    pub beta0: f64,
    pub beta1: f64,
    pub data: TimeFunction,
    /// The original data are divided by this factor.
    pub scale: f64,
}

impl EndCondition {
    fn normalized(c: &RobinCondition, reversed: bool) -> Self {
        let beta1 = if reversed { -c.beta1 } else { c.beta1 };
        if c.beta0 != 0.0 {
            EndCondition { beta0: 1.0, beta1: beta1 / c.beta0, data: c.data.clone(), scale: c.beta0 }
        } else {
            EndCondition { beta0: 0.0, beta1: 1.0, data: c.data.clone(), scale: beta1 }
        }
    }

    pub fn is_neumann(&self) -> bool {
        self.beta0 == 0.0
    }

    pub fn data_at(&self, t: f64) -> f64 {
        self.data.eval(t) / self.scale
    }

    fn transform(&self, omega: C64, upper: f64, t_ref: f64) -> Result<C64, TransformError> {
        if self.data.is_zero() {
            return Ok(ZERO);
        }
        Ok(self.data.transform_premultiplied(omega, upper, t_ref)? / self.scale)
    }
}

/// One rod in normalized orientation.
#[derive(Debug, Clone)]
pub struct ProblemRod {
    /// Index in the network's rod list.
    pub index: usize,
    pub id: String,
    pub sigma: f64,
    pub length: Option<f64>,
    /// True when the internal coordinate runs opposite to the rod's own coordinate.
    pub reversed: bool,
    pub datum: InitialProfile,
    pub transform: HalfLineTransform,
    /// Boundary condition at x = L (finite stars only).
    pub far: Option<EndCondition>,
}

impl ProblemRod {
    /// Internal coordinate of a point given in the rod's own coordinate (and back).
    pub fn flip(&self, x: f64) -> f64 {
        match (self.reversed, self.length) {
            (true, Some(l)) => l - x,
            _ => x,
        }
    }

    /// `L/σ`, infinite for semi-infinite rods.
    pub fn travel(&self) -> f64 {
        self.length.map(|l| l / self.sigma).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Layout {
    SemiInfinite,
    Parallel,
    FiniteStar { m_neumann: usize },
}

/// A classified network in normalized orientation, ready for assembly.
#[derive(Debug, Clone)]
pub struct Problem {
    pub class: ConfigClass,
    pub layout: Layout,
    pub rods: Vec<ProblemRod>,
    pub horizon: f64,
}

impl Problem {
    pub fn new(net: &ValidatedNetwork) -> Result<Problem, DtnError> {
        let class = crate::network::classify_configuration(net);
        let make = |r: usize, reversed: bool, far: Option<EndCondition>| {
            let rod = net.rod(r);
            let length = rod.length.finite();
            let datum = match (reversed, length) {
                (true, Some(l)) => net.datum(r).profile.reflect(l),
                _ => net.datum(r).profile.clone(),
            };
            let transform = HalfLineTransform::new(&datum, length);
            ProblemRod { index: r, id: rod.id.clone(), sigma: rod.sigma, length, reversed, datum, transform, far }
        };
        let (layout, rods) = match &class {
            ConfigClass::SemiInfiniteStar { m, .. } => (Layout::SemiInfinite, (0..*m).map(|r| make(r, false, None)).collect()),
            ConfigClass::ParallelRods { m, source, .. } => {
                let rods = (0..*m).map(|r| make(r, net.rod_ends(r).0 != *source, None)).collect();
                (Layout::Parallel, rods)
            }
            ConfigClass::FiniteStar { m_neumann, junction, order, .. } => {
                let mut rods = Vec::new();
                for &r in order {
                    let (a, b) = net.rod_ends(r);
                    let reversed = a != *junction;
                    let far = if reversed { a } else { b };
                    let VertexKind::Robin(c) = &net.vertex(far).kind else {
                        return Err(DtnError::WrongConfiguration(format!("rod {} has no boundary condition", net.rod(r).id)));
                    };
                    rods.push(make(r, reversed, Some(EndCondition::normalized(c, reversed))));
                }
                (Layout::FiniteStar { m_neumann: *m_neumann }, rods)
            }
            ConfigClass::Unsupported { reason } => return Err(DtnError::WrongConfiguration(reason.clone())),
        };
        Ok(Problem { class, layout, rods, horizon: net.horizon() })
    }

    pub fn m(&self) -> usize {
        self.rods.len()
    }

    /// Position of a network rod index in the normalized order.
    pub fn position(&self, network_index: usize) -> Option<usize> {
        self.rods.iter().position(|r| r.index == network_index)
    }

    pub fn has_forcing(&self) -> bool {
        self.rods.iter().any(|r| r.far.as_ref().is_some_and(|c| !c.data.is_zero()))
    }

    pub fn min_travel(&self) -> f64 {
        self.rods.iter().map(|r| r.travel()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    G0,
    G1,
    H0,
    H1,
}

/// What entry `X_k` of the unknown vector holds: `σ^sigma_power` times the labelled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnknownLabel {
    pub quantity: Quantity,
    /// `None` for values shared by all rods at a vertex.
    pub rod: Option<usize>,
    pub sigma_power: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeVariant {
    /// Time transforms taken up to the evaluation time `t`.
    AtT,
    /// Time transforms taken up to the horizon `T`.
    AtHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RhsTerm {
    /// `q̂₀` of the initial datum.
    Initial,
    /// Boundary data `f̃`.
    Forcing,
    /// `e^{λ²t} q̂(·;t)`, the transform of the unknown solution.
    Solution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RhsSpec {
    pub terms: Vec<RhsTerm>,
    pub variant: TimeVariant,
}

impl RhsSpec {
    /// The right-hand side exactly as the global relations produce it.
    pub fn global_relation() -> Self {
        RhsSpec { terms: vec![RhsTerm::Initial, RhsTerm::Forcing, RhsTerm::Solution], variant: TimeVariant::AtT }
    }

    pub fn with_variant(mut self, variant: TimeVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn has(&self, term: RhsTerm) -> bool {
        self.terms.contains(&term)
    }
}

impl Default for RhsSpec {
    fn default() -> Self {
        drop_unknown_terms(Self::global_relation())
    }
}

/// Remove the `e^{λ²t} q̂(·;t)` contributions, leaving data-only right-hand sides.
pub fn drop_unknown_terms(mut spec: RhsSpec) -> RhsSpec {
    spec.terms.retain(|t| *t != RhsTerm::Solution);
    spec
}

/// How rows carrying `e^{∓iλL/σ}` are rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Entries exactly as in the global relations.
    Raw,
    /// Rows are multiplied by `e^{iλL/σ}` where that keeps entries bounded for `Im λ ≥ 0`.
    Upper,
    /// Same for `Im λ ≤ 0`.
    Lower,
    /// `Upper` or `Lower` by the sign of `Im λ`.
    Auto,
}

impl Balance {
    fn resolve(self, lambda: C64) -> Balance {
        match self {
            Balance::Auto if lambda.im >= 0.0 => Balance::Upper,
            Balance::Auto => Balance::Lower,
            b => b,
        }
    }
}

/// A λ-parameterized linear system `𝒜(λ) X = Y(λ, t)`.
#[derive(Debug, Clone)]
pub struct SpectralSystem<'a> {
    problem: &'a Problem,
    labels: Vec<UnknownLabel>,
    rhs: RhsSpec,
}

/// Assembled matrix and right-hand side at one λ, with the forcing transforms used.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub matrix: DMatrix<C64>,
    pub rhs: DVector<C64>,
    /// Normalized `f̃_r` per rod (zero where a rod has no boundary condition).
    pub forcing: Vec<C64>,
    pub premultiplied: bool,
}

fn label(quantity: Quantity, rod: Option<usize>, sigma_power: i32) -> UnknownLabel {
    UnknownLabel { quantity, rod, sigma_power }
}

fn check_layout(problem: &Problem, want: Layout) -> Result<(), DtnError> {
    let ok = match (problem.layout, want) {
        (Layout::FiniteStar { .. }, Layout::FiniteStar { .. }) => true,
        (a, b) => a == b,
    };
    if ok {
        Ok(())
    } else {
        Err(DtnError::WrongConfiguration(format!("expected {want:?}, network is {:?}", problem.layout)))
    }
}

/// `(m+1)`-dimensional system: flux balance plus the `-λ` global relation of each rod.
pub fn assemble_semi_infinite(problem: &Problem, rhs: RhsSpec) -> Result<SpectralSystem<'_>, DtnError> {
    check_layout(problem, Layout::SemiInfinite)?;
    let m = problem.m();
    let mut labels = vec![label(Quantity::G0, None, 0)];
    labels.extend((0..m).map(|r| label(Quantity::G1, Some(r), 2)));
    Ok(SpectralSystem { problem, labels, rhs })
}

/// `(2m+2)`-dimensional system: two flux balances and the `±λ` global relations.
pub fn assemble_parallel(problem: &Problem, rhs: RhsSpec) -> Result<SpectralSystem<'_>, DtnError> {
    check_layout(problem, Layout::Parallel)?;
    let m = problem.m();
    let mut labels = vec![label(Quantity::G0, None, 0), label(Quantity::H0, None, 0)];
    labels.extend((0..m).map(|r| label(Quantity::G1, Some(r), 2)));
    labels.extend((0..m).map(|r| label(Quantity::H1, Some(r), 2)));
    Ok(SpectralSystem { problem, labels, rhs })
}

/// `(2m+1)`-dimensional system with the Neumann-ended rods first.
pub fn assemble_finite_star(problem: &Problem, rhs: RhsSpec) -> Result<SpectralSystem<'_>, DtnError> {
    check_layout(problem, Layout::FiniteStar { m_neumann: 0 })?;
    let Layout::FiniteStar { m_neumann } = problem.layout else { unreachable!() };
    let m = problem.m();
    for (r, rod) in problem.rods.iter().enumerate() {
        let far = rod.far.as_ref().ok_or_else(|| DtnError::NormalizationFailure { rod: rod.id.clone() })?;
        if far.is_neumann() != (r < m_neumann) {
            return Err(DtnError::NormalizationFailure { rod: rod.id.clone() });
        }
    }
    let mut labels = vec![label(Quantity::G0, None, 0)];
    labels.extend((0..m).map(|r| label(Quantity::G1, Some(r), 2)));
    labels.extend((0..m).map(|r| if r < m_neumann { label(Quantity::H0, Some(r), 1) } else { label(Quantity::H1, Some(r), 2) }));
    Ok(SpectralSystem { problem, labels, rhs })
}

impl<'a> SpectralSystem<'a> {
    /// Assemble whichever system the problem's layout calls for.
    pub fn new(problem: &'a Problem, rhs: RhsSpec) -> Result<Self, DtnError> {
        match problem.layout {
            Layout::SemiInfinite => assemble_semi_infinite(problem, rhs),
            Layout::Parallel => assemble_parallel(problem, rhs),
            Layout::FiniteStar { .. } => assemble_finite_star(problem, rhs),
        }
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[UnknownLabel] {
        &self.labels
    }

    pub fn rhs_spec(&self) -> &RhsSpec {
        &self.rhs
    }

    /// The matrix exactly as in the global relations.
    pub fn matrix(&self, lambda: C64) -> DMatrix<C64> {
        self.fill(lambda, None, Balance::Raw, false).expect("matrix assembly cannot fail").matrix
    }

    /// Raw matrix and data-only right-hand side.
    pub fn assemble(&self, lambda: C64, t: f64) -> Result<Assembled, DtnError> {
        self.fill(lambda, Some(t), Balance::Raw, false)
    }

    /// Row-balanced matrix with the right-hand side multiplied by `e^{-λ²t}`.
    pub fn assemble_balanced(&self, lambda: C64, t: f64, balance: Balance) -> Result<Assembled, DtnError> {
        self.fill(lambda, Some(t), balance, true)
    }

    pub fn determinant(&self, lambda: C64) -> C64 {
        self.matrix(lambda).lu().determinant()
    }

    /// Determinant of the balanced matrix; it has the same zeros as [`Self::determinant`].
    pub fn balanced_determinant(&self, lambda: C64, balance: Balance) -> C64 {
        self.fill(lambda, None, balance, false).expect("matrix assembly cannot fail").matrix.lu().determinant()
    }

    fn fill(&self, lambda: C64, t: Option<f64>, balance: Balance, premultiply: bool) -> Result<Assembled, DtnError> {
        if t.is_some() && self.rhs.has(RhsTerm::Solution) {
            return Err(DtnError::UnknownTermPresent);
        }
        let p = self.problem;
        let m = p.m();
        let n = self.dim();
        let balance = balance.resolve(lambda);
        let mut a = DMatrix::from_element(n, n, ZERO);
        let mut y = DVector::from_element(n, ZERO);
        let mut forcing = vec![ZERO; m];
        let omega = lambda * lambda;
        let decay = match t {
            Some(t) if premultiply => (-omega * t).exp(),
            _ => C64::new(1.0, 0.0),
        };
        let upper = |t: f64| match self.rhs.variant {
            TimeVariant::AtT => t,
            TimeVariant::AtHorizon => p.horizon,
        };
        let initial = self.rhs.has(RhsTerm::Initial);

        match p.layout {
            Layout::SemiInfinite => {
                for r in 0..m {
                    a[(0, 1 + r)] = C64::new(1.0, 0.0);
                }
                for (r, rod) in p.rods.iter().enumerate() {
                    let row = 1 + r;
                    a[(row, 0)] = -I * lambda * rod.sigma;
                    a[(row, 1 + r)] = C64::new(1.0, 0.0);
                    if let (Some(_), true) = (t, initial) {
                        y[row] = decay * rod.transform.eval(-lambda / rod.sigma)?;
                    }
                }
            }
            Layout::Parallel | Layout::FiniteStar { .. } => {
                let parallel = p.layout == Layout::Parallel;
                let (g1c, hc) = if parallel { (2, 2 + m) } else { (1, 1 + m) };
                for r in 0..m {
                    a[(0, g1c + r)] = C64::new(1.0, 0.0);
                    if parallel {
                        a[(1, hc + r)] = C64::new(1.0, 0.0);
                    }
                }
                let first = if parallel { 2 } else { 1 };
                for (r, rod) in p.rods.iter().enumerate() {
                    let len = rod.length.expect("finite rod");
                    let sig = rod.sigma;
                    let f = match (t, &rod.far) {
                        (Some(t), Some(c)) if self.rhs.has(RhsTerm::Forcing) => {
                            c.transform(omega, upper(t), if premultiply { t } else { 0.0 })?
                        }
                        _ => ZERO,
                    };
                    forcing[r] = f;
                    for (block, s) in [(0usize, 1.0f64), (1, -1.0)] {
                        let row = first + block * m + r;
                        let sl = s * lambda;
                        // the h part carries e^{-i s λ L/σ}; balancing divides the row by it
                        let phase = -I * sl * len / sig;
                        let balanced = match balance {
                            Balance::Raw => false,
                            Balance::Upper => s > 0.0,
                            Balance::Lower => s < 0.0,
                            Balance::Auto => unreachable!(),
                        };
                        let (local, far) = if balanced { ((-phase).exp(), C64::new(1.0, 0.0)) } else { (C64::new(1.0, 0.0), phase.exp()) };
                        a[(row, 0)] = I * sl * sig * local;
                        a[(row, g1c + r)] = local;
                        if let (Some(_), true) = (t, initial) {
                            let q = if balanced { rod.transform.eval_anchored(sl / sig)? } else { rod.transform.eval(sl / sig)? * local };
                            y[row] = decay * q;
                        }
                        if parallel {
                            a[(row, 1)] = -I * sl * sig * far;
                            a[(row, hc + r)] = -far;
                        } else {
                            let c = rod.far.as_ref().expect("finite star rod has a far condition");
                            if c.is_neumann() {
                                a[(row, hc + r)] = -I * sl * far;
                                y[row] += far * sig * sig * f;
                            } else {
                                a[(row, hc + r)] = (I * sl * c.beta1 / sig - 1.0) * far;
                                y[row] += far * I * sl * sig * f;
                            }
                        }
                    }
                }
            }
        }
        Ok(Assembled { matrix: a, rhs: y, forcing, premultiplied: premultiply })
    }

    fn unpack(&self, x: &DVector<C64>, forcing: &[C64]) -> Boundary {
        let p = self.problem;
        let m = p.m();
        let mut b = Boundary { g0: vec![x[0]; m], g1: vec![ZERO; m], h0: vec![ZERO; m], h1: vec![ZERO; m] };
        for (k, l) in self.labels.iter().enumerate().skip(1) {
            let v = x[k];
            match (l.quantity, l.rod) {
                (Quantity::H0, None) => b.h0.iter_mut().for_each(|h| *h = v),
                (q, Some(r)) => {
                    let val = v / p.rods[r].sigma.powi(l.sigma_power);
                    match q {
                        Quantity::G1 => b.g1[r] = val,
                        Quantity::H0 => b.h0[r] = val,
                        Quantity::H1 => b.h1[r] = val,
                        Quantity::G0 => b.g0[r] = val,
                    }
                }
                _ => {}
            }
        }
        if let Layout::FiniteStar { .. } = p.layout {
            for (r, rod) in p.rods.iter().enumerate() {
                let c = rod.far.as_ref().expect("far condition");
                if c.is_neumann() {
                    b.h1[r] = forcing[r];
                } else {
                    b.h0[r] = forcing[r] - c.beta1 * b.h1[r];
                }
            }
        }
        b
    }
}

#[derive(Debug, Clone)]
struct Boundary {
    g0: Vec<C64>,
    g1: Vec<C64>,
    h0: Vec<C64>,
    h1: Vec<C64>,
}

/// Resolved boundary and interface transforms at one λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralValues {
    pub lambda: C64,
    /// Per rod, in normalized order and orientation.
    pub g0: Vec<C64>,
    pub g1: Vec<C64>,
    pub h0: Vec<C64>,
    pub h1: Vec<C64>,
    /// Determinant of the matrix that was factorized (balanced or raw).
    pub det: C64,
    pub condition: f64,
    pub ill_conditioned: bool,
    /// True when every value carries the factor `e^{-λ²t}`.
    pub premultiplied: bool,
}

impl SpectralValues {
    /// `iλ g₀ + σ g₁`, the x = 0 combination in the solution integrand.
    pub fn g_combination(&self, r: usize, sigma: f64) -> C64 {
        I * self.lambda * self.g0[r] + sigma * self.g1[r]
    }

    /// `-iλ h₀ + σ h₁`, the x = L combination after `λ ↦ -λ`.
    pub fn h_combination(&self, r: usize, sigma: f64) -> C64 {
        -I * self.lambda * self.h0[r] + sigma * self.h1[r]
    }

    /// `Σ σ_r² g₁ʳ`.
    pub fn flux_g(&self, sigmas: &[f64]) -> C64 {
        self.g1.iter().zip(sigmas).map(|(g, s)| g * s * s).sum()
    }

    /// `Σ σ_r² h₁ʳ`.
    pub fn flux_h(&self, sigmas: &[f64]) -> C64 {
        self.h1.iter().zip(sigmas).map(|(h, s)| h * s * s).sum()
    }

    fn scaled(&self, c: f64) -> SpectralValues {
        let s = |v: &Vec<C64>| v.iter().map(|z| z * c).collect();
        SpectralValues { g0: s(&self.g0), g1: s(&self.g1), h0: s(&self.h0), h1: s(&self.h1), ..self.clone() }
    }
}

fn row_norm_product(a: &DMatrix<C64>) -> f64 {
    (0..a.nrows()).map(|i| a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max)).product()
}

fn one_norm(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn dense_solve(sys: &SpectralSystem, lambda: C64, asm: Assembled) -> Result<SpectralValues, DtnError> {
    let floor = SINGULARITY_EPS * row_norm_product(&asm.matrix);
    let lu = asm.matrix.clone().lu();
    let det = lu.determinant();
    if !(det.norm() > floor) {
        return Err(DtnError::NearSingular { lambda, det: det.norm(), floor });
    }
    let x = lu.solve(&asm.rhs).ok_or(DtnError::NearSingular { lambda, det: det.norm(), floor })?;
    let condition = lu.try_inverse().map(|inv| one_norm(&asm.matrix) * one_norm(&inv)).unwrap_or(f64::INFINITY);
    let b = sys.unpack(&x, &asm.forcing);
    Ok(SpectralValues {
        lambda,
        g0: b.g0,
        g1: b.g1,
        h0: b.h0,
        h1: b.h1,
        det,
        condition,
        ill_conditioned: condition > ILL_CONDITIONED,
        premultiplied: asm.premultiplied,
    })
}

/// Generic dense solve of the raw system.
pub fn solve_spectral_system(sys: &SpectralSystem, lambda: C64, t: f64) -> Result<SpectralValues, DtnError> {
    let asm = sys.assemble(lambda, t)?;
    dense_solve(sys, lambda, asm)
}

/// Dense solve of the balanced system; every value comes back multiplied by `e^{-λ²t}`.
pub fn solve_premultiplied(sys: &SpectralSystem, lambda: C64, t: f64) -> Result<SpectralValues, DtnError> {
    let asm = sys.assemble_balanced(lambda, t, Balance::Auto)?;
    dense_solve(sys, lambda, asm)
}

fn data_y(problem: &Problem, rhs: &RhsSpec, mu: C64, r: usize) -> Result<C64, DtnError> {
    if rhs.has(RhsTerm::Solution) {
        return Err(DtnError::UnknownTermPresent);
    }
    if !rhs.has(RhsTerm::Initial) {
        return Ok(ZERO);
    }
    Ok(problem.rods[r].transform.eval(mu)?)
}

/// Cramer's-rule solution for semi-infinite stars, raw (not premultiplied).
pub fn solve_semi_infinite_closed_form(problem: &Problem, lambda: C64, rhs: &RhsSpec) -> Result<SpectralValues, DtnError> {
    check_layout(problem, Layout::SemiInfinite)?;
    if lambda == ZERO {
        return Err(DtnError::SingularAtOrigin);
    }
    let m = problem.m();
    let sig: Vec<f64> = problem.rods.iter().map(|r| r.sigma).collect();
    let y: Vec<C64> = (0..m).map(|r| data_y(problem, rhs, -lambda / sig[r], r)).collect::<Result<_, _>>()?;
    let ssum: f64 = sig.iter().sum();
    let ysum: C64 = y.iter().sum();
    let g0 = -ysum / (I * lambda * ssum);
    let g1 = (0..m).map(|r| (y[r] * ssum - sig[r] * ysum) / (sig[r] * sig[r] * ssum)).collect();
    Ok(SpectralValues {
        lambda,
        g0: vec![g0; m],
        g1,
        h0: vec![ZERO; m],
        h1: vec![ZERO; m],
        det: I * lambda * ssum,
        condition: f64::NAN,
        ill_conditioned: false,
        premultiplied: false,
    })
}

/// The sums and per-rod trigonometric values entering the parallel-rods Cramer solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelCramerTerms {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    /// `sin(λL_p/σ_p)`
    pub s: Vec<C64>,
    /// `cos(λL_p/σ_p)`
    pub cp: Vec<C64>,
    /// Per-rod summands of `C` and `D`.
    pub c_terms: Vec<C64>,
    pub d_terms: Vec<C64>,
}

pub fn parallel_cramer_terms(problem: &Problem, lambda: C64, rhs: &RhsSpec) -> Result<ParallelCramerTerms, DtnError> {
    check_layout(problem, Layout::Parallel)?;
    let mut out = ParallelCramerTerms { a: ZERO, b: ZERO, c: ZERO, d: ZERO, s: vec![], cp: vec![], c_terms: vec![], d_terms: vec![] };
    for (r, rod) in problem.rods.iter().enumerate() {
        let arg = lambda * rod.length.expect("finite rod") / rod.sigma;
        let (s, c) = (arg.sin(), arg.cos());
        let e = (I * arg).exp();
        let yp = data_y(problem, rhs, lambda / rod.sigma, r)?;
        let ym = data_y(problem, rhs, -lambda / rod.sigma, r)?;
        let den = e - 1.0 / e;
        let ct = (yp - ym) / den;
        let dt = (yp * e - ym / e) / den;
        out.a += rod.sigma / s;
        out.b += rod.sigma * c / s;
        out.c += ct;
        out.d += dt;
        out.s.push(s);
        out.cp.push(c);
        out.c_terms.push(ct);
        out.d_terms.push(dt);
    }
    Ok(out)
}

fn det3(m: [[C64; 3]; 3]) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cramer's-rule solution for parallel rods, raw (not premultiplied).
pub fn solve_parallel_closed_form(problem: &Problem, lambda: C64, rhs: &RhsSpec) -> Result<SpectralValues, DtnError> {
    let k = parallel_cramer_terms(problem, lambda, rhs)?;
    let m = problem.m();
    let q = k.a * k.a - k.b * k.b;
    let floor = SINGULARITY_EPS * (k.a.norm_sqr() + k.b.norm_sqr());
    let smin = k.s.iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min);
    if lambda == ZERO {
        return Err(DtnError::SingularAtOrigin);
    }
    if !(q.norm() > floor) || !(smin > SINGULARITY_EPS) || !q.is_finite() {
        return Err(DtnError::NearSingular { lambda, det: q.norm(), floor });
    }
    let g0 = (k.a * k.c - k.b * k.d) / (lambda * q);
    let h0 = (k.b * k.c - k.a * k.d) / (lambda * q);
    let mut g1 = Vec::with_capacity(m);
    let mut h1 = Vec::with_capacity(m);
    for (r, rod) in problem.rods.iter().enumerate() {
        let s = rod.sigma;
        let last = [s / k.s[r], s * k.cp[r] / k.s[r]];
        let gd = det3([[k.b, k.a, k.c], [k.a, k.b, k.d], [last[0], last[1], k.d_terms[r]]]);
        let hd = det3([[k.b, k.a, k.d], [k.a, k.b, k.c], [last[0], last[1], k.c_terms[r]]]);
        g1.push(-gd / (s * s * q));
        h1.push(-hd / (s * s * q));
    }
    Ok(SpectralValues {
        lambda,
        g0: vec![g0; m],
        g1,
        h0: vec![h0; m],
        h1,
        det: q,
        condition: f64::NAN,
        ill_conditioned: false,
        premultiplied: false,
    })
}

/// Values for data multiplied by `c`, for checking linearity.
pub fn scale_values(v: &SpectralValues, c: f64) -> SpectralValues {
    v.scaled(c)
}
