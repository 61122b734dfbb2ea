//! Rod networks: description, validation, classification and compatibility checks.

use crate::error::{ValidationError, ValidationErrors};
use crate::transforms::{InitialDatum, InitialProfile, TimeFunction};
use serde::Serialize;
use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Length {
    Finite(f64),
    Infinite,
}

impl Length {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Length::Finite(l) => Some(l),
            Length::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Length::Infinite)
    }
}

/// Conductivity, specific heat and density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalProps {
    pub k: f64,
    pub c: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodSpec {
    pub id: String,
    pub length: Length,
    /// Scaled diffusivity; the rod equation is `q_t = sigma² q_xx`.
    pub sigma: f64,
    pub physical: Option<PhysicalProps>,
}

impl RodSpec {
    pub fn new(id: &str, length: Length, sigma: f64) -> Self {
        RodSpec { id: id.to_string(), length, sigma, physical: None }
    }

    /// `sigma² = k c rho`.
    pub fn from_physical(id: &str, length: Length, props: PhysicalProps) -> Self {
        RodSpec { id: id.to_string(), length, sigma: (props.k * props.c * props.rho).sqrt(), physical: Some(props) }
    }
}

/// `beta0 q + beta1 q_x = data(t)` at a rod end, with `q_x` in the rod's own coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinCondition {
    pub beta0: f64,
    pub beta1: f64,
    pub data: TimeFunction,
}

impl RobinCondition {
    pub fn dirichlet(data: TimeFunction) -> Self {
        RobinCondition { beta0: 1.0, beta1: 0.0, data }
    }

    pub fn neumann(data: TimeFunction) -> Self {
        RobinCondition { beta0: 0.0, beta1: 1.0, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VertexKind {
    /// Continuity of temperature and balance of `sigma²`-weighted flux.
    Interface,
    Robin(RobinCondition),
    /// Far end of a semi-infinite rod.
    AtInfinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexCondition {
    pub id: String,
    pub kind: VertexKind,
}

impl VertexCondition {
    pub fn interface(id: &str) -> Self {
        VertexCondition { id: id.to_string(), kind: VertexKind::Interface }
    }

    pub fn robin(id: &str, cond: RobinCondition) -> Self {
        VertexCondition { id: id.to_string(), kind: VertexKind::Robin(cond) }
    }

    pub fn at_infinity(id: &str) -> Self {
        VertexCondition { id: id.to_string(), kind: VertexKind::AtInfinity }
    }
}

/// The rod emanates from `from` (x = 0) and terminates at `to` (x = L).
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub rod: String,
    pub from: String,
    pub to: String,
}

impl Incidence {
    pub fn new(rod: &str, from: &str, to: &str) -> Self {
        Incidence { rod: rod.to_string(), from: from.to_string(), to: to.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub rods: Vec<RodSpec>,
    pub vertices: Vec<VertexCondition>,
    pub incidence: Vec<Incidence>,
    pub initial: Vec<InitialDatum>,
    pub horizon: f64,
}

impl NetworkSpec {
    /// The same network with every initial and boundary datum multiplied by `c`.
    pub fn scaled_data(&self, c: f64) -> NetworkSpec {
        let mut out = self.clone();
        for d in &mut out.initial {
            d.profile = d.profile.scale(c);
        }
        for v in &mut out.vertices {
            if let VertexKind::Robin(r) = &mut v.kind {
                r.data = r.data.scale(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum End {
    /// x = 0
    Start,
    /// x = L
    Finish,
}

/// A network that passed [`validate_network`]. Indices follow the order of the spec lists.
#[derive(Debug, Clone)]
pub struct ValidatedNetwork {
    spec: NetworkSpec,
    ends: Vec<(usize, usize)>,
    datum: Vec<usize>,
    incident: Vec<Vec<(usize, End)>>,
}

impl ValidatedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn rod(&self, r: usize) -> &RodSpec {
        &self.spec.rods[r]
    }

    pub fn rod_count(&self) -> usize {
        self.spec.rods.len()
    }

    pub fn vertex(&self, v: usize) -> &VertexCondition {
        &self.spec.vertices[v]
    }

    /// `(from, to)` vertex indices.
    pub fn rod_ends(&self, r: usize) -> (usize, usize) {
        self.ends[r]
    }

    pub fn datum(&self, r: usize) -> &InitialDatum {
        &self.spec.initial[self.datum[r]]
    }

    pub fn incident(&self, v: usize) -> &[(usize, End)] {
        &self.incident[v]
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn rod_index(&self, id: &str) -> Option<usize> {
        self.spec.rods.iter().position(|r| r.id == id)
    }

    pub fn has_sampled_data(&self) -> bool {
        self.spec.initial.iter().any(|d| d.is_sampled())
    }
}

fn index_of<T>(items: &[T], key: impl Fn(&T) -> &str) -> (HashMap<&str, usize>, Vec<String>) {
    let mut map = HashMap::new();
    let mut dups = Vec::new();
    for (i, it) in items.iter().enumerate() {
        if map.insert(key(it), i).is_some() {
            dups.push(key(it).to_string());
        }
    }
    (map, dups)
}

/// Check the structural rules and return an indexed handle or every violation found.
pub fn validate_network(spec: NetworkSpec) -> Result<ValidatedNetwork, ValidationErrors> {
    let mut errs = Vec::new();
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        errs.push(ValidationError::InvalidHorizon(spec.horizon));
    }
    if spec.rods.is_empty() {
        errs.push(ValidationError::Empty);
        return Err(ValidationErrors(errs));
    }
    let (rod_ix, dups) = index_of(&spec.rods, |r| &r.id);
    errs.extend(dups.into_iter().map(ValidationError::DuplicateId));
    let (vert_ix, dups) = index_of(&spec.vertices, |v| &v.id);
    errs.extend(dups.into_iter().map(ValidationError::DuplicateId));

    for r in &spec.rods {
        let bad = |reason: &str| ValidationError::InvalidRod { rod: r.id.clone(), reason: reason.to_string() };
        if let Length::Finite(l) = r.length {
            if !(l > 0.0 && l.is_finite()) {
                errs.push(bad("length must be positive"));
            }
        }
        if !(r.sigma > 0.0 && r.sigma.is_finite()) {
            errs.push(bad("sigma must be positive"));
        }
        if let Some(p) = r.physical {
            if !(p.k > 0.0 && p.c > 0.0 && p.rho > 0.0) {
                errs.push(bad("k, c, rho must be positive"));
            } else if (r.sigma * r.sigma - p.k * p.c * p.rho).abs() > 1e-12 * p.k * p.c * p.rho {
                errs.push(bad("sigma^2 differs from k*c*rho"));
            }
        }
    }

    let nv = spec.vertices.len();
    let mut ends = vec![(usize::MAX, usize::MAX); spec.rods.len()];
    let mut seen = vec![false; spec.rods.len()];
    let mut incident: Vec<Vec<(usize, End)>> = vec![Vec::new(); nv];
    for inc in &spec.incidence {
        let Some(&r) = rod_ix.get(inc.rod.as_str()) else {
            errs.push(ValidationError::UnknownReference { context: "incidence".into(), id: inc.rod.clone() });
            continue;
        };
        if seen[r] {
            errs.push(ValidationError::InvalidRod { rod: inc.rod.clone(), reason: "listed twice in incidence".into() });
            continue;
        }
        seen[r] = true;
        let mut lookup = |id: &String| match vert_ix.get(id.as_str()) {
            Some(&v) => Some(v),
            None => {
                errs.push(ValidationError::UnknownReference { context: format!("rod {}", inc.rod), id: id.clone() });
                None
            }
        };
        if let (Some(a), Some(b)) = (lookup(&inc.from), lookup(&inc.to)) {
            ends[r] = (a, b);
            incident[a].push((r, End::Start));
            incident[b].push((r, End::Finish));
        }
    }
    for (r, rod) in spec.rods.iter().enumerate() {
        if !seen[r] {
            errs.push(ValidationError::InvalidRod { rod: rod.id.clone(), reason: "missing from incidence".into() });
        }
    }

    for (v, vc) in spec.vertices.iter().enumerate() {
        let deg = incident[v].len();
        let bad = |reason: String| ValidationError::InvalidVertex { vertex: vc.id.clone(), reason };
        match &vc.kind {
            VertexKind::Robin(c) => {
                if c.beta0 == 0.0 && c.beta1 == 0.0 {
                    errs.push(ValidationError::DegenerateRobin { vertex: vc.id.clone() });
                } else if !(c.beta0.is_finite() && c.beta1.is_finite()) {
                    errs.push(bad("non-finite Robin coefficients".into()));
                }
                if deg > 1 {
                    errs.push(bad(format!("boundary vertex has {deg} rods")));
                }
            }
            VertexKind::AtInfinity => {
                if deg > 0 && !incident[v].iter().all(|&(r, e)| e == End::Finish && spec.rods[r].length.is_infinite()) {
                    errs.push(bad("only the far end of a semi-infinite rod may sit at infinity".into()));
                }
            }
            VertexKind::Interface => {}
        }
    }

    for (r, rod) in spec.rods.iter().enumerate() {
        if !rod.length.is_infinite() || ends[r].0 == usize::MAX {
            continue;
        }
        let (a, b) = ends[r];
        let far = &spec.vertices[b];
        if incident[b].len() > 1 || a == b {
            errs.push(ValidationError::InfiniteEdgeAtJunction { rod: rod.id.clone(), vertex: far.id.clone() });
        } else if far.kind != VertexKind::AtInfinity {
            errs.push(ValidationError::InvalidVertex {
                vertex: far.id.clone(),
                reason: format!("far end of semi-infinite rod {} must be marked at infinity", rod.id),
            });
        }
    }

    // connectivity
    if nv > 0 && errs.is_empty() {
        let mut reached = vec![false; nv];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(r, _) in &incident[v] {
                let (a, b) = ends[r];
                for w in [a, b] {
                    if !reached[w] {
                        reached[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        if let Some(v) = reached.iter().position(|&x| !x) {
            errs.push(ValidationError::DisconnectedGraph {
                root: spec.vertices[0].id.clone(),
                vertex: spec.vertices[v].id.clone(),
            });
        }
    }

    let mut datum = vec![usize::MAX; spec.rods.len()];
    for (i, d) in spec.initial.iter().enumerate() {
        let Some(&r) = rod_ix.get(d.rod.as_str()) else {
            errs.push(ValidationError::UnknownReference { context: "initial datum".into(), id: d.rod.clone() });
            continue;
        };
        if datum[r] != usize::MAX {
            errs.push(ValidationError::InvalidDatum { rod: d.rod.clone(), reason: "more than one initial datum".into() });
            continue;
        }
        datum[r] = i;
        let rod = &spec.rods[r];
        match (&d.profile, rod.length) {
            (InitialProfile::Closed(f), Length::Infinite) => {
                if !f.decays() {
                    errs.push(ValidationError::NonDecayingDatum { rod: d.rod.clone() });
                }
            }
            (InitialProfile::Sampled { .. }, Length::Infinite) => errs.push(ValidationError::InvalidDatum {
                rod: d.rod.clone(),
                reason: "sampled data are only accepted on finite rods".into(),
            }),
            (InitialProfile::Sampled { xs, values }, Length::Finite(l)) => {
                let ok = xs.len() >= 2
                    && xs.len() == values.len()
                    && xs.windows(2).all(|w| w[1] > w[0])
                    && xs[0].abs() <= 1e-12 * l
                    && (xs[xs.len() - 1] - l).abs() <= 1e-12 * l
                    && values.iter().all(|v| v.is_finite());
                if !ok {
                    errs.push(ValidationError::InvalidDatum {
                        rod: d.rod.clone(),
                        reason: "samples must be finite and cover [0, L] on an increasing grid".into(),
                    });
                }
            }
            (InitialProfile::Closed(_), Length::Finite(_)) => {}
        }
    }
    for (r, rod) in spec.rods.iter().enumerate() {
        if datum[r] == usize::MAX {
            errs.push(ValidationError::MissingInitialDatum { rod: rod.id.clone() });
        }
    }

    if errs.is_empty() {
        Ok(ValidatedNetwork { spec, ends, datum, incident })
    } else {
        Err(ValidationErrors(errs))
    }
}

/// Which of the solvable configurations a network belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConfigClass {
    /// Semi-infinite rods emanating from one junction.
    SemiInfiniteStar { m: usize, junction: usize },
    /// Finite rods sharing both end vertices, oriented from `source` to `sink`.
    ParallelRods { m: usize, source: usize, sink: usize },
    /// Finite rods meeting at one junction, each with a Robin far end.
    /// `order` lists rod indices with the Neumann-ended rods first.
    FiniteStar { m: usize, m_neumann: usize, junction: usize, order: Vec<usize> },
    Unsupported { reason: String },
}

impl ConfigClass {
    pub fn name(&self) -> &'static str {
        match self {
            ConfigClass::SemiInfiniteStar { .. } => "semi-infinite star",
            ConfigClass::ParallelRods { .. } => "parallel rods",
            ConfigClass::FiniteStar { .. } => "finite star",
            ConfigClass::Unsupported { .. } => "unsupported",
        }
    }
}

pub fn classify_configuration(net: &ValidatedNetwork) -> ConfigClass {
    let unsupported = |reason: &str| ConfigClass::Unsupported { reason: reason.to_string() };
    let interfaces: Vec<usize> =
        (0..net.spec.vertices.len()).filter(|&v| net.vertex(v).kind == VertexKind::Interface).collect();
    let n = net.rod_count();
    if net.ends.iter().any(|&(a, b)| a == b) {
        return unsupported("a rod forms a loop");
    }
    match interfaces.as_slice() {
        [] => unsupported("no interface vertex; a single rod with two boundary conditions is not one of the solvable classes"),
        &[j] => {
            if net.incident(j).len() != n {
                return unsupported("not every rod meets the junction");
            }
            let infinite = net.spec.rods.iter().filter(|r| r.length.is_infinite()).count();
            if infinite == n {
                return ConfigClass::SemiInfiniteStar { m: n, junction: j };
            }
            if infinite > 0 {
                return unsupported("star mixes finite and semi-infinite rods");
            }
            let mut neumann = Vec::new();
            let mut robin = Vec::new();
            for &(r, e) in net.incident(j) {
                let (a, b) = net.rod_ends(r);
                let far = if e == End::Start { b } else { a };
                match &net.vertex(far).kind {
                    VertexKind::Robin(c) if c.beta0 == 0.0 => neumann.push(r),
                    VertexKind::Robin(_) => robin.push(r),
                    _ => return unsupported("finite star rod without a boundary condition at its far end"),
                }
            }
            neumann.sort_unstable();
            robin.sort_unstable();
            let m_neumann = neumann.len();
            neumann.extend(robin);
            ConfigClass::FiniteStar { m: n, m_neumann, junction: j, order: neumann }
        }
        &[a, b] => {
            if n < 2 {
                return unsupported("a single rod between two interfaces leaves no interface problem");
            }
            let all_between = (0..n).all(|r| {
                let (x, y) = net.rod_ends(r);
                !net.rod(r).length.is_infinite() && ((x == a && y == b) || (x == b && y == a))
            });
            if !all_between {
                return unsupported("two interface vertices but the rods do not all join them");
            }
            ConfigClass::ParallelRods { m: n, source: a, sink: b }
        }
        _ => unsupported("more than two interface vertices (chains and general graphs are not solvable here)"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompatKind {
    Continuity,
    FluxBalance,
    Robin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatEntry {
    pub vertex: String,
    pub kind: CompatKind,
    pub residual: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub tol: f64,
    pub entries: Vec<CompatEntry>,
}

impl CompatibilityReport {
    pub fn is_clean(&self) -> bool {
        self.entries.iter().all(|e| !e.exceeds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &CompatEntry> {
        self.entries.iter().filter(|e| e.exceeds)
    }
}

/// 1e-10 for closed-form data, 1e-6 when any datum is sampled.
pub fn default_compat_tol(net: &ValidatedNetwork) -> f64 {
    if net.has_sampled_data() {
        1e-6
    } else {
        1e-10
    }
}

fn datum_value(net: &ValidatedNetwork, r: usize, e: End) -> (f64, f64) {
    let d = net.datum(r);
    let x = match e {
        End::Start => 0.0,
        End::Finish => net.rod(r).length.finite().unwrap_or(f64::INFINITY),
    };
    if x.is_infinite() {
        return (0.0, 0.0);
    }
    match &d.profile {
        InitialProfile::Closed(f) => (f.eval(x), f.derivative(x)),
        InitialProfile::Sampled { xs, values } => {
            let s = crate::transforms::Spline::natural(xs, values);
            (s.eval(x), s.derivative(x))
        }
    }
}

/// Residuals of the interface and boundary conditions at `t = 0`.
pub fn check_compatibility(net: &ValidatedNetwork, tol: f64) -> CompatibilityReport {
    let mut entries = Vec::new();
    let mut push = |vertex: &str, kind, residual: f64| {
        entries.push(CompatEntry { vertex: vertex.to_string(), kind, residual, exceeds: !(residual <= tol) });
    };
    for (v, vc) in net.spec.vertices.iter().enumerate() {
        match &vc.kind {
            VertexKind::Interface => {
                let vals: Vec<(f64, f64, f64)> = net
                    .incident(v)
                    .iter()
                    .map(|&(r, e)| {
                        let (q, qx) = datum_value(net, r, e);
                        let s2 = net.rod(r).sigma.powi(2);
                        let sign = if e == End::Start { 1.0 } else { -1.0 };
                        (q, sign * s2 * qx, s2 * qx.abs())
                    })
                    .collect();
                let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
                push(&vc.id, CompatKind::Continuity, if vals.is_empty() { 0.0 } else { hi - lo });
                push(&vc.id, CompatKind::FluxBalance, vals.iter().map(|v| v.1).sum::<f64>().abs());
            }
            VertexKind::Robin(c) => {
                for &(r, e) in net.incident(v) {
                    let (q, qx) = datum_value(net, r, e);
                    push(&vc.id, CompatKind::Robin, (c.beta0 * q + c.beta1 * qx - c.data.eval(0.0)).abs());
                }
            }
            VertexKind::AtInfinity => {}
        }
    }
    CompatibilityReport { tol, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ClosedForm;

    fn cf(s: &str) -> ClosedForm {
        ClosedForm::parse(s, "x").unwrap()
    }

    pub(crate) fn worked_example() -> NetworkSpec {
        let lens = [1.0, 1.0, 2.0];
        let sig = [2.0, 3.0, 1.0];
        let mut rods = Vec::new();
        let mut vertices = vec![VertexCondition::interface("J")];
        let mut incidence = Vec::new();
        let mut initial = Vec::new();
        for i in 0..3 {
            let id = format!("r{}", i + 1);
            rods.push(RodSpec::new(&id, Length::Finite(lens[i]), sig[i]));
            let f = if i == 0 { "sin(t)" } else { "0" };
            let vid = format!("e{}", i + 1);
            vertices.push(VertexCondition::robin(&vid, RobinCondition::dirichlet(TimeFunction::parse(f).unwrap())));
            incidence.push(Incidence::new(&id, "J", &vid));
            initial.push(InitialDatum::zero(&id));
        }
        NetworkSpec { rods, vertices, incidence, initial, horizon: std::f64::consts::PI }
    }

    fn semi_star(m: usize) -> NetworkSpec {
        let mut spec = NetworkSpec { rods: vec![], vertices: vec![VertexCondition::interface("J")], incidence: vec![], initial: vec![], horizon: 1.0 };
        for i in 0..m {
            let id = format!("r{i}");
            let far = format!("inf{i}");
            spec.rods.push(RodSpec::new(&id, Length::Infinite, 1.0 + i as f64));
            spec.vertices.push(VertexCondition::at_infinity(&far));
            spec.incidence.push(Incidence::new(&id, "J", &far));
            spec.initial.push(InitialDatum::closed(&id, cf("exp(-x)")));
        }
        spec
    }

    #[test]
    fn worked_example_is_valid_finite_star() {
        let net = validate_network(worked_example()).unwrap();
        match classify_configuration(&net) {
            ConfigClass::FiniteStar { m, m_neumann, order, .. } => {
                assert_eq!((m, m_neumann), (3, 0));
                assert_eq!(order, vec![0, 1, 2]);
            }
            c => panic!("{c:?}"),
        }
        let rep = check_compatibility(&net, 1e-10);
        assert!(rep.is_clean());
        assert!(rep.entries.iter().all(|e| e.residual < 1e-15), "{rep:?}");
    }

    #[test]
    fn single_rod_with_two_robin_ends_is_valid() {
        let spec = NetworkSpec {
            rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0)],
            vertices: vec![
                VertexCondition::robin("L", RobinCondition::dirichlet(TimeFunction::zero())),
                VertexCondition::robin("R", RobinCondition { beta0: 1.0, beta1: 2.0, data: TimeFunction::zero() }),
            ],
            incidence: vec![Incidence::new("a", "L", "R")],
            initial: vec![InitialDatum::zero("a")],
            horizon: 1.0,
        };
        let net = validate_network(spec).unwrap();
        assert!(matches!(classify_configuration(&net), ConfigClass::Unsupported { .. }));
    }

    #[test]
    fn infinite_rod_into_junction_rejected() {
        let mut spec = semi_star(2);
        // second rod's far vertex gets an extra finite rod
        spec.rods.push(RodSpec::new("extra", Length::Finite(1.0), 1.0));
        spec.vertices.push(VertexCondition::robin("b", RobinCondition::dirichlet(TimeFunction::zero())));
        spec.incidence.push(Incidence::new("extra", "inf1", "b"));
        spec.initial.push(InitialDatum::zero("extra"));
        let errs = validate_network(spec).unwrap_err();
        assert!(errs.0.iter().any(|e| matches!(e, ValidationError::InfiniteEdgeAtJunction { rod, .. } if rod == "r1")));
    }

    #[test]
    fn missing_datum_degenerate_robin_and_disconnected() {
        let mut spec = worked_example();
        spec.initial.pop();
        if let VertexKind::Robin(c) = &mut spec.vertices[1].kind {
            c.beta0 = 0.0;
        }
        spec.vertices.push(VertexCondition::interface("lonely"));
        let errs = validate_network(spec).unwrap_err().0;
        assert!(errs.iter().any(|e| matches!(e, ValidationError::MissingInitialDatum { rod } if rod == "r3")));
        assert!(errs.iter().any(|e| matches!(e, ValidationError::DegenerateRobin { .. })));

        let mut spec = worked_example();
        spec.vertices.push(VertexCondition::interface("lonely"));
        let errs = validate_network(spec).unwrap_err().0;
        assert!(errs.iter().any(|e| matches!(e, ValidationError::DisconnectedGraph { vertex, .. } if vertex == "lonely")));
    }

    #[test]
    fn non_decaying_datum_on_infinite_rod() {
        let mut spec = semi_star(1);
        spec.initial[0] = InitialDatum::closed("r0", cf("1"));
        let errs = validate_network(spec).unwrap_err().0;
        assert!(matches!(errs[0], ValidationError::NonDecayingDatum { .. }));
    }

    #[test]
    fn physical_triple_sets_sigma() {
        let r = RodSpec::from_physical("a", Length::Finite(1.0), PhysicalProps { k: 2.0, c: 3.0, rho: 1.5 });
        assert!((r.sigma * r.sigma - 9.0).abs() < 1e-14);
        let mut bad = r.clone();
        bad.sigma = 2.0;
        let spec = NetworkSpec {
            rods: vec![bad],
            vertices: vec![VertexCondition::interface("A"), VertexCondition::robin("B", RobinCondition::dirichlet(TimeFunction::zero()))],
            incidence: vec![Incidence::new("a", "A", "B")],
            initial: vec![InitialDatum::zero("a")],
            horizon: 1.0,
        };
        assert!(validate_network(spec).is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let net = validate_network(worked_example()).unwrap();
        let again = validate_network(net.spec().clone()).unwrap();
        assert_eq!(again.spec(), net.spec());
        assert_eq!(again.ends, net.ends);
    }

    #[test]
    fn classifies_semi_infinite_and_parallel() {
        let net = validate_network(semi_star(4)).unwrap();
        assert!(matches!(classify_configuration(&net), ConfigClass::SemiInfiniteStar { m: 4, junction: 0 }));

        let spec = NetworkSpec {
            rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0), RodSpec::new("b", Length::Finite(2.0), 1.5)],
            vertices: vec![VertexCondition::interface("A"), VertexCondition::interface("B")],
            incidence: vec![Incidence::new("a", "A", "B"), Incidence::new("b", "B", "A")],
            initial: vec![InitialDatum::zero("a"), InitialDatum::zero("b")],
            horizon: 1.0,
        };
        let net = validate_network(spec).unwrap();
        assert!(matches!(classify_configuration(&net), ConfigClass::ParallelRods { m: 2, source: 0, sink: 1 }));
    }

    #[test]
    fn chain_with_insulated_ends_is_unsupported() {
        let spec = NetworkSpec {
            rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0), RodSpec::new("b", Length::Finite(1.0), 1.0)],
            vertices: vec![VertexCondition::interface("A"), VertexCondition::interface("M"), VertexCondition::interface("B")],
            incidence: vec![Incidence::new("a", "A", "M"), Incidence::new("b", "M", "B")],
            initial: vec![InitialDatum::zero("a"), InitialDatum::zero("b")],
            horizon: 1.0,
        };
        let net = validate_network(spec).unwrap();
        assert!(matches!(classify_configuration(&net), ConfigClass::Unsupported { .. }));
    }

    #[test]
    fn neumann_rods_come_first_and_relabeling_is_consistent() {
        let mut spec = worked_example();
        if let VertexKind::Robin(c) = &mut spec.vertices[3].kind {
            c.beta0 = 0.0;
            c.beta1 = 1.0;
        }
        let net = validate_network(spec.clone()).unwrap();
        let ConfigClass::FiniteStar { m_neumann, order, .. } = classify_configuration(&net) else { panic!() };
        assert_eq!(m_neumann, 1);
        assert_eq!(order, vec![2, 0, 1]);
        let ids: Vec<&str> = order.iter().map(|&r| net.rod(r).id.as_str()).collect();

        // permute the rod list; the Neumann rod must still lead and the id sequence follows the new listing
        spec.rods.rotate_left(1);
        let net2 = validate_network(spec).unwrap();
        let ConfigClass::FiniteStar { m_neumann: mn2, order: o2, .. } = classify_configuration(&net2) else { panic!() };
        assert_eq!(mn2, 1);
        let ids2: Vec<&str> = o2.iter().map(|&r| net2.rod(r).id.as_str()).collect();
        assert_eq!(ids2[0], "r3");
        let mut a = ids.clone();
        let mut b = ids2.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn continuity_violation_detected() {
        let spec = NetworkSpec {
            rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0), RodSpec::new("b", Length::Finite(1.0), 1.0)],
            vertices: vec![
                VertexCondition::interface("J"),
                VertexCondition::robin("A", RobinCondition::neumann(TimeFunction::zero())),
                VertexCondition::robin("B", RobinCondition::neumann(TimeFunction::zero())),
            ],
            incidence: vec![Incidence::new("a", "J", "A"), Incidence::new("b", "J", "B")],
            initial: vec![InitialDatum::closed("a", cf("1")), InitialDatum::zero("b")],
            horizon: 1.0,
        };
        let net = validate_network(spec).unwrap();
        let rep = check_compatibility(&net, 1e-10);
        let c = rep.entries.iter().find(|e| e.kind == CompatKind::Continuity).unwrap();
        assert_eq!(c.residual, 1.0);
        assert!(c.exceeds && !rep.is_clean());
    }

    #[test]
    fn equal_constants_are_compatible() {
        let spec = NetworkSpec {
            rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0), RodSpec::new("b", Length::Finite(2.0), 3.0)],
            vertices: vec![
                VertexCondition::interface("J"),
                VertexCondition::robin("A", RobinCondition::neumann(TimeFunction::zero())),
                VertexCondition::robin("B", RobinCondition::neumann(TimeFunction::zero())),
            ],
            incidence: vec![Incidence::new("a", "J", "A"), Incidence::new("b", "B", "J")],
            initial: vec![InitialDatum::closed("a", cf("2.5")), InitialDatum::closed("b", cf("2.5"))],
            horizon: 1.0,
        };
        let net = validate_network(spec).unwrap();
        assert!(check_compatibility(&net, 1e-12).is_clean());
    }
}
