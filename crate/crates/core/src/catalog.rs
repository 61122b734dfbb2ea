//! Reference networks used by the tests, the acceptance suite and the example configs.

use crate::expr::ClosedForm;
use crate::network::{Incidence, Length, NetworkSpec, RobinCondition, RodSpec, VertexCondition};
use crate::transforms::{InitialDatum, TimeFunction};

fn closed(src: &str) -> ClosedForm {
    ClosedForm::parse(src, "x").expect("catalog expression")
}

/// One rod on [0, 1], insulated at x = 0, held at zero at x = 1, starting from cos(πx/2).
///
/// Exact solution: `e^{-(π/2)² t} cos(πx/2)`.
pub fn insulated_cosine_rod() -> NetworkSpec {
    NetworkSpec {
        rods: vec![RodSpec::new("a", Length::Finite(1.0), 1.0)],
        vertices: vec![
            VertexCondition::interface("J"),
            VertexCondition::robin("end", RobinCondition::dirichlet(TimeFunction::zero())),
        ],
        incidence: vec![Incidence::new("a", "J", "end")],
        initial: vec![InitialDatum::closed("a", closed("cos(pi*x/2)"))],
        horizon: 1.0,
    }
}

/// Three rods meeting at one junction, zero initial data, the first rod driven by sin(t) at its far end.
pub fn three_rod_star() -> NetworkSpec {
    let lens = [1.0, 1.0, 2.0];
    let sig = [2.0, 3.0, 1.0];
    let mut spec = NetworkSpec { rods: vec![], vertices: vec![VertexCondition::interface("J")], incidence: vec![], initial: vec![], horizon: std::f64::consts::PI };
    for i in 0..3 {
        let id = format!("r{}", i + 1);
        let far = format!("e{}", i + 1);
        let f = if i == 0 { "sin(t)" } else { "0" };
        spec.rods.push(RodSpec::new(&id, Length::Finite(lens[i]), sig[i]));
        spec.vertices.push(VertexCondition::robin(&far, RobinCondition::dirichlet(TimeFunction::parse(f).expect("catalog expression"))));
        spec.incidence.push(Incidence::new(&id, "J", &far));
        spec.initial.push(InitialDatum::zero(&id));
    }
    spec
}

/// Two semi-infinite rods at one junction; a Gaussian bump on the first, nothing on the second.
pub fn semi_infinite_pair() -> NetworkSpec {
    let mut spec = NetworkSpec { rods: vec![], vertices: vec![VertexCondition::interface("J")], incidence: vec![], initial: vec![], horizon: 0.5 };
    for (i, datum) in ["x^2*exp(-(x-1)^2)", "0"].into_iter().enumerate() {
        let id = format!("r{}", i + 1);
        let far = format!("inf{}", i + 1);
        spec.rods.push(RodSpec::new(&id, Length::Infinite, 1.0));
        spec.vertices.push(VertexCondition::at_infinity(&far));
        spec.incidence.push(Incidence::new(&id, "J", &far));
        spec.initial.push(InitialDatum::closed(&id, closed(datum)));
    }
    spec
}

/// Rods joining the same two vertices, each starting from `data[r]`.
pub fn parallel_rods(lens: &[f64], sigmas: &[f64], data: &[&str], horizon: f64) -> NetworkSpec {
    let mut spec = NetworkSpec {
        rods: vec![],
        vertices: vec![VertexCondition::interface("A"), VertexCondition::interface("B")],
        incidence: vec![],
        initial: vec![],
        horizon,
    };
    for (i, ((&l, &s), d)) in lens.iter().zip(sigmas).zip(data).enumerate() {
        let id = format!("p{}", i + 1);
        spec.rods.push(RodSpec::new(&id, Length::Finite(l), s));
        spec.incidence.push(Incidence::new(&id, "A", "B"));
        spec.initial.push(InitialDatum::closed(&id, closed(d)));
    }
    spec
}
