//! Network documents: `[[rod]]`, `[[vertex]]`, `[[initial]]` tables and a `[run]` table.

use netheat::expr::ClosedForm;
use netheat::network::{Incidence, Length, NetworkSpec, PhysicalProps, RobinCondition, RodSpec, VertexCondition};
use netheat::transforms::{InitialDatum, InitialProfile, TimeFunction};
use serde::Deserialize;
use std::fmt;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    #[serde(default)]
    pub rod: Vec<RodEntry>,
    #[serde(default)]
    pub vertex: Vec<VertexEntry>,
    #[serde(default)]
    pub initial: Vec<InitialEntry>,
    pub run: RunEntry,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LengthEntry {
    Finite(f64),
    Named(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodEntry {
    pub id: String,
    pub length: LengthEntry,
    pub sigma: Option<f64>,
    pub k: Option<f64>,
    pub c: Option<f64>,
    pub rho: Option<f64>,
    pub from: String,
    pub to: String,
    /// Explicit output positions; otherwise `run.points` evenly spaced.
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEntry {
    pub id: String,
    /// interface, dirichlet, neumann, robin or infinity.
    pub kind: String,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub data: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialEntry {
    pub rod: String,
    pub q0: Option<String>,
    pub xs: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub horizon: f64,
    pub t: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Sampled length of semi-infinite rods.
    #[serde(default = "default_reach")]
    pub reach: f64,
    pub solver: Option<String>,
    pub mode: Option<String>,
    #[serde(default = "default_dt")]
    pub fdm_dt: f64,
    pub tail_tol: Option<f64>,
    pub compat_tol: Option<f64>,
}

fn default_points() -> usize {
    51
}

fn default_reach() -> f64 {
    5.0
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

pub fn parse(text: &str) -> Result<Document, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
}

impl Document {
    pub fn network(&self) -> Result<NetworkSpec, ConfigError> {
        let mut spec = NetworkSpec { rods: vec![], vertices: vec![], incidence: vec![], initial: vec![], horizon: self.run.horizon };
        for r in &self.rod {
            let length = match &r.length {
                LengthEntry::Finite(l) => Length::Finite(*l),
                LengthEntry::Named(s) if matches!(s.as_str(), "inf" | "infinite") => Length::Infinite,
                LengthEntry::Named(s) => return err(format!("rod {}: length {s:?} is neither a number nor \"inf\"", r.id)),
            };
            let rod = match (r.sigma, r.k, r.c, r.rho) {
                (Some(s), None, None, None) => RodSpec::new(&r.id, length, s),
                (None, Some(k), Some(c), Some(rho)) => RodSpec::from_physical(&r.id, length, PhysicalProps { k, c, rho }),
                _ => return err(format!("rod {}: give either sigma or all of k, c, rho", r.id)),
            };
            spec.rods.push(rod);
            spec.incidence.push(Incidence::new(&r.id, &r.from, &r.to));
        }
        for v in &self.vertex {
            let data = || -> Result<TimeFunction, ConfigError> {
                let src = v.data.as_deref().unwrap_or("0");
                TimeFunction::parse(src).map_err(|e| ConfigError(format!("vertex {}: {e}", v.id)))
            };
            let cond = match v.kind.as_str() {
                "interface" => VertexCondition::interface(&v.id),
                "infinity" => VertexCondition::at_infinity(&v.id),
                "dirichlet" => VertexCondition::robin(&v.id, RobinCondition::dirichlet(data()?)),
                "neumann" => VertexCondition::robin(&v.id, RobinCondition::neumann(data()?)),
                "robin" => {
                    let (Some(beta0), Some(beta1)) = (v.beta0, v.beta1) else {
                        return err(format!("vertex {}: robin needs beta0 and beta1", v.id));
                    };
                    VertexCondition::robin(&v.id, RobinCondition { beta0, beta1, data: data()? })
                }
                other => return err(format!("vertex {}: unknown kind {other:?}", v.id)),
            };
            spec.vertices.push(cond);
        }
        for d in &self.initial {
            let datum = match (&d.q0, &d.xs, &d.values) {
                (Some(src), None, None) => {
                    let f = ClosedForm::parse(src, "x").map_err(|e| ConfigError(format!("initial datum of {}: {e}", d.rod)))?;
                    InitialDatum::closed(&d.rod, f)
                }
                (None, Some(xs), Some(values)) => {
                    if xs.len() != values.len() || xs.len() < 2 {
                        return err(format!("initial datum of {}: xs and values must have the same length (at least 2)", d.rod));
                    }
                    InitialDatum { rod: d.rod.clone(), profile: InitialProfile::Sampled { xs: xs.clone(), values: values.clone() } }
                }
                _ => return err(format!("initial datum of {}: give q0, or xs and values", d.rod)),
            };
            spec.initial.push(datum);
        }
        Ok(spec)
    }

    pub fn check_times(&self) -> Result<(), ConfigError> {
        if self.run.t.is_empty() {
            return err("run.t lists no output times");
        }
        match self.run.t.iter().find(|&&t| !(t > 0.0 && t <= self.run.horizon)) {
            Some(t) => err(format!("output time {t} outside (0, {}]", self.run.horizon)),
            None => Ok(()),
        }
    }
}
