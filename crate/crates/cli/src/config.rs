//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use dgshock_core::elements::MAX_DEGREE;
use dgshock_core::law::ConservationLaw;
use dgshock_core::mesh::SpaceTimeMesh;
use dgshock_core::problem::{ProblemData, Scenario};
use dgshock_core::solver::{FluxFamily, NewtonSettings, StabilizationConfig};
use dgshock_core::{Error as CoreError, Execution};
use thiserror::Error;

pub const MANDATORY: [&str; 5] = ["law", "scenario", "cells", "slabs", "p"];

/// Every accepted key, in the order [`RunConfig::to_text`] writes them.
pub const KEYS: [&str; 32] = [
    "law",
    "scenario",
    "left",
    "right",
    "x0",
    "amplitude",
    "value",
    "breaks",
    "values",
    "x_left",
    "x_right",
    "t_final",
    "cells",
    "slabs",
    "p",
    "c1",
    "c2",
    "c3",
    "beta",
    "flux",
    "c0_interior",
    "c0_boundary",
    "newton_max_iter",
    "newton_tol",
    "picard_max",
    "picard_tol",
    "perturbation",
    "seed",
    "q_list",
    "execution",
    "output_dir",
    "label",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("missing mandatory keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{key}: expected {expected}, got `{value}`")]
    Type {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Riemann,
    Sine,
    Constant,
    Piecewise,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Riemann => "riemann",
            ScenarioKind::Sine => "sine",
            ScenarioKind::Constant => "constant",
            ScenarioKind::Piecewise => "piecewise",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "riemann" => Ok(ScenarioKind::Riemann),
            "sine" => Ok(ScenarioKind::Sine),
            "constant" => Ok(ScenarioKind::Constant),
            "piecewise" => Ok(ScenarioKind::Piecewise),
            _ => Err(()),
        }
    }
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub law: String,
    pub scenario: ScenarioKind,
    pub left: f64,
    pub right: f64,
    pub x0: f64,
    pub amplitude: f64,
    pub value: f64,
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    pub x_left: f64,
    pub x_right: f64,
    pub t_final: f64,
    pub cells: usize,
    pub slabs: usize,
    pub p: usize,
    pub stabilization: StabilizationConfig,
    pub newton: NewtonSettings,
    pub q_list: Vec<u32>,
    pub execution: Execution,
    pub output_dir: PathBuf,
    /// Free-form tag echoed in the summary line.
    pub label: Option<String>,
}

impl RunConfig {
    /// Defaults for everything but the mandatory keys.
    pub fn new(law: &str, scenario: ScenarioKind, cells: usize, slabs: usize, p: usize) -> Self {
        let newton = NewtonSettings::default();
        RunConfig {
            law: law.to_string(),
            scenario,
            left: 1.0,
            right: 0.0,
            x0: 0.3,
            amplitude: 1.0,
            value: 0.0,
            breaks: Vec::new(),
            values: Vec::new(),
            x_left: 0.0,
            x_right: 1.0,
            t_final: 0.5,
            cells,
            slabs,
            p,
            stabilization: StabilizationConfig::default(),
            newton,
            q_list: vec![2, 4, 8],
            execution: Execution::Parallel,
            output_dir: PathBuf::from("out"),
            label: None,
        }
    }

    pub fn law(&self) -> Result<ConservationLaw, ConfigError> {
        ConservationLaw::from_name(&self.law).map_err(|e| invalid("law", e.to_string()))
    }

    pub fn scenario(&self) -> Scenario {
        match self.scenario {
            ScenarioKind::Riemann => Scenario::Riemann {
                left: self.left,
                right: self.right,
                x0: self.x0,
            },
            ScenarioKind::Sine => Scenario::Sine {
                amplitude: self.amplitude,
            },
            ScenarioKind::Constant => Scenario::Constant { value: self.value },
            ScenarioKind::Piecewise => Scenario::Piecewise {
                breaks: self.breaks.clone(),
                values: self.values.clone(),
            },
        }
    }

    pub fn problem(&self, law: &ConservationLaw) -> Result<ProblemData, ConfigError> {
        self.scenario()
            .build(law, [self.x_left, self.x_right], self.t_final)
            .map_err(|e| invalid("scenario", e.to_string()))
    }

    pub fn mesh(&self) -> Result<SpaceTimeMesh, ConfigError> {
        SpaceTimeMesh::build([self.x_left, self.x_right], self.t_final, self.cells, self.slabs)
            .map_err(|e| invalid("cells", e.to_string()))
    }

    /// The same run with `factor` times as many cells and slabs.
    pub fn refined(&self, factor: usize) -> Self {
        let mut c = self.clone();
        c.cells *= factor;
        c.slabs *= factor;
        c
    }

    /// Checks every constraint, including those that need the law and the data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cells == 0 {
            return Err(invalid("cells", "must be at least 1"));
        }
        if self.slabs == 0 {
            return Err(invalid("slabs", "must be at least 1"));
        }
        if self.p > MAX_DEGREE {
            return Err(invalid("p", format!("must be at most {MAX_DEGREE}, got {}", self.p)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if !(self.x_left < self.x_right) {
            return Err(invalid("x_right", "must exceed x_left"));
        }
        let s = &self.stabilization;
        for (key, v) in [("c1", s.c1), ("c2", s.c2), ("c3", s.c3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if !(s.beta > 0.0 && s.beta < 0.5) {
            return Err(invalid("beta", format!("beta must lie in (0, 0.5), got {}", s.beta)));
        }
        if self.newton.max_iter == 0 {
            return Err(invalid("newton_max_iter", "must be at least 1"));
        }
        if !(self.newton.abs_tol > 0.0) {
            return Err(invalid("newton_tol", "must be positive"));
        }
        if self.newton.max_picard == 0 {
            return Err(invalid("picard_max", "must be at least 1"));
        }
        if !(self.newton.picard_tol > 0.0) {
            return Err(invalid("picard_tol", "must be positive"));
        }
        if !(self.newton.perturbation >= 0.0 && self.newton.perturbation.is_finite()) {
            return Err(invalid("perturbation", "must be nonnegative"));
        }
        if self.q_list.iter().any(|&q| q == 0) {
            return Err(invalid("q_list", "entries must be positive"));
        }
        let law = self.law()?;
        let problem = self.problem(&law)?;
        let law = law.with_state_bound(problem.state_bound());
        s.validate(&law).map_err(|e| match &e {
            CoreError::InvalidStabilization(msg) if msg.starts_with("C0_interior") => invalid("c0_interior", msg.clone()),
            CoreError::InvalidStabilization(msg) if msg.starts_with("C0_boundary") => invalid("c0_boundary", msg.clone()),
            _ => invalid("flux", e.to_string()),
        })?;
        self.mesh()?;
        Ok(())
    }

    /// Canonical text form; [`parse_config`] reads it back to an equal value.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let s = &self.stabilization;
        let n = &self.newton;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("law", self.law.clone());
        put("scenario", self.scenario.name().into());
        put("left", format!("{:?}", self.left));
        put("right", format!("{:?}", self.right));
        put("x0", format!("{:?}", self.x0));
        put("amplitude", format!("{:?}", self.amplitude));
        put("value", format!("{:?}", self.value));
        put("breaks", list(&self.breaks));
        put("values", list(&self.values));
        put("x_left", format!("{:?}", self.x_left));
        put("x_right", format!("{:?}", self.x_right));
        put("t_final", format!("{:?}", self.t_final));
        put("cells", self.cells.to_string());
        put("slabs", self.slabs.to_string());
        put("p", self.p.to_string());
        put("c1", format!("{:?}", s.c1));
        put("c2", format!("{:?}", s.c2));
        put("c3", format!("{:?}", s.c3));
        put("beta", format!("{:?}", s.beta));
        put("flux", s.flux_family.to_string());
        if let Some(c) = s.c0_interior {
            put("c0_interior", format!("{c:?}"));
        }
        if let Some(c) = s.c0_boundary {
            put("c0_boundary", format!("{c:?}"));
        }
        put("newton_max_iter", n.max_iter.to_string());
        put("newton_tol", format!("{:?}", n.abs_tol));
        put("picard_max", n.max_picard.to_string());
        put("picard_tol", format!("{:?}", n.picard_tol));
        put("perturbation", format!("{:?}", n.perturbation));
        put("seed", n.seed.to_string());
        put(
            "q_list",
            self.q_list.iter().map(u32::to_string).collect::<Vec<_>>().join(", "),
        );
        put(
            "execution",
            match self.execution {
                Execution::Parallel => "parallel",
                Execution::Sequential => "sequential",
            }
            .into(),
        );
        put("output_dir", self.output_dir.display().to_string());
        if let Some(l) = &self.label {
            put("label", l.clone());
        }
        out
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Type {
        key: key.to_string(),
        expected,
        value: value.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<Vec<T>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| parse_value(key, item.trim(), expected))
        .collect()
}

/// Parses and validates a configuration. Unknown and repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if entries.insert(known, (line, value.trim().to_string())).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
    }
    let missing: Vec<String> = MANDATORY
        .iter()
        .filter(|k| !entries.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let get = |key: &str| entries.get(key).map(|(_, v)| v.as_str());

    let scenario_text = get("scenario").unwrap_or_default();
    let scenario = scenario_text.parse().map_err(|_| ConfigError::Type {
        key: "scenario".into(),
        expected: "one of riemann, sine, constant, piecewise",
        value: scenario_text.to_string(),
    })?;
    let mut c = RunConfig::new(
        get("law").unwrap_or_default(),
        scenario,
        parse_value("cells", get("cells").unwrap_or_default(), "a positive integer")?,
        parse_value("slabs", get("slabs").unwrap_or_default(), "a positive integer")?,
        parse_value("p", get("p").unwrap_or_default(), "a nonnegative integer")?,
    );
    const REAL: &str = "a real number";
    for (key, slot) in [
        ("left", &mut c.left),
        ("right", &mut c.right),
        ("x0", &mut c.x0),
        ("amplitude", &mut c.amplitude),
        ("value", &mut c.value),
        ("x_left", &mut c.x_left),
        ("x_right", &mut c.x_right),
        ("t_final", &mut c.t_final),
        ("c1", &mut c.stabilization.c1),
        ("c2", &mut c.stabilization.c2),
        ("c3", &mut c.stabilization.c3),
        ("beta", &mut c.stabilization.beta),
        ("newton_tol", &mut c.newton.abs_tol),
        ("picard_tol", &mut c.newton.picard_tol),
        ("perturbation", &mut c.newton.perturbation),
    ] {
        if let Some(v) = get(key) {
            *slot = parse_value(key, v, REAL)?;
        }
    }
    for (key, slot) in [
        ("newton_max_iter", &mut c.newton.max_iter),
        ("picard_max", &mut c.newton.max_picard),
    ] {
        if let Some(v) = get(key) {
            *slot = parse_value(key, v, "a positive integer")?;
        }
    }
    if let Some(v) = get("seed") {
        c.newton.seed = parse_value("seed", v, "a nonnegative integer")?;
    }
    if let Some(v) = get("breaks") {
        c.breaks = parse_list("breaks", v, "a comma-separated list of reals")?;
    }
    if let Some(v) = get("values") {
        c.values = parse_list("values", v, "a comma-separated list of reals")?;
    }
    if let Some(v) = get("q_list") {
        c.q_list = parse_list("q_list", v, "a comma-separated list of positive integers")?;
    }
    if let Some(v) = get("flux") {
        c.stabilization.flux_family = parse_value::<FluxFamily>("flux", v, "engquist_osher or lax_friedrichs")?;
    }
    for (key, slot) in [
        ("c0_interior", &mut c.stabilization.c0_interior),
        ("c0_boundary", &mut c.stabilization.c0_boundary),
    ] {
        if let Some(v) = get(key) {
            *slot = Some(parse_value(key, v, REAL)?);
        }
    }
    if let Some(v) = get("execution") {
        c.execution = match v {
            "parallel" => Execution::Parallel,
            "sequential" => Execution::Sequential,
            _ => {
                return Err(ConfigError::Type {
                    key: "execution".into(),
                    expected: "parallel or sequential",
                    value: v.to_string(),
                })
            }
        };
    }
    if let Some(v) = get("output_dir") {
        if v.is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        c.output_dir = PathBuf::from(v);
    }
    if let Some(v) = get("label") {
        c.label = Some(v.to_string());
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "law = burgers\nscenario = riemann\ncells = 8\nslabs = 4\np = 1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.cells, 8);
        assert_eq!(c.stabilization, StabilizationConfig::default());
        assert_eq!(c.q_list, vec![2, 4, 8]);
    }

    #[test]
    fn keys_list_is_complete_and_unique() {
        let mut sorted = KEYS.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), KEYS.len());
        for k in MANDATORY {
            assert!(KEYS.contains(&k));
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{MINIMAL}c1 = 0.25 # trailing\n");
        assert_eq!(parse_config(&text).unwrap().stabilization.c1, 0.25);
    }

    #[test]
    fn line_without_equals_is_a_syntax_error() {
        let err = parse_config("law burgers\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }
}
