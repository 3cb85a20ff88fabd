use std::collections::HashMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::presets::{preset, ProblemSpec};
use crate::analysis::ModulusModel;
use crate::continuation::DEFAULT_SCHEDULE;
use crate::error::{Error, Result};
use crate::solver::SolverConfig;

/// Where the problem comes from: a named preset or an inline description,
/// optionally with scalar overrides applied on top.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProblemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl ProblemSource {
    pub fn resolve(&self) -> Result<ProblemSpec> {
        let mut spec = match (&self.preset, &self.spec) {
            (Some(name), None) => preset(name)?,
            (None, Some(spec)) => spec.clone(),
            _ => {
                return Err(Error::InvalidParams(
                    "give exactly one of problem.preset and problem.spec".into(),
                ))
            }
        };
        if let Some(s) = self.s {
            spec.s = s;
        }
        if let Some(p) = self.p {
            spec.p = p;
        }
        if let Some(e) = self.epsilon {
            spec.epsilon = e;
        }
        if let Some(t) = self.horizon {
            spec.horizon = t;
        }
        Ok(spec)
    }
}

/// ρ_k = ρ₀q^k for k < levels. Without `theta` the ladder is intrinsic:
/// θ = (ω₀/4)^{2−p}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub rho0: f64,
    pub q: f64,
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            rho0: 0.1,
            q: 0.9,
            levels: 8,
            theta: None,
        }
    }
}

/// A space-time anchor; `t` defaults to the end of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub points: Vec<AnchorSpec>,
    pub ladder: LadderSpec,
    pub model: ModulusModel,
    /// ω₀ for intrinsic scalings; by default max{osc of all stored samples, 1}.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    pub sequence_levels: usize,
    pub tail_radii: Vec<f64>,
    pub density_radii: Vec<f64>,
    pub c_audit: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            points: vec![AnchorSpec { x: vec![0.35], t: None }],
            ladder: LadderSpec::default(),
            model: ModulusModel::Interior,
            omega0: None,
            sequence_levels: 12,
            tail_radii: vec![0.05, 0.1],
            density_radii: vec![0.05, 0.1, 0.2],
            c_audit: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub epsilons: Vec<f64>,
    pub delta_resolve: f64,
    pub band_limit: f64,
    pub spread_limit: f64,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        Self {
            epsilons: DEFAULT_SCHEDULE.to_vec(),
            delta_resolve: 0.05,
            band_limit: 0.5,
            spread_limit: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSection {
    pub n_max: usize,
    pub tech1_samples: usize,
    pub tech1_iterations: usize,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            n_max: 100_000,
            tech1_samples: 20,
            tech1_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub solver: SolverConfig,
    pub analysis: AnalysisSection,
    pub continuation: ContinuationSection,
    pub lemma: LemmaSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource {
                preset: Some("melt1d".into()),
                ..ProblemSource::default()
            },
            solver: SolverConfig::default(),
            analysis: AnalysisSection::default(),
            continuation: ContinuationSection::default(),
            lemma: LemmaSection::default(),
            output: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn for_preset(name: &str) -> Self {
        Self {
            problem: ProblemSource {
                preset: Some(name.into()),
                ..ProblemSource::default()
            },
            ..Self::default()
        }
    }

    /// Canonical JSON: fixed field order, defaults filled in.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic checks; every violation is reported as "path: message".
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: String| out.push((path.to_string(), msg));
        let base = if self.problem.spec.is_some() {
            "problem.spec"
        } else {
            "problem"
        };
        match self.problem.resolve() {
            Err(e) => bad("problem", e.to_string()),
            Ok(spec) => {
                let sp = |k: &str| {
                    let overridden = match k {
                        "s" => self.problem.s.is_some(),
                        "p" => self.problem.p.is_some(),
                        "epsilon" => self.problem.epsilon.is_some(),
                        "horizon" => self.problem.horizon.is_some(),
                        _ => false,
                    };
                    if overridden {
                        format!("problem.{k}")
                    } else {
                        format!("{base}.{k}")
                    }
                };
                if !(spec.p > 2.0 && spec.p.is_finite()) {
                    bad(&sp("p"), format!("p must exceed 2, got {}", spec.p));
                }
                if !(spec.s > 0.0 && spec.s < 1.0) {
                    bad(&sp("s"), format!("s must lie in (0, 1), got {}", spec.s));
                }
                if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
                    bad(
                        &sp("epsilon"),
                        format!("epsilon must lie in (0, 1), got {}", spec.epsilon),
                    );
                }
                if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
                    bad(
                        &sp("horizon"),
                        format!("horizon must be positive, got {}", spec.horizon),
                    );
                }
                let b = &spec.lattice;
                if !(b.h > 0.0) {
                    bad(&format!("{base}.box.h"), format!("h must be positive, got {}", b.h));
                }
                if b.nodes.is_empty() || b.nodes.len() > 2 || b.origin.len() != b.nodes.len() {
                    bad(
                        &format!("{base}.box"),
                        "origin and nodes must both have length 1 or 2".into(),
                    );
                } else if b.nodes.iter().any(|&n| n < 3) {
                    bad(&format!("{base}.box.nodes"), "every axis needs at least 3 nodes".into());
                }
                if !(b.r_inf > 0.0) {
                    bad(
                        &format!("{base}.box.r_inf"),
                        format!("r_inf must be positive, got {}", b.r_inf),
                    );
                }
                let lambda = spec.kernel.lambda();
                if !(lambda >= 1.0) {
                    bad(
                        &format!("{base}.kernel.lambda"),
                        format!("lambda must be at least 1, got {lambda}"),
                    );
                }
                if let Err(e) = spec.g.far_value() {
                    bad(&format!("{base}.g"), e.to_string());
                }
            }
        }
        if let Err(e) = self.solver.validate() {
            bad("solver", e.to_string());
        }
        let a = &self.analysis;
        if a.points.is_empty() {
            bad("analysis.points", "at least one anchor is required".into());
        }
        for (i, z) in a.points.iter().enumerate() {
            if z.x.is_empty() || z.x.len() > 2 {
                bad(
                    &format!("analysis.points[{i}].x"),
                    "a point has 1 or 2 coordinates".into(),
                );
            }
        }
        let l = a.ladder;
        if !(l.rho0 > 0.0) {
            bad("analysis.ladder.rho0", format!("rho0 must be positive, got {}", l.rho0));
        }
        if !(l.q > 0.0 && l.q < 1.0) {
            bad("analysis.ladder.q", format!("q must lie in (0, 1), got {}", l.q));
        }
        if l.levels < 3 {
            bad("analysis.ladder.levels", "a ladder needs at least 3 levels".into());
        }
        if l.theta.is_some_and(|t| !(t > 0.0)) {
            bad("analysis.ladder.theta", "theta must be positive".into());
        }
        if a.omega0.is_some_and(|w| !(w >= 1.0)) {
            bad("analysis.omega0", "omega0 must be at least 1".into());
        }
        if a.tail_radii.iter().any(|&r| !(r > 0.0)) {
            bad("analysis.tail_radii", "radii must be positive".into());
        }
        if a.density_radii.is_empty() || a.density_radii.iter().any(|&r| !(r > 0.0)) {
            bad(
                "analysis.density_radii",
                "radii must be a nonempty list of positive lengths".into(),
            );
        }
        if !(a.c_audit > 0.0) {
            bad("analysis.c_audit", "c_audit must be positive".into());
        }
        let c = &self.continuation;
        if c.epsilons.is_empty() || c.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            bad(
                "continuation.epsilons",
                "a nonempty list of values in (0, 1) is required".into(),
            );
        } else if c.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            bad(
                "continuation.epsilons",
                "the schedule must be strictly decreasing".into(),
            );
        }
        if !(c.delta_resolve >= 0.0) {
            bad("continuation.delta_resolve", "delta_resolve must be nonnegative".into());
        }
        if !(c.band_limit > 0.0 && c.band_limit <= 1.0) {
            bad("continuation.band_limit", "band_limit must lie in (0, 1]".into());
        }
        if !(c.spread_limit > 0.0) {
            bad("continuation.spread_limit", "spread_limit must be positive".into());
        }
        if self.lemma.n_max == 0 || self.lemma.tech1_iterations == 0 {
            bad("lemma", "iteration counts must be positive".into());
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Leaf,
    Obj(&'static [(&'static str, Shape)]),
    /// Internally tagged by "type".
    Tagged(&'static [(&'static str, &'static [(&'static str, Shape)])]),
    /// Externally tagged: a single key naming the variant.
    External(&'static [(&'static str, &'static [(&'static str, Shape)])]),
    List(&'static Shape),
}

const DATUM: Shape = Shape::Tagged(&[
    ("constant", &[("value", Shape::Leaf)]),
    ("sine", &[("amplitude", Shape::Leaf), ("frequency", Shape::Leaf)]),
    (
        "log_modulus",
        &[
            ("c_g", Shape::Leaf),
            ("delta", Shape::Leaf),
            ("radius", Shape::Leaf),
            ("anchor", Shape::Leaf),
        ],
    ),
]);

const SPEC: Shape = Shape::Obj(&[
    ("s", Shape::Leaf),
    ("p", Shape::Leaf),
    (
        "kernel",
        Shape::Tagged(&[
            ("constant", &[("value", Shape::Leaf), ("lambda", Shape::Leaf)]),
            ("sin_sum", &[("amplitude", Shape::Leaf), ("lambda", Shape::Leaf)]),
        ]),
    ),
    ("epsilon", Shape::Leaf),
    (
        "box",
        Shape::Obj(&[
            ("origin", Shape::Leaf),
            ("h", Shape::Leaf),
            ("nodes", Shape::Leaf),
            ("r_inf", Shape::Leaf),
        ]),
    ),
    (
        "omega",
        Shape::Tagged(&[
            ("interval", &[("lo", Shape::Leaf), ("hi", Shape::Leaf)]),
            ("ball", &[("center", Shape::Leaf), ("radius", Shape::Leaf)]),
            ("rect", &[("lo", Shape::Leaf), ("hi", Shape::Leaf)]),
        ]),
    ),
    ("g", DATUM),
    ("u0", DATUM),
    ("horizon", Shape::Leaf),
]);

const SCHEMA: Shape = Shape::Obj(&[
    (
        "problem",
        Shape::Obj(&[
            ("preset", Shape::Leaf),
            ("spec", SPEC),
            ("s", Shape::Leaf),
            ("p", Shape::Leaf),
            ("epsilon", Shape::Leaf),
            ("horizon", Shape::Leaf),
        ]),
    ),
    (
        "solver",
        Shape::Obj(&[
            (
                "dt",
                Shape::External(&[
                    ("fixed", &[("steps", Shape::Leaf)]),
                    (
                        "intrinsic",
                        &[("c_t", Shape::Leaf), ("dt_min", Shape::Leaf), ("dt_max", Shape::Leaf)],
                    ),
                ]),
            ),
            ("newton_tol", Shape::Leaf),
            ("newton_max", Shape::Leaf),
            ("damping", Shape::Leaf),
        ]),
    ),
    (
        "analysis",
        Shape::Obj(&[
            (
                "points",
                Shape::List(&Shape::Obj(&[("x", Shape::Leaf), ("t", Shape::Leaf)])),
            ),
            (
                "ladder",
                Shape::Obj(&[
                    ("rho0", Shape::Leaf),
                    ("q", Shape::Leaf),
                    ("levels", Shape::Leaf),
                    ("theta", Shape::Leaf),
                ]),
            ),
            ("model", Shape::Leaf),
            ("omega0", Shape::Leaf),
            ("sequence_levels", Shape::Leaf),
            ("tail_radii", Shape::Leaf),
            ("density_radii", Shape::Leaf),
            ("c_audit", Shape::Leaf),
        ]),
    ),
    (
        "continuation",
        Shape::Obj(&[
            ("epsilons", Shape::Leaf),
            ("delta_resolve", Shape::Leaf),
            ("band_limit", Shape::Leaf),
            ("spread_limit", Shape::Leaf),
        ]),
    ),
    (
        "lemma",
        Shape::Obj(&[
            ("n_max", Shape::Leaf),
            ("tech1_samples", Shape::Leaf),
            ("tech1_iterations", Shape::Leaf),
        ]),
    ),
    ("output", Shape::Leaf),
    ("seed", Shape::Leaf),
]);

fn child(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn strip_fields(
    map: &mut Map<String, Value>,
    fields: &[(&str, Shape)],
    path: &str,
    skip: &[&str],
    unknown: &mut Vec<String>,
) {
    let keys: Vec<String> = map.keys().cloned().collect();
    for k in keys {
        if skip.contains(&k.as_str()) {
            continue;
        }
        match fields.iter().find(|(name, _)| *name == k) {
            Some((_, shape)) => strip(map.get_mut(&k).expect("present"), *shape, &child(path, &k), unknown),
            None => {
                unknown.push(child(path, &k));
                map.remove(&k);
            }
        }
    }
}

/// Removes keys the schema does not know, recording their paths.
fn strip(value: &mut Value, shape: Shape, path: &str, unknown: &mut Vec<String>) {
    match (shape, value) {
        (Shape::Obj(fields), Value::Object(map)) => strip_fields(map, fields, path, &[], unknown),
        (Shape::Tagged(variants), Value::Object(map)) => {
            let tag = map.get("type").and_then(Value::as_str).map(str::to_string);
            if let Some((_, fields)) = tag.and_then(|t| variants.iter().find(|(n, _)| *n == t)) {
                strip_fields(map, fields, path, &["type"], unknown);
            }
        }
        (Shape::External(variants), Value::Object(map)) if map.len() == 1 => {
            let (name, inner) = map.iter_mut().next().expect("one entry");
            if let (Some((_, fields)), Value::Object(inner)) = (variants.iter().find(|(n, _)| n == name), inner) {
                let p = child(path, name);
                strip_fields(inner, fields, &p, &[], unknown);
            }
        }
        (Shape::List(item), Value::Array(items)) => {
            for (i, v) in items.iter_mut().enumerate() {
                strip(v, *item, &format!("{path}[{i}]"), unknown);
            }
        }
        _ => {}
    }
}

/// Maps key paths ("a.b[2].c") to the 1-based line where their value starts.
fn key_lines(text: &str) -> HashMap<String, usize> {
    enum Frame {
        Obj(Option<String>),
        Arr(usize),
    }
    let mut out = HashMap::new();
    let mut stack: Vec<(String, Frame)> = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    let mut expecting_key = false;
    let current_path = |stack: &[(String, Frame)]| -> Option<String> {
        let (base, frame) = stack.last()?;
        match frame {
            Frame::Obj(Some(k)) => Some(child(base, k)),
            Frame::Obj(None) => None,
            Frame::Arr(i) => Some(format!("{base}[{i}]")),
        }
    };
    let mut mark = |stack: &[(String, Frame)], line: usize| {
        if let Some(p) = current_path(stack) {
            out.entry(p).or_insert(line);
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            '"' => {
                let mut s = String::new();
                while let Some(d) = chars.next() {
                    match d {
                        '\\' => {
                            if let Some(e) = chars.next() {
                                s.push(e);
                            }
                        }
                        '"' => break,
                        '\n' => {
                            line += 1;
                            s.push(d);
                        }
                        _ => s.push(d),
                    }
                }
                if expecting_key {
                    if let Some((_, Frame::Obj(k))) = stack.last_mut() {
                        *k = Some(s);
                    }
                    expecting_key = false;
                } else {
                    mark(&stack, line);
                }
            }
            '{' | '[' => {
                mark(&stack, line);
                let base = current_path(&stack).unwrap_or_default();
                if c == '{' {
                    stack.push((base, Frame::Obj(None)));
                    expecting_key = true;
                } else {
                    stack.push((base, Frame::Arr(0)));
                }
            }
            '}' | ']' => {
                stack.pop();
                expecting_key = false;
            }
            ',' => match stack.last_mut() {
                Some((_, Frame::Obj(_))) => expecting_key = true,
                Some((_, Frame::Arr(i))) => *i += 1,
                None => {}
            },
            ':' => {}
            c if c.is_whitespace() => {}
            _ => {
                mark(&stack, line);
                while let Some(&d) = chars.peek() {
                    if matches!(d, ',' | '}' | ']') || d.is_whitespace() {
                        break;
                    }
                    chars.next();
                }
            }
        }
    }
    out
}

fn located(lines: &HashMap<String, usize>, path: &str, msg: &str) -> String {
    let mut p = path.to_string();
    loop {
        if let Some(l) = lines.get(&p) {
            return format!("line {l}: {path}: {msg}");
        }
        match p.rfind(['.', '[']) {
            Some(i) => p.truncate(i),
            None => return format!("{path}: {msg}"),
        }
    }
}

fn section<T: DeserializeOwned + Default>(
    root: &mut Map<String, Value>,
    key: &str,
    errors: &mut Vec<(String, String)>,
) -> T {
    match root.remove(key) {
        None => T::default(),
        Some(v) => serde_json::from_value(v).unwrap_or_else(|e| {
            errors.push((key.to_string(), e.to_string()));
            T::default()
        }),
    }
}

/// Parses and validates a JSON run configuration, reporting every violation
/// with the line it refers to.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| Error::SchemaViolation(vec![format!("line {}: malformed JSON: {e}", e.line())]))?;
    let lines = key_lines(text);
    let Value::Object(_) = value else {
        return Err(Error::SchemaViolation(vec![
            "line 1: the configuration must be a JSON object".into(),
        ]));
    };
    let mut unknown = Vec::new();
    strip(&mut value, SCHEMA, "", &mut unknown);
    let mut errors: Vec<(String, String)> = unknown.into_iter().map(|p| (p, "unknown key".to_string())).collect();
    let Value::Object(mut root) = value else { unreachable!() };
    let problem: ProblemSource = section(&mut root, "problem", &mut errors);
    let solver: SolverConfig = section(&mut root, "solver", &mut errors);
    let analysis: AnalysisSection = section(&mut root, "analysis", &mut errors);
    let continuation: ContinuationSection = section(&mut root, "continuation", &mut errors);
    let lemma: LemmaSection = section(&mut root, "lemma", &mut errors);
    let output: Option<String> = section(&mut root, "output", &mut errors);
    let seed: u64 = section(&mut root, "seed", &mut errors);
    let config = RunConfig {
        problem,
        solver,
        analysis,
        continuation,
        lemma,
        output,
        seed,
    };
    // sections that failed to deserialize were replaced by defaults; their
    // semantic checks would only describe the defaults
    let broken: Vec<String> = errors
        .iter()
        .filter(|(p, m)| m != "unknown key" && !p.contains('.'))
        .map(|(p, _)| p.clone())
        .collect();
    errors.extend(config.violations().into_iter().filter(|(p, _)| {
        !broken
            .iter()
            .any(|b| p == b || p.starts_with(&format!("{b}.")) || p.starts_with(&format!("{b}[")))
    }));
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(Error::SchemaViolation(
            errors.iter().map(|(p, m)| located(&lines, p, m)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::SchemaViolation(v)) => v,
            other => panic!("expected a schema violation, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"problem": {"preset": "melt1d"}}"#).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.problem.resolve().unwrap(), preset("melt1d").unwrap());
    }

    #[test]
    fn p_two_is_rejected_with_line() {
        let text = "{\n  \"problem\": {\n    \"preset\": \"melt1d\",\n    \"p\": 2\n  }\n}";
        let v = violations(text);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("p must exceed 2"), "{v:?}");
        assert!(v[0].starts_with("line 4:"), "{v:?}");
    }

    #[test]
    fn violations_are_aggregated() {
        let text = r#"{
  "problem": {"preset": "melt1d", "bogus": 1},
  "analysis": {"ladder": {"rho0": 0.1, "q": 0.9, "levels": 8, "extra": true}},
  "colour": "red"
}"#;
        let v = violations(text);
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v.iter().any(|m| m.starts_with("line 2: problem.bogus")));
        assert!(v.iter().any(|m| m.starts_with("line 3: analysis.ladder.extra")));
        assert!(v.iter().any(|m| m.starts_with("line 4: colour")));
    }

    #[test]
    fn semantic_errors_are_aggregated() {
        let text = r#"{"problem": {"preset": "melt1d", "s": 1.5, "epsilon": 2},
 "continuation": {"epsilons": [0.1, 0.2]}}"#;
        let v = violations(text);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn unknown_keys_and_semantic_errors_together() {
        let text = "{\n \"problem\": {\"preset\": \"melt1d\", \"p\": 1.5},\n \"extra\": 1,\n \"seed\": \"x\"\n}";
        let v = violations(text);
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v
            .iter()
            .any(|e| e.starts_with("line 2:") && e.contains("p must exceed 2")));
        assert!(v.iter().any(|e| e.starts_with("line 3:") && e.contains("extra")));
        assert!(v.iter().any(|e| e.starts_with("line 4:") && e.contains("seed")));
    }

    #[test]
    fn inline_spec_unknown_variant_key() {
        let c = RunConfig {
            problem: ProblemSource {
                spec: Some(preset("logbdy").unwrap()),
                ..ProblemSource::default()
            },
            ..RunConfig::default()
        };
        let mut v: Value = serde_json::from_str(&c.to_canonical_json()).unwrap();
        v["problem"]["spec"]["g"]["shift"] = Value::from(1.0);
        let text = serde_json::to_string_pretty(&v).unwrap();
        let errs = violations(&text);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("problem.spec.g.shift"), "{errs:?}");
    }

    #[test]
    fn canonical_round_trip() {
        let text = r#"{"seed": 3, "problem": {"horizon": 0.05, "preset": "twophase1d"}}"#;
        let c = parse_config(text).unwrap();
        let canon = c.to_canonical_json();
        let again = parse_config(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_canonical_json(), canon);
        let pos: Vec<usize> = [
            "\"problem\"",
            "\"solver\"",
            "\"analysis\"",
            "\"continuation\"",
            "\"lemma\"",
            "\"seed\"",
        ]
        .iter()
        .map(|k| canon.find(k).unwrap())
        .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{canon}");
    }

    #[test]
    fn malformed_json_has_a_line() {
        let v = violations("{\n \"seed\": ,\n}");
        assert!(v[0].starts_with("line 2:"), "{v:?}");
    }
}
