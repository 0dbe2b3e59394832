//! Mixed-type search spaces and the normalized unit-cube coordinate system.
//!
//! Every tunable parameter maps onto `[0, 1]`: numeric parameters linearly
//! (or linearly in the log domain when `log` is set) and categorical
//! parameters through their choice index. All sampling and density math in
//! [`crate::distributions`] happens in these coordinates, so a Gaussian width
//! of `0.25` means the same thing for every dimension.
//!
//! Constant parameters are part of the space definition but carry no
//! coordinate: they never appear in a [`Configuration`] or [`UnitVector`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Continuous { lower: f64, upper: f64, log: bool },
    Integer { lower: i64, upper: i64, log: bool },
    Categorical { choices: Vec<String> },
    Constant { value: Value },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDef {
    pub name: String,
    pub kind: ParamKind,
}

impl ParameterDef {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, log: bool) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Continuous { lower, upper, log },
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64, log: bool) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Integer { lower, upper, log },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn constant(name: impl Into<String>, value: impl Into<Value>) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Constant {
                value: value.into(),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ParamKind::Constant { .. })
    }

    fn check(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::validation(&self.name, reason));
        match &self.kind {
            ParamKind::Continuous { lower, upper, log } => {
                if !(lower.is_finite() && upper.is_finite()) {
                    return fail("bounds must be finite");
                }
                if lower >= upper {
                    return fail("lower bound must be below upper bound");
                }
                if *log && *lower <= 0.0 {
                    return fail("log-scaled bounds must be positive");
                }
            }
            ParamKind::Integer { lower, upper, log } => {
                if lower >= upper {
                    return fail("lower bound must be below upper bound");
                }
                if *log && *lower <= 0 {
                    return fail("log-scaled bounds must be positive");
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return fail("categorical parameter needs at least one choice");
                }
                let unique: HashSet<&String> = choices.iter().collect();
                if unique.len() != choices.len() {
                    return fail("categorical choices must be unique");
                }
            }
            ParamKind::Constant { .. } => {}
        }
        Ok(())
    }
}

/// The single fidelity parameter of a space, e.g. training epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub name: String,
    pub lower: u64,
    pub upper: u64,
    #[serde(default)]
    pub log: bool,
}

/// A native value of one tunable parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Integer(i64),
    /// Index into the parameter's choices.
    Category(usize),
}

/// One point of the search space: a value per tunable (non-constant)
/// parameter, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    values: Vec<ParamValue>,
}

impl Configuration {
    pub fn new(values: Vec<ParamValue>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.values
    }

    /// Convenience for all-continuous spaces such as the Hartmann benchmarks.
    pub fn from_reals(xs: &[f64]) -> Self {
        Self::new(xs.iter().map(|&x| ParamValue::Real(x)).collect())
    }

    /// Numeric values as `f64`, or `None` if any dimension is categorical.
    pub fn as_reals(&self) -> Option<Vec<f64>> {
        self.values
            .iter()
            .map(|v| match *v {
                ParamValue::Real(x) => Some(x),
                ParamValue::Integer(i) => Some(i as f64),
                ParamValue::Category(_) => None,
            })
            .collect()
    }
}

/// Normalized coordinate of one tunable dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitCoord {
    Numeric(f64),
    /// Categorical dimensions keep their exact index; the real-valued
    /// coordinate `index / (arity - 1)` is derived.
    Category {
        index: usize,
        arity: usize,
    },
}

impl UnitCoord {
    pub fn value(&self) -> f64 {
        match *self {
            UnitCoord::Numeric(u) => u,
            UnitCoord::Category { index, arity } => {
                if arity <= 1 {
                    0.0
                } else {
                    index as f64 / (arity - 1) as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    pub coords: Vec<UnitCoord>,
}

impl UnitVector {
    pub fn reals(&self) -> Vec<f64> {
        self.coords.iter().map(UnitCoord::value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    parameters: Vec<ParameterDef>,
    fidelity: Fidelity,
    tunable: Vec<usize>,
}

impl SearchSpace {
    pub fn new(parameters: Vec<ParameterDef>, fidelity: Fidelity) -> Result<Self> {
        let mut names = HashSet::new();
        for p in &parameters {
            p.check()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::Space(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
        }
        if names.contains(fidelity.name.as_str()) {
            return Err(Error::Space(format!(
                "fidelity `{}` must not also be a tunable parameter",
                fidelity.name
            )));
        }
        if fidelity.lower == 0 || fidelity.lower >= fidelity.upper {
            return Err(Error::Space(format!(
                "fidelity bounds must satisfy 0 < lower < upper, got [{}, {}]",
                fidelity.lower, fidelity.upper
            )));
        }
        let tunable = parameters
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_constant())
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            parameters,
            fidelity,
            tunable,
        })
    }

    pub fn parameters(&self) -> &[ParameterDef] {
        &self.parameters
    }

    pub fn fidelity(&self) -> &Fidelity {
        &self.fidelity
    }

    /// Tunable parameters in configuration order.
    pub fn tunable(&self) -> impl Iterator<Item = &ParameterDef> + '_ {
        self.tunable.iter().map(move |&i| &self.parameters[i])
    }

    pub fn dim(&self) -> usize {
        self.tunable.len()
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.dim() {
            return Err(Error::Space(format!(
                "configuration has {} values, space has {} tunable parameters",
                config.values.len(),
                self.dim()
            )));
        }
        for (param, value) in self.tunable().zip(&config.values) {
            check_value(param, value)?;
        }
        Ok(())
    }

    pub fn normalize(&self, config: &Configuration) -> Result<UnitVector> {
        self.validate(config)?;
        let coords = self
            .tunable()
            .zip(&config.values)
            .map(|(param, value)| match (&param.kind, *value) {
                (ParamKind::Continuous { lower, upper, log }, ParamValue::Real(x)) => {
                    UnitCoord::Numeric(to_unit(x, *lower, *upper, *log))
                }
                (ParamKind::Integer { lower, upper, log }, ParamValue::Integer(x)) => {
                    UnitCoord::Numeric(to_unit(x as f64, *lower as f64, *upper as f64, *log))
                }
                (ParamKind::Categorical { choices }, ParamValue::Category(index)) => {
                    UnitCoord::Category {
                        index,
                        arity: choices.len(),
                    }
                }
                _ => unreachable!("validated above"),
            })
            .collect();
        Ok(UnitVector { coords })
    }

    pub fn denormalize(&self, unit: &UnitVector) -> Result<Configuration> {
        if unit.coords.len() != self.dim() {
            return Err(Error::Space(format!(
                "unit vector has {} coordinates, space has {} tunable parameters",
                unit.coords.len(),
                self.dim()
            )));
        }
        let values = self
            .tunable()
            .zip(&unit.coords)
            .map(|(param, coord)| -> Result<ParamValue> {
                match (&param.kind, *coord) {
                    (ParamKind::Continuous { lower, upper, log }, UnitCoord::Numeric(u)) => {
                        check_unit(&param.name, u)?;
                        Ok(ParamValue::Real(from_unit(u, *lower, *upper, *log)))
                    }
                    (ParamKind::Integer { lower, upper, log }, UnitCoord::Numeric(u)) => {
                        check_unit(&param.name, u)?;
                        let x = from_unit(u, *lower as f64, *upper as f64, *log).round() as i64;
                        Ok(ParamValue::Integer(x.clamp(*lower, *upper)))
                    }
                    (ParamKind::Categorical { choices }, UnitCoord::Category { index, .. }) => {
                        if index >= choices.len() {
                            return Err(Error::validation(
                                &param.name,
                                format!("category index {index} out of range"),
                            ));
                        }
                        Ok(ParamValue::Category(index))
                    }
                    _ => Err(Error::validation(
                        &param.name,
                        "coordinate kind does not match parameter kind",
                    )),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { values })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let coords = self
            .tunable()
            .map(|param| match &param.kind {
                ParamKind::Categorical { choices } => UnitCoord::Category {
                    index: rng.random_range(0..choices.len()),
                    arity: choices.len(),
                },
                _ => UnitCoord::Numeric(rng.random::<f64>()),
            })
            .collect();
        self.denormalize(&UnitVector { coords })
            .expect("uniform coordinates are always valid")
    }

    /// Native JSON object for a configuration, constants included.
    pub fn config_to_json(&self, config: &Configuration) -> Map<String, Value> {
        let mut values = config.values.iter();
        let mut out = Map::new();
        for param in &self.parameters {
            let v = match &param.kind {
                ParamKind::Constant { value } => value.clone(),
                kind => match (kind, values.next()) {
                    (ParamKind::Categorical { choices }, Some(ParamValue::Category(i))) => {
                        Value::String(choices[*i].clone())
                    }
                    (_, Some(ParamValue::Real(x))) => Value::from(*x),
                    (_, Some(ParamValue::Integer(x))) => Value::from(*x),
                    _ => Value::Null,
                },
            };
            out.insert(param.name.clone(), v);
        }
        out
    }

    /// Parses a configuration from a native JSON object. Constants may be
    /// omitted; every tunable parameter must be present.
    pub fn config_from_json(&self, obj: &Map<String, Value>) -> Result<Configuration> {
        let values = self
            .tunable()
            .map(|param| {
                let raw = obj
                    .get(&param.name)
                    .ok_or_else(|| Error::validation(&param.name, "missing value"))?;
                let value = match &param.kind {
                    ParamKind::Continuous { .. } => raw
                        .as_f64()
                        .map(ParamValue::Real)
                        .ok_or_else(|| Error::validation(&param.name, "expected a number"))?,
                    ParamKind::Integer { .. } => match (raw.as_i64(), raw.as_f64()) {
                        (Some(i), _) => ParamValue::Integer(i),
                        (None, Some(x)) if x.fract() == 0.0 => ParamValue::Integer(x as i64),
                        _ => return Err(Error::validation(&param.name, "expected an integer")),
                    },
                    ParamKind::Categorical { choices } => {
                        let label = scalar_label(raw);
                        let index = choices.iter().position(|c| *c == label).ok_or_else(|| {
                            Error::validation(&param.name, format!("`{label}` is not a choice"))
                        })?;
                        ParamValue::Category(index)
                    }
                    ParamKind::Constant { .. } => unreachable!(),
                };
                check_value(param, &value)?;
                Ok(value)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { values })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "search space".into(),
            source,
        })?;
        file.into_space()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Value {
        let params: Vec<Value> = self
            .parameters
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Continuous { lower, upper, log } => serde_json::json!({
                    "name": p.name, "kind": "continuous", "lower": lower, "upper": upper, "log": log
                }),
                ParamKind::Integer { lower, upper, log } => serde_json::json!({
                    "name": p.name, "kind": "integer", "lower": lower, "upper": upper, "log": log
                }),
                ParamKind::Categorical { choices } => serde_json::json!({
                    "name": p.name, "kind": "categorical", "choices": choices
                }),
                ParamKind::Constant { value } => serde_json::json!({
                    "name": p.name, "kind": "constant", "value": value
                }),
            })
            .collect();
        serde_json::json!({ "parameters": params, "fidelity": self.fidelity })
    }
}

fn check_value(param: &ParameterDef, value: &ParamValue) -> Result<()> {
    let out_of_bounds = |x: String| {
        Err(Error::validation(
            &param.name,
            format!("value {x} outside bounds"),
        ))
    };
    match (&param.kind, *value) {
        (ParamKind::Continuous { lower, upper, .. }, ParamValue::Real(x)) => {
            if !(x >= *lower && x <= *upper) {
                return out_of_bounds(x.to_string());
            }
        }
        (ParamKind::Integer { lower, upper, .. }, ParamValue::Integer(x)) => {
            if x < *lower || x > *upper {
                return out_of_bounds(x.to_string());
            }
        }
        (ParamKind::Categorical { choices }, ParamValue::Category(i)) => {
            if i >= choices.len() {
                return Err(Error::validation(
                    &param.name,
                    format!("category index {i} not among {} choices", choices.len()),
                ));
            }
        }
        _ => {
            return Err(Error::validation(
                &param.name,
                "value type does not match parameter kind",
            ))
        }
    }
    Ok(())
}

fn check_unit(name: &str, u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::validation(
            name,
            format!("unit coordinate {u} outside [0, 1]"),
        ))
    }
}

fn to_unit(x: f64, lower: f64, upper: f64, log: bool) -> f64 {
    let u = if log {
        (x.ln() - lower.ln()) / (upper.ln() - lower.ln())
    } else {
        (x - lower) / (upper - lower)
    };
    u.clamp(0.0, 1.0)
}

fn from_unit(u: f64, lower: f64, upper: f64, log: bool) -> f64 {
    let x = if log {
        (lower.ln() + u * (upper.ln() - lower.ln())).exp()
    } else {
        lower + u * (upper - lower)
    };
    x.clamp(lower, upper)
}

fn scalar_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct SpaceFile {
    parameters: Vec<ParamEntry>,
    fidelity: Fidelity,
}

#[derive(Debug, Deserialize)]
struct ParamEntry {
    name: String,
    kind: String,
    lower: Option<f64>,
    upper: Option<f64>,
    #[serde(default)]
    log: bool,
    choices: Option<Vec<Value>>,
    value: Option<Value>,
}

impl SpaceFile {
    fn into_space(self) -> Result<SearchSpace> {
        let params = self
            .parameters
            .into_iter()
            .map(|e| {
                let bounds = || match (e.lower, e.upper) {
                    (Some(lo), Some(hi)) => Ok((lo, hi)),
                    _ => Err(Error::validation(
                        &e.name,
                        "numeric parameter needs lower and upper",
                    )),
                };
                let kind = match e.kind.as_str() {
                    "continuous" | "float" | "real" => {
                        let (lower, upper) = bounds()?;
                        ParamKind::Continuous {
                            lower,
                            upper,
                            log: e.log,
                        }
                    }
                    "integer" | "int" => {
                        let (lower, upper) = bounds()?;
                        if lower.fract() != 0.0 || upper.fract() != 0.0 {
                            return Err(Error::validation(&e.name, "integer bounds must be whole"));
                        }
                        ParamKind::Integer {
                            lower: lower as i64,
                            upper: upper as i64,
                            log: e.log,
                        }
                    }
                    "categorical" | "cat" => ParamKind::Categorical {
                        choices: e
                            .choices
                            .as_deref()
                            .unwrap_or_default()
                            .iter()
                            .map(scalar_label)
                            .collect(),
                    },
                    "constant" | "const" => ParamKind::Constant {
                        value: e
                            .value
                            .clone()
                            .ok_or_else(|| Error::validation(&e.name, "constant needs a value"))?,
                    },
                    other => {
                        return Err(Error::Unknown {
                            kind: "parameter kind",
                            name: other.to_string(),
                        })
                    }
                };
                Ok(ParameterDef { name: e.name, kind })
            })
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(params, self.fidelity)
    }
}
