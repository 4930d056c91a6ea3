//! Mixed continuous/integer/categorical parameter spaces with conditional
//! activation, uniform sampling, and a flat numeric encoding for surrogate
//! models.
//!
//! Inactive parameters (e.g. middle-finger parameters of a two-finger hand)
//! are absent from a [`DesignPoint`] and encoded as a NaN sentinel in the
//! flat vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sentinel written into encoded vectors for inactive parameters.
pub const MISSING: f64 = f64::NAN;

/// Value domain of a single parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Continuous { lo: f64, hi: f64, unit: String },
    Integer { lo: i64, hi: i64, unit: String },
    Categorical { choices: Vec<String> },
}

impl Domain {
    pub fn continuous(lo: f64, hi: f64, unit: &str) -> Self {
        Domain::Continuous { lo, hi, unit: unit.to_string() }
    }

    pub fn categorical(choices: &[&str]) -> Self {
        Domain::Categorical { choices: choices.iter().map(|s| s.to_string()).collect() }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Domain::Continuous { lo, hi, .. } if !(lo < hi) => Err(Error::InvalidSpace(
                format!("parameter {name}: degenerate bounds [{lo}, {hi}]"),
            )),
            Domain::Integer { lo, hi, .. } if lo > hi => Err(Error::InvalidSpace(
                format!("parameter {name}: degenerate integer bounds [{lo}, {hi}]"),
            )),
            Domain::Categorical { choices } if choices.is_empty() => Err(Error::InvalidSpace(
                format!("parameter {name}: empty choice list"),
            )),
            _ => Ok(()),
        }
    }
}

/// Activation predicate: the parameter is active only when another
/// (earlier-declared) parameter holds a specific value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub param: String,
    pub equals: String,
}

impl Activation {
    /// Renders as the expression string used in the JSON schema.
    pub fn to_expr(&self) -> String {
        format!("{} == {}", self.param, self.equals)
    }

    pub fn parse_expr(expr: &str) -> Result<Self> {
        let mut parts = expr.splitn(2, "==");
        let (param, equals) = match (parts.next(), parts.next()) {
            (Some(p), Some(v)) => (p.trim(), v.trim()),
            _ => {
                return Err(Error::InvalidSpace(format!(
                    "cannot parse activation expression {expr:?}"
                )))
            }
        };
        Ok(Activation { param: param.to_string(), equals: equals.to_string() })
    }
}

/// Specification of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
    pub group: String,
    pub activation: Option<Activation>,
}

impl ParamSpec {
    pub fn new(name: &str, domain: Domain, group: &str) -> Self {
        ParamSpec { name: name.to_string(), domain, group: group.to_string(), activation: None }
    }

    pub fn active_when(mut self, param: &str, equals: &str) -> Self {
        self.activation = Some(Activation { param: param.to_string(), equals: equals.to_string() });
        self
    }
}

/// A concrete parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Cat(_) => None,
        }
    }

    /// String form used by activation predicates.
    fn as_key(&self) -> String {
        match self {
            ParamValue::Float(v) => format!("{v}"),
            ParamValue::Int(v) => format!("{v}"),
            ParamValue::Cat(s) => s.clone(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_key())
    }
}

/// An ordered, validated collection of [`ParamSpec`]s.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    id: String,
    params: Vec<ParamSpec>,
    index: HashMap<String, usize>,
}

impl DesignSpace {
    pub fn new(id: &str, params: Vec<ParamSpec>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, p) in params.iter().enumerate() {
            p.domain.validate(&p.name)?;
            if index.insert(p.name.clone(), i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate parameter {}", p.name)));
            }
            if let Some(act) = &p.activation {
                match index.get(&act.param) {
                    Some(&j) if j < i => {}
                    _ => {
                        return Err(Error::InvalidSpace(format!(
                            "parameter {} activation references {} which is not declared earlier",
                            p.name, act.param
                        )))
                    }
                }
            }
        }
        Ok(DesignSpace { id: id.to_string(), params, index })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    /// Group tag -> member names, in declaration order within each group.
    pub fn groups(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in &self.params {
            out.entry(p.group.clone()).or_default().push(p.name.clone());
        }
        out
    }

    /// Whether `spec` is active under the (possibly partial) assignment.
    fn is_active(&self, spec: &ParamSpec, values: &BTreeMap<String, ParamValue>) -> bool {
        match &spec.activation {
            None => true,
            Some(act) => values.get(&act.param).map(|v| v.as_key() == act.equals).unwrap_or(false),
        }
    }

    /// Names of parameters active under a complete point, in declaration order.
    pub fn active_params(&self, point: &DesignPoint) -> Vec<&ParamSpec> {
        self.params.iter().filter(|p| self.is_active(p, &point.values)).collect()
    }

    /// Checks that the point carries exactly the active parameters, each
    /// within bounds.
    pub fn validate(&self, point: &DesignPoint) -> Result<()> {
        if point.space_id != self.id {
            return Err(Error::InvalidPoint(format!(
                "point belongs to space {:?}, not {:?}",
                point.space_id, self.id
            )));
        }
        for p in &self.params {
            let active = self.is_active(p, &point.values);
            match (active, point.values.get(&p.name)) {
                (true, None) => {
                    return Err(Error::InvalidPoint(format!("missing active parameter {}", p.name)))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidPoint(format!(
                        "inactive parameter {} is present",
                        p.name
                    )))
                }
                (false, None) => {}
                (true, Some(v)) => self.check_value(p, v)?,
            }
        }
        for name in point.values.keys() {
            if !self.index.contains_key(name) {
                return Err(Error::InvalidPoint(format!("unknown parameter {name}")));
            }
        }
        Ok(())
    }

    fn check_value(&self, p: &ParamSpec, v: &ParamValue) -> Result<()> {
        let ok = match (&p.domain, v) {
            (Domain::Continuous { lo, hi, .. }, ParamValue::Float(x)) => {
                x.is_finite() && *x >= *lo && *x <= *hi
            }
            (Domain::Integer { lo, hi, .. }, ParamValue::Int(x)) => *x >= *lo && *x <= *hi,
            (Domain::Categorical { choices }, ParamValue::Cat(s)) => choices.iter().any(|c| c == s),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPoint(format!("parameter {} has invalid value {v}", p.name)))
        }
    }

    /// Draws every active parameter independently uniform over its domain.
    /// Activation is resolved in declaration (topological) order.
    pub fn sample_uniform(&self, seed: u64) -> DesignPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(&mut rng)
    }

    pub fn sample_with_rng<R: Rng>(&self, rng: &mut R) -> DesignPoint {
        let mut values = BTreeMap::new();
        for p in &self.params {
            if !self.is_active(p, &values) {
                continue;
            }
            let v = match &p.domain {
                Domain::Continuous { lo, hi, .. } => ParamValue::Float(rng.gen_range(*lo..*hi)),
                Domain::Integer { lo, hi, .. } => ParamValue::Int(rng.gen_range(*lo..=*hi)),
                Domain::Categorical { choices } => {
                    ParamValue::Cat(choices[rng.gen_range(0..choices.len())].clone())
                }
            };
            values.insert(p.name.clone(), v);
        }
        DesignPoint { space_id: self.id.clone(), values }
    }

    /// Flat numeric encoding: declaration-order columns, categoricals as
    /// ordinal choice indices, inactive parameters as [`MISSING`].
    pub fn encode(&self, point: &DesignPoint) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| match point.values.get(&p.name) {
                None => MISSING,
                Some(ParamValue::Float(x)) => *x,
                Some(ParamValue::Int(x)) => *x as f64,
                Some(ParamValue::Cat(s)) => match &p.domain {
                    Domain::Categorical { choices } => {
                        choices.iter().position(|c| c == s).map(|i| i as f64).unwrap_or(MISSING)
                    }
                    _ => MISSING,
                },
            })
            .collect()
    }

    /// Inverse of [`encode`](Self::encode). Rejects out-of-bounds entries,
    /// unknown ordinals, and values supplied for inactive parameters.
    pub fn decode(&self, vector: &[f64]) -> Result<DesignPoint> {
        if vector.len() != self.params.len() {
            return Err(Error::InvalidPoint(format!(
                "encoded vector has {} entries, space has {}",
                vector.len(),
                self.params.len()
            )));
        }
        let mut values = BTreeMap::new();
        for (p, &x) in self.params.iter().zip(vector) {
            let active = self.is_active(p, &values);
            if !active {
                if !x.is_nan() {
                    return Err(Error::InvalidPoint(format!(
                        "inactive parameter {} carries value {x}",
                        p.name
                    )));
                }
                continue;
            }
            if x.is_nan() {
                return Err(Error::InvalidPoint(format!(
                    "active parameter {} carries the missing sentinel",
                    p.name
                )));
            }
            let v = match &p.domain {
                Domain::Continuous { .. } => ParamValue::Float(x),
                Domain::Integer { .. } => {
                    if (x - x.round()).abs() > 1e-9 {
                        return Err(Error::InvalidPoint(format!(
                            "parameter {} expects an integer, got {x}",
                            p.name
                        )));
                    }
                    ParamValue::Int(x.round() as i64)
                }
                Domain::Categorical { choices } => {
                    let i = x.round();
                    if (x - i).abs() > 1e-9 || i < 0.0 || i as usize >= choices.len() {
                        return Err(Error::InvalidPoint(format!(
                            "parameter {} has unknown ordinal {x}",
                            p.name
                        )));
                    }
                    ParamValue::Cat(choices[i as usize].clone())
                }
            };
            values.insert(p.name.clone(), v);
        }
        let point = DesignPoint { space_id: self.id.clone(), values };
        self.validate(&point)?;
        Ok(point)
    }

    /// Column names in encoding order.
    pub fn column_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let params: Vec<_> = self
            .params
            .iter()
            .map(|p| {
                serde_json::json!({
                    "name": p.name,
                    "domain": p.domain,
                    "group": p.group,
                    "activation": p.activation.as_ref().map(|a| a.to_expr()),
                })
            })
            .collect();
        serde_json::json!({ "id": self.id, "params": params })
    }

    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let id = doc
            .get("id")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::InvalidSpace("missing space id".into()))?;
        let raw = doc
            .get("params")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::InvalidSpace("missing params array".into()))?;
        let mut params = Vec::with_capacity(raw.len());
        for entry in raw {
            let name = entry
                .get("name")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::InvalidSpace("parameter without name".into()))?;
            let domain: Domain = serde_json::from_value(
                entry.get("domain").cloned().unwrap_or(serde_json::Value::Null),
            )?;
            let group = entry.get("group").and_then(|v| v.as_str()).unwrap_or("default");
            let activation = match entry.get("activation") {
                Some(serde_json::Value::String(expr)) => Some(Activation::parse_expr(expr)?),
                _ => None,
            };
            params.push(ParamSpec {
                name: name.to_string(),
                domain,
                group: group.to_string(),
                activation,
            });
        }
        DesignSpace::new(id, params)
    }
}

/// A concrete assignment of the active parameters of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub space_id: String,
    pub values: BTreeMap<String, ParamValue>,
}

impl DesignPoint {
    pub fn new(space_id: &str) -> Self {
        DesignPoint { space_id: space_id.to_string(), values: BTreeMap::new() }
    }

    pub fn set(mut self, name: &str, value: ParamValue) -> Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(|v| v.as_f64())
    }

    pub fn cat(&self, name: &str) -> Option<&str> {
        match self.values.get(name) {
            Some(ParamValue::Cat(s)) => Some(s),
            _ => None,
        }
    }
}

/// One evaluated trial of a black-box objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: DesignPoint,
    pub score: f64,
    pub seed: u64,
    pub wall_time: f64,
    pub tag: String,
}

/// The 28-parameter power-grasp design space.
///
/// Groups and cardinalities: structural 3, finger-pose 7, thumb-pose 3,
/// palm-kernel 9, fingertip 2, link-lengths 4. The middle finger (digit 1)
/// only exists on three-finger hands, so its normal offset is conditional
/// on `finger_number == 3`.
pub fn build_power_grasp_space() -> DesignSpace {
    let c = Domain::continuous;
    let params = vec![
        // Structural categoricals come first so activation predicates can
        // reference them.
        ParamSpec::new("finger_code", Domain::categorical(&["1-1-1", "0-121"]), "structural"),
        ParamSpec::new("thumb_code", Domain::categorical(&["1-22", "0-22"]), "structural"),
        ParamSpec::new("finger_number", Domain::categorical(&["2", "3"]), "structural"),
        // Finger poses: index (digit 0) and pinky (digit 2) carry angle and
        // side offset; the middle finger carries only a normal offset.
        ParamSpec::new("finger0_angle", c(0.0, 30.0, "deg"), "finger-pose"),
        ParamSpec::new("finger2_angle", c(-30.0, 0.0, "deg"), "finger-pose"),
        ParamSpec::new("finger0_normal_offset", c(0.0, 5.0, "mm"), "finger-pose"),
        ParamSpec::new("finger1_normal_offset", c(0.0, 10.0, "mm"), "finger-pose")
            .active_when("finger_number", "3"),
        ParamSpec::new("finger2_normal_offset", c(0.0, 5.0, "mm"), "finger-pose"),
        ParamSpec::new("finger0_side_offset", c(0.0, 30.0, "mm"), "finger-pose"),
        ParamSpec::new("finger2_side_offset", c(-30.0, 0.0, "mm"), "finger-pose"),
        ParamSpec::new("thumb_angle", c(-30.0, 30.0, "deg"), "thumb-pose"),
        ParamSpec::new("thumb_normal_offset", c(-30.0, 30.0, "mm"), "thumb-pose"),
        ParamSpec::new("thumb_side_offset", c(-40.0, 10.0, "mm"), "thumb-pose"),
        ParamSpec::new("pad_max_height", c(0.0, 20.0, "mm"), "palm-kernel"),
        ParamSpec::new("kernel0_spread", c(0.05, 0.3, ""), "palm-kernel"),
        ParamSpec::new("kernel1_spread", c(0.05, 0.3, ""), "palm-kernel"),
        ParamSpec::new("kernel0_center_angle", c(0.0, 360.0, "deg"), "palm-kernel"),
        ParamSpec::new("kernel1_center_angle", c(0.0, 360.0, "deg"), "palm-kernel"),
        ParamSpec::new("kernel0_center_offset", c(0.0, 1.0, ""), "palm-kernel"),
        ParamSpec::new("kernel1_center_offset", c(0.0, 1.0, ""), "palm-kernel"),
        ParamSpec::new("kernel0_intensity", c(0.0, 1.0, ""), "palm-kernel"),
        ParamSpec::new("kernel1_intensity", c(0.0, 1.0, ""), "palm-kernel"),
        ParamSpec::new("tip_scale_y", c(1.0, 1.5, ""), "fingertip"),
        ParamSpec::new("tip_scale_z", c(0.5, 1.5, ""), "fingertip"),
        ParamSpec::new("link_added_length_0", c(0.0, 10.0, "mm"), "link-lengths"),
        ParamSpec::new("link_added_length_1", c(0.0, 10.0, "mm"), "link-lengths"),
        ParamSpec::new("link_added_length_2", c(0.0, 10.0, "mm"), "link-lengths"),
        ParamSpec::new("link_added_length_3", c(0.0, 10.0, "mm"), "link-lengths"),
    ];
    DesignSpace::new("power_grasp_v1", params).expect("builtin space is valid")
}
