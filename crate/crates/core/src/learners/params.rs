//! Hyperparameter schema per classifier kind.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{LearnError, ModelKind};

/// A hyperparameter value; `Unbounded` stands for "no limit" (written `inf`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperValue {
    Finite(f64),
    Unbounded,
}

impl HyperValue {
    pub fn as_f64(self) -> f64 {
        match self {
            HyperValue::Finite(x) => x,
            HyperValue::Unbounded => f64::INFINITY,
        }
    }
}

impl From<f64> for HyperValue {
    fn from(x: f64) -> Self {
        if x.is_infinite() && x > 0.0 {
            HyperValue::Unbounded
        } else {
            HyperValue::Finite(x)
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Finite(x) => write!(f, "{x}"),
            HyperValue::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for HyperValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "none" | "unbounded") {
            return Ok(HyperValue::Unbounded);
        }
        let x: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
        if x.is_nan() {
            return Err(format!("{s:?} is not a number"));
        }
        Ok(HyperValue::from(x))
    }
}

impl Serialize for HyperValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            HyperValue::Finite(x) => s.serialize_f64(*x),
            HyperValue::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for HyperValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(HyperValue::from(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Domain {
    /// Integer `>= min`, optionally `<= max`.
    Int { min: i64, max: Option<i64>, unbounded: bool },
    /// Real `> 0`.
    Positive,
}

struct ParamDef {
    name: &'static str,
    domain: Domain,
    default: HyperValue,
}

const fn int(name: &'static str, min: i64, default: f64) -> ParamDef {
    ParamDef {
        name,
        domain: Domain::Int { min, max: None, unbounded: false },
        default: HyperValue::Finite(default),
    }
}

const fn int_or_inf(name: &'static str, min: i64, default: HyperValue) -> ParamDef {
    ParamDef {
        name,
        domain: Domain::Int { min, max: None, unbounded: true },
        default,
    }
}

const fn positive(name: &'static str, default: f64) -> ParamDef {
    ParamDef {
        name,
        domain: Domain::Positive,
        default: HyperValue::Finite(default),
    }
}

const DT: &[ParamDef] = &[
    int_or_inf("max_depth", 0, HyperValue::Unbounded),
    int("min_samples_split", 2, 2.0),
    int("min_samples_leaf", 1, 1.0),
];

const RF: &[ParamDef] = &[
    int("n_estimators", 1, 100.0),
    int_or_inf("max_depth", 0, HyperValue::Unbounded),
    int("min_samples_split", 2, 2.0),
    int("min_samples_leaf", 1, 1.0),
    // default: ceil(sqrt(d)), resolved at fit time
    int_or_inf("max_features", 1, HyperValue::Finite(0.0)),
    ParamDef {
        name: "bootstrap",
        domain: Domain::Int { min: 0, max: Some(1), unbounded: false },
        default: HyperValue::Finite(1.0),
    },
];

const GBM: &[ParamDef] = &[
    int("n_estimators", 1, 100.0),
    positive("learning_rate", 0.1),
    int_or_inf("max_depth", 1, HyperValue::Finite(3.0)),
    int("min_samples_leaf", 1, 1.0),
];

const ADAB: &[ParamDef] = &[
    int("n_estimators", 1, 50.0),
    ParamDef {
        name: "max_depth",
        domain: Domain::Int { min: 1, max: Some(2), unbounded: false },
        default: HyperValue::Finite(1.0),
    },
];

const SVM: &[ParamDef] = &[positive("lambda", 1e-4), int("epochs", 1, 20.0)];

const NB: &[ParamDef] = &[positive("var_smoothing", 1e-9)];

const KNN: &[ParamDef] = &[int("k", 1, 5.0)];

fn schema(kind: ModelKind) -> &'static [ParamDef] {
    match kind {
        ModelKind::Dt => DT,
        ModelKind::Rf => RF,
        ModelKind::Gbm => GBM,
        ModelKind::AdaB => ADAB,
        ModelKind::Svm => SVM,
        ModelKind::Nb => NB,
        ModelKind::Knn => KNN,
    }
}

/// Names accepted for `kind`, in schema order.
pub fn param_names(kind: ModelKind) -> Vec<&'static str> {
    schema(kind).iter().map(|p| p.name).collect()
}

/// Check every supplied value against the kind's schema.
pub fn validate(kind: ModelKind, values: &BTreeMap<String, HyperValue>) -> Result<(), LearnError> {
    let defs = schema(kind);
    for (name, value) in values {
        let invalid = |reason: String| LearnError::InvalidHyperparameter {
            kind,
            name: name.clone(),
            reason,
        };
        let def = defs
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| invalid(format!("accepted: {}", param_names(kind).join(", "))))?;
        match (def.domain, value) {
            (Domain::Int { unbounded: true, .. }, HyperValue::Unbounded) => {}
            (Domain::Int { .. } | Domain::Positive, HyperValue::Unbounded) => {
                return Err(invalid("must be finite".into()))
            }
            (Domain::Int { min, max, .. }, HyperValue::Finite(x)) => {
                if x.fract() != 0.0 || !x.is_finite() {
                    return Err(invalid(format!("{x} is not an integer")));
                }
                if *x < min as f64 || max.is_some_and(|m| *x > m as f64) {
                    let range = match max {
                        Some(m) => format!("{min}..={m}"),
                        None => format!(">= {min}"),
                    };
                    return Err(invalid(format!("{x} out of range {range}")));
                }
            }
            (Domain::Positive, HyperValue::Finite(x)) => {
                if !(*x > 0.0) || !x.is_finite() {
                    return Err(invalid(format!("{x} must be positive")));
                }
            }
        }
    }
    Ok(())
}

/// Validated values with defaults filled in.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    values: BTreeMap<&'static str, HyperValue>,
}

impl Resolved {
    pub(crate) fn new(kind: ModelKind, values: &BTreeMap<String, HyperValue>) -> Result<Self, LearnError> {
        validate(kind, values)?;
        let values = schema(kind)
            .iter()
            .map(|d| (d.name, values.get(d.name).copied().unwrap_or(d.default)))
            .collect();
        Ok(Resolved { values })
    }

    fn get(&self, name: &str) -> HyperValue {
        self.values[name]
    }

    pub(crate) fn usize(&self, name: &str) -> usize {
        self.get(name).as_f64() as usize
    }

    /// Integer parameter where `Unbounded` maps to `None`.
    pub(crate) fn limit(&self, name: &str) -> Option<usize> {
        match self.get(name) {
            HyperValue::Finite(x) => Some(x as usize),
            HyperValue::Unbounded => None,
        }
    }

    pub(crate) fn f64(&self, name: &str) -> f64 {
        self.get(name).as_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, HyperValue)]) -> BTreeMap<String, HyperValue> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn unknown_names_are_rejected() {
        let err = validate(ModelKind::Dt, &map(&[("depth", HyperValue::Finite(3.0))])).unwrap_err();
        assert!(matches!(err, LearnError::InvalidHyperparameter { .. }));
        assert!(err.to_string().contains("max_depth"));
    }

    #[test]
    fn ranges_are_enforced() {
        use HyperValue::*;
        assert!(validate(ModelKind::Knn, &map(&[("k", Finite(0.0))])).is_err());
        assert!(validate(ModelKind::Knn, &map(&[("k", Finite(2.5))])).is_err());
        assert!(validate(ModelKind::Knn, &map(&[("k", Unbounded)])).is_err());
        assert!(validate(ModelKind::Svm, &map(&[("lambda", Finite(0.0))])).is_err());
        assert!(validate(ModelKind::AdaB, &map(&[("max_depth", Finite(3.0))])).is_err());
        assert!(validate(ModelKind::Dt, &map(&[("max_depth", Unbounded)])).is_ok());
        assert!(validate(ModelKind::Rf, &map(&[("bootstrap", Finite(0.0))])).is_ok());
    }

    #[test]
    fn defaults_fill_in() {
        let r = Resolved::new(ModelKind::Gbm, &BTreeMap::new()).unwrap();
        assert_eq!(r.usize("n_estimators"), 100);
        assert_eq!(r.f64("learning_rate"), 0.1);
        assert_eq!(r.limit("max_depth"), Some(3));
        let r = Resolved::new(ModelKind::Dt, &BTreeMap::new()).unwrap();
        assert_eq!(r.limit("max_depth"), None);
    }

    #[test]
    fn hyper_value_text() {
        assert_eq!("inf".parse::<HyperValue>().unwrap(), HyperValue::Unbounded);
        assert_eq!("0.05".parse::<HyperValue>().unwrap(), HyperValue::Finite(0.05));
        let json = serde_json::to_string(&vec![HyperValue::Unbounded, HyperValue::Finite(3.0)]).unwrap();
        assert_eq!(json, r#"["inf",3.0]"#);
        let back: Vec<HyperValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![HyperValue::Unbounded, HyperValue::Finite(3.0)]);
    }
}
