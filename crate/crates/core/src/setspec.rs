//! JSON and command-line descriptions of sets.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::examples_gen::{generate, rule_of, GenError, RuleSpec};
use crate::intset::{IntegerSet, Interval};

/// `{"kind": "intervals" | "list" | "rule", ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Intervals {
        intervals: Vec<Interval>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<u64>,
    },
    List {
        members: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<u64>,
    },
    Rule {
        #[serde(with = "rule_ref")]
        rule: RuleSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<u64>,
    },
}

/// Accepts a rule name or a rule object; writes the object.
mod rule_ref {
    use super::*;

    pub fn serialize<S: Serializer>(r: &RuleSpec, s: S) -> Result<S::Ok, S::Error> {
        r.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RuleSpec, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(name) => name.parse().map_err(serde::de::Error::custom),
            other => serde_json::from_value(other).map_err(serde::de::Error::custom),
        }
    }
}

impl SetSpec {
    /// Materializes the set; `default_horizon` applies when the spec names none.
    pub fn build(&self, default_horizon: u64) -> Result<IntegerSet, GenError> {
        match self {
            SetSpec::Intervals { intervals, horizon } => {
                let h = horizon.unwrap_or_else(|| intervals.iter().map(|iv| iv.hi).max().unwrap_or(0).max(1));
                for iv in intervals {
                    if iv.lo == 0 || iv.lo > iv.hi {
                        return Err(GenError::InvalidParameters(format!("interval [{}, {}] is not in ℕ", iv.lo, iv.hi)));
                    }
                }
                Ok(IntegerSet::from_intervals(intervals.iter().copied(), h)?)
            }
            SetSpec::List { members, horizon } => {
                let h = horizon.unwrap_or_else(|| members.iter().copied().max().unwrap_or(0).max(1));
                if members.contains(&0) {
                    return Err(GenError::InvalidParameters("0 is not in ℕ".into()));
                }
                Ok(IntegerSet::from_members(members.iter().copied(), h)?)
            }
            SetSpec::Rule { rule, horizon } => generate(rule, horizon.unwrap_or(default_horizon)),
        }
    }

    /// Canonical description: the generator when one is attached, else the interval list.
    pub fn from_set(set: &IntegerSet) -> SetSpec {
        match rule_of(set) {
            Some(rule) => SetSpec::Rule { rule, horizon: Some(set.horizon()) },
            None => SetSpec::Intervals { intervals: set.intervals().collect(), horizon: Some(set.horizon()) },
        }
    }
}

/// Reads `--set` arguments: inline JSON, a path to a JSON file, or a rule name.
pub fn parse_set_arg(arg: &str) -> Result<SetSpec, GenError> {
    let t = arg.trim();
    let json = if t.starts_with('{') {
        Some(t.to_string())
    } else if Path::new(t).is_file() {
        Some(std::fs::read_to_string(t).map_err(|e| GenError::InvalidParameters(format!("{t}: {e}")))?)
    } else {
        None
    };
    match json {
        Some(j) => serde_json::from_str(&j).map_err(|e| {
            GenError::InvalidParameters(format!("malformed set JSON: {e}"))
        }),
        None => Ok(SetSpec::Rule { rule: t.parse()?, horizon: None }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_build_and_round_trip() {
        let cases = [
            r#"{"kind":"intervals","intervals":[[1,3],[5,9]],"horizon":20}"#,
            r#"{"kind":"list","members":[1,4,9],"horizon":10}"#,
            r#"{"kind":"rule","rule":"squares","horizon":100}"#,
            r#"{"kind":"rule","rule":{"rule":"blocks","p":"4","len":"linear"}}"#,
        ];
        for c in cases {
            let spec: SetSpec = serde_json::from_str(c).unwrap();
            let set = spec.build(1000).unwrap();
            let canon = serde_json::to_string(&SetSpec::from_set(&set)).unwrap();
            let again = serde_json::from_str::<SetSpec>(&canon).unwrap().build(1000).unwrap();
            assert_eq!(serde_json::to_string(&SetSpec::from_set(&again)).unwrap(), canon);
            assert_eq!(again.intervals().collect::<Vec<_>>(), set.intervals().collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_set_arg(r#"{"kind":"list","members":[0]}"#).unwrap().build(10).is_err());
        let e = parse_set_arg(r#"{"kind":"list", "members":[1,}"#).unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
        assert!(parse_set_arg("no-such-rule").is_err());
        assert!(matches!(parse_set_arg("squares").unwrap(), SetSpec::Rule { rule: RuleSpec::Squares, .. }));
    }
}
