//! The DSL corpus: parameterized XML fragments plus the mini-maps they
//! reference.

pub mod map;
pub mod routes;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repository::{RepositoryConfig, TierName, NONE};
use crate::text::{fmt_num, xml_escape};
use crate::xosc::{parse_fragment, XmlElement};

pub use map::{Lane, Marking, MiniMap, Pose, Projection, SignalState, WaypointRef};
pub use routes::{route_random_search, NoRouteError, RouteCandidate, RouteSearch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FragmentKind {
    Weather,
    MapRef,
    SpawnActor,
    Event,
    Monitor,
    Autopilot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl ParamValue {
    fn render(&self) -> String {
        match self {
            ParamValue::Number(v) => fmt_num(*v),
            ParamValue::Text(s) => xml_escape(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Text(v)
    }
}

pub type Bindings = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamSpec {
    Number {
        name: String,
        #[serde(default)]
        unit: String,
        min: f64,
        max: f64,
        default: Option<f64>,
    },
    Text {
        name: String,
        default: Option<String>,
        choices: Option<Vec<String>>,
    },
}

impl ParamSpec {
    pub fn name(&self) -> &str {
        match self {
            ParamSpec::Number { name, .. } | ParamSpec::Text { name, .. } => name,
        }
    }

    fn default_value(&self) -> Option<ParamValue> {
        match self {
            ParamSpec::Number { default, .. } => default.map(ParamValue::Number),
            ParamSpec::Text { default, .. } => default.clone().map(ParamValue::Text),
        }
    }

    /// A value accepted by this parameter, used for load-time checks.
    fn placeholder(&self) -> ParamValue {
        self.default_value().unwrap_or_else(|| match self {
            ParamSpec::Number { min, .. } => ParamValue::Number(*min),
            ParamSpec::Text { choices, .. } => ParamValue::Text(
                choices
                    .as_ref()
                    .and_then(|c| c.first().cloned())
                    .unwrap_or_else(|| "placeholder".into()),
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FragmentEntry {
    fragment_id: String,
    kind: FragmentKind,
    template: String,
    provides: Vec<String>,
    #[serde(default)]
    params: Vec<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub fragment_id: String,
    pub kind: FragmentKind,
    pub template: String,
    pub params: Vec<ParamSpec>,
    pub provides: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed fragment index: {0}")]
    Index(String),
    #[error("fragment `{fragment}`: {reason}")]
    Fragment { fragment: String, reason: String },
    #[error("map `{map_id}`: {reason}")]
    Map { map_id: String, reason: String },
    #[error("fragment `{fragment}` is missing parameter `{param}`")]
    MissingParam { fragment: String, param: String },
    #[error("fragment `{fragment}` has no parameter `{param}`")]
    UnknownParam { fragment: String, param: String },
    #[error("fragment `{fragment}` parameter `{param}`: expected {expected}")]
    ParamType {
        fragment: String,
        param: String,
        expected: &'static str,
    },
    #[error("fragment `{fragment}` parameter `{param}` = {value} is outside [{min}, {max}]")]
    Range {
        fragment: String,
        param: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("fragment `{fragment}` parameter `{param}` = `{value}` is not one of {choices:?}")]
    Choice {
        fragment: String,
        param: String,
        value: String,
        choices: Vec<String>,
    },
    #[error("no fragment provides `{element}` for slot `{slot}`")]
    Closure { slot: String, element: String },
}

impl Fragment {
    pub fn provides(&self, element: &str) -> bool {
        self.provides.contains(element)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name() == name)
    }

    /// Substitutes `{{name}}` placeholders. Unbound parameters fall back to
    /// their defaults; text values are XML-escaped.
    pub fn instantiate(&self, bindings: &Bindings) -> Result<String, CorpusError> {
        for key in bindings.keys() {
            if self.param(key).is_none() {
                return Err(CorpusError::UnknownParam {
                    fragment: self.fragment_id.clone(),
                    param: key.clone(),
                });
            }
        }
        let mut out = self.template.clone();
        for spec in &self.params {
            let value = match bindings.get(spec.name()) {
                Some(v) => v.clone(),
                None => spec.default_value().ok_or_else(|| CorpusError::MissingParam {
                    fragment: self.fragment_id.clone(),
                    param: spec.name().to_string(),
                })?,
            };
            self.check_value(spec, &value)?;
            out = out.replace(&format!("{{{{{}}}}}", spec.name()), &value.render());
        }
        if let Some(pos) = out.find("{{") {
            let rest = &out[pos + 2..];
            let name = rest.split("}}").next().unwrap_or("").to_string();
            return Err(CorpusError::MissingParam {
                fragment: self.fragment_id.clone(),
                param: name,
            });
        }
        Ok(out)
    }

    /// Instantiates and parses into an element tree.
    pub fn instantiate_element(&self, bindings: &Bindings) -> Result<XmlElement, CorpusError> {
        let text = self.instantiate(bindings)?;
        parse_fragment(&text).map_err(|e| CorpusError::Fragment {
            fragment: self.fragment_id.clone(),
            reason: e.to_string(),
        })
    }

    fn check_value(&self, spec: &ParamSpec, value: &ParamValue) -> Result<(), CorpusError> {
        match (spec, value) {
            (ParamSpec::Number { name, min, max, .. }, ParamValue::Number(v)) => {
                if !v.is_finite() || *v < *min || *v > *max {
                    return Err(CorpusError::Range {
                        fragment: self.fragment_id.clone(),
                        param: name.clone(),
                        value: *v,
                        min: *min,
                        max: *max,
                    });
                }
                Ok(())
            }
            (ParamSpec::Text { name, choices, .. }, ParamValue::Text(s)) => {
                if let Some(choices) = choices {
                    if !choices.contains(s) {
                        return Err(CorpusError::Choice {
                            fragment: self.fragment_id.clone(),
                            param: name.clone(),
                            value: s.clone(),
                            choices: choices.clone(),
                        });
                    }
                }
                Ok(())
            }
            (ParamSpec::Number { name, .. }, _) => Err(CorpusError::ParamType {
                fragment: self.fragment_id.clone(),
                param: name.clone(),
                expected: "a number",
            }),
            (ParamSpec::Text { name, .. }, _) => Err(CorpusError::ParamType {
                fragment: self.fragment_id.clone(),
                param: name.clone(),
                expected: "text",
            }),
        }
    }

    fn check_well_formed(&self) -> Result<(), CorpusError> {
        let bad = |reason: String| CorpusError::Fragment {
            fragment: self.fragment_id.clone(),
            reason,
        };
        let mut rest = self.template.as_str();
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| bad("unterminated placeholder".into()))?;
            let name = &after[..end];
            if self.param(name).is_none() {
                return Err(bad(format!("placeholder `{name}` has no parameter spec")));
            }
            rest = &after[end + 2..];
        }
        let mut names = BTreeSet::new();
        for spec in &self.params {
            if !names.insert(spec.name()) {
                return Err(bad(format!("duplicate parameter `{}`", spec.name())));
            }
            match spec {
                ParamSpec::Number { min, max, default, .. } => {
                    if min > max {
                        return Err(bad(format!("parameter `{}` has min > max", spec.name())));
                    }
                    if let Some(d) = default {
                        if d < min || d > max {
                            return Err(bad(format!("default of `{}` is out of range", spec.name())));
                        }
                    }
                }
                ParamSpec::Text {
                    default: Some(d),
                    choices: Some(c),
                    ..
                } if !c.contains(d) => {
                    return Err(bad(format!("default of `{}` is not a listed choice", spec.name())));
                }
                ParamSpec::Text { .. } => {}
            }
        }
        let sample: Bindings = self
            .params
            .iter()
            .map(|p| (p.name().to_string(), p.placeholder()))
            .collect();
        self.instantiate_element(&sample).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct DslCorpus {
    /// Sorted by fragment id.
    pub fragments: Vec<Fragment>,
    pub maps: BTreeMap<String, MiniMap>,
}

impl DslCorpus {
    /// Builds a corpus from an index, a template source and map texts.
    pub fn from_parts<'a>(
        index_json: &str,
        template: impl Fn(&str) -> Result<String, CorpusError>,
        maps: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, CorpusError> {
        let entries: Vec<FragmentEntry> =
            serde_json::from_str(index_json).map_err(|e| CorpusError::Index(e.to_string()))?;
        let mut fragments = Vec::with_capacity(entries.len());
        let mut ids = BTreeSet::new();
        for entry in entries {
            if !ids.insert(entry.fragment_id.clone()) {
                return Err(CorpusError::Index(format!(
                    "duplicate fragment `{}`",
                    entry.fragment_id
                )));
            }
            let fragment = Fragment {
                template: template(&entry.template)?,
                fragment_id: entry.fragment_id,
                kind: entry.kind,
                params: entry.params,
                provides: entry.provides.into_iter().collect(),
            };
            fragment.check_well_formed()?;
            fragments.push(fragment);
        }
        fragments.sort_by(|a, b| a.fragment_id.cmp(&b.fragment_id));

        let mut map_table = BTreeMap::new();
        for text in maps {
            let m = MiniMap::from_json(text)?;
            if map_table.contains_key(&m.map_id) {
                return Err(CorpusError::Map {
                    map_id: m.map_id,
                    reason: "duplicate map id".into(),
                });
            }
            map_table.insert(m.map_id.clone(), m);
        }
        let corpus = DslCorpus {
            fragments,
            maps: map_table,
        };
        for f in corpus.fragments.iter().filter(|f| f.kind == FragmentKind::MapRef) {
            let map_id = corpus.map_id_of(f).unwrap_or_default();
            if !corpus.maps.contains_key(&map_id) {
                return Err(CorpusError::Fragment {
                    fragment: f.fragment_id.clone(),
                    reason: format!("references unknown map `{map_id}`"),
                });
            }
        }
        Ok(corpus)
    }

    /// Loads `<dir>/fragments/index.json`, its templates and `<dir>/maps/*.map.json`.
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| CorpusError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let frag_dir = dir.join("fragments");
        let index = read(&frag_dir.join("index.json"))?;
        let maps_dir = dir.join("maps");
        let mut map_paths: Vec<_> = std::fs::read_dir(&maps_dir)
            .map_err(|source| CorpusError::Io {
                path: maps_dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".map.json"))
            .collect();
        map_paths.sort();
        let map_texts = map_paths.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(
            &index,
            |name| read(&frag_dir.join(name)),
            map_texts.iter().map(String::as_str),
        )
    }

    /// The corpus compiled into the crate.
    pub fn bundled() -> Self {
        use crate::bundled::{FRAGMENT_INDEX_JSON, FRAGMENT_TEMPLATES, MAPS};
        Self::from_parts(
            FRAGMENT_INDEX_JSON,
            |name| {
                FRAGMENT_TEMPLATES
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, t)| t.to_string())
                    .ok_or_else(|| CorpusError::Index(format!("missing template `{name}`")))
            },
            MAPS.iter().map(|(_, t)| *t),
        )
        .expect("bundled corpus is valid")
    }

    pub fn fragment(&self, fragment_id: &str) -> Option<&Fragment> {
        self.fragments
            .binary_search_by(|f| f.fragment_id.as_str().cmp(fragment_id))
            .ok()
            .map(|i| &self.fragments[i])
    }

    /// Fragments providing `element`, optionally restricted to one kind,
    /// in fragment-id order.
    pub fn lookup(&self, element: &str, kind: Option<FragmentKind>) -> Vec<&Fragment> {
        self.fragments
            .iter()
            .filter(|f| f.provides(element) && kind.map_or(true, |k| f.kind == k))
            .collect()
    }

    /// Map id referenced by a `MapRef` fragment.
    pub fn map_id_of(&self, fragment: &Fragment) -> Option<String> {
        let el = parse_fragment(&fragment.template).ok()?;
        let path = el.descendant("LogicFile")?.get_attr("filepath")?;
        map_id_from_path(path)
    }

    pub fn map_fragment(&self, map_id: &str) -> Option<&Fragment> {
        self.fragments
            .iter()
            .filter(|f| f.kind == FragmentKind::MapRef)
            .find(|f| self.map_id_of(f).as_deref() == Some(map_id))
    }

    /// Every value of the fully matchable tiers (road topology, facilities,
    /// climate) must be provided by some fragment. `none` is exempt.
    pub fn check_closure(&self, repo: &RepositoryConfig) -> Result<(), CorpusError> {
        for slot in &repo.slots {
            if !matches!(
                slot.tier,
                TierName::RoadTopology | TierName::TransportationFacilities | TierName::Climate
            ) {
                continue;
            }
            for value in slot.vocabulary.iter().filter(|v| *v != NONE) {
                if self.lookup(value, None).is_empty() {
                    return Err(CorpusError::Closure {
                        slot: slot.slot_name.clone(),
                        element: value.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `maps/intersection_4way.map.json` -> `intersection_4way`.
pub fn map_id_from_path(path: &str) -> Option<String> {
    let file = path.rsplit(['/', '\\']).next()?;
    let id = file.strip_suffix(".map.json").unwrap_or(file);
    (!id.is_empty()).then(|| id.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_is_closed_over_repository() {
        let corpus = DslCorpus::bundled();
        corpus.check_closure(&RepositoryConfig::bundled()).unwrap();
        assert_eq!(corpus.maps.len(), 6);
    }

    #[test]
    fn closure_failure_names_slot_and_element() {
        let mut corpus = DslCorpus::bundled();
        corpus.fragments.retain(|f| f.fragment_id != "weather_foggy");
        match corpus.check_closure(&RepositoryConfig::bundled()) {
            Err(CorpusError::Closure { slot, element }) => {
                assert_eq!(slot, "C.type");
                assert_eq!(element, "foggy");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn instantiate_checks_range_and_missing() {
        let corpus = DslCorpus::bundled();
        let frag = corpus.fragment("event_accelerate").unwrap();
        let mut b = Bindings::new();
        assert!(matches!(
            frag.instantiate(&b),
            Err(CorpusError::MissingParam { ref param, .. }) if param == "action_name"
        ));
        b.insert("action_name".into(), "a1".into());
        let out = frag.instantiate(&b).unwrap();
        assert!(out.contains("value=\"15\""));
        b.insert("target_speed".into(), 500.0.into());
        assert!(matches!(frag.instantiate(&b), Err(CorpusError::Range { .. })));
        b.insert("target_speed".into(), "fast".into());
        assert!(matches!(frag.instantiate(&b), Err(CorpusError::ParamType { .. })));
    }

    #[test]
    fn text_bindings_are_escaped() {
        let corpus = DslCorpus::bundled();
        let frag = corpus.fragment("event_stop").unwrap();
        let mut b = Bindings::new();
        b.insert("action_name".into(), "a<b".into());
        let out = frag.instantiate(&b).unwrap();
        assert!(out.contains("a&lt;b"));
        let el = frag.instantiate_element(&b).unwrap();
        assert_eq!(el.get_attr("name"), Some("a<b"));
    }

    #[test]
    fn malformed_template_is_rejected() {
        let index = r#"[{"fragment_id":"bad","kind":"Event","template":"t","provides":["x"],"params":[]}]"#;
        let err = DslCorpus::from_parts(index, |_| Ok("<A><B></A>".into()), []).unwrap_err();
        assert!(matches!(err, CorpusError::Fragment { .. }));
        let err = DslCorpus::from_parts(index, |_| Ok("<A v=\"{{nope}}\"/>".into()), []).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn map_fragments_resolve() {
        let corpus = DslCorpus::bundled();
        for id in corpus.maps.keys() {
            assert!(corpus.map_fragment(id).is_some(), "{id}");
        }
        assert_eq!(map_id_from_path("maps/a_b.map.json").as_deref(), Some("a_b"));
    }
}
