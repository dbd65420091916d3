//! The element repository: six prioritized tiers, their slots, and the
//! canonical vocabulary each slot draws from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_term;

/// Sentinel value for "element absent". Exempt from disjointness and
/// corpus-closure checks.
pub const NONE: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TierName {
    RoadTopology,
    TransportationFacilities,
    TemporaryChanges,
    TrafficParticipants,
    Climate,
    EgoVehicle,
}

impl TierName {
    pub const ALL: [TierName; 6] = [
        TierName::RoadTopology,
        TierName::TransportationFacilities,
        TierName::TemporaryChanges,
        TierName::TrafficParticipants,
        TierName::Climate,
        TierName::EgoVehicle,
    ];

    /// Short prefix used in slot names, e.g. `RT` in `RT.topology`.
    pub fn prefix(self) -> &'static str {
        match self {
            TierName::RoadTopology => "RT",
            TierName::TransportationFacilities => "TF",
            TierName::TemporaryChanges => "TC",
            TierName::TrafficParticipants => "TP",
            TierName::Climate => "C",
            TierName::EgoVehicle => "EV",
        }
    }
}

impl fmt::Display for TierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub name: TierName,
    /// 1 is matched first.
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSlot {
    pub tier: TierName,
    pub slot_name: String,
    /// Open slots keep out-of-vocabulary values verbatim.
    #[serde(default)]
    pub allows_novel: bool,
    pub vocabulary: Vec<String>,
}

impl ElementSlot {
    pub fn contains(&self, canonical: &str) -> bool {
        self.vocabulary.iter().any(|v| v == canonical)
    }
}

/// Outcome of mapping a free-text surface form onto a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonResult {
    Canonical(String),
    Novel(String),
    Rejected,
}

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed repository config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid repository config at `{slot}`: {reason}")]
    Schema { slot: String, reason: String },
}

fn schema_err(slot: impl Into<String>, reason: impl Into<String>) -> RepositoryError {
    RepositoryError::Schema {
        slot: slot.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryConfig {
    pub version: String,
    pub tiers: Vec<Tier>,
    pub slots: Vec<ElementSlot>,
    /// Canonical value to the surface forms that also denote it.
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

impl RepositoryConfig {
    pub fn from_json(json: &str) -> Result<Self, RepositoryError> {
        let config: RepositoryConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RepositoryError> {
        let json = std::fs::read_to_string(path).map_err(|source| RepositoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    /// The repository shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(crate::bundled::REPOSITORY_JSON).expect("bundled repository is valid")
    }

    pub fn validate(&self) -> Result<(), RepositoryError> {
        if self.tiers.len() != TierName::ALL.len() {
            return Err(schema_err(
                "<tiers>",
                format!("expected 6 tiers, found {}", self.tiers.len()),
            ));
        }
        let names: BTreeSet<TierName> = self.tiers.iter().map(|t| t.name).collect();
        if names.len() != 6 {
            return Err(schema_err("<tiers>", "tier names must be distinct"));
        }
        let mut priorities: Vec<u8> = self.tiers.iter().map(|t| t.priority).collect();
        priorities.sort_unstable();
        if priorities != [1, 2, 3, 4, 5, 6] {
            return Err(schema_err("<tiers>", "priorities must be a permutation of 1..=6"));
        }
        let top_two: BTreeSet<TierName> = self.tiers.iter().filter(|t| t.priority <= 2).map(|t| t.name).collect();
        if top_two != BTreeSet::from([TierName::Climate, TierName::RoadTopology]) {
            return Err(schema_err(
                "<tiers>",
                "Climate and RoadTopology must hold priorities 1 and 2",
            ));
        }

        let mut seen_slots = BTreeSet::new();
        for slot in &self.slots {
            if !seen_slots.insert(slot.slot_name.as_str()) {
                return Err(schema_err(&slot.slot_name, "duplicate slot name"));
            }
            let expected_prefix = format!("{}.", slot.tier.prefix());
            if !slot.slot_name.starts_with(&expected_prefix) {
                return Err(schema_err(
                    &slot.slot_name,
                    format!("slot name must start with `{expected_prefix}`"),
                ));
            }
            if slot.vocabulary.is_empty() {
                return Err(schema_err(&slot.slot_name, "empty vocabulary"));
            }
            let mut seen = BTreeSet::new();
            for value in &slot.vocabulary {
                if normalize_term(value) != *value {
                    return Err(schema_err(
                        &slot.slot_name,
                        format!("vocabulary entry `{value}` is not in canonical form"),
                    ));
                }
                if !seen.insert(value.as_str()) {
                    return Err(schema_err(
                        &slot.slot_name,
                        format!("duplicate vocabulary entry `{value}`"),
                    ));
                }
            }
        }

        for tier in TierName::ALL {
            let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
            for slot in self.slots.iter().filter(|s| s.tier == tier) {
                for value in slot.vocabulary.iter().filter(|v| *v != NONE) {
                    if let Some(other) = owner.insert(value, &slot.slot_name) {
                        return Err(schema_err(
                            &slot.slot_name,
                            format!("`{value}` also appears in `{other}` of the same tier"),
                        ));
                    }
                }
            }
        }

        for key in self.synonyms.keys() {
            if !self.slots.iter().any(|s| s.contains(key)) {
                return Err(schema_err(
                    "<synonyms>",
                    format!("`{key}` is not a vocabulary entry of any slot"),
                ));
            }
        }
        Ok(())
    }

    pub fn tier_priority(&self, tier: TierName) -> u8 {
        self.tiers
            .iter()
            .find(|t| t.name == tier)
            .map(|t| t.priority)
            .unwrap_or(u8::MAX)
    }

    pub fn slot(&self, slot_name: &str) -> Option<&ElementSlot> {
        self.slots.iter().find(|s| s.slot_name == slot_name)
    }

    /// Slots ordered by tier priority, declaration order within a tier.
    pub fn slots_in_priority_order(&self) -> Vec<&ElementSlot> {
        let mut slots: Vec<&ElementSlot> = self.slots.iter().collect();
        slots.sort_by_key(|s| self.tier_priority(s.tier));
        slots
    }

    /// Rank of a slot in [`Self::slots_in_priority_order`]; unknown slots sort last.
    pub fn slot_rank(&self, slot_name: &str) -> usize {
        self.slots_in_priority_order()
            .iter()
            .position(|s| s.slot_name == slot_name)
            .unwrap_or(usize::MAX)
    }

    /// Maps a surface form onto `slot`.
    ///
    /// Exact (normalized) vocabulary matches win, then registered synonyms.
    /// Anything else is kept as `Novel` in open slots and `Rejected` in
    /// closed ones. Empty input is always rejected.
    pub fn canonicalize(&self, slot: &ElementSlot, surface: &str) -> CanonResult {
        let norm = normalize_term(surface);
        if norm.is_empty() {
            return CanonResult::Rejected;
        }
        if let Some(v) = slot.vocabulary.iter().find(|v| **v == norm) {
            return CanonResult::Canonical(v.clone());
        }
        for value in &slot.vocabulary {
            if let Some(forms) = self.synonyms.get(value) {
                if forms.iter().any(|f| normalize_term(f) == norm) {
                    return CanonResult::Canonical(value.clone());
                }
            }
        }
        if slot.allows_novel {
            CanonResult::Novel(surface.trim().to_string())
        } else {
            CanonResult::Rejected
        }
    }

    /// [`Self::canonicalize`] by slot name. Unknown slot names are rejected.
    pub fn canonicalize_in(&self, slot_name: &str, surface: &str) -> CanonResult {
        match self.slot(slot_name) {
            Some(slot) => self.canonicalize(slot, surface),
            None => CanonResult::Rejected,
        }
    }

    /// True when `value` is acceptable in the slot without a contradiction.
    pub fn admits(&self, slot_name: &str, value: &str) -> bool {
        match self.slot(slot_name) {
            Some(slot) => slot.allows_novel || slot.contains(value),
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repo() -> RepositoryConfig {
        RepositoryConfig::bundled()
    }

    #[test]
    fn bundled_has_seventeen_slots() {
        let r = repo();
        assert_eq!(r.slots.len(), 17);
        let per_tier = |t| r.slots.iter().filter(|s| s.tier == t).count();
        assert_eq!(per_tier(TierName::RoadTopology), 2);
        assert_eq!(per_tier(TierName::TransportationFacilities), 2);
        assert_eq!(per_tier(TierName::TemporaryChanges), 2);
        assert_eq!(per_tier(TierName::TrafficParticipants), 5);
        assert_eq!(per_tier(TierName::Climate), 3);
        assert_eq!(per_tier(TierName::EgoVehicle), 3);
    }

    #[test]
    fn priority_order_starts_with_climate_and_topology() {
        let r = repo();
        let order: Vec<_> = r.slots_in_priority_order().iter().map(|s| s.tier).collect();
        assert_eq!(order[0], TierName::Climate);
        assert!(order[..5].iter().any(|t| *t == TierName::RoadTopology));
        assert_eq!(*order.last().unwrap(), TierName::TrafficParticipants);
        let ranks: Vec<u8> = order.iter().map(|t| r.tier_priority(*t)).collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn canonicalize_exact_and_synonym() {
        let r = repo();
        assert_eq!(
            r.canonicalize_in("RT.topology", "T-junction"),
            CanonResult::Canonical("t_junction".into())
        );
        assert_eq!(
            r.canonicalize_in("TP.global_behavior", "straight forward"),
            CanonResult::Canonical("go_forward".into())
        );
        assert_eq!(
            r.canonicalize_in("TP.global_behavior", "go forward"),
            CanonResult::Canonical("go_forward".into())
        );
    }

    #[test]
    fn canonicalize_novel_and_rejected() {
        let r = repo();
        assert_eq!(
            r.canonicalize_in("TP.type", "tractor"),
            CanonResult::Novel("tractor".into())
        );
        assert_eq!(r.canonicalize_in("RT.topology", "spaceport"), CanonResult::Rejected);
        assert_eq!(r.canonicalize_in("RT.topology", "  "), CanonResult::Rejected);
    }

    #[test]
    fn duplicate_within_tier_is_rejected() {
        let mut r = repo();
        let idx = r.slots.iter().position(|s| s.slot_name == "RT.lanes").unwrap();
        r.slots[idx].vocabulary.push("intersection".into());
        let err = r.validate().unwrap_err();
        assert!(matches!(err, RepositoryError::Schema { ref slot, .. } if slot == "RT.lanes"));
    }

    #[test]
    fn bad_priorities_are_rejected() {
        let mut r = repo();
        r.tiers[0].priority = 6;
        assert!(r.validate().is_err());
        let mut r = repo();
        r.tiers.swap(1, 5);
        let p1 = r.tiers[1].priority;
        r.tiers[1].priority = r.tiers[5].priority;
        r.tiers[5].priority = p1;
        let top: Vec<_> = r.tiers.iter().filter(|t| t.priority <= 2).map(|t| t.name).collect();
        if !top.contains(&TierName::RoadTopology) || !top.contains(&TierName::Climate) {
            assert!(r.validate().is_err());
        }
    }

    #[test]
    fn synonym_for_unknown_value_is_rejected() {
        let mut r = repo();
        r.synonyms.insert("hovercraft".into(), vec!["hover".into()]);
        assert!(r.validate().is_err());
    }

    #[test]
    fn optional_slots_carry_none() {
        let r = repo();
        for name in ["TF.road_marker", "TF.traffic_sign", "TC.type", "TC.position_relation"] {
            assert!(r.slot(name).unwrap().contains(NONE), "{name}");
        }
        assert!(!r.slot("RT.topology").unwrap().contains(NONE));
    }
}
