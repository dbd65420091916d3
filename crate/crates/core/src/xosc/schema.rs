//! The OpenSCENARIO 1.x subset this crate emits and accepts.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{XmlElement, XoscDocument};

struct Rule {
    name: &'static str,
    required_attrs: &'static [&'static str],
    optional_attrs: &'static [&'static str],
    required_children: &'static [&'static str],
    /// Exactly one of these children must be present.
    one_of: &'static [&'static str],
    optional_children: &'static [&'static str],
}

const fn rule(
    name: &'static str,
    required_attrs: &'static [&'static str],
    optional_attrs: &'static [&'static str],
    required_children: &'static [&'static str],
    one_of: &'static [&'static str],
    optional_children: &'static [&'static str],
) -> Rule {
    Rule {
        name,
        required_attrs,
        optional_attrs,
        required_children,
        one_of,
        optional_children,
    }
}

const DYNAMICS: &[&str] = &["dynamicsShape", "value", "dynamicsDimension"];

#[rustfmt::skip]
const RULES: &[Rule] = &[
    rule("OpenSCENARIO", &[], &[], &["FileHeader", "RoadNetwork", "Entities", "Storyboard"], &[], &["ParameterDeclarations", "CatalogLocations"]),
    rule("FileHeader", &["revMajor", "revMinor", "date", "description", "author", "sourceHash"], &[], &[], &[], &[]),
    rule("ParameterDeclarations", &[], &[], &[], &[], &["ParameterDeclaration"]),
    rule("ParameterDeclaration", &["name", "parameterType", "value"], &[], &[], &[], &[]),
    rule("CatalogLocations", &[], &[], &[], &[], &[]),
    rule("RoadNetwork", &[], &[], &["LogicFile"], &[], &["SceneGraphFile"]),
    rule("LogicFile", &["filepath"], &[], &[], &[], &[]),
    rule("SceneGraphFile", &["filepath"], &[], &[], &[], &[]),
    rule("Entities", &[], &[], &[], &[], &["ScenarioObject"]),
    rule("ScenarioObject", &["name"], &[], &[], &["Vehicle", "Pedestrian", "MiscObject"], &[]),
    rule("Vehicle", &["name", "vehicleCategory"], &[], &["BoundingBox", "Performance"], &[], &["Axles", "Properties"]),
    rule("Pedestrian", &["name", "model", "mass", "pedestrianCategory"], &[], &["BoundingBox"], &[], &["Properties"]),
    rule("MiscObject", &["name", "mass", "miscObjectCategory"], &[], &["BoundingBox"], &[], &["Properties"]),
    rule("BoundingBox", &[], &[], &["Center", "Dimensions"], &[], &[]),
    rule("Center", &["x", "y", "z"], &[], &[], &[], &[]),
    rule("Dimensions", &["width", "length", "height"], &[], &[], &[], &[]),
    rule("Performance", &["maxSpeed", "maxAcceleration", "maxDeceleration"], &[], &[], &[], &[]),
    rule("Storyboard", &[], &[], &["Init", "StopTrigger"], &[], &["Story"]),
    rule("Init", &[], &[], &["Actions"], &[], &[]),
    rule("Actions", &[], &[], &[], &[], &["GlobalAction", "Private"]),
    rule("GlobalAction", &[], &[], &[], &["EnvironmentAction"], &[]),
    rule("EnvironmentAction", &[], &[], &["Environment"], &[], &[]),
    rule("Environment", &["name"], &[], &["TimeOfDay", "Weather", "RoadCondition"], &[], &[]),
    rule("TimeOfDay", &["animation", "dateTime"], &[], &[], &[], &[]),
    rule("Weather", &["cloudState"], &[], &[], &[], &["Sun", "Fog", "Precipitation"]),
    rule("Sun", &["intensity", "azimuth", "elevation"], &[], &[], &[], &[]),
    rule("Fog", &["visualRange"], &[], &[], &[], &[]),
    rule("Precipitation", &["precipitationType", "intensity"], &[], &[], &[], &[]),
    rule("RoadCondition", &["frictionScaleFactor"], &[], &[], &[], &[]),
    rule("Private", &["entityRef"], &[], &[], &[], &["PrivateAction"]),
    rule("PrivateAction", &[], &[], &[], &["TeleportAction", "LongitudinalAction", "LateralAction", "RoutingAction", "ActivateControllerAction"], &[]),
    rule("TeleportAction", &[], &[], &["Position"], &[], &[]),
    rule("Position", &[], &[], &[], &["LanePosition"], &[]),
    rule("LanePosition", &["roadId", "laneId", "s"], &["offset"], &[], &[], &[]),
    rule("LongitudinalAction", &[], &[], &[], &["SpeedAction"], &[]),
    rule("SpeedAction", &[], &[], &["SpeedActionDynamics", "SpeedActionTarget"], &[], &[]),
    rule("SpeedActionDynamics", DYNAMICS, &[], &[], &[], &[]),
    rule("SpeedActionTarget", &[], &[], &[], &["AbsoluteTargetSpeed"], &[]),
    rule("AbsoluteTargetSpeed", &["value"], &[], &[], &[], &[]),
    rule("LateralAction", &[], &[], &[], &["LaneChangeAction", "LaneOffsetAction"], &[]),
    rule("LaneChangeAction", &[], &[], &["LaneChangeActionDynamics", "LaneChangeTarget"], &[], &[]),
    rule("LaneChangeActionDynamics", DYNAMICS, &[], &[], &[], &[]),
    rule("LaneChangeTarget", &[], &[], &[], &["RelativeTargetLane"], &[]),
    rule("RelativeTargetLane", &["entityRef", "value"], &[], &[], &[], &[]),
    rule("LaneOffsetAction", &["continuous"], &[], &["LaneOffsetActionDynamics", "LaneOffsetTarget"], &[], &[]),
    rule("LaneOffsetActionDynamics", &["dynamicsShape"], &["maxLateralAcc"], &[], &[], &[]),
    rule("LaneOffsetTarget", &[], &[], &[], &["AbsoluteTargetLaneOffset"], &[]),
    rule("AbsoluteTargetLaneOffset", &["value"], &[], &[], &[], &[]),
    rule("RoutingAction", &[], &[], &[], &["AssignRouteAction"], &[]),
    rule("AssignRouteAction", &[], &[], &["Route"], &[], &[]),
    rule("Route", &["name", "closed"], &[], &["Waypoint"], &[], &[]),
    rule("Waypoint", &["routeStrategy"], &[], &["Position"], &[], &[]),
    rule("ActivateControllerAction", &[], &["lateral", "longitudinal"], &[], &[], &[]),
    rule("Story", &["name"], &[], &["Act"], &[], &[]),
    rule("Act", &["name"], &[], &["ManeuverGroup", "StartTrigger"], &[], &["StopTrigger"]),
    rule("ManeuverGroup", &["maximumExecutionCount", "name"], &[], &["Actors"], &[], &["Maneuver"]),
    rule("Actors", &["selectTriggeringEntities"], &[], &[], &[], &["EntityRef"]),
    rule("EntityRef", &["entityRef"], &[], &[], &[], &[]),
    rule("Maneuver", &["name"], &[], &["Event"], &[], &[]),
    rule("Event", &["name", "priority"], &["maximumExecutionCount"], &["Action", "StartTrigger"], &[], &[]),
    rule("Action", &["name"], &[], &[], &["PrivateAction"], &[]),
    rule("StartTrigger", &[], &[], &[], &[], &["ConditionGroup"]),
    rule("StopTrigger", &[], &[], &[], &[], &["ConditionGroup"]),
    rule("ConditionGroup", &[], &[], &["Condition"], &[], &[]),
    rule("Condition", &["name", "delay", "conditionEdge"], &[], &[], &["ByValueCondition", "ByEntityCondition"], &[]),
    rule("ByValueCondition", &[], &[], &[], &["SimulationTimeCondition", "StoryboardElementStateCondition", "ParameterCondition"], &[]),
    rule("SimulationTimeCondition", &["value", "rule"], &[], &[], &[], &[]),
    rule("StoryboardElementStateCondition", &["storyboardElementType", "storyboardElementRef", "state"], &[], &[], &[], &[]),
    rule("ParameterCondition", &["parameterRef", "value", "rule"], &[], &[], &[], &[]),
    rule("ByEntityCondition", &[], &[], &["TriggeringEntities", "EntityCondition"], &[], &[]),
    rule("TriggeringEntities", &["triggeringEntitiesRule"], &[], &["EntityRef"], &[], &[]),
    rule("EntityCondition", &[], &[], &[], &["RelativeDistanceCondition"], &[]),
    rule("RelativeDistanceCondition", &["entityRef", "relativeDistanceType", "value", "freespace", "rule"], &[], &[], &[], &[]),
];

/// Every element name in the supported subset.
pub const ELEMENT_NAMES: &[&str] = &[
    "OpenSCENARIO",
    "FileHeader",
    "ParameterDeclarations",
    "ParameterDeclaration",
    "CatalogLocations",
    "RoadNetwork",
    "LogicFile",
    "SceneGraphFile",
    "Entities",
    "ScenarioObject",
    "Vehicle",
    "Pedestrian",
    "MiscObject",
    "BoundingBox",
    "Center",
    "Dimensions",
    "Performance",
    "Storyboard",
    "Init",
    "Actions",
    "GlobalAction",
    "EnvironmentAction",
    "Environment",
    "TimeOfDay",
    "Weather",
    "Sun",
    "Fog",
    "Precipitation",
    "RoadCondition",
    "Private",
    "PrivateAction",
    "TeleportAction",
    "Position",
    "LanePosition",
    "LongitudinalAction",
    "SpeedAction",
    "SpeedActionDynamics",
    "SpeedActionTarget",
    "AbsoluteTargetSpeed",
    "LateralAction",
    "LaneChangeAction",
    "LaneChangeActionDynamics",
    "LaneChangeTarget",
    "RelativeTargetLane",
    "LaneOffsetAction",
    "LaneOffsetActionDynamics",
    "LaneOffsetTarget",
    "AbsoluteTargetLaneOffset",
    "RoutingAction",
    "AssignRouteAction",
    "Route",
    "Waypoint",
    "ActivateControllerAction",
    "Story",
    "Act",
    "ManeuverGroup",
    "Actors",
    "EntityRef",
    "Maneuver",
    "Event",
    "Action",
    "StartTrigger",
    "StopTrigger",
    "ConditionGroup",
    "Condition",
    "ByValueCondition",
    "SimulationTimeCondition",
    "StoryboardElementStateCondition",
    "ParameterCondition",
    "ByEntityCondition",
    "TriggeringEntities",
    "EntityCondition",
    "RelativeDistanceCondition",
];

fn lookup(name: &str) -> Option<&'static Rule> {
    RULES.iter().find(|r| r.name == name)
}

/// Canonical attribute order for an element: required, then optional.
pub fn attribute_order(name: &str) -> Vec<&'static str> {
    lookup(name)
        .map(|r| {
            r.required_attrs
                .iter()
                .chain(r.optional_attrs.iter())
                .copied()
                .collect()
        })
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum FindingSeverity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: FindingSeverity,
    pub path: String,
    pub message: String,
}

/// Checks a document against the supported subset. Unknown elements and
/// attributes are warnings; missing required parts and dangling references
/// are errors.
pub fn verify(doc: &XoscDocument) -> Vec<Finding> {
    let mut findings = Vec::new();
    if doc.root.name != "OpenSCENARIO" {
        findings.push(Finding {
            severity: FindingSeverity::Error,
            path: doc.root.name.clone(),
            message: "root element must be OpenSCENARIO".into(),
        });
        return findings;
    }
    check(&doc.root, &doc.root.name, &mut findings);

    let mut entities = BTreeSet::new();
    let mut events = BTreeSet::new();
    doc.root.walk(&mut |el| match el.name.as_str() {
        "ScenarioObject" => {
            if let Some(n) = el.get_attr("name") {
                entities.insert(n.to_string());
            }
        }
        "Event" | "Maneuver" | "Act" | "Story" => {
            if let Some(n) = el.get_attr("name") {
                events.insert(n.to_string());
            }
        }
        _ => {}
    });
    let mut dangling = Vec::new();
    doc.root.walk(&mut |el| {
        for key in ["entityRef"] {
            if let Some(target) = el.get_attr(key) {
                if !entities.contains(target) {
                    dangling.push((el.name.clone(), format!("entityRef `{target}` names no entity")));
                }
            }
        }
        if el.name == "StoryboardElementStateCondition" {
            if let Some(target) = el.get_attr("storyboardElementRef") {
                if !events.contains(target) {
                    dangling.push((
                        el.name.clone(),
                        format!("storyboardElementRef `{target}` names no storyboard element"),
                    ));
                }
            }
        }
    });
    for (path, message) in dangling {
        findings.push(Finding {
            severity: FindingSeverity::Error,
            path,
            message,
        });
    }
    findings
}

fn check(el: &XmlElement, path: &str, findings: &mut Vec<Finding>) {
    let Some(rule) = lookup(&el.name) else {
        findings.push(Finding {
            severity: FindingSeverity::Warning,
            path: path.to_string(),
            message: format!("unknown element <{}>", el.name),
        });
        return;
    };
    let error = |message: String| Finding {
        severity: FindingSeverity::Error,
        path: path.to_string(),
        message,
    };
    for attr in rule.required_attrs {
        if el.get_attr(attr).is_none() {
            findings.push(error(format!("missing required attribute `{attr}`")));
        }
    }
    for (key, _) in &el.attributes {
        if !rule.required_attrs.contains(&key.as_str()) && !rule.optional_attrs.contains(&key.as_str()) {
            findings.push(Finding {
                severity: FindingSeverity::Warning,
                path: path.to_string(),
                message: format!("unknown attribute `{key}`"),
            });
        }
    }
    for child in rule.required_children {
        if el.find(child).is_none() {
            findings.push(error(format!("missing required child <{child}>")));
        }
    }
    if !rule.one_of.is_empty() {
        let present = el.elements().filter(|c| rule.one_of.contains(&c.name.as_str())).count();
        if present != 1 {
            findings.push(error(format!(
                "expected exactly one of <{}>, found {present}",
                rule.one_of.join(">, <")
            )));
        }
    }
    for child in el.elements() {
        let child_path = format!("{path}/{}", child.name);
        let name = child.name.as_str();
        let allowed = rule.required_children.contains(&name)
            || rule.one_of.contains(&name)
            || rule.optional_children.contains(&name);
        if !allowed && lookup(name).is_some() {
            findings.push(Finding {
                severity: FindingSeverity::Warning,
                path: child_path.clone(),
                message: format!("<{name}> is not expected inside <{}>", el.name),
            });
        }
        check(child, &child_path, findings);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_rule_is_listed_once() {
        let names: BTreeSet<&str> = RULES.iter().map(|r| r.name).collect();
        assert_eq!(names.len(), RULES.len());
        let listed: BTreeSet<&str> = ELEMENT_NAMES.iter().copied().collect();
        assert_eq!(names, listed);
    }

    #[test]
    fn children_refer_to_known_elements() {
        for r in RULES {
            for c in r.required_children.iter().chain(r.one_of).chain(r.optional_children) {
                if ["Axles", "Properties"].contains(c) {
                    continue;
                }
                assert!(lookup(c).is_some(), "{} -> {c}", r.name);
            }
        }
    }

    #[test]
    fn unknown_element_is_warning_missing_attr_is_error() {
        let doc = XoscDocument::load(br#"<OpenSCENARIO><FileHeader revMajor="1"/><Gizmo/></OpenSCENARIO>"#).unwrap();
        let findings = verify(&doc);
        assert!(findings
            .iter()
            .any(|f| f.severity == FindingSeverity::Warning && f.message.contains("Gizmo")));
        assert!(findings
            .iter()
            .any(|f| f.severity == FindingSeverity::Error && f.message.contains("revMinor")));
    }
}
