//! Projection of an assembled target document onto the OpenSCENARIO tree.

use super::{XmlElement, XoscDocument};
use crate::assembler::{Entity, TargetDocument, Trigger};
use crate::corpus::WaypointRef;
use crate::text::fmt_num;

pub const REV_MAJOR: &str = "1";
pub const REV_MINOR: &str = "0";
pub const EGO_ID: &str = "ego";

fn lane_position(road: &str, wp: &WaypointRef) -> XmlElement {
    XmlElement::new("Position").child(
        XmlElement::new("LanePosition")
            .attr("roadId", road)
            .attr("laneId", &wp.lane_id)
            .attr("s", fmt_num(wp.s))
            .attr("offset", "0"),
    )
}

fn condition(name: &str, body: XmlElement) -> XmlElement {
    XmlElement::new("Condition")
        .attr("name", name)
        .attr("delay", "0")
        .attr("conditionEdge", "rising")
        .child(body)
}

fn simulation_time(name: &str, value: f64) -> XmlElement {
    condition(
        name,
        XmlElement::new("ByValueCondition").child(
            XmlElement::new("SimulationTimeCondition")
                .attr("value", fmt_num(value))
                .attr("rule", "greaterThan"),
        ),
    )
}

fn start_trigger(cond: XmlElement) -> XmlElement {
    XmlElement::new("StartTrigger").child(XmlElement::new("ConditionGroup").child(cond))
}

fn private_init(road: &str, e: &Entity) -> XmlElement {
    let mut private = XmlElement::new("Private").attr("entityRef", &e.id);
    private.push(
        XmlElement::new("PrivateAction").child(XmlElement::new("TeleportAction").child(lane_position(road, &e.spawn))),
    );
    private.push(
        XmlElement::new("PrivateAction").child(
            XmlElement::new("LongitudinalAction").child(
                XmlElement::new("SpeedAction")
                    .child(
                        XmlElement::new("SpeedActionDynamics")
                            .attr("dynamicsShape", "step")
                            .attr("value", "0")
                            .attr("dynamicsDimension", "time"),
                    )
                    .child(
                        XmlElement::new("SpeedActionTarget")
                            .child(XmlElement::new("AbsoluteTargetSpeed").attr("value", fmt_num(e.speed))),
                    ),
            ),
        ),
    );
    if let Some(route) = &e.route {
        let mut r = XmlElement::new("Route")
            .attr("name", format!("{}_route", e.id))
            .attr("closed", "false");
        let mut points = vec![route.start.clone()];
        for lane in route.lanes.iter().skip(1) {
            points.push(WaypointRef {
                lane_id: lane.clone(),
                s: 0.0,
            });
        }
        points.push(route.end.clone());
        for wp in points {
            r.push(
                XmlElement::new("Waypoint")
                    .attr("routeStrategy", "shortest")
                    .child(lane_position(road, &wp)),
            );
        }
        private.push(
            XmlElement::new("PrivateAction")
                .child(XmlElement::new("RoutingAction").child(XmlElement::new("AssignRouteAction").child(r))),
        );
    }
    private
}

/// Builds the OpenSCENARIO tree for `doc`.
pub fn project(doc: &TargetDocument) -> XoscDocument {
    let mut root = XmlElement::new("OpenSCENARIO");
    root.push(
        XmlElement::new("FileHeader")
            .attr("revMajor", REV_MAJOR)
            .attr("revMinor", REV_MINOR)
            .attr("date", &doc.header.date)
            .attr("description", &doc.header.description)
            .attr("author", format!("{} {}", crate::TOOL_NAME, crate::TOOL_VERSION))
            .attr("sourceHash", &doc.header.source_hash),
    );
    let mut params = XmlElement::new("ParameterDeclarations");
    for p in &doc.parameters {
        params.push(
            XmlElement::new("ParameterDeclaration")
                .attr("name", &p.name)
                .attr("parameterType", p.parameter_type)
                .attr("value", &p.value),
        );
    }
    root.push(params);
    root.push(XmlElement::new("CatalogLocations"));
    root.push(doc.road_network.clone());

    let mut entities = XmlElement::new("Entities");
    for e in &doc.entities {
        entities.push(e.object.clone());
    }
    root.push(entities);

    let mut actions = XmlElement::new("Actions");
    actions.push(
        XmlElement::new("GlobalAction").child(
            XmlElement::new("EnvironmentAction").child(
                XmlElement::new("Environment")
                    .attr("name", "environment")
                    .child(doc.time_of_day.clone())
                    .child(doc.weather.clone())
                    .child(XmlElement::new("RoadCondition").attr("frictionScaleFactor", "1")),
            ),
        ),
    );
    for e in &doc.entities {
        actions.push(private_init(&doc.map_id, e));
    }
    let mut storyboard = XmlElement::new("Storyboard").child(XmlElement::new("Init").child(actions));

    let chains: Vec<_> = doc.chains.iter().filter(|c| !c.actions.is_empty()).collect();
    if !chains.is_empty() {
        let mut act = XmlElement::new("Act").attr("name", "act");
        for chain in chains {
            let mut maneuver = XmlElement::new("Maneuver").attr("name", format!("{}_maneuver", chain.actor_id));
            let mut previous: Option<&str> = None;
            for a in &chain.actions {
                let cond = match a.trigger {
                    Trigger::OnStart => simulation_time(&format!("{}_start", a.event_name), 0.0),
                    Trigger::AfterPrevious => condition(
                        &format!("{}_after", a.event_name),
                        XmlElement::new("ByValueCondition").child(
                            XmlElement::new("StoryboardElementStateCondition")
                                .attr("storyboardElementType", "event")
                                .attr("storyboardElementRef", previous.unwrap_or(&a.event_name))
                                .attr("state", "endTransition"),
                        ),
                    ),
                    Trigger::OnDistanceToEgo(d) => condition(
                        &format!("{}_near", a.event_name),
                        XmlElement::new("ByEntityCondition")
                            .child(
                                XmlElement::new("TriggeringEntities")
                                    .attr("triggeringEntitiesRule", "any")
                                    .child(XmlElement::new("EntityRef").attr("entityRef", &chain.actor_id)),
                            )
                            .child(
                                XmlElement::new("EntityCondition").child(
                                    XmlElement::new("RelativeDistanceCondition")
                                        .attr("entityRef", EGO_ID)
                                        .attr("relativeDistanceType", "cartesianDistance")
                                        .attr("value", fmt_num(d))
                                        .attr("freespace", "false")
                                        .attr("rule", "lessThan"),
                                ),
                            ),
                    ),
                };
                maneuver.push(
                    XmlElement::new("Event")
                        .attr("name", &a.event_name)
                        .attr("priority", "overwrite")
                        .child(a.element.clone())
                        .child(start_trigger(cond)),
                );
                previous = Some(&a.event_name);
            }
            act.push(
                XmlElement::new("ManeuverGroup")
                    .attr("maximumExecutionCount", "1")
                    .attr("name", format!("{}_group", chain.actor_id))
                    .child(
                        XmlElement::new("Actors")
                            .attr("selectTriggeringEntities", "false")
                            .child(XmlElement::new("EntityRef").attr("entityRef", &chain.actor_id)),
                    )
                    .child(maneuver),
            );
        }
        act.push(start_trigger(simulation_time("act_start", 0.0)));
        storyboard.push(XmlElement::new("Story").attr("name", "scenario").child(act));
    }

    let mut stop = XmlElement::new("StopTrigger");
    for cond in &doc.stop_conditions {
        stop.push(XmlElement::new("ConditionGroup").child(cond.clone()));
    }
    storyboard.push(stop);
    root.push(storyboard);
    XoscDocument::new(root)
}
