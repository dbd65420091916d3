//! Data files compiled into the crate so the default configuration works
//! without a data directory.

pub const REPOSITORY_JSON: &str = include_str!("../data/repository.json");
pub const RULES_JSON: &str = include_str!("../data/rules.json");
pub const DECOMPOSITION_JSON: &str = include_str!("../data/decomposition.json");
pub const PIPELINE_JSON: &str = include_str!("../data/pipeline.json");
pub const FRAGMENT_INDEX_JSON: &str = include_str!("../data/corpus/fragments/index.json");

/// `(file name, contents)` of every fragment template.
pub const FRAGMENT_TEMPLATES: &[(&str, &str)] = &[
    (
        "autopilot.xml.tmpl",
        include_str!("../data/corpus/fragments/autopilot.xml.tmpl"),
    ),
    (
        "event_accelerate.xml.tmpl",
        include_str!("../data/corpus/fragments/event_accelerate.xml.tmpl"),
    ),
    (
        "event_cruise.xml.tmpl",
        include_str!("../data/corpus/fragments/event_cruise.xml.tmpl"),
    ),
    (
        "event_decelerate.xml.tmpl",
        include_str!("../data/corpus/fragments/event_decelerate.xml.tmpl"),
    ),
    (
        "event_keep_lane.xml.tmpl",
        include_str!("../data/corpus/fragments/event_keep_lane.xml.tmpl"),
    ),
    (
        "event_lane_change_left.xml.tmpl",
        include_str!("../data/corpus/fragments/event_lane_change_left.xml.tmpl"),
    ),
    (
        "event_lane_change_right.xml.tmpl",
        include_str!("../data/corpus/fragments/event_lane_change_right.xml.tmpl"),
    ),
    (
        "event_stop.xml.tmpl",
        include_str!("../data/corpus/fragments/event_stop.xml.tmpl"),
    ),
    (
        "event_yield.xml.tmpl",
        include_str!("../data/corpus/fragments/event_yield.xml.tmpl"),
    ),
    (
        "map_curve_2lane.xml.tmpl",
        include_str!("../data/corpus/fragments/map_curve_2lane.xml.tmpl"),
    ),
    (
        "map_highway_3lane.xml.tmpl",
        include_str!("../data/corpus/fragments/map_highway_3lane.xml.tmpl"),
    ),
    (
        "map_intersection_4way.xml.tmpl",
        include_str!("../data/corpus/fragments/map_intersection_4way.xml.tmpl"),
    ),
    (
        "map_roundabout.xml.tmpl",
        include_str!("../data/corpus/fragments/map_roundabout.xml.tmpl"),
    ),
    (
        "map_straight_2lane.xml.tmpl",
        include_str!("../data/corpus/fragments/map_straight_2lane.xml.tmpl"),
    ),
    (
        "map_t_junction.xml.tmpl",
        include_str!("../data/corpus/fragments/map_t_junction.xml.tmpl"),
    ),
    (
        "monitor_collision.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_collision.xml.tmpl"),
    ),
    (
        "monitor_lane_invasion.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_lane_invasion.xml.tmpl"),
    ),
    (
        "monitor_off_road.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_off_road.xml.tmpl"),
    ),
    (
        "monitor_red_light.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_red_light.xml.tmpl"),
    ),
    (
        "monitor_road_rights.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_road_rights.xml.tmpl"),
    ),
    (
        "monitor_solid_line.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_solid_line.xml.tmpl"),
    ),
    (
        "monitor_speed_limit.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_speed_limit.xml.tmpl"),
    ),
    (
        "monitor_stop_sign.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_stop_sign.xml.tmpl"),
    ),
    (
        "monitor_timeout.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_timeout.xml.tmpl"),
    ),
    (
        "monitor_wrong_direction.xml.tmpl",
        include_str!("../data/corpus/fragments/monitor_wrong_direction.xml.tmpl"),
    ),
    (
        "spawn_obstacle.xml.tmpl",
        include_str!("../data/corpus/fragments/spawn_obstacle.xml.tmpl"),
    ),
    (
        "spawn_pedestrian.xml.tmpl",
        include_str!("../data/corpus/fragments/spawn_pedestrian.xml.tmpl"),
    ),
    (
        "spawn_vehicle.xml.tmpl",
        include_str!("../data/corpus/fragments/spawn_vehicle.xml.tmpl"),
    ),
    (
        "time_of_day.xml.tmpl",
        include_str!("../data/corpus/fragments/time_of_day.xml.tmpl"),
    ),
    (
        "weather_cloudy.xml.tmpl",
        include_str!("../data/corpus/fragments/weather_cloudy.xml.tmpl"),
    ),
    (
        "weather_foggy.xml.tmpl",
        include_str!("../data/corpus/fragments/weather_foggy.xml.tmpl"),
    ),
    (
        "weather_rainy.xml.tmpl",
        include_str!("../data/corpus/fragments/weather_rainy.xml.tmpl"),
    ),
    (
        "weather_snowy.xml.tmpl",
        include_str!("../data/corpus/fragments/weather_snowy.xml.tmpl"),
    ),
    (
        "weather_sunny.xml.tmpl",
        include_str!("../data/corpus/fragments/weather_sunny.xml.tmpl"),
    ),
];

/// `(file name, contents)` of every mini-map.
pub const MAPS: &[(&str, &str)] = &[
    (
        "curve_2lane.map.json",
        include_str!("../data/corpus/maps/curve_2lane.map.json"),
    ),
    (
        "highway_3lane.map.json",
        include_str!("../data/corpus/maps/highway_3lane.map.json"),
    ),
    (
        "intersection_4way.map.json",
        include_str!("../data/corpus/maps/intersection_4way.map.json"),
    ),
    (
        "roundabout.map.json",
        include_str!("../data/corpus/maps/roundabout.map.json"),
    ),
    (
        "straight_2lane.map.json",
        include_str!("../data/corpus/maps/straight_2lane.map.json"),
    ),
    (
        "t_junction.map.json",
        include_str!("../data/corpus/maps/t_junction.map.json"),
    ),
];

/// Demo descriptions with ground-truth records.
pub const DEMO_CASES_JSON: &str = include_str!("../data/demo/cases.json");
/// Scripted model responses for the demo descriptions.
pub const DEMO_SCRIPT_JSON: &str = include_str!("../data/demo/scripted_table.json");
