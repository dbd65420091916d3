//! Seeded sampling of routes over a mini-map's lane graph.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::map::{wrap_angle, MiniMap, WaypointRef};

/// Heading change (degrees) separating straight travel from a turn.
const STRAIGHT_LIMIT_DEG: f64 = 45.0;
/// Heading change (degrees) above which a turn counts as a U-turn.
const TURN_LIMIT_DEG: f64 = 135.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCandidate {
    pub route_id: String,
    pub start: WaypointRef,
    pub end: WaypointRef,
    pub lanes: Vec<String>,
    pub length: f64,
    /// Net heading change across junction lanes, degrees, left positive.
    pub heading_change_deg: f64,
    pub labels: BTreeSet<String>,
}

impl RouteCandidate {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("map `{map_id}` offers {available} routes, {requested} were requested")]
pub struct NoRouteError {
    pub map_id: String,
    pub requested: usize,
    pub available: usize,
}

/// Result of a route search. A shortfall keeps whatever routes exist.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSearch {
    pub candidates: Vec<RouteCandidate>,
    pub shortfall: Option<NoRouteError>,
}

impl RouteSearch {
    pub fn is_complete(&self) -> bool {
        self.shortfall.is_none()
    }
}

/// Shortest lane path (by length) from `from` to `to`, both inclusive.
pub fn shortest_path(map: &MiniMap, from: &str, to: &str) -> Option<Vec<String>> {
    let n = map.lanes.len();
    let idx = |id: &str| map.lanes.iter().position(|l| l.lane_id == id);
    let start = idx(from)?;
    let goal = idx(to)?;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    dist[start] = map.lanes[start].length();
    for _ in 0..n {
        let Some(u) = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)))
        else {
            break;
        };
        done[u] = true;
        if u == goal {
            break;
        }
        for succ in &map.lanes[u].successors {
            let v = idx(succ).expect("validated successor");
            let alt = dist[u] + map.lanes[v].length();
            if alt < dist[v] - 1e-9 {
                dist[v] = alt;
                prev[v] = Some(u);
            }
        }
    }
    if !dist[goal].is_finite() {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while let Some(p) = prev[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    Some(path.into_iter().map(|i| map.lanes[i].lane_id.clone()).collect())
}

/// Builds the candidate for a lane path from the start of its first lane to
/// the end of its last.
pub fn route_from_path(map: &MiniMap, lanes: Vec<String>) -> RouteCandidate {
    let first = map.lane(&lanes[0]).expect("path lanes exist");
    let last = map.lane(lanes.last().unwrap()).expect("path lanes exist");
    let length = lanes.iter().map(|l| map.lane(l).unwrap().length()).sum();
    let change = net_heading_change(map, &lanes);
    let mut labels = BTreeSet::new();
    let abs = change.abs();
    labels.insert(
        if abs <= STRAIGHT_LIMIT_DEG {
            "go_forward"
        } else if abs <= TURN_LIMIT_DEG {
            if change > 0.0 {
                "turn_left"
            } else {
                "turn_right"
            }
        } else {
            "u_turn"
        }
        .to_string(),
    );
    if lanes.iter().any(|l| map.lane(l).unwrap().has_tag("roundabout")) {
        labels.insert("roundabout_transit".into());
    }
    if first.left.is_some() || first.right.is_some() {
        labels.insert("cut_in_capable".into());
    }
    RouteCandidate {
        route_id: format!("{}->{}", first.lane_id, last.lane_id),
        start: WaypointRef {
            lane_id: first.lane_id.clone(),
            s: 0.0,
        },
        end: WaypointRef {
            lane_id: last.lane_id.clone(),
            s: last.length(),
        },
        lanes,
        length,
        heading_change_deg: change,
        labels,
    }
}

/// Accumulated signed turning over the junction and roundabout lanes of a
/// path. Following the road through an ordinary bend does not count as a
/// turn.
fn net_heading_change(map: &MiniMap, lanes: &[String]) -> f64 {
    let mut total = 0.0;
    let mut previous: Option<f64> = None;
    for id in lanes {
        let lane = map.lane(id).unwrap();
        let turning = lane.has_tag("junction") || lane.has_tag("roundabout");
        for i in 0..lane.points.len() - 1 {
            let h = lane.segment_heading(i);
            if let Some(p) = previous {
                if turning {
                    total += wrap_angle(h - p);
                }
            }
            previous = Some(h);
        }
    }
    total.to_degrees()
}

/// All reachable (source, sink) routes in a deterministic order.
pub fn all_routes(map: &MiniMap) -> Vec<RouteCandidate> {
    let mut out = Vec::new();
    for source in map.source_lanes() {
        for sink in map.sink_lanes() {
            if let Some(path) = shortest_path(map, &source.lane_id, &sink.lane_id) {
                out.push(route_from_path(map, path));
            }
        }
    }
    out
}

/// Samples `n` distinct routes uniformly with a seeded generator.
///
/// Labels depend only on the path, so the seed decides which routes appear
/// but never how a given route is labelled.
pub fn route_random_search(map: &MiniMap, n: usize, rng_seed: u64) -> RouteSearch {
    let all = all_routes(map);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let available = all.len();
    let candidates: Vec<RouteCandidate> = all.choose_multiple(&mut rng, n.min(available)).cloned().collect();
    let shortfall = (available < n).then(|| NoRouteError {
        map_id: map.map_id.clone(),
        requested: n,
        available,
    });
    RouteSearch { candidates, shortfall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DslCorpus;

    fn map(id: &str) -> MiniMap {
        DslCorpus::bundled().maps[id].clone()
    }

    #[test]
    fn single_straight_lane_gives_one_forward_route() {
        let m = MiniMap::from_json(
            r#"{"map_id":"one","topology_tags":["straight_road"],"lane_width":3.5,"speed_limit":10,
            "lanes":[{"lane_id":"a","points":[[0,0],[200,0]],"successors":[],"left":null,"right":null,
            "left_marking":"solid","right_marking":"solid"}]}"#,
        )
        .unwrap();
        let found = route_random_search(&m, 1, 7);
        assert!(found.is_complete());
        assert_eq!(found.candidates.len(), 1);
        assert!(found.candidates[0].has_label("go_forward"));
        let more = route_random_search(&m, 3, 7);
        assert_eq!(more.candidates.len(), 1);
        assert_eq!(more.shortfall.as_ref().unwrap().available, 1);
    }

    #[test]
    fn intersection_labels_turns() {
        let m = map("intersection_4way");
        let routes = all_routes(&m);
        let label_of = |from: &str, to: &str| {
            routes
                .iter()
                .find(|r| r.start.lane_id == from && r.end.lane_id == to)
                .map(|r| r.labels.clone())
                .unwrap()
        };
        assert!(label_of("s_in_inner", "w_out_inner").contains("turn_left"));
        assert!(label_of("s_in_inner", "n_out_inner").contains("go_forward"));
        assert!(label_of("s_in_outer", "e_out_outer").contains("turn_right"));
    }

    #[test]
    fn curve_road_is_not_a_turn() {
        let m = map("curve_2lane");
        for r in all_routes(&m) {
            assert!(r.has_label("go_forward"), "{}", r.route_id);
        }
    }

    #[test]
    fn roundabout_routes_are_tagged() {
        let m = map("roundabout");
        let routes = all_routes(&m);
        assert!(!routes.is_empty());
        assert!(routes.iter().all(|r| r.has_label("roundabout_transit")));
        assert!(routes.iter().any(|r| r.has_label("turn_right")));
        assert!(routes.iter().any(|r| r.has_label("turn_left")));
        assert!(routes.iter().any(|r| r.has_label("go_forward")));
    }

    #[test]
    fn seeds_change_selection_not_labels() {
        let m = map("intersection_4way");
        let a = route_random_search(&m, 5, 1).candidates;
        let b = route_random_search(&m, 5, 2).candidates;
        let all = all_routes(&m);
        for r in a.iter().chain(b.iter()) {
            let reference = all.iter().find(|x| x.route_id == r.route_id).unwrap();
            assert_eq!(reference.labels, r.labels);
        }
        assert_eq!(route_random_search(&m, 5, 1).candidates, a);
    }
}
