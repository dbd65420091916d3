use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::representation::{ScenarioRepresentation, SlotId, TrafficParticipant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCount {
    pub value: String,
    pub votes: usize,
}

/// Plurality winner; ties go to the value that appeared first.
fn plurality<T: Clone + PartialEq>(values: &[T]) -> (T, Vec<(T, usize)>) {
    let mut tally: Vec<(T, usize)> = Vec::new();
    for v in values {
        match tally.iter_mut().find(|(x, _)| x == v) {
            Some(entry) => entry.1 += 1,
            None => tally.push((v.clone(), 1)),
        }
    }
    let best = tally
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.1.cmp(&b.1).then(j.cmp(i)))
        .map(|(_, (v, _))| v.clone())
        .expect("at least one value");
    (best, tally)
}

fn counts(tally: Vec<(String, usize)>) -> Vec<VoteCount> {
    tally
        .into_iter()
        .map(|(value, votes)| VoteCount { value, votes })
        .collect()
}

/// Per-slot majority vote over candidate representations, with tallies.
///
/// Participants are aligned by sorting each candidate's list on
/// (type, position relation); the list length is itself voted.
pub fn vote_with_tallies(
    candidates: &[ScenarioRepresentation],
) -> (ScenarioRepresentation, BTreeMap<String, Vec<VoteCount>>) {
    assert!(!candidates.is_empty(), "voting needs at least one candidate");
    let mut out = candidates[0].clone();
    let mut tallies = BTreeMap::new();

    for slot in SlotId::ALL.into_iter().filter(|s| !s.is_participant()) {
        let values: Vec<String> = candidates
            .iter()
            .map(|c| c.get(slot).expect("scalar").to_string())
            .collect();
        let (winner, tally) = plurality(&values);
        *out.get_mut(slot).expect("scalar") = winner;
        tallies.insert(slot.name().to_string(), counts(tally));
    }

    let aligned: Vec<Vec<TrafficParticipant>> = candidates
        .iter()
        .map(|c| {
            let mut ps = c.traffic_participants.clone();
            ps.sort_by_key(|p| p.sort_key());
            ps
        })
        .collect();
    let lengths: Vec<usize> = aligned.iter().map(Vec::len).collect();
    let (len, len_tally) = plurality(&lengths);
    tallies.insert(
        "TP.count_of_participants".into(),
        len_tally
            .into_iter()
            .map(|(v, votes)| VoteCount {
                value: v.to_string(),
                votes,
            })
            .collect(),
    );

    out.traffic_participants.clear();
    for j in 0..len {
        let present: Vec<&TrafficParticipant> = aligned.iter().filter_map(|ps| ps.get(j)).collect();
        let mut p = present[0].clone();
        for slot in SlotId::PARTICIPANT {
            let values: Vec<String> = present
                .iter()
                .map(|q| q.get(slot).expect("participant slot").to_string())
                .collect();
            let (winner, tally) = plurality(&values);
            *p.get_mut(slot).expect("participant slot") = winner;
            tallies.insert(format!("{}[{j}]", slot.name()), counts(tally));
        }
        let (count, _) = plurality(&present.iter().map(|q| q.count).collect::<Vec<_>>());
        p.count = count;
        out.traffic_participants.push(p);
    }
    (out, tallies)
}

pub fn self_consistency_vote(candidates: &[ScenarioRepresentation]) -> ScenarioRepresentation {
    vote_with_tallies(candidates).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::tests::left_turn;

    #[test]
    fn singleton_vote_is_identity_up_to_participant_order() {
        let rep = left_turn();
        assert_eq!(self_consistency_vote(std::slice::from_ref(&rep)), rep);
    }

    #[test]
    fn majority_wins_per_slot() {
        let a = left_turn();
        let mut b = left_turn();
        b.road_topology.topology = "t_junction".into();
        let mut c = left_turn();
        c.climate.weather_type = "rainy".into();
        let out = self_consistency_vote(&[b.clone(), a.clone(), c]);
        assert_eq!(out.road_topology.topology, "intersection");
        assert_eq!(out.climate.weather_type, "sunny");
    }

    #[test]
    fn ties_go_to_first_seen() {
        let a = left_turn();
        let mut b = left_turn();
        b.road_topology.topology = "roundabout".into();
        assert_eq!(
            self_consistency_vote(&[b.clone(), a.clone()]).road_topology.topology,
            "roundabout"
        );
        assert_eq!(self_consistency_vote(&[a, b]).road_topology.topology, "intersection");
    }

    #[test]
    fn participant_count_is_voted() {
        let a = left_turn();
        let mut none = left_turn();
        none.traffic_participants.clear();
        let out = self_consistency_vote(&[none.clone(), a.clone(), a.clone()]);
        assert_eq!(out.traffic_participants.len(), 1);
        let out = self_consistency_vote(&[none.clone(), none, a]);
        assert!(out.traffic_participants.is_empty());
    }
}
