use std::fmt::Write as _;

use crate::repository::RepositoryConfig;
use crate::representation::{serialize, ScenarioRepresentation, SlotId};

use super::extract::json_location;
use super::{PipelineConfig, PipelineError, Stage};

/// The draft handed to the alignment stage: a parsed representation when
/// extraction succeeded, the raw text otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Representation(ScenarioRepresentation),
    Raw(String),
}

fn dictionary(repo: &RepositoryConfig) -> String {
    let mut out = String::from("Element dictionary (field: allowed words)\n");
    for slot in repo.slots_in_priority_order() {
        let location = slot
            .slot_name
            .parse::<SlotId>()
            .map(|id| {
                let (section, field) = json_location(id);
                format!("{section}.{field}")
            })
            .unwrap_or_else(|_| slot.slot_name.clone());
        let open = if slot.allows_novel { " (own words allowed)" } else { "" };
        let _ = writeln!(out, "- {location}{open}: {}", slot.vocabulary.join(" | "));
    }
    out
}

fn format_section() -> &'static str {
    "Record format: a JSON object with the sections climate, road_topology, \
transportation_facilities, temporary_changes, ego_vehicle and traffic_participants. \
traffic_participants is a list; each entry has participant_type, position_relation, \
longitudinal_oracle, lateral_oracle, global_behavior and count. Use `none` for an \
optional element that the description does not mention.\n"
}

fn examples(config: &PipelineConfig) -> String {
    let mut out = String::from("Worked examples\n");
    for (i, ex) in config.few_shot_examples.iter().enumerate() {
        let record = String::from_utf8(serialize(&ex.representation)).expect("UTF-8 JSON");
        let _ = write!(
            out,
            "Example {n} description:\n{}\nExample {n} record:\n{record}",
            ex.text,
            n = i + 1
        );
    }
    out
}

/// The text a stage contributes to its prompt, as recorded in traces.
pub(crate) fn stage_section(stage: Stage, config: &PipelineConfig, repo: &RepositoryConfig) -> String {
    match stage {
        Stage::BP => format!("{}\n\n{}\n{}", config.role_prompt, dictionary(repo), format_section()),
        Stage::FS => examples(config),
        Stage::CoT => config.cot_scaffold.clone(),
        Stage::SAC => config.sac_scaffold.clone(),
        Stage::SC => format!(
            "{} independent paths at temperature {}, voted per slot",
            config.sc_paths, config.temperature.self_consistency
        ),
    }
}

/// Assembles the prompt for `stage`.
///
/// BP, FS and CoT compose cumulatively into one draft prompt. SAC wraps the
/// prior draft with the alignment instructions. SC reuses the draft prompt,
/// since it reruns the chain on independent paths.
pub fn build_prompt(
    stage: Stage,
    text: &str,
    config: &PipelineConfig,
    repo: &RepositoryConfig,
    prior: Option<&Prior>,
) -> Result<String, PipelineError> {
    if !config.has(stage) {
        return Err(PipelineError::Config(format!("stage {stage} is not configured")));
    }
    if (stage == Stage::SAC) != prior.is_some() {
        return Err(PipelineError::Config(format!(
            "a prior draft is required for SAC and only for SAC (stage {stage})"
        )));
    }
    let mut out = stage_section(Stage::BP, config, repo);
    match stage {
        Stage::SAC => {
            out.push('\n');
            out.push_str(&config.sac_scaffold);
            out.push_str("\n\nDraft record:\n");
            match prior.expect("checked above") {
                Prior::Representation(rep) => out.push_str(&String::from_utf8(serialize(rep)).expect("UTF-8 JSON")),
                Prior::Raw(raw) => {
                    out.push_str(raw.trim());
                    out.push('\n');
                }
            }
        }
        _ => {
            let top = if stage == Stage::SC {
                config.draft_stage()
            } else {
                stage
            };
            if top >= Stage::FS {
                out.push('\n');
                out.push_str(&examples(config));
            }
            if top >= Stage::CoT {
                out.push('\n');
                out.push_str(&config.cot_scaffold);
                out.push('\n');
            }
        }
    }
    let _ = write!(out, "\nDescription:\n{}\n\nRecord:\n", text.trim());
    Ok(out)
}
