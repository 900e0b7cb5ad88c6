use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    arg_str, precondition, ItemKind, Location, SkillOutcome, WorldError, WorldState,
    FINISHED_LOCATION, SINK_COUNTER,
};
use crate::skills::ToolInvocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclePhase {
    #[default]
    Idle,
    /// Cycle ran; dishes are clean but still hot.
    Finished,
    Cooled,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DishwasherState {
    pub door_open: bool,
    pub racks_out: BTreeSet<u8>,
    pub racks: BTreeMap<u8, Vec<String>>,
    pub detergent: Option<String>,
    pub phase: CyclePhase,
}

const RACKS: [u8; 3] = [1, 2, 3];

fn rack_arg(call: &ToolInvocation) -> Result<Option<u8>, WorldError> {
    match call.arguments.get("rack") {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => {
            let parsed = v
                .as_str()
                .and_then(|s| s.trim().parse::<u8>().ok())
                .or_else(|| v.as_u64().and_then(|n| u8::try_from(n).ok()));
            match parsed {
                Some(k) if RACKS.contains(&k) => Ok(Some(k)),
                _ => Err(precondition(&call.name, format!("no rack {v}"))),
            }
        }
    }
}

pub(super) fn apply(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = call.name.as_str();
    match skill {
        "grasp_item" => grasp_item(w, call),
        "remove_particles" => {
            let id = held_utensil(w, skill)?;
            let item = w.objects.get_mut(&id).expect("held");
            if let ItemKind::Utensil(u) = &mut item.kind {
                u.particles_removed = true;
            }
            Ok(SkillOutcome::ok(
                format!("removed large particles from {id}"),
                vec![format!("{id}: scraped")],
            ))
        }
        "open_dishwasher" => {
            let washer = washer(w)?;
            if washer.door_open {
                return Err(precondition(skill, "the dishwasher is already open"));
            }
            washer.door_open = true;
            Ok(SkillOutcome::ok("opened the dishwasher", vec!["door: open".into()]))
        }
        "pull_out_rack" => {
            let rack = rack_arg(call)?;
            let washer = washer(w)?;
            if !washer.door_open {
                return Err(precondition(skill, "the dishwasher door is closed"));
            }
            let racks: Vec<u8> = rack.map(|k| vec![k]).unwrap_or_else(|| RACKS.to_vec());
            washer.racks_out.extend(racks.iter().copied());
            let names = racks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
            Ok(SkillOutcome::ok(
                format!("pulled out rack {names}"),
                vec![format!("racks out: {names}")],
            ))
        }
        "put_item_on_rack" => put_item_on_rack(w, call),
        "add_detergent" => {
            let flavor = crate::guidelines::normalize_name(arg_str(call, "flavor")?);
            let name = format!("{flavor} detergent");
            let stock = w.stocks.get(&name).copied();
            let washer = washer(w)?;
            if !washer.door_open {
                return Err(precondition(skill, "the dishwasher door is closed"));
            }
            if let Some(existing) = &washer.detergent {
                return Err(precondition(skill, format!("the dispenser already holds {existing}")));
            }
            match stock {
                None => return Err(precondition(skill, format!("there is no {name}"))),
                Some(s) if s < 1.0 => return Err(precondition(skill, format!("{name} ran out"))),
                Some(_) => {}
            }
            washer.detergent = Some(flavor.clone());
            *w.stocks.get_mut(&name).expect("stock") -= 1.0;
            Ok(SkillOutcome::ok(
                format!("added {name} into the detergent dispenser"),
                vec![format!("detergent: {flavor}")],
            ))
        }
        "close_dishwasher" => {
            let washer = washer(w)?;
            if !washer.door_open {
                return Err(precondition(skill, "the dishwasher is already closed"));
            }
            washer.door_open = false;
            washer.racks_out.clear();
            Ok(SkillOutcome::ok("closed the dishwasher", vec!["door: closed".into()]))
        }
        "start_cycle" => {
            let washer = washer(w)?;
            if washer.door_open {
                return Err(precondition(skill, "close the dishwasher first"));
            }
            let Some(detergent) = washer.detergent.take() else {
                return Err(precondition(skill, "no detergent in the dispenser"));
            };
            let loaded: Vec<(u8, String)> = washer
                .racks
                .iter()
                .flat_map(|(k, ids)| ids.iter().map(move |id| (*k, id.clone())))
                .collect();
            if loaded.is_empty() {
                washer.detergent = Some(detergent);
                return Err(precondition(skill, "the dishwasher is empty"));
            }
            washer.phase = CyclePhase::Finished;
            for (rack, id) in &loaded {
                if let Some(ItemKind::Utensil(u)) = w.objects.get_mut(id).map(|i| &mut i.kind) {
                    u.clean = true;
                    u.washed_on = Some(*rack);
                    u.washed_with = Some(detergent.clone());
                }
            }
            Ok(SkillOutcome::ok(
                format!("ran the cycle with {detergent} detergent on {} items", loaded.len()),
                vec!["cycle: finished".into()],
            ))
        }
        "wait_for_completion" => {
            let washer = washer(w)?;
            if washer.phase != CyclePhase::Finished {
                return Err(precondition(skill, "no finished cycle to wait for"));
            }
            washer.phase = CyclePhase::Cooled;
            Ok(SkillOutcome::ok(
                "the cycle is complete and the dishes have cooled down",
                vec!["cycle: cooled".into()],
            ))
        }
        "inspect_item" => inspect_item(w, call),
        "return_items" => {
            let washer = washer(w)?;
            if washer.phase != CyclePhase::Cooled {
                return Err(precondition(skill, "the dishes are not ready to unload"));
            }
            let ids: Vec<String> = washer.racks.values().flatten().cloned().collect();
            if ids.is_empty() {
                return Err(precondition(skill, "the dishwasher is empty"));
            }
            washer.racks.clear();
            washer.phase = CyclePhase::Idle;
            let target = w.config.zone(FINISHED_LOCATION).expect("validated zone");
            for (i, id) in ids.iter().enumerate() {
                let item = w.objects.get_mut(id).expect("racked item");
                item.location = Location::Zone(FINISHED_LOCATION.to_string());
                item.pose = super::Point::new(target.x, target.y - 0.05 * i as f64);
                if let ItemKind::Utensil(u) = &item.kind {
                    item.label = format!("clean {}", u.kind);
                }
            }
            Ok(SkillOutcome::ok(
                format!("returned {} clean items to the finished location", ids.len()),
                vec![format!("{FINISHED_LOCATION}: +{}", ids.len())],
            ))
        }
        other => Err(WorldError::UnknownSkill(other.to_string())),
    }
}

fn washer(w: &mut WorldState) -> Result<&mut DishwasherState, WorldError> {
    w.dishwasher
        .as_mut()
        .ok_or_else(|| precondition("dishwasher", "this world has no dishwasher"))
}

fn held_utensil(w: &WorldState, skill: &str) -> Result<String, WorldError> {
    match w.held_item() {
        Some(item) if matches!(item.kind, ItemKind::Utensil(_)) => Ok(item.id.clone()),
        Some(item) => Err(precondition(skill, format!("{} is not a utensil", item.id))),
        None => Err(precondition(skill, "gripper is empty")),
    }
}

fn kind_of(label: &str) -> String {
    let label = crate::guidelines::normalize_name(label);
    label
        .strip_prefix("dirty ")
        .or_else(|| label.strip_prefix("clean "))
        .unwrap_or(&label)
        .to_string()
}

fn grasp_item(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = "grasp_item";
    let label = crate::guidelines::normalize_name(arg_str(call, "label")?);
    if let Some(held) = &w.gripper {
        return Err(precondition(skill, format!("gripper already holds {held}")));
    }
    let wanted = kind_of(&label);
    let id = w
        .items_at(SINK_COUNTER)
        .filter(|i| match &i.kind {
            ItemKind::Utensil(u) => i.label == label || u.kind == wanted,
            _ => false,
        })
        .map(|i| i.id.clone())
        .next()
        .ok_or_else(|| precondition(skill, format!("no {label} on the sink counter")))?;
    if w.grasp_slips() {
        return Err(precondition(skill, format!("{id} slipped out of the gripper")));
    }
    w.objects.get_mut(&id).expect("item").location = Location::Gripper;
    w.gripper = Some(id.clone());
    Ok(SkillOutcome::ok(
        format!("grasped {id}"),
        vec![format!("gripper: {id}")],
    ))
}

fn put_item_on_rack(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = "put_item_on_rack";
    let Some(rack) = rack_arg(call)? else {
        return Err(precondition(skill, "missing rack"));
    };
    let id = held_utensil(w, skill)?;
    let scraped = matches!(&w.objects[&id].kind, ItemKind::Utensil(u) if u.particles_removed);
    let washer = washer(w)?;
    if !washer.door_open {
        return Err(precondition(skill, "the dishwasher door is closed"));
    }
    if !washer.racks_out.contains(&rack) {
        return Err(precondition(skill, format!("rack {rack} is not pulled out")));
    }
    if !scraped {
        return Err(precondition(skill, format!("remove large particles from {id} first")));
    }
    washer.racks.entry(rack).or_default().push(id.clone());
    w.gripper = None;
    w.objects.get_mut(&id).expect("item").location = Location::Rack(rack);
    Ok(SkillOutcome::ok(
        format!("put {id} on rack {rack}"),
        vec![format!("{id}: rack {rack}"), "gripper: empty".into()],
    ))
}

fn inspect_item(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = "inspect_item";
    let kind = kind_of(arg_str(call, "label")?);
    let kind = kind.trim_end_matches('s').to_string();
    let phase = w.dishwasher.as_ref().map(|d| d.phase);
    let racked: Vec<&super::Item> = w
        .objects
        .values()
        .filter(|i| matches!(i.location, Location::Rack(_)))
        .filter(|i| {
            matches!(&i.kind, ItemKind::Utensil(u) if u.kind == kind || (kind == "knive" && u.kind == "knife"))
        })
        .collect();
    if racked.is_empty() {
        return Err(precondition(skill, format!("no {kind} in the dishwasher")));
    }
    if phase != Some(CyclePhase::Cooled) {
        return Err(precondition(skill, format!("the {kind} items are not clean and dry yet")));
    }
    let dirty = racked
        .iter()
        .filter(|i| !matches!(&i.kind, ItemKind::Utensil(u) if u.clean))
        .count();
    if dirty > 0 {
        return Err(precondition(skill, format!("{dirty} {kind} items are still dirty")));
    }
    Ok(SkillOutcome::ok(
        format!("{} {kind} items are clean and dry", racked.len()),
        Vec::new(),
    ))
}

/// What a finished dishwashing run must achieve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DishGoal {
    /// Kind, count and the rack it must be washed on.
    pub items: Vec<(String, usize, u8)>,
    /// Detergent flavor, e.g. `rose`.
    pub detergent: String,
}

impl WorldState {
    /// For every requested kind, at least `count` items sit clean at the
    /// finished location, washed on the required rack with the requested
    /// detergent.
    pub fn dishes_completed(&self, goal: &DishGoal) -> bool {
        goal.items.iter().all(|(kind, count, rack)| {
            let done = self
                .items_at(FINISHED_LOCATION)
                .filter(|i| {
                    matches!(&i.kind, ItemKind::Utensil(u)
                        if &u.kind == kind
                            && u.clean
                            && u.washed_on == Some(*rack)
                            && u.washed_with.as_deref() == Some(goal.detergent.as_str()))
                })
                .count();
            done >= *count
        })
    }
}
