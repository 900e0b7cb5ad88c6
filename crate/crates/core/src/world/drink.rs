use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    arg_f64, arg_str, precondition, ItemKind, Location, Portion, SkillOutcome, Viscosity,
    WorldError, WorldState, CUP_STATION, DISCARD, FINISHED_LOCATION, WORKING_AREA,
};
use crate::skills::ToolInvocation;

pub(crate) const EMPTY_CUP: &str = "empty cup";
pub(crate) const CUP_LABELS: &[&str] = &[
    EMPTY_CUP,
    "working cup",
    "finished cup",
    "discarded cup",
    "used cup",
];

const PLACE_TARGETS: &[&str] = &[WORKING_AREA, FINISHED_LOCATION, DISCARD];

fn cup_label(zone: &str, empty: bool) -> &'static str {
    match zone {
        WORKING_AREA => "working cup",
        FINISHED_LOCATION => "finished cup",
        DISCARD => "discarded cup",
        _ if empty => EMPTY_CUP,
        _ => "used cup",
    }
}

pub(super) fn apply(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    match call.name.as_str() {
        "grasp_cup" => grasp_cup(w, call),
        "place_cup" => place_cup(w, call),
        "pour" => dispense(w, call, Dispense::Pour),
        "scoop_to_location" => dispense(w, call, Dispense::Scoop),
        other => Err(WorldError::UnknownSkill(other.to_string())),
    }
}

fn grasp_cup(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = "grasp_cup";
    let target = super::Point::new(arg_f64(call, "x")?, arg_f64(call, "y")?);
    if let Some(held) = &w.gripper {
        return Err(precondition(skill, format!("gripper already holds {held}")));
    }
    let radius = w.config.capture_radius_m;
    let nearest = w
        .cups()
        .filter(|c| c.location != Location::Gripper)
        .map(|c| (c.pose.distance(target), c.id.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let id = match nearest {
        Some((d, id)) if d <= radius => id,
        _ => {
            return Err(precondition(
                skill,
                format!(
                    "no cup within {radius:.2} m of ({:.2}, {:.2})",
                    target.x, target.y
                ),
            ))
        }
    };
    if w.grasp_slips() {
        return Err(precondition(skill, "the cup slipped out of the gripper"));
    }
    let cup = w.objects.get_mut(&id).expect("cup exists");
    let from = cup.location.to_string();
    cup.location = Location::Gripper;
    w.gripper = Some(id.clone());
    Ok(SkillOutcome::ok(
        format!("grasped cup {id} from {from}"),
        vec![format!("gripper: {id}")],
    ))
}

fn place_cup(w: &mut WorldState, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
    let skill = "place_cup";
    let location = arg_str(call, "location")?;
    if !PLACE_TARGETS.contains(&location) {
        return Err(precondition(skill, format!("unknown location '{location}'")));
    }
    let Some(id) = w.gripper.clone() else {
        return Err(precondition(skill, "gripper is empty"));
    };
    if !matches!(w.objects[&id].kind, ItemKind::Cup) {
        return Err(precondition(skill, format!("{id} is not a cup")));
    }
    if location == WORKING_AREA && w.cups().any(|c| c.location == Location::Zone(WORKING_AREA.into()))
    {
        return Err(precondition(skill, "working_area already has a cup"));
    }
    let pose = w
        .config
        .zone(location)
        .ok_or_else(|| precondition(skill, format!("zone '{location}' is not configured")))?;
    let empty = w.cup_volume(&id) == 0.0;
    let cup = w.objects.get_mut(&id).expect("held cup exists");
    cup.location = Location::Zone(location.to_string());
    cup.pose = pose;
    cup.label = cup_label(location, empty).to_string();
    w.gripper = None;
    Ok(SkillOutcome::ok(
        format!("placed cup {id} at {location}"),
        vec![format!("{id}: {location}"), "gripper: empty".into()],
    ))
}

#[derive(Clone, Copy)]
enum Dispense {
    Pour,
    Scoop,
}

fn dispense(
    w: &mut WorldState,
    call: &ToolInvocation,
    how: Dispense,
) -> Result<SkillOutcome, WorldError> {
    let skill = call.name.as_str();
    let ingredient = crate::guidelines::normalize_name(arg_str(call, "ingredient")?);
    let location = arg_str(call, "location")?;
    let layout = w.config.drink.as_ref().expect("drink layout");
    // "matcha" and "matcha powder" name the same container.
    let slot = layout
        .ingredients
        .iter()
        .find(|s| s.name == ingredient)
        .or_else(|| {
            layout
                .ingredients
                .iter()
                .find(|s| s.name.split_whitespace().next() == Some(ingredient.as_str()))
        })
        .ok_or_else(|| precondition(skill, format!("there is no {ingredient} on the shelf")))?;
    let volumes = w.config.volumes;
    let amount = match (how, slot.viscosity) {
        (Dispense::Scoop, Viscosity::Thin) => {
            return Err(precondition(skill, format!("{} is a liquid and cannot be scooped", slot.name)))
        }
        (Dispense::Scoop, Viscosity::Thick) => volumes.scoop_unit_ml,
        (Dispense::Pour, Viscosity::Thin) => volumes.thin_pour_ml,
        (Dispense::Pour, Viscosity::Thick) => volumes.thick_pour_ml,
    };
    let name = slot.name.clone();
    let cup = w
        .cups()
        .find(|c| c.location == Location::Zone(location.to_string()))
        .map(|c| c.id.clone())
        .ok_or_else(|| precondition(skill, format!("no cup at {location}")))?;
    let stock = w.stocks.get(&name).copied().unwrap_or(0.0);
    if stock < amount {
        return Err(precondition(skill, format!("not enough {name} left ({stock:.0} ml)")));
    }
    let volume = w.cup_volume(&cup);
    if volume + amount > volumes.cup_capacity_ml {
        return Err(precondition(
            skill,
            format!(
                "cup {cup} holds {volume:.0} ml; adding {amount:.0} ml exceeds its {:.0} ml capacity",
                volumes.cup_capacity_ml
            ),
        ));
    }
    *w.stocks.get_mut(&name).expect("stock exists") -= amount;
    w.cup_contents.entry(cup.clone()).or_default().push(Portion {
        ingredient: name.clone(),
        ml: amount,
    });
    let zone = match &w.objects[&cup].location {
        Location::Zone(z) => z.clone(),
        _ => CUP_STATION.to_string(),
    };
    w.objects.get_mut(&cup).expect("cup").label = cup_label(&zone, false).to_string();
    let verb = match how {
        Dispense::Pour => "poured",
        Dispense::Scoop => "scooped",
    };
    Ok(SkillOutcome::ok(
        format!("{verb} {amount:.0} ml of {name} into cup {cup} at {location}"),
        vec![format!("{cup}: +{amount:.0} ml {name}"), format!("stock {name}: -{amount:.0} ml")],
    ))
}

/// What a served drink must contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrinkGoal {
    /// Everything added on top of the base, e.g. boba and flavors.
    pub additions: BTreeSet<String>,
    pub base: String,
}

/// Minimum base volume for a served drink.
pub const MIN_BASE_ML: f64 = 100.0;

impl DrinkGoal {
    pub fn new<I, S>(additions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        DrinkGoal {
            additions: additions.into_iter().map(Into::into).collect(),
            base: "milk".to_string(),
        }
    }
}

impl WorldState {
    /// Ingredient totals of a cup, merged by name.
    pub fn cup_totals(&self, cup: &str) -> std::collections::BTreeMap<String, f64> {
        let mut totals = std::collections::BTreeMap::new();
        for p in self.cup_contents.get(cup).into_iter().flatten() {
            *totals.entry(p.ingredient.clone()).or_insert(0.0) += p.ml;
        }
        totals
    }

    /// A cup at the finished location holds exactly the goal's ingredients,
    /// every addition present and at least [`MIN_BASE_ML`] of the base.
    pub fn drink_completed(&self, goal: &DrinkGoal) -> bool {
        self.cups()
            .filter(|c| c.location == Location::Zone(FINISHED_LOCATION.into()))
            .any(|c| {
                let totals = self.cup_totals(&c.id);
                let mut expected = goal.additions.clone();
                expected.insert(goal.base.clone());
                let present: BTreeSet<String> = totals.keys().cloned().collect();
                present == expected
                    && totals.get(&goal.base).copied().unwrap_or(0.0) >= MIN_BASE_ML
                    && goal.additions.iter().all(|a| totals[a] > 0.0)
            })
    }
}
