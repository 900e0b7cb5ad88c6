//! Deterministic kitchen simulator.
//!
//! A [`WorldState`] is the ground truth for one session. Skills are applied
//! transactionally: a failing skill leaves the state exactly as it was.

mod config;
mod dishwash;
mod drink;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidelines::TaskFamily;
use crate::skills::ToolInvocation;

pub use config::{
    DishLayout, DrinkLayout, IngredientSlot, Point, Viscosity, Volumes, WorldConfig, CUP_STATION,
    DISCARD, DISHWASHER, FINISHED_LOCATION, SINK_COUNTER, WORKING_AREA,
};
pub use dishwash::{CyclePhase, DishGoal, DishwasherState};
pub use drink::DrinkGoal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("{skill}: {reason}")]
    PreconditionFailed { skill: String, reason: String },
    #[error("unknown skill '{0}' for this world")]
    UnknownSkill(String),
    #[error("unknown domain '{0}'")]
    UnknownDomain(String),
    #[error("world config: {0}")]
    Config(String),
}

pub(crate) fn precondition(skill: &str, reason: impl Into<String>) -> WorldError {
    WorldError::PreconditionFailed {
        skill: skill.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Location {
    Zone(String),
    Gripper,
    Rack(u8),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Zone(z) => f.write_str(z),
            Location::Gripper => f.write_str("in gripper"),
            Location::Rack(k) => write!(f, "on rack {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtensilState {
    pub kind: String,
    pub particles_removed: bool,
    pub clean: bool,
    /// Rack the utensil was on when the last cycle ran.
    pub washed_on: Option<u8>,
    pub washed_with: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ItemKind {
    Cup,
    Container { ingredient: String },
    Utensil(UtensilState),
    Appliance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    /// Detector-visible name.
    pub label: String,
    pub pose: Point,
    pub location: Location,
    pub kind: ItemKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portion {
    pub ingredient: String,
    pub ml: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub ok: bool,
    pub observation: String,
    pub state_delta: Vec<String>,
}

impl SkillOutcome {
    pub(crate) fn ok(observation: impl Into<String>, state_delta: Vec<String>) -> Self {
        SkillOutcome {
            ok: true,
            observation: observation.into(),
            state_delta,
        }
    }

    pub fn failed(observation: impl Into<String>) -> Self {
        SkillOutcome {
            ok: false,
            observation: observation.into(),
            state_delta: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub domain: TaskFamily,
    pub config: Arc<WorldConfig>,
    pub objects: BTreeMap<String, Item>,
    pub cup_contents: BTreeMap<String, Vec<Portion>>,
    pub stocks: BTreeMap<String, f64>,
    pub gripper: Option<String>,
    pub dishwasher: Option<DishwasherState>,
    pub rng_seed: u64,
    /// Number of skills applied successfully so far.
    pub applied: u64,
}

/// Anything skills can be dispatched to. Implemented by [`WorldState`];
/// tests wrap it to audit mutations.
pub trait SkillTarget {
    fn apply_skill(&mut self, call: &ToolInvocation) -> Result<SkillOutcome, WorldError>;
    fn world(&self) -> &WorldState;
}

impl SkillTarget for WorldState {
    fn apply_skill(&mut self, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
        WorldState::apply_skill(self, call)
    }

    fn world(&self) -> &WorldState {
        self
    }
}

pub(crate) fn arg_str<'a>(call: &'a ToolInvocation, name: &str) -> Result<&'a str, WorldError> {
    call.arguments
        .get(name)
        .and_then(|v| v.as_str())
        .ok_or_else(|| precondition(&call.name, format!("missing string argument '{name}'")))
}

pub(crate) fn arg_f64(call: &ToolInvocation, name: &str) -> Result<f64, WorldError> {
    call.arguments
        .get(name)
        .and_then(|v| v.as_f64())
        .filter(|v| v.is_finite())
        .ok_or_else(|| precondition(&call.name, format!("missing number argument '{name}'")))
}

fn jitter(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    if amplitude > 0.0 {
        rng.random_range(-amplitude..=amplitude)
    } else {
        0.0
    }
}

impl WorldState {
    /// Canonical starting layout for a domain with the builtin config.
    pub fn reset(domain: TaskFamily, seed: u64) -> Self {
        Self::from_config(Arc::new(WorldConfig::builtin(domain)), seed)
    }

    /// Like [`WorldState::reset`], with the domain given by name.
    pub fn reset_named(domain: &str, seed: u64) -> Result<Self, WorldError> {
        let domain: TaskFamily = domain
            .parse()
            .map_err(|_| WorldError::UnknownDomain(domain.to_string()))?;
        Ok(Self::reset(domain, seed))
    }

    pub fn from_config(config: Arc<WorldConfig>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = config.placement_jitter_m;
        let mut objects = BTreeMap::new();
        let mut stocks = BTreeMap::new();
        let mut cup_contents = BTreeMap::new();
        let mut dishwasher = None;

        match config.domain {
            TaskFamily::Drink => {
                let layout = config.drink.as_ref().expect("validated drink layout");
                let station = config.zone(CUP_STATION).expect("validated zone");
                for i in 0..layout.cups {
                    let id = format!("cup-{}", i + 1);
                    let pose = Point::new(
                        station.x + i as f64 * layout.cup_spacing_m + jitter(&mut rng, amp),
                        station.y + jitter(&mut rng, amp),
                    );
                    objects.insert(
                        id.clone(),
                        Item {
                            id: id.clone(),
                            label: drink::EMPTY_CUP.to_string(),
                            pose,
                            location: Location::Zone(CUP_STATION.to_string()),
                            kind: ItemKind::Cup,
                        },
                    );
                    cup_contents.insert(id, Vec::new());
                }
                for slot in &layout.ingredients {
                    let id = format!("container-{}", slot.name.replace(' ', "-"));
                    let pose =
                        Point::new(slot.x + jitter(&mut rng, amp), slot.y + jitter(&mut rng, amp));
                    objects.insert(
                        id.clone(),
                        Item {
                            id,
                            label: slot.name.clone(),
                            pose,
                            location: Location::Zone("shelf".to_string()),
                            kind: ItemKind::Container {
                                ingredient: slot.name.clone(),
                            },
                        },
                    );
                    stocks.insert(slot.name.clone(), slot.stock_ml);
                }
            }
            TaskFamily::Dishwash => {
                let layout = config.dishwash.as_ref().expect("validated dish layout");
                let counter = config.zone(SINK_COUNTER).expect("validated zone");
                let washer = config.zone(DISHWASHER).expect("validated zone");
                let mut slot = 0usize;
                for (kind, count) in &layout.items {
                    for n in 0..*count {
                        let id = format!("{kind}-{}", n + 1);
                        let (row, col) = (slot / 10, slot % 10);
                        let pose = Point::new(
                            counter.x + col as f64 * layout.item_spacing_m + jitter(&mut rng, amp),
                            counter.y - row as f64 * layout.item_spacing_m
                                + jitter(&mut rng, amp),
                        );
                        slot += 1;
                        objects.insert(
                            id.clone(),
                            Item {
                                id,
                                label: format!("dirty {kind}"),
                                pose,
                                location: Location::Zone(SINK_COUNTER.to_string()),
                                kind: ItemKind::Utensil(UtensilState {
                                    kind: kind.clone(),
                                    particles_removed: false,
                                    clean: false,
                                    washed_on: None,
                                    washed_with: None,
                                }),
                            },
                        );
                    }
                }
                objects.insert(
                    DISHWASHER.to_string(),
                    Item {
                        id: DISHWASHER.to_string(),
                        label: DISHWASHER.to_string(),
                        pose: washer,
                        location: Location::Zone(DISHWASHER.to_string()),
                        kind: ItemKind::Appliance,
                    },
                );
                for flavor in &layout.detergents {
                    stocks.insert(
                        format!("{flavor} detergent"),
                        f64::from(layout.detergent_doses),
                    );
                }
                dishwasher = Some(DishwasherState::default());
            }
        }

        WorldState {
            domain: config.domain,
            config,
            objects,
            cup_contents,
            stocks,
            gripper: None,
            dishwasher,
            rng_seed: seed,
            applied: 0,
        }
    }

    /// Deep, independent copy.
    pub fn snapshot(&self) -> WorldState {
        let mut copy = self.clone();
        copy.config = Arc::new((*self.config).clone());
        copy
    }

    /// Every label the detector may report in this world.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut labels: BTreeSet<String> = match self.domain {
            TaskFamily::Drink => drink::CUP_LABELS.iter().map(|s| s.to_string()).collect(),
            TaskFamily::Dishwash => {
                let mut set = BTreeSet::from([DISHWASHER.to_string()]);
                if let Some(layout) = &self.config.dishwash {
                    for kind in layout.items.keys() {
                        set.insert(format!("dirty {kind}"));
                        set.insert(format!("clean {kind}"));
                    }
                }
                set
            }
        };
        labels.extend(self.objects.values().map(|o| o.label.clone()));
        labels.into_iter().collect()
    }

    /// Apply one skill. On error the state is untouched.
    pub fn apply_skill(&mut self, call: &ToolInvocation) -> Result<SkillOutcome, WorldError> {
        let mut next = self.clone();
        let outcome = match call.name.as_str() {
            "step_complete" => SkillOutcome::ok("step complete", Vec::new()),
            "respond_to_user" => {
                let message = arg_str(call, "message")?;
                SkillOutcome::ok(format!("told the user: {message}"), Vec::new())
            }
            _ => match self.domain {
                TaskFamily::Drink => drink::apply(&mut next, call)?,
                TaskFamily::Dishwash => dishwash::apply(&mut next, call)?,
            },
        };
        next.applied += 1;
        *self = next;
        Ok(outcome)
    }

    /// Deterministic slip roll; never consumes randomness when disabled.
    pub(crate) fn grasp_slips(&self) -> bool {
        let p = self.config.grasp_slip_probability;
        if p <= 0.0 {
            return false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.rng_seed ^ self.applied.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        rng.random::<f64>() < p
    }

    pub fn held_item(&self) -> Option<&Item> {
        self.gripper.as_ref().and_then(|id| self.objects.get(id))
    }

    pub fn items_at<'a>(&'a self, zone: &'a str) -> impl Iterator<Item = &'a Item> + 'a {
        self.objects
            .values()
            .filter(move |o| matches!(&o.location, Location::Zone(z) if z == zone))
    }

    pub fn cups(&self) -> impl Iterator<Item = &Item> {
        self.objects
            .values()
            .filter(|o| matches!(o.kind, ItemKind::Cup))
    }

    /// Total volume of each ingredient across all cups.
    pub fn dispensed(&self) -> BTreeMap<String, f64> {
        let mut totals = BTreeMap::new();
        for portion in self.cup_contents.values().flatten() {
            *totals.entry(portion.ingredient.clone()).or_insert(0.0) += portion.ml;
        }
        totals
    }

    pub fn cup_volume(&self, cup: &str) -> f64 {
        self.cup_contents
            .get(cup)
            .map(|c| c.iter().map(|p| p.ml).sum())
            .unwrap_or(0.0)
    }

    /// Structural invariants that must hold after any skill sequence.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<&Item> = self
            .objects
            .values()
            .filter(|o| o.location == Location::Gripper)
            .collect();
        if held.len() > 1 {
            return Err(format!("{} objects in the gripper", held.len()));
        }
        match (&self.gripper, held.first()) {
            (None, None) => {}
            (Some(id), Some(item)) if *id == item.id => {}
            (g, h) => {
                return Err(format!(
                    "gripper {g:?} disagrees with held object {:?}",
                    h.map(|i| &i.id)
                ))
            }
        }
        for (id, item) in &self.objects {
            if *id != item.id {
                return Err(format!("object key {id} holds item {}", item.id));
            }
        }
        let capacity = self.config.volumes.cup_capacity_ml;
        for cup in self.cup_contents.keys() {
            if self.cup_volume(cup) > capacity + 1e-9 {
                return Err(format!("cup {cup} over capacity"));
            }
        }
        for (name, stock) in &self.stocks {
            if *stock < -1e-9 {
                return Err(format!("stock of {name} is negative"));
            }
        }
        if let Some(washer) = &self.dishwasher {
            for (rack, ids) in &washer.racks {
                for id in ids {
                    match self.objects.get(id) {
                        Some(item) if item.location == Location::Rack(*rack) => {}
                        _ => return Err(format!("rack {rack} lists {id} which is elsewhere")),
                    }
                }
            }
            let on_racks = self
                .objects
                .values()
                .filter(|o| matches!(o.location, Location::Rack(_)))
                .count();
            let listed: usize = washer.racks.values().map(Vec::len).sum();
            if on_racks != listed {
                return Err("rack lists and item locations disagree".into());
            }
        }
        Ok(())
    }
}
