use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::guidelines::TaskFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volumes {
    pub cup_capacity_ml: f64,
    pub scoop_unit_ml: f64,
    pub thin_pour_ml: f64,
    pub thick_pour_ml: f64,
}

impl Default for Volumes {
    fn default() -> Self {
        Volumes {
            cup_capacity_ml: 400.0,
            scoop_unit_ml: 50.0,
            thin_pour_ml: 150.0,
            thick_pour_ml: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Viscosity {
    /// Poured with a large tilt; cannot be scooped.
    Thin,
    /// Poured with a small tilt, or scooped.
    Thick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientSlot {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub stock_ml: f64,
    pub viscosity: Viscosity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrinkLayout {
    pub cups: usize,
    pub cup_spacing_m: f64,
    #[serde(rename = "ingredient")]
    pub ingredients: Vec<IngredientSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DishLayout {
    pub item_spacing_m: f64,
    pub detergents: Vec<String>,
    pub detergent_doses: u32,
    /// Dirty utensil counts by kind.
    pub items: BTreeMap<String, usize>,
}

/// Structured world description: zones, layouts, volume constants, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub domain: TaskFamily,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub placement_jitter_m: f64,
    pub capture_radius_m: f64,
    #[serde(default)]
    pub grasp_slip_probability: f64,
    #[serde(default)]
    pub volumes: Volumes,
    pub zones: BTreeMap<String, Point>,
    #[serde(default)]
    pub drink: Option<DrinkLayout>,
    #[serde(default)]
    pub dishwash: Option<DishLayout>,
}

pub const WORKING_AREA: &str = "working_area";
pub const FINISHED_LOCATION: &str = "finished_location";
pub const DISCARD: &str = "discard";
pub const CUP_STATION: &str = "cup_station";
pub const SINK_COUNTER: &str = "sink_counter";
pub const DISHWASHER: &str = "dishwasher";

impl WorldConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, WorldError> {
        let config: WorldConfig =
            toml::from_str(text).map_err(|e| WorldError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn builtin(domain: TaskFamily) -> Self {
        let text = match domain {
            TaskFamily::Drink => include_str!("../../fixtures/drink/world.toml"),
            TaskFamily::Dishwash => include_str!("../../fixtures/dishwash/world.toml"),
        };
        Self::from_toml_str(text).expect("builtin world config is valid")
    }

    /// Same layout with different dirty-utensil counts.
    pub fn with_dish_counts<I, S>(mut self, counts: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        if let Some(layout) = self.dishwash.as_mut() {
            layout.items = counts
                .into_iter()
                .map(|(k, n)| (k.into(), n))
                .filter(|(_, n)| *n > 0)
                .collect();
        }
        self
    }

    pub fn zone(&self, name: &str) -> Option<Point> {
        self.zones.get(name).copied()
    }

    fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: &str| Err(WorldError::Config(msg.to_string()));
        if self.capture_radius_m <= 0.0 {
            return bad("capture_radius_m must be positive");
        }
        if !(0.0..=1.0).contains(&self.grasp_slip_probability) {
            return bad("grasp_slip_probability must be within [0, 1]");
        }
        let v = &self.volumes;
        if [v.cup_capacity_ml, v.scoop_unit_ml, v.thin_pour_ml, v.thick_pour_ml]
            .iter()
            .any(|x| *x <= 0.0)
        {
            return bad("volume constants must be positive");
        }
        let required: &[&str] = match self.domain {
            TaskFamily::Drink => &[CUP_STATION, WORKING_AREA, FINISHED_LOCATION, DISCARD],
            TaskFamily::Dishwash => &[SINK_COUNTER, DISHWASHER, FINISHED_LOCATION],
        };
        for zone in required {
            if !self.zones.contains_key(*zone) {
                return Err(WorldError::Config(format!("missing zone '{zone}'")));
            }
        }
        match self.domain {
            TaskFamily::Drink => match &self.drink {
                Some(d) if d.ingredients.iter().any(|i| i.stock_ml < 0.0) => {
                    bad("ingredient stocks must not be negative")
                }
                Some(_) => Ok(()),
                None => bad("drink world needs a [drink] section"),
            },
            TaskFamily::Dishwash => match &self.dishwash {
                Some(_) => Ok(()),
                None => bad("dishwash world needs a [dishwash] section"),
            },
        }
    }
}
