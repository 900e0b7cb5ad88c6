use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::normalize_name;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("invalid lexicon: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

/// The template family a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFamily {
    Drink,
    Dishwash,
}

impl TaskFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::Drink => "drink",
            TaskFamily::Dishwash => "dishwash",
        }
    }
}

impl std::fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drink" | "drinks" => Ok(TaskFamily::Drink),
            "dishwash" | "dishwashing" => Ok(TaskFamily::Dishwash),
            other => Err(format!("unknown domain '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemKind {
    pub plural: String,
    /// Matched against location descriptions when choosing where an item goes.
    pub class: String,
}

/// Request vocabulary shipped next to a guideline document.
///
/// `synonyms` maps colloquial mentions onto inventory names. `ingredients`
/// lists ingredient-like words that are recognised in requests even when
/// they are not stocked, so missing material can be named in a refusal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub family: TaskFamily,
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub default_material: Option<String>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
    #[serde(default)]
    pub ingredients: BTreeMap<String, String>,
    #[serde(default)]
    pub items: BTreeMap<String, ItemKind>,
}

impl Lexicon {
    pub fn from_toml_str(text: &str) -> Result<Self, LexiconError> {
        let mut lexicon: Lexicon = toml::from_str(text)?;
        lexicon.synonyms = lexicon
            .synonyms
            .into_iter()
            .map(|(k, v)| (normalize_name(&k), normalize_name(&v)))
            .collect();
        lexicon.ingredients = lexicon
            .ingredients
            .into_iter()
            .map(|(k, v)| (normalize_name(&k), normalize_name(&v)))
            .collect();
        if lexicon.family == TaskFamily::Drink && lexicon.base.is_none() {
            return Err(LexiconError::Invalid("drink lexicon needs a base".into()));
        }
        if lexicon.family == TaskFamily::Dishwash && lexicon.items.is_empty() {
            return Err(LexiconError::Invalid("dishwash lexicon needs item kinds".into()));
        }
        Ok(lexicon)
    }

    /// Item kind for a singular or plural mention.
    pub fn item_kind(&self, word: &str) -> Option<&str> {
        let word = normalize_name(word);
        self.items.iter().find_map(|(name, kind)| {
            (word == *name || word == normalize_name(&kind.plural)).then_some(name.as_str())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load() {
        let drink = Lexicon::from_toml_str(include_str!("../../fixtures/drink/lexicon.toml")).unwrap();
        assert_eq!(drink.family, TaskFamily::Drink);
        assert_eq!(drink.synonyms["matcha"], "matcha powder");
        assert_eq!(drink.ingredients["passion fruit"], "passion fruit jam");

        let dish =
            Lexicon::from_toml_str(include_str!("../../fixtures/dishwash/lexicon.toml")).unwrap();
        assert_eq!(dish.item_kind("knives"), Some("knife"));
        assert_eq!(dish.item_kind("Plate"), Some("plate"));
        assert_eq!(dish.item_kind("teapot"), None);
    }

    #[test]
    fn drink_lexicon_requires_base() {
        assert!(Lexicon::from_toml_str("family = \"drink\"").is_err());
    }

    #[test]
    fn family_from_str() {
        assert_eq!("Drink".parse::<TaskFamily>(), Ok(TaskFamily::Drink));
        assert!("laundry".parse::<TaskFamily>().is_err());
    }
}
