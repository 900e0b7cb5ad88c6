//! Task guidelines: the plain-text document that defines what the robot may do.
//!
//! A guideline document lists the known options, the instructions for each
//! option (materials and numbered steps) and the material and locations that
//! are available right now. Swapping this document is all it takes to move
//! the planner to a different task.

mod lexicon;

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{ItemKind, Lexicon, LexiconError, TaskFamily};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuidelinesError {
    #[error("malformed guidelines at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> GuidelinesError {
    GuidelinesError::Malformed {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub materials: Vec<String>,
    /// Steps in printed order; index `i` is the step printed as `i)`.
    pub steps: Vec<String>,
}

/// A section the parser does not interpret. Kept so rendering stays lossless.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraSection {
    pub header: String,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskGuidelines {
    pub options: Vec<String>,
    pub recipes: IndexMap<String, Recipe>,
    pub inventory: Vec<String>,
    pub locations: Option<IndexMap<String, String>>,
    pub extra_sections: Vec<ExtraSection>,
    /// The document exactly as it was handed to the parser.
    pub raw_text: String,
}

/// Structural equality; `raw_text` is ignored.
impl PartialEq for TaskGuidelines {
    fn eq(&self, other: &Self) -> bool {
        self.options == other.options
            && self.recipes == other.recipes
            && self.inventory == other.inventory
            && self.locations == other.locations
            && self.extra_sections == other.extra_sections
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub missing: Vec<String>,
    pub message: String,
}

/// Lower-cases and collapses whitespace, so `" Boba "` and `"boba"` compare equal.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// `"passion fruit jam is not available"` with the first letter capitalized.
pub fn unavailable_message(name: &str) -> String {
    let name = name.trim();
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => format!("{}{} is not available", first.to_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

const OPTIONS: &str = "options:";
const INSTRUCTIONS: &str = "instructions:";
const MATERIAL_NOW: &str = "available material we have now:";
const LOCATION_NOW: &str = "available location we have now:";
const MATERIAL: &str = "material:";
const STEPS: &str = "steps:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Options,
    Instructions,
    Locations,
    Materials,
    Extra,
}

fn step_line(line: &str) -> Option<(usize, &str)> {
    let (num, rest) = line.split_once(')')?;
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((num.parse().ok()?, rest.trim()))
}

fn is_unknown_header(line: &str) -> bool {
    let Some(head) = line.strip_suffix(':') else {
        return false;
    };
    let mut chars = head.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && head.chars().all(|c| c.is_ascii_alphabetic() || c == ' ')
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| !s.is_empty())
        .collect()
}

fn starts_with_ci(line: &str, prefix: &str) -> bool {
    line.len() >= prefix.len() && line[..prefix.len()].eq_ignore_ascii_case(prefix)
}

pub fn parse_guidelines(text: &str) -> Result<TaskGuidelines, GuidelinesError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut section = Section::Preamble;
    let mut saw_options = false;
    let mut saw_materials = false;
    let mut option_text = String::new();
    let mut material_text = String::new();
    let mut locations: Option<IndexMap<String, String>> = None;
    let mut recipes: IndexMap<String, Recipe> = IndexMap::new();
    let mut current: Option<(usize, Recipe)> = None;
    let mut extras: Vec<ExtraSection> = Vec::new();
    let mut options: Vec<String> = Vec::new();

    let finish_recipe = |current: &mut Option<(usize, Recipe)>,
                         recipes: &mut IndexMap<String, Recipe>|
     -> Result<(), GuidelinesError> {
        if let Some((line, recipe)) = current.take() {
            if recipe.steps.is_empty() {
                return Err(malformed(line, format!("recipe '{}' has no steps", recipe.name)));
            }
            if recipes.contains_key(&recipe.name) {
                return Err(malformed(line, format!("duplicate recipe '{}'", recipe.name)));
            }
            recipes.insert(recipe.name.clone(), recipe);
        }
        Ok(())
    };

    for (idx, raw) in lines.iter().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();

        // Section headers.
        let header = match lower.as_str() {
            OPTIONS => Some(Section::Options),
            INSTRUCTIONS => Some(Section::Instructions),
            MATERIAL_NOW => Some(Section::Materials),
            LOCATION_NOW => Some(Section::Locations),
            _ => None,
        };
        if let Some(next) = header {
            if section == Section::Options {
                options = split_list(&option_text);
            }
            finish_recipe(&mut current, &mut recipes)?;
            match next {
                Section::Options => saw_options = true,
                Section::Materials => saw_materials = true,
                Section::Locations => {
                    locations.get_or_insert_with(IndexMap::new);
                }
                _ => {}
            }
            section = next;
            continue;
        }
        if is_unknown_header(line) && !starts_with_ci(line, MATERIAL) && !starts_with_ci(line, STEPS)
        {
            if section == Section::Options {
                options = split_list(&option_text);
            }
            finish_recipe(&mut current, &mut recipes)?;
            extras.push(ExtraSection {
                header: line.trim_end_matches(':').to_string(),
                lines: Vec::new(),
            });
            section = Section::Extra;
            continue;
        }

        match section {
            Section::Preamble => {
                return Err(malformed(lineno, "text before the Options header"));
            }
            Section::Options => {
                option_text.push(' ');
                option_text.push_str(line);
            }
            Section::Materials => {
                material_text.push(',');
                material_text.push_str(line);
            }
            Section::Locations => {
                let entry = line.trim_start_matches(['*', '-']).trim();
                let entry = entry.split_whitespace().collect::<Vec<_>>().join(" ");
                let (name, desc) = match entry.split_once(" for ") {
                    Some((n, d)) => (n.to_string(), d.to_string()),
                    None => (entry.clone(), String::new()),
                };
                if let Some(map) = locations.as_mut() {
                    map.insert(name, desc);
                }
            }
            Section::Extra => {
                if let Some(extra) = extras.last_mut() {
                    extra.lines.push(line.to_string());
                }
            }
            Section::Instructions => {
                if starts_with_ci(line, MATERIAL) {
                    let Some((_, recipe)) = current.as_mut() else {
                        return Err(malformed(lineno, "Material line outside a recipe"));
                    };
                    recipe.materials = split_list(&line[MATERIAL.len()..]);
                    continue;
                }
                if starts_with_ci(line, STEPS) {
                    if current.is_none() {
                        return Err(malformed(lineno, "Steps line outside a recipe"));
                    }
                    continue;
                }
                if let Some((number, step)) = step_line(line) {
                    let Some((_, recipe)) = current.as_mut() else {
                        return Err(malformed(lineno, "step outside a recipe"));
                    };
                    if number != recipe.steps.len() {
                        return Err(malformed(
                            lineno,
                            format!("expected step {} but found step {number}", recipe.steps.len()),
                        ));
                    }
                    recipe.steps.push(step.to_string());
                    continue;
                }
                let names_option = options
                    .iter()
                    .any(|o| normalize_name(o) == normalize_name(line));
                let next_is_material = lines[idx + 1..]
                    .iter()
                    .map(|l| l.trim())
                    .find(|l| !l.is_empty())
                    .is_some_and(|l| starts_with_ci(l, MATERIAL));
                if names_option || next_is_material || current.is_none() {
                    finish_recipe(&mut current, &mut recipes)?;
                    current = Some((
                        lineno,
                        Recipe {
                            name: line.split_whitespace().collect::<Vec<_>>().join(" "),
                            materials: Vec::new(),
                            steps: Vec::new(),
                        },
                    ));
                    continue;
                }
                // Continuation of a wrapped step.
                let Some((_, recipe)) = current.as_mut() else {
                    return Err(malformed(lineno, "unexpected line"));
                };
                match recipe.steps.last_mut() {
                    Some(last) => {
                        last.push(' ');
                        last.push_str(line);
                    }
                    None => return Err(malformed(lineno, "text before the first step")),
                }
            }
        }
    }
    if section == Section::Options {
        options = split_list(&option_text);
    }
    finish_recipe(&mut current, &mut recipes)?;

    let last_line = lines.len().max(1);
    if !saw_options {
        return Err(malformed(last_line, "missing Options header"));
    }
    if !saw_materials {
        return Err(malformed(last_line, "missing 'Available material we have now' section"));
    }
    if options.is_empty() {
        return Err(malformed(last_line, "no options listed"));
    }
    for option in &options {
        if !recipes.keys().any(|k| normalize_name(k) == normalize_name(option)) {
            return Err(malformed(last_line, format!("option '{option}' has no instructions")));
        }
    }

    Ok(TaskGuidelines {
        options,
        recipes,
        inventory: split_list(&material_text),
        locations,
        extra_sections: extras,
        raw_text: text.to_string(),
    })
}

impl TaskGuidelines {
    /// Canonical text form; parses back to an identical structure.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("Options:\n");
        let _ = writeln!(out, "{}", self.options.join(", "));
        out.push_str("Instructions:\n");
        for recipe in self.recipes.values() {
            let _ = writeln!(out, "{}", recipe.name);
            let _ = writeln!(out, "Material: {}", recipe.materials.join(", "));
            out.push_str("Steps:\n");
            for (i, step) in recipe.steps.iter().enumerate() {
                let _ = writeln!(out, "{i}) {step}");
            }
        }
        for extra in &self.extra_sections {
            let _ = writeln!(out, "{}:", extra.header);
            for line in &extra.lines {
                let _ = writeln!(out, "{line}");
            }
        }
        if let Some(locations) = &self.locations {
            out.push_str("Available location we have now:\n");
            for (name, desc) in locations {
                if desc.is_empty() {
                    let _ = writeln!(out, " * {name}");
                } else {
                    let _ = writeln!(out, " * {name} for {desc}");
                }
            }
        }
        out.push_str("Available material we have now:\n");
        let _ = writeln!(out, "{}", self.inventory.join(", "));
        out
    }

    pub fn has_material(&self, name: &str) -> bool {
        let wanted = normalize_name(name);
        self.inventory.iter().any(|m| normalize_name(m) == wanted)
    }

    pub fn recipe(&self, name: &str) -> Option<&Recipe> {
        let wanted = normalize_name(name);
        self.recipes
            .values()
            .find(|r| normalize_name(&r.name) == wanted)
    }

    pub fn check_feasibility<S: AsRef<str>>(&self, required: &[S]) -> FeasibilityResult {
        let mut missing: Vec<String> = Vec::new();
        for name in required {
            let name = name.as_ref().trim();
            if name.is_empty() || self.has_material(name) {
                continue;
            }
            let norm = normalize_name(name);
            if !missing.iter().any(|m| normalize_name(m) == norm) {
                missing.push(norm);
            }
        }
        let message = missing
            .iter()
            .map(|m| unavailable_message(m))
            .collect::<Vec<_>>()
            .join(". ");
        FeasibilityResult {
            feasible: missing.is_empty(),
            missing,
            message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRINK: &str = include_str!("../../fixtures/drink/guidelines.txt");
    const DISHWASH: &str = include_str!("../../fixtures/dishwash/guidelines.txt");

    #[test]
    fn drink_fixture_parses() {
        let g = parse_guidelines(DRINK).unwrap();
        assert_eq!(g.options, vec!["Pure milk", "Strawberry milk", "Boba milk"]);
        for m in [
            "boba",
            "strawberry jam",
            "mango jam",
            "matcha powder",
            "taro",
            "milk",
            "blueberry",
        ] {
            assert!(g.has_material(m), "{m}");
        }
        assert_eq!(g.inventory.len(), 7);
        let boba = g.recipe("Boba milk").unwrap();
        assert_eq!(boba.materials, vec!["boba", "milk"]);
        assert_eq!(boba.steps[1], "add boba to the working cup");
        assert!(g.locations.is_none());
        assert_eq!(g.raw_text, DRINK);
    }

    #[test]
    fn dishwash_fixture_parses_wrapped_steps() {
        let g = parse_guidelines(DISHWASH).unwrap();
        let rose = &g.recipes["Wash one plate with rose flavor"];
        assert_eq!(rose.steps.len(), 11);
        assert_eq!(
            rose.steps[8],
            "after the dishwasher cycle is complete and the dishwasher has stopped, \
             wait a few minutes for the dishes to cool down"
        );
        assert_eq!(rose.steps[10], "return the clean plate to the finished location");
        assert_eq!(rose.steps[3], "pull out the rack");
        // Recipes without a "Steps:" line still parse.
        assert_eq!(g.recipes["Wash one plate and one fork"].steps.len(), 14);
        let locations = g.locations.as_ref().unwrap();
        assert_eq!(locations["first rack"], "forks and small kitchen utensils");
        assert_eq!(locations["second rack"], "bowl/cup");
        assert_eq!(g.inventory, vec!["rose detergent", "original detergent"]);
    }

    #[test]
    fn render_round_trips() {
        for text in [DRINK, DISHWASH] {
            let g = parse_guidelines(text).unwrap();
            let again = parse_guidelines(&g.render()).unwrap();
            assert_eq!(g, again);
            assert_eq!(again.render(), g.render());
        }
    }

    #[test]
    fn empty_and_headerless_documents_fail() {
        assert!(matches!(parse_guidelines(""), Err(GuidelinesError::Malformed { .. })));
        let no_material = "Options:\nA\nInstructions:\nA\nSteps:\n0) do it\n";
        assert!(parse_guidelines(no_material).is_err());
    }

    #[test]
    fn recipe_without_steps_fails() {
        let text = "Options:\nA, B\nInstructions:\nA\nMaterial: milk\nSteps:\n0) x\nB\nMaterial: milk\nAvailable material we have now:\nmilk\n";
        let err = parse_guidelines(text).unwrap_err();
        let GuidelinesError::Malformed { line, reason } = err;
        assert_eq!(line, 8);
        assert!(reason.contains("no steps"), "{reason}");
    }

    #[test]
    fn out_of_order_step_fails() {
        let text = "Options:\nA\nInstructions:\nA\nMaterial: milk\n0) x\n2) y\nAvailable material we have now:\nmilk\n";
        assert!(parse_guidelines(text).is_err());
    }

    #[test]
    fn unknown_sections_are_kept() {
        let text = format!("{DRINK}Notes:\nmatcha powder is water-soluble\n");
        let g = parse_guidelines(&text).unwrap();
        assert_eq!(g.extra_sections.len(), 1);
        assert_eq!(g.extra_sections[0].header, "Notes");
        assert!(g.raw_text.contains("water-soluble"));
        assert_eq!(parse_guidelines(&g.render()).unwrap(), g);
    }

    #[test]
    fn feasibility_examples() {
        let g = parse_guidelines(DRINK).unwrap();
        let r = g.check_feasibility(&["passion fruit jam"]);
        assert!(!r.feasible);
        assert_eq!(r.missing, vec!["passion fruit jam"]);
        assert_eq!(r.message, "Passion fruit jam is not available");

        let r = g.check_feasibility::<&str>(&[]);
        assert!(r.feasible && r.missing.is_empty() && r.message.is_empty());

        let r = g.check_feasibility(&["taro", "milk"]);
        assert!(r.feasible);
        assert!(r.missing.is_empty());
    }

    #[test]
    fn matching_ignores_case_and_whitespace() {
        let g = parse_guidelines(DRINK).unwrap();
        assert!(g.check_feasibility(&["Boba ", "  MATCHA   powder"]).feasible);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn adding_inventory_keeps_feasible(extra in proptest::collection::vec("[a-z]{3,8}", 0..4),
                                               required in proptest::collection::vec("[a-z]{3,8}", 0..4)) {
                let mut g = parse_guidelines(DRINK).unwrap();
                let before = g.check_feasibility(&required);
                g.inventory.extend(extra);
                let after = g.check_feasibility(&required);
                if before.feasible {
                    prop_assert!(after.feasible);
                }
                prop_assert!(after.missing.len() <= before.missing.len());
                prop_assert_eq!(after.feasible, after.missing.is_empty());
                prop_assert_eq!(after.feasible, after.message.is_empty());
            }
        }
    }
}
