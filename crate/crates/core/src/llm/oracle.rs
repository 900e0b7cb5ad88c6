//! Deterministic rule-based provider.
//!
//! Everything is derived from the message history: the planner side parses
//! the guideline document and every request seen so far, the executor side
//! reads the scene and the current step and replays a fixed action table.
//! Identical histories give identical replies.

use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    validate_history, Message, Provider, ProviderError, ProviderResponse, Role, EXECUTOR_MARKER,
    PLANNER_MARKER,
};
use crate::executor::{CURRENT_STEP_PREFIX, SCENE_HEADER};
use crate::guidelines::{normalize_name, parse_guidelines, Lexicon, TaskFamily, TaskGuidelines};
use crate::planner::{
    canonicalize, Canonical, COMPLETED_HEADER, GUIDELINES_HEADER, NEW_REQUEST_PREFIX,
    REQUEST_PREFIX,
};
use crate::skills::{FunctionSchema, ToolInvocation};

const BOBA: &str = "boba";
const GET_CUP: &str = "get an empty cup and bring it to the working area";
const PUT_CUP: &str = "put the working cup in the finished location";
const DISCARD_CUP: &str = "discard the current cup";

/// What the oracle understood from one drink request.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleRequestParse {
    pub base: String,
    /// Inventory names in order of first mention, boba excluded.
    pub flavors: Vec<String>,
    pub wants_boba: bool,
    /// Ingredient-like mentions that are not in the inventory.
    pub unknown_mentions: Vec<String>,
    /// Materials the request asks to leave out ("without X", "no X").
    pub excluded: Vec<String>,
    /// The request modifies the previous order instead of replacing it.
    pub amend: bool,
}

impl OracleRequestParse {
    fn names_anything(&self) -> bool {
        !self.flavors.is_empty() || self.wants_boba || !self.unknown_mentions.is_empty()
    }
}

/// What the oracle understood from one dishwashing request.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DishRequestParse {
    /// Item kind and count, in order of first mention.
    pub items: Vec<(String, usize)>,
    pub detergent: Option<String>,
    pub unknown_mentions: Vec<String>,
    pub amend: bool,
    /// "another": one more of the last kind.
    pub another: bool,
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(String::from)
        .collect()
}

struct Mention {
    material: String,
    start: usize,
    end: usize,
}

/// Greedy longest-match of known phrases, mapped to material names.
fn mentions(toks: &[String], g: &TaskGuidelines, lexicon: &Lexicon) -> Vec<Mention> {
    let mut phrases: Vec<(Vec<String>, String)> = Vec::new();
    for name in &g.inventory {
        phrases.push((tokens(name), normalize_name(name)));
    }
    for (k, v) in lexicon.synonyms.iter().chain(&lexicon.ingredients) {
        phrases.push((tokens(k), v.clone()));
    }
    if let Some(base) = &lexicon.base {
        phrases.push((tokens(base), normalize_name(base)));
    }
    phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));

    let mut found = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let hit = phrases
            .iter()
            .find(|(p, _)| !p.is_empty() && toks[i..].starts_with(p));
        match hit {
            Some((p, material)) => {
                found.push(Mention {
                    material: material.clone(),
                    start: i,
                    end: i + p.len(),
                });
                i += p.len();
            }
            None => i += 1,
        }
    }
    found
}

fn is_negated(toks: &[String], start: usize) -> bool {
    let mut j = start;
    let mut skipped = 0;
    while j > 0 && skipped < 3 {
        j -= 1;
        match toks[j].as_str() {
            "without" | "no" | "not" | "replace" => return true,
            "of" if j > 0 && toks[j - 1] == "instead" => return true,
            "the" | "any" | "more" | "some" => skipped += 1,
            _ => return false,
        }
    }
    false
}

fn push_unique(list: &mut Vec<String>, item: &str) {
    if !list.iter().any(|x| x == item) {
        list.push(item.to_string());
    }
}

const AMEND_WORDS: &[&str] = &["add", "replace", "also", "extra", "it", "too"];

pub fn oracle_parse_request(request: &str, g: &TaskGuidelines, lexicon: &Lexicon) -> OracleRequestParse {
    let toks = tokens(request);
    let base = lexicon.base.clone().unwrap_or_else(|| "milk".into());
    let mut parse = OracleRequestParse {
        base: base.clone(),
        amend: toks.iter().any(|t| AMEND_WORDS.contains(&t.as_str())),
        ..Default::default()
    };
    for m in mentions(&toks, g, lexicon) {
        if is_negated(&toks, m.start) {
            push_unique(&mut parse.excluded, &m.material);
            continue;
        }
        if m.material == base {
            continue;
        }
        if m.material == BOBA && g.has_material(BOBA) {
            parse.wants_boba = true;
        } else if g.has_material(&m.material) {
            push_unique(&mut parse.flavors, &m.material);
        } else {
            push_unique(&mut parse.unknown_mentions, &m.material);
        }
        let _ = m.end;
    }
    parse
}

fn number_word(t: &str) -> Option<usize> {
    let n = match t {
        "a" | "an" | "one" | "single" => 1,
        "two" | "both" | "pair" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        _ => return t.parse().ok().filter(|n| *n > 0),
    };
    Some(n)
}

pub fn oracle_parse_dish_request(request: &str, g: &TaskGuidelines, lexicon: &Lexicon) -> DishRequestParse {
    let toks = tokens(request);
    let mut parse = DishRequestParse {
        another: toks.iter().any(|t| t == "another"),
        amend: toks
            .iter()
            .any(|t| matches!(t.as_str(), "another" | "add" | "also" | "more")),
        ..Default::default()
    };
    let there_are = toks.windows(3).find_map(|w| {
        (w[0] == "there" && matches!(w[1].as_str(), "are" | "is"))
            .then(|| number_word(&w[2]))
            .flatten()
    });
    let mut explicit: Vec<(String, Option<usize>)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let Some(kind) = lexicon.item_kind(t) else {
            continue;
        };
        let mut count = None;
        let mut j = i;
        let mut looked = 0;
        while j > 0 && looked < 3 {
            j -= 1;
            looked += 1;
            let w = toks[j].as_str();
            if matches!(w, "dirty" | "clean" | "more" | "extra" | "of") {
                continue;
            }
            count = number_word(w);
            break;
        }
        match explicit.iter_mut().find(|(k, _)| k == kind) {
            Some((_, c)) => *c = Some(c.unwrap_or(1) + count.unwrap_or(1)),
            None => explicit.push((kind.to_string(), count)),
        }
    }
    parse.items = explicit
        .into_iter()
        .map(|(k, c)| (k, c.or(there_are).unwrap_or(1)))
        .collect();
    for m in mentions(&toks, g, lexicon) {
        if g.has_material(&m.material) {
            parse.detergent.get_or_insert(m.material);
        } else {
            push_unique(&mut parse.unknown_mentions, &m.material);
        }
    }
    parse
}

// ---------------------------------------------------------------------------
// Planner side

#[derive(Debug, Clone, PartialEq)]
struct DrinkOrder {
    flavors: Vec<String>,
    boba: bool,
    unknown: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct DishOrder {
    items: Vec<(String, usize)>,
    detergent: String,
    unknown: Vec<String>,
}

/// Planner conversation as the oracle sees it.
struct PlannerView {
    guidelines: TaskGuidelines,
    requests: Vec<String>,
    completed: Vec<String>,
}

fn planner_view(history: &[Message]) -> Result<PlannerView, String> {
    let users: Vec<&str> = history
        .iter()
        .filter(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .collect();
    let first = users.first().ok_or("no user message")?;
    let body = first
        .strip_prefix(GUIDELINES_HEADER)
        .ok_or("first user message carries no guidelines")?;
    let marker = format!("\n\n{REQUEST_PREFIX}");
    let split = body.rfind(&marker).ok_or("first user message carries no request")?;
    let guidelines = parse_guidelines(body[..split].trim_start_matches('\n'))
        .map_err(|e| format!("guidelines: {e}"))?;
    let mut requests = vec![body[split + marker.len()..].trim().to_string()];
    let mut completed = Vec::new();
    for (i, text) in users.iter().enumerate().skip(1) {
        let marker = format!("\n\n{NEW_REQUEST_PREFIX}");
        let Some(split) = text.rfind(&marker) else {
            continue;
        };
        requests.push(text[split + marker.len()..].trim().to_string());
        if i == users.len() - 1 {
            if let Some(list) = text[..split].strip_prefix(COMPLETED_HEADER) {
                completed = list
                    .lines()
                    .filter_map(|l| l.trim().split_once(") ").map(|(_, s)| s.trim().to_string()))
                    .collect();
            }
        }
    }
    Ok(PlannerView {
        guidelines,
        requests,
        completed,
    })
}

fn numbered(steps: &[String], offset: usize) -> String {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}) {s}", offset + i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn canon_all(steps: &[String]) -> Vec<Canonical> {
    steps.iter().map(|s| canonicalize(s)).collect()
}

fn ordinal(n: usize) -> &'static str {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
        "tenth",
    ];
    WORDS.get(n).copied().unwrap_or("next")
}

fn rack_number(name: &str) -> Option<u8> {
    tokens(name).iter().find_map(|t| match t.as_str() {
        "first" | "1" => Some(1),
        "second" | "2" => Some(2),
        "third" | "3" => Some(3),
        _ => None,
    })
}

impl OracleProvider {
    fn drink_order(&self, view: &PlannerView) -> DrinkOrder {
        let mut order: Option<DrinkOrder> = None;
        for request in &view.requests {
            let p = oracle_parse_request(request, &view.guidelines, &self.lexicon);
            order = Some(match order {
                Some(mut prev) if p.amend || !p.names_anything() => {
                    prev.flavors.retain(|f| !p.excluded.contains(f));
                    if p.excluded.iter().any(|e| e == BOBA) {
                        prev.boba = false;
                    }
                    for f in &p.flavors {
                        push_unique(&mut prev.flavors, f);
                    }
                    prev.boba |= p.wants_boba;
                    prev.unknown = p.unknown_mentions;
                    prev
                }
                _ => DrinkOrder {
                    flavors: p.flavors,
                    boba: p.wants_boba,
                    unknown: p.unknown_mentions,
                },
            });
        }
        order.unwrap_or(DrinkOrder {
            flavors: Vec::new(),
            boba: false,
            unknown: Vec::new(),
        })
    }

    fn drink_template(&self, order: &DrinkOrder) -> Vec<String> {
        let base = self.lexicon.base.clone().unwrap_or_else(|| "milk".into());
        let mut steps = vec![GET_CUP.to_string()];
        if order.boba {
            steps.push(format!("add {BOBA} to the working cup"));
        }
        for f in &order.flavors {
            steps.push(format!("add {f} to the working cup"));
        }
        steps.push(format!("pour the {base} into the working cup"));
        steps.push(PUT_CUP.to_string());
        steps
    }

    fn drink_reply(&self, view: &PlannerView) -> String {
        let order = self.drink_order(view);
        let base = self.lexicon.base.clone().unwrap_or_else(|| "milk".into());
        let mut required: Vec<String> = order.flavors.clone();
        if order.boba {
            required.insert(0, BOBA.to_string());
        }
        required.push(base);
        required.extend(order.unknown.iter().cloned());
        let feasibility = view.guidelines.check_feasibility(&required);
        if !feasibility.feasible {
            return feasibility.message;
        }
        let template = self.drink_template(&order);
        let remaining = drink_remaining(&template, &view.completed);
        numbered(&remaining, view.completed.len())
    }

    fn dish_order(&self, view: &PlannerView) -> DishOrder {
        let default = self
            .lexicon
            .default_material
            .clone()
            .unwrap_or_else(|| "original detergent".into());
        let mut order: Option<DishOrder> = None;
        for request in &view.requests {
            let p = oracle_parse_dish_request(request, &view.guidelines, &self.lexicon);
            order = Some(match order {
                Some(mut prev) if p.amend || p.items.is_empty() => {
                    if p.items.is_empty() && p.another {
                        if let Some(last) = prev.items.last_mut() {
                            last.1 += 1;
                        }
                    }
                    for (kind, n) in &p.items {
                        match prev.items.iter_mut().find(|(k, _)| k == kind) {
                            Some(entry) => entry.1 += n,
                            None => prev.items.push((kind.clone(), *n)),
                        }
                    }
                    if let Some(d) = p.detergent {
                        prev.detergent = d;
                    }
                    prev.unknown = p.unknown_mentions;
                    prev
                }
                prev => DishOrder {
                    items: p.items,
                    detergent: p
                        .detergent
                        .or(prev.map(|o| o.detergent))
                        .unwrap_or_else(|| default.clone()),
                    unknown: p.unknown_mentions,
                },
            });
        }
        order.unwrap_or(DishOrder {
            items: Vec::new(),
            detergent: default,
            unknown: Vec::new(),
        })
    }

    /// Location name (e.g. "third rack") whose description covers the kind.
    fn rack_for(&self, g: &TaskGuidelines, kind: &str) -> String {
        let empty = indexmap::IndexMap::new();
        let locations = g.locations.as_ref().unwrap_or(&empty);
        let info = self.lexicon.items.get(kind);
        let words = |s: &str| tokens(s);
        let by_word = locations.iter().find(|(_, desc)| {
            let d = words(desc);
            d.iter().any(|w| w == kind || info.is_some_and(|i| *w == i.plural))
        });
        let by_class = || {
            info.and_then(|i| {
                let class = words(&i.class);
                locations
                    .iter()
                    .find(|(_, desc)| words(desc).windows(class.len()).any(|w| w == class.as_slice()))
            })
        };
        by_word
            .or_else(by_class)
            .map(|(name, _)| name.clone())
            .or_else(|| locations.keys().last().cloned())
            .unwrap_or_else(|| "rack".into())
    }

    fn dish_template(&self, g: &TaskGuidelines, order: &DishOrder, offset: usize) -> Vec<String> {
        let total: usize = order.items.iter().map(|(_, n)| n).sum();
        let mut steps = Vec::new();
        let mut first = true;
        for (kind, count) in &order.items {
            let rack = self.rack_for(g, kind);
            for j in 0..*count {
                if *count > 1 {
                    steps.push(format!("grasp the {} dirty {kind}", ordinal(j)));
                } else {
                    steps.push(format!("grasp the dirty {kind}"));
                }
                steps.push(format!("remove large particle from the {kind}"));
                if first {
                    steps.push("open the dishwasher".into());
                    steps.push("pull out the rack".into());
                    first = false;
                }
                steps.push(format!("put the {kind} on the {rack}"));
            }
        }
        steps.push(format!("add {} into the detergent dispenser", order.detergent));
        steps.push("close the dishwasher".into());
        steps.push("select the cycle and start dishwasher".into());
        steps.push(
            "after the dishwasher cycle is complete and the dishwasher has stopped, wait a few minutes for the dishes to cool down"
                .into(),
        );
        let wait_number = offset + steps.len();
        let names: Vec<String> = order
            .items
            .iter()
            .map(|(k, n)| {
                if *n > 1 {
                    self.lexicon
                        .items
                        .get(k)
                        .map(|i| i.plural.clone())
                        .unwrap_or_else(|| format!("{k}s"))
                } else {
                    k.clone()
                }
            })
            .collect();
        let phrase = match names.len() {
            0 => "dishes".to_string(),
            1 => names[0].clone(),
            n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
        };
        let verb = if total == 1 { "is" } else { "are" };
        steps.push(format!(
            "make sure the {phrase} {verb} clean and dry, otherwise go into step {wait_number})"
        ));
        if total == 1 {
            steps.push(format!(
                "return the clean {} to the finished location",
                order.items[0].0
            ));
        } else {
            steps.push("return all clean utensils to the finished location".into());
        }
        steps
    }

    fn dish_reply(&self, view: &PlannerView) -> String {
        let order = self.dish_order(view);
        let mut required = vec![order.detergent.clone()];
        required.extend(order.unknown.iter().cloned());
        let feasibility = view.guidelines.check_feasibility(&required);
        if !feasibility.feasible {
            return feasibility.message;
        }
        if order.items.is_empty() {
            return "I could not find any dishes to wash in the request.".into();
        }
        // Numbering of the verify step must match the final step numbers,
        // which depend on how many template steps are skipped.
        let draft = self.dish_template(&view.guidelines, &order, 0);
        let skipped = dish_skipped(&draft, &view.completed);
        let offset = view.completed.len() as isize - skipped as isize;
        let template = self.dish_template(&view.guidelines, &order, offset.max(0) as usize);
        let remaining = dish_remaining(&template, &view.completed);
        numbered(&remaining, view.completed.len())
    }
}

/// Steps of `template` still to run after `completed`, with a discard and
/// a fresh start when an applied ingredient is not wanted any more.
fn drink_remaining(template: &[String], completed: &[String]) -> Vec<String> {
    let mut cup = false;
    let mut applied: Vec<Canonical> = Vec::new();
    for step in completed {
        let c = canonicalize(step);
        match c.verb() {
            Some("get") => {
                cup = true;
                applied = vec![c];
            }
            Some("discard") | Some("put") => {
                cup = false;
                applied.clear();
            }
            _ => applied.push(c),
        }
    }
    if !cup {
        return template.to_vec();
    }
    let wanted = canon_all(template);
    let conflict = applied
        .iter()
        .any(|c| matches!(c.verb(), Some("add" | "pour")) && !wanted.contains(c));
    if conflict {
        let mut steps = vec![DISCARD_CUP.to_string()];
        steps.extend(template.iter().cloned());
        return steps;
    }
    template
        .iter()
        .zip(&wanted)
        .filter(|(_, c)| !applied.contains(c))
        .map(|(s, _)| s.clone())
        .collect()
}

fn dish_skipped(template: &[String], completed: &[String]) -> usize {
    template.len() - dish_remaining(template, completed).len()
}

fn dish_remaining(template: &[String], completed: &[String]) -> Vec<String> {
    let wanted = canon_all(template);
    let done = canon_all(completed);
    if done.len() <= wanted.len() && wanted[..done.len()] == done[..] {
        return template[done.len()..].to_vec();
    }
    let mut left = done;
    template
        .iter()
        .zip(wanted)
        .filter(|(_, c)| match left.iter().position(|d| d == c) {
            Some(i) => {
                left.remove(i);
                false
            }
            None => true,
        })
        .map(|(s, _)| s.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Executor side

static SCENE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^- (.+) at \((-?\d+(?:\.\d+)?), (-?\d+(?:\.\d+)?)\)$").unwrap());
static ADD_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^add (?:the |some |a scoop of |one scoop of )?(.+?) (?:to|into|in) (?:the )?working cup$").unwrap()
});
static POUR_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^pour (?:the |some )?(.+?) (?:to|into|in) (?:the )?working cup$").unwrap()
});

struct ExecutorView {
    step: String,
    scene: Vec<(String, f64, f64)>,
    /// Invocations issued since the step was handed over.
    issued: usize,
    last_error: Option<String>,
}

fn executor_view(history: &[Message]) -> Result<ExecutorView, String> {
    let last_user = history
        .iter()
        .rposition(|m| m.role == Role::User)
        .ok_or("no user message")?;
    let prompt = &history[last_user].content;
    let step = prompt
        .lines()
        .find_map(|l| l.strip_prefix(CURRENT_STEP_PREFIX))
        .ok_or("no current step in the prompt")?
        .trim()
        .to_string();
    let mut scene = Vec::new();
    let mut in_scene = false;
    for line in prompt.lines() {
        if line.starts_with(SCENE_HEADER) {
            in_scene = true;
            continue;
        }
        if in_scene {
            if line.trim().is_empty() && !scene.is_empty() {
                break;
            }
            if let Some(c) = SCENE_LINE.captures(line.trim()) {
                let x: f64 = c[2].parse().map_err(|_| "bad scene x")?;
                let y: f64 = c[3].parse().map_err(|_| "bad scene y")?;
                scene.push((c[1].to_string(), x, y));
            }
        }
    }
    let after = &history[last_user + 1..];
    let issued = after
        .iter()
        .filter(|m| m.role == Role::Assistant && m.tool_invocation.is_some())
        .count();
    let last_error = after
        .last()
        .filter(|m| m.role == Role::Tool && m.content.starts_with("error"))
        .map(|m| m.content.clone());
    Ok(ExecutorView {
        step,
        scene,
        issued,
        last_error,
    })
}

fn call(name: &str, args: serde_json::Value) -> ToolInvocation {
    ToolInvocation::new(name, args)
}

fn done() -> ToolInvocation {
    call("step_complete", json!({}))
}

fn find<'a>(scene: &'a [(String, f64, f64)], label: &str) -> Option<&'a (String, f64, f64)> {
    scene.iter().find(|(l, _, _)| l == label)
}

fn drink_actions(step: &str, scene: &[(String, f64, f64)]) -> Result<Vec<ToolInvocation>, String> {
    let norm = normalize_name(step.trim_end_matches('.'));
    let canonical = canonicalize(&norm);
    let grasp = |label: &str| {
        find(scene, label)
            .map(|(_, x, y)| call("grasp_cup", json!({"x": x, "y": y})))
            .ok_or_else(|| format!("I cannot find a {label} in the scene."))
    };
    match canonical.verb() {
        Some("get") if norm.contains("cup") => Ok(vec![
            grasp("empty cup")?,
            call("place_cup", json!({"location": "working_area"})),
            done(),
        ]),
        Some("add") => {
            let material = ADD_STEP
                .captures(&norm)
                .ok_or_else(|| format!("UnmappableStep: {step}"))?[1]
                .to_string();
            Ok(vec![
                call(
                    "scoop_to_location",
                    json!({"ingredient": material, "location": "working_area"}),
                ),
                done(),
            ])
        }
        Some("pour") => {
            let material = POUR_STEP
                .captures(&norm)
                .ok_or_else(|| format!("UnmappableStep: {step}"))?[1]
                .to_string();
            Ok(vec![
                call("pour", json!({"ingredient": material, "location": "working_area"})),
                done(),
            ])
        }
        Some("put") if canonical.object() == Some("working cup") => Ok(vec![
            grasp("working cup")?,
            call("place_cup", json!({"location": "finished_location"})),
            done(),
        ]),
        Some("discard") => Ok(vec![
            grasp("working cup")?,
            call("place_cup", json!({"location": "discard"})),
            done(),
        ]),
        _ => Err(format!("UnmappableStep: {step}")),
    }
}

fn dish_actions(step: &str) -> Result<Vec<ToolInvocation>, String> {
    let canonical = canonicalize(step);
    let unmappable = || format!("UnmappableStep: {step}");
    let object = canonical.object().unwrap_or_default().to_string();
    let first = match canonical.verb() {
        Some("grasp") => {
            let kind = object.split_whitespace().last().ok_or_else(unmappable)?;
            vec![call("grasp_item", json!({"label": format!("dirty {kind}")}))]
        }
        Some("remove") => vec![call("remove_particles", json!({}))],
        Some("open") => vec![call("open_dishwasher", json!({}))],
        Some("pull") => match rack_number(step) {
            Some(k) => vec![call("pull_out_rack", json!({"rack": k.to_string()}))],
            None => vec![call("pull_out_rack", json!({}))],
        },
        Some("put") => {
            let rack = canonical
                .destination()
                .and_then(rack_number)
                .ok_or_else(unmappable)?;
            vec![call("put_item_on_rack", json!({"rack": rack.to_string()}))]
        }
        Some("add") if object.ends_with("detergent") => {
            let flavor = object.trim_end_matches("detergent").trim();
            vec![call("add_detergent", json!({"flavor": flavor}))]
        }
        Some("close") => vec![call("close_dishwasher", json!({}))],
        Some("start") => vec![call("start_cycle", json!({}))],
        Some("wait") => vec![call("wait_for_completion", json!({}))],
        Some("verify") => object
            .split_whitespace()
            .filter(|w| *w != "and")
            .map(|kind| call("inspect_item", json!({"label": kind})))
            .collect(),
        Some("return") => vec![call("return_items", json!({}))],
        _ => return Err(unmappable()),
    };
    if first.is_empty() {
        return Err(unmappable());
    }
    let mut actions = first;
    actions.push(done());
    Ok(actions)
}

pub struct OracleProvider {
    lexicon: Arc<Lexicon>,
}

impl OracleProvider {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        OracleProvider { lexicon }
    }

    fn plan_reply(&self, history: &[Message]) -> Result<String, ProviderError> {
        let view = planner_view(history).map_err(ProviderError::InvalidHistory)?;
        Ok(match self.lexicon.family {
            TaskFamily::Drink => self.drink_reply(&view),
            TaskFamily::Dishwash => self.dish_reply(&view),
        })
    }

    fn execute_reply(
        &self,
        history: &[Message],
        tools: &[FunctionSchema],
    ) -> Result<ProviderResponse, ProviderError> {
        let view = executor_view(history).map_err(ProviderError::InvalidHistory)?;
        if let Some(error) = view.last_error {
            return Ok(ProviderResponse::Text(format!(
                "I could not carry out \"{}\": {error}",
                view.step
            )));
        }
        let has = |name: &str| tools.iter().any(|t| t.name == name);
        let actions = if has("grasp_cup") {
            drink_actions(&view.step, &view.scene)
        } else if has("grasp_item") {
            dish_actions(&view.step)
        } else {
            Err("UnmappableStep: no robot functions are available".to_string())
        };
        match actions {
            Err(text) => Ok(ProviderResponse::Text(text)),
            Ok(actions) => match actions.into_iter().nth(view.issued) {
                Some(action) => Ok(ProviderResponse::Invocation(
                    action.with_id(format!("call_{}", view.issued + 1)),
                )),
                None => Ok(ProviderResponse::Text("The step is already complete.".into())),
            },
        }
    }
}

impl Provider for OracleProvider {
    fn name(&self) -> &str {
        "oracle"
    }

    fn complete(
        &self,
        history: &[Message],
        tools: &[FunctionSchema],
    ) -> Result<ProviderResponse, ProviderError> {
        validate_history(history)?;
        let system = &history[0].content;
        if system.contains(PLANNER_MARKER) {
            self.plan_reply(history).map(ProviderResponse::Text)
        } else if system.contains(EXECUTOR_MARKER) {
            self.execute_reply(history, tools)
        } else {
            Err(ProviderError::InvalidHistory(
                "system prompt carries no mode marker".into(),
            ))
        }
    }
}
