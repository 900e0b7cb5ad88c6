//! Skill grounding: robot skills declared as data, exposed to the provider as
//! function schemas, and validated before they ever reach the simulator.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::guidelines::TaskFamily;
use crate::world::{SkillOutcome, SkillTarget, WorldError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamKind {
    Number,
    String,
    Enum { values: Vec<String> },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    #[serde(default)]
    pub doc: String,
    #[serde(default = "yes")]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    pub doc: String,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    pub domain: TaskFamily,
}

/// Wire shape of one entry in the chat-completions `tools` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSchema {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    #[serde(default)]
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

impl ToolInvocation {
    /// `arguments` must be a JSON object; anything else yields no arguments.
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        ToolInvocation {
            id: String::new(),
            name: name.into(),
            arguments: match arguments {
                Value::Object(map) => map,
                _ => Map::new(),
            },
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// `name(k=v, ...)` with arguments in key order.
    pub fn signature(&self) -> String {
        let args = self
            .arguments
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!("{}({args})", self.name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("duplicate skill name '{0}'")]
    DuplicateSkillName(String),
    #[error("enum parameter '{skill}.{param}' has no values")]
    EmptyEnum { skill: String, param: String },
    #[error("unknown skill '{0}'")]
    UnknownSkill(String),
    #[error("invalid argument '{param}': {reason}")]
    ArgumentValidation { param: String, reason: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("skill file: {0}")]
    File(String),
}

impl SkillError {
    /// Text fed back to the provider as the function result.
    pub fn observation(&self) -> String {
        format!("error: {self}")
    }
}

#[derive(Deserialize)]
struct SkillFile {
    domain: TaskFamily,
    #[serde(rename = "skill", default)]
    skills: Vec<FileSkill>,
}

#[derive(Deserialize)]
struct FileSkill {
    name: String,
    doc: String,
    #[serde(default)]
    params: Vec<ParamSpec>,
}

/// Validated, immutable set of skills for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillRegistry {
    domain: TaskFamily,
    skills: Vec<SkillSpec>,
}

impl SkillRegistry {
    pub fn new(domain: TaskFamily, skills: Vec<SkillSpec>) -> Result<Self, SkillError> {
        let mut seen = BTreeSet::new();
        for skill in skills.iter().filter(|s| s.domain == domain) {
            if !seen.insert(skill.name.as_str()) {
                return Err(SkillError::DuplicateSkillName(skill.name.clone()));
            }
            for p in &skill.params {
                if matches!(&p.kind, ParamKind::Enum { values } if values.is_empty()) {
                    return Err(SkillError::EmptyEnum {
                        skill: skill.name.clone(),
                        param: p.name.clone(),
                    });
                }
            }
        }
        Ok(SkillRegistry { domain, skills })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SkillError> {
        let file: SkillFile = toml::from_str(text).map_err(|e| SkillError::File(e.to_string()))?;
        let skills = file
            .skills
            .into_iter()
            .map(|s| SkillSpec {
                name: s.name,
                doc: s.doc,
                params: s.params,
                domain: file.domain,
            })
            .collect();
        Self::new(file.domain, skills)
    }

    pub fn from_path(path: &Path) -> Result<Self, SkillError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SkillError::File(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn builtin(domain: TaskFamily) -> Self {
        let text = match domain {
            TaskFamily::Drink => include_str!("../fixtures/drink/skills.toml"),
            TaskFamily::Dishwash => include_str!("../fixtures/dishwash/skills.toml"),
        };
        Self::from_toml_str(text).expect("builtin skills are valid")
    }

    pub fn domain(&self) -> TaskFamily {
        self.domain
    }

    pub fn skills(&self) -> impl Iterator<Item = &SkillSpec> {
        self.skills.iter().filter(move |s| s.domain == self.domain)
    }

    pub fn get(&self, name: &str) -> Option<&SkillSpec> {
        self.skills().find(|s| s.name == name)
    }

    pub fn schemas(&self) -> Vec<FunctionSchema> {
        generate_schema(&self.skills, self.domain).expect("registry was validated")
    }
}

fn param_schema(p: &ParamSpec) -> Value {
    let mut obj = Map::new();
    match &p.kind {
        ParamKind::Number => {
            obj.insert("type".into(), json!("number"));
        }
        ParamKind::String => {
            obj.insert("type".into(), json!("string"));
        }
        ParamKind::Enum { values } => {
            obj.insert("type".into(), json!("string"));
            obj.insert("enum".into(), json!(values));
        }
    }
    if !p.doc.is_empty() {
        obj.insert("description".into(), json!(p.doc));
    }
    Value::Object(obj)
}

/// One schema per skill of `domain`, ordered by name.
pub fn generate_schema(
    registry: &[SkillSpec],
    domain: TaskFamily,
) -> Result<Vec<FunctionSchema>, SkillError> {
    let mut skills: Vec<&SkillSpec> = registry.iter().filter(|s| s.domain == domain).collect();
    skills.sort_by(|a, b| a.name.cmp(&b.name));
    if let Some(pair) = skills.windows(2).find(|w| w[0].name == w[1].name) {
        return Err(SkillError::DuplicateSkillName(pair[0].name.clone()));
    }
    Ok(skills
        .into_iter()
        .map(|s| {
            let properties: Map<String, Value> = s
                .params
                .iter()
                .map(|p| (p.name.clone(), param_schema(p)))
                .collect();
            let required: Vec<&str> = s
                .params
                .iter()
                .filter(|p| p.required)
                .map(|p| p.name.as_str())
                .collect();
            FunctionSchema {
                name: s.name.clone(),
                description: s.doc.clone(),
                parameters: json!({
                    "type": "object",
                    "properties": properties,
                    "required": required,
                }),
            }
        })
        .collect())
}

/// Pretty JSON document of the schemas, as printed by the schema command.
pub fn schema_document(schemas: &[FunctionSchema]) -> String {
    serde_json::to_string_pretty(schemas).expect("schemas serialize")
}

fn invalid(param: &str, reason: impl Into<String>) -> SkillError {
    SkillError::ArgumentValidation {
        param: param.to_string(),
        reason: reason.into(),
    }
}

/// Check an invocation against the registry. Returns the call with its
/// arguments normalized to the schema types.
pub fn validate(call: &ToolInvocation, registry: &SkillRegistry) -> Result<ToolInvocation, SkillError> {
    let spec = registry
        .get(&call.name)
        .ok_or_else(|| SkillError::UnknownSkill(call.name.clone()))?;
    for key in call.arguments.keys() {
        if !spec.params.iter().any(|p| &p.name == key) {
            return Err(invalid(key, "unexpected parameter"));
        }
    }
    let mut arguments = Map::new();
    for p in &spec.params {
        let value = match call.arguments.get(&p.name) {
            None | Some(Value::Null) if p.required => return Err(invalid(&p.name, "required")),
            None | Some(Value::Null) => continue,
            Some(v) => v,
        };
        let normalized = match &p.kind {
            ParamKind::Number => match value.as_f64() {
                Some(n) if n.is_finite() => json!(n),
                _ => return Err(invalid(&p.name, "expected a number")),
            },
            ParamKind::String => match value.as_str() {
                Some(s) if !s.trim().is_empty() => json!(s.trim()),
                Some(_) => return Err(invalid(&p.name, "must not be empty")),
                None => return Err(invalid(&p.name, "expected a string")),
            },
            ParamKind::Enum { values } => {
                let text = match value {
                    Value::String(s) => s.trim().to_string(),
                    Value::Number(n) => n.to_string(),
                    _ => return Err(invalid(&p.name, "expected a string")),
                };
                if !values.contains(&text) {
                    return Err(invalid(
                        &p.name,
                        format!("must be one of [{}]", values.join(", ")),
                    ));
                }
                json!(text)
            }
        };
        arguments.insert(p.name.clone(), normalized);
    }
    Ok(ToolInvocation {
        id: call.id.clone(),
        name: call.name.clone(),
        arguments,
    })
}

/// Validate, then forward to the world. Validation failures never reach it.
pub fn validate_and_dispatch<T: SkillTarget + ?Sized>(
    call: &ToolInvocation,
    registry: &SkillRegistry,
    world: &mut T,
) -> Result<SkillOutcome, SkillError> {
    let call = validate(call, registry)?;
    Ok(world.apply_skill(&call)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldState;

    fn spec(name: &str) -> SkillSpec {
        SkillSpec {
            name: name.into(),
            doc: format!("{name} doc"),
            params: Vec::new(),
            domain: TaskFamily::Drink,
        }
    }

    #[test]
    fn drink_schemas_have_the_roster() {
        let schemas = SkillRegistry::builtin(TaskFamily::Drink).schemas();
        let names: Vec<&str> = schemas.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            ["grasp_cup", "place_cup", "pour", "respond_to_user", "scoop_to_location", "step_complete"]
        );
        let grasp = &schemas[0];
        assert_eq!(grasp.parameters["properties"]["x"]["type"], "number");
        assert_eq!(grasp.parameters["properties"]["y"]["type"], "number");
        assert_eq!(grasp.parameters["required"], json!(["x", "y"]));
        let pour = &schemas[2];
        assert_eq!(pour.parameters["properties"]["ingredient"]["type"], "string");
        assert!(pour.parameters["properties"]["location"]["enum"].is_array());
        let place = &schemas[1];
        assert_eq!(
            place.parameters["properties"]["location"]["enum"],
            json!(["working_area", "finished_location", "discard"])
        );
    }

    #[test]
    fn empty_registry_gives_no_schemas() {
        assert!(generate_schema(&[], TaskFamily::Drink).unwrap().is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        assert_eq!(
            generate_schema(&[spec("pour"), spec("pour")], TaskFamily::Drink),
            Err(SkillError::DuplicateSkillName("pour".into()))
        );
        assert!(SkillRegistry::new(TaskFamily::Drink, vec![spec("pour"), spec("pour")]).is_err());
    }

    #[test]
    fn docs_appear_verbatim() {
        for domain in [TaskFamily::Drink, TaskFamily::Dishwash] {
            let registry = SkillRegistry::builtin(domain);
            let schemas = registry.schemas();
            for skill in registry.skills() {
                let schema = schemas.iter().find(|s| s.name == skill.name).unwrap();
                assert_eq!(schema.description, skill.doc);
            }
        }
    }

    #[test]
    fn schema_document_is_stable() {
        let a = schema_document(&SkillRegistry::builtin(TaskFamily::Dishwash).schemas());
        let b = schema_document(&SkillRegistry::builtin(TaskFamily::Dishwash).schemas());
        assert_eq!(a, b);
        let parsed: Value = serde_json::from_str(&a).unwrap();
        assert!(parsed[0]["parameters"]["properties"].is_object());
        assert!(parsed[0]["parameters"]["required"].is_array());
    }

    #[test]
    fn missing_location_is_reported() {
        let registry = SkillRegistry::builtin(TaskFamily::Drink);
        let mut world = WorldState::reset(TaskFamily::Drink, 0);
        let call = ToolInvocation::new("pour", json!({"ingredient": "milk"}));
        assert_eq!(
            validate_and_dispatch(&call, &registry, &mut world),
            Err(SkillError::ArgumentValidation {
                param: "location".into(),
                reason: "required".into()
            })
        );
    }

    #[test]
    fn valid_grasp_dispatches() {
        let registry = SkillRegistry::builtin(TaskFamily::Drink);
        let mut world = WorldState::reset(TaskFamily::Drink, 0);
        let p = world.objects["cup-1"].pose;
        let out = validate_and_dispatch(
            &ToolInvocation::new("grasp_cup", json!({"x": p.x, "y": p.y})),
            &registry,
            &mut world,
        )
        .unwrap();
        assert!(out.ok);
        assert!(out.observation.starts_with("grasped cup"), "{}", out.observation);
    }

    #[test]
    fn pour_reports_volume() {
        let registry = SkillRegistry::builtin(TaskFamily::Drink);
        let mut world = WorldState::reset(TaskFamily::Drink, 0);
        let p = world.objects["cup-1"].pose;
        for call in [
            ToolInvocation::new("grasp_cup", json!({"x": p.x, "y": p.y})),
            ToolInvocation::new("place_cup", json!({"location": "working_area"})),
        ] {
            validate_and_dispatch(&call, &registry, &mut world).unwrap();
        }
        let out = validate_and_dispatch(
            &ToolInvocation::new("pour", json!({"ingredient": "milk", "location": "working_area"})),
            &registry,
            &mut world,
        )
        .unwrap();
        assert!(out.ok && out.observation.contains("150 ml"));
    }

    #[test]
    fn enum_accepts_numbers_and_rejects_strangers() {
        let registry = SkillRegistry::builtin(TaskFamily::Dishwash);
        let ok = validate(&ToolInvocation::new("put_item_on_rack", json!({"rack": 3})), &registry).unwrap();
        assert_eq!(ok.arguments["rack"], json!("3"));
        let err = validate(&ToolInvocation::new("put_item_on_rack", json!({"rack": 4})), &registry).unwrap_err();
        assert!(matches!(err, SkillError::ArgumentValidation { .. }));
        assert!(validate(&ToolInvocation::new("pull_out_rack", json!({})), &registry).is_ok());
    }

    #[test]
    fn unknown_skill_and_extra_params() {
        let registry = SkillRegistry::builtin(TaskFamily::Drink);
        assert_eq!(
            validate(&ToolInvocation::new("fly", json!({})), &registry),
            Err(SkillError::UnknownSkill("fly".into()))
        );
        let err = validate(&ToolInvocation::new("step_complete", json!({"now": true})), &registry).unwrap_err();
        assert!(err.observation().starts_with("error: invalid argument 'now'"));
        // Skills of the other domain are not registered here.
        assert!(validate(&ToolInvocation::new("open_dishwasher", json!({})), &registry).is_err());
    }
}
