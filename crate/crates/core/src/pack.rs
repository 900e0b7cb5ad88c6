//! Everything a session needs for one task family, bundled.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidelines::{parse_guidelines, Lexicon, TaskFamily, TaskGuidelines};
use crate::skills::SkillRegistry;
use crate::vision::Calibration;
use crate::world::WorldConfig;

pub const PLANNER_PROMPT: &str = include_str!("../fixtures/prompts/planner.txt");
pub const EXECUTOR_PROMPT: &str = include_str!("../fixtures/prompts/executor.txt");

#[derive(Debug, Error)]
pub enum PackError {
    #[error("{path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct TaskPack {
    pub domain: TaskFamily,
    pub guidelines: Arc<TaskGuidelines>,
    pub lexicon: Arc<Lexicon>,
    pub skills: Arc<SkillRegistry>,
    pub world: Arc<WorldConfig>,
    pub calibration: Calibration,
    pub planner_prompt: String,
    pub executor_prompt: String,
}

/// File locations for a pack. Missing entries fall back to the builtin
/// files of the domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackPaths {
    pub guidelines: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub world: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub planner_prompt: Option<PathBuf>,
    pub executor_prompt: Option<PathBuf>,
}

impl PackPaths {
    pub fn iter(&self) -> impl Iterator<Item = &Path> {
        [
            &self.guidelines,
            &self.lexicon,
            &self.skills,
            &self.world,
            &self.calibration,
            &self.planner_prompt,
            &self.executor_prompt,
        ]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
    }

    /// Resolve relative entries against `base`.
    pub fn relative_to(mut self, base: &Path) -> Self {
        for p in [
            &mut self.guidelines,
            &mut self.lexicon,
            &mut self.skills,
            &mut self.world,
            &mut self.calibration,
            &mut self.planner_prompt,
            &mut self.executor_prompt,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }
}

fn builtin_guidelines(domain: TaskFamily) -> &'static str {
    match domain {
        TaskFamily::Drink => include_str!("../fixtures/drink/guidelines.txt"),
        TaskFamily::Dishwash => include_str!("../fixtures/dishwash/guidelines.txt"),
    }
}

fn builtin_lexicon(domain: TaskFamily) -> &'static str {
    match domain {
        TaskFamily::Drink => include_str!("../fixtures/drink/lexicon.toml"),
        TaskFamily::Dishwash => include_str!("../fixtures/dishwash/lexicon.toml"),
    }
}

fn read(path: &Path) -> Result<String, PackError> {
    std::fs::read_to_string(path).map_err(|e| PackError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn file_err(path: &Path, e: impl ToString) -> PackError {
    PackError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

impl TaskPack {
    pub fn builtin(domain: TaskFamily) -> Self {
        Self::from_paths(domain, &PackPaths::default()).expect("builtin pack is valid")
    }

    pub fn from_paths(domain: TaskFamily, paths: &PackPaths) -> Result<Self, PackError> {
        let guidelines = match &paths.guidelines {
            Some(p) => parse_guidelines(&read(p)?).map_err(|e| file_err(p, e))?,
            None => parse_guidelines(builtin_guidelines(domain)).map_err(|e| PackError::Invalid(e.to_string()))?,
        };
        let lexicon = match &paths.lexicon {
            Some(p) => Lexicon::from_toml_str(&read(p)?).map_err(|e| file_err(p, e))?,
            None => Lexicon::from_toml_str(builtin_lexicon(domain)).map_err(|e| PackError::Invalid(e.to_string()))?,
        };
        let skills = match &paths.skills {
            Some(p) => SkillRegistry::from_path(p).map_err(|e| file_err(p, e))?,
            None => SkillRegistry::builtin(domain),
        };
        let world = match &paths.world {
            Some(p) => WorldConfig::from_path(p).map_err(|e| file_err(p, e))?,
            None => WorldConfig::builtin(domain),
        };
        let calibration = match &paths.calibration {
            Some(p) => Calibration::from_path(p).map_err(|e| file_err(p, e))?,
            None => Calibration::builtin(),
        };
        let planner_prompt = match &paths.planner_prompt {
            Some(p) => read(p)?,
            None => PLANNER_PROMPT.to_string(),
        };
        let executor_prompt = match &paths.executor_prompt {
            Some(p) => read(p)?,
            None => EXECUTOR_PROMPT.to_string(),
        };
        for (what, got) in [
            ("lexicon", lexicon.family),
            ("skills", skills.domain()),
            ("world", world.domain),
        ] {
            if got != domain {
                return Err(PackError::Invalid(format!(
                    "{what} is for {} but the pack is for {}",
                    got.as_str(),
                    domain.as_str()
                )));
            }
        }
        Ok(TaskPack {
            domain,
            guidelines: Arc::new(guidelines),
            lexicon: Arc::new(lexicon),
            skills: Arc::new(skills),
            world: Arc::new(world),
            calibration,
            planner_prompt,
            executor_prompt,
        })
    }
}
