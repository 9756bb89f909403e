//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speedcas_core::encounters::{gen_hovering, gen_opsuit_like, Encounter};
use speedcas_core::logic::LogicSpec;
use speedcas_core::simulator::{check_logics, SimConfig};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncounterSource {
    OpsuitLike { count: usize },
    Hovering { count: usize },
    /// Existing JSON-lines set, relative to the config file.
    File { path: PathBuf },
}

impl Default for EncounterSource {
    fn default() -> Self {
        EncounterSource::OpsuitLike { count: 1000 }
    }
}

/// Everything needed to run solve, generate, simulate and evaluate in one
/// go. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for generation and simulation; required.
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_logics")]
    pub logics: Vec<LogicSpec>,
    #[serde(default)]
    pub encounters: EncounterSource,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_bin_width")]
    pub bin_width_deg: f64,
}

fn default_scale() -> f64 {
    0.1
}

fn default_logics() -> Vec<LogicSpec> {
    vec![LogicSpec::speed()]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_bin_width() -> f64 {
    10.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            detail: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.out_dir = base.join(&c.out_dir);
        if let EncounterSource::File { path: p } = &mut c.encounters {
            *p = base.join(&*p);
        }
        Ok(c)
    }

    /// Checks every field and referenced path without writing anything.
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::usage(format!("scale must be in (0, 1], got {}", self.scale)));
        }
        if self.logics.is_empty() {
            return Err(Error::usage("at least one logic is required"));
        }
        for l in &self.logics {
            l.validate()?;
        }
        let mut seen = Vec::new();
        for l in &self.logics {
            if seen.contains(&l.kind) {
                return Err(Error::usage(format!("logic {} listed twice", l.kind)));
            }
            seen.push(l.kind);
        }
        self.sim.validate()?;
        if !(self.bin_width_deg > 0.0) {
            return Err(Error::usage("bin_width_deg must be positive"));
        }
        match &self.encounters {
            EncounterSource::OpsuitLike { count } | EncounterSource::Hovering { count } if *count == 0 => {
                Err(Error::usage("encounter count must be positive"))
            }
            EncounterSource::File { path } if !path.is_file() => {
                Err(Error::data(path, "encounter file not found"))
            }
            _ => Ok(()),
        }
    }

    pub fn encounter_set(&self) -> Result<Vec<Encounter>> {
        Ok(match &self.encounters {
            EncounterSource::OpsuitLike { count } => gen_opsuit_like(*count, self.seed)?,
            EncounterSource::Hovering { count } => gen_hovering(*count, self.seed)?,
            EncounterSource::File { path } => jsonl::load_set(path)?,
        })
    }
}

/// Confirms a set of loaded tables can run together.
pub fn check_tables(tables: &[&speedcas_core::QTable]) -> Result<()> {
    check_logics(tables)?;
    Ok(())
}
