use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::governor::{BoundChoice, ControllerGains, ControllerMode};
use crate::metric::DirectionalWeights;
use crate::world::{Bounds, Disk, ObstacleSet, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SensorMode {
    /// Clearance from the true obstacle geometry, map known in advance.
    #[default]
    Geometric,
    /// Clearance from the latest lidar scan, map built online.
    Lidar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub mode: SensorMode,
    pub beams: usize,
    pub range_max: f64,
    pub rate_hz: f64,
    /// Standard deviation of Gaussian range noise; 0 disables it.
    pub noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            mode: SensorMode::Geometric,
            beams: 360,
            range_max: 10.0,
            rate_hz: 20.0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: f64,
    pub inflation: f64,
    /// Let the planner cross unexplored cells.
    pub unknown_is_free: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            inflation: 0.3,
            unknown_is_free: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
    pub bound: BoundChoice,
    pub k: f64,
    pub zeta: f64,
    pub k_g: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self {
            mode: ControllerMode::Sddm,
            bound: BoundChoice::Exact,
            k: g.k,
            zeta: g.zeta,
            k_g: g.k_g,
            c1: g.weights.c1(),
            c2: g.weights.c2(),
        }
    }
}

impl ControllerConfig {
    pub fn gains(&self) -> Result<ControllerGains> {
        ControllerGains::new(self.k, self.zeta, self.k_g, DirectionalWeights::new(self.c1, self.c2)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Integration steps per control update.
    pub control_period: u64,
    pub timeout: f64,
    pub goal_tolerance: f64,
    pub speed_tolerance: f64,
    /// Control updates between replans.
    pub replan_period: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            control_period: 10,
            timeout: 120.0,
            goal_tolerance: 0.05,
            speed_tolerance: 0.05,
            replan_period: 20,
            seed: 0,
        }
    }
}

/// A complete scenario: world geometry, task and all run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub bounds: Bounds,
    #[serde(default)]
    pub disks: Vec<Disk>,
    #[serde(default)]
    pub segments: Vec<Segment>,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    /// Fixed navigation path; planned on the grid when absent.
    #[serde(default)]
    pub path: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn world(&self) -> Result<ObstacleSet> {
        ObstacleSet::new(self.disks.clone(), self.segments.clone(), self.bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let world = self.world()?;
        self.controller.gains()?;
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(Error::Config(format!("sim.dt must be positive, got {}", s.dt)));
        }
        if s.control_period == 0 || s.replan_period == 0 {
            return Err(Error::Config(
                "sim.control_period and sim.replan_period must be at least 1".into(),
            ));
        }
        if !(s.timeout >= 0.0) || !(s.goal_tolerance > 0.0) || !(s.speed_tolerance > 0.0) {
            return Err(Error::Config("timeout must be >= 0 and tolerances > 0".into()));
        }
        let se = &self.sensor;
        if se.beams == 0 || !(se.range_max > 0.0) || !(se.rate_hz > 0.0) || !(se.noise_sigma >= 0.0) {
            return Err(Error::Config(
                "sensor needs beams > 0, range_max > 0, rate_hz > 0, noise_sigma >= 0".into(),
            ));
        }
        if !(self.grid.resolution > 0.0) || !(self.grid.inflation >= 0.0) {
            return Err(Error::Config("grid needs resolution > 0 and inflation >= 0".into()));
        }
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if !world.is_free(&nalgebra::Vector2::new(p[0], p[1])) {
                return Err(Error::Config(format!(
                    "{name} ({}, {}) is not in free space",
                    p[0], p[1]
                )));
            }
        }
        if let Some(path) = &self.path {
            if path.len() < 2 {
                return Err(Error::Config("path needs at least 2 waypoints".into()));
            }
        }
        Ok(())
    }

    /// Parses a scenario document and applies `key=value` overrides, where
    /// `key` is a dotted path such as `controller.k`.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let cfg: ScenarioConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Splits `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

const TABLES: [&str; 4] = ["sensor", "grid", "controller", "sim"];

fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    match key.split_once('.') {
        Some((table, field)) if TABLES.contains(&table) && !field.contains('.') => {
            let entry = doc
                .entry(table)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let t = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{table}' is not a table")))?;
            t.insert(field.to_string(), value);
            Ok(())
        }
        None if matches!(key, "name" | "start" | "goal") => {
            doc.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("unknown override key '{key}'"))),
    }
}
