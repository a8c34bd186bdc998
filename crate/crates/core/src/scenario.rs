//! Scenario files: road, fleet, solver settings, a registry of named
//! configurations and the pairs to plan.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineConfig, FleetMember};
use crate::dynamics::Limits;
use crate::error::{Error, Result};
use crate::follower::FollowerConfig;
use crate::formation::{AssignedConfiguration, PlatoonConfiguration, RoadGeometry, VehicleId};
use crate::geometry::{footprint, polytope_distance, Polytope};
use crate::lookup::{default_rho_grid, BuildOptions, PairRequest, DEFAULT_M};
use crate::planner::{ManeuverRequest, PlannerConfig};

/// Tolerance when matching fleet states to configuration slots.
const SLOT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPair {
    pub initial: String,
    pub target: String,
    /// Vehicle in each slot of the initial configuration.
    pub initial_ids: Vec<VehicleId>,
    /// Vehicle in each slot of the target configuration.
    pub target_ids: Vec<VehicleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub road: RoadGeometry,
    pub fleet: Vec<FleetMember>,
    /// Applied to planner, follower and baseline when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub follower: FollowerConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub configurations: BTreeMap<String, PlatoonConfiguration>,
    #[serde(default)]
    pub pairs: Vec<ScenarioPair>,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_max_entries")]
    pub max_entries: usize,
    #[serde(default)]
    pub obstacles: Vec<Polytope>,
    /// Shared plans of surrounding traffic, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<PathBuf>,
}

fn default_max_entries() -> usize {
    DEFAULT_M
}

impl Scenario {
    /// Reads and validates a scenario; a relative `traffic` path is resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut sc: Scenario = serde_json::from_str(&s)?;
        if let (Some(t), Some(dir)) = (&sc.traffic, path.parent()) {
            if t.is_relative() {
                sc.traffic = Some(dir.join(t));
            }
        }
        sc.apply_limits();
        sc.validate()?;
        Ok(sc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn apply_limits(&mut self) {
        if let Some(l) = &self.limits {
            self.planner.limits = l.clone();
            self.follower.limits = l.clone();
            self.baseline.tracker.limits = l.clone();
        }
    }

    pub fn member(&self, id: VehicleId) -> Option<&FleetMember> {
        self.fleet.iter().find(|m| m.vehicle_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.planner.validate()?;
        self.follower.validate()?;
        if self.fleet.is_empty() {
            return Err(Error::Scenario("empty fleet".into()));
        }
        for (i, m) in self.fleet.iter().enumerate() {
            m.params.validate()?;
            if !m.initial.is_finite() {
                return Err(Error::Scenario(format!("vehicle {} has a non-finite initial state", m.vehicle_id)));
            }
            if self.fleet[..i].iter().any(|o| o.vehicle_id == m.vehicle_id) {
                return Err(Error::Scenario(format!("duplicate vehicle id {}", m.vehicle_id)));
            }
        }
        for (i, a) in self.fleet.iter().enumerate() {
            for b in &self.fleet[i + 1..] {
                let d = polytope_distance(&footprint(&a.initial, &a.params), &footprint(&b.initial, &b.params))?.dist;
                if d < self.planner.d_min {
                    return Err(Error::Scenario(format!(
                        "initial footprints of vehicles {} and {} are {d:.4} m apart, below d_min = {}",
                        a.vehicle_id, b.vehicle_id, self.planner.d_min
                    )));
                }
            }
        }
        for c in self.configurations.values() {
            c.validate()?;
        }
        for p in &self.pairs {
            self.assigned(&p.initial, &p.initial_ids)?;
            self.assigned(&p.target, &p.target_ids)?;
        }
        Ok(())
    }

    fn assigned(&self, name: &str, ids: &[VehicleId]) -> Result<AssignedConfiguration> {
        let c = self
            .configurations
            .get(name)
            .ok_or_else(|| Error::Scenario(format!("unknown configuration {name:?}")))?;
        if let Some(id) = ids.iter().find(|id| self.member(**id).is_none()) {
            return Err(Error::Scenario(format!("configuration {name:?} names unknown vehicle {id}")));
        }
        if ids.len() != self.fleet.len() {
            return Err(Error::Scenario(format!("configuration {name:?} assigns {} of {} vehicles", ids.len(), self.fleet.len())));
        }
        AssignedConfiguration::new(c.clone(), ids.to_vec())
    }

    /// Planner request for one pair. The initial configuration must reproduce
    /// the fleet's initial positions up to a longitudinal shift, and every
    /// vehicle must start at the same speed.
    pub fn request(&self, pair: &ScenarioPair) -> Result<ManeuverRequest> {
        let initial = self.assigned(&pair.initial, &pair.initial_ids)?;
        let target = self.assigned(&pair.target, &pair.target_ids)?;
        let params = self.fleet[0].params;
        let slots = initial.positions(&self.road, &params)?;
        let (id0, (sx0, _)) = slots[0];
        let origin_x = self.member(id0).unwrap().initial.x - sx0;
        for (id, (sx, sy)) in &slots {
            let z = self.member(*id).unwrap().initial;
            if (z.x - origin_x - sx).abs() > SLOT_TOL || (z.y - sy).abs() > SLOT_TOL {
                return Err(Error::ConfigurationMismatch(format!(
                    "vehicle {id} starts at ({}, {}) but configuration {:?} places it at ({}, {sy})",
                    z.x,
                    z.y,
                    pair.initial,
                    origin_x + sx
                )));
            }
        }
        let v0 = self.fleet[0].initial.v;
        if self.fleet.iter().any(|m| m.initial.v != v0 || m.initial.psi != 0.0) {
            return Err(Error::Scenario("fleet must start aligned with the road at a common speed".into()));
        }
        Ok(ManeuverRequest {
            initial,
            target,
            road: self.road,
            fleet: self.fleet.iter().map(|m| (m.vehicle_id, m.params)).collect(),
            origin_x,
            obstacles: self.obstacles.clone(),
            initial_speed: Some(v0),
        })
    }

    pub fn pair_requests(&self) -> Result<Vec<PairRequest>> {
        self.pairs
            .iter()
            .map(|p| {
                Ok(PairRequest { initial_name: p.initial.clone(), target_name: p.target.clone(), request: self.request(p)? })
            })
            .collect()
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { rho_grid: self.rho_grid.clone(), max_entries: self.max_entries, threads: None }
    }
}
