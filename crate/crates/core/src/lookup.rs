//! Look-up table of precomputed reconfiguration maneuvers.
//!
//! For every configuration pair the table stores the feasible members of a
//! maneuver family, one per lane-switch fraction `rho`, indexed `1..=M` in
//! increasing `rho`. Configurations are keyed by a content hash so identical
//! configurations from different scenarios share an id.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formation::PlatoonConfiguration;
use crate::planner::{plan_maneuver, FleetTrajectory, ManeuverRequest, PlannerConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Default family size.
pub const DEFAULT_M: usize = 9;

pub type ConfigId = String;

/// `{0.1, 0.2, ..., 0.9}`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Content hash of the `(n_v, l, p)` triple: first 16 hex digits of SHA-256
/// over a canonical JSON encoding.
pub fn config_id(c: &PlatoonConfiguration) -> ConfigId {
    // +0.0 folds negative zero so that equal configurations hash equally
    let p: Vec<Vec<f64>> = c.p.iter().map(|r| r.iter().map(|v| v + 0.0).collect()).collect();
    let canon = serde_json::json!({ "n_v": c.n_v, "l": c.l, "p": p });
    let digest = Sha256::digest(canon.to_string().as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    /// Scenario names this configuration was registered under.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
    #[serde(flatten)]
    pub config: PlatoonConfiguration,
}

/// One member of a maneuver family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub index: usize,
    pub rho: f64,
    pub trajectory: FleetTrajectory,
}

/// The family stored for one configuration pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub initial: ConfigId,
    pub target: ConfigId,
    /// Planner settings the family was computed with (`rho` varies per entry).
    pub planner: PlannerConfig,
    pub maneuvers: Vec<TableEntry>,
    /// Discarded grid points and other build diagnostics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverTable {
    pub format_version: u32,
    pub configs: BTreeMap<ConfigId, ConfigRecord>,
    /// Sorted by `(initial, target)`.
    pub entries: Vec<PairEntry>,
}

impl Default for ManeuverTable {
    fn default() -> Self {
        ManeuverTable { format_version: FORMAT_VERSION, configs: BTreeMap::new(), entries: Vec::new() }
    }
}

/// A configuration pair to tabulate.
#[derive(Debug, Clone)]
pub struct PairRequest {
    pub initial_name: String,
    pub target_name: String,
    pub request: ManeuverRequest,
}

pub struct BuildOptions {
    pub rho_grid: Vec<f64>,
    pub max_entries: usize,
    /// Worker threads; `None` reads `PLATOON_THREADS` and falls back to the
    /// rayon default.
    pub threads: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { rho_grid: default_rho_grid(), max_entries: DEFAULT_M, threads: None }
    }
}

fn thread_count(opt: Option<usize>) -> Option<usize> {
    opt.or_else(|| std::env::var("PLATOON_THREADS").ok()?.parse().ok()).filter(|&n| n > 0)
}

/// Plans every `(pair, rho)` combination and collects the feasible maneuvers.
///
/// Jobs run in parallel but results are merged in key order, so the table is
/// identical for any thread count.
pub fn build_table(pairs: &[PairRequest], cfg: &PlannerConfig, opts: &BuildOptions) -> Result<ManeuverTable> {
    if opts.rho_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::InvalidConfiguration(format!("rho grid must lie in (0, 1), got {:?}", opts.rho_grid)));
    }
    if opts.max_entries == 0 {
        return Err(Error::InvalidConfiguration("table needs room for at least one maneuver".into()));
    }
    cfg.validate()?;
    let mut grid = opts.rho_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut table = ManeuverTable::default();
    let mut keys = Vec::with_capacity(pairs.len());
    for p in pairs {
        let ci = register(&mut table, &p.initial_name, &p.request.initial.config);
        let cf = register(&mut table, &p.target_name, &p.request.target.config);
        if keys.contains(&(ci.clone(), cf.clone())) {
            return Err(Error::InvalidConfiguration(format!(
                "configuration pair {}:{} listed twice",
                p.initial_name, p.target_name
            )));
        }
        keys.push((ci, cf));
    }

    // a pair without reconfiguration needs only one hold maneuver
    let jobs: Vec<(usize, f64)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let hold = p.request.initial == p.request.target;
            let g: &[f64] = if hold { &grid[..grid.len().min(1)] } else { &grid };
            g.iter().map(move |&r| (i, r))
        })
        .collect();

    let run = || -> Vec<Result<FleetTrajectory>> {
        jobs.par_iter()
            .map(|&(i, rho)| {
                let c = PlannerConfig { rho, ..cfg.clone() };
                plan_maneuver(&pairs[i].request, &c).map(|o| o.trajectory)
            })
            .collect()
    };
    let results = match thread_count(opts.threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut families: Vec<PairEntry> = keys
        .iter()
        .map(|(ci, cf)| PairEntry {
            initial: ci.clone(),
            target: cf.clone(),
            planner: cfg.clone(),
            maneuvers: Vec::new(),
            warnings: Vec::new(),
        })
        .collect();
    for (&(i, rho), res) in jobs.iter().zip(results) {
        let fam = &mut families[i];
        match res {
            Ok(traj) if fam.maneuvers.len() < opts.max_entries => {
                fam.maneuvers.push(TableEntry { index: fam.maneuvers.len() + 1, rho, trajectory: traj })
            }
            Ok(_) => fam.warnings.push(format!("rho {rho}: feasible but the family is full")),
            Err(e) => fam.warnings.push(format!("rho {rho}: {e}")),
        }
    }
    for fam in &mut families {
        if fam.maneuvers.is_empty() {
            fam.warnings.push("no feasible maneuver".into());
        }
    }
    families.sort_by(|a, b| (&a.initial, &a.target).cmp(&(&b.initial, &b.target)));
    table.entries = families;
    Ok(table)
}

fn register(table: &mut ManeuverTable, name: &str, c: &PlatoonConfiguration) -> ConfigId {
    let id = config_id(c);
    let rec = table.configs.entry(id.clone()).or_insert_with(|| ConfigRecord { names: Vec::new(), config: c.clone() });
    if !name.is_empty() && !rec.names.iter().any(|n| n == name) {
        rec.names.push(name.to_string());
        rec.names.sort();
    }
    id
}

impl ManeuverTable {
    /// Stored family for a pair, in index order. An unknown pair is an error;
    /// a known pair may have an empty family.
    pub fn query(&self, initial: &str, target: &str) -> Result<&[TableEntry]> {
        let ci = self.resolve(initial);
        let cf = self.resolve(target);
        self.entries
            .iter()
            .find(|e| Some(&e.initial) == ci.as_ref() && Some(&e.target) == cf.as_ref())
            .map(|e| e.maneuvers.as_slice())
            .ok_or_else(|| Error::KeyNotFound { initial: initial.to_string(), target: target.to_string() })
    }

    pub fn pair(&self, initial: &str, target: &str) -> Option<&PairEntry> {
        let ci = self.resolve(initial)?;
        let cf = self.resolve(target)?;
        self.entries.iter().find(|e| e.initial == ci && e.target == cf)
    }

    /// Accepts a config id or a registered name.
    pub fn resolve(&self, key: &str) -> Option<ConfigId> {
        if self.configs.contains_key(key) {
            return Some(key.to_string());
        }
        self.configs.iter().find(|(_, r)| r.names.iter().any(|n| n == key)).map(|(id, _)| id.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(self.format_version));
        }
        for (id, rec) in &self.configs {
            rec.config.validate()?;
            if *id != config_id(&rec.config) {
                return Err(Error::InvalidConfiguration(format!("config id {id} does not match its content")));
            }
        }
        for e in &self.entries {
            for id in [&e.initial, &e.target] {
                if !self.configs.contains_key(id) {
                    return Err(Error::InvalidConfiguration(format!("entry references unknown config {id}")));
                }
            }
            for (k, m) in e.maneuvers.iter().enumerate() {
                if m.index != k + 1 {
                    return Err(Error::InvalidConfiguration(format!(
                        "maneuver indices of {}:{} are not contiguous",
                        e.initial, e.target
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(s)?;
        if v.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(v.format_version));
        }
        let t: ManeuverTable = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleParams;
    use crate::formation::{AssignedConfiguration, RoadGeometry};

    fn lane(n: usize, gap: f64, lane_idx: usize, lanes: usize) -> PlatoonConfiguration {
        let mut l = vec![0u8; lanes];
        l[lane_idx] = 1;
        let mut p = vec![vec![0.0; n]; lanes];
        for k in 1..n {
            p[lane_idx][k] = gap;
        }
        PlatoonConfiguration::new(n, l, p).unwrap()
    }

    fn short_cfg() -> PlannerConfig {
        PlannerConfig { steps: 30, horizon: 4, ..PlannerConfig::default() }
    }

    fn hold_pair() -> PairRequest {
        let c = AssignedConfiguration::new(lane(2, 5.0, 0, 2), vec![1, 2]).unwrap();
        PairRequest {
            initial_name: "single".into(),
            target_name: "single".into(),
            request: ManeuverRequest {
                initial: c.clone(),
                target: c,
                road: RoadGeometry::new(2, 3.7).unwrap(),
                fleet: vec![(1, VehicleParams::default()), (2, VehicleParams::default())],
                origin_x: 0.0,
                obstacles: Vec::new(),
                initial_speed: None,
            },
        }
    }

    #[test]
    fn config_id_is_content_hash() {
        let a = lane(3, 0.3, 1, 3);
        let b = lane(3, 0.3, 1, 3);
        assert_eq!(config_id(&a), config_id(&b));
        assert_eq!(config_id(&a).len(), 16);
        assert_ne!(config_id(&a), config_id(&lane(3, 0.4, 1, 3)));
        let mut neg = a.clone();
        neg.p[0][0] = -0.0;
        assert_eq!(config_id(&a), config_id(&neg));
    }

    #[test]
    fn default_grid() {
        let g = default_rho_grid();
        assert_eq!(g.len(), DEFAULT_M);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[8], 0.9);
    }

    #[test]
    fn hold_pair_collapses_to_one_entry() {
        let t = build_table(&[hold_pair()], &short_cfg(), &BuildOptions::default()).unwrap();
        let fam = t.query("single", "single").unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].index, 1);
        assert_eq!(fam[0].rho, 0.1);
        assert!(fam[0].trajectory.audit(0.3).unwrap().passed());
    }

    #[test]
    fn overlapping_pair_gets_empty_family_and_warning() {
        let mut p = hold_pair();
        p.request.initial =
            AssignedConfiguration::new(lane(2, 0.1, 0, 2), vec![1, 2]).unwrap();
        p.initial_name = "tight".into();
        let t = build_table(&[p], &short_cfg(), &BuildOptions { rho_grid: vec![0.5], ..Default::default() }).unwrap();
        assert!(t.query("tight", "single").unwrap().is_empty());
        let e = t.pair("tight", "single").unwrap();
        assert!(e.warnings.iter().any(|w| w.contains("no feasible")));
    }

    #[test]
    fn unknown_key_is_distinct_from_empty_family() {
        let t = build_table(&[hold_pair()], &short_cfg(), &BuildOptions::default()).unwrap();
        assert!(matches!(t.query("single", "nowhere"), Err(Error::KeyNotFound { .. })));
        let id = config_id(&hold_pair().request.initial.config);
        assert_eq!(t.query(&id, &id).unwrap().len(), 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = build_table(&[hold_pair()], &short_cfg(), &BuildOptions::default()).unwrap();
        let s = t.to_json().unwrap();
        let back = ManeuverTable::from_json(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json().unwrap(), s);
        let a = &t.query("single", "single").unwrap()[0].trajectory.vehicles[0].states;
        let b = &back.query("single", "single").unwrap()[0].trajectory.vehicles[0].states;
        for (p, q) in a.iter().zip(b) {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.psi.to_bits(), q.psi.to_bits());
        }
    }

    #[test]
    fn rejects_other_format_versions() {
        let mut t = ManeuverTable::default();
        t.format_version = 7;
        let s = serde_json::to_string(&t).unwrap();
        assert!(matches!(ManeuverTable::from_json(&s), Err(Error::FormatVersion(7))));
    }

    #[test]
    fn rejects_bad_grid() {
        let o = BuildOptions { rho_grid: vec![0.0, 0.5], ..Default::default() };
        assert!(build_table(&[hold_pair()], &short_cfg(), &o).is_err());
    }

    #[test]
    fn thread_count_does_not_change_the_table() {
        let o1 = BuildOptions { rho_grid: vec![0.3, 0.6], threads: Some(1), ..Default::default() };
        let o2 = BuildOptions { threads: Some(2), ..BuildOptions { rho_grid: vec![0.3, 0.6], ..Default::default() } };
        let mut p = hold_pair();
        p.target_name = "spread".into();
        p.request.target = AssignedConfiguration::new(lane(2, 6.0, 0, 2), vec![1, 2]).unwrap();
        let a = build_table(&[p.clone()], &short_cfg(), &o1).unwrap();
        let b = build_table(&[p], &short_cfg(), &o2).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.query("single", "spread").unwrap().len(), 2);
    }
}
