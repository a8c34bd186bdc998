//! Platoon configurations `C(n_v, l, p)` and the reference trajectories
//! derived from an initial/final configuration pair.
//!
//! Lane indices are 1-based with lane 1 the right-most lane. Gaps in `p` are
//! bumper-to-bumper distances; the first entry of each row is the shift of the
//! lane's front-most vehicle behind the reference vehicle (negative = ahead).
//! The number of vehicles in an occupied lane is one plus the position of its
//! last positive gap; trailing zero gaps are padding.

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::error::{Error, Result};

pub type VehicleId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    pub n_lanes: usize,
    pub lane_width: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry { n_lanes: 3, lane_width: 3.7 }
    }
}

impl RoadGeometry {
    pub fn new(n_lanes: usize, lane_width: f64) -> Result<Self> {
        let road = RoadGeometry { n_lanes, lane_width };
        road.validate()?;
        Ok(road)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lanes == 0 || !(self.lane_width > 0.0) {
            return Err(Error::InvalidConfiguration(format!("bad road geometry {self:?}")));
        }
        Ok(())
    }

    /// Lateral coordinate of the centre of 1-based lane `lane`.
    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }

    /// 1-based lane containing lateral position `y`, clamped to the road.
    pub fn lane_of(&self, y: f64) -> usize {
        let j = (y / self.lane_width).floor() as i64 + 1;
        j.clamp(1, self.n_lanes as i64) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfiguration {
    pub n_v: usize,
    /// Lane occupancy indicator, one entry per lane.
    pub l: Vec<u8>,
    /// `n_l x n_v` matrix; row j is `[d_shift, d_1, ..., d_{n_v-1}]`.
    pub p: Vec<Vec<f64>>,
}

impl PlatoonConfiguration {
    pub fn new(n_v: usize, l: Vec<u8>, p: Vec<Vec<f64>>) -> Result<Self> {
        let cfg = PlatoonConfiguration { n_v, l, p };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfiguration(m));
        if self.n_v == 0 {
            return bad("n_v must be at least 1".into());
        }
        if self.l.is_empty() || self.l.len() != self.p.len() {
            return bad(format!(
                "occupancy has {} lanes but p has {} rows",
                self.l.len(),
                self.p.len()
            ));
        }
        if self.l.iter().any(|&o| o > 1) {
            return bad("occupancy entries must be 0 or 1".into());
        }
        if !self.l.contains(&1) {
            return bad("no lane is occupied".into());
        }
        for (j, row) in self.p.iter().enumerate() {
            if row.len() != self.n_v {
                return bad(format!("row {} has {} entries, expected {}", j + 1, row.len(), self.n_v));
            }
            if row.iter().any(|d| !d.is_finite()) {
                return bad(format!("row {} has non-finite entries", j + 1));
            }
            if self.l[j] == 1 {
                if let Some(g) = row[1..].iter().find(|&&g| g < 0.0) {
                    return bad(format!("lane {} has negative gap {g}, footprints overlap", j + 1));
                }
            }
        }
        Ok(())
    }

    pub fn n_lanes(&self) -> usize {
        self.l.len()
    }

    /// Right-most occupied lane (1-based).
    pub fn reference_lane(&self) -> usize {
        self.l.iter().position(|&o| o == 1).map(|j| j + 1).unwrap_or(1)
    }

    /// Vehicles per lane; zero for unoccupied lanes.
    pub fn lane_counts(&self) -> Vec<usize> {
        self.p
            .iter()
            .zip(&self.l)
            .map(|(row, &occ)| {
                if occ == 0 {
                    0
                } else {
                    1 + row[1..].iter().rposition(|&g| g > 0.0).map(|k| k + 1).unwrap_or(0)
                }
            })
            .collect()
    }

    pub fn vehicle_count(&self) -> usize {
        self.lane_counts().iter().sum()
    }

    /// Rebuilds a configuration from slot coordinates produced by [`expand`].
    pub fn from_positions(
        positions: &[(f64, f64)],
        n_v: usize,
        road: &RoadGeometry,
        params: &VehicleParams,
    ) -> Result<Self> {
        let mut lanes: Vec<Vec<f64>> = vec![Vec::new(); road.n_lanes];
        for &(x, y) in positions {
            lanes[road.lane_of(y) - 1].push(x);
        }
        for lane in &mut lanes {
            lane.sort_by(|a, b| b.total_cmp(a));
        }
        let ref_lane = lanes
            .iter()
            .position(|lane| !lane.is_empty())
            .ok_or_else(|| Error::InvalidConfiguration("no vehicles".into()))?;
        let front_ref = lanes[ref_lane][0];
        let mut l = vec![0u8; road.n_lanes];
        let mut p = vec![vec![0.0; n_v]; road.n_lanes];
        for (j, lane) in lanes.iter().enumerate() {
            if lane.is_empty() {
                continue;
            }
            if lane.len() > n_v {
                return Err(Error::InvalidConfiguration(format!(
                    "lane {} holds {} vehicles but n_v is {n_v}",
                    j + 1,
                    lane.len()
                )));
            }
            l[j] = 1;
            p[j][0] = front_ref - lane[0];
            for k in 1..lane.len() {
                p[j][k] = lane[k - 1] - lane[k] - params.len;
            }
        }
        Self::new(n_v, l, p)
    }
}

/// Slot coordinates of a configuration.
///
/// The origin is the centre of gravity of the rear-most vehicle in the
/// right-most occupied lane. Slots are ordered reference lane front-to-rear,
/// then the remaining lanes in increasing index, each front-to-rear.
pub fn expand(
    cfg: &PlatoonConfiguration,
    road: &RoadGeometry,
    params: &VehicleParams,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if cfg.n_lanes() > road.n_lanes {
        return Err(Error::InvalidConfiguration(format!(
            "configuration spans {} lanes but the road has {}",
            cfg.n_lanes(),
            road.n_lanes
        )));
    }
    let counts = cfg.lane_counts();
    let spacing = |j: usize, k: usize| cfg.p[j][k] + params.len;
    let ref_idx = cfg.reference_lane() - 1;
    // front of the reference lane relative to its rear-most vehicle
    let front_ref: f64 = (1..counts[ref_idx]).map(|k| spacing(ref_idx, k)).sum();

    let mut order: Vec<usize> = vec![ref_idx];
    order.extend((0..cfg.n_lanes()).filter(|&j| j != ref_idx && counts[j] > 0));

    let mut out = Vec::with_capacity(cfg.vehicle_count());
    for j in order {
        let y = road.lane_center(j + 1);
        let mut x = front_ref - if j == ref_idx { 0.0 } else { cfg.p[j][0] };
        out.push((x, y));
        for k in 1..counts[j] {
            x -= spacing(j, k);
            out.push((x, y));
        }
    }
    Ok(out)
}

/// Constant-speed longitudinal reference: `T + 1` samples starting at `x0`.
pub fn integrate_ref(x0: f64, v_max: f64, steps: usize, dt: f64) -> Vec<f64> {
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = x0;
    xs.push(x);
    for _ in 0..steps {
        x += v_max * dt;
        xs.push(x);
    }
    xs
}

/// A configuration together with the vehicle occupying each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedConfiguration {
    pub config: PlatoonConfiguration,
    /// `vehicle_ids[k]` occupies slot `k` of [`expand`].
    pub vehicle_ids: Vec<VehicleId>,
}

impl AssignedConfiguration {
    pub fn new(config: PlatoonConfiguration, vehicle_ids: Vec<VehicleId>) -> Result<Self> {
        let a = AssignedConfiguration { config, vehicle_ids };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let count = self.config.vehicle_count();
        if self.vehicle_ids.len() != count {
            return Err(Error::InvalidConfiguration(format!(
                "{} vehicle ids for {count} slots",
                self.vehicle_ids.len()
            )));
        }
        let mut ids = self.vehicle_ids.clone();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfiguration("duplicate vehicle id".into()));
        }
        Ok(())
    }

    /// Slot coordinates keyed by vehicle id.
    pub fn positions(
        &self,
        road: &RoadGeometry,
        params: &VehicleParams,
    ) -> Result<Vec<(VehicleId, (f64, f64))>> {
        let coords = expand(&self.config, road, params)?;
        Ok(self.vehicle_ids.iter().copied().zip(coords).collect())
    }

    fn position_of(
        &self,
        id: VehicleId,
        road: &RoadGeometry,
        params: &VehicleParams,
    ) -> Result<(f64, f64)> {
        self.positions(road, params)?
            .into_iter()
            .find(|(v, _)| *v == id)
            .map(|(_, p)| p)
            .ok_or_else(|| {
                Error::ConfigurationMismatch(format!("vehicle {id} has no slot in configuration"))
            })
    }
}

/// How the final configuration is placed longitudinally after the lane
/// switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalAnchor {
    /// Longitudinal references keep following the initial configuration for
    /// the whole maneuver; only the lateral reference switches.
    Initial,
    /// After the switch, longitudinal references follow the final
    /// configuration translated so that its mean longitudinal position matches
    /// the initial configuration's.
    #[default]
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub vehicle_id: VehicleId,
    pub states: Vec<VehicleState>,
}

impl ReferenceTrajectory {
    /// Reference at step `k`, holding the final sample past the end.
    pub fn at(&self, k: usize) -> VehicleState {
        self.states[k.min(self.states.len() - 1)]
    }

    /// Reference at step `k`; past the end the last sample keeps moving at
    /// its reference speed.
    pub fn extended(&self, k: usize, dt: f64) -> VehicleState {
        let last = self.states.len() - 1;
        let mut z = self.at(k);
        if k > last {
            z.x += (k - last) as f64 * z.v * dt;
        }
        z
    }
}

/// Inputs for [`build_reference`].
#[derive(Debug, Clone)]
pub struct ReferenceSpec<'a> {
    pub initial: &'a AssignedConfiguration,
    pub target: &'a AssignedConfiguration,
    /// One switching fraction per vehicle (fleet order) or a single shared value.
    pub rho: &'a [f64],
    pub v_max: f64,
    pub steps: usize,
    pub dt: f64,
    pub road: &'a RoadGeometry,
    pub params: &'a VehicleParams,
    /// Longitudinal offset added to the initial configuration's slots.
    pub origin_x: f64,
    pub anchor: FinalAnchor,
}

/// Index of the last step that still uses the initial lateral reference.
pub fn switch_index(rho: f64, steps: usize) -> usize {
    // guard against products like 0.29 * 100 = 28.999999999999996
    ((rho * steps as f64) + 1e-9).floor() as usize
}

/// Reference trajectories for every vehicle in `fleet` order.
pub fn build_reference(spec: &ReferenceSpec<'_>, fleet: &[VehicleId]) -> Result<Vec<ReferenceTrajectory>> {
    spec.initial.validate()?;
    spec.target.validate()?;
    let ni = spec.initial.vehicle_ids.len();
    let nf = spec.target.vehicle_ids.len();
    if ni != nf {
        return Err(Error::ConfigurationMismatch(format!(
            "initial configuration has {ni} vehicles, final has {nf}"
        )));
    }
    if fleet.len() != ni {
        return Err(Error::ConfigurationMismatch(format!(
            "fleet has {} vehicles, configurations have {ni}",
            fleet.len()
        )));
    }
    if spec.rho.len() != 1 && spec.rho.len() != fleet.len() {
        return Err(Error::ConfigurationMismatch("one rho or one per vehicle required".into()));
    }
    if spec.rho.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::InvalidConfiguration(format!("rho must lie in (0, 1), got {:?}", spec.rho)));
    }
    if !(spec.dt > 0.0) {
        return Err(Error::InvalidConfiguration("dt must be positive".into()));
    }

    let init: Vec<(f64, f64)> = fleet
        .iter()
        .map(|&id| spec.initial.position_of(id, spec.road, spec.params))
        .collect::<Result<_>>()?;
    let fin: Vec<(f64, f64)> = fleet
        .iter()
        .map(|&id| spec.target.position_of(id, spec.road, spec.params))
        .collect::<Result<_>>()?;

    let n = fleet.len() as f64;
    let mean_init = init.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_fin = fin.iter().map(|p| p.0).sum::<f64>() / n;
    let shift = mean_init - mean_fin;

    Ok(fleet
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let rho = if spec.rho.len() == 1 { spec.rho[0] } else { spec.rho[i] };
            let ks = switch_index(rho, spec.steps);
            let x0 = init[i].0 + spec.origin_x;
            let xs_init = integrate_ref(x0, spec.v_max, spec.steps, spec.dt);
            let xs_fin = match spec.anchor {
                FinalAnchor::Initial => xs_init.clone(),
                FinalAnchor::Centroid => {
                    integrate_ref(fin[i].0 + shift + spec.origin_x, spec.v_max, spec.steps, spec.dt)
                }
            };
            let states = (0..=spec.steps)
                .map(|t| {
                    let (x, y) = if t <= ks { (xs_init[t], init[i].1) } else { (xs_fin[t], fin[i].1) };
                    VehicleState::new(x, y, 0.0, spec.v_max)
                })
                .collect();
            ReferenceTrajectory { vehicle_id: id, states }
        })
        .collect())
}
