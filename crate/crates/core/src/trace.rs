//! Per-step CSV traces (`t, vehicle_id, x, y, psi, v, a, delta`) and plot data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::formation::VehicleId;
use crate::planner::VehicleTrajectory;

/// One row. `a` and `delta` are the input applied from this state and are
/// empty on the final row of each vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub vehicle_id: VehicleId,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub a: Option<f64>,
    pub delta: Option<f64>,
}

/// Rows in time-major order, `t = k * dt`.
pub fn trace_rows(dt: f64, vehicles: &[VehicleTrajectory]) -> Vec<TraceRow> {
    let steps = vehicles.iter().map(|v| v.states.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for k in 0..steps {
        for v in vehicles {
            let Some(z) = v.states.get(k) else { continue };
            let u = v.inputs.get(k);
            rows.push(TraceRow {
                t: k as f64 * dt,
                vehicle_id: v.vehicle_id,
                x: z.x,
                y: z.y,
                psi: z.psi,
                v: z.v,
                a: u.map(|u| u.a),
                delta: u.map(|u| u.delta),
            });
        }
    }
    rows
}

pub fn write_trace(path: impl AsRef<Path>, dt: f64, vehicles: &[VehicleTrajectory]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in trace_rows(dt, vehicles) {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Trace(format!("{}: {kind:?}", path.display())),
    }
}

/// A trace read back, one trajectory per vehicle in order of first
/// appearance. Vehicle params are not stored in the CSV and come back as
/// the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub vehicles: Vec<VehicleTrajectory>,
}

pub fn parse_trace(rows: &[TraceRow]) -> Result<Trace> {
    let mut order = Vec::new();
    let mut by_id: BTreeMap<VehicleId, (Vec<f64>, VehicleTrajectory)> = BTreeMap::new();
    for (line, r) in rows.iter().enumerate() {
        let z = VehicleState::new(r.x, r.y, r.psi, r.v);
        if !z.is_finite() || !r.t.is_finite() {
            return Err(Error::Trace(format!("row {}: non-finite value", line + 1)));
        }
        let e = by_id.entry(r.vehicle_id).or_insert_with(|| {
            order.push(r.vehicle_id);
            let v = VehicleTrajectory { vehicle_id: r.vehicle_id, params: VehicleParams::default(), states: vec![], inputs: vec![] };
            (Vec::new(), v)
        });
        if e.1.states.len() > e.1.inputs.len() {
            return Err(Error::Trace(format!("row {}: vehicle {} continues after a row without input", line + 1, r.vehicle_id)));
        }
        e.0.push(r.t);
        e.1.states.push(z);
        match (r.a, r.delta) {
            (Some(a), Some(delta)) => e.1.inputs.push(ControlInput::new(a, delta)),
            (None, None) => {}
            _ => return Err(Error::Trace(format!("row {}: a and delta must both be present or both empty", line + 1))),
        }
    }
    let Some(first) = order.first() else {
        return Ok(Trace { dt: 0.0, vehicles: Vec::new() });
    };
    let times = by_id[first].0.clone();
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    for id in &order {
        let (t, v) = &by_id[id];
        if t != &times {
            return Err(Error::Trace(format!("vehicle {id} is sampled at different times")));
        }
        if v.inputs.len() + 1 != v.states.len() {
            return Err(Error::Trace(format!("vehicle {id}: the last row must have empty inputs")));
        }
    }
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) || (times.len() > 1 && !(dt > 0.0)) {
        return Err(Error::Trace("time column is not uniformly increasing".into()));
    }
    Ok(Trace { dt, vehicles: order.iter().map(|id| by_id.remove(id).unwrap().1).collect() })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "vehicle_id", "x", "y", "psi", "v", "a", "delta"] {
        return Err(Error::Trace(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    parse_trace(&rows)
}

/// One CSV per quantity (`x.csv`, `y.csv`, `psi.csv`, `v.csv`, `a.csv`,
/// `delta.csv`) with a `t` column and one column per vehicle.
pub fn write_plot_data(dir: impl AsRef<Path>, dt: f64, vehicles: &[VehicleTrajectory]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let steps = vehicles.iter().map(|v| v.states.len()).max().unwrap_or(0);
    type Pick = fn(&VehicleTrajectory, usize) -> Option<f64>;
    let panels: [(&str, Pick); 6] = [
        ("x", |v, k| v.states.get(k).map(|z| z.x)),
        ("y", |v, k| v.states.get(k).map(|z| z.y)),
        ("psi", |v, k| v.states.get(k).map(|z| z.psi)),
        ("v", |v, k| v.states.get(k).map(|z| z.v)),
        ("a", |v, k| v.inputs.get(k).map(|u| u.a)),
        ("delta", |v, k| v.inputs.get(k).map(|u| u.delta)),
    ];
    for (name, pick) in panels {
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        let mut header = vec!["t".to_string()];
        header.extend(vehicles.iter().map(|v| format!("vehicle_{}", v.vehicle_id)));
        w.write_record(&header)?;
        for k in 0..steps {
            let mut rec = vec![(k as f64 * dt).to_string()];
            rec.extend(vehicles.iter().map(|v| pick(v, k).map_or(String::new(), |x| x.to_string())));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<VehicleTrajectory> {
        (1..=2)
            .map(|id| VehicleTrajectory {
                vehicle_id: id,
                params: VehicleParams::default(),
                states: (0..4).map(|k| VehicleState::new(k as f64 * 1.1 + 0.1, id as f64 * 3.7 - 1.85, 1e-17, 11.0 / 3.0)).collect(),
                inputs: (0..3).map(|k| ControlInput::new(0.1 * k as f64, -1.0 / 3.0 * 0.01)).collect(),
            })
            .collect()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_trace(&p, 0.1, &sample()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,vehicle_id,x,y,psi,v,a,delta\n"));
        assert!(text.lines().last().unwrap().ends_with(",,"));
        let back = read_trace(&p).unwrap();
        assert!((back.dt - 0.1).abs() < 1e-15);
        assert_eq!(back.vehicles, sample());
    }

    #[test]
    fn malformed_traces_are_rejected() {
        let rows = trace_rows(0.1, &sample());
        let mut gap = rows.clone();
        gap.remove(2);
        assert!(parse_trace(&gap).is_err());
        let mut half = rows.clone();
        half[0].delta = None;
        assert!(parse_trace(&half).is_err());
        let mut skew = rows;
        skew[4].t += 0.05;
        assert!(parse_trace(&skew).is_err());
    }

    #[test]
    fn plot_data_has_one_column_per_vehicle() {
        let dir = tempfile::tempdir().unwrap();
        write_plot_data(dir.path(), 0.5, &sample()).unwrap();
        let v = std::fs::read_to_string(dir.path().join("v.csv")).unwrap();
        assert_eq!(v.lines().next().unwrap(), "t,vehicle_1,vehicle_2");
        assert_eq!(v.lines().count(), 5);
        let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(a.lines().last().unwrap(), "1.5,,");
    }
}
