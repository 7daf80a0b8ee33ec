//! Per-timestep regions and the motion they imply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    bearing_deg, estimate_region, triangulate, CellDb, GeoError, GeoPoint, LocalFrame,
    ObservationEvent, RegionEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Events whose times fall in the same bucket are combined.
    pub bucket_s: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { bucket_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time_s: f64,
    pub region: RegionEstimate,
}

/// Movement between two consecutive centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionStep {
    pub from_time_s: f64,
    pub to_time_s: f64,
    pub distance_m: f64,
    pub speed_mps: f64,
    /// Absent when the centroid did not move.
    pub heading_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ue_ref: String,
    pub points: Vec<TrajectoryPoint>,
    pub motion: Vec<MotionStep>,
}

fn region_for_bucket(events: &[ObservationEvent], db: &CellDb) -> Result<RegionEstimate, GeoError> {
    // latest observation per cell
    let mut per_cell: BTreeMap<u32, ObservationEvent> = BTreeMap::new();
    for e in events {
        per_cell.insert(e.cell_id, e.clone());
    }
    if per_cell.len() == 1 {
        return estimate_region(per_cell.values().next().expect("one event"), db);
    }
    let mut group: Vec<ObservationEvent> = per_cell.into_values().collect();
    let t = group[0].time_s.floor();
    for e in &mut group {
        e.time_s = t;
    }
    match triangulate(&group, db) {
        Err(GeoError::CollinearCells { .. }) => {
            let mut best: Option<RegionEstimate> = None;
            for e in &group {
                let r = estimate_region(e, db)?;
                if best.as_ref().is_none_or(|b| r.area_m2 < b.area_m2) {
                    best = Some(r);
                }
            }
            Ok(best.expect("non-empty group"))
        }
        other => other,
    }
}

/// Estimates a region per time bucket and derives speed and heading from
/// consecutive centroids. Ambiguous multi-cell buckets fall back to the
/// smallest single-cell region.
pub fn reconstruct_trajectory(
    events: &[ObservationEvent],
    db: &CellDb,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory, GeoError> {
    let Some(first) = events.first() else {
        return Err(GeoError::InsufficientData("no events".into()));
    };
    if cfg.bucket_s.is_nan() || cfg.bucket_s <= 0.0 {
        return Err(GeoError::OutOfRange {
            what: "bucket_s",
            value: cfg.bucket_s,
        });
    }
    for w in events.windows(2) {
        if w[1].time_s < w[0].time_s {
            return Err(GeoError::Unsorted);
        }
    }
    if let Some(e) = events.iter().find(|e| e.ue_ref != first.ue_ref) {
        return Err(GeoError::MixedObservations(format!(
            "ue_ref {} and {}",
            first.ue_ref, e.ue_ref
        )));
    }

    let mut points = Vec::new();
    let mut start = 0;
    while start < events.len() {
        let bucket = (events[start].time_s / cfg.bucket_s).floor();
        let end = start
            + events[start..]
                .iter()
                .take_while(|e| (e.time_s / cfg.bucket_s).floor() == bucket)
                .count();
        let region = region_for_bucket(&events[start..end], db)?;
        points.push(TrajectoryPoint {
            time_s: events[start].time_s,
            region,
        });
        start = end;
    }

    let motion = points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let (dx, dy) = LocalFrame::new(a.region.centroid).to_local(b.region.centroid);
            let distance_m = dx.hypot(dy);
            let dt = b.time_s - a.time_s;
            MotionStep {
                from_time_s: a.time_s,
                to_time_s: b.time_s,
                distance_m,
                speed_mps: if dt > 0.0 { distance_m / dt } else { 0.0 },
                heading_deg: (distance_m > 1e-9).then(|| bearing_deg(dx, dy)),
            }
        })
        .collect();
    Ok(Trajectory {
        ue_ref: first.ue_ref.clone(),
        points,
        motion,
    })
}

impl Trajectory {
    pub fn centroids(&self) -> Vec<GeoPoint> {
        self.points.iter().map(|p| p.region.centroid).collect()
    }
}
