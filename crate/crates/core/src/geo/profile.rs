//! Long-term dwell profiling: where a UE spends its nights and working hours.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    reconstruct_trajectory, CellDb, GeoError, GeoPoint, LocalFrame, ObservationEvent,
    TrajectoryConfig,
};

pub const RESIDENCE_LABEL: &str = "residence-candidate";
pub const WORKPLACE_LABEL: &str = "workplace-candidate";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub grid_m: f64,
    pub min_days: u32,
    /// Added to event times to obtain local time.
    pub tz_offset_s: i64,
    /// Local hours `[start, end)`.
    pub night_hours: (u8, u8),
    pub work_hours: (u8, u8),
    /// A sample accounts for the time until the next one, at most this long.
    pub max_gap_s: f64,
    pub trajectory: TrajectoryConfig,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            grid_m: 100.0,
            min_days: 3,
            tz_offset_s: 0,
            night_hours: (0, 6),
            work_hours: (9, 17),
            max_gap_s: 3600.0,
            trajectory: TrajectoryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellCluster {
    pub grid_x: i64,
    pub grid_y: i64,
    /// Centre of the grid cell.
    pub center: GeoPoint,
    pub night_s: f64,
    pub work_s: f64,
    pub other_s: f64,
    pub total_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellProfile {
    pub ue_ref: String,
    pub origin: GeoPoint,
    pub grid_m: f64,
    pub days_observed: usize,
    /// Sorted by total dwell, longest first.
    pub clusters: Vec<DwellCluster>,
}

impl DwellProfile {
    pub fn labelled(&self, label: &str) -> Option<&DwellCluster> {
        self.clusters
            .iter()
            .find(|c| c.labels.iter().any(|l| l == label))
    }
}

#[derive(Clone, Copy)]
enum Bucket {
    Night,
    Work,
    Other,
}

fn bucket(hour: u8, cfg: &ProfileConfig) -> Bucket {
    let inside = |(a, b): (u8, u8)| {
        if a <= b {
            (a..b).contains(&hour)
        } else {
            hour >= a || hour < b
        }
    };
    if inside(cfg.night_hours) {
        Bucket::Night
    } else if inside(cfg.work_hours) {
        Bucket::Work
    } else {
        Bucket::Other
    }
}

/// Accumulates dwell per 100 m grid cell (configurable) and time-of-day
/// bucket, then labels the night and work maxima.
///
/// Centroids are quantized in a frame anchored at the database reference
/// cell. Dwell intervals that cross an hour boundary are split so each part
/// lands in its own bucket. Ties go to the lowest grid coordinate.
pub fn long_term_profile(
    events: &[ObservationEvent],
    db: &CellDb,
    cfg: &ProfileConfig,
) -> Result<DwellProfile, GeoError> {
    if events.is_empty() {
        return Err(GeoError::InsufficientData("no events".into()));
    }
    if cfg.grid_m.is_nan() || cfg.grid_m <= 0.0 {
        return Err(GeoError::OutOfRange {
            what: "grid_m",
            value: cfg.grid_m,
        });
    }
    let local = |t: f64| t + cfg.tz_offset_s as f64;
    let days: BTreeSet<i64> = events
        .iter()
        .map(|e| (local(e.time_s) / 86_400.0).floor() as i64)
        .collect();
    if days.len() < cfg.min_days as usize {
        return Err(GeoError::InsufficientData(format!(
            "{} distinct days observed, {} required",
            days.len(),
            cfg.min_days
        )));
    }

    let traj = reconstruct_trajectory(events, db, &cfg.trajectory)?;
    let origin = db
        .reference_point()
        .ok_or_else(|| GeoError::Database("empty cell database".into()))?;
    let frame = LocalFrame::new(origin);

    let mut acc: BTreeMap<(i64, i64), [f64; 3]> = BTreeMap::new();
    for (i, p) in traj.points.iter().enumerate() {
        let (x, y) = frame.to_local(p.region.centroid);
        let key = (
            (x / cfg.grid_m).floor() as i64,
            (y / cfg.grid_m).floor() as i64,
        );
        let slot = acc.entry(key).or_insert([0.0; 3]);
        let Some(next) = traj.points.get(i + 1) else {
            continue;
        };
        let mut t = local(p.time_s);
        let end = t + (next.time_s - p.time_s).min(cfg.max_gap_s);
        while t < end {
            let boundary = ((t / 3600.0).floor() + 1.0) * 3600.0;
            let stop = boundary.min(end);
            let hour = ((t / 3600.0).floor() as i64).rem_euclid(24) as u8;
            slot[bucket(hour, cfg) as usize] += stop - t;
            t = stop;
        }
    }

    let mut clusters: Vec<DwellCluster> = acc
        .into_iter()
        .map(|((gx, gy), [night_s, work_s, other_s])| DwellCluster {
            grid_x: gx,
            grid_y: gy,
            center: frame.to_geo(
                (gx as f64 + 0.5) * cfg.grid_m,
                (gy as f64 + 0.5) * cfg.grid_m,
            ),
            night_s,
            work_s,
            other_s,
            total_s: night_s + work_s + other_s,
            labels: Vec::new(),
        })
        .collect();
    // `clusters` is in grid order here, so the first maximum wins ties.
    let argmax = |f: fn(&DwellCluster) -> f64, cs: &[DwellCluster]| {
        cs.iter()
            .enumerate()
            .filter(|(_, c)| f(c) > 0.0)
            .fold(None::<(usize, f64)>, |best, (i, c)| match best {
                Some((_, v)) if v >= f(c) => best,
                _ => Some((i, f(c))),
            })
            .map(|(i, _)| i)
    };
    if let Some(i) = argmax(|c| c.night_s, &clusters) {
        clusters[i].labels.push(RESIDENCE_LABEL.into());
    }
    if let Some(i) = argmax(|c| c.work_s, &clusters) {
        clusters[i].labels.push(WORKPLACE_LABEL.into());
    }
    clusters.sort_by(|a, b| {
        b.total_s
            .total_cmp(&a.total_s)
            .then((a.grid_x, a.grid_y).cmp(&(b.grid_x, b.grid_y)))
    });
    Ok(DwellProfile {
        ue_ref: traj.ue_ref,
        origin,
        grid_m: cfg.grid_m,
        days_observed: days.len(),
        clusters,
    })
}
