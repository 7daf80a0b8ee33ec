//! Noise-free synthetic observations with known ground truth.

use super::{
    beam_for_bearing, bearing_deg, ta_step_m, CellDb, CellRecord, GeoPoint, LocalFrame,
    ObservationEvent, MAX_TA_INDEX,
};

/// What a sniffer would read from `cell` for a UE at `ue`: the nearest TA
/// index and the beam covering the UE's bearing.
pub fn observe(cell: &CellRecord, ue: GeoPoint, time_s: f64, ue_ref: &str) -> ObservationEvent {
    let (x, y) = LocalFrame::new(cell.position()).to_local(ue);
    let ta = (x.hypot(y) / ta_step_m(cell.mu))
        .round()
        .min(MAX_TA_INDEX as f64) as u16;
    let mut e = ObservationEvent::new(time_s, ue_ref, cell.cell_id);
    e.ta_index = Some(ta);
    e.ssb_index = Some(beam_for_bearing(bearing_deg(x, y), cell));
    e
}

/// Positions along a straight line from `start` with constant velocity.
/// `heading_deg` is clockwise from north.
pub fn straight_walk(
    start: GeoPoint,
    heading_deg: f64,
    speed_mps: f64,
    dt_s: f64,
    steps: usize,
) -> Vec<(f64, GeoPoint)> {
    let f = LocalFrame::new(start);
    let (s, c) = heading_deg.to_radians().sin_cos();
    (0..steps)
        .map(|i| {
            let t = i as f64 * dt_s;
            let d = speed_mps * t;
            (t, f.to_geo(d * s, d * c))
        })
        .collect()
}

/// One observation per cell per position.
pub fn observe_track(
    cells: &[&CellRecord],
    track: &[(f64, GeoPoint)],
    ue_ref: &str,
) -> Vec<ObservationEvent> {
    track
        .iter()
        .flat_map(|&(t, p)| cells.iter().map(move |c| observe(c, p, t, ue_ref)))
        .collect()
}

/// A UE at `home` outside working hours and at `office` from 09:00 to 17:00
/// local time, sampled every `interval_s` over `days` days from `cells`.
/// The first sample is at local midnight of day zero.
#[allow(clippy::too_many_arguments)]
pub fn commuter(
    db: &CellDb,
    cell_ids: &[u32],
    home: GeoPoint,
    office: GeoPoint,
    days: u32,
    interval_s: u32,
    tz_offset_s: i64,
    ue_ref: &str,
) -> Vec<ObservationEvent> {
    let cells: Vec<&CellRecord> = cell_ids
        .iter()
        .map(|&id| db.get(id).expect("commuter cells exist"))
        .collect();
    let total = days as i64 * 86_400;
    let mut out = Vec::new();
    let mut local = 0i64;
    while local < total {
        let hour = (local % 86_400) / 3600;
        let at = if (9..17).contains(&hour) {
            office
        } else {
            home
        };
        let t = (local - tz_offset_s) as f64;
        out.extend(cells.iter().map(|c| observe(c, at, t, ue_ref)));
        local += interval_s as i64;
    }
    out
}
