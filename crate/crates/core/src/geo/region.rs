//! Single-observation regions: cell disk, TA annulus, SSB sector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    bearing_deg, normalize_deg, ssb_to_sector, ta_to_distance, CellDb, GeoError, GeoPoint,
    LocalFrame, ObservationEvent, Sector,
};

/// Coverage radius assumed when an observation carries no timing advance.
pub const DEFAULT_CELL_RADIUS_M: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    CellArea,
    Annulus,
    Sector,
    AnnulusSector,
    Intersection,
    Point,
}

/// Axis-aligned bounds in geographic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub south_west: GeoPoint,
    pub north_east: GeoPoint,
}

/// Where a UE may be, given what leaked.
///
/// Single-cell kinds are described by `center`, the radial band and an
/// optional azimuth interval (`az_max < az_min` when it wraps through north).
/// An `intersection` keeps its constituent regions in `parts`; `center` and
/// `r_max` then describe a bounding circle around the raster estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub kind: RegionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_id: Option<u32>,
    pub center: GeoPoint,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub az_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub az_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<GeoPoint>,
    pub area_m2: f64,
    pub centroid: GeoPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GeoBounds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<RegionEstimate>,
}

impl RegionEstimate {
    /// Builds a single-cell region from a radial band and optional sector.
    pub fn single_cell(
        cell_id: u32,
        center: GeoPoint,
        r_min: f64,
        r_max: f64,
        sector: Option<Sector>,
        has_ta: bool,
    ) -> Self {
        let sector = sector.filter(|s| !s.is_full());
        let kind = match (has_ta, sector.is_some()) {
            (true, true) => RegionKind::AnnulusSector,
            (true, false) => RegionKind::Annulus,
            (false, true) => RegionKind::Sector,
            (false, false) => RegionKind::CellArea,
        };
        let fraction = sector.map_or(1.0, |s| s.width_deg / 360.0);
        let area_m2 = PI * (r_max * r_max - r_min * r_min) * fraction;
        let centroid = match sector {
            None => center,
            Some(s) => {
                let alpha = (s.width_deg / 2.0).to_radians();
                let rho = if r_max - r_min > 1e-12 {
                    2.0 / 3.0 * (r_max.powi(3) - r_min.powi(3)) / (r_max * r_max - r_min * r_min)
                } else {
                    r_max
                } * alpha.sin()
                    / alpha;
                let b = s.bisector_deg().to_radians();
                LocalFrame::new(center).to_geo(rho * b.sin(), rho * b.cos())
            }
        };
        Self {
            kind,
            cell_id: Some(cell_id),
            center,
            r_min,
            r_max,
            az_min: sector.map(|s| s.start_deg),
            az_max: sector.map(|s| s.end_deg()),
            point: None,
            area_m2,
            centroid,
            bounds: None,
            parts: Vec::new(),
        }
    }

    pub fn point(p: GeoPoint, parts: Vec<RegionEstimate>) -> Self {
        Self {
            kind: RegionKind::Point,
            cell_id: None,
            center: p,
            r_min: 0.0,
            r_max: 0.0,
            az_min: None,
            az_max: None,
            point: Some(p),
            area_m2: 0.0,
            centroid: p,
            bounds: None,
            parts,
        }
    }

    pub fn sector(&self) -> Option<Sector> {
        match (self.az_min, self.az_max) {
            (Some(a), Some(b)) => {
                let w = normalize_deg(b - a);
                Some(Sector {
                    start_deg: a,
                    width_deg: if w == 0.0 { 360.0 } else { w },
                })
            }
            _ => None,
        }
    }

    /// Membership test with `tol_m` metres of slack.
    pub fn contains(&self, p: GeoPoint, tol_m: f64) -> bool {
        match self.kind {
            RegionKind::Point => {
                let (x, y) = LocalFrame::new(self.center).to_local(p);
                x.hypot(y) <= tol_m
            }
            RegionKind::Intersection => self.parts.iter().all(|r| r.contains(p, tol_m)),
            _ => {
                let (x, y) = LocalFrame::new(self.center).to_local(p);
                self.contains_offset(x, y, tol_m)
            }
        }
    }

    /// Membership of an (east, north) offset from `center`; single-cell kinds only.
    pub(crate) fn contains_offset(&self, x: f64, y: f64, tol_m: f64) -> bool {
        let r = x.hypot(y);
        if r < self.r_min - tol_m || r > self.r_max + tol_m {
            return false;
        }
        match self.sector() {
            Some(s) if r > tol_m => s.contains(bearing_deg(x, y), (tol_m / r).to_degrees()),
            _ => true,
        }
    }
}

/// Region implied by a single observation.
///
/// A beam is taken from the SSB index, else from the TCI state or spatial
/// relation id through the cell's beam map. Ids missing from the map do not
/// refine the estimate.
pub fn estimate_region(event: &ObservationEvent, db: &CellDb) -> Result<RegionEstimate, GeoError> {
    event.validate()?;
    let cell = db.get(event.cell_id)?;
    let (r_min, r_max) = match event.ta_index {
        Some(ta) => {
            let d = ta_to_distance(ta, cell.mu)?;
            (d.d_min, d.d_max)
        }
        None => (0.0, db.default_radius_m),
    };
    let beams = db.beam_map(cell.cell_id);
    let mapped = [
        event
            .tci_state_id
            .and_then(|id| beams?.tci.get(&id).copied()),
        event
            .spatial_relation_id
            .and_then(|id| beams?.spatial_relation.get(&id).copied()),
    ];
    let mut beam = event.ssb_index;
    for m in mapped.into_iter().flatten() {
        match beam {
            Some(b) if b != m => {
                return Err(GeoError::MixedObservations(format!(
                    "cell {}: beam indications {b} and {m} disagree",
                    cell.cell_id
                )))
            }
            _ => beam = Some(m),
        }
    }
    let sector = beam.map(|b| ssb_to_sector(b, cell)).transpose()?;
    Ok(RegionEstimate::single_cell(
        cell.cell_id,
        cell.position(),
        r_min,
        r_max,
        sector,
        event.ta_index.is_some(),
    ))
}
