//! Location inference from leaked cell, timing-advance, and beam fields.
//!
//! Everything here works in a local east/north plane (metres) obtained by an
//! equirectangular projection around a chosen origin, which is accurate to
//! well under a metre for the few-kilometre extents of a cell cluster.

mod cells;
mod profile;
mod region;
pub mod svg;
pub mod synth;
mod trajectory;
mod triangulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cells::{CellBeamMap, CellDb, CellRecord, ObservationEvent};
pub use profile::{
    long_term_profile, DwellCluster, DwellProfile, ProfileConfig, RESIDENCE_LABEL, WORKPLACE_LABEL,
};
pub use region::{estimate_region, RegionEstimate, RegionKind, DEFAULT_CELL_RADIUS_M};
pub use trajectory::{
    reconstruct_trajectory, MotionStep, Trajectory, TrajectoryConfig, TrajectoryPoint,
};
pub use triangulate::{triangulate, trilaterate_local, Fix};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Basic NR time unit Tc = 1 / (480000 * 4096) s.
pub const NR_TC_S: f64 = 1.0 / (480_000.0 * 4096.0);
pub const MAX_TA_INDEX: u16 = 16383;
pub const MAX_NUMEROLOGY: u8 = 4;
/// Mean Earth radius, m.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("SSB index {ssb} is beyond the {beams}-beam pattern of cell {cell_id}")]
    IndexBeyondBeamCount { ssb: u16, beams: u16, cell_id: u32 },
    #[error("cell {0} is not in the database")]
    UnknownCell(u32),
    #[error("observations have no common region")]
    InconsistentObservations,
    #[error("cell geometry is degenerate; {} candidate positions", candidates.len())]
    CollinearCells { candidates: Vec<GeoPoint> },
    #[error("need observations from at least {needed} distinct cells, got {got}")]
    TooFewCells { needed: usize, got: usize },
    #[error("observations disagree: {0}")]
    MixedObservations(String),
    #[error("events are not sorted by time")]
    Unsorted,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("cell database: {0}")]
    Database(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && self.lat.abs() <= 90.0
            && self.lon.abs() <= 180.0
    }
}

/// Equirectangular projection around a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    /// (east, north) in metres.
    pub fn to_local(&self, p: GeoPoint) -> (f64, f64) {
        let x = (p.lon - self.origin.lon).to_radians() * EARTH_RADIUS_M * self.cos_lat;
        let y = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + (y / EARTH_RADIUS_M).to_degrees(),
            lon: self.origin.lon + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees(),
        }
    }
}

/// Bearing in degrees clockwise from north, in [0, 360).
pub fn bearing_deg(dx: f64, dy: f64) -> f64 {
    normalize_deg(dx.atan2(dy).to_degrees())
}

pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Distance band implied by a timing-advance index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaDistance {
    pub d_center: f64,
    pub d_min: f64,
    pub d_max: f64,
}

/// Distance covered by one TA index step at numerology `mu`, in metres.
pub fn ta_step_m(mu: u8) -> f64 {
    16.0 * 64.0 * NR_TC_S * SPEED_OF_LIGHT / 2f64.powi(mu as i32 + 1)
}

/// Maps a TA index to a UE-to-cell distance: `ta * 16 * 64 * Tc * c / 2^(mu+1)`,
/// banded by half a step either side and clamped at zero.
pub fn ta_to_distance(ta_index: u16, mu: u8) -> Result<TaDistance, GeoError> {
    if ta_index > MAX_TA_INDEX {
        return Err(GeoError::OutOfRange {
            what: "ta_index",
            value: ta_index as f64,
        });
    }
    if mu > MAX_NUMEROLOGY {
        return Err(GeoError::OutOfRange {
            what: "numerology_mu",
            value: mu as f64,
        });
    }
    let step = ta_step_m(mu);
    let d_center = ta_index as f64 * step;
    Ok(TaDistance {
        d_center,
        d_min: (d_center - step / 2.0).max(0.0),
        d_max: d_center + step / 2.0,
    })
}

/// Azimuth interval `[start, start + width)` measured clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start_deg: f64,
    pub width_deg: f64,
}

impl Sector {
    pub const FULL: Sector = Sector {
        start_deg: 0.0,
        width_deg: 360.0,
    };

    pub fn is_full(&self) -> bool {
        self.width_deg >= 360.0
    }

    pub fn end_deg(&self) -> f64 {
        if self.is_full() {
            360.0
        } else {
            normalize_deg(self.start_deg + self.width_deg)
        }
    }

    pub fn bisector_deg(&self) -> f64 {
        normalize_deg(self.start_deg + self.width_deg / 2.0)
    }

    /// Inclusive of both edges, with `tol_deg` slack.
    pub fn contains(&self, bearing: f64, tol_deg: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let rel = normalize_deg(bearing - self.start_deg);
        rel <= self.width_deg + tol_deg || rel >= 360.0 - tol_deg
    }
}

/// Uniform beam partition: beam `i` is centred on `boresight + i * 360/beams`.
pub fn ssb_to_sector(ssb_index: u16, cell: &CellRecord) -> Result<Sector, GeoError> {
    if ssb_index >= cell.beam_count {
        return Err(GeoError::IndexBeyondBeamCount {
            ssb: ssb_index,
            beams: cell.beam_count,
            cell_id: cell.cell_id,
        });
    }
    if cell.beam_count == 1 {
        return Ok(Sector::FULL);
    }
    let width = 360.0 / cell.beam_count as f64;
    let center = cell.boresight_deg + ssb_index as f64 * width;
    Ok(Sector {
        start_deg: normalize_deg(center - width / 2.0),
        width_deg: width,
    })
}

/// Beam whose sector contains `bearing`.
pub fn beam_for_bearing(bearing: f64, cell: &CellRecord) -> u16 {
    if cell.beam_count <= 1 {
        return 0;
    }
    let width = 360.0 / cell.beam_count as f64;
    let rel = normalize_deg(bearing - cell.boresight_deg + width / 2.0);
    ((rel / width).floor() as u16).min(cell.beam_count - 1)
}
