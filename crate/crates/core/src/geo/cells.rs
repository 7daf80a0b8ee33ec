//! Cell geodata and leaked-field observations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeoError, GeoPoint, MAX_NUMEROLOGY, MAX_TA_INDEX};

/// One row of the cell database CSV
/// (`cell_id,pci,lat,lon,boresight_deg,beam_count,mu`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: u32,
    pub pci: u16,
    pub lat: f64,
    pub lon: f64,
    pub boresight_deg: f64,
    pub beam_count: u16,
    pub mu: u8,
}

impl CellRecord {
    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }

    fn validate(&self) -> Result<(), GeoError> {
        let bad = |msg: String| Err(GeoError::Database(format!("cell {}: {msg}", self.cell_id)));
        if !self.position().is_valid() {
            return bad(format!("invalid coordinates ({}, {})", self.lat, self.lon));
        }
        if !(0.0..=360.0).contains(&self.boresight_deg) {
            return bad(format!("boresight {} outside 0-360", self.boresight_deg));
        }
        if self.beam_count == 0 || self.beam_count > 64 || !self.beam_count.is_power_of_two() {
            return bad(format!(
                "beam_count {} is not a power of two in 1-64",
                self.beam_count
            ));
        }
        if self.mu > MAX_NUMEROLOGY {
            return bad(format!("numerology {} outside 0-{MAX_NUMEROLOGY}", self.mu));
        }
        Ok(())
    }
}

/// Per-cell lookup from beam-indication ids to SSB beam indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBeamMap {
    #[serde(default)]
    pub tci: BTreeMap<u8, u16>,
    #[serde(default)]
    pub spatial_relation: BTreeMap<u8, u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDb {
    cells: BTreeMap<u32, CellRecord>,
    beams: BTreeMap<u32, CellBeamMap>,
    /// Radius of the coverage disk used when nothing else narrows a fix.
    pub default_radius_m: f64,
}

impl CellDb {
    pub fn new(cells: impl IntoIterator<Item = CellRecord>) -> Result<Self, GeoError> {
        let mut map = BTreeMap::new();
        for c in cells {
            c.validate()?;
            let id = c.cell_id;
            if map.insert(id, c).is_some() {
                return Err(GeoError::Database(format!("duplicate cell_id {id}")));
            }
        }
        Ok(Self {
            cells: map,
            beams: BTreeMap::new(),
            default_radius_m: super::DEFAULT_CELL_RADIUS_M,
        })
    }

    pub fn from_csv(text: &str) -> Result<Self, GeoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let cells = rdr
            .deserialize()
            .collect::<Result<Vec<CellRecord>, _>>()
            .map_err(|e| GeoError::Database(e.to_string()))?;
        Self::new(cells)
    }

    pub fn load_csv(path: &Path) -> Result<Self, GeoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeoError::Database(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    /// Attaches a beam map: JSON object keyed by cell id.
    pub fn with_beam_json(mut self, text: &str) -> Result<Self, GeoError> {
        let beams: BTreeMap<u32, CellBeamMap> =
            serde_json::from_str(text).map_err(|e| GeoError::Database(format!("beam map: {e}")))?;
        for (id, m) in &beams {
            let cell = self.get(*id)?;
            if let Some(b) = m
                .tci
                .values()
                .chain(m.spatial_relation.values())
                .find(|&&b| b >= cell.beam_count)
            {
                return Err(GeoError::Database(format!(
                    "beam map for cell {id} names beam {b} of {}",
                    cell.beam_count
                )));
            }
        }
        self.beams = beams;
        Ok(self)
    }

    pub fn get(&self, cell_id: u32) -> Result<&CellRecord, GeoError> {
        self.cells
            .get(&cell_id)
            .ok_or(GeoError::UnknownCell(cell_id))
    }

    pub fn by_pci(&self, pci: u16) -> Option<&CellRecord> {
        self.cells.values().find(|c| c.pci == pci)
    }

    pub fn beam_map(&self, cell_id: u32) -> Option<&CellBeamMap> {
        self.beams.get(&cell_id)
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.values()
    }

    /// Projection origin shared by whole-database computations: the cell
    /// with the lowest id.
    pub fn reference_point(&self) -> Option<GeoPoint> {
        self.cells.values().next().map(CellRecord::position)
    }
}

impl Default for CellDb {
    fn default() -> Self {
        Self::from_csv(crate::fixtures::CELLS_DEFAULT_CSV)
            .and_then(|db| db.with_beam_json(crate::fixtures::BEAMS_DEFAULT_JSON))
            .expect("shipped cell database is valid")
    }
}

/// A timestamped set of leaked fields attributed to one UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationEvent {
    pub time_s: f64,
    /// Linkage key, e.g. the observed C-RNTI.
    pub ue_ref: String,
    pub cell_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ta_index: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssb_index: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tci_state_id: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_relation_id: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_fields: BTreeMap<String, serde_json::Value>,
}

impl ObservationEvent {
    pub fn new(time_s: f64, ue_ref: impl Into<String>, cell_id: u32) -> Self {
        Self {
            time_s,
            ue_ref: ue_ref.into(),
            cell_id,
            ta_index: None,
            ssb_index: None,
            tci_state_id: None,
            spatial_relation_id: None,
            extra_fields: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.time_s.is_finite() {
            return Err(GeoError::OutOfRange {
                what: "time_s",
                value: self.time_s,
            });
        }
        if let Some(ta) = self.ta_index {
            if ta > MAX_TA_INDEX {
                return Err(GeoError::OutOfRange {
                    what: "ta_index",
                    value: ta as f64,
                });
            }
        }
        if let Some(ssb) = self.ssb_index {
            if ssb > 63 {
                return Err(GeoError::OutOfRange {
                    what: "ssb_index",
                    value: ssb as f64,
                });
            }
        }
        Ok(())
    }

    /// Parses JSON lines, skipping blank lines.
    pub fn parse_jsonl(text: &str) -> Result<Vec<ObservationEvent>, GeoError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let ev: ObservationEvent = serde_json::from_str(l)
                    .map_err(|e| GeoError::Database(format!("observation line {}: {e}", i + 1)))?;
                ev.validate()?;
                Ok(ev)
            })
            .collect()
    }
}
