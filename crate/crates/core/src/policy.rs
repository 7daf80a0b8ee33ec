//! Sensitivity records for the sixteen privacy-sensitive CE fields, the
//! M1-M4 protection lattice, and per-PDU mechanism selection.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CeKind, CodecError, FieldSpan, MacCe, MacPdu};
use crate::fields::{normalize_name, FieldId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("CE kind {0} has no field mapping")]
    UnmappedCeKind(CeKind),
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Protection tier.
///
/// Ordered as a diamond: M1 below everything, M4 above everything, M2
/// (integrity only) and M3 (confidentiality only) incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    M1,
    M2,
    M3,
    M4,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::M1, Mechanism::M2, Mechanism::M3, Mechanism::M4];

    /// Wire code, 1 to 4.
    pub fn code(self) -> u8 {
        match self {
            Mechanism::M1 => 1,
            Mechanism::M2 => 2,
            Mechanism::M3 => 3,
            Mechanism::M4 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Mechanism::M1),
            2 => Some(Mechanism::M2),
            3 => Some(Mechanism::M3),
            4 => Some(Mechanism::M4),
            _ => None,
        }
    }

    pub fn integrity(self) -> bool {
        matches!(self, Mechanism::M2 | Mechanism::M4)
    }

    pub fn confidentiality(self) -> bool {
        matches!(self, Mechanism::M3 | Mechanism::M4)
    }

    fn from_properties(integrity: bool, confidentiality: bool) -> Self {
        match (integrity, confidentiality) {
            (false, false) => Mechanism::M1,
            (true, false) => Mechanism::M2,
            (false, true) => Mechanism::M3,
            (true, true) => Mechanism::M4,
        }
    }

    /// Partial-order comparison: every property of `self` is also provided by `other`.
    pub fn le(self, other: Mechanism) -> bool {
        (!self.integrity() || other.integrity())
            && (!self.confidentiality() || other.confidentiality())
    }

    /// Least upper bound.
    pub fn join(self, other: Mechanism) -> Mechanism {
        Mechanism::from_properties(
            self.integrity() || other.integrity(),
            self.confidentiality() || other.confidentiality(),
        )
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.code())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" | "1" => Ok(Mechanism::M1),
            "M2" | "2" => Ok(Mechanism::M2),
            "M3" | "3" => Ok(Mechanism::M3),
            "M4" | "4" => Ok(Mechanism::M4),
            other => Err(format!("unknown mechanism {other:?}")),
        }
    }
}

/// One row of the risk and recommendation tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub field_name: String,
    pub tamper_risk_label: String,
    pub risk_stars: u8,
    pub confidentiality_stars: u8,
    pub integrity_stars: u8,
    /// Reported only; no mechanism rule consumes it.
    pub latency_stars: u8,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRegistry {
    records: Vec<SensitivityRecord>,
    index: HashMap<String, usize>,
}

fn lookup_key(name: &str) -> String {
    match FieldId::lookup(name) {
        Some(f) => normalize_name(f.canonical_name()),
        None => normalize_name(name),
    }
}

impl PolicyRegistry {
    pub fn new(records: Vec<SensitivityRecord>) -> Result<Self, PolicyError> {
        let mut index = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            for (col, v) in [
                ("risk_stars", r.risk_stars),
                ("confidentiality_stars", r.confidentiality_stars),
                ("integrity_stars", r.integrity_stars),
                ("latency_stars", r.latency_stars),
            ] {
                if !(1..=5).contains(&v) {
                    return Err(PolicyError::Invalid(format!(
                        "{}: {col}={v} outside 1..=5",
                        r.field_name
                    )));
                }
            }
            let key = lookup_key(&r.field_name);
            if key.is_empty() {
                return Err(PolicyError::Invalid("empty field name".into()));
            }
            if index.insert(key, i).is_some() {
                return Err(PolicyError::Invalid(format!(
                    "duplicate field {}",
                    r.field_name
                )));
            }
        }
        Ok(Self { records, index })
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let records =
            serde_json::from_str(text).map_err(|e| PolicyError::Invalid(e.to_string()))?;
        Self::new(records)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn records(&self) -> &[SensitivityRecord] {
        &self.records
    }

    pub fn classify_field(&self, name: &str) -> Result<&SensitivityRecord, PolicyError> {
        self.index
            .get(&lookup_key(name))
            .map(|&i| &self.records[i])
            .ok_or_else(|| PolicyError::UnknownField(name.to_string()))
    }

    pub fn record(&self, field: FieldId) -> Result<&SensitivityRecord, PolicyError> {
        self.classify_field(field.canonical_name())
    }

    /// Star rating and tamper-risk label.
    pub fn risk_rating(&self, name: &str) -> Result<(u8, &str), PolicyError> {
        let r = self.classify_field(name)?;
        Ok((r.risk_stars, r.tamper_risk_label.as_str()))
    }

    pub fn mechanism_for(&self, field: FieldId) -> Result<Mechanism, PolicyError> {
        Ok(self.record(field)?.mechanism)
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::from_json(crate::fixtures::POLICY_TABLE2_JSON).expect("shipped policy table is valid")
    }
}

/// Which sensitive fields each CE kind carries.
///
/// Field-bag CEs carry whatever fields they list, in addition to any mapped
/// here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CeFieldMap {
    map: BTreeMap<CeKind, Vec<FieldId>>,
}

impl CeFieldMap {
    pub fn new(
        map: BTreeMap<CeKind, Vec<FieldId>>,
        policy: &PolicyRegistry,
    ) -> Result<Self, PolicyError> {
        for fields in map.values() {
            for f in fields {
                policy.record(*f)?;
            }
        }
        Ok(Self { map })
    }

    pub fn from_json(text: &str, policy: &PolicyRegistry) -> Result<Self, PolicyError> {
        let map = serde_json::from_str(text).map_err(|e| PolicyError::Invalid(e.to_string()))?;
        Self::new(map, policy)
    }

    pub fn load(path: &Path, policy: &PolicyRegistry) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, policy)
    }

    pub fn fields(&self, kind: CeKind) -> Result<&[FieldId], PolicyError> {
        self.map
            .get(&kind)
            .map(Vec::as_slice)
            .ok_or(PolicyError::UnmappedCeKind(kind))
    }

    /// The sensitive field occurrences inside `ce`, with values and payload
    /// bit offsets.
    pub fn carried_spans(&self, ce: &MacCe) -> Result<Vec<FieldSpan>, PolicyError> {
        let mapped = self.fields(ce.kind())?;
        let spans = ce.field_spans()?;
        Ok(spans
            .into_iter()
            .filter(|s| matches!(ce, MacCe::FieldBag(_)) || mapped.contains(&s.field))
            .collect())
    }

    /// Every sensitive field a CE carries, mapped or bagged.
    pub fn carried_fields(&self, ce: &MacCe) -> Result<Vec<FieldId>, PolicyError> {
        let mut out: Vec<FieldId> = self.fields(ce.kind())?.to_vec();
        if let MacCe::FieldBag(bag) = ce {
            out.extend(bag.fields.iter().map(|f| f.field));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl Default for CeFieldMap {
    fn default() -> Self {
        Self::from_json(crate::fixtures::CE_FIELDS_JSON, &PolicyRegistry::default())
            .expect("shipped CE field map is valid")
    }
}

/// Weakest mechanism that covers every sensitive field in `ces`.
pub fn required_mechanism_for_ces<'a>(
    ces: impl IntoIterator<Item = &'a MacCe>,
    map: &CeFieldMap,
    policy: &PolicyRegistry,
) -> Result<Mechanism, PolicyError> {
    let mut m = Mechanism::M1;
    for ce in ces {
        for f in map.carried_fields(ce)? {
            m = m.join(policy.mechanism_for(f)?);
        }
    }
    Ok(m)
}

pub fn required_mechanism(
    pdu: &MacPdu,
    map: &CeFieldMap,
    policy: &PolicyRegistry,
) -> Result<Mechanism, PolicyError> {
    required_mechanism_for_ces(pdu.ces(), map, policy)
}
