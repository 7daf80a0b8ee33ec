//! LCID assignments for the CE kinds the codec understands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CodecError;

/// Highest LCID that carries a logical-channel SDU.
pub const MAX_SDU_LCID: u8 = 32;
/// LCID of a padding sub-PDU.
pub const PADDING_LCID: u8 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Dl,
    Ul,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Dl => f.write_str("dl"),
            Direction::Ul => f.write_str("ul"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dl" | "downlink" => Ok(Direction::Dl),
            "ul" | "uplink" => Ok(Direction::Ul),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionScope {
    Dl,
    Ul,
    Both,
}

impl DirectionScope {
    pub fn covers(self, dir: Direction) -> bool {
        matches!(
            (self, dir),
            (DirectionScope::Both, _)
                | (DirectionScope::Dl, Direction::Dl)
                | (DirectionScope::Ul, Direction::Ul)
        )
    }
}

/// The closed set of CE kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeKind {
    Crnti,
    TaReport,
    SpCsiPucch,
    LtmCellSwitch,
    TaCommand,
    ShortBsr,
    FieldBag,
}

impl CeKind {
    pub const ALL: [CeKind; 7] = [
        CeKind::Crnti,
        CeKind::TaReport,
        CeKind::SpCsiPucch,
        CeKind::LtmCellSwitch,
        CeKind::TaCommand,
        CeKind::ShortBsr,
        CeKind::FieldBag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CeKind::Crnti => "crnti",
            CeKind::TaReport => "ta_report",
            CeKind::SpCsiPucch => "sp_csi_pucch",
            CeKind::LtmCellSwitch => "ltm_cell_switch",
            CeKind::TaCommand => "ta_command",
            CeKind::ShortBsr => "short_bsr",
            CeKind::FieldBag => "field_bag",
        }
    }

    /// Payload size for kinds whose layout has no optional parts.
    pub fn intrinsic_length(self) -> Option<usize> {
        match self {
            CeKind::Crnti | CeKind::TaReport => Some(2),
            CeKind::TaCommand | CeKind::ShortBsr => Some(1),
            CeKind::SpCsiPucch | CeKind::LtmCellSwitch | CeKind::FieldBag => None,
        }
    }
}

impl fmt::Display for CeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        CeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| format!("unknown CE kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcidEntry {
    pub kind: CeKind,
    pub lcid: u8,
    pub direction: DirectionScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_length: Option<usize>,
}

/// Validated, immutable LCID table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcidRegistry {
    by_kind: BTreeMap<CeKind, LcidEntry>,
}

impl LcidRegistry {
    pub fn new(entries: Vec<LcidEntry>) -> Result<Self, CodecError> {
        let invalid = |msg: String| Err(CodecError::RegistryInvalid(msg));
        let mut by_kind = BTreeMap::new();
        for e in entries {
            if e.lcid <= MAX_SDU_LCID || e.lcid >= PADDING_LCID {
                return invalid(format!(
                    "{}: lcid {} collides with the SDU range 0-{MAX_SDU_LCID} or padding {PADDING_LCID}",
                    e.kind, e.lcid
                ));
            }
            if e.fixed_length != e.kind.intrinsic_length() {
                return invalid(format!(
                    "{}: fixed_length {:?} does not match the CE layout ({:?})",
                    e.kind,
                    e.fixed_length,
                    e.kind.intrinsic_length()
                ));
            }
            for dir in [Direction::Dl, Direction::Ul] {
                if !e.direction.covers(dir) {
                    continue;
                }
                if let Some(other) = by_kind
                    .values()
                    .find(|o: &&LcidEntry| o.lcid == e.lcid && o.direction.covers(dir))
                {
                    return invalid(format!(
                        "lcid {} assigned to both {} and {} in {dir}",
                        e.lcid, other.kind, e.kind
                    ));
                }
            }
            if by_kind.insert(e.kind, e.clone()).is_some() {
                return invalid(format!("{} listed more than once", e.kind));
            }
        }
        if let Some(missing) = CeKind::ALL.iter().find(|k| !by_kind.contains_key(k)) {
            return invalid(format!("no entry for {missing}"));
        }
        Ok(Self { by_kind })
    }

    pub fn from_json(text: &str) -> Result<Self, CodecError> {
        let entries: Vec<LcidEntry> =
            serde_json::from_str(text).map_err(|e| CodecError::RegistryInvalid(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, CodecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CodecError::RegistryInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn entry(&self, kind: CeKind) -> Result<&LcidEntry, CodecError> {
        self.by_kind
            .get(&kind)
            .ok_or(CodecError::UnknownCeKind(kind))
    }

    pub fn lookup(&self, lcid: u8, dir: Direction) -> Option<&LcidEntry> {
        self.by_kind
            .values()
            .find(|e| e.lcid == lcid && e.direction.covers(dir))
    }

    pub fn entries(&self) -> impl Iterator<Item = &LcidEntry> {
        self.by_kind.values()
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<&LcidEntry> = self.entries().collect();
        serde_json::to_string_pretty(&entries).expect("registry serializes")
    }
}

impl Default for LcidRegistry {
    fn default() -> Self {
        Self::from_json(crate::fixtures::LCID_DEFAULT_JSON).expect("shipped LCID registry is valid")
    }
}
