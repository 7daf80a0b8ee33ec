//! Canonical catalogue of privacy-sensitive MAC CE fields.
//!
//! The sixteen names here are the keys shared by the codec (field-bag
//! wire codes, field extraction), the policy registry, and the attack
//! simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown field name: {0:?}")]
pub struct UnknownFieldName(pub String);

/// A privacy-sensitive field carried inside a MAC CE.
///
/// The discriminant is the field's wire code inside a field-bag CE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FieldId {
    CRnti = 0,
    TaCommand = 1,
    UeContentionResolutionIdentity = 2,
    SsbIndex = 3,
    SpatialRelationInfoId = 4,
    TciStateId = 5,
    Pci = 6,
    CellInfoId = 7,
    TagId = 8,
    ResourceServingCellId = 9,
    SrsResourceCellId = 10,
    LcgId = 11,
    ServingCellId = 12,
    CandidateCellId = 13,
    BwpId = 14,
    SrsResourceBwpId = 15,
}

impl FieldId {
    pub const ALL: [FieldId; 16] = [
        FieldId::CRnti,
        FieldId::TaCommand,
        FieldId::UeContentionResolutionIdentity,
        FieldId::SsbIndex,
        FieldId::SpatialRelationInfoId,
        FieldId::TciStateId,
        FieldId::Pci,
        FieldId::CellInfoId,
        FieldId::TagId,
        FieldId::ResourceServingCellId,
        FieldId::SrsResourceCellId,
        FieldId::LcgId,
        FieldId::ServingCellId,
        FieldId::CandidateCellId,
        FieldId::BwpId,
        FieldId::SrsResourceBwpId,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            FieldId::CRnti => "C-RNTI",
            FieldId::TaCommand => "TA Command",
            FieldId::UeContentionResolutionIdentity => "UE Contention Resolution Identity",
            FieldId::SsbIndex => "SSB Index",
            FieldId::SpatialRelationInfoId => "Spatial Relation Info ID",
            FieldId::TciStateId => "TCI State ID",
            FieldId::Pci => "PCI",
            FieldId::CellInfoId => "Cell Info ID",
            FieldId::TagId => "TAG ID",
            FieldId::ResourceServingCellId => "Resource Serving Cell ID",
            FieldId::SrsResourceCellId => "SRS Resource's Cell ID",
            FieldId::LcgId => "LCG ID",
            FieldId::ServingCellId => "Serving Cell ID",
            FieldId::CandidateCellId => "Candidate Cell ID",
            FieldId::BwpId => "BWP ID",
            FieldId::SrsResourceBwpId => "SRS Resource's BWP ID",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<FieldId> {
        FieldId::ALL.get(code as usize).copied()
    }

    /// Case- and punctuation-insensitive lookup.
    ///
    /// "Cell Info" (without the trailing ID) is accepted as an alias since
    /// the risk table uses both spellings for the same field.
    pub fn lookup(name: &str) -> Option<FieldId> {
        let key = normalize_name(name);
        if key == "cellinfo" {
            return Some(FieldId::CellInfoId);
        }
        FieldId::ALL
            .iter()
            .copied()
            .find(|f| normalize_name(f.canonical_name()) == key)
    }
}

/// Lowercases and strips everything that is not ASCII alphanumeric.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl FromStr for FieldId {
    type Err = UnknownFieldName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldId::lookup(s).ok_or_else(|| UnknownFieldName(s.to_string()))
    }
}

impl Serialize for FieldId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for FieldId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
