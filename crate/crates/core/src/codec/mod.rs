//! Bit-exact MAC subheader, CE, and PDU codec.

mod ce;
mod pdu;
mod registry;

use thiserror::Error;

use crate::bits::BitError;

pub use ce::{
    BagField, CRntiCe, FieldBagCe, FieldSpan, LtmCellSwitchCe, LtmSecurity, MacCe, ShortBsrCe,
    SpCsiPucchCe, TaCommandCe, TaReportCe,
};
pub use pdu::{
    assemble_pdu, decode_ce, encode_ce, parse_pdu, MacPdu, MacSdu, MacSubPdu, MacSubheader,
    OrderingViolation, ParsedPdu, SubPduClass, SubPduPayload,
};
pub use registry::{
    CeKind, Direction, DirectionScope, LcidEntry, LcidRegistry, MAX_SDU_LCID, PADDING_LCID,
};

/// How reserved bits are treated while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Keep reserved bits as found so re-encoding reproduces the input.
    #[default]
    Lenient,
    /// Reject any set reserved bit.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("CE kind {0} has no registry entry")]
    UnknownCeKind(CeKind),
    #[error("lcid {lcid} is not assigned in {direction}")]
    UnknownLcid { lcid: u8, direction: Direction },
    #[error("{field} value {value:#x} exceeds {width} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        width: u32,
    },
    #[error("{kind} payload is {actual} bytes, expected {expected}")]
    LengthMismatch {
        kind: CeKind,
        expected: usize,
        actual: usize,
    },
    #[error("reserved bits set in {kind} payload")]
    NonZeroReservedBits { kind: CeKind },
    #[error("reserved subheader bits set at byte {offset}")]
    NonZeroSubheaderBits { offset: usize },
    #[error("PDU truncated at byte {offset}")]
    TruncatedPdu { offset: usize },
    #[error("target size {target} is below the {minimum}-byte minimum")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("{kind} is not valid in {direction}")]
    WrongDirection { kind: CeKind, direction: Direction },
    #[error("payload of {0} bytes does not fit a 16-bit length field")]
    PayloadTooLong(usize),
    #[error("invalid CE: {0}")]
    InvalidCe(String),
    #[error("invalid LCID registry: {0}")]
    RegistryInvalid(String),
    #[error(transparent)]
    Bits(#[from] BitError),
}
