//! MAC PDU trees: subheaders, sub-PDUs, assembly, parsing, ordering checks.

use serde::{Deserialize, Serialize};

use super::ce::MacCe;
use super::registry::{Direction, LcidRegistry, MAX_SDU_LCID, PADDING_LCID};
use super::{CodecError, DecodeMode};

/// One subheader octet `R | F | LCID(6)`, plus an optional 8- or 16-bit L
/// field (16-bit when F is set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacSubheader {
    pub r_bit: bool,
    pub f_bit: bool,
    pub lcid: u8,
    pub length: Option<u16>,
}

impl MacSubheader {
    /// Subheader without an L field.
    pub fn fixed(lcid: u8) -> Self {
        Self {
            r_bit: false,
            f_bit: false,
            lcid,
            length: None,
        }
    }

    /// Subheader with the narrowest L field that fits `len`.
    pub fn variable(lcid: u8, len: usize) -> Result<Self, CodecError> {
        let length = u16::try_from(len).map_err(|_| CodecError::PayloadTooLong(len))?;
        Ok(Self {
            r_bit: false,
            f_bit: len > u8::MAX as usize,
            lcid,
            length: Some(length),
        })
    }

    pub fn encoded_len(&self) -> usize {
        match self.length {
            None => 1,
            Some(_) if self.f_bit => 3,
            Some(_) => 2,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), CodecError> {
        if self.lcid > 63 {
            return Err(CodecError::FieldOverflow {
                field: "lcid",
                value: self.lcid as u64,
                width: 6,
            });
        }
        out.push(((self.r_bit as u8) << 7) | ((self.f_bit as u8) << 6) | self.lcid);
        match self.length {
            None => {}
            Some(l) if self.f_bit => out.extend_from_slice(&l.to_be_bytes()),
            Some(l) => {
                let l = u8::try_from(l).map_err(|_| CodecError::FieldOverflow {
                    field: "length",
                    value: l as u64,
                    width: 8,
                })?;
                out.push(l);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SubPduPayload {
    Ce(MacCe),
    #[serde(with = "hex_bytes")]
    Sdu(Vec<u8>),
    /// Trailing padding octets; empty for a standalone padding subheader.
    #[serde(with = "hex_bytes")]
    Padding(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacSubPdu {
    pub subheader: MacSubheader,
    pub payload: SubPduPayload,
}

/// What a sub-PDU is, for ordering purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubPduClass {
    Ce,
    Sdu,
    Padding,
}

impl MacSubPdu {
    pub fn ce(ce: MacCe, registry: &LcidRegistry) -> Result<Self, CodecError> {
        let entry = registry.entry(ce.kind())?;
        let subheader = match entry.fixed_length {
            Some(_) => MacSubheader::fixed(entry.lcid),
            None => MacSubheader::variable(entry.lcid, ce.encode_payload()?.len())?,
        };
        Ok(Self {
            subheader,
            payload: SubPduPayload::Ce(ce),
        })
    }

    pub fn sdu(lcid: u8, data: Vec<u8>) -> Result<Self, CodecError> {
        if lcid > MAX_SDU_LCID {
            return Err(CodecError::InvalidCe(format!(
                "lcid {lcid} is not an SDU channel"
            )));
        }
        Ok(Self {
            subheader: MacSubheader::variable(lcid, data.len())?,
            payload: SubPduPayload::Sdu(data),
        })
    }

    /// A padding sub-PDU occupying exactly `total` octets (subheader included).
    pub fn padding(total: usize) -> Self {
        debug_assert!(total >= 1);
        Self {
            subheader: MacSubheader::fixed(PADDING_LCID),
            payload: SubPduPayload::Padding(vec![0; total.saturating_sub(1)]),
        }
    }

    pub fn class(&self) -> SubPduClass {
        match self.payload {
            SubPduPayload::Ce(_) => SubPduClass::Ce,
            SubPduPayload::Sdu(_) => SubPduClass::Sdu,
            SubPduPayload::Padding(_) => SubPduClass::Padding,
        }
    }

    pub fn encoded_len(&self) -> Result<usize, CodecError> {
        let body = match &self.payload {
            SubPduPayload::Ce(ce) => ce.encode_payload()?.len(),
            SubPduPayload::Sdu(d) | SubPduPayload::Padding(d) => d.len(),
        };
        Ok(self.subheader.encoded_len() + body)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), CodecError> {
        let body = match &self.payload {
            SubPduPayload::Ce(ce) => ce.encode_payload()?,
            SubPduPayload::Sdu(d) | SubPduPayload::Padding(d) => d.clone(),
        };
        if let Some(l) = self.subheader.length {
            if l as usize != body.len() {
                return Err(CodecError::InvalidCe(format!(
                    "subheader length {l} disagrees with {}-byte payload",
                    body.len()
                )));
            }
        }
        self.subheader.encode_into(out)?;
        out.extend_from_slice(&body);
        Ok(())
    }
}

/// An SDU handed to [`MacPdu::assemble`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacSdu {
    pub lcid: u8,
    pub data: Vec<u8>,
}

impl MacSdu {
    pub const DEFAULT_LCID: u8 = 1;

    pub fn new(lcid: u8, data: Vec<u8>) -> Self {
        Self { lcid, data }
    }
}

impl From<Vec<u8>> for MacSdu {
    fn from(data: Vec<u8>) -> Self {
        Self::new(Self::DEFAULT_LCID, data)
    }
}

/// A sub-PDU sitting where the direction's ordering rule forbids it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingViolation {
    pub index: usize,
    pub class: SubPduClass,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacPdu {
    pub direction: Direction,
    pub subpdus: Vec<MacSubPdu>,
}

/// Result of [`parse_pdu`]: the tree plus any ordering violations found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPdu {
    pub pdu: MacPdu,
    pub violations: Vec<OrderingViolation>,
}

impl MacPdu {
    /// Builds a PDU in the direction's canonical order: DL puts CEs first,
    /// UL puts them after the SDUs. With a `target_size` larger than the
    /// content, one trailing padding sub-PDU fills the remainder.
    pub fn assemble(
        direction: Direction,
        ces: &[MacCe],
        sdus: &[MacSdu],
        target_size: Option<usize>,
        registry: &LcidRegistry,
    ) -> Result<Self, CodecError> {
        let mut ce_subpdus = Vec::with_capacity(ces.len());
        for ce in ces {
            let entry = registry.entry(ce.kind())?;
            if !entry.direction.covers(direction) {
                return Err(CodecError::WrongDirection {
                    kind: ce.kind(),
                    direction,
                });
            }
            ce_subpdus.push(MacSubPdu::ce(ce.clone(), registry)?);
        }
        let sdu_subpdus = sdus
            .iter()
            .map(|s| MacSubPdu::sdu(s.lcid, s.data.clone()))
            .collect::<Result<Vec<_>, _>>()?;

        let mut subpdus = match direction {
            Direction::Dl => [ce_subpdus, sdu_subpdus].concat(),
            Direction::Ul => [sdu_subpdus, ce_subpdus].concat(),
        };
        let used = subpdus
            .iter()
            .map(|s| s.encoded_len())
            .sum::<Result<usize, _>>()?;
        if let Some(target) = target_size {
            if target < used {
                return Err(CodecError::TargetTooSmall {
                    target,
                    minimum: used,
                });
            }
            if target > used {
                subpdus.push(MacSubPdu::padding(target - used));
            }
        }
        Ok(Self { direction, subpdus })
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::new();
        for s in &self.subpdus {
            s.encode_into(&mut out)?;
        }
        Ok(out)
    }

    pub fn ces(&self) -> impl Iterator<Item = &MacCe> {
        self.subpdus.iter().filter_map(|s| match &s.payload {
            SubPduPayload::Ce(ce) => Some(ce),
            _ => None,
        })
    }

    /// DL: `CE* SDU* padding?`. UL: `SDU* CE* padding?`.
    pub fn ordering_violations(&self) -> Vec<OrderingViolation> {
        let mut out = Vec::new();
        let mut seen_sdu = false;
        let mut seen_ce = false;
        let mut seen_padding = false;
        for (index, s) in self.subpdus.iter().enumerate() {
            let class = s.class();
            let reason = if seen_padding {
                Some("sub-PDU after padding".to_string())
            } else {
                match (self.direction, class) {
                    (Direction::Dl, SubPduClass::Ce) if seen_sdu => {
                        Some("DL CE after an SDU".to_string())
                    }
                    (Direction::Ul, SubPduClass::Sdu) if seen_ce => {
                        Some("UL SDU after a CE".to_string())
                    }
                    _ => None,
                }
            };
            if let Some(reason) = reason {
                out.push(OrderingViolation {
                    index,
                    class,
                    reason,
                });
            }
            match class {
                SubPduClass::Ce => seen_ce = true,
                SubPduClass::Sdu => seen_sdu = true,
                SubPduClass::Padding => seen_padding = true,
            }
        }
        out
    }
}

/// Encodes a CE with its subheader.
pub fn encode_ce(ce: &MacCe, registry: &LcidRegistry) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    MacSubPdu::ce(ce.clone(), registry)?.encode_into(&mut out)?;
    Ok(out)
}

/// Decodes a CE body addressed by `lcid` in `direction`.
pub fn decode_ce(
    lcid: u8,
    direction: Direction,
    payload: &[u8],
    registry: &LcidRegistry,
    mode: DecodeMode,
) -> Result<MacCe, CodecError> {
    let entry = registry
        .lookup(lcid, direction)
        .ok_or(CodecError::UnknownLcid { lcid, direction })?;
    if let Some(fixed) = entry.fixed_length {
        if payload.len() != fixed {
            return Err(CodecError::LengthMismatch {
                kind: entry.kind,
                expected: fixed,
                actual: payload.len(),
            });
        }
    }
    MacCe::decode_payload(entry.kind, payload, mode)
}

pub fn assemble_pdu(
    direction: Direction,
    ces: &[MacCe],
    sdus: &[MacSdu],
    target_size: Option<usize>,
    registry: &LcidRegistry,
) -> Result<Vec<u8>, CodecError> {
    MacPdu::assemble(direction, ces, sdus, target_size, registry)?.encode()
}

/// Parses raw bytes into a sub-PDU tree.
///
/// Ordering problems do not fail the parse; they are returned alongside the
/// tree for the caller to judge.
pub fn parse_pdu(
    direction: Direction,
    bytes: &[u8],
    registry: &LcidRegistry,
    mode: DecodeMode,
) -> Result<ParsedPdu, CodecError> {
    if bytes.is_empty() {
        return Err(CodecError::TruncatedPdu { offset: 0 });
    }
    let mut subpdus = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let start = pos;
        let octet = bytes[pos];
        pos += 1;
        let r_bit = octet & 0x80 != 0;
        let f_bit = octet & 0x40 != 0;
        let lcid = octet & 0x3F;
        if mode == DecodeMode::Strict && r_bit {
            return Err(CodecError::NonZeroSubheaderBits { offset: start });
        }

        if lcid == PADDING_LCID {
            if mode == DecodeMode::Strict && f_bit {
                return Err(CodecError::NonZeroSubheaderBits { offset: start });
            }
            subpdus.push(MacSubPdu {
                subheader: MacSubheader {
                    r_bit,
                    f_bit,
                    lcid,
                    length: None,
                },
                payload: SubPduPayload::Padding(bytes[pos..].to_vec()),
            });
            break;
        }

        let fixed = if lcid <= MAX_SDU_LCID {
            None
        } else {
            let entry = registry
                .lookup(lcid, direction)
                .ok_or(CodecError::UnknownLcid { lcid, direction })?;
            entry.fixed_length.map(|n| (entry.kind, n))
        };

        let (length, body_len) = match fixed {
            Some(_) if mode == DecodeMode::Strict && f_bit => {
                return Err(CodecError::NonZeroSubheaderBits { offset: start });
            }
            Some((_, n)) => (None, n),
            None => {
                let width = if f_bit { 2 } else { 1 };
                let l = bytes
                    .get(pos..pos + width)
                    .ok_or(CodecError::TruncatedPdu { offset: pos })?;
                pos += width;
                let l = if f_bit {
                    u16::from_be_bytes([l[0], l[1]])
                } else {
                    l[0] as u16
                };
                (Some(l), l as usize)
            }
        };
        let body = bytes
            .get(pos..pos + body_len)
            .ok_or(CodecError::TruncatedPdu { offset: pos })?;
        pos += body_len;

        let payload = if lcid <= MAX_SDU_LCID {
            SubPduPayload::Sdu(body.to_vec())
        } else {
            SubPduPayload::Ce(decode_ce(lcid, direction, body, registry, mode)?)
        };
        subpdus.push(MacSubPdu {
            subheader: MacSubheader {
                r_bit,
                f_bit,
                lcid,
                length,
            },
            payload,
        });
    }
    let pdu = MacPdu { direction, subpdus };
    let violations = pdu.ordering_violations();
    Ok(ParsedPdu { pdu, violations })
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
