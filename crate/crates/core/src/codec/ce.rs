//! Typed MAC control elements and their bit layouts.
//!
//! Layouts (MSB first, one row per octet):
//!
//! ```text
//! C-RNTI            | C-RNTI(16)                              |
//! TA Report         | R(2) TA(14)                             |
//! SP CSI on PUCCH   | Serving Cell ID(5) BWP ID(2) L(1) | S7..S0 | [S15..S8 if L=1]
//! LTM Cell Switch   | P(1) R(1) Target Config ID(6) | R(2) TA(14) | R(1) TCI State ID(7) |
//!                   | [NCC(3) Algo(4) K(1) if P=1]
//! TA Command        | TAG ID(2) TA Command(6)                 |
//! Short BSR         | LCG ID(3) Buffer Size(5)                |
//! Field bag         | count(8) | { code(8) width-1(4) value(width) }* zero-padded
//! ```

use serde::{Deserialize, Serialize};

use super::registry::CeKind;
use super::{CodecError, DecodeMode};
use crate::bits::{BitError, BitReader, BitWriter};
use crate::fields::FieldId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CRntiCe {
    pub crnti: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaReportCe {
    #[serde(default)]
    pub reserved: u8,
    pub ta_value: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpCsiPucchCe {
    pub serving_cell_id: u8,
    pub bwp_id: u8,
    /// S0 first. Length 8 encodes with L=0, length 16 with L=1.
    pub s_bits: Vec<bool>,
}

impl SpCsiPucchCe {
    pub fn l_flag(&self) -> bool {
        self.s_bits.len() == 16
    }
}

/// Inter-CU security parameters of an LTM cell switch command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtmSecurity {
    pub ncc: u8,
    pub algo_indication: u8,
    pub key_set_change: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtmCellSwitchCe {
    pub target_config_id: u8,
    pub ta_value: u16,
    pub tci_state_id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security: Option<LtmSecurity>,
    /// The four R bits in wire order, packed into the low nibble.
    #[serde(default)]
    pub reserved: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaCommandCe {
    pub tag_id: u8,
    pub ta_command: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortBsrCe {
    pub lcg_id: u8,
    pub buffer_size: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagField {
    pub field: FieldId,
    /// 1 to 16.
    pub width: u8,
    pub value: u16,
}

/// Raw carrier for sensitive fields that have no typed CE here.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FieldBagCe {
    pub fields: Vec<BagField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MacCe {
    Crnti(CRntiCe),
    TaReport(TaReportCe),
    SpCsiPucch(SpCsiPucchCe),
    LtmCellSwitch(LtmCellSwitchCe),
    TaCommand(TaCommandCe),
    ShortBsr(ShortBsrCe),
    FieldBag(FieldBagCe),
}

/// Location of one sensitive field inside an encoded CE payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpan {
    pub field: FieldId,
    pub value: u64,
    pub bit_offset: usize,
    pub width: u32,
}

struct Packer {
    w: BitWriter,
    spans: Vec<FieldSpan>,
}

impl Packer {
    fn new() -> Self {
        Self {
            w: BitWriter::new(),
            spans: Vec::new(),
        }
    }

    fn put(&mut self, name: &'static str, value: u64, width: u32) -> Result<(), CodecError> {
        self.w.write(value, width).map_err(|e| match e {
            BitError::Overflow { value, width } => CodecError::FieldOverflow {
                field: name,
                value,
                width,
            },
            other => CodecError::Bits(other),
        })
    }

    fn put_field(
        &mut self,
        field: FieldId,
        name: &'static str,
        value: u64,
        width: u32,
    ) -> Result<(), CodecError> {
        let bit_offset = self.w.bit_len();
        self.put(name, value, width)?;
        self.spans.push(FieldSpan {
            field,
            value,
            bit_offset,
            width,
        });
        Ok(())
    }
}

impl MacCe {
    pub fn kind(&self) -> CeKind {
        match self {
            MacCe::Crnti(_) => CeKind::Crnti,
            MacCe::TaReport(_) => CeKind::TaReport,
            MacCe::SpCsiPucch(_) => CeKind::SpCsiPucch,
            MacCe::LtmCellSwitch(_) => CeKind::LtmCellSwitch,
            MacCe::TaCommand(_) => CeKind::TaCommand,
            MacCe::ShortBsr(_) => CeKind::ShortBsr,
            MacCe::FieldBag(_) => CeKind::FieldBag,
        }
    }

    /// Encodes the CE body (no subheader).
    pub fn encode_payload(&self) -> Result<Vec<u8>, CodecError> {
        self.encode_with_spans().map(|(bytes, _)| bytes)
    }

    /// Sensitive fields carried by this CE, with their values and bit offsets
    /// relative to the start of the payload.
    pub fn field_spans(&self) -> Result<Vec<FieldSpan>, CodecError> {
        self.encode_with_spans().map(|(_, spans)| spans)
    }

    pub fn encode_with_spans(&self) -> Result<(Vec<u8>, Vec<FieldSpan>), CodecError> {
        let mut p = Packer::new();
        match self {
            MacCe::Crnti(ce) => {
                p.put_field(FieldId::CRnti, "crnti", ce.crnti as u64, 16)?;
            }
            MacCe::TaReport(ce) => {
                p.put("reserved", ce.reserved as u64, 2)?;
                p.put_field(FieldId::TaCommand, "ta_value", ce.ta_value as u64, 14)?;
            }
            MacCe::SpCsiPucch(ce) => {
                if ce.s_bits.len() != 8 && ce.s_bits.len() != 16 {
                    return Err(CodecError::InvalidCe(format!(
                        "SP CSI activation needs 8 or 16 S bits, got {}",
                        ce.s_bits.len()
                    )));
                }
                p.put_field(
                    FieldId::ServingCellId,
                    "serving_cell_id",
                    ce.serving_cell_id as u64,
                    5,
                )?;
                p.put_field(FieldId::BwpId, "bwp_id", ce.bwp_id as u64, 2)?;
                p.put("l_flag", ce.l_flag() as u64, 1)?;
                for octet in ce.s_bits.chunks(8) {
                    for bit in octet.iter().rev() {
                        p.w.write_bool(*bit);
                    }
                }
            }
            MacCe::LtmCellSwitch(ce) => {
                if ce.reserved > 0x0F {
                    return Err(CodecError::FieldOverflow {
                        field: "reserved",
                        value: ce.reserved as u64,
                        width: 4,
                    });
                }
                let r = |i: u32| ((ce.reserved >> (3 - i)) & 1) as u64;
                p.put("p_flag", ce.security.is_some() as u64, 1)?;
                p.put("reserved", r(0), 1)?;
                p.put_field(
                    FieldId::CandidateCellId,
                    "target_config_id",
                    ce.target_config_id as u64,
                    6,
                )?;
                p.put("reserved", (r(1) << 1) | r(2), 2)?;
                p.put_field(FieldId::TaCommand, "ta_value", ce.ta_value as u64, 14)?;
                p.put("reserved", r(3), 1)?;
                p.put_field(
                    FieldId::TciStateId,
                    "tci_state_id",
                    ce.tci_state_id as u64,
                    7,
                )?;
                if let Some(sec) = &ce.security {
                    p.put("ncc", sec.ncc as u64, 3)?;
                    p.put("algo_indication", sec.algo_indication as u64, 4)?;
                    p.put("key_set_change", sec.key_set_change as u64, 1)?;
                }
            }
            MacCe::TaCommand(ce) => {
                p.put_field(FieldId::TagId, "tag_id", ce.tag_id as u64, 2)?;
                p.put_field(FieldId::TaCommand, "ta_command", ce.ta_command as u64, 6)?;
            }
            MacCe::ShortBsr(ce) => {
                p.put_field(FieldId::LcgId, "lcg_id", ce.lcg_id as u64, 3)?;
                p.put("buffer_size", ce.buffer_size as u64, 5)?;
            }
            MacCe::FieldBag(bag) => {
                if bag.fields.len() > u8::MAX as usize {
                    return Err(CodecError::InvalidCe(format!(
                        "field bag holds {} entries, max 255",
                        bag.fields.len()
                    )));
                }
                p.put("count", bag.fields.len() as u64, 8)?;
                for f in &bag.fields {
                    if !(1..=16).contains(&f.width) {
                        return Err(CodecError::InvalidCe(format!(
                            "field width {} outside 1..=16",
                            f.width
                        )));
                    }
                    p.put("code", f.field.code() as u64, 8)?;
                    p.put("width", (f.width - 1) as u64, 4)?;
                    p.put_field(f.field, "value", f.value as u64, f.width as u32)?;
                }
            }
        }
        Ok((p.w.finish(), p.spans))
    }

    /// Decodes a CE body of the given kind. The payload must be consumed
    /// exactly.
    pub fn decode_payload(
        kind: CeKind,
        payload: &[u8],
        mode: DecodeMode,
    ) -> Result<MacCe, CodecError> {
        let mut r = BitReader::new(payload);
        let reserved = |value: u64| -> Result<(), CodecError> {
            if mode == DecodeMode::Strict && value != 0 {
                Err(CodecError::NonZeroReservedBits { kind })
            } else {
                Ok(())
            }
        };
        let ce = match kind {
            CeKind::Crnti => {
                expect_len(kind, payload, 2)?;
                MacCe::Crnti(CRntiCe {
                    crnti: r.read(16)? as u16,
                })
            }
            CeKind::TaReport => {
                expect_len(kind, payload, 2)?;
                let res = r.read(2)?;
                reserved(res)?;
                MacCe::TaReport(TaReportCe {
                    reserved: res as u8,
                    ta_value: r.read(14)? as u16,
                })
            }
            CeKind::SpCsiPucch => {
                if payload.is_empty() {
                    return Err(CodecError::LengthMismatch {
                        kind,
                        expected: 2,
                        actual: 0,
                    });
                }
                let serving_cell_id = r.read(5)? as u8;
                let bwp_id = r.read(2)? as u8;
                let l = r.read_bool()?;
                let n = if l { 16 } else { 8 };
                expect_len(kind, payload, 1 + n / 8)?;
                let mut s_bits = Vec::with_capacity(n);
                for _ in 0..n / 8 {
                    let octet = r.read(8)? as u8;
                    s_bits.extend((0..8).map(|i| (octet >> i) & 1 == 1));
                }
                MacCe::SpCsiPucch(SpCsiPucchCe {
                    serving_cell_id,
                    bwp_id,
                    s_bits,
                })
            }
            CeKind::LtmCellSwitch => {
                if payload.is_empty() {
                    return Err(CodecError::LengthMismatch {
                        kind,
                        expected: 4,
                        actual: 0,
                    });
                }
                let p = r.read_bool()?;
                expect_len(kind, payload, if p { 5 } else { 4 })?;
                let r0 = r.read(1)?;
                let target_config_id = r.read(6)? as u8;
                let r12 = r.read(2)?;
                let ta_value = r.read(14)? as u16;
                let r3 = r.read(1)?;
                let tci_state_id = r.read(7)? as u8;
                let res = (r0 << 3) | (r12 << 1) | r3;
                reserved(res)?;
                let security = if p {
                    Some(LtmSecurity {
                        ncc: r.read(3)? as u8,
                        algo_indication: r.read(4)? as u8,
                        key_set_change: r.read_bool()?,
                    })
                } else {
                    None
                };
                MacCe::LtmCellSwitch(LtmCellSwitchCe {
                    target_config_id,
                    ta_value,
                    tci_state_id,
                    security,
                    reserved: res as u8,
                })
            }
            CeKind::TaCommand => {
                expect_len(kind, payload, 1)?;
                MacCe::TaCommand(TaCommandCe {
                    tag_id: r.read(2)? as u8,
                    ta_command: r.read(6)? as u8,
                })
            }
            CeKind::ShortBsr => {
                expect_len(kind, payload, 1)?;
                MacCe::ShortBsr(ShortBsrCe {
                    lcg_id: r.read(3)? as u8,
                    buffer_size: r.read(5)? as u8,
                })
            }
            CeKind::FieldBag => {
                let truncated = |_| CodecError::LengthMismatch {
                    kind,
                    expected: payload.len() + 1,
                    actual: payload.len(),
                };
                let count = r.read(8).map_err(truncated)? as usize;
                let mut fields = Vec::with_capacity(count);
                for _ in 0..count {
                    let code = r.read(8).map_err(truncated)? as u8;
                    let field = FieldId::from_code(code).ok_or_else(|| {
                        CodecError::InvalidCe(format!("unknown field code {code} in field bag"))
                    })?;
                    let width = r.read(4).map_err(truncated)? as u8 + 1;
                    let value = r.read(width as u32).map_err(truncated)? as u16;
                    fields.push(BagField {
                        field,
                        width,
                        value,
                    });
                }
                let expected = r.position().div_ceil(8);
                expect_len(kind, payload, expected)?;
                if r.read(r.remaining() as u32)? != 0 {
                    return Err(CodecError::InvalidCe(
                        "non-zero padding after field bag entries".into(),
                    ));
                }
                MacCe::FieldBag(FieldBagCe { fields })
            }
        };
        Ok(ce)
    }
}

fn expect_len(kind: CeKind, payload: &[u8], expected: usize) -> Result<(), CodecError> {
    if payload.len() != expected {
        return Err(CodecError::LengthMismatch {
            kind,
            expected,
            actual: payload.len(),
        });
    }
    Ok(())
}
