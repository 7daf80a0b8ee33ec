//! Passive and active attacker models against secured MAC frames.
//!
//! The eavesdropper holds no keys: it reads whatever the frame leaves in
//! plaintext. The tamperer edits bytes in flight and cannot recompute tags.
//! Outcomes are judged from the receiver's side by running the mutated frame
//! through [`unprotect`] and re-parsing the result.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::splice_bits;
use crate::codec::{
    parse_pdu, CodecError, DecodeMode, Direction, LcidRegistry, MacCe, MacPdu, SubPduPayload,
};
use crate::fields::FieldId;
use crate::policy::{required_mechanism, CeFieldMap, Mechanism, PolicyError, PolicyRegistry};
use crate::protection::{
    protect, unprotect, KeyRing, ProtectionError, ReplayWindow, SecuredFrame, HEADER_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("malformed frame: {0}")]
    MalformedFrame(ProtectionError),
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("field {0} is not present in the frame")]
    FieldNotPresent(FieldId),
    #[error("{0} frames are encrypted; field offsets are not computable")]
    EncryptedFrame(Mechanism),
    #[error("value {value} does not fit the {width}-bit field {field}")]
    ValueTooWide {
        field: FieldId,
        value: u64,
        width: u32,
    },
    #[error("bit position {0} is outside the frame")]
    BitOutOfRange(usize),
    #[error("scenario has no frames")]
    EmptyScenario,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no key slot available")]
    NoKeys,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Protection(ProtectionError),
}

/// What a passive observer learns about one field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldExposure {
    pub exposed: bool,
    pub values_seen: Vec<u64>,
    pub mechanism_in_force: Mechanism,
}

/// Per-frame eavesdropping result, keyed by every known field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub mechanism: Mechanism,
    pub fields: BTreeMap<FieldId, FieldExposure>,
}

impl ExposureReport {
    pub fn exposed_fields(&self) -> BTreeSet<FieldId> {
        self.fields
            .iter()
            .filter(|(_, e)| e.exposed)
            .map(|(f, _)| *f)
            .collect()
    }
}

/// Sensitive fields present in a plaintext PDU, with values.
fn fields_in_pdu(
    pdu: &MacPdu,
    map: &CeFieldMap,
) -> Result<BTreeMap<FieldId, BTreeSet<u64>>, AdversaryError> {
    let mut out: BTreeMap<FieldId, BTreeSet<u64>> = BTreeMap::new();
    for ce in pdu.ces() {
        for s in map.carried_spans(ce)? {
            out.entry(s.field).or_default().insert(s.value);
        }
        // mapped fields the CE layout does not carry as a distinct span
        for f in map.carried_fields(ce)? {
            out.entry(f).or_default();
        }
    }
    Ok(out)
}

/// Reads a frame without keys. M1 and M2 bodies are plaintext and parse
/// as MAC PDUs; M3 and M4 bodies reveal nothing.
pub fn eavesdrop(
    frame_bytes: &[u8],
    direction: Direction,
    registry: &LcidRegistry,
    map: &CeFieldMap,
) -> Result<ExposureReport, AdversaryError> {
    let frame = SecuredFrame::decode(frame_bytes).map_err(AdversaryError::MalformedFrame)?;
    let mechanism = frame.mechanism;
    let mut fields: BTreeMap<FieldId, FieldExposure> = FieldId::ALL
        .iter()
        .map(|&f| {
            (
                f,
                FieldExposure {
                    exposed: false,
                    values_seen: Vec::new(),
                    mechanism_in_force: mechanism,
                },
            )
        })
        .collect();
    if !mechanism.confidentiality() {
        let parsed = parse_pdu(direction, &frame.body, registry, DecodeMode::Lenient)?;
        for (f, values) in fields_in_pdu(&parsed.pdu, map)? {
            let e = fields.get_mut(&f).expect("all fields present");
            e.exposed = true;
            e.values_seen = values.into_iter().collect();
        }
    }
    Ok(ExposureReport { mechanism, fields })
}

/// What to change in a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperTarget {
    /// Overwrite the first occurrence of a named field in a plaintext body.
    Field { field: String, value: u64 },
    /// Flip the given bit positions (0 = MSB of the first frame octet).
    Bits(Vec<usize>),
    /// Flip one bit of the body or tag, chosen by a seeded generator.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_name: Option<FieldId>,
    pub mechanism: Mechanism,
    /// The receiver accepted the frame.
    pub delivered: bool,
    /// The receiver got different content than was sent.
    pub altered: bool,
    /// The receiver raised a tag mismatch.
    pub detected: bool,
    /// Any other receiver error, e.g. from a corrupted header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

/// Bit range a random flip may hit: body plus tag, never the header.
pub fn flip_region(frame_len: usize) -> std::ops::Range<usize> {
    HEADER_LEN * 8..frame_len * 8
}

/// Locates the first occurrence of `field` in a plaintext PDU body:
/// `(body bit offset, width, current value)`.
fn locate_field(
    body: &[u8],
    direction: Direction,
    field: FieldId,
    registry: &LcidRegistry,
    map: &CeFieldMap,
) -> Result<(usize, u32, u64), AdversaryError> {
    let parsed = parse_pdu(direction, body, registry, DecodeMode::Lenient)?;
    let mut offset = 0usize;
    for sp in &parsed.pdu.subpdus {
        let header = sp.subheader.encoded_len();
        if let SubPduPayload::Ce(ce) = &sp.payload {
            if let Some(s) = map
                .carried_spans(ce)?
                .into_iter()
                .find(|s| s.field == field)
            {
                return Ok(((offset + header) * 8 + s.bit_offset, s.width, s.value));
            }
        }
        offset += sp.encoded_len()?;
    }
    Err(AdversaryError::FieldNotPresent(field))
}

fn field_value(
    body: &[u8],
    direction: Direction,
    field: FieldId,
    registry: &LcidRegistry,
    map: &CeFieldMap,
) -> Option<u64> {
    locate_field(body, direction, field, registry, map)
        .ok()
        .map(|(_, _, v)| v)
}

/// Mutates a frame and reports how the receiver fares. Returns the outcome
/// and the mutated bytes.
pub fn tamper(
    frame_bytes: &[u8],
    direction: Direction,
    target: &TamperTarget,
    keys: &KeyRing,
    registry: &LcidRegistry,
    map: &CeFieldMap,
) -> Result<(TamperOutcome, Vec<u8>), AdversaryError> {
    let frame = SecuredFrame::decode(frame_bytes).map_err(AdversaryError::MalformedFrame)?;
    let (_, original) = unprotect(frame_bytes, keys, &mut ReplayWindow::new())
        .map_err(AdversaryError::Protection)?;
    let mut mutated = frame_bytes.to_vec();
    let mut field_name = None;
    match target {
        TamperTarget::Field { field, value } => {
            let f = FieldId::lookup(field)
                .ok_or_else(|| AdversaryError::UnknownField(field.clone()))?;
            if frame.mechanism.confidentiality() {
                return Err(AdversaryError::EncryptedFrame(frame.mechanism));
            }
            let (bit, width, _) = locate_field(&frame.body, direction, f, registry, map)?;
            splice_bits(&mut mutated, HEADER_LEN * 8 + bit, width, *value).map_err(|_| {
                AdversaryError::ValueTooWide {
                    field: f,
                    value: *value,
                    width,
                }
            })?;
            field_name = Some(f);
        }
        TamperTarget::Bits(positions) => {
            for &p in positions {
                let byte = mutated
                    .get_mut(p / 8)
                    .ok_or(AdversaryError::BitOutOfRange(p))?;
                *byte ^= 0x80 >> (p % 8);
            }
        }
        TamperTarget::Random { seed } => {
            let p = ChaCha8Rng::seed_from_u64(*seed).gen_range(flip_region(mutated.len()));
            mutated[p / 8] ^= 0x80 >> (p % 8);
        }
    }

    let outcome = match unprotect(&mutated, keys, &mut ReplayWindow::new()) {
        Ok((mechanism, body)) => TamperOutcome {
            field_name,
            mechanism,
            delivered: true,
            altered: match field_name {
                Some(f) => {
                    field_value(&body, direction, f, registry, map)
                        != field_value(&original, direction, f, registry, map)
                }
                None => body != original,
            },
            detected: false,
            rejected: None,
        },
        Err(e) => TamperOutcome {
            field_name,
            mechanism: frame.mechanism,
            delivered: false,
            altered: false,
            detected: e == ProtectionError::TagMismatch,
            rejected: (e != ProtectionError::TagMismatch).then(|| e.to_string()),
        },
    };
    Ok((outcome, mutated))
}

/// Per-frame mechanism choice in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MechanismChoice {
    /// Whatever the policy requires for the frame's fields.
    #[default]
    #[serde(rename = "auto")]
    Auto,
    #[serde(untagged)]
    Fixed(Mechanism),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFrame {
    #[serde(default)]
    pub time_s: u64,
    #[serde(default)]
    pub mechanism: MechanismChoice,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdu_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ces: Vec<MacCe>,
}

fn default_direction() -> Direction {
    Direction::Dl
}

/// A JSON list of frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario {
    pub frames: Vec<ScenarioFrame>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, AdversaryError> {
        serde_json::from_str(text).map_err(|e| AdversaryError::InvalidScenario(e.to_string()))
    }

    /// Every frame forced to one mechanism.
    pub fn with_mechanism(&self, m: Mechanism) -> Self {
        let mut s = self.clone();
        for f in &mut s.frames {
            f.mechanism = MechanismChoice::Fixed(m);
        }
        s
    }
}

impl ScenarioFrame {
    /// Plaintext PDU bytes and tree.
    pub fn pdu(&self, registry: &LcidRegistry) -> Result<(Vec<u8>, MacPdu), AdversaryError> {
        match (&self.pdu_hex, self.ces.is_empty()) {
            (Some(h), true) => {
                let bytes = hex::decode(h.trim())
                    .map_err(|e| AdversaryError::InvalidScenario(format!("pdu_hex: {e}")))?;
                let parsed = parse_pdu(self.direction, &bytes, registry, DecodeMode::Lenient)?;
                Ok((bytes, parsed.pdu))
            }
            (None, false) => {
                let pdu = MacPdu::assemble(self.direction, &self.ces, &[], None, registry)?;
                Ok((pdu.encode()?, pdu))
            }
            _ => Err(AdversaryError::InvalidScenario(
                "each frame needs exactly one of pdu_hex or ces".into(),
            )),
        }
    }
}

/// Everything a campaign needs besides the scenario.
#[derive(Debug, Clone, Default)]
pub struct CampaignContext {
    pub registry: LcidRegistry,
    pub policy: PolicyRegistry,
    pub map: CeFieldMap,
    pub keys: KeyRing,
}

/// One protected scenario frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltFrame {
    pub direction: Direction,
    pub mechanism: Mechanism,
    pub plaintext: Vec<u8>,
    pub bytes: Vec<u8>,
    pub carried: BTreeMap<FieldId, BTreeSet<u64>>,
}

/// Protects every frame with the ring's lowest key id. Sequence numbers
/// count up from 1 in scenario order.
pub fn build_frames(
    scenario: &Scenario,
    ctx: &CampaignContext,
) -> Result<Vec<BuiltFrame>, AdversaryError> {
    let slot = ctx.keys.slots().next().ok_or(AdversaryError::NoKeys)?;
    scenario
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (plaintext, pdu) = f.pdu(&ctx.registry)?;
            let mechanism = match f.mechanism {
                MechanismChoice::Auto => required_mechanism(&pdu, &ctx.map, &ctx.policy)?,
                MechanismChoice::Fixed(m) => m,
            };
            let bytes = protect(&plaintext, mechanism, slot, i as u32 + 1)
                .map_err(AdversaryError::Protection)?;
            Ok(BuiltFrame {
                direction: f.direction,
                mechanism,
                carried: fields_in_pdu(&pdu, &ctx.map)?,
                plaintext,
                bytes,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub field: FieldId,
    pub risk_stars: u8,
    pub risk_label: String,
    pub policy_mechanism: Mechanism,
    pub frames_carrying: usize,
    pub frames_exposed: usize,
    pub values_seen: Vec<u64>,
    pub mechanisms_in_force: Vec<Mechanism>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismStats {
    pub mechanism: Mechanism,
    pub frames: usize,
    pub trials: usize,
    pub delivered: usize,
    pub altered: usize,
    pub detected: usize,
    /// `detected / trials`; absent when no trial hit this mechanism.
    pub detection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub seed: u64,
    pub frames: usize,
    pub trials: usize,
    /// Ordered by risk stars, highest first.
    pub fields: Vec<FieldRow>,
    pub exposed_fields: Vec<FieldId>,
    pub mechanisms: Vec<MechanismStats>,
    pub clean_frames: usize,
    pub clean_tag_mismatches: usize,
}

/// Runs the passive and active attacks over a scenario.
///
/// Each tamper trial draws a frame and a body-or-tag bit from its own
/// ChaCha8 stream, so results do not depend on thread scheduling.
pub fn run_campaign(
    scenario: &Scenario,
    ctx: &CampaignContext,
    trials: usize,
    seed: u64,
) -> Result<AttackReport, AdversaryError> {
    if scenario.frames.is_empty() {
        return Err(AdversaryError::EmptyScenario);
    }
    let frames = build_frames(scenario, ctx)?;

    let exposures = frames
        .iter()
        .map(|f| eavesdrop(&f.bytes, f.direction, &ctx.registry, &ctx.map))
        .collect::<Result<Vec<_>, _>>()?;

    let clean_tag_mismatches = frames
        .iter()
        .filter(|f| {
            unprotect(&f.bytes, &ctx.keys, &mut ReplayWindow::new())
                == Err(ProtectionError::TagMismatch)
        })
        .count();

    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let f = &frames[rng.gen_range(0..frames.len())];
            let bit = rng.gen_range(flip_region(f.bytes.len()));
            tamper(
                &f.bytes,
                f.direction,
                &TamperTarget::Bits(vec![bit]),
                &ctx.keys,
                &ctx.registry,
                &ctx.map,
            )
            .map(|(o, _)| o)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mechanisms = Mechanism::ALL
        .iter()
        .map(|&m| {
            let hits: Vec<&TamperOutcome> = outcomes.iter().filter(|o| o.mechanism == m).collect();
            let detected = hits.iter().filter(|o| o.detected).count();
            MechanismStats {
                mechanism: m,
                frames: frames.iter().filter(|f| f.mechanism == m).count(),
                trials: hits.len(),
                delivered: hits.iter().filter(|o| o.delivered).count(),
                altered: hits.iter().filter(|o| o.altered).count(),
                detected,
                detection_rate: (!hits.is_empty()).then(|| detected as f64 / hits.len() as f64),
            }
        })
        .collect();

    let mut fields: Vec<FieldRow> = ctx
        .policy
        .records()
        .iter()
        .map(|r| {
            let f = FieldId::lookup(&r.field_name)
                .ok_or_else(|| PolicyError::UnknownField(r.field_name.clone()))?;
            let carrying: Vec<usize> = (0..frames.len())
                .filter(|&i| frames[i].carried.contains_key(&f))
                .collect();
            let exposed: Vec<usize> = carrying
                .iter()
                .copied()
                .filter(|&i| exposures[i].fields[&f].exposed)
                .collect();
            let values: BTreeSet<u64> = exposed
                .iter()
                .flat_map(|&i| exposures[i].fields[&f].values_seen.iter().copied())
                .collect();
            let in_force: BTreeSet<Mechanism> =
                carrying.iter().map(|&i| frames[i].mechanism).collect();
            Ok(FieldRow {
                field: f,
                risk_stars: r.risk_stars,
                risk_label: r.tamper_risk_label.clone(),
                policy_mechanism: r.mechanism,
                frames_carrying: carrying.len(),
                frames_exposed: exposed.len(),
                values_seen: values.into_iter().collect(),
                mechanisms_in_force: in_force.into_iter().collect(),
            })
        })
        .collect::<Result<_, AdversaryError>>()?;
    // stable: table order breaks ties
    fields.sort_by_key(|f| std::cmp::Reverse(f.risk_stars));
    let exposed_fields = fields
        .iter()
        .filter(|r| r.frames_exposed > 0)
        .map(|r| r.field)
        .collect();

    Ok(AttackReport {
        seed,
        frames: frames.len(),
        trials,
        fields,
        exposed_fields,
        mechanisms,
        clean_frames: frames.len(),
        clean_tag_mismatches,
    })
}

fn stars(n: u8) -> String {
    "*".repeat(n as usize)
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Plain-text tables for side-by-side reading with the risk table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "attack campaign: {} frames, {} tamper trials, seed {}",
            self.frames, self.trials, self.seed
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<36} {:<6} {:<4} {:>8} {:>8}  {:<10} values",
            "field", "risk", "mech", "carried", "exposed", "in force"
        );
        for r in &self.fields {
            let in_force: Vec<String> = r
                .mechanisms_in_force
                .iter()
                .map(|m| m.to_string())
                .collect();
            let values: Vec<String> = r.values_seen.iter().map(|v| format!("{v:#x}")).collect();
            let _ = writeln!(
                out,
                "{:<36} {:<6} {:<4} {:>8} {:>8}  {:<10} {}",
                r.field.canonical_name(),
                stars(r.risk_stars),
                r.policy_mechanism.to_string(),
                r.frames_carrying,
                r.frames_exposed,
                if in_force.is_empty() {
                    "-".to_string()
                } else {
                    in_force.join(",")
                },
                if values.is_empty() {
                    "-".to_string()
                } else {
                    values.join(",")
                }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<4} {:>6} {:>7} {:>9} {:>7} {:>8}  detection",
            "mech", "frames", "trials", "delivered", "altered", "detected"
        );
        for m in &self.mechanisms {
            let _ = writeln!(
                out,
                "{:<4} {:>6} {:>7} {:>9} {:>7} {:>8}  {}",
                m.mechanism.to_string(),
                m.frames,
                m.trials,
                m.delivered,
                m.altered,
                m.detected,
                m.detection_rate
                    .map_or("-".to_string(), |r| format!("{r:.4}"))
            );
        }
        let _ = writeln!(out);
        let exposed: Vec<&str> = self
            .exposed_fields
            .iter()
            .map(|f| f.canonical_name())
            .collect();
        let _ = writeln!(
            out,
            "exposed: {}",
            if exposed.is_empty() {
                "-".to_string()
            } else {
                exposed.join(", ")
            }
        );
        let _ = writeln!(
            out,
            "clean frames: {}, tag mismatches: {}",
            self.clean_frames, self.clean_tag_mismatches
        );
        out
    }
}

/// Traffic class a leaked BWP or LCG suggests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ServiceLabel {
    #[serde(rename = "eMBB")]
    Embb,
    #[serde(rename = "mMTC")]
    Mmtc,
    #[serde(rename = "URLLC")]
    Urllc,
    #[serde(rename = "other")]
    Other,
}

/// Configurable rules from leaked identifiers to service labels. BWP ids
/// map to a bandwidth class, which maps to a label; LCG ids map directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMap {
    #[serde(default)]
    pub bwp_classes: BTreeMap<u8, String>,
    #[serde(default)]
    pub class_labels: BTreeMap<String, ServiceLabel>,
    #[serde(default)]
    pub lcg_labels: BTreeMap<u8, ServiceLabel>,
}

impl ServiceMap {
    /// Fails when a BWP id names a class without a label.
    pub fn new(
        bwp_classes: BTreeMap<u8, String>,
        class_labels: BTreeMap<String, ServiceLabel>,
        lcg_labels: BTreeMap<u8, ServiceLabel>,
    ) -> Result<Self, String> {
        if let Some((id, c)) = bwp_classes
            .iter()
            .find(|(_, c)| !class_labels.contains_key(*c))
        {
            return Err(format!("BWP {id} maps to class {c:?}, which has no label"));
        }
        Ok(Self {
            bwp_classes,
            class_labels,
            lcg_labels,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: ServiceMap = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::new(m.bwp_classes, m.class_labels, m.lcg_labels)
    }

    pub fn label_class(&self, class: &str) -> ServiceLabel {
        self.class_labels
            .get(class)
            .copied()
            .unwrap_or(ServiceLabel::Other)
    }
}

impl Default for ServiceMap {
    fn default() -> Self {
        let class_labels = [
            ("wide", ServiceLabel::Embb),
            ("narrow", ServiceLabel::Mmtc),
            ("low_latency", ServiceLabel::Urllc),
        ]
        .into_iter()
        .map(|(c, l)| (c.to_string(), l))
        .collect();
        let bwp_classes = [(0, "narrow"), (1, "wide"), (2, "low_latency"), (3, "wide")]
            .into_iter()
            .map(|(id, c)| (id, c.to_string()))
            .collect();
        Self::new(bwp_classes, class_labels, BTreeMap::new()).expect("default service map is total")
    }
}

/// One leaked identifier at a point in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceObservation {
    pub time_s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bwp_id: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bwp_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcg_id: Option<u8>,
}

/// Applies the rules in order: explicit BWP class, BWP id, LCG id.
/// Anything unmatched is `other`.
pub fn infer_service_type(
    observations: &[ServiceObservation],
    map: &ServiceMap,
) -> Vec<(u64, ServiceLabel)> {
    observations
        .iter()
        .map(|o| {
            let label = if let Some(c) = &o.bwp_class {
                map.label_class(c)
            } else if let Some(c) = o.bwp_id.and_then(|id| map.bwp_classes.get(&id)) {
                map.label_class(c)
            } else if let Some(&l) = o.lcg_id.and_then(|id| map.lcg_labels.get(&id)) {
                l
            } else {
                ServiceLabel::Other
            };
            (o.time_s, label)
        })
        .collect()
}

impl Default for Scenario {
    fn default() -> Self {
        Self::from_json(crate::fixtures::SCENARIO_DEFAULT_JSON).expect("shipped scenario is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CRntiCe, TaCommandCe};
    use crate::protection::KeySlot;

    fn ctx() -> CampaignContext {
        CampaignContext {
            keys: KeyRing::new([KeySlot::new(3, [0x5a; 32], [0xa5; 32])]),
            ..CampaignContext::default()
        }
    }

    fn frame(ce: MacCe, m: Mechanism, dir: Direction) -> Vec<u8> {
        let c = ctx();
        let pdu = MacPdu::assemble(dir, &[ce], &[], None, &c.registry)
            .unwrap()
            .encode()
            .unwrap();
        protect(&pdu, m, c.keys.get(3).unwrap(), 9).unwrap()
    }

    fn crnti() -> MacCe {
        MacCe::Crnti(CRntiCe { crnti: 0x4601 })
    }

    fn ta() -> MacCe {
        MacCe::TaCommand(TaCommandCe {
            tag_id: 1,
            ta_command: 0,
        })
    }

    #[test]
    fn m1_crnti_is_exposed() {
        let c = ctx();
        let r = eavesdrop(
            &frame(crnti(), Mechanism::M1, Direction::Dl),
            Direction::Dl,
            &c.registry,
            &c.map,
        )
        .unwrap();
        let e = &r.fields[&FieldId::CRnti];
        assert!(e.exposed);
        assert_eq!(e.values_seen, vec![0x4601]);
        assert_eq!(r.exposed_fields(), BTreeSet::from([FieldId::CRnti]));
    }

    #[test]
    fn m2_exposes_ta_fields() {
        let c = ctx();
        let r = eavesdrop(
            &frame(ta(), Mechanism::M2, Direction::Ul),
            Direction::Ul,
            &c.registry,
            &c.map,
        )
        .unwrap();
        assert_eq!(
            r.exposed_fields(),
            BTreeSet::from([FieldId::TagId, FieldId::TaCommand])
        );
        assert_eq!(r.fields[&FieldId::TagId].values_seen, vec![1]);
        assert!(r
            .fields
            .values()
            .all(|e| e.mechanism_in_force == Mechanism::M2));
    }

    #[test]
    fn encrypted_frames_expose_nothing() {
        let c = ctx();
        for m in [Mechanism::M3, Mechanism::M4] {
            let r = eavesdrop(
                &frame(crnti(), m, Direction::Dl),
                Direction::Dl,
                &c.registry,
                &c.map,
            )
            .unwrap();
            assert!(r.exposed_fields().is_empty());
            assert_eq!(r.fields.len(), 16);
        }
    }

    #[test]
    fn malformed_frame() {
        let c = ctx();
        assert!(matches!(
            eavesdrop(
                &[0x02, 1, 1, 0, 0, 0, 1, 0],
                Direction::Dl,
                &c.registry,
                &c.map
            ),
            Err(AdversaryError::MalformedFrame(_))
        ));
    }

    #[test]
    fn field_tamper_on_m1_goes_unnoticed() {
        let c = ctx();
        let target = TamperTarget::Field {
            field: "TA Command".into(),
            value: 63,
        };
        let f = frame(ta(), Mechanism::M1, Direction::Ul);
        let (o, bytes) = tamper(&f, Direction::Ul, &target, &c.keys, &c.registry, &c.map).unwrap();
        assert!(o.delivered && o.altered && !o.detected);
        assert_eq!(o.field_name, Some(FieldId::TaCommand));
        // UL PDU is one fixed-length sub-PDU: subheader then TAG(2)|TA(6)
        assert_eq!(bytes[HEADER_LEN + 1], 0b01_111111);
    }

    #[test]
    fn field_tamper_on_m2_is_detected() {
        let c = ctx();
        let target = TamperTarget::Field {
            field: "TA Command".into(),
            value: 63,
        };
        let f = frame(ta(), Mechanism::M2, Direction::Ul);
        let (o, _) = tamper(&f, Direction::Ul, &target, &c.keys, &c.registry, &c.map).unwrap();
        assert!(o.detected && !o.delivered && !o.altered);
    }

    #[test]
    fn field_tamper_errors() {
        let c = ctx();
        let f = frame(ta(), Mechanism::M1, Direction::Ul);
        let t = |field: &str, value| TamperTarget::Field {
            field: field.into(),
            value,
        };
        assert!(matches!(
            tamper(
                &f,
                Direction::Ul,
                &t("nope", 1),
                &c.keys,
                &c.registry,
                &c.map
            ),
            Err(AdversaryError::UnknownField(_))
        ));
        assert!(matches!(
            tamper(
                &f,
                Direction::Ul,
                &t("C-RNTI", 1),
                &c.keys,
                &c.registry,
                &c.map
            ),
            Err(AdversaryError::FieldNotPresent(FieldId::CRnti))
        ));
        assert!(matches!(
            tamper(
                &f,
                Direction::Ul,
                &t("TA Command", 64),
                &c.keys,
                &c.registry,
                &c.map
            ),
            Err(AdversaryError::ValueTooWide { .. })
        ));
        let enc = frame(ta(), Mechanism::M4, Direction::Ul);
        assert!(matches!(
            tamper(
                &enc,
                Direction::Ul,
                &t("TA Command", 1),
                &c.keys,
                &c.registry,
                &c.map
            ),
            Err(AdversaryError::EncryptedFrame(Mechanism::M4))
        ));
    }

    #[test]
    fn random_flip_on_m4_is_detected() {
        let c = ctx();
        let f = frame(crnti(), Mechanism::M4, Direction::Dl);
        for seed in 0..50 {
            let (o, m) = tamper(
                &f,
                Direction::Dl,
                &TamperTarget::Random { seed },
                &c.keys,
                &c.registry,
                &c.map,
            )
            .unwrap();
            assert!(o.detected && !o.delivered);
            assert_eq!(m.iter().zip(&f).filter(|(a, b)| a != b).count(), 1);
        }
    }

    #[test]
    fn header_flip_is_rejected_not_detected() {
        let c = ctx();
        let f = frame(crnti(), Mechanism::M4, Direction::Dl);
        let (o, _) = tamper(
            &f,
            Direction::Dl,
            &TamperTarget::Bits(vec![0]),
            &c.keys,
            &c.registry,
            &c.map,
        )
        .unwrap();
        assert!(!o.delivered && !o.detected && o.rejected.is_some());
    }

    fn small_scenario(m: MechanismChoice) -> Scenario {
        Scenario {
            frames: vec![
                ScenarioFrame {
                    time_s: 0,
                    mechanism: m,
                    direction: Direction::Dl,
                    pdu_hex: None,
                    ces: vec![crnti()],
                },
                ScenarioFrame {
                    time_s: 1,
                    mechanism: m,
                    direction: Direction::Ul,
                    pdu_hex: None,
                    ces: vec![ta()],
                },
            ],
        }
    }

    #[test]
    fn all_m1_campaign() {
        let r = run_campaign(
            &small_scenario(MechanismChoice::Fixed(Mechanism::M1)),
            &ctx(),
            300,
            1,
        )
        .unwrap();
        let m1 = &r.mechanisms[0];
        assert_eq!((m1.trials, m1.detection_rate), (300, Some(0.0)));
        assert_eq!(
            r.exposed_fields,
            vec![FieldId::CRnti, FieldId::TaCommand, FieldId::TagId]
        );
    }

    #[test]
    fn all_m4_campaign() {
        let r = run_campaign(
            &small_scenario(MechanismChoice::Fixed(Mechanism::M4)),
            &ctx(),
            300,
            1,
        )
        .unwrap();
        assert_eq!(r.mechanisms[3].detection_rate, Some(1.0));
        assert!(r.exposed_fields.is_empty());
        assert_eq!(r.clean_tag_mismatches, 0);
    }

    #[test]
    fn campaign_is_reproducible_and_renders() {
        let s = small_scenario(MechanismChoice::Auto);
        let a = run_campaign(&s, &ctx(), 200, 42).unwrap();
        let b = run_campaign(&s, &ctx(), 200, 42).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back = AttackReport::from_json(&a.to_json()).unwrap();
        assert_eq!(back.render_text(), a.render_text());
        assert!(a.render_text().contains("C-RNTI"));
        // fields sorted by stars
        assert!(a
            .fields
            .windows(2)
            .all(|w| w[0].risk_stars >= w[1].risk_stars));
        assert_eq!(
            run_campaign(
                &Scenario::default().with_mechanism(Mechanism::M1),
                &ctx(),
                0,
                0
            )
            .unwrap()
            .trials,
            0
        );
    }

    #[test]
    fn empty_scenario() {
        assert_eq!(
            run_campaign(&Scenario { frames: vec![] }, &ctx(), 1, 0).unwrap_err(),
            AdversaryError::EmptyScenario
        );
    }

    #[test]
    fn scenario_json_forms() {
        let s = Scenario::from_json(
            r#"[{"time_s":0,"mechanism":"auto","pdu_hex":"3a4601"},
                {"time_s":1,"mechanism":"M2","direction":"ul","ces":[{"kind":"short_bsr","lcg_id":2,"buffer_size":7}]}]"#,
        )
        .unwrap();
        assert_eq!(s.frames[0].mechanism, MechanismChoice::Auto);
        assert_eq!(s.frames[1].mechanism, MechanismChoice::Fixed(Mechanism::M2));
        assert_eq!(s.frames[1].direction, Direction::Ul);
        let built = build_frames(&s, &ctx()).unwrap();
        assert_eq!(built[0].mechanism, Mechanism::M4);
        assert!(Scenario::from_json(r#"[{"mechanism":"M9","pdu_hex":"00"}]"#).is_err());
        let both = r#"[{"pdu_hex":"3a4601","ces":[{"kind":"crnti","crnti":1}]}]"#;
        assert!(Scenario::from_json(both)
            .map(|s| build_frames(&s, &ctx()))
            .is_ok_and(|r| r.is_err()));
    }

    #[test]
    fn service_inference() {
        let map = ServiceMap::default();
        let obs = |bwp_class: Option<&str>, bwp_id, lcg_id| ServiceObservation {
            time_s: 5,
            bwp_id,
            bwp_class: bwp_class.map(String::from),
            lcg_id,
        };
        let out = infer_service_type(
            &[
                obs(Some("wide"), None, None),
                obs(Some("narrow"), None, None),
                obs(None, Some(2), None),
                obs(None, Some(9), None),
                obs(None, None, Some(1)),
            ],
            &map,
        );
        let labels: Vec<ServiceLabel> = out.iter().map(|x| x.1).collect();
        assert_eq!(
            labels,
            vec![
                ServiceLabel::Embb,
                ServiceLabel::Mmtc,
                ServiceLabel::Urllc,
                ServiceLabel::Other,
                ServiceLabel::Other
            ]
        );
        assert!(infer_service_type(&[], &map).is_empty());
        assert!(ServiceMap::from_json(r#"{"bwp_classes":{"1":"huge"}}"#).is_err());
        assert_eq!(
            serde_json::to_string(&ServiceLabel::Embb).unwrap(),
            "\"eMBB\""
        );
    }
}
