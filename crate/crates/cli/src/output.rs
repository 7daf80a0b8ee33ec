//! Command results: a tagged JSON document and its text rendering.
//!
//! Text is always rendered from the same structure that is serialized, so
//! a saved JSON result renders identically through `maccesec render`.

use std::fmt::Write as _;

use maccesec::adversary::AttackReport;
use maccesec::codec::{Direction, MacSubPdu, OrderingViolation, SubPduPayload};
use maccesec::geo::{DwellProfile, Trajectory, RESIDENCE_LABEL, WORKPLACE_LABEL};
use maccesec::policy::{Mechanism, SensitivityRecord};
use maccesec::FieldId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeOut {
    pub direction: Direction,
    pub hex: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOut {
    pub direction: Direction,
    pub length: usize,
    pub subpdus: Vec<MacSubPdu>,
    pub violations: Vec<OrderingViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PduClassOut {
    pub direction: Direction,
    pub mechanism: Mechanism,
    pub fields: Vec<FieldId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOut {
    pub mechanism: Mechanism,
    pub key_id: u8,
    pub seq: u32,
    pub hex: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferOut {
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOut {
    pub profiles: Vec<DwellProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "result", rename_all = "snake_case")]
pub enum CommandOutput {
    Encode(EncodeOut),
    Decode(DecodeOut),
    ClassifyField(Vec<SensitivityRecord>),
    ClassifyPdu(PduClassOut),
    Protect(FrameOut),
    Unprotect(FrameOut),
    Attack(AttackReport),
    Infer(InferOut),
    Profile(ProfileOut),
}

fn stars(n: u8) -> String {
    "*".repeat(n as usize)
}

impl CommandOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outputs serialize")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        match self {
            CommandOutput::Encode(e) => out.push_str(&e.hex),
            CommandOutput::Decode(d) => {
                let _ = write!(
                    out,
                    "{} PDU, {} bytes",
                    d.direction.to_string().to_uppercase(),
                    d.length
                );
                for (i, s) in d.subpdus.iter().enumerate() {
                    let lcid = s.subheader.lcid;
                    let _ = write!(out, "\n  [{i}] ");
                    match &s.payload {
                        SubPduPayload::Ce(ce) => {
                            let body = serde_json::to_string(ce).expect("CE serializes");
                            let _ = write!(out, "CE  lcid={lcid:<2} {body}");
                        }
                        SubPduPayload::Sdu(b) => {
                            let _ = write!(
                                out,
                                "SDU lcid={lcid:<2} len={} {}",
                                b.len(),
                                hex::encode(b)
                            );
                        }
                        SubPduPayload::Padding(b) => {
                            let _ = write!(out, "PAD lcid={lcid:<2} len={}", b.len());
                        }
                    }
                }
                for v in &d.violations {
                    let _ = write!(
                        out,
                        "\n  ordering: sub-PDU {} ({:?}): {}",
                        v.index, v.class, v.reason
                    );
                }
            }
            CommandOutput::ClassifyField(records) => {
                let _ = write!(
                    out,
                    "{:<36} {:<4} {:<6} {:<6} {:<6} {:<6} risk label",
                    "field", "mech", "risk", "conf", "integ", "lat"
                );
                for r in records {
                    let _ = write!(
                        out,
                        "\n{:<36} {:<4} {:<6} {:<6} {:<6} {:<6} {}",
                        r.field_name,
                        r.mechanism.to_string(),
                        stars(r.risk_stars),
                        stars(r.confidentiality_stars),
                        stars(r.integrity_stars),
                        stars(r.latency_stars),
                        r.tamper_risk_label
                    );
                }
            }
            CommandOutput::ClassifyPdu(p) => {
                let names: Vec<&str> = p.fields.iter().map(|f| f.canonical_name()).collect();
                let _ = write!(out, "{}", p.mechanism);
                if !names.is_empty() {
                    let _ = write!(out, " ({})", names.join(", "));
                }
            }
            CommandOutput::Protect(f) | CommandOutput::Unprotect(f) => out.push_str(&f.hex),
            CommandOutput::Attack(r) => out.push_str(r.render_text().trim_end()),
            CommandOutput::Infer(inf) => {
                for t in &inf.trajectories {
                    let _ = write!(out, "ue {}: {} steps", t.ue_ref, t.points.len());
                    for p in &t.points {
                        let r = &p.region;
                        let _ = write!(
                            out,
                            "\n  t={:<10} {:<14} centroid {:.6},{:.6} area {:.1} m2",
                            p.time_s,
                            serde_json::to_value(r.kind)
                                .expect("kind serializes")
                                .as_str()
                                .unwrap_or("?"),
                            r.centroid.lat,
                            r.centroid.lon,
                            r.area_m2
                        );
                    }
                    for m in &t.motion {
                        let _ = write!(
                            out,
                            "\n  {} -> {}: {:.1} m, {:.2} m/s, heading {}",
                            m.from_time_s,
                            m.to_time_s,
                            m.distance_m,
                            m.speed_mps,
                            m.heading_deg.map_or("-".to_string(), |h| format!("{h:.1}"))
                        );
                    }
                    out.push('\n');
                }
                let trimmed = out.trim_end().len();
                out.truncate(trimmed);
            }
            CommandOutput::Profile(p) => {
                for prof in &p.profiles {
                    let _ = write!(
                        out,
                        "ue {}: {} days, {} clusters on a {} m grid",
                        prof.ue_ref,
                        prof.days_observed,
                        prof.clusters.len(),
                        prof.grid_m
                    );
                    for c in &prof.clusters {
                        let _ = write!(
                            out,
                            "\n  ({:>4},{:>4}) {:.6},{:.6} night {:>8.0}s work {:>8.0}s other {:>8.0}s {}",
                            c.grid_x,
                            c.grid_y,
                            c.center.lat,
                            c.center.lon,
                            c.night_s,
                            c.work_s,
                            c.other_s,
                            c.labels.join(",")
                        );
                    }
                    for label in [RESIDENCE_LABEL, WORKPLACE_LABEL] {
                        if let Some(c) = prof.labelled(label) {
                            let _ =
                                write!(out, "\n  {label}: {:.6},{:.6}", c.center.lat, c.center.lon);
                        }
                    }
                    out.push('\n');
                }
                let trimmed = out.trim_end().len();
                out.truncate(trimmed);
            }
        }
        out
    }
}
