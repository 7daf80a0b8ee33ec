//! Acceptance suite. Every criterion runs and prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p maccesec-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use maccesec::adversary::{run_campaign, CampaignContext, Scenario};
use maccesec::codec::{
    BagField, CRntiCe, CeKind, DecodeMode, Direction, FieldBagCe, LcidRegistry, LtmCellSwitchCe,
    LtmSecurity, MacCe, MacPdu, MacSdu, MacSubPdu, ShortBsrCe, SpCsiPucchCe, SubPduClass,
    TaCommandCe, TaReportCe,
};
use maccesec::geo::{
    estimate_region, long_term_profile, synth, ta_to_distance, triangulate, trilaterate_local,
    CellDb, LocalFrame, ProfileConfig, RESIDENCE_LABEL, WORKPLACE_LABEL,
};
use maccesec::policy::{Mechanism, PolicyRegistry};
use maccesec::protection::{
    protect, unprotect, KeyRing, KeySlot, ProtectionError, ReplayWindow, HEADER_LEN, TAG_LEN,
};
use maccesec::FieldId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SEED: u64 = 0x5eed_acce;
const CODEC_TRIALS: usize = 10_000;
const PROTECT_TRIALS: usize = 1_000;
const TAMPER_TRIALS: usize = 10_000;
const PLACEMENTS: usize = 1_000;
const TRIANGULATION_TRIALS: usize = 200;
/// Relative tolerance on the one-step TA distance.
const TA_REL_TOL: f64 = 1e-9;
/// Relative tolerance between exact trilateration and the grid-search oracle.
const TRIANGULATION_REL_TOL: f64 = 1e-6;
/// Metres of slack allowed on region membership.
const CONTAINMENT_TOL_M: f64 = 1e-6;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

// ---------------------------------------------------------------- tables

struct GoldenRow {
    field: String,
    tamper_risk: String,
    risk: u8,
    conf: u8,
    integ: u8,
    lat: u8,
    mechanism: String,
}

fn golden_rows() -> Vec<GoldenRow> {
    let text = include_str!("golden/sensitivity_tables.csv");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            assert_eq!(c.len(), 7, "golden row {l:?}");
            GoldenRow {
                field: c[0].into(),
                tamper_risk: c[1].into(),
                risk: c[2].parse().unwrap(),
                conf: c[3].parse().unwrap(),
                integ: c[4].parse().unwrap(),
                lat: c[5].parse().unwrap(),
                mechanism: c[6].into(),
            }
        })
        .collect()
}

fn table_fidelity() -> Outcome {
    let policy = PolicyRegistry::default();
    let golden = golden_rows();
    ensure!(golden.len() == 16, "golden has {} rows", golden.len());
    ensure!(
        policy.records().len() == 16,
        "policy has {} records",
        policy.records().len()
    );
    let mut seen = BTreeSet::new();
    for g in &golden {
        let r = policy
            .classify_field(&g.field)
            .map_err(|e| format!("{}: {e}", g.field))?;
        seen.insert(r.field_name.clone());
        let got = (
            r.mechanism.to_string(),
            r.confidentiality_stars,
            r.integrity_stars,
            r.latency_stars,
            r.risk_stars,
            r.tamper_risk_label.as_str(),
        );
        let want = (
            g.mechanism.clone(),
            g.conf,
            g.integ,
            g.lat,
            g.risk,
            g.tamper_risk.as_str(),
        );
        ensure!(got == want, "{}: got {got:?}, want {want:?}", g.field);
        let (stars, label) = policy.risk_rating(&g.field).map_err(|e| e.to_string())?;
        ensure!(
            stars == g.risk && label == g.tamper_risk,
            "{}: risk_rating disagrees",
            g.field
        );
    }
    ensure!(
        seen.len() == 16,
        "golden rows hit only {} distinct records",
        seen.len()
    );
    Ok(
        "16/16 rows match on mechanism, three requirement ratings, risk label and risk stars"
            .into(),
    )
}

// ---------------------------------------------------------------- codec

fn random_ce(rng: &mut ChaCha8Rng, dir: Direction) -> MacCe {
    let kinds: &[CeKind] = match dir {
        Direction::Dl => &[
            CeKind::Crnti,
            CeKind::SpCsiPucch,
            CeKind::LtmCellSwitch,
            CeKind::TaCommand,
            CeKind::FieldBag,
        ],
        Direction::Ul => &[
            CeKind::Crnti,
            CeKind::TaReport,
            CeKind::TaCommand,
            CeKind::ShortBsr,
            CeKind::FieldBag,
        ],
    };
    match *kinds.choose(rng).unwrap() {
        CeKind::Crnti => MacCe::Crnti(CRntiCe { crnti: rng.gen() }),
        CeKind::TaReport => MacCe::TaReport(TaReportCe {
            reserved: rng.gen_range(0..4),
            ta_value: rng.gen_range(0..1 << 14),
        }),
        CeKind::SpCsiPucch => {
            let n = if rng.gen() { 8 } else { 16 };
            MacCe::SpCsiPucch(SpCsiPucchCe {
                serving_cell_id: rng.gen_range(0..32),
                bwp_id: rng.gen_range(0..4),
                s_bits: (0..n).map(|_| rng.gen()).collect(),
            })
        }
        CeKind::LtmCellSwitch => MacCe::LtmCellSwitch(LtmCellSwitchCe {
            target_config_id: rng.gen_range(0..64),
            ta_value: rng.gen_range(0..1 << 14),
            tci_state_id: rng.gen_range(0..128),
            security: rng.gen::<bool>().then(|| LtmSecurity {
                ncc: rng.gen_range(0..8),
                algo_indication: rng.gen_range(0..16),
                key_set_change: rng.gen(),
            }),
            reserved: rng.gen_range(0..16),
        }),
        CeKind::TaCommand => MacCe::TaCommand(TaCommandCe {
            tag_id: rng.gen_range(0..4),
            ta_command: rng.gen_range(0..64),
        }),
        CeKind::ShortBsr => MacCe::ShortBsr(ShortBsrCe {
            lcg_id: rng.gen_range(0..8),
            buffer_size: rng.gen_range(0..32),
        }),
        CeKind::FieldBag => MacCe::FieldBag(FieldBagCe {
            fields: (0..rng.gen_range(0..6))
                .map(|_| {
                    let width: u8 = rng.gen_range(1..=16);
                    BagField {
                        field: *FieldId::ALL.choose(rng).unwrap(),
                        width,
                        value: (rng.gen::<u32>() & ((1u32 << width) - 1)) as u16,
                    }
                })
                .collect(),
        }),
    }
}

fn random_sdu(rng: &mut ChaCha8Rng) -> MacSdu {
    // Lengths above 255 exercise the 16-bit L field.
    let len = if rng.gen_ratio(1, 8) {
        rng.gen_range(256..600)
    } else {
        rng.gen_range(1..64)
    };
    MacSdu::new(rng.gen_range(0..=32), (0..len).map(|_| rng.gen()).collect())
}

fn random_dir(rng: &mut ChaCha8Rng) -> Direction {
    if rng.gen() {
        Direction::Dl
    } else {
        Direction::Ul
    }
}

/// Independent ordering rule: DL is `CE* SDU* pad?`, UL is `SDU* CE* pad?`.
fn ordering_oracle(dir: Direction, classes: &[SubPduClass]) -> bool {
    let (first, second) = match dir {
        Direction::Dl => (SubPduClass::Ce, SubPduClass::Sdu),
        Direction::Ul => (SubPduClass::Sdu, SubPduClass::Ce),
    };
    let mut phase = 0;
    for (i, c) in classes.iter().enumerate() {
        let p = match *c {
            c if c == first => 0,
            c if c == second => 1,
            _ => {
                if i + 1 != classes.len() {
                    return false;
                }
                2
            }
        };
        if p < phase {
            return false;
        }
        phase = p;
    }
    true
}

fn codec_soundness() -> Outcome {
    let reg = LcidRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut ce_mismatches = 0;
    for _ in 0..CODEC_TRIALS {
        let dir = random_dir(&mut rng);
        let ce = random_ce(&mut rng, dir);
        let bytes = ce
            .encode_payload()
            .map_err(|e| format!("encode {ce:?}: {e}"))?;
        match MacCe::decode_payload(ce.kind(), &bytes, DecodeMode::Lenient) {
            Ok(back) if back == ce => {}
            _ => ce_mismatches += 1,
        }
    }

    let mut pdu_mismatches = 0;
    for _ in 0..CODEC_TRIALS {
        let dir = random_dir(&mut rng);
        let ces: Vec<MacCe> = (0..rng.gen_range(0..5))
            .map(|_| random_ce(&mut rng, dir))
            .collect();
        let mut sdus: Vec<MacSdu> = (0..rng.gen_range(0..4))
            .map(|_| random_sdu(&mut rng))
            .collect();
        if ces.is_empty() && sdus.is_empty() {
            sdus.push(random_sdu(&mut rng));
        }
        let bare = MacPdu::assemble(dir, &ces, &sdus, None, &reg).map_err(|e| e.to_string())?;
        let used = bare.encode().map_err(|e| e.to_string())?.len();
        let target = rng.gen_bool(0.5).then(|| used + rng.gen_range(0..6));
        let pdu = MacPdu::assemble(dir, &ces, &sdus, target, &reg).map_err(|e| e.to_string())?;
        let bytes = pdu.encode().map_err(|e| e.to_string())?;
        match maccesec::codec::parse_pdu(dir, &bytes, &reg, DecodeMode::Lenient) {
            Ok(p)
                if p.pdu == pdu
                    && p.violations.is_empty()
                    && target.is_none_or(|t| t == bytes.len()) => {}
            _ => pdu_mismatches += 1,
        }
    }

    let (mut fneg, mut fpos, mut invalid) = (0, 0, 0);
    for _ in 0..CODEC_TRIALS {
        let dir = random_dir(&mut rng);
        let mut subpdus: Vec<MacSubPdu> = Vec::new();
        for _ in 0..rng.gen_range(1..7) {
            let sp = if rng.gen() {
                MacSubPdu::ce(random_ce(&mut rng, dir), &reg)
            } else {
                let s = random_sdu(&mut rng);
                MacSubPdu::sdu(s.lcid, s.data)
            };
            subpdus.push(sp.map_err(|e| e.to_string())?);
        }
        subpdus.shuffle(&mut rng);
        if rng.gen_ratio(1, 3) {
            subpdus.push(MacSubPdu::padding(rng.gen_range(1..5)));
        }
        let classes: Vec<SubPduClass> = subpdus.iter().map(|s| s.class()).collect();
        let valid = ordering_oracle(dir, &classes);
        invalid += usize::from(!valid);
        let bytes = MacPdu {
            direction: dir,
            subpdus,
        }
        .encode()
        .map_err(|e| e.to_string())?;
        let parsed = maccesec::codec::parse_pdu(dir, &bytes, &reg, DecodeMode::Lenient)
            .map_err(|e| e.to_string())?;
        match (valid, parsed.violations.is_empty()) {
            (true, false) => fpos += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }

    ensure!(
        ce_mismatches == 0,
        "{ce_mismatches} CE round-trip mismatches"
    );
    ensure!(
        pdu_mismatches == 0,
        "{pdu_mismatches} PDU round-trip mismatches"
    );
    ensure!(
        fneg == 0 && fpos == 0,
        "ordering: {fneg} false negatives, {fpos} false positives"
    );
    ensure!(
        invalid > CODEC_TRIALS / 10,
        "ordering sample too easy: {invalid} invalid orders"
    );
    Ok(format!(
        "{CODEC_TRIALS} CE and {CODEC_TRIALS} PDU round trips, 0 mismatches; \
         {CODEC_TRIALS} orderings ({invalid} invalid), 0 FN, 0 FP"
    ))
}

// ---------------------------------------------------------------- protection

fn random_slot(rng: &mut ChaCha8Rng) -> KeySlot {
    KeySlot::new(rng.gen(), rng.gen(), rng.gen())
}

fn protection_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut failures = 0;
    for _ in 0..PROTECT_TRIALS {
        let payload: Vec<u8> = (0..rng.gen_range(1..512)).map(|_| rng.gen()).collect();
        let mech = *Mechanism::ALL.choose(&mut rng).unwrap();
        let slot = random_slot(&mut rng);
        let seq: u32 = rng.gen();
        let ring = KeyRing::new([slot.clone()]);
        let frame = protect(&payload, mech, &slot, seq).map_err(|e| e.to_string())?;
        match unprotect(&frame, &ring, &mut ReplayWindow::new()) {
            Ok((m, body)) if m == mech && body == payload => {}
            _ => failures += 1,
        }
    }
    ensure!(
        failures == 0,
        "{failures}/{PROTECT_TRIALS} round trips failed"
    );
    Ok(format!(
        "{PROTECT_TRIALS}/{PROTECT_TRIALS} tuples restored exactly"
    ))
}

// ---------------------------------------------------------------- tamper

/// Flips every bit of a 64-byte frame. Returns (tag mismatches among
/// authenticated bits, authenticated bits, dispatch-bit flips rejected,
/// dispatch bits).
fn sweep(mech: Mechanism, rng: &mut ChaCha8Rng) -> Result<(usize, usize, usize, usize), String> {
    let body_len = 64 - HEADER_LEN - TAG_LEN;
    let payload: Vec<u8> = (0..body_len).map(|_| rng.gen()).collect();
    let slot = random_slot(rng);
    let ring =
        KeyRing::new([slot.clone()]).with_accepted(&[Mechanism::M1, Mechanism::M2, Mechanism::M4]);
    let frame = protect(&payload, mech, &slot, 1000).map_err(|e| e.to_string())?;
    if frame.len() != 64 {
        return Err(format!("{mech} frame is {} bytes", frame.len()));
    }
    // Version, mechanism and key id octets select how the frame is read;
    // the sequence number and everything after it is under the tag.
    let dispatch = 0..3 * 8;
    let (mut mism, mut auth, mut rejected, mut disp) = (0, 0, 0, 0);
    for bit in 0..frame.len() * 8 {
        let mut f = frame.clone();
        f[bit / 8] ^= 0x80 >> (bit % 8);
        let r = unprotect(&f, &ring, &mut ReplayWindow::new());
        if dispatch.contains(&bit) {
            disp += 1;
            rejected += usize::from(r.is_err());
        } else {
            auth += 1;
            mism += usize::from(r == Err(ProtectionError::TagMismatch));
        }
    }
    Ok((mism, auth, rejected, disp))
}

fn tamper_detection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut notes = Vec::new();
    for mech in [Mechanism::M2, Mechanism::M4] {
        let (mism, auth, rejected, disp) = sweep(mech, &mut rng)?;
        ensure!(
            mism == auth,
            "{mech}: {mism}/{auth} authenticated bit flips gave TagMismatch"
        );
        ensure!(
            rejected == disp,
            "{mech}: {rejected}/{disp} dispatch bit flips rejected"
        );
        notes.push(format!(
            "{mech} {mism}/{auth} TagMismatch + {rejected}/{disp} dispatch rejected"
        ));
    }

    let report = run_campaign(
        &Scenario::default(),
        &CampaignContext::default(),
        TAMPER_TRIALS,
        SEED,
    )
    .map_err(|e| e.to_string())?;
    let rate = |m: Mechanism| {
        report
            .mechanisms
            .iter()
            .find(|s| s.mechanism == m)
            .and_then(|s| s.detection_rate)
    };
    ensure!(
        rate(Mechanism::M1) == Some(0.0),
        "M1 detection rate {:?}",
        rate(Mechanism::M1)
    );
    ensure!(
        rate(Mechanism::M2) == Some(1.0),
        "M2 detection rate {:?}",
        rate(Mechanism::M2)
    );
    ensure!(
        rate(Mechanism::M4) == Some(1.0),
        "M4 detection rate {:?}",
        rate(Mechanism::M4)
    );
    ensure!(
        report.trials == TAMPER_TRIALS,
        "campaign ran {} trials",
        report.trials
    );
    ensure!(
        report.clean_tag_mismatches == 0,
        "{} clean frames mismatched",
        report.clean_tag_mismatches
    );
    Ok(format!(
        "{}; campaign {TAMPER_TRIALS} flips: M1 0.0, M2 1.0, M4 1.0; {} clean frames, 0 mismatches",
        notes.join(", "),
        report.clean_frames
    ))
}

// ---------------------------------------------------------------- exposure

fn exposure_complement() -> Outcome {
    let policy = PolicyRegistry::default();
    let want: BTreeSet<String> = golden_rows()
        .into_iter()
        .filter(|g| g.mechanism == "M1" || g.mechanism == "M2")
        .map(|g| policy.classify_field(&g.field).unwrap().field_name.clone())
        .collect();
    let report = run_campaign(&Scenario::default(), &CampaignContext::default(), 0, SEED)
        .map_err(|e| e.to_string())?;
    let got: BTreeSet<String> = report
        .exposed_fields
        .iter()
        .map(|f| f.canonical_name().to_string())
        .collect();
    ensure!(got == want, "exposed {got:?}, expected {want:?}");
    Ok(format!(
        "exposed set equals the {} M1/M2 fields",
        want.len()
    ))
}

// ---------------------------------------------------------------- geometry

/// Least-squares range fit by nested grid search, sharing nothing with the
/// library's solver.
fn grid_search(anchors: &[(f64, f64, f64)], half_span: f64) -> (f64, f64) {
    let cost = |x: f64, y: f64| {
        anchors
            .iter()
            .map(|&(ax, ay, r)| ((x - ax).hypot(y - ay) - r).powi(2))
            .sum::<f64>()
    };
    let (mut cx, mut cy, mut span) = (0.0, 0.0, half_span);
    for _ in 0..60 {
        let n = 40;
        let mut best = (f64::INFINITY, cx, cy);
        for i in 0..=n {
            for j in 0..=n {
                let x = cx - span + 2.0 * span * i as f64 / n as f64;
                let y = cy - span + 2.0 * span * j as f64 / n as f64;
                let c = cost(x, y);
                if c < best.0 {
                    best = (c, x, y);
                }
            }
        }
        cx = best.1;
        cy = best.2;
        span *= 0.5;
    }
    (cx, cy)
}

fn geometry() -> Outcome {
    // One TA step at mu = 0: 16 * 64 * Tc * c / 2 with Tc = 1 / (480 kHz * 4096).
    let closed = 16.0 * 64.0 / (480_000.0 * 4096.0) * 299_792_458.0 / 2.0;
    let d = ta_to_distance(1, 0).map_err(|e| e.to_string())?.d_center;
    let rel = (d - closed).abs() / closed;
    ensure!(
        rel < TA_REL_TOL,
        "ta_to_distance(1,0) = {d}, closed form {closed}"
    );
    ensure!(
        (closed - 78.07).abs() < 0.01,
        "closed form {closed} is not ~78.07 m"
    );

    let db = CellDb::default();
    let cells: Vec<_> = db.cells().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut single_ok = 0;
    let mut multi_ok = 0;
    for i in 0..PLACEMENTS {
        let cell = cells.choose(&mut rng).unwrap();
        let frame = LocalFrame::new(cell.position());
        let (r, az) = (rng.gen_range(5.0..4000.0), rng.gen_range(0.0..360.0f64));
        let ue = frame.to_geo(r * az.to_radians().sin(), r * az.to_radians().cos());
        let mut ev = synth::observe(cell, ue, i as f64, "ue");
        match i % 3 {
            0 => ev.ssb_index = None,
            1 => ev.ta_index = None,
            _ => {}
        }
        let region = estimate_region(&ev, &db).map_err(|e| e.to_string())?;
        single_ok += usize::from(region.contains(ue, CONTAINMENT_TOL_M));

        let evs: Vec<_> = cells[..3]
            .iter()
            .map(|c| synth::observe(c, ue, 0.0, "ue"))
            .collect();
        match triangulate(&evs, &db) {
            Ok(region) => multi_ok += usize::from(region.contains(ue, CONTAINMENT_TOL_M)),
            Err(e) => return Err(format!("triangulate at {ue:?}: {e}")),
        }
    }
    ensure!(
        single_ok == PLACEMENTS,
        "single-cell containment {single_ok}/{PLACEMENTS}"
    );
    ensure!(
        multi_ok == PLACEMENTS,
        "three-cell containment {multi_ok}/{PLACEMENTS}"
    );

    let mut worst: f64 = 0.0;
    for _ in 0..TRIANGULATION_TRIALS {
        let anchors: Vec<(f64, f64)> = loop {
            let a: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(-3000.0..3000.0),
                        rng.gen_range(-3000.0..3000.0),
                    )
                })
                .collect();
            let area = ((a[1].0 - a[0].0) * (a[2].1 - a[0].1)
                - (a[2].0 - a[0].0) * (a[1].1 - a[0].1))
                .abs()
                / 2.0;
            if area > 1.0e6 {
                break a;
            }
        };
        let ue = (
            rng.gen_range(-2000.0..2000.0),
            rng.gen_range(-2000.0..2000.0),
        );
        let ranged: Vec<(f64, f64, f64)> = anchors
            .iter()
            .map(|&(x, y)| (x, y, (ue.0 - x).hypot(ue.1 - y)))
            .collect();
        let fix = trilaterate_local(&ranged).ok_or("trilateration gave no fix")?;
        let oracle = grid_search(&ranged, 8000.0);
        let scale = ranged.iter().map(|a| a.2).fold(1.0, f64::max);
        worst = worst.max((fix.x - oracle.0).hypot(fix.y - oracle.1) / scale);
    }
    ensure!(
        worst < TRIANGULATION_REL_TOL,
        "worst relative triangulation error {worst:e}"
    );

    let origin = LocalFrame::new(db.reference_point().ok_or("empty cell db")?);
    let grid = ProfileConfig::default().grid_m;
    let home_cell = (3i64, 4i64);
    let work_cell = (7i64, 6i64);
    let centre =
        |(gx, gy): (i64, i64)| origin.to_geo((gx as f64 + 0.5) * grid, (gy as f64 + 0.5) * grid);
    let events = synth::commuter(
        &db,
        &[101, 102, 103],
        centre(home_cell),
        centre(work_cell),
        5,
        600,
        0,
        "0x4601",
    );
    let profile =
        long_term_profile(&events, &db, &ProfileConfig::default()).map_err(|e| e.to_string())?;
    let cell_of = |label: &str| profile.labelled(label).map(|c| (c.grid_x, c.grid_y));
    ensure!(
        cell_of(RESIDENCE_LABEL) == Some(home_cell),
        "residence {:?}, want {home_cell:?}",
        cell_of(RESIDENCE_LABEL)
    );
    ensure!(
        cell_of(WORKPLACE_LABEL) == Some(work_cell),
        "workplace {:?}, want {work_cell:?}",
        cell_of(WORKPLACE_LABEL)
    );

    Ok(format!(
        "TA step {d:.4} m (rel err {rel:.1e}); containment {PLACEMENTS}/{PLACEMENTS} single-cell and \
         {PLACEMENTS}/{PLACEMENTS} three-cell; worst trilateration rel err {worst:.1e}; commuter cells labelled"
    ))
}

// ---------------------------------------------------------------- CLI

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_maccesec"))
        .args(args)
        .env_remove("MACCESEC_CONFIG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Runs with the shipped fixtures and JSON output, then checks the
/// envelope shape.
fn cli_json(command: &str, args: &[&str]) -> Result<Value, String> {
    let cells = fixture("cells_default.csv");
    let beams = fixture("beams_default.json");
    let keys = fixture("keys_default.json");
    let policy = fixture("policy_table2.json");
    let registry = fixture("lcid_default.json");
    let ce_fields = fixture("ce_fields.json");
    let mut full: Vec<&str> = vec![
        "--format",
        "json",
        "--seed",
        "7",
        "--cells",
        cells.to_str().unwrap(),
        "--beams",
        beams.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--registry",
        registry.to_str().unwrap(),
        "--ce-fields",
        ce_fields.to_str().unwrap(),
        command,
    ];
    full.extend_from_slice(args);
    let run = cli(&full);
    if run.code != 0 {
        return Err(format!(
            "{command} exited {}: {}",
            run.code,
            run.stderr.trim()
        ));
    }
    let v: Value = serde_json::from_str(&run.stdout)
        .map_err(|e| format!("{command}: stdout is not JSON: {e}"))?;
    let obj = v
        .as_object()
        .ok_or(format!("{command}: output is not an object"))?;
    let keys: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
    if keys != BTreeSet::from(["command", "result"]) {
        return Err(format!("{command}: envelope keys {keys:?}"));
    }
    Ok(v)
}

fn str_at<'a>(v: &'a Value, ptr: &str) -> Result<&'a str, String> {
    v.pointer(ptr)
        .and_then(Value::as_str)
        .ok_or(format!("missing string at {ptr}"))
}

fn end_to_end_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let frame_path = dir.path().join("frame.hex");
    let infer_json = dir.path().join("infer.json");
    let svg_path = dir.path().join("track.svg");

    let enc = cli_json(
        "encode",
        &[
            "--ce",
            "crnti=0x4601",
            "--ce",
            "ta_command:tag_id=1,ta_command=31",
        ],
    )?;
    ensure!(str_at(&enc, "/command")? == "encode", "encode envelope");
    let pdu = str_at(&enc, "/result/hex")?.to_string();
    ensure!(pdu == "3a46013d5f", "encode produced {pdu}");

    let prot = cli_json(
        "protect",
        &[
            "--hex",
            &pdu,
            "--auto",
            "--out",
            frame_path.to_str().unwrap(),
        ],
    )?;
    ensure!(
        str_at(&prot, "/result/mechanism")? == "M4",
        "protect --auto chose {:?}",
        prot["result"]["mechanism"]
    );
    ensure!(
        prot.pointer("/result/seq").and_then(Value::as_u64) == Some(1),
        "protect seq"
    );

    let scenario = fixture("scenario_default.json");
    let attack = cli_json("attack", &[scenario.to_str().unwrap(), "--trials", "2000"])?;
    let again = cli_json("attack", &[scenario.to_str().unwrap(), "--trials", "2000"])?;
    ensure!(
        attack == again,
        "attack is not deterministic under a fixed seed"
    );
    for key in [
        "seed",
        "frames",
        "trials",
        "fields",
        "exposed_fields",
        "mechanisms",
        "clean_frames",
        "clean_tag_mismatches",
    ] {
        ensure!(
            attack["result"].get(key).is_some(),
            "attack result lacks {key}"
        );
    }
    ensure!(
        attack["result"]["fields"].as_array().map_or(0, Vec::len) == 16,
        "attack field rows"
    );

    let unprot = cli_json("unprotect", &["--in", frame_path.to_str().unwrap()])?;
    ensure!(
        str_at(&unprot, "/result/hex")? == pdu,
        "unprotect did not restore the PDU"
    );
    ensure!(
        str_at(&unprot, "/result/mechanism")? == "M4",
        "unprotect mechanism"
    );

    let obs = fixture("observations_default.jsonl");
    let infer = cli_json(
        "infer",
        &[obs.to_str().unwrap(), "--svg", svg_path.to_str().unwrap()],
    )?;
    let trajectories = infer
        .pointer("/result/trajectories")
        .and_then(Value::as_array)
        .ok_or("no trajectories")?;
    ensure!(
        trajectories.len() == 1,
        "expected one UE, got {}",
        trajectories.len()
    );
    let points = trajectories[0]["points"].as_array().ok_or("no points")?;
    ensure!(
        points.len() == 8,
        "expected 8 trajectory points, got {}",
        points.len()
    );
    for p in points {
        ensure!(
            p.pointer("/region/centroid/lat")
                .and_then(Value::as_f64)
                .is_some(),
            "point without centroid"
        );
    }
    let svg = std::fs::read_to_string(&svg_path).map_err(|e| e.to_string())?;
    ensure!(
        svg.starts_with("<svg") || svg.starts_with("<?xml"),
        "svg output"
    );

    // JSON renders to the same text the command prints directly.
    std::fs::write(&infer_json, serde_json::to_string(&infer).unwrap())
        .map_err(|e| e.to_string())?;
    let rendered = cli(&["render", infer_json.to_str().unwrap()]);
    let direct = cli(&["infer", obs.to_str().unwrap()]);
    ensure!(
        rendered.code == 0 && rendered.stdout == direct.stdout,
        "render differs from direct text output"
    );

    let mut tampered = std::fs::read_to_string(&frame_path)
        .map_err(|e| e.to_string())?
        .trim()
        .to_string();
    let last = tampered.pop().unwrap();
    tampered.push(if last == '0' { '1' } else { '0' });
    let codes = [
        ("bad hex", cli(&["decode", "--hex", "zz"]).code, 2),
        (
            "strict ordering",
            cli(&["decode", "--hex", "0101aa3a4601", "--strict"]).code,
            3,
        ),
        ("unknown field", cli(&["classify", "no-such-field"]).code, 4),
        (
            "tampered frame",
            cli(&["unprotect", "--hex", &tampered]).code,
            5,
        ),
        (
            "missing file",
            cli(&["infer", "/nonexistent/obs.jsonl"]).code,
            6,
        ),
    ];
    for (what, got, want) in codes {
        ensure!(got == want, "{what}: exit {got}, want {want}");
    }
    Ok("encode, protect --auto, attack, unprotect, infer all exit 0 with valid JSON; error exits 2-6 stable".into())
}

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 7] = [
        ("table fidelity", table_fidelity),
        ("codec soundness", codec_soundness),
        ("protection round trip", protection_round_trip),
        ("tamper detection", tamper_detection),
        ("exposure complement", exposure_complement),
        ("geometry", geometry),
        ("end-to-end CLI", end_to_end_cli),
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let ms = t.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} ({ms} ms): {detail}", i + 1),
            Err(why) => {
                println!("criterion {} FAIL {name} ({ms} ms): {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!(
        "acceptance finished in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
