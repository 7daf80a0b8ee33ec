//! `maccesec`: codec, policy, protection, attack and location experiments
//! from the command line.
//!
//! Exit codes: 0 ok, 2 parse, 3 ordering, 4 policy, 5 crypto, 6 geometry or
//! data.

mod ce_spec;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maccesec::adversary::{run_campaign, Scenario};
use maccesec::codec::{assemble_pdu, parse_pdu, DecodeMode, Direction, MacCe, MacSdu};
use maccesec::geo::{
    long_term_profile, reconstruct_trajectory, svg, ObservationEvent, ProfileConfig,
    TrajectoryConfig,
};
use maccesec::policy::{required_mechanism, Mechanism};
use maccesec::protection::{protect, unprotect, ReplayWindow, SecuredFrame};
use maccesec::FieldId;

use config::{read_text, CliConfig, OutputFormat};
use error::CliError;
use output::{CommandOutput, DecodeOut, EncodeOut, FrameOut, InferOut, PduClassOut, ProfileOut};

#[derive(Debug, Parser)]
#[command(name = "maccesec", version, about = "MAC CE security experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config file with fixture paths, seed and output format.
    #[arg(long, global = true, env = "MACCESEC_CONFIG")]
    config: Option<PathBuf>,
    /// LCID registry JSON.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Sensitivity policy JSON.
    #[arg(long, global = true)]
    policy: Option<PathBuf>,
    /// CE kind to carried-fields map JSON.
    #[arg(long, global = true)]
    ce_fields: Option<PathBuf>,
    /// Key file JSON.
    #[arg(long, global = true)]
    keys: Option<PathBuf>,
    /// Cell database CSV.
    #[arg(long, global = true)]
    cells: Option<PathBuf>,
    /// Beam map JSON (TCI and spatial relation IDs to SSB beams).
    #[arg(long, global = true)]
    beams: Option<PathBuf>,
    /// Campaign seed; 0 when unset.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format; text when unset.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
struct HexInput {
    /// Hex string.
    #[arg(long, conflicts_with = "input")]
    hex: Option<String>,
    /// File holding a hex string.
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

impl HexInput {
    fn bytes(&self) -> Result<Vec<u8>, CliError> {
        let text = match (&self.hex, &self.input) {
            (Some(h), _) => h.clone(),
            (None, Some(p)) => read_text(p)?,
            (None, None) => return Err(CliError::Parse("one of --hex or --in is required".into())),
        };
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(CliError::Parse("empty input".into()));
        }
        Ok(hex::decode(cleaned)?)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble CEs and SDUs into a MAC PDU.
    Encode {
        /// `crnti=0x4601`, `kind:field=value,...` or a JSON object. Repeatable.
        #[arg(long)]
        ce: Vec<String>,
        /// SDU payload as `hex` or `lcid:hex`. Repeatable.
        #[arg(long)]
        sdu: Vec<String>,
        #[arg(long, default_value = "dl")]
        dir: Direction,
        /// Pad to this many bytes.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Parse a MAC PDU into its sub-PDU tree.
    Decode {
        #[command(flatten)]
        input: HexInput,
        #[arg(long, default_value = "dl")]
        dir: Direction,
        /// Reject reserved bits and fail on ordering violations.
        #[arg(long)]
        strict: bool,
    },
    /// Look up a field's sensitivity record, or the mechanism a PDU needs.
    Classify {
        /// Field name; all records when omitted.
        field: Option<String>,
        #[arg(long, conflicts_with = "field")]
        pdu: Option<String>,
        #[arg(long, default_value = "dl")]
        dir: Direction,
    },
    /// Wrap a PDU in a secured frame.
    Protect {
        #[command(flatten)]
        input: HexInput,
        #[arg(long, conflicts_with = "auto")]
        mechanism: Option<Mechanism>,
        /// Use the mechanism the policy requires for the PDU's fields.
        #[arg(long)]
        auto: bool,
        #[arg(long, default_value = "dl")]
        dir: Direction,
        /// Defaults to the lowest key id in the key file.
        #[arg(long)]
        key_id: Option<u8>,
        #[arg(long, default_value_t = 1)]
        seq: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify and unwrap a secured frame.
    Unprotect {
        #[command(flatten)]
        input: HexInput,
        /// Replay window state, read and updated in place.
        #[arg(long)]
        window: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run eavesdrop and tamper campaigns over a scenario.
    Attack {
        /// Scenario JSON; the shipped scenario when omitted.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Force every frame to one mechanism.
        #[arg(long)]
        mechanism: Option<Mechanism>,
    },
    /// Reconstruct per-UE location trajectories from observations.
    Infer {
        /// JSON-lines observations; the shipped sample when omitted.
        observations: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        bucket_s: f64,
        /// Also write an SVG sketch of every region.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Label residence and workplace candidates from long observation runs.
    Profile {
        observations: PathBuf,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        tz_offset_s: i64,
        #[arg(long, default_value_t = 3)]
        min_days: u32,
        #[arg(long, default_value_t = 100.0)]
        grid_m: f64,
    },
    /// Render a saved JSON result as text.
    Render { input: PathBuf },
}

fn write_hex(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, format!("{}\n", hex::encode(bytes)))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_sdu(spec: &str) -> Result<MacSdu, CliError> {
    match spec.split_once(':') {
        Some((lcid, data)) => {
            let lcid = lcid
                .trim()
                .parse()
                .map_err(|_| CliError::Parse(format!("bad SDU lcid in {spec:?}")))?;
            Ok(MacSdu::new(lcid, hex::decode(data.trim())?))
        }
        None => Ok(hex::decode(spec.trim())?.into()),
    }
}

fn load_observations(
    path: Option<&Path>,
) -> Result<BTreeMap<String, Vec<ObservationEvent>>, CliError> {
    let text = match path {
        Some(p) => read_text(p)?,
        None => maccesec::fixtures::OBSERVATIONS_DEFAULT_JSONL.to_string(),
    };
    let events =
        ObservationEvent::parse_jsonl(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut by_ue: BTreeMap<String, Vec<ObservationEvent>> = BTreeMap::new();
    for e in events {
        by_ue.entry(e.ue_ref.clone()).or_default().push(e);
    }
    for evs in by_ue.values_mut() {
        evs.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    }
    Ok(by_ue)
}

fn run(command: Command, cfg: &CliConfig) -> Result<CommandOutput, CliError> {
    match command {
        Command::Encode {
            ce,
            sdu,
            dir,
            target,
        } => {
            let ces = ce
                .iter()
                .map(|s| ce_spec::parse_ce(s))
                .collect::<Result<Vec<MacCe>, _>>()?;
            let sdus = sdu
                .iter()
                .map(|s| parse_sdu(s))
                .collect::<Result<Vec<_>, _>>()?;
            if ces.is_empty() && sdus.is_empty() {
                return Err(CliError::Parse("nothing to encode".into()));
            }
            let bytes = assemble_pdu(dir, &ces, &sdus, target, &cfg.registry()?)?;
            Ok(CommandOutput::Encode(EncodeOut {
                direction: dir,
                hex: hex::encode(bytes),
            }))
        }
        Command::Decode { input, dir, strict } => {
            let bytes = input.bytes()?;
            let mode = if strict {
                DecodeMode::Strict
            } else {
                DecodeMode::Lenient
            };
            let parsed = parse_pdu(dir, &bytes, &cfg.registry()?, mode)?;
            if strict && !parsed.violations.is_empty() {
                let v = &parsed.violations[0];
                return Err(CliError::Ordering(format!(
                    "sub-PDU {}: {}",
                    v.index, v.reason
                )));
            }
            Ok(CommandOutput::Decode(DecodeOut {
                direction: dir,
                length: bytes.len(),
                subpdus: parsed.pdu.subpdus,
                violations: parsed.violations,
            }))
        }
        Command::Classify { field, pdu, dir } => {
            let policy = cfg.policy()?;
            if let Some(h) = pdu {
                let bytes = hex::decode(h.trim())?;
                let map = cfg.ce_field_map(&policy)?;
                let parsed = parse_pdu(dir, &bytes, &cfg.registry()?, DecodeMode::Lenient)?;
                let mut fields: Vec<FieldId> = Vec::new();
                for ce in parsed.pdu.ces() {
                    fields.extend(map.carried_fields(ce)?);
                }
                fields.sort();
                fields.dedup();
                return Ok(CommandOutput::ClassifyPdu(PduClassOut {
                    direction: dir,
                    mechanism: required_mechanism(&parsed.pdu, &map, &policy)?,
                    fields,
                }));
            }
            let records = match field {
                Some(name) => vec![policy.classify_field(&name)?.clone()],
                None => policy.records().to_vec(),
            };
            Ok(CommandOutput::ClassifyField(records))
        }
        Command::Protect {
            input,
            mechanism,
            auto,
            dir,
            key_id,
            seq,
            out,
        } => {
            let bytes = input.bytes()?;
            let mechanism = match (mechanism, auto) {
                (Some(m), _) => m,
                (None, true) => {
                    let policy = cfg.policy()?;
                    let parsed = parse_pdu(dir, &bytes, &cfg.registry()?, DecodeMode::Lenient)?;
                    required_mechanism(&parsed.pdu, &cfg.ce_field_map(&policy)?, &policy)?
                }
                (None, false) => {
                    return Err(CliError::Parse(
                        "one of --mechanism or --auto is required".into(),
                    ))
                }
            };
            let keys = cfg.keys()?;
            let slot = match key_id {
                Some(id) => keys.get(id),
                None => keys.slots().next(),
            }
            .ok_or_else(|| {
                CliError::Crypto(format!(
                    "no key slot {}",
                    key_id.map_or("available".into(), |k| k.to_string())
                ))
            })?;
            let frame = protect(&bytes, mechanism, slot, seq)?;
            if let Some(p) = out {
                write_hex(&p, &frame)?;
            }
            Ok(CommandOutput::Protect(FrameOut {
                mechanism,
                key_id: slot.key_id,
                seq,
                hex: hex::encode(frame),
            }))
        }
        Command::Unprotect { input, window, out } => {
            let bytes = input.bytes()?;
            let mut win: ReplayWindow = match &window {
                Some(p) if p.exists() => serde_json::from_str(&read_text(p)?)?,
                _ => ReplayWindow::new(),
            };
            let (mechanism, body) = unprotect(&bytes, &cfg.keys()?, &mut win)?;
            let frame = SecuredFrame::decode(&bytes)?;
            if let Some(p) = &window {
                std::fs::write(p, serde_json::to_string(&win)?)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            }
            if let Some(p) = out {
                write_hex(&p, &body)?;
            }
            Ok(CommandOutput::Unprotect(FrameOut {
                mechanism,
                key_id: frame.key_id,
                seq: frame.seq,
                hex: hex::encode(body),
            }))
        }
        Command::Attack {
            scenario,
            trials,
            mechanism,
        } => {
            let mut s = match scenario {
                Some(p) => Scenario::from_json(&read_text(&p)?)?,
                None => Scenario::default(),
            };
            if let Some(m) = mechanism {
                s = s.with_mechanism(m);
            }
            let report = run_campaign(&s, &cfg.campaign_context()?, trials, cfg.seed())?;
            Ok(CommandOutput::Attack(report))
        }
        Command::Infer {
            observations,
            bucket_s,
            svg: svg_path,
        } => {
            let db = cfg.cell_db()?;
            let tcfg = TrajectoryConfig { bucket_s };
            let trajectories = load_observations(observations.as_deref())?
                .values()
                .map(|evs| reconstruct_trajectory(evs, &db, &tcfg))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(p) = svg_path {
                let regions: Vec<_> = trajectories
                    .iter()
                    .flat_map(|t| t.points.iter().map(|p| p.region.clone()))
                    .collect();
                std::fs::write(&p, svg::render(&db, &regions))
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            }
            Ok(CommandOutput::Infer(InferOut { trajectories }))
        }
        Command::Profile {
            observations,
            tz_offset_s,
            min_days,
            grid_m,
        } => {
            let db = cfg.cell_db()?;
            let pcfg = ProfileConfig {
                tz_offset_s,
                min_days,
                grid_m,
                ..ProfileConfig::default()
            };
            let profiles = load_observations(Some(&observations))?
                .values()
                .map(|evs| long_term_profile(evs, &db, &pcfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CommandOutput::Profile(ProfileOut { profiles }))
        }
        Command::Render { input } => Ok(serde_json::from_str(&read_text(&input)?)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    let cfg = match &g.config {
        Some(p) => CliConfig::load(p),
        None => Ok(CliConfig::default()),
    }
    .map(|file| {
        file.overlay(CliConfig {
            registry_path: g.registry,
            policy_path: g.policy,
            ce_field_map_path: g.ce_fields,
            key_file: g.keys,
            cell_db_path: g.cells,
            beam_map_path: g.beams,
            seed: g.seed,
            output_format: g.format,
        })
    });
    let render = matches!(cli.command, Command::Render { .. });
    let result = cfg.and_then(|cfg| run(cli.command, &cfg).map(|out| (out, cfg)));
    match result {
        Ok((out, cfg)) => {
            let format = if render {
                OutputFormat::Text
            } else {
                cfg.format()
            };
            let text = match format {
                OutputFormat::Json => out.to_json(),
                OutputFormat::Text => out.render_text(),
            };
            // A closed pipe downstream is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("maccesec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
