//! Secured-frame envelope implementing the four protection tiers.
//!
//! Wire format:
//!
//! ```text
//! +---------+-----------+--------+-----------------+--------------+-------------+
//! | version | mechanism | key_id | seq (u32, BE)   | body         | tag (16)    |
//! | 0x01    | 0x01-0x04 |        |                 | PDU or ctext | M2/M4 only  |
//! +---------+-----------+--------+-----------------+--------------+-------------+
//! ```
//!
//! M2 tags `header || body` with HMAC-SHA-256 truncated to 16 bytes. M3
//! encrypts the body with AES-256 in counter mode; the initial counter block
//! is `key_id || seq || 0^7 || 0^4`, with the block counter in the last four
//! bytes. M4 encrypts as M3 and then tags the ciphertext as M2.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use aes::Aes256;
use ctr::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::codec::MacPdu;
use crate::policy::{required_mechanism, CeFieldMap, Mechanism, PolicyError, PolicyRegistry};

pub const FRAME_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 7;
pub const TAG_LEN: usize = 16;
pub const REPLAY_WINDOW_SIZE: u32 = 64;

type HmacSha256 = Hmac<Sha256>;
type Aes256Ctr = ctr::Ctr32BE<Aes256>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtectionError {
    #[error("refusing to protect an empty payload")]
    EmptyPayload,
    #[error("sequence number space exhausted")]
    SeqExhausted,
    #[error("unsupported frame version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown mechanism code {0:#04x}")]
    BadMechanism(u8),
    #[error("mechanism {0} is not accepted by this receiver")]
    MechanismNotAccepted(Mechanism),
    #[error("no key slot with id {0}")]
    UnknownKeyId(u8),
    #[error("integrity tag mismatch")]
    TagMismatch,
    #[error("sequence number {0} replayed or outside the window")]
    ReplayDetected(u32),
    #[error("frame truncated ({0} bytes)")]
    TruncatedFrame(usize),
    #[error("key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Externally provisioned key material for one key id.
#[derive(Clone, PartialEq, Eq)]
pub struct KeySlot {
    pub key_id: u8,
    pub integrity_key: [u8; 32],
    pub encryption_key: [u8; 32],
}

impl fmt::Debug for KeySlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeySlot")
            .field("key_id", &self.key_id)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
struct KeyFileEntry {
    key_id: u8,
    integrity_key_hex: String,
    encryption_key_hex: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KeyFile {
    One(KeyFileEntry),
    Many(Vec<KeyFileEntry>),
}

fn key_from_hex(hex_str: &str, what: &str) -> Result<[u8; 32], ProtectionError> {
    let bytes =
        hex::decode(hex_str).map_err(|e| ProtectionError::KeyFile(format!("{what}: {e}")))?;
    bytes.try_into().map_err(|v: Vec<u8>| {
        ProtectionError::KeyFile(format!("{what}: expected 32 bytes, got {}", v.len()))
    })
}

impl KeySlot {
    pub fn new(key_id: u8, integrity_key: [u8; 32], encryption_key: [u8; 32]) -> Self {
        Self {
            key_id,
            integrity_key,
            encryption_key,
        }
    }
}

/// Receiver-side key table plus the set of mechanisms it will accept.
#[derive(Debug, Clone)]
pub struct KeyRing {
    slots: BTreeMap<u8, KeySlot>,
    accepted: [bool; 4],
}

impl KeyRing {
    pub fn new(slots: impl IntoIterator<Item = KeySlot>) -> Self {
        Self {
            slots: slots.into_iter().map(|s| (s.key_id, s)).collect(),
            accepted: [true; 4],
        }
    }

    /// Restricts which mechanism codes are accepted. Binding the set of
    /// tiers to the receiver stops a single flipped mechanism bit from
    /// turning an M2 frame into an unauthenticated M3 one.
    pub fn with_accepted(mut self, mechanisms: &[Mechanism]) -> Self {
        self.accepted = [false; 4];
        for m in mechanisms {
            self.accepted[m.code() as usize - 1] = true;
        }
        self
    }

    pub fn accepts(&self, m: Mechanism) -> bool {
        self.accepted[m.code() as usize - 1]
    }

    pub fn get(&self, key_id: u8) -> Option<&KeySlot> {
        self.slots.get(&key_id)
    }

    pub fn slots(&self) -> impl Iterator<Item = &KeySlot> {
        self.slots.values()
    }

    /// Accepts a single `{key_id, integrity_key_hex, encryption_key_hex}`
    /// object or an array of them.
    pub fn from_json(text: &str) -> Result<Self, ProtectionError> {
        let file: KeyFile =
            serde_json::from_str(text).map_err(|e| ProtectionError::KeyFile(e.to_string()))?;
        let entries = match file {
            KeyFile::One(e) => vec![e],
            KeyFile::Many(v) => v,
        };
        let mut slots = Vec::with_capacity(entries.len());
        for e in entries {
            slots.push(KeySlot::new(
                e.key_id,
                key_from_hex(&e.integrity_key_hex, "integrity_key_hex")?,
                key_from_hex(&e.encryption_key_hex, "encryption_key_hex")?,
            ));
        }
        Ok(Self::new(slots))
    }

    pub fn load(path: &Path) -> Result<Self, ProtectionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProtectionError::KeyFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Default for KeyRing {
    fn default() -> Self {
        Self::from_json(crate::fixtures::KEYS_DEFAULT_JSON).expect("shipped key file is valid")
    }
}

/// Parsed secured frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecuredFrame {
    pub version: u8,
    pub mechanism: Mechanism,
    pub key_id: u8,
    pub seq: u32,
    pub body: Vec<u8>,
    pub tag: Option<[u8; TAG_LEN]>,
}

impl SecuredFrame {
    pub fn header(&self) -> [u8; HEADER_LEN] {
        let s = self.seq.to_be_bytes();
        [
            self.version,
            self.mechanism.code(),
            self.key_id,
            s[0],
            s[1],
            s[2],
            s[3],
        ]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.body.len() + TAG_LEN);
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.body);
        if let Some(tag) = &self.tag {
            out.extend_from_slice(tag);
        }
        out
    }

    /// Structural parse only; no key material involved.
    pub fn decode(bytes: &[u8]) -> Result<Self, ProtectionError> {
        if bytes.len() < HEADER_LEN {
            return Err(ProtectionError::TruncatedFrame(bytes.len()));
        }
        if bytes[0] != FRAME_VERSION {
            return Err(ProtectionError::BadVersion(bytes[0]));
        }
        let mechanism =
            Mechanism::from_code(bytes[1]).ok_or(ProtectionError::BadMechanism(bytes[1]))?;
        let key_id = bytes[2];
        let seq = u32::from_be_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]);
        let tag_len = if mechanism.integrity() { TAG_LEN } else { 0 };
        if bytes.len() < HEADER_LEN + tag_len + 1 {
            return Err(ProtectionError::TruncatedFrame(bytes.len()));
        }
        let body_end = bytes.len() - tag_len;
        let tag = mechanism.integrity().then(|| {
            let mut t = [0u8; TAG_LEN];
            t.copy_from_slice(&bytes[body_end..]);
            t
        });
        Ok(Self {
            version: bytes[0],
            mechanism,
            key_id,
            seq,
            body: bytes[HEADER_LEN..body_end].to_vec(),
            tag,
        })
    }

    /// Byte range of the body within the encoded frame.
    pub fn body_range(&self) -> std::ops::Range<usize> {
        HEADER_LEN..HEADER_LEN + self.body.len()
    }
}

/// Sliding anti-replay window over 32-bit sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayWindow {
    highest: Option<u32>,
    /// Bit i set means `highest - i` has been seen.
    bitmap: u64,
}

impl ReplayWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn highest(&self) -> Option<u32> {
        self.highest
    }

    pub fn check(&self, seq: u32) -> Result<(), ProtectionError> {
        let Some(high) = self.highest else {
            return Ok(());
        };
        if seq > high {
            return Ok(());
        }
        let age = high - seq;
        if age >= REPLAY_WINDOW_SIZE || self.bitmap & (1 << age) != 0 {
            return Err(ProtectionError::ReplayDetected(seq));
        }
        Ok(())
    }

    /// Records `seq` as seen. Call only after [`check`](Self::check) passed
    /// and the frame authenticated.
    pub fn commit(&mut self, seq: u32) {
        match self.highest {
            None => {
                self.highest = Some(seq);
                self.bitmap = 1;
            }
            Some(high) if seq > high => {
                let shift = seq - high;
                self.bitmap = if shift >= REPLAY_WINDOW_SIZE {
                    0
                } else {
                    self.bitmap << shift
                };
                self.bitmap |= 1;
                self.highest = Some(seq);
            }
            Some(high) => {
                let age = high - seq;
                if age < REPLAY_WINDOW_SIZE {
                    self.bitmap |= 1 << age;
                }
            }
        }
    }
}

/// Full HMAC-SHA-256.
pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(data);
    mac.finalize().into_bytes().into()
}

fn frame_tag(slot: &KeySlot, header: &[u8], body: &[u8]) -> [u8; TAG_LEN] {
    let mut mac = HmacSha256::new_from_slice(&slot.integrity_key).expect("32-byte key");
    mac.update(header);
    mac.update(body);
    let full = mac.finalize().into_bytes();
    let mut tag = [0u8; TAG_LEN];
    tag.copy_from_slice(&full[..TAG_LEN]);
    tag
}

/// Initial counter block: `key_id || seq || zeros`, block counter in bytes 12..16.
pub fn counter_block(key_id: u8, seq: u32) -> [u8; 16] {
    let mut iv = [0u8; 16];
    iv[0] = key_id;
    iv[1..5].copy_from_slice(&seq.to_be_bytes());
    iv
}

fn apply_keystream(slot: &KeySlot, seq: u32, data: &mut [u8]) {
    let iv = counter_block(slot.key_id, seq);
    let mut cipher = Aes256Ctr::new(&slot.encryption_key.into(), &iv.into());
    cipher.apply_keystream(data);
}

/// Wraps `pdu` under `mechanism`. The caller guarantees `seq` is fresh for
/// this slot.
pub fn protect(
    pdu: &[u8],
    mechanism: Mechanism,
    slot: &KeySlot,
    seq: u32,
) -> Result<Vec<u8>, ProtectionError> {
    if pdu.is_empty() {
        return Err(ProtectionError::EmptyPayload);
    }
    if seq == u32::MAX {
        return Err(ProtectionError::SeqExhausted);
    }
    let mut frame = SecuredFrame {
        version: FRAME_VERSION,
        mechanism,
        key_id: slot.key_id,
        seq,
        body: pdu.to_vec(),
        tag: None,
    };
    if mechanism.confidentiality() {
        apply_keystream(slot, seq, &mut frame.body);
    }
    if mechanism.integrity() {
        frame.tag = Some(frame_tag(slot, &frame.header(), &frame.body));
    }
    Ok(frame.encode())
}

/// Verifies, replay-checks, and unwraps a frame. The window is only
/// updated when every check passes.
pub fn unprotect(
    frame_bytes: &[u8],
    keys: &KeyRing,
    window: &mut ReplayWindow,
) -> Result<(Mechanism, Vec<u8>), ProtectionError> {
    let frame = SecuredFrame::decode(frame_bytes)?;
    if !keys.accepts(frame.mechanism) {
        return Err(ProtectionError::MechanismNotAccepted(frame.mechanism));
    }
    let slot = keys
        .get(frame.key_id)
        .ok_or(ProtectionError::UnknownKeyId(frame.key_id))?;
    if let Some(tag) = &frame.tag {
        let expected = frame_tag(slot, &frame.header(), &frame.body);
        if !bool::from(expected.ct_eq(tag)) {
            return Err(ProtectionError::TagMismatch);
        }
    }
    if frame.mechanism != Mechanism::M1 {
        window.check(frame.seq)?;
    }
    let mut body = frame.body;
    if frame.mechanism.confidentiality() {
        apply_keystream(slot, frame.seq, &mut body);
    }
    if frame.mechanism != Mechanism::M1 {
        window.commit(frame.seq);
    }
    Ok((frame.mechanism, body))
}

/// Protects an assembled PDU with the mechanism its sensitive fields require.
pub fn protect_per_policy(
    pdu: &MacPdu,
    policy: &PolicyRegistry,
    map: &CeFieldMap,
    slot: &KeySlot,
    seq: u32,
) -> Result<Vec<u8>, ProtectionError> {
    let mechanism = required_mechanism(pdu, map, policy)?;
    let bytes = pdu.encode().map_err(PolicyError::from)?;
    protect(&bytes, mechanism, slot, seq)
}
