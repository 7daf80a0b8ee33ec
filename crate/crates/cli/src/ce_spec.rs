//! Command-line CE notation.
//!
//! Three forms are accepted:
//! `crnti=0x4601` for single-field CEs, `kind:field=value,...`, and a raw
//! JSON object in the library's serde layout.

use maccesec::codec::MacCe;
use serde_json::{Map, Value};

use crate::error::CliError;

fn single_field(kind: &str) -> Option<&'static str> {
    match kind {
        "crnti" => Some("crnti"),
        "ta_report" => Some("ta_value"),
        _ => None,
    }
}

fn parse_value(key: &str, raw: &str) -> Result<Value, CliError> {
    let raw = raw.trim();
    if key == "s_bits" {
        return raw
            .chars()
            .map(|c| match c {
                '0' => Ok(Value::Bool(false)),
                '1' => Ok(Value::Bool(true)),
                _ => Err(CliError::Parse(format!(
                    "s_bits must be a 0/1 string, got {raw:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array);
    }
    match raw {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    let n = if let Some(h) = raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")) {
        u64::from_str_radix(h, 16)
    } else {
        raw.parse()
    }
    .map_err(|_| CliError::Parse(format!("{key}: {raw:?} is not a number")))?;
    Ok(Value::from(n))
}

pub fn parse_ce(spec: &str) -> Result<MacCe, CliError> {
    let spec = spec.trim();
    let obj = if spec.starts_with('{') {
        serde_json::from_str(spec)?
    } else if let Some((kind, rest)) = spec.split_once(':') {
        let mut m = Map::new();
        m.insert("kind".into(), Value::from(kind.trim()));
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("expected field=value, got {kv:?}")))?;
            m.insert(k.trim().into(), parse_value(k.trim(), v)?);
        }
        Value::Object(m)
    } else if let Some((kind, v)) = spec.split_once('=') {
        let kind = kind.trim();
        let field = single_field(kind)
            .ok_or_else(|| CliError::Parse(format!("{kind} needs the kind:field=value form")))?;
        let mut m = Map::new();
        m.insert("kind".into(), Value::from(kind));
        m.insert(field.into(), parse_value(field, v)?);
        Value::Object(m)
    } else {
        return Err(CliError::Parse(format!("cannot parse CE {spec:?}")));
    };
    serde_json::from_value(obj).map_err(|e| CliError::Parse(format!("CE {spec:?}: {e}")))
}
