//! Shipped default configuration files, embedded at build time.

pub const LCID_DEFAULT_JSON: &str = include_str!("../fixtures/lcid_default.json");
pub const POLICY_TABLE2_JSON: &str = include_str!("../fixtures/policy_table2.json");
pub const CE_FIELDS_JSON: &str = include_str!("../fixtures/ce_fields.json");
pub const KEYS_DEFAULT_JSON: &str = include_str!("../fixtures/keys_default.json");
pub const CELLS_DEFAULT_CSV: &str = include_str!("../fixtures/cells_default.csv");
pub const BEAMS_DEFAULT_JSON: &str = include_str!("../fixtures/beams_default.json");
pub const SCENARIO_DEFAULT_JSON: &str = include_str!("../fixtures/scenario_default.json");
pub const OBSERVATIONS_DEFAULT_JSONL: &str = include_str!("../fixtures/observations_default.jsonl");
