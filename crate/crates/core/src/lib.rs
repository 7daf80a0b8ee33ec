//! MAC control element codec, differentiated protection framing, and the
//! eavesdropping, tampering, and location-inference attacks that motivate it.

pub mod adversary;
pub mod bits;
pub mod codec;
pub mod fields;
pub mod fixtures;
pub mod geo;
pub mod policy;
pub mod protection;

pub use fields::FieldId;
