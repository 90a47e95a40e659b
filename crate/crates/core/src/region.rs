use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Five-digit, zero-padded county identifier. The first two digits name the state.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId([u8; 5]);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid region id {0:?}: expected exactly 5 decimal digits")]
pub struct RegionIdError(pub String);

impl RegionId {
    pub fn new(code: &str) -> Result<Self, RegionIdError> {
        let bytes = code.as_bytes();
        if bytes.len() != 5 || !bytes.iter().all(u8::is_ascii_digit) {
            return Err(RegionIdError(code.to_string()));
        }
        let mut out = [0u8; 5];
        out.copy_from_slice(bytes);
        Ok(RegionId(out))
    }

    /// Builds an id from a state number (0..=99) and county number (0..=999).
    pub fn from_parts(state: u32, county: u32) -> Result<Self, RegionIdError> {
        if state > 99 || county > 999 {
            return Err(RegionIdError(format!("{state}/{county}")));
        }
        RegionId::new(&format!("{state:02}{county:03}"))
    }

    pub fn as_str(&self) -> &str {
        // constructor guarantees ASCII digits
        std::str::from_utf8(&self.0).expect("region id is ascii")
    }

    pub fn state(&self) -> &str {
        &self.as_str()[..2]
    }
}

impl FromStr for RegionId {
    type Err = RegionIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegionId::new(s.trim())
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegionId({})", self.as_str())
    }
}

impl Serialize for RegionId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RegionId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        RegionId::new(&s).map_err(serde::de::Error::custom)
    }
}
