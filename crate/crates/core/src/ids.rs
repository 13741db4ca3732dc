//! Identifier newtypes shared by every layer: block and transaction hashes,
//! validator indices and slots.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Slot number. Genesis lives at slot `-1`.
pub type Slot = i64;

/// Round number of the global clock.
pub type Round = u64;

/// Hash function recorded in trace metadata.
pub const HASH_FUNCTION: &str = "sha256";

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

macro_rules! hash_id {
    ($name:ident) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub const ZERO: $name = $name([0u8; 32]);

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s, &mut out)?;
                Ok($name(out))
            }

            /// First four bytes in hex, for logs and the demo page.
            pub fn short(&self) -> String {
                hex::encode(&self.0[..4])
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.short())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.short())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $name::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hash_id!(BlockId);
hash_id!(TxId);
hash_id!(MsgId);

impl TxId {
    /// Deterministic transaction id for the `index`-th transaction injected at `round`.
    pub fn derive(round: Round, index: u32) -> TxId {
        let mut buf = Vec::with_capacity(14);
        buf.extend_from_slice(b"tx");
        buf.extend_from_slice(&round.to_le_bytes());
        buf.extend_from_slice(&index.to_le_bytes());
        TxId(sha256(&buf))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorId(pub u32);

impl ValidatorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// `⌈2n/3⌉`: the smallest integer count `c` with `3c >= 2n`.
pub fn supermajority(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

/// `⌈n/3⌉`.
pub fn one_third(n: usize) -> usize {
    n.div_ceil(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(supermajority(3), 2);
        assert_eq!(supermajority(4), 3);
        assert_eq!(supermajority(9), 6);
        assert_eq!(supermajority(10), 7);
        assert_eq!(supermajority(100), 67);
        assert_eq!(one_third(9), 3);
        assert_eq!(one_third(10), 4);
        for n in 1..200usize {
            let c = supermajority(n);
            assert!(3 * c >= 2 * n && 3 * (c - 1) < 2 * n);
        }
    }

    #[test]
    fn hex_round_trip() {
        let id = TxId::derive(3, 1);
        assert_eq!(TxId::from_hex(&id.to_hex()).unwrap(), id);
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(serde_json::from_str::<TxId>(&json).unwrap(), id);
    }
}
