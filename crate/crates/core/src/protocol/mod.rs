//! The three-party ring protocol: per-party state machines and the session
//! scheduler that drives them through preparation, three rounds of dressed
//! transmission with eavesdropping checks, and the final announcement phase.

mod config;
mod packet;
mod party;
mod permutation;
mod session;
mod transcript;

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{AnnounceOrder, Announcement, ConfigError, ForcedSecrets, PartySecrets, SessionConfig};
pub use packet::{eavesdrop_check, restore_order, CheckOutcome, DecoyRecord, SequencePacket, EXPECTED_DECOY_STATE};
pub use party::{derive_key, dress_sequence, dress_sequence_with, encode_ops, init_party, PartyState, SentRecord};
pub use permutation::Permutation;
pub use session::{run_session, Outcome, SessionDetails, SessionError, SessionResult, SessionStatus};
pub use transcript::{Actor, Event, EventKind, Hop, SideChannelData, Transcript};

/// One of the three ring participants. Quantum sequences travel A → B → C → A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyId {
    A,
    B,
    C,
}

impl PartyId {
    pub const ALL: [PartyId; 3] = [PartyId::A, PartyId::B, PartyId::C];

    pub fn successor(self) -> PartyId {
        match self {
            PartyId::A => PartyId::B,
            PartyId::B => PartyId::C,
            PartyId::C => PartyId::A,
        }
    }

    pub fn predecessor(self) -> PartyId {
        self.successor().successor()
    }

    /// The two parties other than `self`, in ring order starting after `self`.
    pub fn others(self) -> [PartyId; 2] {
        [self.successor(), self.predecessor()]
    }

    pub fn name(self) -> &'static str {
        match self {
            PartyId::A => "Alice",
            PartyId::B => "Bob",
            PartyId::C => "Charlie",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PartyId::A => "A",
            PartyId::B => "B",
            PartyId::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for PartyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" | "Alice" | "alice" => Ok(PartyId::A),
            "B" | "b" | "Bob" | "bob" => Ok(PartyId::B),
            "C" | "c" | "Charlie" | "charlie" => Ok(PartyId::C),
            other => Err(format!("unknown party {other:?}")),
        }
    }
}

/// One value per party, serialized as `{"A": .., "B": .., "C": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerParty<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
    #[serde(rename = "C")]
    pub c: T,
}

impl<T> PerParty<T> {
    pub fn from_fn(mut f: impl FnMut(PartyId) -> T) -> Self {
        PerParty {
            a: f(PartyId::A),
            b: f(PartyId::B),
            c: f(PartyId::C),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(PartyId, &T) -> U) -> PerParty<U> {
        PerParty::from_fn(|id| f(id, &self[id]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (PartyId, &T)> {
        PartyId::ALL.into_iter().map(move |id| (id, &self[id]))
    }
}

impl<T> Index<PartyId> for PerParty<T> {
    type Output = T;

    fn index(&self, id: PartyId) -> &T {
        match id.index() {
            0 => &self.a,
            1 => &self.b,
            _ => &self.c,
        }
    }
}

impl<T> IndexMut<PartyId> for PerParty<T> {
    fn index_mut(&mut self, id: PartyId) -> &mut T {
        match id.index() {
            0 => &mut self.a,
            1 => &mut self.b,
            _ => &mut self.c,
        }
    }
}
