//! Append-only record of every quantum and classical event in a session.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::PartyId;
use crate::bits::BitString;
use crate::quantum::BellKind;

/// Who performed an event. `Eve` is the external eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    A,
    B,
    C,
    Eve,
}

impl From<PartyId> for Actor {
    fn from(p: PartyId) -> Self {
        match p {
            PartyId::A => Actor::A,
            PartyId::B => Actor::B,
            PartyId::C => Actor::C,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Actor::A => "A",
            Actor::B => "B",
            Actor::C => "C",
            Actor::Eve => "Eve",
        };
        f.write_str(s)
    }
}

/// A directed quantum hop within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub from: PartyId,
    pub to: PartyId,
    pub round: u8,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} (round {})", self.from, self.to, self.round)
    }
}

/// Traffic outside the official protocol flow. Recorded for the experimenter;
/// never delivered to honest parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SideChannelData {
    /// Eve's Z-basis readings of intercepted particles.
    InterceptGuess {
        hop: Hop,
        positions: Vec<usize>,
        bits: BitString,
    },
    /// Colluders pool their private K and R strings.
    ShareSecrets {
        to: PartyId,
    },
    /// Particles handed between colluders.
    ParticleTransfer {
        to: PartyId,
        count: usize,
    },
    /// Result of the early Bell measurement on the victim-encoded sequence.
    EarlyMeasurement {
        victim_k_xor_r: BitString,
    },
    RecoveredKey {
        victim: PartyId,
        k: BitString,
    },
    Forgery {
        party: PartyId,
        true_r: BitString,
        forged_r: BitString,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        predicted_victim_key: Option<BitString>,
    },
    /// A colluder replaces its derived key with the manipulated one.
    AdoptKey {
        party: PartyId,
        key: BitString,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventKind {
    Prepare {
        pairs: usize,
    },
    Dress {
        round: u8,
        decoy_pairs: usize,
        length: usize,
    },
    QuantumSend {
        round: u8,
        to: PartyId,
        length: usize,
    },
    Ack {
        round: u8,
        from: PartyId,
    },
    /// Decoy positions for the check; message order too except in the last round.
    PermutationReveal {
        round: u8,
        to: PartyId,
        decoy_pairs: Vec<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        message_positions: Option<Vec<usize>>,
    },
    DecoyCheck {
        round: u8,
        from: PartyId,
        pairs: usize,
        failures: usize,
        outcomes: Vec<BellKind>,
        passed: bool,
    },
    Encode {
        round: u8,
        length: usize,
    },
    RReveal {
        value: BitString,
    },
    FinalPermutationReveal {
        to: PartyId,
        message_positions: Vec<usize>,
    },
    Measure {
        m: BitString,
        /// Message positions whose outcome carried a phase flip (Phi- or Psi-).
        phase_anomalies: Vec<usize>,
    },
    DeriveKey {
        key: BitString,
    },
    Abort {
        hop: Hop,
        reason: String,
    },
    SideChannel(SideChannelData),
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Prepare { .. } => "prepare",
            EventKind::Dress { .. } => "dress",
            EventKind::QuantumSend { .. } => "quantum-send",
            EventKind::Ack { .. } => "ack",
            EventKind::PermutationReveal { .. } => "permutation-reveal",
            EventKind::DecoyCheck { .. } => "decoy-check",
            EventKind::Encode { .. } => "encode",
            EventKind::RReveal { .. } => "r-reveal",
            EventKind::FinalPermutationReveal { .. } => "final-permutation-reveal",
            EventKind::Measure { .. } => "measure",
            EventKind::DeriveKey { .. } => "derive-key",
            EventKind::Abort { .. } => "abort",
            EventKind::SideChannel(_) => "side-channel",
        }
    }

    /// Broadcast or physically observable by every participant.
    pub fn is_public(&self) -> bool {
        matches!(
            self,
            EventKind::QuantumSend { .. }
                | EventKind::Ack { .. }
                | EventKind::PermutationReveal { .. }
                | EventKind::DecoyCheck { .. }
                | EventKind::RReveal { .. }
                | EventKind::FinalPermutationReveal { .. }
                | EventKind::Abort { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub step: u8,
    pub actor: Actor,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    /// Whether `party` could observe this event through official channels.
    pub fn visible_to(&self, party: PartyId) -> bool {
        match self.kind {
            EventKind::SideChannel(_) => false,
            ref k if k.is_public() => true,
            _ => self.actor == Actor::from(party),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event. Panics if the transcript already ended in an abort.
    pub fn push(&mut self, step: u8, actor: impl Into<Actor>, kind: EventKind) {
        assert!(!self.is_aborted(), "abort is terminal");
        let seq = self.events.len() as u64;
        self.events.push(Event {
            seq,
            step,
            actor: actor.into(),
            kind,
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn is_aborted(&self) -> bool {
        matches!(
            self.events.last(),
            Some(Event {
                kind: EventKind::Abort { .. },
                ..
            })
        )
    }

    pub fn visible_to(&self, party: PartyId) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.visible_to(party))
    }

    /// `(pairs checked, pairs failed)` over every decoy check.
    pub fn decoy_totals(&self) -> (usize, usize) {
        self.events.iter().fold((0, 0), |(p, f), e| match &e.kind {
            EventKind::DecoyCheck { pairs, failures, .. } => (p + pairs, f + failures),
            _ => (p, f),
        })
    }
}
