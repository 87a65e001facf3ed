use serde::{Deserialize, Serialize};

use super::{PartyId, Permutation};
use crate::quantum::{BellKind, ParticleRef, QuantumError, QuantumRegistry};

/// Every decoy pair is prepared in this state and must be found in it.
pub const EXPECTED_DECOY_STATE: BellKind = BellKind::PhiPlus;

/// A dressed, permuted sequence in transit on one quantum hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePacket {
    pub particles: Vec<ParticleRef>,
    /// Owner of the home sequence these message particles are entangled with.
    pub origin: PartyId,
    pub round: u8,
    pub from: PartyId,
    pub to: PartyId,
}

impl SequencePacket {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Sender-side knowledge of where things ended up after permutation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecoyRecord {
    /// `message_positions[i]` is the packet position of message particle `i`.
    pub message_positions: Vec<usize>,
    /// Packet positions of the two halves of each decoy pair.
    pub decoy_pairs: Vec<[usize; 2]>,
}

impl DecoyRecord {
    /// Layout before permutation is `message ++ [d0.first, d0.second, d1.first, ...]`.
    pub fn from_permutation(permutation: &Permutation, n: usize, decoy_pairs: usize) -> Self {
        let fwd = permutation.forward();
        assert_eq!(fwd.len(), n + 2 * decoy_pairs, "permutation covers the whole packet");
        DecoyRecord {
            message_positions: fwd[..n].to_vec(),
            decoy_pairs: (0..decoy_pairs).map(|j| [fwd[n + 2 * j], fwd[n + 2 * j + 1]]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pairs: usize,
    pub failures: usize,
    pub outcomes: Vec<BellKind>,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn failure_rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.failures as f64 / self.pairs as f64
        }
    }
}

/// Receiver-side decoy check: Bell-measure every revealed decoy pair and
/// compare against [`EXPECTED_DECOY_STATE`].
///
/// Positions that are out of range or do not name the two halves of one pair
/// count as failures. The check fails when the failure fraction exceeds
/// `tolerance`.
pub fn eavesdrop_check(
    registry: &mut QuantumRegistry,
    packet: &SequencePacket,
    decoy_pairs: &[[usize; 2]],
    tolerance: f64,
) -> Result<CheckOutcome, QuantumError> {
    let mut failures = 0;
    let mut outcomes = Vec::with_capacity(decoy_pairs.len());
    for &[i, j] in decoy_pairs {
        let (Some(&a), Some(&b)) = (packet.particles.get(i), packet.particles.get(j)) else {
            failures += 1;
            continue;
        };
        match registry.bell_measure(a, b) {
            Ok(kind) => {
                if kind != EXPECTED_DECOY_STATE {
                    failures += 1;
                }
                outcomes.push(kind);
            }
            Err(QuantumError::MismatchedPair { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let pairs = decoy_pairs.len();
    let rate = if pairs == 0 {
        0.0
    } else {
        failures as f64 / pairs as f64
    };
    Ok(CheckOutcome {
        pairs,
        failures,
        outcomes,
        passed: rate <= tolerance,
    })
}

/// Drops the decoys and puts the message particles back in their original order.
pub fn restore_order(packet: &SequencePacket, message_positions: &[usize]) -> Option<Vec<ParticleRef>> {
    message_positions
        .iter()
        .map(|&pos| packet.particles.get(pos).copied())
        .collect()
}
