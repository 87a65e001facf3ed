use std::collections::BTreeMap;

use rand::Rng;

use super::packet::{DecoyRecord, SequencePacket, EXPECTED_DECOY_STATE};
use super::{ConfigError, PartyId, Permutation, SessionConfig, SessionError};
use crate::bits::BitString;
use crate::quantum::{BellKind, ParticleRef, Pauli, QuantumRegistry};

/// What a sender remembers about one packet it dressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentRecord {
    pub round: u8,
    pub permutation: Permutation,
    pub decoys: DecoyRecord,
}

/// One participant's protocol state.
///
/// The home sequence never leaves the party; only q-side particles travel.
/// K and R are fixed at preparation and have no setters.
#[derive(Debug, Clone)]
pub struct PartyState {
    pub id: PartyId,
    pub n: usize,
    pub p_home: Vec<ParticleRef>,
    pub q_home: Vec<ParticleRef>,
    k: BitString,
    r: BitString,
    pub sent: Vec<SentRecord>,
    /// Message sequence received and restored in the previous round.
    pub held_message: Option<Vec<ParticleRef>>,
    /// Last-round packet; its message order arrives only in the announcement phase.
    pub held_final: Option<SequencePacket>,
    pub announced_r: BTreeMap<PartyId, BitString>,
    pub final_order: Option<Vec<usize>>,
    pub measurement: Option<BitString>,
    pub key: Option<BitString>,
}

impl PartyState {
    pub fn k(&self) -> &BitString {
        &self.k
    }

    pub fn r(&self) -> &BitString {
        &self.r
    }

    /// The I/X encoding pattern, `K ⊕ R`.
    pub fn encoding(&self) -> BitString {
        &self.k ^ &self.r
    }
}

/// Prepares `n` fresh Phi+ pairs and draws K then R (unless forced).
pub fn init_party<R: Rng + ?Sized>(
    config: &SessionConfig,
    id: PartyId,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> Result<PartyState, ConfigError> {
    let n = config.n;
    if n == 0 || !n.is_multiple_of(2) {
        return Err(ConfigError::BadLength(n));
    }
    let (p_home, q_home) = (0..n).map(|_| registry.new_bell_pair(BellKind::PhiPlus)).unzip();
    let (k, r) = match &config.forced_secrets {
        Some(secrets) => {
            let s = &secrets[id];
            if s.k.len() != n || s.r.len() != n {
                return Err(ConfigError::SecretLength { party: id, n });
            }
            (s.k.clone(), s.r.clone())
        }
        None => {
            let k = BitString::random(rng, n);
            (k, BitString::random(rng, n))
        }
    };
    Ok(PartyState {
        id,
        n,
        p_home,
        q_home,
        k,
        r,
        sent: Vec::new(),
        held_message: None,
        held_final: None,
        announced_r: BTreeMap::new(),
        final_order: None,
        measurement: None,
        key: None,
    })
}

/// Appends `decoy_pairs` fresh decoy pairs to `q`, permutes uniformly at
/// random, records the permutation and returns the packet for the successor.
pub fn dress_sequence<R: Rng + ?Sized>(
    party: &mut PartyState,
    q: Vec<ParticleRef>,
    origin: PartyId,
    round: u8,
    decoy_pairs: usize,
    registry: &mut QuantumRegistry,
    rng: &mut R,
) -> SequencePacket {
    let permutation = Permutation::random(rng, q.len() + 2 * decoy_pairs);
    dress_sequence_with(party, q, origin, round, decoy_pairs, registry, permutation)
}

/// [`dress_sequence`] with a caller-chosen permutation.
pub fn dress_sequence_with(
    party: &mut PartyState,
    q: Vec<ParticleRef>,
    origin: PartyId,
    round: u8,
    decoy_pairs: usize,
    registry: &mut QuantumRegistry,
    permutation: Permutation,
) -> SequencePacket {
    let n = q.len();
    let mut staged = q;
    for _ in 0..decoy_pairs {
        let (a, b) = registry.new_bell_pair(EXPECTED_DECOY_STATE);
        staged.push(a);
        staged.push(b);
    }
    let particles = permutation.apply(&staged);
    let decoys = DecoyRecord::from_permutation(&permutation, n, decoy_pairs);
    party.sent.push(SentRecord {
        round,
        permutation,
        decoys,
    });
    SequencePacket {
        particles,
        origin,
        round,
        from: party.id,
        to: party.id.successor(),
    }
}

/// Applies X to particle `i` wherever `K ⊕ R` has a 1.
pub fn encode_ops(
    party: &PartyState,
    registry: &mut QuantumRegistry,
    particles: &[ParticleRef],
) -> Result<(), SessionError> {
    if particles.len() != party.n {
        return Err(SessionError::Contract(format!(
            "{} cannot encode {} particles with a {}-bit key",
            party.id,
            particles.len(),
            party.n
        )));
    }
    for (&particle, flip) in particles.iter().zip(party.encoding().iter()) {
        let op = if flip { Pauli::X } else { Pauli::I };
        registry.apply_pauli(particle, op)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedKey {
    pub measurement: BitString,
    pub key: BitString,
    pub phase_anomalies: Vec<usize>,
}

/// Bell-measures every `(p_home[i], returned[i])` and unmasks with the two
/// announced R values: `K = M ⊕ R_other ⊕ R_other' ⊕ K_self`.
///
/// Phi-/Psi- outcomes still contribute their bit-flip component; their
/// positions are reported as phase anomalies.
pub fn derive_key(
    party: &mut PartyState,
    registry: &mut QuantumRegistry,
    returned: &[ParticleRef],
) -> Result<DerivedKey, SessionError> {
    let [y, z] = party.id.others();
    let (Some(r_y), Some(r_z)) = (party.announced_r.get(&y), party.announced_r.get(&z)) else {
        return Err(SessionError::Contract(format!(
            "{} cannot derive a key before R_{y} and R_{z} are announced",
            party.id
        )));
    };
    if returned.len() != party.n {
        return Err(SessionError::Contract(format!(
            "{} expected {} returned particles, got {}",
            party.id,
            party.n,
            returned.len()
        )));
    }
    let mut bits = Vec::with_capacity(party.n);
    let mut phase_anomalies = Vec::new();
    for (i, (&p, &q)) in party.p_home.iter().zip(returned).enumerate() {
        let kind = registry.bell_measure(p, q)?;
        if kind.phase_component() {
            phase_anomalies.push(i);
        }
        bits.push(kind.bit_flip_component());
    }
    let measurement = BitString::from_bits(bits);
    let key = &(&(&measurement ^ r_y) ^ r_z) ^ &party.k;
    party.measurement = Some(measurement.clone());
    party.key = Some(key.clone());
    Ok(DerivedKey {
        measurement,
        key,
        phase_anomalies,
    })
}
