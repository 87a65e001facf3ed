use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::packet::{eavesdrop_check, restore_order};
use super::party::{derive_key, dress_sequence, encode_ops, init_party, PartyState};
use super::{Announcement, ConfigError, EventKind, Hop, PartyId, PartySecrets, PerParty, SessionConfig, Transcript};
use crate::adversary::{Adversary, AdversaryError, CollusionState};
use crate::bits::BitString;
use crate::quantum::{ParticleRef, QuantumError, QuantumRegistry};

const SESSION_STREAM: u64 = 0;
const QUANTUM_STREAM: u64 = 1;
const ADVERSARY_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("attack infeasible: {0}")]
    AttackInfeasible(String),
}

impl From<AdversaryError> for SessionError {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Contract(m) => SessionError::Contract(m),
            AdversaryError::AttackInfeasible(m) => SessionError::AttackInfeasible(m),
            AdversaryError::Quantum(q) => SessionError::Quantum(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Ok,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys: Option<PerParty<BitString>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_hop: Option<Hop>,
}

/// Experimenter-side view of the parties' private state. Not serialized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionDetails {
    pub secrets: PerParty<PartySecrets>,
    /// Bell-measurement strings `M` from the final step.
    pub measurements: PerParty<Option<BitString>>,
    /// Keys as each party computed them from the official announcements,
    /// before any colluder replaced its own.
    pub derived_keys: PerParty<Option<BitString>>,
    pub phase_anomalies: PerParty<Vec<usize>>,
    pub home: PerParty<Vec<ParticleRef>>,
    /// Each party's own q-sequence as restored after the last round.
    pub returned: PerParty<Vec<ParticleRef>>,
    pub collusion: Option<CollusionState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub config: SessionConfig,
    pub events: Transcript,
    pub outcome: Outcome,
    #[serde(skip)]
    pub details: SessionDetails,
}

impl SessionResult {
    pub fn is_aborted(&self) -> bool {
        self.outcome.status == SessionStatus::Abort
    }

    pub fn keys(&self) -> Option<&PerParty<BitString>> {
        self.outcome.keys.as_ref()
    }

    /// All three parties hold the same key.
    pub fn agreed(&self) -> bool {
        self.keys().is_some_and(|k| k.a == k.b && k.b == k.c)
    }

    /// `K_A ⊕ K_B ⊕ K_C` from the stored secrets.
    pub fn honest_key(&self) -> BitString {
        let s = &self.details.secrets;
        &(&s.a.k ^ &s.b.k) ^ &s.c.k
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session results always serialize")
    }
}

enum Completion {
    Keys(PerParty<BitString>),
    Aborted(Hop),
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs one complete session.
///
/// Three independent random streams are derived from the seed: one for the
/// parties' secrets and permutations, one for measurement collapse, and one
/// for the adversary. Honest-party randomness is therefore the same with and
/// without an adversary for a given seed.
pub fn run_session(config: &SessionConfig) -> Result<SessionResult, SessionError> {
    config.validate()?;
    let mut session = Session {
        registry: QuantumRegistry::from_rng(stream(config.seed, QUANTUM_STREAM)),
        rng: stream(config.seed, SESSION_STREAM),
        adversary: Adversary::new(
            config.adversary.clone(),
            config.n,
            stream(config.seed, ADVERSARY_STREAM),
        ),
        transcript: Transcript::new(),
        config: config.clone(),
    };
    let parties = session.prepare()?;
    let mut parties = parties;
    let completion = session.execute(&mut parties)?;
    Ok(session.finish(parties, completion))
}

struct Session {
    config: SessionConfig,
    registry: QuantumRegistry,
    rng: ChaCha8Rng,
    adversary: Adversary,
    transcript: Transcript,
}

impl Session {
    fn prepare(&mut self) -> Result<PerParty<PartyState>, SessionError> {
        let mut prepared = Vec::with_capacity(3);
        for id in PartyId::ALL {
            prepared.push(init_party(&self.config, id, &mut self.registry, &mut self.rng)?);
            self.transcript.push(1, id, EventKind::Prepare { pairs: self.config.n });
        }
        let mut it = prepared.into_iter();
        let parties = PerParty::from_fn(|_| it.next().expect("three parties"));
        self.adversary.setup(&parties, &mut self.transcript);
        Ok(parties)
    }

    fn execute(&mut self, parties: &mut PerParty<PartyState>) -> Result<Completion, SessionError> {
        for round in 0..3u8 {
            if let Some(hop) = self.run_round(parties, round)? {
                return Ok(Completion::Aborted(hop));
            }
        }
        self.announce(parties)?;

        let mut keys = PerParty::<BitString>::default();
        for id in PartyId::ALL {
            let party = &mut parties[id];
            let (Some(packet), Some(order)) = (party.held_final.take(), party.final_order.clone()) else {
                return Err(SessionError::Contract(format!("{id} is missing its returned sequence")));
            };
            let returned = restore_order(&packet, &order)
                .ok_or_else(|| SessionError::Contract(format!("bad final ordering for {id}")))?;
            let derived = derive_key(party, &mut self.registry, &returned)?;
            party.held_message = Some(returned);
            self.transcript.push(
                8,
                id,
                EventKind::Measure {
                    m: derived.measurement,
                    phase_anomalies: derived.phase_anomalies,
                },
            );
            self.transcript.push(
                8,
                id,
                EventKind::DeriveKey {
                    key: derived.key.clone(),
                },
            );
            keys[id] = derived.key;
        }
        self.adversary.finalize(&mut keys, &mut self.transcript)?;
        Ok(Completion::Keys(keys))
    }

    /// One transmission round: every party sends, then every hop is checked.
    /// Returns the failing hop on abort.
    fn run_round(&mut self, parties: &mut PerParty<PartyState>, round: u8) -> Result<Option<Hop>, SessionError> {
        let send_step = 2 + 2 * round;
        let check_step = send_step + 1;
        let decoy_pairs = self.config.decoy_pairs_per_hop;

        let mut in_transit = Vec::with_capacity(3);
        for sender in PartyId::ALL {
            // the sequence a party forwards in round r started at the party r hops back
            let origin = (0..round).fold(sender, |p, _| p.predecessor());
            let sequence = if round == 0 {
                parties[sender].q_home.clone()
            } else {
                let seq = parties[sender].held_message.take().ok_or_else(|| {
                    SessionError::Contract(format!("{sender} has nothing to forward in round {round}"))
                })?;
                self.adversary.before_encode(
                    send_step,
                    round,
                    sender,
                    &seq,
                    parties,
                    &mut self.registry,
                    &mut self.transcript,
                )?;
                encode_ops(&parties[sender], &mut self.registry, &seq)?;
                self.transcript.push(
                    send_step,
                    sender,
                    EventKind::Encode {
                        round,
                        length: seq.len(),
                    },
                );
                seq
            };
            let packet = dress_sequence(
                &mut parties[sender],
                sequence,
                origin,
                round,
                decoy_pairs,
                &mut self.registry,
                &mut self.rng,
            );
            self.transcript.push(
                send_step,
                sender,
                EventKind::Dress {
                    round,
                    decoy_pairs,
                    length: packet.len(),
                },
            );
            self.transcript.push(
                send_step,
                sender,
                EventKind::QuantumSend {
                    round,
                    to: packet.to,
                    length: packet.len(),
                },
            );
            self.adversary
                .on_transit(send_step, &packet, &mut self.registry, &mut self.transcript)?;
            in_transit.push(packet);
        }

        for packet in in_transit {
            let (from, to) = (packet.from, packet.to);
            let hop = Hop { from, to, round };
            // the permutation is only revealed once the receiver has acknowledged receipt
            self.transcript.push(check_step, to, EventKind::Ack { round, from });
            let record = parties[from]
                .sent
                .last()
                .map(|s| s.decoys.clone())
                .ok_or_else(|| SessionError::Contract(format!("{from} has no record of its packet")))?;
            let message_positions = (round < 2).then(|| record.message_positions.clone());
            self.transcript.push(
                check_step,
                from,
                EventKind::PermutationReveal {
                    round,
                    to,
                    decoy_pairs: record.decoy_pairs.clone(),
                    message_positions: message_positions.clone(),
                },
            );
            let check = eavesdrop_check(
                &mut self.registry,
                &packet,
                &record.decoy_pairs,
                self.config.error_tolerance,
            )?;
            let passed = check.passed;
            let reason = format!("{} of {} decoy pairs failed", check.failures, check.pairs);
            self.transcript.push(
                check_step,
                to,
                EventKind::DecoyCheck {
                    round,
                    from,
                    pairs: check.pairs,
                    failures: check.failures,
                    outcomes: check.outcomes,
                    passed,
                },
            );
            if !passed {
                self.transcript.push(check_step, to, EventKind::Abort { hop, reason });
                return Ok(Some(hop));
            }
            match message_positions {
                Some(positions) => {
                    let restored = restore_order(&packet, &positions)
                        .ok_or_else(|| SessionError::Contract(format!("bad ordering revealed on {hop}")))?;
                    parties[to].held_message = Some(restored);
                }
                None => parties[to].held_final = Some(packet),
            }
        }
        Ok(None)
    }

    /// Runs the announcement schedule batch by batch. Values within a batch
    /// are fixed before any of them becomes public.
    fn announce(&mut self, parties: &mut PerParty<PartyState>) -> Result<(), SessionError> {
        let order = self.config.announce_order.clone();
        for batch in order.batches() {
            let mut committed = Vec::with_capacity(batch.len());
            for &a in batch {
                let value = match a {
                    Announcement::RevealR(p) => {
                        Some(self.adversary.announce_r(p, parties[p].r(), &mut self.transcript)?)
                    }
                    Announcement::RevealFinalPermutation(_) => None,
                };
                committed.push((a, value));
            }
            for (a, value) in committed {
                match (a, value) {
                    (Announcement::RevealR(p), Some(value)) => {
                        self.transcript.push(8, p, EventKind::RReveal { value: value.clone() });
                        for other in p.others() {
                            parties[other].announced_r.insert(p, value.clone());
                        }
                        self.adversary.observe_r(p, &value, &mut self.transcript)?;
                    }
                    (Announcement::RevealFinalPermutation(p), _) => {
                        let record = parties[p]
                            .sent
                            .get(2)
                            .ok_or_else(|| SessionError::Contract(format!("{p} sent no final packet")))?;
                        let positions = record.decoys.message_positions.clone();
                        let to = p.successor();
                        self.transcript.push(
                            8,
                            p,
                            EventKind::FinalPermutationReveal {
                                to,
                                message_positions: positions.clone(),
                            },
                        );
                        parties[to].final_order = Some(positions);
                    }
                    (Announcement::RevealR(_), None) => unreachable!("R reveals always carry a value"),
                }
            }
        }
        Ok(())
    }

    fn finish(self, parties: PerParty<PartyState>, completion: Completion) -> SessionResult {
        let outcome = match completion {
            Completion::Keys(keys) => Outcome {
                status: SessionStatus::Ok,
                keys: Some(keys),
                abort_hop: None,
            },
            Completion::Aborted(hop) => Outcome {
                status: SessionStatus::Abort,
                keys: None,
                abort_hop: Some(hop),
            },
        };
        let details = SessionDetails {
            secrets: parties.map(|_, p| PartySecrets {
                k: p.k().clone(),
                r: p.r().clone(),
            }),
            measurements: parties.map(|_, p| p.measurement.clone()),
            derived_keys: parties.map(|_, p| p.key.clone()),
            phase_anomalies: PerParty::from_fn(|id| {
                self.transcript
                    .events()
                    .iter()
                    .filter(|e| e.actor == id.into())
                    .find_map(|e| match &e.kind {
                        EventKind::Measure { phase_anomalies, .. } => Some(phase_anomalies.clone()),
                        _ => None,
                    })
                    .unwrap_or_default()
            }),
            home: parties.map(|_, p| p.p_home.clone()),
            returned: parties.map(|_, p| {
                if p.key.is_some() {
                    p.held_message.clone().unwrap_or_default()
                } else {
                    Vec::new()
                }
            }),
            collusion: self.adversary.into_collusion(),
        };
        SessionResult {
            config: self.config,
            events: self.transcript,
            outcome,
            details,
        }
    }
}
