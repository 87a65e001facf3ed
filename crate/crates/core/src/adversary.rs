//! Adversaries hooked into a running session.
//!
//! Two strategies are modeled:
//!
//! * an external intercept-resend eavesdropper that Z-measures particles on
//!   one quantum hop and forwards them, which disturbs the decoy pairs;
//! * two insiders colluding against the third party (the victim). The
//!   participant who holds the victim-encoded copy of the other colluder's
//!   sequence hands it over before encoding it; the other colluder owns the
//!   matching home particles and Bell-measures them, learning the victim's
//!   `K ⊕ R`. Once the victim announces R, its private K follows, and one
//!   colluder announces a forged R that steers the victim's derived key.
//!
//! The early measurement only ever sees Phi+/Psi+ eigenstates, so it leaves
//! every later outcome unchanged and the official transcript looks exactly
//! like an honest run.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::protocol::{
    Actor, ConfigError, EventKind, Hop, PartyId, PartyState, PerParty, SequencePacket, SideChannelData, Transcript,
};
use crate::quantum::{ParticleRef, QuantumError, QuantumRegistry, Slot};

/// Round in which the holder receives the victim-encoded copy of the owner's sequence.
pub const EARLY_MEASURE_ROUND: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("attack infeasible: {0}")]
    AttackInfeasible(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CollusionMode {
    /// Force the victim onto `target_key`; drawn at random per session when absent.
    Absolute {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_key: Option<BitString>,
    },
    /// Shift the victim's key by `key_offset` relative to the honest key.
    /// This works without knowing the victim's K before forging.
    Delta {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key_offset: Option<BitString>,
    },
}

fn default_victim() -> PartyId {
    PartyId::B
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryConfig {
    #[default]
    None,
    /// Z-basis intercept-resend on the hop `from -> successor(from)` in `round`.
    InterceptResend { from: PartyId, round: u8, fraction: f64 },
    Collusion {
        #[serde(flatten)]
        mode: CollusionMode,
        #[serde(default = "default_victim")]
        victim: PartyId,
        /// Colluder who announces a forged R. Defaults to the victim's successor.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        forger: Option<PartyId>,
    },
}

impl AdversaryConfig {
    pub fn collusion(mode: CollusionMode) -> Self {
        AdversaryConfig::Collusion {
            mode,
            victim: PartyId::B,
            forger: None,
        }
    }

    pub fn absolute(target: BitString) -> Self {
        Self::collusion(CollusionMode::Absolute {
            target_key: Some(target),
        })
    }

    pub fn delta(offset: BitString) -> Self {
        Self::collusion(CollusionMode::Delta {
            key_offset: Some(offset),
        })
    }

    pub fn intercept(from: PartyId, round: u8, fraction: f64) -> Self {
        AdversaryConfig::InterceptResend { from, round, fraction }
    }

    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        match self {
            AdversaryConfig::None => Ok(()),
            AdversaryConfig::InterceptResend { round, fraction, .. } => {
                if *round > 2 {
                    return Err(ConfigError::Adversary(format!("round must be 0, 1 or 2, got {round}")));
                }
                if !(0.0..=1.0).contains(fraction) {
                    return Err(ConfigError::Adversary(format!(
                        "fraction must lie in [0, 1], got {fraction}"
                    )));
                }
                Ok(())
            }
            AdversaryConfig::Collusion { mode, victim, forger } => {
                let bits = match mode {
                    CollusionMode::Absolute { target_key } => target_key,
                    CollusionMode::Delta { key_offset } => key_offset,
                };
                if let Some(b) = bits {
                    if b.len() != n {
                        return Err(ConfigError::Adversary(format!(
                            "target/offset has length {}, expected {n}",
                            b.len()
                        )));
                    }
                }
                if *forger == Some(*victim) {
                    return Err(ConfigError::Adversary("the victim cannot be the forger".into()));
                }
                Ok(())
            }
        }
    }

    /// Short description used in summary tables.
    pub fn label(&self) -> String {
        match self {
            AdversaryConfig::None => "none".into(),
            AdversaryConfig::InterceptResend { from, round, fraction } => format!(
                "intercept_resend[{from}->{};round={round};fraction={fraction}]",
                from.successor()
            ),
            AdversaryConfig::Collusion { mode, victim, .. } => {
                let m = match mode {
                    CollusionMode::Absolute { .. } => "absolute",
                    CollusionMode::Delta { .. } => "delta",
                };
                format!("collusion[{m};victim={victim}]")
            }
        }
    }
}

/// Who does what in a collusion against `victim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionRoles {
    pub victim: PartyId,
    /// Owns the home particles matching the sequence the victim encodes in round 1.
    pub owner: PartyId,
    /// Receives that sequence from the victim and would encode it in round 2.
    pub holder: PartyId,
    pub forger: PartyId,
}

impl CollusionRoles {
    pub fn new(victim: PartyId, forger: Option<PartyId>) -> Self {
        CollusionRoles {
            victim,
            owner: victim.predecessor(),
            holder: victim.successor(),
            forger: forger.unwrap_or(victim.successor()),
        }
    }

    pub fn is_colluder(&self, p: PartyId) -> bool {
        p != self.victim
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolvedMode {
    Absolute(BitString),
    Delta(BitString),
}

/// Everything the colluders know or decide during a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionState {
    pub roles: CollusionRoles,
    pub mode: ResolvedMode,
    /// Private K of each colluder, pooled over the side channel.
    pub colluder_k: PerParty<Option<BitString>>,
    pub forger_true_r: BitString,
    pub learned_kb_xor_rb: Option<BitString>,
    pub learned_kb: Option<BitString>,
    pub honest_key: Option<BitString>,
    pub forged_r: Option<BitString>,
}

impl CollusionState {
    /// `K_owner ⊕ K_holder`.
    fn colluder_key_sum(&self) -> BitString {
        let k = |p: PartyId| {
            self.colluder_k[p]
                .clone()
                .expect("colluder secrets are pooled at setup")
        };
        &k(self.roles.owner) ^ &k(self.roles.holder)
    }

    /// The key the colluders intend the victim to derive, if already determined.
    pub fn intended_key(&self) -> Option<BitString> {
        match &self.mode {
            ResolvedMode::Absolute(t) => Some(t.clone()),
            ResolvedMode::Delta(offset) => self.honest_key.as_ref().map(|h| h ^ offset),
        }
    }
}

/// Z-measures each particle with probability `fraction` and lets the packet
/// continue. Returns the measured positions and Eve's readings.
pub fn intercept_resend(
    registry: &mut QuantumRegistry,
    packet: &SequencePacket,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, BitString), QuantumError> {
    let mut positions = Vec::new();
    let mut bits = Vec::new();
    for (i, &particle) in packet.particles.iter().enumerate() {
        if rng.random_bool(fraction) {
            positions.push(i);
            bits.push(registry.measure_z(particle)?);
        }
    }
    Ok((positions, BitString::from_bits(bits)))
}

/// The owner Bell-measures its home particles against the victim-encoded
/// sequence handed over by the holder. Returns the victim's `K ⊕ R`.
///
/// Only valid in [`EARLY_MEASURE_ROUND`], on the owner's own returning sequence.
pub fn collusion_early_measure(
    registry: &mut QuantumRegistry,
    owner: &PartyState,
    round: u8,
    particles: &[ParticleRef],
) -> Result<BitString, AdversaryError> {
    if round != EARLY_MEASURE_ROUND {
        return Err(AdversaryError::Contract(format!(
            "early measurement happens in round {EARLY_MEASURE_ROUND}, not round {round}"
        )));
    }
    if particles.len() != owner.p_home.len()
        || particles
            .iter()
            .zip(&owner.p_home)
            .any(|(q, p)| q.slot != Slot::Second || q.pair != p.pair)
    {
        return Err(AdversaryError::Contract(format!(
            "sequence is not the partner of {}'s home sequence",
            owner.id
        )));
    }
    owner
        .p_home
        .iter()
        .zip(particles)
        .map(|(&p, &q)| Ok(registry.bell_measure(p, q)?.bit_flip_component()))
        .collect()
}

/// `K_victim = (K_victim ⊕ R_victim) ⊕ R_victim`.
pub fn recover_kb(state: &mut CollusionState, announced_rb: &BitString) -> Result<BitString, AdversaryError> {
    let learned = state
        .learned_kb_xor_rb
        .as_ref()
        .ok_or_else(|| AdversaryError::Contract("victim key recovery needs the early measurement first".into()))?;
    let kb = learned ^ announced_rb;
    state.learned_kb = Some(kb.clone());
    Ok(kb)
}

/// The R the forger announces instead of its true R.
///
/// Absolute mode: `R' = R ⊕ honest ⊕ target`, which needs the victim's K.
/// Delta mode: `R' = R ⊕ offset`.
pub fn forge_rc(state: &mut CollusionState) -> Result<BitString, AdversaryError> {
    let forged = match &state.mode {
        ResolvedMode::Absolute(target) => {
            let kb = state.learned_kb.as_ref().ok_or_else(|| {
                AdversaryError::AttackInfeasible(format!(
                    "{}'s K is unknown when {} must announce; R_{} has to be announced in an earlier batch",
                    state.roles.victim, state.roles.forger, state.roles.victim
                ))
            })?;
            let honest = &state.colluder_key_sum() ^ kb;
            let forged = &(&state.forger_true_r ^ &honest) ^ target;
            state.honest_key = Some(honest);
            forged
        }
        ResolvedMode::Delta(offset) => &state.forger_true_r ^ offset,
    };
    state.forged_r = Some(forged.clone());
    Ok(forged)
}

/// What the victim will derive: `K_A ⊕ K_B ⊕ K_C ⊕ (R ⊕ R')`.
pub fn predict_bob_key(state: &mut CollusionState) -> Result<BitString, AdversaryError> {
    let kb = state
        .learned_kb
        .as_ref()
        .ok_or_else(|| AdversaryError::Contract("victim K not yet recovered".into()))?;
    let honest = &state.colluder_key_sum() ^ kb;
    let forged = state.forged_r.as_ref().unwrap_or(&state.forger_true_r);
    let prediction = &honest ^ &(&state.forger_true_r ^ forged);
    state.honest_key = Some(honest);
    Ok(prediction)
}

/// Adversary runtime driven by the session scheduler.
#[derive(Debug)]
pub struct Adversary {
    config: AdversaryConfig,
    rng: ChaCha8Rng,
    collusion: Option<CollusionState>,
}

impl Adversary {
    /// Resolves random targets and offsets from the adversary's own stream.
    pub fn new(config: AdversaryConfig, n: usize, mut rng: ChaCha8Rng) -> Self {
        let collusion = match &config {
            AdversaryConfig::Collusion { mode, victim, forger } => {
                let mode = match mode {
                    CollusionMode::Absolute { target_key } => {
                        ResolvedMode::Absolute(target_key.clone().unwrap_or_else(|| BitString::random(&mut rng, n)))
                    }
                    CollusionMode::Delta { key_offset } => {
                        ResolvedMode::Delta(key_offset.clone().unwrap_or_else(|| BitString::random(&mut rng, n)))
                    }
                };
                Some(CollusionState {
                    roles: CollusionRoles::new(*victim, *forger),
                    mode,
                    colluder_k: PerParty::default(),
                    forger_true_r: BitString::zeros(n),
                    learned_kb_xor_rb: None,
                    learned_kb: None,
                    honest_key: None,
                    forged_r: None,
                })
            }
            _ => None,
        };
        Adversary { config, rng, collusion }
    }

    pub fn collusion(&self) -> Option<&CollusionState> {
        self.collusion.as_ref()
    }

    pub fn into_collusion(self) -> Option<CollusionState> {
        self.collusion
    }

    /// Colluders pool their secrets once preparation is done.
    pub fn setup(&mut self, parties: &PerParty<PartyState>, transcript: &mut Transcript) {
        let Some(state) = &mut self.collusion else { return };
        let roles = state.roles;
        for p in [roles.owner, roles.holder] {
            state.colluder_k[p] = Some(parties[p].k().clone());
        }
        state.forger_true_r = parties[roles.forger].r().clone();
        for (from, to) in [(roles.owner, roles.holder), (roles.holder, roles.owner)] {
            transcript.push(1, from, EventKind::SideChannel(SideChannelData::ShareSecrets { to }));
        }
    }

    pub fn on_transit(
        &mut self,
        step: u8,
        packet: &SequencePacket,
        registry: &mut QuantumRegistry,
        transcript: &mut Transcript,
    ) -> Result<(), AdversaryError> {
        let AdversaryConfig::InterceptResend { from, round, fraction } = self.config else {
            return Ok(());
        };
        if packet.from != from || packet.round != round {
            return Ok(());
        }
        let (positions, bits) = intercept_resend(registry, packet, fraction, &mut self.rng)?;
        let hop = Hop {
            from: packet.from,
            to: packet.to,
            round,
        };
        transcript.push(
            step,
            Actor::Eve,
            EventKind::SideChannel(SideChannelData::InterceptGuess { hop, positions, bits }),
        );
        Ok(())
    }

    /// Called with the restored sequence `sender` is about to encode.
    #[allow(clippy::too_many_arguments)]
    pub fn before_encode(
        &mut self,
        step: u8,
        round: u8,
        sender: PartyId,
        sequence: &[ParticleRef],
        parties: &PerParty<PartyState>,
        registry: &mut QuantumRegistry,
        transcript: &mut Transcript,
    ) -> Result<(), AdversaryError> {
        let Some(state) = &mut self.collusion else {
            return Ok(());
        };
        let roles = state.roles;
        if round != EARLY_MEASURE_ROUND || sender != roles.holder {
            return Ok(());
        }
        let count = sequence.len();
        transcript.push(
            step,
            roles.holder,
            EventKind::SideChannel(SideChannelData::ParticleTransfer { to: roles.owner, count }),
        );
        let learned = collusion_early_measure(registry, &parties[roles.owner], round, sequence)?;
        transcript.push(
            step,
            roles.owner,
            EventKind::SideChannel(SideChannelData::EarlyMeasurement {
                victim_k_xor_r: learned.clone(),
            }),
        );
        transcript.push(
            step,
            roles.owner,
            EventKind::SideChannel(SideChannelData::ParticleTransfer {
                to: roles.holder,
                count,
            }),
        );
        state.learned_kb_xor_rb = Some(learned);
        Ok(())
    }

    /// The value `party` announces as its R. Only uses knowledge from earlier batches.
    pub fn announce_r(
        &mut self,
        party: PartyId,
        true_r: &BitString,
        transcript: &mut Transcript,
    ) -> Result<BitString, AdversaryError> {
        let Some(state) = &mut self.collusion else {
            return Ok(true_r.clone());
        };
        if party != state.roles.forger {
            return Ok(true_r.clone());
        }
        let forged = forge_rc(state)?;
        // unknown in delta mode until the victim's R is public
        let predicted = match state.learned_kb {
            Some(_) => Some(predict_bob_key(state)?),
            None => None,
        };
        transcript.push(
            8,
            party,
            EventKind::SideChannel(SideChannelData::Forgery {
                party,
                true_r: true_r.clone(),
                forged_r: forged.clone(),
                predicted_victim_key: predicted,
            }),
        );
        Ok(forged)
    }

    /// Sees an R once its batch is public.
    pub fn observe_r(
        &mut self,
        party: PartyId,
        value: &BitString,
        transcript: &mut Transcript,
    ) -> Result<(), AdversaryError> {
        let Some(state) = &mut self.collusion else {
            return Ok(());
        };
        if party != state.roles.victim || state.learned_kb_xor_rb.is_none() {
            return Ok(());
        }
        let k = recover_kb(state, value)?;
        transcript.push(
            8,
            state.roles.owner,
            EventKind::SideChannel(SideChannelData::RecoveredKey { victim: party, k }),
        );
        Ok(())
    }

    /// Colluders replace their own keys with the one the victim ends up with.
    pub fn finalize(
        &mut self,
        keys: &mut PerParty<BitString>,
        transcript: &mut Transcript,
    ) -> Result<(), AdversaryError> {
        let Some(state) = &mut self.collusion else {
            return Ok(());
        };
        let prediction = predict_bob_key(state)?;
        for party in [state.roles.owner, state.roles.holder] {
            keys[party] = prediction.clone();
            transcript.push(
                8,
                party,
                EventKind::SideChannel(SideChannelData::AdoptKey {
                    party,
                    key: prediction.clone(),
                }),
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn worked_state(mode: ResolvedMode) -> CollusionState {
        let mut colluder_k = PerParty::default();
        colluder_k[PartyId::A] = Some(bits("11"));
        colluder_k[PartyId::C] = Some(bits("00"));
        CollusionState {
            roles: CollusionRoles::new(PartyId::B, None),
            mode,
            colluder_k,
            forger_true_r: bits("11"),
            learned_kb_xor_rb: Some(bits("11")),
            learned_kb: None,
            honest_key: None,
            forged_r: None,
        }
    }

    #[test]
    fn roles_default_to_worked_example() {
        let roles = CollusionRoles::new(PartyId::B, None);
        assert_eq!(
            (roles.owner, roles.holder, roles.forger),
            (PartyId::A, PartyId::C, PartyId::C)
        );
        assert!(!roles.is_colluder(PartyId::B));
    }

    #[test]
    fn worked_example_recovery_and_forgery() {
        let mut state = worked_state(ResolvedMode::Absolute(bits("11")));
        assert_eq!(recover_kb(&mut state, &bits("01")).unwrap(), bits("10"));
        assert_eq!(forge_rc(&mut state).unwrap(), bits("01"));
        assert_eq!(state.honest_key, Some(bits("01")));
        assert_eq!(predict_bob_key(&mut state).unwrap(), bits("11"));
    }

    #[test]
    fn target_equal_to_honest_key_changes_nothing() {
        let mut state = worked_state(ResolvedMode::Absolute(bits("01")));
        recover_kb(&mut state, &bits("01")).unwrap();
        assert_eq!(forge_rc(&mut state).unwrap(), bits("11"));
        assert_eq!(predict_bob_key(&mut state).unwrap(), bits("01"));
    }

    #[test]
    fn unforged_prediction_is_honest_key() {
        let mut state = worked_state(ResolvedMode::Delta(bits("00")));
        recover_kb(&mut state, &bits("01")).unwrap();
        assert_eq!(predict_bob_key(&mut state).unwrap(), bits("01"));
    }

    #[test]
    fn delta_forgery_needs_no_victim_key() {
        let mut state = worked_state(ResolvedMode::Delta(bits("10")));
        assert_eq!(forge_rc(&mut state).unwrap(), bits("01"));
        recover_kb(&mut state, &bits("01")).unwrap();
        assert_eq!(predict_bob_key(&mut state).unwrap(), bits("11"));
    }

    #[test]
    fn absolute_forgery_without_victim_key_is_infeasible() {
        let mut state = worked_state(ResolvedMode::Absolute(bits("11")));
        assert!(matches!(forge_rc(&mut state), Err(AdversaryError::AttackInfeasible(_))));
    }

    #[test]
    fn zero_learned_and_zero_r() {
        let mut state = worked_state(ResolvedMode::Absolute(bits("00")));
        state.learned_kb_xor_rb = Some(bits("00"));
        assert_eq!(recover_kb(&mut state, &bits("00")).unwrap(), bits("00"));
    }

    #[test]
    fn config_json_forms() {
        let cfg: AdversaryConfig =
            serde_json::from_str(r#"{"kind":"collusion","mode":"absolute","target_key":"11"}"#).unwrap();
        assert_eq!(cfg, AdversaryConfig::absolute(bits("11")));
        let cfg: AdversaryConfig =
            serde_json::from_str(r#"{"kind":"collusion","mode":"delta","key_offset":"10","forger":"A"}"#).unwrap();
        assert!(matches!(
            cfg,
            AdversaryConfig::Collusion {
                forger: Some(PartyId::A),
                ..
            }
        ));
        let cfg: AdversaryConfig =
            serde_json::from_str(r#"{"kind":"intercept_resend","from":"A","round":0,"fraction":1.0}"#).unwrap();
        assert_eq!(cfg, AdversaryConfig::intercept(PartyId::A, 0, 1.0));
        let none: AdversaryConfig = serde_json::from_str(r#"{"kind":"none"}"#).unwrap();
        assert_eq!(none, AdversaryConfig::None);
        let json = serde_json::to_string(&AdversaryConfig::absolute(bits("11"))).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"collusion","mode":"absolute","target_key":"11","victim":"B"}"#
        );
    }

    #[test]
    fn config_validation() {
        assert!(AdversaryConfig::intercept(PartyId::A, 0, 1.5).validate(4).is_err());
        assert!(AdversaryConfig::intercept(PartyId::A, 3, 1.0).validate(4).is_err());
        assert!(AdversaryConfig::absolute(bits("111")).validate(2).is_err());
        assert!(AdversaryConfig::absolute(bits("11")).validate(2).is_ok());
    }
}
