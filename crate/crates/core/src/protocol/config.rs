use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{PartyId, PerParty};
use crate::adversary::AdversaryConfig;
use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("message length must be even and positive, got {0}")]
    BadLength(usize),
    #[error("at least one decoy pair per hop is required")]
    NoDecoys,
    #[error("error tolerance must lie in [0, 1], got {0}")]
    BadTolerance(f64),
    #[error("announcement schedule: {0}")]
    Schedule(String),
    #[error("adversary: {0}")]
    Adversary(String),
    #[error("forced secrets for {party} must have length {n}")]
    SecretLength { party: PartyId, n: usize },
}

/// A single classical reveal in the final announcement phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Announcement {
    /// The party publishes its masking string R.
    RevealR(PartyId),
    /// The party publishes the message ordering of its last dressed packet.
    RevealFinalPermutation(PartyId),
}

impl fmt::Display for Announcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Announcement::RevealR(p) => write!(f, "R_{p}"),
            Announcement::RevealFinalPermutation(p) => write!(f, "P_{p}"),
        }
    }
}

impl FromStr for Announcement {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ConfigError::Schedule(format!("cannot parse announcement {s:?}"));
        let mut chars = s.chars();
        let kind = chars.next().ok_or_else(bad)?;
        let party: PartyId = chars.as_str().trim_start_matches('_').parse().map_err(|_| bad())?;
        match kind {
            'R' | 'r' => Ok(Announcement::RevealR(party)),
            'P' | 'p' => Ok(Announcement::RevealFinalPermutation(party)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Announcement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Announcement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Ordered batches of announcements. Everything within one batch is
/// committed at once, so nobody can condition a reveal on another reveal
/// from the same batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnounceOrder(pub Vec<Vec<Announcement>>);

impl AnnounceOrder {
    /// `R_B`, then `R_A`, then `R_C`, then all three final permutations.
    pub fn sequential() -> Self {
        use Announcement::*;
        AnnounceOrder(vec![
            vec![RevealR(PartyId::B)],
            vec![RevealR(PartyId::A)],
            vec![RevealR(PartyId::C)],
            PartyId::ALL.map(RevealFinalPermutation).to_vec(),
        ])
    }

    /// All R values in one atomic batch, then the final permutations.
    pub fn simultaneous() -> Self {
        use Announcement::*;
        AnnounceOrder(vec![
            PartyId::ALL.map(RevealR).to_vec(),
            PartyId::ALL.map(RevealFinalPermutation).to_vec(),
        ])
    }

    pub fn batches(&self) -> &[Vec<Announcement>] {
        &self.0
    }

    /// Index of the batch containing `a`.
    pub fn batch_of(&self, a: Announcement) -> Option<usize> {
        self.0.iter().position(|batch| batch.contains(&a))
    }

    /// Every R and every final permutation must be announced exactly once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all: Vec<Announcement> = self.0.iter().flatten().copied().collect();
        for party in PartyId::ALL {
            for a in [
                Announcement::RevealR(party),
                Announcement::RevealFinalPermutation(party),
            ] {
                match all.iter().filter(|&&x| x == a).count() {
                    0 => return Err(ConfigError::Schedule(format!("missing {a}"))),
                    1 => {}
                    _ => return Err(ConfigError::Schedule(format!("{a} appears more than once"))),
                }
            }
        }
        if self.0.iter().any(Vec::is_empty) {
            return Err(ConfigError::Schedule("empty batch".into()));
        }
        Ok(())
    }
}

impl Default for AnnounceOrder {
    fn default() -> Self {
        Self::sequential()
    }
}

impl fmt::Display for AnnounceOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let batches: Vec<String> = self
            .0
            .iter()
            .map(|b| b.iter().map(ToString::to_string).collect::<Vec<_>>().join("+"))
            .collect();
        f.write_str(&batches.join(","))
    }
}

/// Accepts `default`, `simultaneous`, or batches like `R_B,R_A,R_C,P_A+P_B+P_C`
/// (`,` separates batches, `+` joins announcements within one batch).
impl FromStr for AnnounceOrder {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let order = match s.trim() {
            "default" | "sequential" => Self::sequential(),
            "simultaneous" => Self::simultaneous(),
            custom => AnnounceOrder(
                custom
                    .split(',')
                    .map(|batch| batch.split('+').map(str::parse).collect())
                    .collect::<Result<_, _>>()?,
            ),
        };
        order.validate()?;
        Ok(order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartySecrets {
    pub k: BitString,
    pub r: BitString,
}

/// Exact K/R strings for all parties, bypassing the RNG.
pub type ForcedSecrets = PerParty<PartySecrets>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n: usize,
    pub decoy_pairs_per_hop: usize,
    /// Largest tolerated fraction of failed decoy pairs on a hop.
    pub error_tolerance: f64,
    pub announce_order: AnnounceOrder,
    pub seed: u64,
    pub adversary: AdversaryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_secrets: Option<ForcedSecrets>,
}

impl SessionConfig {
    /// Honest session with `n / 2` decoy pairs per hop and zero tolerance.
    pub fn new(n: usize, seed: u64) -> Self {
        SessionConfig {
            n,
            decoy_pairs_per_hop: (n / 2).max(1),
            error_tolerance: 0.0,
            announce_order: AnnounceOrder::default(),
            seed,
            adversary: AdversaryConfig::None,
            forced_secrets: None,
        }
    }

    pub fn with_adversary(mut self, adversary: AdversaryConfig) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_secrets(mut self, secrets: ForcedSecrets) -> Self {
        self.forced_secrets = Some(secrets);
        self
    }

    pub fn with_announce_order(mut self, order: AnnounceOrder) -> Self {
        self.announce_order = order;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.error_tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(ConfigError::BadLength(self.n));
        }
        if self.decoy_pairs_per_hop == 0 {
            return Err(ConfigError::NoDecoys);
        }
        if !(0.0..=1.0).contains(&self.error_tolerance) {
            return Err(ConfigError::BadTolerance(self.error_tolerance));
        }
        self.announce_order.validate()?;
        self.adversary.validate(self.n)?;
        if let Some(secrets) = &self.forced_secrets {
            for (party, s) in secrets.iter() {
                if s.k.len() != self.n || s.r.len() != self.n {
                    return Err(ConfigError::SecretLength { party, n: self.n });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_schedules() {
        let order: AnnounceOrder = "R_B,R_A,R_C,P_A+P_B+P_C".parse().unwrap();
        assert_eq!(order, AnnounceOrder::sequential());
        assert_eq!(order.to_string(), "R_B,R_A,R_C,P_A+P_B+P_C");
        let simul: AnnounceOrder = "RA+RB+RC,PA+PB+PC".parse().unwrap();
        assert_eq!(simul, AnnounceOrder::simultaneous());
        assert_eq!("simultaneous".parse::<AnnounceOrder>().unwrap(), simul);
    }

    #[test]
    fn schedule_missing_reveal_is_rejected() {
        assert!(matches!(
            "R_B,R_A,P_A+P_B+P_C".parse::<AnnounceOrder>(),
            Err(ConfigError::Schedule(_))
        ));
        assert!(matches!(
            "R_B,R_A,R_C,R_A,P_A+P_B+P_C".parse::<AnnounceOrder>(),
            Err(ConfigError::Schedule(_))
        ));
        assert!("R_D,R_A".parse::<AnnounceOrder>().is_err());
    }

    #[test]
    fn length_validation() {
        assert_eq!(SessionConfig::new(3, 0).validate(), Err(ConfigError::BadLength(3)));
        assert_eq!(SessionConfig::new(0, 0).validate(), Err(ConfigError::BadLength(0)));
        assert!(SessionConfig::new(2, 0).validate().is_ok());
        assert_eq!(SessionConfig::new(2, 0).decoy_pairs_per_hop, 1);
        assert_eq!(SessionConfig::new(8, 0).decoy_pairs_per_hop, 4);
        let mut c = SessionConfig::new(4, 0);
        c.decoy_pairs_per_hop = 0;
        assert_eq!(c.validate(), Err(ConfigError::NoDecoys));
    }
}
