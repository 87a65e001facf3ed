//! Exact simulation of independent two-particle pairs.
//!
//! Every pair lives in its own 4-dimensional state space, indexed in the
//! computational basis order `|00>, |01>, |10>, |11>` where the left bit
//! belongs to the first slot. No operation couples two distinct pairs, so the
//! whole registry is a product of per-pair states and stays exact.
//!
//! Randomness is drawn from a single seedable stream owned by the registry.
//! Every measurement consumes exactly one uniform draw, in operation order, so
//! an identical seed and operation sequence replays bit-for-bit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for norm and global-phase comparisons.
pub const TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantumError {
    #[error("unknown particle {0}")]
    UnknownParticle(ParticleRef),
    #[error("unknown pair {0}")]
    UnknownPair(PairId),
    #[error("bell measurement needs both slots of one pair, got {a} and {b}")]
    MismatchedPair { a: ParticleRef, b: ParticleRef },
}

/// The four maximally entangled two-particle states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    /// Order used by Bell-basis probability vectors.
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// 1 for the `Psi` states (the two particles disagree in the Z basis), 0 otherwise.
    pub fn bit_flip_component(self) -> bool {
        matches!(self, BellKind::PsiPlus | BellKind::PsiMinus)
    }

    /// 1 for the minus states.
    pub fn phase_component(self) -> bool {
        matches!(self, BellKind::PhiMinus | BellKind::PsiMinus)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn amplitudes(self) -> [Complex64; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellKind::PhiPlus => [h, ZERO, ZERO, h],
            BellKind::PhiMinus => [h, ZERO, ZERO, -h],
            BellKind::PsiPlus => [ZERO, h, h, ZERO],
            BellKind::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellKind::PhiPlus => "Phi+",
            BellKind::PhiMinus => "Phi-",
            BellKind::PsiPlus => "Psi+",
            BellKind::PsiMinus => "Psi-",
        };
        f.write_str(s)
    }
}

/// Single-particle Pauli operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// Which half of a pair a particle is. `First` stays home, `Second` travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub fn other(self) -> Slot {
        match self {
            Slot::First => Slot::Second,
            Slot::Second => Slot::First,
        }
    }

    fn index(self) -> usize {
        match self {
            Slot::First => 0,
            Slot::Second => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairId(pub u64);

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleRef {
    pub pair: PairId,
    pub slot: Slot,
}

impl ParticleRef {
    pub fn partner(self) -> ParticleRef {
        ParticleRef {
            pair: self.pair,
            slot: self.slot.other(),
        }
    }
}

impl fmt::Display for ParticleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.slot {
            Slot::First => "p",
            Slot::Second => "q",
        };
        write!(f, "{}{}", self.pair, s)
    }
}

/// Measurement basis for [`QuantumRegistry::outcome_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Probabilities ordered as [`BellKind::ALL`].
    Bell,
    /// Probabilities over `|00>, |01>, |10>, |11>`.
    Computational,
}

/// Exact pure state of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    amplitudes: [Complex64; 4],
    collapsed: [bool; 2],
}

impl PairState {
    pub fn bell(kind: BellKind) -> Self {
        PairState {
            amplitudes: kind.amplitudes(),
            collapsed: [false; 2],
        }
    }

    /// Arbitrary state, normalized on construction. Panics on the zero vector.
    pub fn from_amplitudes(amplitudes: [Complex64; 4]) -> Self {
        let mut state = PairState {
            amplitudes,
            collapsed: [false; 2],
        };
        let norm = state.norm_sqr().sqrt();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        state.amplitudes.iter_mut().for_each(|a| *a /= norm);
        state
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    /// Whether a Z measurement has hit the given slot.
    pub fn was_collapsed(&self, slot: Slot) -> bool {
        self.collapsed[slot.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Equality up to a global phase.
    pub fn equivalent_to(&self, other: &[Complex64; 4]) -> bool {
        let overlap: Complex64 = self.amplitudes.iter().zip(other).map(|(a, b)| b.conj() * a).sum();
        let other_norm: f64 = other.iter().map(|a| a.norm_sqr()).sum();
        (overlap.norm() - (self.norm_sqr() * other_norm).sqrt()).abs() < TOLERANCE
    }

    /// The Bell state this pair is in, if it is one (up to global phase).
    pub fn as_bell(&self) -> Option<BellKind> {
        BellKind::ALL.into_iter().find(|k| self.equivalent_to(&k.amplitudes()))
    }

    pub fn distribution(&self, basis: Basis) -> [f64; 4] {
        let mut out = [0.0; 4];
        match basis {
            Basis::Computational => {
                for (p, a) in out.iter_mut().zip(&self.amplitudes) {
                    *p = a.norm_sqr();
                }
            }
            Basis::Bell => {
                for (p, kind) in out.iter_mut().zip(BellKind::ALL) {
                    *p = self.bell_overlap(kind).norm_sqr();
                }
            }
        }
        out
    }

    fn bell_overlap(&self, kind: BellKind) -> Complex64 {
        kind.amplitudes()
            .iter()
            .zip(&self.amplitudes)
            .map(|(b, a)| b.conj() * a)
            .sum()
    }

    fn apply(&mut self, slot: Slot, op: Pauli) {
        let m = op.matrix();
        let old = self.amplitudes;
        for first in 0..2 {
            for second in 0..2 {
                self.amplitudes[2 * first + second] = match slot {
                    Slot::First => m[first][0] * old[second] + m[first][1] * old[2 + second],
                    Slot::Second => m[second][0] * old[2 * first] + m[second][1] * old[2 * first + 1],
                };
            }
        }
    }

    /// Probability that `slot` reads 0 in the Z basis.
    fn prob_zero(&self, slot: Slot) -> f64 {
        let a = &self.amplitudes;
        match slot {
            Slot::First => a[0].norm_sqr() + a[1].norm_sqr(),
            Slot::Second => a[0].norm_sqr() + a[2].norm_sqr(),
        }
    }

    fn project_z(&mut self, slot: Slot, bit: bool) {
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let b = match slot {
                Slot::First => i >> 1,
                Slot::Second => i & 1,
            };
            if (b == 1) != bit {
                *a = ZERO;
            }
        }
        self.renormalize();
        self.collapsed[slot.index()] = true;
    }

    fn project_bell(&mut self, kind: BellKind) {
        let overlap = self.bell_overlap(kind);
        self.amplitudes = kind.amplitudes().map(|b| b * overlap);
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a /= norm);
    }
}

/// Draws an index from `probs` with one uniform sample.
fn sample(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // rounding left `u` just above the accumulated total
    last
}

/// Owner of every pair in a session plus the measurement RNG.
#[derive(Debug, Clone)]
pub struct QuantumRegistry {
    pairs: Vec<PairState>,
    rng: ChaCha8Rng,
}

impl QuantumRegistry {
    pub fn new(seed: u64) -> Self {
        Self::from_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        QuantumRegistry { pairs: Vec::new(), rng }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn new_bell_pair(&mut self, kind: BellKind) -> (ParticleRef, ParticleRef) {
        self.insert(PairState::bell(kind))
    }

    /// Registers an arbitrary pair state; used by tests and analytic oracles.
    pub fn insert(&mut self, state: PairState) -> (ParticleRef, ParticleRef) {
        let pair = PairId(self.pairs.len() as u64);
        self.pairs.push(state);
        (
            ParticleRef {
                pair,
                slot: Slot::First,
            },
            ParticleRef {
                pair,
                slot: Slot::Second,
            },
        )
    }

    pub fn state(&self, pair: PairId) -> Result<&PairState, QuantumError> {
        self.pairs.get(pair.0 as usize).ok_or(QuantumError::UnknownPair(pair))
    }

    fn particle_state(&mut self, particle: ParticleRef) -> Result<&mut PairState, QuantumError> {
        self.pairs
            .get_mut(particle.pair.0 as usize)
            .ok_or(QuantumError::UnknownParticle(particle))
    }

    pub fn apply_pauli(&mut self, particle: ParticleRef, op: Pauli) -> Result<(), QuantumError> {
        self.particle_state(particle)?.apply(particle.slot, op);
        Ok(())
    }

    /// Projective Bell-basis measurement of both halves of one pair.
    pub fn bell_measure(&mut self, a: ParticleRef, b: ParticleRef) -> Result<BellKind, QuantumError> {
        if a.pair != b.pair || a.slot == b.slot {
            return Err(QuantumError::MismatchedPair { a, b });
        }
        let probs = self.particle_state(a)?.distribution(Basis::Bell);
        let kind = BellKind::ALL[sample(&mut self.rng, &probs)];
        self.particle_state(a)?.project_bell(kind);
        Ok(kind)
    }

    /// Z-basis measurement of one particle; returns `true` for outcome 1.
    pub fn measure_z(&mut self, particle: ParticleRef) -> Result<bool, QuantumError> {
        let p0 = self.particle_state(particle)?.prob_zero(particle.slot);
        let bit = sample(&mut self.rng, &[p0, 1.0 - p0]) == 1;
        self.particle_state(particle)?.project_z(particle.slot, bit);
        Ok(bit)
    }

    /// Exact outcome probabilities; does not touch the state or the RNG.
    pub fn outcome_distribution(&self, pair: PairId, basis: Basis) -> Result<[f64; 4], QuantumError> {
        Ok(self.state(pair)?.distribution(basis))
    }
}
