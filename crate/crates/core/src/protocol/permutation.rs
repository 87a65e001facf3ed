use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A bijection on positions `0..len`.
///
/// `forward[i]` is where the element at position `i` ends up; `inverse` undoes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(len: usize) -> Self {
        let forward: Vec<usize> = (0..len).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut forward: Vec<usize> = (0..len).collect();
        forward.shuffle(rng);
        Self::from_forward(forward).expect("shuffle yields a bijection")
    }

    /// Returns `None` unless `forward` is a bijection on `0..forward.len()`.
    pub fn from_forward(forward: Vec<usize>) -> Option<Self> {
        let mut inverse = vec![usize::MAX; forward.len()];
        for (i, &dst) in forward.iter().enumerate() {
            if dst >= forward.len() || inverse[dst] != usize::MAX {
                return None;
            }
            inverse[dst] = i;
        }
        Some(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// `out[forward[i]] = items[i]`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.len(), "permutation length mismatch");
        self.inverse.iter().map(|&src| items[src].clone()).collect()
    }

    pub fn unapply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.len(), "permutation length mismatch");
        self.forward.iter().map(|&dst| items[dst].clone()).collect()
    }
}
