//! Block selection rules: the Markov walk lives in [`crate::chain`]; the
//! i.i.d. and (essentially) cyclic baselines live here.

use crate::rng::{sample_categorical, StreamRng};

/// Source of the block sequence `i_0, i_1, …`.
pub trait BlockSelector: Send {
    /// Block for the current iteration; each call advances the sequence.
    fn next_block(&mut self) -> usize;
    fn block_count(&self) -> usize;
}

impl<S: BlockSelector + ?Sized> BlockSelector for Box<S> {
    fn next_block(&mut self) -> usize {
        (**self).next_block()
    }
    fn block_count(&self) -> usize {
        (**self).block_count()
    }
}

/// Independent draws from a fixed probability vector.
#[derive(Debug, Clone)]
pub struct IidSelector {
    probs: Vec<f64>,
    rng: StreamRng,
}

impl IidSelector {
    pub fn new(probs: Vec<f64>, rng: StreamRng) -> Self {
        let s: f64 = probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-9 && probs.iter().all(|&p| p >= 0.0), "not a probability vector");
        Self { probs, rng }
    }

    pub fn uniform(n: usize, rng: StreamRng) -> Self {
        Self::new(vec![1.0 / n as f64; n], rng)
    }
}

impl BlockSelector for IidSelector {
    fn next_block(&mut self) -> usize {
        sample_categorical(&self.probs, &mut self.rng)
    }
    fn block_count(&self) -> usize {
        self.probs.len()
    }
}

/// Repeats a fixed order.
#[derive(Debug, Clone)]
pub struct CyclicSelector {
    order: Vec<usize>,
    pos: usize,
}

impl CyclicSelector {
    /// `order` must be a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        (!order.is_empty()).then_some(Self { order, pos: 0 })
    }

    pub fn natural(n: usize) -> Self {
        Self { order: (0..n).collect(), pos: 0 }
    }

    /// Deterministic walk that visits every block at least once in every
    /// `period` consecutive iterations (`period ≥ n`): one sweep `0..n`
    /// followed by `period − n` extra visits continuing around the cycle.
    pub fn essentially_cyclic(n: usize, period: usize) -> Option<Self> {
        if n == 0 || period < n {
            return None;
        }
        let order = (0..n).chain((0..period - n).map(|t| t % n)).collect();
        Some(Self { order, pos: 0 })
    }
}

impl BlockSelector for CyclicSelector {
    fn next_block(&mut self) -> usize {
        let i = self.order[self.pos];
        self.pos = (self.pos + 1) % self.order.len();
        i
    }
    fn block_count(&self) -> usize {
        self.order.iter().max().map_or(0, |m| m + 1)
    }
}

/// Replays a recorded index stream.
#[derive(Debug, Clone)]
pub struct ReplaySelector {
    blocks: Vec<usize>,
    n: usize,
    pos: usize,
}

impl ReplaySelector {
    pub fn new(blocks: Vec<usize>, n: usize) -> Self {
        Self { blocks, n, pos: 0 }
    }
}

impl BlockSelector for ReplaySelector {
    fn next_block(&mut self) -> usize {
        let i = *self.blocks.get(self.pos).expect("replayed index stream exhausted");
        self.pos += 1;
        i
    }
    fn block_count(&self) -> usize {
        self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn cyclic_requires_permutation() {
        assert!(CyclicSelector::new(vec![0, 2, 1]).is_some());
        assert!(CyclicSelector::new(vec![0, 0, 1]).is_none());
        assert!(CyclicSelector::new(vec![0, 3]).is_none());
        let mut c = CyclicSelector::new(vec![2, 0, 1]).unwrap();
        let seq: Vec<_> = (0..6).map(|_| c.next_block()).collect();
        assert_eq!(seq, vec![2, 0, 1, 2, 0, 1]);
    }

    #[test]
    fn essentially_cyclic_visits_every_window() {
        let (n, k) = (4, 7);
        let mut c = CyclicSelector::essentially_cyclic(n, k).unwrap();
        let seq: Vec<_> = (0..100).map(|_| c.next_block()).collect();
        for w in seq.windows(k) {
            for b in 0..n {
                assert!(w.contains(&b));
            }
        }
    }

    #[test]
    fn iid_uniform_covers() {
        let mut s = IidSelector::uniform(3, stream_rng(1, 0));
        let mut seen = [false; 3];
        for _ in 0..100 {
            seen[s.next_block()] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
