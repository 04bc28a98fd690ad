use std::sync::Arc;

use super::TransitionSchedule;
use crate::rng::{sample_categorical, StreamRng};
use crate::select::BlockSelector;

/// Single-owner walk `i_0, i_1, …` with `i_{k+1} ~ P(k)[i_k, ·]`.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    schedule: Arc<TransitionSchedule>,
    current: usize,
    step_index: usize,
    rng: StreamRng,
    emitted_initial: bool,
}

impl WalkSampler {
    pub fn new(schedule: Arc<TransitionSchedule>, initial: usize, rng: StreamRng) -> Self {
        assert!(initial < schedule.state_count(), "initial state out of range");
        Self { schedule, current: initial, step_index: 0, rng, emitted_initial: false }
    }

    /// Start from a draw of `initial_distribution` (typically `π*`).
    pub fn from_distribution(
        schedule: Arc<TransitionSchedule>,
        initial_distribution: &[f64],
        mut rng: StreamRng,
    ) -> Self {
        let initial = sample_categorical(initial_distribution, &mut rng);
        Self::new(schedule, initial, rng)
    }

    pub fn current_state(&self) -> usize {
        self.current
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn schedule(&self) -> &TransitionSchedule {
        &self.schedule
    }

    /// Move one step using row `current` of `P(step_index)`.
    pub fn next_state(&mut self) -> usize {
        let p = self.schedule.matrix_at(self.step_index);
        let row: Vec<f64> = p.row(self.current).iter().copied().collect();
        self.current = sample_categorical(&row, &mut self.rng);
        self.step_index += 1;
        self.current
    }
}

impl BlockSelector for WalkSampler {
    fn next_block(&mut self) -> usize {
        if self.emitted_initial {
            self.next_state()
        } else {
            self.emitted_initial = true;
            self.current
        }
    }

    fn block_count(&self) -> usize {
        self.schedule.state_count()
    }
}
