//! Memory palace: four bounded FIFO buffers keyed by (phase, action),
//! sampled with equal per-cell quotas to keep training batches balanced.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Observation};
use crate::sim::Phase;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot sample from an empty memory palace")]
    Empty,
}

/// One transition (s_t, a_t, R_t, s_{t+1}) with the phase it was taken in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    pub phase: Phase,
}

pub const DEFAULT_CELL_CAPACITY: usize = 1000;
pub const NUM_CELLS: usize = 4;

/// Fixed key order: (NS,Keep), (NS,Change), (WE,Keep), (WE,Change).
pub fn cell_index(phase: Phase, action: Action) -> usize {
    let p = match phase {
        Phase::NS => 0,
        Phase::WE => 1,
    };
    p * 2 + action.index()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellStats {
    pub len: usize,
    pub stored: u64,
    pub evicted: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayPalace {
    cells: [VecDeque<Experience>; NUM_CELLS],
    stats: [CellStats; NUM_CELLS],
    capacity: usize,
}

impl Default for ReplayPalace {
    fn default() -> Self {
        ReplayPalace::new(DEFAULT_CELL_CAPACITY)
    }
}

impl ReplayPalace {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayPalace {
            cells: Default::default(),
            stats: Default::default(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|c| c.is_empty())
    }

    pub fn store(&mut self, e: Experience) {
        debug_assert_eq!(e.phase, e.state.current_phase);
        let idx = cell_index(e.phase, e.action);
        let cell = &mut self.cells[idx];
        if cell.len() == self.capacity {
            cell.pop_front();
            self.stats[idx].evicted += 1;
        }
        cell.push_back(e);
        self.stats[idx].stored += 1;
        self.stats[idx].len = cell.len();
    }

    /// Draws `batch_size` experiences, split equally over the non-empty
    /// cells (remainder to the first cells in key order), uniformly with
    /// replacement within each cell.
    pub fn sample_balanced<R: Rng>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<Experience>, ReplayError> {
        assert!(batch_size > 0);
        let non_empty: Vec<usize> = (0..NUM_CELLS)
            .filter(|&i| !self.cells[i].is_empty())
            .collect();
        if non_empty.is_empty() {
            return Err(ReplayError::Empty);
        }
        let k = non_empty.len();
        let base = batch_size / k;
        let remainder = batch_size % k;
        let mut out = Vec::with_capacity(batch_size);
        for (rank, &idx) in non_empty.iter().enumerate() {
            let quota = base + usize::from(rank < remainder);
            let cell = &self.cells[idx];
            for _ in 0..quota {
                let j = rng.gen_range(0..cell.len());
                out.push(cell[j].clone());
            }
        }
        Ok(out)
    }

    pub fn stats(&self) -> [CellStats; NUM_CELLS] {
        self.stats
    }

    pub fn cell_len(&self, phase: Phase, action: Action) -> usize {
        self.cells[cell_index(phase, action)].len()
    }

    /// Iterate one cell front-to-back (oldest first); used by tests.
    pub fn cell_iter(
        &self,
        phase: Phase,
        action: Action,
    ) -> impl Iterator<Item = &Experience> {
        self.cells[cell_index(phase, action)].iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(phase: Phase) -> Observation {
        Observation {
            queue: vec![0.0; 12],
            count: vec![0.0; 12],
            wait: vec![0.0; 12],
            current_phase: phase,
            grid: Vec::new(),
            latent: Vec::new(),
        }
    }

    fn exp(phase: Phase, action: Action, reward: f64) -> Experience {
        Experience {
            state: obs(phase),
            action,
            reward,
            next_state: obs(phase),
            phase,
        }
    }

    #[test]
    fn store_targets_single_cell() {
        let mut palace = ReplayPalace::default();
        palace.store(exp(Phase::NS, Action::Keep, 0.0));
        assert_eq!(palace.cell_len(Phase::NS, Action::Keep), 1);
        assert_eq!(palace.cell_len(Phase::NS, Action::Change), 0);
        assert_eq!(palace.cell_len(Phase::WE, Action::Keep), 0);
        assert_eq!(palace.cell_len(Phase::WE, Action::Change), 0);
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut palace = ReplayPalace::default();
        for i in 0..1001 {
            palace.store(exp(Phase::WE, Action::Change, i as f64));
        }
        assert_eq!(palace.cell_len(Phase::WE, Action::Change), 1000);
        let oldest = palace
            .cell_iter(Phase::WE, Action::Change)
            .next()
            .unwrap();
        assert_eq!(oldest.reward, 1.0, "element 0 evicted first");
        let stats = palace.stats()[cell_index(Phase::WE, Action::Change)];
        assert_eq!(stats.stored, 1001);
        assert_eq!(stats.evicted, 1);
        assert_eq!(stats.len, 1000);
    }

    #[test]
    fn all_four_cells_populate_independently() {
        let mut palace = ReplayPalace::default();
        for phase in [Phase::NS, Phase::WE] {
            for action in Action::ALL {
                palace.store(exp(phase, action, 1.0));
            }
        }
        for phase in [Phase::NS, Phase::WE] {
            for action in Action::ALL {
                assert_eq!(palace.cell_len(phase, action), 1);
            }
        }
        assert_eq!(palace.len(), 4);
    }

    #[test]
    fn balanced_sample_four_cells() {
        let mut palace = ReplayPalace::default();
        // heavily imbalanced stream, Table-2 style
        for i in 0..800 {
            palace.store(exp(Phase::WE, Action::Keep, i as f64));
        }
        for i in 0..40 {
            palace.store(exp(Phase::WE, Action::Change, i as f64));
        }
        for i in 0..100 {
            palace.store(exp(Phase::NS, Action::Keep, i as f64));
        }
        for i in 0..5 {
            palace.store(exp(Phase::NS, Action::Change, i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = palace.sample_balanced(300, &mut rng).unwrap();
        assert_eq!(batch.len(), 300);
        for phase in [Phase::NS, Phase::WE] {
            for action in Action::ALL {
                let n = batch
                    .iter()
                    .filter(|e| e.phase == phase && e.action == action)
                    .count();
                assert_eq!(n, 75, "{phase:?}/{action:?}");
            }
        }
    }

    #[test]
    fn balanced_sample_three_cells() {
        let mut palace = ReplayPalace::default();
        for phase in [Phase::NS, Phase::WE] {
            palace.store(exp(phase, Action::Keep, 0.0));
        }
        palace.store(exp(Phase::WE, Action::Change, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = palace.sample_balanced(300, &mut rng).unwrap();
        assert_eq!(batch.len(), 300);
        for (phase, action) in [
            (Phase::NS, Action::Keep),
            (Phase::WE, Action::Keep),
            (Phase::WE, Action::Change),
        ] {
            let n = batch
                .iter()
                .filter(|e| e.phase == phase && e.action == action)
                .count();
            assert_eq!(n, 100);
        }
    }

    #[test]
    fn quota_remainder_goes_to_first_cells() {
        let mut palace = ReplayPalace::default();
        for phase in [Phase::NS, Phase::WE] {
            for action in Action::ALL {
                palace.store(exp(phase, action, 0.0));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = palace.sample_balanced(10, &mut rng).unwrap();
        let counts: Vec<usize> = [
            (Phase::NS, Action::Keep),
            (Phase::NS, Action::Change),
            (Phase::WE, Action::Keep),
            (Phase::WE, Action::Change),
        ]
        .iter()
        .map(|&(p, a)| batch.iter().filter(|e| e.phase == p && e.action == a).count())
        .collect();
        assert_eq!(counts, vec![3, 3, 2, 2]);
    }

    #[test]
    fn empty_palace_errors() {
        let palace = ReplayPalace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            palace.sample_balanced(10, &mut rng),
            Err(ReplayError::Empty)
        ));
    }

    #[test]
    fn fresh_palace_stats_zero() {
        let palace = ReplayPalace::default();
        for s in palace.stats() {
            assert_eq!(s, CellStats::default());
        }
    }

    #[test]
    fn storing_does_not_touch_other_cells() {
        let mut palace = ReplayPalace::default();
        palace.store(exp(Phase::NS, Action::Keep, 7.0));
        let before: Vec<Experience> =
            palace.cell_iter(Phase::NS, Action::Keep).cloned().collect();
        for _ in 0..50 {
            palace.store(exp(Phase::WE, Action::Change, 1.0));
        }
        let after: Vec<Experience> =
            palace.cell_iter(Phase::NS, Action::Keep).cloned().collect();
        assert_eq!(before, after);
    }
}
