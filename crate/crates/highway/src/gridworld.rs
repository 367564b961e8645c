//! Small deterministic gridworld used to validate the tabular learner
//! against a value-iteration oracle.

/// N x N grid, four moves (up, down, left, right), walls keep the agent in
/// place. Entering the goal cell pays 1 and ends the episode; every other
/// transition pays 0.
#[derive(Debug, Clone, Copy)]
pub struct Gridworld {
    pub size: usize,
    pub goal: usize,
}

pub const GRID_ACTIONS: usize = 4;

impl Gridworld {
    pub fn new(size: usize) -> Gridworld {
        Gridworld {
            size,
            goal: size * size - 1,
        }
    }

    pub fn n_states(&self) -> usize {
        self.size * self.size
    }

    /// Deterministic transition: (next_state, reward, terminal).
    pub fn step(&self, state: usize, action: usize) -> (usize, f64, bool) {
        let (r, c) = (state / self.size, state % self.size);
        let (nr, nc) = match action {
            0 => (r.saturating_sub(1), c),
            1 => ((r + 1).min(self.size - 1), c),
            2 => (r, c.saturating_sub(1)),
            _ => (r, (c + 1).min(self.size - 1)),
        };
        let next = nr * self.size + nc;
        if next == self.goal {
            (next, 1.0, true)
        } else {
            (next, 0.0, false)
        }
    }

    /// Value iteration to sup-norm tolerance `tol`; returns Q*(s, a).
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Vec<[f64; GRID_ACTIONS]> {
        let n = self.n_states();
        let mut v = vec![0.0f64; n];
        loop {
            let mut delta: f64 = 0.0;
            for s in 0..n {
                if s == self.goal {
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                for a in 0..GRID_ACTIONS {
                    let (sn, r, done) = self.step(s, a);
                    let val = r + if done { 0.0 } else { gamma * v[sn] };
                    best = best.max(val);
                }
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta <= tol {
                break;
            }
        }
        let mut q = vec![[0.0; GRID_ACTIONS]; n];
        for s in 0..n {
            for a in 0..GRID_ACTIONS {
                let (sn, r, done) = self.step(s, a);
                q[s][a] = r + if done { 0.0 } else { gamma * v[sn] };
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walls_hold() {
        let g = Gridworld::new(4);
        let (next, r, done) = g.step(0, 0); // up from top-left
        assert_eq!(next, 0);
        assert_eq!(r, 0.0);
        assert!(!done);
    }

    #[test]
    fn goal_pays_one() {
        let g = Gridworld::new(4);
        let (next, r, done) = g.step(14, 3); // right into the corner
        assert_eq!(next, 15);
        assert_eq!(r, 1.0);
        assert!(done);
    }

    #[test]
    fn value_iteration_geometry() {
        // Q* of an optimal move from state s is gamma^(dist-1).
        let g = Gridworld::new(4);
        let q = g.value_iteration(0.8, 1e-12);
        let best: Vec<f64> = q
            .iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        assert!((best[14] - 1.0).abs() < 1e-10);
        assert!((best[0] - 0.8f64.powi(5)).abs() < 1e-10);
    }
}
