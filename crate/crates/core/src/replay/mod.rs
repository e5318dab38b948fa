//! Rollout storage and contrastive batch sampling.
//!
//! A [`TrajectoryBuffer`] keeps a bounded FIFO of episodes. Training batches
//! pair anchor `(state, action)` transitions with future states drawn from
//! the same trajectory at geometrically distributed offsets, so the sampled
//! positives follow the discounted future-state distribution of the buffer.

mod sampler;

pub use sampler::{sample_batch, truncated_geometric_pmf, ContrastiveBatch, OffsetStrategy, SamplerConfig};

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};

/// One stored environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub step_index: usize,
    pub terminal: bool,
}

/// An ordered episode. States are stored once (`states[t]` feeds the
/// transition at `t` and doubles as the next-state of `t - 1`), so
/// per-transition views are materialized on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    terminal: bool,
}

impl Trajectory {
    /// Starts an episode from its initial observation.
    pub fn start(initial_state: Vec<f64>) -> Self {
        Self {
            states: vec![initial_state],
            actions: Vec::new(),
            terminal: false,
        }
    }

    pub fn push(&mut self, action: Vec<f64>, next_state: Vec<f64>) {
        self.actions.push(action);
        self.states.push(next_state);
    }

    pub fn set_terminal(&mut self, terminal: bool) {
        self.terminal = terminal;
    }

    pub fn terminal(&self) -> bool {
        self.terminal
    }

    /// Number of transitions (the horizon H).
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// State `s_t` for `t` in `0..=len()`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    /// Materializes the transition at step `t`.
    pub fn transition(&self, t: usize) -> Transition {
        Transition {
            state: self.states[t].clone(),
            action: self.actions[t].clone(),
            next_state: self.states[t + 1].clone(),
            step_index: t,
            terminal: self.terminal && t + 1 == self.len(),
        }
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.len()).map(|t| self.transition(t))
    }
}

/// Bounded FIFO of trajectories; eviction is oldest-first.
#[derive(Debug, Clone)]
pub struct TrajectoryBuffer {
    trajectories: VecDeque<(u64, Trajectory)>,
    capacity: usize,
    next_id: u64,
    total_transitions: usize,
    /// Cumulative transition counts, kept in sync with `trajectories`.
    prefix: Vec<usize>,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            trajectories: VecDeque::new(),
            capacity,
            next_id: 0,
            total_transitions: 0,
            prefix: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of stored trajectories.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn total_transitions(&self) -> usize {
        self.total_transitions
    }

    /// Appends an episode, evicting the oldest if over capacity.
    /// Returns the id assigned to the trajectory.
    pub fn append(&mut self, trajectory: Trajectory) -> Result<u64> {
        if trajectory.is_empty() {
            return Err(Error::contract("cannot append an empty trajectory"));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.trajectories.push_back((id, trajectory));
        if self.trajectories.len() > self.capacity {
            self.trajectories.pop_front();
        }
        self.rebuild_index();
        Ok(id)
    }

    fn rebuild_index(&mut self) {
        self.prefix.clear();
        let mut acc = 0;
        for (_, traj) in &self.trajectories {
            acc += traj.len();
            self.prefix.push(acc);
        }
        self.total_transitions = acc;
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Trajectory)> {
        self.trajectories.iter().map(|(id, t)| (*id, t))
    }

    pub fn get(&self, index: usize) -> Option<(u64, &Trajectory)> {
        self.trajectories.get(index).map(|(id, t)| (*id, t))
    }

    /// Index of the trajectory whose transition range contains the
    /// buffer-wide transition index `pos`.
    pub(crate) fn locate(&self, pos: usize) -> usize {
        debug_assert!(pos < self.total_transitions);
        self.prefix.partition_point(|&cum| cum <= pos)
    }

    /// Dumps every stored transition as CSV rows
    /// `traj_id, t, s..., a..., s_next..., done`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let (state_dim, action_dim) = match self.trajectories.front() {
            Some((_, t)) => (t.state(0).len(), t.action(0).len()),
            None => (0, 0),
        };
        let mut header = String::from("traj_id,t");
        for i in 0..state_dim {
            header.push_str(&format!(",s{i}"));
        }
        for i in 0..action_dim {
            header.push_str(&format!(",a{i}"));
        }
        for i in 0..state_dim {
            header.push_str(&format!(",s_next{i}"));
        }
        header.push_str(",done");
        writeln!(w, "{header}")?;
        for (id, traj) in self.iter() {
            for tr in traj.transitions() {
                let mut row = format!("{id},{}", tr.step_index);
                for v in &tr.state {
                    row.push_str(&format!(",{v}"));
                }
                for v in &tr.action {
                    row.push_str(&format!(",{v}"));
                }
                for v in &tr.next_state {
                    row.push_str(&format!(",{v}"));
                }
                row.push_str(if tr.terminal { ",1" } else { ",0" });
                writeln!(w, "{row}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_of_len(n: usize, tag: f64) -> Trajectory {
        let mut t = Trajectory::start(vec![tag, 0.0]);
        for k in 0..n {
            t.push(vec![1.0], vec![tag, (k + 1) as f64]);
        }
        t
    }

    #[test]
    fn fifo_eviction_keeps_newest() {
        let mut buf = TrajectoryBuffer::new(2);
        let a = buf.append(traj_of_len(1, 0.0)).unwrap();
        let b = buf.append(traj_of_len(2, 1.0)).unwrap();
        let c = buf.append(traj_of_len(3, 2.0)).unwrap();
        assert_eq!(buf.len(), 2);
        let ids: Vec<u64> = buf.iter().map(|(id, _)| id).collect();
        assert_eq!(ids, vec![b, c]);
        assert_ne!(ids[0], a);
        assert_eq!(buf.total_transitions(), 5);
    }

    #[test]
    fn transition_count_matches_length() {
        let mut buf = TrajectoryBuffer::new(4);
        buf.append(traj_of_len(5, 0.0)).unwrap();
        assert_eq!(buf.total_transitions(), 5);
        assert_eq!(buf.get(0).unwrap().1.transitions().count(), 5);
    }

    #[test]
    fn holds_exactly_capacity_at_ten_thousand_appends() {
        let mut buf = TrajectoryBuffer::new(10_000);
        for _ in 0..10_000 {
            buf.append(traj_of_len(1, 0.0)).unwrap();
        }
        assert_eq!(buf.len(), 10_000);
    }

    #[test]
    fn rejects_empty_trajectory() {
        let mut buf = TrajectoryBuffer::new(2);
        let empty = Trajectory::start(vec![0.0]);
        assert!(matches!(buf.append(empty), Err(Error::Contract(_))));
    }

    #[test]
    fn transition_views_chain_states() {
        let mut t = Trajectory::start(vec![0.0]);
        t.push(vec![1.0], vec![1.0]);
        t.push(vec![0.0], vec![2.0]);
        t.set_terminal(true);
        let trs: Vec<Transition> = t.transitions().collect();
        assert_eq!(trs[0].next_state, trs[1].state);
        assert_eq!(trs[0].step_index, 0);
        assert_eq!(trs[1].step_index, 1);
        assert!(!trs[0].terminal);
        assert!(trs[1].terminal);
    }

    #[test]
    fn csv_dump_has_expected_shape() {
        let mut buf = TrajectoryBuffer::new(2);
        buf.append(traj_of_len(2, 3.0)).unwrap();
        let mut out = Vec::new();
        buf.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "traj_id,t,s0,s1,a0,s_next0,s_next1,done");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,3,0,1,3,1,"));
    }
}
