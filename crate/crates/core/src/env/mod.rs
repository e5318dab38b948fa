//! Exactly-specified desk-scale environments.
//!
//! Everything here is value-like: a config plus a pure step function. The
//! [`RolloutEnv`] trait adapts each environment to the training loop with a
//! uniform observation/action interface.

mod gridworld;
mod pointmaze;
mod toys;

pub use gridworld::{gridworld_observe, gridworld_step, GridAction, GridworldConfig};
pub use pointmaze::{pointmaze_step, PointMazeConfig, Segment};
pub use toys::{build_bandit_mdp, build_tree_mdp, bandit, tree_node_depth};

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// One-hot encoding of index `i` out of `n`.
pub fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// An agent action: a discrete choice or a bounded real vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Vector encoding for encoder inputs and buffer storage: one-hot for
    /// discrete actions, raw values for continuous ones.
    pub fn encode(&self, spec: &ActionSpec) -> Vec<f64> {
        match (self, spec) {
            (Action::Discrete(a), ActionSpec::Discrete(n)) => one_hot(*n, *a),
            (Action::Continuous(v), ActionSpec::Continuous { .. }) => v.clone(),
            _ => panic!("action does not match action spec"),
        }
    }

    pub fn discrete(&self) -> usize {
        match self {
            Action::Discrete(a) => *a,
            _ => panic!("expected discrete action"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpec {
    Discrete(usize),
    Continuous { dim: usize, bound: f64 },
}

impl ActionSpec {
    /// Length of the encoded action vector.
    pub fn encoded_dim(&self) -> usize {
        match self {
            ActionSpec::Discrete(n) => *n,
            ActionSpec::Continuous { dim, .. } => *dim,
        }
    }
}

/// Identity of the current environment state, for coverage tracking.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKey {
    Index(usize),
    Position(Vec<f64>),
}

/// A rollout-facing environment instance.
pub trait RolloutEnv {
    fn obs_dim(&self) -> usize;
    fn action_spec(&self) -> ActionSpec;
    /// Episode length enforced by the training loop.
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns the initial observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Advances one step; returns the next observation and a terminal flag.
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> (Vec<f64>, bool);
    /// Key of the state the environment is currently in.
    fn state_key(&self) -> StateKey;
    /// The underlying tabular MDP, when one exists.
    fn tabular(&self) -> Option<&TabularMdp> {
        None
    }
    /// A fixed, evenly spread set of observations used to monitor
    /// representation variance. At most `max` entries.
    fn probe_observations(&self, max: usize) -> Vec<Vec<f64>>;
}

/// Evenly spaced subset of `0..n`, at most `max` entries.
fn strided_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|k| k * n / max).collect()
    }
}

/// Explicit finite MDP: transition tensor, initial distribution, horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `transition[s][a]` is a probability vector over next states.
    transition: Vec<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
    horizon: usize,
    gamma_rl: f64,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl TabularMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        initial_dist: Vec<f64>,
        horizon: usize,
        gamma_rl: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::config("MDP needs at least one state"));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::config("MDP needs at least one action"));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if !(0.0..1.0).contains(&gamma_rl) {
            return Err(Error::config("gamma_rl must be in [0, 1)"));
        }
        if initial_dist.len() != n_states {
            return Err(Error::config("initial distribution length mismatch"));
        }
        check_distribution(&initial_dist, "initial distribution")?;
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::config(format!("state {s} has wrong action count")));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::config(format!("row ({s}, {a}) has wrong length")));
                }
                check_distribution(row, &format!("transition row ({s}, {a})"))?;
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            initial_dist,
            horizon,
            gamma_rl,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma_rl(&self) -> f64 {
        self.gamma_rl
    }

    pub fn set_gamma_rl(&mut self, gamma: f64) {
        self.gamma_rl = gamma;
    }

    pub fn set_horizon(&mut self, horizon: usize) {
        assert!(horizon >= 1);
        self.horizon = horizon;
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.initial_dist, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_categorical(&self.transition[s][a], rng)
    }

    /// Serializes as `{n_states, n_actions, P, s0, horizon}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "P": self.transition,
            "s0": self.initial_dist,
            "horizon": self.horizon,
        })
    }

    /// Loads the JSON form; `gamma_rl` is not part of the format and
    /// defaults to 0.99.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("MDP JSON must be an object"))?;
        let get = |key: &str| {
            obj.get(key)
                .ok_or_else(|| Error::config(format!("MDP JSON missing field '{key}'")))
        };
        let transition: Vec<Vec<Vec<f64>>> = serde_json::from_value(get("P")?.clone())
            .map_err(|e| Error::config(format!("bad P tensor: {e}")))?;
        let initial: Vec<f64> = serde_json::from_value(get("s0")?.clone())
            .map_err(|e| Error::config(format!("bad s0: {e}")))?;
        let horizon = get("horizon")?
            .as_u64()
            .ok_or_else(|| Error::config("horizon must be an integer"))? as usize;
        let n_states = get("n_states")?.as_u64().unwrap_or(0) as usize;
        let n_actions = get("n_actions")?.as_u64().unwrap_or(0) as usize;
        let mdp = Self::new(transition, initial, horizon, 0.99)?;
        if mdp.n_states != n_states || mdp.n_actions != n_actions {
            return Err(Error::config("declared n_states/n_actions do not match P"));
        }
        Ok(mdp)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_json())
            .map_err(|e| Error::config(format!("serialize MDP: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("parse MDP: {e}")))?;
        Self::from_json(&value)
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::config(format!("{what} has negative or non-finite mass")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::config(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Tabular environment with one-hot observations.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    state: usize,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp) -> Self {
        Self { state: 0, mdp }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl RolloutEnv for TabularEnv {
    fn obs_dim(&self) -> usize {
        self.mdp.n_states()
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Discrete(self.mdp.n_actions())
    }

    fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = self.mdp.sample_initial(rng);
        one_hot(self.mdp.n_states(), self.state)
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> (Vec<f64>, bool) {
        self.state = self.mdp.sample_next(self.state, action.discrete(), rng);
        (one_hot(self.mdp.n_states(), self.state), false)
    }

    fn state_key(&self) -> StateKey {
        StateKey::Index(self.state)
    }

    fn tabular(&self) -> Option<&TabularMdp> {
        Some(&self.mdp)
    }

    fn probe_observations(&self, max: usize) -> Vec<Vec<f64>> {
        strided_indices(self.mdp.n_states(), max)
            .into_iter()
            .map(|s| one_hot(self.mdp.n_states(), s))
            .collect()
    }
}

/// Gridworld with optional noisy-TV observation channels.
#[derive(Debug, Clone)]
pub struct GridworldEnv {
    config: GridworldConfig,
    cell: (usize, usize),
    horizon: usize,
}

impl GridworldEnv {
    pub fn new(config: GridworldConfig, horizon: usize) -> Self {
        let cell = config.start;
        Self {
            config,
            cell,
            horizon,
        }
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.config
    }
}

impl RolloutEnv for GridworldEnv {
    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Discrete(4)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.cell = self.config.start;
        gridworld_observe(&self.config, self.cell, rng)
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> (Vec<f64>, bool) {
        let act = GridAction::from_index(action.discrete());
        let (next, obs) = gridworld_step(&self.config, self.cell, rng, act);
        self.cell = next;
        (obs, false)
    }

    fn state_key(&self) -> StateKey {
        StateKey::Index(self.config.cell_index(self.cell))
    }

    fn probe_observations(&self, max: usize) -> Vec<Vec<f64>> {
        // One-hot non-wall cells with silent noise channels.
        let open: Vec<usize> = (0..self.config.n_cells())
            .filter(|&i| !self.config.walls[i])
            .collect();
        strided_indices(open.len(), max)
            .into_iter()
            .map(|k| {
                let mut obs = vec![0.0; self.config.obs_dim()];
                obs[open[k]] = 1.0;
                obs
            })
            .collect()
    }
}

/// Continuous point-mass maze.
#[derive(Debug, Clone)]
pub struct PointMazeEnv {
    config: PointMazeConfig,
    position: (f64, f64),
    horizon: usize,
}

impl PointMazeEnv {
    pub fn new(config: PointMazeConfig, horizon: usize) -> Self {
        let position = config.start;
        Self {
            config,
            position,
            horizon,
        }
    }
}

impl RolloutEnv for PointMazeEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Continuous {
            dim: 2,
            bound: self.config.action_bound,
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.position = self.config.start;
        vec![self.position.0, self.position.1]
    }

    fn step(&mut self, action: &Action, _rng: &mut dyn RngCore) -> (Vec<f64>, bool) {
        let a = match action {
            Action::Continuous(v) => (v[0], v[1]),
            Action::Discrete(_) => panic!("point maze takes continuous actions"),
        };
        self.position = pointmaze_step(&self.config, self.position, a);
        (vec![self.position.0, self.position.1], false)
    }

    fn state_key(&self) -> StateKey {
        StateKey::Position(vec![self.position.0, self.position.1])
    }

    fn probe_observations(&self, max: usize) -> Vec<Vec<f64>> {
        // A square lattice over the arena.
        let (x0, y0, x1, y1) = self.config.bounds;
        let side = (max as f64).sqrt().floor().max(2.0) as usize;
        let mut out = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                let x = x0 + (x1 - x0) * (i as f64 + 0.5) / side as f64;
                let y = y0 + (y1 - y0) * (j as f64 + 0.5) / side as f64;
                out.push(vec![x, y]);
            }
        }
        out.truncate(max.max(1));
        out
    }
}
