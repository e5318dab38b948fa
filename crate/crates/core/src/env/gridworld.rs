//! Gridworld with a noisy-TV region.
//!
//! Observations are the one-hot cell encoding concatenated with `m` noise
//! channels. Inside the noisy region the channels are resampled uniformly
//! over the alphabet every step; outside they are zero. The noise carries
//! no information about the dynamics, which is exactly what makes it a
//! trap for prediction-error exploration bonuses.

use rand::{Rng, RngCore};

use crate::env::TabularMdp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub fn from_index(i: usize) -> Self {
        match i {
            0 => GridAction::Up,
            1 => GridAction::Down,
            2 => GridAction::Left,
            3 => GridAction::Right,
            _ => panic!("grid action index {i} out of range"),
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    /// Row-major wall mask (`y * width + x`).
    pub walls: Vec<bool>,
    /// Row-major noisy-region mask.
    pub noisy: Vec<bool>,
    pub noise_channels: usize,
    pub noise_alphabet: usize,
    pub start: (usize, usize),
}

impl GridworldConfig {
    /// Open grid with no noise.
    pub fn open(width: usize, height: usize, start: (usize, usize)) -> Result<Self> {
        let cfg = Self {
            width,
            height,
            walls: vec![false; width * height],
            noisy: vec![false; width * height],
            noise_channels: 0,
            noise_alphabet: 8,
            start,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The default noisy-TV layout: 32x32 open grid, start at the center,
    /// an 8x8 noisy block adjacent to the start, 4 channels over an
    /// 8-symbol alphabet.
    pub fn noisy_tv_default() -> Self {
        let mut cfg = Self::open(32, 32, (16, 16)).unwrap();
        cfg.noise_channels = 4;
        for y in 18..26 {
            for x in 18..26 {
                cfg.noisy[y * 32 + x] = true;
            }
        }
        cfg
    }

    /// Same layout with the noise channels silenced (the mask stays, the
    /// channel count drops to zero so observation dims differ).
    pub fn with_noise_channels(mut self, channels: usize) -> Self {
        self.noise_channels = channels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if n == 0 {
            return Err(Error::config("grid must be non-empty"));
        }
        if self.walls.len() != n || self.noisy.len() != n {
            return Err(Error::config("wall/noisy masks must cover the grid"));
        }
        if self.start.0 >= self.width || self.start.1 >= self.height {
            return Err(Error::config("start cell outside the grid"));
        }
        if self.walls[self.cell_index(self.start)] {
            return Err(Error::config("start cell is a wall"));
        }
        if self.noise_channels > 0 && self.noise_alphabet < 2 {
            return Err(Error::config("noise alphabet needs at least two symbols"));
        }
        Ok(())
    }

    pub fn cell_index(&self, cell: (usize, usize)) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn obs_dim(&self) -> usize {
        self.n_cells() + self.noise_channels
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls[self.cell_index(cell)]
    }

    pub fn is_noisy(&self, cell: (usize, usize)) -> bool {
        self.noisy[self.cell_index(cell)]
    }

    /// Non-wall cells reachable from the start by flood fill.
    pub fn reachable_cells(&self) -> Vec<(usize, usize)> {
        let mut seen = vec![false; self.n_cells()];
        let mut stack = vec![self.start];
        seen[self.cell_index(self.start)] = true;
        let mut out = Vec::new();
        while let Some(cell) = stack.pop() {
            out.push(cell);
            for action in [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right] {
                let next = self.blocked_move(cell, action);
                let idx = self.cell_index(next);
                if !seen[idx] && !self.walls[idx] {
                    seen[idx] = true;
                    stack.push(next);
                }
            }
        }
        out
    }

    fn blocked_move(&self, cell: (usize, usize), action: GridAction) -> (usize, usize) {
        let (dx, dy) = action.delta();
        let nx = cell.0 as isize + dx;
        let ny = cell.1 as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            return cell;
        }
        let next = (nx as usize, ny as usize);
        if self.is_wall(next) {
            cell
        } else {
            next
        }
    }

    /// Deterministic tabular form of the (noiseless) dynamics, one state
    /// per cell. Wall cells become self-loops and are unreachable.
    pub fn to_tabular(&self, horizon: usize, gamma_rl: f64) -> Result<TabularMdp> {
        let n = self.n_cells();
        let mut transition = vec![vec![vec![0.0; n]; 4]; n];
        for y in 0..self.height {
            for x in 0..self.width {
                let s = self.cell_index((x, y));
                for (a, action) in [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right]
                    .into_iter()
                    .enumerate()
                {
                    let next = if self.walls[s] {
                        (x, y)
                    } else {
                        self.blocked_move((x, y), action)
                    };
                    transition[s][a][self.cell_index(next)] = 1.0;
                }
            }
        }
        let mut initial = vec![0.0; n];
        initial[self.cell_index(self.start)] = 1.0;
        TabularMdp::new(transition, initial, horizon, gamma_rl)
    }
}

/// Observation at `cell`: one-hot cell encoding plus noise channels,
/// uniform over the alphabet inside the noisy region and zero outside.
pub fn gridworld_observe(config: &GridworldConfig, cell: (usize, usize), rng: &mut dyn RngCore) -> Vec<f64> {
    let mut obs = vec![0.0; config.obs_dim()];
    obs[config.cell_index(cell)] = 1.0;
    if config.noise_channels > 0 && config.is_noisy(cell) {
        let scale = (config.noise_alphabet - 1) as f64;
        for c in 0..config.noise_channels {
            let symbol = rng.gen_range(0..config.noise_alphabet);
            obs[config.n_cells() + c] = symbol as f64 / scale;
        }
    }
    obs
}

/// One environment step: move one cell unless blocked by a wall or the
/// boundary, then observe.
pub fn gridworld_step(
    config: &GridworldConfig,
    cell: (usize, usize),
    rng: &mut dyn RngCore,
    action: GridAction,
) -> ((usize, usize), Vec<f64>) {
    let next = config.blocked_move(cell, action);
    let obs = gridworld_observe(config, next, rng);
    (next, obs)
}
