//! The two exactly-specified decision MDPs: a sticky-branch bandit and a
//! sticky binary tree.

use crate::env::TabularMdp;
use crate::error::{Error, Result};

/// State and action indices of the bandit MDP.
pub mod bandit {
    pub const ROOT: usize = 0;
    pub const LEFT_1: usize = 1;
    pub const LEFT_LEAF: usize = 2;
    pub const RIGHT_1: usize = 3;
    pub const RIGHT_LEAF: usize = 4;
    pub const ACTION_LEFT: usize = 0;
    pub const ACTION_RIGHT: usize = 1;
    /// Stay probability per step on the sticky right chain.
    pub const STICKY_STAY: f64 = 0.9;
    /// Advance probability per step on the sticky right chain.
    pub const STICKY_ADVANCE: f64 = 0.1;
}

/// Two-armed branch-choice MDP.
///
/// From the root, `left`/`right` deterministically enter the matching
/// branch. The left chain advances deterministically to its leaf; the
/// right chain advances with probability 0.1 and stays put with 0.9.
/// Leaves absorb. After the root the dynamics ignore the action, so the
/// only real decision is the first one. Horizon 30, discount 0.99.
pub fn build_bandit_mdp() -> TabularMdp {
    use bandit::*;
    let n = 5;
    let delta = |s: usize| {
        let mut row = vec![0.0; n];
        row[s] = 1.0;
        row
    };
    let mut transition = vec![vec![vec![0.0; n]; 2]; n];
    transition[ROOT][ACTION_LEFT] = delta(LEFT_1);
    transition[ROOT][ACTION_RIGHT] = delta(RIGHT_1);
    for a in 0..2 {
        transition[LEFT_1][a] = delta(LEFT_LEAF);
        transition[LEFT_LEAF][a] = delta(LEFT_LEAF);
        let mut sticky = vec![0.0; n];
        sticky[RIGHT_1] = STICKY_STAY;
        sticky[RIGHT_LEAF] = STICKY_ADVANCE;
        transition[RIGHT_1][a] = sticky;
        transition[RIGHT_LEAF][a] = delta(RIGHT_LEAF);
    }
    let mut initial = vec![0.0; n];
    initial[ROOT] = 1.0;
    TabularMdp::new(transition, initial, 30, 0.99).expect("bandit MDP is well-formed")
}

/// Depth of a BFS-indexed binary-tree node.
pub fn tree_node_depth(node: usize) -> u32 {
    (node + 1).ilog2()
}

/// Binary tree with sticky depth-1 transitions.
///
/// Nodes are BFS-indexed (root 0, children of `v` at `2v+1`, `2v+2`),
/// actions are `{0: left child, 1: right child, 2: stay}`. Every step the
/// intended action executes with probability 0.9; otherwise a uniformly
/// random action executes. A child action at a depth-1 node then succeeds
/// only 10% of the time (stays otherwise); child actions at leaves stay;
/// everywhere else actions resolve deterministically. Horizon 10,
/// discount 0.9.
pub fn build_tree_mdp(depth: usize) -> Result<TabularMdp> {
    if depth < 2 {
        return Err(Error::config("tree depth must be at least 2"));
    }
    let n = (1usize << (depth + 1)) - 1;
    let n_actions = 3;
    let child = |v: usize, a: usize| -> Option<usize> {
        let c = 2 * v + 1 + a;
        (c < n).then_some(c)
    };

    let mut transition = vec![vec![vec![0.0; n]; n_actions]; n];
    for v in 0..n {
        for intended in 0..n_actions {
            let row = &mut transition[v][intended];
            // Executed-action mixture: 0.9 intended, 0.1 uniform random.
            for executed in 0..n_actions {
                let mut p = if executed == intended { 0.9 } else { 0.0 };
                p += 0.1 / n_actions as f64;
                if p == 0.0 {
                    continue;
                }
                if executed == 2 {
                    row[v] += p;
                    continue;
                }
                match child(v, executed) {
                    None => row[v] += p,
                    Some(c) => {
                        if tree_node_depth(v) == 1 {
                            row[c] += p * 0.1;
                            row[v] += p * 0.9;
                        } else {
                            row[c] += p;
                        }
                    }
                }
            }
        }
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    TabularMdp::new(transition, initial, 10, 0.9)
}
