//! Continuous point-mass maze with segment walls.

use crate::error::{Error, Result};

/// A wall segment in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMazeConfig {
    pub walls: Vec<Segment>,
    pub dt: f64,
    pub action_bound: f64,
    pub start: (f64, f64),
    /// `(min_x, min_y, max_x, max_y)`; the arena boundary acts as walls.
    pub bounds: (f64, f64, f64, f64),
}

impl PointMazeConfig {
    /// Empty square arena.
    pub fn open(size: f64, start: (f64, f64)) -> Result<Self> {
        let cfg = Self {
            walls: Vec::new(),
            dt: 0.1,
            action_bound: 1.0,
            start,
            bounds: (0.0, 0.0, size, size),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A U-shaped obstacle in a 10x10 arena.
    pub fn u_maze() -> Self {
        let mut cfg = Self::open(10.0, (2.0, 5.0)).unwrap();
        cfg.walls = vec![
            Segment { a: (4.0, 2.0), b: (4.0, 8.0) },
            Segment { a: (4.0, 2.0), b: (7.0, 2.0) },
            Segment { a: (4.0, 8.0), b: (7.0, 8.0) },
        ];
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let (x0, y0, x1, y1) = self.bounds;
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::config("degenerate arena bounds"));
        }
        if self.dt <= 0.0 || self.action_bound <= 0.0 {
            return Err(Error::config("dt and action bound must be positive"));
        }
        let (sx, sy) = self.start;
        if !(x0..=x1).contains(&sx) || !(y0..=y1).contains(&sy) {
            return Err(Error::config("start outside the arena"));
        }
        Ok(())
    }

    fn boundary_segments(&self) -> [Segment; 4] {
        let (x0, y0, x1, y1) = self.bounds;
        [
            Segment { a: (x0, y0), b: (x1, y0) },
            Segment { a: (x1, y0), b: (x1, y1) },
            Segment { a: (x1, y1), b: (x0, y1) },
            Segment { a: (x0, y1), b: (x0, y0) },
        ]
    }
}

/// Parameter `t` along `p -> q` of the earliest proper intersection with
/// `seg`, if any.
fn intersection_param(p: (f64, f64), q: (f64, f64), seg: &Segment) -> Option<f64> {
    let r = (q.0 - p.0, q.1 - p.1);
    let s = (seg.b.0 - seg.a.0, seg.b.1 - seg.a.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-15 {
        return None; // parallel or degenerate
    }
    let qp = (seg.a.0 - p.0, seg.a.1 - p.1);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Moves the point by `dt * action` (inf-norm clamped to the action
/// bound), stopping just short of the first wall or boundary segment the
/// motion would cross.
pub fn pointmaze_step(config: &PointMazeConfig, position: (f64, f64), action: (f64, f64)) -> (f64, f64) {
    let b = config.action_bound;
    let a = (action.0.clamp(-b, b), action.1.clamp(-b, b));
    let target = (position.0 + config.dt * a.0, position.1 + config.dt * a.1);
    if target == position {
        return position;
    }
    let mut t_hit = f64::INFINITY;
    for seg in config.walls.iter().chain(config.boundary_segments().iter()) {
        if let Some(t) = intersection_param(position, target, seg) {
            if t > 1e-12 && t < t_hit {
                t_hit = t;
            }
        }
    }
    if !t_hit.is_finite() {
        return target;
    }
    // Stop on the near side, within 1e-9 of the wall.
    let dir = (target.0 - position.0, target.1 - position.1);
    let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    let backoff = (1e-10 / len).min(t_hit);
    let t = t_hit - backoff;
    (position.0 + t * dir.0, position.1 + t * dir.1)
}
