//! Manipulator joint trajectories through timed waypoints.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Piecewise quintic blend between waypoints: each segment starts and ends at rest,
/// so position, velocity and acceleration are continuous. Holds the last waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorTrajectory {
    times: Vec<f64>,
    postures: Vec<DVector<f64>>,
}

impl ManipulatorTrajectory {
    pub fn new(waypoints: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::Invalid("trajectory needs at least one waypoint".into()));
        }
        let dof = waypoints[0].1.len();
        let mut times = Vec::with_capacity(waypoints.len());
        let mut postures = Vec::with_capacity(waypoints.len());
        for (t, q) in waypoints {
            if q.len() != dof {
                return Err(Error::Invalid("waypoints disagree on joint count".into()));
            }
            if let Some(&last) = times.last() {
                if !(t > last) {
                    return Err(Error::Invalid("waypoint times must be strictly increasing".into()));
                }
            }
            times.push(t);
            postures.push(DVector::from_vec(q));
        }
        Ok(ManipulatorTrajectory { times, postures })
    }

    /// Constant posture.
    pub fn hold(q: Vec<f64>, duration: f64) -> Result<Self> {
        Self::new(vec![(0.0, q.clone()), (duration.max(f64::MIN_POSITIVE), q)])
    }

    pub fn dof(&self) -> usize {
        self.postures[0].len()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn waypoints(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> {
        self.times.iter().copied().zip(&self.postures)
    }

    /// Position, velocity and acceleration at time `t`.
    pub fn sample(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.dof();
        let zero = || DVector::zeros(n);
        if t <= self.times[0] {
            return (self.postures[0].clone(), zero(), zero());
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return (self.postures[last].clone(), zero(), zero());
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let span = t1 - t0;
        let s = (t - t0) / span;
        // 10s³ - 15s⁴ + 6s⁵ and its derivatives
        let p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let dp = 30.0 * s * s * (1.0 - s) * (1.0 - s) / span;
        let ddp = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (span * span);
        let delta = &self.postures[k + 1] - &self.postures[k];
        (&self.postures[k] + &delta * p, &delta * dp, &delta * ddp)
    }
}

/// Named postures of the shipped seven-joint arm.
pub mod postures {
    pub const PARKING: [f64; 7] = [0.0, 0.0, 0.0, 2.4, 0.0, -2.2, 0.0];
    pub const OPERATION: [f64; 7] = [0.0, 0.4, 0.0, 1.4, 0.0, -1.0, 0.0];
    pub const PICK_PLACE_A: [f64; 7] = [0.8, 0.9, 0.0, 0.6, 0.0, 0.4, 0.0];
    pub const PICK_PLACE_B: [f64; 7] = [-1.2, 1.0, 0.5, 0.4, 0.0, 0.6, 0.0];
    pub const STRETCH: [f64; 7] = [0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0];

    /// parking → operation → pick/place → operation → pick/place (second configuration) →
    /// operation → stretch → operation → parking, with fast moves between holds.
    pub fn aggressive_sequence(hold: f64, travel: f64) -> Vec<(f64, Vec<f64>)> {
        let order = [
            PARKING, OPERATION, PICK_PLACE_A, OPERATION, PICK_PLACE_B, OPERATION, STRETCH, OPERATION, PARKING,
        ];
        let mut out = Vec::new();
        let mut t = 0.0;
        for (i, p) in order.iter().enumerate() {
            if i > 0 {
                t += travel;
            }
            out.push((t, p.to_vec()));
            t += hold;
            out.push((t, p.to_vec()));
        }
        out
    }
}
