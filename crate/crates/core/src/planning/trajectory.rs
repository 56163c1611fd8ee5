use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::PlanError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub accelerations: Vec<f64>,
}

/// Motion along one straight path segment. Every joint follows the same normalized
/// trapezoidal profile s(t) from 0 to 1, so the motion stays on the segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_time: f64,
    pub duration: f64,
    /// Length of the acceleration (and deceleration) phase; `duration / 2` when
    /// cruise speed is never reached.
    pub accel_time: f64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

impl Segment {
    fn peak_rate(&self) -> f64 {
        1.0 / (self.duration - self.accel_time)
    }

    /// (s, ds/dt, d²s/dt²) at local time `tau`, right-continuous at phase switches.
    fn profile(&self, tau: f64) -> (f64, f64, f64) {
        let (t, ta) = (self.duration, self.accel_time);
        let vp = self.peak_rate();
        let a = vp / ta;
        if tau <= 0.0 {
            (0.0, 0.0, a)
        } else if tau < ta {
            (0.5 * a * tau * tau, a * tau, a)
        } else if tau < t - ta {
            (0.5 * a * ta * ta + vp * (tau - ta), vp, 0.0)
        } else if tau < t {
            let r = t - tau;
            (1.0 - 0.5 * a * r * r, a * r, -a)
        } else {
            (1.0, 0.0, 0.0)
        }
    }

    fn state_at(&self, tau: f64) -> TrajectoryPoint {
        let (s, ds, dds) = self.profile(tau);
        let n = self.from.len();
        let mut p = TrajectoryPoint {
            t: self.start_time + tau,
            positions: Vec::with_capacity(n),
            velocities: Vec::with_capacity(n),
            accelerations: Vec::with_capacity(n),
        };
        for (a, b) in self.from.iter().zip(&self.to) {
            let d = b - a;
            p.positions.push(if s >= 1.0 { *b } else { a + d * s });
            p.velocities.push(d * ds);
            p.accelerations.push(d * dds);
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Variable names, in column order.
    pub joints: Vec<String>,
    /// Waypoints at every phase switch; strictly increasing times.
    pub points: Vec<TrajectoryPoint>,
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    /// State at time `t`, clamped to the trajectory's time span.
    pub fn sample(&self, t: f64) -> TrajectoryPoint {
        let Some(first) = self.segments.first() else {
            let mut p = self.points[0].clone();
            p.t = t;
            return p;
        };
        if t <= first.start_time {
            return first.state_at(0.0);
        }
        if t >= self.duration() {
            let mut p = self.points.last().expect("nonempty").clone();
            p.t = t;
            return p;
        }
        let k = self.segments.partition_point(|s| s.start_time <= t).saturating_sub(1);
        let s = &self.segments[k];
        s.state_at((t - s.start_time).min(s.duration))
    }

    /// Uniform resampling every `period` seconds, always ending at the final time.
    pub fn resample(&self, period: f64) -> Vec<TrajectoryPoint> {
        let end = self.duration();
        let n = (end / period).ceil() as usize;
        let mut out: Vec<TrajectoryPoint> = (0..n).map(|i| self.sample(i as f64 * period)).collect();
        let mut last = self.points.last().expect("nonempty").clone();
        last.t = end;
        out.push(last);
        out
    }

    /// CSV with header `t,<j>_pos,<j>_vel,<j>_acc,...`. Uses the phase-switch
    /// waypoints, or a uniform resampling when `period` is given.
    pub fn to_csv(&self, period: Option<f64>) -> String {
        let mut out = String::from("t");
        for j in &self.joints {
            write!(out, ",{j}_pos,{j}_vel,{j}_acc").unwrap();
        }
        out.push('\n');
        let rows = match period {
            Some(p) => self.resample(p),
            None => self.points.clone(),
        };
        for p in rows {
            write!(out, "{}", p.t).unwrap();
            for i in 0..self.joints.len() {
                write!(out, ",{},{},{}", p.positions[i], p.velocities[i], p.accelerations[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Time-optimal normalized profile for a segment under per-joint limits.
fn segment_timing(delta: &[f64], vmax: &[f64], amax: &[f64]) -> (f64, f64) {
    let mut v = f64::INFINITY;
    let mut a = f64::INFINITY;
    for i in 0..delta.len() {
        let d = delta[i].abs();
        if d > 0.0 {
            v = v.min(vmax[i] / d);
            a = a.min(amax[i] / d);
        }
    }
    if v * v / a <= 1.0 {
        let ta = v / a;
        (1.0 / v + ta, ta)
    } else {
        let ta = (1.0 / a).sqrt();
        (2.0 * ta, ta)
    }
}

/// Times a piecewise-linear joint path with zero velocity at every waypoint.
/// `vmax`/`amax` are per-variable limits, in path column order.
pub fn time_parameterize(
    joints: &[String],
    path: &[Vec<f64>],
    vmax: &[f64],
    amax: &[f64],
) -> Result<Trajectory, PlanError> {
    let n = joints.len();
    if path.is_empty() {
        return Err(PlanError::InvalidRequest("cannot time an empty path".into()));
    }
    if vmax.len() != n || amax.len() != n || path.iter().any(|q| q.len() != n) {
        return Err(PlanError::InvalidRequest("path and limit dimensions disagree".into()));
    }
    if let Some(i) = (0..n).find(|&i| !(vmax[i] > 0.0 && amax[i] > 0.0 && vmax[i].is_finite() && amax[i].is_finite())) {
        return Err(PlanError::InvalidLimits(joints[i].clone()));
    }
    let mut traj = Trajectory {
        joints: joints.to_vec(),
        points: vec![TrajectoryPoint {
            t: 0.0,
            positions: path[0].clone(),
            velocities: vec![0.0; n],
            accelerations: vec![0.0; n],
        }],
        segments: Vec::new(),
    };
    let mut t = 0.0;
    for w in path.windows(2) {
        let delta: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        if delta.iter().all(|d| *d == 0.0) {
            continue;
        }
        let (duration, accel_time) = segment_timing(&delta, vmax, amax);
        let seg = Segment {
            start_time: t,
            duration,
            accel_time,
            from: w[0].clone(),
            to: w[1].clone(),
        };
        // Replace the previous end point (zero acceleration) with this segment's start.
        let start = seg.state_at(0.0);
        *traj.points.last_mut().unwrap() = TrajectoryPoint { t, ..start };
        let mut switches = vec![accel_time];
        if duration - accel_time > accel_time {
            switches.push(duration - accel_time);
        }
        for tau in switches {
            traj.points.push(seg.state_at(tau));
        }
        let mut end = seg.state_at(duration);
        end.positions = w[1].clone();
        traj.points.push(end);
        t += duration;
        traj.segments.push(seg);
    }
    Ok(traj)
}
