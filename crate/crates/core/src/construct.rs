//! Shrinking-ball construction of Jordan curves along a trajectory.
//!
//! Starting from `x*(0)`, the trajectory is followed until it leaves the ball
//! of radius `D`. Each later stage picks a radius `delta_i` below half the
//! previous one and below half the closest approach to `x*(0)` seen so far,
//! waits for the first return to that smaller ball, and closes the arc into
//! a Jordan curve with a chord back to the initial piece of the trajectory.
//! Return times that converge indicate a periodic orbit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Field;
use crate::flow::events::{brent, golden_min};
use crate::flow::{first_circle_hit, FlowError, Hit, Trajectory};
use crate::geom::{first_meet, point_segment_distance, Circle, ClosedPolyline, GeomError, Orientation, Vec2};

/// Smallest trajectory excursion that is not treated as a single point.
pub const SINGLETON_TOL: f64 = 1e-9;

/// Safety factor applied to a third of the largest excursion when picking `D`.
pub const D_SAFETY: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("trajectory stays within {max_distance} of its start: looks like an equilibrium")]
    SingletonSuspected { max_distance: f64 },
    #[error("invalid construction settings: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionConfig {
    /// Maximum number of shrinking stages after the initial exit.
    pub i_max: usize,
    /// Time cap for each hitting-time search.
    pub t_max: f64,
    /// Horizon over which the largest excursion (and hence `D`) is measured.
    pub t_probe: f64,
    /// Ratio `delta_i / min(delta_{i-1}, closest approach)`; must be below 1/2.
    pub shrink: f64,
    /// Largest vertex spacing of Jordan-curve polylines.
    pub max_spacing: f64,
    pub eps_t: f64,
    pub eps_x: f64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self {
            i_max: 8,
            t_max: 1e4,
            t_probe: 20.0,
            shrink: 0.4995,
            max_spacing: 2e-3,
            eps_t: 1e-4,
            eps_x: 1e-7,
        }
    }
}

impl ConstructionConfig {
    pub fn validate(&self) -> Result<(), ConstructError> {
        let bad = |m: &str| Err(ConstructError::InvalidConfig(m.to_string()));
        if self.i_max < 1 {
            return bad("i_max must be at least 1");
        }
        if !(self.shrink > 0.0 && self.shrink < 0.5) {
            return bad("shrink must lie in (0, 0.5)");
        }
        if !(self.t_max > 0.0 && self.t_probe > 0.0 && self.t_max.is_finite()) {
            return bad("t_max and t_probe must be positive and finite");
        }
        if !(self.max_spacing > 0.0 && self.eps_t > 0.0 && self.eps_x > 0.0) {
            return bad("max_spacing, eps_t and eps_x must be positive");
        }
        Ok(())
    }
}

/// Closed curve made of the trajectory arc over `[s, t]` and the chord
/// from `x*(t)` back to `x*(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanCurve {
    pub s: f64,
    pub t: f64,
    /// Orientation when traversed in the direction of the flow.
    pub orientation: Orientation,
    pub simple: bool,
    /// The chord reached `x*(0)` without meeting `x*([0, t0])` earlier.
    pub chord_fallback: bool,
    /// Arc samples from `x*(s)` to `x*(t)`; the closing edge is the chord.
    pub vertices: ClosedPolyline,
}

impl JordanCurve {
    pub fn chord(&self) -> (Vec2, Vec2) {
        let v = self.vertices.vertices();
        (v[v.len() - 1], v[0])
    }

    /// The curve polyline traversed counterclockwise.
    pub fn ccw(&self) -> ClosedPolyline {
        match self.orientation {
            Orientation::CounterClockwise => self.vertices.clone(),
            Orientation::Clockwise => self.vertices.reversed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Running,
    Periodic { t_star: f64 },
    BudgetExhausted,
    NotRecurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub x0: Vec2,
    #[serde(rename = "D")]
    pub d: f64,
    /// `delta_0 = D, delta_1, ...`
    pub delta: Vec<f64>,
    /// `t_0, t_1, ...`
    pub t_hit: Vec<f64>,
    /// `s_1, s_2, ...`
    pub s_meet: Vec<f64>,
    /// Refined return-time candidates, one per stage from stage 2 on.
    pub t_candidates: Vec<Option<f64>>,
    /// `|x*(t_star_i) - x*(0)|` for each candidate.
    pub return_gap: Vec<Option<f64>>,
    pub curves: Vec<JordanCurve>,
    #[serde(flatten)]
    pub status: Status,
}

impl ConstructionTrace {
    pub fn new(x0: Vec2, d: f64, t0: f64) -> Self {
        Self {
            x0,
            d,
            delta: vec![d],
            t_hit: vec![t0],
            s_meet: Vec::new(),
            t_candidates: Vec::new(),
            return_gap: Vec::new(),
            curves: Vec::new(),
            status: Status::Running,
        }
    }

    /// Number of completed stages after the initial exit.
    pub fn stages(&self) -> usize {
        self.t_hit.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.t_hit[0]
    }

    /// Describes every violated construction invariant (empty when sound).
    pub fn violations(&self, traj: &Trajectory) -> Vec<String> {
        let mut out = Vec::new();
        let x0 = self.x0;
        if self.delta.first() != Some(&self.d) {
            out.push("delta_0 differs from D".to_string());
        }
        for i in 1..self.delta.len() {
            if !(self.delta[i] < self.delta[i - 1] / 2.0) {
                out.push(format!("delta_{i} is not below delta_{} / 2", i - 1));
            }
            if !(self.delta[i] < self.d * 0.5f64.powi(i as i32)) {
                out.push(format!("delta_{i} is not below 2^-{i} D"));
            }
            if !(self.t_hit[i] > self.t_hit[i - 1]) {
                out.push(format!("t_{i} does not increase"));
            }
            let gap = traj.at(self.t_hit[i]).dist(x0) - self.delta[i];
            if gap.abs() > 1e-9 * self.delta[i].max(1.0) {
                out.push(format!("|x(t_{i}) - x(0)| misses delta_{i} by {gap:e}"));
            }
        }
        for (k, &s) in self.s_meet.iter().enumerate() {
            let i = k + 1;
            if !(0.0..=self.t0()).contains(&s) {
                out.push(format!("s_{i} = {s} outside [0, t_0]"));
            }
            let (a, b) = (traj.at(self.t_hit[i]), x0);
            let off = point_segment_distance(traj.at(s), a, b);
            if off > 1e-9 {
                out.push(format!("x(s_{i}) is {off:e} off the chord"));
            }
        }
        for (k, c) in self.curves.iter().enumerate() {
            if !c.simple {
                out.push(format!("curve {} is not simple", k + 1));
            }
        }
        out
    }
}

/// Largest-excursion scale `D = 0.9 * max_{t <= t_probe} |x*(t) - x*(0)| / 3`.
pub fn choose_d(traj: &mut Trajectory, t_probe: f64) -> Result<f64, ConstructError> {
    traj.ensure(t_probe)?;
    let x0 = traj.x0();
    let times = traj.sample_times(0.0, t_probe, f64::INFINITY, 8);
    let dist = |t: f64| traj.at(t).dist(x0);
    let (mut k_best, mut best) = (0, 0.0);
    for (k, &t) in times.iter().enumerate() {
        let d = dist(t);
        if d > best {
            best = d;
            k_best = k;
        }
    }
    if k_best > 0 && k_best + 1 < times.len() {
        let (_, neg) = golden_min(|t| -dist(t), times[k_best - 1], times[k_best + 1]);
        best = best.max(-neg);
    }
    if best < 10.0 * SINGLETON_TOL {
        return Err(ConstructError::SingletonSuspected { max_distance: best });
    }
    Ok(D_SAFETY * best / 3.0)
}

/// Closest approach to `x*(0)` over `[a, b]`, refined around the best sample.
pub fn min_distance(traj: &Trajectory, a: f64, b: f64) -> f64 {
    let x0 = traj.x0();
    let dist = |t: f64| traj.at(t).dist(x0);
    if a >= b {
        return dist(a);
    }
    let times = traj.sample_times(a, b, f64::INFINITY, 8);
    let (mut k_best, mut best) = (0, f64::INFINITY);
    for (k, &t) in times.iter().enumerate() {
        let d = dist(t);
        if d < best {
            best = d;
            k_best = k;
        }
    }
    let lo = times[k_best.saturating_sub(1)];
    let hi = times[(k_best + 1).min(times.len() - 1)];
    if hi > lo {
        let (_, m) = golden_min(dist, lo, hi);
        best = best.min(m);
    }
    best
}

/// Next radius: `shrink * min(delta_{i-1}, min_{t in [t_0, t_{i-1}]} |x*(t) - x*(0)|)`.
pub fn next_delta(trace: &ConstructionTrace, traj: &Trajectory, shrink: f64) -> f64 {
    let prev = *trace.delta.last().expect("trace has delta_0");
    let t_prev = *trace.t_hit.last().expect("trace has t_0");
    let m = min_distance(traj, trace.t0(), t_prev);
    shrink * prev.min(m)
}

/// First `t > s` with `|x*(t) - y0| < delta`, or a timeout at `t_max`.
pub fn recurrence_probe(
    traj: &mut Trajectory,
    y0: Vec2,
    delta: f64,
    s: f64,
    t_max: f64,
) -> Result<Hit, ConstructError> {
    let c = Circle::new(y0, delta)?;
    traj.ensure(s)?;
    if traj.at(s).dist(y0) < delta {
        return Ok(Hit::At(s));
    }
    match first_circle_hit(traj, &c, s, t_max) {
        Err(FlowError::OnBoundary { .. }) => Ok(Hit::At(s)),
        other => Ok(other?),
    }
}

/// Outcome of the periodicity test on a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Periodicity {
    Periodic { t_star: f64 },
    NotConverged,
}

/// Candidate return time near stage `i`: a secant step on the distance to
/// `x*(0)` through stages `i - 1` and `i`, polished by minimizing that
/// distance over the bracket the secant step spans.
pub fn refine_return(
    trace: &ConstructionTrace,
    traj: &mut Trajectory,
    i: usize,
) -> Result<Option<(f64, f64)>, ConstructError> {
    if i < 2 || i >= trace.t_hit.len() {
        return Ok(None);
    }
    let (t_a, d_a) = (trace.t_hit[i - 1], trace.delta[i - 1]);
    let (t_b, d_b) = (trace.t_hit[i], trace.delta[i]);
    if !(d_a > d_b && t_b > t_a) {
        return Ok(None);
    }
    let t_sec = t_b + d_b * (t_b - t_a) / (d_a - d_b);
    let hi = t_b + 2.0 * (t_sec - t_b);
    traj.ensure(hi)?;
    let x0 = trace.x0;
    let (t_star, gap) = golden_min(|t| traj.at(t).dist(x0), t_b, hi);
    Ok(Some((t_star, gap)))
}

/// Declares a periodic return when, for the last two stages, consecutive
/// return-time candidates agree within `eps_t` and return to within `eps_x`
/// of `x*(0)`.
pub fn detect_periodicity(trace: &ConstructionTrace, eps_t: f64, eps_x: f64) -> Periodicity {
    let n = trace.t_candidates.len();
    if n < 3 {
        return Periodicity::NotConverged;
    }
    let ok = |j: usize| match (trace.t_candidates[j - 1], trace.t_candidates[j], trace.return_gap[j]) {
        (Some(a), Some(b), Some(g)) => (b - a).abs() <= eps_t && g <= eps_x,
        _ => false,
    };
    if ok(n - 1) && ok(n - 2) {
        Periodicity::Periodic {
            t_star: trace.t_candidates[n - 1].expect("checked above"),
        }
    } else {
        Periodicity::NotConverged
    }
}

fn jordan_curve(
    traj: &Trajectory,
    s: f64,
    t: f64,
    spacing: f64,
    chord_fallback: bool,
) -> Result<JordanCurve, ConstructError> {
    let times = traj.sample_times(s, t, spacing, 8);
    let mut pts: Vec<Vec2> = Vec::with_capacity(times.len());
    for &tk in &times {
        let p = traj.at(tk);
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() > 1 && pts[0] == pts[pts.len() - 1] {
        pts.pop();
    }
    let vertices = ClosedPolyline::new(pts)?;
    let orientation = vertices.orientation()?;
    let simple = vertices.is_simple();
    Ok(JordanCurve {
        s,
        t,
        orientation,
        simple,
        chord_fallback,
        vertices,
    })
}

/// Finds `s_i`: follow the chord from `x*(t_i)` toward `x*(0)` until it first
/// meets `x*([0, t_0])`. Returns the time and whether the fallback endpoint
/// `x*(0)` was used.
fn chord_meet(traj: &Trajectory, t0: f64, t_i: f64, delta: f64) -> Result<(f64, bool), ConstructError> {
    let a = traj.at(t_i);
    let b = traj.x0();
    let times = traj.sample_times(0.0, t0, delta / 4.0, 8);
    let path: Vec<Vec2> = times.iter().map(|&t| traj.at(t)).collect();
    let Some(m) = first_meet(a, b, &path)? else {
        return Ok((0.0, true));
    };
    let k = (m.path_param.floor() as usize).min(times.len() - 2);
    let u = m.path_param - k as f64;
    if k == 0 && u == 0.0 {
        return Ok((0.0, true));
    }
    let (ta, tb) = (times[k], times[k + 1]);
    let dir = b - a;
    let side = |t: f64| (traj.at(t) - a).cross(dir);
    let (sa, sb) = (side(ta), side(tb));
    let s = if sa == 0.0 {
        ta
    } else if sb == 0.0 {
        tb
    } else if (sa > 0.0) != (sb > 0.0) {
        brent(side, ta, tb, sa, sb)
    } else {
        ta + (tb - ta) * u
    };
    Ok((s, s == 0.0))
}

/// Runs the construction on `traj`, whose start point is `x*(0)`.
pub fn run_construction(
    traj: &mut Trajectory,
    cfg: &ConstructionConfig,
) -> Result<ConstructionTrace, ConstructError> {
    cfg.validate()?;
    let x0 = traj.x0();
    let d = choose_d(traj, cfg.t_probe)?;
    let t0 = match first_circle_hit(traj, &Circle::new(x0, d)?, 0.0, cfg.t_max)? {
        Hit::At(t) => t,
        Hit::Timeout => {
            let mut trace = ConstructionTrace::new(x0, d, f64::NAN);
            trace.t_hit.clear();
            trace.status = Status::NotRecurrent;
            return Ok(trace);
        }
    };
    let mut trace = ConstructionTrace::new(x0, d, t0);
    for i in 1..=cfg.i_max {
        let delta = next_delta(&trace, traj, cfg.shrink);
        let ball = Circle::new(x0, delta)?;
        let t_i = match first_circle_hit(traj, &ball, t0, cfg.t_max)? {
            Hit::At(t) => t,
            Hit::Timeout => {
                trace.status = Status::NotRecurrent;
                return Ok(trace);
            }
        };
        let (s_i, fallback) = chord_meet(traj, t0, t_i, delta)?;
        let spacing = (delta / 4.0).min(cfg.max_spacing);
        let curve = jordan_curve(traj, s_i, t_i, spacing, fallback)?;
        trace.delta.push(delta);
        trace.t_hit.push(t_i);
        trace.s_meet.push(s_i);
        trace.curves.push(curve);
        let cand = refine_return(&trace, traj, i)?;
        trace.t_candidates.push(cand.map(|c| c.0));
        trace.return_gap.push(cand.map(|c| c.1));
        if let Periodicity::Periodic { t_star } = detect_periodicity(&trace, cfg.eps_t, cfg.eps_x) {
            trace.status = Status::Periodic { t_star };
            return Ok(trace);
        }
    }
    trace.status = Status::BudgetExhausted;
    Ok(trace)
}

/// Integrates from `x0` and runs the construction; returns the trajectory too.
pub fn construct_from(
    field: Field,
    x0: Vec2,
    tol: f64,
    cfg: &ConstructionConfig,
) -> Result<(ConstructionTrace, Trajectory), ConstructError> {
    let mut traj = Trajectory::integrate(field, x0, cfg.t_probe, tol)?;
    let trace = run_construction(&mut traj, cfg)?;
    Ok((trace, traj))
}
