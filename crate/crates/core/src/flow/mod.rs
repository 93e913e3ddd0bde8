//! Numerical solutions `x*(t)` of `dx/dt = f(x)` on growing time windows.
//!
//! A [`Trajectory`] is an append-only list of accepted Dormand–Prince steps.
//! Each step keeps its continuous extension, so the solution can be sampled
//! at any time in `[0, t_end]` and event times can be located to near machine
//! precision without re-integrating.

mod dopri;
pub mod events;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, FieldError};
use crate::geom::Vec2;

pub use dopri::DenseStep;
pub use events::{
    circle_events, displacement_sum, first_circle_hit, residence, residence_between, Event, Hit, ResidenceInterval,
    ResidenceIntervals,
};

pub const TOL_MIN: f64 = 1e-13;
pub const TOL_MAX: f64 = 1e-3;

/// Dense-output defect allowance, as a multiple of the step tolerance.
pub const DEFECT_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("tolerance {0} outside [1e-13, 1e-3]")]
    ToleranceOutOfRange(f64),
    #[error("invalid integration horizon {0}")]
    InvalidHorizon(f64),
    #[error("cannot extend to {t_new}: trajectory already reaches {t_end}")]
    NotExtending { t_new: f64, t_end: f64 },
    #[error("step size underflow at t = {t}, x = ({}, {})", x.x, x.y)]
    StepUnderflow { t: f64, x: Vec2 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("time {t} is past the trajectory horizon {t_end}")]
    BeyondHorizon { t: f64, t_end: f64 },
    #[error("start point at t = {t} lies on the circle (distance {gap} from it)")]
    OnBoundary { t: f64, gap: f64 },
    #[error("stored trajectory is inconsistent: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub x: Vec2,
    /// `f(x)` at the knot.
    pub dx: Vec2,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    field: Field,
    tol: f64,
    knots: Vec<Knot>,
    steps: Vec<DenseStep>,
    h_next: f64,
    rejected: usize,
}

impl Trajectory {
    /// Integrates from `x0` at `t = 0` up to `t_end`.
    pub fn integrate(field: Field, x0: Vec2, t_end: f64, tol: f64) -> Result<Self, FlowError> {
        if !(TOL_MIN..=TOL_MAX).contains(&tol) {
            return Err(FlowError::ToleranceOutOfRange(tol));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(FlowError::InvalidHorizon(t_end));
        }
        if !x0.is_finite() {
            return Err(FlowError::NonFinite { t: 0.0 });
        }
        let dx = field.eval(x0)?;
        let h_next = dopri::initial_step(&field, x0, dx, tol)?;
        let mut traj = Trajectory {
            field,
            tol,
            knots: vec![Knot { t: 0.0, x: x0, dx }],
            steps: Vec::new(),
            h_next,
            rejected: 0,
        };
        traj.advance(t_end)?;
        Ok(traj)
    }

    /// Continues the solution to `t_new`; existing knots are left untouched.
    pub fn extend(&mut self, t_new: f64) -> Result<(), FlowError> {
        if !(t_new > self.t_end()) {
            return Err(FlowError::NotExtending {
                t_new,
                t_end: self.t_end(),
            });
        }
        if !t_new.is_finite() {
            return Err(FlowError::InvalidHorizon(t_new));
        }
        self.advance(t_new)
    }

    /// Extends if `t` lies beyond the current horizon.
    pub fn ensure(&mut self, t: f64) -> Result<(), FlowError> {
        if t > self.t_end() {
            self.extend(t)
        } else {
            Ok(())
        }
    }

    fn advance(&mut self, t_target: f64) -> Result<(), FlowError> {
        let tol = self.tol;
        let mut last = *self.knots.last().expect("trajectory has a first knot");
        let mut h = self.h_next;
        while last.t < t_target {
            let min_step = 1e-14 * last.t.abs().max(1.0);
            let remaining = t_target - last.t;
            // Avoid leaving a sliver step at the end.
            let clipped = h >= remaining * (1.0 - 1e-9);
            let h_try = if clipped { remaining } else { h };
            if h_try < min_step && !clipped {
                return Err(FlowError::StepUnderflow { t: last.t, x: last.x });
            }
            let s = dopri::step(&self.field, last.x, last.dx, h_try, tol)?;
            if !s.x1.is_finite() {
                return Err(FlowError::NonFinite { t: last.t + h_try });
            }
            let defect_ratio = if s.err <= 1.0 {
                let xm = s.dense.state(0.5);
                let fm = self.field.eval(xm)?;
                let defect = (s.dense.velocity(0.5) - fm).norm();
                defect / (DEFECT_FACTOR * tol * fm.norm().max(1.0))
            } else {
                0.0
            };
            if s.err <= 1.0 && defect_ratio <= 1.0 {
                let t1 = if clipped { t_target } else { last.t + h_try };
                last = Knot {
                    t: t1,
                    x: s.x1,
                    dx: s.f1,
                };
                self.knots.push(last);
                self.steps.push(s.dense);
                let fac = if s.err == 0.0 {
                    5.0
                } else {
                    (0.9 * s.err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A clipped step says nothing about the natural step size.
                if !clipped || h_try * fac < h {
                    h = h_try * fac;
                }
            } else {
                self.rejected += 1;
                let fac_err = if s.err > 1.0 {
                    (0.9 * s.err.powf(-0.2)).max(0.1)
                } else {
                    1.0
                };
                let fac_def = if defect_ratio > 1.0 {
                    (0.9 * defect_ratio.powf(-0.25)).max(0.1)
                } else {
                    1.0
                };
                h = h_try * fac_err.min(fac_def);
                if h < min_step {
                    return Err(FlowError::StepUnderflow { t: last.t, x: last.x });
                }
            }
        }
        self.h_next = h;
        Ok(())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn x0(&self) -> Vec2 {
        self.knots[0].x
    }

    pub fn t_end(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.t)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Time span of step `i`.
    pub fn step_span(&self, i: usize) -> (f64, f64) {
        (self.knots[i].t, self.knots[i + 1].t)
    }

    pub fn dense_step(&self, i: usize) -> &DenseStep {
        &self.steps[i]
    }

    /// Index of the step containing `t`, clamped to the valid range.
    pub fn step_index(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|k| k.t <= t);
        i.saturating_sub(1).min(self.steps.len().saturating_sub(1))
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        assert!(
            (0.0..=self.t_end()).contains(&t),
            "t = {t} outside [0, {}]",
            self.t_end()
        );
        let i = self.step_index(t);
        let (t0, t1) = self.step_span(i);
        (i, (t - t0) / (t1 - t0))
    }

    /// Solution at time `t`. Panics if `t` lies outside `[0, t_end]`.
    pub fn at(&self, t: f64) -> Vec2 {
        if self.steps.is_empty() {
            return self.knots[0].x;
        }
        let (i, theta) = self.locate(t);
        if theta == 0.0 {
            return self.knots[i].x;
        }
        if theta == 1.0 {
            return self.knots[i + 1].x;
        }
        self.steps[i].state(theta)
    }

    /// Time derivative of the interpolant at `t`.
    pub fn velocity(&self, t: f64) -> Vec2 {
        if self.steps.is_empty() {
            return self.knots[0].dx;
        }
        let (i, theta) = self.locate(t);
        self.steps[i].velocity(theta)
    }

    pub fn try_at(&self, t: f64) -> Result<Vec2, FlowError> {
        if !(0.0..=self.t_end()).contains(&t) {
            return Err(FlowError::BeyondHorizon {
                t,
                t_end: self.t_end(),
            });
        }
        Ok(self.at(t))
    }

    /// Samples `[a, b]` so that consecutive points are at most `max_spacing`
    /// apart in the plane (estimated from knot speeds) and at most
    /// `1 / per_step` of a step apart in time. Knots inside are included.
    pub fn sample_times(&self, a: f64, b: f64, max_spacing: f64, per_step: usize) -> Vec<f64> {
        assert!(a <= b && b <= self.t_end() && a >= 0.0);
        let mut out = vec![a];
        if a == b || self.steps.is_empty() {
            return out;
        }
        let (i0, i1) = (self.step_index(a), self.step_index(b));
        for i in i0..=i1 {
            let (t0, t1) = self.step_span(i);
            let speed = self.knots[i].dx.norm().max(self.knots[i + 1].dx.norm());
            let arc = speed * (t1 - t0) * 1.25;
            let n = ((arc / max_spacing).ceil() as usize).max(per_step).clamp(1, 1 << 20);
            for k in 1..=n {
                let t = if k == n {
                    t1
                } else {
                    t0 + (t1 - t0) * (k as f64 / n as f64)
                };
                if t > a && t < b {
                    out.push(t);
                }
            }
        }
        out.push(b);
        out
    }

    /// CSV dump of the knots: `t,x,y,fx,fy`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y,fx,fy")?;
        for k in &self.knots {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                k.t, k.x.x, k.x.y, k.dx.x, k.dx.y
            )?;
        }
        Ok(())
    }

    pub fn to_data(&self) -> TrajectoryData {
        TrajectoryData {
            tol: self.tol,
            h_next: self.h_next,
            knots: self
                .knots
                .iter()
                .map(|k| [k.t, k.x.x, k.x.y, k.dx.x, k.dx.y])
                .collect(),
            steps: self
                .steps
                .iter()
                .map(|s| {
                    let mut row = [0.0; 11];
                    row[0] = s.h;
                    for (j, r) in s.r.iter().enumerate() {
                        row[1 + 2 * j] = r.x;
                        row[2 + 2 * j] = r.y;
                    }
                    row
                })
                .collect(),
        }
    }

    /// Rebuilds a stored trajectory, checking it against `field`.
    pub fn from_data(field: Field, data: &TrajectoryData) -> Result<Self, FlowError> {
        let corrupt = |m: String| FlowError::Corrupt(m);
        if !(TOL_MIN..=TOL_MAX).contains(&data.tol) {
            return Err(FlowError::ToleranceOutOfRange(data.tol));
        }
        if data.knots.is_empty() || data.knots.len() != data.steps.len() + 1 {
            return Err(corrupt(format!(
                "{} knots for {} steps",
                data.knots.len(),
                data.steps.len()
            )));
        }
        let knots: Vec<Knot> = data
            .knots
            .iter()
            .map(|r| Knot {
                t: r[0],
                x: Vec2::new(r[1], r[2]),
                dx: Vec2::new(r[3], r[4]),
            })
            .collect();
        if knots[0].t != 0.0 {
            return Err(corrupt("first knot is not at t = 0".into()));
        }
        for (i, k) in knots.iter().enumerate() {
            if i > 0 && !(k.t > knots[i - 1].t) {
                return Err(corrupt(format!("knot times not increasing at {i}")));
            }
            let f = field.eval(k.x)?;
            if (f - k.dx).norm() > 1e-12 * f.norm().max(1.0) {
                return Err(corrupt(format!("knot {i} derivative disagrees with the field")));
            }
        }
        let steps: Vec<DenseStep> = data
            .steps
            .iter()
            .map(|r| DenseStep {
                h: r[0],
                r: [
                    Vec2::new(r[1], r[2]),
                    Vec2::new(r[3], r[4]),
                    Vec2::new(r[5], r[6]),
                    Vec2::new(r[7], r[8]),
                    Vec2::new(r[9], r[10]),
                ],
            })
            .collect();
        for (i, s) in steps.iter().enumerate() {
            if s.r[0] != knots[i].x {
                return Err(corrupt(format!("step {i} does not start at its knot")));
            }
        }
        Ok(Trajectory {
            field,
            tol: data.tol,
            knots,
            steps,
            h_next: data.h_next,
            rejected: 0,
        })
    }
}

/// Serialized form of a [`Trajectory`]: knot rows `[t, x, y, fx, fy]` and
/// step rows `[h, r1x, r1y, ..., r5x, r5y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryData {
    pub tol: f64,
    pub h_next: f64,
    pub knots: Vec<[f64; 5]>,
    pub steps: Vec<[f64; 11]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::f64::consts::{PI, TAU};

    fn builtin(name: &str) -> Field {
        Field::builtin(name, BTreeMap::new()).unwrap()
    }

    #[test]
    fn center_returns_after_one_turn() {
        let tr = Trajectory::integrate(builtin("center"), Vec2::new(1., 0.), TAU, 1e-10).unwrap();
        assert_eq!(tr.t_end(), TAU);
        assert!((tr.at(TAU) - Vec2::new(1., 0.)).norm() < 1e-8);
        for k in 0..100 {
            let t = TAU * k as f64 / 100.0;
            assert!((tr.at(t) - Vec2::new(t.cos(), t.sin())).norm() < 1e-8);
        }
    }

    #[test]
    fn focus_decays_at_unit_rate() {
        let tr =
            Trajectory::integrate(builtin("stable_focus"), Vec2::new(1., 0.), 20.0, 1e-10).unwrap();
        assert!(tr.at(20.0).norm() <= 2.0 * (-20f64).exp());
    }

    #[test]
    fn extension_is_append_only() {
        let mut tr =
            Trajectory::integrate(builtin("center"), Vec2::new(1., 0.), TAU, 1e-10).unwrap();
        let probes = [0.3, 1.7, PI, 5.5, TAU];
        let before: Vec<Vec2> = probes.iter().map(|&t| tr.at(t)).collect();
        let knots_before = tr.knots().to_vec();
        tr.extend(2.0 * TAU).unwrap();
        assert!((tr.at(2.0 * TAU) - Vec2::new(1., 0.)).norm() < 2e-8);
        for (t, b) in probes.iter().zip(&before) {
            let a = tr.at(*t);
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(&tr.knots()[..knots_before.len()], &knots_before[..]);
        assert!(matches!(tr.extend(TAU), Err(FlowError::NotExtending { .. })));
        assert!(matches!(tr.extend(2.0 * TAU), Err(FlowError::NotExtending { .. })));
    }

    #[test]
    fn tolerance_range_enforced() {
        for tol in [1e-14, 1e-2, 0.0, f64::NAN] {
            assert!(matches!(
                Trajectory::integrate(builtin("center"), Vec2::new(1., 0.), 1.0, tol),
                Err(FlowError::ToleranceOutOfRange(_))
            ));
        }
    }

    #[test]
    fn blow_up_reports_location() {
        // x' = x^2 from x = 1 blows up at t = 1.
        let f = Field::parse("x^2", "0", BTreeMap::new()).unwrap();
        let err = Trajectory::integrate(f, Vec2::new(1., 0.), 2.0, 1e-8).unwrap_err();
        match err {
            FlowError::StepUnderflow { t, .. } | FlowError::NonFinite { t } => {
                assert!((t - 1.0).abs() < 1e-3, "t = {t}")
            }
            FlowError::Field(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn domain_error_surfaces() {
        let f = Field::parse("-1", "sqrt(x)", BTreeMap::new()).unwrap();
        let err = Trajectory::integrate(f, Vec2::new(1., 0.), 5.0, 1e-8).unwrap_err();
        assert!(matches!(err, FlowError::Field(_)), "{err:?}");
    }

    #[test]
    fn knot_derivatives_match_field() {
        let f = Field::builtin("vdp", BTreeMap::new()).unwrap();
        let tr = Trajectory::integrate(f.clone(), Vec2::new(2., 0.), 20.0, 1e-9).unwrap();
        for k in tr.knots() {
            assert_eq!(k.dx, f.eval(k.x).unwrap());
        }
        for w in tr.knots().windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn midpoint_defect_within_bound() {
        let f = Field::builtin("vdp", BTreeMap::new()).unwrap();
        let tol = 1e-10;
        let tr = Trajectory::integrate(f.clone(), Vec2::new(2., 0.), 30.0, tol).unwrap();
        for i in 0..tr.step_count() {
            let (a, b) = tr.step_span(i);
            let t = 0.5 * (a + b);
            let fm = f.eval(tr.at(t)).unwrap();
            let defect = (tr.velocity(t) - fm).norm();
            assert!(defect <= DEFECT_FACTOR * tol * fm.norm().max(1.0) * 1.000001);
        }
    }

    #[test]
    fn csv_format() {
        let tr = Trajectory::integrate(builtin("center"), Vec2::new(1., 0.), 1.0, 1e-6).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,fx,fy"));
        let first = lines.next().unwrap();
        assert_eq!(
            first,
            "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,-0.0000000000000000e0,1.0000000000000000e0"
        );
        assert_eq!(text.lines().count(), tr.knots().len() + 1);
    }

    #[test]
    fn data_round_trip_and_validation() {
        let f = builtin("center");
        let tr = Trajectory::integrate(f.clone(), Vec2::new(1., 0.), 3.0, 1e-9).unwrap();
        let json = serde_json::to_string(&tr.to_data()).unwrap();
        let data: TrajectoryData = serde_json::from_str(&json).unwrap();
        let back = Trajectory::from_data(f, &data).unwrap();
        assert_eq!(back.at(1.234), tr.at(1.234));
        let err = Trajectory::from_data(builtin("saddle"), &data).unwrap_err();
        assert!(matches!(err, FlowError::Corrupt(_)));
        let mut bad = data.clone();
        bad.steps.pop();
        assert!(Trajectory::from_data(builtin("center"), &bad).is_err());
    }
}
