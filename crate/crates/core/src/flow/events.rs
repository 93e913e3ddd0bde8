//! Circle events along a trajectory: hitting times and ball residence.
//!
//! The signed gap `g(t) = |x*(t) - c| - r` is sampled on the dense output at
//! no more than 1/8 of each step, and finer when a step covers more than
//! `r / 8` of arc length. Sign changes are refined with Brent's method. A
//! sampled local extremum on one side of the circle is refined by golden
//! section: if it crosses over, a short excursion between samples has been
//! found; if it ends within the grazing band, the contact is reported as a
//! grazing (double-root) event.

use crate::geom::{Circle, Vec2};

use super::{FlowError, Trajectory};

/// Relative time tolerance for root refinement.
pub const TIME_TOL_REL: f64 = 1e-12;

const SAMPLES_PER_STEP: usize = 8;
const MAX_SAMPLES_PER_STEP: usize = 1 << 16;

pub fn time_tol(t: f64) -> f64 {
    TIME_TOL_REL * t.abs().max(1.0)
}

/// Width of the band around the circle inside which a tangential approach
/// counts as grazing.
pub fn graze_tol(traj: &Trajectory, c: &Circle) -> f64 {
    (1e-10 * c.radius).max(100.0 * traj.tol())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Crossing { t: f64, entering: bool },
    /// Tangential contact; `gap` is the refined extremum of `g`.
    Graze { t: f64, gap: f64 },
}

impl Event {
    pub fn t(&self) -> f64 {
        match *self {
            Event::Crossing { t, .. } | Event::Graze { t, .. } => t,
        }
    }
}

/// Brent's root finder on a bracket with `ga * gb <= 0`.
pub fn brent<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * time_tol(b);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
    }
    b
}

/// Golden-section minimization of `g` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..120 {
        if b - a <= time_tol(b) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn gap(traj: &Trajectory, c: &Circle, t: f64) -> f64 {
    traj.at(t).dist(c.center) - c.radius
}

/// Incremental scan of `g` over consecutive time ranges.
struct Scanner {
    circle: Circle,
    graze: f64,
    prev2: Option<(f64, f64)>,
    prev: Option<(f64, f64)>,
    /// Upper bracket end of the latest crossing, to catch near-double roots
    /// split across adjacent sample intervals.
    last_cross_hi: Option<f64>,
}

impl Scanner {
    fn new(traj: &Trajectory, circle: Circle) -> Self {
        Self {
            circle,
            graze: graze_tol(traj, &circle),
            prev2: None,
            prev: None,
            last_cross_hi: None,
        }
    }

    fn feed(&mut self, traj: &Trajectory, a: f64, b: f64, out: &mut Vec<Event>) {
        if self.prev.is_none() {
            self.push(traj, a, out);
        }
        if b <= a || traj.step_count() == 0 {
            return;
        }
        let c = self.circle;
        for i in traj.step_index(a)..=traj.step_index(b) {
            let (t0, t1) = traj.step_span(i);
            let k0 = traj.knots()[i];
            let k1 = traj.knots()[i + 1];
            let reach = 2.0 * (t1 - t0) * k0.dx.norm().max(k1.dx.norm()) + self.graze;
            let d0 = k0.x.dist(c.center) - c.radius;
            let d1 = k1.x.dist(c.center) - c.radius;
            let far = (d0 > reach && d1 > reach) || (d0 < -reach && d1 < -reach);
            let n = if far {
                1
            } else {
                let arc = 1.25 * (t1 - t0) * k0.dx.norm().max(k1.dx.norm());
                ((8.0 * arc / c.radius).ceil() as usize).clamp(SAMPLES_PER_STEP, MAX_SAMPLES_PER_STEP)
            };
            for k in 1..=n {
                let t = if k == n {
                    t1
                } else {
                    t0 + (t1 - t0) * (k as f64 / n as f64)
                };
                if t > a && t < b {
                    self.push(traj, t, out);
                }
            }
        }
        self.push(traj, b, out);
    }

    fn push(&mut self, traj: &Trajectory, t: f64, out: &mut Vec<Event>) {
        if let Some((tp, _)) = self.prev {
            if t <= tp {
                return;
            }
        }
        let c = self.circle;
        let g = gap(traj, &c, t);
        let inside = |v: f64| v < 0.0;
        let gfun = |s: f64| gap(traj, &c, s);
        if let Some((t1, g1)) = self.prev {
            if inside(g1) != inside(g) {
                let root = brent(gfun, t1, t, g1, g);
                if self.last_cross_hi == Some(t1) && g1.abs() <= self.graze {
                    out.push(Event::Graze { t: t1, gap: g1 });
                }
                out.push(Event::Crossing {
                    t: root,
                    entering: inside(g),
                });
                self.last_cross_hi = Some(t);
            } else if let Some((t0, g0)) = self.prev2 {
                if !inside(g1) && g1 < g0 && g1 <= g {
                    let (tm, gm) = golden_min(gfun, t0, t);
                    if gm.abs() <= self.graze {
                        out.push(Event::Graze { t: tm, gap: gm });
                    } else if gm < 0.0 {
                        let enter = brent(gfun, t0, tm, g0, gm);
                        let exit = brent(gfun, tm, t, gm, g);
                        out.push(Event::Crossing { t: enter, entering: true });
                        out.push(Event::Crossing { t: exit, entering: false });
                        self.last_cross_hi = Some(t);
                    }
                } else if inside(g1) && g1 > g0 && g1 >= g {
                    let (tm, neg) = golden_min(|s| -gfun(s), t0, t);
                    let gm = -neg;
                    if gm.abs() <= self.graze {
                        out.push(Event::Graze { t: tm, gap: gm });
                    } else if gm >= 0.0 {
                        let exit = brent(gfun, t0, tm, g0, gm);
                        let enter = brent(gfun, tm, t, gm, g);
                        out.push(Event::Crossing { t: exit, entering: false });
                        out.push(Event::Crossing { t: enter, entering: true });
                        self.last_cross_hi = Some(t);
                    }
                }
            }
        }
        self.prev2 = self.prev;
        self.prev = Some((t, g));
    }
}

/// All crossing and grazing events of `c` on `[a, b]`, in time order.
pub fn circle_events(traj: &Trajectory, c: &Circle, a: f64, b: f64) -> Result<Vec<Event>, FlowError> {
    if b > traj.t_end() {
        return Err(FlowError::BeyondHorizon {
            t: b,
            t_end: traj.t_end(),
        });
    }
    let mut out = Vec::new();
    let mut sc = Scanner::new(traj, *c);
    sc.feed(traj, a, b, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hit {
    At(f64),
    Timeout,
}

impl Hit {
    pub fn time(self) -> Option<f64> {
        match self {
            Hit::At(t) => Some(t),
            Hit::Timeout => None,
        }
    }
}

/// Smallest `t > t_after` with `|x*(t) - c.center| = c.radius`, extending
/// the trajectory as needed up to `t_max`.
pub fn first_circle_hit(
    traj: &mut Trajectory,
    c: &Circle,
    t_after: f64,
    t_max: f64,
) -> Result<Hit, FlowError> {
    traj.ensure(t_after)?;
    let g0 = gap(traj, c, t_after);
    if g0.abs() <= graze_tol(traj, c) {
        return Err(FlowError::OnBoundary { t: t_after, gap: g0 });
    }
    let mut sc = Scanner::new(traj, *c);
    let mut out = Vec::new();
    let mut from = t_after;
    loop {
        let to = traj.t_end().min(t_max);
        sc.feed(traj, from, to.max(from), &mut out);
        if let Some(e) = out.iter().find(|e| e.t() > t_after) {
            return Ok(Hit::At(e.t()));
        }
        if to >= t_max {
            return Ok(Hit::Timeout);
        }
        from = to;
        let span = (traj.t_end() - t_after).max(1.0);
        traj.ensure((traj.t_end() + span).min(t_max))?;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidenceInterval {
    pub enter: f64,
    pub exit: f64,
    /// The interval starts at the scan start rather than at a crossing.
    pub enter_truncated: bool,
    /// The interval ends at the scan horizon rather than at a crossing.
    pub exit_truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidenceIntervals {
    pub window: Circle,
    pub t_hi: f64,
    pub intervals: Vec<ResidenceInterval>,
    /// Times of grazing contacts; non-empty means the radius should be re-drawn.
    pub grazes: Vec<f64>,
}

impl ResidenceIntervals {
    /// Number of root-refined boundary crossings.
    pub fn crossing_count(&self) -> usize {
        self.intervals
            .iter()
            .map(|iv| usize::from(!iv.enter_truncated) + usize::from(!iv.exit_truncated))
            .sum()
    }

    /// Total time spent inside the window.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.exit - iv.enter).sum()
    }

    pub fn has_grazing(&self) -> bool {
        !self.grazes.is_empty()
    }
}

/// Maximal intervals of `{t <= t_hi : x*(t) in B}` for the open ball of `c`.
pub fn residence(traj: &Trajectory, c: &Circle, t_hi: f64) -> Result<ResidenceIntervals, FlowError> {
    residence_between(traj, c, 0.0, t_hi)
}

/// Residence restricted to `[t_lo, t_hi]`.
pub fn residence_between(
    traj: &Trajectory,
    c: &Circle,
    t_lo: f64,
    t_hi: f64,
) -> Result<ResidenceIntervals, FlowError> {
    let events = circle_events(traj, c, t_lo, t_hi)?;
    let g0 = gap(traj, c, t_lo);
    let mut grazes = Vec::new();
    if g0.abs() <= graze_tol(traj, c) {
        grazes.push(t_lo);
    }
    let mut intervals = Vec::new();
    let mut open = if g0 < 0.0 { Some((t_lo, true)) } else { None };
    for e in events {
        match e {
            Event::Graze { t, .. } => grazes.push(t),
            Event::Crossing { t, entering: true } => open = Some((t, false)),
            Event::Crossing { t, entering: false } => {
                if let Some((enter, enter_truncated)) = open.take() {
                    intervals.push(ResidenceInterval {
                        enter,
                        exit: t,
                        enter_truncated,
                        exit_truncated: false,
                    });
                }
            }
        }
    }
    if let Some((enter, enter_truncated)) = open {
        intervals.push(ResidenceInterval {
            enter,
            exit: t_hi,
            enter_truncated,
            exit_truncated: true,
        });
    }
    Ok(ResidenceIntervals {
        window: *c,
        t_hi,
        intervals,
        grazes,
    })
}

/// Displacement `x*(exit) - x*(enter)` summed over residence intervals.
pub fn displacement_sum(traj: &Trajectory, res: &ResidenceIntervals) -> Vec2 {
    res.intervals
        .iter()
        .map(|iv| traj.at(iv.exit) - traj.at(iv.enter))
        .sum()
}
