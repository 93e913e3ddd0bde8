//! Numerical certificates for the integral identities behind the
//! classification of planar minimal sets, and the classifier itself.
//!
//! Each certificate yields a [`CertificateReport`] with the measured values,
//! the tolerance they were held to, and enough context to reproduce them.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::construct::{run_construction, ConstructError, ConstructionConfig, ConstructionTrace, JordanCurve, Status};
use crate::field::{Field, FieldError};
use crate::flow::{displacement_sum, residence, residence_between, FlowError, ResidenceIntervals, Trajectory};
use crate::geom::{arc_normal_integral, rotate_quarter, segment_circle_hits, Circle, GeomError, Location, Vec2};

/// Additive slack on the `2 pi r0` flux bound.
pub const FLUX_TOL: f64 = 1e-6;
/// Relative tolerance (scaled by `1 + r0`) of the divergence cross-check.
pub const CROSSCHECK_TOL: f64 = 1e-5;
/// Largest relative radius perturbation when a window grazes the trajectory.
pub const PERTURB_REL: f64 = 0.05;
/// Sample count in the disc for the equilibrium certificate.
pub const DISC_SAMPLES: usize = 256;
/// Extra samples on the boundary circle for the equilibrium certificate.
pub const RING_SAMPLES: usize = 64;
/// Allowed relative deviation of the min |f| ratio from the radius ratio.
pub const TREND_TOL: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("window grazes the trajectory at t = {times:?}; re-draw the radius")]
    GrazingUnresolved { times: Vec<f64> },
    #[error("window violates separation: |y0 - x0| = {distance} (needs > {min_distance}), r0 = {r0} (needs < {d})")]
    SeparationViolated {
        distance: f64,
        min_distance: f64,
        r0: f64,
        d: f64,
    },
    #[error("arc midpoint at angle {angle} is within the boundary band; refine the curve sampling")]
    AmbiguousArc { angle: f64 },
    #[error("window still grazes after {retries} radius perturbations")]
    RetriesExhausted { retries: usize },
    #[error("radii must be positive and strictly decreasing")]
    InvalidRadii,
}

/// Ball `B(y0, r0)` away from the construction's start point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallWindow {
    pub circle: Circle,
    /// `|y0 - x*(0)| > 2 D` and `r0 < D`.
    pub separation_ok: bool,
}

impl BallWindow {
    pub fn new(circle: Circle, x0: Vec2, d: f64) -> Self {
        let separation_ok = circle.center.dist(x0) > 2.0 * d && circle.radius < d;
        Self { circle, separation_ok }
    }

    pub fn for_trace(circle: Circle, trace: &ConstructionTrace) -> Self {
        Self::new(circle, trace.x0, trace.d)
    }

    fn require_separation(&self, x0: Vec2, d: f64) -> Result<(), CertifyError> {
        if self.separation_ok {
            return Ok(());
        }
        Err(CertifyError::SeparationViolated {
            distance: self.circle.center.dist(x0),
            min_distance: 2.0 * d,
            r0: self.circle.radius,
            d,
        })
    }

    fn context(&self) -> Value {
        json!({ "center": self.circle.center, "radius": self.circle.radius })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    NormalIntegral,
    CrossingFiniteness,
    FluxBound,
    DivergenceCrosscheck,
    Equilibrium,
    Classification,
    ResidenceGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub context: BTreeMap<String, Value>,
}

impl CertificateReport {
    fn new(kind: CertificateKind, tolerance: f64) -> Self {
        Self {
            kind,
            pass: true,
            measured: BTreeMap::new(),
            tolerance,
            context: BTreeMap::new(),
        }
    }

    fn measure(&mut self, key: impl Into<String>, v: f64) {
        self.measured.insert(key.into(), v);
    }

    fn note(&mut self, key: &str, v: Value) {
        self.context.insert(key.to_string(), v);
    }
}

fn field_context(f: &Field) -> Value {
    json!({ "name": f.name(), "fingerprint": f.fingerprint() })
}

fn check_grazing(res: &ResidenceIntervals) -> Result<(), CertifyError> {
    if res.has_grazing() {
        return Err(CertifyError::GrazingUnresolved {
            times: res.grazes.clone(),
        });
    }
    Ok(())
}

/// `|sum of normals|` over a curve, which must vanish for a closed polyline.
pub fn normal_integral_certificate(curve: &JordanCurve, stage: usize) -> Result<CertificateReport, CertifyError> {
    let p = curve.ccw();
    let perimeter = p.perimeter();
    let n = p.normal_integral()?;
    let mut r = CertificateReport::new(CertificateKind::NormalIntegral, 1e-12);
    r.measure("norm", n.norm());
    r.measure("perimeter", perimeter);
    r.pass = n.norm() <= 1e-12 * perimeter;
    r.note("stage", json!(stage));
    r.note("vertices", json!(p.len()));
    Ok(r)
}

/// Integral of `f(x*(t))` over `{t <= t_hi : x*(t) in B}`, evaluated as the
/// sum of exit-minus-entry displacements.
pub fn flux_integral(traj: &Trajectory, w: &BallWindow, t_hi: f64) -> Result<Vec2, CertifyError> {
    let res = residence(traj, &w.circle, t_hi)?;
    check_grazing(&res)?;
    Ok(displacement_sum(traj, &res))
}

/// Checks `|F_i| <= 2 pi r0` for every stage `i` of the trace.
pub fn flux_bound_certificate(
    trace: &ConstructionTrace,
    traj: &Trajectory,
    w: &BallWindow,
) -> Result<CertificateReport, CertifyError> {
    w.require_separation(trace.x0, trace.d)?;
    let r0 = w.circle.radius;
    let bound = TAU * r0;
    let mut r = CertificateReport::new(CertificateKind::FluxBound, FLUX_TOL);
    let mut worst: f64 = 0.0;
    for (i, &t_i) in trace.t_hit.iter().enumerate().skip(1) {
        let f = flux_integral(traj, w, t_i)?.norm();
        r.measure(format!("F_{i:02}"), f);
        worst = worst.max(f);
    }
    r.measure("bound", bound);
    r.measure("max_F", worst);
    r.pass = worst <= bound + FLUX_TOL;
    r.note("window", w.context());
    r.note("stage_count", json!(trace.stages()));
    r.note("x0", json!(trace.x0));
    r.note("field", field_context(traj.field()));
    Ok(r)
}

/// Compares the trajectory side of `curve` inside the window, rotated into
/// outward normals, with the arc side of the window inside the curve.
pub fn divergence_crosscheck(
    curve: &JordanCurve,
    w: &BallWindow,
    traj: &Trajectory,
    x0: Vec2,
    d: f64,
) -> Result<CertificateReport, CertifyError> {
    divergence_crosscheck_with_band(curve, w, traj, x0, d, curve.vertices.default_band())
}

/// [`divergence_crosscheck`] with an explicit point-location boundary band.
pub fn divergence_crosscheck_with_band(
    curve: &JordanCurve,
    w: &BallWindow,
    traj: &Trajectory,
    x0: Vec2,
    d: f64,
    band: f64,
) -> Result<CertificateReport, CertifyError> {
    w.require_separation(x0, d)?;
    let c = w.circle;

    // trajectory side: rotated displacement sum over [s, t]
    let res = residence_between(traj, &c, curve.s, curve.t)?;
    check_grazing(&res)?;
    let lhs = rotate_quarter(displacement_sum(traj, &res), curve.orientation.reversed());

    // arc side: circle pieces of the window lying inside the polyline
    let poly = &curve.vertices;
    let mut angles = Vec::new();
    for (a, b) in poly.edges() {
        let hits = segment_circle_hits(a, b, &c)?;
        if hits.tangent {
            return Err(CertifyError::AmbiguousArc {
                angle: c.angle_of(a.lerp(b, hits.params.first().copied().unwrap_or(0.5))),
            });
        }
        angles.extend(hits.params.iter().map(|&s| c.angle_of(a.lerp(b, s))));
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);
    let mut rhs = Vec2::ZERO;
    let mut inside_arcs = 0usize;
    if !angles.is_empty() {
        let n = angles.len();
        for k in 0..n {
            let th1 = angles[k];
            let th2 = if k + 1 < n { angles[k + 1] } else { angles[0] + TAU };
            let mid = 0.5 * (th1 + th2);
            match poly.locate_with_band(c.point_at(mid), band) {
                Location::Boundary => return Err(CertifyError::AmbiguousArc { angle: mid }),
                Location::Inside => {
                    rhs -= arc_normal_integral(&c, th1, th2)?;
                    inside_arcs += 1;
                }
                Location::Outside => {}
            }
        }
    }

    let r0 = c.radius;
    let tol = CROSSCHECK_TOL * (1.0 + r0);
    let diff = (lhs - rhs).norm();
    let mut r = CertificateReport::new(CertificateKind::DivergenceCrosscheck, tol);
    r.measure("lhs_x", lhs.x);
    r.measure("lhs_y", lhs.y);
    r.measure("rhs_x", rhs.x);
    r.measure("rhs_y", rhs.y);
    r.measure("diff", diff);
    r.measure("crossings", angles.len() as f64);
    r.measure("inside_arcs", inside_arcs as f64);
    r.measure("visits", res.intervals.len() as f64);
    r.pass = diff <= tol;
    r.note("window", w.context());
    r.note("curve", json!({ "s": curve.s, "t": curve.t, "orientation": curve.orientation }));
    r.note("field", field_context(traj.field()));
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingCount {
    pub count: usize,
    /// Radius actually used after any perturbations.
    pub radius: f64,
    pub perturbations: usize,
}

/// Counts crossings of `|x*(t) - y0| = r0` on `[0, t_hi]`, re-drawing the
/// radius within `+-5%` of `r0` while the window grazes the trajectory.
pub fn crossing_finiteness<R: Rng + ?Sized>(
    traj: &mut Trajectory,
    y0: Vec2,
    r0: f64,
    t_hi: f64,
    retries: usize,
    rng: &mut R,
) -> Result<CrossingCount, CertifyError> {
    traj.ensure(t_hi)?;
    let mut radius = r0;
    for attempt in 0..=retries {
        let res = residence(traj, &Circle::new(y0, radius)?, t_hi)?;
        if !res.has_grazing() {
            return Ok(CrossingCount {
                count: res.crossing_count(),
                radius,
                perturbations: attempt,
            });
        }
        radius = r0 * (1.0 + rng.random_range(-PERTURB_REL..PERTURB_REL));
    }
    Err(CertifyError::RetriesExhausted { retries })
}

/// [`crossing_finiteness`] wrapped as a report; passes when the count is even
/// for a window the trajectory starts outside of.
pub fn crossing_certificate<R: Rng + ?Sized>(
    traj: &mut Trajectory,
    w: &BallWindow,
    t_hi: f64,
    retries: usize,
    rng: &mut R,
) -> Result<CertificateReport, CertifyError> {
    let c = crossing_finiteness(traj, w.circle.center, w.circle.radius, t_hi, retries, rng)?;
    let starts_inside = traj.x0().dist(w.circle.center) < c.radius;
    let ends_inside = traj.at(t_hi).dist(w.circle.center) < c.radius;
    let mut r = CertificateReport::new(CertificateKind::CrossingFiniteness, 0.0);
    r.measure("count", c.count as f64);
    r.measure("radius", c.radius);
    r.measure("perturbations", c.perturbations as f64);
    r.pass = (c.count % 2 == 0) == (starts_inside == ends_inside);
    r.note("window", w.context());
    r.note("t_hi", json!(t_hi));
    Ok(r)
}

/// Total residence time in the window at each horizon; passes when it grows
/// linearly (within 25% of the mean rate) and is positive.
pub fn residence_growth(traj: &Trajectory, w: &BallWindow, horizons: &[f64]) -> Result<CertificateReport, CertifyError> {
    let mut r = CertificateReport::new(CertificateKind::ResidenceGrowth, 0.25);
    let mut rates = Vec::with_capacity(horizons.len());
    for (k, &h) in horizons.iter().enumerate() {
        let res = residence(traj, &w.circle, h)?;
        check_grazing(&res)?;
        let m = res.measure();
        r.measure(format!("measure_{k:02}"), m);
        rates.push(m / h);
    }
    let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    r.measure("mean_rate", mean);
    r.pass = mean > 0.0 && rates.iter().all(|q| (q - mean).abs() <= 0.25 * mean);
    r.note("window", w.context());
    r.note("horizons", json!(horizons));
    Ok(r)
}

/// Deterministic sample set of the closed disc: a sunflower spiral plus a
/// ring on the boundary circle. The center itself is not sampled.
pub fn disc_samples(center: Vec2, r: f64) -> Vec<Vec2> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let n = DISC_SAMPLES as f64;
    let mut pts: Vec<Vec2> = (0..DISC_SAMPLES)
        .map(|k| center + Vec2::from_polar(r * ((k as f64 + 0.5) / n).sqrt(), k as f64 * golden))
        .collect();
    pts.extend((0..RING_SAMPLES).map(|k| center + Vec2::from_polar(r, TAU * k as f64 / RING_SAMPLES as f64)));
    pts
}

/// Whether the origin lies in the closed convex hull of `vs`: no open
/// half-plane through the origin contains them all.
pub fn hull_contains_origin(vs: &[Vec2]) -> bool {
    if vs.contains(&Vec2::ZERO) {
        return true;
    }
    let mut dirs: Vec<(f64, Vec2)> = vs.iter().map(|v| (v.angle(), *v)).collect();
    dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = dirs.len();
    if n < 2 {
        return false;
    }
    // contained iff no angular gap between consecutive directions exceeds pi;
    // gaps within rounding of pi are decided by the exact orientation sign
    for k in 0..n {
        let (ta, a) = dirs[k];
        let (tb, b) = dirs[(k + 1) % n];
        let gap = if k + 1 < n { tb - ta } else { tb + TAU - ta };
        if gap > PI + 1e-9 || ((gap - PI).abs() <= 1e-9 && a.cross(b) < 0.0) {
            return false;
        }
    }
    true
}

/// Tests whether 0 lies in the hull of sampled `f` over each closed disc
/// `B(y0, r)` and whether `min |f|` shrinks in proportion to `r`.
pub fn equilibrium_certificate(f: &Field, y0: Vec2, radii: &[f64]) -> Result<CertificateReport, CertifyError> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CertifyError::InvalidRadii);
    }
    let mut r = CertificateReport::new(CertificateKind::Equilibrium, TREND_TOL);
    let mut all_contained = true;
    let mut minima = Vec::with_capacity(radii.len());
    for (k, &rad) in radii.iter().enumerate() {
        let vals = disc_samples(y0, rad)
            .into_iter()
            .map(|p| f.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        let contained = hull_contains_origin(&vals);
        let m = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        all_contained &= contained;
        minima.push(m);
        r.measure(format!("radius_{k:02}"), rad);
        r.measure(format!("contained_{k:02}"), if contained { 1.0 } else { 0.0 });
        r.measure(format!("min_abs_f_{k:02}"), m);
    }
    let mut trend_ok = true;
    for k in 1..radii.len() {
        let ratio = minima[k] / minima[k - 1];
        let expect = radii[k] / radii[k - 1];
        r.measure(format!("ratio_{k:02}"), ratio);
        trend_ok &= ratio.is_finite() && (ratio - expect).abs() <= TREND_TOL * expect;
    }
    r.pass = all_contained && trend_ok;
    r.note("y0", json!(y0));
    r.note("field", field_context(f));
    r.note("samples_per_radius", json!(DISC_SAMPLES + RING_SAMPLES));
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub tol: f64,
    pub tol_eq: f64,
    pub t_pre: f64,
    pub radii: Vec<f64>,
    pub construction: ConstructionConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            tol_eq: 1e-9,
            t_pre: 50.0,
            radii: vec![0.1, 0.05, 0.025],
            construction: ConstructionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Equilibrium {
        point: Vec2,
        /// `direct` when `f(x0)` vanishes, `tail` when found along the trajectory.
        via: String,
    },
    PeriodicOrbit {
        period: f64,
        /// Index into the trace's curves of the closing Jordan curve.
        curve: usize,
    },
    Undecided {
        diagnostics: Vec<String>,
    },
}

#[derive(Debug, Clone)]
pub struct Classified {
    pub classification: Classification,
    /// Start point of the construction after the transient.
    pub seed_point: Vec2,
    pub trace: Option<ConstructionTrace>,
    pub trajectory: Option<Trajectory>,
    pub certificates: Vec<CertificateReport>,
}

fn tail_minimizer(f: &Field, trajs: &[&Trajectory]) -> Option<Vec2> {
    let mut best: Option<(f64, Vec2)> = None;
    for tr in trajs {
        let lo = tr.t_end() / 2.0;
        for t in tr.sample_times(lo, tr.t_end(), f64::INFINITY, 4) {
            let p = tr.at(t);
            if let Ok(v) = f.eval(p) {
                let n = v.norm();
                if best.is_none_or(|(b, _)| n < b) {
                    best = Some((n, p));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Classifies the minimal set reached from `x0` as an equilibrium or a
/// periodic orbit; numerical failures produce `Undecided`.
pub fn classify(f: &Field, x0: Vec2, cfg: &ClassifyConfig) -> Result<Classified, CertifyError> {
    cfg.construction.validate()?;
    let mut out = Classified {
        classification: Classification::Undecided { diagnostics: Vec::new() },
        seed_point: x0,
        trace: None,
        trajectory: None,
        certificates: Vec::new(),
    };
    let mut diagnostics = Vec::new();

    // (a) direct zero of the field
    let f0 = f.eval(x0)?;
    if f0.norm() <= cfg.tol_eq {
        out.certificates.push(equilibrium_certificate(f, x0, &cfg.radii)?);
        out.classification = Classification::Equilibrium {
            point: x0,
            via: "direct".into(),
        };
        return Ok(out);
    }

    // (b) transient, then construction from the seed
    let pre = match Trajectory::integrate(f.clone(), x0, cfg.t_pre, cfg.tol) {
        Ok(t) => t,
        Err(e) => {
            diagnostics.push(format!("transient: {e}"));
            out.classification = Classification::Undecided { diagnostics };
            return Ok(out);
        }
    };
    let seed = pre.at(cfg.t_pre);
    out.seed_point = seed;
    let mut try_tail = false;
    match Trajectory::integrate(f.clone(), seed, cfg.construction.t_probe, cfg.tol) {
        Err(e) => diagnostics.push(format!("integration from seed: {e}")),
        Ok(mut traj) => {
            match run_construction(&mut traj, &cfg.construction) {
                Ok(trace) => {
                    match trace.status {
                        Status::Periodic { t_star } => {
                            out.classification = Classification::PeriodicOrbit {
                                period: t_star,
                                curve: trace.curves.len() - 1,
                            };
                        }
                        Status::NotRecurrent => {
                            diagnostics.push("construction: not recurrent".into());
                            try_tail = true;
                        }
                        s => diagnostics.push(format!("construction ended with status {s:?}")),
                    }
                    out.trace = Some(trace);
                }
                Err(ConstructError::SingletonSuspected { max_distance }) => {
                    diagnostics.push(format!("construction: trajectory stays within {max_distance:e}"));
                    try_tail = true;
                }
                Err(e) => diagnostics.push(format!("construction: {e}")),
            }
            out.trajectory = Some(traj);
        }
    }
    if matches!(out.classification, Classification::PeriodicOrbit { .. }) {
        return Ok(out);
    }

    // (c) equilibrium certificate at the slowest point of the tail
    if try_tail {
        let mut trajs = vec![&pre];
        if let Some(t) = &out.trajectory {
            trajs.push(t);
        }
        if let Some(y) = tail_minimizer(f, &trajs) {
            let cert = equilibrium_certificate(f, y, &cfg.radii)?;
            let pass = cert.pass;
            out.certificates.push(cert);
            if pass {
                out.classification = Classification::Equilibrium {
                    point: y,
                    via: "tail".into(),
                };
                return Ok(out);
            }
            diagnostics.push(format!("equilibrium certificate failed at ({}, {})", y.x, y.y));
        }
    }

    // (d)
    out.classification = Classification::Undecided { diagnostics };
    Ok(out)
}

/// Summary report of a classification.
pub fn classification_certificate(f: &Field, x0: Vec2, c: &Classified) -> CertificateReport {
    let mut r = CertificateReport::new(CertificateKind::Classification, 0.0);
    r.pass = !matches!(c.classification, Classification::Undecided { .. });
    match &c.classification {
        Classification::Equilibrium { point, .. } => {
            r.measure("x", point.x);
            r.measure("y", point.y);
        }
        Classification::PeriodicOrbit { period, .. } => r.measure("period", *period),
        Classification::Undecided { .. } => {}
    }
    r.note("field", field_context(f));
    r.note("x0", json!(x0));
    r.note("seed_point", json!(c.seed_point));
    r.note("result", serde_json::to_value(&c.classification).unwrap_or(Value::Null));
    if let Some(t) = &c.trace {
        r.note("stage_count", json!(t.stages()));
    }
    r
}
