//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runtime limits are part of each criterion.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use minset::certify::{
    classify, crossing_finiteness, divergence_crosscheck, equilibrium_certificate, flux_bound_certificate, BallWindow,
    Classification, ClassifyConfig,
};
use minset::cli::auto_windows;
use minset::construct::{construct_from, recurrence_probe, ConstructionConfig, ConstructionTrace, Status};
use minset::field::Field;
use minset::flow::Trajectory;
use minset::geom::{Circle, ClosedPolyline, Vec2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Van der Pol (mu = 1) period from a Poincare return map on x = 0, y > 0,
/// computed with an adaptive integrator at tol 1e-12 over 40 periods.
const VDP_PERIOD: f64 = 6.6632868593;

type Check = fn() -> Result<String, String>;

fn field(name: &str) -> Field {
    Field::builtin(name, BTreeMap::new()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vdp_seed() -> Vec2 {
    Trajectory::integrate(field("vdp"), Vec2::new(2., 0.), 50.0, 1e-11)
        .unwrap()
        .at(50.0)
}

fn vdp_run(i_max: usize) -> (ConstructionTrace, Trajectory) {
    let cfg = ConstructionConfig {
        i_max,
        ..Default::default()
    };
    construct_from(field("vdp"), vdp_seed(), 1e-11, &cfg).unwrap()
}

fn center_run(i_max: usize) -> (ConstructionTrace, Trajectory) {
    let cfg = ConstructionConfig {
        i_max,
        t_probe: TAU,
        ..Default::default()
    };
    construct_from(field("center"), Vec2::new(1., 0.), 1e-10, &cfg).unwrap()
}

fn star_polygon(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let n = rng.random_range(3..=200usize);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let c = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    angles
        .iter()
        .map(|&a| c + Vec2::from_polar(scale * rng.random_range(0.2..1.0), a))
        .collect()
}

fn c1_zero_normal_integral() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 1000 {
        let pts = star_polygon(&mut rng);
        let Ok(p) = ClosedPolyline::new(pts) else { continue };
        if !p.is_simple() || p.orientation().is_err() {
            continue;
        }
        let n = p.normal_integral().map_err(|e| e.to_string())?;
        worst = worst.max(n.norm() / p.perimeter());
        count += 1;
    }
    ensure(worst <= 1e-12, || format!("max |N|/perimeter = {worst:e}"))?;
    Ok(format!("1000 polygons, max |N|/perimeter = {worst:.2e}"))
}

fn c2_center_closed_forms() -> Result<String, String> {
    let (trace, mut tr) = center_run(5);
    let t0_err = (trace.t0() - 2.0 * 0.3f64.asin()).abs();
    ensure((trace.d - 0.6).abs() < 1e-9, || format!("D = {}", trace.d))?;
    ensure(t0_err < 1e-8, || format!("t0 error {t0_err:e}"))?;
    let Status::Periodic { t_star } = trace.status else {
        return Err(format!("status {:?}", trace.status));
    };
    let p_err = (t_star - TAU).abs();
    ensure(p_err < 1e-6, || format!("period error {p_err:e}"))?;
    let hit = recurrence_probe(&mut tr, Vec2::new(-1., 0.), 0.1, 0.0, 100.0).map_err(|e| e.to_string())?;
    let r_err = (hit.time().ok_or("timeout")? - (PI - 2.0 * 0.05f64.asin())).abs();
    ensure(r_err < 1e-6, || format!("recurrence error {r_err:e}"))?;
    Ok(format!("t0 err {t0_err:.1e}, period err {p_err:.1e}, recurrence err {r_err:.1e}"))
}

fn c3_construction_invariants() -> Result<String, String> {
    let mut curves = 0;
    for (name, (trace, tr)) in [("center", center_run(6)), ("vdp", vdp_run(6))] {
        for (i, &d) in trace.delta.iter().enumerate() {
            ensure(i == 0 || d < trace.d * 0.5f64.powi(i as i32), || format!("{name}: delta_{i} = {d}"))?;
        }
        for (k, &s) in trace.s_meet.iter().enumerate() {
            ensure((0.0..=trace.t0()).contains(&s), || format!("{name}: s_{} = {s}", k + 1))?;
        }
        for (k, c) in trace.curves.iter().enumerate() {
            ensure(c.simple && c.vertices.is_simple(), || format!("{name}: curve {} not simple", k + 1))?;
        }
        let v = trace.violations(&tr);
        ensure(v.is_empty(), || format!("{name}: {v:?}"))?;
        curves += trace.curves.len();
    }
    Ok(format!("{curves} curves checked"))
}

fn c4_flux_bound() -> Result<String, String> {
    let (trace, mut tr) = vdp_run(8);
    let Status::Periodic { t_star } = trace.status else {
        return Err(format!("status {:?}", trace.status));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let windows = auto_windows(&mut tr, &trace, t_star, 20, [0.01, 0.2], &mut rng).map_err(|e| e.to_string())?;
    ensure(windows.len() == 20, || format!("{} windows", windows.len()))?;
    let t_last = *trace.t_hit.last().unwrap();
    let mut worst: f64 = 0.0;
    for w in windows {
        let cc = crossing_finiteness(&mut tr, w.center, w.radius, t_last, 5, &mut rng).map_err(|e| e.to_string())?;
        let bw = BallWindow::for_trace(Circle { radius: cc.radius, ..w }, &trace);
        ensure(bw.separation_ok, || format!("separation fails for {w:?}"))?;
        let rep = flux_bound_certificate(&trace, &tr, &bw).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("window {w:?}: {:?}", rep.measured))?;
        worst = worst.max(rep.measured["max_F"] / rep.measured["bound"]);
    }
    Ok(format!("20 windows x {} stages, max |F|/(2 pi r0) = {worst:.3}", trace.stages()))
}

fn c5_divergence_crosscheck() -> Result<String, String> {
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    let mut check = |trace: &ConstructionTrace, tr: &Trajectory, curve: usize, w: Circle| -> Result<(), String> {
        let bw = BallWindow::for_trace(w, trace);
        let rep = divergence_crosscheck(&trace.curves[curve], &bw, tr, trace.x0, trace.d).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("curve {curve}, window {w:?}: {:?}", rep.measured))?;
        worst = worst.max(rep.measured["diff"] / (1.0 + w.radius));
        pairs += 1;
        Ok(())
    };
    let (trace, tr) = center_run(5);
    for (k, &a) in [2.3, 3.0, PI, 3.7, 4.1].iter().enumerate() {
        let w = Circle::new(Vec2::from_polar(1.0, a), 0.05 + 0.03 * k as f64).unwrap();
        check(&trace, &tr, k % trace.curves.len(), w)?;
    }
    let (trace, mut tr) = vdp_run(8);
    let Status::Periodic { t_star } = trace.status else {
        return Err(format!("status {:?}", trace.status));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let windows = auto_windows(&mut tr, &trace, t_star, 8, [0.02, 0.2], &mut rng).map_err(|e| e.to_string())?;
    for (k, w) in windows.into_iter().enumerate() {
        check(&trace, &tr, k % trace.curves.len(), w)?;
    }
    ensure(pairs >= 10, || format!("only {pairs} pairs"))?;
    Ok(format!("{pairs} pairs, max |LHS-RHS|/(1+r0) = {worst:.2e}"))
}

/// Return-map period with a fixed-step RK4 integrator (independent of the
/// library's adaptive solver): successive upward crossings of x = 0.
fn rk4_return_period() -> f64 {
    let f = |p: [f64; 2]| [p[1], (1.0 - p[0] * p[0]) * p[1] - p[0]];
    let h = 1e-3;
    let mut p = [2.0, 0.0];
    let mut t = 0.0;
    let mut crossings = Vec::new();
    while crossings.len() < 12 {
        let k1 = f(p);
        let k2 = f([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
        let k3 = f([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
        let k4 = f([p[0] + h * k3[0], p[1] + h * k3[1]]);
        let q = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if t > 50.0 && p[0] < 0.0 && q[0] >= 0.0 {
            // cubic Hermite root on [t, t + h]
            let (x0, x1, d0, d1) = (p[0], q[0], k1[0] * h, f(q)[0] * h);
            let herm = |s: f64| {
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * x0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * x1 + (s3 - s2) * d1
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if herm(mid) < 0.0 {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            crossings.push(t + h * 0.5 * (lo + hi));
        }
        p = q;
        t += h;
    }
    (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
}

fn c6_vdp_period() -> Result<String, String> {
    let oracle = rk4_return_period();
    ensure((oracle - VDP_PERIOD).abs() < 1e-6, || format!("oracles disagree: {oracle} vs {VDP_PERIOD}"))?;
    let (trace, _) = vdp_run(8);
    let Status::Periodic { t_star } = trace.status else {
        return Err(format!("status {:?}", trace.status));
    };
    let err = (t_star - VDP_PERIOD).abs();
    ensure(err < 5e-3, || format!("period {t_star}, error {err:e}"))?;
    Ok(format!("period {t_star:.10} (oracle {VDP_PERIOD}, rk4 {oracle:.10}), error {err:.1e}"))
}

fn c7_equilibrium() -> Result<String, String> {
    let cfg = ClassifyConfig::default();
    let res = classify(&field("stable_focus"), Vec2::new(1., 0.), &cfg).map_err(|e| e.to_string())?;
    let Classification::Equilibrium { point, .. } = res.classification else {
        return Err(format!("{:?}", res.classification));
    };
    ensure(point.norm() < 1e-6, || format!("equilibrium at {point:?}"))?;
    let rep = equilibrium_certificate(&field("stable_focus"), point, &[0.1, 0.05, 0.025]).map_err(|e| e.to_string())?;
    ensure(rep.pass, || format!("{:?}", rep.measured))?;
    let (r1, r2) = (rep.measured["ratio_01"], rep.measured["ratio_02"]);
    ensure((r1 - 0.5).abs() <= 0.05 && (r2 - 0.5).abs() <= 0.05, || format!("ratios {r1}, {r2}"))?;
    Ok(format!("equilibrium at ({:.1e}, {:.1e}), min|f| ratios {r1:.4}, {r2:.4}", point.x, point.y))
}

fn c8_crossing_parity() -> Result<String, String> {
    let x0 = vdp_seed();
    let mut tr = Trajectory::integrate(field("vdp"), x0, 10.0 * VDP_PERIOD, 1e-10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut draws, mut perturbed, mut total) = (0, 0, 0);
    while draws < 100 {
        let y0 = tr.at(rng.random_range(0.0..VDP_PERIOD));
        let r0 = rng.random_range(0.01..0.2);
        let t_hi = rng.random_range(VDP_PERIOD..10.0 * VDP_PERIOD);
        if tr.x0().dist(y0) <= 1.1 * r0 || tr.at(t_hi).dist(y0) <= 1.1 * r0 {
            continue;
        }
        let c = crossing_finiteness(&mut tr, y0, r0, t_hi, 5, &mut rng).map_err(|e| e.to_string())?;
        ensure(c.count % 2 == 0, || format!("odd count {} for window {y0:?}, r0 {r0}", c.count))?;
        perturbed += usize::from(c.perturbations > 0);
        total += c.count;
        draws += 1;
    }
    ensure(perturbed <= 2, || format!("{perturbed} draws needed perturbation"))?;
    Ok(format!("100 draws, {total} crossings, {perturbed} perturbed"))
}

fn c9_determinism() -> Result<String, String> {
    let dir = std::env::temp_dir().join(format!("minset-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = dir.join("vdp.json");
    std::fs::write(
        &cfg,
        r#"{"field":{"builtin":"vdp","params":{"mu":1.0}},"x0":[0.1,0.0],"seed":9,
            "windows":{"auto":10,"r_range":[0.01,0.2]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let run = |out: &PathBuf| -> Result<Vec<u8>, String> {
        let st = Command::new(env!("CARGO_BIN_EXE_minset"))
            .args(["classify", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(st.status.code() == Some(0), || format!("exit {:?}", st.status.code()))?;
        std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
    };
    let a = run(&dir.join("a"))?;
    let b = run(&dir.join("b"))?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(a == b, || "reports differ".into())?;
    Ok(format!("two reports of {} bytes are identical", a.len()))
}

fn main() {
    let criteria: [(&str, Check, f64); 9] = [
        ("zero normal integral", c1_zero_normal_integral, 1.0),
        ("center closed forms", c2_center_closed_forms, 5.0),
        ("construction invariants", c3_construction_invariants, 30.0),
        ("flux bound", c4_flux_bound, 60.0),
        ("divergence cross-check", c5_divergence_crosscheck, f64::INFINITY),
        ("van der pol period", c6_vdp_period, f64::INFINITY),
        ("equilibrium certificate", c7_equilibrium, f64::INFINITY),
        ("crossing parity", c8_crossing_parity, f64::INFINITY),
        ("determinism", c9_determinism, f64::INFINITY),
    ];
    let mut failures = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(_) if secs > *limit => Err(format!("took {secs:.2} s, limit {limit} s")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failures += usize::from(outcome.is_err());
        println!("criterion {} ({name}): {tag} [{secs:.2} s] {detail}", k + 1);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
