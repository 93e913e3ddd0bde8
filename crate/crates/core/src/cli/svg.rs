//! Phase-portrait SVG with separate groups for the trajectory, the
//! shrinking balls and the windows.

use std::fmt::Write as _;

use crate::geom::{Circle, Vec2};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 0.05;

pub struct PhasePortrait<'a> {
    pub trajectory: &'a [Vec2],
    pub balls: &'a [Circle],
    pub windows: &'a [Circle],
}

/// Axis-aligned bounds of the trajectory, padded by 5% per side.
pub fn bounds(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.is_finite() {
        return (Vec2::new(-1., -1.), Vec2::new(1., 1.));
    }
    let pad = Vec2::new(
        ((hi.x - lo.x) * MARGIN).max(1e-3),
        ((hi.y - lo.y) * MARGIN).max(1e-3),
    );
    (lo - pad, hi + pad)
}

impl PhasePortrait<'_> {
    /// Renders in data coordinates (y flipped so it points up).
    pub fn render(&self) -> String {
        let (lo, hi) = bounds(self.trajectory);
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        let stroke = w.max(h) / 800.0;
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{:.0}" viewBox="{} {} {} {}">"#,
            SIZE * h / w,
            lo.x,
            -hi.y,
            w,
            h
        );
        let _ = writeln!(s, r#"<g transform="scale(1,-1)">"#);

        let _ = writeln!(s, r##"<g id="trajectory" fill="none" stroke="#1f4e99" stroke-width="{stroke}">"##);
        if !self.trajectory.is_empty() {
            s.push_str("<polyline points=\"");
            for (k, p) in self.trajectory.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:.6},{:.6}", p.x, p.y);
            }
            s.push_str("\"/>\n");
        }
        s.push_str("</g>\n");

        for (id, circles, color) in [("balls", self.balls, "#c0392b"), ("windows", self.windows, "#27ae60")] {
            let _ = writeln!(
                s,
                r#"<g id="{id}" fill="none" stroke="{color}" stroke-width="{stroke}" stroke-dasharray="{} {}">"#,
                4.0 * stroke,
                2.0 * stroke
            );
            for c in circles {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.6}" cy="{:.6}" r="{:.6}"/>"#,
                    c.center.x, c.center.y, c.radius
                );
            }
            s.push_str("</g>\n");
        }
        s.push_str("</g>\n</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_present_and_balanced() {
        let pts = [Vec2::new(0., 0.), Vec2::new(1., 1.)];
        let c = [Circle::new(Vec2::ZERO, 0.5).unwrap()];
        let svg = PhasePortrait {
            trajectory: &pts,
            balls: &c,
            windows: &[],
        }
        .render();
        for id in ["trajectory", "balls", "windows"] {
            assert!(svg.contains(&format!("id=\"{id}\"")));
        }
        assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());
    }
}
