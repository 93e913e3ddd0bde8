//! Autonomous planar vector fields `dx/dt = f(x)`.
//!
//! A [`Field`] is either one of a handful of builtins (evaluated natively) or
//! a pair of parsed component expressions. Both kinds are immutable after
//! construction and evaluate without side effects.

mod parse;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

pub use parse::{parse_expr, BinOp, EvalError, Expr, Func, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("in fx: {0}")]
    ParseX(ParseError),
    #[error("in fy: {0}")]
    ParseY(ParseError),
    #[error("unknown builtin field `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{builtin}` has no parameter `{param}`")]
    UnknownParameter { builtin: String, param: String },
    #[error("evaluation at ({x}, {y}): {source}")]
    Domain { x: f64, y: f64, source: EvalError },
    #[error("non-finite evaluation point ({x}, {y})")]
    NonFiniteInput { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `(-y, x)`: linear center, unit-speed rotation.
    Center,
    /// Van der Pol `(y, mu (1 - x^2) y - x)`.
    VanDerPol { mu: f64 },
    /// `(-x - y, x - y)`: eigenvalues `-1 +- i`.
    StableFocus,
    /// `(x, -y)`.
    Saddle,
    /// `(y, -x)`: clockwise rotation.
    Harmonic,
}

impl Builtin {
    pub const NAMES: [&'static str; 5] = ["center", "vdp", "stable_focus", "saddle", "harmonic"];

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Center => "center",
            Builtin::VanDerPol { .. } => "vdp",
            Builtin::StableFocus => "stable_focus",
            Builtin::Saddle => "saddle",
            Builtin::Harmonic => "harmonic",
        }
    }

    /// Component sources in the expression grammar, equivalent to the native form.
    pub fn sources(&self) -> (&'static str, &'static str) {
        match self {
            Builtin::Center => ("-y", "x"),
            Builtin::VanDerPol { .. } => ("y", "mu*(1-x^2)*y - x"),
            Builtin::StableFocus => ("-x-y", "x-y"),
            Builtin::Saddle => ("x", "-y"),
            Builtin::Harmonic => ("y", "-x"),
        }
    }

    fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Builtin::Center => (-y, x),
            Builtin::VanDerPol { mu } => (y, mu * (1.0 - x * x) * y - x),
            Builtin::StableFocus => (-x - y, x - y),
            Builtin::Saddle => (x, -y),
            Builtin::Harmonic => (y, -x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Builtin(Builtin),
    Parsed {
        fx: Expr,
        fy: Expr,
        src_x: String,
        src_y: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    name: String,
    kind: Kind,
    params: BTreeMap<String, f64>,
}

impl Field {
    pub fn parse(
        src_x: &str,
        src_y: &str,
        params: BTreeMap<String, f64>,
    ) -> Result<Field, FieldError> {
        let fx = parse_expr(src_x, &params).map_err(FieldError::ParseX)?;
        let fy = parse_expr(src_y, &params).map_err(FieldError::ParseY)?;
        Ok(Field {
            name: "expr".into(),
            kind: Kind::Parsed {
                fx,
                fy,
                src_x: src_x.to_string(),
                src_y: src_y.to_string(),
            },
            params,
        })
    }

    pub fn builtin(name: &str, params: BTreeMap<String, f64>) -> Result<Field, FieldError> {
        let allowed: &[&str] = match name {
            "vdp" => &["mu"],
            n if Builtin::NAMES.contains(&n) => &[],
            other => return Err(FieldError::UnknownBuiltin(other.to_string())),
        };
        if let Some(p) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(FieldError::UnknownParameter {
                builtin: name.to_string(),
                param: p.clone(),
            });
        }
        let b = match name {
            "center" => Builtin::Center,
            "vdp" => Builtin::VanDerPol {
                mu: params.get("mu").copied().unwrap_or(1.0),
            },
            "stable_focus" => Builtin::StableFocus,
            "saddle" => Builtin::Saddle,
            _ => Builtin::Harmonic,
        };
        let mut params = params;
        if let Builtin::VanDerPol { mu } = b {
            params.insert("mu".into(), mu);
        }
        Ok(Field {
            name: name.to_string(),
            kind: Kind::Builtin(b),
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match &self.kind {
            Kind::Builtin(b) => Some(*b),
            Kind::Parsed { .. } => None,
        }
    }

    /// Component sources; builtins report their equivalent expressions.
    pub fn sources(&self) -> (&str, &str) {
        match &self.kind {
            Kind::Builtin(b) => b.sources(),
            Kind::Parsed { src_x, src_y, .. } => (src_x, src_y),
        }
    }

    pub fn eval(&self, p: Vec2) -> Result<Vec2, FieldError> {
        if !p.is_finite() {
            return Err(FieldError::NonFiniteInput { x: p.x, y: p.y });
        }
        let (fx, fy) = match &self.kind {
            Kind::Builtin(b) => b.eval(p.x, p.y),
            Kind::Parsed { fx, fy, .. } => {
                let wrap = |source| FieldError::Domain {
                    x: p.x,
                    y: p.y,
                    source,
                };
                (fx.eval(p.x, p.y).map_err(wrap)?, fy.eval(p.x, p.y).map_err(wrap)?)
            }
        };
        if !(fx.is_finite() && fy.is_finite()) {
            return Err(FieldError::Domain {
                x: p.x,
                y: p.y,
                source: EvalError::NonFinite,
            });
        }
        Ok(Vec2::new(fx, fy))
    }

    /// Canonical text identifying the field and its parameter values.
    pub fn canonical(&self) -> String {
        let mut s = match &self.kind {
            Kind::Builtin(b) => format!("builtin:{}", b.name()),
            Kind::Parsed { fx, fy, .. } => format!("expr:{fx}|{fy}"),
        };
        for (k, v) in &self.params {
            let _ = write!(s, ";{k}={v:?}");
        }
        s
    }

    /// 64-bit FNV-1a of [`Field::canonical`], as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Serializable description of a field, as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FieldSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Expr {
        fx: String,
        fy: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<Field, FieldError> {
        match self {
            FieldSpec::Builtin { builtin, params } => Field::builtin(builtin, params.clone()),
            FieldSpec::Expr { fx, fy, params } => Field::parse(fx, fy, params.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu1() -> BTreeMap<String, f64> {
        BTreeMap::from([("mu".to_string(), 1.0)])
    }

    #[test]
    fn parsed_examples() {
        let center = Field::parse("-y", "x", BTreeMap::new()).unwrap();
        assert_eq!(center.eval(Vec2::new(1., 0.)).unwrap(), Vec2::new(0., 1.));
        assert_eq!(center.eval(Vec2::ZERO).unwrap(), Vec2::new(-0.0, 0.));
        let vdp = Field::parse("y", "mu*(1-x^2)*y - x", mu1()).unwrap();
        assert_eq!(vdp.eval(Vec2::new(2., 1.)).unwrap(), Vec2::new(1., -5.));
        let err = Field::parse("-y + (", "x", BTreeMap::new()).unwrap_err();
        assert!(matches!(err, FieldError::ParseX(ParseError::Syntax { offset: 6, .. })));
    }

    #[test]
    fn builtins() {
        let c = Field::builtin("center", BTreeMap::new()).unwrap();
        assert_eq!(c.eval(Vec2::new(0., 1.)).unwrap(), Vec2::new(-1., 0.));
        let f = Field::builtin("stable_focus", BTreeMap::new()).unwrap();
        assert_eq!(f.eval(Vec2::ZERO).unwrap().norm(), 0.0);
        let v = Field::builtin("vdp", mu1()).unwrap();
        assert_eq!(v.eval(Vec2::new(0., 1.)).unwrap(), Vec2::new(1., 1.));
        assert_eq!(Field::builtin("vdp", BTreeMap::new()).unwrap(), v);
        let s = Field::builtin("saddle", BTreeMap::new()).unwrap();
        assert_eq!(s.eval(Vec2::new(2., 3.)).unwrap(), Vec2::new(2., -3.));
        let h = Field::builtin("harmonic", BTreeMap::new()).unwrap();
        assert_eq!(h.eval(Vec2::new(2., 3.)).unwrap(), Vec2::new(3., -2.));
        assert!(matches!(
            Field::builtin("lorenz", BTreeMap::new()),
            Err(FieldError::UnknownBuiltin(_))
        ));
        assert!(matches!(
            Field::builtin("center", mu1()),
            Err(FieldError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn domain_error_not_nan() {
        let f = Field::parse("sqrt(x)", "y", BTreeMap::new()).unwrap();
        assert!(matches!(
            f.eval(Vec2::new(-1., 0.)),
            Err(FieldError::Domain {
                source: EvalError::SqrtOfNegative(_),
                ..
            })
        ));
        assert!(matches!(
            f.eval(Vec2::new(f64::NAN, 0.)),
            Err(FieldError::NonFiniteInput { .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let a = Field::builtin("vdp", mu1()).unwrap();
        let b = Field::builtin("vdp", BTreeMap::from([("mu".to_string(), 2.0)])).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), Field::builtin("vdp", mu1()).unwrap().fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn spec_deserializes_both_forms() {
        let b: FieldSpec = serde_json::from_str(r#"{"builtin":"vdp","params":{"mu":1.0}}"#).unwrap();
        assert_eq!(b.build().unwrap().name(), "vdp");
        let e: FieldSpec = serde_json::from_str(r#"{"fx":"-y","fy":"x"}"#).unwrap();
        assert_eq!(e.build().unwrap().eval(Vec2::new(1., 0.)).unwrap(), Vec2::new(0., 1.));
    }
}
