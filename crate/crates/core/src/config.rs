//! JSON model configuration and the bundled example models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::range::SupMode;
use crate::expr::{parse, Expr};
use crate::model::{Activation, CnnModel, Estimation};
use crate::timescale::TimeScale;
use crate::wpap::{Thresholds, Weight};

pub const EXAMPLE1: &str = include_str!("../data/example1.json");
pub const EXAMPLE2: &str = include_str!("../data/example2.json");
pub const EXAMPLE31: &str = include_str!("../data/example31.json");

/// Names accepted after `builtin:`.
pub const BUILTINS: [&str; 3] = ["example1", "example2", "example31"];

pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        "example31" => Some(EXAMPLE31),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    pub expr: String,
    pub lipschitz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
}

fn d_h_grid() -> f64 {
    0.01
}
fn d_window() -> [f64; 2] {
    [-100.0, 100.0]
}
fn d_tail_tol() -> f64 {
    1e-8
}
fn d_fp_tol() -> f64 {
    1e-8
}
fn d_max_iter() -> usize {
    100
}
fn d_vanish_tol() -> f64 {
    1e-3
}
fn d_radii() -> Vec<f64> {
    vec![10.0, 20.0, 40.0, 80.0]
}
fn d_r0() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "d_h_grid")]
    pub h_grid: f64,
    /// Window for sup/inf estimation.
    #[serde(default = "d_window")]
    pub window: [f64; 2],
    #[serde(default = "d_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "d_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_vanish_tol")]
    pub vanish_tol: f64,
    #[serde(default = "d_radii")]
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_mode: Option<SupMode>,
    /// Reporting window of the fixed point, default `[0, 40]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_window: Option<[f64; 2]>,
    /// Simulation horizon, default the right end of the solve window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lookback: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            h_grid: d_h_grid(),
            window: d_window(),
            tail_tol: d_tail_tol(),
            fp_tol: d_fp_tol(),
            max_iter: d_max_iter(),
            vanish_tol: d_vanish_tol(),
            radii: d_radii(),
            sup_mode: None,
            solve_window: None,
            t_end: None,
            max_lookback: None,
        }
    }
}

impl Numerics {
    pub fn solve_window(&self) -> (f64, f64) {
        let [a, b] = self.solve_window.unwrap_or([0.0, 40.0]);
        (a, b)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(self.solve_window().1)
    }

    pub fn max_lookback(&self) -> f64 {
        self.max_lookback.unwrap_or(1e4)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { vanish_tol: self.vanish_tol, ..Thresholds::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub timescale: TimeScale,
    pub weight: String,
    pub n: usize,
    pub c: Vec<String>,
    #[serde(rename = "I")]
    pub inputs: Vec<String>,
    pub a: Vec<Vec<String>>,
    pub b: Vec<Vec<String>>,
    pub gamma: Vec<Vec<f64>>,
    pub activations: Vec<ActivationConfig>,
    #[serde(default = "d_r0")]
    pub r0: f64,
    #[serde(default)]
    pub numerics: Numerics,
}

fn parse_field(src: &str, field: &str) -> Result<Expr> {
    parse(src).map_err(|e| Error::InvalidModel(format!("{field}: `{src}`: {e}")))
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<ModelConfig> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file path or `builtin:<name>`.
    pub fn load(path: &str) -> Result<ModelConfig> {
        if let Some(name) = path.strip_prefix("builtin:") {
            let text = builtin(name).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown builtin `{name}` (known: {})", BUILTINS.join(", ")))
            })?;
            return ModelConfig::from_json(text);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{path}: {e}")))?;
        ModelConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |what: &str| Err(Error::InvalidModel(format!("{what} does not match n = {n}")));
        if n == 0 {
            return Err(Error::InvalidModel("n must be positive".into()));
        }
        if self.c.len() != n {
            return bad("c");
        }
        if self.inputs.len() != n {
            return bad("I");
        }
        if self.activations.len() != n {
            return bad("activations");
        }
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) {
            return bad("a");
        }
        if self.b.len() != n || self.b.iter().any(|r| r.len() != n) {
            return bad("b");
        }
        if self.gamma.len() != n || self.gamma.iter().any(|r| r.len() != n) {
            return bad("gamma");
        }
        let nm = &self.numerics;
        let positive = [
            ("h_grid", nm.h_grid),
            ("tail_tol", nm.tail_tol),
            ("fp_tol", nm.fp_tol),
            ("vanish_tol", nm.vanish_tol),
            ("r0", self.r0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        if nm.max_iter == 0 {
            return Err(Error::InvalidModel("max_iter must be positive".into()));
        }
        if !(nm.window[0] < nm.window[1]) {
            return Err(Error::InvalidModel("window must satisfy a < b".into()));
        }
        let (sa, sb) = nm.solve_window();
        if !(sa < sb) {
            return Err(Error::InvalidModel("solve_window must satisfy a < b".into()));
        }
        if nm.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidModel("radii must be positive".into()));
        }
        Ok(())
    }

    pub fn estimation(&self) -> Estimation {
        let [a, b] = self.numerics.window;
        Estimation { window: (a, b), h_grid: self.numerics.h_grid, sup_mode: self.numerics.sup_mode.unwrap_or_default() }
    }

    pub fn to_model(&self) -> Result<CnnModel> {
        let list = |v: &[String], name: &str| -> Result<Vec<Expr>> {
            v.iter().enumerate().map(|(i, s)| parse_field(s, &format!("{name}[{i}]"))).collect()
        };
        let matrix = |m: &[Vec<String>], name: &str| -> Result<Vec<Vec<Expr>>> {
            m.iter().enumerate().map(|(i, row)| list(row, &format!("{name}[{i}]"))).collect()
        };
        let activations = self
            .activations
            .iter()
            .enumerate()
            .map(|(j, ac)| {
                let act = Activation::new(parse_field(&ac.expr, &format!("activations[{j}]"))?, ac.lipschitz)?;
                if let Some(f0) = ac.f0 {
                    if (f0 - act.f0).abs() > 1e-12 * (1.0 + f0.abs()) {
                        return Err(Error::InvalidModel(format!(
                            "activations[{j}]: f0 = {f0} but f(0) = {}",
                            act.f0
                        )));
                    }
                }
                Ok(act)
            })
            .collect::<Result<Vec<_>>>()?;
        CnnModel::new(
            self.timescale.clone(),
            list(&self.c, "c")?,
            matrix(&self.a, "a")?,
            matrix(&self.b, "b")?,
            list(&self.inputs, "I")?,
            self.gamma.clone(),
            activations,
            Weight::new(parse_field(&self.weight, "weight")?),
        )
    }

    pub fn ts(&self) -> &TimeScale {
        &self.timescale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for name in BUILTINS {
            let cfg = ModelConfig::load(&format!("builtin:{name}")).unwrap();
            let m = cfg.to_model().unwrap();
            assert_eq!(m.n(), cfg.n);
        }
        assert!(ModelConfig::load("builtin:nope").is_err());
    }

    #[test]
    fn builtins_round_trip() {
        for text in [EXAMPLE1, EXAMPLE2, EXAMPLE31] {
            let cfg = ModelConfig::from_json(text).unwrap();
            let again = ModelConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, again);
            let original: serde_json::Value = serde_json::from_str(text).unwrap();
            let reserialized: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
            assert_eq!(original, reserialized);
        }
    }

    #[test]
    fn shape_and_value_errors() {
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["c"] = serde_json::json!(["1"]);
        assert!(ModelConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["numerics"]["h_grid"] = serde_json::json!(-1.0);
        assert!(ModelConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["activations"][0]["f0"] = serde_json::json!(0.5);
        assert!(ModelConfig::from_json(&v.to_string()).unwrap().to_model().is_err());
        v["activations"][0]["f0"] = serde_json::json!(1.0 / 3.0);
        assert!(ModelConfig::from_json(&v.to_string()).unwrap().to_model().is_ok());
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["a"][0][0] = serde_json::json!("abs(cos(t)");
        assert!(matches!(ModelConfig::from_json(&v.to_string()).unwrap().to_model(), Err(Error::InvalidModel(_))));
    }
}
