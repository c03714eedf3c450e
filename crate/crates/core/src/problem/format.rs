//! Raw serde layer of the problem file format.

use serde::Deserialize;

pub const EXAMPLE_PAPER: &str = r#"
[problem]
name = "example:paper"
p = 1
n = 1
m = 2
xi_window = [-3.0, 3.0]
x_window = [-4.0, 4.0]

[cone]
type = "orthant"

[K]
type = "box"
lower = ["-abs(xi1) - 1"]
upper = ["abs(xi1) + 1"]
kinks = "xi1@0"

[f]
components = ["x1 - z1", "abs(xi1)"]

[objective]
expr = "xi1^2 + x1^2"

[Omega]
type = "box"
lower = [0.0]
upper = ["inf"]

[hypotheses]
nu_convex = true
k_lsc = true
nu_lipschitz = true
"#;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub problem: RawHeader,
    pub cone: RawCone,
    #[serde(rename = "K")]
    pub k: RawK,
    pub f: RawF,
    pub objective: RawObjective,
    #[serde(rename = "Omega")]
    pub omega: Option<RawOmega>,
    #[serde(default)]
    pub hypotheses: RawHypotheses,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHeader {
    pub name: Option<String>,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub xi_window: Option<RawWindow>,
    pub x_window: Option<RawWindow>,
    pub z_window: Option<RawWindow>,
    pub tol_c: Option<f64>,
}

/// Either one `[lo, hi]` pair for every coordinate or one pair per coordinate.
#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
pub enum RawWindow {
    Uniform([f64; 2]),
    PerAxis(Vec<[f64; 2]>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCone {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawK {
    #[serde(rename = "type")]
    pub kind: String,
    pub lower: Option<Vec<RawExprOrNum>>,
    pub upper: Option<Vec<RawExprOrNum>>,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<RawExprOrNum>>>,
    pub b: Option<Vec<RawExprOrNum>>,
    pub kinks: Option<String>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
pub enum RawExprOrNum {
    Num(f64),
    Text(String),
}

impl RawExprOrNum {
    pub fn as_text(&self) -> String {
        match self {
            RawExprOrNum::Num(v) => format!("{v:?}"),
            RawExprOrNum::Text(s) => s.clone(),
        }
    }

    /// Constant value; accepts `inf`, `+inf`, `-inf` and decimal strings.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            RawExprOrNum::Num(v) => Some(*v),
            RawExprOrNum::Text(s) => match s.trim() {
                "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
                "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
                t => t.parse().ok(),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawF {
    pub components: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObjective {
    pub expr: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOmega {
    #[serde(rename = "type")]
    pub kind: String,
    pub lower: Option<Vec<RawExprOrNum>>,
    pub upper: Option<Vec<RawExprOrNum>>,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    pub vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct RawHypotheses {
    #[serde(default)]
    pub nu_convex: bool,
    #[serde(default)]
    pub mu_convex: bool,
    #[serde(default)]
    pub k_lsc: bool,
    #[serde(default)]
    pub nu_lipschitz: bool,
    #[serde(default)]
    pub f_smooth_concave: bool,
}
