//! Run configuration: a TOML document with the sections `system`, `control`,
//! `potential`, `sets`, `controlset`, `discretization`, `bounds` and
//! `output`.
//!
//! Parsing is strict. Every key is checked against the schema before the
//! typed decode, so unknown keys, missing keys and type mismatches are
//! reported with their full path.

use std::fmt;

use invpress_core::model::{
    CompactSet, ControlRange, GeneralSystem, LinearSystem, Potential, System,
};
use invpress_core::pressure::PressureOptions;
use invpress_core::PNorm;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

/// A p-norm written as `1`, `2` or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metric(pub PNorm);

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            PNorm::One => s.serialize_i64(1),
            PNorm::Two => s.serialize_i64(2),
            PNorm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Int(i) => i as f64,
            Raw::Float(f) => f,
            Raw::Str(s) if s == "inf" => f64::INFINITY,
            Raw::Str(s) => return Err(serde::de::Error::custom(format!("unsupported norm `{s}`"))),
        };
        PNorm::from_p(p)
            .map(Metric)
            .ok_or_else(|| serde::de::Error::custom(format!("p must be 1, 2 or \"inf\", got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemSpec {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    General {
        ode: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub range: RangeSpec,
    /// Reference control; the default centre of a norm-distance potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Constant {
        #[serde(default)]
        c: f64,
    },
    Affine {
        w: Vec<f64>,
        #[serde(default)]
        b: f64,
    },
    NormDist {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_ref: Option<Vec<f64>>,
        #[serde(default = "metric_two")]
        p: Metric,
    },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Constant { c: 0.0 }
    }
}

fn metric_two() -> Metric {
    Metric(PNorm::Two)
}

fn default_tol() -> f64 {
    1e-9
}

fn default_shrink() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Vertices {
        points: Vec<Vec<f64>>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Point {
        x: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// The estimated control set scaled about the origin.
    FromControlset {
        #[serde(default = "default_shrink")]
        shrink: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

impl SetSpec {
    pub fn uses_controlset(&self) -> bool {
        matches!(self, SetSpec::FromControlset { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetsSpec {
    #[serde(rename = "K")]
    pub k: SetSpec,
    #[serde(rename = "Q")]
    pub q: SetSpec,
    /// Metric of the `ε`-neighbourhoods of `Q`.
    #[serde(default = "metric_two")]
    pub p: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSetSpec {
    pub samples: usize,
    pub horizon: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for ControlSetSpec {
    fn default() -> Self {
        ControlSetSpec {
            samples: 2000,
            horizon: 8.0,
            seed: 0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretizationSpec {
    pub dt: f64,
    pub delta: f64,
    pub u_levels: usize,
    pub tau0: f64,
    pub n_max: usize,
    pub stride: usize,
    pub exact_threshold: usize,
    pub cap: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_ladder: Option<Vec<f64>>,
    pub pitch: f64,
    pub lower_tau: f64,
    pub q_margin: bool,
    pub use_projection: bool,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        let p = PressureOptions::default();
        DiscretizationSpec {
            dt: p.dt,
            delta: p.delta,
            u_levels: p.levels,
            tau0: p.tau0,
            n_max: p.n_max,
            stride: p.stride,
            exact_threshold: p.exact_threshold,
            cap: p.cap,
            seed: p.seed,
            eps_ladder: None,
            pitch: p.pitch,
            lower_tau: p.lower_tau,
            q_margin: p.q_margin,
            use_projection: p.use_projection,
        }
    }
}

/// Equilibrium pair for the upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub control: ControlSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<SetsSpec>,
    #[serde(default)]
    pub controlset: ControlSetSpec,
    #[serde(default)]
    pub discretization: DiscretizationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

// ---- schema walk ----

#[derive(Clone, Copy)]
enum Ty {
    Num,
    Int,
    Bool,
    Str,
    Vector,
    Matrix,
    Metric,
    Range,
    Set,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Num => "a number",
            Ty::Int => "a non-negative integer",
            Ty::Bool => "a boolean",
            Ty::Str => "a string",
            Ty::Vector => "an array of numbers",
            Ty::Matrix => "an array of arrays of numbers",
            Ty::Metric => "1, 2 or \"inf\"",
            Ty::Range | Ty::Set => "a table",
        })
    }
}

struct Field(&'static str, Ty, bool);

const TOP: &[&str] = &[
    "system",
    "control",
    "potential",
    "sets",
    "controlset",
    "discretization",
    "bounds",
    "output",
];
const REQUIRED_TOP: &[&str] = &["system", "control"];

const SYSTEM_LINEAR: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("A", Ty::Matrix, true),
    Field("B", Ty::Matrix, true),
];
const SYSTEM_GENERAL: &[Field] = &[Field("kind", Ty::Str, true), Field("ode", Ty::Str, true)];
const CONTROL: &[Field] = &[
    Field("range", Ty::Range, true),
    Field("u0", Ty::Vector, false),
];
const RANGE: &[Field] = &[
    Field("lo", Ty::Vector, false),
    Field("hi", Ty::Vector, false),
    Field("vertices", Ty::Matrix, false),
];
const POT_CONSTANT: &[Field] = &[Field("kind", Ty::Str, true), Field("c", Ty::Num, false)];
const POT_AFFINE: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("w", Ty::Vector, true),
    Field("b", Ty::Num, false),
];
const POT_NORM: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("u_ref", Ty::Vector, false),
    Field("p", Ty::Metric, false),
];
const SETS: &[Field] = &[
    Field("K", Ty::Set, true),
    Field("Q", Ty::Set, true),
    Field("p", Ty::Metric, false),
];
const SET_BOX: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("lo", Ty::Vector, true),
    Field("hi", Ty::Vector, true),
    Field("tol", Ty::Num, false),
];
const SET_VERTICES: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("points", Ty::Matrix, true),
    Field("tol", Ty::Num, false),
];
const SET_POINT: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("x", Ty::Vector, true),
    Field("tol", Ty::Num, false),
];
const SET_CS: &[Field] = &[
    Field("kind", Ty::Str, true),
    Field("shrink", Ty::Num, false),
    Field("tol", Ty::Num, false),
];
const CONTROLSET: &[Field] = &[
    Field("samples", Ty::Int, false),
    Field("horizon", Ty::Num, false),
    Field("seed", Ty::Int, false),
    Field("dt", Ty::Num, false),
];
const DISCRETIZATION: &[Field] = &[
    Field("dt", Ty::Num, false),
    Field("delta", Ty::Num, false),
    Field("u_levels", Ty::Int, false),
    Field("tau0", Ty::Num, false),
    Field("n_max", Ty::Int, false),
    Field("stride", Ty::Int, false),
    Field("exact_threshold", Ty::Int, false),
    Field("cap", Ty::Int, false),
    Field("seed", Ty::Int, false),
    Field("eps_ladder", Ty::Vector, false),
    Field("pitch", Ty::Num, false),
    Field("lower_tau", Ty::Num, false),
    Field("q_margin", Ty::Bool, false),
    Field("use_projection", Ty::Bool, false),
];
const BOUNDS: &[Field] = &[Field("x0", Ty::Vector, true), Field("u0", Ty::Vector, true)];
const OUTPUT: &[Field] = &[Field("json", Ty::Str, false), Field("csv", Ty::Str, false)];

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn unknown_key(path: &str, key: &str, allowed: &[&str]) -> ConfigError {
    let best = allowed
        .iter()
        .map(|a| (strsim::levenshtein(key, a), *a))
        .min()
        .filter(|(d, a)| *d <= 2 && *d < a.len().max(key.len()));
    let hint = match best {
        Some((_, a)) => format!(" (did you mean `{a}`?)"),
        None => format!(" (expected one of: {})", allowed.join(", ")),
    };
    ConfigError::new(join(path, key), format!("unknown key{hint}"))
}

fn is_number(v: &Value) -> bool {
    matches!(v, Value::Integer(_) | Value::Float(_))
}

fn check_type(v: &Value, ty: Ty, path: &str) -> Result<()> {
    let ok = match ty {
        Ty::Num => is_number(v),
        Ty::Int => matches!(v, Value::Integer(i) if *i >= 0),
        Ty::Bool => v.is_bool(),
        Ty::Str => v.is_str(),
        Ty::Vector => v.as_array().is_some_and(|a| a.iter().all(is_number)),
        Ty::Matrix => v.as_array().is_some_and(|a| {
            a.iter()
                .all(|r| r.as_array().is_some_and(|r| r.iter().all(is_number)))
        }),
        Ty::Metric => match v {
            Value::Integer(i) => *i == 1 || *i == 2,
            Value::Float(f) => *f == 1.0 || *f == 2.0,
            Value::String(s) => s == "inf",
            _ => false,
        },
        Ty::Range | Ty::Set => v.is_table(),
    };
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("expected {ty}, found {}", describe(v)),
        ))
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("string \"{s}\""),
        Value::Integer(i) => format!("integer {i}"),
        Value::Float(f) => format!("float {f}"),
        Value::Boolean(b) => format!("boolean {b}"),
        Value::Datetime(_) => "a datetime".into(),
        Value::Array(_) => "an array".into(),
        Value::Table(_) => "a table".into(),
    }
}

fn kind_of<'a>(t: &'a Table, path: &str, kinds: &[&str]) -> Result<&'a str> {
    let k = t.get("kind").ok_or_else(|| {
        ConfigError::new(
            join(path, "kind"),
            format!("missing key (one of: {})", kinds.join(", ")),
        )
    })?;
    let k = k.as_str().ok_or_else(|| {
        ConfigError::new(
            join(path, "kind"),
            format!("expected a string, found {}", describe(k)),
        )
    })?;
    if kinds.contains(&k) {
        Ok(k)
    } else {
        let e = unknown_key("", k, kinds);
        Err(ConfigError::new(
            join(path, "kind"),
            format!(
                "unknown kind `{k}`{}",
                e.message.trim_start_matches("unknown key")
            ),
        ))
    }
}

fn check_table(t: &Table, path: &str, fields: &[Field]) -> Result<()> {
    let names: Vec<&str> = fields.iter().map(|f| f.0).collect();
    for (key, value) in t {
        let field = fields
            .iter()
            .find(|f| f.0 == key)
            .ok_or_else(|| unknown_key(path, key, &names))?;
        let p = join(path, key);
        check_type(value, field.1, &p)?;
        match field.1 {
            Ty::Range => check_table(value.as_table().expect("checked"), &p, RANGE)?,
            Ty::Set => check_set(value.as_table().expect("checked"), &p)?,
            _ => {}
        }
    }
    for f in fields.iter().filter(|f| f.2) {
        if !t.contains_key(f.0) {
            return Err(ConfigError::new(join(path, f.0), "missing key"));
        }
    }
    Ok(())
}

fn check_set(t: &Table, path: &str) -> Result<()> {
    let fields = match kind_of(t, path, &["box", "vertices", "point", "from-controlset"])? {
        "box" => SET_BOX,
        "vertices" => SET_VERTICES,
        "point" => SET_POINT,
        _ => SET_CS,
    };
    check_table(t, path, fields)
}

fn section<'a>(doc: &'a Table, key: &str) -> Result<Option<&'a Table>> {
    match doc.get(key) {
        None => Ok(None),
        Some(v) => v.as_table().map(Some).ok_or_else(|| {
            ConfigError::new(key, format!("expected a table, found {}", describe(v)))
        }),
    }
}

fn check_schema(doc: &Table) -> Result<()> {
    for key in doc.keys() {
        if !TOP.contains(&key.as_str()) {
            return Err(unknown_key("", key, TOP));
        }
    }
    for key in REQUIRED_TOP {
        if !doc.contains_key(*key) {
            return Err(ConfigError::new(*key, "missing section"));
        }
    }
    if let Some(t) = section(doc, "system")? {
        let fields = match kind_of(t, "system", &["linear", "general"])? {
            "linear" => SYSTEM_LINEAR,
            _ => SYSTEM_GENERAL,
        };
        check_table(t, "system", fields)?;
    }
    if let Some(t) = section(doc, "control")? {
        check_table(t, "control", CONTROL)?;
    }
    if let Some(t) = section(doc, "potential")? {
        let fields = match kind_of(t, "potential", &["constant", "affine", "norm-dist"])? {
            "constant" => POT_CONSTANT,
            "affine" => POT_AFFINE,
            _ => POT_NORM,
        };
        check_table(t, "potential", fields)?;
    }
    for (key, fields) in [
        ("sets", SETS),
        ("controlset", CONTROLSET),
        ("discretization", DISCRETIZATION),
        ("bounds", BOUNDS),
        ("output", OUTPUT),
    ] {
        if let Some(t) = section(doc, key)? {
            check_table(t, key, fields)?;
        }
    }
    Ok(())
}

// ---- cross-field validation ----

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn finite(path: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(ConfigError::new(path, format!("entry {i} is not finite"))),
        None => Ok(()),
    }
}

fn dim(path: &str, v: &[f64], want: usize, what: &str) -> Result<()> {
    finite(path, v)?;
    if v.len() == want {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!(
                "has {} entries but the {what} has dimension {want}",
                v.len()
            ),
        ))
    }
}

/// `num` is an integer multiple of `den`, both named by key.
fn multiple(num_key: &str, num: f64, den_key: &str, den: f64) -> Result<()> {
    let r = num / den;
    if r.round() >= 1.0 && (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
        Ok(())
    } else {
        Err(ConfigError::new(
            num_key,
            format!("`{num_key}` = {num} is not an integer multiple of `{den_key}` = {den}"),
        ))
    }
}

fn rows(path: &str, m: &[Vec<f64>], cols: Option<usize>) -> Result<(usize, usize)> {
    let r = m.len();
    if r == 0 {
        return Err(ConfigError::new(path, "matrix is empty"));
    }
    let c = cols.unwrap_or(m[0].len());
    if c == 0 {
        return Err(ConfigError::new(path, "matrix has no columns"));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != c {
            return Err(ConfigError::new(
                format!("{path}[{i}]"),
                format!("row has {} entries, expected {c}", row.len()),
            ));
        }
        finite(&format!("{path}[{i}]"), row)?;
    }
    Ok((r, c))
}

const BUILTINS: &[&str] = &["vanderpol", "pendulum"];

fn builtin_name(ode: &str) -> Result<&str> {
    let name = ode.strip_prefix("builtin:").ok_or_else(|| {
        ConfigError::new(
            "system.ode",
            format!("expected `builtin:<name>`, got `{ode}`"),
        )
    })?;
    if BUILTINS.contains(&name) {
        Ok(name)
    } else {
        let hint = unknown_key("", name, BUILTINS)
            .message
            .replace("unknown key", "");
        Err(ConfigError::new(
            "system.ode",
            format!("unknown builtin system `{name}`{hint}"),
        ))
    }
}

impl RunConfig {
    /// State and input dimensions.
    pub fn dims(&self) -> (usize, usize) {
        match &self.system {
            SystemSpec::Linear { a, b } => (a.len(), b.first().map_or(0, |r| r.len())),
            SystemSpec::General { .. } => (2, 1),
        }
    }

    fn validate(&mut self) -> Result<()> {
        let (d, m) = match &self.system {
            SystemSpec::Linear { a, b } => {
                let (r, c) = rows("system.A", a, None)?;
                if r != c {
                    return Err(ConfigError::new(
                        "system.A",
                        format!("must be square, got {r}x{c}"),
                    ));
                }
                let (rb, cb) = rows("system.B", b, None)?;
                if rb != r {
                    return Err(ConfigError::new(
                        "system.B",
                        format!("has {rb} rows but `system.A` is {r}x{r}"),
                    ));
                }
                (r, cb)
            }
            SystemSpec::General { ode } => {
                builtin_name(ode)?;
                (2, 1)
            }
        };

        let range = &self.control.range;
        match (&range.lo, &range.hi, &range.vertices) {
            (Some(lo), Some(hi), None) => {
                dim("control.range.lo", lo, m, "input")?;
                dim("control.range.hi", hi, m, "input")?;
                if let Some(i) = (0..m).find(|&i| lo[i] > hi[i]) {
                    return Err(ConfigError::new(
                        "control.range",
                        format!("lo > hi in coordinate {i}"),
                    ));
                }
            }
            (None, None, Some(v)) => {
                let (count, c) = rows("control.range.vertices", v, Some(m))?;
                if c != m || count < m + 1 {
                    return Err(ConfigError::new(
                        "control.range.vertices",
                        format!("need at least {} points of dimension {m}", m + 1),
                    ));
                }
            }
            (None, None, None) => {
                return Err(ConfigError::new(
                    "control.range",
                    "missing key: give `lo` and `hi`, or `vertices`",
                ))
            }
            (Some(_), None, _) => {
                return Err(ConfigError::new(
                    "control.range.hi",
                    "missing key (required with `lo`)",
                ))
            }
            (None, Some(_), _) => {
                return Err(ConfigError::new(
                    "control.range.lo",
                    "missing key (required with `hi`)",
                ))
            }
            _ => {
                return Err(ConfigError::new(
                    "control.range",
                    "give either `lo`/`hi` or `vertices`, not both",
                ))
            }
        }
        let control_range = self.control_range()?;
        if let Some(u0) = &self.control.u0 {
            dim("control.u0", u0, m, "input")?;
            if !control_range.contains(u0, 1e-12) {
                return Err(ConfigError::new(
                    "control.u0",
                    "lies outside the control range",
                ));
            }
        }

        let u0 = self.control.u0.clone();
        match &mut self.potential {
            PotentialSpec::Constant { c } => finite("potential.c", &[*c])?,
            PotentialSpec::Affine { w, b } => {
                dim("potential.w", w, m, "input")?;
                finite("potential.b", &[*b])?;
            }
            PotentialSpec::NormDist { u_ref, .. } => {
                if u_ref.is_none() {
                    *u_ref = Some(u0.unwrap_or_else(|| vec![0.0; m]));
                }
                dim(
                    "potential.u_ref",
                    u_ref.as_ref().expect("filled"),
                    m,
                    "input",
                )?;
            }
        }

        let linear = matches!(self.system, SystemSpec::Linear { .. });
        if let Some(sets) = &self.sets {
            for (name, s) in [("sets.K", &sets.k), ("sets.Q", &sets.q)] {
                match s {
                    SetSpec::Box { lo, hi, tol } => {
                        dim(&format!("{name}.lo"), lo, d, "state")?;
                        dim(&format!("{name}.hi"), hi, d, "state")?;
                        if let Some(i) = (0..d).find(|&i| lo[i] > hi[i]) {
                            return Err(ConfigError::new(
                                name,
                                format!("lo > hi in coordinate {i}"),
                            ));
                        }
                        nonneg(&format!("{name}.tol"), *tol)?;
                    }
                    SetSpec::Vertices { points, tol } => {
                        rows(&format!("{name}.points"), points, Some(d))?;
                        nonneg(&format!("{name}.tol"), *tol)?;
                    }
                    SetSpec::Point { x, tol } => {
                        dim(&format!("{name}.x"), x, d, "state")?;
                        nonneg(&format!("{name}.tol"), *tol)?;
                    }
                    SetSpec::FromControlset { shrink, tol } => {
                        if !linear {
                            return Err(ConfigError::new(
                                format!("{name}.kind"),
                                "`from-controlset` needs `system.kind = \"linear\"`",
                            ));
                        }
                        if !(*shrink > 0.0 && *shrink <= 1.0) {
                            return Err(ConfigError::new(
                                format!("{name}.shrink"),
                                format!("must lie in (0, 1], got {shrink}"),
                            ));
                        }
                        nonneg(&format!("{name}.tol"), *tol)?;
                    }
                }
            }
        }

        let cs = &self.controlset;
        if cs.samples == 0 {
            return Err(ConfigError::new("controlset.samples", "must be at least 1"));
        }
        positive("controlset.horizon", cs.horizon)?;
        positive("controlset.dt", cs.dt)?;

        let z = &self.discretization;
        positive("discretization.dt", z.dt)?;
        positive("discretization.delta", z.delta)?;
        positive("discretization.tau0", z.tau0)?;
        positive("discretization.pitch", z.pitch)?;
        positive("discretization.lower_tau", z.lower_tau)?;
        multiple("discretization.delta", z.delta, "discretization.dt", z.dt)?;
        multiple(
            "discretization.tau0",
            z.tau0,
            "discretization.delta",
            z.delta,
        )?;
        multiple(
            "discretization.lower_tau",
            z.lower_tau,
            "discretization.delta",
            z.delta,
        )?;
        if z.u_levels < 2 {
            return Err(ConfigError::new(
                "discretization.u_levels",
                format!("must be at least 2, got {}", z.u_levels),
            ));
        }
        for (key, v) in [
            ("discretization.n_max", z.n_max),
            ("discretization.stride", z.stride),
        ] {
            if v == 0 {
                return Err(ConfigError::new(key, "must be at least 1"));
            }
        }
        if z.exact_threshold > 64 {
            return Err(ConfigError::new(
                "discretization.exact_threshold",
                format!("is limited to 64, got {}", z.exact_threshold),
            ));
        }
        let constants = control_range.level_grid(z.u_levels).len();
        if z.cap < constants {
            return Err(ConfigError::new(
                "discretization.cap",
                format!("`discretization.cap` = {} is below the {constants} constant controls of `discretization.u_levels` = {}", z.cap, z.u_levels),
            ));
        }
        if let Some(l) = &z.eps_ladder {
            if l.is_empty() {
                return Err(ConfigError::new("discretization.eps_ladder", "is empty"));
            }
            if l.iter().any(|e| !(*e > 0.0)) || l.windows(2).any(|w| !(w[0] > w[1])) {
                return Err(ConfigError::new(
                    "discretization.eps_ladder",
                    "must be positive and strictly decreasing",
                ));
            }
        }

        if let Some(b) = &self.bounds {
            dim("bounds.x0", &b.x0, d, "state")?;
            dim("bounds.u0", &b.u0, m, "input")?;
        }
        Ok(())
    }

    pub fn control_range(&self) -> Result<ControlRange> {
        let r = &self.control.range;
        let out = match (&r.lo, &r.hi, &r.vertices) {
            (Some(lo), Some(hi), _) => ControlRange::boxed(lo.clone(), hi.clone()),
            (_, _, Some(v)) => {
                let m = v[0].len();
                ControlRange::from_vertices(m, &v.concat())
            }
            _ => return Err(ConfigError::new("control.range", "missing key")),
        };
        out.map_err(|e| ConfigError::new("control.range", e.to_string()))
    }

    pub fn build_system(&self) -> Result<System> {
        let range = self.control_range()?;
        match &self.system {
            SystemSpec::Linear { a, b } => {
                let (d, m) = self.dims();
                LinearSystem::from_rows(d, m, &a.concat(), &b.concat(), range)
                    .map(System::from)
                    .map_err(|e| ConfigError::new("system", e.to_string()))
            }
            SystemSpec::General { ode } => GeneralSystem::builtin(builtin_name(ode)?, range)
                .map(System::from)
                .map_err(|e| ConfigError::new("system.ode", e.to_string())),
        }
    }

    pub fn build_potential(&self) -> Potential {
        match &self.potential {
            PotentialSpec::Constant { c } => Potential::Constant(*c),
            PotentialSpec::Affine { w, b } => Potential::Affine {
                w: w.clone(),
                b: *b,
            },
            PotentialSpec::NormDist { u_ref, p } => Potential::NormDist {
                u_ref: u_ref.clone().unwrap_or_else(|| vec![0.0; self.dims().1]),
                norm: p.0,
            },
        }
    }

    pub fn pressure_options(&self) -> PressureOptions {
        let z = &self.discretization;
        PressureOptions {
            dt: z.dt,
            delta: z.delta,
            levels: z.u_levels,
            tau0: z.tau0,
            n_max: z.n_max,
            stride: z.stride,
            exact_threshold: z.exact_threshold,
            cap: z.cap,
            seed: z.seed,
            pitch: z.pitch,
            q_margin: z.q_margin,
            lower_tau: z.lower_tau,
            use_projection: z.use_projection,
            equilibrium: self.bounds.as_ref().map(|b| (b.x0.clone(), b.u0.clone())),
        }
    }

    /// Overrides every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.discretization.seed = seed;
        self.controlset.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }
}

fn nonneg(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("must be non-negative, got {v}"),
        ))
    }
}

/// Literal set from its spec; `None` for sets derived from the control set.
pub fn literal_set(spec: &SetSpec, path: &str) -> Result<Option<CompactSet>> {
    let err = |e: invpress_core::Error| ConfigError::new(path, e.to_string());
    Ok(Some(match spec {
        SetSpec::Box { lo, hi, tol } => CompactSet::boxed(lo.clone(), hi.clone())
            .map_err(err)?
            .with_tol(*tol),
        SetSpec::Vertices { points, tol } => {
            CompactSet::from_vertices(points[0].len(), &points.concat())
                .map_err(err)?
                .with_tol(*tol)
        }
        SetSpec::Point { x, tol } => CompactSet::point(x).with_tol(*tol),
        SetSpec::FromControlset { .. } => return Ok(None),
    }))
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("<document>", e.message().to_string()))?;
    check_schema(&doc)?;
    let mut cfg: RunConfig = Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::new("<document>", e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
kind = "linear"
A = [[1.0]]
B = [[1.0]]

[control]
range.lo = [-1.0]
range.hi = [1.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.potential, PotentialSpec::Constant { c: 0.0 });
        assert_eq!(cfg.discretization, DiscretizationSpec::default());
        assert_eq!(cfg.controlset, ControlSetSpec::default());
        assert_eq!(cfg.dims(), (1, 1));
    }

    #[test]
    fn delta_must_be_multiple_of_dt() {
        let text = format!("{MINIMAL}\n[discretization]\ndt = 0.03\ndelta = 0.25\n");
        let e = parse_config(&text).unwrap_err();
        assert!(
            e.message.contains("discretization.delta") && e.message.contains("discretization.dt"),
            "{e}"
        );
    }

    #[test]
    fn misspelt_section_gets_a_suggestion() {
        let text = format!("{MINIMAL}\n[potental]\nkind = \"constant\"\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "potental");
        assert!(e.message.contains("did you mean `potential`"), "{e}");
    }

    #[test]
    fn misspelt_nested_key() {
        let text = format!("{MINIMAL}\n[discretization]\npich = 0.1\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "discretization.pich");
        assert!(e.message.contains("`pitch`"));
    }

    #[test]
    fn type_mismatch_has_path() {
        let text = format!("{MINIMAL}\n[discretization]\nn_max = \"eight\"\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "discretization.n_max");
    }

    #[test]
    fn missing_matrix() {
        let e = parse_config("[system]\nkind = \"linear\"\nA = [[1.0]]\n[control]\nrange.lo=[-1.0]\nrange.hi=[1.0]\n").unwrap_err();
        assert_eq!(e.path, "system.B");
    }

    #[test]
    fn metric_forms() {
        let text = format!("{MINIMAL}\n[potential]\nkind = \"norm-dist\"\np = \"inf\"\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(
            cfg.build_potential(),
            Potential::NormDist {
                u_ref: vec![0.0],
                norm: PNorm::Inf
            }
        );
        let bad = format!("{MINIMAL}\n[potential]\nkind = \"norm-dist\"\np = 3\n");
        assert_eq!(parse_config(&bad).unwrap_err().path, "potential.p");
    }
}
