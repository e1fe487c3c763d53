use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::entanglement::Point3;
use crate::graph::LatticeSpec;
use crate::labyrinth::BoundaryPolicy;
use crate::random_cluster::{Boundary, DEFAULT_BURN_IN, DEFAULT_SPACING};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Perc,
    Uniq,
    Rc,
    Rigid,
    Entangle,
    Labyrinth,
    PcScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Perc,
        ExperimentKind::Uniq,
        ExperimentKind::Rc,
        ExperimentKind::Rigid,
        ExperimentKind::Entangle,
        ExperimentKind::Labyrinth,
        ExperimentKind::PcScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Perc => "perc",
            ExperimentKind::Uniq => "uniq",
            ExperimentKind::Rc => "rc",
            ExperimentKind::Rigid => "rigid",
            ExperimentKind::Entangle => "entangle",
            ExperimentKind::Labyrinth => "labyrinth",
            ExperimentKind::PcScan => "pc-scan",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, HarnessError> {
        match *self {
            Grid::List(ref v) if v.is_empty() => Err(HarnessError::Config("grid is empty".into())),
            Grid::List(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(HarnessError::Config(format!("bad grid range {start}..{stop} step {step}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Rounded so that 0.4 + 3 * 0.02 prints as 0.46.
                Ok((0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
            }
        }
    }
}

fn default_replicas() -> usize {
    100
}

/// Fields shared by every experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Critical-point bisection on each lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercConfig {
    pub lattices: Vec<LatticeSpec>,
    pub tolerance: f64,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

/// Crossing probability over a `p` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub lattice: LatticeSpec,
    pub p: Grid,
}

/// Either a lattice or an explicit edge list on `vertices` vertices. An
/// edge list without `boundary` uses the degree-at-most-one vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Lattice {
        lattice: LatticeSpec,
    },
    Edges {
        vertices: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundary: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcConfig {
    pub graph: GraphSource,
    pub p: Grid,
    pub q: Grid,
    #[serde(default = "both_boundaries")]
    pub boundaries: Vec<Boundary>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_spacing")]
    pub spacing: usize,
    /// Two-point pair; defaults to the first and last vertex.
    #[serde(default)]
    pub pair: Option<(usize, usize)>,
}

fn both_boundaries() -> Vec<Boundary> {
    vec![Boundary::Free, Boundary::Wired]
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_spacing() -> usize {
    DEFAULT_SPACING
}

/// A cycle given inline or as a path to a file of vertex triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CycleSource {
    Inline(Vec<Point3>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntangleConfig {
    /// Count connected edge sets for `n = 1..=max_edges`.
    #[serde(default)]
    pub max_edges: usize,
    #[serde(default)]
    pub pairs: Vec<(CycleSource, CycleSource)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabyrinthConfig {
    pub dims: Vec<usize>,
    pub p_rw: f64,
    #[serde(default)]
    pub p_cross: f64,
    #[serde(default)]
    pub reflectors: Vec<String>,
    #[serde(default)]
    pub weights: Vec<f64>,
    pub t_max: usize,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindConfig {
    Perc(PercConfig),
    Scan(ScanConfig),
    Rc(RcConfig),
    Entangle(EntangleConfig),
    Labyrinth(LabyrinthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub params: KindConfig,
}

fn parse_as<T: for<'de> Deserialize<'de>>(kind: ExperimentKind, rest: Map<String, Value>) -> Result<T, HarnessError> {
    serde_json::from_value(Value::Object(rest)).map_err(|e| HarnessError::Config(format!("{kind} config: {e}")))
}

impl ExperimentConfig {
    /// Parses a config, or the config echoed inside a run manifest. The
    /// kind comes from `cli_kind` and, if present, must match the file.
    pub fn from_json(text: &str, cli_kind: Option<ExperimentKind>) -> Result<Self, HarnessError> {
        let value: Value = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("malformed JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(HarnessError::Config("config must be a JSON object".into()));
        };
        if map.get("tool").and_then(Value::as_str) == Some(super::TOOL_NAME) {
            let echo = map.remove("config").ok_or_else(|| HarnessError::Config("manifest has no config echo".into()))?;
            return Self::from_json(&echo.to_string(), cli_kind);
        }
        let mut common_map = Map::new();
        for key in ["kind", "seed", "replicas", "out"] {
            if let Some(v) = map.remove(key) {
                common_map.insert(key.into(), v);
            }
        }
        let params = map.remove("params").map(|p| match p {
            Value::Object(m) => Ok(m),
            _ => Err(HarnessError::Config("params must be an object".into())),
        });
        let rest = match params {
            Some(p) => {
                if !map.is_empty() {
                    let keys: Vec<&String> = map.keys().collect();
                    return Err(HarnessError::Config(format!("unknown top-level fields {keys:?}")));
                }
                p?
            }
            None => map,
        };
        let common: Common = serde_json::from_value(Value::Object(common_map))
            .map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        let kind = match (cli_kind, common.kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(HarnessError::Config(format!("command asks for {a} but the config is for {b}")))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(HarnessError::Config("experiment kind missing".into())),
        };
        let params = match kind {
            ExperimentKind::Perc => KindConfig::Perc(parse_as(kind, rest)?),
            ExperimentKind::Uniq | ExperimentKind::Rigid | ExperimentKind::PcScan => {
                KindConfig::Scan(parse_as(kind, rest)?)
            }
            ExperimentKind::Rc => KindConfig::Rc(parse_as(kind, rest)?),
            ExperimentKind::Entangle => KindConfig::Entangle(parse_as(kind, rest)?),
            ExperimentKind::Labyrinth => KindConfig::Labyrinth(parse_as(kind, rest)?),
        };
        Ok(ExperimentConfig { kind, seed: common.seed, replicas: common.replicas, out: common.out, params })
    }
}
