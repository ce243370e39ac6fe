use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::lti::{build_line, BusSpec, LineParams, LtiError, RationalTransfer};
use crate::netgraph::NetworkGraph;
use crate::network::{BusModel, Mode, NetworkSpec};

pub const SPEC_VERSION: u32 = 1;

/// On-disk network description. Bus indices in `edges` are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct NetworkFile {
    pub spec_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: Mode,
    pub buses: Vec<BusModel>,
    pub edges: Vec<[usize; 2]>,
    pub lines: Vec<LineParams>,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct RlFields {
    r: f64,
    l: f64,
}

fn inner_path<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<String> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| pointer(e.path()))
        .filter(|p| !p.is_empty())
}

/// Tagged objects are buffered before their fields are read, which hides
/// the failing field from the path tracker. Re-read the object as its
/// variant to recover it.
fn refine_pointer(text: &str, ptr: &str) -> Option<String> {
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut obj = root.pointer(ptr)?.as_object()?.clone();
    let tag = ["model", "kind"]
        .into_iter()
        .find(|t| obj.contains_key(*t))?;
    let variant = obj.remove(tag)?;
    let v = serde_json::Value::Object(obj);
    let sub = match (tag, variant.as_str()?) {
        ("model", "buck") => inner_path::<BusSpec>(v),
        ("model", "transfer") | ("kind", "spr" | "pole_at_origin") => {
            inner_path::<RationalTransfer>(v)
        }
        ("kind", "rl") => inner_path::<RlFields>(v),
        _ => None,
    }?;
    Some(format!("{ptr}{sub}"))
}

/// Parse JSON text. Schema errors carry a JSON pointer to the offending
/// location; a missing key points at the key itself.
pub fn parse_network_str(text: &str) -> Result<NetworkFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: NetworkFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut ptr = pointer(e.path());
        let msg = e.inner().to_string();
        if let Some(p) = refine_pointer(text, &ptr) {
            ptr = p;
        }
        if let Some(rest) = msg.strip_prefix("missing field `") {
            if let Some(key) = rest.split('`').next() {
                ptr.push('/');
                ptr.push_str(key);
            }
        }
        CliError::Schema {
            pointer: ptr,
            message: msg,
        }
    })?;
    if file.spec_version != SPEC_VERSION {
        return Err(CliError::Schema {
            pointer: "/specVersion".into(),
            message: format!(
                "unsupported version {}, expected {SPEC_VERSION}",
                file.spec_version
            ),
        });
    }
    Ok(file)
}

pub fn parse_network(path: &Path) -> Result<NetworkFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_network_str(&text)
}

impl NetworkFile {
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        NetworkFile {
            spec_version: SPEC_VERSION,
            name: None,
            mode: spec.mode,
            buses: spec.buses.clone(),
            edges: spec
                .graph
                .edges()
                .iter()
                .map(|&(a, b)| [a + 1, b + 1])
                .collect(),
            lines: spec.line_params(),
        }
    }

    /// Validate physical values and build the spec, optionally forcing a mode.
    pub fn to_spec(&self, mode: Option<Mode>) -> Result<NetworkSpec, CliError> {
        for (j, b) in self.buses.iter().enumerate() {
            if let BusModel::Buck(b) = b {
                if let Err(LtiError::BadBusParams { name, value }) = b.validate() {
                    return Err(CliError::Unit {
                        pointer: format!("/buses/{j}/{name}"),
                        message: format!("{name} = {value} is out of range"),
                    });
                }
            }
        }
        for (k, l) in self.lines.iter().enumerate() {
            if let Err(e) = build_line(l) {
                return Err(match e {
                    LtiError::BadLineParams(m) => CliError::Unit {
                        pointer: format!("/lines/{k}"),
                        message: m,
                    },
                    other => CliError::Lti(other),
                });
            }
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = NetworkGraph::from_one_based(self.buses.len(), &edges)?;
        Ok(NetworkSpec::new(
            self.buses.clone(),
            graph,
            &self.lines,
            mode.unwrap_or(self.mode),
        )?)
    }
}
