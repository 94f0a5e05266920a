//! Text artifacts: the cognitive map as a Graphviz digraph and the plan as
//! JSON, each with a reader for what the writer emits.

use std::io::{Read, Write};

use super::{CognitiveMap, Plan, StateId};
use crate::error::{Error, Result};

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes one node per state and one edge per transition. Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn write_map_dot<W: Write>(map: &CognitiveMap, mut out: W) -> Result<()> {
    writeln!(out, "digraph cognitive_map {{").map_err(io_err)?;
    writeln!(out, "  node [shape=box];").map_err(io_err)?;
    for s in &map.states {
        let interrupted = u8::from(s.interrupted());
        writeln!(
            out,
            "  q{} [kind=\"{}\", phi=\"{}\", gamma=\"{}\", chi=\"{}\", interrupted=\"{}\", label=\"q{} {} phi={:.3}{}\"];",
            s.id,
            s.task.kind.label(),
            s.cost.phi,
            s.cost.gamma,
            s.cost.chi,
            interrupted,
            s.id,
            s.task.kind.label(),
            s.cost.phi,
            if interrupted == 1 { " *" } else { "" },
        )
        .map_err(io_err)?;
    }
    for (&(a, b), &g) in map.transitions.iter().zip(&map.guard_flags) {
        let style = if g == 1 { ", style=bold" } else { "" };
        writeln!(out, "  q{a} -> q{b} [guard=\"{g}\"{style}];").map_err(io_err)?;
    }
    writeln!(out, "}}").map_err(io_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapNodeRecord {
    pub id: StateId,
    pub kind: String,
    pub phi: f64,
    pub gamma: f64,
    pub chi: f64,
    pub interrupted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapEdgeRecord {
    pub from: StateId,
    pub to: StateId,
    pub guard: u8,
}

/// What [`parse_map_dot`] recovers from a written map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapRecord {
    pub nodes: Vec<MapNodeRecord>,
    pub edges: Vec<MapEdgeRecord>,
}

impl MapRecord {
    pub fn from_map(map: &CognitiveMap) -> Self {
        MapRecord {
            nodes: map
                .states
                .iter()
                .map(|s| MapNodeRecord {
                    id: s.id,
                    kind: s.task.kind.label().to_string(),
                    phi: s.cost.phi,
                    gamma: s.cost.gamma,
                    chi: s.cost.chi,
                    interrupted: s.interrupted(),
                })
                .collect(),
            edges: map
                .transitions
                .iter()
                .zip(&map.guard_flags)
                .map(|(&(from, to), &guard)| MapEdgeRecord { from, to, guard })
                .collect(),
        }
    }
}

fn attr<'a>(attrs: &'a str, key: &str) -> Result<&'a str> {
    let needle = format!("{key}=\"");
    let start = attrs
        .find(&needle)
        .ok_or_else(|| Error::Parse(format!("missing attribute `{key}`")))?
        + needle.len();
    let len = attrs[start..]
        .find('"')
        .ok_or_else(|| Error::Parse(format!("unterminated attribute `{key}`")))?;
    Ok(&attrs[start..start + len])
}

fn num<T: std::str::FromStr>(text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {text:?}")))
}

fn state_id(token: &str) -> Result<StateId> {
    num(token.trim().trim_start_matches('q'), "state id")
}

/// Reads back a map written by [`write_map_dot`].
pub fn parse_map_dot(text: &str) -> Result<MapRecord> {
    let mut record = MapRecord::default();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(l) if l.starts_with("digraph") => {}
        _ => return Err(Error::Parse("expected `digraph` header".into())),
    }
    for line in lines {
        if line == "}" || line.starts_with("node ") {
            continue;
        }
        let open = line
            .find('[')
            .ok_or_else(|| Error::Parse(format!("unexpected line: {line}")))?;
        let (head, attrs) = line.split_at(open);
        if let Some((from, to)) = head.split_once("->") {
            record.edges.push(MapEdgeRecord {
                from: state_id(from)?,
                to: state_id(to)?,
                guard: num(attr(attrs, "guard")?, "guard")?,
            });
        } else {
            record.nodes.push(MapNodeRecord {
                id: state_id(head)?,
                kind: attr(attrs, "kind")?.to_string(),
                phi: num(attr(attrs, "phi")?, "phi")?,
                gamma: num(attr(attrs, "gamma")?, "gamma")?,
                chi: num(attr(attrs, "chi")?, "chi")?,
                interrupted: attr(attrs, "interrupted")? == "1",
            });
        }
    }
    Ok(record)
}

pub fn write_plan_json<W: Write>(plan: &Plan, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, plan).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_plan_json<R: Read>(input: R) -> Result<Plan> {
    serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))
}
