//! Citation-network ingestion (`.content` / `.cites`), optional texts and
//! embeddings files, and the versioned JSON graph format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedTag, EdgeStats, NodeTable};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Text used for nodes when no texts file is supplied.
pub const MISSING_TEXT: &str = "Title/abstract unavailable";

#[derive(Debug, Clone, PartialEq)]
pub struct ContentRecord {
    pub key: String,
    pub features: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiteRecord {
    pub cited: String,
    pub citing: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitesFile {
    pub records: Vec<CiteRecord>,
    pub blank_lines: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSemantics {
    /// `u → v` means `u` cites `v`.
    #[default]
    CitingToCited,
    CitedToCiting,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub cite_records: usize,
    pub unknown_keys: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub edges: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: name.to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_content(path: impl AsRef<Path>) -> Result<Vec<ContentRecord>> {
    let path = path.as_ref();
    parse_content_str(&read(path)?, &path.display().to_string())
}

/// Parses `.content` text; `name` is used in error messages.
pub fn parse_content_str(text: &str, name: &str) -> Result<Vec<ContentRecord>> {
    let mut out = Vec::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() < 3 {
            return Err(parse_err(name, lineno, "expected key, features and label"));
        }
        let d = cols.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(
                    name,
                    lineno,
                    format!("{d} feature columns, expected {expected}"),
                ))
            }
            _ => {}
        }
        let features = cols[1..=d]
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| parse_err(name, lineno, format!("bad feature value {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ContentRecord {
            key: cols[0].to_string(),
            features,
            label: cols[d + 1].to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyFile(name.to_string()));
    }
    Ok(out)
}

pub fn parse_cites(path: impl AsRef<Path>) -> Result<CitesFile> {
    let path = path.as_ref();
    parse_cites_str(&read(path)?, &path.display().to_string())
}

pub fn parse_cites_str(text: &str, name: &str) -> Result<CitesFile> {
    let mut file = CitesFile::default();
    for (idx, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [] => file.blank_lines += 1,
            [cited, citing] => file.records.push(CiteRecord {
                cited: cited.to_string(),
                citing: citing.to_string(),
            }),
            _ => {
                return Err(parse_err(
                    name,
                    idx + 1,
                    format!("expected 2 keys, found {}", cols.len()),
                ))
            }
        }
    }
    Ok(file)
}

/// `key TAB text` lines; later duplicates overwrite earlier ones.
pub fn parse_texts(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    parse_texts_str(&read(path)?, &path.display().to_string())
}

pub fn parse_texts_str(text: &str, name: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, text) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(name, idx + 1, "expected key<TAB>text"))?;
        out.insert(key.trim().to_string(), text.trim().to_string());
    }
    Ok(out)
}

/// Builds the graph. Classes are the sorted distinct label strings.
pub fn assemble(
    content: &[ContentRecord],
    cites: &CitesFile,
    semantics: EdgeSemantics,
    texts: Option<&BTreeMap<String, String>>,
) -> Result<(DirectedTag, AssemblyReport)> {
    if content.is_empty() {
        return Err(Error::Empty("no content records".into()));
    }
    let class_names: Vec<String> = content
        .iter()
        .map(|r| r.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut key_index = BTreeMap::new();
    for (i, r) in content.iter().enumerate() {
        if key_index.insert(r.key.as_str(), i).is_some() {
            return Err(Error::Validation(format!("duplicate node key {}", r.key)));
        }
    }

    let nodes = NodeTable {
        keys: content.iter().map(|r| r.key.clone()).collect(),
        texts: content
            .iter()
            .map(|r| {
                texts
                    .and_then(|t| t.get(&r.key).cloned())
                    .unwrap_or_else(|| MISSING_TEXT.to_string())
            })
            .collect(),
        features: content.iter().map(|r| r.features.clone()).collect(),
        labels: content.iter().map(|r| Some(class_index[r.label.as_str()])).collect(),
        class_names: class_names.clone(),
    };

    let mut unknown = 0;
    let mut edges = Vec::with_capacity(cites.records.len());
    for rec in &cites.records {
        match (key_index.get(rec.citing.as_str()), key_index.get(rec.cited.as_str())) {
            (Some(&citing), Some(&cited)) => edges.push(match semantics {
                EdgeSemantics::CitingToCited => (citing, cited),
                EdgeSemantics::CitedToCiting => (cited, citing),
            }),
            _ => unknown += 1,
        }
    }
    let (graph, EdgeStats {
        self_loops,
        duplicates,
        added,
        ..
    }) = DirectedTag::build(nodes, edges)?;
    if added == 0 {
        warn!("graph has no edges; only the singleton tie carries information");
    }
    Ok((
        graph,
        AssemblyReport {
            cite_records: cites.records.len(),
            unknown_keys: unknown,
            self_loops,
            duplicates,
            edges: added,
        },
    ))
}

/// Replaces node features with rows from a `key TAB v1,v2,...` file.
pub fn load_embeddings(path: impl AsRef<Path>, graph: &mut DirectedTag) -> Result<()> {
    let path = path.as_ref();
    let rows = parse_embeddings_str(&read(path)?, &path.display().to_string())?;
    apply_embeddings(graph, rows)
}

pub fn parse_embeddings_str(text: &str, name: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rows = BTreeMap::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(name, lineno, "expected key<TAB>values"))?;
        let v = values
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(name, lineno, format!("bad value {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(parse_err(
                    name,
                    lineno,
                    format!("dimension {} differs from {d}", v.len()),
                ))
            }
            _ => {}
        }
        rows.insert(key.trim().to_string(), v);
    }
    Ok(rows)
}

pub fn apply_embeddings(graph: &mut DirectedTag, mut rows: BTreeMap<String, Vec<f64>>) -> Result<()> {
    let missing: Vec<String> = graph
        .keys()
        .iter()
        .filter(|k| !rows.contains_key(*k))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let features = graph
        .keys()
        .iter()
        .map(|k| rows.remove(k).expect("checked above"))
        .collect();
    graph.set_features(features);
    Ok(())
}

/// Replaces node texts; keys absent from `texts` keep their current text.
pub fn apply_texts(graph: &mut DirectedTag, texts: &BTreeMap<String, String>) {
    let merged = graph
        .keys()
        .iter()
        .zip(graph.texts())
        .map(|(k, t)| texts.get(k).cloned().unwrap_or_else(|| t.clone()))
        .collect();
    graph.set_texts(merged);
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    key: String,
    text: String,
    features: Vec<f64>,
    label: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    schema_version: u32,
    class_names: Vec<String>,
    nodes: Vec<NodeDoc>,
    edges: Vec<[usize; 2]>,
}

/// Serializes to JSON with object keys in sorted order.
pub fn graph_to_json(graph: &DirectedTag) -> Result<String> {
    let doc = GraphDoc {
        schema_version: GRAPH_SCHEMA_VERSION,
        class_names: graph.class_names().to_vec(),
        nodes: (0..graph.num_nodes())
            .map(|v| NodeDoc {
                key: graph.key(v).to_string(),
                text: graph.text(v).to_string(),
                features: graph.features()[v].clone(),
                label: graph.label(v),
            })
            .collect(),
        edges: graph.edges().map(|(u, v)| [u, v]).collect(),
    };
    // Going through Value sorts object keys.
    Ok(serde_json::to_string(&serde_json::to_value(doc)?)?)
}

pub fn graph_from_json(text: &str) -> Result<DirectedTag> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    if doc.schema_version != GRAPH_SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "graph schema version {} unsupported (expected {GRAPH_SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let mut nodes = NodeTable {
        class_names: doc.class_names,
        ..Default::default()
    };
    for n in doc.nodes {
        nodes.keys.push(n.key);
        nodes.texts.push(n.text);
        nodes.features.push(n.features);
        nodes.labels.push(n.label);
    }
    Ok(DirectedTag::build(nodes, doc.edges.into_iter().map(|[u, v]| (u, v)))?.0)
}

pub fn save_graph(graph: &DirectedTag, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph_to_json(graph)?).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<DirectedTag> {
    graph_from_json(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cites(text: &str) -> CitesFile {
        parse_cites_str(text, "t.cites").unwrap()
    }

    #[test]
    fn content_line_maps_fields() {
        let recs = parse_content_str("p1 0 1 0 Theory\n", "t").unwrap();
        assert_eq!(
            recs,
            vec![ContentRecord {
                key: "p1".into(),
                features: vec![0.0, 1.0, 0.0],
                label: "Theory".into()
            }]
        );
    }

    #[test]
    fn content_dimension_change_reports_line() {
        let err = parse_content_str("a 0 1 0 X\nb 0 1 0 1 X\n", "bad.content").unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, "bad.content");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(parse_content_str("\n \n", "e"), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn cites_lines() {
        let f = cites("p2\tp1\n\np3 p1\n");
        assert_eq!(f.records[0], CiteRecord { cited: "p2".into(), citing: "p1".into() });
        assert_eq!(f.records.len(), 2);
        assert_eq!(f.blank_lines, 1);
        let err = parse_cites_str("a b\np2\n", "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn assemble_direction_unknown_and_self_loops() {
        let content = parse_content_str("p1 1 0 A\np2 0 1 B\n", "c").unwrap();
        let (g, rep) = assemble(&content, &cites("p2 p1\n"), EdgeSemantics::CitingToCited, None).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(g.text(0), MISSING_TEXT);

        let (g2, _) = assemble(&content, &cites("p2 p1\n"), EdgeSemantics::CitedToCiting, None).unwrap();
        assert_eq!(g2.edges().collect::<Vec<_>>(), vec![(1, 0)]);

        let (g3, rep3) =
            assemble(&content, &cites("p2 p1\np9 p1\np1 p1\np2 p1\n"), EdgeSemantics::CitingToCited, None)
                .unwrap();
        assert_eq!(g3.num_edges(), 1);
        assert_eq!(rep3.unknown_keys, 1);
        assert_eq!(rep3.self_loops, 1);
        assert_eq!(rep3.duplicates, 1);
        assert_eq!(
            rep3.cite_records - rep3.unknown_keys - rep3.self_loops - rep3.duplicates,
            rep3.edges
        );
        assert_eq!(rep.edges, 1);
    }

    #[test]
    fn embeddings_replace_and_validate() {
        let content = parse_content_str("a 1 A\nb 1 A\nc 1 B\n", "c").unwrap();
        let (mut g, _) = assemble(&content, &CitesFile::default(), EdgeSemantics::default(), None).unwrap();
        let rows = parse_embeddings_str("a\t1,2,3,4\nb\t0,0,0,0\nc\t1,1,1,1\n", "e").unwrap();
        apply_embeddings(&mut g, rows).unwrap();
        assert_eq!(g.feature_dim(), 4);
        assert_eq!(g.features()[0], vec![1.0, 2.0, 3.0, 4.0]);

        let rows = parse_embeddings_str("a\t1,2\nc\t1,1\n", "e").unwrap();
        match apply_embeddings(&mut g, rows) {
            Err(Error::MissingEmbeddings(keys)) => assert_eq!(keys, vec!["b".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_embeddings_str("a\t1,2\nb\t1,2,3\n", "e").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn json_roundtrip_and_sorted_keys() {
        let content = parse_content_str("p1 1 0 A\np2 0.5 1 B\np3 0 0 A\n", "c").unwrap();
        let texts = BTreeMap::from([("p1".to_string(), "hello \"world\"".to_string())]);
        let (g, _) = assemble(&content, &cites("p2 p1\np1 p3\n"), EdgeSemantics::default(), Some(&texts)).unwrap();
        let json = graph_to_json(&g).unwrap();
        assert!(json.starts_with("{\"class_names\""));
        let back = graph_from_json(&json).unwrap();
        assert_eq!(back, g);
        assert_eq!(graph_to_json(&back).unwrap(), json);
    }
}
