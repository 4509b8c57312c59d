//! Interchange formats: GEXF 1.3, GraphML, and edge-list CSV.
//!
//! Writers emit byte-deterministic output (sorted nodes and edges, LF line
//! endings). GEXF and CSV have matching readers so a written graph loads
//! back identically; note CSV is edge-only and cannot carry isolated
//! nodes.

use std::collections::BTreeMap;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::network::TechNetwork;
use crate::{GraphError, Result};

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn node_ids(network: &TechNetwork) -> BTreeMap<&str, usize> {
    network.nodes().enumerate().map(|(i, n)| (n, i)).collect()
}

/// Render as GEXF 1.3 with edge weights and an optional integer community
/// attribute per node.
pub fn to_gexf(network: &TechNetwork, communities: Option<&BTreeMap<String, usize>>) -> String {
    let ids = node_ids(network);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n");
    out.push_str("  <meta>\n    <creator>rate</creator>\n    <description>technology co-occurrence network</description>\n  </meta>\n");
    out.push_str("  <graph defaultedgetype=\"undirected\">\n");
    if communities.is_some() {
        out.push_str("    <attributes class=\"node\">\n");
        out.push_str("      <attribute id=\"0\" title=\"community\" type=\"integer\"/>\n");
        out.push_str("    </attributes>\n");
    }
    out.push_str("    <nodes>\n");
    for (name, id) in &ids {
        let label = xml_escape(name);
        match communities.and_then(|c| c.get(*name)) {
            Some(community) => {
                out.push_str(&format!(
                    "      <node id=\"{id}\" label=\"{label}\">\n        <attvalues>\n          <attvalue for=\"0\" value=\"{community}\"/>\n        </attvalues>\n      </node>\n"
                ));
            }
            None => out.push_str(&format!("      <node id=\"{id}\" label=\"{label}\"/>\n")),
        }
    }
    out.push_str("    </nodes>\n    <edges>\n");
    for (i, (a, b, w)) in network.edges().enumerate() {
        out.push_str(&format!(
            "      <edge id=\"{i}\" source=\"{}\" target=\"{}\" weight=\"{w}\"/>\n",
            ids[a], ids[b]
        ));
    }
    out.push_str("    </edges>\n  </graph>\n</gexf>\n");
    out
}

/// Render as GraphML with a string label key, a long weight key, and an
/// optional int community key.
pub fn to_graphml(network: &TechNetwork, communities: Option<&BTreeMap<String, usize>>) -> String {
    let ids = node_ids(network);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n");
    if communities.is_some() {
        out.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for (name, id) in &ids {
        out.push_str(&format!("    <node id=\"n{id}\">\n"));
        out.push_str(&format!(
            "      <data key=\"label\">{}</data>\n",
            xml_escape(name)
        ));
        if let Some(community) = communities.and_then(|c| c.get(*name)) {
            out.push_str(&format!(
                "      <data key=\"community\">{community}</data>\n"
            ));
        }
        out.push_str("    </node>\n");
    }
    for (i, (a, b, w)) in network.edges().enumerate() {
        out.push_str(&format!(
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">\n      <data key=\"weight\">{w}</data>\n    </edge>\n",
            ids[a], ids[b]
        ));
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Render as a source,target,weight edge list (sorted, LF-terminated).
pub fn to_csv(network: &TechNetwork) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(["source", "target", "weight"])
        .expect("writing to memory cannot fail");
    for (a, b, w) in network.edges() {
        writer
            .write_record([a, b, &w.to_string()])
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("no partial flush on memory"))
        .expect("csv output is UTF-8")
}

fn parse_weight(raw: &str, context: &str) -> Result<u64> {
    if let Ok(w) = raw.parse::<u64>() {
        return Ok(w);
    }
    // Tolerate float spellings of whole numbers ("4.0").
    if let Ok(f) = raw.parse::<f64>() {
        if f.fract() == 0.0 && f >= 0.0 {
            return Ok(f as u64);
        }
    }
    Err(GraphError::Format(format!(
        "{context}: weight {raw:?} is not a non-negative integer"
    )))
}

/// Parse a GEXF document written by [`to_gexf`] (or any GEXF whose nodes
/// carry labels and whose edges reference node ids).
pub fn from_gexf(xml: &str) -> Result<TechNetwork> {
    let mut reader = Reader::from_str(xml);
    let mut labels: BTreeMap<String, String> = BTreeMap::new();
    let mut edges: Vec<(String, String, u64)> = Vec::new();

    loop {
        match reader
            .read_event()
            .map_err(|e| GraphError::Format(format!("gexf: {e}")))?
        {
            Event::Start(tag) | Event::Empty(tag) => {
                let name = tag.name().as_ref().to_owned();
                let mut attrs: BTreeMap<String, String> = BTreeMap::new();
                for attr in tag.attributes() {
                    let attr = attr.map_err(|e| GraphError::Format(format!("gexf: {e}")))?;
                    attrs.insert(
                        attr.key.as_ref().to_owned(),
                        attr.normalized_value(quick_xml::XmlVersion::default())
                            .map_err(|e| GraphError::Format(format!("gexf: {e}")))?
                            .into_owned(),
                    );
                }
                match name.as_str() {
                    "node" => {
                        let id = attrs
                            .get("id")
                            .ok_or_else(|| GraphError::Format("gexf: node without id".into()))?;
                        let label = attrs.get("label").unwrap_or(id);
                        labels.insert(id.clone(), label.clone());
                    }
                    "edge" => {
                        let source = attrs
                            .get("source")
                            .ok_or_else(|| GraphError::Format("gexf: edge without source".into()))?
                            .clone();
                        let target = attrs
                            .get("target")
                            .ok_or_else(|| GraphError::Format("gexf: edge without target".into()))?
                            .clone();
                        let weight = match attrs.get("weight") {
                            Some(raw) => parse_weight(raw, "gexf")?,
                            None => 1,
                        };
                        edges.push((source, target, weight));
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let mut network = TechNetwork::new();
    for label in labels.values() {
        network.add_node(label.clone());
    }
    for (source, target, weight) in edges {
        let a = labels
            .get(&source)
            .ok_or_else(|| GraphError::Format(format!("gexf: edge references unknown node {source:?}")))?;
        let b = labels
            .get(&target)
            .ok_or_else(|| GraphError::Format(format!("gexf: edge references unknown node {target:?}")))?;
        network.increment_edge(a, b, weight)?;
    }
    Ok(network)
}

/// Parse a source,target,weight edge list.
pub fn from_csv(text: &str) -> Result<TechNetwork> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| GraphError::Format(format!("csv: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| GraphError::Format(format!("csv: missing column {name:?}")))
    };
    let (si, ti, wi) = (find("source")?, find("target")?, find("weight")?);

    let mut network = TechNetwork::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GraphError::Format(format!("csv line {}: {e}", line + 2)))?;
        let get = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| GraphError::Format(format!("csv line {}: short record", line + 2)))
        };
        let weight = parse_weight(get(wi)?, &format!("csv line {}", line + 2))?;
        network.increment_edge(get(si)?, get(ti)?, weight)?;
    }
    Ok(network)
}
