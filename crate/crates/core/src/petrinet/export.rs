//! PNML and Graphviz DOT writers. Output depends only on the net, so equal
//! nets serialize to identical bytes.

use std::fmt::Write;

use super::{AcceptingPetriNet, Arc};

fn xml_escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn dot_escape(raw: &str) -> String {
    raw.replace('\\', "\\\\").replace('"', "\\\"")
}

/// PNML (place/transition core model) with ProM-style final markings;
/// silent transitions carry the `$invisible$` tool-specific marker.
pub fn to_pnml(net: &AcceptingPetriNet) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    s.push_str("  <net id=\"net1\" type=\"http://www.pnml.org/version-2009/grammar/pnmlcoremodel\">\n");
    s.push_str("    <page id=\"n0\">\n");
    for (i, place) in net.places().iter().enumerate() {
        let _ = write!(
            s,
            "      <place id=\"p{i}\">\n        <name><text>{}</text></name>\n",
            xml_escape(&place.name)
        );
        let tokens = net.initial_marking().as_slice()[i];
        if tokens > 0 {
            let _ = writeln!(s, "        <initialMarking><text>{tokens}</text></initialMarking>");
        }
        s.push_str("      </place>\n");
    }
    for (i, t) in net.transitions().iter().enumerate() {
        let name = t.label.as_deref().unwrap_or(&t.name);
        let _ = writeln!(
            s,
            "      <transition id=\"t{i}\">\n        <name><text>{}</text></name>",
            xml_escape(name)
        );
        if t.is_silent() {
            let _ = writeln!(
                s,
                "        <toolspecific tool=\"ProM\" version=\"6.4\" activity=\"$invisible$\" localNodeID=\"t{i}\"/>"
            );
        }
        s.push_str("      </transition>\n");
    }
    for (i, arc) in net.arcs().iter().enumerate() {
        let (src, dst) = match arc {
            Arc::PlaceToTransition(p, t) => (p.to_string(), t.to_string()),
            Arc::TransitionToPlace(t, p) => (t.to_string(), p.to_string()),
        };
        let _ = writeln!(s, "      <arc id=\"a{i}\" source=\"{src}\" target=\"{dst}\"/>");
    }
    s.push_str("    </page>\n    <finalmarkings>\n      <marking>\n");
    for (p, tokens) in net.final_marking().support() {
        let _ = writeln!(
            s,
            "        <place idref=\"{p}\"><text>{tokens}</text></place>"
        );
    }
    s.push_str("      </marking>\n    </finalmarkings>\n  </net>\n</pnml>\n");
    s
}

/// Graphviz rendering: places as circles (token counts shown), visible
/// transitions as labelled boxes, silent transitions as filled black boxes.
pub fn to_dot(net: &AcceptingPetriNet) -> String {
    let mut s = String::from("digraph petrinet {\n  rankdir=LR;\n");
    for (i, place) in net.places().iter().enumerate() {
        let init = net.initial_marking().as_slice()[i];
        let fin = net.final_marking().as_slice()[i];
        let mut label = String::new();
        if init > 0 {
            label = format!("{init}");
        }
        let peripheries = if fin > 0 { 2 } else { 1 };
        let _ = writeln!(
            s,
            "  p{i} [shape=circle, label=\"{label}\", xlabel=\"{}\", peripheries={peripheries}];",
            dot_escape(&place.name)
        );
    }
    for (i, t) in net.transitions().iter().enumerate() {
        match &t.label {
            Some(label) => {
                let _ = writeln!(s, "  t{i} [shape=box, label=\"{}\"];", dot_escape(label));
            }
            None => {
                let _ = writeln!(
                    s,
                    "  t{i} [shape=box, label=\"\", style=filled, fillcolor=black, width=0.15];"
                );
            }
        }
    }
    for arc in net.arcs() {
        let (src, dst) = match arc {
            Arc::PlaceToTransition(p, t) => (p.to_string(), t.to_string()),
            Arc::TransitionToPlace(t, p) => (t.to_string(), p.to_string()),
        };
        let _ = writeln!(s, "  {src} -> {dst};");
    }
    s.push_str("}\n");
    s
}
