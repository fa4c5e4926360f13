//! Netlist parsing, validation and canonical serialization.
//!
//! A netlist is line oriented:
//!
//! ```text
//! # Two tanks sharing node 2
//! C1 2 0 2pF
//! L3 2 3 1nH
//! .ic C1 2mV
//! ```
//!
//! Component ids starting with `C`/`c` are capacitors, `L`/`l` inductors.
//! Node `0` (alias `GND`, any case) is ground. Values take an optional SI
//! prefix (`a f p n u µ m`) and an optional unit letter which must match the
//! component kind (`F`, `H`; `V`, `A` for initial conditions).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Label of the ground node after normalization.
pub const GROUND: &str = "0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    Capacitor,
    Inductor,
}

impl ComponentKind {
    /// Unit letter of the component value.
    pub fn value_unit(self) -> char {
        match self {
            ComponentKind::Capacitor => 'F',
            ComponentKind::Inductor => 'H',
        }
    }

    /// Unit letter of the initial condition (capacitor voltage, inductor current).
    pub fn ic_unit(self) -> char {
        match self {
            ComponentKind::Capacitor => 'V',
            ComponentKind::Inductor => 'A',
        }
    }

    fn from_id(id: &str) -> Option<Self> {
        match id.chars().next()? {
            'C' | 'c' => Some(ComponentKind::Capacitor),
            'L' | 'l' => Some(ComponentKind::Inductor),
            _ => None,
        }
    }
}

/// A two-terminal capacitor or inductor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    /// Farads or Henries.
    pub value: f64,
    pub node_a: String,
    pub node_b: String,
    /// Parasitic component added by augmentation rather than by design.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub geometric: bool,
}

impl Component {
    pub fn new(
        id: impl Into<String>,
        kind: ComponentKind,
        value: f64,
        node_a: impl AsRef<str>,
        node_b: impl AsRef<str>,
    ) -> Self {
        Component {
            id: id.into(),
            kind,
            value,
            node_a: normalize_node(node_a.as_ref()),
            node_b: normalize_node(node_b.as_ref()),
            geometric: false,
        }
    }

    pub fn capacitor(id: impl Into<String>, a: impl AsRef<str>, b: impl AsRef<str>, farads: f64) -> Self {
        Self::new(id, ComponentKind::Capacitor, farads, a, b)
    }

    pub fn inductor(id: impl Into<String>, a: impl AsRef<str>, b: impl AsRef<str>, henries: f64) -> Self {
        Self::new(id, ComponentKind::Inductor, henries, a, b)
    }

    pub fn is_capacitor(&self) -> bool {
        self.kind == ComponentKind::Capacitor
    }

    pub fn is_inductor(&self) -> bool {
        self.kind == ComponentKind::Inductor
    }

    /// True when the component connects `a` and `b` (either orientation).
    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.node_a == a && self.node_b == b) || (self.node_a == b && self.node_b == a)
    }

    /// The terminal opposite `node`, if `node` is one of the terminals.
    pub fn other_end(&self, node: &str) -> Option<&str> {
        if self.node_a == node {
            Some(&self.node_b)
        } else if self.node_b == node {
            Some(&self.node_a)
        } else {
            None
        }
    }
}

/// A lumped-element circuit: nodes, components in declaration order, and
/// optional per-component initial conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    /// Ground first (if present), then integer labels ascending, then named
    /// nodes in order of first appearance.
    pub nodes: Vec<String>,
    pub components: Vec<Component>,
    /// Capacitor voltage (V) or inductor current (A), keyed by component id.
    pub ics: BTreeMap<String, f64>,
}

impl Circuit {
    /// Builds a circuit, deriving the node list from the component terminals.
    pub fn new(components: Vec<Component>) -> Self {
        let mut components = components;
        for c in &mut components {
            c.node_a = normalize_node(&c.node_a);
            c.node_b = normalize_node(&c.node_b);
        }
        let nodes = order_nodes(&components);
        Circuit {
            nodes,
            components,
            ics: BTreeMap::new(),
        }
    }

    pub fn with_ic(mut self, id: impl Into<String>, value: f64) -> Self {
        self.ics.insert(id.into(), value);
        self
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn has_ground(&self) -> bool {
        self.nodes.first().is_some_and(|n| n == GROUND)
    }

    /// Non-ground nodes in node order.
    pub fn active_nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str).filter(|n| *n != GROUND)
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn capacitors(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.is_capacitor())
    }

    pub fn inductors(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.is_inductor())
    }

    /// Declared initial condition of a component, or 0.
    pub fn ic(&self, id: &str) -> f64 {
        self.ics.get(id).copied().unwrap_or(0.0)
    }

    /// Components incident on `node`, in declaration order.
    pub fn incident<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Component> + 'a {
        self.components
            .iter()
            .filter(move |c| c.node_a == node || c.node_b == node)
    }

    /// Canonical netlist text; parsing it yields an equal circuit (up to the
    /// `geometric` flag, which is not part of the text format).
    pub fn to_netlist(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            out.push_str(&format!(
                "{} {} {} {:e}{}\n",
                c.id,
                c.node_a,
                c.node_b,
                c.value,
                c.kind.value_unit()
            ));
        }
        for c in &self.components {
            if let Some(v) = self.ics.get(&c.id) {
                out.push_str(&format!(".ic {} {:e}{}\n", c.id, v, c.kind.ic_unit()));
            }
        }
        out
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_netlist())
    }
}

/// Maps ground aliases to `0` and strips leading zeros from integer labels.
pub fn normalize_node(raw: &str) -> String {
    if raw.eq_ignore_ascii_case("gnd") {
        return GROUND.to_string();
    }
    if !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) {
        let trimmed = raw.trim_start_matches('0');
        return if trimmed.is_empty() {
            GROUND.into()
        } else {
            trimmed.into()
        };
    }
    raw.to_string()
}

fn is_integer_label(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn order_nodes(components: &[Component]) -> Vec<String> {
    let mut ints: Vec<&str> = Vec::new();
    let mut named: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for c in components {
        for n in [c.node_a.as_str(), c.node_b.as_str()] {
            if seen.insert(n) {
                if is_integer_label(n) {
                    ints.push(n);
                } else {
                    named.push(n);
                }
            }
        }
    }
    // Integer labels are normalized (no leading zeros), so (length, text)
    // ordering is numeric ordering without overflow concerns. Ground "0" sorts first.
    ints.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    ints.into_iter().chain(named).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown unit suffix `{suffix}`")]
    UnknownUnit { line: usize, column: usize, suffix: String },
    #[error("line {line}: unit `{found}` does not fit {id} (expected `{expected}`)")]
    UnitMismatch {
        line: usize,
        id: String,
        expected: char,
        found: char,
    },
    #[error("line {line}: duplicate component id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {id} has non-positive value {value:e}")]
    NonPositiveValue { line: usize, id: String, value: f64 },
    #[error("line {line}: {id} connects node `{node}` to itself")]
    SelfLoop { line: usize, id: String, node: String },
    #[error("line {line}: initial condition for unknown component `{id}`")]
    UnknownComponent { line: usize, id: String },
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..i],
                    column: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            column: line[..s].chars().count() + 1,
        });
    }
    tokens
}

/// Parses a magnitude with optional SI prefix and optional unit letter.
/// Returns the value and the unit letter if one was written.
fn parse_value(tok: &Token<'_>, line: usize) -> Result<(f64, Option<char>), NetlistError> {
    let s = tok.text;
    let bytes = s.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i == digits_start || !s[digits_start..i].bytes().any(|b| b.is_ascii_digit()) {
        return Err(NetlistError::Syntax {
            line,
            column: tok.column,
            message: format!("expected a number, found `{s}`"),
        });
    }
    // Exponent only when followed by a digit (optionally signed).
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    let number_text = &s[..i];
    let suffix = &s[i..];
    let suffix_column = tok.column + number_text.chars().count();
    let mut chars = suffix.chars().peekable();
    let prefix_exp: Option<i32> = match chars.peek() {
        Some('a') => Some(-18),
        Some('f') => Some(-15),
        Some('p') => Some(-12),
        Some('n') => Some(-9),
        Some('u') | Some('µ') | Some('μ') => Some(-6),
        Some('m') => Some(-3),
        _ => None,
    };
    if prefix_exp.is_some() {
        chars.next();
    }
    let unit = match chars.next() {
        None => None,
        Some(u @ ('F' | 'H' | 'V' | 'A' | 's')) => Some(u),
        Some(_) => {
            return Err(NetlistError::UnknownUnit {
                line,
                column: suffix_column,
                suffix: suffix.to_string(),
            })
        }
    };
    if chars.next().is_some() {
        return Err(NetlistError::UnknownUnit {
            line,
            column: suffix_column,
            suffix: suffix.to_string(),
        });
    }
    // Fold the prefix into the decimal exponent so that e.g. `3nH` parses to
    // exactly the same double as `3e-9`.
    let (mantissa, exp) = match number_text.find(['e', 'E']) {
        Some(k) => (&number_text[..k], number_text[k + 1..].parse::<i64>().unwrap_or(0)),
        None => (number_text, 0),
    };
    let exp = exp + i64::from(prefix_exp.unwrap_or(0));
    let number: f64 = format!("{mantissa}e{exp}").parse().map_err(|_| NetlistError::Syntax {
        line,
        column: tok.column,
        message: format!("malformed number `{number_text}`"),
    })?;
    Ok((number, unit))
}

/// Parses a single quantity such as `8.9e-20`, `1fH` or `4n` with the
/// netlist's number syntax. A written unit letter must equal `unit`.
pub fn parse_quantity(text: &str, unit: char) -> Result<f64, NetlistError> {
    let tok = Token {
        text: text.trim(),
        column: 1,
    };
    let (value, found) = parse_value(&tok, 1)?;
    match found {
        Some(u) if u != unit => Err(NetlistError::UnitMismatch {
            line: 1,
            id: text.trim().to_string(),
            expected: unit,
            found: u,
        }),
        _ => Ok(value),
    }
}

fn check_node(tok: &Token<'_>, line: usize) -> Result<String, NetlistError> {
    let ok = tok.text.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.');
    if !ok {
        return Err(NetlistError::Syntax {
            line,
            column: tok.column,
            message: format!("invalid node name `{}`", tok.text),
        });
    }
    Ok(normalize_node(tok.text))
}

/// Parses netlist text into a [`Circuit`].
pub fn parse_netlist(text: &str) -> Result<Circuit, NetlistError> {
    let mut components: Vec<Component> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut ic_lines: Vec<(usize, Token<'_>, Token<'_>)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let head = &tokens[0];
        if head.text.starts_with('.') {
            if !head.text.eq_ignore_ascii_case(".ic") {
                return Err(NetlistError::Syntax {
                    line,
                    column: head.column,
                    message: format!("unknown directive `{}`", head.text),
                });
            }
            if tokens.len() != 3 {
                return Err(NetlistError::Syntax {
                    line,
                    column: tokens.get(3).map_or(head.column, |t| t.column),
                    message: "expected `.ic ID value`".into(),
                });
            }
            let value = tokens.pop().expect("len 3");
            let id = tokens.pop().expect("len 3");
            ic_lines.push((line, id, value));
            continue;
        }

        let Some(kind) = ComponentKind::from_id(head.text) else {
            return Err(NetlistError::Syntax {
                line,
                column: head.column,
                message: format!("component id `{}` must start with C or L", head.text),
            });
        };
        if tokens.len() != 4 {
            return Err(NetlistError::Syntax {
                line,
                column: tokens.get(4).map_or(head.column, |t| t.column),
                message: format!("expected `ID node node value`, found {} fields", tokens.len()),
            });
        }
        let id = head.text.to_string();
        let a = check_node(&tokens[1], line)?;
        let b = check_node(&tokens[2], line)?;
        let (value, unit) = parse_value(&tokens[3], line)?;
        if let Some(u) = unit {
            if u != kind.value_unit() {
                return Err(NetlistError::UnitMismatch {
                    line,
                    id,
                    expected: kind.value_unit(),
                    found: u,
                });
            }
        }
        if ids.contains_key(&id) {
            return Err(NetlistError::DuplicateId { line, id });
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(NetlistError::NonPositiveValue { line, id, value });
        }
        if a == b {
            return Err(NetlistError::SelfLoop { line, id, node: a });
        }
        ids.insert(id.clone(), components.len());
        components.push(Component::new(id, kind, value, a, b));
    }

    let mut circuit = Circuit::new(components);
    for (line, id_tok, value_tok) in ic_lines {
        let Some(&idx) = ids.get(id_tok.text) else {
            return Err(NetlistError::UnknownComponent {
                line,
                id: id_tok.text.to_string(),
            });
        };
        let kind = circuit.components[idx].kind;
        let (value, unit) = parse_value(&value_tok, line)?;
        if let Some(u) = unit {
            if u != kind.ic_unit() {
                return Err(NetlistError::UnitMismatch {
                    line,
                    id: id_tok.text.to_string(),
                    expected: kind.ic_unit(),
                    found: u,
                });
            }
        }
        if circuit.ics.insert(id_tok.text.to_string(), value).is_some() {
            return Err(NetlistError::Syntax {
                line,
                column: id_tok.column,
                message: format!("second initial condition for `{}`", id_tok.text),
            });
        }
    }
    Ok(circuit)
}

/// One broken circuit invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SelfLoop {
        id: String,
        node: String,
    },
    NonPositiveValue {
        id: String,
        value: f64,
    },
    DuplicateId {
        id: String,
    },
    MissingGround,
    /// Nodes not reachable from ground (or from the first node without ground).
    Disconnected {
        unreachable: Vec<String>,
    },
    UnknownIcTarget {
        id: String,
    },
    NonFiniteIc {
        id: String,
    },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { id, node } => write!(f, "{id} connects node {node} to itself"),
            Violation::NonPositiveValue { id, value } => {
                write!(f, "{id} has non-positive value {value:e}")
            }
            Violation::DuplicateId { id } => write!(f, "component id {id} is used more than once"),
            Violation::MissingGround => write!(f, "no ground node (0 or GND)"),
            Violation::Disconnected { unreachable } => {
                write!(
                    f,
                    "circuit is disconnected; unreachable nodes: {}",
                    unreachable.join(", ")
                )
            }
            Violation::UnknownIcTarget { id } => {
                write!(f, "initial condition refers to unknown component {id}")
            }
            Violation::NonFiniteIc { id } => write!(f, "initial condition of {id} is not finite"),
            Violation::Empty => write!(f, "circuit has no components"),
        }
    }
}

/// Result of [`validate_circuit`]; empty iff the circuit is valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every circuit invariant and lists the violations.
pub fn validate_circuit(circuit: &Circuit) -> ValidationReport {
    let mut violations = Vec::new();
    if circuit.components.is_empty() {
        violations.push(Violation::Empty);
    }
    let mut seen = HashSet::new();
    for c in &circuit.components {
        if !seen.insert(c.id.as_str()) {
            violations.push(Violation::DuplicateId { id: c.id.clone() });
        }
        if c.node_a == c.node_b {
            violations.push(Violation::SelfLoop {
                id: c.id.clone(),
                node: c.node_a.clone(),
            });
        }
        if !(c.value.is_finite() && c.value > 0.0) {
            violations.push(Violation::NonPositiveValue {
                id: c.id.clone(),
                value: c.value,
            });
        }
    }
    if !circuit.components.is_empty() && !circuit.nodes.iter().any(|n| n == GROUND) {
        violations.push(Violation::MissingGround);
    }
    if let Some(root) = circuit.nodes.first() {
        let reached = reachable(circuit, root);
        let unreachable: Vec<String> = circuit
            .nodes
            .iter()
            .filter(|n| !reached.contains(n.as_str()))
            .cloned()
            .collect();
        if !unreachable.is_empty() {
            violations.push(Violation::Disconnected { unreachable });
        }
    }
    for (id, v) in &circuit.ics {
        if circuit.component(id).is_none() {
            violations.push(Violation::UnknownIcTarget { id: id.clone() });
        } else if !v.is_finite() {
            violations.push(Violation::NonFiniteIc { id: id.clone() });
        }
    }
    ValidationReport { violations }
}

fn reachable<'a>(circuit: &'a Circuit, root: &'a str) -> HashSet<&'a str> {
    let mut seen = HashSet::from([root]);
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        for c in circuit.incident(n) {
            if let Some(o) = c.other_end(n) {
                if seen.insert(o) {
                    stack.push(o);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const FIG2A: &str = "C1 2 0 2pF\nC2 2 0 4pF\nL3 2 3 1nH\nL4 3 0 3nH\n";

    #[test]
    fn parses_single_capacitor() {
        let c = parse_netlist("C1 2 0 2pF").unwrap();
        assert_eq!(c.components, vec![Component::capacitor("C1", "2", "0", 2e-12)]);
    }

    #[test]
    fn parses_inductor_with_ic() {
        let c = parse_netlist("L3 2 3 1nH\n.ic L3 0nA").unwrap();
        let l = &c.components[0];
        assert_eq!(l.kind, ComponentKind::Inductor);
        assert_eq!(l.value, 1e-9);
        assert_eq!(c.ics.get("L3"), Some(&0.0));
    }

    #[test]
    fn fig2a_nodes() {
        let c = parse_netlist(FIG2A).unwrap();
        assert_eq!(c.components.len(), 4);
        assert_eq!(c.nodes, vec!["0", "2", "3"]);
        assert!(validate_circuit(&c).is_valid());
    }

    #[test]
    fn value_forms() {
        let tok = |s| Token { text: s, column: 1 };
        assert_eq!(parse_value(&tok("8.9e-20"), 1).unwrap(), (8.9e-20, None));
        assert_eq!(parse_value(&tok("1e-3V"), 1).unwrap(), (1e-3, Some('V')));
        assert_eq!(parse_value(&tok("2m"), 1).unwrap(), (2e-3, None));
        assert_eq!(parse_value(&tok("-3.5uA"), 1).unwrap(), (-3.5e-6, Some('A')));
        assert_eq!(
            parse_value(&tok("5e"), 1).unwrap_err(),
            NetlistError::UnknownUnit {
                line: 1,
                column: 2,
                suffix: "e".into()
            }
        );
        assert!(matches!(
            parse_value(&tok("2pX"), 1),
            Err(NetlistError::UnknownUnit { .. })
        ));
        assert!(matches!(parse_value(&tok("pF"), 1), Err(NetlistError::Syntax { .. })));
    }

    #[test]
    fn standalone_quantities() {
        assert_eq!(parse_quantity("8.9e-20", 'F').unwrap(), 8.9e-20);
        assert_eq!(parse_quantity(" 1fH ", 'H').unwrap(), 1e-15);
        assert_eq!(parse_quantity("4ns", 's').unwrap(), 4e-9);
        assert!(matches!(
            parse_quantity("1nH", 'F'),
            Err(NetlistError::UnitMismatch { .. })
        ));
        assert!(parse_quantity("x", 's').is_err());
    }

    #[test]
    fn comments_blank_lines_and_ground_alias() {
        let c = parse_netlist("# header\n\nC1 n1 GND 1pF  # trailing\nL1 n1 gnd 1nH\n").unwrap();
        assert_eq!(c.nodes, vec!["0", "n1"]);
        assert_eq!(c.components[0].node_b, "0");
    }

    #[test]
    fn node_ordering() {
        let c = parse_netlist("C1 b 10 1p\nC2 10 2 1p\nC3 2 0 1p\nC4 a b 1p").unwrap();
        assert_eq!(c.nodes, vec!["0", "2", "10", "b", "a"]);
    }

    #[test]
    fn errors() {
        let err = |s| parse_netlist(s).unwrap_err();
        assert!(matches!(
            err("C1 2 0 2pF\nC1 2 0 1pF"),
            NetlistError::DuplicateId { line: 2, .. }
        ));
        assert!(matches!(err("C1 2 0 0pF"), NetlistError::NonPositiveValue { .. }));
        assert!(matches!(err("C1 2 0 -1pF"), NetlistError::NonPositiveValue { .. }));
        assert!(matches!(err("C1 2 2 1pF"), NetlistError::SelfLoop { .. }));
        assert!(matches!(err("C1 2 0 1nH"), NetlistError::UnitMismatch { .. }));
        assert!(matches!(
            err("C1 2 0 1pF\n.ic C1 1mA"),
            NetlistError::UnitMismatch { .. }
        ));
        assert!(matches!(err(".ic C9 1mV"), NetlistError::UnknownComponent { .. }));
        assert!(matches!(
            err("R1 2 0 50"),
            NetlistError::Syntax { line: 1, column: 1, .. }
        ));
        assert!(matches!(err("C1 2 0"), NetlistError::Syntax { .. }));
        assert!(matches!(
            err("C1 2 0 1pF\n  .tran 1n"),
            NetlistError::Syntax { line: 2, column: 3, .. }
        ));
        assert!(matches!(
            err("C1 2 0 1zF"),
            NetlistError::UnknownUnit { line: 1, column: 9, .. }
        ));
    }

    #[test]
    fn validation_reports_breaches() {
        let mut c = parse_netlist(FIG2A).unwrap();
        c.components.push(Component::capacitor("Cx", "2", "2", 1e-12));
        let report = validate_circuit(&c);
        assert_eq!(
            report.violations,
            vec![Violation::SelfLoop {
                id: "Cx".into(),
                node: "2".into()
            }]
        );

        let split = parse_netlist("C1 1 0 1p\nL1 1 0 1n\nC2 2 3 1p\nL2 2 3 1n").unwrap();
        let report = validate_circuit(&split);
        assert_eq!(
            report.violations,
            vec![Violation::Disconnected {
                unreachable: vec!["2".into(), "3".into()]
            }]
        );

        let floating = parse_netlist("C1 1 2 1p\nL1 1 2 1n").unwrap();
        assert!(validate_circuit(&floating)
            .violations
            .contains(&Violation::MissingGround));
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse_netlist("C1 2 0 2pF\nL3 2 3 1nH\nL4 3 0 3nH\n.ic C1 2mV\n.ic L3 1uA").unwrap();
        let text = c.to_netlist();
        assert_eq!(
            text,
            "C1 2 0 2e-12F\nL3 2 3 1e-9H\nL4 3 0 3e-9H\n.ic C1 2e-3V\n.ic L3 1e-6A\n"
        );
        assert_eq!(parse_netlist(&text).unwrap(), c);
    }
}
