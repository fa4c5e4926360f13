//! Circuit graph analysis: spanning tree, fundamental loops, passive
//! variables and series/parallel reduction.
//!
//! The spanning tree is grown from ground. All nodes reachable through
//! capacitors are absorbed first (breadth first, neighbours in declaration
//! order); only when the capacitor frontier is exhausted does one layer of
//! inductors extend the tree, after which capacitors are preferred again.
//! Inductors therefore end up as chords whenever possible, so that loop
//! fluxes sit on inductive branches.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg;
use crate::netlist::{Circuit, Component, ComponentKind, GROUND};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("circuit has no ground node")]
    NoGround,
    #[error("circuit is disconnected; unreachable nodes: {}", .unreachable.join(", "))]
    Disconnected { unreachable: Vec<String> },
    #[error("invalid spanning tree: {0}")]
    InvalidTree(String),
}

/// A spanning tree rooted at ground, with the parent structure needed to
/// trace tree paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    /// Tree branches (component indices) in the order they were added.
    pub tree: Vec<usize>,
    /// Remaining components in declaration order.
    pub chords: Vec<usize>,
    /// Per node index: the parent node and the tree component leading to it.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Per node index: number of tree branches between the node and ground.
    pub depth: Vec<usize>,
    /// Node indices in the order the tree reached them (ground first).
    pub order: Vec<usize>,
}

impl SpanningTree {
    /// Builds the capacitor-preferred tree described in the module docs.
    pub fn build(circuit: &Circuit) -> Result<Self, TopologyError> {
        let n = circuit.nodes.len();
        let root = circuit.node_index(GROUND).ok_or(TopologyError::NoGround)?;
        let ends: Vec<(usize, usize)> = endpoints(circuit);

        let mut visited = vec![false; n];
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut order = vec![root];
        let mut in_tree = vec![false; circuit.components.len()];
        let mut tree = Vec::new();
        visited[root] = true;

        let mut attach = |comp: usize, from: usize, to: usize, visited: &mut Vec<bool>, order: &mut Vec<usize>| {
            visited[to] = true;
            parent[to] = Some((from, comp));
            depth[to] = depth[from] + 1;
            order.push(to);
            in_tree[comp] = true;
            tree.push(comp);
        };

        let mut cursor = 0;
        loop {
            // Capacitor closure, breadth first over the visit order.
            while cursor < order.len() {
                let node = order[cursor];
                cursor += 1;
                for (ci, comp) in circuit.components.iter().enumerate() {
                    if comp.kind != ComponentKind::Capacitor {
                        continue;
                    }
                    let (a, b) = ends[ci];
                    let other = if a == node {
                        b
                    } else if b == node {
                        a
                    } else {
                        continue;
                    };
                    if !visited[other] {
                        attach(ci, node, other, &mut visited, &mut order);
                    }
                }
            }
            if order.len() == n {
                break;
            }
            // One inductor layer off the current frontier.
            let snapshot = visited.clone();
            let before = order.len();
            for (ci, comp) in circuit.components.iter().enumerate() {
                if comp.kind != ComponentKind::Inductor {
                    continue;
                }
                let (a, b) = ends[ci];
                if snapshot[a] && !visited[b] {
                    attach(ci, a, b, &mut visited, &mut order);
                } else if snapshot[b] && !visited[a] {
                    attach(ci, b, a, &mut visited, &mut order);
                }
            }
            if order.len() == before {
                let unreachable = (0..n)
                    .filter(|&i| !visited[i])
                    .map(|i| circuit.nodes[i].clone())
                    .collect();
                return Err(TopologyError::Disconnected { unreachable });
            }
        }

        let chords = (0..circuit.components.len()).filter(|&c| !in_tree[c]).collect();
        Ok(SpanningTree {
            tree,
            chords,
            parent,
            depth,
            order,
        })
    }

    /// Builds a tree from an explicit set of tree branches.
    pub fn from_branches(circuit: &Circuit, branches: &[usize]) -> Result<Self, TopologyError> {
        let n = circuit.nodes.len();
        let root = circuit.node_index(GROUND).ok_or(TopologyError::NoGround)?;
        if branches.len() + 1 != n {
            return Err(TopologyError::InvalidTree(format!(
                "{} branches for {} nodes",
                branches.len(),
                n
            )));
        }
        let ends = endpoints(circuit);
        let mut in_tree = vec![false; circuit.components.len()];
        for &b in branches {
            if b >= in_tree.len() || in_tree[b] {
                return Err(TopologyError::InvalidTree(format!("bad branch index {b}")));
            }
            in_tree[b] = true;
        }
        let mut visited = vec![false; n];
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut order = vec![root];
        let mut tree = Vec::new();
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            for &b in branches {
                let (a, c) = ends[b];
                let other = if a == node {
                    c
                } else if c == node {
                    a
                } else {
                    continue;
                };
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                parent[other] = Some((node, b));
                depth[other] = depth[node] + 1;
                order.push(other);
                tree.push(b);
                queue.push_back(other);
            }
        }
        if order.len() != n {
            return Err(TopologyError::InvalidTree("branches do not span the circuit".into()));
        }
        let chords = (0..circuit.components.len()).filter(|&c| !in_tree[c]).collect();
        Ok(SpanningTree {
            tree,
            chords,
            parent,
            depth,
            order,
        })
    }

    pub fn tree_ids<'a>(&self, circuit: &'a Circuit) -> Vec<&'a str> {
        self.tree.iter().map(|&i| circuit.components[i].id.as_str()).collect()
    }

    pub fn chord_ids<'a>(&self, circuit: &'a Circuit) -> Vec<&'a str> {
        self.chords.iter().map(|&i| circuit.components[i].id.as_str()).collect()
    }

    /// Tree path from node `from` to node `to`, as (component, sign) steps
    /// where the sign is +1 when the step runs from `node_a` to `node_b`.
    pub fn path(&self, circuit: &Circuit, from: usize, to: usize) -> Vec<(usize, i32)> {
        let mut up = Vec::new();
        let mut down = Vec::new();
        let (mut u, mut v) = (from, to);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                let (p, comp) = self.parent[u].expect("non-root node has a parent");
                let sign = if circuit.components[comp].node_a == circuit.nodes[u] {
                    1
                } else {
                    -1
                };
                up.push((comp, sign));
                u = p;
            } else {
                let (p, comp) = self.parent[v].expect("non-root node has a parent");
                let sign = if circuit.components[comp].node_a == circuit.nodes[p] {
                    1
                } else {
                    -1
                };
                down.push((comp, sign));
                v = p;
            }
        }
        up.extend(down.into_iter().rev());
        up
    }
}

fn endpoints(circuit: &Circuit) -> Vec<(usize, usize)> {
    circuit
        .components
        .iter()
        .map(|c| {
            (
                circuit.node_index(&c.node_a).expect("terminal is a circuit node"),
                circuit.node_index(&c.node_b).expect("terminal is a circuit node"),
            )
        })
        .collect()
}

/// A loop closed by one chord; the chord is traversed `node_a → node_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalLoop {
    pub chord: usize,
    /// (component index, ±1) around the loop, chord first.
    pub path: Vec<(usize, i32)>,
}

impl FundamentalLoop {
    /// Orientation of `component` in this loop, or 0 if it does not take part.
    pub fn sign_of(&self, component: usize) -> i32 {
        self.path.iter().find(|(c, _)| *c == component).map_or(0, |(_, s)| *s)
    }

    pub fn describe(&self, circuit: &Circuit) -> String {
        self.path
            .iter()
            .map(|&(c, s)| format!("{}{}", if s > 0 { '+' } else { '-' }, circuit.components[c].id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// One fundamental loop per chord, in chord order.
pub fn fundamental_loops(circuit: &Circuit, tree: &SpanningTree) -> Vec<FundamentalLoop> {
    tree.chords
        .iter()
        .map(|&chord| {
            let comp = &circuit.components[chord];
            let a = circuit.node_index(&comp.node_a).expect("terminal is a node");
            let b = circuit.node_index(&comp.node_b).expect("terminal is a node");
            let mut path = vec![(chord, 1)];
            path.extend(tree.path(circuit, b, a));
            FundamentalLoop { chord, path }
        })
        .collect()
}

/// Signed loop × component incidence matrix.
pub fn loop_matrix(circuit: &Circuit, loops: &[FundamentalLoop]) -> Vec<Vec<i32>> {
    loops
        .iter()
        .map(|lp| {
            let mut row = vec![0; circuit.components.len()];
            for &(c, s) in &lp.path {
                row[c] = s;
            }
            row
        })
        .collect()
}

/// Non-ground nodes with no capacitor attached.
pub fn passive_nodes(circuit: &Circuit) -> Vec<String> {
    circuit
        .active_nodes()
        .filter(|n| !circuit.incident(n).any(Component::is_capacitor))
        .map(str::to_string)
        .collect()
}

/// Rank deficiency of the loop-space inductance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopDeficiency {
    pub deficiency: usize,
    /// Integer loop combinations carrying no inductor flux.
    pub witnesses: Vec<Vec<i64>>,
}

/// Counts independent loop combinations that thread no inductor.
///
/// The count is `l − rank(P)` with `P` the loop × inductor participation
/// matrix, which equals `l − rank(B diag(L) Bᵀ)` for positive inductances and
/// therefore does not depend on the tree. The exact rational rank is the
/// answer; an SVD rank of the weighted matrix is computed as a cross-check.
pub fn passive_loop_deficiency(circuit: &Circuit, loops: &[FundamentalLoop]) -> LoopDeficiency {
    let inductors: Vec<usize> = (0..circuit.components.len())
        .filter(|&c| circuit.components[c].is_inductor())
        .collect();
    // One row per inductor, one column per loop: its null space holds loop
    // combinations w with Σ_l w_l P_l,i = 0 for every inductor i.
    let rows: Vec<Vec<i64>> = inductors
        .iter()
        .map(|&ind| loops.iter().map(|lp| i64::from(lp.sign_of(ind))).collect())
        .collect();
    let witnesses = linalg::exact_null_space(&rows, loops.len());

    let weighted = DMatrix::from_fn(loops.len(), loops.len(), |i, j| {
        inductors
            .iter()
            .map(|&c| f64::from(loops[i].sign_of(c) * loops[j].sign_of(c)) * circuit.components[c].value)
            .sum::<f64>()
    });
    let numeric = loops.len() - linalg::numeric_rank(&weighted, 1e-12);
    if numeric != witnesses.len() {
        log::warn!(
            "loop deficiency: exact {} vs numeric {} (ill-conditioned inductances?)",
            witnesses.len(),
            numeric
        );
    }
    LoopDeficiency {
        deficiency: witnesses.len(),
        witnesses,
    }
}

/// Summary of the graph analysis, serialized as the `analyze` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub n: usize,
    pub c: usize,
    pub l: usize,
    pub passive_nodes: Vec<String>,
    pub loop_deficiency: usize,
    #[serde(skip)]
    pub loop_witnesses: Vec<Vec<i64>>,
    pub reducible: bool,
}

/// Tree, loop basis and report for one circuit.
#[derive(Debug, Clone)]
pub struct Topology {
    pub tree: SpanningTree,
    pub loops: Vec<FundamentalLoop>,
    pub report: TopologyReport,
}

impl Topology {
    pub fn analyze(circuit: &Circuit) -> Result<Self, TopologyError> {
        let tree = SpanningTree::build(circuit)?;
        let loops = fundamental_loops(circuit, &tree);
        let def = passive_loop_deficiency(circuit, &loops);
        let report = TopologyReport {
            n: circuit.nodes.len(),
            c: circuit.components.len(),
            l: loops.len(),
            passive_nodes: passive_nodes(circuit),
            loop_deficiency: def.deficiency,
            loop_witnesses: def.witnesses,
            reducible: !reduce_circuit_traced(circuit).steps.is_empty(),
        };
        Ok(Topology { tree, loops, report })
    }
}

/// How two components were combined during reduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    /// Same node pair: currents add.
    Parallel,
    /// Through an eliminated node: voltages add.
    Series { eliminated: String },
}

/// One reduction step. Each operand carries its orientation relative to the
/// result (+1 when traversed the same way).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionStep {
    pub combination: Combination,
    pub operands: [(String, i32); 2],
    pub result: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub circuit: Circuit,
    pub steps: Vec<ReductionStep>,
}

/// Series/parallel reduction to a fixpoint.
pub fn reduce_circuit(circuit: &Circuit) -> Circuit {
    reduce_circuit_traced(circuit).circuit
}

/// [`reduce_circuit`] plus the list of combinations performed.
///
/// Parallel same-kind branches are merged first; then passive (capacitor
/// free) degree-2 nodes other than ground are removed by combining their two
/// branches in series. Both rules repeat until neither applies.
pub fn reduce_circuit_traced(circuit: &Circuit) -> Reduction {
    let mut comps = circuit.components.clone();
    let mut ics = circuit.ics.clone();
    let mut steps = Vec::new();
    loop {
        if let Some(step) = merge_parallel(&mut comps, &mut ics) {
            steps.push(step);
            continue;
        }
        if let Some(step) = merge_series(&mut comps, &mut ics) {
            steps.push(step);
            continue;
        }
        break;
    }
    let mut reduced = Circuit::new(comps);
    reduced.ics = ics;
    Reduction {
        circuit: reduced,
        steps,
    }
}

fn orientation(c: &Component, from: &str) -> i32 {
    if c.node_a == from {
        1
    } else {
        -1
    }
}

fn take_ic(ics: &mut std::collections::BTreeMap<String, f64>, id: &str) -> Option<f64> {
    ics.remove(id)
}

fn merge_parallel(
    comps: &mut Vec<Component>,
    ics: &mut std::collections::BTreeMap<String, f64>,
) -> Option<ReductionStep> {
    let (i, j) = (0..comps.len()).find_map(|i| {
        (i + 1..comps.len())
            .find(|&j| comps[i].kind == comps[j].kind && comps[i].connects(&comps[j].node_a, &comps[j].node_b))
            .map(|j| (i, j))
    })?;
    let second = comps.remove(j);
    let first = &comps[i];
    let s2 = orientation(&second, &first.node_a);
    let value = match first.kind {
        ComponentKind::Capacitor => first.value + second.value,
        ComponentKind::Inductor => 1.0 / (1.0 / first.value + 1.0 / second.value),
    };
    let id = format!("{}||{}", first.id, second.id);
    let ic1 = take_ic(ics, &first.id);
    let ic2 = take_ic(ics, &second.id);
    if ic1.is_some() || ic2.is_some() {
        let (v1, v2) = (ic1.unwrap_or(0.0), f64::from(s2) * ic2.unwrap_or(0.0));
        match first.kind {
            // Shared voltage: keep only when consistent.
            ComponentKind::Capacitor => {
                if v1 == v2 {
                    ics.insert(id.clone(), v1);
                } else {
                    log::warn!("dropping inconsistent voltages on {} ∥ {}", first.id, second.id);
                }
            }
            ComponentKind::Inductor => {
                ics.insert(id.clone(), v1 + v2);
            }
        }
    }
    let step = ReductionStep {
        combination: Combination::Parallel,
        operands: [(first.id.clone(), 1), (second.id.clone(), s2)],
        result: id.clone(),
    };
    let merged = &mut comps[i];
    merged.id = id;
    merged.value = value;
    merged.geometric = merged.geometric && second.geometric;
    Some(step)
}

fn merge_series(
    comps: &mut Vec<Component>,
    ics: &mut std::collections::BTreeMap<String, f64>,
) -> Option<ReductionStep> {
    let nodes = Circuit::new(comps.clone()).nodes;
    for node in nodes.iter().filter(|n| *n != GROUND) {
        let incident: Vec<usize> = (0..comps.len())
            .filter(|&c| comps[c].node_a == *node || comps[c].node_b == *node)
            .collect();
        if incident.len() != 2 || incident.iter().any(|&c| comps[c].is_capacitor()) {
            continue;
        }
        let (i, j) = (incident[0], incident[1]);
        let x = comps[i].other_end(node).expect("incident").to_string();
        let y = comps[j].other_end(node).expect("incident").to_string();
        if x == y {
            continue;
        }
        let s1 = orientation(&comps[i], &x);
        let s2 = orientation(&comps[j], node);
        let value = match comps[i].kind {
            ComponentKind::Inductor => comps[i].value + comps[j].value,
            ComponentKind::Capacitor => 1.0 / (1.0 / comps[i].value + 1.0 / comps[j].value),
        };
        let id = format!("{}+{}", comps[i].id, comps[j].id);
        let ic1 = take_ic(ics, &comps[i].id);
        let ic2 = take_ic(ics, &comps[j].id);
        if ic1.is_some() || ic2.is_some() {
            let (v1, v2) = (f64::from(s1) * ic1.unwrap_or(0.0), f64::from(s2) * ic2.unwrap_or(0.0));
            match comps[i].kind {
                // Shared current.
                ComponentKind::Inductor => {
                    if v1 == v2 {
                        ics.insert(id.clone(), v1);
                    } else {
                        log::warn!("dropping inconsistent currents on {} + {}", comps[i].id, comps[j].id);
                    }
                }
                ComponentKind::Capacitor => {
                    ics.insert(id.clone(), v1 + v2);
                }
            }
        }
        let step = ReductionStep {
            combination: Combination::Series {
                eliminated: node.clone(),
            },
            operands: [(comps[i].id.clone(), s1), (comps[j].id.clone(), s2)],
            result: id.clone(),
        };
        let geometric = comps[i].geometric && comps[j].geometric;
        let kind = comps[i].kind;
        comps.remove(j);
        comps[i] = Component {
            id,
            kind,
            value,
            node_a: x,
            node_b: y,
            geometric,
        };
        return Some(step);
    }
    None
}
