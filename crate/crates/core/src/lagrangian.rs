//! Quadratic Lagrangians `ℒ = ½ẋᵀMẋ − ½xᵀKx` in three coordinate systems.
//!
//! Every representation is described the same way: each branch (a circuit
//! component, or a geometric loop inductance) gets an integer combination of
//! the coordinates, `a`, giving its flux (flux-type coordinates) or charge
//! (charge-type coordinates). For flux coordinates a capacitor stores
//! `½C(aᵀẋ)²` and an inductor `(aᵀx)²/2L`; for charge coordinates the roles
//! swap: an inductor stores `½L(aᵀẋ)²` and a capacitor `(aᵀx)²/2C`.
//!
//! * node flux: one `φ` per non-ground node, `a = e_a − e_b`;
//! * loop charge: one `Q` per fundamental loop, `a_l` = orientation of the
//!   component in loop `l`;
//! * extended node flux: node fluxes plus a loop flux `Φ_l` for every loop that
//!   carries a geometric self-inductance. The chord of such a loop gets
//!   `a = e_a − e_b − e_Φl`, so the signed flux sum around the loop equals
//!   `−Φ_l` instead of zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};

use crate::linalg;
use crate::netlist::{Circuit, Component, ComponentKind, GROUND};
use crate::simulate::Trajectory;
use crate::topology::{FundamentalLoop, Topology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LagrangianError {
    #[error("invalid geometric policy: {0}")]
    InvalidPolicy(String),
    #[error("expected a {expected} trajectory, got {found}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },
    #[error("no series for component `{0}`")]
    MissingSeries(String),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "node")]
    NodeFlux,
    #[serde(rename = "loop")]
    LoopCharge,
    #[serde(rename = "extended")]
    ExtendedNodeFlux,
}

impl Representation {
    /// Coordinates are fluxes (capacitors kinetic) rather than charges.
    pub fn is_flux_type(self) -> bool {
        !matches!(self, Representation::LoopCharge)
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::NodeFlux => "node",
            Representation::LoopCharge => "loop",
            Representation::ExtendedNodeFlux => "extended",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One energy-storing element expressed in the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub component: String,
    pub kind: ComponentKind,
    pub value: f64,
    pub geometric: bool,
    /// Branch flux (or charge) = Σ coeffs[i]·x[i].
    pub coeffs: Vec<i32>,
}

impl Branch {
    pub fn coeff_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.coeffs.len(), self.coeffs.iter().map(|&c| f64::from(c)))
    }

    /// `Σ coeffs[i]·x[i]`.
    pub fn project(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(x)
            .filter(|(c, _)| **c != 0)
            .map(|(&c, v)| f64::from(c) * v)
            .sum()
    }
}

/// Kinetic and potential matrices over labelled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLagrangian {
    pub representation: Representation,
    pub labels: Vec<String>,
    pub m: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub branches: Vec<Branch>,
}

impl QuadraticLagrangian {
    /// Assembles M and K from branch assignments.
    pub fn from_branches(representation: Representation, labels: Vec<String>, branches: Vec<Branch>) -> Self {
        let n = labels.len();
        let mut m = DMatrix::zeros(n, n);
        let mut k = DMatrix::zeros(n, n);
        for b in &branches {
            let a = b.coeff_vector();
            let outer = &a * a.transpose();
            let kinetic = match b.kind {
                ComponentKind::Capacitor => representation.is_flux_type(),
                ComponentKind::Inductor => !representation.is_flux_type(),
            };
            if kinetic {
                m += outer * b.value;
            } else {
                k += outer / b.value;
            }
        }
        QuadraticLagrangian {
            representation,
            labels,
            m,
            k,
            branches,
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn branch(&self, component: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.component == component)
    }

    /// `½ẋᵀMẋ − ½xᵀKx`.
    pub fn value(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> f64 {
        0.5 * xdot.dot(&(&self.m * xdot)) - 0.5 * x.dot(&(&self.k * x))
    }

    /// `∂ℒ/∂ẋ = Mẋ`.
    pub fn momenta(&self, xdot: &DVector<f64>) -> DVector<f64> {
        &self.m * xdot
    }

    /// Largest relative asymmetry of M and K.
    pub fn asymmetry(&self) -> f64 {
        linalg::asymmetry(&self.m).max(linalg::asymmetry(&self.k))
    }

    /// Restriction to the first `n` coordinates (Φ set to zero).
    pub fn restrict(&self, n: usize) -> QuadraticLagrangian {
        let branches = self
            .branches
            .iter()
            .map(|b| Branch {
                coeffs: b.coeffs[..n].to_vec(),
                ..b.clone()
            })
            .collect();
        QuadraticLagrangian {
            representation: self.representation,
            labels: self.labels[..n].to_vec(),
            m: self.m.view((0, 0), (n, n)).into_owned(),
            k: self.k.view((0, 0), (n, n)).into_owned(),
            branches,
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Serialize for QuadraticLagrangian {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Assignment<'a> {
            component: &'a str,
            kind: ComponentKind,
            value: f64,
            #[serde(skip_serializing_if = "std::ops::Not::not")]
            geometric: bool,
            coefficients: BTreeMap<&'a str, i32>,
        }
        #[derive(Serialize)]
        struct Repr<'a> {
            representation: Representation,
            labels: &'a [String],
            #[serde(rename = "M")]
            m: Vec<Vec<f64>>,
            #[serde(rename = "K")]
            k: Vec<Vec<f64>>,
            flux_assignment: Vec<Assignment<'a>>,
        }
        let flux_assignment = self
            .branches
            .iter()
            .map(|b| Assignment {
                component: &b.component,
                kind: b.kind,
                value: b.value,
                geometric: b.geometric,
                coefficients: self
                    .labels
                    .iter()
                    .zip(&b.coeffs)
                    .filter(|(_, c)| **c != 0)
                    .map(|(l, c)| (l.as_str(), *c))
                    .collect(),
            })
            .collect();
        Repr {
            representation: self.representation,
            labels: &self.labels,
            m: rows(&self.m),
            k: rows(&self.k),
            flux_assignment,
        }
        .serialize(serializer)
    }
}

fn node_coeffs(circuit: &Circuit, labels_of: &[String], c: &Component, dim: usize) -> Vec<i32> {
    let mut a = vec![0; dim];
    for (node, sign) in [(&c.node_a, 1), (&c.node_b, -1)] {
        if node != GROUND {
            let idx = labels_of
                .iter()
                .position(|n| n == node)
                .unwrap_or_else(|| panic!("node {node} missing from {:?}", circuit.nodes));
            a[idx] += sign;
        }
    }
    a
}

fn node_labels(circuit: &Circuit) -> (Vec<String>, Vec<String>) {
    let nodes: Vec<String> = circuit.active_nodes().map(str::to_string).collect();
    let labels = nodes.iter().map(|n| format!("phi_{n}")).collect();
    (nodes, labels)
}

/// Node-flux Lagrangian: loop fluxes are held at zero, so every component
/// flux is the difference of its node fluxes.
pub fn node_lagrangian(circuit: &Circuit) -> QuadraticLagrangian {
    let (nodes, labels) = node_labels(circuit);
    let branches = circuit
        .components
        .iter()
        .map(|c| Branch {
            component: c.id.clone(),
            kind: c.kind,
            value: c.value,
            geometric: c.geometric,
            coeffs: node_coeffs(circuit, &nodes, c, nodes.len()),
        })
        .collect();
    QuadraticLagrangian::from_branches(Representation::NodeFlux, labels, branches)
}

/// Loop-charge Lagrangian over the given fundamental loops.
pub fn loop_lagrangian(circuit: &Circuit, loops: &[FundamentalLoop]) -> QuadraticLagrangian {
    loop_lagrangian_with(circuit, loops, &[])
}

fn loop_lagrangian_with(
    circuit: &Circuit,
    loops: &[FundamentalLoop],
    self_inductances: &[LoopInductance],
) -> QuadraticLagrangian {
    let labels = (1..=loops.len()).map(|l| format!("Q_{l}")).collect();
    let mut branches: Vec<Branch> = circuit
        .components
        .iter()
        .enumerate()
        .map(|(ci, c)| Branch {
            component: c.id.clone(),
            kind: c.kind,
            value: c.value,
            geometric: c.geometric,
            coeffs: loops.iter().map(|lp| lp.sign_of(ci)).collect(),
        })
        .collect();
    for lg in self_inductances {
        let mut coeffs = vec![0; loops.len()];
        coeffs[lg.loop_index] = 1;
        branches.push(Branch {
            component: lg.id.clone(),
            kind: ComponentKind::Inductor,
            value: lg.value,
            geometric: true,
            coeffs,
        });
    }
    QuadraticLagrangian::from_branches(Representation::LoopCharge, labels, branches)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometricMode {
    Off,
    /// Just enough geometric components to remove every passive variable.
    #[default]
    Minimal,
    /// A capacitance between every node pair and a self-inductance on every loop.
    #[serde(rename = "allpairs")]
    AllPairs,
}

/// Target of a per-element override.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeometricKey {
    /// Capacitance between two nodes (either order).
    NodePair(String, String),
    /// Self-inductance of a fundamental loop, numbered from 1.
    Loop(usize),
}

/// Which geometric (parasitic) components to add, and their values.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricPolicy {
    pub mode: GeometricMode,
    /// Farads.
    pub default_cg: f64,
    /// Henries.
    pub default_lg: f64,
    pub overrides: BTreeMap<GeometricKey, f64>,
}

impl Default for GeometricPolicy {
    fn default() -> Self {
        GeometricPolicy {
            mode: GeometricMode::Minimal,
            default_cg: 8.9e-20,
            default_lg: 1e-15,
            overrides: BTreeMap::new(),
        }
    }
}

impl GeometricPolicy {
    pub fn off() -> Self {
        GeometricPolicy {
            mode: GeometricMode::Off,
            ..Default::default()
        }
    }

    pub fn minimal(cg: f64, lg: f64) -> Self {
        GeometricPolicy {
            mode: GeometricMode::Minimal,
            default_cg: cg,
            default_lg: lg,
            overrides: BTreeMap::new(),
        }
    }

    pub fn all_pairs(cg: f64, lg: f64) -> Self {
        GeometricPolicy {
            mode: GeometricMode::AllPairs,
            ..Self::minimal(cg, lg)
        }
    }

    pub fn validate(&self) -> Result<(), LagrangianError> {
        if self.mode == GeometricMode::Off {
            return Ok(());
        }
        for (what, v) in [("default_cg", self.default_cg), ("default_lg", self.default_lg)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LagrangianError::InvalidPolicy(format!(
                    "{what} must be positive, got {v:e}"
                )));
            }
        }
        if let Some((key, v)) = self.overrides.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(LagrangianError::InvalidPolicy(format!(
                "override {key:?} must be positive, got {v:e}"
            )));
        }
        Ok(())
    }

    fn cg(&self, a: &str, b: &str) -> f64 {
        let k1 = GeometricKey::NodePair(a.into(), b.into());
        let k2 = GeometricKey::NodePair(b.into(), a.into());
        self.overrides
            .get(&k1)
            .or_else(|| self.overrides.get(&k2))
            .copied()
            .unwrap_or(self.default_cg)
    }

    fn lg(&self, loop_number: usize) -> f64 {
        self.overrides
            .get(&GeometricKey::Loop(loop_number))
            .copied()
            .unwrap_or(self.default_lg)
    }
}

/// A geometric self-inductance attached to a fundamental loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopInductance {
    pub id: String,
    /// Zero-based loop index.
    pub loop_index: usize,
    pub value: f64,
}

/// What augmentation added to the design circuit.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Augmentation {
    pub capacitors: Vec<Component>,
    pub loop_inductances: Vec<LoopInductance>,
}

impl Augmentation {
    pub fn is_empty(&self) -> bool {
        self.capacitors.is_empty() && self.loop_inductances.is_empty()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

fn capacitor_clusters(circuit: &Circuit) -> UnionFind {
    let mut uf = UnionFind::new(circuit.nodes.len());
    for c in circuit.capacitors() {
        let a = circuit.node_index(&c.node_a).expect("terminal");
        let b = circuit.node_index(&c.node_b).expect("terminal");
        uf.union(a, b);
    }
    uf
}

/// Non-ground nodes without a capacitive path to ground, in node order.
pub fn capacitively_floating_nodes(circuit: &Circuit) -> Vec<String> {
    let Some(root) = circuit.node_index(GROUND) else {
        return circuit.nodes.clone();
    };
    let mut uf = capacitor_clusters(circuit);
    let g = uf.find(root);
    (0..circuit.nodes.len())
        .filter(|&i| i != root && uf.find(i) != g)
        .map(|i| circuit.nodes[i].clone())
        .collect()
}

/// Adds geometric capacitors to `circuit` and chooses loop self-inductances.
///
/// *Minimal*: nodes are visited in spanning-tree order; a node that has no
/// capacitive path to ground gets one capacitor to its tree parent (which,
/// being visited earlier, is already capacitively grounded). Then, while the
/// loop inductance matrix is rank deficient, the loop with the largest entry
/// in the first exact null-space witness (lowest index on ties) gets a
/// self-inductance.
///
/// *AllPairs*: one capacitor per unordered node pair and one self-inductance
/// per loop.
pub fn augment_geometric(
    circuit: &Circuit,
    topology: &Topology,
    policy: &GeometricPolicy,
) -> Result<(Circuit, Augmentation), LagrangianError> {
    policy.validate()?;
    let mut aug = Augmentation::default();
    let nodes = &circuit.nodes;
    let geometric_cap = |a: &str, b: &str| {
        let mut c = Component::capacitor(format!("Cg_{a}_{b}"), a, b, policy.cg(a, b));
        c.geometric = true;
        c
    };
    match policy.mode {
        GeometricMode::Off => {}
        GeometricMode::Minimal => {
            let mut uf = capacitor_clusters(circuit);
            let root = circuit.node_index(GROUND).expect("topology requires ground");
            for &node in topology.tree.order.iter().skip(1) {
                if uf.find(node) == uf.find(root) {
                    continue;
                }
                let (parent, _) = topology.tree.parent[node].expect("non-root node");
                aug.capacitors.push(geometric_cap(&nodes[node], &nodes[parent]));
                uf.union(node, parent);
            }
            let inductor_rows = |lgs: &[LoopInductance]| -> Vec<Vec<i64>> {
                let mut rows: Vec<Vec<i64>> = circuit
                    .components
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.is_inductor())
                    .map(|(ci, _)| topology.loops.iter().map(|lp| i64::from(lp.sign_of(ci))).collect())
                    .collect();
                for lg in lgs {
                    let mut r = vec![0; topology.loops.len()];
                    r[lg.loop_index] = 1;
                    rows.push(r);
                }
                rows
            };
            loop {
                let null = linalg::exact_null_space(&inductor_rows(&aug.loop_inductances), topology.loops.len());
                let Some(w) = null.first() else { break };
                let (best, _) = w.iter().enumerate().fold(
                    (0, 0i64),
                    |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
                );
                aug.loop_inductances.push(LoopInductance {
                    id: format!("Lg_{}", best + 1),
                    loop_index: best,
                    value: policy.lg(best + 1),
                });
            }
        }
        GeometricMode::AllPairs => {
            for j in 1..nodes.len() {
                for i in 0..j {
                    aug.capacitors.push(geometric_cap(&nodes[j], &nodes[i]));
                }
            }
            for l in 0..topology.loops.len() {
                aug.loop_inductances.push(LoopInductance {
                    id: format!("Lg_{}", l + 1),
                    loop_index: l,
                    value: policy.lg(l + 1),
                });
            }
        }
    }
    let mut augmented = circuit.clone();
    augmented.components.extend(aug.capacitors.iter().cloned());
    Ok((augmented, aug))
}

/// Extended node-flux Lagrangian: node fluxes plus one loop flux per loop
/// with a geometric self-inductance.
///
/// A geometric capacitor parallel to a design component shares that
/// component's flux assignment (so it sees the loop flux too); any other
/// geometric capacitor is a plain node difference.
pub fn extended_node_lagrangian(
    circuit: &Circuit,
    topology: &Topology,
    policy: &GeometricPolicy,
) -> Result<QuadraticLagrangian, LagrangianError> {
    let (_, aug) = augment_geometric(circuit, topology, policy)?;
    Ok(extended_from_augmentation(circuit, topology, &aug))
}

fn extended_from_augmentation(circuit: &Circuit, topology: &Topology, aug: &Augmentation) -> QuadraticLagrangian {
    let (nodes, mut labels) = node_labels(circuit);
    let phi_loops: Vec<usize> = aug.loop_inductances.iter().map(|lg| lg.loop_index).collect();
    labels.extend(phi_loops.iter().map(|l| format!("Phi_{}", l + 1)));
    let dim = labels.len();
    let phi_slot = |loop_index: usize| phi_loops.iter().position(|&l| l == loop_index).map(|p| nodes.len() + p);

    let mut branches: Vec<Branch> = circuit
        .components
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut coeffs = node_coeffs(circuit, &nodes, c, dim);
            if let Some(l) = topology.loops.iter().position(|lp| lp.chord == ci) {
                if let Some(slot) = phi_slot(l) {
                    coeffs[slot] -= 1;
                }
            }
            Branch {
                component: c.id.clone(),
                kind: c.kind,
                value: c.value,
                geometric: c.geometric,
                coeffs,
            }
        })
        .collect();
    for cg in &aug.capacitors {
        let twin = circuit
            .components
            .iter()
            .zip(&branches)
            .find(|(c, _)| cg.connects(&c.node_a, &c.node_b));
        let coeffs = match twin {
            Some((c, b)) if c.node_a == cg.node_a => b.coeffs.clone(),
            Some((_, b)) => b.coeffs.iter().map(|v| -v).collect(),
            None => node_coeffs(circuit, &nodes, cg, dim),
        };
        branches.push(Branch {
            component: cg.id.clone(),
            kind: ComponentKind::Capacitor,
            value: cg.value,
            geometric: true,
            coeffs,
        });
    }
    for (p, lg) in aug.loop_inductances.iter().enumerate() {
        let mut coeffs = vec![0; dim];
        coeffs[nodes.len() + p] = 1;
        branches.push(Branch {
            component: lg.id.clone(),
            kind: ComponentKind::Inductor,
            value: lg.value,
            geometric: true,
            coeffs,
        });
    }
    QuadraticLagrangian::from_branches(Representation::ExtendedNodeFlux, labels, branches)
}

/// A Lagrangian together with the augmentation that produced it.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub lagrangian: QuadraticLagrangian,
    pub augmentation: Augmentation,
    /// Design circuit plus geometric capacitors.
    pub circuit: Circuit,
}

/// Builds the Lagrangian of `circuit` in `representation` under `policy`.
///
/// Node flux uses the geometric capacitors (self-inductances drop out with
/// the loop fluxes held at zero); loop charge uses the design components plus
/// the loop self-inductances on the M diagonal (a geometric capacitor would
/// add loops the design basis does not have); extended node flux uses both.
pub fn assemble(
    circuit: &Circuit,
    topology: &Topology,
    representation: Representation,
    policy: &GeometricPolicy,
) -> Result<Assembled, LagrangianError> {
    let (augmented, augmentation) = augment_geometric(circuit, topology, policy)?;
    let lagrangian = match representation {
        Representation::NodeFlux => node_lagrangian(&augmented),
        Representation::LoopCharge => loop_lagrangian_with(circuit, &topology.loops, &augmentation.loop_inductances),
        Representation::ExtendedNodeFlux => extended_from_augmentation(circuit, topology, &augmentation),
    };
    Ok(Assembled {
        lagrangian,
        augmentation,
        circuit: augmented,
    })
}

/// Per-component flux (or charge) series, `aᵀx(t)`, keyed by component id.
pub fn branch_series(lagrangian: &QuadraticLagrangian, trajectory: &Trajectory) -> HashMap<String, Vec<f64>> {
    lagrangian
        .branches
        .iter()
        .map(|b| {
            let s = trajectory.coords.iter().map(|x| b.project(x)).collect();
            (b.component.clone(), s)
        })
        .collect()
}

fn series_len(series: &HashMap<String, Vec<f64>>) -> Result<usize, LagrangianError> {
    let mut lens = series.values().map(Vec::len);
    let first = lens.next().unwrap_or(0);
    if let Some(other) = lens.find(|&l| l != first) {
        return Err(LagrangianError::LengthMismatch(first, other));
    }
    Ok(first)
}

/// Signed sum of component fluxes around every fundamental loop.
///
/// Zero when loop fluxes are held constant at zero; `−Φ_l` in the extended
/// representation.
pub fn flux_law_residual(
    circuit: &Circuit,
    loops: &[FundamentalLoop],
    fluxes: &HashMap<String, Vec<f64>>,
) -> Result<Vec<Vec<f64>>, LagrangianError> {
    let len = series_len(fluxes)?;
    loops
        .iter()
        .map(|lp| {
            let mut acc = vec![0.0; len];
            for &(ci, s) in &lp.path {
                let id = &circuit.components[ci].id;
                let series = fluxes
                    .get(id)
                    .ok_or_else(|| LagrangianError::MissingSeries(id.clone()))?;
                for (a, v) in acc.iter_mut().zip(series) {
                    *a += f64::from(s) * v;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Net branch charge leaving every non-ground node (component charge counts
/// as flowing from `node_a` to `node_b`).
pub fn charge_law_residual(
    circuit: &Circuit,
    charges: &HashMap<String, Vec<f64>>,
) -> Result<Vec<(String, Vec<f64>)>, LagrangianError> {
    let len = series_len(charges)?;
    circuit
        .active_nodes()
        .map(|node| {
            let mut acc = vec![0.0; len];
            for c in circuit.incident(node) {
                let series = charges
                    .get(&c.id)
                    .ok_or_else(|| LagrangianError::MissingSeries(c.id.clone()))?;
                let s = if c.node_a == node { 1.0 } else { -1.0 };
                for (a, v) in acc.iter_mut().zip(series) {
                    *a += s * v;
                }
            }
            Ok((node.to_string(), acc))
        })
        .collect()
}

/// Checks that a trajectory was produced in `expected`.
pub fn require_representation(trajectory: &Trajectory, expected: Representation) -> Result<(), LagrangianError> {
    if trajectory.representation != expected {
        return Err(LagrangianError::RepresentationMismatch {
            expected,
            found: trajectory.representation,
        });
    }
    Ok(())
}
