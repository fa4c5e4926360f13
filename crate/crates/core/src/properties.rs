//! Cross-module invariants over randomly generated circuits.
//!
//! Circuits are drawn from a seeded ChaCha stream; proptest supplies the
//! seeds, so failures reproduce from the printed seed.

use std::collections::{BTreeMap, HashSet, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lagrangian::{assemble, GeometricPolicy, QuadraticLagrangian, Representation};
use crate::netlist::{parse_netlist, Circuit, Component, ComponentKind, GROUND};
use crate::par::Exec;
use crate::quantize::{diagnose_quantizability, ground_state, legendre_transform, normal_modes, ModeDecomposition};
use crate::simulate::{evolve_gaussian, evolve_modes, initial_state, uniform_times, Quantity, Trajectory};
use crate::topology::{fundamental_loops, passive_loop_deficiency, reduce_circuit, SpanningTree, Topology};

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(rng.random::<f64>())
}

fn random_value(rng: &mut ChaCha8Rng, kind: ComponentKind) -> f64 {
    match kind {
        ComponentKind::Capacitor => log_uniform(rng, 1e-13, 1e-11),
        ComponentKind::Inductor => log_uniform(rng, 1e-10, 1e-8),
    }
}

fn distinct_pair(rng: &mut ChaCha8Rng, nodes: usize) -> (usize, usize) {
    let a = rng.random_range(0..nodes);
    let mut b = rng.random_range(0..nodes - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Connected circuit with arbitrary component kinds (may be unquantizable).
fn random_circuit(seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(2..=6usize);
    let extra = rng.random_range(0..=4usize);
    let mut comps = Vec::new();
    let mut next = [1usize, 1];
    let mut push = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
        let kind = if rng.random_bool(0.5) {
            ComponentKind::Capacitor
        } else {
            ComponentKind::Inductor
        };
        let (prefix, slot) = match kind {
            ComponentKind::Capacitor => ('C', 0),
            ComponentKind::Inductor => ('L', 1),
        };
        let id = format!("{prefix}{}", next[slot]);
        next[slot] += 1;
        let value = random_value(rng, kind);
        comps.push(Component::new(id, kind, value, a.to_string(), b.to_string()));
    };
    for i in 1..nodes {
        let j = rng.random_range(0..i);
        push(&mut rng, i, j);
    }
    for _ in 0..extra {
        let (a, b) = distinct_pair(&mut rng, nodes);
        push(&mut rng, a, b);
    }
    Circuit::new(comps)
}

/// Every node capacitively grounded and every loop inductive: a capacitor
/// spanning tree with inductor chords.
fn random_active_circuit(seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(2..=6usize);
    let mut comps = Vec::new();
    for i in 1..nodes {
        let j = rng.random_range(0..i);
        let v = random_value(&mut rng, ComponentKind::Capacitor);
        comps.push(Component::capacitor(format!("C{i}"), i.to_string(), j.to_string(), v));
    }
    for k in 0..rng.random_range(1..=nodes + 1) {
        let (a, b) = distinct_pair(&mut rng, nodes);
        let v = random_value(&mut rng, ComponentKind::Inductor);
        comps.push(Component::inductor(format!("L{k}"), a.to_string(), b.to_string(), v));
    }
    Circuit::new(comps)
}

fn modes_of(circuit: &Circuit, rep: Representation, policy: &GeometricPolicy) -> ModeDecomposition {
    let topo = Topology::analyze(circuit).unwrap();
    let lag = assemble(circuit, &topo, rep, policy).unwrap().lagrangian;
    normal_modes(&legendre_transform(&lag).unwrap())
}

fn nonzero(m: &ModeDecomposition) -> Vec<f64> {
    m.omegas.iter().copied().filter(|w| *w > 0.0).collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}

/// A random spanning tree: Kruskal over a shuffled component order.
fn random_tree(circuit: &Circuit, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..circuit.components.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut root: Vec<usize> = (0..circuit.nodes.len()).collect();
    fn find(r: &mut [usize], i: usize) -> usize {
        if r[i] != i {
            let top = find(r, r[i]);
            r[i] = top;
        }
        r[i]
    }
    let mut tree = Vec::new();
    for c in order {
        let comp = &circuit.components[c];
        let a = find(&mut root, circuit.node_index(&comp.node_a).unwrap());
        let b = find(&mut root, circuit.node_index(&comp.node_b).unwrap());
        if a != b {
            root[a] = b;
            tree.push(c);
        }
    }
    tree
}

fn min_eigenvalue_ratio(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max == 0.0 {
        0.0
    } else {
        e.min() / max
    }
}

/// Capacitor-connected node clusters that do not contain ground, by BFS.
fn floating_capacitor_clusters(circuit: &Circuit) -> usize {
    let mut seen = HashSet::new();
    let mut clusters = 0;
    for start in std::iter::once(GROUND).chain(circuit.active_nodes()) {
        if !seen.insert(start.to_string()) {
            continue;
        }
        if start != GROUND {
            clusters += 1;
        }
        let mut queue = VecDeque::from([start.to_string()]);
        while let Some(n) = queue.pop_front() {
            for c in circuit.incident(&n).filter(|c| c.is_capacitor()) {
                let other = c.other_end(&n).unwrap().to_string();
                if seen.insert(other.clone()) {
                    queue.push_back(other);
                }
            }
        }
    }
    clusters
}

/// Splits one inductor into a series pair through a new node and one
/// capacitor into a parallel pair; the physics is unchanged.
fn expand(circuit: &Circuit, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = Vec::new();
    let ind: Vec<usize> = (0..circuit.components.len())
        .filter(|&i| circuit.components[i].is_inductor())
        .collect();
    let cap: Vec<usize> = (0..circuit.components.len())
        .filter(|&i| circuit.components[i].is_capacitor())
        .collect();
    let split_l = ind[rng.random_range(0..ind.len())];
    let split_c = cap[rng.random_range(0..cap.len())];
    for (i, c) in circuit.components.iter().enumerate() {
        let f = rng.random_range(0.1..0.9);
        if i == split_l {
            comps.push(Component::inductor("Ls1", &c.node_a, "mid", c.value * f));
            comps.push(Component::inductor("Ls2", "mid", &c.node_b, c.value * (1.0 - f)));
        } else if i == split_c {
            comps.push(Component::capacitor("Cp1", &c.node_a, &c.node_b, c.value * f));
            comps.push(Component::capacitor("Cp2", &c.node_b, &c.node_a, c.value * (1.0 - f)));
        } else {
            comps.push(c.clone());
        }
    }
    Circuit::new(comps)
}

/// Declares as ICs the branch values of a random state, so the ICs are
/// consistent by construction.
fn consistent_ics(circuit: &Circuit, lag: &QuadraticLagrangian, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lag.dim();
    let flux = lag.representation.is_flux_type();
    // Fluxes (Wb) or charges (C) of order 1e-15 give mA / mV scale ICs.
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * 1e-15).collect();
    let rate: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-1.0..1.0) * if flux { 1e-3 } else { 1e-4 })
        .collect();
    let mut out = circuit.clone();
    for b in &lag.branches {
        let ic = match (flux, b.kind) {
            (true, ComponentKind::Inductor) => b.project(&x) / b.value,
            (true, ComponentKind::Capacitor) => b.project(&rate),
            (false, ComponentKind::Capacitor) => b.project(&x) / b.value,
            (false, ComponentKind::Inductor) => b.project(&rate),
        };
        out = out.with_ic(b.component.clone(), ic);
    }
    out
}

fn observed_ics(circuit: &Circuit, traj: &Trajectory) -> BTreeMap<String, (f64, f64)> {
    circuit
        .components
        .iter()
        .map(|c| {
            let q = match c.kind {
                ComponentKind::Capacitor => Quantity::Voltage,
                ComponentKind::Inductor => Quantity::Current,
            };
            (c.id.clone(), (traj.series(&c.id, q).unwrap()[0], circuit.ic(&c.id)))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_netlist_round_trips(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let text = c.to_netlist();
        let parsed = parse_netlist(&text).unwrap();
        prop_assert_eq!(&parsed, &c);
        prop_assert_eq!(parsed.to_netlist(), text.clone());
        prop_assert_eq!(parse_netlist(&text).unwrap(), parsed);
    }

    #[test]
    fn loop_count_is_c_plus_one_minus_n(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        prop_assert_eq!(topo.loops.len(), c.components.len() + 1 - c.nodes.len());
        prop_assert_eq!(topo.tree.tree.len(), c.nodes.len() - 1);
    }

    #[test]
    fn deficiency_does_not_depend_on_the_tree(seed in any::<u64>(), tree_seed in any::<u64>()) {
        let c = random_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        let tree = SpanningTree::from_branches(&c, &random_tree(&c, tree_seed)).unwrap();
        let loops = fundamental_loops(&c, &tree);
        prop_assert_eq!(passive_loop_deficiency(&c, &loops).deficiency, topo.report.loop_deficiency);
    }

    #[test]
    fn reduction_is_idempotent(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let once = reduce_circuit(&c);
        prop_assert_eq!(reduce_circuit(&once), once);
    }

    #[test]
    fn reduction_preserves_the_spectrum(seed in any::<u64>(), split_seed in any::<u64>()) {
        let original = random_active_circuit(seed);
        let expanded = expand(&original, split_seed);
        let reduced = reduce_circuit(&expanded);
        let off = GeometricPolicy::off();
        let want = nonzero(&modes_of(&original, Representation::NodeFlux, &off));
        let got = nonzero(&modes_of(&reduced, Representation::NodeFlux, &off));
        prop_assert_eq!(got.len(), want.len());
        prop_assert!(max_rel(&got, &want) < 1e-9);

        // The expanded circuit has a passive node; augmented, its low modes
        // stay within 1% of the reduced spectrum.
        let augmented = nonzero(&modes_of(&expanded, Representation::NodeFlux, &GeometricPolicy::default()));
        prop_assert!(augmented.len() > want.len());
        prop_assert!(max_rel(&augmented[..want.len()], &want) < 1e-2);
    }

    #[test]
    fn kinetic_and_potential_matrices_are_symmetric_psd(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        for rep in [Representation::NodeFlux, Representation::LoopCharge, Representation::ExtendedNodeFlux] {
            let lag = assemble(&c, &topo, rep, &GeometricPolicy::default()).unwrap().lagrangian;
            prop_assert_eq!(lag.asymmetry(), 0.0);
            prop_assert!(min_eigenvalue_ratio(&lag.m) >= -1e-12);
            prop_assert!(min_eigenvalue_ratio(&lag.k) >= -1e-12);
        }
    }

    #[test]
    fn structural_and_numeric_rank_agree(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        let off = GeometricPolicy::off();
        let node = diagnose_quantizability(&assemble(&c, &topo, Representation::NodeFlux, &off).unwrap().lagrangian);
        prop_assert_eq!(node.null_space.len(), node.numeric_nullity);
        prop_assert_eq!(node.null_space.len(), floating_capacitor_clusters(&c));
        let lp = diagnose_quantizability(&assemble(&c, &topo, Representation::LoopCharge, &off).unwrap().lagrangian);
        prop_assert_eq!(lp.null_space.len(), lp.numeric_nullity);
        prop_assert_eq!(lp.null_space.len(), topo.report.loop_deficiency);
    }

    #[test]
    fn node_assignments_are_ground_gauge_invariant(seed in any::<u64>()) {
        let c = random_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        let lag = assemble(&c, &topo, Representation::NodeFlux, &GeometricPolicy::off()).unwrap().lagrangian;
        for b in &lag.branches {
            let comp = c.component(&b.component).unwrap();
            let grounded = comp.node_a == GROUND || comp.node_b == GROUND;
            prop_assert_eq!(b.coeffs.iter().sum::<i32>() == 0, !grounded);
        }
    }

    #[test]
    fn node_and_loop_spectra_agree(seed in any::<u64>()) {
        let c = random_active_circuit(seed);
        let off = GeometricPolicy::off();
        let a = nonzero(&modes_of(&c, Representation::NodeFlux, &off));
        let b = nonzero(&modes_of(&c, Representation::LoopCharge, &off));
        prop_assert_eq!(a.len(), b.len());
        prop_assert!(max_rel(&a, &b) < 1e-9);
    }

    #[test]
    fn schedules_produce_identical_trajectories(seed in any::<u64>()) {
        let c = random_active_circuit(seed);
        let topo = Topology::analyze(&c).unwrap();
        let lag = assemble(&c, &topo, Representation::NodeFlux, &GeometricPolicy::off()).unwrap().lagrangian;
        let c = consistent_ics(&c, &lag, seed);
        let h = legendre_transform(&lag).unwrap();
        let modes = normal_modes(&h);
        let (x0, p0) = initial_state(&c, &lag).unwrap();
        let times = uniform_times(2e-9, 257);
        let seq = evolve_modes(&h, &modes, &x0, &p0, &times, Exec::Sequential).unwrap();
        let par = evolve_modes(&h, &modes, &x0, &p0, &times, Exec::Parallel).unwrap();
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn initial_conditions_round_trip(seed in any::<u64>(), loop_rep in any::<bool>()) {
        let c = random_active_circuit(seed);
        let rep = if loop_rep { Representation::LoopCharge } else { Representation::NodeFlux };
        let topo = Topology::analyze(&c).unwrap();
        let lag = assemble(&c, &topo, rep, &GeometricPolicy::off()).unwrap().lagrangian;
        let c = consistent_ics(&c, &lag, seed ^ 0x9e37);
        let h = legendre_transform(&lag).unwrap();
        let modes = normal_modes(&h);
        let (x0, p0) = initial_state(&c, &lag).unwrap();
        let traj = evolve_modes(&h, &modes, &x0, &p0, &[0.0], Exec::Sequential).unwrap();
        let obs = observed_ics(&c, &traj);
        for kind in [ComponentKind::Capacitor, ComponentKind::Inductor] {
            let pairs: Vec<(f64, f64)> = c
                .components
                .iter()
                .filter(|comp| comp.kind == kind)
                .map(|comp| obs[&comp.id])
                .collect();
            let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
            for (got, want) in pairs {
                prop_assert!((got - want).abs() <= 1e-9 * scale, "{got:e} vs {want:e}");
            }
        }
    }
}

#[test]
fn series_inductor_voltages_sum_to_the_reduced_voltage() {
    let fig2a = "C1 2 0 2pF\nC2 2 0 4pF\nL3 2 3 1nH\nL4 3 0 3nH\n.ic C1 2mV\n.ic C2 2mV";
    let fig2b = "C 2 0 6pF\nL 2 0 4nH\n.ic C 2mV";
    let run = |text: &str, policy: &GeometricPolicy| {
        let c = parse_netlist(text).unwrap();
        let topo = Topology::analyze(&c).unwrap();
        let lag = assemble(&c, &topo, Representation::NodeFlux, policy)
            .unwrap()
            .lagrangian;
        let h = legendre_transform(&lag).unwrap();
        let modes = normal_modes(&h);
        let (x0, p0) = initial_state(&c, &lag).unwrap();
        // One low-mode period.
        evolve_modes(&h, &modes, &x0, &p0, &uniform_times(0.973e-9, 2001), Exec::default()).unwrap()
    };
    let aug = run(fig2a, &GeometricPolicy::minimal(8.9e-23, 1e-15));
    let reduced = run(fig2b, &GeometricPolicy::off());
    let v = |t: &Trajectory, id: &str| t.series(id, Quantity::Voltage).unwrap().to_vec();
    let sum: Vec<f64> = v(&aug, "L3").iter().zip(v(&aug, "L4")).map(|(a, b)| a + b).collect();
    let target = v(&reduced, "L");
    let scale = target.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dev = sum.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    assert!(dev < 1e-9, "sum rule deviation {dev:e}");
    // The individual voltages do carry the fast mode.
    let l3 = v(&aug, "L3");
    let dev3 = l3
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b / 4.0).abs())
        .fold(0.0, f64::max)
        / scale;
    assert!(dev3 > 1e-3, "L3 deviation {dev3:e}");
}

#[test]
fn extended_low_modes_converge_to_the_reduced_circuit() {
    let fig2a = parse_netlist("C1 2 0 2pF\nC2 2 0 4pF\nL3 2 3 1nH\nL4 3 0 3nH").unwrap();
    let reduced = 1.0 / (4e-9f64 * 6e-12).sqrt();
    // Beyond ~1e-2 the ω² spread exceeds 1e16 and the low mode drops below
    // double-precision resolution of the pencil.
    let errors: Vec<f64> = [1.0, 1e-1, 1e-2]
        .iter()
        .map(|s| {
            let policy = GeometricPolicy::all_pairs(8.9e-20 * s, 1e-15 * s);
            let m = modes_of(&fig2a, Representation::ExtendedNodeFlux, &policy);
            ((m.omegas[0] - reduced) / reduced).abs()
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 1e-8, "{errors:?}");
}

#[test]
fn gaussian_evolution_keeps_mode_uncertainty_products() {
    let c = parse_netlist("C1 2 0 2pF\nC2 2 0 4pF\nL3 2 3 1nH\nL4 3 0 3nH").unwrap();
    let topo = Topology::analyze(&c).unwrap();
    let lag = assemble(&c, &topo, Representation::NodeFlux, &GeometricPolicy::default())
        .unwrap()
        .lagrangian;
    let h = legendre_transform(&lag).unwrap();
    let modes = normal_modes(&h);
    let mut state = ground_state(&modes, &h);
    state.mean = DVector::from_vec(vec![1e-16, -2e-16, 3e-28, 0.0]);
    let before = state.mode_products(&modes, &h);
    for t in [1e-13, 2.5e-10, 3e-9] {
        let after = evolve_gaussian(&state, &h, &modes, t).mode_products(&modes, &h);
        for (a, b) in after.iter().zip(&before) {
            assert!(((a - b) / b).abs() < 1e-12, "{a:e} vs {b:e} at t = {t:e}");
        }
    }
}
