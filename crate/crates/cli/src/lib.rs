//! `fluxq` command line: argument model, the four subcommands, and their
//! JSON / CSV / text renderings.
//!
//! Every command is a pure function of the netlist bytes and the flags, so
//! output (and exit status) is reproducible byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use fluxq_core::netlist::{parse_quantity, NetlistError, ValidationReport};
use fluxq_core::quantize::QuantizeError;
use fluxq_core::simulate::{uniform_times, Quantity, SimulateError};
use fluxq_core::topology::{reduce_circuit_traced, Combination, Reduction};
use fluxq_core::{
    assemble, diagnose_quantizability, evolve_modes, ground_state, initial_state, legendre_transform, mode_attribution,
    normal_modes, parse_netlist, validate_circuit, Assembled, Circuit, ComponentKind, Exec, GeometricMode,
    GeometricPolicy, QuantizabilityDiagnosis, Representation, Topology,
};

/// Initial capacitor voltage used when a netlist declares no `.ic` at all.
pub const DEFAULT_CAPACITOR_IC: f64 = 2e-3;

#[derive(Debug, Parser)]
#[command(name = "fluxq", version, about = "Quantize lumped-element LC circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Topology, passive variables and quantizability in each representation.
    Analyze(RunConfig),
    /// Normal-mode frequencies per coordinate and ground-state spreads.
    Modes(RunConfig),
    /// Classical trajectory with per-component voltages and currents.
    Simulate(RunConfig),
    /// Series/parallel reduction of the circuit.
    Reduce(RunConfig),
}

impl Command {
    pub fn config(&self) -> &RunConfig {
        match self {
            Command::Analyze(c) | Command::Modes(c) | Command::Simulate(c) | Command::Reduce(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepArg {
    Node,
    Loop,
    Extended,
}

impl From<RepArg> for Representation {
    fn from(r: RepArg) -> Self {
        match r {
            RepArg::Node => Representation::NodeFlux,
            RepArg::Loop => Representation::LoopCharge,
            RepArg::Extended => Representation::ExtendedNodeFlux,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometricArg {
    Off,
    Minimal,
    Allpairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Netlist file.
    pub netlist: PathBuf,
    /// Coordinates: node fluxes, loop charges, or node plus loop fluxes.
    #[arg(long, value_enum, default_value_t = RepArg::Node)]
    pub rep: RepArg,
    /// Which geometric (parasitic) components to add.
    #[arg(long, value_enum, default_value_t = GeometricArg::Minimal)]
    pub geometric: GeometricArg,
    /// Geometric capacitance, farads (SI prefixes accepted, e.g. 0.089aF).
    #[arg(long, default_value = "8.9e-20", value_parser = farads)]
    pub cg: f64,
    /// Geometric loop self-inductance, henries.
    #[arg(long, default_value = "1e-15", value_parser = henries)]
    pub lg: f64,
    /// Simulation horizon, seconds.
    #[arg(long, default_value = "4e-9", value_parser = seconds)]
    pub tmax: f64,
    /// Number of time samples, including t = 0.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format (default: json for analyze, text for modes and reduce,
    /// csv for simulate).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn policy(&self) -> GeometricPolicy {
        let mode = match self.geometric {
            GeometricArg::Off => GeometricMode::Off,
            GeometricArg::Minimal => GeometricMode::Minimal,
            GeometricArg::Allpairs => GeometricMode::AllPairs,
        };
        GeometricPolicy {
            mode,
            ..GeometricPolicy::minimal(self.cg, self.lg)
        }
    }
}

fn quantity(s: &str, unit: char) -> Result<f64, String> {
    let v = parse_quantity(s, unit).map_err(|e| e.to_string())?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v:e}"))
    }
}

fn farads(s: &str) -> Result<f64, String> {
    quantity(s, 'F')
}

fn henries(s: &str) -> Result<f64, String> {
    quantity(s, 'H')
}

fn seconds(s: &str) -> Result<f64, String> {
    quantity(s, 's')
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] NetlistError),
    #[error("invalid circuit:\n{0}")]
    Validation(ValidationReport),
    #[error("{0}")]
    Unquantizable(Box<QuantizabilityDiagnosis>),
    #[error("{0}")]
    InconsistentInitialConditions(SimulateError),
    #[error(transparent)]
    Internal(#[from] fluxq_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Unquantizable(_) => 3,
            CliError::InconsistentInitialConditions(_) => 4,
            CliError::Usage(_) => 64,
            CliError::Io { .. } => 66,
            CliError::Internal(_) => 70,
        }
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        match e {
            QuantizeError::SingularKineticMatrix(d) => CliError::Unquantizable(d),
            other => CliError::Internal(other.into()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::InconsistentInitialConditions { .. } | SimulateError::UnknownIcTarget(_) => {
                CliError::InconsistentInitialConditions(e)
            }
            other => CliError::Internal(other.into()),
        }
    }
}

/// Reads, parses and validates a netlist.
pub fn load(path: &Path) -> Result<Circuit, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let circuit = parse_netlist(&text)?;
    let report = validate_circuit(&circuit);
    if !report.is_valid() {
        return Err(CliError::Validation(report));
    }
    Ok(circuit)
}

fn topology(circuit: &Circuit) -> Result<Topology, CliError> {
    Topology::analyze(circuit).map_err(|e| CliError::Internal(e.into()))
}

fn build(circuit: &Circuit, topo: &Topology, config: &RunConfig) -> Result<Assembled, CliError> {
    let policy = config.policy();
    policy.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    assemble(circuit, topo, config.rep.into(), &policy).map_err(|e| CliError::Internal(e.into()))
}

fn unsupported(command: &str, format: Format) -> CliError {
    CliError::Usage(format!("`{command}` does not support --format {format:?}").to_lowercase())
}

/// Runs one command and returns its rendered output.
pub fn run(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Analyze(c) => cmd_analyze(c),
        Command::Modes(c) => cmd_modes(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Reduce(c) => cmd_reduce(c),
    }
}

/// Writes `output` to `--out` or standard output.
pub fn emit(config: &RunConfig, output: &str) -> Result<(), CliError> {
    match &config.out {
        Some(path) => std::fs::write(path, output).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{output}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn reduction_json(r: &Reduction) -> Value {
    if r.steps.is_empty() {
        return Value::Null;
    }
    json!({ "netlist": r.circuit.to_netlist(), "steps": r.steps })
}

pub fn cmd_analyze(config: &RunConfig) -> Result<String, CliError> {
    match config.format.unwrap_or(Format::Json) {
        Format::Json => {}
        f => return Err(unsupported("analyze", f)),
    }
    let circuit = load(&config.netlist)?;
    let topo = topology(&circuit)?;
    let off = GeometricPolicy::off();
    let diagnose = |rep| -> Result<QuantizabilityDiagnosis, CliError> {
        let lag = assemble(&circuit, &topo, rep, &off).map_err(|e| CliError::Internal(e.into()))?;
        Ok(diagnose_quantizability(&lag.lagrangian))
    };
    let node = diagnose(Representation::NodeFlux)?;
    let lp = diagnose(Representation::LoopCharge)?;
    let suggested = build(&circuit, &topo, config)?.augmentation;

    let mut out = match serde_json::to_value(&topo.report).expect("report serializes") {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    out.insert(
        "spanning_tree".into(),
        json!({ "tree": topo.tree.tree_ids(&circuit), "chords": topo.tree.chord_ids(&circuit) }),
    );
    out.insert(
        "loops".into(),
        topo.loops
            .iter()
            .map(|l| l.describe(&circuit))
            .collect::<Vec<_>>()
            .into(),
    );
    out.insert(
        "quantizable".into(),
        json!({ "node": node.quantizable, "loop": lp.quantizable }),
    );
    out.insert("diagnosis".into(), json!({ "node": node, "loop": lp }));
    out.insert("reduction".into(), reduction_json(&reduce_circuit_traced(&circuit)));
    out.insert("geometric_augmentation".into(), json!(suggested));
    Ok(pretty(&Value::Object(out)))
}

/// `x` rounded to three significant figures, without exponent below 10⁶.
pub fn three_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..6).contains(&mag) {
        return format!("{x:.2e}");
    }
    let decimals = (2 - mag).max(0) as usize;
    let scale = 10f64.powi(mag - 2);
    let rounded = (x / scale).round() * scale;
    format!("{rounded:.decimals$}")
}

pub fn cmd_modes(config: &RunConfig) -> Result<String, CliError> {
    let format = config.format.unwrap_or(Format::Text);
    if format == Format::Csv {
        return Err(unsupported("modes", format));
    }
    let circuit = load(&config.netlist)?;
    let topo = topology(&circuit)?;
    let assembled = build(&circuit, &topo, config)?;
    let h = legendre_transform(&assembled.lagrangian)?;
    let modes = normal_modes(&h);
    let attribution = mode_attribution(&modes, &h);
    let gs = ground_state(&modes, &h);
    let ghz: Vec<f64> = modes.frequencies_hz().iter().map(|f| f / 1e9).collect();
    let (dx, dp, prod) = (gs.delta_x(), gs.delta_p(), gs.products_over_hbar2(h.hbar));

    if format == Format::Json {
        let per_label =
            |v: &[f64]| -> Map<String, Value> { h.labels.iter().cloned().zip(v.iter().map(|x| json!(x))).collect() };
        let out = json!({
            "representation": h.representation,
            "labels": h.labels,
            "frequencies_ghz": ghz,
            "attribution": attribution
                .iter()
                .map(|(l, w)| json!({ "variable": l, "frequency_ghz": w / std::f64::consts::TAU / 1e9 }))
                .collect::<Vec<_>>(),
            "zero_modes": modes.zero_mode_count,
            "ground_state": {
                "delta_x": per_label(&dx),
                "delta_p": per_label(&dp),
                "products_over_hbar2": per_label(&prod),
                "mode_products_over_hbar2": gs
                    .mode_products(&modes, &h)
                    .iter()
                    .map(|p| p / (h.hbar / 2.0))
                    .collect::<Vec<_>>(),
                "restricted": gs.restricted,
            },
            "geometric_augmentation": assembled.augmentation,
        });
        return Ok(pretty(&out));
    }

    let mut s = String::new();
    let _ = writeln!(s, "representation: {}", h.representation);
    let width = h
        .labels
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("variable".len());
    let _ = writeln!(
        s,
        "{:<width$}  {:>12}  {:>10}  {:>10}  {:>10}",
        "variable", "freq. (GHz)", "delta_x", "delta_p", "dx·dp/(ħ/2)"
    );
    for (i, (label, w)) in attribution.iter().enumerate() {
        let f = w / std::f64::consts::TAU / 1e9;
        let _ = writeln!(
            s,
            "{label:<width$}  {:>12}  {:>10.3e}  {:>10.3e}  {:>10}",
            three_sig(f),
            dx[i],
            dp[i],
            three_sig(prod[i])
        );
    }
    if modes.zero_mode_count > 0 {
        let _ = writeln!(
            s,
            "zero modes: {} (free coordinates, left out of the ground state)",
            modes.zero_mode_count
        );
    }
    Ok(s)
}

/// Circuit with the default initial conditions when it declares none.
pub fn with_default_ics(circuit: &Circuit) -> Circuit {
    if !circuit.ics.is_empty() {
        return circuit.clone();
    }
    circuit.components.iter().fold(circuit.clone(), |c, comp| {
        let v = match comp.kind {
            ComponentKind::Capacitor => DEFAULT_CAPACITOR_IC,
            ComponentKind::Inductor => 0.0,
        };
        c.with_ic(comp.id.clone(), v)
    })
}

/// Column name, summed quantity, and the signed operands.
type SumColumn = (String, Quantity, [(String, f64); 2]);

/// Columns for sums over reduced pairs of original components: voltages of
/// series pairs, currents of parallel pairs, each operand signed by its
/// orientation in the combination.
fn sum_columns(circuit: &Circuit, reduction: &Reduction) -> Vec<SumColumn> {
    reduction
        .steps
        .iter()
        .filter(|s| s.operands.iter().all(|(id, _)| circuit.component(id).is_some()))
        .map(|s| {
            let [(a, sa), (b, sb)] = &s.operands;
            let (q, unit) = match s.combination {
                Combination::Series { .. } => (Quantity::Voltage, 'V'),
                Combination::Parallel => (Quantity::Current, 'A'),
            };
            (
                format!("{a}{b}_sum_{unit}"),
                q,
                [(a.clone(), f64::from(*sa)), (b.clone(), f64::from(*sb))],
            )
        })
        .collect()
}

pub fn cmd_simulate(config: &RunConfig) -> Result<String, CliError> {
    let format = config.format.unwrap_or(Format::Csv);
    if format == Format::Text {
        return Err(unsupported("simulate", format));
    }
    if config.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let circuit = with_default_ics(&load(&config.netlist)?);
    let topo = topology(&circuit)?;
    let assembled = build(&circuit, &topo, config)?;
    let lag = &assembled.lagrangian;
    let h = legendre_transform(lag)?;
    let modes = normal_modes(&h);
    let (x0, p0) = initial_state(&circuit, lag)?;
    let times = uniform_times(config.tmax, config.samples);
    let traj = evolve_modes(&h, &modes, &x0, &p0, &times, Exec::default())?;

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for comp in &circuit.components {
        for (q, unit) in [(Quantity::Voltage, 'V'), (Quantity::Current, 'A')] {
            let series = traj.series(&comp.id, q).expect("design components are observed");
            columns.push((format!("{}_{unit}", comp.id), series.to_vec()));
        }
    }
    for (name, q, terms) in sum_columns(&circuit, &reduce_circuit_traced(&circuit)) {
        let mut acc = vec![0.0; traj.len()];
        for (id, sign) in &terms {
            for (a, v) in acc.iter_mut().zip(traj.series(id, q).expect("operand observed")) {
                *a += sign * v;
            }
        }
        columns.push((name, acc));
    }

    if format == Format::Json {
        let series: Map<String, Value> = columns.into_iter().map(|(k, v)| (k, json!(v))).collect();
        let out = json!({
            "representation": h.representation,
            "t_s": traj.times,
            "series": series,
            "energy_J": traj.energy,
        });
        return Ok(pretty(&out));
    }
    let mut s = String::from("t_s");
    for (name, _) in &columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, t) in traj.times.iter().enumerate() {
        let _ = write!(s, "{t:.16e}");
        for (_, col) in &columns {
            // `+ 0.0` turns −0 into 0 so quiescent columns print uniformly.
            let _ = write!(s, ",{:.16e}", col[i] + 0.0);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn cmd_reduce(config: &RunConfig) -> Result<String, CliError> {
    let circuit = load(&config.netlist)?;
    let reduction = reduce_circuit_traced(&circuit);
    match config.format.unwrap_or(Format::Text) {
        Format::Text => Ok(reduction.circuit.to_netlist()),
        Format::Json => Ok(pretty(&json!({
            "netlist": reduction.circuit.to_netlist(),
            "steps": reduction.steps,
        }))),
        f => Err(unsupported("reduce", f)),
    }
}
