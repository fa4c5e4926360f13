//! Initial conditions, time evolution and per-component observables.
//!
//! The primary engine is the exact normal-mode solution: every mode is a
//! harmonic oscillator `y_k(t) = A_k cos(ω_k t + θ_k)`, so samples can be
//! evaluated independently (and in parallel) at any time, with analytic
//! derivatives for voltages and currents. A kick-drift-kick leapfrog
//! integrator is provided as an independent cross-check.

use nalgebra::{DMatrix, DVector};

use crate::lagrangian::{Branch, QuadraticLagrangian, Representation};
use crate::linalg;
use crate::netlist::{Circuit, ComponentKind};
use crate::par::Exec;
use crate::quantize::{mode_to_phase_space, normal_modes, GaussianState, HamiltonianSystem, ModeDecomposition};

/// Relative least-squares residual allowed when fitting initial conditions.
pub const IC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error(
        "inconsistent initial conditions: the declared {what} violate the circuit laws \
         (relative residual {residual:.3e})"
    )]
    InconsistentInitialConditions { what: &'static str, residual: f64 },
    #[error("initial condition for `{0}`, which is not a component of the circuit")]
    UnknownIcTarget(String),
    #[error("time step {dt:e} s exceeds the stability limit {limit:e} s (2π/20ω_max)")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Which quantity of a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Voltage,
    Current,
}

/// Maps component initial conditions to canonical `(x₀, p₀)`.
///
/// Flux coordinates: inductor currents fix branch fluxes (`φ = LI`) and
/// capacitor voltages fix branch flux rates, each solved in the least-squares
/// sense through the flux assignment; `p₀ = Mẋ₀`. Charge coordinates: the
/// dual, with capacitor charges `CV` fixing `x₀` and inductor currents `ẋ₀`.
///
/// Design components are fitted first and must be matched to
/// [`IC_TOLERANCE`]; geometric components are then held at zero voltage and
/// current as far as the remaining freedom allows; anything still free takes
/// the minimum-norm value.
pub fn initial_state(
    circuit: &Circuit,
    lagrangian: &QuadraticLagrangian,
) -> Result<(DVector<f64>, DVector<f64>), SimulateError> {
    if let Some(id) = circuit.ics.keys().find(|id| circuit.component(id).is_none()) {
        return Err(SimulateError::UnknownIcTarget(id.clone()));
    }
    let n = lagrangian.dim();
    let flux = lagrangian.representation.is_flux_type();

    // (design rows, design targets, geometric rows) for positions and rates.
    let mut pos: (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) = Default::default();
    let mut rate: (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) = Default::default();
    for b in &lagrangian.branches {
        let row: Vec<f64> = b.coeffs.iter().map(|&c| f64::from(c)).collect();
        let ic = circuit.ic(&b.component);
        // Positions come from the potential element, rates from the kinetic one.
        let (target, is_position) = match (b.kind, flux) {
            (ComponentKind::Inductor, true) => (b.value * ic, true),
            (ComponentKind::Capacitor, true) => (ic, false),
            (ComponentKind::Capacitor, false) => (b.value * ic, true),
            (ComponentKind::Inductor, false) => (ic, false),
        };
        let bucket = if is_position { &mut pos } else { &mut rate };
        if b.geometric {
            bucket.2.push(row);
        } else {
            bucket.0.push(row);
            bucket.1.push(target);
        }
    }

    let solve = |(rows, targets, geo): (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>), what| {
        let a1 = to_matrix(&rows, n);
        let b1 = DVector::from_vec(targets);
        let a2 = to_matrix(&geo, n);
        let b2 = DVector::zeros(geo.len());
        let ls = linalg::staged_least_squares((&a1, &b1), (&a2, &b2), 1e-12);
        let scale = b1.norm();
        let residual = if scale > 0.0 { ls.residual / scale } else { ls.residual };
        if residual > IC_TOLERANCE {
            return Err(SimulateError::InconsistentInitialConditions { what, residual });
        }
        Ok(ls.solution)
    };
    let x0 = solve(
        pos,
        if flux {
            "inductor currents"
        } else {
            "capacitor voltages"
        },
    )?;
    let v0 = solve(
        rate,
        if flux {
            "capacitor voltages"
        } else {
            "inductor currents"
        },
    )?;
    let p0 = &lagrangian.m * v0;
    Ok((x0, p0))
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Per-mode solution `y_k(t) = A_k cos(ω_k t + θ_k)`; zero modes drift as
/// `y_k(0) + π_k(0)·t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub omega: Vec<f64>,
    y0: Vec<f64>,
    pi0: Vec<f64>,
}

impl ModeSolution {
    /// Projects `(x₀, p₀)` onto the modes: `y = VᵀMx`, `π = Vᵀp`.
    pub fn new(h: &HamiltonianSystem, modes: &ModeDecomposition, x0: &DVector<f64>, p0: &DVector<f64>) -> Self {
        let y0 = modes.modes.transpose() * (&h.m * x0);
        let pi0 = modes.modes.transpose() * p0;
        let mut amplitude = Vec::new();
        let mut phase = Vec::new();
        for (k, &w) in modes.omegas.iter().enumerate() {
            if w > 0.0 {
                let s = pi0[k] / w;
                amplitude.push(y0[k].hypot(s));
                phase.push((-s).atan2(y0[k]));
            } else {
                amplitude.push(0.0);
                phase.push(0.0);
            }
        }
        ModeSolution {
            amplitude,
            phase,
            omega: modes.omegas.clone(),
            y0: y0.iter().copied().collect(),
            pi0: pi0.iter().copied().collect(),
        }
    }

    /// `(y_k, ẏ_k, ÿ_k)` at time `t`.
    pub fn eval(&self, k: usize, t: f64) -> (f64, f64, f64) {
        let w = self.omega[k];
        if w > 0.0 {
            // Expand from (y0, π0) rather than (A, θ): exact at t = 0.
            let (s, c) = (w * t).sin_cos();
            let y = self.y0[k] * c + self.pi0[k] / w * s;
            let yd = -self.y0[k] * w * s + self.pi0[k] * c;
            (y, yd, -w * w * y)
        } else {
            (self.y0[k] + self.pi0[k] * t, self.pi0[k], 0.0)
        }
    }
}

/// Per-component voltage and current series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observables {
    pub components: Vec<String>,
    /// `[component][sample]`, volts.
    pub voltage: Vec<Vec<f64>>,
    /// `[component][sample]`, amperes.
    pub current: Vec<Vec<f64>>,
}

impl Observables {
    pub fn get(&self, component: &str, q: Quantity) -> Option<&[f64]> {
        let i = self.components.iter().position(|c| c == component)?;
        Some(match q {
            Quantity::Voltage => &self.voltage[i],
            Quantity::Current => &self.current[i],
        })
    }
}

/// Sampled evolution. Per-sample vectors are indexed `[sample][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub representation: Representation,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub accelerations: Vec<Vec<f64>>,
    /// `H(t)`, joules.
    pub energy: Vec<f64>,
    pub observables: Observables,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, component: &str, q: Quantity) -> Option<&[f64]> {
        self.observables.get(component, q)
    }

    /// Coordinate `i` over time.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.coords.iter().map(|x| x[i]).collect()
    }

    /// Largest `|H(t) − H(0)| / |H(0)|`.
    pub fn max_energy_error(&self) -> f64 {
        let Some(&e0) = self.energy.first() else { return 0.0 };
        let dev = self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        if e0 == 0.0 {
            dev
        } else {
            dev / e0.abs()
        }
    }

    /// Secular drift of the energy: the mean over the last `window` samples
    /// against the mean over the first `window`, relative to the first.
    ///
    /// A symplectic integrator's energy oscillates at twice the oscillator
    /// frequency with bounded amplitude; averaging over whole periods removes
    /// that oscillation and leaves any systematic growth.
    pub fn energy_drift(&self, window: usize) -> f64 {
        let n = self.energy.len();
        let window = window.clamp(1, n.max(1));
        if n == 0 {
            return 0.0;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let first = mean(&self.energy[..window]);
        let last = mean(&self.energy[n - window..]);
        if first == 0.0 {
            (last - first).abs()
        } else {
            ((last - first) / first).abs()
        }
    }
}

/// Uniform grid `0, Δ, …, t_max` with `samples` points (`[0]` for one sample).
pub fn uniform_times(t_max: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_dim(h: &HamiltonianSystem, v: &DVector<f64>) -> Result<(), SimulateError> {
    if v.len() != h.dim() {
        return Err(SimulateError::DimensionMismatch {
            expected: h.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

struct Sample {
    x: Vec<f64>,
    p: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    energy: f64,
}

/// Exact evolution through the normal modes, evaluated independently at
/// every requested time.
pub fn evolve_modes(
    h: &HamiltonianSystem,
    modes: &ModeDecomposition,
    x0: &DVector<f64>,
    p0: &DVector<f64>,
    times: &[f64],
    exec: Exec,
) -> Result<Trajectory, SimulateError> {
    check_dim(h, x0)?;
    check_dim(h, p0)?;
    let n = h.dim();
    let sol = ModeSolution::new(h, modes, x0, p0);
    let v = &modes.modes;
    let mv = &h.m * v;
    let samples = exec.map_range(times.len(), |i| {
        let t = times[i];
        let mut y = DVector::zeros(n);
        let mut yd = DVector::zeros(n);
        let mut ydd = DVector::zeros(n);
        for k in 0..n {
            let (a, b, c) = sol.eval(k, t);
            y[k] = a;
            yd[k] = b;
            ydd[k] = c;
        }
        let x = v * &y;
        let xd = v * &yd;
        let p = &mv * &yd;
        let xdd = v * &ydd;
        // In mode coordinates the energy is a plain sum of oscillator terms.
        let energy = (0..n)
            .map(|k| 0.5 * (yd[k] * yd[k] + sol.omega[k].powi(2) * y[k] * y[k]))
            .sum();
        Sample {
            x: x.iter().copied().collect(),
            p: p.iter().copied().collect(),
            v: xd.iter().copied().collect(),
            a: xdd.iter().copied().collect(),
            energy,
        }
    });
    Ok(assemble_trajectory(h, times.to_vec(), samples))
}

fn assemble_trajectory(h: &HamiltonianSystem, times: Vec<f64>, samples: Vec<Sample>) -> Trajectory {
    let mut traj = Trajectory {
        representation: h.representation,
        labels: h.labels.clone(),
        times,
        coords: Vec::with_capacity(samples.len()),
        momenta: Vec::with_capacity(samples.len()),
        velocities: Vec::with_capacity(samples.len()),
        accelerations: Vec::with_capacity(samples.len()),
        energy: Vec::with_capacity(samples.len()),
        observables: Observables::default(),
    };
    for s in samples {
        traj.coords.push(s.x);
        traj.momenta.push(s.p);
        traj.velocities.push(s.v);
        traj.accelerations.push(s.a);
        traj.energy.push(s.energy);
    }
    traj.observables = branch_observables(h.representation, &h.branches, &traj);
    traj
}

/// Voltage and current of one branch from `(x, ẋ, ẍ)`.
///
/// Flux coordinates: every branch voltage is the flux rate `aᵀẋ`; inductor
/// current is `aᵀx/L`, capacitor current `C·aᵀẍ`. Charge coordinates: every
/// branch current is `aᵀẋ`; capacitor voltage is `aᵀx/C`, inductor voltage
/// `L·aᵀẍ`.
fn branch_values(rep: Representation, b: &Branch, x: &[f64], xd: &[f64], xdd: &[f64]) -> (f64, f64) {
    let rate = b.project(xd);
    if rep.is_flux_type() {
        let current = match b.kind {
            ComponentKind::Inductor => b.project(x) / b.value,
            ComponentKind::Capacitor => b.value * b.project(xdd),
        };
        (rate, current)
    } else {
        let voltage = match b.kind {
            ComponentKind::Capacitor => b.project(x) / b.value,
            ComponentKind::Inductor => b.value * b.project(xdd),
        };
        (voltage, rate)
    }
}

fn branch_observables(rep: Representation, branches: &[Branch], traj: &Trajectory) -> Observables {
    let mut obs = Observables {
        components: branches.iter().map(|b| b.component.clone()).collect(),
        voltage: vec![Vec::with_capacity(traj.len()); branches.len()],
        current: vec![Vec::with_capacity(traj.len()); branches.len()],
    };
    for i in 0..traj.len() {
        for (j, b) in branches.iter().enumerate() {
            let (v, c) = branch_values(rep, b, &traj.coords[i], &traj.velocities[i], &traj.accelerations[i]);
            obs.voltage[j].push(v);
            obs.current[j].push(c);
        }
    }
    obs
}

/// Per-component voltages and currents of a trajectory, from the same
/// assignments the Lagrangian was built with.
pub fn observables(lagrangian: &QuadraticLagrangian, trajectory: &Trajectory) -> Observables {
    branch_observables(lagrangian.representation, &lagrangian.branches, trajectory)
}

/// Kick-drift-kick leapfrog with step `dt`, recording every `stride` steps
/// (the initial state included).
pub fn evolve_leapfrog(
    h: &HamiltonianSystem,
    x0: &DVector<f64>,
    p0: &DVector<f64>,
    dt: f64,
    steps: usize,
    stride: usize,
) -> Result<Trajectory, SimulateError> {
    check_dim(h, x0)?;
    check_dim(h, p0)?;
    let n = h.dim();
    let omega_max = normal_modes(h).omegas.last().copied().unwrap_or(0.0);
    if omega_max > 0.0 {
        let limit = std::f64::consts::TAU / (20.0 * omega_max);
        if dt > limit {
            return Err(SimulateError::StepTooLarge { dt, limit });
        }
    }
    let stride = stride.max(1);
    // Dense row-major copies: the inner loop runs tens of millions of times
    // for stiff circuits.
    let minv: Vec<f64> = h.minv.transpose().iter().copied().collect();
    let k: Vec<f64> = h.k.transpose().iter().copied().collect();
    let matvec = |m: &[f64], v: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &m[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    };
    let mut x: Vec<f64> = x0.iter().copied().collect();
    let mut p: Vec<f64> = p0.iter().copied().collect();
    let mut force = vec![0.0; n];
    let mut vel = vec![0.0; n];
    let half = 0.5 * dt;

    let record = |x: &[f64], p: &[f64], out: &mut Vec<Sample>| {
        let mut v = vec![0.0; n];
        let mut kx = vec![0.0; n];
        matvec(&minv, p, &mut v);
        matvec(&k, x, &mut kx);
        let mut a = vec![0.0; n];
        matvec(&minv, &kx, &mut a);
        a.iter_mut().for_each(|e| *e = -*e);
        let energy = 0.5 * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
            + 0.5 * x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
        out.push(Sample {
            x: x.to_vec(),
            p: p.to_vec(),
            v,
            a,
            energy,
        });
    };

    let mut samples = Vec::with_capacity(steps / stride + 1);
    let mut times = Vec::with_capacity(steps / stride + 1);
    record(&x, &p, &mut samples);
    times.push(0.0);
    matvec(&k, &x, &mut force);
    for step in 1..=steps {
        for i in 0..n {
            p[i] -= half * force[i];
        }
        matvec(&minv, &p, &mut vel);
        for i in 0..n {
            x[i] += dt * vel[i];
        }
        matvec(&k, &x, &mut force);
        for i in 0..n {
            p[i] -= half * force[i];
        }
        if step % stride == 0 {
            record(&x, &p, &mut samples);
            times.push(step as f64 * dt);
        }
    }
    Ok(assemble_trajectory(h, times, samples))
}

/// `max_t ‖a(t) − b(t)‖_∞ / max_t ‖b(t)‖_∞` over the coordinates of two
/// trajectories sampled at the same times.
pub fn max_relative_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    let scale = b.coords.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = a
        .coords
        .iter()
        .zip(&b.coords)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

/// Analytic phase-space propagator `Φ(t)`: `(x(t), p(t)) = Φ(t)(x₀, p₀)`.
pub fn evolution_matrix(h: &HamiltonianSystem, modes: &ModeDecomposition, t: f64) -> DMatrix<f64> {
    let n = h.dim();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for (k, &w) in modes.omegas.iter().enumerate() {
        if w > 0.0 {
            let (s, c) = (w * t).sin_cos();
            r[(k, k)] = c;
            r[(k, n + k)] = s / w;
            r[(n + k, k)] = -w * s;
            r[(n + k, n + k)] = c;
        } else {
            r[(k, k)] = 1.0;
            r[(k, n + k)] = t;
            r[(n + k, n + k)] = 1.0;
        }
    }
    let t_map = mode_to_phase_space(modes, h);
    // Inverse of blockdiag(V, MV) is blockdiag(VᵀM, Vᵀ) since VᵀMV = I.
    let mut t_inv = DMatrix::zeros(2 * n, 2 * n);
    t_inv
        .view_mut((0, 0), (n, n))
        .copy_from(&(modes.modes.transpose() * &h.m));
    t_inv.view_mut((n, n), (n, n)).copy_from(&modes.modes.transpose());
    t_map * r * t_inv
}

/// Canonical symplectic form `J = [[0, I], [−I, 0]]`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Propagates a Gaussian state: the mean follows the classical equations and
/// the covariance transforms as `ΦΣΦᵀ`.
pub fn evolve_gaussian(
    state: &GaussianState,
    h: &HamiltonianSystem,
    modes: &ModeDecomposition,
    t: f64,
) -> GaussianState {
    let phi = evolution_matrix(h, modes, t);
    let cov = &phi * &state.cov * phi.transpose();
    GaussianState {
        mean: &phi * &state.mean,
        cov: (&cov + cov.transpose()) * 0.5,
        restricted: state.restricted,
    }
}

/// Per-mode amplitude of a weighted sum of component quantities.
///
/// Each quantity is linear in the mode coordinates; within one
/// representation a given quantity is either in phase with `y_k` or with
/// `ẏ_k` for every branch, so the contributions of several branches add
/// coherently mode by mode. Returns one amplitude per mode (zero modes: 0).
pub fn mode_amplitudes(
    h: &HamiltonianSystem,
    modes: &ModeDecomposition,
    sol: &ModeSolution,
    terms: &[(&str, Quantity, f64)],
) -> Vec<f64> {
    let rep = h.representation;
    (0..modes.omegas.len())
        .map(|k| {
            let w = modes.omegas[k];
            if w == 0.0 {
                return 0.0;
            }
            let v: Vec<f64> = modes.modes.column(k).iter().copied().collect();
            let coeff: f64 = terms
                .iter()
                .map(|&(id, q, weight)| {
                    let Some(b) = h.branches.iter().find(|b| b.component == id) else {
                        return 0.0;
                    };
                    let av = b.project(&v);
                    // Factor multiplying y_k (or ẏ_k/ω for rate-type quantities).
                    let f = match (rep.is_flux_type(), q, b.kind) {
                        (true, Quantity::Voltage, _) | (false, Quantity::Current, _) => av * w,
                        (true, Quantity::Current, ComponentKind::Inductor) => av / b.value,
                        (true, Quantity::Current, ComponentKind::Capacitor) => -b.value * av * w * w,
                        (false, Quantity::Voltage, ComponentKind::Capacitor) => av / b.value,
                        (false, Quantity::Voltage, ComponentKind::Inductor) => -b.value * av * w * w,
                    };
                    weight * f
                })
                .sum();
            coeff.abs() * sol.amplitude[k]
        })
        .collect()
}
