//! Legendre transform, quantizability diagnosis, normal modes and Gaussian
//! ground states.
//!
//! A quadratic Lagrangian can be turned into a Hamiltonian only when its
//! kinetic matrix is invertible. A null vector of M is a coordinate (or a
//! combination) whose conjugate momentum vanishes identically, so no
//! canonical commutator can be imposed on it.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::lagrangian::{Branch, QuadraticLagrangian, Representation};
use crate::linalg;
use crate::netlist::ComponentKind;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054571817e-34;

/// Eigenvalues below this fraction of the largest are zero modes, when the
/// potential has no branch structure to count them exactly.
const ZERO_MODE_TOL: f64 = 1e-12;
/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantizeError {
    #[error("kinetic matrix is singular: {0}")]
    SingularKineticMatrix(Box<QuantizabilityDiagnosis>),
    #[error("kinetic matrix is not numerically positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A kinetic null direction with a human-readable explanation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullDirection {
    /// Coefficients over the coordinate labels.
    pub vector: Vec<f64>,
    pub attribution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizabilityDiagnosis {
    pub representation: Representation,
    pub quantizable: bool,
    pub null_space: Vec<NullDirection>,
    /// Nullity of M from its singular values, as a cross-check.
    pub numeric_nullity: usize,
}

impl fmt::Display for QuantizabilityDiagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.quantizable {
            return write!(f, "{} representation: quantizable", self.representation);
        }
        write!(f, "{} representation: not quantizable", self.representation)?;
        for d in &self.null_space {
            write!(f, "; {}", d.attribution)?;
        }
        Ok(())
    }
}

fn is_kinetic(rep: Representation, b: &Branch) -> bool {
    match b.kind {
        ComponentKind::Capacitor => rep.is_flux_type(),
        ComponentKind::Inductor => !rep.is_flux_type(),
    }
}

fn node_name(label: &str) -> &str {
    label.strip_prefix("phi_").unwrap_or(label)
}

fn signed_combination(labels: &[String], w: &[i64]) -> String {
    labels
        .iter()
        .zip(w)
        .filter(|(_, c)| **c != 0)
        .map(|(l, &c)| match c {
            1 => format!("+{l}"),
            -1 => format!("-{l}"),
            c if c > 0 => format!("+{c}·{l}"),
            c => format!("{c}·{l}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Finds the null space of the kinetic matrix structurally and confirms its
/// dimension from the singular values.
///
/// The kinetic matrix is `Aᵀ diag(w) A` with `A` the integer assignment rows
/// of the kinetic branches and `w > 0`, so `ker M = ker A`, which is computed
/// exactly. For node fluxes the basis is chosen as the indicator vectors of
/// capacitor-connected node clusters that do not reach ground.
pub fn diagnose_quantizability(lagrangian: &QuadraticLagrangian) -> QuantizabilityDiagnosis {
    let rep = lagrangian.representation;
    let n = lagrangian.dim();
    let kinetic_rows: Vec<Vec<i64>> = lagrangian
        .branches
        .iter()
        .filter(|b| is_kinetic(rep, b))
        .map(|b| b.coeffs.iter().map(|&c| i64::from(c)).collect())
        .collect();

    let node_incidence = rep == Representation::NodeFlux
        && kinetic_rows
            .iter()
            .all(|r| r.iter().filter(|c| **c != 0).count() <= 2 && r.iter().sum::<i64>().abs() <= 1);

    let null_space: Vec<NullDirection> = if node_incidence {
        // Union-find over coordinates; index n stands for ground.
        let mut parent: Vec<usize> = (0..=n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        for r in &kinetic_rows {
            let nz: Vec<usize> = (0..n).filter(|&i| r[i] != 0).collect();
            let (a, b) = match nz.as_slice() {
                [a] => (*a, n),
                [a, b] => (*a, *b),
                _ => continue,
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let ground = find(&mut parent, n);
        let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if r == ground {
                continue;
            }
            match clusters.iter_mut().find(|(root, _)| *root == r) {
                Some((_, members)) => members.push(i),
                None => clusters.push((r, vec![i])),
            }
        }
        clusters
            .into_iter()
            .map(|(_, members)| {
                let mut v = vec![0.0; n];
                members.iter().for_each(|&i| v[i] = 1.0);
                let names: Vec<&str> = members.iter().map(|&i| node_name(&lagrangian.labels[i])).collect();
                let attribution = if members.len() == 1 {
                    format!("node {}: no attached capacitance", names[0])
                } else {
                    format!("nodes {}: no capacitive path to ground", names.join(", "))
                };
                NullDirection { vector: v, attribution }
            })
            .collect()
    } else {
        linalg::exact_null_space(&kinetic_rows, n)
            .into_iter()
            .map(|w| {
                let single = w.iter().filter(|c| **c != 0).count() == 1;
                let attribution = match (rep, single) {
                    (Representation::LoopCharge, true) => {
                        let i = w.iter().position(|c| *c != 0).expect("nonzero");
                        format!(
                            "loop {}: no inductance around the loop",
                            lagrangian.labels[i].trim_start_matches("Q_")
                        )
                    }
                    (Representation::LoopCharge, false) => {
                        format!(
                            "loop combination {}: no net inductance",
                            signed_combination(&lagrangian.labels, &w)
                        )
                    }
                    _ => format!("{}: no kinetic energy", signed_combination(&lagrangian.labels, &w)),
                };
                NullDirection {
                    vector: w.iter().map(|&c| c as f64).collect(),
                    attribution,
                }
            })
            .collect()
    };

    let numeric_nullity = if n == 0 {
        0
    } else {
        n - linalg::numeric_rank(&lagrangian.m, RANK_TOL)
    };
    if numeric_nullity != null_space.len() {
        log::warn!(
            "{} representation: structural nullity {} but numeric nullity {}",
            rep,
            null_space.len(),
            numeric_nullity
        );
    }
    QuantizabilityDiagnosis {
        representation: rep,
        quantizable: null_space.is_empty(),
        null_space,
        numeric_nullity,
    }
}

/// `H(x, p) = ½pᵀM⁻¹p + ½xᵀKx` with `p = Mẋ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    pub representation: Representation,
    pub labels: Vec<String>,
    pub m: DMatrix<f64>,
    pub minv: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub hbar: f64,
    pub branches: Vec<Branch>,
}

impl HamiltonianSystem {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn energy(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&(&self.minv * p)) + 0.5 * x.dot(&(&self.k * x))
    }

    /// 2-norm condition number of the kinetic matrix.
    pub fn mass_condition(&self) -> f64 {
        let s = linalg::singular_values(&self.m);
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

/// Legendre transform of a quadratic Lagrangian.
pub fn legendre_transform(lagrangian: &QuadraticLagrangian) -> Result<HamiltonianSystem, QuantizeError> {
    let diagnosis = diagnose_quantizability(lagrangian);
    if !diagnosis.quantizable {
        return Err(QuantizeError::SingularKineticMatrix(Box::new(diagnosis)));
    }
    let m = symmetrize(&lagrangian.m);
    let chol = Cholesky::new(m.clone()).ok_or(QuantizeError::NotPositiveDefinite)?;
    let minv = symmetrize(&chol.inverse());
    Ok(HamiltonianSystem {
        representation: lagrangian.representation,
        labels: lagrangian.labels.clone(),
        m,
        minv,
        k: symmetrize(&lagrangian.k),
        hbar: HBAR,
        branches: lagrangian.branches.clone(),
    })
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Normal modes: `K v = ω² M v`, `VᵀMV = I`, ω ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecomposition {
    /// Angular frequencies, rad/s.
    pub omegas: Vec<f64>,
    /// Mode vectors as columns.
    pub modes: DMatrix<f64>,
    pub zero_mode_count: usize,
}

impl ModeDecomposition {
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w / std::f64::consts::TAU).collect()
    }

    pub fn is_zero_mode(&self, k: usize) -> bool {
        self.omegas[k] == 0.0
    }

    /// Largest relative residual `‖Kv − ω²Mv‖ / (‖K‖‖v‖)` over the modes.
    pub fn residual(&self, h: &HamiltonianSystem) -> f64 {
        let scale = h.k.norm().max(f64::MIN_POSITIVE);
        (0..self.omegas.len())
            .map(|k| {
                let v = self.modes.column(k);
                let r = &h.k * v - (&h.m * v) * self.omegas[k].powi(2);
                r.norm() / (scale * v.norm())
            })
            .fold(0.0, f64::max)
    }

    /// `max |VᵀMV − I|`.
    pub fn orthonormality_error(&self, h: &HamiltonianSystem) -> f64 {
        let g = self.modes.transpose() * &h.m * &self.modes;
        (g - DMatrix::identity(self.omegas.len(), self.omegas.len())).amax()
    }
}

/// Solves the generalized eigenproblem by Cholesky reduction.
///
/// With `M = LLᵀ`, `L⁻¹KL⁻ᵀ u = λu` is a symmetric standard problem; the
/// mode vectors are `v = L⁻ᵀu`. Each eigenvalue is then refined by the
/// Rayleigh quotient in the original matrices, which recovers full relative
/// accuracy for low modes of stiff (strongly separated) spectra.
pub fn normal_modes(h: &HamiltonianSystem) -> ModeDecomposition {
    let n = h.dim();
    if n == 0 {
        return ModeDecomposition {
            omegas: Vec::new(),
            modes: DMatrix::zeros(0, 0),
            zero_mode_count: 0,
        };
    }
    let chol = Cholesky::new(h.m.clone()).expect("Hamiltonian kinetic matrix is positive definite");
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factor is invertible");
    let a = symmetrize(&(&linv * &h.k * linv.transpose()));
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let zero_mode_count = potential_nullity(h).unwrap_or_else(|| {
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        eig.eigenvalues.iter().filter(|&&l| l <= ZERO_MODE_TOL * lmax).count()
    });

    let mut omegas = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    for (rank, &i) in order.iter().enumerate() {
        let mut v = linv.transpose() * eig.eigenvectors.column(i);
        let mass = v.dot(&(&h.m * &v));
        v /= mass.sqrt();
        let lambda = if rank < zero_mode_count {
            0.0
        } else {
            // Rayleigh quotient (mass already normalized to one).
            v.dot(&(&h.k * &v)).max(0.0)
        };
        omegas.push(lambda.sqrt());
        cols.push(v);
    }
    ModeDecomposition {
        omegas,
        modes: DMatrix::from_columns(&cols),
        zero_mode_count,
    }
}

/// Exact nullity of the potential matrix from the integer assignment rows of
/// its branches. A relative eigenvalue cutoff cannot separate a true zero
/// mode from the low mode of a stiff spectrum (ω ratios beyond 10⁶ put λ
/// ratios beyond 10¹²), so the count is structural whenever branches exist.
fn potential_nullity(h: &HamiltonianSystem) -> Option<usize> {
    if h.branches.is_empty() {
        return None;
    }
    let rows: Vec<Vec<i64>> = h
        .branches
        .iter()
        .filter(|b| !is_kinetic(h.representation, b))
        .map(|b| b.coeffs.iter().map(|&c| i64::from(c)).collect())
        .collect();
    Some(h.dim() - linalg::exact_rank(&rows, h.dim()))
}

/// Mean and covariance over `(x₁…xₙ, p₁…pₙ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// True when zero modes were left out (they have no ground state).
    pub restricted: bool,
}

impl GaussianState {
    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    /// Standard deviations of the coordinates.
    pub fn delta_x(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.cov[(i, i)].max(0.0).sqrt()).collect()
    }

    /// Standard deviations of the momenta.
    pub fn delta_p(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.cov[(n + i, n + i)].max(0.0).sqrt()).collect()
    }

    /// `δxᵢ·δpᵢ / (ħ/2)` per coordinate.
    pub fn products_over_hbar2(&self, hbar: f64) -> Vec<f64> {
        self.delta_x()
            .iter()
            .zip(self.delta_p())
            .map(|(dx, dp)| dx * dp / (hbar / 2.0))
            .collect()
    }

    /// Per-mode `δy_k·δπ_k` in mass-normalized mode coordinates
    /// (`y = VᵀMx`, `π = Vᵀp`).
    pub fn mode_products(&self, modes: &ModeDecomposition, h: &HamiltonianSystem) -> Vec<f64> {
        let n = self.dim();
        let v = &modes.modes;
        let sxx = self.cov.view((0, 0), (n, n));
        let spp = self.cov.view((n, n), (n, n));
        let ty = v.transpose() * &h.m;
        let cy = &ty * sxx * ty.transpose();
        let cp = v.transpose() * spp * v;
        (0..n).map(|k| (cy[(k, k)] * cp[(k, k)]).max(0.0).sqrt()).collect()
    }
}

/// Phase-space map from mode coordinates `(y, π)` to `(x, p)`:
/// `x = Vy`, `p = MVπ`.
pub fn mode_to_phase_space(modes: &ModeDecomposition, h: &HamiltonianSystem) -> DMatrix<f64> {
    let n = h.dim();
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&modes.modes);
    t.view_mut((n, n), (n, n)).copy_from(&(&h.m * &modes.modes));
    t
}

/// Gaussian ground state: each oscillating mode holds `⟨y²⟩ = ħ/2ω`,
/// `⟨π²⟩ = ħω/2`; zero modes are left out with a warning.
pub fn ground_state(modes: &ModeDecomposition, h: &HamiltonianSystem) -> GaussianState {
    let n = h.dim();
    let mut diag = DVector::zeros(2 * n);
    for (k, &w) in modes.omegas.iter().enumerate() {
        if w > 0.0 {
            diag[k] = h.hbar / (2.0 * w);
            diag[n + k] = h.hbar * w / 2.0;
        }
    }
    if modes.zero_mode_count > 0 {
        log::warn!(
            "{} zero mode(s) have no ground state; restricting to the oscillating subspace",
            modes.zero_mode_count
        );
    }
    let t = mode_to_phase_space(modes, h);
    let cov = &t * DMatrix::from_diagonal(&diag) * t.transpose();
    GaussianState {
        mean: DVector::zeros(2 * n),
        cov: symmetrize(&cov),
        restricted: modes.zero_mode_count > 0,
    }
}

/// One frequency per coordinate.
///
/// Weights are `|(M^{1/2}V)_{ik}|`. Pairs (coordinate, mode) are taken in
/// order of decreasing weight (ties: lower coordinate, then lower mode) and
/// accepted when both are still free, so every coordinate gets exactly one
/// mode.
pub fn mode_attribution(modes: &ModeDecomposition, h: &HamiltonianSystem) -> Vec<(String, f64)> {
    let n = h.dim();
    let w = linalg::sym_sqrt(&h.m) * &modes.modes;
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| (w[(i, k)].abs(), i, k))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut coord_mode = vec![None; n];
    let mut mode_taken = vec![false; n];
    for (_, i, k) in pairs {
        if coord_mode[i].is_none() && !mode_taken[k] {
            coord_mode[i] = Some(k);
            mode_taken[k] = true;
        }
    }
    h.labels
        .iter()
        .zip(coord_mode)
        .map(|(l, k)| (l.clone(), modes.omegas[k.expect("square assignment")]))
        .collect()
}
