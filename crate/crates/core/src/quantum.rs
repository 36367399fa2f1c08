//! Density-matrix model of an intermediate spin-1/2 pair under a resonant
//! microwave pulse.
//!
//! Basis conventions. Product states are ordered |uu>, |ud>, |du>, |dd>.
//! Exchange and secular dipolar coupling mix only the two central states, so
//! the outer product states are exact eigenstates of the static Hamiltonian.
//! Density matrices are stored in the static eigenbasis, ordered so that
//! index 0 is the |uu>-like state, index 3 the |dd>-like state, and 1-2 the
//! mixed central states (descending energy).
//!
//! Microwave convention. `b1` is the amplitude quoted with the hardware
//! (linearly polarised drive); the co-rotating component seen by each spin is
//! half of it, so the drive term is (g_i * GAMMA_PER_G * b1 / 2) * S_x^i and
//! an uncoupled on-resonance spin nutates at g*GAMMA_PER_G*b1/2 rad/us.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::constants::{ns_to_us, GAMMA_PER_G};
use crate::records::{RecordError, TransientMeta, TransientRecord};

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("g-factors must be positive (got g_a={g_a}, g_b={g_b})")]
    InvalidGFactor { g_a: f64, g_b: f64 },
    #[error("static field must be non-negative (got {0} mT)")]
    NegativeField(f64),
    #[error("pulse amplitude must be non-negative (got {0} mT)")]
    NegativeAmplitude(f64),
    #[error("pulse length must be non-negative (got {0} ns)")]
    NegativeTau(f64),
    #[error("Hamiltonian must be symmetric (max asymmetry {0:.3e})")]
    NonSymmetricHamiltonian(f64),
    #[error("density matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),
    #[error("density matrix trace must be 1 (got {0})")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("custom steady-state populations must be non-negative with a positive sum")]
    BadPopulations,
    #[error("central-state denominator vanishes: omega_delta {sign} (J + Dd) = 0")]
    DegenerateCoupling { sign: &'static str },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Static parameters of the pair: g-factors, exchange J and secular dipolar
/// coupling Dd (both rad/us), applied field B0 (mT).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPairParams {
    pub g_a: f64,
    pub g_b: f64,
    pub j: f64,
    pub dd: f64,
    pub b0_mt: f64,
}

impl SpinPairParams {
    pub fn new(g_a: f64, g_b: f64, j: f64, dd: f64, b0_mt: f64) -> Result<Self, QuantumError> {
        if !(g_a > 0.0 && g_b > 0.0) || !g_a.is_finite() || !g_b.is_finite() {
            return Err(QuantumError::InvalidGFactor { g_a, g_b });
        }
        if !(b0_mt >= 0.0) {
            return Err(QuantumError::NegativeField(b0_mt));
        }
        Ok(Self { g_a, g_b, j, dd, b0_mt })
    }

    /// Larmor frequency of spin a, rad/us.
    pub fn larmor_a(&self) -> f64 {
        self.g_a * GAMMA_PER_G * self.b0_mt
    }

    /// Larmor frequency of spin b, rad/us.
    pub fn larmor_b(&self) -> f64 {
        self.g_b * GAMMA_PER_G * self.b0_mt
    }

    /// Signed Larmor separation omega_delta = omega_a - omega_b, rad/us.
    pub fn larmor_separation(&self) -> f64 {
        self.larmor_a() - self.larmor_b()
    }
}

/// One rectangular microwave pulse: amplitude (mT), carrier angular frequency
/// (rad/us), length (ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub b1_mt: f64,
    pub omega: f64,
    pub tau_ns: f64,
}

impl PulseSpec {
    pub fn new(b1_mt: f64, omega: f64, tau_ns: f64) -> Result<Self, QuantumError> {
        if !(b1_mt >= 0.0) {
            return Err(QuantumError::NegativeAmplitude(b1_mt));
        }
        if !(tau_ns >= 0.0) {
            return Err(QuantumError::NegativeTau(tau_ns));
        }
        Ok(Self { b1_mt, omega, tau_ns })
    }
}

// Spin-1/2 pair operators in the product basis (hbar = 1).

fn op_sz_a() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(0.5, 0.5, -0.5, -0.5))
}

fn op_sz_b() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(0.5, -0.5, 0.5, -0.5))
}

fn op_sx_a() -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 2)] = 0.5;
    m[(2, 0)] = 0.5;
    m[(1, 3)] = 0.5;
    m[(3, 1)] = 0.5;
    m
}

fn op_sx_b() -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 1)] = 0.5;
    m[(1, 0)] = 0.5;
    m[(2, 3)] = 0.5;
    m[(3, 2)] = 0.5;
    m
}

/// S_a . S_b (isotropic exchange kernel).
fn op_exchange() -> Matrix4<f64> {
    let mut m = Matrix4::from_diagonal(&Vector4::new(0.25, -0.25, -0.25, 0.25));
    m[(1, 2)] = 0.5;
    m[(2, 1)] = 0.5;
    m
}

/// 2 Sz_a Sz_b - Sx_a Sx_b - Sy_a Sy_b (secular dipolar kernel).
fn op_dipolar() -> Matrix4<f64> {
    let mut m = Matrix4::from_diagonal(&Vector4::new(0.5, -0.5, -0.5, 0.5));
    m[(1, 2)] = -0.5;
    m[(2, 1)] = -0.5;
    m
}

/// Lab-frame static Hamiltonian in the product basis, rad/us.
///
/// H = wa Sz_a + wb Sz_b + J S_a.S_b + Dd (2 Sz_a Sz_b - Sx_a Sx_b - Sy_a Sy_b).
/// All terms are real, so the matrix is real symmetric.
pub fn static_hamiltonian(params: &SpinPairParams) -> Matrix4<f64> {
    params.larmor_a() * op_sz_a()
        + params.larmor_b() * op_sz_b()
        + params.j * op_exchange()
        + params.dd * op_dipolar()
}

/// Rotating-frame Hamiltonian in the product basis, rad/us.
///
/// Zeeman terms become detunings; the drive contributes the co-rotating
/// component (g_i GAMMA_PER_G b1 / 2) S_x^i; exchange and secular dipolar
/// commute with total S_z and pass through unchanged.
pub fn rotating_frame_hamiltonian(params: &SpinPairParams, pulse: &PulseSpec) -> Matrix4<f64> {
    let det_a = params.larmor_a() - pulse.omega;
    let det_b = params.larmor_b() - pulse.omega;
    let w1_a = nutation_rate(params.g_a, pulse.b1_mt);
    let w1_b = nutation_rate(params.g_b, pulse.b1_mt);
    det_a * op_sz_a()
        + det_b * op_sz_b()
        + w1_a * op_sx_a()
        + w1_b * op_sx_b()
        + params.j * op_exchange()
        + params.dd * op_dipolar()
}

/// On-resonance nutation rate of an uncoupled spin, rad/us: g*GAMMA_PER_G*b1/2.
pub fn nutation_rate(g: f64, b1_mt: f64) -> f64 {
    0.5 * g * GAMMA_PER_G * b1_mt
}

/// Quasistatic local-field offsets for the two spins, as Zeeman shifts in
/// rad/us. Disorder shifts each spin's precession in both the lab and the
/// rotating frame while leaving its drive coupling untouched (the local
/// field adds to B0, not to B1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalOffsets {
    pub zeeman_a: f64,
    pub zeeman_b: f64,
}

impl LocalOffsets {
    fn operator(&self) -> Matrix4<f64> {
        self.zeeman_a * op_sz_a() + self.zeeman_b * op_sz_b()
    }
}

/// Eigenbasis of the static Hamiltonian with the crate's slot ordering:
/// 0 = |uu>-like, 3 = |dd>-like, 1-2 = central states by descending energy.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticBasis {
    /// Orthogonal change of basis; column k is eigenvector k in the product basis.
    u: Matrix4<f64>,
    energies: Vector4<f64>,
}

impl StaticBasis {
    pub fn new(params: &SpinPairParams) -> Self {
        Self::from_hamiltonian(&static_hamiltonian(params))
    }

    /// Basis of an explicit static Hamiltonian (product basis, rad/us).
    /// The slot classification assumes the outer product states stay
    /// eigenstates, which holds for any S_z-conserving pair Hamiltonian.
    pub fn from_hamiltonian(h: &Matrix4<f64>) -> Self {
        let eig = SymmetricEigen::new(*h);
        let vecs = eig.eigenvectors;
        let vals = eig.eigenvalues;

        let mut remaining: Vec<usize> = (0..4).collect();
        let take_max_overlap = |remaining: &mut Vec<usize>, row: usize| -> usize {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .max_by(|(_, &a), (_, &b)| {
                    vecs[(row, a)]
                        .abs()
                        .partial_cmp(&vecs[(row, b)].abs())
                        .unwrap()
                })
                .unwrap();
            remaining.remove(pos)
        };
        let outer_uu = take_max_overlap(&mut remaining, 0);
        let outer_dd = take_max_overlap(&mut remaining, 3);
        // Central slots by descending eigenvalue (deterministic tie-break on index).
        remaining.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));
        let order = [outer_uu, remaining[0], remaining[1], outer_dd];

        let mut u = Matrix4::zeros();
        let mut energies = Vector4::zeros();
        for (slot, &col) in order.iter().enumerate() {
            let mut v = vecs.column(col).clone_owned();
            // Fix the sign so the largest-magnitude entry is positive.
            let lead = (0..4)
                .max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).unwrap())
                .unwrap();
            if v[lead] < 0.0 {
                v = -v;
            }
            u.set_column(slot, &v);
            energies[slot] = vals[col];
        }
        Self { u, energies }
    }

    /// Eigenenergies in slot order, rad/us.
    pub fn energies(&self) -> &Vector4<f64> {
        &self.energies
    }

    /// Change-of-basis matrix (columns = eigenvectors in the product basis).
    pub fn transform(&self) -> &Matrix4<f64> {
        &self.u
    }

    /// Express a product-basis operator in the eigenbasis: U^T M U.
    pub fn to_eigenbasis(&self, product_op: &Matrix4<f64>) -> Matrix4<f64> {
        self.u.transpose() * product_op * self.u
    }

    /// Singlet state (|ud> - |du>)/sqrt(2) expressed in the eigenbasis.
    pub fn singlet_vector(&self) -> Vector4<f64> {
        let s = Vector4::new(0.0, 1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0);
        self.u.transpose() * s
    }
}

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = -1e-10;

/// 4x4 density matrix in the static eigenbasis: Hermitian, unit trace,
/// positive semidefinite (all enforced at construction to round-off).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Matrix4<C64>);

impl DensityMatrix {
    pub fn try_new(m: Matrix4<C64>) -> Result<Self, QuantumError> {
        let scale = m.iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1.0);
        let asym = (m - m.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if asym > HERMITICITY_TOL * scale {
            return Err(QuantumError::NonHermitian(asym));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(QuantumError::BadTrace(trace.re));
        }
        let herm = (m + m.adjoint()).map(|c| c * 0.5);
        let eigvals = SymmetricEigen::new(herm).eigenvalues;
        if let Some(&min) = eigvals
            .iter()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .filter(|&&v| v < POSITIVITY_TOL)
        {
            return Err(QuantumError::NotPositive(min));
        }
        Ok(Self(herm))
    }

    fn from_valid(m: Matrix4<C64>) -> Self {
        Self((m + m.adjoint()).map(|c| c * 0.5))
    }

    pub fn from_populations(p: [f64; 4]) -> Result<Self, QuantumError> {
        let m = Matrix4::from_diagonal(&Vector4::new(
            C64::new(p[0], 0.0),
            C64::new(p[1], 0.0),
            C64::new(p[2], 0.0),
            C64::new(p[3], 0.0),
        ));
        Self::try_new(m)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    /// Diagonal in the eigenbasis, i.e. state populations.
    pub fn populations(&self) -> [f64; 4] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re, self.0[(3, 3)].re]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// Initial condition of the pair ensemble before the pulse.
#[derive(Debug, Clone, PartialEq)]
pub enum SteadyStateModel {
    /// Long-lived outer triplet states equally populated: diag(1/2, 0, 0, 1/2).
    PureOuterTriplet,
    /// Arbitrary populations (normalised at construction).
    Custom([f64; 4]),
}

/// Steady-state density matrix, diagonal in the static eigenbasis.
pub fn steady_state(model: &SteadyStateModel) -> Result<DensityMatrix, QuantumError> {
    match model {
        SteadyStateModel::PureOuterTriplet => DensityMatrix::from_populations([0.5, 0.0, 0.0, 0.5]),
        SteadyStateModel::Custom(p) => {
            if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(QuantumError::BadPopulations);
            }
            let sum: f64 = p.iter().sum();
            if sum <= 0.0 {
                return Err(QuantumError::BadPopulations);
            }
            DensityMatrix::from_populations([p[0] / sum, p[1] / sum, p[2] / sum, p[3] / sum])
        }
    }
}

/// Evolve rho under a (time-independent) Hamiltonian for tau_ns:
/// rho' = exp(-i H t) rho exp(+i H t), via the eigendecomposition of H, so
/// the propagator is unitary to round-off.
pub fn propagate(
    rho: &DensityMatrix,
    hamiltonian: &Matrix4<f64>,
    tau_ns: f64,
) -> Result<DensityMatrix, QuantumError> {
    if !(tau_ns >= 0.0) {
        return Err(QuantumError::NegativeTau(tau_ns));
    }
    let scale = hamiltonian.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1.0);
    let asym = (hamiltonian - hamiltonian.transpose())
        .iter()
        .map(|x| x.abs())
        .fold(0.0f64, f64::max);
    if asym > 1e-9 * scale {
        return Err(QuantumError::NonSymmetricHamiltonian(asym));
    }
    let eig = SymmetricEigen::new(*hamiltonian);
    let u = propagator_from_eigen(&eig.eigenvectors, &eig.eigenvalues, tau_ns);
    Ok(DensityMatrix::from_valid(u * rho.matrix() * u.adjoint()))
}

fn propagator_from_eigen(vecs: &Matrix4<f64>, vals: &Vector4<f64>, tau_ns: f64) -> Matrix4<C64> {
    let t = ns_to_us(tau_ns);
    let phases = Vector4::from_fn(|k, _| {
        let phi = -vals[k] * t;
        C64::new(phi.cos(), phi.sin())
    });
    let vc = vecs.map(|x| C64::new(x, 0.0));
    vc * Matrix4::from_diagonal(&phases) * vc.transpose()
}

/// Singlet population <S|rho|S>, with |S> expressed in the same static
/// eigenbasis the density matrix is stored in.
pub fn singlet_content(rho: &DensityMatrix, basis: &StaticBasis) -> f64 {
    let s = basis.singlet_vector().map(|x| C64::new(x, 0.0));
    (s.adjoint() * rho.matrix() * s)[(0, 0)].re
}

/// Relative change of the recombination rate after a pulse, from the outer
/// (slots 0 and 3) populations:
///
/// Delta = -(rho_00 + rho_33 - rhoS_00 - rhoS_33) / Tr[rhoS].
pub fn delta_from_rho(rho: &DensityMatrix, rho_steady: &DensityMatrix) -> f64 {
    let p = rho.populations();
    let ps = rho_steady.populations();
    -((p[0] + p[3]) - (ps[0] + ps[3])) / rho_steady.trace()
}

/// Sign branch of the central-state denominator in [`delta_from_rho_central`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignBranch {
    Plus,
    Minus,
}

/// Equivalent form of the observable built from the central (slots 1 and 2)
/// populations, weighted by omega_delta / (omega_delta +/- (J + Dd)).
///
/// For J = Dd = 0 this reduces to [`delta_from_rho`] exactly (trace
/// conservation). The sign branch depends on the recombination model and is
/// left to the caller.
pub fn delta_from_rho_central(
    rho: &DensityMatrix,
    rho_steady: &DensityMatrix,
    params: &SpinPairParams,
    branch: SignBranch,
) -> Result<f64, QuantumError> {
    let wd = params.larmor_separation();
    let coupling = params.j + params.dd;
    let (denom, sign) = match branch {
        SignBranch::Plus => (wd + coupling, "+"),
        SignBranch::Minus => (wd - coupling, "-"),
    };
    let scale = wd.abs().max(coupling.abs()).max(1.0);
    if denom.abs() <= 1e-12 * scale {
        return Err(QuantumError::DegenerateCoupling { sign });
    }
    let p = rho.populations();
    let ps = rho_steady.populations();
    let central = (p[1] + p[2]) - (ps[1] + ps[2]);
    Ok(central / rho_steady.trace() * wd / denom)
}

/// Forward-simulated transient nutation curve Delta(tau) on a tau grid (ns),
/// starting from the pure-outer-triplet steady state.
///
/// The rotating-frame Hamiltonian is diagonalised once; each grid point costs
/// one 4x4 sandwich product.
pub fn rabi_transient_oracle(
    params: &SpinPairParams,
    pulse: &PulseSpec,
    tau_grid_ns: &[f64],
) -> Result<TransientRecord, QuantumError> {
    rabi_transient_oracle_offset(params, pulse, tau_grid_ns, &LocalOffsets::default())
}

/// [`rabi_transient_oracle`] for one disorder realisation: the local
/// offsets shift the static Hamiltonian (and hence the eigenbasis the
/// populations are read in) together with the rotating-frame detunings.
pub fn rabi_transient_oracle_offset(
    params: &SpinPairParams,
    pulse: &PulseSpec,
    tau_grid_ns: &[f64],
    offsets: &LocalOffsets,
) -> Result<TransientRecord, QuantumError> {
    if let Some(&t) = tau_grid_ns.iter().find(|&&t| t < 0.0) {
        return Err(QuantumError::NegativeTau(t));
    }
    let off = offsets.operator();
    let basis = StaticBasis::from_hamiltonian(&(static_hamiltonian(params) + off));
    let h_rot = basis.to_eigenbasis(&(rotating_frame_hamiltonian(params, pulse) + off));
    let rho_s = steady_state(&SteadyStateModel::PureOuterTriplet)?;
    let eig = SymmetricEigen::new(h_rot);

    let q: Vec<f64> = tau_grid_ns
        .iter()
        .map(|&tau| {
            let u = propagator_from_eigen(&eig.eigenvectors, &eig.eigenvalues, tau);
            let rho_t = DensityMatrix::from_valid(u * rho_s.matrix() * u.adjoint());
            delta_from_rho(&rho_t, &rho_s)
        })
        .collect();

    let meta = TransientMeta {
        b1_label: "oracle".to_string(),
        b1_scale: Some(1.0),
        seed: None,
        noise_sigma: 0.0,
        n_shots: 1,
        components: Vec::new(),
    };
    Ok(TransientRecord::new(tau_grid_ns.to_vec(), q, meta)?)
}
