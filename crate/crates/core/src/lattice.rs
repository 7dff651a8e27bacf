//! Lattice geometry, states, and the right-hand sides of the three lattice
//! systems: the gain/loss DNLS, the Ablowitz–Ladik lattice, and the
//! background-shifted DNLS used with zero Dirichlet closure.
//!
//! The `*_into` functions are the hot path: they write into a caller-owned
//! buffer and never allocate. They do not check that the boundary mode suits
//! the system; the allocating wrappers and [`crate::timestep::integrate`] do.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Geometry, coupling and gain/loss parameters shared by all systems.
///
/// `N` nodes sit at `x_n = -L + n h` for `n = 0..N-1`, with `h = 2L/N` and
/// coupling `k = 1/h²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeConfig {
    half_length: f64,
    nodes: usize,
    spacing: f64,
    coupling: f64,
    gamma: f64,
    delta: f64,
    boundary: Boundary,
}

impl LatticeConfig {
    pub const MIN_NODES: usize = 4;

    /// Builds a lattice of `nodes` points on `[-half_length, half_length)`.
    pub fn new(
        half_length: f64,
        nodes: usize,
        gamma: f64,
        delta: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!("L must be positive, got {half_length}")));
        }
        if nodes < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "N must be at least {}, got {nodes}",
                Self::MIN_NODES
            )));
        }
        if !(gamma.is_finite() && delta.is_finite()) {
            return Err(Error::Config("gamma and delta must be finite".into()));
        }
        let spacing = 2.0 * half_length / nodes as f64;
        let span = spacing * nodes as f64;
        if (span - 2.0 * half_length).abs() > 4.0 * f64::EPSILON * 2.0 * half_length {
            return Err(Error::Config(format!(
                "h*N = {span} does not reproduce 2L = {}",
                2.0 * half_length
            )));
        }
        Ok(Self {
            half_length,
            nodes,
            spacing,
            coupling: 1.0 / (spacing * spacing),
            gamma,
            delta,
            boundary,
        })
    }

    /// Builds a lattice from the spacing; `2L/h` must be an integer.
    pub fn with_spacing(
        half_length: f64,
        spacing: f64,
        gamma: f64,
        delta: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {spacing}")));
        }
        let ratio = 2.0 * half_length / spacing;
        let nodes = ratio.round();
        if !nodes.is_finite() || (nodes * spacing - 2.0 * half_length).abs() > 1e-12 * 2.0 * half_length
        {
            return Err(Error::Config(format!(
                "2L/h = {ratio} is not an integer node count"
            )));
        }
        let cfg = Self::new(half_length, nodes as usize, gamma, delta, boundary)?;
        if (cfg.spacing - spacing).abs() > 1e-12 * spacing {
            return Err(Error::Config(format!(
                "spacing {spacing} inconsistent with 2L/N = {}",
                cfg.spacing
            )));
        }
        Ok(cfg)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_gain_loss(mut self, gamma: f64, delta: f64) -> Self {
        self.gamma = gamma;
        self.delta = delta;
        self
    }

    pub fn grid(&self) -> NodeGrid {
        NodeGrid::new(self)
    }

    /// Index of the node at `x = 0`. Requires an even node count.
    pub fn central_node(&self) -> Result<usize> {
        if !self.nodes.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "central node needs even N, got {}",
                self.nodes
            )));
        }
        Ok(self.nodes / 2)
    }

    /// Wavenumber `q = K π / L` of integer mode `K`.
    pub fn wavenumber(&self, mode: i64) -> f64 {
        mode as f64 * std::f64::consts::PI / self.half_length
    }

    /// Checks `0 <= K <= N/2`.
    pub fn check_mode(&self, mode: i64) -> Result<usize> {
        let max = self.nodes / 2;
        if mode < 0 || mode as usize > max {
            return Err(Error::Wavenumber { k: mode, max });
        }
        Ok(mode as usize)
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nodes {
            return Err(Error::LengthMismatch {
                expected: self.nodes,
                got: len,
            });
        }
        Ok(())
    }
}

/// Node positions `x_n = -L + n h`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid {
    x: Vec<f64>,
    spacing: f64,
    half_length: f64,
}

impl NodeGrid {
    pub fn new(cfg: &LatticeConfig) -> Self {
        let x = (0..cfg.nodes())
            .map(|n| -cfg.half_length() + n as f64 * cfg.spacing())
            .collect();
        Self {
            x,
            spacing: cfg.spacing(),
            half_length: cfg.half_length(),
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }
}

/// One time slice of a lattice field. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    values: Vec<C64>,
    t: f64,
}

impl ComplexState {
    pub fn new(values: Vec<C64>, t: f64) -> Result<Self> {
        if let Some(bad) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { values, t })
    }

    pub fn zeros(len: usize, t: f64) -> Self {
        Self {
            values: vec![C64::new(0.0, 0.0); len],
            t,
        }
    }

    pub fn from_fn(len: usize, t: f64, f: impl FnMut(usize) -> C64) -> Result<Self> {
        Self::new((0..len).map(f).collect(), t)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn densities(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|z| z.norm_sqr())
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖u‖² = h Σ |u_n|²`.
    pub fn norm_sqr(&self, spacing: f64) -> f64 {
        spacing * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Background amplitude paired with the critical amplitude of the gain/loss
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackgroundSpec {
    pub amplitude: f64,
    pub critical: f64,
}

impl BackgroundSpec {
    pub fn new(amplitude: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::Domain(format!(
                "background amplitude must be nonnegative, got {amplitude}"
            )));
        }
        Ok(Self {
            amplitude,
            critical: critical_amplitude(gamma, delta)?,
        })
    }

    pub fn is_critical(&self, tol: f64) -> bool {
        (self.amplitude - self.critical).abs() <= tol
    }
}

/// Step-like boundary data `ζ_n = ζ_-` for `n < 0`, `ζ_+` for `n >= 0`,
/// rotating at frequency `G²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralizedBcSpec {
    pub zeta_minus: C64,
    pub zeta_plus: C64,
    pub zeta: f64,
    pub g: f64,
}

impl GeneralizedBcSpec {
    pub fn new(zeta_minus: C64, zeta_plus: C64, g: f64) -> Result<Self> {
        let zeta = zeta_plus.norm();
        let rel = (zeta_minus.norm() - zeta).abs() / zeta.max(f64::MIN_POSITIVE);
        if rel > 1e-12 {
            return Err(Error::Domain(format!(
                "|zeta_-| = {} differs from |zeta_+| = {zeta}",
                zeta_minus.norm()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Domain("G must be finite".into()));
        }
        Ok(Self {
            zeta_minus,
            zeta_plus,
            zeta,
            g,
        })
    }
}

fn require_gain_loss(gamma: f64, delta: f64) -> Result<()> {
    if !(gamma > 0.0 && delta < 0.0) {
        return Err(Error::Domain(format!(
            "linear gain and nonlinear loss required (gamma > 0, delta < 0), got gamma = {gamma}, delta = {delta}"
        )));
    }
    Ok(())
}

/// `A* = √(−γ/δ)`, the only background amplitude the infinite lattice admits.
pub fn critical_amplitude(gamma: f64, delta: f64) -> Result<f64> {
    require_gain_loss(gamma, delta)?;
    Ok((-gamma / delta).sqrt())
}

/// True when the background `A` lies within `tol` of `A*`, i.e. the scenario
/// is meaningful for the infinite lattice and not only for a finite one.
pub fn solvability_gate(amplitude: f64, gamma: f64, delta: f64, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok((amplitude - critical_amplitude(gamma, delta)?).abs() <= tol)
}

/// Gate for step-like boundary data: solvable iff `G² = ζ²` and `ζ = A*`.
pub fn generalized_gate(spec: &GeneralizedBcSpec, gamma: f64, delta: f64, tol: f64) -> Result<bool> {
    let a_star = critical_amplitude(gamma, delta)?;
    Ok((spec.g * spec.g - spec.zeta * spec.zeta).abs() <= tol && (spec.zeta - a_star).abs() <= tol)
}

#[inline]
fn neighbours(u: &[C64], n: usize, boundary: Boundary) -> (C64, C64) {
    let len = u.len();
    match boundary {
        Boundary::Periodic => (u[(n + len - 1) % len], u[(n + 1) % len]),
        Boundary::DirichletZero => {
            let zero = C64::new(0.0, 0.0);
            let left = if n == 0 { zero } else { u[n - 1] };
            let right = if n + 1 == len { zero } else { u[n + 1] };
            (left, right)
        }
    }
}

/// Applies `f(left, centre, right)` at every node, handling the two edge nodes
/// according to the boundary mode.
#[inline]
fn stencil_into(u: &[C64], boundary: Boundary, out: &mut [C64], mut f: impl FnMut(C64, C64, C64) -> C64) {
    let len = u.len();
    debug_assert_eq!(len, out.len());
    let (l, r) = neighbours(u, 0, boundary);
    out[0] = f(l, u[0], r);
    for n in 1..len - 1 {
        out[n] = f(u[n - 1], u[n], u[n + 1]);
    }
    let (l, r) = neighbours(u, len - 1, boundary);
    out[len - 1] = f(l, u[len - 1], r);
}

/// `k (u_{n+1} − 2u_n + u_{n−1})`.
pub fn laplacian_into(u: &[C64], cfg: &LatticeConfig, out: &mut [C64]) {
    let k = cfg.coupling();
    stencil_into(u, cfg.boundary(), out, |l, c, r| k * (r - 2.0 * c + l));
}

/// `u̇_n = i[Δ_d u_n + |u_n|² u_n] + γ u_n + δ |u_n|² u_n`.
pub fn dnls_rhs_into(u: &[C64], cfg: &LatticeConfig, out: &mut [C64]) {
    let (k, gamma, delta) = (cfg.coupling(), cfg.gamma(), cfg.delta());
    stencil_into(u, cfg.boundary(), out, |l, c, r| {
        let density = c.norm_sqr();
        let lap = k * (r - 2.0 * c + l);
        I * (lap + density * c) + (gamma + delta * density) * c
    });
}

/// `φ̇_n = i[k(φ_{n+1} − 2φ_n + φ_{n−1}) + |φ_n|²(φ_{n−1} + φ_{n+1})]`.
pub fn al_rhs_into(u: &[C64], cfg: &LatticeConfig, out: &mut [C64]) {
    let k = cfg.coupling();
    stencil_into(u, cfg.boundary(), out, |l, c, r| {
        I * (k * (r - 2.0 * c + l) + c.norm_sqr() * (l + r))
    });
}

/// Background-shifted system for `U_n = ψ_n − A`:
/// `i U̇_n = −Δ_d U_n + A²(U_n + A) − |U_n + A|²(U_n + A) + iγ(U_n + A) + iδ|U_n + A|²(U_n + A)`.
pub fn shifted_rhs_into(u: &[C64], cfg: &LatticeConfig, background: f64, out: &mut [C64]) {
    let (k, gamma, delta) = (cfg.coupling(), cfg.gamma(), cfg.delta());
    let a2 = background * background;
    stencil_into(u, cfg.boundary(), out, |l, c, r| {
        let psi = c + background;
        let density = psi.norm_sqr();
        let lap = k * (r - 2.0 * c + l);
        // U̇ = −i(rhs of i U̇ = ...)
        let rhs = -lap + (a2 - density) * psi + I * (gamma + delta * density) * psi;
        -I * rhs
    });
}

fn map_state(
    state: &ComplexState,
    cfg: &LatticeConfig,
    f: impl FnOnce(&[C64], &mut [C64]),
) -> Result<ComplexState> {
    cfg.check_len(state.len())?;
    let mut out = vec![C64::new(0.0, 0.0); state.len()];
    f(state.values(), &mut out);
    ComplexState::new(out, state.t())
}

pub fn discrete_laplacian(state: &ComplexState, cfg: &LatticeConfig) -> Result<ComplexState> {
    map_state(state, cfg, |u, out| laplacian_into(u, cfg, out))
}

/// Time derivative of the gain/loss DNLS. Only defined with periodic closure.
pub fn dnls_rhs(state: &ComplexState, cfg: &LatticeConfig) -> Result<ComplexState> {
    require_boundary(cfg, Boundary::Periodic, "the unshifted DNLS")?;
    map_state(state, cfg, |u, out| dnls_rhs_into(u, cfg, out))
}

pub fn al_rhs(state: &ComplexState, cfg: &LatticeConfig) -> Result<ComplexState> {
    require_boundary(cfg, Boundary::Periodic, "the Ablowitz-Ladik lattice")?;
    map_state(state, cfg, |u, out| al_rhs_into(u, cfg, out))
}

pub fn shifted_rhs(state: &ComplexState, cfg: &LatticeConfig, background: f64) -> Result<ComplexState> {
    require_boundary(cfg, Boundary::DirichletZero, "the background-shifted DNLS")?;
    if !background.is_finite() {
        return Err(Error::Domain("background amplitude must be finite".into()));
    }
    map_state(state, cfg, |u, out| shifted_rhs_into(u, cfg, background, out))
}

pub(crate) fn require_boundary(cfg: &LatticeConfig, wanted: Boundary, what: &str) -> Result<()> {
    if cfg.boundary() != wanted {
        return Err(Error::Config(format!(
            "{what} requires {wanted:?} boundary, got {:?}",
            cfg.boundary()
        )));
    }
    Ok(())
}

/// Initial-condition families used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `(A_base + A_p) e^{i K π x_n / L}`
    PlaneWave { base: f64, perturbation: f64, mode: i64 },
    /// `A + λ1 / (λ2 + λ3 x_n²)`
    AlgebraicBump { background: f64, lambda1: f64, lambda2: f64, lambda3: f64 },
    /// `A + σ sech(ρ x_n)`
    SechBump { background: f64, sigma: f64, rho: f64 },
}

impl InitialCondition {
    /// Background the profile decays onto, or the plane-wave amplitude.
    pub fn background(&self) -> f64 {
        match *self {
            Self::PlaneWave { base, perturbation, .. } => base + perturbation,
            Self::AlgebraicBump { background, .. } | Self::SechBump { background, .. } => background,
        }
    }

    fn validate(&self, nodes: usize) -> Result<()> {
        match *self {
            Self::PlaneWave { mode, .. } => {
                if mode < 0 || mode as usize > nodes / 2 {
                    return Err(Error::Wavenumber { k: mode, max: nodes / 2 });
                }
            }
            Self::AlgebraicBump { lambda2, lambda3, .. } => {
                if !(lambda2 > 0.0) || !(lambda3 >= 0.0) {
                    return Err(Error::Domain(format!(
                        "algebraic profile needs lambda2 > 0 and lambda3 >= 0, got {lambda2}, {lambda3}"
                    )));
                }
            }
            Self::SechBump { rho, .. } => {
                if !(rho > 0.0) {
                    return Err(Error::Domain(format!("sech profile needs rho > 0, got {rho}")));
                }
            }
        }
        Ok(())
    }
}

/// `sech(x)`, flushed to zero where `e^{|x|}` would overflow.
pub fn sech(x: f64) -> f64 {
    if x.abs() > 700.0 {
        0.0
    } else {
        2.0 / (x.exp() + (-x).exp())
    }
}

pub fn make_initial_condition(ic: &InitialCondition, grid: &NodeGrid) -> Result<ComplexState> {
    ic.validate(grid.len())?;
    let x = grid.x();
    match *ic {
        InitialCondition::PlaneWave { base, perturbation, mode } => {
            let q = mode as f64 * std::f64::consts::PI / grid.half_length();
            let amp = base + perturbation;
            ComplexState::from_fn(x.len(), 0.0, |n| C64::from_polar(amp, q * x[n]))
        }
        InitialCondition::AlgebraicBump { background, lambda1, lambda2, lambda3 } => {
            ComplexState::from_fn(x.len(), 0.0, |n| {
                C64::new(background + lambda1 / (lambda2 + lambda3 * x[n] * x[n]), 0.0)
            })
        }
        InitialCondition::SechBump { background, sigma, rho } => {
            ComplexState::from_fn(x.len(), 0.0, |n| C64::new(background + sigma * sech(rho * x[n]), 0.0))
        }
    }
}
