//! Ablowitz–Ladik side: the discrete Peregrine soliton, the AL conserved
//! quantity with its ℓ² bound, and DNLS↔AL distance curves with their
//! analytic upper estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{critical_amplitude, ComplexState, LatticeConfig, NodeGrid, C64};
use crate::quadrature;
use crate::timestep::Trajectory;

/// Window used for the restricted distance unless configured otherwise.
pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 10.0);
/// Absolute tolerance for the envelope integrals.
pub const QUADRATURE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpsParams {
    /// Background amplitude.
    pub q: f64,
    /// Time of the peak.
    pub t0: f64,
}

impl DpsParams {
    pub fn new(q: f64, t0: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite() && t0.is_finite()) {
            return Err(Error::Domain(format!("dPS needs q > 0 and finite t0, got q = {q}, t0 = {t0}")));
        }
        Ok(Self { q, t0 })
    }

    /// Density at the peak, `q²(3 + 4q²)²`.
    pub fn peak_density(&self) -> f64 {
        let q2 = self.q * self.q;
        q2 * (3.0 + 4.0 * q2).powi(2)
    }
}

/// Rational AL solution at one node; `tau = t − t0`.
pub fn dps_value(x: f64, tau: f64, q: f64) -> C64 {
    let q2 = q * q;
    let num = 4.0 * (1.0 + q2) * C64::new(1.0, 4.0 * q2 * tau);
    let den = 1.0 + 4.0 * x * x * q2 + 16.0 * q2 * q2 * (1.0 + q2) * tau * tau;
    q * (C64::new(1.0, 0.0) - num / den) * C64::from_polar(1.0, 2.0 * q2 * tau)
}

pub fn dps_eval(grid: &NodeGrid, t: f64, params: &DpsParams) -> Result<ComplexState> {
    if (grid.spacing() - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "the discrete Peregrine soliton solves the AL lattice only at unit spacing, got h = {}",
            grid.spacing()
        )));
    }
    let tau = t - params.t0;
    ComplexState::new(grid.x().iter().map(|&x| dps_value(x, tau, params.q)).collect(), t)
}

pub(crate) fn al_invariant_of(u: &[C64], h: f64) -> f64 {
    h * u.iter().map(|z| z.norm_sqr().ln_1p()).sum::<f64>()
}

/// `h Σ ln(1 + |φ_n|²)`
pub fn al_invariant(state: &ComplexState, cfg: &LatticeConfig) -> f64 {
    al_invariant_of(state.values(), cfg.spacing())
}

/// Uniform bound `h e^{𝒩/h} − h` on `‖φ(t)‖²`.
pub fn al_norm_bound(invariant: f64, cfg: &LatticeConfig) -> f64 {
    let h = cfg.spacing();
    h * (invariant / h).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCurves {
    pub times: Vec<f64>,
    /// `‖u − φ‖ / √(Nh)`
    pub global: Vec<f64>,
    /// Same, restricted to `window` and normalized by its node count.
    pub restricted: Vec<f64>,
    pub window: (f64, f64),
    pub window_nodes: usize,
}

fn check_same_grid(a: &Trajectory, b: &Trajectory, cfg: &LatticeConfig) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    for (i, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("sample {i}: t = {ta} vs {tb}")));
        }
    }
    for s in a.states.iter().chain(&b.states) {
        if s.len() != cfg.nodes() {
            return Err(Error::GridMismatch(format!("state of length {} on a {}-node lattice", s.len(), cfg.nodes())));
        }
    }
    Ok(())
}

pub fn distance_curves(
    traj_u: &Trajectory,
    traj_phi: &Trajectory,
    cfg: &LatticeConfig,
    window: (f64, f64),
) -> Result<DistanceCurves> {
    check_same_grid(traj_u, traj_phi, cfg)?;
    let h = cfg.spacing();
    let grid = cfg.grid();
    let inside: Vec<bool> = grid.x().iter().map(|&x| x >= window.0 && x <= window.1).collect();
    let window_nodes = inside.iter().filter(|&&b| b).count();
    if window_nodes == 0 {
        return Err(Error::Config(format!("window [{}, {}] contains no nodes", window.0, window.1)));
    }
    let scale = (cfg.nodes() as f64 * h).sqrt();
    let scale_r = (window_nodes as f64 * h).sqrt();
    let mut global = Vec::with_capacity(traj_u.len());
    let mut restricted = Vec::with_capacity(traj_u.len());
    for (su, sp) in traj_u.states.iter().zip(&traj_phi.states) {
        let mut all = 0.0;
        let mut part = 0.0;
        for ((a, b), &keep) in su.values().iter().zip(sp.values()).zip(&inside) {
            let d = (a - b).norm_sqr();
            all += d;
            if keep {
                part += d;
            }
        }
        global.push((h * all).sqrt() / scale);
        restricted.push((h * part).sqrt() / scale_r);
    }
    Ok(DistanceCurves {
        times: traj_u.times.clone(),
        global,
        restricted,
        window,
        window_nodes,
    })
}

/// The three contributions to the linear growth rate of estimate II.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateIIRate {
    pub gain: f64,
    pub loss: f64,
    pub al: f64,
}

impl EstimateIIRate {
    pub fn total(&self) -> f64 {
        self.gain + self.loss + self.al
    }
}

pub fn estimate_ii_rate(cfg: &LatticeConfig, gamma: f64, delta: f64, a_star: f64, invariant: f64) -> EstimateIIRate {
    let h = cfg.spacing();
    let n = cfg.nodes() as f64;
    EstimateIIRate {
        gain: gamma * a_star * (n * h).sqrt(),
        loss: (delta * delta + 1.0).sqrt() * h.sqrt() * a_star.powi(3) * n.powf(1.5),
        al: 2.0 * h.sqrt() * (invariant / h).exp_m1().powf(1.5),
    }
}

/// Envelope `B(s)` bounding `‖u(s)‖²`; `nu = ‖u(0)‖⁻²`, `beta = −δ/(Nh)`.
pub fn norm_envelope(s: f64, gamma: f64, nu: f64, beta: f64) -> f64 {
    if nu.is_infinite() {
        return 0.0;
    }
    let decay = (-2.0 * gamma * s).exp();
    gamma / (gamma * decay * nu + beta * (1.0 - decay))
}

/// The printed closed form of `∫√B`. Kept for cross-checking only: it is
/// negative at `t = 0`.
pub fn printed_f1(t: f64, gamma: f64, nu: f64, beta: f64) -> f64 {
    let (sg, sb) = ((gamma * nu).sqrt(), beta.sqrt());
    let den = sb * (-gamma * t).exp() + (((2.0 * gamma * t).exp() - 1.0) * beta + gamma * nu).sqrt();
    ((sg - sb) / den).ln() / (beta * gamma).sqrt()
}

/// The printed closed form of `∫B^{3/2}`.
pub fn printed_f2(t: f64, gamma: f64, nu: f64, beta: f64) -> f64 {
    let sb = beta.sqrt();
    let sg = gamma.sqrt();
    let gap = (nu * gamma - beta).sqrt();
    let grow = (gamma * t).exp();
    (sg * (sb * grow / gap).asinh() - sb * sg * grow / (beta * ((2.0 * gamma * t).exp() - 1.0) + gamma * nu).sqrt()
        - sg * (sb / gap).asinh()
        + sb / nu.sqrt())
        / beta.powf(1.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateI {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    /// With the AL term as printed, `2(e^{𝒩(0)} − 1)^{3/2} t`.
    pub printed: Vec<f64>,
    /// With the AL term scaled like estimate II, `2(e^{𝒩(0)/h} − 1)^{3/2} t`.
    pub scaled: Vec<f64>,
}

/// Estimate I on `times` (measured from the common start), given
/// `‖u(0)‖²`, `𝒩(0)` and the initial distance `‖u(0) − φ(0)‖`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_i_curve(
    cfg: &LatticeConfig,
    gamma: f64,
    delta: f64,
    u0_norm_sq: f64,
    invariant: f64,
    initial_distance: f64,
    times: &[f64],
) -> Result<EstimateI> {
    critical_amplitude(gamma, delta)?;
    let nu = 1.0 / u0_norm_sq;
    let beta = -delta / (cfg.nodes() as f64 * cfg.spacing());
    if nu * gamma <= beta {
        return Err(Error::HypothesisViolated(format!(
            "estimate I needs P_a[u(0)] < A*^2 (nu*gamma = {} <= beta = {beta})",
            nu * gamma
        )));
    }
    let f1 = quadrature::cumulative(|s| norm_envelope(s, gamma, nu, beta).sqrt(), 0.0, times, QUADRATURE_TOL);
    let f2 = quadrature::cumulative(|s| norm_envelope(s, gamma, nu, beta).powf(1.5), 0.0, times, QUADRATURE_TOL);
    let h = cfg.spacing();
    let al_printed = 2.0 * invariant.exp_m1().powf(1.5);
    let al_scaled = 2.0 * (invariant / h).exp_m1().powf(1.5);
    let root = (delta * delta + 1.0).sqrt();
    let base: Vec<f64> = f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| initial_distance + gamma * a + root * b)
        .collect();
    Ok(EstimateI {
        printed: base.iter().zip(times).map(|(b, t)| b + al_printed * t).collect(),
        scaled: base.iter().zip(times).map(|(b, t)| b + al_scaled * t).collect(),
        f1,
        f2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallnessCheck {
    pub gamma_cubed: f64,
    /// `−δ/(Nh)`
    pub first: f64,
    /// `−δ³/((δ²+1) h N³)`
    pub second: f64,
    pub holds: bool,
}

pub fn smallness_condition(cfg: &LatticeConfig, gamma: f64, delta: f64) -> SmallnessCheck {
    let n = cfg.nodes() as f64;
    let h = cfg.spacing();
    let first = -delta / (n * h);
    let second = -delta.powi(3) / ((delta * delta + 1.0) * h * n.powi(3));
    let gamma_cubed = gamma.powi(3);
    SmallnessCheck {
        gamma_cubed,
        first,
        second,
        holds: gamma_cubed < first.min(second),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProximityReport {
    pub times: Vec<f64>,
    pub d_a: Vec<f64>,
    pub d_a_r: Vec<f64>,
    pub window: (f64, f64),
    /// Estimate I divided by `√(Nh)`; absent when its hypothesis fails.
    pub bound_i: Option<Vec<f64>>,
    /// Estimate I with the `e^{𝒩(0)/h}` term, divided by `√(Nh)`.
    pub bound_i_scaled: Option<Vec<f64>>,
    /// Estimate II divided by `√(Nh)`.
    pub bound_ii: Vec<f64>,
    pub alpha: EstimateIIRate,
    pub invariant0: f64,
    pub initial_distance: f64,
    pub smallness: SmallnessCheck,
}

impl ProximityReport {
    /// Samples where `D_a` exceeds estimate II.
    pub fn estimate_ii_violations(&self) -> Vec<usize> {
        violations(&self.d_a, &self.bound_ii)
    }

    /// Samples where `D_a` exceeds estimate I (empty when it does not apply).
    pub fn estimate_i_violations(&self) -> Vec<usize> {
        self.bound_i.as_ref().map(|b| violations(&self.d_a, b)).unwrap_or_default()
    }
}

fn violations(d: &[f64], bound: &[f64]) -> Vec<usize> {
    d.iter()
        .zip(bound)
        .enumerate()
        .filter(|(_, (d, b))| d > b)
        .map(|(i, _)| i)
        .collect()
}

/// Distance curves of a paired DNLS/AL run together with both estimates.
pub fn proximity_report(
    traj_u: &Trajectory,
    traj_phi: &Trajectory,
    cfg: &LatticeConfig,
    window: (f64, f64),
) -> Result<ProximityReport> {
    let (gamma, delta) = (cfg.gamma(), cfg.delta());
    let a_star = critical_amplitude(gamma, delta)?;
    let curves = distance_curves(traj_u, traj_phi, cfg, window)?;
    let (Some(u0), Some(p0)) = (traj_u.states.first(), traj_phi.states.first()) else {
        return Err(Error::NeedThreeSamples(0));
    };
    let h = cfg.spacing();
    let scale = (cfg.nodes() as f64 * h).sqrt();
    let invariant0 = al_invariant(p0, cfg);
    let initial_distance = (h * u0
        .values()
        .iter()
        .zip(p0.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>())
    .sqrt();
    let alpha = estimate_ii_rate(cfg, gamma, delta, a_star, invariant0);
    let t0 = curves.times[0];
    let elapsed: Vec<f64> = curves.times.iter().map(|t| t - t0).collect();
    let bound_ii = elapsed
        .iter()
        .map(|t| (initial_distance + alpha.total() * t) / scale)
        .collect();
    let (bound_i, bound_i_scaled) =
        match estimate_i_curve(cfg, gamma, delta, u0.norm_sqr(h), invariant0, initial_distance, &elapsed) {
            Ok(est) => (
                Some(est.printed.iter().map(|v| v / scale).collect()),
                Some(est.scaled.iter().map(|v| v / scale).collect()),
            ),
            Err(Error::HypothesisViolated(_)) => (None, None),
            Err(e) => return Err(e),
        };
    Ok(ProximityReport {
        times: curves.times,
        d_a: curves.global,
        d_a_r: curves.restricted,
        window,
        bound_i,
        bound_i_scaled,
        bound_ii,
        alpha,
        invariant0,
        initial_distance,
        smallness: smallness_condition(cfg, gamma, delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    fn unit_cfg(n: usize) -> LatticeConfig {
        LatticeConfig::new(n as f64 / 2.0, n, 0.0025, -0.01, Boundary::Periodic).unwrap()
    }

    #[test]
    fn dps_peak_value() {
        let v = dps_value(0.0, 0.0, 0.5);
        assert!((v - C64::new(-2.0, 0.0)).norm() < 1e-15);
        assert!((v.norm_sqr() - 4.0).abs() < 1e-14);
        for q in [0.25, 0.5, 1.0] {
            let p = DpsParams::new(q, 1.0).unwrap();
            assert!((dps_value(0.0, 0.0, q).norm_sqr() - p.peak_density()).abs() < 1e-12 * p.peak_density());
        }
    }

    #[test]
    fn dps_background_recovery() {
        for tau in [-3.0, 0.0, 2.0] {
            assert!((dps_value(200.0, tau, 0.5).norm() - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn dps_requires_unit_spacing() {
        let cfg = LatticeConfig::new(50.0, 200, 0.1, -0.1, Boundary::Periodic).unwrap();
        let p = DpsParams::new(0.5, 0.0).unwrap();
        assert!(matches!(dps_eval(&cfg.grid(), 0.0, &p), Err(Error::Config(_))));
        assert!(DpsParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn invariant_of_constant_and_zero() {
        let cfg = unit_cfg(400);
        let s = ComplexState::new(vec![C64::new(0.5, 0.0); 400], 0.0).unwrap();
        assert!((al_invariant(&s, &cfg) - 400.0 * 1.25f64.ln()).abs() < 1e-11);
        assert_eq!(al_invariant(&ComplexState::zeros(400, 0.0), &cfg), 0.0);
    }

    #[test]
    fn norm_bound_cases() {
        let cfg = unit_cfg(400);
        assert_eq!(al_norm_bound(0.0, &cfg), 0.0);
        let n0 = 400.0 * 1.25f64.ln();
        let b = al_norm_bound(n0, &cfg);
        assert!(b.is_finite() && b > 1e38);
        assert!(400.0 * 0.25 <= b);
        // one excited node at unit spacing: equality
        let mut v = vec![C64::new(0.0, 0.0); 400];
        v[3] = C64::new(0.6, 0.8);
        let s = ComplexState::new(v, 0.0).unwrap();
        let bound = al_norm_bound(al_invariant(&s, &cfg), &cfg);
        assert!((bound - s.norm_sqr(1.0)).abs() < 1e-14);
    }

    #[test]
    fn alpha_terms() {
        let cfg = unit_cfg(400);
        let a = estimate_ii_rate(&cfg, 0.0025, -0.01, 0.5, 0.0);
        assert!((a.gain - 0.025).abs() < 1e-15);
        assert!((a.loss - 1.0001f64.sqrt() * 1000.0).abs() < 1e-9);
        assert_eq!(a.al, 0.0);
        assert!((a.total() - 1000.075).abs() < 1e-3);
        assert_eq!(estimate_ii_rate(&cfg, 0.0025, -0.01, 0.0, 0.0).total(), 0.0);
        let doubled = estimate_ii_rate(&unit_cfg(800), 0.0025, -0.01, 0.5, 0.0);
        assert!((doubled.loss / a.loss - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn smallness_values() {
        let c = smallness_condition(&unit_cfg(400), 0.0025, -0.01);
        assert!((c.first - 2.5e-5).abs() < 1e-18);
        assert!((c.second - 1.5624e-14).abs() < 1e-17);
        assert!((c.gamma_cubed - 1.5625e-8).abs() < 1e-20);
        assert!(!c.holds);
        assert!(smallness_condition(&unit_cfg(400), 1e-6, -0.01).holds);
        let bigger = smallness_condition(&unit_cfg(800), 0.0025, -0.01);
        assert!(bigger.first < c.first && bigger.second < c.second);
    }

    #[test]
    fn envelope_limits() {
        let (gamma, delta, n, h) = (0.0025, -0.01, 400.0, 1.0);
        let u0 = 0.16 * n * h;
        let nu = 1.0 / u0;
        let beta = -delta / (n * h);
        assert!((norm_envelope(0.0, gamma, nu, beta) - u0).abs() < 1e-12);
        let limit = 0.25 * n * h;
        assert!((norm_envelope(2e4, gamma, nu, beta) - limit).abs() < 1e-9 * limit);
        // below the limit throughout
        assert!((0..100).all(|i| norm_envelope(i as f64 * 50.0, gamma, nu, beta) < limit));
    }

    #[test]
    fn estimate_i_shape_and_hypothesis() {
        let cfg = unit_cfg(400);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let est = estimate_i_curve(&cfg, 0.0025, -0.01, 64.0, 0.0, 0.0, &times).unwrap();
        assert_eq!(est.f1[0], 0.0);
        assert_eq!(est.f2[0], 0.0);
        assert!(est.f1.windows(2).all(|w| w[1] > w[0]));
        assert!(est.f2.windows(2).all(|w| w[1] > w[0]));
        assert!(matches!(
            estimate_i_curve(&cfg, 0.0025, -0.01, 0.25 * 400.0, 0.0, 0.0, &times),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn quadrature_self_consistent() {
        let (gamma, nu, beta) = (0.0025, 1.0 / 64.0, 0.01 / 400.0);
        let f = |s: f64| norm_envelope(s, gamma, nu, beta).powf(1.5);
        let coarse = quadrature::adaptive_simpson(f, 0.0, 10.0, 1e-9);
        let fine = quadrature::adaptive_simpson(f, 0.0, 10.0, 1e-12);
        assert!((coarse - fine).abs() < 1e-8);
    }

    #[test]
    fn printed_closed_forms() {
        let (gamma, nu, beta) = (0.0025, 1.0 / 64.0, 0.01 / 400.0);
        // the printed F1 does not vanish at t = 0
        assert!(printed_f1(0.0, gamma, nu, beta) < 0.0);
        assert!(printed_f2(0.0, gamma, nu, beta).abs() < 1e-9);
    }
}
