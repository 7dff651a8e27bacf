//! Plane-wave attractor theory, modulation instability and spectra.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{critical_amplitude, ComplexState, LatticeConfig, C64};
use crate::quadrature;
use crate::timestep::{integrate, IntegratorSpec, System, Trajectory};

/// `ω̃ = 4k sin²(hq/2) − A*²` for `q = Kπ/L`.
pub fn dispersion_frequency(mode: i64, cfg: &LatticeConfig, a_star: f64) -> Result<f64> {
    let k = cfg.check_mode(mode)?;
    Ok(linear_frequency(k, cfg) - a_star * a_star)
}

/// `4k sin²(hq/2)`; note `hq/2 = πK/N`.
fn linear_frequency(mode: usize, cfg: &LatticeConfig) -> f64 {
    let s = (PI * mode as f64 / cfg.nodes() as f64).sin();
    4.0 * cfg.coupling() * s * s
}

fn require_gain_loss(gamma: f64, delta: f64) -> Result<f64> {
    critical_amplitude(gamma, delta)
}

/// `A²(t)` solving `Ȧ = γA + δA³` from `A(0) = a0`.
pub fn amplitude_ode_solution(a0: f64, gamma: f64, delta: f64, t: f64) -> Result<f64> {
    require_gain_loss(gamma, delta)?;
    if !(a0 > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need A0 > 0 and t >= 0, got A0 = {a0}, t = {t}")));
    }
    let a2 = a0 * a0;
    Ok(gamma * a2 / ((gamma + delta * a2) * (-2.0 * gamma * t).exp() - delta * a2))
}

/// Offset `b` of the asymptote `A*² t + b` approached by the phase.
pub fn slant_asymptote_offset(a0: f64, gamma: f64, delta: f64) -> Result<f64> {
    let a_star = require_gain_loss(gamma, delta)?;
    if !(a0 > 0.0) {
        return Err(Error::Domain(format!("need A0 > 0, got {a0}")));
    }
    Ok(-(a0 * a0 / (a_star * a_star)).ln() / (2.0 * delta))
}

/// `Θ(t) − Θ(0) = ∫₀ᵗ A²(s) ds`, by quadrature.
/// Only the decaying part `A² − A*²` goes through the quadrature.
pub fn phase_integral(a0: f64, gamma: f64, delta: f64, t: f64) -> Result<f64> {
    amplitude_ode_solution(a0, gamma, delta, t)?;
    let a_star2 = -gamma / delta;
    let excess = quadrature::adaptive_simpson(
        |s| amplitude_ode_solution(a0, gamma, delta, s).map_or(f64::NAN, |a2| a2 - a_star2),
        0.0,
        t,
        1e-14,
    );
    Ok(a_star2 * t + excess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneWaveFamily {
    pub mode: usize,
    pub q: f64,
    pub a0: f64,
    pub theta0: f64,
    pub omega_tilde: f64,
}

impl PlaneWaveFamily {
    pub fn new(mode: i64, cfg: &LatticeConfig, a0: f64, theta0: f64) -> Result<Self> {
        let a_star = critical_amplitude(cfg.gamma(), cfg.delta())?;
        let k = cfg.check_mode(mode)?;
        if !(a0 > 0.0 && a0.is_finite() && theta0.is_finite()) {
            return Err(Error::Domain(format!("need finite A0 > 0, got {a0}")));
        }
        Ok(Self {
            mode: k,
            q: cfg.wavenumber(mode),
            a0,
            theta0,
            omega_tilde: dispersion_frequency(mode, cfg, a_star)?,
        })
    }

    /// `Ω(t) = 4k sin²(hq/2) t − Θ(t)`
    pub fn frequency_function(&self, cfg: &LatticeConfig, t: f64) -> Result<f64> {
        let theta = self.theta0 + phase_integral(self.a0, cfg.gamma(), cfg.delta(), t)?;
        Ok(linear_frequency(self.mode, cfg) * t - theta)
    }
}

/// `A(t) e^{i(q x_n − Ω(t))}` on the lattice of `cfg`.
pub fn plane_wave_exact(family: &PlaneWaveFamily, cfg: &LatticeConfig, t: f64) -> Result<ComplexState> {
    let amp = amplitude_ode_solution(family.a0, cfg.gamma(), cfg.delta(), t)?.sqrt();
    let omega = family.frequency_function(cfg, t)?;
    let grid = cfg.grid();
    ComplexState::new(
        grid.x()
            .iter()
            .map(|&x| C64::from_polar(amp, family.q * x - omega))
            .collect(),
        t,
    )
}

/// `cos(2πK/N)`, exactly zero when `4K/N` is an odd integer.
fn carrier_cosine(mode: usize, nodes: usize) -> f64 {
    let four_k = 4 * mode;
    if four_k.is_multiple_of(nodes) && (four_k / nodes) % 2 == 1 {
        return 0.0;
    }
    (2.0 * PI * mode as f64 / nodes as f64).cos()
}

/// Roots of `Λ² − 2iδA²Λ − Γ(Γ − 2A²) = 0`.
fn roots_from_gamma(big_gamma: f64, a_star: f64, delta: f64) -> (C64, C64) {
    let a2 = a_star * a_star;
    let d = big_gamma * (big_gamma - 2.0 * a2) - delta * delta * a2 * a2;
    let root = if d >= 0.0 {
        C64::new(d.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-d).sqrt())
    };
    let centre = C64::new(0.0, delta * a2);
    (centre + root, centre - root)
}

/// Largest imaginary part of the two roots, evaluated without cancellation.
fn growth_from_gamma(big_gamma: f64, a_star: f64, delta: f64) -> f64 {
    let a2 = a_star * a_star;
    let disc = big_gamma * (big_gamma - 2.0 * a2);
    let s = delta * delta * a2 * a2 - disc;
    if s < 0.0 {
        return delta * a2;
    }
    if delta < 0.0 {
        let den = s.sqrt() - delta * a2;
        if den == 0.0 {
            0.0
        } else {
            -disc / den
        }
    } else {
        delta * a2 + s.sqrt()
    }
}

/// Both roots `Λ±` for carrier `q` and perturbation `Q`.
pub fn mi_roots(q: f64, big_q: f64, cfg: &LatticeConfig, a_star: f64, delta: f64) -> (C64, C64) {
    let h = cfg.spacing();
    let s = (h * big_q / 2.0).sin();
    let big_gamma = 4.0 * cfg.coupling() * s * s * (h * q).cos();
    roots_from_gamma(big_gamma, a_star, delta)
}

/// Residual of the quadratic at `lambda`.
pub fn mi_quadratic_residual(lambda: C64, q: f64, big_q: f64, cfg: &LatticeConfig, a_star: f64, delta: f64) -> f64 {
    let h = cfg.spacing();
    let s = (h * big_q / 2.0).sin();
    let g = 4.0 * cfg.coupling() * s * s * (h * q).cos();
    let a2 = a_star * a_star;
    (lambda * lambda - C64::new(0.0, 2.0 * delta * a2) * lambda - g * (g - 2.0 * a2)).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiScan {
    pub carrier_mode: usize,
    pub q: f64,
    /// Perturbation indices `M = 0..=N/2`.
    pub modes: Vec<usize>,
    /// `Q = Mπ/L`
    pub wavenumbers: Vec<f64>,
    /// `max(Im Λ₊, Im Λ₋)` per `M`.
    pub growth: Vec<f64>,
    /// `Γ(Γ − 2A²)` per `M`; negative exactly where growth is positive.
    pub discriminant: Vec<f64>,
    /// Perturbation frequencies `Ω_p± = Λ± + 2k sin(hQ) sin(hq)`.
    pub frequencies: Vec<(C64, C64)>,
    pub unstable_band: Vec<usize>,
    pub carrier_unstable: bool,
}

impl MiScan {
    /// Index `M` of the fastest-growing perturbation, if any grows.
    pub fn most_unstable(&self) -> Option<usize> {
        self.unstable_band
            .iter()
            .copied()
            .max_by(|&a, &b| self.growth[a].total_cmp(&self.growth[b]).then(b.cmp(&a)))
    }
}

pub fn mi_scan(mode: i64, cfg: &LatticeConfig, a_star: f64, delta: f64) -> Result<MiScan> {
    let k = cfg.check_mode(mode)?;
    let n = cfg.nodes();
    let cos_hq = carrier_cosine(k, n);
    let sin_hq = (2.0 * PI * k as f64 / n as f64).sin();
    let a2 = a_star * a_star;
    let modes: Vec<usize> = (0..=n / 2).collect();
    let mut wavenumbers = Vec::with_capacity(modes.len());
    let mut growth = Vec::with_capacity(modes.len());
    let mut discriminant = Vec::with_capacity(modes.len());
    let mut frequencies = Vec::with_capacity(modes.len());
    let mut unstable_band = Vec::new();
    for &m in &modes {
        let s = (PI * m as f64 / n as f64).sin();
        let big_gamma = 4.0 * cfg.coupling() * s * s * cos_hq;
        let (lp, lm) = roots_from_gamma(big_gamma, a_star, delta);
        let shift = 2.0 * cfg.coupling() * (2.0 * PI * m as f64 / n as f64).sin() * sin_hq;
        let g = growth_from_gamma(big_gamma, a_star, delta);
        if g > 0.0 {
            unstable_band.push(m);
        }
        wavenumbers.push(m as f64 * PI / cfg.half_length());
        growth.push(g);
        discriminant.push(big_gamma * (big_gamma - 2.0 * a2));
        frequencies.push((lp + shift, lm + shift));
    }
    Ok(MiScan {
        carrier_mode: k,
        q: cfg.wavenumber(mode),
        modes,
        wavenumbers,
        growth,
        discriminant,
        frequencies,
        carrier_unstable: cos_hq > 0.0 && !unstable_band.is_empty(),
        unstable_band,
    })
}

/// Thresholds of the linear fitting window, relative to `eps` and absolute.
pub const FIT_LOWER_FACTOR: f64 = 10.0;
pub const FIT_UPPER: f64 = 1e-3;
/// Integration horizon of the growth oracle.
pub const ORACLE_HORIZON: f64 = 150.0;
const ORACLE_SAMPLE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    /// False when the sideband never crossed the fitting window.
    pub fitted: bool,
    pub window: Option<(f64, f64)>,
    pub samples: usize,
}

impl GrowthFit {
    fn none() -> Self {
        Self {
            rate: 0.0,
            fitted: false,
            window: None,
            samples: 0,
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Measures the growth rate of the `M`-th sideband of the critical plane
/// wave with carrier `K` by direct simulation of the full lattice.
pub fn mi_growth_oracle(mode: i64, perturbation: i64, cfg: &LatticeConfig, eps: f64) -> Result<GrowthFit> {
    let a_star = critical_amplitude(cfg.gamma(), cfg.delta())?;
    let k = cfg.check_mode(mode)?;
    let m = cfg.check_mode(perturbation)?;
    if !(0.0..=1e-6).contains(&eps) {
        return Err(Error::Domain(format!("perturbation amplitude must lie in [0, 1e-6], got {eps}")));
    }
    if eps == 0.0 {
        return Ok(GrowthFit::none());
    }
    let q = cfg.wavenumber(k as i64);
    let big_q = cfg.wavenumber(m as i64);
    let grid = cfg.grid();
    let ic = ComplexState::new(
        grid.x()
            .iter()
            .map(|&x| (a_star + eps * (big_q * x).cos()) * C64::from_polar(1.0, q * x))
            .collect(),
        0.0,
    )?;
    let spec = IntegratorSpec::dp54(1e-3, 1e-11, 1e-14, ORACLE_HORIZON, ORACLE_SAMPLE);
    let traj = integrate(System::Dnls, &ic, cfg, &spec)?;
    let bin = (k + m) % cfg.nodes();
    let scale = cfg.nodes() as f64 * cfg.spacing();
    let mut planner = SpectrumPlanner::new(cfg.nodes());
    let series: Vec<(f64, f64)> = traj
        .states
        .iter()
        .map(|s| (s.t(), planner.frame(s, cfg.spacing()).coeffs[bin].norm() / scale))
        .collect();
    let lower = FIT_LOWER_FACTOR * eps;
    let Some(start) = series.iter().position(|&(_, c)| c >= lower) else {
        return Ok(GrowthFit::none());
    };
    let end = series[start..]
        .iter()
        .position(|&(_, c)| c > FIT_UPPER)
        .map_or(series.len(), |p| start + p);
    let window = &series[start..end];
    if window.len() < 3 {
        return Ok(GrowthFit::none());
    }
    let xs: Vec<f64> = window.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    Ok(GrowthFit {
        rate: fit_slope(&xs, &ys),
        fitted: true,
        window: Some((xs[0], xs[xs.len() - 1])),
        samples: window.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumFrame {
    pub t: f64,
    /// `A_K = h Σ_n u_n e^{−2πiKn/N}`
    pub coeffs: Vec<C64>,
    pub dominant_mode: usize,
}

impl SpectrumFrame {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.coeffs.iter().map(|c| c.norm())
    }

    /// Number of coefficients above `rel` times the dominant one.
    pub fn modes_above(&self, rel: f64) -> usize {
        let top = self.coeffs[self.dominant_mode].norm();
        self.magnitudes().filter(|&m| m > rel * top).count()
    }

    /// Dominant mode folded into `[0, N/2]`.
    pub fn folded_dominant(&self) -> usize {
        fold_mode(self.dominant_mode, self.coeffs.len())
    }
}

/// Maps a DFT bin to its physical mode index in `[0, N/2]`.
pub fn fold_mode(bin: usize, nodes: usize) -> usize {
    bin.min(nodes - bin)
}

/// Reusable FFT plans for one lattice size.
pub struct SpectrumPlanner {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl SpectrumPlanner {
    pub fn new(nodes: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nodes);
        let inverse = planner.plan_fft_inverse(nodes);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn frame(&mut self, state: &ComplexState, spacing: f64) -> SpectrumFrame {
        let mut coeffs = state.values().to_vec();
        self.forward.process_with_scratch(&mut coeffs, &mut self.scratch);
        for c in &mut coeffs {
            *c *= spacing;
        }
        let mut dominant_mode = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, c) in coeffs.iter().enumerate() {
            let m = c.norm();
            if m > best {
                best = m;
                dominant_mode = i;
            }
        }
        SpectrumFrame {
            t: state.t(),
            coeffs,
            dominant_mode,
        }
    }

    pub fn invert(&mut self, frame: &SpectrumFrame, spacing: f64) -> Result<ComplexState> {
        let mut values = frame.coeffs.clone();
        self.inverse.process_with_scratch(&mut values, &mut self.scratch);
        let scale = 1.0 / (values.len() as f64 * spacing);
        for v in &mut values {
            *v *= scale;
        }
        ComplexState::new(values, frame.t)
    }
}

pub fn spectrum(state: &ComplexState, spacing: f64) -> SpectrumFrame {
    SpectrumPlanner::new(state.len()).frame(state, spacing)
}

pub fn inverse_spectrum(frame: &SpectrumFrame, spacing: f64) -> Result<ComplexState> {
    SpectrumPlanner::new(frame.coeffs.len()).invert(frame, spacing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttractorVerdict {
    pub converged: bool,
    pub final_mode: usize,
    pub in_stable_band: bool,
    /// Largest `|P_a − A*²|` over the window.
    pub power_error: f64,
    /// Largest spatial variance of `|u_n|` over the window.
    pub modulus_variance: f64,
}

pub fn attractor_verdict(
    traj: &Trajectory,
    cfg: &LatticeConfig,
    a_star: f64,
    tol_amp: f64,
    t_window: f64,
) -> Result<AttractorVerdict> {
    let (Some(&first), Some(&last)) = (traj.times.first(), traj.times.last()) else {
        return Err(Error::WindowTooShort { window: t_window, available: 0.0 });
    };
    if last - first < t_window {
        return Err(Error::WindowTooShort {
            window: t_window,
            available: last - first,
        });
    }
    let mut power_error: f64 = 0.0;
    let mut modulus_variance: f64 = 0.0;
    for (i, t) in traj.times.iter().enumerate() {
        if *t < last - t_window {
            continue;
        }
        power_error = power_error.max((traj.diagnostics[i].averaged_power - a_star * a_star).abs());
        let s = &traj.states[i];
        let n = s.len() as f64;
        let mean = s.values().iter().map(|z| z.norm()).sum::<f64>() / n;
        let var = s.values().iter().map(|z| (z.norm() - mean).powi(2)).sum::<f64>() / n;
        modulus_variance = modulus_variance.max(var);
    }
    let final_mode = spectrum(traj.last().expect("nonempty"), cfg.spacing()).folded_dominant();
    let scan = mi_scan(final_mode as i64, cfg, a_star, cfg.delta())?;
    Ok(AttractorVerdict {
        converged: power_error < tol_amp && modulus_variance < tol_amp,
        final_mode,
        in_stable_band: scan.unstable_band.is_empty(),
        power_error,
        modulus_variance,
    })
}

/// Half-width `4√2·A·t` of the nonlinear-stage wedge.
pub fn wedge_half_width(amplitude: f64, t: f64) -> f64 {
    4.0 * 2f64.sqrt() * amplitude * t
}

/// First interior local maximum of `values` exceeding `threshold`, refined
/// by a parabola through the neighbouring samples.
pub fn first_peak(times: &[f64], values: &[f64], threshold: f64) -> Option<(f64, f64)> {
    (1..values.len().saturating_sub(1)).find_map(|i| {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if !(b > threshold && b >= a && b > c) {
            return None;
        }
        let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
        let curvature = a - 2.0 * b + c;
        if (t1 - t0 - (t2 - t1)).abs() > 1e-9 * (t2 - t0) || curvature == 0.0 {
            return Some((t1, b));
        }
        let offset = 0.5 * (a - c) / curvature;
        let dt = t1 - t0;
        Some((t1 + offset * dt, b - 0.25 * (a - c) * offset))
    })
}
