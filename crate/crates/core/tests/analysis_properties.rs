use std::f64::consts::PI;

use dnls_core::analysis::{
    amplitude_ode_solution, inverse_spectrum, mi_growth_oracle, mi_quadratic_residual, mi_roots, mi_scan,
    phase_integral, plane_wave_exact, slant_asymptote_offset, spectrum, PlaneWaveFamily,
};
use dnls_core::lattice::dnls_rhs;
use dnls_core::quadrature::adaptive_simpson;
use dnls_core::{Boundary, ComplexState, LatticeConfig, C64};
use proptest::prelude::*;

fn fig5_cfg() -> LatticeConfig {
    LatticeConfig::new(50.0, 100, 1.5, -1.5, Boundary::Periodic).unwrap()
}

fn naive_dft(u: &[C64], h: f64) -> Vec<C64> {
    let n = u.len();
    (0..n)
        .map(|k| {
            h * u
                .iter()
                .enumerate()
                .map(|(j, z)| z * C64::from_polar(1.0, -2.0 * PI * (k * j % n) as f64 / n as f64))
                .sum::<C64>()
        })
        .collect()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| C64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_matches_naive_dft_and_round_trips(u in complex_vec(40), h in 0.1f64..2.0) {
        let s = ComplexState::new(u.clone(), 1.5).unwrap();
        let frame = spectrum(&s, h);
        let naive = naive_dft(&u, h);
        for (a, b) in frame.coeffs.iter().zip(&naive) {
            prop_assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
        }
        let back = inverse_spectrum(&frame, h).unwrap();
        for (a, b) in back.values().iter().zip(&u) {
            prop_assert!((a - b).norm() < 1e-10);
        }
        prop_assert_eq!(back.t(), 1.5);
        let lhs = frame.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / 40.0;
        let rhs = h * h * u.iter().map(|z| z.norm_sqr()).sum::<f64>();
        prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1e-300));
    }

    #[test]
    fn dominant_mode_ignores_global_phase(u in complex_vec(32), theta in 0.0f64..(2.0 * PI)) {
        let s = ComplexState::new(u.clone(), 0.0).unwrap();
        let rotated = ComplexState::new(u.iter().map(|z| z * C64::from_polar(1.0, theta)).collect(), 0.0).unwrap();
        let a = spectrum(&s, 1.0);
        let b = spectrum(&rotated, 1.0);
        let mags: Vec<f64> = a.magnitudes().collect();
        let top = mags[a.dominant_mode];
        let near_tie = mags.iter().enumerate().any(|(i, &m)| i != a.dominant_mode && (top - m).abs() < 1e-9 * top);
        prop_assume!(!near_tie);
        prop_assert_eq!(a.dominant_mode, b.dominant_mode);
    }

    #[test]
    fn mi_roots_solve_their_quadratic(gamma in 1e-3f64..2.0, r in 0.5f64..2.0, kq in 0usize..=50, kp in 0usize..=50) {
        let delta = -gamma * r;
        let cfg = LatticeConfig::new(50.0, 100, gamma, delta, Boundary::Periodic).unwrap();
        let a = (gamma / -delta).sqrt();
        let (q, big_q) = (cfg.wavenumber(kq as i64), cfg.wavenumber(kp as i64));
        let (lp, lm) = mi_roots(q, big_q, &cfg, a, delta);
        for l in [lp, lm] {
            let scale = 1.0 + l.norm_sqr() + 16.0 * cfg.coupling() * cfg.coupling();
            prop_assert!(mi_quadratic_residual(l, q, big_q, &cfg, a, delta) < 1e-10 * scale);
        }
    }

    #[test]
    fn growth_sign_matches_discriminant(gamma in 1e-3f64..2.0, r in 0.5f64..2.0, k in 0i64..=50) {
        let delta = -gamma * r;
        let cfg = LatticeConfig::new(50.0, 100, gamma, delta, Boundary::Periodic).unwrap();
        let a = (gamma / -delta).sqrt();
        let scan = mi_scan(k, &cfg, a, delta).unwrap();
        prop_assert_eq!(scan.growth[0], 0.0);
        for i in 0..scan.modes.len() {
            prop_assert!(scan.growth[i].is_finite());
            prop_assert_eq!(scan.growth[i] > 0.0, scan.discriminant[i] < 0.0);
        }
    }
}

#[test]
fn exact_amplitude_matches_integrated_ode() {
    let (gamma, delta) = (1.5, -1.5);
    // RK4 on the scalar amplitude equation
    let f = |a: f64| gamma * a + delta * a * a * a;
    for a0 in [3.0, 0.2, 1.0] {
        let (mut a, dt) = (a0, 1e-4);
        for i in 1..=100_000 {
            let k1 = f(a);
            let k2 = f(a + 0.5 * dt * k1);
            let k3 = f(a + 0.5 * dt * k2);
            let k4 = f(a + dt * k3);
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if i % 10_000 == 0 {
                let t = i as f64 * dt;
                let exact = amplitude_ode_solution(a0, gamma, delta, t).unwrap();
                assert!((a * a - exact).abs() < 1e-9, "A0 = {a0}, t = {t}");
            }
        }
    }
}

#[test]
fn amplitude_is_monotone() {
    let ts: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
    let series = |a0: f64| -> Vec<f64> { ts.iter().map(|&t| amplitude_ode_solution(a0, 1.5, -1.5, t).unwrap()).collect() };
    assert!(series(0.3).windows(2).all(|w| w[1] >= w[0]));
    assert!(series(2.5).windows(2).all(|w| w[1] <= w[0]));
    assert!(series(1.0).iter().all(|&v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn phase_approaches_the_slant_asymptote() {
    for (gamma, delta, a0) in [(1.5, -1.5, 3.0), (1.5, -1.5, 0.5f64.sqrt()), (0.1, -0.4, 0.9)] {
        let a_star2 = -gamma / delta;
        let b = slant_asymptote_offset(a0, gamma, delta).unwrap();
        let t = 20.0 / gamma;
        let theta = phase_integral(a0, gamma, delta, t).unwrap();
        assert!((theta - a_star2 * t - b).abs() < 1e-5, "A0 = {a0}");
        let direct = adaptive_simpson(|s| amplitude_ode_solution(a0, gamma, delta, s).unwrap() - a_star2, 0.0, 20.0f64.max(t), 1e-12);
        assert!((direct - b).abs() < 1e-6);
    }
}

#[test]
fn exact_plane_wave_solves_the_lattice() {
    let cfg = fig5_cfg();
    let fam = PlaneWaveFamily::new(45, &cfg, 3.0, 0.0).unwrap();
    // five-point stencil: the amplitude relaxes at a rate near 27 when A0 = 3
    let dt = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..=10 {
        let t = 0.5 * i as f64 + 2.0 * dt;
        let at = |s: f64| plane_wave_exact(&fam, &cfg, t + s * dt).unwrap();
        let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
        let rhs = dnls_rhs(&at(0.0), &cfg).unwrap();
        for n in 0..cfg.nodes() {
            let fd = (m2.values()[n] - 8.0 * m1.values()[n] + 8.0 * p1.values()[n] - p2.values()[n]) / (12.0 * dt);
            worst = worst.max((fd - rhs.values()[n]).norm());
        }
    }
    assert!(worst < 1e-6, "residual {worst}");
}

#[test]
fn critical_family_is_the_attractor_orbit() {
    let cfg = fig5_cfg();
    let fam = PlaneWaveFamily::new(45, &cfg, 1.0, 0.0).unwrap();
    for t in [0.0, 1.0, 4.0] {
        let s = plane_wave_exact(&fam, &cfg, t).unwrap();
        for (z, x) in s.values().iter().zip(cfg.grid().x()) {
            assert!((z - C64::from_polar(1.0, fam.q * x - fam.omega_tilde * t)).norm() < 1e-10);
        }
    }
}

#[test]
fn simulated_growth_matches_linear_theory() {
    let cfg = fig5_cfg();
    let scan = mi_scan(8, &cfg, 1.0, -1.5).unwrap();
    let m = scan.most_unstable().unwrap();
    let fit = mi_growth_oracle(8, m as i64, &cfg, 1e-7).unwrap();
    assert!(fit.fitted);
    let want = scan.growth[m];
    assert!((fit.rate - want).abs() < 0.05 * want, "fit {} vs {want}", fit.rate);

    let stable = mi_growth_oracle(45, 3, &cfg, 1e-7).unwrap();
    assert!(stable.rate <= 0.0 && !stable.fitted);
}
