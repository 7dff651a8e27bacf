//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 50;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn adaptive_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    refine(&mut f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Running integrals `∫_{start}^{t_i} f` for nondecreasing `times`.
pub fn cumulative(mut f: impl FnMut(f64) -> f64, start: f64, times: &[f64], tol: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = start;
    times
        .iter()
        .map(|&t| {
            acc += adaptive_simpson(&mut f, prev, t, tol);
            prev = t;
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn transcendental() {
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-13);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-12);
        let v = adaptive_simpson(|x| 1.0 / (1.0 + x * x), -50.0, 50.0, 1e-12);
        assert!((v - 2.0 * 50f64.atan()).abs() < 1e-10);
    }

    #[test]
    fn empty_and_reversed_intervals() {
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9), 0.0);
        let v = adaptive_simpson(|x| x, 1.0, 0.0, 1e-12);
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let ts = [0.0, 0.5, 1.0, 2.0, 4.0];
        let got = cumulative(f64::cos, 0.0, &ts, 1e-12);
        for (t, g) in ts.iter().zip(got) {
            assert!((g - t.sin()).abs() < 1e-10);
        }
    }
}
