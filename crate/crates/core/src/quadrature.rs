//! Composite Gauss-Legendre quadrature for smooth piecewise integrands.

use std::sync::OnceLock;

const ORDER: usize = 20;
const MAX_PANEL_WIDTH: f64 = 0.25;

fn nodes() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static NODES: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    NODES.get_or_init(|| {
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=ORDER {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// Integrates `f` over `[a, b]` with 20-point Gauss-Legendre on panels no
/// wider than 0.25. Integrands must be smooth on `[a, b]`; split at kinks
/// with [`integrate_pieces`].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (x, w) = nodes();
    let panels = ((b - a) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let half = 0.5 * h;
        let mid = lo + half;
        let mut acc = 0.0;
        for i in 0..ORDER {
            acc += w[i] * f(mid + half * x[i]);
        }
        total += acc * half;
    }
    total
}

/// Integrates over consecutive pieces delimited by sorted `breaks`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| integrate(f, w[0], w[1])).sum()
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = nodes();
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_moments() {
        // Int_{-10}^{10} z^4 phi = 3
        let m4 = integrate(&|z: f64| z.powi(4) * normal_pdf(z), -10.0, 10.0);
        assert!((m4 - 3.0).abs() < 1e-12);
        let mass = integrate(&normal_pdf, -9.0, 9.0);
        assert!((mass - 1.0).abs() < 1e-14);
    }
}
