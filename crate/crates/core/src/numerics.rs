//! Small numerical kernels shared by the trajectory integrators.

/// Logistic function `1 / (1 + e^{-x})`.
///
/// The exponent in the detector equations grows like `t^2`, so the naive
/// form overflows around `t ≈ 27`. Only `e^{-|x|}` is ever evaluated here.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One classical fourth-order Runge-Kutta step for an `N`-dimensional system.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: [f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, [f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    let k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    let k4 = f(t + h, axpy(y, h, k3));
    let mut out = y;
    for i in 0..N {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[inline]
fn axpy<const N: usize>(y: [f64; N], a: f64, k: [f64; N]) -> [f64; N] {
    let mut out = y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// `∫_lo^hi e^{-2y^2} dy`, evaluated through `erf`/`erfc` so that the
/// result keeps full absolute precision when both limits sit in one tail.
pub fn gaussian_integral(lo: f64, hi: f64) -> f64 {
    const SCALE: f64 = 0.626_657_068_657_750_1; // sqrt(pi / 8)
    let (a, b) = (lo * std::f64::consts::SQRT_2, hi * std::f64::consts::SQRT_2);
    let diff = if a >= 0.0 && b >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else if a <= 0.0 && b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    };
    SCALE * diff
}

/// Cubic Hermite interpolation on `[0, 1]` between `(y0, d0)` and `(y1, d1)`;
/// derivatives are with respect to the physical coordinate with step `h`.
#[inline]
pub fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_total_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [1e-3, 0.7, 5.0, 40.0, 800.0, 1e6] {
            let s = sigmoid(x) + sigmoid(-x);
            assert!((s - 1.0).abs() < 1e-15, "x = {x}");
        }
        assert_eq!(sigmoid(1e6), 1.0);
        assert_eq!(sigmoid(-1e6), 0.0);
        assert!(sigmoid(-800.0).is_finite());
    }

    #[test]
    fn rk4_exponential() {
        let mut f = |_t: f64, y: [f64; 1]| [y[0]];
        let mut y = [1.0];
        let h = 0.01;
        for i in 0..100 {
            y = rk4_step(&mut f, i as f64 * h, y, h);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_integral_against_midpoint_quadrature() {
        let quad = |lo: f64, hi: f64| {
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            (0..n)
                .map(|i| {
                    let y = lo + (i as f64 + 0.5) * h;
                    (-2.0 * y * y).exp()
                })
                .sum::<f64>()
                * h
        };
        for (lo, hi) in [(-1.0, 1.0), (0.3, 2.5), (-3.0, -0.2), (2.0, 4.0), (-0.5, 0.1)] {
            let exact = quad(lo, hi);
            assert!((gaussian_integral(lo, hi) - exact).abs() < 1e-10, "{lo} {hi}");
        }
        assert_eq!(gaussian_integral(0.4, 0.4), 0.0);
        assert!((gaussian_integral(-40.0, 40.0) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 1.0;
        let dp = |x: f64| 0.9 * x * x - 2.0 * x + 2.0;
        let (x0, h) = (0.7, 0.25);
        for s in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let got = hermite(p(x0), dp(x0), p(x0 + h), dp(x0 + h), h, s);
            assert!((got - p(x0 + s * h)).abs() < 1e-14);
        }
    }
}
