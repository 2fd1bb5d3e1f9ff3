//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below |x| = 20, Hankel asymptotic expansion above. The
//! exponentially scaled forms `e^{-|x|} I_n(x)` stay finite for any argument
//! and are what the telegraph kernel uses.

const SWITCH: f64 = 20.0;

/// Terms of `Σ (x²/4)^k / (k! (k+n)!)` for n = 0 or 1.
fn series(x: f64, order: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let n = order as f64;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n));
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// `Σ (-1)^k a_k(n) / x^k` for the large-argument expansion, stopped at the smallest term.
fn asymptotic_sum(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            return sum;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
}

/// `e^{-|x|} I₀(x)`.
pub fn i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SWITCH {
        (-ax).exp() * series(ax, 0)
    } else {
        asymptotic_sum(ax, 0) / (2.0 * std::f64::consts::PI * ax).sqrt()
    }
}

/// `e^{-|x|} I₁(x)`.
pub fn i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SWITCH {
        (-ax).exp() * series(ax, 1)
    } else {
        asymptotic_sum(ax, 1) / (2.0 * std::f64::consts::PI * ax).sqrt()
    };
    v.copysign(x)
}

pub fn i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SWITCH {
        series(ax, 0)
    } else {
        i0e(ax) * ax.exp()
    }
}

pub fn i1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SWITCH {
        series(ax, 1)
    } else {
        i1e(ax) * ax.exp()
    };
    v.copysign(x)
}

/// `e^{-x} I₁(x) / x` for `x >= 0`, with the limit 1/2 at zero.
pub fn i1e_over_x(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1e-6 {
        0.5 * (1.0 - x + 0.5625 * x * x)
    } else {
        i1e(x) / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `I_n(x) = (1/π) ∫₀^π e^{x cos θ} cos(nθ) dθ`, trapezoid rule (spectrally
    /// accurate for this periodic integrand), scaled by `e^{-x}`.
    fn integral_rep_scaled(x: f64, n: u32) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let f = |th: f64| (x * (th.cos() - 1.0)).exp() * (n as f64 * th).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for j in 1..m {
            s += f(j as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 7.0, 15.0, 19.99, 20.01, 35.0, 120.0] {
            let e0 = integral_rep_scaled(x, 0);
            let e1 = integral_rep_scaled(x, 1);
            assert!((i0e(x) - e0).abs() <= 1e-12 * e0, "i0e({x})");
            if x > 0.0 {
                assert!((i1e(x) - e1).abs() <= 1e-12 * e1, "i1e({x})");
            }
        }
    }

    #[test]
    fn known_values_and_symmetry() {
        assert_eq!(i0(0.0), 1.0);
        assert_eq!(i1(0.0), 0.0);
        assert!((i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((i1(1.0) - 0.565_159_103_992_485).abs() < 1e-15);
        assert_eq!(i0(-2.0), i0(2.0));
        assert_eq!(i1(-2.0), -i1(2.0));
        assert!((i1e_over_x(1e-9) - 0.5).abs() < 1e-8);
        assert!((i1e_over_x(0.5) - i1e(0.5) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn continuous_across_branch_switch() {
        let lo = i0e(SWITCH);
        let hi = i0e(SWITCH * (1.0 + 1e-14));
        assert!((lo - hi).abs() < 1e-12 * lo);
        let lo = i1e(SWITCH);
        let hi = i1e(SWITCH * (1.0 + 1e-14));
        assert!((lo - hi).abs() < 1e-12 * lo);
    }
}
