//! Closed-form quantities for constant coefficients on the whole plane.
//!
//! For constant `kappa^2` and `H` the stationary solution of
//! `(kappa^2 - div H grad) u = W` has spectral density
//! `f(w) = (2 pi)^{-2} / (kappa^2 + w^T H w)^2`, marginal variance
//! `1 / (4 pi kappa^2 sqrt(det H))`, and a Matérn covariance of order one
//! after the linear change of variables that turns `H` into the identity.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::coefficients::SymMat2;
use crate::error::{Error, Result};

fn check_inputs(kappa_sq: f64, h: &SymMat2) -> Result<()> {
    if !(kappa_sq > 0.0 && kappa_sq.is_finite()) {
        return Err(Error::InvalidSpec(format!("kappa^2 must be positive, got {kappa_sq}")));
    }
    if !h.is_positive_definite() {
        return Err(Error::InvalidSpec("H is not positive definite".into()));
    }
    Ok(())
}

/// `1 / (4 pi kappa^2 sqrt(det H))`.
pub fn analytic_marginal_variance(kappa_sq: f64, h: &SymMat2) -> Result<f64> {
    check_inputs(kappa_sq, h)?;
    Ok(1.0 / (4.0 * PI * kappa_sq * h.det().sqrt()))
}

/// Spectral density of the stationary solution at frequency `w`.
pub fn spectral_density(kappa_sq: f64, h: &SymMat2, w: [f64; 2]) -> f64 {
    let q = h.xx * w[0] * w[0] + 2.0 * h.xy * w[0] * w[1] + h.yy * w[1] * w[1];
    let d = kappa_sq + q;
    1.0 / (4.0 * PI * PI * d * d)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Marginal variance as the integral of the spectral density over the plane.
///
/// Polar coordinates: the trapezoidal rule in the angle (spectrally accurate
/// for the periodic integrand, refined until it settles) and composite
/// Gauss-Legendre in the radius after mapping `[0, inf)` onto `[0, pi/2)`
/// with `r = s tan t`.
pub fn marginal_variance_by_quadrature(kappa_sq: f64, h: &SymMat2) -> Result<f64> {
    check_inputs(kappa_sq, h)?;
    let (x, w) = gauss_legendre(20);
    const PANELS: usize = 8;
    let radial = |phi: f64| -> f64 {
        let e = [phi.cos(), phi.sin()];
        let hq = h.xx * e[0] * e[0] + 2.0 * h.xy * e[0] * e[1] + h.yy * e[1] * e[1];
        let s = (kappa_sq / hq).sqrt();
        let width = FRAC_PI_2 / PANELS as f64;
        let mut acc = 0.0;
        for p in 0..PANELS {
            let a = p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                let t = a + 0.5 * width * (xi + 1.0);
                let r = s * t.tan();
                let jac = s / (t.cos() * t.cos());
                acc += 0.5 * width * wi * r * spectral_density(kappa_sq, h, [r * e[0], r * e[1]]) * jac;
            }
        }
        acc
    };
    let trapezoid =
        |n: usize| -> f64 { (0..n).map(|k| radial(2.0 * PI * k as f64 / n as f64)).sum::<f64>() * 2.0 * PI / n as f64 };
    let mut n = 64;
    let mut prev = trapezoid(n);
    while n < 1 << 16 {
        n *= 2;
        let next = trapezoid(n);
        if (next - prev).abs() <= 1e-13 * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Modified Bessel function of the second kind of order one, `x > 0`.
///
/// Power series for `x <= 2`; Steed's continued fraction (Temme's form) for
/// larger arguments.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 requires a positive argument");
    if x <= 2.0 {
        k1_series(x)
    } else {
        k1_continued_fraction(x)
    }
}

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn k1_series(x: f64) -> f64 {
    // K1(x) = 1/x + ln(x/2) I1(x)
    //         - (x/4) sum_k (psi(k+1) + psi(k+2)) (x^2/4)^k / (k! (k+1)!)
    let y = 0.25 * x * x;
    let mut term = 1.0; // (x^2/4)^k / (k! (k+1)!)
    let mut psi1 = -EULER_GAMMA; // psi(k+1)
    let mut psi2 = 1.0 - EULER_GAMMA; // psi(k+2)
    let mut i1 = 0.0;
    let mut rest = 0.0;
    for k in 0..60 {
        i1 += term;
        rest += (psi1 + psi2) * term;
        let kf = k as f64;
        psi1 += 1.0 / (kf + 1.0);
        psi2 += 1.0 / (kf + 2.0);
        term *= y / ((kf + 1.0) * (kf + 2.0));
        if term < 1e-18 * i1 {
            break;
        }
    }
    1.0 / x + (0.5 * x).ln() * 0.5 * x * i1 - 0.25 * x * rest
}

fn k1_continued_fraction(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= (2 * (i - 1)) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - a1 * h) / x
}

/// Matérn correlation of order one, `(kappa d) K1(kappa d)`, equal to one at
/// `d = 0`.
pub fn matern_order1_correlation(kappa: f64, distance: f64) -> f64 {
    let t = kappa * distance;
    if t == 0.0 {
        1.0
    } else {
        t * bessel_k1(t)
    }
}

/// Eigen-structure of a constant `H` and the implied marginal variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCharacterization {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Angle of the `lambda1` eigenvector in `(-pi/2, pi/2]`; zero when
    /// `H` is isotropic.
    pub theta: f64,
    pub sigma_m_sq: f64,
}

impl StationaryCharacterization {
    /// `R diag(lambda1, lambda2) R^T` with `R` the rotation by `theta`.
    pub fn reconstruct_h(&self) -> SymMat2 {
        let (s, c) = self.theta.sin_cos();
        SymMat2::new(
            self.lambda1 * c * c + self.lambda2 * s * s,
            (self.lambda1 - self.lambda2) * c * s,
            self.lambda1 * s * s + self.lambda2 * c * c,
        )
    }
}

pub fn characterize_constant_h(kappa_sq: f64, h: &SymMat2) -> Result<StationaryCharacterization> {
    let sigma_m_sq = analytic_marginal_variance(kappa_sq, h)?;
    let (lambda1, lambda2) = h.eigenvalues();
    let scale = h.trace().abs();
    let theta = if (h.xx - h.yy).abs() <= 1e-14 * scale && h.xy.abs() <= 1e-14 * scale {
        0.0
    } else {
        let t = 0.5 * (2.0 * h.xy).atan2(h.xx - h.yy);
        if t <= -FRAC_PI_2 {
            t + PI
        } else {
            t
        }
    };
    Ok(StationaryCharacterization { lambda1, lambda2, theta, sigma_m_sq })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K1 at selected arguments, computed once with 50-digit arithmetic.
    const K1_TABLE: &[(&str, &str)] = &[
        ("1e-6", "999999.9999927842789631877078834110641617"),
        ("1e-4", "9999.999508686404957253247492429066859686"),
        ("0.01", "99.97389411829624764303953293055274495539"),
        ("0.1", "9.853844780870606134848546596678817151324"),
        ("0.5", "1.656441120003300893696445403174091511534"),
        ("1", "0.6019072301972345747375400015356173392616"),
        ("1.5", "0.2773878004568438160853596614387540232857"),
        ("1.99", "0.1417175616224013053640357997023818495896"),
        ("2", "0.1398658818165224272845988070354110238872"),
        ("2.01", "0.1380408773192076667119118955616098664876"),
        ("3", "0.04015643112819418437670578015268481490724"),
        ("5", "0.00404461344545216420836502183754061130302"),
        ("7.5", "0.0002652973901252895259879328908414811954444"),
        ("10", "0.00001864877345382558459681685812237167468167"),
        ("15", "0.0000001014172936976209181000389683213643782739"),
        ("20", "0.0000000005883057969557038177650282171542810542332"),
        ("25", "0.000000000003532778073199933770190345645180704461567"),
        ("30", "2.167732001891549424867037833616165090176e-14"),
    ];

    #[test]
    fn k1_matches_reference_table() {
        for (x, v) in K1_TABLE {
            let x: f64 = x.parse().unwrap();
            let v: f64 = v.parse().unwrap();
            let got = bessel_k1(x);
            assert!(((got - v) / v).abs() < 1e-12, "K1({x}) = {got}, expected {v}");
        }
    }

    #[test]
    fn matern_examples() {
        assert_eq!(matern_order1_correlation(2.0, 0.0), 1.0);
        assert!((matern_order1_correlation(1.0, 1.0) - 0.6019072301972346).abs() < 1e-12);
        assert!((matern_order1_correlation(2.0, 0.5) - 0.6019072301972346).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 1..300 {
            let c = matern_order1_correlation(1.0, k as f64 * 0.1);
            assert!(c < prev && c > 0.0);
            prev = c;
        }
    }

    #[test]
    fn marginal_variance_examples() {
        let iso = analytic_marginal_variance(1.0, &SymMat2::IDENTITY).unwrap();
        assert!((iso - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((iso - 0.0796).abs() < 5e-5);
        let h = SymMat2::new(5.0, 4.0, 5.0);
        let ani = analytic_marginal_variance(1.0, &h).unwrap();
        assert!((ani - 1.0 / (12.0 * PI)).abs() < 1e-15);
        assert!((analytic_marginal_variance(4.0, &h).unwrap() - ani / 4.0).abs() < 1e-16);
        assert!(analytic_marginal_variance(1.0, &SymMat2::new(1.0, 2.0, 1.0)).is_err());
        assert!(analytic_marginal_variance(0.0, &h).is_err());
    }

    #[test]
    fn quadrature_reproduces_closed_form() {
        for (k2, h) in
            [(1.0, SymMat2::IDENTITY), (1.0, SymMat2::new(5.0, 4.0, 5.0)), (0.3, SymMat2::new(0.2, -0.1, 7.0))]
        {
            let q = marginal_variance_by_quadrature(k2, &h).unwrap();
            let a = analytic_marginal_variance(k2, &h).unwrap();
            assert!(((q - a) / a).abs() < 1e-9, "{q} vs {a}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        for p in 0..14 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let expected = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn characterization_examples() {
        let c = characterize_constant_h(1.0, &SymMat2::new(5.0, 4.0, 5.0)).unwrap();
        assert!((c.lambda1 - 9.0).abs() < 1e-12 && (c.lambda2 - 1.0).abs() < 1e-12);
        assert!((c.theta - PI / 4.0).abs() < 1e-12);
        let c = characterize_constant_h(1.0, &SymMat2::new(2.0, 0.0, 2.0)).unwrap();
        assert_eq!((c.lambda1, c.lambda2, c.theta), (2.0, 2.0, 0.0));
        let c = characterize_constant_h(1.0, &SymMat2::new(3.0, 0.0, 5.0)).unwrap();
        assert_eq!(c.lambda1, 5.0);
        assert!((c.theta - PI / 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spd() -> impl Strategy<Value = SymMat2> {
            (0.1f64..10.0, 0.1f64..10.0, -PI..PI).prop_map(|(a, b, t)| {
                StationaryCharacterization { lambda1: a.max(b), lambda2: a.min(b), theta: t, sigma_m_sq: 0.0 }
                    .reconstruct_h()
            })
        }

        proptest! {
            #[test]
            fn rotation_invariance(h in spd(), angle in -PI..PI, k2 in 0.1f64..5.0) {
                let a = analytic_marginal_variance(k2, &h).unwrap();
                let b = analytic_marginal_variance(k2, &h.rotated(angle)).unwrap();
                prop_assert!(((a - b) / a).abs() < 1e-12);
            }

            #[test]
            fn characterization_round_trip(h in spd()) {
                let c = characterize_constant_h(1.0, &h).unwrap();
                prop_assert!(c.theta > -FRAC_PI_2 && c.theta <= FRAC_PI_2);
                prop_assert!(c.reconstruct_h().sub(&h).frobenius_norm() <= 1e-12 * h.frobenius_norm());
                prop_assert!((c.lambda1 * c.lambda2 - h.det()).abs() <= 1e-12 * h.trace() * h.trace());
            }
        }
    }
}
