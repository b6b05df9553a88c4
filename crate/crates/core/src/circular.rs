//! Circular `T`-periodic solutions with winding `k`.
//!
//! The angular momentum solves `L²√(L²c² − α²) = mα²cT/(2πk)`. Two
//! independent routes are provided: bracketed bisection with Newton
//! polishing, and the closed-form Cardano root of the cubic in `L²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::loops::Loop;
use crate::physics::{PhysicalParams, ProblemSpec};
use crate::vec2::Vec2;

/// `R e^{iωt}` together with its conserved quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    #[serde(rename = "R")]
    pub radius: f64,
    pub omega: f64,
    #[serde(rename = "L")]
    pub angular_momentum: f64,
    pub h: f64,
    pub spec: ProblemSpec,
}

/// Right-hand side `mα²cT/(2πk)`.
fn target(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { m, c, alpha } = spec.params;
    m * alpha * alpha * c * spec.period / (2.0 * PI * f64::from(spec.k))
}

/// Solves for `u = L²c² − α² > 0`, in which the equation reads
/// `(u + α²)√u = c²·target` and is well conditioned near `L = α/c`.
fn solve_excess(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { c, alpha, .. } = spec.params;
    let a2 = alpha * alpha;
    let rhs = c * c * target(spec);
    let g = |u: f64| (u + a2) * u.sqrt() - rhs;

    // The Cardano estimate, doubled, brackets the root from above.
    let l_est = solve_angular_momentum_cardano(spec);
    let mut hi = (2.0 * (l_est * l_est * c * c - a2)).max(4.0 * a2).max(1e-300);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..3 {
        if u <= 0.0 {
            break;
        }
        let d = u.sqrt() + (u + a2) / (2.0 * u.sqrt());
        let next = u - g(u) / d;
        if next > 0.0 && next.is_finite() && g(next).abs() <= g(u).abs() {
            u = next;
        } else {
            break;
        }
    }
    u
}

/// Angular momentum of the circular solution by bisection and Newton polishing.
pub fn solve_angular_momentum(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { c, alpha, .. } = spec.params;
    let u = solve_excess(spec);
    (u + alpha * alpha).sqrt() / c
}

/// `U(T)` from Cardano's formula, with the first radicand written through its
/// algebraic conjugate: `1 + a − √(1 + 2a) = a²/(1 + a + √(1 + 2a))`.
pub fn cardano_u(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { m, c, alpha } = spec.params;
    let k = f64::from(spec.k);
    let t = spec.period;
    let a = 8.0 * PI * PI * k * k * alpha * alpha / (27.0 * m * m * c.powi(6) * t * t);
    let big = 1.0 + a + (1.0 + 2.0 * a).sqrt();
    (a * a / big).cbrt() + big.cbrt()
}

/// The factor `3m^{2/3}c²T^{2/3}/(2π^{2/3}k^{2/3}α^{2/3})·U(T) + 1`.
fn cardano_scale(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { m, c, alpha } = spec.params;
    let k = f64::from(spec.k);
    let s = 3.0 * (m * m).cbrt() * c * c * (spec.period * spec.period).cbrt()
        / (2.0 * (PI * PI * k * k * alpha * alpha).cbrt());
    s * cardano_u(spec) + 1.0
}

/// Angular momentum of the circular solution by Cardano's formula.
pub fn solve_angular_momentum_cardano(spec: &ProblemSpec) -> f64 {
    let PhysicalParams { c, alpha, .. } = spec.params;
    alpha / (3f64.sqrt() * c) * cardano_scale(spec).sqrt()
}

/// Residual `L²√(L²c² − α²) − mα²cT/(2πk)` relative to `1 + mα²cT/(2πk)`.
pub fn angular_momentum_residual(spec: &ProblemSpec, l: f64) -> f64 {
    let PhysicalParams { c, alpha, .. } = spec.params;
    let rhs = target(spec);
    (l * l * (l * l * c * c - alpha * alpha).max(0.0).sqrt() - rhs).abs() / (1.0 + rhs)
}

/// The unique circular solution in the winding class of `spec`.
pub fn circular_orbit(spec: &ProblemSpec) -> Result<CircularOrbit> {
    spec.validate()?;
    let PhysicalParams { m, c, alpha } = spec.params;
    let u = solve_excess(spec);
    let l = (u + alpha * alpha).sqrt() / c;
    let radius = l * u.sqrt() / (m * alpha * c);
    let omega = m * alpha * alpha * c / (l * l * u.sqrt());
    // |ẋ| = ωR = α/L, so the Lorentz factor is Lc/√u.
    let gamma = l * c / u.sqrt();
    let h = m * c * c * gamma - alpha / radius;
    Ok(CircularOrbit {
        radius,
        omega,
        angular_momentum: l,
        h,
        spec: *spec,
    })
}

impl CircularOrbit {
    fn sign(&self) -> f64 {
        if self.spec.is_clockwise() {
            -1.0
        } else {
            1.0
        }
    }

    /// Speed `ωR`.
    pub fn speed(&self) -> f64 {
        self.omega * self.radius
    }

    pub fn position(&self, t: f64) -> Vec2 {
        Vec2::polar(self.radius, self.sign() * self.omega * t)
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        self.position(t).perp() * (self.sign() * self.omega)
    }

    /// Acceleration `−ω² x`.
    pub fn acceleration(&self, t: f64) -> Vec2 {
        self.position(t) * (-self.omega * self.omega)
    }

    /// Samples the orbit on `nodes` uniform times in `[0, T)`.
    pub fn sample_loop(&self, nodes: usize) -> Result<Loop> {
        let dt = self.spec.period / nodes as f64;
        Loop::new(
            self.spec.period,
            (0..nodes).map(|j| self.position(j as f64 * dt)).collect(),
        )
    }
}

/// Action level `mc²T − m²c²α²T²/(2πkL³) + 2πkL` of the circular solution.
pub fn circular_action(spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    let PhysicalParams { m, c, alpha } = spec.params;
    let k = f64::from(spec.k);
    let t = spec.period;
    let l = solve_angular_momentum(spec);
    Ok(m * c * c * t - m * m * c * c * alpha * alpha * t * t / (2.0 * PI * k * l.powi(3))
        + 2.0 * PI * k * l)
}

/// The same action level written through the Cardano expression for `L`.
pub fn circular_action_cardano(spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    let PhysicalParams { m, c, alpha } = spec.params;
    let k = f64::from(spec.k);
    let t = spec.period;
    let s = cardano_scale(spec);
    let sqrt3 = 3f64.sqrt();
    Ok(m * c * c * t
        - m * m * c * c * alpha * alpha / (2.0 * PI * k) * (sqrt3 * c / alpha).powi(3) * t * t
            / s.powf(1.5)
        + 2.0 * PI * k * alpha / (sqrt3 * c) * s.sqrt())
}

/// Two-term large-`T` expansion of the circular action level.
pub fn circular_action_asymptotic(spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    let PhysicalParams { m, c, alpha } = spec.params;
    let q = 2.0 * PI * alpha * f64::from(spec.k);
    let t = spec.period;
    Ok(1.5 * q.powf(2.0 / 3.0) * m.cbrt() * t.cbrt()
        + q.powf(4.0 / 3.0) / (8.0 * m.cbrt() * c * c) / t.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::kinetic_density;
    use proptest::prelude::*;

    fn spec(t: f64, k: i64) -> ProblemSpec {
        ProblemSpec::normalized(t, k).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn golden_four_pi() {
        let s = spec(4.0 * PI, 1);
        let l = solve_angular_momentum(&s);
        assert!((l - 2f64.sqrt()).abs() < 1e-14);
        assert!(angular_momentum_residual(&s, l) < 1e-15);
        let o = circular_orbit(&s).unwrap();
        assert!((o.radius - 2f64.sqrt()).abs() < 1e-13);
        assert!((o.omega - 0.5).abs() < 1e-14);
        assert!((o.h - 0.5f64.sqrt()).abs() < 1e-13);
        assert!((circular_action(&s).unwrap() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn doubled_period_and_winding_share_the_circle() {
        let o = circular_orbit(&spec(8.0 * PI, 2)).unwrap();
        assert!((o.radius - 2f64.sqrt()).abs() < 1e-13);
        assert!((o.omega - 0.5).abs() < 1e-14);
        assert!((o.angular_momentum - 2f64.sqrt()).abs() < 1e-14);
        assert!((circular_action(&spec(8.0 * PI, 2)).unwrap() - 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn short_periods_approach_the_light_speed_limit() {
        let mut prev = f64::INFINITY;
        for t in [1.0, 1e-1, 1e-2, 1e-4, 1e-8] {
            let l = solve_angular_momentum(&spec(t, 1));
            assert!(l >= 1.0 && l <= prev);
            prev = l;
        }
        assert!(prev - 1.0 < 1e-12);
    }

    #[test]
    fn cardano_matches_root_finder() {
        for (t, k) in [(4.0 * PI, 1), (100.0, 3)] {
            let s = spec(t, k);
            assert!(rel(solve_angular_momentum_cardano(&s), solve_angular_momentum(&s)) < 1e-10);
        }
        assert!((solve_angular_momentum_cardano(&spec(4.0 * PI, 1)) - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cardano_u_large_period() {
        let cbrt2 = 2f64.cbrt();
        let u = cardano_u(&spec(1e6, 1));
        assert!((u / cbrt2 - 1.0).abs() < 1e-7);
        for t in [10.0, 100.0, 1e3, 1e4] {
            let u = cardano_u(&spec(t, 1));
            assert!((cbrt2..=2.0 * cbrt2).contains(&u), "U({t}) = {u}");
        }
    }

    #[test]
    fn two_closed_forms_agree() {
        for t in [5.0, 50.0, 500.0] {
            let s = spec(t, 2);
            let a = circular_action(&s).unwrap();
            let b = circular_action_cardano(&s).unwrap();
            assert!(rel(a, b) < 1e-9, "T={t}: {a} vs {b}");
        }
    }

    #[test]
    fn action_equals_constant_integrand_times_period() {
        for (t, k) in [(0.3, 1), (7.0, 2), (123.0, 5), (900.0, 3)] {
            let s = spec(t, k);
            let o = circular_orbit(&s).unwrap();
            let f = kinetic_density(&s.params, Vec2::new(o.speed(), 0.0)).unwrap();
            let direct = t * (f + 1.0 / o.radius);
            assert!(rel(circular_action(&s).unwrap(), direct) < 1e-12);
        }
    }

    #[test]
    fn asymptotic_expansion() {
        let s = spec(1e6, 1);
        let exact = circular_action(&s).unwrap();
        let approx = circular_action_asymptotic(&s).unwrap();
        assert!(rel(approx, exact) < 1e-3);
        let leading = 1.5 * (2.0 * PI).powf(2.0 / 3.0) * 100.0;
        assert!((approx - leading - 0.125 * (2.0 * PI).powf(4.0 / 3.0) / 100.0).abs() < 1e-9);
        let gap = |t: f64| {
            let s = spec(t, 1);
            (circular_action(&s).unwrap() - circular_action_asymptotic(&s).unwrap()).abs()
        };
        assert!(gap(1e6) <= 0.5 * gap(1e5));
        let mut prev = 0.0;
        for t in [1.0, 2.0, 10.0, 1e3, 1e6] {
            let v = circular_action_asymptotic(&spec(t, 1)).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn clockwise_orbit_is_reflected() {
        let ccw = circular_orbit(&spec(4.0 * PI, 1)).unwrap();
        let cw = circular_orbit(&spec(4.0 * PI, -1)).unwrap();
        let t = 1.3;
        assert!((cw.position(t) - ccw.position(t).reflect()).norm() < 1e-15);
        assert_eq!(cw.angular_momentum, ccw.angular_momentum);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn random_specs_solve_accurately(t in 0.1..1e3f64, k in 1i64..=6) {
            let s = spec(t, k);
            let l = solve_angular_momentum(&s);
            prop_assert!(l > 1.0);
            prop_assert!(angular_momentum_residual(&s, l) <= 1e-12);
            prop_assert!(rel(solve_angular_momentum_cardano(&s), l) <= 1e-10);
            let o = circular_orbit(&s).unwrap();
            prop_assert!((o.omega * t - 2.0 * PI * k as f64).abs() <= 1e-10 * (k as f64));
        }
    }
}
