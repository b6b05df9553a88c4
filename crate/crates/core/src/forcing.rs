//! Time-periodic forcing potentials `U(t, x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::vec2::{Mat2, Vec2};

/// A `T`-periodic potential with its spatial gradient. Implementations are
/// evaluated concurrently and must be free of interior mutation.
pub trait ForcedPotential: Send + Sync {
    fn period(&self) -> f64;

    fn value(&self, t: f64, x: Vec2) -> f64;

    fn gradient(&self, t: f64, x: Vec2) -> Vec2;

    /// Spatial Hessian. The default differentiates [`Self::gradient`].
    fn hessian(&self, t: f64, x: Vec2) -> Mat2 {
        let h = 1e-6 * (1.0 + x.norm());
        let gx = (self.gradient(t, x + Vec2::new(h, 0.0)) - self.gradient(t, x - Vec2::new(h, 0.0)))
            / (2.0 * h);
        let gy = (self.gradient(t, x + Vec2::new(0.0, h)) - self.gradient(t, x - Vec2::new(0.0, h)))
            / (2.0 * h);
        let off = 0.5 * (gx.y + gy.x);
        Mat2([[gx.x, off], [off, gy.y]])
    }
}

/// `U(t, x) = ε cos(2πqt/T + φ)⟨d, x⟩` with `d` a unit vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicForcing {
    pub amplitude: f64,
    pub harmonic: i32,
    pub phase: f64,
    pub direction: Vec2,
    #[serde(rename = "T")]
    pub period: f64,
}

impl HarmonicForcing {
    /// `direction` is normalized; a zero direction yields the zero potential.
    pub fn new(amplitude: f64, harmonic: i32, phase: f64, direction: Vec2, period: f64) -> Self {
        let norm = direction.norm();
        let direction = if norm > 0.0 { direction / norm } else { Vec2::ZERO };
        HarmonicForcing {
            amplitude,
            harmonic,
            phase,
            direction,
            period,
        }
    }

    fn envelope(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * f64::from(self.harmonic) * t / self.period + self.phase).cos()
    }
}

impl ForcedPotential for HarmonicForcing {
    fn period(&self) -> f64 {
        self.period
    }

    fn value(&self, t: f64, x: Vec2) -> f64 {
        self.envelope(t) * self.direction.dot(x)
    }

    fn gradient(&self, t: f64, _x: Vec2) -> Vec2 {
        self.direction * self.envelope(t)
    }

    fn hessian(&self, _t: f64, _x: Vec2) -> Mat2 {
        Mat2::default()
    }
}

/// A potential assembled from closures.
pub struct FnPotential<V, G> {
    pub period: f64,
    pub value: V,
    pub gradient: G,
}

impl<V, G> ForcedPotential for FnPotential<V, G>
where
    V: Fn(f64, Vec2) -> f64 + Send + Sync,
    G: Fn(f64, Vec2) -> Vec2 + Send + Sync,
{
    fn period(&self) -> f64 {
        self.period
    }

    fn value(&self, t: f64, x: Vec2) -> f64 {
        (self.value)(t, x)
    }

    fn gradient(&self, t: f64, x: Vec2) -> Vec2 {
        (self.gradient)(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn harmonic_forcing_is_periodic_with_consistent_gradient(
            t in -50.0..50.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64,
            q in -3i32..=3, phase in 0.0..6.3f64, ang in 0.0..6.3f64,
        ) {
            let u = HarmonicForcing::new(0.01, q, phase, Vec2::from_angle(ang), 8.0 * PI);
            let p = Vec2::new(x, y);
            prop_assert!((u.value(t + u.period, p) - u.value(t, p)).abs() < 1e-12);
            let h = 1e-6;
            let fd = Vec2::new(
                (u.value(t, p + Vec2::new(h, 0.0)) - u.value(t, p - Vec2::new(h, 0.0))) / (2.0 * h),
                (u.value(t, p + Vec2::new(0.0, h)) - u.value(t, p - Vec2::new(0.0, h))) / (2.0 * h),
            );
            prop_assert!((fd - u.gradient(t, p)).norm() < 1e-5);
        }
    }

    #[test]
    fn default_hessian_differentiates_gradient() {
        let u = FnPotential {
            period: 1.0,
            value: |t: f64, x: Vec2| (2.0 * PI * t).cos() * x.x * x.x * x.y,
            gradient: |t: f64, x: Vec2| Vec2::new(2.0 * x.x * x.y, x.x * x.x) * (2.0 * PI * t).cos(),
        };
        let h = u.hessian(0.0, Vec2::new(0.5, 2.0));
        assert!((h.entry(0, 0) - 4.0).abs() < 1e-8);
        assert!((h.entry(0, 1) - 1.0).abs() < 1e-8);
        assert!(h.entry(1, 1).abs() < 1e-8);
    }
}
