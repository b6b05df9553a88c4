//! Physical constants, the relativistic kinetic density and its gradient
//! (the momentum map), and the phase-plane region of bounded non-circular
//! motion.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::vec2::Vec2;

/// Mass `m`, speed of light `c` and Kepler coupling `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub c: f64,
    pub alpha: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            m: 1.0,
            c: 1.0,
            alpha: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(m: f64, c: f64, alpha: f64) -> Result<Self> {
        let p = PhysicalParams { m, c, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("c", self.c), ("alpha", self.alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Rest energy `mc²`.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}

/// Direction of traversal of the orbits of a [`ProblemSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
}

/// A period `T` and a winding class.
///
/// The winding number is stored as a magnitude `k >= 1` plus an
/// orientation; closed-form quantities are those of the counter-clockwise
/// representative, and sampled loops are reflected for clockwise specs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub params: PhysicalParams,
    #[serde(rename = "T")]
    pub period: f64,
    pub k: u32,
    pub orientation: Orientation,
}

impl ProblemSpec {
    /// Builds a spec from a signed winding number. `winding = 0` is rejected.
    pub fn new(params: PhysicalParams, period: f64, winding: i64) -> Result<Self> {
        params.validate()?;
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        if winding == 0 {
            return Err(Error::InvalidParameter(
                "winding number 0 is not allowed".into(),
            ));
        }
        let k = u32::try_from(winding.unsigned_abs())
            .map_err(|_| Error::InvalidParameter(format!("winding {winding} is too large")))?;
        let orientation = if winding > 0 {
            Orientation::CounterClockwise
        } else {
            Orientation::Clockwise
        };
        Ok(ProblemSpec {
            params,
            period,
            k,
            orientation,
        })
    }

    /// Normalized constants `m = c = alpha = 1`.
    pub fn normalized(period: f64, winding: i64) -> Result<Self> {
        Self::new(PhysicalParams::default(), period, winding)
    }

    /// The signed winding number.
    pub fn winding(&self) -> i64 {
        match self.orientation {
            Orientation::CounterClockwise => i64::from(self.k),
            Orientation::Clockwise => -i64::from(self.k),
        }
    }

    pub fn is_clockwise(&self) -> bool {
        self.orientation == Orientation::Clockwise
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.period.is_finite() && self.period > 0.0) || self.k == 0 {
            return Err(Error::InvalidParameter(format!(
                "invalid spec: T = {}, k = {}",
                self.period, self.k
            )));
        }
        Ok(())
    }
}

/// Energy `h` and angular momentum `L`, conserved along the unforced flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyMomentum {
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Relativistic kinetic density `F(v) = mc²(1 − √(1 − |v|²/c²))`.
pub fn kinetic_density(params: &PhysicalParams, v: Vec2) -> Result<f64> {
    let s = v.norm_sq() / (params.c * params.c);
    if !(s <= 1.0) {
        return Err(domain(format!(
            "speed {} exceeds c = {}",
            v.norm(),
            params.c
        )));
    }
    Ok(kinetic_density_unchecked(params, s))
}

/// `F` as a function of `s = |v|²/c² ∈ [0, 1]`, written without the
/// cancellation of `1 − √(1 − s)` at small speeds.
pub(crate) fn kinetic_density_unchecked(params: &PhysicalParams, s: f64) -> f64 {
    params.rest_energy() * s / (1.0 + (1.0 - s).sqrt())
}

/// Lorentz factor `1/√(1 − |v|²/c²)` for `|v| < c`.
pub fn lorentz_factor(params: &PhysicalParams, v: Vec2) -> Result<f64> {
    let s = v.norm_sq() / (params.c * params.c);
    if !(s < 1.0) {
        return Err(domain(format!(
            "speed {} is not below c = {}",
            v.norm(),
            params.c
        )));
    }
    Ok(1.0 / (1.0 - s).sqrt())
}

/// Momentum `p = ∇F(v) = mv/√(1 − |v|²/c²)`; a homeomorphism of the open
/// ball of radius `c` onto the plane.
pub fn momentum_map(params: &PhysicalParams, v: Vec2) -> Result<Vec2> {
    Ok(v * (params.m * lorentz_factor(params, v)?))
}

/// Inverse of [`momentum_map`]: `v = p/(m√(1 + |p|²/(m²c²)))`. Defined on
/// the whole plane.
pub fn momentum_map_inv(params: &PhysicalParams, p: Vec2) -> Vec2 {
    let mc = params.m * params.c;
    p / (params.m * (1.0 + p.norm_sq() / (mc * mc)).sqrt())
}

/// Membership in `Σ = {0 < h < mc², α²/c² < L² < α²m²c²/(m²c⁴ − h²)}`.
pub fn in_sigma(params: &PhysicalParams, em: EnergyMomentum) -> bool {
    let PhysicalParams { m, c, alpha } = *params;
    let mc2 = m * c * c;
    if !(em.h > 0.0 && em.h < mc2) {
        return false;
    }
    let l2 = em.l * em.l;
    let lower = alpha * alpha / (c * c);
    let upper = alpha * alpha * m * m * c * c / (mc2 * mc2 - em.h * em.h);
    lower < l2 && l2 < upper
}
