//! Hamiltonian flow of the unforced problem and its numerical integration.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circular::CircularOrbit;
use crate::error::{domain, Error, Result};
use crate::physics::{momentum_map, momentum_map_inv, EnergyMomentum, PhysicalParams};
use crate::rosette::RosetteOrbit;
use crate::vec2::Vec2;

/// Polar canonical coordinates: radius, angle, radial momentum and angular momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamState {
    pub r: f64,
    pub theta: f64,
    pub l: f64,
    pub ang_mom: f64,
}

/// Right-hand side of Hamilton's equations for
/// `H = mc²√(1 + (l² + Φ²/r²)/(m²c²)) − α/r`.
pub fn vector_field(params: &PhysicalParams, s: &HamState) -> Result<HamState> {
    if !(s.r > 0.0) {
        return Err(domain(format!("radius must be positive, got {}", s.r)));
    }
    let PhysicalParams { m, c, alpha } = *params;
    let root = (1.0 + (s.l * s.l + s.ang_mom * s.ang_mom / (s.r * s.r)) / (m * m * c * c)).sqrt();
    Ok(HamState {
        r: s.l / (m * root),
        theta: s.ang_mom / (m * s.r * s.r * root),
        l: s.ang_mom * s.ang_mom / (m * s.r.powi(3) * root) - alpha / (s.r * s.r),
        ang_mom: 0.0,
    })
}

/// Position and relativistic momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartState {
    pub x: Vec2,
    pub p: Vec2,
}

impl CartState {
    pub fn from_velocity(params: &PhysicalParams, x: Vec2, v: Vec2) -> Result<Self> {
        Ok(CartState {
            x,
            p: momentum_map(params, v)?,
        })
    }

    pub fn velocity(&self, params: &PhysicalParams) -> Vec2 {
        momentum_map_inv(params, self.p)
    }

    /// State at `t = 0` of the circular orbit.
    pub fn circular_start(params: &PhysicalParams, orbit: &CircularOrbit) -> Result<Self> {
        Self::from_velocity(params, orbit.position(0.0), orbit.velocity(0.0))
    }

    /// State at perihelion `(r_min, 0)` of the rosette, moving in the orbit's sense.
    pub fn perihelion(orbit: &RosetteOrbit) -> Self {
        let l = if orbit.spec.is_clockwise() { -orbit.l } else { orbit.l };
        CartState {
            x: Vec2::new(orbit.r_min, 0.0),
            p: Vec2::new(0.0, l / orbit.r_min),
        }
    }

    fn axpy(&self, h: f64, d: &CartState) -> CartState {
        CartState {
            x: self.x + d.x * h,
            p: self.p + d.p * h,
        }
    }
}

/// Energy `mc²√(1 + |p|²/(m²c²)) − α/|x|` and angular momentum `x × p`.
pub fn invariants_of(params: &PhysicalParams, s: &CartState) -> Result<EnergyMomentum> {
    let r = s.x.norm();
    if r == 0.0 {
        return Err(domain("energy is undefined at the origin"));
    }
    let PhysicalParams { m, c, alpha } = *params;
    Ok(EnergyMomentum {
        h: m * c * c * (1.0 + s.p.norm_sq() / (m * m * c * c)).sqrt() - alpha / r,
        l: s.x.cross(s.p),
    })
}

fn cartesian_field(params: &PhysicalParams, s: &CartState) -> CartState {
    let r = s.x.norm();
    CartState {
        x: momentum_map_inv(params, s.p),
        p: s.x * (-params.alpha / (r * r * r)),
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step: (fifth-order solution, error estimate).
fn dp_step(params: &PhysicalParams, y: &CartState, h: f64) -> (CartState, CartState) {
    let mut k = [CartState { x: Vec2::ZERO, p: Vec2::ZERO }; 7];
    k[0] = cartesian_field(params, y);
    for i in 1..7 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            yi = yi.axpy(h * A[i][j], kj);
        }
        k[i] = cartesian_field(params, &yi);
    }
    let mut y5 = *y;
    let mut err = CartState { x: Vec2::ZERO, p: Vec2::ZERO };
    for i in 0..7 {
        y5 = y5.axpy(h * B5[i], &k[i]);
        err = err.axpy(h * (B5[i] - B4[i]), &k[i]);
    }
    debug_assert!(C[6] == 1.0);
    (y5, err)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
}

/// Accepted integrator nodes with their times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: PhysicalParams,
    pub times: Vec<f64>,
    pub states: Vec<CartState>,
    pub stats: IntegratorStats,
}

const MAX_STEPS: usize = 5_000_000;

/// Adaptive Dormand–Prince 5(4) integration with PI step control on `[0, t_end]`.
///
/// Positions are measured against `|x₀|` and momenta against `mc` when
/// forming the mixed absolute/relative error norm.
pub fn integrate(params: &PhysicalParams, s0: CartState, t_end: f64, tol: f64) -> Result<Trajectory> {
    params.validate()?;
    let r0 = s0.x.norm();
    if r0 == 0.0 || !s0.x.is_finite() || !s0.p.is_finite() {
        return Err(domain("initial position must be finite and nonzero"));
    }
    if !(tol > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(domain("need tol > 0 and a finite t_end >= 0"));
    }
    let x_scale = r0;
    let p_scale = params.m * params.c;
    let inv0 = invariants_of(params, &s0)?;
    let err_norm = |y: &CartState, y1: &CartState, e: &CartState| {
        let sx = tol * (x_scale.max(y.x.norm()).max(y1.x.norm()));
        let sp = tol * (p_scale.max(y.p.norm()).max(y1.p.norm()));
        let terms = [e.x.x / sx, e.x.y / sx, e.p.x / sp, e.p.y / sp];
        (terms.iter().map(|t| t * t).sum::<f64>() / 4.0).sqrt()
    };

    let mut traj = Trajectory {
        params: *params,
        times: vec![0.0],
        states: vec![s0],
        stats: IntegratorStats::default(),
    };
    let (mut t, mut y) = (0.0, s0);
    // Initial step from the local orbital time scale.
    let speed = momentum_map_inv(params, s0.p).norm();
    let fall = (r0.powi(3) / params.alpha * params.m).sqrt();
    let mut h = (0.01 * fall).min(0.01 * r0 / speed.max(1e-300)).min(t_end.max(f64::MIN_POSITIVE));
    let mut prev_err: f64 = 1e-4;
    while t < t_end {
        if traj.stats.steps + traj.stats.rejected >= MAX_STEPS {
            return Err(Error::NoConvergence(format!("integrator exceeded {MAX_STEPS} steps at t = {t}")));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Collision { t });
        }
        let (y1, e) = dp_step(params, &y, h);
        let err = err_norm(&y, &y1, &e);
        if !err.is_finite() || y1.x.norm() == 0.0 {
            traj.stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y1;
            traj.stats.steps += 1;
            let inv = invariants_of(params, &y)?;
            traj.stats.max_energy_drift = traj.stats.max_energy_drift.max((inv.h - inv0.h).abs());
            traj.stats.max_momentum_drift = traj.stats.max_momentum_drift.max((inv.l - inv0.l).abs());
            traj.times.push(t);
            traj.states.push(y);
            let factor = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0);
            h *= factor.clamp(0.2, 5.0);
            prev_err = err.max(1e-4);
        } else {
            traj.stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(traj)
}

/// A perihelion passage located to `1e−12` in time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub t: f64,
    pub state: CartState,
    /// Unwrapped polar angle at the passage.
    pub theta: f64,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Polar angle at every node, unwrapped to be continuous.
    pub fn unwrapped_angles(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut theta = self.states[0].x.y.atan2(self.states[0].x.x);
        out.push(theta);
        for w in self.states.windows(2) {
            let (a, b) = (w[0].x, w[1].x);
            theta += a.cross(b).atan2(a.dot(b));
            out.push(theta);
        }
        out
    }

    /// Total signed turns about the origin over the whole trajectory.
    pub fn turns(&self) -> f64 {
        let angles = self.unwrapped_angles();
        (angles[angles.len() - 1] - angles[0]) / (2.0 * PI)
    }

    fn node_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// State at an arbitrary time inside the span, by one integrator step
    /// from the preceding node.
    pub fn state_at(&self, t: f64) -> Result<CartState> {
        if !(0.0..=self.t_end()).contains(&t) {
            return Err(domain(format!("t = {t} outside [0, {}]", self.t_end())));
        }
        let i = self.node_before(t);
        let dt = t - self.times[i];
        if dt == 0.0 {
            return Ok(self.states[i]);
        }
        Ok(dp_step(&self.params, &self.states[i], dt).0)
    }

    /// Perihelion passages: sign changes of `⟨x, ẋ⟩` from negative to
    /// positive, refined by bisection.
    pub fn perihelia(&self) -> Vec<Passage> {
        let radial = |s: &CartState| s.x.dot(s.velocity(&self.params));
        let angles = self.unwrapped_angles();
        let mut out = Vec::new();
        for i in 0..self.states.len() - 1 {
            let (g0, g1) = (radial(&self.states[i]), radial(&self.states[i + 1]));
            if !(g0 < 0.0 && g1 >= 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (0.0, self.times[i + 1] - self.times[i]);
            let step = |tau: f64| dp_step(&self.params, &self.states[i], tau).0;
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if radial(&step(mid)) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let state = step(tau);
            let a = self.states[i].x;
            let theta = angles[i] + a.cross(state.x).atan2(a.dot(state.x));
            out.push(Passage {
                t: self.times[i] + tau,
                state,
                theta,
            });
        }
        // A start exactly at perihelion is a passage too.
        if radial(&self.states[0]).abs() <= 1e-12 * self.states[0].x.norm() * self.params.c {
            let first = Passage {
                t: 0.0,
                state: self.states[0],
                theta: angles[0],
            };
            if out.first().map_or(true, |p| p.t > 1e-9) {
                out.insert(0, first);
            }
        }
        out
    }

    /// CSV rows `t,x,y,px,py,h,L`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,px,py,h,L\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            let inv = invariants_of(&self.params, s).unwrap_or(EnergyMomentum { h: f64::NAN, l: f64::NAN });
            let _ = writeln!(out, "{:?},{:?},{:?},{:?},{:?},{:?},{:?}", t, s.x.x, s.x.y, s.p.x, s.p.y, inv.h, inv.l);
        }
        out
    }
}

/// `max(|x(T) − x(0)|/r_min, |p(T) − p(0)|/(mc))` with `r_min` the smallest
/// sampled radius.
pub fn periodicity_residual(traj: &Trajectory, period: f64) -> Result<f64> {
    let end = traj.state_at(period)?;
    let start = traj.states[0];
    let r_min = traj.states.iter().map(|s| s.x.norm()).fold(f64::INFINITY, f64::min);
    let mc = traj.params.m * traj.params.c;
    Ok(((end.x - start.x).norm() / r_min).max((end.p - start.p).norm() / mc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_field_examples() {
        let p = PhysicalParams::default();
        let s2 = 2f64.sqrt();
        let f = vector_field(&p, &HamState { r: s2, theta: 0.3, l: 0.0, ang_mom: s2 }).unwrap();
        assert!(f.r.abs() < 1e-15 && f.l.abs() < 1e-15 && f.ang_mom == 0.0);
        assert!((f.theta - 0.5).abs() < 1e-15);
        let g = vector_field(&p, &HamState { r: s2, theta: 0.0, l: 0.0, ang_mom: 2.0 }).unwrap();
        let expected = 4.0 / (2.0 * s2 * 3f64.sqrt()) - 0.5;
        assert!((g.l - expected).abs() < 1e-14 && g.l > 0.0);
        assert!(vector_field(&p, &HamState { r: 0.0, theta: 0.0, l: 1.0, ang_mom: 1.0 }).is_err());
    }

    #[test]
    fn invariants_examples() {
        let p = PhysicalParams::default();
        let rest = CartState { x: Vec2::new(1.0, 0.0), p: Vec2::ZERO };
        assert_eq!(invariants_of(&p, &rest).unwrap().h, 0.0);
        let radial = CartState { x: Vec2::new(1.0, 2.0), p: Vec2::new(-0.5, -1.0) };
        assert_eq!(invariants_of(&p, &radial).unwrap().l, 0.0);
        assert!(invariants_of(&p, &CartState { x: Vec2::ZERO, p: Vec2::ZERO }).is_err());
    }

    #[test]
    fn tableau_is_consistent() {
        for (i, row) in A.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - C[i]).abs() < 1e-14);
        }
        assert!((B5.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((B4.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
