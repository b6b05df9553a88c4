//! Discretized `T`-periodic planar loops and the discrete action functional.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::forcing::ForcedPotential;
use crate::physics::{kinetic_density_unchecked, PhysicalParams};
use crate::spectral::Spectral;
use crate::vec2::Vec2;

pub const MIN_NODES: usize = 16;

/// A closed path sampled at `N` uniform times `t_j = jT/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoop")]
pub struct Loop {
    #[serde(rename = "T")]
    period: f64,
    nodes: Vec<Vec2>,
}

#[derive(Deserialize)]
struct RawLoop {
    #[serde(rename = "T")]
    period: f64,
    nodes: Vec<Vec2>,
}

impl TryFrom<RawLoop> for Loop {
    type Error = Error;

    fn try_from(raw: RawLoop) -> Result<Self> {
        Loop::new(raw.period, raw.nodes)
    }
}

impl Loop {
    pub fn new(period: f64, nodes: Vec<Vec2>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
        }
        if nodes.len() < MIN_NODES {
            return Err(domain(format!(
                "a loop needs at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(domain("loop nodes must be finite"));
        }
        Ok(Loop { period, nodes })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec2> {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.period / self.nodes.len() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Spectral velocities at the nodes.
    pub fn velocities(&self) -> Vec<Vec2> {
        Spectral::new(self.len(), self.period).derivative(&self.nodes)
    }

    /// The trigonometric interpolant evaluated at time `t`.
    pub fn interpolate(&self, t: f64) -> Vec2 {
        let coeffs = Spectral::new(self.len(), self.period).coefficients(&self.nodes);
        Spectral::evaluate(&coeffs, self.period, t)
    }

    pub fn rotated(&self, angle: f64) -> Loop {
        self.map_nodes(|x| x.rotate(angle))
    }

    /// Mirror image across the first axis; reverses the winding number.
    pub fn reflected(&self) -> Loop {
        self.map_nodes(Vec2::reflect)
    }

    fn map_nodes(&self, f: impl Fn(Vec2) -> Vec2) -> Loop {
        Loop {
            period: self.period,
            nodes: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    /// The loop `t ↦ x(t + shift)` sampled on the same grid.
    pub fn time_shifted(&self, shift: f64) -> Loop {
        Loop {
            period: self.period,
            nodes: Spectral::new(self.len(), self.period).time_shift(&self.nodes, shift),
        }
    }

    /// CSV rows `t,x,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for (j, x) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{:?},{:?},{:?}", self.time(j), x.x, x.y);
        }
        out
    }
}

/// Kinetic, Keplerian and forcing parts of the discrete action.
///
/// Non-finite totals are serialized as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    #[serde(with = "ext_real")]
    pub kinetic: f64,
    #[serde(with = "ext_real")]
    pub keplerian: f64,
    pub forcing: f64,
    #[serde(with = "ext_real")]
    pub total: f64,
}

impl ActionBreakdown {
    pub const INFINITE: ActionBreakdown = ActionBreakdown {
        kinetic: f64::INFINITY,
        keplerian: f64::INFINITY,
        forcing: 0.0,
        total: f64::INFINITY,
    };

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Serde adapter for values in `(−∞, +∞]`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

/// The discrete action on a fixed grid, with FFT plans reused across calls.
pub struct DiscreteFunctional<'a> {
    params: PhysicalParams,
    potential: Option<&'a dyn ForcedPotential>,
    spectral: Spectral,
    period: f64,
}

impl<'a> DiscreteFunctional<'a> {
    pub fn new(
        params: &PhysicalParams,
        period: f64,
        len: usize,
        potential: Option<&'a dyn ForcedPotential>,
    ) -> Self {
        DiscreteFunctional {
            params: *params,
            potential,
            spectral: Spectral::new(len, period),
            period,
        }
    }

    pub fn len(&self) -> usize {
        self.spectral.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectral.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn potential(&self) -> Option<&'a dyn ForcedPotential> {
        self.potential
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn dt(&self) -> f64 {
        self.period / self.len() as f64
    }

    pub fn velocities(&self, nodes: &[Vec2]) -> Vec<Vec2> {
        self.spectral.derivative(nodes)
    }

    pub fn action(&self, nodes: &[Vec2]) -> ActionBreakdown {
        self.action_with_velocities(nodes, &self.velocities(nodes))
    }

    fn action_with_velocities(&self, nodes: &[Vec2], vel: &[Vec2]) -> ActionBreakdown {
        let c2 = self.params.c * self.params.c;
        let dt = self.dt();
        let mut kinetic = 0.0;
        let mut keplerian = 0.0;
        let mut forcing = 0.0;
        for (j, (x, v)) in nodes.iter().zip(vel).enumerate() {
            let s = v.norm_sq() / c2;
            let r = x.norm();
            if !(s <= 1.0) || r == 0.0 || !r.is_finite() {
                return ActionBreakdown::INFINITE;
            }
            kinetic += kinetic_density_unchecked(&self.params, s);
            keplerian += self.params.alpha / r;
            if let Some(u) = self.potential {
                forcing += u.value(j as f64 * dt, *x);
            }
        }
        let (kinetic, keplerian, forcing) = (kinetic * dt, keplerian * dt, forcing * dt);
        ActionBreakdown {
            kinetic,
            keplerian,
            forcing,
            total: kinetic + keplerian + forcing,
        }
    }

    /// Relativistic momenta `φ(v_j)`; fails unless every `|v_j| < c`.
    pub fn momenta(&self, vel: &[Vec2]) -> Result<Vec<Vec2>> {
        let c2 = self.params.c * self.params.c;
        vel.iter()
            .enumerate()
            .map(|(j, v)| {
                let s = v.norm_sq() / c2;
                if !(s < 1.0) {
                    return Err(domain(format!(
                        "speed {} at node {j} is not below c = {}",
                        v.norm(),
                        self.params.c
                    )));
                }
                Ok(*v * (self.params.m / (1.0 - s).sqrt()))
            })
            .collect()
    }

    /// Action and its exact gradient with respect to the node positions.
    pub fn action_and_gradient(&self, nodes: &[Vec2]) -> Result<(ActionBreakdown, Vec<Vec2>)> {
        let vel = self.velocities(nodes);
        let action = self.action_with_velocities(nodes, &vel);
        if !action.is_finite() {
            return Err(domain("gradient requested outside the finite-action domain"));
        }
        let momenta = self.momenta(&vel)?;
        let dt = self.dt();
        // The spectral derivative is antisymmetric, so its adjoint is −D.
        let dp = self.spectral.derivative(&momenta);
        let grad = nodes
            .iter()
            .zip(&dp)
            .enumerate()
            .map(|(j, (x, dpj))| {
                let r = x.norm();
                let mut g = -*dpj - *x * (self.params.alpha / (r * r * r));
                if let Some(u) = self.potential {
                    g += u.gradient(j as f64 * dt, *x);
                }
                g * dt
            })
            .collect();
        Ok((action, grad))
    }
}

/// Winding number about the origin by summing the turn between consecutive nodes.
pub fn winding_number(lp: &Loop) -> Result<i64> {
    winding_of_nodes(lp.nodes())
}

pub(crate) fn winding_of_nodes(nodes: &[Vec2]) -> Result<i64> {
    let n = nodes.len();
    if let Some(j) = nodes.iter().position(|x| x.norm_sq() == 0.0) {
        return Err(domain(format!("node {j} sits at the origin")));
    }
    let mut total = 0.0;
    for j in 0..n {
        let (a, b) = (nodes[j], nodes[(j + 1) % n]);
        let turn = a.cross(b).atan2(a.dot(b));
        if turn.abs() >= PI - 1e-12 {
            return Err(Error::Resolution {
                index: j,
                next: (j + 1) % n,
                turn,
            });
        }
        total += turn;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

pub fn discrete_action(
    params: &PhysicalParams,
    lp: &Loop,
    potential: Option<&dyn ForcedPotential>,
) -> ActionBreakdown {
    DiscreteFunctional::new(params, lp.period(), lp.len(), potential).action(lp.nodes())
}

pub fn discrete_action_gradient(
    params: &PhysicalParams,
    lp: &Loop,
    potential: Option<&dyn ForcedPotential>,
) -> Result<Vec<Vec2>> {
    DiscreteFunctional::new(params, lp.period(), lp.len(), potential)
        .action_and_gradient(lp.nodes())
        .map(|(_, g)| g)
}

/// Trigonometric interpolation onto `target` uniform nodes.
pub fn resample(lp: &Loop, target: usize) -> Result<Loop> {
    if target < MIN_NODES {
        return Err(domain(format!("cannot resample to {target} < {MIN_NODES} nodes")));
    }
    let nodes = Spectral::new(lp.len(), lp.period()).resample(lp.nodes(), target);
    Loop::new(lp.period(), nodes)
}

pub fn min_radius(lp: &Loop) -> f64 {
    lp.nodes().iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min)
}

pub fn max_radius(lp: &Loop) -> f64 {
    lp.nodes().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn max_speed(lp: &Loop) -> f64 {
    lp.velocities().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `‖x‖∞ ≤ cT`, which every finite-action loop with nonzero winding satisfies.
pub fn sup_bound_check(params: &PhysicalParams, lp: &Loop) -> bool {
    max_radius(lp) <= params.c * lp.period()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::circular_orbit;
    use crate::physics::ProblemSpec;
    use crate::rosette::rosette_orbit;

    fn circle(n: usize, k: i64, rho: f64, period: f64) -> Loop {
        let nodes = (0..n)
            .map(|j| Vec2::polar(rho, 2.0 * PI * k as f64 * j as f64 / n as f64))
            .collect();
        Loop::new(period, nodes).unwrap()
    }

    #[test]
    fn construction_rejects_short_or_bad_loops() {
        assert!(Loop::new(1.0, vec![Vec2::new(1.0, 0.0); 15]).is_err());
        assert!(Loop::new(0.0, vec![Vec2::new(1.0, 0.0); 16]).is_err());
        assert!(Loop::new(1.0, vec![Vec2::new(f64::NAN, 0.0); 16]).is_err());
        let json = r#"{"T": 1.0, "nodes": [[1.0, 0.0]]}"#;
        assert!(serde_json::from_str::<Loop>(json).is_err());
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_number(&circle(64, 3, 1.0, 1.0)).unwrap(), 3);
        assert_eq!(winding_number(&circle(64, -2, 1.0, 1.0)).unwrap(), -2);
        let ellipse: Vec<Vec2> = (0..64)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 64.0;
                Vec2::new(3.0 + 2.0 * t.cos(), 0.5 * t.sin())
            })
            .collect();
        assert_eq!(winding_number(&Loop::new(1.0, ellipse).unwrap()).unwrap(), 0);

        let mut bad = circle(16, 1, 1.0, 1.0).into_nodes();
        bad[3] = Vec2::ZERO;
        assert!(matches!(
            winding_number(&Loop::new(1.0, bad).unwrap()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            winding_number(&circle(16, 8, 1.0, 1.0)),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn circular_loop_action_gradient_and_speed() {
        let p = PhysicalParams::default();
        let spec = ProblemSpec::normalized(4.0 * PI, 1).unwrap();
        let lp = circular_orbit(&spec).unwrap().sample_loop(256).unwrap();
        let a = discrete_action(&p, &lp, None);
        assert!((a.total - 4.0 * PI).abs() < 1e-8 * 4.0 * PI);
        assert_eq!(a.total, a.kinetic + a.keplerian + a.forcing);
        let g = discrete_action_gradient(&p, &lp, None).unwrap();
        let gn = g.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt();
        assert!(gn < 1e-8, "{gn}");
        assert!((max_speed(&lp) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(sup_bound_check(&p, &lp));
    }

    #[test]
    fn superluminal_and_singular_loops_have_infinite_action() {
        let p = PhysicalParams::default();
        // Speed 2πkρ/T = 2π·4/8 > 1.
        let fast = circle(64, 1, 4.0, 8.0);
        assert!(!discrete_action(&p, &fast, None).is_finite());
        assert!(discrete_action_gradient(&p, &fast, None).is_err());
        let mut nodes = circle(64, 1, 0.1, 8.0).into_nodes();
        nodes[0] = Vec2::ZERO;
        assert!(!discrete_action(&p, &Loop::new(8.0, nodes).unwrap(), None).is_finite());
        let text = serde_json::to_string(&ActionBreakdown::INFINITE).unwrap();
        assert!(text.contains("\"inf\""));
        let back: ActionBreakdown = serde_json::from_str(&text).unwrap();
        assert!(!back.is_finite());
    }

    #[test]
    fn sup_bound_rejects_large_circle() {
        let p = PhysicalParams::default();
        assert!(!sup_bound_check(&p, &circle(64, 1, 2.0 * 3.0, 3.0)));
    }

    #[test]
    fn rosette_loop_winding_action_and_resampling() {
        let p = PhysicalParams::default();
        let spec = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
        let orbit = rosette_orbit(&spec, 1).unwrap();
        let lp = orbit.sample_loop(512).unwrap();
        assert_eq!(winding_number(&lp).unwrap(), 2);
        assert_eq!(winding_number(&resample(&lp, 128).unwrap()).unwrap(), 2);
        assert!(sup_bound_check(&p, &lp));
        let same = resample(&lp, 512).unwrap();
        assert!(lp.nodes().iter().zip(same.nodes()).all(|(a, b)| (*a - *b).norm() < 1e-13));
        let a512 = discrete_action(&p, &lp, None).total;
        let a1024 = discrete_action(&p, &resample(&lp, 1024).unwrap(), None).total;
        assert!((a512 - a1024).abs() < 1e-6);
    }

    #[test]
    fn time_translation_leaves_unforced_action_unchanged() {
        let p = PhysicalParams::default();
        let spec = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
        let lp = rosette_orbit(&spec, 1).unwrap().sample_loop(256).unwrap();
        let a = discrete_action(&p, &lp, None).total;
        for s in [0.37, 1.9, 11.2] {
            let b = discrete_action(&p, &lp.time_shifted(s), None).total;
            assert!((a - b).abs() < 1e-10, "{s}: {a} vs {b}");
        }
    }
}
