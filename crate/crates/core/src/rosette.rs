//! Non-circular periodic solutions of type `(n, k)`: existence thresholds,
//! classification, conic geometry, timing along the orbit and action levels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::loops::Loop;
use crate::physics::{EnergyMomentum, PhysicalParams, ProblemSpec};
use crate::quad;
use crate::vec2::Vec2;

/// An existence threshold `u_n^k`; `u_k^k` is infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Finite(f64),
    Infinite(InfinityMarker),
}

/// Serialized as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfinityMarker {
    #[serde(rename = "inf")]
    Inf,
}

impl Threshold {
    pub const INFINITE: Threshold = Threshold::Infinite(InfinityMarker::Inf);

    pub fn is_finite(&self) -> bool {
        matches!(self, Threshold::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Threshold::Finite(v) => Some(v),
            Threshold::Infinite(_) => None,
        }
    }

    /// Strict inequality `u < period`.
    pub fn is_below(&self, period: f64) -> bool {
        self.finite().is_some_and(|u| u < period)
    }
}

/// Base period scale `T_* = 2πα/(mc³)`.
pub fn threshold_t_star(params: &PhysicalParams) -> f64 {
    2.0 * PI * params.alpha / (params.m * params.c.powi(3))
}

/// `u_n^k = nk³/(k² − n²)^{3/2}·T_*` for `n < k`, infinite for `n = k`.
pub fn threshold_u(params: &PhysicalParams, k: u32, n: u32) -> Result<Threshold> {
    if k == 0 || n > k {
        return Err(domain(format!("threshold index n = {n} outside [0, {k}]")));
    }
    if n == k {
        return Ok(Threshold::INFINITE);
    }
    let (kf, nf) = (f64::from(k), f64::from(n));
    let gap = (kf - nf) * (kf + nf);
    Ok(Threshold::Finite(
        nf * kf.powi(3) / gap.powf(1.5) * threshold_t_star(params),
    ))
}

/// Position of a period among the thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub spec: ProblemSpec,
    /// Number of non-circular solutions; `u_{i_T} < T <= u_{i_T+1}`.
    pub i_t: u32,
    /// `u_n^k` for `n = 0..=k`.
    pub thresholds: Vec<Threshold>,
}

impl ClassificationReport {
    /// The finite thresholds `u_1^k, ..., u_{k-1}^k`.
    pub fn interior_thresholds(&self) -> Vec<f64> {
        let k = self.thresholds.len() - 1;
        self.thresholds[1..k]
            .iter()
            .filter_map(Threshold::finite)
            .collect()
    }

    /// True when `T` coincides with a threshold to relative `rel_tol`.
    pub fn near_threshold(&self, rel_tol: f64) -> bool {
        let t = self.spec.period;
        self.interior_thresholds()
            .iter()
            .any(|&u| (t - u).abs() <= rel_tol * u)
    }
}

pub fn classify(spec: &ProblemSpec) -> Result<ClassificationReport> {
    spec.validate()?;
    let k = spec.k;
    let thresholds = (0..=k)
        .map(|n| threshold_u(&spec.params, k, n))
        .collect::<Result<Vec<_>>>()?;
    // Thresholds increase with n, so i_T counts those strictly below T.
    let i_t = thresholds[1..]
        .iter()
        .take_while(|u| u.is_below(spec.period))
        .count() as u32;
    Ok(ClassificationReport {
        spec: *spec,
        i_t,
        thresholds,
    })
}

/// Closed-form descriptor of a type-`(n, k)` solution, with perihelion at
/// `t = 0` on the positive first axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosetteOrbit {
    pub spec: ProblemSpec,
    pub n: u32,
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "B")]
    pub conic_b: f64,
    #[serde(rename = "e")]
    pub ecc_e: f64,
    #[serde(rename = "E")]
    pub ecc_ratio: f64,
    #[serde(rename = "T_h")]
    pub radial_period: f64,
    pub delta_theta: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// `(2παn/T)^{2/3}`.
fn freq_term(spec: &ProblemSpec, n: f64) -> f64 {
    (2.0 * PI * spec.params.alpha * n / spec.period).powf(2.0 / 3.0)
}

pub fn rosette_orbit(spec: &ProblemSpec, n: u32) -> Result<RosetteOrbit> {
    let report = classify(spec)?;
    if n == 0 || n > report.i_t {
        return Err(Error::NoSuchOrbit {
            n,
            k: spec.k,
            period: spec.period,
            i_t: report.i_t,
        });
    }
    let PhysicalParams { m, c, alpha } = spec.params;
    let (kf, nf) = (f64::from(spec.k), f64::from(n));
    let m23 = (m * m).cbrt();
    let q = freq_term(spec, nf);
    let h = m23 * c * (m23 * c * c - q).sqrt();
    let k2_minus_n2 = (kf - nf) * (kf + nf);
    let l = alpha / c * kf / k2_minus_n2.sqrt();
    // L²c² − α² and m²c⁴ − h² in cancellation-free form.
    let l2c2_minus_a2 = alpha * alpha * nf * nf / k2_minus_n2;
    let energy_gap = m23 * m23 * c * c * q;
    let conic_b = alpha * h / l2c2_minus_a2;
    let ecc_e = (alpha * alpha * m * m * c.powi(4) - energy_gap * l * l * c * c).sqrt() / l2c2_minus_a2;
    let ecc_ratio = ecc_e / conic_b;
    let radial_period = 2.0 * PI * alpha * m * m * c.powi(3) / energy_gap.powf(1.5);
    let delta_theta = 2.0 * PI / (1.0 - (alpha / (l * c)).powi(2)).sqrt();
    Ok(RosetteOrbit {
        spec: *spec,
        n,
        h,
        l,
        conic_b,
        ecc_e,
        ecc_ratio,
        radial_period,
        delta_theta,
        r_min: 1.0 / (conic_b * (1.0 + ecc_ratio)),
        r_max: 1.0 / (conic_b * (1.0 - ecc_ratio)),
    })
}

impl RosetteOrbit {
    pub fn energy_momentum(&self) -> EnergyMomentum {
        EnergyMomentum {
            h: self.h,
            l: self.l,
        }
    }

    /// `√(1 − α²/(L²c²))`, the angular frequency of `1/r` in `θ`.
    pub fn angular_rate(&self) -> f64 {
        let PhysicalParams { c, alpha, .. } = self.spec.params;
        (1.0 - (alpha / (self.l * c)).powi(2)).sqrt()
    }

    /// Total angle swept in one period, `2πk`.
    pub fn total_angle(&self) -> f64 {
        2.0 * PI * f64::from(self.spec.k)
    }

    /// `r(θ) = 1/(B(1 + E cos(√(1 − α²/(L²c²)) θ)))`.
    pub fn radius_of_angle(&self, theta: f64) -> f64 {
        1.0 / (self.conic_b * (1.0 + self.ecc_ratio * (self.angular_rate() * theta).cos()))
    }

    /// `dt/dθ = (h r² + α r)/(Lc²)`.
    pub fn time_rate(&self, theta: f64) -> f64 {
        let PhysicalParams { c, alpha, .. } = self.spec.params;
        let r = self.radius_of_angle(theta);
        (self.h * r * r + alpha * r) / (self.l * c * c)
    }

    /// Time at which the polar angle equals `theta`, with `t(0) = 0`.
    pub fn time_of_angle(&self, theta: f64) -> f64 {
        quad::integrate(
            &|th| self.time_rate(th),
            0.0,
            theta,
            1e-12 * self.spec.period,
        )
    }

    /// Position at polar angle `theta` (counter-clockwise representative).
    fn position_of_angle(&self, theta: f64) -> Vec2 {
        Vec2::polar(self.radius_of_angle(theta), theta)
    }

    /// Inverse clock `t ↦ θ(t)` tabulated for repeated evaluation.
    pub fn clock(&self) -> RosetteClock<'_> {
        RosetteClock::new(self)
    }

    /// Samples the orbit at `nodes` uniform times in `[0, T)`.
    pub fn sample_loop(&self, nodes: usize) -> Result<Loop> {
        if nodes < 16 {
            return Err(domain(format!("need at least 16 nodes, got {nodes}")));
        }
        let clock = self.clock();
        let dt = self.spec.period / nodes as f64;
        let clockwise = self.spec.is_clockwise();
        let pts = (0..nodes)
            .map(|j| {
                let x = self.position_of_angle(clock.angle_at(j as f64 * dt));
                if clockwise {
                    x.reflect()
                } else {
                    x
                }
            })
            .collect();
        Loop::new(self.spec.period, pts)
    }
}

/// Tabulated `t(θ)` on a dense grid, inverted by Hermite interpolation and
/// Newton refinement.
pub struct RosetteClock<'a> {
    orbit: &'a RosetteOrbit,
    thetas: Vec<f64>,
    times: Vec<f64>,
}

impl<'a> RosetteClock<'a> {
    fn new(orbit: &'a RosetteOrbit) -> Self {
        let panels = 64 * orbit.spec.k as usize * orbit.n as usize;
        let total = orbit.total_angle();
        let thetas: Vec<f64> = (0..=panels)
            .map(|i| total * i as f64 / panels as f64)
            .collect();
        let mut times = Vec::with_capacity(thetas.len());
        let mut acc = 0.0;
        times.push(0.0);
        for w in thetas.windows(2) {
            acc += quad::integrate(
                &|th| orbit.time_rate(th),
                w[0],
                w[1],
                1e-14 * orbit.spec.period,
            );
            times.push(acc);
        }
        RosetteClock {
            orbit,
            thetas,
            times,
        }
    }

    /// `t(θ)` from the table plus one Kronrod panel.
    pub fn time_at(&self, theta: f64) -> f64 {
        let i = self.panel_of_angle(theta);
        self.times[i] + quad::kronrod15(&|th| self.orbit.time_rate(th), self.thetas[i], theta).0
    }

    fn panel_of_angle(&self, theta: f64) -> usize {
        let step = self.thetas[1];
        ((theta / step).floor().max(0.0) as usize).min(self.thetas.len() - 2)
    }

    /// `θ(t)` for `t` in `[0, T]`; periodic continuation outside.
    pub fn angle_at(&self, t: f64) -> f64 {
        let period = self.orbit.spec.period;
        let laps = (t / period).floor();
        let t_red = t - laps * period;
        let i = match self
            .times
            .binary_search_by(|probe| probe.total_cmp(&t_red))
        {
            Ok(i) => return self.thetas[i] + laps * self.orbit.total_angle(),
            Err(i) => i.clamp(1, self.times.len() - 1) - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (th0, th1) = (self.thetas[i], self.thetas[i + 1]);
        // Cubic Hermite for θ(t) using dθ/dt = 1/(dt/dθ) at the panel ends.
        let dt = t1 - t0;
        let s = (t_red - t0) / dt;
        let d0 = dt / self.orbit.time_rate(th0);
        let d1 = dt / self.orbit.time_rate(th1);
        let (s2, s3) = (s * s, s * s * s);
        let mut theta = (2.0 * s3 - 3.0 * s2 + 1.0) * th0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * th1
            + (s3 - s2) * d1;
        theta = theta.clamp(th0, th1);
        for _ in 0..20 {
            let f = quad::kronrod15(&|th| self.orbit.time_rate(th), th0, theta).0 + t0 - t_red;
            let step = f / self.orbit.time_rate(theta);
            theta -= step;
            if step.abs() <= 1e-16 * (1.0 + theta.abs()) {
                break;
            }
        }
        theta + laps * self.orbit.total_angle()
    }
}

/// `Υ(s) = mc²T + (2πα/c)√(k² − s²) − (T/c)(m^{2/3}c² − (2παs/T)^{2/3})^{3/2}`,
/// the action level as a function of a continuous index `s ∈ [0, k]`.
pub fn rosette_action_profile(spec: &ProblemSpec, s: f64) -> f64 {
    let PhysicalParams { m, c, alpha } = spec.params;
    let k = f64::from(spec.k);
    let t = spec.period;
    let inner = (m * m).cbrt() * c * c - freq_term(spec, s);
    m * c * c * t + 2.0 * PI * alpha / c * ((k - s) * (k + s)).sqrt()
        - t / c * inner.powf(1.5)
}

/// Action level `I_n^k` of the type-`(n, k)` solution.
pub fn rosette_action(spec: &ProblemSpec, n: u32) -> Result<f64> {
    rosette_orbit(spec, n)?;
    Ok(rosette_action_profile(spec, f64::from(n)))
}

/// `(n, I_n^k)` for `n = 1..=i_T`.
pub fn action_spectrum(spec: &ProblemSpec) -> Result<Vec<(u32, f64)>> {
    let report = classify(spec)?;
    Ok((1..=report.i_t)
        .map(|n| (n, rosette_action_profile(spec, f64::from(n))))
        .collect())
}

/// Large-`T` expansion
/// `(3/2)(2παn)^{2/3}m^{1/3}T^{1/3} + (2πα/c)√(k² − n²) − (3/8)(2παn)^{4/3}/(m^{1/3}c²)·T^{−1/3}`.
pub fn rosette_action_asymptotic(spec: &ProblemSpec, n: u32) -> Result<f64> {
    spec.validate()?;
    if n == 0 || n >= spec.k {
        return Err(domain(format!("n = {n} outside 1..{}", spec.k)));
    }
    let PhysicalParams { m, c, alpha } = spec.params;
    let (kf, nf) = (f64::from(spec.k), f64::from(n));
    let q = 2.0 * PI * alpha * nf;
    let t = spec.period;
    Ok(1.5 * q.powf(2.0 / 3.0) * m.cbrt() * t.cbrt()
        + 2.0 * PI * alpha / c * ((kf - nf) * (kf + nf)).sqrt()
        - 0.375 * q.powf(4.0 / 3.0) / (m.cbrt() * c * c) / t.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::in_sigma;

    fn spec(t: f64, k: i64) -> ProblemSpec {
        ProblemSpec::normalized(t, k).unwrap()
    }

    #[test]
    fn base_scale() {
        let unit = PhysicalParams::default();
        assert!((threshold_t_star(&unit) - 2.0 * PI).abs() < 1e-15);
        let heavy = PhysicalParams::new(2.0, 1.0, 1.0).unwrap();
        assert!((threshold_t_star(&heavy) - PI).abs() < 1e-15);
        let strong = PhysicalParams::new(1.0, 1.0, 2.0).unwrap();
        assert!((threshold_t_star(&strong) - 4.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn threshold_values() {
        let p = PhysicalParams::default();
        let u12 = threshold_u(&p, 2, 1).unwrap().finite().unwrap();
        assert!((u12 - 16.0 * PI / 3f64.powf(1.5)).abs() < 1e-13);
        assert!((u12 - 9.673_596_609).abs() < 1e-8);
        let u13 = threshold_u(&p, 3, 1).unwrap().finite().unwrap();
        assert!((u13 - 27.0 * 2.0 * PI / 8f64.powf(1.5)).abs() < 1e-13);
        assert_eq!(threshold_u(&p, 5, 0).unwrap(), Threshold::Finite(0.0));
        assert_eq!(threshold_u(&p, 5, 5).unwrap(), Threshold::INFINITE);
        assert!(threshold_u(&p, 5, 6).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&spec(8.0 * PI, 2)).unwrap().i_t, 1);
        assert_eq!(classify(&spec(5.0, 2)).unwrap().i_t, 0);
        let r = classify(&spec(20.0, 3)).unwrap();
        assert_eq!(r.i_t, 1);
        let u23 = r.thresholds[2].finite().unwrap();
        assert!((u23 - 108.0 * PI / 5f64.powf(1.5)).abs() < 1e-12);
        assert!((u23 - 30.347_199_638).abs() < 1e-8);
        assert_eq!(classify(&spec(10.0, 1)).unwrap().i_t, 0);
        assert!(classify(&spec(10.0, 1)).unwrap().interior_thresholds().is_empty());
    }

    #[test]
    fn boundary_period_belongs_to_lower_class() {
        let u = threshold_u(&PhysicalParams::default(), 2, 1).unwrap().finite().unwrap();
        assert_eq!(classify(&spec(u, 2)).unwrap().i_t, 0);
        assert!(rosette_orbit(&spec(u, 2), 1).is_err());
    }

    #[test]
    fn golden_rosette() {
        let o = rosette_orbit(&spec(8.0 * PI, 2), 1).unwrap();
        assert!((o.h - 0.776627).abs() < 1e-6);
        assert!((o.l - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((o.radial_period - 8.0 * PI).abs() < 1e-12);
        assert!((o.delta_theta - 4.0 * PI).abs() < 1e-12);
        assert!((o.conic_b - 2.329881).abs() < 1e-6);
        assert!((o.ecc_ratio - 0.883561).abs() < 1e-6);
        assert!((o.r_min - 0.227870).abs() < 1e-6);
        assert!((o.r_max - 3.686086).abs() < 1e-6);
        // (1 − h²)^{3/2} = 1/4 exactly at this period.
        assert!(((1.0 - o.h * o.h).powf(1.5) - 0.25).abs() < 1e-14);
        assert!(in_sigma(&o.spec.params, o.energy_momentum()));
    }

    #[test]
    fn missing_rosette_is_an_error() {
        assert!(matches!(
            rosette_orbit(&spec(5.0, 2), 1),
            Err(Error::NoSuchOrbit { i_t: 0, .. })
        ));
        assert!(rosette_orbit(&spec(100.0, 1), 1).is_err());
    }

    #[test]
    fn radius_and_clock() {
        let o = rosette_orbit(&spec(8.0 * PI, 2), 1).unwrap();
        assert!((o.radius_of_angle(0.0) - o.r_min).abs() < 1e-15);
        assert!((o.radius_of_angle(2.0 * PI) - o.r_max).abs() < 1e-12);
        for th in [0.1, 1.0, 2.5, 7.0] {
            assert!((o.radius_of_angle(th + o.delta_theta) - o.radius_of_angle(th)).abs() < 1e-12);
        }
        assert_eq!(o.time_of_angle(0.0), 0.0);
        assert!((o.time_of_angle(4.0 * PI) - 8.0 * PI).abs() < 1e-7);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let t = o.time_of_angle(4.0 * PI * f64::from(i) / 1000.0);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn clock_inverts_time_of_angle() {
        let o = rosette_orbit(&spec(40.0, 3), 2).unwrap();
        let clock = o.clock();
        for th in [0.0, 0.3, 2.0, 9.0, 18.0] {
            let t = o.time_of_angle(th);
            assert!((clock.time_at(th) - t).abs() < 1e-11);
            assert!((clock.angle_at(t) - th).abs() < 1e-10);
        }
    }

    #[test]
    fn action_values() {
        let s = spec(8.0 * PI, 2);
        let i12 = rosette_action(&s, 1).unwrap();
        let by_hand = 8.0 * PI + 2.0 * PI * 3f64.sqrt() - 8.0 * PI * (1.0 - 0.0625f64.cbrt()).powf(1.5);
        assert!((i12 - by_hand).abs() < 1e-12);
        assert!((i12 - 24.242797).abs() < 1e-6);
        assert!(i12 < 8.0 * PI);
        assert!((rosette_action_profile(&s, 0.0) - 4.0 * PI).abs() < 1e-12);
        assert!(rosette_action(&spec(5.0, 2), 1).is_err());
    }

    #[test]
    fn spectra() {
        let one = action_spectrum(&spec(8.0 * PI, 2)).unwrap();
        assert_eq!(one.len(), 1);
        let two = action_spectrum(&spec(40.0, 3)).unwrap();
        assert_eq!(two.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(two[0].1 <= two[1].1);
        assert!(action_spectrum(&spec(5.0, 2)).unwrap().is_empty());
    }

    #[test]
    fn asymptotic_levels() {
        let s = spec(1e6, 2);
        let exact = rosette_action(&s, 1).unwrap();
        assert!((rosette_action_asymptotic(&s, 1).unwrap() / exact - 1.0).abs() < 1e-3);
        let by_hand = 1.5 * (2.0 * PI).powf(2.0 / 3.0) * 100.0 + 2.0 * PI * 3f64.sqrt()
            - 0.375 * (2.0 * PI).powf(4.0 / 3.0) / 100.0;
        assert!((rosette_action_asymptotic(&s, 1).unwrap() - by_hand).abs() < 1e-9);
        let s3 = spec(1e4, 3);
        let a1 = rosette_action_asymptotic(&s3, 1).unwrap();
        let a2 = rosette_action_asymptotic(&s3, 2).unwrap();
        let circ = crate::circular::circular_action_asymptotic(&s3).unwrap();
        assert!(a1 < a2 && a2 < circ);
    }

    #[test]
    fn threshold_serialization() {
        let json = serde_json::to_string(&[Threshold::Finite(1.5), Threshold::INFINITE]).unwrap();
        assert_eq!(json, r#"[1.5,"inf"]"#);
        let back: Vec<Threshold> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Threshold::Finite(1.5), Threshold::INFINITE]);
    }
}
