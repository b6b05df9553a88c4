//! Morse index of the circular solution by Fourier–Galerkin eigencounting,
//! and the closed Conley–Zehnder count it must reproduce.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circular::{circular_orbit, CircularOrbit};
use crate::error::{domain, Result};
use crate::linalg::SymMatrix;
use crate::physics::ProblemSpec;
use crate::rosette::classify;
use crate::vec2::{Mat2, Vec2};

/// Coefficients of the second variation `τ(q) = ∫ ½⟨A q̇, q̇⟩ + ½⟨W q, q⟩` at
/// the circular solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCoeffs {
    pub orbit: CircularOrbit,
}

pub fn linearization_coeffs(spec: &ProblemSpec) -> Result<LinearizedCoeffs> {
    Ok(LinearizedCoeffs {
        orbit: circular_orbit(spec)?,
    })
}

impl LinearizedCoeffs {
    pub fn period(&self) -> f64 {
        self.orbit.spec.period
    }

    /// Kinetic Hessian `∇²F(ẋ) = mγ Id + (m/c²)γ³ ẋ⊗ẋ` along the orbit.
    pub fn a(&self, t: f64) -> Mat2 {
        let p = &self.orbit.spec.params;
        let v = self.orbit.velocity(t);
        let gamma = 1.0 / (1.0 - v.norm_sq() / (p.c * p.c)).sqrt();
        Mat2::IDENTITY.scaled(p.m * gamma) + Mat2::outer(v, v).scaled(p.m * gamma.powi(3) / (p.c * p.c))
    }

    /// Hessian of `α/|x|`: `3α|x|⁻⁵ x⊗x − α|x|⁻³ Id`.
    pub fn w(&self, t: f64) -> Mat2 {
        let alpha = self.orbit.spec.params.alpha;
        let x = self.orbit.position(t);
        let r = x.norm();
        Mat2::outer(x, x).scaled(3.0 * alpha / r.powi(5)) - Mat2::IDENTITY.scaled(alpha / r.powi(3))
    }

    /// `τ` evaluated directly on a path given with its derivative.
    pub fn form_density(&self, t: f64, q: Vec2, dq: Vec2) -> f64 {
        0.5 * self.a(t).apply(dq).dot(dq) + 0.5 * self.w(t).apply(q).dot(q)
    }
}

/// Orthonormal real trigonometric basis on `[0, T]`:
/// index 0 is `1/√T`, `2j − 1` is `√(2/T) cos(2πjt/T)` and `2j` is
/// `√(2/T) sin(2πjt/T)`.
#[derive(Clone, Copy, Debug)]
pub struct TrigBasis {
    pub period: f64,
    pub modes: usize,
}

impl TrigBasis {
    pub fn len(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and time derivatives of every basis function at `t`.
    pub fn eval(&self, t: f64, values: &mut [f64], derivs: &mut [f64]) {
        let t_len = self.period;
        values[0] = 1.0 / t_len.sqrt();
        derivs[0] = 0.0;
        let amp = (2.0 / t_len).sqrt();
        for j in 1..=self.modes {
            let w = 2.0 * PI * j as f64 / t_len;
            let (s, c) = (w * t).sin_cos();
            values[2 * j - 1] = amp * c;
            values[2 * j] = amp * s;
            derivs[2 * j - 1] = -amp * w * s;
            derivs[2 * j] = amp * w * c;
        }
    }

    /// The path `Σ_b v[2b + i] φ_b(t) e_i` and its derivative.
    pub fn synthesize(&self, coeffs: &[f64], t: f64) -> (Vec2, Vec2) {
        let mut vals = vec![0.0; self.len()];
        let mut ders = vec![0.0; self.len()];
        self.eval(t, &mut vals, &mut ders);
        let mut q = Vec2::ZERO;
        let mut dq = Vec2::ZERO;
        for b in 0..self.len() {
            let e = Vec2::new(coeffs[2 * b], coeffs[2 * b + 1]);
            q += e * vals[b];
            dq += e * ders[b];
        }
        (q, dq)
    }
}

/// Matrix `M` with `τ(q) = ½ vᵀ M v` for `q = Σ v[2b + i] φ_b e_i`.
///
/// The integrands are trigonometric polynomials of degree at most
/// `2·modes + 2k`, so the uniform trapezoid rule with more nodes than that is
/// exact.
pub fn galerkin_form(coeffs: &LinearizedCoeffs, modes: usize) -> Result<SymMatrix> {
    if modes < 4 {
        return Err(domain(format!("need at least 4 modes, got {modes}")));
    }
    let basis = TrigBasis {
        period: coeffs.period(),
        modes,
    };
    let nb = basis.len();
    let k = coeffs.orbit.spec.k as usize;
    let nodes = 4 * modes + 4 * k + 8;
    let dt = coeffs.period() / nodes as f64;
    let mut vals = vec![0.0; nb];
    let mut ders = vec![0.0; nb];
    let mut mat = SymMatrix::zeros(2 * nb);
    for q in 0..nodes {
        let t = q as f64 * dt;
        basis.eval(t, &mut vals, &mut ders);
        let (a, w) = (coeffs.a(t), coeffs.w(t));
        for b1 in 0..nb {
            for b2 in 0..=b1 {
                let dd = ders[b1] * ders[b2] * dt;
                let vv = vals[b1] * vals[b2] * dt;
                if dd == 0.0 && vv == 0.0 {
                    continue;
                }
                for i in 0..2 {
                    for l in 0..2 {
                        mat.add(2 * b1 + i, 2 * b2 + l, a.entry(i, l) * dd + w.entry(i, l) * vv);
                    }
                }
            }
        }
    }
    // Mirror the lower block triangle.
    let n = 2 * nb;
    for r in 0..n {
        for c in 0..n {
            if r / 2 < c / 2 {
                let v = mat.get(c, r);
                mat.set(r, c, v);
            }
        }
    }
    Ok(mat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub index: usize,
    pub nullity: usize,
    pub modes: usize,
    pub zero_tol: f64,
    pub omega_prime: f64,
    /// `Tω′/2π`.
    pub rotation_ratio: f64,
    pub formula_index: usize,
    pub conley_zehnder: i64,
    /// Set when `T` sits on a threshold, where the count jumps.
    pub at_threshold: bool,
}

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// `ω′ = α²m/L³` at the circular solution.
pub fn omega_prime(spec: &ProblemSpec) -> Result<f64> {
    let o = circular_orbit(spec)?;
    let p = &spec.params;
    Ok(p.alpha * p.alpha * p.m / o.angular_momentum.powi(3))
}

/// Counts eigenvalues of the Galerkin matrix below `−zero_tol·‖M‖` (index)
/// and within `zero_tol·‖M‖` of zero (nullity).
pub fn morse_index(spec: &ProblemSpec, modes: usize, zero_tol: f64) -> Result<MorseReport> {
    if modes < 16 {
        return Err(domain(format!("need at least 16 modes, got {modes}")));
    }
    if !(zero_tol > 0.0) {
        return Err(domain("zero_tol must be positive"));
    }
    let coeffs = linearization_coeffs(spec)?;
    let mat = galerkin_form(&coeffs, modes)?;
    // Only the 0 and ±2k harmonics of the coefficients couple basis
    // functions, so the matrix splits into independent blocks. Couplings
    // that vanish exactly come out of the quadrature at roundoff level
    // (below 1e-13 relative), genuine ones are many orders larger.
    let eig = mat.eigenvalues_blockwise(1e-11 * mat.max_abs());
    let norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = zero_tol * norm;
    let report = classify(spec)?;
    let omega_p = omega_prime(spec)?;
    Ok(MorseReport {
        index: eig.iter().filter(|&&v| v < -cut).count(),
        nullity: eig.iter().filter(|&&v| v.abs() <= cut).count(),
        modes,
        zero_tol,
        omega_prime: omega_p,
        rotation_ratio: spec.period * omega_p / (2.0 * PI),
        formula_index: 2 * report.i_t as usize,
        conley_zehnder: conley_zehnder_formula(spec)?,
        at_threshold: report.near_threshold(1e-9),
    })
}

/// `i^CZ(ξ) + i^CZ(η)` with `i^CZ(η) = −1` and `i^CZ(ξ)` equal to `2r − 1`
/// when `r = Tω′/2π` is an integer, `2⌊r⌋ + 1` otherwise.
pub fn conley_zehnder_formula(spec: &ProblemSpec) -> Result<i64> {
    spec.params.validate()?;
    let o = circular_orbit(spec)?;
    let p = &spec.params;
    let ratio = f64::from(spec.k)
        * (1.0 - (p.alpha / (o.angular_momentum * p.c)).powi(2)).max(0.0).sqrt();
    let nearest = ratio.round();
    let xi = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        2 * nearest as i64 - 1
    } else {
        2 * ratio.floor() as i64 + 1
    };
    Ok(xi - 1)
}
