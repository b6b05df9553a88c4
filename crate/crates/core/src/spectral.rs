//! Trigonometric interpolation on uniform periodic grids.
//!
//! A planar sample sequence is packed as `z_j = x_j + i y_j`, so one complex
//! FFT carries both components. Every operation here is a real Fourier
//! multiplier (odd in frequency, with the Nyquist term treated as a cosine),
//! which keeps both components real.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::vec2::Vec2;

pub struct Spectral {
    len: usize,
    period: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(len: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            len,
            period,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Signed frequency index of FFT bin `j`.
    pub fn frequency_index(&self, j: usize) -> i64 {
        if 2 * j <= self.len {
            j as i64
        } else {
            j as i64 - self.len as i64
        }
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.len % 2 == 0 && 2 * j == self.len
    }

    /// Angular frequency `2πj/T` of bin `j`.
    pub fn angular_frequency(&self, j: usize) -> f64 {
        2.0 * PI * self.frequency_index(j) as f64 / self.period
    }

    /// Normalized Fourier coefficients `c_j` with `z(t_m) = Σ_j c_j e^{2πijm/N}`.
    pub fn coefficients(&self, nodes: &[Vec2]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = nodes.iter().map(|v| Complex64::new(v.x, v.y)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Node values from normalized coefficients.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Vec2> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| Vec2::new(c.re, c.im)).collect()
    }

    /// Applies the multiplier `mult(j)` to every Fourier mode. Real output
    /// requires `mult` to be a real operator (conjugate-symmetric in `j`).
    pub fn multiply(&self, nodes: &[Vec2], mult: impl Fn(usize) -> Complex64) -> Vec<Vec2> {
        let mut coeffs = self.coefficients(nodes);
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c *= mult(j);
        }
        self.synthesize(&coeffs)
    }

    /// Spectral time derivative; the Nyquist mode is dropped, which makes the
    /// operator antisymmetric.
    pub fn derivative(&self, nodes: &[Vec2]) -> Vec<Vec2> {
        self.multiply(nodes, |j| {
            if self.is_nyquist(j) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.angular_frequency(j))
            }
        })
    }

    /// Samples of the interpolant at `t_j + shift`.
    pub fn time_shift(&self, nodes: &[Vec2], shift: f64) -> Vec<Vec2> {
        self.multiply(nodes, |j| {
            let phase = self.angular_frequency(j) * shift;
            if self.is_nyquist(j) {
                Complex64::new(phase.cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, phase)
            }
        })
    }

    /// Evaluates the interpolant at an arbitrary time.
    pub fn evaluate(coeffs: &[Complex64], period: f64, t: f64) -> Vec2 {
        let n = coeffs.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            let freq = if 2 * j <= n { j as i64 } else { j as i64 - n as i64 };
            let phase = 2.0 * PI * freq as f64 * t / period;
            if n % 2 == 0 && 2 * j == n {
                acc += c * phase.cos();
            } else {
                acc += c * Complex64::from_polar(1.0, phase);
            }
        }
        Vec2::new(acc.re, acc.im)
    }

    /// Samples the interpolant at `target` uniform nodes.
    pub fn resample(&self, nodes: &[Vec2], target: usize) -> Vec<Vec2> {
        let coeffs = self.coefficients(nodes);
        let mut folded = vec![Complex64::new(0.0, 0.0); target];
        for (j, c) in coeffs.iter().enumerate() {
            let freq = self.frequency_index(j);
            if self.is_nyquist(j) {
                // cos(πN t/T) split evenly between ±N/2.
                let half = c * 0.5;
                folded[freq.rem_euclid(target as i64) as usize] += half;
                folded[(-freq).rem_euclid(target as i64) as usize] += half;
            } else {
                folded[freq.rem_euclid(target as i64) as usize] += c;
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(target).process(&mut folded);
        folded.iter().map(|c| Vec2::new(c.re, c.im)).collect()
    }

    /// The derivative operator as a dense `N × N` matrix (acting on one
    /// coordinate): `D_{lj} = (π/T)(−1)^{l−j} cot(π(l − j)/N)` for even `N`.
    pub fn derivative_matrix(&self) -> Vec<f64> {
        let n = self.len;
        let mut column = vec![0.0; n];
        // First column from the derivative of the unit impulse.
        let mut impulse = vec![Vec2::ZERO; n];
        impulse[0] = Vec2::new(1.0, 0.0);
        for (l, v) in self.derivative(&impulse).iter().enumerate() {
            column[l] = v.x;
        }
        let mut out = vec![0.0; n * n];
        for l in 0..n {
            for j in 0..n {
                out[l * n + j] = column[(l + n - j) % n];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize, period: f64) -> Vec<Vec2> {
        (0..n)
            .map(|j| {
                let t = period * j as f64 / n as f64;
                let w = 2.0 * PI / period;
                Vec2::new((w * t).cos() + 0.3 * (3.0 * w * t).sin(), 0.5 * (2.0 * w * t).sin())
            })
            .collect()
    }

    #[test]
    fn derivative_of_trigonometric_polynomial() {
        let period = 3.0;
        let n = 32;
        let sp = Spectral::new(n, period);
        let d = sp.derivative(&signal(n, period));
        let w = 2.0 * PI / period;
        for (j, v) in d.iter().enumerate() {
            let t = period * j as f64 / n as f64;
            let exact = Vec2::new(
                -w * (w * t).sin() + 0.9 * w * (3.0 * w * t).cos(),
                w * (2.0 * w * t).cos(),
            );
            assert!((*v - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_matrix_matches_fft_and_closed_form() {
        let (n, period) = (16, 2.5);
        let sp = Spectral::new(n, period);
        let dmat = sp.derivative_matrix();
        for l in 0..n {
            for j in 0..n {
                let expected = if l == j {
                    0.0
                } else {
                    let d = l as f64 - j as f64;
                    let sign = if (l + n - j) % 2 == 0 { 1.0 } else { -1.0 };
                    PI / period * sign / (PI * d / n as f64).tan()
                };
                assert!((dmat[l * n + j] - expected).abs() < 1e-12);
                assert!((dmat[l * n + j] + dmat[j * n + l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_and_shift() {
        let period = 1.0;
        let sp = Spectral::new(24, period);
        let x = signal(24, period);
        let same = sp.resample(&x, 24);
        assert!(x.iter().zip(&same).all(|(a, b)| (*a - *b).norm() < 1e-13));
        let up = sp.resample(&x, 48);
        let finer = signal(48, period);
        assert!(up.iter().zip(&finer).all(|(a, b)| (*a - *b).norm() < 1e-13));
        let shifted = sp.time_shift(&x, period / 24.0);
        for j in 0..24 {
            assert!((shifted[j] - x[(j + 1) % 24]).norm() < 1e-13);
        }
        let coeffs = sp.coefficients(&x);
        assert!((Spectral::evaluate(&coeffs, period, 1.0 / 48.0) - finer[1]).norm() < 1e-13);
    }
}
