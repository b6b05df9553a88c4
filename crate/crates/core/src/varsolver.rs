//! Direct minimization of the discrete action over loops of a fixed winding
//! number, with or without a periodic forcing term.
//!
//! The descent phase is a Fourier-preconditioned L-BFGS with a backtracking
//! line search that rejects every infeasible trial (infinite action, speed
//! at `c`, a changed winding number, or a node escaping the a-priori bound).
//! Near a minimizer a damped Newton iteration on the dense Hessian finishes
//! the job; when a forcing term breaks the rotation/time-shift symmetry only
//! weakly, a search over that symmetry group moves the iterate along the
//! nearly flat valley first.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky_solve, SymMatrix};
use crate::loops::{resample, winding_of_nodes, ActionBreakdown, DiscreteFunctional, Loop};
use crate::physics::{EnergyMomentum, PhysicalParams, ProblemSpec};
use crate::rosette::{classify, rosette_orbit};
use crate::vec2::{Mat2, Vec2};

pub use crate::forcing::{FnPotential, ForcedPotential, HarmonicForcing};

/// The standard starting circle of radius `cT/(4π|k|)`, traversed at speed `c/2`.
pub fn initial_loop(spec: &ProblemSpec, nodes: usize) -> Result<Loop> {
    spec.validate()?;
    if nodes < 64 {
        return Err(domain(format!("initial loop needs at least 64 nodes, got {nodes}")));
    }
    let k = spec.winding() as f64;
    let rho = spec.params.c * spec.period / (4.0 * PI * k.abs());
    let pts = (0..nodes)
        .map(|j| Vec2::polar(rho, 2.0 * PI * k * j as f64 / nodes as f64))
        .collect();
    Loop::new(spec.period, pts)
}

/// Grid size resolving the closest approach of the type-`(1, k)` rosette:
/// the smallest power of two `>= max(512, 1.5·cT/r_min)`, or 512 when no
/// rosette exists. Coarser grids let the discrete minimizer cut the
/// perihelion passage and undershoot the continuum level.
pub fn suggested_nodes(spec: &ProblemSpec) -> Result<usize> {
    let floor = MinimizeOptions::default().nodes;
    if classify(spec)?.i_t == 0 {
        return Ok(floor);
    }
    let r_min = rosette_orbit(spec, 1)?.r_min;
    let needed = (1.5 * spec.params.c * spec.period / r_min).ceil() as usize;
    Ok(needed.max(floor).next_power_of_two())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    /// Grid size; the initial loop is resampled to it.
    pub nodes: usize,
    /// Stop once `‖∇I‖ ≤ gtol·(1 + |I|)`.
    pub gtol: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Relative amplitude of the seeded low-harmonic perturbation applied to
    /// the initial loop (the standard circle is itself a critical point).
    pub kick: f64,
    pub seed: u64,
    /// Finish with Newton steps once the gradient is below
    /// `newton_switch·(1 + |I|)`.
    pub polish: bool,
    pub newton_switch: f64,
    /// Keep the action of every accepted iterate in the report.
    pub record_history: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            nodes: 512,
            gtol: 1e-8,
            max_iter: 20_000,
            memory: 20,
            kick: 1e-2,
            seed: 0,
            polish: true,
            newton_switch: 1e-4,
            record_history: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    #[serde(rename = "loop")]
    pub lp: Loop,
    pub action: ActionBreakdown,
    pub grad_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub el_residual: f64,
    pub winding: i64,
    pub max_speed: f64,
    pub radial_minima: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<Vec2>,
    action: ActionBreakdown,
    grad: Vec<Vec2>,
}

fn dot(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(*v)).sum()
}

fn norm(a: &[Vec2]) -> f64 {
    dot(a, a).sqrt()
}

fn combine(a: &[Vec2], s: f64, b: &[Vec2]) -> Vec<Vec2> {
    a.iter().zip(b).map(|(u, v)| *u + *v * s).collect()
}

fn diff(a: &[Vec2], b: &[Vec2]) -> Vec<Vec2> {
    a.iter().zip(b).map(|(u, v)| *u - *v).collect()
}

struct Problem<'a> {
    f: DiscreteFunctional<'a>,
    winding: i64,
    speed_cap: f64,
    radius_cap: f64,
}

impl Problem<'_> {
    fn feasible(&self, x: &[Vec2], vel: &[Vec2]) -> bool {
        vel.iter().all(|v| v.norm() < self.speed_cap)
            && x.iter().all(|p| p.norm() <= self.radius_cap)
            && winding_of_nodes(x).ok() == Some(self.winding)
    }

    fn evaluate(&self, x: Vec<Vec2>) -> Option<Iterate> {
        let vel = self.f.velocities(&x);
        if !self.feasible(&x, &vel) {
            return None;
        }
        let (action, grad) = self.f.action_and_gradient(&x).ok()?;
        action.total.is_finite().then_some(Iterate { x, action, grad })
    }

    fn action_only(&self, x: &[Vec2]) -> f64 {
        let vel = self.f.velocities(x);
        if !self.feasible(x, &vel) {
            return f64::INFINITY;
        }
        self.f.action(x).total
    }

    /// Approximate inverse Hessian of the kinetic term, diagonal in Fourier space.
    fn precondition(&self, g: &[Vec2]) -> Vec<Vec2> {
        let sp = self.f.spectral();
        let w1 = 2.0 * PI / self.f.period();
        let scale = 1.0 / (self.f.dt() * self.f.params().m);
        sp.multiply(g, |j| {
            let w = sp.angular_frequency(j);
            Complex64::new(scale / (w * w + w1 * w1), 0.0)
        })
    }

    /// Backtracking search along `d`; every rejected trial halves the step.
    fn line_search(&self, it: &Iterate, d: &[Vec2], max_halvings: usize) -> Option<Iterate> {
        let slope = dot(&it.grad, d);
        if !(slope < 0.0) {
            return None;
        }
        let f0 = it.action.total;
        let mut step = 1.0;
        for _ in 0..max_halvings {
            if let Some(trial) = self.evaluate(combine(&it.x, step, d)) {
                if trial.action.total <= f0 + 1e-4 * step * slope {
                    return Some(trial);
                }
            }
            step *= 0.5;
        }
        None
    }
}

fn converged(it: &Iterate, gtol: f64) -> bool {
    norm(&it.grad) <= gtol * (1.0 + it.action.total.abs())
}

/// Seeded perturbation `Σ a_j e^{2πijt/T}` over harmonics `|j| ≤ |k| + 1`.
fn kick(problem: &Problem, it: Iterate, amplitude: f64, seed: u64) -> Iterate {
    if amplitude <= 0.0 {
        return it;
    }
    let n = it.x.len();
    let mean_r = it.x.iter().map(|p| p.norm()).sum::<f64>() / n as f64;
    let top = problem.winding.unsigned_abs() as i64 + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(i64, Vec2)> = (-top..=top)
        .map(|j| (j, Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    let bump: Vec<Vec2> = (0..n)
        .map(|m| {
            coeffs.iter().fold(Vec2::ZERO, |acc, (j, a)| {
                let phase = 2.0 * PI * (*j as f64) * m as f64 / n as f64;
                // (a.x + i a.y)·e^{iφ}
                acc + a.rotate(phase)
            })
        })
        .collect();
    let mut scale = amplitude * mean_r;
    for _ in 0..20 {
        if let Some(k) = problem.evaluate(combine(&it.x, scale, &bump)) {
            return k;
        }
        scale *= 0.5;
    }
    it
}

struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Vec<Vec2>, Vec<Vec2>, f64)>,
}

impl Lbfgs {
    fn direction(&self, problem: &Problem, g: &[Vec2]) -> Vec<Vec2> {
        let mut q: Vec<Vec2> = g.iter().map(|v| -*v).collect();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q = combine(&q, -a, y);
            alphas.push(a);
        }
        let mut r = problem.precondition(&q);
        if let Some((s, y, _)) = self.pairs.back() {
            let py = problem.precondition(y);
            let gamma = dot(s, y) / dot(y, &py);
            r.iter_mut().for_each(|v| *v = *v * gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            r = combine(&r, a - b, s);
        }
        r
    }

    fn push(&mut self, s: Vec<Vec2>, y: Vec<Vec2>) {
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            if self.pairs.len() == self.memory {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }
}

/// Dense Hessian of the discrete action, indexed `2j + i`.
fn hessian(f: &DiscreteFunctional, x: &[Vec2]) -> SymMatrix {
    let n = x.len();
    let p = f.params();
    let dt = f.dt();
    let vel = f.velocities(x);
    let dmat = f.spectral().derivative_matrix();
    let kin: Vec<Mat2> = vel
        .iter()
        .map(|v| {
            let g = 1.0 / (1.0 - v.norm_sq() / (p.c * p.c)).sqrt();
            Mat2::IDENTITY.scaled(p.m * g) + Mat2::outer(*v, *v).scaled(p.m * g.powi(3) / (p.c * p.c))
        })
        .collect();
    let mut h = SymMatrix::zeros(2 * n);
    // Dᵀ diag(a) D for each kinetic entry.
    let mut row = vec![0.0; n];
    for (i, l) in [(0, 0), (0, 1), (1, 1)] {
        let mut block = vec![0.0; n * n];
        for m in 0..n {
            let a = kin[m].entry(i, l) * dt;
            for (rj, dj) in row.iter_mut().zip(&dmat[m * n..(m + 1) * n]) {
                *rj = a * dj;
            }
            for r in 0..n {
                let dr = dmat[m * n + r];
                if dr == 0.0 {
                    continue;
                }
                let out = &mut block[r * n..(r + 1) * n];
                for (o, v) in out.iter_mut().zip(&row) {
                    *o += dr * v;
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                let v = block[r * n + c];
                h.add(2 * r + i, 2 * c + l, v);
                if i != l {
                    h.add(2 * r + l, 2 * c + i, v);
                }
            }
        }
    }
    for (j, xj) in x.iter().enumerate() {
        let r = xj.norm();
        let mut pot = Mat2::outer(*xj, *xj).scaled(3.0 * p.alpha / r.powi(5))
            - Mat2::IDENTITY.scaled(p.alpha / r.powi(3));
        if let Some(u) = f.potential() {
            pot = pot + u.hessian(j as f64 * dt, *xj);
        }
        for i in 0..2 {
            for l in 0..2 {
                h.add(2 * j + i, 2 * j + l, pot.entry(i, l) * dt);
            }
        }
    }
    h
}

/// Orthonormal basis of the rotation and time-shift generators at `x`.
fn symmetry_generators(f: &DiscreteFunctional, x: &[Vec2]) -> Vec<Vec<Vec2>> {
    let mut out: Vec<Vec<Vec2>> = Vec::new();
    for mut u in [x.iter().map(|p| p.perp()).collect::<Vec<_>>(), f.velocities(x)] {
        for b in &out {
            let c = dot(&u, b);
            u = combine(&u, -c, b);
        }
        let nu = norm(&u);
        if nu > 0.0 {
            u.iter_mut().for_each(|v| *v = *v / nu);
            out.push(u);
        }
    }
    out
}

fn project_out(v: &mut Vec<Vec2>, basis: &[Vec<Vec2>]) {
    for b in basis {
        let c = dot(v, b);
        *v = combine(v, -c, b);
    }
}

fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(v: &[f64]) -> Vec<Vec2> {
    v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

enum NewtonOutcome {
    Step(Iterate),
    /// The Hessian is not positive definite: the iterate is not yet in the
    /// basin of a minimizer.
    Indefinite,
    NoProgress,
}

/// One damped Newton step.
fn newton_step(problem: &Problem, it: &Iterate) -> NewtonOutcome {
    let f = &problem.f;
    let h = hessian(f, &it.x);
    let max_diag = (0..h.dim()).map(|i| h.get(i, i).abs()).fold(0.0, f64::max);
    let symmetric = f.potential().is_none();
    let gens = if symmetric { symmetry_generators(f, &it.x) } else { Vec::new() };
    let mut g = it.grad.clone();
    project_out(&mut g, &gens);
    let rhs: Vec<f64> = flatten(&g).iter().map(|v| -v).collect();
    // The unforced Hessian is singular along the symmetry directions, so a
    // small shift is always allowed.
    let mut shift = 1e-12 * max_diag;
    let g0 = norm(&it.grad);
    let f0 = it.action.total;
    let l = loop {
        let mut shifted = h.clone();
        for i in 0..shifted.dim() {
            shifted.add(i, i, shift);
        }
        match shifted.cholesky() {
            Some(l) => break l,
            None if shift < 1e-8 * max_diag => shift *= 10.0,
            None => return NewtonOutcome::Indefinite,
        }
    };
    let mut d = unflatten(&cholesky_solve(&l, &rhs));
    project_out(&mut d, &gens);
    let slope = dot(&it.grad, &d);
    let mut step = 1.0;
    for _ in 0..30 {
        if let Some(trial) = problem.evaluate(combine(&it.x, step, &d)) {
            let armijo = trial.action.total <= f0 + 1e-4 * step * slope;
            // Close to the minimum the decrease drowns in rounding;
            // then a halved gradient with a flat action is progress.
            let flat = trial.action.total <= f0 + 8.0 * f64::EPSILON * f0.abs()
                && norm(&trial.grad) <= 0.5 * g0;
            if armijo || flat {
                return NewtonOutcome::Step(trial);
            }
        }
        step *= 0.5;
    }
    NewtonOutcome::NoProgress
}

/// Minimizes the action over the group of rotations and time shifts applied
/// to the current loop.
fn symmetry_search(problem: &Problem, it: &Iterate) -> Option<Iterate> {
    let period = problem.f.period();
    let sp = problem.f.spectral();
    let moved = |phi: f64, s: f64| -> Vec<Vec2> {
        sp.time_shift(&it.x, s).into_iter().map(|p| p.rotate(phi)).collect()
    };
    let cost = |z: [f64; 2]| problem.action_only(&moved(z[0], z[1]));
    let grid = 12;
    let mut best = ([0.0, 0.0], it.action.total);
    for a in 0..grid {
        for b in 0..grid {
            let z = [2.0 * PI * a as f64 / grid as f64, period * b as f64 / grid as f64];
            let v = cost(z);
            if v < best.1 {
                best = (z, v);
            }
        }
    }
    let (z, v) = nelder_mead(&cost, best.0, [PI / grid as f64, 0.5 * period / grid as f64], 200);
    if v < it.action.total - 1e-15 * it.action.total.abs() {
        problem.evaluate(moved(z[0], z[1]))
    } else {
        None
    }
}

fn nelder_mead(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2], steps: [f64; 2], iters: usize) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + steps[0], start[1]],
        [start[0], start[1] + steps[1]],
    ];
    let mut values = simplex.map(f);
    let at = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let centroid = at(simplex[0], simplex[1], 0.5);
        let reflect = at(centroid, simplex[2], -1.0);
        let fr = f(reflect);
        if fr < values[0] {
            let expand = at(centroid, simplex[2], -2.0);
            let fe = f(expand);
            (simplex[2], values[2]) = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflect, fr);
        } else {
            let contract = at(centroid, simplex[2], 0.5);
            let fc = f(contract);
            if fc < values[2] {
                (simplex[2], values[2]) = (contract, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = at(simplex[0], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    (simplex[best], values[best])
}

fn check_potential(spec: &ProblemSpec, potential: Option<&dyn ForcedPotential>) -> Result<()> {
    if let Some(u) = potential {
        let ratio = spec.period / u.period();
        if !(ratio >= 0.5 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return Err(Error::InvalidParameter(format!(
                "forcing period {} does not divide T = {}",
                u.period(),
                spec.period
            )));
        }
    }
    Ok(())
}

/// Minimizes the discrete action over loops with the winding number of `spec`,
/// starting from `init`.
pub fn minimize(
    spec: &ProblemSpec,
    potential: Option<&dyn ForcedPotential>,
    init: &Loop,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    spec.validate()?;
    check_potential(spec, potential)?;
    if (init.period() - spec.period).abs() > 1e-12 * spec.period {
        return Err(domain(format!(
            "initial loop period {} differs from T = {}",
            init.period(),
            spec.period
        )));
    }
    let init = if init.len() == opts.nodes { init.clone() } else { resample(init, opts.nodes)? };
    let winding = spec.winding();
    if winding_of_nodes(init.nodes())? != winding {
        return Err(domain(format!("initial loop does not wind {winding} times")));
    }
    let params = spec.params;
    let r_init = init.nodes().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let problem = Problem {
        f: DiscreteFunctional::new(&params, spec.period, init.len(), potential),
        winding,
        speed_cap: params.c * (1.0 - 1e-9),
        radius_cap: params.c * spec.period + r_init,
    };
    let mut it = problem
        .evaluate(init.into_nodes())
        .ok_or_else(|| domain("initial loop has infinite action or violates the speed bound"))?;
    it = kick(&problem, it, opts.kick, opts.seed);

    let mut iterations = 0;
    let mut newton_steps = 0;
    let mut lbfgs = Lbfgs { memory: opts.memory.max(1), pairs: VecDeque::new() };
    let mut switch_level = opts.newton_switch;
    let mut trace = Vec::new();
    let mut record = |it: &Iterate| {
        if opts.record_history {
            trace.push(it.action.total);
        }
    };
    record(&it);
    let stop = 'phases: loop {
        let mut history: VecDeque<f64> = VecDeque::new();
        loop {
            if converged(&it, opts.gtol) {
                break 'phases StopReason::Converged;
            }
            if iterations >= opts.max_iter {
                break 'phases StopReason::MaxIterations;
            }
            let switch = opts.polish && norm(&it.grad) <= switch_level * (1.0 + it.action.total.abs());
            let stalled = history.len() == 500
                && history[0] - it.action.total <= 1e-13 * it.action.total.abs();
            if opts.polish && (switch || stalled) {
                break;
            }
            let mut d = lbfgs.direction(&problem, &it.grad);
            if !(dot(&it.grad, &d) < 0.0) {
                lbfgs.pairs.clear();
                d = problem.precondition(&it.grad).iter().map(|v| -*v).collect();
            }
            match problem.line_search(&it, &d, 60) {
                Some(next) => {
                    lbfgs.push(diff(&next.x, &it.x), diff(&next.grad, &it.grad));
                    it = next;
                    record(&it);
                }
                None if !lbfgs.pairs.is_empty() => lbfgs.pairs.clear(),
                None if opts.polish => break,
                None => {
                    break 'phases StopReason::LineSearchFailure;
                }
            }
            iterations += 1;
            history.push_back(it.action.total);
            if history.len() > 500 {
                history.pop_front();
            }
        }

        if potential.is_some() {
            if let Some(better) = symmetry_search(&problem, &it) {
                it = better;
                record(&it);
            }
        }
        loop {
            if converged(&it, opts.gtol) {
                break 'phases StopReason::Converged;
            }
            if iterations >= opts.max_iter {
                break 'phases StopReason::MaxIterations;
            }
            match newton_step(&problem, &it) {
                NewtonOutcome::Step(next) => {
                    it = next;
                    record(&it);
                    iterations += 1;
                    newton_steps += 1;
                }
                NewtonOutcome::Indefinite if switch_level > opts.gtol => {
                    // Back to descent with a stricter hand-over level.
                    switch_level *= 0.01;
                    lbfgs.pairs.clear();
                    continue 'phases;
                }
                NewtonOutcome::Indefinite | NewtonOutcome::NoProgress => {
                    break 'phases StopReason::LineSearchFailure;
                }
            }
        }
    };

    let lp = Loop::new(spec.period, it.x.clone())?;
    let el = el_residual(&params, &lp, potential)?;
    Ok(MinimizeReport {
        grad_norm: norm(&it.grad),
        action: it.action,
        iterations,
        newton_steps,
        converged: stop == StopReason::Converged,
        stop_reason: stop,
        el_residual: el,
        winding: winding_of_nodes(lp.nodes())?,
        max_speed: crate::loops::max_speed(&lp),
        radial_minima: radial_minima(&lp),
        history: trace,
        lp,
    })
}

/// Minimizes at `opts.nodes`, then repeatedly doubles the grid and
/// re-minimizes from the interpolated previous minimizer.
pub fn minimize_refined(
    spec: &ProblemSpec,
    potential: Option<&dyn ForcedPotential>,
    opts: &MinimizeOptions,
    doublings: usize,
) -> Result<Vec<MinimizeReport>> {
    let mut out = Vec::with_capacity(doublings + 1);
    let first = minimize(spec, potential, &initial_loop(spec, opts.nodes.max(64))?, opts)?;
    out.push(first);
    let mut o = opts.clone();
    for _ in 0..doublings {
        o.nodes *= 2;
        o.kick = 0.0;
        let prev = &out[out.len() - 1].lp;
        let next = minimize(spec, potential, &resample(prev, o.nodes)?, &o)?;
        out.push(next);
    }
    Ok(out)
}

/// Sup-norm of `D φ(v_j) − (−αx_j/|x_j|³ + ∇U(t_j, x_j))` relative to `mα/r_min²`.
pub fn el_residual(
    params: &PhysicalParams,
    lp: &Loop,
    potential: Option<&dyn ForcedPotential>,
) -> Result<f64> {
    let f = DiscreteFunctional::new(params, lp.period(), lp.len(), potential);
    let x = lp.nodes();
    let r_min = crate::loops::min_radius(lp);
    if r_min == 0.0 {
        return Err(domain("loop passes through the origin"));
    }
    let momenta = f.momenta(&f.velocities(x))?;
    let dp = f.spectral().derivative(&momenta);
    let dt = lp.dt();
    let worst = x
        .iter()
        .zip(&dp)
        .enumerate()
        .map(|(j, (xj, dpj))| {
            let r = xj.norm();
            let mut force = *xj * (-params.alpha / (r * r * r));
            if let Some(u) = potential {
                force += u.gradient(j as f64 * dt, *xj);
            }
            (*dpj - force).norm()
        })
        .fold(0.0, f64::max);
    Ok(worst / (params.m * params.alpha / (r_min * r_min)))
}

/// Number of strict local minima of `j ↦ |x_j|` around the loop, after
/// merging plateaus flat to within `1e−9·r_max`.
pub fn radial_minima(lp: &Loop) -> usize {
    let r: Vec<f64> = lp.nodes().iter().map(|p| p.norm()).collect();
    let n = r.len();
    let r_max = r.iter().copied().fold(0.0, f64::max);
    let tol = 1e-9 * r_max;
    // Start at the maximum so no plateau straddles the wrap-around.
    let start = (0..n).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0);
    let mut levels: Vec<f64> = Vec::new();
    for j in 0..n {
        let v = r[(start + j) % n];
        match levels.last() {
            Some(&last) if (v - last).abs() <= tol => {}
            _ => levels.push(v),
        }
    }
    while levels.len() > 1 && (levels[levels.len() - 1] - levels[0]).abs() <= tol {
        levels.pop();
    }
    let m = levels.len();
    if m < 3 {
        return usize::from(m == 2);
    }
    (0..m)
        .filter(|&j| levels[j] < levels[(j + m - 1) % m] && levels[j] < levels[(j + 1) % m])
        .count()
}

/// Mean energy and angular momentum along a loop, from its spectral
/// velocities, with the largest deviation of each from its mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredInvariants {
    pub mean: EnergyMomentum,
    pub spread_h: f64,
    #[serde(rename = "spread_L")]
    pub spread_l: f64,
}

pub fn measure_invariants(params: &PhysicalParams, lp: &Loop) -> Result<MeasuredInvariants> {
    let f = DiscreteFunctional::new(params, lp.period(), lp.len(), None);
    let momenta = f.momenta(&f.velocities(lp.nodes()))?;
    let mut vals = Vec::with_capacity(lp.len());
    for (x, p) in lp.nodes().iter().zip(&momenta) {
        vals.push(crate::dynamics::invariants_of(params, &crate::dynamics::CartState { x: *x, p: *p })?);
    }
    let n = vals.len() as f64;
    let mean = EnergyMomentum {
        h: vals.iter().map(|v| v.h).sum::<f64>() / n,
        l: vals.iter().map(|v| v.l).sum::<f64>() / n,
    };
    Ok(MeasuredInvariants {
        mean,
        spread_h: vals.iter().map(|v| (v.h - mean.h).abs()).fold(0.0, f64::max),
        spread_l: vals.iter().map(|v| (v.l - mean.l).abs()).fold(0.0, f64::max),
    })
}

fn point_segment_distance_sq(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 { ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm_sq()
}

/// Hausdorff distance between the closed polygons through the nodes of two loops.
pub fn hausdorff_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    let directed = |p: &[Vec2], q: &[Vec2]| {
        let m = q.len();
        p.iter()
            .map(|u| {
                (0..m)
                    .map(|j| point_segment_distance_sq(*u, q[j], q[(j + 1) % m]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
            .sqrt()
    };
    directed(a, b).max(directed(b, a))
}

/// Rotation angle minimizing `Σ|a_j − R_φ b_j|²`, with the residual.
fn procrustes(a: &[Vec2], b: &[Vec2]) -> (f64, f64) {
    let (mut c, mut s) = (0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        c += v.dot(*u);
        s += v.cross(*u);
    }
    let phi = s.atan2(c);
    let cost = a.iter().zip(b).map(|(u, v)| (*u - v.rotate(phi)).norm_sq()).sum();
    (phi, cost)
}

/// The copy of `b`, rotated and shifted in time, that best matches `a` in the
/// least-squares sense over corresponding nodes.
pub fn align(a: &Loop, b: &Loop) -> Result<Loop> {
    let n = a.len().max(b.len());
    let a = resample(a, n)?;
    let b = resample(b, n)?;
    let (an, bn) = (a.nodes(), b.nodes());
    let shifted = |m: usize| -> Vec<Vec2> { (0..n).map(|j| bn[(j + m) % n]).collect() };
    let best = (0..n)
        .map(|m| (m, procrustes(an, &shifted(m)).1))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map_or(0, |(m, _)| m);
    let dt = b.dt();
    let base = dt * best as f64;
    let cost = |s: f64| procrustes(an, &b.time_shifted(base + s).into_nodes()).1;
    let (mut lo, mut hi) = (-dt, dt);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let s = if f1 < f2 { x1 } else { x2 };
    let moved = b.time_shifted(base + s);
    let (phi, _) = procrustes(an, moved.nodes());
    Ok(moved.rotated(phi))
}

/// Hausdorff distance between `a` and the aligned copy of `b`, both
/// interpolated onto `nodes` points.
pub fn aligned_distance(a: &Loop, b: &Loop, nodes: usize) -> Result<f64> {
    let moved = align(a, b)?;
    Ok(hausdorff_distance(resample(a, nodes)?.nodes(), resample(&moved, nodes)?.nodes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_circle() {
        let s = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
        let lp = initial_loop(&s, 256).unwrap();
        assert!((crate::loops::max_radius(&lp) - 1.0).abs() < 1e-14);
        assert!((crate::loops::max_speed(&lp) - 0.5).abs() < 1e-12);
        assert_eq!(crate::loops::winding_number(&lp).unwrap(), 2);
        assert!(crate::loops::discrete_action(&s.params, &lp, None).is_finite());
        assert!(initial_loop(&s, 32).is_err());
        let neg = initial_loop(&ProblemSpec::normalized(8.0 * PI, -2).unwrap(), 64).unwrap();
        assert_eq!(crate::loops::winding_number(&neg).unwrap(), -2);
    }

    #[test]
    fn suggested_grid_sizes() {
        let n = |t: f64, k| suggested_nodes(&ProblemSpec::normalized(t, k).unwrap()).unwrap();
        assert_eq!(n(4.0 * PI, 1), 512);
        assert_eq!(n(8.0 * PI, 2), 512);
        // r_min ≈ 0.0752 at (40, 3): 1.5·40/0.0752 ≈ 798.
        assert_eq!(n(40.0, 3), 1024);
        assert_eq!(n(40.0, -3), 1024);
    }

    #[test]
    fn radial_minima_counts() {
        let ellipse = |k: f64| {
            let nodes = (0..128)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / 128.0;
                    Vec2::polar(2.0 + (k * t).cos(), t)
                })
                .collect();
            Loop::new(1.0, nodes).unwrap()
        };
        assert_eq!(radial_minima(&ellipse(1.0)), 1);
        assert_eq!(radial_minima(&ellipse(3.0)), 3);
        let circle = Loop::new(1.0, (0..64).map(|j| Vec2::polar(1.0, j as f64 * 0.1)).collect()).unwrap();
        assert_eq!(radial_minima(&circle), 0);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (z, v) = nelder_mead(&|z: [f64; 2]| (z[0] - 1.0).powi(2) + 3.0 * (z[1] + 2.0).powi(2), [0.0, 0.0], [0.5, 0.5], 200);
        assert!((z[0] - 1.0).abs() < 1e-6 && (z[1] + 2.0).abs() < 1e-6 && v < 1e-11);
    }

    #[test]
    fn aligned_distance_ignores_rotation() {
        let s = ProblemSpec::normalized(8.0 * PI, 2).unwrap();
        let lp = crate::rosette::rosette_orbit(&s, 1).unwrap().sample_loop(128).unwrap();
        let d = aligned_distance(&lp, &lp.rotated(1.234).time_shifted(0.77), 256).unwrap();
        assert!(d < 1e-7, "{d}");
        let bigger = Loop::new(lp.period(), lp.nodes().iter().map(|p| *p * 1.01).collect()).unwrap();
        assert!(aligned_distance(&lp, &bigger, 256).unwrap() > 1e-3);
    }
}
