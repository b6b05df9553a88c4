//! Cross-checks of one spec: closed forms, integration, minimization and the
//! two Morse index routes.

use rayon::prelude::*;
use rayon::ThreadPool;
use relkep::circular::{
    angular_momentum_residual, circular_action, circular_orbit, solve_angular_momentum,
    solve_angular_momentum_cardano,
};
use relkep::dynamics::{integrate, periodicity_residual, CartState};
use relkep::loops::discrete_action;
use relkep::morse::{conley_zehnder_formula, morse_index, DEFAULT_ZERO_TOL};
use relkep::rosette::{action_spectrum, classify, rosette_orbit};
use relkep::varsolver::{initial_loop, minimize, suggested_nodes, MinimizeOptions};
use relkep::{PhysicalParams, ProblemSpec};
use serde::Serialize;
use serde_json::json;

use crate::cells;
use crate::commands::{Product, Table};
use crate::config::VerifyArgs;
use crate::error::CliError;

const INTEGRATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            passed: value <= tolerance,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: String::new(),
        }
    }

    fn equal(name: impl Into<String>, got: i64, expected: i64) -> Check {
        Check {
            name: name.into(),
            passed: got == expected,
            value: Some(got as f64),
            tolerance: None,
            detail: format!("expected {expected}"),
        }
    }

    fn failed(name: impl Into<String>, err: relkep::Error) -> Check {
        Check { name: name.into(), passed: false, value: None, tolerance: None, detail: err.to_string() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn closed_forms(spec: &ProblemSpec) -> Vec<Check> {
    let l = solve_angular_momentum(spec);
    let cardano = solve_angular_momentum_cardano(spec);
    let mut out = vec![
        Check::below("circular_equation_residual", angular_momentum_residual(spec, l), 1e-12),
        Check::below("circular_cardano_vs_bisection", rel(cardano, l), 1e-10),
    ];
    if let (Ok(circ), Ok(levels)) = (circular_action(spec), action_spectrum(spec)) {
        let ordered = levels.windows(2).all(|w| w[0].1 <= w[1].1);
        let margin = levels.last().map_or(0.0, |&(_, top)| circ - top);
        out.push(Check {
            name: "action_ordering".into(),
            passed: ordered && margin >= 0.0,
            value: Some(margin),
            tolerance: None,
            detail: "I_1 <= ... <= I_iT <= circular action; value is the top gap".into(),
        });
    }
    out
}

fn dynamics(spec: &ProblemSpec, i_t: u32) -> Vec<Check> {
    let params = spec.params;
    let mut out = Vec::new();
    let circle = circular_orbit(spec)
        .and_then(|o| CartState::circular_start(&params, &o))
        .and_then(|s0| integrate(&params, s0, spec.period, INTEGRATION_TOL))
        .and_then(|traj| periodicity_residual(&traj, spec.period));
    out.push(match circle {
        Ok(r) => Check::below("circular_periodicity", r, 1e-7),
        Err(e) => Check::failed("circular_periodicity", e),
    });
    for n in 1..=i_t {
        let orbit = match rosette_orbit(spec, n) {
            Ok(o) => o,
            Err(e) => {
                out.push(Check::failed(format!("rosette_{n}_orbit"), e));
                continue;
            }
        };
        // Slightly past T so the closing perihelion is bracketed.
        let t_end = spec.period + 0.25 * orbit.radial_period;
        match integrate(&params, CartState::perihelion(&orbit), t_end, INTEGRATION_TOL) {
            Ok(traj) => {
                match periodicity_residual(&traj, spec.period) {
                    Ok(r) => out.push(Check::below(format!("rosette_{n}_periodicity"), r, 1e-6)),
                    Err(e) => out.push(Check::failed(format!("rosette_{n}_periodicity"), e)),
                }
                let peri = traj.perihelia();
                if peri.len() >= 2 {
                    let th = peri[1].t - peri[0].t;
                    let advance = peri[1].theta - peri[0].theta;
                    out.push(Check::below(format!("rosette_{n}_radial_period"), rel(th, orbit.radial_period), 1e-6));
                    out.push(Check::below(format!("rosette_{n}_perihelion_advance"), rel(advance, orbit.delta_theta), 1e-6));
                } else {
                    out.push(Check {
                        name: format!("rosette_{n}_perihelia"),
                        passed: false,
                        value: Some(peri.len() as f64),
                        tolerance: None,
                        detail: "fewer than two perihelion passages found".into(),
                    });
                }
                let drift = traj.stats.max_energy_drift.max(traj.stats.max_momentum_drift);
                out.push(Check::below(format!("rosette_{n}_invariant_drift"), drift, 1e-8));
            }
            Err(e) => out.push(Check::failed(format!("rosette_{n}_integration"), e)),
        }
    }
    out
}

fn sampled_action(spec: &ProblemSpec, i_t: u32) -> Vec<Check> {
    let result = if i_t >= 1 {
        rosette_orbit(spec, 1).and_then(|o| {
            let lp = o.sample_loop(4096)?;
            Ok((discrete_action(&spec.params, &lp, None).total, relkep::rosette::rosette_action(spec, 1)?))
        })
    } else {
        circular_orbit(spec).and_then(|o| {
            let lp = o.sample_loop(512)?;
            Ok((discrete_action(&spec.params, &lp, None).total, circular_action(spec)?))
        })
    };
    vec![match result {
        Ok((sampled, exact)) => Check::below("sampled_action", rel(sampled, exact), 1e-5),
        Err(e) => Check::failed("sampled_action", e),
    }]
}

fn minimizer(spec: &ProblemSpec, nodes: usize, level: f64) -> (Vec<Check>, Option<f64>) {
    let opts = MinimizeOptions { nodes, ..MinimizeOptions::default() };
    let report = initial_loop(spec, nodes).and_then(|init| minimize(spec, None, &init, &opts));
    match report {
        Ok(r) => {
            let mut level_check = Check::below("minimizer_level", rel(r.action.total, level), 1e-4);
            level_check.detail = format!("converged: {}", r.converged);
            level_check.passed &= r.converged;
            let checks = vec![
                level_check,
                Check::below("minimizer_el_residual", r.el_residual, 1e-5),
                Check::equal("minimizer_winding", r.winding, spec.winding()),
            ];
            (checks, Some(r.action.total))
        }
        Err(e) => (vec![Check::failed("minimizer", e)], None),
    }
}

fn morse(spec: &ProblemSpec, modes: usize, i_t: u32) -> (Vec<Check>, Option<usize>) {
    let expected = 2 * i64::from(i_t);
    let mut out = Vec::new();
    let index = match morse_index(spec, modes, DEFAULT_ZERO_TOL) {
        Ok(r) => {
            let mut c = Check::equal("morse_galerkin_index", r.index as i64, expected);
            if r.at_threshold {
                c.detail.push_str("; T is at a threshold, where the count jumps");
            }
            out.push(c);
            Some(r.index)
        }
        Err(e) => {
            out.push(Check::failed("morse_galerkin_index", e));
            None
        }
    };
    out.push(match conley_zehnder_formula(spec) {
        Ok(cz) => Check::equal("morse_formula_index", cz, expected),
        Err(e) => Check::failed("morse_formula_index", e),
    });
    (out, index)
}

pub fn run(params: PhysicalParams, a: &VerifyArgs, pool: &ThreadPool) -> Result<Product, CliError> {
    let spec = a.spec.spec(params)?;
    let i_t = classify(&spec)?.i_t;
    let circ = circular_action(&spec)?;
    let levels = action_spectrum(&spec)?;
    let level = levels.iter().map(|l| l.1).fold(circ, f64::min);
    let nodes = match a.nodes {
        Some(n) => n as usize,
        None => suggested_nodes(&spec)?,
    };

    enum Part {
        Checks(Vec<Check>),
        Minimizer(Vec<Check>, Option<f64>),
        Morse(Vec<Check>, Option<usize>),
    }
    let tasks: Vec<Box<dyn Fn() -> Part + Send + Sync>> = vec![
        Box::new(|| Part::Checks(closed_forms(&spec))),
        Box::new(|| Part::Checks(dynamics(&spec, i_t))),
        Box::new(|| Part::Checks(sampled_action(&spec, i_t))),
        Box::new(|| {
            let (c, a) = minimizer(&spec, nodes, level);
            Part::Minimizer(c, a)
        }),
        Box::new(|| {
            let (c, i) = morse(&spec, a.modes as usize, i_t);
            Part::Morse(c, i)
        }),
    ];
    let parts: Vec<Part> = pool.install(|| tasks.par_iter().map(|f| f()).collect());

    let mut checks = Vec::new();
    let (mut minimized, mut index) = (None, None);
    for p in parts {
        match p {
            Part::Checks(c) => checks.extend(c),
            Part::Minimizer(c, v) => {
                checks.extend(c);
                minimized = v;
            }
            Part::Morse(c, i) => {
                checks.extend(c);
                index = i;
            }
        }
    }
    let all_passed = checks.iter().all(|c| c.passed);

    let mut t = Table::new(&["check", "passed", "value", "tolerance"]);
    for c in &checks {
        t.row(&cells![c.name, c.passed, c.value, c.tolerance]);
    }
    let levels: Vec<_> = levels.iter().map(|(n, v)| json!({ "n": n, "action": v })).collect();
    Ok(Product {
        json: json!({
            "spec": spec,
            "i_T": i_t,
            "circular_action": circ,
            "levels": levels,
            "minimized_action": minimized,
            "morse_index": index,
            "all_passed": all_passed,
            "checks": checks,
        }),
        csv: t.finish(),
    })
}
