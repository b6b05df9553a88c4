use rayon::prelude::*;
use rayon::ThreadPool;
use relkep::circular::{circular_action, circular_orbit};
use relkep::dynamics::{integrate, periodicity_residual, CartState};
use relkep::morse::{conley_zehnder_formula, morse_index};
use relkep::rosette::{action_spectrum, classify, rosette_action, rosette_orbit};
use relkep::varsolver::{initial_loop, minimize};
use relkep::{ForcedPotential, PhysicalParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    Command, IntegrateArgs, MinimizeArgs, MorseArgs, RosetteArgs, SpecArgs, SweepArgs,
};
use crate::error::CliError;
use crate::verify;

/// A command result in both output formats.
pub struct Product {
    pub json: Value,
    pub csv: String,
}

/// CSV text with a header row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// A CSV cell. Floats use the shortest representation that round-trips,
/// switching to exponent notation for very small or large magnitudes.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_cell!(i64, u32, u64, usize, bool, str, String);

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($crate::commands::Cell::cell(&$x)),*] };
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

/// `base` with the top-level fields of `extra` appended.
fn merged(base: Value, extra: Value) -> Value {
    let (Value::Object(mut a), Value::Object(b)) = (base, extra) else {
        unreachable!("both values are objects")
    };
    a.extend(b);
    Value::Object(a)
}

pub fn run(params: PhysicalParams, cmd: &Command, pool: &ThreadPool) -> Result<Product, CliError> {
    match cmd {
        Command::Circular(a) => circular(params, a),
        Command::Classify(a) => classify_cmd(params, a),
        Command::Rosette(a) => rosette(params, a),
        Command::ActionSpectrum(a) => spectrum(params, a),
        Command::Morse(a) => morse(params, a),
        Command::Minimize(a) => minimize_cmd(params, a),
        Command::Integrate(a) => integrate_cmd(params, a),
        Command::Verify(a) => verify::run(params, a, pool),
        Command::Sweep(a) => sweep(params, a, pool),
    }
}

fn circular(params: PhysicalParams, a: &SpecArgs) -> Result<Product, CliError> {
    let spec = a.spec(params)?;
    let orbit = circular_orbit(&spec)?;
    let action = circular_action(&spec)?;
    let mut t = Table::new(&["T", "k", "R", "omega", "L", "h", "action"]);
    t.row(&cells![spec.period, spec.winding(), orbit.radius, orbit.omega, orbit.angular_momentum, orbit.h, action]);
    Ok(Product {
        json: merged(to_value(&orbit), json!({ "action": action })),
        csv: t.finish(),
    })
}

fn classify_cmd(params: PhysicalParams, a: &SpecArgs) -> Result<Product, CliError> {
    let spec = a.spec(params)?;
    let report = classify(&spec)?;
    let thresholds = report.interior_thresholds();
    let mut t = Table::new(&["n", "u_n", "below_T"]);
    for (i, u) in thresholds.iter().enumerate() {
        t.row(&cells![i + 1, u, *u < spec.period]);
    }
    Ok(Product {
        json: json!({
            "spec": spec,
            "i_T": report.i_t,
            "thresholds": thresholds,
            "at_threshold": report.near_threshold(1e-9),
        }),
        csv: t.finish(),
    })
}

fn rosette(params: PhysicalParams, a: &RosetteArgs) -> Result<Product, CliError> {
    let spec = a.spec.spec(params)?;
    let orbit = rosette_orbit(&spec, a.n)?;
    let action = rosette_action(&spec, a.n)?;
    let lp = orbit.sample_loop(a.nodes as usize)?;
    Ok(Product {
        json: merged(to_value(&orbit), json!({ "action": action })),
        csv: lp.to_csv(),
    })
}

fn spectrum(params: PhysicalParams, a: &SpecArgs) -> Result<Product, CliError> {
    let spec = a.spec(params)?;
    let circ = circular_action(&spec)?;
    let levels = action_spectrum(&spec)?;
    let mut t = Table::new(&["n", "action"]);
    t.row(&cells![0u32, circ]);
    for (n, v) in &levels {
        t.row(&cells![n, v]);
    }
    let levels: Vec<Value> = levels.iter().map(|(n, v)| json!({ "n": n, "action": v })).collect();
    Ok(Product {
        json: json!({
            "spec": spec,
            "i_T": levels.len(),
            "circular_action": circ,
            "levels": levels,
        }),
        csv: t.finish(),
    })
}

fn morse(params: PhysicalParams, a: &MorseArgs) -> Result<Product, CliError> {
    let spec = a.spec.spec(params)?;
    let r = morse_index(&spec, a.modes as usize, a.zero_tol)?;
    let mut t = Table::new(&[
        "T", "k", "index", "nullity", "modes", "omega_prime", "rotation_ratio", "formula_index",
        "conley_zehnder", "at_threshold",
    ]);
    t.row(&cells![
        spec.period, spec.winding(), r.index, r.nullity, r.modes, r.omega_prime, r.rotation_ratio,
        r.formula_index, r.conley_zehnder, r.at_threshold,
    ]);
    Ok(Product {
        json: merged(json!({ "spec": spec }), to_value(&r)),
        csv: t.finish(),
    })
}

fn minimize_cmd(params: PhysicalParams, a: &MinimizeArgs) -> Result<Product, CliError> {
    let spec = a.spec.spec(params)?;
    let forcing = a.forcing.potential(spec.period);
    let opts = a.options(&spec)?;
    let init = initial_loop(&spec, opts.nodes)?;
    let potential = forcing.as_ref().map(|f| f as &dyn ForcedPotential);
    let report = minimize(&spec, potential, &init, &opts)?;
    Ok(Product {
        csv: report.lp.to_csv(),
        json: merged(json!({ "spec": spec, "forcing": forcing }), to_value(&report)),
    })
}

fn integrate_cmd(params: PhysicalParams, a: &IntegrateArgs) -> Result<Product, CliError> {
    let spec = a.spec.spec(params)?;
    if spec.is_clockwise() {
        return Err(CliError::Usage("integrate starts from the counter-clockwise representative; pass k > 0".into()));
    }
    let s0 = if a.n == 0 {
        CartState::circular_start(&params, &circular_orbit(&spec)?)?
    } else {
        CartState::perihelion(&rosette_orbit(&spec, a.n)?)
    };
    let traj = integrate(&params, s0, a.periods * spec.period, a.tol)?;
    let residual = if a.periods >= 1.0 { Some(periodicity_residual(&traj, spec.period)?) } else { None };
    let perihelia: Vec<Value> = traj
        .perihelia()
        .iter()
        .map(|p| json!({ "t": p.t, "theta": p.theta, "r": p.state.x.norm() }))
        .collect();
    Ok(Product {
        json: json!({
            "spec": spec,
            "n": a.n,
            "t_end": traj.t_end(),
            "samples": traj.times.len(),
            "turns": traj.turns(),
            "stats": traj.stats,
            "periodicity_residual": residual,
            "perihelia": perihelia,
        }),
        csv: traj.to_csv(),
    })
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "T")]
    period: f64,
    k: u32,
    #[serde(rename = "i_T")]
    i_t: u32,
    circular_action: f64,
    min_action: f64,
    min_n: u32,
    formula_index: i64,
    morse_index: Option<usize>,
}

fn sweep(params: PhysicalParams, a: &SweepArgs, pool: &ThreadPool) -> Result<Product, CliError> {
    if a.k_min > a.k_max || a.t_min > a.t_max {
        return Err(CliError::Usage("empty sweep range".into()));
    }
    let count = a.count as usize;
    let mut grid = Vec::new();
    for k in a.k_min..=a.k_max {
        for j in 0..count {
            let s = if count == 1 { 0.0 } else { j as f64 / (count - 1) as f64 };
            grid.push((k, a.t_min * (a.t_max / a.t_min).powf(s)));
        }
    }
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.par_iter()
            .map(|&(k, period)| {
                let spec = relkep::ProblemSpec::new(params, period, i64::from(k))?;
                let circ = circular_action(&spec)?;
                let levels = action_spectrum(&spec)?;
                let (min_n, min_action) = levels.iter().fold((0, circ), |m, &(n, v)| if v < m.1 { (n, v) } else { m });
                let morse_index = if a.modes > 0 {
                    Some(morse_index(&spec, a.modes as usize, relkep::morse::DEFAULT_ZERO_TOL)?.index)
                } else {
                    None
                };
                Ok(SweepRow {
                    period,
                    k,
                    i_t: levels.len() as u32,
                    circular_action: circ,
                    min_action,
                    min_n,
                    formula_index: conley_zehnder_formula(&spec)?,
                    morse_index,
                })
            })
            .collect::<relkep::Result<_>>()
    })?;
    let mut t = Table::new(&["T", "k", "i_T", "circular_action", "min_action", "min_n", "formula_index", "morse_index"]);
    for r in &rows {
        t.row(&cells![r.period, r.k, r.i_t, r.circular_action, r.min_action, r.min_n, r.formula_index, r.morse_index]);
    }
    Ok(Product { json: json!({ "params": params, "rows": rows }), csv: t.finish() })
}
