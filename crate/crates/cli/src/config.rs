//! Run configuration: everything needed to reproduce one invocation.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use relkep::{PhysicalParams, ProblemSpec, Vec2};
use relkep::varsolver::{suggested_nodes, HarmonicForcing, MinimizeOptions};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputTarget {
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    /// Each command picks its own default when absent.
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub command: Command,
    #[serde(default)]
    pub output: OutputTarget,
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("expected a positive finite number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("expected a finite number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonzero(s: &str) -> Result<i64, String> {
    match s.parse::<i64>() {
        Ok(0) => Err("winding number must be nonzero".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Period and signed winding number.
#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecArgs {
    /// Period T.
    #[arg(long = "T", value_parser = positive, allow_hyphen_values = true)]
    #[serde(rename = "T")]
    pub period: f64,
    /// Winding number k (negative for clockwise).
    #[arg(long, value_parser = nonzero, allow_negative_numbers = true)]
    pub k: i64,
}

impl SpecArgs {
    pub fn spec(&self, params: PhysicalParams) -> relkep::Result<ProblemSpec> {
        ProblemSpec::new(params, self.period, self.k)
    }
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosetteArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Number of radial oscillations per period.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Samples of the exported loop.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(16..))]
    pub nodes: u64,
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Fourier modes of the Galerkin space.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(16..))]
    pub modes: u64,
    /// Eigenvalues below this fraction of the largest one count as zero.
    #[arg(long, default_value_t = relkep::morse::DEFAULT_ZERO_TOL, value_parser = positive)]
    pub zero_tol: f64,
}

/// Forcing `eps·cos(2π·freq·t/T + phase)·⟨d, x⟩` with `d` at `dir_angle`.
#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingArgs {
    /// Amplitude; zero disables the forcing.
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_hyphen_values = true)]
    pub eps: f64,
    /// Harmonic of the base frequency 2π/T.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub freq: i32,
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_hyphen_values = true)]
    pub phase: f64,
    /// Angle of the direction d from the first axis.
    #[arg(long, default_value_t = 0.0, value_parser = finite, allow_hyphen_values = true)]
    pub dir_angle: f64,
}

impl ForcingArgs {
    pub fn potential(&self, period: f64) -> Option<HarmonicForcing> {
        (self.eps != 0.0).then(|| {
            HarmonicForcing::new(self.eps, self.freq, self.phase, Vec2::from_angle(self.dir_angle), period)
        })
    }
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Grid size; by default large enough to resolve the closest approach
    /// of the type-(1, k) rosette.
    #[arg(long, value_parser = clap::value_parser!(u64).range(64..))]
    pub nodes: Option<u64>,
    /// Relative gradient tolerance.
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub gtol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: u64,
    /// Seed of the initial perturbation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative size of the initial perturbation.
    #[arg(long, default_value_t = 1e-2, value_parser = finite)]
    pub kick: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub forcing: ForcingArgs,
}

impl MinimizeArgs {
    pub fn options(&self, spec: &ProblemSpec) -> relkep::Result<MinimizeOptions> {
        let nodes = match self.nodes {
            Some(n) => n as usize,
            None => suggested_nodes(spec)?,
        };
        Ok(MinimizeOptions {
            nodes,
            gtol: self.gtol,
            max_iter: self.max_iter as usize,
            seed: self.seed,
            kick: self.kick,
            ..MinimizeOptions::default()
        })
    }
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Rosette type to start from; 0 selects the circular solution.
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    /// Integration time in units of T.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub periods: f64,
    /// Local error tolerance.
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub tol: f64,
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Minimizer grid size; defaults as for `minimize`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(64..))]
    pub nodes: Option<u64>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(16..))]
    pub modes: u64,
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub k_min: u32,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub k_max: u32,
    #[arg(long, value_parser = positive)]
    pub t_min: f64,
    #[arg(long, value_parser = positive)]
    pub t_max: f64,
    /// Log-spaced periods per winding number.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Galerkin modes for the Morse count; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub modes: u64,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Circular solution and its action.
    Circular(SpecArgs),
    /// Number of rosette types and the thresholds u_n^k.
    Classify(SpecArgs),
    /// Closed-form type-(n, k) rosette.
    Rosette(RosetteArgs),
    /// Action levels of the circle and every rosette.
    ActionSpectrum(SpecArgs),
    /// Morse index of the circular solution.
    Morse(MorseArgs),
    /// Direct minimization of the action in a winding class.
    Minimize(MinimizeArgs),
    /// Integrate the equations of motion from a closed-form orbit.
    Integrate(IntegrateArgs),
    /// Cross-check closed forms, integration, minimization and Morse count.
    Verify(VerifyArgs),
    /// Classification and action levels over a grid of periods.
    Sweep(SweepArgs),
}

impl Command {
    pub fn default_format(&self) -> Format {
        match self {
            Command::Integrate(_) => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use proptest::prelude::*;

    #[derive(Parser)]
    struct Wrapper {
        #[command(subcommand)]
        command: Command,
    }

    fn any_f64() -> impl Strategy<Value = f64> {
        prop_oneof![0.0..1e3f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
    }

    fn spec_args() -> impl Strategy<Value = SpecArgs> {
        (any_f64(), any::<i64>()).prop_map(|(period, k)| SpecArgs { period, k })
    }

    fn command() -> impl Strategy<Value = Command> {
        prop_oneof![
            spec_args().prop_map(Command::Circular),
            spec_args().prop_map(Command::Classify),
            spec_args().prop_map(Command::ActionSpectrum),
            (spec_args(), any::<u32>(), any::<u64>())
                .prop_map(|(spec, n, nodes)| Command::Rosette(RosetteArgs { spec, n, nodes })),
            (spec_args(), any::<u64>(), any_f64())
                .prop_map(|(spec, modes, zero_tol)| Command::Morse(MorseArgs { spec, modes, zero_tol })),
            (spec_args(), proptest::option::of(any::<u64>()), any_f64(), any::<u64>(), any::<u64>(), any_f64(),
             (any_f64(), any::<i32>(), any_f64(), any_f64()))
                .prop_map(|(spec, nodes, gtol, max_iter, seed, kick, (eps, freq, phase, dir_angle))| {
                    Command::Minimize(MinimizeArgs {
                        spec, nodes, gtol, max_iter, seed, kick,
                        forcing: ForcingArgs { eps, freq, phase, dir_angle },
                    })
                }),
            (spec_args(), any::<u32>(), any_f64(), any_f64())
                .prop_map(|(spec, n, periods, tol)| Command::Integrate(IntegrateArgs { spec, n, periods, tol })),
            (spec_args(), proptest::option::of(any::<u64>()), any::<u64>())
                .prop_map(|(spec, nodes, modes)| Command::Verify(VerifyArgs { spec, nodes, modes })),
            (any::<u32>(), any::<u32>(), any_f64(), any_f64(), any::<u64>(), any::<u64>()).prop_map(
                |(k_min, k_max, t_min, t_max, count, modes)| {
                    Command::Sweep(SweepArgs { k_min, k_max, t_min, t_max, count, modes })
                }
            ),
        ]
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        let format = proptest::option::of(prop_oneof![Just(Format::Json), Just(Format::Csv)]);
        let path = proptest::option::of("[a-z/._-]{1,20}".prop_map(PathBuf::from));
        (any_f64(), any_f64(), any_f64(), command(), path, format).prop_map(|(m, c, alpha, command, path, format)| {
            RunConfig { params: PhysicalParams { m, c, alpha }, command, output: OutputTarget { path, format } }
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_identity(cfg in config()) {
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }

    #[test]
    fn parsed_flags_round_trip() {
        let argv = [
            "x", "minimize", "--T", "25.132741228718345", "--k", "-2", "--eps", "-1e-3", "--freq", "2",
            "--dir-angle", "0.5",
        ];
        let cmd = Wrapper::parse_from(argv).command;
        let Command::Minimize(m) = &cmd else { panic!() };
        assert_eq!((m.spec.k, m.forcing.eps, m.forcing.freq, m.nodes), (-2, -1e-3, 2, None));
        let text = serde_json::to_string(&cmd).unwrap();
        assert_eq!(serde_json::from_str::<Command>(&text).unwrap(), cmd);
    }

    #[test]
    fn validators() {
        assert!(positive("0").is_err() && positive("-1").is_err() && positive("inf").is_err());
        assert_eq!(positive("2.5"), Ok(2.5));
        assert!(nonzero("0").is_err() && nonzero("-3") == Ok(-3));
        assert!(finite("NaN").is_err());
    }
}
