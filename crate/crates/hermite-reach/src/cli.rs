//! Command-line grammar and the merge of flags over the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hermite-reach",
    version,
    about = "Boundary control of the Hermite heat equation"
)]
pub struct Cli {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct GlobalArgs {
    /// Worker threads (default: $HHE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Gauss–Legendre nodes per time panel.
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
    /// Image sums run over |k| ≤ k_max.
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    /// Free evolution below this time returns the initial datum.
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    /// Seed for random evaluation points.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Add a wall-clock timestamp to the report.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub timestamp: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mehler kernel values on a (t, x, y) grid as CSV.
    Kernel(KernelArgs),
    /// State at the horizon for one of the boundary problems.
    Simulate(SimulateArgs),
    /// Half-line map against the reparameterized heat map.
    HalflineCheck(HalflineArgs),
    /// Controls on (−L, L) steering towards a holomorphic target.
    Synthesize(SynthesizeArgs),
    /// Crank–Nicolson check of synthesized controls.
    VerifyReach(VerifyArgs),
    /// Discrete Bergman norm of a function or a sampled state.
    BergmanNorm(BergmanArgs),
    /// Closed-form maps against the Crank–Nicolson oracle.
    OracleCompare(OracleArgs),
}

#[derive(Debug, Default, Args, Serialize)]
pub struct KernelArgs {
    /// Times: v, v1,v2,… or a:b:n.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Real parts of x, same grid syntax (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Imaginary parts of x (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub x_im: Option<String>,
    /// Real parts of y (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Imaginary parts of y (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub y_im: Option<String>,
    /// CSV output (default: standard output).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SimulateArgs {
    /// segment | halfline0 | halflinepi | symmetric
    #[arg(long)]
    pub problem: Option<String>,
    /// Horizon τ.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Control at 0: a formula in t or a CSV file t,re_u,im_u.
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<String>,
    /// Control at π (segment, halflinepi).
    #[arg(long, allow_hyphen_values = true)]
    pub upi: Option<String>,
    /// Control at −L (symmetric).
    #[arg(long, allow_hyphen_values = true)]
    pub uminus: Option<String>,
    /// Control at L (symmetric).
    #[arg(long, allow_hyphen_values = true)]
    pub uplus: Option<String>,
    /// linear | constant, for CSV controls.
    #[arg(long)]
    pub interp: Option<String>,
    /// Half-width of the symmetric interval.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Real parts of the evaluation points.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Imaginary parts of the evaluation points.
    #[arg(long, allow_hyphen_values = true)]
    pub x_im: Option<String>,
    /// Evaluate on the quadrature nodes of D | DL | Deps instead.
    #[arg(long)]
    pub domain: Option<String>,
    /// Overshoot ε of Deps, the square on (0, π+ε).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Quadrature resolution of the domain (default 4).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// State CSV output (default: standard output).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct HalflineArgs {
    /// Horizon τ.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Control at 0: a formula in t or a CSV file.
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<String>,
    /// linear | constant, for CSV controls.
    #[arg(long)]
    pub interp: Option<String>,
    /// Number of random points in the sector with |z| ≤ 2.
    #[arg(long)]
    pub points: Option<usize>,
    /// Largest accepted relative deviation (default 1e-8).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SynthesizeArgs {
    /// Holomorphic target g as a formula in z.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// Half-width of the control interval (default 1).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Plateau radius L''.
    #[arg(long = "Lpp")]
    #[serde(rename = "Lpp")]
    pub lpp: Option<f64>,
    /// Support radius L'.
    #[arg(long = "Lp")]
    #[serde(rename = "Lp")]
    pub lp: Option<f64>,
    /// Horizon τ (default 0.3).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Uniform time nodes of the written controls (default 512).
    #[arg(long)]
    pub n_time: Option<usize>,
    /// Run the oracle check on the result.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub verify: Option<bool>,
    /// Oracle space step (default 0.005).
    #[arg(long)]
    pub dx: Option<f64>,
    /// Oracle time step (default 0.0025).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Residual is measured on (−core·L, core·L) (default 0.9).
    #[arg(long)]
    pub core: Option<f64>,
    /// Largest accepted residual (default 1e-2).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Control pair CSV output (required).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct VerifyArgs {
    /// CSV written by `synthesize`.
    #[arg(long)]
    pub controls: Option<String>,
    /// Holomorphic target g as a formula in z.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// Half-width of the control interval (default 1).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Plateau radius L''.
    #[arg(long = "Lpp")]
    #[serde(rename = "Lpp")]
    pub lpp: Option<f64>,
    /// Support radius L'.
    #[arg(long = "Lp")]
    #[serde(rename = "Lp")]
    pub lp: Option<f64>,
    /// Horizon τ (default 0.3).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Oracle space step (default 0.005).
    #[arg(long)]
    pub dx: Option<f64>,
    /// Oracle time step (default 0.0025).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Residual is measured on (−core·L, core·L) (default 0.9).
    #[arg(long)]
    pub core: Option<f64>,
    /// Largest accepted residual (default 1e-2).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct BergmanArgs {
    /// D | DL | Deps | sector
    #[arg(long)]
    pub domain: Option<String>,
    /// Half-width of DL.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Overshoot ε of Deps, the square on (0, π+ε).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sector vertex on the real axis.
    #[arg(long, allow_hyphen_values = true)]
    pub vertex: Option<f64>,
    /// right | left
    #[arg(long)]
    pub orientation: Option<String>,
    /// unit | halfline
    #[arg(long)]
    pub weight: Option<String>,
    /// Horizon τ of the halfline weight.
    #[arg(long)]
    pub tau: Option<f64>,
    /// A formula in z, or a state CSV sampled on the same quadrature nodes.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Quadrature resolution (default 8).
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct OracleArgs {
    /// segment | symmetric | halfline0 | halflinepi
    #[arg(long)]
    pub problem: Option<String>,
    /// Horizon τ (default 0.4).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Control at 0: a formula in t or a CSV file.
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<String>,
    /// Control at π.
    #[arg(long, allow_hyphen_values = true)]
    pub upi: Option<String>,
    /// Control at −L.
    #[arg(long, allow_hyphen_values = true)]
    pub uminus: Option<String>,
    /// Control at L.
    #[arg(long, allow_hyphen_values = true)]
    pub uplus: Option<String>,
    /// linear | constant, for CSV controls.
    #[arg(long)]
    pub interp: Option<String>,
    /// Half-width of the symmetric interval (default 1).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Space step (default: interval length / 400).
    #[arg(long)]
    pub dx: Option<f64>,
    /// Time step (default dx/2).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Compare at every k-th interior node.
    #[arg(long)]
    pub every: Option<usize>,
    /// Largest accepted L∞ deviation (default 1e-3).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also estimate the oracle's convergence order from three grids.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub order: Option<bool>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Simulate(_) => "simulate",
            Command::HalflineCheck(_) => "halfline-check",
            Command::Synthesize(_) => "synthesize",
            Command::VerifyReach(_) => "verify-reach",
            Command::BergmanNorm(_) => "bergman-norm",
            Command::OracleCompare(_) => "oracle-compare",
        }
    }

    fn flags(&self) -> Value {
        let v = match self {
            Command::Kernel(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::HalflineCheck(a) => serde_json::to_value(a),
            Command::Synthesize(a) => serde_json::to_value(a),
            Command::VerifyReach(a) => serde_json::to_value(a),
            Command::BergmanNorm(a) => serde_json::to_value(a),
            Command::OracleCompare(a) => serde_json::to_value(a),
        };
        v.expect("flag structs serialize")
    }

    /// Keys this command accepts besides the global ones.
    fn keys(&self) -> Vec<String> {
        let v = match self {
            Command::Kernel(_) => serde_json::to_value(KernelArgs::default()),
            Command::Simulate(_) => serde_json::to_value(SimulateArgs::default()),
            Command::HalflineCheck(_) => serde_json::to_value(HalflineArgs::default()),
            Command::Synthesize(_) => serde_json::to_value(SynthesizeArgs::default()),
            Command::VerifyReach(_) => serde_json::to_value(VerifyArgs::default()),
            Command::BergmanNorm(_) => serde_json::to_value(BergmanArgs::default()),
            Command::OracleCompare(_) => serde_json::to_value(OracleArgs::default()),
        };
        object_keys(&v.expect("flag structs serialize"))
    }
}

fn object_keys(v: &Value) -> Vec<String> {
    v.as_object()
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default()
}

fn overlay(base: &mut Map<String, Value>, top: Value) {
    if let Value::Object(m) = top {
        for (k, v) in m {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
}

/// Reads the config file, checks its keys against the command and lays the
/// flags over it.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut map = Map::new();
    if let Some(path) = &cli.config {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: shown.clone(),
            source,
        })?;
        let v: Value = serde_json::from_str(&text).map_err(|source| CliError::Config {
            path: shown.clone(),
            source,
        })?;
        // unknown keys and wrong types are reported against the file
        serde_json::from_value::<RunConfig>(v.clone()).map_err(|source| CliError::Config {
            path: shown.clone(),
            source,
        })?;
        let Value::Object(m) = v else {
            unreachable!("a RunConfig is a JSON object")
        };
        let mut allowed = cli.command.keys();
        allowed.extend(object_keys(
            &serde_json::to_value(GlobalArgs::default()).expect("serializes"),
        ));
        if let Some(k) = m.keys().find(|k| !allowed.contains(k)) {
            return Err(CliError::usage(format!(
                "config {shown}: key {k:?} does not apply to {}",
                cli.command.name()
            )));
        }
        map = m;
    }
    overlay(
        &mut map,
        serde_json::to_value(&cli.global).expect("serializes"),
    );
    overlay(&mut map, cli.command.flags());
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::usage(e.to_string()))
}
