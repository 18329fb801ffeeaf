//! Run configuration: a flat JSON object whose keys match the long flags
//! (with `_` for `-`). Flags given on the command line override the file.

use serde::{Deserialize, Serialize};

/// Every key any command understands. Unknown keys are rejected when the
/// file is read; keys that belong to a different command are rejected by
/// [`crate::cli::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub quad_nodes: Option<usize>,
    pub k_max: Option<usize>,
    pub t_min: Option<f64>,
    pub seed: Option<u64>,
    pub timestamp: Option<bool>,
    pub out: Option<String>,

    pub t: Option<String>,
    pub x: Option<String>,
    pub x_im: Option<String>,
    pub y: Option<String>,
    pub y_im: Option<String>,

    pub problem: Option<String>,
    pub tau: Option<f64>,
    pub u0: Option<String>,
    pub upi: Option<String>,
    pub uminus: Option<String>,
    pub uplus: Option<String>,
    pub interp: Option<String>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "Lpp")]
    pub lpp: Option<f64>,
    #[serde(rename = "Lp")]
    pub lp: Option<f64>,

    pub points: Option<usize>,
    pub tol: Option<f64>,
    pub target: Option<String>,
    pub n_time: Option<usize>,
    pub verify: Option<bool>,
    pub controls: Option<String>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub core: Option<f64>,
    pub every: Option<usize>,
    pub order: Option<bool>,

    pub domain: Option<String>,
    pub eps: Option<f64>,
    pub vertex: Option<f64>,
    pub orientation: Option<String>,
    pub weight: Option<String>,
    pub f: Option<String>,
    pub resolution: Option<usize>,
}
