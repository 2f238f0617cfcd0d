pub mod bench;
pub mod check;
pub mod irl;
pub mod replay;
pub mod rollout;
pub mod solve;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use mge_core::finite::StopRule;
use mge_core::infinite::{Init, SweepMode};

use crate::failure::{CliResult, Failure};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    MgeI,
    MgeF,
    MgeFb,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::MgeI => "mge-i",
            Solver::MgeF => "mge-f",
            Solver::MgeFb => "mge-fb",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Zeros,
    Random,
}

impl InitArg {
    pub fn init(self, scale: f64) -> CliResult<Init> {
        match self {
            InitArg::Zeros => Ok(Init::Zeros),
            InitArg::Random if scale >= 0.0 && scale.is_finite() => Ok(Init::Random { scale }),
            InitArg::Random => Err(Failure::usage(format!("--init-scale {scale} must be finite and >= 0"))),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepArg {
    /// Opponents of agent 0 first, then agent 0 against their new tables.
    Asymmetric,
    Jacobi,
}

impl From<SweepArg> for SweepMode {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Asymmetric => SweepMode::PaperAsymmetric,
            SweepArg::Jacobi => SweepMode::Jacobi,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopArg {
    FixedPoint,
    Step,
}

impl From<StopArg> for StopRule {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::FixedPoint => StopRule::FixedPoint,
            StopArg::Step => StopRule::Step,
        }
    }
}

pub fn check_epsilon(eps: f64) -> CliResult<f64> {
    if eps > 0.0 && eps.is_finite() {
        Ok(eps)
    } else {
        Err(Failure::usage(format!("--epsilon {eps} must be positive")))
    }
}

pub fn check_alpha(alpha: f64) -> CliResult<f64> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(Failure::usage(format!("--alpha {alpha} must be in (0, 1]")))
    }
}
