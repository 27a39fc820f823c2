use thiserror::Error;

/// Evaluation region of the Mittag-Leffler evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlRegion {
    Taylor,
    Integral,
    Asymptotic,
}

impl std::fmt::Display for MlRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MlRegion::Taylor => "taylor",
            MlRegion::Integral => "integral",
            MlRegion::Asymptotic => "asymptotic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Mittag-Leffler evaluation did not converge in the {region} region (partial estimate {estimate:e})")]
    MlConvergence { region: MlRegion, estimate: f64 },

    #[error("quadrature did not converge: worst interval [{lo}, {hi}] with error estimate {err:e}")]
    Quadrature { lo: f64, hi: f64, err: f64 },

    #[error("observation signal has zero norm but noise level {0} > 0")]
    DegenerateSignal(f64),

    #[error("finite-difference step leaves the parameter domain for component {component}")]
    StepOutOfDomain { component: &'static str },

    #[error("singular trust-region subproblem")]
    SingularSubproblem,

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("value out of range for `{field}`: {msg}")]
    Range { field: String, msg: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the numerics rather than in user
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MlConvergence { .. }
                | Error::Quadrature { .. }
                | Error::DegenerateSignal(_)
                | Error::StepOutOfDomain { .. }
                | Error::SingularSubproblem
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
