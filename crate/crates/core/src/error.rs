use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("integration from theta0={theta0}, p0={p0} exceeded {max_steps} steps (reached t={t})")]
    MaxStepsExceeded {
        theta0: f64,
        p0: f64,
        max_steps: usize,
        t: f64,
    },

    #[error("{path} path diverged at t={t_div} before the requested time {t}")]
    PathDiverged {
        path: &'static str,
        t_div: f64,
        t: f64,
    },

    #[error("time {t} is not on the shared sample grid")]
    TimeNotSampled { t: f64 },

    #[error("no sign change of the {branch} branch function on [{lo}, {hi}]")]
    NoBracket {
        branch: &'static str,
        lo: f64,
        hi: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
