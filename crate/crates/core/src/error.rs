use thiserror::Error;

/// Errors raised by model construction, validation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "type range too narrow: theta_max = {theta_max} must exceed u'(0)F/(u'(Q)u(Q)) = {bound}"
    )]
    ValuationRange { theta_max: f64, bound: f64 },

    #[error("capacity {capacity} is below the no-reward demand D(0) = {baseline}")]
    CapacityBelowBaseline { capacity: f64, baseline: f64 },

    #[error("integrand is not finite at theta = {theta}")]
    NonFiniteIntegrand { theta: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:e})")]
    QuadratureDivergence { lo: f64, hi: f64, estimate: f64 },

    #[error("root bracket violated for {what} at omega = {omega}: {detail}")]
    Bracket {
        what: &'static str,
        omega: f64,
        detail: String,
    },

    #[error("structural check `{check}` failed at omega = {omega}: {detail}")]
    Structure {
        check: &'static str,
        omega: f64,
        detail: String,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("unbounded search for {what}: no bracket after {doublings} doublings")]
    Unbounded { what: &'static str, doublings: u32 },

    #[error("empty feasible region: no omega satisfies D(omega) <= C")]
    EmptyFeasibleRegion,

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("cannot parse {format} scenario: {message}")]
    Parse {
        format: &'static str,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
