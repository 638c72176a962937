use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unknown observable `{0}`")]
    UnknownObservable(String),
    #[error("infeasible constants: {check} violated by margin {margin:e}")]
    InfeasibleConstants { check: String, margin: f64 },
    #[error("root finder failed: {0}")]
    RootFinding(String),
    #[error("pseudo-orbit leaves the shadowing domain at index {index} (error {error:e} > {limit:e})")]
    LeavesDomain { index: usize, error: f64, limit: f64 },
    #[error("divergence: inf_n T^n[0] unbounded below (slope {slope:e} per iteration)")]
    Divergence { slope: f64, witness: Vec<usize> },
    #[error("unbounded growth: T^n[v] increases by {slope:e} per iteration; phibar is below the grid cycle mean")]
    Growth { slope: f64 },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
