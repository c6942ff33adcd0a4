use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("no periodicity detected: {0}")]
    NoPeriodicity(String),
    #[error("eigenvector matrix is near-defective (condition number {condition:.3e})")]
    NearDefective { condition: f64 },
    #[error("resonant interaction: modes {low:?} with stable mode {stable}, |Re| = {real_part:.3e}")]
    Resonance {
        low: Vec<usize>,
        stable: usize,
        real_part: f64,
    },
    #[error("bracket [{lo}, {hi}] does not contain a sign change")]
    Bracket { lo: f64, hi: f64 },
    #[error("delay {tau} is not critical: Re(lambda_1) = {real_part:.3e}")]
    NotCritical { tau: f64, real_part: f64 },
    #[error("no attracting cycle at tau = {tau}")]
    NoAttractingCycle { tau: f64 },
    #[error("no UPO of family {family} at tau = {tau}")]
    NoUpo { family: String, tau: f64 },
    #[error("degenerate Hopf bifurcation: l1 = {l1:.3e}")]
    DegenerateHopf { l1: f64 },
    #[error("imaginary residue {residue:.3e} exceeds tolerance in lifted series")]
    BrokenConjugacy { residue: f64 },
    #[error("trajectory exceeds the bound R = {bound}")]
    Unbounded { bound: f64 },
    #[error("principle of exchange of stability violated: mode {mode} at tau = {tau}")]
    PesViolation { mode: usize, tau: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
