use thiserror::Error;

/// Errors surfaced by the platoon library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value that must be strictly positive (gain, headway, delay, ...) was not.
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} is not finite: {value}")]
    NonFinite { name: &'static str, value: f64 },

    /// The delay must land exactly on the integration grid.
    #[error("delay not an integer multiple of dt (tau = {tau}, dt = {dt})")]
    DelayGridMismatch { tau: f64, dt: f64 },

    #[error("dt = {dt} outside the supported range (0, {max}]")]
    StepOutOfRange { dt: f64, max: f64 },

    #[error("t_end = {t_end} does not cover the disturbance window ending at {window_end}")]
    HorizonTooShort { t_end: f64, window_end: f64 },

    #[error("piecewise disturbance segments must tile the window without overlap: {0}")]
    BadSegments(String),

    #[error("delayed-state lookup at t = {t} precedes the stored history")]
    HistoryUnderflow { t: f64 },

    /// Frequency outside the positive-quadrant arc of the boundary curve.
    #[error("frequency w = {w} outside (0, {limit}) for delay {tau}")]
    FrequencyOutOfDomain { w: f64, limit: f64, tau: f64 },

    #[error("bisection failed to converge after {iterations} iterations (residual {residual})")]
    BisectionDiverged { iterations: usize, residual: f64 },

    /// |Theta(jw)|^2 nearly vanishes: the transfer magnitude has a pole here.
    #[error("transfer function pole near w = {w} (|Theta|^2 = {theta_sq})")]
    TransferPole { w: f64, theta_sq: f64 },

    #[error("no feasible headway: 1/(2 tau) = {half_inv_tau} does not exceed k_v + k_vo = {gain_sum}")]
    NoFeasibleHeadway { half_inv_tau: f64, gain_sum: f64 },

    /// Zero-forcing needs strictly more antennas than served streams.
    #[error("insufficient antennas for ZF detection: N = {n} must exceed M + 1 = {m_plus_one}")]
    InsufficientAntennas { n: usize, m_plus_one: usize },

    #[error("RSU cannot cover the lane: d_th = {d_th} < sqrt(r_o^2 + h_o^2) = {min_range}")]
    CoverageInfeasible { d_th: f64, min_range: f64 },

    #[error("platoon does not fit coverage: length {length} >= chord {chord}")]
    PlatoonExceedsCoverage { length: f64, chord: f64 },

    #[error("platoon exceeds dual-connectivity span (2 ell_th = {chord}, length = {length})")]
    PlatoonExceedsSpan { chord: f64, length: f64 },

    #[error("no feasible platoon velocity: 2 ell_th = {chord} <= M l = {ml}")]
    NoFeasibleVelocity { chord: f64, ml: f64 },

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("unknown corpus scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON parse error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
