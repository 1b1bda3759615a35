use alloc::string::String;

/// Failures raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a decay-free model (gamma = 0)")]
    DecayNotAllowed,
    #[error("two-atom null frame requires W > 0")]
    ZeroInteraction,
    #[error("quintic root {re} has imaginary part {im:e} at W = {w}, D2 = {d2}")]
    ComplexRoot { w: f64, d2: f64, re: f64, im: f64 },
    #[error("quintic root {root} has no eigenvalue within {tolerance:e} (closest at {distance:e})")]
    RootMismatch { root: f64, distance: f64, tolerance: f64 },
    #[error("time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("loop is not closed: |f(0)| = {start:e}, |f(T)| = {end:e}")]
    OpenLoop { start: f64, end: f64 },
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("self-intersecting profile: surface method unavailable")]
    SelfIntersecting,
    #[error("phase unreachable at R = {radius}: radial integral {integral:e}")]
    UnreachablePhase { radius: f64, integral: f64 },
    #[error("{steps} steps requested, at least {min} required")]
    TooFewSteps { steps: usize, min: usize },
    #[error("halving the step count changed the result by {change:e} (tolerance {tolerance:e})")]
    NotConverged { change: f64, tolerance: f64 },
    #[error("noise grid step {dt} exceeds tau_c/10 = {limit}")]
    CoarseNoiseGrid { dt: f64, limit: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("evolution does not start and end at the base point (|f| = {0:e})")]
    BasePointMismatch(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
