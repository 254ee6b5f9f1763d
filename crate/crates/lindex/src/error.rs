use thiserror::Error;

use crate::jet::JetError;
use crate::parse::ParseError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("empty sample grid")]
    EmptyGrid,
    #[error("beta = {beta} must exceed sqrt(n) = {}", (*.n as f64).sqrt())]
    BetaTooSmall { beta: f64, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polydisc around {anchor} leaves the unit ball")]
    PolydiscEscapesBall { anchor: String },
    #[error("ball around {anchor} leaves the unit ball")]
    BallEscapesDomain { anchor: String },
    #[error("non-finite derivative of an L component at {point}")]
    NonFiniteDerivative { point: String },
    #[error("zero skeleton maximum at {anchor}: F vanishes on a skeleton")]
    ZeroDenominator { anchor: String },
    #[error("tail bound unavailable: {0}")]
    TailBoundUnavailable(String),
    #[error("sandwich violated at {point} for component {component}")]
    SandwichViolated { point: String, component: usize },
    #[error("no dominating step up to m = {m}")]
    NoDominatingStep { m: usize },
    #[error("integrand singular at t = {t}")]
    IntegrandSingularity { t: f64 },
    #[error("inadmissible L: {0}")]
    Inadmissible(String),
    #[error("leading coefficient of equation {equation} vanishes at {point}")]
    LeadVanishes { equation: usize, point: String },
    #[error("equation {equation} residual {residual:e} at {point}")]
    ResidualFailure {
        equation: usize,
        point: String,
        residual: f64,
    },
    #[error("missing bound: {0}")]
    MissingBound(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
