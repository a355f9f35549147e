use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("curve is not strictly convex: curvature {kappa:e} at parameter {at}")]
    NonConvex { kappa: f64, at: f64 },
    #[error("degenerate curve specification: {0}")]
    DegenerateSpec(String),
    #[error("arc-length {s} outside curve domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("chord leaves the arc")]
    EscapesDomain,
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("map undefined at sample ({0}, {1})")]
    MapUndefined(f64, f64),
    #[error("jet extraction ill-conditioned at s={s}: disagreement {disagreement:e}")]
    IllConditioned { s: f64, disagreement: f64 },
    #[error("series order mismatch: {0}")]
    OrderMismatch(String),
    #[error("series order {0} exceeds the supported maximum 12")]
    OrderTooHigh(usize),
    #[error("drift profile not resolvable: {0}")]
    ProfileNoise(String),
    #[error("level curve left the sub-arc before reaching the section")]
    LevelCurveEscape,
    #[error("point outside the chart validity window: {0}")]
    OutsideValidity(String),
    #[error("sector too large: {0}")]
    SectorTooLarge(String),
    #[error("orbit escaped the window before reaching the fundamental domain")]
    OrbitEscape,
    #[error("gradient bound dg/dh > 1/2 lost (min {0:e})")]
    GradientLoss(f64),
    #[error("envelope cusp detected (p'' + p = {0:e})")]
    CuspDetected(f64),
    #[error("line passes through the duality origin")]
    ThroughOrigin,
    #[error("caustic leaves cross: {0}")]
    LeavesCross(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("inconclusive input: {0}")]
    InconclusiveInput(String),
    #[error("conjugacy verdict is negative")]
    VerdictNegative,
    #[error("no real tangent conic for this chord")]
    NoRealTangency,
    #[error("invalid parameter: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
