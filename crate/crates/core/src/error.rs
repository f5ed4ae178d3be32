use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaxError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector is zero")]
    ZeroVector,
    #[error("component {index} is too small to normalize by")]
    UnusableComponent { index: usize },
    #[error("matrix is singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },
    #[error("evaluation at the pole z = {pole}")]
    EvalAtPole { pole: String },
    #[error("evaluation at the zero z = {zero} of the determinant")]
    EvalAtZero { zero: String },
    #[error("degenerate configuration: pairing {pairing} vanishes")]
    DegenerateConfiguration { pairing: &'static str },
    #[error("divisor points are not in generic position: {what}")]
    NonGenericDivisor { what: String },
    #[error("divisors do not share the same constant matrix A")]
    GaugeMismatch,
    #[error("affine chart breaks down: fixed component {index} is near zero")]
    ChartBreakdown { index: usize },
    #[error("L0 is not diagonal")]
    NonDiagonalL0,
    #[error("divisor points {a} and {b} differ by an integer")]
    IntegerDifferencePoles { a: String, b: String },
    #[error("k-relation violated: residual {residual:e}")]
    KRelation { residual: f64 },
    #[error("zero of L(z)_12 is at infinity")]
    QAtInfinity,
    #[error("degenerate spectral point: {what}")]
    DegenerateSpectralPoint { what: &'static str },
    #[error("residue product has vanishing trace tr(L0^-1 L1 L2)")]
    OrthogonalResidues,
    #[error("p = {p} hits an eigenvalue of L0")]
    PoleInP { p: String },
    #[error("updated q lands on a forbidden point: {what}")]
    DegenerateQTilde { what: &'static str },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<LaxError>,
    },
}

impl LaxError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ LaxError::AtStep { .. } => e,
            e => LaxError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The underlying error with any step annotation stripped.
    pub fn root(&self) -> &LaxError {
        match self {
            LaxError::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, LaxError>;
