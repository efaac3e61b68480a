use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: expected one of {expected:?}")]
    Parse {
        offset: usize,
        expected: Vec<&'static str>,
    },
    #[error("variable x{index} out of range for base dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("division by a jet with zero constant term")]
    DivisionByZeroConstantTerm,
    #[error("sqrt of a jet with nonpositive constant term {0}")]
    SqrtOfNonpositive(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("jet differentiation budget exhausted")]
    JetOrderExhausted,
    #[error("operands live on different charts or jet spaces")]
    ChartMismatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("curvature leaves End2: residual {residual:e} in {location}")]
    End2Violation { residual: f64, location: String },
    #[error("degenerate frame: pivot {index} has vanishing norm")]
    FrameDegenerate { index: usize },
    #[error("constructed structure fails the master equation (max residual {0:e})")]
    MasterEquationFailure(f64),
    #[error("flow step rejected: {0}")]
    StepRejected(String),
    #[error("model schema: {0}")]
    Schema(String),
}
