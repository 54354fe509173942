use binpick::eval::EvalError;
use binpick::geometry::GeometryError;
use binpick::grasp::GraspError;
use binpick::nn::NnError;
use binpick::physics::PhysicsError;
use binpick::render::RenderError;
use binpick::trials::TrialsError;

/// Failures grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit status 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Exit status 3: missing or malformed input.
    #[error("data error: {0}")]
    Data(String),
    /// Exit status 4.
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        let s = e.to_string();
        match e {
            NnError::Config(_) => CliError::Config(s),
            NnError::Divergence { .. } => CliError::Divergence(s),
            NnError::Format(_) | NnError::Fingerprint | NnError::Io { .. } => CliError::Data(s),
            NnError::Shape(_) => CliError::Other(s),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        let s = e.to_string();
        match e {
            GeometryError::InvalidArgument(_) => CliError::Config(s),
            GeometryError::Io { .. } | GeometryError::Parse { .. } | GeometryError::Degenerate(_) => CliError::Data(s),
            GeometryError::Decomposition(_) => CliError::Other(s),
        }
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        let s = e.to_string();
        match e {
            RenderError::InvalidConfig(_) => CliError::Config(s),
            RenderError::Io { .. } | RenderError::Format(_) | RenderError::OutOfBounds { .. } => CliError::Data(s),
        }
    }
}

impl From<PhysicsError> for CliError {
    fn from(e: PhysicsError) -> Self {
        match e {
            PhysicsError::InvalidParameter(s) => CliError::Config(s),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<TrialsError> for CliError {
    fn from(e: TrialsError) -> Self {
        match e {
            TrialsError::Config(s) => CliError::Config(format!("invalid configuration: {s}")),
            TrialsError::Io { .. } | TrialsError::Format(_) => CliError::Data(e.to_string()),
            TrialsError::Physics(e) => e.into(),
            TrialsError::Render(e) => e.into(),
            TrialsError::Geometry(e) => e.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<GraspError> for CliError {
    fn from(e: GraspError) -> Self {
        match e {
            GraspError::Config(s) => CliError::Config(s),
            GraspError::OutOfBounds { .. } => CliError::Data(e.to_string()),
            GraspError::Nn(e) => e.into(),
            GraspError::Render(e) => e.into(),
            GraspError::Trials(e) => e.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(s) => CliError::Config(s),
            EvalError::UndefinedMetric(_) | EvalError::InsufficientData(_) | EvalError::Io { .. } => CliError::Data(e.to_string()),
            EvalError::Grasp(e) => e.into(),
            EvalError::Nn(e) => e.into(),
            EvalError::Trials(e) => e.into(),
            EvalError::Physics(e) => e.into(),
            EvalError::Geometry(e) => e.into(),
            EvalError::Render(e) => e.into(),
        }
    }
}
