use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("load error: {0}")]
    Load(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("panel is empty: {0}")]
    EmptyPanel(String),

    #[error("series `{label}` has {len} observations, need more than {needed}")]
    SeriesTooShort {
        label: String,
        len: usize,
        needed: usize,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(
        "insufficient degrees of freedom: {nobs} observations for {vars} series at order {order} \
         (need T - p > n*p + 1); meet the freedom degree requirement of the model by \
         sub-sampling the series (e.g. by maturity group or category)"
    )]
    DegreesOfFreedom {
        nobs: usize,
        vars: usize,
        order: usize,
    },

    #[error("collinear regressors: series `{0}` is linearly dependent on the others")]
    Collinear(String),

    #[error("VAR model is not stable (spectral radius {0:.6})")]
    Unstable(f64),

    #[error("spectral singularity at lambda = {lambda:.6}: condition number {condition:.3e}")]
    SpectralSingularity { lambda: f64, condition: f64 },

    #[error("numerical consistency: {0}")]
    Numerical(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{scope}: {source}")]
    Scoped {
        scope: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Prefixes the error with a scope such as a group or window name.
    pub fn scoped(self, scope: impl Into<String>) -> Self {
        Error::Scoped {
            scope: scope.into(),
            source: Box::new(self),
        }
    }

    /// Name of the failing stage, if the error was raised inside one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            Error::Scoped { source, .. } => source.stage(),
            _ => None,
        }
    }

    /// Short machine-readable kind, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Load(_) => "load",
            Error::InvalidArgument(_) => "argument",
            Error::EmptyPanel(_) => "empty_panel",
            Error::SeriesTooShort { .. } => "too_short",
            Error::Degenerate(_) => "degenerate",
            Error::DegreesOfFreedom { .. } => "degrees_of_freedom",
            Error::Collinear(_) => "collinear",
            Error::Unstable(_) => "unstable",
            Error::SpectralSingularity { .. } => "spectral_singularity",
            Error::Numerical(_) => "numerical",
            Error::NonConvergence { .. } => "non_convergence",
            Error::UnknownNode(_) => "unknown_node",
            Error::InvalidNetwork(_) => "invalid_network",
            Error::Stage { source, .. } | Error::Scoped { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
