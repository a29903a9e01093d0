use botprof::corpus::CorpusError;
use botprof::ensemble::EnsembleError;
use botprof::evalx::EvalError;
use botprof::features::FeatureError;
use botprof::lm_embed::LmError;
use botprof::numnet::NumError;
use botprof::pipeline::PipelineError;
use botprof::profiler::ProfileError;
use botprof::syngen::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        CliError::Data(format!("{what}: {e}"))
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::Checkpoint(_) => data(e),
            NumError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        data(e)
    }
}

impl From<LmError> for CliError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::Numerical(n) => n.into(),
            LmError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => data(e),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Numerical(n) => n.into(),
            _ => data(e),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Numerical(n) => n.into(),
            _ => data(e),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Numerical(n) => n.into(),
            EnsembleError::Feature(f) => f.into(),
            _ => data(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        data(e)
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => data(e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(e) => e.into(),
            PipelineError::Lm(e) => e.into(),
            PipelineError::Profile(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Items(m) => CliError::Data(m),
            PipelineError::Ensemble(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            PipelineError::Synth(e) => e.into(),
        }
    }
}
