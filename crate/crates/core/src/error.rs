use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("trace error at frame {frame}: {message}")]
    Trace { frame: usize, message: String },

    #[error("sprite `{0}` is not in any sprite group")]
    DanglingSprite(String),

    #[error("unknown sprite `{0}`")]
    UnknownSprite(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("level model error: {0}")]
    LevelModel(String),

    #[error("realization error: {0}")]
    Realize(String),

    #[error("no completable level after {attempts} attempts")]
    LevelGeneration {
        attempts: u32,
        best: Box<crate::sim::GeneratedLevel>,
    },

    #[error("export error: {0}")]
    Export(String),

    #[error("knowledge base error: {0}")]
    KnowledgeBase(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Parse JSON with the failing field path included in the error.
pub(crate) fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
