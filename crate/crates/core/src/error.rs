use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type. Variants are grouped by what the caller can do
/// about them: bad data, bad configuration, bad files, or a diverged
/// computation.
#[derive(Debug, Error)]
pub enum Error {
    /// A box with zero or negative extent reached a geometric operation.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A paired box clipped to the frame left no area to crop.
    #[error("degenerate crop: {0}")]
    DegenerateCrop(String),

    /// A feature vector and a model disagree on dimensionality.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A classification target that is not a valid one-hot vector.
    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// The training set is missing one of the two classes.
    #[error("degenerate training data: {0}")]
    DegenerateTrainingData(String),

    /// Training produced a non-finite loss.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    /// Strict evaluation saw a prediction for an image the ground truth
    /// does not know about.
    #[error("unknown image id in predictions: {0}")]
    UnknownImage(String),

    /// A pluggable scorer failed; the pair it failed on is attached.
    #[error("scorer failed on image {image_id}, human {human_index}, firearm {firearm_index}")]
    Scorer {
        image_id: String,
        human_index: usize,
        firearm_index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A dataset did not survive strict validation.
    #[error("dataset validation failed: {0}")]
    InvalidDataset(String),

    /// A file did not match its expected format.
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
