use thiserror::Error;

/// Errors raised by the vessel models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{what} = {value} outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("surface quantity requested at the degenerate tip s = {s}; stop at the last grid node")]
    TipSingularity { s: f64 },

    #[error("kernel singularity: target and source coincide (distance {distance:e})")]
    Singularity { distance: f64 },

    #[error("point {point:?} lies inside the vessel (r = {r:e} < {radius:e} at s = {s})")]
    InteriorPoint {
        point: [f64; 3],
        r: f64,
        radius: f64,
        s: f64,
    },

    #[error("s = {s} lies outside the cutoff plateau s <= {plateau_end}")]
    CutoffZone { s: f64, plateau_end: f64 },

    #[error("singular system ({context}): {unknowns} unknowns, eps = {eps}")]
    Conditioning {
        context: String,
        unknowns: usize,
        eps: f64,
    },

    #[error("residual {residual:e} exceeds {tolerance:e} ({context})")]
    Convergence {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
