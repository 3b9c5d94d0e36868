use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cell description: {0}")]
    InvalidCell(String),
    #[error("inclusions {0} and {1} overlap")]
    InclusionOverlap(usize, usize),
    #[error("crack touches cell boundary")]
    CrackTouchesBoundary,
    #[error("open crack {crack} intersects the closure of inclusion {inclusion}")]
    OpenCrackHitsInclusion { crack: usize, inclusion: usize },
    #[error("open cracks {0} and {1} touch")]
    OpenCracksTouch(usize, usize),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("incompatible subdivision: {0}")]
    IncompatibleSubdivision(String),
    #[error("exact tiling required: {0}")]
    ExactTilingRequired(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("invalid contact data: {0}")]
    InvalidContact(String),
    #[error("expression error at byte {pos}: {msg}")]
    Expr { pos: usize, msg: String },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("solver diverged: {0}")]
    Diverged(String),
    #[error("eigensolver stagnated: {0}")]
    Stagnation(String),
    #[error("infeasible state: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
