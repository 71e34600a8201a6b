use thiserror::Error;

/// Everything in this crate that can fail fails with one of these.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability table contains an entry below -1e-12.
    #[error("negative mass {mass:.3e} at flat index {index}")]
    NegativeMass { index: usize, mass: f64 },

    /// A probability table sums to something further than 1e-9 from 1.
    #[error("table sums to {sum} (must be 1 within 1e-9)")]
    SumNotOne { sum: f64 },

    /// Table length does not match the product of alphabet sizes.
    #[error("table has {got} entries, variable shape requires {want}")]
    ShapeMismatch { got: usize, want: usize },

    /// A variable name was requested that the pmf does not carry.
    #[error("unknown variable `{name}`")]
    UnknownVariable { name: String },

    /// Conditioning on variables whose whole marginal carries zero mass.
    #[error("conditioning variables carry zero total mass")]
    AllMassZero,

    /// A channel's input alphabet does not match the variable it is attached to,
    /// or two models that must share alphabets do not.
    #[error("alphabet mismatch: {context}")]
    AlphabetMismatch { context: String },

    /// An explicit model has no table for the requested blocklength.
    #[error("no table for blocklength {n}")]
    MissingBlocklength { n: u32 },

    /// An exact computation would exceed its configured budget.
    #[error("budget exceeded: {context} ({needed} > {budget})")]
    BudgetExceeded {
        context: String,
        needed: u64,
        budget: u64,
    },

    /// A log-ratio is +inf on a positive-mass cell, so the requested density
    /// has no finite distribution.
    #[error("density undefined: {context}")]
    UndefinedDensity { context: String },

    /// An operation over an n-grid or subset family got an empty one.
    #[error("empty grid")]
    EmptyGrid,

    /// A subset-indexed bound was asked for the empty subset.
    #[error("empty terminal subset")]
    EmptySubset,

    /// A joint law that must factorize through per-terminal channels does not.
    #[error("factorization violated: {context}")]
    FactorizationViolated { context: String },

    /// No channel configuration meets the distortion targets.
    #[error("distortion target {target} below the minimum achievable {minimum:.6}")]
    InfeasibleDistortion { target: f64, minimum: f64 },

    /// A run configuration is internally inconsistent.
    #[error("invalid config: {context}")]
    InvalidConfig { context: String },

    /// Model JSON failed to parse or validate.
    #[error("model parse error at `{pointer}`: {message}")]
    ModelParse { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
