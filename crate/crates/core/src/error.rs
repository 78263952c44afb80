use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("bulk exchange requested at inactive bond {bond} (engine bookkeeping corrupted)")]
    InactiveBond { bond: usize },

    #[error("bond {bond} out of range 1..={max}")]
    BondOutOfRange { bond: usize, max: usize },

    #[error(
        "macroscopic horizon {t_macro} with speed-up {speedup:e} gives micro horizon {micro:e}, \
         which is not representable at holding-time resolution"
    )]
    HorizonOverflow { t_macro: f64, speedup: f64, micro: f64 },

    #[error("regime {regime} needs the initial mean density m0, none supplied")]
    MissingInitialDensity { regime: &'static str },

    #[error("state space too large: N = {n} gives 2^{} states (limit N <= {max})", .n - 1)]
    StateSpaceTooLarge { n: usize, max: usize },

    #[error("generator null space is not one-dimensional (pivot {pivot:e}); generator construction bug")]
    NonUniqueStationary { pivot: f64 },

    #[error("unknown integrand id `{0}`")]
    UnknownIntegrand(String),

    #[error("unknown test function `{0}`")]
    UnknownTestFunction(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
