use thiserror::Error;

/// Errors surfaced by the library. Variants mirror the failure modes of the
/// individual operations; soft findings (failed certificates, flags) are
/// reported inside result structs instead.
#[derive(Debug, Error)]
pub enum Error {
    // ---- sequences ----
    #[error("sequence `{label}`: entry {index} is not finite")]
    NonPositive { label: String, index: usize },
    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sequence `{0}` is too short (need at least {1} entries)")]
    TooShort(String, usize),
    #[error("log M_0 = {0} but M_0 = 1 is required")]
    NonUnitHead(f64),
    #[error("h-inequality violated at t = {t}, j = {j}: slack {slack}")]
    ViolationFound { t: f64, j: usize, slack: f64 },
    #[error("counting-function grid saturated the truncation (Γ hit {0})")]
    TruncationSaturated(usize),

    // ---- weight functions ----
    #[error("weight function `{0}` is not nondecreasing at node {1}")]
    NotIncreasing(String, usize),
    #[error("weight function grid too coarse: {0} points")]
    GridTooCoarseFn(usize),
    #[error("Young conjugate maximizer at grid boundary for s = {0}")]
    MaximizerAtBoundary(f64),
    #[error("associated matrix violates the mixed moderate-growth identity: slack {0}")]
    FctmodViolation(f64),
    #[error("ω̃ construction exhausted the grid at block n = {0}")]
    GridExhausted(usize),

    // ---- constructions ----
    #[error("reduction requires L ◁ M but relation gave {0}")]
    NotLhd(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error("M_{index}^(1/{index}) <= 1: intersectability factor nonpositive")]
    FactorNonpositive { index: usize },
    #[error("p = {0} and q = {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("derivative order {0} exceeds cap {1}")]
    DerivativeCapExceeded(usize, usize),

    // ---- complex plane ----
    #[error("grid too coarse to resolve the cutoff band: {cells:.2} cells across (need >= {need})")]
    GridTooCoarse { cells: f64, need: usize },
    #[error("∂̄ data support touches the grid edge")]
    SupportTouchesEdge,

    // ---- approximation / division ----
    #[error("three-lines hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("derivative bound tail not summable (decay ratio {0:.3})")]
    TailNotSummable(f64),
    #[error("|g|^(j+1) and |h|^j disagree beyond tolerance: max deviation {0:.3e}")]
    InconsistentPowers(f64),
    #[error("chain link {0} -> {1} lacks a verified certificate: {2}")]
    CertificateMissing(usize, usize, String),
    #[error("operation not supported for this function representation: {0}")]
    UnsupportedFunction(String),

    // ---- io / parsing ----
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
