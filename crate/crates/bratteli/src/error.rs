use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid family parameters: {0}")]
    InvalidFamilyParams(String),
    #[error("incidence entries must be positive where declared: {0}")]
    NonPositiveEntry(String),
    #[error("vertex {vertex} is not in the vertex set of level {level}")]
    VertexOutOfSet { level: usize, vertex: i64 },
    #[error("level {0} is beyond the depth of this diagram")]
    LevelOutOfRange(usize),
    #[error("diagram has no bounded-size parameters")]
    MissingBoundedSizeParams,
    #[error("telescoping cuts must be nonempty, strictly increasing and start at 0")]
    EmptyCuts,
    #[error("window overflow: {0}")]
    WindowOverflow(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("path depth {depth} exceeds the cap {cap}")]
    DepthCapExceeded { depth: usize, cap: usize },
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("column sum at level {level}, vertex {vertex} is infinite and has no closed-form tail")]
    MissingTailDescriptor { level: usize, vertex: i64 },
    #[error("vertex {0} is outside the support of the measure")]
    OutsideSupport(i64),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("matrix is not aperiodic (period {0})")]
    NotAperiodic(u64),
    #[error("matrix of size {0} exceeds the structural check cap")]
    MatrixTooLarge(usize),
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("no finite Perron value: {0}")]
    NoFiniteLambda(String),
    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),
    #[error("vertex selection is not admissible at level {level} (vertex {vertex})")]
    NotAdmissible { level: usize, vertex: i64 },
    #[error("retained entry exceeds parent at level {level}, ({v},{w})")]
    EntryExceedsParent { level: usize, v: i64, w: i64 },
    #[error("per-level sum has infinite support and no closed form: {0}")]
    UnknownTail(String),
    #[error("supremum is not computable: {0}")]
    SupNotComputable(String),
    #[error("no vertex with small enough tower measure found: {0}")]
    NoSmallTower(String),
    #[error("subdiagram is not simple at level {0}")]
    NotSimple(usize),
    #[error("parent diagram does not have equal row sums at level {0}")]
    NotErs(usize),
    #[error("all edges of the truncated path are maximal")]
    MaximalWithinDepth,
    #[error("all edges of the truncated path are minimal")]
    MinimalWithinDepth,
    #[error("invalid path: {0}")]
    InvalidPath(String),
}
