use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box edge lengths must be positive and finite, got {0}")]
    InvalidLattice(f64),
    #[error("plane normal must be nonzero")]
    DegeneratePlane,
    #[error("facet has fewer than three vertices or an out-of-range index")]
    MalformedFacet,
    #[error("empty cell")]
    EmptyCell,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TessellationError {
    #[error("seed {0} is not strictly inside the fundamental box")]
    SeedOutsideBox(usize),
    #[error("seeds {0} and {1} coincide up to a lattice shift")]
    DuplicateSeeds(usize, usize),
    #[error("need at least one seed")]
    NoSeeds,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("non-finite weight at seed {0}")]
    NonFiniteWeight(usize),
    #[error("degenerate pair: power distances are defined by coincident points")]
    DegeneratePair,
    #[error("cell {0} may be cut by a distant image (weights too spread for the image search)")]
    DistantImage(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("target masses must be positive and finite (index {0})")]
    InvalidTarget(usize),
    #[error("expected {expected} target masses, got {got}")]
    TargetCount { expected: usize, got: usize },
    #[error("tolerance eta must be positive")]
    InvalidTolerance,
    #[error("empty cell {0}: the Hessian is undefined there")]
    EmptyCell(usize),
    #[error("infeasible initial guess: cell {0} has zero volume")]
    InfeasibleInitialGuess(usize),
    #[error(
        "singular reduced Hessian (relative residual {residual:.3e} after {iterations} iterations)"
    )]
    SingularReducedHessian { residual: f64, iterations: usize },
    #[error("line search failed at Newton iteration {iteration} after {steps} backtracking steps")]
    LineSearchFailed { iteration: usize, steps: usize },
    #[error("maximum number of Newton iterations ({0}) exceeded")]
    MaxIterations(usize),
    #[error(transparent)]
    Tessellation(#[from] TessellationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RveError {
    #[error("DP requires even n, got {0}")]
    DpRequiresEvenN(usize),
    #[error("need at least one grain")]
    NoGrains,
    #[error("explicit volume list has {got} entries, expected {expected}")]
    ExplicitCount { expected: usize, got: usize },
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("could not place {0} distinct seeds")]
    SeedPlacement(usize),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Tessellation(#[from] TessellationError),
}
