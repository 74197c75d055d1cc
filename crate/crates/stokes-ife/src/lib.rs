//! Immersed CR-P0 finite elements for two-phase Stokes flow.
//!
//! Solves the stationary Stokes interface problem on a fixed rectangular domain
//! split by a smooth internal interface into two subdomains with different
//! viscosities. The mesh is unfitted: triangles may be cut by the interface.
//! On cut elements the nonconforming CR velocity / P0 pressure pair is replaced
//! by immersed basis functions that satisfy the velocity and stress jump
//! conditions along the straight chord approximating the interface, without
//! changing the degrees of freedom.
//!
//! Pipeline: [`mesh::Mesh`] -> [`interface::classify`] / [`interface::build_cut`]
//! -> [`ife::LocalBasis`] per element -> [`assembly::assemble`] ->
//! [`solver::solve`] -> [`analysis::compute_errors`]. The `cli` module drives
//! convergence studies and property-check suites from the command line.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod geometry;
pub mod ife;
pub mod interface;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod verify;

/// Errors shared across the crate. Variants map onto CLI exit codes:
/// parameter problems exit 1, geometry problems 2, solver problems 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported quadrature degree {0} (max {1})")]
    UnsupportedDegree(usize, usize),
    #[error("degenerate triangle: area {0:.3e} below tolerance")]
    DegenerateTriangle(f64),
    #[error("interface resolution assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("no interface crossing on segment: {0}")]
    NoRoot(String),
    #[error("degenerate cut on element {element}: {reason}")]
    DegenerateCut { element: usize, reason: String },
    #[error("element {0} has no cut data")]
    MissingCutData(usize),
    #[error("singular local system: {0}")]
    SingularSystem(String),
    #[error("sparse factorization failed: {0}")]
    SingularMatrix(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code class: 1 usage/parameters, 2 geometry, 3 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_) | Error::Io(_) => 1,
            Error::SingularSystem(_) | Error::SingularMatrix(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
