//! Periodic Laguerre tessellations with prescribed cell volumes.
//!
//! The weights of a power diagram on the triply periodic box are found by
//! maximizing the concave Kantorovich dual of a semi-discrete optimal
//! transport problem with a damped Newton method. The [`rve`] module wraps
//! this in a Lloyd-regularized pipeline that produces polycrystalline
//! representative volume elements.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod rve;
pub mod sdot;
pub mod tessellation;

pub use error::{GeometryError, RveError, SolverError, TessellationError};
pub use geometry::{ConvexPolyhedron, Facet, FacetTag, Lattice, Measures, Plane, Shift, Vec3};
pub use rve::{
    generate_rve, lloyd_step, sample_seeds, sample_targets, RveConfig, RveResult,
    VolumeDistribution, VolumeSpec,
};
pub use sdot::{
    damped_newton, kantorovich_gradient, kantorovich_hessian, kantorovich_value,
    kantorovich_value_from_diagram, mass_error, reduced_solve, IterationRecord, NewtonSolution,
    PhaseTimings, SolverConfig, SolverReport, SparseSymmetric, TargetMasses,
};
pub use tessellation::{
    compute_cell, compute_diagram, monte_carlo_volumes, radical_plane, Cell, Interface,
    LaguerreDiagram, MonteCarloVolumes, SeedSet,
};
