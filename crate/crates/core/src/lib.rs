//! Sierpinski graph with return-ratio conductances: exact addressing, typed
//! graph construction, reversible random walks (discrete and continuous
//! time), Green functions and harmonic measure by sparse solves, the
//! energy-minimizing triangle interpolation, graph and jump energy forms, and
//! the critical-exponent scanner that locates the walk dimension
//! `log 5 / log 2` from energy growth alone.

pub mod address;
pub mod conductance;
pub mod energy;
pub mod error;
pub mod graph;
pub mod green;
pub mod harmonic;
pub mod walk;

pub use address::{boundary_point, cell_barycenter, cell_vertices, vertex_point, LatticePoint, Word};
pub use conductance::{ConductanceParams, WeightedGraph};
pub use error::{Error, Result};
pub use graph::{build_graph, EdgeKind, Graph, NodeFunction};
