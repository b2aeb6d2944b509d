//! Station graphs, their fusion, and spectral filtering.

mod adjacency;
mod cheb;
mod fusion;
mod io;
mod laplacian;
mod learned;
mod static_graphs;

pub use adjacency::{Adjacency, GraphKind, GraphSlot};
pub use cheb::{cheb_filter, cheb_filter_tape};
pub use fusion::{broadcast_batch, fuse_graphs, fuse_tape, fuse_with_params, FusionParams};
pub use io::{
    build_static_graphs, load_graphs, save_graphs, GraphBuildConfig, GraphMeta, StaticGraphSet,
    GRAPHS_MAGIC, GRAPHS_VERSION,
};
pub use laplacian::{
    power_iteration, scaled_laplacian, scaled_laplacian_tape, LaplacianDiagnostics, PowerResult,
    ScaledLaplacian, LAMBDA_FALLBACK, POWER_MAX_ITERS, POWER_TOL,
};
pub use learned::{
    antisymmetric_graph, DynamicGraphConfig, DynamicGraphParams, LearnableGraphConfig,
    LearnableGraphParams,
};
pub use static_graphs::{
    build_distance_graph, build_neighbor_graph, build_pattern_graph, resolve_sigma,
    DistanceGraphConfig, NeighborGraphConfig, PatternGraphs, Sigma, DEFAULT_PATTERN_FACTORS,
};
pub(crate) use learned::uniform;
