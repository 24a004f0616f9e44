//! Exact uniform sampling of proper `k`-colorings with a randomness recycler.
//!
//! The sampler keeps a coloring together with a per-node index that names
//! the (uniform) distribution the coloring is currently drawn from. Each step
//! removes one restriction from the index, either by accepting the current
//! coloring under the relaxed index or by recycling the rejected randomness
//! into a new, more restrictive index. When every node is unrestricted the
//! coloring is an exact uniform draw from the proper colorings of the graph.
//!
//! ```
//! use rrcolor::{graph::Graph, randomness::BitSource, rr};
//!
//! let triangle = Graph::complete(3).unwrap();
//! let mut rng = BitSource::new(7);
//! let (coloring, metrics) = rr::sample(&triangle, 3, &mut rng, &rr::SamplerOptions::default()).unwrap();
//! assert!(coloring.is_proper(&triangle));
//! assert_eq!(metrics.total_steps, metrics.steps_by_kind.total());
//! ```

pub mod graph;
pub mod potential;
pub mod randomness;
pub mod rr;
pub mod state;
pub mod stats;
pub mod verification;

pub use graph::Graph;
pub use potential::{PotentialParams, Rational};
pub use randomness::BitSource;
pub use state::{Coloring, IndexEntry, IndexState};
