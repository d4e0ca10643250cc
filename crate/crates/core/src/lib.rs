//! Surrogate latent spaces over generative-model latents, and black-box
//! optimisers that search them.

pub mod bridge;
pub mod charts;
pub mod diagnostics;
pub mod latent;
pub mod linalg;
pub mod optim;
pub mod space;
pub mod stats;
pub mod structure;
pub mod special;

pub use charts::{ChartError, ChartKind, Inverted, UPoint, WeightVector};
pub use latent::{ComponentSpec, LatentError, LatentSpec, ScalarCdf, SeedSet};
pub use optim::{Objective, ObjectiveError, OptimError, RunRecord};
pub use space::{SpaceError, SpaceObjective, SurrogateSpace};
pub use diagnostics::{dominance_experiment, CorrelationReport, DominanceConfig};
pub use structure::{DesignResult, Structure};
pub use bridge::{synthetic_cone, BridgeError, Session, SyntheticCone};
