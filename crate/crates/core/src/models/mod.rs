//! Model-based descriptions used as ground truth: IO and state-space
//! representations, their simulators, the structured split with its horizon
//! matrices, and the example systems.

pub mod io;
pub mod nonlinear;
pub mod random;
pub mod ss;
pub mod structured;

pub use io::{
    example2_model, kernel_residual, msd_default, msd_model, simulate_io, state_from_past,
    Complexity, LpvIoModel, MsdParams,
};
pub use nonlinear::{
    nl_example_model, nl_example_system, scheduling_map, sinc, Example4System, NlExamplePsi,
    Reading, SchedulingMap,
};
pub use random::{random_siso, RandomSystemSpec};
pub use ss::{realize_ss, simulate_ss, LpvSsModel, SchedMatrix};
pub use structured::{
    behavior_basis, horizon_matrices, initial_state, initial_state_with, observability_rank,
    structured_from_io, structured_split, HorizonMatrices, StructuredSs,
};
