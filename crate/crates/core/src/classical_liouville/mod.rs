//! Classical Liouville dynamics in phase space.

pub mod density;
pub mod flow;
pub mod hamiltonian;
pub mod joint;
pub mod liouville;

pub use density::{
    l1_distance, mixedness, overlap, propagate_density, propagate_density_with, BoundingBox,
    GridDensity, GridSpec, Mixedness, PhaseSpaceDensity, Propagation, PropagationOptions,
    SampleDensity,
};
pub use flow::{
    determinant, energy_drift, flow_jacobian, flow_map, step_plan, trajectory, Leapfrog,
};
pub use hamiltonian::{
    Composite, FnField, FnHamiltonian, HamiltonianField, LibrarySystem, PhaseSpacePoint,
    ScalarField,
};
pub use joint::{
    build_joint_density, condition_on_clock_density, joint_mixedness, paired_l1_bound,
    propagate_joint, JointBranch, JointDensity, JointMixedness,
};
pub use liouville::{
    liouville_residual, tilde_apply, DensityEvolution, FnDensity, LiouvilleResidual,
    SymplecticForm, TransportedDensity,
};
