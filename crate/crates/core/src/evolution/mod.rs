//! The evolutionary algorithm: random initialisation, elitist replication,
//! temperature-scaled parametric mutation with 1/5-rule step adaptation,
//! and the four structural mutations. No crossover.

mod engine;
mod mutation;
mod params;

pub use engine::{
    best_of, evolve_generation, init_population, run_ea, EvolutionTrace, GenerationRecord, MutationTally, RunResult,
    Variances,
};
pub use mutation::{
    add_connection, add_nodes, apply_structural, delete_connection, delete_nodes, parametric_mutation,
    perturb_coefficients, perturb_exponents, random_network, structural_mutation, update_variance_one_fifth,
    ParametricOutcome, StructuralOp, StructuralOutcome,
};
pub use params::{CountRange, EAParams, Interval};
