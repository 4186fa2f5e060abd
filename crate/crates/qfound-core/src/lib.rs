//! Dense labeled operator algebra for finite-dimensional quantum systems,
//! with channel/state duals, causal-model machinery, closed-timelike-curve
//! simulators, ontological-model overlap solvers and fingerprinting bounds.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! only toggles `std::error::Error` impls.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod algebra;
pub mod causal;
pub mod channel;
pub mod comm;
pub mod ctc;
pub mod dense;
pub mod dims;
pub mod entropy;
pub mod error;
pub mod mat;
pub mod ontology;
pub mod qci;
pub mod random;
pub mod spectral;
pub mod tol;

pub use causal::{
    bayes_update_common_cause, classical_limit, link_out, markov_violations_after_removal,
    model_state, predict, validate_model, CausalDag, ModelState, QuantumCausalModel,
};
pub use channel::{apply_channel, cj_of_unitary, Channel, Instrument};
pub use comm::{
    fc_lower_bound, fc_pigeonhole_witness, fingerprint_states, hamming_distance, random_code,
    verify_triples, Codebook, FingerprintSet, PigeonholeViolation, TripleReport,
};
pub use ctc::{
    builtin_circuit, dctc_evolve, dctc_evolve_from, haar_fourth_moment_ratio, p_operator,
    pctc_evolve, tctc_distinguishability_bound, tctc_evolve, tctc_montecarlo, DctcSolution,
    StandardFormCircuit, TctcResult, Uniqueness,
};
pub use dense::{partial_trace, tensor, DenseOperator, PureState};
pub use dims::{Dim, Dims};
pub use entropy::{
    conditional_mutual_information, fidelity, trace_distance, von_neumann_entropy,
};
pub use error::{CoreError, Result};
pub use ontology::{
    anti_distinguishable_triple, apply_transform, asymmetric_overlap, bound_tables,
    construct_theorem_states, epsilon_asymmetric_overlap, lgi_value, mr_inequality,
    reproduces_quantum, symmetric_overlap, BoundTables, FiniteOntModel, MrInequality,
    OverlapQuery, QuantumSpecEntry, QuantumSpecReport, Response, TheoremStates,
};
pub use qci::{
    check_cmi, check_factorisation, check_multipartite_qci, check_no_causal_influence,
    find_decomposition, QciReport,
};
pub use random::haar_sample_pure;
pub use tol::Tol;

pub use num_complex::Complex64;
