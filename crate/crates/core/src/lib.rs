//! Digit frequencies along nonconventional index sequences: exact digit
//! streams, Bernoulli and Markov digit laws, admissible index schedules,
//! nonconventional ergodic averages and their martingale decomposition,
//! mixing coefficients, and Hausdorff dimensions of frequency sets.

pub mod digitkit;
pub mod fractal;
pub mod linalg;
pub mod measures;
pub mod mixing;
pub mod nonconv;
pub mod observables;
pub mod rng;
pub mod schedules;
