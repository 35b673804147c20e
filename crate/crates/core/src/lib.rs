//! Compiler and simulator for the one-way quantum computer.
//!
//! A quantum logic network ([`circuit::Circuit`]) is compiled into a pattern
//! of one-qubit measurements on a cluster state ([`compiler`]); the pattern's
//! measurements are ordered into rounds ([`scheduler`]) and executed with
//! adaptive bases driven by the information flow vector ([`controller`],
//! [`runtime`]). Every stage can be checked against direct statevector
//! simulation of the network ([`qsim`]).

pub mod circuit;
pub mod cli;
pub mod cluster;
pub mod compiler;
pub mod controller;
pub mod format;
pub mod pauli;
pub mod qsim;
pub mod runtime;
pub mod scheduler;
