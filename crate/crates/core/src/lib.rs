//! Geometry, design rules, Monte Carlo, and fringe analysis for a
//! ghost-interference double-slit bench driven by a finite SPDC source.

pub mod cli;
pub mod design;
pub mod fringe;
pub mod geometry;
pub mod io;
pub mod montecarlo;
