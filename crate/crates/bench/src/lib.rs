//! Fixtures shared by the benchmarks.

use rdsurf_core::pipeline::assemble_global_pattern;
use rdsurf_core::{assemble, glue, make_pattern_profile, synthesize_f, DiscreteOperator, Grid2D, Nonlinearity, ProfileCurve, ScalarField, SynthesisMode};

pub struct Fixture {
    pub operator: DiscreteOperator,
    pub nonlinearity: Nonlinearity,
    pub pattern: ScalarField,
}

/// Cubic-flank pattern on the default neck profile, `ns × nt` Neumann grid.
pub fn tube(ns: usize, nt: usize) -> Fixture {
    let p = ProfileCurve::cosine(1.0, 0.5, 1.0).expect("valid profile");
    let g = Grid2D::neumann(ns, nt, 1.0).expect("valid grid");
    let u = make_pattern_profile(1.0, 1.0, 3).expect("valid pattern");
    let nonlinearity = synthesize_f(&p, &u, SynthesisMode::DiscreteExact, Some(&g)).expect("synthesis");
    Fixture { operator: assemble(&p, &g).expect("assembly"), nonlinearity, pattern: u.sample(&g) }
}

/// Same pattern reflected onto the surface glued from `2n` copies.
pub fn glued(n: usize, ns: usize, nt: usize) -> Fixture {
    let piece = tube(ns, nt);
    let p = ProfileCurve::cosine(1.0, 0.5, 1.0).expect("valid profile");
    let surface = glue(&p, n, None).expect("valid gluing");
    let pattern = assemble_global_pattern(&surface, &piece.pattern).expect("global field");
    let operator = assemble(&surface, pattern.grid()).expect("assembly");
    Fixture { operator, nonlinearity: piece.nonlinearity, pattern }
}
