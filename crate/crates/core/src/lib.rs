//! Numerical laboratory for the one-dimensional semilinear wave equation
//! with weighted nonlinearity, `u_tt - u_xx = |x|^alpha |u|^p`, with data
//! `eps (f, g)` supported in `|x| <= R`.
//!
//! * [`domain`]: parameters, profiles, grids, weighted quadrature, norms.
//! * [`wave_fd`]: leapfrog solver with blow-up detection.
//! * [`wave_duhamel`]: d'Alembert + Duhamel integral equation solved by Picard iteration.
//! * [`functionals`]: `F(t) = int u`, `F''`, the Hölder gap, energy, lower bounds.
//! * [`kato`]: ODE checks of the Kato-type blow-up lemmas.
//! * [`lifespan`]: epsilon sweeps and lifespan exponent fits.
//! * [`gn`]: weighted Gagliardo-Nirenberg ratio probes.
//! * [`cli`]: config parsing, dispatch and CSV output.

pub mod cli;
pub mod domain;
pub mod error;
pub mod functionals;
pub mod gn;
pub mod kato;
pub mod lifespan;
pub mod wave_duhamel;
pub mod wave_fd;

pub use domain::{Grid1D, ProblemSpec, ProfileKind};
pub use error::{Error, Result};
