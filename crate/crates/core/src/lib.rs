//! Two-dimensional moving-boundary simulation of a viscous drop enclosed by a
//! semipermeable membrane, driven by surface tension and osmotic pressure.
//!
//! In nondimensional form the model has a single parameter `κ`:
//!
//! ```text
//! -Δu + ∇(q + c) = 0,  div u = 0         in Ω(t)
//! (ε(u) - (q + c)I) n = κ H n              on ∂Ω(t)
//! ∂t c - Δc = -∇c·u                        in Ω(t)
//! ∂n c + c (κH + c) = 0                    on ∂Ω(t)
//! V_n - κH = c + u·n                       on ∂Ω(t)
//! ```
//!
//! The domain is a star-shaped radial graph, the Stokes problem is solved by
//! a boundary integral method and the solute is transported on the mapped
//! polar grid in ALE form.

pub mod config;
pub mod energetics;
pub mod evolution;
pub mod field;
pub mod geometry;
pub mod initial;
pub mod linalg;
pub mod oracle;
pub mod output;
pub mod par;
pub mod run;
pub mod spectral;
pub mod stokes;
pub mod transport;
