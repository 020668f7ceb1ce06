//! Sign-changing solutions of the singularly perturbed elliptic equation
//!
//! ```text
//! -eps^2 lap u + (1 + s_g eps^2 / a) u = |u|^{p-2} u
//! ```
//!
//! on discretized flat tori, computed by negative gradient flow of the
//! associated energy, plus an experiment harness measuring the ground and
//! nodal energy levels (`m_eps`, `d_eps`), their limits `m(E)` and `2 m(E)`,
//! concentration behavior, center-of-mass separation and multiplicity counts
//! as `eps` shrinks.
//!
//! The per-concept walkthrough with runnable examples lives in the `book/`
//! directory (`mdbook build book`); its code blocks double as doctests, so
//! the guide cannot drift from the API.
//!
//! Quick orientation:
//!
//! * [`manifold`] — flat tori, wrapped distances, charts, separated nets
//! * [`field`] — grid functions and the eps-weighted forms
//! * [`elliptic`] — the operator `-eps^2 lap + c` and its CG inverse
//! * [`energy`] — the functional, its gradient, Nehari scaling, constants
//! * [`groundstate`] — radial shooting for the limit problem, bubbles
//! * [`bubble`] — two-bubble nodal seeds
//! * [`flow`] — the descent engine, cone tubes, region bookkeeping
//! * [`concentration`] — concentration functions and centers of mass
//! * [`lab`] — configs, sweeps, archives, clustering (CLI: `nodalflow`)

// `!(x > 0.0)` guards reject NaN as well as nonpositive values; axis-indexed
// loops are the natural shape of stencil code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bubble;
pub mod concentration;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod field;
pub mod flow;
pub mod groundstate;
pub mod lab;
pub mod manifold;

pub use error::{Error, Result};

// Run the guide's code blocks under `cargo test --doc` so the book stays in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/operator.md")]
    mod operator {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/groundstate.md")]
    mod groundstate {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/concentration.md")]
    mod concentration {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
