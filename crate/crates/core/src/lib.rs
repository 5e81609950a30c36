//! Certification toolkit for discrete-time piecewise-affine (PWA) systems in
//! closed loop with maxout neural-network controllers.
//!
//! The toolkit computes polyhedral over-approximations of reachable sets by
//! mixed-integer linear programming and uses them to certify constraint
//! satisfaction, uniform ultimate boundedness, and (with a dual-mode
//! controller modification) asymptotic stability of the origin.
//!
//! The modules are organized bottom-up:
//!
//! * [`lp`] — dense two-phase revised simplex with general variable bounds,
//! * [`milp`] — branch-and-bound for mixed-binary linear programs,
//! * [`geometry`] — H-representation polytopes and support-function calculus,
//! * [`models`] — PWA plants, maxout networks, and dual-mode control laws,
//! * [`encoder`] — big-M mixed-integer encodings of the closed loop,
//! * [`reach`] — support-function reachability and template over-approximation,
//! * [`certify`] — positively invariant sets and stability certificates,
//! * [`sim`] — ground-truth simulation and brute-force oracles,
//! * [`io`] — structured-text file formats for models, sets, and certificates.
//!
//! A rendered guide with worked examples lives in the `book/` directory of the
//! repository; its code listings are compiled and run as doctests of this
//! crate.

pub use nalgebra;

pub mod certify;
pub mod encoder;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod lp;
pub mod milp;
pub mod models;
pub mod reach;
pub mod sim;

#[cfg(doctest)]
mod book;
