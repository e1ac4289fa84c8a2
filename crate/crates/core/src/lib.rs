//! Numerical laboratory for weighted composition operators `M_w C_φ` on
//! weighted Bergman spaces `B²_α` of the unit disk.
//!
//! The crate is organised around the objects the experiments manipulate:
//!
//! * [`geometry`] — Carleson boxes, the pseudo-hyperbolic metric, Möbius
//!   maps, Blaschke products and pseudo-hyperbolic disks.
//! * [`boundary`] — sampled `2π`-periodic boundary data with FFT-based
//!   Poisson extension and conjugate-function transforms.
//! * [`symbols`] — a uniform representation of analytic self-maps and
//!   weights, Taylor coefficient extraction, and the symbol mini-language
//!   used by the CLI.
//! * [`measures`] — quadrature rules for `dA_α`, pull-back measures,
//!   Carleson profiles and their classification.
//! * [`operator`] — matrix truncations of `M_w C_φ`, Hilbert–Schmidt norms
//!   by two routes, singular values, boundary compactness probes.
//! * [`weights`] — the constructive weight builders: peak functions,
//!   the box-ratio functional `Φ`, single-scale weights, their staged sums,
//!   and the decompactification pipeline `w = u∘φ`.
//! * [`hs`] — Hilbert–Schmidt regularization: the radial integral `G(θ)`,
//!   Szegő minimization, radial infima, weak-L¹ diagnostics, and the
//!   logarithmic bound for Blaschke products.

pub mod boundary;
pub mod error;
pub mod geometry;
pub mod hs;
pub mod measures;
pub mod operator;
pub mod quadrature;
pub mod symbols;
pub mod weights;

pub use boundary::{conjugate_function, poisson_integral, BoundaryFunction, BoundaryTag};
pub use error::{Error, Result};
pub use geometry::{
    box_ratio_grid, orthogonal_boundary_disk, pseudo_hyperbolic, BlaschkeProduct, CarlesonBox,
    MobiusMap, PseudoHyperbolicDisk,
};
pub use measures::{
    carleson_profile, classify, CarlesonClass, CarlesonProfile, Classification, PullbackSample,
    Resolution, WeightedAreaMeasure,
};
pub use operator::{
    an_bound, build_matrix, hs_norm_basis, hs_norm_integral, jc_ratio, moorhouse_probe,
    singular_values, BergmanBasis, OperatorMatrix, SingularSpectrum,
};
pub use symbols::{parse_symbol, taylor_coefficients, AnalyticMap, SymbolKind, TaylorSeries};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
