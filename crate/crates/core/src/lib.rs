//! Discrete Fourier multipliers on the lattice `Z^d`, `d <= 3`.
//!
//! A multiplier is a bounded 1-periodic function `m` on the torus `T^d`; it
//! acts on finitely supported `f: Z^d -> C` by `F(T_m f) = m * F f` where
//! `F f(xi) = sum_n f(n) e^{2 pi i n.xi}`.

pub mod error;
pub mod fourier;
pub mod io;
pub mod jet;
pub mod lattice;
pub mod multiplier;
pub mod operators;
mod par;
pub mod regularity;
pub mod selftest;
pub mod symbol;
pub mod wave;

pub use error::{Error, Result};
pub use fourier::{TorusGrid, TorusSamples};
pub use lattice::{Exponent, GridFunction, LatticeBox, C64};
pub use symbol::{parse_symbol, Symbol, SymbolKind};
