//! A computational toolkit for higher-order Fourier analysis over `F_p^n`.
pub mod error;
pub mod factor;
pub mod field;
pub mod function;
pub mod gowers;
pub mod poly;
pub mod sampling;
mod sum;
pub mod testers;
pub mod upsilon;

pub use error::{Budget, Error, Result};
pub use field::{rank, AffineMap, Field, Matrix, PointIndex};
pub use function::{DenseFunction, FourierTable};
pub use gowers::{GowersEstimate, LinearFormSystem};
pub use sampling::McEstimate;
pub use poly::{FactoredPolynomial, NonClassicalPoly, PolyTable, Rank, RankResult, TValue};
pub use factor::{Decomposition, PolyFactor};
