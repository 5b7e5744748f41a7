//! Exact `2Q`-wise independent families, their thresholded versions with
//! marginal `ε = B/A`, and the adjusting unitaries that re-weight a
//! superposition of predicates toward a target transcript.

mod adjust;
mod family;
mod field;

pub use adjust::{
    pure_distance, sparse_superposition, u_le, u_prime, u_prime_dagger_column, EfficientAdjuster, ExactAdjuster,
    MAX_EXACT_BITS, MAX_KEY_MATRIX,
};
pub use family::{epsilon_parts, is_jointly_uniform, BaseFamily, TwoQWiseFamily, MAX_KEYS};
pub use field::{is_prime, Field};
