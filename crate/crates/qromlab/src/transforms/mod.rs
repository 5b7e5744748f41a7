//! Measure-and-reprogram wrappers, the one-way-to-hiding coin-flip
//! wrapper, and simulator truncation.

pub mod mar;
pub mod o2h;
pub mod schedule;
pub mod truncate;

pub use mar::{
    bottom_probability, check_mar_general, check_mar_ordered, mar_general, mar_ordered, measured_point, ordered_points,
    MarCheck, MarInterceptor, MarOutcome, ValueFn, FLOAT_SLACK,
};
pub use o2h::{indicator, o2h_corollary_c, small_subsets, O2hCheck};
pub use schedule::{mar_factor, schedule_count, MarSchedule, Pick};
pub use truncate::{expected_calls, halting_probability, markov_budget, truncate};
