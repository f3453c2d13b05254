//! Binomial-thinning linear forms for non-negative integer distributions.
//!
//! Splitting a count `X` by complementary binomial thinning and routing an
//! independent copy `Y` through a Bernoulli switch produces a pair of forms
//! whose independence holds exactly when `X` is geometric; splitting both
//! `X` and `Y` produces a pair whose independence characterizes the Poisson
//! law. This crate makes those two facts computable:
//!
//! * [`pmf`] — truncated integer laws with explicit tail deficit, generating
//!   function evaluation and seeded sampling;
//! * [`forms`] — the form samplers and the closed-form joint generating
//!   functions of both pairs;
//! * [`exact`] — exact joint laws by enumeration, marginals and the total
//!   variation gap to the product of marginals (zero iff independent);
//! * [`series`] — the coefficient recursions showing that, given the
//!   normalization constraint, only the geometric (resp. Poisson) family
//!   solves the factorization identity;
//! * [`gof`] — randomized goodness-of-fit tests for geometricity and
//!   Poissonity built on the characterizations, with chi-square and
//!   permutation backends and a reproducible power-study harness;
//! * [`cli`] — the `thinforms` command-line tool exposing all of the above.
//!
//! Every randomized routine takes an explicit [`RngStream`]; equal
//! `(seed, stream)` identifiers reproduce results bit for bit, including
//! across parallel power studies.
//!
//! ```
//! use thinforms::{Pmf, RngStream, ThinningParams};
//!
//! let pmf = Pmf::geometric(2.0, 40).unwrap();
//! let params = ThinningParams::symmetric(0.5).unwrap();
//!
//! // the joint law of the thinned forms factorizes for a geometric base law
//! let joint = thinforms::exact_joint_t1(&pmf, &params).unwrap();
//! assert!(joint.tv_independence_gap() < 1e-8);
//!
//! // pathwise conservation: the forms always add back to x + y
//! let mut rng = RngStream::new(7, 0);
//! let s = thinforms::sample_t1_forms(&pmf, &params, &mut rng).unwrap();
//! assert_eq!(s.l1 + s.l2, s.x + s.y);
//! ```


pub mod cli;
pub mod error;
pub mod exact;
pub mod forms;
pub mod gof;
pub mod pmf;
pub mod rng;
pub mod series;
pub mod special;

pub use error::{Error, Result};
pub use exact::{exact_joint_t1, exact_joint_t2, JointMeta, JointPmf, MAX_JOINT_CELLS};
pub use forms::{
    complementary_thin, complementary_thin_with, joint_pgf_t1, joint_pgf_t2, sample_t1_forms,
    sample_t2_forms, thin_t1_pair, thin_t2_pair, FormSample, Theorem, ThinMethod, ThinningParams,
};
pub use gof::{
    build_table, chi2_independence, gof_test, gof_test_t1, gof_test_t2,
    permutation_independence, power_study, ContingencyTable, GofOptions, PoolingRule, PowerPoint,
    ReplicatePolicy, TestMethod, TestReport,
};
pub use pmf::Pmf;
pub use rng::RngStream;
pub use series::{
    series_affine_compose, series_mul, t1_next_coeff, t1_normalize, t1_solve, t2_next_coeff,
    t2_normalize, t2_solve, PowerSeries, RecursionReport,
};
