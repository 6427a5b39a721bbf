//! Positive-weight kernel quadrature on a fixed evaluated pool.
//!
//! Given i.i.d. pool points `x_1..x_N` drawn from a target measure, the
//! library builds quadrature rules `Q(f) = sum_i w_i f(x_i)` whose weights
//! lie on the probability simplex, and measures them by the exact RKHS
//! worst-case error
//!
//! ```text
//! wce(w)^2 = ||m_mu||^2 - 2 z^T w + w^T K w
//! ```
//!
//! where `K` is the pool Gram matrix and `z_i = m_mu(x_i)` the kernel mean.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Periodic Sobolev and RBF kernels, Gram matrices, spectra |
//! | [`target`] | Target measures with exact kernel means, pool sampling |
//! | [`qp`] | Simplex-constrained QP solver and convex-hull distance |
//! | [`quadrature`] | Frank-Wolfe, CQP optimum, Monte Carlo and herding rules |
//! | [`theory`] | Monte-Carlo checks of the random convex-hull results |
//! | [`bench`] | Seeded benchmark driver, CSV records and summaries |
//!
//! ```
//! use poskq::kernel::KernelSpec;
//! use poskq::quadrature::{cqp_quadrature, monte_carlo_weights, wce};
//! use poskq::target::{build_oracle, TargetSpec};
//! use rand::SeedableRng;
//!
//! let kernel = KernelSpec::periodic_sobolev(1, 1).unwrap();
//! let spec = TargetSpec::uniform_torus(kernel.clone()).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let oracle = build_oracle(&spec, &mut rng).unwrap();
//! let pool = oracle.sample_pool(32, &mut rng);
//! let problem = oracle.build_pool_problem(&pool);
//!
//! let mc = wce(&problem, &monte_carlo_weights(32)).unwrap();
//! let cqp = wce(&problem, &cqp_quadrature(&problem).unwrap()).unwrap();
//! assert!(cqp <= mc + 1e-8);
//! ```

pub mod bench;
pub mod error;
pub mod kernel;
pub mod matrix;
pub mod numeric;
pub mod points;
pub mod qp;
pub mod quadrature;
pub mod target;
pub mod theory;

pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec, SpectralProfile};
pub use matrix::SquareMatrix;
pub use points::PointSet;
pub use qp::{best_effort, hull_distance, solve_simplex_qp, QpSolution, QpStatus, SimplexQp};
pub use quadrature::{
    cqp_quadrature, fw_quadrature, herding_quadrature, monte_carlo_weights, wce, CandidateMode,
    Method, PoolProblem, QuadratureRule, SimplexWeights, StepRule,
};
pub use target::{build_oracle, TargetKind, TargetOracle, TargetSpec};
