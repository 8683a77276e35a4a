//! Stochastic values `v_n(t0, x0)` under the scaled Wiener measure: sampling,
//! exact backward induction on non-recombining trees, the exponential-transform
//! oracle for quadratic running costs, and the rescaling check on `[0, 1]`.

mod brownian;
mod oracle;
mod rescaling;
mod tree;

pub use brownian::simulate_scaled_brownian;
pub use oracle::{estimate_vn_quadratic_oracle, OracleOptions};
pub use rescaling::{check_rescaling_identity, RescalingReport};
pub use tree::{solve_soc_tree, ControlGrid, LatticeSpec, SocResult};
