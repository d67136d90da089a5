//! Paired simulation of the original and transformed equations on shared
//! Brownian increments, flow Jacobians of the transformed equation (by the
//! variational equation and, for `d = k = 1`, in closed form), Malliavin
//! derivatives by the chain rule, and the nondegeneracy criterion
//! `‖DF‖_{L²} > 0`.

mod brownian;
mod ensemble;
mod euler;
mod functional;
mod jacobian;
mod malliavin;

pub use brownian::{path_rng, BrownianGrid};
pub use ensemble::{
    moments, simulate_equivalent_pair, ComponentSummary, EnsembleSummary, Family, Moments, PairedPaths, PairedRecord,
    PathEnsemble, Storage, MAX_ESCAPE_FRACTION,
};
pub use euler::{euler_maruyama, euler_terminal, Coefficients, Restricted, SamplePath};
pub use functional::{FunctionalG, FunctionalSpec};
pub use jacobian::{
    coefficient_jacobian_path, invert_jacobians, jacobian_closed_form, jacobian_closed_form_from, jacobian_variational,
    jacobian_variational_from, JacobianPath, PathCoefficients,
};
pub use malliavin::{
    dg_derivative, flow_derivatives, malliavin_derivative_x, malliavin_derivative_y, malliavin_fd_check,
    nondegeneracy_scan, terminal_malliavin_x, DgResult, FdCheck, FdRoute, FlowDerivatives, MalliavinGrid,
    NondegeneracySummary,
};

/// Number of Euler steps covering `[0, horizon]` with nominal step `dt`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt).round().max(1.0) as usize
}

/// Trapezoid weights for `n + 1` equally spaced nodes at spacing `dt`.
pub fn trapezoid_weights<T: crate::Real>(n_nodes: usize, dt: T) -> Vec<T> {
    let mut w = vec![dt; n_nodes];
    if n_nodes >= 2 {
        w[0] = dt * T::lit(0.5);
        w[n_nodes - 1] = dt * T::lit(0.5);
    } else if n_nodes == 1 {
        w[0] = T::zero();
    }
    w
}
