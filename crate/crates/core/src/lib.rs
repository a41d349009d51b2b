//! Hidden convex-concave games.
//!
//! A min player with parameters `θ` and a max player with parameters `φ` play
//! `L(F(θ), G(φ))`, where `L` is convex-concave in the operator outputs but the
//! game is non-convex in the parameters. This crate provides the operators and
//! payoffs, the continuous-time learning flows, the Lyapunov certificate built
//! from gradient-ascent paths, and closed-form and numerical equilibria for
//! GAN-style games on finite supports.

pub mod divergences;
pub mod dynamics;
pub mod gan_solutions;
pub mod lyapunov;
pub mod operators;
pub mod payoffs;
pub mod transport;

pub use dynamics::{
    gda_flow, hgd_mod_flow, sgda_discrete, transformed_flow, Diagnostics, FlowError, FlowFailure, FlowOptions, HccGame,
    SgdaOptions, StochasticGradSource, Trajectory, WganSampler,
};
pub use lyapunov::{
    audit_monotone_h, detect_convergence, distance_r, fit_rate, solve_regularized_equilibrium, AuditOptions, AuditReport,
    ConvergenceOptions, ConvergenceVerdict, LyapunovContext, LyapunovError, RateFit,
};
pub use operators::{
    build_ascent_path, grad_norm_sq_at_output, inverse_map, is_safe, AscentPath, Endpoint, OperatorBank, OperatorError,
    OperatorKind, PathSettings, Range, SafetyReport, SafetyVerdict, ScalarOperator,
};
pub use payoffs::{Convexity, Payoff, PayoffError, PayoffRef};
