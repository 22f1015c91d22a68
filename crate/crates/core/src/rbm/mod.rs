//! Three-layer RBM (visible, hidden, class) with class-balanced CD-k training.

mod balance;
mod params;
mod train;

pub use balance::{class_balance_weight, ClassBalanceState};
pub use params::{sigmoid, softmax_in_place, RbmParameters, INIT_STD};
pub use train::{
    apply_update, batch_gradient, gibbs_chain, gibbs_chain_with, init_parameters, train_batch,
    GradientEstimate, NegativePhase, PhaseStats, RbmHyperparams,
};
