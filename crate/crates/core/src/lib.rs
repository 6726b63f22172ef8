#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod benefit;
pub mod corpus;
pub mod design;
pub mod error;
pub mod extended;
pub mod game;
pub mod grid;
pub mod harness;
pub mod lp;
pub mod par;
pub mod scalar;

pub use benefit::{BenefitFamily, BenefitFunction, BenefitProfile};
pub use error::{Error, Result};
pub use extended::Extended;
pub use game::{DesignPoint, EquilibriumResult, LotteryInstance, Sensitivities};
