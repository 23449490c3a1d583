//! Pricing for target profits under individual-rationality and
//! incentive-compatibility constraints.
//!
//! Two constructions are provided:
//!
//! - [`menu::solve_menu`]: given budgets `P_i(s)` for `L` user types, cost
//!   `C(s)` and target profit `B(s)`, choose qualities and prices so that
//!   every type can afford its own offer, prefers it to all others, and the
//!   provider clears `B`.
//! - [`profile::build_profile`]: given a fixed quality ladder and a
//!   willingness-to-pay `F(θ, s)`, place nominal demands and prices so that
//!   every user within `m_k` of nominal demand `θ_k` self-selects quality
//!   `k` while the provider clears `b_k`.
//!
//! Both constructions certify their output with [`verify`] before
//! returning. [`market`] adds a seeded Monte Carlo check and [`tradeoff`]
//! maps which `(b, m)` margins are reachable.

// `!(a < b)` is used on purpose so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod function;
pub mod market;
pub mod menu;
pub mod numeric;
pub mod profile;
pub mod regularity;
pub mod tradeoff;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
pub use function::{DomainBox, Interval, ScalarFunction, Table, TariffFunction};
pub use menu::{MenuScenario, QualityPriceMenu};
pub use profile::{DemandPriceProfile, MarginSpec, ProfileScenario};
