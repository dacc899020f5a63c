//! Multi-hop cognitive cellular network model with spectrum-aware route
//! discovery and iterative spectrum auctions.

pub mod auction;
pub mod bidding;
pub mod capacity;
pub mod channel;
pub mod experiments;
pub mod hexgrid;
pub mod learning;
pub mod linalg;
pub mod routing;
