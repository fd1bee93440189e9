//! Non-rigid registration (Coherent Point Drift) and rigid alignment (Kabsch, ICP).

mod cpd;
mod icp;
mod kabsch;

pub use cpd::{cpd_nonrigid, CpdConfig, CpdResult, DisplacementField};
pub use icp::{icp, IcpConfig, IcpResult};
pub use kabsch::kabsch;
