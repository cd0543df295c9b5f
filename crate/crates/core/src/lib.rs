//! Co-located body area network simulator: TDMA duty cycling, SINR
//! interference, shortest-path and cooperative multi-path routing, and
//! distribution fitting of the resulting SINR.

pub mod channel;
pub mod cli;
pub mod distfit;
pub mod mac;
pub mod metrics;
pub mod routing;
pub mod run;
pub mod scenario;
pub mod sinr;
pub mod window;
