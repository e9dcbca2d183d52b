//! Energy-efficiency maximization for the two-user multi-antenna downlink
//! under rate-splitting (RSMA), space-division (SDMA) and non-orthogonal
//! (NOMA) multiple access.

pub mod cli;
pub mod conic;
pub mod oracle;
pub mod region;
pub mod sca;
pub mod scenario;
pub mod schemes;
