//! Semidefinite relaxation for recovering a hidden community.

pub mod info;
pub mod io;
pub mod lab;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sdp;
pub mod certify;
