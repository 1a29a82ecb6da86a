//! Reference implementations shared by the oracle tests and the
//! acceptance run. Each test binary uses a different subset.
#![allow(dead_code)]

pub mod assignment;
pub mod graphs;
pub mod lti;
pub mod qp;
