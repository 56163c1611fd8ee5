//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod acm_oracle;
pub mod fk_oracle;
pub mod strategies;
