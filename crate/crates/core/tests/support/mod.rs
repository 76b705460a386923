#![allow(dead_code)]

pub mod subsume_oracle;
pub mod valuation_fixture;
pub mod valuation_oracle;
pub mod workload;
