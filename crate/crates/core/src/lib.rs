// SPDX-License-Identifier: Apache-2.0

pub mod diffcore;
pub mod evalx;
pub mod graphio;
pub mod models;
pub mod synthgen;
pub mod training;
pub mod verilog;
