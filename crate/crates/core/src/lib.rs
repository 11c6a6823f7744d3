#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod existence;
pub mod grid;
pub mod operator;

pub use error::{Error, Result};
pub mod effective;
pub mod dynamics;
pub mod realisation;
pub mod registry;
pub mod action;
pub mod profiles;
pub mod universal;
