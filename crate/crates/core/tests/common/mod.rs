#![allow(dead_code)]

pub mod checks;
pub mod dp;
pub mod models;
pub mod runs;
