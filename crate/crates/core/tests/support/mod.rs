#![allow(dead_code)]

pub mod naive;
pub mod random;
pub mod spj;
