//! Test support shared by the workspace: straight-line reference
//! implementations that deliberately avoid the library's code paths, and
//! seeded random fixtures.

pub mod fixtures;
pub mod reference;
