//! Mixed finite elements for cavity growth in incompressible nonlinear elasticity.
//!
//! This crate holds everything that needs no operating system: the stored-energy
//! model, shape functions and quadrature, defect-adapted mesh generation, DOF
//! numbering and the element kernels. Global assembly, linear algebra, solvers and
//! file formats live in the `cavmix` crate.

#![no_std]

extern crate alloc;

pub mod dof;
pub mod element;
pub mod error;
pub mod geometry;
pub mod material;
pub mod mesh;
pub mod quadrature;
pub mod shape;
pub mod tensor;

pub use dof::{build_dof_map, BoundaryCondition, DofMap, State};
pub use error::{CoreError, CoreResult};
pub use material::{MaterialParams, Volumetric};
pub use mesh::{generate_mesh, DefectSpec, ElementKind, Mesh, MeshParams};
pub use tensor::{Point, Tensor2};
