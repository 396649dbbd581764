//! Shadow-evaporation modelling for Dolan-bridge Josephson junctions.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] evaluates the printed electrode widths at a single site.
//! * [`wafer`] sweeps a wafer, compares bias models and solves for per-site
//!   drawn-width corrections.
//! * [`stats`] and [`electrical`] turn area and resistance maps into CVs,
//!   qubit frequencies and critical-current densities.
//! * [`config`], [`io`] and [`heatmap`] handle the file formats used by the
//!   `jjshadow` command-line tool.
//!
//! The guide in `book/` walks through each model; its code blocks are
//! compiled as doctests of this crate.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod electrical;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod reference;
pub mod stats;
pub mod wafer;

pub use geometry::{
    EvaporationStep, JunctionSpec, MaskStack, ShadowAxis, SourceKind, SourceModel, TiltSign, WaferSite,
};
pub use wafer::{BiasModelKind, ProcessConfig, SiteResult};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/wafer.md")]
    mod wafer {}
    #[doc = include_str!("../../../book/src/compensation.md")]
    mod compensation {}
    #[doc = include_str!("../../../book/src/electrical.md")]
    mod electrical {}
    #[doc = include_str!("../../../book/src/files.md")]
    mod files {}
}
