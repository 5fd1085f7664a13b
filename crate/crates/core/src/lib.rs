//! Pure analysis core for turning incomplete Rust CVE snippets into symbolic
//! execution artifacts and interpreting the results.
//!
//! Nothing in this crate touches the filesystem or spawns processes; the
//! `snipsym` crate wires these pieces to files, toolchains and executors.

#![no_std]

extern crate alloc;

pub mod agent;
pub mod errfile;
pub mod graph;
pub mod harness;
pub mod klee;
mod lex;
pub mod report;
pub mod snippet;
pub mod wrapper;

pub use agent::{AgentBackend, AnalysisPlan, RiskAssessment, Role, RuleBackend};
pub use errfile::{parse_error_file, summarize_criticality, CriticalitySummary, KleeErrorRecord};
pub use harness::{generate_harness, HarnessSource, HarnessSpec};
pub use klee::{select_flags, ErrorKind, KleeParams, OutputDirListing, SearchStrategy};
pub use snippet::{profile_missing_context, CveId, CveSnippet, Identity, MissingContextProfile};
pub use wrapper::{validate_wrapper, CompileOutcome, FfiSignature, ParamKind, TemplateLibrary, WrapperArtifact};
