//! Budget-limited document adjudication over TREC runs, with
//! significance-preservation analysis.
//!
//! The library covers the full loop of a pooling experiment:
//!
//! * [`trec`] reads and writes run files and relevance judgments.
//! * [`measures`] computes average precision and NDCG per system and topic.
//! * [`pool`] builds depth-limited judgment pools from a set of runs.
//! * [`adjudicate`] spends a judgment budget on a pool, one document at a
//!   time, using one of several prioritization methods.
//! * [`significance`] runs a randomized Tukey HSD over a topic-by-system
//!   score matrix and extracts significantly different system pairs.
//! * [`agreement`] compares the significance structure under reduced
//!   judgments against the one under full judgments.
//! * [`harness`] wires the above into a configurable experiment that sweeps
//!   methods and budgets and writes comparison reports.
//!
//! All randomized components take explicit seeds and produce identical
//! output for identical inputs, regardless of thread count.

pub mod adjudicate;
pub mod agreement;
pub mod error;
pub mod harness;
pub mod measures;
pub mod pool;
pub mod significance;
pub mod trec;
pub mod util;

pub use error::{Error, Result};

/// Compiles and runs every code block in the guide, keeping the book in
/// lockstep with the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        };
    }

    chapter!(introduction, "introduction.md");
    chapter!(data_formats, "data-formats.md");
    chapter!(measures, "measures.md");
    chapter!(pooling_and_adjudication, "pooling-and-adjudication.md");
    chapter!(significance, "significance.md");
    chapter!(agreement, "agreement.md");
    chapter!(experiments, "experiments.md");
}
