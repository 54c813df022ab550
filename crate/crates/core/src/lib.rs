//! Error-free training of small feedforward classifiers.
//!
//! Conventional SGD pre-training leaves some samples misclassified. Each of
//! them is paired with a correctly classified sample of the same label; the
//! resulting partner dataset is classified perfectly by the pre-trained
//! parameters. A one-parameter homotopy then morphs the partner inputs back
//! into the true inputs, and gradient-descent tunneling tracks a perfectly
//! classifying parameter point along it, halving the homotopy step whenever
//! a step loses a sample and growing it after runs of successes.

pub mod analysis;
pub mod data;
pub mod gdt;
pub mod network;
pub mod sgd;
