//! Shared fixtures for the benchmark suite: small pre-built networks and
//! datasets so the benches measure the hot paths, not setup.

use hcm_core::data::{gen_blobs, gen_cubic, BlobParams, LabeledSet};
use hcm_core::nn::{head_specs, Activation, NetworkParams};

/// A trained-shape (but untrained) head for 8-dimensional blob inputs.
pub fn blob_head() -> NetworkParams {
    let specs = head_specs(8, &[32, 32], Activation::Relu, 5).unwrap();
    NetworkParams::init(&specs, 7).unwrap()
}

/// A head for scalar (duplicated) cubic targets.
pub fn cubic_head() -> NetworkParams {
    let specs = head_specs(1, &[16, 16], Activation::Relu, 3).unwrap();
    NetworkParams::init(&specs, 7).unwrap()
}

pub fn blob_set(n: usize) -> LabeledSet {
    gen_blobs(n, 8, &BlobParams::default(), 3).unwrap()
}

pub fn cubic_set(n: usize) -> LabeledSet {
    gen_cubic(n, 3).unwrap().embed_scalar_targets().unwrap()
}
