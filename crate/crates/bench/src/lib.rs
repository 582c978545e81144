//! Shared fixtures for the benchmarks under `benches/`.

use fieldclt_core::rng::seeded;
use fieldclt_core::{FieldSpec, GridFunction, InnovationLaw, InnovationSpec, MaKernel};
use rand::Rng;

/// Gaussian innovations through the separable kernel `[1, 0.5] ⊗ [1, 0.5]`.
pub fn ma_spec() -> FieldSpec {
    FieldSpec::new(
        InnovationSpec::standard(InnovationLaw::Gaussian),
        MaKernel::separable(&[1.0, 0.5]).expect("valid kernel"),
    )
}

/// Step function with uniform levels on `[−1, 1]`.
pub fn random_step(n: usize, seed: u64) -> GridFunction {
    let mut rng = seeded(seed);
    let values = ndarray::Array2::from_shape_fn((n + 1, n + 1), |_| rng.random_range(-1.0..1.0));
    GridFunction::from_values(values).expect("finite levels")
}
