//! Fixtures shared by the benchmarks.

use osfs_core::synth::generate;
use osfs_core::trace::{preprocess, DEFAULT_VARIANCE_THRESHOLD};
use osfs_core::{DesignMatrix, SynthSpec};

/// Preprocessed synthetic trace with `n` features and `m` samples.
pub fn trace(n: usize, m: usize) -> DesignMatrix {
    let spec = SynthSpec {
        n_features: n,
        m_samples: m,
        n_informative: 5.min(n),
        n_redundant: 10.min(n.saturating_sub(5)),
        ..SynthSpec::default()
    };
    let raw = generate(&spec).expect("valid spec");
    preprocess(&raw, DEFAULT_VARIANCE_THRESHOLD).expect("non-empty trace").0
}

/// The first `m` rows of `matrix`, without targets.
pub fn window(matrix: &DesignMatrix, m: usize) -> DesignMatrix {
    matrix.rows(0, m).expect("window fits").without_targets()
}
