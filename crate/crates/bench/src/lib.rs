//! Fixed inputs shared by the benchmarks.

use dirac_bvp::harness::{generate_path, generate_structure, random_projection};
use dirac_bvp::invariants::MatrixPath;
use dirac_bvp::{DiracStructure, OrthoProjection};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn structure(dim: usize) -> DiracStructure {
    generate_structure(17, dim / 2, dim - dim / 2, 1.min(dim / 2), false).expect("generator")
}

pub fn graded_structure(half: usize) -> DiracStructure {
    generate_structure(19, half, half, 0, true).expect("generator")
}

pub fn path_with_conditions(dim: usize) -> (MatrixPath, OrthoProjection, OrthoProjection) {
    let path = generate_path(23, dim, 3, None).expect("generator");
    let mut rng = ChaCha20Rng::seed_from_u64(29);
    let p = random_projection(&mut rng, dim, dim / 2);
    let q = random_projection(&mut rng, dim, dim - dim / 2);
    (path, p, q)
}
