#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use dirint::linalg::{self, CMatrix, CVector};
use dirint::{AtomId, FiberSpec, MeasureSpace, OperatorField, Section};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn matrix(rng: &mut impl Rng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| complex(rng))
}

pub fn space(rng: &mut impl Rng, n: usize) -> Arc<MeasureSpace> {
    let atoms: Vec<(f64, f64)> = (0..n)
        .map(|k| (k as f64, rng.gen_range(0.1..3.0)))
        .collect();
    Arc::new(MeasureSpace::new(&atoms).unwrap())
}

/// Random field with up to `max_atoms` atoms and fiber dims up to `max_dim`.
pub fn field(rng: &mut impl Rng, max_atoms: usize, max_dim: usize) -> OperatorField {
    let n = rng.gen_range(1..=max_atoms);
    let dims: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_dim)).collect();
    let sp = space(rng, n);
    field_with(rng, sp, &dims)
}

pub fn field_with(rng: &mut impl Rng, space: Arc<MeasureSpace>, dims: &[usize]) -> OperatorField {
    let blocks = dims.iter().map(|&d| matrix(rng, d)).collect();
    OperatorField::from_blocks(space, blocks).unwrap()
}

/// Field whose every block has spectral abscissa at most `omega`.
pub fn stable_field(rng: &mut impl Rng, max_atoms: usize, max_dim: usize, omega: f64) -> OperatorField {
    let a = field(rng, max_atoms, max_dim);
    a.map_blocks(|b| {
        let s = linalg::spectral_abscissa(b).unwrap();
        -linalg::shifted(b, Complex64::new(s - omega, 0.0))
    })
}

pub fn section(rng: &mut impl Rng, fibers: &FiberSpec) -> Section {
    Section::new(
        fibers
            .dims()
            .iter()
            .map(|&d| CVector::from_fn(d, |_, _| complex(rng)))
            .collect(),
    )
}

pub fn subset(rng: &mut impl Rng, space: &MeasureSpace) -> BTreeSet<AtomId> {
    let mut ids = space.ids();
    ids.shuffle(rng);
    let k = rng.gen_range(1..=ids.len());
    ids.into_iter().take(k).collect()
}

/// `‖x‖` in the weighted block space, computed from a dense stacked vector.
pub fn dense_norm(x: &Section, space: &MeasureSpace) -> f64 {
    let w = weight_matrix(space, x.blocks().iter().map(|b| b.len()));
    let s = x.stacked();
    (s.adjoint() * &w * &s)[(0, 0)].re.sqrt()
}

pub fn weight_matrix(space: &MeasureSpace, dims: impl Iterator<Item = usize>) -> CMatrix {
    let diag: Vec<Complex64> = space
        .atoms()
        .iter()
        .zip(dims)
        .flat_map(|(a, d)| std::iter::repeat_n(Complex64::new(a.weight, 0.0), d))
        .collect();
    CMatrix::from_diagonal(&CVector::from_vec(diag))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn assert_fields_close(a: &OperatorField, b: &OperatorField, tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.blocks().iter().zip(b.blocks()) {
        let scale = linalg::frobenius(y).max(1.0);
        let d = linalg::frobenius(&(x - y));
        assert!(d <= tol * scale, "blocks differ by {d:e} (scale {scale:e})");
    }
}
