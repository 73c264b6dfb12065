//! Field operations checked against the dense block-diagonal operator on the
//! weighted space. Weights commute with block-diagonal matrices, so the
//! operator norm and adjoint are those of the unweighted stack.

mod common;

use common::*;
use dirint::bundle;
use dirint::linalg::{self, CMatrix};
use dirint::{Error, OperatorField};
use num_complex::Complex64;
use rand::Rng;

const CASES: u64 = 100;

fn dense_op_norm(a: &OperatorField) -> f64 {
    linalg::norm2(&a.to_dense())
}

#[test]
fn op_norm_matches_dense() {
    for seed in 0..CASES {
        let mut r = rng(seed);
        let a = field(&mut r, 50, 8);
        let oracle = dense_op_norm(&a);
        assert!(rel(a.op_norm(), oracle) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn apply_matches_dense() {
    for seed in 0..CASES {
        let mut r = rng(1000 + seed);
        let a = field(&mut r, 20, 6);
        let x = section(&mut r, a.fibers());
        let y = a.apply(&x).unwrap().stacked();
        let oracle = a.to_dense() * x.stacked();
        assert!((y - &oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
    }
}

#[test]
fn bundle_norm_matches_weighted_dense() {
    for seed in 0..CASES {
        let mut r = rng(2000 + seed);
        let a = field(&mut r, 30, 5);
        let x = section(&mut r, a.fibers());
        let n = bundle::norm(&x, a.space(), a.fibers()).unwrap();
        assert!(rel(n, dense_norm(&x, a.space())) <= 1e-12);
    }
}

#[test]
fn adjoint_identity() {
    for seed in 0..CASES {
        let mut r = rng(3000 + seed);
        let a = field(&mut r, 50, 8);
        let x = section(&mut r, a.fibers());
        let y = section(&mut r, a.fibers());
        let (s, f) = (a.space(), a.fibers());
        let lhs = bundle::inner(&a.apply(&x).unwrap(), &y, s, f).unwrap();
        let rhs = bundle::inner(&x, &a.adjoint().apply(&y).unwrap(), s, f).unwrap();
        let scale = a.op_norm() * bundle::norm(&x, s, f).unwrap() * bundle::norm(&y, s, f).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * scale, "seed {seed}");
    }
}

#[test]
fn inverse_is_two_sided() {
    let mut checked = 0;
    for seed in 0..CASES {
        let mut r = rng(4000 + seed);
        let a = field(&mut r, 50, 8);
        let cond_ok = a.blocks().iter().all(|b| {
            let s = linalg::singular_values(b).unwrap();
            s[0] / s[s.len() - 1] < 1e6
        });
        if !cond_ok {
            continue;
        }
        checked += 1;
        let inv = a.inverse(f64::INFINITY).unwrap();
        let id = OperatorField::identity(a.space().clone(), a.fibers().clone()).unwrap();
        for prod in [a.compose(&inv).unwrap(), inv.compose(&a).unwrap()] {
            let worst = prod
                .sub(&id)
                .unwrap()
                .block_norms()
                .into_iter()
                .fold(0.0, f64::max);
            assert!(worst <= 1e-9, "seed {seed}: {worst:e}");
        }
    }
    assert!(checked >= 50, "only {checked} well-conditioned cases");
}

#[test]
fn singular_block_is_reported() {
    let mut r = rng(7);
    let mut a = field(&mut r, 5, 3);
    let mut blocks = a.blocks().to_vec();
    blocks[0] = CMatrix::zeros(blocks[0].nrows(), blocks[0].ncols());
    a = OperatorField::from_blocks(a.space().clone(), blocks).unwrap();
    assert!(matches!(a.inverse(1e12), Err(Error::SingularFiber(0))));
}

fn random_lambda(r: &mut impl Rng, a: &OperatorField) -> Option<Complex64> {
    let spec = a.spectrum().unwrap();
    let scale = a.op_norm() + 1.0;
    (0..50).find_map(|_| {
        let z = Complex64::new(r.gen_range(-scale..scale), r.gen_range(-scale..scale));
        (spec.distance(z) > 0.1).then_some(z)
    })
}

#[test]
fn resolvent_identity() {
    for seed in 0..CASES {
        let mut r = rng(5000 + seed);
        let a = field(&mut r, 20, 5);
        let (Some(l), Some(m)) = (random_lambda(&mut r, &a), random_lambda(&mut r, &a)) else {
            panic!("no resolvent points found for seed {seed}");
        };
        let rl = a.resolvent(l, 1e12).unwrap();
        let rm = a.resolvent(m, 1e12).unwrap();
        let lhs = rl.sub(&rm).unwrap();
        let rhs = rl.compose(&rm).unwrap().scale(m - l);
        let resid = lhs.sub(&rhs).unwrap().op_norm();
        let scale = lhs.op_norm().max(rhs.op_norm()).max(f64::MIN_POSITIVE);
        assert!(resid <= 1e-9 * scale, "seed {seed}: {:e}", resid / scale);
    }
}

#[test]
fn resolvent_commutes_with_generator() {
    for seed in 0..20 {
        let mut r = rng(6000 + seed);
        let a = field(&mut r, 10, 4);
        let l = random_lambda(&mut r, &a).unwrap();
        let rl = a.resolvent(l, 1e12).unwrap();
        let d = a.compose(&rl).unwrap().sub(&rl.compose(&a).unwrap()).unwrap();
        assert!(d.op_norm() <= 1e-10 * a.op_norm() * rl.op_norm());
    }
}

#[test]
fn spectrum_is_union_of_fiber_spectra() {
    for seed in 0..20 {
        let mut r = rng(7000 + seed);
        let a = field(&mut r, 10, 4);
        let spec = a.spectrum().unwrap();
        let dense = linalg::eigenvalues(&a.to_dense()).unwrap();
        for z in dense {
            assert!(spec.distance(z) <= 1e-8 * (1.0 + a.op_norm()), "seed {seed}");
        }
        let total: usize = a.fibers().dims().iter().sum();
        assert_eq!(spec.points.len(), total);
    }
}

#[test]
fn resolvent_norm_matches_dense_inverse() {
    for seed in 0..20 {
        let mut r = rng(8000 + seed);
        let a = field(&mut r, 10, 4);
        let l = random_lambda(&mut r, &a).unwrap();
        let dense = linalg::inverse(&linalg::shifted(&a.to_dense(), l)).unwrap();
        assert!(rel(a.resolvent_norm(l), linalg::norm2(&dense)) <= 1e-9);
    }
}

#[test]
fn restriction_and_embedding() {
    for seed in 0..20 {
        let mut r = rng(9000 + seed);
        let a = field(&mut r, 12, 3);
        let sub = subset(&mut r, a.space());
        let x = section(&mut r, a.fibers());
        let ra = a.restrict(&sub).unwrap();
        let rx = x.restrict(a.space(), &sub).unwrap();
        let lhs = ra.apply(&rx).unwrap();
        let rhs = a.apply(&x).unwrap().restrict(a.space(), &sub).unwrap();
        assert!(lhs.sub(&rhs).is_zero());
        let back = bundle::embed_section(&rx, ra.space(), a.space(), a.fibers()).unwrap();
        let n_sub = bundle::norm(&rx, ra.space(), ra.fibers()).unwrap();
        let n_back = bundle::norm(&back, a.space(), a.fibers()).unwrap();
        assert!(rel(n_back, n_sub) <= 1e-14 || n_sub == 0.0);
    }
}
