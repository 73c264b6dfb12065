//! Dense complex kernels used by every fiber computation.
//!
//! Fibers are small (a handful of dimensions), so everything here works on
//! `DMatrix<Complex64>` and special-cases the scalar fiber, which is by far
//! the most common shape in the parameterized families.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Arguments with 1-norm above this are split into sub-steps before
/// scaling and squaring.
pub const SPLIT_THRESHOLD: f64 = 100.0;

const SVD_MAX_ITER: usize = 10_000;

/// Singular values in descending order, or `None` if the iteration stalls.
pub fn singular_values(a: &CMatrix) -> Option<Vec<f64>> {
    if a.nrows() == 0 {
        return Some(Vec::new());
    }
    if a.nrows() == 1 && a.ncols() == 1 {
        return Some(vec![a[(0, 0)].norm()]);
    }
    let svd = SVD::try_new(a.clone(), false, false, f64::EPSILON, SVD_MAX_ITER)?;
    Some(svd.singular_values.iter().copied().collect())
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &CMatrix) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].norm();
    }
    singular_values(a)
        .and_then(|s| s.first().copied())
        .unwrap_or(f64::NAN)
}

/// Smallest singular value.
pub fn sigma_min(a: &CMatrix) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].norm();
    }
    singular_values(a)
        .and_then(|s| s.last().copied())
        .unwrap_or(f64::NAN)
}

pub fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    if n == 1 {
        return Some(vec![a[(0, 0)]]);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(1))?;
    let (_, t) = schur.unpack();
    Some(t.diagonal().iter().copied().collect())
}

pub fn spectral_abscissa(a: &CMatrix) -> Option<f64> {
    eigenvalues(a).map(|ev| ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `λ I - A`.
pub fn shifted(a: &CMatrix, lambda: Complex64) -> CMatrix {
    let mut m = -a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    m
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    if a.nrows() == 1 {
        let z = a[(0, 0)];
        return if z == ZERO {
            None
        } else {
            Some(CMatrix::from_element(1, 1, ONE / z))
        };
    }
    a.clone().lu().try_inverse()
}

pub fn conj_transpose(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Padé coefficients for the degrees used in scaling and squaring.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm thresholds below which the degree-m approximant is accurate to unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn scale(a: &CMatrix, c: f64) -> CMatrix {
    a * Complex64::new(c, 0.0)
}

fn pade_low(a: &CMatrix, b: &[f64]) -> Option<CMatrix> {
    let n = a.nrows();
    let ident = identity(n);
    let a2 = a * a;
    // Even powers of A: I, A², A⁴, ...
    let mut pow = ident.clone();
    let mut u_inner = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for k in 0..b.len() / 2 {
        v += scale(&pow, b[2 * k]);
        u_inner += scale(&pow, b[2 * k + 1]);
        pow = &pow * &a2;
    }
    let u = a * u_inner;
    pade_solve(&u, &v)
}

fn pade13(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    let b = &PADE13;
    let ident = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u_inner =
        &a6 * u_hi + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&ident, b[1]);
    let u = a * u_inner;
    let v_hi = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v = &a6 * v_hi + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&ident, b[0]);
    pade_solve(&u, &v)
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> Option<CMatrix> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p)
}

fn expm_scaled(a: &CMatrix) -> Option<CMatrix> {
    let norm = norm1(a);
    if !norm.is_finite() {
        return None;
    }
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, b);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = scale(a, 2f64.powi(-s));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Some(r)
}

fn matrix_power(base: &CMatrix, mut k: u64) -> CMatrix {
    let mut result = identity(base.nrows());
    let mut b = base.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &b;
        }
        k >>= 1;
        if k > 0 {
            b = &b * &b;
        }
    }
    result
}

/// `e^{tA}` by scaling and squaring with Padé approximants.
///
/// `t = 0` returns the identity exactly. Arguments with `‖tA‖₁ > 100` are
/// split into `k` equal sub-steps of norm at most one and the step
/// propagator is raised to the `k`-th power.
pub fn expm(a: &CMatrix, t: f64) -> Option<CMatrix> {
    let n = a.nrows();
    if t == 0.0 {
        return Some(identity(n));
    }
    if n == 1 {
        let z = (a[(0, 0)] * t).exp();
        return z.is_finite().then(|| CMatrix::from_element(1, 1, z));
    }
    let ta = scale(a, t);
    let norm = norm1(&ta);
    if !norm.is_finite() {
        return None;
    }
    let out = if norm > SPLIT_THRESHOLD {
        let steps = norm.ceil();
        if steps > u64::MAX as f64 {
            return None;
        }
        let step = expm_scaled(&scale(&ta, 1.0 / steps))?;
        matrix_power(&step, steps as u64)
    } else {
        expm_scaled(&ta)?
    };
    out.iter().all(|z| z.is_finite()).then_some(out)
}

/// Neumaier-compensated accumulator; terms are added in call order.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}
