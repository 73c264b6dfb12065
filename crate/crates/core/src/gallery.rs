//! Built-in parameterized generator families.
//!
//! A family maps an atom label to a block; truncating it to `N` atoms builds
//! the measure space from its recipe (counting measure on `1..=N`, or the
//! midpoint partition of `(0, 1)`) and evaluates the builder at each label.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decomp_op::OperatorField;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::measure_space::MeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceRecipe {
    /// Labels `1..=N`, unit weights.
    Counting,
    /// Midpoints of `N` equal cells of `(0, 1)`, weights `1/N`.
    UniformPartition,
}

impl SpaceRecipe {
    pub fn build(self, n: usize) -> Result<MeasureSpace> {
        match self {
            SpaceRecipe::Counting => MeasureSpace::counting(n),
            SpaceRecipe::UniformPartition => MeasureSpace::uniform_partition(n),
        }
    }
}

type Builder = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

#[derive(Clone)]
pub struct GeneratorFamily {
    name: String,
    params: BTreeMap<String, f64>,
    recipe: SpaceRecipe,
    builder: Builder,
}

impl fmt::Debug for GeneratorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorFamily")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("recipe", &self.recipe)
            .finish_non_exhaustive()
    }
}

impl GeneratorFamily {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        recipe: SpaceRecipe,
        builder: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            params,
            recipe,
            builder: Arc::new(builder),
        }
    }

    /// Scalar family `label ↦ f(label)`.
    pub fn scalar(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        recipe: SpaceRecipe,
        f: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, params, recipe, move |s| CMatrix::from_element(1, 1, f(s)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn recipe(&self) -> SpaceRecipe {
        self.recipe
    }

    pub fn block(&self, label: f64) -> CMatrix {
        (self.builder)(label)
    }

    /// Block of atom `n` under counting measure (label `n`).
    pub fn block_at_index(&self, n: usize) -> CMatrix {
        self.block(n as f64)
    }

    pub fn truncate(&self, n: usize) -> Result<OperatorField> {
        if n == 0 {
            return Err(Error::InvalidParameter("truncation must have at least one atom".into()));
        }
        let space = self.recipe.build(n)?;
        let blocks = space
            .atoms()
            .iter()
            .map(|a| self.block(a.label.unwrap_or(a.id as f64)))
            .collect();
        OperatorField::from_blocks(Arc::new(space), blocks)
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 1-dimensional fibers with block `f(s_k)`.
pub fn multiplication_field(f: impl Fn(f64) -> Complex64, space: Arc<MeasureSpace>) -> Result<OperatorField> {
    let values: Vec<_> = space
        .atoms()
        .iter()
        .map(|a| f(a.label.unwrap_or(a.id as f64)))
        .collect();
    OperatorField::scalar(space, &values)
}

/// `A_n = −1/n` on counting measure.
pub fn example_7_2() -> GeneratorFamily {
    GeneratorFamily::scalar("example_7_2", BTreeMap::new(), SpaceRecipe::Counting, |n| c(-1.0 / n, 0.0))
}

/// `A_n = 1/n`.
pub fn harmonic() -> GeneratorFamily {
    GeneratorFamily::scalar("harmonic", BTreeMap::new(), SpaceRecipe::Counting, |n| c(1.0 / n, 0.0))
}

/// `A_n = n`; the direct sum is not a generator.
pub fn growth() -> GeneratorFamily {
    GeneratorFamily::scalar("growth", BTreeMap::new(), SpaceRecipe::Counting, |n| c(n, 0.0))
}

/// `A_n = i n`.
pub fn rotation() -> GeneratorFamily {
    GeneratorFamily::scalar("rotation", BTreeMap::new(), SpaceRecipe::Counting, |n| c(0.0, n))
}

/// `A_n = −1 + i n`.
pub fn damped_rotation() -> GeneratorFamily {
    GeneratorFamily::scalar("damped_rotation", BTreeMap::new(), SpaceRecipe::Counting, |n| c(-1.0, n))
}

/// `A_n = −n`.
pub fn neg_index() -> GeneratorFamily {
    GeneratorFamily::scalar("neg_index", BTreeMap::new(), SpaceRecipe::Counting, |n| c(-n, 0.0))
}

/// `f(s) = s` on the midpoint partition of `(0, 1)`.
pub fn multiplication_identity() -> GeneratorFamily {
    GeneratorFamily::scalar("multiplication", BTreeMap::new(), SpaceRecipe::UniformPartition, |s| c(s, 0.0))
}

/// Same block at every atom.
pub fn constant(block: CMatrix) -> GeneratorFamily {
    GeneratorFamily::new("constant", BTreeMap::new(), SpaceRecipe::Counting, move |_| block.clone())
}

/// `A_n = −n^{−α} + i n` on counting measure: bounded semigroups with
/// `‖R(in, A_n)‖ = n^α`, the standard witness for polynomial decay of rate `t^{−1/α}`.
pub fn polynomial_decay_family(alpha: f64) -> Result<GeneratorFamily> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(GeneratorFamily::scalar(
        "polynomial_decay",
        params(&[("alpha", alpha)]),
        SpaceRecipe::Counting,
        move |n| c(-n.powf(-alpha), n),
    ))
}

/// `d × d` Jordan block with eigenvalue `λ₀`.
pub fn jordan_block(lambda0: Complex64, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            lambda0
        } else if j == i + 1 {
            ONE
        } else {
            ZERO
        }
    })
}

pub fn jordan_family(lambda0: Complex64, d: usize) -> Result<GeneratorFamily> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("Jordan size must be >= 2, got {d}")));
    }
    let block = jordan_block(lambda0, d);
    Ok(GeneratorFamily::new(
        "jordan",
        params(&[("re", lambda0.re), ("im", lambda0.im), ("d", d as f64)]),
        SpaceRecipe::Counting,
        move |_| block.clone(),
    ))
}

/// Periodic forward-difference derivative on `m` points of a circle of length `period`:
/// `(C x)_j = (x_{j+1} − x_j)/h`, `h = period/m`.
pub fn circulant_derivative(m: usize, period: f64) -> CMatrix {
    let h = period / m as f64;
    CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            c(-1.0 / h, 0.0)
        } else if j == (i + 1) % m {
            c(1.0 / h, 0.0)
        } else {
            ZERO
        }
    })
}

/// Discretized re-scaled shift generators `A_s = C − s I` on each atom of `space`.
pub fn shifted_shift_field(space: Arc<MeasureSpace>, m: usize, period: f64) -> Result<OperatorField> {
    if m < 4 {
        return Err(Error::InvalidParameter(format!("grid size must be >= 4, got {m}")));
    }
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let circ = circulant_derivative(m, period);
    let blocks = space
        .atoms()
        .iter()
        .map(|a| linalg::shifted(&circ, c(a.label.unwrap_or(0.0), 0.0)) * c(-1.0, 0.0))
        .collect();
    OperatorField::from_blocks(space, blocks)
}

pub const DEFAULT_SHIFT_PERIOD: f64 = TAU;

pub fn shifted_shift_family(m: usize, period: f64) -> Result<GeneratorFamily> {
    if m < 4 {
        return Err(Error::InvalidParameter(format!("grid size must be >= 4, got {m}")));
    }
    let circ = circulant_derivative(m, period);
    Ok(GeneratorFamily::new(
        "shifted_shift",
        params(&[("m", m as f64), ("period", period)]),
        SpaceRecipe::UniformPartition,
        move |s| -linalg::shifted(&circ, c(s, 0.0)),
    ))
}

/// Relative Frobenius distance between the dense exponential of the assembled
/// block-diagonal operator and the blockwise exponentials.
pub fn bounded_field_expm_check(a: &OperatorField, t: f64) -> Result<f64> {
    let blockwise = crate::semigroup::exp_field(a, t)?.to_dense();
    let dense = (a.to_dense() * c(t, 0.0)).exp();
    let scale = linalg::frobenius(&dense);
    if !scale.is_finite() {
        return Err(Error::ExpFailure(a.atom_id(0)));
    }
    Ok(linalg::frobenius(&(dense - blockwise)) / scale)
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => Ok(*v),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {key}"))),
    }
}

pub const FAMILY_NAMES: [&str; 11] = [
    "example_7_2",
    "harmonic",
    "growth",
    "rotation",
    "damped_rotation",
    "neg_index",
    "multiplication",
    "identity",
    "polynomial_decay",
    "jordan",
    "shifted_shift",
];

/// Looks a family up by name. Parameters other than the truncation size `N` are read from `params`.
pub fn family_by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<GeneratorFamily> {
    match name {
        "example_7_2" => Ok(example_7_2()),
        "harmonic" => Ok(harmonic()),
        "growth" => Ok(growth()),
        "rotation" => Ok(rotation()),
        "damped_rotation" => Ok(damped_rotation()),
        "neg_index" => Ok(neg_index()),
        "multiplication" => Ok(multiplication_identity()),
        "identity" => Ok(constant(CMatrix::identity(1, 1))),
        "polynomial_decay" => polynomial_decay_family(param(params, "alpha", None)?),
        "jordan" => {
            let d = param(params, "d", Some(2.0))?;
            if d.fract() != 0.0 || d < 2.0 {
                return Err(Error::InvalidParameter(format!("d must be an integer >= 2, got {d}")));
            }
            jordan_family(
                c(param(params, "re", Some(-1.0))?, param(params, "im", Some(0.0))?),
                d as usize,
            )
        }
        "shifted_shift" => {
            let m = param(params, "m", Some(16.0))?;
            if m.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!("m must be an integer, got {m}")));
            }
            shifted_shift_family(m as usize, param(params, "period", Some(DEFAULT_SHIFT_PERIOD))?)
        }
        other => Err(Error::InvalidParameter(format!("unknown family {other}"))),
    }
}
