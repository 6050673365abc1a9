use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{read_snapshot, PairedField, Phase, TwoPhaseGrid};
use crate::error::{Error, Result};
use crate::matcore::{check_unit, expm, normalize, SquareMatrix};
use crate::rng::{seeded, stream};
use crate::scalar::Scalar;

/// How to build initial data in the discrete admissible set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialRecipe {
    /// A₊ ≡ I, A₋ ≡ I − 2 axis⊗axis.
    ConstantPair { axis: Vec<f64> },
    /// Smooth in physical coordinates, reproducible from the seed.
    SmoothRandom { seed: u64, amplitude: f64 },
    /// SmoothRandom followed by independent per-node rotations of size
    /// `amplitude`; paired nodes share their rotation.
    NodalNoise { seed: u64, amplitude: f64 },
    /// A snapshot file on the same grid.
    UserFile { path: PathBuf },
}

/// Σ a_k sin(k·x + φ_k) with three random modes.
struct SmoothScalar {
    modes: Vec<(f64, f64, f64, f64)>,
}

impl SmoothScalar {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        let modes = (1..=3)
            .map(|m| {
                let a = rng.gen_range(-1.0..1.0) / m as f64;
                let kx = rng.gen_range(-2.5..2.5);
                let ky = rng.gen_range(-2.5..2.5);
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                (a, kx, ky, phi)
            })
            .collect();
        Self { modes }
    }

    fn eval(&self, p: [f64; 2]) -> f64 {
        self.modes.iter().map(|(a, kx, ky, phi)| a * (kx * p[0] + ky * p[1] + phi).sin()).sum()
    }
}

/// Antisymmetric-matrix-valued smooth function.
struct SmoothAntisym {
    n: usize,
    coeffs: Vec<SmoothScalar>,
}

impl SmoothAntisym {
    fn sample<R: Rng>(rng: &mut R, n: usize) -> Self {
        let coeffs = (0..n * (n - 1) / 2).map(|_| SmoothScalar::sample(rng)).collect();
        Self { n, coeffs }
    }

    fn eval(&self, p: [f64; 2], scale: f64) -> SquareMatrix<f64> {
        let mut w = SquareMatrix::zeros(self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let c = scale * self.coeffs[k].eval(p);
                w[(i, j)] = c;
                w[(j, i)] = -c;
                k += 1;
            }
        }
        w
    }
}

fn cast_field<T: Scalar>(
    grid: Arc<TwoPhaseGrid>,
    plus: Vec<SquareMatrix<f64>>,
    minus: Vec<SquareMatrix<f64>>,
    axes: Vec<Vec<f64>>,
) -> Result<PairedField<T>> {
    PairedField::new(
        grid,
        plus.iter().map(SquareMatrix::cast).collect(),
        minus.iter().map(SquareMatrix::cast).collect(),
        axes.iter().map(|a| a.iter().map(|&v| T::lit(v)).collect()).collect(),
    )
}

fn smooth_random(grid: &TwoPhaseGrid, n: usize, seed: u64, amp: f64) -> (Vec<SquareMatrix<f64>>, Vec<SquareMatrix<f64>>, Vec<Vec<f64>>) {
    let mut rng = seeded(seed, stream::INITIAL);
    let w = SmoothAntisym::sample(&mut rng, n);
    let u = SmoothAntisym::sample(&mut rng, n);
    let mut base: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut base);
    let bend: Vec<SmoothScalar> = (0..n).map(|_| SmoothScalar::sample(&mut rng)).collect();
    let geometry = grid.geometry();
    let axis_at = |p: [f64; 2]| -> Vec<f64> {
        let mut v: Vec<f64> = base.iter().zip(&bend).map(|(b, s)| b + 0.5 * amp * s.eval(p)).collect();
        normalize(&mut v);
        v
    };
    let plus = grid
        .phase(Phase::Plus)
        .nodes
        .iter()
        .map(|node| expm(&w.eval(node.pos, amp)))
        .collect();
    let minus = grid
        .phase(Phase::Minus)
        .nodes
        .iter()
        .map(|node| {
            let d = geometry.signed_distance(node.pos).max(0.0);
            let a = expm(&w.eval(node.pos, amp));
            let r = SquareMatrix::reflection(&axis_at(node.pos));
            let tail = if node.pair.is_some() { SquareMatrix::identity(n) } else { expm(&u.eval(node.pos, amp * d)) };
            a.matmul(&r).matmul(&tail)
        })
        .collect();
    let axes = grid.pairs().iter().map(|p| axis_at(p.pos)).collect();
    (plus, minus, axes)
}

/// Builds initial data satisfying the orthogonality and minimal-pair
/// constraints by construction.
pub fn make_initial<T: Scalar>(grid: Arc<TwoPhaseGrid>, n: usize, recipe: &InitialRecipe) -> Result<PairedField<T>> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let invalid = |name: &'static str, reason: &str| Error::InvalidParameter { name, reason: reason.to_string() };
    match recipe {
        InitialRecipe::ConstantPair { axis } => {
            if axis.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: axis.len() });
            }
            check_unit(axis)?;
            let plus = vec![SquareMatrix::identity(n); grid.phase(Phase::Plus).len()];
            let minus = vec![SquareMatrix::reflection(axis); grid.phase(Phase::Minus).len()];
            let axes = vec![axis.clone(); grid.pairs().len()];
            cast_field(grid, plus, minus, axes)
        }
        InitialRecipe::SmoothRandom { seed, amplitude } => {
            if !amplitude.is_finite() || *amplitude < 0.0 {
                return Err(invalid("amplitude", "must be finite and nonnegative"));
            }
            let (plus, minus, axes) = smooth_random(&grid, n, *seed, *amplitude);
            cast_field(grid, plus, minus, axes)
        }
        InitialRecipe::NodalNoise { seed, amplitude } => {
            if !amplitude.is_finite() || *amplitude < 0.0 {
                return Err(invalid("amplitude", "must be finite and nonnegative"));
            }
            let (mut plus, mut minus, axes) = smooth_random(&grid, n, *seed, *amplitude);
            let mut rng = seeded(*seed, stream::NOISE);
            let kick = |rng: &mut crate::rng::StdRng| {
                let w = SquareMatrix::<f64>::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).antisym();
                expm(&w.scale(*amplitude))
            };
            let pnodes = &grid.phase(Phase::Plus).nodes;
            for (i, node) in pnodes.iter().enumerate() {
                let q = kick(&mut rng);
                plus[i] = q.matmul(&plus[i]);
                if let Some(k) = node.pair {
                    let m = grid.pairs()[k].minus;
                    minus[m] = q.matmul(&minus[m]);
                }
            }
            for (i, node) in grid.phase(Phase::Minus).nodes.iter().enumerate() {
                if node.pair.is_none() {
                    let q = kick(&mut rng);
                    minus[i] = q.matmul(&minus[i]);
                }
            }
            // Left multiplication by a common rotation keeps A₊ᵀA₋ and hence the axis.
            cast_field(grid, plus, minus, axes)
        }
        InitialRecipe::UserFile { path } => {
            let file = File::open(path)?;
            let field: PairedField<T> = read_snapshot(BufReader::new(file))?;
            if field.grid().geometry() != grid.geometry() {
                return Err(Error::GridMismatch);
            }
            if field.n() != n {
                return Err(Error::DimensionMismatch { expected: n, got: field.n() });
            }
            field.validate(T::TOL_ORTH, 1e-8)?;
            let (plus, minus, axes) = (
                field.values(Phase::Plus).to_vec(),
                field.values(Phase::Minus).to_vec(),
                field.axes().to_vec(),
            );
            PairedField::new(grid, plus, minus, axes)
        }
    }
}
