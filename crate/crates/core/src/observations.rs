//! Observation operators and synthetic observations.
//!
//! Every built-in operator has orthonormal rows and is stored in the
//! rectangular `M×J` form used by the Kalman algebra. The square `J×J`
//! projector `P = HᵀH` and its complement `Q = I − P` are derived on demand.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ordered_symmetric_eigen};
use crate::model::{check_dim, StateVector, TangentPropagator};
use crate::rng;

/// Relative gap below which the top-`M` eigenvalue boundary counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Identity,
    P,
    P36,
    P24,
    Adaptive,
    Custom,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::Identity => "identity",
            OperatorKind::P => "P",
            OperatorKind::P36 => "P36",
            OperatorKind::P24 => "P24",
            OperatorKind::Adaptive => "adaptive",
            OperatorKind::Custom => "custom",
        }
    }

    /// Observed fraction for the fixed periodic kinds.
    fn pattern(&self) -> Option<(usize, &'static [usize])> {
        match self {
            OperatorKind::P => Some((3, &[0, 1])),
            OperatorKind::P36 => Some((5, &[0, 1, 3])),
            OperatorKind::P24 => Some((10, &[0, 3, 6, 9])),
            _ => None,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "I" => Ok(OperatorKind::Identity),
            "P" | "P40" => Ok(OperatorKind::P),
            "P36" => Ok(OperatorKind::P36),
            "P24" => Ok(OperatorKind::P24),
            "adaptive" => Ok(OperatorKind::Adaptive),
            "custom" => Ok(OperatorKind::Custom),
            other => Err(Error::Config(format!("unknown observation kind '{other}'"))),
        }
    }
}

/// A rank-`M` linear map from state space to observation space.
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    kind: OperatorKind,
    matrix: DMatrix<f64>,
    observed: Option<Vec<usize>>,
    eigenvalues: Option<Vec<f64>>,
    degenerate: bool,
}

impl ObservationOperator {
    fn selection(kind: OperatorKind, dim: usize, observed: Vec<usize>) -> Self {
        let mut matrix = DMatrix::zeros(observed.len(), dim);
        for (row, &col) in observed.iter().enumerate() {
            matrix[(row, col)] = 1.0;
        }
        Self {
            kind,
            matrix,
            observed: Some(observed),
            eigenvalues: None,
            degenerate: false,
        }
    }

    fn periodic(kind: OperatorKind, dim: usize) -> Result<Self> {
        let (period, offsets) = kind.pattern().expect("periodic kind");
        if dim == 0 || dim % period != 0 {
            return Err(Error::Divisibility {
                dim,
                divisor: period,
                kind: kind.as_str(),
            });
        }
        let observed = (0..dim)
            .filter(|j| offsets.contains(&(j % period)))
            .collect();
        Ok(Self::selection(kind, dim, observed))
    }

    pub fn identity(dim: usize) -> Self {
        Self::selection(OperatorKind::Identity, dim, (0..dim).collect())
    }

    /// Every third coordinate dropped: columns `e₁, e₂, 0, e₄, e₅, 0, …`.
    pub fn p(dim: usize) -> Result<Self> {
        Self::periodic(OperatorKind::P, dim)
    }

    /// Three of every five coordinates: `e₁, e₂, 0, e₄, 0, …`.
    pub fn p36(dim: usize) -> Result<Self> {
        Self::periodic(OperatorKind::P36, dim)
    }

    /// Four of every ten coordinates: `e₁, 0, 0, e₄, 0, 0, e₇, 0, 0, e₁₀, …`.
    pub fn p24(dim: usize) -> Result<Self> {
        Self::periodic(OperatorKind::P24, dim)
    }

    /// Builds a fixed operator by kind. `Adaptive` and `Custom` are rejected.
    pub fn fixed(kind: OperatorKind, dim: usize) -> Result<Self> {
        match kind {
            OperatorKind::Identity => Ok(Self::identity(dim)),
            OperatorKind::P | OperatorKind::P36 | OperatorKind::P24 => Self::periodic(kind, dim),
            _ => Err(Error::InvalidParameter(format!(
                "{kind} is not a fixed operator kind"
            ))),
        }
    }

    /// Wraps an arbitrary finite `M×J` matrix of full row rank.
    pub fn custom(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        if matrix.nrows() == 0 || matrix.nrows() > matrix.ncols() {
            return Err(Error::InvalidParameter(format!(
                "operator must have 1..=J rows, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rank = matrix.clone().svd(false, false).rank(1e-12 * matrix.amax());
        if rank != matrix.nrows() {
            return Err(Error::InvalidParameter(format!(
                "operator rank {rank} is below its row count {}",
                matrix.nrows()
            )));
        }
        Ok(Self {
            kind: OperatorKind::Custom,
            matrix,
            observed: None,
            eigenvalues: None,
            degenerate: false,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// `M`.
    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    /// `J`.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// The rectangular `M×J` form.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// 0-based observed coordinates, for selection operators.
    pub fn observed_indices(&self) -> Option<&[usize]> {
        self.observed.as_deref()
    }

    /// The eigenvalues of `LᵀL` (ascending) behind an adaptive operator.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    /// Whether the `M`-th largest eigenvalue ties the next one.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(v.len(), self.dim())?;
        Ok(&self.matrix * v)
    }

    /// Square projector form `HᵀH` (`J×J`).
    pub fn projector(&self) -> DMatrix<f64> {
        self.matrix.tr_mul(&self.matrix)
    }

    /// Square form of a fixed selection kind: the identity with unobserved
    /// columns replaced by zero.
    pub fn square_form(&self) -> Option<DMatrix<f64>> {
        self.observed.as_ref().map(|_| self.projector())
    }

    pub fn complement(&self) -> ComplementProjector {
        ComplementProjector::of(self)
    }

    /// Fast `HᵀH v` for selection operators, generic otherwise.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.observed {
            Some(idx) => {
                let mut out = DVector::zeros(v.len());
                for &j in idx {
                    out[j] = v[j];
                }
                out
            }
            None => self.matrix.tr_mul(&(&self.matrix * v)),
        }
    }

    /// FNV-1a hash of the matrix entries, hex-encoded.
    pub fn basis_hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.matrix.transpose().iter() {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    /// Dense CSV with a one-line JSON header `{kind, J, M, basis_hash}`.
    pub fn to_csv(&self) -> String {
        let header = serde_json::json!({
            "kind": self.kind.as_str(),
            "J": self.dim(),
            "M": self.rank(),
            "basis_hash": self.basis_hash(),
        });
        format!("{header}\n{}", linalg::matrix_to_csv(&self.matrix))
    }

    /// Parses [`Self::to_csv`] output, checking shape and hash.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (head, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Config("operator CSV is missing its header".into()))?;
        let header: serde_json::Value = serde_json::from_str(head)?;
        let matrix = linalg::matrix_from_csv(body)?;
        let get = |key: &str| {
            header[key]
                .as_u64()
                .ok_or_else(|| Error::Config(format!("header field '{key}' missing")))
        };
        let (dim, rank) = (get("J")? as usize, get("M")? as usize);
        check_dim(matrix.ncols(), dim)?;
        check_dim(matrix.nrows(), rank)?;
        let kind: OperatorKind = header["kind"]
            .as_str()
            .ok_or_else(|| Error::Config("header field 'kind' missing".into()))?
            .parse()?;
        let op = match kind {
            OperatorKind::Identity | OperatorKind::P | OperatorKind::P36 | OperatorKind::P24 => {
                let op = Self::fixed(kind, dim)?;
                if op.matrix != matrix {
                    return Err(Error::Config(format!(
                        "operator CSV entries do not match kind {kind}"
                    )));
                }
                op
            }
            OperatorKind::Adaptive => Self {
                kind,
                matrix,
                observed: None,
                eigenvalues: None,
                degenerate: false,
            },
            OperatorKind::Custom => Self::custom(matrix)?,
        };
        if header["basis_hash"].as_str() != Some(op.basis_hash().as_str()) {
            return Err(Error::Config("operator CSV hash does not match its entries".into()));
        }
        Ok(op)
    }
}

/// `Q = I − P` for the square form of an operator.
#[derive(Debug, Clone)]
pub struct ComplementProjector {
    matrix: DMatrix<f64>,
}

impl ComplementProjector {
    pub fn of(op: &ObservationOperator) -> Self {
        let n = op.dim();
        Self {
            matrix: DMatrix::identity(n, n) - op.projector(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

/// Operator whose rows are the `M` leading eigenvectors of `LᵀL`, so that
/// `H v = (⟨ψ^{J−M+1}, v⟩, …, ⟨ψ^J, v⟩)`.
pub fn adaptive_operator(l: &TangentPropagator, rank: usize) -> Result<ObservationOperator> {
    let lm = l.matrix();
    let n = lm.ncols();
    if rank == 0 || rank > n {
        return Err(Error::InvalidParameter(format!(
            "adaptive rank must be in 1..={n}, got {rank}"
        )));
    }
    if lm.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("tangent propagator has non-finite entries".into()));
    }
    let eig = ordered_symmetric_eigen(&lm.tr_mul(lm))?;
    let first = n - rank;
    let matrix = eig.vectors.columns(first, rank).transpose();
    let degenerate = if first > 0 {
        let lmax = eig.values[n - 1].abs().max(f64::MIN_POSITIVE);
        (eig.values[first] - eig.values[first - 1]).abs() <= DEGENERACY_TOL * lmax
    } else {
        false
    };
    Ok(ObservationOperator {
        kind: OperatorKind::Adaptive,
        matrix,
        observed: None,
        eigenvalues: Some(eig.values),
        degenerate,
    })
}

/// Gaussian observation noise `N(0, ε²I)` drawn from counter-style streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    epsilon: f64,
    seed: u64,
}

impl NoiseModel {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise std must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Noise model for Monte Carlo realization `id`.
    pub fn for_realization(&self, id: u64) -> Self {
        Self {
            epsilon: self.epsilon,
            seed: rng::realization_seed(self.seed, id),
        }
    }

    /// The noise vector `ν_k` of length `len`.
    pub fn sample(&self, k: u64, len: usize) -> DVector<f64> {
        let mut r = rng::stream(self.seed, k);
        DVector::from_fn(len, |_, _| self.epsilon * r.sample::<f64, _>(StandardNormal))
    }
}

/// `y_k = H v_k + ν_k`.
pub fn observe(
    h: &ObservationOperator,
    v: &StateVector,
    noise: &NoiseModel,
    k: u64,
) -> Result<DVector<f64>> {
    let clean = h.apply(v.as_vector())?;
    Ok(clean + noise.sample(k, h.rank()))
}
