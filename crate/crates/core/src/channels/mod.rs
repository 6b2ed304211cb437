//! CPTP maps as Kraus families.
//!
//! Flag registers are an explicit final output factor whose basis states
//! label classical sectors; every Kraus operator of a flagged channel maps
//! into exactly one sector, so outputs are block diagonal across flags.

mod constructors;
mod mixture;

pub use constructors::{
    amplitude_damping, dephasing, depolarizing, erasure_channel, erasure_channel_default,
    flagged_switch_channel, heralded_channel, heralded_channel_default, identity, random_channel,
    subsets, trivial_channel, trivial_channel_default, unitary_channel,
};
pub use mixture::{binomial_mixture_check, binomial_mixture_distance};

pub(crate) use constructors::heralded_with_k;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qcore::linalg::{apply_kraus, apply_kraus_local, offsets, CMatrix, ZERO};
use crate::qcore::{hex_digest, trace_norm, DensityOperator, SpaceShape};

/// Completeness tolerance on `sum K^dagger K - I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Label of one classical flag sector.
///
/// Subsets hold 0-based channel positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagLabel {
    Subset(Vec<usize>),
    Erasure { success: bool },
    Joint(Vec<FlagLabel>),
}

impl FlagLabel {
    fn flatten(&self) -> Vec<FlagLabel> {
        match self {
            FlagLabel::Joint(parts) => parts.clone(),
            other => vec![other.clone()],
        }
    }
}

impl std::fmt::Display for FlagLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlagLabel::Subset(r) => {
                let inner: Vec<String> = r.iter().map(|i| (i + 1).to_string()).collect();
                write!(f, "{{{}}}", inner.join(","))
            }
            FlagLabel::Erasure { success: true } => write!(f, "ok"),
            FlagLabel::Erasure { success: false } => write!(f, "erased"),
            FlagLabel::Joint(parts) => {
                let inner: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "({})", inner.join(","))
            }
        }
    }
}

/// Informative part of one flag sector: conditioned on the flag, the
/// quantum output is `channel` applied to the input factors `keep`,
/// tensored with a fixed state, and the flag occurs with probability
/// `weight` independently of the input. `channel == None` means the sector
/// output is constant.
#[derive(Clone, Debug)]
pub struct SectorReduction {
    pub weight: f64,
    pub keep: Vec<usize>,
    pub channel: Option<KrausChannel>,
}

#[derive(Clone, Debug)]
pub struct FlagSectors {
    labels: Vec<FlagLabel>,
    reductions: Option<Vec<SectorReduction>>,
}

impl FlagSectors {
    pub fn labels(&self) -> &[FlagLabel] {
        &self.labels
    }

    pub fn reductions(&self) -> Option<&[SectorReduction]> {
        self.reductions.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &FlagLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug)]
pub struct KrausChannel {
    name: String,
    in_shape: SpaceShape,
    out_shape: SpaceShape,
    kraus: Vec<CMatrix>,
    flags: Option<FlagSectors>,
    constant_output: Option<CMatrix>,
}

impl KrausChannel {
    /// Validates dimensions and completeness.
    pub fn new(
        name: impl Into<String>,
        in_shape: SpaceShape,
        out_shape: SpaceShape,
        kraus: Vec<CMatrix>,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus family".into()));
        }
        for (i, k) in kraus.iter().enumerate() {
            if k.nrows() != out_shape.dim() || k.ncols() != in_shape.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {i} is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    out_shape.dim(),
                    in_shape.dim()
                )));
            }
        }
        let ch = Self {
            name: name.into(),
            in_shape,
            out_shape,
            kraus,
            flags: None,
            constant_output: None,
        };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidChannel(format!("completeness error {err:.3e}")));
        }
        Ok(ch)
    }

    /// Declares the last output factor a flag register with the given
    /// sector labels. Each Kraus operator must map into a single sector.
    pub(crate) fn with_flags(
        mut self,
        labels: Vec<FlagLabel>,
        reductions: Option<Vec<SectorReduction>>,
    ) -> Result<Self> {
        let nflag = *self.out_shape.factors().last().expect("nonempty shape");
        if nflag != labels.len() {
            return Err(Error::InvalidChannel(format!(
                "{} flag labels for a flag factor of dimension {nflag}",
                labels.len()
            )));
        }
        if let Some(r) = &reductions {
            if r.len() != labels.len() {
                return Err(Error::InvalidChannel("reductions do not match flags".into()));
            }
            for red in r {
                let kept: usize = red.keep.iter().map(|&f| self.in_shape.factors()[f]).product();
                let consistent = match &red.channel {
                    None => red.keep.is_empty(),
                    Some(ch) => !red.keep.is_empty() && ch.in_dim() == kept,
                };
                if !consistent {
                    return Err(Error::InvalidChannel(format!("sector reduction keeping {:?} is inconsistent", red.keep)));
                }
            }
        }
        for k in &self.kraus {
            let occupied = (0..nflag)
                .filter(|&y| (0..k.nrows()).filter(|r| r % nflag == y).any(|r| k.row(r).iter().any(|z| *z != ZERO)))
                .count();
            if occupied > 1 {
                return Err(Error::InvalidChannel("Kraus operator spans several flag sectors".into()));
            }
        }
        self.flags = Some(FlagSectors { labels, reductions });
        Ok(self)
    }

    pub(crate) fn with_constant_output(mut self, sigma: CMatrix) -> Self {
        self.constant_output = Some(sigma);
        self
    }

    pub(crate) fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Hex SHA-256 over shapes and Kraus entries. Equal channels with
    /// different Kraus families hash differently.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in self.in_shape.factors().iter().chain([&0]).chain(self.out_shape.factors()) {
            h.update((*d as u64).to_le_bytes());
        }
        for k in &self.kraus {
            for z in k.iter() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        hex_digest(h)
    }

    pub fn in_shape(&self) -> &SpaceShape {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &SpaceShape {
        &self.out_shape
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn flags(&self) -> Option<&FlagSectors> {
        self.flags.as_ref()
    }

    pub fn is_flagged(&self) -> bool {
        self.flags.is_some()
    }

    /// Fixed output of a constant channel, when known by construction.
    pub fn constant_output(&self) -> Option<&CMatrix> {
        self.constant_output.as_ref()
    }

    pub fn in_dim(&self) -> usize {
        self.in_shape.dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out_shape.dim()
    }

    /// Output factors without the flag register.
    pub fn quantum_out_factors(&self) -> &[usize] {
        let f = self.out_shape.factors();
        if self.is_flagged() {
            &f[..f.len() - 1]
        } else {
            f
        }
    }

    pub fn quantum_out_dim(&self) -> usize {
        self.quantum_out_factors().iter().product()
    }

    /// `max |sum K^dagger K - I|`.
    pub fn completeness_error(&self) -> f64 {
        let d = self.in_dim();
        let mut acc = CMatrix::zeros(d, d);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        acc -= CMatrix::identity(d, d);
        acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(id ⊗ Φ)` on the factors `acting_on` of `rho`; the output factors
    /// take the place of the lowest acted-on factor.
    pub fn apply(&self, rho: &DensityOperator, acting_on: &[usize]) -> Result<DensityOperator> {
        rho.shape().check_selection(acting_on)?;
        let dims: Vec<usize> = acting_on.iter().map(|&f| rho.dims()[f]).collect();
        if dims != self.in_shape.factors() {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} applied to factors {dims:?}",
                self.in_shape
            )));
        }
        let (m, _) = apply_kraus_local(
            rho.matrix(),
            rho.dims(),
            acting_on,
            &self.kraus,
            self.out_shape.factors(),
        );
        let shape = rho.shape().substitute(acting_on, &self.out_shape);
        Ok(DensityOperator::from_trusted(shape, m))
    }

    /// Applies the channel to a state living exactly on its input space.
    pub fn apply_full(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dims() != self.in_shape.factors() {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} applied to {}",
                self.in_shape,
                rho.shape()
            )));
        }
        Ok(DensityOperator::from_trusted(self.out_shape.clone(), apply_kraus(rho.matrix(), &self.kraus)))
    }

    /// Kraus operators restricted to flag sector `y` (quantum rows only).
    pub fn sector_kraus(&self, y: usize) -> Result<Vec<CMatrix>> {
        let flags = self.flags.as_ref().ok_or(Error::MissingFlags)?;
        let nflag = flags.len();
        let dq = self.quantum_out_dim();
        Ok(self
            .kraus
            .iter()
            .map(|k| CMatrix::from_fn(dq, k.ncols(), |r, c| k[(r * nflag + y, c)]))
            .filter(|k| k.iter().any(|z| *z != ZERO))
            .collect())
    }

    /// Normalized Choi state `(id ⊗ Φ)(|Ω><Ω|)` on `in ⊗ out`.
    pub fn choi_matrix(&self) -> DensityOperator {
        let shape = self.in_shape.concat(&self.out_shape).unwrap_or_else(|_| {
            let mut f = self.in_shape.factors().to_vec();
            f.extend_from_slice(self.out_shape.factors());
            SpaceShape::new(f).expect("nonzero factors")
        });
        DensityOperator::from_trusted(shape, self.choi_raw())
    }

    pub(crate) fn choi_raw(&self) -> CMatrix {
        let din = self.in_dim();
        let dout = self.out_dim();
        let n = din * dout;
        let mut choi = CMatrix::zeros(n, n);
        for k in &self.kraus {
            // vec(K)[(i, b)] = K[b, i]
            let v = nalgebra::DVector::from_fn(n, |idx, _| k[(idx % dout, idx / dout)]);
            choi += &v * v.adjoint();
        }
        choi.unscale(din as f64)
    }

    /// Tensor product `self ⊗ other`. Flag registers, if any, are merged
    /// into a single final factor with joint labels; quantum outputs come
    /// first in operand order.
    pub fn tensor(&self, other: &KrausChannel) -> Result<KrausChannel> {
        let in_shape = SpaceShape::new(
            self.in_shape.factors().iter().chain(other.in_shape.factors()).copied().collect(),
        )?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a.kronecker(b));
            }
        }
        let name = format!("{}⊗{}", self.name, other.name);
        let constant = match (&self.constant_output, &other.constant_output) {
            (Some(a), Some(b)) => Some(a.kronecker(b)),
            _ => None,
        };

        if !self.is_flagged() && !other.is_flagged() {
            let out_shape = SpaceShape::new(
                self.out_shape.factors().iter().chain(other.out_shape.factors()).copied().collect(),
            )?;
            let ch = Self { name, in_shape, out_shape, kraus, flags: None, constant_output: constant };
            return Ok(ch);
        }

        // Row layout of kron(a, b): [A_q.., (Y_A), B_q.., (Y_B)].
        let a_q = self.quantum_out_factors();
        let b_q = other.quantum_out_factors();
        let mut full: Vec<usize> = self.out_shape.factors().to_vec();
        full.extend_from_slice(other.out_shape.factors());
        let na = self.out_shape.len();
        let mut order: Vec<usize> = (0..a_q.len()).collect();
        order.extend(na..na + b_q.len());
        if self.is_flagged() {
            order.push(na - 1);
        }
        if other.is_flagged() {
            order.push(full.len() - 1);
        }
        let row_map = offsets(&full, &order);
        let kraus: Vec<CMatrix> = kraus
            .into_iter()
            .map(|k| CMatrix::from_fn(k.nrows(), k.ncols(), |r, c| k[(row_map[r], c)]))
            .collect();

        let fa = self.flag_view();
        let fb = other.flag_view();
        let mut labels = Vec::with_capacity(fa.len() * fb.len());
        let mut reductions = Some(Vec::with_capacity(fa.len() * fb.len()));
        let shift = self.in_shape.len();
        for (la, ra) in &fa {
            for (lb, rb) in &fb {
                labels.push(match (la, lb) {
                    (Some(x), Some(y)) => {
                        let mut parts = x.flatten();
                        parts.extend(y.flatten());
                        FlagLabel::Joint(parts)
                    }
                    (Some(x), None) => x.clone(),
                    (None, Some(y)) => y.clone(),
                    (None, None) => unreachable!("at least one operand is flagged"),
                });
                match (ra, rb, reductions.as_mut()) {
                    (Some(ra), Some(rb), Some(list)) => {
                        let mut keep = ra.keep.clone();
                        keep.extend(rb.keep.iter().map(|k| k + shift));
                        let channel = match (&ra.channel, &rb.channel) {
                            (Some(x), Some(y)) => Some(x.tensor(y)?),
                            (Some(x), None) => Some(x.clone()),
                            (None, Some(y)) => Some(y.clone()),
                            (None, None) => None,
                        };
                        list.push(SectorReduction { weight: ra.weight * rb.weight, keep, channel });
                    }
                    _ => reductions = None,
                }
            }
        }
        let nflag = labels.len();
        let mut out_factors: Vec<usize> = a_q.to_vec();
        out_factors.extend_from_slice(b_q);
        out_factors.push(nflag);
        let out_shape = SpaceShape::new(out_factors)?;
        let ch = Self { name, in_shape, out_shape, kraus, flags: None, constant_output: constant };
        ch.with_flags(labels, reductions)
    }

    /// Per-sector view used by [`tensor`](Self::tensor): an unflagged
    /// channel is a single sector of weight one keeping all inputs.
    fn flag_view(&self) -> Vec<(Option<FlagLabel>, Option<SectorReduction>)> {
        match &self.flags {
            Some(f) => f
                .labels
                .iter()
                .enumerate()
                .map(|(y, l)| (Some(l.clone()), f.reductions.as_ref().map(|r| r[y].clone())))
                .collect(),
            None => {
                // a constant channel ignores its inputs
                let (keep, channel) = if self.constant_output.is_some() {
                    (Vec::new(), None)
                } else {
                    ((0..self.in_shape.len()).collect(), Some(self.clone()))
                };
                vec![(None, Some(SectorReduction { weight: 1.0, keep, channel }))]
            }
        }
    }

    /// Tensor product of a nonempty list of channels.
    pub fn tensor_all(channels: &[KrausChannel]) -> Result<KrausChannel> {
        let (first, rest) = channels.split_first().ok_or(Error::EmptySelection)?;
        rest.iter().try_fold(first.clone(), |acc, c| acc.tensor(c))
    }

    /// Choi trace-norm distance to another channel with identical shapes.
    pub fn choi_distance(&self, other: &KrausChannel) -> Result<f64> {
        if self.in_shape.factors() != other.in_shape.factors()
            || self.out_shape.factors() != other.out_shape.factors()
        {
            return Err(Error::DimensionMismatch(format!(
                "{}→{} vs {}→{}",
                self.in_shape, self.out_shape, other.in_shape, other.out_shape
            )));
        }
        let diff = self.choi_raw() - other.choi_raw();
        if self.is_flagged() && other.is_flagged() {
            let mut dims = self.in_shape.factors().to_vec();
            dims.extend_from_slice(self.out_shape.factors());
            return block_trace_norm(&diff, &dims, dims.len() - 1);
        }
        trace_norm(&diff)
    }

    /// Channels are equal when their Choi states agree within `1e-10` in
    /// trace norm.
    pub fn equals(&self, other: &KrausChannel) -> Result<bool> {
        Ok(self.choi_distance(other)? <= 1e-10)
    }
}

/// Trace norm of a Hermitian matrix that is block diagonal in the basis
/// of `factor`. Falls back to the full computation if any off-block entry is
/// nonzero.
pub(crate) fn block_trace_norm(m: &CMatrix, dims: &[usize], factor: usize) -> Result<f64> {
    let n = m.nrows();
    let stride: usize = dims[factor + 1..].iter().product();
    let digit = |i: usize| (i / stride) % dims[factor];
    for i in 0..n {
        for j in 0..n {
            if digit(i) != digit(j) && m[(i, j)] != ZERO {
                return trace_norm(m);
            }
        }
    }
    let mut total = 0.0;
    for y in 0..dims[factor] {
        let idx: Vec<usize> = (0..n).filter(|&i| digit(i) == y).collect();
        let blk = CMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
        let t = trace_norm(&blk)?;
        total += t;
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
