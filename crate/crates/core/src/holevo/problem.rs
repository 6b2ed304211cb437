//! Ensemble objective split into independent output components.

use crate::channels::KrausChannel;
use crate::entropy::spectrum_entropy;
use crate::error::{Error, Result};
use crate::qcore::linalg::{eigh, hermitian_fn, reorder_vector, CMatrix, CVector, ZERO};

/// Floor applied to eigenvalues inside the gradient logarithm.
const GRAD_LOG_FLOOR: f64 = 1e-13;

/// One output block: Kraus operators (already scaled by the square root of
/// the block weight) acting on the input factors `keep`.
#[derive(Clone, Debug)]
pub(crate) struct Component {
    kraus: Vec<CMatrix>,
    /// `None` means all input factors in natural order.
    keep: Option<Keep>,
}

#[derive(Clone, Debug)]
struct Keep {
    /// keep factors followed by the traced ones
    order: Vec<usize>,
    inverse: Vec<usize>,
    moved_dims: Vec<usize>,
    dk: usize,
    rest: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub in_dims: Vec<usize>,
    pub components: Vec<Component>,
}

/// Cached per-state data: `Phi_c(psi psi^dagger)`, its entropy and log,
/// and the reshaped input used to lift gradients.
pub(crate) struct StateData {
    outputs: Vec<CMatrix>,
    entropy: Vec<f64>,
    log: Vec<CMatrix>,
    reshaped: Vec<Option<CMatrix>>,
}

pub(crate) struct AvgData {
    entropy: Vec<f64>,
    log: Vec<CMatrix>,
}

fn log_floor(m: &CMatrix) -> (f64, CMatrix) {
    let (vals, vecs) = eigh(m);
    let s = spectrum_entropy(&vals);
    (s, hermitian_fn(&vals, &vecs, |v| v.max(GRAD_LOG_FLOOR).log2()))
}

impl Problem {
    pub fn in_dim(&self) -> usize {
        self.in_dims.iter().product()
    }

    /// Whole channel as a single component.
    pub fn naive(phi: &KrausChannel) -> Self {
        Self {
            in_dims: phi.in_shape().factors().to_vec(),
            components: vec![Component { kraus: phi.kraus().to_vec(), keep: None }],
        }
    }

    /// One component per flag sector, using sector reductions when known.
    pub fn flagged(phi: &KrausChannel) -> Result<Self> {
        let flags = phi.flags().ok_or(Error::MissingFlags)?;
        let in_dims = phi.in_shape().factors().to_vec();
        let mut components = Vec::new();
        match flags.reductions() {
            Some(reductions) => {
                for r in reductions {
                    let Some(ch) = &r.channel else { continue };
                    if r.weight <= 0.0 || r.keep.is_empty() {
                        continue;
                    }
                    let s = r.weight.sqrt();
                    let kraus = ch.kraus().iter().map(|k| k.scale(s)).collect();
                    components.push(Component { kraus, keep: Self::keep(&in_dims, &r.keep)? });
                }
            }
            None => {
                for y in 0..flags.len() {
                    let kraus = phi.sector_kraus(y)?;
                    if !kraus.is_empty() {
                        components.push(Component { kraus, keep: None });
                    }
                }
            }
        }
        Ok(Self { in_dims, components })
    }

    fn keep(in_dims: &[usize], keep: &[usize]) -> Result<Option<Keep>> {
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= in_dims.len()) {
            return Err(Error::InvalidChannel(format!("bad sector input set {keep:?}")));
        }
        if keep.len() == in_dims.len() {
            return Ok(None);
        }
        let mut order = keep.to_vec();
        order.extend((0..in_dims.len()).filter(|f| !keep.contains(f)));
        let mut inverse = vec![0; order.len()];
        for (p, &f) in order.iter().enumerate() {
            inverse[f] = p;
        }
        let moved_dims: Vec<usize> = order.iter().map(|&f| in_dims[f]).collect();
        let dk: usize = keep.iter().map(|&f| in_dims[f]).product();
        let rest = in_dims.iter().product::<usize>() / dk;
        Ok(Some(Keep { order, inverse, moved_dims, dk, rest }))
    }

    pub fn state_data(&self, psi: &CVector) -> StateData {
        let n = self.components.len();
        let mut data = StateData {
            outputs: Vec::with_capacity(n),
            entropy: Vec::with_capacity(n),
            log: Vec::with_capacity(n),
            reshaped: Vec::with_capacity(n),
        };
        for c in &self.components {
            let m = match &c.keep {
                None => CMatrix::from_column_slice(psi.len(), 1, psi.as_slice()),
                Some(k) => {
                    let moved = reorder_vector(psi, &self.in_dims, &k.order);
                    CMatrix::from_fn(k.dk, k.rest, |i, r| moved[i * k.rest + r])
                }
            };
            let mut out = CMatrix::zeros(c.kraus[0].nrows(), c.kraus[0].nrows());
            for kr in &c.kraus {
                let km = kr * &m;
                out += &km * km.adjoint();
            }
            let (s, l) = log_floor(&out);
            data.outputs.push(out);
            data.entropy.push(s);
            data.log.push(l);
            data.reshaped.push(c.keep.as_ref().map(|_| m));
        }
        data
    }

    pub fn avg_data(&self, probs: &[f64], states: &[StateData]) -> AvgData {
        let mut entropy = Vec::with_capacity(self.components.len());
        let mut log = Vec::with_capacity(self.components.len());
        for c in 0..self.components.len() {
            let dim = states[0].outputs[c].nrows();
            let mut avg = CMatrix::zeros(dim, dim);
            for (p, s) in probs.iter().zip(states) {
                if *p > 0.0 {
                    avg += s.outputs[c].scale(*p);
                }
            }
            let (s, l) = log_floor(&avg);
            entropy.push(s);
            log.push(l);
        }
        AvgData { entropy, log }
    }

    pub fn value(&self, probs: &[f64], states: &[StateData], avg: &AvgData) -> f64 {
        let mut v = 0.0;
        for c in 0..self.components.len() {
            v += avg.entropy[c];
            for (p, s) in probs.iter().zip(states) {
                v -= p * s.entropy[c];
            }
        }
        v
    }

    /// `D_x = sum_c tr Phi_c(rho_x) (log Phi_c(rho_x) - log Phi_c(avg))`.
    pub fn divergences(&self, states: &[StateData], avg: &AvgData) -> Vec<f64> {
        states
            .iter()
            .map(|s| {
                (0..self.components.len())
                    .map(|c| {
                        let cross: f64 = s.outputs[c]
                            .iter()
                            .zip(avg.log[c].transpose().iter())
                            .map(|(a, b)| (a * b).re)
                            .sum();
                        -s.entropy[c] - cross
                    })
                    .sum()
            })
            .collect()
    }

    /// `G_x psi_x` with `G_x = sum_c lift(Phi_c^dagger(log Phi_c(rho_x) - log Phi_c(avg)))`.
    pub fn lifted_gradient(&self, psi: &CVector, s: &StateData, avg: &AvgData) -> CVector {
        let mut out = CVector::from_element(psi.len(), ZERO);
        for (c, comp) in self.components.iter().enumerate() {
            let delta = &s.log[c] - &avg.log[c];
            let mut back = CMatrix::zeros(comp.kraus[0].ncols(), comp.kraus[0].ncols());
            for k in &comp.kraus {
                back += k.adjoint() * &delta * k;
            }
            match (&comp.keep, &s.reshaped[c]) {
                (None, _) => out += &back * psi,
                (Some(k), Some(m)) => {
                    let w = &back * m;
                    let flat = CVector::from_fn(k.dk * k.rest, |idx, _| w[(idx / k.rest, idx % k.rest)]);
                    out += reorder_vector(&flat, &k.moved_dims, &k.inverse);
                }
                (Some(_), None) => unreachable!("reshaped input cached for every reduced component"),
            }
        }
        out
    }
}
