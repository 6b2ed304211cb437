//! Extension search: `rho_ABC` is generated from a fixed purification
//! `Psi` of `rho_AB` and an isometry `V: E -> C ⊗ K`, so every iterate is a
//! valid extension.

use crate::entropy::spectrum_entropy;
use crate::qcore::linalg::{eigh, hermitian_fn, CMatrix, C64};
use crate::qcore::random::{haar_isometry, orthonormalize, rng};

const LOG_FLOOR: f64 = 1e-13;
const ARMIJO: f64 = 1e-4;
const PATIENCE: usize = 5;

pub(crate) struct ExtProblem {
    /// `dAB x dE` purification factor, `rho_AB = Psi Psi^dagger`
    pub psi: CMatrix,
    pub da: usize,
    pub db: usize,
    pub dc: usize,
    pub r: usize,
}

fn ent_log(x: &CMatrix) -> (f64, CMatrix) {
    let (vals, vecs) = eigh(x);
    (spectrum_entropy(&vals), hermitian_fn(&vals, &vecs, |v| v.max(LOG_FLOOR).log2()))
}

impl ExtProblem {
    pub fn v_rows(&self) -> usize {
        self.dc * self.r
    }

    pub fn de(&self) -> usize {
        self.psi.ncols()
    }

    pub fn random_isometry(&self, seed: u64) -> CMatrix {
        let mut g = rng(seed);
        haar_isometry(self.v_rows(), self.de(), &mut g)
    }

    pub fn build_m(&self, v: &CMatrix) -> CMatrix {
        let w = &self.psi * v.transpose();
        let dab = self.da * self.db;
        CMatrix::from_fn(dab * self.dc, self.r, |row, k| {
            let (ab, c) = (row / self.dc, row % self.dc);
            w[(ab, c * self.r + k)]
        })
    }

    /// Row indices of `M` for fixed `b` (rows ordered `(a, c)`).
    fn rows_fixed_b(&self, b: usize) -> Vec<usize> {
        (0..self.da)
            .flat_map(|a| (0..self.dc).map(move |c| (a, c)))
            .map(|(a, c)| (a * self.db + b) * self.dc + c)
            .collect()
    }

    fn rows_fixed_a(&self, a: usize) -> Vec<usize> {
        (0..self.db * self.dc).map(|bc| a * self.db * self.dc + bc).collect()
    }

    fn rows_fixed_ab(&self, ab: usize) -> Vec<usize> {
        (0..self.dc).map(|c| ab * self.dc + c).collect()
    }

    fn gather(m: &CMatrix, rows: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), m.ncols(), |i, k| m[(rows[i], k)])
    }

    /// `(value, d value / d conj(M))` with value `½ I(A;B|C)`.
    fn value_and_grad(&self, m: &CMatrix, want_grad: bool) -> (f64, Option<CMatrix>) {
        let dac = self.da * self.dc;
        let dbc = self.db * self.dc;
        let by_b: Vec<Vec<usize>> = (0..self.db).map(|b| self.rows_fixed_b(b)).collect();
        let by_a: Vec<Vec<usize>> = (0..self.da).map(|a| self.rows_fixed_a(a)).collect();
        let by_ab: Vec<Vec<usize>> = (0..self.da * self.db).map(|ab| self.rows_fixed_ab(ab)).collect();

        let mut rho_ac = CMatrix::zeros(dac, dac);
        let blocks_b: Vec<CMatrix> = by_b.iter().map(|r| Self::gather(m, r)).collect();
        for mb in &blocks_b {
            rho_ac += mb * mb.adjoint();
        }
        let mut rho_bc = CMatrix::zeros(dbc, dbc);
        let blocks_a: Vec<CMatrix> = by_a.iter().map(|r| Self::gather(m, r)).collect();
        for ma in &blocks_a {
            rho_bc += ma * ma.adjoint();
        }
        let mut rho_c = CMatrix::zeros(self.dc, self.dc);
        let blocks_ab: Vec<CMatrix> = by_ab.iter().map(|r| Self::gather(m, r)).collect();
        for mab in &blocks_ab {
            rho_c += mab * mab.adjoint();
        }
        let gram = m.adjoint() * m;

        let (s_ac, l_ac) = ent_log(&rho_ac);
        let (s_bc, l_bc) = ent_log(&rho_bc);
        let (s_c, l_c) = ent_log(&rho_c);
        let (s_abc, l_gram) = ent_log(&gram);
        let value = 0.5 * (s_ac + s_bc - s_abc - s_c);
        if !want_grad {
            return (value, None);
        }

        let mut g = m * &l_gram;
        for (rows, mb) in by_b.iter().zip(&blocks_b) {
            let t = &l_ac * mb;
            for (i, &row) in rows.iter().enumerate() {
                for k in 0..self.r {
                    g[(row, k)] -= t[(i, k)];
                }
            }
        }
        for (rows, ma) in by_a.iter().zip(&blocks_a) {
            let t = &l_bc * ma;
            for (i, &row) in rows.iter().enumerate() {
                for k in 0..self.r {
                    g[(row, k)] -= t[(i, k)];
                }
            }
        }
        for (rows, mab) in by_ab.iter().zip(&blocks_ab) {
            let t = &l_c * mab;
            for (i, &row) in rows.iter().enumerate() {
                for k in 0..self.r {
                    g[(row, k)] += t[(i, k)];
                }
            }
        }
        (value, Some(g.scale(0.5)))
    }

    pub fn eval(&self, v: &CMatrix) -> f64 {
        self.value_and_grad(&self.build_m(v), false).0
    }

    /// Euclidean gradient with respect to `conj(V)`.
    fn grad_v(&self, g_m: &CMatrix) -> CMatrix {
        let dab = self.da * self.db;
        let mut out = CMatrix::zeros(self.v_rows(), self.de());
        for c in 0..self.dc {
            for k in 0..self.r {
                let row = c * self.r + k;
                for e in 0..self.de() {
                    let mut acc = C64::new(0.0, 0.0);
                    for ab in 0..dab {
                        acc += g_m[(ab * self.dc + c, k)] * self.psi[(ab, e)].conj();
                    }
                    out[(row, e)] = acc;
                }
            }
        }
        out
    }

    /// Riemannian descent from `v`; returns the final isometry, value and
    /// iteration count.
    pub fn descend(&self, mut v: CMatrix, tol: f64, max_iters: usize) -> (CMatrix, f64, usize) {
        let m = self.build_m(&v);
        let (mut value, _) = self.value_and_grad(&m, false);
        let mut step = 1.0;
        let mut quiet = 0;
        let mut iters = 0;
        while iters < max_iters {
            iters += 1;
            let m = self.build_m(&v);
            let (_, g) = self.value_and_grad(&m, true);
            let g = self.grad_v(&g.expect("gradient requested"));
            let vg = v.adjoint() * &g;
            let xi = &g - &v * (&vg + vg.adjoint()).scale(0.5);
            let norm2 = xi.norm_squared();
            if norm2 < 1e-24 {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let cand = orthonormalize(&v - xi.scale(step));
                let cv = self.eval(&cand);
                if cv <= value - ARMIJO * step * norm2 {
                    let gain = value - cv;
                    v = cand;
                    value = cv;
                    accepted = true;
                    step = (step * 2.0).min(1e3);
                    quiet = if gain < tol { quiet + 1 } else { 0 };
                    break;
                }
                step *= 0.5;
            }
            if !accepted || quiet >= PATIENCE {
                break;
            }
        }
        (v, value, iters)
    }

    /// `tr_C rho_ABC`, which must equal `rho_AB`.
    pub fn marginal(&self, m: &CMatrix) -> CMatrix {
        let dab = self.da * self.db;
        let mut out = CMatrix::zeros(dab, dab);
        for c in 0..self.dc {
            let rows: Vec<usize> = (0..dab).map(|ab| ab * self.dc + c).collect();
            let mc = Self::gather(m, &rows);
            out += &mc * mc.adjoint();
        }
        out
    }
}
