//! Dense SDP with diagonal constraints, and Hermitian eigendecomposition.
//!
//! Solves
//!
//! ```text
//! minimize    tr(C X)
//! subject to  X_kk <= b_k   (bounded indices)
//!             X_kk  = f_k   (fixed indices)
//!             X Hermitian positive semidefinite
//! ```
//!
//! with an infeasible-start primal-dual interior point method (HKM search
//! direction, Mehrotra predictor-corrector). Bounded rows get a slack
//! `s_k >= 0` with dual `z_k >= 0`. The Schur complement only involves the
//! constrained indices, so each iteration costs a few dense `n^3` operations.
//! When `C` is real the whole solve runs in real arithmetic.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense Hermitian matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    upper: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, upper: vec![Complex64::new(0.0, 0.0); n * (n + 1) / 2] }
    }

    /// Build from a dense matrix, checking symmetry to `1e-12` relative.
    pub fn from_dense(a: &DMatrix<Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", n, a.ncols())));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Degenerate("non-finite matrix entry".into()));
        }
        let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        if worst > 1e-12 * scale {
            return Err(Error::NonHermitian(worst / scale));
        }
        let mut h = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = if i == j { Complex64::new(a[(i, i)].re, 0.0) } else { (a[(i, j)] + a[(j, i)].conj()) * 0.5 };
                let k = h.index(i, j);
                h.upper[k] = v;
            }
        }
        Ok(h)
    }

    pub fn from_real(a: &DMatrix<f64>) -> Result<Self> {
        Self::from_dense(&a.map(|x| Complex64::new(x, 0.0)))
    }

    fn index(&self, i: usize, j: usize) -> usize {
        // row i of the upper triangle starts after n + (n-1) + ... + (n-i+1) entries
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i <= j {
            self.upper[self.index(i, j)]
        } else {
            self.upper[self.index(j, i)].conj()
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Entrywise real part.
    pub fn real_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).re)
    }

    pub fn is_real(&self) -> bool {
        self.upper.iter().all(|z| z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Target relative duality gap and relative infeasibility.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep a per-iterate record of primal and certified dual values.
    pub record_history: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, record_history: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Objective of the diagonally rescaled (feasible) primal iterate and the
/// certified dual bound, per iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub primal: f64,
    pub dual_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpResult {
    pub v_star: HermitianMatrix,
    /// `tr(C V*)` at the returned (feasible) matrix.
    pub objective: f64,
    /// Lower bound on the optimum from the final dual iterate. Certified when
    /// every diagonal entry is constrained.
    pub dual_bound: f64,
    /// `objective - dual_bound`.
    pub duality_gap: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub history: Vec<IterateRecord>,
}

#[derive(Debug, Clone, Copy)]
struct Con {
    idx: usize,
    rhs: f64,
    bounded: bool,
}

/// Minimize `tr(G V)` over Hermitian PSD `V` with `V_kk <= b` for every
/// `(k, b)` in `diag_bounds` and `V_kk = f` for every `(k, f)` in `fixed_diag`.
pub fn solve_sdp(g: &HermitianMatrix, diag_bounds: &[(usize, f64)], fixed_diag: &[(usize, f64)], opts: &SdpOptions) -> Result<SdpResult> {
    let n = g.dim();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let mut seen = vec![false; n];
    let mut cons = Vec::new();
    for (&(idx, rhs), bounded) in diag_bounds.iter().map(|c| (c, true)).chain(fixed_diag.iter().map(|c| (c, false))) {
        if idx >= n {
            return Err(Error::Dimension(format!("constraint index {idx} outside {n}x{n} matrix")));
        }
        if seen[idx] {
            return Err(Error::Dimension(format!("index {idx} constrained twice")));
        }
        if !(rhs > 0.0 && rhs.is_finite()) {
            return Err(Error::Degenerate(format!("diagonal bound {rhs} at index {idx} must be positive")));
        }
        seen[idx] = true;
        cons.push(Con { idx, rhs, bounded });
    }
    cons.sort_by_key(|c| c.idx);
    let all_constrained = seen.iter().all(|&s| s);

    if g.is_real() {
        let raw = ipm(&g.real_part(), &cons, all_constrained, opts);
        finish(raw.map(|x| Complex64::new(x, 0.0)), opts)
    } else {
        let raw = ipm(&g.to_dense(), &cons, all_constrained, opts);
        finish(raw, opts)
    }
}

fn finish(raw: Raw<Complex64>, opts: &SdpOptions) -> Result<SdpResult> {
    // measured on the normalised cost so the gap does not depend on the scale of G
    let (po, du) = (raw.objective / raw.scale, raw.dual_bound / raw.scale);
    let relative_gap = (po - du) / (1.0 + po.abs() + du.abs());
    let status = if raw.unbounded {
        SdpStatus::Infeasible
    } else if raw.converged || relative_gap <= opts.tol {
        SdpStatus::Optimal
    } else {
        SdpStatus::MaxIter
    };
    Ok(SdpResult {
        v_star: HermitianMatrix::from_dense(&raw.x.map(|z| z))?,
        objective: raw.objective,
        dual_bound: raw.dual_bound,
        duality_gap: raw.objective - raw.dual_bound,
        relative_gap,
        iterations: raw.iterations,
        status,
        history: raw.history,
    })
}

struct Raw<T: nalgebra::Scalar> {
    x: DMatrix<T>,
    scale: f64,
    objective: f64,
    dual_bound: f64,
    iterations: usize,
    converged: bool,
    unbounded: bool,
    history: Vec<IterateRecord>,
}

impl<T: Field> Raw<T> {
    fn map<U: Field>(self, f: impl Fn(T) -> U) -> Raw<U> {
        Raw {
            x: self.x.map(f),
            scale: self.scale,
            objective: self.objective,
            dual_bound: self.dual_bound,
            iterations: self.iterations,
            converged: self.converged,
            unbounded: self.unbounded,
            history: self.history,
        }
    }
}

/// Scalar types the solver runs on.
pub trait Field: ComplexField<RealField = f64> + Copy {
    fn positive_definite(a: DMatrix<Self>) -> bool;
}

impl Field for f64 {
    fn positive_definite(a: DMatrix<Self>) -> bool {
        a.cholesky().is_some()
    }
}

impl Field for Complex64 {
    fn positive_definite(a: DMatrix<Self>) -> bool {
        upper_cholesky_ok(a)
    }
}

fn hermitize<T: Field>(a: &mut DMatrix<T>) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = T::from_real(a[(i, i)].real());
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conjugate()) * T::from_real(0.5);
            a[(i, j)] = v;
            a[(j, i)] = v.conjugate();
        }
    }
}

/// `Re tr(A B)` for Hermitian `A`, `B`.
fn trace_prod<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (*x * y.conjugate()).real()).sum()
}

/// Largest `alpha` with `X + alpha dX` PSD, given the Cholesky factor of `X`.
fn max_step<T: Field>(l: &DMatrix<T>, dx: &DMatrix<T>) -> f64 {
    let Some(a) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(mut w) = l.solve_lower_triangular(&a.adjoint()) else { return 0.0 };
    hermitize(&mut w);
    let lmin = w.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

/// Above this size the PSD step length is found by Cholesky backtracking
/// instead of an eigenvalue computation.
const EXACT_STEP_MAX_DIM: usize = 32;

/// A step `alpha <= cap` with `X + alpha dX` positive definite, close to the
/// largest such step.
fn psd_step<T: Field>(x: &DMatrix<T>, l: &DMatrix<T>, dx: &DMatrix<T>, cap: f64) -> f64 {
    if x.nrows() <= EXACT_STEP_MAX_DIM {
        return max_step(l, dx).min(cap);
    }
    let mut a = cap;
    for _ in 0..200 {
        if is_positive_definite(x + dx * T::from_real(a)) {
            return a;
        }
        a *= 0.9;
    }
    0.0
}

/// Cholesky test that rejects non-positive real pivots. nalgebra's complex
/// factorisation takes complex square roots and never fails, so only the real
/// case can use it.
fn is_positive_definite<T: Field>(a: DMatrix<T>) -> bool {
    T::positive_definite(a)
}

fn upper_cholesky_ok<T: Field>(mut u: DMatrix<T>) -> bool {
    // column-major storage: column j of the upper factor is contiguous
    let n = u.nrows();
    for j in 0..n {
        for i in 0..=j {
            let (ci, cj) = (u.column(i), u.column(j));
            let mut v = cj[i];
            for k in 0..i {
                v -= ci[k].conjugate() * cj[k];
            }
            if i == j {
                let d = v.real();
                if !(d > 0.0) {
                    return false;
                }
                u[(j, j)] = T::from_real(d.sqrt());
            } else {
                u[(i, j)] = v * T::from_real(1.0 / u[(i, i)].real());
            }
        }
    }
    true
}

fn max_step_vec(s: &[f64], ds: &[f64]) -> f64 {
    s.iter().zip(ds).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(f64::INFINITY, f64::min)
}

fn min_eigenvalue<T: Field>(a: &DMatrix<T>) -> f64 {
    let mut a = a.clone();
    hermitize(&mut a);
    a.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Rescale rows/columns so every constrained diagonal entry is feasible.
fn feasible_copy<T: Field>(x: &DMatrix<T>, cons: &[Con]) -> DMatrix<T> {
    let n = x.nrows();
    let mut d = vec![1.0; n];
    for c in cons {
        let xkk = x[(c.idx, c.idx)].real();
        d[c.idx] = if xkk <= 0.0 {
            if c.bounded {
                1.0
            } else {
                0.0
            }
        } else if c.bounded {
            (c.rhs / xkk).sqrt().min(1.0)
        } else {
            (c.rhs / xkk).sqrt()
        };
    }
    let mut out = DMatrix::from_fn(n, n, |i, j| x[(i, j)] * T::from_real(d[i] * d[j]));
    // a fixed entry whose row collapsed to zero is restored on the diagonal
    for c in cons {
        if !c.bounded && x[(c.idx, c.idx)].real() <= 0.0 {
            out[(c.idx, c.idx)] = T::from_real(c.rhs);
        }
    }
    hermitize(&mut out);
    out
}

/// Lower bound on the optimum implied by multipliers `y`.
fn dual_bound<T: Field>(c: &DMatrix<T>, y: &[f64], cons: &[Con], all_constrained: bool) -> f64 {
    let mut zy = c.clone();
    let mut base = 0.0;
    let mut trace_cap = 0.0;
    for (k, con) in cons.iter().enumerate() {
        zy[(con.idx, con.idx)] -= T::from_real(y[k]);
        base += if con.bounded { (y[k] * con.rhs).min(0.0) } else { y[k] * con.rhs };
        trace_cap += con.rhs;
    }
    if !all_constrained {
        return cons.iter().zip(y).map(|(c, y)| c.rhs * y).sum();
    }
    let lmin = min_eigenvalue(&zy);
    base + lmin.min(0.0) * trace_cap
}

fn ipm<T: Field>(c_in: &DMatrix<T>, cons: &[Con], all_constrained: bool, opts: &SdpOptions) -> Raw<T> {
    let n = c_in.nrows();
    let m = cons.len();
    let cnorm = c_in.iter().map(|z| z.modulus_squared()).sum::<f64>().sqrt();
    if cnorm == 0.0 {
        let mut x = DMatrix::<T>::zeros(n, n);
        for con in cons {
            x[(con.idx, con.idx)] = T::from_real(if con.bounded { 0.0 } else { con.rhs });
        }
        return Raw { x, scale: 1.0, objective: 0.0, dual_bound: 0.0, iterations: 0, converged: true, unbounded: false, history: vec![] };
    }
    let c = c_in.map(|z| z * T::from_real(1.0 / cnorm));
    let bounded: Vec<usize> = (0..m).filter(|&k| cons[k].bounded).collect();
    let mb = bounded.len();
    let rhs_norm = cons.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
    let rhs_max = cons.iter().map(|c| c.rhs).fold(0.0, f64::max);

    let nf = n as f64;
    let xi = (nf.sqrt()).max(1.0) * (1.0 + rhs_max);
    let eta = nf.sqrt().max(1.0);
    let mut x = DMatrix::<T>::identity(n, n) * T::from_real(xi);
    let mut zmat = DMatrix::<T>::identity(n, n) * T::from_real(eta);
    let mut y = vec![0.0; m];
    let mut s: Vec<f64> = bounded.iter().map(|_| xi).collect();
    let mut z: Vec<f64> = bounded.iter().map(|_| eta).collect();

    let mut history = Vec::new();
    let mut converged = false;
    let mut unbounded = false;
    let mut iterations = 0;
    let mut best: Option<(f64, DMatrix<T>, Vec<f64>)> = None;

    for it in 0..opts.max_iter {
        iterations = it;
        // residuals
        let mut rp = vec![0.0; m];
        for (k, con) in cons.iter().enumerate() {
            rp[k] = con.rhs - x[(con.idx, con.idx)].real();
        }
        for (b, &k) in bounded.iter().enumerate() {
            rp[k] -= s[b];
        }
        let mut rd = &c - &zmat;
        for (k, con) in cons.iter().enumerate() {
            rd[(con.idx, con.idx)] -= T::from_real(y[k]);
        }
        let rz: Vec<f64> = bounded.iter().enumerate().map(|(b, &k)| -y[k] - z[b]).collect();

        let pobj = trace_prod(&c, &x);
        let dobj: f64 = cons.iter().zip(&y).map(|(c, y)| c.rhs * y).sum();
        let comp = trace_prod(&x, &zmat) + s.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let mu = comp / (nf + mb as f64);
        let gap = comp.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + rhs_norm);
        let dinf = (rd.iter().map(|v| v.modulus_squared()).sum::<f64>() + rz.iter().map(|v| v * v).sum::<f64>()).sqrt() / 2.0;

        if opts.record_history {
            let xf = feasible_copy(&x, cons);
            history
                .push(IterateRecord { primal: trace_prod(&c, &xf) * cnorm, dual_bound: dual_bound(&c, &y, cons, all_constrained) * cnorm });
        }
        let merit = gap.max(pinf).max(dinf);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone()));
        }
        if merit <= opts.tol {
            converged = true;
            break;
        }
        if x.iter().map(|v| v.modulus()).fold(0.0, f64::max) > 1e12 {
            unbounded = true;
            break;
        }

        let Some(zchol) = zmat.clone().cholesky() else { break };
        let Some(xchol) = x.clone().cholesky() else { break };
        let lx = xchol.l();
        let lz = zchol.l();
        let zinv = match lz.solve_lower_triangular(&DMatrix::<T>::identity(n, n)) {
            Some(li) => li.adjoint() * li,
            None => break,
        };

        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (a, ca) in cons.iter().enumerate() {
            for (b, cb) in cons.iter().enumerate() {
                schur[(a, b)] = (x[(ca.idx, cb.idx)] * zinv[(cb.idx, ca.idx)]).real();
            }
        }
        for (b, &k) in bounded.iter().enumerate() {
            schur[(k, k)] += s[b] / z[b];
        }
        if schur.iter().any(|v| !v.is_finite()) {
            break;
        }
        let schur = {
            let mut sc = schur;
            let mut bump = 1e-14 * (1.0 + sc.diagonal().amax());
            let mut out = None;
            for _ in 0..60 {
                if let Some(ch) = sc.clone().cholesky() {
                    out = Some(ch);
                    break;
                }
                for k in 0..m {
                    sc[(k, k)] += bump;
                }
                bump *= 4.0;
            }
            match out {
                Some(ch) => ch,
                None => break,
            }
        };
        let x_rd_zinv = &x * &rd * &zinv;

        struct Dir<T: nalgebra::Scalar> {
            dx: DMatrix<T>,
            dz: DMatrix<T>,
            dy: Vec<f64>,
            ds: Vec<f64>,
            dzv: Vec<f64>,
        }

        let direction = |sigma_mu: f64, corr: Option<(&DMatrix<T>, &[f64])>| -> Dir<T> {
            let mut rc = &zinv * T::from_real(sigma_mu) - &x;
            if let Some((cm, _)) = corr {
                rc -= cm;
            }
            let rmat = &rc - &x_rd_zinv;
            let mut rhs = DVector::<f64>::zeros(m);
            for (k, con) in cons.iter().enumerate() {
                rhs[k] = rp[k] - rmat[(con.idx, con.idx)].real();
            }
            for (b, &k) in bounded.iter().enumerate() {
                let mut rck = sigma_mu - s[b] * z[b];
                if let Some((_, lp)) = corr {
                    rck -= lp[b];
                }
                rhs[k] -= (rck - s[b] * rz[b]) / z[b];
            }
            let dyv = schur.solve(&rhs);
            let dy: Vec<f64> = dyv.iter().cloned().collect();
            let mut dz = rd.clone();
            for (k, con) in cons.iter().enumerate() {
                dz[(con.idx, con.idx)] -= T::from_real(dy[k]);
            }
            let mut dx = rc - &x * &dz * &zinv;
            hermitize(&mut dx);
            let ds: Vec<f64> = bounded.iter().map(|&k| rp[k] - dx[(cons[k].idx, cons[k].idx)].real()).collect();
            let dzv: Vec<f64> = bounded.iter().enumerate().map(|(b, &k)| rz[b] - dy[k]).collect();
            Dir { dx, dz, dy, ds, dzv }
        };

        let steps = |d: &Dir<T>, cap: f64| -> (f64, f64) {
            let ap = psd_step(&x, &lx, &d.dx, max_step_vec(&s, &d.ds).min(cap));
            let ad = psd_step(&zmat, &lz, &d.dz, max_step_vec(&z, &d.dzv).min(cap));
            (ap, ad)
        };

        // predictor
        let aff = direction(0.0, None);
        let (ap, ad) = steps(&aff, 1.0);
        let xa = &x + &aff.dx * T::from_real(ap);
        let za = &zmat + &aff.dz * T::from_real(ad);
        let comp_aff = trace_prod(&xa, &za) + (0..mb).map(|b| (s[b] + ap * aff.ds[b]) * (z[b] + ad * aff.dzv[b])).sum::<f64>();
        let mu_aff = comp_aff / (nf + mb as f64);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let cm = &aff.dx * &aff.dz * &zinv;
        let lp: Vec<f64> = (0..mb).map(|b| aff.ds[b] * aff.dzv[b]).collect();
        let dir = direction(sigma * mu, Some((&cm, &lp)));
        let tau = 0.98;
        let (ap, ad) = steps(&dir, 1.0 / tau);
        let (ap, ad) = ((tau * ap).min(1.0), (tau * ad).min(1.0));
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }

        x += &dir.dx * T::from_real(ap);
        hermitize(&mut x);
        for (v, d) in s.iter_mut().zip(&dir.ds) {
            *v += ap * d;
        }
        zmat += &dir.dz * T::from_real(ad);
        hermitize(&mut zmat);
        for (v, d) in y.iter_mut().zip(&dir.dy) {
            *v += ad * d;
        }
        for (v, d) in z.iter_mut().zip(&dir.dzv) {
            *v += ad * d;
        }
        iterations = it + 1;
    }

    let (x_out, y_out) = if converged {
        (x, y)
    } else {
        let (_, bx, by) = best.expect("at least one iterate");
        (bx, by)
    };
    let xf = feasible_copy(&x_out, cons);
    Raw {
        objective: trace_prod(&c, &xf) * cnorm,
        dual_bound: dual_bound(&c, &y_out, cons, all_constrained) * cnorm,
        x: xf,
        scale: cnorm,
        iterations,
        converged,
        unbounded,
        history,
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

pub fn hermitian_eig(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let (vals, vecs): (Vec<f64>, DMatrix<Complex64>) = if a.is_real() {
        let e = SymmetricEigen::new(a.real_part());
        (e.eigenvalues.iter().cloned().collect(), e.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let e = SymmetricEigen::new(a.to_dense());
        (e.eigenvalues.iter().cloned().collect(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn psd_min_eig(h: &HermitianMatrix) -> f64 {
        hermitian_eig(h).unwrap().values.last().cloned().unwrap()
    }

    #[test]
    fn packed_storage_round_trips() {
        let a = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(i as f64, 0.0)
            } else if i < j {
                Complex64::new(i as f64 + 1.0, j as f64)
            } else {
                Complex64::new(j as f64 + 1.0, -(i as f64))
            }
        });
        let h = HermitianMatrix::from_dense(&a).unwrap();
        assert_eq!(h.to_dense(), a);
        assert!(!h.is_real());
        let mut bad = a.clone();
        bad[(0, 1)] += Complex64::new(1e-3, 0.0);
        assert!(matches!(HermitianMatrix::from_dense(&bad), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn negative_identity_saturates_bounds() {
        let g = HermitianMatrix::from_real(&(-DMatrix::<f64>::identity(2, 2))).unwrap();
        let r = solve_sdp(&g, &[(0, 1.0), (1, 1.0)], &[], &SdpOptions::default()).unwrap();
        assert_eq!(r.status, SdpStatus::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-5, "{}", r.objective);
        let v = r.v_star.real_part();
        assert!((v[(0, 0)] - 1.0).abs() < 1e-5 && (v[(1, 1)] - 1.0).abs() < 1e-5);
        assert!(v[(0, 1)].abs() < 1e-4);
    }

    #[test]
    fn psd_cost_drives_free_block_to_zero() {
        let g = HermitianMatrix::from_real(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 0.0]))).unwrap();
        let r = solve_sdp(&g, &[(0, 1.0), (1, 1.0), (2, 1.0)], &[(3, 1.0)], &SdpOptions::default()).unwrap();
        assert!(r.objective.abs() < 1e-5);
        let v = r.v_star.real_part();
        assert!((v[(3, 3)] - 1.0).abs() < 1e-12);
        for k in 0..3 {
            assert!(v[(k, k)] < 1e-5);
        }
    }

    #[test]
    fn bad_constraints_rejected() {
        let g = HermitianMatrix::zeros(3);
        let o = SdpOptions::default();
        assert!(solve_sdp(&g, &[(3, 1.0)], &[], &o).is_err());
        assert!(solve_sdp(&g, &[(0, 1.0)], &[(0, 1.0)], &o).is_err());
        assert!(solve_sdp(&g, &[(0, 0.0)], &[], &o).is_err());
        assert!(solve_sdp(&HermitianMatrix::zeros(0), &[], &[], &o).is_err());
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn history_respects_weak_duality_and_result_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 6;
            let g = HermitianMatrix::from_real(&random_sym(&mut rng, n)).unwrap();
            let bounds: Vec<(usize, f64)> = (0..n - 1).map(|k| (k, 0.3)).collect();
            let opts = SdpOptions { record_history: true, ..Default::default() };
            let r = solve_sdp(&g, &bounds, &[(n - 1, 1.0)], &opts).unwrap();
            assert_eq!(r.status, SdpStatus::Optimal);
            assert!(psd_min_eig(&r.v_star) > -1e-9);
            let v = r.v_star.real_part();
            for k in 0..n - 1 {
                assert!(v[(k, k)] <= 0.3 + 1e-9);
            }
            assert!((v[(n - 1, n - 1)] - 1.0).abs() < 1e-9);
            // every certified bound sits below the final feasible objective
            for h in &r.history {
                assert!(h.dual_bound <= r.objective + 1e-7 * (1.0 + r.objective.abs()));
            }
            assert!(r.dual_bound <= r.objective + 1e-9);
        }
    }

    /// Factorised `V = R R^T` with projected gradient on the row norms.
    fn burer_monteiro(g: &DMatrix<f64>, bound: f64, rng: &mut ChaCha8Rng) -> f64 {
        let n = g.nrows();
        let project = |r: &mut DMatrix<f64>| {
            for i in 0..n {
                let norm = r.row(i).norm();
                let target = if i == n - 1 { 1.0 } else { norm.min(bound.sqrt()) };
                if norm > 0.0 {
                    let s = target / norm;
                    r.row_mut(i).scale_mut(s);
                } else if i == n - 1 {
                    r[(i, 0)] = 1.0;
                }
            }
        };
        let gnorm = g.norm();
        let mut best = f64::INFINITY;
        for _ in 0..8 {
            let mut r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
            project(&mut r);
            let step = 0.2 / gnorm;
            for _ in 0..6000 {
                let grad = g * &r * 2.0;
                r -= grad * step;
                project(&mut r);
            }
            best = best.min((g * &r * r.transpose()).trace());
        }
        best
    }

    #[test]
    fn matches_factorised_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bound = (std::f64::consts::PI / 6.0).powi(2);
        for _ in 0..100 {
            let g = random_sym(&mut rng, 5);
            let h = HermitianMatrix::from_real(&g).unwrap();
            let r = solve_sdp(
                &h,
                &(0..4).map(|k| (k, bound)).collect::<Vec<_>>(),
                &[(4, 1.0)],
                &SdpOptions { tol: 1e-9, ..Default::default() },
            )
            .unwrap();
            let oracle = burer_monteiro(&g, bound, &mut rng);
            assert!((r.objective - oracle).abs() <= 1e-4 * (1.0 + oracle.abs()), "sdp {} oracle {}", r.objective, oracle);
        }
    }

    #[test]
    fn complex_and_real_embeddings_agree() {
        // a complex Hermitian SDP equals the real SDP on [[Re, -Im], [Im, Re]] at half the cost
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4;
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let c = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let re = c.map(|z| z.re);
        let im = c.map(|z| z.im);
        let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&re);
        big.view_mut((n, n), (n, n)).copy_from(&re);
        big.view_mut((n, 0), (n, n)).copy_from(&im);
        big.view_mut((0, n), (n, n)).copy_from(&(-&im));
        let o = SdpOptions { tol: 1e-9, ..Default::default() };
        let rc = solve_sdp(&HermitianMatrix::from_dense(&c).unwrap(), &(0..n).map(|k| (k, 1.0)).collect::<Vec<_>>(), &[], &o).unwrap();
        let rr = solve_sdp(&HermitianMatrix::from_real(&big).unwrap(), &(0..2 * n).map(|k| (k, 1.0)).collect::<Vec<_>>(), &[], &o).unwrap();
        assert!((2.0 * rc.objective - rr.objective).abs() < 1e-6 * (1.0 + rr.objective.abs()));
    }

    #[test]
    fn eig_examples() {
        let id = HermitianMatrix::from_real(&DMatrix::identity(3, 3)).unwrap();
        let e = hermitian_eig(&id).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let u = DVector::from_vec(vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0), Complex64::new(0.5, 0.0)]);
        let r1 = HermitianMatrix::from_dense(&(&u * u.adjoint())).unwrap();
        let e = hermitian_eig(&r1).unwrap();
        assert!((e.values[0] - u.norm_squared()).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12 && e.values[2].abs() < 1e-12);
        let p = e.vectors.column(0);
        assert!(((p.adjoint() * &u)[0].norm() - u.norm()).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let e = hermitian_eig(&HermitianMatrix::from_dense(&a).unwrap()).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let d = DMatrix::from_diagonal(&DVector::from_iterator(n, e.values.iter().map(|&v| Complex64::new(v, 0.0))));
        let back = &e.vectors * d * e.vectors.adjoint();
        assert!((back - &a).norm() < 1e-10);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - DMatrix::<Complex64>::identity(n, n)).norm() < 1e-10);
    }
}
