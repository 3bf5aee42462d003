//! Density-matrix reference for entanglement swapping.
//!
//! Qubits are ordered `A B C D`: pair `A-B` and pair `C-D`, with `B` and `C`
//! held by the swapping repeater. A Bell measurement on `B C` followed by
//! the outcome's Pauli correction on `D` leaves `A-D` entangled.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{QuantumError, WernerFidelity};
use crate::math;

const TOL_HERMITIAN: f64 = 1e-12;
const TOL_TRACE: f64 = 1e-12;
const TOL_PSD: f64 = 1e-10;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

/// Two-qubit density matrix.
pub type TwoQubitDensityMatrix = DensityMatrix;

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    fn at(&mut self, r: usize, c: usize) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let n = self.dim * other.dim;
        let mut out = DensityMatrix::zeros(n);
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self.get(r1, c1);
                for r2 in 0..other.dim {
                    for c2 in 0..other.dim {
                        *out.at(r1 * other.dim + r2, c1 * other.dim + c2) = a * other.get(r2, c2);
                    }
                }
            }
        }
        out
    }

    /// `<psi| rho |psi>` for a real or complex state vector.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            for c in 0..self.dim {
                acc += psi[r].conj() * self.get(r, c) * psi[c];
            }
        }
        acc.re
    }

    /// Smallest eigenvalue, via the real symmetric embedding `[[Re, -Im], [Im, Re]]`.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim;
        let m = 2 * n;
        let mut a = vec![0.0; m * m];
        for r in 0..n {
            for c in 0..n {
                let z = self.get(r, c);
                a[r * m + c] = z.re;
                a[(r + n) * m + (c + n)] = z.re;
                a[r * m + (c + n)] = -z.im;
                a[(r + n) * m + c] = z.im;
            }
        }
        jacobi_eigenvalues(&mut a, m).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian, unit trace and positive semidefinite within tolerance.
    pub fn check_physical(&self) -> Result<(), QuantumError> {
        for r in 0..self.dim {
            for c in r..self.dim {
                if (self.get(r, c) - self.get(c, r).conj()).norm() > TOL_HERMITIAN {
                    return Err(QuantumError::NotPhysical("not Hermitian"));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(QuantumError::NotPhysical("trace differs from 1"));
        }
        if self.min_eigenvalue() < -TOL_PSD {
            return Err(QuantumError::NotPhysical("negative eigenvalue"));
        }
        Ok(())
    }
}

/// Cyclic Jacobi sweeps on a real symmetric matrix; returns the diagonal.
fn jacobi_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j] * a[i * n + j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// The four Bell states in the basis `|00>, |01>, |10>, |11>`:
/// Phi+, Phi-, Psi+, Psi-.
pub fn bell_states() -> [[Complex64; 4]; 4] {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    [
        [c(h), c(0.0), c(0.0), c(h)],
        [c(h), c(0.0), c(0.0), c(-h)],
        [c(0.0), c(h), c(h), c(0.0)],
        [c(0.0), c(h), c(-h), c(0.0)],
    ]
}

/// Werner state with fidelity `f` to Phi+.
pub fn werner_state(f: WernerFidelity) -> DensityMatrix {
    let bells = bell_states();
    let weights = [f.value(), (1.0 - f.value()) / 3.0, (1.0 - f.value()) / 3.0, (1.0 - f.value()) / 3.0];
    let mut rho = DensityMatrix::zeros(4);
    for (psi, w) in bells.iter().zip(weights) {
        for r in 0..4 {
            for c in 0..4 {
                *rho.at(r, c) += psi[r] * psi[c].conj() * w;
            }
        }
    }
    rho
}

/// Single-qubit Pauli matrices `I, X, Y, Z`.
fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => [[one, o], [o, one]],
        1 => [[o, one], [one, o]],
        2 => [[o, -i], [i, o]],
        _ => [[one, o], [o, -one]],
    }
}

/// Pauli applied to `D` after each Bell outcome on `B C`
/// (Phi+ -> I, Phi- -> Z, Psi+ -> X, Psi- -> Y).
const CORRECTIONS: [usize; 4] = [0, 3, 1, 2];

/// Unnormalized post-measurement state of `A D` for Bell outcome `k`.
fn project_middle(rho: &DensityMatrix, bell: &[Complex64; 4]) -> DensityMatrix {
    let mut out = DensityMatrix::zeros(4);
    let idx = |a: usize, b: usize, c: usize, d: usize| (a << 3) | (b << 2) | (c << 1) | d;
    for a in 0..2 {
        for d in 0..2 {
            for a2 in 0..2 {
                for d2 in 0..2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for bc in 0..4 {
                        let (b, c) = (bc >> 1, bc & 1);
                        let left = bell[bc].conj();
                        if left == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for bc2 in 0..4 {
                            let right = bell[bc2];
                            if right == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            let (b2, c2) = (bc2 >> 1, bc2 & 1);
                            acc += left * rho.get(idx(a, b, c, d), idx(a2, b2, c2, d2)) * right;
                        }
                    }
                    *out.at((a << 1) | d, (a2 << 1) | d2) = acc;
                }
            }
        }
    }
    out
}

/// `(I (x) P) rho (I (x) P)^dagger` for a Pauli `P` on the second qubit.
fn correct_second(rho: &DensityMatrix, k: usize) -> DensityMatrix {
    let p = pauli(k);
    let mut u = DensityMatrix::zeros(4);
    for a in 0..2 {
        for r in 0..2 {
            for c in 0..2 {
                *u.at((a << 1) | r, (a << 1) | c) = p[r][c];
            }
        }
    }
    let mut tmp = DensityMatrix::zeros(4);
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k2 in 0..4 {
                acc += u.get(r, k2) * rho.get(k2, c);
            }
            *tmp.at(r, c) = acc;
        }
    }
    let mut out = DensityMatrix::zeros(4);
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k2 in 0..4 {
                acc += tmp.get(r, k2) * u.get(c, k2).conj();
            }
            *out.at(r, c) = acc;
        }
    }
    out
}

/// Outcome-averaged `A D` state after swapping `A-B` with `C-D`.
pub fn swapped_state(f1: WernerFidelity, f2: WernerFidelity) -> Result<DensityMatrix, QuantumError> {
    let left = werner_state(f1);
    let right = werner_state(f2);
    left.check_physical()?;
    right.check_physical()?;
    let joint = left.kron(&right);
    let mut out = DensityMatrix::zeros(4);
    for (bell, corr) in bell_states().iter().zip(CORRECTIONS) {
        let branch = correct_second(&project_middle(&joint, bell), corr);
        for (o, b) in out.data.iter_mut().zip(&branch.data) {
            *o += *b;
        }
    }
    out.check_physical()?;
    Ok(out)
}

/// Fidelity to Phi+ of the swapped pair, computed from density matrices.
pub fn oracle_swap(f1: WernerFidelity, f2: WernerFidelity) -> Result<WernerFidelity, QuantumError> {
    let out = swapped_state(f1, f2)?;
    Ok(WernerFidelity::new(out.expectation(&bell_states()[0])))
}
