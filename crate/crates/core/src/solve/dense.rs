//! Galerkin oracle on a finite Fourier basis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::collections::HashMap;

use super::ORACLE_CAP;
use crate::error::{Error, Result};
use crate::fourier::{box_modes, dot, l1_modes, Fourier};

#[derive(Clone, Debug)]
pub struct Basis {
    modes: Vec<Vec<i32>>,
    index: HashMap<Vec<i32>, usize>,
}

impl Basis {
    pub fn from_modes(mut modes: Vec<Vec<i32>>) -> Self {
        modes.sort();
        modes.dedup();
        let index = modes.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Basis { modes, index }
    }

    /// `|k_d| <= kmax` for every component.
    pub fn boxed(n: usize, kmax: i32) -> Self {
        Basis::from_modes(box_modes(n, kmax))
    }

    pub fn l1_ball(n: usize, kmax: u32) -> Self {
        Basis::from_modes(l1_modes(n, kmax))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Vec<i32>] {
        &self.modes
    }

    pub fn contains(&self, k: &[i32]) -> bool {
        self.index.contains_key(k)
    }

    pub fn project(&self, f: &Fourier) -> Fourier {
        f.retain(|k| self.contains(k))
    }
}

/// Dense LU solve of `(i omega . d + lam + mu) x = rhs` restricted to `basis`.
pub fn dense_solve(omega: &[f64], lam: C64, mu: &Fourier, rhs: &Fourier, basis: &Basis) -> Result<Fourier> {
    let nb = basis.len();
    if nb > ORACLE_CAP {
        return Err(Error::OracleSize(nb));
    }
    let n = omega.len();
    let mut a = DMatrix::<C64>::zeros(nb, nb);
    let mut b = DVector::<C64>::zeros(nb);
    let mut shifted = vec![0i32; n];
    for (row, k) in basis.modes.iter().enumerate() {
        a[(row, row)] += lam - dot(k, omega);
        b[row] = rhs.get(k);
        for (q, c) in mu.iter() {
            for d in 0..n {
                shifted[d] = k[d] - q[d];
            }
            if let Some(&col) = basis.index.get(&shifted) {
                a[(row, col)] += c;
            }
        }
    }
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    let mut x = Fourier::zero(n);
    for (i, k) in basis.modes.iter().enumerate() {
        if !(sol[i].re.is_finite() && sol[i].im.is_finite()) {
            return Err(Error::Singular);
        }
        x.add(k.clone(), sol[i]);
    }
    Ok(x)
}

/// `(i omega . d + lam + mu) x` projected onto `basis`, computed by sparse convolution.
pub fn apply_operator(omega: &[f64], lam: C64, mu: &Fourier, x: &Fourier, basis: &Basis) -> Fourier {
    let lin = x.omega_deriv(omega).scale(C64::i()).plus(&x.scale(lam));
    basis.project(&lin.plus(&mu.mul(x)))
}
