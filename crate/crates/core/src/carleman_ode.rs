//! Truncated Carleman extension of an ODE `Δẋ = Σ_j A_1_j Δx^[j]`.

use crate::error::{Error, Result};
use crate::kron::{carleman_block, MonomialBasis};
use crate::matrix::Mat;
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanOdeSystem<T> {
    pub order: usize,
    pub n: usize,
    /// Block upper-triangular matrix on `[Δx, Δx^[2], .., Δx^[order]]`.
    pub a_nord: Mat<T>,
    pub basis: MonomialBasis,
}

pub fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(order))
    }
}

/// Lifted dimension `n + n² + .. + n^order`.
pub fn lifted_dim(n: usize, order: usize) -> usize {
    (1..=order).map(|k| n.pow(k as u32)).sum()
}

/// Assembles `A_nord` from the first-row blocks `a1[j-1] = A_1_j`.
pub fn build_extended_ode<T: Scalar>(a1: &[Mat<T>], order: usize) -> Result<CarlemanOdeSystem<T>> {
    check_order(order)?;
    let first = a1
        .first()
        .ok_or_else(|| Error::MissingBlock("A_1_1".into()))?;
    let n = first.rows();
    if a1.len() < order {
        return Err(Error::MissingBlock(format!("A_1_{}", a1.len() + 1)));
    }
    for (j, a) in a1.iter().take(order).enumerate() {
        let want = (n, n.pow(j as u32 + 1));
        if a.shape() != want {
            return Err(Error::shape(format!(
                "A_1_{} is {}x{}, expected {}x{}",
                j + 1,
                a.rows(),
                a.cols(),
                want.0,
                want.1
            )));
        }
    }
    let basis = MonomialBasis::state_powers(n, order);
    let mut a_nord = Mat::zeros(basis.len(), basis.len());
    for i in 1..=order {
        for j in i..=order {
            let block = carleman_block(&a1[..order], i, j, n)?;
            a_nord.set_block(basis.family_offset(i - 1), basis.family_offset(j - 1), &block);
        }
    }
    Ok(CarlemanOdeSystem {
        order,
        n,
        a_nord,
        basis,
    })
}
