//! Two-pole rational matrix functions `L(z) = B1(z) B2(z)`.

use serde::{Deserialize, Serialize};

use crate::divisor::ElementaryDivisor;
use crate::error::{LaxError, Result};
use crate::matcore::{CMatrix, C64};

/// `L(z) = first(z) * second(z)` with both factors built on the same `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalMatrixFunction {
    pub first: ElementaryDivisor,
    pub second: ElementaryDivisor,
}

impl RationalMatrixFunction {
    pub fn new(first: ElementaryDivisor, second: ElementaryDivisor) -> Result<Self> {
        if !first.shares_gauge(&second, 1e-12) {
            return Err(LaxError::GaugeMismatch);
        }
        Ok(Self { first, second })
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn poles(&self) -> [C64; 2] {
        [self.first.pole(), self.second.pole()]
    }

    pub fn zetas(&self) -> [C64; 2] {
        [self.first.zeta(), self.second.zeta()]
    }

    /// Poles and zeros together, for picking evaluation points.
    pub fn special_points(&self) -> Vec<C64> {
        let [z1, z2] = self.poles();
        let [e1, e2] = self.zetas();
        vec![z1, z2, e1, e2]
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        Ok(&self.first.eval(z)? * &self.second.eval(z)?)
    }

    pub fn det(&self, z: C64) -> Result<C64> {
        Ok(self.first.det_closed(z)? * self.second.det_closed(z)?)
    }

    pub fn trace(&self, z: C64) -> Result<C64> {
        Ok(self.eval(z)?.trace())
    }

    /// `L0 = A^2`, the value at infinity.
    pub fn l0(&self) -> CMatrix {
        self.first.a() * self.first.a()
    }

    /// Residue at the first pole: `G1 B2(z1)`.
    pub fn residue_first(&self) -> Result<CMatrix> {
        Ok(&self.first.g() * &self.second.eval(self.first.pole())?)
    }

    /// Residue at the second pole: `B1(z2) G2`.
    pub fn residue_second(&self) -> Result<CMatrix> {
        Ok(&self.first.eval(self.second.pole())? * &self.second.g())
    }

    /// `L_inf = -res_inf L(z) dz`, the sum of the finite residues.
    pub fn l_infinity(&self) -> Result<CMatrix> {
        Ok(&self.residue_first()? + &self.residue_second()?)
    }
}
