//! Elementary divisors `B(z) = A + p q† / (z - z_pole)`.
//!
//! The rank-one part is stored as its two factors so that rank one holds by
//! construction. The pair `(p, q)` is only defined up to `p -> s p`,
//! `q -> q / s`; every quantity computed here is invariant under that rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{LaxError, Result};
use crate::matcore::{outer, CMatrix, ColVec, Projective, RowVec, C64};

/// Pairings below this fraction of the product of norms count as zero.
pub const PAIRING_TOL: f64 = 1e-12;

const POLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryDivisor {
    a: CMatrix,
    a_inv: CMatrix,
    pole: C64,
    p: ColVec,
    q: RowVec,
}

/// Guards a pairing `row · col` against numerical vanishing, relative to the
/// norms of its two factors.
pub(crate) fn checked_pairing(row: &RowVec, col: &ColVec, name: &'static str) -> Result<C64> {
    let v = row.try_dot(col)?;
    let scale = row.norm() * col.norm();
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(v.norm() > PAIRING_TOL * scale) || !v.norm().is_finite() {
        return Err(LaxError::DegenerateConfiguration { pairing: name });
    }
    Ok(v)
}

pub(crate) fn near(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

impl ElementaryDivisor {
    pub fn new(a: CMatrix, pole: C64, p: ColVec, q: RowVec) -> Result<Self> {
        let a_inv = a.inverse()?;
        Self::with_inverse(a, a_inv, pole, p, q)
    }

    pub(crate) fn with_inverse(
        a: CMatrix,
        a_inv: CMatrix,
        pole: C64,
        p: ColVec,
        q: RowVec,
    ) -> Result<Self> {
        let n = a.dim();
        for len in [p.len(), q.len(), a_inv.dim()] {
            if len != n {
                return Err(LaxError::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if p.norm() == 0.0 || q.norm() == 0.0 {
            return Err(LaxError::ZeroVector);
        }
        Ok(Self {
            a,
            a_inv,
            pole,
            p,
            q,
        })
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn a_inv(&self) -> &CMatrix {
        &self.a_inv
    }

    pub fn pole(&self) -> C64 {
        self.pole
    }

    pub fn p(&self) -> &ColVec {
        &self.p
    }

    pub fn q(&self) -> &RowVec {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Residue `G = p q†`.
    pub fn g(&self) -> CMatrix {
        outer(&self.p, &self.q).expect("dimensions checked at construction")
    }

    /// Zero of the determinant: `zeta = z_pole - tr(G A^-1)`.
    pub fn zeta(&self) -> C64 {
        let trace = self.q.dot(&(&self.a_inv * &self.p));
        self.pole - trace
    }

    /// True when the zero and the pole are numerically distinct.
    pub fn is_generic(&self) -> bool {
        !near(self.zeta(), self.pole, 1e-10)
    }

    fn check_not_pole(&self, z: C64) -> Result<()> {
        if (z - self.pole).norm() <= POLE_TOL * (1.0 + self.pole.norm()) {
            return Err(LaxError::EvalAtPole {
                pole: self.pole.to_string(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        self.check_not_pole(z)?;
        Ok(&self.a + &self.g().scaled((z - self.pole).inv()))
    }

    /// `det B(z) = (z - zeta)/(z - z_pole) det A`.
    pub fn det_closed(&self, z: C64) -> Result<C64> {
        self.check_not_pole(z)?;
        Ok((z - self.zeta()) / (z - self.pole) * self.a.det())
    }

    /// `B(z)^-1 = A^-1 (A - G/(z - zeta)) A^-1`.
    pub fn inverse_closed(&self, z: C64) -> Result<CMatrix> {
        self.check_not_pole(z)?;
        let zeta = self.zeta();
        if (z - zeta).norm() <= POLE_TOL * (1.0 + zeta.norm()) {
            return Err(LaxError::EvalAtZero {
                zero: zeta.to_string(),
            });
        }
        let left = &self.a_inv * &self.p;
        let right = &self.q * &self.a_inv;
        let correction = outer(&left, &right)?.scaled((z - zeta).inv());
        Ok(&self.a_inv - &correction)
    }

    /// Reconstructs the divisor from one column action `v ∥ B(z) w`, the row
    /// factor `q†` of its residue, and its zero `zeta`. Only the direction of
    /// `v` matters.
    pub fn from_column_action(
        a: &CMatrix,
        pole: C64,
        z: C64,
        w: &ColVec,
        v: &ColVec,
        q: &RowVec,
        zeta: C64,
    ) -> Result<Self> {
        let a_inv = a.inverse()?;
        let qw = checked_pairing(q, w, "q† w")?;
        let ainv_v = a_inv.matvec(v)?;
        let qv = checked_pairing(q, &ainv_v, "q† A^-1 v")?;
        let inner = &w.scaled((pole - z) / qw) + &ainv_v.scaled((z - zeta) / qv);
        let p = a * &inner;
        Self::with_inverse(a.clone(), a_inv, pole, p, q.clone())
    }

    /// Row version of [`Self::from_column_action`]: `v† ∥ w† B(z)`.
    pub fn from_row_action(
        a: &CMatrix,
        pole: C64,
        z: C64,
        w: &RowVec,
        v: &RowVec,
        p: &ColVec,
        zeta: C64,
    ) -> Result<Self> {
        let a_inv = a.inverse()?;
        let wp = checked_pairing(w, p, "w† p")?;
        let v_ainv = a_inv.vecmat(v)?;
        let vp = checked_pairing(&v_ainv, p, "v† A^-1 p")?;
        let inner = &w.scaled((pole - z) / wp) + &v_ainv.scaled((z - zeta) / vp);
        let q = &inner * a;
        Self::with_inverse(a.clone(), a_inv, pole, p.clone(), q)
    }

    /// The same residue with the pole moved to `z_pole - h`, so that
    /// `shift_pole(h).eval(z) == eval(z + h)`.
    pub fn shift_pole(&self, h: C64) -> Self {
        Self {
            pole: self.pole - h,
            ..self.clone()
        }
    }

    /// Moves a scalar between the two factors; the divisor is unchanged.
    pub fn rescaled(&self, s: C64) -> Self {
        Self {
            p: self.p.scaled(s),
            q: self.q.scaled(s.inv()),
            ..self.clone()
        }
    }

    /// Conjugates by `S`: `S^-1 B(z) S`.
    pub fn conjugated(&self, s: &CMatrix, s_inv: &CMatrix) -> Self {
        Self {
            a: &(s_inv * &self.a) * s,
            a_inv: &(s_inv * &self.a_inv) * s,
            pole: self.pole,
            p: s_inv * &self.p,
            q: &self.q * s,
        }
    }

    pub fn shares_gauge(&self, other: &ElementaryDivisor, tol: f64) -> bool {
        self.a.dim() == other.a.dim() && self.a.rel_diff(&other.a) <= tol
    }
}

#[derive(Serialize, Deserialize)]
struct DivisorJson {
    #[serde(rename = "A")]
    a: CMatrix,
    z: C64,
    p: ColVec,
    q: RowVec,
}

impl Serialize for ElementaryDivisor {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        DivisorJson {
            a: self.a.clone(),
            z: self.pole,
            p: self.p.clone(),
            q: self.q.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ElementaryDivisor {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let j = DivisorJson::deserialize(deserializer)?;
        ElementaryDivisor::new(j.a, j.z, j.p, j.q).map_err(serde::de::Error::custom)
    }
}
