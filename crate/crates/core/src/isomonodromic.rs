//! The special isomonodromic transformation `L(z) -> B2(z+1) B1(z)` written
//! as a pole shift followed by re-factorization, its time-dependent
//! Lagrangian, and the type data `{z_i, zeta_i, rho_i, k_i}`.

use serde::{Deserialize, Serialize};

use crate::divisor::ElementaryDivisor;
use crate::error::{LaxError, Result};
use crate::isospectral::{self, ConfigPoint, IsoSystem};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{CMatrix, Projective, C64};
use crate::refactor::{check_generic, flip};
use crate::sampling::differ_by_integer;

/// Tolerance of the k-relation.
pub const K_RELATION_TOL: f64 = 1e-10;
/// Tolerance for detecting integer differences between divisor points.
pub const INTEGER_TOL: f64 = 1e-8;

/// Type of a rational matrix function in a gauge with diagonal `L0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeTheta {
    pub z1: C64,
    pub z2: C64,
    pub zeta1: C64,
    pub zeta2: C64,
    /// Diagonal of `L0`.
    pub rho: Vec<C64>,
    /// Diagonal of `L0^-1 L_inf`.
    pub k: Vec<C64>,
}

/// `(z1 - zeta1) + (z2 - zeta2)`, the value every `sum k_i` must take.
pub fn k_sum(z1: C64, z2: C64, zeta1: C64, zeta2: C64) -> C64 {
    (z1 - zeta1) + (z2 - zeta2)
}

impl TypeTheta {
    pub fn new(
        z1: C64,
        z2: C64,
        zeta1: C64,
        zeta2: C64,
        rho: Vec<C64>,
        k: Vec<C64>,
    ) -> Result<Self> {
        if rho.len() != k.len() {
            return Err(LaxError::DimensionMismatch {
                expected: rho.len(),
                actual: k.len(),
            });
        }
        let t = Self {
            z1,
            z2,
            zeta1,
            zeta2,
            rho,
            k,
        };
        let residual = t.k_residual();
        if residual > K_RELATION_TOL {
            return Err(LaxError::KRelation { residual });
        }
        Ok(t)
    }

    /// `|sum k_i - sum (z_i - zeta_i)|`, relative to `1 + |sum (z_i - zeta_i)|`.
    pub fn k_residual(&self) -> f64 {
        let target = k_sum(self.z1, self.z2, self.zeta1, self.zeta2);
        let total: C64 = self.k.iter().sum();
        (total - target).norm() / (1.0 + target.norm())
    }

    /// Rejects types whose divisor points coincide or differ by an integer.
    pub fn check_nonresonant(&self) -> Result<()> {
        check_nonresonant(&[
            ("z1", self.z1),
            ("z2", self.z2),
            ("zeta1", self.zeta1),
            ("zeta2", self.zeta2),
        ])
    }

    /// Largest change of `rho` and `k` against another type.
    pub fn drift(&self, other: &TypeTheta) -> f64 {
        self.rho
            .iter()
            .zip(&other.rho)
            .chain(self.k.iter().zip(&other.k))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn check_nonresonant(points: &[(&str, C64)]) -> Result<()> {
    for (i, (na, a)) in points.iter().enumerate() {
        for (nb, b) in &points[i + 1..] {
            if differ_by_integer(*a, *b, INTEGER_TOL) {
                return Err(LaxError::IntegerDifferencePoles {
                    a: format!("{na} = {a}"),
                    b: format!("{nb} = {b}"),
                });
            }
        }
    }
    Ok(())
}

/// Type of `L`. Requires `L0 = A^2` diagonal; see [`diagonalize`].
pub fn type_of(l: &RationalMatrixFunction) -> Result<TypeTheta> {
    let l0 = l.l0();
    if !l0.is_diagonal(1e-12 * l0.max_abs()) {
        return Err(LaxError::NonDiagonalL0);
    }
    let rho = l0.diag();
    let l_inf = l.l_infinity()?;
    let k: Vec<C64> = rho
        .iter()
        .enumerate()
        .map(|(i, r)| l_inf[(i, i)] / r)
        .collect();
    let [z1, z2] = l.poles();
    let [zeta1, zeta2] = l.zetas();
    let t = TypeTheta::new(z1, z2, zeta1, zeta2, rho, k)?;
    t.check_nonresonant()?;
    Ok(t)
}

/// Conjugates a rank-two `L` by the eigenvector matrix of `A`, so that `A`
/// and `L0` become diagonal. Already-diagonal input is returned unchanged.
pub fn diagonalize(l: &RationalMatrixFunction) -> Result<RationalMatrixFunction> {
    let a = l.first.a();
    if a.dim() != 2 {
        return Err(LaxError::DimensionMismatch {
            expected: 2,
            actual: a.dim(),
        });
    }
    if a.is_diagonal(1e-14 * a.max_abs()) {
        return Ok(l.clone());
    }
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let half = (p + s) / 2.0;
    let disc = (((p - s) / 2.0).powi(2) + q * r).sqrt();
    let eigvec = |lambda: C64| {
        let u = [q, lambda - p];
        let v = [lambda - s, r];
        if u[0].norm() + u[1].norm() >= v[0].norm() + v[1].norm() {
            u
        } else {
            v
        }
    };
    let (e1, e2) = (eigvec(half + disc), eigvec(half - disc));
    let basis = CMatrix::from_rows(vec![vec![e1[0], e2[0]], vec![e1[1], e2[1]]])?;
    let inv = basis.inverse()?;
    Ok(RationalMatrixFunction {
        first: l.first.conjugated(&basis, &inv),
        second: l.second.conjugated(&basis, &inv),
    })
}

/// Dimension `2 (n - 1)(r - 1)` of the moduli space of rank-`r` functions
/// with `n` simple poles and fixed type.
pub fn moduli_dimension(n: usize, r: usize) -> usize {
    assert!(n >= 1 && r >= 1, "n and r must be positive");
    2 * (n - 1) * (r - 1)
}

/// `(B1, B2) -> (B1~, B2~)` with `B1~(z) B2~(z) = B2(z+1) B1(z)`.
/// The new second pole and zero are `z2 - 1`, `zeta2 - 1`.
pub fn iso_step(
    b1: &ElementaryDivisor,
    b2: &ElementaryDivisor,
) -> Result<(ElementaryDivisor, ElementaryDivisor)> {
    let shifted = b2.shift_pole(C64::new(1.0, 0.0));
    check_generic(&[
        ("z1", b1.pole()),
        ("z2 - 1", shifted.pole()),
        ("zeta1", b1.zeta()),
        ("zeta2 - 1", shifted.zeta()),
    ])?;
    flip(&shifted, b1)
}

/// Spreads the scale of a divisor evenly between `p` and `q`.
pub(crate) fn balanced(b: &ElementaryDivisor) -> ElementaryDivisor {
    let (np, nq) = (b.p().norm(), b.q().norm());
    if np == 0.0 || nq == 0.0 {
        return b.clone();
    }
    b.rescaled(C64::new((nq / np).sqrt(), 0.0))
}

/// `L_0, L_1, ..., L_n` under repeated [`iso_step`].
pub fn iso_trajectory(
    l: &RationalMatrixFunction,
    n_steps: usize,
) -> Result<Vec<RationalMatrixFunction>> {
    let mut out = vec![l.clone()];
    for k in 0..n_steps {
        let last = out.last().expect("nonempty");
        let (first, second) = iso_step(&last.first, &last.second).map_err(|e| e.at_step(k + 1))?;
        out.push(RationalMatrixFunction {
            first: balanced(&first),
            second: balanced(&second),
        });
    }
    Ok(out)
}

/// Configuration points `Q_0, ..., Q_{n+1}` of a trajectory `L_0, ..., L_n`:
/// `Q_{t+1} = (p1, q2†)` of `L_t`, and `Q_0` comes from the same-poles
/// re-factorization `L_0 = B2_ B1_`.
pub fn configurations(traj: &[RationalMatrixFunction]) -> Result<Vec<ConfigPoint>> {
    let l0 = traj.first().ok_or(LaxError::ZeroVector)?;
    let (b2_prev, b1_prev) = flip(&l0.first, &l0.second)?;
    let mut out = vec![ConfigPoint::new(b1_prev.p().clone(), b2_prev.q().clone())?];
    for l in traj {
        out.push(ConfigPoint::of(l));
    }
    Ok(out)
}

/// Time-dependent system: the second pole and zero are moved by `-t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentSystem {
    pub base: IsoSystem,
    pub t: i64,
}

impl TimeDependentSystem {
    pub fn new(base: IsoSystem, t: i64) -> Self {
        Self { base, t }
    }

    /// Gauge and divisor of `L_0`.
    pub fn of(l: &RationalMatrixFunction) -> Result<Self> {
        let [z1, z2] = l.poles();
        let [zeta1, zeta2] = l.zetas();
        Ok(Self::new(
            IsoSystem::new(l.first.a().clone(), z1, z2, zeta1, zeta2)?,
            0,
        ))
    }

    pub fn system_at(&self, t: i64) -> IsoSystem {
        self.base.shifted(t as f64)
    }

    pub fn current(&self) -> IsoSystem {
        self.system_at(self.t)
    }

    pub fn at(&self, t: i64) -> Self {
        Self {
            base: self.base.clone(),
            t,
        }
    }
}

/// Lagrangian at time `sys.t`.
pub fn lagrangian_t(sys: &TimeDependentSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<C64> {
    isospectral::lagrangian(&sys.current(), x, y)
}

/// Cancellation residual of `dL(k-1)/dY(Q_{k-1}, Q_k) + dL(k)/dX(Q_k, Q_{k+1})`
/// with `k = sys.t`.
pub fn el_residual_t(
    sys: &TimeDependentSystem,
    km1: &ConfigPoint,
    k: &ConfigPoint,
    kp1: &ConfigPoint,
) -> Result<f64> {
    isospectral::el_residual_split(&sys.system_at(sys.t - 1), &sys.current(), km1, k, kp1)
}

/// Residuals at `k = 1, ..., n` for the configurations of an iso trajectory.
pub fn trajectory_residuals(
    sys: &TimeDependentSystem,
    configs: &[ConfigPoint],
) -> Result<Vec<f64>> {
    configs
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            el_residual_t(&sys.at(i as i64 + 1), &w[0], &w[1], &w[2]).map_err(|e| e.at_step(i + 1))
        })
        .collect()
}
