//! Seeded random data in generic position and deterministic evaluation points.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divisor::ElementaryDivisor;
use crate::matcore::{CMatrix, ColVec, RowVec, C64};

pub type SampleRng = ChaCha8Rng;

/// Pairings sampled below this magnitude are resampled.
pub const MIN_PAIRING: f64 = 1e-3;

/// Evaluation points keep at least this distance from every special point.
pub const MIN_POINT_DISTANCE: f64 = 0.1;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the closed unit disc.
pub fn unit_disc(rng: &mut SampleRng) -> C64 {
    let radius = rng.gen::<f64>().sqrt();
    C64::from_polar(radius, rng.gen_range(0.0..TAU))
}

pub fn random_col(rng: &mut SampleRng, r: usize) -> ColVec {
    ColVec((0..r).map(|_| unit_disc(rng)).collect())
}

pub fn random_row(rng: &mut SampleRng, r: usize) -> RowVec {
    RowVec((0..r).map(|_| unit_disc(rng)).collect())
}

/// A random well-conditioned invertible matrix: a complex diagonal part with
/// modulus in `[1, 2]` plus a small dense perturbation.
pub fn random_gauge(rng: &mut SampleRng, r: usize) -> CMatrix {
    loop {
        let mut m = CMatrix::zeros(r);
        for i in 0..r {
            for j in 0..r {
                m[(i, j)] = unit_disc(rng) * 0.35;
            }
            m[(i, i)] += C64::from_polar(rng.gen_range(1.0..2.0), rng.gen_range(0.0..TAU));
        }
        let sv = m.singular_values();
        if sv[r - 1] > 0.25 * sv[0] {
            return m;
        }
    }
}

/// Random divisor with the given pole; its zero stays away from the pole.
pub fn random_divisor(rng: &mut SampleRng, a: &CMatrix, pole: C64) -> ElementaryDivisor {
    let r = a.dim();
    loop {
        let p = random_col(rng, r);
        let q = random_row(rng, r);
        if q.dot(&p).norm() < MIN_PAIRING {
            continue;
        }
        let b = ElementaryDivisor::new(a.clone(), pole, p, q).expect("gauge is invertible");
        if (b.zeta() - pole).norm() > 0.3 {
            return b;
        }
    }
}

/// Random point in the disc of the given radius.
pub fn random_point(rng: &mut SampleRng, radius: f64) -> C64 {
    unit_disc(rng) * radius
}

/// `count` points, pairwise at least `min_gap`
/// apart, drawn from the disc of the given radius.
pub fn distinct_points(rng: &mut SampleRng, count: usize, radius: f64, min_gap: f64) -> Vec<C64> {
    loop {
        let pts: Vec<C64> = (0..count).map(|_| random_point(rng, radius)).collect();
        let ok = pts
            .iter()
            .enumerate()
            .all(|(i, a)| pts[i + 1..].iter().all(|b| (a - b).norm() >= min_gap));
        if ok {
            return pts;
        }
    }
}

/// True if `a - b` is within `tol` of an integer.
pub fn differ_by_integer(a: C64, b: C64, tol: f64) -> bool {
    let d = a - b;
    d.im.abs() < tol && (d.re - d.re.round()).abs() < tol
}

/// Five evaluation points on a circle of radius `2 + max |special|`,
/// rotated by a seeded phase. Each point is at least
/// [`MIN_POINT_DISTANCE`] from every special point.
pub fn sample_points(special: &[C64], seed: u64) -> Vec<C64> {
    sample_points_n(special, seed, 5)
}

pub fn sample_points_n(special: &[C64], seed: u64, count: usize) -> Vec<C64> {
    let radius = 2.0 + special.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut rng = seeded(seed ^ 0x5eed0fc1c1e);
    let mut phase = rng.gen_range(0.0..TAU);
    loop {
        let pts: Vec<C64> = (0..count)
            .map(|k| C64::from_polar(radius, phase + TAU * k as f64 / count as f64))
            .collect();
        let clear = pts
            .iter()
            .all(|z| special.iter().all(|s| (z - s).norm() > MIN_POINT_DISTANCE));
        if clear {
            return pts;
        }
        phase += 0.1;
    }
}
