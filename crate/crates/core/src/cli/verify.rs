//! `verify`: the property checks over a range of seeds, fanned out with
//! rayon and merged in seed order.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Resolved, DEFAULT_SEEDS};
use super::report::{fmt_f64, Metric, Record, Report};
use super::runs::SYMPLECTIC_BOUND;
use crate::error::Result;
use crate::isomonodromic::{self, configurations, iso_trajectory, type_of, TimeDependentSystem};
use crate::isospectral::{self, IsoSystem};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{CMatrix, C64};
use crate::refactor::flip;
use crate::sampling::{self, sample_points, SampleRng};
use crate::spectral;

/// Bound for the finite-difference gradient comparison.
pub const GRADIENT_FD_BOUND: f64 = 1e-6;
/// The perturbed EL residual must exceed this.
pub const PERTURBATION_FLOOR: f64 = 1e-5;

const ISO_STEPS: usize = 20;
const ISOM_STEPS: usize = 10;
const DPV_STEPS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRecord {
    pub seed: u64,
    pub divisor_det: f64,
    pub divisor_inverse: f64,
    pub flip_product: f64,
    pub flip_zeta: f64,
    pub flip_rank: f64,
    pub flip_scale: f64,
    pub iso_drift: f64,
    pub iso_el: f64,
    pub iso_perturbed: f64,
    pub iso_gradient_fd: f64,
    pub iso_symplectic: f64,
    pub isom_type_drift: f64,
    pub isom_k_residual: f64,
    pub isom_el: f64,
    pub dpv_route: f64,
    pub spectral_round_trip: f64,
    pub mult_round_trip: f64,
}

const NAMES: [&str; 17] = [
    "divisor_det",
    "divisor_inverse",
    "flip_product",
    "flip_zeta",
    "flip_rank",
    "flip_scale",
    "iso_drift",
    "iso_el",
    "iso_perturbed",
    "iso_gradient_fd",
    "iso_symplectic",
    "isom_type_drift",
    "isom_k_residual",
    "isom_el",
    "dpv_route",
    "spectral_round_trip",
    "mult_round_trip",
];

impl VerifyRecord {
    fn values(&self) -> [f64; 17] {
        [
            self.divisor_det,
            self.divisor_inverse,
            self.flip_product,
            self.flip_zeta,
            self.flip_rank,
            self.flip_scale,
            self.iso_drift,
            self.iso_el,
            self.iso_perturbed,
            self.iso_gradient_fd,
            self.iso_symplectic,
            self.isom_type_drift,
            self.isom_k_residual,
            self.isom_el,
            self.dpv_route,
            self.spectral_round_trip,
            self.mult_round_trip,
        ]
    }
}

impl Record for VerifyRecord {
    fn csv_header(&self) -> Vec<String> {
        std::iter::once("seed")
            .chain(NAMES)
            .map(String::from)
            .collect()
    }

    fn csv_fields(&self) -> Vec<String> {
        std::iter::once(self.seed.to_string())
            .chain(self.values().into_iter().map(fmt_f64))
            .collect()
    }
}

fn max_over(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn divisor_checks(rng: &mut SampleRng, seed: u64) -> Result<(f64, f64)> {
    let r = 2 + (seed % 2) as usize;
    let a = sampling::random_gauge(rng, r);
    let pole = sampling::random_point(rng, 1.0);
    let b = sampling::random_divisor(rng, &a, pole);
    let (mut det_err, mut inv_err) = (0.0f64, 0.0f64);
    for z in sample_points(&[b.pole(), b.zeta()], seed) {
        let m = b.eval(z)?;
        let lu = m.det();
        det_err = det_err.max((b.det_closed(z)? - lu).norm() / lu.norm());
        inv_err = inv_err.max((&b.inverse_closed(z)? * &m).rel_diff(&CMatrix::identity(r)));
    }
    Ok((det_err, inv_err))
}

fn flip_checks(rng: &mut SampleRng, seed: u64) -> Result<[f64; 4]> {
    let r = 2 + (seed % 2) as usize;
    let a = sampling::random_gauge(rng, r);
    let poles = sampling::distinct_points(rng, 2, 1.5, 0.5);
    let b2 = sampling::random_divisor(rng, &a, poles[0]);
    let b1 = sampling::random_divisor(rng, &a, poles[1]);
    let (t1, t2) = flip(&b2, &b1)?;
    let after = RationalMatrixFunction::new(t1.clone(), t2.clone())?;
    let mut product = 0.0f64;
    for z in sample_points(&after.special_points(), seed) {
        product = product.max(after.eval(z)?.rel_diff(&(&b2.eval(z)? * &b1.eval(z)?)));
    }
    let zeta = ((t1.zeta() - b1.zeta()).norm() / (1.0 + b1.zeta().norm()))
        .max((t2.zeta() - b2.zeta()).norm() / (1.0 + b2.zeta().norm()));
    let rank = after
        .residue_first()?
        .rank_one_defect()
        .max(after.residue_second()?.rank_one_defect());
    let (s1, s2) = flip(
        &b2.rescaled(C64::new(0.3, 1.7)),
        &b1.rescaled(C64::new(-2.0, 0.5)),
    )?;
    let scale = s1.g().rel_diff(&t1.g()).max(s2.g().rel_diff(&t2.g()));
    Ok([product, zeta, rank, scale])
}

fn isospectral_checks(rng: &mut SampleRng) -> Result<[f64; 5]> {
    let sys = IsoSystem::random(rng, 2);
    let (prev, cur) = isospectral::random_initial_orbit(rng, &sys, ISO_STEPS);
    let drift = isospectral::spectral_invariance(&sys, &prev, &cur, ISO_STEPS)?;
    let traj = isospectral::trajectory(&sys, &prev, &cur, ISO_STEPS)?;
    let mut el = 0.0f64;
    for w in traj.windows(3) {
        el = el.max(isospectral::el_residual(&sys, &w[0], &w[1], &w[2])?);
    }
    let mut bent = traj[3].clone();
    bent.p1[0] += 1e-3;
    let perturbed = isospectral::el_residual(&sys, &traj[1], &traj[2], &bent)?;
    let fd = isospectral::gradient_fd_error(&sys, &traj[0], &traj[1])?;
    let symplectic = isospectral::symplectic_residual(&sys, &prev, &cur)?;
    Ok([drift, el, perturbed, fd, symplectic])
}

fn isomonodromic_checks(rng: &mut SampleRng) -> Result<[f64; 3]> {
    let theta = spectral::random_theta(rng);
    let s = spectral::random_point(rng, &theta);
    let l = spectral::divisors_from_spectral(&theta, &s)?;
    let traj = iso_trajectory(&l, ISOM_STEPS)?;
    let t0 = type_of(&l)?;
    let (mut drift, mut k_res) = (0.0f64, t0.k_residual());
    for (t, lt) in traj.iter().enumerate() {
        let tt = type_of(lt)?;
        let shift = (tt.z2 - (t0.z2 - t as f64)).norm() + (tt.zeta2 - (t0.zeta2 - t as f64)).norm();
        drift = drift.max(t0.drift(&tt)).max(shift);
        k_res = k_res.max(tt.k_residual());
    }
    let sys = TimeDependentSystem::of(&l)?;
    let el = max_over(isomonodromic::trajectory_residuals(
        &sys,
        &configurations(&traj)?,
    )?);
    Ok([drift, k_res, el])
}

fn spectral_checks(rng: &mut SampleRng) -> Result<[f64; 3]> {
    let theta = spectral::random_theta(rng);
    let s = spectral::random_point(rng, &theta);
    let orbit = spectral::dpv_orbit(&theta, &s, DPV_STEPS, true)?;
    let route = max_over(orbit.iter().filter_map(|o| o.residual));
    let rep = spectral::additive_from_spectral(&theta, &s)?;
    let round = spectral::to_spectral(&rep)?.distance(&s);
    let l = spectral::divisors_from_spectral(&theta, &s)?;
    let (g1a, ag2) = spectral::add_to_mult(&spectral::mult_to_add(&l)?)?;
    let a = l.first.a();
    let mult = g1a
        .rel_diff(&(&l.first.g() * a))
        .max(ag2.rel_diff(&(a * &l.second.g())));
    Ok([route, round, mult])
}

pub fn check_seed(seed: u64) -> Result<VerifyRecord> {
    let mut rng = sampling::seeded(seed);
    let (divisor_det, divisor_inverse) = divisor_checks(&mut rng, seed)?;
    let [flip_product, flip_zeta, flip_rank, flip_scale] = flip_checks(&mut rng, seed)?;
    let [iso_drift, iso_el, iso_perturbed, iso_gradient_fd, iso_symplectic] =
        isospectral_checks(&mut rng)?;
    let [isom_type_drift, isom_k_residual, isom_el] = isomonodromic_checks(&mut rng)?;
    let [dpv_route, spectral_round_trip, mult_round_trip] = spectral_checks(&mut rng)?;
    Ok(VerifyRecord {
        seed,
        divisor_det,
        divisor_inverse,
        flip_product,
        flip_zeta,
        flip_rank,
        flip_scale,
        iso_drift,
        iso_el,
        iso_perturbed,
        iso_gradient_fd,
        iso_symplectic,
        isom_type_drift,
        isom_k_residual,
        isom_el,
        dpv_route,
        spectral_round_trip,
        mult_round_trip,
    })
}

fn bound_for(name: &'static str, tol: f64, records: &[VerifyRecord], i: usize) -> Metric {
    let values = records.iter().map(|r| r.values()[i]);
    match name {
        "iso_perturbed" => Metric::above(
            name,
            values.fold(f64::INFINITY, f64::min),
            PERTURBATION_FLOOR,
        ),
        "iso_gradient_fd" => Metric::below(name, max_over(values), GRADIENT_FD_BOUND),
        "iso_symplectic" => Metric::below(name, max_over(values), SYMPLECTIC_BOUND),
        _ => Metric::below(name, max_over(values), tol),
    }
}

pub fn verify(cfg: &Resolved) -> Report<VerifyRecord> {
    let n = cfg.config.seeds.unwrap_or(DEFAULT_SEEDS) as u64;
    let results: Vec<Result<VerifyRecord>> = (0..n)
        .into_par_iter()
        .map(|i| check_seed(cfg.seed + i))
        .collect();
    let mut report = Report::new("verify", cfg.tol);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(e) => {
                log::error!("seed {}: {e}", cfg.seed + i as u64);
                report.failure = Some(e);
                break;
            }
        }
    }
    for (i, name) in NAMES.iter().enumerate() {
        report
            .metrics
            .push(bound_for(name, cfg.tol, &report.records, i));
    }
    report
}
