//! Independent reimplementations checked against the library.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radcode::analysis::{detection_probability, marcum_q1, pareto_sweep, ParetoPoint};
use radcode::crb::crb_pair;
use radcode::linalg::{CMat, C64};
use radcode::model::{
    generalized_barker_32, isl_db, model_matrices, p3_code, papr, sinr, CodeVector, Interference,
    RadarScenario,
};
use radcode::oracle::{random_unit_code, sampled_block_optimum};
use radcode::solver::{benchmark_crb_code, benchmark_sinr_code, block_update, SolverOptions};

/// SINR as an explicit double sum over pulses with the covariance inverted by hand-rolled
/// Gauss-Jordan elimination.
fn naive_sinr(c: &CodeVector, sc: &RadarScenario) -> f64 {
    let m = sc.pulses;
    let rho = match sc.interference {
        Interference::Exponential { rho } => rho,
        Interference::Explicit(_) => unreachable!(),
    };
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..m)
                .map(|j| rho.powi((i as i32 - j as i32).abs()))
                .collect();
            row.extend((0..m).map(|j| f64::from(u8::from(i == j))));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..m {
            if r != col {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let mut total = C64::from(0.0);
    for i in 0..m {
        for q in 0..m {
            let steer = C64::from_polar(
                1.0,
                2.0 * PI * sc.normalized_doppler * (i as f64 - q as f64),
            );
            total += c.entries()[i].conj() * a[i][m + q] * steer * c.entries()[q];
        }
    }
    sc.amplitude_power * sc.fast_samples as f64 * total.re
}

#[test]
fn sinr_matches_double_sum() {
    let sc = RadarScenario::default();
    let mats = model_matrices(&sc, sc.normalized_doppler).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let c = random_unit_code(&mut rng, 32);
        let want = naive_sinr(&c, &sc);
        assert!((sinr(&c, &mats, &sc) / want - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn two_pulse_m0_by_hand() {
    let sc = RadarScenario {
        pulses: 2,
        ..Default::default()
    };
    let mats = model_matrices(&sc, 0.0).unwrap();
    let det = 1.0 - 0.64;
    let want = CMat::from_row_slice(2, 2, &[1.0, -0.8, -0.8, 1.0].map(|x| C64::from(x / det)));
    assert!((mats.m0 - want).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn p3_and_barker_metrics() {
    let p3 = p3_code(32);
    assert_eq!(papr(&p3).unwrap(), 1.0);
    assert!((isl_db(&p3).unwrap() + 9.62).abs() <= 0.02);
    let gb = generalized_barker_32();
    assert_eq!(papr(&gb).unwrap(), 1.0);
    assert!(isl_db(&gb).unwrap() < isl_db(&p3).unwrap());
}

#[test]
fn marcum_closed_forms() {
    // Q1(0, b) = exp(-b^2/2) and Q1(a, 0) = 1.
    for b in [0.1, 1.0, 3.0, 7.0] {
        let q = marcum_q1(0.0, b).unwrap();
        assert!((q - (-0.5 * b * b).exp()).abs() <= 1e-15);
        assert_eq!(marcum_q1(b, 0.0).unwrap(), 1.0);
    }
    // Q1(a, a) = (1 + exp(-a^2) I0(a^2)) / 2.
    for a in [0.5f64, 1.0, 2.0, 4.0] {
        let z = a * a;
        let i0: f64 = (0..80)
            .map(|k| (0.25 * z * z).powi(k) / (1..=k).map(f64::from).product::<f64>().powi(2))
            .sum();
        let want = 0.5 * (1.0 + (-z).exp() * i0);
        assert!((marcum_q1(a, a).unwrap() - want).abs() <= 1e-12, "a = {a}");
    }
}

#[test]
fn detection_probability_matches_noncentral_chi_square() {
    // Survival function of a noncentral chi-square law with two degrees of freedom and
    // noncentrality 2 SINR, evaluated at -2 ln Pfa (computed with scipy.stats.ncx2).
    let cases = [
        (5.0, 1e-6, 0.024_319_115_840_715_905),
        (20.0, 1e-6, 0.875_970_848_802_781_3),
        (10.0, 1e-3, 0.810_292_374_261_239_5),
        (1.0, 1e-2, 0.084_477_430_252_035_4),
    ];
    for (s, pfa, want) in cases {
        let got = detection_probability(s, pfa);
        assert!(
            (got - want).abs() <= 1e-10 * want,
            "sinr {s}: {got} vs {want}"
        );
    }
    assert!((detection_probability(0.0, 1e-3) - 1e-3).abs() < 1e-15);
}

#[test]
fn block_update_beats_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for zeta in [0.05, 0.4, 1.0, 1.9] {
        for _ in 0..20 {
            let c0 = random_unit_code(&mut rng, 8).into_inner();
            let d = random_unit_code(&mut rng, 8).into_inner() * C64::from(3.0);
            let c = block_update(&d, &c0, zeta);
            let got = radcode::linalg::inner(&d, &c).re;
            let sampled = sampled_block_optimum(&mut rng, &d, &c0, zeta, 2000, 100);
            assert!(got >= sampled - 1e-9, "zeta {zeta}: {got} < {sampled}");
        }
    }
}

#[test]
fn benchmarks_dominate_their_objectives() {
    let sc = RadarScenario::default();
    let mats = model_matrices(&sc, sc.normalized_doppler).unwrap();
    let best_sinr = benchmark_sinr_code(&mats);
    let crb_run = benchmark_crb_code(&sc, &mats).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let c = random_unit_code(&mut rng, 32);
        assert!(sinr(&c, &mats, &sc) <= sinr(&best_sinr, &mats, &sc) * (1.0 + 1e-12));
    }
    let runs = pareto_sweep(
        &[0.0, 0.01, 1.0],
        2.0,
        &sc,
        &p3_code(32),
        &SolverOptions::default(),
    )
    .unwrap();
    for r in &runs {
        let p = r.point.as_ref().unwrap();
        assert!(1.0 / p.inv_det_crb >= crb_run.crb.det * (1.0 - 1e-6));
    }
    let gb =
        ParetoPoint::from_code("generalized_barker", &generalized_barker_32(), &mats, &sc).unwrap();
    assert!(1.0 / gb.inv_det_crb >= crb_run.crb.det);
    let p3 = crb_pair(&p3_code(32), &mats, &sc).unwrap();
    assert!(p3.det >= crb_run.crb.det);
}
