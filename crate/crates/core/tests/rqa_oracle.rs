mod common;

use common::{oracle_lines, oracle_measures, random_symmetric};
use proptest::prelude::*;
use recurrex::recurrence::RecurrencePlot;
use recurrex::rqa::{line_histograms, rqa_measures, RqaOptions, RqaVector};

fn check(rows: &[Vec<bool>], exclude_loi: bool) {
    let rp = RecurrencePlot::from_rows(rows).unwrap();
    let got = rqa_measures(&rp, &RqaOptions { exclude_loi }).to_array();
    let want = oracle_measures(rows, exclude_loi);
    for k in 0..12 {
        assert!(
            (got[k] - want[k]).abs() <= 1e-12,
            "{} differs: {} vs {} on {:?}",
            RqaVector::NAMES[k],
            got[k],
            want[k],
            rows
        );
    }
}

#[test]
fn random_matrices_match_brute_force() {
    for seed in 0..300u64 {
        let size = 4 + (seed % 9) as usize;
        let density = [0.1, 0.3, 0.5, 0.8][(seed % 4) as usize];
        let rows = random_symmetric(size, density, seed);
        check(&rows, false);
        check(&rows, true);
    }
}

#[test]
fn larger_matrices_cross_word_boundaries() {
    for (seed, size) in [(1u64, 63usize), (2, 64), (3, 65), (4, 130)] {
        check(&random_symmetric(size, 0.4, seed), false);
        check(&random_symmetric(size, 0.4, seed), true);
    }
}

#[test]
fn histograms_match_oracle_lines() {
    let rows = random_symmetric(11, 0.45, 77);
    let rp = RecurrencePlot::from_rows(&rows).unwrap();
    let (d, v, w) = line_histograms(&rp, &RqaOptions::default());
    let o = oracle_lines(&rows, false);
    assert_eq!(d.to_map(), o.diagonal);
    assert_eq!(v.to_map(), o.vertical);
    assert_eq!(w.to_map(), o.white);
}

proptest! {
    #[test]
    fn measures_match_oracle(size in 4usize..=12, density in 0.0f64..1.0, seed in any::<u64>(), loi in any::<bool>()) {
        check(&random_symmetric(size, density, seed), loi);
    }

    #[test]
    fn histogram_points_cover_the_plot(size in 2usize..=40, density in 0.0f64..1.0, seed in any::<u64>()) {
        let rows = random_symmetric(size, density, seed);
        let rp = RecurrencePlot::from_rows(&rows).unwrap();
        let (d, v, w) = line_histograms(&rp, &RqaOptions::default());
        let ones = rp.recurrence_count();
        prop_assert_eq!(d.points_from(1), ones);
        prop_assert_eq!(v.points_from(1), ones);
        prop_assert_eq!(w.points_from(1), (size * size) as u64 - ones);
    }

    #[test]
    fn measures_stay_in_range(size in 2usize..=30, density in 0.0f64..1.0, seed in any::<u64>(), loi in any::<bool>()) {
        let rows = random_symmetric(size, density, seed);
        let r = rqa_measures(&RecurrencePlot::from_rows(&rows).unwrap(), &RqaOptions { exclude_loi: loi });
        let n = size as f64;
        for x in [r.rr, r.det, r.lam] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        for x in [r.l_max, r.v_max, r.w_max, r.l_avg, r.tt, r.w_avg] {
            prop_assert!((0.0..=n).contains(&x));
        }
        prop_assert!(r.l_avg <= r.l_max && r.tt <= r.v_max && r.w_avg <= r.w_max);
        for x in [r.entr_d, r.entr_v, r.entr_w] {
            prop_assert!(x >= 0.0 && x <= n.ln() + 1e-12);
        }
    }

    #[test]
    fn transpose_leaves_measures_unchanged(size in 2usize..=20, density in 0.0f64..1.0, seed in any::<u64>()) {
        let rp = RecurrencePlot::from_rows(&random_symmetric(size, density, seed)).unwrap();
        let opts = RqaOptions::default();
        prop_assert_eq!(rqa_measures(&rp, &opts), rqa_measures(&rp.transpose(), &opts));
    }
}
