use depmeasures::constructions::{clt_limit_corr, orthant_prob};
use depmeasures::measures::{
    event_numerator, event_statistic, exact_event_measures, heuristic_event_measure, rho, ExactCaps,
    HeuristicConfig, DEFAULT_RHO_TOL,
};
use depmeasures::theorem_suite::{peyre_bound, two_atom_bound};
use depmeasures::{full_report, EventKind, EventPair, JointPmf, MeasureOptions, RandomStyle};
use proptest::prelude::*;

fn style() -> impl Strategy<Value = RandomStyle> {
    prop_oneof![
        Just(RandomStyle::Dense),
        Just(RandomStyle::Sparse),
        (0.0..0.5f64).prop_map(|perturbation| RandomStyle::NearIndependent { perturbation }),
    ]
}

fn pmf(max_rows: usize, max_cols: usize) -> impl Strategy<Value = JointPmf> {
    (2..=max_rows, 2..=max_cols, any::<u64>(), style())
        .prop_map(|(i, j, seed, s)| JointPmf::random(i, j, seed, s).unwrap())
}

/// Raw nonnegative entries, some exactly zero, normalized on construction.
fn raw_pmf(max_rows: usize, max_cols: usize) -> impl Strategy<Value = JointPmf> {
    (2..=max_rows, 2..=max_cols)
        .prop_flat_map(|(i, j)| {
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], i * j)
                .prop_map(move |v| (i, j, v))
        })
        .prop_filter("some mass", |(_, _, v)| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|(_, j, v)| {
            let rows: Vec<Vec<f64>> = v.chunks(j).map(<[f64]>::to_vec).collect();
            JointPmf::from_matrix(&rows, true).unwrap()
        })
}

fn values(m: &JointPmf) -> [f64; 4] {
    let r = full_report(m, &MeasureOptions::exact()).unwrap();
    [r.psi, r.lambda, r.tau, r.rho]
}

fn subset(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|k| mask >> k & 1 == 1).collect()
}

fn complement(s: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|k| !s.contains(k)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructors_have_unit_mass(m in pmf(8, 8)) {
        prop_assert!((m.total() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn kron_is_associative(a in pmf(3, 3), b in pmf(3, 3), c in pmf(3, 3)) {
        let left = a.kron(&b).unwrap().kron(&c).unwrap();
        let right = a.kron(&b.kron(&c).unwrap()).unwrap();
        prop_assert_eq!(left.shape(), right.shape());
        for (x, y) in left.entries().iter().zip(right.entries()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn permutations_leave_measures_unchanged(m in pmf(5, 5), seed in any::<u64>()) {
        let (i, j) = m.shape();
        let perm = |n: usize, salt: u64| {
            let mut p: Vec<usize> = (0..n).collect();
            p.sort_by_key(|&k| (k as u64 + 1).wrapping_mul(seed ^ salt).rotate_left(17));
            p
        };
        let pm = m.permute_rows(&perm(i, 1)).unwrap().permute_cols(&perm(j, 2)).unwrap();
        let (a, b) = (values(&m), values(&pm));
        for k in 0..3 {
            // Summation order follows the atom order, so allow rounding.
            prop_assert!((a[k] - b[k]).abs() <= 1e-13 * a[k].max(1.0), "kind {}: {} vs {}", k, a[k], b[k]);
        }
        prop_assert!((a[3] - b[3]).abs() <= 1e-9);
    }

    #[test]
    fn merging_never_increases(m in raw_pmf(5, 5), r in any::<(usize, usize, bool)>()) {
        let (i, j) = m.shape();
        let merged = if r.2 {
            m.merge_rows(r.0 % i, (r.0 % i + 1 + r.1 % (i - 1)) % i).unwrap()
        } else {
            m.merge_cols(r.0 % j, (r.0 % j + 1 + r.1 % (j - 1)) % j).unwrap()
        };
        let (a, b) = (values(&m), values(&merged));
        for k in 0..3 {
            prop_assert!(b[k] <= a[k] + 1e-12, "kind {}: {} > {}", k, b[k], a[k]);
        }
        prop_assert!(b[3] <= a[3] + 1e-9);
    }

    #[test]
    fn complement_invariance(m in raw_pmf(6, 6), s in any::<u64>(), t in any::<u64>()) {
        let (i, j) = m.shape();
        let (rs, cs) = (subset(s, i), subset(t, j));
        let e = EventPair::new(rs.clone(), cs.clone());
        let ec_row = EventPair::new(complement(&rs, i), cs.clone());
        let ec_col = EventPair::new(rs.clone(), complement(&cs, j));
        let num = event_numerator(&m, &e);
        prop_assert_eq!(num, event_numerator(&m, &ec_row));
        prop_assert_eq!(num, event_numerator(&m, &ec_col));
        let tau = event_statistic(&m, &e, EventKind::Tau);
        prop_assert_eq!(tau, event_statistic(&m, &ec_row, EventKind::Tau));
        prop_assert_eq!(tau, event_statistic(&m, &ec_col, EventKind::Tau));
    }

    #[test]
    fn chain_and_doubling(m in raw_pmf(6, 6)) {
        let r = full_report(&m, &MeasureOptions::exact()).unwrap();
        prop_assert!(r.lambda <= r.tau + 1e-9);
        prop_assert!(r.tau <= r.rho + 1e-9);
        prop_assert!(r.rho <= 1.0 + 1e-9);
        prop_assert!(r.rho <= r.psi + 1e-9);
        prop_assert!(r.tau <= 2.0 * r.lambda + 1e-12);
    }

    #[test]
    fn two_atom_rho_equals_tau(m in raw_pmf(2, 2)) {
        let [_, _, tau, rho] = values(&m);
        prop_assert!((rho - tau).abs() <= 1e-9, "rho {} tau {}", rho, tau);
    }

    #[test]
    fn witnesses_reproduce_values(m in pmf(6, 6)) {
        let r = full_report(&m, &MeasureOptions::exact()).unwrap();
        prop_assert!((event_statistic(&m, &r.psi_witness, EventKind::Psi) - r.psi).abs() <= 1e-12);
        prop_assert!((event_statistic(&m, &r.lambda_witness, EventKind::Lambda) - r.lambda).abs() <= 1e-12);
        prop_assert!((event_statistic(&m, &r.tau_witness, EventKind::Tau) - r.tau).abs() <= 1e-12);
        if !r.rho_witness.is_empty() {
            prop_assert!((r.rho_witness.correlation(&m) - r.rho).abs() <= 10.0 * DEFAULT_RHO_TOL);
        }
        prop_assert!((r.rho_spectral.sigma1 - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn heuristic_is_a_lower_bound(m in pmf(8, 8)) {
        let exact = exact_event_measures(&m, ExactCaps::default()).unwrap();
        for (k, kind) in EventKind::ALL.iter().enumerate() {
            let h = heuristic_event_measure(&m, *kind, &HeuristicConfig::default());
            prop_assert!(h.value <= exact[k].value + 1e-12);
        }
    }

    #[test]
    fn rho_tensorizes_by_max(a in pmf(3, 3), b in pmf(3, 3)) {
        let ra = rho(&a, DEFAULT_RHO_TOL).unwrap().value;
        let rb = rho(&b, DEFAULT_RHO_TOL).unwrap().value;
        let rk = rho(&a.kron(&b).unwrap(), DEFAULT_RHO_TOL).unwrap().value;
        prop_assert!((rk - ra.max(rb)).abs() <= 1e-8);
    }

    #[test]
    fn json_round_trip(m in pmf(5, 5)) {
        let s = serde_json::to_string(&m).unwrap();
        let back: JointPmf = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn orthant_quadrant_symmetry(r in -1.0..=1.0f64) {
        prop_assert!((orthant_prob(r).unwrap() + orthant_prob(-r).unwrap() - 0.5).abs() <= 1e-15);
        prop_assert_eq!(clt_limit_corr(-r).unwrap(), -clt_limit_corr(r).unwrap());
    }

    #[test]
    fn limit_corr_inverts_sine(t in 0.0..=1.0f64) {
        let r = (std::f64::consts::FRAC_PI_2 * t).sin();
        prop_assert!((clt_limit_corr(r).unwrap() - t).abs() <= 1e-12);
    }

    #[test]
    fn bounds_increase(x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let (a, b) = (x.min(y), x.max(y));
        prop_assume!(a < b);
        prop_assert!(peyre_bound(a) < peyre_bound(b));
        prop_assert!(two_atom_bound(a) < two_atom_bound(b));
    }
}

#[test]
fn bounds_increase_on_grid() {
    let grid: Vec<f64> = (0..=10_000).map(|k| k as f64 / 10_000.0).collect();
    for w in grid.windows(2) {
        assert!(peyre_bound(w[0]) < peyre_bound(w[1]), "t = {}", w[1]);
        assert!(two_atom_bound(w[0]) < two_atom_bound(w[1]), "t = {}", w[1]);
    }
}

#[test]
fn limit_corr_is_increasing() {
    let grid: Vec<f64> = (-1000..=1000).map(|k| k as f64 / 1000.0).collect();
    for w in grid.windows(2) {
        assert!(clt_limit_corr(w[0]).unwrap() < clt_limit_corr(w[1]).unwrap());
    }
}
