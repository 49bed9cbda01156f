use proptest::prelude::*;

use multifrac::dwt::{CoefficientPyramid, Normalization};
use multifrac::ingest::{load_series, summarize, write_series};
use multifrac::leaders::compute_leaders;
use multifrac::surrogate::{iaaft_surrogate, shuffle_surrogate, SurrogateConfig, SurrogateMethod};
use multifrac::wlmfa::{analyze_series, structure_functions, QGrid, ScaleRange, WlmfaSettings};
use multifrac::{Source, TimeSeries};

/// Dyadic detail arrays: scale j holds 2^(a - j + 1) coefficients.
fn dyadic_pyramid() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=9)
        .prop_flat_map(|a| (Just(a), 1usize..=a + 1))
        .prop_flat_map(|(a, depth)| {
            (1..=depth)
                .map(|j| prop::collection::vec(-100.0f64..100.0, 1usize << (a + 1 - j)))
                .collect::<Vec<_>>()
        })
}

/// Direct definition: sup of |d| over all finer scales inside the union of
/// the cell and its two neighbors, indices taken periodically.
fn brute_leader(details: &[Vec<f64>], j: usize, k: usize) -> f64 {
    let mut best = 0.0f64;
    for jp in 1..=j {
        let span = 1i64 << (j - jp);
        let d = &details[jp - 1];
        let n = d.len() as i64;
        for i in (k as i64 - 1) * span..(k as i64 + 2) * span {
            best = best.max(d[i.rem_euclid(n) as usize].abs());
        }
    }
    best
}

fn pyramid(details: Vec<Vec<f64>>) -> CoefficientPyramid {
    CoefficientPyramid::from_details(details, Normalization::L1).unwrap()
}

fn series(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(values, "prop", Source::Synthetic, None).unwrap()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn settings() -> WlmfaSettings {
    WlmfaSettings {
        vanishing_moments: 2,
        range: ScaleRange::new(2, 5).unwrap(),
        qgrid: QGrid::range(-3.0, 0.5, 3.0).unwrap(),
        integrate: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn leaders_match_direct_sup(details in dyadic_pyramid()) {
        let l = compute_leaders(&pyramid(details.clone())).unwrap();
        for (j, scale) in l.scales().iter().enumerate() {
            let n = scale.values.len();
            for k in 0..n {
                prop_assert_eq!(scale.values[k], brute_leader(&details, j + 1, k));
                prop_assert_eq!(scale.usable[k], k >= 1 && k + 1 < n);
            }
        }
    }

    #[test]
    fn leaders_ignore_sign(details in dyadic_pyramid()) {
        let flipped: Vec<Vec<f64>> = details.iter().map(|d| d.iter().map(|v| -v).collect()).collect();
        let a = compute_leaders(&pyramid(details)).unwrap();
        let b = compute_leaders(&pyramid(flipped)).unwrap();
        for (x, y) in a.scales().iter().zip(b.scales()) {
            prop_assert_eq!(&x.values, &y.values);
        }
    }

    #[test]
    fn leaders_grow_with_scale(details in dyadic_pyramid()) {
        let l = compute_leaders(&pyramid(details.clone())).unwrap();
        for j in 0..l.levels() {
            let here = &l.scales()[j].values;
            let d = &details[j];
            let n = here.len();
            for k in 0..n {
                for off in [n - 1, 0, 1] {
                    prop_assert!(here[k] >= d[(k + off) % n].abs());
                }
            }
            if j + 1 < l.levels() {
                for (k, &up) in l.scales()[j + 1].values.iter().enumerate() {
                    prop_assert!(up >= here[2 * k] && up >= here[2 * k + 1]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn zero_order_identities(values in prop::collection::vec(-10.0f64..10.0, 1024)) {
        let x = series(values);
        let a = analyze_series(&x, &settings()).unwrap();
        let scaling = &a.estimate.scaling;
        prop_assert!(scaling.zeta_at(0.0).unwrap().abs() <= 1e-12);
        prop_assert_eq!(a.estimate.spectrum.at(0.0).unwrap().1, 1.0);
        let s = settings();
        let sf = structure_functions(&a.leaders, &s.qgrid, s.range).unwrap();
        let qi = s.qgrid.index_of(0.0).unwrap();
        for row in 0..sf.levels().len() {
            prop_assert_eq!(sf.value(row, qi), 1.0);
        }
    }

    #[test]
    fn exponents_ignore_amplitude(values in prop::collection::vec(-10.0f64..10.0, 1024)) {
        let a = analyze_series(&series(values.clone()), &settings()).unwrap();
        let b = analyze_series(&series(values.iter().map(|v| 5.0 * v).collect()), &settings()).unwrap();
        for (x, y) in a.estimate.scaling.zeta.iter().zip(&b.estimate.scaling.zeta) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
        for (x, y) in a.estimate.spectrum.h.iter().zip(&b.estimate.spectrum.h) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn csv_roundtrip_is_exact(values in prop::collection::vec(-1e12f64..1e12, 2..300)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = series(values.clone());
        write_series(&path, &s, &["note".into()]).unwrap();
        let back = load_series(&path, 0, b',', false).unwrap();
        prop_assert_eq!(back.values(), &values[..]);
    }

    #[test]
    fn welford_matches_two_pass(values in prop::collection::vec(-1e3f64..1e3, 2..500)) {
        let stats = summarize(&series(values.clone()));
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!((stats.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        prop_assert!((stats.variance - var).abs() <= 1e-9 * (1.0 + var));
        prop_assert_eq!(stats.min, sorted(&values)[0]);
        prop_assert_eq!(stats.max, *sorted(&values).last().unwrap());
    }

    #[test]
    fn surrogates_keep_the_value_multiset(
        values in prop::collection::vec(-50.0f64..50.0, 16..400),
        seed in any::<u64>(),
    ) {
        let x = series(values.clone());
        let sh = shuffle_surrogate(&x, seed).unwrap();
        prop_assert_eq!(sorted(sh.values()), sorted(&values));
        let config = SurrogateConfig {
            method: SurrogateMethod::Iaaft,
            max_iterations: 50,
            ..Default::default()
        };
        let ia = iaaft_surrogate(&x, &config, seed).unwrap();
        prop_assert_eq!(sorted(ia.series.values()), sorted(&values));
        prop_assert!(ia.iterations >= 1 && ia.iterations <= 50);
    }
}
