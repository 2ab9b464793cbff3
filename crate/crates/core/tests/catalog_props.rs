use proptest::prelude::*;
use raga_moodkit::catalog::{fit_scaler, rasa_for_raga, stratified_split, Rasa, ScalerKind, RAGA_TABLE};

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..30, 1usize..6).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), n))
}

fn labels_strategy() -> impl Strategy<Value = Vec<Rasa>> {
    prop::collection::vec(prop::collection::vec(0usize..6, 2..12), 1..6).prop_map(|groups| {
        groups
            .into_iter()
            .enumerate()
            .flat_map(|(c, g)| g.into_iter().map(move |_| Rasa::ALL[c]))
            .collect()
    })
}

proptest! {
    #[test]
    fn zscore_columns_have_zero_mean_unit_std(rows in rows_strategy()) {
        let s = fit_scaler(ScalerKind::Zscore, &rows).unwrap();
        let t = s.apply(&rows);
        let n = rows.len() as f64;
        for j in 0..s.dim() {
            let mean = t.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = t.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if s.scale[j] == 0.0 {
                prop_assert!(t.iter().all(|r| r[j] == 0.0));
            } else {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn minmax_maps_train_into_unit_interval(rows in rows_strategy()) {
        let s = fit_scaler(ScalerKind::Minmax, &rows).unwrap();
        for r in s.apply(&rows) {
            prop_assert!(r.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn scaler_ignores_row_order(rows in rows_strategy(), kind in prop_oneof![Just(ScalerKind::Zscore), Just(ScalerKind::Minmax)]) {
        let a = fit_scaler(kind, &rows).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let b = fit_scaler(kind, &rev).unwrap();
        for (x, y) in a.offset.iter().zip(&b.offset).chain(a.scale.iter().zip(&b.scale)) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn split_is_a_stratified_partition(labels in labels_strategy(), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let split = stratified_split(&labels, frac, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for rasa in Rasa::ALL {
            let n = labels.iter().filter(|&&l| l == rasa).count();
            if n == 0 {
                continue;
            }
            let v = split.validation.iter().filter(|&&i| labels[i] == rasa).count();
            let ideal = frac * n as f64;
            prop_assert!(v >= 1 && v < n);
            prop_assert!((v as f64) <= ideal.ceil().max(1.0) && (v as f64) >= ideal.floor().min(n as f64 - 1.0));
        }
        prop_assert_eq!(stratified_split(&labels, frac, seed).unwrap(), split);
    }

    #[test]
    fn unlisted_names_error(name in "[a-z]{3,12}") {
        let known = RAGA_TABLE
            .iter()
            .flat_map(|e| std::iter::once(&e.name).chain(e.aliases))
            .any(|n| n.replace([' ', '-'], "").eq_ignore_ascii_case(&name));
        prop_assume!(!known);
        prop_assert!(rasa_for_raga(&name).is_err());
    }
}
