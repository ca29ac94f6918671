use std::collections::BTreeMap;

use proptest::prelude::*;
use synthqa::dataset::{CategoricalColumn, Column, ColumnKind, Schema, TableData};
use synthqa::domain::{check, fit_ranges, ExclusionRule, RangeRule, Rule, RuleSet, WILDCARD};

fn table(groups: &[String], values: &[String]) -> TableData {
    let schema = Schema::from_pairs(&[("g", ColumnKind::Categorical), ("v", ColumnKind::Categorical)]).unwrap();
    TableData::new(
        schema,
        vec![
            Column::Categorical(CategoricalColumn::from_strings(groups)),
            Column::Categorical(CategoricalColumn::from_strings(values)),
        ],
    )
    .unwrap()
}

fn ordinal_rule() -> RuleSet {
    RuleSet {
        rules: vec![Rule::Range(RangeRule {
            name: None,
            group_col: "g".into(),
            bounded_col: "v".into(),
            order: Some((0..6).map(|i| format!("o{i}")).collect()),
            bounds: BTreeMap::new(),
        })],
    }
}

proptest! {
    #[test]
    fn fitted_ranges_accept_their_source(rows in proptest::collection::vec((0..4u8, 0..6u8), 1..80)) {
        let g: Vec<String> = rows.iter().map(|(a, _)| format!("g{a}")).collect();
        let v: Vec<String> = rows.iter().map(|(_, b)| format!("o{b}")).collect();
        let real = table(&g, &v);
        let fitted = fit_ranges(&ordinal_rule(), &real).unwrap();
        prop_assert_eq!(check(&fitted, &real, None).unwrap().rules[0].n_violating_rows, 0);
    }

    #[test]
    fn violation_counts_add_up(rows in proptest::collection::vec((0..3u8, 0..6u8), 1..80)) {
        let g: Vec<String> = rows.iter().map(|(a, _)| format!("g{a}")).collect();
        let v: Vec<String> = rows.iter().map(|(_, b)| format!("o{b}")).collect();
        let data = table(&g, &v);
        let rules = RuleSet {
            rules: vec![Rule::Exclusion(ExclusionRule {
                name: None,
                col_a: "g".into(),
                col_b: "v".into(),
                forbidden_pairs: vec![("g0".into(), WILDCARD.into()), ("g1".into(), "o1".into())],
            })],
        };
        let r = &check(&rules, &data, None).unwrap().rules[0];
        let want = rows.iter().filter(|(a, b)| *a == 0 || (*a == 1 && *b == 1)).count() as u64;
        prop_assert_eq!(r.n_violating_rows, want);
        prop_assert_eq!(r.examples.iter().map(|e| e.rows).sum::<u64>() <= want, true);
        prop_assert!((r.pct_samples_affected - want as f64 / rows.len() as f64).abs() < 1e-15);
    }
}

#[test]
fn unknown_column_is_rejected() {
    let data = table(&["g0".into()], &["o0".into()]);
    assert!(check(&RuleSet::shipped_sex_icd(), &data, None).is_err());
}
