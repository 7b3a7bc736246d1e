use std::collections::BTreeMap;

use proptest::prelude::*;

use duqbench::design::DesignType;
use duqbench::harness::{filter_sim_study, join_sim_study, FailureType, Filter, ResultRow, ResultTable, TableKind};
use duqbench::seeding::Scenario;

fn row(method: &str, fname: &str, rep: u32, crps: f64) -> ResultRow {
    ResultRow {
        method: method.into(),
        scenario: Scenario::synthetic(fname, 100, 0.0, DesignType::Lhs, rep),
        rmse: crps * 2.0,
        fvu: crps / 3.0,
        crps,
        t_fit: 0.5,
        t_pred: 0.25,
        t_tot: 0.75,
        failure_type: FailureType::None,
        extras: BTreeMap::new(),
    }
}

fn table(rows: impl IntoIterator<Item = ResultRow>) -> ResultTable {
    let mut t = ResultTable::new(TableKind::Synthetic, Vec::new());
    for r in rows {
        t.push(r).unwrap();
    }
    t
}

fn arb_rows(fname: &'static str) -> impl Strategy<Value = Vec<ResultRow>> {
    proptest::collection::btree_map((0usize..4, 1u32..6), 0.0f64..5.0, 0..12).prop_map(move |cells| {
        cells
            .into_iter()
            .map(|((m, rep), crps)| row(["gp", "blm", "local_nn_gp", "baseline_t"][m], fname, rep, crps))
            .collect()
    })
}

fn sorted_keys(t: &ResultTable) -> Vec<String> {
    let mut keys: Vec<String> = t.rows().iter().map(|r| format!("{:?}", r.key())).collect();
    keys.sort();
    keys
}

proptest! {
    #[test]
    fn filter_commutes_with_join_on_disjoint_tables(a in arb_rows("ishigami"), b in arb_rows("borehole"), rep in 1u32..6) {
        let (ta, tb) = (table(a), table(b));
        let f = [Filter { column: "replication".into(), value: rep.to_string() }];
        let lhs = filter_sim_study(&join_sim_study(&ta, &tb).unwrap(), &f).unwrap();
        let rhs = join_sim_study(&filter_sim_study(&ta, &f).unwrap(), &filter_sim_study(&tb, &f).unwrap()).unwrap();
        prop_assert_eq!(sorted_keys(&lhs), sorted_keys(&rhs));
        let hits = |t: &ResultTable| {
            t.rows().iter().filter(|r| matches!(r.scenario, Scenario::Synthetic { replication, .. } if replication == rep)).count()
        };
        prop_assert_eq!(lhs.len(), hits(&ta) + hits(&tb));
    }

    #[test]
    fn csv_round_trip_is_lossless(a in arb_rows("friedman")) {
        let t = table(a);
        let back = ResultTable::read_csv(t.to_csv_string().unwrap().as_bytes()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn join_is_idempotent_and_keeps_the_first_copy() {
    let a = table([row("gp", "ishigami", 1, 0.1), row("blm", "ishigami", 1, 0.2)]);
    let b = table([row("gp", "ishigami", 1, 9.0), row("gp", "ishigami", 2, 0.3)]);
    assert_eq!(join_sim_study(&a, &a).unwrap(), a);
    let j = join_sim_study(&a, &b).unwrap();
    assert_eq!(j.len(), 3);
    assert!(j.rows().iter().all(|r| r.crps != 9.0));
}
