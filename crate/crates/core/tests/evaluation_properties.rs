mod common;

use std::collections::HashMap;

use cbtracker::kpi::{
    evaluate, evaluate_with_plan, resolve_dependencies, Column, KpiError, KpiKey,
};
use common::{formula_model, kpi_dag, oracle_eval, random_topological_order, KpiDag};
use proptest::prelude::*;
use rust_decimal::Decimal;

/// Values computed task by task in creation order, independent of the plan.
fn oracle_values(dag: &KpiDag, column: Column) -> HashMap<String, Decimal> {
    let mut values: HashMap<String, Decimal> = HashMap::new();
    for (id, _) in &dag.edges {
        let (_, task) = dag.model.task_by_display_id(id).unwrap();
        let formula = task.annotation.as_ref().unwrap().formula(column).unwrap();
        let v = oracle_eval(formula, &|t, _| values.get(t).copied()).unwrap();
        values.insert(id.clone(), v);
    }
    values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn result_does_not_depend_on_plan_order(
        dag in kpi_dag(),
        orders in prop::collection::vec(prop::collection::vec(any::<u32>(), 12), 1..6),
    ) {
        let plan = resolve_dependencies(&dag.model).unwrap();
        let baseline = evaluate_with_plan(&dag.model, &plan).unwrap();

        for priority in &orders {
            let order = random_topological_order(&dag, priority);
            let result = evaluate_with_plan(&dag.model, &plan.reordered(order)).unwrap();
            prop_assert_eq!(&result, &baseline);
        }

        for column in [Column::Current, Column::Target] {
            let expected = oracle_values(&dag, column);
            for v in &baseline.values {
                prop_assert_eq!(v.value(column), Some(expected[&v.task_display_id]));
            }
        }
    }

    #[test]
    fn plan_lists_dependencies_first(dag in kpi_dag()) {
        let plan = resolve_dependencies(&dag.model).unwrap();
        prop_assert_eq!(plan.len(), dag.edges.len());
        for (id, deps) in &dag.edges {
            let at = plan.position(&KpiKey::new(id.clone(), "Value")).unwrap();
            for &d in deps {
                let dep_at = plan.position(&KpiKey::new(dag.edges[d].0.clone(), "Value")).unwrap();
                prop_assert!(dep_at < at);
            }
        }
    }

    #[test]
    fn reversed_plans_with_edges_are_rejected(dag in kpi_dag()) {
        prop_assume!(dag.edges.iter().any(|(_, d)| !d.is_empty()));
        let plan = resolve_dependencies(&dag.model).unwrap();
        let mut order = plan.order.clone();
        order.reverse();
        prop_assert!(matches!(
            evaluate_with_plan(&dag.model, &plan.reordered(order)),
            Err(KpiError::InvalidPlan(_))
        ));
    }
}

mod errors {
    use cbtracker::kpi::MissingKind;

    use super::*;

    #[test]
    fn two_cycle_names_both_members_in_reference_order() {
        let m = formula_model(&[
            ("1", "A", "(2,B) + 1"),
            ("2", "B", "(1,A) * 2"),
            ("3", "C", "5"),
        ]);
        match evaluate(&m) {
            Err(KpiError::Cycle(c)) => {
                assert_eq!(
                    c.members,
                    vec![KpiKey::new("1", "A"), KpiKey::new("2", "B")]
                );
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn longer_cycle_behind_an_acyclic_prefix() {
        let m = formula_model(&[
            ("1", "A", "(2,B)"),
            ("2", "B", "(3,C)"),
            ("3", "C", "(4,D)"),
            ("4", "D", "(2,B)"),
        ]);
        let Err(KpiError::Cycle(c)) = resolve_dependencies(&m) else {
            panic!("expected a cycle")
        };
        assert_eq!(
            c.members,
            vec![
                KpiKey::new("2", "B"),
                KpiKey::new("3", "C"),
                KpiKey::new("4", "D")
            ]
        );
    }

    #[test]
    fn self_loop_is_a_cycle_of_one() {
        let m = formula_model(&[("1", "A", "(1,A) + 1")]);
        let Err(KpiError::Cycle(c)) = evaluate(&m) else {
            panic!("expected a cycle")
        };
        assert_eq!(c.members, vec![KpiKey::new("1", "A")]);
    }

    #[test]
    fn dangling_task_and_kpi_are_named() {
        let m = formula_model(&[("1", "A", "(9.9,A) + 1")]);
        match evaluate(&m) {
            Err(
                e @ KpiError::UnknownReference {
                    missing: MissingKind::Task,
                    ..
                },
            ) => {
                assert!(e.to_string().contains("9.9"), "{e}");
                assert_eq!(e.location().as_deref(), Some("9.9"));
            }
            other => panic!("{other:?}"),
        }
        let m = formula_model(&[("1", "A", "(2,Nope)"), ("2", "B", "1")]);
        match evaluate(&m) {
            Err(
                e @ KpiError::UnknownReference {
                    missing: MissingKind::Kpi,
                    ..
                },
            ) => {
                assert!(e.to_string().contains("Nope"), "{e}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn division_by_zero_reports_the_operator_column() {
        let m = formula_model(&[("1", "A", "0"), ("2", "B", "10 / (1,A)")]);
        match evaluate(&m) {
            Err(KpiError::DivideByZero { key, position, .. }) => {
                assert_eq!(key, KpiKey::new("2", "B"));
                assert_eq!(position, 4);
            }
            other => panic!("{other:?}"),
        }
    }
}
