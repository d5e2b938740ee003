#![allow(dead_code)]

use std::path::PathBuf;

use cbtracker::bmr::{
    ActorRole, BusinessModelRadar, CoCreationActivity, CoCreationActor, ValueProposition,
};
use cbtracker::bpmn::{CollaborationModel, FlowNode, Pool};
use cbtracker::kpi::{parse_formula, BinaryOp, CbAnnotation, FormulaExpr, KpiKey, TaskType};
use cbtracker::transform::{transform, WiringHints};
use proptest::prelude::*;
use rust_decimal::Decimal;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn dec(s: &str) -> Decimal {
    Decimal::from_str_exact(s).unwrap()
}

/// Labels with characters that need escaping in XML and JSON.
pub fn label() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 &<>'\"/é-]{0,10}[A-Za-z0-9é]?"
}

fn activity() -> impl Strategy<Value = CoCreationActivity> {
    (
        label(),
        prop::collection::vec(label(), 0..3),
        prop::collection::vec(label(), 0..3),
    )
        .prop_map(|(name, costs, benefits)| CoCreationActivity {
            name,
            costs,
            benefits,
        })
}

fn actor_body() -> impl Strategy<
    Value = (
        String,
        Vec<Vec<CoCreationActivity>>,
        Vec<String>,
        Vec<String>,
    ),
> {
    (
        label(),
        prop::collection::vec(prop::collection::vec(activity(), 1..3), 1..3),
        prop::collection::vec(label(), 0..2),
        prop::collection::vec(label(), 0..2),
    )
}

/// Appends `#n` so every label inside one actor is distinct.
fn uniquify(actor: &mut CoCreationActor) {
    let mut n = 0;
    let mut tag = |s: &mut String| {
        n += 1;
        s.push_str(&format!(" #{n}"));
    };
    for c in &mut actor.actor_costs {
        tag(c);
    }
    for b in &mut actor.actor_benefits {
        tag(b);
    }
    for vp in &mut actor.value_propositions {
        tag(&mut vp.name);
        for a in &mut vp.activities {
            tag(&mut a.name);
            a.costs.iter_mut().for_each(&mut tag);
            a.benefits.iter_mut().for_each(&mut tag);
        }
    }
}

/// Valid radars: one focal actor, 1–2 users, 0–3 partners, in shuffled order.
pub fn radar() -> impl Strategy<Value = BusinessModelRadar> {
    (
        label(),
        prop::collection::vec(actor_body(), 1..3),
        actor_body(),
        prop::collection::vec(actor_body(), 0..4),
    )
        .prop_flat_map(|(solution, users, focal, partners)| {
            let mut actors = Vec::new();
            let roles = users
                .into_iter()
                .map(|u| (u, ActorRole::User))
                .chain(std::iter::once((focal, ActorRole::Focal)))
                .chain(partners.into_iter().map(|p| (p, ActorRole::Partner)));
            for (i, ((name, vps, actor_costs, actor_benefits), role)) in roles.enumerate() {
                let mut actor = CoCreationActor {
                    name: format!("{name} {i}"),
                    role,
                    value_propositions: vps
                        .into_iter()
                        .map(|activities| ValueProposition {
                            name: String::new(),
                            activities,
                        })
                        .collect(),
                    actor_costs,
                    actor_benefits,
                };
                for (k, vp) in actor.value_propositions.iter_mut().enumerate() {
                    vp.name = format!("vp{k}");
                }
                uniquify(&mut actor);
                actors.push(actor);
            }
            let n = actors.len();
            (
                Just((solution, actors)),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_map(|((solution, actors), perm)| BusinessModelRadar {
            solution,
            actors: perm.into_iter().map(|i| actors[i].clone()).collect(),
        })
}

/// Task count computed straight from the radar: every cost, activity, and benefit.
pub fn expected_task_count(radar: &BusinessModelRadar) -> usize {
    radar
        .actors
        .iter()
        .map(|a| {
            a.actor_costs.len()
                + a.actor_benefits.len()
                + a.value_propositions
                    .iter()
                    .flat_map(|vp| &vp.activities)
                    .map(|act| 1 + act.costs.len() + act.benefits.len())
                    .sum::<usize>()
        })
        .sum()
}

pub fn literal() -> impl Strategy<Value = Decimal> {
    (0i64..10_000_000, 0u32..5).prop_map(|(m, scale)| Decimal::new(m, scale))
}

pub fn kpi_name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 _-]{0,10}[A-Za-z0-9]"
}

pub fn task_id() -> impl Strategy<Value = String> {
    prop::collection::vec(1u32..40, 1..4).prop_map(|segs| {
        segs.iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(".")
    })
}

fn op() -> impl Strategy<Value = BinaryOp> {
    prop_oneof![
        Just(BinaryOp::Add),
        Just(BinaryOp::Sub),
        Just(BinaryOp::Mul),
        Just(BinaryOp::Div)
    ]
}

/// Formula ASTs of depth up to 6 over literals and references.
pub fn formula() -> impl Strategy<Value = FormulaExpr> {
    let leaf = prop_oneof![
        literal().prop_map(FormulaExpr::literal),
        (task_id(), kpi_name()).prop_map(|(t, k)| FormulaExpr::reference(t, k)),
    ];
    leaf.prop_recursive(6, 48, 2, |inner| {
        (op(), inner.clone(), inner).prop_map(|(op, l, r)| FormulaExpr::binary(op, l, r))
    })
}

/// Independent evaluator used as an oracle against the library's evaluator.
pub fn oracle_eval(
    expr: &FormulaExpr,
    env: &dyn Fn(&str, &str) -> Option<Decimal>,
) -> Option<Decimal> {
    match expr {
        FormulaExpr::Literal(d) => Some(*d),
        FormulaExpr::Ref(r) => env(&r.task, &r.kpi),
        FormulaExpr::Binary { op, lhs, rhs, .. } => {
            let a = oracle_eval(lhs, env)?;
            let b = oracle_eval(rhs, env)?;
            match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                BinaryOp::Div if b.is_zero() => None,
                BinaryOp::Div => a.checked_div(b),
            }
        }
    }
}

/// A random acyclic KPI graph laid out as a one-pool model.
///
/// Task `k` may reference any task `j < k` in creation order; the tasks are
/// then stored in shuffled order so model order is not already topological.
#[derive(Debug, Clone)]
pub struct KpiDag {
    pub model: CollaborationModel,
    /// For each task (creation order): display id and referenced indices.
    pub edges: Vec<(String, Vec<usize>)>,
}

pub fn kpi_dag() -> impl Strategy<Value = KpiDag> {
    (2usize..12)
        .prop_flat_map(|n| {
            let per_task = (0..n)
                .map(|k| {
                    (
                        prop::collection::vec(0..k.max(1), 0..=k.min(3)),
                        1i64..500,
                        1i64..500,
                        any::<bool>(),
                    )
                })
                .collect::<Vec<_>>();
            (
                per_task,
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_map(|(per_task, perm)| {
            let n = per_task.len();
            let mut edges = Vec::with_capacity(n);
            let mut nodes = Vec::with_capacity(n);
            for (k, (deps, cur, tgt, mul)) in per_task.into_iter().enumerate() {
                let mut deps: Vec<usize> = if k == 0 { Vec::new() } else { deps };
                deps.sort_unstable();
                deps.dedup();
                let id = format!("1.{}", k + 1);
                let build = |base: i64| {
                    deps.iter()
                        .fold(FormulaExpr::literal(Decimal::new(base, 2)), |acc, &j| {
                            let r = FormulaExpr::reference(format!("1.{}", j + 1), "Value");
                            if mul {
                                FormulaExpr::binary(
                                    BinaryOp::Add,
                                    acc,
                                    FormulaExpr::binary(
                                        BinaryOp::Mul,
                                        r,
                                        FormulaExpr::literal(Decimal::new(3, 1)),
                                    ),
                                )
                            } else {
                                FormulaExpr::binary(
                                    BinaryOp::Sub,
                                    FormulaExpr::binary(BinaryOp::Add, acc, r),
                                    FormulaExpr::literal(Decimal::ONE),
                                )
                            }
                        })
                };
                let mut task = FlowNode::task(format!("T{k}"), format!("task {k}"));
                task.display_id = Some(id.clone());
                task.annotation = Some(
                    CbAnnotation::new(
                        "P",
                        if k % 2 == 0 {
                            TaskType::Cost
                        } else {
                            TaskType::Benefit
                        },
                    )
                    .with_kpi("Value", Some(build(cur)), Some(build(tgt))),
                );
                nodes.push(task);
                edges.push((id, deps));
            }
            let mut pool = Pool::new("Pool_1", "P");
            pool.role = Some(ActorRole::Focal);
            pool.nodes = perm.iter().map(|&i| nodes[i].clone()).collect();
            let mut model = CollaborationModel::new("Collaboration_1");
            model.pools.push(pool);
            KpiDag { model, edges }
        })
}

/// Transformed radars with a random KPI annotation on some tasks.
pub fn annotated_model() -> impl Strategy<Value = CollaborationModel> {
    (
        radar(),
        prop::collection::vec(
            prop::option::of((
                label(),
                kpi_name(),
                prop::option::of(formula()),
                prop::option::of(formula()),
            )),
            0..40,
        ),
    )
        .prop_map(|(r, annotations)| {
            let mut model = transform(&r, &WiringHints::default()).unwrap();
            let tasks = model.pools.iter_mut().flat_map(|p| {
                let name = p.name.clone();
                p.nodes
                    .iter_mut()
                    .filter(|n| n.is_task())
                    .map(move |n| (name.clone(), n))
            });
            for ((actor, task), ann) in tasks.zip(annotations) {
                let Some((goal, kpi, current, target)) = ann else {
                    continue;
                };
                let kind = task.annotation.as_ref().unwrap().task_type;
                task.annotation = Some(
                    CbAnnotation::new(actor, kind)
                        .with_goal(goal)
                        .with_kpi(kpi, current, target),
                );
            }
            model
        })
}

/// Kahn's algorithm, breaking ties by the given priorities.
pub fn random_topological_order(dag: &KpiDag, priority: &[u32]) -> Vec<KpiKey> {
    let n = dag.edges.len();
    let mut remaining: Vec<usize> = dag.edges.iter().map(|(_, d)| d.len()).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&i| !done[i] && remaining[i] == 0)
            .min_by_key(|&i| (priority[i % priority.len()], i))
            .expect("acyclic");
        done[next] = true;
        order.push(KpiKey::new(dag.edges[next].0.clone(), "Value"));
        for (i, (_, deps)) in dag.edges.iter().enumerate() {
            remaining[i] -= deps.iter().filter(|&&d| d == next).count();
        }
    }
    order
}

/// One cost task per `(display id, kpi, formula)` in a single pool.
pub fn formula_model(specs: &[(&str, &str, &str)]) -> CollaborationModel {
    let mut pool = Pool::new("Pool_1", "P");
    for (i, (id, kpi, formula)) in specs.iter().enumerate() {
        let mut t = FlowNode::task(format!("T{i}"), format!("t{i}"));
        t.display_id = Some(id.to_string());
        t.annotation = Some(CbAnnotation::new("P", TaskType::Cost).with_kpi(
            *kpi,
            Some(parse_formula(formula).unwrap()),
            None,
        ));
        pool.nodes.push(t);
    }
    let mut m = CollaborationModel::new("c");
    m.pools.push(pool);
    m
}
