use std::collections::BTreeSet;

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use proptest::prelude::*;

use litmus_axiom::catdsl::ExecStage;
use litmus_axiom::checker::{allowed, check_execution, CheckConfig, WitnessSpace};
use litmus_axiom::events::{wf_candidate, Execution, Language, MemoryOrder, Witness};
use litmus_axiom::frontend::{enumerate_basic, parse_litmus, EnumConfig};
use litmus_axiom::models::{get_model, ModelOptions};
use litmus_axiom::oracle::{exists_total_order, gen_candidate, random_relation, RandomCandidateSpec};
use litmus_axiom::relalg::{EventSet, Relation, Value};

mod common;
use common::{naive_witnesses, rs_oracle};

const N: usize = 8;

fn relation(n: usize) -> impl Strategy<Value = Relation> {
    proptest::collection::vec((0..n, 0..n), 0..=n * 2)
        .prop_map(move |pairs| Relation::from_pairs(n, pairs).unwrap())
}

fn naive_closure(r: &Relation) -> Relation {
    let mut acc = r.clone();
    loop {
        let mut next = acc.clone();
        for (a, b) in acc.pairs() {
            for (c, d) in r.pairs() {
                if b == c {
                    next.insert(a, d).unwrap();
                }
            }
        }
        if next == acc {
            return acc;
        }
        acc = next;
    }
}

fn petgraph_acyclic(r: &Relation) -> bool {
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..r.universe()).map(|_| g.add_node(())).collect();
    for (a, b) in r.pairs() {
        g.add_edge(nodes[a], nodes[b], ());
    }
    toposort(&g, None).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn acyclic_implies_irreflexive(r in relation(N)) {
        if r.is_acyclic() {
            prop_assert!(r.is_irreflexive());
        }
    }

    #[test]
    fn closure_matches_pairwise_fixpoint(r in relation(N)) {
        prop_assert_eq!(r.transitive_closure(), naive_closure(&r));
    }

    #[test]
    fn compose_is_associative(a in relation(N), b in relation(N), c in relation(N)) {
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn union_and_intersection_commute(a in relation(N), b in relation(N)) {
        prop_assert_eq!(a.union(&b).unwrap(), b.union(&a).unwrap());
        prop_assert_eq!(a.intersection(&b).unwrap(), b.intersection(&a).unwrap());
    }

    #[test]
    fn complement_is_an_involution(r in relation(N)) {
        prop_assert_eq!(r.complement().complement(), r);
    }

    #[test]
    fn acyclicity_agrees_with_toposort(r in relation(N)) {
        prop_assert_eq!(r.is_acyclic(), petgraph_acyclic(&r));
    }

    #[test]
    fn total_order_exists_iff_sc_projection_sorts(seed in any::<u64>(), mask in 0u64..(1 << 6)) {
        let n = 6;
        let sc = EventSet::from_mask(n, mask).unwrap();
        let r = random_relation(seed, n, 0.25);
        let projected = r
            .intersection(&sc.product(&sc).unwrap())
            .unwrap()
            .difference(&Relation::identity(n).unwrap())
            .unwrap();
        prop_assert_eq!(exists_total_order(&sc, &[&r]).unwrap(), petgraph_acyclic(&projected));
    }
}

fn spec(seed: u64, language: Language, max_events: usize) -> RandomCandidateSpec {
    RandomCandidateSpec {
        seed,
        max_events,
        language,
        ..RandomCandidateSpec::default()
    }
}

fn language() -> impl Strategy<Value = Language> {
    prop_oneof![Just(Language::C11), Just(Language::OpenCl)]
}

fn binding(m: &litmus_axiom::catdsl::ModelDef, x: &Execution, w: &Witness, name: &str) -> Relation {
    let exec = ExecStage::new(m, x).unwrap();
    let stage = exec.with_rf_mo(&w.rf, &w.mo).unwrap();
    match stage.eval(&m.binding(name).unwrap().expr).unwrap() {
        Value::Rel(r) => r,
        Value::Set(_) => panic!("{name} is a set"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn generated_candidates_are_well_formed(seed in any::<u64>(), lang in language(), max in 0usize..=8) {
        let (x, w) = gen_candidate(&spec(seed, lang, max));
        prop_assert!(x.len() <= max.max(x.initial.len()));
        prop_assert!(wf_candidate(&x, &w, false));
        let nal = x.nal();
        prop_assert!(w.mo.intersection(&nal.product(&nal).unwrap()).unwrap().is_empty());
        for (src, r) in w.rf.pairs() {
            prop_assert_eq!(x.labels[src].wval, x.labels[r].rval);
        }
        let fences = x.fences();
        for rel in [x.same_loc(), x.same_val()] {
            for (a, b) in rel.pairs() {
                prop_assert!(!fences.contains(a) && !fences.contains(b));
            }
        }
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), lang in language()) {
        prop_assert_eq!(gen_candidate(&spec(seed, lang, 6)), gen_candidate(&spec(seed, lang, 6)));
    }

    #[test]
    fn release_sequences_match_oracle(seed in any::<u64>()) {
        let m = get_model("c11_simp", ModelOptions::default()).unwrap();
        let (x, w) = gen_candidate(&spec(seed, Language::C11, 8));
        prop_assert_eq!(binding(&m, &x, &w, "rs"), rs_oracle(&x, &w.mo));
    }

    #[test]
    fn evaluation_is_pure(seed in any::<u64>(), lang in language()) {
        let name = if lang == Language::C11 { "c11_partial" } else { "opencl_simp" };
        let m = get_model(name, ModelOptions::default()).unwrap();
        let (x, w) = gen_candidate(&spec(seed, lang, 7));
        prop_assert_eq!(check_execution(&x, &w, &m).unwrap(), check_execution(&x, &w, &m).unwrap());
    }

    #[test]
    fn models_without_sc_events_agree(seed in any::<u64>(), lang in language()) {
        let s = RandomCandidateSpec { sc_bias: 0.0, max_sc: 0, ..spec(seed, lang, 7) };
        let (x, w) = gen_candidate(&s);
        prop_assume!(x.with_order(MemoryOrder::Sc).is_empty());
        let names: &[&str] = match lang {
            Language::C11 => &["c11_orig", "c11_partial", "c11_simp"],
            Language::OpenCl => &["opencl_simp", "opencl_scoped"],
        };
        let verdicts: BTreeSet<bool> = names
            .iter()
            .map(|n| {
                let m = get_model(n, ModelOptions::default()).unwrap();
                let w = if *n == "c11_orig" {
                    Witness { s: Some(Relation::empty(x.len()).unwrap()), ..w.clone() }
                } else {
                    w.clone()
                };
                check_execution(&x, &w, &m).unwrap().consistent
            })
            .collect();
        prop_assert_eq!(verdicts.len(), 1);
    }

    #[test]
    fn simp_consistent_implies_partial_consistent(seed in any::<u64>()) {
        let simp = get_model("c11_simp", ModelOptions::default()).unwrap();
        let partial = get_model("c11_partial", ModelOptions::default()).unwrap();
        let (x, w) = gen_candidate(&spec(seed, Language::C11, 7));
        if check_execution(&x, &w, &simp).unwrap().consistent {
            prop_assert!(check_execution(&x, &w, &partial).unwrap().consistent);
        }
    }

    #[test]
    fn scoped_consistent_implies_simp_consistent_when_scopes_agree(seed in any::<u64>()) {
        let simp = get_model("opencl_simp", ModelOptions::default()).unwrap();
        let scoped = get_model("opencl_scoped", ModelOptions::default()).unwrap();
        let (x, w) = gen_candidate(&spec(seed, Language::OpenCl, 7));
        let sc = x.with_order(MemoryOrder::Sc);
        let sc2 = sc.product(&sc).unwrap();
        let conds = binding(&simp, &x, &w, "scond1").intersection(&binding(&simp, &x, &w, "scond2")).unwrap();
        prop_assume!(!conds.is_empty());
        prop_assume!(sc2.is_subset(&binding(&simp, &x, &w, "incl")));
        if check_execution(&x, &w, &scoped).unwrap().consistent {
            prop_assert!(check_execution(&x, &w, &simp).unwrap().consistent);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn witness_enumeration_is_exhaustive(seed in any::<u64>(), lang in language()) {
        let (x, w) = gen_candidate(&spec(seed, lang, 6));
        prop_assume!(x.reads().len() <= 3 && x.with_order(MemoryOrder::Sc).len() <= 4);
        prop_assume!((0..x.locations.len()).all(|l| {
            x.writes().iter().filter(|&e| x.labels[e].loc == Some(l)).count() <= 3
        }));
        let space = WitnessSpace::new(&x).unwrap();
        let listed: Vec<(Relation, Relation)> = space.iter().collect();
        let unique: BTreeSet<(Relation, Relation)> = listed.iter().cloned().collect();
        prop_assert_eq!(listed.len(), unique.len());
        prop_assert_eq!(space.count() as usize, listed.len());
        prop_assert_eq!(unique, naive_witnesses(&x, &w));
    }
}

fn c11_thread() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    // (op, location, order index)
    proptest::collection::vec((0u8..4, 0u8..2, 0u8..3), 1..=2)
}

fn c11_program(threads: &[Vec<(u8, u8, u8)>]) -> String {
    let loc = |l: u8| if l == 0 { "x" } else { "y" };
    let mut bodies = Vec::new();
    for (t, ops) in threads.iter().enumerate() {
        let mut body = String::from("{ ");
        for (i, &(op, l, o)) in ops.iter().enumerate() {
            let s = match op {
                0 => format!("store({}, {}, {}); ", loc(l), t + 1, ["RLX", "REL", "SC"][o as usize]),
                1 => format!("r{t}{i} = load({}, {}); ", loc(l), ["RLX", "ACQ", "SC"][o as usize]),
                2 => format!("r{t}{i} = fetch_inc({}, {}); ", loc(l), ["RLX", "AR", "SC"][o as usize]),
                _ => format!("fence({}); ", ["ACQ", "REL", "SC"][o as usize]),
            };
            body.push_str(&s);
        }
        body.push('}');
        bodies.push(body);
    }
    format!("test random c11\natomic int x, y;\n{}\n", bodies.join("\n||\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pruning_preserves_results(threads in proptest::collection::vec(c11_thread(), 2..=3)) {
        let p = parse_litmus(&c11_program(&threads)).unwrap();
        for name in ["c11_orig", "c11_partial", "c11_simp"] {
            let m = get_model(name, ModelOptions::default()).unwrap();
            let on = allowed(&p, &m, &CheckConfig::default()).unwrap();
            let off = allowed(&p, &m, &CheckConfig { prune: false, ..CheckConfig::default() }).unwrap();
            prop_assert_eq!(&on.outcomes, &off.outcomes, "{}", name);
            prop_assert_eq!(on.verdict, off.verdict);
        }
    }

    #[test]
    fn strengthenings_only_remove_outcomes(threads in proptest::collection::vec(c11_thread(), 2..=3)) {
        let p = parse_litmus(&c11_program(&threads)).unwrap();
        let outcomes = |name: &str| {
            let m = get_model(name, ModelOptions::default()).unwrap();
            allowed(&p, &m, &CheckConfig::default()).unwrap().outcomes.into_keys().collect::<BTreeSet<_>>()
        };
        let (orig, partial, simp) = (outcomes("c11_orig"), outcomes("c11_partial"), outcomes("c11_simp"));
        prop_assert!(orig.is_subset(&partial));
        prop_assert!(simp.is_subset(&partial));
    }

    #[test]
    fn enumeration_is_deterministic_and_well_shaped(threads in proptest::collection::vec(c11_thread(), 2..=3)) {
        let p = parse_litmus(&c11_program(&threads)).unwrap();
        let a = enumerate_basic(&p, &EnumConfig::default()).unwrap();
        prop_assert_eq!(&a, &enumerate_basic(&p, &EnumConfig::default()).unwrap());
        for b in &a.executions {
            let x = &b.exec;
            prop_assert!(x.validate().is_ok());
            prop_assert!(x.thd.is_subset(&x.wg) && x.wg.is_subset(&x.dv));
            for e in x.reads().iter() {
                let l = x.labels[e].loc.unwrap();
                prop_assert!(a.domains[l].contains(&x.labels[e].rval.unwrap()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Each consistent candidate's read values lie in the enumerated domains:
    /// re-running with every domain widened finds no further outcomes.
    #[test]
    fn widened_domains_find_no_new_outcomes(threads in proptest::collection::vec(c11_thread(), 2..=2)) {
        let p = parse_litmus(&c11_program(&threads)).unwrap();
        let m = get_model("c11_simp", ModelOptions::default()).unwrap();
        let base = allowed(&p, &m, &CheckConfig::default()).unwrap();
        let wide: BTreeSet<i64> = (0..=6).collect();
        let mut cfg = CheckConfig::default();
        cfg.enumeration.value_domain_override =
            Some(["x", "y"].iter().map(|l| (l.to_string(), wide.iter().map(|&v| v as _).collect())).collect());
        let widened = allowed(&p, &m, &cfg).unwrap();
        prop_assert_eq!(base.outcomes.keys().collect::<Vec<_>>(), widened.outcomes.keys().collect::<Vec<_>>());
        prop_assert_eq!(base.verdict, widened.verdict);
    }
}
