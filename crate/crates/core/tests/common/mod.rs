//! Brute-force oracles shared by the property and acceptance suites.

use std::collections::BTreeSet;

use litmus_axiom::events::{wf_candidate, Execution, Kind, Witness};
use litmus_axiom::relalg::Relation;

/// Release sequences from their definition: `b` continues `a`'s sequence iff
/// every write `mo`-after `a` up to `b` is on `a`'s thread or an RMW.
pub fn rs_oracle(x: &Execution, mo: &Relation) -> Relation {
    let n = x.len();
    let mut rs = Relation::empty(n).unwrap();
    for (a, b) in mo.pairs() {
        let continues = |c: usize| x.thd.contains(a, c) || x.labels[c].kind == Kind::Rmw;
        let between = (0..n).filter(|&c| mo.contains(a, c) && (c == b || mo.contains(c, b)));
        if between.clone().all(continues) {
            rs.insert(a, b).unwrap();
        }
    }
    rs
}

/// Every `(rf, mo)` over `x` passing the well-formedness check, by brute
/// force. The check splits into independent `rf` and `mo` parts, so each is
/// enumerated against the other half of a known well-formed `anchor`.
pub fn naive_witnesses(x: &Execution, anchor: &Witness) -> BTreeSet<(Relation, Relation)> {
    let n = x.len();
    let reads: Vec<usize> = x.reads().iter().collect();
    let nal = x.nal();
    let writes = x.writes();
    let mo_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            a != b && writes.contains(a) && writes.contains(b) && !nal.contains(a) && x.labels[a].loc == x.labels[b].loc
        })
        .collect();
    let wf = |rf: &Relation, mo: &Relation| {
        wf_candidate(x, &Witness { rf: rf.clone(), mo: mo.clone(), s: None }, false)
    };
    let mut rfs = Vec::new();
    for code in 0..n.pow(reads.len() as u32) {
        let mut c = code;
        let mut rf = Relation::empty(n).unwrap();
        for &r in &reads {
            rf.insert(c % n, r).unwrap();
            c /= n;
        }
        if wf(&rf, &anchor.mo) {
            rfs.push(rf);
        }
    }
    let mut mos = Vec::new();
    for bits in 0u64..(1 << mo_pairs.len()) {
        let mo = Relation::from_pairs(
            n,
            mo_pairs.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, p)| *p),
        )
        .unwrap();
        if wf(&anchor.rf, &mo) {
            mos.push(mo);
        }
    }
    let mut out = BTreeSet::new();
    for rf in &rfs {
        for mo in &mos {
            assert!(wf(rf, mo), "well-formedness does not split");
            out.insert((rf.clone(), mo.clone()));
        }
    }
    out
}
