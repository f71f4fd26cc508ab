//! The shipped model texts.
//!
//! `c11_orig` keeps the postulated total order over SC events and checks it
//! with seven irreflexivity axioms. `c11_partial` replaces them by a single
//! acyclicity axiom over the union of their relations (with the `S4a` form of
//! the fourth). `c11_simp` strengthens that axiom so it collapses to one short
//! acyclicity check. `opencl_simp` is the scoped OpenCL model with the same
//! collapsed SC axiom, guarded by the two whole-execution SC conditions.
//! `opencl_scoped` drops the guards and intersects with scope inclusion
//! instead.

use thiserror::Error;

use crate::catdsl::{parse_model, ModelDef};

pub const BUILTIN_MODELS: [&str; 5] = ["c11_orig", "c11_partial", "c11_simp", "opencl_simp", "opencl_scoped"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelOptions {
    /// Use the one-sided scope inclusion, intersected with its inverse.
    pub new_incl: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown model `{0}` (expected one of c11_orig, c11_partial, c11_simp, opencl_simp, opencl_scoped)")]
pub struct UnknownModel(pub String);

const C11_BASE: &str = r"
let acq = ACQ | AR | (SC & (R | F))
let rel = REL | AR | (SC & (W | F))
let fr = rf^-1 ; mo
let Fsb = [F] ; sb
let sbF = sb ; [F]
let rs' = thd | (E2 ; [R & W])
let rs = mo & rs' \ ((mo \ rs') ; mo)
let sw = ([rel] ; Fsb? ; [A & W] ; rs? ; rf ; [R & A] ; sbF? ; [acq]) \ thd
let hb = (sb | (I * ~I) | sw)+
let hbl = hb & loc
let vis = (W * R) & hbl \ (hbl ; [W] ; hb)
# initial events lie outside thd, so self-pairs are dropped here
let cnf = ((W * W) | (W * R) | (R * W)) & loc \ id
let dr = cnf \ hb \ hb^-1 \ (A * A) \ thd

irreflexive hb as Hb
irreflexive (rf^-1)? ; mo ; rf? ; hb as Coh
irreflexive rf ; hb as Rf
empty (rf ; [nal]) \ vis as NaRf
irreflexive rf | (mo ; mo ; rf^-1) | (mo ; rf) as Rmw
";

const SC_RELATIONS: &str = r"
let r1 = hb
let r2 = Fsb? ; mo ; sbF?
let r3 = rf^-1 ; [SC] ; mo
let r4 = rf^-1 ; hbl ; [W]
let r5 = Fsb ; fr
let r6 = fr ; sbF
let r7 = Fsb ; fr ; sbF
";

const C11_ORIG_SC: &str = r"
irreflexive S ; r1 as S1
irreflexive S ; r2 as S2
irreflexive S ; r3 as S3
irreflexive (S \ (mo ; S)) ; r4 as S4
irreflexive S ; r5 as S5
irreflexive S ; r6 as S6
irreflexive S ; r7 as S7
";

const C11_PARTIAL_SC: &str = r"
acyclic (SC * SC \ id) & (r1 | r2 | r3 | r4 | r5 | r6 | r7) as Spartial
";

const C11_SIMP_SC: &str = r"
acyclic (SC * SC \ id) & (Fsb? ; (hb | fr | mo) ; sbF?) as Ssimp
";

const C11_UB: &str = r"
undefined_unless empty dr as Dr
";

const INCL: &str = r"
let incl = (WG * WG & wg) | (DV * DV & dv) | (ALL * ALL)
";

const NEW_INCL: &str = r"
let incl1 = ([WG] ; wg) | ([DV] ; dv) | ([ALL] ; E2)
let incl = incl1 & incl1^-1
";

// Initial events lie outside dv, so pairs with them are dropped from iddr.
const OPENCL_BASE: &str = r"
let acq = ACQ | AR | (SC & (R | F))
let rel = REL | AR | (SC & (W | F))
let fr = rf^-1 ; mo
let Fsb = [F] ; sb
let sbF = sb ; [F]
let rs' = thd | (E2 ; [R & W])
let rs = mo & rs' \ ((mo \ rs') ; mo)
let rswG = ([G & rel] ; Fsb? ; [W & A] ; rs? ; [G] ; rf ; [R & A] ; sbF? ; [G & acq]) & incl \ thd
let rswL = ([L & rel] ; Fsb? ; [W & A] ; rs? ; [L] ; rf ; [R & A] ; sbF? ; [L & acq]) & incl \ thd
let scboth = (SC * SC) | ((G & L & F) * (G & L & F))
let gsw = rswG | (rswL & scboth)
let lsw = rswL | (rswG & scboth)
let ghb = ((G * G) & (sb | (I * ~I)) | gsw)+
let lhb = ((L * L) & (sb | (I * ~I)) | lsw)+
let ghbl = ghb & loc
let lhbl = lhb & loc
let gvis = (W * R) & ghbl \ (ghbl ; [W] ; ghb)
let lvis = (W * R) & lhbl \ (lhbl ; [W] ; lhb)
# initial events lie outside thd, so self-pairs are dropped here
let cnf = ((W * W) | (W * R) | (R * W)) & loc \ id
let hr = cnf \ (ghb | lhb) \ (ghb | lhb)^-1 \ incl \ thd
let iddr = (cnf \ dv \ (fgb * fgb)) & (~I * ~I)
let scond1 = ~(E2 ; [SC \ (ALL & fgb)] ; E2)
let scond2 = ~(E2 ; [SC \ (DV \ fgb)] ; E2)

irreflexive ghb as HbG
irreflexive lhb as HbL
irreflexive (rf^-1)? ; mo ; rf? ; ghb as CohG
irreflexive (rf^-1)? ; mo ; rf? ; lhb as CohL
irreflexive rf ; (ghb | lhb) as Rf
empty (rf ; [G & nal]) \ gvis as NaRfG
empty (rf ; [L & nal]) \ lvis as NaRfL
irreflexive rf | (mo ; mo ; rf^-1) | (mo ; rf) as Rmw
";

const OPENCL_SIMP_SC: &str = r"
acyclic (SC * SC \ id) & (scond1 | scond2) & (Fsb? ; (ghb | lhb | fr | mo) ; sbF?) as Ssimp
";

const OPENCL_SCOPED_SC: &str = r"
acyclic (SC * SC \ id) & (Fsb? ; (ghb | lhb | fr | mo) ; sbF?) & incl as Sscoped
";

const OPENCL_UB: &str = r"
undefined_unless empty hr as Hr
undefined_unless empty iddr as Iddr
";

/// Source text of a built-in model.
pub fn model_text(name: &str, options: ModelOptions) -> Result<String, UnknownModel> {
    let incl = if options.new_incl { NEW_INCL } else { INCL };
    let parts: Vec<&str> = match name {
        "c11_orig" => vec!["witness S linear over SC\n", C11_BASE, SC_RELATIONS, C11_ORIG_SC, C11_UB],
        "c11_partial" => vec![C11_BASE, SC_RELATIONS, C11_PARTIAL_SC, C11_UB],
        "c11_simp" => vec![C11_BASE, C11_SIMP_SC, C11_UB],
        "opencl_simp" => vec![incl, OPENCL_BASE, OPENCL_SIMP_SC, OPENCL_UB],
        "opencl_scoped" => vec![incl, OPENCL_BASE, OPENCL_SCOPED_SC, OPENCL_UB],
        other => return Err(UnknownModel(other.to_string())),
    };
    Ok(parts.concat())
}

pub fn get_model(name: &str, options: ModelOptions) -> Result<ModelDef, UnknownModel> {
    let text = model_text(name, options)?;
    let mut m = parse_model(&text).expect("built-in models parse");
    m.name = name.to_string();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catdsl::{Level, Predicate, Tag};

    fn names(m: &ModelDef, tag: Tag) -> Vec<&str> {
        m.constraints.iter().filter(|c| c.tag == tag).map(|c| c.name.as_str()).collect()
    }

    #[test]
    fn all_builtins_parse() {
        for name in BUILTIN_MODELS {
            for new_incl in [false, true] {
                let m = get_model(name, ModelOptions { new_incl }).unwrap();
                assert_eq!(m.name, name);
            }
        }
        assert!(get_model("c11_nope", ModelOptions::default()).is_err());
    }

    #[test]
    fn c11_simp_axioms() {
        let m = get_model("c11_simp", ModelOptions::default()).unwrap();
        assert_eq!(m.count(Tag::Consistency), 6);
        assert_eq!(m.count(Tag::Undefined), 1);
        assert_eq!(names(&m, Tag::Consistency), ["Hb", "Coh", "Rf", "NaRf", "Rmw", "Ssimp"]);
        assert!(!m.needs_witness());
    }

    #[test]
    fn c11_orig_declares_witness_over_sc() {
        let m = get_model("c11_orig", ModelOptions::default()).unwrap();
        let w = m.witness().unwrap();
        assert_eq!(w.name, "S");
        assert_eq!(m.show(&w.over), "SC");
        assert_eq!(
            names(&m, Tag::Consistency),
            ["Hb", "Coh", "Rf", "NaRf", "Rmw", "S1", "S2", "S3", "S4", "S5", "S6", "S7"]
        );
        assert_eq!(names(&m, Tag::Undefined), ["Dr"]);
        for s in ["S1", "S2", "S3", "S5", "S6", "S7"] {
            let c = m.constraint(s).unwrap();
            assert_eq!(c.predicate, Predicate::Irreflexive);
            assert_eq!(c.expr.level, Level::Order);
            assert_eq!(m.show(&c.expr), format!("(S;r{})", &s[1..]));
        }
        assert_eq!(m.show(&m.constraint("S4").unwrap().expr), "((S\\(mo;S));r4)");
        for other in ["c11_partial", "c11_simp", "opencl_simp", "opencl_scoped"] {
            assert!(!get_model(other, ModelOptions::default()).unwrap().needs_witness());
        }
    }

    #[test]
    fn c11_partial_uses_s4a_relations() {
        let m = get_model("c11_partial", ModelOptions::default()).unwrap();
        assert_eq!(names(&m, Tag::Consistency), ["Hb", "Coh", "Rf", "NaRf", "Rmw", "Spartial"]);
        assert_eq!(m.show(&m.binding("r4").unwrap().expr), "((rf^-1;hbl);[W])");
        assert_eq!(m.show(&m.binding("r3").unwrap().expr), "((rf^-1;[SC]);mo)");
    }

    #[test]
    fn derived_c11_relations() {
        let m = get_model("c11_orig", ModelOptions::default()).unwrap();
        let show = |n: &str| m.show(&m.binding(n).unwrap().expr);
        assert_eq!(show("rs"), "((mo&rs')\\((mo\\rs');mo))");
        assert_eq!(show("hb"), "((sb|(I*~I))|sw)+");
        assert_eq!(show("vis"), "(((W*R)&hbl)\\((hbl;[W]);hb))");
        assert_eq!(show("dr"), "((((cnf\\hb)\\hb^-1)\\(A*A))\\thd)");
    }

    #[test]
    fn opencl_incl_variants() {
        let m = get_model("opencl_simp", ModelOptions::default()).unwrap();
        assert_eq!(
            m.show(&m.binding("incl").unwrap().expr),
            "((((WG*WG)&wg)|((DV*DV)&dv))|(ALL*ALL))"
        );
        assert_eq!(
            names(&m, Tag::Consistency),
            ["HbG", "HbL", "CohG", "CohL", "Rf", "NaRfG", "NaRfL", "Rmw", "Ssimp"]
        );
        assert_eq!(names(&m, Tag::Undefined), ["Hr", "Iddr"]);
        let m = get_model("opencl_simp", ModelOptions { new_incl: true }).unwrap();
        assert_eq!(m.show(&m.binding("incl").unwrap().expr), "(incl1&incl1^-1)");
        let m = get_model("opencl_scoped", ModelOptions::default()).unwrap();
        assert_eq!(
            names(&m, Tag::Consistency),
            ["HbG", "HbL", "CohG", "CohL", "Rf", "NaRfG", "NaRfL", "Rmw", "Sscoped"]
        );
        assert_eq!(
            m.show(&m.binding("scond1").unwrap().expr),
            "~((E2;[(SC\\(ALL&fgb))]);E2)"
        );
    }
}
