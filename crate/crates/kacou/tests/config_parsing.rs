use kacou::config::{parse_document, parse_override, RunConfig};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(256) }
}

const BASE: &str = "[model]\nlambda0 = 1\nlambda1 = 2\na0 = 0\na1 = 1\ngamma0 = 1\ngamma1 = 1\n";

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn arbitrary_text_never_panics(text in "(?s).{0,200}") {
        if let Ok(doc) = parse_document(&text) {
            let again = parse_document(&doc.canonical()).unwrap();
            prop_assert_eq!(again, doc);
        }
        let _ = RunConfig::from_text(&text, &[]);
    }

    #[test]
    fn canonical_round_trips(
        entries in prop::collection::btree_map("[a-z]{1,3}(\\.[a-z_0-9]{1,4})?", "[ -~&&[^#=]]{0,12}", 0..12)
    ) {
        let mut doc = parse_document("").unwrap();
        for (k, v) in &entries {
            doc.set(k.clone(), v.trim().to_string());
        }
        let again = parse_document(&doc.canonical()).unwrap();
        prop_assert_eq!(again, doc);
    }

    #[test]
    fn overrides_round_trip_through_canonical(v in "[ -~]{0,10}") {
        let o = format!("fpt.q={v}");
        if let Ok((k, val)) = parse_override(&o) {
            let mut doc = parse_document(BASE).unwrap();
            doc.set(k, val);
            prop_assert_eq!(parse_document(&doc.canonical()).unwrap(), doc);
        }
    }

    #[test]
    fn valid_rates_are_accepted(l0 in 1e-3f64..1e3, l1 in 1e-3f64..1e3) {
        let text = BASE.replace("lambda0 = 1", &format!("lambda0 = {l0}")).replace("lambda1 = 2", &format!("lambda1 = {l1}"));
        let c = RunConfig::from_text(&text, &[]).unwrap();
        prop_assert_eq!(c.model.rates.lambda0, l0);
        prop_assert_eq!(c.model.rates.lambda1, l1);
    }
}

#[test]
fn override_values_with_comment_marks_are_rejected() {
    assert!(parse_override("model.a0=1#2").is_err());
    assert!(parse_override("model.a0=1\n[x]").is_err());
}

#[test]
fn canonical_text_is_independent_of_layout() {
    let a = RunConfig::from_text(BASE, &[]).unwrap();
    let shuffled = "# comment\n[model]\ngamma1=1\ngamma0 = 1\na1 = 1\n\na0 = 0\nlambda1 = 2\nlambda0 = 1\n";
    let b = RunConfig::from_text(shuffled, &[]).unwrap();
    assert_eq!(a.canonical, b.canonical);
}
