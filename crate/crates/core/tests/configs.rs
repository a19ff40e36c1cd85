use ftlab::bundled;
use ftlab::propagate::Propagation;
use ftlab::protocol::config::{load_protocol, ConfigDocument};
use ftlab::protocol::presets::{driven_qubit, qubit_double, qubit_single, DrivenQubit, Variant};
use ftlab::protocol::Protocol;
use ftlab::thermo::exact_summary;
use ftlab::trajectory::{run_trajectory, RngStream};

fn with(name: &str, params: &[(&str, f64)]) -> Protocol {
    let mut d = bundled::document(name).unwrap();
    for (k, v) in params {
        d.set_parameter(k, *v).unwrap();
    }
    d.build().unwrap()
}

fn same_exact(a: &Protocol, b: &Protocol) {
    let (x, y) = (exact_summary(a, Propagation::Unraveled).unwrap(), exact_summary(b, Propagation::Unraveled).unwrap());
    for (u, v) in [
        (x.mean_sigma, y.mean_sigma),
        (x.mean_sigma_cg, y.mean_sigma_cg),
        (x.transfer_entropy, y.transfer_entropy),
        (x.work, y.work),
        (x.exp_neg_sigma, y.exp_neg_sigma),
    ] {
        assert!((u - v).abs() <= 1e-13, "{}: {u} vs {v}", a.name());
    }
}

#[test]
fn discrete_documents_match_the_presets() {
    for (v, tag) in [(Variant::Classical, "classical"), (Variant::Quantum, "quantum")] {
        same_exact(&with(&format!("single-{tag}"), &[("epsilon", 0.2)]), &qubit_single(v, 1.0, 0.2).unwrap());
        same_exact(&with(&format!("double-{tag}-kdt1"), &[("epsilon", 0.3)]), &qubit_double(v, 1.0, 0.3, 1.0).unwrap());
        same_exact(&with(&format!("double-{tag}-kdt0.2"), &[("epsilon", 0.05)]), &qubit_double(v, 1.0, 0.05, 0.2).unwrap());
    }
}

#[test]
fn continuous_document_matches_the_preset() {
    let doc = with("driven-monitored", &[("kappa_m", 5.0)]);
    let preset = driven_qubit(&DrivenQubit { kappa_m: 5.0, ..Default::default() }).unwrap();
    for i in 0..30 {
        let a = run_trajectory(&doc, &mut RngStream::new(4, i)).unwrap();
        let b = run_trajectory(&preset, &mut RngStream::new(4, i)).unwrap();
        assert_eq!((a.a, a.f, a.outcomes.outcomes(), a.jumps.len()), (b.a, b.f, b.outcomes.outcomes(), b.jumps.len()));
        assert!((a.ln_probability - b.ln_probability).abs() < 1e-12);
    }
}

#[test]
fn bundled_sweeps_parse() {
    for name in bundled::names() {
        let d = bundled::document(name).unwrap();
        let s = d.sweep().unwrap().expect("every bundled document declares a sweep");
        assert!(d.parameters().contains_key(&s.parameter), "{name}");
        assert_eq!(d.is_continuous(), name.starts_with("driven"));
    }
    let s = bundled::document("driven-monitored").unwrap().sweep().unwrap().unwrap();
    assert_eq!((s.values.as_slice(), s.n_traj), ([0.1, 1.0, 5.0].as_slice(), 100_000));
}

#[test]
fn errors_name_their_location() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fixtures/corrupted-povm.json");
    let e = ConfigDocument::from_path(fixture).unwrap().build().unwrap_err();
    assert!(e.is_config());
    assert!(e.to_string().contains("mode.events[0].kraus"), "{e}");

    let cases = [
        (r#"{"schema": "ftlab/protocol-v1", "beta": 1, "tau": 1, "mode": {"type": "discrete", "events": []}}"#, "dim"),
        (r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": "1 +", "tau": 1, "mode": {"type": "discrete", "events": []}}"#, "beta"),
        (r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": "$nope", "tau": 1, "mode": {"type": "discrete", "events": []}}"#, "beta"),
        (r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": 1, "tau": 1, "hamiltonian": "w",
             "mode": {"type": "discrete", "events": []}}"#, "hamiltonian"),
        (r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": 1, "tau": 1,
             "channels": [{"label": "down", "operator": "lower", "heat": 1, "partner": "up"},
                          {"label": "up", "operator": "raise", "heat": -1, "partner": "down"}],
             "mode": {"type": "discrete", "events": []}}"#, "detailed balance"),
        (r#"{"schema": "ftlab/protocol-v1", "dim": 2, "beta": 1, "tau": 1,
             "mode": {"type": "discrete", "events": [{"time": 0.5, "kraus": {"family": "projective"}}]},
             "feedback": [{"outcome": "7", "unitary": "x"}]}"#, "feedback[0].outcome"),
    ];
    for (text, needle) in cases {
        let e = load_protocol(text).unwrap_err();
        assert!(e.to_string().contains(needle), "`{e}` should mention {needle}");
    }
}
