use pi_bounds::generators::{generate, load, save};
use pi_bounds::{Error, Family, GenSpec};

#[test]
fn save_then_load_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mdp.json");
    let mdp = generate(&GenSpec::new(Family::DenseRandom, 6, 3, 0.99, 11)).unwrap();
    save(&mdp, &path).unwrap();
    assert_eq!(load(&path).unwrap(), mdp);
    let first = std::fs::read(&path).unwrap();
    save(&load(&path).unwrap(), &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn malformed_json_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"n\": 2, \"m\": ").unwrap();
    assert!(matches!(load(&path), Err(Error::Parse(_))));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load(dir.path().join("nope.json")), Err(Error::Io(_))));
}

#[test]
fn perturbed_row_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("off.json");
    let text = r#"{"n":2,"m":1,"gamma":0.9,"transitions":[[[0.5,0.500001]],[[1.0,0.0]]],"rewards":[[0.0],[1.0]]}"#;
    std::fs::write(&path, text).unwrap();
    match load(&path) {
        Err(Error::RowNotStochastic { state, action, .. }) => assert_eq!((state, action), (0, 0)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn header_dimensions_are_checked() {
    let text = r#"{"n":3,"m":1,"gamma":0.9,"transitions":[[[1.0,0.0]],[[0.0,1.0]]],"rewards":[[0.0],[1.0]]}"#;
    let err = pi_bounds::Mdp::from_json(text).unwrap_err();
    assert!(err.to_string().contains("header says n=3"), "{err}");
}

#[test]
fn family_kind_accepts_short_two_block_name() {
    let short: Family = serde_json::from_str(r#"{"kind":"two_block","transient":1,"recurrent":2}"#).unwrap();
    let long: Family =
        serde_json::from_str(r#"{"kind":"two_block_assumption2","transient":1,"recurrent":2}"#).unwrap();
    assert_eq!(short, long);
}
