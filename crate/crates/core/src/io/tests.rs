use super::*;

const DEPHASING: &str = r#"{
  "name": "dephasing-file",
  "in_dims": [2],
  "out_dims": [2],
  "kraus": [
    [[[0.9486832980505138, 0], [0, 0]], [[0, 0], [0.9486832980505138, 0]]],
    [[[0.31622776601683794, 0], [0, 0]], [[0, 0], [-0.31622776601683794, 0]]]
  ],
  "meta": { "strongly_additive": true }
}"#;

#[test]
fn channel_file_round_trip() {
    let loaded = parse_channel_file(DEPHASING, None).unwrap();
    let reference = dephasing(0.1).unwrap();
    assert!(loaded.channel.choi_distance(&reference).unwrap() < 1e-12);
    assert!(matches!(loaded.meta.chi_pot_spec(), Some(ChiPotSpec::StronglyAdditive)));
    let text = serde_json::to_string(&ChannelFile::from_channel(&loaded.channel, loaded.meta.clone())).unwrap();
    let again = parse_channel_file(&text, None).unwrap();
    assert_eq!(again.channel.fingerprint(), loaded.channel.fingerprint());
}

#[test]
fn channel_file_errors() {
    let wrong_dims = DEPHASING.replace(r#""out_dims": [2]"#, r#""out_dims": [3]"#);
    assert!(matches!(parse_channel_file(&wrong_dims, None), Err(Error::Parse(_))));
    let not_tp = DEPHASING.replace("0.31622776601683794", "0.5");
    assert!(matches!(parse_channel_file(&not_tp, None), Err(Error::InvalidChannel(_))));
    let unknown = DEPHASING.replace(r#""name""#, r#""nmae""#);
    assert!(matches!(parse_channel_file(&unknown, None), Err(Error::Parse(_))));
    let negative = DEPHASING.replace(r#""strongly_additive": true"#, r#""declared_chi": -1"#);
    assert!(parse_channel_file(&negative, None).is_err());
}

#[test]
fn declared_capacity_below_estimate_rejected() {
    let low = DEPHASING.replace(r#""strongly_additive": true"#, r#""declared_chi_pot": 0.5"#);
    let opts = HolevoOptions { restarts: 2, max_iters: 100, ..HolevoOptions::default() };
    assert!(matches!(parse_channel_file(&low, Some(&opts)), Err(Error::Unresolvable(_))));
    let fine = DEPHASING.replace(r#""strongly_additive": true"#, r#""declared_chi_pot": 1.0"#);
    assert!(parse_channel_file(&fine, Some(&opts)).is_ok());
}

#[test]
fn named_channels() {
    let e = named_channel("erasure(depolarizing(2, 0.3), 0.5)").unwrap().unwrap();
    assert!(e.channel.is_flagged());
    assert_eq!(e.channel.out_shape().factors(), &[2, 2]);
    assert!(e.meta.chi_pot_spec().is_none());
    let t = named_channel("trivial(3)").unwrap().unwrap();
    assert!(matches!(t.meta.chi_pot_spec(), Some(ChiPotSpec::Declared(v)) if v == 0.0));
    assert!(named_channel("identity(2)").unwrap().unwrap().meta.strongly_additive == Some(true));
    assert!(named_channel("something.json").unwrap().is_none());
    assert!(named_channel("identity(2").is_err());
    assert!(named_channel("identity(2, 3)").is_err());
    assert!(named_channel("depolarizing(2, 1.5)").is_err());
    assert!(named_channel("erasure(nope(1), 0.5)").is_err());
}

#[test]
fn resolve_channel_from_file() {
    let dir = std::env::temp_dir().join(format!("herald-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("deph.json"), DEPHASING).unwrap();
    let c = resolve_channel("deph.json", &dir, None).unwrap();
    assert_eq!(c.channel.name(), "dephasing-file");
    assert!(matches!(resolve_channel("missing.json", &dir, None), Err(Error::Unresolvable(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn game_file_round_trip() {
    let g = Game::chsh();
    let text = serde_json::to_string(&GameFile::from_game(&g)).unwrap();
    assert!(text.contains(r#""nX":2"#) && text.contains(r#""1/4""#));
    assert_eq!(parse_game_file(&text).unwrap(), g);
    assert_eq!(resolve_game("chsh", Path::new(".")).unwrap(), g);
}

#[test]
fn game_file_errors() {
    let g = serde_json::to_value(GameFile::from_game(&Game::chsh())).unwrap();
    let mut bad = g.clone();
    bad["v"][0][0][0][0] = 2.into();
    assert!(parse_game_file(&bad.to_string()).is_err());
    let mut short = g.clone();
    short["pi"][0] = serde_json::json!(["1/4"]);
    assert!(parse_game_file(&short.to_string()).is_err());
    let mut floats = g;
    floats["pi"] = serde_json::json!([[0.25, 0.25], [0.25, 0.25]]);
    assert!(!parse_game_file(&floats.to_string()).unwrap().is_exact());
}

#[test]
fn state_suite() {
    let text = r#"{
      "name": "suite",
      "states": [
        { "name": "bell", "dims": [2, 2], "named": "bell", "analytic_esq": 1.0, "analytic_note": "pure" },
        { "name": "cc", "dims": [2, 2],
          "matrix": [[[0.5,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[0,0]],
                     [[0,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[0.5,0]]],
          "analytic_esq": 0.0 },
        { "name": "bell-anc", "dims": [2, 2, 2], "named": "product(bell, plus)", "b": [1] }
      ]
    }"#;
    let s = parse_state_suite(text).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s[0].analytic_esq, Some(1.0));
    assert_eq!((s[1].a.clone(), s[1].b.clone()), (vec![0], vec![1]));
    assert_eq!(s[2].b, vec![1]);
    assert_eq!(s[2].state.dims(), &[2, 2, 2]);
}

#[test]
fn state_suite_errors() {
    let both = r#"{"name":"s","states":[{"name":"x","dims":[2,2],"named":"bell","matrix":[]}]}"#;
    assert!(parse_state_suite(both).is_err());
    let dims = r#"{"name":"s","states":[{"name":"x","dims":[2,3],"named":"bell"}]}"#;
    assert!(parse_state_suite(dims).is_err());
    let overlap = r#"{"name":"s","states":[{"name":"x","dims":[2,2],"named":"bell","a":[0],"b":[0]}]}"#;
    assert!(matches!(parse_state_suite(overlap), Err(Error::Overlap(0))));
    let unknown = r#"{"name":"s","states":[{"name":"x","dims":[2,2],"named":"bogus"}]}"#;
    assert!(parse_state_suite(unknown).is_err());
    assert!(named_state("werner(1.5)").is_err());
    assert!((named_state("werner(0.5)").unwrap().matrix().trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn matrix_literal_validation() {
    let lit: MatrixLiteral = vec![vec![[1.0, 0.0], [0.0, 1.0]]];
    assert!(matrix_from_literal(&lit, 1, 2).is_ok());
    assert!(matrix_from_literal(&lit, 2, 1).is_err());
    assert!(matrix_from_literal(&lit, 1, 3).is_err());
    let m = matrix_from_literal(&lit, 1, 2).unwrap();
    assert_eq!(matrix_to_literal(&m), lit);
}
