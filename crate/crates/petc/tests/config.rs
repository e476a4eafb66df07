use petc::config::ScenarioFile;
use petc_core::netsim::DelayModel;
use petc_core::synthesis::{Mode, VmPolicy};

#[test]
fn shipped_example_round_trips() {
    let file = petc::example::file();
    let cfg = file.to_config().unwrap();
    assert_eq!(cfg.mode, Mode::Delay);
    assert_eq!(cfg.vm_policy, VmPolicy::Initial);
    assert_eq!(cfg.n_agents, 4);
    assert_eq!(cfg.edges, vec![(0, 1), (1, 2), (2, 3)]);
    let back = ScenarioFile::from_config(&cfg).to_config().unwrap();
    assert_eq!(back, cfg);
    let text = serde_json::to_vec(&ScenarioFile::from_config(&cfg)).unwrap();
    assert_eq!(ScenarioFile::parse(&text).unwrap().to_config().unwrap(), cfg);
}

#[test]
fn minimal_file_takes_defaults() {
    let text = br#"{"name":"m","plant":{"a":[[0.0]],"b":[[1.0]]},"edges":[[0,1]],"x0":[[1.0],[2.0]],"mode":"no_delay","h":0.01}"#;
    let cfg = ScenarioFile::parse(text).unwrap().to_config().unwrap();
    assert_eq!(cfg.duration, 20.0);
    assert_eq!(cfg.sigma, 0.5);
    assert_eq!(cfg.vm_policy, VmPolicy::Envelope);
    assert!(cfg.eta.is_none());
}

#[test]
fn ragged_matrix_is_rejected() {
    let text = br#"{"name":"m","plant":{"a":[[0.0, 1.0],[2.0]],"b":[[1.0],[0.0]]},"edges":[[0,1]],"x0":[[1.0,0.0],[2.0,0.0]],"mode":"no_delay","h":0.01}"#;
    let err = ScenarioFile::parse(text).and_then(|f| f.to_config()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn delays_above_the_bound_are_rejected() {
    let mut file = petc::example::file();
    file.delays = vec![0.010, 0.016];
    assert_eq!(file.to_config().unwrap_err().exit_code(), 2);
    assert!(DelayModel::new(&[0.016], 0.002, 7, 0, false).is_err());
}
