use std::path::PathBuf;

use collabopt::harness::{RunConfig, WeightsConfig};
use collabopt::human_motion::{HumanTrajectory, SkeletonOffsets};
use collabopt::kinematics::{ChainSpec, JointTrajectory};
use collabopt::scenario::{generate_scenario, Family, Scenario};
use collabopt::Error;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

#[test]
fn shipped_files_load() {
    let dir = config_dir();
    assert_eq!(ChainSpec::load(dir.join("chain.toml")).unwrap(), ChainSpec::default_arm());
    assert_eq!(SkeletonOffsets::load(dir.join("skeleton.toml")).unwrap(), SkeletonOffsets::default());
    assert_eq!(WeightsConfig::load(dir.join("weights.toml")).unwrap(), WeightsConfig::default());
}

#[test]
fn artifacts_roundtrip_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let chain = cfg.load_chain().unwrap();
    let sc = generate_scenario(Family::ReachingFar, 3, &chain, &cfg.geometry).unwrap();
    let p = tmp.path().join("s.json");
    sc.save(&p).unwrap();
    assert_eq!(Scenario::load(&p).unwrap(), sc);

    let truth = sc.human_truth(&cfg.geometry, &SkeletonOffsets::default()).unwrap();
    let p = tmp.path().join("h.txt");
    truth.save(&p).unwrap();
    let back = HumanTrajectory::load(&p).unwrap();
    assert_eq!(back.len(), truth.len());
    assert_eq!(back.to_text(), truth.to_text());

    let traj = JointTrajectory::new(vec![sc.robot_start.clone(), sc.robot_goal.clone(), sc.robot_goal.clone()], 0.25, 1.0).unwrap();
    let p = tmp.path().join("t.traj");
    traj.save(&p).unwrap();
    assert_eq!(JointTrajectory::load(&p).unwrap(), traj);

    let p = tmp.path().join("chain.toml");
    chain.save(&p).unwrap();
    assert_eq!(ChainSpec::load(&p).unwrap(), chain);
}

#[test]
fn missing_and_malformed_files_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let err = RunConfig::load(&missing).unwrap_err();
    assert!(matches!(err, Error::Io { .. }) && err.to_string().contains("nope.toml"));
    let bad = tmp.path().join("bad.traj");
    std::fs::write(&bad, "not a trajectory\n").unwrap();
    let err = JointTrajectory::load(&bad).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }) && err.to_string().contains("bad.traj"));
}
