use std::time::Instant;

use arenabench::agents::MockLlm;
use arenabench::harness::{
    run_episode, tutorial_response_list, EpisodeConfig, PromptMode, PromptPart, PromptTemplate,
    TaskPack,
};
use arenabench::protocol::{InProcessLink, Session, SessionPolicy};
use arenabench::render::CameraModel;

#[test]
fn scripted_walkthrough_solves_tutorial() {
    let started = Instant::now();
    let spec = TaskPack::tutorial().unwrap();
    let agent = MockLlm::new(tutorial_response_list());
    let mut session = Session::new("tutorial", Box::new(InProcessLink::new(agent)), SessionPolicy {
        max_scripts_per_episode: 50,
        ..SessionPolicy::default()
    });
    let cfg = EpisodeConfig {
        camera: CameraModel::with_resolution(64, 64),
        ..EpisodeConfig::default()
    };
    let r = run_episode(&spec, &mut session, &PromptTemplate::base(), &cfg).unwrap();
    eprintln!("{:?} {:?}", r.record, r.final_state.agent_pos);
    assert!(r.record.passed);
    assert!(r.record.final_reward.unwrap() > 0.0);
    assert_eq!(r.record.termination.as_deref(), Some("goal_reached"));
    assert_eq!(r.record.scripts_used, Some(42));
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn worked_example_prompt() {
    let t = PromptTemplate::new(PromptMode::Icl, &CameraModel::with_resolution(64, 64)).unwrap();
    t.validate().unwrap();
    assert_eq!(t.icl_transcript.len(), 44);
    assert_eq!(t.icl_transcript.last().unwrap().response.as_deref().map(|r| r.ends_with("Go(10);")), Some(true));
    assert!(t.icl_transcript.iter().all(|e| matches!(e.image, PromptPart::Image { .. })));
}
