use gazekit_core::acquisition::label_gaze;
use gazekit_core::adapt::{adapt_train, AdaptConfig};
use gazekit_core::eval::export_distribution_map;
use gazekit_core::geometry::spherical_error;
use gazekit_core::regressor::{
    evaluate_split, load_checkpoint, predict_split, save_checkpoint, train, Architecture, LossKind, ModelKind,
    TrainConfig,
};
use gazekit_core::simulator::{
    export_dataset, load_dataset, simulate_session, simulate_sessions, split_sessions, NoiseConfig, SessionConfig,
    SplitRatios,
};

fn small_arch() -> Architecture {
    Architecture { hidden: 16, feature_dim: 8, state_size: 8, ..Default::default() }
}

fn small_train(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig { lr: 3e-3, epochs, batch_size: 32, seed, ..Default::default() }
}

#[test]
fn noiseless_labels_reproduce_ground_truth() {
    let cfg = SessionConfig { noise: NoiseConfig::noiseless(), ..Default::default() };
    let s = simulate_session(&cfg, 0).unwrap();
    let rig = cfg.rig();
    for r in &s.records {
        let l = label_gaze(&r.detection, &r.marker, &cfg.board, &rig).unwrap();
        assert!(spherical_error(l.spherical, r.gt_gaze) < 1e-9);
    }
}

#[test]
fn subjects_never_straddle_splits() {
    let cfg = SessionConfig::default();
    let data = split_sessions(&simulate_sessions(&cfg, 4).unwrap(), SplitRatios::default(), 7, 3).unwrap();
    let (tr, va, te) = (data.train.subject_ids(), data.val.subject_ids(), data.test.subject_ids());
    assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
    assert!(!te.is_empty());
}

#[test]
fn exported_dataset_reloads_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SessionConfig { seed: 2, ..Default::default() };
    let sessions = simulate_sessions(&cfg, 3).unwrap();
    let written = export_dataset(&sessions, SplitRatios::default(), 7, 2, dir.path()).unwrap();
    let read = load_dataset(dir.path(), 7).unwrap();
    assert_eq!(written.train.records(), read.train.records());
    assert_eq!(written.test.records(), read.test.records());
    assert_eq!(written.test.len(), read.test.len());
}

#[test]
fn a_full_session_covers_the_whole_yaw_range() {
    let dir = tempfile::tempdir().unwrap();
    let s = simulate_session(&SessionConfig::default(), 0).unwrap();
    let gts: Vec<_> = s.records.iter().map(|r| r.gt_gaze).collect();
    let h = export_distribution_map(&gts, &dir.path().join("map.svg")).unwrap();
    let (lo, hi) = h.column_extent().unwrap();
    // Walking a loop around the subject sweeps yaw through ±180°, whose
    // Mollweide columns sit at the edges of the equator row.
    assert!(lo <= 2 && hi >= h.cols - 3, "columns {lo}..{hi}");
    assert!(h.lit_cells() > 50);
    assert!(std::fs::read_to_string(dir.path().join("map.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn training_beats_initialisation_and_checkpoints_round_trip() {
    let cfg = SessionConfig { seed: 4, ..Default::default() };
    let data = split_sessions(&simulate_sessions(&cfg, 4).unwrap(), SplitRatios::default(), 7, 4).unwrap();
    let tc = small_train(4, 4);
    let out = train(&data, &tc, ModelKind::Trn, small_arch()).unwrap();
    assert!(out.history[out.best_epoch].val_loss < out.history[0].val_loss);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_checkpoint(&path, &out.params, &tc).unwrap();
    let (back, back_cfg) = load_checkpoint(&path).unwrap();
    assert_eq!(back_cfg, tc);
    assert_eq!(predict_split(&back, &data.test).unwrap(), predict_split(&out.params, &data.test).unwrap());
}

#[test]
fn training_is_deterministic() {
    let cfg = SessionConfig { seed: 5, ..Default::default() };
    let data = split_sessions(&simulate_sessions(&cfg, 3).unwrap(), SplitRatios::default(), 7, 5).unwrap();
    let tc = TrainConfig { loss_kind: LossKind::Mse, ..small_train(5, 2) };
    let a = train(&data, &tc, ModelKind::Lstm, small_arch()).unwrap();
    let b = train(&data, &tc, ModelKind::Lstm, small_arch()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
}

#[test]
fn adaptation_on_matched_domains_does_no_harm() {
    let cfg = SessionConfig { seed: 6, ..Default::default() };
    let src = split_sessions(&simulate_sessions(&cfg, 4).unwrap(), SplitRatios::default(), 7, 6).unwrap();
    let tgt_cfg = SessionConfig { seed: 106, ..Default::default() };
    let tgt = split_sessions(&simulate_sessions(&tgt_cfg, 4).unwrap(), SplitRatios::default(), 7, 6).unwrap();
    let base = train(&src, &small_train(6, 8), ModelKind::Static, small_arch()).unwrap().params;
    let acfg = AdaptConfig { grad_reversal_scale: 3.0, epochs: 2, lr: 1e-3, batch_size: 32, seed: 6, ..Default::default() };
    let out = adapt_train(&base, &src, &tgt.train, &acfg).unwrap();
    assert_eq!(out.history.len(), 2);
    let before = evaluate_split(&base, &tgt.test).unwrap().1;
    let after = evaluate_split(&out.params, &tgt.test).unwrap().1;
    assert!(after < before * 1.1, "{before} -> {after}");
}
