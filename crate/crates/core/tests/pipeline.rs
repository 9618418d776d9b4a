mod common;

use common::{series_from, sine};
use proptest::prelude::*;
use stockgan_core::generator::generator_forward;
use stockgan_core::ingest::split_chronological;
use stockgan_core::trainer::*;

fn small(kind: ModelKind) -> TrainConfig {
    TrainConfig {
        model_kind: kind,
        m: 12,
        hidden_size: 6,
        epochs: 8,
        batch_size: 16,
        seed: 7,
        timing: false,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let s = series_from("SINE", &sine(240, 25.0));
    for kind in [ModelKind::Gan, ModelKind::LstmBaseline] {
        let a = run_pipeline(&s, &small(kind)).unwrap();
        let b = run_pipeline(&s, &small(kind)).unwrap();
        assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
        assert_eq!(a.history, b.history);
        assert_eq!(a.report, b.report);
    }
}

#[test]
fn different_seeds_differ() {
    let s = series_from("SINE", &sine(240, 25.0));
    let a = run_pipeline(&s, &small(ModelKind::Gan)).unwrap();
    let b = run_pipeline(
        &s,
        &TrainConfig {
            seed: 8,
            ..small(ModelKind::Gan)
        },
    )
    .unwrap();
    assert_ne!(a.model.generator, b.model.generator);
}

#[test]
fn forecast_loss_decreases_on_sine() {
    let s = series_from("SINE", &sine(300, 25.0));
    for kind in [ModelKind::Gan, ModelKind::LstmBaseline] {
        let cfg = TrainConfig {
            epochs: 25,
            ..small(kind)
        };
        let run = run_pipeline(&s, &cfg).unwrap();
        let h = &run.history.records;
        assert_eq!(h.len(), 25);
        assert!(h[24].g_p < h[0].g_p, "{kind:?}: {} -> {}", h[0].g_p, h[24].g_p);
    }
}

#[test]
fn both_reports_populated_and_counted() {
    let s = series_from("SINE", &sine(240, 25.0));
    let (_, test) = split_chronological(&s, 0.8).unwrap();
    for kind in [ModelKind::Gan, ModelKind::LstmBaseline] {
        let cfg = small(kind);
        let run = run_pipeline(&s, &cfg).unwrap();
        let r = run.report;
        assert_eq!(r.n_points, test.len() - cfg.m);
        for v in [r.directional_accuracy_pct, r.trend_da_pct, r.rmse, r.rmsre, r.mrmse] {
            assert!(v.is_finite());
        }
        assert_eq!(r.processing_time_s, 0.0);
        assert_eq!(run.walk_forward.dates.len(), r.n_points);
    }
}

#[test]
fn timing_enabled_reports_training_time() {
    let s = series_from("SINE", &sine(200, 25.0));
    let cfg = TrainConfig {
        timing: true,
        epochs: 2,
        ..small(ModelKind::LstmBaseline)
    };
    let run = run_pipeline(&s, &cfg).unwrap();
    assert!(run.report.processing_time_s > 0.0);
    assert_eq!(run.report.processing_time_s, run.history.total_seconds());
}

#[test]
fn test_split_never_reaches_training() {
    let values = sine(240, 25.0);
    let s = series_from("SINE", &values);
    let mut tampered = s.clone();
    let cut = (s.len() as f64 * 0.8).floor() as usize;
    for b in &mut tampered.bars[cut..] {
        b.close *= 3.0;
        b.adj_close = f64::NAN;
        b.volume = 0.0;
    }
    let cfg = small(ModelKind::Gan);
    let a = run_pipeline(&s, &cfg).unwrap();
    let b = run_pipeline(&tampered, &cfg).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert_eq!(a.history, b.history);
    assert_ne!(a.report, b.report);
}

#[test]
fn volume_input_trains_and_predicts() {
    let s = series_from("SINE", &sine(240, 25.0));
    let cfg = TrainConfig {
        include_volume: true,
        ..small(ModelKind::Gan)
    };
    let run = run_pipeline(&s, &cfg).unwrap();
    assert_eq!(run.model.generator.config.input_size, 2);
    assert!(run.model.volume_norm.is_some());
    assert!(run.report.rmse.is_finite());
    assert!(predict(&run.model, &[0.5; 12]).is_err());
    let back = TrainedModel::from_json(&run.model.to_json().unwrap()).unwrap();
    assert_eq!(back, run.model);
}

#[test]
fn predict_matches_manual_composition() {
    let s = series_from("SINE", &sine(240, 25.0));
    let run = run_pipeline(&s, &small(ModelKind::LstmBaseline)).unwrap();
    let model = &run.model;
    let window: Vec<f64> = s.bars[100..112].iter().map(|b| b.close).collect();
    let (lo, hi) = (model.norm.min_value, model.norm.max_value);
    let scaled: Vec<f64> = window.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let (y, _) = generator_forward(&model.generator, &scaled).unwrap();
    let manual = y * (hi - lo) + lo;
    assert!((predict(model, &window).unwrap() - manual).abs() < 1e-12);
}

#[test]
fn walk_forward_too_short_is_error() {
    let s = series_from("SINE", &sine(240, 25.0));
    let run = run_pipeline(&s, &small(ModelKind::LstmBaseline)).unwrap();
    let short = &s.bars[..12];
    assert!(matches!(
        walk_forward(&run.model, short),
        Err(TrainError::TooShort { .. })
    ));
}

#[test]
fn history_csv_shape() {
    let s = series_from("SINE", &sine(240, 25.0));
    let run = run_pipeline(&s, &small(ModelKind::LstmBaseline)).unwrap();
    let csv = run.history.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,g_loss,g_adv,g_p,g_dpl,d_loss,seconds");
    assert_eq!(lines.len(), 9);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Changing the value at index j (and later) cannot move any forecast
    // whose target precedes or equals j.
    #[test]
    fn forecasts_use_only_past_values(j in 0usize..60, bump in 0.1f64..5.0, tau in 1usize..3) {
        let values = sine(100, 17.0);
        let s = series_from("SINE", &values);
        let cfg = TrainConfig { tau, epochs: 1, ..small(ModelKind::LstmBaseline) };
        let run = run_pipeline(&series_from("SINE", &sine(200, 17.0)), &cfg).unwrap();
        let base = walk_forward(&run.model, &s.bars).unwrap();
        let mut bumped = s.clone();
        for b in &mut bumped.bars[j..] {
            b.close += bump;
        }
        let moved = walk_forward(&run.model, &bumped.bars).unwrap();
        for (k, &t) in base.target_index.iter().enumerate() {
            prop_assert_eq!(t, (cfg.m - 1) * tau + 1 + k);
            if t <= j {
                prop_assert_eq!(base.predicted[k], moved.predicted[k]);
            }
        }
    }
}
