mod support;

use std::sync::Arc;

use robosetup_core::acm_gen::{generate_acm, AcmGenError, AcmGenParams, AcmJob, AcmJobs};
use robosetup_core::collision::{check_state, AcmReason, AllowedCollisionMatrix, CollisionFlags, PlanningSceneWorld};
use robosetup_core::fixtures;
use robosetup_core::kinematics::{indexed_rng, sample_random_state};
use robosetup_core::model::collidable_pairs;

fn params(samples: u64, seed: u64) -> AcmGenParams {
    AcmGenParams {
        sample_count: samples,
        seed,
        ..Default::default()
    }
}

#[test]
fn two_link_has_only_the_adjacent_pair() {
    let r = generate_acm(&fixtures::planar_2link(), &params(500, 1)).unwrap();
    assert_eq!(r.acm.len(), 1);
    let e = r.acm.get("base_link", "link1").unwrap();
    assert!(e.disabled);
    assert_eq!(e.reason, AcmReason::Adjacent);
}

/// Closed-form planar positions of the three sphere centres.
fn three_link_outer_gap(a: f64, b: f64) -> f64 {
    let c1 = (0.15, 0.0);
    let f3 = (0.3 + 0.3 * a.cos(), 0.3 * a.sin());
    let c3 = (f3.0 + 0.15 * (a + b).cos(), f3.1 + 0.15 * (a + b).sin());
    ((c1.0 - c3.0).powi(2) + (c1.1 - c3.1).powi(2)).sqrt() - 0.1
}

#[test]
fn three_link_outer_pair_is_never() {
    let mut min_gap = f64::INFINITY;
    for i in 0..181 {
        for k in 0..181 {
            let a = -0.5 + i as f64 / 180.0;
            let b = -0.5 + k as f64 / 180.0;
            min_gap = min_gap.min(three_link_outer_gap(a, b));
        }
    }
    assert!(min_gap > 0.0);
    let r = generate_acm(&fixtures::planar_3link(), &params(2000, 3)).unwrap();
    let e = r.acm.get("link1", "link3").unwrap();
    assert_eq!(e.reason, AcmReason::Never);
    assert_eq!(e.stats.unwrap().collisions, 0);
    assert_eq!(r.acm.get("link1", "link2").unwrap().reason, AcmReason::Adjacent);
    assert_eq!(r.acm.get("link2", "link3").unwrap().reason, AcmReason::Adjacent);
}

#[test]
fn sets_match_the_dense_grid_oracle() {
    for name in ["planar_2link.urdf", "planar_3link.urdf", "always_pair.urdf"] {
        let expected = support::acm_oracle::classify(name, 181, 0.95);
        let model = support::fk_oracle::load(name);
        let report = generate_acm(&model, &params(5000, 11)).unwrap();
        let got = support::acm_oracle::sets_of(&report);
        assert_eq!((&got.adjacent, &got.never, &got.always), (&expected.adjacent, &expected.never, &expected.always), "{name}");
    }
}

#[test]
fn concentric_spheres_are_always() {
    let r = generate_acm(&fixtures::always_pair(), &params(300, 5)).unwrap();
    let e = r.acm.get("base_link", "shell").unwrap();
    assert_eq!(e.reason, AcmReason::Always);
    let s = e.stats.unwrap();
    assert_eq!(s.collisions, s.samples);
    assert!(r.pair("shell", "base_link").unwrap().default_collision);
}

#[test]
fn report_accounts_for_every_pair() {
    let m = fixtures::sample_arm();
    let r = generate_acm(&m, &params(2000, 9)).unwrap();
    let pairs = collidable_pairs(&m);
    assert_eq!(r.pairs.len(), pairs.len());
    for (a, b) in &pairs {
        assert_eq!(r.pairs.iter().filter(|p| &p.link1 == a && &p.link2 == b).count(), 1);
    }
    assert_eq!(r.total_disabled(), r.acm.disabled_count());
    assert_eq!(r.disabled_by_reason[&AcmReason::Adjacent], 6);
    assert!(!r.note.is_empty());
}

#[test]
fn identical_across_thread_counts() {
    let m = fixtures::sample_arm();
    let p = params(3000, 17);
    let run = |t: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        pool.install(|| generate_acm(&m, &p).unwrap()).to_deterministic_json()
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
}

#[test]
fn never_pairs_survive_an_independent_seed() {
    let m = fixtures::sample_arm();
    let r = generate_acm(&m, &params(5000, 21)).unwrap();
    let nevers: Vec<(String, String)> = r
        .acm
        .iter()
        .filter(|(_, e)| e.reason == AcmReason::Never)
        .map(|(p, _)| (p.first().to_string(), p.second().to_string()))
        .collect();
    assert!(!nevers.is_empty());
    // Check each Never pair alone, with all other pairs disabled.
    let pairs = collidable_pairs(&m);
    let world = PlanningSceneWorld::new();
    for (a, b) in &nevers {
        let mut only = AllowedCollisionMatrix::new();
        for (x, y) in &pairs {
            if (x, y) != (a, b) {
                only.disable(x, y).unwrap();
            }
        }
        for i in 0..5000 {
            let s = sample_random_state(&m, None, &mut indexed_rng(9999, i)).unwrap();
            let res = check_state(&m, &s, &only, &world, CollisionFlags::default()).unwrap();
            assert!(!res.in_collision, "{a}/{b} collided at sample {i}");
        }
    }
}

#[test]
fn invalid_params_rejected() {
    let m = fixtures::planar_2link();
    assert!(matches!(generate_acm(&m, &params(0, 0)), Err(AcmGenError::NoSamples)));
    let mut p = params(10, 0);
    p.always_threshold = 0.0;
    assert!(matches!(generate_acm(&m, &p), Err(AcmGenError::InvalidThreshold(_))));
}

#[test]
fn job_progress_is_monotone_and_completes() {
    let m = Arc::new(fixtures::sample_arm());
    let mut job = AcmJob::spawn(m.clone(), params(4000, 2), Some(2)).unwrap();
    let mut last = 0;
    while !job.is_finished() {
        let p = job.progress();
        assert!(p.done >= last);
        assert!(p.done <= p.total);
        last = p.done;
    }
    let report = job.wait().unwrap().clone();
    let p = job.progress();
    assert_eq!(p.done, p.total);
    assert_eq!(report.to_deterministic_json(), generate_acm(&m, &params(4000, 2)).unwrap().to_deterministic_json());
}

#[test]
fn job_table_allows_one_running_job() {
    let m = Arc::new(fixtures::sample_arm());
    let mut jobs = AcmJobs::new();
    let id = jobs.start(m.clone(), params(100_000, 1), Some(1)).unwrap();
    assert!(matches!(jobs.start(m.clone(), params(10, 1), None), Err(AcmGenError::JobRunning(x)) if x == id));
    assert!(matches!(jobs.get(id + 100), Err(AcmGenError::UnknownJob(_))));
    let job = jobs.get(id).unwrap();
    job.lock().unwrap().cancel();
    let err = job.lock().unwrap().wait().unwrap_err();
    assert!(err.contains("cancelled"));
    assert!(jobs.start(m, params(10, 1), None).is_ok());
}
